//! Binary PGM (P5) output.
//!
//! The raster has one pixel per grid point, `(n+1) × (n+1)`, top row at the
//! largest `y`. Fuzzy sets map membership `u` to grey `round(255·u)`, so
//! membership 1 is white. Crisp sets are black points on white. `invert`
//! swaps both conventions. One-dimensional sets are drawn as a graph: crisp
//! members fill their column, fuzzy memberships rise as bars from the
//! bottom row, drawn in the membership-1 colour.

use std::io::{self, Write};
use std::path::Path;

use ifsnet_core::{DiscreteFuzzySet, DiscreteSet, Grid};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Raster {
    pub width: usize,
    pub height: usize,
    pub pixels: Vec<u8>,
}

impl Raster {
    fn filled(grid: &Grid, value: u8) -> Self {
        let side = grid.n() as usize + 1;
        Raster {
            width: side,
            height: side,
            pixels: vec![value; side * side],
        }
    }

    fn set(&mut self, col: usize, row_from_bottom: usize, value: u8) {
        let row = self.height - 1 - row_from_bottom;
        self.pixels[row * self.width + col] = value;
    }

    pub fn get(&self, col: usize, row: usize) -> u8 {
        self.pixels[row * self.width + col]
    }

    /// `P5` header followed by the rows.
    pub fn encode_pgm(&self) -> Vec<u8> {
        let mut out = format!("P5\n{} {}\n255\n", self.width, self.height).into_bytes();
        out.extend_from_slice(&self.pixels);
        out
    }

    pub fn write_pgm(&self, path: &Path) -> io::Result<()> {
        let mut f = io::BufWriter::new(std::fs::File::create(path)?);
        f.write_all(&self.encode_pgm())?;
        f.flush()
    }
}

pub fn crisp_raster(set: &DiscreteSet, invert: bool) -> Raster {
    let grid = set.grid();
    let (member, background) = if invert { (255, 0) } else { (0, 255) };
    let mut r = Raster::filled(grid, background);
    for &id in set.ids() {
        let gi = grid.grid_index(id).0;
        if grid.dim() == 1 {
            for row in 0..r.height {
                r.set(gi[0] as usize, row, member);
            }
        } else {
            r.set(gi[0] as usize, gi[1] as usize, member);
        }
    }
    r
}

pub fn fuzzy_raster(u: &DiscreteFuzzySet, invert: bool) -> Raster {
    let grid = u.grid();
    let shade = |b: u8| if invert { 255 - b } else { b };
    let mut r = Raster::filled(grid, shade(0));
    let n = grid.n() as usize;
    for &(id, m) in u.entries() {
        let gi = grid.grid_index(id).0;
        if grid.dim() == 1 {
            // Bar height round(n·u), half up.
            let top = (2 * n * usize::from(m.level()) + usize::from(ifsnet_core::operators::LEVELS))
                / (2 * usize::from(ifsnet_core::operators::LEVELS));
            for row in 0..=top {
                r.set(gi[0] as usize, row, shade(255));
            }
        } else {
            r.set(gi[0] as usize, gi[1] as usize, shade(m.byte()));
        }
    }
    r
}
