//! Finite nets of a box in one or two dimensions and projections onto them.
//!
//! Every net lives on an underlying uniform grid `{a + (i/n)(b-a)}`. A
//! uniform net is the whole grid; an aleatory net is a random subset of it.
//! Grid points are addressed by a linear id `i1 * (n+1) + i2` (just `i1` in
//! one dimension), so id order is the lexicographic order of coordinates.

use alloc::vec;
use alloc::vec::Vec;

use crate::math;
use crate::rng::XorShift64Star;

pub type Point = [f64; 2];

#[derive(Debug, Clone, Copy, PartialEq, thiserror::Error)]
pub enum NetError {
    #[error("dimension must be 1 or 2, got {0}")]
    InvalidDimension(usize),
    #[error("axis {axis}: interval [{lo}, {hi}] must be finite with lo < hi")]
    BadInterval { axis: usize, lo: f64, hi: f64 },
    #[error("subdivision count n must be at least 1")]
    ZeroSubdivisions,
    #[error("sample count must be at least 1")]
    ZeroSamples,
    #[error("grid with n = {0} has too many points")]
    GridTooLarge(u32),
    #[error("point ({x}, {y}) lies outside the box")]
    OutOfDomain { x: f64, y: f64 },
}

/// Axis-aligned box `[a1,b1] (x [a2,b2])`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Domain {
    dim: usize,
    lo: [f64; 2],
    hi: [f64; 2],
}

impl Domain {
    pub fn new(intervals: &[(f64, f64)]) -> Result<Self, NetError> {
        let dim = intervals.len();
        if !(1..=2).contains(&dim) {
            return Err(NetError::InvalidDimension(dim));
        }
        let mut lo = [0.0; 2];
        let mut hi = [0.0; 2];
        for (axis, &(a, b)) in intervals.iter().enumerate() {
            if !(a.is_finite() && b.is_finite() && a < b) {
                return Err(NetError::BadInterval { axis, lo: a, hi: b });
            }
            lo[axis] = a;
            hi[axis] = b;
        }
        Ok(Domain { dim, lo, hi })
    }

    pub fn unit(dim: usize) -> Result<Self, NetError> {
        match dim {
            1 => Self::new(&[(0.0, 1.0)]),
            2 => Self::new(&[(0.0, 1.0), (0.0, 1.0)]),
            d => Err(NetError::InvalidDimension(d)),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn lo(&self, axis: usize) -> f64 {
        self.lo[axis]
    }

    pub fn hi(&self, axis: usize) -> f64 {
        self.hi[axis]
    }

    pub fn width(&self, axis: usize) -> f64 {
        self.hi[axis] - self.lo[axis]
    }

    /// Length of the main diagonal, `‖b - a‖₂`.
    pub fn diameter(&self) -> f64 {
        let mut s = 0.0;
        for k in 0..self.dim {
            s += self.width(k) * self.width(k);
        }
        math::sqrt(s)
    }

    pub fn center(&self) -> Point {
        let mut c = [0.0; 2];
        for (k, v) in c.iter_mut().enumerate().take(self.dim) {
            *v = 0.5 * (self.lo[k] + self.hi[k]);
        }
        c
    }

    pub fn contains(&self, p: &Point) -> bool {
        (0..self.dim).all(|k| p[k] >= self.lo[k] && p[k] <= self.hi[k])
    }

    /// Nearest point of the box; the flag is set when `p` was outside.
    pub fn clamp(&self, p: &Point) -> (Point, bool) {
        let mut q = [0.0; 2];
        let mut moved = false;
        for k in 0..self.dim {
            let v = if p[k].is_nan() { self.lo[k] } else { p[k].clamp(self.lo[k], self.hi[k]) };
            moved |= v != p[k];
            q[k] = v;
        }
        (q, moved)
    }
}

/// Integer grid coordinates; the second entry is 0 in one dimension.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct GridIndex(pub [u32; 2]);

/// The uniform grid of a box with `n` subdivisions per axis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    domain: Domain,
    n: u32,
}

// Relative slack, in cell units, under which a coordinate is treated as
// lying exactly on a grid line before the ceiling is taken.
const SNAP: f64 = 1e-9;

impl Grid {
    pub fn new(domain: Domain, n: u32) -> Result<Self, NetError> {
        if n == 0 {
            return Err(NetError::ZeroSubdivisions);
        }
        let side = u64::from(n) + 1;
        let total = if domain.dim == 1 { side } else { side * side };
        if total > u64::from(u32::MAX) {
            return Err(NetError::GridTooLarge(n));
        }
        Ok(Grid { domain, n })
    }

    pub fn domain(&self) -> &Domain {
        &self.domain
    }

    pub fn dim(&self) -> usize {
        self.domain.dim
    }

    pub fn n(&self) -> u32 {
        self.n
    }

    /// Number of grid points, `(n+1)^d`.
    pub fn len(&self) -> usize {
        let side = self.n as usize + 1;
        if self.dim() == 1 {
            side
        } else {
            side * side
        }
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn spacing(&self, axis: usize) -> f64 {
        self.domain.width(axis) / f64::from(self.n)
    }

    /// `‖(b - a)/n‖₂`, the full cell diagonal.
    pub fn cell_diagonal(&self) -> f64 {
        let mut s = 0.0;
        for k in 0..self.dim() {
            s += self.spacing(k) * self.spacing(k);
        }
        math::sqrt(s)
    }

    pub fn id(&self, gi: GridIndex) -> u32 {
        if self.dim() == 1 {
            gi.0[0]
        } else {
            gi.0[0] * (self.n + 1) + gi.0[1]
        }
    }

    pub fn grid_index(&self, id: u32) -> GridIndex {
        if self.dim() == 1 {
            GridIndex([id, 0])
        } else {
            GridIndex([id / (self.n + 1), id % (self.n + 1)])
        }
    }

    pub fn coord(&self, axis: usize, i: u32) -> f64 {
        if i == self.n {
            return self.domain.hi[axis];
        }
        self.domain.lo[axis] + self.domain.width(axis) * f64::from(i) / f64::from(self.n)
    }

    pub fn coords(&self, id: u32) -> Point {
        let gi = self.grid_index(id);
        let mut p = [0.0; 2];
        for (k, v) in p.iter_mut().enumerate().take(self.dim()) {
            *v = self.coord(k, gi.0[k]);
        }
        p
    }

    /// Euclidean distance between two grid points.
    pub fn distance(&self, a: u32, b: u32) -> f64 {
        math::sqrt(self.distance_sq(a, b))
    }

    pub fn distance_sq(&self, a: u32, b: u32) -> f64 {
        let (ga, gb) = (self.grid_index(a), self.grid_index(b));
        let mut s = 0.0;
        for k in 0..self.dim() {
            let di = f64::from(ga.0[k].abs_diff(gb.0[k])) * self.spacing(k);
            s += di * di;
        }
        s
    }

    fn scaled(&self, axis: usize, v: f64) -> f64 {
        f64::from(self.n) * (v - self.domain.lo[axis]) / self.domain.width(axis)
    }

    /// Per-axis ceiling index of an in-box point.
    pub fn ceil_index(&self, p: &Point) -> GridIndex {
        let mut gi = [0u32; 2];
        for (k, v) in gi.iter_mut().enumerate().take(self.dim()) {
            let t = self.scaled(k, p[k]);
            let r = math::round(t);
            let c = if math::abs(t - r) <= SNAP * r.max(1.0) { r } else { math::ceil(t) };
            *v = c.clamp(0.0, f64::from(self.n)) as u32;
        }
        GridIndex(gi)
    }

    /// Per-axis nearest index; exact halves go to the lower index.
    pub fn nearest_index(&self, p: &Point) -> GridIndex {
        let mut gi = [0u32; 2];
        for (k, v) in gi.iter_mut().enumerate().take(self.dim()) {
            let t = self.scaled(k, p[k]).clamp(0.0, f64::from(self.n));
            let fl = math::floor(t);
            let c = if t - fl > 0.5 { fl + 1.0 } else { fl };
            *v = c.clamp(0.0, f64::from(self.n)) as u32;
        }
        GridIndex(gi)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NetKind {
    Uniform,
    Aleatory { samples: u64, seed: u64 },
}

/// Result of projecting an arbitrary point; `clamped` marks a point that had
/// to be pulled back into the box first.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Projection {
    pub id: u32,
    pub clamped: bool,
}

/// A finite net: either the whole grid or a sampled subset of it.
#[derive(Debug, Clone)]
pub struct Net {
    grid: Grid,
    kind: NetKind,
    points: Vec<u32>,
    mask: Vec<u64>,
}

impl Net {
    pub fn uniform(domain: Domain, n: u32) -> Result<Self, NetError> {
        let grid = Grid::new(domain, n)?;
        let len = grid.len();
        let mut mask = vec![u64::MAX; len.div_ceil(64)];
        if len % 64 != 0 {
            *mask.last_mut().unwrap() = (1u64 << (len % 64)) - 1;
        }
        Ok(Net {
            grid,
            kind: NetKind::Uniform,
            points: (0..len as u32).collect(),
            mask,
        })
    }

    /// Chaos game over the constant maps `g_t(z) = t`, `t` in the grid. Each
    /// step outputs a uniformly drawn grid point whatever the state, so the
    /// sequence is `samples` i.i.d. draws of linear ids via
    /// [`XorShift64Star::below`]. Duplicates collapse; ids come out sorted.
    pub fn aleatory(domain: Domain, n: u32, samples: u64, seed: u64) -> Result<Self, NetError> {
        if samples == 0 {
            return Err(NetError::ZeroSamples);
        }
        let grid = Grid::new(domain, n)?;
        let len = grid.len();
        let mut mask = vec![0u64; len.div_ceil(64)];
        let mut rng = XorShift64Star::new(seed);
        for _ in 0..samples {
            let id = rng.below(len as u64) as usize;
            mask[id / 64] |= 1 << (id % 64);
        }
        let points = mask_ids(&mask);
        Ok(Net {
            grid,
            kind: NetKind::Aleatory { samples, seed },
            points,
            mask,
        })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn domain(&self) -> &Domain {
        self.grid.domain()
    }

    pub fn kind(&self) -> NetKind {
        self.kind
    }

    pub fn is_uniform(&self) -> bool {
        self.kind == NetKind::Uniform
    }

    /// Sorted linear ids of the net points.
    pub fn points(&self) -> &[u32] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn contains(&self, id: u32) -> bool {
        (id as usize) < self.grid.len() && self.mask[id as usize / 64] >> (id % 64) & 1 == 1
    }

    pub fn coords(&self, id: u32) -> Point {
        self.grid.coords(id)
    }

    /// Half the cell diagonal: the covering radius of the full grid.
    /// For aleatory nets this is only nominal.
    pub fn epsilon(&self) -> f64 {
        0.5 * self.grid.cell_diagonal()
    }

    /// Full cell diagonal, the distance bound of the ceiling projection.
    /// All resolution estimates use this value.
    pub fn effective_epsilon(&self) -> f64 {
        self.grid.cell_diagonal()
    }

    /// Whether `epsilon` is a guarantee (uniform) or a heuristic (aleatory).
    pub fn epsilon_is_guaranteed(&self) -> bool {
        self.is_uniform()
    }

    /// Projection used by the operators: clamp into the box, then the ceiling
    /// map on uniform nets or the nearest net point on aleatory nets.
    pub fn project(&self, p: &Point) -> Projection {
        let (q, clamped) = self.grid.domain().clamp(p);
        let id = match self.kind {
            NetKind::Uniform => self.grid.id(self.grid.ceil_index(&q)),
            NetKind::Aleatory { .. } => self.nearest_in_mask(&q),
        };
        Projection { id, clamped }
    }

    /// `r(z) = (⌈n z_k⌉ / n)_k`, mapped affinely onto the box. Coordinates
    /// within 1e-9 cells of a grid line snap onto it, so net points are fixed.
    pub fn project_uniform(&self, p: &Point) -> Result<u32, NetError> {
        if !self.grid.domain().contains(p) {
            return Err(NetError::OutOfDomain { x: p[0], y: p[1] });
        }
        Ok(self.grid.id(self.grid.ceil_index(p)))
    }

    /// Net point at minimum Euclidean distance; ties go to the
    /// lexicographically smallest point. Points outside the box are clamped.
    pub fn project_nearest(&self, p: &Point) -> u32 {
        let (q, _) = self.grid.domain().clamp(p);
        match self.kind {
            NetKind::Uniform => self.grid.id(self.grid.nearest_index(&q)),
            NetKind::Aleatory { .. } => self.nearest_in_mask(&q),
        }
    }

    fn dist_sq_to(&self, p: &Point, gi: [u32; 2]) -> f64 {
        let mut s = 0.0;
        for (k, i) in gi.iter().enumerate().take(self.grid.dim()) {
            let d = p[k] - self.grid.coord(k, *i);
            s += d * d;
        }
        s
    }

    // Expanding Chebyshev rings around the nearest grid index. A point in
    // ring r is at least (r - 1/2)·h_min away, which bounds the search.
    fn nearest_in_mask(&self, p: &Point) -> u32 {
        let grid = &self.grid;
        let dim = grid.dim();
        let n = i64::from(grid.n());
        let c = grid.nearest_index(p).0;
        let h_min = (0..dim).map(|k| grid.spacing(k)).fold(f64::INFINITY, f64::min);
        let mut best: Option<(f64, u32)> = None;
        let consider = |gi: [i64; 2], best: &mut Option<(f64, u32)>| {
            if gi[0] < 0 || gi[0] > n || gi[1] < 0 || gi[1] > n {
                return;
            }
            let g = [gi[0] as u32, gi[1] as u32];
            let id = grid.id(GridIndex(g));
            if !self.contains(id) {
                return;
            }
            let d2 = self.dist_sq_to(p, g);
            match best {
                Some((bd, bid)) if (d2, id) >= (*bd, *bid) => {}
                _ => *best = Some((d2, id)),
            }
        };
        let (c0, c1) = (i64::from(c[0]), i64::from(c[1]));
        for r in 0..=n {
            if let Some((bd, _)) = best {
                let lb = (r as f64 - 0.5) * h_min;
                if lb > 0.0 && lb * lb > bd * (1.0 + 1e-12) {
                    break;
                }
            }
            if dim == 1 {
                consider([c0 - r, 0], &mut best);
                if r > 0 {
                    consider([c0 + r, 0], &mut best);
                }
            } else if r == 0 {
                consider([c0, c1], &mut best);
            } else {
                for j in (c1 - r)..=(c1 + r) {
                    consider([c0 - r, j], &mut best);
                    consider([c0 + r, j], &mut best);
                }
                for i in (c0 - r + 1)..=(c0 + r - 1) {
                    consider([i, c1 - r], &mut best);
                    consider([i, c1 + r], &mut best);
                }
            }
        }
        best.expect("net is never empty").1
    }
}

pub(crate) fn mask_ids(mask: &[u64]) -> Vec<u32> {
    let mut out = Vec::new();
    for (w, &word) in mask.iter().enumerate() {
        let mut bits = word;
        while bits != 0 {
            let b = bits.trailing_zeros();
            out.push((w * 64) as u32 + b);
            bits &= bits - 1;
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::XorShift64Star;

    fn unit2() -> Domain {
        Domain::unit(2).unwrap()
    }

    #[test]
    fn uniform_net_sizes_and_epsilon() {
        let net = Net::uniform(unit2(), 2).unwrap();
        assert_eq!(net.len(), 9);
        assert!((net.epsilon() - 2f64.sqrt() / 4.0).abs() < 1e-15);

        let line = Net::uniform(Domain::unit(1).unwrap(), 4).unwrap();
        let xs: Vec<f64> = line.points().iter().map(|&i| line.coords(i)[0]).collect();
        assert_eq!(xs, vec![0.0, 0.25, 0.5, 0.75, 1.0]);
        assert_eq!(line.epsilon(), 0.125);

        let big = Net::uniform(Domain::new(&[(0.0, 2.1), (0.1, 2.4)]).unwrap(), 700).unwrap();
        assert_eq!(big.len(), 701 * 701);
        assert!(big.points().iter().all(|&i| big.domain().contains(&big.coords(i))));
    }

    #[test]
    fn diameter_of_boxes() {
        assert!((unit2().diameter() - 2f64.sqrt()).abs() < 1e-15);
        let d = Domain::new(&[(0.0, 2.1), (0.1, 2.4)]).unwrap().diameter();
        assert!((d - 3.114482300).abs() < 1e-9);
    }

    #[test]
    fn domain_validation() {
        assert_eq!(Domain::new(&[]), Err(NetError::InvalidDimension(0)));
        assert!(matches!(Domain::new(&[(1.0, 1.0)]), Err(NetError::BadInterval { .. })));
        assert!(matches!(Domain::new(&[(0.0, f64::NAN)]), Err(NetError::BadInterval { .. })));
        assert_eq!(Grid::new(unit2(), 0), Err(NetError::ZeroSubdivisions));
        assert_eq!(Grid::new(unit2(), 70_000), Err(NetError::GridTooLarge(70_000)));
    }

    #[test]
    fn ceiling_projection_examples() {
        let line = Net::uniform(Domain::unit(1).unwrap(), 10).unwrap();
        let x = |id: u32| line.coords(id)[0];
        assert!((x(line.project_uniform(&[0.31, 0.0]).unwrap()) - 0.4).abs() < 1e-15);
        assert!((x(line.project_uniform(&[0.3, 0.0]).unwrap()) - 0.3).abs() < 1e-15);

        let sq = Net::uniform(unit2(), 2).unwrap();
        let id = sq.project_uniform(&[0.25, 0.9]).unwrap();
        assert_eq!(sq.coords(id), [0.5, 1.0]);
        assert!(matches!(sq.project_uniform(&[1.5, 0.0]), Err(NetError::OutOfDomain { .. })));
    }

    #[test]
    fn ceiling_projection_fixes_net_points_and_stays_within_cell_diagonal() {
        let dom = Domain::new(&[(0.0, 2.1), (0.1, 2.4)]).unwrap();
        let net = Net::uniform(dom, 97).unwrap();
        for &id in net.points() {
            assert_eq!(net.project_uniform(&net.coords(id)).unwrap(), id);
            assert_eq!(net.project_nearest(&net.coords(id)), id);
        }
        let mut rng = XorShift64Star::new(3);
        let diag = net.effective_epsilon();
        for _ in 0..100_000 {
            let p = [2.1 * rng.unit(), 0.1 + 2.3 * rng.unit()];
            let q = net.coords(net.project_uniform(&p).unwrap());
            let d = math::hypot(p[0] - q[0], p[1] - q[1]);
            assert!(d <= diag * (1.0 + 1e-12));
            let q = net.coords(net.project_nearest(&p));
            assert!(math::hypot(p[0] - q[0], p[1] - q[1]) <= net.epsilon() * (1.0 + 1e-12));
        }
    }

    #[test]
    fn clamping_outside_points() {
        let net = Net::uniform(unit2(), 4).unwrap();
        let pr = net.project(&[1.3, -0.2]);
        assert!(pr.clamped);
        assert_eq!(net.coords(pr.id), [1.0, 0.0]);
        assert!(!net.project(&[0.5, 0.5]).clamped);
    }

    #[test]
    fn aleatory_net_membership_and_determinism() {
        let a = Net::aleatory(unit2(), 10, 3, 42).unwrap();
        assert!(!a.is_empty() && a.len() <= 3);
        let full = Net::uniform(unit2(), 10).unwrap();
        assert!(a.points().iter().all(|&id| full.contains(id)));
        let b = Net::aleatory(unit2(), 10, 3, 42).unwrap();
        assert_eq!(a.points(), b.points());
        assert!(a.points().windows(2).all(|w| w[0] < w[1]));
        assert_eq!(Net::aleatory(unit2(), 10, 0, 1).unwrap_err(), NetError::ZeroSamples);
    }

    #[test]
    fn aleatory_net_covers_line_grid() {
        // Coupon collector: ~201·H(201) ≈ 1.2e3 draws cover 201 bins; 1e6 is plenty.
        let net = Net::aleatory(Domain::unit(1).unwrap(), 200, 1_000_000, 9).unwrap();
        assert!(net.len() >= 200);
    }

    #[test]
    fn nearest_projection_tie_breaks_low() {
        let line = Net::uniform(Domain::unit(1).unwrap(), 1).unwrap();
        assert_eq!(line.coords(line.project_nearest(&[0.4, 0.0]))[0], 0.0);
        assert_eq!(line.coords(line.project_nearest(&[0.5, 0.0]))[0], 0.0);
        assert_eq!(line.coords(line.project_nearest(&[0.6, 0.0]))[0], 1.0);

        // Sampled net that happens to contain only the two endpoints.
        let mut two = Net::aleatory(Domain::unit(1).unwrap(), 1, 1, 0).unwrap();
        two.mask = vec![0b11];
        two.points = vec![0, 1];
        assert_eq!(two.project_nearest(&[0.5, 0.0]), 0);
        assert_eq!(two.project_nearest(&[0.51, 0.0]), 1);
    }

    #[test]
    fn sampled_nearest_matches_brute_force() {
        let dom = Domain::new(&[(-1.0, 1.0), (0.0, 0.5)]).unwrap();
        let net = Net::aleatory(dom, 40, 60, 5).unwrap();
        let mut rng = XorShift64Star::new(11);
        for _ in 0..5_000 {
            let p = [-1.0 + 2.0 * rng.unit(), 0.5 * rng.unit()];
            let got = net.project_nearest(&p);
            let want = net
                .points()
                .iter()
                .map(|&id| {
                    let q = net.coords(id);
                    ((p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2), id)
                })
                .min_by(|a, b| a.partial_cmp(b).unwrap())
                .unwrap()
                .1;
            assert_eq!(got, want);
        }
    }

    #[test]
    fn projections_agree_on_net_points() {
        let net = Net::uniform(unit2(), 13).unwrap();
        for &id in net.points() {
            let p = net.coords(id);
            assert_eq!(net.project_uniform(&p).unwrap(), net.project_nearest(&p));
        }
        let s = Net::aleatory(unit2(), 13, 50, 2).unwrap();
        for &id in s.points() {
            assert_eq!(s.project_nearest(&s.coords(id)), id);
        }
    }

    #[test]
    fn grid_distance() {
        let g = Grid::new(Domain::new(&[(0.0, 3.0), (0.0, 4.0)]).unwrap(), 1).unwrap();
        assert_eq!(g.distance(g.id(GridIndex([0, 0])), g.id(GridIndex([1, 1]))), 5.0);
    }
}
