//! Discrete Hutchinson operators, crisp and fuzzy, for maps of any arity,
//! and the inverse-image table `Φ⁻¹` that drives the fuzzy steps.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::sync::atomic::{AtomicU64, Ordering};

use crate::expr::EvalError;
use crate::nets::{mask_ids, Grid, Net, Point};
use crate::systems::SystemSpec;

/// Number of membership steps: memberships are `k / LEVELS`.
///
/// 1020 is a multiple of both 255 (so every 8-bit grey value is exact) and 4
/// (so quarter values are exact).
pub const LEVELS: u16 = 1020;

/// A quantized membership value `k / LEVELS`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Membership(u16);

impl Membership {
    pub const ZERO: Membership = Membership(0);
    pub const ONE: Membership = Membership(LEVELS);

    pub fn from_level(k: u16) -> Option<Self> {
        (k <= LEVELS).then_some(Membership(k))
    }

    /// Clamps to [0, 1] and rounds half up; NaN maps to 0.
    pub fn quantize(v: f64) -> Self {
        if !(v > 0.0) {
            return Membership::ZERO;
        }
        if v >= 1.0 {
            return Membership::ONE;
        }
        let k = libm::floor(v * f64::from(LEVELS) + 0.5);
        Membership((k as u16).min(LEVELS))
    }

    pub fn level(self) -> u16 {
        self.0
    }

    pub fn value(self) -> f64 {
        f64::from(self.0) / f64::from(LEVELS)
    }

    /// `round(255·u)`, half up.
    pub fn byte(self) -> u8 {
        ((self.0 + 2) / 4) as u8
    }

    pub fn is_zero(self) -> bool {
        self.0 == 0
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum TableError {
    #[error("table I/O failed: {0}")]
    Io(String),
    #[error("table is corrupt: {0}")]
    Corrupt(String),
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum OperatorError {
    #[error("net box differs from the system box")]
    DomainMismatch,
    #[error("operator expects arity {expected}, system has {found}")]
    ArityMismatch { expected: &'static str, found: usize },
    #[error("system has no grey maps")]
    NotFuzzy,
    #[error("map {map}: {error}")]
    Eval { map: usize, error: EvalError },
    #[error("grey map {map}: {error}")]
    Grey { map: usize, error: EvalError },
    #[error("{needed} map evaluations exceed the budget of {budget}; reduce n or use an aleatory net")]
    Budget { needed: u64, budget: u64 },
    #[error("sets live on different grids")]
    GridMismatch,
    #[error("grid id {0} is outside the grid")]
    OutOfGrid(u32),
    #[error("operator needs a nonempty set")]
    EmptySet,
    #[error("table shape {found:?} does not match system and net {expected:?}")]
    TableMismatch { expected: TableShape, found: TableShape },
    #[error(transparent)]
    Table(#[from] TableError),
}

/// A finite set of grid points.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteSet {
    grid: Grid,
    ids: Vec<u32>,
}

impl DiscreteSet {
    /// Sorts and deduplicates `ids`.
    pub fn new(grid: Grid, mut ids: Vec<u32>) -> Result<Self, OperatorError> {
        ids.sort_unstable();
        ids.dedup();
        if let Some(&last) = ids.last() {
            if last as usize >= grid.len() {
                return Err(OperatorError::OutOfGrid(last));
            }
        }
        Ok(DiscreteSet { grid, ids })
    }

    pub fn empty(grid: Grid) -> Self {
        DiscreteSet { grid, ids: Vec::new() }
    }

    /// Projects each point onto the net.
    pub fn from_points(net: &Net, points: &[Point]) -> Self {
        let ids = points.iter().map(|p| net.project(p).id).collect();
        Self::new(*net.grid(), ids).expect("projections are grid points")
    }

    fn from_mask(grid: Grid, mask: &[u64]) -> Self {
        DiscreteSet { grid, ids: mask_ids(mask) }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    /// Sorted linear ids.
    pub fn ids(&self) -> &[u32] {
        &self.ids
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn contains(&self, id: u32) -> bool {
        self.ids.binary_search(&id).is_ok()
    }

    pub fn points(&self) -> impl Iterator<Item = Point> + '_ {
        self.ids.iter().map(|&id| self.grid.coords(id))
    }
}

/// A fuzzy set on the grid with finite support, stored as sorted
/// `(id, membership)` pairs with nonzero memberships.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteFuzzySet {
    grid: Grid,
    entries: Vec<(u32, Membership)>,
}

impl DiscreteFuzzySet {
    /// Sorts, merges duplicates by maximum and drops zero memberships.
    pub fn new(grid: Grid, mut entries: Vec<(u32, Membership)>) -> Result<Self, OperatorError> {
        entries.retain(|e| !e.1.is_zero());
        entries.sort_unstable();
        // After sorting, the last entry of each id run carries the maximum.
        let mut merged: Vec<(u32, Membership)> = Vec::with_capacity(entries.len());
        for e in entries {
            match merged.last_mut() {
                Some(last) if last.0 == e.0 => *last = e,
                _ => merged.push(e),
            }
        }
        if let Some(&(last, _)) = merged.last() {
            if last as usize >= grid.len() {
                return Err(OperatorError::OutOfGrid(last));
            }
        }
        Ok(DiscreteFuzzySet { grid, entries: merged })
    }

    /// Projects each point onto the net; memberships are quantized.
    pub fn from_points(net: &Net, points: &[(Point, f64)]) -> Self {
        let entries = points
            .iter()
            .map(|(p, m)| (net.project(p).id, Membership::quantize(*m)))
            .collect();
        Self::new(*net.grid(), entries).expect("projections are grid points")
    }

    fn from_dense(grid: Grid, dense: &[u16]) -> Self {
        let entries = dense
            .iter()
            .enumerate()
            .filter(|(_, &k)| k > 0)
            .map(|(i, &k)| (i as u32, Membership(k)))
            .collect();
        DiscreteFuzzySet { grid, entries }
    }

    fn to_dense(&self) -> Vec<u16> {
        let mut dense = vec![0u16; self.grid.len()];
        for &(id, m) in &self.entries {
            dense[id as usize] = m.0;
        }
        dense
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn entries(&self) -> &[(u32, Membership)] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, id: u32) -> Membership {
        match self.entries.binary_search_by_key(&id, |e| e.0) {
            Ok(i) => self.entries[i].1,
            Err(_) => Membership::ZERO,
        }
    }

    pub fn max_membership(&self) -> Membership {
        self.entries.iter().map(|e| e.1).max().unwrap_or(Membership::ZERO)
    }

    /// Some point has membership 1.
    pub fn is_normal(&self) -> bool {
        self.max_membership() == Membership::ONE
    }

    pub fn support(&self) -> DiscreteSet {
        DiscreteSet {
            grid: self.grid,
            ids: self.entries.iter().map(|e| e.0).collect(),
        }
    }

    /// Distinct nonzero membership levels, ascending.
    pub fn levels(&self) -> Vec<Membership> {
        let mut l: Vec<Membership> = self.entries.iter().map(|e| e.1).collect();
        l.sort_unstable();
        l.dedup();
        l
    }
}

/// `[u]^α = {x : u(x) ≥ α}`; may be empty.
pub fn alpha_cut(u: &DiscreteFuzzySet, alpha: f64) -> DiscreteSet {
    DiscreteSet {
        grid: u.grid,
        ids: u
            .entries
            .iter()
            .filter(|e| e.1.value() >= alpha)
            .map(|e| e.0)
            .collect(),
    }
}

/// Cut at a quantized level.
pub fn alpha_cut_level(u: &DiscreteFuzzySet, level: Membership) -> DiscreteSet {
    DiscreteSet {
        grid: u.grid,
        ids: u.entries.iter().filter(|e| e.1 >= level).map(|e| e.0).collect(),
    }
}

/// `χ_K`.
pub fn characteristic(k: &DiscreteSet) -> DiscreteFuzzySet {
    DiscreteFuzzySet {
        grid: k.grid,
        entries: k.ids.iter().map(|&id| (id, Membership::ONE)).collect(),
    }
}

/// A system bound to a net: evaluates `r(φ_j(·))` and counts how often an
/// image had to be clamped back into the box.
#[derive(Debug)]
pub struct Discretization<'a> {
    spec: &'a SystemSpec,
    net: &'a Net,
    grey: Option<Vec<Vec<u16>>>,
    clamps: AtomicU64,
}

impl<'a> Discretization<'a> {
    /// Grey maps, if any, are tabulated on the membership levels here.
    pub fn new(spec: &'a SystemSpec, net: &'a Net) -> Result<Self, OperatorError> {
        if spec.domain() != net.domain() {
            return Err(OperatorError::DomainMismatch);
        }
        let grey = match spec.grey_maps() {
            None => None,
            Some(maps) => {
                let mut luts = Vec::with_capacity(maps.len());
                for (j, g) in maps.iter().enumerate() {
                    let mut lut = Vec::with_capacity(usize::from(LEVELS) + 1);
                    // sup ∅ = 0 is taken before ρ, and ρ(0) = 0.
                    lut.push(0);
                    for k in 1..=LEVELS {
                        let t = f64::from(k) / f64::from(LEVELS);
                        let v = g.value(t).map_err(|error| OperatorError::Grey { map: j + 1, error })?;
                        lut.push(Membership::quantize(v).0);
                    }
                    luts.push(lut);
                }
                Some(luts)
            }
        };
        Ok(Discretization {
            spec,
            net,
            grey,
            clamps: AtomicU64::new(0),
        })
    }

    pub fn spec(&self) -> &SystemSpec {
        self.spec
    }

    pub fn net(&self) -> &Net {
        self.net
    }

    pub fn grid(&self) -> &Grid {
        self.net.grid()
    }

    /// Number of map images that fell outside the box and were clamped.
    pub fn clamp_count(&self) -> u64 {
        self.clamps.load(Ordering::Relaxed)
    }

    /// `ρ_j` on membership levels, quantized.
    pub fn grey_level(&self, map: usize, m: Membership) -> Option<Membership> {
        self.grey.as_ref().map(|g| Membership(g[map][usize::from(m.0)]))
    }

    pub fn table_shape(&self) -> TableShape {
        TableShape {
            maps: self.spec.map_count() as u32,
            arity: self.spec.arity() as u32,
            dim: self.spec.dim() as u32,
            n: self.net.grid().n(),
        }
    }

    /// `r(φ_j(x₁, …, x_m))` for coordinates given point-major.
    pub fn image(&self, map: usize, input: &[f64]) -> Result<u32, OperatorError> {
        let mut out = [0.0; 2];
        self.spec.maps()[map]
            .eval(input, &mut out)
            .map_err(|error| OperatorError::Eval { map: map + 1, error })?;
        if !out[..self.spec.dim()].iter().all(|v| v.is_finite()) {
            return Err(OperatorError::Eval {
                map: map + 1,
                error: EvalError::NonFinite,
            });
        }
        let p = self.net.project(&out);
        if p.clamped {
            self.clamps.fetch_add(1, Ordering::Relaxed);
        }
        Ok(p.id)
    }

    /// `|points|^m · L`, saturating.
    pub fn work(&self, points: usize) -> u64 {
        let mut w: u128 = self.spec.map_count() as u128;
        for _ in 0..self.spec.arity() {
            w = w.saturating_mul(points as u128);
        }
        w.min(u128::from(u64::MAX)) as u64
    }

    pub fn check_budget(&self, points: usize, budget: u64) -> Result<u64, OperatorError> {
        let needed = self.work(points);
        if needed > budget {
            return Err(OperatorError::Budget { needed, budget });
        }
        Ok(needed)
    }

    /// Calls `f(j, positions, target)` for every map `j` (0-based) and every
    /// m-tuple of `points`, `positions` holding indices into `points`.
    /// Order: map major, tuples lexicographic in position.
    pub fn for_each_image(
        &self,
        points: &[u32],
        mut f: impl FnMut(usize, &[usize], u32),
    ) -> Result<(), OperatorError> {
        let m = self.spec.arity();
        let dim = self.spec.dim();
        if points.is_empty() {
            return Ok(());
        }
        let coords: Vec<Point> = points.iter().map(|&id| self.net.coords(id)).collect();
        let mut pos = vec![0usize; m];
        let mut input = vec![0.0; m * dim];
        for j in 0..self.spec.map_count() {
            pos.iter_mut().for_each(|p| *p = 0);
            for (i, _) in pos.iter().enumerate() {
                input[i * dim..(i + 1) * dim].copy_from_slice(&coords[0][..dim]);
            }
            loop {
                let target = self.image(j, &input)?;
                f(j, &pos, target);
                // Odometer, last position fastest.
                let mut i = m;
                loop {
                    if i == 0 {
                        break;
                    }
                    i -= 1;
                    pos[i] += 1;
                    if pos[i] < points.len() {
                        input[i * dim..(i + 1) * dim].copy_from_slice(&coords[pos[i]][..dim]);
                        break;
                    }
                    pos[i] = 0;
                    input[i * dim..(i + 1) * dim].copy_from_slice(&coords[0][..dim]);
                    if i == 0 {
                        i = usize::MAX;
                        break;
                    }
                }
                if i == usize::MAX {
                    break;
                }
            }
        }
        Ok(())
    }
}

fn require_arity(d: &Discretization<'_>, generalized: bool) -> Result<(), OperatorError> {
    let m = d.spec.arity();
    match (generalized, m) {
        (false, 1) => Ok(()),
        (false, _) => Err(OperatorError::ArityMismatch { expected: "1", found: m }),
        (true, _) => Ok(()),
    }
}

fn check_grid(d: &Discretization<'_>, g: &Grid) -> Result<(), OperatorError> {
    if g != d.grid() {
        return Err(OperatorError::GridMismatch);
    }
    Ok(())
}

/// `F̂(W) = ∪_j r(φ_j(W))` for a system of arity 1.
pub fn hutchinson_step(d: &Discretization<'_>, w: &DiscreteSet) -> Result<DiscreteSet, OperatorError> {
    require_arity(d, false)?;
    generalized_hutchinson_step(d, w, u64::MAX)
}

/// `F̄(W) = ∪_j r(φ_j(W × … × W))`; `|W|^m·L` must be within `budget`.
pub fn generalized_hutchinson_step(
    d: &Discretization<'_>,
    w: &DiscreteSet,
    budget: u64,
) -> Result<DiscreteSet, OperatorError> {
    check_grid(d, &w.grid)?;
    if w.is_empty() {
        return Err(OperatorError::EmptySet);
    }
    d.check_budget(w.len(), budget)?;
    let mut mask = vec![0u64; d.grid().len().div_ceil(64)];
    d.for_each_image(&w.ids, |_, _, t| mask[t as usize / 64] |= 1 << (t % 64))?;
    Ok(DiscreteSet::from_mask(*d.grid(), &mask))
}

/// Header fields shared by every table backend.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TableShape {
    pub maps: u32,
    pub arity: u32,
    pub dim: u32,
    pub n: u32,
}

/// Storage of `Φ⁻¹ = {(j, x, r(φ_j(x)))}` read by sweeping records grouped by
/// target.
pub trait InverseTable {
    fn shape(&self) -> TableShape;

    fn record_count(&self) -> u64;

    /// Visits every record as `f(target, j, sources)` with `j` 0-based and
    /// `sources` the m linear ids of the source tuple. Records arrive sorted
    /// by target, then `j`, then sources lexicographically.
    fn sweep(&self, f: &mut dyn FnMut(u32, usize, &[u32])) -> Result<(), TableError>;
}

/// In-memory `Φ⁻¹`, compressed by target: record range of target `t` is
/// `offsets[t]..offsets[t+1]`.
#[derive(Debug, Clone)]
pub struct RamTable {
    shape: TableShape,
    offsets: Vec<u64>,
    maps: Vec<u16>,
    sources: Vec<u32>,
}

impl RamTable {
    pub fn iter(&self) -> impl Iterator<Item = (u32, usize, &[u32])> + '_ {
        let m = self.shape.arity as usize;
        (0..self.offsets.len() - 1).flat_map(move |t| {
            (self.offsets[t]..self.offsets[t + 1]).map(move |r| {
                let r = r as usize;
                (t as u32, usize::from(self.maps[r]), &self.sources[r * m..(r + 1) * m])
            })
        })
    }
}

impl InverseTable for RamTable {
    fn shape(&self) -> TableShape {
        self.shape
    }

    fn record_count(&self) -> u64 {
        self.maps.len() as u64
    }

    fn sweep(&self, f: &mut dyn FnMut(u32, usize, &[u32])) -> Result<(), TableError> {
        for (t, j, s) in self.iter() {
            f(t, j, s);
        }
        Ok(())
    }
}

/// Builds `Φ⁻¹` over the net's points (all grid points, or the sampled
/// points of an aleatory net) in memory. The record count `|X̂|^m·L` must be
/// within `budget`.
pub fn generate_inverse_table(d: &Discretization<'_>, budget: u64) -> Result<RamTable, OperatorError> {
    let points = d.net().points();
    let total = d.check_budget(points.len(), budget)? as usize;
    let m = d.spec().arity();
    let grid_len = d.grid().len();

    let mut targets = Vec::with_capacity(total);
    d.for_each_image(points, |_, _, t| targets.push(t))?;

    let mut offsets = vec![0u64; grid_len + 1];
    for &t in &targets {
        offsets[t as usize + 1] += 1;
    }
    for i in 0..grid_len {
        offsets[i + 1] += offsets[i];
    }
    let mut cursor: Vec<u64> = offsets[..grid_len].to_vec();
    let mut maps = vec![0u16; total];
    let mut sources = vec![0u32; total * m];

    // Record r is map r / k^m and the base-k digits of r mod k^m, so the
    // sources are recovered without re-evaluating the maps. The placement is
    // stable, keeping (j, sources) order within each target.
    let k = points.len();
    let per_map = total / d.spec().map_count();
    let mut digits = vec![0usize; m];
    for (r, &t) in targets.iter().enumerate() {
        let slot = cursor[t as usize] as usize;
        cursor[t as usize] += 1;
        maps[slot] = (r / per_map) as u16;
        let mut rest = r % per_map;
        for i in (0..m).rev() {
            digits[i] = rest % k;
            rest /= k;
        }
        for i in 0..m {
            sources[slot * m + i] = points[digits[i]];
        }
    }

    Ok(RamTable {
        shape: d.table_shape(),
        offsets,
        maps,
        sources,
    })
}

fn fuzzy_input(d: &Discretization<'_>, u: &DiscreteFuzzySet) -> Result<(), OperatorError> {
    check_grid(d, &u.grid)?;
    if d.grey.is_none() {
        return Err(OperatorError::NotFuzzy);
    }
    Ok(())
}

/// `Ẑ(u)(x) = max_j ρ_j(max{u(z) : (j, z, x) ∈ Φ⁻¹})` for arity 1.
pub fn fuzzy_step(
    d: &Discretization<'_>,
    table: &dyn InverseTable,
    u: &DiscreteFuzzySet,
) -> Result<DiscreteFuzzySet, OperatorError> {
    require_arity(d, false)?;
    generalized_fuzzy_step(d, table, u)
}

/// `Z̄(u)(x) = max_j ρ_j(max{min_i u(z_i) : (j, (z_1..z_m), x) ∈ Φ⁻¹})`.
pub fn generalized_fuzzy_step(
    d: &Discretization<'_>,
    table: &dyn InverseTable,
    u: &DiscreteFuzzySet,
) -> Result<DiscreteFuzzySet, OperatorError> {
    fuzzy_input(d, u)?;
    let expected = d.table_shape();
    if table.shape() != expected {
        return Err(OperatorError::TableMismatch {
            expected,
            found: table.shape(),
        });
    }
    let grey = d.grey.as_ref().expect("checked");
    let dense = u.to_dense();
    let mut out = vec![0u16; dense.len()];
    let mut bad = None;
    table.sweep(&mut |t, j, sources| {
        let mut low = LEVELS;
        for &s in sources {
            match dense.get(s as usize) {
                Some(&v) => low = low.min(v),
                None => {
                    bad.get_or_insert(s);
                    low = 0;
                }
            }
        }
        if low > 0 {
            let v = grey[j][usize::from(low)];
            if let Some(slot) = out.get_mut(t as usize) {
                *slot = (*slot).max(v);
            } else {
                bad.get_or_insert(t);
            }
        }
    })?;
    if let Some(id) = bad {
        return Err(TableError::Corrupt(alloc::format!("grid id {id} out of range")).into());
    }
    Ok(DiscreteFuzzySet::from_dense(u.grid, &out))
}

/// The same operator computed forward over `supp(u)^m` without a table;
/// `|supp u|^m·L` must be within `budget`.
pub fn direct_fuzzy_step(
    d: &Discretization<'_>,
    u: &DiscreteFuzzySet,
    budget: u64,
) -> Result<DiscreteFuzzySet, OperatorError> {
    fuzzy_input(d, u)?;
    if u.is_empty() {
        return Ok(u.clone());
    }
    d.check_budget(u.len(), budget)?;
    let grey = d.grey.as_ref().expect("checked");
    let ids: Vec<u32> = u.entries.iter().map(|e| e.0).collect();
    let levels: Vec<u16> = u.entries.iter().map(|e| e.1 .0).collect();
    let mut out = vec![0u16; d.grid().len()];
    d.for_each_image(&ids, |j, pos, t| {
        let low = pos.iter().map(|&p| levels[p]).min().unwrap_or(0);
        let v = grey[j][usize::from(low)];
        let slot = &mut out[t as usize];
        *slot = (*slot).max(v);
    })?;
    Ok(DiscreteFuzzySet::from_dense(u.grid, &out))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::{GreyMap, Piece, PiecewiseMap};
    use crate::nets::Domain;
    use crate::systems::MapSpec;

    fn sierpinski(grey: bool) -> SystemSpec {
        let maps = vec![
            MapSpec::parse(2, 1, &["0.5*x", "0.5*y"]).unwrap(),
            MapSpec::parse(2, 1, &["0.5*x + 0.5", "0.5*y"]).unwrap(),
            MapSpec::parse(2, 1, &["0.5*x + 0.25", "0.5*y + 0.5"]).unwrap(),
        ];
        let g = grey.then(|| vec![GreyMap::identity(); 3]);
        SystemSpec::new(Domain::unit(2).unwrap(), 1, maps, g).unwrap()
    }

    fn line_half(grey: Option<GreyMap>) -> (SystemSpec, Net) {
        let dom = Domain::unit(1).unwrap();
        let maps = vec![MapSpec::parse(1, 1, &["0.5*x"]).unwrap()];
        let spec = SystemSpec::new(dom, 1, maps, grey.map(|g| vec![g])).unwrap();
        (spec, Net::uniform(dom, 2).unwrap())
    }

    #[test]
    fn membership_quantization() {
        assert_eq!(Membership::quantize(0.25).level(), 255);
        assert_eq!(Membership::quantize(0.5).byte(), 128);
        assert_eq!(Membership::ONE.byte(), 255);
        assert_eq!(Membership::quantize(-1.0), Membership::ZERO);
        assert_eq!(Membership::quantize(f64::NAN), Membership::ZERO);
        assert_eq!(Membership::quantize(2.0), Membership::ONE);
        for b in 0..=255u16 {
            let m = Membership::quantize(f64::from(b) / 255.0);
            assert_eq!(u16::from(m.byte()), b);
        }
        assert_eq!(Membership::from_level(LEVELS + 1), None);
    }

    #[test]
    fn sierpinski_step_from_origin() {
        let spec = sierpinski(false);
        let net = Net::uniform(*spec.domain(), 4).unwrap();
        let d = Discretization::new(&spec, &net).unwrap();
        let w = DiscreteSet::from_points(&net, &[[0.0, 0.0]]);
        let next = hutchinson_step(&d, &w).unwrap();
        let pts: Vec<Point> = next.points().collect();
        assert_eq!(pts, vec![[0.0, 0.0], [0.25, 0.5], [0.5, 0.0]]);
    }

    #[test]
    fn constant_map_collapses() {
        let dom = Domain::unit(2).unwrap();
        let spec = SystemSpec::new(dom, 1, vec![MapSpec::parse(2, 1, &["0.3", "0.61"]).unwrap()], None).unwrap();
        let net = Net::uniform(dom, 10).unwrap();
        let d = Discretization::new(&spec, &net).unwrap();
        let w = DiscreteSet::new(*net.grid(), (0..40).collect()).unwrap();
        let next = hutchinson_step(&d, &w).unwrap();
        assert_eq!(next.ids(), &[net.project(&[0.3, 0.61]).id]);
    }

    #[test]
    fn midpoint_map_pairs() {
        let dom = Domain::unit(1).unwrap();
        let spec = SystemSpec::new(dom, 2, vec![MapSpec::parse(1, 2, &["(x1 + x2)/2"]).unwrap()], None).unwrap();
        let net = Net::uniform(dom, 4).unwrap();
        let d = Discretization::new(&spec, &net).unwrap();
        let w = DiscreteSet::from_points(&net, &[[0.0, 0.0], [1.0, 0.0]]);
        let next = generalized_hutchinson_step(&d, &w, 100).unwrap();
        let xs: Vec<f64> = next.points().map(|p| p[0]).collect();
        assert_eq!(xs, vec![0.0, 0.5, 1.0]);
        assert_eq!(hutchinson_step(&d, &w), Err(OperatorError::ArityMismatch { expected: "1", found: 2 }));
        assert!(matches!(
            generalized_hutchinson_step(&d, &w, 3),
            Err(OperatorError::Budget { needed: 4, budget: 3 })
        ));
    }

    #[test]
    fn generalized_with_arity_one_matches_classic() {
        let spec = sierpinski(false);
        let net = Net::uniform(*spec.domain(), 32).unwrap();
        let d = Discretization::new(&spec, &net).unwrap();
        let mut w = DiscreteSet::from_points(&net, &[[0.3, 0.7]]);
        for _ in 0..5 {
            let a = hutchinson_step(&d, &w).unwrap();
            let b = generalized_hutchinson_step(&d, &w, u64::MAX).unwrap();
            assert_eq!(a, b);
            w = a;
        }
    }

    #[test]
    fn table_for_half_map_on_three_points() {
        let (spec, net) = line_half(Some(GreyMap::identity()));
        let d = Discretization::new(&spec, &net).unwrap();
        let t = generate_inverse_table(&d, 100).unwrap();
        let recs: Vec<(u32, usize, Vec<u32>)> = t.iter().map(|(t, j, s)| (t, j, s.to_vec())).collect();
        // (target, j, source): 0 ← 0, 1 ← 1 (0.5 ↦ 0.25 ↦ ceil 0.5), 1 ← 2
        assert_eq!(recs, vec![(0, 0, vec![0]), (1, 0, vec![1]), (1, 0, vec![2])]);
        assert_eq!(t.record_count(), 3);

        let u = DiscreteFuzzySet::new(*net.grid(), vec![(2, Membership::ONE)]).unwrap();
        let v = fuzzy_step(&d, &t, &u).unwrap();
        assert_eq!(v.entries(), &[(1, Membership::ONE)]);
        assert_eq!(v.get(0), Membership::ZERO);
    }

    #[test]
    fn table_counts_records() {
        let spec = sierpinski(true);
        let net = Net::uniform(*spec.domain(), 9).unwrap();
        let d = Discretization::new(&spec, &net).unwrap();
        let t = generate_inverse_table(&d, u64::MAX).unwrap();
        assert_eq!(t.record_count(), 3 * 100);
        assert!(matches!(generate_inverse_table(&d, 299), Err(OperatorError::Budget { .. })));
        let mut prev = None;
        t.sweep(&mut |t, j, s| {
            let key = (t, j, s.to_vec());
            if let Some(p) = &prev {
                assert!(p < &key);
            }
            prev = Some(key);
        })
        .unwrap();
    }

    #[test]
    fn min_over_sources() {
        let dom = Domain::unit(1).unwrap();
        let spec = SystemSpec::new(
            dom,
            2,
            vec![MapSpec::parse(1, 2, &["0.5"]).unwrap()],
            Some(vec![GreyMap::identity()]),
        )
        .unwrap();
        let net = Net::uniform(dom, 10).unwrap();
        let d = Discretization::new(&spec, &net).unwrap();
        let u = DiscreteFuzzySet::new(*net.grid(), vec![(1, Membership::quantize(0.3)), (4, Membership::quantize(0.8))])
            .unwrap();
        let t = generate_inverse_table(&d, u64::MAX).unwrap();
        let v = generalized_fuzzy_step(&d, &t, &u).unwrap();
        // Pairs (1,4),(4,1) give 0.3, (4,4) gives 0.8: the max wins.
        assert_eq!(v.entries(), &[(5, Membership::quantize(0.8))]);
        let only = DiscreteFuzzySet::new(*net.grid(), vec![(1, Membership::quantize(0.3))]).unwrap();
        assert_eq!(direct_fuzzy_step(&d, &only, 10).unwrap().entries(), &[(5, Membership::quantize(0.3))]);
    }

    #[test]
    fn crisp_reduction_and_backends_agree() {
        let spec = sierpinski(true);
        let net = Net::uniform(*spec.domain(), 20).unwrap();
        let d = Discretization::new(&spec, &net).unwrap();
        let t = generate_inverse_table(&d, u64::MAX).unwrap();
        let mut w = DiscreteSet::from_points(&net, &[[0.0, 0.0]]);
        let mut u = characteristic(&w);
        for _ in 0..6 {
            w = hutchinson_step(&d, &w).unwrap();
            u = fuzzy_step(&d, &t, &u).unwrap();
            assert_eq!(u, characteristic(&w));
            assert_eq!(direct_fuzzy_step(&d, &u, u64::MAX).unwrap(), fuzzy_step(&d, &t, &u).unwrap());
        }
    }

    #[test]
    fn quarter_values_are_closed_under_step_grey_map() {
        let step = GreyMap::Piecewise(
            PiecewiseMap::new(vec![
                (0.0, Piece::Const(0.0)),
                (0.2505, Piece::Const(0.25)),
                (0.505, Piece::Const(0.5)),
                (0.7505, Piece::Const(0.75)),
            ])
            .unwrap(),
        );
        let (spec, net) = line_half(Some(step));
        let d = Discretization::new(&spec, &net).unwrap();
        let quarters: Vec<Membership> = [0.0, 0.25, 0.5, 0.75, 1.0].iter().map(|&v| Membership::quantize(v)).collect();
        for &q in &quarters {
            assert!(quarters.contains(&d.grey_level(0, q).unwrap()));
        }
        assert_eq!(d.grey_level(0, quarters[1]), Some(Membership::ZERO));
        assert_eq!(d.grey_level(0, quarters[2]), Some(quarters[1]));
    }

    #[test]
    fn cuts_and_characteristic() {
        let grid = Grid::new(Domain::unit(1).unwrap(), 4).unwrap();
        let u = DiscreteFuzzySet::new(grid, vec![(0, Membership::ONE), (1, Membership::quantize(0.5))]).unwrap();
        assert_eq!(alpha_cut(&u, 0.5).ids(), &[0, 1]);
        assert_eq!(alpha_cut(&u, 0.75).ids(), &[0]);
        assert_eq!(alpha_cut(&u, 1.0).ids(), &[0]);
        let k = DiscreteSet::new(grid, vec![3, 1]).unwrap();
        for a in [0.01, 0.5, 1.0] {
            assert_eq!(alpha_cut(&characteristic(&k), a), k);
        }
        assert_eq!(characteristic(&DiscreteSet::new(grid, vec![2]).unwrap()).entries(), &[(2, Membership::ONE)]);
    }

    #[test]
    fn fuzzy_set_construction_merges_by_max() {
        let grid = Grid::new(Domain::unit(1).unwrap(), 4).unwrap();
        let u = DiscreteFuzzySet::new(
            grid,
            vec![(2, Membership::quantize(0.2)), (2, Membership::quantize(0.7)), (1, Membership::ZERO)],
        )
        .unwrap();
        assert_eq!(u.entries(), &[(2, Membership::quantize(0.7))]);
        assert!(!u.is_normal());
        assert!(DiscreteFuzzySet::new(grid, vec![(5, Membership::ONE)]).is_err());
        assert!(DiscreteSet::new(grid, vec![9]).is_err());
    }

    #[test]
    fn mismatches_are_reported() {
        let spec = sierpinski(false);
        let other = Net::uniform(Domain::new(&[(0.0, 2.0), (0.0, 1.0)]).unwrap(), 4).unwrap();
        assert!(matches!(Discretization::new(&spec, &other), Err(OperatorError::DomainMismatch)));
        let net = Net::uniform(*spec.domain(), 4).unwrap();
        let d = Discretization::new(&spec, &net).unwrap();
        let coarse = Grid::new(*spec.domain(), 3).unwrap();
        assert_eq!(
            hutchinson_step(&d, &DiscreteSet::new(coarse, vec![0]).unwrap()),
            Err(OperatorError::GridMismatch)
        );
        assert_eq!(hutchinson_step(&d, &DiscreteSet::empty(*net.grid())), Err(OperatorError::EmptySet));
        let u = characteristic(&DiscreteSet::new(*net.grid(), vec![0]).unwrap());
        assert_eq!(direct_fuzzy_step(&d, &u, 10), Err(OperatorError::NotFuzzy));
    }

    #[test]
    fn clamps_are_counted() {
        let dom = Domain::unit(2).unwrap();
        let spec = SystemSpec::new(dom, 1, vec![MapSpec::parse(2, 1, &["0.5*x + 0.7", "0.5*y"]).unwrap()], None).unwrap();
        let net = Net::uniform(dom, 10).unwrap();
        let d = Discretization::new(&spec, &net).unwrap();
        let w = DiscreteSet::from_points(&net, &[[1.0, 0.0], [0.0, 0.0]]);
        let next = hutchinson_step(&d, &w).unwrap();
        assert_eq!(d.clamp_count(), 1);
        assert!(next.points().any(|p| p == [1.0, 0.0]));
    }
}
