//! Hausdorff distance between discrete sets, `d∞` between discrete fuzzy
//! sets, and the stopping rule for iterations.
//!
//! Distances are exact. Small pairs are compared point by point. Larger ones
//! use a Euclidean distance transform of the grid (row scans followed by a
//! lower envelope of parabolas per column) that yields a nearest member for
//! every grid point; the distance is then taken from that member, so both
//! routes compute it with the same formula.

use alloc::vec;
use alloc::vec::Vec;

use crate::math;
use crate::nets::Grid;
use crate::operators::{alpha_cut_level, DiscreteFuzzySet, DiscreteSet};

#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
pub enum MetricError {
    #[error("Hausdorff distance of an empty set")]
    EmptySet,
    #[error("sets live on different grids")]
    GridMismatch,
    #[error("fuzzy set is not normal")]
    NotNormal,
}

const NONE: u32 = u32::MAX;

/// `h(A, B)` with the Euclidean metric.
pub fn hausdorff(a: &DiscreteSet, b: &DiscreteSet) -> Result<f64, MetricError> {
    if a.grid() != b.grid() {
        return Err(MetricError::GridMismatch);
    }
    if a.is_empty() || b.is_empty() {
        return Err(MetricError::EmptySet);
    }
    if a.ids() == b.ids() {
        return Ok(0.0);
    }
    let grid = a.grid();
    let d2 = directed_sq(grid, a.ids(), b.ids()).max(directed_sq(grid, b.ids(), a.ids()));
    Ok(math::sqrt(d2))
}

/// `max_{a∈A} min_{b∈B} d(a, b)`.
pub fn directed_hausdorff(a: &DiscreteSet, b: &DiscreteSet) -> Result<f64, MetricError> {
    if a.grid() != b.grid() {
        return Err(MetricError::GridMismatch);
    }
    if a.is_empty() || b.is_empty() {
        return Err(MetricError::EmptySet);
    }
    Ok(math::sqrt(directed_sq(a.grid(), a.ids(), b.ids())))
}

fn directed_sq(grid: &Grid, from: &[u32], to: &[u32]) -> f64 {
    if (from.len() as u64) * (to.len() as u64) <= grid.len() as u64 * 4 {
        return brute_directed_sq(grid, from, to);
    }
    let nearest = nearest_members(grid, to);
    from.iter()
        .map(|&p| grid.distance_sq(p, nearest[p as usize]))
        .fold(0.0, f64::max)
}

fn brute_directed_sq(grid: &Grid, from: &[u32], to: &[u32]) -> f64 {
    let mut worst: f64 = 0.0;
    for &p in from {
        let mut best = f64::INFINITY;
        for &q in to {
            let d = grid.distance_sq(p, q);
            if d < best {
                best = d;
                if best <= worst {
                    break;
                }
            }
        }
        worst = worst.max(best);
    }
    worst
}

/// For every grid point, the id of a nearest member of `set`.
fn nearest_members(grid: &Grid, set: &[u32]) -> Vec<u32> {
    let side = grid.n() as usize + 1;
    if grid.dim() == 1 {
        let mut marks = vec![false; side];
        for &s in set {
            marks[s as usize] = true;
        }
        return nearest_on_line(&marks)
            .into_iter()
            .map(|i| i as u32)
            .collect();
    }

    // Rows: nearest member within each row i (axis 1).
    let mut row_site = vec![NONE; side * side];
    let mut marks = vec![false; side];
    let mut in_set = vec![false; side * side];
    for &s in set {
        in_set[s as usize] = true;
    }
    for i in 0..side {
        marks.copy_from_slice(&in_set[i * side..(i + 1) * side]);
        if marks.iter().any(|&m| m) {
            for (j, site) in nearest_on_line(&marks).into_iter().enumerate() {
                row_site[i * side + j] = site as u32;
            }
        }
    }

    // Columns: lower envelope of parabolas hx²(i - k)² + g(k), where g(k)
    // is the squared distance to the row-nearest member of row k.
    let hx2 = grid.spacing(0) * grid.spacing(0);
    let hy = grid.spacing(1);
    let mut out = vec![0u32; side * side];
    let mut f = vec![f64::INFINITY; side];
    let mut v = vec![0usize; side];
    let mut z = vec![0.0f64; side + 1];
    for j in 0..side {
        for k in 0..side {
            let s = row_site[k * side + j];
            f[k] = if s == NONE {
                f64::INFINITY
            } else {
                let dj = (s as usize).abs_diff(j) as f64 * hy;
                dj * dj
            };
        }
        let best_rows = lower_envelope(&f, hx2, &mut v, &mut z);
        for (i, k) in best_rows.into_iter().enumerate() {
            out[i * side + j] = (k * side) as u32 + row_site[k * side + j];
        }
    }
    out
}

/// Nearest marked index on a line; ties go to the lower index.
fn nearest_on_line(marks: &[bool]) -> Vec<usize> {
    let n = marks.len();
    let mut left = vec![usize::MAX; n];
    let mut last = usize::MAX;
    for i in 0..n {
        if marks[i] {
            last = i;
        }
        left[i] = last;
    }
    let mut out = vec![0usize; n];
    let mut next = usize::MAX;
    for i in (0..n).rev() {
        if marks[i] {
            next = i;
        }
        out[i] = match (left[i], next) {
            (usize::MAX, r) => r,
            (l, usize::MAX) => l,
            (l, r) => {
                if i - l <= r - i {
                    l
                } else {
                    r
                }
            }
        };
    }
    out
}

/// For each `q`, the `k` minimising `w(q-k)² + f(k)` over finite `f(k)`.
/// At least one `f(k)` must be finite.
fn lower_envelope(f: &[f64], w: f64, v: &mut [usize], z: &mut [f64]) -> Vec<usize> {
    let n = f.len();
    let sites: Vec<usize> = (0..n).filter(|&k| f[k].is_finite()).collect();
    let mut top = 0usize;
    v[0] = sites[0];
    z[0] = f64::NEG_INFINITY;
    z[1] = f64::INFINITY;
    let cross = |p: usize, q: usize| {
        let (pf, qf) = (p as f64, q as f64);
        ((f[q] + w * qf * qf) - (f[p] + w * pf * pf)) / (2.0 * w * (qf - pf))
    };
    for &q in &sites[1..] {
        let mut s = cross(v[top], q);
        while s <= z[top] {
            top -= 1;
            s = cross(v[top], q);
        }
        top += 1;
        v[top] = q;
        z[top] = s;
        z[top + 1] = f64::INFINITY;
    }
    let mut out = Vec::with_capacity(n);
    let mut k = 0;
    for q in 0..n {
        while z[k + 1] < q as f64 {
            k += 1;
        }
        out.push(v[k]);
    }
    out
}

/// `d∞(u, v) = max over occurring levels α of h([u]^α, [v]^α)`.
pub fn d_infinity(u: &DiscreteFuzzySet, v: &DiscreteFuzzySet) -> Result<f64, MetricError> {
    if u.grid() != v.grid() {
        return Err(MetricError::GridMismatch);
    }
    if !u.is_normal() || !v.is_normal() {
        return Err(MetricError::NotNormal);
    }
    if u == v {
        return Ok(0.0);
    }
    let mut levels = u.levels();
    levels.extend(v.levels());
    levels.sort_unstable();
    levels.dedup();
    let mut worst: f64 = 0.0;
    for l in levels {
        let h = hausdorff(&alpha_cut_level(u, l), &alpha_cut_level(v, l))?;
        worst = worst.max(h);
    }
    Ok(worst)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopReason {
    MaxIterations,
    Tolerance,
    Stall,
}

impl StopReason {
    pub fn as_str(self) -> &'static str {
        match self {
            StopReason::MaxIterations => "max-iterations",
            StopReason::Tolerance => "tolerance",
            StopReason::Stall => "stall",
        }
    }
}

impl core::fmt::Display for StopReason {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Distances between consecutive iterates.
#[derive(Debug, Clone, PartialEq)]
pub struct IterationHistory {
    pub values: Vec<f64>,
    pub tol: f64,
}

impl IterationHistory {
    pub fn new(tol: f64) -> Self {
        IterationHistory { values: Vec::new(), tol }
    }

    pub fn push(&mut self, value: f64) {
        self.values.push(value);
    }

    /// Length of the run of equal values at the end.
    pub fn stall_count(&self) -> usize {
        match self.values.last() {
            None => 0,
            Some(&last) => self.values.iter().rev().take_while(|&&v| v == last).count(),
        }
    }
}

/// Stop after `max` iterations, when the last distance is below `tol`, or
/// when the last three distances are identical.
pub fn should_stop(history: &IterationHistory, done: u32, max: u32) -> Option<StopReason> {
    if let Some(&last) = history.values.last() {
        if last < history.tol {
            return Some(StopReason::Tolerance);
        }
    }
    if history.stall_count() >= 3 {
        return Some(StopReason::Stall);
    }
    if done >= max {
        return Some(StopReason::MaxIterations);
    }
    None
}
