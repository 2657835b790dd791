//! System specifications (IFS, IFZS, GIFS, GIFZS), their contraction
//! constants and the choice of net fineness and iteration count.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::expr::{EvalError, Expression, GreyMap};
use crate::math;
use crate::nets::{Domain, Point};
use crate::rng::XorShift64Star;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SystemError {
    #[error("system needs at least one map")]
    NoMaps,
    #[error("system has {0} maps; at most 65535 are supported")]
    TooManyMaps(usize),
    #[error("arity must be at least 1")]
    ZeroArity,
    #[error("map {map}: expected dimension {dim} and arity {arity}")]
    ShapeMismatch { map: usize, dim: usize, arity: usize },
    #[error("{maps} maps but {greys} grey maps")]
    GreyCount { maps: usize, greys: usize },
    #[error("affine form: matrix must have {rows}x{cols} entries and offset {rows}")]
    AffineShape { rows: usize, cols: usize },
    #[error("map {map}: expected {expected} coordinate expressions, got {found}")]
    ExpressionCount { map: usize, expected: usize, found: usize },
    #[error("map {map}: cannot bound the Lipschitz constant of a non-affine map; supply an override")]
    CannotBoundLipschitz { map: usize },
    #[error("map {map}: Lipschitz override {value} must be finite and nonnegative")]
    BadOverride { map: usize, value: f64 },
}

/// `φ(x₁..x_m) = A·(x₁,…,x_m) + c` with `A` of shape `d × (m·d)`, row-major,
/// columns ordered `x1, y1, x2, y2, …`.
#[derive(Debug, Clone, PartialEq)]
pub struct AffineForm {
    dim: usize,
    arity: usize,
    matrix: Vec<f64>,
    offset: Vec<f64>,
}

impl AffineForm {
    pub fn new(dim: usize, arity: usize, matrix: Vec<f64>, offset: Vec<f64>) -> Result<Self, SystemError> {
        let cols = dim * arity;
        if matrix.len() != dim * cols || offset.len() != dim {
            return Err(SystemError::AffineShape { rows: dim, cols });
        }
        Ok(AffineForm {
            dim,
            arity,
            matrix,
            offset,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn arity(&self) -> usize {
        self.arity
    }

    pub fn entry(&self, row: usize, col: usize) -> f64 {
        self.matrix[row * self.dim * self.arity + col]
    }

    pub fn offset(&self) -> &[f64] {
        &self.offset
    }

    /// The `d × d` block acting on the `i`-th input point, row-major.
    pub fn block(&self, i: usize) -> [[f64; 2]; 2] {
        let mut b = [[0.0; 2]; 2];
        for (r, row) in b.iter_mut().enumerate().take(self.dim) {
            for (c, v) in row.iter_mut().enumerate().take(self.dim) {
                *v = self.entry(r, i * self.dim + c);
            }
        }
        b
    }

    pub fn eval(&self, input: &[f64], out: &mut Point) {
        let cols = self.dim * self.arity;
        for r in 0..self.dim {
            let row = &self.matrix[r * cols..(r + 1) * cols];
            let mut acc = self.offset[r];
            for (a, x) in row.iter().zip(input) {
                acc += a * x;
            }
            out[r] = acc;
        }
    }
}

/// One map `Xᵐ → X`.
#[derive(Debug, Clone, PartialEq)]
pub struct MapSpec {
    dim: usize,
    arity: usize,
    affine: Option<AffineForm>,
    exprs: Option<Vec<Expression>>,
    lipschitz_override: Option<f64>,
}

/// Variable names available to a map of the given shape, as `(name, slot)`.
/// Two dimensions: `x1, y1, …, xm, ym`, plus `x, y` when `m = 1`.
/// One dimension: `x1, …, xm`, plus `x` when `m = 1`.
pub fn map_variables(dim: usize, arity: usize) -> Vec<(String, usize)> {
    let mut out = Vec::new();
    for i in 0..arity {
        out.push((alloc::format!("x{}", i + 1), i * dim));
        if dim == 2 {
            out.push((alloc::format!("y{}", i + 1), i * dim + 1));
        }
    }
    if arity == 1 {
        out.push((String::from("x"), 0));
        if dim == 2 {
            out.push((String::from("y"), 1));
        }
    }
    out
}

impl MapSpec {
    pub fn affine(form: AffineForm) -> Self {
        MapSpec {
            dim: form.dim,
            arity: form.arity,
            affine: Some(form),
            exprs: None,
            lipschitz_override: None,
        }
    }

    /// Builds a map from one expression per output coordinate. When every
    /// coordinate is affine in the inputs the affine form is derived as well
    /// and used for evaluation and the Lipschitz constant.
    pub fn from_expressions(dim: usize, arity: usize, exprs: Vec<Expression>) -> Result<Self, SystemError> {
        if exprs.len() != dim {
            return Err(SystemError::ExpressionCount {
                map: 0,
                expected: dim,
                found: exprs.len(),
            });
        }
        let cols = dim * arity;
        let mut matrix = Vec::with_capacity(dim * cols);
        let mut offset = Vec::with_capacity(dim);
        let mut affine_ok = true;
        for e in &exprs {
            if e.slot_count() > cols {
                return Err(SystemError::ShapeMismatch { map: 0, dim, arity });
            }
            match e.affine_parts() {
                Some(p) if affine_ok => {
                    let mut row = p.coeffs;
                    row.resize(cols, 0.0);
                    matrix.extend(row);
                    offset.push(p.constant);
                }
                _ => affine_ok = false,
            }
        }
        let affine = if affine_ok {
            Some(AffineForm::new(dim, arity, matrix, offset)?)
        } else {
            None
        };
        Ok(MapSpec {
            dim,
            arity,
            affine,
            exprs: Some(exprs),
            lipschitz_override: None,
        })
    }

    /// Parses expressions with the standard variable names of [`map_variables`].
    pub fn parse(dim: usize, arity: usize, sources: &[&str]) -> Result<Self, crate::expr::ParseError> {
        let vars = map_variables(dim, arity);
        let table: Vec<(&str, usize)> = vars.iter().map(|(n, s)| (n.as_str(), *s)).collect();
        let exprs = sources
            .iter()
            .map(|s| Expression::parse_with_aliases(s, &table, dim * arity))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Self::from_expressions(dim, arity, exprs).expect("expression count checked by caller"))
    }

    pub fn with_lipschitz(mut self, value: f64) -> Self {
        self.lipschitz_override = Some(value);
        self
    }

    /// Attaches an explicit affine form alongside expressions; validation
    /// checks that the two agree.
    pub fn with_affine(mut self, form: AffineForm) -> Self {
        self.affine = Some(form);
        self
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn arity(&self) -> usize {
        self.arity
    }

    pub fn affine_form(&self) -> Option<&AffineForm> {
        self.affine.as_ref()
    }

    pub fn expressions(&self) -> Option<&[Expression]> {
        self.exprs.as_deref()
    }

    pub fn lipschitz_override(&self) -> Option<f64> {
        self.lipschitz_override
    }

    /// Evaluates the map; `input` holds `m·d` coordinates, point-major.
    pub fn eval(&self, input: &[f64], out: &mut Point) -> Result<(), EvalError> {
        if let Some(a) = &self.affine {
            a.eval(input, out);
            return Ok(());
        }
        self.eval_expressions(input, out)
    }

    pub fn eval_expressions(&self, input: &[f64], out: &mut Point) -> Result<(), EvalError> {
        match &self.exprs {
            Some(exprs) => {
                for (k, e) in exprs.iter().enumerate() {
                    out[k] = e.evaluate(input)?;
                }
                Ok(())
            }
            None => {
                self.affine.as_ref().expect("map has a form").eval(input, out);
                Ok(())
            }
        }
    }

    /// Lipschitz constant: the override if given, else the affine bound.
    pub fn lipschitz(&self) -> Option<f64> {
        self.lipschitz_override
            .or_else(|| self.affine.as_ref().map(lipschitz_affine))
    }
}

/// Lipschitz constant of an affine map with respect to the maximum metric on
/// `Xᵐ`: `sup ‖Σ Aᵢuᵢ‖` over unit vectors `uᵢ`.
///
/// For `m = 1` this is the largest singular value, in closed form from the
/// eigenvalues of `AᵀA`. For `m > 1` the supremum is rewritten as
/// `max_{‖w‖=1} Σ ‖Aᵢᵀw‖`, a maximization over a single unit vector (an
/// angle in the plane) solved by scan plus golden-section refinement.
pub fn lipschitz_affine(form: &AffineForm) -> f64 {
    let blocks: Vec<[[f64; 2]; 2]> = (0..form.arity).map(|i| form.block(i)).collect();
    if form.dim == 1 {
        return blocks.iter().map(|b| math::abs(b[0][0])).sum();
    }
    if blocks.len() == 1 {
        return largest_singular_value(&blocks[0]);
    }
    max_dual_sum(&blocks)
}

fn largest_singular_value(a: &[[f64; 2]; 2]) -> f64 {
    let p = a[0][0] * a[0][0] + a[1][0] * a[1][0];
    let r = a[0][1] * a[0][1] + a[1][1] * a[1][1];
    let q = a[0][0] * a[0][1] + a[1][0] * a[1][1];
    let half = 0.5 * (p - r);
    let lambda = 0.5 * (p + r) + math::sqrt(half * half + q * q);
    math::sqrt(lambda.max(0.0))
}

fn dual_sum(blocks: &[[[f64; 2]; 2]], theta: f64) -> f64 {
    let (w0, w1) = (libm::cos(theta), libm::sin(theta));
    blocks
        .iter()
        .map(|b| {
            // Aᵀw
            let v0 = b[0][0] * w0 + b[1][0] * w1;
            let v1 = b[0][1] * w0 + b[1][1] * w1;
            math::hypot(v0, v1)
        })
        .sum()
}

fn max_dual_sum(blocks: &[[[f64; 2]; 2]]) -> f64 {
    const SCAN: usize = 4096;
    let pi = core::f64::consts::PI;
    let step = pi / SCAN as f64;
    let vals: Vec<f64> = (0..SCAN).map(|k| dual_sum(blocks, k as f64 * step)).collect();
    let mut best = vals.iter().copied().fold(0.0, f64::max);
    for k in 0..SCAN {
        let prev = vals[(k + SCAN - 1) % SCAN];
        let next = vals[(k + 1) % SCAN];
        if vals[k] >= prev && vals[k] >= next {
            let centre = k as f64 * step;
            best = best.max(golden_max(|t| dual_sum(blocks, t), centre - step, centre + step));
        }
    }
    best
}

fn golden_max(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64) -> f64 {
    let g = 0.5 * (math::sqrt(5.0) - 1.0);
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..100 {
        if b - a < 1e-15 {
            break;
        }
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = f(d);
        }
    }
    fc.max(fd)
}

/// A complete system: box, arity, maps and (for fuzzy systems) grey maps.
#[derive(Debug, Clone)]
pub struct SystemSpec {
    domain: Domain,
    arity: usize,
    maps: Vec<MapSpec>,
    grey: Option<Vec<GreyMap>>,
}

impl SystemSpec {
    pub fn new(domain: Domain, arity: usize, maps: Vec<MapSpec>, grey: Option<Vec<GreyMap>>) -> Result<Self, SystemError> {
        if arity == 0 {
            return Err(SystemError::ZeroArity);
        }
        if maps.is_empty() {
            return Err(SystemError::NoMaps);
        }
        if maps.len() > usize::from(u16::MAX) {
            return Err(SystemError::TooManyMaps(maps.len()));
        }
        let dim = domain.dim();
        for (i, m) in maps.iter().enumerate() {
            if m.dim != dim || m.arity != arity {
                return Err(SystemError::ShapeMismatch { map: i + 1, dim, arity });
            }
            if let Some(v) = m.lipschitz_override {
                if !(v.is_finite() && v >= 0.0) {
                    return Err(SystemError::BadOverride { map: i + 1, value: v });
                }
            }
        }
        if let Some(g) = &grey {
            if g.len() != maps.len() {
                return Err(SystemError::GreyCount {
                    maps: maps.len(),
                    greys: g.len(),
                });
            }
        }
        Ok(SystemSpec {
            domain,
            arity,
            maps,
            grey,
        })
    }

    pub fn domain(&self) -> &Domain {
        &self.domain
    }

    pub fn dim(&self) -> usize {
        self.domain.dim()
    }

    pub fn arity(&self) -> usize {
        self.arity
    }

    pub fn maps(&self) -> &[MapSpec] {
        &self.maps
    }

    pub fn map_count(&self) -> usize {
        self.maps.len()
    }

    pub fn grey_maps(&self) -> Option<&[GreyMap]> {
        self.grey.as_deref()
    }

    pub fn is_fuzzy(&self) -> bool {
        self.grey.is_some()
    }

    /// Same maps with every grey map replaced by the identity.
    pub fn with_identity_grey(&self) -> Self {
        SystemSpec {
            grey: Some(vec![GreyMap::identity(); self.maps.len()]),
            ..self.clone()
        }
    }

    /// Same maps without grey maps.
    pub fn crisp(&self) -> Self {
        SystemSpec {
            grey: None,
            ..self.clone()
        }
    }

    /// `α_S = max_j Lip(φ_j)`.
    pub fn lipschitz(&self) -> Result<f64, SystemError> {
        lipschitz_system(self)
    }
}

pub fn lipschitz_system(spec: &SystemSpec) -> Result<f64, SystemError> {
    let mut alpha: f64 = 0.0;
    for (i, m) in spec.maps.iter().enumerate() {
        let l = m.lipschitz().ok_or(SystemError::CannotBoundLipschitz { map: i + 1 })?;
        alpha = alpha.max(l);
    }
    Ok(alpha)
}

#[derive(Debug, Clone, Copy, PartialEq, thiserror::Error)]
pub enum PlanError {
    #[error("resolution delta must be positive, got {0}")]
    Delta(f64),
    #[error("theta must lie in (0, 1), got {0}")]
    Theta(f64),
    #[error("diameter must be positive, got {0}")]
    Diameter(f64),
    #[error("contraction constant must lie in [0, 1), got {0}")]
    NotContractive(f64),
}

/// Net fineness and iteration count that reach a target resolution.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResolutionPlan {
    pub delta: f64,
    pub theta: f64,
    pub epsilon: f64,
    pub iterations: u32,
    pub diameter: f64,
    pub alpha: f64,
    /// `5ε/(1-α) + α^N·D` for the planned values.
    pub predicted: f64,
    pub feasible: bool,
    /// Set when `(1-θ)δ ≥ D`, so no iteration is needed for the second term.
    pub zero_iterations: bool,
}

/// `ε = (1-α)θδ/5`, `N = ⌈log((1-θ)δ/D) / log α⌉` clamped at 0.
/// Feasible when the predicted resolution is within `δ` up to a relative
/// rounding slack of 1e-12.
pub fn plan_resolution(delta: f64, theta: f64, diameter: f64, alpha: f64) -> Result<ResolutionPlan, PlanError> {
    if !(delta > 0.0 && delta.is_finite()) {
        return Err(PlanError::Delta(delta));
    }
    if !(theta > 0.0 && theta < 1.0) {
        return Err(PlanError::Theta(theta));
    }
    if !(diameter > 0.0 && diameter.is_finite()) {
        return Err(PlanError::Diameter(diameter));
    }
    if !(0.0..1.0).contains(&alpha) {
        return Err(PlanError::NotContractive(alpha));
    }
    let epsilon = (1.0 - alpha) * theta * delta / 5.0;
    let ratio = (1.0 - theta) * delta / diameter;
    let zero_iterations = ratio >= 1.0;
    let iterations = if zero_iterations {
        0
    } else if alpha == 0.0 {
        1
    } else {
        let n = math::ceil(math::ln(ratio) / math::ln(alpha));
        if n >= f64::from(u32::MAX) {
            u32::MAX
        } else {
            n.max(0.0) as u32
        }
    };
    let predicted = predicted_resolution(epsilon, iterations, alpha, diameter);
    Ok(ResolutionPlan {
        delta,
        theta,
        epsilon,
        iterations,
        diameter,
        alpha,
        predicted,
        feasible: predicted <= delta * (1.0 + 1e-12),
        zero_iterations,
    })
}

/// `5ε/(1-α) + α^N·D`.
pub fn predicted_resolution(epsilon: f64, iterations: u32, alpha: f64, diameter: f64) -> f64 {
    5.0 * epsilon / (1.0 - alpha) + math::powi(alpha, iterations) * diameter
}

#[derive(Debug, Clone, PartialEq)]
pub enum Issue {
    LipschitzUnknown { map: usize },
    NotContractive { alpha: f64 },
    AffineMismatch { map: usize, difference: f64 },
    MapEvalFailed { map: usize, error: EvalError },
    GreyNotZeroAtZero { map: usize, value: f64 },
    GreyDecreasing { map: usize, at: f64 },
    GreyEvalFailed { map: usize, error: EvalError },
    NoGreyReachesOne { max: f64 },
    GreyClamped { map: usize, samples: usize },
    LeavesBox { map: usize, samples: usize },
}

impl Issue {
    /// Warnings do not prevent a run; errors do.
    pub fn is_warning(&self) -> bool {
        matches!(self, Issue::GreyClamped { .. } | Issue::LeavesBox { .. })
    }
}

impl core::fmt::Display for Issue {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            Issue::LipschitzUnknown { map } => {
                write!(f, "map {map}: cannot bound Lipschitz constant (not affine, no override)")
            }
            Issue::NotContractive { alpha } => write!(f, "system is not contractive: alpha = {alpha}"),
            Issue::AffineMismatch { map, difference } => {
                write!(f, "map {map}: affine form and expressions differ by {difference:e}")
            }
            Issue::MapEvalFailed { map, error } => write!(f, "map {map}: evaluation failed: {error}"),
            Issue::GreyNotZeroAtZero { map, value } => {
                write!(f, "grey map {map}: rho(0) = {value}, must be 0")
            }
            Issue::GreyDecreasing { map, at } => write!(f, "grey map {map}: decreases near t = {at}"),
            Issue::GreyEvalFailed { map, error } => write!(f, "grey map {map}: evaluation failed: {error}"),
            Issue::NoGreyReachesOne { max } => {
                write!(f, "no grey map satisfies rho(1) = 1 (largest value {max})")
            }
            Issue::GreyClamped { map, samples } => {
                write!(f, "grey map {map}: value left [0,1] at {samples} sample(s) and was clamped")
            }
            Issue::LeavesBox { map, samples } => {
                write!(f, "map {map}: {samples} sampled image(s) leave the box and will be clamped")
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ValidationReport {
    pub alpha: Option<f64>,
    pub issues: Vec<Issue>,
}

impl ValidationReport {
    pub fn is_admissible(&self) -> bool {
        self.issues.iter().all(Issue::is_warning)
    }

    pub fn errors(&self) -> impl Iterator<Item = &Issue> {
        self.issues.iter().filter(|i| !i.is_warning())
    }

    pub fn warnings(&self) -> impl Iterator<Item = &Issue> {
        self.issues.iter().filter(|i| i.is_warning())
    }
}

const GREY_SCAN: usize = 10_000;
const BOX_SAMPLES: usize = 1_000;
const VALIDATION_SEED: u64 = 0x1F5_D7A3;

/// Checks contraction, grey-map admissibility and box invariance.
pub fn validate_system(spec: &SystemSpec) -> ValidationReport {
    let mut issues = Vec::new();
    let mut alpha = Some(0.0f64);
    for (i, m) in spec.maps.iter().enumerate() {
        match m.lipschitz() {
            Some(l) => alpha = alpha.map(|a| a.max(l)),
            None => {
                issues.push(Issue::LipschitzUnknown { map: i + 1 });
                alpha = None;
            }
        }
    }
    if let Some(a) = alpha {
        if a >= 1.0 {
            issues.push(Issue::NotContractive { alpha: a });
        }
    }

    let dom = spec.domain;
    let dim = dom.dim();
    let width = dim * spec.arity;
    let mut rng = XorShift64Star::new(VALIDATION_SEED);
    let mut input = vec![0.0; width];
    let mut leaves = vec![0usize; spec.maps.len()];
    let mut mismatch = vec![0.0f64; spec.maps.len()];
    let mut failed = vec![None; spec.maps.len()];
    for _ in 0..BOX_SAMPLES {
        for (s, v) in input.iter_mut().enumerate() {
            let k = s % dim;
            *v = dom.lo(k) + dom.width(k) * rng.unit();
        }
        for (j, m) in spec.maps.iter().enumerate() {
            let mut out = [0.0; 2];
            if let Err(e) = m.eval(&input, &mut out) {
                failed[j].get_or_insert(e);
                continue;
            }
            if !dom.contains(&out) {
                let (c, _) = dom.clamp(&out);
                let gap = (0..dim).map(|k| math::abs(out[k] - c[k])).fold(0.0, f64::max);
                if gap > 1e-12 * dom.diameter() {
                    leaves[j] += 1;
                }
            }
            if m.affine.is_some() && m.exprs.is_some() {
                let mut via_expr = [0.0; 2];
                match m.eval_expressions(&input, &mut via_expr) {
                    Ok(()) => {
                        for k in 0..dim {
                            let scale = 1.0 + math::abs(via_expr[k]);
                            mismatch[j] = mismatch[j].max(math::abs(via_expr[k] - out[k]) / scale);
                        }
                    }
                    Err(e) => {
                        failed[j].get_or_insert(e);
                    }
                }
            }
        }
    }
    for j in 0..spec.maps.len() {
        if let Some(error) = failed[j] {
            issues.push(Issue::MapEvalFailed { map: j + 1, error });
        }
        if mismatch[j] > 1e-12 {
            issues.push(Issue::AffineMismatch {
                map: j + 1,
                difference: mismatch[j],
            });
        }
        if leaves[j] > 0 {
            issues.push(Issue::LeavesBox {
                map: j + 1,
                samples: leaves[j],
            });
        }
    }

    if let Some(greys) = &spec.grey {
        let mut top: f64 = 0.0;
        for (j, g) in greys.iter().enumerate() {
            let map = j + 1;
            let mut clamped = 0;
            let mut prev = None;
            let mut decreasing = false;
            for k in 0..=GREY_SCAN {
                let t = k as f64 / GREY_SCAN as f64;
                let v = match g.eval(t) {
                    Ok(v) => v,
                    Err(error) => {
                        issues.push(Issue::GreyEvalFailed { map, error });
                        break;
                    }
                };
                clamped += usize::from(v.clamped);
                if k == 0 && v.value != 0.0 {
                    issues.push(Issue::GreyNotZeroAtZero { map, value: v.value });
                }
                if let Some(p) = prev {
                    if v.value < p && !decreasing {
                        issues.push(Issue::GreyDecreasing { map, at: t });
                        decreasing = true;
                    }
                }
                prev = Some(v.value);
                if k == GREY_SCAN {
                    top = top.max(v.value);
                }
            }
            if clamped > 0 {
                issues.push(Issue::GreyClamped { map, samples: clamped });
            }
        }
        if top < 1.0 - 1e-12 {
            issues.push(Issue::NoGreyReachesOne { max: top });
        }
    }

    ValidationReport { alpha, issues }
}
