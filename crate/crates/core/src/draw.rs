//! Iteration drivers: apply a discrete operator from an initial set until the
//! stopping rule fires, recording the distance between consecutive iterates.

use crate::metrics::{d_infinity, hausdorff, should_stop, IterationHistory, MetricError, StopReason};
use crate::operators::{
    direct_fuzzy_step, generalized_fuzzy_step, generalized_hutchinson_step, DiscreteFuzzySet, DiscreteSet,
    Discretization, InverseTable, OperatorError,
};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum DrawError {
    #[error(transparent)]
    Operator(#[from] OperatorError),
    #[error(transparent)]
    Metric(#[from] MetricError),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DrawOptions {
    pub max_iterations: u32,
    /// Stop once the distance between iterates drops below this.
    pub tol: f64,
    /// Limit on map evaluations per step for table-free steps.
    pub budget: u64,
}

/// How fuzzy steps are computed.
#[derive(Clone, Copy)]
pub enum FuzzyBackend<'t> {
    Table(&'t dyn InverseTable),
    /// Forward evaluation over `supp(u)^m`, no table.
    Direct,
}

#[derive(Debug, Clone)]
pub struct Run<S> {
    pub result: S,
    pub history: IterationHistory,
    pub iterations: u32,
    pub stop: StopReason,
}

/// Iterates `F̄` (any arity) from `initial`. `observe` sees every iterate,
/// starting with iteration 1.
pub fn draw_crisp(
    d: &Discretization<'_>,
    initial: DiscreteSet,
    opts: &DrawOptions,
    mut observe: impl FnMut(u32, &DiscreteSet),
) -> Result<Run<DiscreteSet>, DrawError> {
    let mut history = IterationHistory::new(opts.tol);
    let mut current = initial;
    let mut done = 0;
    loop {
        if let Some(stop) = should_stop(&history, done, opts.max_iterations) {
            return Ok(Run {
                result: current,
                history,
                iterations: done,
                stop,
            });
        }
        let next = generalized_hutchinson_step(d, &current, opts.budget)?;
        history.push(hausdorff(&current, &next)?);
        done += 1;
        observe(done, &next);
        current = next;
    }
}

/// Iterates `Z̄` (any arity) from `initial`, which must be normal.
pub fn draw_fuzzy(
    d: &Discretization<'_>,
    backend: FuzzyBackend<'_>,
    initial: DiscreteFuzzySet,
    opts: &DrawOptions,
    mut observe: impl FnMut(u32, &DiscreteFuzzySet),
) -> Result<Run<DiscreteFuzzySet>, DrawError> {
    if !initial.is_normal() {
        return Err(MetricError::NotNormal.into());
    }
    let mut history = IterationHistory::new(opts.tol);
    let mut current = initial;
    let mut done = 0;
    loop {
        if let Some(stop) = should_stop(&history, done, opts.max_iterations) {
            return Ok(Run {
                result: current,
                history,
                iterations: done,
                stop,
            });
        }
        let next = match backend {
            FuzzyBackend::Table(t) => generalized_fuzzy_step(d, t, &current)?,
            FuzzyBackend::Direct => direct_fuzzy_step(d, &current, opts.budget)?,
        };
        history.push(d_infinity(&current, &next)?);
        done += 1;
        observe(done, &next);
        current = next;
    }
}
