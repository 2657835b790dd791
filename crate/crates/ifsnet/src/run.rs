//! The four drawing drivers behind one entry point: build the net, plan or
//! check the resolution, build `Φ⁻¹` for fuzzy modes, iterate, rasterize.

use std::path::Path;
use std::time::Instant;

use ifsnet_core::draw::{draw_crisp, draw_fuzzy, DrawError, DrawOptions, FuzzyBackend};
use ifsnet_core::nets::NetError;
use ifsnet_core::operators::{characteristic, generate_inverse_table, Discretization, InverseTable, OperatorError};
use ifsnet_core::systems::{plan_resolution, predicted_resolution, PlanError, SystemError};
use ifsnet_core::{DiscreteFuzzySet, DiscreteSet, Membership, Net, ResolutionPlan};

use crate::config::{Backend, Initial, NetConfig, Resolution, RunConfig};
use crate::image::{crisp_raster, fuzzy_raster, Raster};
use crate::report::RunReport;
use crate::table_file::{write_table, TableFileError};

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error(transparent)]
    System(#[from] SystemError),
    #[error("contraction constant {0} is not below 1")]
    NotContractive(f64),
    #[error(transparent)]
    Plan(#[from] PlanError),
    #[error("planned resolution {predicted} exceeds delta {delta}")]
    Infeasible { predicted: f64, delta: f64 },
    #[error(transparent)]
    Net(#[from] NetError),
    #[error(transparent)]
    Operator(#[from] OperatorError),
    #[error(transparent)]
    Draw(#[from] DrawError),
    #[error(transparent)]
    Table(#[from] TableFileError),
    #[error("initial fuzzy set must have a point of membership 1")]
    InitialNotNormal,
    #[error("I/O: {0}")]
    Io(#[from] std::io::Error),
}

impl RunError {
    /// 2 for planning failures, 3 for everything that happens while running.
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::NotContractive(_) | RunError::Plan(_) | RunError::Infeasible { .. } => 2,
            _ => 3,
        }
    }
}

/// Net size, iteration count and resolution bookkeeping for a config.
#[derive(Debug, Clone, PartialEq)]
pub struct Resolved {
    pub alpha: f64,
    pub diameter: f64,
    pub n: u32,
    pub iterations: u32,
    pub plan: Option<ResolutionPlan>,
    pub epsilon_eff: f64,
    pub predicted_delta: f64,
    pub warnings: Vec<String>,
}

/// Computes `α_S`, then either plans `ε` and `N` from `δ` (choosing `n` so
/// that the net's effective `ε` meets the plan, unless `n` is given) or takes
/// `n` and `N` as given and reports the resolution they achieve.
pub fn resolve(config: &RunConfig) -> Result<Resolved, RunError> {
    let alpha = config.system.lipschitz()?;
    if alpha >= 1.0 {
        return Err(RunError::NotContractive(alpha));
    }
    let domain = config.system.domain();
    let configured_n = match config.net {
        NetConfig::Uniform { n } => n,
        NetConfig::Aleatory { n, .. } => Some(n),
    };
    let mut warnings = Vec::new();
    let (diameter, n, iterations, plan) = match config.resolution {
        Resolution::Plan { delta, theta, diameter } => {
            let d = diameter.unwrap_or_else(|| domain.diameter());
            let plan = plan_resolution(delta, theta, d, alpha)?;
            if !plan.feasible {
                return Err(RunError::Infeasible {
                    predicted: plan.predicted,
                    delta,
                });
            }
            let n = match configured_n {
                Some(n) => n,
                None => {
                    let n = (domain.diameter() / plan.epsilon).ceil();
                    if n > f64::from(u32::MAX) {
                        return Err(NetError::GridTooLarge(u32::MAX).into());
                    }
                    n as u32
                }
            };
            (d, n, plan.iterations, Some(plan))
        }
        Resolution::Direct { iterations } => {
            let n = configured_n.expect("config requires n with direct iterations");
            (domain.diameter(), n, iterations, None)
        }
    };
    if n == 0 {
        return Err(NetError::ZeroSubdivisions.into());
    }
    let epsilon_eff = domain.diameter() / f64::from(n);
    if let Some(p) = &plan {
        if epsilon_eff > p.epsilon * (1.0 + 1e-12) {
            warnings.push(format!(
                "net spacing gives epsilon {epsilon_eff:.6e}, coarser than the planned {:.6e}",
                p.epsilon
            ));
        }
    }
    if let NetConfig::Aleatory { .. } = config.net {
        warnings.push("aleatory net: epsilon is nominal, not guaranteed".to_string());
    }
    for w in config.validation.warnings() {
        warnings.push(w.to_string());
    }
    let predicted_delta = predicted_resolution(epsilon_eff, iterations, alpha, diameter);
    Ok(Resolved {
        alpha,
        diameter,
        n,
        iterations,
        plan,
        epsilon_eff,
        predicted_delta,
        warnings,
    })
}

pub fn build_net(config: &RunConfig, n: u32) -> Result<Net, RunError> {
    let domain = *config.system.domain();
    Ok(match config.net {
        NetConfig::Uniform { .. } => Net::uniform(domain, n)?,
        NetConfig::Aleatory { samples, seed, .. } => Net::aleatory(domain, n, samples, seed)?,
    })
}

fn initial_fuzzy(config: &RunConfig, net: &Net) -> Result<DiscreteFuzzySet, RunError> {
    let grid = *net.grid();
    let entries = match &config.initial {
        Initial::Center => vec![(net.project_nearest(&config.system.domain().center()), Membership::ONE)],
        Initial::Crisp(points) => points
            .iter()
            .map(|p| (net.project_nearest(p), Membership::ONE))
            .collect(),
        Initial::Fuzzy(points) => points
            .iter()
            .map(|(p, m)| (net.project_nearest(p), Membership::quantize(*m)))
            .collect(),
    };
    let u = DiscreteFuzzySet::new(grid, entries)?;
    if !u.is_normal() {
        return Err(RunError::InitialNotNormal);
    }
    Ok(u)
}

/// What a run produced.
#[derive(Debug, Clone)]
pub enum Rendered {
    Crisp(DiscreteSet),
    Fuzzy(DiscreteFuzzySet),
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub raster: Raster,
    pub result: Rendered,
    pub report: RunReport,
}

/// Runs a configuration. `observe` sees each iterate as it is produced.
pub fn run_with(config: &RunConfig, mut observe: impl FnMut(u32, &Rendered)) -> Result<RunOutput, RunError> {
    let start = Instant::now();
    let resolved = resolve(config)?;
    let net = build_net(config, resolved.n)?;
    let d = Discretization::new(&config.system, &net)?;
    let opts = DrawOptions {
        max_iterations: resolved.iterations,
        tol: config.tol,
        budget: config.budget,
    };
    let u0 = initial_fuzzy(config, &net)?;

    let mut table_records = None;
    let mut table_seconds = 0.0;
    let (result, history, iterations, stop, iteration_seconds) = if config.mode.is_fuzzy() {
        let table_start = Instant::now();
        let mut _temp = None;
        let table: Option<Box<dyn InverseTable>> = match config.backend {
            Backend::Ram => Some(Box::new(generate_inverse_table(&d, config.budget)?)),
            Backend::File => {
                let path = match &config.table_path {
                    Some(p) => p.clone(),
                    None => {
                        let t = tempfile::Builder::new().prefix("phiinv").suffix(".bin").tempfile()?;
                        let p = t.path().to_path_buf();
                        _temp = Some(t);
                        p
                    }
                };
                Some(Box::new(write_table(&d, &path, config.file_budget, config.chunk_records)?))
            }
            Backend::Direct => None,
        };
        if let Some(t) = &table {
            table_records = Some(t.record_count());
            table_seconds = table_start.elapsed().as_secs_f64();
        }
        let backend = match &table {
            Some(t) => FuzzyBackend::Table(t.as_ref()),
            None => FuzzyBackend::Direct,
        };
        let iter_start = Instant::now();
        let run = draw_fuzzy(&d, backend, u0, &opts, |k, u| observe(k, &Rendered::Fuzzy(u.clone())))?;
        (
            Rendered::Fuzzy(run.result),
            run.history,
            run.iterations,
            run.stop,
            iter_start.elapsed().as_secs_f64(),
        )
    } else {
        let iter_start = Instant::now();
        let run = draw_crisp(&d, u0.support(), &opts, |k, w| observe(k, &Rendered::Crisp(w.clone())))?;
        (
            Rendered::Crisp(run.result),
            run.history,
            run.iterations,
            run.stop,
            iter_start.elapsed().as_secs_f64(),
        )
    };

    let raster = match &result {
        Rendered::Crisp(w) => crisp_raster(w, config.invert),
        Rendered::Fuzzy(u) => fuzzy_raster(u, config.invert),
    };
    let report = RunReport {
        mode: config.mode.as_str(),
        backend: config.mode.is_fuzzy().then(|| config.backend.as_str()),
        alpha: resolved.alpha,
        n: resolved.n,
        net_points: net.len(),
        epsilon_eff: resolved.epsilon_eff,
        epsilon_guaranteed: net.epsilon_is_guaranteed(),
        planned_epsilon: resolved.plan.map(|p| p.epsilon),
        target_delta: resolved.plan.map(|p| p.delta),
        diameter: resolved.diameter,
        planned_iterations: resolved.iterations,
        predicted_delta: resolved.predicted_delta,
        iterations,
        stop_reason: stop,
        distances: history.values,
        table_records,
        table_seconds,
        iteration_seconds,
        total_seconds: start.elapsed().as_secs_f64(),
        clamp_events: d.clamp_count(),
        warnings: resolved.warnings,
    };
    Ok(RunOutput { raster, result, report })
}

pub fn run(config: &RunConfig) -> Result<RunOutput, RunError> {
    run_with(config, |_, _| {})
}

/// Runs and writes the image (and the report, if a path is given).
pub fn render(config: &RunConfig, image: &Path, report: Option<&Path>) -> Result<RunOutput, RunError> {
    let out = run(config)?;
    out.raster.write_pgm(image)?;
    if let Some(p) = report {
        std::fs::write(p, out.report.to_string())?;
    }
    Ok(out)
}

/// Keeps crisp runs and fuzzy runs comparable: the crisp start is the
/// support of the fuzzy start.
pub fn initial_set(config: &RunConfig, net: &Net) -> Result<DiscreteSet, RunError> {
    Ok(initial_fuzzy(config, net)?.support())
}

/// `χ` of the crisp start, for callers comparing modes.
pub fn initial_characteristic(config: &RunConfig, net: &Net) -> Result<DiscreteFuzzySet, RunError> {
    Ok(characteristic(&initial_set(config, net)?))
}
