//! Run diagnostics as plain `key: value` lines.

use std::fmt;

use ifsnet_core::StopReason;

#[derive(Debug, Clone, PartialEq)]
pub struct RunReport {
    pub mode: &'static str,
    pub backend: Option<&'static str>,
    pub alpha: f64,
    pub n: u32,
    pub net_points: usize,
    pub epsilon_eff: f64,
    pub epsilon_guaranteed: bool,
    /// `ε` from planning when a target `δ` was given.
    pub planned_epsilon: Option<f64>,
    pub target_delta: Option<f64>,
    pub diameter: f64,
    pub planned_iterations: u32,
    /// `5ε_eff/(1-α) + α^N·D` for the net actually used.
    pub predicted_delta: f64,
    pub iterations: u32,
    pub stop_reason: StopReason,
    pub distances: Vec<f64>,
    pub table_records: Option<u64>,
    pub table_seconds: f64,
    pub iteration_seconds: f64,
    pub total_seconds: f64,
    pub clamp_events: u64,
    pub warnings: Vec<String>,
}

impl fmt::Display for RunReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "mode: {}", self.mode)?;
        if let Some(b) = self.backend {
            writeln!(f, "backend: {b}")?;
        }
        writeln!(f, "alpha: {:.10}", self.alpha)?;
        writeln!(f, "n: {}", self.n)?;
        writeln!(f, "net_points: {}", self.net_points)?;
        writeln!(f, "epsilon_eff: {:.6e}", self.epsilon_eff)?;
        writeln!(f, "epsilon_guaranteed: {}", self.epsilon_guaranteed)?;
        if let Some(e) = self.planned_epsilon {
            writeln!(f, "planned_epsilon: {e:.6e}")?;
        }
        if let Some(d) = self.target_delta {
            writeln!(f, "target_delta: {d}")?;
        }
        writeln!(f, "diameter: {:.10}", self.diameter)?;
        writeln!(f, "planned_iterations: {}", self.planned_iterations)?;
        writeln!(f, "predicted_delta: {:.10}", self.predicted_delta)?;
        writeln!(f, "iterations: {}", self.iterations)?;
        writeln!(f, "stop_reason: {}", self.stop_reason)?;
        let d: Vec<String> = self.distances.iter().map(|v| format!("{v:.10}")).collect();
        writeln!(f, "distances: {}", d.join(" "))?;
        if let Some(r) = self.table_records {
            writeln!(f, "table_records: {r}")?;
        }
        writeln!(f, "table_seconds: {:.3}", self.table_seconds)?;
        writeln!(f, "iteration_seconds: {:.3}", self.iteration_seconds)?;
        writeln!(f, "total_seconds: {:.3}", self.total_seconds)?;
        writeln!(f, "clamp_events: {}", self.clamp_events)?;
        for w in &self.warnings {
            writeln!(f, "warning: {w}")?;
        }
        Ok(())
    }
}
