use std::fmt;
use std::io::Write;

use serde::{Deserialize, Serialize};

use super::alpha::solve_alpha;
use super::config::SolverConfig;
use super::latent::solve_latent;
use super::motion::solve_motion;
use super::objective::{objective, EnergyBreakdown};
use crate::error::Result;
use crate::image::ImageBuffer;
use crate::scene::Scene;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SubStep {
    Latent,
    Alpha,
    Motion,
}

impl fmt::Display for SubStep {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SubStep::Latent => "latent",
            SubStep::Alpha => "alpha",
            SubStep::Motion => "motion",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceEntry {
    /// Pyramid level, 0 for a single-scale run.
    pub level: usize,
    pub iteration: usize,
    pub step: SubStep,
    pub energy: EnergyBreakdown,
}

impl TraceEntry {
    /// Label used in the CSV `step` column, e.g. `L1/it2/alpha`.
    pub fn label(&self) -> String {
        format!("L{}/it{}/{}", self.level, self.iteration, self.step)
    }
}

#[derive(Debug, Clone)]
pub struct AlternationOutput {
    pub scene: Scene,
    pub initial: EnergyBreakdown,
    pub trace: Vec<TraceEntry>,
}

/// Runs `inner_iterations` rounds of latent, mask and motion updates,
/// recording the objective after every sub-step.
pub fn alternate(scene: &Scene, frames: &[ImageBuffer], config: &SolverConfig) -> Result<AlternationOutput> {
    config.validate()?;
    let initial = objective(scene, frames, config)?;
    let mut trace = Vec::with_capacity(3 * config.inner_iterations);
    let scene = alternate_into(scene, frames, config, 0, &mut trace)?;
    Ok(AlternationOutput { scene, initial, trace })
}

/// Same as [`alternate`], tagging entries with `level` and appending them to
/// `trace` as soon as they are computed.
pub fn alternate_into(
    scene: &Scene,
    frames: &[ImageBuffer],
    config: &SolverConfig,
    level: usize,
    trace: &mut Vec<TraceEntry>,
) -> Result<Scene> {
    config.validate()?;
    let mut scene = scene.clone();
    for iteration in 0..config.inner_iterations {
        let (bg, fg) = solve_latent(&scene, frames, config)?;
        scene.background = bg;
        scene.foreground = fg;
        trace.push(TraceEntry {
            level,
            iteration,
            step: SubStep::Latent,
            energy: objective(&scene, frames, config)?,
        });

        scene.alpha = solve_alpha(&scene, frames, config)?;
        trace.push(TraceEntry {
            level,
            iteration,
            step: SubStep::Alpha,
            energy: objective(&scene, frames, config)?,
        });

        scene.motions = solve_motion(&scene, frames, config)?;
        trace.push(TraceEntry {
            level,
            iteration,
            step: SubStep::Motion,
            energy: objective(&scene, frames, config)?,
        });
        log::debug!(
            "level {level} iteration {iteration}: total {:.6e}",
            trace.last().map_or(f64::NAN, |t| t.energy.total)
        );
    }
    Ok(scene)
}

/// Writes the trace as CSV with a header row.
pub fn write_trace_csv<W: Write>(mut out: W, trace: &[TraceEntry]) -> std::io::Result<()> {
    writeln!(out, "step,data_term,layer_prior,alpha_tv,alpha_binary,total")?;
    for t in trace {
        let e = &t.energy;
        writeln!(
            out,
            "{},{:.12e},{:.12e},{:.12e},{:.12e},{:.12e}",
            t.label(),
            e.data_term,
            e.layer_prior,
            e.alpha_tv,
            e.alpha_binary,
            e.total
        )?;
    }
    Ok(())
}
