//! Alternating minimization of the layered deblurring objective.

mod alpha;
mod alternate;
mod cg;
mod config;
mod latent;
mod motion;
mod nelder_mead;
mod objective;
mod prox;

pub use alpha::{project_dual, solve_alpha};
pub use alternate::{alternate_into, alternate, write_trace_csv, AlternationOutput, SubStep, TraceEntry};
pub use cg::{conjugate_gradient, CgFailure, CgOutcome};
pub use config::SolverConfig;
pub use latent::{latent_unconstrained, solve_latent};
pub use motion::{solve_motion, SIMPLEX_STEP};
pub use nelder_mead::{nelder_mead, NelderMeadOptions, NelderMeadResult};
pub use objective::{data_gradient_alpha, data_gradient_layers, objective, stack_frames, EnergyBreakdown};
pub use prox::{prox_exact, ProxLut, LUT_ENTRIES};
