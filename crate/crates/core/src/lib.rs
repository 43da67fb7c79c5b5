//! Limited-retaliation strategies for two-player revision games.
//!
//! Players prepare actions that are executed at a deadline; revision
//! opportunities arrive by a Poisson process. This crate synthesizes
//! cooperative plans that remain subgame perfect when a deviation is punished
//! only for a bounded window, certifies them, and simulates play.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod equilibrium;
pub mod error;
pub mod game;
pub mod plan;
pub mod roots;
pub mod simulator;
pub mod synthesis;
pub mod transform;

pub use equilibrium::{verify_spe, SpeReport, Verdict};
pub use error::{Error, Result};
pub use game::{GameSpec, Orientation, StageGame};
pub use plan::{expected_payoff, LrStrategy, MpcPlan, PiecewisePlan};
pub use simulator::{run_batch, SimConfig, SimResult};
pub use synthesis::{synthesize_plan, Synthesis, SynthesisOptions, TailPolicy};
pub use transform::{bound_plan, monotonize_plan};
