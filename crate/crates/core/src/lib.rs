//! Structured perfect Bayesian equilibria of finite dynamic games with
//! independent private types: a backward pass over a grid of common
//! beliefs, a forward pass over public histories, and brute-force checks.

pub mod backward;
pub mod belief;
pub mod config;
pub mod error;
pub mod forward;
pub mod game;
pub mod games;
pub mod io;
pub mod joint;
mod refine;
pub mod stage;
pub mod strategy;
pub mod verify;

pub use backward::{backward_pass, BackwardOutput, GeneratorTable, RunReport, ValueTable};
pub use belief::{belief_update, belief_update_profile, BeliefVector, InterpolationScheme, SimplexGrid};
pub use config::{RunConfig, ThetaMode};
pub use error::{Result, SpbeError};
pub use forward::{analytic_expected_reward, forward_pass, simulate, EquilibriumProfile, PrescriptionSource, ThetaSource};
pub use game::{validate_game, GameSpec, ValidationReport};
pub use io::EquilibriumFile;
pub use joint::JointIndex;
pub use stage::{solve_stage, StageConfig, StageMethod, StageProblem, StageSolveResult};
pub use strategy::PartialStrategyProfile;
pub use verify::{audit_spbe, check_structured, joint_bayes_oracle, AuditConfig, DeviationReport};
