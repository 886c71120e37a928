use serde::{Deserialize, Serialize};

use crate::belief::InterpolationScheme;
use crate::error::{Result, SpbeError};
use crate::game::GameSpec;
use crate::stage::{StageConfig, StageMethod};

/// How the forward pass obtains prescriptions at beliefs off the grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ThetaMode {
    /// Solve the stage fixed point at the exact belief.
    #[default]
    ReSolve,
    /// Reuse the nearest grid point's profile. Approximate.
    Nearest,
}

/// Every knob of a solve/verify/simulate run. Echoed into output files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub grid_resolution: usize,
    pub method: StageMethod,
    pub tolerance: f64,
    pub tie_tol: f64,
    /// Deviation-gain tolerance; `None` means `1e-6 * T * max|R|`.
    pub gain_tol: Option<f64>,
    pub damping: f64,
    pub max_iters: usize,
    pub epsilon_schedule: Vec<f64>,
    /// Polish stalled best-response runs into mixed equilibria.
    pub refine: bool,
    pub enum_cap: u128,
    pub node_cap: usize,
    pub depth_cap: Option<usize>,
    pub seed: u64,
    pub normalize: bool,
    pub theta_mode: ThetaMode,
    pub interpolation: InterpolationScheme,
}

impl Default for RunConfig {
    fn default() -> Self {
        let stage = StageConfig::default();
        Self {
            grid_resolution: 10,
            method: StageMethod::BrIteration,
            tolerance: stage.tolerance,
            tie_tol: stage.tie_tol,
            gain_tol: None,
            damping: stage.damping,
            max_iters: stage.max_iters,
            epsilon_schedule: stage.epsilon_schedule,
            refine: stage.refine,
            enum_cap: stage.enum_cap,
            node_cap: 1_000_000,
            depth_cap: None,
            seed: 0,
            normalize: false,
            theta_mode: ThetaMode::ReSolve,
            interpolation: InterpolationScheme::Multilinear,
        }
    }
}

impl RunConfig {
    /// Check the config on its own and against `spec` when given.
    pub fn validate(&self, spec: Option<&GameSpec>) -> Result<()> {
        let bad = |msg: String| Err(SpbeError::InvalidConfig(msg));
        if self.grid_resolution == 0 {
            return bad("grid resolution must be at least 1".into());
        }
        for (name, v) in [("tolerance", self.tolerance), ("tie tolerance", self.tie_tol)] {
            if !(v > 0.0) {
                return bad(format!("{name} must be positive, got {v}"));
            }
        }
        if let Some(g) = self.gain_tol {
            if !(g > 0.0) {
                return bad(format!("gain tolerance must be positive, got {g}"));
            }
        }
        if !(self.damping > 0.0 && self.damping <= 1.0) {
            return bad(format!("damping {} outside (0, 1]", self.damping));
        }
        if self.epsilon_schedule.is_empty() {
            return bad("empty epsilon schedule".into());
        }
        if self.epsilon_schedule.windows(2).any(|w| !(w[1] < w[0])) {
            return bad(format!("epsilon schedule not strictly decreasing: {:?}", self.epsilon_schedule));
        }
        if self.epsilon_schedule.iter().any(|e| !(*e > 0.0)) {
            return bad("epsilon values must be positive".into());
        }
        if let Some(spec) = spec {
            let cap = 1.0 / spec.max_actions() as f64;
            if let Some(e) = self.epsilon_schedule.iter().find(|e| **e >= cap) {
                return bad(format!("epsilon {e} not below 1/max|A^i| = {cap}"));
            }
            if let Some(d) = self.depth_cap {
                if d > spec.horizon {
                    return bad(format!("depth cap {d} exceeds horizon {}", spec.horizon));
                }
            }
        }
        Ok(())
    }

    pub fn stage_config(&self) -> StageConfig {
        StageConfig {
            damping: self.damping,
            max_iters: self.max_iters,
            tolerance: self.tolerance,
            tie_tol: self.tie_tol,
            enum_cap: self.enum_cap,
            epsilon_schedule: self.epsilon_schedule.clone(),
            refine: self.refine,
            initial: None,
        }
    }

    pub fn gain_tolerance(&self, spec: &GameSpec) -> f64 {
        self.gain_tol
            .unwrap_or_else(|| (1e-6 * spec.horizon as f64 * spec.max_abs_reward()).max(1e-12))
    }
}
