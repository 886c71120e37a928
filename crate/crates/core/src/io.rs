//! Equilibrium files and trajectory dumps.

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::backward::{BackwardOutput, GeneratorTable, RunReport, ValueTable};
use crate::belief::{InterpolationScheme, SimplexGrid};
use crate::config::RunConfig;
use crate::error::{Result, SpbeError};
use crate::forward::{EquilibriumProfile, Trajectory};
use crate::game::GameSpec;

pub const EQUILIBRIUM_SCHEMA: &str = "spbe-equilibrium/1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridMeta {
    pub resolution: usize,
    pub type_space_sizes: Vec<usize>,
    pub interpolation: InterpolationScheme,
    /// Points are listed in the order of `SimplexGrid::points`.
    pub note: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EquilibriumFile {
    pub schema: String,
    pub num_players: usize,
    pub horizon: usize,
    pub action_space_sizes: Vec<usize>,
    pub config: RunConfig,
    pub grid: GridMeta,
    pub values: ValueTable,
    pub generator: GeneratorTable,
    pub report: RunReport,
    pub profile: EquilibriumProfile,
}

impl EquilibriumFile {
    pub fn new(spec: &GameSpec, config: &RunConfig, tables: BackwardOutput, profile: EquilibriumProfile) -> Self {
        Self {
            schema: EQUILIBRIUM_SCHEMA.to_string(),
            num_players: spec.num_players,
            horizon: spec.horizon,
            action_space_sizes: spec.action_space_sizes.clone(),
            config: config.clone(),
            grid: GridMeta {
                resolution: config.grid_resolution,
                type_space_sizes: spec.type_space_sizes.clone(),
                interpolation: config.interpolation,
                note: "value function represented on a uniform simplex grid with interpolation between nodes"
                    .to_string(),
            },
            values: tables.values,
            generator: tables.generator,
            report: tables.report,
            profile,
        }
    }

    pub fn grid(&self) -> Result<SimplexGrid> {
        SimplexGrid::new(&self.grid.type_space_sizes, self.grid.resolution)
    }

    /// Split back into the backward-pass tables.
    pub fn tables(&self) -> BackwardOutput {
        BackwardOutput {
            values: self.values.clone(),
            generator: self.generator.clone(),
            report: self.report.clone(),
        }
    }

    /// Check that the file was produced for a game shaped like `spec`.
    pub fn check_against(&self, spec: &GameSpec) -> Result<()> {
        let mismatch = |what: &str| Err(SpbeError::Schema(format!("equilibrium file {what} does not match the game")));
        if self.schema != EQUILIBRIUM_SCHEMA {
            return Err(SpbeError::Schema(format!(
                "unknown schema {:?}, expected {EQUILIBRIUM_SCHEMA:?}",
                self.schema
            )));
        }
        if self.num_players != spec.num_players {
            return mismatch("player count");
        }
        if self.horizon != spec.horizon {
            return mismatch("horizon");
        }
        if self.grid.type_space_sizes != spec.type_space_sizes {
            return mismatch("type space sizes");
        }
        if self.action_space_sizes != spec.action_space_sizes {
            return mismatch("action space sizes");
        }
        let points = self.grid()?.len();
        if self.values.layers.len() != spec.horizon + 1 || self.values.layers.iter().any(|l| l.len() != points) {
            return mismatch("value table shape");
        }
        if self.generator.layers.len() != spec.horizon || self.generator.layers.iter().any(|l| l.len() != points) {
            return mismatch("generator table shape");
        }
        for node in &self.profile.nodes {
            node.prescription.gamma.check(spec)?;
            node.belief.check(&spec.type_space_sizes)?;
        }
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: Self = serde_json::from_str(text)?;
        if file.schema != EQUILIBRIUM_SCHEMA {
            return Err(SpbeError::Schema(format!("unknown schema {:?}", file.schema)));
        }
        Ok(file)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn read(path: &Path) -> Result<Self> {
        Self::from_json(&fs::read_to_string(path)?)
    }
}

pub fn read_game(path: &Path) -> Result<GameSpec> {
    GameSpec::from_json(&fs::read_to_string(path)?)
}

/// One JSON record per line per (episode, t).
pub fn write_trajectories<W: Write>(out: &mut W, trajectories: &[Trajectory]) -> Result<()> {
    for traj in trajectories {
        for rec in traj.records() {
            serde_json::to_writer(&mut *out, &rec)?;
            out.write_all(b"\n")?;
        }
    }
    Ok(())
}
