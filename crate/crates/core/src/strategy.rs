use serde::{Deserialize, Serialize};

use crate::error::{Result, SpbeError};
use crate::game::GameSpec;

/// Row-sum tolerance for strategy rows and beliefs.
pub const DIST_TOL: f64 = 1e-10;

/// One stage's partial strategies: for each player `i`, a matrix
/// `[x_i][a_i]` with `rows[i][x][a] = gamma^i(a | x)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PartialStrategyProfile {
    pub rows: Vec<Vec<Vec<f64>>>,
}

impl PartialStrategyProfile {
    pub fn uniform(spec: &GameSpec) -> Self {
        let rows = spec
            .type_space_sizes
            .iter()
            .zip(&spec.action_space_sizes)
            .map(|(&nx, &na)| vec![vec![1.0 / na as f64; na]; nx])
            .collect();
        Self { rows }
    }

    /// Deterministic profile from `choice[i][x] = a`.
    pub fn pure(spec: &GameSpec, choice: &[Vec<usize>]) -> Self {
        let rows = choice
            .iter()
            .zip(&spec.action_space_sizes)
            .map(|(per_x, &na)| {
                per_x
                    .iter()
                    .map(|&a| {
                        let mut row = vec![0.0; na];
                        row[a] = 1.0;
                        row
                    })
                    .collect()
            })
            .collect();
        Self { rows }
    }

    pub fn num_players(&self) -> usize {
        self.rows.len()
    }

    #[inline]
    pub fn prob(&self, i: usize, x: usize, a: usize) -> f64 {
        self.rows[i][x][a]
    }

    pub fn player(&self, i: usize) -> &[Vec<f64>] {
        &self.rows[i]
    }

    /// Check shape against `spec` and that every row is a distribution.
    pub fn check(&self, spec: &GameSpec) -> Result<()> {
        if self.rows.len() != spec.num_players {
            return Err(SpbeError::Dimension(format!(
                "profile has {} players, game has {}",
                self.rows.len(),
                spec.num_players
            )));
        }
        for (i, per_i) in self.rows.iter().enumerate() {
            if per_i.len() != spec.type_space_sizes[i] {
                return Err(SpbeError::Dimension(format!("profile player {i}: wrong number of types")));
            }
            for (x, row) in per_i.iter().enumerate() {
                if row.len() != spec.action_space_sizes[i] {
                    return Err(SpbeError::Dimension(format!("profile row ({i}, {x}): wrong number of actions")));
                }
                let sum: f64 = row.iter().sum();
                if row.iter().any(|p| !(*p >= -DIST_TOL)) || (sum - 1.0).abs() > DIST_TOL {
                    return Err(SpbeError::Dimension(format!("profile row ({i}, {x}) is not a distribution")));
                }
            }
        }
        Ok(())
    }

    /// Sup-norm distance between two profiles of equal shape.
    pub fn distance(&self, other: &Self) -> f64 {
        self.rows
            .iter()
            .flatten()
            .flatten()
            .zip(other.rows.iter().flatten().flatten())
            .fold(0.0, |m, (a, b)| f64::max(m, (a - b).abs()))
    }

    /// `(1 - alpha) * self + alpha * target`, in place.
    pub fn blend(&mut self, target: &Self, alpha: f64) {
        for (a, b) in self.rows.iter_mut().flatten().flatten().zip(target.rows.iter().flatten().flatten()) {
            *a = (1.0 - alpha) * *a + alpha * b;
        }
    }
}
