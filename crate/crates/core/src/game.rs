//! Game primitives: players, horizon, finite type and action spaces, type
//! kernels, rewards and initial type distributions.
//!
//! Time is 0-based in code. `kernels[t]` maps types at `t` to types at
//! `t + 1` and exists for `t < horizon - 1`; `rewards[t]` exists for every
//! `t < horizon`.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Result, SpbeError};
use crate::joint::JointIndex;

/// Tolerance on probability-vector sums.
pub const PROB_SUM_TOL: f64 = 1e-12;
/// Rows within this distance of 1 are rescaled by [`GameSpec::normalize`].
pub const NORMALIZE_TOL: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GameSpec {
    pub num_players: usize,
    pub horizon: usize,
    pub type_space_sizes: Vec<usize>,
    pub action_space_sizes: Vec<usize>,
    /// `[i][x]`
    pub initial_dists: Vec<Vec<f64>>,
    /// `[t][i][x][a_flat][x_next]`
    pub kernels: Vec<Vec<Vec<Vec<Vec<f64>>>>>,
    /// `[t][i][x_flat][a_flat]`
    pub rewards: Vec<Vec<Vec<Vec<f64>>>>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub path: String,
    pub message: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_ok(&self) -> bool {
        self.violations.is_empty()
    }

    fn push(&mut self, path: impl Into<String>, message: impl Into<String>) {
        self.violations.push(Violation {
            path: path.into(),
            message: message.into(),
        });
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for v in &self.violations {
            writeln!(f, "{}: {}", v.path, v.message)?;
        }
        Ok(())
    }
}

fn check_distribution(report: &mut ValidationReport, path: String, row: &[f64], len: usize) {
    if row.len() != len {
        report.push(path, format!("expected length {len}, found {}", row.len()));
        return;
    }
    if let Some((k, p)) = row.iter().enumerate().find(|(_, p)| !p.is_finite() || **p < 0.0) {
        report.push(format!("{path}[{k}]"), format!("invalid probability {p}"));
        return;
    }
    let sum: f64 = row.iter().sum();
    if (sum - 1.0).abs() > PROB_SUM_TOL {
        report.push(path, format!("probabilities sum to {sum}, expected 1"));
    }
}

/// Check every structural and probabilistic invariant of `spec`.
///
/// Violations are returned as data; the report is empty iff the spec is
/// well formed.
pub fn validate_game(spec: &GameSpec) -> ValidationReport {
    let mut report = ValidationReport::default();
    let n = spec.num_players;
    if n == 0 {
        report.push("num_players", "must be positive");
    }
    if spec.horizon == 0 {
        report.push("horizon", "must be positive");
    }
    for (name, sizes) in [
        ("type_space_sizes", &spec.type_space_sizes),
        ("action_space_sizes", &spec.action_space_sizes),
    ] {
        if sizes.len() != n {
            report.push(name, format!("expected {n} entries, found {}", sizes.len()));
        }
        for (i, &s) in sizes.iter().enumerate() {
            if s == 0 {
                report.push(format!("{name}[{i}]"), "must be positive");
            }
        }
    }
    // Everything below indexes through the sizes, so stop if they are unusable.
    if !report.is_ok() {
        return report;
    }
    let xs = &spec.type_space_sizes;
    let joint_x: usize = xs.iter().product();
    let joint_a: usize = spec.action_space_sizes.iter().product();

    if spec.initial_dists.len() != n {
        report.push(
            "initial_dists",
            format!("expected {n} entries, found {}", spec.initial_dists.len()),
        );
    }
    for (i, d) in spec.initial_dists.iter().enumerate().take(n) {
        check_distribution(&mut report, format!("initial_dists[{i}]"), d, xs[i]);
    }

    let kernel_steps = spec.horizon - 1;
    if spec.kernels.len() != kernel_steps {
        report.push(
            "kernels",
            format!("expected {kernel_steps} time slices, found {}", spec.kernels.len()),
        );
    }
    for (t, per_t) in spec.kernels.iter().enumerate() {
        if per_t.len() != n {
            report.push(format!("kernels[{t}]"), format!("expected {n} players, found {}", per_t.len()));
            continue;
        }
        for (i, per_i) in per_t.iter().enumerate() {
            if per_i.len() != xs[i] {
                report.push(
                    format!("kernels[{t}][{i}]"),
                    format!("expected {} types, found {}", xs[i], per_i.len()),
                );
                continue;
            }
            for (x, per_x) in per_i.iter().enumerate() {
                if per_x.len() != joint_a {
                    report.push(
                        format!("kernels[{t}][{i}][{x}]"),
                        format!("expected {joint_a} joint actions, found {}", per_x.len()),
                    );
                    continue;
                }
                for (a, row) in per_x.iter().enumerate() {
                    check_distribution(&mut report, format!("kernels[{t}][{i}][{x}][{a}]"), row, xs[i]);
                }
            }
        }
    }

    if spec.rewards.len() != spec.horizon {
        report.push(
            "rewards",
            format!("expected {} time slices, found {}", spec.horizon, spec.rewards.len()),
        );
    }
    for (t, per_t) in spec.rewards.iter().enumerate() {
        if per_t.len() != n {
            report.push(format!("rewards[{t}]"), format!("expected {n} players, found {}", per_t.len()));
            continue;
        }
        for (i, per_i) in per_t.iter().enumerate() {
            if per_i.len() != joint_x {
                report.push(
                    format!("rewards[{t}][{i}]"),
                    format!("expected {joint_x} joint types, found {}", per_i.len()),
                );
                continue;
            }
            for (x, row) in per_i.iter().enumerate() {
                if row.len() != joint_a {
                    report.push(
                        format!("rewards[{t}][{i}][{x}]"),
                        format!("expected {joint_a} joint actions, found {}", row.len()),
                    );
                    continue;
                }
                for (a, r) in row.iter().enumerate() {
                    if !r.is_finite() {
                        report.push(format!("rewards[{t}][{i}][{x}][{a}]"), format!("non-finite reward {r}"));
                    }
                }
            }
        }
    }
    report
}

fn renormalize(row: &mut [f64]) -> bool {
    let sum: f64 = row.iter().sum();
    if row.iter().all(|p| *p >= 0.0) && (sum - 1.0).abs() <= NORMALIZE_TOL && sum != 1.0 {
        row.iter_mut().for_each(|p| *p /= sum);
        true
    } else {
        false
    }
}

impl GameSpec {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    /// Validate and convert the report into an error.
    pub fn validated(self) -> Result<Self> {
        let report = validate_game(&self);
        if report.is_ok() {
            Ok(self)
        } else {
            Err(SpbeError::Validation(report))
        }
    }

    /// Opt-in repair pass: rescale every probability row whose sum is within
    /// [`NORMALIZE_TOL`] of 1. Returns the number of rows touched.
    pub fn normalize(&mut self) -> usize {
        let mut touched = 0;
        for d in &mut self.initial_dists {
            touched += renormalize(d) as usize;
        }
        for row in self.kernels.iter_mut().flatten().flatten().flatten() {
            touched += renormalize(row) as usize;
        }
        touched
    }

    pub fn joint_types(&self) -> JointIndex {
        JointIndex::new(&self.type_space_sizes)
    }

    pub fn joint_actions(&self) -> JointIndex {
        JointIndex::new(&self.action_space_sizes)
    }

    pub fn max_actions(&self) -> usize {
        self.action_space_sizes.iter().copied().max().unwrap_or(1)
    }

    /// `Q^i_{t+1}(. | x, a)` for the transition out of time `t`.
    #[inline]
    pub fn kernel_row(&self, t: usize, i: usize, x: usize, a: usize) -> &[f64] {
        &self.kernels[t][i][x][a]
    }

    #[inline]
    pub fn reward(&self, t: usize, i: usize, x: usize, a: usize) -> f64 {
        self.rewards[t][i][x][a]
    }

    pub fn max_abs_reward(&self) -> f64 {
        self.rewards
            .iter()
            .flatten()
            .flatten()
            .flatten()
            .fold(0.0_f64, |m, r| m.max(r.abs()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::games;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn well_formed_spec_is_clean() {
        let spec = games::random_game(&mut ChaCha8Rng::seed_from_u64(1), &[2, 2], &[2, 2], 2);
        assert!(validate_game(&spec).is_ok());
    }

    #[test]
    fn broken_kernel_row_is_located() {
        let mut spec = games::random_game(&mut ChaCha8Rng::seed_from_u64(2), &[2, 2], &[2, 2], 2);
        spec.kernels[0][1][0][2] = vec![0.5, 0.4];
        let report = validate_game(&spec);
        assert_eq!(report.violations.len(), 1);
        assert_eq!(report.violations[0].path, "kernels[0][1][0][2]");
    }

    #[test]
    fn negative_reward_is_fine() {
        let mut spec = games::matching_pennies(1);
        spec.rewards[0][0][0][0] = -3.5;
        assert!(validate_game(&spec).is_ok());
    }

    #[test]
    fn non_finite_reward_rejected() {
        let mut spec = games::matching_pennies(1);
        spec.rewards[0][1][0][3] = f64::NAN;
        let report = validate_game(&spec);
        assert_eq!(report.violations[0].path, "rewards[0][1][0][3]");
    }

    #[test]
    fn missing_kernel_slice_rejected() {
        let mut spec = games::matching_pennies(2);
        spec.kernels.clear();
        assert_eq!(validate_game(&spec).violations[0].path, "kernels");
    }

    #[test]
    fn normalize_repairs_near_rows_only() {
        let mut spec = games::signaling_game();
        spec.initial_dists[0] = vec![0.3, 0.7 + 5e-7];
        spec.kernels[0][0][1][0] = vec![0.0, 0.9];
        assert_eq!(spec.normalize(), 1);
        assert!((spec.initial_dists[0].iter().sum::<f64>() - 1.0).abs() <= PROB_SUM_TOL);
        assert_eq!(validate_game(&spec).violations.len(), 1);
    }

    #[test]
    fn json_round_trip() {
        let spec = games::signaling_game();
        let text = serde_json::to_string(&spec).unwrap();
        assert_eq!(GameSpec::from_json(&text).unwrap(), spec);
    }

    proptest! {
        #[test]
        fn random_specs_valid_and_single_corruption_located(seed in any::<u64>(), kind in 0usize..3) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let nx: Vec<usize> = (0..2).map(|_| rng.random_range(1..=3)).collect();
            let na: Vec<usize> = (0..2).map(|_| rng.random_range(1..=3)).collect();
            let mut spec = games::random_game(&mut rng, &nx, &na, 3);
            prop_assert!(validate_game(&spec).is_ok());
            let i = rng.random_range(0..2);
            let expected = match kind {
                0 => {
                    spec.initial_dists[i][0] = -0.1;
                    format!("initial_dists[{i}][0]")
                }
                1 => {
                    spec.kernels[1][i][0][0][0] += 0.05;
                    format!("kernels[1][{i}][0][0]")
                }
                _ => {
                    spec.rewards[2][i].pop();
                    format!("rewards[2][{i}]")
                }
            };
            let report = validate_game(&spec);
            prop_assert_eq!(report.violations.len(), 1);
            prop_assert_eq!(&report.violations[0].path, &expected);
        }
    }
}
