//! Marginal common beliefs, the per-player Bayes update with its
//! prediction-only fallback, and the simplex grid with interpolation used to
//! tabulate value functions.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Result, SpbeError};
use crate::game::GameSpec;
use crate::joint::JointIndex;
use crate::strategy::{PartialStrategyProfile, DIST_TOL};

/// Denominators at or below this value select the prediction-only branch.
pub const BAYES_THRESHOLD: f64 = 1e-12;

/// Per-player marginal beliefs; the joint belief is their product.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BeliefVector {
    pub marginals: Vec<Vec<f64>>,
}

impl BeliefVector {
    pub fn new(marginals: Vec<Vec<f64>>) -> Self {
        Self { marginals }
    }

    /// Root belief: the initial type distributions.
    pub fn initial(spec: &GameSpec) -> Self {
        Self::new(spec.initial_dists.clone())
    }

    pub fn num_players(&self) -> usize {
        self.marginals.len()
    }

    pub fn marginal(&self, i: usize) -> &[f64] {
        &self.marginals[i]
    }

    /// `pi(x) = prod_i pi^i(x^i)` for a flat joint type.
    pub fn joint_prob(&self, joint: &JointIndex, x: usize) -> f64 {
        self.marginals
            .iter()
            .enumerate()
            .map(|(i, m)| m[joint.component(x, i)])
            .product()
    }

    /// `prod_{j != i} pi^j(x^j)` for a flat joint type.
    pub fn others_prob(&self, joint: &JointIndex, x: usize, i: usize) -> f64 {
        self.marginals
            .iter()
            .enumerate()
            .filter(|(j, _)| *j != i)
            .map(|(j, m)| m[joint.component(x, j)])
            .product()
    }

    pub fn check(&self, sizes: &[usize]) -> Result<()> {
        if self.marginals.len() != sizes.len() {
            return Err(SpbeError::InvalidBelief(format!(
                "{} marginals for {} players",
                self.marginals.len(),
                sizes.len()
            )));
        }
        for (i, (m, &s)) in self.marginals.iter().zip(sizes).enumerate() {
            if m.len() != s {
                return Err(SpbeError::InvalidBelief(format!("marginal {i} has length {}, expected {s}", m.len())));
            }
            let sum: f64 = m.iter().sum();
            if m.iter().any(|p| !(*p >= -DIST_TOL)) || (sum - 1.0).abs() > DIST_TOL {
                return Err(SpbeError::InvalidBelief(format!("marginal {i} is not a distribution: {m:?}")));
            }
        }
        Ok(())
    }

    pub fn distance(&self, other: &Self) -> f64 {
        self.marginals
            .iter()
            .flatten()
            .zip(other.marginals.iter().flatten())
            .fold(0.0, |m, (a, b)| f64::max(m, (a - b).abs()))
    }
}

/// Update one player's marginal after the joint action `a` is observed.
///
/// `gamma` is the player's partial strategy `[x][a_i]`, `own_action` its
/// component of `a`, and `kernel[x]` the next-type row `Q^i(. | x, a)`.
/// When `sum_x pi(x) gamma(own_action | x)` exceeds [`BAYES_THRESHOLD`] the
/// Bayes posterior is propagated through the kernel; otherwise only the
/// prior is propagated.
pub fn belief_update(pi: &[f64], gamma: &[Vec<f64>], own_action: usize, kernel: &[&[f64]]) -> Result<Vec<f64>> {
    if gamma.len() != pi.len() || kernel.len() != pi.len() {
        return Err(SpbeError::Dimension(format!(
            "belief has {} types, strategy {}, kernel {}",
            pi.len(),
            gamma.len(),
            kernel.len()
        )));
    }
    let next_len = kernel.first().map_or(0, |r| r.len());
    if kernel.iter().any(|r| r.len() != next_len) {
        return Err(SpbeError::Dimension("ragged kernel rows".into()));
    }
    if gamma.iter().any(|row| own_action >= row.len()) {
        return Err(SpbeError::Dimension(format!("action {own_action} outside strategy rows")));
    }
    let denom: f64 = pi.iter().zip(gamma).map(|(p, g)| p * g[own_action]).sum();
    let mut out = vec![0.0; next_len];
    if denom > BAYES_THRESHOLD {
        for (x, row) in kernel.iter().enumerate() {
            let w = pi[x] * gamma[x][own_action] / denom;
            if w != 0.0 {
                out.iter_mut().zip(row.iter()).for_each(|(o, q)| *o += w * q);
            }
        }
    } else {
        for (x, row) in kernel.iter().enumerate() {
            out.iter_mut().zip(row.iter()).for_each(|(o, q)| *o += pi[x] * q);
        }
    }
    Ok(out)
}

/// Apply [`belief_update`] to every player for the transition out of time
/// `t` (0-based, `t + 1 < horizon`).
pub fn belief_update_profile(
    pi: &BeliefVector,
    gamma: &PartialStrategyProfile,
    joint_action: usize,
    spec: &GameSpec,
    t: usize,
) -> Result<BeliefVector> {
    if t + 1 >= spec.horizon {
        return Err(SpbeError::TimeRange {
            t,
            lo: 0,
            hi: spec.horizon.saturating_sub(2),
        });
    }
    if pi.num_players() != spec.num_players || gamma.num_players() != spec.num_players {
        return Err(SpbeError::Dimension("player count mismatch in belief update".into()));
    }
    let ja = spec.joint_actions();
    if joint_action >= ja.len() {
        return Err(SpbeError::OutOfRange {
            component: 0,
            index: joint_action,
            size: ja.len(),
        });
    }
    let marginals = (0..spec.num_players)
        .map(|i| {
            let rows: Vec<&[f64]> = (0..spec.type_space_sizes[i])
                .map(|x| spec.kernel_row(t, i, x, joint_action))
                .collect();
            belief_update(pi.marginal(i), gamma.player(i), ja.component(joint_action, i), &rows)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(BeliefVector::new(marginals))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InterpolationScheme {
    /// Freudenthal (Kuhn) simplicial interpolation per marginal, multilinear
    /// across players.
    #[default]
    Multilinear,
    Nearest,
}

/// Regular grid `{v / m : v >= 0, sum v = m}` on every player's simplex and
/// their product.
#[derive(Debug, Clone)]
pub struct SimplexGrid {
    resolution: usize,
    sizes: Vec<usize>,
    /// Per player, integer compositions of `resolution` in ascending
    /// lexicographic order.
    points: Vec<Vec<Vec<usize>>>,
    lookup: Vec<HashMap<Vec<usize>, usize>>,
    product: JointIndex,
}

fn compositions(total: usize, parts: usize) -> Vec<Vec<usize>> {
    if parts == 1 {
        return vec![vec![total]];
    }
    let mut out = Vec::new();
    for first in 0..=total {
        for mut rest in compositions(total - first, parts - 1) {
            rest.insert(0, first);
            out.push(rest);
        }
    }
    out
}

impl SimplexGrid {
    pub fn new(sizes: &[usize], resolution: usize) -> Result<Self> {
        if resolution == 0 {
            return Err(SpbeError::InvalidConfig("grid resolution must be at least 1".into()));
        }
        if sizes.iter().any(|&s| s == 0) {
            return Err(SpbeError::Dimension("empty type space".into()));
        }
        let points: Vec<Vec<Vec<usize>>> = sizes.iter().map(|&s| compositions(resolution, s)).collect();
        let lookup = points
            .iter()
            .map(|pts| pts.iter().enumerate().map(|(k, p)| (p.clone(), k)).collect())
            .collect();
        let product = JointIndex::new(&points.iter().map(Vec::len).collect::<Vec<_>>());
        Ok(Self {
            resolution,
            sizes: sizes.to_vec(),
            points,
            lookup,
            product,
        })
    }

    pub fn resolution(&self) -> usize {
        self.resolution
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    /// Number of product grid points.
    pub fn len(&self) -> usize {
        self.product.len()
    }

    pub fn is_empty(&self) -> bool {
        self.product.is_empty()
    }

    pub fn player_len(&self, i: usize) -> usize {
        self.points[i].len()
    }

    /// Integer coordinates of player `i`'s `k`-th grid point.
    pub fn player_counts(&self, i: usize, k: usize) -> &[usize] {
        &self.points[i][k]
    }

    /// Index of the product point whose per-player integer coordinates are `counts`.
    pub fn index_of_counts(&self, counts: &[Vec<usize>]) -> Option<usize> {
        let per: Option<Vec<usize>> = counts.iter().zip(&self.lookup).map(|(c, l)| l.get(c).copied()).collect();
        self.product.flatten(&per?).ok()
    }

    pub fn point(&self, g: usize) -> BeliefVector {
        let m = self.resolution as f64;
        let marginals = (0..self.sizes.len())
            .map(|i| {
                self.points[i][self.product.component(g, i)]
                    .iter()
                    .map(|&v| v as f64 / m)
                    .collect()
            })
            .collect();
        BeliefVector::new(marginals)
    }

    pub fn points(&self) -> impl Iterator<Item = BeliefVector> + '_ {
        (0..self.len()).map(|g| self.point(g))
    }

    fn clean_marginal(&self, i: usize, b: &[f64]) -> Result<Vec<f64>> {
        if b.len() != self.sizes[i] {
            return Err(SpbeError::InvalidBelief(format!("marginal {i} has wrong length")));
        }
        let sum: f64 = b.iter().sum();
        if b.iter().any(|p| !(*p >= -DIST_TOL)) || (sum - 1.0).abs() > DIST_TOL {
            return Err(SpbeError::InvalidBelief(format!("marginal {i} is not a distribution: {b:?}")));
        }
        let clipped: Vec<f64> = b.iter().map(|p| p.max(0.0)).collect();
        let s: f64 = clipped.iter().sum();
        Ok(clipped.into_iter().map(|p| p / s).collect())
    }

    /// Freudenthal barycentric weights of marginal `b` over player `i`'s grid.
    fn simplicial_weights(&self, i: usize, b: &[f64]) -> Result<Vec<(usize, f64)>> {
        const SNAP: f64 = 1e-11;
        let n = b.len();
        if n == 1 {
            return Ok(vec![(0, 1.0)]);
        }
        let m = self.resolution as f64;
        // Cumulative coordinates y_k = m * sum_{j >= k} b_j, with y_0 = m.
        let mut y = vec![0.0; n];
        let mut acc = 0.0;
        for k in (1..n).rev() {
            acc += b[k];
            y[k] = (m * acc).min(m);
        }
        y[0] = m;
        let mut base = vec![0usize; n];
        let mut frac = vec![0.0; n];
        for k in 0..n {
            let mut f = y[k].floor();
            let mut d = y[k] - f;
            if d > 1.0 - SNAP {
                f += 1.0;
                d = 0.0;
            } else if d < SNAP {
                d = 0.0;
            }
            base[k] = f as usize;
            frac[k] = d;
        }
        let mut order: Vec<usize> = (1..n).collect();
        order.sort_by(|&p, &q| frac[q].total_cmp(&frac[p]).then(p.cmp(&q)));

        let to_counts = |y: &[usize]| -> Option<Vec<usize>> {
            (0..n)
                .map(|k| {
                    let next = if k + 1 < n { y[k + 1] } else { 0 };
                    y[k].checked_sub(next)
                })
                .collect()
        };
        let mut out = Vec::with_capacity(n);
        let mut vertex = base.clone();
        let lambda0 = 1.0 - frac[order[0]];
        let mut push = |v: &[usize], w: f64| -> Result<()> {
            if w > 0.0 {
                let counts = to_counts(v)
                    .filter(|c| c.iter().sum::<usize>() == self.resolution)
                    .ok_or_else(|| SpbeError::InvalidBelief(format!("marginal {i} outside grid: {b:?}")))?;
                out.push((self.lookup[i][&counts], w));
            }
            Ok(())
        };
        push(&vertex, lambda0)?;
        for (j, &p) in order.iter().enumerate() {
            vertex[p] += 1;
            let next = order.get(j + 1).map_or(0.0, |&q| frac[q]);
            push(&vertex, frac[p] - next)?;
        }
        Ok(out)
    }

    /// Closest grid point of player `i` in Euclidean distance.
    fn nearest_player(&self, i: usize, b: &[f64]) -> usize {
        let m = self.resolution as f64;
        let target: Vec<f64> = b.iter().map(|p| p * m).collect();
        let mut counts: Vec<i64> = target.iter().map(|v| v.round() as i64).collect();
        let deficit = self.resolution as i64 - counts.iter().sum::<i64>();
        let mut by_residual: Vec<usize> = (0..b.len()).collect();
        by_residual.sort_by(|&p, &q| {
            let rp = target[p] - counts[p] as f64;
            let rq = target[q] - counts[q] as f64;
            rq.total_cmp(&rp).then(p.cmp(&q))
        });
        if deficit > 0 {
            for &k in by_residual.iter().take(deficit as usize) {
                counts[k] += 1;
            }
        } else if deficit < 0 {
            for &k in by_residual.iter().rev().take((-deficit) as usize) {
                counts[k] -= 1;
            }
        }
        let key: Vec<usize> = counts.iter().map(|&c| c.max(0) as usize).collect();
        self.lookup[i][&key]
    }

    /// Product-grid indices and weights reconstructing `query` under `scheme`.
    pub fn weights(&self, query: &BeliefVector, scheme: InterpolationScheme) -> Result<Vec<(usize, f64)>> {
        if query.num_players() != self.sizes.len() {
            return Err(SpbeError::InvalidBelief("wrong number of marginals".into()));
        }
        let mut combos: Vec<(Vec<usize>, f64)> = vec![(Vec::new(), 1.0)];
        for i in 0..self.sizes.len() {
            let b = self.clean_marginal(i, query.marginal(i))?;
            let per = match scheme {
                InterpolationScheme::Multilinear => self.simplicial_weights(i, &b)?,
                InterpolationScheme::Nearest => vec![(self.nearest_player(i, &b), 1.0)],
            };
            combos = combos
                .into_iter()
                .flat_map(|(idx, w)| {
                    per.iter().map(move |&(k, wk)| {
                        let mut idx = idx.clone();
                        idx.push(k);
                        (idx, w * wk)
                    })
                })
                .collect();
        }
        Ok(combos
            .into_iter()
            .map(|(idx, w)| (self.product.flatten(&idx).expect("grid index in range"), w))
            .collect())
    }

    /// Index of the grid point closest to `query` (per-marginal nearest).
    pub fn nearest(&self, query: &BeliefVector) -> Result<usize> {
        Ok(self.weights(query, InterpolationScheme::Nearest)?[0].0)
    }

    /// Interpolate a function tabulated on the grid, `value(g)` at point `g`.
    pub fn interpolate_with(
        &self,
        query: &BeliefVector,
        scheme: InterpolationScheme,
        value: impl Fn(usize) -> f64,
    ) -> Result<f64> {
        Ok(self.weights(query, scheme)?.into_iter().map(|(g, w)| w * value(g)).sum())
    }
}

/// Enumerate the product grid for the given type-space sizes.
pub fn grid_points(sizes: &[usize], resolution: usize) -> Result<Vec<BeliefVector>> {
    Ok(SimplexGrid::new(sizes, resolution)?.points().collect())
}

/// Interpolate `table` (indexed by product grid point) at `query`.
pub fn interpolate_value(
    grid: &SimplexGrid,
    table: &[f64],
    query: &BeliefVector,
    scheme: InterpolationScheme,
) -> Result<f64> {
    if table.len() != grid.len() {
        return Err(SpbeError::Dimension(format!(
            "table has {} entries, grid has {}",
            table.len(),
            grid.len()
        )));
    }
    grid.interpolate_with(query, scheme, |g| table[g])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::games;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn close(a: &[f64], b: &[f64], tol: f64) -> bool {
        a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol)
    }

    const IDENTITY: [&[f64]; 2] = [&[1.0, 0.0], &[0.0, 1.0]];

    #[test]
    fn type_revealing_strategy_collapses_belief() {
        let gamma = vec![vec![1.0, 0.0], vec![0.0, 1.0]];
        let out = belief_update(&[0.5, 0.5], &gamma, 0, &IDENTITY).unwrap();
        assert_eq!(out, vec![1.0, 0.0]);
    }

    #[test]
    fn zero_denominator_uses_prediction() {
        let gamma = vec![vec![0.0, 1.0], vec![0.0, 1.0]];
        let out = belief_update(&[0.5, 0.5], &gamma, 0, &IDENTITY).unwrap();
        assert_eq!(out, vec![0.5, 0.5]);
    }

    /// Brute-force oracle: enumerate (x, a_i, x') jointly, then condition on a_i.
    fn joint_oracle(pi: &[f64], gamma: &[Vec<f64>], own: usize, kernel: &[&[f64]]) -> Vec<f64> {
        let mut joint = vec![vec![vec![0.0; kernel[0].len()]; gamma[0].len()]; pi.len()];
        for x in 0..pi.len() {
            for a in 0..gamma[0].len() {
                for (xn, q) in kernel[x].iter().enumerate() {
                    joint[x][a][xn] = pi[x] * gamma[x][a] * q;
                }
            }
        }
        let mass: f64 = (0..pi.len()).map(|x| joint[x][own].iter().sum::<f64>()).sum();
        (0..kernel[0].len())
            .map(|xn| (0..pi.len()).map(|x| joint[x][own][xn]).sum::<f64>() / mass)
            .collect()
    }

    #[test]
    fn uninformative_strategy_then_prediction() {
        let gamma = vec![vec![0.5, 0.5], vec![0.5, 0.5]];
        let kernel: [&[f64]; 2] = [&[0.9, 0.1], &[0.2, 0.8]];
        let out = belief_update(&[0.3, 0.7], &gamma, 0, &kernel).unwrap();
        let oracle = joint_oracle(&[0.3, 0.7], &gamma, 0, &kernel);
        assert!(close(&oracle, &[0.41, 0.59], 1e-15));
        assert!(close(&out, &oracle, 1e-15));
    }

    #[test]
    fn dimension_mismatch_is_error() {
        let gamma = vec![vec![0.5, 0.5]];
        assert!(belief_update(&[0.5, 0.5], &gamma, 0, &IDENTITY).is_err());
        let gamma = vec![vec![1.0], vec![1.0]];
        assert!(belief_update(&[0.5, 0.5], &gamma, 1, &IDENTITY).is_err());
    }

    fn two_player_spec() -> GameSpec {
        games::build(
            &[2, 2],
            &[2, 2],
            2,
            vec![vec![0.3, 0.7], vec![0.3, 0.7]],
            |_, _, x, _| if x == 0 { vec![0.9, 0.1] } else { vec![0.2, 0.8] },
            |_, _, _, _| 0.0,
        )
    }

    #[test]
    fn profile_update_is_componentwise() {
        let spec = two_player_spec();
        let gamma = PartialStrategyProfile::uniform(&spec);
        let out = belief_update_profile(&BeliefVector::initial(&spec), &gamma, 0, &spec, 0).unwrap();
        for m in &out.marginals {
            assert!(close(m, &[0.41, 0.59], 1e-15));
        }
    }

    #[test]
    fn profile_update_branches_are_independent() {
        let spec = two_player_spec();
        let mut gamma = PartialStrategyProfile::uniform(&spec);
        // Player 1 never plays action 0, so observing it triggers the fallback.
        gamma.rows[1] = vec![vec![0.0, 1.0], vec![0.0, 1.0]];
        gamma.rows[0] = vec![vec![1.0, 0.0], vec![0.0, 1.0]];
        let out = belief_update_profile(&BeliefVector::initial(&spec), &gamma, 0, &spec, 0).unwrap();
        assert!(close(&out.marginals[0], &[0.9, 0.1], 1e-15));
        assert!(close(&out.marginals[1], &[0.41, 0.59], 1e-15));
    }

    #[test]
    fn uninformative_static_update_is_identity() {
        let spec = games::build(
            &[2, 3],
            &[2, 2],
            2,
            vec![vec![0.25, 0.75], vec![0.2, 0.3, 0.5]],
            |_, i, x, _| {
                let mut r = vec![0.0; if i == 0 { 2 } else { 3 }];
                r[x] = 1.0;
                r
            },
            |_, _, _, _| 0.0,
        );
        let pi = BeliefVector::initial(&spec);
        let out = belief_update_profile(&pi, &PartialStrategyProfile::uniform(&spec), 3, &spec, 0).unwrap();
        assert!(out.distance(&pi) < 1e-15);
    }

    #[test]
    fn profile_update_rejects_last_period() {
        let spec = two_player_spec();
        let gamma = PartialStrategyProfile::uniform(&spec);
        assert!(belief_update_profile(&BeliefVector::initial(&spec), &gamma, 0, &spec, 1).is_err());
    }

    #[test]
    fn grid_point_examples() {
        let pts = grid_points(&[2], 2).unwrap();
        let raw: Vec<Vec<f64>> = pts.into_iter().map(|b| b.marginals[0].clone()).collect();
        assert_eq!(raw, vec![vec![0.0, 1.0], vec![0.5, 0.5], vec![1.0, 0.0]]);
        assert_eq!(grid_points(&[2, 2], 1).unwrap().len(), 4);
        assert_eq!(grid_points(&[3], 2).unwrap().len(), 6);
    }

    fn binom(n: usize, k: usize) -> usize {
        (0..k).fold(1, |acc, j| acc * (n - j) / (j + 1))
    }

    #[test]
    fn grid_counts_and_order() {
        for s in 1..=4 {
            for m in 1..=6 {
                let g = SimplexGrid::new(&[s], m).unwrap();
                assert_eq!(g.len(), binom(m + s - 1, s - 1));
                for k in 1..g.len() {
                    assert!(g.player_counts(0, k - 1) < g.player_counts(0, k));
                }
                for b in g.points() {
                    b.check(&[s]).unwrap();
                }
            }
        }
        assert!(SimplexGrid::new(&[2], 0).is_err());
    }

    #[test]
    fn interpolation_example() {
        let g = SimplexGrid::new(&[2], 1).unwrap();
        // Grid order is (0,1), (1,0).
        let table = [0.0, 1.0];
        let q = BeliefVector::new(vec![vec![0.25, 0.75]]);
        let lin = interpolate_value(&g, &table, &q, InterpolationScheme::Multilinear).unwrap();
        assert!((lin - 0.25).abs() < 1e-15);
        let nn = interpolate_value(&g, &table, &q, InterpolationScheme::Nearest).unwrap();
        assert_eq!(nn, 0.0);
    }

    #[test]
    fn interpolation_exact_on_nodes_and_constants() {
        let g = SimplexGrid::new(&[3, 2], 10).unwrap();
        let table: Vec<f64> = (0..g.len()).map(|k| (k as f64).sin()).collect();
        for (k, b) in g.points().enumerate() {
            for scheme in [InterpolationScheme::Multilinear, InterpolationScheme::Nearest] {
                assert_eq!(interpolate_value(&g, &table, &b, scheme).unwrap(), table[k]);
            }
        }
        let constant = vec![2.5; g.len()];
        let q = BeliefVector::new(vec![vec![0.123, 0.456, 0.421], vec![0.77, 0.23]]);
        let v = interpolate_value(&g, &constant, &q, InterpolationScheme::Multilinear).unwrap();
        assert!((v - 2.5).abs() < 1e-12);
    }

    #[test]
    fn invalid_query_rejected() {
        let g = SimplexGrid::new(&[2], 4).unwrap();
        let bad = BeliefVector::new(vec![vec![0.7, 0.7]]);
        assert!(interpolate_value(&g, &[0.0; 5], &bad, InterpolationScheme::Multilinear).is_err());
    }

    proptest! {
        #[test]
        fn update_is_distribution(seed in any::<u64>(), zero in any::<bool>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let nx = rng.random_range(1..=4);
            let na = rng.random_range(1..=3);
            let pi = games::random_distribution(&mut rng, nx);
            let mut gamma: Vec<Vec<f64>> = (0..nx).map(|_| games::random_distribution(&mut rng, na)).collect();
            let own = rng.random_range(0..na);
            if zero && na > 1 {
                for row in &mut gamma {
                    let moved = row[own];
                    row[own] = 0.0;
                    row[(own + 1) % na] += moved;
                }
            }
            let kernel_rows: Vec<Vec<f64>> = (0..nx).map(|_| games::random_distribution(&mut rng, nx)).collect();
            let kernel: Vec<&[f64]> = kernel_rows.iter().map(Vec::as_slice).collect();
            let out = belief_update(&pi, &gamma, own, &kernel).unwrap();
            prop_assert!((out.iter().sum::<f64>() - 1.0).abs() <= 1e-10);
            prop_assert!(out.iter().all(|p| *p >= 0.0));
            if zero && na > 1 {
                // Fallback ignores gamma entirely.
                let other: Vec<Vec<f64>> = (0..nx).map(|_| {
                    let mut r = games::random_distribution(&mut rng, na);
                    let moved = r[own];
                    r[own] = 0.0;
                    r[(own + 1) % na] += moved;
                    r
                }).collect();
                let again = belief_update(&pi, &other, own, &kernel).unwrap();
                prop_assert!(close(&out, &again, 0.0));
            }
        }

        #[test]
        fn multilinear_reproduces_affine_functions(seed in any::<u64>(), s in 2usize..=4, m in 1usize..=8) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let g = SimplexGrid::new(&[s], m).unwrap();
            let coef: Vec<f64> = (0..s).map(|_| rng.random_range(-2.0..2.0)).collect();
            let f = |b: &BeliefVector| b.marginals[0].iter().zip(&coef).map(|(p, c)| p * c).sum::<f64>();
            let table: Vec<f64> = g.points().map(|b| f(&b)).collect();
            let q = BeliefVector::new(vec![games::random_distribution(&mut rng, s)]);
            let v = interpolate_value(&g, &table, &q, InterpolationScheme::Multilinear).unwrap();
            prop_assert!((v - f(&q)).abs() < 1e-12);
            // Weights form a convex combination reproducing the query.
            let w = g.weights(&q, InterpolationScheme::Multilinear).unwrap();
            prop_assert!(w.iter().all(|(_, x)| *x >= 0.0));
            prop_assert!((w.iter().map(|(_, x)| x).sum::<f64>() - 1.0).abs() < 1e-12);
        }

        #[test]
        fn nearest_is_closest_node(seed in any::<u64>(), s in 2usize..=4, m in 1usize..=6) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let g = SimplexGrid::new(&[s], m).unwrap();
            let q = BeliefVector::new(vec![games::random_distribution(&mut rng, s)]);
            let k = g.nearest(&q).unwrap();
            let dist = |b: &BeliefVector| b.marginals[0].iter().zip(&q.marginals[0]).map(|(a, c)| (a - c).powi(2)).sum::<f64>();
            let best = g.points().map(|b| dist(&b)).fold(f64::INFINITY, f64::min);
            prop_assert!(dist(&g.point(k)) <= best + 1e-12);
        }
    }
}
