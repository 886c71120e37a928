//! Independent reference computations for integration tests. Nothing here
//! calls the library's update, payoff or audit code.

#![allow(dead_code)]

use rand::Rng;
use spbe_core::{BeliefVector, EquilibriumProfile, GameSpec, PartialStrategyProfile, Result};

/// Row-major flat index, player 0 most significant.
pub fn flat(sizes: &[usize], parts: &[usize]) -> usize {
    parts.iter().zip(sizes).fold(0, |acc, (p, s)| acc * s + p)
}

pub fn unflat(sizes: &[usize], mut k: usize) -> Vec<usize> {
    let mut out = vec![0; sizes.len()];
    for (slot, s) in out.iter_mut().zip(sizes).rev() {
        *slot = k % s;
        k /= s;
    }
    out
}

pub fn product(sizes: &[usize]) -> usize {
    sizes.iter().product()
}

/// Marginal Bayes update with prediction-only fallback.
pub fn update_marginal(spec: &GameSpec, t: usize, i: usize, pi: &[f64], gamma: &[Vec<f64>], a_flat: usize) -> Vec<f64> {
    let ai = unflat(&spec.action_space_sizes, a_flat)[i];
    let den: f64 = pi.iter().zip(gamma).map(|(p, g)| p * g[ai]).sum();
    let n = pi.len();
    let mut out = vec![0.0; n];
    for x in 0..n {
        let w = if den > 1e-12 { pi[x] * gamma[x][ai] / den } else { pi[x] };
        for (xn, o) in out.iter_mut().enumerate() {
            *o += w * spec.kernels[t][i][x][a_flat][xn];
        }
    }
    out
}

/// `Q[i][x_i][b]` at a stage with belief `pi`, profile `gamma` and a
/// continuation `cont(next_belief) -> [i][x]`.
pub fn deviation_payoffs(
    spec: &GameSpec,
    t: usize,
    pi: &BeliefVector,
    gamma: &PartialStrategyProfile,
    cont: &dyn Fn(&BeliefVector) -> Vec<Vec<f64>>,
) -> Vec<Vec<Vec<f64>>> {
    let n = spec.num_players;
    let xs = &spec.type_space_sizes;
    let as_ = &spec.action_space_sizes;
    let mut q: Vec<Vec<Vec<f64>>> = (0..n).map(|i| vec![vec![0.0; as_[i]]; xs[i]]).collect();
    for a in 0..product(as_) {
        let av = unflat(as_, a);
        let next = if t + 1 < spec.horizon {
            let marg = (0..n)
                .map(|j| update_marginal(spec, t, j, &pi.marginals[j], &gamma.rows[j], a))
                .collect();
            Some(cont(&BeliefVector::new(marg)))
        } else {
            None
        };
        for x in 0..product(xs) {
            let xv = unflat(xs, x);
            for i in 0..n {
                let mut w = 1.0;
                for j in (0..n).filter(|&j| j != i) {
                    w *= pi.marginals[j][xv[j]] * gamma.rows[j][xv[j]][av[j]];
                }
                if w == 0.0 {
                    continue;
                }
                let mut v = spec.rewards[t][i][x][a];
                if let Some(next) = &next {
                    for (xn, u) in next[i].iter().enumerate() {
                        v += spec.kernels[t][i][xv[i]][a][xn] * u;
                    }
                }
                q[i][xv[i]][av[i]] += w * v;
            }
        }
    }
    q
}

/// max over (i, x) of best pure payoff minus the profile's payoff.
pub fn residual_by_enumeration(q: &[Vec<Vec<f64>>], gamma: &PartialStrategyProfile) -> f64 {
    let mut r = 0.0_f64;
    for (i, per_x) in q.iter().enumerate() {
        for (x, vals) in per_x.iter().enumerate() {
            let best = vals.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let got: f64 = vals.iter().zip(&gamma.rows[i][x]).map(|(v, p)| v * p).sum();
            r = r.max(best - got);
        }
    }
    r
}

/// Finite-horizon DP over the (fully observed) type of a single player.
pub fn single_agent_dp(spec: &GameSpec) -> Vec<Vec<f64>> {
    assert_eq!(spec.num_players, 1);
    let nx = spec.type_space_sizes[0];
    let na = spec.action_space_sizes[0];
    let mut v = vec![vec![0.0; nx]; spec.horizon + 1];
    for t in (0..spec.horizon).rev() {
        for x in 0..nx {
            v[t][x] = (0..na)
                .map(|a| {
                    let mut q = spec.rewards[t][0][x][a];
                    if t + 1 < spec.horizon {
                        q += (0..nx).map(|xn| spec.kernels[t][0][x][a][xn] * v[t + 1][xn]).sum::<f64>();
                    }
                    q
                })
                .fold(f64::NEG_INFINITY, f64::max);
        }
    }
    v
}

/// A prescription rule that depends only on `(t, belief)`: smooth in the
/// belief, with some rows made pure so zero-probability histories occur.
pub struct RandomStructured {
    coeffs: Vec<f64>,
    pure_rows: Vec<bool>,
}

impl RandomStructured {
    pub fn new<R: Rng>(rng: &mut R) -> Self {
        Self {
            coeffs: (0..64).map(|_| rng.random_range(0.5..5.0)).collect(),
            pure_rows: (0..16).map(|_| rng.random_bool(0.3)).collect(),
        }
    }

    pub fn profile(&self, spec: &GameSpec, t: usize, belief: &BeliefVector) -> PartialStrategyProfile {
        let flatb: Vec<f64> = belief.marginals.iter().flatten().copied().collect();
        let mut k = 0;
        let rows = (0..spec.num_players)
            .map(|i| {
                (0..spec.type_space_sizes[i])
                    .map(|x| {
                        let na = spec.action_space_sizes[i];
                        let row_id = (t * 7 + i * 3 + x) % self.pure_rows.len();
                        let w: Vec<f64> = (0..na)
                            .map(|a| {
                                k += 1;
                                let c = self.coeffs[(k + t) % self.coeffs.len()];
                                let s: f64 = flatb.iter().enumerate().map(|(j, b)| b * (j as f64 + 1.0)).sum();
                                1.1 + (c * s + a as f64).sin()
                            })
                            .collect();
                        if self.pure_rows[row_id] {
                            let best = (0..na).max_by(|p, q| w[*p].total_cmp(&w[*q])).unwrap();
                            let mut r = vec![0.0; na];
                            r[best] = 1.0;
                            r
                        } else {
                            let s: f64 = w.iter().sum();
                            w.into_iter().map(|v| v / s).collect()
                        }
                    })
                    .collect()
            })
            .collect();
        PartialStrategyProfile { rows }
    }
}

/// Brute-force `P(x_t | a_0..a_{t-1})` over joint type paths, returning
/// `None` when the history has probability zero.
pub fn joint_posterior(spec: &GameSpec, profile: &EquilibriumProfile, history: &[usize]) -> Option<Vec<f64>> {
    let xs = &spec.type_space_sizes;
    let jx = product(xs);
    let n = spec.num_players;
    let mut mass: Vec<f64> = (0..jx)
        .map(|x| {
            let xv = unflat(xs, x);
            (0..n).map(|i| spec.initial_dists[i][xv[i]]).product()
        })
        .collect();
    for (s, &a) in history.iter().enumerate() {
        let gamma = &profile.node(&history[..s]).unwrap().prescription.gamma;
        let av = unflat(&spec.action_space_sizes, a);
        let mut next = vec![0.0; jx];
        for (x, m) in mass.iter().enumerate() {
            let xv = unflat(xs, x);
            let pa: f64 = (0..n).map(|i| gamma.rows[i][xv[i]][av[i]]).product();
            for (xn, slot) in next.iter_mut().enumerate() {
                let xnv = unflat(xs, xn);
                let q: f64 = (0..n).map(|i| spec.kernels[s][i][xv[i]][a][xnv[i]]).product();
                *slot += m * pa * q;
            }
        }
        mass = next;
    }
    let total: f64 = mass.iter().sum();
    (total > 0.0).then(|| mass.into_iter().map(|m| m / total).collect())
}

/// Relabel types and actions of every player.
pub struct Relabeling {
    pub types: Vec<Vec<usize>>,
    pub actions: Vec<Vec<usize>>,
}

impl Relabeling {
    pub fn random<R: Rng>(rng: &mut R, spec: &GameSpec) -> Self {
        let perm = |rng: &mut R, n: usize| {
            let mut p: Vec<usize> = (0..n).collect();
            for k in (1..n).rev() {
                p.swap(k, rng.random_range(0..=k));
            }
            p
        };
        Self {
            types: spec.type_space_sizes.iter().map(|&n| perm(rng, n)).collect(),
            actions: spec.action_space_sizes.iter().map(|&n| perm(rng, n)).collect(),
        }
    }

    fn joint(&self, sizes: &[usize], maps: &[Vec<usize>], k: usize) -> usize {
        let v = unflat(sizes, k);
        let mapped: Vec<usize> = v.iter().enumerate().map(|(i, c)| maps[i][*c]).collect();
        flat(sizes, &mapped)
    }

    pub fn spec(&self, spec: &GameSpec) -> GameSpec {
        let xs = &spec.type_space_sizes;
        let as_ = &spec.action_space_sizes;
        let mut out = spec.clone();
        for i in 0..spec.num_players {
            for x in 0..xs[i] {
                out.initial_dists[i][self.types[i][x]] = spec.initial_dists[i][x];
            }
        }
        for t in 0..spec.kernels.len() {
            for i in 0..spec.num_players {
                for x in 0..xs[i] {
                    for a in 0..product(as_) {
                        for xn in 0..xs[i] {
                            out.kernels[t][i][self.types[i][x]][self.joint(as_, &self.actions, a)][self.types[i][xn]] =
                                spec.kernels[t][i][x][a][xn];
                        }
                    }
                }
            }
        }
        for t in 0..spec.horizon {
            for i in 0..spec.num_players {
                for x in 0..product(xs) {
                    for a in 0..product(as_) {
                        out.rewards[t][i][self.joint(xs, &self.types, x)][self.joint(as_, &self.actions, a)] =
                            spec.rewards[t][i][x][a];
                    }
                }
            }
        }
        out
    }

    pub fn profile(&self, spec: &GameSpec, profile: &EquilibriumProfile) -> EquilibriumProfile {
        let as_ = &spec.action_space_sizes;
        let nodes = profile
            .nodes
            .iter()
            .map(|node| {
                let mut node = node.clone();
                node.history = node.history.iter().map(|&a| self.joint(as_, &self.actions, a)).collect();
                for i in 0..spec.num_players {
                    let old_b = node.belief.marginals[i].clone();
                    let old_g = node.prescription.gamma.rows[i].clone();
                    for (x, row) in old_g.iter().enumerate() {
                        node.belief.marginals[i][self.types[i][x]] = old_b[x];
                        for (a, p) in row.iter().enumerate() {
                            node.prescription.gamma.rows[i][self.types[i][x]][self.actions[i][a]] = *p;
                        }
                    }
                }
                node
            })
            .collect();
        EquilibriumProfile::from_nodes(profile.depth, profile.complete, nodes)
    }
}

/// Forward pass under a [`RandomStructured`] rule.
pub fn structured_profile(spec: &GameSpec, rule: &RandomStructured) -> Result<EquilibriumProfile> {
    let src = |t: usize, b: &BeliefVector| Ok(rule.profile(spec, t, b));
    spbe_core::forward_pass(spec, &src, spec.horizon, 1_000_000)
}
