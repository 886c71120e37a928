//! Brute-force auditing of a computed profile: sequential rationality by
//! deviation search, reward-to-go, joint-history Bayes beliefs, and the
//! structured-policy property.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Result, SpbeError};
use crate::forward::EquilibriumProfile;
use crate::game::GameSpec;

/// A (possibly history-dependent) strategy for one player.
pub trait PlayerStrategy {
    /// Action distribution at period `t` after public history `history`
    /// with own type sequence `own_types` (ending with the current type).
    fn action_dist(&self, t: usize, history: &[usize], own_types: &[usize]) -> Vec<f64>;
}

/// The profile's own prescriptions for player `i`.
pub struct ProfileStrategy<'a> {
    pub profile: &'a EquilibriumProfile,
    pub player: usize,
}

impl PlayerStrategy for ProfileStrategy<'_> {
    fn action_dist(&self, _t: usize, history: &[usize], own_types: &[usize]) -> Vec<f64> {
        let node = self.profile.node(history).expect("history inside profile");
        node.prescription.gamma.rows[self.player][*own_types.last().expect("current type")].clone()
    }
}

fn missing(history: &[usize]) -> SpbeError {
    SpbeError::Schema(format!("profile has no node for history {history:?}"))
}

/// Expected remaining reward of player `i` from period `t` at public history
/// `history` and own types `own_types`, when `i` follows `strategy`, the
/// others follow the profile, and the others' current types are drawn from
/// the profile's belief at `history`. Periods at or past the horizon give 0.
pub fn reward_to_go(
    spec: &GameSpec,
    profile: &EquilibriumProfile,
    i: usize,
    t: usize,
    history: &[usize],
    own_types: &[usize],
    strategy: &dyn PlayerStrategy,
) -> Result<f64> {
    if t >= spec.horizon {
        return Ok(0.0);
    }
    let node = profile.node(history).ok_or_else(|| missing(history))?;
    let jx = spec.joint_types();
    let ja = spec.joint_actions();
    let x_i = *own_types.last().ok_or_else(|| SpbeError::Dimension("empty own type history".into()))?;
    let dist = strategy.action_dist(t, history, own_types);
    let gamma = &node.prescription.gamma;
    let mut total = 0.0;
    // Continuations depend on (a, x'), not on the others' types.
    let mut cont: HashMap<(usize, usize), f64> = HashMap::new();
    for x in (0..jx.len()).filter(|&x| jx.component(x, i) == x_i) {
        let px = node.belief.others_prob(&jx, x, i);
        if px == 0.0 {
            continue;
        }
        for a in 0..ja.len() {
            let mut w = px * dist[ja.component(a, i)];
            for j in (0..spec.num_players).filter(|&j| j != i) {
                w *= gamma.rows[j][jx.component(x, j)][ja.component(a, j)];
            }
            if w == 0.0 {
                continue;
            }
            let mut v = spec.reward(t, i, x, a);
            if t + 1 < spec.horizon {
                for (xn, q) in spec.kernel_row(t, i, x_i, a).iter().enumerate() {
                    if *q == 0.0 {
                        continue;
                    }
                    let c = match cont.get(&(a, xn)) {
                        Some(c) => *c,
                        None => {
                            let mut h = history.to_vec();
                            h.push(a);
                            let mut own = own_types.to_vec();
                            own.push(xn);
                            let c = reward_to_go(spec, profile, i, t + 1, &h, &own, strategy)?;
                            cont.insert((a, xn), c);
                            c
                        }
                    };
                    v += q * c;
                }
            }
            total += w * v;
        }
    }
    Ok(total)
}

/// Equilibrium reward-to-go `U[history][i][x_i]` for every node, bottom up.
fn equilibrium_values(spec: &GameSpec, profile: &EquilibriumProfile) -> Result<HashMap<Vec<usize>, Vec<Vec<f64>>>> {
    let mut out: HashMap<Vec<usize>, Vec<Vec<f64>>> = HashMap::new();
    for t in (0..spec.horizon).rev() {
        for node in profile.nodes_at(t) {
            let q = action_values(spec, profile, node.t, &node.history, &out)?;
            let gamma = &node.prescription.gamma;
            let values = q
                .iter()
                .enumerate()
                .map(|(i, per_x)| {
                    per_x
                        .iter()
                        .enumerate()
                        .map(|(x, per_a)| per_a.iter().zip(&gamma.rows[i][x]).map(|(v, p)| v * p).sum())
                        .collect()
                })
                .collect();
            out.insert(node.history.clone(), values);
        }
    }
    Ok(out)
}

/// `Q[i][x_i][b]`: value of playing `b` now and following the profile after.
fn action_values(
    spec: &GameSpec,
    profile: &EquilibriumProfile,
    t: usize,
    history: &[usize],
    later: &HashMap<Vec<usize>, Vec<Vec<f64>>>,
) -> Result<Vec<Vec<Vec<f64>>>> {
    let node = profile.node(history).ok_or_else(|| missing(history))?;
    let n = spec.num_players;
    let jx = spec.joint_types();
    let ja = spec.joint_actions();
    let gamma = &node.prescription.gamma;
    let mut q: Vec<Vec<Vec<f64>>> = (0..n)
        .map(|i| vec![vec![0.0; spec.action_space_sizes[i]]; spec.type_space_sizes[i]])
        .collect();
    let mut child = history.to_vec();
    child.push(0);
    for a in 0..ja.len() {
        *child.last_mut().unwrap() = a;
        let next = if t + 1 < spec.horizon {
            Some(later.get(&child).ok_or_else(|| missing(&child))?)
        } else {
            None
        };
        for x in 0..jx.len() {
            for i in 0..n {
                let mut w = node.belief.others_prob(&jx, x, i);
                for j in (0..n).filter(|&j| j != i) {
                    w *= gamma.rows[j][jx.component(x, j)][ja.component(a, j)];
                }
                if w == 0.0 {
                    continue;
                }
                let xi = jx.component(x, i);
                let mut v = spec.reward(t, i, x, a);
                if let Some(next) = next {
                    v += spec
                        .kernel_row(t, i, xi, a)
                        .iter()
                        .zip(&next[i])
                        .map(|(p, u)| p * u)
                        .sum::<f64>();
                }
                q[i][xi][ja.component(a, i)] += w * v;
            }
        }
    }
    Ok(q)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeviationEntry {
    pub player: usize,
    pub t: usize,
    pub max_gain: f64,
    /// Where the largest gain was found and by what deviation.
    pub witness: Option<String>,
    pub histories_checked: usize,
    pub deviations_checked: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeviationReport {
    pub entries: Vec<DeviationEntry>,
    pub global_max_gain: f64,
    pub tolerance: f64,
    pub full_deviations: bool,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditConfig {
    pub tolerance: f64,
    /// Also enumerate every pure history-dependent continuation strategy.
    pub full_deviations: bool,
    pub strategy_cap: u128,
}

impl AuditConfig {
    pub fn new(tolerance: f64) -> Self {
        Self {
            tolerance,
            full_deviations: false,
            strategy_cap: 100_000,
        }
    }
}

/// A pure strategy given as a table over information sets
/// `(history, own types since the deviation started)`.
struct TableStrategy<'a> {
    start: usize,
    na: usize,
    choice: &'a HashMap<(Vec<usize>, Vec<usize>), usize>,
}

impl PlayerStrategy for TableStrategy<'_> {
    fn action_dist(&self, _t: usize, history: &[usize], own_types: &[usize]) -> Vec<f64> {
        let key = (history.to_vec(), own_types[self.start..].to_vec());
        let mut d = vec![0.0; self.na];
        d[self.choice[&key]] = 1.0;
        d
    }
}

fn information_sets(
    spec: &GameSpec,
    i: usize,
    t: usize,
    history: &[usize],
    x_i: usize,
) -> Vec<(Vec<usize>, Vec<usize>)> {
    let ja = spec.joint_actions().len();
    let nx = spec.type_space_sizes[i];
    let mut layer = vec![(history.to_vec(), vec![x_i])];
    let mut all = layer.clone();
    for _ in t + 1..spec.horizon {
        let mut next = Vec::new();
        for (h, own) in &layer {
            for a in 0..ja {
                for xn in 0..nx {
                    let mut h2 = h.clone();
                    h2.push(a);
                    let mut o2 = own.clone();
                    o2.push(xn);
                    next.push((h2, o2));
                }
            }
        }
        all.extend(next.iter().cloned());
        layer = next;
    }
    all
}

/// Search for profitable unilateral deviations at every node of the profile,
/// on and off the equilibrium path.
///
/// One-shot deviations (a pure action now, the profile afterwards) are
/// always checked. With `full_deviations`, every pure continuation strategy
/// that may condition on the public history and on own types observed from
/// the deviation point onward is enumerated as well; since the others'
/// strategies and beliefs do not depend on earlier own types, this covers
/// all private type histories.
pub fn audit_spbe(spec: &GameSpec, profile: &EquilibriumProfile, config: &AuditConfig) -> Result<DeviationReport> {
    if profile.depth < spec.horizon || !profile.complete {
        return Err(SpbeError::CapExceeded {
            what: "history tree for audit".into(),
            needed: spec.horizon as u128,
            cap: profile.depth as u128,
        });
    }
    let n = spec.num_players;
    let eq = equilibrium_values(spec, profile)?;
    let mut entries: Vec<DeviationEntry> = (0..n)
        .flat_map(|i| {
            (0..spec.horizon).map(move |t| DeviationEntry {
                player: i,
                t,
                max_gain: f64::NEG_INFINITY,
                witness: None,
                histories_checked: 0,
                deviations_checked: 0,
            })
        })
        .collect();
    let slot = |i: usize, t: usize| i * spec.horizon + t;

    for node in &profile.nodes {
        let q = action_values(spec, profile, node.t, &node.history, &eq)?;
        let u = &eq[&node.history];
        for i in 0..n {
            let e = &mut entries[slot(i, node.t)];
            e.histories_checked += 1;
            for x in 0..spec.type_space_sizes[i] {
                for (b, v) in q[i][x].iter().enumerate() {
                    let gain = v - u[i][x];
                    e.deviations_checked += 1;
                    if gain > e.max_gain {
                        e.max_gain = gain;
                        e.witness = Some(format!("history {:?}, type {x}: one-shot action {b}", node.history));
                    }
                }
            }
        }
    }

    if config.full_deviations {
        for node in &profile.nodes {
            for i in 0..n {
                let na = spec.action_space_sizes[i];
                for x in 0..spec.type_space_sizes[i] {
                    let sets = information_sets(spec, i, node.t, &node.history, x);
                    let count = (na as u128).checked_pow(sets.len() as u32).unwrap_or(u128::MAX);
                    if count > config.strategy_cap {
                        return Err(SpbeError::CapExceeded {
                            what: "pure continuation strategies".into(),
                            needed: count,
                            cap: config.strategy_cap,
                        });
                    }
                    let mut digits = vec![0usize; sets.len()];
                    let own = vec![x];
                    let base = eq[&node.history][i][x];
                    let e = &mut entries[slot(i, node.t)];
                    loop {
                        let choice: HashMap<_, _> = sets.iter().cloned().zip(digits.iter().copied()).collect();
                        let strat = TableStrategy {
                            start: 0,
                            na,
                            choice: &choice,
                        };
                        let v = reward_to_go(spec, profile, i, node.t, &node.history, &own, &strat)?;
                        e.deviations_checked += 1;
                        if v - base > e.max_gain {
                            e.max_gain = v - base;
                            e.witness = Some(format!("history {:?}, type {x}: continuation {digits:?}", node.history));
                        }
                        let mut k = digits.len();
                        loop {
                            if k == 0 {
                                break;
                            }
                            k -= 1;
                            digits[k] += 1;
                            if digits[k] < na {
                                break;
                            }
                            digits[k] = 0;
                        }
                        if digits.iter().all(|d| *d == 0) {
                            break;
                        }
                    }
                }
            }
        }
    }

    let global = entries.iter().map(|e| e.max_gain).fold(f64::NEG_INFINITY, f64::max);
    Ok(DeviationReport {
        pass: global <= config.tolerance,
        entries,
        global_max_gain: global,
        tolerance: config.tolerance,
        full_deviations: config.full_deviations,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StructuredCheck {
    pub holds: bool,
    /// Two histories with equal beliefs but different prescriptions.
    pub witness: Option<(Vec<usize>, Vec<usize>)>,
}

/// Check that nodes of the same period with equal beliefs (within `tol`)
/// carry equal prescriptions (within `tol`).
pub fn check_structured(profile: &EquilibriumProfile, tol: f64) -> StructuredCheck {
    for t in 0..profile.depth {
        let nodes: Vec<_> = profile.nodes_at(t).collect();
        for (k, a) in nodes.iter().enumerate() {
            for b in &nodes[k + 1..] {
                if a.belief.distance(&b.belief) <= tol
                    && a.prescription.gamma.distance(&b.prescription.gamma) > tol
                {
                    return StructuredCheck {
                        holds: false,
                        witness: Some((a.history.clone(), b.history.clone())),
                    };
                }
            }
        }
    }
    StructuredCheck {
        holds: true,
        witness: None,
    }
}

/// Unnormalized joint distribution of `x_k` together with the observed
/// actions `history[..k]`, summing over every joint type path `x_0..x_k`.
fn path_mass(spec: &GameSpec, profile: &EquilibriumProfile, history: &[usize], k: usize, cap: u128) -> Result<Vec<f64>> {
    let jx = spec.joint_types();
    let ja = spec.joint_actions();
    let n = spec.num_players;
    let paths = (jx.len() as u128).checked_pow(k as u32 + 1).unwrap_or(u128::MAX);
    if paths > cap {
        return Err(SpbeError::CapExceeded {
            what: "joint type histories".into(),
            needed: paths,
            cap,
        });
    }
    let gammas = (0..k)
        .map(|s| {
            profile
                .node(&history[..s])
                .map(|nd| &nd.prescription.gamma)
                .ok_or_else(|| missing(&history[..s]))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut out = vec![0.0; jx.len()];
    let mut path = vec![0usize; k + 1];
    loop {
        let mut w: f64 = (0..n).map(|i| spec.initial_dists[i][jx.component(path[0], i)]).product();
        for s in 0..k {
            if w == 0.0 {
                break;
            }
            let (x, a, xn) = (path[s], history[s], path[s + 1]);
            for i in 0..n {
                let xi = jx.component(x, i);
                w *= gammas[s].rows[i][xi][ja.component(a, i)] * spec.kernel_row(s, i, xi, a)[jx.component(xn, i)];
            }
        }
        out[path[k]] += w;
        let mut d = path.len();
        loop {
            if d == 0 {
                return Ok(out);
            }
            d -= 1;
            path[d] += 1;
            if path[d] < jx.len() {
                break;
            }
            path[d] = 0;
        }
    }
}

/// Joint conditional `P(x_t | a_0..a_{t-1})` by summing over all joint type
/// histories. If the history has probability zero, the distribution at the
/// longest positive-probability prefix is propagated through the kernels
/// without conditioning on the remaining actions.
pub fn joint_bayes_oracle(spec: &GameSpec, profile: &EquilibriumProfile, history: &[usize], cap: u128) -> Result<Vec<f64>> {
    let t = history.len();
    let jx = spec.joint_types();
    for k in (0..=t).rev() {
        let mass = path_mass(spec, profile, history, k, cap)?;
        let total: f64 = mass.iter().sum();
        if total <= 0.0 {
            continue;
        }
        let mut dist: Vec<f64> = mass.into_iter().map(|m| m / total).collect();
        for (s, &a) in history.iter().enumerate().skip(k) {
            let mut next = vec![0.0; jx.len()];
            for (x, p) in dist.iter().enumerate() {
                if *p == 0.0 {
                    continue;
                }
                for (xn, slot) in next.iter_mut().enumerate() {
                    let q: f64 = (0..spec.num_players)
                        .map(|i| spec.kernel_row(s, i, jx.component(x, i), a)[jx.component(xn, i)])
                        .product();
                    *slot += p * q;
                }
            }
            dist = next;
        }
        return Ok(dist);
    }
    unreachable!("the empty history has positive probability")
}

/// Is `history` reached with positive probability under the profile?
pub fn history_probability(spec: &GameSpec, profile: &EquilibriumProfile, history: &[usize], cap: u128) -> Result<f64> {
    Ok(path_mass(spec, profile, history, history.len(), cap)?.iter().sum())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FactorizationReport {
    pub histories_checked: usize,
    pub max_abs_error: f64,
    /// First history where the product of marginals disagrees, if any.
    pub worst_history: Option<Vec<usize>>,
}

/// Compare the stored marginal beliefs with the brute-force joint posterior
/// at every positive-probability node.
pub fn factorization_check(spec: &GameSpec, profile: &EquilibriumProfile, cap: u128) -> Result<FactorizationReport> {
    let jx = spec.joint_types();
    let mut report = FactorizationReport {
        histories_checked: 0,
        max_abs_error: 0.0,
        worst_history: None,
    };
    for node in &profile.nodes {
        let mass = path_mass(spec, profile, &node.history, node.t, cap)?;
        let total: f64 = mass.iter().sum();
        if total <= 0.0 {
            continue;
        }
        report.histories_checked += 1;
        for (x, m) in mass.iter().enumerate() {
            let err = (m / total - node.belief.joint_prob(&jx, x)).abs();
            if err > report.max_abs_error {
                report.max_abs_error = err;
                report.worst_history = Some(node.history.clone());
            }
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::backward::backward_pass;
    use crate::belief::{BeliefVector, SimplexGrid};
    use crate::config::RunConfig;
    use crate::forward::{forward_pass, ThetaSource};
    use crate::games;
    use crate::strategy::PartialStrategyProfile;

    fn solve(spec: &GameSpec, m: usize) -> EquilibriumProfile {
        let grid = SimplexGrid::new(&spec.type_space_sizes, m).unwrap();
        let cfg = RunConfig::default();
        let tables = backward_pass(spec, &grid, &cfg).unwrap();
        let src = ThetaSource { spec, grid: &grid, tables: &tables, config: &cfg };
        forward_pass(spec, &src, spec.horizon, 10_000).unwrap()
    }

    #[test]
    fn reward_to_go_past_horizon_is_zero() {
        let spec = games::matching_pennies(1);
        let p = solve(&spec, 1);
        let s = ProfileStrategy { profile: &p, player: 0 };
        assert_eq!(reward_to_go(&spec, &p, 0, 1, &[0], &[0], &s).unwrap(), 0.0);
    }

    #[test]
    fn deterministic_chain_reward_to_go() {
        let spec = games::build(&[2], &[2], 3, vec![vec![1.0, 0.0]], |_, _, x, a| {
            let mut r = vec![0.0; 2];
            r[(x + a[0]) % 2] = 1.0;
            r
        }, |t, _, x, a| (t as f64 + 1.0) * (x[0] + 2 * a[0]) as f64);
        let src = |_: usize, _: &BeliefVector| Ok(PartialStrategyProfile::pure(&spec, &[vec![1, 0]]));
        let p = forward_pass(&spec, &src, 3, 100).unwrap();
        let s = ProfileStrategy { profile: &p, player: 0 };
        // x=0 plays 1 (r=2), moves to 1, plays 0 (r=2*1), stays at 1, plays 0 (r=3*1).
        assert_eq!(reward_to_go(&spec, &p, 0, 0, &[], &[0], &s).unwrap(), 2.0 + 2.0 + 3.0);
    }

    #[test]
    fn equilibrium_reward_to_go_matches_root_values() {
        let spec = games::single_agent_mdp();
        let grid = SimplexGrid::new(&[3], 10).unwrap();
        let cfg = RunConfig::default();
        let tables = backward_pass(&spec, &grid, &cfg).unwrap();
        let src = ThetaSource { spec: &spec, grid: &grid, tables: &tables, config: &cfg };
        let p = forward_pass(&spec, &src, 3, 1000).unwrap();
        let root = grid.nearest(&p.root().belief).unwrap();
        assert!(grid.point(root).distance(&p.root().belief) < 1e-15);
        let s = ProfileStrategy { profile: &p, player: 0 };
        for x in 0..3 {
            let w = reward_to_go(&spec, &p, 0, 0, &[], &[x], &s).unwrap();
            assert!((w - tables.values.layers[0][root][0][x]).abs() <= 1e-6);
        }
    }

    #[test]
    fn single_agent_solution_passes_audit() {
        let spec = games::single_agent_mdp();
        let p = solve(&spec, 5);
        let report = audit_spbe(&spec, &p, &AuditConfig::new(1e-6)).unwrap();
        assert!(report.pass, "{report:?}");
        assert!(report.global_max_gain <= 1e-6);
    }

    #[test]
    fn matching_pennies_has_zero_gains() {
        let spec = games::matching_pennies(2);
        let p = solve(&spec, 1);
        let mut cfg = AuditConfig::new(1e-9);
        cfg.full_deviations = true;
        let report = audit_spbe(&spec, &p, &cfg).unwrap();
        assert_eq!(report.global_max_gain, 0.0);
        assert!(report.pass);
    }

    #[test]
    fn corrupted_prescription_is_caught() {
        let spec = games::single_agent_mdp();
        let mut p = solve(&spec, 5);
        let node = p.node_mut(&[1]).unwrap();
        let row = &mut node.prescription.gamma.rows[0][2];
        row.reverse();
        let report = audit_spbe(&spec, &p, &AuditConfig::new(1e-6)).unwrap();
        assert!(!report.pass);
        let worst = report.entries.iter().max_by(|a, b| a.max_gain.total_cmp(&b.max_gain)).unwrap();
        assert_eq!(worst.t, 1);
        assert!(worst.witness.as_deref().unwrap().starts_with("history [1], type 2"));
    }

    #[test]
    fn full_deviation_cap() {
        let spec = games::single_agent_mdp();
        let p = solve(&spec, 2);
        let mut cfg = AuditConfig::new(1e-6);
        cfg.full_deviations = true;
        cfg.strategy_cap = 10;
        assert!(matches!(audit_spbe(&spec, &p, &cfg), Err(SpbeError::CapExceeded { .. })));
    }

    #[test]
    fn structured_check_cases() {
        let spec = games::matching_pennies(2);
        let p = solve(&spec, 1);
        assert!(check_structured(&p, 1e-12).holds);

        // All children share the root belief; make one of them disagree.
        let mut bad = p.clone();
        bad.node_mut(&[2]).unwrap().prescription.gamma.rows[0][0] = vec![1.0, 0.0];
        let res = check_structured(&bad, 1e-12);
        assert!(!res.holds);
        assert_eq!(res.witness, Some((vec![0], vec![2])));

        let single = games::matching_pennies(1);
        assert!(check_structured(&solve(&single, 1), 1e-12).holds);
    }

    #[test]
    fn oracle_examples() {
        let spec = games::build(&[2, 2], &[2, 2], 2, vec![vec![0.3, 0.7], vec![0.5, 0.5]], |_, _, x, _| {
            let mut r = vec![0.0; 2];
            r[x] = 1.0;
            r
        }, |_, _, _, _| 0.0);
        let src = |_: usize, _: &BeliefVector| Ok(PartialStrategyProfile::pure(&spec, &[vec![0, 1], vec![0, 1]]));
        let p = forward_pass(&spec, &src, 2, 100).unwrap();
        let root = joint_bayes_oracle(&spec, &p, &[], 1000).unwrap();
        for (got, want) in root.iter().zip([0.15, 0.15, 0.35, 0.35]) {
            assert!((got - want).abs() < 1e-15);
        }
        let ja = spec.joint_actions();
        for a in 0..4 {
            let post = joint_bayes_oracle(&spec, &p, &[a], 1000).unwrap();
            let mut expect = vec![0.0; 4];
            expect[a] = 1.0;
            assert_eq!(post, expect, "action {:?}", ja.unflatten(a));
        }
        let f = factorization_check(&spec, &p, 1000).unwrap();
        assert_eq!(f.histories_checked, 5);
        assert!(f.max_abs_error < 1e-15);
    }

    #[test]
    fn oracle_zero_probability_history_uses_prediction() {
        let spec = games::build(&[2], &[2], 3, vec![vec![0.3, 0.7]], |_, _, x, _| {
            if x == 0 { vec![0.9, 0.1] } else { vec![0.2, 0.8] }
        }, |_, _, _, _| 0.0);
        let src = |t: usize, _: &BeliefVector| {
            // Type 0 plays 0 and type 1 plays 1 at t = 0; both play 0 later.
            let choice = if t == 0 { vec![0, 1] } else { vec![0, 0] };
            Ok(PartialStrategyProfile::pure(&spec, &[choice]))
        };
        let p = forward_pass(&spec, &src, 3, 100).unwrap();
        assert_eq!(history_probability(&spec, &p, &[0, 1], 1000).unwrap(), 0.0);
        let d = joint_bayes_oracle(&spec, &p, &[0, 1], 1000).unwrap();
        // Prefix [0] pins type 0, predicted to (0.9, 0.1); one more step of
        // prediction gives (0.83, 0.17).
        assert!((d[0] - 0.83).abs() < 1e-12 && (d[1] - 0.17).abs() < 1e-12, "{d:?}");
        let node = p.node(&[0, 1]).unwrap();
        assert!(node.belief.distance(&BeliefVector::new(vec![d])) < 1e-12);
    }
}
