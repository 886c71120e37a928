//! Forward recursion: walk public action histories from the root, updating
//! the common belief with the Bayes/fallback rule and reading prescriptions
//! from the generating function at each belief. Also Monte-Carlo simulation
//! and exact expected total reward of the resulting profile.

use std::collections::HashMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::backward::{solve_at, BackwardOutput};
use crate::belief::{belief_update_profile, BeliefVector, SimplexGrid};
use crate::config::{RunConfig, ThetaMode};
use crate::error::{Result, SpbeError};
use crate::game::GameSpec;
use crate::stage::PartialStrategyProfile;

/// Recorded in simulation outputs so trajectories can be regenerated.
pub const RNG_ALGORITHM: &str = "chacha20:seed_from_u64(seed):stream(episode)";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prescription {
    pub gamma: PartialStrategyProfile,
    pub residual: f64,
    pub success: bool,
    /// Set when the profile was not solved at this exact belief.
    pub approximate: bool,
}

/// Maps `(t, belief)` to the partial strategies played there.
pub trait PrescriptionSource: Sync {
    fn prescribe(&self, t: usize, belief: &BeliefVector) -> Result<Prescription>;
}

impl<F> PrescriptionSource for F
where
    F: Fn(usize, &BeliefVector) -> Result<PartialStrategyProfile> + Sync,
{
    fn prescribe(&self, t: usize, belief: &BeliefVector) -> Result<Prescription> {
        Ok(Prescription {
            gamma: self(t, belief)?,
            residual: 0.0,
            success: true,
            approximate: false,
        })
    }
}

/// The generating function backed by a finished backward pass.
pub struct ThetaSource<'a> {
    pub spec: &'a GameSpec,
    pub grid: &'a SimplexGrid,
    pub tables: &'a BackwardOutput,
    pub config: &'a RunConfig,
}

impl PrescriptionSource for ThetaSource<'_> {
    fn prescribe(&self, t: usize, belief: &BeliefVector) -> Result<Prescription> {
        match self.config.theta_mode {
            ThetaMode::ReSolve => {
                let (entry, _) = solve_at(
                    self.spec,
                    self.grid,
                    &self.tables.values.layers[t + 1],
                    t,
                    belief.clone(),
                    self.config,
                )?;
                Ok(Prescription {
                    gamma: entry.gamma,
                    residual: entry.residual,
                    success: entry.success,
                    approximate: false,
                })
            }
            ThetaMode::Nearest => {
                let g = self.grid.nearest(belief)?;
                let entry = &self.tables.generator.layers[t][g];
                Ok(Prescription {
                    gamma: entry.gamma.clone(),
                    residual: entry.residual,
                    success: entry.success,
                    approximate: self.grid.point(g).distance(belief) > 0.0,
                })
            }
        }
    }
}

/// One public history `a_{0..t-1}` with its common belief and prescription.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfileNode {
    pub t: usize,
    /// Flat joint actions observed so far.
    pub history: Vec<usize>,
    pub belief: BeliefVector,
    pub prescription: Prescription,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct RawProfile {
    depth: usize,
    complete: bool,
    nodes: Vec<ProfileNode>,
}

/// Prescriptions and beliefs on the public history tree, breadth first.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(from = "RawProfile", into = "RawProfile")]
pub struct EquilibriumProfile {
    /// Number of periods materialized.
    pub depth: usize,
    /// False when the node cap stopped materialization early.
    pub complete: bool,
    pub nodes: Vec<ProfileNode>,
    index: HashMap<Vec<usize>, usize>,
}

impl From<RawProfile> for EquilibriumProfile {
    fn from(raw: RawProfile) -> Self {
        Self::from_nodes(raw.depth, raw.complete, raw.nodes)
    }
}

impl From<EquilibriumProfile> for RawProfile {
    fn from(p: EquilibriumProfile) -> Self {
        RawProfile {
            depth: p.depth,
            complete: p.complete,
            nodes: p.nodes,
        }
    }
}

impl EquilibriumProfile {
    pub fn from_nodes(depth: usize, complete: bool, nodes: Vec<ProfileNode>) -> Self {
        let index = nodes.iter().enumerate().map(|(k, n)| (n.history.clone(), k)).collect();
        Self {
            depth,
            complete,
            nodes,
            index,
        }
    }

    pub fn node(&self, history: &[usize]) -> Option<&ProfileNode> {
        self.index.get(history).map(|&k| &self.nodes[k])
    }

    pub fn node_mut(&mut self, history: &[usize]) -> Option<&mut ProfileNode> {
        self.index.get(history).map(|&k| &mut self.nodes[k])
    }

    pub fn root(&self) -> &ProfileNode {
        &self.nodes[0]
    }

    pub fn nodes_at(&self, t: usize) -> impl Iterator<Item = &ProfileNode> {
        self.nodes.iter().filter(move |n| n.t == t)
    }

    pub fn max_residual(&self) -> f64 {
        self.nodes.iter().map(|n| n.prescription.residual).fold(0.0, f64::max)
    }
}

fn tree_size(joint_actions: usize, depth: usize) -> Option<usize> {
    let mut total: usize = 0;
    let mut layer: usize = 1;
    for _ in 0..depth {
        total = total.checked_add(layer)?;
        layer = layer.checked_mul(joint_actions)?;
    }
    Some(total)
}

/// Build the history tree for `depth` periods. When the full tree exceeds
/// `node_cap`, only the deepest whole layers that fit are built and the
/// profile is marked incomplete.
pub fn forward_pass(
    spec: &GameSpec,
    source: &dyn PrescriptionSource,
    depth: usize,
    node_cap: usize,
) -> Result<EquilibriumProfile> {
    if depth > spec.horizon || depth == 0 {
        return Err(SpbeError::TimeRange {
            t: depth,
            lo: 1,
            hi: spec.horizon,
        });
    }
    let ja = spec.joint_actions().len();
    let mut built = depth;
    while built > 1 && tree_size(ja, built).is_none_or(|n| n > node_cap) {
        built -= 1;
    }
    let complete = built == depth;

    let root_belief = BeliefVector::initial(spec);
    let mut nodes = vec![ProfileNode {
        t: 0,
        history: Vec::new(),
        prescription: source.prescribe(0, &root_belief)?,
        belief: root_belief,
    }];
    let mut frontier = 0..1;
    for t in 1..built {
        let parents = &nodes[frontier.clone()];
        let children: Vec<ProfileNode> = parents
            .par_iter()
            .flat_map_iter(|p| (0..ja).map(move |a| (p, a)))
            .map(|(p, a)| {
                let belief = belief_update_profile(&p.belief, &p.prescription.gamma, a, spec, t - 1)?;
                let mut history = p.history.clone();
                history.push(a);
                Ok(ProfileNode {
                    t,
                    history,
                    prescription: source.prescribe(t, &belief)?,
                    belief,
                })
            })
            .collect::<Result<_>>()?;
        let start = nodes.len();
        nodes.extend(children);
        frontier = start..nodes.len();
    }
    Ok(EquilibriumProfile::from_nodes(built, complete, nodes))
}

/// Node lookup that derives missing nodes on demand from `source`.
struct NodeResolver<'a> {
    spec: &'a GameSpec,
    profile: &'a EquilibriumProfile,
    source: Option<&'a dyn PrescriptionSource>,
    cache: HashMap<Vec<usize>, ProfileNode>,
}

impl NodeResolver<'_> {
    fn get(&mut self, history: &[usize]) -> Result<ProfileNode> {
        if let Some(n) = self.profile.node(history) {
            return Ok(n.clone());
        }
        if let Some(n) = self.cache.get(history) {
            return Ok(n.clone());
        }
        let source = self
            .source
            .ok_or_else(|| SpbeError::Schema(format!("profile has no node for history {history:?}")))?;
        let (last, prefix) = history.split_last().expect("root is always materialized");
        let parent = self.get(prefix)?;
        let belief = belief_update_profile(&parent.belief, &parent.prescription.gamma, *last, self.spec, parent.t)?;
        let node = ProfileNode {
            t: history.len(),
            history: history.to_vec(),
            prescription: source.prescribe(history.len(), &belief)?,
            belief,
        };
        self.cache.insert(history.to_vec(), node.clone());
        Ok(node)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub episode: u64,
    /// `types[t][i]`
    pub types: Vec<Vec<usize>>,
    /// `actions[t][i]`
    pub actions: Vec<Vec<usize>>,
    /// `rewards[t][i]`
    pub rewards: Vec<Vec<f64>>,
    pub totals: Vec<f64>,
    pub beliefs: Vec<BeliefVector>,
}

/// One line of a trajectory dump.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryRecord {
    pub episode: u64,
    pub t: usize,
    pub x: Vec<usize>,
    pub a: Vec<usize>,
    pub rewards: Vec<f64>,
    pub belief: Vec<Vec<f64>>,
}

impl Trajectory {
    pub fn records(&self) -> impl Iterator<Item = TrajectoryRecord> + '_ {
        (0..self.types.len()).map(move |t| TrajectoryRecord {
            episode: self.episode,
            t,
            x: self.types[t].clone(),
            a: self.actions[t].clone(),
            rewards: self.rewards[t].clone(),
            belief: self.beliefs[t].marginals.clone(),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationResult {
    pub episodes: u64,
    /// `None` when no episodes were run.
    pub means: Option<Vec<f64>>,
    pub std_errors: Option<Vec<f64>>,
    pub rng: String,
    #[serde(skip)]
    pub trajectories: Vec<Trajectory>,
}

fn sample<R: Rng>(rng: &mut R, dist: &[f64]) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (k, p) in dist.iter().enumerate() {
        acc += p;
        if u < acc {
            return k;
        }
    }
    // Rounding left u above the total; take the last positive entry.
    dist.iter().rposition(|p| *p > 0.0).unwrap_or(dist.len() - 1)
}

/// Play `episodes` independent episodes. Episode `e` draws from its own
/// ChaCha20 stream, so results depend only on `(seed, e)`.
pub fn simulate(
    spec: &GameSpec,
    profile: &EquilibriumProfile,
    source: Option<&dyn PrescriptionSource>,
    episodes: u64,
    seed: u64,
) -> Result<SimulationResult> {
    let n = spec.num_players;
    let ja = spec.joint_actions();
    let jx = spec.joint_types();
    let mut resolver = NodeResolver {
        spec,
        profile,
        source,
        cache: HashMap::new(),
    };
    let mut trajectories = Vec::with_capacity(episodes as usize);
    for episode in 0..episodes {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        rng.set_stream(episode);
        let mut x: Vec<usize> = spec.initial_dists.iter().map(|d| sample(&mut rng, d)).collect();
        let mut history = Vec::with_capacity(spec.horizon);
        let mut traj = Trajectory {
            episode,
            types: Vec::new(),
            actions: Vec::new(),
            rewards: Vec::new(),
            totals: vec![0.0; n],
            beliefs: Vec::new(),
        };
        for t in 0..spec.horizon {
            let node = resolver.get(&history)?;
            let a: Vec<usize> = (0..n).map(|i| sample(&mut rng, &node.prescription.gamma.rows[i][x[i]])).collect();
            let xf = jx.flatten(&x)?;
            let af = ja.flatten(&a)?;
            let r: Vec<f64> = (0..n).map(|i| spec.reward(t, i, xf, af)).collect();
            traj.totals.iter_mut().zip(&r).for_each(|(s, v)| *s += v);
            traj.types.push(x.clone());
            traj.actions.push(a);
            traj.rewards.push(r);
            traj.beliefs.push(node.belief);
            if t + 1 < spec.horizon {
                x = (0..n).map(|i| sample(&mut rng, spec.kernel_row(t, i, x[i], af))).collect();
            }
            history.push(af);
        }
        trajectories.push(traj);
    }
    let (means, std_errors) = if episodes == 0 {
        (None, None)
    } else {
        let k = episodes as f64;
        let means: Vec<f64> = (0..n).map(|i| trajectories.iter().map(|tr| tr.totals[i]).sum::<f64>() / k).collect();
        let ses = (0..n)
            .map(|i| {
                if episodes < 2 {
                    return 0.0;
                }
                let var = trajectories.iter().map(|tr| (tr.totals[i] - means[i]).powi(2)).sum::<f64>() / (k - 1.0);
                (var / k).sqrt()
            })
            .collect();
        (Some(means), Some(ses))
    };
    Ok(SimulationResult {
        episodes,
        means,
        std_errors,
        rng: RNG_ALGORITHM.to_string(),
        trajectories,
    })
}

/// Exact `E[sum_t R_t^i]` under the profile's prescriptions, by summation
/// over the full history tree.
pub fn analytic_expected_reward(spec: &GameSpec, profile: &EquilibriumProfile) -> Result<Vec<f64>> {
    if profile.depth < spec.horizon || !profile.complete {
        return Err(SpbeError::CapExceeded {
            what: "history tree for exact expected reward".into(),
            needed: spec.horizon as u128,
            cap: profile.depth as u128,
        });
    }
    let n = spec.num_players;
    let jx = spec.joint_types();
    let ja = spec.joint_actions();
    let mut totals = vec![0.0; n];
    // (history, unnormalized joint type distribution at that history)
    let root: Vec<f64> = (0..jx.len()).map(|x| BeliefVector::initial(spec).joint_prob(&jx, x)).collect();
    let mut frontier = vec![(Vec::<usize>::new(), root)];
    for t in 0..spec.horizon {
        let mut next = Vec::new();
        for (history, mass) in frontier {
            let node = profile
                .node(&history)
                .ok_or_else(|| SpbeError::Schema(format!("missing node {history:?}")))?;
            let gamma = &node.prescription.gamma;
            let mut children = vec![vec![0.0; jx.len()]; ja.len()];
            for (x, &px) in mass.iter().enumerate() {
                if px == 0.0 {
                    continue;
                }
                for (a, child) in children.iter_mut().enumerate() {
                    let pa: f64 = (0..n)
                        .map(|i| gamma.rows[i][jx.component(x, i)][ja.component(a, i)])
                        .product();
                    let p = px * pa;
                    if p == 0.0 {
                        continue;
                    }
                    for (i, tot) in totals.iter_mut().enumerate() {
                        *tot += p * spec.reward(t, i, x, a);
                    }
                    if t + 1 < spec.horizon {
                        for (xn, c) in child.iter_mut().enumerate() {
                            let q: f64 = (0..n)
                                .map(|i| spec.kernel_row(t, i, jx.component(x, i), a)[jx.component(xn, i)])
                                .product();
                            *c += p * q;
                        }
                    }
                }
            }
            if t + 1 < spec.horizon {
                for (a, child) in children.into_iter().enumerate() {
                    let mut h = history.clone();
                    h.push(a);
                    next.push((h, child));
                }
            }
        }
        frontier = next;
    }
    Ok(totals)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::backward::backward_pass;
    use crate::games;

    fn uniform_source(spec: &GameSpec) -> impl Fn(usize, &BeliefVector) -> Result<PartialStrategyProfile> + Sync + '_ {
        move |_, _| Ok(PartialStrategyProfile::uniform(spec))
    }

    fn static_two_type() -> GameSpec {
        games::build(&[2, 2], &[2, 2], 3, vec![vec![0.3, 0.7], vec![0.6, 0.4]], |_, _, x, _| {
            let mut r = vec![0.0; 2];
            r[x] = 1.0;
            r
        }, |_, _, _, _| 0.0)
    }

    #[test]
    fn root_belief_is_initial() {
        let spec = games::signaling_game();
        let src = uniform_source(&spec);
        let p = forward_pass(&spec, &src, 2, 100).unwrap();
        assert_eq!(p.root().belief.marginals, spec.initial_dists);
        assert_eq!(p.nodes.len(), 1 + 4);
    }

    #[test]
    fn uninformative_play_keeps_beliefs() {
        let spec = static_two_type();
        let src = uniform_source(&spec);
        let p = forward_pass(&spec, &src, 3, 100).unwrap();
        assert_eq!(p.nodes.len(), 1 + 4 + 16);
        for n in &p.nodes {
            assert!(n.belief.distance(&p.root().belief) < 1e-15);
        }
    }

    #[test]
    fn type_revealing_play_collapses_beliefs() {
        let spec = static_two_type();
        let src = |_: usize, _: &BeliefVector| Ok(PartialStrategyProfile::pure(&spec, &[vec![0, 1], vec![0, 1]]));
        let p = forward_pass(&spec, &src, 2, 100).unwrap();
        let ja = spec.joint_actions();
        for a in 0..4 {
            let node = p.node(&[a]).unwrap();
            for i in 0..2 {
                let mut expect = vec![0.0; 2];
                expect[ja.component(a, i)] = 1.0;
                assert_eq!(node.belief.marginals[i], expect);
            }
        }
    }

    #[test]
    fn depth_cap_above_horizon_rejected() {
        let spec = games::matching_pennies(2);
        let src = uniform_source(&spec);
        assert!(forward_pass(&spec, &src, 3, 100).is_err());
    }

    #[test]
    fn node_cap_truncates_and_simulation_derives_lazily() {
        let spec = games::matching_pennies(3);
        let src = uniform_source(&spec);
        let p = forward_pass(&spec, &src, 3, 10).unwrap();
        assert!(!p.complete);
        assert_eq!(p.depth, 2);
        assert!(simulate(&spec, &p, None, 1, 0).is_err());
        let sim = simulate(&spec, &p, Some(&src), 5, 0).unwrap();
        assert_eq!(sim.trajectories[0].types.len(), 3);
        assert!(analytic_expected_reward(&spec, &p).is_err());
    }

    #[test]
    fn deterministic_game_simulates_exactly() {
        let spec = games::build(&[2], &[2], 2, vec![vec![0.0, 1.0]], |_, _, x, _| {
            let mut r = vec![0.0; 2];
            r[x] = 1.0;
            r
        }, |t, _, x, a| (t + 1) as f64 * if x[0] == a[0] { 1.5 } else { -1.0 });
        let src = |_: usize, _: &BeliefVector| Ok(PartialStrategyProfile::pure(&spec, &[vec![0, 1]]));
        let p = forward_pass(&spec, &src, 2, 100).unwrap();
        let sim = simulate(&spec, &p, None, 17, 3).unwrap();
        assert_eq!(sim.means.unwrap(), vec![4.5]);
        assert_eq!(analytic_expected_reward(&spec, &p).unwrap(), vec![4.5]);
    }

    #[test]
    fn single_agent_one_step_expected_reward() {
        let spec = games::build(&[2], &[2], 1, vec![vec![0.25, 0.75]], |_, _, _, _| vec![], |_, _, x, a| {
            [[1.0, 3.0], [2.0, -1.0]][x[0]][a[0]]
        });
        let grid = SimplexGrid::new(&[2], 4).unwrap();
        let cfg = RunConfig::default();
        let tables = backward_pass(&spec, &grid, &cfg).unwrap();
        let src = ThetaSource { spec: &spec, grid: &grid, tables: &tables, config: &cfg };
        let p = forward_pass(&spec, &src, 1, 10).unwrap();
        assert_eq!(analytic_expected_reward(&spec, &p).unwrap(), vec![0.25 * 3.0 + 0.75 * 2.0]);
    }

    #[test]
    fn matching_pennies_simulation_and_determinism() {
        let spec = games::matching_pennies(1);
        let src = uniform_source(&spec);
        let p = forward_pass(&spec, &src, 1, 10).unwrap();
        let a = simulate(&spec, &p, None, 10_000, 11).unwrap();
        let b = simulate(&spec, &p, None, 10_000, 11).unwrap();
        assert_eq!(a.trajectories, b.trajectories);
        let means = a.means.unwrap();
        assert!(means[0].abs() <= 3.0 / (10_000f64).sqrt());
        assert_eq!(analytic_expected_reward(&spec, &p).unwrap(), vec![0.0, 0.0]);
        let empty = simulate(&spec, &p, None, 0, 11).unwrap();
        assert!(empty.means.is_none() && empty.trajectories.is_empty());
    }

    #[test]
    fn analytic_matches_simulation_statistically() {
        let spec = games::single_agent_mdp();
        let grid = SimplexGrid::new(&[3], 4).unwrap();
        let cfg = RunConfig::default();
        let tables = backward_pass(&spec, &grid, &cfg).unwrap();
        let src = ThetaSource { spec: &spec, grid: &grid, tables: &tables, config: &cfg };
        let p = forward_pass(&spec, &src, 3, 1000).unwrap();
        let exact = analytic_expected_reward(&spec, &p).unwrap();
        let sim = simulate(&spec, &p, None, 10_000, 5).unwrap();
        let (m, se) = (sim.means.unwrap(), sim.std_errors.unwrap());
        assert!((m[0] - exact[0]).abs() <= 4.0 * se[0], "{m:?} vs {exact:?} (se {se:?})");
    }

    #[test]
    fn profile_serde_rebuilds_index() {
        let spec = games::matching_pennies(2);
        let src = uniform_source(&spec);
        let p = forward_pass(&spec, &src, 2, 10).unwrap();
        let back: EquilibriumProfile = serde_json::from_str(&serde_json::to_string(&p).unwrap()).unwrap();
        assert_eq!(back, p);
        assert!(back.node(&[3]).is_some());
    }
}
