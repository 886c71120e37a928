//! Per-stage fixed point: find partial strategies that are mutual best
//! responses at a fixed common belief, where continuation values are read at
//! the belief updated with the candidate profile itself.

use serde::{Deserialize, Serialize};

use crate::belief::{belief_update_profile, BeliefVector};
use crate::error::{Result, SpbeError};
use crate::game::GameSpec;
use crate::refine::refine_mixed;
pub use crate::strategy::PartialStrategyProfile;

/// Tie tolerance for best-response sets.
pub const BR_TIE_TOL: f64 = 1e-9;

/// Continuation values `V_{t+1}^i(belief, x_i)`.
pub trait Continuation: Send + Sync {
    /// All values at `belief`, indexed `[i][x_i]`.
    fn values(&self, belief: &BeliefVector) -> Result<Vec<Vec<f64>>>;
}

/// The terminal continuation, identically zero.
pub struct ZeroContinuation {
    pub type_space_sizes: Vec<usize>,
}

impl Continuation for ZeroContinuation {
    fn values(&self, _belief: &BeliefVector) -> Result<Vec<Vec<f64>>> {
        Ok(self.type_space_sizes.iter().map(|&s| vec![0.0; s]).collect())
    }
}

/// Data of the stage game at time `t` and belief `belief`.
pub struct StageProblem<'a> {
    pub spec: &'a GameSpec,
    pub t: usize,
    pub belief: BeliefVector,
    /// Ignored in the last period.
    pub continuation: &'a dyn Continuation,
}

/// Payoffs of every pure action against a candidate profile,
/// `pure[i][x_i][a_i]`.
#[derive(Debug, Clone)]
pub struct StageEvaluation {
    pub pure: Vec<Vec<Vec<f64>>>,
}

impl StageEvaluation {
    /// Expected payoff of `dist` for player `i` of type `x`.
    pub fn payoff(&self, i: usize, x: usize, dist: &[f64]) -> f64 {
        self.pure[i][x].iter().zip(dist).map(|(v, p)| v * p).sum()
    }

    pub fn max_pure(&self, i: usize, x: usize) -> f64 {
        self.pure[i][x].iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Actions within `tie_tol` of the best pure payoff.
    pub fn tie_set(&self, i: usize, x: usize, tie_tol: f64) -> Vec<usize> {
        let best = self.max_pure(i, x);
        self.pure[i][x]
            .iter()
            .enumerate()
            .filter(|(_, v)| **v >= best - tie_tol)
            .map(|(a, _)| a)
            .collect()
    }

    /// Largest best-response gap of `gamma` over all players and types.
    pub fn residual(&self, gamma: &PartialStrategyProfile) -> f64 {
        let mut r = 0.0_f64;
        for (i, per_i) in self.pure.iter().enumerate() {
            for x in 0..per_i.len() {
                r = r.max(self.max_pure(i, x) - self.payoff(i, x, &gamma.rows[i][x]));
            }
        }
        r.max(0.0)
    }

    /// Best response spread uniformly over each tie set, after reserving
    /// `floor` probability for every action.
    pub fn softened_best_response(&self, tie_tol: f64, floor: f64) -> PartialStrategyProfile {
        let rows = self
            .pure
            .iter()
            .enumerate()
            .map(|(i, per_i)| {
                (0..per_i.len())
                    .map(|x| {
                        let na = per_i[x].len();
                        let ties = self.tie_set(i, x, tie_tol);
                        let share = (1.0 - floor * na as f64) / ties.len() as f64;
                        let mut row = vec![floor; na];
                        for a in ties {
                            row[a] += share;
                        }
                        row
                    })
                    .collect()
            })
            .collect();
        PartialStrategyProfile { rows }
    }
}

impl StageProblem<'_> {
    fn is_last(&self) -> bool {
        self.t + 1 >= self.spec.horizon
    }

    /// Pure-action payoffs for every player and type when the other players
    /// follow `gamma` and beliefs are updated with `gamma`.
    pub fn evaluate(&self, gamma: &PartialStrategyProfile) -> Result<StageEvaluation> {
        let spec = self.spec;
        let n = spec.num_players;
        let jx = spec.joint_types();
        let ja = spec.joint_actions();
        if self.t >= spec.horizon {
            return Err(SpbeError::TimeRange {
                t: self.t,
                lo: 0,
                hi: spec.horizon - 1,
            });
        }
        self.belief.check(&spec.type_space_sizes)?;
        gamma.check(spec)?;

        // cont[a][i][x_i] = sum_{x'} Q^i(x' | x_i, a) V^i(F(belief, gamma, a), x')
        let cont: Vec<Vec<Vec<f64>>> = if self.is_last() {
            vec![spec.type_space_sizes.iter().map(|&s| vec![0.0; s]).collect(); ja.len()]
        } else {
            (0..ja.len())
                .map(|a| {
                    let next = belief_update_profile(&self.belief, gamma, a, spec, self.t)?;
                    let v = self.continuation.values(&next)?;
                    Ok((0..n)
                        .map(|i| {
                            (0..spec.type_space_sizes[i])
                                .map(|x| spec.kernel_row(self.t, i, x, a).iter().zip(&v[i]).map(|(q, w)| q * w).sum())
                                .collect()
                        })
                        .collect())
                })
                .collect::<Result<_>>()?
        };

        let mut pure: Vec<Vec<Vec<f64>>> = (0..n)
            .map(|i| vec![vec![0.0; spec.action_space_sizes[i]]; spec.type_space_sizes[i]])
            .collect();
        let mut own_type = vec![0; n];
        let mut own_action = vec![0; n];
        for x in 0..jx.len() {
            for (i, o) in own_type.iter_mut().enumerate() {
                *o = jx.component(x, i);
            }
            for a in 0..ja.len() {
                for (i, o) in own_action.iter_mut().enumerate() {
                    *o = ja.component(a, i);
                }
                for i in 0..n {
                    let mut w = 1.0;
                    for j in (0..n).filter(|&j| j != i) {
                        w *= self.belief.marginals[j][own_type[j]] * gamma.rows[j][own_type[j]][own_action[j]];
                        if w == 0.0 {
                            break;
                        }
                    }
                    if w != 0.0 {
                        pure[i][own_type[i]][own_action[i]] +=
                            w * (spec.reward(self.t, i, x, a) + cont[a][i][own_type[i]]);
                    }
                }
            }
        }
        Ok(StageEvaluation { pure })
    }
}

/// Expected stage payoff of player `i` of type `x_i` playing `dist_i` while
/// beliefs and opponents follow `gamma`.
pub fn stage_payoff(
    prob: &StageProblem<'_>,
    i: usize,
    x_i: usize,
    dist_i: &[f64],
    gamma: &PartialStrategyProfile,
) -> Result<f64> {
    let eval = prob.evaluate(gamma)?;
    if dist_i.len() != prob.spec.action_space_sizes[i] {
        return Err(SpbeError::Dimension("deviation distribution has wrong length".into()));
    }
    Ok(eval.payoff(i, x_i, dist_i))
}

/// Per-type best-response sets and values of player `i`.
#[derive(Debug, Clone, PartialEq)]
pub struct BestResponse {
    pub actions: Vec<Vec<usize>>,
    pub values: Vec<f64>,
}

pub fn best_response(prob: &StageProblem<'_>, i: usize, gamma: &PartialStrategyProfile) -> Result<BestResponse> {
    let eval = prob.evaluate(gamma)?;
    let nx = prob.spec.type_space_sizes[i];
    Ok(BestResponse {
        actions: (0..nx).map(|x| eval.tie_set(i, x, BR_TIE_TOL)).collect(),
        values: (0..nx).map(|x| eval.max_pure(i, x)).collect(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum StageMethod {
    #[serde(rename = "br")]
    BrIteration,
    #[serde(rename = "enum")]
    Enumeration,
    #[serde(rename = "eps")]
    EpsilonPath,
}

impl StageMethod {
    /// Default fallback order.
    pub const CHAIN: [StageMethod; 3] = [StageMethod::BrIteration, StageMethod::EpsilonPath, StageMethod::Enumeration];

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "br" => Some(Self::BrIteration),
            "enum" => Some(Self::Enumeration),
            "eps" => Some(Self::EpsilonPath),
            _ => None,
        }
    }

    /// `self` first, then the rest of [`Self::CHAIN`].
    pub fn fallback_order(self) -> Vec<StageMethod> {
        std::iter::once(self).chain(Self::CHAIN.into_iter().filter(|m| *m != self)).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageConfig {
    pub damping: f64,
    pub max_iters: usize,
    pub tolerance: f64,
    pub tie_tol: f64,
    pub enum_cap: u128,
    pub epsilon_schedule: Vec<f64>,
    /// When fixed-step iteration stalls, follow up with a diminishing step
    /// and Newton polishing on the indifference conditions.
    pub refine: bool,
    /// Starting profile for best-response iteration; uniform when absent.
    #[serde(skip)]
    pub initial: Option<PartialStrategyProfile>,
}

impl Default for StageConfig {
    fn default() -> Self {
        Self {
            damping: 0.5,
            max_iters: 10_000,
            tolerance: 1e-8,
            tie_tol: BR_TIE_TOL,
            enum_cap: 1_000_000,
            epsilon_schedule: vec![0.1, 0.01, 0.001],
            refine: true,
            initial: None,
        }
    }
}

/// One entry of the epsilon path.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpsilonStep {
    /// Zero marks the final unfloored step.
    pub epsilon: f64,
    /// Best-response gap over unrestricted strategies.
    pub residual: f64,
    /// Best-response gap within the epsilon-floor simplex.
    pub restricted_residual: f64,
    pub iterations: usize,
    /// Smallest probability seen in any iterate at this epsilon.
    pub min_prob: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageSolveResult {
    pub gamma: PartialStrategyProfile,
    pub residual: f64,
    pub method: StageMethod,
    pub iterations: usize,
    pub success: bool,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub epsilon_trace: Vec<EpsilonStep>,
    /// Profile at the smallest epsilon, before the floor is removed.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilon_floor_profile: Option<PartialStrategyProfile>,
}

fn result(
    gamma: PartialStrategyProfile,
    residual: f64,
    method: StageMethod,
    iterations: usize,
    config: &StageConfig,
) -> StageSolveResult {
    StageSolveResult {
        gamma,
        residual,
        method,
        iterations,
        success: residual <= config.tolerance,
        epsilon_trace: Vec::new(),
        epsilon_floor_profile: None,
    }
}

fn check_config(config: &StageConfig) -> Result<()> {
    if !(config.damping > 0.0 && config.damping <= 1.0) {
        return Err(SpbeError::InvalidConfig(format!("damping {} outside (0, 1]", config.damping)));
    }
    if !(config.tolerance > 0.0) || !(config.tie_tol > 0.0) {
        return Err(SpbeError::InvalidConfig("tolerances must be positive".into()));
    }
    Ok(())
}

/// Iterations without a new best residual after which a refining run gives
/// up on fixed-step iteration.
const STALL_ITERS: usize = 500;

/// Damped simultaneous best-response iteration from `start`. Each round
/// also tests the softened best response itself, which lets strict
/// equilibria be reached exactly instead of geometrically. Without a floor
/// and with `config.refine`, a stalled run is handed to the mixed-equilibrium
/// refinement.
fn br_iterate(
    prob: &StageProblem<'_>,
    config: &StageConfig,
    start: PartialStrategyProfile,
    floor: f64,
) -> Result<(PartialStrategyProfile, f64, usize)> {
    let refine = config.refine && floor == 0.0;
    let mut gamma = start;
    let mut best: Option<(PartialStrategyProfile, f64)> = None;
    let mut improved_at = 0;
    let mut iters = config.max_iters;
    for k in 0..config.max_iters {
        let eval = prob.evaluate(&gamma)?;
        let r = eval.residual(&gamma);
        if r <= config.tolerance {
            return Ok((gamma, r, k));
        }
        let target = eval.softened_best_response(config.tie_tol, floor);
        let rt = prob.evaluate(&target)?.residual(&target);
        if rt <= config.tolerance {
            return Ok((target, rt, k + 1));
        }
        for (g, v) in [(&gamma, r), (&target, rt)] {
            if best.as_ref().is_none_or(|(_, b)| v < *b) {
                best = Some((g.clone(), v));
                improved_at = k;
            }
        }
        if refine && k - improved_at >= STALL_ITERS {
            iters = k + 1;
            break;
        }
        gamma.blend(&target, config.damping);
    }
    let (g, r) = best.expect("at least one iterate");
    if refine {
        if let Some((g, r, extra)) = refine_mixed(prob, config, g.clone())? {
            return Ok((g, r, iters + extra));
        }
    }
    Ok((g, r, iters))
}

pub fn solve_stage_br_iteration(prob: &StageProblem<'_>, config: &StageConfig) -> Result<StageSolveResult> {
    check_config(config)?;
    let start = config.initial.clone().unwrap_or_else(|| PartialStrategyProfile::uniform(prob.spec));
    let (gamma, r, iters) = br_iterate(prob, config, start, 0.0)?;
    Ok(result(gamma, r, StageMethod::BrIteration, iters, config))
}

/// Number of pure partial-strategy profiles, `prod_i |A^i|^{|X^i|}`.
pub fn pure_profile_count(spec: &GameSpec) -> Option<u128> {
    let mut count: u128 = 1;
    for (&nx, &na) in spec.type_space_sizes.iter().zip(&spec.action_space_sizes) {
        for _ in 0..nx {
            count = count.checked_mul(na as u128)?;
        }
    }
    Some(count)
}

/// Exhaustive search over pure partial-strategy profiles in lexicographic
/// order (player 0, type 0 most significant).
pub fn solve_stage_enumeration(prob: &StageProblem<'_>, config: &StageConfig) -> Result<StageSolveResult> {
    check_config(config)?;
    let spec = prob.spec;
    let count = pure_profile_count(spec).unwrap_or(u128::MAX);
    if count > config.enum_cap {
        return Err(SpbeError::CapExceeded {
            what: "pure stage profiles".into(),
            needed: count,
            cap: config.enum_cap,
        });
    }
    let radices: Vec<usize> = spec
        .type_space_sizes
        .iter()
        .zip(&spec.action_space_sizes)
        .flat_map(|(&nx, &na)| std::iter::repeat_n(na, nx))
        .collect();
    let mut digits = vec![0usize; radices.len()];
    let mut best: Option<(PartialStrategyProfile, f64)> = None;
    let mut visited = 0;
    loop {
        let mut it = digits.iter();
        let choice: Vec<Vec<usize>> = spec
            .type_space_sizes
            .iter()
            .map(|&nx| it.by_ref().take(nx).copied().collect())
            .collect();
        let gamma = PartialStrategyProfile::pure(spec, &choice);
        let r = prob.evaluate(&gamma)?.residual(&gamma);
        visited += 1;
        if r <= config.tolerance {
            return Ok(result(gamma, r, StageMethod::Enumeration, visited, config));
        }
        if best.as_ref().is_none_or(|(_, b)| r < *b) {
            best = Some((gamma, r));
        }
        // Odometer increment, last digit fastest.
        let mut k = digits.len();
        loop {
            if k == 0 {
                let (g, r) = best.expect("at least one profile");
                return Ok(result(g, r, StageMethod::Enumeration, visited, config));
            }
            k -= 1;
            digits[k] += 1;
            if digits[k] < radices[k] {
                break;
            }
            digits[k] = 0;
        }
    }
}

fn check_schedule(spec: &GameSpec, schedule: &[f64]) -> Result<()> {
    if schedule.is_empty() {
        return Err(SpbeError::InvalidConfig("empty epsilon schedule".into()));
    }
    let cap = 1.0 / spec.max_actions() as f64;
    for w in schedule.windows(2) {
        if !(w[1] < w[0]) {
            return Err(SpbeError::InvalidConfig(format!("epsilon schedule not strictly decreasing: {schedule:?}")));
        }
    }
    if let Some(e) = schedule.iter().find(|e| !(**e > 0.0 && **e < cap)) {
        return Err(SpbeError::InvalidConfig(format!("epsilon {e} outside (0, {cap})")));
    }
    Ok(())
}

/// Move rows below the floor into the floor simplex by mixing with uniform.
fn lift_to_floor(gamma: &mut PartialStrategyProfile, eps: f64) {
    for row in gamma.rows.iter_mut().flatten() {
        if row.iter().any(|p| *p < eps) {
            let na = row.len() as f64;
            row.iter_mut().for_each(|p| *p = eps + (1.0 - eps * na) * *p);
        }
    }
}

/// Inverse of the floor projection: strip `eps` from every entry.
fn remove_floor(gamma: &PartialStrategyProfile, eps: f64) -> PartialStrategyProfile {
    let mut out = gamma.clone();
    for row in out.rows.iter_mut().flatten() {
        row.iter_mut().for_each(|p| *p = (*p - eps).max(0.0));
        let s: f64 = row.iter().sum();
        if s > 0.0 {
            row.iter_mut().for_each(|p| *p /= s);
        } else {
            let u = 1.0 / row.len() as f64;
            row.iter_mut().for_each(|p| *p = u);
        }
    }
    out
}

fn min_prob(gamma: &PartialStrategyProfile) -> f64 {
    gamma.rows.iter().flatten().flatten().copied().fold(f64::INFINITY, f64::min)
}

/// Damped best-response iteration restricted to `{dist : dist(a) >= eps}`.
/// Returns the final iterate and its trace entry.
pub fn solve_epsilon_floor(
    prob: &StageProblem<'_>,
    eps: f64,
    config: &StageConfig,
    start: PartialStrategyProfile,
) -> Result<(PartialStrategyProfile, EpsilonStep)> {
    let mut gamma = start;
    lift_to_floor(&mut gamma, eps);
    let mut lowest = min_prob(&gamma);
    let mut iterations = 0;
    let restricted = |eval: &StageEvaluation, g: &PartialStrategyProfile, target: &PartialStrategyProfile| {
        let mut r = 0.0_f64;
        for (i, per_i) in g.rows.iter().enumerate() {
            for (x, row) in per_i.iter().enumerate() {
                r = r.max(eval.payoff(i, x, &target.rows[i][x]) - eval.payoff(i, x, row));
            }
        }
        r.max(0.0)
    };
    let (eval, rr) = loop {
        let eval = prob.evaluate(&gamma)?;
        let target = eval.softened_best_response(config.tie_tol, eps);
        let rr = restricted(&eval, &gamma, &target);
        if rr <= config.tolerance || iterations >= config.max_iters {
            break (eval, rr);
        }
        let eval_t = prob.evaluate(&target)?;
        let target_t = eval_t.softened_best_response(config.tie_tol, eps);
        let rt = restricted(&eval_t, &target, &target_t);
        iterations += 1;
        if rt <= config.tolerance {
            gamma = target;
            lowest = lowest.min(min_prob(&gamma));
            break (eval_t, rt);
        }
        gamma.blend(&target, config.damping);
        lowest = lowest.min(min_prob(&gamma));
    };
    let step = EpsilonStep {
        epsilon: eps,
        residual: eval.residual(&gamma),
        restricted_residual: rr,
        iterations,
        min_prob: lowest,
    };
    Ok((gamma, step))
}

/// Follow the epsilon schedule with warm starts, then remove the last floor
/// and finish with unrestricted best-response iteration if needed.
pub fn solve_stage_epsilon_path(prob: &StageProblem<'_>, config: &StageConfig) -> Result<StageSolveResult> {
    check_config(config)?;
    check_schedule(prob.spec, &config.epsilon_schedule)?;
    let mut gamma = config.initial.clone().unwrap_or_else(|| PartialStrategyProfile::uniform(prob.spec));
    let mut trace = Vec::with_capacity(config.epsilon_schedule.len() + 1);
    for &eps in &config.epsilon_schedule {
        let (g, step) = solve_epsilon_floor(prob, eps, config, gamma)?;
        gamma = g;
        trace.push(step);
    }
    let last_eps = *config.epsilon_schedule.last().expect("non-empty schedule");
    let floored = gamma;
    let limit = remove_floor(&floored, last_eps);
    let (gamma, residual, iterations) = br_iterate(prob, config, limit, 0.0)?;
    trace.push(EpsilonStep {
        epsilon: 0.0,
        residual,
        restricted_residual: residual,
        iterations,
        min_prob: min_prob(&gamma),
    });
    let total = trace.iter().map(|s| s.iterations).sum();
    let mut out = result(gamma, residual, StageMethod::EpsilonPath, total, config);
    out.epsilon_trace = trace;
    out.epsilon_floor_profile = Some(floored);
    Ok(out)
}

/// Drop probability on actions whose gap exceeds `tolerance + tie_tol`.
/// The cleaned profile is kept only if it still meets the tolerance.
fn polish(prob: &StageProblem<'_>, res: &mut StageSolveResult, config: &StageConfig) -> Result<()> {
    let eval = prob.evaluate(&res.gamma)?;
    let slack = config.tolerance + config.tie_tol;
    let mut cleaned = res.gamma.clone();
    let mut changed = false;
    for (i, per_i) in cleaned.rows.iter_mut().enumerate() {
        for (x, row) in per_i.iter_mut().enumerate() {
            let best = eval.max_pure(i, x);
            for (a, p) in row.iter_mut().enumerate() {
                if *p > 0.0 && eval.pure[i][x][a] < best - slack {
                    *p = 0.0;
                    changed = true;
                }
            }
            let s: f64 = row.iter().sum();
            row.iter_mut().for_each(|p| *p /= s);
        }
    }
    if changed {
        let r = prob.evaluate(&cleaned)?.residual(&cleaned);
        if r <= config.tolerance {
            res.gamma = cleaned;
            res.residual = r;
        }
    }
    Ok(())
}

pub fn solve_stage_with(prob: &StageProblem<'_>, method: StageMethod, config: &StageConfig) -> Result<StageSolveResult> {
    let mut res = match method {
        StageMethod::BrIteration => solve_stage_br_iteration(prob, config),
        StageMethod::Enumeration => solve_stage_enumeration(prob, config),
        StageMethod::EpsilonPath => solve_stage_epsilon_path(prob, config),
    }?;
    if res.success {
        polish(prob, &mut res, config)?;
    }
    Ok(res)
}

/// Try each method in `order` until one succeeds. If none does, returns the
/// attempt with the smallest residual (with `success == false`). A method
/// that exceeds its cap is skipped.
pub fn solve_stage(prob: &StageProblem<'_>, order: &[StageMethod], config: &StageConfig) -> Result<StageSolveResult> {
    let mut best: Option<StageSolveResult> = None;
    for &method in order {
        let res = match solve_stage_with(prob, method, config) {
            Ok(r) => r,
            Err(SpbeError::CapExceeded { .. }) => continue,
            Err(e) => return Err(e),
        };
        if res.success {
            return Ok(res);
        }
        if best.as_ref().is_none_or(|b| res.residual < b.residual) {
            best = Some(res);
        }
    }
    best.ok_or_else(|| SpbeError::InvalidConfig("no stage method could run".into()))
}
