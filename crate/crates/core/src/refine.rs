//! Accurate mixed stage equilibria. Fixed-step best-response iteration
//! circles around mixed equilibria without reaching them. Newton's method
//! on the indifference conditions of a support finishes the job; supports
//! are guessed from the stalled iterate, then searched exhaustively (small
//! first), then guessed again from a diminishing-step iteration.

use nalgebra::{DMatrix, DVector};

use crate::error::Result;
use crate::stage::{PartialStrategyProfile, StageConfig, StageEvaluation, StageProblem};

/// Probability above which an action counts as used by a rough iterate.
const SUPPORT_PROB: f64 = 1e-3;
/// Newton budget: iterations and smallest backtracking step. Exhaustive
/// support search uses the short one since most supports fail.
const NEWTON_FULL: (usize, f64) = (40, 1e-6);
const NEWTON_SHORT: (usize, f64) = (12, 1e-2);
const FD_STEP: f64 = 1e-7;
/// Most support profiles tried by exhaustive support search.
const SUPPORT_CAP: u128 = 20_000;

type Support = Vec<Vec<Vec<usize>>>;

/// Agents `(i, x)` mixing over more than one action. Each contributes the
/// probabilities of all but the last action of its support as unknowns.
struct Layout {
    support: Support,
    mixing: Vec<(usize, usize)>,
    dim: usize,
}

impl Layout {
    fn new(support: Support) -> Self {
        let mut mixing = Vec::new();
        let mut dim = 0;
        for (i, per_i) in support.iter().enumerate() {
            for (x, s) in per_i.iter().enumerate() {
                if s.len() > 1 {
                    mixing.push((i, x));
                    dim += s.len() - 1;
                }
            }
        }
        Self { support, mixing, dim }
    }

    /// `None` when `z` leaves the simplex.
    fn profile(&self, template: &PartialStrategyProfile, z: &DVector<f64>) -> Option<PartialStrategyProfile> {
        let mut g = template.clone();
        let mut k = 0;
        for &(i, x) in &self.mixing {
            let s = &self.support[i][x];
            let row = &mut g.rows[i][x];
            row.iter_mut().for_each(|p| *p = 0.0);
            let mut rest = 1.0;
            for &a in &s[..s.len() - 1] {
                if z[k] < 0.0 {
                    return None;
                }
                row[a] = z[k];
                rest -= z[k];
                k += 1;
            }
            if rest < 0.0 {
                return None;
            }
            row[s[s.len() - 1]] = rest;
        }
        Some(g)
    }

    fn start(&self, approx: &PartialStrategyProfile) -> DVector<f64> {
        let mut z = Vec::with_capacity(self.dim);
        for &(i, x) in &self.mixing {
            let s = &self.support[i][x];
            let mass: f64 = s.iter().map(|&a| approx.rows[i][x][a]).sum();
            for &a in &s[..s.len() - 1] {
                z.push(if mass > 0.0 { approx.rows[i][x][a] / mass } else { 1.0 / s.len() as f64 });
            }
        }
        DVector::from_vec(z)
    }

    /// Indifference between each support action and the last one.
    fn equations(&self, eval: &StageEvaluation) -> DVector<f64> {
        let mut f = Vec::with_capacity(self.dim);
        for &(i, x) in &self.mixing {
            let s = &self.support[i][x];
            let last = eval.pure[i][x][s[s.len() - 1]];
            for &a in &s[..s.len() - 1] {
                f.push(eval.pure[i][x][a] - last);
            }
        }
        DVector::from_vec(f)
    }
}

/// Pure template: every agent plays the first action of its support.
fn template(support: &Support, approx: &PartialStrategyProfile) -> PartialStrategyProfile {
    let mut g = approx.clone();
    for (i, per_i) in support.iter().enumerate() {
        for (x, s) in per_i.iter().enumerate() {
            let row = &mut g.rows[i][x];
            row.iter_mut().for_each(|p| *p = 0.0);
            row[s[0]] = 1.0;
        }
    }
    g
}

/// Solve the indifference conditions on `support` from `approx`. With
/// `certify`, only a profile within tolerance is returned; otherwise any
/// feasible solution of the equations is.
fn newton(
    prob: &StageProblem<'_>,
    config: &StageConfig,
    support: Support,
    approx: &PartialStrategyProfile,
    certify: bool,
    (iters, min_step): (usize, f64),
) -> Result<Option<(PartialStrategyProfile, f64)>> {
    let tmpl = template(&support, approx);
    let layout = Layout::new(support);
    let equations_at = |z: &DVector<f64>| -> Result<Option<DVector<f64>>> {
        match layout.profile(&tmpl, z) {
            Some(g) => Ok(Some(layout.equations(&prob.evaluate(&g)?))),
            None => Ok(None),
        }
    };
    let mut z = layout.start(approx);
    if layout.dim > 0 {
        let Some(mut f) = equations_at(&z)? else {
            return Ok(None);
        };
        for _ in 0..iters {
            if f.amax() <= config.tolerance * 1e-3 {
                break;
            }
            let mut jac = DMatrix::zeros(layout.dim, layout.dim);
            for c in 0..layout.dim {
                let shifted = |h: f64| {
                    let mut zz = z.clone();
                    zz[c] += h;
                    equations_at(&zz)
                };
                let col = match (shifted(FD_STEP)?, shifted(-FD_STEP)?) {
                    (Some(p), Some(m)) => (p - m) / (2.0 * FD_STEP),
                    (Some(p), None) => (p - &f) / FD_STEP,
                    (None, Some(m)) => (&f - m) / FD_STEP,
                    (None, None) => return Ok(None),
                };
                jac.set_column(c, &col);
            }
            let Some(step) = jac.lu().solve(&(-&f)) else {
                return Ok(None);
            };
            // Backtrack until the point is feasible and the equations shrink.
            let mut lambda = 1.0;
            let mut accepted = false;
            while lambda >= min_step {
                let cand = &z + &step * lambda;
                if let Some(fc) = equations_at(&cand)? {
                    if fc.norm() < f.norm() {
                        z = cand;
                        f = fc;
                        accepted = true;
                        break;
                    }
                }
                lambda *= 0.5;
            }
            if !accepted {
                break;
            }
        }
    }
    let Some(g) = layout.profile(&tmpl, &z) else {
        return Ok(None);
    };
    let r = prob.evaluate(&g)?.residual(&g);
    Ok((!certify || r <= config.tolerance).then_some((g, r)))
}

/// Candidate supports read off a rough solution.
fn supports(eval: &StageEvaluation, approx: &PartialStrategyProfile, gap: f64) -> Vec<Support> {
    let by_prob: Support = approx
        .rows
        .iter()
        .map(|per_i| {
            per_i
                .iter()
                .map(|row| {
                    let s: Vec<usize> = (0..row.len()).filter(|&a| row[a] > SUPPORT_PROB).collect();
                    if s.is_empty() {
                        vec![(0..row.len()).max_by(|&a, &b| row[a].total_cmp(&row[b])).unwrap()]
                    } else {
                        s
                    }
                })
                .collect()
        })
        .collect();
    let by_payoff: Support = eval
        .pure
        .iter()
        .enumerate()
        .map(|(i, per_i)| (0..per_i.len()).map(|x| eval.tie_set(i, x, gap)).collect())
        .collect();
    let mut out = vec![by_prob];
    if out[0] != by_payoff {
        out.push(by_payoff);
    }
    out
}

/// Give every type outside the belief's support a pure best response. Such
/// types carry no weight in anyone's payoff or in the belief update.
fn fill_null_types(prob: &StageProblem<'_>, g: &mut PartialStrategyProfile) -> Result<()> {
    let eval = prob.evaluate(g)?;
    for (i, per_i) in g.rows.iter_mut().enumerate() {
        for (x, row) in per_i.iter_mut().enumerate() {
            if prob.belief.marginals[i][x] == 0.0 {
                let best = eval.tie_set(i, x, 0.0)[0];
                row.iter_mut().for_each(|p| *p = 0.0);
                row[best] = 1.0;
            }
        }
    }
    Ok(())
}

/// Nonempty subsets of `0..n`, smallest first.
fn subsets(n: usize) -> Vec<Vec<usize>> {
    let mut out: Vec<Vec<usize>> = (1u32..(1 << n))
        .map(|mask| (0..n).filter(|a| mask & (1 << a) != 0).collect())
        .collect();
    out.sort_by_key(|s| s.len());
    out
}

/// Try every support profile of the positive-probability types, smallest
/// total support first, solving the indifference conditions on each.
fn support_enumeration(
    prob: &StageProblem<'_>,
    config: &StageConfig,
    approx: &PartialStrategyProfile,
) -> Result<Option<(PartialStrategyProfile, f64)>> {
    let agents: Vec<(usize, usize)> = approx
        .rows
        .iter()
        .enumerate()
        .flat_map(|(i, per_i)| (0..per_i.len()).map(move |x| (i, x)))
        .filter(|&(i, x)| prob.belief.marginals[i][x] > 0.0)
        .collect();
    let choices: Vec<Vec<Vec<usize>>> = agents.iter().map(|&(i, x)| subsets(approx.rows[i][x].len())).collect();
    let count = choices.iter().try_fold(1u128, |acc, c| acc.checked_mul(c.len() as u128));
    if count.is_none_or(|c| c > SUPPORT_CAP) {
        return Ok(None);
    }
    let mut profiles: Vec<Vec<usize>> = vec![Vec::new()];
    for c in &choices {
        profiles = profiles
            .into_iter()
            .flat_map(|p| (0..c.len()).map(move |k| p.iter().copied().chain([k]).collect()))
            .collect();
    }
    // Within a size, supports that disagree least with the iterate go first.
    let disagreement = |p: &Vec<usize>| -> usize {
        p.iter()
            .zip(&choices)
            .zip(&agents)
            .map(|((&k, c), &(i, x))| {
                let row = &approx.rows[i][x];
                (0..row.len()).filter(|a| c[k].contains(a) != (row[*a] > SUPPORT_PROB)).count()
            })
            .sum()
    };
    profiles.sort_by_cached_key(|p| (p.iter().zip(&choices).map(|(&k, c)| c[k].len()).sum::<usize>(), disagreement(p)));

    let mut start = approx.clone();
    fill_null_types(prob, &mut start)?;
    for picks in profiles {
        let mut support: Support = start
            .rows
            .iter()
            .map(|per_i| per_i.iter().map(|row| vec![row.iter().position(|p| *p > 0.0).unwrap_or(0)]).collect())
            .collect();
        let mut uniform = start.clone();
        for (&(i, x), (&k, c)) in agents.iter().zip(picks.iter().zip(&choices)) {
            support[i][x] = c[k].clone();
            let row = &mut uniform.rows[i][x];
            row.iter_mut().for_each(|p| *p = 0.0);
            for &a in &c[k] {
                row[a] = 1.0 / c[k].len() as f64;
            }
        }
        if let Some((mut g, _)) = newton(prob, config, support, &uniform, false, NEWTON_SHORT)? {
            fill_null_types(prob, &mut g)?;
            let r = prob.evaluate(&g)?.residual(&g);
            if r <= config.tolerance {
                return Ok(Some((g, r)));
            }
        }
    }
    Ok(None)
}

/// Try to polish `approx` into an equilibrium with residual within tolerance.
fn polish_rough(
    prob: &StageProblem<'_>,
    config: &StageConfig,
    approx: &PartialStrategyProfile,
) -> Result<Option<(PartialStrategyProfile, f64)>> {
    let eval = prob.evaluate(approx)?;
    let gap = (10.0 * eval.residual(approx)).max(config.tie_tol);
    for support in supports(&eval, approx, gap) {
        if let Some(found) = newton(prob, config, support, approx, true, NEWTON_FULL)? {
            return Ok(Some(found));
        }
    }
    Ok(None)
}

/// Diminishing-step best-response iteration from `start`, polishing at
/// geometrically spaced checkpoints. Returns the polished equilibrium and
/// the number of iterations used, or `None`.
pub(crate) fn refine_mixed(
    prob: &StageProblem<'_>,
    config: &StageConfig,
    start: PartialStrategyProfile,
) -> Result<Option<(PartialStrategyProfile, f64, usize)>> {
    if let Some((g, r)) = polish_rough(prob, config, &start)? {
        return Ok(Some((g, r, 0)));
    }
    if let Some((g, r)) = support_enumeration(prob, config, &start)? {
        return Ok(Some((g, r, 0)));
    }
    let mut gamma = start;
    let mut checkpoint = 16;
    for k in 0..config.max_iters {
        let eval = prob.evaluate(&gamma)?;
        let target = eval.softened_best_response(config.tie_tol, 0.0);
        gamma.blend(&target, 1.0 / (k as f64 + 2.0));
        if k + 1 == checkpoint || k + 1 == config.max_iters {
            checkpoint *= 2;
            if let Some((g, r)) = polish_rough(prob, config, &gamma)? {
                return Ok(Some((g, r, k + 1)));
            }
        }
    }
    Ok(None)
}
