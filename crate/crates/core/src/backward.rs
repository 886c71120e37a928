//! Backward recursion over the belief grid: value functions `V_t^i` and the
//! equilibrium generating function `theta_t`, from the last period down to
//! the first.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::belief::{BeliefVector, InterpolationScheme, SimplexGrid};
use crate::config::RunConfig;
use crate::error::{Result, SpbeError};
use crate::game::GameSpec;
use crate::stage::{solve_stage, Continuation, PartialStrategyProfile, StageMethod, StageProblem, ZeroContinuation};

/// `layers[t][g][i][x]` for `t` in `0..=horizon`; the last layer is zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValueTable {
    pub layers: Vec<Vec<Vec<Vec<f64>>>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratorEntry {
    pub gamma: PartialStrategyProfile,
    pub residual: f64,
    pub method: StageMethod,
    pub iterations: usize,
    pub success: bool,
}

/// `layers[t][g]` for `t` in `0..horizon`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratorTable {
    pub layers: Vec<Vec<GeneratorEntry>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointFailure {
    pub t: usize,
    pub grid_index: usize,
    pub residual: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub grid_points: usize,
    pub stage_solves: usize,
    pub max_residual: f64,
    /// Per period, the largest stage residual over the grid.
    pub max_residual_by_t: Vec<f64>,
    /// How many grid points each method settled, `[br, eps, enum]`.
    pub method_counts: [usize; 3],
    pub failures: Vec<PointFailure>,
}

/// `V_{t+1}` read off a tabulated layer by grid interpolation.
pub struct LayerContinuation<'a> {
    pub grid: &'a SimplexGrid,
    pub layer: &'a [Vec<Vec<f64>>],
    pub scheme: InterpolationScheme,
}

impl Continuation for LayerContinuation<'_> {
    fn values(&self, belief: &BeliefVector) -> Result<Vec<Vec<f64>>> {
        let weights = self.grid.weights(belief, self.scheme)?;
        let mut out: Vec<Vec<f64>> = self.layer[0].iter().map(|r| vec![0.0; r.len()]).collect();
        for (g, w) in weights {
            for (o, v) in out.iter_mut().flatten().zip(self.layer[g].iter().flatten()) {
                *o += w * v;
            }
        }
        Ok(out)
    }
}

#[derive(Debug, Clone)]
pub struct BackwardOutput {
    pub values: ValueTable,
    pub generator: GeneratorTable,
    pub report: RunReport,
}

/// Solve the stage game at `belief` in period `t` given the tabulated next
/// layer, then return the solution with the values it induces.
pub fn solve_at(
    spec: &GameSpec,
    grid: &SimplexGrid,
    next_layer: &[Vec<Vec<f64>>],
    t: usize,
    belief: BeliefVector,
    config: &RunConfig,
) -> Result<(GeneratorEntry, Vec<Vec<f64>>)> {
    let interp = LayerContinuation {
        grid,
        layer: next_layer,
        scheme: config.interpolation,
    };
    let zero = ZeroContinuation {
        type_space_sizes: spec.type_space_sizes.clone(),
    };
    let continuation: &dyn Continuation = if t + 1 < spec.horizon { &interp } else { &zero };
    let prob = StageProblem {
        spec,
        t,
        belief,
        continuation,
    };
    let res = solve_stage(&prob, &config.method.fallback_order(), &config.stage_config())?;
    let eval = prob.evaluate(&res.gamma)?;
    let values = (0..spec.num_players)
        .map(|i| {
            (0..spec.type_space_sizes[i])
                .map(|x| eval.payoff(i, x, &res.gamma.rows[i][x]))
                .collect()
        })
        .collect();
    Ok((
        GeneratorEntry {
            gamma: res.gamma,
            residual: res.residual,
            method: res.method,
            iterations: res.iterations,
            success: res.success,
        },
        values,
    ))
}

/// Run the backward recursion on `grid`. Grid points in one period are
/// solved in parallel; failed points keep their best profile and are listed
/// in the report.
pub fn backward_pass(spec: &GameSpec, grid: &SimplexGrid, config: &RunConfig) -> Result<BackwardOutput> {
    if grid.sizes() != spec.type_space_sizes.as_slice() {
        return Err(SpbeError::Dimension("grid does not match the game's type spaces".into()));
    }
    let horizon = spec.horizon;
    let zero_layer: Vec<Vec<Vec<f64>>> =
        vec![spec.type_space_sizes.iter().map(|&s| vec![0.0; s]).collect(); grid.len()];
    let mut value_layers = vec![zero_layer; horizon + 1];
    let mut gen_layers: Vec<Vec<GeneratorEntry>> = vec![Vec::new(); horizon];
    let mut report = RunReport {
        grid_points: grid.len(),
        max_residual_by_t: vec![0.0; horizon],
        ..RunReport::default()
    };

    for t in (0..horizon).rev() {
        let next = &value_layers[t + 1];
        let solved: Vec<(GeneratorEntry, Vec<Vec<f64>>)> = (0..grid.len())
            .into_par_iter()
            .map(|g| solve_at(spec, grid, next, t, grid.point(g), config))
            .collect::<Result<_>>()?;
        let mut layer = Vec::with_capacity(grid.len());
        let mut entries = Vec::with_capacity(grid.len());
        for (g, (entry, values)) in solved.into_iter().enumerate() {
            report.stage_solves += 1;
            report.max_residual = report.max_residual.max(entry.residual);
            report.max_residual_by_t[t] = report.max_residual_by_t[t].max(entry.residual);
            let slot = match entry.method {
                StageMethod::BrIteration => 0,
                StageMethod::EpsilonPath => 1,
                StageMethod::Enumeration => 2,
            };
            if entry.success {
                report.method_counts[slot] += 1;
            } else {
                report.failures.push(PointFailure {
                    t,
                    grid_index: g,
                    residual: entry.residual,
                });
            }
            layer.push(values);
            entries.push(entry);
        }
        value_layers[t] = layer;
        gen_layers[t] = entries;
    }
    Ok(BackwardOutput {
        values: ValueTable { layers: value_layers },
        generator: GeneratorTable { layers: gen_layers },
        report,
    })
}

/// `V_t^i(pi, x_i)` by interpolation over layer `t` (0-based, `t <= horizon`).
pub fn evaluate_value(
    values: &ValueTable,
    grid: &SimplexGrid,
    t: usize,
    pi: &BeliefVector,
    i: usize,
    x_i: usize,
    scheme: InterpolationScheme,
) -> Result<f64> {
    let layer = values.layers.get(t).ok_or(SpbeError::TimeRange {
        t,
        lo: 0,
        hi: values.layers.len().saturating_sub(1),
    })?;
    if layer.len() != grid.len() {
        return Err(SpbeError::Dimension("value layer does not match grid".into()));
    }
    grid.interpolate_with(pi, scheme, |g| layer[g][i][x_i])
}
