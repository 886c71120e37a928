use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::json;
use spbe_core::backward::{evaluate_value, solve_at};
use spbe_core::forward::{analytic_expected_reward, simulate, ThetaSource};
use spbe_core::io::{read_game, write_trajectories};
use spbe_core::verify::{factorization_check, AuditConfig};
use spbe_core::{
    audit_spbe, backward_pass, check_structured, forward_pass, games, BeliefVector, EquilibriumFile, GameSpec,
    InterpolationScheme, RunConfig, SimplexGrid, SpbeError, StageMethod, ThetaMode,
};

const EXIT_VERIFY_FAILED: u8 = 1;
const EXIT_INPUT: u8 = 2;
const EXIT_CAP: u8 = 3;

/// Joint brute-force enumeration limit used by the factorization check.
const FACTORIZATION_CAP: u128 = 10_000_000;

#[derive(Parser)]
#[command(name = "spbe", version, about = "Structured perfect Bayesian equilibria of finite dynamic games")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Backward pass on a belief grid, then forward pass over histories.
    Solve(SolveArgs),
    /// Audit an equilibrium file for profitable deviations.
    Verify(VerifyArgs),
    /// Sample trajectories from an equilibrium.
    Simulate(SimulateArgs),
    /// Print values and prescriptions at a period and belief.
    Inspect(InspectArgs),
    /// Write one of the built-in reference games as JSON.
    Example(ExampleArgs),
}

#[derive(Args)]
struct SolveArgs {
    #[arg(long)]
    game: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 10)]
    grid_resolution: usize,
    /// First stage method tried: br, enum or eps. The others follow as fallbacks.
    #[arg(long, default_value = "br", value_parser = parse_method)]
    method: StageMethod,
    /// Fixed-point residual tolerance.
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long)]
    tie_tol: Option<f64>,
    #[arg(long)]
    damping: Option<f64>,
    #[arg(long)]
    max_iters: Option<usize>,
    /// Comma-separated, strictly decreasing.
    #[arg(long, value_delimiter = ',')]
    epsilon_schedule: Option<Vec<f64>>,
    #[arg(long)]
    enum_cap: Option<u128>,
    #[arg(long)]
    node_cap: Option<usize>,
    /// Number of periods of the history tree to store.
    #[arg(long)]
    depth_cap: Option<usize>,
    /// Rescale probability rows that are within 1e-6 of summing to one.
    #[arg(long)]
    normalize: bool,
    /// Reuse the nearest grid point's profile off the grid instead of re-solving.
    #[arg(long)]
    theta_nearest: bool,
    /// Use nearest-node lookup instead of simplicial interpolation for values.
    #[arg(long)]
    nearest_values: bool,
    /// Plain damped best-response iteration, without the mixed-equilibrium refinement.
    #[arg(long)]
    no_refine: bool,
}

#[derive(Args)]
struct VerifyArgs {
    #[arg(long)]
    game: PathBuf,
    #[arg(long)]
    equilibrium: PathBuf,
    /// Tolerance for every check. By default gains are held to
    /// 1e-6 * T * max|R|, belief factorization to 1e-9 and the
    /// structured-policy comparison to 1e-12.
    #[arg(long)]
    tol: Option<f64>,
    /// Also enumerate every pure continuation strategy.
    #[arg(long)]
    full_deviations: bool,
    #[arg(long, default_value_t = 100_000)]
    strategy_cap: u128,
    /// Write the report here as well as to standard output.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long)]
    game: PathBuf,
    #[arg(long)]
    equilibrium: PathBuf,
    #[arg(long, default_value_t = 1000)]
    episodes: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Line-delimited JSON trajectory dump.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct InspectArgs {
    #[arg(long)]
    equilibrium: PathBuf,
    /// Needed to re-solve at a belief off the grid.
    #[arg(long)]
    game: Option<PathBuf>,
    /// Period, counted from 1; T + 1 is the terminal period.
    #[arg(long)]
    period: usize,
    /// Marginals separated by ';', entries by ',', e.g. "0.41,0.59;1".
    #[arg(long)]
    belief: Option<String>,
}

#[derive(Args)]
struct ExampleArgs {
    /// matching_pennies, signaling, coordination, single_agent_mdp,
    /// zero_sum_dominance or dominant_action.
    name: String,
    #[arg(long)]
    out: PathBuf,
}

fn parse_method(s: &str) -> Result<StageMethod, String> {
    StageMethod::parse(s).ok_or_else(|| format!("unknown method {s:?}, expected br, enum or eps"))
}

enum Failure {
    Verification,
    Error(SpbeError),
}

impl From<SpbeError> for Failure {
    fn from(e: SpbeError) -> Self {
        Failure::Error(e)
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Error(e.into())
    }
}

type CmdResult = Result<(), Failure>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Ok(v) = std::env::var("SPBE_THREADS") {
        match v.parse::<usize>() {
            Ok(n) if n > 0 => {
                // Fails only if a pool already exists, which cannot happen here.
                let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
            }
            _ => {
                eprintln!("error: SPBE_THREADS must be a positive integer, got {v:?}");
                return ExitCode::from(EXIT_INPUT);
            }
        }
    }
    let outcome = match cli.command {
        Command::Solve(a) => cmd_solve(a),
        Command::Verify(a) => cmd_verify(a),
        Command::Simulate(a) => cmd_simulate(a),
        Command::Inspect(a) => cmd_inspect(a),
        Command::Example(a) => cmd_example(a),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Verification) => ExitCode::from(EXIT_VERIFY_FAILED),
        Err(Failure::Error(e)) => {
            eprintln!("error: {e}");
            if let SpbeError::Validation(report) = &e {
                eprint!("{report}");
            }
            ExitCode::from(match e {
                SpbeError::CapExceeded { .. } => EXIT_CAP,
                _ => EXIT_INPUT,
            })
        }
    }
}

fn load_game(path: &Path, normalize: bool) -> Result<GameSpec, SpbeError> {
    let mut spec = read_game(path).map_err(|e| with_path(e, path))?;
    if normalize {
        let n = spec.normalize();
        if n > 0 {
            eprintln!("normalized {n} probability rows");
        }
    }
    spec.validated()
}

fn load_equilibrium(path: &Path) -> Result<EquilibriumFile, SpbeError> {
    EquilibriumFile::read(path).map_err(|e| with_path(e, path))
}

fn with_path(e: SpbeError, path: &Path) -> SpbeError {
    match e {
        SpbeError::Io(io) => SpbeError::Io(std::io::Error::new(io.kind(), format!("{}: {io}", path.display()))),
        SpbeError::Json(j) => SpbeError::Schema(format!("{}: {j}", path.display())),
        other => other,
    }
}

fn print_json(value: &serde_json::Value) -> Result<(), SpbeError> {
    let mut out = std::io::stdout().lock();
    serde_json::to_writer_pretty(&mut out, value)?;
    writeln!(out)?;
    Ok(())
}

fn cmd_solve(a: SolveArgs) -> CmdResult {
    let spec = load_game(&a.game, a.normalize)?;
    let mut cfg = RunConfig {
        grid_resolution: a.grid_resolution,
        method: a.method,
        normalize: a.normalize,
        depth_cap: a.depth_cap,
        refine: !a.no_refine,
        ..RunConfig::default()
    };
    if let Some(v) = a.tol {
        cfg.tolerance = v;
    }
    if let Some(v) = a.tie_tol {
        cfg.tie_tol = v;
    }
    if let Some(v) = a.damping {
        cfg.damping = v;
    }
    if let Some(v) = a.max_iters {
        cfg.max_iters = v;
    }
    if let Some(v) = a.epsilon_schedule {
        cfg.epsilon_schedule = v;
    }
    if let Some(v) = a.enum_cap {
        cfg.enum_cap = v;
    }
    if let Some(v) = a.node_cap {
        cfg.node_cap = v;
    }
    if a.theta_nearest {
        cfg.theta_mode = ThetaMode::Nearest;
    }
    if a.nearest_values {
        cfg.interpolation = InterpolationScheme::Nearest;
    }
    cfg.validate(Some(&spec))?;

    let grid = SimplexGrid::new(&spec.type_space_sizes, cfg.grid_resolution)?;
    let tables = backward_pass(&spec, &grid, &cfg)?;
    let source = ThetaSource {
        spec: &spec,
        grid: &grid,
        tables: &tables,
        config: &cfg,
    };
    let depth = cfg.depth_cap.unwrap_or(spec.horizon);
    let profile = forward_pass(&spec, &source, depth, cfg.node_cap)?;
    if !profile.complete {
        eprintln!(
            "warning: history tree stored for {} of {depth} periods (node cap {})",
            profile.depth, cfg.node_cap
        );
    }
    let file = EquilibriumFile::new(&spec, &cfg, tables, profile);
    file.write(&a.out)?;

    let r = &file.report;
    for f in &r.failures {
        eprintln!("warning: stage solve failed at t={} grid point {} (residual {:e})", f.t, f.grid_index, f.residual);
    }
    print_json(&json!({
        "out": a.out.display().to_string(),
        "grid_points": r.grid_points,
        "stage_solves": r.stage_solves,
        "max_residual": r.max_residual,
        "max_residual_by_t": r.max_residual_by_t,
        "method_counts": { "br": r.method_counts[0], "eps": r.method_counts[1], "enum": r.method_counts[2] },
        "failures": r.failures.len(),
        "profile_nodes": file.profile.nodes.len(),
        "profile_complete": file.profile.complete,
        "profile_max_residual": file.profile.max_residual(),
    }))?;
    Ok(())
}

fn cmd_verify(a: VerifyArgs) -> CmdResult {
    let spec = load_game(&a.game, false)?;
    let file = load_equilibrium(&a.equilibrium)?;
    file.check_against(&spec)?;
    let (tol, belief_tol, structured_tol) = match a.tol {
        Some(t) if t > 0.0 => (t, t, t),
        Some(t) => return Err(SpbeError::InvalidConfig(format!("tolerance must be positive, got {t}")).into()),
        None => (file.config.gain_tolerance(&spec), 1e-9, 1e-12),
    };
    let audit_cfg = AuditConfig {
        tolerance: tol,
        full_deviations: a.full_deviations,
        strategy_cap: a.strategy_cap,
    };
    let audit = audit_spbe(&spec, &file.profile, &audit_cfg)?;
    let structured = check_structured(&file.profile, structured_tol);
    let factorization = factorization_check(&spec, &file.profile, FACTORIZATION_CAP)?;
    let factorization_ok = factorization.max_abs_error <= belief_tol;
    let pass = audit.pass && structured.holds && factorization_ok;

    if let Some(e) = audit.entries.iter().filter(|e| e.max_gain > tol).max_by(|x, y| x.max_gain.total_cmp(&y.max_gain)) {
        eprintln!(
            "largest gain {:e} for player {} at t={}: {}",
            e.max_gain,
            e.player,
            e.t,
            e.witness.as_deref().unwrap_or("")
        );
    }
    if let (false, Some(h)) = (factorization_ok, &factorization.worst_history) {
        eprintln!("stored beliefs disagree with Bayes' rule by {:e} at history {h:?}", factorization.max_abs_error);
    }
    if let Some((h1, h2)) = &structured.witness {
        eprintln!("equal beliefs but different prescriptions at histories {h1:?} and {h2:?}");
    }
    let report = json!({
        "pass": pass,
        "audit": audit,
        "structured": structured,
        "factorization": factorization,
        "factorization_pass": factorization_ok,
    });
    if let Some(out) = &a.out {
        std::fs::write(out, serde_json::to_string_pretty(&report).map_err(SpbeError::from)?)?;
    }
    print_json(&report)?;
    if pass {
        Ok(())
    } else {
        Err(Failure::Verification)
    }
}

fn cmd_simulate(a: SimulateArgs) -> CmdResult {
    let spec = load_game(&a.game, false)?;
    let file = load_equilibrium(&a.equilibrium)?;
    file.check_against(&spec)?;
    let grid = file.grid()?;
    let tables = file.tables();
    let source = ThetaSource {
        spec: &spec,
        grid: &grid,
        tables: &tables,
        config: &file.config,
    };
    let sim = simulate(&spec, &file.profile, Some(&source), a.episodes, a.seed)?;
    if let Some(out) = &a.out {
        let mut w = BufWriter::new(File::create(out)?);
        write_trajectories(&mut w, &sim.trajectories)?;
        w.flush()?;
    }
    let mut summary = json!({
        "episodes": sim.episodes,
        "seed": a.seed,
        "rng": sim.rng,
        "means": sim.means,
        "std_errors": sim.std_errors,
    });
    match analytic_expected_reward(&spec, &file.profile) {
        Ok(j) => summary["analytic"] = json!(j),
        Err(SpbeError::CapExceeded { .. }) => {
            eprintln!("warning: history tree incomplete, analytic expected reward omitted")
        }
        Err(e) => return Err(e.into()),
    }
    print_json(&summary)?;
    Ok(())
}

fn parse_belief(text: &str, sizes: &[usize]) -> Result<BeliefVector, SpbeError> {
    let marginals = text
        .split(';')
        .map(|part| {
            part.split(',')
                .map(|v| {
                    v.trim()
                        .parse::<f64>()
                        .map_err(|_| SpbeError::InvalidBelief(format!("not a number: {v:?}")))
                })
                .collect::<Result<Vec<_>, _>>()
        })
        .collect::<Result<Vec<_>, _>>()?;
    let belief = BeliefVector::new(marginals);
    belief.check(sizes)?;
    Ok(belief)
}

fn fmt_row(v: &[f64]) -> String {
    let parts: Vec<String> = v.iter().map(|x| format!("{x:.6}")).collect();
    format!("[{}]", parts.join(", "))
}

fn cmd_inspect(a: InspectArgs) -> CmdResult {
    let file = load_equilibrium(&a.equilibrium)?;
    let horizon = file.horizon;
    if a.period == 0 || a.period > horizon + 1 {
        return Err(SpbeError::TimeRange {
            t: a.period,
            lo: 1,
            hi: horizon + 1,
        }
        .into());
    }
    let t = a.period - 1;
    let grid = file.grid()?;
    let sizes = &file.grid.type_space_sizes;
    let belief = match &a.belief {
        Some(text) => parse_belief(text, sizes)?,
        None => grid.point(0),
    };
    let g = grid.nearest(&belief)?;
    let node = grid.point(g);
    let mut out = std::io::stdout().lock();
    writeln!(out, "period {} of {} (t = {t} in files)", a.period, horizon)?;
    writeln!(out, "nearest grid point #{g}: {}", node.marginals.iter().map(|m| fmt_row(m)).collect::<Vec<_>>().join(" ; "))?;
    for (i, v) in file.values.layers[t][g].iter().enumerate() {
        writeln!(out, "  V player {i}: {}", fmt_row(v))?;
    }
    if let Some(entry) = file.generator.layers.get(t).map(|l| &l[g]) {
        writeln!(
            out,
            "  theta (method {:?}, residual {:e}, success {}):",
            entry.method, entry.residual, entry.success
        )?;
        for (i, rows) in entry.gamma.rows.iter().enumerate() {
            for (x, row) in rows.iter().enumerate() {
                writeln!(out, "    player {i} type {x}: {}", fmt_row(row))?;
            }
        }
    }
    if a.belief.is_some() {
        writeln!(
            out,
            "belief {}",
            belief.marginals.iter().map(|m| fmt_row(m)).collect::<Vec<_>>().join(" ; ")
        )?;
        for i in 0..sizes.len() {
            let v: Vec<f64> = (0..sizes[i])
                .map(|x| evaluate_value(&file.values, &grid, t, &belief, i, x, file.config.interpolation))
                .collect::<Result<_, _>>()?;
            writeln!(out, "  interpolated V player {i}: {}", fmt_row(&v))?;
        }
        if t < horizon && file.config.theta_mode == ThetaMode::ReSolve {
            if let Some(path) = &a.game {
                let spec = load_game(path, file.config.normalize)?;
                file.check_against(&spec)?;
                let (entry, values) = solve_at(&spec, &grid, &file.values.layers[t + 1], t, belief, &file.config)?;
                writeln!(out, "  re-solved (method {:?}, residual {:e}):", entry.method, entry.residual)?;
                for (i, rows) in entry.gamma.rows.iter().enumerate() {
                    for (x, row) in rows.iter().enumerate() {
                        writeln!(out, "    player {i} type {x}: {}", fmt_row(row))?;
                    }
                    writeln!(out, "    V player {i}: {}", fmt_row(&values[i]))?;
                }
            }
        }
    }
    Ok(())
}

fn cmd_example(a: ExampleArgs) -> CmdResult {
    let spec = games::by_name(&a.name)
        .ok_or_else(|| SpbeError::InvalidConfig(format!("no built-in game named {:?}", a.name)))?;
    std::fs::write(&a.out, serde_json::to_string_pretty(&spec).map_err(SpbeError::from)?)?;
    Ok(())
}
