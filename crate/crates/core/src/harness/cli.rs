use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::{json, Value};

use crate::analysis::{fit_rate, timeline_bounds_exponential, timeline_bounds_power, RateModel};
use crate::error::{Error, Result};
use crate::flow::{integrate_euler, integrate_rk45, write_flow_csv};
use crate::harness::config::{
    ExperimentConfig, ScheduleConfig, DEFAULT_STEPS_NONSTRONG, DEFAULT_STEPS_STRONG,
};
use crate::harness::generate::generate_problem;
use crate::schedule::{Schedule, ScheduleState};
use crate::solver::{
    closed_form_bound_nonstrongly, fmt_f64, fmt_opt, run_sgm, SgmOptions, TerminationStatus,
    Trajectory,
};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_DIVERGENCE: i32 = 3;
pub const EXIT_SCHEDULE: i32 = 4;

/// Version string written into JSON envelopes.
pub const VERSION: &str = concat!("v", env!("CARGO_PKG_VERSION"));

/// Default integration horizon `t_end − t₀` when neither flag nor config sets one.
pub const DEFAULT_FLOW_SPAN: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Parser)]
#[command(name = "smoothflow", version, about = "Smoothing gradient method and flow experiments")]
struct Cli {
    /// Experiment configuration (JSON).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the problem seed from the configuration.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    format: Format,
    /// Exit with status 4 when a run ends because the schedule was exhausted.
    #[arg(long, global = true)]
    strict: bool,
    /// Initial point as comma-separated values (default: zeros).
    #[arg(long, global = true, value_delimiter = ',', allow_hyphen_values = true)]
    x0: Option<Vec<f64>>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Write the generated problem data.
    Generate,
    /// Run the smoothing gradient method.
    SolveSgm(StepArgs),
    /// Integrate the flow with forward Euler (continuous schedules only).
    SolveSgfEuler(StepArgs),
    /// Integrate the flow with Dormand–Prince (continuous schedules only).
    SolveSgfRk45(FlowArgs),
    /// Timeline sandwich bounds and, with a config, the discrete bound report.
    Bounds(BoundsArgs),
    /// Fit a convergence rate to a bound or objective series.
    RateFit(RateFitArgs),
    /// The method and the integrated flow at matched gradient-evaluation budgets.
    Compare(FlowArgs),
}

#[derive(Debug, Args)]
struct StepArgs {
    #[arg(long)]
    steps: Option<usize>,
}

#[derive(Debug, Args)]
struct FlowArgs {
    #[arg(long)]
    t_end: Option<f64>,
    #[arg(long)]
    rtol: Option<f64>,
    #[arg(long)]
    atol: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
enum TimelineSchedule {
    Power,
    Exponential,
}

#[derive(Debug, Args, Serialize)]
struct BoundsArgs {
    #[arg(long, value_enum)]
    schedule: Option<TimelineSchedule>,
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long)]
    mu0: Option<f64>,
    #[arg(long)]
    steps: Option<usize>,
    #[arg(long)]
    lipschitz: Option<f64>,
    #[arg(long)]
    alpha: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ModelArg {
    Power,
    PowerLog,
    InvLog,
}

#[derive(Debug, Args)]
struct RateFitArgs {
    #[arg(long, value_enum, default_value_t = ModelArg::Power)]
    model: ModelArg,
    #[arg(long, default_value_t = 100.0)]
    window_min: f64,
    #[arg(long, default_value_t = 10_000.0)]
    window_max: f64,
    /// CSV file with a `k` column; defaults to running the method from the config.
    #[arg(long)]
    input: Option<PathBuf>,
    /// Column of the input to fit.
    #[arg(long, default_value = "bound")]
    column: String,
}

/// Parses `argv` (including the program name), runs the command and returns
/// the process exit code.
pub fn cli_main<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
        }
    };
    match run(&cli) {
        Ok(RunOutcome { exhausted }) => {
            if exhausted && cli.strict {
                eprintln!("error: smoothing schedule exhausted before the run finished");
                EXIT_SCHEDULE
            } else {
                EXIT_OK
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Config(_)
        | Error::InvalidParameter(_)
        | Error::InvalidDimension(_)
        | Error::DimensionMismatch(_)
        | Error::AffineTerm { .. }
        | Error::InvalidSeries(_)
        | Error::Unsupported(_)
        | Error::UndefinedBound(_) => EXIT_CONFIG,
        Error::NumericalDivergence { .. } | Error::Stiffness { .. } => EXIT_DIVERGENCE,
        Error::ScheduleExhausted { .. } | Error::IllPosedInterval { .. } => EXIT_SCHEDULE,
        Error::Io(_) => EXIT_FAILURE,
    }
}

struct RunOutcome {
    exhausted: bool,
}

struct Context<'a> {
    cli: &'a Cli,
    config: Option<ExperimentConfig>,
}

impl Context<'_> {
    fn config(&self) -> Result<&ExperimentConfig> {
        self.config
            .as_ref()
            .ok_or_else(|| Error::Config("this subcommand needs --config".into()))
    }

    fn out_dir(&self) -> Result<PathBuf> {
        let dir = match (&self.cli.out, self.config.as_ref().and_then(|c| c.outputs.as_ref())) {
            (Some(d), _) => d.clone(),
            (None, Some(d)) => PathBuf::from(d),
            (None, None) => PathBuf::from("."),
        };
        fs::create_dir_all(&dir)?;
        Ok(dir)
    }

    fn x0(&self, cfg: &ExperimentConfig) -> Result<Vec<f64>> {
        let x0 = self.cli.x0.clone().unwrap_or_else(|| cfg.x0());
        if x0.len() != cfg.problem.n_x {
            return Err(Error::Config(format!(
                "x0 has {} entries, n_x is {}",
                x0.len(),
                cfg.problem.n_x
            )));
        }
        Ok(x0)
    }

    fn config_value(&self) -> Value {
        self.config
            .as_ref()
            .map(|c| serde_json::to_value(c).expect("config serializes"))
            .unwrap_or(Value::Null)
    }

    fn write(&self, stem: &str, csv: impl FnOnce(&mut Vec<u8>) -> Result<()>, series: Value) -> Result<()> {
        let dir = self.out_dir()?;
        match self.cli.format {
            Format::Csv => {
                let mut buf = Vec::new();
                csv(&mut buf)?;
                fs::write(dir.join(format!("{stem}.csv")), buf)?;
            }
            Format::Json => {
                write_json(&dir.join(format!("{stem}.json")), self.config_value(), series)?;
            }
        }
        Ok(())
    }
}

fn write_json(path: &Path, config: Value, series: Value) -> Result<()> {
    let env = json!({ "config": config, "version": VERSION, "series": series });
    let mut text = serde_json::to_string_pretty(&env)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

fn run(cli: &Cli) -> Result<RunOutcome> {
    let config = match &cli.config {
        Some(path) => {
            let mut cfg = ExperimentConfig::load(path)?;
            if let Some(seed) = cli.seed {
                cfg.problem.rng_seed = seed;
            }
            Some(cfg)
        }
        None => None,
    };
    let ctx = Context { cli, config };
    match &cli.command {
        Command::Generate => cmd_generate(&ctx),
        Command::SolveSgm(a) => cmd_solve(&ctx, a, false),
        Command::SolveSgfEuler(a) => cmd_solve(&ctx, a, true),
        Command::SolveSgfRk45(a) => cmd_rk45(&ctx, a),
        Command::Bounds(a) => cmd_bounds(&ctx, a),
        Command::RateFit(a) => cmd_rate_fit(&ctx, a),
        Command::Compare(a) => cmd_compare(&ctx, a),
    }
}

fn cmd_generate(ctx: &Context) -> Result<RunOutcome> {
    let cfg = ctx.config()?;
    let g = generate_problem(&cfg.problem, cfg.smoothing)?;
    let p = &g.problem;
    let params = p.params();
    let series = json!({
        "A": g.data.a.to_rows(),
        "b": g.data.b,
        "C": g.data.c.to_rows(),
        "d": g.data.d,
        "x_star": g.data.x_star,
        "sigma": p.sigma(),
        "L": p.lipschitz(),
        "alpha": params.alpha,
        "beta": params.beta,
    });
    // The problem is matrix data, so it is always written as JSON.
    write_json(&ctx.out_dir()?.join("problem.json"), ctx.config_value(), series)?;
    Ok(RunOutcome { exhausted: false })
}

fn default_steps(sigma: f64) -> usize {
    if sigma > 0.0 {
        DEFAULT_STEPS_STRONG
    } else {
        DEFAULT_STEPS_NONSTRONG
    }
}

fn sgm_options(cfg: &ExperimentConfig, steps: Option<usize>, sigma: f64) -> SgmOptions {
    SgmOptions {
        max_steps: steps.or(cfg.run.max_steps).unwrap_or_else(|| default_steps(sigma)),
        grad_eval_budget: cfg.run.grad_eval_budget,
        tolerance: None,
        stride: cfg.run.stride,
        t0: cfg.run.t0,
        step_scale: 1.0,
    }
}

fn continuous_design(cfg: &ExperimentConfig) -> Result<crate::schedule::MuDesign> {
    cfg.schedule.design(cfg.run.t0).ok_or_else(|| {
        Error::Config(
            "flow integration needs a continuous schedule \
             (continuous_linear, continuous_exponential or continuous_reciprocal)"
                .into(),
        )
    })
}

fn trajectory_json(tr: &Trajectory) -> Value {
    serde_json::to_value(tr).expect("trajectory serializes")
}

fn cmd_solve(ctx: &Context, a: &StepArgs, euler: bool) -> Result<RunOutcome> {
    let cfg = ctx.config()?;
    let g = generate_problem(&cfg.problem, cfg.smoothing)?;
    let x0 = ctx.x0(cfg)?;
    let opts = sgm_options(cfg, a.steps, g.problem.sigma());
    let (tr, stem) = if euler {
        let design = continuous_design(cfg)?;
        (integrate_euler(&g.problem, &design, cfg.run.t0, &x0, &opts)?, "sgf_euler")
    } else {
        (run_sgm(&g.problem, &cfg.schedule.to_schedule(cfg.run.t0), &x0, &opts)?, "trajectory")
    };
    ctx.write(stem, |buf| tr.write_csv(buf), trajectory_json(&tr))?;
    Ok(RunOutcome {
        exhausted: tr.status == TerminationStatus::ScheduleExhausted,
    })
}

fn flow_params(cfg: &ExperimentConfig, a: &FlowArgs) -> (f64, f64, f64) {
    let t_end = a.t_end.or(cfg.run.t_end).unwrap_or(cfg.run.t0 + DEFAULT_FLOW_SPAN);
    (t_end, a.rtol.unwrap_or(cfg.run.rtol), a.atol.unwrap_or(cfg.run.atol))
}

fn cmd_rk45(ctx: &Context, a: &FlowArgs) -> Result<RunOutcome> {
    let cfg = ctx.config()?;
    let g = generate_problem(&cfg.problem, cfg.smoothing)?;
    let design = continuous_design(cfg)?;
    let x0 = ctx.x0(cfg)?;
    let (t_end, rtol, atol) = flow_params(cfg, a);
    let run = integrate_rk45(&g.problem, &design, &x0, cfg.run.t0, t_end, rtol, atol)?;
    let series = serde_json::to_value(&run)?;
    ctx.write("sgf_rk45", |buf| write_flow_csv(&run.samples, buf), series)?;
    Ok(RunOutcome { exhausted: false })
}

fn cmd_compare(ctx: &Context, a: &FlowArgs) -> Result<RunOutcome> {
    let cfg = ctx.config()?;
    let g = generate_problem(&cfg.problem, cfg.smoothing)?;
    let design = continuous_design(cfg)?;
    let x0 = ctx.x0(cfg)?;
    let (t_end, rtol, atol) = flow_params(cfg, a);
    let rk = integrate_rk45(&g.problem, &design, &x0, cfg.run.t0, t_end, rtol, atol)?;
    let opts = SgmOptions {
        max_steps: usize::MAX,
        grad_eval_budget: Some(rk.grad_evals),
        ..sgm_options(cfg, None, g.problem.sigma())
    };
    let sgm = run_sgm(&g.problem, &cfg.schedule.to_schedule(cfg.run.t0), &x0, &opts)?;

    #[derive(Serialize)]
    struct Row {
        grad_evals: u64,
        t: f64,
        mu: f64,
        f_true: f64,
    }
    let sgm_rows: Vec<Row> = sgm
        .records
        .iter()
        .map(|r| Row { grad_evals: r.grad_evals, t: r.t, mu: r.mu, f_true: r.f_true })
        .collect();
    let rk_rows: Vec<Row> = rk
        .samples
        .iter()
        .map(|s| Row { grad_evals: s.grad_evals, t: s.t, mu: s.mu, f_true: s.f_true })
        .collect();
    let series = json!({ "SGM": sgm_rows, "SGF-RK45": rk_rows });
    ctx.write(
        "compare",
        |buf| {
            writeln!(buf, "series,grad_evals,t,mu,f_true")?;
            for (name, rows) in [("SGM", &sgm_rows), ("SGF-RK45", &rk_rows)] {
                for r in rows {
                    writeln!(
                        buf,
                        "{name},{},{},{},{}",
                        r.grad_evals,
                        fmt_f64(r.t),
                        fmt_f64(r.mu),
                        fmt_f64(r.f_true)
                    )?;
                }
            }
            Ok(())
        },
        series,
    )?;
    Ok(RunOutcome {
        exhausted: sgm.status == TerminationStatus::ScheduleExhausted,
    })
}

#[derive(Debug, Serialize)]
struct TimelineRow {
    k: usize,
    t_actual: f64,
    t_lower: f64,
    t_upper: f64,
    mu_actual: f64,
    mu_lower: f64,
    mu_upper: f64,
    k_lower: Option<f64>,
    k_upper: Option<f64>,
}

const DEFAULT_TIMELINE_STEPS: usize = 1000;

fn cmd_bounds(ctx: &Context, a: &BoundsArgs) -> Result<RunOutcome> {
    let generated = match &ctx.config {
        Some(cfg) => Some((cfg, generate_problem(&cfg.problem, cfg.smoothing)?)),
        None => None,
    };
    let (cfg_lip, cfg_alpha) = generated
        .as_ref()
        .map(|(_, g)| (g.problem.lipschitz(), g.problem.params().alpha))
        .unwrap_or((0.0, 1.0));
    let lip = a.lipschitz.unwrap_or(cfg_lip);
    let alpha = a.alpha.unwrap_or(cfg_alpha);
    let cfg_sched = ctx.config.as_ref().map(|c| c.schedule.clone());
    let sched = match (a.schedule, &cfg_sched) {
        (Some(TimelineSchedule::Power), _) => Schedule::PowerDecay {
            mu0: a.mu0.unwrap_or(1.0),
            gamma: a.gamma.ok_or_else(|| Error::Config("--schedule power needs --gamma".into()))?,
        },
        (Some(TimelineSchedule::Exponential), _) => Schedule::ExpDecay {
            mu0: a.mu0.unwrap_or(1.0),
            lambda: a
                .lambda
                .ok_or_else(|| Error::Config("--schedule exponential needs --lambda".into()))?,
        },
        (None, Some(ScheduleConfig::Power { mu0, gamma })) => Schedule::PowerDecay {
            mu0: a.mu0.unwrap_or(*mu0),
            gamma: a.gamma.unwrap_or(*gamma),
        },
        (None, Some(ScheduleConfig::Exponential { mu0, lambda })) => Schedule::ExpDecay {
            mu0: a.mu0.unwrap_or(*mu0),
            lambda: a.lambda.unwrap_or(*lambda),
        },
        _ => {
            return Err(Error::Config(
                "timeline bounds need a power or exponential schedule (--schedule or config)".into(),
            ))
        }
    };
    sched.validate().map_err(|e| Error::Config(e.to_string()))?;
    let steps = a
        .steps
        .or(ctx.config.as_ref().and_then(|c| c.run.max_steps))
        .unwrap_or(DEFAULT_TIMELINE_STEPS);

    let t0 = ctx.config.as_ref().map(|c| c.run.t0).unwrap_or(1.0);
    let mut state = ScheduleState::initial(&sched, t0, lip, alpha)?;
    let mut rows = Vec::with_capacity(steps);
    let mut exhausted = false;
    for _ in 0..steps {
        state = match state.advance(&sched, 0.0, lip, alpha) {
            Ok(s) => s,
            Err(Error::ScheduleExhausted { .. }) => {
                exhausted = true;
                break;
            }
            Err(e) => return Err(e),
        };
        let elapsed = state.sum_s();
        let b = match sched {
            Schedule::PowerDecay { mu0, gamma } => {
                timeline_bounds_power(lip, alpha, mu0, gamma, state.k, elapsed)?
            }
            Schedule::ExpDecay { mu0, lambda } => {
                timeline_bounds_exponential(lip, alpha, mu0, lambda, state.k, elapsed)?
            }
            _ => unreachable!("validated above"),
        };
        rows.push(TimelineRow {
            k: state.k,
            t_actual: state.t,
            t_lower: t0 + b.t_lower,
            t_upper: t0 + b.t_upper,
            mu_actual: state.mu,
            mu_lower: b.mu_lower,
            mu_upper: b.mu_upper,
            k_lower: b.k_lower,
            k_upper: b.k_upper,
        });
    }
    let series = serde_json::to_value(&rows)?;
    ctx.write(
        "timeline",
        |buf| {
            writeln!(buf, "k,t_actual,t_lower,t_upper,mu_actual,mu_lower,mu_upper,k_lower,k_upper")?;
            for r in &rows {
                writeln!(
                    buf,
                    "{},{},{},{},{},{},{},{},{}",
                    r.k,
                    fmt_f64(r.t_actual),
                    fmt_f64(r.t_lower),
                    fmt_f64(r.t_upper),
                    fmt_f64(r.mu_actual),
                    fmt_f64(r.mu_lower),
                    fmt_f64(r.mu_upper),
                    fmt_opt(r.k_lower),
                    fmt_opt(r.k_upper)
                )?;
            }
            Ok(())
        },
        series,
    )?;

    if let Some((cfg, g)) = &generated {
        bound_report(ctx, cfg, g)?;
    }
    Ok(RunOutcome { exhausted })
}

/// Discrete bound along a run of the configured problem, with the closed form
/// when it applies (`σ = 0`, power decay with `γ ∈ (0, 1]`).
fn bound_report(
    ctx: &Context,
    cfg: &ExperimentConfig,
    g: &crate::harness::generate::GeneratedProblem,
) -> Result<()> {
    let p = &g.problem;
    let x0 = ctx.x0(cfg)?;
    let opts = sgm_options(cfg, None, p.sigma());
    let sched = cfg.schedule.to_schedule(cfg.run.t0);
    let tr = run_sgm(p, &sched, &x0, &opts)?;
    let d2 = crate::linalg::dist_sq(&x0, p.optimum().expect("generated problems know x*"));
    let params = p.params();
    let closed = |k: usize| -> Option<f64> {
        match cfg.schedule {
            ScheduleConfig::Power { mu0, gamma } if p.sigma() == 0.0 && gamma <= 1.0 && k >= 1 => {
                closed_form_bound_nonstrongly(p.lipschitz(), params.alpha, params.beta, mu0, gamma, d2, k).ok()
            }
            _ => None,
        }
    };
    #[derive(Serialize)]
    struct Row {
        k: usize,
        f_gap: f64,
        bound_discrete: Option<f64>,
        closed_form: Option<f64>,
    }
    let optimal = p.optimal_value().unwrap_or(0.0);
    let rows: Vec<Row> = tr
        .records
        .iter()
        .map(|r| Row {
            k: r.k,
            f_gap: r.f_true - optimal,
            bound_discrete: r.bound,
            closed_form: closed(r.k),
        })
        .collect();
    let series = serde_json::to_value(&rows)?;
    ctx.write(
        "bound_report",
        |buf| {
            writeln!(buf, "k,f_gap,bound_discrete,closed_form")?;
            for r in &rows {
                writeln!(
                    buf,
                    "{},{},{},{}",
                    r.k,
                    fmt_f64(r.f_gap),
                    fmt_opt(r.bound_discrete),
                    fmt_opt(r.closed_form)
                )?;
            }
            Ok(())
        },
        series,
    )
}

fn read_series_csv(path: &Path, column: &str) -> Result<Vec<(f64, f64)>> {
    let text = fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
    let mut lines = text.lines();
    let header: Vec<&str> = lines
        .next()
        .ok_or_else(|| Error::InvalidSeries("empty input".into()))?
        .split(',')
        .collect();
    let find = |name: &str| {
        header
            .iter()
            .position(|h| h.trim() == name)
            .ok_or_else(|| Error::InvalidSeries(format!("input has no column {name:?}")))
    };
    let (ik, iv) = (find("k")?, find(column)?);
    let mut out = Vec::new();
    for (n, line) in lines.enumerate() {
        let fields: Vec<&str> = line.split(',').collect();
        let get = |i: usize| fields.get(i).map(|s| s.trim()).unwrap_or("");
        if get(iv).is_empty() {
            continue;
        }
        let parse = |s: &str| {
            s.parse::<f64>()
                .map_err(|_| Error::InvalidSeries(format!("line {}: cannot parse {s:?}", n + 2)))
        };
        out.push((parse(get(ik))?, parse(get(iv))?));
    }
    Ok(out)
}

fn cmd_rate_fit(ctx: &Context, a: &RateFitArgs) -> Result<RunOutcome> {
    let model = match a.model {
        ModelArg::Power => RateModel::Power,
        ModelArg::PowerLog => RateModel::PowerLog,
        ModelArg::InvLog => RateModel::InvLog,
    };
    if a.input.is_none() && !matches!(a.column.as_str(), "bound" | "f_true" | "f_tilde") {
        return Err(Error::Config(format!(
            "without --input the column must be bound, f_true or f_tilde, got {:?}",
            a.column
        )));
    }
    let series = match &a.input {
        Some(path) => read_series_csv(path, &a.column)?,
        None => {
            let cfg = ctx.config()?;
            let g = generate_problem(&cfg.problem, cfg.smoothing)?;
            let x0 = ctx.x0(cfg)?;
            let steps = cfg.run.max_steps.unwrap_or(a.window_max.ceil() as usize);
            let opts = sgm_options(cfg, Some(steps), g.problem.sigma());
            let tr = run_sgm(&g.problem, &cfg.schedule.to_schedule(cfg.run.t0), &x0, &opts)?;
            let optimal = g.problem.optimal_value().unwrap_or(0.0);
            tr.records
                .iter()
                .filter_map(|r| {
                    let v = match a.column.as_str() {
                        "bound" => r.bound,
                        "f_true" => Some(r.f_true - optimal),
                        "f_tilde" => Some(r.f_tilde - optimal),
                        _ => None,
                    }?;
                    Some((r.k as f64, v))
                })
                .collect()
        }
    };
    let fit = fit_rate(&series, model, (a.window_min, a.window_max))?;
    let value = serde_json::to_value(&fit)?;
    ctx.write(
        "rate_fit",
        |buf| {
            writeln!(buf, "model,exponent,intercept,log_factor,residual,window_min,window_max,points")?;
            writeln!(
                buf,
                "{},{},{},{},{},{},{},{}",
                match fit.model {
                    RateModel::Power => "power",
                    RateModel::PowerLog => "power_log",
                    RateModel::InvLog => "inv_log",
                },
                fmt_f64(fit.exponent),
                fmt_f64(fit.intercept),
                fit.log_factor,
                fmt_f64(fit.residual),
                fmt_f64(fit.window.0),
                fmt_f64(fit.window.1),
                fit.points
            )?;
            Ok(())
        },
        value,
    )?;
    Ok(RunOutcome { exhausted: false })
}
