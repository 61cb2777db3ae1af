use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use toolsched::env::BaselineKind;
use toolsched::harness::run::{self, format_comparison, format_report, trace_scenario_path};
use toolsched::harness::svg::{render_curves, render_trajectory, CurveSeries, FlatLine};
use toolsched::harness::tables::{self, ReportRow};
use toolsched::harness::{trace, EvalJob, HarnessError, Subject, TrainJob};
use toolsched::learner::PpoConfig;
use toolsched::world::{random_scenario, WorldConfig};

#[derive(Parser)]
#[command(name = "toolsched", version, about = "Energy-aware tool scheduling for a drifting UAV")]
struct Cli {
    /// Output root (overrides TOOLSCHED_OUT; default ./out).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print, generate or validate scenario files.
    #[command(subcommand)]
    Scenario(ScenarioCmd),
    /// Train PPO, writing a checkpoint and learning curve per seed.
    Train(TrainArgs),
    /// Evaluate a baseline or checkpoint, writing report CSVs and traces.
    Eval(EvalArgs),
    /// Rank methods from their report CSVs with pairwise rank-sum tests.
    Compare {
        #[arg(required = true, num_args = 2..)]
        reports: Vec<PathBuf>,
    },
    /// Replay a trace step by step and verify its rewards.
    Replay {
        trace: PathBuf,
        /// Only print the verification summary.
        #[arg(long)]
        quiet: bool,
    },
    /// Render SVG figures from saved traces or curves.
    #[command(subcommand)]
    Plot(PlotCmd),
}

#[derive(Subcommand)]
enum ScenarioCmd {
    /// The bundled default scenario.
    Default {
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Default arena with servers placed from a seed.
    Generate {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 2)]
        standard: usize,
        #[arg(long, default_value_t = 2)]
        semantic: usize,
        /// Redraw server positions every episode.
        #[arg(long)]
        randomize_layout: bool,
        /// Drift standard deviation per step (metres).
        #[arg(long)]
        sigma: Option<f64>,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Check a scenario file and print its fingerprint.
    Validate { path: PathBuf },
}

#[derive(Clone, Copy, ValueEnum)]
enum OnOff {
    On,
    Off,
}

impl OnOff {
    fn enabled(self) -> bool {
        matches!(self, OnOff::On)
    }
}

#[derive(Args)]
struct SeedArgs {
    /// Single seed (overrides the scenario seed).
    #[arg(long, conflicts_with = "seeds")]
    seed: Option<u64>,
    /// Comma-separated seeds, run one after another.
    #[arg(long, value_delimiter = ',')]
    seeds: Vec<u64>,
}

impl SeedArgs {
    fn resolve(&self, cfg: &WorldConfig) -> Vec<u64> {
        match (self.seed, self.seeds.is_empty()) {
            (Some(s), _) => vec![s],
            (None, false) => self.seeds.clone(),
            (None, true) => vec![cfg.seed],
        }
    }
}

#[derive(Args)]
struct TrainArgs {
    /// Scenario JSON (default: bundled scenario).
    #[arg(long)]
    config: Option<PathBuf>,
    /// PPO hyperparameter JSON (default: built-in values).
    #[arg(long)]
    ppo: Option<PathBuf>,
    #[command(flatten)]
    seeds: SeedArgs,
    #[arg(long, value_enum, default_value_t = OnOff::On)]
    shield: OnOff,
    /// Override the total number of environment steps.
    #[arg(long)]
    total_steps: Option<u64>,
    /// Train seeds on separate threads.
    #[arg(long)]
    parallel: bool,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, conflicts_with = "checkpoint", required_unless_present = "checkpoint")]
    baseline: Option<BaselineKind>,
    /// Checkpoint file, or a training directory with seed-<s>/checkpoint.json.
    #[arg(long)]
    checkpoint: Option<PathBuf>,
    /// Method name for a checkpoint (default: proposed or vanilla-ppo).
    #[arg(long, requires = "checkpoint")]
    name: Option<String>,
    #[command(flatten)]
    seeds: SeedArgs,
    #[arg(long, default_value_t = 200)]
    episodes: usize,
    #[arg(long, value_enum, default_value_t = OnOff::Off)]
    shield: OnOff,
    /// Sample actions from the learned policy instead of its mean.
    #[arg(long)]
    stochastic: bool,
    /// Number of episodes per seed to write traces for.
    #[arg(long, default_value_t = 5)]
    traces: usize,
}

#[derive(Subcommand)]
enum PlotCmd {
    /// Arena, server discs, believed and true paths, tool calls.
    Trajectory {
        trace: PathBuf,
        /// Scenario of the episode (default: the trace's sidecar file).
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        title: Option<String>,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Learning curves with seed ranges, baselines as flat lines.
    Curves {
        /// Training directory (e.g. out/train/proposed); repeatable.
        #[arg(long = "method")]
        methods: Vec<PathBuf>,
        /// Baseline report CSV; repeatable.
        #[arg(long = "baseline")]
        baselines: Vec<PathBuf>,
        #[arg(long, default_value = "Mean episodic return during training")]
        title: String,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
}

fn write_text(path: &Path, text: &str) -> Result<(), HarnessError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| HarnessError::io(dir, e))?;
    }
    fs::write(path, text).map_err(|e| HarnessError::io(path, e))
}

fn emit(text: &str, output: Option<&Path>) -> Result<(), HarnessError> {
    match output {
        Some(p) => write_text(p, text),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn load_scenario(path: Option<&Path>) -> Result<WorldConfig, HarnessError> {
    Ok(match path {
        Some(p) => WorldConfig::load(p)?,
        None => WorldConfig::bundled_default(),
    })
}

fn load_ppo(path: Option<&Path>) -> Result<PpoConfig, HarnessError> {
    let Some(p) = path else {
        return Ok(PpoConfig::default());
    };
    let text = fs::read_to_string(p).map_err(|e| HarnessError::io(p, e))?;
    serde_json::from_str(&text).map_err(|e| HarnessError::Validation(format!("{}: {e}", p.display())))
}

fn scenario(cmd: ScenarioCmd) -> Result<(), HarnessError> {
    match cmd {
        ScenarioCmd::Default { output } => emit(&WorldConfig::bundled_default().to_canonical_json(), output.as_deref()),
        ScenarioCmd::Generate {
            seed,
            standard,
            semantic,
            randomize_layout,
            sigma,
            output,
        } => {
            let mut cfg = random_scenario(seed, standard, semantic);
            cfg.randomize_layout = randomize_layout;
            if let Some(s) = sigma {
                cfg.sigma_drift = s;
            }
            cfg.validate()?;
            emit(&cfg.to_canonical_json(), output.as_deref())
        }
        ScenarioCmd::Validate { path } => {
            let cfg = WorldConfig::load(&path)?;
            println!(
                "{}: ok, {} servers, fingerprint {}",
                path.display(),
                cfg.servers.len(),
                tables::format_fingerprint(cfg.fingerprint())
            );
            Ok(())
        }
    }
}

fn train(args: TrainArgs, out: PathBuf) -> Result<(), HarnessError> {
    let cfg = load_scenario(args.config.as_deref())?;
    let mut ppo = load_ppo(args.ppo.as_deref())?;
    if let Some(n) = args.total_steps {
        ppo.total_steps = n;
    }
    let job = TrainJob {
        seeds: args.seeds.resolve(&cfg),
        cfg,
        ppo,
        shield: args.shield.enabled(),
        out,
        parallel: args.parallel,
    };
    for r in run::run_train(&job)? {
        let tail: Vec<f64> = r.curve.iter().rev().take(10).map(|p| p.mean_return).filter(|x| x.is_finite()).collect();
        let recent = if tail.is_empty() {
            "n/a".to_string()
        } else {
            format!("{:.2}", tail.iter().sum::<f64>() / tail.len() as f64)
        };
        println!(
            "seed {}: {} updates, recent mean return {recent}, wrote {}",
            r.seed,
            r.curve.len(),
            r.dir.display()
        );
    }
    Ok(())
}

fn eval(args: EvalArgs, out: PathBuf) -> Result<(), HarnessError> {
    let cfg = load_scenario(args.config.as_deref())?;
    let subject = match (args.baseline, args.checkpoint) {
        (Some(kind), None) => Subject::Baseline(kind),
        (None, Some(path)) => Subject::Checkpoint { path, name: args.name },
        _ => return Err(HarnessError::Usage("give exactly one of --baseline or --checkpoint".into())),
    };
    let job = EvalJob {
        seeds: args.seeds.resolve(&cfg),
        cfg,
        subject,
        episodes: args.episodes,
        shield: args.shield.enabled(),
        stochastic: args.stochastic,
        traced: args.traces,
        out,
    };
    let res = run::run_eval(&job)?;
    for r in &res.reports {
        println!("{}", format_report(r));
    }
    println!("wrote {}", res.dir.display());
    Ok(())
}

fn replay(path: &Path, quiet: bool) -> Result<(), HarnessError> {
    let records = trace::read_trace(path)?;
    if !quiet {
        for r in &records {
            println!("{}", trace::describe(r));
        }
    }
    let check = trace::check_replay(&records);
    println!(
        "{} steps, recomputed return {:.6}, {} reward mismatches, {} return mismatches",
        check.steps,
        check.final_return,
        check.reward_mismatches.len(),
        check.return_mismatches.len()
    );
    if check.is_clean() {
        Ok(())
    } else {
        Err(HarnessError::Validation(format!(
            "{}: rewards do not match their components at steps {:?}",
            path.display(),
            check.reward_mismatches.iter().chain(&check.return_mismatches).collect::<Vec<_>>()
        )))
    }
}

fn seed_curves(dir: &Path) -> Result<Vec<Vec<(f64, f64)>>, HarnessError> {
    let entries = fs::read_dir(dir).map_err(|e| HarnessError::io(dir, e))?;
    let mut seeds: Vec<(u64, PathBuf)> = Vec::new();
    for entry in entries {
        let entry = entry.map_err(|e| HarnessError::io(dir, e))?;
        let name = entry.file_name().to_string_lossy().into_owned();
        if let Some(seed) = name.strip_prefix("seed-").and_then(|s| s.parse().ok()) {
            seeds.push((seed, entry.path().join("curve.csv")));
        }
    }
    if seeds.is_empty() {
        return Err(HarnessError::Validation(format!("{}: no seed-<s>/curve.csv found", dir.display())));
    }
    seeds.sort();
    seeds
        .iter()
        .map(|(_, p)| Ok(tables::read_curve(p)?.iter().map(|c| (c.env_steps as f64, c.mean_return)).collect()))
        .collect()
}

fn baseline_line(path: &Path) -> Result<FlatLine, HarnessError> {
    let rows: Vec<ReportRow> = tables::read_rows(path)?;
    let n: usize = rows.iter().map(|r| r.episodes).sum();
    if rows.is_empty() || n == 0 {
        return Err(HarnessError::Validation(format!("{}: no episodes", path.display())));
    }
    Ok(FlatLine {
        label: rows[0].method.clone(),
        value: rows.iter().map(|r| r.mean_return * r.episodes as f64).sum::<f64>() / n as f64,
    })
}

fn plot(cmd: PlotCmd, out: PathBuf) -> Result<(), HarnessError> {
    let (svg, path) = match cmd {
        PlotCmd::Trajectory {
            trace,
            config,
            title,
            output,
        } => {
            let cfg_path = config.unwrap_or_else(|| trace_scenario_path(&trace));
            let cfg = WorldConfig::load(&cfg_path)?;
            let records = trace::read_trace(&trace)?;
            let title = title.unwrap_or_else(|| trace.display().to_string());
            (render_trajectory(&cfg, &records, &title), output.unwrap_or_else(|| trace.with_extension("svg")))
        }
        PlotCmd::Curves {
            methods,
            baselines,
            title,
            output,
        } => {
            if methods.is_empty() && baselines.is_empty() {
                return Err(HarnessError::Usage("give at least one --method or --baseline".into()));
            }
            let flat = baselines.iter().map(|p| baseline_line(p)).collect::<Result<Vec<_>, _>>()?;
            let series = methods
                .iter()
                .map(|d| {
                    Ok(CurveSeries {
                        label: d.file_name().map_or_else(|| d.display().to_string(), |n| n.to_string_lossy().into_owned()),
                        runs: seed_curves(d)?,
                    })
                })
                .collect::<Result<Vec<_>, HarnessError>>()?;
            (
                render_curves(&series, &flat, &title),
                output.unwrap_or_else(|| out.join("figures").join("curves.svg")),
            )
        }
    };
    write_text(&path, &svg)?;
    println!("wrote {}", path.display());
    Ok(())
}

fn dispatch(cli: Cli) -> Result<(), HarnessError> {
    let out = run::resolve_out_dir(cli.out.as_deref());
    match cli.command {
        Command::Scenario(cmd) => scenario(cmd),
        Command::Train(args) => train(args, out),
        Command::Eval(args) => eval(args, out),
        Command::Compare { reports } => {
            let res = run::run_compare(&reports, &out)?;
            print!("{}", format_comparison(&res));
            println!("wrote {}", res.summary_csv.display());
            Ok(())
        }
        Command::Replay { trace, quiet } => replay(&trace, quiet),
        Command::Plot(cmd) => plot(cmd, out),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
