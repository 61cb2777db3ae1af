//! Experiment runs behind `train`, `eval` and `compare`. Every run writes
//! only under its own per-method, per-seed directory.
//!
//! Layout under the output root:
//!
//! ```text
//! train/<method>/seed-<s>/{checkpoint.json, curve.csv, scenario.json}
//! eval/<method>/{report.csv, episodes.csv}
//! eval/<method>/traces/seed-<s>/episode-<k>.{jsonl, scenario.json}
//! compare/summary.csv
//! ```

use std::fs;
use std::path::{Path, PathBuf};

use super::tables::{self, EpisodeRow, ReportRow};
use super::trace::{self, TraceRecord};
use super::HarnessError;
use crate::env::BaselineKind;
use crate::eval::{self, Comparison, EvalReport, LearnedPolicy, Policy, ScriptedPolicy};
use crate::learner::{self, Checkpoint, CurvePoint, PpoConfig};
use crate::world::WorldConfig;

pub const OUT_ENV: &str = "TOOLSCHED_OUT";
pub const DEFAULT_OUT: &str = "out";

/// `--out` wins over `TOOLSCHED_OUT`, which wins over `./out`.
pub fn resolve_out_dir(flag: Option<&Path>) -> PathBuf {
    if let Some(p) = flag {
        return p.to_path_buf();
    }
    match std::env::var_os(OUT_ENV) {
        Some(v) if !v.is_empty() => PathBuf::from(v),
        _ => PathBuf::from(DEFAULT_OUT),
    }
}

/// Shielded training is the proposed method; unshielded is vanilla PPO.
pub fn method_name(shield: bool) -> &'static str {
    if shield {
        "proposed"
    } else {
        "vanilla-ppo"
    }
}

fn create_dir(path: &Path) -> Result<(), HarnessError> {
    fs::create_dir_all(path).map_err(|e| HarnessError::io(path, e))
}

fn seed_dir(root: &Path, seed: u64) -> PathBuf {
    root.join(format!("seed-{seed}"))
}

#[derive(Debug, Clone)]
pub struct TrainJob {
    pub cfg: WorldConfig,
    pub ppo: PpoConfig,
    pub shield: bool,
    pub seeds: Vec<u64>,
    pub out: PathBuf,
    /// One thread per seed. Results are identical either way.
    pub parallel: bool,
}

#[derive(Debug, Clone)]
pub struct TrainRun {
    pub seed: u64,
    pub dir: PathBuf,
    pub curve: Vec<CurvePoint>,
}

fn train_one(job: &TrainJob, seed: u64) -> Result<TrainRun, HarnessError> {
    let dir = seed_dir(&job.out.join("train").join(method_name(job.shield)), seed);
    create_dir(&dir)?;
    let outcome = learner::train(&job.cfg, &job.ppo, job.shield, seed)?;
    let ckpt = Checkpoint::new(&outcome.net, &job.ppo, seed, job.shield, job.cfg.fingerprint());
    ckpt.save(dir.join("checkpoint.json"))?;
    tables::write_curve(&dir.join("curve.csv"), &outcome.curve)?;
    job.cfg.clone().with_seed(seed).save(dir.join("scenario.json"))?;
    Ok(TrainRun {
        seed,
        dir,
        curve: outcome.curve,
    })
}

pub fn run_train(job: &TrainJob) -> Result<Vec<TrainRun>, HarnessError> {
    job.cfg.validate()?;
    job.ppo.validate()?;
    if job.seeds.is_empty() {
        return Err(HarnessError::Usage("no seeds given".into()));
    }
    if !job.parallel {
        return job.seeds.iter().map(|&s| train_one(job, s)).collect();
    }
    std::thread::scope(|scope| {
        let handles: Vec<_> = job.seeds.iter().map(|&s| scope.spawn(move || train_one(job, s))).collect();
        handles
            .into_iter()
            .map(|h| h.join().unwrap_or_else(|_| Err(HarnessError::Runtime("training thread panicked".into()))))
            .collect()
    })
}

/// What `eval` runs: a scripted baseline or a trained checkpoint.
#[derive(Debug, Clone)]
pub enum Subject {
    Baseline(BaselineKind),
    /// A checkpoint file, or a training directory holding
    /// `seed-<s>/checkpoint.json` for every evaluated seed.
    Checkpoint { path: PathBuf, name: Option<String> },
}

#[derive(Debug, Clone)]
pub struct EvalJob {
    pub cfg: WorldConfig,
    pub subject: Subject,
    pub seeds: Vec<u64>,
    pub episodes: usize,
    pub shield: bool,
    /// Sample learned actions instead of using the mean and threshold.
    pub stochastic: bool,
    /// Episodes `0..traced` of each seed get a JSONL trace.
    pub traced: usize,
    pub out: PathBuf,
}

#[derive(Debug, Clone)]
pub struct EvalOutput {
    pub method: String,
    pub dir: PathBuf,
    pub reports: Vec<EvalReport>,
}

fn checkpoint_for(path: &Path, seed: u64) -> PathBuf {
    if path.is_dir() {
        seed_dir(path, seed).join("checkpoint.json")
    } else {
        path.to_path_buf()
    }
}

fn load_policy(path: &Path, name: Option<&str>, stochastic: bool, cfg: &WorldConfig) -> Result<LearnedPolicy, HarnessError> {
    let ckpt = Checkpoint::load(path)?;
    let net = ckpt.network()?;
    let want = crate::env::observation_len(cfg.servers.len());
    if net.input_len() != want {
        return Err(HarnessError::Validation(format!(
            "{} expects {} observation features but the scenario has {want}",
            path.display(),
            net.input_len()
        )));
    }
    let method = name.map_or_else(|| method_name(ckpt.shield).to_string(), str::to_string);
    Ok(LearnedPolicy::new(method, net, stochastic))
}

pub fn run_eval(job: &EvalJob) -> Result<EvalOutput, HarnessError> {
    job.cfg.validate()?;
    if job.episodes == 0 {
        return Err(HarnessError::Usage("--episodes must be at least 1".into()));
    }
    if job.seeds.is_empty() {
        return Err(HarnessError::Usage("no seeds given".into()));
    }
    let mut reports = Vec::with_capacity(job.seeds.len());
    let mut method = String::new();
    let mut dir = PathBuf::new();
    for &seed in &job.seeds {
        let mut policy: Box<dyn Policy> = match &job.subject {
            Subject::Baseline(kind) => Box::new(ScriptedPolicy::new(*kind)),
            Subject::Checkpoint { path, name } => {
                Box::new(load_policy(&checkpoint_for(path, seed), name.as_deref(), job.stochastic, &job.cfg)?)
            }
        };
        method = policy.name();
        dir = job.out.join("eval").join(&method);
        let trace_dir = seed_dir(&dir.join("traces"), seed);
        if job.traced > 0 {
            create_dir(&trace_dir)?;
        }
        let mut records: Vec<TraceRecord> = Vec::new();
        let mut failure: Option<HarnessError> = None;
        let report = eval::evaluate_observed(policy.as_mut(), &job.cfg, job.episodes, seed, job.shield, &mut |ep, t| {
            let k = ep.episode_index();
            if k >= job.traced as u64 || failure.is_some() {
                return;
            }
            records.push(TraceRecord::from_step(ep, t));
            if t.done {
                let stem = trace_dir.join(format!("episode-{k}"));
                let res = trace::write_trace(&stem.with_extension("jsonl"), &records)
                    .and_then(|()| ep.config().save(stem.with_extension("scenario.json")).map_err(HarnessError::from));
                if let Err(e) = res {
                    failure = Some(e);
                }
                records.clear();
            }
        });
        if let Some(e) = failure {
            return Err(e);
        }
        reports.push(report);
    }
    create_dir(&dir)?;
    let rows: Vec<ReportRow> = reports.iter().map(ReportRow::from_report).collect();
    tables::write_rows(&dir.join("report.csv"), &rows)?;
    let episodes: Vec<EpisodeRow> = reports
        .iter()
        .flat_map(|r| r.episode_summaries.iter().map(|s| EpisodeRow::new(&r.method, r.seed, s)))
        .collect();
    tables::write_rows(&dir.join("episodes.csv"), &episodes)?;
    Ok(EvalOutput { method, dir, reports })
}

/// Rebuilds one method's reports from `report.csv` and the sibling
/// `episodes.csv`, then pools them over seeds. Per-call distances are not
/// persisted, so the pooled report carries none.
pub fn load_pooled(report_csv: &Path) -> Result<EvalReport, HarnessError> {
    let rows: Vec<ReportRow> = tables::read_rows(report_csv)?;
    let first = rows
        .first()
        .ok_or_else(|| HarnessError::Validation(format!("{}: no report rows", report_csv.display())))?;
    let episodes_csv = report_csv.with_file_name("episodes.csv");
    let episodes: Vec<EpisodeRow> = tables::read_rows(&episodes_csv)?;
    let mut per_seed = Vec::with_capacity(rows.len());
    for row in &rows {
        if row.method != first.method {
            return Err(HarnessError::Validation(format!(
                "{}: mixes methods `{}` and `{}`",
                report_csv.display(),
                first.method,
                row.method
            )));
        }
        let fingerprint = tables::parse_fingerprint(&row.scenario).ok_or_else(|| {
            HarnessError::Validation(format!("{}: bad scenario fingerprint `{}`", report_csv.display(), row.scenario))
        })?;
        let summaries: Vec<_> = episodes
            .iter()
            .filter(|e| e.method == row.method && e.seed == row.seed)
            .map(EpisodeRow::summary)
            .collect();
        if summaries.len() != row.episodes {
            return Err(HarnessError::Validation(format!(
                "{}: seed {} lists {} episodes, report says {}",
                episodes_csv.display(),
                row.seed,
                summaries.len(),
                row.episodes
            )));
        }
        per_seed.push(EvalReport {
            method: row.method.clone(),
            scenario_fingerprint: fingerprint,
            seed: row.seed,
            shield: row.shield,
            episodes: row.episodes,
            mean_return: row.mean_return,
            std_return: row.std_return,
            ci95: row.ci_low.zip(row.ci_high),
            success_rate: row.success_rate,
            crash_rate: row.crash_rate,
            timeout_rate: row.timeout_rate,
            mean_length: row.mean_length,
            mean_energy_flight: row.mean_energy_flight,
            mean_energy_transmission: row.mean_energy_transmission,
            mean_energy_compute: row.mean_energy_compute,
            activations_standard: row.activations_standard,
            activations_semantic: row.activations_semantic,
            mean_activation_distance_standard: row.mean_activation_distance_standard,
            mean_activation_distance_semantic: row.mean_activation_distance_semantic,
            mean_activation_ratio_standard: row.mean_activation_ratio_standard,
            mean_activation_ratio_semantic: row.mean_activation_ratio_semantic,
            redundant_activation_rate: row.redundant_activation_rate,
            redundant_activations: row.redundant_activations,
            redundant_opportunities: row.redundant_opportunities,
            overrides: row.overrides,
            returns: summaries.iter().map(|s| s.episode_return).collect(),
            activation_distances_standard: Vec::new(),
            activation_distances_semantic: Vec::new(),
            activation_ratios_standard: Vec::new(),
            activation_ratios_semantic: Vec::new(),
            episode_summaries: summaries,
        });
    }
    Ok(eval::pool(&per_seed).expect("at least one row"))
}

#[derive(Debug, Clone)]
pub struct CompareOutput {
    pub pooled: Vec<EvalReport>,
    pub comparison: Comparison,
    pub summary_csv: PathBuf,
}

pub fn run_compare(report_csvs: &[PathBuf], out: &Path) -> Result<CompareOutput, HarnessError> {
    if report_csvs.len() < 2 {
        return Err(HarnessError::Usage("compare needs at least two report CSVs".into()));
    }
    let pooled = report_csvs.iter().map(|p| load_pooled(p)).collect::<Result<Vec<_>, _>>()?;
    let comparison = eval::compare(&pooled)?;
    let dir = out.join("compare");
    create_dir(&dir)?;
    let summary_csv = dir.join("summary.csv");
    let mut rows: Vec<ReportRow> = Vec::new();
    for ranked in &comparison.ranking {
        let r = pooled.iter().find(|r| r.method == ranked.method).expect("ranked method is pooled");
        rows.push(ReportRow::from_report(r));
    }
    tables::write_rows(&summary_csv, &rows)?;
    Ok(CompareOutput {
        pooled,
        comparison,
        summary_csv,
    })
}

/// Terminal table for a comparison: ranking, then adjacent-pair tests.
pub fn format_comparison(out: &CompareOutput) -> String {
    let mut s = format!(
        "{:<4} {:<16} {:>10} {:>9} {:>8} {:>8} {:>8}\n",
        "rank", "method", "mean", "episodes", "success", "crash", "timeout"
    );
    for (i, m) in out.comparison.ranking.iter().enumerate() {
        let r = out.pooled.iter().find(|r| r.method == m.method).expect("ranked method is pooled");
        s += &format!(
            "{:<4} {:<16} {:>10.2} {:>9} {:>8.3} {:>8.3} {:>8.3}\n",
            i + 1,
            m.method,
            m.mean_return,
            m.episodes,
            r.success_rate,
            r.crash_rate,
            r.timeout_rate
        );
    }
    s += "\nadjacent pairs (two-sided Mann-Whitney U)\n";
    for p in &out.comparison.pairs {
        s += &format!(
            "{} > {}: gap {:.2}, U {:.1}, z {:.3}, p {:.3e}\n",
            p.higher, p.lower, p.mean_gap, p.test.u, p.test.z, p.test.p_value
        );
    }
    s
}

/// One-line summary per report, for the terminal after `eval`.
pub fn format_report(r: &EvalReport) -> String {
    let ci = r
        .ci95
        .map_or_else(|| "n/a".to_string(), |(lo, hi)| format!("[{lo:.2}, {hi:.2}]"));
    let redundancy = r.redundant_activation_rate.map_or_else(|| "n/a".to_string(), |x| format!("{x:.3}"));
    format!(
        "{} seed {}: return {:.2} ci95 {} success {:.3} crash {:.3} timeout {:.3} calls {}+{} redundant {}",
        r.method,
        r.seed,
        r.mean_return,
        ci,
        r.success_rate,
        r.crash_rate,
        r.timeout_rate,
        r.activations_standard,
        r.activations_semantic,
        redundancy
    )
}

/// Depletions in the first `episodes` training episodes of a curve that an
/// activation caused.
pub fn early_tool_depletions(curve: &[CurvePoint], episodes: u64) -> u64 {
    let mut seen = 0;
    let mut depleted = 0;
    for p in curve {
        if seen >= episodes {
            break;
        }
        seen += p.episodes;
        depleted += p.tool_depletions;
    }
    depleted
}

/// Sidecar scenario written next to a trace by `eval`.
pub fn trace_scenario_path(trace: &Path) -> PathBuf {
    trace.with_extension("scenario.json")
}
