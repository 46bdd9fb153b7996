use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use qscs_core::baselines::reference_lines;
use qscs_core::env::{EnvConfig, RewardWeights};
use qscs_core::quantum::{NoiseChannelSpec, NoiseKind};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{derive_seed, AgentKind, RunConfig};
use crate::error::{HarnessError, Result};
use crate::plot::{write_line_chart, Series};
use crate::stats::{mean, moving_average, std_dev, summarize, Summary, MA_WINDOW};
use crate::train::{evaluate, read_episode_csv, train, EpisodeRecord, Learner};

pub const DEFAULT_LRS: [f64; 6] = [5e-3, 2.5e-3, 1e-3, 5e-4, 2.5e-4, 1e-4];
pub const DEFAULT_NS: [usize; 5] = [2, 3, 4, 5, 6];
pub const DEFAULT_ALPHAS: [(f64, f64, f64); 8] = [
    (0.5, 1.0, 0.5),
    (1.0, 1.0, 0.5),
    (1.0, 0.5, 0.5),
    (1.0, 1.0, 1.0),
    (2.0, 1.0, 0.5),
    (1.0, 2.0, 0.5),
    (0.1, 0.1, 0.1),
    (2.0, 2.0, 2.0),
];
pub const DEFAULT_NOISE_PROBS: [f64; 5] = [0.0, 0.05, 0.1, 0.2, 0.3];
pub const NOISE_CHANNELS: [NoiseKind; 3] = [NoiseKind::BitFlip, NoiseKind::Depolarizing, NoiseKind::PhaseFlip];
pub const NOISE_EVAL_EPISODES: usize = 100;

pub const SUMMARY_COLUMNS: [&str; 7] = ["study", "cell", "agent", "mean_ma", "final10_ma", "best_max_ma", "n_seeds"];

/// Shared knobs for every study.
#[derive(Debug, Clone, PartialEq)]
pub struct StudyOptions {
    /// Template run; `agent`, `seed` and the swept field are overridden.
    pub base: RunConfig,
    pub seeds: Vec<u64>,
    /// Agents whose outcome depends on the swept value.
    pub agents: Vec<AgentKind>,
    /// Fixed policies included as floors.
    pub floors: Vec<AgentKind>,
    pub workers: usize,
    pub out_dir: PathBuf,
}

impl StudyOptions {
    pub fn new(base: RunConfig, n_seeds: usize, out_dir: PathBuf) -> Self {
        Self {
            seeds: (0..n_seeds as u64).map(|k| derive_seed(base.seed, k)).collect(),
            base,
            agents: vec![AgentKind::Dqn, AgentKind::Ppo, AgentKind::Ensemble],
            floors: vec![AgentKind::Random, AgentKind::AlwaysOff, AgentKind::AlwaysOn, AgentKind::Mpc],
            workers: 1,
            out_dir,
        }
    }
}

/// A single `(cell, agent, seed)` training run.
#[derive(Debug, Clone)]
struct Job {
    cell: String,
    agent: AgentKind,
    config: RunConfig,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CellResult {
    pub cell: String,
    pub agent: AgentKind,
    /// Completed runs as `(seed, records)`.
    pub runs: Vec<(u64, Vec<EpisodeRecord>)>,
    /// Failed runs as `(seed, message)`.
    pub failures: Vec<(u64, String)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    pub study: String,
    pub cells: Vec<CellResult>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub study: String,
    pub cell: String,
    pub agent: AgentKind,
    pub mean_ma: f64,
    pub final10_ma: f64,
    pub best_max_ma: f64,
    pub n_seeds: usize,
}

/// Cell order and study name, so `report` can rebuild a result from disk.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct Manifest {
    study: String,
    cells: Vec<(String, AgentKind)>,
    seeds: Vec<u64>,
}

fn run_csv_path(runs_dir: &Path, cell: &str, agent: AgentKind, seed: u64) -> PathBuf {
    runs_dir.join(cell).join(agent.name()).join(format!("seed_{seed}.csv"))
}

fn pool(workers: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| HarnessError::Config(format!("worker pool: {e}")))
}

/// Runs every job on the worker pool and groups outcomes by cell in
/// first-appearance order. A failing run is recorded, never propagated.
fn execute(study: &str, jobs: Vec<Job>, seeds: &[u64], opts: &StudyOptions) -> Result<SweepResult> {
    let runs_dir = opts.out_dir.join("runs");
    let outcomes: Vec<(usize, std::result::Result<Vec<EpisodeRecord>, String>)> = pool(opts.workers)?.install(|| {
        jobs.par_iter()
            .enumerate()
            .map(|(i, job)| {
                let path = run_csv_path(&runs_dir, &job.cell, job.agent, job.config.seed);
                (i, train(&job.config, Some(&path)).map(|(r, _)| r).map_err(|e| e.to_string()))
            })
            .collect()
    });
    let mut cells: Vec<CellResult> = Vec::new();
    for (i, outcome) in outcomes {
        let job = &jobs[i];
        let idx = match cells.iter().position(|c| c.cell == job.cell && c.agent == job.agent) {
            Some(k) => k,
            None => {
                cells.push(CellResult { cell: job.cell.clone(), agent: job.agent, runs: vec![], failures: vec![] });
                cells.len() - 1
            }
        };
        match outcome {
            Ok(records) => cells[idx].runs.push((job.config.seed, records)),
            Err(msg) => cells[idx].failures.push((job.config.seed, msg)),
        }
    }
    let manifest = Manifest {
        study: study.to_owned(),
        cells: cells.iter().map(|c| (c.cell.clone(), c.agent)).collect(),
        seeds: seeds.to_vec(),
    };
    fs::create_dir_all(&opts.out_dir)?;
    fs::write(opts.out_dir.join("manifest.json"), serde_json::to_string_pretty(&manifest)? + "\n")?;
    Ok(SweepResult { study: study.to_owned(), cells })
}

/// Seed of run `seed` in grid point `cell_index`; identical across agents so
/// that every agent in a cell faces the same episode draws.
fn cell_seed(seed: u64, cell_index: usize) -> u64 {
    derive_seed(seed, cell_index as u64)
}

fn jobs_for(cell: &str, cell_index: usize, agents: &[AgentKind], template: &RunConfig, seeds: &[u64]) -> Vec<Job> {
    let mut jobs = Vec::new();
    for &agent in agents {
        for &s in seeds {
            jobs.push(Job {
                cell: cell.to_owned(),
                agent,
                config: RunConfig { agent, seed: cell_seed(s, cell_index), ..template.clone() },
            });
        }
    }
    jobs
}

pub fn lr_label(lr: f64) -> String {
    format!("lr_{lr}")
}

/// Learning-rate sweep; floors do not depend on the rate and run once in the
/// `baseline` cell.
pub fn lr_sweep(opts: &StudyOptions, lrs: &[f64]) -> Result<SweepResult> {
    let mut jobs = Vec::new();
    for (i, &lr) in lrs.iter().enumerate() {
        let template = RunConfig { lr, ..opts.base.clone() };
        template.validate()?;
        jobs.extend(jobs_for(&lr_label(lr), i, &opts.agents, &template, &opts.seeds));
    }
    jobs.extend(jobs_for("baseline", lrs.len(), &opts.floors, &opts.base, &opts.seeds));
    let result = execute("lr_sweep", jobs, &opts.seeds, opts)?;
    write_outputs(&result, &opts.out_dir)?;
    write_table2(&result, lrs, &opts.out_dir.join("table2.csv"))?;
    Ok(result)
}

pub fn n_label(n: usize) -> String {
    format!("n_{n}")
}

/// Spin-count ablation; warehouses track the spin count.
pub fn n_ablation(opts: &StudyOptions, ns: &[usize]) -> Result<SweepResult> {
    let mut jobs = Vec::new();
    for (i, &n) in ns.iter().enumerate() {
        let mut template = opts.base.clone();
        template.env.spin_spec.n_spins = n;
        template.env.n_warehouses = n;
        template.validate()?;
        let agents: Vec<AgentKind> = opts.agents.iter().chain(&opts.floors).copied().collect();
        jobs.extend(jobs_for(&n_label(n), i, &agents, &template, &opts.seeds));
    }
    let result = execute("n_ablation", jobs, &opts.seeds, opts)?;
    write_outputs(&result, &opts.out_dir)?;
    write_table4(&result, ns, &opts.out_dir.join("table4.csv"))?;
    Ok(result)
}

pub fn alpha_label(row: usize) -> String {
    format!("row_{}", row + 1)
}

/// Reward-weight sweep over `(α₁, α₂, α₃)` rows.
pub fn alpha_sweep(opts: &StudyOptions, rows: &[(f64, f64, f64)]) -> Result<SweepResult> {
    let mut jobs = Vec::new();
    for (i, &(a1, a2, a3)) in rows.iter().enumerate() {
        let mut template = opts.base.clone();
        template.env.reward_weights = RewardWeights { fidelity: a1, security: a2, co2: a3 };
        template.validate()?;
        let agents: Vec<AgentKind> = opts.agents.iter().chain(&opts.floors).copied().collect();
        jobs.extend(jobs_for(&alpha_label(i), i, &agents, &template, &opts.seeds));
    }
    let result = execute("alpha_sweep", jobs, &opts.seeds, opts)?;
    write_outputs(&result, &opts.out_dir)?;
    write_table3(&result, rows, &opts.out_dir.join("table3.csv"))?;
    Ok(result)
}

/// Per-cell summary, averaging each seed's [`summarize`] triple.
pub fn summary_rows(result: &SweepResult) -> Result<Vec<SummaryRow>> {
    let mut rows = Vec::new();
    for c in &result.cells {
        if c.runs.is_empty() {
            continue;
        }
        let sums = c
            .runs
            .iter()
            .map(|(_, r)| summarize(&returns(r)))
            .collect::<Result<Vec<Summary>>>()?;
        let avg = |f: fn(&Summary) -> f64| mean(&sums.iter().map(f).collect::<Vec<_>>());
        rows.push(SummaryRow {
            study: result.study.clone(),
            cell: c.cell.clone(),
            agent: c.agent,
            mean_ma: avg(|s| s.mean_ma),
            final10_ma: avg(|s| s.final10_ma),
            best_max_ma: avg(|s| s.best_max_ma),
            n_seeds: c.runs.len(),
        });
    }
    Ok(rows)
}

pub fn returns(records: &[EpisodeRecord]) -> Vec<f64> {
    records.iter().map(|r| r.episode_return).collect()
}

/// Moving average of the seed-mean return curve of each cell.
pub fn curves(result: &SweepResult) -> Result<Vec<Series>> {
    let mut out = Vec::new();
    for c in &result.cells {
        let Some(len) = c.runs.iter().map(|(_, r)| r.len()).min() else { continue };
        if len == 0 {
            continue;
        }
        let avg: Vec<f64> =
            (0..len).map(|k| mean(&c.runs.iter().map(|(_, r)| r[k].episode_return).collect::<Vec<_>>())).collect();
        let ma = moving_average(&avg, MA_WINDOW.min(len))?;
        out.push(Series {
            label: format!("{} {}", c.agent, c.cell),
            points: ma.iter().enumerate().map(|(k, &y)| (k as f64, y)).collect(),
        });
    }
    Ok(out)
}

fn write_rows<T: Serialize>(path: &Path, header: &[&str], rows: &[T]) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)?;
    }
    let mut w = csv::WriterBuilder::new().has_headers(false).from_path(path)?;
    w.write_record(header)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_summary(path: &Path, rows: &[SummaryRow]) -> Result<()> {
    write_rows(path, &SUMMARY_COLUMNS, rows)
}

pub fn read_summary(path: &Path) -> Result<Vec<SummaryRow>> {
    let mut reader = csv::Reader::from_path(path)?;
    Ok(reader.deserialize().collect::<std::result::Result<_, _>>()?)
}

/// `summary.csv`, `curves.csv`, `failures.csv` (when needed) and `curves.svg`.
pub fn write_outputs(result: &SweepResult, dir: &Path) -> Result<bool> {
    write_summary(&dir.join("summary.csv"), &summary_rows(result)?)?;
    let series = curves(result)?;
    let mut rows = Vec::new();
    for s in &series {
        for &(x, y) in &s.points {
            rows.push((s.label.clone(), x as usize, y));
        }
    }
    write_rows(&dir.join("curves.csv"), &["series", "episode", "ma_return"], &rows)?;
    let failures: Vec<(String, AgentKind, u64, String)> = result
        .cells
        .iter()
        .flat_map(|c| c.failures.iter().map(move |(s, m)| (c.cell.clone(), c.agent, *s, m.clone())))
        .collect();
    if !failures.is_empty() {
        write_rows(&dir.join("failures.csv"), &["cell", "agent", "seed", "error"], &failures)?;
    }
    let refs = reference_lines();
    write_line_chart(
        &dir.join("curves.svg"),
        &result.study,
        "episode",
        &format!("return ({MA_WINDOW}-episode MA, seed mean)"),
        &series,
        &refs,
    )
}

/// Agents in order of first appearance.
fn unique_agents(result: &SweepResult) -> Vec<AgentKind> {
    let mut out: Vec<AgentKind> = Vec::new();
    for c in &result.cells {
        if !out.contains(&c.agent) {
            out.push(c.agent);
        }
    }
    out
}

fn summary_map(result: &SweepResult) -> Result<BTreeMap<(String, AgentKind), SummaryRow>> {
    Ok(summary_rows(result)?.into_iter().map(|r| ((r.cell.clone(), r.agent), r)).collect())
}

/// Best-of-sweep plus averages at the two endpoint learning rates, one row
/// per agent, followed by the published reference rows.
fn write_table2(result: &SweepResult, lrs: &[f64], path: &Path) -> Result<()> {
    let map = summary_map(result)?;
    let lookup = |cell: &str, agent| map.get(&(cell.to_owned(), agent)).map(|r| r.mean_ma);
    let agents = unique_agents(result);
    let mut rows: Vec<(String, Option<f64>, Option<f64>, Option<f64>)> = Vec::new();
    for agent in agents {
        let cells: Vec<&SummaryRow> = map.values().filter(|r| r.agent == agent).collect();
        let best = cells.iter().map(|r| r.best_max_ma).fold(None, |m: Option<f64>, v| Some(m.map_or(v, |m| m.max(v))));
        let at = |lr: f64| {
            if lrs.contains(&lr) {
                lookup(&lr_label(lr), agent).or_else(|| lookup("baseline", agent))
            } else {
                None
            }
        };
        rows.push((agent.name().to_owned(), best, at(5e-3), at(1e-4)));
    }
    for (name, v) in reference_lines() {
        rows.push((format!("{name} (reference)"), Some(v), Some(v), Some(v)));
    }
    write_rows(path, &["method", "best_max", "avg_at_0.005", "avg_at_0.0001"], &rows)
}

/// Paper layout: `no, α₁, α₂, α₃, mean, final 10, best`, per agent.
fn write_table3(result: &SweepResult, alphas: &[(f64, f64, f64)], path: &Path) -> Result<()> {
    let map = summary_map(result)?;
    let mut rows = Vec::new();
    for agent in unique_agents(result) {
        for (i, &(a1, a2, a3)) in alphas.iter().enumerate() {
            if let Some(r) = map.get(&(alpha_label(i), agent)) {
                rows.push((agent, i + 1, a1, a2, a3, r.mean_ma, r.final10_ma, r.best_max_ma));
            }
        }
    }
    write_rows(path, &["agent", "no", "alpha1", "alpha2", "alpha3", "mean", "final10", "best"], &rows)
}

fn write_table4(result: &SweepResult, ns: &[usize], path: &Path) -> Result<()> {
    let map = summary_map(result)?;
    let mut rows = Vec::new();
    for agent in unique_agents(result) {
        for &n in ns {
            if let Some(r) = map.get(&(n_label(n), agent)) {
                rows.push((agent, n, r.mean_ma, r.final10_ma, r.best_max_ma));
            }
        }
    }
    write_rows(path, &["agent", "n", "mean_ma", "final10_ma", "best_max_ma"], &rows)
}

/// Rebuilds a study from its manifest and per-run CSVs, then rewrites the
/// summary, curves and plot.
pub fn report(study_dir: &Path) -> Result<SweepResult> {
    let manifest: Manifest = serde_json::from_str(&fs::read_to_string(study_dir.join("manifest.json"))?)?;
    let runs_dir = study_dir.join("runs");
    let mut cells = Vec::new();
    for (i, (cell, agent)) in manifest.cells.iter().enumerate() {
        let mut c = CellResult { cell: cell.clone(), agent: *agent, runs: vec![], failures: vec![] };
        let cell_index = cell_index_of(&manifest, i);
        for &s in &manifest.seeds {
            let seed = cell_seed(s, cell_index);
            match read_episode_csv(&run_csv_path(&runs_dir, cell, *agent, seed)) {
                Ok(r) => c.runs.push((seed, r)),
                Err(e) => c.failures.push((seed, e.to_string())),
            }
        }
        cells.push(c);
    }
    let result = SweepResult { study: manifest.study, cells };
    write_outputs(&result, study_dir)?;
    Ok(result)
}

/// Grid position of manifest entry `i`: distinct cell labels in order.
fn cell_index_of(manifest: &Manifest, i: usize) -> usize {
    let mut labels: Vec<&str> = Vec::new();
    for (cell, _) in &manifest.cells[..=i] {
        if !labels.contains(&cell.as_str()) {
            labels.push(cell);
        }
    }
    labels.len() - 1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseRow {
    pub agent: AgentKind,
    pub channel: String,
    pub p: f64,
    pub mean_return: f64,
    pub std_return: f64,
    pub n_episodes: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseSeedRow {
    pub agent: AgentKind,
    pub channel: String,
    pub p: f64,
    pub seed: u64,
    pub mean_return: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NoiseResult {
    pub rows: Vec<NoiseRow>,
    /// Per-seed evaluation means, for paired comparisons.
    pub seed_rows: Vec<NoiseSeedRow>,
}

impl NoiseResult {
    /// Per-seed means for one `(agent, channel, p)` cell, in seed order.
    pub fn seed_means(&self, agent: AgentKind, channel: NoiseKind, p: f64) -> Vec<f64> {
        self.seed_rows
            .iter()
            .filter(|r| r.agent == agent && r.channel == channel.name() && r.p == p)
            .map(|r| r.mean_return)
            .collect()
    }
}

/// A policy trained without channel noise, ready for evaluation.
#[derive(Debug, Clone)]
pub struct TrainedPolicy {
    pub agent: AgentKind,
    /// Seed the policy was trained with; also keys its evaluation episodes.
    pub seed: u64,
    pub learner: Learner,
}

/// Evaluates every policy under every `(channel, p)` on `env`. All cells of
/// one policy share episode seeds and agent RNG, so `p = 0` reproduces the
/// noise-free evaluation exactly and cells are paired across `p`.
pub fn noise_evaluate(
    policies: &[TrainedPolicy],
    env: &EnvConfig,
    channels: &[NoiseKind],
    probs: &[f64],
    eval_episodes: usize,
    workers: usize,
) -> Result<NoiseResult> {
    let per_policy = pool(workers)?.install(|| {
        policies
            .par_iter()
            .map(|tp| -> Result<Vec<Vec<f64>>> {
                let eval_seeds: Vec<u64> =
                    (0..eval_episodes as u64).map(|k| derive_seed(derive_seed(tp.seed, 0xE7A1), k)).collect();
                let mut cells = Vec::new();
                for &kind in channels {
                    for &p in probs {
                        let mut noisy = env.clone();
                        noisy.noise_channel = NoiseChannelSpec::new(kind, p)?;
                        let mut policy = tp.learner.clone();
                        let records = evaluate(&mut policy, &noisy, &eval_seeds, derive_seed(tp.seed, 0xE7A2))?;
                        cells.push(returns(&records));
                    }
                }
                Ok(cells)
            })
            .collect::<Vec<_>>()
    });
    let mut seed_rows = Vec::new();
    let mut pooled: BTreeMap<(AgentKind, usize), Vec<f64>> = BTreeMap::new();
    let mut agents: Vec<AgentKind> = Vec::new();
    for (tp, outcome) in policies.iter().zip(per_policy) {
        if !agents.contains(&tp.agent) {
            agents.push(tp.agent);
        }
        for (k, rets) in outcome?.into_iter().enumerate() {
            let (kind, p) = (channels[k / probs.len()], probs[k % probs.len()]);
            seed_rows.push(NoiseSeedRow {
                agent: tp.agent,
                channel: kind.name().to_owned(),
                p,
                seed: tp.seed,
                mean_return: mean(&rets),
            });
            pooled.entry((tp.agent, k)).or_default().extend(rets);
        }
    }
    let mut rows = Vec::new();
    for &agent in &agents {
        for (ci, &kind) in channels.iter().enumerate() {
            for (pi, &p) in probs.iter().enumerate() {
                let rets = &pooled[&(agent, ci * probs.len() + pi)];
                rows.push(NoiseRow {
                    agent,
                    channel: kind.name().to_owned(),
                    p,
                    mean_return: mean(rets),
                    std_return: std_dev(rets),
                    n_episodes: rets.len(),
                });
            }
        }
    }
    Ok(NoiseResult { rows, seed_rows })
}

/// Trains each agent without channel noise, then evaluates the frozen policy
/// under every `(channel, p)` with the same episode seeds.
pub fn noise_study(opts: &StudyOptions, channels: &[NoiseKind], probs: &[f64], eval_episodes: usize) -> Result<NoiseResult> {
    let agents: Vec<AgentKind> = opts.agents.iter().chain(&opts.floors).copied().collect();
    let mut train_cfg = opts.base.clone();
    train_cfg.env.noise_channel = NoiseChannelSpec::none();
    train_cfg.validate()?;
    let jobs: Vec<(AgentKind, u64)> = agents.iter().flat_map(|&a| opts.seeds.iter().map(move |&s| (a, cell_seed(s, 0)))).collect();
    let runs_dir = opts.out_dir.join("runs");
    let trained = pool(opts.workers)?.install(|| {
        jobs.par_iter()
            .map(|&(agent, seed)| -> Result<TrainedPolicy> {
                let config = RunConfig { agent, seed, ..train_cfg.clone() };
                let (_, learner) = train(&config, Some(&run_csv_path(&runs_dir, "train", agent, seed)))?;
                Ok(TrainedPolicy { agent, seed, learner })
            })
            .collect::<Result<Vec<_>>>()
    })?;
    let result = noise_evaluate(&trained, &train_cfg.env, channels, probs, eval_episodes, opts.workers)?;
    write_noise_outputs(&result, &opts.out_dir)?;
    Ok(result)
}

fn write_noise_outputs(result: &NoiseResult, dir: &Path) -> Result<()> {
    write_rows(&dir.join("noise.csv"), &["agent", "channel", "p", "mean_return", "std_return", "n_episodes"], &result.rows)?;
    write_rows(&dir.join("noise_seeds.csv"), &["agent", "channel", "p", "seed", "mean_return"], &result.seed_rows)?;
    let mut series: Vec<Series> = Vec::new();
    for r in &result.rows {
        let label = format!("{} {}", r.agent, r.channel);
        match series.iter_mut().find(|s| s.label == label) {
            Some(s) => s.points.push((r.p, r.mean_return)),
            None => series.push(Series { label, points: vec![(r.p, r.mean_return)] }),
        }
    }
    write_line_chart(&dir.join("noise.svg"), "noise_study", "noise probability p", "mean evaluation return", &series, &reference_lines())?;
    Ok(())
}
