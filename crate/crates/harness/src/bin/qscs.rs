use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use qscs_harness::stats::MA_WINDOW;
use qscs_harness::studies::{
    alpha_sweep, lr_sweep, n_ablation, noise_study, report, summary_rows, write_outputs, CellResult, StudyOptions,
    SweepResult, DEFAULT_ALPHAS, DEFAULT_LRS, DEFAULT_NOISE_PROBS, DEFAULT_NS, NOISE_CHANNELS, NOISE_EVAL_EPISODES,
};
use qscs_harness::{run_training, AgentKind, RunConfig};

#[derive(Parser)]
#[command(name = "qscs", version, about = "Quantum-inspired supply-chain control experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train one agent and write its per-episode CSV.
    Train(Common),
    /// Sweep the six learning rates.
    SweepLr(Common),
    /// Ablate the number of spins over N = 2..6.
    AblateN(Common),
    /// Sweep the eight reward-weight rows.
    SweepAlpha(Common),
    /// Evaluate trained policies under bit-flip, depolarizing and phase-flip noise.
    Noise(Common),
    /// Recompute summaries and plots of a finished study directory.
    Report {
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Args)]
struct Common {
    /// JSON run configuration; unknown keys are rejected.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    episodes: Option<usize>,
    /// Agent to train (studies: restricts the learned agents to this one).
    #[arg(long)]
    agent: Option<AgentKind>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, default_value_t = 1)]
    workers: usize,
    /// Seeds per study cell.
    #[arg(long, default_value_t = 10)]
    n_seeds: usize,
}

impl Common {
    fn base(&self, default_out: &str) -> Result<RunConfig> {
        let mut c = match &self.config {
            Some(path) => RunConfig::load(path).with_context(|| format!("loading {}", path.display()))?,
            None => RunConfig { out_dir: PathBuf::from(default_out), ..RunConfig::default() },
        };
        if let Some(s) = self.seed {
            c.seed = s;
        }
        if let Some(e) = self.episodes {
            c.episodes = e;
        }
        if let Some(a) = self.agent {
            c.agent = a;
        }
        if let Some(o) = &self.out {
            c.out_dir = o.clone();
        }
        c.validate()?;
        Ok(c)
    }

    fn study(&self, default_out: &str) -> Result<StudyOptions> {
        let base = self.base(default_out)?;
        let out = base.out_dir.clone();
        let mut opts = StudyOptions::new(base, self.n_seeds, out);
        opts.workers = self.workers;
        if let Some(a) = self.agent {
            opts.agents = vec![a];
            opts.floors.retain(|&f| f != a);
        }
        Ok(opts)
    }
}

fn print_summary(result: &SweepResult) -> Result<()> {
    for r in summary_rows(result)? {
        println!(
            "{:<12} {:<10} mean_ma {:>8.3}  final10_ma {:>8.3}  best_max_ma {:>8.3}  seeds {}",
            r.cell, r.agent, r.mean_ma, r.final10_ma, r.best_max_ma, r.n_seeds
        );
    }
    for c in &result.cells {
        for (seed, msg) in &c.failures {
            eprintln!("failed: {} {} seed {seed}: {msg}", c.cell, c.agent);
        }
    }
    Ok(())
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    match cli.command {
        Command::Train(args) => {
            let config = args.base("runs/train")?;
            let records = run_training(&config)?;
            if records.len() < MA_WINDOW {
                println!("{} episodes written; at least {MA_WINDOW} are needed for a summary", records.len());
                return Ok(());
            }
            let result = SweepResult {
                study: "train".into(),
                cells: vec![CellResult {
                    cell: "run".into(),
                    agent: config.agent,
                    runs: vec![(config.seed, records)],
                    failures: vec![],
                }],
            };
            if !write_outputs(&result, &config.out_dir)? {
                println!("nothing to plot");
            }
            print_summary(&result)?;
        }
        Command::SweepLr(args) => print_summary(&lr_sweep(&args.study("runs/sweep_lr")?, &DEFAULT_LRS)?)?,
        Command::AblateN(args) => {
            let mut opts = args.study("runs/ablate_n")?;
            // enumeration at N = 6 is far too slow for a per-step planner
            opts.floors.retain(|&f| f != AgentKind::Mpc);
            print_summary(&n_ablation(&opts, &DEFAULT_NS)?)?
        }
        Command::SweepAlpha(args) => print_summary(&alpha_sweep(&args.study("runs/sweep_alpha")?, &DEFAULT_ALPHAS)?)?,
        Command::Noise(args) => {
            let result = noise_study(&args.study("runs/noise")?, &NOISE_CHANNELS, &DEFAULT_NOISE_PROBS, NOISE_EVAL_EPISODES)?;
            for r in &result.rows {
                println!("{:<10} {:<13} p={:<5} mean {:>8.3} ± {:.3}", r.agent, r.channel, r.p, r.mean_return, r.std_return);
            }
        }
        Command::Report { out } => print_summary(&report(&out).with_context(|| format!("reading {}", out.display()))?)?,
    }
    Ok(())
}
