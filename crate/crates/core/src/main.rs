use std::collections::BTreeMap;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use log::{info, warn};

use quadls::experiment::{read_config_file, run_experiment, ExperimentConfig, Manifest};

/// Quadratic-approximation line searches for mini-batch training.
#[derive(Parser)]
#[command(name = "quadls", version)]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Train once with the first kind, batch size and seed given.
    Train(Opts),
    /// Spread of the proposed step at a fixed point and direction.
    Study(Opts),
    /// Fixed batch, every kind against golden-section search.
    CompareExact(Opts),
    /// Every kind × batch size × seed, plus per-group summaries.
    Sweep(Opts),
    /// Repeat the experiment recorded in a manifest.
    Rerun {
        #[arg(long)]
        manifest: PathBuf,
        /// Output directory; defaults to the one in the manifest.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args)]
struct Opts {
    /// Key-value file; command-line options take precedence over it.
    #[arg(long)]
    config: Option<PathBuf>,
    /// wdbc, mnist or cifar.
    #[arg(long)]
    dataset: Option<String>,
    /// Directory holding the dataset files (default: $QUADLS_DATA_DIR or ./data).
    #[arg(long)]
    data_dir: Option<String>,
    /// logistic, n1 or n2.
    #[arg(long)]
    net: Option<String>,
    /// Comma-separated hidden widths.
    #[arg(long)]
    hidden: Option<String>,
    #[arg(long)]
    loss: Option<String>,
    /// no-bounds, bounded or fixed-batch.
    #[arg(long)]
    regime: Option<String>,
    /// Comma-separated subset of fff,fgf,ffg,fgfg,gg.
    #[arg(long)]
    kinds: Option<String>,
    #[arg(long)]
    batch_sizes: Option<String>,
    #[arg(long)]
    seeds: Option<String>,
    /// Evaluation budget per run.
    #[arg(long)]
    budget: Option<String>,
    /// accept or reject extrapolated steps.
    #[arg(long)]
    flag: Option<String>,
    #[arg(long)]
    alpha_min: Option<String>,
    #[arg(long)]
    alpha_max: Option<String>,
    #[arg(long)]
    eval_every: Option<String>,
    #[arg(long)]
    n_fits: Option<String>,
    /// Iterations per compare-exact run.
    #[arg(long)]
    iterations: Option<String>,
    #[arg(long)]
    fixed_batch: Option<String>,
    #[arg(long)]
    n_train: Option<String>,
    #[arg(long)]
    n_test: Option<String>,
    /// Comma-separated CIFAR-10 training batch files.
    #[arg(long)]
    cifar_batches: Option<String>,
    #[arg(long)]
    split_seed: Option<String>,
    /// Full-width networks and full budgets.
    #[arg(long)]
    paper_scale: bool,
    /// Worker threads; 0 uses every core.
    #[arg(long)]
    threads: Option<String>,
    #[arg(long)]
    load_weights: Option<String>,
    #[arg(long)]
    save_weights: Option<String>,
    #[arg(long)]
    out: Option<String>,
}

impl Opts {
    fn overrides(&self) -> Vec<(&'static str, Option<String>)> {
        vec![
            ("dataset", self.dataset.clone()),
            ("data_dir", self.data_dir.clone()),
            ("net", self.net.clone()),
            ("hidden", self.hidden.clone()),
            ("loss", self.loss.clone()),
            ("regime", self.regime.clone()),
            ("kinds", self.kinds.clone()),
            ("batch_sizes", self.batch_sizes.clone()),
            ("seeds", self.seeds.clone()),
            ("budget", self.budget.clone()),
            ("flag", self.flag.clone()),
            ("alpha_min", self.alpha_min.clone()),
            ("alpha_max", self.alpha_max.clone()),
            ("eval_every", self.eval_every.clone()),
            ("n_fits", self.n_fits.clone()),
            ("iterations", self.iterations.clone()),
            ("fixed_batch", self.fixed_batch.clone()),
            ("n_train", self.n_train.clone()),
            ("n_test", self.n_test.clone()),
            ("cifar_batches", self.cifar_batches.clone()),
            ("split_seed", self.split_seed.clone()),
            ("paper_scale", self.paper_scale.then(|| "true".to_string())),
            ("threads", self.threads.clone()),
            ("load_weights", self.load_weights.clone()),
            ("save_weights", self.save_weights.clone()),
            ("out", self.out.clone()),
        ]
    }

    fn resolve(&self, command: &str) -> quadls::Result<ExperimentConfig> {
        let mut map = match &self.config {
            Some(path) => read_config_file(path)?,
            None => BTreeMap::new(),
        };
        map.insert("command".into(), command.into());
        for (k, v) in self.overrides() {
            if let Some(v) = v {
                map.insert(k.into(), v);
            }
        }
        ExperimentConfig::from_map(&map)
    }
}

fn run(cli: Cli) -> quadls::Result<()> {
    let config = match cli.command {
        Cmd::Train(o) => o.resolve("train")?,
        Cmd::Study(o) => o.resolve("study")?,
        Cmd::CompareExact(o) => o.resolve("compare-exact")?,
        Cmd::Sweep(o) => o.resolve("sweep")?,
        Cmd::Rerun { manifest, out } => {
            let mut config = Manifest::load(&manifest)?.config;
            if let Some(out) = out {
                config.out = out;
            }
            config
        }
    };
    if config.paper_scale {
        warn!("paper-scale networks and budgets selected; runs can take many hours");
    }
    let manifest = run_experiment(&config)?;
    let aborted = manifest.runs.iter().filter(|r| r.status.starts_with("aborted")).count();
    info!("{} runs written to {}, {aborted} aborted", manifest.runs.len(), config.out.display());
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
