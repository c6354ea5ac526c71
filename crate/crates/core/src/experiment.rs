//! Experiment configuration, manifests and the sweep/study/compare drivers
//! behind the command-line tool.
//!
//! Configuration is a flat `key = value` text file. Blank lines and lines
//! starting with `#` are ignored; list values are comma separated. Values
//! given on the command line replace values from the file, which replace the
//! defaults.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rayon::prelude::*;
use sha2::{Digest, Sha256};

use crate::approx::{ApproxKind, Bounds};
use crate::data::{load_cifar10, load_mnist, load_wdbc, Dataset, SamplerMode};
use crate::error::{Error, Result};
use crate::net::{init_weights, load_weights, save_weights, Loss, NetworkSpec};
use crate::objective::{NetObjective, Objective};
use crate::search::{sgd_direction, ExtrapolationPolicy, LineSearchConfig};
use crate::study::{distribution_study, DistributionStats, StudyConfig};
use crate::train::{fe_grid, summarize, train, StepRule, SummaryRow, TrainConfig, TrainRun};

pub const DATA_DIR_ENV: &str = "QUADLS_DATA_DIR";
pub const RUN_HEADER: [&str; 7] = ["fe", "iter", "alpha", "train_error", "test_error", "dtheta", "outcome"];
pub const GOLDEN_REL_TOL: f64 = 1e-6;
const SUMMARY_POINTS: u64 = 100;

macro_rules! keyword_enum {
    ($ty:ident { $($variant:ident => $name:literal),* $(,)? }) => {
        #[derive(Debug, Clone, Copy, PartialEq, Eq)]
        pub enum $ty { $($variant),* }
        impl $ty {
            pub fn as_str(self) -> &'static str {
                match self { $($ty::$variant => $name),* }
            }
        }
        impl fmt::Display for $ty {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.as_str())
            }
        }
        impl FromStr for $ty {
            type Err = Error;
            fn from_str(s: &str) -> Result<Self> {
                match s {
                    $($name => Ok($ty::$variant),)*
                    other => Err(Error::Config(format!(concat!("unknown ", stringify!($ty), " {:?}"), other))),
                }
            }
        }
    };
}

keyword_enum!(Command { Train => "train", Study => "study", CompareExact => "compare-exact", Sweep => "sweep" });
keyword_enum!(DatasetKind { Wdbc => "wdbc", Mnist => "mnist", Cifar => "cifar" });
keyword_enum!(Regime { NoBounds => "no-bounds", Bounded => "bounded", FixedBatch => "fixed-batch" });
keyword_enum!(NetKind { Logistic => "logistic", Shallow => "n1", Deep => "n2" });

/// A fully resolved experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub command: Command,
    pub dataset: DatasetKind,
    pub data_dir: PathBuf,
    pub net: NetKind,
    pub hidden: Vec<usize>,
    pub loss: Option<Loss>,
    pub regime: Regime,
    pub kinds: Vec<ApproxKind>,
    pub batch_sizes: Vec<usize>,
    pub seeds: Vec<u64>,
    pub budget: u64,
    pub flag: ExtrapolationPolicy,
    pub alpha_min: f64,
    pub alpha_max: f64,
    pub eval_every: u64,
    pub n_fits: usize,
    pub iterations: u64,
    pub fixed_batch: usize,
    pub n_train: Option<usize>,
    pub n_test: Option<usize>,
    pub cifar_batches: Vec<String>,
    pub split_seed: u64,
    pub paper_scale: bool,
    pub threads: usize,
    pub load_weights: Option<PathBuf>,
    pub save_weights: Option<PathBuf>,
    pub out: PathBuf,
}

/// Keys accepted in configuration files and manifests.
pub const KEYS: [&str; 27] = [
    "command",
    "dataset",
    "data_dir",
    "net",
    "hidden",
    "loss",
    "regime",
    "kinds",
    "batch_sizes",
    "seeds",
    "budget",
    "flag",
    "alpha_min",
    "alpha_max",
    "eval_every",
    "n_fits",
    "iterations",
    "fixed_batch",
    "n_train",
    "n_test",
    "cifar_batches",
    "split_seed",
    "paper_scale",
    "threads",
    "load_weights",
    "save_weights",
    "out",
];

/// Parses `key = value` lines. Later lines win.
pub fn parse_key_values(text: &str) -> Result<BTreeMap<String, String>> {
    let mut map = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("line {}: expected key = value, found {line:?}", i + 1)))?;
        map.insert(k.trim().to_string(), v.trim().to_string());
    }
    Ok(map)
}

pub fn read_config_file(path: &Path) -> Result<BTreeMap<String, String>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let map = parse_key_values(&text)?;
    if let Some(k) = map.keys().find(|k| !KEYS.contains(&k.as_str())) {
        return Err(Error::Config(format!("{}: unknown key {k:?}", path.display())));
    }
    Ok(map)
}

fn list<T: FromStr>(key: &str, s: &str) -> Result<Vec<T>>
where
    T::Err: fmt::Display,
{
    s.split(',')
        .map(str::trim)
        .filter(|p| !p.is_empty())
        .map(|p| p.parse::<T>().map_err(|e| Error::Config(format!("{key}: {e}"))))
        .collect()
}

fn scalar<T: FromStr>(key: &str, s: &str) -> Result<T>
where
    T::Err: fmt::Display,
{
    s.trim().parse::<T>().map_err(|e| Error::Config(format!("{key}: {s:?}: {e}")))
}

fn join<T: fmt::Display>(v: &[T]) -> String {
    v.iter().map(ToString::to_string).collect::<Vec<_>>().join(",")
}

impl ExperimentConfig {
    /// Resolves raw key/value pairs against the defaults.
    pub fn from_map(map: &BTreeMap<String, String>) -> Result<Self> {
        if let Some(k) = map.keys().find(|k| !KEYS.contains(&k.as_str())) {
            return Err(Error::Config(format!("unknown key {k:?}")));
        }
        let get = |k: &str| map.get(k).map(String::as_str).filter(|v| !v.is_empty());
        let raw = |k: &str| map.get(k).map(String::as_str);
        let command: Command = scalar("command", get("command").unwrap_or("sweep"))?;
        let dataset: DatasetKind = scalar("dataset", get("dataset").unwrap_or("wdbc"))?;
        let paper_scale: bool = get("paper_scale").map(|v| scalar("paper_scale", v)).transpose()?.unwrap_or(false);
        let net: NetKind = match get("net") {
            Some(v) => scalar("net", v)?,
            None if dataset == DatasetKind::Wdbc => NetKind::Logistic,
            None => NetKind::Shallow,
        };
        let hidden = match get("hidden") {
            Some(v) => list("hidden", v)?,
            None => match (net, paper_scale) {
                (NetKind::Logistic, _) => Vec::new(),
                (NetKind::Shallow, false) => vec![80],
                (NetKind::Shallow, true) => vec![800],
                (NetKind::Deep, false) => vec![100, 50, 25],
                (NetKind::Deep, true) => vec![1000, 500, 250],
            },
        };
        let regime: Regime = match get("regime") {
            Some(v) => scalar("regime", v)?,
            None if command == Command::CompareExact => Regime::FixedBatch,
            None => Regime::Bounded,
        };
        let bounds = if dataset == DatasetKind::Wdbc { Bounds::wdbc() } else { Bounds::standard() };
        let budget = match get("budget") {
            Some(v) => scalar("budget", v)?,
            None => match (dataset, paper_scale) {
                (DatasetKind::Wdbc, false) => 10_000,
                (DatasetKind::Wdbc, true) => 100_000,
                (DatasetKind::Mnist, true) => 40_000,
                (DatasetKind::Cifar, true) => 10_000,
                (_, false) => 5_000,
            },
        };
        let data_dir = match get("data_dir") {
            Some(v) => PathBuf::from(v),
            None => std::env::var_os(DATA_DIR_ENV).map(PathBuf::from).unwrap_or_else(|| PathBuf::from("data")),
        };
        let cfg = Self {
            command,
            dataset,
            data_dir,
            net,
            hidden,
            loss: get("loss").map(|v| scalar("loss", v)).transpose()?,
            regime,
            kinds: list("kinds", raw("kinds").unwrap_or("gg,fgf,ffg,fgfg,fff"))?,
            batch_sizes: list("batch_sizes", raw("batch_sizes").unwrap_or("10"))?,
            seeds: list("seeds", raw("seeds").unwrap_or("0"))?,
            budget,
            flag: scalar("flag", get("flag").unwrap_or("reject"))?,
            alpha_min: get("alpha_min").map(|v| scalar("alpha_min", v)).transpose()?.unwrap_or(bounds.alpha_min()),
            alpha_max: get("alpha_max").map(|v| scalar("alpha_max", v)).transpose()?.unwrap_or(bounds.alpha_max()),
            eval_every: scalar("eval_every", get("eval_every").unwrap_or("50"))?,
            n_fits: scalar("n_fits", get("n_fits").unwrap_or("200"))?,
            iterations: match get("iterations") {
                Some(v) => scalar("iterations", v)?,
                None if paper_scale => 3000,
                None => 300,
            },
            fixed_batch: scalar("fixed_batch", get("fixed_batch").unwrap_or("10000"))?,
            n_train: get("n_train").map(|v| scalar("n_train", v)).transpose()?,
            n_test: get("n_test").map(|v| scalar("n_test", v)).transpose()?,
            cifar_batches: list("cifar_batches", get("cifar_batches").unwrap_or("data_batch_1.bin"))?,
            split_seed: scalar("split_seed", get("split_seed").unwrap_or("0"))?,
            paper_scale,
            threads: scalar("threads", get("threads").unwrap_or("0"))?,
            load_weights: get("load_weights").map(PathBuf::from),
            save_weights: get("save_weights").map(PathBuf::from),
            out: PathBuf::from(get("out").unwrap_or("results")),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |m: &str| Err(Error::Config(m.to_string()));
        if self.kinds.is_empty() {
            return fail("no approximation kinds given");
        }
        if self.batch_sizes.is_empty() || self.batch_sizes.contains(&0) {
            return fail("batch sizes must be a non-empty list of positive integers");
        }
        if self.seeds.is_empty() {
            return fail("no seeds given");
        }
        if self.budget == 0 || self.eval_every == 0 || self.iterations == 0 || self.fixed_batch == 0 {
            return fail("budget, eval_every, iterations and fixed_batch must be positive");
        }
        if self.command == Command::CompareExact && self.regime != Regime::FixedBatch {
            return fail("compare-exact runs in the fixed-batch regime");
        }
        if self.net == NetKind::Logistic && !self.hidden.is_empty() {
            return fail("the logistic network has no hidden layers");
        }
        if self.net == NetKind::Shallow && self.hidden.len() != 1 {
            return fail("n1 takes exactly one hidden width");
        }
        if self.net == NetKind::Deep && self.hidden.len() != 3 {
            return fail("n2 takes exactly three hidden widths");
        }
        self.bounds()?;
        Ok(())
    }

    /// Bounds as the regime applies them.
    pub fn bounds(&self) -> Result<Bounds> {
        Bounds::new(self.alpha_min, self.alpha_max, self.regime != Regime::NoBounds)
    }

    /// Every key with its resolved value, in `KEYS` order.
    pub fn to_pairs(&self) -> Vec<(&'static str, String)> {
        let opt = |v: Option<String>| v.unwrap_or_default();
        let path = |p: &Option<PathBuf>| opt(p.as_ref().map(|p| p.display().to_string()));
        vec![
            ("command", self.command.to_string()),
            ("dataset", self.dataset.to_string()),
            ("data_dir", self.data_dir.display().to_string()),
            ("net", self.net.to_string()),
            ("hidden", join(&self.hidden)),
            ("loss", opt(self.loss.map(|l| l.to_string()))),
            ("regime", self.regime.to_string()),
            ("kinds", self.kinds.iter().map(|k| k.as_str()).collect::<Vec<_>>().join(",")),
            ("batch_sizes", join(&self.batch_sizes)),
            ("seeds", join(&self.seeds)),
            ("budget", self.budget.to_string()),
            ("flag", self.flag.as_str().to_string()),
            ("alpha_min", format!("{:e}", self.alpha_min)),
            ("alpha_max", format!("{:e}", self.alpha_max)),
            ("eval_every", self.eval_every.to_string()),
            ("n_fits", self.n_fits.to_string()),
            ("iterations", self.iterations.to_string()),
            ("fixed_batch", self.fixed_batch.to_string()),
            ("n_train", opt(self.n_train.map(|v| v.to_string()))),
            ("n_test", opt(self.n_test.map(|v| v.to_string()))),
            ("cifar_batches", self.cifar_batches.join(",")),
            ("split_seed", self.split_seed.to_string()),
            ("paper_scale", self.paper_scale.to_string()),
            ("threads", self.threads.to_string()),
            ("load_weights", path(&self.load_weights)),
            ("save_weights", path(&self.save_weights)),
            ("out", self.out.display().to_string()),
        ]
    }

    /// SHA-256 over every resolved key except the output directory.
    pub fn hash(&self) -> String {
        let mut h = Sha256::new();
        for (k, v) in self.to_pairs() {
            if k != "out" {
                h.update(format!("{k}={v}\n"));
            }
        }
        hex::encode(h.finalize())
    }
}

/// Result of one run inside a sweep, as recorded in the manifest.
#[derive(Debug, Clone, PartialEq)]
pub struct RunStatus {
    pub name: String,
    pub status: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Manifest {
    pub config: ExperimentConfig,
    pub config_hash: String,
    pub runs: Vec<RunStatus>,
}

impl Manifest {
    pub fn render(&self) -> String {
        let mut s = String::new();
        for (k, v) in self.config.to_pairs() {
            s += &format!("{k} = {v}\n");
        }
        s += &format!("config_hash = {}\n", self.config_hash);
        for r in &self.runs {
            s += &format!("run.{} = {}\n", r.name, r.status);
        }
        s
    }

    /// Parses a manifest and checks its hash against the recorded config.
    pub fn parse(text: &str) -> Result<Self> {
        let mut map = parse_key_values(text)?;
        let hash = map.remove("config_hash").ok_or_else(|| Error::Config("manifest has no config_hash".into()))?;
        let mut runs = Vec::new();
        let keys: Vec<String> = map.keys().filter(|k| k.starts_with("run.")).cloned().collect();
        for k in keys {
            let status = map.remove(&k).unwrap_or_default();
            runs.push(RunStatus { name: k["run.".len()..].to_string(), status });
        }
        let config = ExperimentConfig::from_map(&map)?;
        if config.hash() != hash {
            return Err(Error::Config("manifest config_hash does not match its settings".into()));
        }
        Ok(Self { config, config_hash: hash, runs })
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(&fs::read_to_string(path).map_err(|e| Error::io(path, e))?)
    }
}

fn require(path: PathBuf) -> Result<PathBuf> {
    if path.is_file() {
        Ok(path)
    } else {
        Err(Error::Config(format!("dataset file {} not found", path.display())))
    }
}

/// Loads the configured dataset from the data directory.
pub fn load_dataset(cfg: &ExperimentConfig) -> Result<Dataset> {
    let dir = &cfg.data_dir;
    let ds = match cfg.dataset {
        DatasetKind::Wdbc => load_wdbc(require(dir.join("wdbc.data"))?, cfg.split_seed)?,
        DatasetKind::Mnist => {
            let ti = require(dir.join("train-images-idx3-ubyte"))?;
            let tl = require(dir.join("train-labels-idx1-ubyte"))?;
            let (vi, vl) = (dir.join("t10k-images-idx3-ubyte"), dir.join("t10k-labels-idx1-ubyte"));
            let test = (vi.is_file() && vl.is_file()).then_some((vi.as_path(), vl.as_path()));
            load_mnist(ti, tl, test)?
        }
        DatasetKind::Cifar => {
            let batches = cfg.cifar_batches.iter().map(|b| require(dir.join(b))).collect::<Result<Vec<_>>>()?;
            let test = dir.join("test_batch.bin");
            load_cifar10(&batches, test.is_file().then_some(test.as_path()))?
        }
    };
    let (n_train, n_test) = (cfg.n_train.unwrap_or(usize::MAX), cfg.n_test.unwrap_or(usize::MAX));
    Ok(ds.truncated(n_train, n_test))
}

/// The configured architecture for `ds`.
pub fn network(cfg: &ExperimentConfig, ds: &Dataset) -> Result<NetworkSpec> {
    let (i, o) = (ds.n_features(), ds.n_targets());
    let spec = match cfg.net {
        NetKind::Logistic => NetworkSpec::logistic(i),
        NetKind::Shallow => NetworkSpec::shallow(i, cfg.hidden[0], o),
        NetKind::Deep => NetworkSpec::deep(i, [cfg.hidden[0], cfg.hidden[1], cfg.hidden[2]], o),
    };
    let spec = match cfg.loss {
        Some(l) => spec.with_loss(l)?,
        None => spec,
    };
    spec.check_dataset(ds)?;
    Ok(spec)
}

/// Training settings for one run of `rule` with batch size `m`.
pub fn train_config(cfg: &ExperimentConfig, n_train: usize, m: usize, rule: StepRule, seed: u64) -> TrainConfig {
    let (mode, m, freeze) = match cfg.regime {
        Regime::FixedBatch => (SamplerMode::Static, cfg.fixed_batch.min(n_train), true),
        _ if m >= n_train => (SamplerMode::Full, n_train, false),
        _ => (SamplerMode::Dynamic, m, false),
    };
    let mut tc = TrainConfig::new(mode, m, rule, cfg.budget, seed);
    tc.eval_every = cfg.eval_every;
    tc.freeze_batch = freeze;
    if cfg.command == Command::CompareExact {
        tc.budget = u64::MAX;
        tc.max_iters = Some(cfg.iterations);
    }
    tc
}

/// Fixed-notation decimals for moderate magnitudes, exponent form otherwise.
pub fn fmt_f64(v: f64) -> String {
    let a = v.abs();
    if v == 0.0 || (1e-4..1e15).contains(&a) || !v.is_finite() {
        format!("{v}")
    } else {
        format!("{v:e}")
    }
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(fmt_f64).unwrap_or_default()
}

fn csv_writer(path: &Path) -> Result<csv::Writer<fs::File>> {
    csv::Writer::from_path(path).map_err(|e| Error::Checkpoint(format!("{}: {e}", path.display())))
}

fn csv_err(path: &Path, e: impl fmt::Display) -> Error {
    Error::Checkpoint(format!("{}: {e}", path.display()))
}

/// Writes one row per iteration under [`RUN_HEADER`].
pub fn write_run_csv(path: &Path, run: &TrainRun) -> Result<()> {
    let mut w = csv_writer(path)?;
    w.write_record(RUN_HEADER).map_err(|e| csv_err(path, e))?;
    for r in &run.records {
        w.write_record([
            r.fe.to_string(),
            r.iter.to_string(),
            fmt_f64(r.alpha),
            fmt_opt(r.train_error),
            fmt_opt(r.test_error),
            fmt_opt(r.dtheta),
            r.outcome.map_or("exact", |o| o.as_str()).to_string(),
        ])
        .map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn write_summary_csv(path: &Path, rows: &[SummaryRow]) -> Result<()> {
    let mut w = csv_writer(path)?;
    let mut header = vec!["fe".to_string(), "runs".to_string()];
    for col in ["alpha", "log_alpha", "train_error", "log_train_error", "test_error", "log_test_error", "dtheta"] {
        header.push(format!("{col}_mean"));
        header.push(format!("{col}_sd"));
    }
    w.write_record(&header).map_err(|e| csv_err(path, e))?;
    for r in rows {
        let mut rec = vec![r.fe.to_string(), r.alpha.n.to_string()];
        for s in [r.alpha, r.log_alpha, r.train_error, r.log_train_error, r.test_error, r.log_test_error, r.dtheta] {
            rec.push(fmt_f64(s.mean));
            rec.push(fmt_f64(s.sd));
        }
        w.write_record(&rec).map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn write_study_csvs(stats_path: &Path, hist_path: &Path, s: &DistributionStats, m: usize, seed: u64) -> Result<()> {
    let mut w = csv_writer(stats_path)?;
    w.write_record([
        "kind",
        "m",
        "seed",
        "n",
        "rejected",
        "mu",
        "sigma",
        "q1",
        "q2",
        "q3",
        "reference_minimizer",
        "alpha1",
        "x",
        "d",
    ])
    .map_err(|e| csv_err(stats_path, e))?;
    w.write_record([
        s.kind.as_str().to_string(),
        m.to_string(),
        seed.to_string(),
        s.n.to_string(),
        s.rejected.to_string(),
        fmt_f64(s.mu),
        fmt_f64(s.sigma),
        fmt_f64(s.q1),
        fmt_f64(s.q2),
        fmt_f64(s.q3),
        fmt_f64(s.reference_minimizer),
        fmt_f64(s.alpha1),
        "seeded-init".to_string(),
        "full-batch-descent".to_string(),
    ])
    .map_err(|e| csv_err(stats_path, e))?;
    w.flush().map_err(|e| Error::io(stats_path, e))?;

    let mut w = csv_writer(hist_path)?;
    w.write_record(["lo", "hi", "count"]).map_err(|e| csv_err(hist_path, e))?;
    for (i, c) in s.counts.iter().enumerate() {
        w.write_record([fmt_f64(s.edges[i]), fmt_f64(s.edges[i + 1]), c.to_string()])
            .map_err(|e| csv_err(hist_path, e))?;
    }
    w.flush().map_err(|e| Error::io(hist_path, e))
}

fn status_of(run: &TrainRun) -> String {
    match &run.aborted {
        Some(reason) => format!("aborted fe={} {reason}", run.total_fe()),
        None => format!("ok fe={} iters={}", run.total_fe(), run.records.len()),
    }
}

fn pool(threads: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::Config(format!("worker pool: {e}")))
}

fn start_weights(cfg: &ExperimentConfig, spec: &NetworkSpec, seed: u64) -> Result<Vec<f64>> {
    match &cfg.load_weights {
        Some(path) => {
            let (saved, x) = load_weights(path)?;
            if saved.layers() != spec.layers() {
                return Err(Error::Checkpoint(format!("{} holds a different architecture", path.display())));
            }
            Ok(x.into_inner())
        }
        None => Ok(init_weights(spec, seed).into_inner()),
    }
}

/// Runs the configured command and writes its CSVs and manifest into
/// `cfg.out`. Returns the manifest.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<Manifest> {
    cfg.validate()?;
    let ds = load_dataset(cfg)?;
    let spec = network(cfg, &ds)?;
    let obj = NetObjective::new(&spec, &ds)?;
    fs::create_dir_all(&cfg.out).map_err(|e| Error::io(&cfg.out, e))?;
    let runs = match cfg.command {
        Command::Train => run_train(cfg, &spec, &obj)?,
        Command::Sweep => run_sweep(cfg, &spec, &obj)?,
        Command::Study => run_study(cfg, &spec, &obj)?,
        Command::CompareExact => run_compare_exact(cfg, &spec, &obj)?,
    };
    let manifest = Manifest { config: cfg.clone(), config_hash: cfg.hash(), runs };
    let path = cfg.out.join("manifest.txt");
    let mut f = fs::File::create(&path).map_err(|e| Error::io(&path, e))?;
    f.write_all(manifest.render().as_bytes()).map_err(|e| Error::io(&path, e))?;
    Ok(manifest)
}

fn approx_rule(cfg: &ExperimentConfig, kind: ApproxKind) -> Result<StepRule> {
    Ok(StepRule::Approx(LineSearchConfig::new(kind, cfg.flag, cfg.bounds()?)))
}

fn run_train(cfg: &ExperimentConfig, spec: &NetworkSpec, obj: &NetObjective<'_>) -> Result<Vec<RunStatus>> {
    let (kind, m, seed) = (cfg.kinds[0], cfg.batch_sizes[0], cfg.seeds[0]);
    let tc = train_config(cfg, obj.n_samples(), m, approx_rule(cfg, kind)?, seed);
    let run = train(obj, start_weights(cfg, spec, seed)?, &tc)?;
    let name = format!("{}_m{m}_s{seed}", kind.as_str());
    write_run_csv(&cfg.out.join(format!("run_{name}.csv")), &run)?;
    if let Some(path) = &cfg.save_weights {
        save_weights(path, spec, &run.final_x)?;
    }
    Ok(vec![RunStatus { name, status: status_of(&run) }])
}

fn run_sweep(cfg: &ExperimentConfig, spec: &NetworkSpec, obj: &NetObjective<'_>) -> Result<Vec<RunStatus>> {
    let mut jobs = Vec::new();
    for &kind in &cfg.kinds {
        for &m in &cfg.batch_sizes {
            for &seed in &cfg.seeds {
                jobs.push((kind, m, seed));
            }
        }
    }
    let results: Vec<TrainRun> = pool(cfg.threads)?.install(|| {
        jobs.par_iter()
            .map(|&(kind, m, seed)| {
                let tc = train_config(cfg, obj.n_samples(), m, approx_rule(cfg, kind)?, seed);
                let run = train(obj, start_weights(cfg, spec, seed)?, &tc)?;
                write_run_csv(&cfg.out.join(format!("run_{}_m{m}_s{seed}.csv", kind.as_str())), &run)?;
                Ok(run)
            })
            .collect::<Result<_>>()
    })?;
    let grid = fe_grid(cfg.budget, SUMMARY_POINTS);
    let per_group = cfg.seeds.len();
    for (g, chunk) in results.chunks(per_group).enumerate() {
        let (kind, m, _) = jobs[g * per_group];
        let rows = summarize(chunk, &grid)?;
        write_summary_csv(&cfg.out.join(format!("summary_{}_m{m}.csv", kind.as_str())), &rows)?;
    }
    Ok(jobs
        .iter()
        .zip(&results)
        .map(|(&(kind, m, seed), run)| RunStatus {
            name: format!("{}_m{m}_s{seed}", kind.as_str()),
            status: status_of(run),
        })
        .collect())
}

fn run_study(cfg: &ExperimentConfig, spec: &NetworkSpec, obj: &NetObjective<'_>) -> Result<Vec<RunStatus>> {
    let all: Vec<usize> = (0..obj.n_samples()).collect();
    let mut out = Vec::new();
    pool(cfg.threads)?.install(|| {
        for &seed in &cfg.seeds {
            let x = start_weights(cfg, spec, seed)?;
            let d = sgd_direction(&obj.loss_grad(&x, &all)?.1);
            for &m in &cfg.batch_sizes {
                for &kind in &cfg.kinds {
                    let sc = StudyConfig {
                        kind,
                        mode: SamplerMode::Dynamic,
                        m: m.min(obj.n_samples()),
                        n_fits: cfg.n_fits,
                        seed,
                        bounds: cfg.bounds()?,
                    };
                    let s = distribution_study(obj, &x, &d, &sc)?;
                    let name = format!("{}_m{m}_s{seed}", kind.as_str());
                    write_study_csvs(
                        &cfg.out.join(format!("study_{name}_stats.csv")),
                        &cfg.out.join(format!("study_{name}_hist.csv")),
                        &s,
                        m,
                        seed,
                    )?;
                    out.push(RunStatus { name, status: format!("ok n={} rejected={}", s.n, s.rejected) });
                }
            }
        }
        Ok(out)
    })
}

fn run_compare_exact(cfg: &ExperimentConfig, spec: &NetworkSpec, obj: &NetObjective<'_>) -> Result<Vec<RunStatus>> {
    let golden = StepRule::Exact { bounds: cfg.bounds()?, rel_tol: GOLDEN_REL_TOL };
    let mut jobs: Vec<(String, StepRule, u64)> = Vec::new();
    for &seed in &cfg.seeds {
        for &kind in &cfg.kinds {
            jobs.push((kind.as_str().to_string(), approx_rule(cfg, kind)?, seed));
        }
        jobs.push(("golden".to_string(), golden, seed));
    }
    pool(cfg.threads)?.install(|| {
        jobs.par_iter()
            .map(|(label, rule, seed)| {
                let tc = train_config(cfg, obj.n_samples(), cfg.fixed_batch, *rule, *seed);
                let run = train(obj, start_weights(cfg, spec, *seed)?, &tc)?;
                let name = format!("{label}_s{seed}");
                write_run_csv(&cfg.out.join(format!("exact_{name}.csv")), &run)?;
                Ok(RunStatus { name, status: status_of(&run) })
            })
            .collect()
    })
}
