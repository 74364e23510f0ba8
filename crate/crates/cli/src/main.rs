//! `qhsvm` command-line front end.

use std::path::PathBuf;
use std::process::ExitCode;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand, ValueEnum};
use qhsvm::data::{generate_synthetic, CategoricalPolicy, CsvOptions, SyntheticKind, SyntheticSpec};
use qhsvm::feature_select::TreeConfig;
use qhsvm::pipeline::{
    kernel_command, load_dataset, run, select_features, write_outputs, CacheStatus, DataSource, KernelMode,
    PipelineError, RankingArtifact, RunConfig,
};

const EXIT_RUNTIME: u8 = 1;
const EXIT_DATA: u8 = 2;
const EXIT_USAGE: u8 = 64;

#[derive(Parser, Debug)]
#[command(name = "qhsvm", version, about = "Quantum-kernel one-class SVM anomaly detection")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    opts: Opts,
}

#[derive(Subcommand, Debug, Clone, Copy, PartialEq, Eq)]
enum Command {
    /// Rank features with a Gini decision tree and print the top k.
    Select,
    /// Compute and cache the train/test Gram matrices of trial 1.
    Kernel,
    /// Run every trial and report max/avg metrics.
    Run,
    /// Write a synthetic labeled CSV.
    Synth,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
enum KernelArg {
    Qexact,
    Qsampled,
    Linear,
    Rbf,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
enum CompareArg {
    None,
    Linear,
    Rbf,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
enum CategoricalArg {
    Frequency,
    Reject,
}

/// Every flag is optional so a `--config` file can fill or override it.
#[derive(Args, Debug, Clone, Default)]
struct Opts {
    /// CSV path, or `synthetic:<two-gaussians|planted-features>`.
    #[arg(long, global = true)]
    data: Option<String>,
    /// Name of the label column.
    #[arg(long, global = true)]
    label_col: Option<String>,
    /// Label values meaning baseline (comma-separated).
    #[arg(long, global = true, value_delimiter = ',')]
    baseline_values: Option<Vec<String>>,
    /// Label values meaning stress (comma-separated).
    #[arg(long, global = true, value_delimiter = ',')]
    stress_values: Option<Vec<String>>,
    /// Handling of non-numeric feature columns.
    #[arg(long, global = true)]
    categorical: Option<CategoricalArg>,
    /// Feature counts to evaluate (default 8,12).
    #[arg(long, global = true, value_delimiter = ',')]
    features: Option<Vec<usize>>,
    /// Kernel mode (default qexact).
    #[arg(long, global = true)]
    kernel: Option<KernelArg>,
    /// Comparison kernel run on identical splits (default rbf for quantum kernels, none otherwise).
    #[arg(long, global = true)]
    compare: Option<CompareArg>,
    /// Shots per pair for qsampled.
    #[arg(long, global = true)]
    shots: Option<u64>,
    /// RBF width (default 1/k).
    #[arg(long, global = true)]
    gamma: Option<f64>,
    #[arg(long, global = true)]
    nu: Option<f64>,
    #[arg(long, global = true)]
    trials: Option<usize>,
    /// Base seed for splits and sampling.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Kernel worker threads (default: QHSVM_WORKERS, then the core count).
    #[arg(long, global = true)]
    workers: Option<usize>,
    #[arg(long, global = true)]
    n_train: Option<usize>,
    /// Balanced test-set size (even).
    #[arg(long, global = true)]
    n_test: Option<usize>,
    #[arg(long, global = true)]
    max_depth: Option<usize>,
    #[arg(long, global = true)]
    min_samples_split: Option<usize>,
    #[arg(long, global = true)]
    cache_dir: Option<PathBuf>,
    #[arg(long, global = true)]
    out_dir: Option<PathBuf>,
    /// key=value file; its entries override flags.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Synthetic generator kind (synth command).
    #[arg(long, global = true)]
    kind: Option<String>,
    #[arg(long, global = true)]
    dims: Option<usize>,
    #[arg(long, global = true)]
    n_per_class: Option<usize>,
    /// Mean separation in standard deviations.
    #[arg(long, global = true)]
    separation: Option<f64>,
    #[arg(long, global = true)]
    planted_k: Option<usize>,
    /// Generator seed (defaults to --seed).
    #[arg(long, global = true)]
    synth_seed: Option<u64>,
    /// Output CSV for synth (default stdout).
    #[arg(long, global = true)]
    output: Option<PathBuf>,
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T, String>
where
    T::Err: std::fmt::Display,
{
    value.parse().map_err(|e| format!("config key {key}: cannot parse {value:?}: {e}"))
}

fn parse_list<T: FromStr>(key: &str, value: &str) -> Result<Vec<T>, String>
where
    T::Err: std::fmt::Display,
{
    value.split(',').map(|v| parse(key, v.trim())).collect()
}

fn parse_enum<T: ValueEnum>(key: &str, value: &str) -> Result<T, String> {
    T::from_str(value, true).map_err(|e| format!("config key {key}: {e}"))
}

impl Opts {
    fn set(&mut self, key: &str, value: &str) -> Result<(), String> {
        let k = key.replace('_', "-");
        match k.as_str() {
            "data" => self.data = Some(value.into()),
            "label-col" => self.label_col = Some(value.into()),
            "baseline-values" => self.baseline_values = Some(parse_list(key, value)?),
            "stress-values" => self.stress_values = Some(parse_list(key, value)?),
            "categorical" => self.categorical = Some(parse_enum(key, value)?),
            "features" => self.features = Some(parse_list(key, value)?),
            "kernel" => self.kernel = Some(parse_enum(key, value)?),
            "compare" => self.compare = Some(parse_enum(key, value)?),
            "shots" => self.shots = Some(parse(key, value)?),
            "gamma" => self.gamma = Some(parse(key, value)?),
            "nu" => self.nu = Some(parse(key, value)?),
            "trials" => self.trials = Some(parse(key, value)?),
            "seed" => self.seed = Some(parse(key, value)?),
            "workers" => self.workers = Some(parse(key, value)?),
            "n-train" => self.n_train = Some(parse(key, value)?),
            "n-test" => self.n_test = Some(parse(key, value)?),
            "max-depth" => self.max_depth = Some(parse(key, value)?),
            "min-samples-split" => self.min_samples_split = Some(parse(key, value)?),
            "cache-dir" => self.cache_dir = Some(value.into()),
            "out-dir" => self.out_dir = Some(value.into()),
            "kind" => self.kind = Some(value.into()),
            "dims" => self.dims = Some(parse(key, value)?),
            "n-per-class" => self.n_per_class = Some(parse(key, value)?),
            "separation" => self.separation = Some(parse(key, value)?),
            "planted-k" => self.planted_k = Some(parse(key, value)?),
            "synth-seed" => self.synth_seed = Some(parse(key, value)?),
            "output" => self.output = Some(value.into()),
            _ => return Err(format!("unknown config key {key:?}")),
        }
        Ok(())
    }

    /// Applies `key = value` lines; `#` starts a comment.
    fn apply_config(&mut self, text: &str) -> Result<(), String> {
        for (n, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| format!("config line {}: expected key=value", n + 1))?;
            self.set(key.trim(), value.trim())?;
        }
        Ok(())
    }

    fn synthetic_spec(&self, kind: &str) -> Result<SyntheticSpec, String> {
        let kind = SyntheticKind::parse(kind).ok_or_else(|| format!("unknown synthetic kind {kind:?}"))?;
        Ok(SyntheticSpec {
            kind,
            dims: self.dims.unwrap_or(16),
            n_per_class: self.n_per_class.unwrap_or(3000),
            separation: self.separation.unwrap_or(6.0),
            planted_k: self.planted_k.unwrap_or(8),
            seed: self.synth_seed.or(self.seed).unwrap_or(0),
        })
    }

    fn source(&self) -> Result<DataSource, String> {
        let data = self.data.as_deref().ok_or("--data is required")?;
        if let Some(kind) = data.strip_prefix("synthetic:") {
            return Ok(DataSource::Synthetic(self.synthetic_spec(kind)?));
        }
        let mut options = CsvOptions::default();
        if let Some(c) = &self.label_col {
            options.label_column = c.clone();
        }
        if let Some(v) = &self.baseline_values {
            options.baseline_values = v.clone();
        }
        if let Some(v) = &self.stress_values {
            options.stress_values = v.clone();
        }
        if let Some(c) = self.categorical {
            options.categorical = match c {
                CategoricalArg::Frequency => CategoricalPolicy::Frequency,
                CategoricalArg::Reject => CategoricalPolicy::Reject,
            };
        }
        Ok(DataSource::Csv { path: PathBuf::from(data), options })
    }

    fn kernel_mode(&self) -> KernelMode {
        match self.kernel.unwrap_or(KernelArg::Qexact) {
            KernelArg::Qexact => KernelMode::QuantumExact,
            KernelArg::Qsampled => KernelMode::QuantumSampled { shots: self.shots.unwrap_or(1024) },
            KernelArg::Linear => KernelMode::ClassicalLinear,
            KernelArg::Rbf => KernelMode::ClassicalRbf { gamma: self.gamma },
        }
    }

    fn run_config(&self) -> Result<RunConfig, String> {
        let mut c = RunConfig::new(self.source()?);
        c.kernel = self.kernel_mode();
        let default_compare = if c.kernel.is_quantum() { CompareArg::Rbf } else { CompareArg::None };
        c.compare = match self.compare.unwrap_or(default_compare) {
            CompareArg::None => None,
            CompareArg::Linear => Some(KernelMode::ClassicalLinear),
            CompareArg::Rbf => Some(KernelMode::ClassicalRbf { gamma: self.gamma }),
        };
        if let Some(f) = &self.features {
            c.features = f.clone();
        }
        c.nu = self.nu.unwrap_or(c.nu);
        c.trials = self.trials.unwrap_or(c.trials);
        c.seed = self.seed.unwrap_or(c.seed);
        c.workers = self.workers.unwrap_or(c.workers);
        c.n_train = self.n_train.unwrap_or(c.n_train);
        c.n_test = self.n_test.unwrap_or(c.n_test);
        c.tree = TreeConfig {
            max_depth: self.max_depth,
            min_samples_split: self.min_samples_split.unwrap_or(TreeConfig::default().min_samples_split),
        };
        c.cache_dir = self.cache_dir.clone();
        c.out_dir = self.out_dir.clone();
        Ok(c)
    }
}

/// Failure with its exit code.
struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn usage(message: impl Into<String>) -> Self {
        Self { code: EXIT_USAGE, message: message.into() }
    }
}

impl From<PipelineError> for Failure {
    fn from(e: PipelineError) -> Self {
        let code = match e {
            PipelineError::Usage(_) => EXIT_USAGE,
            PipelineError::Data(_) => EXIT_DATA,
            PipelineError::Runtime(_) => EXIT_RUNTIME,
        };
        Self { code, message: e.to_string() }
    }
}

impl From<qhsvm::Error> for Failure {
    fn from(e: qhsvm::Error) -> Self {
        Self { code: EXIT_RUNTIME, message: e.to_string() }
    }
}

fn cmd_select(config: &RunConfig) -> Result<(), Failure> {
    let data = load_dataset(&config.data)?;
    for &k in &config.features {
        let (tree, ranking) = select_features(&data, &config.tree, k)?;
        let artifact = RankingArtifact::new(&data, &ranking);
        println!("top {k} features of {}", data.raw.source);
        print!("{}", artifact.table());
        if let Some(dir) = &config.out_dir {
            std::fs::create_dir_all(dir).map_err(|e| Failure::from(qhsvm::Error::io(dir, e)))?;
            let write = |name: String, text: String| {
                let path = dir.join(name);
                std::fs::write(&path, text).map_err(|e| Failure::from(qhsvm::Error::io(&path, e)))
            };
            write(format!("ranking_k{k}.json"), artifact.to_json())?;
            write(format!("ranking_k{k}.txt"), artifact.table())?;
            write("tree.txt".into(), tree.dump())?;
        }
    }
    Ok(())
}

fn cmd_kernel(config: &RunConfig) -> Result<(), Failure> {
    if config.cache_dir.is_none() {
        return Err(Failure::usage("kernel needs --cache-dir"));
    }
    let (jobs, notices) = kernel_command(config)?;
    notices.iter().for_each(|n| eprintln!("notice: {n}"));
    for job in jobs {
        let how = match job.status {
            CacheStatus::Hit => "loaded from cache",
            _ => "computed and cached",
        };
        println!(
            "k={} {}: train {}x{}, test {}x{}, {how} in {:.3} s with {} worker(s)",
            job.features,
            config.kernel.name(),
            job.train_shape.0,
            job.train_shape.1,
            job.test_shape.0,
            job.test_shape.1,
            job.elapsed.as_secs_f64(),
            config.workers,
        );
    }
    Ok(())
}

fn cmd_run(config: &RunConfig) -> Result<(), Failure> {
    let output = run(config)?;
    output.notices.iter().for_each(|n| eprintln!("notice: {n}"));
    print!("{}", output.report.table());
    for block in &output.report.blocks {
        for t in block.trials.iter().filter(|t| t.error.is_some()) {
            eprintln!("{} k={} trial {} failed: {}", block.method, block.features, t.trial, t.error.as_deref().unwrap_or(""));
        }
    }
    if let Some(dir) = &config.out_dir {
        write_outputs(&output, dir)?;
        println!("report written to {}", dir.join("report.json").display());
    }
    if output.report.all_failed() {
        return Err(Failure { code: EXIT_RUNTIME, message: "every trial failed".into() });
    }
    Ok(())
}

fn cmd_synth(opts: &Opts) -> Result<(), Failure> {
    let kind = opts.kind.as_deref().unwrap_or("two-gaussians");
    let spec = opts.synthetic_spec(kind).map_err(Failure::usage)?;
    let table = generate_synthetic::<f64>(&spec).map_err(|e| Failure::usage(e.to_string()))?;
    match &opts.output {
        Some(path) => {
            table.write_csv(path)?;
            eprintln!("wrote {} rows to {}", table.len(), path.display());
        }
        None => print!("{}", table.to_csv()),
    }
    if spec.kind == SyntheticKind::PlantedFeatures {
        eprintln!("planted features: {:?}", spec.planted_indices());
    }
    Ok(())
}

fn dispatch(cli: Cli) -> Result<(), Failure> {
    let mut opts = cli.opts;
    if let Some(path) = opts.config.clone() {
        let text = std::fs::read_to_string(&path)
            .map_err(|e| Failure::usage(format!("cannot read config {}: {e}", path.display())))?;
        opts.apply_config(&text).map_err(Failure::usage)?;
    }
    if cli.command == Command::Synth {
        return cmd_synth(&opts);
    }
    let config = opts.run_config().map_err(Failure::usage)?;
    match cli.command {
        Command::Select => cmd_select(&config),
        Command::Kernel => cmd_kernel(&config),
        Command::Run => cmd_run(&config),
        Command::Synth => unreachable!(),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(EXIT_USAGE) } else { ExitCode::SUCCESS };
        }
    };
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
