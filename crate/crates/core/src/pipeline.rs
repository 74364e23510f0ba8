//! End-to-end orchestration: split, select, scale, kernel, fit, predict,
//! score, project. Works in `f64` throughout.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::data::{
    generate_synthetic, read_csv, Class, CsvOptions, RawColumn, RawDataset, ScalingParams, SplitIndices, SplitSpec,
    SyntheticSpec,
};
use crate::error::Error;
use crate::feature_map::FeatureMapSpec;
use crate::feature_select::{fit_tree, rank_features, FeatureRanking, TreeConfig, TreeNode};
use crate::kernel::{
    gram_test_with, gram_train_with, load_kernel, save_kernel, ClassicalKernel, ClassicalKind, KernelMatrix,
    MatrixKind, PairKernel, QuantumExactKernel, QuantumSampledKernel,
};
use crate::metrics::{Aggregate, Confusion, Scores};
use crate::ocsvm::{fit, OcsvmConfig, Outcome};
use crate::projection::{kernel_pca_2d, Projection2D};
use crate::seeding::derive_seed;

pub const REPORT_FORMAT: &str = "qhsvm-report/1";

/// Pipeline failure, classified for the CLI's exit codes.
#[derive(Debug, thiserror::Error)]
pub enum PipelineError {
    #[error("usage: {0}")]
    Usage(String),
    #[error("data error: {0}")]
    Data(#[source] Error),
    #[error(transparent)]
    Runtime(#[from] Error),
}

pub type PipelineResult<T> = std::result::Result<T, PipelineError>;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "mode", rename_all = "kebab-case")]
pub enum KernelMode {
    QuantumExact,
    QuantumSampled { shots: u64 },
    ClassicalLinear,
    /// `gamma = None` resolves to `1 / num_features`.
    ClassicalRbf { gamma: Option<f64> },
}

impl KernelMode {
    pub fn name(&self) -> &'static str {
        match self {
            KernelMode::QuantumExact => "quantum-exact",
            KernelMode::QuantumSampled { .. } => "quantum-sampled",
            KernelMode::ClassicalLinear => "classical-linear",
            KernelMode::ClassicalRbf { .. } => "classical-rbf",
        }
    }

    pub fn is_quantum(&self) -> bool {
        matches!(self, KernelMode::QuantumExact | KernelMode::QuantumSampled { .. })
    }

    fn resolved(&self, num_features: usize) -> Self {
        match *self {
            KernelMode::ClassicalRbf { gamma: None } => KernelMode::ClassicalRbf {
                gamma: Some(1.0 / num_features as f64),
            },
            other => other,
        }
    }
}

#[derive(Debug, Clone)]
pub enum DataSource {
    Csv { path: PathBuf, options: CsvOptions },
    Synthetic(SyntheticSpec),
}

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub data: DataSource,
    /// Feature counts to evaluate, one report block each.
    pub features: Vec<usize>,
    pub kernel: KernelMode,
    /// Second kernel evaluated on identical splits and features.
    pub compare: Option<KernelMode>,
    pub nu: f64,
    pub trials: usize,
    pub seed: u64,
    pub workers: usize,
    pub n_train: usize,
    pub n_test: usize,
    pub test_balance: f64,
    pub tree: TreeConfig,
    pub cache_dir: Option<PathBuf>,
    pub out_dir: Option<PathBuf>,
}

impl RunConfig {
    pub fn new(data: DataSource) -> Self {
        Self {
            data,
            features: vec![8, 12],
            kernel: KernelMode::QuantumExact,
            compare: None,
            nu: 0.1,
            trials: 10,
            seed: 0,
            workers: crate::kernel::default_workers(),
            n_train: 2000,
            n_test: 1500,
            test_balance: 0.5,
            tree: TreeConfig::default(),
            cache_dir: None,
            out_dir: None,
        }
    }

    pub fn modes(&self) -> Vec<KernelMode> {
        std::iter::once(self.kernel).chain(self.compare).collect()
    }

    fn split_spec(&self, trial: usize) -> SplitSpec {
        SplitSpec {
            n_train: self.n_train,
            n_test: self.n_test,
            test_balance: self.test_balance,
            seed: trial_seed(self.seed, trial),
        }
    }

    fn validate(&self) -> PipelineResult<()> {
        let usage = |m: String| Err(PipelineError::Usage(m));
        if self.trials == 0 {
            return usage("trials must be at least 1".into());
        }
        if !(self.nu > 0.0 && self.nu <= 1.0) {
            return usage(format!("nu = {} outside (0, 1]", self.nu));
        }
        if self.workers == 0 {
            return usage("workers must be at least 1".into());
        }
        if self.features.is_empty() || self.features.contains(&0) {
            return usage("feature counts must be at least 1".into());
        }
        if self.n_train < 2 {
            return usage(format!("n_train = {} leaves nothing to fit", self.n_train));
        }
        for mode in self.modes() {
            match mode {
                KernelMode::QuantumSampled { shots: 0 } => return usage("shots must be at least 1".into()),
                KernelMode::ClassicalRbf { gamma: Some(g) } if !(g > 0.0 && g.is_finite()) => {
                    return usage(format!("gamma = {g} must be positive"))
                }
                _ => {}
            }
        }
        Ok(())
    }
}

/// Split seed of trial `t` (1-based).
pub fn trial_seed(base: u64, trial: usize) -> u64 {
    derive_seed(base, &[trial as u64])
}

/// A loaded dataset plus a content fingerprint used in cache keys.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub raw: RawDataset,
    pub fingerprint: String,
}

impl Dataset {
    pub fn num_features(&self) -> usize {
        self.raw.feature_names.len()
    }
}

fn hex_digest(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().fold(String::new(), |mut s, b| {
        let _ = write!(s, "{b:02x}");
        s
    })
}

pub fn load_dataset(source: &DataSource) -> PipelineResult<Dataset> {
    match source {
        DataSource::Csv { path, options } => {
            let bytes = std::fs::read(path).map_err(|e| PipelineError::Data(Error::io(path, e)))?;
            let raw = read_csv(path, options).map_err(PipelineError::Data)?;
            Ok(Dataset { raw, fingerprint: hex_digest(&bytes) })
        }
        DataSource::Synthetic(spec) => {
            let table = generate_synthetic::<f64>(spec).map_err(|e| match e {
                Error::Argument(m) => PipelineError::Usage(m),
                other => PipelineError::Data(other),
            })?;
            let columns = (0..table.num_features())
                .map(|f| RawColumn::Numeric(table.rows.iter().map(|r| r[f]).collect()))
                .collect();
            Ok(Dataset {
                raw: RawDataset {
                    feature_names: table.feature_names,
                    columns,
                    labels: table.labels,
                    source: table.source,
                    rejected: Vec::new(),
                },
                fingerprint: format!("{spec:?}"),
            })
        }
    }
}

/// Tree and ranking over `rows` of the dataset, with categorical
/// frequencies learned from the same rows.
pub fn rank_rows(
    data: &Dataset,
    rows: &[usize],
    tree: &TreeConfig,
    k: usize,
) -> PipelineResult<(TreeNode<f64>, FeatureRanking<f64>)> {
    let nf = data.num_features();
    if k == 0 || k > nf {
        return Err(PipelineError::Usage(format!("cannot select {k} features from {nf}")));
    }
    let table = data.raw.encode::<f64>(&data.raw.fit_encoder(rows)).map_err(PipelineError::Data)?;
    let subset = table.subset(rows);
    let tree = fit_tree(&subset.rows, &subset.labels, tree)?;
    let ranking = rank_features(&tree, nf)?.with_selected(k)?;
    Ok((tree, ranking))
}

/// Ranking over every row (the `select` command).
pub fn select_features(data: &Dataset, tree: &TreeConfig, k: usize) -> PipelineResult<(TreeNode<f64>, FeatureRanking<f64>)> {
    let all: Vec<usize> = (0..data.raw.len()).collect();
    rank_rows(data, &all, tree, k)
}

/// Everything a trial needs before a kernel is chosen.
#[derive(Debug, Clone)]
pub struct TrialPlan {
    pub trial: usize,
    pub split_seed: u64,
    pub split: SplitIndices,
    pub selected: Vec<usize>,
    /// Scaled to `[0, pi]` with training statistics.
    pub train: Vec<Vec<f64>>,
    pub test: Vec<Vec<f64>>,
    pub test_labels: Vec<Class>,
}

/// Split, rank on the non-test rows, keep the top `k`, scale.
pub fn plan_trial(data: &Dataset, config: &RunConfig, k: usize, trial: usize) -> PipelineResult<TrialPlan> {
    let spec = config.split_spec(trial);
    let split = spec.indices(&data.raw.labels)?;
    let mut pool: Vec<usize> = {
        let mut in_test = vec![false; data.raw.len()];
        split.test.iter().for_each(|&i| in_test[i] = true);
        (0..data.raw.len()).filter(|&i| !in_test[i]).collect()
    };
    pool.sort_unstable();
    let (_, ranking) = rank_rows(data, &pool, &config.tree, k)?;
    let table = data.raw.encode::<f64>(&data.raw.fit_encoder(&pool))?;
    let train = table.subset(&split.train).select_features(&ranking.selected);
    let test = table.subset(&split.test).select_features(&ranking.selected);
    let scaling = ScalingParams::fit(&train.rows)?;
    Ok(TrialPlan {
        trial,
        split_seed: spec.seed,
        selected: ranking.selected.clone(),
        train: scaling.apply_rows(&train.rows)?,
        test: scaling.apply_rows(&test.rows)?,
        test_labels: test.labels,
        split,
    })
}

fn kernel_seed(base: u64, k: usize, trial: usize) -> u64 {
    derive_seed(base, &[trial as u64, k as u64, 0x5348_4f54])
}

fn build_kernels<K: PairKernel<f64>>(
    kernel: &K,
    plan: &TrialPlan,
    workers: usize,
) -> crate::Result<(KernelMatrix<f64>, KernelMatrix<f64>)> {
    Ok((
        gram_train_with(kernel, &plan.train, workers)?,
        gram_test_with(kernel, &plan.test, &plan.train, workers)?,
    ))
}

/// Train and test Gram matrices of one plan under `mode`.
pub fn compute_kernels(
    plan: &TrialPlan,
    mode: KernelMode,
    base_seed: u64,
    workers: usize,
) -> crate::Result<(KernelMatrix<f64>, KernelMatrix<f64>)> {
    let k = plan.selected.len();
    match mode.resolved(k) {
        KernelMode::QuantumExact => build_kernels(&QuantumExactKernel { spec: FeatureMapSpec::new(k)? }, plan, workers),
        KernelMode::QuantumSampled { shots } => build_kernels(
            &QuantumSampledKernel {
                spec: FeatureMapSpec::new(k)?,
                shots,
                seed: kernel_seed(base_seed, k, plan.trial),
            },
            plan,
            workers,
        ),
        KernelMode::ClassicalLinear => build_kernels(&ClassicalKernel { kind: ClassicalKind::Linear }, plan, workers),
        KernelMode::ClassicalRbf { gamma } => build_kernels(
            &ClassicalKernel { kind: ClassicalKind::Rbf { gamma: gamma.expect("resolved") } },
            plan,
            workers,
        ),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CacheStatus {
    Disabled,
    Hit,
    Miss,
}

/// Directory of `<hash>.key`, `<hash>.train.qkrn`, `<hash>.test.qkrn`.
#[derive(Debug, Clone)]
pub struct KernelCache {
    pub dir: PathBuf,
}

impl KernelCache {
    /// Canonical description of everything the two matrices depend on.
    pub fn key(data: &Dataset, plan: &TrialPlan, mode: KernelMode, base_seed: u64) -> String {
        let k = plan.selected.len();
        let mut key = format!("qhsvm-kernel-cache/1\ndata={}\nmode={:?}\n", data.fingerprint, mode.resolved(k));
        if let KernelMode::QuantumSampled { .. } = mode {
            let _ = writeln!(key, "kernel_seed={}", kernel_seed(base_seed, k, plan.trial));
        }
        let _ = writeln!(key, "selected={:?}\ntrain={:?}\ntest={:?}", plan.selected, plan.split.train, plan.split.test);
        key
    }

    fn paths(&self, key: &str) -> (PathBuf, PathBuf, PathBuf) {
        let hash = &hex_digest(key.as_bytes())[..32];
        (
            self.dir.join(format!("{hash}.key")),
            self.dir.join(format!("{hash}.train.qkrn")),
            self.dir.join(format!("{hash}.test.qkrn")),
        )
    }

    /// Cached pair for `key`, or a notice explaining why it was not usable.
    pub fn lookup(&self, key: &str) -> std::result::Result<(KernelMatrix<f64>, KernelMatrix<f64>), Option<String>> {
        let (key_path, train_path, test_path) = self.paths(key);
        let stored = match std::fs::read_to_string(&key_path) {
            Ok(s) => s,
            Err(_) => return Err(None),
        };
        if stored != key {
            return Err(Some(format!("cache key mismatch at {}; recomputing", key_path.display())));
        }
        let loaded = load_kernel::<f64>(&train_path).and_then(|tr| Ok((tr, load_kernel::<f64>(&test_path)?)));
        match loaded {
            Ok((tr, te)) if tr.kind == MatrixKind::TrainSymmetric && te.kind == MatrixKind::TestRectangular => Ok((tr, te)),
            Ok(_) => Err(Some(format!("cache entry {} has wrong matrix kinds; recomputing", key_path.display()))),
            Err(e) => Err(Some(format!("unreadable cache entry ({e}); recomputing"))),
        }
    }

    pub fn store(&self, key: &str, train: &KernelMatrix<f64>, test: &KernelMatrix<f64>) -> crate::Result<()> {
        std::fs::create_dir_all(&self.dir).map_err(|e| Error::io(&self.dir, e))?;
        let (key_path, train_path, test_path) = self.paths(key);
        save_kernel(train, &train_path)?;
        save_kernel(test, &test_path)?;
        std::fs::write(&key_path, key).map_err(|e| Error::io(&key_path, e))
    }
}

/// Kernel pair for a plan, going through the cache when one is configured.
pub fn kernels_with_cache(
    data: &Dataset,
    plan: &TrialPlan,
    mode: KernelMode,
    config: &RunConfig,
    notices: &mut Vec<String>,
) -> crate::Result<(KernelMatrix<f64>, KernelMatrix<f64>, CacheStatus)> {
    let Some(dir) = &config.cache_dir else {
        let (tr, te) = compute_kernels(plan, mode, config.seed, config.workers)?;
        return Ok((tr, te, CacheStatus::Disabled));
    };
    let cache = KernelCache { dir: dir.clone() };
    let key = KernelCache::key(data, plan, mode, config.seed);
    match cache.lookup(&key) {
        Ok((tr, te)) => return Ok((tr, te, CacheStatus::Hit)),
        Err(Some(notice)) => notices.push(notice),
        Err(None) => {}
    }
    let (tr, te) = compute_kernels(plan, mode, config.seed, config.workers)?;
    cache.store(&key, &tr, &te)?;
    Ok((tr, te, CacheStatus::Miss))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrialRecord {
    pub trial: usize,
    pub split_seed: u64,
    pub status: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub selected_features: Vec<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub confusion: Option<Confusion>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub scores: Option<Scores>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub support_vectors: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rho: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub projection_error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BlockReport {
    pub method: &'static str,
    pub kernel: KernelMode,
    pub features: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub qubits: Option<usize>,
    pub trials: Vec<TrialRecord>,
    pub aggregate: Aggregate,
    pub failed_trials: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Report {
    pub format: &'static str,
    pub data_source: String,
    pub n_train: usize,
    pub n_test: usize,
    pub nu: f64,
    pub trials: usize,
    pub seed: u64,
    pub blocks: Vec<BlockReport>,
}

impl Report {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    pub fn all_failed(&self) -> bool {
        self.blocks.iter().all(|b| b.failed_trials == b.trials.len())
    }

    /// Human-readable table, one row per (method, feature count).
    pub fn table(&self) -> String {
        let pct = |v: Option<f64>| v.map_or("n/a".to_string(), |x| format!("{:.0}%", 100.0 * x));
        let dec = |v: Option<f64>| v.map_or("n/a".to_string(), |x| format!("{x:.2}"));
        let mut out = format!(
            "{:<18} {:<14} {:<20} {:<20} {:<20} {:<20}\n",
            "Method", "Features", "Accuracy", "Precision", "Recall", "F1"
        );
        for b in &self.blocks {
            let a = &b.aggregate;
            let feats = match b.qubits {
                Some(q) => format!("{} ({q} qubits)", b.features),
                None => b.features.to_string(),
            };
            let _ = writeln!(
                out,
                "{:<18} {:<14} {:<20} {:<20} {:<20} {:<20}",
                b.method,
                feats,
                format!("Max {} Avg {}", pct(a.accuracy.max), pct(a.accuracy.avg)),
                format!("Max {} Avg {}", pct(a.precision.max), pct(a.precision.avg)),
                format!("Max {} Avg {}", pct(a.recall.max), pct(a.recall.avg)),
                format!("Max {} Avg {}", dec(a.f1.max), dec(a.f1.avg)),
            );
            if b.failed_trials > 0 {
                let _ = writeln!(out, "  ({} of {} trials failed)", b.failed_trials, b.trials.len());
            }
        }
        out
    }
}

/// Result of evaluating one kernel on one plan.
#[derive(Debug, Clone)]
pub struct TrialEvaluation {
    pub record: TrialRecord,
    pub projection: Option<Projection2D<f64>>,
}

/// Fit, predict and score one plan under pre-computed kernels.
pub fn evaluate(plan: &TrialPlan, k_train: &KernelMatrix<f64>, k_test: &KernelMatrix<f64>, nu: f64) -> crate::Result<TrialEvaluation> {
    let model = fit(k_train, &OcsvmConfig::with_nu(nu))?;
    let predictions = model.predict(k_test)?;
    let outcomes: Vec<Outcome> = predictions.iter().map(|p| p.label).collect();
    let confusion = Confusion::from_outcomes(&plan.test_labels, &outcomes);
    let (projection, projection_error) = match kernel_pca_2d(k_test, k_train, &plan.test_labels) {
        Ok(p) => (Some(p), None),
        Err(e) => (None, Some(e.to_string())),
    };
    Ok(TrialEvaluation {
        record: TrialRecord {
            trial: plan.trial,
            split_seed: plan.split_seed,
            status: "ok",
            error: None,
            selected_features: plan.selected.clone(),
            confusion: Some(confusion),
            scores: Some(confusion.scores()),
            support_vectors: Some(model.support_indices.len()),
            rho: Some(model.rho),
            projection_error,
        },
        projection,
    })
}

fn failed_record(trial: usize, split_seed: u64, selected: Vec<usize>, error: String) -> TrialRecord {
    TrialRecord {
        trial,
        split_seed,
        status: "failed",
        error: Some(error),
        selected_features: selected,
        confusion: None,
        scores: None,
        support_vectors: None,
        rho: None,
        projection_error: None,
    }
}

/// Projection CSV name for a block and trial.
pub fn projection_file_name(mode: KernelMode, k: usize, trial: usize) -> String {
    format!("projection_{}_k{k}_trial{trial}.csv", mode.name())
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub report: Report,
    /// `(file name, projection)` per successful trial and method.
    pub projections: Vec<(String, Projection2D<f64>)>,
    pub notices: Vec<String>,
    pub kernel_time: Duration,
}

/// Runs every trial for every feature count and kernel mode.
pub fn run(config: &RunConfig) -> PipelineResult<RunOutput> {
    config.validate()?;
    let data = load_dataset(&config.data)?;
    run_on(&data, config)
}

pub fn run_on(data: &Dataset, config: &RunConfig) -> PipelineResult<RunOutput> {
    config.validate()?;
    let nf = data.num_features();
    if let Some(&k) = config.features.iter().find(|&&k| k > nf) {
        return Err(PipelineError::Usage(format!("cannot select {k} features from {nf}")));
    }
    config.split_spec(1).indices(&data.raw.labels).map_err(|e| match e {
        Error::Argument(m) => PipelineError::Usage(m),
        other => PipelineError::Data(other),
    })?;

    let modes = config.modes();
    let mut notices = Vec::new();
    let mut projections = Vec::new();
    let mut kernel_time = Duration::ZERO;
    let mut blocks: Vec<BlockReport> = Vec::new();
    for &k in &config.features {
        let mut records: Vec<Vec<TrialRecord>> = vec![Vec::new(); modes.len()];
        for trial in 1..=config.trials {
            let plan = match plan_trial(data, config, k, trial) {
                Ok(p) => p,
                Err(e) => {
                    for r in records.iter_mut() {
                        r.push(failed_record(trial, trial_seed(config.seed, trial), Vec::new(), e.to_string()));
                    }
                    continue;
                }
            };
            for (m, &mode) in modes.iter().enumerate() {
                let started = Instant::now();
                let kernels = kernels_with_cache(data, &plan, mode, config, &mut notices);
                kernel_time += started.elapsed();
                let evaluated = kernels.and_then(|(tr, te, _)| evaluate(&plan, &tr, &te, config.nu));
                match evaluated {
                    Ok(ev) => {
                        if let Some(p) = ev.projection {
                            projections.push((projection_file_name(mode, k, trial), p));
                        }
                        records[m].push(ev.record);
                    }
                    Err(e) => records[m].push(failed_record(trial, plan.split_seed, plan.selected.clone(), e.to_string())),
                }
            }
        }
        for (m, &mode) in modes.iter().enumerate() {
            let trials = std::mem::take(&mut records[m]);
            let scores: Vec<Scores> = trials.iter().filter_map(|r| r.scores).collect();
            blocks.push(BlockReport {
                method: mode.name(),
                kernel: mode.resolved(k),
                features: k,
                qubits: mode.is_quantum().then(|| k.div_ceil(2)),
                failed_trials: trials.iter().filter(|r| r.status == "failed").count(),
                aggregate: Aggregate::of(&scores),
                trials,
            });
        }
    }
    let report = Report {
        format: REPORT_FORMAT,
        data_source: data.raw.source.clone(),
        n_train: config.n_train,
        n_test: config.n_test,
        nu: config.nu,
        trials: config.trials,
        seed: config.seed,
        blocks,
    };
    Ok(RunOutput { report, projections, notices, kernel_time })
}

/// Writes `report.json` and the projection CSVs into `dir`.
pub fn write_outputs(output: &RunOutput, dir: &Path) -> crate::Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let path = dir.join("report.json");
    std::fs::write(&path, output.report.to_json()).map_err(|e| Error::io(&path, e))?;
    for (name, p) in &output.projections {
        p.write_csv(dir.join(name))?;
    }
    Ok(())
}

#[derive(Debug, Clone, Serialize)]
pub struct RankingArtifact {
    pub data_source: String,
    pub feature_names: Vec<String>,
    pub scores: Vec<f64>,
    pub order: Vec<usize>,
    pub selected: Vec<usize>,
}

impl RankingArtifact {
    pub fn new(data: &Dataset, ranking: &FeatureRanking<f64>) -> Self {
        Self {
            data_source: data.raw.source.clone(),
            feature_names: data.raw.feature_names.clone(),
            scores: ranking.scores.clone(),
            order: ranking.order.clone(),
            selected: ranking.selected.clone(),
        }
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("ranking serializes");
        s.push('\n');
        s
    }

    /// Rank, index, name and score of the selected features.
    pub fn table(&self) -> String {
        let mut out = format!("{:<6} {:<7} {:<24} {}\n", "rank", "index", "feature", "score");
        for (rank, &f) in self.selected.iter().enumerate() {
            let _ = writeln!(out, "{:<6} {:<7} {:<24} {:.6}", rank + 1, f, self.feature_names[f], self.scores[f]);
        }
        out
    }
}

/// One computed (or cached) kernel pair for the `kernel` command.
#[derive(Debug, Clone)]
pub struct KernelJob {
    pub features: usize,
    pub train_shape: (usize, usize),
    pub test_shape: (usize, usize),
    pub status: CacheStatus,
    pub elapsed: Duration,
}

/// Computes and caches trial-1 kernels for every configured feature count.
pub fn kernel_command(config: &RunConfig) -> PipelineResult<(Vec<KernelJob>, Vec<String>)> {
    config.validate()?;
    let data = load_dataset(&config.data)?;
    let nf = data.num_features();
    if let Some(&k) = config.features.iter().find(|&&k| k > nf) {
        return Err(PipelineError::Usage(format!("cannot select {k} features from {nf}")));
    }
    let mut notices = Vec::new();
    let mut jobs = Vec::new();
    for &k in &config.features {
        let plan = plan_trial(&data, config, k, 1).map_err(|e| match e {
            PipelineError::Runtime(Error::Capacity(m)) => PipelineError::Data(Error::Capacity(m)),
            other => other,
        })?;
        let started = Instant::now();
        let (tr, te, status) = kernels_with_cache(&data, &plan, config.kernel, config, &mut notices)?;
        jobs.push(KernelJob {
            features: k,
            train_shape: (tr.rows(), tr.cols()),
            test_shape: (te.rows(), te.cols()),
            status,
            elapsed: started.elapsed(),
        });
    }
    Ok((jobs, notices))
}
