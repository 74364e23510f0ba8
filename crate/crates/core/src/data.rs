//! Dataset ingestion, categorical encoding, angle scaling, the baseline-only
//! train / balanced test split, and synthetic generators.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::io::Write;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::seeding::derive_seed;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Class {
    Baseline,
    Stress,
}

impl fmt::Display for Class {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Class::Baseline => "baseline",
            Class::Stress => "stress",
        })
    }
}

/// Feature table with one label per row.
#[derive(Debug, Clone, PartialEq)]
pub struct DatasetTable<T> {
    pub feature_names: Vec<String>,
    pub rows: Vec<Vec<T>>,
    pub labels: Vec<Class>,
    /// File path or `synthetic:<generator>`.
    pub source: String,
}

impl<T: Real> DatasetTable<T> {
    pub fn new(feature_names: Vec<String>, rows: Vec<Vec<T>>, labels: Vec<Class>, source: String) -> Result<Self> {
        if rows.len() != labels.len() {
            return Err(Error::Shape(format!("{} rows but {} labels", rows.len(), labels.len())));
        }
        if let Some(i) = rows.iter().position(|r| r.len() != feature_names.len()) {
            return Err(Error::Shape(format!(
                "row {i} has {} values for {} features",
                rows[i].len(),
                feature_names.len()
            )));
        }
        if let Some(i) = rows.iter().position(|r| r.iter().any(|v| !v.is_finite())) {
            return Err(Error::Data(format!("row {i} contains a non-finite value")));
        }
        Ok(Self { feature_names, rows, labels, source })
    }

    pub fn num_features(&self) -> usize {
        self.feature_names.len()
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn count(&self, class: Class) -> usize {
        self.labels.iter().filter(|&&c| c == class).count()
    }

    /// Rows at `indices`, in that order.
    pub fn subset(&self, indices: &[usize]) -> Self {
        Self {
            feature_names: self.feature_names.clone(),
            rows: indices.iter().map(|&i| self.rows[i].clone()).collect(),
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
            source: self.source.clone(),
        }
    }

    /// Keeps only the listed feature columns, in the listed order.
    pub fn select_features(&self, features: &[usize]) -> Self {
        Self {
            feature_names: features.iter().map(|&f| self.feature_names[f].clone()).collect(),
            rows: self.rows.iter().map(|r| features.iter().map(|&f| r[f]).collect()).collect(),
            labels: self.labels.clone(),
            source: self.source.clone(),
        }
    }

    /// Comma-separated with a trailing `label` column of `baseline` / `stress`.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        out.push_str(&self.feature_names.join(","));
        out.push_str(",label\n");
        for (row, label) in self.rows.iter().zip(&self.labels) {
            for v in row {
                out.push_str(&format!("{v},"));
            }
            out.push_str(&format!("{label}\n"));
        }
        out
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let out = self.to_csv();
        let mut file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        file.write_all(out.as_bytes()).map_err(|e| Error::io(path, e))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CategoricalPolicy {
    /// Replace each category by its relative frequency in the fitted rows.
    #[default]
    Frequency,
    /// Treat non-numeric cells as unparseable.
    Reject,
}

#[derive(Debug, Clone)]
pub struct CsvOptions {
    pub label_column: String,
    /// Label values (case-insensitive) mapped to `Baseline`.
    pub baseline_values: Vec<String>,
    /// Label values (case-insensitive) mapped to `Stress`.
    pub stress_values: Vec<String>,
    pub categorical: CategoricalPolicy,
}

impl Default for CsvOptions {
    fn default() -> Self {
        Self {
            label_column: "label".into(),
            baseline_values: vec!["baseline".into(), "normal".into(), "0".into()],
            stress_values: vec!["stress".into(), "anomaly".into(), "1".into()],
            categorical: CategoricalPolicy::Frequency,
        }
    }
}

/// A rejected input row. `line` is the 1-based line in the file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RowDiagnostic {
    pub line: usize,
    pub column: String,
    pub reason: String,
}

impl fmt::Display for RowDiagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "line {}, column '{}': {}", self.line, self.column, self.reason)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum RawColumn {
    Numeric(Vec<f64>),
    Categorical(Vec<String>),
}

/// Parsed CSV before categorical encoding.
#[derive(Debug, Clone)]
pub struct RawDataset {
    pub feature_names: Vec<String>,
    pub columns: Vec<RawColumn>,
    pub labels: Vec<Class>,
    pub source: String,
    pub rejected: Vec<RowDiagnostic>,
}

/// Per-column category frequencies learned from a subset of rows.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct CategoricalEncoder {
    frequencies: BTreeMap<usize, HashMap<String, f64>>,
}

impl CategoricalEncoder {
    /// Unseen categories encode as 0.
    pub fn encode(&self, column: usize, category: &str) -> f64 {
        self.frequencies
            .get(&column)
            .and_then(|m| m.get(category))
            .copied()
            .unwrap_or(0.0)
    }
}

impl RawDataset {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// Category frequencies over `rows` only.
    pub fn fit_encoder(&self, rows: &[usize]) -> CategoricalEncoder {
        let mut frequencies = BTreeMap::new();
        for (c, column) in self.columns.iter().enumerate() {
            if let RawColumn::Categorical(values) = column {
                let mut counts: HashMap<String, f64> = HashMap::new();
                for &r in rows {
                    *counts.entry(values[r].clone()).or_default() += 1.0;
                }
                let total = rows.len().max(1) as f64;
                counts.values_mut().for_each(|v| *v /= total);
                frequencies.insert(c, counts);
            }
        }
        CategoricalEncoder { frequencies }
    }

    pub fn encode<T: Real>(&self, encoder: &CategoricalEncoder) -> Result<DatasetTable<T>> {
        let rows = (0..self.len())
            .map(|r| {
                self.columns
                    .iter()
                    .enumerate()
                    .map(|(c, column)| {
                        T::lit(match column {
                            RawColumn::Numeric(values) => values[r],
                            RawColumn::Categorical(values) => encoder.encode(c, &values[r]),
                        })
                    })
                    .collect()
            })
            .collect();
        DatasetTable::new(self.feature_names.clone(), rows, self.labels.clone(), self.source.clone())
    }
}

fn parse_number(cell: &str) -> Option<f64> {
    cell.parse::<f64>().ok()
}

/// Parses a headered CSV, typing columns and rejecting bad rows.
///
/// A column is categorical when, under [`CategoricalPolicy::Frequency`], more
/// than half of its non-empty cells are not numbers.
pub fn read_csv(path: impl AsRef<Path>, options: &CsvOptions) -> Result<RawDataset> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_csv(&text, &path.display().to_string(), options)
}

pub fn parse_csv(text: &str, source: &str, options: &CsvOptions) -> Result<RawDataset> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let header: Vec<String> = reader
        .headers()
        .map_err(|e| Error::Format(format!("{source}: unreadable header: {e}")))?
        .iter()
        .map(str::to_string)
        .collect();
    if header.iter().all(String::is_empty) {
        return Err(Error::Format(format!("{source}: missing header row")));
    }
    let label_at = header
        .iter()
        .position(|h| *h == options.label_column)
        .ok_or_else(|| Error::Format(format!("{source}: no label column '{}'", options.label_column)))?;
    let feature_at: Vec<usize> = (0..header.len()).filter(|&c| c != label_at).collect();

    let mut records = Vec::new();
    let mut rejected = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let line = i + 2;
        match record {
            Ok(r) if r.len() == header.len() => records.push((line, r.iter().map(str::to_string).collect::<Vec<_>>())),
            Ok(r) => rejected.push(RowDiagnostic {
                line,
                column: String::new(),
                reason: format!("{} cells, header has {}", r.len(), header.len()),
            }),
            Err(e) => rejected.push(RowDiagnostic { line, column: String::new(), reason: e.to_string() }),
        }
    }

    let categorical: Vec<bool> = feature_at
        .iter()
        .map(|&c| {
            if options.categorical == CategoricalPolicy::Reject {
                return false;
            }
            let (mut text_cells, mut filled) = (0usize, 0usize);
            for (_, cells) in &records {
                if !cells[c].is_empty() {
                    filled += 1;
                    if parse_number(&cells[c]).is_none() {
                        text_cells += 1;
                    }
                }
            }
            2 * text_cells > filled
        })
        .collect();

    let lower = |v: &[String]| v.iter().map(|s| s.to_lowercase()).collect::<Vec<_>>();
    let (baseline_values, stress_values) = (lower(&options.baseline_values), lower(&options.stress_values));
    let mut labels = Vec::new();
    let mut kept: Vec<&Vec<String>> = Vec::new();
    'rows: for (line, cells) in &records {
        let raw_label = cells[label_at].to_lowercase();
        let label = if baseline_values.contains(&raw_label) {
            Class::Baseline
        } else if stress_values.contains(&raw_label) {
            Class::Stress
        } else {
            rejected.push(RowDiagnostic {
                line: *line,
                column: options.label_column.clone(),
                reason: format!("unrecognized label '{}'", cells[label_at]),
            });
            continue;
        };
        for (f, &c) in feature_at.iter().enumerate() {
            let cell = &cells[c];
            let problem = if cell.is_empty() {
                Some("missing value".to_string())
            } else if categorical[f] {
                None
            } else {
                match parse_number(cell) {
                    None => Some(format!("'{cell}' is not a number")),
                    Some(v) if !v.is_finite() => Some(format!("non-finite value '{cell}'")),
                    Some(_) => None,
                }
            };
            if let Some(reason) = problem {
                rejected.push(RowDiagnostic { line: *line, column: header[c].clone(), reason });
                continue 'rows;
            }
        }
        labels.push(label);
        kept.push(cells);
    }
    if kept.is_empty() {
        let detail = rejected.first().map(|d| format!("; first: {d}")).unwrap_or_default();
        return Err(Error::Data(format!("{source}: no usable rows ({} rejected{detail})", rejected.len())));
    }
    let columns = feature_at
        .iter()
        .zip(&categorical)
        .map(|(&c, &is_cat)| {
            if is_cat {
                RawColumn::Categorical(kept.iter().map(|cells| cells[c].clone()).collect())
            } else {
                RawColumn::Numeric(kept.iter().map(|cells| parse_number(&cells[c]).expect("validated")).collect())
            }
        })
        .collect();
    rejected.sort_by_key(|d| d.line);
    Ok(RawDataset {
        feature_names: feature_at.iter().map(|&c| header[c].clone()).collect(),
        columns,
        labels,
        source: source.to_string(),
        rejected,
    })
}

/// Reads a CSV and frequency-encodes categorical columns over all its rows.
pub fn load_csv<T: Real>(path: impl AsRef<Path>, options: &CsvOptions) -> Result<DatasetTable<T>> {
    let raw = read_csv(path, options)?;
    let all: Vec<usize> = (0..raw.len()).collect();
    raw.encode(&raw.fit_encoder(&all))
}

/// Per-feature training minimum and maximum; maps values into `[0, pi]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalingParams<T> {
    pub min: Vec<T>,
    pub max: Vec<T>,
}

impl<T: Real> ScalingParams<T> {
    pub fn fit(rows: &[Vec<T>]) -> Result<Self> {
        let first = rows.first().ok_or_else(|| Error::Argument("cannot fit scaling on no rows".into()))?;
        let mut min = first.clone();
        let mut max = first.clone();
        for row in rows {
            if row.len() != min.len() {
                return Err(Error::Shape(format!("row of {} values, expected {}", row.len(), min.len())));
            }
            for (f, &v) in row.iter().enumerate() {
                min[f] = min[f].min(v);
                max[f] = max[f].max(v);
            }
        }
        Ok(Self { min, max })
    }

    /// `pi * (x - min) / (max - min)` clamped to `[0, pi]`; constant features map to `pi / 2`.
    pub fn scale_value(&self, feature: usize, x: T) -> T {
        let (lo, hi) = (self.min[feature], self.max[feature]);
        if hi <= lo {
            return T::FRAC_PI_2();
        }
        (T::PI() * ((x - lo) / (hi - lo))).max(T::zero()).min(T::PI())
    }

    pub fn apply_rows(&self, rows: &[Vec<T>]) -> Result<Vec<Vec<T>>> {
        rows.iter()
            .map(|row| {
                if row.len() != self.min.len() {
                    return Err(Error::Shape(format!("row of {} values, expected {}", row.len(), self.min.len())));
                }
                Ok(row.iter().enumerate().map(|(f, &v)| self.scale_value(f, v)).collect())
            })
            .collect()
    }
}

pub fn fit_scaling<T: Real>(train: &DatasetTable<T>) -> Result<ScalingParams<T>> {
    ScalingParams::fit(&train.rows)
}

pub fn apply_scaling<T: Real>(params: &ScalingParams<T>, table: &DatasetTable<T>) -> Result<DatasetTable<T>> {
    Ok(DatasetTable { rows: params.apply_rows(&table.rows)?, ..table.clone() })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitSpec {
    pub n_train: usize,
    pub n_test: usize,
    /// Fraction of the test set drawn from `Stress`.
    pub test_balance: f64,
    pub seed: u64,
}

impl Default for SplitSpec {
    fn default() -> Self {
        Self { n_train: 2000, n_test: 1500, test_balance: 0.5, seed: 0 }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SplitIndices {
    /// Baseline rows only.
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

impl SplitSpec {
    fn stress_count(&self) -> Result<usize> {
        let exact = self.n_test as f64 * self.test_balance;
        if !(0.0..=1.0).contains(&self.test_balance) || (exact - exact.round()).abs() > 1e-9 {
            return Err(Error::Argument(format!(
                "test set of {} cannot hold a {} stress fraction exactly",
                self.n_test, self.test_balance
            )));
        }
        Ok(exact.round() as usize)
    }

    /// Seeded sampling without replacement. Uses ChaCha8 and rand's
    /// Fisher-Yates `shuffle`.
    pub fn indices(&self, labels: &[Class]) -> Result<SplitIndices> {
        let n_stress = self.stress_count()?;
        let n_base_test = self.n_test - n_stress;
        let mut baseline: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == Class::Baseline).collect();
        let mut stress: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == Class::Stress).collect();
        let need_base = self.n_train + n_base_test;
        if baseline.len() < need_base || stress.len() < n_stress {
            return Err(Error::Capacity(format!(
                "split needs {need_base} baseline and {n_stress} stress rows, have {} and {}",
                baseline.len(),
                stress.len()
            )));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        baseline.shuffle(&mut rng);
        stress.shuffle(&mut rng);
        let train = baseline[..self.n_train].to_vec();
        let mut test: Vec<usize> = baseline[self.n_train..need_base]
            .iter()
            .chain(&stress[..n_stress])
            .copied()
            .collect();
        test.shuffle(&mut rng);
        Ok(SplitIndices { train, test })
    }
}

/// Baseline-only train table and a mixed test table.
pub fn split<T: Real>(table: &DatasetTable<T>, spec: &SplitSpec) -> Result<(DatasetTable<T>, DatasetTable<T>)> {
    let idx = spec.indices(&table.labels)?;
    Ok((table.subset(&idx.train), table.subset(&idx.test)))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SyntheticKind {
    /// Baseline `N(0, I)`, stress `N(mu, I)` with `|mu| = separation`.
    TwoGaussians,
    /// `planted_k` features shifted by `separation` for stress; the rest pure noise.
    PlantedFeatures,
}

impl SyntheticKind {
    pub fn name(&self) -> &'static str {
        match self {
            SyntheticKind::TwoGaussians => "two-gaussians",
            SyntheticKind::PlantedFeatures => "planted-features",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s.to_ascii_lowercase().replace('_', "-").as_str() {
            "two-gaussians" | "twogaussians" => Some(SyntheticKind::TwoGaussians),
            "planted-features" | "plantedfeatures" | "planted" => Some(SyntheticKind::PlantedFeatures),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SyntheticSpec {
    pub kind: SyntheticKind,
    pub dims: usize,
    pub n_per_class: usize,
    /// In units of the per-feature standard deviation.
    pub separation: f64,
    pub planted_k: usize,
    pub seed: u64,
}

impl SyntheticSpec {
    pub fn two_gaussians(dims: usize, n_per_class: usize, separation: f64, seed: u64) -> Self {
        Self { kind: SyntheticKind::TwoGaussians, dims, n_per_class, separation, planted_k: 0, seed }
    }

    pub fn planted(dims: usize, planted_k: usize, n_per_class: usize, separation: f64, seed: u64) -> Self {
        Self { kind: SyntheticKind::PlantedFeatures, dims, n_per_class, separation, planted_k, seed }
    }

    fn validate(&self) -> Result<()> {
        if self.dims == 0 || self.n_per_class == 0 {
            return Err(Error::Argument("synthetic data needs dims >= 1 and n_per_class >= 1".into()));
        }
        if !self.separation.is_finite() || self.separation < 0.0 {
            return Err(Error::Argument(format!("separation {} must be finite and >= 0", self.separation)));
        }
        if self.kind == SyntheticKind::PlantedFeatures && (self.planted_k == 0 || self.planted_k > self.dims) {
            return Err(Error::Argument(format!("planted_k {} outside 1..={}", self.planted_k, self.dims)));
        }
        Ok(())
    }

    /// Sorted indices of the informative features (empty for `TwoGaussians`).
    pub fn planted_indices(&self) -> Vec<usize> {
        if self.kind != SyntheticKind::PlantedFeatures {
            return Vec::new();
        }
        let mut all: Vec<usize> = (0..self.dims).collect();
        all.shuffle(&mut ChaCha8Rng::seed_from_u64(derive_seed(self.seed, &[1])));
        let mut planted = all[..self.planted_k.min(self.dims)].to_vec();
        planted.sort_unstable();
        planted
    }
}

/// Baseline rows first, then stress rows; fully determined by `spec.seed`.
pub fn generate_synthetic<T: Real>(spec: &SyntheticSpec) -> Result<DatasetTable<T>> {
    spec.validate()?;
    let mean: Vec<f64> = match spec.kind {
        SyntheticKind::TwoGaussians => vec![spec.separation / (spec.dims as f64).sqrt(); spec.dims],
        SyntheticKind::PlantedFeatures => {
            let mut m = vec![0.0; spec.dims];
            for f in spec.planted_indices() {
                m[f] = spec.separation;
            }
            m
        }
    };
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(spec.seed, &[0]));
    let mut rows = Vec::with_capacity(2 * spec.n_per_class);
    let mut labels = Vec::with_capacity(2 * spec.n_per_class);
    for class in [Class::Baseline, Class::Stress] {
        for _ in 0..spec.n_per_class {
            rows.push(
                (0..spec.dims)
                    .map(|f| {
                        let z: f64 = StandardNormal.sample(&mut rng);
                        T::lit(if class == Class::Stress { z + mean[f] } else { z })
                    })
                    .collect(),
            );
            labels.push(class);
        }
    }
    DatasetTable::new(
        (0..spec.dims).map(|f| format!("f{f}")).collect(),
        rows,
        labels,
        format!("synthetic:{}", spec.kind.name()),
    )
}
