//! Train/test Gram matrices over pluggable pair kernels, with parallel fill and
//! an on-disk cache.
//!
//! Train matrices evaluate the upper triangle only and mirror it, so symmetry is
//! exact. Every entry is a pure function of its `(row, col)` pair, which makes
//! the parallel fill bitwise identical to the serial one.

use std::path::Path;

use rayon::prelude::*;

use crate::binfmt::{self, Reader, Writer};
use crate::error::{Error, Result};
use crate::feature_map::{state_fidelity, zeros_fraction, FeatureMapSpec};
use crate::scalar::Real;
use crate::seeding::derive_seed;
use crate::statevector::{Gate, StateVector};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MatrixKind {
    TrainSymmetric,
    TestRectangular,
}

/// How a matrix's entries were produced.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Provenance {
    QuantumExact,
    QuantumSampled { shots: u64, seed: u64 },
    ClassicalLinear,
    ClassicalRbf { gamma: f64 },
}

impl Provenance {
    /// Fidelity and RBF kernels have a unit diagonal and entries in `[0, 1]`.
    pub fn is_normalized(&self) -> bool {
        !matches!(self, Provenance::ClassicalLinear)
    }
}

/// Which Gram block a pair belongs to; feeds the per-pair seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Block {
    Train,
    Test,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PairId {
    pub block: Block,
    pub row: usize,
    pub col: usize,
}

/// A kernel `k(x, y)` evaluated over prepared rows.
///
/// `prepare` runs once per input row, so expensive per-point work (statevector
/// simulation) is not repeated for every pair.
pub trait PairKernel<T: Real>: Sync {
    type Prepared: Send + Sync;

    fn provenance(&self) -> Provenance;
    fn prepare(&self, x: &[T]) -> Result<Self::Prepared>;
    fn eval(&self, a: &Self::Prepared, b: &Self::Prepared, pair: PairId) -> Result<T>;
}

/// Exact statevector fidelity `|<psi(x)|psi(y)>|^2`.
#[derive(Debug, Clone)]
pub struct QuantumExactKernel<T> {
    pub spec: FeatureMapSpec<T>,
}

impl<T: Real> PairKernel<T> for QuantumExactKernel<T> {
    type Prepared = StateVector<T>;

    fn provenance(&self) -> Provenance {
        Provenance::QuantumExact
    }

    fn prepare(&self, x: &[T]) -> Result<StateVector<T>> {
        Ok(self.spec.encode(x)?.state)
    }

    fn eval(&self, a: &StateVector<T>, b: &StateVector<T>, _pair: PairId) -> Result<T> {
        state_fidelity(a, b)
    }
}

/// Finite-shot compute-uncompute estimate. Each pair gets its own generator
/// seeded from `(seed, block, row, col)`.
#[derive(Debug, Clone)]
pub struct QuantumSampledKernel<T> {
    pub spec: FeatureMapSpec<T>,
    pub shots: u64,
    pub seed: u64,
}

pub struct SampledPoint<T> {
    state: StateVector<T>,
    inverse: Vec<Gate<T>>,
}

impl<T: Real> PairKernel<T> for QuantumSampledKernel<T> {
    type Prepared = SampledPoint<T>;

    fn provenance(&self) -> Provenance {
        Provenance::QuantumSampled {
            shots: self.shots,
            seed: self.seed,
        }
    }

    fn prepare(&self, x: &[T]) -> Result<SampledPoint<T>> {
        if self.shots == 0 {
            return Err(Error::Argument("shots must be at least 1".into()));
        }
        Ok(SampledPoint {
            state: self.spec.encode(x)?.state,
            inverse: self.spec.inverse_circuit(x)?,
        })
    }

    fn eval(&self, a: &SampledPoint<T>, b: &SampledPoint<T>, pair: PairId) -> Result<T> {
        let mut state = a.state.clone();
        state.apply_all(&b.inverse)?;
        let block = match pair.block {
            Block::Train => 0,
            Block::Test => 1,
        };
        let seed = derive_seed(self.seed, &[block, pair.row as u64, pair.col as u64]);
        zeros_fraction(&state, self.shots, seed)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ClassicalKind<T> {
    Linear,
    Rbf { gamma: T },
}

/// Linear `x . y` or RBF `exp(-gamma |x - y|^2)`.
pub fn classical_kernel<T: Real>(kind: ClassicalKind<T>, x: &[T], y: &[T]) -> Result<T> {
    if x.len() != y.len() {
        return Err(Error::Shape(format!("vectors of length {} and {}", x.len(), y.len())));
    }
    let value = match kind {
        ClassicalKind::Linear => x.iter().zip(y).map(|(&a, &b)| a * b).sum(),
        ClassicalKind::Rbf { gamma } => {
            let d2: T = x.iter().zip(y).map(|(&a, &b)| (a - b) * (a - b)).sum();
            (-gamma * d2).exp()
        }
    };
    if !value.is_finite() {
        return Err(Error::Numeric(format!("classical kernel value {value}")));
    }
    Ok(value)
}

#[derive(Debug, Clone)]
pub struct ClassicalKernel<T> {
    pub kind: ClassicalKind<T>,
}

impl<T: Real> PairKernel<T> for ClassicalKernel<T> {
    type Prepared = Vec<T>;

    fn provenance(&self) -> Provenance {
        match self.kind {
            ClassicalKind::Linear => Provenance::ClassicalLinear,
            ClassicalKind::Rbf { gamma } => Provenance::ClassicalRbf { gamma: gamma.as_f64() },
        }
    }

    fn prepare(&self, x: &[T]) -> Result<Vec<T>> {
        if let Some(i) = x.iter().position(|v| !v.is_finite()) {
            return Err(Error::Numeric(format!("feature {i} is not finite")));
        }
        Ok(x.to_vec())
    }

    fn eval(&self, a: &Vec<T>, b: &Vec<T>, _pair: PairId) -> Result<T> {
        classical_kernel(self.kind, a, b)
    }
}

/// Dense row-major kernel matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelMatrix<T> {
    rows: usize,
    cols: usize,
    values: Vec<T>,
    pub kind: MatrixKind,
    pub provenance: Provenance,
}

impl<T: Real> KernelMatrix<T> {
    pub fn from_values(
        rows: usize,
        cols: usize,
        values: Vec<T>,
        kind: MatrixKind,
        provenance: Provenance,
    ) -> Result<Self> {
        if rows.checked_mul(cols) != Some(values.len()) {
            return Err(Error::Shape(format!("{} values for a {rows}x{cols} matrix", values.len())));
        }
        if kind == MatrixKind::TrainSymmetric && rows != cols {
            return Err(Error::Shape(format!("symmetric train matrix must be square, got {rows}x{cols}")));
        }
        Ok(Self { rows, cols, values, kind, provenance })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, row: usize, col: usize) -> T {
        self.values[row * self.cols + col]
    }

    pub fn row(&self, row: usize) -> &[T] {
        &self.values[row * self.cols..(row + 1) * self.cols]
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    /// Multiplies every entry by `factor`; provenance is kept.
    pub fn scaled(&self, factor: T) -> Self {
        Self {
            values: self.values.iter().map(|&v| v * factor).collect(),
            ..self.clone()
        }
    }
}

/// Worker count for Gram fills: flag, then `QHSVM_WORKERS`, then all cores.
pub fn default_workers() -> usize {
    std::env::var("QHSVM_WORKERS")
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .filter(|&w| w > 0)
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
}

fn run_rows<T, F>(count: usize, workers: usize, f: F) -> Result<Vec<Vec<T>>>
where
    T: Send,
    F: Fn(usize) -> Result<Vec<T>> + Sync + Send,
{
    if workers == 0 {
        return Err(Error::Argument("worker count must be at least 1".into()));
    }
    if workers == 1 {
        return (0..count).map(f).collect();
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::Argument(format!("thread pool: {e}")))?;
    pool.install(|| (0..count).into_par_iter().map(f).collect())
}

fn prepare_all<T: Real, K: PairKernel<T>>(kernel: &K, rows: &[Vec<T>], workers: usize) -> Result<Vec<K::Prepared>> {
    let width = rows.first().map_or(0, Vec::len);
    if let Some(i) = rows.iter().position(|r| r.len() != width) {
        return Err(Error::Shape(format!("row {i} has {} features, expected {width}", rows[i].len())));
    }
    let prepared = run_rows(rows.len(), workers, |i| Ok(vec![kernel.prepare(&rows[i])?]))?;
    Ok(prepared.into_iter().flatten().collect())
}

fn checked<T: Real>(value: Result<T>, pair: PairId) -> Result<T> {
    let at = |msg: String| Error::Numeric(format!("{msg} at ({}, {}) of the {:?} block", pair.row, pair.col, pair.block));
    match value {
        Ok(v) if v.is_finite() => Ok(v),
        Ok(v) => Err(at(format!("kernel value {v}"))),
        Err(Error::Numeric(msg)) => Err(at(msg)),
        Err(e) => Err(e),
    }
}

pub fn gram_train<T: Real, K: PairKernel<T>>(kernel: &K, x_train: &[Vec<T>]) -> Result<KernelMatrix<T>> {
    gram_train_with(kernel, x_train, default_workers())
}

/// Symmetric `n x n` Gram matrix of `x_train` using `workers` threads.
pub fn gram_train_with<T: Real, K: PairKernel<T>>(
    kernel: &K,
    x_train: &[Vec<T>],
    workers: usize,
) -> Result<KernelMatrix<T>> {
    let n = x_train.len();
    if n == 0 {
        return Err(Error::Shape("empty training set".into()));
    }
    let prepared = prepare_all(kernel, x_train, workers)?;
    let upper = run_rows(n, workers, |i| {
        (i..n)
            .map(|j| {
                let pair = PairId { block: Block::Train, row: i, col: j };
                checked(kernel.eval(&prepared[i], &prepared[j], pair), pair)
            })
            .collect()
    })?;
    let mut values = vec![T::zero(); n * n];
    for (i, row) in upper.into_iter().enumerate() {
        for (offset, v) in row.into_iter().enumerate() {
            let j = i + offset;
            values[i * n + j] = v;
            values[j * n + i] = v;
        }
    }
    KernelMatrix::from_values(n, n, values, MatrixKind::TrainSymmetric, kernel.provenance())
}

pub fn gram_test<T: Real, K: PairKernel<T>>(
    kernel: &K,
    x_test: &[Vec<T>],
    x_train: &[Vec<T>],
) -> Result<KernelMatrix<T>> {
    gram_test_with(kernel, x_test, x_train, default_workers())
}

/// Rectangular `n_test x n_train` matrix.
pub fn gram_test_with<T: Real, K: PairKernel<T>>(
    kernel: &K,
    x_test: &[Vec<T>],
    x_train: &[Vec<T>],
    workers: usize,
) -> Result<KernelMatrix<T>> {
    if x_train.is_empty() {
        return Err(Error::Shape("empty training set".into()));
    }
    let (test_width, train_width) = (x_test.first().map(Vec::len), x_train[0].len());
    if let Some(w) = test_width.filter(|&w| w != train_width) {
        return Err(Error::Shape(format!("test rows have {w} features, train rows {train_width}")));
    }
    let train = prepare_all(kernel, x_train, workers)?;
    let test = prepare_all(kernel, x_test, workers)?;
    let rows = run_rows(test.len(), workers, |i| {
        train
            .iter()
            .enumerate()
            .map(|(j, t)| {
                let pair = PairId { block: Block::Test, row: i, col: j };
                checked(kernel.eval(&test[i], t, pair), pair)
            })
            .collect()
    })?;
    KernelMatrix::from_values(
        test.len(),
        train.len(),
        rows.into_iter().flatten().collect(),
        MatrixKind::TestRectangular,
        kernel.provenance(),
    )
}

const KERNEL_MAGIC: &[u8; 4] = b"QKRN";
const KERNEL_VERSION: u8 = 1;

/// Serializes to the little-endian `QKRN` v1 layout:
/// magic, version u8, kind u8, provenance (tag u8 + payload), rows u64,
/// cols u64, then `rows * cols` f64 values row-major.
pub fn encode_kernel<T: Real>(k: &KernelMatrix<T>) -> Vec<u8> {
    let mut w = Writer::with_capacity(64 + 8 * k.values.len());
    w.bytes(KERNEL_MAGIC);
    w.u8(KERNEL_VERSION);
    w.u8(match k.kind {
        MatrixKind::TrainSymmetric => 0,
        MatrixKind::TestRectangular => 1,
    });
    binfmt::write_provenance(&mut w, &k.provenance);
    w.u64(k.rows as u64);
    w.u64(k.cols as u64);
    for v in &k.values {
        w.f64(v.as_f64());
    }
    w.finish()
}

pub fn decode_kernel<T: Real>(bytes: &[u8]) -> Result<KernelMatrix<T>> {
    let mut r = Reader::new(bytes);
    r.expect_magic(KERNEL_MAGIC)?;
    let version = r.u8()?;
    if version != KERNEL_VERSION {
        return Err(Error::Format(format!("kernel cache version {version}, expected {KERNEL_VERSION}")));
    }
    let kind = match r.u8()? {
        0 => MatrixKind::TrainSymmetric,
        1 => MatrixKind::TestRectangular,
        other => return Err(Error::Format(format!("unknown matrix kind {other}"))),
    };
    let provenance = binfmt::read_provenance(&mut r)?;
    let rows = r.u64()?;
    let cols = r.u64()?;
    let count = rows
        .checked_mul(cols)
        .filter(|c| c.checked_mul(8) == Some(r.remaining() as u64))
        .ok_or_else(|| {
            Error::Format(format!("{rows}x{cols} matrix does not match {} payload bytes", r.remaining()))
        })?;
    let values = (0..count).map(|_| r.f64().map(T::lit)).collect::<Result<Vec<_>>>()?;
    KernelMatrix::from_values(rows as usize, cols as usize, values, kind, provenance)
        .map_err(|e| Error::Format(e.to_string()))
}

pub fn save_kernel<T: Real>(k: &KernelMatrix<T>, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, encode_kernel(k)).map_err(|e| Error::io(path, e))
}

pub fn load_kernel<T: Real>(path: impl AsRef<Path>) -> Result<KernelMatrix<T>> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_kernel(&bytes)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rbf(gamma: f64) -> ClassicalKernel<f64> {
        ClassicalKernel { kind: ClassicalKind::Rbf { gamma } }
    }

    #[test]
    fn classical_values() {
        assert_eq!(classical_kernel(ClassicalKind::Rbf { gamma: 0.3 }, &[1.0, 2.0], &[1.0, 2.0]).unwrap(), 1.0);
        assert_eq!(classical_kernel(ClassicalKind::Linear, &[1.0, 0.0], &[0.0, 1.0]).unwrap(), 0.0);
        let v = classical_kernel(ClassicalKind::Rbf { gamma: 0.5 }, &[0.0, 0.0], &[1.0, 1.0]).unwrap();
        assert!((v - (-1.0f64).exp()).abs() < 1e-15);
        assert!(matches!(
            classical_kernel(ClassicalKind::Linear, &[1.0], &[1.0, 2.0]),
            Err(Error::Shape(_))
        ));
        assert!(matches!(
            classical_kernel(ClassicalKind::Linear, &[f64::MAX], &[f64::MAX]),
            Err(Error::Numeric(_))
        ));
    }

    #[test]
    fn fidelity_gram_small_cases() {
        let kernel = QuantumExactKernel { spec: FeatureMapSpec::<f64>::new(4).unwrap() };
        let one = gram_train_with(&kernel, &[vec![0.2, 0.4, 1.0, 3.0]], 1).unwrap();
        assert_eq!((one.rows(), one.cols()), (1, 1));
        assert!((one.get(0, 0) - 1.0).abs() < 1e-12);

        let x = vec![0.5, 1.5, 2.5, 0.1];
        let two = gram_train_with(&kernel, &[x.clone(), x], 1).unwrap();
        for v in two.values() {
            assert!((v - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn test_block_shape_and_identity_entry() {
        let kernel = rbf(0.25);
        let train: Vec<Vec<f64>> = (0..6).map(|i| vec![i as f64 * 0.3, 1.0 - i as f64 * 0.1]).collect();
        let k = gram_test_with(&kernel, &[train[3].clone()], &train, 2).unwrap();
        assert_eq!((k.rows(), k.cols(), k.kind), (1, 6, MatrixKind::TestRectangular));
        assert_eq!(k.get(0, 3), 1.0);
        assert!(matches!(
            gram_test_with(&kernel, &[vec![1.0]], &train, 1),
            Err(Error::Shape(_))
        ));
    }

    #[test]
    fn zero_workers_rejected() {
        assert!(matches!(gram_train_with(&rbf(1.0), &[vec![0.0]], 0), Err(Error::Argument(_))));
    }

    #[test]
    fn non_finite_entry_names_pair() {
        let kernel = ClassicalKernel { kind: ClassicalKind::Linear };
        let err = gram_train_with(&kernel, &[vec![1.0], vec![f64::MAX]], 1).unwrap_err();
        assert!(err.to_string().contains("(1, 1)"), "{err}");
    }

    #[test]
    fn decode_rejects_bad_magic_version_and_truncation() {
        let k = gram_train_with(&rbf(1.0), &[vec![0.0], vec![1.0]], 1).unwrap();
        let bytes = encode_kernel(&k);
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(matches!(decode_kernel::<f64>(&bad), Err(Error::Format(_))));
        let mut bad = bytes.clone();
        bad[4] = 2;
        assert!(matches!(decode_kernel::<f64>(&bad), Err(Error::Format(_))));
        for cut in [0, 3, 10, bytes.len() - 1] {
            assert!(matches!(decode_kernel::<f64>(&bytes[..cut]), Err(Error::Format(_))));
        }
        let mut huge = bytes.clone();
        let rows_at = bytes.len() - 4 * 8 - 16;
        huge[rows_at..rows_at + 8].copy_from_slice(&u64::MAX.to_le_bytes());
        assert!(matches!(decode_kernel::<f64>(&huge), Err(Error::Format(_))));
    }

    #[test]
    fn sampled_provenance_round_trips() {
        let spec = FeatureMapSpec::new(2).unwrap();
        let kernel = QuantumSampledKernel { spec, shots: 1000, seed: 42 };
        let k = gram_train_with(&kernel, &[vec![0.1, 0.2], vec![1.0, 2.0]], 1).unwrap();
        let back: KernelMatrix<f64> = decode_kernel(&encode_kernel(&k)).unwrap();
        assert_eq!(back.provenance, Provenance::QuantumSampled { shots: 1000, seed: 42 });
        assert_eq!(back, k);
    }
}
