//! nu-One-Class SVM on precomputed kernels.
//!
//! Dual problem:
//!
//! ```text
//! minimize    1/2 sum_ij a_i a_j K_ij
//! subject to  0 <= a_i <= 1 / (nu N),  sum_i a_i = 1
//! ```
//!
//! solved by pairwise coordinate steps on the maximal-violating pair. The
//! decision value of a point with kernel row `k` is `sum_r a_r k_r - rho`.

use std::path::Path;

use crate::binfmt::{self, Reader, Writer};
use crate::error::{Error, Result};
use crate::kernel::{KernelMatrix, MatrixKind, Provenance};
use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OcsvmConfig<T> {
    pub nu: T,
    /// Stop once the maximal KKT violation falls below this.
    pub tolerance: T,
    pub max_iterations: usize,
}

impl<T: Real> Default for OcsvmConfig<T> {
    fn default() -> Self {
        Self { nu: T::lit(0.1), tolerance: T::lit(1e-6), max_iterations: 100_000 }
    }
}

impl<T: Real> OcsvmConfig<T> {
    pub fn with_nu(nu: T) -> Self {
        Self { nu, ..Self::default() }
    }

    fn validate(&self) -> Result<()> {
        if !(self.nu > T::zero() && self.nu <= T::one()) {
            return Err(Error::Argument(format!("nu = {} outside (0, 1]", self.nu)));
        }
        if !(self.tolerance > T::zero()) {
            return Err(Error::Argument(format!("tolerance {} must be positive", self.tolerance)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OcsvmModel<T> {
    pub nu: T,
    pub alphas: Vec<T>,
    pub rho: T,
    pub support_indices: Vec<usize>,
    pub kernel_provenance: Provenance,
    pub iterations: usize,
    /// Maximal KKT violation at termination.
    pub violation: T,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Normal,
    Anomaly,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Prediction<T> {
    pub label: Outcome,
    pub score: T,
}

/// Box bound `1 / (nu N)`.
pub fn upper_bound<T: Real>(nu: T, n: usize) -> T {
    T::one() / (nu * T::from_count(n))
}

/// `1/2 a^T K a`.
pub fn dual_objective<T: Real>(k: &KernelMatrix<T>, alphas: &[T]) -> T {
    let n = alphas.len();
    let mut total = T::zero();
    for i in 0..n {
        if alphas[i] == T::zero() {
            continue;
        }
        let row = k.row(i);
        total = total + alphas[i] * (0..n).map(|j| row[j] * alphas[j]).sum::<T>();
    }
    total * T::lit(0.5)
}

/// Cheap necessary PSD conditions: nonnegative diagonal and
/// `K_ij^2 <= K_ii K_jj` for every pair, both up to `slack`.
fn check_psd_minors<T: Real>(k: &KernelMatrix<T>, slack: T) -> Result<()> {
    let n = k.rows();
    for i in 0..n {
        let kii = k.get(i, i);
        if kii < -slack {
            return Err(Error::Numeric(format!("kernel diagonal K[{i}][{i}] = {kii} is negative")));
        }
        for j in i + 1..n {
            let kij = k.get(i, j);
            let bound = (kii.max(T::zero()) * k.get(j, j).max(T::zero())).sqrt();
            if kij.abs() > bound + slack {
                return Err(Error::Numeric(format!(
                    "kernel is not positive semidefinite: |K[{i}][{j}]| = {} exceeds sqrt(K_ii K_jj) = {bound}",
                    kij.abs()
                )));
            }
        }
    }
    Ok(())
}

struct Violation<T> {
    up: usize,
    low: usize,
    gap: T,
}

/// `up` minimizes the gradient among coordinates that may grow, `low`
/// maximizes it among coordinates that may shrink.
fn max_violating_pair<T: Real>(alphas: &[T], grad: &[T], bound: T) -> Option<Violation<T>> {
    let mut up: Option<usize> = None;
    let mut low: Option<usize> = None;
    for t in 0..alphas.len() {
        if alphas[t] < bound && up.is_none_or(|u| grad[t] < grad[u]) {
            up = Some(t);
        }
        if alphas[t] > T::zero() && low.is_none_or(|l| grad[t] > grad[l]) {
            low = Some(t);
        }
    }
    let (up, low) = (up?, low?);
    Some(Violation { up, low, gap: grad[low] - grad[up] })
}

/// Mean gradient over free coordinates, else the midpoint of the interval
/// allowed by the bounded ones.
fn compute_rho<T: Real>(alphas: &[T], grad: &[T], bound: T) -> T {
    let free: Vec<T> = (0..alphas.len())
        .filter(|&i| alphas[i] > T::zero() && alphas[i] < bound)
        .map(|i| grad[i])
        .collect();
    if !free.is_empty() {
        return free.iter().copied().sum::<T>() / T::from_count(free.len());
    }
    let at_upper = (0..alphas.len()).filter(|&i| alphas[i] >= bound).map(|i| grad[i]).fold(None, |m: Option<T>, g| {
        Some(m.map_or(g, |m| m.max(g)))
    });
    let at_zero = (0..alphas.len()).filter(|&i| alphas[i] <= T::zero()).map(|i| grad[i]).fold(None, |m: Option<T>, g| {
        Some(m.map_or(g, |m| m.min(g)))
    });
    match (at_upper, at_zero) {
        (Some(lo), Some(hi)) => (lo + hi) * T::lit(0.5),
        (Some(v), None) | (None, Some(v)) => v,
        (None, None) => T::zero(),
    }
}

/// Solves the dual on a symmetric training Gram matrix.
pub fn fit<T: Real>(k: &KernelMatrix<T>, config: &OcsvmConfig<T>) -> Result<OcsvmModel<T>> {
    config.validate()?;
    if k.kind != MatrixKind::TrainSymmetric || k.rows() != k.cols() {
        return Err(Error::Shape("fit needs a square TrainSymmetric kernel".into()));
    }
    let n = k.rows();
    if n < 2 {
        return Err(Error::Shape(format!("fit needs at least 2 training points, got {n}")));
    }
    if let Some(v) = k.values().iter().find(|v| !v.is_finite()) {
        return Err(Error::Numeric(format!("kernel contains {v}")));
    }
    let psd_slack = T::lit(1e-8).max(T::epsilon() * T::lit(100.0));
    check_psd_minors(k, psd_slack)?;

    let bound = upper_bound(config.nu, n);
    // Uniform start is feasible for every nu in (0, 1].
    let mut alphas = vec![T::one() / T::from_count(n); n];
    let mut grad: Vec<T> = (0..n).map(|i| k.row(i).iter().copied().sum::<T>() / T::from_count(n)).collect();
    let tau = T::lit(1e-12);

    let mut iterations = 0;
    let mut gap = T::zero();
    loop {
        let Some(v) = max_violating_pair(&alphas, &grad, bound) else {
            break;
        };
        gap = v.gap;
        if gap < config.tolerance {
            break;
        }
        if iterations >= config.max_iterations {
            return Err(Error::Convergence { iterations, violation: gap.as_f64() });
        }
        iterations += 1;
        let (i, j) = (v.up, v.low);
        let curvature = k.get(i, i) + k.get(j, j) - T::lit(2.0) * k.get(i, j);
        if curvature < -psd_slack {
            return Err(Error::Numeric(format!(
                "negative curvature {curvature} on pair ({i}, {j}): kernel is not positive semidefinite"
            )));
        }
        let room_i = bound - alphas[i];
        let room_j = alphas[j];
        let mut step = gap / curvature.max(tau);
        let mut clip_i = false;
        let mut clip_j = false;
        if step >= room_i {
            step = room_i;
            clip_i = true;
        }
        if step >= room_j {
            step = room_j;
            clip_j = true;
            clip_i = room_i == room_j;
        }
        alphas[i] = if clip_i { bound } else { alphas[i] + step };
        alphas[j] = if clip_j { T::zero() } else { alphas[j] - step };
        let (row_i, row_j) = (k.row(i), k.row(j));
        for t in 0..n {
            grad[t] = grad[t] + step * (row_i[t] - row_j[t]);
        }
    }

    let support_indices: Vec<usize> = (0..n).filter(|&i| alphas[i] > T::zero()).collect();
    if support_indices.is_empty() {
        return Err(Error::Numeric("fit produced no support vectors".into()));
    }
    // Fresh gradients summed exactly as `decision_scores` sums them, so a
    // training row's score is bitwise `grad - rho`.
    let grad: Vec<T> = (0..n)
        .map(|i| {
            let row = k.row(i);
            support_indices.iter().map(|&r| alphas[r] * row[r]).sum::<T>()
        })
        .collect();
    let mut rho = compute_rho(&alphas, &grad, bound);
    // Margin points sit within the solver tolerance of rho on either side.
    // Lowering rho to the smallest non-bound gradient (a move of at most the
    // tolerance) resolves those ties to Normal.
    if let Some(floor) = (0..n).filter(|&i| alphas[i] < bound).map(|i| grad[i]).reduce(|a, b| a.min(b)) {
        rho = rho.min(floor);
    }
    Ok(OcsvmModel {
        nu: config.nu,
        alphas,
        rho,
        support_indices,
        kernel_provenance: k.provenance,
        iterations,
        violation: gap.max(T::zero()),
    })
}

impl<T: Real> OcsvmModel<T> {
    pub fn num_train(&self) -> usize {
        self.alphas.len()
    }

    /// `sum_r a_r K[s][r] - rho` for every test row `s`.
    pub fn decision_scores(&self, k_test: &KernelMatrix<T>) -> Result<Vec<T>> {
        if k_test.cols() != self.num_train() {
            return Err(Error::Shape(format!(
                "test kernel has {} columns, model was trained on {} points",
                k_test.cols(),
                self.num_train()
            )));
        }
        Ok((0..k_test.rows())
            .map(|s| {
                let row = k_test.row(s);
                self.support_indices.iter().map(|&r| self.alphas[r] * row[r]).sum::<T>() - self.rho
            })
            .collect())
    }

    /// `Normal` iff the score is `>= 0`.
    pub fn predict(&self, k_test: &KernelMatrix<T>) -> Result<Vec<Prediction<T>>> {
        Ok(self
            .decision_scores(k_test)?
            .into_iter()
            .map(|score| Prediction {
                label: if score >= T::zero() { Outcome::Normal } else { Outcome::Anomaly },
                score,
            })
            .collect())
    }
}

pub fn decision_scores<T: Real>(model: &OcsvmModel<T>, k_test: &KernelMatrix<T>) -> Result<Vec<T>> {
    model.decision_scores(k_test)
}

pub fn predict<T: Real>(model: &OcsvmModel<T>, k_test: &KernelMatrix<T>) -> Result<Vec<Prediction<T>>> {
    model.predict(k_test)
}

const MODEL_MAGIC: &[u8; 4] = b"QOCS";
const MODEL_VERSION: u8 = 1;

/// `QOCS` v1: magic, version u8, N u64, nu f64, rho f64, N alphas f64, then
/// the provenance block of the kernel cache format. Little-endian.
pub fn encode_model<T: Real>(model: &OcsvmModel<T>) -> Vec<u8> {
    let mut w = Writer::with_capacity(64 + 8 * model.alphas.len());
    w.bytes(MODEL_MAGIC);
    w.u8(MODEL_VERSION);
    w.u64(model.alphas.len() as u64);
    w.f64(model.nu.as_f64());
    w.f64(model.rho.as_f64());
    for a in &model.alphas {
        w.f64(a.as_f64());
    }
    binfmt::write_provenance(&mut w, &model.kernel_provenance);
    w.finish()
}

pub fn decode_model<T: Real>(bytes: &[u8]) -> Result<OcsvmModel<T>> {
    let mut r = Reader::new(bytes);
    r.expect_magic(MODEL_MAGIC)?;
    let version = r.u8()?;
    if version != MODEL_VERSION {
        return Err(Error::Format(format!("model version {version}, expected {MODEL_VERSION}")));
    }
    let n = r.u64()?;
    if n.checked_mul(8).is_none_or(|b| b > r.remaining() as u64) {
        return Err(Error::Format(format!("model claims {n} alphas, file too short")));
    }
    let nu = T::lit(r.f64()?);
    let rho = T::lit(r.f64()?);
    let alphas = (0..n).map(|_| r.f64().map(T::lit)).collect::<Result<Vec<T>>>()?;
    let kernel_provenance = binfmt::read_provenance(&mut r)?;
    if r.remaining() != 0 {
        return Err(Error::Format(format!("{} trailing bytes after model", r.remaining())));
    }
    let support_indices = (0..alphas.len()).filter(|&i| alphas[i] > T::zero()).collect();
    Ok(OcsvmModel {
        nu,
        alphas,
        rho,
        support_indices,
        kernel_provenance,
        iterations: 0,
        violation: T::zero(),
    })
}

pub fn save_model<T: Real>(model: &OcsvmModel<T>, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, encode_model(model)).map_err(|e| Error::io(path, e))
}

pub fn load_model<T: Real>(path: impl AsRef<Path>) -> Result<OcsvmModel<T>> {
    let path = path.as_ref();
    decode_model(&std::fs::read(path).map_err(|e| Error::io(path, e))?)
}
