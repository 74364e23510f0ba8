//! Independent reference implementations shared by the integration tests.
#![allow(dead_code)]

use nalgebra::{Complex, DMatrix, DVector};
use qhsvm::data::Class;
use qhsvm::feature_map::FeatureMapSpec;
use qhsvm::kernel::{gram_test_with, gram_train_with, KernelMatrix, MatrixKind, Provenance, QuantumExactKernel};
use qhsvm::statevector::Gate;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub type C = Complex<f64>;

fn c(re: f64, im: f64) -> C {
    Complex::new(re, im)
}

/// 2x2 matrix written out from the textbook definitions.
pub fn gate_matrix(gate: &Gate<f64>) -> DMatrix<C> {
    match *gate {
        Gate::Rx { theta, .. } => {
            let (s, co) = ((theta / 2.0).sin(), (theta / 2.0).cos());
            DMatrix::from_row_slice(2, 2, &[c(co, 0.0), c(0.0, -s), c(0.0, -s), c(co, 0.0)])
        }
        Gate::Rz { phi, .. } => DMatrix::from_row_slice(
            2,
            2,
            &[C::from_polar(1.0, -phi / 2.0), c(0.0, 0.0), c(0.0, 0.0), C::from_polar(1.0, phi / 2.0)],
        ),
        Gate::U3 { theta, phi, lambda, .. } => {
            let (s, co) = ((theta / 2.0).sin(), (theta / 2.0).cos());
            DMatrix::from_row_slice(
                2,
                2,
                &[
                    c(co, 0.0),
                    -C::from_polar(s, lambda),
                    C::from_polar(s, phi),
                    C::from_polar(co, phi + lambda),
                ],
            )
        }
        Gate::Cnot { .. } => panic!("two-qubit gate"),
    }
}

fn kron_chain(n: usize, factor: impl Fn(usize) -> DMatrix<C>) -> DMatrix<C> {
    // Qubit n-1 is the leftmost factor so qubit 0 is the least significant bit.
    let mut m = DMatrix::from_element(1, 1, c(1.0, 0.0));
    for q in (0..n).rev() {
        m = m.kronecker(&factor(q));
    }
    m
}

/// Full `2^n x 2^n` operator of one gate.
pub fn full_operator(n: usize, gate: &Gate<f64>) -> DMatrix<C> {
    let id = DMatrix::<C>::identity(2, 2);
    match *gate {
        Gate::Cnot { control, target } => {
            let p0 = DMatrix::from_row_slice(2, 2, &[c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(0.0, 0.0)]);
            let p1 = DMatrix::from_row_slice(2, 2, &[c(0.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(1.0, 0.0)]);
            let x = DMatrix::from_row_slice(2, 2, &[c(0.0, 0.0), c(1.0, 0.0), c(1.0, 0.0), c(0.0, 0.0)]);
            let a = kron_chain(n, |q| if q == control { p0.clone() } else { id.clone() });
            let b = kron_chain(n, |q| {
                if q == control {
                    p1.clone()
                } else if q == target {
                    x.clone()
                } else {
                    id.clone()
                }
            });
            a + b
        }
        _ => {
            let g = gate_matrix(gate);
            kron_chain(n, |q| if q == gate.target() { g.clone() } else { id.clone() })
        }
    }
}

pub fn circuit_unitary(n: usize, gates: &[Gate<f64>]) -> DMatrix<C> {
    gates.iter().fold(DMatrix::identity(1 << n, 1 << n), |acc, g| full_operator(n, g) * acc)
}

/// Final state of a circuit run from `|0...0>` by dense matrix products.
pub fn oracle_state(n: usize, gates: &[Gate<f64>]) -> DVector<C> {
    let mut v = DVector::from_element(1 << n, c(0.0, 0.0));
    v[0] = c(1.0, 0.0);
    circuit_unitary(n, gates) * v
}

pub fn random_gate(rng: &mut ChaCha8Rng, n: usize) -> Gate<f64> {
    let angle = |rng: &mut ChaCha8Rng| rng.random_range(-2.0 * std::f64::consts::PI..2.0 * std::f64::consts::PI);
    let kinds = if n >= 2 { 4 } else { 3 };
    let q = rng.random_range(0..n);
    match rng.random_range(0..kinds) {
        0 => Gate::rx(q, angle(rng)),
        1 => Gate::rz(q, angle(rng)),
        2 => Gate::u3(q, angle(rng), angle(rng), angle(rng)),
        _ => {
            let t = (q + rng.random_range(1..n)) % n;
            Gate::cnot(q, t)
        }
    }
}

pub fn random_circuit(rng: &mut ChaCha8Rng, n: usize, len: usize) -> Vec<Gate<f64>> {
    (0..len).map(|_| random_gate(rng, n)).collect()
}

pub fn random_points(rng: &mut ChaCha8Rng, n: usize, dims: usize) -> Vec<Vec<f64>> {
    (0..n)
        .map(|_| (0..dims).map(|_| rng.random_range(0.0..std::f64::consts::PI)).collect())
        .collect()
}

pub fn train_matrix(values: Vec<f64>, n: usize) -> KernelMatrix<f64> {
    KernelMatrix::from_values(n, n, values, MatrixKind::TrainSymmetric, Provenance::ClassicalRbf { gamma: 1.0 }).unwrap()
}

pub fn test_matrix(values: Vec<f64>, rows: usize, cols: usize) -> KernelMatrix<f64> {
    KernelMatrix::from_values(rows, cols, values, MatrixKind::TestRectangular, Provenance::ClassicalRbf { gamma: 1.0 })
        .unwrap()
}

pub fn rbf_values(a: &[Vec<f64>], b: &[Vec<f64>], gamma: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(a.len() * b.len());
    for x in a {
        for y in b {
            let d2: f64 = x.iter().zip(y).map(|(p, q)| (p - q) * (p - q)).sum();
            out.push((-gamma * d2).exp());
        }
    }
    out
}

/// Euclidean projection onto `{a : 0 <= a_i <= cap, sum a = 1}` by bisection
/// on the shift `tau` in `clip(v - tau, 0, cap)`.
pub fn project_capped_simplex(v: &[f64], cap: f64) -> Vec<f64> {
    let mass = |tau: f64| v.iter().map(|&x| (x - tau).clamp(0.0, cap)).sum::<f64>();
    let (mut lo, mut hi) = (
        v.iter().copied().fold(f64::INFINITY, f64::min) - cap - 1.0,
        v.iter().copied().fold(f64::NEG_INFINITY, f64::max) + 1.0,
    );
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        if mass(mid) > 1.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let tau = 0.5 * (lo + hi);
    v.iter().map(|&x| (x - tau).clamp(0.0, cap)).collect()
}

/// Reference solution of `min 1/2 a^T K a` over the capped simplex with
/// cap `1 / (nu N)`, by accelerated projected gradient.
pub struct QpSolution {
    pub alphas: Vec<f64>,
    pub objective: f64,
    pub rho: f64,
}

pub fn qp_oracle(k: &DMatrix<f64>, nu: f64) -> QpSolution {
    let n = k.nrows();
    let cap = 1.0 / (nu * n as f64);
    let lipschitz = k.clone().symmetric_eigenvalues().max().max(1e-12);
    let step = 1.0 / lipschitz;
    let mut x = DVector::from_element(n, 1.0 / n as f64);
    let mut y = x.clone();
    let mut t = 1.0f64;
    for _ in 0..50_000 {
        let grad = k * &y;
        let next = DVector::from_vec(project_capped_simplex((&y - step * grad).as_slice(), cap));
        let t_next = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
        y = &next + (&next - &x) * ((t - 1.0) / t_next);
        x = next;
        t = t_next;
    }
    // Plain projected-gradient polish settles the active set.
    for _ in 0..20_000 {
        let grad = k * &x;
        x = DVector::from_vec(project_capped_simplex((&x - step * grad).as_slice(), cap));
    }
    let g = k * &x;
    let objective = 0.5 * x.dot(&g);
    let eps = 1e-7 * cap;
    let free: Vec<usize> = (0..n).filter(|&i| x[i] > eps && x[i] < cap - eps).collect();
    let rho = if free.is_empty() {
        let at_cap = (0..n).filter(|&i| x[i] >= cap - eps).map(|i| g[i]).fold(f64::NEG_INFINITY, f64::max);
        let at_zero = (0..n).filter(|&i| x[i] <= eps).map(|i| g[i]).fold(f64::INFINITY, f64::min);
        match (at_cap.is_finite(), at_zero.is_finite()) {
            (true, true) => 0.5 * (at_cap + at_zero),
            (true, false) => at_cap,
            _ => at_zero,
        }
    } else {
        free.iter().map(|&i| g[i]).sum::<f64>() / free.len() as f64
    };
    QpSolution { alphas: x.as_slice().to_vec(), objective, rho }
}

/// Best `(feature, threshold, weighted child impurity)` by trying every
/// feature and every midpoint; ties keep the first found.
pub fn brute_force_split(x: &[Vec<f64>], y: &[Class]) -> Option<(usize, f64, f64)> {
    let n = y.len() as f64;
    let gini = |labels: &[&Class]| {
        let m = labels.len() as f64;
        let s = labels.iter().filter(|&&&l| l == Class::Stress).count() as f64;
        1.0 - (s / m).powi(2) - ((m - s) / m).powi(2)
    };
    let mut best: Option<(usize, f64, f64)> = None;
    for f in 0..x[0].len() {
        let mut values: Vec<f64> = x.iter().map(|r| r[f]).collect();
        values.sort_by(|a, b| a.partial_cmp(b).unwrap());
        values.dedup();
        for w in values.windows(2) {
            let thr = 0.5 * (w[0] + w[1]);
            let left: Vec<&Class> = x.iter().zip(y).filter(|(r, _)| r[f] <= thr).map(|(_, l)| l).collect();
            let right: Vec<&Class> = x.iter().zip(y).filter(|(r, _)| r[f] > thr).map(|(_, l)| l).collect();
            let weighted = left.len() as f64 / n * gini(&left) + right.len() as f64 / n * gini(&right);
            if best.is_none_or(|b| weighted < b.2 - 1e-12) {
                best = Some((f, thr, weighted));
            }
        }
    }
    best
}

/// Normalized Gini importances recomputed from a tree dump alone.
pub fn importance_from_dump(dump: &str, num_features: usize) -> Vec<f64> {
    // (depth, split feature, gini, n) per line, preorder.
    let nodes: Vec<(usize, Option<usize>, f64, f64)> = dump
        .lines()
        .map(|line| {
            let depth = (line.len() - line.trim_start().len()) / 2;
            let (head, stats) = line.trim_start().split_once(" | ").unwrap();
            let feature = head.strip_prefix('f').map(|r| r.split_once(" <= ").unwrap().0.parse().unwrap());
            let mut fields = stats.split_whitespace();
            let gini = fields.next().unwrap().strip_prefix("gini=").unwrap().parse().unwrap();
            let n = fields.next().unwrap().strip_prefix("n=").unwrap().parse().unwrap();
            (depth, feature, gini, n)
        })
        .collect();
    let root_n = nodes[0].3;
    let mut scores = vec![0.0; num_features];
    for (i, &(depth, feature, gini, n)) in nodes.iter().enumerate() {
        let Some(f) = feature else { continue };
        let left = i + 1;
        let right = (left + 1..nodes.len()).find(|&j| nodes[j].0 == depth + 1).unwrap();
        let (lg, ln) = (nodes[left].2, nodes[left].3);
        let (rg, rn) = (nodes[right].2, nodes[right].3);
        let gain = gini - (ln / n * lg + rn / n * rg);
        scores[f] += n / root_n * gain.max(0.0);
    }
    let total: f64 = scores.iter().sum();
    if total > 0.0 {
        scores.iter_mut().for_each(|s| *s /= total);
    }
    scores
}

/// A random train/test kernel pair; even cases are RBF, odd ones fidelity.
pub fn ocsvm_instance(rng: &mut ChaCha8Rng, case: usize, n: usize, m: usize) -> (KernelMatrix<f64>, KernelMatrix<f64>) {
    if case % 2 == 0 {
        let gamma = rng.random_range(0.1..2.0);
        let train = random_points(rng, n, 3);
        let test = random_points(rng, m, 3);
        (train_matrix(rbf_values(&train, &train, gamma), n), test_matrix(rbf_values(&test, &train, gamma), m, n))
    } else {
        let kernel = QuantumExactKernel { spec: FeatureMapSpec::new(6).unwrap() };
        let train = random_points(rng, n, 6);
        let test = random_points(rng, m, 6);
        (gram_train_with(&kernel, &train, 1).unwrap(), gram_test_with(&kernel, &test, &train, 1).unwrap())
    }
}

/// Planted-feature scenario: rows per class and stress shift in units of sigma.
pub const PLANTED_N_PER_CLASS: usize = 500;
pub const PLANTED_SEPARATION: f64 = 1.0;
