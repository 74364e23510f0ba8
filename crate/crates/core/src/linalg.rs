//! Symmetric eigen-solvers for kernel PCA.
//!
//! Small matrices use cyclic Jacobi. Larger ones only need the leading few
//! eigenpairs, which come from block subspace iteration with a Rayleigh-Ritz
//! step (solved by Jacobi on the small projected matrix).

use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::seeding::splitmix64;

/// Above this order the leading pairs come from subspace iteration.
const DENSE_LIMIT: usize = 128;
const MAX_SWEEPS: usize = 100;
const MAX_SUBSPACE_ITERS: usize = 5000;

/// Eigenvalues in descending order with matching unit eigenvectors.
#[derive(Debug, Clone)]
pub struct EigenPairs<T> {
    pub values: Vec<T>,
    pub vectors: Vec<Vec<T>>,
}

/// Full decomposition of the symmetric row-major `n x n` matrix `a`.
pub fn jacobi_eigen<T: Real>(a: &[T], n: usize) -> Result<EigenPairs<T>> {
    if a.len() != n * n {
        return Err(Error::Shape(format!("{} entries for a {n}x{n} matrix", a.len())));
    }
    let mut m = a.to_vec();
    let mut v = vec![T::zero(); n * n];
    for i in 0..n {
        v[i * n + i] = T::one();
    }
    let frob = m.iter().map(|&x| x * x).sum::<T>().sqrt();
    let eps = T::epsilon();
    for _ in 0..MAX_SWEEPS {
        let off = (0..n)
            .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
            .map(|(i, j)| m[i * n + j] * m[i * n + j])
            .sum::<T>()
            .sqrt();
        if off <= eps * frob {
            break;
        }
        let mut rotated = false;
        for p in 0..n {
            for q in p + 1..n {
                let apq = m[p * n + q];
                let (app, aqq) = (m[p * n + p], m[q * n + q]);
                if apq.abs() <= eps * T::lit(0.5) * (app.abs() + aqq.abs()) || apq.abs() <= T::min_positive_value() {
                    continue;
                }
                rotated = true;
                let tau = (aqq - app) / (T::lit(2.0) * apq);
                let sign = if tau >= T::zero() { T::one() } else { -T::one() };
                let t = sign / (tau.abs() + (T::one() + tau * tau).sqrt());
                let c = T::one() / (T::one() + t * t).sqrt();
                let s = t * c;
                for k in 0..n {
                    let (akp, akq) = (m[k * n + p], m[k * n + q]);
                    m[k * n + p] = c * akp - s * akq;
                    m[k * n + q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let (apk, aqk) = (m[p * n + k], m[q * n + k]);
                    m[p * n + k] = c * apk - s * aqk;
                    m[q * n + k] = s * apk + c * aqk;
                }
                for k in 0..n {
                    let (vkp, vkq) = (v[k * n + p], v[k * n + q]);
                    v[k * n + p] = c * vkp - s * vkq;
                    v[k * n + q] = s * vkp + c * vkq;
                }
            }
        }
        if !rotated {
            break;
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| m[j * n + j].partial_cmp(&m[i * n + i]).unwrap_or(std::cmp::Ordering::Equal));
    Ok(EigenPairs {
        values: order.iter().map(|&i| m[i * n + i]).collect(),
        vectors: order.iter().map(|&c| (0..n).map(|r| v[r * n + c]).collect()).collect(),
    })
}

fn dot<T: Real>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).map(|(&x, &y)| x * y).sum()
}

fn pseudo_random_vector<T: Real>(n: usize, stream: u64) -> Vec<T> {
    (0..n)
        .map(|i| {
            let bits = splitmix64(stream.wrapping_mul(0x1000_0001).wrapping_add(i as u64));
            T::lit((bits >> 11) as f64 / (1u64 << 53) as f64 - 0.5)
        })
        .collect()
}

/// Modified Gram-Schmidt, applied twice; collapsed columns are replaced by
/// fresh pseudo-random directions.
fn orthonormalize<T: Real>(cols: &mut [Vec<T>], refill: &mut u64) {
    let n = cols.first().map_or(0, Vec::len);
    for c in 0..cols.len() {
        loop {
            let original = cols[c].iter().map(|&x| x * x).sum::<T>().sqrt();
            let (head, tail) = cols.split_at_mut(c);
            for _ in 0..2 {
                for prev in head.iter() {
                    let proj = dot(prev, &tail[0]);
                    for (x, &y) in tail[0].iter_mut().zip(prev) {
                        *x = *x - proj * y;
                    }
                }
            }
            let norm = tail[0].iter().map(|&x| x * x).sum::<T>().sqrt();
            if norm > T::lit(1e-10) * original && norm > T::min_positive_value() {
                tail[0].iter_mut().for_each(|x| *x = *x / norm);
                break;
            }
            *refill += 1;
            tail[0] = pseudo_random_vector(n, *refill);
        }
    }
}

/// Leading `k` eigenpairs (largest eigenvalue first).
pub fn top_eigenpairs<T: Real>(a: &[T], n: usize, k: usize) -> Result<EigenPairs<T>> {
    if a.len() != n * n {
        return Err(Error::Shape(format!("{} entries for a {n}x{n} matrix", a.len())));
    }
    if k == 0 || k > n {
        return Err(Error::Argument(format!("requested {k} eigenpairs of a {n}x{n} matrix")));
    }
    if n <= DENSE_LIMIT {
        let mut all = jacobi_eigen(a, n)?;
        all.values.truncate(k);
        all.vectors.truncate(k);
        return Ok(all);
    }
    subspace_iteration(a, n, k)
}

fn subspace_iteration<T: Real>(a: &[T], n: usize, k: usize) -> Result<EigenPairs<T>> {
    let p = (k + 10).min(n);
    let scale = a.iter().map(|&x| x * x).sum::<T>().sqrt().max(T::min_positive_value());
    let tol = T::lit(1e-10).max(T::epsilon() * T::lit(100.0));
    let mut refill = 0u64;
    let mut q: Vec<Vec<T>> = (0..p as u64).map(|s| pseudo_random_vector(n, s + 0xC0FFEE)).collect();
    orthonormalize(&mut q, &mut refill);
    let mut worst = T::infinity();
    for _ in 0..MAX_SUBSPACE_ITERS {
        let z: Vec<Vec<T>> = q
            .iter()
            .map(|col| (0..n).map(|i| dot(&a[i * n..(i + 1) * n], col)).collect())
            .collect();
        let mut h = vec![T::zero(); p * p];
        for i in 0..p {
            for j in i..p {
                let v = (dot(&q[i], &z[j]) + dot(&q[j], &z[i])) * T::lit(0.5);
                h[i * p + j] = v;
                h[j * p + i] = v;
            }
        }
        let small = jacobi_eigen(&h, p)?;
        let combine = |basis: &[Vec<T>], coeffs: &[T]| -> Vec<T> {
            let mut out = vec![T::zero(); n];
            for (col, &c) in basis.iter().zip(coeffs) {
                for (o, &x) in out.iter_mut().zip(col) {
                    *o = *o + c * x;
                }
            }
            out
        };
        let ritz: Vec<Vec<T>> = small.vectors.iter().map(|s| combine(&q, s)).collect();
        let images: Vec<Vec<T>> = small.vectors.iter().map(|s| combine(&z, s)).collect();
        worst = (0..k)
            .map(|i| {
                images[i]
                    .iter()
                    .zip(&ritz[i])
                    .map(|(&av, &v)| (av - small.values[i] * v).powi(2))
                    .sum::<T>()
                    .sqrt()
            })
            .fold(T::zero(), T::max);
        if worst <= tol * scale {
            return Ok(EigenPairs {
                values: small.values[..k].to_vec(),
                vectors: ritz.into_iter().take(k).collect(),
            });
        }
        q = images;
        orthonormalize(&mut q, &mut refill);
    }
    Err(Error::Convergence {
        iterations: MAX_SUBSPACE_ITERS,
        violation: (worst / scale).as_f64(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn check_pairs(a: &[f64], n: usize, pairs: &EigenPairs<f64>, tol: f64) {
        for (lambda, v) in pairs.values.iter().zip(&pairs.vectors) {
            assert!((dot(v, v) - 1.0).abs() < 1e-10);
            for i in 0..n {
                let av = dot(&a[i * n..(i + 1) * n], v);
                assert!((av - lambda * v[i]).abs() < tol, "residual {}", av - lambda * v[i]);
            }
        }
    }

    fn random_psd(n: usize, rank: usize, seed: u64) -> Vec<f64> {
        let factors: Vec<Vec<f64>> = (0..rank).map(|r| pseudo_random_vector(n, seed * 1000 + r as u64)).collect();
        let mut a = vec![0.0; n * n];
        for (r, f) in factors.iter().enumerate() {
            let w = 1.0 / (1.0 + r as f64);
            for i in 0..n {
                for j in 0..n {
                    a[i * n + j] += w * f[i] * f[j];
                }
            }
        }
        a
    }

    #[test]
    fn jacobi_two_by_two() {
        let a = [2.0f64, 1.0, 1.0, 2.0];
        let e = jacobi_eigen(&a, 2).unwrap();
        assert!((e.values[0] - 3.0).abs() < 1e-14 && (e.values[1] - 1.0).abs() < 1e-14);
        check_pairs(&a, 2, &e, 1e-13);
    }

    #[test]
    fn jacobi_random_symmetric() {
        let a = random_psd(30, 30, 3);
        let e = jacobi_eigen(&a, 30).unwrap();
        check_pairs(&a, 30, &e, 1e-11);
        assert!(e.values.windows(2).all(|w| w[0] >= w[1]));
    }

    #[test]
    fn subspace_matches_jacobi_on_large_low_rank() {
        let n = 200;
        let a = random_psd(n, 15, 9);
        let top = top_eigenpairs(&a, n, 2).unwrap();
        check_pairs(&a, n, &top, 1e-8);
        let full = jacobi_eigen(&a, n).unwrap();
        for i in 0..2 {
            assert!((top.values[i] - full.values[i]).abs() < 1e-9);
        }
    }

    #[test]
    fn argument_checks() {
        assert!(top_eigenpairs(&[1.0f64], 1, 2).is_err());
        assert!(jacobi_eigen(&[1.0f64, 2.0], 2).is_err());
    }
}
