//! 2-D kernel-PCA projection of a test kernel onto the leading components of
//! the centered training Gram matrix.

use std::io::Write;
use std::path::Path;

use crate::data::Class;
use crate::error::{Error, Result};
use crate::kernel::{KernelMatrix, MatrixKind};
use crate::linalg::top_eigenpairs;
use crate::scalar::Real;

#[derive(Debug, Clone, PartialEq)]
pub struct Projection2D<T> {
    pub points: Vec<[T; 2]>,
    pub labels: Vec<Class>,
}

impl<T: Real> Projection2D<T> {
    /// `u,v,label` with a header row.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("u,v,label\n");
        for (p, l) in self.points.iter().zip(&self.labels) {
            out.push_str(&format!("{},{},{}\n", p[0], p[1], l));
        }
        out
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut f = std::fs::File::create(path).map_err(|e| crate::Error::io(path, e))?;
        f.write_all(self.to_csv().as_bytes()).map_err(|e| crate::Error::io(path, e))
    }
}

/// Leading two kernel principal axes of `k_train`, with test rows projected.
///
/// Each eigenvector's sign is chosen so its largest-magnitude loading is
/// positive.
pub fn kernel_pca_2d<T: Real>(
    k_test: &KernelMatrix<T>,
    k_train: &KernelMatrix<T>,
    labels: &[Class],
) -> Result<Projection2D<T>> {
    if k_train.kind != MatrixKind::TrainSymmetric {
        return Err(Error::Shape("projection basis must be a TrainSymmetric kernel".into()));
    }
    let n = k_train.rows();
    if k_test.cols() != n {
        return Err(Error::Shape(format!("test kernel has {} columns for {n} training points", k_test.cols())));
    }
    if labels.len() != k_test.rows() {
        return Err(Error::Shape(format!("{} labels for {} test rows", labels.len(), k_test.rows())));
    }
    if n < 2 {
        return Err(Error::Degeneracy(format!("{n} training points span no plane")));
    }
    let nf = T::from_count(n);
    let col_means: Vec<T> = (0..n).map(|j| (0..n).map(|i| k_train.get(i, j)).sum::<T>() / nf).collect();
    let grand = col_means.iter().copied().sum::<T>() / nf;
    let mut centered = vec![T::zero(); n * n];
    for i in 0..n {
        for j in 0..n {
            centered[i * n + j] = k_train.get(i, j) - col_means[i] - col_means[j] + grand;
        }
    }
    let pairs = top_eigenpairs(&centered, n, 2)?;
    let (l1, l2) = (pairs.values[0], pairs.values[1]);
    let floor = T::epsilon() * nf * T::lit(10.0) * l1.abs().max(T::one());
    if !(l1 > floor && l2 > floor) {
        return Err(Error::Degeneracy(format!("leading eigenvalues {l1}, {l2} are not both positive")));
    }
    let axes: Vec<Vec<T>> = pairs
        .vectors
        .into_iter()
        .zip([l1, l2])
        .map(|(mut v, lambda)| {
            let lead = (0..n).fold(0, |best, i| if v[i].abs() > v[best].abs() { i } else { best });
            if v[lead] < T::zero() {
                v.iter_mut().for_each(|x| *x = -*x);
            }
            let inv = T::one() / lambda.sqrt();
            v.iter_mut().for_each(|x| *x = *x * inv);
            v
        })
        .collect();
    let points = (0..k_test.rows())
        .map(|s| {
            let row = k_test.row(s);
            let row_mean = row.iter().copied().sum::<T>() / nf;
            let mut coords = [T::zero(); 2];
            for (j, &kv) in row.iter().enumerate() {
                let c = kv - col_means[j] - row_mean + grand;
                coords[0] = coords[0] + c * axes[0][j];
                coords[1] = coords[1] + c * axes[1][j];
            }
            coords
        })
        .collect();
    Ok(Projection2D { points, labels: labels.to_vec() })
}
