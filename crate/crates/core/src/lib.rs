//! Quantum-kernel One-Class SVM anomaly detection.
//!
//! Classical feature vectors are dense-angle encoded into simulated qubit
//! registers, pairwise state fidelities form a Gram matrix, and a nu-One-Class
//! SVM trained on baseline rows flags anomalous test rows. Supporting pieces:
//! Gini-importance feature ranking, angle scaling, seeded splits and synthetic
//! data, kernel caching, and a kernel-PCA projection for plotting.
//!
//! Numeric code is generic over [`Real`] (`f32` or `f64`); the aliases below
//! fix it to `f64`, which the pipeline and file formats use.

mod binfmt;
pub mod data;
pub mod error;
pub mod feature_map;
pub mod feature_select;
pub mod kernel;
pub mod linalg;
pub mod metrics;
pub mod ocsvm;
pub mod pipeline;
pub mod projection;
pub mod scalar;
pub mod seeding;
pub mod statevector;

pub use error::{Error, Result};
pub use scalar::Real;

pub type StateVector = statevector::StateVector<f64>;
pub type Gate = statevector::Gate<f64>;
pub type FeatureMapSpec = feature_map::FeatureMapSpec<f64>;
pub type KernelMatrix = kernel::KernelMatrix<f64>;
pub type OcsvmConfig = ocsvm::OcsvmConfig<f64>;
pub type OcsvmModel = ocsvm::OcsvmModel<f64>;
pub type DatasetTable = data::DatasetTable<f64>;
pub type ScalingParams = data::ScalingParams<f64>;
pub type TreeNode = feature_select::TreeNode<f64>;
pub type FeatureRanking = feature_select::FeatureRanking<f64>;
pub type Projection2D = projection::Projection2D<f64>;

pub type StateVector32 = statevector::StateVector<f32>;
pub type KernelMatrix32 = kernel::KernelMatrix<f32>;
