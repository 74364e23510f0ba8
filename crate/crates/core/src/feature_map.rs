//! Dense angle encoding: two features per qubit, `Rx(x[2q])` then `Rz(x[2q+1])`
//! on qubit `q`, followed by one CNOT entangling layer.

use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::statevector::{Gate, StateVector};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Entanglement {
    /// `CNOT(q, q + 1)` for `q = 0 .. n - 2`, ascending.
    LinearChain,
    None,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FeatureMapSpec<T> {
    num_features: usize,
    pub entanglement: Entanglement,
    /// Rz angle for the unused slot when the feature count is odd.
    pub pad_value: T,
}

impl<T: Real> FeatureMapSpec<T> {
    /// Linear-chain entanglement, zero padding.
    pub fn new(num_features: usize) -> Result<Self> {
        Self::with_entanglement(num_features, Entanglement::LinearChain)
    }

    pub fn with_entanglement(num_features: usize, entanglement: Entanglement) -> Result<Self> {
        if num_features == 0 {
            return Err(Error::Argument("feature map needs at least one feature".into()));
        }
        Ok(Self {
            num_features,
            entanglement,
            pad_value: T::zero(),
        })
    }

    pub fn num_features(&self) -> usize {
        self.num_features
    }

    pub fn num_qubits(&self) -> usize {
        self.num_features.div_ceil(2)
    }

    fn validate(&self, x: &[T]) -> Result<()> {
        if x.len() != self.num_features {
            return Err(Error::Shape(format!(
                "feature vector of length {} for a {}-feature map",
                x.len(),
                self.num_features
            )));
        }
        if let Some(i) = x.iter().position(|v| !v.is_finite()) {
            return Err(Error::Data(format!("feature {i} is not finite ({})", x[i])));
        }
        Ok(())
    }

    /// Gate sequence of `U(x)`.
    pub fn circuit(&self, x: &[T]) -> Result<Vec<Gate<T>>> {
        self.validate(x)?;
        let n = self.num_qubits();
        let mut gates = Vec::with_capacity(2 * n + n.saturating_sub(1));
        for q in 0..n {
            gates.push(Gate::rx(q, x[2 * q]));
            gates.push(Gate::rz(q, x.get(2 * q + 1).copied().unwrap_or(self.pad_value)));
        }
        if self.entanglement == Entanglement::LinearChain {
            gates.extend((0..n.saturating_sub(1)).map(|q| Gate::cnot(q, q + 1)));
        }
        Ok(gates)
    }

    /// Gate sequence of `U(x)^dagger`: reversed order, each gate inverted.
    pub fn inverse_circuit(&self, x: &[T]) -> Result<Vec<Gate<T>>> {
        Ok(self.circuit(x)?.iter().rev().map(Gate::inverse).collect())
    }

    pub fn encode(&self, x: &[T]) -> Result<EncodedPoint<T>> {
        let gates = self.circuit(x)?;
        let mut state = StateVector::zero(self.num_qubits())?;
        state.apply_all(&gates)?;
        Ok(EncodedPoint { raw: x.to_vec(), state })
    }

    /// `|<psi(x)|psi(y)>|^2` from the two statevectors.
    pub fn fidelity_exact(&self, x: &[T], y: &[T]) -> Result<T> {
        let a = self.encode(x)?;
        let b = self.encode(y)?;
        state_fidelity(&a.state, &b.state)
    }

    /// `U(y)^dagger U(x) |0...0>`.
    pub fn compute_uncompute(&self, x: &[T], y: &[T]) -> Result<StateVector<T>> {
        let mut state = self.encode(x)?.state;
        state.apply_all(&self.inverse_circuit(y)?)?;
        Ok(state)
    }

    /// Fraction of all-zeros outcomes in `shots` measurements of the
    /// compute-uncompute circuit.
    pub fn fidelity_sampled(&self, x: &[T], y: &[T], shots: u64, seed: u64) -> Result<T> {
        if shots == 0 {
            return Err(Error::Argument("shots must be at least 1".into()));
        }
        let state = self.compute_uncompute(x, y)?;
        zeros_fraction(&state, shots, seed)
    }
}

/// A feature vector together with its encoded state.
#[derive(Debug, Clone, PartialEq)]
pub struct EncodedPoint<T> {
    pub raw: Vec<T>,
    pub state: StateVector<T>,
}

pub(crate) fn zeros_fraction<T: Real>(state: &StateVector<T>, shots: u64, seed: u64) -> Result<T> {
    let histogram = state.sample(shots, seed)?;
    let zeros = histogram.get(&0).copied().unwrap_or(0);
    Ok(T::lit(zeros as f64 / shots as f64))
}

/// Squared overlap of two states, with rounding below zero clamped.
pub fn state_fidelity<T: Real>(a: &StateVector<T>, b: &StateVector<T>) -> Result<T> {
    clamp_fidelity(a.inner_product(b)?.norm_sqr())
}

/// Entries in `(-1e-12, 0)` clamp to 0 and `(1, 1 + 1e-12]` to 1; anything
/// further out, or non-finite, is a simulator bug.
pub fn clamp_fidelity<T: Real>(value: T) -> Result<T> {
    let slack = T::lit(1e-12);
    if !value.is_finite() || value < -slack || value > T::one() + slack {
        return Err(Error::Numeric(format!("fidelity {value} outside [0, 1]")));
    }
    Ok(value.max(T::zero()).min(T::one()))
}

pub fn encode<T: Real>(spec: &FeatureMapSpec<T>, x: &[T]) -> Result<EncodedPoint<T>> {
    spec.encode(x)
}

pub fn fidelity_exact<T: Real>(spec: &FeatureMapSpec<T>, x: &[T], y: &[T]) -> Result<T> {
    spec.fidelity_exact(x, y)
}

pub fn fidelity_sampled<T: Real>(
    spec: &FeatureMapSpec<T>,
    x: &[T],
    y: &[T],
    shots: u64,
    seed: u64,
) -> Result<T> {
    spec.fidelity_sampled(x, y, shots, seed)
}
