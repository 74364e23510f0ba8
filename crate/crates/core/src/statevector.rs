//! Dense statevector simulator restricted to the feature-map gate set.
//!
//! Basis ordering: qubit `q` is bit `q` of the basis index, so qubit 0 is the
//! least-significant bit. Gates keep their exact `exp(-i θ P / 2)` phases.

use std::collections::BTreeMap;

use num_complex::Complex;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution};

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Hard cap on register width; 2^20 amplitudes.
pub const MAX_QUBITS: usize = 20;

/// Measurement histogram keyed by basis index. Outcomes never observed are absent.
pub type Histogram = BTreeMap<usize, u64>;

/// One gate of the supported set.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Gate<T> {
    Rx { target: usize, theta: T },
    Rz { target: usize, phi: T },
    U3 { target: usize, theta: T, phi: T, lambda: T },
    Cnot { control: usize, target: usize },
}

impl<T: Real> Gate<T> {
    pub fn rx(target: usize, theta: T) -> Self {
        Gate::Rx { target, theta }
    }

    pub fn rz(target: usize, phi: T) -> Self {
        Gate::Rz { target, phi }
    }

    pub fn u3(target: usize, theta: T, phi: T, lambda: T) -> Self {
        Gate::U3 { target, theta, phi, lambda }
    }

    pub fn cnot(control: usize, target: usize) -> Self {
        Gate::Cnot { control, target }
    }

    pub fn target(&self) -> usize {
        match *self {
            Gate::Rx { target, .. }
            | Gate::Rz { target, .. }
            | Gate::U3 { target, .. }
            | Gate::Cnot { target, .. } => target,
        }
    }

    /// The adjoint gate. Rotations negate their angles; CNOT is self-inverse.
    pub fn inverse(&self) -> Self {
        match *self {
            Gate::Rx { target, theta } => Gate::Rx { target, theta: -theta },
            Gate::Rz { target, phi } => Gate::Rz { target, phi: -phi },
            Gate::U3 { target, theta, phi, lambda } => Gate::U3 {
                target,
                theta: -theta,
                phi: -lambda,
                lambda: -phi,
            },
            Gate::Cnot { control, target } => Gate::Cnot { control, target },
        }
    }

    /// Row-major 2x2 unitary for single-qubit gates, `None` for CNOT.
    pub fn single_qubit_matrix(&self) -> Option<[[Complex<T>; 2]; 2]> {
        let half = T::lit(0.5);
        let zero = T::zero();
        match *self {
            Gate::Rx { theta, .. } => {
                let (s, c) = (theta * half).sin_cos();
                let diag = Complex::new(c, zero);
                let off = Complex::new(zero, -s);
                Some([[diag, off], [off, diag]])
            }
            Gate::Rz { phi, .. } => {
                let h = phi * half;
                Some([
                    [Complex::from_polar(T::one(), -h), Complex::new(zero, zero)],
                    [Complex::new(zero, zero), Complex::from_polar(T::one(), h)],
                ])
            }
            Gate::U3 { theta, phi, lambda, .. } => {
                let (s, c) = (theta * half).sin_cos();
                Some([
                    [Complex::new(c, zero), -Complex::from_polar(s, lambda)],
                    [Complex::from_polar(s, phi), Complex::from_polar(c, phi + lambda)],
                ])
            }
            Gate::Cnot { .. } => None,
        }
    }

    fn validate(&self, num_qubits: usize) -> Result<()> {
        let target = self.target();
        if target >= num_qubits {
            return Err(Error::Index(format!(
                "target qubit {target} on a {num_qubits}-qubit register"
            )));
        }
        if let Gate::Cnot { control, target } = *self {
            if control >= num_qubits {
                return Err(Error::Index(format!(
                    "control qubit {control} on a {num_qubits}-qubit register"
                )));
            }
            if control == target {
                return Err(Error::Index(format!("CNOT control equals target ({target})")));
            }
        }
        Ok(())
    }
}

/// Normalization tolerance appropriate for the scalar's precision.
pub(crate) fn norm_tolerance<T: Real>() -> T {
    T::lit(1e-10).max(T::epsilon() * T::lit(1e3))
}

/// Normalized amplitudes of an `n`-qubit register.
#[derive(Debug, Clone, PartialEq)]
pub struct StateVector<T> {
    num_qubits: usize,
    amplitudes: Vec<Complex<T>>,
}

impl<T: Real> StateVector<T> {
    /// `|0...0>` on `num_qubits` qubits, bounded by [`MAX_QUBITS`].
    pub fn zero(num_qubits: usize) -> Result<Self> {
        Self::zero_with_cap(num_qubits, MAX_QUBITS)
    }

    pub fn zero_with_cap(num_qubits: usize, cap: usize) -> Result<Self> {
        if num_qubits == 0 || num_qubits > cap.min(MAX_QUBITS) {
            return Err(Error::Capacity(format!(
                "register of {num_qubits} qubits outside 1..={}",
                cap.min(MAX_QUBITS)
            )));
        }
        let mut amplitudes = vec![Complex::new(T::zero(), T::zero()); 1 << num_qubits];
        amplitudes[0] = Complex::new(T::one(), T::zero());
        Ok(Self { num_qubits, amplitudes })
    }

    /// Wraps explicit amplitudes; length must be a power of two and the norm one.
    pub fn from_amplitudes(amplitudes: Vec<Complex<T>>) -> Result<Self> {
        let len = amplitudes.len();
        if len < 2 || !len.is_power_of_two() {
            return Err(Error::Shape(format!("{len} amplitudes is not 2^n with n >= 1")));
        }
        let num_qubits = len.trailing_zeros() as usize;
        if num_qubits > MAX_QUBITS {
            return Err(Error::Capacity(format!("{num_qubits} qubits exceeds {MAX_QUBITS}")));
        }
        let state = Self { num_qubits, amplitudes };
        let deviation = (state.norm_sqr() - T::one()).abs();
        if !(deviation <= norm_tolerance::<T>()) {
            return Err(Error::Numeric(format!("state norm deviates from 1 by {deviation}")));
        }
        Ok(state)
    }

    pub fn num_qubits(&self) -> usize {
        self.num_qubits
    }

    pub fn amplitudes(&self) -> &[Complex<T>] {
        &self.amplitudes
    }

    pub fn norm_sqr(&self) -> T {
        self.amplitudes.iter().map(|a| a.norm_sqr()).sum()
    }

    /// Returns a new state with `gate` applied.
    pub fn apply(&self, gate: &Gate<T>) -> Result<Self> {
        let mut next = self.clone();
        next.apply_in_place(gate)?;
        Ok(next)
    }

    pub fn apply_all<'a>(&mut self, gates: impl IntoIterator<Item = &'a Gate<T>>) -> Result<()> {
        for gate in gates {
            self.apply_in_place(gate)?;
        }
        Ok(())
    }

    pub fn apply_in_place(&mut self, gate: &Gate<T>) -> Result<()> {
        gate.validate(self.num_qubits)?;
        match *gate {
            Gate::Cnot { control, target } => {
                let cmask = 1usize << control;
                let tmask = 1usize << target;
                for i in 0..self.amplitudes.len() {
                    if i & cmask != 0 && i & tmask == 0 {
                        self.amplitudes.swap(i, i | tmask);
                    }
                }
            }
            Gate::Rz { target, .. } => {
                let m = gate.single_qubit_matrix().expect("single-qubit gate");
                let (low, high) = (m[0][0], m[1][1]);
                let mask = 1usize << target;
                for (i, amp) in self.amplitudes.iter_mut().enumerate() {
                    *amp = *amp * if i & mask == 0 { low } else { high };
                }
            }
            Gate::Rx { target, .. } | Gate::U3 { target, .. } => {
                let m = gate.single_qubit_matrix().expect("single-qubit gate");
                let mask = 1usize << target;
                for i in 0..self.amplitudes.len() {
                    if i & mask == 0 {
                        let j = i | mask;
                        let (a0, a1) = (self.amplitudes[i], self.amplitudes[j]);
                        self.amplitudes[i] = m[0][0] * a0 + m[0][1] * a1;
                        self.amplitudes[j] = m[1][0] * a0 + m[1][1] * a1;
                    }
                }
            }
        }
        Ok(())
    }

    /// `<self|other> = sum_i conj(self_i) * other_i`.
    pub fn inner_product(&self, other: &Self) -> Result<Complex<T>> {
        if self.num_qubits != other.num_qubits {
            return Err(Error::Shape(format!(
                "inner product of {}-qubit and {}-qubit states",
                self.num_qubits, other.num_qubits
            )));
        }
        Ok(self
            .amplitudes
            .iter()
            .zip(&other.amplitudes)
            .fold(Complex::new(T::zero(), T::zero()), |acc, (a, b)| acc + a.conj() * b))
    }

    /// Born-rule probabilities `|amplitude_i|^2`.
    pub fn probabilities(&self) -> Vec<T> {
        self.amplitudes.iter().map(|a| a.norm_sqr()).collect()
    }

    /// Draws `shots` computational-basis measurements.
    ///
    /// The generator is ChaCha8 seeded through `seed_from_u64(seed)`. Counts are
    /// drawn as a chain of conditional binomials over basis indices in ascending
    /// order, which has the same law as `shots` independent categorical draws.
    pub fn sample(&self, shots: u64, seed: u64) -> Result<Histogram> {
        if shots == 0 {
            return Err(Error::Argument("shots must be at least 1".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let probs: Vec<f64> = self.probabilities().into_iter().map(Real::as_f64).collect();
        let mut histogram = Histogram::new();
        let mut remaining = shots;
        let mut mass_left = probs.iter().sum::<f64>();
        let last = probs.len() - 1;
        for (index, &p) in probs.iter().enumerate() {
            if remaining == 0 {
                break;
            }
            let count = if index == last {
                remaining
            } else if p <= 0.0 {
                0
            } else {
                let conditional = if mass_left > 0.0 { (p / mass_left).clamp(0.0, 1.0) } else { 1.0 };
                Binomial::new(remaining, conditional)
                    .map_err(|e| Error::Numeric(format!("binomial draw: {e}")))?
                    .sample(&mut rng)
            };
            mass_left -= p;
            if count > 0 {
                histogram.insert(index, count);
                remaining -= count;
            }
        }
        Ok(histogram)
    }
}

/// Free-function form of [`StateVector::zero`].
pub fn zero_state<T: Real>(num_qubits: usize) -> Result<StateVector<T>> {
    StateVector::zero(num_qubits)
}

pub fn apply_gate<T: Real>(state: &StateVector<T>, gate: &Gate<T>) -> Result<StateVector<T>> {
    state.apply(gate)
}

pub fn inner_product<T: Real>(a: &StateVector<T>, b: &StateVector<T>) -> Result<Complex<T>> {
    a.inner_product(b)
}

pub fn outcome_probabilities<T: Real>(state: &StateVector<T>) -> Vec<T> {
    state.probabilities()
}

pub fn sample_outcomes<T: Real>(state: &StateVector<T>, shots: u64, seed: u64) -> Result<Histogram> {
    state.sample(shots, seed)
}
