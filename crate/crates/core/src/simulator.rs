//! Dense statevector simulation.
//!
//! Qubit `i` is bit `i` of the basis-state index (little-endian): the
//! amplitude of `|x_{n-1} … x_1 x_0⟩` lives at index `Σ x_i 2^i`. Every
//! routine in this module, [`Statevector::apply_permutation`] included,
//! follows that convention.

use std::f64::consts::FRAC_1_SQRT_2;

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Largest register the dense representation will allocate (256 MiB of amplitudes).
pub const MAX_QUBITS: usize = 24;

/// A gate from the set needed by the ansatz families.
///
/// Rotations follow `R_P(θ) = exp(-i θ/2 P)`; in particular
/// `Rzz(θ) = exp(-i θ/2 Z⊗Z)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Gate {
    H(usize),
    Rx(usize, f64),
    Ry(usize, f64),
    Rzz(usize, usize, f64),
    Cz(usize, usize),
}

impl Gate {
    pub fn qubits(&self) -> (usize, Option<usize>) {
        match *self {
            Gate::H(q) | Gate::Rx(q, _) | Gate::Ry(q, _) => (q, None),
            Gate::Rzz(a, b, _) | Gate::Cz(a, b) => (a, Some(b)),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Statevector {
    n_qubits: usize,
    amps: Vec<Complex64>,
}

fn check_capacity(n: usize) -> Result<()> {
    if n == 0 || n > MAX_QUBITS {
        return Err(Error::Capacity {
            what: "qubit count",
            got: n,
            limit: MAX_QUBITS,
        });
    }
    Ok(())
}

impl Statevector {
    /// `|0…0⟩` on `n` qubits.
    pub fn zero(n: usize) -> Result<Self> {
        Self::basis(n, 0)
    }

    pub fn basis(n: usize, index: usize) -> Result<Self> {
        check_capacity(n)?;
        let dim = 1usize << n;
        if index >= dim {
            return Err(Error::InvalidArgument(format!(
                "basis index {index} out of range for {n} qubits"
            )));
        }
        let mut amps = vec![Complex64::new(0.0, 0.0); dim];
        amps[index] = Complex64::new(1.0, 0.0);
        Ok(Self { n_qubits: n, amps })
    }

    /// The uniform superposition `|+⟩^{⊗n}`.
    pub fn uniform(n: usize) -> Result<Self> {
        check_capacity(n)?;
        let dim = 1usize << n;
        let a = (dim as f64).sqrt().recip();
        Ok(Self {
            n_qubits: n,
            amps: vec![Complex64::new(a, 0.0); dim],
        })
    }

    /// Wraps raw amplitudes; the length must be a power of two.
    pub fn from_amplitudes(amps: Vec<Complex64>) -> Result<Self> {
        let dim = amps.len();
        if dim < 2 || !dim.is_power_of_two() {
            return Err(Error::InvalidArgument(format!(
                "amplitude count {dim} is not a power of two"
            )));
        }
        let n = dim.trailing_zeros() as usize;
        check_capacity(n)?;
        Ok(Self { n_qubits: n, amps })
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amps
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum()
    }

    pub fn probabilities(&self) -> Vec<f64> {
        self.amps.iter().map(|a| a.norm_sqr()).collect()
    }

    /// Largest elementwise `|a_x - b_x|` between two states of equal size.
    pub fn max_deviation(&self, other: &Statevector) -> f64 {
        assert_eq!(self.n_qubits, other.n_qubits, "state sizes differ");
        self.amps
            .iter()
            .zip(&other.amps)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    fn check_qubit(&self, q: usize) -> Result<()> {
        if q >= self.n_qubits {
            return Err(Error::QubitIndex {
                index: q,
                n_qubits: self.n_qubits,
            });
        }
        Ok(())
    }

    fn check_pair(&self, a: usize, b: usize) -> Result<()> {
        self.check_qubit(a)?;
        self.check_qubit(b)?;
        if a == b {
            return Err(Error::InvalidArgument(format!(
                "two-qubit gate on repeated qubit {a}"
            )));
        }
        Ok(())
    }

    pub fn apply_gate(&mut self, gate: &Gate) -> Result<()> {
        match *gate {
            Gate::H(q) => {
                self.check_qubit(q)?;
                let h = Complex64::new(FRAC_1_SQRT_2, 0.0);
                self.apply_1q(q, [[h, h], [h, -h]]);
            }
            Gate::Rx(q, theta) => {
                self.check_qubit(q)?;
                let (s, c) = (theta / 2.0).sin_cos();
                let c = Complex64::new(c, 0.0);
                let mis = Complex64::new(0.0, -s);
                self.apply_1q(q, [[c, mis], [mis, c]]);
            }
            Gate::Ry(q, theta) => {
                self.check_qubit(q)?;
                let (s, c) = (theta / 2.0).sin_cos();
                let c = Complex64::new(c, 0.0);
                let s = Complex64::new(s, 0.0);
                self.apply_1q(q, [[c, -s], [s, c]]);
            }
            Gate::Rzz(a, b, theta) => {
                self.check_pair(a, b)?;
                self.apply_rzz(a, b, theta);
            }
            Gate::Cz(a, b) => {
                self.check_pair(a, b)?;
                let mask = (1usize << a) | (1usize << b);
                for (idx, amp) in self.amps.iter_mut().enumerate() {
                    if idx & mask == mask {
                        *amp = -*amp;
                    }
                }
            }
        }
        Ok(())
    }

    pub fn apply_gates<'a>(&mut self, gates: impl IntoIterator<Item = &'a Gate>) -> Result<()> {
        for g in gates {
            self.apply_gate(g)?;
        }
        Ok(())
    }

    fn apply_1q(&mut self, q: usize, m: [[Complex64; 2]; 2]) {
        let stride = 1usize << q;
        for block in (0..self.amps.len()).step_by(stride << 1) {
            for i0 in block..block + stride {
                let i1 = i0 | stride;
                let (a0, a1) = (self.amps[i0], self.amps[i1]);
                self.amps[i0] = m[0][0] * a0 + m[0][1] * a1;
                self.amps[i1] = m[1][0] * a0 + m[1][1] * a1;
            }
        }
    }

    // In-place diagonal pass: e^{-iθ/2} where the two bits agree, e^{+iθ/2} otherwise.
    fn apply_rzz(&mut self, a: usize, b: usize, theta: f64) {
        let (s, c) = (theta / 2.0).sin_cos();
        let same = Complex64::new(c, -s);
        let diff = Complex64::new(c, s);
        for (idx, amp) in self.amps.iter_mut().enumerate() {
            if ((idx >> a) ^ (idx >> b)) & 1 == 0 {
                *amp *= same;
            } else {
                *amp *= diff;
            }
        }
    }

    /// Multiplies each amplitude by `exp(-i γ d_x)` for a diagonal `d`.
    pub fn apply_diagonal_phase(&mut self, diagonal: &[f64], gamma: f64) -> Result<()> {
        if diagonal.len() != self.amps.len() {
            return Err(Error::InvalidArgument(format!(
                "diagonal has {} entries, state has {}",
                diagonal.len(),
                self.amps.len()
            )));
        }
        for (amp, &d) in self.amps.iter_mut().zip(diagonal) {
            let (s, c) = (gamma * d).sin_cos();
            *amp *= Complex64::new(c, -s);
        }
        Ok(())
    }

    /// `Σ_x |a_x|² d_x` for a diagonal observable `d`.
    pub fn expectation_diagonal(&self, diagonal: &[f64]) -> Result<f64> {
        if diagonal.len() != self.amps.len() {
            return Err(Error::InvalidArgument(format!(
                "diagonal has {} entries, state has {}",
                diagonal.len(),
                self.amps.len()
            )));
        }
        Ok(self
            .amps
            .iter()
            .zip(diagonal)
            .map(|(a, d)| a.norm_sqr() * d)
            .sum())
    }

    /// `⟨Z_i Z_j⟩`.
    pub fn expectation_zz(&self, i: usize, j: usize) -> Result<f64> {
        self.check_qubit(i)?;
        self.check_qubit(j)?;
        if i == j {
            return Err(Error::InvalidArgument(format!(
                "ZZ expectation needs distinct qubits, got {i} twice"
            )));
        }
        // Separate sums keep balanced states (e.g. uniform) at exactly zero.
        let (mut even, mut odd) = (0.0, 0.0);
        for (idx, amp) in self.amps.iter().enumerate() {
            let p = amp.norm_sqr();
            if ((idx >> i) ^ (idx >> j)) & 1 == 0 {
                even += p;
            } else {
                odd += p;
            }
        }
        Ok(even - odd)
    }

    /// Relabels qubits: bit `i` of every basis index moves to bit `sigma[i]`.
    ///
    /// For any pair, `⟨Z_{σ(i)} Z_{σ(j)}⟩` of the result equals `⟨Z_i Z_j⟩` of `self`.
    pub fn apply_permutation(&self, sigma: &[usize]) -> Result<Statevector> {
        check_bijection(sigma, self.n_qubits)?;
        let mut out = vec![Complex64::new(0.0, 0.0); self.amps.len()];
        for (x, &amp) in self.amps.iter().enumerate() {
            let mut y = 0usize;
            for (i, &target) in sigma.iter().enumerate() {
                y |= ((x >> i) & 1) << target;
            }
            out[y] = amp;
        }
        Ok(Statevector {
            n_qubits: self.n_qubits,
            amps: out,
        })
    }
}

/// Checks that `sigma` is a permutation of `0..n`.
pub fn check_bijection(sigma: &[usize], n: usize) -> Result<()> {
    if sigma.len() != n {
        return Err(Error::InvalidArgument(format!(
            "permutation has length {}, expected {n}",
            sigma.len()
        )));
    }
    let mut seen = vec![false; n];
    for &s in sigma {
        if s >= n || seen[s] {
            return Err(Error::InvalidArgument(format!(
                "{sigma:?} is not a bijection on 0..{n}"
            )));
        }
        seen[s] = true;
    }
    Ok(())
}
