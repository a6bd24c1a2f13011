//! Dense statevector and unitary simulation.
//!
//! Qubit 0 is the least significant bit of a basis index everywhere. Sampled
//! bitstrings are printed most-significant first, so `"001"` has qubit 0 set.

use std::collections::BTreeMap;

use num_complex::Complex;
use num_traits::{One, Zero};
use rand::distributions::{Distribution, WeightedIndex};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::circuit::{Circuit, CircuitError, Gate, GateKind};
use crate::scalar::Real;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error("{0} has no unitary action")]
    NotUnitary(&'static str),
    #[error("circuit contains a measurement")]
    ContainsMeasure,
    #[error("dimension mismatch: circuit has {circuit} qubits, state has {state}")]
    DimensionMismatch { circuit: usize, state: usize },
    #[error("amplitude vector of length {0} is not a power of two")]
    BadLength(usize),
    #[error("state is not normalised (norm^2 = {0})")]
    NotNormalised(f64),
    #[error(transparent)]
    Gate(#[from] CircuitError),
}

fn c<T: Real>(re: f64, im: f64) -> Complex<T> {
    Complex::new(T::of(re), T::of(im))
}

fn norm_tolerance<T: Real>() -> f64 {
    (T::epsilon().as_f64() * 100.0).max(1e-10)
}

/// 2x2 matrix of a single-qubit kind, row-major.
pub(crate) fn single_qubit_matrix<T: Real>(kind: GateKind) -> Option<[Complex<T>; 4]> {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    Some(match kind {
        GateKind::H => [c(s, 0.0), c(s, 0.0), c(s, 0.0), c(-s, 0.0)],
        GateKind::X => [c(0.0, 0.0), c(1.0, 0.0), c(1.0, 0.0), c(0.0, 0.0)],
        GateKind::SX => [c(0.5, 0.5), c(0.5, -0.5), c(0.5, -0.5), c(0.5, 0.5)],
        GateKind::RX(theta) => {
            let (sn, cs) = (theta / 2.0).sin_cos();
            [c(cs, 0.0), c(0.0, -sn), c(0.0, -sn), c(cs, 0.0)]
        }
        GateKind::RZ(theta) => {
            let (sn, cs) = (theta / 2.0).sin_cos();
            [c(cs, -sn), c(0.0, 0.0), c(0.0, 0.0), c(cs, sn)]
        }
        _ => return None,
    })
}

/// 4x4 matrix of a two-qubit kind in the local basis `(b0 << 1) | b1`, where
/// `b0` is the bit of the first operand (the control for CX).
fn two_qubit_matrix<T: Real>(kind: GateKind) -> Option<[[Complex<T>; 4]; 4]> {
    let perm: [usize; 4] = match kind {
        GateKind::CX => [0, 1, 3, 2],
        GateKind::Swap => [0, 2, 1, 3],
        _ => return None,
    };
    let mut m = [[Complex::zero(); 4]; 4];
    for (col, &row) in perm.iter().enumerate() {
        m[row][col] = Complex::one();
    }
    Some(m)
}

/// Pure state on `n` qubits.
#[derive(Debug, Clone, PartialEq)]
pub struct StateVector<T: Real> {
    n: usize,
    amps: Vec<Complex<T>>,
}

impl<T: Real> StateVector<T> {
    /// |0...0>
    pub fn zero(n: usize) -> Self {
        Self::basis(n, 0)
    }

    pub fn basis(n: usize, index: usize) -> Self {
        let mut amps = vec![Complex::zero(); 1 << n];
        amps[index] = Complex::one();
        StateVector { n, amps }
    }

    /// Uniform superposition |+>^n.
    pub fn plus(n: usize) -> Self {
        let dim = 1usize << n;
        let a = T::one() / T::of(dim as f64).sqrt();
        StateVector {
            n,
            amps: vec![Complex::new(a, T::zero()); dim],
        }
    }

    pub fn from_amplitudes(amps: Vec<Complex<T>>) -> Result<Self, SimError> {
        let len = amps.len();
        if len == 0 || !len.is_power_of_two() {
            return Err(SimError::BadLength(len));
        }
        let s = StateVector {
            n: len.trailing_zeros() as usize,
            amps,
        };
        let nrm = s.norm_sqr().as_f64();
        if (nrm - 1.0).abs() > norm_tolerance::<T>() {
            return Err(SimError::NotNormalised(nrm));
        }
        Ok(s)
    }

    pub fn num_qubits(&self) -> usize {
        self.n
    }

    pub fn amplitudes(&self) -> &[Complex<T>] {
        &self.amps
    }

    pub fn norm_sqr(&self) -> T {
        self.amps.iter().map(|a| a.norm_sqr()).sum()
    }

    pub fn probabilities(&self) -> Vec<T> {
        self.amps.iter().map(|a| a.norm_sqr()).collect()
    }

    /// <self|other>
    pub fn inner(&self, other: &Self) -> Complex<T> {
        self.amps
            .iter()
            .zip(&other.amps)
            .map(|(a, b)| a.conj() * b)
            .fold(Complex::zero(), |acc, x| acc + x)
    }

    /// In-place application of one unitary gate.
    pub fn apply_gate(&mut self, g: &Gate) -> Result<(), SimError> {
        g.validate(self.n, usize::MAX)?;
        let amps = &mut self.amps;
        match g.kind {
            GateKind::Measure => return Err(SimError::NotUnitary("measure")),
            GateKind::Barrier => return Err(SimError::NotUnitary("barrier")),
            GateKind::CX => {
                let (cb, tb) = (1usize << g.qubits[0], 1usize << g.qubits[1]);
                for i in 0..amps.len() {
                    if i & cb != 0 && i & tb == 0 {
                        amps.swap(i, i | tb);
                    }
                }
            }
            GateKind::Swap => {
                let (ab, bb) = (1usize << g.qubits[0], 1usize << g.qubits[1]);
                for i in 0..amps.len() {
                    if i & ab != 0 && i & bb == 0 {
                        amps.swap(i, i ^ ab ^ bb);
                    }
                }
            }
            kind => {
                let m = single_qubit_matrix::<T>(kind).expect("single-qubit kind");
                let bit = 1usize << g.qubits[0];
                for i in 0..amps.len() {
                    if i & bit == 0 {
                        let (a, b) = (amps[i], amps[i | bit]);
                        amps[i] = m[0] * a + m[1] * b;
                        amps[i | bit] = m[2] * a + m[3] * b;
                    }
                }
            }
        }
        Ok(())
    }
}

/// Square complex matrix acting on `n` qubits, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct UnitaryMatrix<T: Real> {
    n: usize,
    data: Vec<Complex<T>>,
}

impl<T: Real> UnitaryMatrix<T> {
    pub fn identity(n: usize) -> Self {
        let dim = 1usize << n;
        let mut data = vec![Complex::zero(); dim * dim];
        for i in 0..dim {
            data[i * dim + i] = Complex::one();
        }
        UnitaryMatrix { n, data }
    }

    /// Wrap raw row-major entries; the dimension must be `2^n x 2^n`.
    pub fn from_entries(n: usize, data: Vec<Complex<T>>) -> Result<Self, SimError> {
        let dim = 1usize << n;
        if data.len() != dim * dim {
            return Err(SimError::BadLength(data.len()));
        }
        Ok(UnitaryMatrix { n, data })
    }

    pub fn num_qubits(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        1 << self.n
    }

    pub fn get(&self, row: usize, col: usize) -> Complex<T> {
        self.data[row * self.dim() + col]
    }

    pub fn entries(&self) -> &[Complex<T>] {
        &self.data
    }

    pub fn matmul(&self, rhs: &Self) -> Self {
        assert_eq!(self.n, rhs.n, "matmul dimension mismatch");
        let dim = self.dim();
        let mut out = vec![Complex::zero(); dim * dim];
        for r in 0..dim {
            for k in 0..dim {
                let a = self.data[r * dim + k];
                if a.is_zero() {
                    continue;
                }
                let row = &rhs.data[k * dim..(k + 1) * dim];
                for (o, &b) in out[r * dim..(r + 1) * dim].iter_mut().zip(row) {
                    *o += a * b;
                }
            }
        }
        UnitaryMatrix { n: self.n, data: out }
    }

    pub fn adjoint(&self) -> Self {
        let dim = self.dim();
        let mut data = vec![Complex::zero(); dim * dim];
        for r in 0..dim {
            for col in 0..dim {
                data[col * dim + r] = self.data[r * dim + col].conj();
            }
        }
        UnitaryMatrix { n: self.n, data }
    }

    pub fn apply(&self, s: &StateVector<T>) -> Result<StateVector<T>, SimError> {
        if s.n != self.n {
            return Err(SimError::DimensionMismatch {
                circuit: self.n,
                state: s.n,
            });
        }
        let dim = self.dim();
        let amps = (0..dim)
            .map(|r| {
                self.data[r * dim..(r + 1) * dim]
                    .iter()
                    .zip(&s.amps)
                    .fold(Complex::zero(), |acc, (&a, &b)| acc + a * b)
            })
            .collect();
        Ok(StateVector { n: self.n, amps })
    }

    /// Largest elementwise deviation of `U U^dagger` from the identity.
    pub fn unitarity_error(&self) -> f64 {
        let prod = self.matmul(&self.adjoint());
        let dim = self.dim();
        let mut worst = 0.0f64;
        for r in 0..dim {
            for col in 0..dim {
                let target = if r == col { Complex::one() } else { Complex::zero() };
                worst = worst.max((prod.data[r * dim + col] - target).norm().as_f64());
            }
        }
        worst
    }

    pub fn is_unitary(&self, tol: f64) -> bool {
        self.unitarity_error() <= tol
    }

    /// Elementwise max of `|self - e^{i phi} other|` with the phase aligned on
    /// the largest entry of `other`.
    pub fn distance_up_to_phase(&self, other: &Self) -> f64 {
        if self.n != other.n {
            return f64::INFINITY;
        }
        let (pivot, _) = other
            .data
            .iter()
            .enumerate()
            .fold((0, T::zero()), |(bi, bv), (i, z)| {
                let v = z.norm();
                if v > bv {
                    (i, v)
                } else {
                    (bi, bv)
                }
            });
        let (a, b) = (self.data[pivot], other.data[pivot]);
        let phase = if a.norm().is_zero() || b.norm().is_zero() {
            Complex::one()
        } else {
            let r = a / b;
            r / Complex::new(r.norm(), T::zero())
        };
        self.data
            .iter()
            .zip(&other.data)
            .map(|(&x, &y)| (x - phase * y).norm().as_f64())
            .fold(0.0, f64::max)
    }

    pub fn equal_up_to_phase(&self, other: &Self, tol: f64) -> bool {
        self.distance_up_to_phase(other) <= tol
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        self.data
            .iter()
            .zip(&other.data)
            .map(|(&x, &y)| (x - y).norm().as_f64())
            .fold(0.0, f64::max)
    }
}

/// Permutation matrix relocating logical qubit `l` to position `perm[l]`:
/// `|x> -> |y>` with bit `perm[l]` of `y` equal to bit `l` of `x`.
pub fn qubit_permutation<T: Real>(perm: &[usize]) -> UnitaryMatrix<T> {
    let n = perm.len();
    let dim = 1usize << n;
    let mut data = vec![Complex::zero(); dim * dim];
    for x in 0..dim {
        let y = perm
            .iter()
            .enumerate()
            .fold(0usize, |acc, (l, &p)| acc | (((x >> l) & 1) << p));
        data[y * dim + x] = Complex::one();
    }
    UnitaryMatrix { n, data }
}

/// Full `2^n`-dimensional matrix of one gate, built entry by entry from the
/// local 2x2 / 4x4 matrix.
pub fn gate_unitary<T: Real>(g: &Gate, n: usize) -> Result<UnitaryMatrix<T>, SimError> {
    match g.kind {
        GateKind::Measure => return Err(SimError::NotUnitary("measure")),
        GateKind::Barrier => return Err(SimError::NotUnitary("barrier")),
        _ => {}
    }
    g.validate(n, usize::MAX)?;
    let dim = 1usize << n;
    let mask: usize = g.qubits.iter().map(|&q| 1usize << q).sum();
    // Local index: first operand is the most significant local bit.
    let local = |i: usize| -> usize {
        g.qubits
            .iter()
            .fold(0usize, |acc, &q| (acc << 1) | ((i >> q) & 1))
    };
    let mut data = vec![Complex::zero(); dim * dim];
    if let Some(m) = single_qubit_matrix::<T>(g.kind) {
        for r in 0..dim {
            for col in 0..dim {
                if r & !mask == col & !mask {
                    data[r * dim + col] = m[local(r) * 2 + local(col)];
                }
            }
        }
    } else {
        let m = two_qubit_matrix::<T>(g.kind).expect("two-qubit kind");
        for r in 0..dim {
            for col in 0..dim {
                if r & !mask == col & !mask {
                    data[r * dim + col] = m[local(r)][local(col)];
                }
            }
        }
    }
    Ok(UnitaryMatrix { n, data })
}

/// Product of the gate unitaries, last gate leftmost. Barriers are skipped;
/// measurements are rejected.
pub fn circuit_unitary<T: Real>(c: &Circuit) -> Result<UnitaryMatrix<T>, SimError> {
    if c.has_measure() {
        return Err(SimError::ContainsMeasure);
    }
    let mut u = UnitaryMatrix::identity(c.num_qubits());
    for g in c.gates().iter().filter(|g| g.kind.is_unitary()) {
        u = gate_unitary::<T>(g, c.num_qubits())?.matmul(&u);
    }
    Ok(u)
}

/// Evolve `s` through the unitary gates of `c` in place, gate by gate.
/// Barriers and measurements are skipped.
pub fn evolve<T: Real>(c: &Circuit, s: &StateVector<T>) -> Result<StateVector<T>, SimError> {
    if c.num_qubits() != s.n {
        return Err(SimError::DimensionMismatch {
            circuit: c.num_qubits(),
            state: s.n,
        });
    }
    let mut out = s.clone();
    for g in c.gates().iter().filter(|g| g.kind.is_unitary()) {
        out.apply_gate(g)?;
    }
    Ok(out)
}

/// Format basis index `i` as an `n`-character bitstring, qubit 0 rightmost.
pub fn bitstring(i: usize, n: usize) -> String {
    (0..n)
        .rev()
        .map(|q| if (i >> q) & 1 == 1 { '1' } else { '0' })
        .collect()
}

/// Seeded multinomial sampling of measurement outcomes. Only observed
/// outcomes appear in the map.
pub fn sample_counts<T: Real>(s: &StateVector<T>, shots: usize, seed: u64) -> BTreeMap<String, usize> {
    let probs: Vec<f64> = s.probabilities().into_iter().map(|p| p.as_f64()).collect();
    let dist = WeightedIndex::new(&probs).expect("normalised state has positive weight");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut hist = vec![0usize; probs.len()];
    for _ in 0..shots {
        hist[dist.sample(&mut rng)] += 1;
    }
    hist.into_iter()
        .enumerate()
        .filter(|&(_, k)| k > 0)
        .map(|(i, k)| (bitstring(i, s.n), k))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{FRAC_1_SQRT_2, PI};

    type U = UnitaryMatrix<f64>;

    fn real_matrix(n: usize, rows: &[&[f64]]) -> U {
        let data = rows
            .iter()
            .flat_map(|r| r.iter().map(|&x| Complex::new(x, 0.0)))
            .collect();
        U::from_entries(n, data).unwrap()
    }

    #[test]
    fn x_matrix() {
        let u = gate_unitary::<f64>(&Gate::x(0), 1).unwrap();
        assert_eq!(u, real_matrix(1, &[&[0.0, 1.0], &[1.0, 0.0]]));
    }

    #[test]
    fn rz_zero_is_identity() {
        for n in 1..=4 {
            for q in 0..n {
                let u = gate_unitary::<f64>(&Gate::rz(0.0, q), n).unwrap();
                assert!(u.max_abs_diff(&U::identity(n)) < 1e-15);
            }
        }
    }

    #[test]
    fn cx_truth_table() {
        // control qubit 0, target qubit 1: |x1 x0>; index = 2*x1 + x0.
        // 00->00, 01->11, 10->10, 11->01  =>  index 1 <-> 3.
        let expect = real_matrix(
            2,
            &[
                &[1.0, 0.0, 0.0, 0.0],
                &[0.0, 0.0, 0.0, 1.0],
                &[0.0, 0.0, 1.0, 0.0],
                &[0.0, 1.0, 0.0, 0.0],
            ],
        );
        assert_eq!(gate_unitary::<f64>(&Gate::cx(0, 1), 2).unwrap(), expect);
    }

    #[test]
    fn sx_squares_to_x() {
        let sx = gate_unitary::<f64>(&Gate::sx(0), 1).unwrap();
        let x = gate_unitary::<f64>(&Gate::x(0), 1).unwrap();
        assert!(sx.matmul(&sx).max_abs_diff(&x) < 1e-15);
    }

    #[test]
    fn rx_is_exponential_of_x() {
        // exp(-i t X / 2) = cos(t/2) I - i sin(t/2) X
        let t = 0.73;
        let u = gate_unitary::<f64>(&Gate::rx(t, 0), 1).unwrap();
        let (s, c) = (t / 2.0).sin_cos();
        let expect = U::from_entries(
            1,
            vec![
                Complex::new(c, 0.0),
                Complex::new(0.0, -s),
                Complex::new(0.0, -s),
                Complex::new(c, 0.0),
            ],
        )
        .unwrap();
        assert!(u.max_abs_diff(&expect) < 1e-15);
    }

    #[test]
    fn unitary_rejects_measure() {
        let c = Circuit::from_gates(1, 1, [Gate::h(0), Gate::measure(0, 0)]).unwrap();
        assert_eq!(circuit_unitary::<f64>(&c), Err(SimError::ContainsMeasure));
        assert_eq!(
            gate_unitary::<f64>(&Gate::barrier(vec![0]), 1),
            Err(SimError::NotUnitary("barrier"))
        );
    }

    #[test]
    fn empty_and_involution() {
        let empty = Circuit::new(3, 0);
        assert_eq!(circuit_unitary::<f64>(&empty).unwrap(), U::identity(3));
        let hh = Circuit::from_gates(1, 0, [Gate::h(0), Gate::h(0)]).unwrap();
        assert!(circuit_unitary::<f64>(&hh).unwrap().max_abs_diff(&U::identity(1)) < 1e-12);
    }

    #[test]
    fn h_on_zero() {
        let c = Circuit::from_gates(1, 0, [Gate::h(0)]).unwrap();
        let s = evolve(&c, &StateVector::<f64>::zero(1)).unwrap();
        for a in s.amplitudes() {
            assert!((a - Complex::new(FRAC_1_SQRT_2, 0.0)).norm() < 1e-15);
        }
    }

    #[test]
    fn x_on_zero_sets_index_one() {
        let c = Circuit::from_gates(3, 0, [Gate::x(0)]).unwrap();
        let s = evolve(&c, &StateVector::<f64>::zero(3)).unwrap();
        assert_eq!(s.amplitudes()[1], Complex::new(1.0, 0.0));
    }

    #[test]
    fn evolve_dimension_mismatch() {
        let c = Circuit::new(2, 0);
        assert_eq!(
            evolve(&c, &StateVector::<f64>::zero(3)),
            Err(SimError::DimensionMismatch {
                circuit: 2,
                state: 3
            })
        );
    }

    #[test]
    fn phase_distance_ignores_global_phase() {
        let u = gate_unitary::<f64>(&Gate::h(1), 2).unwrap();
        let phase = Complex::from_polar(1.0, 0.4);
        let v = U::from_entries(2, u.entries().iter().map(|z| z * phase).collect()).unwrap();
        assert!(u.equal_up_to_phase(&v, 1e-12));
        assert!(u.max_abs_diff(&v) > 0.1);
        let w = gate_unitary::<f64>(&Gate::x(1), 2).unwrap();
        assert!(!u.equal_up_to_phase(&w, 1e-3));
    }

    #[test]
    fn qubit_permutation_matches_swap() {
        let p = qubit_permutation::<f64>(&[1, 0]);
        assert_eq!(p, gate_unitary::<f64>(&Gate::swap(0, 1), 2).unwrap());
    }

    #[test]
    fn f32_simulation_matches_f64() {
        let c = Circuit::from_gates(
            2,
            0,
            [Gate::h(0), Gate::cx(0, 1), Gate::rz(PI / 3.0, 1), Gate::sx(0)],
        )
        .unwrap();
        let a = evolve(&c, &StateVector::<f32>::zero(2)).unwrap();
        let b = evolve(&c, &StateVector::<f64>::zero(2)).unwrap();
        for (x, y) in a.amplitudes().iter().zip(b.amplitudes()) {
            assert!((x.re as f64 - y.re).abs() < 1e-6 && (x.im as f64 - y.im).abs() < 1e-6);
        }
    }

    #[test]
    fn sampling_basis_state() {
        let counts = sample_counts(&StateVector::<f64>::zero(1), 100, 7);
        assert_eq!(counts.len(), 1);
        assert_eq!(counts["0"], 100);
        let counts = sample_counts(&StateVector::<f64>::basis(3, 1), 10, 7);
        assert_eq!(counts["001"], 10);
    }

    #[test]
    fn sampling_uniform_within_five_sigma() {
        let shots = 100_000usize;
        let sigma = (shots as f64 * 0.25).sqrt();
        for seed in [0u64, 1, 2, 99] {
            let counts = sample_counts(&StateVector::<f64>::plus(1), shots, seed);
            assert_eq!(counts.values().sum::<usize>(), shots);
            for key in ["0", "1"] {
                assert!((counts[key] as f64 - 50_000.0).abs() < 5.0 * sigma);
            }
            assert_eq!(counts, sample_counts(&StateVector::<f64>::plus(1), shots, seed));
        }
    }

    #[test]
    fn from_amplitudes_validates() {
        assert!(matches!(
            StateVector::<f64>::from_amplitudes(vec![Complex::new(1.0, 0.0); 3]),
            Err(SimError::BadLength(3))
        ));
        assert!(matches!(
            StateVector::<f64>::from_amplitudes(vec![Complex::new(1.0, 0.0); 2]),
            Err(SimError::NotNormalised(_))
        ));
    }
}
