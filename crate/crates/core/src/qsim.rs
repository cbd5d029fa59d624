//! Dense statevector simulator with positive/negative controls, exact
//! probabilities, post-selection and seeded sampling.
//!
//! Qubit `q` is bit `q` of the amplitude index. For the root-finding
//! register the layout (most significant first) is
//! `phase, anc1, main_{m-1} .. main_0, anc2`; see [`Layout`].

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::poly::ComplexMatrix;

const UNITARY_TOL: f64 = 1e-12;
const NORM_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error("qubit {qubit} out of range for a {num_qubits}-qubit register")]
    IndexOutOfRange { qubit: usize, num_qubits: usize },
    #[error("matrix deviates from unitarity by {0:e}")]
    NonUnitary(f64),
    #[error("a {rows}x{rows} matrix cannot act on {targets} target qubit(s)")]
    DimensionMismatch { rows: usize, targets: usize },
    #[error("qubit {0} appears more than once among targets and controls")]
    Overlap(usize),
    #[error("state has squared norm {0}, expected 1")]
    NotNormalized(f64),
}

/// Qubit positions of the `phase, anc1, main, anc2` register.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Layout {
    pub m: usize,
}

impl Layout {
    pub fn new(m: usize) -> Self {
        Self { m }
    }

    pub fn anc2(&self) -> usize {
        0
    }

    /// Main qubit `j` (bit `j` of the main-register value).
    pub fn main(&self, j: usize) -> usize {
        1 + j
    }

    pub fn anc1(&self) -> usize {
        self.m + 1
    }

    pub fn phase(&self) -> usize {
        self.m + 2
    }

    pub fn num_qubits(&self) -> usize {
        self.m + 3
    }

    pub fn index(&self, phase: usize, anc1: usize, main: usize, anc2: usize) -> usize {
        (phase << (self.m + 2)) | (anc1 << (self.m + 1)) | (main << 1) | anc2
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Polarity {
    /// Fires when the control qubit is 1.
    Positive,
    /// Fires when the control qubit is 0.
    Negative,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Control {
    pub qubit: usize,
    pub polarity: Polarity,
}

/// A (multi-)controlled unitary. `targets[0]` is the most significant bit
/// of the unitary's local index.
#[derive(Debug, Clone, PartialEq)]
pub struct GateOp {
    unitary: ComplexMatrix,
    targets: Vec<usize>,
    controls: Vec<Control>,
}

impl GateOp {
    pub fn new(unitary: ComplexMatrix, targets: Vec<usize>, controls: Vec<Control>) -> Result<Self, SimError> {
        let rows = unitary.nrows();
        if unitary.ncols() != rows || targets.is_empty() || rows != 1 << targets.len() {
            return Err(SimError::DimensionMismatch { rows, targets: targets.len() });
        }
        let deviation = unitarity_deviation(&unitary);
        if deviation > UNITARY_TOL {
            return Err(SimError::NonUnitary(deviation));
        }
        let mut seen: Vec<usize> = targets.clone();
        seen.extend(controls.iter().map(|c| c.qubit));
        seen.sort_unstable();
        if let Some(w) = seen.windows(2).find(|w| w[0] == w[1]) {
            return Err(SimError::Overlap(w[0]));
        }
        Ok(Self { unitary, targets, controls })
    }

    /// Uncontrolled single-qubit gate.
    pub fn single(unitary: ComplexMatrix, target: usize) -> Result<Self, SimError> {
        Self::new(unitary, vec![target], Vec::new())
    }

    /// Adds a control that fires on |1>.
    pub fn controlled_by(self, qubit: usize) -> Result<Self, SimError> {
        self.with_control(Control { qubit, polarity: Polarity::Positive })
    }

    /// Adds a control that fires on |0>.
    pub fn anti_controlled_by(self, qubit: usize) -> Result<Self, SimError> {
        self.with_control(Control { qubit, polarity: Polarity::Negative })
    }

    pub fn with_control(self, control: Control) -> Result<Self, SimError> {
        let mut controls = self.controls;
        controls.push(control);
        Self::new(self.unitary, self.targets, controls)
    }

    pub fn unitary(&self) -> &ComplexMatrix {
        &self.unitary
    }

    pub fn targets(&self) -> &[usize] {
        &self.targets
    }

    pub fn controls(&self) -> &[Control] {
        &self.controls
    }

    fn max_qubit(&self) -> usize {
        self.targets
            .iter()
            .copied()
            .chain(self.controls.iter().map(|c| c.qubit))
            .max()
            .unwrap_or(0)
    }
}

/// Largest element of `|U^dagger U - I|`.
pub fn unitarity_deviation(u: &ComplexMatrix) -> f64 {
    let prod = u.adjoint() * u;
    let mut worst: f64 = 0.0;
    for i in 0..prod.nrows() {
        for j in 0..prod.ncols() {
            let expect = if i == j { 1.0 } else { 0.0 };
            worst = worst.max((prod[(i, j)] - expect).norm());
        }
    }
    worst
}

/// Standard gate matrices.
pub mod gates {
    use super::*;

    fn real2(a: f64, b: f64, c: f64, d: f64) -> ComplexMatrix {
        ComplexMatrix::from_row_slice(
            2,
            2,
            &[a, b, c, d].map(|v| Complex64::new(v, 0.0)),
        )
    }

    pub fn h() -> ComplexMatrix {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        real2(s, s, s, -s)
    }

    pub fn x() -> ComplexMatrix {
        real2(0.0, 1.0, 1.0, 0.0)
    }

    pub fn z() -> ComplexMatrix {
        real2(1.0, 0.0, 0.0, -1.0)
    }

    /// `diag(1, e^{-i theta})`, the feedback rotation of iterative phase estimation.
    pub fn z_theta(theta: f64) -> ComplexMatrix {
        let mut m = real2(1.0, 0.0, 0.0, 0.0);
        m[(1, 1)] = Complex64::from_polar(1.0, -theta);
        m
    }

    /// Real 2x2 matrix `[[a, b], [c, d]]`.
    pub fn real(a: f64, b: f64, c: f64, d: f64) -> ComplexMatrix {
        real2(a, b, c, d)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    amps: Vec<Complex64>,
    num_qubits: usize,
}

impl StateVector {
    /// `|0...0>` on `num_qubits` qubits.
    pub fn zero(num_qubits: usize) -> Self {
        let mut amps = vec![Complex64::new(0.0, 0.0); 1 << num_qubits];
        amps[0] = Complex64::new(1.0, 0.0);
        Self { amps, num_qubits }
    }

    pub fn from_amplitudes(amps: Vec<Complex64>) -> Result<Self, SimError> {
        let len = amps.len();
        if !len.is_power_of_two() {
            return Err(SimError::DimensionMismatch { rows: len, targets: 0 });
        }
        Ok(Self { num_qubits: len.trailing_zeros() as usize, amps })
    }

    /// Main register in `main_state`, phase and both ancillas in |0>.
    pub fn prepare(m: usize, main_state: &[Complex64]) -> Result<Self, SimError> {
        let n = 1usize << m;
        if main_state.len() != n {
            return Err(SimError::DimensionMismatch { rows: main_state.len(), targets: m });
        }
        let norm: f64 = main_state.iter().map(|a| a.norm_sqr()).sum();
        if (norm - 1.0).abs() > NORM_TOL {
            return Err(SimError::NotNormalized(norm));
        }
        let layout = Layout::new(m);
        let mut state = Self {
            amps: vec![Complex64::new(0.0, 0.0); 1 << layout.num_qubits()],
            num_qubits: layout.num_qubits(),
        };
        for (j, &a) in main_state.iter().enumerate() {
            state.amps[layout.index(0, 0, j, 0)] = a;
        }
        Ok(state)
    }

    pub fn num_qubits(&self) -> usize {
        self.num_qubits
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amps
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum()
    }

    fn check_qubit(&self, qubit: usize) -> Result<(), SimError> {
        if qubit >= self.num_qubits {
            Err(SimError::IndexOutOfRange { qubit, num_qubits: self.num_qubits })
        } else {
            Ok(())
        }
    }

    /// Applies `gate` in place.
    pub fn apply(&mut self, gate: &GateOp) -> Result<(), SimError> {
        self.check_qubit(gate.max_qubit())?;
        let k = gate.targets.len();
        let local_dim = 1usize << k;
        // offsets[l]: global index bits for local index l
        let offsets: Vec<usize> = (0..local_dim)
            .map(|l| {
                gate.targets
                    .iter()
                    .enumerate()
                    .filter(|(i, _)| (l >> (k - 1 - i)) & 1 == 1)
                    .fold(0, |acc, (_, &t)| acc | (1 << t))
            })
            .collect();
        let target_mask = offsets[local_dim - 1];
        let (mut ctrl_mask, mut ctrl_value) = (0usize, 0usize);
        for c in &gate.controls {
            ctrl_mask |= 1 << c.qubit;
            if c.polarity == Polarity::Positive {
                ctrl_value |= 1 << c.qubit;
            }
        }

        let mut buf = vec![Complex64::new(0.0, 0.0); local_dim];
        for base in 0..self.amps.len() {
            if base & target_mask != 0 || base & ctrl_mask != ctrl_value {
                continue;
            }
            for (l, off) in offsets.iter().enumerate() {
                buf[l] = self.amps[base | off];
            }
            for (row, off) in offsets.iter().enumerate() {
                let mut acc = Complex64::new(0.0, 0.0);
                for (col, b) in buf.iter().enumerate() {
                    acc += gate.unitary[(row, col)] * b;
                }
                self.amps[base | off] = acc;
            }
        }
        Ok(())
    }

    pub fn apply_all<'a>(&mut self, gates: impl IntoIterator<Item = &'a GateOp>) -> Result<(), SimError> {
        for g in gates {
            self.apply(g)?;
        }
        Ok(())
    }

    /// Zeroes amplitudes inconsistent with `assignments`. The result is not renormalized.
    pub fn post_select(mut self, assignments: &[(usize, u8)]) -> Result<PostSelection, SimError> {
        let (mask, value) = self.mask_value(assignments)?;
        for (i, a) in self.amps.iter_mut().enumerate() {
            if i & mask != value {
                *a = Complex64::new(0.0, 0.0);
            }
        }
        let probability = self.norm_sqr();
        Ok(PostSelection { state: self, probability })
    }

    /// Joint probabilities of `qubit = 0` and `qubit = 1` together with `conditions`.
    pub fn marginal_probs(&self, qubit: usize, conditions: &[(usize, u8)]) -> Result<(f64, f64), SimError> {
        self.check_qubit(qubit)?;
        let (mask, value) = self.mask_value(conditions)?;
        let (mut p0, mut p1) = (0.0, 0.0);
        for (i, a) in self.amps.iter().enumerate() {
            if i & mask != value {
                continue;
            }
            if (i >> qubit) & 1 == 0 {
                p0 += a.norm_sqr();
            } else {
                p1 += a.norm_sqr();
            }
        }
        Ok((p0, p1))
    }

    /// Exact joint distribution over `qubits` (`qubits[0]` most significant).
    pub fn distribution(&self, qubits: &[usize]) -> Result<Vec<f64>, SimError> {
        for &q in qubits {
            self.check_qubit(q)?;
        }
        let k = qubits.len();
        let mut dist = vec![0.0; 1 << k];
        for (i, a) in self.amps.iter().enumerate() {
            let outcome = qubits
                .iter()
                .enumerate()
                .fold(0, |acc, (pos, &q)| acc | (((i >> q) & 1) << (k - 1 - pos)));
            dist[outcome] += a.norm_sqr();
        }
        Ok(dist)
    }

    /// Seeded measurement shots over `qubits`. Mass missing from a
    /// sub-normalized state is reported as rejected (failed post-selection).
    pub fn sample(&self, qubits: &[usize], shots: u64, seed: u64) -> Result<SampleCounts, SimError> {
        let dist = self.distribution(qubits)?;
        Ok(sample_distribution(&dist, shots, seed))
    }

    fn mask_value(&self, assignments: &[(usize, u8)]) -> Result<(usize, usize), SimError> {
        let (mut mask, mut value) = (0usize, 0usize);
        for &(q, bit) in assignments {
            self.check_qubit(q)?;
            mask |= 1 << q;
            if bit != 0 {
                value |= 1 << q;
            }
        }
        Ok((mask, value))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PostSelection {
    /// Projected, sub-normalized state.
    pub state: StateVector,
    /// Squared norm that survived the projection.
    pub probability: f64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SampleCounts {
    /// Counts indexed by outcome.
    pub counts: Vec<u64>,
    /// Shots that landed outside the supplied distribution's mass.
    pub rejected: u64,
}

/// Draws `shots` categorical samples from `dist`; any mass short of 1 is
/// the rejection outcome.
pub fn sample_distribution(dist: &[f64], shots: u64, seed: u64) -> SampleCounts {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut cumulative = Vec::with_capacity(dist.len());
    let mut acc = 0.0;
    for &p in dist {
        acc += p.max(0.0);
        cumulative.push(acc);
    }
    let mut counts = vec![0u64; dist.len()];
    let mut rejected = 0;
    for _ in 0..shots {
        let u: f64 = rng.random();
        match cumulative.iter().position(|&c| u < c) {
            Some(i) => counts[i] += 1,
            None => rejected += 1,
        }
    }
    SampleCounts { counts, rejected }
}

/// Dense matrix of a gate sequence on `num_qubits` qubits, built column by
/// column from basis states.
pub fn circuit_matrix(gates: &[GateOp], num_qubits: usize) -> Result<ComplexMatrix, SimError> {
    let dim = 1usize << num_qubits;
    let mut out = ComplexMatrix::zeros(dim, dim);
    for col in 0..dim {
        let mut amps = vec![Complex64::new(0.0, 0.0); dim];
        amps[col] = Complex64::new(1.0, 0.0);
        let mut s = StateVector { amps, num_qubits };
        s.apply_all(gates)?;
        for (row, a) in s.amps.iter().enumerate() {
            out[(row, col)] = *a;
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::FRAC_1_SQRT_2;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    #[test]
    fn prepare_places_main_register() {
        let s = StateVector::prepare(1, &[c(1.0), c(0.0)]).unwrap();
        assert_eq!(s.num_qubits(), 4);
        assert_eq!(s.amplitudes()[0], c(1.0));
        assert!((s.norm_sqr() - 1.0).abs() < 1e-15);

        let s = StateVector::prepare(1, &[c(FRAC_1_SQRT_2), c(FRAC_1_SQRT_2)]).unwrap();
        let l = Layout::new(1);
        assert_eq!(s.amplitudes()[l.index(0, 0, 1, 0)], c(FRAC_1_SQRT_2));
        assert_eq!(s.amplitudes().iter().filter(|a| a.norm() > 0.0).count(), 2);

        let s = StateVector::prepare(2, &[c(0.0), c(0.0), c(0.0), c(1.0)]).unwrap();
        assert_eq!(s.amplitudes()[Layout::new(2).index(0, 0, 3, 0)], c(1.0));

        assert!(matches!(
            StateVector::prepare(1, &[c(1.0), c(1.0)]),
            Err(SimError::NotNormalized(_))
        ));
    }

    #[test]
    fn hadamard_on_zero() {
        let mut s = StateVector::zero(1);
        s.apply(&GateOp::single(gates::h(), 0).unwrap()).unwrap();
        assert!((s.amplitudes()[0] - c(FRAC_1_SQRT_2)).norm() < 1e-15);
        assert!((s.amplitudes()[1] - c(FRAC_1_SQRT_2)).norm() < 1e-15);
    }

    #[test]
    fn unsatisfied_control_is_identity() {
        let mut s = StateVector::zero(2);
        let before = s.clone();
        s.apply(&GateOp::single(gates::x(), 0).unwrap().controlled_by(1).unwrap()).unwrap();
        assert_eq!(s, before);
    }

    #[test]
    fn toffoli_flips_target() {
        let mut amps = vec![c(0.0); 8];
        amps[0b110] = c(1.0);
        let mut s = StateVector::from_amplitudes(amps).unwrap();
        let toffoli = GateOp::single(gates::x(), 0)
            .and_then(|g| g.controlled_by(1))
            .and_then(|g| g.controlled_by(2))
            .unwrap();
        s.apply(&toffoli).unwrap();
        assert_eq!(s.amplitudes()[0b111], c(1.0));
    }

    #[test]
    fn negative_control_fires_on_zero() {
        let mut s = StateVector::zero(2);
        s.apply(&GateOp::single(gates::x(), 0).unwrap().anti_controlled_by(1).unwrap()).unwrap();
        assert_eq!(s.amplitudes()[1], c(1.0));
    }

    #[test]
    fn gate_validation() {
        assert!(matches!(
            GateOp::single(gates::real(1.0, 1.0, 0.0, 1.0), 0),
            Err(SimError::NonUnitary(_))
        ));
        assert!(matches!(
            GateOp::single(gates::x(), 0).unwrap().controlled_by(0),
            Err(SimError::Overlap(0))
        ));
        assert!(matches!(
            GateOp::new(gates::x(), vec![0, 1], vec![]),
            Err(SimError::DimensionMismatch { .. })
        ));
        let mut s = StateVector::zero(2);
        assert!(matches!(
            s.apply(&GateOp::single(gates::x(), 5).unwrap()),
            Err(SimError::IndexOutOfRange { qubit: 5, .. })
        ));
    }

    #[test]
    fn two_qubit_target_order() {
        // CNOT as a 2-qubit unitary with targets [control, target]
        let cnot = ComplexMatrix::from_row_slice(
            4,
            4,
            &[1., 0., 0., 0., 0., 1., 0., 0., 0., 0., 0., 1., 0., 0., 1., 0.].map(c),
        );
        let mut amps = vec![c(0.0); 4];
        amps[0b10] = c(1.0); // qubit 1 set
        let mut s = StateVector::from_amplitudes(amps).unwrap();
        s.apply(&GateOp::new(cnot, vec![1, 0], vec![]).unwrap()).unwrap();
        assert_eq!(s.amplitudes()[0b11], c(1.0));
    }

    #[test]
    fn post_selection_examples() {
        let uniform = StateVector::from_amplitudes(vec![c(0.5); 4]).unwrap();
        assert!((uniform.post_select(&[(0, 0)]).unwrap().probability - 0.5).abs() < 1e-15);

        let basis01 = StateVector::from_amplitudes(vec![c(0.0), c(1.0), c(0.0), c(0.0)]).unwrap();
        assert_eq!(basis01.clone().post_select(&[(0, 1)]).unwrap().probability, 1.0);
        assert_eq!(basis01.post_select(&[(0, 0)]).unwrap().probability, 0.0);
    }

    #[test]
    fn marginal_examples() {
        let bell = StateVector::from_amplitudes(vec![c(FRAC_1_SQRT_2), c(0.0), c(0.0), c(FRAC_1_SQRT_2)]).unwrap();
        let (p0, p1) = bell.marginal_probs(1, &[]).unwrap();
        assert!((p0 - 0.5).abs() < 1e-15 && (p1 - 0.5).abs() < 1e-15);

        let l = Layout::new(1);
        let s = StateVector::prepare(1, &[c(1.0), c(0.0)]).unwrap();
        let (p0, p1) = s.marginal_probs(l.phase(), &[(l.anc1(), 0), (l.anc2(), 0)]).unwrap();
        assert_eq!((p0, p1), (1.0, 0.0));

        let mut s = StateVector::zero(3);
        s.apply(&GateOp::single(gates::h(), 0).unwrap()).unwrap();
        s.apply(&GateOp::single(gates::h(), 2).unwrap()).unwrap();
        let post = s.post_select(&[(0, 1)]).unwrap();
        let (p0, p1) = post.state.marginal_probs(2, &[]).unwrap();
        assert!((p0 + p1 - post.probability).abs() < 1e-15);
    }

    #[test]
    fn sampling_examples() {
        let basis = StateVector::zero(1);
        assert_eq!(basis.sample(&[0], 1000, 7).unwrap().counts, vec![1000, 0]);

        let mut plus = StateVector::zero(1);
        plus.apply(&GateOp::single(gates::h(), 0).unwrap()).unwrap();
        let shots = 100_000u64;
        let counts = plus.sample(&[0], shots, 42).unwrap();
        let sigma = (shots as f64 * 0.25).sqrt();
        for &k in &counts.counts {
            assert!((k as f64 - 50_000.0).abs() < 5.0 * sigma);
        }
        assert_eq!(counts, plus.sample(&[0], shots, 42).unwrap());
    }

    #[test]
    fn sampling_reports_rejected_mass() {
        let counts = sample_distribution(&[0.0, 0.25], 10_000, 3);
        assert_eq!(counts.counts[0], 0);
        assert_eq!(counts.counts[1] + counts.rejected, 10_000);
        assert!(counts.rejected > 7000);
    }

    #[test]
    fn distribution_bit_order() {
        let mut amps = vec![c(0.0); 8];
        amps[0b001] = c(1.0);
        let s = StateVector::from_amplitudes(amps).unwrap();
        // qubits [0, 2]: qubit 0 is the most significant outcome bit
        assert_eq!(s.distribution(&[0, 2]).unwrap(), vec![0.0, 0.0, 1.0, 0.0]);
    }
}
