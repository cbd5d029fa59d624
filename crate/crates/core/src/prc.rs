//! Polynomial Representative Circuit: a gate list on `anc1, main, anc2` whose
//! action, post-selected on both ancillas reading 0, is proportional to the
//! modified companion matrix.

use nalgebra::DVector;
use num_complex::Complex64;
use thiserror::Error;

use crate::poly::{ComplexMatrix, PolyError, ScaledSystem};
use crate::qsim::{gates, Control, GateOp, Layout, Polarity, SimError, StateVector};

/// Element-wise tolerance for `A_eff = g M`.
pub const STRUCTURE_TOL: f64 = 1e-9;
/// Post-selection probabilities below this are treated as total loss.
pub const ZERO_SUCCESS: f64 = 1e-300;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PrcError {
    #[error("rotation coefficient {0} outside [-1, 1]")]
    CoefficientOutOfRange(f64),
    #[error("scaling gate needs |1/(sqrt(2^m) mu)| <= 1, got m = {m}, mu = {mu}")]
    ScaleOutOfRange { m: usize, mu: f64 },
    #[error("post-selected operator is not a positive multiple of the companion matrix (deviation {deviation:e})")]
    StructureMismatch { deviation: f64 },
    #[error("post-selection success probability {0:e} is zero")]
    ZeroSuccess(f64),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Poly(#[from] PolyError),
}

#[derive(Debug, Clone)]
pub struct PrcCircuit {
    pub gates: Vec<GateOp>,
    pub m: usize,
    pub mu: f64,
    /// Per-application post-selected scale, set by [`PrcCircuit::calibrate`].
    pub g: Option<f64>,
}

impl PrcCircuit {
    pub fn layout(&self) -> Layout {
        Layout::new(self.m)
    }

    /// Every gate additionally controlled on `qubit` being 1.
    pub fn controlled_on(&self, qubit: usize) -> Result<Vec<GateOp>, PrcError> {
        self.gates
            .iter()
            .map(|g| g.clone().controlled_by(qubit).map_err(PrcError::from))
            .collect()
    }

    /// Measures the effective operator and stores its scale.
    pub fn calibrate(&mut self, sys: &ScaledSystem) -> Result<EffectiveOperator, PrcError> {
        let eff = effective_operator(self, sys)?;
        self.g = Some(eff.g);
        Ok(eff)
    }
}

#[derive(Debug, Clone)]
pub struct EffectiveOperator {
    pub matrix: ComplexMatrix,
    pub g: f64,
    pub reference: ComplexMatrix,
    pub max_deviation: f64,
}

fn control(qubit: usize, polarity: Polarity) -> Control {
    Control { qubit, polarity }
}

/// Controls selecting main-register value `j` exactly.
fn main_equals(layout: Layout, j: usize) -> Vec<Control> {
    (0..layout.m)
        .map(|bit| {
            let polarity = if (j >> bit) & 1 == 1 { Polarity::Positive } else { Polarity::Negative };
            control(layout.main(bit), polarity)
        })
        .collect()
}

/// `|j> -> |j-1 mod n>` on the main register: X on `main_0`, then for
/// `k = 1..m-1` X on `main_k` controlled by all lower main qubits.
pub fn build_cyclic_swap(m: usize) -> Result<Vec<GateOp>, PrcError> {
    let layout = Layout::new(m);
    let mut out = vec![GateOp::single(gates::x(), layout.main(0))?];
    for k in 1..m {
        let controls = (0..k).map(|b| control(layout.main(b), Polarity::Positive)).collect();
        out.push(GateOp::new(gates::x(), vec![layout.main(k)], controls)?);
    }
    Ok(out)
}

/// `[[a, sqrt(1-a^2)], [-sqrt(1-a^2), a]]`.
pub fn rotation_gate(a: f64) -> Result<ComplexMatrix, PrcError> {
    if !(a.abs() <= 1.0 + 1e-12) {
        return Err(PrcError::CoefficientOutOfRange(a));
    }
    let a = a.clamp(-1.0, 1.0);
    let s = (1.0 - a * a).sqrt();
    Ok(gates::real(a, s, -s, a))
}

/// Block-diagonal `diag(R_1, .., R_{n-1}, R_0)` on `main (x) anc2`: the
/// rotation on anc2 for main value `j` uses `a'_{(j+1) mod n}`.
pub fn build_formation(sys: &ScaledSystem) -> Result<Vec<GateOp>, PrcError> {
    let layout = Layout::new(sys.m);
    let n = sys.n();
    (0..n)
        .map(|j| {
            let r = rotation_gate(sys.a_prime[(j + 1) % n])?;
            Ok(GateOp::new(r, vec![layout.anc2()], main_equals(layout, j))?)
        })
        .collect()
}

/// `(XH)^{(x) m}` on the main register: H then X on every main qubit.
pub fn build_combination(m: usize) -> Result<Vec<GateOp>, PrcError> {
    let layout = Layout::new(m);
    let mut out = Vec::with_capacity(2 * m);
    for bit in (0..m).rev() {
        out.push(GateOp::single(gates::h(), layout.main(bit))?);
        out.push(GateOp::single(gates::x(), layout.main(bit))?);
    }
    Ok(out)
}

/// `(1/(sqrt(2^m) mu)) [[1, t], [-t, 1]]`, `t = sqrt(2^m mu^2 - 1)`.
pub fn scaling_gate(m: usize, mu: f64) -> Result<ComplexMatrix, PrcError> {
    let dim = (1u64 << m) as f64;
    let top = 1.0 / (dim.sqrt() * mu);
    if !(top.abs() <= 1.0) {
        return Err(PrcError::ScaleOutOfRange { m, mu });
    }
    let t = (dim * mu * mu - 1.0).max(0.0).sqrt();
    Ok(gates::real(top, top * t, -top * t, top))
}

pub fn build_prc(sys: &ScaledSystem) -> Result<PrcCircuit, PrcError> {
    let layout = Layout::new(sys.m);
    let anc1 = layout.anc1();
    let mut gates_out = Vec::new();

    gates_out.push(GateOp::single(gates::h(), anc1)?);
    gates_out.extend(build_cyclic_swap(sys.m)?);
    gates_out.push(GateOp::single(scaling_gate(sys.m, sys.mu)?, layout.anc2())?.anti_controlled_by(anc1)?);
    for g in build_formation(sys)?.into_iter().chain(build_combination(sys.m)?) {
        gates_out.push(g.controlled_by(anc1)?);
    }
    // minus sign on the |1> branch
    gates_out.push(GateOp::single(gates::z(), anc1)?);
    // exchange the branches on (main = n-1, anc2 = 0)
    let mut swap_controls = main_equals(layout, sys.n() - 1);
    swap_controls.push(control(layout.anc2(), Polarity::Negative));
    gates_out.push(GateOp::new(gates::x(), vec![anc1], swap_controls)?);

    Ok(PrcCircuit { gates: gates_out, m: sys.m, mu: sys.mu, g: None })
}

/// Runs the circuit on `main_state`, post-selects `anc1 = anc2 = 0` and
/// returns the (unnormalized) main-register amplitudes.
pub fn post_selected_image(circ: &PrcCircuit, main_state: &[Complex64]) -> Result<Vec<Complex64>, PrcError> {
    let layout = circ.layout();
    let mut state = StateVector::prepare(circ.m, main_state)?;
    state.apply_all(&circ.gates)?;
    let amps = state.amplitudes();
    Ok((0..1usize << circ.m).map(|j| amps[layout.index(0, 0, j, 0)]).collect())
}

/// Extracts the post-selected operator column by column and fits the single
/// positive scale `g` against the modified companion matrix.
pub fn effective_operator(circ: &PrcCircuit, sys: &ScaledSystem) -> Result<EffectiveOperator, PrcError> {
    let n = sys.n();
    let mut matrix = ComplexMatrix::zeros(n, n);
    for j in 0..n {
        let mut e = vec![Complex64::new(0.0, 0.0); n];
        e[j] = Complex64::new(1.0, 0.0);
        for (i, a) in post_selected_image(circ, &e)?.into_iter().enumerate() {
            matrix[(i, j)] = a;
        }
    }
    let reference = sys.modified_companion();
    let g = reference.dotc(&matrix).re / reference.norm_squared();
    let max_deviation = (&matrix - reference.map(|z| z * g))
        .iter()
        .fold(0.0f64, |acc, z| acc.max(z.norm()));
    if !(g > 0.0) || max_deviation > STRUCTURE_TOL {
        return Err(PrcError::StructureMismatch { deviation: max_deviation });
    }
    Ok(EffectiveOperator { matrix, g, reference, max_deviation })
}

/// One post-selected application: normalized image and its success probability.
pub fn apply_prc(sys: &ScaledSystem, main_state: &[Complex64]) -> Result<(Vec<Complex64>, f64), PrcError> {
    let circ = build_prc(sys)?;
    let layout = circ.layout();
    let mut state = StateVector::prepare(sys.m, main_state)?;
    state.apply_all(&circ.gates)?;
    let post = state.post_select(&[(layout.anc1(), 0), (layout.anc2(), 0)])?;
    if post.probability < ZERO_SUCCESS {
        return Err(PrcError::ZeroSuccess(post.probability));
    }
    let amps = post.state.amplitudes();
    let norm = post.probability.sqrt();
    let beta = (0..sys.n()).map(|j| amps[layout.index(0, 0, j, 0)] / norm).collect();
    Ok((beta, post.probability))
}

/// `M v` for the modified companion matrix, used for column checks.
pub fn companion_image(sys: &ScaledSystem, v: &[Complex64]) -> Vec<Complex64> {
    let out = sys.modified_companion() * DVector::from_column_slice(v);
    out.iter().copied().collect()
}
