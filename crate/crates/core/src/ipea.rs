//! Iterative phase estimation over the controlled PRC.
//!
//! One chain step applies the circuit when the phase qubit is 1 and an
//! attenuation rotation `|0> -> c|0> + sqrt(1-c^2)|1>` on anc2 when it is 0,
//! then post-selects both ancillas on 0. With `c = g` the two arms share the
//! factor `c^L`, so for an eigenstate with eigenvalue `lambda` of the modified
//! companion matrix
//!
//! ```text
//! P0 = (c^{2L}/4) |1 + lambda^L e^{-i theta}|^2
//! P1 = (c^{2L}/4) |1 - lambda^L e^{-i theta}|^2
//! ```
//!
//! Chain probabilities are carried in a scaled form (divided by `c^{2L}` and
//! by a shared `e^{log_scale}`) so long chains neither underflow nor overflow.

use std::f64::consts::PI;

use nalgebra::DVector;
use num_complex::Complex64;
use thiserror::Error;

use crate::oracle::{self, OracleError};
use crate::poly::{ComplexMatrix, Mode, PolyError, Polynomial, ScaledSystem};
use crate::prc::{build_prc, EffectiveOperator, PrcCircuit, PrcError};
use crate::qsim::{gates, sample_distribution, GateOp, Layout, SimError, StateVector};

/// Relative size of `|P0 - P1|` below which the two outcomes count as tied.
pub const TIE_TOL: f64 = 1e-12;
/// Absolute floor on `P0 + P1` for bit extraction.
pub const SIGNAL_FLOOR: f64 = 1e-300;
/// Slack allowed on the negative side of a square root before it is an error.
pub const UNDER_ROOT_TOL: f64 = 1e-9;
/// Largest bit precision accepted in exact mode.
pub const MAX_EXACT_BITS: u32 = 12;
/// Largest bit precision accepted in shots mode.
pub const MAX_SHOT_BITS: u32 = 3;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum IpeaError {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("no signal: P0 + P1 = {0:e}")]
    NoSignal(f64),
    #[error("magnitude estimate needs the square root of {0:e}")]
    NegativeUnderRoot(f64),
    #[error("no iteration separated P0 from P1; the dominant eigenvalue is not unique")]
    DominanceTooWeak,
    #[error("all probability mass lost to post-selection")]
    ZeroSuccess,
    #[error(transparent)]
    Prc(#[from] PrcError),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Poly(#[from] PolyError),
    #[error(transparent)]
    Oracle(#[from] OracleError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Measurement {
    /// Exact joint probabilities.
    Exact,
    /// `count` chain attempts per iteration; attempts failing post-selection are rejected.
    Shots { count: u64, seed: u64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InitStrategy {
    /// Eigenvector of the targeted root, built from the classical oracle's roots.
    Eigenstate,
    /// Equal mixture of computational basis states.
    MaximallyMixed,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ChainPath {
    /// Chains up to `max_l` run gate by gate; longer ones use the matrix power.
    Auto,
    FullCircuit,
    Fast,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub bits: u32,
    pub measurement: Measurement,
    pub init: InitStrategy,
    /// Forced basis; stages whose quotient cannot be scaled in it fall back to automatic selection.
    pub mode: Option<Mode>,
    pub path: ChainPath,
    /// Longest chain simulated gate by gate under [`ChainPath::Auto`].
    pub max_l: usize,
    /// Newton-polish each estimate on the current polynomial before deflating.
    pub polish: bool,
    /// Retry with an oracle-assisted eigenstate when mixed mode fails.
    pub eigenstate_fallback: bool,
    /// Residual tolerance; defaults to `1e-6 (1 + max|a_i|)` of the input.
    pub tolerance: Option<f64>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            bits: 6,
            measurement: Measurement::Exact,
            init: InitStrategy::MaximallyMixed,
            mode: None,
            path: ChainPath::Auto,
            max_l: 16,
            polish: true,
            eigenstate_fallback: true,
            tolerance: None,
        }
    }
}

impl RunConfig {
    pub fn with_bits(bits: u32) -> Self {
        Self { bits, ..Self::default() }
    }

    pub fn validate(&self) -> Result<(), IpeaError> {
        if self.bits == 0 {
            return Err(IpeaError::InvalidConfig("bits must be >= 1".into()));
        }
        match self.measurement {
            Measurement::Exact if self.bits > MAX_EXACT_BITS => Err(IpeaError::InvalidConfig(format!(
                "exact mode supports at most {MAX_EXACT_BITS} bits"
            ))),
            Measurement::Shots { count: 0, .. } => Err(IpeaError::InvalidConfig("shots must be >= 1".into())),
            Measurement::Shots { .. } if self.bits > MAX_SHOT_BITS => Err(IpeaError::InvalidConfig(format!(
                "shots mode supports at most {MAX_SHOT_BITS} bits"
            ))),
            _ => Ok(()),
        }
    }
}

/// Chain input on the main register.
#[derive(Debug, Clone, PartialEq)]
pub enum ChainInput {
    Eigenstate(Vec<Complex64>),
    MaximallyMixed,
}

/// Result of one controlled chain.
///
/// `sum`, `diff` and `image` are `P0 + P1`, `P0 - P1` and the squared norm of
/// the |1>-arm image, each divided by `c^{2L} e^{log_scale}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChainOutcome {
    pub p0: f64,
    pub p1: f64,
    pub sum: f64,
    pub diff: f64,
    pub image: f64,
    pub log_scale: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IterationStats {
    pub k: u32,
    pub l: usize,
    pub theta: f64,
    pub p0: f64,
    pub p1: f64,
    pub bit: u8,
    /// P0 and P1 tied; the bit defaulted to 0.
    pub degenerate: bool,
    /// Estimate of `|lambda|^L` (may be infinite for long chains); `None`
    /// when the iteration carries no magnitude information.
    pub r_power: Option<f64>,
    /// `r_power^(1/L)`, computed in log space.
    pub r: Option<f64>,
    /// `ln` of the normalizing constant predicted by the circuit, `4 (2^{m+1})^L`.
    pub ln_kappa_circuit: f64,
    /// `ln` of the constant the original derivation quotes, `8 (2^m mu^2)^L`.
    pub ln_kappa_quoted: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EstimateMethod {
    Eigenstate,
    Mixed,
    /// Mixed mode failed; the estimate came from an oracle-assisted eigenstate.
    EigenstateFallback,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RootEstimate {
    pub magnitude: f64,
    /// `x_1 .. x_b`, most significant first.
    pub bits: Vec<u8>,
    pub phase: f64,
    pub lambda: Complex64,
    pub root: Complex64,
    pub residual: f64,
    pub iterations: Vec<IterationStats>,
    pub conjugate_alternative: Option<Complex64>,
    pub method: EstimateMethod,
    /// Newton-polished root, when requested.
    pub refined: Option<Complex64>,
}

impl RootEstimate {
    /// The root the pipeline accepts: polished when available.
    pub fn accepted(&self) -> Complex64 {
        self.refined.unwrap_or(self.root)
    }

    pub fn degenerate_bits(&self) -> usize {
        self.iterations.iter().filter(|it| it.degenerate).count()
    }
}

/// `x_{b-k+1}` from the comparison of P0 and P1. Ties give 0 with the flag set.
pub fn extract_bit(p0: f64, p1: f64) -> Result<(u8, bool), IpeaError> {
    let total = p0 + p1;
    if !(total >= SIGNAL_FLOOR) {
        return Err(IpeaError::NoSignal(total));
    }
    Ok(bit_from_diff(p0 - p1, total))
}

fn bit_from_diff(diff: f64, total: f64) -> (u8, bool) {
    if diff.abs() <= TIE_TOL * total.abs() {
        (0, true)
    } else if diff > 0.0 {
        (0, false)
    } else {
        (1, false)
    }
}

/// Feedback angle for the next iteration from bits extracted so far (`x_b` first).
pub fn theta_feedback(bits_so_far: &[u8]) -> f64 {
    let k = bits_so_far.len() + 1;
    let frac = bits_so_far
        .iter()
        .enumerate()
        .fold(0.0, |acc, (i, &bit)| acc + bit as f64 * 2f64.powi(-((k - i) as i32)));
    2.0 * PI * frac
}

/// `|lambda|^L` from eigenstate statistics with `c^2 = 1/2^{m+1}`:
/// `r^{2L} = 2 (P0 + P1) (2^{m+1})^L - 1`.
pub fn estimate_magnitude(p0: f64, p1: f64, l: usize, m: usize) -> Result<f64, IpeaError> {
    let value = 2.0 * (p0 + p1) * 2f64.powi(((m + 1) * l) as i32) - 1.0;
    if value < -UNDER_ROOT_TOL {
        return Err(IpeaError::NegativeUnderRoot(value));
    }
    Ok(value.max(0.0).sqrt())
}

/// `|lambda_max|^L` from mixed-state statistics: `2 (P0 + P1 - c^{2L}/2) / |P0 - P1|`.
pub fn estimate_dominant_magnitude(p0: f64, p1: f64, l: usize, m: usize) -> Result<f64, IpeaError> {
    let c2l = 2f64.powi(-(((m + 1) * l) as i32));
    let diff = (p0 - p1).abs();
    if diff <= TIE_TOL * (p0 + p1) {
        return Err(IpeaError::DominanceTooWeak);
    }
    let excess = p0 + p1 - c2l / 2.0;
    if excess < -UNDER_ROOT_TOL * c2l {
        return Err(IpeaError::NegativeUnderRoot(excess));
    }
    Ok(2.0 * excess.max(0.0) / diff)
}

/// The controlled PRC for one scaled system, calibrated once.
#[derive(Debug, Clone)]
pub struct PhaseEstimator {
    pub sys: ScaledSystem,
    pub circuit: PrcCircuit,
    pub effective: EffectiveOperator,
    /// Balanced attenuation, equal to the measured `g`.
    pub c: f64,
    controlled: Vec<GateOp>,
    attenuation: GateOp,
    /// `A_eff / c`.
    step: ComplexMatrix,
}

impl PhaseEstimator {
    pub fn new(sys: &ScaledSystem) -> Result<Self, IpeaError> {
        let mut circuit = build_prc(sys)?;
        let effective = circuit.calibrate(sys)?;
        let c = effective.g;
        let layout = Layout::new(sys.m);
        let s = (1.0 - c * c).max(0.0).sqrt();
        let attenuation = GateOp::single(gates::real(c, -s, s, c), layout.anc2())?.anti_controlled_by(layout.phase())?;
        let controlled = circuit.controlled_on(layout.phase())?;
        let step = effective.matrix.map(|z| z / c);
        Ok(Self { sys: sys.clone(), circuit, effective, c, controlled, attenuation, step })
    }

    pub fn layout(&self) -> Layout {
        Layout::new(self.sys.m)
    }

    fn n(&self) -> usize {
        self.sys.n()
    }

    fn inputs(&self, input: &ChainInput) -> Vec<Vec<Complex64>> {
        match input {
            ChainInput::Eigenstate(v) => vec![v.clone()],
            ChainInput::MaximallyMixed => (0..self.n())
                .map(|j| {
                    let mut e = vec![Complex64::new(0.0, 0.0); self.n()];
                    e[j] = Complex64::new(1.0, 0.0);
                    e
                })
                .collect(),
        }
    }

    pub fn chain(&self, input: &ChainInput, l: usize, theta: f64, path: ChainPath, max_l: usize) -> Result<ChainOutcome, IpeaError> {
        let full = match path {
            ChainPath::FullCircuit => true,
            ChainPath::Fast => false,
            ChainPath::Auto => l <= max_l,
        };
        if full {
            self.chain_full(input, l, theta)
        } else {
            self.chain_fast(input, l, theta)
        }
    }

    /// Gate-level chain: every step post-selects anc1 = anc2 = 0.
    pub fn chain_full(&self, input: &ChainInput, l: usize, theta: f64) -> Result<ChainOutcome, IpeaError> {
        let layout = self.layout();
        let phase = layout.phase();
        let h = GateOp::single(gates::h(), phase)?;
        let z = GateOp::single(gates::z_theta(theta), phase)?;
        let inputs = self.inputs(input);
        let (mut p0, mut p1) = (0.0, 0.0);
        for alpha in &inputs {
            let mut state = StateVector::prepare(self.sys.m, alpha)?;
            state.apply(&h)?;
            for _ in 0..l {
                state.apply_all(&self.controlled)?;
                state.apply(&self.attenuation)?;
                state = state.post_select(&[(layout.anc1(), 0), (layout.anc2(), 0)])?.state;
            }
            state.apply(&z)?;
            state.apply(&h)?;
            let (q0, q1) = state.marginal_probs(phase, &[])?;
            p0 += q0;
            p1 += q1;
        }
        let count = inputs.len() as f64;
        let (p0, p1) = (p0 / count, p1 / count);
        let c2l = self.c.powi(2 * l as i32);
        let sum = (p0 + p1) / c2l;
        Ok(ChainOutcome { p0, p1, sum, diff: (p0 - p1) / c2l, image: 2.0 * sum - 1.0, log_scale: 0.0 })
    }

    /// Chain from the power of the extracted operator.
    pub fn chain_fast(&self, input: &ChainInput, l: usize, theta: f64) -> Result<ChainOutcome, IpeaError> {
        let n = self.n();
        let mut power = ComplexMatrix::identity(n, n);
        let mut ln_norm = 0.0;
        for _ in 0..l {
            power = &self.step * power;
            let norm = power.norm();
            if norm > 0.0 {
                power /= Complex64::new(norm, 0.0);
                ln_norm += norm.ln();
            }
        }
        let rot = Complex64::from_polar(1.0, -theta);
        let (shrink, grow, log_scale) = if ln_norm > 0.0 {
            ((-ln_norm).exp(), 1.0, 2.0 * ln_norm)
        } else {
            (1.0, ln_norm.exp(), 0.0)
        };
        let inputs = self.inputs(input);
        let (mut sum, mut diff, mut image) = (0.0, 0.0, 0.0);
        for alpha in &inputs {
            let a = DVector::from_column_slice(alpha) * Complex64::new(shrink, 0.0);
            let v = (&power * DVector::from_column_slice(alpha)) * (rot * grow);
            sum += 0.5 * (a.norm_squared() + v.norm_squared());
            diff += a.dotc(&v).re;
            image += v.norm_squared();
        }
        let count = inputs.len() as f64;
        let (sum, diff, image) = (sum / count, diff / count, image / count);
        let ln_prefactor = log_scale + 2.0 * l as f64 * self.c.ln();
        let raw = |x: f64| if x > 0.0 { (x.ln() + ln_prefactor).exp() } else { 0.0 };
        Ok(ChainOutcome {
            p0: raw(0.5 * (sum + diff)),
            p1: raw(0.5 * (sum - diff)),
            sum,
            diff,
            image,
            log_scale,
        })
    }

    fn measure(&self, input: &ChainInput, l: usize, theta: f64, k: u32, cfg: &RunConfig) -> Result<ChainOutcome, IpeaError> {
        let exact = self.chain(input, l, theta, cfg.path, cfg.max_l)?;
        match cfg.measurement {
            Measurement::Exact => Ok(exact),
            Measurement::Shots { count, seed } => {
                let draws = sample_distribution(&[exact.p0, exact.p1], count, seed.wrapping_add(k as u64));
                let shots = count as f64;
                let (p0, p1) = (draws.counts[0] as f64 / shots, draws.counts[1] as f64 / shots);
                let c2l = self.c.powi(2 * l as i32);
                let sum = (p0 + p1) / c2l;
                Ok(ChainOutcome { p0, p1, sum, diff: (p0 - p1) / c2l, image: 2.0 * sum - 1.0, log_scale: 0.0 })
            }
        }
    }

    /// Runs the `b` feedback iterations. Returns per-iteration stats with
    /// `r_power` filled by `magnitude`.
    fn iterate(
        &self,
        input: &ChainInput,
        cfg: &RunConfig,
        magnitude: impl Fn(&ChainOutcome, usize) -> Result<Option<(f64, f64)>, IpeaError>,
    ) -> Result<(Vec<IterationStats>, Vec<ChainOutcome>), IpeaError> {
        cfg.validate()?;
        let b = cfg.bits;
        let m = self.sys.m;
        let mut extracted: Vec<u8> = Vec::with_capacity(b as usize);
        let mut stats = Vec::with_capacity(b as usize);
        let mut outcomes = Vec::with_capacity(b as usize);
        for k in 1..=b {
            let l = 1usize << (b - k);
            let theta = theta_feedback(&extracted);
            let out = self.measure(input, l, theta, k, cfg)?;
            if !(out.sum > 0.0) || !out.sum.is_finite() {
                return Err(IpeaError::NoSignal(out.p0 + out.p1));
            }
            let (bit, degenerate) = bit_from_diff(out.diff, out.sum);
            extracted.push(bit);
            let estimate = magnitude(&out, l)?;
            let lf = l as f64;
            stats.push(IterationStats {
                k,
                l,
                theta,
                p0: out.p0,
                p1: out.p1,
                bit,
                degenerate,
                r_power: estimate.map(|e| e.0),
                r: estimate.map(|e| e.1),
                ln_kappa_circuit: 4f64.ln() + lf * ((m + 1) as f64) * 2f64.ln(),
                ln_kappa_quoted: 8f64.ln() + lf * ((1u64 << m) as f64 * self.sys.mu * self.sys.mu).ln(),
            });
            outcomes.push(out);
        }
        Ok((stats, outcomes))
    }

    /// Phase and magnitude of the eigenvalue belonging to `eigvec`.
    pub fn run_eigenstate(&self, eigvec: &[Complex64], cfg: &RunConfig) -> Result<RootEstimate, IpeaError> {
        let input = ChainInput::Eigenstate(eigvec.to_vec());
        let (stats, _) = self.iterate(&input, cfg, |out, l| {
            // r^{2L} = image e^{log_scale}
            if out.image < -UNDER_ROOT_TOL * out.sum.max(1.0) {
                return Err(IpeaError::NegativeUnderRoot(out.image));
            }
            if out.image <= 0.0 {
                return Ok(Some((0.0, 0.0)));
            }
            let ln_r2l = out.image.ln() + out.log_scale;
            Ok(Some(((0.5 * ln_r2l).exp(), (ln_r2l / (2.0 * l as f64)).exp())))
        })?;
        // the L = 1 iteration carries the magnitude
        let magnitude = stats.last().and_then(|s| s.r).unwrap_or(0.0);
        let bits = bits_msb_first(&stats);
        let phase = phase_from_bits(&bits);
        let lambda = Complex64::from_polar(magnitude, 2.0 * PI * phase);
        let root = self.sys.root_from_eigenvalue(lambda);
        Ok(RootEstimate {
            magnitude,
            bits,
            phase,
            lambda,
            root,
            residual: self.sys.polynomial().evaluate(root).norm(),
            iterations: stats,
            conjugate_alternative: None,
            method: EstimateMethod::Eigenstate,
            refined: None,
        })
    }

    /// Dominant eigenvalue from a maximally mixed main register.
    pub fn run_mixed(&self, cfg: &RunConfig) -> Result<RootEstimate, IpeaError> {
        let (stats, _) = self.iterate(&ChainInput::MaximallyMixed, cfg, |out, l| {
            // r^L = image / |diff|, the shared scale cancels
            let diff = out.diff.abs();
            if diff <= TIE_TOL * out.sum || out.image <= 0.0 {
                return Ok(None);
            }
            let ln_rl = out.image.ln() - diff.ln();
            Ok(Some((ln_rl.exp(), (ln_rl / l as f64).exp())))
        })?;
        if stats.iter().all(|s| s.degenerate) {
            return Err(IpeaError::DominanceTooWeak);
        }
        // longest chain with a usable signal: the dominant term has had the most
        // applications to outgrow the rest
        let magnitude = stats
            .iter()
            .find_map(|s| s.r.filter(|r| !s.degenerate && r.is_finite()))
            .ok_or(IpeaError::DominanceTooWeak)?;
        let bits = bits_msb_first(&stats);
        let phase = phase_from_bits(&bits);
        let lambda = Complex64::from_polar(magnitude, 2.0 * PI * phase);
        let poly = self.sys.polynomial();
        let candidate = self.sys.root_from_eigenvalue(lambda);
        let mirrored = candidate.conj();
        let (res_a, res_b) = (poly.evaluate(candidate).norm(), poly.evaluate(mirrored).norm());
        let scale = res_a.max(res_b).max(f64::MIN_POSITIVE);
        let (root, other) = if (res_a - res_b).abs() > 1e-9 * scale {
            if res_a < res_b { (candidate, mirrored) } else { (mirrored, candidate) }
        } else if oracle::prefer(mirrored, candidate) {
            (mirrored, candidate)
        } else {
            (candidate, mirrored)
        };
        let lambda = self.sys.eigenvalue_from_root(root);
        let conjugate_alternative = if (other - root).norm() > 0.0 { Some(other) } else { None };
        Ok(RootEstimate {
            magnitude,
            bits,
            phase: if lambda.im < 0.0 && phase > 0.0 { 1.0 - phase } else { phase },
            lambda,
            root,
            residual: poly.evaluate(root).norm(),
            iterations: stats,
            conjugate_alternative,
            method: EstimateMethod::Mixed,
            refined: None,
        })
    }
}

fn bits_msb_first(stats: &[IterationStats]) -> Vec<u8> {
    // iteration k extracted x_{b-k+1}
    stats.iter().rev().map(|s| s.bit).collect()
}

/// `0.x_1 x_2 .. x_b` in binary.
pub fn phase_from_bits(bits: &[u8]) -> f64 {
    bits.iter()
        .enumerate()
        .fold(0.0, |acc, (j, &b)| acc + b as f64 * 2f64.powi(-(j as i32 + 1)))
}

/// `(P0, P1)` of one controlled chain, choosing the execution path automatically.
pub fn controlled_prc_chain(sys: &ScaledSystem, l: usize, input: &ChainInput, theta: f64) -> Result<(f64, f64), IpeaError> {
    let est = PhaseEstimator::new(sys)?;
    let cfg = RunConfig::default();
    let out = est.chain(input, l, theta, cfg.path, cfg.max_l)?;
    Ok((out.p0, out.p1))
}

pub fn run_eigenstate(sys: &ScaledSystem, eigvec: &[Complex64], cfg: &RunConfig) -> Result<RootEstimate, IpeaError> {
    PhaseEstimator::new(sys)?.run_eigenstate(eigvec, cfg)
}

pub fn run_mixed(sys: &ScaledSystem, cfg: &RunConfig) -> Result<RootEstimate, IpeaError> {
    PhaseEstimator::new(sys)?.run_mixed(cfg)
}

/// Newton iteration on `p` from `start`.
pub fn polish_root(p: &Polynomial, start: Complex64) -> Complex64 {
    let dp = p.derivative();
    let mut z = start;
    for _ in 0..100 {
        let d = dp.evaluate(z);
        if d.norm() == 0.0 {
            break;
        }
        let step = p.evaluate(z) / d;
        if !step.re.is_finite() || !step.im.is_finite() {
            break;
        }
        z -= step;
        if step.norm() <= 1e-15 * (1.0 + z.norm()) {
            break;
        }
    }
    z
}

/// One deflation stage of [`find_all_roots`].
#[derive(Debug, Clone, PartialEq)]
pub struct Stage {
    /// Degree of the polynomial entering the stage, before padding.
    pub degree: usize,
    pub pad_count: usize,
    pub mode: Mode,
    pub mu: f64,
    pub m: usize,
    pub g: f64,
    pub estimate: RootEstimate,
    /// Roots removed at this stage (two for a conjugate pair).
    pub removed: Vec<Complex64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RootsReport {
    pub roots: Vec<Complex64>,
    pub stages: Vec<Stage>,
    /// Set when the pipeline stopped before reaching degree 0.
    pub failure: Option<IpeaError>,
    pub tolerance: f64,
}

impl RootsReport {
    pub fn complete(&self) -> bool {
        self.failure.is_none()
    }

    pub fn estimates(&self) -> impl Iterator<Item = &RootEstimate> {
        self.stages.iter().map(|s| &s.estimate)
    }
}

fn estimate_stage(q: &Polynomial, sys: &ScaledSystem, cfg: &RunConfig, tolerance: f64) -> Result<(PhaseEstimator, RootEstimate), IpeaError> {
    let est = PhaseEstimator::new(sys)?;
    let eigen = |method: EstimateMethod| -> Result<RootEstimate, IpeaError> {
        let target = oracle::dominant_root(q)?;
        let mut r = est.run_eigenstate(&sys.eigenvector(target), cfg)?;
        r.method = method;
        Ok(r)
    };
    let result = match cfg.init {
        InitStrategy::Eigenstate => eigen(EstimateMethod::Eigenstate)?,
        InitStrategy::MaximallyMixed => match est.run_mixed(cfg) {
            Ok(r) if cfg.polish || r.residual <= tolerance || !cfg.eigenstate_fallback => r,
            Ok(_) => eigen(EstimateMethod::EigenstateFallback)?,
            Err(IpeaError::DominanceTooWeak | IpeaError::NoSignal(_) | IpeaError::NegativeUnderRoot(_))
                if cfg.eigenstate_fallback =>
            {
                eigen(EstimateMethod::EigenstateFallback)?
            }
            Err(e) => return Err(e),
        },
    };
    Ok((est, result))
}

/// Finds every root of `p` by repeated estimate-and-deflate.
///
/// Each stage pads the current quotient to a power-of-two degree, estimates
/// one root, and divides it (or its conjugate pair) out of the unpadded
/// quotient, so padding zeros never enter the result.
pub fn find_all_roots(p: &Polynomial, cfg: &RunConfig) -> Result<RootsReport, IpeaError> {
    cfg.validate()?;
    let original = p.normalize()?;
    let tolerance = cfg.tolerance.unwrap_or_else(|| original.default_tolerance());
    let mut report = RootsReport { roots: Vec::new(), stages: Vec::new(), failure: None, tolerance };
    let mut current = original.clone();

    while current.degree() >= 1 {
        let (padded, pad_count) = current.pad_to_power_of_two();
        let sys = match cfg.mode.map(|mode| padded.scale(mode)) {
            Some(Ok(sys)) => sys,
            _ => padded.scale(padded.select_mode())?,
        };
        let mode = sys.mode;
        let (est, mut estimate) = match estimate_stage(&current, &sys, cfg, tolerance) {
            Ok(v) => v,
            Err(e) => {
                report.failure = Some(e);
                break;
            }
        };
        if cfg.polish {
            let z = polish_root(&current, estimate.root);
            estimate.refined = Some(if z.im.abs() <= tolerance { Complex64::new(z.re, 0.0) } else { z });
        }
        let accepted = estimate.accepted();
        let residual = original.evaluate(accepted).norm();
        let deflated = if residual <= tolerance {
            current.deflate(accepted, current.default_tolerance().max(tolerance))
        } else {
            Err(PolyError::NotARoot { residual, tolerance })
        };
        let removed = if accepted.im.abs() <= tolerance {
            vec![Complex64::new(accepted.re, 0.0)]
        } else {
            vec![accepted, accepted.conj()]
        };
        let stage = Stage {
            degree: current.degree(),
            pad_count,
            mode,
            mu: sys.mu,
            m: sys.m,
            g: est.c,
            estimate,
            removed: removed.clone(),
        };
        match deflated {
            Ok(q) => {
                report.roots.extend(removed);
                report.stages.push(stage);
                current = q;
            }
            Err(e) => {
                report.stages.push(Stage { removed: Vec::new(), ..stage });
                report.failure = Some(e.into());
                break;
            }
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sys_of(c: &[f64]) -> ScaledSystem {
        let p = Polynomial::new(c.to_vec()).unwrap();
        p.scale(p.select_mode()).unwrap()
    }

    fn exact(bits: u32) -> RunConfig {
        RunConfig::with_bits(bits)
    }

    #[test]
    fn bit_extraction() {
        assert_eq!(extract_bit(0.25, 0.0).unwrap(), (0, false));
        assert_eq!(extract_bit(0.0, 0.25).unwrap(), (1, false));
        assert_eq!(extract_bit(0.1, 0.1).unwrap(), (0, true));
        assert!(matches!(extract_bit(0.0, 0.0), Err(IpeaError::NoSignal(_))));
    }

    #[test]
    fn feedback_angles() {
        assert_eq!(theta_feedback(&[]), 0.0);
        assert!((theta_feedback(&[1]) - PI / 2.0).abs() < 1e-15);
        assert!((theta_feedback(&[1, 0]) - PI / 4.0).abs() < 1e-15);
        assert!((theta_feedback(&[1, 1]) - 3.0 * PI / 4.0).abs() < 1e-15);
    }

    #[test]
    fn magnitude_formulas() {
        assert!((estimate_magnitude(0.25, 0.0, 1, 1).unwrap() - 1.0).abs() < 1e-15);
        let r = estimate_magnitude(0.15625, 0.0, 1, 1).unwrap();
        assert!((r - 0.5).abs() < 1e-15);
        assert_eq!(estimate_magnitude(0.125, 0.0, 1, 1).unwrap(), 0.0);
        assert!(matches!(estimate_magnitude(0.01, 0.0, 1, 1), Err(IpeaError::NegativeUnderRoot(_))));
        assert!(matches!(estimate_dominant_magnitude(0.1, 0.1, 1, 1), Err(IpeaError::DominanceTooWeak)));
    }

    #[test]
    fn chain_examples_x2_minus_1() {
        let sys = sys_of(&[-1.0, 0.0, 1.0]);
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let minus = ChainInput::Eigenstate(vec![Complex64::new(h, 0.0), Complex64::new(-h, 0.0)]);
        let (p0, p1) = controlled_prc_chain(&sys, 1, &minus, 0.0).unwrap();
        assert!(p0.abs() < 1e-15 && (p1 - 0.25).abs() < 1e-12);
        let plus = ChainInput::Eigenstate(vec![Complex64::new(h, 0.0); 2]);
        let (p0, p1) = controlled_prc_chain(&sys, 1, &plus, 0.0).unwrap();
        assert!((p0 - 0.25).abs() < 1e-12 && p1.abs() < 1e-15);
    }

    #[test]
    fn fast_and_full_agree_including_scale() {
        let sys = sys_of(&[0.3, -0.7, 0.2, 0.9, 1.0]);
        let est = PhaseEstimator::new(&sys).unwrap();
        for l in [1, 2, 5] {
            let a = est.chain_full(&ChainInput::MaximallyMixed, l, 0.7).unwrap();
            let b = est.chain_fast(&ChainInput::MaximallyMixed, l, 0.7).unwrap();
            assert!((a.p0 - b.p0).abs() < 1e-14 && (a.p1 - b.p1).abs() < 1e-14);
            let unscale = |o: &ChainOutcome, x: f64| x * o.log_scale.exp();
            assert!((unscale(&a, a.image) - unscale(&b, b.image)).abs() < 1e-9);
            assert!((unscale(&a, a.diff) - unscale(&b, b.diff)).abs() < 1e-9);
        }
    }

    #[test]
    fn eigenstate_examples() {
        let sys = sys_of(&[1.0, 0.0, 1.0]);
        let v = sys.eigenvector(Complex64::new(0.0, 1.0));
        let est = run_eigenstate(&sys, &v, &exact(2)).unwrap();
        assert_eq!(est.bits, vec![0, 1]);
        assert!((est.phase - 0.25).abs() < 1e-15);
        assert!((est.magnitude - 1.0).abs() < 1e-9);
        assert!((est.root - Complex64::new(0.0, 1.0)).norm() < 1e-9);

        let sys = sys_of(&[-1.0, 0.0, 1.0]);
        let est = run_eigenstate(&sys, &sys.eigenvector(Complex64::new(-1.0, 0.0)), &exact(1)).unwrap();
        assert_eq!(est.bits, vec![1]);
        assert!((est.root - Complex64::new(-1.0, 0.0)).norm() < 1e-9);

        let sys = sys_of(&[-4.0, 0.0, 1.0]);
        let est = run_eigenstate(&sys, &sys.eigenvector(Complex64::new(2.0, 0.0)), &exact(3)).unwrap();
        assert_eq!(est.phase, 0.5);
        assert!((est.magnitude - 0.5).abs() < 1e-9);
        assert!((est.root - Complex64::new(2.0, 0.0)).norm() < 1e-9);
    }

    #[test]
    fn zero_root_has_zero_magnitude() {
        let sys = sys_of(&[0.0, -2.0, 1.0]);
        let est = run_eigenstate(&sys, &sys.eigenvector(Complex64::new(0.0, 0.0)), &exact(2)).unwrap();
        assert_eq!(est.magnitude, 0.0);
        assert!(est.iterations.iter().all(|s| s.degenerate));
        assert_eq!(est.root, Complex64::new(0.0, 0.0));
    }

    #[test]
    fn mixed_examples() {
        let sys = sys_of(&[-0.45, -0.4, 1.0]);
        let est = run_mixed(&sys, &exact(4)).unwrap();
        assert!((est.magnitude - 0.9).abs() < 0.045);
        assert!((est.root - Complex64::new(0.9, 0.0)).norm() < 0.05);

        let sys = sys_of(&[-1.0, 0.0, 1.0]);
        assert!(matches!(run_mixed(&sys, &exact(1)), Err(IpeaError::DominanceTooWeak)));

        let sys = sys_of(&[0.25, 0.0, 1.0]);
        let est = run_mixed(&sys, &exact(2)).unwrap();
        assert!((est.magnitude - 0.5).abs() < 1e-9);
        assert!((est.root - Complex64::new(0.0, 0.5)).norm() < 1e-9);
        assert!((est.conjugate_alternative.unwrap() - Complex64::new(0.0, -0.5)).norm() < 1e-9);
    }

    #[test]
    fn config_validation() {
        assert!(RunConfig::with_bits(0).validate().is_err());
        assert!(RunConfig::with_bits(13).validate().is_err());
        let shots = RunConfig { bits: 4, measurement: Measurement::Shots { count: 10, seed: 1 }, ..RunConfig::default() };
        assert!(shots.validate().is_err());
        let zero = RunConfig { bits: 2, measurement: Measurement::Shots { count: 0, seed: 1 }, ..RunConfig::default() };
        assert!(zero.validate().is_err());
    }

    #[test]
    fn long_chains_stay_finite() {
        // |lambda| = 1.618 > 1, L = 2048
        let sys = sys_of(&[-1.0, -1.0, 1.0]);
        let golden = (1.0 + 5f64.sqrt()) / 2.0;
        let v = sys.eigenvector(Complex64::new(golden, 0.0));
        let est = run_eigenstate(&sys, &v, &exact(12)).unwrap();
        assert!((est.magnitude - golden).abs() < 1e-9);
        assert!(est.iterations.iter().all(|s| s.r.is_some_and(f64::is_finite)));
        assert!((est.iterations[0].r.unwrap() - golden).abs() < 1e-6);
    }

    #[test]
    fn find_all_small() {
        let p = Polynomial::new(vec![1.0, 0.0, 1.0]).unwrap();
        let report = find_all_roots(&p, &exact(2)).unwrap();
        assert!(report.complete());
        let want = [Complex64::new(0.0, 1.0), Complex64::new(0.0, -1.0)];
        assert!(oracle::pairing_error(&report.roots, &want) < 1e-12);

        let p = Polynomial::new(vec![-1.0, 0.0, 1.0]).unwrap();
        let cfg = RunConfig { init: InitStrategy::Eigenstate, ..exact(1) };
        let report = find_all_roots(&p, &cfg).unwrap();
        let want = [Complex64::new(1.0, 0.0), Complex64::new(-1.0, 0.0)];
        assert!(oracle::pairing_error(&report.roots, &want) < 1e-12);
    }

    #[test]
    fn polish_converges() {
        let p = Polynomial::new(vec![-0.45, -0.4, 1.0]).unwrap();
        let z = polish_root(&p, Complex64::new(0.95, 0.0));
        assert!((z - Complex64::new(0.9, 0.0)).norm() < 1e-14);
    }
}
