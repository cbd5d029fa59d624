//! Classical Durand-Kerner root finder, used as ground truth for the quantum path.

use std::f64::consts::PI;

use num_complex::Complex64;
use thiserror::Error;

use crate::poly::Polynomial;

/// Relative tolerance under which two magnitudes or real parts count as tied.
const TIE_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct OracleResult {
    pub roots: Vec<Complex64>,
    pub max_residual: f64,
    pub iterations_used: usize,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum OracleError {
    #[error("polynomial must have degree >= 1 and a nonzero leading coefficient")]
    Degenerate,
    #[error("tolerance must be positive, got {0}")]
    BadTolerance(f64),
    #[error("no convergence after {max_iter} iterations")]
    NoConvergence { max_iter: usize, best: OracleResult },
}

/// Simultaneous Weierstrass iteration on all roots of `p`.
///
/// Starting points sit on a circle of radius `1 + a_max / |a_n|` at angles
/// `(k + 0.25) 2pi / n`, with a small radial spread so no two guesses are
/// related by the polynomial's own symmetries. Converged once every update
/// is below `tol * max(1, |z|)`.
pub fn find_roots(p: &Polynomial, tol: f64, max_iter: usize) -> Result<OracleResult, OracleError> {
    if !(tol > 0.0) {
        return Err(OracleError::BadTolerance(tol));
    }
    let n = p.degree();
    let an = p.leading();
    if n == 0 || an == 0.0 {
        return Err(OracleError::Degenerate);
    }
    let monic: Vec<f64> = p.coeffs().iter().map(|c| c / an).collect();
    let eval = |z: Complex64| {
        monic
            .iter()
            .rev()
            .fold(Complex64::new(0.0, 0.0), |acc, &c| acc * z + c)
    };

    let radius = 1.0 + p.max_abs_coeff() / an.abs();
    let mut z: Vec<Complex64> = (0..n)
        .map(|k| {
            let r = radius * (1.0 + 0.05 * k as f64 / n as f64);
            Complex64::from_polar(r, (k as f64 + 0.25) * 2.0 * PI / n as f64)
        })
        .collect();

    let mut iterations = 0;
    let mut converged = false;
    while iterations < max_iter {
        iterations += 1;
        let mut max_step: f64 = 0.0;
        for i in 0..n {
            let mut denom = Complex64::new(1.0, 0.0);
            for (j, zj) in z.iter().enumerate() {
                if j != i {
                    denom *= z[i] - zj;
                }
            }
            if denom.norm() == 0.0 {
                // coincident iterates: nudge apart
                denom = Complex64::new(tol, tol);
            }
            let step = eval(z[i]) / denom;
            z[i] -= step;
            max_step = max_step.max(step.norm() / z[i].norm().max(1.0));
        }
        if max_step < tol {
            converged = true;
            break;
        }
    }

    let result = OracleResult {
        max_residual: z.iter().map(|&r| p.evaluate(r).norm()).fold(0.0, f64::max),
        roots: z,
        iterations_used: iterations,
    };
    if converged {
        Ok(result)
    } else {
        Err(OracleError::NoConvergence { max_iter, best: result })
    }
}

/// Defaults used wherever the oracle serves as a reference.
pub fn find_roots_default(p: &Polynomial) -> Result<OracleResult, OracleError> {
    find_roots(p, 1e-14, 5000)
}

/// Largest-magnitude root; ties go to the larger real part, then the larger
/// imaginary part (so a conjugate pair yields its upper member).
pub fn dominant_root(p: &Polynomial) -> Result<Complex64, OracleError> {
    let roots = find_roots_default(p)?.roots;
    Ok(select_dominant(&roots))
}

pub fn select_dominant(roots: &[Complex64]) -> Complex64 {
    let mut best = roots[0];
    for &z in &roots[1..] {
        if prefer(z, best) {
            best = z;
        }
    }
    best
}

/// True when `a` wins the dominance tie-break against `b`.
pub fn prefer(a: Complex64, b: Complex64) -> bool {
    let scale = a.norm().max(b.norm()).max(1.0);
    let (ma, mb) = (a.norm(), b.norm());
    if (ma - mb).abs() > TIE_TOL * scale {
        return ma > mb;
    }
    if (a.re - b.re).abs() > TIE_TOL * scale {
        return a.re > b.re;
    }
    a.im > b.im
}

/// Greedy nearest matching of `estimates` against `reference`; returns the
/// largest matched distance. Unmatched entries count as infinitely far.
pub fn pairing_error(estimates: &[Complex64], reference: &[Complex64]) -> f64 {
    if estimates.len() != reference.len() {
        return f64::INFINITY;
    }
    let mut pairs: Vec<(f64, usize, usize)> = Vec::new();
    for (i, e) in estimates.iter().enumerate() {
        for (j, r) in reference.iter().enumerate() {
            pairs.push(((e - r).norm(), i, j));
        }
    }
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut used_e = vec![false; estimates.len()];
    let mut used_r = vec![false; reference.len()];
    let mut worst: f64 = 0.0;
    for (d, i, j) in pairs {
        if !used_e[i] && !used_r[j] {
            used_e[i] = true;
            used_r[j] = true;
            worst = worst.max(d);
        }
    }
    worst
}
