//! Real-coefficient polynomials and the scaled companion systems built from them.
//!
//! Coefficients are stored low-to-high: index `i` holds the coefficient of `x^i`.

use nalgebra::DMatrix;
use num_complex::Complex64;
use thiserror::Error;

/// Dense complex matrix, row-major semantics.
pub type ComplexMatrix = DMatrix<Complex64>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PolyError {
    #[error("polynomial has no coefficients")]
    Empty,
    #[error("coefficient a{index} = {value} is not finite")]
    NonFinite { index: usize, value: f64 },
    #[error("all coefficients are zero")]
    ZeroPolynomial,
    #[error("polynomial is constant")]
    ConstantPolynomial,
    #[error("degree {0} is not a power of two >= 2")]
    NotPowerOfTwo(usize),
    #[error("mode {mode:?} needs a nonzero {which} coefficient")]
    ZeroScaleCoefficient { mode: Mode, which: &'static str },
    #[error("|p(root)| = {residual:e} exceeds tolerance {tolerance:e}")]
    NotARoot { residual: f64, tolerance: f64 },
    #[error("cannot remove a root of multiplicity {needed} from a degree-{degree} polynomial")]
    DegreeUnderflow { degree: usize, needed: usize },
    #[error("scaled coefficient a'{index} = {value} outside [-1, 1]")]
    CoefficientOutOfRange { index: usize, value: f64 },
    #[error("scaling factor mu = {0} must satisfy |mu| >= 1")]
    InvalidMu(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Polynomial {
    coeffs: Vec<f64>,
}

impl Polynomial {
    /// Builds a polynomial from `a0..an`. Trailing zeros are kept until [`normalize`](Self::normalize).
    pub fn new(coeffs: Vec<f64>) -> Result<Self, PolyError> {
        if coeffs.is_empty() {
            return Err(PolyError::Empty);
        }
        if let Some((index, &value)) = coeffs.iter().enumerate().find(|(_, c)| !c.is_finite()) {
            return Err(PolyError::NonFinite { index, value });
        }
        Ok(Self { coeffs })
    }

    /// Monic polynomial with the given real roots.
    pub fn from_real_roots(roots: &[f64]) -> Self {
        let mut coeffs = vec![1.0];
        for &r in roots {
            let mut next = vec![0.0; coeffs.len() + 1];
            for (i, &c) in coeffs.iter().enumerate() {
                next[i + 1] += c;
                next[i] -= r * c;
            }
            coeffs = next;
        }
        Self { coeffs }
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn degree(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn leading(&self) -> f64 {
        self.coeffs[self.degree()]
    }

    pub fn max_abs_coeff(&self) -> f64 {
        self.coeffs.iter().fold(0.0, |acc, c| acc.max(c.abs()))
    }

    /// Default residual tolerance for root acceptance: `1e-6 * (1 + max|a_i|)`.
    pub fn default_tolerance(&self) -> f64 {
        1e-6 * (1.0 + self.max_abs_coeff())
    }

    /// Strips trailing zero coefficients and makes the leading coefficient positive.
    pub fn normalize(&self) -> Result<Polynomial, PolyError> {
        let last = self
            .coeffs
            .iter()
            .rposition(|&c| c != 0.0)
            .ok_or(PolyError::ZeroPolynomial)?;
        if last == 0 {
            return Err(PolyError::ConstantPolynomial);
        }
        let sign = if self.coeffs[last] < 0.0 { -1.0 } else { 1.0 };
        let coeffs = self.coeffs[..=last].iter().map(|c| sign * c + 0.0).collect();
        Ok(Polynomial { coeffs })
    }

    /// Multiplies by `x^k` so the degree becomes the next power of two.
    /// Returns the padded polynomial and `k`.
    pub fn pad_to_power_of_two(&self) -> (Polynomial, usize) {
        let degree = self.degree();
        let target = degree.max(2).next_power_of_two();
        let pad = target - degree;
        let mut coeffs = vec![0.0; pad];
        coeffs.extend_from_slice(&self.coeffs);
        (Polynomial { coeffs }, pad)
    }

    /// `XMode` unless the constant term strictly dominates the leading one.
    pub fn select_mode(&self) -> Mode {
        if self.coeffs[0].abs() > self.leading().abs() {
            Mode::RecipXMode
        } else {
            Mode::XMode
        }
    }

    pub fn scale(&self, mode: Mode) -> Result<ScaledSystem, PolyError> {
        let n = self.degree();
        if n < 2 || !n.is_power_of_two() {
            return Err(PolyError::NotPowerOfTwo(n));
        }
        let a_max = self.max_abs_coeff();
        let (mu, a_prime) = match mode {
            Mode::XMode => {
                let an = self.leading();
                if an == 0.0 {
                    return Err(PolyError::ZeroScaleCoefficient { mode, which: "leading" });
                }
                let a_prime = self.coeffs[..n].iter().map(|a| a / a_max).collect();
                (a_max / an, a_prime)
            }
            Mode::RecipXMode => {
                let a0 = self.coeffs[0];
                if a0 == 0.0 {
                    return Err(PolyError::ZeroScaleCoefficient { mode, which: "constant" });
                }
                let a_prime = (0..n).map(|i| self.coeffs[n - i] / a_max).collect();
                (a_max / a0, a_prime)
            }
        };
        Ok(ScaledSystem {
            mode,
            mu,
            a_prime,
            m: n.trailing_zeros() as usize,
            a_max,
        })
    }

    /// Companion matrix of the monic form `p / a_n`.
    pub fn companion_matrix(&self) -> ComplexMatrix {
        let n = self.degree();
        let an = self.leading();
        let mut c = ComplexMatrix::zeros(n, n);
        for i in 0..n.saturating_sub(1) {
            c[(i, i + 1)] = Complex64::new(1.0, 0.0);
        }
        for j in 0..n {
            c[(n - 1, j)] = Complex64::new(-self.coeffs[j] / an, 0.0);
        }
        c
    }

    /// Horner evaluation.
    pub fn evaluate(&self, x: Complex64) -> Complex64 {
        self.coeffs
            .iter()
            .rev()
            .fold(Complex64::new(0.0, 0.0), |acc, &c| acc * x + c)
    }

    /// First derivative.
    pub fn derivative(&self) -> Polynomial {
        if self.degree() == 0 {
            return Polynomial { coeffs: vec![0.0] };
        }
        let coeffs = self.coeffs[1..]
            .iter()
            .enumerate()
            .map(|(i, c)| (i + 1) as f64 * c)
            .collect();
        Polynomial { coeffs }
    }

    pub fn mul(&self, other: &Polynomial) -> Polynomial {
        let mut coeffs = vec![0.0; self.coeffs.len() + other.coeffs.len() - 1];
        for (i, a) in self.coeffs.iter().enumerate() {
            for (j, b) in other.coeffs.iter().enumerate() {
                coeffs[i + j] += a * b;
            }
        }
        Polynomial { coeffs }
    }

    /// Removes `root` (and its conjugate, when complex) from the polynomial.
    ///
    /// A root with `|Im| <= tolerance` is treated as real and divided out as
    /// `x - Re(root)`; otherwise the real quadratic `x^2 - 2Re(root)x + |root|^2`
    /// is divided out. The remainder is discarded once the residual check passes.
    pub fn deflate(&self, root: Complex64, tolerance: f64) -> Result<Polynomial, PolyError> {
        let residual = self.evaluate(root).norm();
        if !(residual <= tolerance) {
            return Err(PolyError::NotARoot { residual, tolerance });
        }
        let degree = self.degree();
        if root.im.abs() <= tolerance {
            if degree < 1 {
                return Err(PolyError::DegreeUnderflow { degree, needed: 1 });
            }
            Ok(self.divide_linear(root.re))
        } else {
            if degree < 2 {
                return Err(PolyError::DegreeUnderflow { degree, needed: 2 });
            }
            Ok(self.divide_quadratic(-2.0 * root.re, root.norm_sqr()))
        }
    }

    fn divide_linear(&self, r: f64) -> Polynomial {
        let n = self.degree();
        let mut q = vec![0.0; n];
        let mut carry = 0.0;
        for k in (1..=n).rev() {
            carry = self.coeffs[k] + r * carry;
            q[k - 1] = carry;
        }
        Polynomial { coeffs: q }
    }

    /// Divides by `x^2 + p x + q`, dropping the remainder.
    fn divide_quadratic(&self, p: f64, q: f64) -> Polynomial {
        let n = self.degree();
        let mut rem = self.coeffs.clone();
        let mut quot = vec![0.0; n - 1];
        for k in (0..n - 1).rev() {
            let t = rem[k + 2];
            quot[k] = t;
            rem[k + 2] = 0.0;
            rem[k + 1] -= p * t;
            rem[k] -= q * t;
        }
        Polynomial { coeffs: quot }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    /// Eigenvalues of the modified companion matrix are `x / mu`.
    XMode,
    /// Eigenvalues of the modified companion matrix are `1 / (mu x)`.
    RecipXMode,
}

/// Everything needed to synthesize the circuits for one polynomial.
#[derive(Debug, Clone, PartialEq)]
pub struct ScaledSystem {
    pub mode: Mode,
    /// Signed scaling factor.
    pub mu: f64,
    pub a_prime: Vec<f64>,
    /// Number of main qubits, `2^m = n`.
    pub m: usize,
    pub a_max: f64,
}

impl ScaledSystem {
    /// Builds a system directly from scaled data; `a_max` is taken as 1.
    pub fn new(mode: Mode, mu: f64, a_prime: Vec<f64>) -> Result<Self, PolyError> {
        let n = a_prime.len();
        if n < 2 || !n.is_power_of_two() {
            return Err(PolyError::NotPowerOfTwo(n));
        }
        if !(mu.abs() >= 1.0) || !mu.is_finite() {
            return Err(PolyError::InvalidMu(mu));
        }
        if let Some((index, &value)) = a_prime
            .iter()
            .enumerate()
            .find(|(_, a)| !(a.abs() <= 1.0))
        {
            return Err(PolyError::CoefficientOutOfRange { index, value });
        }
        Ok(Self {
            mode,
            mu,
            a_prime,
            m: n.trailing_zeros() as usize,
            a_max: 1.0,
        })
    }

    pub fn n(&self) -> usize {
        self.a_prime.len()
    }

    /// Superdiagonal `1/mu`, last row `-a'`.
    pub fn modified_companion(&self) -> ComplexMatrix {
        let n = self.n();
        let mut c = ComplexMatrix::zeros(n, n);
        for i in 0..n - 1 {
            c[(i, i + 1)] = Complex64::new(1.0 / self.mu, 0.0);
        }
        for j in 0..n {
            c[(n - 1, j)] = Complex64::new(-self.a_prime[j], 0.0);
        }
        c
    }

    /// The polynomial this system was scaled from, recovered up to the factor `a_max`.
    pub fn polynomial(&self) -> Polynomial {
        let n = self.n();
        let mut coeffs = vec![0.0; n + 1];
        match self.mode {
            Mode::XMode => {
                coeffs[..n].copy_from_slice(&self.a_prime);
                coeffs[n] = 1.0 / self.mu;
            }
            Mode::RecipXMode => {
                coeffs[0] = 1.0 / self.mu;
                for i in 1..=n {
                    coeffs[i] = self.a_prime[n - i];
                }
            }
        }
        for c in &mut coeffs {
            *c *= self.a_max;
        }
        Polynomial { coeffs }
    }

    /// Maps an eigenvalue of the modified companion matrix to a root.
    pub fn root_from_eigenvalue(&self, lambda: Complex64) -> Complex64 {
        match self.mode {
            Mode::XMode => lambda * self.mu,
            Mode::RecipXMode => (lambda * self.mu).inv(),
        }
    }

    pub fn eigenvalue_from_root(&self, root: Complex64) -> Complex64 {
        match self.mode {
            Mode::XMode => root / self.mu,
            Mode::RecipXMode => (root * self.mu).inv(),
        }
    }

    /// Normalized Vandermonde eigenvector `(1, y, .., y^(n-1))` of the modified
    /// companion matrix, `y = x` in x-mode and `y = 1/x` in 1/x-mode.
    pub fn eigenvector(&self, root: Complex64) -> Vec<Complex64> {
        let y = match self.mode {
            Mode::XMode => root,
            Mode::RecipXMode => root.inv(),
        };
        let mut v = Vec::with_capacity(self.n());
        let mut pow = Complex64::new(1.0, 0.0);
        for _ in 0..self.n() {
            v.push(pow);
            pow *= y;
        }
        let norm = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        v.iter().map(|z| z / norm).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn poly(c: &[f64]) -> Polynomial {
        Polynomial::new(c.to_vec()).unwrap()
    }

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn normalize_examples() {
        assert_eq!(poly(&[-1.0, 0.0, 1.0]).normalize().unwrap().coeffs(), &[-1.0, 0.0, 1.0]);
        assert_eq!(poly(&[1.0, 0.0, -1.0]).normalize().unwrap().coeffs(), &[-1.0, 0.0, 1.0]);
        assert_eq!(poly(&[2.0, 1.0, 0.0]).normalize().unwrap().coeffs(), &[2.0, 1.0]);
        assert_eq!(poly(&[0.0, 0.0]).normalize(), Err(PolyError::ZeroPolynomial));
        assert_eq!(poly(&[3.0, 0.0]).normalize(), Err(PolyError::ConstantPolynomial));
        assert!(Polynomial::new(vec![1.0, f64::NAN]).is_err());
        assert_eq!(Polynomial::new(vec![]), Err(PolyError::Empty));
    }

    #[test]
    fn padding_examples() {
        let (p, k) = poly(&[-1.0, 0.0, 0.0, 1.0]).pad_to_power_of_two();
        assert_eq!((p.coeffs(), k), (&[0.0, -1.0, 0.0, 0.0, 1.0][..], 1));
        let (p, k) = poly(&[1.0, 2.0, 3.0, 4.0, 5.0]).pad_to_power_of_two();
        assert_eq!((p.degree(), k), (4, 0));
        let (p, k) = poly(&[-2.0, 1.0]).pad_to_power_of_two();
        assert_eq!((p.coeffs(), k), (&[0.0, -2.0, 1.0][..], 1));
    }

    #[test]
    fn mode_selection() {
        assert_eq!(poly(&[-0.25, 0.0, 1.0]).select_mode(), Mode::XMode);
        assert_eq!(poly(&[-4.0, 0.0, 1.0]).select_mode(), Mode::RecipXMode);
        assert_eq!(poly(&[-1.0, 0.0, 1.0]).select_mode(), Mode::XMode);
        assert_eq!(poly(&[0.0, -5.0, 1.0]).select_mode(), Mode::XMode);
    }

    #[test]
    fn scale_examples() {
        let s = poly(&[-0.25, 0.0, 1.0]).scale(Mode::XMode).unwrap();
        assert_eq!((s.mu, s.a_prime.clone(), s.m), (1.0, vec![-0.25, 0.0], 1));

        let s = poly(&[-4.0, 0.0, 1.0]).scale(Mode::RecipXMode).unwrap();
        assert_eq!((s.a_max, s.mu, s.a_prime.clone()), (4.0, -1.0, vec![0.25, 0.0]));

        let s = poly(&[-1.0, 0.0, 1.0]).scale(Mode::XMode).unwrap();
        assert_eq!((s.mu, s.a_prime.clone()), (1.0, vec![-1.0, 0.0]));

        assert!(poly(&[1.0, 1.0, 1.0, 1.0]).scale(Mode::XMode).is_err());
        assert!(poly(&[0.0, 1.0, 1.0]).scale(Mode::RecipXMode).is_err());
    }

    #[test]
    fn scaled_system_recovers_polynomial() {
        for coeffs in [[-4.0, 1.5, 2.0], [0.3, -2.0, 1.0]] {
            let p = poly(&coeffs);
            for mode in [Mode::XMode, Mode::RecipXMode] {
                let back = p.scale(mode).unwrap().polynomial();
                for (a, b) in back.coeffs().iter().zip(p.coeffs()) {
                    assert!((a - b).abs() < 1e-15);
                }
            }
        }
    }

    #[test]
    fn companion_examples() {
        let cm = poly(&[-1.0, 0.0, 1.0]).companion_matrix();
        assert_eq!(cm, DMatrix::from_row_slice(2, 2, &[c(0., 0.), c(1., 0.), c(1., 0.), c(0., 0.)]));
        let cm = poly(&[1.0, 0.0, 1.0]).companion_matrix();
        assert_eq!(cm[(1, 0)], c(-1.0, 0.0));
        let cm = poly(&[-1.0, 0.0, 0.0, 0.0, 1.0]).companion_matrix();
        assert_eq!(cm[(3, 0)], c(1.0, 0.0));
        assert_eq!(cm[(0, 1)], c(1.0, 0.0));
        assert_eq!(cm[(3, 3)], c(0.0, 0.0));
    }

    #[test]
    fn modified_companion_examples() {
        let m = poly(&[-0.25, 0.0, 1.0]).scale(Mode::XMode).unwrap().modified_companion();
        assert_eq!(m, DMatrix::from_row_slice(2, 2, &[c(0., 0.), c(1., 0.), c(0.25, 0.), c(0., 0.)]));
        let m = poly(&[-4.0, 0.0, 1.0]).scale(Mode::RecipXMode).unwrap().modified_companion();
        assert_eq!(m, DMatrix::from_row_slice(2, 2, &[c(0., 0.), c(-1., 0.), c(-0.25, 0.), c(0., 0.)]));
    }

    #[test]
    fn recip_mode_eigen_relation() {
        // x^2 - 4 in 1/x-mode: M v = v / (mu x) for both roots
        let sys = poly(&[-4.0, 0.0, 1.0]).scale(Mode::RecipXMode).unwrap();
        let m = sys.modified_companion();
        for x in [2.0, -2.0] {
            let root = c(x, 0.0);
            let v = nalgebra::DVector::from_vec(sys.eigenvector(root));
            let lambda = sys.eigenvalue_from_root(root);
            assert!((lambda - c(1.0 / (-1.0 * x), 0.0)).norm() < 1e-15);
            assert!((&m * &v - v.map(|z| z * lambda)).norm() < 1e-14);
            assert!((sys.root_from_eigenvalue(lambda) - root).norm() < 1e-14);
        }
    }

    #[test]
    fn evaluate_examples() {
        assert_eq!(poly(&[-1.0, 0.0, 1.0]).evaluate(c(1.0, 0.0)), c(0.0, 0.0));
        assert_eq!(poly(&[-1.0, 0.0, 1.0]).evaluate(c(0.0, 0.0)), c(-1.0, 0.0));
        assert_eq!(poly(&[1.0, 0.0, 1.0]).evaluate(c(0.0, 1.0)), c(0.0, 0.0));
    }

    #[test]
    fn deflate_examples() {
        let q = poly(&[-1.0, 0.0, 1.0]).deflate(c(1.0, 0.0), 1e-9).unwrap();
        assert_eq!(q.coeffs(), &[1.0, 1.0]);
        let q = poly(&[1.0, 0.0, 1.0]).deflate(c(0.0, 1.0), 1e-9).unwrap();
        assert_eq!(q.coeffs(), &[1.0]);
        let q = poly(&[-0.45, -0.4, 1.0]).deflate(c(0.9, 0.0), 1e-9).unwrap();
        assert!((q.coeffs()[0] - 0.5).abs() < 1e-15 && q.coeffs()[1] == 1.0);
    }

    #[test]
    fn deflate_errors() {
        let p = poly(&[-1.0, 0.0, 1.0]);
        assert!(matches!(p.deflate(c(0.5, 0.0), 1e-9), Err(PolyError::NotARoot { .. })));
        let zero = poly(&[0.0]);
        assert!(matches!(
            zero.deflate(c(0.0, 0.0), 1e-9),
            Err(PolyError::DegreeUnderflow { degree: 0, needed: 1 })
        ));
    }

    #[test]
    fn from_real_roots_matches_product() {
        let p = Polynomial::from_real_roots(&[0.9, -0.5]);
        assert!((p.coeffs()[0] + 0.45).abs() < 1e-15);
        assert!((p.coeffs()[1] + 0.4).abs() < 1e-15);
        assert_eq!(p.coeffs()[2], 1.0);
    }

    #[test]
    fn scaled_system_validation() {
        assert!(ScaledSystem::new(Mode::XMode, 1.0, vec![0.1, 0.2, 0.3]).is_err());
        assert!(ScaledSystem::new(Mode::XMode, 0.5, vec![0.1, 0.2]).is_err());
        assert!(ScaledSystem::new(Mode::XMode, 1.0, vec![1.1, 0.2]).is_err());
        let s = ScaledSystem::new(Mode::XMode, -2.0, vec![1.0, -1.0, 0.0, 0.5]).unwrap();
        assert_eq!(s.m, 2);
    }
}
