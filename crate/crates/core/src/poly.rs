//! Real-coefficient polynomials and rational functions in the Laplace variable.
//!
//! Coefficients are stored in ascending degree order everywhere in the crate:
//! `[a0, a1, a2]` is `a0 + a1*s + a2*s^2`.

use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Largest degree accepted by the root finder.
pub const MAX_DEGREE: usize = 64;

/// Relative residual accepted for a root, `|p(z)| / sum |a_k| |z|^k`.
pub const ROOT_TOLERANCE: f64 = 1e-10;

/// Roots closer than this are merged into one root with summed multiplicity.
pub const ROOT_MERGE_DISTANCE: f64 = 1e-7;

/// Relative size of `|den(s)|` below which an evaluation is refused.
pub const POLE_PROXIMITY: f64 = 1e-12;

const ABERTH_MAX_ITERATIONS: usize = 500;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PolyError {
    #[error("polynomial is identically zero")]
    ZeroPolynomial,
    #[error("polynomial has degree 0 and no roots")]
    Degenerate,
    #[error("polynomial degree {0} exceeds the supported maximum of {MAX_DEGREE}")]
    DegreeTooLarge(usize),
    #[error("evaluation point {s} lies on or near a pole (|den| = {magnitude:.3e})")]
    PoleProximity { s: Complex64, magnitude: f64 },
    #[error("rational function has an identically zero numerator and cannot be inverted")]
    ZeroFunction,
    #[error("rational function denominator is identically zero")]
    ZeroDenominator,
    #[error("feedback interconnection has an identically zero denominator")]
    DegenerateLoop,
}

/// Polynomial with real coefficients in ascending degree, trimmed so the
/// leading coefficient is nonzero. The zero polynomial has no coefficients.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(from = "Vec<f64>", into = "Vec<f64>")]
pub struct Polynomial {
    coeffs: Vec<f64>,
}

impl From<Vec<f64>> for Polynomial {
    fn from(coeffs: Vec<f64>) -> Self {
        Polynomial::new(coeffs)
    }
}

impl From<Polynomial> for Vec<f64> {
    fn from(p: Polynomial) -> Self {
        p.coeffs
    }
}

impl Polynomial {
    pub fn new(mut coeffs: Vec<f64>) -> Self {
        while coeffs.last() == Some(&0.0) {
            coeffs.pop();
        }
        Polynomial { coeffs }
    }

    pub fn zero() -> Self {
        Polynomial { coeffs: Vec::new() }
    }

    pub fn one() -> Self {
        Polynomial::constant(1.0)
    }

    pub fn constant(c: f64) -> Self {
        Polynomial::new(vec![c])
    }

    /// The monomial `s`.
    pub fn s() -> Self {
        Polynomial::new(vec![0.0, 1.0])
    }

    /// Monic polynomial with the given roots. Complex roots must come in
    /// conjugate pairs for the result to be real; imaginary residue is dropped.
    pub fn from_roots(roots: &[Complex64]) -> Self {
        let mut acc = vec![Complex64::new(1.0, 0.0)];
        for &r in roots {
            let mut next = vec![Complex64::new(0.0, 0.0); acc.len() + 1];
            for (k, &a) in acc.iter().enumerate() {
                next[k + 1] += a;
                next[k] -= a * r;
            }
            acc = next;
        }
        Polynomial::new(acc.into_iter().map(|c| c.re).collect())
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    /// Coefficient of `s^k`, zero beyond the degree.
    pub fn coeff(&self, k: usize) -> f64 {
        self.coeffs.get(k).copied().unwrap_or(0.0)
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    /// `None` for the zero polynomial.
    pub fn degree(&self) -> Option<usize> {
        self.coeffs.len().checked_sub(1)
    }

    pub fn leading(&self) -> f64 {
        self.coeffs.last().copied().unwrap_or(0.0)
    }

    /// Largest coefficient magnitude.
    pub fn scale(&self) -> f64 {
        self.coeffs.iter().fold(0.0, |m, c| m.max(c.abs()))
    }

    pub fn scaled(&self, k: f64) -> Polynomial {
        Polynomial::new(self.coeffs.iter().map(|c| c * k).collect())
    }

    pub fn eval(&self, s: Complex64) -> Complex64 {
        self.coeffs
            .iter()
            .rev()
            .fold(Complex64::new(0.0, 0.0), |acc, &c| acc * s + c)
    }

    pub fn eval_real(&self, x: f64) -> f64 {
        self.coeffs.iter().rev().fold(0.0, |acc, &c| acc * x + c)
    }

    /// `sum |a_k| |s|^k`, the natural magnitude scale of an evaluation at `s`.
    pub fn eval_scale(&self, s: Complex64) -> f64 {
        let r = s.norm();
        self.coeffs.iter().rev().fold(0.0, |acc, &c| acc * r + c.abs())
    }

    pub fn derivative(&self) -> Polynomial {
        Polynomial::new(
            self.coeffs
                .iter()
                .enumerate()
                .skip(1)
                .map(|(k, &c)| k as f64 * c)
                .collect(),
        )
    }

    /// Returns `q` with `q(s) = p(s - lambda)`.
    pub fn shift(&self, lambda: f64) -> Polynomial {
        if lambda == 0.0 {
            return self.clone();
        }
        // Horner in the basis (s - lambda): q = (...(a_n (s-l) + a_{n-1})(s-l) + ...)
        let mut q: Vec<f64> = Vec::with_capacity(self.coeffs.len());
        for &a in self.coeffs.iter().rev() {
            // q <- q * (s - lambda) + a
            let mut next = vec![0.0; q.len() + 1];
            for (k, &c) in q.iter().enumerate() {
                next[k + 1] += c;
                next[k] -= lambda * c;
            }
            next[0] += a;
            q = next;
        }
        Polynomial::new(q)
    }

    /// All complex roots with multiplicities and residual diagnostics.
    pub fn roots(&self) -> Result<RootSet, PolyError> {
        let degree = self.degree().ok_or(PolyError::ZeroPolynomial)?;
        if degree == 0 {
            return Err(PolyError::Degenerate);
        }
        if degree > MAX_DEGREE {
            return Err(PolyError::DegreeTooLarge(degree));
        }

        let zeros_at_origin = self.coeffs.iter().take_while(|&&c| c == 0.0).count();
        let reduced = &self.coeffs[zeros_at_origin..];
        let mut values = vec![Complex64::new(0.0, 0.0); zeros_at_origin];
        values.extend(find_roots(reduced));

        let mut values = symmetrize(values);
        values.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));
        let roots = merge(values)
            .into_iter()
            .map(|(value, multiplicity)| Root {
                value,
                multiplicity,
                residual: self.eval(value).norm(),
            })
            .collect();
        Ok(RootSet { roots })
    }
}

/// Roots of a polynomial whose constant term is nonzero.
fn find_roots(coeffs: &[f64]) -> Vec<Complex64> {
    let n = coeffs.len() - 1;
    match n {
        0 => Vec::new(),
        1 => vec![Complex64::new(-coeffs[0] / coeffs[1], 0.0)],
        _ => {
            let complex: Vec<Complex64> = coeffs.iter().map(|&c| Complex64::new(c, 0.0)).collect();
            aberth(&complex).unwrap_or_else(|| companion_roots(&complex))
        }
    }
}

/// Roots of a complex-coefficient polynomial (ascending order), repeated
/// according to multiplicity. Used where a real polynomial is offset by a
/// complex constant, e.g. `n(s) - c d(s)`.
pub fn complex_roots(coeffs: &[Complex64]) -> Result<Vec<Complex64>, PolyError> {
    let len = coeffs.len() - coeffs.iter().rev().take_while(|c| c.norm() == 0.0).count();
    let coeffs = &coeffs[..len];
    let degree = coeffs.len().checked_sub(1).ok_or(PolyError::ZeroPolynomial)?;
    if degree == 0 {
        return Err(PolyError::Degenerate);
    }
    if degree > MAX_DEGREE {
        return Err(PolyError::DegreeTooLarge(degree));
    }
    let zeros_at_origin = coeffs.iter().take_while(|c| c.norm() == 0.0).count();
    let reduced = &coeffs[zeros_at_origin..];
    let mut out = vec![Complex64::new(0.0, 0.0); zeros_at_origin];
    match reduced.len() - 1 {
        0 => {}
        1 => out.push(-reduced[0] / reduced[1]),
        _ => out.extend(aberth(reduced).unwrap_or_else(|| companion_roots(reduced))),
    }
    Ok(out)
}

fn horner_with_derivative(coeffs: &[Complex64], z: Complex64) -> (Complex64, Complex64) {
    let mut p = Complex64::new(0.0, 0.0);
    let mut dp = Complex64::new(0.0, 0.0);
    for &c in coeffs.iter().rev() {
        dp = dp * z + p;
        p = p * z + c;
    }
    (p, dp)
}

fn eval_scale(coeffs: &[Complex64], z: Complex64) -> f64 {
    let r = z.norm();
    coeffs.iter().rev().fold(0.0, |acc, c| acc * r + c.norm())
}

/// Aberth–Ehrlich simultaneous iteration. Returns `None` when the iteration
/// fails to converge or produces non-finite values.
pub(crate) fn aberth(coeffs: &[Complex64]) -> Option<Vec<Complex64>> {
    let n = coeffs.len() - 1;
    let lead = coeffs[n];
    let monic: Vec<Complex64> = coeffs.iter().map(|c| c / lead).collect();

    // Initial guesses on a circle about the root centroid, with radius the
    // geometric mean of the root magnitudes relative to that centroid.
    let centroid = -monic[n - 1] / n as f64;
    let radius = {
        let (p0, _) = horner_with_derivative(&monic, centroid);
        let r = p0.norm().powf(1.0 / n as f64);
        if r > 0.0 && r.is_finite() {
            r
        } else {
            monic.iter().fold(0.0f64, |m, c| m.max(c.norm())).max(1.0)
        }
    };
    let mut z: Vec<Complex64> = (0..n)
        .map(|k| {
            let theta = 2.0 * std::f64::consts::PI * k as f64 / n as f64 + 0.4;
            centroid + Complex64::from_polar(radius, theta)
        })
        .collect();

    let mut done = vec![false; n];
    for _ in 0..ABERTH_MAX_ITERATIONS {
        for i in 0..n {
            if done[i] {
                continue;
            }
            let (p, dp) = horner_with_derivative(&monic, z[i]);
            if p.norm() <= f64::EPSILON * eval_scale(&monic, z[i]) {
                done[i] = true;
                continue;
            }
            let ratio = p / dp;
            let repulsion: Complex64 = (0..n)
                .filter(|&j| j != i)
                .map(|j| (z[i] - z[j]).inv())
                .sum();
            let w = ratio / (Complex64::new(1.0, 0.0) - ratio * repulsion);
            if !w.re.is_finite() || !w.im.is_finite() {
                return None;
            }
            z[i] -= w;
            if w.norm() <= 4.0 * f64::EPSILON * z[i].norm().max(f64::MIN_POSITIVE) {
                done[i] = true;
            }
        }
        if done.iter().all(|&d| d) {
            break;
        }
    }

    let accepted = z.iter().all(|&zi| {
        let (p, _) = horner_with_derivative(&monic, zi);
        zi.re.is_finite()
            && zi.im.is_finite()
            && p.norm() <= ROOT_TOLERANCE * eval_scale(&monic, zi).max(f64::MIN_POSITIVE)
    });
    accepted.then_some(z)
}

/// Eigenvalues of the companion matrix of the (monic-normalized) polynomial.
pub(crate) fn companion_roots(coeffs: &[Complex64]) -> Vec<Complex64> {
    let n = coeffs.len() - 1;
    let lead = coeffs[n];
    let mut m = DMatrix::<Complex64>::zeros(n, n);
    for i in 1..n {
        m[(i, i - 1)] = Complex64::new(1.0, 0.0);
    }
    for i in 0..n {
        m[(i, n - 1)] = -coeffs[i] / lead;
    }
    let schur = nalgebra::Schur::new(m);
    let (_, t) = schur.unpack();
    (0..n).map(|i| t[(i, i)]).collect()
}

/// Snaps near-real roots onto the real axis and makes complex pairs exact
/// conjugates of each other.
fn symmetrize(mut values: Vec<Complex64>) -> Vec<Complex64> {
    for v in values.iter_mut() {
        if v.im.abs() <= 1e-12 * v.norm().max(1.0) {
            v.im = 0.0;
        }
    }
    let mut paired = vec![false; values.len()];
    for i in 0..values.len() {
        if paired[i] || values[i].im <= 0.0 {
            continue;
        }
        let target = values[i].conj();
        let partner = (0..values.len())
            .filter(|&j| !paired[j] && j != i && values[j].im < 0.0)
            .min_by(|&a, &b| {
                (values[a] - target)
                    .norm()
                    .total_cmp(&(values[b] - target).norm())
            });
        if let Some(j) = partner {
            let avg = (values[i] + values[j].conj()) * 0.5;
            values[i] = avg;
            values[j] = avg.conj();
            paired[i] = true;
            paired[j] = true;
        }
    }
    values
}

fn merge(values: Vec<Complex64>) -> Vec<(Complex64, usize)> {
    let mut clusters: Vec<(Complex64, usize)> = Vec::new();
    for v in values {
        match clusters
            .iter_mut()
            .find(|(c, _)| (*c - v).norm() <= ROOT_MERGE_DISTANCE)
        {
            Some((c, m)) => {
                *c = (*c * *m as f64 + v) / (*m as f64 + 1.0);
                *m += 1;
            }
            None => clusters.push((v, 1)),
        }
    }
    clusters
}

impl fmt::Display for Polynomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_zero() {
            return write!(f, "0");
        }
        let mut first = true;
        for (k, &c) in self.coeffs.iter().enumerate().rev() {
            if c == 0.0 {
                continue;
            }
            if !first {
                write!(f, " {} ", if c < 0.0 { '-' } else { '+' })?;
            } else if c < 0.0 {
                write!(f, "-")?;
            }
            let a = c.abs();
            match k {
                0 => write!(f, "{a}")?,
                1 => write!(f, "{a}s")?,
                _ => write!(f, "{a}s^{k}")?,
            }
            first = false;
        }
        Ok(())
    }
}

impl Add for &Polynomial {
    type Output = Polynomial;
    fn add(self, rhs: &Polynomial) -> Polynomial {
        let n = self.coeffs.len().max(rhs.coeffs.len());
        Polynomial::new((0..n).map(|k| self.coeff(k) + rhs.coeff(k)).collect())
    }
}

impl Sub for &Polynomial {
    type Output = Polynomial;
    fn sub(self, rhs: &Polynomial) -> Polynomial {
        let n = self.coeffs.len().max(rhs.coeffs.len());
        Polynomial::new((0..n).map(|k| self.coeff(k) - rhs.coeff(k)).collect())
    }
}

impl Mul for &Polynomial {
    type Output = Polynomial;
    fn mul(self, rhs: &Polynomial) -> Polynomial {
        if self.is_zero() || rhs.is_zero() {
            return Polynomial::zero();
        }
        let mut out = vec![0.0; self.coeffs.len() + rhs.coeffs.len() - 1];
        for (i, &a) in self.coeffs.iter().enumerate() {
            for (j, &b) in rhs.coeffs.iter().enumerate() {
                out[i + j] += a * b;
            }
        }
        Polynomial::new(out)
    }
}

impl Neg for &Polynomial {
    type Output = Polynomial;
    fn neg(self) -> Polynomial {
        self.scaled(-1.0)
    }
}

macro_rules! forward_owned_binop {
    ($tr:ident, $method:ident) => {
        impl $tr for Polynomial {
            type Output = Polynomial;
            fn $method(self, rhs: Polynomial) -> Polynomial {
                (&self).$method(&rhs)
            }
        }
    };
}
forward_owned_binop!(Add, add);
forward_owned_binop!(Sub, sub);
forward_owned_binop!(Mul, mul);

/// A root with its multiplicity and the evaluation magnitude at the root.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Root {
    pub value: Complex64,
    pub multiplicity: usize,
    pub residual: f64,
}

/// Roots of a polynomial, sorted by real then imaginary part.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RootSet {
    roots: Vec<Root>,
}

impl RootSet {
    pub fn empty() -> Self {
        RootSet { roots: Vec::new() }
    }

    pub fn iter(&self) -> impl Iterator<Item = &Root> {
        self.roots.iter()
    }

    /// Number of distinct roots.
    pub fn distinct(&self) -> usize {
        self.roots.len()
    }

    /// Sum of multiplicities; equals the polynomial degree.
    pub fn total(&self) -> usize {
        self.roots.iter().map(|r| r.multiplicity).sum()
    }

    /// Root values repeated according to multiplicity.
    pub fn expanded(&self) -> Vec<Complex64> {
        self.roots
            .iter()
            .flat_map(|r| std::iter::repeat(r.value).take(r.multiplicity))
            .collect()
    }

    /// Number of roots (with multiplicity) satisfying `pred`.
    pub fn count<F: Fn(Complex64) -> bool>(&self, pred: F) -> usize {
        self.roots
            .iter()
            .filter(|r| pred(r.value))
            .map(|r| r.multiplicity)
            .sum()
    }

    pub fn max_magnitude(&self) -> f64 {
        self.roots.iter().fold(0.0, |m, r| m.max(r.value.norm()))
    }

    pub fn max_real(&self) -> Option<f64> {
        self.roots.iter().map(|r| r.value.re).reduce(f64::max)
    }
}

/// Roots of `p`, or an empty set when `p` is a nonzero constant.
pub fn roots_or_empty(p: &Polynomial) -> Result<RootSet, PolyError> {
    match p.roots() {
        Err(PolyError::Degenerate) => Ok(RootSet::empty()),
        other => other,
    }
}

/// Ratio of two polynomials. No cancellation of common factors is performed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RationalFunction {
    numerator: Polynomial,
    denominator: Polynomial,
}

impl RationalFunction {
    pub fn new(numerator: Polynomial, denominator: Polynomial) -> Result<Self, PolyError> {
        if denominator.is_zero() {
            return Err(PolyError::ZeroDenominator);
        }
        Ok(RationalFunction {
            numerator,
            denominator,
        })
    }

    pub fn from_coeffs(num: &[f64], den: &[f64]) -> Result<Self, PolyError> {
        RationalFunction::new(Polynomial::new(num.to_vec()), Polynomial::new(den.to_vec()))
    }

    pub fn constant(c: f64) -> Self {
        RationalFunction {
            numerator: Polynomial::constant(c),
            denominator: Polynomial::one(),
        }
    }

    pub fn numerator(&self) -> &Polynomial {
        &self.numerator
    }

    pub fn denominator(&self) -> &Polynomial {
        &self.denominator
    }

    /// Numerator degree minus denominator degree; `None` for the zero function.
    pub fn relative_degree(&self) -> Option<i64> {
        let n = self.numerator.degree()? as i64;
        let d = self.denominator.degree()? as i64;
        Some(n - d)
    }

    pub fn is_proper(&self) -> bool {
        self.relative_degree().is_none_or(|d| d <= 0)
    }

    pub fn is_strictly_proper(&self) -> bool {
        self.relative_degree().is_none_or(|d| d < 0)
    }

    /// Ratio of leading coefficients, the gain of the asymptote `c * s^d`.
    pub fn leading_ratio(&self) -> f64 {
        self.numerator.leading() / self.denominator.leading()
    }

    /// `numerator(s) / denominator(s)`, refusing points on or near a pole.
    pub fn eval(&self, s: Complex64) -> Result<Complex64, PolyError> {
        let den = self.denominator.eval(s);
        let magnitude = den.norm();
        if magnitude <= POLE_PROXIMITY * self.denominator.eval_scale(s) {
            return Err(PolyError::PoleProximity { s, magnitude });
        }
        Ok(self.numerator.eval(s) / den)
    }

    /// Evaluation without the pole-proximity check.
    pub fn eval_unchecked(&self, s: Complex64) -> Complex64 {
        self.numerator.eval(s) / self.denominator.eval(s)
    }

    pub fn inverse(&self) -> Result<RationalFunction, PolyError> {
        if self.numerator.is_zero() {
            return Err(PolyError::ZeroFunction);
        }
        Ok(RationalFunction {
            numerator: self.denominator.clone(),
            denominator: self.numerator.clone(),
        })
    }

    pub fn add(&self, other: &RationalFunction) -> RationalFunction {
        RationalFunction {
            numerator: &(&self.numerator * &other.denominator)
                + &(&other.numerator * &self.denominator),
            denominator: &self.denominator * &other.denominator,
        }
    }

    pub fn mul(&self, other: &RationalFunction) -> RationalFunction {
        RationalFunction {
            numerator: &self.numerator * &other.numerator,
            denominator: &self.denominator * &other.denominator,
        }
    }

    pub fn scale(&self, k: f64) -> RationalFunction {
        RationalFunction {
            numerator: self.numerator.scaled(k),
            denominator: self.denominator.clone(),
        }
    }

    /// `forward / (1 + forward * loop_gain)` as one rational function with
    /// numerator `n_f d_l` and denominator `d_f d_l + n_f n_l`.
    pub fn feedback(&self, loop_gain: &RationalFunction) -> Result<RationalFunction, PolyError> {
        let denominator = &(&self.denominator * &loop_gain.denominator)
            + &(&self.numerator * &loop_gain.numerator);
        if denominator.is_zero() {
            return Err(PolyError::DegenerateLoop);
        }
        Ok(RationalFunction {
            numerator: &self.numerator * &loop_gain.denominator,
            denominator,
        })
    }

    /// Returns `g` with `g(s) = f(s - lambda)`.
    pub fn shift(&self, lambda: f64) -> RationalFunction {
        RationalFunction {
            numerator: self.numerator.shift(lambda),
            denominator: self.denominator.shift(lambda),
        }
    }

    pub fn poles(&self) -> Result<RootSet, PolyError> {
        roots_or_empty(&self.denominator)
    }

    pub fn zeros(&self) -> Result<RootSet, PolyError> {
        roots_or_empty(&self.numerator)
    }

    /// Value at `s = 0`; `None` when the origin is a pole.
    pub fn dc_gain(&self) -> Option<f64> {
        let den = self.denominator.coeff(0);
        if den == 0.0 {
            return None;
        }
        Some(self.numerator.coeff(0) / den)
    }

    /// Zeros that coincide with a pole within `tolerance`. Never cancelled,
    /// only reported.
    pub fn shared_roots(&self, tolerance: f64) -> Result<Vec<Complex64>, PolyError> {
        let zeros = self.zeros()?;
        let poles = self.poles()?;
        Ok(zeros
            .iter()
            .filter(|z| poles.iter().any(|p| (p.value - z.value).norm() <= tolerance))
            .map(|z| z.value)
            .collect())
    }
}

impl fmt::Display for RationalFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}) / ({})", self.numerator, self.denominator)
    }
}
