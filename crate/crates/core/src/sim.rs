//! Time-domain simulation of `G` in positive feedback with the pair.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::Serialize;
use thiserror::Error;

use crate::netfun::{log_grid, DcMotorPlant};
use crate::poly::{PolyError, RationalFunction};
use crate::xcp::SectorNonlinearity;

pub const FIDELITY_PROBES: usize = 50;
pub const FIDELITY_TOLERANCE: f64 = 1e-9;
pub const DEFAULT_TRANSIENT_FRACTION: f64 = 0.5;
pub const DEFAULT_PERTURBATION: f64 = 1e-3;
pub const FIXED_POINT_LEVEL: f64 = 1e-6;
pub const JITTER_LIMIT: f64 = 0.01;
pub const HALF_WAVE_WARNING: f64 = 0.05;
const DIVERGENCE_FACTOR: f64 = 1e6;
const MEASURED_PERIODS: usize = 10;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error("G is proper but not strictly proper; a feedthrough term would create an algebraic loop")]
    AlgebraicLoop,
    #[error("G is improper")]
    Improper,
    #[error("G is the zero function or has constant denominator")]
    Trivial,
    #[error("realization differs from G by {error:.3e} at w = {omega}")]
    RealizationMismatch { omega: f64, error: f64 },
    #[error("invalid step dt = {0}")]
    InvalidStep(f64),
    #[error("invalid horizon t_end = {0}")]
    InvalidHorizon(f64),
    #[error("initial state has length {got}, expected {expected}")]
    DimensionMismatch { got: usize, expected: usize },
    #[error("trajectory diverged at step {step}: |x| = {norm:.3e} exceeds {bound:.3e}")]
    Divergence { step: usize, norm: f64, bound: f64 },
    #[error(transparent)]
    Poly(#[from] PolyError),
}

/// Controllable canonical realization `x' = Ax + Bu`, `y = C_out x`.
#[derive(Debug, Clone, PartialEq)]
pub struct StateSpaceRealization {
    pub a: DMatrix<f64>,
    pub b: DVector<f64>,
    pub c_out: DVector<f64>,
    pub n: usize,
}

impl StateSpaceRealization {
    /// `C_out (sI - A)^-1 B`.
    pub fn transfer(&self, s: Complex64) -> Option<Complex64> {
        let n = self.n;
        let m = DMatrix::from_fn(n, n, |i, j| {
            let diag = if i == j { s } else { Complex64::new(0.0, 0.0) };
            diag - Complex64::new(self.a[(i, j)], 0.0)
        });
        let rhs = self.b.map(|v| Complex64::new(v, 0.0));
        let x = m.lu().solve(&rhs)?;
        Some(
            self.c_out
                .iter()
                .zip(x.iter())
                .map(|(c, x)| x * *c)
                .sum(),
        )
    }

    pub fn eigenvalues(&self) -> Vec<Complex64> {
        self.a.complex_eigenvalues().iter().copied().collect()
    }

    pub fn output(&self, x: &[f64]) -> f64 {
        self.c_out.iter().zip(x).map(|(c, x)| c * x).sum()
    }

    /// Default initial state: a small perturbation of the first state.
    pub fn default_x0(&self, perturbation: f64) -> Vec<f64> {
        let mut x0 = vec![0.0; self.n];
        x0[0] = perturbation;
        x0
    }

    fn companion_row(&self) -> Vec<f64> {
        (0..self.n).map(|j| self.a[(self.n - 1, j)]).collect()
    }
}

pub fn realize(g: &RationalFunction) -> Result<StateSpaceRealization, SimError> {
    match g.relative_degree() {
        None => return Err(SimError::Trivial),
        Some(0) => return Err(SimError::AlgebraicLoop),
        Some(d) if d > 0 => return Err(SimError::Improper),
        _ => {}
    }
    let den = g.denominator();
    let n = den.degree().expect("nonzero denominator");
    let lead = den.leading();

    let mut a = DMatrix::zeros(n, n);
    for i in 0..n - 1 {
        a[(i, i + 1)] = 1.0;
    }
    for j in 0..n {
        a[(n - 1, j)] = -den.coeff(j) / lead;
    }
    let mut b = DVector::zeros(n);
    b[n - 1] = 1.0;
    let c_out = DVector::from_fn(n, |j, _| g.numerator().coeff(j) / lead);

    let ss = StateSpaceRealization { a, b, c_out, n };
    check_fidelity(g, &ss)?;
    Ok(ss)
}

fn check_fidelity(g: &RationalFunction, ss: &StateSpaceRealization) -> Result<(), SimError> {
    let scale = g.poles()?.max_magnitude().max(1e-3);
    for omega in log_grid(scale * 1e-2, scale * 1e2, FIDELITY_PROBES) {
        let s = Complex64::new(0.0, omega);
        let Ok(expected) = g.eval(s) else { continue };
        let got = ss.transfer(s).ok_or(SimError::RealizationMismatch {
            omega,
            error: f64::INFINITY,
        })?;
        let error = (got - expected).norm() / expected.norm().max(f64::MIN_POSITIVE);
        if expected.norm() > 0.0 && error > FIDELITY_TOLERANCE {
            return Err(SimError::RealizationMismatch { omega, error });
        }
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Trajectory {
    pub dt: f64,
    pub states: Vec<Vec<f64>>,
    pub output_dv: Vec<f64>,
    pub input_di: Vec<f64>,
    /// Armature current and shaft speed when a motor model is attached.
    pub motor: Option<Vec<[f64; 2]>>,
    /// Largest component of the initial state.
    pub initial_perturbation: f64,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.output_dv.len()
    }

    pub fn is_empty(&self) -> bool {
        self.output_dv.is_empty()
    }

    pub fn time(&self, k: usize) -> f64 {
        k as f64 * self.dt
    }

    pub fn final_state(&self) -> &[f64] {
        self.states.last().map(Vec::as_slice).unwrap_or(&[])
    }
}

/// `min(0.001 * 2 pi / omega_guess, 0.1 / max |Re eig A|)`.
pub fn default_dt(ss: &StateSpaceRealization, omega_guess: f64) -> f64 {
    let by_frequency = 0.001 * 2.0 * PI / omega_guess;
    let fastest = ss
        .eigenvalues()
        .iter()
        .map(|e| e.re.abs())
        .fold(0.0, f64::max);
    if fastest > 0.0 {
        by_frequency.min(0.1 / fastest)
    } else {
        by_frequency
    }
}

pub fn default_horizon(omega_guess: f64) -> f64 {
    400.0 / omega_guess
}

fn divergence_bound(ss: &StateSpaceRealization, nl: &SectorNonlinearity) -> f64 {
    let sigma_min = ss
        .a
        .clone()
        .singular_values()
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min);
    let forced = if sigma_min > 0.0 {
        nl.current() * ss.b.amax() / sigma_min
    } else {
        f64::INFINITY
    };
    DIVERGENCE_FACTOR * forced.max(1.0)
}

struct Dynamics<'a> {
    row: Vec<f64>,
    c: &'a [f64],
    nl: &'a SectorNonlinearity,
    motor: Option<&'a DcMotorPlant>,
    n: usize,
}

impl Dynamics<'_> {
    /// Companion dynamics of the loop state, then the optional motor states
    /// driven by `-dv`.
    fn eval(&self, x: &[f64], out: &mut [f64]) {
        let n = self.n;
        let y: f64 = self.c.iter().zip(&x[..n]).map(|(c, x)| c * x).sum();
        out[..n - 1].copy_from_slice(&x[1..n]);
        out[n - 1] = self.row.iter().zip(&x[..n]).map(|(a, x)| a * x).sum::<f64>() + self.nl.phi(y);
        if let Some(m) = self.motor {
            let d = m.derivative([x[n], x[n + 1]], -y);
            out[n] = d[0];
            out[n + 1] = d[1];
        }
    }
}

pub fn integrate(
    ss: &StateSpaceRealization,
    nl: &SectorNonlinearity,
    x0: &[f64],
    dt: f64,
    t_end: f64,
) -> Result<Trajectory, SimError> {
    integrate_with_motor(ss, nl, x0, dt, t_end, None)
}

/// Fixed-step RK4 integration. With a motor attached, its states start at
/// rest and are integrated jointly with the loop.
pub fn integrate_with_motor(
    ss: &StateSpaceRealization,
    nl: &SectorNonlinearity,
    x0: &[f64],
    dt: f64,
    t_end: f64,
    motor: Option<&DcMotorPlant>,
) -> Result<Trajectory, SimError> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(SimError::InvalidStep(dt));
    }
    if !(t_end >= 0.0 && t_end.is_finite()) {
        return Err(SimError::InvalidHorizon(t_end));
    }
    if x0.len() != ss.n {
        return Err(SimError::DimensionMismatch {
            got: x0.len(),
            expected: ss.n,
        });
    }
    let n = ss.n;
    let c: Vec<f64> = ss.c_out.iter().copied().collect();
    let dynamics = Dynamics {
        row: ss.companion_row(),
        c: &c,
        nl,
        motor,
        n,
    };
    let dim = n + if motor.is_some() { 2 } else { 0 };
    let bound = divergence_bound(ss, nl);
    let steps = (t_end / dt).round() as usize;

    let mut x = x0.to_vec();
    x.resize(dim, 0.0);
    let mut traj = Trajectory {
        dt,
        states: Vec::with_capacity(steps + 1),
        output_dv: Vec::with_capacity(steps + 1),
        input_di: Vec::with_capacity(steps + 1),
        motor: motor.map(|_| Vec::with_capacity(steps + 1)),
        initial_perturbation: x0.iter().fold(0.0, |m, v| m.max(v.abs())),
    };
    let record = |traj: &mut Trajectory, x: &[f64]| {
        let y = ss.output(&x[..n]);
        traj.states.push(x[..n].to_vec());
        traj.output_dv.push(y);
        traj.input_di.push(nl.phi(y));
        if let Some(m) = traj.motor.as_mut() {
            m.push([x[n], x[n + 1]]);
        }
    };
    record(&mut traj, &x);

    let (mut k1, mut k2, mut k3, mut k4, mut tmp) = (
        vec![0.0; dim],
        vec![0.0; dim],
        vec![0.0; dim],
        vec![0.0; dim],
        vec![0.0; dim],
    );
    for step in 1..=steps {
        dynamics.eval(&x, &mut k1);
        for i in 0..dim {
            tmp[i] = x[i] + 0.5 * dt * k1[i];
        }
        dynamics.eval(&tmp, &mut k2);
        for i in 0..dim {
            tmp[i] = x[i] + 0.5 * dt * k2[i];
        }
        dynamics.eval(&tmp, &mut k3);
        for i in 0..dim {
            tmp[i] = x[i] + dt * k3[i];
        }
        dynamics.eval(&tmp, &mut k4);
        for i in 0..dim {
            x[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
        let norm = x[..n].iter().map(|v| v * v).sum::<f64>().sqrt();
        if !norm.is_finite() || norm > bound {
            return Err(SimError::Divergence { step, norm, bound });
        }
        record(&mut traj, &x);
    }
    Ok(traj)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Classification {
    FixedPoint,
    LimitCycle,
    Undetermined,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OscillationMetrics {
    /// rad/s
    pub frequency: f64,
    /// Mean peak `|dv|` over the measured periods.
    pub amplitude: f64,
    pub period_jitter: f64,
    pub converged: bool,
    pub classification: Classification,
    /// `max |dv(t) + dv(t + T/2)| / amplitude` over the last period.
    pub half_wave_asymmetry: Option<f64>,
    pub warnings: Vec<String>,
}

fn upcrossings(dv: &[f64], start: usize, dt: f64) -> Vec<f64> {
    let mut times = Vec::new();
    for k in start.max(1)..dv.len() {
        let (a, b) = (dv[k - 1], dv[k]);
        if a < 0.0 && b >= 0.0 {
            let frac = a / (a - b);
            times.push((k as f64 - 1.0 + frac) * dt);
        }
    }
    times
}

fn interpolate(dv: &[f64], dt: f64, t: f64) -> Option<f64> {
    let pos = t / dt;
    let k = pos.floor() as usize;
    if k + 1 >= dv.len() {
        return None;
    }
    let frac = pos - k as f64;
    Some(dv[k] * (1.0 - frac) + dv[k + 1] * frac)
}

pub fn measure(traj: &Trajectory, transient_fraction: f64) -> OscillationMetrics {
    let dv = &traj.output_dv;
    let start = ((dv.len() as f64) * transient_fraction.clamp(0.0, 1.0)) as usize;
    let tail = &dv[start.min(dv.len())..];
    let peak = tail.iter().fold(0.0f64, |m, v| m.max(v.abs()));

    let undetermined = |amplitude: f64, warnings: Vec<String>| OscillationMetrics {
        frequency: 0.0,
        amplitude,
        period_jitter: f64::NAN,
        converged: false,
        classification: Classification::Undetermined,
        half_wave_asymmetry: None,
        warnings,
    };

    if tail.is_empty() {
        return undetermined(0.0, vec!["no samples after the transient".into()]);
    }
    if peak < FIXED_POINT_LEVEL {
        return OscillationMetrics {
            frequency: 0.0,
            amplitude: peak,
            period_jitter: 0.0,
            converged: true,
            classification: Classification::FixedPoint,
            half_wave_asymmetry: None,
            warnings: Vec::new(),
        };
    }

    let crossings = upcrossings(dv, start, traj.dt);
    if crossings.len() < MEASURED_PERIODS + 2 {
        return undetermined(
            peak,
            vec![format!("only {} upcrossings after the transient", crossings.len())],
        );
    }
    let last = &crossings[crossings.len() - MEASURED_PERIODS - 1..];
    let periods: Vec<f64> = last.windows(2).map(|w| w[1] - w[0]).collect();
    let mean = periods.iter().sum::<f64>() / periods.len() as f64;
    let var = periods.iter().map(|p| (p - mean).powi(2)).sum::<f64>() / periods.len() as f64;
    let jitter = var.sqrt() / mean;

    let peaks: Vec<f64> = last
        .windows(2)
        .map(|w| {
            let (a, b) = ((w[0] / traj.dt).ceil() as usize, (w[1] / traj.dt) as usize);
            dv[a..=b.min(dv.len() - 1)]
                .iter()
                .fold(0.0f64, |m, v| m.max(v.abs()))
        })
        .collect();
    let amplitude = peaks.iter().sum::<f64>() / peaks.len() as f64;

    let t0 = last[MEASURED_PERIODS - 1];
    let samples = 200;
    let asymmetry = (0..samples)
        .filter_map(|k| {
            let t = t0 + mean * k as f64 / samples as f64;
            Some((interpolate(dv, traj.dt, t)? + interpolate(dv, traj.dt, t + mean / 2.0)?).abs())
        })
        .fold(0.0f64, f64::max)
        / amplitude;

    let mut warnings = Vec::new();
    if asymmetry > HALF_WAVE_WARNING {
        warnings.push(format!("half-wave asymmetry {:.1}% of amplitude", 100.0 * asymmetry));
    }
    let converged = jitter < JITTER_LIMIT;
    if !converged {
        warnings.push(format!("period jitter {jitter:.3e} above {JITTER_LIMIT}"));
    }
    let classification = if converged && amplitude > 10.0 * traj.initial_perturbation {
        Classification::LimitCycle
    } else {
        Classification::Undetermined
    };

    OscillationMetrics {
        frequency: 2.0 * PI / mean,
        amplitude,
        period_jitter: jitter,
        converged,
        classification,
        half_wave_asymmetry: Some(asymmetry),
        warnings,
    }
}

/// `A + B phi'(C_out x) C_out`.
pub fn jacobian_at(ss: &StateSpaceRealization, nl: &SectorNonlinearity, x: &[f64]) -> DMatrix<f64> {
    let slope = nl.phi_derivative(ss.output(x));
    &ss.a + &ss.b * ss.c_out.transpose() * slope
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SplitWitness {
    pub checked: usize,
    /// Indices where the count of eigenvalues with `Re > -lambda` is not 2.
    pub violations: Vec<usize>,
}

impl SplitWitness {
    pub fn holds(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Checks that the linearization has exactly two eigenvalues with
/// `Re > -lambda` at every `stride`-th trajectory point.
pub fn eigen_split_witness(
    ss: &StateSpaceRealization,
    nl: &SectorNonlinearity,
    traj: &Trajectory,
    lambda: f64,
    stride: usize,
) -> SplitWitness {
    let mut checked = 0;
    let mut violations = Vec::new();
    for k in (0..traj.states.len()).step_by(stride.max(1)) {
        let eig = jacobian_at(ss, nl, &traj.states[k]).complex_eigenvalues();
        checked += 1;
        if eig.iter().filter(|e| e.re > -lambda).count() != 2 {
            violations.push(k);
        }
    }
    SplitWitness {
        checked,
        violations,
    }
}
