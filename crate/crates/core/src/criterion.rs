//! Shifted Nyquist curves and the graphical 2-dominance test.
//!
//! All curves are images of the line `Re s = -lambda`, traversed with
//! increasing `w` in `s = -lambda + jw`. Closed by the arc at infinity this
//! is the usual clockwise D-contour around the half-plane `Re s > -lambda`,
//! and encirclements are counted clockwise-positive.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::Serialize;
use thiserror::Error;

use crate::netfun::{log_grid, LoopFunction, RcController, RlcController};
use crate::poly::{complex_roots, roots_or_empty, PolyError, RationalFunction};
use crate::xcp::SectorNonlinearity;

/// Roots closer than this to the contour are treated as lying on it.
pub const CONTOUR_TOLERANCE: f64 = 1e-6;

/// Largest phase change between adjacent samples about a tracked center.
pub const MAX_PHASE_STEP: f64 = PI / 6.0;

/// Distance from an integer beyond which a winding count is rejected.
pub const WINDING_ROUNDING: f64 = 0.05;

/// Samples closer than this to the winding center are rejected.
pub const CENTER_CLEARANCE: f64 = 1e-9;

pub const DEFAULT_BASE_POINTS: usize = 2048;
pub const DEFAULT_OMEGA_FACTOR: f64 = 100.0;

const MAX_REFINED_POINTS: usize = 400_000;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CriterionError {
    #[error("pole at {root} lies on the contour Re s = -{lambda}")]
    PoleOnContour { root: Complex64, lambda: f64 },
    #[error("root at {root} lies on the contour Re s = -{lambda}")]
    RootOnContour { root: Complex64, lambda: f64 },
    #[error("curve passes within {distance:.3e} of the winding center {center} at w = {omega}")]
    CenterOnCurve {
        center: Complex64,
        omega: f64,
        distance: f64,
    },
    #[error("winding about {center} is ambiguous: {reason}")]
    AmbiguousWinding { center: Complex64, reason: String },
    #[error("curve tail tends to {limit}, inside the disk of diameter {slope}")]
    TailUnbounded { limit: Complex64, slope: f64 },
    #[error("sampled winding {sampled} disagrees with root-count encirclements {rootcount}")]
    OracleMismatch { sampled: i64, rootcount: i64 },
    #[error("cannot sample the zero function")]
    ZeroFunction,
    #[error("invalid rate lambda = {0}")]
    InvalidRate(f64),
    #[error("invalid slope K = {0}")]
    InvalidSlope(f64),
    #[error("condition {condition}: {source}")]
    Condition {
        condition: u8,
        source: Box<CriterionError>,
    },
    #[error(transparent)]
    Poly(#[from] PolyError),
}

impl CriterionError {
    fn in_condition(self, condition: u8) -> CriterionError {
        CriterionError::Condition {
            condition,
            source: Box::new(self),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SamplingOptions {
    /// Half-width of the sampled frequency band. Defaults to
    /// [`DEFAULT_OMEGA_FACTOR`] times the largest shifted root magnitude.
    pub omega_max: Option<f64>,
    /// Samples before refinement, split evenly between both half-axes.
    pub base_points: usize,
}

impl Default for SamplingOptions {
    fn default() -> Self {
        SamplingOptions {
            omega_max: None,
            base_points: DEFAULT_BASE_POINTS,
        }
    }
}

/// Samples of `F(-lambda + jw)` for `w` in `[-omega_max, omega_max]`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NyquistCurve {
    pub lambda: f64,
    /// Increasing and symmetric about zero.
    pub frequencies: Vec<f64>,
    pub values: Vec<Complex64>,
    /// Numerator degree minus denominator degree of `F`.
    pub relative_degree: i64,
    /// Leading-coefficient ratio; `F ~ leading_ratio * s^relative_degree`.
    pub leading_ratio: f64,
}

impl NyquistCurve {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn omega_max(&self) -> f64 {
        self.frequencies.last().copied().unwrap_or(0.0)
    }

    /// Largest `|value(-w) - conj(value(w))|`.
    pub fn conjugate_asymmetry(&self) -> f64 {
        let n = self.values.len();
        (0..n / 2 + 1)
            .map(|k| (self.values[n - 1 - k] - self.values[k].conj()).norm())
            .fold(0.0, f64::max)
    }

    pub fn iter(&self) -> impl Iterator<Item = (f64, Complex64)> + '_ {
        self.frequencies.iter().copied().zip(self.values.iter().copied())
    }
}

fn check_contour_poles(f: &RationalFunction, lambda: f64) -> Result<(), CriterionError> {
    let poles = roots_or_empty(f.denominator())?;
    if let Some(p) = poles
        .iter()
        .find(|p| (p.value.re + lambda).abs() <= CONTOUR_TOLERANCE)
    {
        return Err(CriterionError::PoleOnContour {
            root: p.value,
            lambda,
        });
    }
    Ok(())
}

pub fn sample_shifted(
    f: &RationalFunction,
    lambda: f64,
    options: &SamplingOptions,
) -> Result<NyquistCurve, CriterionError> {
    sample_shifted_tracking(f, lambda, options, &[Complex64::new(0.0, 0.0)])
}

/// Samples the shifted curve, refining until adjacent samples differ by less
/// than [`MAX_PHASE_STEP`] in phase about every center in `centers`.
pub fn sample_shifted_tracking(
    f: &RationalFunction,
    lambda: f64,
    options: &SamplingOptions,
    centers: &[Complex64],
) -> Result<NyquistCurve, CriterionError> {
    if !lambda.is_finite() {
        return Err(CriterionError::InvalidRate(lambda));
    }
    let relative_degree = f.relative_degree().ok_or(CriterionError::ZeroFunction)?;
    check_contour_poles(f, lambda)?;

    let shifted = f.shift(lambda);
    let mut features: Vec<Complex64> = Vec::new();
    for p in [shifted.numerator(), shifted.denominator()] {
        features.extend(roots_or_empty(p)?.expanded());
    }
    for &c in centers.iter().filter(|c| c.norm() > 0.0) {
        if let Ok(r) = complex_roots(&offset_numerator(&shifted, c)) {
            features.extend(r);
        }
    }

    let largest = [shifted.numerator(), shifted.denominator()]
        .into_iter()
        .filter_map(|p| roots_or_empty(p).ok())
        .map(|r| r.max_magnitude())
        .fold(0.0f64, f64::max);
    let omega_max = options
        .omega_max
        .unwrap_or(DEFAULT_OMEGA_FACTOR * if largest > 0.0 { largest } else { 1.0 });

    let eval = |w: f64| shifted.eval_unchecked(Complex64::new(0.0, w));

    let half = (options.base_points / 2).max(2);
    let mut grid: Vec<f64> = std::iter::once(0.0)
        .chain(log_grid(omega_max * 1e-6, omega_max, half))
        .collect();
    for root in &features {
        let width = root.re.abs().max(1e-9 * omega_max);
        for t in [-3.0, -1.0, -0.3, 0.0, 0.3, 1.0, 3.0] {
            let w = root.im.abs() + t * width;
            if w > 0.0 && w < omega_max {
                grid.push(w);
            }
        }
    }
    grid.sort_by(f64::total_cmp);
    grid.dedup_by(|a, b| (*a - *b).abs() <= 1e-14 * omega_max);

    let mut samples: Vec<(f64, Complex64)> = grid.into_iter().map(|w| (w, eval(w))).collect();
    refine(&mut samples, centers, &eval, omega_max);

    let mut frequencies = Vec::with_capacity(2 * samples.len() - 1);
    let mut values = Vec::with_capacity(2 * samples.len() - 1);
    for &(w, _) in samples.iter().skip(1).rev() {
        frequencies.push(-w);
        values.push(eval(-w));
    }
    for &(w, v) in &samples {
        frequencies.push(w);
        values.push(v);
    }

    Ok(NyquistCurve {
        lambda,
        frequencies,
        values,
        relative_degree,
        leading_ratio: f.leading_ratio(),
    })
}

/// Coefficients of `n(s) - c d(s)` for a rational function `n/d`.
fn offset_numerator(f: &RationalFunction, center: Complex64) -> Vec<Complex64> {
    let (n, d) = (f.numerator(), f.denominator());
    let len = n.coeffs().len().max(d.coeffs().len());
    (0..len)
        .map(|k| Complex64::new(n.coeff(k), 0.0) - center * d.coeff(k))
        .collect()
}

fn phase_step(a: Complex64, b: Complex64, center: Complex64) -> f64 {
    let (da, db) = (a - center, b - center);
    if da.norm() == 0.0 || db.norm() == 0.0 {
        return 0.0;
    }
    (db / da).arg().abs()
}

fn refine<F: Fn(f64) -> Complex64>(
    samples: &mut Vec<(f64, Complex64)>,
    centers: &[Complex64],
    eval: &F,
    omega_max: f64,
) {
    let min_width = 1e-13 * omega_max.max(1.0);
    loop {
        let mut inserted = false;
        let mut next = Vec::with_capacity(samples.len() * 2);
        for pair in samples.windows(2) {
            let (a, b) = (pair[0], pair[1]);
            next.push(a);
            let coarse = centers
                .iter()
                .any(|&c| phase_step(a.1, b.1, c) > MAX_PHASE_STEP);
            if coarse && b.0 - a.0 > min_width {
                let mid = 0.5 * (a.0 + b.0);
                next.push((mid, eval(mid)));
                inserted = true;
            }
        }
        next.push(*samples.last().expect("nonempty grid"));
        *samples = next;
        if !inserted || samples.len() > MAX_REFINED_POINTS {
            break;
        }
    }
}

fn wrap(angle: f64) -> f64 {
    let mut a = angle % (2.0 * PI);
    if a > PI {
        a -= 2.0 * PI;
    } else if a <= -PI {
        a += 2.0 * PI;
    }
    a
}

/// Clockwise encirclements of `center` by the closed curve, including the
/// image of the arc at infinity.
pub fn winding_number(curve: &NyquistCurve, center: Complex64) -> Result<i64, CriterionError> {
    if curve.values.is_empty() {
        return Err(CriterionError::AmbiguousWinding {
            center,
            reason: "empty curve".into(),
        });
    }
    // A strictly proper curve reaches the origin only in the limit; its
    // phase there follows the leading term, so the tail is not a crossing.
    let decays_to_center = curve.relative_degree < 0 && center.norm() == 0.0;
    for (w, v) in curve.iter() {
        let distance = (v - center).norm();
        if distance <= CENTER_CLEARANCE && !(decays_to_center && distance > 0.0) {
            return Err(CriterionError::CenterOnCurve {
                center,
                omega: w,
                distance,
            });
        }
    }

    let mut phase = 0.0;
    for pair in curve.values.windows(2) {
        let step = ((pair[1] - center) / (pair[0] - center)).arg();
        if step.abs() > PI / 2.0 {
            return Err(CriterionError::AmbiguousWinding {
                center,
                reason: format!("phase step of {:.1} deg between samples", step.to_degrees()),
            });
        }
        phase += step;
    }

    // Asymptote b * s^m of F - center along the arc at infinity.
    let d = curve.relative_degree;
    let lead = Complex64::new(curve.leading_ratio, 0.0);
    let (b, m) = if d > 0 {
        (lead, d)
    } else if d == 0 {
        (lead - center, 0)
    } else if center.norm() > 0.0 {
        (-center, 0)
    } else {
        (lead, d)
    };
    if b.norm() <= CENTER_CLEARANCE {
        return Err(CriterionError::AmbiguousWinding {
            center,
            reason: "center coincides with the curve's limit at infinity".into(),
        });
    }
    let top = b.arg() + m as f64 * PI / 2.0;
    let bottom = b.arg() - m as f64 * PI / 2.0;
    let first = curve.values[0] - center;
    let last = curve.values[curve.values.len() - 1] - center;
    phase += wrap(top - last.arg());
    phase += -(m as f64) * PI;
    phase += wrap(first.arg() - bottom);

    let turns = -phase / (2.0 * PI);
    let rounded = turns.round();
    if (turns - rounded).abs() > WINDING_ROUNDING {
        return Err(CriterionError::AmbiguousWinding {
            center,
            reason: format!("accumulated {turns:.3} turns"),
        });
    }
    Ok(rounded as i64)
}

/// Clockwise encirclements of `center` by the image of the shifted contour,
/// computed by the argument principle as `Z - P`: zeros of `F - center` minus
/// poles of `F`, both counted in `Re s > -lambda`.
pub fn encirclement_oracle(
    f: &RationalFunction,
    lambda: f64,
    center: Complex64,
) -> Result<i64, CriterionError> {
    check_contour_poles(f, lambda)?;
    let poles = roots_or_empty(f.denominator())?
        .count(|p| p.re > -lambda) as i64;
    let zeros = match complex_roots(&offset_numerator(f, center)) {
        Ok(r) => r,
        Err(PolyError::Degenerate) => Vec::new(),
        Err(e) => return Err(e.into()),
    };
    if let Some(z) = zeros
        .iter()
        .find(|z| (z.re + lambda).abs() <= CONTOUR_TOLERANCE)
    {
        return Err(CriterionError::RootOnContour { root: *z, lambda });
    }
    let zeros = zeros.iter().filter(|z| z.re > -lambda).count() as i64;
    Ok(zeros - poles)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DiskMargin {
    /// Smallest distance from the curve to the disk `|z - K/2| <= K/2`.
    pub margin: f64,
    pub worst_omega: f64,
    /// Whether the unsampled tail beyond `omega_max` is known to stay clear.
    pub tail_certified: bool,
    pub pass: bool,
}

pub fn disk_margin(curve: &NyquistCurve, slope: f64) -> Result<DiskMargin, CriterionError> {
    if !(slope >= 0.0 && slope.is_finite()) {
        return Err(CriterionError::InvalidSlope(slope));
    }
    let center = Complex64::new(slope / 2.0, 0.0);
    let radius = slope / 2.0;
    let mut worst = (f64::INFINITY, 0.0);
    for (w, v) in curve.iter() {
        let m = (v - center).norm() - radius;
        if m < worst.0 {
            worst = (m, w);
        }
    }

    let tail_certified = if curve.relative_degree >= 1 {
        let ends = [curve.values.first(), curve.values.last()];
        ends.iter()
            .all(|v| v.is_some_and(|v| v.norm() > 2.0 * slope))
    } else {
        let limit = Complex64::new(
            if curve.relative_degree == 0 {
                curve.leading_ratio
            } else {
                0.0
            },
            0.0,
        );
        let m = (limit - center).norm() - radius;
        if m <= 0.0 {
            return Err(CriterionError::TailUnbounded { limit, slope });
        }
        if m < worst.0 {
            worst = (m, f64::INFINITY);
        }
        true
    };

    Ok(DiskMargin {
        margin: worst.0,
        worst_omega: worst.1,
        tail_certified,
        pass: worst.0 > 0.0 && tail_certified,
    })
}

/// Points on the boundary of `|z - K/2| = K/2`, starting at `K`.
pub fn disk_boundary(slope: f64, points: usize) -> Vec<Complex64> {
    let c = Complex64::new(slope / 2.0, 0.0);
    (0..points)
        .map(|k| c + Complex64::from_polar(slope / 2.0, 2.0 * PI * k as f64 / points as f64))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AxisZeros {
    pub pass: bool,
    /// Zeros of `C^-1 + 2P` within [`CONTOUR_TOLERANCE`] of `Re s = -lambda`.
    pub offending: Vec<Complex64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Encirclements {
    pub required: i64,
    pub winding_sampled: i64,
    pub winding_rootcount: i64,
    /// Poles of `P(s - lambda)` in the open right half-plane.
    pub q: usize,
    /// Zeros of `C(s - lambda)` in the open right half-plane.
    pub r: usize,
    pub pass: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DiskCondition {
    pub slope: f64,
    pub margin: f64,
    pub worst_omega: f64,
    pub pass: bool,
}

/// Verdicts of the inverse circle criterion for 2-dominance with rate lambda.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DominanceReport {
    pub lambda: f64,
    pub cond1_no_axis_zeros: AxisZeros,
    /// Absent when condition 1 fails: the curve then crosses the origin.
    pub cond2_encirclements: Option<Encirclements>,
    pub cond3_disk: Option<DiskCondition>,
    pub overall: bool,
}

fn axis_zeros(f: &RationalFunction, lambda: f64) -> Result<AxisZeros, CriterionError> {
    let offending: Vec<Complex64> = roots_or_empty(f.numerator())?
        .iter()
        .filter(|z| (z.value.re + lambda).abs() <= CONTOUR_TOLERANCE)
        .map(|z| z.value)
        .collect();
    Ok(AxisZeros {
        pass: offending.is_empty(),
        offending,
    })
}

pub fn check_theorem2(
    loop_fn: &LoopFunction,
    nl: &SectorNonlinearity,
    lambda: f64,
) -> Result<DominanceReport, CriterionError> {
    check_theorem2_with(loop_fn, nl, lambda, &SamplingOptions::default())
}

pub fn check_theorem2_with(
    loop_fn: &LoopFunction,
    nl: &SectorNonlinearity,
    lambda: f64,
    options: &SamplingOptions,
) -> Result<DominanceReport, CriterionError> {
    if !(lambda >= 0.0 && lambda.is_finite()) {
        return Err(CriterionError::InvalidRate(lambda));
    }
    let f = &loop_fn.g_inverse;
    let cond1 = axis_zeros(f, lambda).map_err(|e| e.in_condition(1))?;
    if !cond1.pass {
        return Ok(DominanceReport {
            lambda,
            cond1_no_axis_zeros: cond1,
            cond2_encirclements: None,
            cond3_disk: None,
            overall: false,
        });
    }

    let q = roots_or_empty(loop_fn.plant.denominator())?.count(|p| p.re > -lambda);
    let r = roots_or_empty(loop_fn.controller.numerator())?.count(|z| z.re > -lambda);
    let required = 2 - (q + r) as i64;

    let origin = Complex64::new(0.0, 0.0);
    let curve = sample_shifted(f, lambda, options).map_err(|e| e.in_condition(2))?;
    let winding_sampled = winding_number(&curve, origin).map_err(|e| e.in_condition(2))?;
    let winding_rootcount =
        encirclement_oracle(f, lambda, origin).map_err(|e| e.in_condition(2))?;
    if winding_sampled != winding_rootcount {
        return Err(CriterionError::OracleMismatch {
            sampled: winding_sampled,
            rootcount: winding_rootcount,
        }
        .in_condition(2));
    }
    let cond2 = Encirclements {
        required,
        winding_sampled,
        winding_rootcount,
        q,
        r,
        pass: winding_rootcount == required,
    };

    let slope = nl.slope();
    let disk = disk_margin(&curve, slope).map_err(|e| e.in_condition(3))?;
    let cond3 = DiskCondition {
        slope,
        margin: disk.margin,
        worst_omega: disk.worst_omega,
        pass: disk.pass,
    };

    Ok(DominanceReport {
        lambda,
        overall: cond1.pass && cond2.pass && cond3.pass,
        cond1_no_axis_zeros: cond1,
        cond2_encirclements: Some(cond2),
        cond3_disk: Some(cond3),
    })
}

/// Largest `Re f(-lambda + jw)` over all `w`, with the frequency where it is
/// attained (infinite when the supremum is the limit at infinity).
pub fn max_real_on_shifted_axis(
    f: &RationalFunction,
    lambda: f64,
) -> Result<(f64, f64), CriterionError> {
    if !f.is_proper() {
        return Ok((f64::INFINITY, f64::INFINITY));
    }
    match check_contour_poles(f, lambda) {
        Ok(()) => {}
        Err(CriterionError::PoleOnContour { root, .. }) => return Ok((f64::INFINITY, root.im)),
        Err(e) => return Err(e),
    }
    let limit = if f.relative_degree() == Some(0) {
        f.leading_ratio()
    } else {
        0.0
    };
    if f.numerator().is_zero() {
        return Ok((0.0, 0.0));
    }
    let curve = sample_shifted(f, lambda, &SamplingOptions::default())?;
    let shifted = f.shift(lambda);
    let re = |w: f64| shifted.eval_unchecked(Complex64::new(0.0, w)).re;

    let (idx, _) = curve
        .values
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.re.total_cmp(&b.1.re))
        .expect("nonempty curve");
    let lo = curve.frequencies[idx.saturating_sub(1)];
    let hi = curve.frequencies[(idx + 1).min(curve.len() - 1)];
    let (w_best, v_best) = golden_max(re, lo, hi, curve.frequencies[idx]);

    if limit >= v_best {
        Ok((limit, f64::INFINITY))
    } else {
        Ok((v_best, w_best))
    }
}

fn golden_max<F: Fn(f64) -> f64>(f: F, mut a: f64, mut b: f64, start: f64) -> (f64, f64) {
    let ratio = (5f64.sqrt() - 1.0) / 2.0;
    let mut best = (start, f(start));
    let mut c = b - ratio * (b - a);
    let mut d = a + ratio * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..80 {
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - ratio * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + ratio * (b - a);
            fd = f(d);
        }
        if b - a <= 1e-12 * b.abs().max(1.0) {
            break;
        }
    }
    for (w, v) in [(c, fc), (d, fd)] {
        if v > best.1 {
            best = (w, v);
        }
    }
    best
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum DesignTheorem {
    Rlc,
    Rc,
}

/// Verdict of the RLC or RC design conditions.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DesignVerdict {
    pub theorem: DesignTheorem,
    pub lambda: f64,
    pub cond1_no_axis_zeros: AxisZeros,
    /// Poles of `P(s - lambda)` with nonnegative real part (shifted coordinates).
    pub shifted_unstable_plant_poles: Vec<Complex64>,
    pub cond2: bool,
    /// The plant-pole ordering of the RC conditions sits within
    /// [`CONTOUR_TOLERANCE`] of a tie; reported as a failure.
    pub near_tie: bool,
    /// `max_w Re 2P(jw - lambda) + 1/R - C lambda`.
    pub cond3_max_real: f64,
    pub cond3_worst_omega: f64,
    pub cond3: bool,
    pub pass: bool,
}

fn design_common(
    plant: &RationalFunction,
    controller: &RationalFunction,
    horizontal_shift: f64,
    lambda: f64,
) -> Result<(AxisZeros, Vec<Complex64>, f64, f64), CriterionError> {
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(CriterionError::InvalidRate(lambda));
    }
    let g_inverse = controller.inverse()?.add(&plant.scale(2.0));
    let cond1 = axis_zeros(&g_inverse, lambda)?;
    let unstable: Vec<Complex64> = roots_or_empty(plant.denominator())?
        .expanded()
        .into_iter()
        .map(|p| p + lambda)
        .filter(|p| p.re > -CONTOUR_TOLERANCE)
        .collect();
    let (max_re, worst) = max_real_on_shifted_axis(&plant.scale(2.0), lambda)?;
    Ok((cond1, unstable, max_re + horizontal_shift, worst))
}

pub fn check_theorem3_rlc(
    plant: &RationalFunction,
    ctrl: &RlcController,
    lambda: f64,
) -> Result<DesignVerdict, CriterionError> {
    let (cond1, unstable, max_real, worst) =
        design_common(plant, &ctrl.impedance(), ctrl.horizontal_shift(lambda), lambda)?;
    let cond2 = unstable.is_empty();
    let cond3 = max_real < 0.0;
    Ok(DesignVerdict {
        theorem: DesignTheorem::Rlc,
        lambda,
        pass: cond1.pass && cond2 && cond3,
        cond1_no_axis_zeros: cond1,
        shifted_unstable_plant_poles: unstable,
        cond2,
        near_tie: false,
        cond3_max_real: max_real,
        cond3_worst_omega: worst,
        cond3,
    })
}

pub fn check_theorem4_rc(
    plant: &RationalFunction,
    ctrl: &RcController,
    lambda: f64,
) -> Result<DesignVerdict, CriterionError> {
    let (cond1, unstable, max_real, worst) =
        design_common(plant, &ctrl.impedance(), ctrl.horizontal_shift(lambda), lambda)?;
    let rc_pole = ctrl.pole() + lambda;
    let (cond2, near_tie) = match unstable.as_slice() {
        [p] if p.re > CONTOUR_TOLERANCE => {
            let gap = p.re - rc_pole;
            (gap > CONTOUR_TOLERANCE, gap.abs() <= CONTOUR_TOLERANCE)
        }
        _ => (false, false),
    };
    let cond3 = max_real < 0.0;
    Ok(DesignVerdict {
        theorem: DesignTheorem::Rc,
        lambda,
        pass: cond1.pass && cond2 && cond3,
        cond1_no_axis_zeros: cond1,
        shifted_unstable_plant_poles: unstable,
        cond2,
        near_tie,
        cond3_max_real: max_real,
        cond3_worst_omega: worst,
        cond3,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::netfun::{make_loop, DcMotorPlant};

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn motor() -> RationalFunction {
        DcMotorPlant::nominal().admittance()
    }

    fn curve_from(values: Vec<Complex64>, relative_degree: i64, leading_ratio: f64) -> NyquistCurve {
        let n = values.len();
        NyquistCurve {
            lambda: 0.0,
            frequencies: (0..n).map(|k| k as f64 - (n / 2) as f64).collect(),
            values,
            relative_degree,
            leading_ratio,
        }
    }

    #[test]
    fn rc_inverse_is_vertical_line() {
        let inv = RcController::new(1.5, 0.1).unwrap().impedance().inverse().unwrap();
        let curve = sample_shifted(&inv, 8.0, &SamplingOptions::default()).unwrap();
        let expected: f64 = 1.0 / 1.5 - 0.8;
        assert!((expected + 0.133).abs() < 0.001);
        for v in &curve.values {
            assert!((v.re - expected).abs() < 1e-12);
        }
        assert!(curve.len() >= DEFAULT_BASE_POINTS);
        assert_eq!(curve.relative_degree, 1);
        assert_eq!(winding_number(&curve, c(0.0, 0.0)).unwrap(), 1);
        assert_eq!(encirclement_oracle(&inv, 8.0, c(0.0, 0.0)).unwrap(), 1);

        let disk = disk_margin(&curve, 1.58).unwrap();
        assert!((disk.margin + expected).abs() < 1e-12);
        assert!(disk.pass && disk.tail_certified);
    }

    #[test]
    fn constant_function_is_a_point() {
        let f = RationalFunction::constant(2.5);
        let curve = sample_shifted(&f, 1.0, &SamplingOptions::default()).unwrap();
        assert!(curve.values.iter().all(|&v| v == c(2.5, 0.0)));
        assert_eq!(winding_number(&curve, c(0.0, 0.0)).unwrap(), 0);
        assert_eq!(encirclement_oracle(&f, 1.0, c(0.0, 0.0)).unwrap(), 0);
    }

    #[test]
    fn rlc_inverse_real_part() {
        let inv = RlcController::new(100.0, 1.0, 1.0).unwrap().impedance().inverse().unwrap();
        let curve = sample_shifted(&inv, 2.0, &SamplingOptions::default()).unwrap();
        // 1/R - C lambda - lambda / (L (lambda^2 + w^2))
        for (w, v) in curve.iter() {
            assert!((v.re - (-1.99 - 2.0 / (4.0 + w * w))).abs() < 1e-9, "{v}");
        }
        // one clockwise turn, as for the tank inverse alone
        assert_eq!(winding_number(&curve, c(0.0, 0.0)).unwrap(), 1);
    }

    #[test]
    fn unit_circle_counterclockwise() {
        let n = 64;
        let values = (0..=n)
            .map(|k| Complex64::from_polar(1.0, 2.0 * PI * k as f64 / n as f64 - PI))
            .collect();
        // A closed loop with a constant limit at its own endpoint adds no arc.
        let curve = curve_from(values, 0, -1.0);
        assert_eq!(winding_number(&curve, c(0.0, 0.0)).unwrap(), -1);
        assert_eq!(winding_number(&curve, c(5.0, 5.0)).unwrap(), 0);
    }

    #[test]
    fn winding_errors() {
        let curve = curve_from(vec![c(1.0, 0.0), c(0.0, 1.0), c(-1.0, 0.0)], 0, 1.0);
        assert!(matches!(
            winding_number(&curve, c(1.0, 0.0)),
            Err(CriterionError::CenterOnCurve { .. })
        ));
        let coarse = curve_from(vec![c(1.0, 0.0), c(-1.0, 0.1)], 0, 1.0);
        assert!(matches!(
            winding_number(&coarse, c(0.0, 0.0)),
            Err(CriterionError::AmbiguousWinding { .. })
        ));
    }

    #[test]
    fn pole_on_contour_is_reported() {
        let f = RationalFunction::from_coeffs(&[1.0], &[2.0, 1.0]).unwrap();
        let err = sample_shifted(&f, 2.0, &SamplingOptions::default()).unwrap_err();
        assert!(matches!(err, CriterionError::PoleOnContour { root, .. } if (root.re + 2.0).abs() < 1e-12));
        assert!(matches!(
            encirclement_oracle(&f, 2.0, c(0.0, 0.0)),
            Err(CriterionError::PoleOnContour { .. })
        ));
    }

    #[test]
    fn design_one_curve() {
        let lf = make_loop(&RlcController::new(100.0, 1.0, 1.0).unwrap().impedance(), &motor()).unwrap();
        let curve = sample_shifted(&lf.g_inverse, 2.0, &SamplingOptions::default()).unwrap();
        assert!(curve.conjugate_asymmetry() < 1e-9);
        assert_eq!(winding_number(&curve, c(0.0, 0.0)).unwrap(), 1);
        assert_eq!(encirclement_oracle(&lf.g_inverse, 2.0, c(0.0, 0.0)).unwrap(), 1);
        // Z = 2 zeros of the degree-4 numerator, P = 1 (tank zero shifted right)
        let z = lf.g_inverse.numerator().roots().unwrap().count(|z| z.re > -2.0);
        let p = lf.g_inverse.denominator().roots().unwrap().count(|p| p.re > -2.0);
        assert_eq!((z, p), (2, 1));
        let disk = disk_margin(&curve, 10f64.sqrt()).unwrap();
        assert!(disk.pass);
        for pair in curve.values.windows(2) {
            assert!((pair[1] / pair[0]).arg().abs() < MAX_PHASE_STEP + 1e-12);
        }
    }

    #[test]
    fn disk_margin_limits() {
        let line = curve_from(vec![c(-0.2, -1.0), c(-0.2, 0.0), c(-0.2, 1.0)], 1, 1.0);
        let zero_k = disk_margin(&line, 0.0).unwrap();
        assert!((zero_k.margin - 0.2).abs() < 1e-12 && zero_k.pass);
        assert!(disk_margin(&line, -1.0).is_err());

        let through = curve_from(vec![c(-1.0, -1.0), c(0.0, 0.0), c(-1.0, 1.0)], 1, 1.0);
        assert!(!disk_margin(&through, 0.0).unwrap().pass);

        let proper = curve_from(vec![c(-1.0, 0.0); 3], -1, 1.0);
        assert!(matches!(
            disk_margin(&proper, 1.0),
            Err(CriterionError::TailUnbounded { .. })
        ));
    }

    #[test]
    fn disk_boundary_geometry() {
        let pts = disk_boundary(1.58, 360);
        assert_eq!(pts.len(), 360);
        assert!((pts[0] - c(1.58, 0.0)).norm() < 1e-12);
        assert!((pts[180] - c(0.0, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn theorem2_rc_with_slow_rate_fails() {
        let lf = make_loop(&RcController::new(1.5, 0.1).unwrap().impedance(), &motor()).unwrap();
        let nl = SectorNonlinearity::new(5.0, 0.5).unwrap();
        let report = check_theorem2(&lf, &nl, 2.0).unwrap();
        let cond2 = report.cond2_encirclements.unwrap();
        assert_eq!((cond2.q, cond2.r, cond2.required), (0, 0, 2));
        assert!(cond2.winding_rootcount <= 1);
        assert!(!cond2.pass && !report.overall);
    }

    #[test]
    fn theorem2_cond1_failure_short_circuits() {
        // C^-1 + 2P = (s + 1)/1 has its zero exactly on Re s = -1.
        let lf = LoopFunction {
            controller: RationalFunction::from_coeffs(&[1.0], &[1.0, 1.0]).unwrap(),
            plant: RationalFunction::from_coeffs(&[], &[1.0]).unwrap(),
            g: RationalFunction::from_coeffs(&[1.0], &[1.0, 1.0]).unwrap(),
            g_inverse: RationalFunction::from_coeffs(&[1.0, 1.0], &[1.0]).unwrap(),
        };
        let nl = SectorNonlinearity::new(5.0, 2.0).unwrap();
        let report = check_theorem2(&lf, &nl, 1.0).unwrap();
        assert!(!report.cond1_no_axis_zeros.pass);
        assert_eq!(report.cond1_no_axis_zeros.offending.len(), 1);
        assert!(report.cond2_encirclements.is_none() && !report.overall);
    }

    #[test]
    fn theorem3_design_one_cond3_value() {
        let ctrl = RlcController::new(100.0, 1.0, 1.0).unwrap();
        let v = check_theorem3_rlc(&motor(), &ctrl, 2.0).unwrap();
        assert!(v.cond2);
        let (max_re, _) = max_real_on_shifted_axis(&motor().scale(2.0), 2.0).unwrap();
        assert!(max_re < 1.99);
        assert!((v.cond3_max_real - (max_re - 1.99)).abs() < 1e-12);
        assert!(v.pass);
    }

    #[test]
    fn theorem4_shifted_plant_poles() {
        let ctrl = RcController::new(1.5, 0.1).unwrap();
        let v = check_theorem4_rc(&motor(), &ctrl, 8.0).unwrap();
        assert_eq!(v.shifted_unstable_plant_poles.len(), 1);
        assert!((v.shifted_unstable_plant_poles[0].re - 3.83).abs() < 0.01);
        assert!(v.pass, "{v:?}");

        // shifted RC pole at 8 - 1/0.3 = 4.67 lies right of the plant pole
        let slow = RcController::new(1.5, 0.2).unwrap();
        let v = check_theorem4_rc(&motor(), &slow, 8.0).unwrap();
        assert!(!v.cond2 && !v.pass);
        assert!(matches!(
            check_theorem4_rc(&motor(), &ctrl, 0.0),
            Err(CriterionError::InvalidRate(_))
        ));
    }

    #[test]
    fn max_real_of_shifted_motor_is_limit_at_infinity() {
        let (m, w) = max_real_on_shifted_axis(&motor().scale(2.0), 8.0).unwrap();
        assert_eq!(m, 0.0);
        assert!(w.is_infinite());
    }
}
