//! Equilibria of the closed loop, the positive-feedback root locus and the
//! gain window in which the origin is unstable.

use num_complex::Complex64;
use serde::Serialize;
use thiserror::Error;

use crate::netfun::{log_grid, LoopFunction};
use crate::poly::{roots_or_empty, PolyError, Polynomial};
use crate::xcp::SectorNonlinearity;

/// Relative resolution of the instability-window bisection.
pub const WINDOW_RESOLUTION: f64 = 1e-4;

/// Local poles with real part above this count as unstable.
pub const INSTABILITY_MARGIN: f64 = 1e-10;

/// Relative tolerance on the uniqueness bound `K <= 1/G(0)`.
pub const UNIQUENESS_TOLERANCE: f64 = 1e-9;

const BRACKET_POINTS: usize = 4000;
const WINDOW_SCAN_POINTS: usize = 400;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EquilibriumError {
    #[error("G has a pole at the origin, so G(0) is undefined")]
    DegenerateDcGain,
    #[error("negative DC gain G(0) = {0}")]
    NegativeDcGain(f64),
    #[error("invalid gain K = {0}")]
    InvalidGain(f64),
    #[error(transparent)]
    Poly(#[from] PolyError),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Equilibrium {
    pub dv: f64,
    /// `phi'(dv)`, the gain of the linearization.
    pub slope_at: f64,
    pub local_poles: Vec<Complex64>,
    pub unstable: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EquilibriumSet {
    /// Sorted by `dv`; always contains the origin.
    pub points: Vec<Equilibrium>,
    pub unique: bool,
    /// `1/G(0)`, infinite when `G(0) = 0`.
    pub k_threshold: f64,
}

impl EquilibriumSet {
    pub fn origin(&self) -> &Equilibrium {
        self.points
            .iter()
            .find(|p| p.dv == 0.0)
            .expect("origin is always an equilibrium")
    }
}

/// `d_G - k n_G`, whose roots are the closed-loop poles for loop gain `k`.
pub fn characteristic(loop_fn: &LoopFunction, k: f64) -> Polynomial {
    loop_fn.g.denominator() - &loop_fn.g.numerator().scaled(k)
}

pub fn closed_loop_poles(loop_fn: &LoopFunction, k: f64) -> Result<Vec<Complex64>, PolyError> {
    Ok(roots_or_empty(&characteristic(loop_fn, k))?.expanded())
}

pub fn origin_unstable(loop_fn: &LoopFunction, k: f64) -> Result<bool, PolyError> {
    Ok(closed_loop_poles(loop_fn, k)?
        .iter()
        .any(|p| p.re > INSTABILITY_MARGIN))
}

fn dc_gain(loop_fn: &LoopFunction) -> Result<f64, EquilibriumError> {
    let g0 = loop_fn.dc_gain().ok_or(EquilibriumError::DegenerateDcGain)?;
    if g0 < 0.0 {
        return Err(EquilibriumError::NegativeDcGain(g0));
    }
    Ok(g0)
}

/// Nonnegative solutions of `dv / g0 = phi(dv)`.
pub fn solve_fixed_points(g0: f64, nl: &SectorNonlinearity) -> Vec<f64> {
    let mut roots = vec![0.0];
    if g0 <= 0.0 || nl.current() == 0.0 {
        return roots;
    }
    let v_sat = nl.v_sat();
    let h = |v: f64| v / g0 - nl.phi(v);

    let mut grid = log_grid(v_sat * 1e-9, v_sat, BRACKET_POINTS / 4);
    grid.extend((1..=BRACKET_POINTS).map(|k| v_sat * k as f64 / BRACKET_POINTS as f64));
    grid.sort_by(f64::total_cmp);
    grid.dedup();

    let mut prev = (grid[0], h(grid[0]));
    for &v in &grid[1..] {
        let hv = h(v);
        if hv == 0.0 {
            roots.push(v);
        } else if prev.1 != 0.0 && prev.1.signum() != hv.signum() {
            roots.push(bisect(&h, prev.0, v));
        }
        prev = (v, hv);
    }
    let saturated = g0 * nl.current();
    if saturated > v_sat {
        roots.push(saturated);
    }
    roots.dedup_by(|a, b| (*a - *b).abs() <= 1e-12 * v_sat);
    roots
}

fn bisect<F: Fn(f64) -> f64>(f: &F, mut a: f64, mut b: f64) -> f64 {
    let fa = f(a);
    for _ in 0..200 {
        let m = 0.5 * (a + b);
        if m <= a || m >= b {
            break;
        }
        let fm = f(m);
        if fm == 0.0 {
            return m;
        }
        if fm.signum() == fa.signum() {
            a = m;
        } else {
            b = m;
        }
    }
    0.5 * (a + b)
}

pub fn find_equilibria(
    loop_fn: &LoopFunction,
    nl: &SectorNonlinearity,
) -> Result<EquilibriumSet, EquilibriumError> {
    let g0 = dc_gain(loop_fn)?;
    let k_threshold = if g0 == 0.0 { f64::INFINITY } else { 1.0 / g0 };

    let positive = solve_fixed_points(g0, nl);
    let mut points = Vec::with_capacity(2 * positive.len() - 1);
    for &dv in &positive {
        let slope_at = nl.phi_derivative(dv);
        let local_poles = closed_loop_poles(loop_fn, slope_at)?;
        let unstable = local_poles.iter().any(|p| p.re > INSTABILITY_MARGIN);
        let eq = Equilibrium {
            dv,
            slope_at,
            local_poles,
            unstable,
        };
        if dv > 0.0 {
            points.push(Equilibrium { dv: -dv, ..eq.clone() });
        }
        points.push(eq);
    }
    points.sort_by(|a, b| a.dv.total_cmp(&b.dv));

    Ok(EquilibriumSet {
        unique: points.len() == 1,
        points,
        k_threshold,
    })
}

/// Whether `K = sqrt(k_n I)` satisfies the uniqueness bound.
pub fn satisfies_uniqueness_bound(k: f64, k_threshold: f64) -> bool {
    k <= k_threshold * (1.0 + UNIQUENESS_TOLERANCE)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RootLocusBranch {
    pub gains: Vec<f64>,
    /// One list per gain; position `j` follows the same branch across gains.
    pub roots_per_gain: Vec<Vec<Complex64>>,
}

impl RootLocusBranch {
    /// Largest Hausdorff distance between root sets at consecutive gains.
    pub fn max_step(&self) -> f64 {
        self.roots_per_gain
            .windows(2)
            .map(|w| hausdorff(&w[0], &w[1]))
            .fold(0.0, f64::max)
    }
}

pub fn hausdorff(a: &[Complex64], b: &[Complex64]) -> f64 {
    let directed = |x: &[Complex64], y: &[Complex64]| {
        x.iter()
            .map(|p| y.iter().map(|q| (p - q).norm()).fold(f64::INFINITY, f64::min))
            .fold(0.0, f64::max)
    };
    directed(a, b).max(directed(b, a))
}

/// Reorders `next` so each entry is the nearest unused match of `prev`.
fn match_roots(prev: &[Complex64], next: Vec<Complex64>) -> Vec<Complex64> {
    if prev.len() != next.len() {
        return next;
    }
    let mut pairs: Vec<(f64, usize, usize)> = Vec::with_capacity(prev.len() * next.len());
    for (i, p) in prev.iter().enumerate() {
        for (j, q) in next.iter().enumerate() {
            pairs.push(((p - q).norm(), i, j));
        }
    }
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut out = vec![None; prev.len()];
    let mut used = vec![false; next.len()];
    for (_, i, j) in pairs {
        if out[i].is_none() && !used[j] {
            out[i] = Some(next[j]);
            used[j] = true;
        }
    }
    out.into_iter().map(|r| r.expect("complete matching")).collect()
}

pub fn root_locus(
    loop_fn: &LoopFunction,
    gains: &[f64],
) -> Result<RootLocusBranch, EquilibriumError> {
    if let Some(&k) = gains.iter().find(|k| !(**k >= 0.0 && k.is_finite())) {
        return Err(EquilibriumError::InvalidGain(k));
    }
    let mut roots_per_gain: Vec<Vec<Complex64>> = Vec::with_capacity(gains.len());
    for &k in gains {
        let roots = closed_loop_poles(loop_fn, k)?;
        let roots = match roots_per_gain.last() {
            Some(prev) => match_roots(prev, roots),
            None => roots,
        };
        roots_per_gain.push(roots);
    }
    Ok(RootLocusBranch {
        gains: gains.to_vec(),
        roots_per_gain,
    })
}

/// Zero followed by `steps` geometric gains ending at `k_max`.
pub fn geometric_gains(k_max: f64, steps: usize) -> Vec<f64> {
    let mut gains = vec![0.0];
    if steps > 0 && k_max > 0.0 {
        gains.extend(log_grid(k_max * 1e-4, k_max, steps));
    }
    gains
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InstabilityWindow {
    /// Smallest gain at which the origin is unstable, if any was found.
    pub k_min_unstable: Option<f64>,
    /// `1/G(0)`, infinite when `G(0) = 0`.
    pub k_max_allowed: f64,
    pub feasible: bool,
    /// Real zero of `G` in `(-lambda, 0]`, closest to the origin.
    pub slow_zero: Option<f64>,
    /// The gain `K` of the given nonlinearity.
    pub k: f64,
    pub origin_unstable_at_k: bool,
}

pub fn instability_window(
    loop_fn: &LoopFunction,
    nl: &SectorNonlinearity,
    lambda: f64,
) -> Result<InstabilityWindow, EquilibriumError> {
    let g0 = dc_gain(loop_fn)?;
    let k_max_allowed = if g0 == 0.0 { f64::INFINITY } else { 1.0 / g0 };
    let unstable = |k: f64| origin_unstable(loop_fn, k);

    let k_min_unstable = if unstable(0.0)? {
        Some(0.0)
    } else {
        let (lo, hi) = if k_max_allowed.is_finite() {
            (k_max_allowed * 1e-6, k_max_allowed)
        } else {
            (1e-6, 1e6)
        };
        let mut found = None;
        let mut stable_below = 0.0;
        for k in log_grid(lo, hi, WINDOW_SCAN_POINTS) {
            if unstable(k)? {
                found = Some(k);
                break;
            }
            stable_below = k;
        }
        match found {
            Some(mut hi) => {
                let mut lo = stable_below;
                while hi - lo > WINDOW_RESOLUTION * hi {
                    let mid = 0.5 * (lo + hi);
                    if unstable(mid)? {
                        hi = mid;
                    } else {
                        lo = mid;
                    }
                }
                Some(hi)
            }
            None => None,
        }
    };

    let slow_zero = roots_or_empty(loop_fn.g.numerator())?
        .iter()
        .filter(|z| z.value.im.abs() <= 1e-9 && z.value.re > -lambda && z.value.re <= 1e-12)
        .map(|z| z.value.re.min(0.0))
        .fold(None, |best: Option<f64>, z| Some(best.map_or(z, |b| b.max(z))));

    let k = nl.slope();
    Ok(InstabilityWindow {
        feasible: k_min_unstable.is_some_and(|k| k < k_max_allowed),
        k_min_unstable,
        k_max_allowed,
        slow_zero,
        k,
        origin_unstable_at_k: unstable(k)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::netfun::{make_loop, DcMotorPlant, RcController, RlcController};
    use crate::poly::RationalFunction;

    fn motor() -> RationalFunction {
        DcMotorPlant::nominal().admittance()
    }

    fn rc_loop() -> LoopFunction {
        make_loop(&RcController::new(1.5, 0.1).unwrap().impedance(), &motor()).unwrap()
    }

    fn rlc_loop() -> LoopFunction {
        make_loop(&RlcController::new(100.0, 1.0, 1.0).unwrap().impedance(), &motor()).unwrap()
    }

    #[test]
    fn rc_dc_gain() {
        let g0 = rc_loop().dc_gain().unwrap();
        assert!((g0 - 0.61).abs() < 0.005, "{g0}");
        // 1 / (k_n G(0)^2)
        assert!((1.0 / (5.0 * g0 * g0) - 0.54).abs() < 0.005);
    }

    #[test]
    fn below_threshold_only_origin() {
        let lf = rc_loop();
        let set = find_equilibria(&lf, &SectorNonlinearity::new(5.0, 0.5).unwrap()).unwrap();
        assert!(set.unique);
        assert_eq!(set.points.len(), 1);
        assert_eq!(set.origin().dv, 0.0);
        assert!(set.origin().unstable);
        assert!((set.k_threshold - 1.0 / lf.dc_gain().unwrap()).abs() < 1e-12);
    }

    #[test]
    fn three_equilibria_past_threshold() {
        let lf = rc_loop();
        let g0 = lf.dc_gain().unwrap();
        let critical = 1.0 / (5.0 * g0 * g0);
        let nl = SectorNonlinearity::new(5.0, critical * 1.01).unwrap();
        let set = find_equilibria(&lf, &nl).unwrap();
        assert_eq!(set.points.len(), 3);
        assert!(!set.unique);
        assert!(!satisfies_uniqueness_bound(nl.slope(), set.k_threshold));
        let (a, b) = (&set.points[0], &set.points[2]);
        assert_eq!(a.dv, -b.dv);
        assert_eq!(a.local_poles, b.local_poles);
        for p in &set.points {
            assert!((p.dv / g0 - nl.phi(p.dv)).abs() < 1e-12);
        }
    }

    #[test]
    fn saturated_equilibrium() {
        let nl = SectorNonlinearity::new(5.0, 2.0).unwrap();
        let roots = solve_fixed_points(10.0, &nl);
        assert_eq!(roots.len(), 2);
        assert_eq!(roots[1], 20.0);
    }

    #[test]
    fn rlc_origin_is_only_equilibrium() {
        let lf = rlc_loop();
        for current in [0.1, 2.0, 100.0] {
            let set = find_equilibria(&lf, &SectorNonlinearity::new(5.0, current).unwrap()).unwrap();
            assert!(set.unique);
            assert!(set.k_threshold.is_infinite());
        }
    }

    #[test]
    fn pole_at_origin_is_degenerate() {
        let g = RationalFunction::from_coeffs(&[1.0], &[0.0, 1.0]).unwrap();
        let lf = LoopFunction {
            controller: g.clone(),
            plant: RationalFunction::constant(0.0),
            g_inverse: g.inverse().unwrap(),
            g,
        };
        let nl = SectorNonlinearity::new(5.0, 1.0).unwrap();
        assert_eq!(find_equilibria(&lf, &nl), Err(EquilibriumError::DegenerateDcGain));
    }

    #[test]
    fn locus_endpoints() {
        let lf = rc_loop();
        let g0 = lf.dc_gain().unwrap();
        let locus = root_locus(&lf, &[0.0, 1.0 / g0]).unwrap();
        let poles = lf.g.poles().unwrap().expanded();
        for p in &poles {
            assert!(locus.roots_per_gain[0].iter().any(|q| (p - q).norm() < 1e-9));
        }
        assert!(locus.roots_per_gain[1].iter().any(|q| q.norm() < 1e-6));
        let n = lf.g.denominator().degree().unwrap();
        assert!(locus.roots_per_gain.iter().all(|r| r.len() == n));
        assert!(root_locus(&lf, &[-1.0]).is_err());
    }

    #[test]
    fn design_one_unstable_at_its_gain() {
        let poles = closed_loop_poles(&rlc_loop(), 10f64.sqrt()).unwrap();
        assert!(poles.iter().any(|p| p.re > 0.0));
    }

    #[test]
    fn rc_window_contains_design_gain() {
        let lf = rc_loop();
        let nl = SectorNonlinearity::new(5.0, 0.5).unwrap();
        let w = instability_window(&lf, &nl, 8.0).unwrap();
        assert!(w.feasible);
        assert!(w.k_min_unstable.unwrap() < 1.58);
        assert!((w.k_max_allowed - 1.64).abs() < 0.01);
        assert!(w.origin_unstable_at_k);
        assert!(w.slow_zero.is_some());
    }

    #[test]
    fn rlc_window_unbounded() {
        let nl = SectorNonlinearity::new(5.0, 2.0).unwrap();
        let w = instability_window(&rlc_loop(), &nl, 2.0).unwrap();
        assert!(w.k_max_allowed.is_infinite());
        assert!(w.feasible);
        assert_eq!(w.slow_zero, Some(0.0));
    }

    #[test]
    fn no_slow_zero_is_infeasible() {
        // G = 1 / ((s + 1)(s + 2)), two dominant poles and no zeros.
        let g = RationalFunction::from_coeffs(&[1.0], &[2.0, 3.0, 1.0]).unwrap();
        let lf = LoopFunction {
            controller: g.clone(),
            plant: RationalFunction::constant(0.0),
            g_inverse: g.inverse().unwrap(),
            g,
        };
        let nl = SectorNonlinearity::new(5.0, 0.1).unwrap();
        let w = instability_window(&lf, &nl, 5.0).unwrap();
        assert!(!w.feasible);
        assert!(w.slow_zero.is_none());
    }

    #[test]
    fn matching_follows_branches() {
        let prev = vec![Complex64::new(0.0, 1.0), Complex64::new(5.0, 0.0)];
        let next = vec![Complex64::new(5.1, 0.0), Complex64::new(0.0, 1.1)];
        let m = match_roots(&prev, next);
        assert_eq!(m[0], Complex64::new(0.0, 1.1));
    }
}
