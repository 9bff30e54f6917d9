//! Controller impedances, the DC-motor plant admittance and the loop
//! function `G = C / (1 + 2 P C)` seen by the cross-coupled pair.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::poly::{PolyError, Polynomial, RationalFunction};

/// Relative tolerance of the `1/G = C^-1 + 2P` cross-check.
pub const LOOP_CROSSCHECK_TOLERANCE: f64 = 1e-8;

/// Default number of axis samples used by [`passivity_check`].
pub const PASSIVITY_GRID_POINTS: usize = 513;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum NetError {
    #[error("parameter {name} must be positive and finite, got {value}")]
    InvalidParameter { name: &'static str, value: f64 },
    #[error("numerator degree exceeds denominator degree")]
    ImproperFunction,
    #[error("1/G and C^-1 + 2P disagree at omega = {omega} (relative error {error:.3e})")]
    LoopMismatch { omega: f64, error: f64 },
    #[error(transparent)]
    Poly(#[from] PolyError),
}

fn positive(name: &'static str, value: f64) -> Result<f64, NetError> {
    if value > 0.0 && value.is_finite() {
        Ok(value)
    } else {
        Err(NetError::InvalidParameter { name, value })
    }
}

/// Parallel RLC tank.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RlcController {
    pub r: f64,
    pub l: f64,
    pub c: f64,
}

impl RlcController {
    pub fn new(r: f64, l: f64, c: f64) -> Result<Self, NetError> {
        Ok(RlcController {
            r: positive("R", r)?,
            l: positive("L", l)?,
            c: positive("C", c)?,
        })
    }

    /// `RLs / (RLC s^2 + L s + R)`.
    pub fn impedance(&self) -> RationalFunction {
        let (r, l, c) = (self.r, self.l, self.c);
        RationalFunction::from_coeffs(&[0.0, r * l], &[r, l, r * l * c])
            .expect("positive parameters give a nonzero denominator")
    }

    /// Tank resonance `sqrt(1/LC)`.
    pub fn natural_frequency(&self) -> f64 {
        (1.0 / (self.l * self.c)).sqrt()
    }

    /// Real part `1/R - C lambda` of the shifted inverse impedance.
    pub fn horizontal_shift(&self, lambda: f64) -> f64 {
        1.0 / self.r - self.c * lambda
    }
}

/// Parallel RC network.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RcController {
    pub r: f64,
    pub c: f64,
}

impl RcController {
    pub fn new(r: f64, c: f64) -> Result<Self, NetError> {
        Ok(RcController {
            r: positive("R", r)?,
            c: positive("C", c)?,
        })
    }

    /// `1 / (1/R + C s)`.
    pub fn impedance(&self) -> RationalFunction {
        RationalFunction::from_coeffs(&[1.0], &[1.0 / self.r, self.c])
            .expect("positive parameters give a nonzero denominator")
    }

    /// Location of the single pole, `-1/RC`.
    pub fn pole(&self) -> f64 {
        -1.0 / (self.r * self.c)
    }

    pub fn horizontal_shift(&self, lambda: f64) -> f64 {
        1.0 / self.r - self.c * lambda
    }
}

/// Armature-controlled DC motor seen as an admittance from terminal voltage
/// to armature current.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DcMotorPlant {
    pub l_m: f64,
    pub r_m: f64,
    pub j_m: f64,
    pub b_m: f64,
    pub k_m: f64,
}

impl DcMotorPlant {
    pub fn new(l_m: f64, r_m: f64, j_m: f64, b_m: f64, k_m: f64) -> Result<Self, NetError> {
        Ok(DcMotorPlant {
            l_m: positive("L_m", l_m)?,
            r_m: positive("R_m", r_m)?,
            j_m: positive("J_m", j_m)?,
            b_m: positive("b_m", b_m)?,
            k_m: positive("k_m", k_m)?,
        })
    }

    /// `L_m = 0.5, R_m = 2, J_m = 0.02, b_m = 0.2, k_m = 0.1`.
    pub fn nominal() -> Self {
        DcMotorPlant {
            l_m: 0.5,
            r_m: 2.0,
            j_m: 0.02,
            b_m: 0.2,
            k_m: 0.1,
        }
    }

    /// `(J s + b) / ((L s + R)(J s + b) + k^2)`.
    pub fn admittance(&self) -> RationalFunction {
        let armature = Polynomial::new(vec![self.r_m, self.l_m]);
        let rotor = Polynomial::new(vec![self.b_m, self.j_m]);
        let den = &(&armature * &rotor) + &Polynomial::constant(self.k_m * self.k_m);
        RationalFunction::new(rotor, den).expect("nonzero denominator")
    }

    /// Time derivative of `(armature current, shaft speed)` under terminal
    /// voltage `v`.
    pub fn derivative(&self, state: [f64; 2], v: f64) -> [f64; 2] {
        let [i, w] = state;
        [
            (v - self.r_m * i - self.k_m * w) / self.l_m,
            (self.k_m * i - self.b_m * w) / self.j_m,
        ]
    }
}

pub fn make_rlc(r: f64, l: f64, c: f64) -> Result<RationalFunction, NetError> {
    Ok(RlcController::new(r, l, c)?.impedance())
}

pub fn make_rc(r: f64, c: f64) -> Result<RationalFunction, NetError> {
    Ok(RcController::new(r, c)?.impedance())
}

pub fn make_dc_motor(params: &DcMotorPlant) -> Result<RationalFunction, NetError> {
    let p = DcMotorPlant::new(params.l_m, params.r_m, params.j_m, params.b_m, params.k_m)?;
    Ok(p.admittance())
}

/// Controller impedance `C`, plant admittance `P`, and both representations
/// of the loop seen by the nonlinearity.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LoopFunction {
    pub controller: RationalFunction,
    pub plant: RationalFunction,
    /// `C / (1 + 2 P C)`.
    pub g: RationalFunction,
    /// `C^-1 + 2 P`.
    pub g_inverse: RationalFunction,
}

impl LoopFunction {
    pub fn dc_gain(&self) -> Option<f64> {
        self.g.dc_gain()
    }
}

pub fn make_loop(
    controller: &RationalFunction,
    plant: &RationalFunction,
) -> Result<LoopFunction, NetError> {
    let twice_plant = plant.scale(2.0);
    let g = controller.feedback(&twice_plant)?;
    let g_inverse = controller.inverse()?.add(&twice_plant);
    crosscheck_inverse(&g, &g_inverse)?;
    Ok(LoopFunction {
        controller: controller.clone(),
        plant: plant.clone(),
        g,
        g_inverse,
    })
}

fn crosscheck_inverse(g: &RationalFunction, g_inverse: &RationalFunction) -> Result<(), NetError> {
    let scale = [g.poles(), g.zeros()]
        .into_iter()
        .filter_map(Result::ok)
        .map(|r| r.max_magnitude())
        .fold(1.0f64, f64::max);
    for omega in log_grid(scale * 1e-3, scale * 1e3, 200) {
        let s = Complex64::new(0.0, omega);
        let (Ok(direct), Ok(inverse)) = (g.eval(s), g_inverse.eval(s)) else {
            continue;
        };
        if direct.norm() == 0.0 {
            continue;
        }
        let reciprocal = direct.inv();
        let error = (reciprocal - inverse).norm() / reciprocal.norm().max(inverse.norm());
        if error > LOOP_CROSSCHECK_TOLERANCE {
            return Err(NetError::LoopMismatch { omega, error });
        }
    }
    Ok(())
}

pub(crate) fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![lo];
    }
    let (a, b) = (lo.ln(), hi.ln());
    (0..n)
        .map(|k| (a + (b - a) * k as f64 / (n - 1) as f64).exp())
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PassivityVerdict {
    pub is_stable: bool,
    /// Smallest sampled `Re f(jw)`, including `w = 0` and the limit at infinity.
    pub min_real_part_on_axis: f64,
    /// Frequency of the minimum; infinite when the limit at infinity is lowest.
    pub worst_omega: f64,
    pub is_positive_real: bool,
}

pub fn passivity_check(f: &RationalFunction) -> Result<PassivityVerdict, NetError> {
    passivity_check_with(f, PASSIVITY_GRID_POINTS, 1e-9)
}

pub fn passivity_check_with(
    f: &RationalFunction,
    grid_points: usize,
    tolerance: f64,
) -> Result<PassivityVerdict, NetError> {
    if !f.is_proper() {
        return Err(NetError::ImproperFunction);
    }
    let poles = f.poles()?;
    let is_stable = poles.iter().all(|p| p.value.re < 0.0);

    let fastest = [f.poles()?, f.zeros()?]
        .iter()
        .flat_map(|r| r.iter().map(|x| x.value.norm()))
        .filter(|&m| m > 0.0)
        .fold(0.0f64, f64::max);
    let fastest = if fastest > 0.0 { fastest } else { 1.0 };

    let at_infinity = if f.relative_degree() == Some(0) {
        f.leading_ratio()
    } else {
        0.0
    };
    let mut worst = (at_infinity, f64::INFINITY);
    let grid = std::iter::once(0.0).chain(log_grid(fastest / 100.0, fastest * 100.0, grid_points));
    for omega in grid {
        // Axis poles make the function non-positive-real; skip the sample.
        if let Ok(v) = f.eval(Complex64::new(0.0, omega)) {
            if v.re < worst.0 {
                worst = (v.re, omega);
            }
        }
    }
    let scale = f.numerator().scale() / f.denominator().scale().max(f64::MIN_POSITIVE);
    Ok(PassivityVerdict {
        is_stable,
        min_real_part_on_axis: worst.0,
        worst_omega: worst.1,
        is_positive_real: is_stable && worst.0 >= -tolerance * scale.max(1.0),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn rlc_design_one() {
        let c = make_rlc(100.0, 1.0, 1.0).unwrap();
        assert_eq!(c.numerator().coeffs(), &[0.0, 100.0]);
        assert_eq!(c.denominator().coeffs(), &[100.0, 1.0, 100.0]);
        let zeros = c.zeros().unwrap();
        assert_eq!(zeros.total(), 1);
        assert_eq!(zeros.expanded()[0], Complex64::new(0.0, 0.0));
        assert_eq!(c.dc_gain(), Some(0.0));
        assert!(c.is_strictly_proper());
    }

    #[test]
    fn rlc_design_two_poles() {
        let c = make_rlc(100.0, 1.0, 5.0).unwrap();
        let expected = Polynomial::new(vec![100.0, 1.0, 500.0]).roots().unwrap();
        let got = c.poles().unwrap();
        for (a, b) in got.expanded().iter().zip(expected.expanded()) {
            assert!((a - b).norm() < 1e-12);
        }
    }

    #[test]
    fn rc_network() {
        let rc = RcController::new(1.5, 0.1).unwrap();
        assert!(close(rc.pole(), -1.0 / 0.15, 1e-12));
        assert!(close(rc.pole(), -6.67, 0.005));
        assert!((4.17..=8.0).contains(&-rc.pole()));
        let f = rc.impedance();
        assert!(close(f.dc_gain().unwrap(), 1.5, 1e-15));
        assert!(f.zeros().unwrap().total() == 0);
        let poles = f.poles().unwrap().expanded();
        assert!(close(poles[0].re, -1.0 / 0.15, 1e-12));
    }

    #[test]
    fn invalid_parameters() {
        assert!(matches!(make_rlc(0.0, 1.0, 1.0), Err(NetError::InvalidParameter { name: "R", .. })));
        assert!(matches!(make_rc(1.0, -0.1), Err(NetError::InvalidParameter { name: "C", .. })));
        let mut m = DcMotorPlant::nominal();
        m.k_m = 0.0;
        assert!(make_dc_motor(&m).is_err());
    }

    #[test]
    fn dc_motor_nominal() {
        let p = make_dc_motor(&DcMotorPlant::nominal()).unwrap();
        let z = p.zeros().unwrap().expanded();
        assert!(close(z[0].re, -10.0, 0.01));
        let poles = p.poles().unwrap().expanded();
        assert!(close(poles[0].re, -9.83, 0.01));
        assert!(close(poles[1].re, -4.17, 0.01));
        assert!(close(p.dc_gain().unwrap(), 0.2 / 0.41, 1e-15));
    }

    #[test]
    fn dc_motor_decoupled_limit() {
        let mut m = DcMotorPlant::nominal();
        m.k_m = 1e-6;
        let poles = m.admittance().poles().unwrap().expanded();
        assert!(close(poles[0].re, -10.0, 1e-6));
        assert!(close(poles[1].re, -4.0, 1e-6));
    }

    #[test]
    fn loop_structure_rlc() {
        let plant = DcMotorPlant::nominal().admittance();
        let lf = make_loop(&make_rlc(100.0, 1.0, 1.0).unwrap(), &plant).unwrap();
        assert_eq!(lf.g.denominator().degree(), Some(4));
        assert!(lf.g.is_strictly_proper());
        assert_eq!(lf.dc_gain(), Some(0.0));
        let zeros = lf.g.zeros().unwrap();
        assert!(zeros.iter().any(|z| z.value.norm() < 1e-12));
    }

    #[test]
    fn loop_dc_gain_rc() {
        let plant = DcMotorPlant::nominal().admittance();
        let lf = make_loop(&make_rc(1.5, 0.1).unwrap(), &plant).unwrap();
        let g0 = lf.dc_gain().unwrap();
        assert!(close(g0, 0.61, 0.01));
        // 1.5 / (1 + 2 * 1.5 * 0.2/0.41)
        assert!(close(g0, 1.5 / (1.0 + 3.0 * 0.2 / 0.41), 1e-14));
    }

    #[test]
    fn open_loop_when_plant_is_zero() {
        let c = make_rc(2.0, 0.3).unwrap();
        let zero = RationalFunction::from_coeffs(&[], &[1.0]).unwrap();
        let lf = make_loop(&c, &zero).unwrap();
        assert_eq!(lf.g, c);
    }

    #[test]
    fn passivity_examples() {
        let motor = passivity_check(&DcMotorPlant::nominal().admittance()).unwrap();
        assert!(motor.is_stable && motor.is_positive_real);
        assert!(motor.min_real_part_on_axis >= 0.0);

        let lag = passivity_check(&RationalFunction::from_coeffs(&[1.0], &[1.0, 1.0]).unwrap()).unwrap();
        assert!(lag.is_positive_real);
        assert_eq!(lag.min_real_part_on_axis, 0.0);
        assert!(lag.worst_omega.is_infinite());

        let unstable = passivity_check(&RationalFunction::from_coeffs(&[1.0], &[-1.0, 1.0]).unwrap()).unwrap();
        assert!(!unstable.is_stable && !unstable.is_positive_real);

        let improper = RationalFunction::from_coeffs(&[0.0, 0.0, 1.0], &[1.0, 1.0]).unwrap();
        assert_eq!(passivity_check(&improper), Err(NetError::ImproperFunction));
    }
}
