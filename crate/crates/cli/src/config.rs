//! Design configuration: one JSON document naming the plant, the controller,
//! the pair and the dominance rate.

use std::path::Path;

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};
use serde_json::Value;
use xcposc::criterion::SamplingOptions;
use xcposc::netfun::make_loop;
use xcposc::{
    DcMotorPlant, LoopFunction, RationalFunction, RcController, RlcController, SectorNonlinearity,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DesignConfig {
    pub plant: PlantConfig,
    pub controller: ControllerConfig,
    pub xcp: XcpConfig,
    pub lambda: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sim: Option<SimConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sampling: Option<SamplingConfig>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PlantConfig {
    DcMotor {
        l_m: f64,
        r_m: f64,
        j_m: f64,
        b_m: f64,
        k_m: f64,
    },
    Rational {
        numerator: Vec<f64>,
        denominator: Vec<f64>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ControllerConfig {
    Rlc { r: f64, l: f64, c: f64 },
    Rc { r: f64, c: f64 },
    Rational {
        numerator: Vec<f64>,
        denominator: Vec<f64>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct XcpConfig {
    pub k_n: f64,
    #[serde(rename = "I", alias = "current")]
    pub current: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dt: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_end: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x0_perturbation: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub transient_fraction: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SamplingConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub omega_max: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub base_points: Option<usize>,
}

/// Everything the analyses need, built from a validated config.
#[derive(Debug, Clone)]
pub struct Design {
    pub config: DesignConfig,
    pub plant: RationalFunction,
    pub motor: Option<DcMotorPlant>,
    pub controller: RationalFunction,
    pub loop_fn: LoopFunction,
    pub nl: SectorNonlinearity,
    pub lambda: f64,
    pub sampling: SamplingOptions,
}

impl DesignConfig {
    pub fn load(path: &Path) -> Result<DesignConfig> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("cannot read config {}", path.display()))?;
        DesignConfig::parse(&text).with_context(|| format!("invalid config {}", path.display()))
    }

    pub fn parse(text: &str) -> Result<DesignConfig> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn build(&self) -> Result<Design> {
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            bail!("lambda must be nonnegative and finite, got {}", self.lambda);
        }
        let (plant, motor) = match &self.plant {
            PlantConfig::DcMotor { l_m, r_m, j_m, b_m, k_m } => {
                let m = DcMotorPlant::new(*l_m, *r_m, *j_m, *b_m, *k_m)?;
                (m.admittance(), Some(m))
            }
            PlantConfig::Rational { numerator, denominator } => {
                (RationalFunction::from_coeffs(numerator, denominator)?, None)
            }
        };
        let controller = match &self.controller {
            ControllerConfig::Rlc { r, l, c } => RlcController::new(*r, *l, *c)?.impedance(),
            ControllerConfig::Rc { r, c } => RcController::new(*r, *c)?.impedance(),
            ControllerConfig::Rational { numerator, denominator } => {
                RationalFunction::from_coeffs(numerator, denominator)?
            }
        };
        let loop_fn = make_loop(&controller, &plant)?;
        let nl = SectorNonlinearity::new(self.xcp.k_n, self.xcp.current)?;
        let mut sampling = SamplingOptions::default();
        if let Some(s) = &self.sampling {
            if let Some(w) = s.omega_max {
                if !(w > 0.0 && w.is_finite()) {
                    bail!("sampling.omega_max must be positive, got {w}");
                }
                sampling.omega_max = Some(w);
            }
            if let Some(n) = s.base_points {
                if n < 4 {
                    bail!("sampling.base_points must be at least 4, got {n}");
                }
                sampling.base_points = n;
            }
        }
        Ok(Design {
            config: self.clone(),
            plant,
            motor,
            controller,
            loop_fn,
            nl,
            lambda: self.lambda,
            sampling,
        })
    }

    /// Returns a copy with the numeric leaf at the dotted `path` set to
    /// `value`. `controller.inv_rc` sets `C = 1 / (R value)` on an RC
    /// controller.
    pub fn with_param(&self, path: &str, value: f64) -> Result<DesignConfig> {
        if path == "controller.inv_rc" {
            let mut out = self.clone();
            match &mut out.controller {
                ControllerConfig::Rc { r, c } => *c = 1.0 / (*r * value),
                _ => bail!("controller.inv_rc requires an rc controller"),
            }
            return Ok(out);
        }
        let mut doc = serde_json::to_value(self)?;
        let mut node = &mut doc;
        for key in path.split('.') {
            node = match node {
                Value::Object(map) => map
                    .get_mut(key)
                    .with_context(|| format!("unknown parameter path {path}"))?,
                Value::Array(items) => {
                    let idx: usize = key
                        .parse()
                        .with_context(|| format!("unknown parameter path {path}"))?;
                    items
                        .get_mut(idx)
                        .with_context(|| format!("unknown parameter path {path}"))?
                }
                _ => bail!("unknown parameter path {path}"),
            };
        }
        if !node.is_number() {
            bail!("parameter {path} is not numeric");
        }
        *node = serde_json::json!(value);
        Ok(serde_json::from_value(doc)?)
    }
}

impl Design {
    /// Oscillation frequency guess for step-size and horizon defaults.
    pub fn omega_guess(&self) -> f64 {
        match &self.config.controller {
            ControllerConfig::Rlc { l, c, .. } => (1.0 / (l * c)).sqrt(),
            ControllerConfig::Rc { .. } => {
                let shifted = self
                    .plant
                    .poles()
                    .ok()
                    .and_then(|p| p.max_real())
                    .map(|p| (p + self.lambda).abs());
                match shifted {
                    Some(w) if w > 0.0 => w,
                    _ => 1.0,
                }
            }
            ControllerConfig::Rational { .. } => {
                let poles = xcposc::equilibria::closed_loop_poles(&self.loop_fn, self.nl.slope())
                    .unwrap_or_default();
                let rightmost = poles.iter().max_by(|a, b| a.re.total_cmp(&b.re));
                match rightmost {
                    Some(p) if p.im.abs() > 0.0 => p.im.abs(),
                    Some(p) if p.norm() > 0.0 => p.norm(),
                    _ => 1.0,
                }
            }
        }
    }
}
