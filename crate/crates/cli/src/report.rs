//! The two-step design check: dominance first, then instability of the
//! origin, optionally confirmed by simulation.

use anyhow::Result;
use serde::Serialize;
use xcposc::criterion::{
    check_theorem2_with, check_theorem3_rlc, check_theorem4_rc, DesignVerdict,
};
use xcposc::equilibria::{find_equilibria, instability_window};
use xcposc::sim::{
    default_dt, default_horizon, integrate_with_motor, measure, realize, Classification,
    DEFAULT_PERTURBATION, DEFAULT_TRANSIENT_FRACTION,
};
use xcposc::{DominanceReport, EquilibriumSet, InstabilityWindow, OscillationMetrics, Trajectory};

use crate::config::{ControllerConfig, Design, SimConfig};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Verdict {
    pub oscillation_certified: bool,
    pub reasons: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DesignReport {
    pub dominance: DominanceReport,
    pub rlc_or_rc_verdict: Option<DesignVerdict>,
    pub equilibria: EquilibriumSet,
    pub instability: InstabilityWindow,
    pub simulation: Option<OscillationMetrics>,
    pub verdict: Verdict,
}

pub fn design_verdict(design: &Design) -> Result<Option<DesignVerdict>> {
    let lambda = design.lambda;
    Ok(match &design.config.controller {
        ControllerConfig::Rlc { r, l, c } => {
            let ctrl = xcposc::RlcController::new(*r, *l, *c)?;
            Some(check_theorem3_rlc(&design.plant, &ctrl, lambda)?)
        }
        ControllerConfig::Rc { r, c } => {
            let ctrl = xcposc::RcController::new(*r, *c)?;
            Some(check_theorem4_rc(&design.plant, &ctrl, lambda)?)
        }
        ControllerConfig::Rational { .. } => None,
    })
}

pub struct SimulationRun {
    pub trajectory: Trajectory,
    pub metrics: OscillationMetrics,
}

pub fn simulate(design: &Design, cfg: &SimConfig) -> Result<SimulationRun> {
    let ss = realize(&design.loop_fn.g)?;
    let omega = design.omega_guess();
    let dt = cfg.dt.unwrap_or_else(|| default_dt(&ss, omega));
    let t_end = cfg.t_end.unwrap_or_else(|| default_horizon(omega));
    let x0 = ss.default_x0(cfg.x0_perturbation.unwrap_or(DEFAULT_PERTURBATION));
    let trajectory = integrate_with_motor(&ss, &design.nl, &x0, dt, t_end, design.motor.as_ref())?;
    let metrics = measure(
        &trajectory,
        cfg.transient_fraction.unwrap_or(DEFAULT_TRANSIENT_FRACTION),
    );
    Ok(SimulationRun { trajectory, metrics })
}

pub fn analyze(design: &Design, force_simulation: bool) -> Result<DesignReport> {
    let dominance = check_theorem2_with(&design.loop_fn, &design.nl, design.lambda, &design.sampling)?;
    let rlc_or_rc_verdict = design_verdict(design)?;
    let equilibria = find_equilibria(&design.loop_fn, &design.nl)?;
    let instability = instability_window(&design.loop_fn, &design.nl, design.lambda)?;
    let sim_cfg = match design.config.sim {
        Some(cfg) => Some(cfg),
        None if force_simulation => Some(SimConfig::default()),
        None => None,
    };
    let simulation = match sim_cfg {
        Some(cfg) => Some(simulate(design, &cfg)?.metrics),
        None => None,
    };

    let mut reasons = Vec::new();
    if !dominance.cond1_no_axis_zeros.pass {
        reasons.push("dominance: G^-1 has zeros on the shifted axis".to_string());
    }
    if let Some(c) = &dominance.cond2_encirclements {
        if !c.pass {
            reasons.push(format!(
                "dominance: {} encirclements of the origin, {} required",
                c.winding_rootcount, c.required
            ));
        }
    }
    if let Some(c) = &dominance.cond3_disk {
        if !c.pass {
            reasons.push(format!("dominance: curve meets the disk (margin {:.4})", c.margin));
        }
    }
    if let Some(v) = &rlc_or_rc_verdict {
        if !v.pass {
            let name = match v.theorem {
                xcposc::criterion::DesignTheorem::Rlc => "RLC",
                xcposc::criterion::DesignTheorem::Rc => "RC",
            };
            let mut failed = Vec::new();
            if !v.cond1_no_axis_zeros.pass {
                failed.push("1");
            }
            if !v.cond2 {
                failed.push("2");
            }
            if !v.cond3 {
                failed.push("3");
            }
            let tie = if v.near_tie { " (near tie)" } else { "" };
            reasons.push(format!("{name} design conditions failed: {}{tie}", failed.join(", ")));
        }
    }
    if !equilibria.unique {
        reasons.push("multiple equilibria: K > 1/G(0)".to_string());
    }
    if !equilibria.origin().unstable {
        reasons.push(format!("origin is locally stable at K = {:.4}", design.nl.slope()));
    }
    if let Some(m) = &simulation {
        if m.classification != Classification::LimitCycle {
            reasons.push(format!("simulation: no limit cycle ({:?})", m.classification));
        }
    }

    let design_ok = rlc_or_rc_verdict.as_ref().is_none_or(|v| v.pass);
    let oscillation_certified = dominance.overall
        && design_ok
        && equilibria.unique
        && equilibria.origin().unstable
        && simulation
            .as_ref()
            .is_none_or(|m| m.classification == Classification::LimitCycle);

    Ok(DesignReport {
        dominance,
        rlc_or_rc_verdict,
        equilibria,
        instability,
        simulation,
        verdict: Verdict {
            oscillation_certified,
            reasons,
        },
    })
}
