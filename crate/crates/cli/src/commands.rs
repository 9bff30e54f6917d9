//! Curve, locus, trajectory and sweep exports.

use std::path::Path;

use anyhow::{bail, Context, Result};
use num_complex::Complex64;
use serde::Serialize;
use xcposc::criterion::{disk_boundary, disk_margin, sample_shifted, winding_number, NyquistCurve};
use xcposc::equilibria::{geometric_gains, root_locus};
use xcposc::RootLocusBranch;

use crate::config::{Design, DesignConfig};
use crate::output::{num, write_atomic, write_csv};
use crate::report::{analyze, simulate, SimulationRun};
use crate::svg::{Plot, Series};

pub const DISK_POINTS: usize = 360;

#[derive(Debug, Clone, Serialize)]
pub struct NyquistSummary {
    pub samples: usize,
    pub omega_max: f64,
    pub winding: i64,
    pub k: f64,
    pub margin: f64,
    pub disk_pass: bool,
}

pub fn nyquist_curve(design: &Design) -> Result<NyquistCurve> {
    Ok(sample_shifted(&design.loop_fn.g_inverse, design.lambda, &design.sampling)?)
}

pub fn nyquist(design: &Design, out: &Path, disk_out: &Path, svg: Option<&Path>) -> Result<NyquistSummary> {
    let curve = nyquist_curve(design)?;
    let k = design.nl.slope();
    let winding = winding_number(&curve, Complex64::new(0.0, 0.0))?;
    let disk = disk_margin(&curve, k)?;
    let boundary = disk_boundary(k, DISK_POINTS);

    write_csv(
        out,
        &["omega", "re", "im"],
        curve.iter().map(|(w, v)| vec![num(w), num(v.re), num(v.im)]),
    )?;
    write_csv(
        disk_out,
        &["theta", "re", "im"],
        boundary.iter().enumerate().map(|(i, z)| {
            let theta = 2.0 * std::f64::consts::PI * i as f64 / DISK_POINTS as f64;
            vec![num(theta), num(z.re), num(z.im)]
        }),
    )?;
    if let Some(svg) = svg {
        let mut closed: Vec<(f64, f64)> = boundary.iter().map(|z| (z.re, z.im)).collect();
        closed.push(closed[0]);
        let plot = Plot {
            title: format!("Shifted inverse loop, lambda = {}", design.lambda),
            x_label: "Re".into(),
            y_label: "Im".into(),
            series: vec![
                Series {
                    label: "C^-1(s-l) + 2P(s-l)".into(),
                    color: "#1f77b4",
                    points: curve.values.iter().map(|v| (v.re, v.im)).collect(),
                    scatter: false,
                },
                Series {
                    label: format!("disk, K = {k:.3}"),
                    color: "#d62728",
                    points: closed,
                    scatter: false,
                },
            ],
        };
        write_atomic(svg, plot.render().as_bytes())?;
    }
    Ok(NyquistSummary {
        samples: curve.len(),
        omega_max: curve.omega_max(),
        winding,
        k,
        margin: disk.margin,
        disk_pass: disk.pass,
    })
}

/// `2/G(0)`, or `10 K` when `G(0) = 0`.
pub fn default_kmax(design: &Design) -> f64 {
    match design.loop_fn.dc_gain() {
        Some(g0) if g0 > 0.0 => 2.0 / g0,
        _ => 10.0 * design.nl.slope().max(1e-3),
    }
}

pub fn rootlocus(
    design: &Design,
    kmax: Option<f64>,
    steps: usize,
    out: &Path,
    svg: Option<&Path>,
) -> Result<RootLocusBranch> {
    let kmax = kmax.unwrap_or_else(|| default_kmax(design));
    if !(kmax > 0.0 && kmax.is_finite()) {
        bail!("--kmax must be positive, got {kmax}");
    }
    let locus = root_locus(&design.loop_fn, &geometric_gains(kmax, steps))?;
    let rows = locus
        .gains
        .iter()
        .zip(&locus.roots_per_gain)
        .flat_map(|(k, roots)| roots.iter().map(move |r| vec![num(*k), num(r.re), num(r.im)]));
    write_csv(out, &["K", "re", "im"], rows)?;
    if let Some(svg) = svg {
        let plot = Plot {
            title: "Positive-feedback root locus".into(),
            x_label: "Re s".into(),
            y_label: "Im s".into(),
            series: vec![Series {
                label: format!("0 <= K <= {kmax:.3}"),
                color: "#2ca02c",
                points: locus.roots_per_gain.iter().flatten().map(|r| (r.re, r.im)).collect(),
                scatter: true,
            }],
        };
        write_atomic(svg, plot.render().as_bytes())?;
    }
    Ok(locus)
}

pub fn simulation(design: &Design, out: Option<&Path>, svg: Option<&Path>) -> Result<SimulationRun> {
    let cfg = design.config.sim.unwrap_or_default();
    let run = simulate(design, &cfg)?;
    let traj = &run.trajectory;
    if let Some(out) = out {
        let mut header = vec!["t", "dv", "di"];
        if traj.motor.is_some() {
            header.extend(["motor_current", "motor_speed"]);
        }
        let rows = (0..traj.len()).map(|k| {
            let mut row = vec![num(traj.time(k)), num(traj.output_dv[k]), num(traj.input_di[k])];
            if let Some(m) = &traj.motor {
                row.extend([num(m[k][0]), num(m[k][1])]);
            }
            row
        });
        write_csv(out, &header, rows)?;
    }
    if let Some(svg) = svg {
        let stride = (traj.len() / 4000).max(1);
        let plot = Plot {
            title: "Closed-loop simulation".into(),
            x_label: "t [s]".into(),
            y_label: "dV [V]".into(),
            series: vec![Series {
                label: "dV".into(),
                color: "#1f77b4",
                points: (0..traj.len()).step_by(stride).map(|k| (traj.time(k), traj.output_dv[k])).collect(),
                scatter: false,
            }],
        };
        write_atomic(svg, plot.render().as_bytes())?;
    }
    Ok(run)
}

/// Parses `start:stop:step`; the stop value is included when reached.
pub fn parse_range(spec: &str) -> Result<Vec<f64>> {
    let parts: Vec<&str> = spec.split(':').collect();
    let [start, stop, step] = parts.as_slice() else {
        bail!("range must be start:stop:step, got {spec:?}");
    };
    let parse = |s: &str| -> Result<f64> {
        s.trim().parse::<f64>().with_context(|| format!("bad number {s:?} in range"))
    };
    let (start, stop, step) = (parse(start)?, parse(stop)?, parse(step)?);
    if !(step > 0.0 && step.is_finite() && start.is_finite() && stop.is_finite()) {
        bail!("range step must be positive and bounds finite");
    }
    if start > stop {
        return Ok(Vec::new());
    }
    let count = ((stop - start) / step + 1e-9).floor() as usize + 1;
    Ok((0..count)
        .map(|k| {
            let v = start + k as f64 * step;
            // Trim accumulated binary noise so 3 + 10 * 0.1 prints as 4.
            (v * 1e9).round() / 1e9
        })
        .collect())
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepRow {
    pub value: f64,
    pub certified: bool,
    pub dominance: Option<bool>,
    pub design_conditions: Option<bool>,
    pub unique: Option<bool>,
    pub origin_unstable: Option<bool>,
    pub reasons: String,
}

pub fn sweep_row(config: &DesignConfig, param: &str, value: f64) -> Result<SweepRow> {
    let swept = config.with_param(param, value)?;
    let outcome = swept.build().and_then(|d| analyze(&d, false));
    Ok(match outcome {
        Ok(r) => SweepRow {
            value,
            certified: r.verdict.oscillation_certified,
            dominance: Some(r.dominance.overall),
            design_conditions: r.rlc_or_rc_verdict.map(|v| v.pass),
            unique: Some(r.equilibria.unique),
            origin_unstable: Some(r.equilibria.origin().unstable),
            reasons: r.verdict.reasons.join("; "),
        },
        Err(e) => SweepRow {
            value,
            certified: false,
            dominance: None,
            design_conditions: None,
            unique: None,
            origin_unstable: None,
            reasons: format!("error: {e:#}"),
        },
    })
}

pub fn sweep(config: &DesignConfig, param: &str, range: &str, out: &Path) -> Result<Vec<SweepRow>> {
    let values = parse_range(range)?;
    // Validate the path even when the range is empty.
    config.with_param(param, 1.0)?;
    let rows = values
        .iter()
        .map(|&v| sweep_row(config, param, v))
        .collect::<Result<Vec<_>>>()?;
    let flag = |b: Option<bool>| b.map(|b| b.to_string()).unwrap_or_default();
    write_csv(
        out,
        &["value", "certified", "dominance", "design_conditions", "unique", "origin_unstable", "reasons"],
        rows.iter().map(|r| {
            vec![
                num(r.value),
                r.certified.to_string(),
                flag(r.dominance),
                flag(r.design_conditions),
                flag(r.unique),
                flag(r.origin_unstable),
                r.reasons.clone(),
            ]
        }),
    )?;
    Ok(rows)
}
