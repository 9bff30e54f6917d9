//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any fails.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use xcposc::criterion::{
    check_theorem2, check_theorem3_rlc, check_theorem4_rc, encirclement_oracle,
    sample_shifted_tracking, winding_number, SamplingOptions,
};
use xcposc::equilibria::{closed_loop_poles, solve_fixed_points};
use xcposc::netfun::make_loop;
use xcposc::poly::complex_roots;
use xcposc::sim::{
    default_dt, default_horizon, integrate, jacobian_at, measure, realize, Classification,
    DEFAULT_PERTURBATION, DEFAULT_TRANSIENT_FRACTION,
};
use xcposc::{
    DcMotorPlant, Polynomial, RationalFunction, RcController, RlcController, SectorNonlinearity,
};
use xcposc_cli::commands::sweep;
use xcposc_cli::config::{Design, DesignConfig, SimConfig};
use xcposc_cli::report::simulate;

type Outcome = Result<String, String>;

fn golden(name: &str) -> Design {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../configs")
        .join(format!("{name}.json"));
    DesignConfig::load(&path).unwrap().build().unwrap()
}

fn ensure(cond: bool, msg: impl Into<String>) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn motor_poles_and_zero() -> Outcome {
    let start = Instant::now();
    let p = DcMotorPlant::nominal().admittance();
    let zeros = p.zeros().map_err(|e| e.to_string())?.expanded();
    let mut poles: Vec<f64> = p.poles().map_err(|e| e.to_string())?.expanded().iter().map(|z| z.re).collect();
    let elapsed = start.elapsed();
    poles.sort_by(f64::total_cmp);
    ensure(zeros.len() == 1 && (zeros[0].re + 10.0).abs() <= 0.01, format!("zeros {zeros:?}"))?;
    ensure(
        poles.len() == 2 && (poles[0] + 9.83).abs() <= 0.01 && (poles[1] + 4.17).abs() <= 0.01,
        format!("poles {poles:?}"),
    )?;
    ensure(elapsed < Duration::from_millis(1), format!("took {elapsed:?}"))?;
    Ok(format!("zero {:.3}, poles {:.3}, {:.3} in {elapsed:?}", zeros[0].re, poles[0], poles[1]))
}

fn rlc_designs_pass() -> Outcome {
    let start = Instant::now();
    let plant = DcMotorPlant::nominal().admittance();
    let nl = SectorNonlinearity::new(5.0, 2.0).unwrap();
    ensure((nl.slope() - 3.16).abs() < 0.005, "K != 3.16")?;
    let mut margins = Vec::new();
    for (l, c) in [(1.0, 1.0), (1.0, 5.0), (5.0, 1.0)] {
        let ctrl = RlcController::new(100.0, l, c).unwrap();
        let t3 = check_theorem3_rlc(&plant, &ctrl, 2.0).map_err(|e| e.to_string())?;
        ensure(t3.pass, format!("RLC conditions fail for L={l}, C={c}: {t3:?}"))?;
        let lf = make_loop(&ctrl.impedance(), &plant).unwrap();
        let t2 = check_theorem2(&lf, &nl, 2.0).map_err(|e| e.to_string())?;
        ensure(t2.overall, format!("dominance fails for L={l}, C={c}"))?;
        margins.push(t2.cond3_disk.unwrap().margin);
    }
    let elapsed = start.elapsed();
    ensure(elapsed < Duration::from_secs(1), format!("took {elapsed:?}"))?;
    Ok(format!("disk margins {margins:.3?} in {elapsed:?}"))
}

fn rc_design_numbers() -> Outcome {
    let plant = DcMotorPlant::nominal().admittance();
    let ctrl = RcController::new(1.5, 0.1).unwrap();
    let t4 = check_theorem4_rc(&plant, &ctrl, 8.0).map_err(|e| e.to_string())?;
    ensure(t4.pass, format!("RC conditions fail: {t4:?}"))?;
    let g0 = make_loop(&ctrl.impedance(), &plant).unwrap().dc_gain().unwrap();
    let threshold = 1.0 / (5.0 * g0 * g0);
    ensure((g0 - 0.61).abs() <= 0.01, format!("G(0) = {g0}"))?;
    ensure((threshold - 0.54).abs() <= 0.01, format!("current threshold {threshold}"))?;
    Ok(format!("G(0) = {g0:.4}, I threshold = {threshold:.4}"))
}

fn frequency(name: &'static str, target: f64) -> impl Fn() -> Outcome {
    move || {
        let start = Instant::now();
        let run = simulate(&golden(name), &SimConfig::default()).map_err(|e| e.to_string())?;
        let elapsed = start.elapsed();
        let m = run.metrics;
        ensure(m.classification == Classification::LimitCycle, format!("{:?}", m.classification))?;
        let rel = (m.frequency - target) / target;
        ensure(
            rel.abs() <= 0.10,
            format!("omega = {:.4} rad/s vs {target} ({:+.1}%)", m.frequency, 100.0 * rel),
        )?;
        ensure(elapsed < Duration::from_secs(30), format!("took {elapsed:?}"))?;
        Ok(format!("omega = {:.4} rad/s vs {target} ({:+.1}%) in {elapsed:.2?}", m.frequency, 100.0 * rel))
    }
}

fn feasibility_band() -> Outcome {
    let config = golden("rc_design").config;
    let dir = tempfile::tempdir().unwrap();
    let rows = sweep(&config, "controller.inv_rc", "3:9:0.1", &dir.path().join("sweep.csv"))
        .map_err(|e| e.to_string())?;
    ensure(rows.len() == 61, format!("{} rows", rows.len()))?;
    let passing: Vec<usize> = (0..rows.len()).filter(|&i| rows[i].certified).collect();
    let (first, last) = match (passing.first(), passing.last()) {
        (Some(&a), Some(&b)) => (a, b),
        _ => return Err("no passing values".into()),
    };
    ensure(last - first + 1 == passing.len(), "passing set is not contiguous")?;
    let (lo, hi) = (rows[first].value, rows[last].value);
    ensure(
        (lo - 4.17).abs() <= 0.15 && (hi - 8.0).abs() <= 0.15,
        format!("band [{lo}, {hi}]"),
    )?;
    Ok(format!("band [{lo}, {hi}]"))
}

fn random_roots(rng: &mut ChaCha8Rng, degree: usize, lambda: f64) -> Vec<Complex64> {
    let mut roots = Vec::new();
    while roots.len() < degree {
        let re = rng.gen_range(-6.0..4.0);
        if (re + lambda).abs() < 0.05 {
            continue;
        }
        if degree - roots.len() >= 2 && rng.gen_bool(0.5) {
            let im = rng.gen_range(0.2..6.0);
            roots.extend([Complex64::new(re, im), Complex64::new(re, -im)]);
        } else {
            roots.push(Complex64::new(re, 0.0));
        }
    }
    roots
}

fn oracle_equivalence() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(0xACCE);
    let (mut checked, mut skipped) = (0, 0);
    while checked < 200 {
        let lambda = rng.gen_range(0.0..3.0);
        let (nd, dd) = (rng.gen_range(0..=6), rng.gen_range(0..=6));
        let num = Polynomial::from_roots(&random_roots(&mut rng, nd, lambda)).scaled(rng.gen_range(0.2..4.0));
        let den = Polynomial::from_roots(&random_roots(&mut rng, dd, lambda));
        let f = RationalFunction::new(num, den).unwrap();
        let center = Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
        let len = f.numerator().coeffs().len().max(f.denominator().coeffs().len());
        let offset: Vec<Complex64> = (0..len)
            .map(|k| Complex64::new(f.numerator().coeff(k), 0.0) - center * f.denominator().coeff(k))
            .collect();
        let degenerate = complex_roots(&offset)
            .map(|r| r.iter().any(|z| (z.re + lambda).abs() < 0.05))
            .unwrap_or(false);
        if degenerate {
            skipped += 1;
            continue;
        }
        let curve = sample_shifted_tracking(&f, lambda, &SamplingOptions::default(), &[center])
            .map_err(|e| format!("{f}: {e}"))?;
        let sampled = winding_number(&curve, center).map_err(|e| format!("{f}: {e}"))?;
        let oracle = encirclement_oracle(&f, lambda, center).map_err(|e| e.to_string())?;
        ensure(sampled == oracle, format!("{f} lambda={lambda} center={center}: {sampled} vs {oracle}"))?;
        checked += 1;
    }
    let elapsed = start.elapsed();
    ensure(elapsed < Duration::from_secs(10), format!("took {elapsed:?}"))?;
    Ok(format!("{checked} agree, {skipped} degenerate draws skipped, {elapsed:.2?}"))
}

fn spectral_check() -> Outcome {
    let mut worst = 0.0f64;
    for name in ["design1", "design2", "design3", "rc_design"] {
        let d = golden(name);
        let ss = realize(&d.loop_fn.g).map_err(|e| e.to_string())?;
        let k = d.nl.slope();
        let eig = jacobian_at(&ss, &d.nl, &vec![0.0; ss.n]).complex_eigenvalues();
        let roots = closed_loop_poles(&d.loop_fn, k).map_err(|e| e.to_string())?;
        ensure(eig.len() == roots.len(), format!("{name}: dimension mismatch"))?;
        for e in eig.iter() {
            let nearest = roots.iter().map(|r| (r - e).norm()).fold(f64::INFINITY, f64::min);
            worst = worst.max(nearest);
        }
        ensure(worst <= 1e-6, format!("{name}: eigenvalue mismatch {worst:.3e}"))?;
    }
    Ok(format!("largest mismatch {worst:.2e}"))
}

fn property_suites() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for _ in 0..10_000 {
        let nl = SectorNonlinearity::new(rng.gen_range(0.1..20.0), rng.gen_range(0.01..10.0)).unwrap();
        let dv = rng.gen_range(-10.0..10.0);
        let y = nl.phi(dv);
        ensure(nl.phi(-dv) == -y, "phi is not odd")?;
        ensure(y.abs() <= nl.current() * (1.0 + 1e-12), "phi exceeds I")?;
        ensure(dv == 0.0 || (0.0..=nl.slope() * (1.0 + 1e-12)).contains(&(y / dv)), "sector violated")?;
    }

    for name in ["design1", "design2", "design3", "rc_design"] {
        realize(&golden(name).loop_fn.g).map_err(|e| format!("{name}: {e}"))?;
    }

    let d = golden("design1");
    let ss = realize(&d.loop_fn.g).unwrap();
    let w = d.omega_guess();
    let dt = default_dt(&ss, w);
    let x0 = ss.default_x0(DEFAULT_PERTURBATION);
    let freq = |dt: f64| {
        let traj = integrate(&ss, &d.nl, &x0, dt, default_horizon(w)).unwrap();
        measure(&traj, DEFAULT_TRANSIENT_FRACTION).frequency
    };
    let (coarse, fine) = (freq(dt), freq(dt / 2.0));
    let drift = (coarse - fine).abs() / fine;
    ensure(drift < 0.005, format!("step-halving drift {drift:.3e}"))?;

    for _ in 0..20 {
        let g0 = rng.gen_range(0.1..2.0);
        let nl = SectorNonlinearity::new(rng.gen_range(0.5..10.0), rng.gen_range(0.05..3.0)).unwrap();
        let positive: Vec<f64> = solve_fixed_points(g0, &nl).into_iter().filter(|&v| v > 0.0).collect();
        let edge = 2.0 * g0 * nl.current() + nl.v_sat();
        let n = 1_000_000;
        let step = 2.0 * edge / (n - 1) as f64;
        let h = |v: f64| v / g0 - nl.phi(v);
        let mut changes = Vec::new();
        let mut prev = h(-edge);
        for k in 1..n {
            let v = -edge + k as f64 * step;
            let hv = h(v);
            if prev != 0.0 && hv != 0.0 && prev.signum() != hv.signum() && v.abs() > step {
                changes.push(v);
            }
            prev = hv;
        }
        let scanned: Vec<f64> = changes.into_iter().filter(|v| *v > 0.0).collect();
        ensure(
            scanned.len() == positive.len()
                && scanned.iter().zip(&positive).all(|(a, b)| (a - b).abs() <= step),
            format!("g0={g0} {nl:?}: {positive:?} vs {scanned:?}"),
        )?;
    }
    Ok(format!("10^4 sector points, 4 realizations, drift {drift:.2e}, 20 equilibrium triples"))
}

fn main() -> ExitCode {
    let criteria: Vec<(&str, Box<dyn Fn() -> Outcome>)> = vec![
        ("1 motor pole/zero reproduction", Box::new(motor_poles_and_zero)),
        ("2 RLC designs 1-3 pass both checks", Box::new(rlc_designs_pass)),
        ("3 RC design numbers", Box::new(rc_design_numbers)),
        ("4 simulated frequency, design 1", Box::new(frequency("design1", 1.07))),
        ("4 simulated frequency, design 2", Box::new(frequency("design2", 0.52))),
        ("4 simulated frequency, design 3", Box::new(frequency("design3", 0.42))),
        ("4 simulated frequency, RC design", Box::new(frequency("rc_design", 4.32))),
        ("5 RC feasibility band", Box::new(feasibility_band)),
        ("6 winding oracle equivalence", Box::new(oracle_equivalence)),
        ("7 cross-module spectral check", Box::new(spectral_check)),
        ("8 property suites", Box::new(property_suites)),
    ];
    std::panic::set_hook(Box::new(|_| {}));
    let mut failed = 0;
    for (name, check) in &criteria {
        let outcome = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|p| {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panic".into());
            Err(format!("panicked: {msg}"))
        });
        match outcome {
            Ok(detail) => println!("criterion {name}: PASS ({detail})"),
            Err(detail) => {
                failed += 1;
                println!("criterion {name}: FAIL ({detail})");
            }
        }
    }
    println!("{} of {} acceptance checks passed", criteria.len() - failed, criteria.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
