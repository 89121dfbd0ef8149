//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.
//!
//! cargo test --release --test acceptance

mod common;

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::{Duration, Instant};

use dacgrid::dac::{dac_compute, DacInputs, DacMode};
use dacgrid::engine::metrics::{in_band, Thresholds};
use dacgrid::engine::sweep::{size_sweep, sweep_csv};
use dacgrid::engine::{run_scenario, RunOutput};
use dacgrid::model::{gfl_frt_step, DacConfig, GflState, InverterParams, TripCause};
use dacgrid::scenario::{load_bundled, set_param, ScenarioDoc};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::json;

type Outcome = Result<String, String>;

macro_rules! ensure {
    ($cond:expr, $($fmt:tt)+) => {
        if !$cond {
            return Err(format!($($fmt)+));
        }
    };
}

fn timed<T>(f: impl FnOnce() -> T) -> (T, Duration) {
    let t0 = Instant::now();
    let v = f();
    (v, t0.elapsed())
}

fn run(doc: &ScenarioDoc) -> Result<RunOutput, String> {
    run_scenario(doc).map_err(|e| format!("{}: {e}", doc.name))
}

fn with_dac(doc: &ScenarioDoc, on: bool) -> ScenarioDoc {
    let mut d = doc.clone();
    d.dac.enabled = on;
    d
}

fn bundled(name: &str) -> Result<ScenarioDoc, String> {
    load_bundled(name).ok_or_else(|| format!("bundled scenario {name} missing"))
}

fn monitor_series(out: &RunOutput, doc: &ScenarioDoc) -> Result<Vec<(f64, f64)>, String> {
    out.trace
        .bus_series(doc.monitor_bus())
        .ok_or_else(|| "monitor bus not traced".to_string())
}

// Straight-line controller, written out independently of the library.
fn reference_setpoint(omega: f64, p_inv: f64, q_inv: f64, p_star: f64, m_p: f64, cfg: &DacConfig) -> f64 {
    let q = cfg.q as i32;
    let b_min = omega - cfg.omega_min;
    let b_max = omega - cfg.omega_max;
    let lo = p_inv + (omega - 60.0 - cfg.alpha * b_min.powi(q)) / m_p;
    let up = p_inv + (omega - 60.0 - cfg.alpha * b_max.powi(q)) / m_p;
    let p = if b_min >= 0.0 && b_max <= 0.0 { p_star } else { up.min(lo.max(p_star)) };
    let cap = (1.0 - q_inv * q_inv).sqrt();
    cap.min(cfg.p_set_min.max(p))
}

fn c1_kernel() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_dac1);
    let n = 10_000;
    let (res, elapsed) = timed(|| -> Result<(usize, usize, f64), String> {
        let (mut inside, mut outside, mut worst) = (0, 0, 0.0_f64);
        for i in 0..n {
            let cfg = DacConfig {
                enabled: true,
                omega_min: 60.0 - rng.gen_range(0.05..1.0),
                omega_max: 60.0 + rng.gen_range(0.05..1.0),
                alpha: 10.0 * (1.0 - rng.gen::<f64>()),
                q: [1, 3, 5][rng.gen_range(0..3)],
                p_set_min: rng.gen_range(0.0..0.2),
            };
            let inv = InverterParams {
                s_inv: 100.0,
                m_p: rng.gen_range(0.2..5.0),
                tau: 0.05,
                p_min: 0.0,
                p_max: 1.0,
                omega0: 60.0,
                storage: false,
                tau_filter: None,
            };
            let inputs = DacInputs {
                omega: rng.gen_range(58.0..62.0),
                p_inv: rng.gen_range(-0.5..1.5),
                q_inv: rng.gen_range(-0.99..0.99),
                p_set_star: rng.gen_range(-0.5..1.5),
            };
            let d = dac_compute(&inputs, &inv, &cfg).map_err(|e| format!("sample {i}: {e}"))?;
            let clamp = |p: f64| p.max(cfg.p_set_min).min((1.0 - inputs.q_inv.powi(2)).sqrt());
            let in_band = cfg.omega_min <= inputs.omega && inputs.omega <= cfg.omega_max;
            if in_band {
                inside += 1;
                ensure!(d.active == DacMode::Passthrough, "sample {i}: in band but mode {:?}", d.active);
                ensure!(
                    d.p_set.to_bits() == clamp(inputs.p_set_star).to_bits(),
                    "sample {i}: in-band output {} is not the dispatched value {}",
                    d.p_set,
                    inputs.p_set_star
                );
            } else {
                outside += 1;
                let combined = d.p_set_up.min(d.p_set_low.max(inputs.p_set_star));
                ensure!(
                    d.p_set.to_bits() == clamp(combined).to_bits(),
                    "sample {i}: combiner mismatch {} vs {}",
                    d.p_set,
                    clamp(combined)
                );
            }
            ensure!(
                d.p_set * d.p_set + inputs.q_inv * inputs.q_inv <= 1.0 + 1e-12,
                "sample {i}: capacity exceeded"
            );
            let r = reference_setpoint(
                inputs.omega,
                inputs.p_inv,
                inputs.q_inv,
                inputs.p_set_star,
                inv.m_p,
                &cfg,
            );
            let err = (r - d.p_set).abs();
            worst = worst.max(err);
            ensure!(err <= 1e-12, "sample {i}: reference {r} vs {}", d.p_set);
        }
        Ok((inside, outside, worst))
    });
    let (inside, outside, worst) = res?;
    ensure!(elapsed < Duration::from_secs(1), "took {elapsed:?}");
    ensure!(inside > 100 && outside > 100, "poor coverage: {inside} in band, {outside} outside");
    Ok(format!(
        "{n} samples ({inside} in band, {outside} outside), max |Δ| = {worst:.1e}, {elapsed:.0?}"
    ))
}

fn c2_boundary_convergence() -> Outcome {
    let (tau, alpha, omega_min, x0) = (0.05, 1250.0, 59.9, -0.05);
    let doc = common::single_gfm(
        0.5,
        0.2,
        omega_min + x0,
        json!({ "tau": tau }),
        json!({ "enabled": true, "omega_min": omega_min, "omega_max": 60.1, "alpha": alpha, "q": 3 }),
        30.0,
    );
    let (out, elapsed) = timed(|| run(&doc));
    let out = out?;
    ensure!(elapsed < Duration::from_secs(1), "took {elapsed:?}");

    let series = out
        .trace
        .device_series("gfm1")
        .ok_or("gfm1 missing from trace")?;
    let sub = 10;
    let h = doc.sim.dt / sub as f64;
    let n = series.len() - 1;
    let reduced = common::rk4_scalar(|x| -alpha * x.powi(3) / tau, x0, h, n * sub);
    let mut worst = 0.0_f64;
    let mut worst_closed = 0.0_f64;
    for (k, (t, s)) in series.iter().enumerate() {
        let x = s.omega - omega_min;
        let oracle = reduced[k * sub];
        let closed = x0 / (1.0 + 2.0 * alpha * x0 * x0 * t / tau).sqrt();
        worst = worst.max((x - oracle).abs());
        worst_closed = worst_closed.max((x - closed).abs());
    }
    ensure!(worst <= 1e-6, "max deviation from reduced dynamics {worst:.3e} Hz");
    ensure!(worst_closed <= 1e-6, "max deviation from closed form {worst_closed:.3e} Hz");
    let last = series.last().unwrap();
    let gap = (last.1.omega - omega_min).abs();
    ensure!(gap <= 1e-3, "|ω − ω_min| = {gap:.3e} at t = {}", last.0);
    Ok(format!(
        "max |Δ| = {worst:.1e} Hz (closed form {worst_closed:.1e}), |ω − ω_min| = {gap:.1e} at {:.0} s, {elapsed:.0?}",
        last.0
    ))
}

fn droop_step_error(dt: f64) -> Result<f64, String> {
    let tau = 0.01;
    let mut doc = common::single_gfm(
        0.5,
        0.2,
        60.0,
        json!({ "tau": tau }),
        json!({ "enabled": false }),
        0.1,
    );
    doc.sim.dt = dt;
    let out = run(&doc)?;
    let series = out.trace.device_series("gfm1").ok_or("gfm1 missing")?;
    Ok(series
        .iter()
        .map(|(t, s)| (s.omega - (59.7 + 0.3 * (-t / tau).exp())).abs())
        .fold(0.0, f64::max))
}

fn c3_integrator_order() -> Outcome {
    let e1 = droop_step_error(1e-3)?;
    let e2 = droop_step_error(5e-4)?;
    let ratio = e1 / e2;
    ensure!(e1 < 1e-6, "error {e1:.3e} Hz at dt = 1 ms");
    ensure!(ratio >= 12.0, "halving dt reduced the error only {ratio:.2}×");
    Ok(format!("error {e1:.2e} Hz at 1 ms, {e2:.2e} Hz at 0.5 ms, ratio {ratio:.1}"))
}

fn dwell_trips(below_steps: usize) -> Result<bool, String> {
    let dt = 1e-3;
    let mut s = GflState::new(100.0, 1.0);
    for _ in 0..below_steps {
        s = gfl_frt_step(&s, 56.4, dt).map_err(|e| e.to_string())?;
    }
    s = gfl_frt_step(&s, 57.0, dt).map_err(|e| e.to_string())?;
    Ok(s.tripped)
}

fn c4_frt_timing() -> Outcome {
    ensure!(!dwell_trips(159)?, "tripped after 159 ms below threshold");
    ensure!(dwell_trips(161)?, "no trip after 161 ms below threshold");
    ensure!(dwell_trips(160)?, "no trip after exactly 160 ms below threshold");

    let dt = 1e-3;
    let mut s = GflState::new(100.0, 1.0);
    let mut trip_step = None;
    for k in 0..400 {
        let f = if k == 150 { 56.6 } else { 56.0 };
        s = gfl_frt_step(&s, f, dt).map_err(|e| e.to_string())?;
        if s.tripped && trip_step.is_none() {
            trip_step = Some(k);
        }
    }
    ensure!(trip_step == Some(310), "after recovery at step 150 the relay tripped at {trip_step:?}, expected 310");
    ensure!(s.cause == Some(TripCause::UnderFrequency), "trip cause {:?}", s.cause);
    Ok("159 ms: hold, 160/161 ms: trip, one-sample recovery resets dwell".into())
}

/// Time after `t_event` from which the series stays in band until `t_stop`.
fn reentry_time(series: &[(f64, f64)], th: &Thresholds, t_event: f64, t_stop: f64) -> Option<f64> {
    let window: Vec<&(f64, f64)> = series
        .iter()
        .filter(|(t, _)| *t >= t_event && *t < t_stop)
        .collect();
    let last_out = window.iter().rposition(|(_, f)| !in_band(*f, th));
    match last_out {
        None => Some(0.0),
        Some(i) if i + 1 < window.len() => Some(window[i + 1].0 - t_event),
        Some(_) => None,
    }
}

fn mean_between(series: &[(f64, f64)], t0: f64, t1: f64) -> f64 {
    let v: Vec<f64> = series
        .iter()
        .filter(|(t, _)| *t >= t0 && *t < t1)
        .map(|(_, f)| *f)
        .collect();
    v.iter().sum::<f64>() / v.len() as f64
}

fn c5_transient_band() -> Outcome {
    let doc = bundled("transient_band")?;
    let th = doc.thresholds();
    let (on, t_on) = timed(|| run(&with_dac(&doc, true)));
    let (off, t_off) = timed(|| run(&with_dac(&doc, false)));
    let (on, off) = (on?, off?);
    ensure!(
        t_on < Duration::from_secs(5) && t_off < Duration::from_secs(5),
        "runtimes {t_on:?} / {t_off:?}"
    );

    let s_on = monitor_series(&on, &doc)?;
    let r1 = reentry_time(&s_on, &th, 1.0, 12.0).ok_or("never re-entered the band after t = 1 s")?;
    let r2 = reentry_time(&s_on, &th, 12.0, doc.sim.t_end + 1.0)
        .ok_or("never re-entered the band after t = 12 s")?;
    ensure!(r1 <= 2.0 && r2 <= 2.0, "re-entry after {r1:.2} s and {r2:.2} s");

    let s_off = monitor_series(&off, &doc)?;
    let islanded = mean_between(&s_off, 10.0, 12.0);
    let settled = off.metrics.settled_frequency;
    ensure!(!in_band(islanded, &th), "without control, islanded frequency {islanded:.4} Hz is in band");
    ensure!(
        settled < th.omega_min - th.band_tol,
        "without control, final frequency {settled:.4} Hz does not settle below the band"
    );
    Ok(format!(
        "with DAC re-entry {r1:.2} s / {r2:.2} s; without DAC {islanded:.3} Hz islanded, {settled:.3} Hz after reconnect; {t_on:.0?} / {t_off:.0?}"
    ))
}

fn c6_large_disturbance() -> Outcome {
    let doc = bundled("large_disturbance")?;
    let gfls: Vec<&str> = doc
        .devices
        .iter()
        .filter(|d| d.kind() == "gfl")
        .map(|d| d.id())
        .collect();
    let off = run(&with_dac(&doc, false))?;
    for id in &gfls {
        ensure!(
            off.trips
                .iter()
                .any(|t| t.device == *id && t.cause == TripCause::UnderFrequency),
            "without DAC {id} did not trip"
        );
    }
    ensure!(off.metrics.collapsed, "without DAC the system did not collapse");

    let on = run(&with_dac(&doc, true))?;
    let gfl_trips: Vec<&str> = on
        .trips
        .iter()
        .filter(|t| gfls.contains(&t.device.as_str()))
        .map(|t| t.device.as_str())
        .collect();
    ensure!(gfl_trips.is_empty(), "with DAC these GFLs tripped: {gfl_trips:?}");
    ensure!(!on.metrics.collapsed, "with DAC the system collapsed");
    let peak_set = on
        .trace
        .device_series("gfm1")
        .ok_or("gfm1 missing")?
        .iter()
        .map(|(_, s)| s.p_set_applied)
        .fold(f64::MIN, f64::max);
    ensure!((peak_set - 1.0).abs() <= 1e-9, "GFM set-point peaked at {peak_set}, not 1.0 pu");
    Ok(format!(
        "without DAC {} GFLs trip, collapse at t = {:.3} s; with DAC set-point reaches {peak_set:.3} pu, nadir {:.3} Hz",
        gfls.len(),
        off.collapses.first().map_or(f64::NAN, |c| c.t),
        on.metrics.nadir
    ))
}

fn c7_size_sweep() -> Outcome {
    let doc = bundled("large_disturbance")?;
    let sizes: Vec<f64> = (0..=12).map(|i| 40.0 + 5.0 * i as f64).collect();
    let rows = size_sweep(&doc, "gfm1.s_inv", &sizes).map_err(|e| e.to_string())?;
    for w in rows.windows(2) {
        ensure!(
            w[1].dac_on.violation_time <= w[0].dac_on.violation_time + 1e-9,
            "with DAC violation time rises from {} kVA to {} kVA",
            w[0].value,
            w[1].value
        );
        ensure!(
            w[1].dac_off.violation_time <= w[0].dac_off.violation_time + 1e-9,
            "without DAC violation time rises from {} kVA to {} kVA",
            w[0].value,
            w[1].value
        );
    }
    for r in &rows {
        ensure!(
            r.dac_on.violation_time <= r.dac_off.violation_time + 1e-9,
            "at {} kVA the DAC run violates longer",
            r.value
        );
    }
    let only_dac: Vec<f64> = rows
        .iter()
        .filter(|r| !r.dac_on.collapsed && r.dac_off.collapsed)
        .map(|r| r.value)
        .collect();
    ensure!(!only_dac.is_empty(), "no size where only the DAC run survives");
    let survive = |on: bool| {
        rows.iter()
            .find(|r| !if on { r.dac_on.collapsed } else { r.dac_off.collapsed })
            .map_or(f64::NAN, |r| r.value)
    };
    Ok(format!(
        "smallest surviving size {} kVA with DAC, {} kVA without; DAC-only band {:?} kVA",
        survive(true),
        survive(false),
        only_dac
    ))
}

fn c8_setpoint_attack() -> Outcome {
    let doc = bundled("setpoint_attack")?;
    let th = doc.thresholds();
    let attack = doc.secondary.attack.clone().ok_or("scenario has no attack")?;
    let (t0, t1) = (attack.t_on, attack.t_off);
    let mut event_times: Vec<f64> = doc.events.iter().map(|e| e.at).collect();
    event_times.extend([t0, t1]);
    let settled = |t: f64| !event_times.iter().any(|&e| t >= e && t < e + 2.0);

    let off = run(&with_dac(&doc, false))?;
    let s_off = monitor_series(&off, &doc)?;
    let exits = s_off
        .iter()
        .filter(|(t, f)| *t >= t0 && *t <= t1 && !in_band(*f, &th))
        .count();
    ensure!(exits > 0, "without DAC the frequency never left the band during the attack");

    let on = run(&with_dac(&doc, true))?;
    let s_on = monitor_series(&on, &doc)?;
    let window: Vec<f64> = s_on
        .iter()
        .filter(|(t, _)| *t >= t0 && *t <= t1 && settled(*t))
        .map(|(_, f)| *f)
        .collect();
    let occ = window.iter().filter(|f| in_band(**f, &th)).count() as f64 / window.len() as f64;
    ensure!(occ >= 0.95, "occupancy during the attack {occ:.4}");

    let star_range = |id: &str| -> Result<f64, String> {
        let s = on.trace.device_series(id).ok_or(format!("{id} missing"))?;
        let v: Vec<f64> = s
            .iter()
            .filter(|(t, _)| *t > t0 && *t < t1)
            .map(|(_, d)| d.p_set_star)
            .collect();
        let lo = v.iter().cloned().fold(f64::MAX, f64::min);
        let hi = v.iter().cloned().fold(f64::MIN, f64::max);
        Ok(hi - lo)
    };
    let free = star_range("gfm1")?;
    ensure!(free > 1e-3, "untargeted gfm1 set-point did not move during the attack");
    for id in &attack.targets {
        let r = star_range(id)?;
        ensure!(r <= 1e-12, "targeted {id} set-point moved by {r:.3e} during the attack");
    }
    Ok(format!(
        "without DAC {:.2} s out of band in the window; with DAC occupancy {occ:.4}; gfm1 set-point range {free:.3} pu, targets frozen",
        exits as f64 * off.trace.record_interval()
    ))
}

fn traces_under_pool(doc: &ScenarioDoc, sizes: &[f64], threads: usize) -> Result<Vec<String>, String> {
    use rayon::prelude::*;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| e.to_string())?;
    pool.install(|| {
        sizes
            .par_iter()
            .map(|&s| {
                let d = set_param(doc, "gfm1.s_inv", s).map_err(|e| e.to_string())?;
                Ok(run(&d)?.trace.to_csv_string())
            })
            .collect()
    })
}

fn sweep_under_pool(doc: &ScenarioDoc, sizes: &[f64], threads: usize) -> Result<String, String> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| e.to_string())?;
    pool.install(|| size_sweep(doc, "gfm1.s_inv", sizes))
        .map(|rows| sweep_csv(&rows))
        .map_err(|e| e.to_string())
}

fn c9_determinism() -> Outcome {
    let mut bytes = 0;
    for name in dacgrid::scenario::BUNDLED {
        let doc = bundled(name)?;
        for on in [true, false] {
            let d = with_dac(&doc, on);
            let a = run(&d)?.trace.to_csv_string();
            let b = run(&d)?.trace.to_csv_string();
            ensure!(a == b, "{name} (dac {on}) traces differ between runs");
            bytes += a.len();
        }
    }
    let b = bundled("large_disturbance")?;
    let sizes = [45.0, 60.0, 75.0, 90.0];
    let serial = traces_under_pool(&b, &sizes, 1)?;
    let parallel = traces_under_pool(&b, &sizes, 4)?;
    ensure!(serial == parallel, "traces depend on the thread count");
    let s1 = sweep_under_pool(&b, &sizes, 1)?;
    let s4 = sweep_under_pool(&b, &sizes, 4)?;
    ensure!(s1 == s4, "sweep table depends on the thread count");
    Ok(format!(
        "{} runs byte-identical ({bytes} bytes per pass), 1 vs 4 threads identical",
        2 * dacgrid::scenario::BUNDLED.len()
    ))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 9] = [
        ("1 dac kernel conformance", c1_kernel),
        ("2 boundary convergence", c2_boundary_convergence),
        ("3 integrator order", c3_integrator_order),
        ("4 ride-through relay timing", c4_frt_timing),
        ("5 transient band (scenario A)", c5_transient_band),
        ("6 large disturbance (scenario B)", c6_large_disturbance),
        ("7 inverter size sweep", c7_size_sweep),
        ("8 set-point attack (scenario C)", c8_setpoint_attack),
        ("9 determinism", c9_determinism),
    ];
    let mut failed = 0;
    for (name, f) in criteria {
        let outcome = catch_unwind(AssertUnwindSafe(f))
            .unwrap_or_else(|p| Err(format!("panicked: {}", panic_text(&p))));
        match outcome {
            Ok(detail) => println!("PASS  {name}: {detail}"),
            Err(detail) => {
                failed += 1;
                println!("FAIL  {name}: {detail}");
            }
        }
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}

fn panic_text(p: &Box<dyn std::any::Any + Send>) -> String {
    p.downcast_ref::<&str>()
        .map(|s| s.to_string())
        .or_else(|| p.downcast_ref::<String>().cloned())
        .unwrap_or_default()
}
