//! End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
//! exits non-zero if any fails.

use std::fs;
use std::process::{Command, ExitCode};
use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use sls_core::architectures::{
    build_actuator_side_of, build_centralized_of, build_global_state_sf, build_memconserv_distributed_sf,
    build_naive_distributed_sf, hop_violations, sum_buffer, Architecture, Layout,
};
use sls_core::cost::formula::*;
use sls_core::cost::{measure_costs, predict_sf_costs, Dims};
use sls_core::realizations::{Controller, OfSimplified, SfSimplified, SfStandard};
use sls_core::simulate::{reference_closed_loop, Channel, Disturbances};
use sls_core::stability::{certify_unstable_extension, default_probe_horizon, internal_stability_probe, Signal};
use sls_core::synthesis::{quadruple_from_phiuy, synth_sf_h2, SynthesisSpec};
use sls_core::LtiSystem;
use sls_deploy::commands::{compare_controllers, Context};
use sls_deploy::LoadedScenario;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn ctx(json: &str) -> Context {
    Context::new(LoadedScenario::from_bytes(json.as_bytes()).expect("scenario"), None).expect("context")
}

const CHAIN3_SF: &str = r#"{
    "plant": { "kind": "chain", "n": 3, "a_diag": 0.4, "a_off": 0.2, "b_diag": 1.0 },
    "synthesis": { "route": "sf-h2", "horizon": 6 },
    "disturbances": [{ "kind": "random", "channel": "d_x", "amplitude": 1.0 }],
    "t_sim": 100,
    "seed": 2024
}"#;

const CHAIN3_OF: &str = r#"{
    "plant": { "kind": "chain", "n": 3, "a_diag": 0.4, "a_off": 0.2, "b_diag": 1.0, "measured": [0, 2] },
    "synthesis": { "route": "of-youla", "horizon": 6 },
    "disturbances": [
        { "kind": "random", "channel": "d_x", "amplitude": 1.0 },
        { "kind": "random", "channel": "d_y", "amplitude": 0.2 }
    ],
    "t_sim": 100,
    "seed": 11
}"#;

fn check(cond: bool, msg: String) -> Outcome {
    if cond {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn criterion_1() -> Outcome {
    let start = Instant::now();
    let c = ctx(CHAIN3_SF);
    let syn = c.synthesize().map_err(|e| e.to_string())?;
    let sls_deploy::commands::Synthesized::Sf(s) = &syn else {
        return Err("expected a state-feedback synthesis".into());
    };
    let mut ks: Vec<(String, Box<dyn Controller>)> =
        vec![("monolithic".into(), Box::new(SfStandard::new(&s.response).unwrap()))];
    for a in [
        Architecture::SfCentralized,
        Architecture::SfGlobalState,
        Architecture::SfNaive,
        Architecture::SfMemoryConservative,
    ] {
        ks.push((a.name().into(), Box::new(syn.build(&c.sys, a).unwrap())));
    }
    let cmp = compare_controllers(&c.sys, &c.disturbances(), 100, ks, 1e-9).map_err(|e| e.to_string())?;
    let elapsed = start.elapsed().as_secs_f64();
    check(
        cmp.passed() && elapsed < 5.0,
        format!("max relative deviation {:.2e} (tol 1e-9), runtime {elapsed:.2} s (limit 5 s)", cmp.max_vs_reference()),
    )
}

fn criterion_2() -> Outcome {
    let c = ctx(CHAIN3_OF);
    let syn = c.synthesize().map_err(|e| e.to_string())?;
    let sls_deploy::commands::Synthesized::Youla(y) = &syn else {
        return Err("expected a Youla synthesis".into());
    };
    let phi = &y.phi_uy;
    let mut ks: Vec<(String, Box<dyn Controller>)> =
        vec![("reference".into(), Box::new(OfSimplified::new(&c.sys, phi).unwrap()))];
    for a in [
        Architecture::OfCentralized,
        Architecture::OfSensorSide,
        Architecture::OfActuatorSide,
        Architecture::OfGlobalState,
    ] {
        ks.push((a.name().into(), Box::new(syn.build(&c.sys, a).unwrap())));
    }
    let cmp = compare_controllers(&c.sys, &c.disturbances(), 100, ks, 1e-9).map_err(|e| e.to_string())?;

    // lockstep: centralized estimate against the sum of per-actuator estimates
    let sys = &c.sys;
    let mut cen = build_centralized_of(sys, phi).unwrap();
    let mut act = build_actuator_side_of(sys, phi).unwrap();
    let center = Layout::of(&cen).center.unwrap();
    let actuators = Layout::of(&act).actuators;
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut x = DVector::zeros(sys.nx());
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let dy = DVector::from_fn(sys.ny(), |_, _| rng.random_range(-0.2..0.2));
        let y = sys.c() * &x + dy;
        let u = cen.step(&y).unwrap();
        act.step(&y).unwrap();
        let central = cen.node(center).unwrap().value("xhat[t]").unwrap();
        let summed = sum_buffer(&act, &actuators, "xhat_(k)[t]").unwrap();
        worst = worst.max((central - summed).amax());
        let dx = DVector::from_fn(sys.nx(), |_, _| rng.random_range(-1.0..1.0));
        x = sys.a() * x + sys.b() * u + dx;
    }
    check(
        cmp.passed() && worst <= 1e-10,
        format!(
            "max relative deviation {:.2e} (tol 1e-9), estimate telescoping {worst:.2e} (tol 1e-10)",
            cmp.max_vs_reference()
        ),
    )
}

fn criterion_3() -> Outcome {
    let c = ctx(CHAIN3_SF);
    let sls_deploy::commands::Synthesized::Sf(s) = c.synthesize().map_err(|e| e.to_string())? else {
        return Err("expected a state-feedback synthesis".into());
    };
    let mut worst: f64 = 0.0;
    for seed in [1u64, 77, 4096] {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut dist = Disturbances::new();
        let mut samples = Vec::new();
        for t in 0..80 {
            let v = DVector::from_fn(3, |_, _| rng.random_range(-3.0..3.0));
            dist.add(Channel::Dx, t, v.clone());
            samples.push(v);
        }
        let mut k = SfSimplified::new(&c.sys, &s.response.phi_u).unwrap();
        let tr = reference_closed_loop(&c.sys, &mut k, &dist, 80).unwrap();
        let delta = tr.signal("delta").ok_or("no delta signal")?;
        worst = worst.max(delta[0].amax());
        for t in 1..80 {
            worst = worst.max((&delta[t] - &samples[t - 1]).amax());
        }
    }
    check(worst <= 1e-12, format!("max |delta[t] - d_x[t-1]| {worst:.2e} over 3 seeds (tol 1e-12)"))
}

fn criterion_4() -> Outcome {
    let c = ctx(CHAIN3_SF);
    let sls_deploy::commands::Synthesized::Sf(s) = c.synthesize().map_err(|e| e.to_string())? else {
        return Err("expected a state-feedback synthesis".into());
    };
    let (sys, r) = (&c.sys, &s.response);
    let t_fir = r.horizon();
    let steps = 3 * t_fir + 10;
    let (mut dev, mut tail): (f64, f64) = (0.0, 0.0);
    for j in 0..sys.nx() {
        let mut k = SfSimplified::new(sys, &r.phi_u).unwrap();
        let dist = Disturbances::impulse(Channel::Dx, 0, DVector::from_fn(sys.nx(), |i, _| (i == j) as u8 as f64));
        let tr = reference_closed_loop(sys, &mut k, &dist, steps).unwrap();
        let (x, u) = (tr.signal("x").unwrap(), tr.signal("u").unwrap());
        for t in 1..steps {
            if t <= t_fir {
                dev = dev.max((&x[t] - r.phi_x.element(t).column(j)).amax());
                dev = dev.max((&u[t] - r.phi_u.element(t).column(j)).amax());
            } else {
                tail = tail.max(x[t].amax()).max(u[t].amax());
            }
        }
        tail = tail.max(u[0].amax());
    }
    check(
        dev <= 1e-8 && tail <= 1e-12,
        format!("max deviation from spectral elements {dev:.2e} (tol 1e-8), beyond T {tail:.2e} (tol 1e-12)"),
    )
}

/// For `A = 0.5, B = 1, Q = R = 1, T = 2` the free variable is `a = Φ_u[1]`:
/// `Φ_x[2] = 0.5 + a`, the terminal constraint forces `Φ_u[2] = -0.5 Φ_x[2]`,
/// and the cost is `1 + (0.5 + a)² + a² + 0.25 (0.5 + a)²`.
fn scalar_oracle() -> (f64, f64, f64) {
    let cost = |a: f64| 1.0 + (0.5 + a).powi(2) + a * a + 0.25 * (0.5 + a).powi(2);
    // coarse grid, then successive refinement around the best sample
    let (mut lo, mut hi) = (-4.0, 4.0);
    for _ in 0..12 {
        let step = (hi - lo) / 100.0;
        let best = (0..=100)
            .map(|i| lo + i as f64 * step)
            .min_by(|x, y| cost(*x).total_cmp(&cost(*y)))
            .unwrap();
        lo = best - step;
        hi = best + step;
    }
    let grid = 0.5 * (lo + hi);
    // exact vertex of the parabola through three samples
    let (fm, f0, fp) = (cost(-1.0), cost(0.0), cost(1.0));
    let vertex = (fm - fp) / (2.0 * (fm - 2.0 * f0 + fp));
    // the cost is flat near its minimum, so the grid only locates it to ~1e-8
    assert!((grid - vertex).abs() < 1e-6, "grid {grid} vertex {vertex}");
    (vertex, 0.5 + vertex, -0.5 * (0.5 + vertex))
}

fn criterion_5() -> Outcome {
    let (u1, x2, u2) = scalar_oracle();
    let sys = LtiSystem::state_feedback(DMatrix::from_element(1, 1, 0.5), DMatrix::from_element(1, 1, 1.0)).unwrap();
    let r = synth_sf_h2(&sys, &SynthesisSpec::identity(&sys, 2)).map_err(|e| e.to_string())?.response;
    let got = (r.phi_u.element(1)[(0, 0)], r.phi_x.element(2)[(0, 0)], r.phi_u.element(2)[(0, 0)]);
    let hand = (-5.0 / 18.0, 2.0 / 9.0, -1.0 / 9.0);
    let err = [got.0 - hand.0, got.1 - hand.1, got.2 - hand.2, got.0 - u1, got.1 - x2, got.2 - u2]
        .iter()
        .fold(0.0f64, |m, v| m.max(v.abs()));
    check(
        err <= 1e-9,
        format!(
            "Phi_u[1] {:.12}, Phi_x[2] {:.12}, Phi_u[2] {:.12}; max error vs hand values and oracle {err:.2e} (tol 1e-9)",
            got.0, got.1, got.2
        ),
    )
}

/// Random plant with no zero entries, spectral radius 0.5.
fn dense_plant(nx: usize, nu: usize, seed: u64) -> LtiSystem {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut a = DMatrix::from_fn(nx, nx, |_, _| rng.random_range(0.1..1.0));
    let rho = a.complex_eigenvalues().iter().map(|z| z.norm()).fold(0.0, f64::max);
    a *= 0.5 / rho;
    let b = DMatrix::from_fn(nx, nu, |_, _| rng.random_range(0.5..1.5));
    LtiSystem::state_feedback(a, b).unwrap()
}

fn criterion_6() -> Outcome {
    let d = Dims::sf(2, 1, 4);
    let p = |a| predict_sf_costs(a, d).unwrap();
    let got = [
        p(Architecture::SfCentralized).flops.unwrap(),
        p(Architecture::SfCentralized).memory.unwrap(),
        p(Architecture::SfOriginal).flops.unwrap(),
        p(Architecture::SfNaive).multiplier_memory.unwrap(),
        p(Architecture::SfNaive).buffer_memory.unwrap(),
        p(Architecture::SfMemoryConservative).buffer_memory.unwrap(),
    ];
    let expected = [26, 29, 33, 14, 23, 23];
    let mut notes = vec![format!("(2,1,4) formulas {got:?}")];
    let mut ok = got == expected;
    for (nx, nu, t) in [(2, 1, 4), (2, 2, 5), (3, 2, 3), (4, 3, 2)] {
        let d = Dims::sf(nx, nu, t);
        let sys = dense_plant(nx, nu, 100 + nx as u64 * 10 + nu as u64);
        let resp = synth_sf_h2(&sys, &SynthesisSpec::identity(&sys, t)).map_err(|e| e.to_string())?.response;
        let naive = measure_costs(&build_naive_distributed_sf(&sys, &resp).unwrap()).memory;
        let mc = measure_costs(&build_memconserv_distributed_sf(&sys, &resp).unwrap()).memory;
        let (nx_, nu_, t_) = (nx as i64, nu as i64, t as i64);
        // independent substitution
        let closed_form = nx_ * nx_ + nx_ * nu_ + t_ * nx_ * nu_;
        let eq14 = (t_ + 1) * nx_ * nu_ + nx_ * nx_ + 4 * nx_ + nu_;
        let eq15 = 2 * nx_ * nu_ + nx_ * nx_ + (t_ + 3) * nx_ + nu_;
        let diff = naive.buffers as i64 - mc.buffers as i64;
        let triple_ok = naive.multipliers as i64 == closed_form
            && mc.multipliers as i64 == closed_form
            && closed_form == sf_distributed_multipliers(d)
            && diff == eq14 - eq15
            && eq14 - eq15 == sf_naive_buffers(d) - sf_memconserv_buffers(d);
        ok &= triple_ok;
        notes.push(format!(
            "({nx},{nu},{t}) multipliers {}/{} vs {closed_form}, buffer difference {diff} vs {}",
            naive.multipliers,
            mc.multipliers,
            eq14 - eq15
        ));
    }
    check(ok, notes.join("; "))
}

fn criterion_7() -> Outcome {
    let c = ctx(CHAIN3_OF);
    let sls_deploy::commands::Synthesized::Youla(y) = c.synthesize().map_err(|e| e.to_string())? else {
        return Err("expected a Youla synthesis".into());
    };
    let sys = &c.sys;
    let k = OfSimplified::new(sys, &y.phi_uy).unwrap();
    let h = default_probe_horizon(6);
    let grid = internal_stability_probe(sys, &k, h, 1e-6).map_err(|e| e.to_string())?;
    let observed = grid.observed().count();
    let got = grid.entry(Channel::Dxhat, Signal::X).and_then(|e| e.response.clone()).ok_or("no d_xhat -> x entry")?;
    // Δ[t] = A^{t-1} directly, Φ_xx from the synthesis-side map
    let q = quadruple_from_phiuy(sys, &y.phi_uy, 4 * h).map_err(|e| e.to_string())?;
    let mut dev: f64 = got.element(0).amax();
    let mut power = DMatrix::identity(3, 3);
    for t in 1..=h {
        let want = &power - q.phi_xx.element(t);
        dev = dev.max((got.element(t) - want).amax());
        power = sys.a() * power;
    }
    check(
        observed == 16 && grid.all_decayed() && dev <= 1e-6,
        format!(
            "{observed}/16 entries, max tail {:.2e} after {h} steps (tol 1e-6), d_xhat -> x deviation from Delta - Phi_xx {dev:.2e} (tol 1e-6)",
            grid.max_tail()
        ),
    )
}

fn criterion_8() -> Outcome {
    let sys = LtiSystem::state_feedback(DMatrix::from_element(1, 1, 0.5), DMatrix::from_element(1, 1, 1.0)).unwrap();
    let r = synth_sf_h2(&sys, &SynthesisSpec::identity(&sys, 2)).map_err(|e| e.to_string())?.response;
    // tap sum |A_u| (|Φ_x[1]| + |Φ_x[2]|) = 0.05 (1 + 2/9)
    let expected = 0.05 * (1.0 + 2.0 / 9.0);
    let small = certify_unstable_extension(&sys, &DMatrix::from_element(1, 1, 0.05), &r, 200, 1e-9)
        .map_err(|e| e.to_string())?;
    let large = certify_unstable_extension(&sys, &DMatrix::from_element(1, 1, 1.0), &r, 200, 1e-9);
    let large_ok = matches!(&large, Ok(l) if l.margin >= 1.0 && !l.certified);
    check(
        (small.margin - expected).abs() <= 1e-12 && small.certified && small.decayed && large_ok,
        format!(
            "margin {:.6} (expected {expected:.6}), certified {}, decayed to {:.2e}; A_u = 1: margin {:.4}, certified {}",
            small.margin,
            small.certified,
            small.final_level,
            large.as_ref().map_or(f64::NAN, |l| l.margin),
            large.as_ref().is_ok_and(|l| l.certified)
        ),
    )
}

fn criterion_9() -> Outcome {
    let c = ctx(r#"{
        "plant": { "kind": "chain", "n": 5, "a_diag": 0.4, "a_off": 0.2, "b_diag": 1.0 },
        "synthesis": { "route": "sf-h2", "horizon": 6, "band": 1 },
        "disturbances": [{ "kind": "random", "channel": "d_x", "amplitude": 1.0 }],
        "t_sim": 100,
        "seed": 9
    }"#);
    let syn = c.synthesize().map_err(|e| e.to_string())?;
    let mut notes = Vec::new();
    let mut ok = true;
    for a in [Architecture::SfNaive, Architecture::SfMemoryConservative] {
        let mut net = syn.build(&c.sys, a).map_err(|e| e.to_string())?;
        reference_closed_loop(&c.sys, &mut net, &c.disturbances(), 100).map_err(|e| e.to_string())?;
        let (worst, violations) = hop_violations(&net, 1);
        ok &= violations == 0 && !net.ledger().is_empty();
        notes.push(format!("{}: {} messages, farthest {worst} hop(s), {violations} violations", a.name(), net.ledger().len()));
    }
    check(ok, notes.join("; "))
}

fn criterion_10() -> Outcome {
    let c = ctx(CHAIN3_SF);
    let sls_deploy::commands::Synthesized::Sf(s) = c.synthesize().map_err(|e| e.to_string())? else {
        return Err("expected a state-feedback synthesis".into());
    };
    let (sys, r) = (&c.sys, &s.response);
    let dist = c.disturbances();

    let mut gs = build_global_state_sf(sys, r).unwrap();
    let gsk = Layout::of(&gs).center.ok_or("no global state keeper")?;
    let tr = sls_core::simulate::closed_loop_with(sys, &mut gs, &dist, 60, |t, n| {
        if t == 20 {
            n.fail_node(gsk)?;
        }
        Ok(())
    })
    .map_err(|e| e.to_string())?;
    let u = tr.signal("u").unwrap();
    let before = u[..20].iter().map(|v| v.amax()).fold(0.0, f64::max);
    let after = u[20..].iter().map(|v| v.amax()).fold(0.0, f64::max);

    let mut mc = build_memconserv_distributed_sf(sys, r).unwrap();
    let failed = Layout::of(&mc).sensors[1];
    let run = sls_core::simulate::closed_loop_with(sys, &mut mc, &dist, 100, |t, n| {
        if t == 10 {
            n.fail_node(failed)?;
        }
        Ok(())
    });
    let (finite, bounded) = match &run {
        Ok(tr) => {
            let x = tr.max_abs("x").unwrap();
            let u = tr.max_abs("u").unwrap();
            let internal = tr.names().all(|n| tr.max_abs(n).is_some_and(f64::is_finite));
            (internal && x.is_finite() && u.is_finite(), x.max(u))
        }
        Err(_) => (false, f64::NAN),
    };
    check(
        before > 0.0 && after == 0.0 && finite && bounded < 1e3,
        format!(
            "global state keeper down: |u| {before:.3} before, {after:.1} after; memory-conservative sensor {failed} down: \
             {}, max |x|, |u| {bounded:.3}",
            if run.is_ok() { "ran" } else { "error" }
        ),
    )
}

fn criterion_11() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let scenario = dir.path().join("scenario.json");
    let json = CHAIN3_SF.replace("\"t_sim\"", "\"architecture\": \"sf-memory-conservative\", \"t_sim\"");
    fs::write(&scenario, json).map_err(|e| e.to_string())?;
    let run = |out: &str| {
        let status = Command::new(env!("CARGO_BIN_EXE_sls"))
            .args(["simulate", "--scenario"])
            .arg(&scenario)
            .arg("--out")
            .arg(dir.path().join(out))
            .output()
            .map_err(|e| e.to_string())?;
        if !status.status.success() {
            return Err(String::from_utf8_lossy(&status.stderr).into_owned());
        }
        let read = |f: &str| fs::read(dir.path().join(out).join(f)).map_err(|e| e.to_string());
        Ok((read("trace.csv")?, read("ledger.csv")?))
    };
    let (a, b) = (run("a")?, run("b")?);
    check(
        a == b && !a.1.is_empty(),
        format!("trace {} bytes, ledger {} bytes, identical: {}", a.0.len(), a.1.len(), a == b),
    )
}

fn main() -> ExitCode {
    let criteria: [Criterion; 11] = [
        ("architecture trace equivalence (state feedback)", criterion_1),
        ("architecture trace equivalence (output feedback)", criterion_2),
        ("disturbance reconstruction", criterion_3),
        ("closed-loop map identity", criterion_4),
        ("scalar synthesis oracle", criterion_5),
        ("cost formulas", criterion_6),
        ("internal stability probe", criterion_7),
        ("robustness margin", criterion_8),
        ("localization", criterion_9),
        ("failure semantics", criterion_10),
        ("determinism", criterion_11),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let outcome = std::panic::catch_unwind(f).unwrap_or_else(|_| Err("panicked".into()));
        match outcome {
            Ok(msg) => println!("PASS criterion {}: {name}: {msg}", i + 1),
            Err(msg) => {
                failed += 1;
                println!("FAIL criterion {}: {name}: {msg}", i + 1);
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
