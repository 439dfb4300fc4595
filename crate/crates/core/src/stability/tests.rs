use super::*;
use crate::architectures::build_centralized_of;
use crate::fixtures::{chain, chain_of, dense_sf};
use crate::realizations::{OfSimplified, SfSimplified};
use crate::synthesis::{synth_sf_h2, SynthesisSpec};
use nalgebra::dmatrix;

fn scalar_of() -> LtiSystem {
    LtiSystem::new(dmatrix![0.5], dmatrix![1.0], dmatrix![1.0], dmatrix![0.0]).unwrap()
}

#[test]
fn open_loop_scalar_grid() {
    let sys = scalar_of();
    let k = OfSimplified::new(&sys, &SpectralSeries::zeros(0, 1, 1, 1)).unwrap();
    let g = internal_stability_probe(&sys, &k, 20, 1e-6).unwrap();
    assert_eq!(g.entries.len(), 16);
    assert!(g.all_decayed());
    let x = g.entry(Channel::Dx, Signal::X).unwrap().response.as_ref().unwrap();
    for t in 1..=20 {
        assert_eq!(x.element(t)[(0, 0)], 0.5f64.powi(t as i32 - 1));
    }
    // first step after the horizon
    assert_eq!(g.entry(Channel::Dx, Signal::X).unwrap().tail, 0.5f64.powi(20));
    // the estimate follows its own injection and never sees the plant
    let xh = g.entry(Channel::Dxhat, Signal::Xhat).unwrap().response.as_ref().unwrap();
    assert_eq!(xh.element(3)[(0, 0)], 0.25);
    assert_eq!(g.entry(Channel::Dx, Signal::Xhat).unwrap().peak, 0.0);
}

#[test]
fn zero_injection_and_linearity() {
    let (sys, phi) = chain_of(0.0);
    let k = OfSimplified::new(&sys, &phi).unwrap();
    let zero = probe_with_amplitude(&sys, &k, 10, 1e-6, 0.0).unwrap();
    assert!(zero.entries.iter().all(|e| e.peak == 0.0));
    let one = probe_with_amplitude(&sys, &k, 10, 1e-6, 1.0).unwrap();
    let three = probe_with_amplitude(&sys, &k, 10, 1e-6, 3.0).unwrap();
    for (a, b) in one.entries.iter().zip(&three.entries) {
        let (ra, rb) = (a.response.as_ref().unwrap(), b.response.as_ref().unwrap());
        assert!(ra.map(|e| 3.0 * e).max_abs_diff(rb) < 1e-12);
    }
}

#[test]
fn chain_of_probe_matches_closed_loop_maps() {
    for d in [0.0, 0.1] {
        let (sys, phi) = chain_of(d);
        let k = OfSimplified::new(&sys, &phi).unwrap();
        let h = default_probe_horizon(phi.horizon());
        let g = internal_stability_probe(&sys, &k, h, DEFAULT_DECAY_TOL).unwrap();
        assert_eq!(g.observed().count(), 16);
        assert!(g.all_decayed(), "max tail {}", g.max_tail());
        let predicted = predicted_of_grid(&sys, &phi, h).unwrap();
        assert!(g.max_deviation(&predicted) < 1e-10, "D = {d}: {}", g.max_deviation(&predicted));
    }
}

#[test]
fn xhat_injection_reaches_state_through_estimation_error() {
    let (sys, phi) = chain_of(0.0);
    let k = OfSimplified::new(&sys, &phi).unwrap();
    let g = internal_stability_probe(&sys, &k, 30, 1e-6).unwrap();
    let got = g.entry(Channel::Dxhat, Signal::X).unwrap().response.as_ref().unwrap();
    // -Δ B Φ_uy C Δ, built by direct convolution of matrix powers
    let a = chain(3);
    let pow = |n: usize| (0..n).fold(DMatrix::identity(3, 3), |m, _| &a * m);
    for t in 0..=30 {
        let mut want = DMatrix::zeros(3, 3);
        for i in 1..t {
            for tau in 0..=phi.horizon() {
                if i + tau + 1 > t {
                    continue;
                }
                let j = t - i - tau;
                want -= pow(i - 1) * sys.b() * phi.element(tau) * sys.c() * pow(j - 1);
            }
        }
        assert!((&got.element(t) - want).amax() < 1e-12, "t = {t}");
    }
}

#[test]
fn network_probe_reports_unobserved_estimate() {
    let (sys, phi) = chain_of(0.0);
    let net = build_centralized_of(&sys, &phi).unwrap();
    let g = internal_stability_probe(&sys, &net, 50, 1e-6).unwrap();
    assert_eq!(g.observed().count(), 9);
    assert!(g.all_decayed());
    let k = OfSimplified::new(&sys, &phi).unwrap();
    let reference = internal_stability_probe(&sys, &k, 50, 1e-6).unwrap();
    for e in g.observed() {
        let r = reference.entry(e.channel, e.signal).unwrap().response.as_ref().unwrap();
        assert!(e.response.as_ref().unwrap().max_abs_diff(r) < 1e-10);
    }
}

#[test]
fn sf_probe_decays() {
    let (sys, resp) = dense_sf(3, 2, 4, 9);
    let k = SfSimplified::new(&sys, &resp.phi_u).unwrap();
    let g = internal_stability_probe(&sys, &k, 60, 1e-6).unwrap();
    assert_eq!(g.observed().count(), 16);
    assert!(g.all_decayed());
}

#[test]
fn map_check_open_loop() {
    let sys = LtiSystem::state_feedback(dmatrix![0.5, 0.1; 0.0, 0.3], dmatrix![1.0; 0.0]).unwrap();
    let t = 4;
    let res = truncated_resolvent(sys.a(), t).unwrap().series;
    let resp = SystemResponseSf { phi_x: res, phi_u: SpectralSeries::zeros(1, t, 1, 2) };
    let k = SfSimplified::new(&sys, &resp.phi_u).unwrap();
    let c = closed_loop_map_check_with(&sys, &resp, &k, 1e-12).unwrap();
    assert!(c.x_deviation < 1e-15 && c.u_deviation == 0.0);
    // the plant keeps ringing past the truncated resolvent
    assert!(c.tail > 0.0 && !c.passed);
}

#[test]
fn map_check_scalar_solution() {
    let sys = LtiSystem::state_feedback(dmatrix![0.5], dmatrix![1.0]).unwrap();
    let resp = synth_sf_h2(&sys, &SynthesisSpec::identity(&sys, 2)).unwrap().response;
    let c = closed_loop_map_check(&sys, &resp, 1e-12).unwrap();
    assert!(c.passed, "{c:?}");
}

#[test]
fn map_check_synthesized_three_state() {
    let (sys, _) = dense_sf(3, 2, 1, 21);
    let resp = synth_sf_h2(&sys, &SynthesisSpec::identity(&sys, 6)).unwrap().response;
    let c = closed_loop_map_check(&sys, &resp, 1e-8).unwrap();
    assert!(c.passed, "{c:?}");
    let k = SfSimplified::new(&sys, &resp.phi_u).unwrap();
    assert!(closed_loop_map_check_with(&sys, &resp, &k, 1e-8).unwrap().passed);
}

#[test]
fn certification() {
    let sys = LtiSystem::state_feedback(dmatrix![0.5], dmatrix![1.0]).unwrap();
    let resp = synth_sf_h2(&sys, &SynthesisSpec::identity(&sys, 2)).unwrap().response;
    let none = certify_unstable_extension(&sys, &dmatrix![0.0], &resp, 100, 1e-9).unwrap();
    assert_eq!(none.margin, 0.0);
    assert!(none.certified && none.decayed);
    // 0.05 · (1 + 2/9)
    let small = certify_unstable_extension(&sys, &dmatrix![0.05], &resp, 200, 1e-9).unwrap();
    assert!((small.margin - 0.05 * 11.0 / 9.0).abs() < 1e-12);
    assert!(small.certified && small.decayed, "{small:?}");
    let large = certify_unstable_extension(&sys, &dmatrix![1.0], &resp, 200, 1e-9).unwrap();
    assert!(large.margin >= 1.0 && !large.certified);
    assert!(large.peak > 0.0);
}
