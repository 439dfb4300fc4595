//! Shared test plants and disturbance programs.

use nalgebra::{dmatrix, DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::lti::LtiSystem;
use crate::simulate::{Channel, Disturbances};
use crate::spectral::SpectralSeries;
use crate::synthesis::{synth_of_youla, synth_sf_h2, SupportMask, SynthesisSpec, SystemResponseSf, YoulaObjective};

pub fn chain(n: usize) -> DMatrix<f64> {
    DMatrix::from_fn(n, n, |i, j| match i.abs_diff(j) {
        0 => 0.4,
        1 => 0.2,
        _ => 0.0,
    })
}

pub fn chain_sf(n: usize, t: usize, band: Option<usize>) -> (LtiSystem, SystemResponseSf) {
    let sys = LtiSystem::state_feedback(chain(n), DMatrix::identity(n, n)).unwrap();
    let mut spec = SynthesisSpec::identity(&sys, t);
    if let Some(d) = band {
        spec.pattern.phi_u = SupportMask::banded(n, n, d);
    }
    (sys.clone(), synth_sf_h2(&sys, &spec).unwrap().response)
}

pub fn random_dist(sys: &LtiSystem, steps: usize, seed: u64) -> Disturbances {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut d = Disturbances::new();
    for t in 0..steps {
        d.add(Channel::Dx, t, DVector::from_fn(sys.nx(), |_, _| rng.random_range(-1.0..1.0)));
    }
    d
}

pub fn dense_sf(nx: usize, nu: usize, t: usize, seed: u64) -> (LtiSystem, SystemResponseSf) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut a = DMatrix::from_fn(nx, nx, |_, _| rng.random_range(-1.0..1.0));
    a *= 0.5 / crate::lti::spectral_radius(&a).unwrap();
    let b = DMatrix::from_fn(nx, nu, |_, _| rng.random_range(0.5..1.5));
    let sys = LtiSystem::state_feedback(a, b).unwrap();
    let resp = SystemResponseSf {
        phi_x: SpectralSeries::new(1, (0..t).map(|_| DMatrix::from_fn(nx, nx, |_, _| rng.random_range(0.1..1.0))).collect()).unwrap(),
        phi_u: SpectralSeries::new(1, (0..t).map(|_| DMatrix::from_fn(nu, nx, |_, _| rng.random_range(0.1..1.0))).collect()).unwrap(),
    };
    (sys, resp)
}


/// Chain(3) observed at states 0 and 2, with `D` filled by `d` and a
/// Youla-route `Φ_uy` of horizon 6.
pub fn chain_of(d: f64) -> (LtiSystem, SpectralSeries) {
    let c = dmatrix![1.0, 0.0, 0.0; 0.0, 0.0, 1.0];
    let b = DMatrix::identity(3, 3);
    let dm = DMatrix::from_element(2, 3, d);
    let sys = LtiSystem::new(chain(3), b, c, dm).unwrap();
    let spec = SynthesisSpec::identity(&sys, 6);
    let obj = YoulaObjective::quadruple_h2(&sys, &spec, 40);
    (sys.clone(), synth_of_youla(&sys, &spec, &obj).unwrap().phi_uy)
}

