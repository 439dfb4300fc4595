//! Monolithic closed-loop simulation of the plant against any [`Controller`].

use alloc::collections::BTreeMap;
use alloc::format;

use nalgebra::{DMatrix, DVector};

use crate::error::{check_shape, Error, Result};
use crate::lti::LtiSystem;
use crate::realizations::Controller;
use crate::trace::Trace;

/// Injection points of the closed loop.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum Channel {
    /// Added to the state update.
    Dx,
    /// Added to the control signal after the controller.
    Du,
    /// Added to the measurement.
    Dy,
    /// Added to the controller's next state estimate.
    Dxhat,
}

impl Channel {
    pub const ALL: [Channel; 4] = [Channel::Dx, Channel::Du, Channel::Dy, Channel::Dxhat];

    pub fn name(self) -> &'static str {
        match self {
            Channel::Dx => "d_x",
            Channel::Du => "d_u",
            Channel::Dy => "d_y",
            Channel::Dxhat => "d_xhat",
        }
    }

    pub fn dim(self, sys: &LtiSystem) -> usize {
        match self {
            Channel::Dx | Channel::Dxhat => sys.nx(),
            Channel::Du => sys.nu(),
            Channel::Dy => sys.ny(),
        }
    }
}

/// Sparse disturbance sequences; absent samples are zero.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Disturbances {
    samples: BTreeMap<(Channel, usize), DVector<f64>>,
}

impl Disturbances {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds `v` to `channel` at time `t`.
    pub fn add(&mut self, channel: Channel, t: usize, v: DVector<f64>) -> &mut Self {
        match self.samples.get_mut(&(channel, t)) {
            Some(old) if old.len() == v.len() => *old += v,
            _ => {
                self.samples.insert((channel, t), v);
            }
        }
        self
    }

    pub fn impulse(channel: Channel, t: usize, v: DVector<f64>) -> Self {
        let mut d = Self::new();
        d.add(channel, t, v);
        d
    }

    pub fn get(&self, channel: Channel, t: usize) -> Option<&DVector<f64>> {
        self.samples.get(&(channel, t))
    }

    pub fn iter(&self) -> impl Iterator<Item = (Channel, usize, &DVector<f64>)> {
        self.samples.iter().map(|(&(c, t), v)| (c, t, v))
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    fn check(&self, sys: &LtiSystem) -> Result<()> {
        for (c, t, v) in self.iter() {
            if v.len() != c.dim(sys) {
                return Err(Error::InvalidArgument(format!(
                    "{} at t = {t} has {} entries, expected {}",
                    c.name(),
                    v.len(),
                    c.dim(sys)
                )));
            }
        }
        Ok(())
    }

    fn at(&self, channel: Channel, t: usize, dim: usize) -> DVector<f64> {
        self.get(channel, t).cloned().unwrap_or_else(|| DVector::zeros(dim))
    }
}

/// Runs `t_sim` steps from `x[0] = 0`:
///
/// ```text
/// y[t] = C x[t] + D u[t] + d_y[t]
/// u[t] = K(y)[t] + d_u[t]
/// x[t+1] = A x[t] + B u[t] + d_x[t]
/// ```
///
/// With `D ≠ 0` the measurement depends on the current input; the loop is
/// closed by probing clones of the controller, which is exact for linear
/// controllers. Records `x`, `u` (plant input), `y`, and the controller's
/// internal signals at every step.
pub fn reference_closed_loop(
    sys: &LtiSystem,
    k: &mut dyn Controller,
    dist: &Disturbances,
    t_sim: usize,
) -> Result<Trace> {
    closed_loop_with(sys, k, dist, t_sim, |_, _| Ok(()))
}

/// [`reference_closed_loop`] with `before_step(t, k)` called ahead of every
/// step, e.g. to fail or restore network nodes.
pub fn closed_loop_with<K: Controller + ?Sized>(
    sys: &LtiSystem,
    k: &mut K,
    dist: &Disturbances,
    t_sim: usize,
    mut before_step: impl FnMut(usize, &mut K) -> Result<()>,
) -> Result<Trace> {
    check_shape("controller input", (k.input_dim(), 1), (sys.ny(), 1))?;
    check_shape("controller output", (k.output_dim(), 1), (sys.nu(), 1))?;
    dist.check(sys)?;
    let (nx, nu, ny) = (sys.nx(), sys.nu(), sys.ny());
    let mut trace = Trace::new();
    let mut x = DVector::zeros(nx);
    for t in 0..t_sim {
        before_step(t, k)?;
        let du = dist.at(Channel::Du, t, nu);
        let y0 = sys.output(&x, &du, &dist.at(Channel::Dy, t, ny))?;
        let y = if sys.has_feedthrough() {
            let u0 = k.clone_box().step(&y0)?;
            let mut f = DMatrix::zeros(nu, ny);
            for j in 0..ny {
                let mut yj = y0.clone();
                yj[j] += 1.0;
                f.set_column(j, &(k.clone_box().step(&yj)? - &u0));
            }
            let m = DMatrix::identity(nu, nu) - &f * sys.d();
            let uc = m.lu().solve(&u0).ok_or(Error::Singular { context: "I - K[0] D" })?;
            &y0 + sys.d() * uc
        } else {
            y0
        };
        let uc = k.step(&y)?;
        if let Some(v) = dist.get(Channel::Dxhat, t) {
            k.inject_xhat(v)?;
        }
        let u = uc + du;
        trace.push("x", x.clone());
        trace.push("u", u.clone());
        trace.push("y", y);
        for (name, v) in k.internal_signals() {
            trace.push(name, v);
        }
        x = sys.step(&x, &u, &dist.at(Channel::Dx, t, nx))?;
    }
    Ok(trace)
}

/// Relative deviation of `x` and `u` between two traces.
pub fn trace_deviation(a: &Trace, b: &Trace) -> f64 {
    ["x", "u"]
        .iter()
        .map(|s| a.max_relative_deviation(b, s).unwrap_or(f64::INFINITY))
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec::Vec;
    use crate::realizations::{OfSimplified, SfSimplified, SfStandard};
    use crate::spectral::SpectralSeries;
    use crate::synthesis::{synth_sf_h2, SynthesisSpec};
    use nalgebra::{dmatrix, dvector};

    #[test]
    fn zero_disturbances_zero_trace() {
        let sys = LtiSystem::state_feedback(dmatrix![0.5], dmatrix![1.0]).unwrap();
        let r = synth_sf_h2(&sys, &SynthesisSpec::identity(&sys, 2)).unwrap().response;
        let mut k = SfStandard::new(&r).unwrap();
        let tr = reference_closed_loop(&sys, &mut k, &Disturbances::new(), 10).unwrap();
        assert_eq!(tr.len(), 10);
        assert_eq!(tr.max_abs("x"), Some(0.0));
        assert_eq!(tr.max_abs("u"), Some(0.0));
    }

    #[test]
    fn scalar_impulse_response() {
        // T = 2: Φ_x = [1, 2/9], Φ_u = [-5/18, -1/9]
        let sys = LtiSystem::state_feedback(dmatrix![0.5], dmatrix![1.0]).unwrap();
        let r = synth_sf_h2(&sys, &SynthesisSpec::identity(&sys, 2)).unwrap().response;
        let dist = Disturbances::impulse(Channel::Dx, 0, dvector![1.0]);
        for k in [
            &mut SfStandard::new(&r).unwrap() as &mut dyn Controller,
            &mut SfSimplified::new(&sys, &r.phi_u).unwrap(),
        ] {
            let tr = reference_closed_loop(&sys, k, &dist, 6).unwrap();
            let x: Vec<f64> = tr.signal("x").unwrap().iter().map(|v| v[0]).collect();
            let u: Vec<f64> = tr.signal("u").unwrap().iter().map(|v| v[0]).collect();
            let xe = [0.0, 1.0, 2.0 / 9.0, 0.0, 0.0, 0.0];
            let ue = [0.0, -5.0 / 18.0, -1.0 / 9.0, 0.0, 0.0, 0.0];
            for t in 0..6 {
                assert!((x[t] - xe[t]).abs() < 1e-12, "x[{t}] = {}", x[t]);
                assert!((u[t] - ue[t]).abs() < 1e-12, "u[{t}] = {}", u[t]);
            }
        }
    }

    #[test]
    fn feedthrough_loop_matches_closed_form() {
        // static u = q y with y = x + d u  ⇒  u = q x / (1 - q d)
        let (q, d) = (0.4, 0.5);
        let sys = LtiSystem::new(dmatrix![0.5], dmatrix![1.0], dmatrix![1.0], dmatrix![d]).unwrap();
        #[derive(Clone)]
        struct Static(f64);
        impl Controller for Static {
            fn input_dim(&self) -> usize {
                1
            }
            fn output_dim(&self) -> usize {
                1
            }
            fn step(&mut self, y: &DVector<f64>) -> Result<DVector<f64>> {
                Ok(y * self.0)
            }
            fn reset(&mut self) {}
            fn clone_box(&self) -> alloc::boxed::Box<dyn Controller> {
                alloc::boxed::Box::new(self.clone())
            }
        }
        let dist = Disturbances::impulse(Channel::Dx, 0, dvector![1.0]);
        let tr = reference_closed_loop(&sys, &mut Static(q), &dist, 3).unwrap();
        let x1 = tr.signal("x").unwrap()[1][0];
        let u1 = tr.signal("u").unwrap()[1][0];
        let y1 = tr.signal("y").unwrap()[1][0];
        assert!((u1 - q * x1 / (1.0 - q * d)).abs() < 1e-15);
        assert!((y1 - (x1 + d * u1)).abs() < 1e-15);
    }

    #[test]
    fn open_loop_of_controller() {
        let sys = LtiSystem::new(dmatrix![0.5], dmatrix![1.0], dmatrix![1.0], dmatrix![0.0]).unwrap();
        let mut k = OfSimplified::new(&sys, &SpectralSeries::zeros(0, 2, 1, 1)).unwrap();
        let dist = Disturbances::impulse(Channel::Dx, 0, dvector![1.0]);
        let tr = reference_closed_loop(&sys, &mut k, &dist, 5).unwrap();
        let x: Vec<f64> = tr.signal("x").unwrap().iter().map(|v| v[0]).collect();
        assert_eq!(x, vec![0.0, 1.0, 0.5, 0.25, 0.125]);
    }

    #[test]
    fn rejects_wrong_disturbance_size() {
        let sys = LtiSystem::state_feedback(dmatrix![0.5], dmatrix![1.0]).unwrap();
        let mut k = SfSimplified::new(&sys, &SpectralSeries::zeros(1, 1, 1, 1)).unwrap();
        let dist = Disturbances::impulse(Channel::Dx, 0, dvector![1.0, 2.0]);
        assert!(reference_closed_loop(&sys, &mut k, &dist, 2).is_err());
    }
}
