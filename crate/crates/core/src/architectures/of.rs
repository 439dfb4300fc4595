use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use nalgebra::DMatrix;

use super::{
    actuator_location, add, collect_stack, collect_sum, convolve, multiply, nonzero_rows,
    require_no_feedthrough, require_stable, send, sensor_location, sub_matrix, support, Layout,
};
use crate::cyber::{Component, Network, Node, Port, Role};
use crate::error::{check_shape, Error, Result};
use crate::lti::LtiSystem;
use crate::spectral::SpectralSeries;

fn check(sys: &LtiSystem, phi_uy: &SpectralSeries) -> Result<usize> {
    check_shape("phi_uy element", phi_uy.shape(), (sys.nu(), sys.ny()))?;
    if phi_uy.start_tau() != 0 {
        return Err(Error::InvalidArgument("phi_uy must start at tau = 0".into()));
    }
    require_stable(sys)?;
    Ok(phi_uy.horizon())
}

/// Port reading `δ[t − τ]` given `δ[t]` and its delay taps.
fn lag_port(delta: usize, taps: &[usize], tau: usize) -> Port {
    if tau == 0 {
        Port::all(delta)
    } else {
        Port::all(taps[tau - 1])
    }
}

/// One-step delay of `next` whose tap is renamed `name`.
fn state_delay(n: &mut Node, name: &str, next: usize, dim: usize) -> usize {
    let tap = n.delay(name, Port::all(next), dim, 1)[0];
    n.buffers[tap].name = name.into();
    tap
}

fn relay_sensor(sys: &LtiSystem, i: usize, center: usize) -> Node {
    let mut n = Node::new(i, Role::Sensor(i), sensor_location(sys.c(), i));
    let y = n.wire("y_i[t]", 1);
    n.push(Component::Sense { channels: vec![i], output: y });
    send(&mut n, y, vec![(center, format!("y_{i}[t]"), vec![0])]);
    n
}

fn new_actuator(sys: &LtiSystem, k: usize, layout: &Layout) -> Node {
    Node::new(layout.actuators[k], Role::Actuator(k), actuator_location(sys.b(), k))
}

fn new_sensor(sys: &LtiSystem, i: usize, layout: &Layout) -> Node {
    Node::new(layout.sensors[i], Role::Sensor(i), sensor_location(sys.c(), i))
}

/// Single controller node running
/// `x̂[t+1] = A x̂ + B u`, `δ = y − C x̂ − D u`, `u = Σ_{τ≥0} Φ_uy[τ] δ[t−τ]`;
/// with `D ≠ 0` the current-step loop is closed through `(I + Φ_uy[0] D)⁻¹`.
pub fn build_centralized_of(sys: &LtiSystem, phi_uy: &SpectralSeries) -> Result<Network> {
    let t = check(sys, phi_uy)?;
    let (nx, nu, ny) = (sys.nx(), sys.nu(), sys.ny());
    let layout = Layout::new(ny, nu, true);
    let center = layout.center.unwrap_or_default();
    let mut c = Node::new(center, Role::Controller, None);
    let xnext = c.register("xhat[t+1]", nx);
    let xhat = state_delay(&mut c, "xhat[t]", xnext, nx);
    let delta = c.register("delta[t]", ny);
    let taps = c.delay("delta", Port::all(delta), ny, t);
    let y = collect_stack(&mut c, "y[t]", (0..ny).map(|i| (i, format!("y_{i}[t]"), 1)).collect(), false, true);
    let ncx = multiply(&mut c, "-Cxhat[t]", -sys.c(), Port::all(xhat), false);
    let innov = add(&mut c, "y[t] - Cxhat[t]", ny, vec![(1.0, Port::all(y)), (1.0, Port::all(ncx))], false);
    let terms: Vec<_> = (0..=t).map(|tau| (phi_uy.element(tau), lag_port(innov, &taps, tau))).collect();
    let u = if sys.has_feedthrough() {
        let m = DMatrix::identity(nu, nu) + phi_uy.element(0) * sys.d();
        let inv = m.try_inverse().ok_or(Error::Singular { context: "I + Phi_uy[0] D" })?;
        let v = convolve(&mut c, "u'[t]", terms, nu, false);
        let u = multiply(&mut c, "u[t]", inv, Port::all(v), true);
        let ndu = multiply(&mut c, "-Du[t]", -sys.d(), Port::all(u), false);
        c.push(Component::Adder {
            inputs: vec![(1.0, Port::all(innov)), (1.0, Port::all(ndu))],
            output: delta,
        });
        u
    } else {
        let u = convolve(&mut c, "u[t]", terms, nu, true);
        c.push(Component::Adder {
            inputs: vec![(1.0, Port::all(innov))],
            output: delta,
        });
        u
    };
    let ax = multiply(&mut c, "Axhat[t]", sys.a().clone(), Port::all(xhat), false);
    let bu = multiply(&mut c, "Bu[t]", sys.b().clone(), Port::all(u), false);
    c.push(Component::Adder {
        inputs: vec![(1.0, Port::all(ax)), (1.0, Port::all(bu))],
        output: xnext,
    });
    let routes = (0..nu).map(|k| (layout.actuators[k], format!("u_{k}[t]"), vec![k])).collect();
    send(&mut c, u, routes);

    let mut nodes: Vec<Node> = (0..ny).map(|i| relay_sensor(sys, i, center)).collect();
    for k in 0..nu {
        let mut n = new_actuator(sys, k, &layout);
        let u = collect_stack(&mut n, "u_k[t]", vec![(center, format!("u_{k}[t]"), 1)], false, true);
        n.push(Component::Actuate { input: Port::all(u), channels: vec![k] });
        nodes.push(n);
    }
    nodes.push(c);
    Network::new(nodes, ny, nu)
}

/// Sensor-side partial convolution: `Σ_τ Φ_uy^{K,i}[τ] δ_i[t−τ]` sent to
/// each actuator in `K`. `current` is the value used for `τ = 0`.
fn sensor_partials(n: &mut Node, phi_uy: &SpectralSeries, i: usize, current: usize, taps: &[usize], rows: &[usize], layout: &Layout) {
    if rows.is_empty() {
        return;
    }
    let terms = (0..=phi_uy.horizon())
        .map(|tau| (sub_matrix(&phi_uy.element(tau), rows, &[i]), lag_port(current, taps, tau)))
        .collect();
    let partial = convolve(n, "Phi_uy^{*i} delta_i", terms, rows.len(), true);
    let routes = rows
        .iter()
        .enumerate()
        .map(|(pos, &k)| (layout.actuators[k], partial_label(k, i), vec![pos]))
        .collect();
    send(n, partial, routes);
}

fn partial_label(k: usize, i: usize) -> String {
    format!("(Phi_uy[{k},{i}] * delta_{i})[t]")
}

/// `u_k` as the ordered sum of partial convolutions from the sensors.
fn actuator_sum(n: &mut Node, k: usize, sup: &DMatrix<bool>, layout: &Layout) -> usize {
    let u = n.register("u_k[t]", 1);
    let remote: Vec<_> = (0..sup.ncols())
        .filter(|&i| sup[(k, i)])
        .map(|i| (layout.sensors[i], partial_label(k, i)))
        .collect();
    if !remote.is_empty() {
        collect_sum(n, "u_k[t]", Vec::new(), remote, true, u);
    }
    n.push(Component::Actuate { input: Port::all(u), channels: vec![k] });
    u
}

/// Every sensor keeps a full copy of `x̂` and receives `B^{⋆k}u_k[t]` and
/// `−D^{ik}u_k[t]` from every actuator. Requires `D = 0`: the `D` messages
/// are still exchanged and folded into the stored `δ_i` history, but the
/// current-step term uses `y_i − C^{i⋆}x̂`.
pub fn build_sensor_side_of(sys: &LtiSystem, phi_uy: &SpectralSeries) -> Result<Network> {
    check(sys, phi_uy)?;
    require_no_feedthrough(sys, "sensor-side architecture")?;
    let (nx, nu, ny) = (sys.nx(), sys.nu(), sys.ny());
    let t = phi_uy.horizon();
    let layout = Layout::new(ny, nu, false);
    let sup = support(phi_uy);
    let b_cols: Vec<usize> = (0..nu).filter(|&k| !nonzero_rows(sys.b(), k).is_empty()).collect();
    let mut nodes = Vec::new();
    for i in 0..ny {
        let mut n = new_sensor(sys, i, &layout);
        let xnext = n.register("xhat[t+1]", nx);
        let xhat = state_delay(&mut n, "xhat[t]", xnext, nx);
        let delta = n.register("delta_i[t]", 1);
        let taps = n.delay("delta_i", Port::all(delta), 1, t);
        let y = n.register("y_i[t]", 1);
        n.push(Component::Sense { channels: vec![i], output: y });
        let ncx = multiply(&mut n, "-C^{i*}xhat[t]", -sub_matrix(sys.c(), &[i], &(0..nx).collect::<Vec<_>>()), Port::all(xhat), false);
        let current = add(&mut n, "y_i[t] - C^{i*}xhat[t]", 1, vec![(1.0, Port::all(y)), (1.0, Port::all(ncx))], true);
        let rows: Vec<usize> = (0..nu).filter(|&k| sup[(k, i)]).collect();
        sensor_partials(&mut n, phi_uy, i, current, &taps, &rows, &layout);
        let ax = multiply(&mut n, "Axhat[t]", sys.a().clone(), Port::all(xhat), false);
        let bu = collect_stack(
            &mut n,
            "{B^{*k}u_k[t]}",
            b_cols.iter().map(|&k| (layout.actuators[k], format!("B[:,{k}]u_{k}[t]"), nx)).collect(),
            false,
            false,
        );
        let mut inputs = vec![(1.0, Port::all(ax))];
        inputs.extend((0..b_cols.len()).map(|p| (1.0, Port::pick(bu, (p * nx..(p + 1) * nx).collect()))));
        n.push(Component::Adder { inputs, output: xnext });
        let ndu = n.wire("-D^{i*}u[t]", 1);
        let remote = (0..nu).map(|k| (layout.actuators[k], format!("-D[{i},{k}]u_{k}[t]"))).collect();
        collect_sum(&mut n, "-D^{i*}u[t]", Vec::new(), remote, false, ndu);
        n.push(Component::Adder {
            inputs: vec![(1.0, Port::all(current)), (1.0, Port::all(ndu))],
            output: delta,
        });
        nodes.push(n);
    }
    for k in 0..nu {
        let mut n = new_actuator(sys, k, &layout);
        let u = actuator_sum(&mut n, k, &sup, &layout);
        if b_cols.contains(&k) {
            let bu = multiply(&mut n, "B^{*k}u_k[t]", sub_matrix(sys.b(), &(0..nx).collect::<Vec<_>>(), &[k]), Port::all(u), true);
            let routes = (0..ny).map(|i| (layout.sensors[i], format!("B[:,{k}]u_{k}[t]"), (0..nx).collect())).collect();
            send(&mut n, bu, routes);
        }
        let ndu = multiply(&mut n, "-D^{*k}u_k[t]", -sub_matrix(sys.d(), &(0..ny).collect::<Vec<_>>(), &[k]), Port::all(u), true);
        let routes = (0..ny).map(|i| (layout.sensors[i], format!("-D[{i},{k}]u_{k}[t]"), vec![i])).collect();
        send(&mut n, ndu, routes);
        nodes.push(n);
    }
    Network::new(nodes, ny, nu)
}

/// Actuator `k` keeps `x̂_(k)[t+1] = A x̂_(k)[t] + B^{⋆k}u_k[t]` (so that
/// `Σ_k x̂_(k) = x̂`) and sends each sensor `−C^{i⋆}x̂_(k)[t]`; sensors add
/// these to `y_i` to form `δ_i` and convolve their columns of `Φ_uy`.
/// Requires `D = 0`.
pub fn build_actuator_side_of(sys: &LtiSystem, phi_uy: &SpectralSeries) -> Result<Network> {
    let t = check(sys, phi_uy)?;
    require_no_feedthrough(sys, "actuator-side architecture")?;
    let (nx, nu, ny) = (sys.nx(), sys.nu(), sys.ny());
    let layout = Layout::new(ny, nu, false);
    let sup = support(phi_uy);
    let mut nodes = Vec::new();
    for i in 0..ny {
        let mut n = new_sensor(sys, i, &layout);
        let delta = n.register("delta_i[t]", 1);
        let taps = n.delay("delta_i", Port::all(delta), 1, t);
        let y = n.register("y_i[t]", 1);
        n.push(Component::Sense { channels: vec![i], output: y });
        let s = n.wire("-C^{i*}xhat[t]", 1);
        let remote = (0..nu).map(|k| (layout.actuators[k], format!("-C[{i},:]xhat_({k})[t]"))).collect();
        collect_sum(&mut n, "-C^{i*}xhat[t]", Vec::new(), remote, false, s);
        n.push(Component::Adder {
            inputs: vec![(1.0, Port::all(y)), (1.0, Port::all(s))],
            output: delta,
        });
        let rows: Vec<usize> = (0..nu).filter(|&k| sup[(k, i)]).collect();
        sensor_partials(&mut n, phi_uy, i, delta, &taps, &rows, &layout);
        nodes.push(n);
    }
    for k in 0..nu {
        let mut n = new_actuator(sys, k, &layout);
        let xnext = n.register("xhat_(k)[t+1]", nx);
        let xk = state_delay(&mut n, "xhat_(k)[t]", xnext, nx);
        let msg = multiply(&mut n, "-Cxhat_(k)[t]", -sys.c(), Port::all(xk), true);
        let routes = (0..ny).map(|i| (layout.sensors[i], format!("-C[{i},:]xhat_({k})[t]"), vec![i])).collect();
        send(&mut n, msg, routes);
        let u = actuator_sum(&mut n, k, &sup, &layout);
        let ax = multiply(&mut n, "Axhat_(k)[t]", sys.a().clone(), Port::all(xk), false);
        let bu = multiply(&mut n, "B^{*k}u_k[t]", sub_matrix(sys.b(), &(0..nx).collect::<Vec<_>>(), &[k]), Port::all(u), false);
        n.push(Component::Adder {
            inputs: vec![(1.0, Port::all(ax)), (1.0, Port::all(bu))],
            output: xnext,
        });
        nodes.push(n);
    }
    Network::new(nodes, ny, nu)
}

/// A global state keeper holds `x̂`, forms `δ[t] = y[t] − C x̂[t]` from the
/// relayed measurements, and forwards each actuator the entries its rows of
/// `Φ_uy` read; actuators return `u_k[t]` for the estimate update. Requires
/// `D = 0`.
pub fn build_global_state_of(sys: &LtiSystem, phi_uy: &SpectralSeries) -> Result<Network> {
    let t = check(sys, phi_uy)?;
    require_no_feedthrough(sys, "global-state architecture")?;
    let (nx, nu, ny) = (sys.nx(), sys.nu(), sys.ny());
    let layout = Layout::new(ny, nu, true);
    let gsk_id = layout.center.unwrap_or_default();
    let sup = support(phi_uy);
    let mut nodes: Vec<Node> = (0..ny).map(|i| relay_sensor(sys, i, gsk_id)).collect();

    let mut g = Node::new(gsk_id, Role::GlobalStateKeeper, None);
    let xnext = g.register("xhat[t+1]", nx);
    let xhat = state_delay(&mut g, "xhat[t]", xnext, nx);
    let y = collect_stack(&mut g, "y[t]", (0..ny).map(|i| (i, format!("y_{i}[t]"), 1)).collect(), false, true);
    let ncx = multiply(&mut g, "-Cxhat[t]", -sys.c(), Port::all(xhat), false);
    let delta = add(&mut g, "delta[t]", ny, vec![(1.0, Port::all(y)), (1.0, Port::all(ncx))], true);
    let mut routes = Vec::new();
    for k in 0..nu {
        let cols: Vec<usize> = (0..ny).filter(|&i| sup[(k, i)]).collect();
        let mut n = new_actuator(sys, k, &layout);
        let u = if cols.is_empty() {
            n.register("u_k[t]", 1)
        } else {
            routes.push((layout.actuators[k], String::from("delta[t]"), cols.clone()));
            let d = collect_stack(&mut n, "delta[t]", vec![(gsk_id, "delta[t]".into(), cols.len())], true, true);
            let taps = n.delay("delta", Port::all(d), cols.len(), t);
            let terms = (0..=t)
                .map(|tau| (sub_matrix(&phi_uy.element(tau), &[k], &cols), lag_port(d, &taps, tau)))
                .collect();
            convolve(&mut n, "u_k[t]", terms, 1, true)
        };
        n.push(Component::Actuate { input: Port::all(u), channels: vec![k] });
        send(&mut n, u, vec![(gsk_id, format!("u_{k}[t]"), vec![0])]);
        nodes.push(n);
    }
    send(&mut g, delta, routes);
    let u = collect_stack(
        &mut g,
        "u[t]",
        (0..nu).map(|k| (layout.actuators[k], format!("u_{k}[t]"), 1)).collect(),
        false,
        false,
    );
    let ax = multiply(&mut g, "Axhat[t]", sys.a().clone(), Port::all(xhat), false);
    let bu = multiply(&mut g, "Bu[t]", sys.b().clone(), Port::all(u), false);
    g.push(Component::Adder {
        inputs: vec![(1.0, Port::all(ax)), (1.0, Port::all(bu))],
        output: xnext,
    });
    nodes.push(g);
    Network::new(nodes, ny, nu)
}
