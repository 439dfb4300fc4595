use alloc::format;
use alloc::vec::Vec;

use nalgebra::DMatrix;

use super::{
    actuator_location, add, collect_stack, collect_sum, convolve, convolve_into, multiply, nonzero_cols, nonzero_rows,
    require_stable, send, sub_matrix, support, Layout,
};
use crate::cyber::{Component, Network, Node, Port, Role};
use crate::error::{check_shape, Error, Result};
use crate::lti::LtiSystem;
use crate::synthesis::SystemResponseSf;

fn check(sys: &LtiSystem, resp: &SystemResponseSf) -> Result<usize> {
    if !sys.is_state_feedback() {
        return Err(Error::InvalidArgument("state-feedback architecture needs C = I, D = 0".into()));
    }
    check_shape("phi_x element", resp.phi_x.shape(), (sys.nx(), sys.nx()))?;
    check_shape("phi_u element", resp.phi_u.shape(), (sys.nu(), sys.nx()))?;
    let t = resp.horizon();
    if t == 0 {
        return Err(Error::InvalidArgument("response horizon must be at least 1".into()));
    }
    Ok(t)
}

fn neg(m: DMatrix<f64>) -> DMatrix<f64> {
    -m
}

/// Port reading `δ[t + 1 − τ]` given `δ[t]` and its delay taps.
fn lag_port(delta: usize, taps: &[usize], lag: usize) -> Port {
    if lag == 0 {
        Port::all(delta)
    } else {
        Port::all(taps[lag - 1])
    }
}

/// Relays `x_i` to the controller.
fn relay_sensor(i: usize, center: usize) -> Node {
    let mut n = Node::new(i, Role::Sensor(i), Some(i));
    let x = n.wire("x_i[t]", 1);
    n.push(Component::Sense { channels: vec![i], output: x });
    send(&mut n, x, vec![(center, format!("x_{i}[t]"), vec![0])]);
    n
}

/// Applies `u_k` received from the controller.
fn relay_actuator(sys: &LtiSystem, k: usize, id: usize, center: usize) -> Node {
    let mut n = Node::new(id, Role::Actuator(k), actuator_location(sys.b(), k));
    let u = collect_stack(&mut n, "u_k[t]", vec![(center, format!("u_{k}[t]"), 1)], false, true);
    n.push(Component::Actuate { input: Port::all(u), channels: vec![k] });
    n
}

fn central_sensors_and_actuators(sys: &LtiSystem, layout: &Layout) -> Vec<Node> {
    let center = layout.center.unwrap_or_default();
    let mut nodes: Vec<Node> = (0..sys.nx()).map(|i| relay_sensor(i, center)).collect();
    nodes.extend((0..sys.nu()).map(|k| relay_actuator(sys, k, layout.actuators[k], center)));
    nodes
}

fn collect_state(n: &mut Node, nx: usize) -> usize {
    collect_stack(n, "x[t]", (0..nx).map(|i| (i, format!("x_{i}[t]"), 1)).collect(), true, true)
}

fn emit_controls(n: &mut Node, u: usize, layout: &Layout) {
    let routes = layout
        .actuators
        .iter()
        .enumerate()
        .map(|(k, &id)| (id, format!("u_{k}[t]"), vec![k]))
        .collect();
    send(n, u, routes);
}

/// Single controller node running the simplified realization
/// `δ[t] = x[t] − A x[t−1] − B u[t−1]`, `u[t] = Σ Φ_u[τ] δ[t+1−τ]`.
pub fn build_centralized_sf(sys: &LtiSystem, resp: &SystemResponseSf) -> Result<Network> {
    let t = check(sys, resp)?;
    require_stable(sys)?;
    let (nx, nu) = (sys.nx(), sys.nu());
    let layout = Layout::new(nx, nu, true);
    let mut c = Node::new(layout.center.unwrap_or_default(), Role::Controller, None);
    let nax = c.wire("-Ax[t]", nx);
    let nbu = c.wire("-Bu[t]", nx);
    let da = c.delay("-Ax", Port::all(nax), nx, 1);
    let db = c.delay("-Bu", Port::all(nbu), nx, 1);
    let x = collect_state(&mut c, nx);
    c.push(Component::Multiplier { matrix: -sys.a(), input: Port::all(x), output: nax });
    let delta = add(
        &mut c,
        "delta[t]",
        nx,
        vec![(1.0, Port::all(x)), (1.0, Port::all(da[0])), (1.0, Port::all(db[0]))],
        true,
    );
    let taps = c.delay("delta", Port::all(delta), nx, t - 1);
    let terms = (1..=t).map(|tau| (resp.phi_u.element(tau), lag_port(delta, &taps, tau - 1))).collect();
    let u = convolve(&mut c, "u[t]", terms, nu, true);
    c.push(Component::Multiplier { matrix: -sys.b(), input: Port::all(u), output: nbu });
    emit_controls(&mut c, u, &layout);
    let mut nodes = central_sensors_and_actuators(sys, &layout);
    nodes.push(c);
    Network::new(nodes, nx, nu)
}

/// Single controller node running the standard realization
/// `δ = x − x̂`, `u = Σ Φ_u[τ] δ[t+1−τ]`, `x̂[t+1] = Σ_{τ≥2} Φ_x[τ] δ[t+2−τ]`.
pub fn build_original_sf(sys: &LtiSystem, resp: &SystemResponseSf) -> Result<Network> {
    let t = check(sys, resp)?;
    let (nx, nu) = (sys.nx(), sys.nu());
    let layout = Layout::new(nx, nu, true);
    let mut c = Node::new(layout.center.unwrap_or_default(), Role::Controller, None);
    let nxhat = c.wire("-xhat[t+1]", nx);
    let dx = c.delay("-xhat", Port::all(nxhat), nx, 1);
    let x = collect_state(&mut c, nx);
    let delta = add(&mut c, "delta[t]", nx, vec![(1.0, Port::all(x)), (1.0, Port::all(dx[0]))], true);
    let taps = c.delay("delta", Port::all(delta), nx, t - 1);
    let terms = (1..=t).map(|tau| (resp.phi_u.element(tau), lag_port(delta, &taps, tau - 1))).collect();
    let u = convolve(&mut c, "u[t]", terms, nu, true);
    let terms = (2..=t).map(|tau| (neg(resp.phi_x.element(tau)), lag_port(delta, &taps, tau - 2))).collect();
    convolve_into(&mut c, "-xhat[t+1]", terms, nxhat);
    emit_controls(&mut c, u, &layout);
    let mut nodes = central_sensors_and_actuators(sys, &layout);
    nodes.push(c);
    Network::new(nodes, nx, nu)
}

/// Sensor `i` of the distributed state-feedback architectures. Computes
/// `δ_i[t] = x_i[t] − A^{i⋆}x[t−1] − B^{i⋆}u[t−1]` and exchanges
/// `−A^{ji}x_i[t]` with neighbouring sensors. `middle` adds the
/// architecture-specific handling of `δ_i` (its buffer id is passed in)
/// before the incoming `−A x` and `−B u` terms are collected.
fn sf_sensor(sys: &LtiSystem, i: usize, layout: &Layout, middle: impl FnOnce(&mut Node, usize)) -> Node {
    let (a, b) = (sys.a(), sys.b());
    let mut n = Node::new(layout.sensors[i], Role::Sensor(i), Some(i));
    let x = n.register("x_i[t]", 1);
    let row_a = nonzero_cols(a, i);
    let row_b = nonzero_cols(b, i);
    let sum_a = n.wire("-A^{i*}x[t]", 1);
    let sum_b = n.wire("-B^{i*}u[t]", 1);
    let mut delta_in = vec![(1.0, Port::all(x))];
    if !row_a.is_empty() {
        let d = n.delay("-A^{i*}x", Port::all(sum_a), 1, 1);
        delta_in.push((1.0, Port::all(d[0])));
    }
    if !row_b.is_empty() {
        let d = n.delay("-B^{i*}u", Port::all(sum_b), 1, 1);
        delta_in.push((1.0, Port::all(d[0])));
    }
    n.push(Component::Sense { channels: vec![i], output: x });
    let col_a = nonzero_rows(a, i);
    let ax = (!col_a.is_empty()).then(|| {
        let ax = multiply(&mut n, "-A^{*i}x_i[t]", neg(sub_matrix(a, &col_a, &[i])), Port::all(x), true);
        let routes = col_a
            .iter()
            .enumerate()
            .filter(|&(_, &j)| j != i)
            .map(|(pos, &j)| (layout.sensors[j], format!("-A[{j},{i}]x_{i}[t]"), vec![pos]))
            .collect();
        send(&mut n, ax, routes);
        ax
    });
    let delta = add(&mut n, "delta_i[t]", 1, delta_in, true);
    middle(&mut n, delta);
    if !row_a.is_empty() {
        let local = match (ax, col_a.iter().position(|&j| j == i)) {
            (Some(ax), Some(pos)) => vec![Port::pick(ax, vec![pos])],
            _ => Vec::new(),
        };
        let remote = row_a
            .iter()
            .filter(|&&j| j != i)
            .map(|&j| (layout.sensors[j], format!("-A[{i},{j}]x_{j}[t]")))
            .collect();
        collect_sum(&mut n, "-A^{i*}x[t]", local, remote, false, sum_a);
    }
    if !row_b.is_empty() {
        let remote = row_b
            .iter()
            .map(|&k| (layout.actuators[k], format!("-B[{i},{k}]u_{k}[t]")))
            .collect();
        collect_sum(&mut n, "-B^{i*}u[t]", Vec::new(), remote, false, sum_b);
    }
    n
}

/// Applies `u_k` from register `u` and sends `−B^{ik}u_k[t]` to the sensors
/// of the states it enters.
fn sf_actuator_tail(sys: &LtiSystem, n: &mut Node, k: usize, u: usize, layout: &Layout) {
    n.push(Component::Actuate { input: Port::all(u), channels: vec![k] });
    let rows = nonzero_rows(sys.b(), k);
    if rows.is_empty() {
        return;
    }
    let bu = multiply(n, "-B^{*k}u_k[t]", neg(sub_matrix(sys.b(), &rows, &[k])), Port::all(u), true);
    let routes = rows
        .iter()
        .enumerate()
        .map(|(pos, &i)| (layout.sensors[i], format!("-B[{i},{k}]u_{k}[t]"), vec![pos]))
        .collect();
    send(n, bu, routes);
}

/// Actuator that receives the entries `cols` of `δ[t]` (one message per
/// source) and convolves its rows of `Φ_u`.
fn stacking_actuator(
    sys: &LtiSystem,
    resp: &SystemResponseSf,
    k: usize,
    layout: &Layout,
    sources: Vec<(usize, alloc::string::String, usize)>,
    cols: &[usize],
) -> Node {
    let t = resp.horizon();
    let mut n = Node::new(layout.actuators[k], Role::Actuator(k), actuator_location(sys.b(), k));
    let u = if cols.is_empty() {
        n.register("u_k[t]", 1)
    } else {
        let d = collect_stack(&mut n, "delta[t]", sources, true, true);
        let taps = n.delay("delta", Port::all(d), cols.len(), t - 1);
        let terms = (1..=t)
            .map(|tau| (sub_matrix(&resp.phi_u.element(tau), &[k], cols), lag_port(d, &taps, tau - 1)))
            .collect();
        convolve(&mut n, "u_k[t]", terms, 1, true)
    };
    sf_actuator_tail(sys, &mut n, k, u, layout);
    n
}

/// Sensors compute `δ_i`; a global state keeper stacks `δ[t]` and forwards
/// each actuator the entries its rows of `Φ_u` touch.
pub fn build_global_state_sf(sys: &LtiSystem, resp: &SystemResponseSf) -> Result<Network> {
    check(sys, resp)?;
    require_stable(sys)?;
    let (nx, nu) = (sys.nx(), sys.nu());
    let layout = Layout::new(nx, nu, true);
    let gsk_id = layout.center.unwrap_or_default();
    let sup = support(&resp.phi_u);
    let mut nodes: Vec<Node> = (0..nx)
        .map(|i| {
            sf_sensor(sys, i, &layout, |n, delta| {
                send(n, delta, vec![(gsk_id, format!("delta_{i}[t]"), vec![0])]);
            })
        })
        .collect();
    let mut gsk = Node::new(gsk_id, Role::GlobalStateKeeper, None);
    let d = collect_stack(
        &mut gsk,
        "delta[t]",
        (0..nx).map(|i| (layout.sensors[i], format!("delta_{i}[t]"), 1)).collect(),
        true,
        true,
    );
    let mut routes = Vec::new();
    for k in 0..nu {
        let cols: Vec<usize> = (0..nx).filter(|&i| sup[(k, i)]).collect();
        if !cols.is_empty() {
            routes.push((layout.actuators[k], "delta[t]".into(), cols.clone()));
        }
        let src = vec![(gsk_id, "delta[t]".into(), cols.len())];
        nodes.push(stacking_actuator(sys, resp, k, &layout, src, &cols));
    }
    send(&mut gsk, d, routes);
    nodes.push(gsk);
    Network::new(nodes, nx, nu)
}

/// Sensors send `δ_i[t]` directly to every actuator whose rows of `Φ_u`
/// read it; actuators keep the `δ` history.
pub fn build_naive_distributed_sf(sys: &LtiSystem, resp: &SystemResponseSf) -> Result<Network> {
    check(sys, resp)?;
    require_stable(sys)?;
    let (nx, nu) = (sys.nx(), sys.nu());
    let layout = Layout::new(nx, nu, false);
    let sup = support(&resp.phi_u);
    let mut nodes: Vec<Node> = (0..nx)
        .map(|i| {
            sf_sensor(sys, i, &layout, |n, delta| {
                let routes = (0..nu)
                    .filter(|&k| sup[(k, i)])
                    .map(|k| (layout.actuators[k], format!("delta_{i}[t]"), vec![0]))
                    .collect();
                send(n, delta, routes);
            })
        })
        .collect();
    for k in 0..nu {
        let cols: Vec<usize> = (0..nx).filter(|&i| sup[(k, i)]).collect();
        let src = cols
            .iter()
            .map(|&i| (layout.sensors[i], format!("delta_{i}[t]"), 1))
            .collect();
        nodes.push(stacking_actuator(sys, resp, k, &layout, src, &cols));
    }
    Network::new(nodes, nx, nu)
}

/// Sensors keep their own `δ_i` history and columns `Φ_u^{⋆i}[τ]`, and send
/// each actuator the partial sum `Σ_τ Φ_u^{ki}[τ] δ_i[t+1−τ]`; actuators add
/// the partial sums in ascending sensor order.
pub fn build_memconserv_distributed_sf(sys: &LtiSystem, resp: &SystemResponseSf) -> Result<Network> {
    let t = check(sys, resp)?;
    require_stable(sys)?;
    let (nx, nu) = (sys.nx(), sys.nu());
    let layout = Layout::new(nx, nu, false);
    let sup = support(&resp.phi_u);
    let mut nodes: Vec<Node> = (0..nx)
        .map(|i| {
            sf_sensor(sys, i, &layout, |n, delta| {
                let taps = n.delay("delta_i", Port::all(delta), 1, t - 1);
                let rows: Vec<usize> = (0..nu).filter(|&k| sup[(k, i)]).collect();
                if rows.is_empty() {
                    return;
                }
                let terms = (1..=t)
                    .map(|tau| (sub_matrix(&resp.phi_u.element(tau), &rows, &[i]), lag_port(delta, &taps, tau - 1)))
                    .collect();
                let partial = convolve(n, "Phi_u^{*i} delta_i", terms, rows.len(), true);
                let routes = rows
                    .iter()
                    .enumerate()
                    .map(|(pos, &k)| (layout.actuators[k], format!("(Phi_u[{k},{i}] * delta_{i})[t]"), vec![pos]))
                    .collect();
                send(n, partial, routes);
            })
        })
        .collect();
    for k in 0..nu {
        let mut n = Node::new(layout.actuators[k], Role::Actuator(k), actuator_location(sys.b(), k));
        let u = n.register("u_k[t]", 1);
        let remote: Vec<_> = (0..nx)
            .filter(|&i| sup[(k, i)])
            .map(|i| (layout.sensors[i], format!("(Phi_u[{k},{i}] * delta_{i})[t]")))
            .collect();
        if !remote.is_empty() {
            collect_sum(&mut n, "u_k[t]", Vec::new(), remote, true, u);
        }
        sf_actuator_tail(sys, &mut n, k, u, &layout);
        nodes.push(n);
    }
    Network::new(nodes, nx, nu)
}
