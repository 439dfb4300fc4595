use super::*;
use nalgebra::{dmatrix, dvector};

fn relay(with_multiplier: Option<f64>) -> Vec<Node> {
    let mut s = Node::new(0, Role::Sensor(0), Some(0));
    let y = s.register("y", 1);
    s.push(Component::Sense { channels: vec![0], output: y });
    s.push(Component::Disseminator {
        input: y,
        routes: vec![Route { target: 1, label: "y_0[t]".into(), indices: vec![0] }],
    });
    let mut a = Node::new(1, Role::Actuator(0), Some(0));
    let r = a.register("y", 1);
    a.push(Component::Collector {
        output: r,
        sources: vec![Source::Remote { from: 0, label: "y_0[t]".into(), positions: vec![0] }],
        starve_when_silent: true,
    });
    let out = match with_multiplier {
        Some(g) => {
            let u = a.register("u", 1);
            a.push(Component::Multiplier { matrix: dmatrix![g], input: Port::all(r), output: u });
            u
        }
        None => r,
    };
    a.push(Component::Actuate { input: Port::all(out), channels: vec![0] });
    vec![s, a]
}

#[test]
fn empty_network_is_valid() {
    assert!(validate_wiring(&[], 0, 0).is_ok());
}

#[test]
fn route_to_absent_node_is_listed() {
    let mut nodes = relay(None);
    nodes.pop();
    match validate_wiring(&nodes, 1, 1) {
        Err(Error::Wiring(v)) => assert!(v.iter().any(|p| p.contains("absent node 1"))),
        other => panic!("{other:?}"),
    }
}

#[test]
fn uncovered_collector_is_listed() {
    let mut n = Node::new(0, Role::Controller, None);
    let b = n.register("v", 2);
    n.push(Component::Collector { output: b, sources: vec![], starve_when_silent: false });
    assert!(matches!(validate_wiring(&[n], 0, 0), Err(Error::Wiring(_))));
}

#[test]
fn relay_is_identity_without_flops() {
    let mut net = Network::new(relay(None), 1, 1).unwrap();
    for v in [1.0, -3.5, 0.25] {
        assert_eq!(net.run_step(&dvector![v]).unwrap(), dvector![v]);
    }
    assert!(net.stats().iter().all(|s| s.flops == 0 && s.messages == 1));
    assert_eq!(net.ledger().len(), 3);
    assert_eq!(net.ledger()[2].t, 2);
}

#[test]
fn scalar_multiplier_counts_one_flop() {
    let mut net = Network::new(relay(Some(2.0)), 1, 1).unwrap();
    assert_eq!(net.run_step(&dvector![3.0]).unwrap(), dvector![6.0]);
    assert_eq!(net.stats()[0].flops, 1);
    assert_eq!(net.node(1).unwrap().flops(), 1);
}

#[test]
fn delay_of_two_steps() {
    let mut n = Node::new(0, Role::Controller, None);
    let y = n.register("y", 1);
    let taps = n.delay("y", Port::all(y), 1, 2);
    n.push(Component::Sense { channels: vec![0], output: y });
    n.push(Component::Actuate { input: Port::all(taps[1]), channels: vec![0] });
    // program order: delay taps, sense, actuate
    assert!(matches!(n.components[0], Component::DelayBuffer { .. }));
    let mut net = Network::new(vec![n], 1, 1).unwrap();
    let outs: Vec<f64> = [1.0, 0.0, 0.0, 0.0]
        .iter()
        .map(|&v| net.run_step(&dvector![v]).unwrap()[0])
        .collect();
    assert_eq!(outs, vec![0.0, 0.0, 1.0, 0.0]);
    assert_eq!(net.memory().buffers, 1 + 2);
}

#[test]
fn failed_sensor_reads_as_zero_and_starves_single_source() {
    let mut net = Network::new(relay(Some(2.0)), 1, 1).unwrap();
    net.run_step(&dvector![1.0]).unwrap();
    net.fail_node(0).unwrap();
    assert_eq!(net.run_step(&dvector![1.0]).unwrap(), dvector![0.0]);
    assert_eq!(net.stats()[1].starved, vec![1]);
    assert_eq!(net.stats()[1].messages, 0);
}

#[test]
fn failing_a_silent_node_changes_nothing() {
    let mut nodes = relay(Some(2.0));
    nodes.push(Node::new(7, Role::Other("idle".into()), None));
    let mut a = Network::new(nodes.clone(), 1, 1).unwrap();
    let mut b = Network::new(nodes, 1, 1).unwrap();
    b.fail_node(7).unwrap();
    for v in [1.0, 2.0, -1.0] {
        assert_eq!(a.run_step(&dvector![v]).unwrap(), b.run_step(&dvector![v]).unwrap());
    }
}

#[test]
fn local_cycle_is_reported() {
    // two nodes each waiting on the other before sending
    let mut nodes = Vec::new();
    for (id, other) in [(0, 1), (1, 0)] {
        let mut n = Node::new(id, Role::Controller, None);
        let v = n.register("v", 1);
        n.push(Component::Collector {
            output: v,
            sources: vec![Source::Remote { from: other, label: "v".into(), positions: vec![0] }],
            starve_when_silent: false,
        });
        n.push(Component::Disseminator {
            input: v,
            routes: vec![Route { target: other, label: "v".into(), indices: vec![0] }],
        });
        nodes.push(n);
    }
    let mut net = Network::new(nodes, 0, 0).unwrap();
    assert!(matches!(net.run_step(&dvector![]), Err(Error::AlgebraicLoop { .. })));
}

#[test]
fn memory_of_single_multiplier_node() {
    let mut n = Node::new(0, Role::Controller, None);
    let x = n.register("x", 3);
    let y = n.register("y", 2);
    n.push(Component::Sense { channels: vec![0, 1, 2], output: x });
    n.push(Component::Multiplier { matrix: DMatrix::zeros(2, 3), input: Port::all(x), output: y });
    n.push(Component::Actuate { input: Port::all(y), channels: vec![0, 1] });
    assert_eq!(n.memory(), MemoryInventory { buffers: 5, multipliers: 6 });
    assert_eq!(n.flops_per_step(), 2 * 5);
}
