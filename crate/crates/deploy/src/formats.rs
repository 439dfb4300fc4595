//! Artifact writers. Every file starts with the scenario hash and seed; floats
//! are written with 17 significant digits so identical runs give identical bytes.

use std::fs;
use std::path::Path;

use nalgebra::DMatrix;
use serde::Serialize;
use serde_json::{json, Value};

use sls_core::cyber::{BufferKind, Component, Message, Network, Port, Role, Source};
use sls_core::{SpectralSeries, Trace};

use crate::error::DeployError;

/// Provenance stamped on every artifact.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Stamp {
    pub scenario_sha256: String,
    pub seed: u64,
}

impl Stamp {
    fn comment(&self) -> String {
        format!("# scenario_sha256={} seed={}\n", self.scenario_sha256, self.seed)
    }
}

pub fn float(v: f64) -> String {
    format!("{v:.16e}")
}

/// A CSV document: header row plus records, prefixed by the stamp comment.
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(header: impl IntoIterator<Item = impl Into<String>>) -> Self {
        Self {
            header: header.into_iter().map(Into::into).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        self.rows.push(row);
    }

    pub fn to_bytes(&self, stamp: &Stamp) -> Result<Vec<u8>, DeployError> {
        let mut w = csv::Writer::from_writer(stamp.comment().into_bytes());
        w.write_record(&self.header)?;
        for r in &self.rows {
            w.write_record(r)?;
        }
        w.into_inner().map_err(|e| DeployError::Io(e.into_error()))
    }

    pub fn write(&self, path: &Path, stamp: &Stamp) -> Result<(), DeployError> {
        fs::write(path, self.to_bytes(stamp)?)?;
        Ok(())
    }
}

/// Reads a CSV written by [`Table::write`], skipping the stamp comment.
pub fn read_table(path: &Path) -> Result<Table, DeployError> {
    let mut r = csv::ReaderBuilder::new().comment(Some(b'#')).from_path(path)?;
    let header = r.headers()?.iter().map(String::from).collect();
    let rows = r
        .records()
        .map(|rec| rec.map(|rec| rec.iter().map(String::from).collect()))
        .collect::<Result<_, _>>()?;
    Ok(Table { header, rows })
}

pub fn write_json(path: &Path, stamp: &Stamp, body: Value) -> Result<(), DeployError> {
    let mut doc = json!({ "scenario_sha256": stamp.scenario_sha256, "seed": stamp.seed });
    if let (Some(d), Value::Object(b)) = (doc.as_object_mut(), body) {
        d.extend(b);
    }
    let mut s = serde_json::to_string_pretty(&doc)?;
    s.push('\n');
    fs::write(path, s)?;
    Ok(())
}

/// Signals in column order: `x`, `u`, `y`, then the rest by name.
pub fn trace_signals(trace: &Trace) -> Vec<&str> {
    let mut names: Vec<&str> = ["x", "u", "y"].into_iter().filter(|n| trace.signal(n).is_some()).collect();
    names.extend(trace.names().filter(|n| !["x", "u", "y"].contains(n)));
    names
}

pub fn trace_table(trace: &Trace) -> Table {
    let signals = trace_signals(trace);
    let mut header = vec!["t".to_string()];
    for s in &signals {
        let dim = trace.signal(s).and_then(|v| v.first()).map_or(0, |v| v.len());
        header.extend((0..dim).map(|i| format!("{s}[{i}]")));
    }
    let mut table = Table::new(header);
    for t in 0..trace.len() {
        let mut row = vec![t.to_string()];
        for s in &signals {
            if let Some(v) = trace.signal(s).and_then(|v| v.get(t)) {
                row.extend(v.iter().map(|x| float(*x)));
            }
        }
        table.push(row);
    }
    table
}

pub fn ledger_table(ledger: &[Message]) -> Table {
    let mut table = Table::new(["t", "round", "source", "target", "label", "dim", "delivered", "payload"]);
    for m in ledger {
        table.push(vec![
            m.t.to_string(),
            m.round.to_string(),
            m.source.to_string(),
            m.target.to_string(),
            m.label.clone(),
            m.payload.len().to_string(),
            m.delivered.to_string(),
            m.payload.iter().map(|v| float(*v)).collect::<Vec<_>>().join(";"),
        ]);
    }
    table
}

pub fn matrix_json(m: &DMatrix<f64>) -> Value {
    Value::Array(
        m.row_iter()
            .map(|r| Value::Array(r.iter().map(|v| json!(v)).collect()))
            .collect(),
    )
}

pub fn series_json(s: &SpectralSeries) -> Value {
    json!({
        "start_tau": s.start_tau(),
        "shape": [s.shape().0, s.shape().1],
        "elements": s.elements().iter().map(matrix_json).collect::<Vec<_>>(),
    })
}

fn role_json(r: &Role) -> Value {
    match r {
        Role::Sensor(i) => json!({ "sensor": i }),
        Role::Actuator(i) => json!({ "actuator": i }),
        Role::GlobalStateKeeper => json!("global-state-keeper"),
        Role::Controller => json!("controller"),
        Role::Other(s) => json!({ "other": s }),
    }
}

fn port_json(p: &Port) -> Value {
    json!({ "buffer": p.buf, "select": p.select })
}

fn component_json(c: &Component) -> Value {
    let body = match c {
        Component::Sense { channels, output } => json!({ "channels": channels, "output": output }),
        Component::Actuate { input, channels } => json!({ "input": port_json(input), "channels": channels }),
        Component::Multiplier { matrix, input, output } => {
            json!({ "matrix": matrix_json(matrix), "input": port_json(input), "output": output })
        }
        Component::Adder { inputs, output } => json!({
            "inputs": inputs.iter().map(|(w, p)| json!({ "weight": w, "port": port_json(p) })).collect::<Vec<_>>(),
            "output": output,
        }),
        Component::DelayBuffer { input, taps, .. } => json!({ "input": port_json(input), "taps": taps }),
        Component::Disseminator { input, routes } => json!({
            "input": input,
            "routes": routes
                .iter()
                .map(|r| json!({ "target": r.target, "label": r.label, "indices": r.indices }))
                .collect::<Vec<_>>(),
        }),
        Component::Collector {
            output,
            sources,
            starve_when_silent,
        } => json!({
            "output": output,
            "starve_when_silent": starve_when_silent,
            "sources": sources
                .iter()
                .map(|s| match s {
                    Source::Remote { from, label, positions } => {
                        json!({ "remote": { "from": from, "label": label, "positions": positions } })
                    }
                    Source::Local { port, positions } => {
                        json!({ "local": { "port": port_json(port), "positions": positions } })
                    }
                })
                .collect::<Vec<_>>(),
        }),
    };
    let mut v = json!({ "kind": c.kind() });
    if let (Some(o), Value::Object(b)) = (v.as_object_mut(), body) {
        o.extend(b);
    }
    v
}

/// Topology and parameters of a built network.
pub fn network_json(net: &Network) -> Value {
    let nodes: Vec<Value> = net
        .nodes()
        .iter()
        .map(|n| {
            let m = n.memory();
            json!({
                "id": n.id,
                "role": role_json(&n.role),
                "location": n.location,
                "memory": { "buffers": m.buffers, "multipliers": m.multipliers },
                "buffers": n.buffers.iter().map(|b| json!({
                    "name": b.name,
                    "dim": b.dim,
                    "kind": match b.kind {
                        BufferKind::Register => "register",
                        BufferKind::Wire => "wire",
                        BufferKind::DelayTap => "delay-tap",
                    },
                })).collect::<Vec<_>>(),
                "components": n.components.iter().map(component_json).collect::<Vec<_>>(),
            })
        })
        .collect();
    json!({ "nodes": nodes })
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::{dmatrix, dvector};

    fn stamp() -> Stamp {
        Stamp {
            scenario_sha256: "ab".into(),
            seed: 7,
        }
    }

    #[test]
    fn floats_round_trip() {
        for v in [0.1, -1.0 / 3.0, 2.0f64.sqrt() * 1e-300, f64::MAX, 0.0] {
            assert_eq!(float(v).parse::<f64>().unwrap(), v);
        }
        assert_eq!(float(0.5), "5.0000000000000000e-1");
    }

    #[test]
    fn trace_columns_are_ordered() {
        let mut tr = Trace::new();
        for k in 0..2 {
            tr.push("y", dvector![k as f64]);
            tr.push("delta", dvector![1.0, 2.0]);
            tr.push("x", dvector![0.0, 1.0]);
            tr.push("u", dvector![3.0]);
        }
        let t = trace_table(&tr);
        assert_eq!(t.header, ["t", "x[0]", "x[1]", "u[0]", "y[0]", "delta[0]", "delta[1]"]);
        assert_eq!(t.rows[1][4], float(1.0));
        let bytes = t.to_bytes(&stamp()).unwrap();
        assert!(String::from_utf8(bytes).unwrap().starts_with("# scenario_sha256=ab seed=7\nt,x[0]"));
    }

    #[test]
    fn table_round_trips_through_disk() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("a.csv");
        let mut t = Table::new(["a", "b"]);
        t.push(vec!["1".into(), "x;y".into()]);
        t.write(&p, &stamp()).unwrap();
        let back = read_table(&p).unwrap();
        assert_eq!(back.header, t.header);
        assert_eq!(back.rows, t.rows);
    }

    #[test]
    fn json_carries_stamp() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("a.json");
        write_json(&p, &stamp(), json!({ "m": matrix_json(&dmatrix![1.0, 2.0; 3.0, 4.0]) })).unwrap();
        let v: Value = serde_json::from_slice(&fs::read(&p).unwrap()).unwrap();
        assert_eq!(v["scenario_sha256"], "ab");
        assert_eq!(v["m"][1][0], 3.0);
    }
}
