//! Scenario files: plant, synthesis, realization, architecture, disturbance
//! program, and simulation length, as JSON.

use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use sls_core::architectures::Architecture;
use sls_core::simulate::{Channel, Disturbances};
use sls_core::synthesis::{SupportMask, SynthesisSpec, TerminalMode};
use sls_core::lti::spectral_radius;
use sls_core::LtiSystem;

use crate::error::DeployError;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    #[serde(with = "kind_tag")]
    pub plant: PlantSpec,
    pub synthesis: SynthesisConfig,
    #[serde(default)]
    pub realization: RealizationKind,
    /// Architecture deployed by `simulate`; the bare realization if absent.
    #[serde(default)]
    pub architecture: Option<String>,
    /// Architectures checked by `compare` and `costs`; all applicable if empty.
    #[serde(default)]
    pub compare: Vec<String>,
    #[serde(default, with = "kind_tag::seq")]
    pub disturbances: Vec<DisturbanceProgram>,
    #[serde(default)]
    pub failures: Vec<FailureEvent>,
    pub t_sim: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub probe: ProbeConfig,
    #[serde(default)]
    pub outputs: Outputs,
}

/// Tagged by a `kind` field in the file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub enum PlantSpec {
    Explicit {
        a: Vec<Vec<f64>>,
        b: Vec<Vec<f64>>,
        /// Identity if absent.
        #[serde(default)]
        c: Option<Vec<Vec<f64>>>,
        /// Zero if absent.
        #[serde(default)]
        d: Option<Vec<Vec<f64>>>,
    },
    /// `n` states in a line; `A` tridiagonal, `B = b_diag·I`.
    Chain {
        n: usize,
        a_diag: f64,
        a_off: f64,
        b_diag: f64,
        #[serde(default)]
        measured: Option<Vec<usize>>,
        #[serde(default)]
        feedthrough: f64,
    },
    /// `width × height` states, coupled to their four neighbours.
    Grid {
        width: usize,
        height: usize,
        a_diag: f64,
        a_off: f64,
        b_diag: f64,
        #[serde(default)]
        measured: Option<Vec<usize>>,
        #[serde(default)]
        feedthrough: f64,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SynthesisRoute {
    SfH2,
    OfQuadruple,
    OfYoula,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthesisConfig {
    pub route: SynthesisRoute,
    pub horizon: usize,
    /// Diagonal of `Q^{1/2}`; identity if absent.
    #[serde(default)]
    pub q_sqrt_diag: Option<Vec<f64>>,
    #[serde(default)]
    pub r_sqrt_diag: Option<Vec<f64>>,
    /// Penalty weight replacing the hard terminal constraint.
    #[serde(default)]
    pub soft_terminal: Option<f64>,
    /// Locality: entries `|i − j| > band` of `Φ_u` (or `Φ_uy`) are forced to zero.
    #[serde(default)]
    pub band: Option<usize>,
    /// Spectral elements scored by the Youla route; `max(4·horizon, 40)` if absent.
    #[serde(default)]
    pub eval_horizon: Option<usize>,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RealizationKind {
    #[default]
    Simplified,
    Standard,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum ChannelName {
    #[serde(rename = "d_x")]
    Dx,
    #[serde(rename = "d_u")]
    Du,
    #[serde(rename = "d_y")]
    Dy,
    #[serde(rename = "d_xhat")]
    Dxhat,
}

impl From<ChannelName> for Channel {
    fn from(c: ChannelName) -> Self {
        match c {
            ChannelName::Dx => Channel::Dx,
            ChannelName::Du => Channel::Du,
            ChannelName::Dy => Channel::Dy,
            ChannelName::Dxhat => Channel::Dxhat,
        }
    }
}

/// Tagged by a `kind` field in the file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub enum DisturbanceProgram {
    Impulse {
        channel: ChannelName,
        t: usize,
        values: Vec<f64>,
    },
    /// `values` at every step in `from..until` (to the end if `until` is absent).
    Step {
        channel: ChannelName,
        from: usize,
        #[serde(default)]
        until: Option<usize>,
        values: Vec<f64>,
    },
    /// Independent uniform samples in `[−amplitude, amplitude]`.
    Random {
        channel: ChannelName,
        amplitude: f64,
        #[serde(default)]
        from: usize,
        #[serde(default)]
        until: Option<usize>,
        /// Defaults to the scenario seed plus the program's index.
        #[serde(default)]
        seed: Option<u64>,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FailureEvent {
    pub node: usize,
    pub at: usize,
    #[serde(default)]
    pub restore: Option<usize>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProbeConfig {
    /// `max(4·horizon, 50)` if absent.
    #[serde(default)]
    pub horizon: Option<usize>,
    /// `1e-6` if absent.
    #[serde(default)]
    pub tol: Option<f64>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Outputs {
    #[serde(default)]
    pub dir: Option<String>,
}

/// A parsed scenario together with the hash of its source bytes.
#[derive(Clone, Debug, PartialEq)]
pub struct LoadedScenario {
    pub scenario: Scenario,
    pub sha256: String,
}

impl LoadedScenario {
    pub fn from_bytes(bytes: &[u8]) -> Result<Self, DeployError> {
        let de = &mut serde_json::Deserializer::from_slice(bytes);
        let scenario: Scenario = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            let message = e.into_inner().to_string();
            let (path, message) = kind_tag::split(path, message);
            DeployError::Schema {
                path: if path == "." { "(root)".into() } else { path },
                message,
            }
        })?;
        scenario.validate()?;
        Ok(Self {
            scenario,
            sha256: format!("{:x}", Sha256::digest(bytes)),
        })
    }

    pub fn from_path(path: &Path) -> Result<Self, DeployError> {
        let bytes = std::fs::read(path).map_err(|e| DeployError::Usage(format!("{}: {e}", path.display())))?;
        Self::from_bytes(&bytes)
    }
}

/// Maps between `{"kind": k, ...fields}` in files and serde's `{k: {...fields}}`,
/// keeping the path of errors inside the tagged object.
mod kind_tag {
    use serde::de::{DeserializeOwned, Error as _};
    use serde::ser::Error as _;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};
    use serde_json::{Map, Value};

    // Separates a nested path from the message inside a serde error string.
    const MARK: char = '\u{1}';

    pub(super) fn split(outer: String, message: String) -> (String, String) {
        match message.strip_prefix(MARK).and_then(|m| m.split_once(MARK)) {
            Some((inner, rest)) if inner.starts_with('[') || outer == "." => {
                (format!("{}{inner}", if outer == "." { "" } else { &outer }), rest.into())
            }
            Some((inner, rest)) => (format!("{outer}.{inner}"), rest.into()),
            None => (outer, message),
        }
    }

    fn nested(path: &str, message: impl std::fmt::Display) -> String {
        format!("{MARK}{path}{MARK}{message}")
    }

    fn untag<T: DeserializeOwned>(v: Value) -> Result<T, String> {
        let Value::Object(mut m) = v else {
            return Err("expected an object with a `kind` field".into());
        };
        let kind = match m.remove("kind") {
            Some(Value::String(k)) => k,
            Some(_) => return Err(nested("kind", "expected a string")),
            None => return Err("missing field `kind`".into()),
        };
        let mut ext = Map::new();
        ext.insert(kind, Value::Object(m));
        serde_path_to_error::deserialize(Value::Object(ext)).map_err(|e| {
            let segments: Vec<String> = e.path().iter().skip(1).map(|s| s.to_string()).collect();
            let message = e.inner().to_string();
            if segments.is_empty() {
                if message.starts_with("unknown variant") {
                    return nested("kind", message);
                }
                return message;
            }
            let mut path = String::new();
            for s in segments {
                if !path.is_empty() && !s.starts_with('[') {
                    path.push('.');
                }
                path.push_str(&s);
            }
            nested(&path, message)
        })
    }

    fn retag<T: Serialize>(v: &T) -> Result<Value, serde_json::Error> {
        match serde_json::to_value(v)? {
            Value::Object(m) if m.len() == 1 => {
                let (k, body) = m.into_iter().next().expect("one entry");
                let mut out = Map::new();
                out.insert("kind".into(), Value::String(k));
                if let Value::Object(fields) = body {
                    out.extend(fields);
                }
                Ok(Value::Object(out))
            }
            other => Ok(other),
        }
    }

    pub fn serialize<T: Serialize, S: Serializer>(v: &T, s: S) -> Result<S::Ok, S::Error> {
        retag(v).map_err(S::Error::custom)?.serialize(s)
    }

    pub fn deserialize<'de, T: DeserializeOwned, D: Deserializer<'de>>(d: D) -> Result<T, D::Error> {
        untag(Value::deserialize(d)?).map_err(D::Error::custom)
    }

    pub mod seq {
        use super::*;

        pub fn serialize<T: Serialize, S: Serializer>(v: &[T], s: S) -> Result<S::Ok, S::Error> {
            v.iter().map(retag).collect::<Result<Vec<_>, _>>().map_err(S::Error::custom)?.serialize(s)
        }

        pub fn deserialize<'de, T: DeserializeOwned, D: Deserializer<'de>>(d: D) -> Result<Vec<T>, D::Error> {
            Vec::<Value>::deserialize(d)?
                .into_iter()
                .enumerate()
                .map(|(i, v)| {
                    untag(v).map_err(|m| {
                        let (path, msg) = split(format!("[{i}]"), m);
                        D::Error::custom(nested(&path, msg))
                    })
                })
                .collect()
        }
    }
}

fn schema(path: impl Into<String>, message: impl Into<String>) -> DeployError {
    DeployError::Schema {
        path: path.into(),
        message: message.into(),
    }
}

fn matrix(path: &str, rows: &[Vec<f64>]) -> Result<DMatrix<f64>, DeployError> {
    let r = rows.len();
    let c = rows.first().map_or(0, |row| row.len());
    if let Some((i, _)) = rows.iter().enumerate().find(|(_, row)| row.len() != c) {
        return Err(schema(format!("{path}[{i}]"), format!("expected {c} columns")));
    }
    Ok(DMatrix::from_fn(r, c, |i, j| rows[i][j]))
}

fn selection(n: usize, measured: &Option<Vec<usize>>) -> Result<DMatrix<f64>, DeployError> {
    match measured {
        None => Ok(DMatrix::identity(n, n)),
        Some(rows) => {
            if let Some(i) = rows.iter().position(|&r| r >= n) {
                return Err(schema(format!("plant.measured[{i}]"), format!("state index must be below {n}")));
            }
            Ok(DMatrix::from_fn(rows.len(), n, |i, j| if rows[i] == j { 1.0 } else { 0.0 }))
        }
    }
}

impl PlantSpec {
    pub fn build(&self) -> Result<LtiSystem, DeployError> {
        let (a, b, c, d) = match self {
            PlantSpec::Explicit { a, b, c, d } => {
                let a = matrix("plant.a", a)?;
                let b = matrix("plant.b", b)?;
                let c = match c {
                    Some(c) => matrix("plant.c", c)?,
                    None => DMatrix::identity(a.nrows(), a.nrows()),
                };
                let d = match d {
                    Some(d) => matrix("plant.d", d)?,
                    None => DMatrix::zeros(c.nrows(), b.ncols()),
                };
                (a, b, c, d)
            }
            PlantSpec::Chain {
                n,
                a_diag,
                a_off,
                b_diag,
                measured,
                feedthrough,
            } => {
                let a = DMatrix::from_fn(*n, *n, |i, j| match i.abs_diff(j) {
                    0 => *a_diag,
                    1 => *a_off,
                    _ => 0.0,
                });
                let c = selection(*n, measured)?;
                let d = DMatrix::from_element(c.nrows(), *n, *feedthrough);
                (a, DMatrix::identity(*n, *n) * *b_diag, c, d)
            }
            PlantSpec::Grid {
                width,
                height,
                a_diag,
                a_off,
                b_diag,
                measured,
                feedthrough,
            } => {
                let n = width * height;
                let a = DMatrix::from_fn(n, n, |i, j| {
                    let (ri, ci) = (i / width, i % width);
                    let (rj, cj) = (j / width, j % width);
                    match ri.abs_diff(rj) + ci.abs_diff(cj) {
                        0 => *a_diag,
                        1 => *a_off,
                        _ => 0.0,
                    }
                });
                let c = selection(n, measured)?;
                let d = DMatrix::from_element(c.nrows(), n, *feedthrough);
                (a, DMatrix::identity(n, n) * *b_diag, c, d)
            }
        };
        LtiSystem::new(a, b, c, d).map_err(|e| schema("plant", e.to_string()))
    }
}

impl SynthesisConfig {
    pub fn spec(&self, sys: &LtiSystem) -> Result<SynthesisSpec, DeployError> {
        let mut spec = SynthesisSpec::identity(sys, self.horizon);
        if let Some(q) = &self.q_sqrt_diag {
            if q.len() != sys.nx() {
                return Err(schema("synthesis.q_sqrt_diag", format!("expected {} entries", sys.nx())));
            }
            spec.q_sqrt = DMatrix::from_diagonal(&DVector::from_column_slice(q));
        }
        if let Some(r) = &self.r_sqrt_diag {
            if r.len() != sys.nu() {
                return Err(schema("synthesis.r_sqrt_diag", format!("expected {} entries", sys.nu())));
            }
            spec.r_sqrt = DMatrix::from_diagonal(&DVector::from_column_slice(r));
        }
        if let Some(l) = self.soft_terminal {
            spec.terminal = TerminalMode::Soft(l);
        }
        if let Some(d) = self.band {
            match self.route {
                SynthesisRoute::SfH2 => spec.pattern.phi_u = SupportMask::banded(sys.nu(), sys.nx(), d),
                _ => spec.pattern.phi_uy = SupportMask::banded(sys.nu(), sys.ny(), d),
            }
        }
        spec.validate(sys).map_err(|e| schema("synthesis", e.to_string()))?;
        Ok(spec)
    }

    pub fn eval_horizon(&self) -> usize {
        self.eval_horizon.unwrap_or((4 * self.horizon).max(40))
    }
}

impl Scenario {
    /// Semantic checks that the JSON shape cannot express.
    pub fn validate(&self) -> Result<(), DeployError> {
        if self.synthesis.horizon == 0 {
            return Err(schema("synthesis.horizon", "must be at least 1"));
        }
        if self.t_sim == 0 {
            return Err(schema("t_sim", "must be at least 1"));
        }
        if let Some(a) = &self.architecture {
            self.check_arch("architecture", a)?;
        }
        for (i, a) in self.compare.iter().enumerate() {
            self.check_arch(&format!("compare[{i}]"), a)?;
        }
        if !self.failures.is_empty() && self.architecture.is_none() {
            return Err(schema("failures", "node failures need an architecture"));
        }
        let sys = self.plant.build()?;
        if self.realization == RealizationKind::Simplified {
            let rho = spectral_radius(sys.a()).map_err(|e| schema("plant", e.to_string()))?;
            if rho >= 1.0 {
                return Err(schema(
                    "plant",
                    format!("simplified realization needs a Schur stable plant; spectral radius is {rho}"),
                ));
            }
        }
        self.synthesis.spec(&sys)?;
        for (i, p) in self.disturbances.iter().enumerate() {
            let (ch, vals) = match p {
                DisturbanceProgram::Impulse { channel, values, .. } | DisturbanceProgram::Step { channel, values, .. } => {
                    (*channel, Some(values.len()))
                }
                DisturbanceProgram::Random { channel, amplitude, .. } => {
                    if !(amplitude.is_finite() && *amplitude >= 0.0) {
                        return Err(schema(format!("disturbances[{i}].amplitude"), "must be finite and non-negative"));
                    }
                    (*channel, None)
                }
            };
            let dim = Channel::from(ch).dim(&sys);
            if let Some(n) = vals {
                if n != dim {
                    return Err(schema(format!("disturbances[{i}].values"), format!("expected {dim} entries, found {n}")));
                }
            }
        }
        Ok(())
    }

    fn check_arch(&self, path: &str, name: &str) -> Result<(), DeployError> {
        let a = Architecture::from_name(name).ok_or_else(|| {
            let names: Vec<_> = Architecture::ALL.iter().map(|a| a.name()).collect();
            schema(path, format!("unknown architecture {name:?}; expected one of {}", names.join(", ")))
        })?;
        let sf = self.synthesis.route == SynthesisRoute::SfH2;
        if a.is_state_feedback() != sf {
            return Err(schema(path, format!("{name} does not match synthesis route {:?}", self.synthesis.route)));
        }
        Ok(())
    }

    /// Architectures for `compare` and `costs`.
    pub fn compared(&self) -> Vec<Architecture> {
        if self.compare.is_empty() {
            let sf = self.synthesis.route == SynthesisRoute::SfH2;
            Architecture::ALL.into_iter().filter(|a| a.is_state_feedback() == sf).collect()
        } else {
            self.compare.iter().filter_map(|n| Architecture::from_name(n)).collect()
        }
    }

    /// Expands the disturbance program with `seed` as the scenario seed.
    pub fn disturbances(&self, sys: &LtiSystem, seed: u64) -> Disturbances {
        let mut out = Disturbances::new();
        let end = self.t_sim;
        for (i, p) in self.disturbances.iter().enumerate() {
            match p {
                DisturbanceProgram::Impulse { channel, t, values } => {
                    out.add((*channel).into(), *t, DVector::from_column_slice(values));
                }
                DisturbanceProgram::Step {
                    channel,
                    from,
                    until,
                    values,
                } => {
                    for t in *from..until.unwrap_or(end).min(end) {
                        out.add((*channel).into(), t, DVector::from_column_slice(values));
                    }
                }
                DisturbanceProgram::Random {
                    channel,
                    amplitude,
                    from,
                    until,
                    seed: s,
                } => {
                    let ch: Channel = (*channel).into();
                    let mut rng = ChaCha8Rng::seed_from_u64(s.unwrap_or(seed.wrapping_add(i as u64)));
                    let dim = ch.dim(sys);
                    for t in *from..until.unwrap_or(end).min(end) {
                        let v = DVector::from_fn(dim, |_, _| {
                            if *amplitude > 0.0 {
                                rng.random_range(-*amplitude..=*amplitude)
                            } else {
                                0.0
                            }
                        });
                        out.add(ch, t, v);
                    }
                }
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"{
        "plant": {"kind": "chain", "n": 3, "a_diag": 0.4, "a_off": 0.2, "b_diag": 1.0},
        "synthesis": {"route": "sf-h2", "horizon": 6},
        "t_sim": 10
    }"#;

    #[test]
    fn minimal_scenario_parses() {
        let s = LoadedScenario::from_bytes(MINIMAL.as_bytes()).unwrap();
        assert_eq!(s.scenario.realization, RealizationKind::Simplified);
        assert_eq!(s.sha256.len(), 64);
        let sys = s.scenario.plant.build().unwrap();
        assert_eq!(sys.a()[(0, 1)], 0.2);
        assert_eq!(sys.a()[(0, 2)], 0.0);
        assert_eq!(s.scenario.compared().len(), 5);
    }

    #[test]
    fn unknown_field_reports_path() {
        let bad = MINIMAL.replace("\"b_diag\": 1.0", "\"b_diag\": 1.0, \"bogus\": 1");
        match LoadedScenario::from_bytes(bad.as_bytes()) {
            Err(DeployError::Schema { path, message }) => {
                assert_eq!(path, "plant.bogus");
                assert!(message.contains("bogus"), "{message}");
            }
            other => panic!("{other:?}"),
        }
        let bad = MINIMAL.replace("\"horizon\": 6", "\"horizon\": -6");
        match LoadedScenario::from_bytes(bad.as_bytes()) {
            Err(DeployError::Schema { path, .. }) => assert_eq!(path, "synthesis.horizon"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn tagged_sections_keep_inner_paths() {
        let with = |d: &str| MINIMAL.replace("\"t_sim\": 10", &format!("\"t_sim\": 10, \"disturbances\": [{d}]"));
        for (d, want) in [
            (r#"{"kind": "impulse", "channel": "d_x", "t": 0, "values": [1, 2, 3]}, {"kind": "random", "channel": "d_q", "amplitude": 1}"#, "disturbances[1].channel"),
            (r#"{"kind": "pulse"}"#, "disturbances[0].kind"),
            (r#"{"kind": "step", "channel": "d_x", "from": 0, "values": [1, "a", 3]}"#, "disturbances[0].values[1]"),
        ] {
            match LoadedScenario::from_bytes(with(d).as_bytes()) {
                Err(DeployError::Schema { path, .. }) => assert_eq!(path, want),
                other => panic!("{other:?}"),
            }
        }
        let bad = MINIMAL.replace("\"n\": 3", "\"n\": 3.5");
        assert!(matches!(LoadedScenario::from_bytes(bad.as_bytes()), Err(DeployError::Schema { path, .. }) if path == "plant.n"));
    }

    #[test]
    fn serialization_round_trips() {
        let s = LoadedScenario::from_bytes(
            MINIMAL
                .replace("\"t_sim\": 10", "\"t_sim\": 10, \"disturbances\": [{\"kind\": \"random\", \"channel\": \"d_u\", \"amplitude\": 0.5}]")
                .as_bytes(),
        )
        .unwrap()
        .scenario;
        let text = serde_json::to_string(&s).unwrap();
        assert!(text.contains(r#""kind":"chain""#), "{text}");
        assert_eq!(serde_json::from_str::<Scenario>(&text).unwrap(), s);
    }

    #[test]
    fn semantic_errors_report_path() {
        let bad = MINIMAL.replace("\"t_sim\": 10", "\"t_sim\": 10, \"architecture\": \"of-centralized\"");
        assert!(matches!(LoadedScenario::from_bytes(bad.as_bytes()), Err(DeployError::Schema { path, .. }) if path == "architecture"));
        let bad = MINIMAL.replace(
            "\"t_sim\": 10",
            "\"t_sim\": 10, \"disturbances\": [{\"kind\": \"impulse\", \"channel\": \"d_x\", \"t\": 0, \"values\": [1]}]",
        );
        assert!(matches!(LoadedScenario::from_bytes(bad.as_bytes()), Err(DeployError::Schema { path, .. }) if path == "disturbances[0].values"));
    }

    #[test]
    fn grid_couples_four_neighbours() {
        let p = PlantSpec::Grid {
            width: 3,
            height: 2,
            a_diag: 0.3,
            a_off: 0.1,
            b_diag: 1.0,
            measured: Some(vec![0, 5]),
            feedthrough: 0.0,
        };
        let sys = p.build().unwrap();
        assert_eq!(sys.a().row(4).iter().filter(|v| **v == 0.1).count(), 3);
        assert_eq!(sys.c().shape(), (2, 6));
        assert_eq!(sys.c()[(1, 5)], 1.0);
    }

    #[test]
    fn random_program_is_seeded() {
        let s: Scenario = serde_json::from_str(&MINIMAL.replace(
            "\"t_sim\": 10",
            "\"t_sim\": 10, \"disturbances\": [{\"kind\": \"random\", \"channel\": \"d_x\", \"amplitude\": 1.0}]",
        ))
        .unwrap();
        let sys = s.plant.build().unwrap();
        assert_eq!(s.disturbances(&sys, 3), s.disturbances(&sys, 3));
        assert_ne!(s.disturbances(&sys, 3), s.disturbances(&sys, 4));
        assert_eq!(s.disturbances(&sys, 3).iter().count(), 10);
    }
}
