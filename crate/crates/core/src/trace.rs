use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use nalgebra::DVector;

/// Per-timestep vectors of named signals, `t = 0..len`.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Trace {
    signals: BTreeMap<String, Vec<DVector<f64>>>,
}

impl Trace {
    pub fn new() -> Self {
        Self::default()
    }

    /// Appends the next sample of `name`.
    ///
    /// Panics if the dimension differs from earlier samples of the same signal.
    pub fn push(&mut self, name: &str, value: DVector<f64>) {
        let series = self.signals.entry(name.to_string()).or_default();
        if let Some(first) = series.first() {
            assert_eq!(first.len(), value.len(), "signal {name} changed dimension");
        }
        series.push(value);
    }

    pub fn signal(&self, name: &str) -> Option<&[DVector<f64>]> {
        self.signals.get(name).map(|v| v.as_slice())
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.signals.keys().map(|s| s.as_str())
    }

    /// Number of samples of the longest signal.
    pub fn len(&self) -> usize {
        self.signals.values().map(|v| v.len()).max().unwrap_or(0)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Largest `|a - b|` over every sample of `name`; `None` if either trace lacks it
    /// or the lengths differ.
    pub fn max_abs_deviation(&self, other: &Trace, name: &str) -> Option<f64> {
        let (a, b) = (self.signal(name)?, other.signal(name)?);
        if a.len() != b.len() {
            return None;
        }
        Some(
            a.iter()
                .zip(b)
                .map(|(x, y)| if x.len() == y.len() { (x - y).amax() } else { f64::INFINITY })
                .fold(0.0, f64::max),
        )
    }

    /// Deviation relative to the magnitude of `self` (the reference); the
    /// denominator is floored at 1 so near-zero references compare absolutely.
    pub fn max_relative_deviation(&self, other: &Trace, name: &str) -> Option<f64> {
        let abs = self.max_abs_deviation(other, name)?;
        let scale = self.signal(name)?.iter().map(|v| v.amax()).fold(0.0, f64::max);
        Some(abs / scale.max(1.0))
    }

    pub fn max_abs(&self, name: &str) -> Option<f64> {
        Some(self.signal(name)?.iter().map(|v| v.amax()).fold(0.0, f64::max))
    }
}
