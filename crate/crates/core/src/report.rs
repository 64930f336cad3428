//! Named diagnostic records and their `key=value` text form.

use std::collections::BTreeMap;
use std::fmt;

/// Outcome of one diagnostic.
///
/// `pass` holds exactly when `margin >= 0`; constructors keep the two in sync.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbeReport {
    pub name: String,
    pub values: BTreeMap<String, f64>,
    pub notes: Vec<String>,
    pub pass: bool,
    pub margin: f64,
}

impl ProbeReport {
    pub fn new(name: impl Into<String>) -> Self {
        Self { name: name.into(), values: BTreeMap::new(), notes: Vec::new(), pass: true, margin: f64::INFINITY }
    }

    pub fn with(mut self, key: &str, value: f64) -> Self {
        self.set(key, value);
        self
    }

    pub fn set(&mut self, key: &str, value: f64) {
        self.values.insert(key.to_string(), value);
    }

    pub fn note(&mut self, text: impl Into<String>) {
        self.notes.push(text.into());
    }

    pub fn get(&self, key: &str) -> Option<f64> {
        self.values.get(key).copied()
    }

    /// Sets the margin; `pass` follows its sign. NaN margins fail.
    pub fn decide(mut self, margin: f64) -> Self {
        self.margin = margin;
        self.pass = margin >= 0.0;
        self
    }
}

impl fmt::Display for ProbeReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "[{}]", self.name)?;
        writeln!(f, "pass={}", self.pass)?;
        writeln!(f, "margin={}", self.margin)?;
        for (k, v) in &self.values {
            writeln!(f, "{k}={v}")?;
        }
        for n in &self.notes {
            writeln!(f, "note={n}")?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pass_tracks_margin() {
        let r = ProbeReport::new("t").with("a", 1.0).decide(-0.5);
        assert!(!r.pass);
        let r = ProbeReport::new("t").decide(0.0);
        assert!(r.pass);
        let r = ProbeReport::new("t").decide(f64::NAN);
        assert!(!r.pass);
    }

    #[test]
    fn text_block_is_sorted() {
        let r = ProbeReport::new("osc").with("b", 2.0).with("a", 1.0).decide(1.0);
        assert_eq!(r.to_string(), "[osc]\npass=true\nmargin=1\na=1\nb=2\n");
    }
}
