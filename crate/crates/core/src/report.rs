//! Machine-readable run summaries: one JSON document per command or
//! experiment, with the verbatim parameter set, a pass/fail line per checked
//! invariant, and the worst margins observed.  Maps are ordered so identical
//! runs serialize identically.

use serde::Serialize;
use std::collections::BTreeMap;

#[derive(Debug, Clone, Serialize)]
pub struct InvariantResult {
    pub name: String,
    pub pass: bool,
    /// Signed distance to the threshold where one applies (nonnegative on
    /// pass for margin-style checks).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub margin: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct Summary {
    pub name: String,
    /// The exact parameters the run used, as given.
    pub params: BTreeMap<String, String>,
    pub invariants: Vec<InvariantResult>,
    pub worst_margins: BTreeMap<String, f64>,
    /// Spectral shift applied by the run, when one was.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub shift: Option<f64>,
    pub pass: bool,
}

impl Summary {
    pub fn new(name: impl Into<String>) -> Self {
        Summary {
            name: name.into(),
            params: BTreeMap::new(),
            invariants: Vec::new(),
            worst_margins: BTreeMap::new(),
            shift: None,
            pass: true,
        }
    }

    pub fn param(&mut self, key: &str, value: impl ToString) -> &mut Self {
        self.params.insert(key.to_string(), value.to_string());
        self
    }

    pub fn check(&mut self, name: &str, pass: bool, margin: Option<f64>) -> &mut Self {
        self.invariants.push(InvariantResult {
            name: name.to_string(),
            pass,
            margin,
        });
        if let Some(m) = margin {
            self.worst_margins
                .entry(name.to_string())
                .and_modify(|w| *w = w.min(m))
                .or_insert(m);
        }
        self.pass &= pass;
        self
    }

    pub fn to_json(&self) -> String {
        // Serialization of this tree is infallible: string keys, finite maps.
        let mut body = serde_json::to_string_pretty(self).expect("summary serializes");
        body.push('\n');
        body
    }
}
