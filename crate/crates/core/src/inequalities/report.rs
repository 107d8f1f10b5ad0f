use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Exact,
    Mc,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Status {
    Holds,
    Violated,
    /// Degenerate input (e.g. a zero moment in a denominator); holds trivially.
    Vacuous,
    /// A precondition of the statement is not met.
    NotApplicable,
}

/// Both sides of a checked inequality `lhs ≤ rhs`.
///
/// Lower bounds `P(…) ≥ bound` are stored with `lhs = bound`, `rhs = P(…)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IneqReport {
    pub id: String,
    pub params: BTreeMap<String, serde_json::Value>,
    #[serde(with = "extended_float")]
    pub lhs: f64,
    #[serde(with = "extended_float")]
    pub rhs: f64,
    #[serde(with = "extended_float")]
    pub constant: f64,
    pub holds: bool,
    #[serde(with = "extended_float")]
    pub margin: f64,
    pub status: Status,
    pub method: Method,
    pub samples: u64,
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
}

impl IneqReport {
    /// Exact comparison `lhs ≤ rhs + slack`.
    pub fn exact(id: &str, lhs: f64, rhs: f64, constant: f64, slack: f64) -> Self {
        let holds = lhs <= rhs + slack;
        Self {
            id: id.to_string(),
            params: BTreeMap::new(),
            lhs,
            rhs,
            constant,
            holds,
            margin: rhs - lhs,
            status: if holds { Status::Holds } else { Status::Violated },
            method: Method::Exact,
            samples: 0,
            seed: None,
            notes: Vec::new(),
        }
    }

    /// Comparison of exact or slack-aware weights.
    pub fn compare<W: crate::scalar::Weight>(id: &str, lhs: &W, rhs: &W, constant: f64) -> Self {
        let mut r = Self::exact(id, lhs.to_f64(), rhs.to_f64(), constant, 0.0);
        r.set_holds(lhs.le_slack(rhs));
        r
    }

    pub(crate) fn set_holds(&mut self, holds: bool) {
        self.holds = holds;
        self.status = if holds { Status::Holds } else { Status::Violated };
    }

    pub fn vacuous(id: &str, lhs: f64, rhs: f64, constant: f64, why: &str) -> Self {
        let mut r = Self::exact(id, lhs, rhs, constant, 0.0);
        r.holds = true;
        r.status = Status::Vacuous;
        r.notes.push(why.to_string());
        r
    }

    pub fn not_applicable(id: &str, why: &str) -> Self {
        let mut r = Self::exact(id, f64::NAN, f64::NAN, f64::NAN, 0.0);
        r.holds = true;
        r.margin = f64::NAN;
        r.status = Status::NotApplicable;
        r.notes.push(why.to_string());
        r
    }

    pub fn param(mut self, key: &str, value: impl Into<serde_json::Value>) -> Self {
        self.params.insert(key.to_string(), value.into());
        self
    }

    pub fn note(mut self, text: impl Into<String>) -> Self {
        self.notes.push(text.into());
        self
    }

    pub fn monte_carlo(mut self, samples: u64, seed: u64) -> Self {
        self.method = Method::Mc;
        self.samples = samples;
        self.seed = Some(seed);
        self
    }

    /// Whether this is an exact-mode failure.
    pub fn is_exact_violation(&self) -> bool {
        self.method == Method::Exact && self.status == Status::Violated
    }

    /// Keeps the report with the smallest margin, preferring violations.
    pub fn worst(self, other: Self) -> Self {
        let key = |r: &Self| (r.holds, if r.margin.is_nan() { f64::INFINITY } else { r.margin });
        let (a, b) = (key(&self), key(&other));
        if (b.0, b.1) < (a.0, a.1) {
            other
        } else {
            self
        }
    }
}

/// Serializes non-finite floats as the strings `"inf"`, `"-inf"`, `"nan"`.
mod extended_float {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(x: &f64, s: S) -> Result<S::Ok, S::Error> {
        if x.is_finite() {
            s.serialize_f64(*x)
        } else if x.is_nan() {
            s.serialize_str("nan")
        } else if *x > 0.0 {
            s.serialize_str("inf")
        } else {
            s.serialize_str("-inf")
        }
    }

    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Num(f64),
        Text(String),
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        match Repr::deserialize(d)? {
            Repr::Num(x) => Ok(x),
            Repr::Text(t) => match t.as_str() {
                "inf" => Ok(f64::INFINITY),
                "-inf" => Ok(f64::NEG_INFINITY),
                "nan" => Ok(f64::NAN),
                other => Err(serde::de::Error::custom(format!("unexpected float `{other}`"))),
            },
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn json_round_trip_with_infinities() {
        let r = IneqReport::vacuous("reverse-kolmogorov", 0.0, f64::NEG_INFINITY, 1.0, "zero moment").param("p", 2.0);
        let json = serde_json::to_string(&r).unwrap();
        let back: IneqReport = serde_json::from_str(&json).unwrap();
        assert_eq!(back.rhs, f64::NEG_INFINITY);
        assert_eq!(back.status, Status::Vacuous);
        assert!(back.holds);
    }

    #[test]
    fn worst_prefers_violation_then_margin() {
        let a = IneqReport::exact("x", 1.0, 3.0, 1.0, 0.0);
        let b = IneqReport::exact("x", 1.0, 2.0, 1.0, 0.0);
        let c = IneqReport::exact("x", 2.0, 1.0, 1.0, 0.0);
        assert_eq!(a.clone().worst(b.clone()).margin, 1.0);
        assert!(!b.worst(c).holds);
    }
}
