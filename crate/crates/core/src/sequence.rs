//! Rate sequences aₙ used by the constructions.

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

/// Named presets: `sqrt_plus:b` (√n + b), `linear:α` (α(n+1)), `log` (ln(n+e)),
/// or an explicit list.
#[derive(Clone, Debug, PartialEq)]
pub enum SequenceSpec {
    SqrtPlus(f64),
    Linear(f64),
    Log,
    Custom(Vec<f64>),
}

impl SequenceSpec {
    pub fn value(&self, n: usize) -> Option<f64> {
        let x = n as f64;
        match self {
            SequenceSpec::SqrtPlus(b) => Some(x.sqrt() + b),
            SequenceSpec::Linear(a) => Some(a * (x + 1.0)),
            SequenceSpec::Log => Some((x + std::f64::consts::E).ln()),
            SequenceSpec::Custom(v) => v.get(n).copied(),
        }
    }

    /// a₀..a_{len-1}; errors when the spec is too short or not positive.
    pub fn prefix(&self, len: usize) -> Result<Vec<f64>> {
        let v: Vec<f64> = (0..len)
            .map(|n| {
                self.value(n)
                    .ok_or_else(|| Error::invalid(format!("sequence has no entry a_{n}")))
            })
            .collect::<Result<_>>()?;
        if let Some(x) = v.iter().find(|x| !(**x > 0.0 && x.is_finite())) {
            return Err(Error::invalid(format!(
                "sequence entries must be positive and finite, got {x}"
            )));
        }
        Ok(v)
    }

    /// Whether the spec tends to infinity. Explicit lists qualify when their
    /// suffix minima strictly grow from the first entry to the last.
    pub fn tends_to_infinity(&self) -> bool {
        match self {
            SequenceSpec::SqrtPlus(_) | SequenceSpec::Log => true,
            SequenceSpec::Linear(a) => *a > 0.0,
            SequenceSpec::Custom(v) => {
                let tail = v.iter().copied().fold(f64::INFINITY, f64::min);
                v.len() >= 2
                    && v.last().is_some_and(|l| *l > tail)
                    && v[v.len() / 2..].iter().all(|x| *x > v[0])
            }
        }
    }
}

impl FromStr for SequenceSpec {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s.starts_with('[') {
            let v: Vec<f64> = serde_json::from_str(s)
                .map_err(|e| Error::invalid(format!("bad sequence list: {e}")))?;
            return Ok(SequenceSpec::Custom(v));
        }
        let (name, arg) = s.split_once(':').map_or((s, None), |(a, b)| (a, Some(b)));
        let num = |a: Option<&str>| -> Result<f64> {
            a.ok_or_else(|| Error::invalid(format!("sequence `{name}` needs a parameter")))?
                .trim()
                .parse::<f64>()
                .map_err(|e| Error::invalid(format!("bad sequence parameter: {e}")))
        };
        match name {
            "sqrt_plus" => Ok(SequenceSpec::SqrtPlus(num(arg)?)),
            "linear" => Ok(SequenceSpec::Linear(num(arg)?)),
            "log" => Ok(SequenceSpec::Log),
            "custom" => Self::from_str(arg.unwrap_or("[]")),
            _ => Err(Error::invalid(format!("unknown sequence preset `{name}`"))),
        }
    }
}

impl fmt::Display for SequenceSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SequenceSpec::SqrtPlus(b) => write!(f, "sqrt_plus:{b}"),
            SequenceSpec::Linear(a) => write!(f, "linear:{a}"),
            SequenceSpec::Log => write!(f, "log"),
            SequenceSpec::Custom(v) => {
                write!(f, "{}", serde_json::to_string(v).unwrap_or_default())
            }
        }
    }
}

impl Serialize for SequenceSpec {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            SequenceSpec::Custom(v) => v.serialize(s),
            other => s.serialize_str(&other.to_string()),
        }
    }
}

impl<'de> Deserialize<'de> for SequenceSpec {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Wire {
            Name(String),
            List(Vec<f64>),
        }
        match Wire::deserialize(d)? {
            Wire::Name(s) => s.parse().map_err(serde::de::Error::custom),
            Wire::List(v) => Ok(SequenceSpec::Custom(v)),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_parse_and_evaluate() {
        let a: SequenceSpec = "sqrt_plus:10".parse().unwrap();
        assert_eq!(a.value(4), Some(12.0));
        let l: SequenceSpec = "linear:5".parse().unwrap();
        assert_eq!(l.prefix(3).unwrap(), vec![5.0, 10.0, 15.0]);
        assert!(("log".parse::<SequenceSpec>().unwrap().value(0).unwrap() - 1.0).abs() < 1e-15);
        let c: SequenceSpec = "[1, 2, 3]".parse().unwrap();
        assert_eq!(c.value(3), None);
        assert!("nope:1".parse::<SequenceSpec>().is_err());
        assert!("linear".parse::<SequenceSpec>().is_err());
    }

    #[test]
    fn json_forms() {
        let s: SequenceSpec = serde_json::from_str("\"sqrt_plus:10\"").unwrap();
        assert_eq!(s, SequenceSpec::SqrtPlus(10.0));
        let c: SequenceSpec = serde_json::from_str("[3, 4]").unwrap();
        assert_eq!(serde_json::to_string(&c).unwrap(), "[3.0,4.0]");
    }

    #[test]
    fn divergence_test() {
        assert!(SequenceSpec::SqrtPlus(0.0).tends_to_infinity());
        assert!(!SequenceSpec::Custom(vec![5.0; 10]).tends_to_infinity());
        assert!(SequenceSpec::Custom((1..20).map(f64::from).collect()).tends_to_infinity());
    }
}
