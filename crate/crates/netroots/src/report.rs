//! JSON documents written by the command-line tool.
//!
//! Every float is rounded to 12 significant digits before serialization so
//! that reruns diff cleanly.

use std::collections::BTreeMap;

use serde::Serialize;
use serde_json::Value;

use crate::error::Result;
use crate::gibbs::Diagnostics;
use crate::inference::ClusterSummary;
use crate::params::ModelParams;

pub const SIGNIFICANT_DIGITS: usize = 12;

/// Rounds to `digits` significant digits; non-finite values pass through.
pub fn round_sig(x: f64, digits: usize) -> f64 {
    if !x.is_finite() || x == 0.0 {
        return x;
    }
    format!("{:.*e}", digits - 1, x).parse().unwrap_or(x)
}

/// Rounds every float inside a JSON value in place.
pub fn round_value(v: &mut Value) {
    match v {
        Value::Number(num) if num.is_f64() => {
            let x = round_sig(num.as_f64().unwrap(), SIGNIFICANT_DIGITS);
            if let Some(r) = serde_json::Number::from_f64(x) {
                *num = r;
            }
        }
        Value::Array(xs) => xs.iter_mut().for_each(round_value),
        Value::Object(map) => map.values_mut().for_each(round_value),
        _ => {}
    }
}

/// Pretty JSON with rounded floats and a trailing newline.
pub fn to_json<T: Serialize>(x: &T) -> Result<String> {
    let mut v = serde_json::to_value(x)?;
    round_value(&mut v);
    Ok(serde_json::to_string_pretty(&v)? + "\n")
}

/// Compact single-line JSON with rounded floats (for NDJSON streams).
pub fn to_json_line<T: Serialize>(x: &T) -> Result<String> {
    let mut v = serde_json::to_value(x)?;
    round_value(&mut v);
    Ok(serde_json::to_string(&v)?)
}

#[derive(Clone, Debug, Serialize)]
pub struct Estimates {
    /// `null` stands for uniform attachment.
    pub alpha_hat: Option<f64>,
    pub theta_hat: f64,
}

impl Estimates {
    pub fn new(alpha: f64, theta: f64) -> Self {
        Estimates {
            alpha_hat: alpha.is_finite().then_some(alpha),
            theta_hat: theta,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct ClusterReport {
    pub root_distributions: Vec<Vec<f64>>,
    pub posterior_frequency: Vec<f64>,
    /// Per node: most likely cluster and its membership probability.
    pub assignment: Vec<(usize, f64)>,
    pub membership: Vec<Vec<f64>>,
}

impl From<&ClusterSummary> for ClusterReport {
    fn from(c: &ClusterSummary) -> Self {
        ClusterReport {
            root_distributions: c.clusters.iter().map(|d| d.probs().to_vec()).collect(),
            posterior_frequency: c.posterior_frequency.clone(),
            assignment: c.assignment.clone(),
            membership: c.membership.clone(),
        }
    }
}

/// Output of `infer`.
#[derive(Clone, Debug, Serialize)]
pub struct InferReport {
    pub schema_version: &'static str,
    pub variant: &'static str,
    pub params: ModelParams,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub estimated: Option<Estimates>,
    pub n: usize,
    pub m: usize,
    /// Node labels; every per-node array below follows this order.
    pub nodes: Vec<String>,
    pub root_distribution: Vec<f64>,
    /// Keyed by nominal level, members as labels in decreasing probability.
    pub credible_sets: BTreeMap<String, Vec<String>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub clusters: Option<ClusterReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub posterior_over_k: Option<BTreeMap<usize, f64>>,
    pub diagnostics: Diagnostics,
    pub wall_time_s: f64,
}

/// Level key used in `credible_sets`, e.g. `"0.8"`.
pub fn level_key(epsilon: f64) -> String {
    let l = round_sig(1.0 - epsilon, 10);
    format!("{l}")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rounding() {
        assert_eq!(round_sig(0.1 + 0.2, 12), 0.3);
        assert_eq!(round_sig(123456789.123456789, 12), 123456789.123);
        assert_eq!(round_sig(-1.0 / 3.0, 3), -0.333);
        assert!(round_sig(f64::NAN, 12).is_nan());
        let mut v = serde_json::json!({"a": [1.0000000000001, 2], "b": {"c": 0.1 + 0.7}});
        round_value(&mut v);
        assert_eq!(v.to_string(), r#"{"a":[1.0,2],"b":{"c":0.8}}"#);
    }

    #[test]
    fn level_keys() {
        assert_eq!(level_key(0.2), "0.8");
        assert_eq!(level_key(0.05), "0.95");
    }
}
