//! Model arguments: shorthand `name:key=value,...`, inline JSON, or a path to a JSON file.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use serde_json::Value;
use weyllab_core::geometry::{Fiber, WarpProfile};
use weyllab_core::models::{EdgeCondition, ModelSpec};
use weyllab_core::svf::SlowVaryingSpec;

use crate::ConfigError;

fn bad(msg: impl Into<String>) -> anyhow::Error {
    ConfigError(msg.into()).into()
}

struct Params {
    model: String,
    values: BTreeMap<String, String>,
}

impl Params {
    fn take(&mut self, keys: &[&str]) -> Option<String> {
        keys.iter().find_map(|k| self.values.remove(*k))
    }

    fn num(&mut self, keys: &[&str], default: f64) -> anyhow::Result<f64> {
        match self.take(keys) {
            None => Ok(default),
            Some(s) => parse_number(&s).ok_or_else(|| bad(format!("{}: `{s}` is not a number", self.model))),
        }
    }

    fn int(&mut self, keys: &[&str], default: u32) -> anyhow::Result<u32> {
        match self.take(keys) {
            None => Ok(default),
            Some(s) => s.parse().map_err(|_| bad(format!("{}: `{s}` is not a non-negative integer", self.model))),
        }
    }

    fn edge(&mut self, keys: &[&str], default: EdgeCondition) -> anyhow::Result<EdgeCondition> {
        match self.take(keys).as_deref() {
            None => Ok(default),
            Some("dirichlet" | "d") => Ok(EdgeCondition::Dirichlet),
            Some("neumann" | "n") => Ok(EdgeCondition::Neumann),
            Some(s) => Err(bad(format!("{}: unknown edge condition `{s}`", self.model))),
        }
    }

    fn finish(self) -> anyhow::Result<()> {
        if let Some(k) = self.values.keys().next() {
            return Err(bad(format!("{}: unknown parameter `{k}`", self.model)));
        }
        Ok(())
    }
}

/// Numbers, with `pi` and `2pi` accepted.
pub fn parse_number(s: &str) -> Option<f64> {
    match s.trim() {
        "pi" => Some(PI),
        "2pi" | "2*pi" => Some(2.0 * PI),
        t => t.parse().ok(),
    }
}

pub fn parse_shorthand(s: &str) -> anyhow::Result<ModelSpec> {
    let (name, rest) = s.split_once(':').unwrap_or((s, ""));
    let mut values = BTreeMap::new();
    for kv in rest.split(',').filter(|p| !p.is_empty()) {
        let (k, v) = kv.split_once('=').ok_or_else(|| bad(format!("{name}: expected key=value, got `{kv}`")))?;
        values.insert(k.trim().to_string(), v.trim().to_string());
    }
    let mut p = Params { model: name.to_string(), values };
    let spec = match name {
        "ars" => ModelSpec::ArsCylinder {
            m: p.int(&["m"], 1)?,
            fiber_length: p.num(&["L", "fiber_length"], 2.0 * PI)?,
            outer: p.edge(&["outer"], EdgeCondition::Dirichlet)?,
            x_max: p.num(&["x_max"], 1.0)?,
        },
        "grushin" => ModelSpec::GrushinSphere,
        "worst" => ModelSpec::WorstCase { k: p.int(&["k"], 2)? },
        "nonregular" => ModelSpec::NonRegularExample,
        "interval" => {
            let both = p.edge(&["bc"], EdgeCondition::Dirichlet)?;
            ModelSpec::Interval {
                length: p.num(&["L", "length"], 1.0)?,
                left: p.edge(&["left"], both)?,
                right: p.edge(&["right"], both)?,
            }
        }
        "flat" => ModelSpec::Warped {
            profile: WarpProfile::Power { coeff: 1.0, exponent: 0.0 },
            fiber: Fiber::Circle { length: p.num(&["fiber_length", "fiber"], 2.0 * PI)? },
            x_max: p.num(&["L", "x_max"], PI)?,
            outer: p.edge(&["outer"], EdgeCondition::Dirichlet)?,
            inner: p.edge(&["inner"], EdgeCondition::Dirichlet)?,
        },
        "prescribed" => {
            let upsilon: SlowVaryingSpec = p
                .take(&["upsilon", "u"])
                .unwrap_or_else(|| "log^2".into())
                .parse()
                .map_err(|e| bad(format!("prescribed: {e}")))?;
            let n = p.int(&["n"], 2)? as usize;
            ModelSpec::PrescribedWeyl {
                upsilon,
                n,
                vol_z: p.num(&["vol_z"], (2.0 * PI).powi(n as i32 - 1))?,
                outer: p.edge(&["outer"], EdgeCondition::Dirichlet)?,
            }
        }
        other => return Err(bad(format!("unknown model `{other}`"))),
    };
    p.finish()?;
    Ok(spec)
}

/// Accepts `Value::String` (shorthand, inline JSON or a file path) or a JSON object.
pub fn resolve_model(v: &Value) -> anyhow::Result<ModelSpec> {
    match v {
        Value::String(s) if s.trim_start().starts_with('{') => from_json(serde_json::from_str(s)?),
        Value::String(s) if s.ends_with(".json") => {
            let text = std::fs::read_to_string(s).map_err(|e| bad(format!("cannot read model file {s}: {e}")))?;
            from_json(serde_json::from_str(&text).map_err(|e| bad(format!("{s}: {e}")))?)
        }
        Value::String(s) => parse_shorthand(s),
        other => from_json(other.clone()),
    }
}

fn from_json(v: Value) -> anyhow::Result<ModelSpec> {
    serde_json::from_value(v).map_err(|e| bad(format!("invalid model spec: {e}")))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shorthands() {
        assert!(matches!(parse_shorthand("ars:m=2").unwrap(), ModelSpec::ArsCylinder { m: 2, .. }));
        assert!(matches!(parse_shorthand("worst:k=3").unwrap(), ModelSpec::WorstCase { k: 3 }));
        let ModelSpec::Interval { length, left, right } = parse_shorthand("interval:L=pi,bc=neumann").unwrap() else {
            panic!()
        };
        assert_eq!((length, left, right), (PI, EdgeCondition::Neumann, EdgeCondition::Neumann));
        let ModelSpec::PrescribedWeyl { upsilon, n, vol_z, .. } =
            parse_shorthand("prescribed:upsilon=7*log+3,n=3").unwrap()
        else {
            panic!()
        };
        assert_eq!((upsilon.to_string().as_str(), n), ("7*log+3", 3));
        assert!((vol_z - 4.0 * PI * PI).abs() < 1e-12);
        assert!(parse_shorthand("ars:q=1").is_err());
        assert!(parse_shorthand("torus").is_err());
    }

    #[test]
    fn json_round_trip() {
        let spec = parse_shorthand("ars:m=1").unwrap();
        let v = Value::String(serde_json::to_string(&spec).unwrap());
        assert_eq!(resolve_model(&v).unwrap(), spec);
    }
}
