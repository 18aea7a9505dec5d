//! Target and channel spec strings shared by every subcommand.
//!
//! ```text
//! target:  [builtin:]identity[:U] | equality[:U] | greater_than[:U]
//!          random:U=<u>:W=<w>:seed=<s>
//!          file:<path>
//! channel: [builtin:]adder | or
//!          random:X=<x>:Y=<y>:seed=<s>
//!          file:<path>
//! ```
//!
//! Files may hold a bare target or channel, or an instance bundle.

use std::collections::BTreeMap;

use mismatchlab::instance::Instance;
use mismatchlab::{ChannelFunction, ChannelKind, Code, Error, TargetFunction, TargetKind};
use num_rational::Ratio;

use crate::CliError;

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

fn read(path: &str) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(|e| CliError::Io(format!("{path}: {e}")))
}

/// Parses `key=value` fields after a `random:` prefix.
fn fields(rest: &str) -> Result<BTreeMap<String, u64>, CliError> {
    let mut out = BTreeMap::new();
    for part in rest.split(':').filter(|p| !p.is_empty()) {
        let (k, v) = part.split_once('=').ok_or_else(|| usage(format!("expected key=value, got {part:?}")))?;
        let v = v.parse().map_err(|_| usage(format!("{k} needs a non-negative integer, got {v:?}")))?;
        out.insert(k.to_string(), v);
    }
    Ok(out)
}

fn field(map: &BTreeMap<String, u64>, key: &str, default: Option<u64>) -> Result<u64, CliError> {
    map.get(key).copied().or(default).ok_or_else(|| usage(format!("random spec needs {key}=")))
}

fn schema<T: serde::de::DeserializeOwned>(text: &str) -> Result<T, CliError> {
    serde_json::from_str(text).map_err(|e| CliError::Core(Error::Schema(e.to_string())))
}

/// Files may contain an instance or the bare object.
fn from_file<T: serde::de::DeserializeOwned>(
    path: &str,
    pick: impl Fn(Instance) -> Option<T>,
    what: &str,
) -> Result<T, CliError> {
    let text = read(path)?;
    if let Ok(inst) = Instance::from_json(&text) {
        if let Some(v) = pick(inst) {
            return Ok(v);
        }
    }
    let value: serde_json::Value = schema(&text)?;
    let is_bundle = ["target", "channel", "code"].iter().any(|k| value.get(k).is_some());
    if is_bundle {
        Instance::from_json(&text)?;
        return Err(CliError::Core(Error::Schema(format!("{path} holds no {what}"))));
    }
    schema(&text)
}

pub fn target(spec: &str) -> Result<TargetFunction, CliError> {
    if let Some(path) = spec.strip_prefix("file:") {
        return from_file(path, |i| i.target, "target");
    }
    if let Some(rest) = spec.strip_prefix("random:") {
        let f = fields(rest)?;
        let u = field(&f, "U", None)? as usize;
        let w = field(&f, "W", Some(2))? as usize;
        return Ok(TargetFunction::builtin(TargetKind::Random, u, w, field(&f, "seed", Some(0))?)?);
    }
    let body = spec.strip_prefix("builtin:").unwrap_or(spec);
    let (name, u) = match body.split_once(':') {
        Some((n, u)) => (n, u.parse().map_err(|_| usage(format!("bad U in target spec {spec:?}")))?),
        None => (body, 2),
    };
    let kind = match name {
        "identity" => TargetKind::Identity,
        "equality" => TargetKind::Equality,
        "greater_than" | "gt" => TargetKind::GreaterThan,
        _ => return Err(usage(format!("unknown target {name:?}"))),
    };
    Ok(TargetFunction::builtin(kind, u, 0, 0)?)
}

pub fn channel(spec: &str, uses: u32) -> Result<ChannelFunction, CliError> {
    if uses == 0 {
        return Err(usage("--uses must be at least 1"));
    }
    let g = if let Some(path) = spec.strip_prefix("file:") {
        from_file(path, |i| i.channel, "channel")?
    } else if let Some(rest) = spec.strip_prefix("random:") {
        let f = fields(rest)?;
        let (x, y) = (field(&f, "X", None)? as usize, field(&f, "Y", None)? as usize);
        ChannelFunction::builtin(ChannelKind::Random, x, y, field(&f, "seed", Some(0))?)?
    } else {
        let kind = match spec.strip_prefix("builtin:").unwrap_or(spec) {
            "adder" | "binary_adder" => ChannelKind::BinaryAdder,
            "or" | "boolean_or" => ChannelKind::BooleanOr,
            other => return Err(usage(format!("unknown channel {other:?}"))),
        };
        ChannelFunction::builtin(kind, 0, 0, 0)?
    };
    if uses == 1 {
        return Ok(g);
    }
    if g.uses() != 1 {
        return Err(usage("--uses only applies to single-use channels"));
    }
    Ok(g.tensor_power(uses)?)
}

pub fn code(spec: &str) -> Result<Code, CliError> {
    let path = spec.strip_prefix("file:").unwrap_or(spec);
    from_file(path, |i| i.code, "code")
}

/// `p/q`, an integer, or a decimal such as `0.25`.
pub fn ratio(s: &str) -> Result<Ratio<u64>, CliError> {
    let bad = || usage(format!("expected a fraction like 1/4 or 0.25, got {s:?}"));
    if let Some((p, q)) = s.split_once('/') {
        let (p, q): (u64, u64) = (p.parse().map_err(|_| bad())?, q.parse().map_err(|_| bad())?);
        if q == 0 {
            return Err(bad());
        }
        return Ok(Ratio::new(p, q));
    }
    let (int, frac) = s.split_once('.').unwrap_or((s, ""));
    if frac.len() > 18 || (int.is_empty() && frac.is_empty()) {
        return Err(bad());
    }
    let int: u64 = if int.is_empty() { 0 } else { int.parse().map_err(|_| bad())? };
    let num: u64 = if frac.is_empty() { 0 } else { frac.parse().map_err(|_| bad())? };
    let den = 10u64.pow(frac.len() as u32);
    Ok(Ratio::from_integer(int) + Ratio::new(num, den))
}
