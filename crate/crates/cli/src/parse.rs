//! Parsers for compact command-line values.

use anyhow::{anyhow, bail, Context, Result};
use onr_core::measurement::DetectorModel;

/// Splits a unit suffix off and returns the factor converting to pW.
fn split_unit(s: &str) -> (&str, f64) {
    let s = s.trim();
    for (suffix, scale) in [
        ("pW", 1.0),
        ("nW", 1e3),
        ("uW", 1e6),
        ("µW", 1e6),
        ("mW", 1e9),
        ("W", 1e12),
    ] {
        if let Some(body) = s.strip_suffix(suffix) {
            return (body.trim(), scale);
        }
    }
    (s, 1.0)
}

fn number(s: &str) -> Result<f64> {
    let v: f64 = s
        .trim()
        .parse()
        .with_context(|| format!("`{s}` is not a number"))?;
    if !v.is_finite() {
        bail!("`{s}` is not finite");
    }
    Ok(v)
}

/// Powers in pW from `start:stop:step[unit]` or `a,b,c[unit]`; the unit
/// defaults to pW. Grid points are formed in the given unit, so `30:110:10`
/// yields exactly 30, 40, …, 110.
pub fn powers(spec: &str) -> Result<Vec<f64>> {
    let (body, scale) = split_unit(spec);
    let out: Vec<f64> = if body.contains(':') {
        let parts: Vec<&str> = body.split(':').collect();
        if parts.len() != 3 {
            bail!("power range must be start:stop:step, got `{spec}`");
        }
        let (a, b, s) = (number(parts[0])?, number(parts[1])?, number(parts[2])?);
        onr_core::measurement::power_grid(a, b, s)
            .map_err(|e| anyhow!("{e}"))?
            .into_iter()
            .map(|x| x * scale)
            .collect()
    } else {
        body.split(',')
            .map(|x| number(x).map(|v| v * scale))
            .collect::<Result<_>>()?
    };
    if out.is_empty() {
        bail!("no powers in `{spec}`");
    }
    if out.iter().any(|&p| p < 0.0) {
        bail!("powers must be non-negative");
    }
    Ok(out)
}

/// Log-spaced powers in pW from `start:stop:count[unit]`.
pub fn log_powers(spec: &str) -> Result<Vec<f64>> {
    let (body, scale) = split_unit(spec);
    let parts: Vec<&str> = body.split(':').collect();
    if parts.len() != 3 {
        bail!("drive scan must be start:stop:count, got `{spec}`");
    }
    let (a, b) = (number(parts[0])? * scale, number(parts[1])? * scale);
    let n: usize = parts[2]
        .trim()
        .parse()
        .with_context(|| format!("`{}` is not a count", parts[2]))?;
    if !(a > 0.0 && b >= a) || n == 0 {
        bail!("drive scan needs 0 < start ≤ stop and count ≥ 1");
    }
    if n == 1 {
        return Ok(vec![a]);
    }
    Ok((0..n)
        .map(|i| a * (b / a).powf(i as f64 / (n - 1) as f64))
        .collect())
}

pub fn list(spec: &str) -> Result<Vec<f64>> {
    spec.split(',').map(number).collect()
}

/// `dark=100,eff=0.5,t=1` with any subset of keys; missing keys keep the
/// defaults.
pub fn detector(spec: &str) -> Result<DetectorModel> {
    let mut d = DetectorModel::default();
    for item in spec.split(',').filter(|s| !s.trim().is_empty()) {
        let (k, v) = item
            .split_once('=')
            .ok_or_else(|| anyhow!("detector field `{item}` is not key=value"))?;
        let v = number(v)?;
        match k.trim() {
            "dark" => d.dark_rate = v,
            "eff" => d.quantum_efficiency = v,
            "t" => d.integration_time = v,
            other => bail!("unknown detector field `{other}` (expected dark, eff, t)"),
        }
    }
    DetectorModel::new(d.quantum_efficiency, d.dark_rate, d.integration_time)
        .map_err(|e| anyhow!("{e}"))
}
