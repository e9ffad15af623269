//! Parsing of offsets and SNR grids given on the command line or in config
//! files.
//!
//! Phase offsets are written as rational multiples of pi (`pi/4`, `3pi/8`,
//! `3*pi/4`, `0`), symbol offsets as rationals of the symbol period (`1/2`,
//! `0.25`). Plain decimals are accepted for both; a decimal phase is in
//! radians.

use std::f64::consts::PI;

use crate::error::{Error, Result};

fn parse_number(s: &str, field: &'static str) -> Result<f64> {
    let s = s.trim();
    if s.is_empty() {
        return Err(Error::invalid(field, "empty value"));
    }
    match s.split_once('/') {
        Some((num, den)) => {
            let num = parse_number(num, field)?;
            let den = parse_number(den, field)?;
            if den == 0.0 {
                return Err(Error::invalid(field, format!("`{s}` divides by zero")));
            }
            Ok(num / den)
        }
        None => s
            .parse::<f64>()
            .map_err(|_| Error::invalid(field, format!("`{s}` is not a number"))),
    }
}

/// Symbol offset in symbol periods.
pub fn parse_delta(s: &str) -> Result<f64> {
    let v = parse_number(s, "delta")?;
    if !(0.0..1.0).contains(&v) {
        return Err(Error::invalid("delta", format!("`{s}` is outside [0, 1)")));
    }
    Ok(v)
}

/// Phase offset in radians.
pub fn parse_phi(s: &str) -> Result<f64> {
    let t = s.trim().to_ascii_lowercase().replace(' ', "");
    let Some(pos) = t.find("pi") else {
        return parse_number(&t, "phi");
    };
    let (head, tail) = (&t[..pos], &t[pos + 2..]);
    let head = head.strip_suffix('*').unwrap_or(head);
    let coef = match head {
        "" => 1.0,
        "-" => -1.0,
        h => parse_number(h, "phi")?,
    };
    let den = match tail {
        "" => 1.0,
        d => match d.strip_prefix('/') {
            Some(d) => parse_number(d, "phi")?,
            None => return Err(Error::invalid("phi", format!("cannot parse `{s}`"))),
        },
    };
    if den == 0.0 {
        return Err(Error::invalid("phi", format!("`{s}` divides by zero")));
    }
    Ok(coef * PI / den)
}

fn parse_ebn0_value(s: &str) -> Result<f64> {
    match s.trim().to_ascii_lowercase().as_str() {
        "inf" | "+inf" | "infinity" => Ok(f64::INFINITY),
        other => {
            let v = parse_number(other, "ebn0")?;
            if !v.is_finite() {
                return Err(Error::invalid("ebn0", format!("`{s}` is not finite")));
            }
            Ok(v)
        }
    }
}

/// Eb/N0 grid: `start:step:stop` (inclusive) or a comma-separated list.
pub fn parse_ebn0_grid(s: &str) -> Result<Vec<f64>> {
    let parts: Vec<&str> = s.split(':').collect();
    match parts.as_slice() {
        [start, step, stop] => {
            let (a, d, b) = (
                parse_ebn0_value(start)?,
                parse_ebn0_value(step)?,
                parse_ebn0_value(stop)?,
            );
            if !(a.is_finite() && d.is_finite() && b.is_finite()) || d <= 0.0 || b < a {
                return Err(Error::invalid(
                    "ebn0",
                    format!("`{s}` is not an increasing range"),
                ));
            }
            let count = ((b - a) / d + 1e-9).floor() as usize + 1;
            Ok((0..count).map(|i| a + i as f64 * d).collect())
        }
        [_] => parse_list(s, parse_ebn0_value),
        _ => Err(Error::invalid(
            "ebn0",
            format!("`{s}` is neither a list nor start:step:stop"),
        )),
    }
}

/// Comma-separated list through `item`.
pub fn parse_list(s: &str, item: fn(&str) -> Result<f64>) -> Result<Vec<f64>> {
    s.split(',')
        .filter(|t| !t.trim().is_empty())
        .map(item)
        .collect()
}
