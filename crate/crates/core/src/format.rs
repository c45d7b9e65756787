//! Number rendering shared by every serialized report.
//!
//! Probabilities are written with 17 significant digits (`%.17g`), which
//! round-trips any `f64` exactly and gives byte-stable output.

use std::str::FromStr;

use serde_json::{Number, Value};

/// C-style `%.17g` rendering.
pub fn sig17(x: f64) -> String {
    if x == 0.0 {
        return "0".to_string();
    }
    if !x.is_finite() {
        return format!("{x}");
    }
    let sci = format!("{:.16e}", x);
    let (mantissa, exp) = sci.split_once('e').expect("exponent marker");
    let exp: i32 = exp.parse().expect("exponent digits");
    if !(-4..17).contains(&exp) {
        let mantissa = strip_zeros(mantissa);
        let sign = if exp < 0 { '-' } else { '+' };
        return format!("{mantissa}e{sign}{:02}", exp.abs());
    }
    let decimals = (16 - exp) as usize;
    strip_zeros(&format!("{:.*}", decimals, x)).to_string()
}

fn strip_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

/// A JSON number that serializes with exactly the `sig17` digits.
pub fn json_number(x: f64) -> Value {
    Value::Number(Number::from_str(&sig17(x)).expect("sig17 is valid JSON"))
}

/// `p/q` with `q <= 100` when `x` is within `1e-12` of such a fraction.
pub fn as_fraction(x: f64) -> Option<(i64, i64)> {
    (1..=100i64).find_map(|q| {
        let p = (x * q as f64).round();
        ((x - p / q as f64).abs() <= 1e-12).then_some((p as i64, q))
    })
}

/// Human rendering: exact small fractions, otherwise `sig17`.
pub fn probability_text(x: f64) -> String {
    match as_fraction(x) {
        Some((p, 1)) => format!("{p}"),
        Some((p, q)) => format!("{p}/{q}"),
        None => sig17(x),
    }
}
