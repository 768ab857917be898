//! Number formatting shared by the CSV and JSON writers: every float is
//! rounded to 12 significant digits and printed with a `.` separator.

use serde_json::Value;

pub const SIG_DIGITS: usize = 12;

/// `x` rounded to 12 significant digits.
pub fn round_sig(x: f64) -> f64 {
    if !x.is_finite() || x == 0.0 {
        return x;
    }
    format!("{:.*e}", SIG_DIGITS - 1, x).parse().unwrap_or(x)
}

/// Plain decimal notation for moderate magnitudes, scientific otherwise.
pub fn fmt_num(x: f64) -> String {
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    let r = round_sig(x);
    let mag = r.abs();
    if r == 0.0 {
        "0".into()
    } else if (1e-4..1e15).contains(&mag) {
        format!("{r}")
    } else {
        format!("{r:e}")
    }
}

/// Rounds every float in a JSON tree; non-finite values become `null`.
pub fn round_json(v: &mut Value) {
    match v {
        Value::Number(n) if n.is_f64() => {
            let x = n.as_f64().unwrap_or(f64::NAN);
            *v = serde_json::Number::from_f64(round_sig(x)).map_or(Value::Null, Value::Number);
        }
        Value::Array(items) => items.iter_mut().for_each(round_json),
        Value::Object(map) => map.values_mut().for_each(round_json),
        _ => {}
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn twelve_digits() {
        assert_eq!(fmt_num(1.0 / 3.0), "0.333333333333");
        assert_eq!(fmt_num(30.0), "30");
        assert_eq!(fmt_num(5.561234567890123e-10), "5.56123456789e-10");
        assert_eq!(fmt_num(123456789012345.0), "123456789012000");
        assert_eq!(fmt_num(0.0), "0");
        assert_eq!(fmt_num(-2.5e20), "-2.5e20");
    }

    #[test]
    fn json_rounding() {
        let mut v = serde_json::json!({"a": 0.1 + 0.2, "b": [1, 2.0000000000001], "c": 7});
        round_json(&mut v);
        assert_eq!(v.to_string(), r#"{"a":0.3,"b":[1,2.0],"c":7}"#);
    }
}
