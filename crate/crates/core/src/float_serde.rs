//! JSON has no infinities; non-finite values travel as the strings `inf`,
//! `-inf` and `nan`.

use serde::{de, Deserialize, Deserializer, Serializer};

pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
    if v.is_finite() {
        s.serialize_f64(*v)
    } else {
        s.serialize_str(&format_float(*v))
    }
}

pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Raw {
        Num(f64),
        Text(String),
    }
    match Raw::deserialize(d)? {
        Raw::Num(v) => Ok(v),
        Raw::Text(t) => parse_float(&t).ok_or_else(|| de::Error::custom(format!("not a number: {t:?}"))),
    }
}

/// Shortest round-trip text, with `inf`, `-inf` and `nan` for the rest.
pub fn format_float(v: f64) -> String {
    if v.is_nan() {
        "nan".into()
    } else if v == f64::INFINITY {
        "inf".into()
    } else if v == f64::NEG_INFINITY {
        "-inf".into()
    } else {
        format!("{v:?}")
    }
}

pub fn parse_float(t: &str) -> Option<f64> {
    match t.trim() {
        "inf" | "+inf" => Some(f64::INFINITY),
        "-inf" => Some(f64::NEG_INFINITY),
        "nan" | "NaN" => Some(f64::NAN),
        other => other.parse().ok(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[derive(serde::Serialize, serde::Deserialize, PartialEq, Debug)]
    struct W(#[serde(with = "super")] f64);

    #[test]
    fn round_trips() {
        for v in [0.1, -3.5e-300, f64::INFINITY, f64::NEG_INFINITY, 1.0 / 3.0] {
            let s = serde_json::to_string(&W(v)).unwrap();
            assert_eq!(serde_json::from_str::<W>(&s).unwrap(), W(v), "{s}");
        }
        assert_eq!(serde_json::to_string(&W(f64::NEG_INFINITY)).unwrap(), "\"-inf\"");
        assert!(parse_float("nan").unwrap().is_nan());
        assert_eq!(format_float(0.1), "0.1");
    }
}
