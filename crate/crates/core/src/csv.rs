//! Plain CSV output helpers shared by the report types.

/// Formats a float with 17 significant digits so output is byte-stable and
/// round-trips exactly.
pub fn number(v: f64) -> String {
    if v.is_nan() {
        "nan".to_string()
    } else if v.is_infinite() {
        if v > 0.0 { "inf" } else { "-inf" }.to_string()
    } else {
        format!("{:.16e}", v)
    }
}

/// Quotes a field if it contains a comma or quote.
pub fn field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seventeen_digits_round_trip() {
        for v in [0.1, 1.0 / 3.0, -2.5e-300, 1e300, 0.0] {
            let s = number(v);
            assert_eq!(s.parse::<f64>().unwrap(), v);
        }
        assert_eq!(number(1.0), "1.0000000000000000e0");
    }

    #[test]
    fn quoting() {
        assert_eq!(field("(1,0)"), "\"(1,0)\"");
        assert_eq!(field("plain"), "plain");
    }
}
