//! Four-decimal fixed-point text used by every textual format in the crate
//! (kinematic descriptions, DSL actions, sequence plans).

/// Formats `x` with exactly four decimals; negative zero prints as `0.0000`.
pub fn fmt4(x: f64) -> String {
    let s = format!("{x:.4}");
    if s == "-0.0000" {
        "0.0000".to_string()
    } else {
        s
    }
}

/// The value `fmt4(x)` denotes, bit-identical to parsing that text.
pub fn quantize4(x: f64) -> f64 {
    fmt4(x).parse().unwrap_or(x)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn formatting() {
        assert_eq!(fmt4(1.0), "1.0000");
        assert_eq!(fmt4(-0.00001), "0.0000");
        assert_eq!(fmt4(-0.5), "-0.5000");
        assert_eq!(fmt4(0.43301270189), "0.4330");
    }

    #[test]
    fn quantize_matches_parse() {
        for x in [0.123456, -7.34567891, 2.5e-5, 1e-9] {
            let q = quantize4(x);
            assert_eq!(q.to_bits(), fmt4(x).parse::<f64>().unwrap().to_bits());
            assert_eq!(fmt4(q), fmt4(x));
        }
    }
}
