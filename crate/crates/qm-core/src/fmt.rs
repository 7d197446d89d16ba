//! Text formatting of floating-point output.

/// Scientific notation with 17 significant digits, enough to round-trip any `f64`.
pub fn sig17(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else if x.is_nan() {
        "NaN".to_string()
    } else if x > 0.0 {
        "inf".to_string()
    } else {
        "-inf".to_string()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trips() {
        for x in [0.1, -1.0 / 3.0, 1e-300, 6.02214076e23, 0.0] {
            assert_eq!(sig17(x).parse::<f64>().unwrap(), x);
        }
        assert_eq!(sig17(f64::INFINITY), "inf");
    }
}
