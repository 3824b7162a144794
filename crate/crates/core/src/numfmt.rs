//! Fixed-precision number formatting shared by every text export.

/// Significant digits kept in every serialized number.
pub const SIGNIFICANT_DIGITS: usize = 12;

/// Rounds `x` to [`SIGNIFICANT_DIGITS`] significant digits.
pub fn round_sig(x: f64) -> f64 {
    if x == 0.0 || !x.is_finite() {
        return x;
    }
    format!("{:.*e}", SIGNIFICANT_DIGITS - 1, x)
        .parse()
        .expect("scientific notation produced by the formatter always parses")
}

/// Formats `x` with at most 12 significant digits, using the shortest decimal
/// form that reads back as the rounded value. Negative zero prints as `0`.
pub fn fmt_sig(x: f64) -> String {
    let r = round_sig(x);
    if r == 0.0 {
        "0".to_string()
    } else {
        format!("{r}")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rounds_to_twelve_digits() {
        assert_eq!(fmt_sig(std::f64::consts::SQRT_2), "1.41421356237");
        assert_eq!(fmt_sig(0.019802627296179712), "0.0198026272962");
        assert_eq!(fmt_sig(-0.0), "0");
        assert_eq!(fmt_sig(2.0), "2");
        assert_eq!(fmt_sig(1.0e-20), "0.00000000000000000001");
    }

    #[test]
    fn rounding_is_stable() {
        for &x in &[0.1, 1.0 / 3.0, 12345.678901234567, 9.99999999999951e-5] {
            let once = round_sig(x);
            assert_eq!(round_sig(once), once);
        }
    }
}
