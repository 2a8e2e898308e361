//! Fixed six-significant-digit number formatting for report files.

/// `x` rounded to six significant digits.
pub fn round_sig(x: f64) -> f64 {
    if !x.is_finite() || x == 0.0 {
        return x;
    }
    format!("{x:.5e}").parse().expect("formatted float parses")
}

/// Formats like C's `%g` with precision 6: fixed notation for decimal
/// exponents in [-4, 6), scientific otherwise, trailing zeros removed.
pub fn fmt_g6(x: f64) -> String {
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return "0".into();
    }
    let sci = format!("{x:.5e}");
    let (mantissa, exp) = sci.split_once('e').expect("scientific form");
    let exp: i32 = exp.parse().expect("integer exponent");
    if (-4..6).contains(&exp) {
        let decimals = (5 - exp).max(0) as usize;
        trim_zeros(&format!("{x:.decimals$}"))
    } else {
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{}e{sign}{:02}", trim_zeros(mantissa), exp.abs())
    }
}

fn trim_zeros(s: &str) -> String {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s.to_string()
    }
}

/// `fmt_g6` for present values, empty for missing ones.
pub fn fmt_opt(x: Option<f64>) -> String {
    x.map(fmt_g6).unwrap_or_default()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matches_printf_g() {
        let cases = [
            (0.0, "0"),
            (1.0, "1"),
            (2620.0, "2620"),
            (1177.410022515475, "1177.41"),
            (0.1, "0.1"),
            (-0.0909090909, "-0.0909091"),
            (123456.7, "123457"),
            (1234567.0, "1.23457e+06"),
            (0.0000123456789, "1.23457e-05"),
            (0.000123456789, "0.000123457"),
            (999999.5, "1e+06"),
            (1e100, "1e+100"),
        ];
        for (x, want) in cases {
            assert_eq!(fmt_g6(x), want, "{x}");
        }
    }

    #[test]
    fn rounding_is_idempotent() {
        for x in [1.0 / 3.0, 2.0f64.sqrt() * 1e7, -7.77777777e-9] {
            assert_eq!(round_sig(round_sig(x)), round_sig(x));
            assert_eq!(fmt_g6(round_sig(x)), fmt_g6(x));
        }
    }
}
