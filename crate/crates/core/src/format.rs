//! Number formatting shared by the CSV writers.

/// Formats `x` with `digits` significant digits, in the style of C's `%g`.
pub fn fmt_sig(x: f64, digits: usize) -> String {
    let digits = digits.max(1);
    if x == 0.0 {
        return "0".to_string();
    }
    if !x.is_finite() {
        return if x.is_nan() { "NaN".into() } else if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    let sci = format!("{:.*e}", digits - 1, x);
    let (mantissa, exp) = sci.split_once('e').expect("exponent marker");
    let exp: i32 = exp.parse().expect("integer exponent");
    if exp < -4 || exp >= digits as i32 {
        format!("{}e{}{:02}", strip_zeros(mantissa), if exp < 0 { '-' } else { '+' }, exp.abs())
    } else {
        let decimals = (digits as i32 - 1 - exp).max(0) as usize;
        strip_zeros(&format!("{:.*}", decimals, x)).to_string()
    }
}

fn strip_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

#[cfg(test)]
mod tests {
    use super::fmt_sig;

    #[test]
    fn matches_printf_g() {
        assert_eq!(fmt_sig(9.949874371066199, 10), "9.949874371");
        assert_eq!(fmt_sig(-1.444, 10), "-1.444");
        assert_eq!(fmt_sig(0.000123456789012, 10), "0.000123456789");
        assert_eq!(fmt_sig(1.0e-7, 10), "1e-07");
        assert_eq!(fmt_sig(12345678901.0, 10), "1.23456789e+10");
        assert_eq!(fmt_sig(100.0, 10), "100");
        assert_eq!(fmt_sig(0.0, 10), "0");
    }
}
