//! Number formatting shared by the CSV and JSON writers.

/// `%.{sig}g`-style formatting: `sig` significant digits, trailing zeros
/// trimmed, exponent form for very large or small magnitudes.
pub fn fmt_sig(x: f64, sig: usize) -> String {
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return "0".into();
    }
    let sig = sig.max(1);
    let sci = format!("{:.*e}", sig - 1, x);
    let (mantissa, exp) = sci.split_once('e').expect("exponent form");
    let exp: i32 = exp.parse().expect("integer exponent");
    if exp < -5 || exp >= sig as i32 {
        format!(
            "{}e{}{:02}",
            trim(mantissa),
            if exp < 0 { '-' } else { '+' },
            exp.abs()
        )
    } else {
        let decimals = (sig as i32 - 1 - exp).max(0) as usize;
        trim(&format!("{x:.decimals$}")).to_string()
    }
}

fn trim(s: &str) -> &str {
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
        assert_eq!(fmt_sig(0.1, 12), "0.1");
        assert_eq!(fmt_sig(1.0 / 3.0, 12), "0.333333333333");
        assert_eq!(fmt_sig(2.06, 3), "2.06");
        assert_eq!(fmt_sig(123456.0, 3), "1.23e+05");
        assert_eq!(fmt_sig(1e-7, 12), "1e-07");
        assert_eq!(fmt_sig(-42.5, 12), "-42.5");
        assert_eq!(fmt_sig(100.0, 12), "100");
        assert_eq!(fmt_sig(f64::INFINITY, 12), "inf");
    }
}
