//! Deterministic number formatting for reports.

/// Fixed-notation rendering with 6 significant digits: `0.5 -> "0.500000"`,
/// `12.5 -> "12.5000"`, `1234567 -> "1234570"`. Non-finite values print as
/// `NaN`, `inf`, `-inf`.
pub fn fmt_sig(v: f64) -> String {
    const SIG: i32 = 6;
    if v.is_nan() {
        return "NaN".into();
    }
    if v.is_infinite() {
        return if v > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if v == 0.0 {
        return format!("{:.*}", (SIG - 1) as usize, 0.0);
    }
    let mut exp = v.abs().log10().floor() as i32;
    // log10 can land one off near powers of ten.
    if 10f64.powi(exp) > v.abs() {
        exp -= 1;
    } else if 10f64.powi(exp + 1) <= v.abs() {
        exp += 1;
    }
    let decimals = SIG - 1 - exp;
    let s = if decimals >= 0 {
        let s = format!("{:.*}", decimals as usize, v);
        // Rounding up can add a digit (9.999996 -> 10.00000).
        let rounded: f64 = s.parse().unwrap_or(v);
        if rounded.abs() >= 10f64.powi(exp + 1) && decimals > 0 {
            format!("{:.*}", (decimals - 1) as usize, v)
        } else {
            s
        }
    } else {
        let unit = 10f64.powi(-decimals);
        format!("{:.0}", (v / unit).round() * unit)
    };
    if s.starts_with('-') && s[1..].chars().all(|c| c == '0' || c == '.') {
        s[1..].to_string()
    } else {
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn six_significant_digits() {
        assert_eq!(fmt_sig(0.5), "0.500000");
        assert_eq!(fmt_sig(1.0), "1.00000");
        assert_eq!(fmt_sig(10.0), "10.0000");
        assert_eq!(fmt_sig(12.5), "12.5000");
        assert_eq!(fmt_sig(0.123456789), "0.123457");
        assert_eq!(fmt_sig(-0.000123456789), "-0.000123457");
        assert_eq!(fmt_sig(1234567.0), "1234570");
        assert_eq!(fmt_sig(9.999996), "10.0000");
        assert_eq!(fmt_sig(0.0), "0.00000");
        assert_eq!(fmt_sig(-0.0), "0.00000");
        assert_eq!(fmt_sig(f64::NAN), "NaN");
        assert_eq!(fmt_sig(1e-3), "0.00100000");
    }
}
