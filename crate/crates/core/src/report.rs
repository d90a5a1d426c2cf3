//! Number formatting shared by human-readable reports.

/// Six significant digits, trailing zeros trimmed.
pub fn sig6(v: f64) -> String {
    if v == 0.0 || !v.is_finite() {
        return format!("{v}");
    }
    let digits = 5 - v.abs().log10().floor() as i32;
    if !(0..=15).contains(&digits) {
        return format!("{v:.5e}");
    }
    let s = format!("{v:.*}", digits as usize);
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s
    }
}
