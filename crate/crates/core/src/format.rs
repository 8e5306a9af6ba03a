//! Number formatting shared by the CSV and JSON writers.

/// Significant digits kept in every emitted number.
pub const SIGNIFICANT_DIGITS: usize = 15;

/// Rounds to [`SIGNIFICANT_DIGITS`] significant digits. Non-finite values
/// and zero pass through.
pub fn round_sig(x: f64) -> f64 {
    if x == 0.0 || !x.is_finite() {
        return x;
    }
    format!("{:.*e}", SIGNIFICANT_DIGITS - 1, x).parse().unwrap_or(x)
}

/// Text form of [`round_sig`]: shortest representation that reads back to
/// the rounded value.
pub fn format_number(x: f64) -> String {
    let r = round_sig(x);
    if r.is_nan() {
        "NaN".to_string()
    } else {
        format!("{r:?}")
    }
}
