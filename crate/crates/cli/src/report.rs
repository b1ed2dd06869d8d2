/// Formats `v` with 4 significant digits: fixed notation for magnitudes in
/// `[1e-3, 1e5)`, scientific otherwise.
pub fn sig4(v: f64) -> String {
    if !v.is_finite() {
        return v.to_string();
    }
    if v == 0.0 {
        return "0.000".to_string();
    }
    let a = v.abs();
    if (1e-3..1e5).contains(&a) {
        // round first so 9.9996 prints as 10.00, not 9.9996 -> "10.000"
        let mag = format!("{a:.3e}");
        let exp: i32 = mag.split('e').nth(1).and_then(|e| e.parse().ok()).unwrap_or(0);
        let decimals = (3 - exp).max(0) as usize;
        if exp < 5 {
            return format!("{v:.decimals$}");
        }
    }
    format!("{v:.3e}")
}

#[cfg(test)]
mod tests {
    use super::sig4;

    #[test]
    fn four_significant_digits() {
        assert_eq!(sig4(0.780034), "0.7800");
        assert_eq!(sig4(7.0973), "7.097");
        assert_eq!(sig4(17.714), "17.71");
        assert_eq!(sig4(-5.3601), "-5.360");
        assert_eq!(sig4(9.99996), "10.00");
        assert_eq!(sig4(30.0), "30.00");
        assert_eq!(sig4(0.0), "0.000");
        assert_eq!(sig4(1.5e-5), "1.500e-5");
        assert_eq!(sig4(123456.0), "1.235e5");
        assert_eq!(sig4(99999.9), "1.000e5");
    }
}
