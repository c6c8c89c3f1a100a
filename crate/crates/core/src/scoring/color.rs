use super::ScoringError;

/// Hex color on the red (0.0) → yellow (0.5) → green (1.0) gradient: hue
/// `120° · score` at full saturation and value.
pub fn color_for(score01: f64) -> Result<String, ScoringError> {
    if !(0.0..=1.0).contains(&score01) {
        return Err(ScoringError::OutOfRange(score01));
    }
    let hue = 120.0 * score01;
    let (r, g) = if hue <= 60.0 { (1.0, hue / 60.0) } else { ((120.0 - hue) / 60.0, 1.0) };
    let byte = |c: f64| (c * 255.0).round() as u8;
    Ok(format!("#{:02X}{:02X}00", byte(r), byte(g)))
}

/// Hue in degrees of a `#RRGGBB` color, for colors with a zero component.
pub fn hue_of(hex: &str) -> Option<f64> {
    let v = u32::from_str_radix(hex.strip_prefix('#')?, 16).ok()?;
    let (r, g, b) = (f64::from(v >> 16 & 0xFF), f64::from(v >> 8 & 0xFF), f64::from(v & 0xFF));
    let max = r.max(g).max(b);
    let min = r.min(g).min(b);
    if max == min {
        return None;
    }
    let d = max - min;
    let h = if max == r {
        60.0 * ((g - b) / d)
    } else if max == g {
        60.0 * ((b - r) / d + 2.0)
    } else {
        60.0 * ((r - g) / d + 4.0)
    };
    Some(h.rem_euclid(360.0))
}
