//! Diverging colormap interpolated in Msh space (the polar form of CIELAB),
//! giving a perceptually smooth blue-white-red ramp. Endpoints run through
//! sRGB -> linear RGB -> XYZ (D65) -> CIELAB -> Msh; the midpoint is
//! unsaturated white (M = 88, s = 0) and hue is spun toward the midpoint
//! when the endpoint hues differ.

use super::PlotDocError;

/// Default colormap id.
pub const COOLWARM: &str = "coolwarm-diverging";

/// Low endpoint (t = 0), a saturated cool blue.
pub const LOW_SRGB: [f64; 3] = [0.230, 0.299, 0.754];
/// High endpoint (t = 1), a saturated warm red.
pub const HIGH_SRGB: [f64; 3] = [0.706, 0.016, 0.150];

/// Midpoint magnitude for the unsaturated white.
const MID_M: f64 = 88.0;

// D65 reference white.
const WHITE: [f64; 3] = [0.95047, 1.0, 1.08883];

fn srgb_to_linear(c: f64) -> f64 {
    if c <= 0.04045 {
        c / 12.92
    } else {
        ((c + 0.055) / 1.055).powf(2.4)
    }
}

fn linear_to_srgb(c: f64) -> f64 {
    if c <= 0.0031308 {
        12.92 * c
    } else {
        1.055 * c.powf(1.0 / 2.4) - 0.055
    }
}

fn srgb_to_xyz(rgb: [f64; 3]) -> [f64; 3] {
    let r = srgb_to_linear(rgb[0]);
    let g = srgb_to_linear(rgb[1]);
    let b = srgb_to_linear(rgb[2]);
    [
        0.4124564 * r + 0.3575761 * g + 0.1804375 * b,
        0.2126729 * r + 0.7151522 * g + 0.0721750 * b,
        0.0193339 * r + 0.1191920 * g + 0.9503041 * b,
    ]
}

fn xyz_to_srgb(xyz: [f64; 3]) -> [f64; 3] {
    let [x, y, z] = xyz;
    let r = 3.2404542 * x - 1.5371385 * y - 0.4985314 * z;
    let g = -0.9692660 * x + 1.8760108 * y + 0.0415560 * z;
    let b = 0.0556434 * x - 0.2040259 * y + 1.0572252 * z;
    [linear_to_srgb(r), linear_to_srgb(g), linear_to_srgb(b)]
}

fn lab_f(t: f64) -> f64 {
    const DELTA: f64 = 6.0 / 29.0;
    if t > DELTA * DELTA * DELTA {
        t.cbrt()
    } else {
        t / (3.0 * DELTA * DELTA) + 4.0 / 29.0
    }
}

fn lab_f_inv(t: f64) -> f64 {
    const DELTA: f64 = 6.0 / 29.0;
    if t > DELTA {
        t * t * t
    } else {
        3.0 * DELTA * DELTA * (t - 4.0 / 29.0)
    }
}

fn xyz_to_lab(xyz: [f64; 3]) -> [f64; 3] {
    let fx = lab_f(xyz[0] / WHITE[0]);
    let fy = lab_f(xyz[1] / WHITE[1]);
    let fz = lab_f(xyz[2] / WHITE[2]);
    [116.0 * fy - 16.0, 500.0 * (fx - fy), 200.0 * (fy - fz)]
}

fn lab_to_xyz(lab: [f64; 3]) -> [f64; 3] {
    let fy = (lab[0] + 16.0) / 116.0;
    let fx = fy + lab[1] / 500.0;
    let fz = fy - lab[2] / 200.0;
    [
        WHITE[0] * lab_f_inv(fx),
        WHITE[1] * lab_f_inv(fy),
        WHITE[2] * lab_f_inv(fz),
    ]
}

fn lab_to_msh(lab: [f64; 3]) -> [f64; 3] {
    let m = (lab[0] * lab[0] + lab[1] * lab[1] + lab[2] * lab[2]).sqrt();
    let s = if m > 0.0 { (lab[0] / m).acos() } else { 0.0 };
    let h = lab[2].atan2(lab[1]);
    [m, s, h]
}

fn msh_to_lab(msh: [f64; 3]) -> [f64; 3] {
    let [m, s, h] = msh;
    [m * s.cos(), m * s.sin() * h.cos(), m * s.sin() * h.sin()]
}

fn srgb_to_msh(rgb: [f64; 3]) -> [f64; 3] {
    lab_to_msh(xyz_to_lab(srgb_to_xyz(rgb)))
}

fn msh_to_srgb(msh: [f64; 3]) -> [f64; 3] {
    let rgb = xyz_to_srgb(lab_to_xyz(msh_to_lab(msh)));
    [
        rgb[0].clamp(0.0, 1.0),
        rgb[1].clamp(0.0, 1.0),
        rgb[2].clamp(0.0, 1.0),
    ]
}

fn angle_diff(a: f64, b: f64) -> f64 {
    let d = (a - b).abs() % (2.0 * std::f64::consts::PI);
    d.min(2.0 * std::f64::consts::PI - d)
}

/// Hue an unsaturated color of magnitude `m_unsat` should take so that the
/// path from the saturated point spins through it smoothly.
fn adjust_hue(sat: [f64; 3], m_unsat: f64) -> f64 {
    let [m, s, h] = sat;
    if m >= m_unsat {
        return h;
    }
    let spin = s * (m_unsat * m_unsat - m * m).sqrt() / (m * s.sin());
    if h > -std::f64::consts::PI / 3.0 {
        h + spin
    } else {
        h - spin
    }
}

fn interpolate_msh(low: [f64; 3], high: [f64; 3], mut t: f64) -> [f64; 3] {
    let mut a = low;
    let mut b = high;
    // Saturated endpoints with distant hues pass through white; each half
    // is its own segment.
    if a[1] > 0.05 && b[1] > 0.05 && angle_diff(a[2], b[2]) > std::f64::consts::PI / 3.0 {
        let mid_m = a[0].max(b[0]).max(MID_M);
        if t < 0.5 {
            b = [mid_m, 0.0, 0.0];
            t *= 2.0;
        } else {
            a = [mid_m, 0.0, 0.0];
            t = 2.0 * t - 1.0;
        }
    }
    if a[1] < 0.05 && b[1] > 0.05 {
        a[2] = adjust_hue(b, a[0]);
    } else if b[1] < 0.05 && a[1] > 0.05 {
        b[2] = adjust_hue(a, b[0]);
    }
    [
        (1.0 - t) * a[0] + t * b[0],
        (1.0 - t) * a[1] + t * b[1],
        (1.0 - t) * a[2] + t * b[2],
    ]
}

/// Evaluates a colormap at `t` in [0, 1]; returns sRGB components in [0, 1].
pub fn colormap_eval(colormap_id: &str, t: f64) -> Result<[f64; 3], PlotDocError> {
    if !(0.0..=1.0).contains(&t) {
        return Err(PlotDocError::Domain(format!(
            "colormap parameter {t} outside [0, 1]"
        )));
    }
    match colormap_id {
        COOLWARM => {
            let low = srgb_to_msh(LOW_SRGB);
            let high = srgb_to_msh(HIGH_SRGB);
            Ok(msh_to_srgb(interpolate_msh(low, high, t)))
        }
        other => Err(PlotDocError::UnknownColormap(other.to_string())),
    }
}

/// Hex form "#rrggbb" of a colormap sample; the renderer's only color path.
pub fn colormap_hex(colormap_id: &str, t: f64) -> Result<String, PlotDocError> {
    let [r, g, b] = colormap_eval(colormap_id, t)?;
    let q = |c: f64| (c * 255.0).round() as u8;
    Ok(format!("#{:02x}{:02x}{:02x}", q(r), q(g), q(b)))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn endpoints_round_trip() {
        let low = colormap_eval(COOLWARM, 0.0).unwrap();
        let high = colormap_eval(COOLWARM, 1.0).unwrap();
        for i in 0..3 {
            assert!((low[i] - LOW_SRGB[i]).abs() < 1.0 / 255.0, "{low:?}");
            assert!((high[i] - HIGH_SRGB[i]).abs() < 1.0 / 255.0, "{high:?}");
        }
    }

    #[test]
    fn midpoint_is_unsaturated() {
        // At t = 0.5 the interpolated point is the white midpoint with s = 0
        // exactly by construction; its sRGB is a near-white gray.
        let mid = colormap_eval(COOLWARM, 0.5).unwrap();
        assert!((mid[0] - mid[1]).abs() < 0.02 && (mid[1] - mid[2]).abs() < 0.02, "{mid:?}");
        assert!(mid[0] > 0.8, "{mid:?}");
    }

    #[test]
    fn rejects_bad_input() {
        assert!(colormap_eval(COOLWARM, 1.5).is_err());
        assert!(colormap_eval("nope", 0.5).is_err());
    }

    #[test]
    fn continuity_under_two_percent_per_step() {
        let mut prev = colormap_eval(COOLWARM, 0.0).unwrap();
        for i in 1..=1024 {
            let t = i as f64 / 1024.0;
            let cur = colormap_eval(COOLWARM, t).unwrap();
            for c in 0..3 {
                assert!(
                    (cur[c] - prev[c]).abs() < 0.02,
                    "jump at t={t}: {prev:?} -> {cur:?}"
                );
            }
            prev = cur;
        }
    }
}
