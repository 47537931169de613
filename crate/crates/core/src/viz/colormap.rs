use super::image::RgbImage;
use crate::error::{Error, Result};
use crate::explain::Heatmap;

pub const DEFAULT_OVERLAY_ALPHA: f64 = 0.4;

fn channel(v: f64) -> u8 {
    (255.0 * v.clamp(0.0, 1.0)).round() as u8
}

/// Blue at 0, green at 0.5, red at 1, linear in between.
pub fn colorize_value(v: f64) -> [u8; 3] {
    let t = 2.0 * v - 1.0;
    [channel(t), channel(1.0 - t.abs()), channel(-t)]
}

pub fn colorize(map: &Heatmap) -> Result<RgbImage> {
    if !map.is_normalized() {
        return Err(Error::InvalidArgument(format!("{} heatmap must be normalized before colorizing", map.method())));
    }
    let pixels = map.values().iter().flat_map(|&v| colorize_value(v)).collect();
    RgbImage::new(map.height(), map.width(), pixels)
}

/// Per-channel `round((1 - alpha) * base + alpha * heat)`.
pub fn superimpose(base: &RgbImage, heat: &RgbImage, alpha: f64) -> Result<RgbImage> {
    if (base.height(), base.width()) != (heat.height(), heat.width()) {
        return Err(Error::shape(
            "superimpose",
            format!("base {}x{} vs heat {}x{}", base.height(), base.width(), heat.height(), heat.width()),
        ));
    }
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::InvalidArgument(format!("overlay alpha {alpha} must lie in [0, 1]")));
    }
    let pixels = base
        .pixels()
        .iter()
        .zip(heat.pixels())
        .map(|(&b, &h)| ((1.0 - alpha) * f64::from(b) + alpha * f64::from(h)).round() as u8)
        .collect();
    RgbImage::new(base.height(), base.width(), pixels)
}
