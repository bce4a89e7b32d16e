//! `visualize`: false-color renderings of the property maps.
//!
//! AoLP maps to hue with the angle doubled, so the two ends of the
//! `(-90, 90]` degree range meet at the same color and the image has no
//! artificial seam. Saturation carries validity: undefined angles render
//! white. DoLP maps to plain grayscale.

use std::path::Path;

use polar_core::error::{Error, Result};

use crate::commands::echo;
use crate::io::pnm::{write_pnm, PnmImage, PnmKind};
use crate::scene::SceneDirectory;

/// Standard sextant conversion; `h` in degrees `[0, 360)`, `s`/`v` in `[0,1]`.
fn hsv_to_rgb(h: f64, s: f64, v: f64) -> [f64; 3] {
    let c = v * s;
    let hp = h / 60.0;
    let x = c * (1.0 - (hp.rem_euclid(2.0) - 1.0).abs());
    let (r, g, b) = match hp as u32 {
        0 => (c, x, 0.0),
        1 => (x, c, 0.0),
        2 => (0.0, c, x),
        3 => (0.0, x, c),
        4 => (x, 0.0, c),
        _ => (c, 0.0, x),
    };
    let m = v - c;
    [r + m, g + m, b + m]
}

fn to_byte(v: f64) -> u16 {
    ((v * 255.0).round() as u16).min(255)
}

pub fn run(scene_path: &Path, out: &Path, seed: u64) -> Result<()> {
    let scene = SceneDirectory::open(scene_path)?;
    let state = scene.read_state()?;
    echo(
        "visualize",
        seed,
        &[("scene", scene_path.display().to_string()), ("out", out.display().to_string())],
    );
    std::fs::create_dir_all(out).map_err(|e| Error::Io(format!("{}: {e}", out.display())))?;

    let (w, h) = (state.width(), state.height());
    let mut rgb = Vec::with_capacity(3 * w * h);
    for px in 0..w * h {
        let hue = (state.aolp.data()[px].to_degrees() + 90.0) * 2.0;
        let sat = if state.valid.data()[px] { 1.0 } else { 0.0 };
        let color = hsv_to_rgb(hue.rem_euclid(360.0), sat, 1.0);
        rgb.extend(color.iter().map(|&c| to_byte(c)));
    }
    write_pnm(&out.join("aolp.ppm"), &PnmImage::new(PnmKind::Rgb, w, h, 255, rgb)?)?;

    let gray: Vec<u16> = state.dolp.data().iter().map(|&v| to_byte(v)).collect();
    write_pnm(&out.join("dolp.pgm"), &PnmImage::new(PnmKind::Gray, w, h, 255, gray)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hue_wheel_landmarks() {
        // An angle of 0 sits mid-range: hue 180, cyan.
        assert_eq!(hsv_to_rgb(180.0, 1.0, 1.0).map(to_byte), [0, 255, 255]);
        // +90 degrees wraps to hue 0, red.
        assert_eq!(hsv_to_rgb(0.0, 1.0, 1.0).map(to_byte), [255, 0, 0]);
        // Invalid pixels (saturation 0) are white.
        assert_eq!(hsv_to_rgb(123.0, 0.0, 1.0).map(to_byte), [255, 255, 255]);
    }

    #[test]
    fn grayscale_rounds_half_up() {
        assert_eq!(to_byte(0.5), 128); // 127.5 rounds up
        assert_eq!(to_byte(0.0), 0);
        assert_eq!(to_byte(1.0), 255);
    }
}
