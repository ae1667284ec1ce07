//! Illumination-invariant color image used to initialize optical flow.

use super::image::ImageGrid;

/// Saturation below which hue is undefined and set to zero.
const ACHROMATIC: f64 = 1e-4;

/// Hue of a linear RGB triple, normalized to [0, 1).
pub fn hue(rgb: [f64; 3]) -> f64 {
    let [r, g, b] = rgb;
    let max = r.max(g).max(b);
    let min = r.min(g).min(b);
    if max <= 0.0 || (max - min) / max < ACHROMATIC {
        return 0.0;
    }
    let d = max - min;
    let h = if max == r {
        ((g - b) / d).rem_euclid(6.0)
    } else if max == g {
        (b - r) / d + 2.0
    } else {
        (r - g) / d + 4.0
    };
    (h / 6.0).rem_euclid(1.0)
}

/// `1/2 (hue(I) + I / |I|)` per pixel with the hue broadcast to every
/// channel. Black pixels map to zero. Scalar images are treated as gray.
pub fn illumination_invariant(image: &ImageGrid) -> ImageGrid {
    let (w, h) = (image.width(), image.height());
    ImageGrid::from_fn(w, h, 3, |x, y| {
        let i = y * w + x;
        if !image.is_valid(i) {
            return None;
        }
        let v = image.vec3(i);
        let norm = v.norm();
        if norm <= 0.0 {
            return Some([0.0; 3]);
        }
        let hu = hue([v.x, v.y, v.z]);
        Some([0.5 * (hu + v.x / norm), 0.5 * (hu + v.y / norm), 0.5 * (hu + v.z / norm)])
    })
}
