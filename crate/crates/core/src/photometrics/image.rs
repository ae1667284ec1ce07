use std::fs;
use std::io::Write;
use std::path::Path;

use image::{ImageBuffer, Luma, Rgb};

use crate::error::{Error, Result};
use crate::meshkit::Vec3;
use crate::parallel;

/// Row-major raster of 1 or 3 channel samples with a per-pixel validity mask.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageGrid {
    width: usize,
    height: usize,
    channels: usize,
    data: Vec<f64>,
    mask: Vec<bool>,
}

impl ImageGrid {
    pub fn new(width: usize, height: usize, channels: usize) -> Self {
        assert!(channels == 1 || channels == 3, "1 or 3 channels");
        ImageGrid {
            width,
            height,
            channels,
            data: vec![0.0; width * height * channels],
            mask: vec![true; width * height],
        }
    }

    pub fn from_parts(width: usize, height: usize, channels: usize, data: Vec<f64>, mask: Vec<bool>) -> Result<Self> {
        if channels != 1 && channels != 3 {
            return Err(Error::Argument(format!("unsupported channel count {channels}")));
        }
        if data.len() != width * height * channels {
            return Err(Error::Shape {
                what: "image data",
                expected: width * height * channels,
                found: data.len(),
            });
        }
        if mask.len() != width * height {
            return Err(Error::Shape {
                what: "image mask",
                expected: width * height,
                found: mask.len(),
            });
        }
        Ok(ImageGrid {
            width,
            height,
            channels,
            data,
            mask,
        })
    }

    /// Builds an image by evaluating `f(x, y)` per pixel in parallel.
    /// `None` marks the pixel invalid (samples zero).
    pub fn from_fn<F>(width: usize, height: usize, channels: usize, f: F) -> Self
    where
        F: Fn(usize, usize) -> Option<[f64; 3]> + Sync + Send,
    {
        let px = parallel::map_range(width * height, |i| f(i % width, i / width));
        let mut img = ImageGrid::new(width, height, channels);
        for (i, p) in px.into_iter().enumerate() {
            match p {
                Some(v) => img.data[i * channels..(i + 1) * channels].copy_from_slice(&v[..channels]),
                None => img.mask[i] = false,
            }
        }
        img
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn len(&self) -> usize {
        self.width * self.height
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn mask(&self) -> &[bool] {
        &self.mask
    }

    pub fn same_shape(&self, other: &ImageGrid) -> bool {
        self.width == other.width && self.height == other.height
    }

    pub fn is_valid(&self, i: usize) -> bool {
        self.mask[i]
    }

    pub fn set_valid(&mut self, i: usize, valid: bool) {
        self.mask[i] = valid;
    }

    pub fn valid_count(&self) -> usize {
        self.mask.iter().filter(|&&m| m).count()
    }

    pub fn pixel(&self, i: usize) -> &[f64] {
        &self.data[i * self.channels..(i + 1) * self.channels]
    }

    pub fn pixel_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.channels..(i + 1) * self.channels]
    }

    pub fn at(&self, x: usize, y: usize) -> &[f64] {
        self.pixel(y * self.width + x)
    }

    /// Pixel as a 3-vector (scalar images broadcast).
    pub fn vec3(&self, i: usize) -> Vec3 {
        let p = self.pixel(i);
        if self.channels == 3 {
            Vec3::new(p[0], p[1], p[2])
        } else {
            Vec3::repeat(p[0])
        }
    }

    pub fn set_vec3(&mut self, i: usize, v: Vec3) {
        let c = self.channels;
        let p = self.pixel_mut(i);
        if c == 3 {
            p.copy_from_slice(v.as_slice());
        } else {
            p[0] = v.x;
        }
    }

    /// Channel mean per pixel.
    pub fn gray(&self, i: usize) -> f64 {
        self.pixel(i).iter().sum::<f64>() / self.channels as f64
    }

    pub fn to_gray(&self) -> ImageGrid {
        let mut g = ImageGrid::new(self.width, self.height, 1);
        for i in 0..self.len() {
            g.data[i] = self.gray(i);
        }
        g.mask.copy_from_slice(&self.mask);
        g
    }

    pub fn map<F: Fn(&[f64]) -> f64>(&self, f: F) -> ImageGrid {
        let mut out = self.clone();
        for v in out.data.chunks_mut(self.channels) {
            let r = f(v);
            v.iter_mut().for_each(|x| *x = r);
        }
        out
    }

    /// Pixel-wise `self * s`.
    pub fn scaled(&self, s: f64) -> ImageGrid {
        let mut out = self.clone();
        out.data.iter_mut().for_each(|x| *x *= s);
        out
    }

    /// Pixel-wise combination; masks are intersected.
    pub fn zip_with<F: Fn(f64, f64) -> f64>(&self, other: &ImageGrid, f: F) -> Result<ImageGrid> {
        if !self.same_shape(other) || self.channels != other.channels {
            return Err(Error::Shape {
                what: "image pixels",
                expected: self.data.len(),
                found: other.data.len(),
            });
        }
        let mut out = self.clone();
        for (a, b) in out.data.iter_mut().zip(&other.data) {
            *a = f(*a, *b);
        }
        for (m, o) in out.mask.iter_mut().zip(&other.mask) {
            *m = *m && *o;
        }
        Ok(out)
    }

    pub fn intersect_mask(&mut self, other: &[bool]) {
        for (m, o) in self.mask.iter_mut().zip(other) {
            *m = *m && *o;
        }
    }

    /// Bilinear sample at continuous pixel coordinates (integer = pixel center).
    /// Requires all four neighbours to be valid.
    pub fn sample_bilinear(&self, u: f64, v: f64) -> Option<[f64; 3]> {
        self.sample_weighted(u, v, true)
    }

    /// Bilinear sample renormalized over the valid neighbours; `None` only
    /// when none of the four is valid. Keeps points on mask borders.
    pub fn sample_bilinear_masked(&self, u: f64, v: f64) -> Option<[f64; 3]> {
        self.sample_weighted(u, v, false)
    }

    fn sample_weighted(&self, u: f64, v: f64, strict: bool) -> Option<[f64; 3]> {
        // tolerate rounding just outside the border
        const SLACK: f64 = 1e-9;
        let (wm, hm) = ((self.width - 1) as f64, (self.height - 1) as f64);
        if !(u >= -SLACK && v >= -SLACK) || u > wm + SLACK || v > hm + SLACK {
            return None;
        }
        let u = u.clamp(0.0, wm);
        let v = v.clamp(0.0, hm);
        let x0 = (u.floor() as usize).min(self.width.saturating_sub(2));
        let y0 = (v.floor() as usize).min(self.height.saturating_sub(2));
        let fx = u - x0 as f64;
        let fy = v - y0 as f64;
        let mut out = [0.0; 3];
        let mut total = 0.0;
        let mut any = false;
        for (dx, dy, w) in [
            (0, 0, (1.0 - fx) * (1.0 - fy)),
            (1, 0, fx * (1.0 - fy)),
            (0, 1, (1.0 - fx) * fy),
            (1, 1, fx * fy),
        ] {
            let (x, y) = (x0 + dx, y0 + dy);
            if x >= self.width || y >= self.height {
                continue;
            }
            let i = y * self.width + x;
            if !self.mask[i] {
                if strict && w > 0.0 {
                    return None;
                }
                continue;
            }
            any = true;
            total += w;
            let p = self.pixel(i);
            for c in 0..self.channels {
                out[c] += w * p[c];
            }
        }
        if !any {
            return None;
        }
        if !strict {
            if total <= 0.0 {
                // only zero-weight neighbours are valid: take the first one
                let i = [(0, 0), (1, 0), (0, 1), (1, 1)]
                    .iter()
                    .map(|(dx, dy)| (y0 + dy) * self.width + x0 + dx)
                    .find(|&i| i < self.mask.len() && self.mask[i])?;
                let p = self.pixel(i);
                out = [0.0; 3];
                out[..self.channels].copy_from_slice(p);
            } else {
                out.iter_mut().for_each(|o| *o /= total);
            }
        }
        if self.channels == 1 {
            out[1] = out[0];
            out[2] = out[0];
        }
        Some(out)
    }

    /// Value at the `q` quantile (0..=1) of the channel mean over valid pixels.
    pub fn gray_quantile(&self, q: f64) -> f64 {
        let mut v: Vec<f64> = (0..self.len()).filter(|&i| self.mask[i]).map(|i| self.gray(i)).collect();
        if v.is_empty() {
            return 0.0;
        }
        v.sort_by(f64::total_cmp);
        let k = ((v.len() - 1) as f64 * q.clamp(0.0, 1.0)).round() as usize;
        v[k]
    }

    /// Masked Gaussian blur (normalized convolution); invalid pixels do not contribute.
    pub fn gaussian_blur(&self, sigma: f64) -> ImageGrid {
        if sigma <= 0.0 {
            return self.clone();
        }
        let radius = (3.0 * sigma).ceil() as isize;
        let kernel: Vec<f64> = (-radius..=radius)
            .map(|k| (-(k * k) as f64 / (2.0 * sigma * sigma)).exp())
            .collect();
        let (w, h, c) = (self.width, self.height, self.channels);
        let weight: Vec<f64> = self.mask.iter().map(|&m| if m { 1.0 } else { 0.0 }).collect();
        let mut values: Vec<f64> = self
            .data
            .chunks(c)
            .zip(&weight)
            .flat_map(|(p, &wt)| p.iter().map(move |x| x * wt))
            .collect();
        let mut weights = weight;

        // planes: c data channels + 1 weight channel, blurred along x then y
        let blur_pass = |src: &[f64], stride: usize, horizontal: bool| -> Vec<f64> {
            let mut dst = vec![0.0; src.len()];
            parallel::for_each_chunk_mut(&mut dst, w * stride, |y, row| {
                for x in 0..w {
                    let mut acc = [0.0f64; 4];
                    for (ki, &kv) in kernel.iter().enumerate() {
                        let o = ki as isize - radius;
                        let (sx, sy) = if horizontal {
                            (x as isize + o, y as isize)
                        } else {
                            (x as isize, y as isize + o)
                        };
                        if sx < 0 || sy < 0 || sx >= w as isize || sy >= h as isize {
                            continue;
                        }
                        let s = (sy as usize * w + sx as usize) * stride;
                        for k in 0..stride {
                            acc[k] += kv * src[s + k];
                        }
                    }
                    row[x * stride..(x + 1) * stride].copy_from_slice(&acc[..stride]);
                }
            });
            dst
        };
        values = blur_pass(&values, c, true);
        values = blur_pass(&values, c, false);
        weights = blur_pass(&weights, 1, true);
        weights = blur_pass(&weights, 1, false);

        let mut out = self.clone();
        for i in 0..w * h {
            let wt = weights[i];
            for k in 0..c {
                out.data[i * c + k] = if wt > 1e-12 { values[i * c + k] / wt } else { 0.0 };
            }
        }
        out
    }

    /// Writes a little-endian PFM. Invalid pixels are stored as NaN.
    pub fn save_pfm(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut out = Vec::with_capacity(self.data.len() * 4 + 32);
        let tag = if self.channels == 3 { "PF" } else { "Pf" };
        write!(out, "{tag}\n{} {}\n-1.0\n", self.width, self.height).unwrap();
        for y in (0..self.height).rev() {
            for x in 0..self.width {
                let i = y * self.width + x;
                for &v in self.pixel(i) {
                    let v = if self.mask[i] { v as f32 } else { f32::NAN };
                    out.extend_from_slice(&v.to_le_bytes());
                }
            }
        }
        fs::write(path, out).map_err(|e| Error::io(path, e))
    }

    /// Reads a PFM (either endianness). Pixels with any non-finite sample are invalid.
    pub fn load_pfm(path: impl AsRef<Path>) -> Result<ImageGrid> {
        let path = path.as_ref();
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        let mut pos = 0;
        let mut token = |line: usize| -> Result<String> {
            while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
                pos += 1;
            }
            let start = pos;
            while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
                pos += 1;
            }
            if start == pos {
                return Err(Error::format(path, line, "truncated PFM header"));
            }
            Ok(String::from_utf8_lossy(&bytes[start..pos]).into_owned())
        };
        let channels = match token(1)?.as_str() {
            "PF" => 3,
            "Pf" => 1,
            other => return Err(Error::format(path, 1, format!("bad PFM magic `{other}`"))),
        };
        let width: usize = token(2)?.parse().map_err(|_| Error::format(path, 2, "bad width"))?;
        let height: usize = token(2)?.parse().map_err(|_| Error::format(path, 2, "bad height"))?;
        let scale: f64 = token(3)?.parse().map_err(|_| Error::format(path, 3, "bad scale"))?;
        let little = scale < 0.0;
        let body = &bytes[pos + 1..];
        let n = width * height * channels;
        if body.len() < n * 4 {
            return Err(Error::format(
                path,
                0,
                format!("expected {} data bytes after byte offset {}, found {}", n * 4, pos + 1, body.len()),
            ));
        }
        let mut img = ImageGrid::new(width, height, channels);
        for row in 0..height {
            let y = height - 1 - row;
            for x in 0..width {
                let i = y * width + x;
                for k in 0..channels {
                    let o = ((row * width + x) * channels + k) * 4;
                    let b: [u8; 4] = body[o..o + 4].try_into().unwrap();
                    let v = if little { f32::from_le_bytes(b) } else { f32::from_be_bytes(b) };
                    if v.is_finite() {
                        img.data[i * channels + k] = v as f64;
                    } else {
                        img.mask[i] = false;
                    }
                }
            }
        }
        for i in 0..width * height {
            if !img.mask[i] {
                img.pixel_mut(i).iter_mut().for_each(|v| *v = 0.0);
            }
        }
        Ok(img)
    }

    /// Reads an 8/16-bit PNG, decoding sRGB to linear unless `linear` is set.
    pub fn load_png(path: impl AsRef<Path>, linear: bool) -> Result<ImageGrid> {
        let path = path.as_ref();
        let dynimg = image::open(path)?;
        let decode = |v: f64| if linear { v } else { srgb_to_linear(v) };
        let (w, h) = (dynimg.width() as usize, dynimg.height() as usize);
        let is_gray = matches!(
            dynimg.color(),
            image::ColorType::L8 | image::ColorType::L16 | image::ColorType::La8 | image::ColorType::La16
        );
        if is_gray {
            let buf = dynimg.to_luma16();
            let data = buf.pixels().map(|p| decode(p.0[0] as f64 / 65535.0)).collect();
            ImageGrid::from_parts(w, h, 1, data, vec![true; w * h])
        } else {
            let buf = dynimg.to_rgb16();
            let data = buf
                .pixels()
                .flat_map(|p| p.0.map(|c| decode(c as f64 / 65535.0)))
                .collect();
            ImageGrid::from_parts(w, h, 3, data, vec![true; w * h])
        }
    }

    /// Writes a 16-bit PNG, clamped to [0, 1] and sRGB-encoded unless `linear`.
    pub fn save_png(&self, path: impl AsRef<Path>, linear: bool) -> Result<()> {
        let path = path.as_ref();
        let enc = |v: f64| {
            let v = v.clamp(0.0, 1.0);
            let v = if linear { v } else { linear_to_srgb(v) };
            (v * 65535.0).round() as u16
        };
        let (w, h) = (self.width as u32, self.height as u32);
        if self.channels == 3 {
            let buf: ImageBuffer<Rgb<u16>, Vec<u16>> =
                ImageBuffer::from_vec(w, h, self.data.iter().map(|&v| enc(v)).collect()).unwrap();
            buf.save(path)?;
        } else {
            let buf: ImageBuffer<Luma<u16>, Vec<u16>> =
                ImageBuffer::from_vec(w, h, self.data.iter().map(|&v| enc(v)).collect()).unwrap();
            buf.save(path)?;
        }
        Ok(())
    }
}

pub fn srgb_to_linear(v: f64) -> f64 {
    if v <= 0.04045 {
        v / 12.92
    } else {
        ((v + 0.055) / 1.055).powf(2.4)
    }
}

pub fn linear_to_srgb(v: f64) -> f64 {
    if v <= 0.0031308 {
        v * 12.92
    } else {
        1.055 * v.powf(1.0 / 2.4) - 0.055
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn masked_sampling_renormalizes_over_valid_neighbours() {
        let mut img = ImageGrid::from_fn(4, 4, 1, |x, _| Some([x as f64; 3]));
        img.set_valid(1 * 4 + 2, false);
        img.set_valid(2 * 4 + 2, false);
        assert!(img.sample_bilinear(1.5, 1.5).is_none());
        // only the x = 1 column is valid around (1.5, 1.5)
        assert_eq!(img.sample_bilinear_masked(1.5, 1.5).unwrap()[0], 1.0);
        assert_eq!(img.sample_bilinear_masked(0.5, 0.5), img.sample_bilinear(0.5, 0.5));
        let mut hole = ImageGrid::new(2, 2, 1);
        (0..4).for_each(|i| hole.set_valid(i, false));
        assert!(hole.sample_bilinear_masked(0.5, 0.5).is_none());
    }

    fn ramp(w: usize, h: usize) -> ImageGrid {
        ImageGrid::from_fn(w, h, 3, |x, y| {
            if x == 1 && y == 2 {
                None
            } else {
                Some([x as f64 * 0.1, y as f64 * 0.2, 0.5])
            }
        })
    }

    #[test]
    fn pfm_round_trip_preserves_mask_and_rows() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("a.pfm");
        let img = ramp(5, 4);
        img.save_pfm(&p).unwrap();
        let back = ImageGrid::load_pfm(&p).unwrap();
        assert_eq!(back.mask(), img.mask());
        for (a, b) in back.data().iter().zip(img.data()) {
            assert!((a - b).abs() < 1e-6);
        }
    }

    #[test]
    fn png_round_trip_within_quantization() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("a.png");
        let img = ImageGrid::from_fn(4, 3, 3, |x, y| Some([x as f64 / 4.0, y as f64 / 3.0, 0.25]));
        img.save_png(&p, false).unwrap();
        let back = ImageGrid::load_png(&p, false).unwrap();
        for (a, b) in back.data().iter().zip(img.data()) {
            assert!((a - b).abs() < 1e-4);
        }
    }

    #[test]
    fn bilinear_hits_pixel_centers_and_midpoints() {
        let img = ImageGrid::from_fn(3, 3, 1, |x, y| Some([(x + 10 * y) as f64; 3]));
        assert_eq!(img.sample_bilinear(1.0, 1.0).unwrap()[0], 11.0);
        assert!((img.sample_bilinear(0.5, 1.5).unwrap()[0] - 15.5).abs() < 1e-12);
        assert!(img.sample_bilinear(-0.1, 0.0).is_none());
        assert!(img.sample_bilinear(2.0, 2.0).is_some());
    }

    #[test]
    fn blur_of_constant_is_constant_and_ignores_invalid() {
        let mut img = ImageGrid::from_fn(20, 10, 1, |_, _| Some([2.0; 3]));
        img.pixel_mut(55)[0] = 1000.0;
        img.set_valid(55, false);
        let b = img.gaussian_blur(2.0);
        for i in 0..img.len() {
            assert!((b.pixel(i)[0] - 2.0).abs() < 1e-12 || i == 55);
        }
    }
}
