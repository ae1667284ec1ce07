//! Coarse-to-fine Lucas-Kanade optical flow over all image channels.
//!
//! Convention: the flow `d` at reference pixel `p` satisfies
//! `moving(p + d) ≈ reference(p)`.

use super::image::ImageGrid;
use crate::error::{Error, Result};
use crate::parallel;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FlowParams {
    pub levels: usize,
    pub window: usize,
    pub iterations: usize,
}

impl Default for FlowParams {
    fn default() -> Self {
        FlowParams {
            levels: 3,
            window: 7,
            iterations: 8,
        }
    }
}

/// Dense per-pixel displacement field.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowField {
    pub width: usize,
    pub height: usize,
    pub u: Vec<f64>,
    pub v: Vec<f64>,
}

impl FlowField {
    pub fn zeros(width: usize, height: usize) -> Self {
        FlowField {
            width,
            height,
            u: vec![0.0; width * height],
            v: vec![0.0; width * height],
        }
    }

    pub fn mean(&self) -> (f64, f64) {
        let n = self.u.len().max(1) as f64;
        (self.u.iter().sum::<f64>() / n, self.v.iter().sum::<f64>() / n)
    }

    /// Mean displacement over pixels where `mask` is set.
    pub fn mean_over(&self, mask: &[bool]) -> Option<(f64, f64)> {
        let mut s = (0.0, 0.0);
        let mut n = 0usize;
        for i in 0..self.u.len() {
            if mask[i] {
                s.0 += self.u[i];
                s.1 += self.v[i];
                n += 1;
            }
        }
        (n > 0).then(|| (s.0 / n as f64, s.1 / n as f64))
    }

    pub fn mean_magnitude(&self) -> f64 {
        let n = self.u.len().max(1) as f64;
        self.u.iter().zip(&self.v).map(|(a, b)| a.hypot(*b)).sum::<f64>() / n
    }

    pub fn max_magnitude(&self) -> f64 {
        self.u.iter().zip(&self.v).map(|(a, b)| a.hypot(*b)).fold(0.0, f64::max)
    }

    /// Bilinear lookup with edge clamping.
    pub fn sample(&self, x: f64, y: f64) -> (f64, f64) {
        (bilinear(&self.u, self.width, self.height, x, y), bilinear(&self.v, self.width, self.height, x, y))
    }

    /// Flow equivalent to warping by `first` and then by `self`:
    /// `total(p) = self(p) + first(p + self(p))`.
    pub fn compose_after(&self, first: &FlowField) -> FlowField {
        let w = self.width;
        let pairs = parallel::map_range(self.u.len(), |i| {
            let (x, y) = ((i % w) as f64, (i / w) as f64);
            let (du, dv) = (self.u[i], self.v[i]);
            let (fu, fv) = first.sample(x + du, y + dv);
            (du + fu, dv + fv)
        });
        let (u, v) = pairs.into_iter().unzip();
        FlowField {
            width: w,
            height: self.height,
            u,
            v,
        }
    }

    /// Fails when the mean displacement exceeds `fraction` of the width.
    pub fn check_divergence(&self, fraction: f64) -> Result<()> {
        let mean = self.mean_magnitude();
        let limit = fraction * self.width as f64;
        if !(mean <= limit) {
            return Err(Error::AlignmentFailure {
                mean_displacement: mean,
                limit,
            });
        }
        Ok(())
    }
}

fn bilinear(data: &[f64], w: usize, h: usize, x: f64, y: f64) -> f64 {
    let x = x.clamp(0.0, (w - 1) as f64);
    let y = y.clamp(0.0, (h - 1) as f64);
    let x0 = (x.floor() as usize).min(w.saturating_sub(2));
    let y0 = (y.floor() as usize).min(h.saturating_sub(2));
    let x1 = (x0 + 1).min(w - 1);
    let y1 = (y0 + 1).min(h - 1);
    let fx = x - x0 as f64;
    let fy = y - y0 as f64;
    let a = data[y0 * w + x0] * (1.0 - fx) + data[y0 * w + x1] * fx;
    let b = data[y1 * w + x0] * (1.0 - fx) + data[y1 * w + x1] * fx;
    a * (1.0 - fy) + b * fy
}

/// Warps `moving` into the reference frame: `out(p) = moving(p + d(p))`.
/// Pixels sampling outside the image or masked data become invalid.
pub fn warp(moving: &ImageGrid, flow: &FlowField) -> ImageGrid {
    let w = moving.width();
    ImageGrid::from_fn(w, moving.height(), moving.channels(), |x, y| {
        let i = y * w + x;
        moving.sample_bilinear(x as f64 + flow.u[i], y as f64 + flow.v[i])
    })
}

/// Planar float image used internally by the flow solver.
#[derive(Clone)]
struct Planes {
    w: usize,
    h: usize,
    ch: Vec<Vec<f64>>,
    valid: Vec<f64>,
}

impl Planes {
    fn from_grid(g: &ImageGrid) -> Self {
        let c = g.channels();
        let ch = (0..c)
            .map(|k| (0..g.len()).map(|i| g.pixel(i)[k]).collect())
            .collect();
        let valid = g.mask().iter().map(|&m| if m { 1.0 } else { 0.0 }).collect();
        Planes {
            w: g.width(),
            h: g.height(),
            ch,
            valid,
        }
    }

    fn downsample(&self) -> Planes {
        let w = self.w.div_ceil(2);
        let h = self.h.div_ceil(2);
        let ch = self
            .ch
            .iter()
            .chain(std::iter::once(&self.valid))
            .map(|p| {
                let mut out = vec![0.0; w * h];
                for y in 0..h {
                    for x in 0..w {
                        let mut s = 0.0;
                        for (dx, dy) in [(0, 0), (1, 0), (0, 1), (1, 1)] {
                            let sx = (2 * x + dx).min(self.w - 1);
                            let sy = (2 * y + dy).min(self.h - 1);
                            s += p[sy * self.w + sx];
                        }
                        out[y * w + x] = 0.25 * s;
                    }
                }
                out
            })
            .collect::<Vec<_>>();
        let mut ch = ch;
        // a coarse pixel is valid only if all four children are
        let valid = ch.pop().unwrap().into_iter().map(|v| if v > 0.999 { 1.0 } else { 0.0 }).collect();
        Planes { w, h, ch, valid }
    }
}

/// Box sum over a `(2r+1)^2` window with edge clamping, via a summed-area table.
fn box_sum(src: &[f64], w: usize, h: usize, r: usize) -> Vec<f64> {
    let mut sat = vec![0.0; (w + 1) * (h + 1)];
    for y in 0..h {
        let mut row = 0.0;
        for x in 0..w {
            row += src[y * w + x];
            sat[(y + 1) * (w + 1) + x + 1] = sat[y * (w + 1) + x + 1] + row;
        }
    }
    let mut out = vec![0.0; w * h];
    for y in 0..h {
        let y0 = y.saturating_sub(r);
        let y1 = (y + r + 1).min(h);
        for x in 0..w {
            let x0 = x.saturating_sub(r);
            let x1 = (x + r + 1).min(w);
            out[y * w + x] = sat[y1 * (w + 1) + x1] - sat[y0 * (w + 1) + x1] - sat[y1 * (w + 1) + x0]
                + sat[y0 * (w + 1) + x0];
        }
    }
    out
}

fn refine_level(reference: &Planes, moving: &Planes, flow: &mut FlowField, params: &FlowParams) {
    let (w, h) = (reference.w, reference.h);
    let n = w * h;
    let r = params.window / 2;
    for _ in 0..params.iterations {
        let weight = parallel::map_range(n, |i| {
            let (x, y) = ((i % w) as f64 + flow.u[i], (i / w) as f64 + flow.v[i]);
            let inside = x >= 0.0 && y >= 0.0 && x <= (w - 1) as f64 && y <= (h - 1) as f64;
            if inside && bilinear(&moving.valid, w, h, x, y) > 0.999 {
                reference.valid[i]
            } else {
                0.0
            }
        });
        let mut sxx = vec![0.0; n];
        let mut sxy = vec![0.0; n];
        let mut syy = vec![0.0; n];
        let mut sxt = vec![0.0; n];
        let mut syt = vec![0.0; n];
        for (rp, mp) in reference.ch.iter().zip(&moving.ch) {
            let warped = parallel::map_range(n, |i| {
                let (x, y) = ((i % w) as f64, (i / w) as f64);
                bilinear(mp, w, h, x + flow.u[i], y + flow.v[i])
            });
            // residual scale for a Cauchy weight, which keeps outliers such
            // as hue wrap-around edges from dominating the fit
            let (mut se, mut sw) = (0.0, 0.0);
            for i in 0..n {
                let e = rp[i] - warped[i];
                se += weight[i] * e * e;
                sw += weight[i];
            }
            let tau2 = 4.0 * se / sw.max(1.0) + 1e-24;
            for y in 0..h {
                for x in 0..w {
                    let i = y * w + x;
                    let xl = x.saturating_sub(1);
                    let xr = (x + 1).min(w - 1);
                    let yu = y.saturating_sub(1);
                    let yd = (y + 1).min(h - 1);
                    // gradients averaged over both frames are symmetric in the
                    // two images and converge faster than either alone
                    let gx = 0.5
                        * ((warped[y * w + xr] - warped[y * w + xl]) + (rp[y * w + xr] - rp[y * w + xl]))
                        / (xr - xl).max(1) as f64;
                    let gy = 0.5
                        * ((warped[yd * w + x] - warped[yu * w + x]) + (rp[yd * w + x] - rp[yu * w + x]))
                        / (yd - yu).max(1) as f64;
                    let e = rp[i] - warped[i];
                    let wt = weight[i] / (1.0 + e * e / tau2);
                    sxx[i] += wt * gx * gx;
                    sxy[i] += wt * gx * gy;
                    syy[i] += wt * gy * gy;
                    sxt[i] += wt * gx * e;
                    syt[i] += wt * gy * e;
                }
            }
        }
        let [sxx, sxy, syy, sxt, syt] = [sxx, sxy, syy, sxt, syt].map(|s| box_sum(&s, w, h, r));
        let mean_trace = sxx.iter().zip(&syy).map(|(a, b)| a + b).sum::<f64>() / n as f64;
        let eps = 1e-3 * mean_trace + 1e-12;
        let steps = parallel::map_range(n, |i| {
            let a = sxx[i] + eps;
            let d = syy[i] + eps;
            let b = sxy[i];
            let det = a * d - b * b;
            ((d * sxt[i] - b * syt[i]) / det, (a * syt[i] - b * sxt[i]) / det)
        });
        let mut max_step: f64 = 0.0;
        for (i, (du, dv)) in steps.into_iter().enumerate() {
            // cap per-iteration motion so textureless pixels cannot run away
            let du = du.clamp(-1.0, 1.0);
            let dv = dv.clamp(-1.0, 1.0);
            flow.u[i] += du;
            flow.v[i] += dv;
            max_step = max_step.max(du.abs()).max(dv.abs());
        }
        median_filter(&mut flow.u, w, h, 2);
        median_filter(&mut flow.v, w, h, 2);
        if max_step < 1e-4 {
            break;
        }
    }
}

/// In-place `(2r+1)^2` median filter; rejects isolated flow outliers.
fn median_filter(data: &mut [f64], w: usize, h: usize, r: usize) {
    let src = data.to_vec();
    let out = parallel::map_range(w * h, |i| {
        let (x, y) = (i % w, i / w);
        let mut win = [0.0f64; 25];
        let mut k = 0;
        for yy in y.saturating_sub(r)..(y + r + 1).min(h) {
            for xx in x.saturating_sub(r)..(x + r + 1).min(w) {
                if k < win.len() {
                    win[k] = src[yy * w + xx];
                    k += 1;
                }
            }
        }
        let win = &mut win[..k];
        win.sort_unstable_by(f64::total_cmp);
        if k % 2 == 1 {
            win[k / 2]
        } else {
            0.5 * (win[k / 2 - 1] + win[k / 2])
        }
    });
    data.copy_from_slice(&out);
}

/// Dense flow such that `moving(p + d) ≈ reference(p)`.
pub fn compute_flow(reference: &ImageGrid, moving: &ImageGrid, params: &FlowParams) -> Result<FlowField> {
    if !reference.same_shape(moving) || reference.channels() != moving.channels() {
        return Err(Error::Shape {
            what: "flow image",
            expected: reference.data().len(),
            found: moving.data().len(),
        });
    }
    let mut refs = vec![Planes::from_grid(reference)];
    let mut movs = vec![Planes::from_grid(moving)];
    for _ in 1..params.levels.max(1) {
        let (r, m) = (refs.last().unwrap(), movs.last().unwrap());
        if r.w < 8 || r.h < 8 {
            break;
        }
        let (r, m) = (r.downsample(), m.downsample());
        refs.push(r);
        movs.push(m);
    }
    let top = refs.last().unwrap();
    let mut flow = FlowField::zeros(top.w, top.h);
    for lvl in (0..refs.len()).rev() {
        let (r, m) = (&refs[lvl], &movs[lvl]);
        if flow.width != r.w {
            flow = upsample(&flow, r.w, r.h);
        }
        refine_level(r, m, &mut flow, params);
    }
    Ok(flow)
}

fn upsample(flow: &FlowField, w: usize, h: usize) -> FlowField {
    let mut out = FlowField::zeros(w, h);
    for y in 0..h {
        for x in 0..w {
            let (u, v) = flow.sample((x as f64 - 0.5) / 2.0, (y as f64 - 0.5) / 2.0);
            out.u[y * w + x] = 2.0 * u;
            out.v[y * w + x] = 2.0 * v;
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn texture(w: usize, h: usize, dx: f64, dy: f64) -> ImageGrid {
        ImageGrid::from_fn(w, h, 3, |x, y| {
            let (x, y) = (x as f64 - dx, y as f64 - dy);
            Some([
                0.5 + 0.25 * (0.21 * x).sin() * (0.17 * y).cos(),
                0.5 + 0.25 * (0.13 * x + 0.11 * y).sin(),
                0.5 + 0.2 * (0.19 * y).sin(),
            ])
        })
    }

    #[test]
    fn zero_motion_is_fixed_point() {
        let a = texture(48, 40, 0.0, 0.0);
        let f = compute_flow(&a, &a, &FlowParams::default()).unwrap();
        assert_eq!(f.max_magnitude(), 0.0);
    }

    #[test]
    fn recovers_integer_translation() {
        let reference = texture(64, 64, 0.0, 0.0);
        let moving = texture(64, 64, 3.0, 2.0);
        let f = compute_flow(&reference, &moving, &FlowParams::default()).unwrap();
        let interior: Vec<bool> = (0..64 * 64)
            .map(|i| (8..56).contains(&(i % 64)) && (8..56).contains(&(i / 64)))
            .collect();
        let (u, v) = f.mean_over(&interior).unwrap();
        assert!((u - 3.0).abs() < 0.1 && (v - 2.0).abs() < 0.1, "{u} {v}");
    }

    #[test]
    fn composition_of_translations_adds() {
        let mut a = FlowField::zeros(5, 5);
        a.u.iter_mut().for_each(|u| *u = 1.0);
        let mut b = FlowField::zeros(5, 5);
        b.v.iter_mut().for_each(|v| *v = 2.0);
        let c = b.compose_after(&a);
        assert!(c.u.iter().all(|&u| u == 1.0) && c.v.iter().all(|&v| v == 2.0));
    }

    #[test]
    fn divergence_limit() {
        let mut f = FlowField::zeros(10, 10);
        f.u.iter_mut().for_each(|u| *u = 2.0);
        assert!(matches!(f.check_divergence(0.1), Err(Error::AlignmentFailure { .. })));
        assert!(f.check_divergence(0.3).is_ok());
    }
}
