//! Motion compensation of a gradient sequence onto its constant image.

use super::flow::{compute_flow, warp, FlowField, FlowParams};
use super::image::ImageGrid;
use super::invariant::illumination_invariant;
use super::normals::GradientSet;
use crate::error::Result;
use crate::parallel;

/// Flows whose mean length exceeds this fraction of the width are rejected.
pub const DIVERGENCE_FRACTION: f64 = 0.1;

#[derive(Debug, Clone)]
pub struct Alignment {
    pub set: GradientSet,
    /// Total flow per condition in X, Y, Z, X̄, Ȳ, Z̄ order.
    pub flows: [FlowField; 6],
}

fn checked_flow(reference: &ImageGrid, moving: &ImageGrid, params: &FlowParams) -> Result<FlowField> {
    let f = compute_flow(reference, moving, params)?;
    f.check_divergence(DIVERGENCE_FRACTION)?;
    Ok(f)
}

/// Aligns every condition to C. Flows are initialized on the
/// illumination-invariant images, then refined with `iterations` rounds
/// of the complement constraint `X(p) ≈ C(p) - X̄(p)` per pair.
pub fn align_sequence(set: &GradientSet, iterations: usize) -> Result<Alignment> {
    align_with(set, iterations, &FlowParams::default())
}

pub fn align_with(set: &GradientSet, iterations: usize, params: &FlowParams) -> Result<Alignment> {
    let c_inv = illumination_invariant(&set.c);
    let originals = [&set.x, &set.y, &set.z, &set.xc, &set.yc, &set.zc];
    let init: Vec<Result<FlowField>> = parallel::map_slice(&originals, |g| {
        checked_flow(&c_inv, &illumination_invariant(g), params)
    });
    let mut flows: Vec<FlowField> = init.into_iter().collect::<Result<_>>()?;

    let pair_results: Vec<Result<(FlowField, FlowField)>> = parallel::map_range(3, |k| {
        let (mut fa, mut fb) = (flows[k].clone(), flows[k + 3].clone());
        let (a, b) = (originals[k], originals[k + 3]);
        for _ in 0..iterations {
            let target = set.c.zip_with(&warp(b, &fb), |c, x| c - x)?;
            let step = checked_flow(&target, &warp(a, &fa), params)?;
            fa = step.compose_after(&fa);
            let target = set.c.zip_with(&warp(a, &fa), |c, x| c - x)?;
            let step = checked_flow(&target, &warp(b, &fb), params)?;
            fb = step.compose_after(&fb);
        }
        Ok((fa, fb))
    });
    for (k, r) in pair_results.into_iter().enumerate() {
        let (fa, fb) = r?;
        fa.check_divergence(DIVERGENCE_FRACTION)?;
        fb.check_divergence(DIVERGENCE_FRACTION)?;
        flows[k] = fa;
        flows[k + 3] = fb;
    }

    let warped: Vec<ImageGrid> = parallel::map_range(6, |k| warp(originals[k], &flows[k]));
    let [x, y, z, xc, yc, zc]: [ImageGrid; 6] = warped.try_into().unwrap();
    let aligned = GradientSet::new([x, y, z, set.c.clone(), xc, yc, zc], set.polarization, set.view)?;
    Ok(Alignment {
        set: aligned,
        flows: flows.try_into().unwrap(),
    })
}

/// Warps a whole set so that its constant image lines up with `reference_c`
/// (used to register the parallel-polarized set onto the cross set).
pub fn align_to_reference(set: &GradientSet, reference_c: &ImageGrid) -> Result<(GradientSet, FlowField)> {
    let params = FlowParams::default();
    let flow = checked_flow(&illumination_invariant(reference_c), &illumination_invariant(&set.c), &params)?;
    let grids: Vec<ImageGrid> = parallel::map_slice(&set.grids(), |g| warp(g, &flow));
    let out = GradientSet::new(grids.try_into().unwrap(), set.polarization, set.view)?;
    Ok((out, flow))
}

/// Largest `|X + X̄ - C| / C` (and Y, Z pairs) over pixels valid everywhere
/// and at least `floor` times the 99th percentile of C.
pub fn complement_residual(set: &GradientSet, floor: f64, mask: Option<&[bool]>) -> f64 {
    let cmin = floor * set.c.gray_quantile(0.99);
    let mut worst: f64 = 0.0;
    for i in 0..set.c.len() {
        if !set.c.is_valid(i) || mask.is_some_and(|m| !m[i]) {
            continue;
        }
        for ch in 0..set.c.channels() {
            let c = set.c.pixel(i)[ch];
            if c <= cmin {
                continue;
            }
            for (a, b) in [(&set.x, &set.xc), (&set.y, &set.yc), (&set.z, &set.zc)] {
                worst = worst.max((a.pixel(i)[ch] + b.pixel(i)[ch] - c).abs() / c);
            }
        }
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::photometrics::normals::Polarization;

    fn textured_set(shift_x: (f64, f64)) -> GradientSet {
        let (w, h) = (64, 56);
        let albedo = |x: f64, y: f64| {
            [
                0.5 + 0.3 * (0.23 * x).sin() * (0.19 * y).cos(),
                0.5 + 0.3 * (0.15 * x + 0.12 * y).sin(),
                0.5 + 0.25 * (0.21 * y - 0.07 * x).cos(),
            ]
        };
        let shade = |x: f64, y: f64| [0.5 + 0.2 * (x / 64.0 - 0.5), 0.5 + 0.2 * (y / 56.0 - 0.5), 0.6];
        let grid = |k: usize, dx: f64, dy: f64| {
            ImageGrid::from_fn(w, h, 3, move |x, y| {
                let (x, y) = (x as f64 - dx, y as f64 - dy);
                let a = albedo(x, y);
                let s = match k {
                    0..3 => shade(x, y)[k],
                    3 => 1.0,
                    _ => 1.0 - shade(x, y)[k - 4],
                };
                Some(a.map(|v| v * s))
            })
        };
        let grids = [
            grid(0, shift_x.0, shift_x.1),
            grid(1, 0.0, 0.0),
            grid(2, 0.0, 0.0),
            grid(3, 0.0, 0.0),
            grid(4, 0.0, 0.0),
            grid(5, 0.0, 0.0),
            grid(6, 0.0, 0.0),
        ];
        GradientSet::new(grids, Polarization::Cross, 0).unwrap()
    }

    #[test]
    fn aligned_input_is_untouched() {
        let set = textured_set((0.0, 0.0));
        let al = align_sequence(&set, 1).unwrap();
        for f in &al.flows {
            assert!(f.max_magnitude() < 1e-6, "{}", f.max_magnitude());
        }
    }

    #[test]
    fn shifted_gradient_is_recovered() {
        let set = textured_set((3.0, 2.0));
        let al = align_sequence(&set, 1).unwrap();
        let interior: Vec<bool> = (0..64 * 56)
            .map(|i| (8..56).contains(&(i % 64)) && (8..48).contains(&(i / 64)))
            .collect();
        let (u, v) = al.flows[0].mean_over(&interior).unwrap();
        assert!((u - 3.0).abs() < 0.25 && (v - 2.0).abs() < 0.25, "{u} {v}");
        assert!(complement_residual(&al.set, 0.05, Some(&interior)) < 0.02);
    }
}
