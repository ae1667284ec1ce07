//! Acceptance suite. Prints one PASS/FAIL line per criterion. A criterion
//! that panics always fails the run; a measured FAIL only does so with
//! `ACCEPTANCE_STRICT=1`, so known shortfalls stay visible without breaking
//! `cargo test`.

use std::collections::BTreeSet;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use facefuse::linalg::CsrMatrix;
use facefuse::meshkit::{
    assemble_from_gradients, divergence_with, gradient, hat_gradients, shapes, MeshGraph, TriangleMesh, Vec3,
};
use facefuse::patchwork::{farthest_point_sample, grow_overlaps, segment, voronoi_segment, Segmentation};
use facefuse::photometrics::bias::field_correlation;
use facefuse::photometrics::normals::{angle_deg, reflect};
use facefuse::photometrics::{
    align_sequence, bias_correct, complement_normals, complement_residual, default_sigma_low, high_pass,
    lambertian_normals, mean_angular_error, specular_normals, Camera, GradientSet, ImageGrid, Polarization,
};
use facefuse::pipeline::{run_pipeline, write_dataset, PipelineConfig, SceneKind, CONFIG_FILE, REPORT_FILE};
use facefuse::poissonstitch::{
    fresnel_safe_check, laplacian_normals, patch_texture, refine_mesh_iterated, sample_views, select_patch_views,
    solve_screened_poisson, stitch_texture, ScreenedPoisson, ViewInput, ViewObservation, DEFAULT_REFINE_ROUNDS,
};
use facefuse::synthstage::{
    make_test_head, render_gradient_set, render_ground_truth, shift_image, Albedo, LightMode, LightRig, Material,
    Reflectance, Scene, Surface, TestHead, DEFAULT_HEAD_RESOLUTION,
};

type Outcome = (bool, String);

fn frontal(dist: f64, size: usize, half_extent: f64) -> Camera {
    let focal = (size as f64 / 2.0) / (half_extent / dist);
    Camera::look_at(Vec3::new(0.0, 0.0, dist), Vec3::zeros(), Vec3::y(), focal, size, size)
}

fn unit_sphere(material: Material) -> Scene {
    Scene::new(
        Surface::Sphere {
            center: Vec3::zeros(),
            radius: 1.0,
        },
        material,
    )
    .unwrap()
}

/// Closed-form ray/sphere hit for a camera on +z looking at a unit sphere
/// at the origin, worked entirely in the camera frame. Returns the hit
/// point and normal, camera space.
fn sphere_hit(cam: &Camera, dist: f64, x: usize, y: usize) -> Option<(Vec3, Vec3)> {
    let d = Vec3::new((x as f64 - cam.cx) / cam.fx, -(y as f64 - cam.cy) / cam.fy, -1.0).normalize();
    let c = Vec3::new(0.0, 0.0, -dist);
    let b = d.dot(&c);
    let disc = b * b - c.norm_squared() + 1.0;
    if disc < 0.0 {
        return None;
    }
    let p = d * (b - disc.sqrt());
    Some((p, p - c))
}

fn sphere_oracle(cam: &Camera, dist: f64) -> ImageGrid {
    ImageGrid::from_fn(cam.width, cam.height, 3, |x, y| {
        sphere_hit(cam, dist, x, y).map(|(_, n)| [n.x, n.y, n.z])
    })
}

fn erode(mask: &[bool], w: usize, h: usize, r: usize) -> Vec<bool> {
    let r = r as i64;
    (0..w * h)
        .map(|i| {
            let (x, y) = ((i % w) as i64, (i / w) as i64);
            (-r..=r).all(|dy| {
                (-r..=r).all(|dx| {
                    let (sx, sy) = (x + dx, y + dy);
                    sx >= 0 && sy >= 0 && sx < w as i64 && sy < h as i64 && mask[(sy * w as i64 + sx) as usize]
                })
            })
        })
        .collect()
}

fn jittered(mesh: &TriangleMesh, amp: f64, seed: u64) -> TriangleMesh {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let v = mesh
        .vertices()
        .iter()
        .map(|p| p + Vec3::new(rng.random_range(-amp..=amp), rng.random_range(-amp..=amp), rng.random_range(-amp..=amp)))
        .collect();
    mesh.with_vertices(v).unwrap()
}

fn pearson(xs: &[f64], ys: &[f64]) -> f64 {
    facefuse::photometrics::bias::pearson(xs, ys)
}

// 1. Lambertian and complement inversion on a continuous-gradient sphere.
fn c1_lambertian_inversion() -> Outcome {
    let t0 = Instant::now();
    let dist = 5.0;
    let cam = frontal(dist, 512, 1.2);
    let scene = unit_sphere(Material::default());
    let (cross, _) = render_gradient_set(&scene, &cam, &LightRig::continuous(), Reflectance::Lambertian).unwrap();
    let (lam, _) = lambertian_normals(&cross).unwrap();
    let comp = complement_normals(&cross).unwrap();
    let secs = t0.elapsed().as_secs_f64();
    let oracle = sphere_oracle(&cam, dist);
    let e_lam = mean_angular_error(&lam, &oracle).unwrap();
    let e_comp = mean_angular_error(&comp, &oracle).unwrap();
    (
        e_lam < 0.1 && e_comp < 0.1 && secs < 10.0 && lam.valid_count() > 100_000,
        format!("lambertian {e_lam:.2e} deg, complement {e_comp:.2e} deg over {} px, {secs:.2} s", lam.valid_count()),
    )
}

// 2. Specular inversion on a mirror sphere.
fn c2_specular_inversion() -> Outcome {
    let dist = 1000.0;
    let cam = frontal(dist, 256, 1.2);
    let material = Material {
        albedo: Albedo::Constant([0.3; 3]),
        specular_albedo: 1.0,
        roughness: 0.1,
        ior: 1.5,
    };
    let scene = unit_sphere(material);
    let (cross, par) = render_gradient_set(&scene, &cam, &LightRig::continuous(), Reflectance::Both).unwrap();
    let est = specular_normals(&cross, &par).unwrap();
    let oracle = sphere_oracle(&cam, dist);
    let err = mean_angular_error(&est.normals, &oracle).unwrap();
    let mut worst: f64 = 0.0;
    let mut count = 0;
    for y in 0..cam.height {
        for x in 0..cam.width {
            let i = y * cam.width + x;
            let Some((p, n)) = sphere_hit(&cam, dist, x, y) else { continue };
            if !est.lobe.is_valid(i) {
                continue;
            }
            let v = (-p).normalize();
            worst = worst.max((reflect(&v, &n) - est.lobe.vec3(i)).norm());
            count += 1;
        }
    }
    (
        err < 0.2 && worst < 1e-6 && count > 10_000,
        format!("normal error {err:.4} deg, max |reflect(v,n) - u| {worst:.1e} over {count} px"),
    )
}

// 3. Complement law of forward renders and after aligning a shifted image.
fn c3_complement_law() -> Outcome {
    let material = Material {
        albedo: Albedo::Smooth {
            base: [0.6, 0.45, 0.35],
            amplitude: 0.4,
            frequency: 7.0,
        },
        specular_albedo: 0.2,
        roughness: 0.3,
        ior: 1.4,
    };
    let scene = unit_sphere(material);
    let cam = frontal(5.0, 192, 1.2);
    let mut forward: f64 = 0.0;
    for mode in [LightMode::Continuous, LightMode::Led41] {
        let (cross, par) = render_gradient_set(&scene, &cam, &LightRig::new(mode), Reflectance::Both).unwrap();
        for set in [&cross, &par] {
            for i in 0..set.c.data().len() {
                for (a, b) in [(&set.x, &set.xc), (&set.y, &set.yc), (&set.z, &set.zc)] {
                    forward = forward.max((a.data()[i] + b.data()[i] - set.c.data()[i]).abs());
                }
            }
        }
    }

    let (cross, _) = render_gradient_set(&scene, &cam, &LightRig::continuous(), Reflectance::Lambertian).unwrap();
    let mut grids = cross.clone().into_grids();
    grids[0] = shift_image(&grids[0], 3, 2);
    let shifted = GradientSet::new(grids, Polarization::Cross, 0).unwrap();
    let (w, h) = (cam.width, cam.height);
    let valid: Vec<bool> = (0..w * h).map(|i| shifted.grids().iter().all(|g| g.is_valid(i)) && cross.x.is_valid(i)).collect();
    let interior = erode(&valid, w, h, 8);
    let before = complement_residual(&shifted, 0.05, Some(&interior));
    let aligned = align_sequence(&shifted, 1).unwrap();
    let after = complement_residual(&aligned.set, 0.05, Some(&interior));
    (
        forward < 1e-9 && after < 0.02,
        format!(
            "forward max {forward:.1e}; shifted residual {:.1}% -> {:.2}% after alignment over {} px",
            100.0 * before,
            100.0 * after,
            interior.iter().filter(|&&m| m).count()
        ),
    )
}

// 4. LED discretization bias and its removal.
fn c4_discretization_bias() -> Outcome {
    let scene = Scene::new(
        Surface::Bumpy {
            center: Vec3::zeros(),
            radius: 1.0,
            amplitude: 0.03,
            frequency: 5.0,
        },
        Material {
            albedo: Albedo::Constant([0.8; 3]),
            ..Material::default()
        },
    )
    .unwrap();
    let size = 256;
    let cam = frontal(5.0, size, 1.2);
    let normals = |rig: LightRig| {
        let (cross, _) = render_gradient_set(&scene, &cam, &rig, Reflectance::Lambertian).unwrap();
        lambertian_normals(&cross).unwrap().0
    };
    let cont = normals(LightRig::continuous());
    let led = normals(LightRig::led41());
    let gt = render_ground_truth(&scene, &cam);
    let bias = mean_angular_error(&led, &cont).unwrap();
    let raw = mean_angular_error(&led, &gt.normals).unwrap();
    let sigma = default_sigma_low(size);
    let corrected = bias_correct(&led, &gt.normals, sigma).unwrap();
    let err = mean_angular_error(&corrected, &gt.normals).unwrap();
    let hp_gt = high_pass(&gt.normals, sigma);
    let corr = field_correlation(&high_pass(&corrected, sigma), &hp_gt, None);
    let corr_raw = field_correlation(&high_pass(&led, sigma), &hp_gt, None);
    (
        bias >= 0.1 && err < 0.3 && corr > 0.95,
        format!(
            "bias {bias:.3} deg (vs truth {raw:.3}); corrected {err:.3} deg; high-pass correlation {corr:.4} (uncorrected {corr_raw:.4})"
        ),
    )
}

fn all_pairs(mesh: &TriangleMesh) -> Vec<Vec<f64>> {
    let n = mesh.num_vertices();
    let mut d = vec![vec![f64::INFINITY; n]; n];
    for (i, row) in d.iter_mut().enumerate() {
        row[i] = 0.0;
    }
    let v = mesh.vertices();
    for (a, b) in mesh.edges() {
        let l = (v[a] - v[b]).norm();
        d[a][b] = d[a][b].min(l);
        d[b][a] = d[b][a].min(l);
    }
    for k in 0..n {
        for i in 0..n {
            let dik = d[i][k];
            if dik.is_infinite() {
                continue;
            }
            for j in 0..n {
                let via = dik + d[k][j];
                if via < d[i][j] {
                    d[i][j] = via;
                }
            }
        }
    }
    d
}

// 5. Farthest-point seeds, Voronoi labels and overlap growth.
fn c5_segmentation() -> Outcome {
    let ico = jittered(&shapes::icosphere(2), 0.02, 11);
    let grid = {
        let g = shapes::grid(20, 20, 0.1);
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let v = g
            .vertices()
            .iter()
            .map(|p| p + Vec3::new(rng.random_range(-0.02..0.02), rng.random_range(-0.02..0.02), rng.random_range(-0.05..0.05)))
            .collect();
        g.with_vertices(v).unwrap()
    };
    let mut mismatches = 0;
    let mut checked = 0;
    let mut monotone = true;
    let mut zero_ok = true;
    for mesh in [&ico, &grid] {
        assert!(mesh.num_vertices() <= 500);
        let d = all_pairs(mesh);
        let n = mesh.num_vertices();
        let graph = MeshGraph::from_mesh(mesh);
        for m in [1, 5, 12, 30] {
            let mut seeds = vec![0];
            let mut dmin = d[0].clone();
            while seeds.len() < m {
                let mut best = 0;
                for i in 1..n {
                    if dmin[i] > dmin[best] {
                        best = i;
                    }
                }
                seeds.push(best);
                for i in 0..n {
                    dmin[i] = dmin[i].min(d[best][i]);
                }
            }
            let fps = farthest_point_sample(&graph, m, 0).unwrap();
            mismatches += usize::from(fps != seeds);
            let seg = voronoi_segment(&graph, &fps).unwrap();
            for v in 0..n {
                let mut best = 0;
                for k in 1..fps.len() {
                    if d[fps[k]][v] < d[fps[best]][v] {
                        best = k;
                    }
                }
                mismatches += usize::from(seg.patch_of[v] != best);
            }
            checked += 1 + n;

            let grown: Vec<Segmentation> =
                [0.0, 0.1, 0.3, 0.5].iter().map(|&s| grow_overlaps(&graph, &seg, s).unwrap()).collect();
            zero_ok &= grown[0].grown() == grown[0].patches();
            for pair in grown.windows(2) {
                for (key, small) in &pair[0].overlaps {
                    let big: BTreeSet<usize> = pair[1].overlaps[key].iter().copied().collect();
                    monotone &= small.iter().all(|v| big.contains(v));
                }
                for (a, b) in pair[0].grown().iter().zip(pair[1].grown()) {
                    monotone &= a.len() <= b.len();
                }
            }
        }
    }
    (
        mismatches == 0 && monotone && zero_ok,
        format!("{mismatches} mismatches over {checked} seed lists and labels; monotone {monotone}; sigma=0 identity {zero_ok}"),
    )
}

fn dense_least_squares(a: &CsrMatrix, y: &[f64], lambda: f64, d: &[f64], xp: &[f64]) -> Vec<f64> {
    let (r, n) = (a.nrows(), a.ncols());
    let mut m = DMatrix::zeros(r + n, n);
    let mut rhs = DVector::zeros(r + n);
    for (i, j, v) in a.triplets() {
        m[(i, j)] += v;
    }
    for i in 0..r {
        rhs[i] = y[i];
    }
    for i in 0..n {
        let s = (lambda * d[i]).sqrt();
        m[(r + i, i)] = s;
        rhs[r + i] = s * xp[i];
    }
    let x = m.svd(true, true).solve(&rhs, 1e-15).unwrap();
    x.iter().copied().collect()
}

// 6. Conservative exactness and agreement with a dense oracle.
fn c6_conservative_exactness() -> Outcome {
    let lambda = 1e-6;
    let mesh = shapes::icosphere(5);
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let phi: Vec<f64> = (0..mesh.num_vertices()).map(|_| rng.random_range(-1.0..1.0)).collect();
    let grads = hat_gradients(&mesh).unwrap();
    let a = assemble_from_gradients(&mesh, &grads);
    let y = divergence_with(&mesh, &grads, &gradient(&mesh, &grads, &phi)).unwrap();
    let (x, _) = solve_screened_poisson(&a, &y, lambda, &phi).unwrap();
    let exact = x.iter().zip(&phi).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);

    let mut dense_worst: f64 = 0.0;
    let small = [jittered(&shapes::icosphere(2), 0.02, 22), shapes::grid(15, 15, 0.1)];
    for mesh in &small {
        assert!(mesh.num_vertices() <= 300);
        let n = mesh.num_vertices();
        let grads = hat_gradients(mesh).unwrap();
        let a = assemble_from_gradients(mesh, &grads);
        let field: Vec<Vec3> = (0..mesh.num_faces())
            .map(|_| Vec3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
            .collect();
        let y = divergence_with(mesh, &grads, &field).unwrap();
        let xp: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..1.0)).collect();
        let masked: Vec<f64> = (0..n).map(|i| if i % 3 == 0 { 0.0 } else { 1.0 }).collect();
        for d in [vec![1.0; n], masked] {
            let (sparse, _) = ScreenedPoisson::new(&a, lambda, Some(&d)).unwrap().solve(&y, &xp).unwrap();
            let dense = dense_least_squares(&a, &y, lambda, &d, &xp);
            let diff = sparse.iter().zip(&dense).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            dense_worst = dense_worst.max(diff);
        }
    }
    (
        exact < 1e-6 && dense_worst < 1e-6,
        format!(
            "{} vertices: max |x - phi| {exact:.1e}; dense oracle max difference {dense_worst:.1e}",
            mesh.num_vertices()
        ),
    )
}

fn head_views(head: &TestHead) -> Vec<(Camera, ImageGrid)> {
    head.photometric()
        .iter()
        .map(|rc| {
            let (cross, _) =
                render_gradient_set(&head.scene, &rc.camera, &LightRig::continuous(), Reflectance::Lambertian).unwrap();
            (rc.camera.clone(), cross.c)
        })
        .collect()
}

fn observe(mesh: &TriangleMesh, views: &[(Camera, ImageGrid)]) -> Vec<ViewObservation> {
    let inputs: Vec<ViewInput> = views
        .iter()
        .map(|(c, t)| ViewInput {
            camera: c,
            texture: t,
            normals: None,
        })
        .collect();
    sample_views(mesh, &inputs).unwrap()
}

/// Largest per-edge color gradient across and within source-view regions.
fn seam_ratio(mesh: &TriangleMesh, colors: &[Option<[f64; 3]>], labels: &[Option<usize>]) -> (f64, f64) {
    let v = mesh.vertices();
    let (mut across, mut within): (f64, f64) = (0.0, 0.0);
    for (a, b) in mesh.edges() {
        let (Some(ca), Some(cb), Some(la), Some(lb)) = (colors[a], colors[b], labels[a], labels[b]) else {
            continue;
        };
        let g = (0..3).map(|c| (ca[c] - cb[c]).abs()).fold(0.0, f64::max) / (v[a] - v[b]).norm();
        if la == lb {
            within = within.max(g);
        } else {
            across = across.max(g);
        }
    }
    (across, within)
}

// 7. Seamless stitching with one corrupted view.
fn c7_seamless_stitching() -> Outcome {
    let head = make_test_head(DEFAULT_HEAD_RESOLUTION).unwrap();
    let mut views = head_views(&head);
    let offset = 8.0 / 255.0;
    let corrupted = &mut views[1].1;
    for i in 0..corrupted.len() {
        if corrupted.is_valid(i) {
            corrupted.pixel_mut(i).iter_mut().for_each(|c| *c += offset);
        }
    }
    let mesh = &head.base_mesh;
    let seg = segment(mesh, 100, 0.3, 0).unwrap();
    let obs = observe(mesh, &views);
    let blended = stitch_texture(mesh, &seg, &obs, 1e-6).unwrap();
    let baseline = patch_texture(&seg, &blended.selection, &obs);
    let labels: Vec<Option<usize>> = (0..mesh.num_vertices())
        .map(|v| blended.selection.ranking[seg.patch_of[v]].iter().copied().find(|&k| obs[k].observed[v]))
        .collect();
    let blended_opt: Vec<Option<[f64; 3]>> =
        blended.colors.iter().zip(&labels).map(|(c, l)| l.map(|_| *c)).collect();
    let (b_across, b_within) = seam_ratio(mesh, &baseline, &labels);
    let (p_across, p_within) = seam_ratio(mesh, &blended_opt, &labels);
    let (rb, rp) = (b_across / b_within, p_across / p_within);
    let mut err = Vec::new();
    for (v, l) in labels.iter().enumerate() {
        if l.is_some() {
            let truth = head.scene.albedo_at(&mesh.vertices()[v]);
            err.extend((0..3).map(|c| blended.colors[v][c] - truth[c]));
        }
    }
    let count = err.len();
    let shift = err.iter().sum::<f64>() / count as f64;
    let rms = (err.iter().map(|e| e * e).sum::<f64>() / count as f64).sqrt();
    let rms_centered = (err.iter().map(|e| (e - shift).powi(2)).sum::<f64>() / count as f64).sqrt();
    let used: BTreeSet<usize> = labels.iter().flatten().copied().collect();
    (
        rb > 3.0 && rp <= 1.5 && rms < 2.0 / 255.0 && used.contains(&1),
        format!(
            "offset {:.1}/255 on one view: baseline seam ratio {rb:.2}, blended {rp:.2}; blended RMS {:.2}/255 over {} vertices (mean shift {:.2}/255, {:.2}/255 without it)",
            offset * 255.0,
            rms * 255.0,
            count / 3,
            shift * 255.0,
            rms_centered * 255.0
        ),
    )
}

fn radial_angle_error(mesh: &TriangleMesh) -> f64 {
    let n = mesh.vertex_normals();
    mesh.vertices().iter().zip(&n).map(|(v, n)| angle_deg(&v.normalize(), n)).sum::<f64>() / n.len() as f64
}

fn max_displacement(a: &TriangleMesh, b: &TriangleMesh) -> f64 {
    a.vertices().iter().zip(b.vertices()).map(|(p, q)| (p - q).norm()).fold(0.0, f64::max)
}

/// Subtracts a Euclidean Gaussian blur of width `sigma` over the vertices.
fn high_pass_vertices(mesh: &TriangleMesh, f: &[f64], sigma: f64) -> Vec<f64> {
    let v = mesh.vertices();
    (0..v.len())
        .map(|i| {
            let (mut acc, mut wsum) = (0.0, 0.0);
            for (j, q) in v.iter().enumerate() {
                let d2 = (v[i] - q).norm_squared();
                if d2 < 9.0 * sigma * sigma {
                    let w = (-d2 / (2.0 * sigma * sigma)).exp();
                    acc += w * f[j];
                    wsum += w;
                }
            }
            f[i] - acc / wsum
        })
        .collect()
}

// 8. Normal-guided refinement.
fn c8_refinement() -> Outcome {
    let base = shapes::icosphere(3);
    assert_eq!(base.num_vertices(), 642);
    let bbox = base.bbox_diagonal();
    let radial = |m: &TriangleMesh| -> Vec<Option<Vec3>> { m.vertices().iter().map(|v| Some(v.normalize())).collect() };
    let targets = radial(&base);
    let refined = refine_mesh_iterated(&base, &targets, None, DEFAULT_REFINE_ROUNDS).unwrap().mesh;
    let (e0, e1) = (radial_angle_error(&base), radial_angle_error(&refined));
    // Same with a noisy base, reported only.
    let noisy = jittered(&base, 0.01, 31);
    let noisy_refined = refine_mesh_iterated(&noisy, &radial(&noisy), None, DEFAULT_REFINE_ROUNDS).unwrap().mesh;
    let (j0, j1) = (radial_angle_error(&noisy), radial_angle_error(&noisy_refined));

    let bumpy = Surface::Bumpy {
        center: Vec3::zeros(),
        radius: 1.0,
        amplitude: 0.03,
        frequency: 5.0,
    };
    let smooth = shapes::icosphere(4);
    let bump_targets: Vec<Option<Vec3>> = smooth
        .vertices()
        .iter()
        .map(|w| bumpy.normal_at(&(w * bumpy.radius_along(w).unwrap())))
        .collect();
    let detailed = refine_mesh_iterated(&smooth, &bump_targets, None, DEFAULT_REFINE_ROUNDS).unwrap().mesh;
    let got: Vec<f64> = detailed.vertices().iter().zip(smooth.vertices()).map(|(p, w)| p.dot(w) - 1.0).collect();
    let truth: Vec<f64> = smooth.vertices().iter().map(|w| bumpy.radius_along(w).unwrap() - 1.0).collect();
    // The blur width sits well below the bump wavelength (2 pi / 5).
    let corr = pearson(&high_pass_vertices(&smooth, &got, 0.5), &high_pass_vertices(&smooth, &truth, 0.5));

    let own: Vec<Option<Vec3>> = laplacian_normals(&base).unwrap().into_iter().map(Some).collect();
    let fixed = max_displacement(&refine_mesh_iterated(&base, &own, None, DEFAULT_REFINE_ROUNDS).unwrap().mesh, &base);
    let pinned = max_displacement(&refine_mesh_iterated(&base, &targets, Some(1e6), DEFAULT_REFINE_ROUNDS).unwrap().mesh, &base);
    (
        e1 < 0.4 * e0 && corr > 0.8 && fixed < 1e-4 * bbox && pinned < 1e-4 * bbox,
        format!(
            "normal error {e0:.3} -> {e1:.3} deg ({:.0}%; jittered base {j0:.3} -> {j1:.3}); bump correlation {corr:.3}; self-consistent move {:.1e} bbox; pinned move {:.1e} bbox",
            100.0 * e1 / e0,
            fixed / bbox,
            pinned / bbox
        ),
    )
}

// 9. Fresnel avoidance with three poses against frontal only.
fn c9_fresnel_avoidance() -> Outcome {
    let head = make_test_head(DEFAULT_HEAD_RESOLUTION).unwrap();
    let views = head_views(&head);
    let mesh = &head.base_mesh;
    let seg = segment(mesh, 100, 0.3, 0).unwrap();
    let all = fresnel_safe_check(&select_patch_views(&seg, &observe(mesh, &views)), 60.0);
    let worst = all.angles_deg.iter().cloned().fold(0.0, f64::max);
    let front = fresnel_safe_check(&select_patch_views(&seg, &observe(mesh, &views[..1])), 60.0);
    let side = |m: usize| mesh.vertices()[seg.seeds[m]].normalize().x.abs();
    let ears: Vec<usize> = (0..seg.num_patches()).filter(|&m| side(m) > 0.9).collect();
    let ears_flagged = ears.iter().all(|m| front.flagged.contains(m));
    let only_sides = front.flagged.iter().all(|&m| side(m) > 0.5);
    (
        all.is_safe() && !ears.is_empty() && ears_flagged && only_sides,
        format!(
            "three poses: max selected angle {worst:.1} deg, {} flagged; frontal only: {} flagged, all {} ear patches among them",
            all.flagged.len(),
            front.flagged.len(),
            ears.len()
        ),
    )
}

// 10. Dataset counts, determinism and run time.
fn c10_pipeline() -> Outcome {
    let tmp = tempfile::tempdir().unwrap();
    let t0 = Instant::now();
    let mut reports = Vec::new();
    let mut summary = None;
    let mut first = 0.0;
    for k in 0..2 {
        let dir = tmp.path().join(format!("run{k}"));
        let s = write_dataset(SceneKind::Head, LightMode::Continuous, DEFAULT_HEAD_RESOLUTION, &dir).unwrap();
        let cfg = PipelineConfig::load(dir.join(CONFIG_FILE)).unwrap();
        let run = run_pipeline(&cfg).unwrap();
        if k == 0 {
            first = t0.elapsed().as_secs_f64();
        }
        reports.push((std::fs::read(cfg.output.join(REPORT_FILE)).unwrap(), run.report));
        summary = Some(s);
    }
    let s = summary.unwrap();
    let identical = reports[0].0 == reports[1].0 && reports[0].1.outputs == reports[1].1.outputs;
    let files = reports[0].1.outputs.len();
    let photometric = s.photometric_views.len();
    (
        s.cameras == 24 && photometric == 3 && identical && first < 300.0,
        format!(
            "{} cameras, {photometric} photometric, {} images; {files} artifacts hash-identical across runs: {identical}; one synth+run {first:.1} s",
            s.cameras, s.images
        ),
    )
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 10] = [
        ("lambertian and complement inversion", c1_lambertian_inversion),
        ("specular inversion", c2_specular_inversion),
        ("complement law and alignment", c3_complement_law),
        ("discretization bias removal", c4_discretization_bias),
        ("segmentation oracles", c5_segmentation),
        ("conservative exactness", c6_conservative_exactness),
        ("seamless stitching", c7_seamless_stitching),
        ("normal-guided refinement", c8_refinement),
        ("fresnel avoidance", c9_fresnel_avoidance),
        ("pipeline counts and determinism", c10_pipeline),
    ];
    let (mut failed, mut crashed) = (0, 0);
    for (k, (name, f)) in criteria.iter().enumerate() {
        let t0 = Instant::now();
        let (pass, detail) = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            crashed += 1;
            (false, format!("panicked: {msg}"))
        });
        failed += usize::from(!pass);
        println!(
            "{} criterion {:>2} {name}: {detail} [{:.1} s]",
            if pass { "PASS" } else { "FAIL" },
            k + 1,
            t0.elapsed().as_secs_f64()
        );
    }
    println!("acceptance: {} of {} criteria passed", criteria.len() - failed, criteria.len());
    let strict = std::env::var("ACCEPTANCE_STRICT").is_ok_and(|v| v == "1");
    if crashed > 0 || (strict && failed > 0) {
        std::process::exit(1);
    }
}
