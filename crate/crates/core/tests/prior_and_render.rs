use meshsplat::render::{render, OrthoCamera};
use meshsplat::surface_prior::{bell_opacity, finite_diff_grad, normal_loss, sdf_eval};
use meshsplat::{AnalyticSdf, Appearance, FlatGaussian, OpacityParams, ShColor, Vec3};
use nalgebra::{Isometry3, Quaternion, UnitQuaternion};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Distance from `x` to the surface of an axis-aligned box by dense search over
/// its six faces.
fn box_distance_by_search(half: Vec3, x: Vec3) -> f64 {
    let n = 200;
    let mut best = f64::INFINITY;
    for axis in 0..3 {
        for side in [-1.0, 1.0] {
            let (a, b) = ((axis + 1) % 3, (axis + 2) % 3);
            for i in 0..=n {
                for j in 0..=n {
                    let mut p = Vec3::zeros();
                    p[axis] = side * half[axis];
                    p[a] = half[a] * (2.0 * i as f64 / n as f64 - 1.0);
                    p[b] = half[b] * (2.0 * j as f64 / n as f64 - 1.0);
                    best = best.min((p - x).norm());
                }
            }
        }
    }
    best
}

#[test]
fn box_distance_matches_search() {
    let cube = AnalyticSdf::cuboid(Vec3::zeros(), Vec3::repeat(1.0));
    assert!(
        (sdf_eval(&cube, &Vec3::new(2.0, 2.0, 0.0))
            - box_distance_by_search(Vec3::repeat(1.0), Vec3::new(2.0, 2.0, 0.0)))
        .abs()
            < 1e-12
    );
    let half = Vec3::new(0.5, 1.0, 2.0);
    let b = AnalyticSdf::cuboid(Vec3::zeros(), half);
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    for _ in 0..20 {
        let x = Vec3::new(rng.random(), rng.random(), rng.random()).map(|c: f64| 6.0 * c - 3.0);
        let d = b.eval(&x);
        let searched = box_distance_by_search(half, x);
        // Grid spacing bounds the search error.
        assert!(
            (d.abs() - searched).abs() < 0.03,
            "{d} vs {searched} at {x}"
        );
        let inside = x.iter().zip(half.iter()).all(|(c, h)| c.abs() < *h);
        assert_eq!(d < 0.0, inside);
    }
}

#[test]
fn bell_value_at_log_three() {
    // exp(-ln 3) / (1 + exp(-ln 3))² = (1/3) / (4/3)² = 3/16.
    let p = OpacityParams::new(1.0).unwrap();
    assert!((bell_opacity(3f64.ln(), &p) - 3.0 / 16.0).abs() < 1e-15);
}

proptest! {
    #[test]
    fn bell_is_even_and_bounded(x in -1e6f64..1e6, beta in 1e-3f64..1e3) {
        let p = OpacityParams::new(beta).unwrap();
        let v = bell_opacity(x, &p);
        prop_assert_eq!(v, bell_opacity(-x, &p));
        prop_assert!(v.is_finite() && (0.0..=0.25).contains(&v));
    }

    #[test]
    fn normal_loss_in_unit_interval(
        n in prop::array::uniform3(-1.0f64..1.0),
        g in prop::array::uniform3(-1.0f64..1.0),
    ) {
        let n = Vec3::from(n);
        let g = Vec3::from(g);
        prop_assume!(n.norm() > 1e-3 && g.norm() > 1e-3);
        let loss = normal_loss(&n.normalize(), &g.normalize()).unwrap();
        prop_assert!((0.0..=1.0).contains(&loss));
    }
}

fn smooth_points(
    sdf: &AnalyticSdf,
    rng: &mut impl Rng,
    n: usize,
    medial: impl Fn(&Vec3) -> f64,
) -> Vec<Vec3> {
    let mut out = Vec::new();
    while out.len() < n {
        let x = Vec3::new(rng.random(), rng.random(), rng.random()).map(|c: f64| 6.0 * c - 3.0);
        if sdf.eval(&x).abs() >= 0.1 && medial(&x) >= 0.1 {
            out.push(x);
        }
    }
    out
}

#[test]
fn finite_differences_track_analytic_gradients() {
    let h = 1e-3;
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let sphere = AnalyticSdf::sphere(Vec3::new(0.2, -0.1, 0.3), 1.3);
    let half = Vec3::new(1.0, 0.7, 1.2);
    let cube = AnalyticSdf::cuboid(Vec3::zeros(), half);
    let plane = AnalyticSdf::plane(Vec3::new(1.0, 2.0, -0.5), 0.4);

    // Medial sets: sphere center; inside the box, points equidistant from two faces.
    let from_center = |x: &Vec3| (x - Vec3::new(0.2, -0.1, 0.3)).norm();
    let box_medial = |x: &Vec3| {
        let q = x.abs() - half;
        if q.max() > 0.0 {
            // Outside: kinks of the gradient sit on the planes through the box's edges.
            q.iter().map(|c| c.abs()).fold(f64::INFINITY, f64::min)
        } else {
            let mut s = [q.x, q.y, q.z];
            s.sort_by(f64::total_cmp);
            (s[2] - s[1]).abs()
        }
    };
    for (sdf, medial) in [
        (&sphere, &from_center as &dyn Fn(&Vec3) -> f64),
        (&cube, &box_medial),
        (&plane, &|_: &Vec3| f64::INFINITY),
    ] {
        for x in smooth_points(sdf, &mut rng, 1000, medial) {
            let fd = finite_diff_grad(sdf, &x, h).unwrap();
            let exact = sdf.gradient(&x);
            assert!(
                (fd - exact).abs().max() <= 10.0 * h * h,
                "{sdf:?} at {x}: {fd} vs {exact}"
            );
            assert!((fd.norm() - 1.0).abs() < 1e-4);
        }
    }
}

fn facing_gaussian(
    center: Vec3,
    scales: [f64; 2],
    opacity: f64,
    dc: [f64; 3],
    tilt: UnitQuaternion<f64>,
) -> FlatGaussian {
    FlatGaussian::new(
        center,
        tilt,
        scales,
        Appearance {
            opacity,
            color: ShColor { dc, rest: vec![] },
        },
    )
}

fn canonical_scenes() -> Vec<Vec<FlatGaussian>> {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let mut random = Vec::new();
    for _ in 0..200 {
        let q = Quaternion::new(
            rng.random(),
            rng.random(),
            rng.random(),
            rng.random::<f64>() - 0.5,
        );
        random.push(facing_gaussian(
            Vec3::new(rng.random(), rng.random(), rng.random()).map(|c: f64| 1.6 * c - 0.8),
            [rng.random_range(0.03..0.2), rng.random_range(0.03..0.2)],
            rng.random_range(0.2..0.95),
            [
                rng.random_range(-1.5..1.5),
                rng.random_range(-1.5..1.5),
                rng.random_range(-1.5..1.5),
            ],
            UnitQuaternion::from_quaternion(q),
        ));
    }
    let facing = UnitQuaternion::from_euler_angles(0.0, std::f64::consts::FRAC_PI_2, 0.0);
    vec![
        vec![facing_gaussian(
            Vec3::zeros(),
            [0.3, 0.2],
            0.9,
            [1.0, 0.0, -1.0],
            facing,
        )],
        vec![
            facing_gaussian(
                Vec3::new(0.1, 0.0, 0.5),
                [0.3, 0.3],
                0.6,
                [1.0, -1.0, 0.0],
                facing,
            ),
            facing_gaussian(
                Vec3::new(-0.1, 0.1, -0.5),
                [0.4, 0.25],
                0.7,
                [-1.0, 1.0, 0.5],
                facing,
            ),
        ],
        random,
    ]
}

fn camera() -> OrthoCamera {
    OrthoCamera::look_along(
        Vec3::new(0.0, 0.0, 5.0),
        -Vec3::z(),
        Vec3::y(),
        (2.4, 2.0),
        (96, 80),
    )
    .unwrap()
}

#[test]
fn co_transformed_renders_match() {
    let motion = Isometry3::from_parts(
        Vec3::new(3.0, -7.0, 1.5).into(),
        UnitQuaternion::from_euler_angles(0.4, -1.1, 2.3),
    );
    let cam = camera();
    for scene in canonical_scenes() {
        let a = render(&scene, &cam, [0.1, 0.1, 0.1]).unwrap();
        let moved: Vec<FlatGaussian> = scene.iter().map(|g| g.transformed(&motion)).collect();
        let b = render(&moved, &cam.transformed(&motion), [0.1, 0.1, 0.1]).unwrap();
        for (p, q) in a.pixels.iter().zip(&b.pixels) {
            for k in 0..3 {
                assert!((p[k] - q[k]).abs() <= 1.0 / 255.0);
            }
        }
        assert_eq!(a.to_bytes(), b.to_bytes());
    }
}

#[test]
fn renders_are_deterministic_across_thread_counts() {
    let cam = camera();
    for scene in canonical_scenes() {
        let images: Vec<Vec<u8>> = [1, 3, 8]
            .iter()
            .map(|&t| {
                rayon::ThreadPoolBuilder::new()
                    .num_threads(t)
                    .build()
                    .unwrap()
                    .install(|| render(&scene, &cam, [0.0; 3]).unwrap().to_bytes())
            })
            .collect();
        assert!(images.windows(2).all(|w| w[0] == w[1]));
    }
}

#[test]
fn higher_opacity_never_dims_a_single_splat() {
    let cam = camera();
    let facing = UnitQuaternion::from_euler_angles(0.0, std::f64::consts::FRAC_PI_2, 0.0);
    let mut previous: Option<Vec<[f64; 3]>> = None;
    for opacity in [0.1, 0.3, 0.5, 0.8, 1.0] {
        let g = facing_gaussian(Vec3::zeros(), [0.3, 0.2], opacity, [10.0; 3], facing);
        // White kernel over black: the pixel value is the kernel weight.
        let img = render(&[g], &cam, [0.0; 3]).unwrap();
        if let Some(prev) = &previous {
            for (a, b) in prev.iter().zip(&img.pixels) {
                assert!(b[0] >= a[0]);
            }
        }
        previous = Some(img.pixels);
    }
}
