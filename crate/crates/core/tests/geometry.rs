use meshsplat::meshio::{load_mesh, sample_surface, save_mesh, validate_edit_pair};
use meshsplat::model::{decode_soup, encode_soup};
use meshsplat::propagate::{propagate_soup, AssociationFlag};
use meshsplat::spatial::CentroidIndex;
use meshsplat::{bench, IndexedMesh, Vec3};
use nalgebra::{Isometry3, UnitQuaternion};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use statrs::distribution::{ChiSquared, ContinuousCDF};

fn random_mesh(rng: &mut impl Rng, faces: usize) -> IndexedMesh {
    let vertices: Vec<Vec3> = (0..faces * 3)
        .map(|_| Vec3::new(rng.random(), rng.random(), rng.random()) * 10.0)
        .collect();
    let faces = (0..faces as u32)
        .map(|i| [3 * i, 3 * i + 1, 3 * i + 2])
        .collect();
    IndexedMesh::new(vertices, faces).unwrap()
}

fn linear_scan(mesh: &IndexedMesh, q: &Vec3) -> usize {
    let mut best = (usize::MAX, f64::INFINITY);
    for f in mesh.iter_faces() {
        let d = (f.centroid() - q).norm_squared();
        if d < best.1 {
            best = (f.face_id, d);
        }
    }
    best.0
}

#[test]
fn index_agrees_with_linear_scan_on_random_meshes() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for case in 0..1000 {
        let faces = rng.random_range(1..300);
        let mesh = random_mesh(&mut rng, faces);
        let index = CentroidIndex::build(&mesh).unwrap();
        for _ in 0..10 {
            let q = Vec3::new(rng.random(), rng.random(), rng.random()) * 12.0 - Vec3::repeat(1.0);
            assert_eq!(
                index.nearest(&q).unwrap().face_id,
                linear_scan(&mesh, &q),
                "case {case}"
            );
        }
    }
}

#[test]
fn grid_ties_resolve_to_lowest_id() {
    // Unit grid of centroids queried at cell corners: up to eight exact ties.
    let mut pts = Vec::new();
    for i in 0..6 {
        for j in 0..6 {
            for k in 0..6 {
                pts.push(Vec3::new(i as f64, j as f64, k as f64));
            }
        }
    }
    let index = CentroidIndex::from_centroids(pts.clone()).unwrap();
    for i in 0..5 {
        for j in 0..5 {
            for k in 0..5 {
                let q = Vec3::new(i as f64 + 0.5, j as f64 + 0.5, k as f64 + 0.5);
                let mut best = (usize::MAX, f64::INFINITY);
                for (id, p) in pts.iter().enumerate() {
                    let d = (p - q).norm_squared();
                    if d < best.1 {
                        best = (id, d);
                    }
                }
                assert_eq!(index.nearest(&q).unwrap().face_id, best.0);
            }
        }
    }
}

#[test]
fn million_face_index_builds() {
    let mesh = bench::torus(500);
    assert_eq!(mesh.face_count(), 1_000_000);
    let index = CentroidIndex::build(&mesh).unwrap();
    assert_eq!(index.len(), 1_000_000);
    let f = mesh.face(123_456).unwrap();
    assert_eq!(index.nearest(&f.centroid()).unwrap().face_id, 123_456);
}

#[test]
fn area_weighted_face_frequencies() {
    // Areas 1 and 3.
    let mesh = IndexedMesh::new(
        vec![
            Vec3::new(0.0, 0.0, 0.0),
            Vec3::new(2.0, 0.0, 0.0),
            Vec3::new(0.0, 1.0, 0.0),
            Vec3::new(5.0, 0.0, 0.0),
            Vec3::new(8.0, 0.0, 0.0),
            Vec3::new(5.0, 2.0, 0.0),
        ],
        vec![[0, 1, 2], [3, 4, 5]],
    )
    .unwrap();
    let n = 100_000;
    let samples = sample_surface(&mesh, n, 42).unwrap();
    let big = samples.iter().filter(|s| s.face_id == 1).count() as f64;
    let freq = big / n as f64;
    assert!((freq - 0.75).abs() <= 0.01, "{freq}");
    let expected = [0.25 * n as f64, 0.75 * n as f64];
    let observed = [n as f64 - big, big];
    let chi2: f64 = observed
        .iter()
        .zip(expected)
        .map(|(o, e)| (o - e) * (o - e) / e)
        .sum();
    let p = 1.0 - ChiSquared::new(1.0).unwrap().cdf(chi2);
    assert!(p > 0.001, "chi2 = {chi2}, p = {p}");
}

#[test]
fn samples_lie_on_their_faces_and_translate() {
    let mesh = bench::torus(12);
    let diag = mesh.diagonal();
    let samples = sample_surface(&mesh, 5000, 1).unwrap();
    for s in &samples {
        let f = mesh.face(s.face_id).unwrap();
        let off_plane = (s.point - f.vertices[0]).dot(&s.normal).abs();
        assert!(off_plane <= 1e-9 * diag);
        assert!((s.normal.norm() - 1.0).abs() < 1e-12);
    }
    let t = Vec3::new(3.0, -1.0, 0.5);
    let shifted = sample_surface(&mesh.map_vertices(|v| v + t), 5000, 1).unwrap();
    for (a, b) in samples.iter().zip(&shifted) {
        assert_eq!(a.face_id, b.face_id);
        assert!((a.point + t - b.point).norm() < 1e-12 * diag.max(1.0) * 10.0);
    }
}

#[test]
fn mesh_files_roundtrip() {
    let dir = tempfile::tempdir().unwrap();
    let mesh = bench::torus(7).map_vertices(|v| v * std::f64::consts::PI);
    for name in ["m.obj", "m.ply"] {
        let path = dir.path().join(name);
        save_mesh(&mesh, &path).unwrap();
        assert_eq!(load_mesh(&path).unwrap(), mesh, "{name}");
    }
    let missing = load_mesh(dir.path().join("nope.obj")).unwrap_err();
    assert_eq!(missing.class(), meshsplat::ErrorClass::Io);
}

fn scene_on(mesh: &IndexedMesh, n: usize, seed: u64) -> meshsplat::TriangleSoup {
    let spacing = (mesh.area() / n as f64).sqrt();
    encode_soup(&bench::surface_gaussians(mesh, n, 0.5 * spacing, seed).unwrap()).unwrap()
}

#[test]
fn identity_edit_is_identity() {
    let mesh = bench::torus(30);
    let soup = scene_on(&mesh, 20_000, 4);
    let index = CentroidIndex::build(&mesh).unwrap();
    let (out, report) = propagate_soup(&soup, &mesh, &mesh, &index).unwrap();
    assert_eq!(out.attributes(), soup.attributes());
    for (a, b) in out.triangles().iter().zip(soup.triangles()) {
        for (x, y) in a.vertices.iter().zip(&b.vertices) {
            assert!((x - y).abs().max() <= 1e-9);
        }
    }
    assert_eq!(report.skipped().count(), 0);
}

#[test]
fn rigid_edits_move_the_soup_rigidly() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let mesh = bench::torus(16);
    let soup = scene_on(&mesh, 3000, 8);
    let index = CentroidIndex::build(&mesh).unwrap();
    let before = decode_soup(&soup).unwrap();
    for _ in 0..10 {
        let motion = Isometry3::from_parts(
            Vec3::new(rng.random(), rng.random(), rng.random())
                .map(|c: f64| 20.0 * c - 10.0)
                .into(),
            UnitQuaternion::from_euler_angles(
                rng.random::<f64>() * 6.0,
                rng.random::<f64>() * 3.0,
                rng.random::<f64>() * 6.0,
            ),
        );
        let edited = mesh.map_vertices(|v| motion.transform_point(&(*v).into()).coords);
        let (out, report) = propagate_soup(&soup, &mesh, &edited, &index).unwrap();
        let diag = mesh.diagonal();
        for (a, b) in out.triangles().iter().zip(soup.triangles()) {
            let direct = b.transformed(&motion);
            for (x, y) in a.vertices.iter().zip(&direct.vertices) {
                assert!((x - y).norm() <= 1e-5 * diag);
            }
        }
        // Association ids equal the linear-scan ids.
        for (i, a) in report.associations.iter().enumerate().step_by(97) {
            assert_eq!(
                a.face_id,
                linear_scan(&mesh, &soup.triangles()[i].centroid())
            );
            assert_eq!(a.flag, AssociationFlag::Ok);
        }
        // Rigid edits keep the live scales.
        let after = decode_soup(&out).unwrap();
        for (g, h) in before.iter().zip(&after) {
            for k in 0..2 {
                assert!((g.scales[k] - h.scales[k]).abs() <= 1e-6 * g.scales[k]);
            }
        }
    }
}

#[test]
fn moving_one_face_moves_only_its_triangles() {
    let mesh = bench::torus(10);
    let soup = scene_on(&mesh, 2000, 2);
    let index = CentroidIndex::build(&mesh).unwrap();
    let target = 37;
    let [a, b, c] = mesh.faces()[target];
    let lift = mesh.face(target).unwrap().normal() * 0.05;
    // Lifting the face's vertices also moves the neighbours that share them.
    let edited = IndexedMesh::new(
        mesh.vertices()
            .iter()
            .enumerate()
            .map(|(i, v)| {
                if [a, b, c].contains(&(i as u32)) {
                    v + lift
                } else {
                    *v
                }
            })
            .collect(),
        mesh.faces().to_vec(),
    )
    .unwrap();
    validate_edit_pair(&mesh, &edited).unwrap();
    let moved_faces: Vec<usize> = mesh
        .iter_faces()
        .zip(edited.iter_faces())
        .filter(|(x, y)| x.vertices != y.vertices)
        .map(|(x, _)| x.face_id)
        .collect();
    let (out, _) = propagate_soup(&soup, &mesh, &edited, &index).unwrap();
    let mut moved = 0;
    for (i, (x, y)) in out.triangles().iter().zip(soup.triangles()).enumerate() {
        let face = linear_scan(&mesh, &y.centroid());
        if moved_faces.contains(&face) {
            moved += (x != y) as usize;
        } else {
            // Untouched faces map through the identity up to round-off.
            for (p, q) in x.vertices.iter().zip(&y.vertices) {
                assert!(
                    (p - q).norm() <= 1e-12,
                    "triangle {i} on untouched face {face} moved"
                );
            }
        }
    }
    assert!(moved > 0);
}

#[test]
fn propagation_is_independent_of_thread_count() {
    let mesh = bench::torus(20);
    let soup = scene_on(&mesh, 5000, 3);
    let edited = bench::twist(&mesh, 2.0);
    let run = |threads: usize| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| {
                let index = CentroidIndex::build(&mesh).unwrap();
                propagate_soup(&soup, &mesh, &edited, &index).unwrap()
            })
    };
    let (a, ra) = run(1);
    let (b, rb) = run(4);
    assert_eq!(a, b);
    assert_eq!(ra, rb);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn edit_pair_accepts_itself(seed in any::<u64>(), faces in 1usize..50) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mesh = random_mesh(&mut rng, faces);
        prop_assert!(validate_edit_pair(&mesh, &mesh).is_ok());
    }

    #[test]
    fn transforms_are_rotations(
        w in prop::array::uniform3(prop::array::uniform3(-3.0f64..3.0)),
        e in prop::array::uniform3(prop::array::uniform3(-3.0f64..3.0)),
    ) {
        use meshsplat::propagate::edit_transform;
        use meshsplat::MeshFace;
        let f = MeshFace { vertices: w.map(Vec3::from), face_id: 0 };
        let g = MeshFace { vertices: e.map(Vec3::from), face_id: 0 };
        prop_assume!(!f.is_degenerate() && !g.is_degenerate());
        let t = edit_transform(&f, &g).unwrap();
        let r = t.rotation;
        prop_assert!((r.transpose() * r - nalgebra::Matrix3::identity()).abs().max() < 1e-6);
        prop_assert!((r.determinant() - 1.0).abs() < 1e-6);
        let frame = meshsplat::FaceFrame::new(&f).unwrap();
        prop_assert!((frame.basis.transpose() * frame.basis - nalgebra::Matrix3::identity()).abs().max() < 1e-9);
    }
}
