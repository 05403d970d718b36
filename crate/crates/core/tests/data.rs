use nalgebra::{DMatrix, SymmetricEigen};
use qposer_core::data::{
    generate_manifold, load_poses, manifold_distance, save_poses, split, ManifoldSpec, PoseDataset, PoseFormat,
    SplitSpec, QPSE_HEADER_LEN,
};
use qposer_core::geometry::{geodesic_angle_deg, Pose, Skeleton, UnitQuaternion};
use qposer_core::rng::SplitMix64;
use qposer_core::Error;

fn desk_data(n: usize) -> PoseDataset {
    let sk = Skeleton::body21();
    generate_manifold(&ManifoldSpec::default_for(&sk, 42, 6), n, &sk).unwrap()
}

#[test]
fn generation_is_deterministic_and_valid() {
    let sk = Skeleton::body21();
    let a = desk_data(500);
    let b = desk_data(500);
    assert_eq!(a, b);
    assert_eq!(a.content_hash(), b.content_hash());
    a.validate(&sk).unwrap();
    let other = generate_manifold(&ManifoldSpec::default_for(&sk, 43, 6), 500, &sk).unwrap();
    assert_ne!(a.content_hash(), other.content_hash());
}

#[test]
fn generated_angles_stay_within_limits() {
    let sk = Skeleton::body21();
    let spec = ManifoldSpec::default_for(&sk, 7, 6);
    let ds = generate_manifold(&spec, 2000, &sk).unwrap();
    for p in &ds.poses {
        for (q, limit) in p.joints.iter().zip(&spec.joint_limit_deg) {
            assert!(q.angle().to_degrees() <= limit + 1e-9);
        }
    }
}

#[test]
fn manifold_is_low_dimensional() {
    let ds = desk_data(5000);
    let m = 6;
    let d = 84;
    let n = ds.len() as f64;
    let x: Vec<Vec<f64>> = ds.poses.iter().map(Pose::flatten).collect();
    let mut mean = vec![0.0; d];
    for row in &x {
        for (m, v) in mean.iter_mut().zip(row) {
            *m += v / n;
        }
    }
    let mut cov = DMatrix::<f64>::zeros(d, d);
    for row in &x {
        for i in 0..d {
            for j in 0..d {
                cov[(i, j)] += (row[i] - mean[i]) * (row[j] - mean[j]) / n;
            }
        }
    }
    let mut ev: Vec<f64> = SymmetricEigen::new(cov).eigenvalues.iter().copied().collect();
    ev.sort_by(|a, b| b.partial_cmp(a).unwrap());
    let total: f64 = ev.iter().sum();
    let top: f64 = ev[..3 * m].iter().sum();
    assert!(top / total >= 0.95, "captured {}", top / total);
}

#[test]
fn split_sizes_and_partition() {
    let ds = desk_data(100);
    let spec = SplitSpec {
        fractions: [0.8, 0.1, 0.1],
        seed: 9,
    };
    let (tr, va, te) = split(&ds, &spec).unwrap();
    assert_eq!((tr.len(), va.len(), te.len()), (80, 10, 10));
    assert_eq!(split(&ds, &spec).unwrap(), (tr.clone(), va.clone(), te.clone()));

    let key = |p: &Pose| p.flatten().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
    let mut all: Vec<_> = tr.poses.iter().chain(&va.poses).chain(&te.poses).map(key).collect();
    let mut orig: Vec<_> = ds.poses.iter().map(key).collect();
    all.sort();
    orig.sort();
    assert_eq!(all, orig);

    assert!(split(&ds, &SplitSpec { fractions: [0.5, 0.5, 0.5], seed: 0 }).is_err());
    assert!(split(&ds, &SplitSpec { fractions: [1.2, -0.1, -0.1], seed: 0 }).is_err());
    assert!(split(&ds.head(9), &spec).is_err());
}

#[test]
fn manifold_distance_matches_brute_force_loop() {
    let reference = desk_data(300);
    let sk = Skeleton::body21();
    let mut rng = SplitMix64::new(4);
    assert_eq!(manifold_distance(&reference.poses[17], &reference).unwrap(), 0.0);
    for _ in 0..20 {
        let joints = (0..21)
            .map(|_| UnitQuaternion::canonicalize([rng.normal(), rng.normal(), rng.normal(), rng.normal()]).unwrap())
            .collect();
        let p = Pose::new(sk.name(), joints);
        let mut best = f64::INFINITY;
        for r in &reference.poses {
            let mut total = 0.0;
            for (a, b) in p.joints.iter().zip(&r.joints) {
                total += geodesic_angle_deg(a, b);
            }
            best = best.min(total / 21.0);
        }
        assert_eq!(manifold_distance(&p, &reference).unwrap(), best);
    }
    let with_rest = PoseDataset::new(sk.name(), vec![Pose::rest(&sk)], "rest").unwrap();
    assert_eq!(manifold_distance(&Pose::rest(&sk), &with_rest).unwrap(), 0.0);
}

#[test]
fn qpse_roundtrip_within_f32_rounding() {
    let sk = Skeleton::body21();
    let ds = desk_data(10_000);
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("poses.qpse");
    save_poses(&path, &ds, PoseFormat::Binary).unwrap();
    let size = std::fs::metadata(&path).unwrap().len();
    assert_eq!(size as usize, 24 + 10_000 * 21 * 4 * 4);
    assert_eq!(QPSE_HEADER_LEN, 24);
    let back = load_poses(&path, &sk, PoseFormat::Binary).unwrap();
    back.validate(&sk).unwrap();
    for (a, b) in ds.poses.iter().zip(&back.poses) {
        for (x, y) in a.flatten().iter().zip(b.flatten()) {
            assert!((x - y).abs() <= 1e-6);
        }
    }
}

#[test]
fn jsonl_roundtrip_is_exact() {
    let sk = Skeleton::body21();
    let ds = desk_data(50);
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("poses.jsonl");
    save_poses(&path, &ds, PoseFormat::from_path(&path)).unwrap();
    let back = load_poses(&path, &sk, PoseFormat::JsonLines).unwrap();
    assert_eq!(back.poses, ds.poses);
}

#[test]
fn corrupt_files_are_rejected() {
    let sk = Skeleton::body21();
    let ds = desk_data(20);
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("poses.qpse");
    save_poses(&path, &ds, PoseFormat::Binary).unwrap();
    let good = std::fs::read(&path).unwrap();

    let mut bad = good.clone();
    bad[0] = b'X';
    std::fs::write(&path, &bad).unwrap();
    assert!(matches!(load_poses(&path, &sk, PoseFormat::Binary), Err(Error::Format(_))));

    std::fs::write(&path, &good[..good.len() - 3]).unwrap();
    assert!(matches!(load_poses(&path, &sk, PoseFormat::Binary), Err(Error::Format(_))));

    let mut nan = good.clone();
    nan[QPSE_HEADER_LEN..QPSE_HEADER_LEN + 4].copy_from_slice(&f32::NAN.to_le_bytes());
    std::fs::write(&path, &nan).unwrap();
    assert!(matches!(load_poses(&path, &sk, PoseFormat::Binary), Err(Error::NonFinite(_))));

    let mut version = good;
    version[4] = 9;
    std::fs::write(&path, &version).unwrap();
    assert!(matches!(load_poses(&path, &sk, PoseFormat::Binary), Err(Error::Version { .. })));
}
