//! Geometry oracles: rotation-matrix geodesics, homogeneous-matrix forward
//! kinematics, scalar-loop MPJAE, and the joint-space blend.

use proptest::prelude::*;
use qposer_core::geometry::{
    forward_kinematics, geodesic_angle_deg, joint_space_interpolate, mpjae_deg, Pose, Skeleton,
    UnitQuaternion,
};
use qposer_core::rng::SplitMix64;

type Mat3 = [[f64; 3]; 3];
type Mat4 = [[f64; 4]; 4];

fn quat_to_matrix(q: [f64; 4]) -> Mat3 {
    let [w, x, y, z] = q;
    [
        [1.0 - 2.0 * (y * y + z * z), 2.0 * (x * y - w * z), 2.0 * (x * z + w * y)],
        [2.0 * (x * y + w * z), 1.0 - 2.0 * (x * x + z * z), 2.0 * (y * z - w * x)],
        [2.0 * (x * z - w * y), 2.0 * (y * z + w * x), 1.0 - 2.0 * (x * x + y * y)],
    ]
}

fn trace_angle_deg(a: [f64; 4], b: [f64; 4]) -> f64 {
    let ra = quat_to_matrix(a);
    let rb = quat_to_matrix(b);
    // tr(Ra^T Rb)
    let mut tr = 0.0;
    for i in 0..3 {
        for k in 0..3 {
            tr += ra[k][i] * rb[k][i];
        }
    }
    ((tr - 1.0) / 2.0).clamp(-1.0, 1.0).acos().to_degrees()
}

fn random_quat(rng: &mut SplitMix64) -> UnitQuaternion {
    UnitQuaternion::canonicalize([rng.normal(), rng.normal(), rng.normal(), rng.normal()]).unwrap()
}

fn random_pose(rng: &mut SplitMix64, s: &Skeleton) -> Pose {
    Pose::new(s.name(), (0..s.joint_count()).map(|_| random_quat(rng)).collect())
}

#[test]
fn geodesic_matches_rotation_matrix_trace() {
    let mut rng = SplitMix64::new(2024);
    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        let a = random_quat(&mut rng);
        let b = random_quat(&mut rng);
        let d = geodesic_angle_deg(&a, &b);
        let oracle = trace_angle_deg(a.to_array(), b.to_array());
        worst = worst.max((d - oracle).abs());
    }
    // arccos near 0 and 180 loses precision in the trace route; random
    // pairs stay away from those ends.
    assert!(worst < 1e-6, "worst deviation {worst}");
}

#[test]
fn mpjae_single_joint_rotated() {
    let s = Skeleton::body21();
    let rest = Pose::rest(&s);
    let mut moved = rest.clone();
    moved.joints[5] = UnitQuaternion::from_axis_angle([1.0, 0.0, 0.0], std::f64::consts::FRAC_PI_2).unwrap();
    let v = mpjae_deg(&rest, &moved).unwrap();
    assert!((v - 90.0 / 21.0).abs() < 1e-12, "{v}");
    assert_eq!(mpjae_deg(&rest, &rest).unwrap(), 0.0);
}

#[test]
fn mpjae_matches_scalar_loop() {
    let s = Skeleton::body21();
    let mut rng = SplitMix64::new(7);
    for _ in 0..100 {
        let a = random_pose(&mut rng, &s);
        let b = random_pose(&mut rng, &s);
        let mut sum = 0.0;
        for j in 0..21 {
            let qa = a.joints[j].to_array();
            let qb = b.joints[j].to_array();
            let mut dot = 0.0;
            for k in 0..4 {
                dot += qa[k] * qb[k];
            }
            sum += (2.0 * dot.abs().min(1.0).acos()).to_degrees();
        }
        let v = mpjae_deg(&a, &b).unwrap();
        assert!((v - sum / 21.0).abs() < 1e-9);
        // Same per-joint formula, plain index loops: must agree exactly.
        let mut exact = 0.0;
        for j in 0..21 {
            let (qa, qb) = (a.joints[j].to_array(), b.joints[j].to_array());
            let dot: f64 = (0..4).map(|k| qa[k] * qb[k]).sum();
            let s = if dot < 0.0 { -1.0 } else { 1.0 };
            let (mut d2, mut p2) = (0.0, 0.0);
            for k in 0..4 {
                d2 += (qa[k] - s * qb[k]).powi(2);
                p2 += (qa[k] + s * qb[k]).powi(2);
            }
            exact += (4.0 * f64::atan2(d2.sqrt(), p2.sqrt())).to_degrees();
        }
        assert_eq!(v, exact / 21.0);
    }
}

#[test]
fn mpjae_rejects_mismatched_skeletons() {
    let s = Skeleton::body21();
    let a = Pose::rest(&s);
    let mut b = a.clone();
    b.joints.pop();
    assert!(mpjae_deg(&a, &b).is_err());
}

#[test]
fn mpjae_triangle_inequality() {
    let s = Skeleton::body21();
    let mut rng = SplitMix64::new(8);
    for _ in 0..500 {
        let a = random_pose(&mut rng, &s);
        let b = random_pose(&mut rng, &s);
        let c = random_pose(&mut rng, &s);
        let ab = mpjae_deg(&a, &b).unwrap();
        let bc = mpjae_deg(&b, &c).unwrap();
        let ac = mpjae_deg(&a, &c).unwrap();
        assert!(ac <= ab + bc + 1e-9);
    }
}

fn cumulative_offsets(s: &Skeleton) -> Vec<[f64; 3]> {
    let mut out: Vec<[f64; 3]> = Vec::new();
    for j in 0..s.joint_count() {
        let o = s.bone_offset(j);
        let p = match s.parent(j) {
            None => o,
            Some(p) => [out[p][0] + o[0], out[p][1] + o[1], out[p][2] + o[2]],
        };
        out.push(p);
    }
    out
}

#[test]
fn fk_identity_pose_is_cumulative_offsets() {
    let s = Skeleton::body21();
    let pos = forward_kinematics(&Pose::rest(&s), &s).unwrap();
    let expect = cumulative_offsets(&s);
    for (p, e) in pos.iter().zip(&expect) {
        for k in 0..3 {
            assert!((p[k] - e[k]).abs() < 1e-15);
        }
    }
    assert_eq!(pos[0], [0.0, 0.0, 0.0]);
}

#[test]
fn fk_root_half_turn_mirrors_x_and_y() {
    let s = Skeleton::body21();
    let mut pose = Pose::rest(&s);
    pose.joints[0] = UnitQuaternion::from_axis_angle([0.0, 0.0, 1.0], std::f64::consts::PI).unwrap();
    let pos = forward_kinematics(&pose, &s).unwrap();
    let rest = cumulative_offsets(&s);
    for (p, r) in pos.iter().zip(&rest) {
        assert!((p[0] + r[0]).abs() < 1e-12);
        assert!((p[1] + r[1]).abs() < 1e-12);
        assert!((p[2] - r[2]).abs() < 1e-12);
    }
}

fn mat4_mul(a: &Mat4, b: &Mat4) -> Mat4 {
    let mut c = [[0.0; 4]; 4];
    for i in 0..4 {
        for j in 0..4 {
            for k in 0..4 {
                c[i][j] += a[i][k] * b[k][j];
            }
        }
    }
    c
}

/// Local transform of joint j: translate by its offset, then rotate by its quaternion.
fn local_transform(q: [f64; 4], t: [f64; 3]) -> Mat4 {
    let r = quat_to_matrix(q);
    [
        [r[0][0], r[0][1], r[0][2], t[0]],
        [r[1][0], r[1][1], r[1][2], t[1]],
        [r[2][0], r[2][1], r[2][2], t[2]],
        [0.0, 0.0, 0.0, 1.0],
    ]
}

fn fk_matrix_oracle(pose: &Pose, s: &Skeleton) -> Vec<[f64; 3]> {
    let mut world: Vec<Mat4> = Vec::new();
    for j in 0..s.joint_count() {
        let local = local_transform(pose.joints[j].to_array(), s.bone_offset(j));
        let w = match s.parent(j) {
            None => local,
            Some(p) => mat4_mul(&world[p], &local),
        };
        world.push(w);
    }
    world.iter().map(|m| [m[0][3], m[1][3], m[2][3]]).collect()
}

#[test]
fn fk_matches_homogeneous_matrix_chain() {
    let s = Skeleton::body21();
    let mut rng = SplitMix64::new(31);
    for _ in 0..200 {
        let pose = random_pose(&mut rng, &s);
        let pos = forward_kinematics(&pose, &s).unwrap();
        let oracle = fk_matrix_oracle(&pose, &s);
        for (p, o) in pos.iter().zip(&oracle) {
            for k in 0..3 {
                assert!((p[k] - o[k]).abs() < 1e-6);
            }
        }
    }
}

#[test]
fn fk_preserves_bone_lengths() {
    let s = Skeleton::body21();
    let mut rng = SplitMix64::new(32);
    for _ in 0..1000 {
        let pose = random_pose(&mut rng, &s);
        let pos = forward_kinematics(&pose, &s).unwrap();
        for j in 0..s.joint_count() {
            if let Some(p) = s.parent(j) {
                let o = s.bone_offset(j);
                let bone = (0..3).map(|k| (pos[j][k] - pos[p][k]).powi(2)).sum::<f64>().sqrt();
                let len = o.iter().map(|c| c * c).sum::<f64>().sqrt();
                assert!((bone - len).abs() < 1e-6);
            }
        }
    }
}

#[test]
fn joint_space_interpolation_endpoints_and_midpoint() {
    let s = Skeleton::body21();
    let mut rng = SplitMix64::new(33);
    for _ in 0..50 {
        let a = random_pose(&mut rng, &s);
        let b = random_pose(&mut rng, &s);
        assert_eq!(joint_space_interpolate(&a, &b, 0.0).unwrap(), a);
        assert_eq!(joint_space_interpolate(&a, &b, 1.0).unwrap(), b);
        assert_eq!(joint_space_interpolate(&a, &a, 0.3).unwrap(), a);
        let mid = joint_space_interpolate(&a, &b, 0.5).unwrap();
        for j in 0..21 {
            let (qa, qb) = (a.joints[j].to_array(), b.joints[j].to_array());
            let mut m = [0.0; 4];
            for k in 0..4 {
                m[k] = 0.5 * qa[k] + 0.5 * qb[k];
            }
            let n = m.iter().map(|c| c * c).sum::<f64>().sqrt();
            let sign = if m[0] < 0.0 { -1.0 } else { 1.0 };
            for k in 0..4 {
                assert!((mid.joints[j].to_array()[k] - sign * m[k] / n).abs() < 1e-12);
            }
        }
    }
}

#[test]
fn joint_space_interpolation_rejects_out_of_range_t() {
    let s = Skeleton::body21();
    let a = Pose::rest(&s);
    assert!(joint_space_interpolate(&a, &a, 1.5).is_err());
    assert!(joint_space_interpolate(&a, &a, -0.1).is_err());
}

proptest! {
    #[test]
    fn canonicalize_idempotent(w in -5.0f64..5.0, x in -5.0f64..5.0, y in -5.0f64..5.0, z in -5.0f64..5.0) {
        prop_assume!(w * w + x * x + y * y + z * z > 1e-12);
        let a = UnitQuaternion::canonicalize([w, x, y, z]).unwrap();
        let b = UnitQuaternion::canonicalize(a.to_array()).unwrap();
        prop_assert_eq!(a.to_array().map(f64::to_bits), b.to_array().map(f64::to_bits));
        prop_assert!(a.w() >= 0.0);
    }

    #[test]
    fn geodesic_zero_iff_equal(seed in any::<u64>()) {
        let mut rng = SplitMix64::new(seed);
        let a = random_quat(&mut rng);
        let b = random_quat(&mut rng);
        prop_assert_eq!(geodesic_angle_deg(&a, &a), 0.0);
        if a != b {
            prop_assert!(geodesic_angle_deg(&a, &b) > 0.0);
        }
    }
}
