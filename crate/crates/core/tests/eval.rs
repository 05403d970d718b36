use qposer_core::data::{generate_manifold, ManifoldSpec, PoseDataset};
use qposer_core::eval::*;
use qposer_core::geometry::{forward_kinematics, mpjae_deg, Pose, Skeleton};
use qposer_core::model::QPoserModel;
use qposer_core::rng::SplitMix64;
use qposer_core::training::ModelConfig;

fn small(glif: bool) -> ModelConfig {
    ModelConfig {
        heads: [1, 2, 1, 1],
        global_heads: 1,
        codebook_sizes: [4, 8, 8, 8, 4],
        d_code: 4,
        hidden_width: 16,
        hidden_layers: 1,
        glif,
        ..ModelConfig::default()
    }
}

fn setup() -> (Skeleton, QPoserModel, PoseDataset) {
    let sk = Skeleton::body21();
    let model = small(true).build(&sk).unwrap();
    let ds = generate_manifold(&ManifoldSpec::default_for(&sk, 5, 6), 200, &sk).unwrap();
    (sk, model, ds)
}

#[test]
fn summary_matches_hand_computation() {
    let s = MetricSummary::from_values(&[1.0, 2.0, 3.0, 4.0]).unwrap();
    assert_eq!(s.mean, 2.5);
    assert!((s.std - 1.25f64.sqrt()).abs() < 1e-15);
    assert_eq!(s.n, 4);
    assert!(MetricSummary::from_values(&[]).is_err());
    assert_eq!(MetricSummary::single(3.0).std, 0.0);
}

#[test]
fn reconstruction_values_match_direct_mpjae() {
    let (_, model, ds) = setup();
    let poses = &ds.poses[..20];
    let (summary, values) = eval_reconstruction(&model, poses).unwrap();
    for (p, v) in poses.iter().zip(&values) {
        assert_eq!(*v, mpjae_deg(p, &model.reconstruct(p).unwrap()).unwrap());
    }
    assert_eq!(summary, MetricSummary::from_values(&values).unwrap());
}

#[test]
fn escalated_error_matches_manual_iteration() {
    let (_, model, ds) = setup();
    let poses = &ds.poses[..10];
    let k = 6;
    let (_, values) = eval_escalated(&model, poses, k).unwrap();
    for (p, v) in poses.iter().zip(&values) {
        let mut cur = p.clone();
        let mut errors = Vec::new();
        for _ in 0..k {
            cur = model.reconstruct(&cur).unwrap();
            errors.push(mpjae_deg(p, &cur).unwrap());
        }
        assert_eq!(*v, errors[k - 1] - errors[0]);
    }
    assert!(eval_escalated(&model, poses, 1).is_err());
}

#[test]
fn sample_pairs_are_distinct_and_seeded() {
    let pairs = sample_pairs(5, 200, &mut SplitMix64::new(9)).unwrap();
    assert!(pairs.iter().all(|&(a, b)| a != b && a < 5 && b < 5));
    assert_eq!(pairs, sample_pairs(5, 200, &mut SplitMix64::new(9)).unwrap());
    assert!(sample_pairs(1, 3, &mut SplitMix64::new(0)).is_err());
}

#[test]
fn interpolation_bounds_follow_definitions() {
    let (_, model, ds) = setup();
    let pairs: Vec<(Pose, Pose)> = (0..4).map(|i| (ds.poses[2 * i].clone(), ds.poses[2 * i + 1].clone())).collect();
    let steps = 9;
    let report = eval_interpolation(&model, &pairs, steps, &ds).unwrap();
    assert_eq!(report.pairs.len(), 4);
    for ((a, b), p) in pairs.iter().zip(&report.pairs) {
        let d = mpjae_deg(a, b).unwrap();
        assert_eq!(p.endpoint_distance, d);
        assert_eq!(p.step_bound, 2.0 * d / (steps - 1) as f64);
        assert_eq!(p.plausibility_bound, 3.0 * p.endpoint_recon_error);
        // The baseline frames' steps sum to at least the endpoint distance.
        assert!(p.baseline_max_step >= d / (steps - 1) as f64 - 1e-9);
    }
    assert!(eval_interpolation(&model, &pairs, 2, &ds).is_err());
}

#[test]
fn sampling_diversity_matches_pairwise_mean() {
    let (sk, model, ds) = setup();
    let (report, samples) = eval_sampling(&model, 12, &ds, &mut SplitMix64::new(4)).unwrap();
    assert_eq!(samples.len(), 12);
    let mut sum = 0.0;
    let mut n = 0;
    for i in 0..samples.len() {
        for j in i + 1..samples.len() {
            sum += mpjae_deg(&samples[i], &samples[j]).unwrap();
            n += 1;
        }
    }
    assert_eq!(report.diversity, sum / n as f64);
    assert_eq!(report.validity_rate, 1.0);
    assert_eq!(report.baseline_validity_rate, 1.0);
    assert!(samples.iter().all(|s| s.validate(&sk).is_ok()));
}

#[test]
fn local_modification_is_local_and_glif_off_has_no_shift() {
    let (sk, model, ds) = setup();
    let r = eval_local_modification(&model, &ds.poses, 30, &mut SplitMix64::new(2)).unwrap();
    assert_eq!(r.locality_rate, 1.0);
    let off = small(false).build(&sk).unwrap();
    let r = eval_local_modification(&off, &ds.poses, 30, &mut SplitMix64::new(2)).unwrap();
    assert_eq!(r.locality_rate, 1.0);
    assert_eq!(r.embodied_shift, 0.0);
}

#[test]
fn svg_render_is_deterministic_and_complete() {
    let (sk, _, ds) = setup();
    let pose = &ds.poses[0];
    let a = render_pose_svg_string(pose, &sk, View::Front).unwrap();
    let b = render_pose_svg_string(pose, &sk, View::Front).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.matches("<line class=\"bone\"").count(), sk.joint_count() - 1);
    assert_eq!(a.matches("<circle class=\"joint\"").count(), sk.joint_count());
    assert_ne!(a, render_pose_svg_string(pose, &sk, View::Side).unwrap());

    // Rest pose: root at the canvas center, every joint drawn at its FK position.
    let rest = render_pose_svg_string(&Pose::rest(&sk), &sk, View::Front).unwrap();
    assert!(rest.contains("<circle class=\"joint\" cx=\"200.000\" cy=\"200.000\""));
    let fk = forward_kinematics(&Pose::rest(&sk), &sk).unwrap();
    for p in fk {
        let needle = format!("cx=\"{:.3}\" cy=\"{:.3}\"", 200.0 + 180.0 * p[0], 200.0 - 180.0 * p[1]);
        assert!(rest.contains(&needle), "missing {needle}");
    }

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("p.svg");
    render_pose_svg(pose, &sk, &path).unwrap();
    assert_eq!(std::fs::read_to_string(path).unwrap(), a);
}

#[test]
fn report_separates_measured_and_published_numbers() {
    let mut report = EvalReport::new(0xabc, 0xdef);
    report.insert("recon", "mpjae_deg", MetricSummary::single(4.0)).unwrap();
    report.attach_references();
    assert!(report.reference_rows.iter().all(|r| r.label == PUBLISHED_LABEL));
    assert!(report.reference_rows.iter().any(|r| r.method == "VPoser"));
    let json: serde_json::Value = serde_json::from_str(&report.to_json().unwrap()).unwrap();
    assert_eq!(json["metrics"]["recon"]["mpjae_deg"]["mean"], 4.0);
    let text = report.to_text();
    assert!(text.contains("recon"));
    assert!(text.contains(PUBLISHED_LABEL));
}

#[test]
fn ablation_variants_rewrite_config() {
    let base = ModelConfig::default();
    assert_eq!(AblationVariant::HeadsPerPart(1).apply(&base).heads, [1; 4]);
    assert!(!AblationVariant::GlifOff.apply(&base).glif);
    assert_eq!(AblationVariant::Base.apply(&base), base);
    assert_eq!(AblationVariant::HeadsPerPart(1).label(), "1 head per part");
}
