use qposer_core::data::{generate_manifold, split, ManifoldSpec, PoseDataset, SplitSpec};
use qposer_core::geometry::Skeleton;
use qposer_core::training::{
    history_csv, load_checkpoint, mean_reconstruction_error, save_checkpoint, train, ModelConfig, TrainConfig,
    TrainState, CHECKPOINT_MAGIC,
};
use qposer_core::Error;

fn small_model() -> ModelConfig {
    ModelConfig {
        heads: [1, 2, 1, 1],
        global_heads: 1,
        codebook_sizes: [4, 8, 8, 8, 4],
        d_code: 4,
        hidden_width: 16,
        hidden_layers: 1,
        ..ModelConfig::default()
    }
}

fn small_train(steps: u64) -> TrainConfig {
    TrainConfig {
        batch_size: 16,
        steps,
        eval_every: 10,
        reseed_every: 7,
        ..TrainConfig::default()
    }
}

fn data() -> (Skeleton, PoseDataset, PoseDataset, PoseDataset) {
    let sk = Skeleton::body21();
    let ds = generate_manifold(&ManifoldSpec::default_for(&sk, 3, 6), 400, &sk).unwrap();
    let (tr, va, te) = split(&ds, &SplitSpec::default()).unwrap();
    (sk, tr, va, te)
}

#[test]
fn training_is_deterministic() {
    let (sk, tr, va, _) = data();
    let run = || train(small_model().build(&sk).unwrap(), &tr, &va, &small_train(30)).unwrap();
    let (m1, h1) = run();
    let (m2, h2) = run();
    assert_eq!(m1, m2);
    assert_eq!(m1.fingerprint(), m2.fingerprint());
    assert_eq!(h1, h2);
    assert_eq!(h1.len(), 30);
}

#[test]
fn zero_steps_leaves_model_untouched() {
    let (sk, tr, va, _) = data();
    let model = small_model().build(&sk).unwrap();
    let (trained, history) = train(model.clone(), &tr, &va, &small_train(0)).unwrap();
    assert_eq!(trained, model);
    assert!(history.is_empty());
}

#[test]
fn history_records_loss_decomposition_and_eval_points() {
    let (sk, tr, va, _) = data();
    let cfg = small_train(25);
    let (_, history) = train(small_model().build(&sk).unwrap(), &tr, &va, &cfg).unwrap();
    for (i, r) in history.iter().enumerate() {
        assert_eq!(r.step, i as u64 + 1);
        let expected = r.loss_recon + cfg.commit_weight * r.loss_commit;
        assert!((r.loss_total - expected).abs() <= 1e-12 * expected.max(1.0));
        assert_eq!(r.usage.len(), 5);
        assert!(r.usage.iter().all(|u| (0.0..=1.0).contains(u)));
        assert_eq!(r.val_mpjae.is_some(), r.step % 10 == 0 || r.step == 25, "step {}", r.step);
    }
    let csv = history_csv(&history, &["head", "torso", "arms", "legs", "global"]);
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines.len(), 26);
    assert_eq!(
        lines[0],
        "step,loss_total,loss_recon,loss_commit,val_mpjae,usage_head,usage_torso,usage_arms,usage_legs,usage_global"
    );
    assert!(lines.iter().all(|l| l.split(',').count() == 10));
}

#[test]
fn training_reduces_reconstruction_error() {
    let (sk, tr, va, te) = data();
    let model = small_model().build(&sk).unwrap();
    let before = mean_reconstruction_error(&model, &te.poses).unwrap();
    let (model, _) = train(model, &tr, &va, &small_train(300)).unwrap();
    let after = mean_reconstruction_error(&model, &te.poses).unwrap();
    assert!(after < 0.8 * before, "before {before} after {after}");
}

#[test]
fn resumed_training_matches_uninterrupted_bitwise() {
    let (sk, tr, va, _) = data();
    let cfg = small_train(40);
    let model = small_model().build(&sk).unwrap();
    let (full, full_history) = train(model.clone(), &tr, &va, &cfg).unwrap();

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("half.qpck");
    let mut state = TrainState::new(model, cfg).unwrap();
    state.run_until(&tr, &va, 17, |_| {}).unwrap();
    save_checkpoint(&path, &state).unwrap();
    let mut resumed = load_checkpoint(&path).unwrap();
    assert_eq!(resumed, state);
    resumed.run(&tr, &va).unwrap();
    assert_eq!(resumed.model, full);
    assert_eq!(resumed.history, full_history);
}

#[test]
fn checkpoint_roundtrip_preserves_encodings_bitwise() {
    let (sk, tr, va, te) = data();
    let mut state = TrainState::new(small_model().build(&sk).unwrap(), small_train(20)).unwrap();
    state.run(&tr, &va).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.qpck");
    save_checkpoint(&path, &state).unwrap();
    let bytes = std::fs::read(&path).unwrap();
    assert_eq!(&bytes[..4], &CHECKPOINT_MAGIC);
    let loaded = load_checkpoint(&path).unwrap();
    assert_eq!(loaded.model.fingerprint(), state.model.fingerprint());
    let poses = &te.poses[..te.len().min(100)];
    assert_eq!(loaded.model.encode_codes(poses).unwrap(), state.model.encode_codes(poses).unwrap());
    assert_eq!(loaded.model.reconstruct_many(poses).unwrap(), state.model.reconstruct_many(poses).unwrap());
}

#[test]
fn damaged_checkpoints_are_rejected() {
    let (sk, _, _, _) = data();
    let state = TrainState::new(small_model().build(&sk).unwrap(), small_train(5)).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.qpck");
    save_checkpoint(&path, &state).unwrap();
    let bytes = std::fs::read(&path).unwrap();

    let truncated = dir.path().join("truncated.qpck");
    std::fs::write(&truncated, &bytes[..bytes.len() - 9]).unwrap();
    assert!(matches!(load_checkpoint(&truncated), Err(Error::Checksum(_) | Error::Format(_))));

    let mut flipped = bytes.clone();
    let mid = bytes.len() / 2;
    flipped[mid] ^= 0x10;
    let flipped_path = dir.path().join("flipped.qpck");
    std::fs::write(&flipped_path, &flipped).unwrap();
    assert!(matches!(load_checkpoint(&flipped_path), Err(Error::Checksum(_))));

    let mut magic = bytes;
    magic[0] = b'X';
    let magic_path = dir.path().join("magic.qpck");
    std::fs::write(&magic_path, &magic).unwrap();
    assert!(matches!(load_checkpoint(&magic_path), Err(Error::Format(_))));
}

#[test]
fn config_validation_and_parsing() {
    let bad = TrainConfig {
        batch_size: 0,
        ..TrainConfig::default()
    };
    assert!(matches!(bad.validate(), Err(Error::InvalidConfig(_))));
    let lr = TrainConfig {
        learning_rate: -1.0,
        ..TrainConfig::default()
    };
    assert!(matches!(lr.validate(), Err(Error::InvalidConfig(_))));
    let parsed: TrainConfig = serde_json::from_str(r#"{"steps": 7, "seed": 3}"#).unwrap();
    assert_eq!(parsed.steps, 7);
    assert_eq!(parsed.batch_size, TrainConfig::default().batch_size);
    assert!(serde_json::from_str::<TrainConfig>(r#"{"stepz": 7}"#).is_err());
}

#[test]
fn empty_or_mismatched_datasets_are_rejected() {
    let (sk, tr, va, _) = data();
    let mut state = TrainState::new(small_model().build(&sk).unwrap(), small_train(5)).unwrap();
    let empty = PoseDataset {
        poses: vec![],
        ..tr.clone()
    };
    assert!(matches!(state.run(&empty, &va), Err(Error::InvalidConfig(_))));
    let mut other = tr.clone();
    other.skeleton_id = "other".into();
    assert!(matches!(state.run(&other, &va), Err(Error::SkeletonMismatch { .. })));
}

#[test]
fn glif_off_config_builds_single_group() {
    let sk = Skeleton::body21();
    let cfg = ModelConfig {
        glif: false,
        ..ModelConfig::default()
    };
    let layout = cfg.layout(&sk).unwrap();
    assert_eq!(layout.parts.len(), 1);
    assert!(layout.global.is_none());
    assert_eq!(layout.slot_count(), 22);
}
