use qposer_core::geometry::{Pose, Skeleton};
use qposer_core::model::LatentCode;
use qposer_core::rng::SplitMix64;
use qposer_core::training::ModelConfig;
use qposer_core::wire::*;
use qposer_core::Error;

#[test]
fn pose_json_roundtrips_exactly() {
    let sk = Skeleton::body21();
    let model = ModelConfig::default().build(&sk).unwrap();
    let (_, pose) = model.sample(&mut SplitMix64::new(1)).unwrap();
    let text = pose_to_string(&pose);
    assert!(text.starts_with("{\"skeleton\":\"body21\",\"joints\":[["));
    assert_eq!(parse_pose(&text, &sk).unwrap(), pose);
}

#[test]
fn pose_json_rejects_invariant_violations() {
    let sk = Skeleton::body21();
    let mut rest = PoseJson::from_pose(&Pose::rest(&sk));
    rest.joints[3] = [-1.0, 0.0, 0.0, 0.0];
    assert!(rest.clone().into_pose(&sk).is_err());
    assert!(rest.clone().into_pose_canonicalized(&sk).is_ok());
    rest.joints[3] = [2.0, 0.0, 0.0, 0.0];
    assert!(rest.clone().into_pose(&sk).is_err());
    rest.joints.pop();
    assert!(rest.into_pose_canonicalized(&sk).is_err());
    assert!(matches!(parse_pose("{\"skeleton\": 1}", &sk), Err(Error::Format(_))));
}

#[test]
fn latent_json_roundtrips_with_part_names() {
    let sk = Skeleton::body21();
    let model = ModelConfig::default().build(&sk).unwrap();
    let code = model.sample_code(&mut SplitMix64::new(2));
    let text = latent_to_string(&code, model.layout());
    let json: LatentJson = serde_json::from_str(&text).unwrap();
    assert_eq!(json.parts.keys().cloned().collect::<Vec<_>>(), model.layout().part_names());
    assert_eq!(json.fingerprint.len(), 16);
    assert_eq!(parse_latent(&text, model.layout()).unwrap(), code);
}

#[test]
fn latent_json_rejects_bad_shapes_and_names() {
    let sk = Skeleton::body21();
    let model = ModelConfig::default().build(&sk).unwrap();
    let code: LatentCode = model.sample_code(&mut SplitMix64::new(2));
    let mut json = LatentJson::from_code(&code, model.layout());
    json.global.push(0);
    assert!(json.clone().into_code(model.layout()).is_err());
    json.global.pop();
    let first = json.parts.keys().next().unwrap().clone();
    let v = json.parts.shift_remove(&first).unwrap();
    json.parts.insert("Tail".into(), v);
    assert!(json.clone().into_code(model.layout()).is_err());
    json.fingerprint = "zz".into();
    assert!(matches!(json.into_code(model.layout()), Err(Error::Format(_))));
}
