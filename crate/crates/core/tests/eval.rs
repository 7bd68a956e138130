use intrinsic_core::eval::{lmse, parse_iiw_json, predict_judgements, whdr, Darker, Judgement, JudgementSet};
use intrinsic_core::imgcore::ImageBuffer;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_image(w: usize, h: usize, seed: u64) -> ImageBuffer {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    ImageBuffer::from_fn(w, h, 3, |_, _, _| rng.gen_range(0.02..1.0)).unwrap()
}

fn random_judgements(count: usize, seed: u64) -> JudgementSet {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let answers = [Darker::First, Darker::Second, Darker::Equal];
    let comparisons = (0..count)
        .map(|_| Judgement {
            point1: [rng.gen_range(0.0..1.0), rng.gen_range(0.0..1.0)],
            point2: [rng.gen_range(0.0..1.0), rng.gen_range(0.0..1.0)],
            darker: answers[rng.gen_range(0..3)],
            weight: rng.gen_range(0.0..1.0),
        })
        .collect();
    JudgementSet::new(comparisons).unwrap()
}

#[test]
fn three_comparison_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("12.json");
    std::fs::write(
        &path,
        r#"{
  "intrinsic_points": [
    {"id": 10, "x": 0.25, "y": 0.25, "opaque": true},
    {"id": 11, "x": 0.75, "y": 0.25, "opaque": true},
    {"id": 12, "x": 0.5, "y": 0.9, "opaque": true}
  ],
  "intrinsic_comparisons": [
    {"point1": 10, "point2": 11, "darker": "1", "darker_score": 0.8},
    {"point1": 11, "point2": 12, "darker": "E", "darker_score": 1.0},
    {"point1": 12, "point2": 10, "darker": "2", "darker_score": 0.6}
  ]
}"#,
    )
    .unwrap();
    let set = parse_iiw_json(&path).unwrap();
    assert_eq!(set.len(), 3);
    assert_eq!(set.skipped, 0);
    let weights: Vec<f64> = set.comparisons.iter().map(|j| j.weight).collect();
    assert_eq!(weights, vec![0.8, 1.0, 0.6]);
    assert_eq!(set.comparisons[2].point1, [0.5, 0.9]);
    assert!(parse_iiw_json(dir.path().join("missing.json")).is_err());
}

#[test]
fn equal_predictions_grow_with_delta() {
    let img = random_image(30, 20, 1);
    let set = random_judgements(200, 2);
    let mut previous: Vec<bool> = vec![false; set.len()];
    for delta in [0.0, 0.02, 0.05, 0.1, 0.2, 0.5, 1.0] {
        let equal: Vec<bool> = predict_judgements(&img, &set, delta)
            .unwrap()
            .into_iter()
            .map(|p| p == Darker::Equal)
            .collect();
        assert!(previous.iter().zip(&equal).all(|(&before, &now)| !before || now));
        previous = equal;
    }
    assert!(previous.iter().any(|&e| e));
}

#[test]
fn matching_and_mismatching_sets() {
    let img = ImageBuffer::from_fn(2, 1, 3, |x, _, _| if x == 0 { 0.2 } else { 0.6 }).unwrap();
    let j = |darker| Judgement {
        point1: [0.25, 0.5],
        point2: [0.75, 0.5],
        darker,
        weight: 1.0,
    };
    let right = JudgementSet::new(vec![j(Darker::First)]).unwrap();
    let wrong = JudgementSet::new(vec![j(Darker::Equal)]).unwrap();
    assert_eq!(whdr(&img, &right, 0.1).unwrap().value, Some(0.0));
    assert_eq!(whdr(&img, &wrong, 0.1).unwrap().value, Some(1.0));
}

#[test]
fn lmse_is_not_symmetric() {
    let a = random_image(40, 40, 3);
    let b = random_image(40, 40, 4);
    let ab = lmse(&a, &b, 20, 10).unwrap().value.unwrap();
    let ba = lmse(&b, &a, 20, 10).unwrap().value.unwrap();
    assert!(ab > 0.0 && ba > 0.0);
    assert_ne!(ab, ba);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn whdr_ignores_global_scale(seed in 0u64..1000, scale in 0.01f64..50.0) {
        let img = random_image(16, 12, seed);
        let set = random_judgements(40, seed + 1);
        let a = whdr(&img, &set, 0.1).unwrap();
        let b = whdr(&img.map(|v| v * scale).unwrap(), &set, 0.1).unwrap();
        // Ratios of scaled values can differ in the last bit only.
        prop_assert!((a.value.unwrap() - b.value.unwrap()).abs() < 1e-12 || a == b);
    }

    #[test]
    fn lmse_ignores_scale(seed in 0u64..1000, alpha in 0.05f64..20.0) {
        let gt = random_image(45, 33, seed);
        let v = lmse(&gt.map(|x| alpha * x).unwrap(), &gt, 20, 10).unwrap().value.unwrap();
        prop_assert!(v < 1e-12);
    }
}
