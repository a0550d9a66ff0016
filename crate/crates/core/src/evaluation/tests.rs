use proptest::prelude::*;

use super::*;
use crate::geometry::layout::{MOUTH_LEFT, MOUTH_RIGHT, NOSE_TIP};
use crate::geometry::{apply_pose, frontalize, HeadPose};
use crate::synthdata::{generate_clip, ClipSpec};

fn clip_frames(seed: u64) -> Vec<LandmarkFrame> {
    generate_clip(&ClipSpec { duration_secs: 1.0, ..ClipSpec::default() }, seed).unwrap().frames
}

fn shift_point(frames: &[LandmarkFrame], idx: usize, dx: f64, space: Space) -> Vec<LandmarkFrame> {
    frames
        .iter()
        .map(|f| {
            f.map_points(|i, p| if i == idx { [p[0] + dx, p[1], p[2]] } else { p }, |_, e| e)
                .and_then(|g| g.with_space(space))
                .unwrap()
        })
        .collect()
}

#[test]
fn identical_sequences_score_zero() {
    let f = clip_frames(1);
    assert_eq!(mouth_metrics(&f, &f).unwrap(), PairMetrics::default());
    assert_eq!(face_metrics(&f, &f).unwrap(), PairMetrics::default());
}

#[test]
fn one_mouth_landmark_offset_oracle() {
    // metric-frame ground truth so normalization is the identity
    let gt: Vec<LandmarkFrame> = clip_frames(2).iter().map(|f| metric_normalize(f).unwrap()).collect();
    let moved = shift_point(&gt, 51, 0.1, Space::Metric);
    let m = mouth_metrics(&moved, &gt).unwrap();
    let expected = 0.1 / (20.0 * 2.0);
    assert!((m.position - expected).abs() < 1e-12, "{}", m.position);
    assert!(m.velocity.abs() < 1e-12);
}

#[test]
fn face_shift_oracle() {
    let gt = clip_frames(3);
    // a global shift is removed by recentering
    let all: Vec<LandmarkFrame> = gt
        .iter()
        .map(|f| f.clone().with_space(Space::Frontal).unwrap().map_points(|_, p| [p[0] + 0.05, p[1], p[2]], |_, e| [e[0] + 0.05, e[1]]).unwrap())
        .collect();
    let m = face_metrics(&all, &gt).unwrap();
    assert!(m.position < 1e-12 && m.velocity < 1e-12);
    // moving the nose tip by d moves the centroid by d/68: the nose tip is
    // off by 67d/68 and the other 67 points by d/68, all in x
    let d = 0.05;
    let toy: Vec<LandmarkFrame> = gt[..3].to_vec();
    let moved = shift_point(&toy, NOSE_TIP, d, Space::Frontal);
    let m = face_metrics(&moved, &toy).unwrap();
    let expected = (67.0 * d / 68.0 + 67.0 * d / 68.0) / (68.0 * 2.0);
    assert!((m.position - expected).abs() < 1e-12, "{} vs {expected}", m.position);
    assert!(m.velocity < 1e-12);
}

#[test]
fn velocity_counts_first_differences() {
    let gt: Vec<LandmarkFrame> = clip_frames(4)[..2].iter().map(|f| metric_normalize(f).unwrap()).collect();
    // landmark 51 off by 0.1 in the second frame only
    let mut pred = gt.clone();
    pred[1] = shift_point(&gt[1..], 51, 0.1, Space::Metric).remove(0);
    let m = mouth_metrics(&pred, &gt).unwrap();
    assert!((m.position - 0.05 / 40.0).abs() < 1e-12);
    assert!((m.velocity - 0.1 / 40.0).abs() < 1e-12);
}

#[test]
fn contract_errors() {
    let f = clip_frames(5);
    assert!(matches!(mouth_metrics(&f[..3], &f[..4]), Err(Error::Contract(_))));
    assert!(matches!(face_metrics(&f[..1], &f[..1]), Err(Error::InvalidArgument(_))));
    let posed: Vec<_> = f.iter().map(|x| apply_pose(x, &HeadPose::IDENTITY).unwrap()).collect();
    assert!(matches!(face_metrics(&posed, &posed), Err(Error::Contract(_))));
}

#[test]
fn degenerate_mouth_is_skipped_with_warning() {
    let gt = clip_frames(6);
    let mut bad = gt.clone();
    bad[0] = gt[0]
        .map_points(|i, p| if i == MOUTH_RIGHT { gt[0].face()[MOUTH_LEFT] } else { p }, |_, e| e)
        .unwrap();
    let ok = clip_metrics("ok", &gt, &gt, None).unwrap();
    let results = vec![("ok".to_string(), Ok(ok)), ("bad".to_string(), clip_metrics("bad", &bad, &gt, None))];
    let report = collect_report("t", "h".into(), results).unwrap();
    assert_eq!(report.clip_count, 1);
    assert_eq!(report.skipped.len(), 1);
    assert_eq!(report.skipped[0].id, "bad");
}

#[test]
fn aggregate_is_mean_of_rows_and_round_trips() {
    let rows: Vec<ClipMetrics> = (0..3)
        .map(|i| ClipMetrics {
            id: format!("c{i}"),
            frames: 10,
            m_p: i as f64,
            m_v: 2.0 * i as f64,
            f_p: 0.5,
            f_v: 0.25 * i as f64,
            kp_l1: Some(1.0 + i as f64),
        })
        .collect();
    let r = EvalReport::new("x", config_hash(&"cfg").unwrap(), rows, vec![]);
    assert_eq!(r.aggregate.m_p, 1.0);
    assert_eq!(r.aggregate.m_v, 2.0);
    assert_eq!(r.aggregate.f_p, 0.5);
    assert_eq!(r.aggregate.kp_l1, Some(2.0));
    assert_eq!(r.config_hash.len(), 64);
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("r.json");
    r.write(&p).unwrap();
    assert_eq!(EvalReport::read(&p).unwrap(), r);
}

#[test]
fn mean_face_of_one_clip_is_normalized() {
    let f = clip_frames(7);
    let m = mean_face(&f).unwrap();
    assert_eq!(m.space(), Space::FrontalNormalized);
    assert!((m.ear_distance() - 2.0).abs() < 1e-9);
    assert!(mean_face(std::iter::empty()).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn metrics_invariant_to_common_rigid_pose(
        seed in 0u64..1000,
        yaw in -40.0f64..40.0, pitch in -40.0f64..40.0, roll in -40.0f64..40.0,
        tx in -0.5f64..0.5, ty in -0.5f64..0.5, scale in 0.5f64..1.5,
    ) {
        let gt = clip_frames(seed % 5);
        let pred = clip_frames(seed % 5 + 10);
        let n = gt.len().min(pred.len()).min(6);
        let (gt, pred) = (&gt[..n], &pred[..n]);
        let pose = HeadPose { yaw, pitch, roll, tx, ty, tz: 0.1, scale };
        let round = |s: &[LandmarkFrame]| -> Vec<LandmarkFrame> {
            s.iter().map(|f| frontalize(&apply_pose(f, &pose).unwrap(), &pose).unwrap()).collect()
        };
        let (m0, f0) = (mouth_metrics(pred, gt).unwrap(), face_metrics(pred, gt).unwrap());
        let (m1, f1) = (mouth_metrics(&round(pred), &round(gt)).unwrap(), face_metrics(&round(pred), &round(gt)).unwrap());
        for (a, b) in [(m0.position, m1.position), (m0.velocity, m1.velocity), (f0.position, f1.position), (f0.velocity, f1.velocity)] {
            prop_assert!((a - b).abs() < 1e-5, "{} vs {}", a, b);
        }
        prop_assert!(m0.position >= 0.0 && f0.velocity >= 0.0);
    }

    #[test]
    fn metrics_invariant_to_translation(seed in 0u64..100, dx in -1.0f64..1.0, dy in -1.0f64..1.0) {
        let gt = clip_frames(seed % 3);
        let pred = clip_frames(seed % 3 + 20);
        let n = gt.len().min(pred.len()).min(5);
        let shift = |s: &[LandmarkFrame]| -> Vec<LandmarkFrame> {
            s.iter().map(|f| f.clone().with_space(Space::Frontal).unwrap()
                .map_points(|_, p| [p[0] + dx, p[1] + dy, p[2]], |_, e| [e[0] + dx, e[1] + dy]).unwrap()).collect()
        };
        let a = face_metrics(&pred[..n], &gt[..n]).unwrap();
        let b = face_metrics(&shift(&pred[..n]), &gt[..n]).unwrap();
        let c = mouth_metrics(&pred[..n], &gt[..n]).unwrap();
        let d = mouth_metrics(&shift(&pred[..n]), &shift(&gt[..n])).unwrap();
        prop_assert!((a.position - b.position).abs() < 1e-9);
        prop_assert!((c.position - d.position).abs() < 1e-9);
    }
}

#[test]
fn spearman_oracles() {
    let up = [1.0, 2.0, 3.0, 4.0, 5.0];
    assert_eq!(spearman(&up, &[0.1, 0.5, 0.7, 2.0, 9.0]).unwrap(), 1.0);
    assert_eq!(spearman(&up, &[5.0, 4.0, 3.0, 2.0, 1.0]).unwrap(), -1.0);
    // one swap of adjacent ranks: 1 − 6·2 / (5·24) = 0.9
    assert!((spearman(&up, &[1.0, 3.0, 2.0, 4.0, 5.0]).unwrap() - 0.9).abs() < 1e-12);
    // ties take the average rank: ranks (1, 2.5, 2.5, 4, 5)
    let tied = spearman(&up, &[0.0, 1.0, 1.0, 2.0, 3.0]).unwrap();
    let expect = 9.5 / (10.0f64 * 9.5).sqrt();
    assert!((tied - expect).abs() < 1e-12, "{tied} vs {expect}");
    assert_eq!(spearman(&up, &[1.0; 5]).unwrap(), 0.0);
    assert!(spearman(&up, &up[..3]).is_err());
}

#[test]
fn emotion_direction_of_generated_clips() {
    use crate::synthdata::{Emotion, EmotionVector};
    let mk = |e: EmotionVector, seed| generate_clip(&ClipSpec { duration_secs: 1.0, silent: true, emotion: e, ..ClipSpec::default() }, seed).unwrap();
    let clips = vec![
        mk(EmotionVector::neutral(), 1),
        mk(EmotionVector::neutral(), 2),
        mk(EmotionVector::one_hot(Emotion::Happy, 1.0).unwrap(), 3),
        mk(EmotionVector::one_hot(Emotion::Happy, 0.5).unwrap(), 4),
    ];
    let d = emotion_direction(&clips, Emotion::Happy).unwrap();
    // a smile raises both corners
    assert!(d[1] > 0.0 && d[3] > 0.0, "{d:?}");
    assert!(emotion_direction(&clips[..2], Emotion::Happy).is_err());
    let rest = &clips[0].source;
    assert_eq!(corner_offset(std::slice::from_ref(rest), rest).unwrap(), [0.0; 4]);
}
