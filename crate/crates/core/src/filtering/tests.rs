use super::*;
use crate::geometry::Space;
use crate::synthdata::{build_corpus, generate_clip, AnomalyKind, ClipSpec, CorpusConfig};

fn static_seq(n: usize) -> Vec<LandmarkFrame> {
    let c = generate_clip(&ClipSpec { silent: true, duration_secs: 1.0, ..ClipSpec::default() }, 1).unwrap();
    vec![c.source; n]
}

fn shifted(f: &LandmarkFrame, dx: f64) -> LandmarkFrame {
    LandmarkFrame::new_unchecked(
        f.face().iter().map(|p| [p[0] + dx, p[1], p[2]]).collect(),
        f.eyes().to_vec(),
        Space::Frontal,
    )
    .unwrap()
}

fn dyadic_frame(x: f64) -> LandmarkFrame {
    LandmarkFrame::new(vec![[x, 0.5, 0.25]; 68], vec![[0.0, 0.0]; 52], Space::Frontal).unwrap()
}

#[test]
fn static_sequence_passes_jump_filter() {
    let e = filter_temporal_jump(&static_seq(10), 0.15).unwrap();
    assert!(e.passed());
    assert_eq!(e.statistic, 0.0);
}

#[test]
fn injected_cut_fails_at_its_frame() {
    let mut seq = static_seq(10);
    for f in seq.iter_mut().skip(6) {
        *f = shifted(f, 0.5);
    }
    let e = filter_temporal_jump(&seq, 0.15).unwrap();
    assert!(!e.passed());
    assert_eq!(e.offending_frames, vec![6]);
    assert!((e.statistic - 0.5).abs() < 1e-12);
}

#[test]
fn jump_exactly_at_threshold_passes() {
    let seq = vec![dyadic_frame(0.0), dyadic_frame(0.25)];
    assert!(filter_temporal_jump(&seq, 0.25).unwrap().passed());
    assert!(!filter_temporal_jump(&seq, 0.125).unwrap().passed());
    assert!(filter_temporal_jump(&seq[..1], 0.25).is_err());
}

fn poses_with(f: impl Fn(usize) -> HeadPose, n: usize) -> Vec<HeadPose> {
    (0..n).map(f).collect()
}

#[test]
fn rotation_threshold_is_strict() {
    let ok = poses_with(|t| HeadPose { yaw: 44.0 - t as f64, pitch: -44.0, ..HeadPose::IDENTITY }, 5);
    assert!(filter_rotation(&ok, 45.0).unwrap().passed());
    let mut bad = ok.clone();
    bad[3].pitch = 46.0;
    let e = filter_rotation(&bad, 45.0).unwrap();
    assert!(!e.passed());
    assert_eq!(e.offending_frames, vec![3]);
    let edge = poses_with(|_| HeadPose { roll: 45.0, ..HeadPose::IDENTITY }, 3);
    assert!(filter_rotation(&edge, 45.0).unwrap().passed());
    let edge = poses_with(|_| HeadPose { roll: -45.0, ..HeadPose::IDENTITY }, 3);
    assert!(filter_rotation(&edge, 45.0).unwrap().passed());
}

#[test]
fn scale_variation_ratio() {
    let constant = poses_with(|_| HeadPose { scale: 1.7, ..HeadPose::IDENTITY }, 4);
    let e = filter_scale_variation(&constant, 1.3).unwrap();
    assert!(e.passed());
    assert_eq!(e.statistic, 1.0);
    let sweep = poses_with(|t| HeadPose { scale: 1.0 + t as f64 / 9.0, ..HeadPose::IDENTITY }, 10);
    let e = filter_scale_variation(&sweep, 1.3).unwrap();
    assert!(!e.passed());
    assert!((e.statistic - 2.0).abs() < 1e-12);
    let edge = poses_with(|t| HeadPose { scale: if t == 0 { 1.0 } else { 1.25 }, ..HeadPose::IDENTITY }, 2);
    assert!(filter_scale_variation(&edge, 1.25).unwrap().passed());
    let mut neg = constant.clone();
    neg[1].scale = 0.0;
    assert!(filter_scale_variation(&neg, 1.3).is_err());
}

#[test]
fn missing_frames_detection() {
    let seq = static_seq(4);
    assert!(filter_missing_frames(&seq).passed());
    let mut holed = seq.clone();
    let mut face = holed[2].face().to_vec();
    face[30][1] = f64::NAN;
    holed[2] = LandmarkFrame::new_unchecked(face, holed[2].eyes().to_vec(), Space::Raw).unwrap();
    let e = filter_missing_frames(&holed);
    assert!(!e.passed());
    assert_eq!(e.offending_frames, vec![2]);
    assert!(!filter_missing_frames(&[]).passed());
}

#[test]
fn hand_flag_is_consumed() {
    let flags = ClipFlags { anomaly: None, hand_present: true };
    assert!(!filter_hand_presence(&flags).passed());
    assert!(filter_hand_presence(&ClipFlags::default()).passed());
}

#[test]
fn clean_clips_pass_and_anomalies_exceed_thresholds_twice() {
    let cfg = FilterConfig::default();
    for seed in 0..6u64 {
        let clean = generate_clip(&ClipSpec { duration_secs: 4.0, ..ClipSpec::default() }, seed).unwrap();
        let r = filter_record(&clean, &cfg).unwrap();
        assert!(r.passed(), "seed {seed}: {r:?}");
        for kind in AnomalyKind::ALL {
            let spec = ClipSpec { duration_secs: 4.0, anomaly: Some(kind), ..ClipSpec::default() };
            let clip = generate_clip(&spec, seed).unwrap();
            let r = filter_record(&clip, &cfg).unwrap();
            let (filter, limit) = match kind {
                AnomalyKind::TemporalJump => (FilterKind::TemporalJump, cfg.jump_threshold),
                AnomalyKind::Rotation => (FilterKind::Rotation, cfg.max_rotation_deg),
                AnomalyKind::ScaleSweep => (FilterKind::ScaleVariation, cfg.max_scale_ratio),
            };
            let e = r.entries.iter().find(|e| e.filter == filter).unwrap();
            assert!(!e.passed());
            assert!(e.statistic >= 2.0 * limit, "{kind:?}: {} vs {limit}", e.statistic);
        }
    }
}

#[test]
fn corpus_run_is_idempotent_and_respects_disabling() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = CorpusConfig {
        clips: 20,
        anomaly_rate: 0.15,
        min_duration: 1.0,
        max_duration: 1.5,
        ..CorpusConfig::default()
    };
    build_corpus(&cfg, dir.path()).unwrap();
    let corpus = Corpus::open(dir.path()).unwrap();
    let (kept, report) = run_filters(&corpus, &FilterConfig::default()).unwrap();
    assert_eq!(kept.len(), 17);
    assert_eq!(report.removed, 3);
    assert!(kept.iter().all(|e| e.flags.anomaly.is_none()));

    let out = dir.path().join(FILTERED_MANIFEST_FILE);
    write_filter_outputs(&out, &kept, &report).unwrap();
    assert!(dir.path().join(REPORT_FILE).exists());
    let filtered = Corpus::open_with_manifest(dir.path(), &out).unwrap();
    let (again, report2) = run_filters(&filtered, &FilterConfig::default()).unwrap();
    assert_eq!(again, kept);
    assert_eq!(report2.removed, 0);

    let (all, _) = run_filters(&corpus, &FilterConfig::all_disabled()).unwrap();
    assert_eq!(all.len(), 20);
}
