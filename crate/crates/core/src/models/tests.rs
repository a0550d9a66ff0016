use ndarray::arr2;

use super::layers::{film_apply, AudioEncoder, Film};
use super::*;
use crate::audiofeat::compute_mfcc;
use crate::geometry::apply_pose;
use crate::nn::Graph;
use crate::synthdata::{generate_clip, ClipSpec, Emotion, EmotionVector};

fn small() -> ModelConfig {
    ModelConfig::with_widths(16, 16, 16)
}

fn clip(seed: u64) -> crate::synthdata::ClipRecord {
    generate_clip(&ClipSpec { duration_secs: 1.0, ..ClipSpec::default() }, seed).unwrap()
}

fn max_diff(a: &Mat, b: &Mat) -> f64 {
    (a - b).iter().fold(0.0f64, |m, v| m.max(v.abs()))
}

#[test]
fn film_arithmetic() {
    let mut g = Graph::inference();
    let x = g.input(arr2(&[[1.0, -1.0]]));
    let gamma = g.input(arr2(&[[2.0, 2.0]]));
    let beta = g.input(arr2(&[[1.0, 1.0]]));
    let y = film_apply(&mut g, x, gamma, beta, 1);
    assert_eq!(g.value(y), &arr2(&[[3.0, -1.0]]));
    let zero = g.input(arr2(&[[0.0, 0.0]]));
    let b = g.input(arr2(&[[0.5, -0.25]]));
    let y = film_apply(&mut g, x, zero, b, 1);
    assert_eq!(g.value(y), &arr2(&[[0.5, -0.25]]));
}

#[test]
fn fresh_film_is_identity() {
    let mut store = crate::nn::ParamStore::new();
    let film = Film::new(&mut store, &mut model_rng(1), "f", 8, 32, 5);
    let mut g = Graph::inference();
    let x = g.input(Mat::from_shape_fn((6, 5), |(r, c)| r as f64 - 0.3 * c as f64));
    let e = g.input(Mat::from_shape_fn((2, 8), |(r, c)| ((r + c) % 3) as f64 / 2.0));
    let y = film.apply(&mut g, &store, x, e, 3);
    assert_eq!(g.value(y), g.value(x));
}

#[test]
fn encoder_lookahead_is_two_frames() {
    let cfg = AudioEncoderConfig::with_channels(8);
    assert_eq!(cfg.layers(), 12);
    assert_eq!(cfg.lookahead(), MAX_LOOKAHEAD);
    let mut store = crate::nn::ParamStore::new();
    let enc = AudioEncoder::new(&mut store, &mut model_rng(3), "a", AUDIO_DIM, &cfg, Some((8, 4)));
    let steps = 20;
    let base = Mat::from_shape_fn((steps, AUDIO_DIM), |(t, k)| ((t * 7 + k * 3) % 11) as f64 / 5.0 - 1.0);
    let run = |feats: &Mat| {
        let mut g = Graph::inference();
        let f = g.input(feats.clone());
        let e = g.input(Mat::zeros((1, 8)));
        let y = enc.forward(&mut g, &store, f, steps, 1, Some(e));
        g.value(y).clone()
    };
    let clean = run(&base);
    assert_eq!(clean.dim(), (steps, 8));
    for t in 0..steps - 3 {
        let mut p = base.clone();
        p.row_mut(t + 3).mapv_inplace(|v| v + 5.0);
        let out = run(&p);
        for s in 0..=t {
            assert_eq!(out.row(s), clean.row(s), "frame {s} moved when perturbing {}", t + 3);
        }
        // the frame two ahead does reach t once the delay has filled
        if t < cfg.delay() {
            continue;
        }
        let mut q = base.clone();
        q.row_mut(t + 2).mapv_inplace(|v| v + 5.0);
        assert!(max_diff(&run(&q).row(t).to_owned().insert_axis(ndarray::Axis(0)), &clean.row(t).to_owned().insert_axis(ndarray::Axis(0))) > 0.0);
    }
}

#[test]
fn s2l_rollout_shapes_and_emotion_invariance_at_init() {
    let c = clip(2);
    let model = S2l::new(&small().s2l, 5).unwrap();
    let audio = compute_mfcc(&c.waveform).unwrap();
    let neutral = model.rollout(&c.source, &audio, &EmotionVector::neutral(), None, None).unwrap();
    assert_eq!(neutral.len(), c.len());
    assert!(neutral.iter().all(|f| f.face().len() == 68 && f.eyes().len() == 52));
    assert!(neutral.iter().all(|f| f.space() == crate::geometry::Space::FrontalNormalized));
    let happy = EmotionVector::one_hot(Emotion::Happy, 1.0).unwrap();
    let moved = model.rollout(&c.source, &audio, &happy, None, None).unwrap();
    assert_eq!(neutral, moved);
    let empty = crate::audiofeat::AudioFeatures::new(0, vec![]).unwrap();
    assert!(model.rollout(&c.source, &empty, &happy, None, None).is_err());
}

#[test]
fn s2l_init_hidden_contract() {
    let c = clip(3);
    let mut model = S2l::new(&small().s2l, 1).unwrap();
    let a0 = vec![0.1; 16];
    let h = model.init_hidden(&c.source, &a0, &EmotionVector::neutral()).unwrap();
    assert_eq!(h.len(), 2 * 2 * 16);
    assert_eq!(h, model.init_hidden(&c.source, &a0, &EmotionVector::neutral()).unwrap());
    let posed = apply_pose(&c.source, &c.poses[0]).unwrap();
    assert!(model.init_hidden(&posed, &a0, &EmotionVector::neutral()).is_err());
    let ids: Vec<_> = model.store.ids().filter(|id| model.store.name(*id).starts_with("s2l.init.")).collect();
    for id in ids {
        model.store.value_mut(id).fill(0.0);
    }
    let h = model.init_hidden(&c.source, &a0, &EmotionVector::neutral()).unwrap();
    assert!(h.iter().all(|v| *v == 0.0));
}

#[test]
fn posegen_latent_contract() {
    let c = clip(4);
    let model = PoseGen::new(&small().posegen, 2).unwrap();
    let audio = compute_mfcc(&c.waveform).unwrap();
    let (mu, sigma) = model.encode(&audio, &c.poses).unwrap();
    assert_eq!(mu.len(), LATENT_DIM);
    assert_eq!(sigma.len(), LATENT_DIM);
    assert!(sigma.iter().all(|s| *s > 0.0));
    assert_eq!((mu.clone(), sigma.clone()), model.encode(&audio, &c.poses).unwrap());
    assert!(model.encode(&audio, &c.poses[1..]).is_err());
    let poses = model.decode(&audio, &mu, 1.1).unwrap();
    assert_eq!(poses.len(), c.len());
    assert!(poses.iter().all(|p| p.max_abs_angle() <= ANGLE_RANGE && p.scale == 1.1));
    assert!(model.decode(&audio, &[f64::NAN; LATENT_DIM], 1.0).is_err());
}

#[test]
fn l2l_rollout_contract() {
    let c = clip(6);
    let model = L2l::new(&small().l2l, 3).unwrap();
    let audio = compute_mfcc(&c.waveform).unwrap();
    let posed = c.posed_frames().unwrap();
    let kps = model.rollout(&posed, &audio, &c.source_kp, &EmotionVector::neutral()).unwrap();
    assert_eq!(kps.len(), c.len());
    assert!(kps.iter().all(|k| k.points().len() == 20));
    assert!(model.rollout(&c.frames, &audio, &c.source_kp, &EmotionVector::neutral()).is_err());
    let happy = EmotionVector::one_hot(Emotion::Happy, 0.7).unwrap();
    assert_eq!(kps, model.rollout(&posed, &audio, &c.source_kp, &happy).unwrap());
}

#[test]
fn model_construction_is_seeded() {
    let a = S2l::new(&small().s2l, 9).unwrap();
    let b = S2l::new(&small().s2l, 9).unwrap();
    let c = S2l::new(&small().s2l, 10).unwrap();
    let vals = |m: &S2l| m.store.ids().map(|id| m.store.value(id).clone()).collect::<Vec<_>>();
    assert_eq!(vals(&a), vals(&b));
    assert_ne!(vals(&a), vals(&c));
    for kind in ModelKind::ALL {
        let m = AnyModel::new(kind, &small(), 1).unwrap();
        let again = AnyModel::from_config_json(kind, &m.config_json(), 1).unwrap();
        assert_eq!(again.store().num_weights(), m.store().num_weights());
        assert_eq!(kind.name().parse::<ModelKind>().unwrap(), kind);
    }
}

#[test]
fn renormalized_rows_have_unit_ears() {
    let c = clip(1);
    let mut row = landmark_row(&c.frames[5]);
    row.iter_mut().for_each(|v| *v = *v * 1.3 + 0.2);
    let f = renormalize_row(&row).unwrap();
    assert!((f.ear_distance() - 2.0).abs() < 1e-12);
    assert!(f.centroid().iter().all(|v| v.abs() < 1e-12));
    let back = renormalize_row(&landmark_row(&c.frames[5])).unwrap();
    let d = landmark_row(&back).iter().zip(landmark_row(&c.frames[5])).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    assert!(d < 1e-12);
}
