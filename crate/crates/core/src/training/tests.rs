use ndarray::{arr2, Array2};

use super::*;
use crate::synthdata::{generate_clip, ClipSpec};

fn small_models() -> ModelConfig {
    ModelConfig::with_widths(12, 12, 12)
}

fn small_cfg() -> TrainConfig {
    TrainConfig {
        batch_size: 2,
        warmup_steps: 5,
        total_steps: 40,
        crop_frames: 12,
        ..TrainConfig::desk()
    }
}

fn clips(n: u64) -> Vec<ClipData> {
    (0..n)
        .map(|s| ClipData::from_record(&generate_clip(&ClipSpec { duration_secs: 1.0, ..ClipSpec::default() }, s).unwrap()).unwrap())
        .collect()
}

#[test]
fn weighted_l1_oracles() {
    let gt = Array2::<f64>::zeros((3, 308));
    assert_eq!(weighted_l1(&gt, &gt, &landmark_weights(2.0)).unwrap(), 0.0);
    let mut pred = gt.clone();
    // landmark 5, y coordinate
    pred[[1, 5 * 3 + 1]] = 0.1;
    let l = weighted_l1(&pred, &gt, &landmark_weights(2.0)).unwrap();
    assert!((l * gt.len() as f64 - 0.2).abs() < 1e-15);
    let l1 = weighted_l1(&pred, &gt, &landmark_weights(1.0)).unwrap();
    assert!((l1 * gt.len() as f64 - 0.1).abs() < 1e-15);
    // eye y coordinates are weighted too, eye x are not
    let w = landmark_weights(2.0);
    assert_eq!((w[204], w[205]), (1.0, 2.0));
    assert!(weighted_l1(&pred, &Array2::zeros((2, 308)), &w).is_err());
}

#[test]
fn velocity_oracles() {
    let ramp = |slope: f64| Array2::from_shape_fn((5, 1), |(t, _)| slope * t as f64);
    assert_eq!(velocity_loss(&ramp(1.0), &ramp(1.0), 1).unwrap(), 0.0);
    assert_eq!(velocity_loss(&ramp(1.0), &ramp(2.0), 1).unwrap(), 1.0);
    let shifted = ramp(1.0).mapv(|v| v + 3.0);
    assert_eq!(velocity_loss(&shifted, &ramp(1.0), 1).unwrap(), 0.0);
    assert!(velocity_loss(&ramp(1.0).slice(ndarray::s![..1, ..]).to_owned(), &ramp(1.0).slice(ndarray::s![..1, ..]).to_owned(), 1).is_err());
    // two interleaved clips
    let a = arr2(&[[0.0], [0.0], [1.0], [2.0]]);
    let b = arr2(&[[0.0], [0.0], [2.0], [2.0]]);
    assert_eq!(velocity_loss(&a, &b, 2).unwrap(), 0.5);
}

#[test]
fn kl_oracles() {
    assert_eq!(kl_loss(&arr2(&[[0.0, 0.0]]), &arr2(&[[1.0, 1.0]])).unwrap(), 0.0);
    assert_eq!(kl_loss(&arr2(&[[1.0]]), &arr2(&[[1.0]])).unwrap(), 0.5);
    assert!(kl_loss(&arr2(&[[0.0]]), &arr2(&[[0.0]])).is_err());
    // graph form agrees
    let mu = arr2(&[[0.3, -1.2], [0.5, 0.1]]);
    let logvar = arr2(&[[0.2, -0.7], [1.1, 0.0]]);
    let mut g = Graph::new(false);
    let m = g.input(mu.clone());
    let lv = g.input(logvar.clone());
    let k = kl_graph(&mut g, m, lv);
    let plain = kl_loss(&mu, &logvar.mapv(|l| (0.5 * l).exp())).unwrap();
    assert!((g.scalar(k) - plain).abs() < 1e-12);
    assert!(plain >= 0.0);
}

#[test]
fn graph_losses_match_plain_versions() {
    let pred = Array2::from_shape_fn((6, 308), |(r, c)| ((r * 31 + c * 7) % 13) as f64 / 13.0);
    let gt = Array2::from_shape_fn((6, 308), |(r, c)| ((r * 17 + c * 5) % 11) as f64 / 11.0);
    let mut g = Graph::new(false);
    let p = g.input(pred.clone());
    let w = landmark_weights(2.0);
    let a = weighted_l1_graph(&mut g, p, &gt, &w).unwrap();
    let v = velocity_graph(&mut g, p, &gt, 2).unwrap();
    assert!((g.scalar(a) - weighted_l1(&pred, &gt, &w).unwrap()).abs() < 1e-12);
    assert!((g.scalar(v) - velocity_loss(&pred, &gt, 2).unwrap()).abs() < 1e-12);
}

#[test]
fn lr_schedule_anchor_points_and_continuity() {
    let cfg = TrainConfig::desk();
    assert_eq!(lr_schedule(0, &cfg), 1e-5);
    assert_eq!(lr_schedule(cfg.warmup_steps, &cfg), 5e-4);
    assert_eq!(lr_schedule(cfg.total_steps, &cfg), 0.0);
    assert_eq!(lr_schedule(cfg.total_steps + 10, &cfg), 0.0);
    let up = (cfg.peak_lr - cfg.start_lr) / cfg.warmup_steps as f64;
    let down = std::f64::consts::PI * cfg.peak_lr / (2.0 * (cfg.total_steps - cfg.warmup_steps) as f64);
    for s in 0..cfg.total_steps {
        let d = (lr_schedule(s + 1, &cfg) - lr_schedule(s, &cfg)).abs();
        let limit = if s < cfg.warmup_steps { up } else { down };
        assert!(d <= limit * (1.0 + 1e-9), "step {s}: {d} > {limit}");
    }
}

#[test]
fn config_validation() {
    assert!(TrainConfig::desk().validate().is_ok());
    assert!(TrainConfig::paper().validate().is_ok());
    assert!(TrainConfig { warmup_steps: 10, total_steps: 10, ..TrainConfig::desk() }.validate().is_err());
    assert!(TrainConfig { kl_weight: -1.0, ..TrainConfig::desk() }.validate().is_err());
}

#[test]
fn crops_are_time_major_and_use_previous_frames() {
    let data = clips(2);
    let crops = vec![Crop { clip: 0, start: 0, len: 4 }, Crop { clip: 1, start: 3, len: 4 }];
    let b = s2l_batch(&data, &crops, &[], false);
    assert_eq!(b.target.dim(), (8, 308));
    // clip 0 step 0: previous is the source face
    assert_eq!(b.prev.row(0), data[0].source.row(0));
    // clip 1 step 0: previous is frame 2
    assert_eq!(b.prev.row(1), data[1].landmarks.row(2));
    assert_eq!(b.target.row(2 * 2 + 1), data[1].landmarks.row(5));
    let l = l2l_batch(&data, &crops, &[]);
    assert_eq!(l.prev.row(0), data[0].source_kp.row(0));
    assert_eq!(l.prev.row(3), data[1].latents.row(3));
}

#[test]
fn checkpoint_round_trip_is_bit_exact() {
    let dir = tempfile::tempdir().unwrap();
    for kind in ModelKind::ALL {
        let model = AnyModel::new(kind, &small_models(), 4).unwrap();
        let mut t = Trainer::new(model, 4, small_cfg(), clips(2)).unwrap();
        for _ in 0..3 {
            t.step().unwrap();
        }
        let ck = t.checkpoint(Some("desk"));
        let path = dir.path().join(format!("{kind}.ckpt"));
        ck.save(&path).unwrap();
        let back = Checkpoint::load(&path).unwrap();
        assert_eq!(back.step, 3);
        assert_eq!(back.profile.as_deref(), Some("desk"));
        assert_eq!(back.model.store(), t.model.store());
        assert_eq!(back.optimizer.as_ref(), Some(&t.adam));
        assert_eq!(back.to_bytes(), ck.to_bytes());
    }
    assert!(matches!(Checkpoint::load(&dir.path().join("missing.ckpt")), Err(Error::Config(_))));
    std::fs::write(dir.path().join("junk.ckpt"), b"not a checkpoint at all").unwrap();
    assert!(Checkpoint::load(&dir.path().join("junk.ckpt")).is_err());
}

#[test]
fn zero_steps_leave_initialization_and_training_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let model = AnyModel::new(ModelKind::L2l, &small_models(), 1).unwrap();
    let mut t = Trainer::new(model, 1, small_cfg(), clips(2)).unwrap();
    let init = t.model.store().clone();
    let out = run_trainer(&mut t, 0, dir.path(), None).unwrap();
    assert_eq!(out.steps, 0);
    assert_eq!(Checkpoint::load(&out.checkpoint).unwrap().model.store(), &init);

    let run = |d: &Path| {
        let mut cfg = small_cfg();
        cfg.total_steps = 6;
        train_model(ModelKind::S2l, clips(2), &small_models(), &cfg, d, None).unwrap()
    };
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let (ra, rb) = (run(a.path()), run(b.path()));
    assert_eq!(std::fs::read(&ra.checkpoint).unwrap(), std::fs::read(&rb.checkpoint).unwrap());
    let m = read_metrics(&ra.metrics).unwrap();
    assert_eq!(m.len(), 6);
    assert!(m.iter().all(|r| r.loss.is_finite() && r.components.contains_key("velocity")));
}

#[test]
fn non_finite_loss_aborts_with_diagnostic_checkpoint() {
    let dir = tempfile::tempdir().unwrap();
    let mut model = AnyModel::new(ModelKind::L2l, &small_models(), 2).unwrap();
    let id = model.store().find("l2l.head.b").unwrap();
    model.store_mut().value_mut(id).fill(f64::NAN);
    let mut t = Trainer::new(model, 2, small_cfg(), clips(1)).unwrap();
    let err = run_trainer(&mut t, 5, dir.path(), None).unwrap_err();
    assert!(matches!(err, Error::Diverged { step: 0, .. }));
    assert!(dir.path().join("l2l.diverged.ckpt").exists());
}

#[test]
fn small_gradient_check() {
    let data = clips(1);
    let crops = vec![Crop { clip: 0, start: 2, len: 6 }];
    let cfg = small_cfg();
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    for kind in ModelKind::ALL {
        let mut model = AnyModel::new(kind, &small_models(), 3).unwrap();
        model.fit_audio_norm(&stacked_audio(&data));
        let batch = match kind {
            ModelKind::S2l => Batch::S2l(s2l_batch(&data, &crops, &[], false)),
            ModelKind::PoseGen => Batch::PoseGen(posegen_batch(&data, &crops, &[], 64, &mut rng)),
            ModelKind::L2l => Batch::L2l(l2l_batch(&data, &crops, &[])),
        };
        let samples = gradient_check(&mut model, &batch, &cfg, 20, 1e-6, 1e-6, 7).unwrap();
        for s in samples {
            assert!(s.rel_error < 1e-3, "{kind}: {s:?}");
        }
    }
}
