//! Trains all three models on a single clip and reports how closely each
//! reproduces it: S2L rollout M-P, L2L keypoint L1 and PoseGen angle error.
//!
//! `cargo run --release --example overfit_one_clip -- [steps] [width]`

use std::time::Instant;

use anyhow::Result;
use speechface::evaluation::mouth_metrics;
use speechface::models::{AnyModel, ModelConfig, ModelKind};
use speechface::synthdata::{generate_clip, ClipSpec, EmotionVector};
use speechface::training::{ClipData, TrainConfig, Trainer};

fn main() -> Result<()> {
    env_logger::init();
    let args: Vec<usize> = std::env::args().skip(1).map(|a| a.parse()).collect::<Result<_, _>>()?;
    let steps = args.first().copied().unwrap_or(2000);
    let width = args.get(1).copied().unwrap_or(64);
    let record = generate_clip(&ClipSpec { duration_secs: 3.0, ..ClipSpec::default() }, 11)?;
    let clip = ClipData::from_record(&record)?;
    let audio = clip.features();
    let models = ModelConfig::with_widths(width, width, width);
    let cfg = TrainConfig {
        batch_size: 1,
        crop_frames: clip.len(),
        warmup_steps: steps / 20,
        total_steps: steps,
        ..TrainConfig::desk()
    };
    for kind in ModelKind::ALL {
        let start = Instant::now();
        let mut t = Trainer::new(AnyModel::new(kind, &models, 0)?, 0, cfg.clone(), vec![clip.clone()])?;
        let mut first = None;
        let mut last = 0.0;
        while t.step < steps {
            let r = t.step()?;
            first.get_or_insert(r.loss);
            last = r.loss;
            if r.step % 250 == 0 {
                println!("  {kind} step {:5} loss {:.5}", r.step, r.loss);
            }
        }
        let secs = start.elapsed().as_secs_f64();
        let score = match &t.model {
            AnyModel::S2l(m) => {
                let pred = m.rollout(&record.source, &audio, &EmotionVector::neutral(), None, None)?;
                let teacher = m.rollout(&record.source, &audio, &EmotionVector::neutral(), Some(&record.frames), None)?;
                let free = mouth_metrics(&pred, &record.frames)?;
                let forced = mouth_metrics(&teacher, &record.frames)?;
                format!("rollout M-P {:.4} M-V {:.4} (teacher-forced M-P {:.4})", free.position, free.velocity, forced.position)
            }
            AnyModel::L2l(m) => {
                let kp = m.rollout(&record.posed_frames()?, &audio, &record.source_kp, &EmotionVector::neutral())?;
                let l1 = kp.iter().zip(&record.latents).map(|(a, b)| a.mean_l1(b)).sum::<f64>() / kp.len() as f64;
                format!("keypoint L1 {l1:.4}")
            }
            AnyModel::PoseGen(m) => {
                let rec = m.reconstruct(&audio, &record.poses)?;
                let err = rec
                    .iter()
                    .zip(&record.poses)
                    .map(|(a, b)| ((a.yaw - b.yaw).abs() + (a.pitch - b.pitch).abs() + (a.roll - b.roll).abs()) / 3.0)
                    .sum::<f64>()
                    / rec.len() as f64;
                format!("reconstruction angle MAE {err:.3}°")
            }
        };
        println!("{kind:8} {steps} steps in {secs:.0} s, loss {:.5} -> {last:.5}; {score}", first.unwrap_or(0.0));
    }
    Ok(())
}
