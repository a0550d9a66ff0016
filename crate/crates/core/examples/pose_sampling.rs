//! Trains the pose generator on a few clips, then draws several head-motion
//! trajectories for the same audio and compares them.
//!
//! `cargo run --release --example pose_sampling -- [steps] [samples]`

use anyhow::Result;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use speechface::filtering::filter_rotation;
use speechface::models::{AnyModel, ModelConfig, ModelKind};
use speechface::synthdata::{generate_clip, ClipSpec};
use speechface::training::{ClipData, TrainConfig, Trainer};

fn main() -> Result<()> {
    let args: Vec<usize> = std::env::args().skip(1).map(|a| a.parse()).collect::<Result<_, _>>()?;
    let steps = args.first().copied().unwrap_or(300);
    let samples = args.get(1).copied().unwrap_or(5);
    let clips: Vec<ClipData> = (0..16)
        .map(|s| ClipData::from_record(&generate_clip(&ClipSpec { duration_secs: 3.0, ..ClipSpec::default() }, 200 + s)?))
        .collect::<Result<_, _>>()?;
    let cfg = TrainConfig { batch_size: 8, crop_frames: 60, warmup_steps: steps / 20, total_steps: steps, ..TrainConfig::desk() };
    let model = AnyModel::new(ModelKind::PoseGen, &ModelConfig::with_widths(48, 48, 48), 0)?;
    let mut t = Trainer::new(model, 0, cfg, clips.clone())?;
    while t.step < steps {
        let r = t.step()?;
        if r.step % 100 == 0 {
            println!("step {:4} loss {:.4} kl {:.4}", r.step, r.loss, r.components["kl"]);
        }
    }
    let AnyModel::PoseGen(pg) = &t.model else { unreachable!() };
    let audio = clips[0].features();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for k in 0..samples {
        let (_, poses) = pg.sample(&audio, &mut rng, 1.0)?;
        let range = |f: fn(&speechface::geometry::HeadPose) -> f64| {
            let v: Vec<f64> = poses.iter().map(f).collect();
            (v.iter().cloned().fold(f64::INFINITY, f64::min), v.iter().cloned().fold(f64::NEG_INFINITY, f64::max))
        };
        let (yaw, pitch) = (range(|p| p.yaw), range(|p| p.pitch));
        let ok = filter_rotation(&poses, 45.0)?.passed();
        println!(
            "sample {k}: yaw {:+.1}..{:+.1}°, pitch {:+.1}..{:+.1}°, passes the 45° filter: {ok}",
            yaw.0, yaw.1, pitch.0, pitch.1
        );
    }
    Ok(())
}
