//! Measures seconds per optimizer step for each model at a given width.
//!
//! `cargo run --release --example train_throughput -- [width] [batch] [frames]`

use std::time::Instant;

use anyhow::Result;
use speechface::models::{AnyModel, ModelConfig, ModelKind};
use speechface::synthdata::{generate_clip, ClipSpec};
use speechface::training::{ClipData, TrainConfig, Trainer};

fn main() -> Result<()> {
    let args: Vec<usize> = std::env::args().skip(1).map(|a| a.parse()).collect::<Result<_, _>>()?;
    let width = args.first().copied().unwrap_or(128);
    let batch = args.get(1).copied().unwrap_or(1);
    let frames = args.get(2).copied().unwrap_or(90);
    let clips = (0..4)
        .map(|s| ClipData::from_record(&generate_clip(&ClipSpec { duration_secs: 3.0, ..ClipSpec::default() }, s)?))
        .collect::<speechface::Result<Vec<_>>>()?;
    let models = ModelConfig::with_widths(width, width, width);
    let cfg = TrainConfig { batch_size: batch, crop_frames: frames, ..TrainConfig::desk() };
    for kind in ModelKind::ALL {
        let model = AnyModel::new(kind, &models, 0)?;
        let weights = model.store().num_weights();
        let mut t = Trainer::new(model, 0, cfg.clone(), clips.clone())?;
        t.step()?;
        let n = 5;
        let start = Instant::now();
        for _ in 0..n {
            t.step()?;
        }
        let per = start.elapsed().as_secs_f64() / n as f64;
        println!("{kind:8} width {width:4} batch {batch:3} frames {frames:3} params {weights:8}  {per:.3} s/step");
    }
    Ok(())
}
