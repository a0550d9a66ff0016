//! End to end: builds a small corpus, trains the three models briefly,
//! animates the template face from a synthetic utterance with a happy
//! expression, two injected blinks and a gaze shift, and renders the frames.
//!
//! `cargo run --release --example animate -- [out_dir] [steps]`

use std::path::PathBuf;

use anyhow::Result;
use speechface::models::{ModelConfig, ModelKind};
use speechface::pipeline::{self, infer, render, template_source, write_frames, write_inference, Edits, InferenceRequest, Models, PipelineConfig, PoseSource, Profile};
use speechface::synthdata::{generate_clip, ClipSpec, CorpusConfig, Emotion, EmotionVector, LatentOracle};
use speechface::training::TrainConfig;

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let mut args = std::env::args().skip(1);
    let out = args.next().map(PathBuf::from).unwrap_or_else(|| std::env::temp_dir().join("speechface-animate"));
    let steps = args.next().map(|a| a.parse()).transpose()?.unwrap_or(300);

    let mut cfg = PipelineConfig::for_profile(Profile::Desk);
    cfg.paths.corpus = out.join("corpus");
    cfg.paths.checkpoints = out.join("checkpoints");
    cfg.corpus = CorpusConfig { clips: 40, min_duration: 2.0, max_duration: 3.0, ..CorpusConfig::default() };
    cfg.models = ModelConfig::with_widths(32, 32, 32);
    cfg.train = TrainConfig { batch_size: 8, crop_frames: 45, warmup_steps: steps / 20, total_steps: steps, ..TrainConfig::desk() };
    pipeline::gen_data(&cfg)?;
    pipeline::filter_corpus(&cfg)?;
    for kind in ModelKind::ALL {
        let r = pipeline::train(&cfg, kind)?;
        println!("{kind}: loss {:.4} -> {:.4}", r.first_loss.unwrap_or(f64::NAN), r.final_loss.unwrap_or(f64::NAN));
    }
    let models = Models::load(&cfg.paths.checkpoints, true)?;

    let speech = generate_clip(&ClipSpec { duration_secs: 3.0, ..ClipSpec::default() }, 77)?;
    let source = template_source()?;
    let source_pose = speech.poses[0];
    let oracle = LatentOracle::new(cfg.corpus.oracle_seed);
    let mut req = InferenceRequest::new(
        source,
        source_pose,
        speech.waveform.clone(),
        PoseSource::Generated,
        EmotionVector::one_hot(Emotion::Happy, 0.8)?,
        cfg.seed,
        &oracle,
    )?;
    req.edits = Edits { blinks: vec![20, 60], gaze: [0.01, 0.0], ..Edits::default() };
    let result = infer(&req, &models)?;
    let opening: Vec<String> = result.s2l.iter().step_by(10).map(|f| format!("{:.3}", f.face()[62][1] - f.face()[66][1])).collect();
    println!("{} frames; inner-lip gap every 10th frame: {}", result.latents.len(), opening.join(" "));

    let dir = out.join("result");
    write_inference(&result, &dir)?;
    let images = render(Some(&result.posed), Some(&result.latents), 256)?;
    let manifest = write_frames(&images, &dir.join("frames"))?;
    println!("wrote {} frames of {}px to {}", manifest.frames, manifest.size, dir.join("frames").display());
    Ok(())
}
