//! Computes MFCC features for a WAV file (or a synthetic utterance), aligns
//! them to the 30 fps video clock and shows the effect of a seeded
//! augmentation.
//!
//! `cargo run --release --example audio_features -- [input.wav] [augmented.wav]`

use std::path::PathBuf;

use anyhow::{Context, Result};
use speechface::audiofeat::{augment, compute_mfcc, draw_augment, read_wav, video_features, write_wav, AugmentSpec, N_MFCC};
use speechface::synthdata::{generate_clip, ClipSpec};

fn main() -> Result<()> {
    let args: Vec<PathBuf> = std::env::args().skip(1).map(PathBuf::from).collect();
    let wave = match args.first() {
        Some(p) => read_wav(p).with_context(|| format!("reading {}", p.display()))?,
        None => generate_clip(&ClipSpec { duration_secs: 2.0, ..ClipSpec::default() }, 5)?.waveform,
    };
    println!("{:.2} s at {} Hz", wave.duration_secs(), wave.sample_rate());

    let feats = compute_mfcc(&wave)?;
    println!("{} frames x {N_MFCC} coefficients at {:.0} fps", feats.frames(), feats.frame_rate());
    let c0: Vec<String> = (0..feats.frames()).step_by(6).map(|t| format!("{:.1}", feats.frame(t)[0])).collect();
    println!("c0 every 6th frame: {}", c0.join(" "));
    let aligned = video_features(&wave, feats.frames() + 1)?;
    println!("aligned to {} video frames (last frame repeated)", aligned.frames());

    let spec = AugmentSpec::default();
    let draw = draw_augment(&spec, 7)?;
    println!("augmentation seed 7: {draw:?}");
    let aug = augment(&wave, &spec, 7)?;
    let moved = compute_mfcc(&aug)?;
    let diff = feats.data().iter().zip(moved.data()).map(|(a, b)| (a - b).abs()).sum::<f64>() / feats.data().len() as f64;
    println!("mean absolute feature change {diff:.3}");
    assert_eq!(aug, augment(&wave, &spec, 7)?, "same seed, same waveform");
    if let Some(out) = args.get(1) {
        write_wav(out, &aug)?;
        println!("wrote {}", out.display());
    }
    Ok(())
}
