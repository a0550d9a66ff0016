//! Trains S2L and L2L on a 250-clip synthetic corpus (200 train / 25 val /
//! 25 test), compares them with the mean-face and mean-keypoint baselines on
//! the test split, then sweeps the "happy" intensity on one test clip.
//!
//! `cargo run --release --example desk_generalization -- [steps] [width] [batch] [crop] [eval_every]`

use std::time::Instant;

use anyhow::Result;
use speechface::evaluation::{emotion_direction, evaluate, intensity_sweep, spearman, Baselines, EvalReport};
use speechface::models::{AnyModel, ModelConfig, ModelKind};
use speechface::pipeline::Models;
use speechface::synthdata::{generate_corpus, ClipRecord, CorpusConfig, Emotion, Split};
use speechface::training::{Checkpoint, ClipData, TrainConfig, Trainer};

fn show(r: &EvalReport) {
    let a = &r.aggregate;
    let kp = a.kp_l1.map_or("-".into(), |v| format!("{v:.4}"));
    println!("  {:<10} M-P {:.4}  M-V {:.4}  F-P {:.4}  F-V {:.4}  KP-L1 {kp}", r.label, a.m_p, a.m_v, a.f_p, a.f_v);
}

fn main() -> Result<()> {
    env_logger::init();
    let args: Vec<usize> = std::env::args().skip(1).map(|a| a.parse()).collect::<Result<_, _>>()?;
    let arg = |i: usize, d: usize| args.get(i).copied().unwrap_or(d);
    let (steps, width, batch, crop, every) = (arg(0, 3000), arg(1, 64), arg(2, 16), arg(3, 60), arg(4, 1000));

    let start = Instant::now();
    let corpus = generate_corpus(&CorpusConfig { clips: 250, ..CorpusConfig::default() })?;
    let pick = |s: Split| -> Vec<ClipRecord> { corpus.iter().filter(|(k, _)| *k == s).map(|(_, c)| c.clone()).collect() };
    let (train, test) = (pick(Split::Train), pick(Split::Test));
    println!("corpus: {} train / {} test clips in {:.0} s", train.len(), test.len(), start.elapsed().as_secs_f64());

    let data: Vec<ClipData> = train.iter().map(ClipData::from_record).collect::<Result<_, _>>()?;
    let models = ModelConfig::with_widths(width, width, width);
    let cfg = TrainConfig { batch_size: batch, crop_frames: crop, warmup_steps: steps / 20, total_steps: steps, ..TrainConfig::desk() };
    let mut s2l = Trainer::new(AnyModel::new(ModelKind::S2l, &models, 0)?, 0, cfg.clone(), data.clone())?;
    let mut l2l = Trainer::new(AnyModel::new(ModelKind::L2l, &models, 0)?, 0, cfg, data)?;

    let base = Baselines::fit(&train)?;
    show(&base.evaluate(&test, "baseline")?);
    while s2l.step < steps {
        let t = Instant::now();
        let until = (s2l.step + every).min(steps);
        let (mut a, mut b) = (0.0, 0.0);
        while s2l.step < until {
            a = s2l.step()?.loss;
            b = l2l.step()?.loss;
        }
        let m = Models::from_checkpoints(Checkpoint::new(s2l.model.clone(), 0), None, Checkpoint::new(l2l.model.clone(), 0))?;
        println!("step {until}: loss s2l {a:.5} l2l {b:.5} ({:.0} s)", t.elapsed().as_secs_f64());
        show(&evaluate(&m, &test, "model")?);
    }

    let AnyModel::S2l(model) = &s2l.model else { unreachable!() };
    let dir = emotion_direction(&train, Emotion::Happy)?;
    let levels = [0.0, 0.25, 0.5, 0.75, 1.0];
    let clip = &test[0];
    let proj = intensity_sweep(model, &clip.source, &ClipData::from_record(clip)?.features(), Emotion::Happy, &levels, &dir)?;
    println!("happy direction {dir:.4?}; projections {proj:.5?}; rank correlation {:.3}", spearman(&levels, &proj)?);
    println!("total {:.0} s", start.elapsed().as_secs_f64());
    Ok(())
}
