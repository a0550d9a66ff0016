use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use speechface::evaluation::{evaluate, Baselines, EvalReport};
use speechface::io;
use speechface::models::ModelKind;
use speechface::pipeline::{self, render, write_frames, Models, PipelineConfig, PoseMode, Profile};
use speechface::synthdata::{Emotion, Split};

/// Speech-driven facial landmark and latent keypoint animation.
#[derive(Parser, Debug)]
#[command(name = "speechface", version)]
struct Cli {
    /// TOML configuration file layered over the profile defaults.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Run seed (training order, pose sampling; corpus seed for gen-data).
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true, value_parser = parse::<Profile>)]
    profile: Option<Profile>,
    #[arg(long, global = true, value_parser = parse::<Emotion>)]
    emotion: Option<Emotion>,
    /// Emotion intensity in [0, 1].
    #[arg(long, global = true)]
    intensity: Option<f64>,
    /// generated | fixed | transfer:<pose file>
    #[arg(long = "pose-mode", global = true, value_parser = parse::<PoseMode>)]
    pose_mode: Option<PoseMode>,
    /// Raise the log level (-v debug, -vv trace).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate the synthetic corpus.
    GenData {
        #[arg(long)]
        corpus: Option<PathBuf>,
        #[arg(long)]
        clips: Option<usize>,
    },
    /// Run the data filters and write the filtered manifest.
    Filter {
        #[arg(long)]
        corpus: Option<PathBuf>,
    },
    /// Train one model on the training split.
    Train {
        #[arg(value_parser = parse::<ModelKind>)]
        model: ModelKind,
        #[command(flatten)]
        dirs: Dirs,
        #[arg(long)]
        steps: Option<usize>,
        #[arg(long)]
        batch_size: Option<usize>,
    },
    /// Animate a source face from an audio file.
    Infer {
        #[arg(long)]
        audio: Option<PathBuf>,
        /// Landmark file whose first frame is the source face.
        #[arg(long)]
        source: Option<PathBuf>,
        #[command(flatten)]
        dirs: Dirs,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        size: Option<u32>,
        #[arg(long)]
        no_render: bool,
        /// Blink centred on this frame; repeatable.
        #[arg(long = "blink")]
        blinks: Vec<usize>,
        /// Gaze offset as `dx,dy`.
        #[arg(long, value_parser = parse_pair, allow_hyphen_values = true)]
        gaze: Option<[f64; 2]>,
    },
    /// Render a landmark and/or latent sequence to PNG frames.
    Render {
        #[arg(long)]
        landmarks: Option<PathBuf>,
        #[arg(long)]
        latents: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        size: Option<u32>,
    },
    /// Evaluate trained checkpoints on a corpus split.
    Eval {
        #[command(flatten)]
        dirs: Dirs,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        max_clips: Option<usize>,
    },
    /// Print the resolved configuration as TOML.
    ShowConfig,
}

#[derive(Args, Debug)]
struct Dirs {
    #[arg(long)]
    corpus: Option<PathBuf>,
    #[arg(long)]
    checkpoints: Option<PathBuf>,
}

fn parse<T: std::str::FromStr<Err = speechface::Error>>(s: &str) -> Result<T, String> {
    s.parse().map_err(|e: speechface::Error| e.to_string())
}

fn parse_pair(s: &str) -> Result<[f64; 2], String> {
    let (a, b) = s.split_once(',').ok_or("expected dx,dy")?;
    let f = |v: &str| v.trim().parse::<f64>().map_err(|e| e.to_string());
    Ok([f(a)?, f(b)?])
}

fn apply_dirs(cfg: &mut PipelineConfig, d: &Dirs) {
    if let Some(p) = &d.corpus {
        cfg.paths.corpus = p.clone();
    }
    if let Some(p) = &d.checkpoints {
        cfg.paths.checkpoints = p.clone();
    }
}

fn resolve(cli: &Cli) -> Result<PipelineConfig> {
    let mut cfg = PipelineConfig::load(cli.config.as_deref(), cli.profile)
        .with_context(|| format!("loading configuration for profile {:?}", cli.profile.unwrap_or_default()))?;
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if let Some(e) = cli.emotion {
        cfg.infer.emotion = e;
    }
    if let Some(i) = cli.intensity {
        cfg.infer.intensity = i;
    }
    if let Some(m) = &cli.pose_mode {
        cfg.infer.pose_mode = m.clone();
    }
    match &cli.command {
        Command::GenData { corpus, clips } => {
            if let Some(p) = corpus {
                cfg.paths.corpus = p.clone();
            }
            if let Some(n) = clips {
                cfg.corpus.clips = *n;
            }
            if let Some(s) = cli.seed {
                cfg.corpus.seed = s;
            }
        }
        Command::Filter { corpus } => {
            if let Some(p) = corpus {
                cfg.paths.corpus = p.clone();
            }
        }
        Command::Train { dirs, steps, batch_size, .. } => {
            apply_dirs(&mut cfg, dirs);
            if let Some(n) = steps {
                cfg.train.total_steps = *n;
                cfg.train.warmup_steps = cfg.train.warmup_steps.min(n.saturating_sub(1));
            }
            if let Some(b) = batch_size {
                cfg.train.batch_size = *b;
            }
        }
        Command::Infer { audio, source, dirs, out, size, no_render, blinks, gaze } => {
            apply_dirs(&mut cfg, dirs);
            if let Some(a) = audio {
                cfg.infer.audio = Some(a.clone());
            }
            if let Some(s) = source {
                cfg.infer.source = Some(s.clone());
            }
            if let Some(o) = out {
                cfg.paths.output = o.clone();
            }
            if let Some(s) = size {
                cfg.infer.render_size = *s;
            }
            if *no_render {
                cfg.infer.render = false;
            }
            if !blinks.is_empty() {
                cfg.infer.edits.blinks = blinks.clone();
            }
            if let Some(g) = gaze {
                cfg.infer.edits.gaze = *g;
            }
        }
        Command::Render { out, size, .. } => {
            if let Some(o) = out {
                cfg.paths.output = o.clone();
            }
            if let Some(s) = size {
                cfg.infer.render_size = *s;
            }
        }
        Command::Eval { dirs, out, max_clips } => {
            apply_dirs(&mut cfg, dirs);
            if let Some(o) = out {
                cfg.paths.output = o.clone();
            }
            if max_clips.is_some() {
                cfg.eval.max_clips = *max_clips;
            }
        }
        Command::ShowConfig => {}
    }
    cfg.validate().context("invalid configuration after command-line overrides")?;
    Ok(cfg)
}

fn print_report(r: &EvalReport) {
    let a = &r.aggregate;
    let kp = a.kp_l1.map_or("-".to_string(), |v| format!("{v:.5}"));
    println!(
        "{:<12} clips {:>3}  M-P {:.5}  M-V {:.5}  F-P {:.5}  F-V {:.5}  KP-L1 {kp}",
        r.label, r.clip_count, a.m_p, a.m_v, a.f_p, a.f_v
    );
}

fn run(cli: Cli) -> Result<()> {
    let cfg = resolve(&cli)?;
    match &cli.command {
        Command::GenData { .. } => {
            let entries = pipeline::gen_data(&cfg).context("generating corpus")?;
            println!("wrote {} clips to {}", entries.len(), cfg.paths.corpus.display());
        }
        Command::Filter { .. } => {
            let r = pipeline::filter_corpus(&cfg).context("filtering corpus")?;
            println!("retained {} of {} clips ({} removed)", r.retained, r.total, r.removed);
        }
        Command::Train { model, .. } => {
            let out = pipeline::train(&cfg, *model).with_context(|| format!("training {model}"))?;
            println!(
                "{model}: {} steps, loss {:.5} -> {:.5}; checkpoint {}",
                out.steps,
                out.first_loss.unwrap_or(f64::NAN),
                out.final_loss.unwrap_or(f64::NAN),
                out.checkpoint.display()
            );
        }
        Command::Infer { .. } => {
            let out = pipeline::run_inference(&cfg).context("running inference")?;
            println!("wrote {} frames to {}", out.latents.len(), cfg.paths.output.display());
        }
        Command::Render { landmarks, latents, .. } => {
            if landmarks.is_none() && latents.is_none() {
                bail!("render needs --landmarks and/or --latents");
            }
            let lm = landmarks.as_deref().map(io::read_landmarks).transpose()?.map(|(f, _)| f);
            let kp = latents.as_deref().map(io::read_latents).transpose()?;
            let images = render(lm.as_deref(), kp.as_deref(), cfg.infer.render_size)?;
            let m = write_frames(&images, &cfg.paths.output)?;
            println!("rendered {} frames to {}", m.frames, cfg.paths.output.display());
        }
        Command::Eval { .. } => {
            let corpus = pipeline::open_corpus(&cfg)?;
            let limit = cfg.eval.max_clips.unwrap_or(usize::MAX);
            let clips = corpus
                .split(cfg.eval.split)
                .take(limit)
                .map(|e| corpus.load_clip(e))
                .collect::<speechface::Result<Vec<_>>>()?;
            if clips.is_empty() {
                bail!("no clips in the {:?} split of {}", cfg.eval.split, cfg.paths.corpus.display());
            }
            let models = Models::load(&cfg.paths.checkpoints, false).context("loading checkpoints")?;
            let report = evaluate(&models, &clips, "model")?;
            std::fs::create_dir_all(&cfg.paths.output).with_context(|| format!("creating {}", cfg.paths.output.display()))?;
            report.write(&cfg.paths.output.join("eval_report.json"))?;
            print_report(&report);
            if cfg.eval.baselines {
                let train = corpus
                    .split(Split::Train)
                    .map(|e| corpus.load_clip(e))
                    .collect::<speechface::Result<Vec<_>>>()?;
                let base = Baselines::fit(&train)?.evaluate(&clips, "mean-baseline")?;
                base.write(&cfg.paths.output.join("eval_baselines.json"))?;
                print_report(&base);
            }
        }
        Command::ShowConfig => print!("{}", cfg.to_toml()?),
    }
    Ok(())
}

fn main() {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "info",
        1 => "debug",
        _ => "trace",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    if let Err(e) = run(cli) {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}
