use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use speechface::audiofeat::write_wav;
use speechface::models::ModelConfig;
use speechface::pipeline::{PipelineConfig, Profile};
use speechface::synthdata::{generate_clip, ClipSpec, CorpusConfig};
use speechface::training::TrainConfig;

fn run(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_speechface")).current_dir(dir).args(args).output().unwrap()
}

fn ok(dir: &Path, args: &[&str]) -> String {
    let out = run(dir, args);
    assert!(out.status.success(), "{args:?} failed: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn fails(dir: &Path, args: &[&str]) -> String {
    let out = run(dir, args);
    assert!(!out.status.success(), "{args:?} unexpectedly succeeded");
    let err = String::from_utf8(out.stderr).unwrap();
    assert!(!err.trim().is_empty());
    err
}

fn small_config(dir: &Path) {
    let mut cfg = PipelineConfig::for_profile(Profile::Desk);
    cfg.corpus = CorpusConfig { clips: 10, min_duration: 1.0, max_duration: 1.5, anomaly_rate: 0.1, ..CorpusConfig::default() };
    cfg.models = ModelConfig::with_widths(8, 8, 8);
    cfg.train = TrainConfig { batch_size: 2, crop_frames: 12, warmup_steps: 2, total_steps: 6, ..TrainConfig::desk() };
    cfg.infer.render_size = 64;
    fs::write(dir.join("config.toml"), cfg.to_toml().unwrap()).unwrap();
}

#[test]
fn full_pipeline_through_the_binary() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    small_config(d);
    let c = ["--config", "config.toml"];
    let with = |extra: &[&'static str]| -> Vec<&'static str> { c.iter().copied().chain(extra.iter().copied()).collect() };

    assert!(ok(d, &with(&["gen-data"])).contains("wrote 10 clips"));
    assert!(ok(d, &with(&["filter"])).contains("retained 9 of 10"));
    for m in ["s2l", "posegen", "l2l"] {
        let out = ok(d, &with(&["train", m, "--steps", "4"]));
        assert!(out.contains("4 steps"), "{out}");
        assert!(d.join(format!("runs/checkpoints/{m}.ckpt")).exists());
    }

    let clip = generate_clip(&ClipSpec { duration_secs: 1.0, ..ClipSpec::default() }, 4).unwrap();
    write_wav(&d.join("speech.wav"), &clip.waveform).unwrap();
    let infer = with(&["infer", "--audio", "speech.wav", "--emotion", "happy", "--intensity", "0.5", "--seed", "3", "--blink", "10"]);
    assert!(ok(d, &infer).contains("wrote 30 frames"));
    for f in ["s2l_landmarks.jsonl", "landmarks.jsonl", "poses.jsonl", "posed_landmarks.jsonl", "latents.jsonl", "frames/manifest.json"] {
        assert!(d.join("out").join(f).exists(), "{f}");
    }
    let first = fs::read(d.join("out/latents.jsonl")).unwrap();
    ok(d, &infer);
    assert_eq!(fs::read(d.join("out/latents.jsonl")).unwrap(), first);

    let fixed = ok(d, &with(&["infer", "--audio", "speech.wav", "--pose-mode", "fixed", "--out", "fixed", "--no-render"]));
    assert!(fixed.contains("30 frames"));
    assert!(!d.join("fixed/frames").exists());
    let transfer = with(&["infer", "--audio", "speech.wav", "--pose-mode", "transfer:out/poses.jsonl", "--out", "moved", "--no-render"]);
    ok(d, &transfer);
    assert_eq!(fs::read(d.join("moved/poses.jsonl")).unwrap(), fs::read(d.join("out/poses.jsonl")).unwrap());

    let r = ok(d, &with(&["render", "--landmarks", "out/posed_landmarks.jsonl", "--out", "drawn", "--size", "64"]));
    assert!(r.contains("rendered 30 frames"));
    assert_eq!(fs::read_dir(d.join("drawn")).unwrap().count(), 31);

    let e = ok(d, &with(&["eval", "--max-clips", "1"]));
    assert!(e.contains("model") && e.contains("mean-baseline"), "{e}");
    assert!(d.join("out/eval_report.json").exists());
}

#[test]
fn config_precedence_and_show_config() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    fs::write(d.join("c.toml"), "seed = 5\n[infer]\nintensity = 0.3\n").unwrap();
    let shown = ok(d, &["--config", "c.toml", "show-config"]);
    assert!(shown.contains("seed = 5") && shown.contains("intensity = 0.3"), "{shown}");
    let over = ok(d, &["--config", "c.toml", "--seed", "9", "--intensity", "0.8", "--profile", "paper", "show-config"]);
    assert!(over.contains("seed = 9") && over.contains("intensity = 0.8") && over.contains("profile = \"paper\""), "{over}");
}

#[test]
fn bad_input_exits_nonzero_with_diagnostics() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    fails(d, &["--profile", "huge", "show-config"]);
    fails(d, &["--emotion", "smug", "show-config"]);
    fails(d, &["--intensity", "1.5", "show-config"]);
    fails(d, &["--pose-mode", "transfer:", "show-config"]);
    fs::write(d.join("typo.toml"), "[train]\nbatch_sise = 3\n").unwrap();
    assert!(fails(d, &["--config", "typo.toml", "show-config"]).contains("batch_sise"));
    fails(d, &["--config", "missing.toml", "show-config"]);
    assert!(fails(d, &["infer"]).contains("audio"));
    fails(d, &["train", "s2l"]);
    fails(d, &["render"]);
    fs::write(d.join("bad.wav"), b"not a wave file").unwrap();
    fails(d, &["infer", "--audio", "bad.wav"]);
}
