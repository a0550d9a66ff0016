//! Generates a small corpus with injected anomalies on disk, runs the data
//! filters and writes the filtered manifest and report.
//!
//! `cargo run --release --example corpus_and_filters -- [dir] [clips]`

use std::path::PathBuf;

use anyhow::Result;
use speechface::filtering::{run_filters, write_filter_outputs, FilterConfig, FILTERED_MANIFEST_FILE};
use speechface::synthdata::{build_corpus, Corpus, CorpusConfig, Split};

fn main() -> Result<()> {
    let mut args = std::env::args().skip(1);
    let dir = args.next().map(PathBuf::from).unwrap_or_else(|| std::env::temp_dir().join("speechface-corpus"));
    let clips = args.next().map(|a| a.parse()).transpose()?.unwrap_or(40);
    let cfg = CorpusConfig { clips, anomaly_rate: 0.15, min_duration: 2.0, max_duration: 3.0, ..CorpusConfig::default() };
    let entries = build_corpus(&cfg, &dir)?;
    let count = |s| entries.iter().filter(|e| e.split == s).count();
    println!(
        "{} clips in {} ({} train / {} val / {} test)",
        entries.len(),
        dir.display(),
        count(Split::Train),
        count(Split::Val),
        count(Split::Test)
    );

    let corpus = Corpus::open(&dir)?;
    let (kept, report) = run_filters(&corpus, &FilterConfig::default())?;
    for (entry, clip) in corpus.entries.iter().zip(&report.clips) {
        if let Some(kind) = entry.flags.anomaly {
            let failed: Vec<String> = clip
                .entries
                .iter()
                .filter(|e| !e.passed())
                .map(|e| format!("{:?} (statistic {:.2}, frames {:?})", e.filter, e.statistic, e.offending_frames))
                .collect();
            println!("{}: injected {kind:?}, failed {}", entry.id, failed.join(", "));
        }
    }
    println!("retained {} of {}; failures per filter {:?}", report.retained, report.total, report.failures);
    let out = dir.join(FILTERED_MANIFEST_FILE);
    write_filter_outputs(&out, &kept, &report)?;
    println!("wrote {}", out.display());
    Ok(())
}
