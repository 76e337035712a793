//! Trains a short run into a directory and renders its CSV tables and SVG
//! charts.
//!
//! cargo run --release --example render_report -- [out_dir]

use std::path::PathBuf;

use creditlab::io::report::report_dir;
use creditlab::io::{train_to_dir, RunConfigFile};
use creditlab::trainer::TrainConfig;

fn main() -> creditlab::Result<()> {
    let root = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| std::env::temp_dir().join("creditlab_report"));
    let mut cfg = RunConfigFile {
        train: TrainConfig { total_steps: 150, ..TrainConfig::default() },
        ..RunConfigFile::default()
    };
    cfg.run.dump_interval = 0;
    let run = root.join("run");
    let summary = train_to_dir(&cfg, &run)?;
    for entry in &summary.manifest {
        println!("{:<24} {:>8} bytes  {}", entry.file, entry.bytes, &entry.sha256[..16]);
    }
    report_dir(&run, &root.join("report"))?;
    println!("charts under {}", root.join("report").display());
    Ok(())
}
