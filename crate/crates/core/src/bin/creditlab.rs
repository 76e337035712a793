use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use creditlab::evaluation::Decoding;
use creditlab::io::{self, report, AnalyzeOptions, OutputDir};
use creditlab::{LabError, Result};

#[derive(Parser)]
#[command(name = "creditlab", version, about = "Token-level credit assignment laboratory")]
struct Cli {
    /// Default root for output directories.
    #[arg(long, global = true, env = io::OUT_ROOT_ENV, default_value = "runs")]
    out_root: PathBuf,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train a policy from a JSON run config.
    Train {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Overrides the config seed.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Estimate Pass@k and Avg@k for a checkpoint.
    Eval {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        tasks: PathBuf,
        #[arg(long, default_value_t = 32)]
        n: usize,
        /// Comma-separated k values.
        #[arg(long, value_delimiter = ',', default_value = "1,2,4,8,16,32")]
        k: Vec<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 0.6)]
        temperature: f64,
        #[arg(long, default_value_t = 0.95)]
        top_p: f64,
    },
    /// Entropy/polarity analysis of a JSONL rollout log.
    Analyze {
        #[arg(long)]
        log: PathBuf,
        #[arg(long, default_value_t = 0.2)]
        alpha: f64,
        #[arg(long, default_value_t = 2.0)]
        phi: f64,
        #[arg(long, default_value_t = 32)]
        bins: usize,
        /// Vocabulary size; sets the histogram range to ln(V).
        #[arg(long)]
        vocab: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Render CSV tables and SVG charts from a run or analysis directory.
    Report {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn resolve(out: Option<PathBuf>, root: &Path, name: &str) -> PathBuf {
    out.unwrap_or_else(|| root.join(name))
}

fn dispatch(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Train { config, out, seed } => {
            let mut cfg = io::parse_config(&config)?;
            if let Some(seed) = seed {
                cfg.train.seed = seed;
            }
            let dir = out
                .or_else(|| cfg.run.out_dir.clone().map(PathBuf::from))
                .unwrap_or_else(|| cli.out_root.join(format!("{}-seed{}", cfg.train.mode, cfg.train.seed)));
            let summary = io::train_to_dir(&cfg, &dir)?;
            let last = summary.output.metrics.last();
            println!(
                "trained {} steps ({} skipped); final solve rate {:.4}; wrote {}",
                summary.output.metrics.len(),
                summary.output.skipped_steps,
                last.map_or(f64::NAN, |m| m.solve_rate),
                dir.display()
            );
        }
        Command::Eval { checkpoint, tasks, n, k, out, seed, temperature, top_p } => {
            let dir = resolve(out, &cli.out_root, "eval");
            let report = io::eval_to_dir(&checkpoint, &tasks, n, &k, Decoding { temperature, top_p }, seed, &dir)?;
            for p in &report.curve {
                println!("k={:<4} pass@k={:.4} avg@k={:.4}", p.k, p.pass_at_k, p.avg_at_k);
            }
        }
        Command::Analyze { log, alpha, phi, bins, vocab, out } => {
            let dir = resolve(out, &cli.out_root, "analysis");
            let groups = io::ingest_rollout_log(&log)?;
            let opts = AnalyzeOptions { alpha, phi, bins, vocab_size: vocab, ..AnalyzeOptions::default() };
            let bundle = io::analyze(&groups, opts)?;
            let mut files = OutputDir::create(&dir)?;
            files.write("analysis.json", serde_json::to_string_pretty(&bundle).expect("bundle serialises").as_bytes())?;
            files.write("shaped.jsonl", io::to_jsonl(&bundle.shaped).as_bytes())?;
            files.write("entropy_histogram.csv", bundle.histogram_csv().as_bytes())?;
            files.write("quadrant_shares.csv", bundle.quadrant_csv().as_bytes())?;
            files.finish()?;
            println!(
                "{} groups, {} tokens; shares PHR {:.4} PLR {:.4} NLR {:.4} NHR {:.4}; proxy CMI {:.5}",
                bundle.groups,
                bundle.tokens,
                bundle.quadrant_shares[0],
                bundle.quadrant_shares[1],
                bundle.quadrant_shares[2],
                bundle.quadrant_shares[3],
                bundle.proxy_cmi
            );
        }
        Command::Report { input, out } => {
            let dir = resolve(out, &cli.out_root, "report");
            report::report_dir(&input, &dir)?;
            println!("wrote {}", dir.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error[{}]: {e}", e.category());
            ExitCode::from(exit_byte(&e))
        }
    }
}

fn exit_byte(e: &LabError) -> u8 {
    u8::try_from(e.exit_code()).unwrap_or(1)
}
