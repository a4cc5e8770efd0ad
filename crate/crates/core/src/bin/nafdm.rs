use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};

use nafdm::channel::subchannel_matrix;
use nafdm::ici::{correlation_matrix, truncate_correlation, write_magnitude_grid};
use nafdm::sim::{emit_default, parse_config_file, run_suite, write_csv, RunOptions};
use nafdm::{Alpha, WaveformConfig};

#[derive(Parser)]
#[command(name = "nafdm", version, about = "nAFDM link-level simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a suite of BER/SE simulations and write the results as CSV.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Overrides the suite's base seed.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        workers: Option<usize>,
        /// Comma-separated run names or indices.
        #[arg(long, value_delimiter = ',')]
        runs: Option<Vec<String>>,
    },
    /// Write |C_alpha| (optionally pruned to D entries per row) as a text grid.
    DumpIci {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        alpha_num: u32,
        #[arg(long)]
        alpha_den: u32,
        #[arg(long, default_value_t = 0.0)]
        c2: f64,
        /// Keep only the D largest off-diagonal entries of each row.
        #[arg(long)]
        span: Option<usize>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Write |H_i| of a single delay/Doppler path as a text grid.
    DumpChannel {
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 1)]
        alpha_num: u32,
        #[arg(long, default_value_t = 1)]
        alpha_den: u32,
        #[arg(long)]
        c1: f64,
        /// Defaults to c1.
        #[arg(long)]
        c2: Option<f64>,
        #[arg(long)]
        delay: usize,
        #[arg(long, allow_hyphen_values = true)]
        doppler: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Print the reference suite as TOML.
    DefaultConfig {
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn create(path: &PathBuf) -> Result<BufWriter<File>> {
    let f = File::create(path).with_context(|| format!("cannot create {}", path.display()))?;
    Ok(BufWriter::new(f))
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Simulate { config, out, seed, workers, runs } => {
            let suite = parse_config_file(&config)?;
            let results = run_suite(&suite, &RunOptions { workers, runs, seed })?;
            write_csv(&results, &out).with_context(|| format!("cannot write {}", out.display()))?;
            eprintln!("{} rows written to {}", results.len(), out.display());
        }
        Command::DumpIci { n, alpha_num, alpha_den, c2, span, out } => {
            let cfg = WaveformConfig::custom(n, Alpha::new(alpha_num, alpha_den)?, 0.0, c2);
            let mut c = correlation_matrix(&cfg)?;
            if let Some(d) = span {
                c = truncate_correlation(&c, d)?;
            }
            let mut w = create(&out)?;
            c.write_magnitude_grid(&mut w)?;
            w.flush()?;
        }
        Command::DumpChannel { n, alpha_num, alpha_den, c1, c2, delay, doppler, out } => {
            let cfg = WaveformConfig::custom(n, Alpha::new(alpha_num, alpha_den)?, c1, c2.unwrap_or(c1));
            let h = subchannel_matrix(delay, doppler, &cfg)?;
            let mut w = create(&out)?;
            write_magnitude_grid(&h, &mut w)?;
            w.flush()?;
        }
        Command::DefaultConfig { out } => match out {
            Some(path) => std::fs::write(&path, emit_default()).with_context(|| format!("cannot write {}", path.display()))?,
            None => print!("{}", emit_default()),
        },
    }
    Ok(())
}
