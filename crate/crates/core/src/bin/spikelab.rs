//! Command-line front end: simulation runs, power sweeps, ECDF collection,
//! one-shot tests on external data, and mixture critical values.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use spikelab::asymptotics::{simulate_quadratic_form, LimitCovariance};
use spikelab::error::Error;
use spikelab::harness::{self, config, csvio, presets};
use spikelab::rng::{substream, StreamPurpose};
use spikelab::Tolerances;

#[derive(Parser)]
#[command(
    name = "spikelab",
    version,
    about = "Spiked-covariance eigenspace inference and Monte Carlo simulation",
    after_help = "Exit codes: 0 success, 2 configuration error, 3 numerical failure."
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
struct RunOverrides {
    /// Override the replication count from the config.
    #[arg(long)]
    reps: Option<usize>,
    /// Override the master seed from the config.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads (falls back to SPIKELAB_THREADS, then all cores).
    #[arg(long)]
    threads: Option<usize>,
    /// Directory for output files (default: current directory).
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Run the configured null and write per-replication results.
    SimulateNull {
        config: PathBuf,
        #[command(flatten)]
        overrides: RunOverrides,
        /// Also dump the first replication (data matrix + hypothesis +
        /// report) for external replay with `test`.
        #[arg(long)]
        dump_first: bool,
    },
    /// Rejection-rate sweep over rotation angles of the alternative.
    Power {
        config: PathBuf,
        /// Comma-separated angles in radians, each in [0, pi/2].
        #[arg(long, value_delimiter = ',', required = true)]
        phi: Vec<f64>,
        #[command(flatten)]
        overrides: RunOverrides,
    },
    /// Collect the statistic ECDF under the null against its reference law.
    Ecdf {
        config: PathBuf,
        #[command(flatten)]
        overrides: RunOverrides,
    },
    /// Test a hypothesis on an external data matrix (CSV, entry variance
    /// 1/N with N = number of columns).
    Test {
        /// Dense CSV data matrix, one row per coordinate.
        #[arg(long)]
        data: PathBuf,
        /// Hypothesis JSON file.
        #[arg(long)]
        hypothesis: PathBuf,
        /// Write the report here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Simulate critical values of the scaled quadratic form g^T U g / q.
    Critvals {
        /// Labeled covariance CSV (header of coordinate names).
        #[arg(long, short = 'u')]
        u: PathBuf,
        /// Positive scale factor.
        #[arg(long)]
        q: f64,
        /// Number of Monte Carlo draws (at least 1000).
        #[arg(long)]
        draws: usize,
        /// Seed of the draw stream.
        #[arg(long)]
        seed: u64,
        /// Probability levels for the reported quantiles.
        #[arg(long, value_delimiter = ',', default_values_t = vec![0.8, 0.9, 0.95, 0.99])]
        levels: Vec<f64>,
    },
    /// Print a built-in scenario preset as a config file.
    Preset {
        /// One of the preset names (see `--list`).
        name: Option<String>,
        /// List available presets.
        #[arg(long)]
        list: bool,
        /// Spike offset parameter of the scenario.
        #[arg(long, default_value_t = 2.0)]
        d: f64,
        /// Aspect ratio M/N.
        #[arg(long, default_value_t = 0.1)]
        y: f64,
        /// Sample size.
        #[arg(long, default_value_t = 500)]
        n: usize,
        /// Use the standardized two-point entry law instead of Gaussian.
        #[arg(long)]
        two_point: bool,
        /// Override the preset replication count.
        #[arg(long)]
        reps: Option<usize>,
        /// Override the preset seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Write the config here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn exit_code_for(err: &Error) -> u8 {
    match err {
        Error::InvalidConfig(_)
        | Error::Json(_)
        | Error::Csv { .. }
        | Error::InvalidLaw(_)
        | Error::InvalidHypothesis(_)
        | Error::InvalidAspectRatio(_)
        | Error::DimensionMismatch(_)
        | Error::NotOrthonormal(_)
        | Error::Io(_) => 2,
        _ => 3,
    }
}

fn threads_from(overrides: &RunOverrides) -> Option<usize> {
    overrides.threads.or_else(|| {
        std::env::var("SPIKELAB_THREADS")
            .ok()
            .and_then(|v| v.parse().ok())
    })
}

fn load_config(path: &Path, overrides: &RunOverrides) -> Result<config::ScenarioConfig, Error> {
    let text = fs::read_to_string(path)?;
    let mut cfg = config::ScenarioConfig::from_json(&text)?;
    if let Some(reps) = overrides.reps {
        cfg.reps = reps;
    }
    if let Some(seed) = overrides.seed {
        cfg.seed = seed;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn out_path(overrides: &RunOverrides, name: &str) -> PathBuf {
    match &overrides.out_dir {
        Some(dir) => dir.join(name),
        None => PathBuf::from(name),
    }
}

fn run() -> Result<(), Error> {
    let cli = Cli::parse();
    let tol = Tolerances::default();
    match cli.command {
        Command::SimulateNull {
            config: path,
            overrides,
            dump_first,
        } => {
            let cfg = load_config(&path, &overrides)?;
            if let Some(dir) = &overrides.out_dir {
                fs::create_dir_all(dir)?;
            }
            let threads = threads_from(&overrides);
            let result = harness::run_null(&cfg, threads, &tol)?;
            let file_name = cfg
                .outputs
                .type_i
                .clone()
                .unwrap_or_else(|| "typeI.csv".to_string());
            let out = out_path(&overrides, &file_name);
            let mut f = fs::File::create(&out)?;
            result.write_type_i_csv(&mut f)?;
            eprintln!(
                "{}: {} reps ({} valid, {} invalid), rejection rate {:.4} (se {:.4}), {:.1}s -> {}",
                cfg.name,
                cfg.reps,
                result.valid,
                result.invalid,
                result.rejection_rate,
                result.std_error,
                result.elapsed_secs,
                out.display()
            );
            if dump_first {
                let dump = harness::dump_replication(&cfg, 0)?;
                let data_path = out_path(&overrides, "first_data.csv");
                let mut f = fs::File::create(&data_path)?;
                csvio::write_matrix_csv(&mut f, dump.data.view())?;
                let hyp_path = out_path(&overrides, "first_hypothesis.json");
                fs::write(&hyp_path, dump.hypothesis.to_json()?)?;
                let report = harness::test_from_data(dump.data.view(), &dump.hypothesis, &tol)?;
                let rep_path = out_path(&overrides, "first_report.json");
                fs::write(&rep_path, report.to_json()?)?;
                eprintln!(
                    "dumped replication 1 to {}, {}, {}",
                    data_path.display(),
                    hyp_path.display(),
                    rep_path.display()
                );
            }
            Ok(())
        }
        Command::Power {
            config: path,
            phi,
            overrides,
        } => {
            let cfg = load_config(&path, &overrides)?;
            if let Some(dir) = &overrides.out_dir {
                fs::create_dir_all(dir)?;
            }
            let threads = threads_from(&overrides);
            let rows = harness::run_power(&cfg, &phi, threads, &tol)?;
            let file_name = cfg
                .outputs
                .power
                .clone()
                .unwrap_or_else(|| "power.csv".to_string());
            let out = out_path(&overrides, &file_name);
            let mut f = fs::File::create(&out)?;
            harness::write_power_csv(&rows, &mut f)?;
            for (phi, res) in &rows {
                eprintln!(
                    "phi = {:.4}: rate {:.4} (se {:.4}, {} valid)",
                    phi, res.rejection_rate, res.std_error, res.valid
                );
            }
            eprintln!("wrote {}", out.display());
            Ok(())
        }
        Command::Ecdf {
            config: path,
            overrides,
        } => {
            let cfg = load_config(&path, &overrides)?;
            if let Some(dir) = &overrides.out_dir {
                fs::create_dir_all(dir)?;
            }
            let threads = threads_from(&overrides);
            let ecdf = harness::run_ecdf(&cfg, threads, &tol)?;
            let file_name = cfg
                .outputs
                .ecdf
                .clone()
                .unwrap_or_else(|| "ecdf.csv".to_string());
            let out = out_path(&overrides, &file_name);
            let mut f = fs::File::create(&out)?;
            ecdf.write_csv(&mut f)?;
            eprintln!(
                "{}: KS distance {:.5} over {} valid reps ({} invalid) -> {}",
                cfg.name,
                ecdf.ks,
                ecdf.valid,
                ecdf.invalid,
                out.display()
            );
            Ok(())
        }
        Command::Test {
            data,
            hypothesis,
            out,
        } => {
            let matrix = csvio::read_matrix_csv(std::io::BufReader::new(fs::File::open(&data)?))?;
            let hyp_text = fs::read_to_string(&hypothesis)?;
            let hyp = config::HypothesisFile::from_json(&hyp_text)?;
            let report = harness::test_from_data(matrix.view(), &hyp, &tol)?;
            let json = report.to_json()?;
            match out {
                Some(path) => fs::write(path, json)?,
                None => println!("{json}"),
            }
            Ok(())
        }
        Command::Critvals {
            u,
            q,
            draws,
            seed,
            levels,
        } => {
            let cov = LimitCovariance::read_csv(std::io::BufReader::new(fs::File::open(&u)?))?;
            let mut rng = substream(seed, StreamPurpose::Generic, 0);
            let mix = simulate_quadratic_form(&cov, q, draws, &mut rng, &tol)?;
            println!("level,critical_value");
            for p in levels {
                println!("{},{}", csvio::fmt_g17(p), csvio::fmt_g17(mix.quantile(p)));
            }
            Ok(())
        }
        Command::Preset {
            name,
            list,
            d,
            y,
            n,
            two_point,
            reps,
            seed,
            out,
        } => {
            if list || name.is_none() {
                for n in presets::names() {
                    println!("{n}");
                }
                return Ok(());
            }
            let cfg = presets::build(
                &name.unwrap(),
                presets::PresetParams {
                    d,
                    y,
                    n,
                    two_point,
                    reps,
                    seed,
                },
            )?;
            let json = cfg.to_json()?;
            match out {
                Some(path) => fs::write(path, json)?,
                None => println!("{json}"),
            }
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    match run() {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code_for(&e))
        }
    }
}
