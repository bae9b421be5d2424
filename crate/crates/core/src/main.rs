use std::fs;
use std::io::{self, BufReader, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use vq_lab::bench::standin::{self, StandinSpec};
use vq_lab::bench::{
    emit_plot, run_artificial_d2, run_kscl_sweep, run_real_distortion, BenchError, ExperimentKind, RawConfig,
};
use vq_lab::densities::Density;
use vq_lab::metrics::MetricTrace;
use vq_lab::oracle::{solve_fixed_point, OracleError, DEFAULT_MAX_ITER, DEFAULT_TOL};

#[derive(Parser)]
#[command(name = "vq-lab", version, about = "Vector quantization experiments: SCL, SOM, KSCL, batch VQ")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Switch {
    On,
    Off,
}

#[derive(Subcommand)]
enum Command {
    /// Exact optimal n-level quantizer of a reference density, as CSV.
    Oracle {
        #[arg(long)]
        density: Density,
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = DEFAULT_TOL)]
        tol: f64,
        #[arg(long, default_value_t = DEFAULT_MAX_ITER)]
        max_iter: usize,
        /// Output file (stdout when omitted).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run an experiment config.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Run a single seed instead of the configured list.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        stride: Option<u64>,
        #[arg(long)]
        standardize: Option<Switch>,
        /// Output directory.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Plot the median curves of a trace directory as SVG.
    Plot {
        /// Experiment directory or directory of trace CSVs.
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Metric to plot when traces carry several.
        #[arg(long)]
        metric: Option<String>,
        /// Linear instead of logarithmic y axis.
        #[arg(long)]
        linear: bool,
    },
    /// Regenerate the bundled stand-in data sets.
    Standin {
        #[arg(long)]
        out_dir: PathBuf,
    },
}

/// Failure with its exit code.
struct Failure(u8, String);

impl From<BenchError> for Failure {
    fn from(e: BenchError) -> Self {
        Failure(e.exit_code() as u8, e.to_string())
    }
}

fn io_failure(path: &Path) -> impl FnOnce(io::Error) -> Failure + '_ {
    move |e| Failure(2, format!("{}: {e}", path.display()))
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure(code, message)) => {
            eprintln!("error: {message}");
            ExitCode::from(code)
        }
    }
}

fn execute(command: Command) -> Result<(), Failure> {
    match command {
        Command::Oracle { density, n, tol, max_iter, out } => oracle(density, n, tol, max_iter, out),
        Command::Run { config, seed, stride, standardize, out } => {
            let mut raw = RawConfig::from_file(&config)?;
            if let Some(seed) = seed {
                raw.set("seeds", &seed.to_string())?;
            }
            if let Some(stride) = stride {
                raw.set("stride", &stride.to_string())?;
            }
            if let Some(s) = standardize {
                raw.set("standardize", if matches!(s, Switch::On) { "on" } else { "off" })?;
            }
            if let Some(out) = out {
                raw.set("output", &out.to_string_lossy())?;
            }
            let config = raw.resolve()?;
            let report = match config.kind {
                ExperimentKind::ArtificialD2 => run_artificial_d2(&config)?,
                ExperimentKind::KsclSweep => run_kscl_sweep(&config)?,
                ExperimentKind::RealDistortion => run_real_distortion(&config)?,
            };
            let mut stdout = io::stdout().lock();
            let _ = writeln!(stdout, "output: {}", report.output_dir.display());
            let _ = writeln!(stdout, "config sha256: {}", report.config_digest);
            if let Some(oracle) = &report.oracle {
                let _ = writeln!(
                    stdout,
                    "oracle: {} iterations, residual {:e}",
                    oracle.solution.iterations_used, oracle.solution.residual
                );
                if let Some(dev) = oracle.empirical_deviation {
                    let _ = writeln!(stdout, "oracle empirical cross-check: max deviation {dev:e}");
                }
            }
            for algorithm in &config.algorithms {
                for probe in &config.probes {
                    let metric = probe.to_string().replace(':', "_");
                    if let Some(v) = report.median_final(algorithm, &metric) {
                        let _ = writeln!(stdout, "{algorithm:<28} final median {metric} = {v:.6e}");
                    }
                }
            }
            Ok(())
        }
        Command::Plot { input, out, metric, linear } => plot(&input, &out, metric.as_deref(), !linear),
        Command::Standin { out_dir } => {
            fs::create_dir_all(&out_dir).map_err(io_failure(&out_dir))?;
            for spec in [standin::SAVING, standin::TOP500] {
                write_standin(&out_dir, &spec)?;
            }
            Ok(())
        }
    }
}

fn oracle(density: Density, n: usize, tol: f64, max_iter: usize, out: Option<PathBuf>) -> Result<(), Failure> {
    if n == 0 {
        return Err(Failure(1, "n must be at least 1".into()));
    }
    let q0: Vec<f64> = (0..n).map(|i| density.quantile((i as f64 + 0.5) / n as f64)).collect();
    let solution = match solve_fixed_point(density, &q0, tol, max_iter) {
        Ok(s) => s,
        Err(OracleError::NoConvergence(s)) => {
            return Err(Failure(
                2,
                format!("oracle did not converge: residual {:e} after {} iterations", s.residual, s.iterations_used),
            ))
        }
        Err(e) => return Err(Failure(2, e.to_string())),
    };
    match out {
        Some(path) => {
            let file = fs::File::create(&path).map_err(io_failure(&path))?;
            solution.write_csv(io::BufWriter::new(file), density.name(), tol).map_err(io_failure(&path))
        }
        None => solution.write_csv(io::stdout().lock(), density.name(), tol).map_err(io_failure(Path::new("stdout"))),
    }
}

fn plot(input: &Path, out: &Path, metric: Option<&str>, log_y: bool) -> Result<(), Failure> {
    let dir = if input.join("traces").is_dir() { input.join("traces") } else { input.to_path_buf() };
    let mut files: Vec<PathBuf> = fs::read_dir(&dir)
        .map_err(io_failure(&dir))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|e| e == "csv"))
        .collect();
    files.sort();
    let mut traces = Vec::new();
    for path in &files {
        let file = fs::File::open(path).map_err(io_failure(path))?;
        let trace = MetricTrace::read_csv(BufReader::new(file))
            .map_err(|e| Failure(2, format!("{}: {e}", path.display())))?;
        traces.push(trace);
    }
    emit_plot(&traces, metric, out, log_y).map_err(|e| Failure(2, e.to_string()))
}

fn write_standin(dir: &Path, spec: &StandinSpec) -> Result<(), Failure> {
    let path = dir.join(spec.file_name);
    fs::write(&path, standin::generate(spec)).map_err(io_failure(&path))
}
