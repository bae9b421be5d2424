//! Running a resolved experiment: oracle, (algorithm, seed) cells in
//! parallel, traces, summaries and plots.

use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use sha2::{Digest, Sha256};

use crate::algorithms::{run, stream_rng, AlgorithmSpec, DataSource, DatasetStream, DensityStream, RunConfig};
use crate::densities::Density;
use crate::metrics::{
    DistortionProbe, ErrorMeasureProbe, GeneralizedDistortionProbe, MetricTrace, Probe, TraceMetadata,
};
use crate::oracle::{solve_empirical, solve_fixed_point, OracleError, QuantizerSolution, DEFAULT_EMPIRICAL_TOL};
use crate::topology::{Codebook, Gain};

use super::config::{config_err, DataSpec, ExperimentConfig, ExperimentKind, InitMode, ProbeKind};
use super::dataset::load_dataset;
use super::init::{initial_codebook, DataModel};
use super::plot::emit_plot;
use super::{median, BenchError, DATA_STREAM, EVAL_STREAM, ORACLE_CHECK_STREAM};

/// Outcome of one (algorithm, seed) cell.
#[derive(Debug, Clone)]
pub struct CellResult {
    pub algorithm: AlgorithmSpec,
    pub seed: u64,
    pub trace: MetricTrace,
    pub codebook: Codebook,
}

/// Exact optimum used by the D² probe.
#[derive(Debug, Clone)]
pub struct OracleReport {
    pub solution: QuantizerSolution,
    /// max |q*_empirical − q*| when the empirical cross-check ran.
    pub empirical_deviation: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct ExperimentReport {
    pub output_dir: PathBuf,
    pub config_digest: String,
    pub oracle: Option<OracleReport>,
    /// Cells in config order: algorithms outer, seeds inner.
    pub cells: Vec<CellResult>,
}

impl ExperimentReport {
    pub fn cells_of<'a>(&'a self, algorithm: &'a AlgorithmSpec) -> impl Iterator<Item = &'a CellResult> + 'a {
        self.cells.iter().filter(move |c| c.algorithm == *algorithm)
    }

    /// Median over seeds of a metric at one probe iteration.
    pub fn median_at(&self, algorithm: &AlgorithmSpec, metric: &str, iteration: u64) -> Option<f64> {
        let mut values: Vec<f64> = self
            .cells_of(algorithm)
            .filter_map(|c| c.trace.series(metric).into_iter().find(|p| p.0 == iteration).map(|p| p.1))
            .collect();
        (!values.is_empty()).then(|| median(&mut values))
    }

    /// Median over seeds of the last recorded value of a metric.
    pub fn median_final(&self, algorithm: &AlgorithmSpec, metric: &str) -> Option<f64> {
        let mut values: Vec<f64> =
            self.cells_of(algorithm).filter_map(|c| c.trace.series(metric).last().map(|p| p.1)).collect();
        (!values.is_empty()).then(|| median(&mut values))
    }
}

fn require(config: &ExperimentConfig, kind: ExperimentKind) -> Result<(), BenchError> {
    if config.kind != kind {
        return Err(config_err(format!("expected a {} config, got {}", kind.name(), config.kind.name())));
    }
    Ok(())
}

/// D² study of SCL against fixed-neighbor SOMs on a density.
pub fn run_artificial_d2(config: &ExperimentConfig) -> Result<ExperimentReport, BenchError> {
    require(config, ExperimentKind::ArtificialD2)?;
    run_experiment(config)
}

/// D² study of SOM-then-SCL hybrids with a constant gain.
pub fn run_kscl_sweep(config: &ExperimentConfig) -> Result<ExperimentReport, BenchError> {
    require(config, ExperimentKind::KsclSweep)?;
    if !matches!(config.gain, Gain::Constant(_)) {
        return Err(config_err("kscl_sweep uses a constant gain"));
    }
    run_experiment(config)
}

/// Distortion study of SCL and SOM variants on a data set.
pub fn run_real_distortion(config: &ExperimentConfig) -> Result<ExperimentReport, BenchError> {
    require(config, ExperimentKind::RealDistortion)?;
    run_experiment(config)
}

fn load_model(config: &ExperimentConfig) -> Result<DataModel, BenchError> {
    Ok(match &config.data {
        DataSpec::Density(d) => DataModel::Density(*d),
        DataSpec::Dataset { path, .. } => DataModel::Dataset(load_dataset(path, config.standardize)?),
    })
}

fn solve_oracle(config: &ExperimentConfig, density: Density) -> Result<OracleReport, BenchError> {
    let grid = initial_codebook(InitMode::QuantileGrid, &DataModel::Density(density), config.n, config.topology, 0)?;
    let solution = match solve_fixed_point(density, grid.as_slice(), config.oracle_tol, config.oracle_max_iter) {
        Ok(s) => s,
        Err(OracleError::NoConvergence(s)) => {
            return Err(BenchError::OracleNotConverged { residual: s.residual, iterations: s.iterations_used })
        }
        Err(e) => return Err(e.into()),
    };
    let empirical_deviation = if config.oracle_check_samples > 0 {
        let mut rng = stream_rng(0, ORACLE_CHECK_STREAM);
        let sample: Vec<f64> = (0..config.oracle_check_samples).map(|_| density.sample(&mut rng)).collect();
        let empirical =
            match solve_empirical(&sample, &solution.quantizers, DEFAULT_EMPIRICAL_TOL, config.oracle_max_iter) {
                Ok(s) => s,
                Err(OracleError::NoConvergence(s)) => *s,
                Err(e) => return Err(e.into()),
            };
        Some(
            empirical
                .quantizers
                .iter()
                .zip(&solution.quantizers)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max),
        )
    } else {
        None
    };
    Ok(OracleReport { solution, empirical_deviation })
}

fn codebook_digest(codebook: &Codebook) -> String {
    let mut h = Sha256::new();
    codebook.as_slice().iter().for_each(|v| h.update(v.to_le_bytes()));
    hex::encode(h.finalize())
}

fn trace_path(dir: &Path, algorithm: &AlgorithmSpec, seed: u64) -> PathBuf {
    dir.join("traces").join(format!("{}__seed{seed}.csv", algorithm.slug()))
}

/// Runs every (algorithm, seed) cell of a resolved config and writes the
/// output directory: `config.resolved`, `oracle.csv` (D² studies),
/// `traces/`, `summary.csv`, `final.csv` and `plots/`.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentReport, BenchError> {
    let out = &config.output;
    let traces_dir = out.join("traces");
    fs::create_dir_all(&traces_dir).map_err(BenchError::io(&traces_dir))?;
    for entry in fs::read_dir(&traces_dir).map_err(BenchError::io(&traces_dir))? {
        let path = entry.map_err(BenchError::io(&traces_dir))?.path();
        if path.extension().is_some_and(|e| e == "csv") {
            fs::remove_file(&path).map_err(BenchError::io(&path))?;
        }
    }
    let resolved = config.resolved_text()?;
    let digest = super::config::digest_text(&resolved);
    let resolved_path = out.join("config.resolved");
    fs::write(&resolved_path, &resolved).map_err(BenchError::io(&resolved_path))?;

    let model = load_model(config)?;
    let oracle = match model {
        DataModel::Density(d) if config.probes.contains(&ProbeKind::ErrorMeasure) => {
            let report = solve_oracle(config, d)?;
            let path = out.join("oracle.csv");
            let file = File::create(&path).map_err(BenchError::io(&path))?;
            report
                .solution
                .write_csv(BufWriter::new(file), d.name(), config.oracle_tol)
                .map_err(BenchError::io(&path))?;
            Some(report)
        }
        _ => None,
    };

    let inits = config
        .seeds
        .iter()
        .map(|&seed| initial_codebook(config.init, &model, config.n, config.topology, seed))
        .collect::<Result<Vec<_>, _>>()?;
    let eval_samples: Vec<Vec<f64>> = config
        .seeds
        .iter()
        .map(|&seed| match &model {
            DataModel::Density(d) => {
                let mut rng = stream_rng(seed, EVAL_STREAM);
                (0..config.eval_sample).map(|_| d.sample(&mut rng)).collect()
            }
            DataModel::Dataset(ds) => ds.rows.clone(),
        })
        .collect();

    let jobs: Vec<(usize, usize)> =
        (0..config.algorithms.len()).flat_map(|a| (0..config.seeds.len()).map(move |s| (a, s))).collect();
    let cells = jobs
        .par_iter()
        .map(|&(a, s)| {
            let algorithm = &config.algorithms[a];
            let seed = config.seeds[s];
            let probes: Vec<Box<dyn Probe>> = config
                .probes
                .iter()
                .map(|p| -> Box<dyn Probe> {
                    match p {
                        ProbeKind::ErrorMeasure => Box::new(ErrorMeasureProbe {
                            optimum: oracle.as_ref().map(|o| o.solution.quantizers.clone()).unwrap_or_default(),
                        }),
                        ProbeKind::Distortion => Box::new(DistortionProbe { sample: eval_samples[s].clone() }),
                        ProbeKind::GeneralizedDistortion(nu) => {
                            Box::new(GeneralizedDistortionProbe::new(eval_samples[s].clone(), *nu))
                        }
                    }
                })
                .collect();
            let probe_refs: Vec<&dyn Probe> = probes.iter().map(|p| p.as_ref()).collect();

            let mut metadata = TraceMetadata::new(&algorithm.to_string(), seed, &digest);
            metadata.set("experiment", config.kind.name());
            metadata.set("source", config.source_name());
            metadata.set("n", config.n.to_string());
            metadata.set("T", config.total.to_string());
            metadata.set("topology", config.topology.to_string());
            metadata.set("gain", config.gain.to_string());
            metadata.set("init", config.init.name());
            metadata.set("init_digest", codebook_digest(&inits[s]));
            metadata.set("stride", config.stride.to_string());
            if matches!(model, DataModel::Dataset(_)) {
                metadata.set("standardize", if config.standardize { "on" } else { "off" });
            }

            let run_config = RunConfig {
                spec: algorithm.clone(),
                gain: config.gain,
                total: config.total,
                stride: config.stride,
                batch_size: config.batch_sample,
            };
            let rng = stream_rng(seed, DATA_STREAM);
            let mut density_source;
            let mut dataset_source;
            let source: &mut dyn DataSource = match &model {
                DataModel::Density(d) => {
                    density_source = DensityStream::new(*d, rng);
                    &mut density_source
                }
                DataModel::Dataset(ds) => {
                    dataset_source = DatasetStream::new(&ds.rows, ds.dim, rng)?;
                    &mut dataset_source
                }
            };
            let output = run(&run_config, inits[s].clone(), source, &probe_refs, metadata)?;
            let path = trace_path(out, algorithm, seed);
            let file = File::create(&path).map_err(BenchError::io(&path))?;
            output.trace.write_csv(BufWriter::new(file))?;
            Ok(CellResult { algorithm: algorithm.clone(), seed, trace: output.trace, codebook: output.codebook })
        })
        .collect::<Result<Vec<CellResult>, BenchError>>()?;

    let report = ExperimentReport { output_dir: out.clone(), config_digest: digest, oracle, cells };
    write_summaries(config, &report)?;
    let traces: Vec<MetricTrace> = report.cells.iter().map(|c| c.trace.clone()).collect();
    for probe in &config.probes {
        let metric = probe_metric_name(probe);
        let path = out.join("plots").join(format!("{metric}.svg"));
        emit_plot(&traces, Some(&metric), &path, *probe == ProbeKind::ErrorMeasure)?;
    }
    Ok(report)
}

fn probe_metric_name(probe: &ProbeKind) -> String {
    match probe {
        ProbeKind::ErrorMeasure => "d2".into(),
        ProbeKind::Distortion => "distortion".into(),
        ProbeKind::GeneralizedDistortion(nu) => format!("generalized_distortion_{nu}"),
    }
}

fn write_summaries(config: &ExperimentConfig, report: &ExperimentReport) -> Result<(), BenchError> {
    let summary_path = report.output_dir.join("summary.csv");
    let final_path = report.output_dir.join("final.csv");
    let csv_err = |path: &Path| {
        let path = path.display().to_string();
        move |e: csv::Error| BenchError::Io { path: path.clone(), source: e.into() }
    };
    let mut summary = csv::Writer::from_path(&summary_path).map_err(csv_err(&summary_path))?;
    let mut finals = csv::Writer::from_path(&final_path).map_err(csv_err(&final_path))?;
    summary
        .write_record(["algorithm", "metric", "iteration", "median", "min", "max", "seeds"])
        .map_err(csv_err(&summary_path))?;
    finals
        .write_record(["algorithm", "metric", "iteration", "median", "min", "max", "seeds"])
        .map_err(csv_err(&final_path))?;
    for algorithm in &config.algorithms {
        let label = algorithm.to_string();
        for probe in &config.probes {
            let metric = probe_metric_name(probe);
            let runs: Vec<Vec<(u64, f64)>> = report.cells_of(algorithm).map(|c| c.trace.series(&metric)).collect();
            let Some(first) = runs.first() else { continue };
            for (k, &(iteration, _)) in first.iter().enumerate() {
                let mut values: Vec<f64> = runs.iter().filter_map(|r| r.get(k).map(|p| p.1)).collect();
                let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
                let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                let count = values.len();
                let record = [
                    label.clone(),
                    metric.clone(),
                    iteration.to_string(),
                    format!("{:?}", median(&mut values)),
                    format!("{lo:?}"),
                    format!("{hi:?}"),
                    count.to_string(),
                ];
                summary.write_record(&record).map_err(csv_err(&summary_path))?;
                if k + 1 == first.len() {
                    finals.write_record(&record).map_err(csv_err(&final_path))?;
                }
            }
        }
    }
    summary.flush().map_err(BenchError::io(&summary_path))?;
    finals.flush().map_err(BenchError::io(&final_path))?;
    Ok(())
}
