//! Flat `key = value` experiment configuration.

use std::collections::BTreeMap;
use std::fmt::{self, Write as _};
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use sha2::{Digest, Sha256};

use crate::algorithms::AlgorithmSpec;
use crate::densities::Density;
use crate::oracle::{DEFAULT_EMPIRICAL_SAMPLES, DEFAULT_MAX_ITER, DEFAULT_TOL};
use crate::topology::{Gain, NeighborPlan, Topology};

use super::BenchError;

const KEYS: &[&str] = &[
    "experiment",
    "density",
    "dataset",
    "dataset_sha256",
    "n",
    "T",
    "seeds",
    "algorithms",
    "topology",
    "grid_rows",
    "grid_cols",
    "gain",
    "neighbors",
    "init",
    "stride",
    "standardize",
    "probes",
    "oracle_tol",
    "oracle_max_iter",
    "oracle_check_samples",
    "batch_sample",
    "eval_sample",
    "output",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExperimentKind {
    ArtificialD2,
    KsclSweep,
    RealDistortion,
}

impl ExperimentKind {
    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::ArtificialD2 => "artificial_d2",
            ExperimentKind::KsclSweep => "kscl_sweep",
            ExperimentKind::RealDistortion => "real_distortion",
        }
    }
}

impl FromStr for ExperimentKind {
    type Err = BenchError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "artificial_d2" => Ok(ExperimentKind::ArtificialD2),
            "kscl_sweep" => Ok(ExperimentKind::KsclSweep),
            "real_distortion" => Ok(ExperimentKind::RealDistortion),
            other => Err(config_err(format!("unknown experiment `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InitMode {
    /// q_i at the (i − ½)/n quantiles of the density.
    QuantileGrid,
    /// Sorted inverse-cdf draws, or box-uniform draws sorted by the first
    /// coordinate for data sets.
    SeededSortedUniform,
    /// n distinct rows of the data set.
    SeededDataPoints,
    /// Uniform draws in a small box (±0.05 standard deviations) around the
    /// data mean.
    SeededCenter,
}

impl InitMode {
    pub fn name(self) -> &'static str {
        match self {
            InitMode::QuantileGrid => "quantile_grid",
            InitMode::SeededSortedUniform => "seeded_sorted_uniform",
            InitMode::SeededDataPoints => "seeded_data_points",
            InitMode::SeededCenter => "seeded_center",
        }
    }
}

impl FromStr for InitMode {
    type Err = BenchError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "quantile_grid" => Ok(InitMode::QuantileGrid),
            "seeded_sorted_uniform" => Ok(InitMode::SeededSortedUniform),
            "seeded_data_points" => Ok(InitMode::SeededDataPoints),
            "seeded_center" => Ok(InitMode::SeededCenter),
            other => Err(config_err(format!("unknown init mode `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProbeKind {
    ErrorMeasure,
    Distortion,
    GeneralizedDistortion(usize),
}

impl fmt::Display for ProbeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ProbeKind::ErrorMeasure => f.write_str("d2"),
            ProbeKind::Distortion => f.write_str("distortion"),
            ProbeKind::GeneralizedDistortion(nu) => write!(f, "generalized_distortion:{nu}"),
        }
    }
}

impl FromStr for ProbeKind {
    type Err = BenchError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.split_once(':') {
            None if s == "d2" => Ok(ProbeKind::ErrorMeasure),
            None if s == "distortion" => Ok(ProbeKind::Distortion),
            Some(("generalized_distortion", nu)) => nu
                .parse()
                .map(ProbeKind::GeneralizedDistortion)
                .map_err(|_| config_err(format!("bad probe `{s}`"))),
            _ => Err(config_err(format!("unknown probe `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum DataSpec {
    Density(Density),
    /// Path as written in the config, and the path resolved against the
    /// config file's directory.
    Dataset { written: String, path: PathBuf },
}

/// A fully defaulted experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub kind: ExperimentKind,
    pub data: DataSpec,
    pub n: usize,
    pub total: u64,
    pub seeds: Vec<u64>,
    pub algorithms: Vec<AlgorithmSpec>,
    pub topology: Topology,
    pub gain: Gain,
    pub neighbors: NeighborPlan,
    pub init: InitMode,
    pub stride: u64,
    pub standardize: bool,
    pub probes: Vec<ProbeKind>,
    pub oracle_tol: f64,
    pub oracle_max_iter: usize,
    pub oracle_check_samples: usize,
    pub batch_sample: usize,
    pub eval_sample: usize,
    pub output: PathBuf,
}

pub(crate) fn config_err(message: impl Into<String>) -> BenchError {
    BenchError::Config(message.into())
}

/// Unresolved key-value pairs, in the order the keys are known.
#[derive(Debug, Clone, Default)]
pub struct RawConfig {
    values: BTreeMap<String, String>,
    base_dir: PathBuf,
}

impl RawConfig {
    pub fn parse(text: &str, base_dir: &Path) -> Result<Self, BenchError> {
        let mut raw = RawConfig { values: BTreeMap::new(), base_dir: base_dir.to_path_buf() };
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| config_err(format!("line {}: expected `key = value`", lineno + 1)))?;
            let key = key.trim();
            if raw.values.contains_key(key) {
                return Err(config_err(format!("line {}: duplicate key `{key}`", lineno + 1)));
            }
            raw.set(key, value.trim())?;
        }
        Ok(raw)
    }

    pub fn from_file(path: &Path) -> Result<Self, BenchError> {
        let text = fs::read_to_string(path)
            .map_err(|e| config_err(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text, path.parent().unwrap_or(Path::new(".")))
    }

    /// Sets or overrides one key.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), BenchError> {
        if !KEYS.contains(&key) {
            return Err(config_err(format!("unknown key `{key}`")));
        }
        self.values.insert(key.to_string(), value.to_string());
        Ok(())
    }

    fn get(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(String::as_str)
    }

    fn parsed<T: FromStr>(&self, key: &str) -> Result<Option<T>, BenchError> {
        self.get(key)
            .map(|v| v.parse::<T>().map_err(|_| config_err(format!("invalid value `{v}` for `{key}`"))))
            .transpose()
    }

    /// Applies experiment defaults and validates.
    pub fn resolve(&self) -> Result<ExperimentConfig, BenchError> {
        let kind: ExperimentKind =
            self.get("experiment").ok_or_else(|| config_err("missing `experiment`"))?.parse()?;
        let data = match (self.get("density"), self.get("dataset")) {
            (Some(d), None) => DataSpec::Density(d.parse().map_err(|e| config_err(format!("{e}")))?),
            (None, Some(p)) => {
                let path = self.base_dir.join(p);
                if !path.is_file() {
                    return Err(config_err(format!("dataset {} does not exist", path.display())));
                }
                DataSpec::Dataset { written: p.to_string(), path }
            }
            _ => return Err(config_err("exactly one of `density` and `dataset` is required")),
        };
        let artificial = kind != ExperimentKind::RealDistortion;
        match (&data, artificial) {
            (DataSpec::Dataset { .. }, true) => {
                return Err(config_err(format!("{} needs a density", kind.name())))
            }
            (DataSpec::Density(_), false) => return Err(config_err("real_distortion needs a dataset")),
            _ => {}
        }

        let n: usize = self.parsed("n")?.unwrap_or(if artificial { 100 } else { 25 });
        if n == 0 {
            return Err(config_err("n must be at least 1"));
        }
        let default_total = match (artificial, n <= 25) {
            (true, _) => 100_000,
            (false, true) => 500,
            (false, false) => 1000,
        };
        let total: u64 = self.parsed("T")?.unwrap_or(default_total);
        if total == 0 {
            return Err(config_err("T must be at least 1"));
        }
        let seeds = match self.get("seeds") {
            Some(s) => parse_seeds(s)?,
            None => (0..10).collect(),
        };
        if seeds.is_empty() {
            return Err(config_err("seeds must be nonempty"));
        }

        let neighbors: NeighborPlan = self.parsed("neighbors")?.unwrap_or(NeighborPlan::Fixed(2));
        let algorithms = match self.get("algorithms") {
            Some(list) => list
                .split_whitespace()
                .map(|s| if s == "som" { Ok(AlgorithmSpec::from_plan(&neighbors)) } else { s.parse() })
                .collect::<Result<Vec<_>, _>>()
                .map_err(|e| config_err(e.to_string()))?,
            None => default_algorithms(kind, &data),
        };
        if algorithms.is_empty() {
            return Err(config_err("algorithms must be nonempty"));
        }

        let topology = match self.get("topology").unwrap_or(if artificial { "chain" } else { "grid" }) {
            "chain" => Topology::chain(n),
            "grid" => {
                let side = (n as f64).sqrt().round() as usize;
                let square = side * side == n;
                let rows: Option<usize> = self.parsed("grid_rows")?;
                let cols: Option<usize> = self.parsed("grid_cols")?;
                let (rows, cols) = match (rows, cols) {
                    (Some(r), Some(c)) => (r, c),
                    (Some(r), None) if r > 0 && n.is_multiple_of(r) => (r, n / r),
                    (None, Some(c)) if c > 0 && n.is_multiple_of(c) => (n / c, c),
                    (None, None) if square => (side, side),
                    _ => return Err(config_err("grid_rows and grid_cols must give n units")),
                };
                if rows * cols != n {
                    return Err(config_err(format!("grid {rows}x{cols} does not have n = {n} units")));
                }
                Topology::grid(rows, cols)
            }
            other => return Err(config_err(format!("unknown topology `{other}`"))),
        };
        for spec in &algorithms {
            spec.neighbor_plan()
                .validate(&topology)
                .map_err(|e| config_err(format!("{spec}: {e}")))?;
        }

        let gain = match self.get("gain") {
            Some(g) => g.parse().map_err(|e| config_err(format!("{e}")))?,
            None => match kind {
                ExperimentKind::ArtificialD2 => Gain::Constant(0.2),
                ExperimentKind::KsclSweep => Gain::Constant(0.1),
                ExperimentKind::RealDistortion => Gain::RobbinsMonro { initial: 0.5, tau: total as f64 / 10.0 },
            },
        };
        if kind == ExperimentKind::KsclSweep && !matches!(gain, Gain::Constant(_)) {
            return Err(config_err("kscl_sweep uses a constant gain"));
        }
        if artificial && !matches!(topology, Topology::Chain { .. }) {
            return Err(config_err(format!("{} runs on a chain", kind.name())));
        }
        let init = self.parsed("init")?.unwrap_or(if artificial {
            InitMode::QuantileGrid
        } else {
            InitMode::SeededCenter
        });
        match (&data, init) {
            (DataSpec::Dataset { .. }, InitMode::QuantileGrid) => {
                return Err(config_err("quantile_grid needs a density"))
            }
            (DataSpec::Density(_), InitMode::SeededDataPoints) => {
                return Err(config_err("seeded_data_points needs a dataset"))
            }
            _ => {}
        }
        let stride: u64 = self.parsed("stride")?.unwrap_or((total / 500).max(1));
        if stride == 0 {
            return Err(config_err("stride must be at least 1"));
        }
        let standardize = match self.get("standardize") {
            None => !artificial,
            Some("on") | Some("true") => true,
            Some("off") | Some("false") => false,
            Some(other) => return Err(config_err(format!("standardize must be on or off, got `{other}`"))),
        };
        let probes = match self.get("probes") {
            Some(list) => list.split_whitespace().map(str::parse).collect::<Result<Vec<ProbeKind>, _>>()?,
            None if artificial => vec![ProbeKind::ErrorMeasure],
            None => vec![ProbeKind::Distortion],
        };
        if probes.is_empty() {
            return Err(config_err("probes must be nonempty"));
        }
        if probes.contains(&ProbeKind::ErrorMeasure) && !(artificial && topology == Topology::chain(n)) {
            return Err(config_err("the d2 probe needs a density on a chain"));
        }
        for p in &probes {
            if let ProbeKind::GeneralizedDistortion(nu) = p {
                topology.check_count(*nu).map_err(|e| config_err(e.to_string()))?;
            }
        }

        let oracle_tol: f64 = self.parsed("oracle_tol")?.unwrap_or(DEFAULT_TOL);
        if !(oracle_tol > 0.0) {
            return Err(config_err("oracle_tol must be positive"));
        }
        let oracle_max_iter: usize = self.parsed("oracle_max_iter")?.unwrap_or(DEFAULT_MAX_ITER);
        let oracle_check_samples: usize = self.parsed("oracle_check_samples")?.unwrap_or(match data {
            DataSpec::Density(Density::Gaussian) => DEFAULT_EMPIRICAL_SAMPLES,
            _ => 0,
        });
        let batch_sample: usize = self.parsed("batch_sample")?.unwrap_or(100_000);
        let eval_sample: usize = self.parsed("eval_sample")?.unwrap_or(10_000);
        if batch_sample == 0 || eval_sample == 0 {
            return Err(config_err("batch_sample and eval_sample must be positive"));
        }
        let output = PathBuf::from(self.get("output").map(str::to_string).unwrap_or_else(|| {
            let source = match &data {
                DataSpec::Density(d) => d.name().to_string(),
                DataSpec::Dataset { path, .. } => {
                    path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default()
                }
            };
            format!("runs/{}_{source}", kind.name())
        }));

        let config = ExperimentConfig {
            kind,
            data,
            n,
            total,
            seeds,
            algorithms,
            topology,
            gain,
            neighbors,
            init,
            stride,
            standardize,
            probes,
            oracle_tol,
            oracle_max_iter,
            oracle_check_samples,
            batch_sample,
            eval_sample,
            output,
        };
        if let Some(expected) = self.get("dataset_sha256") {
            if config.dataset_digest()?.as_deref() != Some(expected) {
                return Err(config_err("dataset content does not match dataset_sha256"));
            }
        }
        Ok(config)
    }
}

fn default_algorithms(kind: ExperimentKind, data: &DataSpec) -> Vec<AlgorithmSpec> {
    let mut specs = match kind {
        ExperimentKind::ArtificialD2 => {
            vec![AlgorithmSpec::Scl, AlgorithmSpec::Som(2), AlgorithmSpec::Som(4), AlgorithmSpec::Som(8)]
        }
        ExperimentKind::KsclSweep => [0.0, 0.3, 0.6, 0.9]
            .iter()
            .map(|&f| AlgorithmSpec::Kscl { nu: 2, switch_fraction: f })
            .collect(),
        ExperimentKind::RealDistortion => vec![
            AlgorithmSpec::Scl,
            AlgorithmSpec::Som(5),
            AlgorithmSpec::Som(9),
            AlgorithmSpec::Som(25),
            AlgorithmSpec::from_plan(&NeighborPlan::default_decreasing()),
        ],
    };
    if kind == ExperimentKind::ArtificialD2 && *data == DataSpec::Density(Density::Gaussian) {
        specs.push(AlgorithmSpec::Som(16));
    }
    specs
}

/// Comma-separated seeds and half-open ranges, e.g. `0..10` or `1,4,7..9`.
pub fn parse_seeds(text: &str) -> Result<Vec<u64>, BenchError> {
    let bad = || config_err(format!("invalid seeds `{text}`"));
    let mut seeds = Vec::new();
    for part in text.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        match part.split_once("..") {
            Some((a, b)) => {
                let a: u64 = a.trim().parse().map_err(|_| bad())?;
                let b: u64 = b.trim().parse().map_err(|_| bad())?;
                seeds.extend(a..b);
            }
            None => seeds.push(part.parse().map_err(|_| bad())?),
        }
    }
    Ok(seeds)
}

fn format_seeds(seeds: &[u64]) -> String {
    let contiguous = seeds.windows(2).all(|w| w[1] == w[0] + 1);
    if contiguous && seeds.len() > 1 {
        format!("{}..{}", seeds[0], seeds[seeds.len() - 1] + 1)
    } else {
        seeds.iter().map(u64::to_string).collect::<Vec<_>>().join(",")
    }
}

impl ExperimentConfig {
    pub fn from_file(path: &Path) -> Result<Self, BenchError> {
        RawConfig::from_file(path)?.resolve()
    }

    /// SHA-256 of the dataset file, when the experiment uses one.
    pub fn dataset_digest(&self) -> Result<Option<String>, BenchError> {
        match &self.data {
            DataSpec::Density(_) => Ok(None),
            DataSpec::Dataset { path, .. } => {
                let bytes = fs::read(path).map_err(|e| config_err(format!("cannot read {}: {e}", path.display())))?;
                Ok(Some(hex::encode(Sha256::digest(bytes))))
            }
        }
    }

    /// The fully defaulted configuration, one key per line, without
    /// `output`. Its SHA-256 is the config digest stamped into traces.
    pub fn resolved_text(&self) -> Result<String, BenchError> {
        let mut s = String::new();
        let mut line = |k: &str, v: String| writeln!(s, "{k} = {v}").expect("write to string");
        line("experiment", self.kind.name().to_string());
        match &self.data {
            DataSpec::Density(d) => line("density", d.name().to_string()),
            DataSpec::Dataset { written, .. } => {
                line("dataset", written.clone());
                line("dataset_sha256", self.dataset_digest()?.unwrap_or_default());
            }
        }
        line("n", self.n.to_string());
        line("T", self.total.to_string());
        line("seeds", format_seeds(&self.seeds));
        line("algorithms", self.algorithms.iter().map(|a| a.to_string()).collect::<Vec<_>>().join(" "));
        match self.topology {
            Topology::Chain { .. } => line("topology", "chain".into()),
            Topology::Grid { rows, cols } => {
                line("topology", "grid".into());
                line("grid_rows", rows.to_string());
                line("grid_cols", cols.to_string());
            }
        }
        line("gain", self.gain.to_string());
        line("neighbors", self.neighbors.to_string());
        line("init", self.init.name().to_string());
        line("stride", self.stride.to_string());
        line("standardize", if self.standardize { "on" } else { "off" }.into());
        line("probes", self.probes.iter().map(|p| p.to_string()).collect::<Vec<_>>().join(" "));
        line("oracle_tol", format!("{:?}", self.oracle_tol));
        line("oracle_max_iter", self.oracle_max_iter.to_string());
        line("oracle_check_samples", self.oracle_check_samples.to_string());
        line("batch_sample", self.batch_sample.to_string());
        line("eval_sample", self.eval_sample.to_string());
        Ok(s)
    }

    pub fn digest(&self) -> Result<String, BenchError> {
        Ok(digest_text(&self.resolved_text()?))
    }

    pub fn source_name(&self) -> String {
        match &self.data {
            DataSpec::Density(d) => d.name().to_string(),
            DataSpec::Dataset { written, .. } => written.clone(),
        }
    }
}

pub fn digest_text(text: &str) -> String {
    hex::encode(Sha256::digest(text.as_bytes()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn resolve(text: &str) -> Result<ExperimentConfig, BenchError> {
        RawConfig::parse(text, Path::new("."))?.resolve()
    }

    #[test]
    fn artificial_defaults() {
        let c = resolve("experiment = artificial_d2\ndensity = linear2x\n").unwrap();
        assert_eq!((c.n, c.total, c.stride), (100, 100_000, 200));
        assert_eq!(c.seeds, (0..10).collect::<Vec<_>>());
        assert_eq!(c.algorithms.len(), 4);
        assert_eq!(c.topology, Topology::chain(100));
        assert_eq!(c.init, InitMode::QuantileGrid);
        assert_eq!(c.probes, vec![ProbeKind::ErrorMeasure]);
        assert_eq!(c.oracle_check_samples, 0);
        let g = resolve("experiment = artificial_d2\ndensity = gaussian\n").unwrap();
        assert_eq!(g.algorithms.last(), Some(&AlgorithmSpec::Som(16)));
        assert_eq!(g.oracle_check_samples, DEFAULT_EMPIRICAL_SAMPLES);
    }

    #[test]
    fn kscl_defaults() {
        let c = resolve("experiment = kscl_sweep\ndensity = exponential\n").unwrap();
        assert_eq!(c.gain, Gain::Constant(0.1));
        assert_eq!(c.algorithms[3], AlgorithmSpec::Kscl { nu: 2, switch_fraction: 0.9 });
    }

    #[test]
    fn bare_som_uses_neighbor_plan() {
        let c = resolve("experiment = kscl_sweep\ndensity = linear2x\nalgorithms = scl som\nneighbors = som_to_scl:4:0.5\n")
            .unwrap();
        assert_eq!(c.algorithms[1], AlgorithmSpec::Kscl { nu: 4, switch_fraction: 0.5 });
    }

    #[test]
    fn errors() {
        assert!(resolve("density = linear2x\n").is_err());
        assert!(resolve("experiment = artificial_d2\n").is_err());
        assert!(resolve("experiment = artificial_d2\ndensity = linear2x\nT = 0\n").is_err());
        assert!(resolve("experiment = artificial_d2\ndensity = linear2x\nn = 0\n").is_err());
        assert!(resolve("experiment = artificial_d2\ndensity = linear2x\nseeds = \n").is_err());
        assert!(resolve("experiment = artificial_d2\ndensity = linear2x\nbogus = 1\n").is_err());
        assert!(resolve("experiment = artificial_d2\ndensity = linear2x\nalgorithms = som:3\n").is_err());
        assert!(resolve("experiment = real_distortion\ndataset = /nonexistent.csv\n").is_err());
        assert!(resolve("experiment = artificial_d2\ndensity = linear2x\nn = 4\nn = 5\n").is_err());
    }

    #[test]
    fn seeds_syntax() {
        assert_eq!(parse_seeds("0..3").unwrap(), vec![0, 1, 2]);
        assert_eq!(parse_seeds("5, 1..3,9").unwrap(), vec![5, 1, 2, 9]);
        assert!(parse_seeds("x").is_err());
        assert_eq!(format_seeds(&[0, 1, 2]), "0..3");
        assert_eq!(format_seeds(&[4]), "4");
        assert_eq!(format_seeds(&[1, 5]), "1,5");
    }

    #[test]
    fn resolved_text_round_trips() {
        let c = resolve("experiment = kscl_sweep\ndensity = gaussian\nT = 1000\nseeds = 3,4\noutput = /tmp/x\n").unwrap();
        let text = c.resolved_text().unwrap();
        assert!(!text.contains("output"));
        let again = RawConfig::parse(&text, Path::new(".")).unwrap().resolve().unwrap();
        assert_eq!(again.resolved_text().unwrap(), text);
        assert_eq!(again.digest().unwrap(), c.digest().unwrap());
    }
}
