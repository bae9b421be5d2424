//! Distortion measures, the error-to-optimum measure, and metric traces.

use std::io::{self, BufRead, Write};

use thiserror::Error;

use crate::algorithms::{nearest, squared_distance};
use crate::densities::Density;
use crate::oracle::{boundaries_from_quantizers, OracleError};
use crate::topology::{Codebook, TopologyError};

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("sample is empty")]
    EmptyData,
    #[error("sample length {len} is not a multiple of dimension {dim}")]
    DimensionMismatch { dim: usize, len: usize },
    #[error("quantizer lists have lengths {0} and {1}")]
    LengthMismatch(usize, usize),
    #[error("invalid trace record: {0}")]
    InvalidRecord(String),
    #[error(transparent)]
    Topology(#[from] TopologyError),
    #[error(transparent)]
    Oracle(#[from] OracleError),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] io::Error),
}

fn check_sample(sample: &[f64], codebook: &Codebook) -> Result<usize, MetricsError> {
    let dim = codebook.dim();
    if sample.is_empty() {
        return Err(MetricsError::EmptyData);
    }
    if !sample.len().is_multiple_of(dim) {
        return Err(MetricsError::DimensionMismatch { dim, len: sample.len() });
    }
    Ok(sample.len() / dim)
}

/// Mean squared distance from each datum to its winner (intra-class sum of
/// squares over N). `sample` is row-major with the codebook's dimension.
pub fn distortion(sample: &[f64], codebook: &Codebook) -> Result<f64, MetricsError> {
    let count = check_sample(sample, codebook)?;
    let dim = codebook.dim();
    let mut total = 0.0;
    for x in sample.chunks_exact(dim) {
        total += nearest(codebook.as_slice(), dim, x).1;
    }
    Ok(total / count as f64)
}

/// Distortion extended to neighbor classes: each datum of class C_k is
/// charged to every unit i with k in V(i). By symmetry of V this is the sum
/// over V(winner).
pub fn generalized_distortion(sample: &[f64], codebook: &Codebook, nu: usize) -> Result<f64, MetricsError> {
    let count = check_sample(sample, codebook)?;
    let topology = *codebook.topology();
    topology.check_count(nu)?;
    let dim = codebook.dim();
    let mut total = 0.0;
    for x in sample.chunks_exact(dim) {
        let (w, _) = nearest(codebook.as_slice(), dim, x);
        let mut extended = 0.0;
        topology.for_each_neighbor(w, nu, |i| extended += squared_distance(codebook.quantizer(i), x));
        total += extended;
    }
    Ok(total / count as f64)
}

/// D²: mean squared difference of the sorted quantizers from the sorted
/// optimum.
pub fn error_measure(q: &[f64], q_star: &[f64]) -> Result<f64, MetricsError> {
    if q.len() != q_star.len() {
        return Err(MetricsError::LengthMismatch(q.len(), q_star.len()));
    }
    if q.is_empty() {
        return Err(MetricsError::EmptyData);
    }
    let mut a = q.to_vec();
    let mut b = q_star.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let sum: f64 = a.iter().zip(&b).map(|(u, v)| (u - v) * (u - v)).sum();
    Ok(sum / q.len() as f64)
}

/// Exact distortion of a sorted 1-D codebook under a density, integrated
/// per Voronoi interval from partial moments.
pub fn continuous_distortion(density: Density, q: &[f64]) -> Result<f64, MetricsError> {
    let bounds = boundaries_from_quantizers(q, density.support())?;
    Ok(q
        .iter()
        .enumerate()
        .map(|(i, &qi)| {
            let [m0, m1, m2] = density.partial_moments(bounds[i], bounds[i + 1]);
            (m2 - 2.0 * qi * m1 + qi * qi * m0).max(0.0)
        })
        .sum())
}

/// A metric evaluated on the codebook at probe points.
pub trait Probe: Send + Sync {
    fn name(&self) -> &str;
    fn evaluate(&self, codebook: &Codebook) -> Result<f64, MetricsError>;
}

/// D² against a fixed optimum.
pub struct ErrorMeasureProbe {
    pub optimum: Vec<f64>,
}

impl Probe for ErrorMeasureProbe {
    fn name(&self) -> &str {
        "d2"
    }

    fn evaluate(&self, codebook: &Codebook) -> Result<f64, MetricsError> {
        if codebook.dim() != 1 {
            return Err(MetricsError::DimensionMismatch { dim: codebook.dim(), len: 1 });
        }
        error_measure(codebook.as_slice(), &self.optimum)
    }
}

/// Empirical distortion over a fixed evaluation sample.
pub struct DistortionProbe {
    pub sample: Vec<f64>,
}

impl Probe for DistortionProbe {
    fn name(&self) -> &str {
        "distortion"
    }

    fn evaluate(&self, codebook: &Codebook) -> Result<f64, MetricsError> {
        distortion(&self.sample, codebook)
    }
}

/// Generalized distortion over a fixed evaluation sample.
pub struct GeneralizedDistortionProbe {
    pub sample: Vec<f64>,
    pub nu: usize,
    name: String,
}

impl GeneralizedDistortionProbe {
    pub fn new(sample: Vec<f64>, nu: usize) -> Self {
        GeneralizedDistortionProbe { sample, nu, name: format!("generalized_distortion_{nu}") }
    }
}

impl Probe for GeneralizedDistortionProbe {
    fn name(&self) -> &str {
        &self.name
    }

    fn evaluate(&self, codebook: &Codebook) -> Result<f64, MetricsError> {
        generalized_distortion(&self.sample, codebook, self.nu)
    }
}

/// Ordered key-value metadata of a trace. `algorithm`, `seed` and
/// `config_digest` also fill the per-row columns.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TraceMetadata {
    entries: Vec<(String, String)>,
}

impl TraceMetadata {
    pub fn new(algorithm: &str, seed: u64, config_digest: &str) -> Self {
        let mut m = TraceMetadata::default();
        m.set("algorithm", algorithm);
        m.set("seed", seed.to_string());
        m.set("config_digest", config_digest);
        m
    }

    /// Sets a value, replacing an existing key in place.
    pub fn set(&mut self, key: &str, value: impl Into<String>) {
        let value = value.into();
        match self.entries.iter_mut().find(|(k, _)| k == key) {
            Some(entry) => entry.1 = value,
            None => self.entries.push((key.to_string(), value)),
        }
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    pub fn entries(&self) -> &[(String, String)] {
        &self.entries
    }

    fn column(&self, key: &str) -> &str {
        self.get(key).unwrap_or("")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceRecord {
    pub iteration: u64,
    pub metric: String,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricTrace {
    pub metadata: TraceMetadata,
    pub records: Vec<TraceRecord>,
}

const HEADER: [&str; 6] = ["iteration", "metric", "value", "algorithm", "seed", "config_digest"];

impl MetricTrace {
    pub fn new(metadata: TraceMetadata) -> Self {
        MetricTrace { metadata, records: Vec::new() }
    }

    /// Appends a record, enforcing finite non-negative values and strictly
    /// increasing iterations per metric.
    pub fn push(&mut self, iteration: u64, metric: &str, value: f64) -> Result<(), MetricsError> {
        if !value.is_finite() || value < 0.0 {
            return Err(MetricsError::InvalidRecord(format!("{metric} = {value} at iteration {iteration}")));
        }
        if let Some(last) = self.records.iter().rev().find(|r| r.metric == metric) {
            if last.iteration >= iteration {
                return Err(MetricsError::InvalidRecord(format!(
                    "{metric} iteration {iteration} does not follow {}",
                    last.iteration
                )));
            }
        }
        self.records.push(TraceRecord { iteration, metric: metric.to_string(), value });
        Ok(())
    }

    /// Records of one metric in iteration order.
    pub fn series(&self, metric: &str) -> Vec<(u64, f64)> {
        self.records.iter().filter(|r| r.metric == metric).map(|r| (r.iteration, r.value)).collect()
    }

    pub fn metric_names(&self) -> Vec<String> {
        let mut names: Vec<String> = Vec::new();
        for r in &self.records {
            if !names.contains(&r.metric) {
                names.push(r.metric.clone());
            }
        }
        names
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<(), MetricsError> {
        for (k, v) in self.metadata.entries() {
            writeln!(out, "# {k} = {v}")?;
        }
        let mut writer = csv::Writer::from_writer(out);
        writer.write_record(HEADER)?;
        let (alg, seed, digest) = (
            self.metadata.column("algorithm"),
            self.metadata.column("seed"),
            self.metadata.column("config_digest"),
        );
        for r in &self.records {
            writer.write_record([&r.iteration.to_string(), &r.metric, &format!("{:?}", r.value), alg, seed, digest])?;
        }
        writer.flush()?;
        Ok(())
    }

    pub fn read_csv<R: BufRead>(input: R) -> Result<Self, MetricsError> {
        let mut metadata = TraceMetadata::default();
        let mut body = String::new();
        for line in input.lines() {
            let line = line?;
            if let Some(meta) = line.strip_prefix('#') {
                let (k, v) = meta
                    .split_once('=')
                    .ok_or_else(|| MetricsError::InvalidRecord(format!("metadata line `{line}`")))?;
                metadata.set(k.trim(), v.trim());
            } else {
                body.push_str(&line);
                body.push('\n');
            }
        }
        let mut reader = csv::Reader::from_reader(body.as_bytes());
        if reader.headers()?.iter().ne(HEADER) {
            return Err(MetricsError::InvalidRecord("unexpected header".into()));
        }
        let mut trace = MetricTrace::new(metadata);
        for row in reader.records() {
            let row = row?;
            let bad = || MetricsError::InvalidRecord(format!("{row:?}"));
            let iteration = row[0].parse().map_err(|_| bad())?;
            let value = row[2].parse().map_err(|_| bad())?;
            trace.push(iteration, &row[1], value)?;
        }
        Ok(trace)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::topology::Topology;

    fn chain(q: &[f64]) -> Codebook {
        Codebook::from_scalars(q).unwrap()
    }

    #[test]
    fn distortion_examples() {
        assert_eq!(distortion(&[0.0, 1.0], &chain(&[0.5])).unwrap(), 0.25);
        assert_eq!(distortion(&[0.2, 0.8], &chain(&[0.2, 0.8])).unwrap(), 0.0);
        assert!(matches!(distortion(&[], &chain(&[0.5])), Err(MetricsError::EmptyData)));
        let grid = Codebook::new(2, vec![0.0, 0.0, 1.0, 1.0, 2.0, 2.0, 3.0, 3.0], Topology::grid(2, 2)).unwrap();
        assert_eq!(distortion(&[1.0, 2.0], &grid).unwrap(), 1.0);
    }

    #[test]
    fn generalized_examples() {
        let cb = chain(&[0.0, 1.0]);
        assert_eq!(generalized_distortion(&[0.0, 1.0], &cb, 2).unwrap(), 1.0);
        let sample = [0.1, 0.4, 0.9, 0.35];
        assert_eq!(
            generalized_distortion(&sample, &cb, 0).unwrap(),
            distortion(&sample, &cb).unwrap()
        );
        assert!(matches!(generalized_distortion(&sample, &cb, 3), Err(MetricsError::Topology(_))));
    }

    #[test]
    fn error_measure_examples() {
        assert_eq!(error_measure(&[0.3, 0.6], &[0.3, 0.6]).unwrap(), 0.0);
        assert!((error_measure(&[0.5, 0.9], &[0.4, 1.0]).unwrap() - 0.01).abs() < 1e-15);
        assert!((error_measure(&[0.9, 0.5], &[0.4, 1.0]).unwrap() - 0.01).abs() < 1e-15);
        assert!(matches!(error_measure(&[0.1], &[0.1, 0.2]), Err(MetricsError::LengthMismatch(1, 2))));
    }

    #[test]
    fn continuous_distortion_single_level() {
        // Variance of each density around its mean.
        for d in Density::ALL {
            let sd = d.standard_deviation();
            let v = continuous_distortion(d, &[d.mean()]).unwrap();
            assert!((v - sd * sd).abs() < 1e-12, "{d}: {v}");
        }
    }

    #[test]
    fn trace_validation() {
        let mut t = MetricTrace::new(TraceMetadata::new("scl", 0, "abc"));
        t.push(0, "d2", 1.0).unwrap();
        t.push(0, "distortion", 1.0).unwrap();
        assert!(t.push(0, "d2", 0.5).is_err());
        assert!(t.push(5, "d2", f64::NAN).is_err());
        assert!(t.push(5, "d2", -1.0).is_err());
        t.push(5, "d2", 0.5).unwrap();
        assert_eq!(t.series("d2"), vec![(0, 1.0), (5, 0.5)]);
        assert_eq!(t.metric_names(), vec!["d2".to_string(), "distortion".to_string()]);
    }

    #[test]
    fn trace_csv_round_trip() {
        let mut meta = TraceMetadata::new("som_decreasing:0.25:25,1:1", 3, "ff00");
        meta.set("source", "linear2x");
        let mut t = MetricTrace::new(meta);
        t.push(0, "d2", 0.1).unwrap();
        t.push(10, "d2", 1.234_567_890_123_456_7e-7).unwrap();
        let mut buf = Vec::new();
        t.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("# algorithm = som_decreasing:0.25:25,1:1\n"));
        assert!(text.contains("iteration,metric,value,algorithm,seed,config_digest\n"));
        assert!(text.contains("\"som_decreasing:0.25:25,1:1\""));
        let back = MetricTrace::read_csv(buf.as_slice()).unwrap();
        assert_eq!(back, t);
    }
}
