//! Competitive-learning quantization algorithms.
//!
//! Stochastic rules (SCL, SOM, online K-means) consume one datum per step;
//! batch rules (BVQ, batch SOM) consume the whole sample per iteration.
//! [`run`] drives any of them against a data source and records probes.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::densities::Density;
use crate::metrics::{MetricTrace, MetricsError, Probe, TraceMetadata};
use crate::topology::{Codebook, Gain, NeighborPlan, TopologyError};

#[derive(Debug, Error)]
pub enum AlgorithmError {
    #[error("datum has dimension {got}, codebook has {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("gain {0} outside (0, 1]")]
    InvalidGain(f64),
    #[error("data set is empty")]
    EmptyData,
    #[error("invalid run configuration: {0}")]
    ConfigInvalid(String),
    #[error(transparent)]
    Topology(#[from] TopologyError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
}

/// Index of the nearest quantizer; ties go to the lowest index.
pub fn find_winner(codebook: &Codebook, x: &[f64]) -> Result<usize, AlgorithmError> {
    check_dim(codebook, x)?;
    Ok(nearest(codebook.as_slice(), codebook.dim(), x).0)
}

fn check_dim(codebook: &Codebook, x: &[f64]) -> Result<(), AlgorithmError> {
    if x.len() != codebook.dim() {
        return Err(AlgorithmError::DimensionMismatch { expected: codebook.dim(), got: x.len() });
    }
    Ok(())
}

#[inline]
pub(crate) fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(u, v)| (u - v) * (u - v)).sum()
}

/// (winner, squared distance) over a row-major codebook.
#[inline]
pub(crate) fn nearest(values: &[f64], dim: usize, x: &[f64]) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (i, q) in values.chunks_exact(dim).enumerate() {
        let d = squared_distance(q, x);
        if d < best.1 {
            best = (i, d);
        }
    }
    best
}

#[inline]
fn move_toward(q: &mut [f64], x: &[f64], eps: f64) {
    for (qi, xi) in q.iter_mut().zip(x) {
        *qi += eps * (xi - *qi);
    }
}

/// Mutable state of a stochastic run.
#[derive(Debug, Clone)]
pub struct RunState {
    pub codebook: Codebook,
    pub t: u64,
    /// Wins per unit, maintained by [`RunState::kmeans_step`].
    pub class_counts: Vec<u64>,
}

impl RunState {
    pub fn new(codebook: Codebook) -> Self {
        let n = codebook.len();
        RunState { codebook, t: 0, class_counts: vec![0; n] }
    }

    fn check_gain(eps: f64) -> Result<(), AlgorithmError> {
        if eps > 0.0 && eps <= 1.0 {
            Ok(())
        } else {
            Err(AlgorithmError::InvalidGain(eps))
        }
    }

    /// Moves only the winner toward `x`. Returns the winner.
    pub fn scl_step(&mut self, x: &[f64], eps: f64) -> Result<usize, AlgorithmError> {
        Self::check_gain(eps)?;
        let w = find_winner(&self.codebook, x)?;
        move_toward(self.codebook.quantizer_mut(w), x, eps);
        self.t += 1;
        Ok(w)
    }

    /// Moves the winner and every unit of its neighborhood V(winner).
    pub fn som_step(&mut self, x: &[f64], eps: f64, nu: usize) -> Result<usize, AlgorithmError> {
        Self::check_gain(eps)?;
        let topology = *self.codebook.topology();
        topology.check_count(nu)?;
        let w = find_winner(&self.codebook, x)?;
        let codebook = &mut self.codebook;
        topology.for_each_neighbor(w, nu, |k| move_toward(codebook.quantizer_mut(k), x, eps));
        self.t += 1;
        Ok(w)
    }

    /// MacQueen update: the winner becomes the running mean of the data it
    /// has won. A unit's first win places it exactly on the datum.
    pub fn kmeans_step(&mut self, x: &[f64]) -> Result<usize, AlgorithmError> {
        let w = find_winner(&self.codebook, x)?;
        self.class_counts[w] += 1;
        let count = self.class_counts[w];
        let q = self.codebook.quantizer_mut(w);
        if count == 1 {
            q.copy_from_slice(x);
        } else {
            move_toward(q, x, 1.0 / count as f64);
        }
        self.t += 1;
        Ok(w)
    }
}

/// Per-class coordinate sums and counts for a batch pass.
fn class_sums(codebook: &Codebook, data: &[f64]) -> Result<(Vec<f64>, Vec<usize>), AlgorithmError> {
    let dim = codebook.dim();
    if data.is_empty() {
        return Err(AlgorithmError::EmptyData);
    }
    if !data.len().is_multiple_of(dim) {
        return Err(AlgorithmError::DimensionMismatch { expected: dim, got: data.len() % dim });
    }
    let mut sums = vec![0.0; codebook.as_slice().len()];
    let mut counts = vec![0usize; codebook.len()];
    for x in data.chunks_exact(dim) {
        let (w, _) = nearest(codebook.as_slice(), dim, x);
        counts[w] += 1;
        for (s, v) in sums[w * dim..(w + 1) * dim].iter_mut().zip(x) {
            *s += v;
        }
    }
    Ok((sums, counts))
}

/// One Forgy/Lloyd pass: every quantizer becomes the mean of its class.
/// Empty classes keep their quantizer.
pub fn bvq_iteration(codebook: &Codebook, data: &[f64]) -> Result<Codebook, AlgorithmError> {
    let (sums, counts) = class_sums(codebook, data)?;
    let dim = codebook.dim();
    let mut next = codebook.clone();
    for (i, &c) in counts.iter().enumerate() {
        if c > 0 {
            for (q, s) in next.quantizer_mut(i).iter_mut().zip(&sums[i * dim..(i + 1) * dim]) {
                *q = s / c as f64;
            }
        }
    }
    Ok(next)
}

/// One batch-SOM pass: q_j becomes the mean of the union of the classes
/// C_k for k in V(j). An empty union keeps the quantizer.
pub fn batch_som_iteration(codebook: &Codebook, data: &[f64], nu: usize) -> Result<Codebook, AlgorithmError> {
    let topology = *codebook.topology();
    topology.check_count(nu)?;
    let (sums, counts) = class_sums(codebook, data)?;
    let dim = codebook.dim();
    let mut next = codebook.clone();
    let mut acc = vec![0.0; dim];
    for j in 0..codebook.len() {
        acc.iter_mut().for_each(|a| *a = 0.0);
        let mut count = 0usize;
        topology.for_each_neighbor(j, nu, |k| {
            count += counts[k];
            for (a, s) in acc.iter_mut().zip(&sums[k * dim..(k + 1) * dim]) {
                *a += s;
            }
        });
        if count > 0 {
            for (q, a) in next.quantizer_mut(j).iter_mut().zip(&acc) {
                *q = a / count as f64;
            }
        }
    }
    Ok(next)
}

/// Algorithm selector as written in config files:
/// `scl`, `som:<ν>`, `kscl:<ν>:<fraction>`, `bvq`, `batch_som:<ν>`,
/// `som_decreasing[:<f1:ν1,...>]`, `kmeans`.
#[derive(Debug, Clone, PartialEq)]
pub enum AlgorithmSpec {
    Scl,
    Som(usize),
    Kscl { nu: usize, switch_fraction: f64 },
    Bvq,
    BatchSom(usize),
    SomDecreasing(Vec<(f64, usize)>),
    KMeans,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Rule {
    Competitive,
    KMeans,
    Batch,
}

impl AlgorithmSpec {
    pub fn is_batch(&self) -> bool {
        matches!(self, AlgorithmSpec::Bvq | AlgorithmSpec::BatchSom(_))
    }

    pub fn neighbor_plan(&self) -> NeighborPlan {
        match self {
            AlgorithmSpec::Scl | AlgorithmSpec::Bvq | AlgorithmSpec::KMeans => NeighborPlan::Fixed(0),
            AlgorithmSpec::Som(nu) | AlgorithmSpec::BatchSom(nu) => NeighborPlan::Fixed(*nu),
            AlgorithmSpec::Kscl { nu, switch_fraction } => {
                NeighborPlan::SomToScl { nu: *nu, switch_fraction: *switch_fraction }
            }
            AlgorithmSpec::SomDecreasing(segments) => NeighborPlan::Piecewise(segments.clone()),
        }
    }

    /// The stochastic SOM spec that follows a given neighbor plan.
    pub fn from_plan(plan: &NeighborPlan) -> Self {
        match plan {
            NeighborPlan::Fixed(nu) => AlgorithmSpec::Som(*nu),
            NeighborPlan::SomToScl { nu, switch_fraction } => {
                AlgorithmSpec::Kscl { nu: *nu, switch_fraction: *switch_fraction }
            }
            NeighborPlan::Piecewise(s) => AlgorithmSpec::SomDecreasing(s.clone()),
        }
    }

    fn rule(&self) -> Rule {
        match self {
            AlgorithmSpec::KMeans => Rule::KMeans,
            s if s.is_batch() => Rule::Batch,
            _ => Rule::Competitive,
        }
    }

    /// File-name friendly form of the spec.
    pub fn slug(&self) -> String {
        self.to_string().replace([':', ','], "_")
    }
}

impl fmt::Display for AlgorithmSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AlgorithmSpec::Scl => f.write_str("scl"),
            AlgorithmSpec::Som(nu) => write!(f, "som:{nu}"),
            AlgorithmSpec::Kscl { nu, switch_fraction } => write!(f, "kscl:{nu}:{switch_fraction}"),
            AlgorithmSpec::Bvq => f.write_str("bvq"),
            AlgorithmSpec::BatchSom(nu) => write!(f, "batch_som:{nu}"),
            AlgorithmSpec::SomDecreasing(s) => write!(f, "som_decreasing:{}", NeighborPlan::format_segments(s)),
            AlgorithmSpec::KMeans => f.write_str("kmeans"),
        }
    }
}

impl FromStr for AlgorithmSpec {
    type Err = AlgorithmError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || AlgorithmError::ConfigInvalid(format!("unknown algorithm spec `{s}`"));
        let s = s.trim();
        let (head, rest) = match s.split_once(':') {
            Some((h, r)) => (h, Some(r)),
            None => (s, None),
        };
        let count = |r: Option<&str>| r.and_then(|r| r.trim().parse::<usize>().ok()).ok_or_else(bad);
        match (head, rest) {
            ("scl", None) => Ok(AlgorithmSpec::Scl),
            ("bvq", None) => Ok(AlgorithmSpec::Bvq),
            ("kmeans", None) => Ok(AlgorithmSpec::KMeans),
            ("som", r @ Some(_)) => Ok(AlgorithmSpec::Som(count(r)?)),
            ("batch_som", r @ Some(_)) => Ok(AlgorithmSpec::BatchSom(count(r)?)),
            ("kscl", Some(r)) => {
                let (nu, frac) = r.split_once(':').ok_or_else(bad)?;
                let nu = nu.trim().parse().map_err(|_| bad())?;
                let switch_fraction: f64 = frac.trim().parse().map_err(|_| bad())?;
                if !(0.0..=1.0).contains(&switch_fraction) {
                    return Err(bad());
                }
                Ok(AlgorithmSpec::Kscl { nu, switch_fraction })
            }
            ("som_decreasing", None) => match NeighborPlan::default_decreasing() {
                NeighborPlan::Piecewise(s) => Ok(AlgorithmSpec::SomDecreasing(s)),
                _ => unreachable!(),
            },
            ("som_decreasing", Some(r)) => {
                NeighborPlan::parse_segments(r).map(AlgorithmSpec::SomDecreasing).ok_or_else(bad)
            }
            _ => Err(bad()),
        }
    }
}

/// Seeded random source for one purpose (data, initialization, ...) of one
/// seed. Distinct streams of the same seed are independent.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

pub trait DataSource {
    fn dim(&self) -> usize;
    /// Writes the next datum into `out`.
    fn next_into(&mut self, out: &mut [f64]);
    /// The whole finite data set, when the source has one.
    fn finite(&self) -> Option<&[f64]> {
        None
    }
}

/// Independent draws from an analytic density.
#[derive(Debug, Clone)]
pub struct DensityStream {
    density: Density,
    rng: ChaCha8Rng,
}

impl DensityStream {
    pub fn new(density: Density, rng: ChaCha8Rng) -> Self {
        DensityStream { density, rng }
    }
}

impl DataSource for DensityStream {
    fn dim(&self) -> usize {
        1
    }

    fn next_into(&mut self, out: &mut [f64]) {
        out[0] = self.density.sample(&mut self.rng);
    }
}

/// Rows of a finite data set drawn uniformly with replacement.
#[derive(Debug, Clone)]
pub struct DatasetStream<'a> {
    rows: &'a [f64],
    dim: usize,
    rng: ChaCha8Rng,
}

impl<'a> DatasetStream<'a> {
    pub fn new(rows: &'a [f64], dim: usize, rng: ChaCha8Rng) -> Result<Self, AlgorithmError> {
        if rows.is_empty() || dim == 0 || !rows.len().is_multiple_of(dim) {
            return Err(AlgorithmError::EmptyData);
        }
        Ok(DatasetStream { rows, dim, rng })
    }
}

impl DataSource for DatasetStream<'_> {
    fn dim(&self) -> usize {
        self.dim
    }

    fn next_into(&mut self, out: &mut [f64]) {
        let count = self.rows.len() / self.dim;
        let i = self.rng.gen_range(0..count);
        out.copy_from_slice(&self.rows[i * self.dim..(i + 1) * self.dim]);
    }

    fn finite(&self) -> Option<&[f64]> {
        Some(self.rows)
    }
}

/// Iteration budget and probing cadence of one run.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub spec: AlgorithmSpec,
    pub gain: Gain,
    /// Steps for stochastic rules, passes for batch rules.
    pub total: u64,
    pub stride: u64,
    /// Points drawn for batch rules when the source is not finite.
    pub batch_size: usize,
}

pub struct RunOutput {
    pub trace: MetricTrace,
    pub codebook: Codebook,
}

/// Runs one algorithm from `initial`, firing every probe at iterations
/// 0, stride, 2·stride, ... and at `total`.
///
/// `metadata` is copied into the trace, extended with the neighbor plan,
/// the iteration unit and a SHA-256 digest of every datum consumed.
pub fn run(
    config: &RunConfig,
    initial: Codebook,
    source: &mut dyn DataSource,
    probes: &[&dyn Probe],
    mut metadata: TraceMetadata,
) -> Result<RunOutput, AlgorithmError> {
    if config.total == 0 || config.stride == 0 {
        return Err(AlgorithmError::ConfigInvalid("total and stride must be positive".into()));
    }
    if source.dim() != initial.dim() {
        return Err(AlgorithmError::DimensionMismatch { expected: initial.dim(), got: source.dim() });
    }
    let plan = config.spec.neighbor_plan();
    plan.validate(initial.topology())?;
    let rule = config.spec.rule();
    metadata.set("neighbor_plan", plan.to_string());
    metadata.set("iteration_unit", if rule == Rule::Batch { "pass" } else { "step" });

    let mut trace = MetricTrace::new(metadata);
    let mut record = |t: u64, codebook: &Codebook| -> Result<(), AlgorithmError> {
        for probe in probes {
            trace.push(t, probe.name(), probe.evaluate(codebook)?)?;
        }
        Ok(())
    };
    let mut hasher = Sha256::new();
    let total = config.total;

    let codebook = if rule == Rule::Batch {
        let drawn;
        let data: &[f64] = match source.finite() {
            Some(rows) => rows,
            None => {
                let mut buf = vec![0.0; config.batch_size * source.dim()];
                for x in buf.chunks_exact_mut(source.dim()) {
                    source.next_into(x);
                }
                drawn = buf;
                &drawn
            }
        };
        data.iter().for_each(|v| hasher.update(v.to_le_bytes()));
        let mut codebook = initial;
        for pass in 0..total {
            if pass % config.stride == 0 {
                record(pass, &codebook)?;
            }
            codebook = batch_som_iteration(&codebook, data, plan.at(pass, total))?;
        }
        codebook
    } else {
        let mut state = RunState::new(initial);
        let mut x = vec![0.0; source.dim()];
        for t in 0..total {
            if t % config.stride == 0 {
                record(t, &state.codebook)?;
            }
            source.next_into(&mut x);
            x.iter().for_each(|v| hasher.update(v.to_le_bytes()));
            match rule {
                Rule::KMeans => state.kmeans_step(&x)?,
                _ => state.som_step(&x, config.gain.at(t), plan.at(t, total))?,
            };
        }
        state.codebook
    };
    record(total, &codebook)?;
    trace.metadata.set("stream_digest", hex::encode(hasher.finalize()));
    Ok(RunOutput { trace, codebook })
}
