//! Codebooks, neighborhood structures and the adaptation schedules shared
//! by the stochastic and batch algorithms.

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TopologyError {
    #[error("neighbor count {nu} is not defined for a {kind} topology")]
    UnsupportedCount { nu: usize, kind: &'static str },
    #[error("unit {unit} out of range for {units} units")]
    UnitOutOfRange { unit: usize, units: usize },
    #[error("codebook has {values} values, not a multiple of dimension {dim}")]
    Shape { values: usize, dim: usize },
    #[error("codebook has {quantizers} quantizers but the topology has {units} units")]
    UnitCountMismatch { quantizers: usize, units: usize },
    #[error("invalid schedule `{0}`")]
    InvalidSchedule(String),
    #[error("invalid topology: {0}")]
    InvalidTopology(String),
}

/// Hard neighborhood structure between units.
///
/// Chain counts ν exclude the unit itself (ν = 2 is one unit on each side).
/// Grid counts ν ∈ {5, 9, 25} include it: the radius-1 cross, the 3×3 block
/// and the 5×5 block. On both, ν ∈ {0, 1} is the unit alone. Edges truncate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Topology {
    Chain { units: usize },
    Grid { rows: usize, cols: usize },
}

impl Topology {
    pub fn chain(units: usize) -> Self {
        Topology::Chain { units }
    }

    pub fn grid(rows: usize, cols: usize) -> Self {
        Topology::Grid { rows, cols }
    }

    pub fn unit_count(&self) -> usize {
        match *self {
            Topology::Chain { units } => units,
            Topology::Grid { rows, cols } => rows * cols,
        }
    }

    fn kind_name(&self) -> &'static str {
        match self {
            Topology::Chain { .. } => "chain",
            Topology::Grid { .. } => "grid",
        }
    }

    pub fn supports(&self, nu: usize) -> bool {
        match self {
            Topology::Chain { .. } => nu <= 1 || nu.is_multiple_of(2),
            Topology::Grid { .. } => matches!(nu, 0 | 1 | 5 | 9 | 25),
        }
    }

    pub fn check_count(&self, nu: usize) -> Result<(), TopologyError> {
        if self.supports(nu) {
            Ok(())
        } else {
            Err(TopologyError::UnsupportedCount { nu, kind: self.kind_name() })
        }
    }

    /// Calls `visit` on every unit of V(unit) in increasing index order.
    /// `nu` must already be validated.
    pub(crate) fn for_each_neighbor(&self, unit: usize, nu: usize, mut visit: impl FnMut(usize)) {
        if nu <= 1 {
            visit(unit);
            return;
        }
        match *self {
            Topology::Chain { units } => {
                let radius = nu / 2;
                let lo = unit.saturating_sub(radius);
                let hi = (unit + radius).min(units - 1);
                (lo..=hi).for_each(visit);
            }
            Topology::Grid { rows, cols } => {
                let (r, c) = (unit / cols, unit % cols);
                let radius = if nu == 25 { 2 } else { 1 };
                let cross = nu == 5;
                for rr in r.saturating_sub(radius)..=(r + radius).min(rows - 1) {
                    for cc in c.saturating_sub(radius)..=(c + radius).min(cols - 1) {
                        if cross && rr.abs_diff(r) + cc.abs_diff(c) > 1 {
                            continue;
                        }
                        visit(rr * cols + cc);
                    }
                }
            }
        }
    }

    /// V(unit) for neighbor count `nu`, sorted ascending.
    pub fn neighbor_set(&self, unit: usize, nu: usize) -> Result<Vec<usize>, TopologyError> {
        let units = self.unit_count();
        if unit >= units {
            return Err(TopologyError::UnitOutOfRange { unit, units });
        }
        self.check_count(nu)?;
        let mut out = Vec::new();
        self.for_each_neighbor(unit, nu, |k| out.push(k));
        Ok(out)
    }
}

impl fmt::Display for Topology {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Topology::Chain { units } => write!(f, "chain({units})"),
            Topology::Grid { rows, cols } => write!(f, "grid({rows}x{cols})"),
        }
    }
}

/// n quantizer vectors of dimension `dim`, stored row-major, attached to a
/// neighborhood structure with the same unit count.
#[derive(Debug, Clone, PartialEq)]
pub struct Codebook {
    dim: usize,
    values: Vec<f64>,
    topology: Topology,
}

impl Codebook {
    pub fn new(dim: usize, values: Vec<f64>, topology: Topology) -> Result<Self, TopologyError> {
        if dim == 0 || !values.len().is_multiple_of(dim) {
            return Err(TopologyError::Shape { values: values.len(), dim });
        }
        let quantizers = values.len() / dim;
        if quantizers == 0 || quantizers != topology.unit_count() {
            return Err(TopologyError::UnitCountMismatch { quantizers, units: topology.unit_count() });
        }
        Ok(Codebook { dim, values, topology })
    }

    /// One-dimensional codebook on a chain.
    pub fn from_scalars(q: &[f64]) -> Result<Self, TopologyError> {
        Codebook::new(1, q.to_vec(), Topology::chain(q.len()))
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.values.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn topology(&self) -> &Topology {
        &self.topology
    }

    pub fn quantizer(&self, i: usize) -> &[f64] {
        &self.values[i * self.dim..(i + 1) * self.dim]
    }

    pub fn quantizer_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.values[i * self.dim..(i + 1) * self.dim]
    }

    pub fn quantizers(&self) -> impl Iterator<Item = &[f64]> {
        self.values.chunks_exact(self.dim)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.values
    }

    /// Flattened values; for a 1-D codebook these are the quantizers.
    pub fn to_vec(&self) -> Vec<f64> {
        self.values.clone()
    }
}

/// Adaptation gain ε(t).
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Gain {
    Constant(f64),
    /// ε(t) = ε₀ / (1 + t/τ).
    RobbinsMonro { initial: f64, tau: f64 },
}

impl Gain {
    pub fn at(&self, t: u64) -> f64 {
        match *self {
            Gain::Constant(eps) => eps,
            Gain::RobbinsMonro { initial, tau } => initial / (1.0 + t as f64 / tau),
        }
    }

    fn validate(self, text: &str) -> Result<Self, TopologyError> {
        let ok = match self {
            Gain::Constant(e) => e > 0.0 && e <= 1.0,
            Gain::RobbinsMonro { initial, tau } => initial > 0.0 && initial <= 1.0 && tau > 0.0,
        };
        if ok {
            Ok(self)
        } else {
            Err(TopologyError::InvalidSchedule(text.to_string()))
        }
    }
}

impl fmt::Display for Gain {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Gain::Constant(e) => write!(f, "constant:{e}"),
            Gain::RobbinsMonro { initial, tau } => write!(f, "rm:{initial}:{tau}"),
        }
    }
}

impl FromStr for Gain {
    type Err = TopologyError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || TopologyError::InvalidSchedule(s.to_string());
        let parts: Vec<&str> = s.trim().split(':').collect();
        let num = |p: &str| p.trim().parse::<f64>().map_err(|_| bad());
        let gain = match parts.as_slice() {
            ["constant", e] => Gain::Constant(num(e)?),
            ["rm", e, tau] => Gain::RobbinsMonro { initial: num(e)?, tau: num(tau)? },
            _ => return Err(bad()),
        };
        gain.validate(s)
    }
}

/// Neighbor count ν as a function of the iteration.
#[derive(Debug, Clone, PartialEq)]
pub enum NeighborPlan {
    Fixed(usize),
    /// (end fraction, ν) segments with increasing end fractions; the last
    /// segment also covers anything past its end.
    Piecewise(Vec<(f64, usize)>),
    /// ν before `switch_fraction · T`, then the unit alone.
    SomToScl { nu: usize, switch_fraction: f64 },
}

impl NeighborPlan {
    /// Four equal phases 25 → 9 → 5 → 1.
    pub fn default_decreasing() -> Self {
        NeighborPlan::Piecewise(vec![(0.25, 25), (0.5, 9), (0.75, 5), (1.0, 1)])
    }

    pub fn at(&self, t: u64, total: u64) -> usize {
        match self {
            NeighborPlan::Fixed(nu) => *nu,
            NeighborPlan::SomToScl { nu, switch_fraction } => {
                if t < fraction_step(*switch_fraction, total) {
                    *nu
                } else {
                    1
                }
            }
            NeighborPlan::Piecewise(segments) => segments
                .iter()
                .find(|(end, _)| t < fraction_step(*end, total))
                .or(segments.last())
                .map(|&(_, nu)| nu)
                .unwrap_or(1),
        }
    }

    /// Every ν the plan can return.
    pub fn counts(&self) -> Vec<usize> {
        match self {
            NeighborPlan::Fixed(nu) => vec![*nu],
            NeighborPlan::SomToScl { nu, .. } => vec![*nu, 1],
            NeighborPlan::Piecewise(segments) => segments.iter().map(|s| s.1).collect(),
        }
    }

    pub fn validate(&self, topology: &Topology) -> Result<(), TopologyError> {
        self.counts().into_iter().try_for_each(|nu| topology.check_count(nu))
    }

    /// The `<f1:ν1,...>` body used by both the plan and algorithm syntaxes.
    pub(crate) fn parse_segments(body: &str) -> Option<Vec<(f64, usize)>> {
        let mut segments = Vec::new();
        for item in body.split(',') {
            let (f, nu) = item.trim().split_once(':')?;
            segments.push((f.trim().parse::<f64>().ok()?, nu.trim().parse::<usize>().ok()?));
        }
        let increasing = segments.windows(2).all(|w| w[0].0 < w[1].0);
        let in_range = segments.iter().all(|s| s.0 > 0.0 && s.0 <= 1.0);
        (!segments.is_empty() && increasing && in_range).then_some(segments)
    }

    pub(crate) fn format_segments(segments: &[(f64, usize)]) -> String {
        segments.iter().map(|(f, nu)| format!("{f}:{nu}")).collect::<Vec<_>>().join(",")
    }
}

/// Step index at which a fraction of `total` begins.
pub(crate) fn fraction_step(fraction: f64, total: u64) -> u64 {
    (fraction * total as f64).round() as u64
}

impl fmt::Display for NeighborPlan {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            NeighborPlan::Fixed(nu) => write!(f, "fixed:{nu}"),
            NeighborPlan::SomToScl { nu, switch_fraction } => write!(f, "som_to_scl:{nu}:{switch_fraction}"),
            NeighborPlan::Piecewise(s) => write!(f, "piecewise:{}", NeighborPlan::format_segments(s)),
        }
    }
}

impl FromStr for NeighborPlan {
    type Err = TopologyError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || TopologyError::InvalidSchedule(s.to_string());
        let (head, rest) = s.trim().split_once(':').ok_or_else(bad)?;
        match head {
            "fixed" => rest.trim().parse().map(NeighborPlan::Fixed).map_err(|_| bad()),
            "som_to_scl" => {
                let (nu, frac) = rest.split_once(':').ok_or_else(bad)?;
                let nu = nu.trim().parse().map_err(|_| bad())?;
                let switch_fraction: f64 = frac.trim().parse().map_err(|_| bad())?;
                if !(0.0..=1.0).contains(&switch_fraction) {
                    return Err(bad());
                }
                Ok(NeighborPlan::SomToScl { nu, switch_fraction })
            }
            "piecewise" => NeighborPlan::parse_segments(rest).map(NeighborPlan::Piecewise).ok_or_else(bad),
            _ => Err(bad()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Schedule {
    pub gain: Gain,
    pub neighbors: NeighborPlan,
}

impl Schedule {
    pub fn gain_at(&self, t: u64) -> f64 {
        self.gain.at(t)
    }

    pub fn neighbors_at(&self, t: u64, total: u64) -> usize {
        self.neighbors.at(t, total)
    }
}
