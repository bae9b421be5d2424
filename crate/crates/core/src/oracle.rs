//! Exact optimal quantizers for one-dimensional densities.
//!
//! In 1-D with ordered quantizers the Voronoi classes are intervals bounded
//! by adjacent midpoints, so a stationary codebook solves two coupled sets of
//! equations: boundaries from quantizers, and quantizers as the conditional
//! means of their intervals. Alternating the two converges to a (locally)
//! optimal codebook, which is the ground truth for the error measure.

use std::io::{self, Write};

use thiserror::Error;

use crate::densities::{Density, DensityError};

pub const DEFAULT_TOL: f64 = 1e-12;
pub const DEFAULT_MAX_ITER: usize = 100_000;
pub const DEFAULT_EMPIRICAL_TOL: f64 = 1e-10;
/// Sample size for the Gaussian empirical cross-check.
pub const DEFAULT_EMPIRICAL_SAMPLES: usize = 10_000_000;

#[derive(Debug, Error)]
pub enum OracleError {
    #[error("quantizers must be strictly increasing (violated at index {index})")]
    NotSorted { index: usize },
    #[error("at least {required} quantizers are required, got {got}")]
    TooFewQuantizers { required: usize, got: usize },
    #[error("no quantizers supplied")]
    Empty,
    #[error("sample is empty")]
    EmptyData,
    #[error("interval {index} carries no probability mass")]
    ZeroMass {
        index: usize,
        #[source]
        source: DensityError,
    },
    #[error("no convergence after {} iterations (residual {:e})", .0.iterations_used, .0.residual)]
    NoConvergence(Box<QuantizerSolution>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct QuantizerSolution {
    pub quantizers: Vec<f64>,
    /// n + 1 interval limits: support low, internal midpoints, support high.
    pub boundaries: Vec<f64>,
    pub iterations_used: usize,
    /// max |q_i - centroid(C_i)| at the returned quantizers.
    pub residual: f64,
}

impl QuantizerSolution {
    /// Writes `index,quantizer,boundary_low,boundary_high` rows behind a
    /// `#` metadata header.
    pub fn write_csv<W: Write>(&self, mut out: W, source: &str, tol: f64) -> io::Result<()> {
        writeln!(out, "# source = {source}")?;
        writeln!(out, "# n = {}", self.quantizers.len())?;
        writeln!(out, "# tol = {tol:?}")?;
        writeln!(out, "# residual = {:?}", self.residual)?;
        writeln!(out, "# iterations = {}", self.iterations_used)?;
        writeln!(out, "index,quantizer,boundary_low,boundary_high")?;
        for (i, q) in self.quantizers.iter().enumerate() {
            writeln!(
                out,
                "{},{:?},{:?},{:?}",
                i + 1,
                q,
                self.boundaries[i],
                self.boundaries[i + 1]
            )?;
        }
        Ok(())
    }
}

fn check_increasing(q: &[f64]) -> Result<(), OracleError> {
    if q.is_empty() {
        return Err(OracleError::Empty);
    }
    for (i, pair) in q.windows(2).enumerate() {
        if !(pair[0] < pair[1]) {
            return Err(OracleError::NotSorted { index: i + 1 });
        }
    }
    Ok(())
}

/// Interval limits of the 1-D Voronoi classes of an ordered codebook.
pub fn boundaries_from_quantizers(q: &[f64], support: (f64, f64)) -> Result<Vec<f64>, OracleError> {
    check_increasing(q)?;
    let mut b = Vec::with_capacity(q.len() + 1);
    b.push(support.0);
    b.extend(q.windows(2).map(|w| 0.5 * (w[0] + w[1])));
    b.push(support.1);
    Ok(b)
}

/// Conditional mean of the density on each interval.
pub fn centroid_update(density: Density, boundaries: &[f64]) -> Result<Vec<f64>, OracleError> {
    boundaries
        .windows(2)
        .enumerate()
        .map(|(index, w)| {
            density
                .conditional_mean(w[0], w[1])
                .map_err(|source| OracleError::ZeroMass { index, source })
        })
        .collect()
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// Alternates boundary and centroid updates until the codebook moves by
/// less than `tol`.
pub fn solve_fixed_point(
    density: Density,
    q0: &[f64],
    tol: f64,
    max_iter: usize,
) -> Result<QuantizerSolution, OracleError> {
    let support = density.support();
    let mut q = q0.to_vec();
    let mut iterations = 0;
    loop {
        let boundaries = boundaries_from_quantizers(&q, support)?;
        let next = centroid_update(density, &boundaries)?;
        let residual = max_abs_diff(&next, &q);
        if residual < tol || iterations >= max_iter {
            let solution = QuantizerSolution {
                quantizers: q,
                boundaries,
                iterations_used: iterations,
                residual,
            };
            return if residual < tol {
                Ok(solution)
            } else {
                Err(OracleError::NoConvergence(Box::new(solution)))
            };
        }
        q = next;
        iterations += 1;
    }
}

/// A sorted copy of a sample with prefix sums for O(log N) interval means.
#[derive(Debug, Clone)]
pub struct SortedSample {
    values: Vec<f64>,
    prefix: Vec<f64>,
}

impl SortedSample {
    pub fn new(sample: &[f64]) -> Self {
        let mut values = sample.to_vec();
        values.sort_by(f64::total_cmp);
        let mut prefix = Vec::with_capacity(values.len() + 1);
        let mut acc = 0.0;
        prefix.push(acc);
        for v in &values {
            acc += v;
            prefix.push(acc);
        }
        SortedSample { values, prefix }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Number of points `<= x`.
    fn rank(&self, x: f64) -> usize {
        self.values.partition_point(|&v| v <= x)
    }

    /// Mean of the points in `(low, high]` (with `low = -inf` including
    /// everything below `high`), or `None` if the interval is empty.
    pub fn interval_mean(&self, low: f64, high: f64) -> Option<f64> {
        let start = if low == f64::NEG_INFINITY { 0 } else { self.rank(low) };
        let end = self.rank(high);
        if end <= start {
            return None;
        }
        let sum: f64 = self.values[start..end].iter().sum();
        Some(sum / (end - start) as f64)
    }
}

/// Same alternation as [`solve_fixed_point`] but with class averages over a
/// finite sample. Points on a midpoint belong to the lower class. A class
/// that receives no points keeps its quantizer for that sweep.
pub fn solve_empirical(
    sample: &[f64],
    q0: &[f64],
    tol: f64,
    max_iter: usize,
) -> Result<QuantizerSolution, OracleError> {
    if sample.is_empty() {
        return Err(OracleError::EmptyData);
    }
    solve_empirical_sorted(&SortedSample::new(sample), q0, tol, max_iter)
}

pub fn solve_empirical_sorted(
    sample: &SortedSample,
    q0: &[f64],
    tol: f64,
    max_iter: usize,
) -> Result<QuantizerSolution, OracleError> {
    if sample.is_empty() {
        return Err(OracleError::EmptyData);
    }
    let support = (sample.values[0], sample.values[sample.len() - 1]);
    let mut q = q0.to_vec();
    let mut iterations = 0;
    loop {
        let boundaries = boundaries_from_quantizers(&q, support)?;
        let n = q.len();
        let mut next = q.clone();
        let mut start = 0;
        for (i, slot) in next.iter_mut().enumerate() {
            let end = if i + 1 == n { sample.len() } else { sample.rank(boundaries[i + 1]) };
            if end > start {
                let sum = sample.prefix[end] - sample.prefix[start];
                *slot = sum / (end - start) as f64;
            }
            start = end.max(start);
        }
        let residual = max_abs_diff(&next, &q);
        if residual < tol || iterations >= max_iter {
            let solution = QuantizerSolution {
                quantizers: q,
                boundaries,
                iterations_used: iterations,
                residual,
            };
            return if residual < tol {
                Ok(solution)
            } else {
                Err(OracleError::NoConvergence(Box::new(solution)))
            };
        }
        q = next;
        iterations += 1;
    }
}

/// Extended classes C_{i-1} ∪ C_i ∪ C_{i+1} of the two-neighbor chain,
/// with the two outermost classes on each side pinned to the support.
pub fn som_limit_boundaries(q: &[f64], support: (f64, f64)) -> Result<Vec<(f64, f64)>, OracleError> {
    check_increasing(q)?;
    let n = q.len();
    if n < 4 {
        return Err(OracleError::TooFewQuantizers { required: 4, got: n });
    }
    Ok((0..n)
        .map(|i| {
            let low = if i < 2 { support.0 } else { 0.5 * (q[i - 2] + q[i - 1]) };
            let high = if i + 2 >= n { support.1 } else { 0.5 * (q[i + 1] + q[i + 2]) };
            (low, high)
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn boundaries_are_midpoints() {
        assert_eq!(boundaries_from_quantizers(&[0.2, 0.8], (0.0, 1.0)).unwrap(), vec![0.0, 0.5, 1.0]);
        assert_eq!(boundaries_from_quantizers(&[2.0 / 3.0], (0.0, 1.0)).unwrap(), vec![0.0, 1.0]);
        assert_eq!(
            boundaries_from_quantizers(&[0.25, 0.5, 0.75], (0.0, 1.0)).unwrap(),
            vec![0.0, 0.375, 0.625, 1.0]
        );
        assert!(matches!(
            boundaries_from_quantizers(&[0.5, 0.5], (0.0, 1.0)),
            Err(OracleError::NotSorted { index: 1 })
        ));
    }

    #[test]
    fn centroid_update_examples() {
        let q = centroid_update(Density::Linear2x, &[0.0, 1.0]).unwrap();
        assert!((q[0] - 2.0 / 3.0).abs() < 1e-15);
        let q = centroid_update(Density::Exponential, &[0.0, f64::INFINITY]).unwrap();
        assert_eq!(q, vec![1.0]);
        assert!(matches!(
            centroid_update(Density::Linear2x, &[0.0, 0.5, 1.0, 2.0]),
            Err(OracleError::ZeroMass { index: 2, .. })
        ));
    }

    #[test]
    fn stationary_start_takes_no_iteration() {
        let sol = solve_fixed_point(Density::Quadratic3x2, &[0.3, 0.6, 0.9], 1e-13, DEFAULT_MAX_ITER).unwrap();
        let again = solve_fixed_point(Density::Quadratic3x2, &sol.quantizers, 1e-13, DEFAULT_MAX_ITER).unwrap();
        assert!(again.iterations_used <= 1);
        assert!(max_abs_diff(&sol.quantizers, &again.quantizers) < 1e-12);
    }

    #[test]
    fn no_convergence_returns_partial_solution() {
        match solve_fixed_point(Density::Linear2x, &[0.1, 0.2, 0.3], 1e-15, 3) {
            Err(OracleError::NoConvergence(sol)) => {
                assert_eq!(sol.iterations_used, 3);
                assert!(sol.residual >= 1e-15);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn empirical_two_points() {
        let sol = solve_empirical(&[0.0, 1.0], &[0.1, 0.9], DEFAULT_EMPIRICAL_TOL, 100).unwrap();
        assert_eq!(sol.quantizers, vec![0.0, 1.0]);
    }

    #[test]
    fn empirical_empty_class_keeps_quantizer() {
        let sol = solve_empirical(&[0.0, 0.1, 0.9, 1.0], &[0.05, 0.5, 0.95], 1e-12, 100).unwrap();
        assert_eq!(sol.quantizers, vec![0.05, 0.5, 0.95]);
        assert!(matches!(solve_empirical(&[], &[0.5], 1e-12, 10), Err(OracleError::EmptyData)));
    }

    #[test]
    fn som_limit_examples() {
        let q = [0.1, 0.3, 0.5, 0.7];
        let c = som_limit_boundaries(&q, (0.0, 1.0)).unwrap();
        assert_eq!(c[1], (0.0, 0.6));
        assert!((c[2].0 - 0.2).abs() < 1e-15 && c[2].1 == 1.0);
        assert!(matches!(
            som_limit_boundaries(&[0.1, 0.2, 0.3], (0.0, 1.0)),
            Err(OracleError::TooFewQuantizers { .. })
        ));
        assert!(matches!(
            som_limit_boundaries(&[0.1, 0.3, 0.2, 0.4], (0.0, 1.0)),
            Err(OracleError::NotSorted { .. })
        ));
        // equally spaced interior: width 3 spacings centered on q_i
        let q: Vec<f64> = (0..10).map(|i| i as f64).collect();
        let c = som_limit_boundaries(&q, (-1.0, 10.0)).unwrap();
        for i in 2..8 {
            assert_eq!(c[i].1 - c[i].0, 3.0);
            assert_eq!(0.5 * (c[i].0 + c[i].1), q[i]);
        }
    }

    #[test]
    fn interval_mean_convention() {
        let s = SortedSample::new(&[0.3, 0.1, 0.2, 0.4]);
        assert_eq!(s.interval_mean(0.1, 0.3), Some(0.25));
        assert_eq!(s.interval_mean(f64::NEG_INFINITY, 0.1), Some(0.1));
        assert_eq!(s.interval_mean(0.4, 1.0), None);
    }

    #[test]
    fn solution_csv_layout() {
        let sol = solve_fixed_point(Density::Linear2x, &[0.3, 0.7], 1e-12, DEFAULT_MAX_ITER).unwrap();
        let mut buf = Vec::new();
        sol.write_csv(&mut buf, "linear2x", 1e-12).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert!(lines[0].starts_with("# source = linear2x"));
        assert_eq!(lines[5], "index,quantizer,boundary_low,boundary_high");
        assert!(lines[6].starts_with("1,0.41202265"));
        assert!(lines[7].ends_with(",1.0"));
    }
}
