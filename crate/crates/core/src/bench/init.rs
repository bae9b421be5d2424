//! Shared starting codebooks.

use rand::distributions::Open01;
use rand::seq::index::sample;
use rand::Rng;

use crate::algorithms::stream_rng;
use crate::densities::Density;
use crate::topology::{Codebook, Topology};

use super::config::InitMode;
use super::dataset::Dataset;
use super::{BenchError, INIT_STREAM};

/// Half-width of the `seeded_center` box, in column standard deviations.
pub const CENTER_BOX: f64 = 0.05;

#[derive(Debug, Clone)]
pub enum DataModel {
    Density(Density),
    Dataset(Dataset),
}

impl DataModel {
    pub fn dim(&self) -> usize {
        match self {
            DataModel::Density(_) => 1,
            DataModel::Dataset(d) => d.dim,
        }
    }
}

fn sort_by_first(values: Vec<f64>, dim: usize) -> Vec<f64> {
    let mut rows: Vec<&[f64]> = values.chunks_exact(dim).collect();
    rows.sort_by(|a, b| a[0].total_cmp(&b[0]));
    rows.concat()
}

/// The codebook every algorithm of one seed starts from. `topology` must
/// have `n` units.
pub fn initial_codebook(
    mode: InitMode,
    data: &DataModel,
    n: usize,
    topology: Topology,
    seed: u64,
) -> Result<Codebook, BenchError> {
    if n == 0 {
        return Err(BenchError::Config("n must be at least 1".into()));
    }
    let mut rng = stream_rng(seed, INIT_STREAM);
    let dim = data.dim();
    let values = match (mode, data) {
        (InitMode::QuantileGrid, DataModel::Density(d)) => {
            (0..n).map(|i| d.quantile((i as f64 + 0.5) / n as f64)).collect()
        }
        (InitMode::SeededSortedUniform, DataModel::Density(d)) => {
            let mut q: Vec<f64> = (0..n).map(|_| d.quantile(rng.sample(Open01))).collect();
            q.sort_by(f64::total_cmp);
            q
        }
        (InitMode::SeededSortedUniform, DataModel::Dataset(ds)) => {
            let (lo, hi) = column_ranges(ds);
            let v = (0..n * dim).map(|k| lo[k % dim] + (hi[k % dim] - lo[k % dim]) * rng.gen::<f64>()).collect();
            sort_by_first(v, dim)
        }
        (InitMode::SeededCenter, DataModel::Density(d)) => {
            let half = CENTER_BOX * d.standard_deviation();
            let mut q: Vec<f64> = (0..n).map(|_| d.mean() + half * rng.gen_range(-1.0..1.0)).collect();
            q.sort_by(f64::total_cmp);
            q
        }
        (InitMode::SeededCenter, DataModel::Dataset(ds)) => {
            let moments = ds.column_moments();
            let v = (0..n * dim)
                .map(|k| {
                    let (mean, sd) = moments[k % dim];
                    mean + CENTER_BOX * sd * rng.gen_range(-1.0..1.0)
                })
                .collect();
            sort_by_first(v, dim)
        }
        (InitMode::SeededDataPoints, DataModel::Dataset(ds)) => {
            let mut distinct: Vec<&[f64]> = Vec::new();
            for i in 0..ds.len() {
                if !distinct.contains(&ds.row(i)) {
                    distinct.push(ds.row(i));
                }
            }
            if distinct.len() < n {
                return Err(BenchError::NotEnoughDistinctPoints { needed: n, distinct: distinct.len() });
            }
            let mut picked: Vec<usize> = sample(&mut rng, distinct.len(), n).into_vec();
            picked.sort_unstable();
            let v = picked.iter().flat_map(|&i| distinct[i].iter().copied()).collect();
            sort_by_first(v, dim)
        }
        (InitMode::QuantileGrid, DataModel::Dataset(_)) => {
            return Err(BenchError::Config("quantile_grid needs a density".into()))
        }
        (InitMode::SeededDataPoints, DataModel::Density(_)) => {
            return Err(BenchError::Config("seeded_data_points needs a dataset".into()))
        }
    };
    Codebook::new(dim, values, topology).map_err(|e| BenchError::Config(e.to_string()))
}

fn column_ranges(ds: &Dataset) -> (Vec<f64>, Vec<f64>) {
    let mut lo = vec![f64::INFINITY; ds.dim];
    let mut hi = vec![f64::NEG_INFINITY; ds.dim];
    for row in ds.rows.chunks_exact(ds.dim) {
        for (j, v) in row.iter().enumerate() {
            lo[j] = lo[j].min(*v);
            hi[j] = hi[j].max(*v);
        }
    }
    (lo, hi)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dataset(rows: usize, dim: usize) -> Dataset {
        Dataset {
            rows: (0..rows * dim).map(|k| (k * 7919 % 10007) as f64).collect(),
            dim,
            columns: (0..dim).map(|j| format!("c{j}")).collect(),
            standardization: None,
        }
    }

    #[test]
    fn quantile_grid_examples() {
        let d = DataModel::Density(Density::Linear2x);
        let q = initial_codebook(InitMode::QuantileGrid, &d, 2, Topology::chain(2), 0).unwrap();
        assert!((q.quantizer(0)[0] - 0.5).abs() < 1e-15);
        assert!((q.quantizer(1)[0] - 0.866_025_403_784_438_6).abs() < 1e-15);
        for density in Density::ALL {
            let q = initial_codebook(InitMode::QuantileGrid, &DataModel::Density(density), 1, Topology::chain(1), 0)
                .unwrap();
            assert!((q.quantizer(0)[0] - density.quantile(0.5)).abs() < 1e-15);
        }
    }

    #[test]
    fn seeded_modes_are_sorted_and_reproducible() {
        let d = DataModel::Density(Density::Exponential);
        for mode in [InitMode::SeededSortedUniform, InitMode::SeededCenter] {
            let a = initial_codebook(mode, &d, 50, Topology::chain(50), 3).unwrap();
            let b = initial_codebook(mode, &d, 50, Topology::chain(50), 3).unwrap();
            assert_eq!(a, b);
            assert!(a.as_slice().windows(2).all(|w| w[0] <= w[1]));
        }
    }

    #[test]
    fn data_points() {
        let ds = DataModel::Dataset(dataset(77, 6));
        let err = initial_codebook(InitMode::SeededDataPoints, &ds, 100, Topology::grid(10, 10), 0);
        assert!(matches!(err, Err(BenchError::NotEnoughDistinctPoints { needed: 100, .. })));
        let q = initial_codebook(InitMode::SeededDataPoints, &ds, 25, Topology::grid(5, 5), 0).unwrap();
        let DataModel::Dataset(raw) = &ds else { unreachable!() };
        for row in q.quantizers() {
            assert!((0..raw.len()).any(|i| raw.row(i) == row));
        }
    }

    #[test]
    fn center_box_is_tight() {
        let ds = DataModel::Dataset(dataset(40, 3));
        let DataModel::Dataset(raw) = &ds else { unreachable!() };
        let moments = raw.column_moments();
        let q = initial_codebook(InitMode::SeededCenter, &ds, 16, Topology::grid(4, 4), 1).unwrap();
        for row in q.quantizers() {
            for (v, (m, s)) in row.iter().zip(&moments) {
                assert!((v - m).abs() <= CENTER_BOX * s);
            }
        }
    }
}
