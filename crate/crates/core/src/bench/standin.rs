//! Synthetic stand-ins for the two small economic data sets (42 countries
//! × 5 ratios, 77 companies × 6 figures), drawn from a seeded Gaussian
//! mixture and rescaled per column so raw units differ by orders of
//! magnitude. The bundled CSVs under `data/` are exactly this output.

use std::fmt::Write as _;

use rand::Rng;

use crate::algorithms::stream_rng;
use crate::densities::Density;

#[derive(Debug, Clone, Copy)]
pub struct StandinSpec {
    pub file_name: &'static str,
    pub rows: usize,
    pub columns: &'static [&'static str],
    pub clusters: usize,
    pub seed: u64,
    /// Raw column = offset + scale · mixture draw.
    pub column_scales: &'static [f64],
    pub column_offsets: &'static [f64],
}

pub const SAVING: StandinSpec = StandinSpec {
    file_name: "saving_standin.csv",
    rows: 42,
    columns: &["savings_ratio", "pop_under_15", "pop_over_75", "income_per_capita", "income_growth"],
    clusters: 3,
    seed: 42,
    column_scales: &[4.0, 8.0, 1.2, 900.0, 2.5],
    column_offsets: &[28.0, 55.0, 8.0, 6000.0, 17.0],
};

pub const TOP500: StandinSpec = StandinSpec {
    file_name: "top500_standin.csv",
    rows: 77,
    columns: &["assets", "sales", "market_value", "profits", "cash_flow", "employees"],
    clusters: 3,
    seed: 500,
    column_scales: &[9000.0, 6000.0, 5000.0, 500.0, 900.0, 40.0],
    column_offsets: &[90000.0, 40000.0, 33000.0, 3300.0, 9000.0, 270.0],
};

/// CSV text (header plus `rows` lines, six decimals) for a stand-in.
pub fn generate(spec: &StandinSpec) -> String {
    let dim = spec.columns.len();
    let mut rng = stream_rng(spec.seed, 0);
    let centers: Vec<f64> = (0..spec.clusters * dim).map(|_| 2.0 * Density::Gaussian.sample(&mut rng)).collect();
    let spreads: Vec<f64> = (0..spec.clusters * dim).map(|_| rng.gen_range(0.5..1.5)).collect();
    let mut out = spec.columns.join(",");
    out.push('\n');
    for _ in 0..spec.rows {
        let k = rng.gen_range(0..spec.clusters);
        let cells: Vec<String> = (0..dim)
            .map(|j| {
                let z = centers[k * dim + j] + spreads[k * dim + j] * Density::Gaussian.sample(&mut rng);
                format!("{:.6}", spec.column_offsets[j] + spec.column_scales[j] * z)
            })
            .collect();
        writeln!(out, "{}", cells.join(",")).expect("write to string");
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shapes() {
        for spec in [SAVING, TOP500] {
            let text = generate(&spec);
            let lines: Vec<&str> = text.lines().collect();
            assert_eq!(lines.len(), spec.rows + 1);
            assert!(lines.iter().all(|l| l.split(',').count() == spec.columns.len()));
        }
    }

    #[test]
    fn deterministic() {
        assert_eq!(generate(&SAVING), generate(&SAVING));
    }
}
