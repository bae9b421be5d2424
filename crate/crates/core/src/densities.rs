//! Analytic one-dimensional densities used as ground truth.
//!
//! Every density exposes its pdf, cdf, inverse cdf and the exact conditional
//! mean over an interval, which is what the fixed-point oracle iterates on.

use std::f64::consts::{FRAC_1_SQRT_2, PI};
use std::fmt;
use std::str::FromStr;

use rand::distributions::Open01;
use rand::Rng;
use libm::erfc;
use statrs::function::erf::erfc_inv;
use thiserror::Error;

/// Intervals carrying less probability than this are treated as empty.
pub const MIN_MASS: f64 = 1e-300;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DensityError {
    #[error("interval [{low}, {high}] carries no probability mass")]
    ZeroMass { low: f64, high: f64 },
    #[error("unknown density kind `{0}` (expected linear2x, quadratic3x2, exponential or gaussian)")]
    UnknownKind(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Density {
    /// f(x) = 2x on [0, 1].
    Linear2x,
    /// f(x) = 3x² on [0, 1].
    Quadratic3x2,
    /// f(x) = e^{-x} on [0, +inf).
    Exponential,
    /// Standard normal N(0, 1).
    Gaussian,
}

impl Density {
    pub const ALL: [Density; 4] = [
        Density::Linear2x,
        Density::Quadratic3x2,
        Density::Exponential,
        Density::Gaussian,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Density::Linear2x => "linear2x",
            Density::Quadratic3x2 => "quadratic3x2",
            Density::Exponential => "exponential",
            Density::Gaussian => "gaussian",
        }
    }

    pub fn support_low(self) -> f64 {
        match self {
            Density::Gaussian => f64::NEG_INFINITY,
            _ => 0.0,
        }
    }

    pub fn support_high(self) -> f64 {
        match self {
            Density::Linear2x | Density::Quadratic3x2 => 1.0,
            _ => f64::INFINITY,
        }
    }

    pub fn support(self) -> (f64, f64) {
        (self.support_low(), self.support_high())
    }

    pub fn mean(self) -> f64 {
        match self {
            Density::Linear2x => 2.0 / 3.0,
            Density::Quadratic3x2 => 0.75,
            Density::Exponential => 1.0,
            Density::Gaussian => 0.0,
        }
    }

    pub fn standard_deviation(self) -> f64 {
        match self {
            // E[x²] = 1/2, mean 2/3
            Density::Linear2x => (0.5f64 - 4.0 / 9.0).sqrt(),
            // E[x²] = 3/5, mean 3/4
            Density::Quadratic3x2 => (0.6f64 - 0.5625).sqrt(),
            Density::Exponential | Density::Gaussian => 1.0,
        }
    }

    /// Probability density; zero outside the support.
    pub fn pdf(self, x: f64) -> f64 {
        let (lo, hi) = self.support();
        if x < lo || x > hi || x.is_nan() {
            return 0.0;
        }
        match self {
            Density::Linear2x => 2.0 * x,
            Density::Quadratic3x2 => 3.0 * x * x,
            Density::Exponential => (-x).exp(),
            Density::Gaussian => std_normal_pdf(x),
        }
    }

    pub fn cdf(self, x: f64) -> f64 {
        if x.is_nan() {
            return f64::NAN;
        }
        let (lo, hi) = self.support();
        if x <= lo {
            return 0.0;
        }
        if x >= hi {
            return 1.0;
        }
        let p = match self {
            Density::Linear2x => x * x,
            Density::Quadratic3x2 => x * x * x,
            Density::Exponential => -(-x).exp_m1(),
            Density::Gaussian => std_normal_cdf(x),
        };
        p.clamp(0.0, 1.0)
    }

    /// Inverse cdf, defined for `u` in (0, 1).
    pub fn quantile(self, u: f64) -> f64 {
        match self {
            Density::Linear2x => u.sqrt(),
            Density::Quadratic3x2 => u.cbrt(),
            Density::Exponential => -(-u).ln_1p(),
            Density::Gaussian => -std::f64::consts::SQRT_2 * erfc_inv(2.0 * u),
        }
    }

    /// One draw by inversion of the cdf.
    pub fn sample<R: Rng + ?Sized>(self, rng: &mut R) -> f64 {
        let u: f64 = rng.sample(Open01);
        self.quantile(u)
    }

    /// Probability mass of [a, b] computed without catastrophic cancellation
    /// in the tails.
    pub fn mass(self, a: f64, b: f64) -> f64 {
        let (a, b) = self.clip(a, b);
        if b <= a {
            return 0.0;
        }
        match self {
            Density::Linear2x => (b - a) * (b + a),
            Density::Quadratic3x2 => (b - a) * (a * a + a * b + b * b),
            Density::Exponential => {
                let width = b - a;
                (-a).exp() * -(-width).exp_m1()
            }
            Density::Gaussian => gaussian_mass(a, b),
        }
    }

    /// Exact center of gravity of the density restricted to [a, b].
    pub fn conditional_mean(self, a: f64, b: f64) -> Result<f64, DensityError> {
        let (ca, cb) = self.clip(a, b);
        let mass = self.mass(ca, cb);
        if !(mass >= MIN_MASS) {
            return Err(DensityError::ZeroMass { low: a, high: b });
        }
        let (a, b) = (ca, cb);
        let mean = match self {
            // 2(b³ - a³) / 3(b² - a²)
            Density::Linear2x => 2.0 * (a * a + a * b + b * b) / (3.0 * (a + b)),
            // 3(b⁴ - a⁴) / 4(b³ - a³)
            Density::Quadratic3x2 => {
                3.0 * (a + b) * (a * a + b * b) / (4.0 * (a * a + a * b + b * b))
            }
            Density::Exponential => {
                let width = b - a;
                if width.is_infinite() {
                    a + 1.0
                } else {
                    a + 1.0 - width / width.exp_m1()
                }
            }
            Density::Gaussian => (std_normal_pdf(a) - std_normal_pdf(b)) / mass,
        };
        Ok(mean)
    }

    /// Partial moments (∫f, ∫x f, ∫x² f) over [a, b].
    pub fn partial_moments(self, a: f64, b: f64) -> [f64; 3] {
        let (a, b) = self.clip(a, b);
        if b <= a {
            return [0.0; 3];
        }
        match self {
            Density::Linear2x => [
                b * b - a * a,
                2.0 * (b.powi(3) - a.powi(3)) / 3.0,
                (b.powi(4) - a.powi(4)) / 2.0,
            ],
            Density::Quadratic3x2 => [
                b.powi(3) - a.powi(3),
                3.0 * (b.powi(4) - a.powi(4)) / 4.0,
                3.0 * (b.powi(5) - a.powi(5)) / 5.0,
            ],
            Density::Exponential => {
                let tail = |x: f64, poly: f64| if x.is_infinite() { 0.0 } else { poly * (-x).exp() };
                [
                    self.mass(a, b),
                    tail(a, a + 1.0) - tail(b, b + 1.0),
                    tail(a, a * a + 2.0 * a + 2.0) - tail(b, b * b + 2.0 * b + 2.0),
                ]
            }
            Density::Gaussian => {
                let xphi = |x: f64| if x.is_infinite() { 0.0 } else { x * std_normal_pdf(x) };
                let m0 = gaussian_mass(a, b);
                [
                    m0,
                    std_normal_pdf(a) - std_normal_pdf(b),
                    m0 - (xphi(b) - xphi(a)),
                ]
            }
        }
    }

    fn clip(self, a: f64, b: f64) -> (f64, f64) {
        let (lo, hi) = self.support();
        (a.max(lo), b.min(hi))
    }
}

impl fmt::Display for Density {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Density {
    type Err = DensityError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "linear2x" => Ok(Density::Linear2x),
            "quadratic3x2" => Ok(Density::Quadratic3x2),
            "exponential" => Ok(Density::Exponential),
            "gaussian" | "standard_gaussian" => Ok(Density::Gaussian),
            other => Err(DensityError::UnknownKind(other.to_string())),
        }
    }
}

pub fn std_normal_pdf(x: f64) -> f64 {
    if x.is_infinite() {
        return 0.0;
    }
    (-0.5 * x * x).exp() / (2.0 * PI).sqrt()
}

pub fn std_normal_cdf(x: f64) -> f64 {
    0.5 * erfc(-x * FRAC_1_SQRT_2)
}

/// Upper tail P(X > x).
fn std_normal_sf(x: f64) -> f64 {
    0.5 * erfc(x * FRAC_1_SQRT_2)
}

fn gaussian_mass(a: f64, b: f64) -> f64 {
    if a >= 0.0 {
        std_normal_sf(a) - std_normal_sf(b)
    } else if b <= 0.0 {
        std_normal_cdf(b) - std_normal_cdf(a)
    } else {
        1.0 - std_normal_cdf(a) - std_normal_sf(b)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn pdf_values() {
        assert_eq!(Density::Linear2x.pdf(0.5), 1.0);
        assert_eq!(Density::Quadratic3x2.pdf(1.0), 3.0);
        assert_eq!(Density::Exponential.pdf(0.0), 1.0);
        assert_eq!(Density::Linear2x.pdf(1.5), 0.0);
        assert_eq!(Density::Exponential.pdf(-0.1), 0.0);
    }

    #[test]
    fn cdf_values() {
        assert_eq!(Density::Linear2x.cdf(0.5), 0.25);
        assert_eq!(Density::Exponential.cdf(0.0), 0.0);
        assert!((Density::Gaussian.cdf(0.0) - 0.5).abs() < 1e-15);
        assert_eq!(Density::Quadratic3x2.cdf(2.0), 1.0);
        assert_eq!(Density::Gaussian.cdf(f64::INFINITY), 1.0);
    }

    #[test]
    fn quantile_values() {
        assert_eq!(Density::Linear2x.quantile(0.25), 0.5);
        let one = Density::Exponential.quantile(1.0 - (-1.0f64).exp());
        assert!((one - 1.0).abs() < 1e-15);
        assert!((Density::Quadratic3x2.quantile(0.125) - 0.5).abs() < 1e-15);
        assert!(Density::Gaussian.quantile(0.5).abs() < 1e-15);
    }

    #[test]
    fn inverse_cdf_round_trips() {
        for kind in [Density::Linear2x, Density::Quadratic3x2, Density::Exponential] {
            for i in 1..1000 {
                let u = i as f64 / 1000.0;
                assert!((kind.cdf(kind.quantile(u)) - u).abs() < 1e-12, "{kind} at {u}");
            }
        }
        for i in 1..1000 {
            let u = i as f64 / 1000.0;
            let x = Density::Gaussian.quantile(u);
            assert!((Density::Gaussian.cdf(x) - u).abs() < 1e-13);
        }
    }

    #[test]
    fn conditional_means_over_full_support() {
        for kind in Density::ALL {
            let (lo, hi) = kind.support();
            let m = kind.conditional_mean(lo, hi).unwrap();
            assert!((m - kind.mean()).abs() < 1e-12, "{kind}: {m}");
        }
        assert!((Density::Linear2x.conditional_mean(0.0, 1.0).unwrap() - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(Density::Exponential.conditional_mean(0.0, f64::INFINITY).unwrap(), 1.0);
    }

    #[test]
    fn half_normal_mean() {
        let m = Density::Gaussian.conditional_mean(0.0, f64::INFINITY).unwrap();
        assert!((m - (2.0 / PI).sqrt()).abs() < 1e-15);
        let m = Density::Gaussian.conditional_mean(f64::NEG_INFINITY, 0.0).unwrap();
        assert!((m + (2.0 / PI).sqrt()).abs() < 1e-15);
    }

    #[test]
    fn zero_mass_is_rejected() {
        assert!(matches!(
            Density::Linear2x.conditional_mean(1.5, 2.0),
            Err(DensityError::ZeroMass { .. })
        ));
        assert!(matches!(
            Density::Linear2x.conditional_mean(0.0, 0.0),
            Err(DensityError::ZeroMass { .. })
        ));
        assert!(Density::Gaussian.conditional_mean(40.0, 41.0).is_err());
    }

    #[test]
    fn pdf_integrates_to_one() {
        // composite Simpson on the support (truncated at 40 for infinite tails)
        for kind in Density::ALL {
            let (lo, hi) = kind.support();
            let (lo, hi) = (lo.max(-40.0), hi.min(40.0));
            let steps = 200_000;
            let h = (hi - lo) / steps as f64;
            let mut acc = kind.pdf(lo) + kind.pdf(hi);
            for i in 1..steps {
                let w = if i % 2 == 1 { 4.0 } else { 2.0 };
                acc += w * kind.pdf(lo + i as f64 * h);
            }
            let integral = acc * h / 3.0;
            assert!((integral - 1.0).abs() < 1e-9, "{kind}: {integral}");
        }
    }

    #[test]
    fn partial_moments_match_quadrature() {
        for kind in Density::ALL {
            let (a, b) = match kind {
                Density::Gaussian => (-0.7, 1.3),
                Density::Exponential => (0.4, 2.5),
                _ => (0.2, 0.9),
            };
            let steps = 20_000;
            let h = (b - a) / steps as f64;
            let mut acc = [0.0f64; 3];
            for i in 0..=steps {
                let x = a + i as f64 * h;
                let w = if i == 0 || i == steps { 1.0 } else if i % 2 == 1 { 4.0 } else { 2.0 };
                let f = kind.pdf(x);
                acc[0] += w * f;
                acc[1] += w * x * f;
                acc[2] += w * x * x * f;
            }
            let exact = kind.partial_moments(a, b);
            for k in 0..3 {
                assert!((acc[k] * h / 3.0 - exact[k]).abs() < 1e-12, "{kind} moment {k}");
            }
        }
    }

    #[test]
    fn sampler_matches_cdf() {
        // Kolmogorov-Smirnov distance on 10^6 draws
        for kind in Density::ALL {
            let mut rng = ChaCha8Rng::seed_from_u64(11);
            let mut xs: Vec<f64> = (0..1_000_000).map(|_| kind.sample(&mut rng)).collect();
            xs.sort_by(f64::total_cmp);
            let n = xs.len() as f64;
            let ks = xs
                .iter()
                .enumerate()
                .map(|(i, &x)| {
                    let c = kind.cdf(x);
                    (c - i as f64 / n).abs().max(((i + 1) as f64 / n - c).abs())
                })
                .fold(0.0, f64::max);
            assert!(ks < 0.002, "{kind}: KS {ks}");
            let (lo, hi) = kind.support();
            assert!(xs[0] >= lo && xs[xs.len() - 1] <= hi);
        }
    }

    #[test]
    fn parses_canonical_names() {
        for kind in Density::ALL {
            assert_eq!(kind.name().parse::<Density>().unwrap(), kind);
        }
        assert!("uniform".parse::<Density>().is_err());
    }
}
