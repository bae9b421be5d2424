//! Vector quantization laboratory.
//!
//! Stochastic and batch competitive-learning quantizers (SCL, SOM, KSCL,
//! Forgy/Lloyd, batch SOM, online K-means), exact optimal scalar quantizers
//! for reference densities, distortion metrics, and a seeded experiment
//! runner that writes CSV traces and SVG plots.

pub mod algorithms;
pub mod densities;
pub mod metrics;
pub mod oracle;
pub mod topology;
pub mod bench;
