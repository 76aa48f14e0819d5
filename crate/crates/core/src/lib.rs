//! Panel econometrics for augmented gravity models of bilateral trade:
//! panel assembly, unit-root pretests, fixed/random-effects and IV-GMM
//! estimation, the Hausman test, synthetic data and report rendering.

pub mod config;
pub mod diagnostics;
pub mod estimators;
pub mod ingest;
pub mod panel;
pub mod pipeline;
pub mod report;
pub mod synth;
pub mod unitroot;
