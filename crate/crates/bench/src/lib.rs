//! Shared fixtures for the benchmarks in `benches/`.

use std::sync::Arc;

use twolevel_core::experiments::ExperimentConfig;
use twolevel_core::fe::FeSpace;

/// Default steady configuration with a single global and local size.
pub fn config(n_global: usize, n_local: usize) -> ExperimentConfig {
    let mut cfg = ExperimentConfig::default();
    cfg.mesh.global_n = vec![n_global];
    cfg.mesh.local_n = vec![n_local];
    cfg
}

pub fn spaces(cfg: &ExperimentConfig) -> (Arc<FeSpace>, Arc<FeSpace>) {
    let global = cfg.global_space(cfg.mesh.global_n[0]).expect("valid global mesh");
    let local = cfg.local_space(cfg.mesh.local_n[0]).expect("valid local mesh");
    (global, local)
}
