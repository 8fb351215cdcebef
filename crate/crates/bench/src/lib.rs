//! Fixtures shared by the criterion benches.

use std::sync::Arc;

use tenvote_core::benchmarks::{build_truss, truss_reference_law, TrussSpec};
use tenvote_core::material_data::{sample_dataset, DataGenSpec, StrainSampling};
use tenvote_core::{MaterialDataSet, Problem};

/// The 8×2 lattice tower used by the truss studies.
pub fn tower() -> Problem {
    build_truss(&TrussSpec::tower(8, 2).expect("tower loads")).expect("tower model")
}

/// `n` noise-free samples of the truss law in the tower's metric.
pub fn truss_data(problem: &Problem, n: usize, seed: u64) -> MaterialDataSet {
    sample_dataset(&DataGenSpec {
        law: Arc::new(truss_reference_law()),
        metric: problem.metrics[0].clone(),
        count: n,
        sampling: StrainSampling::symmetric_uniform(0.025, 1),
        noise_stddev_fraction: 0.0,
        rng_seed: seed,
    })
    .expect("sampling")
}
