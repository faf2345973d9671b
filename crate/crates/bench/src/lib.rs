//! Fixtures shared by the benchmarks.

use liftfeas::harness::Instance;
use liftfeas::rng::stream;
use liftfeas::{AffineProjector, DMatrix, Field, HermitianMatrix};

pub const SEED: u64 = 0xbe9c;

/// Symmetric Gaussian test matrix.
pub fn random_hermitian<T: Field>(n: usize, seed: u64) -> HermitianMatrix<T> {
    let mut r = stream(seed);
    let g = DMatrix::from_fn(n, n, |_, _| T::sample_standard(&mut r));
    HermitianMatrix::from_matrix((&g + g.adjoint()).map(|v| v.scale(0.5))).expect("finite")
}

/// Noisy grid-style instance with its projector.
pub fn instance(n: usize, m: usize) -> (Instance<f64>, AffineProjector) {
    let inst = Instance::sample(n, m, 0.1, SEED).expect("valid dimensions");
    let p = inst.projector().expect("projector");
    (inst, p)
}
