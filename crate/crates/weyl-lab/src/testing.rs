//! Seeded random admissible states for the randomized property suites.

use crate::lattice::{Density, Grid};
use crate::operators::DensityMatrix;
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::sync::Arc;

/// Random density matrix with 0 <= gamma <= 1: random orthogonal frame with
/// uniform occupations.
pub fn random_admissible(grid: &Arc<Grid>, seed: u64) -> DensityMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = grid.n_nodes();
    let raw = DMatrix::from_fn(n, n, |_, _| rng.gen::<f64>() - 0.5);
    let q = raw.qr().q();
    let occ: Vec<f64> = (0..n).map(|_| rng.gen::<f64>()).collect();
    let mut gamma = DMatrix::zeros(n, n);
    for k in 0..n {
        let col = q.column(k);
        gamma.ger(occ[k], &col, &col, 1.0);
    }
    for i in 0..n {
        for j in (i + 1)..n {
            let s = 0.5 * (gamma[(i, j)] + gamma[(j, i)]);
            gamma[(i, j)] = s;
            gamma[(j, i)] = s;
        }
    }
    DensityMatrix::new(grid.clone(), gamma).expect("symmetric by construction")
}

/// Random nonnegative density field with O(1) values.
pub fn random_density(grid: &Arc<Grid>, seed: u64) -> Density {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xd1ce_5eed);
    let values: Vec<f64> = (0..grid.n_nodes()).map(|_| rng.gen::<f64>()).collect();
    Density::new(grid.clone(), values).expect("nonnegative by construction")
}
