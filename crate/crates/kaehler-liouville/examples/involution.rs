//! Finite-difference Poisson brackets of the first integrals.

use std::f64::consts::PI;

use kaehler_liouville::block::{BlockGeometry, BlockSeed};
use kaehler_liouville::flow::{poisson_check, FlowModel, Mode};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for row in [vec![1.0, 0.5, 0.0], vec![1.0, 0.6, 0.2, 0.0]] {
        let n = row.len() - 1;
        let model = FlowModel::new(BlockGeometry::build(&BlockSeed::cos2(row, PI).unwrap()).unwrap());
        for mode in [Mode::Real, Mode::Complex] {
            let r = poisson_check(&model, mode, 1000, 1e-3, &mut rng);
            println!("n={n} {mode:?}: max |{{F,F}}| {:.2e}, max |{{E,F}}| {:.2e}, {{E,E}} = {}", r.max_ff, r.max_ef, r.ee);
        }
    }
}
