//! The Fubini-Study reference model on CP^n.

use kaehler_liouville::fubini_study::{bracket_check, geodesic_drift, unitary_check, FsModel, Geodesic};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for n in 1..=3 {
        let model = FsModel::uniform(n);
        let geo = Geodesic::random(n, &mut rng);
        let (z, xi) = geo.at(0.7);
        let vals = model.integrals(&z, &xi).unwrap();
        println!("CP^{n}: G = {:.6?}, casimir = {:.12}, J = {:.6?}", vals.g, vals.casimir, vals.j);
        let drift = (0..100).map(|_| geodesic_drift(&model, &Geodesic::random(n, &mut rng), 64)).fold(0.0, f64::max);
        println!("  drift {drift:.1e}, brackets {:.1e}, unitary {:.1e}",
            bracket_check(&model, 200, 1e-3, &mut rng),
            unitary_check(&model, 100, &mut rng));
    }
}
