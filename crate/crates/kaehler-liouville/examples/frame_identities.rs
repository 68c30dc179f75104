//! Coefficient matrices at random points and the two frame identities.

use std::collections::BTreeMap;

use kaehler_liouville::frame::{b_matrix, f_matrix, identity_residuals, point_coefficients, HPoint};
use kaehler_liouville::poset::{Kind, Poset};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() {
    let names = vec!["r".to_string(), "s".to_string(), "t".to_string()];
    let sizes = BTreeMap::from([("r".to_string(), 2), ("s".to_string(), 1), ("t".to_string(), 2)]);
    let p = Poset::new(&names, &sizes, &[("r".into(), "s".into()), ("r".into(), "t".into())], Kind::B).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let pt = HPoint::random(&p, &mut rng);
    println!("h = {:.4?}", pt.h());
    println!("a = {:.4?}", point_coefficients(&pt).a);
    println!("b = {:.4}", b_matrix(&pt));
    println!("f = {:.4}", f_matrix(&pt));
    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        let r = identity_residuals(&HPoint::random(&p, &mut rng));
        worst = worst.max(r.inverse).max(r.column_sums);
    }
    println!("max identity residual over 1000 points: {worst:.2e}");
}
