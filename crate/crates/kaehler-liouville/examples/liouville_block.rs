//! A one-block seed: validation, branch times, periods, profiles and the fold group.

use std::f64::consts::PI;

use kaehler_liouville::block::{metric_and_integrals, validate_seed, BlockGeometry, BlockSeed};

fn main() {
    let seed = BlockSeed::cos2(vec![1.0, 0.7, 0.25, 0.0], PI).unwrap();
    let report = validate_seed(&seed, 1e-9);
    println!("seed ok: {}, d_* = {}", report.ok(), seed.d_star());
    let bad = seed.clone().with_d_star(1.01 * seed.d_star()).unwrap();
    println!("1% off d_*: end-curvature residual {:.4}", validate_seed(&bad, 1e-9).worst("end-curvature"));

    let g = BlockGeometry::build(&seed).unwrap();
    println!("branch times {:.6?}", g.branch_times());
    println!("periods      {:.6?}", g.periods());
    for nu in 1..=g.n() {
        let v = g.profile(nu, 0.0);
        println!("nu={nu}: h(0) = {:.6}, h''(0) = {:.6} (expected {:.6})", v.h, v.d2h, g.expected_curvature(nu));
    }
    let x: Vec<f64> = g.periods().iter().map(|p| 0.13 * p).collect();
    let m = metric_and_integrals(&g, &x).unwrap();
    println!("g' at x = {:.6?}", m.g);
    let fold = g.fold_group();
    println!("fold group order {}, orbit of x has {} points", fold.order(), fold.orbit(&x, 1e-9).len());
}
