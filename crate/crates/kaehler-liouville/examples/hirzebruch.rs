//! A chain of two size-one blocks gives the Hirzebruch surfaces.

use std::collections::BTreeMap;

use kaehler_liouville::constants::{int_row, validate_compatibility, ConstantBundle};
use kaehler_liouville::exact::qi;
use kaehler_liouville::fan::{build_fan, build_lattice, fan_isomorphism};
use kaehler_liouville::exact::to_bigint_vec;
use kaehler_liouville::poset::{Kind, Poset};

fn main() {
    let names = vec!["b".to_string(), "a".to_string()];
    let sizes = BTreeMap::from([("b".to_string(), 1), ("a".to_string(), 1)]);
    let p = Poset::new(&names, &sizes, &[("b".into(), "a".into())], Kind::B).unwrap();
    for k in 1..=3 {
        let c = BTreeMap::from([("b".to_string(), int_row(&[1, 0]))]);
        let d = BTreeMap::from([("b".to_string(), qi(k)), ("a".to_string(), qi(1))]);
        let bundle = ConstantBundle::from_named(&p, &c, &[("b".into(), "a".into(), qi(1))], &d).unwrap();
        let report = validate_compatibility(&p, &bundle);
        let lat = build_lattice(&p, &bundle).unwrap();
        let fan = build_fan(&lat);
        let rays = vec![to_bigint_vec(&[1, 0]), to_bigint_vec(&[0, 1]), to_bigint_vec(&[-1, 0]), to_bigint_vec(&[k, -1])];
        let cones = vec![vec![0, 1], vec![1, 2], vec![2, 3], vec![3, 0]];
        let iso = fan_isomorphism(lat.rays(), &fan.cones, &rays, &cones);
        println!("d_b/d_a = {k}: m = {:?}, rays {:?}, F_{k} via {:?}", report.m["a"], lat.rays(), iso);
    }
}
