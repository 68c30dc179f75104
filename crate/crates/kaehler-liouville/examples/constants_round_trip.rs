//! Constants to m-numbers and back, and the orientation flip.

use std::collections::BTreeMap;

use kaehler_liouville::constants::{
    canonical_orientation, constants_from_m, dual_involution, validate_compatibility, ConstantBundle, FreeChoices,
};
use kaehler_liouville::exact::{fmt_q, q, qi};
use kaehler_liouville::poset::{Kind, Poset};

fn main() {
    let names = vec!["b".to_string(), "a".to_string()];
    let sizes = BTreeMap::from([("b".to_string(), 2), ("a".to_string(), 2)]);
    let p = Poset::new(&names, &sizes, &[("b".into(), "a".into())], Kind::A).unwrap();
    let c = BTreeMap::from([("b".to_string(), vec![qi(1), q(1, 3), qi(0)])]);
    let d = BTreeMap::from([("b".to_string(), qi(3)), ("a".to_string(), qi(1))]);
    let bundle = ConstantBundle::from_named(&p, &c, &[("b".into(), "a".into(), qi(1))], &d).unwrap();
    let m = bundle.m_rows(&p);
    let row: Vec<String> = m[1].as_ref().unwrap().iter().map(fmt_q).collect();
    println!("m-row of a: {row:?}, compatible: {}", validate_compatibility(&p, &bundle).ok());

    let free = FreeChoices {
        d_minimal: BTreeMap::from([("b".to_string(), qi(3))]),
        c_maximal: BTreeMap::from([("a".to_string(), bundle.c[1].clone())]),
    };
    let back = constants_from_m(&p, &m, &free, false).unwrap();
    println!("round trip exact: {}", back == bundle);

    let flipped = dual_involution(&p, &bundle, 0);
    let row: Vec<String> = flipped.m_rows(&p)[1].as_ref().unwrap().iter().map(fmt_q).collect();
    println!("flipped c-row of b: {:?}, m-row {row:?}", flipped.c[0].iter().map(fmt_q).collect::<Vec<_>>());
    let (canon, notes) = canonical_orientation(&p, &flipped);
    println!("{} (restored: {})", notes.join("; "), canon == bundle);
}
