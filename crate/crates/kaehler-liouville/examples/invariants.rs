//! Picard basis, Chern pairing, Kähler class and cell counts of a chain.

use std::collections::BTreeMap;

use kaehler_liouville::constants::ConstantBundle;
use kaehler_liouville::exact::{q, qi};
use kaehler_liouville::fan::{build_fan, build_lattice};
use kaehler_liouville::invariants::{cell_counts, chern_pairing, invariants_report, kahler_class};
use kaehler_liouville::poset::{Kind, Poset};

fn main() {
    let names = vec!["b".to_string(), "a".to_string()];
    let sizes = BTreeMap::from([("b".to_string(), 1), ("a".to_string(), 2)]);
    let p = Poset::new(&names, &sizes, &[("b".into(), "a".into())], Kind::A).unwrap();
    let c = BTreeMap::from([("b".to_string(), vec![qi(1), qi(0)])]);
    let d = BTreeMap::from([("b".to_string(), qi(2)), ("a".to_string(), q(1, 2))]);
    let bundle = ConstantBundle::from_named(&p, &c, &[("b".into(), "a".into(), qi(1))], &d).unwrap();
    let lat = build_lattice(&p, &bundle).unwrap();
    let fan = build_fan(&lat);
    let pairing = chern_pairing(&lat, &fan).unwrap();
    let kc = kahler_class(&p, &bundle);
    let report = invariants_report(&lat, &pairing, Some(&kc), &cell_counts(&p));
    println!("{}", serde_json::to_string_pretty(&report).unwrap());
}
