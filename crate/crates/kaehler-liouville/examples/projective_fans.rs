//! The fan of a single block of size n is the fan of CP^n.

use std::collections::BTreeMap;

use kaehler_liouville::constants::{even_row, ConstantBundle};
use kaehler_liouville::exact::qi;
use kaehler_liouville::fan::{build_fan, build_lattice, verify_fan};
use kaehler_liouville::poset::{Kind, Poset};

fn main() {
    for n in 1..=4 {
        let p = Poset::new(&["a".to_string()], &BTreeMap::from([("a".to_string(), n)]), &[], Kind::B).unwrap();
        let c = BTreeMap::from([("a".to_string(), even_row(n))]);
        let d = BTreeMap::from([("a".to_string(), qi(1))]);
        let bundle = ConstantBundle::from_named(&p, &c, &[], &d).unwrap();
        let lat = build_lattice(&p, &bundle).unwrap();
        let fan = build_fan(&lat);
        let check = verify_fan(&lat, &fan, 1);
        let rays: Vec<String> = lat.rays().iter().map(|r| format!("{r:?}")).collect();
        println!("CP^{n}: rays {} | {} cones, smooth {}, complete {}", rays.join(" "), fan.cones.len(), check.smooth, check.complete);
    }
}
