//! Block posets: a valid chain, its sections, and the rejected shapes.

use std::collections::BTreeMap;

use kaehler_liouville::poset::{Kind, Poset};

fn build(spec: &[(&str, usize)], covers: &[(&str, &str)], kind: Kind) {
    let elements: Vec<String> = spec.iter().map(|(n, _)| n.to_string()).collect();
    let sizes: BTreeMap<String, usize> = spec.iter().map(|(n, s)| (n.to_string(), *s)).collect();
    let covers: Vec<(String, String)> = covers.iter().map(|(a, b)| (a.to_string(), b.to_string())).collect();
    match Poset::new(&elements, &sizes, &covers, kind) {
        Ok(p) => println!(
            "{:?}: dimension {}, {} sections, covers {:?}",
            p.names(),
            p.dim(),
            p.section_count(),
            p.cover_names()
        ),
        Err(errs) => {
            for e in errs {
                println!("{:?}: rejected: {e}", elements);
            }
        }
    }
}

fn main() {
    build(&[("b", 1), ("a", 2)], &[("b", "a")], Kind::A);
    build(&[("r", 2), ("s", 1), ("t", 2)], &[("r", "s"), ("r", "t")], Kind::B);
    build(&[("a", 1), ("b", 1), ("c", 1), ("d", 1)], &[("a", "b"), ("a", "c"), ("b", "d"), ("c", "d")], Kind::B);
    build(&[("b", 2), ("a", 1)], &[("b", "a")], Kind::A);
}
