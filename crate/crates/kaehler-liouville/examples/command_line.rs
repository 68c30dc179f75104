//! Drives the `klm` commands in-process on the bundled CP² config.

use kaehler_liouville::cli::run_captured;

fn main() {
    let config = concat!(env!("CARGO_MANIFEST_DIR"), "/tests/data/cp2.json");
    for args in [
        vec!["--config", config, "--json", "fan"],
        vec!["--config", config, "--json", "invariants"],
        vec!["--config", config, "--json", "--samples", "100", "check-involution"],
        vec!["--json", "cpn", "--n", "2", "--check"],
    ] {
        let (code, out, err) = run_captured(&args);
        println!("klm {} -> exit {code}\n{}{}", args.join(" "), out, err);
    }
}
