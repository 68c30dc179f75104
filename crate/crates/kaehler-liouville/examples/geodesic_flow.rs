//! Integrates a geodesic in both modes and prints the drift report.

use std::f64::consts::PI;

use kaehler_liouville::block::{BlockGeometry, BlockSeed};
use kaehler_liouville::flow::{integrate, FlowModel, IntegrateOptions, Mode, Stepper};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() {
    let model = FlowModel::new(BlockGeometry::build(&BlockSeed::cos2(vec![1.0, 0.5, 0.0], PI).unwrap()).unwrap());
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    for (mode, t) in [(Mode::Real, 100.0), (Mode::Complex, 50.0)] {
        let s0 = model.random_state(mode, &mut rng);
        let opts = IntegrateOptions::new(t, Stepper::Adaptive { rtol: 1e-12, atol: 1e-14 });
        let (traj, rep) = integrate(&model, &s0, mode, &opts).unwrap();
        println!("{mode:?} t={t}: {} steps ({} rejected), {} samples", rep.steps, rep.rejections, traj.samples.len());
        for d in &rep.invariants {
            println!("  {:<4} initial {:>12.6}  relative drift {:.2e}", d.name, d.initial, d.max_rel_drift);
        }
        println!("  min gap {:.3e}, max condition {:.3e}", rep.min_gap, rep.max_condition);
    }
    let s0 = model.random_state(Mode::Real, &mut rng);
    for step in [0.02, 0.01] {
        let (_, rep) = integrate(&model, &s0, Mode::Real, &IntegrateOptions::new(20.0, Stepper::Fixed { step })).unwrap();
        println!("fixed step {step}: drift {:.3e}", rep.max_energy_family_drift());
    }
    let (_, rep) = integrate(&model, &s0, Mode::Real, &IntegrateOptions::new(20.0, Stepper::Midpoint { step: 0.01 })).unwrap();
    println!("implicit midpoint 0.01: drift {:.3e}", rep.max_energy_family_drift());
}
