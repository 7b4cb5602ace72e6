// Quadratic majorizers of the perturbed penalties, and the perturbation gap.

use pennmm::{PenaltyKind, PenaltySpec};

pub fn run_example() -> pennmm::Result<()> {
    let kinds = [
        PenaltyKind::Scad { a: 3.7 },
        PenaltyKind::L1,
        PenaltyKind::Lq { q: 0.5 },
        PenaltyKind::HardThreshold,
    ];
    let eps = 1e-3;
    for kind in kinds {
        let spec = PenaltySpec::new(kind, 1.0)?.with_epsilon(eps)?;
        let center = 1.5;
        let m = spec.majorizer_at(center)?;
        println!("{kind}: p'(0+) = {:.4}, majorizer at {center}:", spec.derivative_at_zero());
        for theta in [-3.0, -1.5, 0.0, 0.5, 1.5, 3.0] {
            let p = spec.perturbed_value(theta);
            let phi = m.eval(theta);
            assert!(phi >= p - 1e-10, "majorizer dips below the penalty");
            println!("  theta = {theta:5.2}  p_eps = {p:.6}  phi = {phi:.6}");
        }
        let gap = (spec.perturbed_value(center) - spec.value(center)).abs();
        println!("  |p_eps - p| at {center} = {gap:.3e}");
    }
    Ok(())
}

fn main() {
    if let Err(e) = run_example() {
        eprintln!("error: {e}");
        std::process::exit(1);
    }
}
