//! Concurrent and exclusive exceedance curves for the four reference
//! processes on [-6, 6]. Pass the number of batches (default 20).

use extremal_design::experiments::{
    boundary_effect_curves, default_line_grid, BoundaryExperiment, ProcessConfig,
};
use extremal_design::simulate::Seed;

fn main() -> extremal_design::Result<()> {
    let batches = std::env::args()
        .nth(1)
        .and_then(|s| s.parse().ok())
        .unwrap_or(20);
    let grid = default_line_grid();
    let exp = BoundaryExperiment {
        batches,
        ..Default::default()
    };
    for process in ProcessConfig::reference_set() {
        let c = boundary_effect_curves(&process, &grid, &exp, Seed(1))?;
        println!(
            "{} ({} batches of {})",
            process.name, exp.batches, exp.batch_size
        );
        print!("  concurrent:");
        for h in [0.0, 1.0, 2.0, 3.0, 5.0] {
            print!("  h={h}: {:.3}", c.concurrent_at(h).unwrap().estimate);
        }
        println!();
        for h in [-5.5, -3.0, 0.0, 3.0, 5.5] {
            let p = c.exclusive_at(h).unwrap();
            println!(
                "  exclusive h={h:5.1}: {:.4} [{:.4}, {:.4}]",
                p.estimate, p.lower, p.upper
            );
        }
    }
    Ok(())
}
