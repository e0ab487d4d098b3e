//! Empirical extremogram of simulated r-Pareto fields against the closed form
//! `rho(h) = erfc(sqrt(gamma(h)) / 2)`.

use extremal_design::domain::{RiskFunctional, SpatialGrid};
use extremal_design::fit::{empirical_extremogram, ExtremogramConfig};
use extremal_design::simulate::{simulate_r_pareto, MarginalModel, ParetoSpec, Seed};
use extremal_design::variogram::VariogramModel;

fn main() -> extremal_design::Result<()> {
    let n: usize = std::env::args()
        .nth(1)
        .and_then(|s| s.parse().ok())
        .unwrap_or(20_000);
    let grid = SpatialGrid::regular_1d(-6.0, 6.0, 0.1)?;
    let model = VariogramModel::bounded_exponential(2.0, 1.5, 10.0)?;
    let marginal = MarginalModel::constant(grid.len(), 1.0, 0.0, 1.0)?;
    let spec = ParetoSpec::new(model, marginal, RiskFunctional::Supremum, 1.0);
    let ens = simulate_r_pareto(&spec, &grid, n, Seed(11))?;

    let cfg = ExtremogramConfig {
        q: 0.95,
        bin_width: Some(0.5),
        max_lag: Some(6.0),
        ..Default::default()
    };
    let emp = empirical_extremogram(&ens.data_scale(), &grid, &cfg)?;
    println!("   lag   empirical   model    pairs");
    let mut worst: f64 = 0.0;
    for b in emp.reliable_bins() {
        let m = model.extremogram(&[b.lag]);
        if m >= 0.1 {
            worst = worst.max((b.rho - m).abs());
        }
        println!("{:6.2}   {:8.3}   {:6.3}  {:7}", b.lag, b.rho, m, b.pairs);
    }
    println!("max |difference| where the model is at least 0.1: {worst:.4} (N = {n})");
    Ok(())
}
