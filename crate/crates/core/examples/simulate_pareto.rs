//! Simulates r-Pareto fields on [-6, 6] for the supremum functional and checks
//! the pole-scale normalization and the exceedance constraint.

use extremal_design::domain::{RiskFunctional, SpatialGrid};
use extremal_design::simulate::{
    simulate_angular, simulate_r_pareto, Anchor, MarginalModel, ParetoSpec, Seed,
};
use extremal_design::variogram::VariogramModel;

fn main() -> extremal_design::Result<()> {
    let grid = SpatialGrid::regular_1d(-6.0, 6.0, 0.1)?;
    let model = VariogramModel::bounded_exponential(2.0, 1.5, 10.0)?;

    let w = simulate_angular(&model, &grid, 10_000, Seed(1))?;
    let worst = w
        .iter_rows()
        .map(|r| (r.iter().sum::<f64>() - 1.0).abs())
        .fold(0.0, f64::max);
    println!(
        "angular draws: {} x {}, max |sum - 1| = {worst:.2e}",
        w.rows(),
        w.cols()
    );

    let marginal = MarginalModel::constant(grid.len(), 1.0, 0.0, 1.0)?;
    for anchor in [Anchor::Uniform, Anchor::First] {
        let mut spec = ParetoSpec::new(model, marginal.clone(), RiskFunctional::Supremum, 1.0);
        spec.anchor = anchor;
        let ens = simulate_r_pareto(&spec, &grid, 5000, Seed(2))?;
        let data = ens.data_scale();
        let min_sup = data
            .iter_rows()
            .map(|r| r.iter().copied().fold(f64::NEG_INFINITY, f64::max))
            .fold(f64::INFINITY, f64::min);
        let edge = data
            .iter_rows()
            .filter(|r| r[0] >= 1.0 || r[grid.len() - 1] >= 1.0)
            .count();
        let middle = data.iter_rows().filter(|r| r[60] >= 1.0).count();
        println!(
            "{anchor:?} anchor: acceptance {:.3}, min sup {min_sup:.3}, P(end cell >= 1) {:.3}, P(centre >= 1) {:.3}",
            ens.stats.accepted as f64 / ens.stats.attempted as f64,
            edge as f64 / (2.0 * data.rows() as f64),
            middle as f64 / data.rows() as f64,
        );
    }
    Ok(())
}
