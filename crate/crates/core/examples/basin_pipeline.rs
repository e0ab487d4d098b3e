//! Synthetic catchment end to end: generate gauges and raster, fit the
//! marginal and dependence models, then add ten stations inside the
//! catchment for the supremum exceeding 20 mm.

use std::time::Instant;

use extremal_design::pipeline::{
    design_domain, design_network, fit_network, DesignConfig, FitConfig,
};
use extremal_design::simulate::Seed;
use extremal_design::synthetic::{generate_basin, SyntheticBasinConfig};

fn main() -> extremal_design::Result<()> {
    let start = Instant::now();
    let basin = generate_basin(&SyntheticBasinConfig::default())?;
    let truth = &basin.config.truth;

    let fit = fit_network(
        &basin.stations,
        &basin.radar,
        &FitConfig::default(),
        Seed(1),
    )?;
    let m = &fit.model;
    let (loc, marg) = (&m.location, &m.marginal);
    println!("parameter   truth   estimate (se)");
    println!(
        "b1        {:7.3}   {:.3} ({:.3})",
        truth.b1, loc.b1, loc.standard_errors[0]
    );
    println!(
        "b2        {:7.3}   {:.3} ({:.3})",
        truth.b2, loc.b2, loc.standard_errors[1]
    );
    println!(
        "a         {:7.3}   {:.3} ({:.3})",
        truth.a, marg.a, marg.standard_errors[0]
    );
    println!(
        "xi        {:7.3}   {:.3} ({:.3})",
        truth.xi, marg.xi, marg.standard_errors[1]
    );
    println!("pooled exceedances: {}", marg.n_exceedances);

    println!("\nextremogram at a few lags (first sector): empirical / fitted / true");
    for b in fit
        .extremogram
        .reliable_bins()
        .filter(|b| b.sector == 0)
        .step_by(3)
        .take(6)
    {
        let h = b.lag_vector(2);
        println!(
            "  {:5.1} km   {:.3} / {:.3} / {:.3}",
            b.lag,
            b.rho,
            m.model().extremogram(&h),
            truth.model.extremogram(&h)
        );
    }

    let domain = design_domain(&m.grid, Some(&basin.basin), &m.station_locations(), 0.0)?;
    let cfg = DesignConfig::default();
    let out = design_network(m, domain, &cfg, Seed(2))?;
    println!(
        "\ndesign: u = {} mm, N = {}, P(sup over catchment >= u | any exceedance) = {:.3}",
        cfg.threshold, cfg.n, out.state.reference_prob
    );
    for (k, h) in out.state.history.iter().enumerate() {
        let c = out.domain.grid.coords(h.index);
        println!(
            "  site {:2}: ({:4.1}, {:4.1})  discrepancy {:.4}",
            k + 1,
            c[0],
            c[1],
            h.discrepancy
        );
    }
    println!("elapsed {:.1?}", start.elapsed());
    Ok(())
}
