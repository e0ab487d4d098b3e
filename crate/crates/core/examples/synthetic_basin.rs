//! Writes a synthetic catchment dataset (30x30 km raster, 14 gauges) that the
//! `fit` and `design` commands can consume.
//!
//!     cargo run --release --example synthetic_basin -- data/basin

use std::path::PathBuf;

use extremal_design::synthetic::{generate_basin, SyntheticBasinConfig};

fn main() -> extremal_design::Result<()> {
    let dir = PathBuf::from(
        std::env::args()
            .nth(1)
            .unwrap_or_else(|| "data/basin".into()),
    );
    let basin = generate_basin(&SyntheticBasinConfig::default())?;
    basin.write(&dir)?;

    let t = &basin.config.truth;
    println!("wrote {}", dir.display());
    println!(
        "  grid: {} cells, catchment: {} cells",
        basin.grid.len(),
        basin.basin.iter().filter(|b| **b).count()
    );
    println!("  raster frames: {}", basin.radar.times.len());
    for (s, cell) in basin.stations.iter().zip(&basin.station_cells) {
        let inside = if basin.basin[*cell] {
            "inside"
        } else {
            "outside"
        };
        println!("  {}: {:>6} hours, {inside}", s.name, s.times.len());
    }
    println!(
        "  truth: b1 = {}, b2 = {}, a = {}, xi = {}",
        t.b1, t.b2, t.a, t.xi
    );
    Ok(())
}
