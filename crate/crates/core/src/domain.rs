//! Spatial primitives shared by every other module: locations, discretized
//! regions, risk functionals and the observation containers fed to fitting.

use std::collections::{HashMap, HashSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A point of the planar study region.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Location {
    coords: Vec<f64>,
}

impl Location {
    pub fn new(coords: Vec<f64>) -> Result<Self> {
        if coords.is_empty() {
            return Err(Error::InvalidParameter(
                "location needs at least one coordinate".into(),
            ));
        }
        if coords.iter().any(|c| !c.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "non-finite coordinate in {coords:?}"
            )));
        }
        Ok(Self { coords })
    }

    pub fn d1(x: f64) -> Self {
        Self { coords: vec![x] }
    }

    pub fn d2(x: f64, y: f64) -> Self {
        Self { coords: vec![x, y] }
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }

    pub fn distance(&self, other: &Location) -> f64 {
        euclid(&self.coords, &other.coords)
    }
}

pub(crate) fn euclid(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

/// A discretized compact region: candidate locations on a (possibly masked)
/// regular lattice, with the cells lying on the region boundary flagged.
///
/// A cell is a boundary cell iff it has fewer than `2 d` lattice neighbours
/// inside the region (4-neighbourhood in the plane, 2 on the line).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpatialGrid {
    locations: Vec<Location>,
    boundary: Vec<bool>,
    spacing: f64,
}

impl SpatialGrid {
    /// Builds a grid from lattice locations, deriving boundary flags from the
    /// neighbour rule.
    pub fn new(locations: Vec<Location>, spacing: f64) -> Result<Self> {
        Self::validate(&locations, spacing)?;
        let boundary = lattice_boundary(&locations, spacing);
        Ok(Self {
            locations,
            boundary,
            spacing,
        })
    }

    /// Builds a grid with caller-supplied boundary flags.
    pub fn with_boundary(
        locations: Vec<Location>,
        boundary: Vec<bool>,
        spacing: f64,
    ) -> Result<Self> {
        Self::validate(&locations, spacing)?;
        if boundary.len() != locations.len() {
            return Err(Error::InvalidGrid(format!(
                "{} boundary flags for {} locations",
                boundary.len(),
                locations.len()
            )));
        }
        Ok(Self {
            locations,
            boundary,
            spacing,
        })
    }

    /// Regular grid `start, start + spacing, ..., end` on the line.
    pub fn regular_1d(start: f64, end: f64, spacing: f64) -> Result<Self> {
        if !(spacing > 0.0) || !(end >= start) {
            return Err(Error::InvalidGrid(format!(
                "bad 1-D grid [{start}, {end}] spacing {spacing}"
            )));
        }
        let n = ((end - start) / spacing + 1e-9).floor() as usize + 1;
        let locations = (0..n)
            .map(|i| Location::d1(round_grid(start + i as f64 * spacing)))
            .collect();
        Self::new(locations, spacing)
    }

    /// Rectangular `nx × ny` lattice with lower-left corner `origin`, row-major
    /// in `x` (index `j * nx + i`).
    pub fn regular_2d(origin: (f64, f64), nx: usize, ny: usize, spacing: f64) -> Result<Self> {
        if nx == 0 || ny == 0 || !(spacing > 0.0) {
            return Err(Error::InvalidGrid(format!(
                "bad 2-D grid {nx}x{ny} spacing {spacing}"
            )));
        }
        let mut locations = Vec::with_capacity(nx * ny);
        for j in 0..ny {
            for i in 0..nx {
                locations.push(Location::d2(
                    round_grid(origin.0 + i as f64 * spacing),
                    round_grid(origin.1 + j as f64 * spacing),
                ));
            }
        }
        Self::new(locations, spacing)
    }

    fn validate(locations: &[Location], spacing: f64) -> Result<()> {
        if locations.is_empty() {
            return Err(Error::InvalidGrid("grid has no locations".into()));
        }
        if !(spacing > 0.0 && spacing.is_finite()) {
            return Err(Error::InvalidGrid(format!(
                "cell spacing {spacing} must be positive"
            )));
        }
        let dim = locations[0].dim();
        let mut seen = HashSet::with_capacity(locations.len());
        for loc in locations {
            if loc.dim() != dim {
                return Err(Error::InvalidGrid("mixed location dimensions".into()));
            }
            let key: Vec<u64> = loc.coords().iter().map(|c| (c + 0.0).to_bits()).collect();
            if !seen.insert(key) {
                return Err(Error::InvalidGrid(format!(
                    "duplicate location {:?}",
                    loc.coords()
                )));
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.locations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.locations.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.locations[0].dim()
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    pub fn locations(&self) -> &[Location] {
        &self.locations
    }

    pub fn location(&self, i: usize) -> &Location {
        &self.locations[i]
    }

    pub fn coords(&self, i: usize) -> &[f64] {
        self.locations[i].coords()
    }

    pub fn boundary_flags(&self) -> &[bool] {
        &self.boundary
    }

    pub fn is_boundary(&self, i: usize) -> bool {
        self.boundary[i]
    }

    pub fn distance(&self, i: usize, j: usize) -> f64 {
        self.locations[i].distance(&self.locations[j])
    }

    /// Lag vector `s_i - s_j`.
    pub fn lag(&self, i: usize, j: usize) -> Vec<f64> {
        self.coords(i)
            .iter()
            .zip(self.coords(j))
            .map(|(a, b)| a - b)
            .collect()
    }

    /// Index of the grid location closest to `coords` (lowest index on ties).
    pub fn nearest(&self, coords: &[f64]) -> usize {
        let mut best = (f64::INFINITY, 0);
        for (i, loc) in self.locations.iter().enumerate() {
            let d = euclid(loc.coords(), coords);
            if d < best.0 {
                best = (d, i);
            }
        }
        best.1
    }

    /// Index of the location equal to `coords` up to half a cell.
    pub fn index_of(&self, coords: &[f64]) -> Option<usize> {
        let i = self.nearest(coords);
        (euclid(self.coords(i), coords) <= 0.5 * self.spacing).then_some(i)
    }

    pub fn check_indices(&self, subset: &[usize]) -> Result<()> {
        for &i in subset {
            if i >= self.len() {
                return Err(Error::IndexOutOfRange {
                    index: i,
                    len: self.len(),
                });
            }
        }
        Ok(())
    }

    /// Adds every lattice cell within `margin` of the region that is not
    /// already part of it. Returns the enlarged grid (original cells first,
    /// in their original order) and a mask marking the original cells.
    ///
    /// Boundary flags of the enlarged grid are recomputed from the lattice.
    pub fn extend_by_margin(&self, margin: f64) -> Result<(SpatialGrid, Vec<bool>)> {
        if !(margin >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "margin {margin} must be nonnegative"
            )));
        }
        let h = self.spacing;
        let dim = self.dim();
        let origin = lattice_origin(&self.locations);
        let keys: HashSet<Vec<i64>> = self
            .locations
            .iter()
            .map(|l| lattice_key(l.coords(), &origin, h))
            .collect();
        let reach = (margin / h + 1e-9).floor() as i64;
        let mut extra: Vec<Vec<i64>> = Vec::new();
        let mut extra_set = HashSet::new();
        let mut sorted_keys: Vec<&Vec<i64>> = keys.iter().collect();
        sorted_keys.sort();
        for key in sorted_keys {
            for offset in offsets(dim, reach) {
                let dist = (offset.iter().map(|o| (o * o) as f64).sum::<f64>()).sqrt() * h;
                if dist > margin + 1e-9 {
                    continue;
                }
                let cand: Vec<i64> = key.iter().zip(&offset).map(|(k, o)| k + o).collect();
                if !keys.contains(&cand) && extra_set.insert(cand.clone()) {
                    extra.push(cand);
                }
            }
        }
        extra.sort();
        let mut locations = self.locations.clone();
        for key in extra {
            let coords = key
                .iter()
                .zip(&origin)
                .map(|(k, o)| round_grid(o + *k as f64 * h))
                .collect();
            locations.push(Location { coords });
        }
        let mut mask = vec![false; locations.len()];
        mask[..self.len()].iter_mut().for_each(|m| *m = true);
        Ok((SpatialGrid::new(locations, h)?, mask))
    }

    /// Sub-grid made of the given indices, in order; boundary flags recomputed.
    pub fn subgrid(&self, indices: &[usize]) -> Result<SpatialGrid> {
        self.check_indices(indices)?;
        let locs = indices.iter().map(|&i| self.locations[i].clone()).collect();
        SpatialGrid::new(locs, self.spacing)
    }
}

fn round_grid(x: f64) -> f64 {
    // strips accumulated representation error from `start + i * spacing`
    (x * 1e9).round() / 1e9
}

fn lattice_origin(locations: &[Location]) -> Vec<f64> {
    let dim = locations[0].dim();
    (0..dim)
        .map(|d| {
            locations
                .iter()
                .map(|l| l.coords()[d])
                .fold(f64::INFINITY, f64::min)
        })
        .collect()
}

fn lattice_key(coords: &[f64], origin: &[f64], h: f64) -> Vec<i64> {
    coords
        .iter()
        .zip(origin)
        .map(|(c, o)| ((c - o) / h).round() as i64)
        .collect()
}

fn offsets(dim: usize, reach: i64) -> Vec<Vec<i64>> {
    let mut out = vec![Vec::new()];
    for _ in 0..dim {
        let mut next = Vec::new();
        for prefix in &out {
            for o in -reach..=reach {
                let mut v = prefix.clone();
                v.push(o);
                next.push(v);
            }
        }
        out = next;
    }
    out
}

fn lattice_boundary(locations: &[Location], h: f64) -> Vec<bool> {
    let origin = lattice_origin(locations);
    let keys: HashMap<Vec<i64>, usize> = locations
        .iter()
        .enumerate()
        .map(|(i, l)| (lattice_key(l.coords(), &origin, h), i))
        .collect();
    locations
        .iter()
        .map(|l| {
            let key = lattice_key(l.coords(), &origin, h);
            (0..key.len()).any(|d| {
                [-1i64, 1].iter().any(|step| {
                    let mut n = key.clone();
                    n[d] += step;
                    !keys.contains_key(&n)
                })
            })
        })
        .collect()
}

/// Scalar summary of a field defining which events count as extreme.
///
/// Restricted to a subset of sites the functional is estimated by the
/// corresponding discrete statistic (maximum, average, renormalized weighted
/// average, or the value at the designated site).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum RiskFunctional {
    Supremum,
    Mean,
    WeightedLinear { weights: Vec<f64> },
    SingleSite { index: usize },
}

impl RiskFunctional {
    pub fn weighted(weights: Vec<f64>) -> Result<Self> {
        let r = RiskFunctional::WeightedLinear { weights };
        r.validate(None)?;
        Ok(r)
    }

    /// Checks functional parameters, and against a grid size when given.
    pub fn validate(&self, grid_len: Option<usize>) -> Result<()> {
        match self {
            RiskFunctional::WeightedLinear { weights } => {
                if weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
                    return Err(Error::InvalidParameter(
                        "weights must be finite and nonnegative".into(),
                    ));
                }
                if !(weights.iter().sum::<f64>() > 0.0) {
                    return Err(Error::InvalidParameter(
                        "weights must sum to a positive value".into(),
                    ));
                }
                if let Some(n) = grid_len {
                    if weights.len() != n {
                        return Err(Error::InvalidParameter(format!(
                            "{} weights for a grid of {n} locations",
                            weights.len()
                        )));
                    }
                }
            }
            RiskFunctional::SingleSite { index } => {
                if let Some(n) = grid_len {
                    if *index >= n {
                        return Err(Error::IndexOutOfRange {
                            index: *index,
                            len: n,
                        });
                    }
                }
            }
            _ => {}
        }
        Ok(())
    }

    /// Value on the full grid.
    pub fn eval(&self, values: &[f64]) -> f64 {
        match self {
            RiskFunctional::Supremum => values.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            RiskFunctional::Mean => values.iter().sum::<f64>() / values.len() as f64,
            RiskFunctional::WeightedLinear { weights } => {
                let total: f64 = weights.iter().sum();
                weights.iter().zip(values).map(|(w, v)| w * v).sum::<f64>() / total
            }
            RiskFunctional::SingleSite { index } => values[*index],
        }
    }

    /// Largest value the functional takes on the unit L1 simplex of a grid
    /// with `len` cells (1 for the supremum, `1/len` for the mean).
    pub fn simplex_bound(&self, len: usize) -> f64 {
        match self {
            RiskFunctional::Supremum | RiskFunctional::SingleSite { .. } => 1.0,
            RiskFunctional::Mean => 1.0 / len as f64,
            RiskFunctional::WeightedLinear { weights } => {
                let total: f64 = weights.iter().sum();
                weights.iter().copied().fold(0.0, f64::max) / total
            }
        }
    }
}

/// Evaluates `r` on `values` restricted to `subset`.
pub fn risk_eval(r: &RiskFunctional, values: &[f64], subset: &[usize]) -> Result<f64> {
    if subset.is_empty() {
        return Err(Error::EmptyEvaluationSet);
    }
    for &i in subset {
        if i >= values.len() {
            return Err(Error::IndexOutOfRange {
                index: i,
                len: values.len(),
            });
        }
    }
    match r {
        RiskFunctional::Supremum => Ok(subset
            .iter()
            .map(|&i| values[i])
            .fold(f64::NEG_INFINITY, f64::max)),
        RiskFunctional::Mean => {
            Ok(subset.iter().map(|&i| values[i]).sum::<f64>() / subset.len() as f64)
        }
        RiskFunctional::WeightedLinear { weights } => {
            if weights.len() != values.len() {
                return Err(Error::InvalidParameter(format!(
                    "{} weights for {} values",
                    weights.len(),
                    values.len()
                )));
            }
            let total: f64 = subset.iter().map(|&i| weights[i]).sum();
            if !(total > 0.0) {
                return Err(Error::InvalidParameter(
                    "zero total weight on evaluation set".into(),
                ));
            }
            Ok(subset.iter().map(|&i| weights[i] * values[i]).sum::<f64>() / total)
        }
        RiskFunctional::SingleSite { index } => {
            if *index >= values.len() {
                return Err(Error::IndexOutOfRange {
                    index: *index,
                    len: values.len(),
                });
            }
            if subset.contains(index) {
                Ok(values[*index])
            } else {
                Err(Error::InvalidParameter(format!(
                    "site {index} not in evaluation set"
                )))
            }
        }
    }
}

/// Smallest distance from a subset of grid cells to the boundary cells.
pub fn dist_to_boundary(grid: &SpatialGrid, subset: &[usize]) -> Result<f64> {
    if subset.is_empty() {
        return Err(Error::EmptyEvaluationSet);
    }
    grid.check_indices(subset)?;
    let boundary: Vec<usize> = (0..grid.len()).filter(|&i| grid.is_boundary(i)).collect();
    Ok(subset
        .iter()
        .map(|&i| {
            boundary
                .iter()
                .map(|&b| grid.distance(i, b))
                .fold(f64::INFINITY, f64::min)
        })
        .fold(f64::INFINITY, f64::min))
}

/// Time series recorded at a station. Missing observations are `None`;
/// timestamps are seconds (or any strictly increasing integer clock).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StationSeries {
    pub name: String,
    pub location: Location,
    pub times: Vec<i64>,
    pub values: Vec<Option<f64>>,
}

impl StationSeries {
    pub fn new(
        name: impl Into<String>,
        location: Location,
        times: Vec<i64>,
        values: Vec<Option<f64>>,
        rainfall: bool,
    ) -> Result<Self> {
        if times.len() != values.len() {
            return Err(Error::InvalidParameter(format!(
                "{} timestamps for {} values",
                times.len(),
                values.len()
            )));
        }
        if times.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidParameter(
                "timestamps must be strictly increasing".into(),
            ));
        }
        if values.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter(
                "observations must be finite".into(),
            ));
        }
        if rainfall && values.iter().flatten().any(|v| *v < 0.0) {
            return Err(Error::InvalidParameter(
                "negative rainfall observation".into(),
            ));
        }
        Ok(Self {
            name: name.into(),
            location,
            times,
            values,
        })
    }

    /// Observed (non-missing) values in time order.
    pub fn observed(&self) -> Vec<f64> {
        self.values.iter().flatten().copied().collect()
    }
}

/// One real value per grid location.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GriddedField {
    pub grid: SpatialGrid,
    pub values: Vec<f64>,
}

impl GriddedField {
    pub fn new(grid: SpatialGrid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::InvalidParameter(format!(
                "{} values for a grid of {} locations",
                values.len(),
                grid.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter(
                "field values must be finite".into(),
            ));
        }
        Ok(Self { grid, values })
    }

    /// Value at the grid cell nearest to `coords`.
    pub fn at(&self, coords: &[f64]) -> f64 {
        self.values[self.grid.nearest(coords)]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn line() -> SpatialGrid {
        SpatialGrid::regular_1d(-6.0, 6.0, 0.1).unwrap()
    }

    #[test]
    fn risk_eval_basic_values() {
        let v = [1.0, 3.0, 2.0];
        let all = [0, 1, 2];
        assert_eq!(risk_eval(&RiskFunctional::Supremum, &v, &all).unwrap(), 3.0);
        assert_eq!(risk_eval(&RiskFunctional::Mean, &v, &all).unwrap(), 2.0);
        assert_eq!(risk_eval(&RiskFunctional::Supremum, &v, &[0]).unwrap(), 1.0);
        assert_eq!(
            risk_eval(&RiskFunctional::SingleSite { index: 2 }, &v, &all).unwrap(),
            2.0
        );
    }

    #[test]
    fn risk_eval_rejects_empty_subset() {
        let err = risk_eval(&RiskFunctional::Mean, &[1.0], &[]).unwrap_err();
        assert_eq!(err.to_string(), "empty evaluation set");
        assert!(risk_eval(&RiskFunctional::Mean, &[1.0], &[3]).is_err());
    }

    #[test]
    fn constant_one_field_evaluates_to_one() {
        let ones = vec![1.0; 7];
        assert_eq!(RiskFunctional::Supremum.eval(&ones), 1.0);
        assert_eq!(RiskFunctional::Mean.eval(&ones), 1.0);
        let w = RiskFunctional::weighted(vec![0.0, 1.0, 2.0, 0.5, 0.0, 0.0, 3.0]).unwrap();
        assert!((w.eval(&ones) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn weighted_requires_positive_total() {
        assert!(RiskFunctional::weighted(vec![0.0, 0.0]).is_err());
        assert!(RiskFunctional::weighted(vec![-1.0, 2.0]).is_err());
        let w = RiskFunctional::weighted(vec![1.0, 0.0]).unwrap();
        assert!(risk_eval(&w, &[1.0, 2.0], &[1]).is_err());
    }

    #[test]
    fn line_grid_has_two_boundary_cells() {
        let g = line();
        assert_eq!(g.len(), 121);
        let b: Vec<usize> = (0..g.len()).filter(|&i| g.is_boundary(i)).collect();
        assert_eq!(b, vec![0, 120]);
    }

    #[test]
    fn dist_to_boundary_examples() {
        let g = line();
        let idx = |x: f64| g.index_of(&[x]).unwrap();
        assert!((dist_to_boundary(&g, &[idx(0.0)]).unwrap() - 6.0).abs() < 1e-9);
        assert_eq!(dist_to_boundary(&g, &[idx(-6.0), idx(0.0)]).unwrap(), 0.0);
        assert!((dist_to_boundary(&g, &[idx(-5.5), idx(5.5)]).unwrap() - 0.5).abs() < 1e-9);
        assert!(dist_to_boundary(&g, &[]).is_err());
    }

    #[test]
    fn rectangle_boundary_is_outer_ring() {
        let g = SpatialGrid::regular_2d((0.0, 0.0), 5, 4, 1.0).unwrap();
        let n = g.boundary_flags().iter().filter(|b| **b).count();
        assert_eq!(n, 5 * 4 - 3 * 2);
        assert!(!g.is_boundary(6));
    }

    #[test]
    fn duplicate_locations_rejected() {
        let locs = vec![Location::d1(0.0), Location::d1(0.0)];
        assert!(SpatialGrid::new(locs, 1.0).is_err());
    }

    #[test]
    fn margin_extension_keeps_original_cells_first() {
        let g = SpatialGrid::regular_2d((0.0, 0.0), 3, 3, 1.0).unwrap();
        let (ext, mask) = g.extend_by_margin(1.0).unwrap();
        // 3x3 plus the 4-neighbour ring: 5x5 minus the 4 corners
        assert_eq!(ext.len(), 21);
        assert_eq!(mask.iter().filter(|m| **m).count(), 9);
        for i in 0..9 {
            assert_eq!(ext.coords(i), g.coords(i));
        }
        assert!(!ext.is_boundary(4));
    }

    #[test]
    fn station_series_validation() {
        let loc = Location::d2(0.0, 0.0);
        assert!(
            StationSeries::new("a", loc.clone(), vec![1, 1], vec![Some(0.0), None], true).is_err()
        );
        assert!(
            StationSeries::new("a", loc.clone(), vec![1, 2], vec![Some(-1.0), None], true).is_err()
        );
        let s = StationSeries::new(
            "a",
            loc,
            vec![1, 2, 5],
            vec![Some(0.5), None, Some(2.0)],
            true,
        )
        .unwrap();
        assert_eq!(s.observed(), vec![0.5, 2.0]);
    }

    proptest! {
        #[test]
        fn sup_is_monotone_in_evaluation_set(
            values in proptest::collection::vec(-10.0f64..10.0, 2..30),
            picks in proptest::collection::vec(any::<bool>(), 30),
            extra in proptest::collection::vec(any::<bool>(), 30),
        ) {
            let n = values.len();
            let a: Vec<usize> = (0..n).filter(|&i| picks[i] || i == 0).collect();
            let b: Vec<usize> = (0..n).filter(|&i| picks[i] || extra[i] || i == 0).collect();
            let ra = risk_eval(&RiskFunctional::Supremum, &values, &a).unwrap();
            let rb = risk_eval(&RiskFunctional::Supremum, &values, &b).unwrap();
            prop_assert!(ra <= rb);
        }

        #[test]
        fn full_grid_matches_brute_force(values in proptest::collection::vec(-10.0f64..10.0, 1..40)) {
            let all: Vec<usize> = (0..values.len()).collect();
            let mut max = f64::NEG_INFINITY;
            let mut sum = 0.0;
            for v in &values {
                if *v > max { max = *v; }
                sum += v;
            }
            prop_assert_eq!(risk_eval(&RiskFunctional::Supremum, &values, &all).unwrap(), max);
            let mean = risk_eval(&RiskFunctional::Mean, &values, &all).unwrap();
            prop_assert!((mean - sum / values.len() as f64).abs() < 1e-12);
        }
    }
}
