//! Sequential near-optimal sampling designs.
//!
//! A design `A` is scored on a fixed Monte Carlo ensemble by the discrepancy
//! `|I - N⁻¹ #{n : r_A(X_n) ≥ u}|`, where `I` is the fraction of members whose
//! full-region risk exceeds `u`. Sites are added greedily, one at a time, at
//! the candidate that *minimizes* the discrepancy, which for the supremum is
//! the candidate adding the most newly covered exceedances.
//!
//! All scores are integer exceedance counts, so comparisons and the
//! bookkeeping identities below are exact.

use std::collections::HashSet;

use rand::seq::index::sample as sample_indices;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::domain::{risk_eval, RiskFunctional, SpatialGrid};
use crate::error::{Error, Result};
use crate::samples::SampleMatrix;
use crate::simulate::{simulate_r_pareto, MarginalModel, ParetoEnsemble, ParetoSpec, Seed};
use crate::variogram::VariogramModel;

/// Smallest ensemble accepted for design computations.
pub const MIN_ENSEMBLE: usize = 100;

type Bits = Vec<u64>;

fn popcount(b: &[u64]) -> u64 {
    b.iter().map(|w| w.count_ones() as u64).sum()
}

fn or_count(a: &[u64], b: &[u64]) -> u64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x | y).count_ones() as u64)
        .sum()
}

fn and_count(a: &[u64], b: &[u64]) -> u64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x & y).count_ones() as u64)
        .sum()
}

#[derive(Debug, Clone)]
enum Scorer {
    /// Per-cell exceedance indicators.
    Sup {
        bits: Vec<Bits>,
    },
    /// Column-major values and weights of a normalized linear functional.
    Linear {
        cols: Vec<Vec<f64>>,
        weights: Option<Vec<f64>>,
    },
    Single {
        index: usize,
    },
}

/// Exceedance bookkeeping of one ensemble for one risk functional and
/// threshold.
#[derive(Debug, Clone)]
pub struct DesignProblem {
    n: usize,
    len: usize,
    threshold: f64,
    scorer: Scorer,
    /// Members whose risk over the region exceeds the threshold.
    full: Bits,
    full_count: u64,
    region: Vec<bool>,
    eligible: Vec<bool>,
}

/// Running coverage of a design.
#[derive(Debug, Clone)]
enum Coverage {
    Sup { covered: Bits },
    Linear { sums: Vec<f64>, weight: f64 },
    Single { contains: bool },
}

impl DesignProblem {
    /// Data-scale ensemble `data` (one member per row) on the whole grid.
    pub fn new(data: &SampleMatrix, risk: &RiskFunctional, threshold: f64) -> Result<Self> {
        let n = data.rows();
        if n < MIN_ENSEMBLE {
            return Err(Error::InsufficientMonteCarlo {
                n,
                min: MIN_ENSEMBLE,
            });
        }
        let len = data.cols();
        risk.validate(Some(len))?;
        let words = n.div_ceil(64);
        let scorer = match risk {
            RiskFunctional::Supremum => Scorer::Sup {
                bits: (0..len)
                    .into_par_iter()
                    .map(|s| {
                        let mut b = vec![0u64; words];
                        for i in 0..n {
                            if data.get(i, s) >= threshold {
                                b[i / 64] |= 1 << (i % 64);
                            }
                        }
                        b
                    })
                    .collect(),
            },
            RiskFunctional::Mean => Scorer::Linear {
                cols: (0..len).map(|s| data.column(s)).collect(),
                weights: None,
            },
            RiskFunctional::WeightedLinear { weights } => Scorer::Linear {
                cols: (0..len).map(|s| data.column(s)).collect(),
                weights: Some(weights.clone()),
            },
            RiskFunctional::SingleSite { index } => Scorer::Single { index: *index },
        };
        let mut p = Self {
            n,
            len,
            threshold,
            scorer,
            full: vec![0; words],
            full_count: 0,
            region: vec![true; len],
            eligible: vec![true; len],
        };
        p.set_full(data, risk)?;
        Ok(p)
    }

    /// Scores an r-Pareto ensemble mapped to the data scale by `marginal`.
    pub fn from_ensemble(
        ens: &ParetoEnsemble,
        marginal: &MarginalModel,
        risk: &RiskFunctional,
        threshold: f64,
    ) -> Result<Self> {
        if marginal.len() != ens.grid.len() {
            return Err(Error::InvalidParameter(
                "marginal model does not match the ensemble grid".into(),
            ));
        }
        Self::new(&ens.data_scale_with(marginal), risk, threshold)
    }

    fn set_full(&mut self, data: &SampleMatrix, risk: &RiskFunctional) -> Result<()> {
        let region: Vec<usize> = (0..self.len).filter(|&s| self.region[s]).collect();
        let mut full = vec![0u64; self.n.div_ceil(64)];
        for i in 0..self.n {
            let exceeds = match risk {
                RiskFunctional::SingleSite { index } if !self.region[*index] => false,
                _ => risk_eval(risk, data.row(i), &region)? >= self.threshold,
            };
            if exceeds {
                full[i / 64] |= 1 << (i % 64);
            }
        }
        self.full_count = popcount(&full);
        self.full = full;
        Ok(())
    }

    /// Restricts the reference region `S` (on which `I` is defined) to the
    /// flagged cells, e.g. when candidates extend beyond the study region.
    pub fn with_region(
        mut self,
        data: &SampleMatrix,
        risk: &RiskFunctional,
        region: Vec<bool>,
    ) -> Result<Self> {
        if region.len() != self.len || !region.iter().any(|r| *r) {
            return Err(Error::InvalidParameter(
                "region mask must flag at least one grid cell".into(),
            ));
        }
        self.region = region;
        self.set_full(data, risk)?;
        Ok(self)
    }

    /// Restricts which cells may be selected.
    pub fn with_candidates(mut self, eligible: Vec<bool>) -> Result<Self> {
        if eligible.len() != self.len {
            return Err(Error::InvalidParameter(
                "candidate mask has the wrong length".into(),
            ));
        }
        self.eligible = eligible;
        Ok(self)
    }

    pub fn members(&self) -> usize {
        self.n
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn eligible(&self) -> &[bool] {
        &self.eligible
    }

    /// Members exceeding over the whole region.
    pub fn reference_count(&self) -> u64 {
        self.full_count
    }

    pub fn reference_prob(&self) -> f64 {
        self.full_count as f64 / self.n as f64
    }

    fn empty_coverage(&self) -> Coverage {
        match &self.scorer {
            Scorer::Sup { .. } => Coverage::Sup {
                covered: vec![0; self.full.len()],
            },
            Scorer::Linear { .. } => Coverage::Linear {
                sums: vec![0.0; self.n],
                weight: 0.0,
            },
            Scorer::Single { .. } => Coverage::Single { contains: false },
        }
    }

    fn add(&self, cov: &mut Coverage, k: usize) {
        match (&self.scorer, cov) {
            (Scorer::Sup { bits }, Coverage::Sup { covered }) => {
                for (c, b) in covered.iter_mut().zip(&bits[k]) {
                    *c |= b;
                }
            }
            (Scorer::Linear { cols, weights }, Coverage::Linear { sums, weight }) => {
                let w = weights.as_ref().map_or(1.0, |w| w[k]);
                for (s, x) in sums.iter_mut().zip(&cols[k]) {
                    *s += w * x;
                }
                *weight += w;
            }
            (Scorer::Single { index }, Coverage::Single { contains }) => {
                *contains |= k == *index;
            }
            _ => unreachable!("coverage built for another functional"),
        }
    }

    fn coverage_of(&self, subset: &[usize]) -> Coverage {
        let mut cov = self.empty_coverage();
        for &k in subset {
            self.add(&mut cov, k);
        }
        cov
    }

    fn count(&self, cov: &Coverage) -> u64 {
        match (&self.scorer, cov) {
            (Scorer::Sup { .. }, Coverage::Sup { covered }) => popcount(covered),
            (Scorer::Linear { .. }, Coverage::Linear { sums, weight }) => {
                if !(*weight > 0.0) {
                    return 0;
                }
                sums.iter()
                    .filter(|s| **s / weight >= self.threshold)
                    .count() as u64
            }
            (Scorer::Single { index }, Coverage::Single { contains }) => {
                if *contains {
                    self.single_count(*index)
                } else {
                    0
                }
            }
            _ => unreachable!("coverage built for another functional"),
        }
    }

    fn single_count(&self, _index: usize) -> u64 {
        // the single-site risk over any set containing the site equals the
        // full-grid risk
        self.full_count
    }

    /// Exceedance count of the design `cov ∪ {k}`.
    fn count_with(&self, cov: &Coverage, k: usize) -> u64 {
        match (&self.scorer, cov) {
            (Scorer::Sup { bits }, Coverage::Sup { covered }) => or_count(covered, &bits[k]),
            (Scorer::Linear { cols, weights }, Coverage::Linear { sums, weight }) => {
                let w = weights.as_ref().map_or(1.0, |w| w[k]);
                let total = weight + w;
                if !(total > 0.0) {
                    return 0;
                }
                sums.iter()
                    .zip(&cols[k])
                    .filter(|(s, x)| (**s + w * **x) / total >= self.threshold)
                    .count() as u64
            }
            (Scorer::Single { index }, Coverage::Single { contains }) => {
                if *contains || k == *index {
                    self.single_count(*index)
                } else {
                    0
                }
            }
            _ => unreachable!("coverage built for another functional"),
        }
    }

    fn discrepancy_of_count(&self, count: u64) -> f64 {
        self.full_count.abs_diff(count) as f64 / self.n as f64
    }

    /// Members whose risk restricted to `subset` exceeds the threshold.
    pub fn subset_count(&self, subset: &[usize]) -> Result<u64> {
        if subset.is_empty() {
            return Err(Error::EmptyEvaluationSet);
        }
        self.check(subset)?;
        Ok(self.count(&self.coverage_of(subset)))
    }

    /// `|I - N⁻¹ #{n : r_subset(X_n) ≥ u}|`.
    pub fn subset_discrepancy(&self, subset: &[usize]) -> Result<f64> {
        Ok(self.discrepancy_of_count(self.subset_count(subset)?))
    }

    fn check(&self, subset: &[usize]) -> Result<()> {
        for &i in subset {
            if i >= self.len {
                return Err(Error::IndexOutOfRange {
                    index: i,
                    len: self.len,
                });
            }
        }
        Ok(())
    }

    fn sup_bits(&self) -> Result<&[Bits]> {
        match &self.scorer {
            Scorer::Sup { bits } => Ok(bits),
            _ => Err(Error::InvalidParameter(
                "exceedance decompositions are defined for the supremum".into(),
            )),
        }
    }

    /// Counting form of the telescoping decomposition of
    /// `P(max_A X ≥ u | sup_S X ≥ u)`: the directly counted joint coverage,
    /// and the "first new exceedance at site k" counts, which sum to it.
    pub fn first_exceedance_decomposition(&self, sites: &[usize]) -> Result<(u64, Vec<u64>)> {
        let bits = self.sup_bits()?;
        self.check(sites)?;
        let mut covered = vec![0u64; self.full.len()];
        let mut terms = Vec::with_capacity(sites.len());
        for &s in sites {
            let new: u64 = bits[s]
                .iter()
                .zip(&covered)
                .zip(&self.full)
                .map(|((b, c), f)| (b & !c & f).count_ones() as u64)
                .sum();
            terms.push(new);
            for (c, b) in covered.iter_mut().zip(&bits[s]) {
                *c |= b;
            }
        }
        let direct = and_count(&covered, &self.full);
        Ok((direct, terms))
    }

    /// Per-step counts `(coverage(A_L), coverage(A_{L-1}), marginal(s_L),
    /// joint(s_L, A_{L-1}))` along a site sequence, which satisfy
    /// `coverage(A_L) = coverage(A_{L-1}) + marginal - joint`.
    pub fn sequential_increments(&self, sites: &[usize]) -> Result<Vec<[u64; 4]>> {
        let bits = self.sup_bits()?;
        self.check(sites)?;
        let mut covered = vec![0u64; self.full.len()];
        let mut out = Vec::with_capacity(sites.len());
        for &s in sites {
            let before = popcount(&covered);
            let marginal = popcount(&bits[s]);
            let joint = and_count(&bits[s], &covered);
            for (c, b) in covered.iter_mut().zip(&bits[s]) {
                *c |= b;
            }
            out.push([popcount(&covered), before, marginal, joint]);
        }
        Ok(out)
    }
}

/// One greedy step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignStep {
    pub index: usize,
    pub discrepancy: f64,
    /// Members exceeding over the design after this step.
    pub count: u64,
    /// Discrepancy of adding each cell at this step (`None` if not a
    /// candidate).
    pub surface: Vec<Option<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignState {
    pub observed: Vec<usize>,
    pub chosen: Vec<usize>,
    pub reference_prob: f64,
    pub reference_count: u64,
    pub members: usize,
    /// Discrepancy of the current design.
    pub discrepancy: f64,
    pub history: Vec<DesignStep>,
    /// Forward-backward swaps `(removed, added)` applied after the greedy pass.
    pub swaps: Vec<(usize, usize)>,
}

impl DesignState {
    pub fn discrepancy_trace(&self) -> Vec<f64> {
        self.history.iter().map(|s| s.discrepancy).collect()
    }

    /// Observed followed by chosen sites.
    pub fn all_sites(&self) -> Vec<usize> {
        self.observed.iter().chain(&self.chosen).copied().collect()
    }
}

fn min_distance(grid: &SpatialGrid, k: usize, sites: &[usize]) -> f64 {
    sites
        .iter()
        .map(|&s| grid.distance(k, s))
        .fold(f64::INFINITY, f64::min)
}

/// Best candidate by (count distance to the reference, then larger minimum
/// distance to `placed`, then lower index), with the per-cell surface.
fn best_addition(
    problem: &DesignProblem,
    grid: &SpatialGrid,
    cov: &Coverage,
    placed: &[usize],
    excluded: &HashSet<usize>,
) -> Option<(usize, u64, Vec<Option<f64>>)> {
    let scores: Vec<Option<u64>> = (0..problem.len)
        .into_par_iter()
        .map(|k| {
            if problem.eligible[k] && !excluded.contains(&k) {
                Some(problem.count_with(cov, k))
            } else {
                None
            }
        })
        .collect();
    let mut best: Option<(usize, u64, u64, f64)> = None;
    for (k, c) in scores.iter().enumerate() {
        let Some(c) = *c else { continue };
        let gap = problem.full_count.abs_diff(c);
        let dist = min_distance(grid, k, placed);
        let better = match best {
            None => true,
            Some((_, _, bgap, bdist)) => gap < bgap || (gap == bgap && dist > bdist),
        };
        if better {
            best = Some((k, c, gap, dist));
        }
    }
    let surface = scores
        .iter()
        .map(|c| c.map(|c| problem.discrepancy_of_count(c)))
        .collect();
    best.map(|(k, c, _, _)| (k, c, surface))
}

/// Greedy sequential design of `l_samp` additional sites given already
/// observed sites.
pub fn sequential_design(
    problem: &DesignProblem,
    grid: &SpatialGrid,
    l_samp: usize,
    observed: &[usize],
) -> Result<DesignState> {
    if l_samp == 0 {
        return Err(Error::InvalidParameter(
            "number of sites to add must be at least 1".into(),
        ));
    }
    if grid.len() != problem.len {
        return Err(Error::InvalidParameter(
            "grid does not match the ensemble".into(),
        ));
    }
    grid.check_indices(observed)?;
    let observed_set: HashSet<usize> = observed.iter().copied().collect();
    let available = (0..problem.len)
        .filter(|k| problem.eligible[*k] && !observed_set.contains(k))
        .count();
    if available < l_samp {
        return Err(Error::InvalidParameter(format!(
            "{l_samp} sites requested but only {available} candidates remain"
        )));
    }
    let mut cov = problem.coverage_of(observed);
    let mut excluded = observed_set;
    let mut placed: Vec<usize> = observed.to_vec();
    let mut chosen = Vec::with_capacity(l_samp);
    let mut history = Vec::with_capacity(l_samp);
    for _ in 0..l_samp {
        let (k, count, surface) = best_addition(problem, grid, &cov, &placed, &excluded)
            .expect("candidates counted above");
        problem.add(&mut cov, k);
        excluded.insert(k);
        placed.push(k);
        chosen.push(k);
        history.push(DesignStep {
            index: k,
            discrepancy: problem.discrepancy_of_count(count),
            count,
            surface,
        });
    }
    Ok(DesignState {
        observed: observed.to_vec(),
        discrepancy: history.last().map_or(f64::NAN, |s| s.discrepancy),
        chosen,
        reference_prob: problem.reference_prob(),
        reference_count: problem.reference_count(),
        members: problem.n,
        history,
        swaps: Vec::new(),
    })
}

/// Forward-backward sweeps: each chosen site in turn is removed and the best
/// replacement re-added; a swap is kept only if the discrepancy drops by more
/// than `1 / (2N)`, i.e. by at least one member.
pub fn forward_backward_refine(
    mut state: DesignState,
    problem: &DesignProblem,
    grid: &SpatialGrid,
    max_sweeps: usize,
) -> Result<DesignState> {
    if state.chosen.len() < 2 {
        return Err(Error::InvalidParameter(
            "refinement needs at least 2 chosen sites".into(),
        ));
    }
    let gap = |sites: &[usize]| {
        problem
            .full_count
            .abs_diff(problem.count(&problem.coverage_of(sites)))
    };
    let mut current = gap(&state.all_sites());
    for _ in 0..max_sweeps {
        let mut improved = false;
        for i in 0..state.chosen.len() {
            let removed = state.chosen[i];
            let mut rest: Vec<usize> = state.observed.clone();
            rest.extend(
                state
                    .chosen
                    .iter()
                    .enumerate()
                    .filter(|(j, _)| *j != i)
                    .map(|(_, s)| *s),
            );
            let cov = problem.coverage_of(&rest);
            let excluded: HashSet<usize> = rest.iter().copied().collect();
            let Some((k, count, _)) = best_addition(problem, grid, &cov, &rest, &excluded) else {
                continue;
            };
            let new_gap = problem.full_count.abs_diff(count);
            if k != removed && new_gap < current {
                state.chosen[i] = k;
                state.swaps.push((removed, k));
                current = new_gap;
                improved = true;
            }
        }
        if !improved {
            break;
        }
    }
    state.discrepancy = current as f64 / problem.n as f64;
    Ok(state)
}

/// Exhaustive search over all `size`-subsets of eligible, unobserved cells;
/// returns the first optimal subset in lexicographic order and its
/// discrepancy.
pub fn exhaustive_optimum(
    problem: &DesignProblem,
    size: usize,
    observed: &[usize],
) -> Result<(Vec<usize>, f64)> {
    let pool: Vec<usize> = (0..problem.len)
        .filter(|k| problem.eligible[*k] && !observed.contains(k))
        .collect();
    if size == 0 || size > pool.len() {
        return Err(Error::InvalidParameter(format!(
            "cannot choose {size} of {} cells",
            pool.len()
        )));
    }
    let mut idx: Vec<usize> = (0..size).collect();
    let mut best: Option<(Vec<usize>, u64)> = None;
    loop {
        let mut sites = observed.to_vec();
        sites.extend(idx.iter().map(|&i| pool[i]));
        let g = problem
            .full_count
            .abs_diff(problem.count(&problem.coverage_of(&sites)));
        if best.as_ref().is_none_or(|(_, b)| g < *b) {
            best = Some((idx.iter().map(|&i| pool[i]).collect(), g));
        }
        // next combination
        let mut i = size;
        while i > 0 && idx[i - 1] == pool.len() - size + i - 1 {
            i -= 1;
        }
        if i == 0 {
            break;
        }
        idx[i - 1] += 1;
        for j in i..size {
            idx[j] = idx[j - 1] + 1;
        }
    }
    let (sites, g) = best.expect("at least one subset");
    Ok((sites, g as f64 / problem.n as f64))
}

/// `I`: fraction of members whose full-grid data-scale risk exceeds `u`.
pub fn reference_prob(
    ens: &ParetoEnsemble,
    marginal: &MarginalModel,
    risk: &RiskFunctional,
    threshold: f64,
) -> Result<f64> {
    if ens.is_empty() {
        return Err(Error::InvalidParameter("empty ensemble".into()));
    }
    let data = ens.data_scale_with(marginal);
    let hits = data
        .iter_rows()
        .filter(|row| risk.eval(row) >= threshold)
        .count();
    Ok(hits as f64 / data.rows() as f64)
}

/// Discrepancy of a subset against a given reference probability.
pub fn subset_discrepancy(
    ens: &ParetoEnsemble,
    marginal: &MarginalModel,
    risk: &RiskFunctional,
    threshold: f64,
    subset: &[usize],
    reference: f64,
) -> Result<f64> {
    if subset.is_empty() {
        return Err(Error::EmptyEvaluationSet);
    }
    let data = ens.data_scale_with(marginal);
    let mut hits = 0usize;
    for row in data.iter_rows() {
        let exceeds = match risk {
            RiskFunctional::SingleSite { index } if !subset.contains(index) => false,
            _ => risk_eval(risk, row, subset)? >= threshold,
        };
        hits += exceeds as usize;
    }
    Ok((reference - hits as f64 / data.rows() as f64).abs())
}

/// How a stationary design run is started.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Initialization {
    /// First site chosen by the singleton discrepancy.
    None,
    Sites {
        indices: Vec<usize>,
    },
    /// `count` distinct uniformly random cells.
    Random {
        count: usize,
        seed: u64,
    },
}

impl Initialization {
    pub fn resolve(&self, len: usize) -> Result<Vec<usize>> {
        match self {
            Initialization::None => Ok(Vec::new()),
            Initialization::Sites { indices } => {
                for &i in indices {
                    if i >= len {
                        return Err(Error::IndexOutOfRange { index: i, len });
                    }
                }
                Ok(indices.clone())
            }
            Initialization::Random { count, seed } => {
                if *count > len {
                    return Err(Error::InvalidParameter(format!(
                        "{count} random sites on {len} cells"
                    )));
                }
                let mut rng = Seed(*seed).stream(0);
                let mut v = sample_indices(&mut rng, len, *count).into_vec();
                v.sort_unstable();
                Ok(v)
            }
        }
    }
}

/// Greedy design for a stationary process with unit margins (`a = 1`,
/// `b = 0`): simulates the ensemble, then designs on it. Initial sites are
/// treated as fixed observed sites.
#[allow(clippy::too_many_arguments)]
pub fn sequential_design_stationary(
    model: &VariogramModel,
    xi: f64,
    grid: &SpatialGrid,
    risk: &RiskFunctional,
    threshold: f64,
    l_samp: usize,
    init: &Initialization,
    n: usize,
    seed: Seed,
) -> Result<DesignState> {
    let marginal = MarginalModel::constant(grid.len(), 1.0, 0.0, xi)?;
    let spec = ParetoSpec::new(*model, marginal.clone(), risk.clone(), threshold);
    let ens = simulate_r_pareto(&spec, grid, n, seed)?;
    let problem = DesignProblem::from_ensemble(&ens, &marginal, risk, threshold)?;
    sequential_design(&problem, grid, l_samp, &init.resolve(grid.len())?)
}

/// Variant scoring every step on a fresh ensemble (seed derived from the
/// step number), for assessing Monte Carlo variability of the choices.
pub fn sequential_design_fresh(
    spec: &ParetoSpec,
    grid: &SpatialGrid,
    l_samp: usize,
    observed: &[usize],
    n: usize,
    seed: Seed,
) -> Result<DesignState> {
    let mut sites = observed.to_vec();
    let mut history = Vec::with_capacity(l_samp);
    let mut last = None;
    for step in 0..l_samp {
        let ens = simulate_r_pareto(spec, grid, n, seed.derive(step as u64))?;
        let problem =
            DesignProblem::from_ensemble(&ens, &spec.marginal, &spec.risk, spec.threshold)?;
        let st = sequential_design(&problem, grid, 1, &sites)?;
        sites.push(st.chosen[0]);
        history.push(st.history[0].clone());
        last = Some(st);
    }
    let last = last.ok_or_else(|| {
        Error::InvalidParameter("number of sites to add must be at least 1".into())
    })?;
    Ok(DesignState {
        observed: observed.to_vec(),
        chosen: sites[observed.len()..].to_vec(),
        reference_prob: last.reference_prob,
        reference_count: last.reference_count,
        members: last.members,
        discrepancy: last.discrepancy,
        history,
        swaps: Vec::new(),
    })
}
