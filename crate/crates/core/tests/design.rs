use proptest::prelude::*;

use extremal_design::design::{
    exhaustive_optimum, forward_backward_refine, reference_prob, sequential_design,
    sequential_design_stationary, subset_discrepancy, DesignProblem, Initialization,
};
use extremal_design::domain::{RiskFunctional, SpatialGrid};
use extremal_design::experiments::{default_line_grid, ProcessConfig};
use extremal_design::samples::SampleMatrix;
use extremal_design::simulate::{simulate_r_pareto, MarginalModel, ParetoSpec, Seed};
use extremal_design::variogram::VariogramModel;

fn line(n: usize) -> SpatialGrid {
    SpatialGrid::regular_1d(0.0, (n - 1) as f64, 1.0).unwrap()
}

/// Members whose maximum over `sites` reaches `u`, counted directly.
fn brute_count(data: &SampleMatrix, u: f64, sites: &[usize]) -> u64 {
    data.iter_rows()
        .filter(|r| sites.iter().any(|&s| r[s] >= u))
        .count() as u64
}

fn random_matrix() -> impl Strategy<Value = SampleMatrix> {
    (100usize..160, 3usize..9).prop_flat_map(|(n, len)| {
        prop::collection::vec(0.0f64..4.0, n * len)
            .prop_map(move |v| SampleMatrix::new(n, len, v).unwrap())
    })
}

// Singleton coverage is the same at every cell of a stationary process, so
// the first site is decided by Monte Carlo noise; the second must then go to
// the far end of the domain.
#[test]
fn strong_dependence_reaches_the_boundary_by_the_second_site() {
    let grid = default_line_grid();
    for seed in 0..3 {
        let state = sequential_design_stationary(
            &ProcessConfig::pareto_strong().model,
            1.0,
            &grid,
            &RiskFunctional::Supremum,
            1.0,
            2,
            &Initialization::None,
            10_000,
            Seed(31 + seed),
        )
        .unwrap();
        let (first, second) = (
            grid.coords(state.chosen[0])[0],
            grid.coords(state.chosen[1])[0],
        );
        assert!(6.0 - second.abs() <= 0.5 + 1e-9, "sites {first}, {second}");
        assert!(first * second <= 0.0, "sites {first}, {second}");
        let surface: Vec<f64> = state.history[0].surface.iter().flatten().copied().collect();
        let spread = surface.iter().copied().fold(0.0, f64::max)
            - surface.iter().copied().fold(1.0, f64::min);
        // binomial sd of a coverage estimate at N = 10^4 is about 0.005
        assert!(spread < 0.03, "{spread}");
    }
}

// Swaps chase Monte Carlo noise on a nearly flat surface, so sites may move
// by a few cells; they should stay close to where the greedy pass put them.
#[test]
fn refinement_keeps_sites_close_on_the_weak_benchmark() {
    let grid = default_line_grid();
    let (mut close, mut total) = (0, 0);
    for seed in 0..4 {
        let data = ProcessConfig::pareto_weak()
            .simulate_exceedances(&grid, 1.0, 10_000, Seed(100 + seed))
            .unwrap();
        let problem = DesignProblem::new(&data, &RiskFunctional::Supremum, 1.0).unwrap();
        let greedy = sequential_design(&problem, &grid, 6, &[]).unwrap();
        let refined = forward_backward_refine(greedy.clone(), &problem, &grid, 5).unwrap();
        assert!(refined.discrepancy <= greedy.discrepancy);
        close += refined
            .chosen
            .iter()
            .filter(|&&c| {
                greedy
                    .chosen
                    .iter()
                    .any(|&g| grid.distance(c, g) <= 1.0 + 1e-9)
            })
            .count();
        total += refined.chosen.len();
    }
    assert!(close * 5 >= total * 4, "{close}/{total}");
}

// The bitset scorer of DesignProblem and the row-wise evaluation on the
// ensemble must agree.
#[test]
fn ensemble_and_bitset_discrepancies_agree() {
    let grid = line(15);
    let model = VariogramModel::power_law(1.2, 3.0).unwrap();
    let marginal = MarginalModel::new(
        vec![1.3; 15],
        (0..15).map(|i| 0.1 * i as f64).collect(),
        0.2,
    )
    .unwrap();
    let spec = ParetoSpec::new(model, marginal.clone(), RiskFunctional::Supremum, 1.0);
    let ens = simulate_r_pareto(&spec, &grid, 2000, Seed(33)).unwrap();
    let u = 2.5;
    let problem =
        DesignProblem::from_ensemble(&ens, &marginal, &RiskFunctional::Supremum, u).unwrap();
    let i = reference_prob(&ens, &marginal, &RiskFunctional::Supremum, u).unwrap();
    assert_eq!(i, problem.reference_prob());
    for subset in [vec![0], vec![3, 7], vec![14, 2, 9], (0..15).collect()] {
        let a = problem.subset_discrepancy(&subset).unwrap();
        let b =
            subset_discrepancy(&ens, &marginal, &RiskFunctional::Supremum, u, &subset, i).unwrap();
        assert!((a - b).abs() < 1e-12, "{subset:?}: {a} vs {b}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn subset_counts_match_enumeration(data in random_matrix(), u in 1.0f64..3.9, mask in any::<u16>()) {
        let len = data.cols();
        let problem = DesignProblem::new(&data, &RiskFunctional::Supremum, u).unwrap();
        let mut subset: Vec<usize> = (0..len).filter(|k| mask >> k & 1 == 1).collect();
        if subset.is_empty() {
            subset.push(0);
        }
        prop_assert_eq!(problem.subset_count(&subset).unwrap(), brute_count(&data, u, &subset));
        let all: Vec<usize> = (0..len).collect();
        prop_assert_eq!(problem.reference_count(), brute_count(&data, u, &all));
        prop_assert_eq!(problem.subset_discrepancy(&all).unwrap(), 0.0);
    }

    #[test]
    fn greedy_discrepancy_is_nonincreasing_and_certified(
        data in random_matrix(),
        u in 1.0f64..3.9,
        observed in prop::option::of(0usize..3),
    ) {
        let len = data.cols();
        let grid = line(len);
        let problem = DesignProblem::new(&data, &RiskFunctional::Supremum, u).unwrap();
        let observed: Vec<usize> = observed.into_iter().collect();
        let l = len - observed.len();
        let state = sequential_design(&problem, &grid, l, &observed).unwrap();
        let trace = state.discrepancy_trace();
        prop_assert!(trace.windows(2).all(|w| w[1] <= w[0]));
        prop_assert_eq!(*trace.last().unwrap(), 0.0);
        prop_assert!(state.chosen.iter().all(|k| !observed.contains(k)));
        // every step picked a minimizer of the exact re-evaluation
        let mut placed = observed.clone();
        for step in &state.history {
            let best = (0..len)
                .filter(|k| !placed.contains(k))
                .map(|k| {
                    let mut s = placed.clone();
                    s.push(k);
                    problem.subset_discrepancy(&s).unwrap()
                })
                .fold(f64::INFINITY, f64::min);
            prop_assert_eq!(step.discrepancy, best);
            placed.push(step.index);
        }
    }

    #[test]
    fn refinement_never_worse_and_exhaustive_is_a_lower_bound(
        data in random_matrix(),
        u in 1.0f64..3.9,
        l in 2usize..4,
    ) {
        let len = data.cols();
        prop_assume!(l < len);
        let grid = line(len);
        let problem = DesignProblem::new(&data, &RiskFunctional::Supremum, u).unwrap();
        let greedy = sequential_design(&problem, &grid, l, &[]).unwrap();
        let refined = forward_backward_refine(greedy.clone(), &problem, &grid, 10).unwrap();
        let (_, opt) = exhaustive_optimum(&problem, l, &[]).unwrap();
        prop_assert!(refined.discrepancy <= greedy.discrepancy);
        prop_assert!(opt <= refined.discrepancy);
        prop_assert_eq!(refined.discrepancy, problem.subset_discrepancy(&refined.chosen).unwrap());
    }

    #[test]
    fn decomposition_identities(data in random_matrix(), u in 1.0f64..3.9, order in any::<u64>()) {
        let len = data.cols();
        let problem = DesignProblem::new(&data, &RiskFunctional::Supremum, u).unwrap();
        let mut sites: Vec<usize> = (0..len).collect();
        sites.rotate_left((order % len as u64) as usize);
        if order & 1 == 1 {
            sites.reverse();
        }
        let (direct, terms) = problem.first_exceedance_decomposition(&sites).unwrap();
        prop_assert_eq!(direct, terms.iter().sum::<u64>());
        prop_assert_eq!(direct, brute_count(&data, u, &sites));
        for (l, [now, before, marginal, joint]) in problem.sequential_increments(&sites).unwrap().into_iter().enumerate() {
            prop_assert_eq!(now + joint, before + marginal);
            prop_assert_eq!(now, brute_count(&data, u, &sites[..=l]));
        }
    }
}
