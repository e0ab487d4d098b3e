//! Greedy designs on [-6, 6] for the weakly dependent r-Pareto process,
//! started from both end points or from two random cells, followed by a
//! forward-backward pass.

use extremal_design::design::{forward_backward_refine, sequential_design, DesignProblem};
use extremal_design::domain::RiskFunctional;
use extremal_design::experiments::{
    default_line_grid, iterative_experiment, IterativeExperiment, ProcessConfig,
};
use extremal_design::simulate::Seed;

fn main() -> extremal_design::Result<()> {
    let grid = default_line_grid();
    let process = ProcessConfig::pareto_weak();
    let x = |cells: &[usize]| cells.iter().map(|&i| grid.coords(i)[0]).collect::<Vec<_>>();

    let boundary = IterativeExperiment::default().boundary_init(&grid);
    let r = iterative_experiment(&process, &grid, &boundary, Seed(1))?;
    println!(
        "boundary start {:?}: added {:?}",
        x(&r.initial),
        x(&r.state.chosen)
    );
    println!("  discrepancy trace {:?}", r.state.discrepancy_trace());

    for s in 0..3 {
        let random = IterativeExperiment::default().random_init(100 + s);
        let r = iterative_experiment(&process, &grid, &random, Seed(2 + s))?;
        println!(
            "random start {:?}: added {:?}",
            x(&r.initial),
            x(&r.state.chosen)
        );
    }

    let data = process.simulate_exceedances(&grid, 1.0, 10_000, Seed(9))?;
    let problem = DesignProblem::new(&data, &RiskFunctional::Supremum, 1.0)?;
    let greedy = sequential_design(&problem, &grid, 6, &[])?;
    let refined = forward_backward_refine(greedy.clone(), &problem, &grid, 5)?;
    println!("\nsix sites from scratch: {:?}", x(&greedy.chosen));
    println!(
        "  greedy discrepancy {:.4}, after refinement {:.4}, swaps {:?}",
        greedy.discrepancy, refined.discrepancy, refined.swaps
    );
    Ok(())
}
