use argmin::core::{CostFunction, Executor, State};
use argmin::solver::neldermead::NelderMead;

use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct NelderMeadResult {
    pub x: Vec<f64>,
    pub value: f64,
    pub iterations: u64,
}

struct Objective<'a, F: Fn(&[f64]) -> f64> {
    f: &'a F,
}

impl<F: Fn(&[f64]) -> f64> CostFunction for Objective<'_, F> {
    type Param = Vec<f64>;
    type Output = f64;

    fn cost(&self, p: &Vec<f64>) -> std::result::Result<f64, argmin::core::Error> {
        let v = (self.f)(p);
        Ok(if v.is_nan() { f64::INFINITY } else { v })
    }
}

/// Minimizes `f` with the Nelder–Mead simplex method, starting from an
/// axis-aligned simplex of edge `step` around `x0`.
pub fn nelder_mead<F: Fn(&[f64]) -> f64>(
    f: &F,
    x0: &[f64],
    step: f64,
    max_iters: u64,
    sd_tolerance: f64,
) -> Result<NelderMeadResult> {
    let mut simplex = vec![x0.to_vec()];
    for i in 0..x0.len() {
        let mut p = x0.to_vec();
        p[i] += step;
        simplex.push(p);
    }
    let solver = NelderMead::new(simplex)
        .with_sd_tolerance(sd_tolerance)
        .map_err(|e| Error::NonConvergence(e.to_string()))?;
    let res = Executor::new(Objective { f }, solver)
        .configure(|state| state.max_iters(max_iters))
        .run()
        .map_err(|e| Error::NonConvergence(e.to_string()))?;
    let state = res.state();
    let x = state
        .get_best_param()
        .cloned()
        .ok_or_else(|| Error::NonConvergence("no iterate".into()))?;
    Ok(NelderMeadResult {
        value: state.get_best_cost(),
        x,
        iterations: state.get_iter(),
    })
}
