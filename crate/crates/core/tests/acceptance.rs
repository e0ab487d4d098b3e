//! Acceptance run: one PASS/FAIL line per criterion, nonzero exit if any
//! criterion fails. Built with `harness = false` so the lines always show.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use clap::Parser;
use rand::Rng;

use extremal_design::cli::{run, Cli};
use extremal_design::design::{
    exhaustive_optimum, forward_backward_refine, sequential_design, DesignProblem,
};
use extremal_design::domain::{RiskFunctional, SpatialGrid};
use extremal_design::experiments::{
    boundary_effect_curves, default_line_grid, iterative_experiment, BoundaryExperiment,
    IterativeExperiment, ProcessConfig,
};
use extremal_design::fit::{
    empirical_extremogram, fit_location_covariate, fit_variogram_to_extremogram, gpd_fit_mle,
    gpd_quantile, gpd_survival, ExtremogramConfig, VariogramFitOptions,
};
use extremal_design::pipeline::{
    design_domain, design_network, fit_network, DesignConfig, FitConfig,
};
use extremal_design::samples::SampleMatrix;
use extremal_design::simulate::{
    simulate_angular, simulate_r_pareto, MarginalModel, ParetoSpec, Seed,
};
use extremal_design::synthetic::{generate_basin, SyntheticBasinConfig};
use extremal_design::variogram::VariogramModel;

type Check = Result<(bool, String), Box<dyn std::error::Error>>;

fn secs(d: Duration) -> f64 {
    d.as_secs_f64()
}

fn pareto_spec(model: VariogramModel, len: usize, xi: f64, threshold: f64) -> ParetoSpec {
    let marginal = MarginalModel::constant(len, 1.0, 0.0, xi).expect("valid margins");
    ParetoSpec::new(model, marginal, RiskFunctional::Supremum, threshold)
}

fn angular_normalization() -> Check {
    let grid = default_line_grid();
    let mut worst: f64 = 0.0;
    let mut negative = false;
    let start = Instant::now();
    for process in [ProcessConfig::pareto_strong(), ProcessConfig::pareto_weak()] {
        let w = simulate_angular(&process.model, &grid, 10_000, Seed(101))?;
        for row in w.iter_rows() {
            negative |= row.iter().any(|v| *v < 0.0);
            worst = worst.max((row.iter().sum::<f64>() - 1.0).abs());
        }
    }
    let t = secs(start.elapsed()) / 2.0;
    Ok((
        worst <= 1e-12 && !negative && t < 10.0,
        format!(
            "max |L1 norm - 1| = {worst:.1e} over 2 x 10^4 samples on 121 cells, {t:.2} s per 10^4"
        ),
    ))
}

fn extremogram_consistency() -> Check {
    let grid = default_line_grid();
    let model = ProcessConfig::pareto_strong().model;
    let start = Instant::now();
    let ens = simulate_r_pareto(
        &pareto_spec(model, grid.len(), 1.0, 1.0),
        &grid,
        100_000,
        Seed(202),
    )?;
    let cfg = ExtremogramConfig {
        q: 0.95,
        bin_width: Some(0.5),
        max_lag: Some(6.0),
        ..Default::default()
    };
    let emp = empirical_extremogram(&ens.data_scale(), &grid, &cfg)?;
    let t = secs(start.elapsed());
    let mut worst: f64 = 0.0;
    let mut checked = 0;
    for b in emp.reliable_bins() {
        let rho = model.extremogram(&[b.lag]);
        if rho >= 0.1 {
            worst = worst.max((b.rho - rho).abs());
            checked += 1;
        }
    }
    Ok((
        checked >= 5 && worst <= 0.03 && t < 300.0,
        format!("max |empirical - closed form| = {worst:.4} over {checked} lag bins, N = 10^5, {t:.1} s"),
    ))
}

/// Kolmogorov-Smirnov distance of `x` against a continuous distribution function.
fn ks_distance(mut x: Vec<f64>, cdf: impl Fn(f64) -> f64) -> f64 {
    x.sort_unstable_by(f64::total_cmp);
    let n = x.len() as f64;
    x.iter()
        .enumerate()
        .map(|(i, v)| {
            let f = cdf(*v);
            (f - i as f64 / n).max((i + 1) as f64 / n - f)
        })
        .fold(0.0, f64::max)
}

fn marginal_gpd_law() -> Check {
    let grid = default_line_grid();
    let u0 = 2.0;
    // standardized threshold 0 is the pole level 1 for every ξ
    let ens = simulate_r_pareto(
        &pareto_spec(ProcessConfig::pareto_strong().model, grid.len(), 0.33, 0.0),
        &grid,
        100_000,
        Seed(303),
    )?;
    let pole = ens.pole_scale();
    let mut pass = true;
    let mut parts = Vec::new();
    for xi in [0.33, 1.0] {
        let excesses: Vec<f64> = pole
            .data()
            .iter()
            .map(|y| (y.powf(xi) - 1.0) / xi)
            .filter(|p| *p > u0)
            .map(|p| p - u0)
            .collect();
        let sigma = 1.0 + xi * u0;
        let n = excesses.len();
        let d = ks_distance(excesses, |x| {
            1.0 - gpd_survival(x, sigma, xi).expect("valid GPD")
        });
        pass &= d < 0.02;
        parts.push(format!("xi = {xi}: KS {d:.4} on {n} pooled excesses"));
    }
    Ok((
        pass,
        format!("{} (sigma = 1 + xi u0, u0 = 2, N = 10^5)", parts.join("; ")),
    ))
}

fn boundary_effect() -> Check {
    let grid = default_line_grid();
    let exp = BoundaryExperiment::default();
    let mut pass = true;
    let mut parts = Vec::new();
    let start = Instant::now();
    for process in ProcessConfig::reference_set() {
        let curves = boundary_effect_curves(&process, &grid, &exp, Seed(404))?;
        let at = |h: f64| *curves.exclusive_at(h).expect("h inside the sweep");
        let centre = at(0.0);
        if process.name.ends_with("strong") {
            let (left, right) = (at(-5.5), at(5.5));
            let ok = left.lower > centre.upper && right.lower > centre.upper;
            pass &= ok;
            parts.push(format!(
                "{}: h=-5.5 {:.4} [{:.4}, {:.4}], h=0 {:.4} [{:.4}, {:.4}], h=5.5 {:.4} [{:.4}, {:.4}]",
                process.name,
                left.estimate,
                left.lower,
                left.upper,
                centre.estimate,
                centre.lower,
                centre.upper,
                right.estimate,
                right.lower,
                right.upper
            ));
        } else {
            let interior: Vec<_> = curves
                .exclusive
                .iter()
                .filter(|p| p.h.abs() <= 3.0 + 1e-9)
                .collect();
            let apart = interior.iter().filter(|p| !p.overlaps(&centre)).count();
            pass &= apart == 0;
            parts.push(format!(
                "{}: {}/{} interior points (|h| <= 3) overlap h=0 {:.4} [{:.4}, {:.4}]",
                process.name,
                interior.len() - apart,
                interior.len(),
                centre.estimate,
                centre.lower,
                centre.upper
            ));
        }
    }
    parts.push(format!(
        "100 x 1000 per process, {:.1} s",
        secs(start.elapsed())
    ));
    Ok((pass, parts.join("; ")))
}

fn near_boundary(x: f64) -> bool {
    6.0 - x.abs() <= 0.5 + 1e-9
}

fn iterative_designs() -> Check {
    let grid = default_line_grid();
    let process = ProcessConfig::pareto_weak();
    let exp = IterativeExperiment::default().boundary_init(&grid);
    let added = iterative_experiment(&process, &grid, &exp, Seed(505))?.added_coords(&grid);
    let mut min_gap = f64::INFINITY;
    for (i, a) in added.iter().enumerate() {
        for b in &added[i + 1..] {
            min_gap = min_gap.min((a - b).abs());
        }
    }
    let boundary_ok =
        added.len() == 4 && min_gap >= 1.5 - 1e-9 && !added.iter().any(|x| near_boundary(*x));

    let runs = 20;
    let mut hits = 0;
    for k in 0..runs {
        let exp = IterativeExperiment::default().random_init(5000 + k);
        let r = iterative_experiment(&process, &grid, &exp, Seed(5100 + k))?;
        hits += r
            .added_coords(&grid)
            .iter()
            .take(4)
            .any(|x| near_boundary(*x)) as usize;
    }
    Ok((
        boundary_ok && hits * 10 >= runs as usize * 9,
        format!(
            "boundary start adds {added:?} (min gap {min_gap:.1}); random start reaches the boundary in {hits}/{runs} runs"
        ),
    ))
}

fn parameter_recovery() -> Check {
    let (sigma, xi) = (1.87, 0.33);
    let mut inside = 0;
    for rep in 0..100 {
        let mut rng = Seed(606).stream(rep);
        let x: Vec<f64> = (0..5000)
            .map(|_| gpd_quantile(rng.random(), sigma, xi))
            .collect::<Result<_, _>>()?;
        let fit = gpd_fit_mle(&x)?;
        let [se_s, se_x] = fit.standard_errors;
        inside +=
            ((fit.sigma - sigma).abs() <= 3.0 * se_s && (fit.xi - xi).abs() <= 3.0 * se_x) as usize;
    }

    // bin layout of a real estimate, values replaced by the model extremogram
    let grid = SpatialGrid::regular_1d(0.0, 30.0, 0.5)?;
    let mut rng = Seed(607).stream(0);
    let noise = SampleMatrix::new(
        400,
        grid.len(),
        (0..400 * grid.len()).map(|_| rng.random()).collect(),
    )?;
    let layout = empirical_extremogram(
        &noise,
        &grid,
        &ExtremogramConfig {
            q: 0.9,
            ..Default::default()
        },
    )?;
    let truths = [
        VariogramModel::power_law(1.5, 2.5)?,
        VariogramModel::bounded_exponential(2.0, 1.5, 10.0)?,
        VariogramModel::stable_fractal(1.2, 0.5, 6.0)?,
    ];
    let mut worst_rel: f64 = 0.0;
    for truth in truths {
        let fit = fit_variogram_to_extremogram(
            &layout.with_model_values(&truth),
            &VariogramFitOptions::new(truth.family),
        )?;
        worst_rel = worst_rel
            .max((fit.model.alpha / truth.alpha - 1.0).abs())
            .max((fit.model.lambda / truth.lambda - 1.0).abs());
    }

    let covariate: Vec<f64> = (0..14).map(|i| 0.08 + 0.0043 * i as f64).collect();
    let quantiles: Vec<f64> = covariate.iter().map(|y| 1.14 + 20.8 * y).collect();
    let loc = fit_location_covariate(&quantiles, &covariate, "mean")?;
    let reg_err = (loc.b1 - 1.14).abs().max((loc.b2 - 20.8).abs());

    Ok((
        inside >= 95 && worst_rel <= 1e-3 && reg_err <= 1e-10,
        format!(
            "GPD within 3 SE in {inside}/100; variogram worst relative error {worst_rel:.1e} (3 families); regression error {reg_err:.1e}"
        ),
    ))
}

/// Independent counts straight from the data matrix.
struct BruteCounts {
    direct: u64,
    first: Vec<u64>,
    steps: Vec<[u64; 4]>,
}

fn brute_counts(data: &SampleMatrix, u: f64, sites: &[usize]) -> BruteCounts {
    let mut first = vec![0u64; sites.len()];
    let mut direct = 0;
    let mut steps = vec![[0u64; 4]; sites.len()];
    for row in data.iter_rows() {
        let full = row.iter().any(|v| *v >= u);
        if full {
            if let Some(k) = sites.iter().position(|&s| row[s] >= u) {
                first[k] += 1;
                direct += 1;
            }
        }
        for (l, &s) in sites.iter().enumerate() {
            let before = sites[..l].iter().any(|&p| row[p] >= u);
            let here = row[s] >= u;
            steps[l][0] += (before || here) as u64;
            steps[l][1] += before as u64;
            steps[l][2] += here as u64;
            steps[l][3] += (before && here) as u64;
        }
    }
    BruteCounts {
        direct,
        first,
        steps,
    }
}

fn greedy_vs_exhaustive() -> Check {
    let instances = 50;
    let mut optimal = 0;
    let mut identities = true;
    let mut misses = Vec::new();
    for inst in 0..instances {
        let mut rng = Seed(707).stream(inst);
        let len = rng.random_range(4..=12usize);
        let l_samp = rng.random_range(1..=3usize);
        let grid = SpatialGrid::regular_1d(0.0, (len - 1) as f64, 1.0)?;
        let data = if inst % 2 == 0 {
            let model =
                VariogramModel::power_law(rng.random_range(0.5..1.9), rng.random_range(0.5..5.0))?;
            simulate_r_pareto(
                &pareto_spec(model, len, 1.0, 1.0),
                &grid,
                300,
                Seed(708).derive(inst),
            )?
            .data_scale()
        } else {
            SampleMatrix::new(
                300,
                len,
                (0..300 * len).map(|_| rng.random::<f64>() * 4.0).collect(),
            )?
        };
        let u = 3.0;
        let problem = DesignProblem::new(&data, &RiskFunctional::Supremum, u)?;
        let mut state = sequential_design(&problem, &grid, l_samp, &[])?;
        if l_samp >= 2 {
            state = forward_backward_refine(state, &problem, &grid, 10)?;
        }
        let (best, best_d) = exhaustive_optimum(&problem, l_samp, &[])?;
        if problem.subset_discrepancy(&state.chosen)? == best_d {
            optimal += 1;
        } else {
            misses.push(format!(
                "#{inst} ({len} cells, L={l_samp}): {:?} vs {best:?}",
                state.chosen
            ));
        }

        let mut order = state.chosen.clone();
        order.extend((0..len).rev().filter(|k| !state.chosen.contains(k)).take(2));
        let brute = brute_counts(&data, u, &order);
        let (direct, terms) = problem.first_exceedance_decomposition(&order)?;
        identities &=
            direct == brute.direct && terms == brute.first && terms.iter().sum::<u64>() == direct;
        let steps = problem.sequential_increments(&order)?;
        identities &= steps == brute.steps;
        identities &= steps
            .iter()
            .all(|[now, before, marg, joint]| now + joint == before + marg);
    }
    let mut detail = format!(
        "greedy + forward-backward optimal in {optimal}/{instances}; counting identities {}",
        if identities {
            "exact on all"
        } else {
            "VIOLATED"
        }
    );
    if !misses.is_empty() {
        detail.push_str(&format!("; misses: {}", misses.join(", ")));
    }
    Ok((optimal * 10 >= instances as usize * 9 && identities, detail))
}

fn snapshot(dir: &Path) -> std::io::Result<BTreeMap<String, Vec<u8>>> {
    let mut files = BTreeMap::new();
    for entry in std::fs::read_dir(dir)? {
        let path = entry?.path();
        if path.is_file() {
            files.insert(
                path.file_name().unwrap().to_string_lossy().into_owned(),
                std::fs::read(&path)?,
            );
        }
    }
    Ok(files)
}

fn run_cli(args: &[&str]) -> extremal_design::Result<()> {
    let cli = Cli::try_parse_from(std::iter::once("extremal-design").chain(args.iter().copied()))
        .map_err(|e| extremal_design::Error::Config(e.to_string()))?;
    run(&cli)
}

fn cli_determinism() -> Check {
    let root = tempfile::tempdir()?;
    let basin_dir = root.path().join("basin");
    let basin = generate_basin(&SyntheticBasinConfig {
        nx: 16,
        ny: 16,
        n_stations: 6,
        stations_inside: 2,
        min_hours: 20_000,
        max_hours: 25_000,
        radar_frames: 1500,
        ..Default::default()
    })?;
    basin.write(&basin_dir)?;
    let p = |path: PathBuf| path.to_string_lossy().into_owned();
    let stations = p(basin_dir.join("stations"));
    let radar = p(basin_dir.join("radar.bin"));
    let region = p(basin_dir.join("basin.csv"));
    let fit_json = p(root.path().join("run0").join("fit").join("fit.json"));

    let commands: Vec<(&str, Vec<&str>)> = vec![
        (
            "simulate",
            vec![
                "simulate",
                "--process",
                "pareto-weak",
                "--n",
                "300",
                "--csv",
            ],
        ),
        (
            "fit",
            vec!["fit", "--stations", &stations, "--radar", &radar],
        ),
        (
            "design",
            vec![
                "design",
                "--fit",
                &fit_json,
                "--region",
                &region,
                "--l-samp",
                "4",
                "--n",
                "1000",
                "--refine-sweeps",
                "2",
            ],
        ),
        (
            "boundary-experiment",
            vec![
                "boundary-experiment",
                "--batches",
                "5",
                "--batch-size",
                "200",
            ],
        ),
        (
            "iterative-experiment",
            vec!["iterative-experiment", "--init", "random", "--n", "1000"],
        ),
    ];
    let mut pass = true;
    let mut parts = Vec::new();
    for (name, args) in &commands {
        let mut outputs = Vec::new();
        for (run_id, threads) in [(0, "4"), (1, "4"), (2, "1")] {
            let out = root
                .path()
                .join(format!("run{run_id}"))
                .join(name.split('-').next().unwrap());
            let out_s = p(out.clone());
            let mut full = vec!["--seed", "17", "--threads", threads, "--out-dir", &out_s];
            full.extend(args.iter().copied());
            run_cli(&full)?;
            outputs.push(snapshot(&out)?);
        }
        let same = outputs[0] == outputs[1] && outputs[0] == outputs[2];
        pass &= same && !outputs[0].is_empty();
        parts.push(format!(
            "{name} {} ({} files)",
            if same { "identical" } else { "DIFFERS" },
            outputs[0].len()
        ));
    }
    Ok((
        pass,
        format!("{} across 3 runs (4, 4 and 1 threads)", parts.join(", ")),
    ))
}

fn end_to_end() -> Check {
    let start = Instant::now();
    let basin = generate_basin(&SyntheticBasinConfig::default())?;
    let fit = fit_network(
        &basin.stations,
        &basin.radar,
        &FitConfig::default(),
        Seed(909),
    )?;
    let m = &fit.model;
    let domain = design_domain(&m.grid, Some(&basin.basin), &m.station_locations(), 0.0)?;
    let cfg = DesignConfig {
        l_samp: 10,
        n: 10_000,
        ..Default::default()
    };
    let out = design_network(m, domain, &cfg, Seed(910))?;
    let t = secs(start.elapsed());
    let trace = out.state.discrepancy_trace();
    let monotone = trace.windows(2).all(|w| w[1] <= w[0]);
    Ok((
        trace.len() == 10 && monotone && t < 900.0,
        format!(
            "30x30 basin, {} stations, fit b1 {:.2} b2 {:.1} a {:.2} xi {:.2}; 10 sites, discrepancy {:.4} -> {:.4} ({}), {t:.1} s",
            basin.stations.len(),
            m.location.b1,
            m.location.b2,
            m.marginal.a,
            m.marginal.xi,
            trace.first().copied().unwrap_or(f64::NAN),
            trace.last().copied().unwrap_or(f64::NAN),
            if monotone { "nonincreasing" } else { "NOT monotone" }
        ),
    ))
}

type Criterion = (&'static str, fn() -> Check);

fn main() -> ExitCode {
    let criteria: [Criterion; 9] = [
        ("angular normalization", angular_normalization),
        ("extremogram consistency", extremogram_consistency),
        ("marginal GPD law", marginal_gpd_law),
        ("boundary effect", boundary_effect),
        ("iterative designs", iterative_designs),
        ("parameter recovery", parameter_recovery),
        ("greedy vs exhaustive", greedy_vs_exhaustive),
        ("CLI determinism", cli_determinism),
        ("end-to-end pipeline", end_to_end),
    ];
    let mut failures = 0;
    for (k, (name, check)) in criteria.iter().enumerate() {
        let (ok, detail) = match check() {
            Ok(r) => r,
            Err(e) => (false, format!("error: {e}")),
        };
        failures += !ok as usize;
        println!(
            "{} {}. {name}: {detail}",
            if ok { "PASS" } else { "FAIL" },
            k + 1
        );
    }
    println!(
        "{}/{} criteria passed",
        criteria.len() - failures,
        criteria.len()
    );
    if failures == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
