//! Command line front end. Every command reads an optional JSON run config,
//! applies flag overrides, echoes the effective config to the output
//! directory and writes its results there.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use crate::design::Initialization;
use crate::domain::{RiskFunctional, SpatialGrid, StationSeries};
use crate::error::{Error, Result};
use crate::experiments::{
    boundary_effect_curves, default_line_grid, iterative_experiment, BoundaryCurves,
    BoundaryExperiment, CurvePoint, IterativeExperiment, ProcessConfig,
};
use crate::io::{
    read_grid_table, read_json, read_raster_stack, read_station, sha256_file, sha256_json,
    write_ensemble, write_grid_table, write_json, write_samples_csv,
};
use crate::pipeline::{
    design_domain, design_network, fit_network, DesignConfig, FitConfig, FittedModel,
};
use crate::plot::{write_svg, Heatmap, LineChart, Series};
use crate::simulate::{
    simulate_r_pareto, Anchor, MarginalModel, ParetoSpec, Seed, DEFAULT_MAX_ATTEMPTS,
};
use crate::variogram::VariogramModel;

#[derive(Debug, Parser)]
#[command(
    name = "extremal-design",
    version,
    about = "Sampling designs for monitoring spatial extremes"
)]
pub struct Cli {
    /// Master seed (overrides the config file).
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads; results do not depend on it.
    #[arg(long, global = true, env = "EXDESIGN_THREADS")]
    pub threads: Option<usize>,
    #[arg(long, global = true, default_value = "out")]
    pub out_dir: PathBuf,
    /// JSON run config; flags take precedence over it.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Skip SVG renderings.
    #[arg(long, global = true)]
    pub no_plots: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate an r-Pareto ensemble.
    Simulate(SimulateArgs),
    /// Fit marginal and dependence models from station series and a raster stack.
    Fit(FitArgs),
    /// Sequential station design on a fitted model.
    Design(DesignArgs),
    /// Concurrent and exclusive exceedance curves on [-6, 6].
    BoundaryExperiment(BoundaryArgs),
    /// Small sequential designs on [-6, 6] from boundary or random starts.
    IterativeExperiment(IterativeArgs),
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Reference process whose variogram is used (e.g. pareto-strong).
    #[arg(long)]
    pub process: Option<String>,
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long, allow_negative_numbers = true)]
    pub threshold: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub xi: Option<f64>,
    /// Also write the paths as CSV.
    #[arg(long)]
    pub csv: bool,
}

#[derive(Debug, Args)]
pub struct FitArgs {
    /// Directory of station CSVs (with JSON sidecars).
    #[arg(long)]
    pub stations: Option<PathBuf>,
    /// Raster stack (binary, with JSON sidecar).
    #[arg(long)]
    pub radar: Option<PathBuf>,
    #[arg(long)]
    pub q: Option<f64>,
}

#[derive(Debug, Args)]
pub struct DesignArgs {
    /// `fit.json` written by the fit command.
    #[arg(long)]
    pub fit: Option<PathBuf>,
    /// Grid table flagging the study region.
    #[arg(long)]
    pub region: Option<PathBuf>,
    #[arg(long)]
    pub region_column: Option<String>,
    #[arg(long)]
    pub l_samp: Option<usize>,
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub threshold: Option<f64>,
    /// Allow candidates up to this distance outside the region.
    #[arg(long)]
    pub extend_margin: Option<f64>,
    #[arg(long)]
    pub refine_sweeps: Option<usize>,
}

#[derive(Debug, Args)]
pub struct BoundaryArgs {
    /// Restrict to these reference processes (repeatable).
    #[arg(long = "process")]
    pub processes: Vec<String>,
    #[arg(long)]
    pub batches: Option<usize>,
    #[arg(long)]
    pub batch_size: Option<usize>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum InitChoice {
    Boundary,
    Random,
    None,
}

#[derive(Debug, Args)]
pub struct IterativeArgs {
    #[arg(long)]
    pub process: Option<String>,
    #[arg(long, value_enum)]
    pub init: Option<InitChoice>,
    #[arg(long)]
    pub additions: Option<usize>,
    #[arg(long)]
    pub n: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum GridSpec {
    Line {
        start: f64,
        end: f64,
        spacing: f64,
    },
    Rectangle {
        x0: f64,
        y0: f64,
        nx: usize,
        ny: usize,
        spacing: f64,
    },
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec::Line {
            start: -6.0,
            end: 6.0,
            spacing: 0.1,
        }
    }
}

impl GridSpec {
    pub fn build(&self) -> Result<SpatialGrid> {
        match *self {
            GridSpec::Line {
                start,
                end,
                spacing,
            } => SpatialGrid::regular_1d(start, end, spacing),
            GridSpec::Rectangle {
                x0,
                y0,
                nx,
                ny,
                spacing,
            } => SpatialGrid::regular_2d((x0, y0), nx, ny, spacing),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulateConfig {
    pub grid: GridSpec,
    pub model: VariogramModel,
    pub a: f64,
    pub b: f64,
    pub xi: f64,
    pub risk: RiskFunctional,
    pub threshold: f64,
    pub n: usize,
    pub max_attempts: u64,
    pub anchor: Anchor,
    pub write_csv: bool,
}

impl Default for SimulateConfig {
    fn default() -> Self {
        Self {
            grid: GridSpec::default(),
            model: ProcessConfig::pareto_strong().model,
            a: 1.0,
            b: 0.0,
            xi: 1.0,
            risk: RiskFunctional::Supremum,
            threshold: 1.0,
            n: 1000,
            max_attempts: DEFAULT_MAX_ATTEMPTS,
            anchor: Anchor::Uniform,
            write_csv: false,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FitCommandConfig {
    pub stations: Option<PathBuf>,
    pub radar: Option<PathBuf>,
    pub options: FitConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DesignCommandConfig {
    pub fit: Option<PathBuf>,
    pub region: Option<PathBuf>,
    pub region_column: String,
    pub options: DesignConfig,
}

impl Default for DesignCommandConfig {
    fn default() -> Self {
        Self {
            fit: None,
            region: None,
            region_column: "basin".into(),
            options: DesignConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BoundaryCommandConfig {
    pub processes: Vec<String>,
    pub grid: GridSpec,
    pub options: BoundaryExperiment,
}

impl Default for BoundaryCommandConfig {
    fn default() -> Self {
        Self {
            processes: ProcessConfig::reference_set()
                .into_iter()
                .map(|p| p.name)
                .collect(),
            grid: GridSpec::default(),
            options: BoundaryExperiment::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IterativeCommandConfig {
    pub process: String,
    pub grid: GridSpec,
    pub options: IterativeExperiment,
}

impl Default for IterativeCommandConfig {
    fn default() -> Self {
        let grid = default_line_grid();
        Self {
            process: "pareto-weak".into(),
            grid: GridSpec::default(),
            options: IterativeExperiment::default().boundary_init(&grid),
        }
    }
}

/// All parameters of a run; every field has an explicit default.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub simulate: SimulateConfig,
    pub fit: FitCommandConfig,
    pub design: DesignCommandConfig,
    pub boundary: BoundaryCommandConfig,
    pub iterative: IterativeCommandConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 1,
            simulate: SimulateConfig::default(),
            fit: FitCommandConfig::default(),
            design: DesignCommandConfig::default(),
            boundary: BoundaryCommandConfig::default(),
            iterative: IterativeCommandConfig::default(),
        }
    }
}

impl RunConfig {
    /// File config (or defaults) with the command-line overrides applied.
    pub fn resolve(cli: &Cli) -> Result<Self> {
        let mut cfg: RunConfig = match &cli.config {
            Some(path) => {
                if !path.exists() {
                    return Err(Error::Config(format!(
                        "config file {} not found",
                        path.display()
                    )));
                }
                read_json(path)?
            }
            None => RunConfig::default(),
        };
        if let Some(seed) = cli.seed {
            cfg.seed = seed;
        }
        match &cli.command {
            Command::Simulate(a) => {
                let s = &mut cfg.simulate;
                if let Some(p) = &a.process {
                    s.model = ProcessConfig::by_name(p)?.model;
                }
                set(&mut s.n, a.n);
                set(&mut s.threshold, a.threshold);
                set(&mut s.xi, a.xi);
                s.write_csv |= a.csv;
            }
            Command::Fit(a) => {
                let f = &mut cfg.fit;
                if a.stations.is_some() {
                    f.stations = a.stations.clone();
                }
                if a.radar.is_some() {
                    f.radar = a.radar.clone();
                }
                set(&mut f.options.q, a.q);
            }
            Command::Design(a) => {
                let d = &mut cfg.design;
                if a.fit.is_some() {
                    d.fit = a.fit.clone();
                }
                if a.region.is_some() {
                    d.region = a.region.clone();
                }
                if let Some(c) = &a.region_column {
                    d.region_column = c.clone();
                }
                set(&mut d.options.l_samp, a.l_samp);
                set(&mut d.options.n, a.n);
                set(&mut d.options.threshold, a.threshold);
                set(&mut d.options.extend_margin, a.extend_margin);
                set(&mut d.options.refine_sweeps, a.refine_sweeps);
            }
            Command::BoundaryExperiment(a) => {
                let b = &mut cfg.boundary;
                if !a.processes.is_empty() {
                    b.processes = a.processes.clone();
                }
                set(&mut b.options.batches, a.batches);
                set(&mut b.options.batch_size, a.batch_size);
            }
            Command::IterativeExperiment(a) => {
                let it = &mut cfg.iterative;
                if let Some(p) = &a.process {
                    it.process = p.clone();
                }
                set(&mut it.options.additions, a.additions);
                set(&mut it.options.n, a.n);
                if let Some(init) = a.init {
                    let len = it.grid.build()?.len();
                    it.options.init = match init {
                        InitChoice::Boundary => Initialization::Sites {
                            indices: vec![0, len - 1],
                        },
                        InitChoice::Random => Initialization::Random {
                            count: 2,
                            seed: Seed(cfg.seed).derive(0x1417).0,
                        },
                        InitChoice::None => Initialization::None,
                    };
                }
            }
        }
        Ok(cfg)
    }
}

fn set<T>(slot: &mut T, value: Option<T>) {
    if let Some(v) = value {
        *slot = v;
    }
}

/// Parses the process arguments and runs; errors are printed to stderr.
pub fn main_entry() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

pub fn run(cli: &Cli) -> Result<()> {
    let cfg = RunConfig::resolve(cli)?;
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(t) = cli.threads {
        if t == 0 {
            return Err(Error::Config("thread count must be positive".into()));
        }
        pool = pool.num_threads(t);
    }
    let pool = pool
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    let out = cli.out_dir.as_path();
    std::fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    write_json(&out.join("config.json"), &cfg)?;
    let plots = !cli.no_plots;
    pool.install(|| match &cli.command {
        Command::Simulate(_) => cmd_simulate(&cfg, out, plots),
        Command::Fit(_) => cmd_fit(&cfg, out, plots),
        Command::Design(_) => cmd_design(&cfg, out, plots),
        Command::BoundaryExperiment(_) => cmd_boundary_experiment(&cfg, out, plots),
        Command::IterativeExperiment(_) => cmd_iterative_experiment(&cfg, out, plots),
    })
}

pub fn cmd_simulate(cfg: &RunConfig, out: &Path, plots: bool) -> Result<()> {
    let s = &cfg.simulate;
    let grid = s.grid.build()?;
    let marginal = MarginalModel::constant(grid.len(), s.a, s.b, s.xi)?;
    let mut spec = ParetoSpec::new(s.model, marginal, s.risk.clone(), s.threshold);
    spec.max_attempts = s.max_attempts;
    spec.anchor = s.anchor;
    let ens = simulate_r_pareto(&spec, &grid, s.n, Seed(cfg.seed))?;
    write_ensemble(&out.join("ensemble.bin"), &ens)?;
    let data = ens.data_scale();
    if s.write_csv {
        write_samples_csv(&out.join("samples.csv"), &data)?;
    }
    if plots {
        if grid.dim() == 1 {
            let x: Vec<f64> = (0..grid.len()).map(|i| grid.coords(i)[0]).collect();
            let series = (0..data.rows().min(5))
                .map(|k| Series {
                    label: format!("path {}", k + 1),
                    x: x.clone(),
                    y: data.row(k).to_vec(),
                    band: None,
                })
                .collect();
            let chart = LineChart {
                title: "Simulated paths (data scale)".into(),
                x_label: "s".into(),
                y_label: "X(s)".into(),
                series,
                points: false,
            };
            write_svg(&out.join("paths.svg"), &chart.render())?;
        } else if data.rows() > 0 {
            let svg = Heatmap {
                title: "First simulated field (data scale)".into(),
                grid: &grid,
                values: data.row(0),
                markers: vec![],
            }
            .render()?;
            write_svg(&out.join("paths.svg"), &svg)?;
        }
    }
    Ok(())
}

fn required(path: &Option<PathBuf>, what: &str) -> Result<PathBuf> {
    let p = path
        .clone()
        .ok_or_else(|| Error::Config(format!("no {what} given")))?;
    if !p.exists() {
        return Err(Error::Config(format!("{what} {} not found", p.display())));
    }
    Ok(p)
}

fn read_station_dir(dir: &Path) -> Result<(Vec<StationSeries>, Vec<PathBuf>)> {
    let mut paths: Vec<PathBuf> = std::fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "csv"))
        .collect();
    paths.sort();
    if paths.is_empty() {
        return Err(Error::Config(format!(
            "no station CSVs in {}",
            dir.display()
        )));
    }
    let stations = paths
        .iter()
        .map(|p| read_station(p, true))
        .collect::<Result<Vec<_>>>()?;
    Ok((stations, paths))
}

#[derive(Debug, Serialize, Deserialize)]
struct InputDigest {
    path: String,
    sha256: String,
}

/// `fit.json`: the fitted model plus provenance.
#[derive(Debug, Serialize, Deserialize)]
pub struct FitRecord {
    pub model: FittedModel,
    pub q: f64,
    pub seed: u64,
    pub config_sha256: String,
    inputs: Vec<InputDigest>,
}

pub fn cmd_fit(cfg: &RunConfig, out: &Path, plots: bool) -> Result<()> {
    let f = &cfg.fit;
    let radar_path = required(&f.radar, "raster stack")?;
    let station_dir = required(&f.stations, "station directory")?;
    let radar = read_raster_stack(&radar_path)?;
    let (stations, station_paths) = read_station_dir(&station_dir)?;
    let fit = fit_network(&stations, &radar, &f.options, Seed(cfg.seed))?;

    let mut inputs = vec![InputDigest {
        path: radar_path.display().to_string(),
        sha256: sha256_file(&radar_path)?,
    }];
    for p in &station_paths {
        inputs.push(InputDigest {
            path: p.display().to_string(),
            sha256: sha256_file(p)?,
        });
    }
    let record = FitRecord {
        model: fit.model.clone(),
        q: f.options.q,
        seed: cfg.seed,
        config_sha256: sha256_json(cfg)?,
        inputs,
    };
    write_json(&out.join("fit.json"), &record)?;

    let m = &fit.model;
    let b_hat: Vec<f64> = m.covariate.iter().map(|y| m.location.predict(*y)).collect();
    write_grid_table(
        &out.join("location.csv"),
        &m.grid,
        &[("covariate", &m.covariate), ("location", &b_hat)],
    )?;

    let mut w = csv::Writer::from_path(out.join("extremogram.csv")).map_err(|e| csv_err(out, e))?;
    w.write_record([
        "lag", "sector", "angle", "rho", "model", "pairs", "reliable",
    ])?;
    for b in &fit.extremogram.bins {
        let model = m.model().extremogram(&b.lag_vector(fit.extremogram.dim));
        w.write_record([
            b.lag.to_string(),
            b.sector.to_string(),
            b.angle.to_string(),
            b.rho.to_string(),
            model.to_string(),
            b.pairs.to_string(),
            b.reliable.to_string(),
        ])?;
    }
    w.flush().map_err(|e| Error::io(out, e))?;

    let mut w = csv::Writer::from_path(out.join("qq.csv")).map_err(|e| csv_err(out, e))?;
    w.write_record(["prob", "empirical", "model", "lower", "upper"])?;
    for p in &fit.qq {
        w.write_record([p.prob, p.empirical, p.model, p.lower, p.upper].map(|v| v.to_string()))?;
    }
    w.flush().map_err(|e| Error::io(out, e))?;

    if plots {
        let rel: Vec<_> = fit.extremogram.reliable_bins().collect();
        let mut series = Vec::new();
        for sector in 0..fit.extremogram.n_sectors {
            let bins: Vec<_> = rel.iter().filter(|b| b.sector == sector).collect();
            series.push(Series {
                label: format!("sector {sector}"),
                x: bins.iter().map(|b| b.lag).collect(),
                y: bins.iter().map(|b| b.rho).collect(),
                band: None,
            });
        }
        let chart = LineChart {
            title: format!("Empirical extremogram, q = {}", f.options.q),
            x_label: "lag".into(),
            y_label: "rho".into(),
            series,
            points: true,
        };
        write_svg(&out.join("extremogram.svg"), &chart.render())?;
        let qq = LineChart {
            title: "Pooled excesses against the fitted GPD".into(),
            x_label: "model quantile".into(),
            y_label: "empirical quantile".into(),
            series: vec![
                Series {
                    label: "excesses".into(),
                    x: fit.qq.iter().map(|p| p.model).collect(),
                    y: fit.qq.iter().map(|p| p.empirical).collect(),
                    band: Some((
                        fit.qq.iter().map(|p| p.lower).collect(),
                        fit.qq.iter().map(|p| p.upper).collect(),
                    )),
                },
                Series {
                    label: "identity".into(),
                    x: fit.qq.iter().map(|p| p.model).collect(),
                    y: fit.qq.iter().map(|p| p.model).collect(),
                    band: None,
                },
            ],
            points: false,
        };
        write_svg(&out.join("qq.svg"), &qq.render())?;
        if m.grid.dim() == 2 {
            let stations: Vec<usize> = m
                .station_locations()
                .iter()
                .map(|l| m.grid.nearest(l.coords()))
                .collect();
            let svg = Heatmap {
                title: "Fitted location b(s)".into(),
                grid: &m.grid,
                values: &b_hat,
                markers: vec![("stations".into(), stations)],
            }
            .render()?;
            write_svg(&out.join("location.svg"), &svg)?;
        }
    }
    Ok(())
}

fn csv_err(path: &Path, e: csv::Error) -> Error {
    Error::format(path, e.to_string())
}

#[derive(Debug, Serialize, Deserialize)]
pub struct SiteRecord {
    pub order: usize,
    pub index: usize,
    pub coords: Vec<f64>,
    /// Discrepancy after adding this site.
    pub discrepancy: f64,
}

/// `design.json`.
#[derive(Debug, Serialize, Deserialize)]
pub struct DesignRecord {
    pub seed: u64,
    pub config_sha256: String,
    pub fit_sha256: String,
    pub threshold: f64,
    pub members: usize,
    pub reference_prob: f64,
    pub observed: Vec<Vec<f64>>,
    pub sites: Vec<SiteRecord>,
    pub discrepancy_trace: Vec<f64>,
    /// Final discrepancy (after any refinement).
    pub discrepancy: f64,
    pub swaps: Vec<(usize, usize)>,
}

pub fn cmd_design(cfg: &RunConfig, out: &Path, plots: bool) -> Result<()> {
    let d = &cfg.design;
    if d.options.l_samp == 0 {
        return Err(Error::InvalidParameter(
            "number of sites to add must be at least 1".into(),
        ));
    }
    let fit_path = required(&d.fit, "fit file")?;
    let record: FitRecord = read_json(&fit_path)?;
    let fitted = &record.model;
    let region = match &d.region {
        Some(_) => {
            let path = required(&d.region, "region table")?;
            let (grid, columns) = read_grid_table(&path)?;
            let col = columns
                .into_iter()
                .find(|(n, _)| *n == d.region_column)
                .ok_or_else(|| {
                    Error::Config(format!(
                        "column {} not in {}",
                        d.region_column,
                        path.display()
                    ))
                })?
                .1;
            // map onto the fitted grid by location
            let mut mask = vec![false; fitted.grid.len()];
            for (i, v) in col.iter().enumerate() {
                if *v != 0.0 {
                    let k = fitted.grid.index_of(grid.coords(i)).ok_or_else(|| {
                        Error::Config(format!(
                            "region cell {:?} is not on the fitted grid",
                            grid.coords(i)
                        ))
                    })?;
                    mask[k] = true;
                }
            }
            Some(mask)
        }
        None => None,
    };
    let domain = design_domain(
        &fitted.grid,
        region.as_deref(),
        &fitted.station_locations(),
        d.options.extend_margin,
    )?;
    let outcome = design_network(fitted, domain, &d.options, Seed(cfg.seed))?;
    let (dom, st) = (&outcome.domain, &outcome.state);
    let grid = &dom.grid;

    let design = DesignRecord {
        seed: cfg.seed,
        config_sha256: sha256_json(cfg)?,
        fit_sha256: sha256_file(&fit_path)?,
        threshold: d.options.threshold,
        members: st.members,
        reference_prob: st.reference_prob,
        observed: st
            .observed
            .iter()
            .map(|&i| grid.coords(i).to_vec())
            .collect(),
        sites: st
            .history
            .iter()
            .enumerate()
            .map(|(k, h)| SiteRecord {
                order: k + 1,
                index: h.index,
                coords: grid.coords(h.index).to_vec(),
                discrepancy: h.discrepancy,
            })
            .collect(),
        discrepancy_trace: st.discrepancy_trace(),
        discrepancy: st.discrepancy,
        swaps: st.swaps.clone(),
    };
    write_json(&out.join("design.json"), &design)?;

    let flag = |v: &[bool]| v.iter().map(|b| *b as u8 as f64).collect::<Vec<f64>>();
    let mut observed = vec![0.0; grid.len()];
    dom.observed.iter().for_each(|&o| observed[o] = 1.0);
    let mut order = vec![0.0; grid.len()];
    st.chosen
        .iter()
        .enumerate()
        .for_each(|(k, &c)| order[c] = (k + 1) as f64);
    write_grid_table(
        &out.join("design_domain.csv"),
        grid,
        &[
            ("region", &flag(&dom.region)),
            ("eligible", &flag(&dom.eligible)),
            ("observed", &observed),
            ("order", &order),
        ],
    )?;

    let mut w =
        csv::Writer::from_path(out.join("design_surface.csv")).map_err(|e| csv_err(out, e))?;
    let mut head = vec!["step".to_string(), "cell".into()];
    head.extend(["x", "y"].iter().take(grid.dim()).map(|s| s.to_string()));
    head.push("discrepancy".into());
    w.write_record(&head)?;
    for (k, step) in st.history.iter().enumerate() {
        for (i, v) in step.surface.iter().enumerate() {
            if let Some(v) = v {
                let mut rec = vec![(k + 1).to_string(), i.to_string()];
                rec.extend(grid.coords(i).iter().map(|c| c.to_string()));
                rec.push(v.to_string());
                w.write_record(&rec)?;
            }
        }
    }
    w.flush().map_err(|e| Error::io(out, e))?;

    if plots {
        let first: Vec<f64> = st.history[0]
            .surface
            .iter()
            .map(|v| v.unwrap_or(f64::NAN))
            .collect();
        if grid.dim() == 2 {
            let svg = Heatmap {
                title: "Discrepancy of a single added site".into(),
                grid,
                values: &first,
                markers: vec![
                    ("existing".into(), dom.observed.clone()),
                    ("new".into(), st.chosen.clone()),
                ],
            }
            .render()?;
            write_svg(&out.join("design.svg"), &svg)?;
        }
        let trace = LineChart {
            title: "Discrepancy trace".into(),
            x_label: "sites added".into(),
            y_label: "discrepancy".into(),
            series: vec![Series {
                label: "greedy".into(),
                x: (1..=st.history.len()).map(|k| k as f64).collect(),
                y: st.discrepancy_trace(),
                band: None,
            }],
            points: false,
        };
        write_svg(&out.join("trace.svg"), &trace.render())?;
    }
    Ok(())
}

fn write_curves(
    path: &Path,
    curves: &[BoundaryCurves],
    pick: fn(&BoundaryCurves) -> &[CurvePoint],
) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_err(path, e))?;
    w.write_record(["process", "h", "estimate", "lower", "upper"])?;
    for c in curves {
        for p in pick(c) {
            w.write_record([
                c.process.clone(),
                p.h.to_string(),
                p.estimate.to_string(),
                p.lower.to_string(),
                p.upper.to_string(),
            ])?;
        }
    }
    w.flush().map_err(|e| Error::io(path, e))
}

fn curve_chart(
    title: &str,
    curves: &[BoundaryCurves],
    pick: fn(&BoundaryCurves) -> &[CurvePoint],
) -> LineChart {
    LineChart {
        title: title.into(),
        x_label: "h".into(),
        y_label: "probability".into(),
        series: curves
            .iter()
            .map(|c| {
                let pts = pick(c);
                Series {
                    label: c.process.clone(),
                    x: pts.iter().map(|p| p.h).collect(),
                    y: pts.iter().map(|p| p.estimate).collect(),
                    band: Some((
                        pts.iter().map(|p| p.lower).collect(),
                        pts.iter().map(|p| p.upper).collect(),
                    )),
                }
            })
            .collect(),
        points: false,
    }
}

pub fn cmd_boundary_experiment(cfg: &RunConfig, out: &Path, plots: bool) -> Result<()> {
    let b = &cfg.boundary;
    let grid = b.grid.build()?;
    let curves = b
        .processes
        .iter()
        .map(|name| {
            boundary_effect_curves(
                &ProcessConfig::by_name(name)?,
                &grid,
                &b.options,
                Seed(cfg.seed),
            )
        })
        .collect::<Result<Vec<_>>>()?;
    write_curves(&out.join("concurrent.csv"), &curves, |c| &c.concurrent)?;
    write_curves(&out.join("exclusive.csv"), &curves, |c| &c.exclusive)?;
    if plots {
        let conc = curve_chart("Concurrent exceedance given sup on [0, 1]", &curves, |c| {
            &c.concurrent
        });
        write_svg(&out.join("concurrent.svg"), &conc.render())?;
        let excl = curve_chart("Exceedance only on [h - 0.5, h + 0.5]", &curves, |c| {
            &c.exclusive
        });
        write_svg(&out.join("exclusive.svg"), &excl.render())?;
    }
    Ok(())
}

pub fn cmd_iterative_experiment(cfg: &RunConfig, out: &Path, plots: bool) -> Result<()> {
    let it = &cfg.iterative;
    let grid = it.grid.build()?;
    let process = ProcessConfig::by_name(&it.process)?;
    let res = iterative_experiment(&process, &grid, &it.options, Seed(cfg.seed))?;
    write_json(&out.join("iterative.json"), &res)?;

    let mut w =
        csv::Writer::from_path(out.join("iterative_steps.csv")).map_err(|e| csv_err(out, e))?;
    w.write_record(["step", "cell", "x", "coverage", "scaled"])?;
    for st in &res.steps {
        for (i, (c, s)) in st.coverage.iter().zip(&st.scaled).enumerate() {
            if let (Some(c), Some(s)) = (c, s) {
                w.write_record([
                    st.step.to_string(),
                    i.to_string(),
                    grid.coords(i)[0].to_string(),
                    c.to_string(),
                    s.to_string(),
                ])?;
            }
        }
    }
    w.flush().map_err(|e| Error::io(out, e))?;

    if plots && grid.dim() == 1 {
        let x: Vec<f64> = (0..grid.len()).map(|i| grid.coords(i)[0]).collect();
        let chart = LineChart {
            title: format!("Scaled coverage per step ({})", res.process),
            x_label: "s".into(),
            y_label: "scaled coverage".into(),
            series: res
                .steps
                .iter()
                .map(|st| Series {
                    label: format!("step {}: x = {:.1}", st.step, st.x),
                    x: x.clone(),
                    y: st.scaled.iter().map(|v| v.unwrap_or(f64::NAN)).collect(),
                    band: None,
                })
                .collect(),
            points: false,
        };
        write_svg(&out.join("iterative.svg"), &chart.render())?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn run_config_round_trip_with_explicit_defaults() {
        let cfg = RunConfig::default();
        let json = serde_json::to_string_pretty(&cfg).unwrap();
        assert!(json.contains("\"q\": 0.995"));
        assert!(json.contains("\"batches\": 100"));
        assert!(json.contains("\"n\": 10000"));
        let back: RunConfig = serde_json::from_str(&json).unwrap();
        assert_eq!(back, cfg);
        let partial: RunConfig =
            serde_json::from_str(r#"{"seed": 7, "design": {"options": {"l_samp": 3}}}"#).unwrap();
        assert_eq!(partial.seed, 7);
        assert_eq!(partial.design.options.l_samp, 3);
        assert_eq!(partial.design.options.threshold, 20.0);
        assert!(serde_json::from_str::<RunConfig>(r#"{"sede": 7}"#).is_err());
    }

    #[test]
    fn flags_override_config() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cfg.json");
        std::fs::write(
            &path,
            r#"{"seed": 5, "simulate": {"n": 50, "threshold": 2.0}}"#,
        )
        .unwrap();
        let cli = Cli::try_parse_from([
            "extremal-design",
            "--config",
            path.to_str().unwrap(),
            "simulate",
            "--n",
            "20",
        ])
        .unwrap();
        let cfg = RunConfig::resolve(&cli).unwrap();
        assert_eq!(
            (cfg.seed, cfg.simulate.n, cfg.simulate.threshold),
            (5, 20, 2.0)
        );
        let cli = Cli::try_parse_from([
            "extremal-design",
            "--seed",
            "9",
            "iterative-experiment",
            "--init",
            "random",
        ])
        .unwrap();
        let cfg = RunConfig::resolve(&cli).unwrap();
        assert_eq!(cfg.seed, 9);
        assert!(matches!(
            cfg.iterative.options.init,
            Initialization::Random { count: 2, .. }
        ));
    }
}
