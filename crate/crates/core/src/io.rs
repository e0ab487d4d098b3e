//! File formats.
//!
//! * grids and fields: CSV `x[,y],value` with one header row;
//! * station series: CSV `timestamp,value` (empty value = missing) plus a
//!   sidecar `<name>.json` holding `{"name", "coords"}`;
//! * ensembles and raster stacks: little-endian binary (magic, version, rows,
//!   columns, tail index, seed, row-major `f64` body) plus a JSON sidecar.

use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::domain::{GriddedField, Location, RiskFunctional, SpatialGrid, StationSeries};
use crate::error::{Error, Result};
use crate::samples::SampleMatrix;
use crate::simulate::{MarginalModel, ParetoEnsemble, RejectionStats, Seed};
use crate::variogram::VariogramModel;

pub const ENSEMBLE_MAGIC: [u8; 8] = *b"RPARETO\0";
pub const STACK_MAGIC: [u8; 8] = *b"RSTACK\0\0";
pub const FORMAT_VERSION: u32 = 1;
const HEADER_LEN: usize = 8 + 4 + 8 + 8 + 8 + 8;

pub fn sidecar_path(path: &Path) -> PathBuf {
    path.with_extension("json")
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::format(path, e.to_string()))
}

/// Hex SHA-256 digest of a file's bytes.
pub fn sha256_file(path: &Path) -> Result<String> {
    let mut file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut hasher = Sha256::new();
    let mut buf = vec![0u8; 1 << 16];
    loop {
        let n = file.read(&mut buf).map_err(|e| Error::io(path, e))?;
        if n == 0 {
            break;
        }
        hasher.update(&buf[..n]);
    }
    Ok(hex::encode(hasher.finalize()))
}

/// Hex SHA-256 digest of a serializable value's compact JSON form.
pub fn sha256_json<T: Serialize>(value: &T) -> Result<String> {
    let bytes = serde_json::to_vec(value)?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

fn csv_writer(path: &Path) -> Result<csv::Writer<BufWriter<File>>> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    Ok(csv::Writer::from_writer(BufWriter::new(file)))
}

fn csv_reader(path: &Path) -> Result<csv::Reader<BufReader<File>>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    Ok(csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(BufReader::new(file)))
}

fn axis_names(dim: usize) -> &'static [&'static str] {
    if dim == 1 {
        &["x"]
    } else {
        &["x", "y"]
    }
}

/// Writes one row per grid cell: coordinates then each named value column.
pub fn write_grid_table(path: &Path, grid: &SpatialGrid, columns: &[(&str, &[f64])]) -> Result<()> {
    for (name, col) in columns {
        if col.len() != grid.len() {
            return Err(Error::InvalidParameter(format!(
                "column {name} has {} values for {} cells",
                col.len(),
                grid.len()
            )));
        }
    }
    let mut w = csv_writer(path)?;
    let mut header: Vec<&str> = axis_names(grid.dim()).to_vec();
    header.extend(columns.iter().map(|(n, _)| *n));
    w.write_record(&header)?;
    for i in 0..grid.len() {
        let mut rec: Vec<String> = grid.coords(i).iter().map(|c| c.to_string()).collect();
        rec.extend(columns.iter().map(|(_, col)| col[i].to_string()));
        w.write_record(&rec)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn write_field_csv(path: &Path, field: &GriddedField) -> Result<()> {
    write_grid_table(path, &field.grid, &[("value", &field.values)])
}

/// Smallest positive gap between distinct coordinates along any axis.
fn infer_spacing(locations: &[Location]) -> f64 {
    let dim = locations[0].dim();
    let mut best = f64::INFINITY;
    for axis in 0..dim {
        let mut vals: Vec<f64> = locations.iter().map(|l| l.coords()[axis]).collect();
        vals.sort_by(f64::total_cmp);
        for w in vals.windows(2) {
            let d = w[1] - w[0];
            if d > 1e-9 && d < best {
                best = d;
            }
        }
    }
    if best.is_finite() {
        best
    } else {
        1.0
    }
}

pub type NamedColumn = (String, Vec<f64>);

/// Reads a table written by [`write_grid_table`]: `x[,y]` columns (the
/// second named `y` for planar grids) followed by named value columns. The
/// cell spacing is the smallest coordinate gap and boundary cells follow the
/// lattice neighbour rule.
pub fn read_grid_table(path: &Path) -> Result<(SpatialGrid, Vec<NamedColumn>)> {
    let mut r = csv_reader(path)?;
    let header = r.headers()?.clone();
    if header.get(0) != Some("x") {
        return Err(Error::format(path, "first column must be x"));
    }
    let dim = if header.get(1) == Some("y") { 2 } else { 1 };
    if header.len() <= dim {
        return Err(Error::format(path, "no value columns"));
    }
    let names: Vec<String> = header.iter().skip(dim).map(String::from).collect();
    let mut locations = Vec::new();
    let mut columns = vec![Vec::new(); names.len()];
    for (line, rec) in r.records().enumerate() {
        let rec = rec?;
        let nums: Vec<f64> = rec
            .iter()
            .map(|f| f.parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| Error::format(path, format!("row {}: {e}", line + 2)))?;
        if nums.len() != header.len() {
            return Err(Error::format(
                path,
                format!("row {} has {} fields", line + 2, nums.len()),
            ));
        }
        locations.push(Location::new(nums[..dim].to_vec())?);
        for (c, v) in columns.iter_mut().zip(&nums[dim..]) {
            c.push(*v);
        }
    }
    if locations.is_empty() {
        return Err(Error::format(path, "no grid cells"));
    }
    let spacing = infer_spacing(&locations);
    let grid = SpatialGrid::new(locations, spacing)?;
    Ok((grid, names.into_iter().zip(columns).collect()))
}

/// Reads a `x[,y],value` CSV.
pub fn read_field_csv(path: &Path) -> Result<GriddedField> {
    let (grid, mut columns) = read_grid_table(path)?;
    if columns.len() != 1 {
        return Err(Error::format(
            path,
            format!("expected one value column, found {}", columns.len()),
        ));
    }
    GriddedField::new(grid, columns.pop().expect("one column").1)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct StationSidecar {
    name: String,
    coords: Vec<f64>,
}

pub fn write_station(path: &Path, station: &StationSeries) -> Result<()> {
    let mut w = csv_writer(path)?;
    w.write_record(["timestamp", "value"])?;
    for (t, v) in station.times.iter().zip(&station.values) {
        let value = v.map(|x| x.to_string()).unwrap_or_default();
        w.write_record([t.to_string(), value])?;
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    write_json(
        &sidecar_path(path),
        &StationSidecar {
            name: station.name.clone(),
            coords: station.location.coords().to_vec(),
        },
    )
}

/// Reads a station CSV and its coordinate sidecar. Empty, `NA` and `NaN`
/// values are treated as missing.
pub fn read_station(path: &Path, rainfall: bool) -> Result<StationSeries> {
    let meta: StationSidecar = read_json(&sidecar_path(path))?;
    let mut r = csv_reader(path)?;
    let mut times = Vec::new();
    let mut values = Vec::new();
    for (line, rec) in r.records().enumerate() {
        let rec = rec?;
        if rec.len() != 2 {
            return Err(Error::format(
                path,
                format!("row {} has {} fields", line + 2, rec.len()),
            ));
        }
        let t: i64 = rec[0]
            .parse()
            .map_err(|e| Error::format(path, format!("row {} timestamp: {e}", line + 2)))?;
        let raw = &rec[1];
        let v = if raw.is_empty() || raw.eq_ignore_ascii_case("na") {
            None
        } else {
            let x: f64 = raw
                .parse()
                .map_err(|e| Error::format(path, format!("row {} value: {e}", line + 2)))?;
            if x.is_nan() {
                None
            } else {
                Some(x)
            }
        };
        times.push(t);
        values.push(v);
    }
    StationSeries::new(
        meta.name,
        Location::new(meta.coords)?,
        times,
        values,
        rainfall,
    )
    .map_err(|e| Error::format(path, e.to_string()))
}

fn write_matrix_bin(
    path: &Path,
    magic: [u8; 8],
    samples: &SampleMatrix,
    xi: f64,
    seed: u64,
) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    let mut header = Vec::with_capacity(HEADER_LEN);
    header.extend_from_slice(&magic);
    header.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    header.extend_from_slice(&(samples.rows() as u64).to_le_bytes());
    header.extend_from_slice(&(samples.cols() as u64).to_le_bytes());
    header.extend_from_slice(&xi.to_le_bytes());
    header.extend_from_slice(&seed.to_le_bytes());
    w.write_all(&header).map_err(|e| Error::io(path, e))?;
    for v in samples.data() {
        w.write_all(&v.to_le_bytes())
            .map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

struct BinHeader {
    xi: f64,
    seed: u64,
}

fn read_matrix_bin(path: &Path, magic: [u8; 8]) -> Result<(SampleMatrix, BinHeader)> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    if bytes.len() < HEADER_LEN {
        return Err(Error::format(path, "truncated header"));
    }
    if bytes[..8] != magic {
        return Err(Error::format(path, "wrong magic bytes"));
    }
    let u32_at = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().unwrap());
    let u64_at = |o: usize| u64::from_le_bytes(bytes[o..o + 8].try_into().unwrap());
    let version = u32_at(8);
    if version != FORMAT_VERSION {
        return Err(Error::format(
            path,
            format!("unsupported version {version}"),
        ));
    }
    let rows = u64_at(12) as usize;
    let cols = u64_at(20) as usize;
    let xi = f64::from_bits(u64_at(28));
    let seed = u64_at(36);
    let body = &bytes[HEADER_LEN..];
    let expected = rows
        .checked_mul(cols)
        .and_then(|n| n.checked_mul(8))
        .ok_or_else(|| Error::format(path, "size overflow"))?;
    if body.len() != expected {
        return Err(Error::format(
            path,
            format!("body has {} bytes, header implies {expected}", body.len()),
        ));
    }
    let data = body
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    Ok((SampleMatrix::new(rows, cols, data)?, BinHeader { xi, seed }))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct EnsembleSidecar {
    grid: SpatialGrid,
    model: VariogramModel,
    marginal: MarginalModel,
    risk: RiskFunctional,
    threshold: f64,
    xi: f64,
    seed: u64,
    stats: RejectionStats,
}

/// Writes the binary ensemble and its `.json` sidecar.
pub fn write_ensemble(path: &Path, ens: &ParetoEnsemble) -> Result<()> {
    write_matrix_bin(path, ENSEMBLE_MAGIC, &ens.samples, ens.xi, ens.seed.0)?;
    write_json(
        &sidecar_path(path),
        &EnsembleSidecar {
            grid: ens.grid.clone(),
            model: ens.model,
            marginal: ens.marginal.clone(),
            risk: ens.risk.clone(),
            threshold: ens.threshold,
            xi: ens.xi,
            seed: ens.seed.0,
            stats: ens.stats,
        },
    )
}

pub fn read_ensemble(path: &Path) -> Result<ParetoEnsemble> {
    let (samples, header) = read_matrix_bin(path, ENSEMBLE_MAGIC)?;
    let meta: EnsembleSidecar = read_json(&sidecar_path(path))?;
    if samples.cols() != meta.grid.len()
        || header.seed != meta.seed
        || header.xi.to_bits() != meta.xi.to_bits()
    {
        return Err(Error::format(path, "binary header disagrees with sidecar"));
    }
    Ok(ParetoEnsemble {
        grid: meta.grid,
        samples,
        xi: meta.xi,
        risk: meta.risk,
        threshold: meta.threshold,
        model: meta.model,
        marginal: meta.marginal,
        stats: meta.stats,
        seed: Seed(meta.seed),
    })
}

/// CSV export: one row per sample, one column per grid cell.
pub fn write_samples_csv(path: &Path, samples: &SampleMatrix) -> Result<()> {
    let mut w = csv_writer(path)?;
    let header: Vec<String> = (0..samples.cols()).map(|j| format!("cell{j}")).collect();
    w.write_record(&header)?;
    for row in samples.iter_rows() {
        w.write_record(row.iter().map(|v| v.to_string()))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Time-indexed stack of gridded fields (one row per time slice).
#[derive(Debug, Clone, PartialEq)]
pub struct RasterStack {
    pub grid: SpatialGrid,
    pub times: Vec<i64>,
    pub fields: SampleMatrix,
}

impl RasterStack {
    pub fn new(grid: SpatialGrid, times: Vec<i64>, fields: SampleMatrix) -> Result<Self> {
        if fields.cols() != grid.len() || fields.rows() != times.len() {
            return Err(Error::InvalidParameter(format!(
                "stack of {}x{} values for {} times and {} cells",
                fields.rows(),
                fields.cols(),
                times.len(),
                grid.len()
            )));
        }
        Ok(Self {
            grid,
            times,
            fields,
        })
    }

    /// Per-cell average over all time slices.
    pub fn mean_field(&self) -> Vec<f64> {
        let t = self.fields.rows() as f64;
        let mut acc = vec![0.0; self.grid.len()];
        for row in self.fields.iter_rows() {
            for (a, v) in acc.iter_mut().zip(row) {
                *a += v;
            }
        }
        acc.iter().map(|a| a / t).collect()
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct StackSidecar {
    grid: SpatialGrid,
    times: Vec<i64>,
}

pub fn write_raster_stack(path: &Path, stack: &RasterStack) -> Result<()> {
    write_matrix_bin(path, STACK_MAGIC, &stack.fields, f64::NAN, 0)?;
    write_json(
        &sidecar_path(path),
        &StackSidecar {
            grid: stack.grid.clone(),
            times: stack.times.clone(),
        },
    )
}

pub fn read_raster_stack(path: &Path) -> Result<RasterStack> {
    let (fields, _) = read_matrix_bin(path, STACK_MAGIC)?;
    let meta: StackSidecar = read_json(&sidecar_path(path))?;
    RasterStack::new(meta.grid, meta.times, fields).map_err(|e| Error::format(path, e.to_string()))
}
