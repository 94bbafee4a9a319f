//! File formats.
//!
//! * Clouds: CSV with header `x,y,z,label`.
//! * Frames: CSV with header [`FRAMES_HEADER`].
//! * Strain: CSV with header `index,strain,mask`; unmasked values are `NaN`.
//! * Displacement fields: a JSON header plus a raw binary file of
//!   little-endian `f32` triples, x index fastest, then y, then z.
//! * Sweep configuration: TOML, see [`SweepConfigFile`].
//! * Sweep reports: `summary.json`, the long table `metrics.csv`
//!   (`sigma,mu,realization,metric,value`) and optional per-cell scatter
//!   tables (`index,gt_strain,pert_strain`).
//!
//! Reals are written in the shortest decimal form that parses back to the
//! same `f64`. Every `parse_*` function takes untrusted text or bytes and
//! reports malformed input as an error, never a panic.

use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::DisplacementField;
use crate::geometry::{Label, PointCloud};
use crate::metrics::NrmseNorm;
use crate::perturb::{default_mu_list, default_sigma_list, CellOutcome, Scenario, SweepConfig, SweepLayout, SweepOutcome, WALL_THICKNESS_MM};
use crate::strain::{low_curvature_count, StrainField};
use crate::surface::LocalSurfaceFrame;
use crate::{Point, Vec3};

pub const CLOUD_HEADER: &str = "x,y,z,label";
pub const FRAMES_HEADER: &str = "index,nx,ny,nz,t1x,t1y,t1z,t2x,t2y,t2z,radius,flag";
pub const STRAIN_HEADER: &str = "index,strain,mask";
pub const METRICS_HEADER: &str = "sigma,mu,realization,metric,value";
pub const SCATTER_HEADER: &str = "index,gt_strain,pert_strain";

/// Write through a temporary file in the same directory, then rename.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| Error::io(dir, e))?;
    tmp.write_all(bytes).map_err(|e| Error::io(path, e))?;
    tmp.persist(path).map_err(|e| Error::io(path, e.error))?;
    Ok(())
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

/// Data rows after the header line, with 1-based line numbers. Blank lines
/// are skipped.
fn table_rows<'a>(text: &'a str, header: &str) -> Result<impl Iterator<Item = (usize, &'a str)>> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l.trim_end_matches('\r')));
    match lines.next() {
        Some((_, first)) if first.trim() == header => {}
        _ => return Err(Error::MissingHeader),
    }
    Ok(lines.filter(|(_, l)| !l.trim().is_empty()))
}

fn split_fields(line: usize, row: &str, expected: usize) -> Result<Vec<&str>> {
    let fields: Vec<&str> = row.split(',').map(str::trim).collect();
    if fields.len() != expected {
        return Err(Error::Parse {
            line,
            message: format!("expected {expected} fields, found {}", fields.len()),
        });
    }
    Ok(fields)
}

fn parse_real(line: usize, s: &str) -> Result<f64> {
    let v: f64 = s.parse().map_err(|_| Error::Parse {
        line,
        message: format!("invalid number {s:?}"),
    })?;
    if !v.is_finite() {
        return Err(Error::Parse {
            line,
            message: "non-finite value".into(),
        });
    }
    Ok(v)
}

fn parse_int(line: usize, s: &str) -> Result<i64> {
    s.parse().map_err(|_| Error::Parse {
        line,
        message: format!("invalid integer {s:?}"),
    })
}

fn parse_index(line: usize, s: &str, expected: usize) -> Result<()> {
    let got = parse_int(line, s)?;
    if got != expected as i64 {
        return Err(Error::Parse {
            line,
            message: format!("expected index {expected}, found {got}"),
        });
    }
    Ok(())
}

pub fn format_cloud(cloud: &PointCloud) -> String {
    let mut out = String::with_capacity(cloud.len() * 64);
    out.push_str(CLOUD_HEADER);
    out.push('\n');
    for (p, l) in cloud.points().iter().zip(cloud.labels()) {
        let _ = writeln!(out, "{},{},{},{}", p.x, p.y, p.z, l.code());
    }
    out
}

pub fn parse_cloud(text: &str) -> Result<PointCloud> {
    let mut points = Vec::new();
    let mut labels = Vec::new();
    for (line, row) in table_rows(text, CLOUD_HEADER)? {
        let f = split_fields(line, row, 4)?;
        points.push(Point::new(parse_real(line, f[0])?, parse_real(line, f[1])?, parse_real(line, f[2])?));
        let label = parse_int(line, f[3])
            .ok()
            .and_then(Label::from_code)
            .ok_or(Error::InvalidLabel { line })?;
        labels.push(label);
    }
    PointCloud::new(points, labels)
}

pub fn read_cloud(path: &Path) -> Result<PointCloud> {
    let id = path.display().to_string();
    Ok(parse_cloud(&read_text(path)?)?.with_id(id))
}

pub fn write_cloud(cloud: &PointCloud, path: &Path) -> Result<()> {
    write_atomic(path, format_cloud(cloud).as_bytes())
}

pub fn format_frames(frames: &[LocalSurfaceFrame]) -> String {
    let mut out = String::with_capacity(frames.len() * 200);
    out.push_str(FRAMES_HEADER);
    out.push('\n');
    for (i, f) in frames.iter().enumerate() {
        let (n, a, b) = (f.normal, f.tangent1, f.tangent2);
        let _ = writeln!(
            out,
            "{i},{},{},{},{},{},{},{},{},{},{},{}",
            n.x,
            n.y,
            n.z,
            a.x,
            a.y,
            a.z,
            b.x,
            b.y,
            b.z,
            f.radius_mm,
            u8::from(f.low_curvature)
        );
    }
    out
}

pub fn parse_frames(text: &str) -> Result<Vec<LocalSurfaceFrame>> {
    let mut frames = Vec::new();
    for (line, row) in table_rows(text, FRAMES_HEADER)? {
        let f = split_fields(line, row, 12)?;
        parse_index(line, f[0], frames.len())?;
        let mut v = [0.0; 10];
        for (slot, s) in v.iter_mut().zip(&f[1..11]) {
            *slot = parse_real(line, s)?;
        }
        let normal = Vec3::new(v[0], v[1], v[2]);
        let tangent1 = Vec3::new(v[3], v[4], v[5]);
        let tangent2 = Vec3::new(v[6], v[7], v[8]);
        let orthonormal = [normal, tangent1, tangent2].iter().all(|u| (u.norm() - 1.0).abs() < 1e-6)
            && normal.dot(&tangent1).abs() < 1e-6
            && normal.dot(&tangent2).abs() < 1e-6
            && tangent1.dot(&tangent2).abs() < 1e-6;
        if !orthonormal {
            return Err(Error::Parse {
                line,
                message: "frame is not orthonormal".into(),
            });
        }
        if v[9] <= 0.0 {
            return Err(Error::Parse {
                line,
                message: "radius must be positive".into(),
            });
        }
        let low_curvature = match parse_int(line, f[11])? {
            0 => false,
            1 => true,
            _ => {
                return Err(Error::Parse {
                    line,
                    message: "flag must be 0 or 1".into(),
                })
            }
        };
        frames.push(LocalSurfaceFrame {
            normal,
            tangent1,
            tangent2,
            radius_mm: v[9],
            low_curvature,
        });
    }
    Ok(frames)
}

pub fn read_frames(path: &Path) -> Result<Vec<LocalSurfaceFrame>> {
    parse_frames(&read_text(path)?)
}

pub fn write_frames(frames: &[LocalSurfaceFrame], path: &Path) -> Result<()> {
    write_atomic(path, format_frames(frames).as_bytes())
}

pub fn format_strain(strain: &StrainField) -> String {
    let mut out = String::with_capacity(strain.len() * 32);
    out.push_str(STRAIN_HEADER);
    out.push('\n');
    for (i, (v, m)) in strain.values.iter().zip(&strain.mask).enumerate() {
        if *m {
            let _ = writeln!(out, "{i},{v},1");
        } else {
            let _ = writeln!(out, "{i},NaN,0");
        }
    }
    out
}

pub fn parse_strain(text: &str) -> Result<StrainField> {
    let mut values = Vec::new();
    let mut mask = Vec::new();
    for (line, row) in table_rows(text, STRAIN_HEADER)? {
        let f = split_fields(line, row, 3)?;
        parse_index(line, f[0], values.len())?;
        match parse_int(line, f[2])? {
            1 => {
                values.push(parse_real(line, f[1])?);
                mask.push(true);
            }
            0 => {
                values.push(f64::NAN);
                mask.push(false);
            }
            _ => {
                return Err(Error::Parse {
                    line,
                    message: "mask must be 0 or 1".into(),
                })
            }
        }
    }
    StrainField::new(values, mask)
}

pub fn read_strain(path: &Path) -> Result<StrainField> {
    parse_strain(&read_text(path)?)
}

pub fn write_strain(strain: &StrainField, path: &Path) -> Result<()> {
    write_atomic(path, format_strain(strain).as_bytes())
}

/// Header document of a displacement field.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FieldHeader {
    pub dims: [usize; 3],
    pub spacing_mm: [f64; 3],
    pub origin_mm: [f64; 3],
    pub component_order: String,
    pub scalar: String,
    pub data_file: String,
}

impl FieldHeader {
    /// Expected size of the binary payload.
    pub fn data_len(&self) -> Result<usize> {
        self.dims
            .iter()
            .try_fold(12usize, |acc, &d| acc.checked_mul(d))
            .ok_or_else(|| Error::InvalidField("grid too large".into()))
    }
}

pub fn parse_field_header(text: &str) -> Result<FieldHeader> {
    let header: FieldHeader = serde_json::from_str(text).map_err(|e| Error::Parse {
        line: e.line(),
        message: e.to_string(),
    })?;
    if header.component_order != "RAS" {
        return Err(Error::InvalidField(format!(
            "unsupported component_order {:?}",
            header.component_order
        )));
    }
    if header.scalar != "f32le" {
        return Err(Error::InvalidField(format!("unsupported scalar {:?}", header.scalar)));
    }
    if header.dims.iter().any(|&d| d < 2) {
        return Err(Error::InvalidField("dims must be ≥ 2".into()));
    }
    if header.spacing_mm.iter().any(|s| !(s.is_finite() && *s > 0.0)) {
        return Err(Error::InvalidField("spacing must be positive and finite".into()));
    }
    if header.origin_mm.iter().any(|o| !o.is_finite()) {
        return Err(Error::InvalidField("origin must be finite".into()));
    }
    header.data_len()?;
    Ok(header)
}

pub fn decode_field(header: &FieldHeader, bytes: &[u8]) -> Result<DisplacementField> {
    let expected = header.data_len()?;
    if bytes.len() != expected {
        return Err(Error::DataSizeMismatch {
            expected,
            actual: bytes.len(),
        });
    }
    let data = bytes
        .chunks_exact(12)
        .map(|c| {
            let f = |o: usize| f32::from_le_bytes([c[o], c[o + 1], c[o + 2], c[o + 3]]) as f64;
            Vec3::new(f(0), f(4), f(8))
        })
        .collect();
    DisplacementField::new(header.dims, header.spacing_mm, header.origin_mm, data)
}

/// Header and payload; values are quantized to `f32`.
pub fn encode_field(field: &DisplacementField, data_file: &str) -> (FieldHeader, Vec<u8>) {
    let header = FieldHeader {
        dims: field.dims(),
        spacing_mm: field.spacing_mm(),
        origin_mm: field.origin_mm(),
        component_order: "RAS".into(),
        scalar: "f32le".into(),
        data_file: data_file.into(),
    };
    let mut bytes = Vec::with_capacity(field.data().len() * 12);
    for v in field.data() {
        for c in v.iter() {
            bytes.extend_from_slice(&(*c as f32).to_le_bytes());
        }
    }
    (header, bytes)
}

pub fn read_field(header_path: &Path) -> Result<DisplacementField> {
    let header = parse_field_header(&read_text(header_path)?)?;
    let data_path = header_path.parent().unwrap_or(Path::new(".")).join(&header.data_file);
    let bytes = fs::read(&data_path).map_err(|e| Error::io(&data_path, e))?;
    decode_field(&header, &bytes)
}

/// Writes `<stem>.bin` next to the header.
pub fn write_field(field: &DisplacementField, header_path: &Path) -> Result<()> {
    let stem = header_path
        .file_stem()
        .and_then(|s| s.to_str())
        .ok_or_else(|| Error::Config(format!("bad field path {}", header_path.display())))?;
    let data_file = format!("{stem}.bin");
    let (header, bytes) = encode_field(field, &data_file);
    let data_path = header_path.with_file_name(&data_file);
    write_atomic(&data_path, &bytes)?;
    let mut text = serde_json::to_string_pretty(&header).expect("header serializes");
    text.push('\n');
    write_atomic(header_path, text.as_bytes())
}

/// Sweep configuration document.
///
/// Input paths are resolved relative to the configuration file. Omitted
/// grids default to 0..6 wall thicknesses for σ and −6..+6 for μ.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfigFile {
    pub cloud: PathBuf,
    pub frames: PathBuf,
    pub field: PathBuf,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "one")]
    pub realizations: usize,
    #[serde(default = "thickness")]
    pub wall_thickness_mm: f64,
    #[serde(default)]
    pub sigma_list_mm: Option<Vec<f64>>,
    #[serde(default)]
    pub mu_list_mm: Option<Vec<f64>>,
    #[serde(default)]
    pub layout: SweepLayout,
    #[serde(default)]
    pub nrmse_normalization: NrmseNorm,
    /// Emit per-cell `index,gt_strain,pert_strain` tables.
    #[serde(default)]
    pub scatter: bool,
    /// Report strain with the opposite sign convention.
    #[serde(default)]
    pub negate: bool,
}

fn one() -> usize {
    1
}

fn thickness() -> f64 {
    WALL_THICKNESS_MM
}

impl SweepConfigFile {
    pub fn sweep_config(&self) -> Result<SweepConfig> {
        let t = self.wall_thickness_mm;
        let cfg = SweepConfig {
            sigma_list_mm: self.sigma_list_mm.clone().unwrap_or_else(|| default_sigma_list(t)),
            mu_list_mm: self.mu_list_mm.clone().unwrap_or_else(|| default_mu_list(t)),
            seed: self.seed,
            realizations: self.realizations,
            wall_thickness_mm: t,
            layout: self.layout,
            nrmse_norm: self.nrmse_normalization,
            negate: self.negate,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn resolve_paths(&mut self, base: &Path) {
        for p in [&mut self.cloud, &mut self.frames, &mut self.field] {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
    }
}

pub fn parse_sweep_config(text: &str) -> Result<SweepConfigFile> {
    let file: SweepConfigFile = toml::from_str(text).map_err(|e| Error::Config(e.message().to_string()))?;
    file.sweep_config()?;
    Ok(file)
}

pub fn read_sweep_config(path: &Path) -> Result<SweepConfigFile> {
    let mut file = parse_sweep_config(&read_text(path)?)?;
    file.resolve_paths(path.parent().unwrap_or(Path::new(".")));
    Ok(file)
}

#[derive(Serialize)]
struct Summary<'a> {
    wall_thickness_mm: f64,
    seed: u64,
    realizations: usize,
    layout: SweepLayout,
    nrmse_normalization: NrmseNorm,
    negate: bool,
    ground_truth: GroundTruthSummary,
    cells: Vec<CellSummary<'a>>,
}

#[derive(Serialize)]
struct GroundTruthSummary {
    n_points: usize,
    low_curvature_points: usize,
    peak: Option<f64>,
    p99: Option<f64>,
}

#[derive(Serialize)]
struct CellSummary<'a> {
    scenario: Scenario,
    sigma_mm: f64,
    mu_mm: f64,
    realization: usize,
    seed: u64,
    r_squared: Option<f64>,
    nrmse: Option<f64>,
    peak: Option<f64>,
    p99: Option<f64>,
    n_points: Option<usize>,
    satisfactory: bool,
    failed: bool,
    error: Option<&'a str>,
    outside_points: usize,
}

/// Per-cell structured summary (JSON).
pub fn format_summary(outcome: &SweepOutcome, config: &SweepConfig, ref_frames: &[LocalSurfaceFrame]) -> String {
    let gt = &outcome.ground_truth;
    let summary = Summary {
        wall_thickness_mm: config.wall_thickness_mm,
        seed: config.seed,
        realizations: config.realizations,
        layout: config.layout,
        nrmse_normalization: config.nrmse_norm,
        negate: config.negate,
        ground_truth: GroundTruthSummary {
            n_points: gt.masked_count(),
            low_curvature_points: low_curvature_count(ref_frames, &gt.mask),
            peak: crate::metrics::peak(gt).ok(),
            p99: crate::metrics::percentile(gt, 0.99).ok(),
        },
        cells: outcome
            .cells
            .iter()
            .map(|c| {
                let r = c.report();
                let (error, outside_points) = match &c.outcome {
                    CellOutcome::Failed { message, outside } => (Some(message.as_str()), outside.len()),
                    CellOutcome::Done { .. } => (None, 0),
                };
                CellSummary {
                    scenario: c.scenario,
                    sigma_mm: c.sigma_mm,
                    mu_mm: c.mu_mm,
                    realization: c.realization,
                    seed: c.seed,
                    r_squared: r.map(|r| r.r_squared),
                    nrmse: r.map(|r| r.nrmse),
                    peak: r.map(|r| r.peak),
                    p99: r.map(|r| r.p99),
                    n_points: r.map(|r| r.n_points),
                    satisfactory: r.is_some_and(|r| r.satisfactory),
                    failed: c.failed(),
                    error,
                    outside_points,
                }
            })
            .collect(),
    };
    let mut s = serde_json::to_string_pretty(&summary).expect("summary serializes");
    s.push('\n');
    s
}

/// Long-format metric table for plotting; failed cells contribute no rows.
pub fn format_metrics_table(outcome: &SweepOutcome) -> String {
    let mut out = String::new();
    out.push_str(METRICS_HEADER);
    out.push('\n');
    for c in &outcome.cells {
        let Some(r) = c.report() else { continue };
        for (name, value) in [
            ("r_squared", r.r_squared),
            ("nrmse", r.nrmse),
            ("peak", r.peak),
            ("p99", r.p99),
        ] {
            let _ = writeln!(out, "{},{},{},{name},{value}", c.sigma_mm, c.mu_mm, c.realization);
        }
    }
    out
}

/// Ground truth against perturbed strain on the joint mask.
pub fn format_scatter(gt: &StrainField, pert: &StrainField) -> String {
    let mut out = String::new();
    out.push_str(SCATTER_HEADER);
    out.push('\n');
    for i in 0..gt.len().min(pert.len()) {
        if gt.mask[i] && pert.mask[i] {
            let _ = writeln!(out, "{i},{},{}", gt.values[i], pert.values[i]);
        }
    }
    out
}

/// Write `summary.json`, `metrics.csv` and (optionally) `scatter/*.csv`.
pub fn write_sweep_reports(
    dir: &Path,
    outcome: &SweepOutcome,
    config: &SweepConfig,
    ref_frames: &[LocalSurfaceFrame],
    scatter: bool,
) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    write_atomic(&dir.join("summary.json"), format_summary(outcome, config, ref_frames).as_bytes())?;
    write_atomic(&dir.join("metrics.csv"), format_metrics_table(outcome).as_bytes())?;
    if scatter {
        let sdir = dir.join("scatter");
        fs::create_dir_all(&sdir).map_err(|e| Error::io(&sdir, e))?;
        for (i, c) in outcome.cells.iter().enumerate() {
            if let CellOutcome::Done { strain, .. } = &c.outcome {
                let name = format!("cell{i:03}_r{}.csv", c.realization);
                write_atomic(&sdir.join(name), format_scatter(&outcome.ground_truth, strain).as_bytes())?;
            }
        }
    }
    Ok(())
}
