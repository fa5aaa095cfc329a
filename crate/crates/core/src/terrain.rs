//! Elevation grids and environment-dependent propagation losses.
//!
//! Grids follow the ESRI ASCII raster layout: the header gives the lower-left
//! corner of the lower-left cell, and rows are stored north to south. All
//! coordinates are in a local planar frame (meters, `x` east, `y` north).

use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::Point3;

#[derive(Debug, Error, PartialEq)]
pub enum TerrainError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("point ({x:.3}, {y:.3}) is outside the grid extent")]
    OutOfExtent { x: f64, y: f64 },
    #[error("no elevation data around ({x:.3}, {y:.3})")]
    NoData { x: f64, y: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct TerrainGrid {
    n_cols: usize,
    n_rows: usize,
    cell_size: f64,
    origin: (f64, f64),
    /// Row-major, first row is the northernmost.
    elevations: Vec<f64>,
    nodata: f64,
}

impl TerrainGrid {
    pub fn new(
        n_cols: usize,
        n_rows: usize,
        cell_size: f64,
        origin: (f64, f64),
        elevations: Vec<f64>,
        nodata: f64,
    ) -> Result<Self, TerrainError> {
        if n_cols < 2 || n_rows < 2 {
            return Err(TerrainError::InvalidGrid(format!(
                "grid must be at least 2x2, got {n_cols}x{n_rows}"
            )));
        }
        if !(cell_size > 0.0 && cell_size.is_finite()) {
            return Err(TerrainError::InvalidGrid(format!(
                "cell size must be positive, got {cell_size}"
            )));
        }
        if elevations.len() != n_cols * n_rows {
            return Err(TerrainError::InvalidGrid(format!(
                "expected {} elevations, got {}",
                n_cols * n_rows,
                elevations.len()
            )));
        }
        if let Some(bad) = elevations.iter().find(|v| **v != nodata && !v.is_finite()) {
            return Err(TerrainError::InvalidGrid(format!("non-finite elevation {bad}")));
        }
        Ok(Self {
            n_cols,
            n_rows,
            cell_size,
            origin,
            elevations,
            nodata,
        })
    }

    /// A constant-elevation grid covering `[0, width] x [0, height]`.
    pub fn constant(width: f64, height: f64, cell_size: f64, elevation: f64) -> Self {
        let n_cols = ((width / cell_size).ceil() as usize).max(2);
        let n_rows = ((height / cell_size).ceil() as usize).max(2);
        Self::new(
            n_cols,
            n_rows,
            cell_size,
            (0.0, 0.0),
            vec![elevation; n_cols * n_rows],
            -9999.0,
        )
        .expect("constant grid is valid")
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn cell_size(&self) -> f64 {
        self.cell_size
    }

    pub fn origin(&self) -> (f64, f64) {
        self.origin
    }

    pub fn nodata(&self) -> f64 {
        self.nodata
    }

    pub fn elevations(&self) -> &[f64] {
        &self.elevations
    }

    /// Cell value by (row from the north edge, column).
    pub fn cell(&self, row: usize, col: usize) -> f64 {
        self.elevations[row * self.n_cols + col]
    }

    pub fn is_nodata(&self, row: usize, col: usize) -> bool {
        self.cell(row, col) == self.nodata
    }

    /// Geographic extent as `(x_min, y_min, x_max, y_max)`.
    pub fn extent(&self) -> (f64, f64, f64, f64) {
        let (x0, y0) = self.origin;
        (
            x0,
            y0,
            x0 + self.n_cols as f64 * self.cell_size,
            y0 + self.n_rows as f64 * self.cell_size,
        )
    }

    pub fn contains(&self, x: f64, y: f64) -> bool {
        let (x0, y0, x1, y1) = self.extent();
        x >= x0 && x <= x1 && y >= y0 && y <= y1
    }

    /// Center of the cell at (row, col).
    pub fn cell_center(&self, row: usize, col: usize) -> (f64, f64) {
        let (x0, y0) = self.origin;
        (
            x0 + (col as f64 + 0.5) * self.cell_size,
            y0 + ((self.n_rows - 1 - row) as f64 + 0.5) * self.cell_size,
        )
    }

    /// `(min, max)` over all valid cells.
    pub fn elevation_range(&self) -> (f64, f64) {
        self.elevations
            .iter()
            .filter(|v| **v != self.nodata)
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
                (lo.min(v), hi.max(v))
            })
    }

    /// Bilinear interpolation between cell centers. Points between the outer
    /// cell centers and the grid edge take the edge value along that axis.
    pub fn elevation_at(&self, x: f64, y: f64) -> Result<f64, TerrainError> {
        if !self.contains(x, y) {
            return Err(TerrainError::OutOfExtent { x, y });
        }
        let (x0, y0) = self.origin;
        let fc = ((x - x0) / self.cell_size - 0.5).clamp(0.0, (self.n_cols - 1) as f64);
        let fr = ((y - y0) / self.cell_size - 0.5).clamp(0.0, (self.n_rows - 1) as f64);
        let c0 = (fc.floor() as usize).min(self.n_cols - 2);
        let r0 = (fr.floor() as usize).min(self.n_rows - 2);
        let tx = fc - c0 as f64;
        let ty = fr - r0 as f64;

        // r0/r0+1 count from the south edge; storage rows count from the north.
        let south = self.n_rows - 1 - r0;
        let north = south - 1;
        let corners = [
            (south, c0, (1.0 - tx) * (1.0 - ty)),
            (south, c0 + 1, tx * (1.0 - ty)),
            (north, c0, (1.0 - tx) * ty),
            (north, c0 + 1, tx * ty),
        ];
        let mut value = 0.0;
        for (row, col, weight) in corners {
            if weight == 0.0 {
                continue;
            }
            let v = self.cell(row, col);
            if v == self.nodata {
                return Err(TerrainError::NoData { x, y });
            }
            value += weight * v;
        }
        Ok(value)
    }
}

/// Parses an ESRI ASCII grid. Header keys are case-insensitive; every data
/// line must hold exactly one row.
pub fn load_dem(text: &str) -> Result<TerrainGrid, TerrainError> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty());

    let mut ncols = None;
    let mut nrows = None;
    let mut xll = None;
    let mut yll = None;
    let mut cellsize = None;
    let mut nodata = None;
    let mut pending: Option<(usize, &str)> = None;

    for (line_no, line) in lines.by_ref() {
        let mut parts = line.split_whitespace();
        let key = parts.next().unwrap_or_default();
        if key.parse::<f64>().is_ok() {
            pending = Some((line_no, line));
            break;
        }
        let value = parts.next().ok_or_else(|| TerrainError::Parse {
            line: line_no,
            message: format!("header key '{key}' has no value"),
        })?;
        if parts.next().is_some() {
            return Err(TerrainError::Parse {
                line: line_no,
                message: format!("header key '{key}' has more than one value"),
            });
        }
        let num = |v: &str| -> Result<f64, TerrainError> {
            v.parse::<f64>().map_err(|_| TerrainError::Parse {
                line: line_no,
                message: format!("header value '{v}' for '{key}' is not a number"),
            })
        };
        let count = |v: &str| -> Result<usize, TerrainError> {
            v.parse::<usize>().map_err(|_| TerrainError::Parse {
                line: line_no,
                message: format!("header value '{v}' for '{key}' is not a count"),
            })
        };
        match key.to_ascii_lowercase().as_str() {
            "ncols" => ncols = Some(count(value)?),
            "nrows" => nrows = Some(count(value)?),
            "xllcorner" => xll = Some(num(value)?),
            "yllcorner" => yll = Some(num(value)?),
            "cellsize" => cellsize = Some(num(value)?),
            "nodata_value" => nodata = Some(num(value)?),
            other => {
                return Err(TerrainError::Parse {
                    line: line_no,
                    message: format!("unknown header key '{other}'"),
                })
            }
        }
    }

    let missing = |name: &str| TerrainError::Parse {
        line: 0,
        message: format!("missing header key '{name}'"),
    };
    let ncols = ncols.ok_or_else(|| missing("ncols"))?;
    let nrows = nrows.ok_or_else(|| missing("nrows"))?;
    let xll = xll.ok_or_else(|| missing("xllcorner"))?;
    let yll = yll.ok_or_else(|| missing("yllcorner"))?;
    let cellsize = cellsize.ok_or_else(|| missing("cellsize"))?;
    let nodata = nodata.unwrap_or(-9999.0);

    let mut elevations = Vec::with_capacity(ncols * nrows);
    let mut rows = 0;
    for (line_no, line) in pending.into_iter().chain(lines) {
        let before = elevations.len();
        for token in line.split_whitespace() {
            let v = token.parse::<f64>().map_err(|_| TerrainError::Parse {
                line: line_no,
                message: format!("cell value '{token}' is not a number"),
            })?;
            if v != nodata && !v.is_finite() {
                return Err(TerrainError::Parse {
                    line: line_no,
                    message: format!("cell value '{token}' is not finite"),
                });
            }
            elevations.push(v);
        }
        let found = elevations.len() - before;
        if found != ncols {
            return Err(TerrainError::Parse {
                line: line_no,
                message: format!("expected {ncols} values, found {found}"),
            });
        }
        rows += 1;
        if rows > nrows {
            return Err(TerrainError::Parse {
                line: line_no,
                message: format!("more than {nrows} data rows"),
            });
        }
    }
    if rows != nrows {
        return Err(TerrainError::Parse {
            line: text.lines().count(),
            message: format!("expected {nrows} data rows, found {rows}"),
        });
    }
    TerrainGrid::new(ncols, nrows, cellsize, (xll, yll), elevations, nodata)
        .map_err(|e| TerrainError::Parse {
            line: 0,
            message: e.to_string(),
        })
}

/// Writes a grid in ESRI ASCII form. Values use the shortest representation
/// that parses back to the same `f64`.
pub fn write_dem(grid: &TerrainGrid) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "ncols {}", grid.n_cols);
    let _ = writeln!(out, "nrows {}", grid.n_rows);
    let _ = writeln!(out, "xllcorner {}", grid.origin.0);
    let _ = writeln!(out, "yllcorner {}", grid.origin.1);
    let _ = writeln!(out, "cellsize {}", grid.cell_size);
    let _ = writeln!(out, "NODATA_value {}", grid.nodata);
    for row in grid.elevations.chunks(grid.n_cols) {
        let line: Vec<String> = row.iter().map(|v| v.to_string()).collect();
        out.push_str(&line.join(" "));
        out.push('\n');
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TerrainKind {
    Flat,
    Hilly,
    Mountain,
}

impl TerrainKind {
    /// Lowest elevation of the generated field.
    pub fn base_elevation(self) -> f64 {
        match self {
            TerrainKind::Flat => 233.0,
            TerrainKind::Hilly => 40.0,
            TerrainKind::Mountain => 595.0,
        }
    }

    pub fn default_relief(self) -> f64 {
        match self {
            TerrainKind::Flat => 6.0,
            TerrainKind::Hilly => 37.0,
            TerrainKind::Mountain => 109.0,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            TerrainKind::Flat => "flat",
            TerrainKind::Hilly => "hilly",
            TerrainKind::Mountain => "mountain",
        }
    }
}

/// Seeded synthetic terrain over the square `[0, extent]²`.
///
/// Flat terrain is a sum of long-wavelength plane waves; hilly and mountain
/// terrain are sums of elongated Gaussian ridges. The field is rescaled so
/// that `max - min == relief` exactly.
pub fn generate_synthetic_terrain(
    kind: TerrainKind,
    extent: f64,
    relief: f64,
    seed: u64,
) -> Result<TerrainGrid, TerrainError> {
    if !(extent > 0.0 && extent.is_finite()) {
        return Err(TerrainError::InvalidGrid(format!("extent must be positive, got {extent}")));
    }
    if !(relief >= 0.0 && relief.is_finite()) {
        return Err(TerrainError::InvalidGrid(format!("relief must be non-negative, got {relief}")));
    }
    const CELLS: usize = 200;
    // feature sizes are in meters, calibrated on a 2 km tile
    const FEATURE_SCALE: f64 = 2000.0;
    let cell = extent / CELLS as f64;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    enum Feature {
        Wave { kx: f64, ky: f64, phase: f64, amp: f64 },
        Ridge { cx: f64, cy: f64, cos: f64, sin: f64, along: f64, across: f64, amp: f64 },
    }
    let mut features = Vec::new();
    match kind {
        TerrainKind::Flat => {
            for _ in 0..10 {
                let wavelength = rng.random_range(0.3 * FEATURE_SCALE..1.5 * FEATURE_SCALE);
                let dir: f64 = rng.random_range(0.0..std::f64::consts::TAU);
                let k = std::f64::consts::TAU / wavelength;
                features.push(Feature::Wave {
                    kx: k * dir.cos(),
                    ky: k * dir.sin(),
                    phase: rng.random_range(0.0..std::f64::consts::TAU),
                    amp: rng.random_range(0.5..1.0),
                });
            }
        }
        TerrainKind::Hilly | TerrainKind::Mountain => {
            let (count, width) = if kind == TerrainKind::Hilly {
                (14, (0.06, 0.14))
            } else {
                (8, (0.05, 0.10))
            };
            // feature density per unit area stays fixed as the extent changes
            let count = ((count as f64 * (extent / FEATURE_SCALE).powi(2)).round() as usize).max(2);
            for _ in 0..count {
                let dir: f64 = rng.random_range(0.0..std::f64::consts::PI);
                let across = FEATURE_SCALE * rng.random_range(width.0..width.1);
                features.push(Feature::Ridge {
                    cx: rng.random_range(0.0..extent),
                    cy: rng.random_range(0.0..extent),
                    cos: dir.cos(),
                    sin: dir.sin(),
                    along: across * rng.random_range(2.0..5.0),
                    across,
                    amp: rng.random_range(0.4..1.0),
                });
            }
        }
    }

    let mut raw = Vec::with_capacity(CELLS * CELLS);
    for row in 0..CELLS {
        let y = ((CELLS - 1 - row) as f64 + 0.5) * cell;
        for col in 0..CELLS {
            let x = (col as f64 + 0.5) * cell;
            let v: f64 = features
                .iter()
                .map(|f| match *f {
                    Feature::Wave { kx, ky, phase, amp } => amp * (kx * x + ky * y + phase).sin(),
                    Feature::Ridge { cx, cy, cos, sin, along, across, amp } => {
                        let (dx, dy) = (x - cx, y - cy);
                        let u = dx * cos + dy * sin;
                        let w = -dx * sin + dy * cos;
                        amp * (-0.5 * ((u / along).powi(2) + (w / across).powi(2))).exp()
                    }
                })
                .sum();
            raw.push(v);
        }
    }
    let (lo, hi) = raw
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
    let span = hi - lo;
    let base = kind.base_elevation();
    let elevations = raw
        .into_iter()
        .map(|v| if span > 0.0 { base + (v - lo) / span * relief } else { base })
        .collect();
    TerrainGrid::new(CELLS, CELLS, cell, (0.0, 0.0), elevations, -9999.0)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProfileSample {
    /// Distance along the straight path from the transmitter, meters.
    pub distance: f64,
    pub terrain: f64,
    /// Elevation of the straight tx→rx line at this sample.
    pub path: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LosProfile {
    pub samples: Vec<ProfileSample>,
    pub total_distance: f64,
}

pub const DEFAULT_PROFILE_SAMPLES: usize = 256;

/// Samples the straight 3-D line between `tx` and `rx` uniformly.
pub fn los_profile(
    grid: &TerrainGrid,
    tx: &Point3,
    rx: &Point3,
    n_samples: usize,
) -> Result<LosProfile, TerrainError> {
    if n_samples < 3 {
        return Err(TerrainError::InvalidGrid(format!(
            "profile needs at least 3 samples, got {n_samples}"
        )));
    }
    let total = tx.distance(rx);
    let last = (n_samples - 1) as f64;
    let samples = (0..n_samples)
        .map(|i| {
            let s = i as f64 / last;
            let x = tx.x + s * (rx.x - tx.x);
            let y = tx.y + s * (rx.y - tx.y);
            Ok(ProfileSample {
                distance: s * total,
                terrain: grid.elevation_at(x, y)?,
                path: if i + 1 == n_samples { rx.z } else { tx.z + s * (rx.z - tx.z) },
            })
        })
        .collect::<Result<Vec<_>, TerrainError>>()?;
    Ok(LosProfile {
        samples,
        total_distance: total,
    })
}

/// First Fresnel zone radius in meters (distances in km, frequency in GHz).
pub fn fresnel_radius(d1_km: f64, d2_km: f64, d_km: f64, f_ghz: f64) -> f64 {
    17.3 * (d1_km * d2_km / (f_ghz * d_km)).sqrt()
}

/// Single knife-edge diffraction loss in dB.
///
/// Blockage candidates are interior local maxima of the excess
/// `terrain - path`; a planar ground therefore never counts as a blockage. The
/// candidate with the largest excess relative to the first Fresnel radius is
/// used (ties go to the sample nearest the path midpoint), and the loss is
/// `max(0, 20·p/F₁ + 10)` with `p` the excess.
pub fn terrain_diffraction_loss(profile: &LosProfile, f_ghz: f64) -> f64 {
    let s = &profile.samples;
    let d_km = profile.total_distance / 1000.0;
    if s.len() < 3 || d_km <= 0.0 {
        return 0.0;
    }
    let excess = |i: usize| s[i].terrain - s[i].path;
    let mid = profile.total_distance / 2.0;
    let mut best: Option<(f64, f64)> = None; // (normalized excess, distance to midpoint)
    #[allow(clippy::needless_range_loop)]
    for i in 1..s.len() - 1 {
        let p = excess(i);
        if !(p > excess(i - 1) && p >= excess(i + 1)) {
            continue;
        }
        let d1 = s[i].distance / 1000.0;
        let d2 = d_km - d1;
        if d1 <= 0.0 || d2 <= 0.0 {
            continue;
        }
        let v = p / fresnel_radius(d1, d2, d_km, f_ghz);
        let from_mid = (s[i].distance - mid).abs();
        best = match best {
            Some((bv, bm)) if bv > v || (bv == v && bm <= from_mid) => Some((bv, bm)),
            _ => Some((v, from_mid)),
        };
    }
    best.map_or(0.0, |(v, _)| (20.0 * v + 10.0).max(0.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VegetationSpec {
    /// Vegetation depth along the path, meters.
    pub depth: f64,
    pub enabled: bool,
}

impl Default for VegetationSpec {
    fn default() -> Self {
        Self {
            depth: 1.0,
            enabled: true,
        }
    }
}

/// Woodland vegetation loss in dB (frequency in MHz, depth in meters,
/// elevation angle in degrees).
pub fn vegetation_loss(f_mhz: f64, depth: f64, phi_deg: f64) -> f64 {
    if depth <= 0.0 {
        return 0.0;
    }
    0.25 * f_mhz.powf(0.39) * depth.powf(0.25) * phi_deg.powf(0.05)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid_2x2(v: [f64; 4]) -> TerrainGrid {
        TerrainGrid::new(2, 2, 10.0, (0.0, 0.0), v.to_vec(), -9999.0).unwrap()
    }

    #[test]
    fn loads_constant_grid() {
        let g = load_dem("ncols 2\nnrows 2\nxllcorner 0\nyllcorner 0\ncellsize 1\nNODATA_value -9999\n5.0 5.0\n5.0 5.0\n")
            .unwrap();
        assert_eq!(g.elevations(), &[5.0; 4]);
        assert_eq!(g.elevation_at(1.3, 0.7).unwrap(), 5.0);
    }

    #[test]
    fn header_keys_are_case_insensitive() {
        let g = load_dem("NCOLS 2\nNRows 2\nXLLCORNER 10.5\nyllcorner -3\nCellSize 2\n1 2\n3 4\n").unwrap();
        assert_eq!(g.origin(), (10.5, -3.0));
        assert_eq!(g.nodata(), -9999.0);
    }

    #[test]
    fn short_row_reports_line() {
        let err = load_dem("ncols 3\nnrows 2\nxllcorner 0\nyllcorner 0\ncellsize 1\nNODATA_value -9999\n1 2 3\n4 5\n")
            .unwrap_err();
        assert_eq!(
            err,
            TerrainError::Parse {
                line: 8,
                message: "expected 3 values, found 2".into()
            }
        );
    }

    #[test]
    fn non_numeric_cell_and_bad_header() {
        let err = load_dem("ncols 2\nnrows 2\nxllcorner 0\nyllcorner 0\ncellsize 1\n1 x\n1 2\n").unwrap_err();
        assert!(matches!(err, TerrainError::Parse { line: 6, .. }));
        let err = load_dem("ncols two\n").unwrap_err();
        assert!(matches!(err, TerrainError::Parse { line: 1, .. }));
        let err = load_dem("ncols 2\nnrows 2\nxllcorner 0\nyllcorner 0\n1 2\n1 2\n").unwrap_err();
        assert!(err.to_string().contains("cellsize"));
    }

    #[test]
    fn nodata_cell_is_flagged() {
        let g = load_dem("ncols 2\nnrows 2\nxllcorner 0\nyllcorner 0\ncellsize 1\nNODATA_value -9999\n-9999 5\n5 5\n")
            .unwrap();
        assert!(g.is_nodata(0, 0));
        assert!(matches!(g.elevation_at(1.0, 1.0), Err(TerrainError::NoData { .. })));
        // south-east cell center is only surrounded by valid data
        assert_eq!(g.elevation_at(1.5, 0.5).unwrap(), 5.0);
    }

    #[test]
    fn bilinear_interpolation() {
        // row 0 is north: [0, 10] / south row [0, 10]
        let g = grid_2x2([0.0, 10.0, 0.0, 10.0]);
        assert_eq!(g.elevation_at(5.0, 5.0).unwrap(), 0.0);
        assert_eq!(g.elevation_at(15.0, 15.0).unwrap(), 10.0);
        assert!((g.elevation_at(10.0, 8.0).unwrap() - 5.0).abs() < 1e-12);
        assert!(matches!(g.elevation_at(-1.0, 5.0), Err(TerrainError::OutOfExtent { .. })));
    }

    #[test]
    fn synthetic_terrain_relief_and_determinism() {
        let flat = generate_synthetic_terrain(TerrainKind::Flat, 2000.0, 6.0, 1).unwrap();
        let (lo, hi) = flat.elevation_range();
        assert!(hi - lo <= 6.0 + 1e-9);
        assert_eq!(flat, generate_synthetic_terrain(TerrainKind::Flat, 2000.0, 6.0, 1).unwrap());

        let mountain = generate_synthetic_terrain(TerrainKind::Mountain, 2000.0, 109.0, 7).unwrap();
        let (lo, hi) = mountain.elevation_range();
        assert!(hi - lo >= 0.8 * 109.0 && hi - lo <= 109.0 + 1e-9);
        assert_ne!(mountain, generate_synthetic_terrain(TerrainKind::Mountain, 2000.0, 109.0, 8).unwrap());
    }

    #[test]
    fn profile_sampling() {
        let g = TerrainGrid::constant(1000.0, 1000.0, 10.0, 100.0);
        let tx = Point3::new(100.0, 100.0, 150.0);
        let rx = Point3::new(900.0, 700.0, 100.2);
        let p = los_profile(&g, &tx, &rx, 3).unwrap();
        let d = tx.distance(&rx);
        assert_eq!(p.samples.len(), 3);
        assert_eq!(p.samples[0].distance, 0.0);
        assert!((p.samples[1].distance - d / 2.0).abs() < 1e-9);
        assert!((p.samples[2].distance - d).abs() < 1e-9);
        assert_eq!(p.samples[0].path, 150.0);
        assert_eq!(p.samples[2].path, 100.2);
        assert!(p.samples.iter().all(|s| s.terrain == 100.0 && s.path >= s.terrain));
        assert_eq!(terrain_diffraction_loss(&los_profile(&g, &tx, &rx, 256).unwrap(), 0.15), 0.0);
    }

    fn bump_profile(excess_at_mid: f64, f_ghz: f64) -> (LosProfile, f64) {
        let d = 1000.0;
        let mut samples: Vec<ProfileSample> = (0..11)
            .map(|i| ProfileSample {
                distance: d * i as f64 / 10.0,
                terrain: 0.0,
                path: 20.0,
            })
            .collect();
        let f1 = fresnel_radius(0.5, 0.5, 1.0, f_ghz);
        samples[5].terrain = 20.0 + excess_at_mid * f1;
        (LosProfile { samples, total_distance: d }, f1)
    }

    #[test]
    fn diffraction_reference_points() {
        let (grazing, _) = bump_profile(0.0, 0.15);
        assert!((terrain_diffraction_loss(&grazing, 0.15) - 10.0).abs() < 1e-9);
        let (half, _) = bump_profile(0.5, 0.15);
        assert!((terrain_diffraction_loss(&half, 0.15) - 20.0).abs() < 1e-9);
        let (clear, _) = bump_profile(-1.0, 0.15);
        assert_eq!(terrain_diffraction_loss(&clear, 0.15), 0.0);
    }

    #[test]
    fn fresnel_and_vegetation_reference_values() {
        assert!((fresnel_radius(0.5, 0.5, 1.0, 0.15) - 22.334_204).abs() < 1e-5);
        assert_eq!(fresnel_radius(0.0, 1.0, 1.0, 0.15), 0.0);
        let ratio = fresnel_radius(0.3, 0.7, 1.0, 0.3) / fresnel_radius(0.3, 0.7, 1.0, 0.15);
        assert!((ratio - 1.0 / 2f64.sqrt()).abs() < 1e-12);

        // 0.25 · 150^0.39 · 30^0.05, evaluated independently with logs
        let expected = 0.25 * (0.39 * 150f64.ln() + 0.05 * 30f64.ln()).exp();
        assert!((vegetation_loss(150.0, 1.0, 30.0) - expected).abs() < 1e-12);
        assert!((expected - 2.0916).abs() < 1e-4);
        assert_eq!(vegetation_loss(150.0, 0.0, 30.0), 0.0);
        let r = vegetation_loss(150.0, 16.0, 30.0) / vegetation_loss(150.0, 1.0, 30.0);
        assert!((r - 2.0).abs() < 1e-12);
    }
}
