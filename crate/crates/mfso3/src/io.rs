//! File formats: sphere-grid CSV of marginal densities, rotation-sample
//! CSV (nine row-major columns), and the JSON fit report. Each CSV starts
//! with a version comment so readers can reject unknown layouts.

use crate::error::Error;
use crate::matrix_fisher::MatrixFisher;
use crate::so3::{Matrix3, Rotation, Vector3};
use serde::{Deserialize, Serialize};
use std::io::{BufRead, Write};

pub const GRID_VERSION: &str = "# mfso3-grid v1";
pub const SAMPLES_VERSION: &str = "# mfso3-samples v1";

/// One row of the density grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridRow {
    pub azimuth_rad: f64,
    pub elevation_rad: f64,
    pub p_axis: [f64; 3],
}

/// Evaluates the three per-axis marginal densities on an
/// `n_elevation x n_azimuth` latitude-longitude grid of cell centers.
pub fn density_grid(d: &MatrixFisher, n_azimuth: usize, n_elevation: usize) -> Vec<GridRow> {
    let mut rows = Vec::with_capacity(n_azimuth * n_elevation);
    for ie in 0..n_elevation {
        // elevation (latitude) in (-pi/2, pi/2), cell centers
        let el = std::f64::consts::PI * ((ie as f64 + 0.5) / n_elevation as f64 - 0.5);
        for ia in 0..n_azimuth {
            let az = 2.0 * std::f64::consts::PI * (ia as f64 + 0.5) / n_azimuth as f64;
            let r = Vector3::new(el.cos() * az.cos(), el.cos() * az.sin(), el.sin());
            rows.push(GridRow {
                azimuth_rad: az,
                elevation_rad: el,
                p_axis: [
                    d.marginal_axis_density(0, &r),
                    d.marginal_axis_density(1, &r),
                    d.marginal_axis_density(2, &r),
                ],
            });
        }
    }
    rows
}

pub fn write_density_grid<W: Write>(rows: &[GridRow], mut out: W) -> std::io::Result<()> {
    writeln!(out, "{GRID_VERSION}")?;
    writeln!(out, "azimuth_rad,elevation_rad,p_axis1,p_axis2,p_axis3")?;
    for r in rows {
        writeln!(
            out,
            "{},{},{},{},{}",
            r.azimuth_rad, r.elevation_rad, r.p_axis[0], r.p_axis[1], r.p_axis[2]
        )?;
    }
    Ok(())
}

pub fn read_density_grid<R: BufRead>(reader: R) -> Result<Vec<GridRow>, Error> {
    let mut lines = reader.lines();
    let version = lines
        .next()
        .transpose()
        .map_err(|e| Error::InvalidParameter(e.to_string()))?
        .unwrap_or_default();
    if version.trim() != GRID_VERSION {
        return Err(Error::InvalidParameter(format!(
            "unknown grid version line: {version}"
        )));
    }
    let mut rows = Vec::new();
    for line in lines {
        let line = line.map_err(|e| Error::InvalidParameter(e.to_string()))?;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') || line.starts_with("azimuth") {
            continue;
        }
        let vals = parse_floats(line, 5)?;
        rows.push(GridRow {
            azimuth_rad: vals[0],
            elevation_rad: vals[1],
            p_axis: [vals[2], vals[3], vals[4]],
        });
    }
    Ok(rows)
}

/// Writes rotations as nine row-major columns per line.
pub fn write_rotation_samples<W: Write>(samples: &[Rotation], mut out: W) -> std::io::Result<()> {
    writeln!(out, "{SAMPLES_VERSION}")?;
    writeln!(out, "r11,r12,r13,r21,r22,r23,r31,r32,r33")?;
    for r in samples {
        let m = r.matrix();
        let mut first = true;
        for i in 0..3 {
            for j in 0..3 {
                if !first {
                    write!(out, ",")?;
                }
                write!(out, "{}", m[(i, j)])?;
                first = false;
            }
        }
        writeln!(out)?;
    }
    Ok(())
}

/// Reads rotations written by [`write_rotation_samples`]; every row must
/// satisfy the rotation invariants.
pub fn read_rotation_samples<R: BufRead>(reader: R) -> Result<Vec<Rotation>, Error> {
    let mut samples = Vec::new();
    for (k, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| Error::InvalidParameter(e.to_string()))?;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') || line.starts_with("r11") {
            continue;
        }
        let vals = parse_floats(line, 9)?;
        let m = Matrix3::from_fn(|i, j| vals[3 * i + j]);
        samples.push(
            Rotation::from_matrix(m)
                .map_err(|e| Error::InvalidParameter(format!("row {}: {e}", k + 1)))?,
        );
    }
    Ok(samples)
}

fn parse_floats(line: &str, expected: usize) -> Result<Vec<f64>, Error> {
    let vals: Result<Vec<f64>, _> = line.split(',').map(|f| f.trim().parse::<f64>()).collect();
    let vals = vals.map_err(|e| Error::InvalidParameter(format!("bad float in '{line}': {e}")))?;
    if vals.len() != expected {
        return Err(Error::InvalidParameter(format!(
            "expected {expected} fields, found {} in '{line}'",
            vals.len()
        )));
    }
    Ok(vals)
}

/// JSON description of a 3x3 matrix parameter, the input format of the
/// density and sampling commands.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MatrixParameterFile {
    pub f: [[f64; 3]; 3],
}

impl MatrixParameterFile {
    pub fn matrix(&self) -> Matrix3 {
        Matrix3::from_fn(|i, j| self.f[i][j])
    }

    pub fn from_matrix(m: &Matrix3) -> Self {
        let mut f = [[0.0; 3]; 3];
        for (i, row) in f.iter_mut().enumerate() {
            for (j, v) in row.iter_mut().enumerate() {
                *v = m[(i, j)];
            }
        }
        MatrixParameterFile { f }
    }
}

/// JSON report of a fitted parameter with solver diagnostics.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FitReport {
    pub f: [[f64; 3]; 3],
    pub u: [[f64; 3]; 3],
    pub s: [f64; 3],
    pub v: [[f64; 3]; 3],
    pub log_c: f64,
    pub iterations: usize,
    pub residual: f64,
    pub distinct: bool,
}

impl FitReport {
    pub fn from_fit(fit: &crate::fitting::FitResult) -> Self {
        let d = &fit.distribution;
        let svd = d.proper_svd();
        FitReport {
            f: MatrixParameterFile::from_matrix(d.parameter()).f,
            u: MatrixParameterFile::from_matrix(svd.u.matrix()).f,
            s: svd.s,
            v: MatrixParameterFile::from_matrix(svd.v.matrix()).f,
            log_c: d.normalizing().log_c,
            iterations: fit.newton.iterations,
            residual: fit.newton.residual,
            distinct: fit.newton.distinct,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::so3::sample_uniform;
    use approx::assert_relative_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha12Rng;

    #[test]
    fn rotation_samples_round_trip() {
        let mut rng = ChaCha12Rng::seed_from_u64(80);
        let samples: Vec<Rotation> = (0..50).map(|_| sample_uniform(&mut rng)).collect();
        let mut buf = Vec::new();
        write_rotation_samples(&samples, &mut buf).unwrap();
        let back = read_rotation_samples(std::io::Cursor::new(buf)).unwrap();
        assert_eq!(back.len(), samples.len());
        for (a, b) in samples.iter().zip(&back) {
            assert_eq!(a.matrix(), b.matrix());
        }
    }

    #[test]
    fn rotation_samples_reject_non_rotations() {
        let text = format!("{SAMPLES_VERSION}\n1,0,0,0,1,0,0,0,2\n");
        assert!(read_rotation_samples(std::io::Cursor::new(text.into_bytes())).is_err());
    }

    #[test]
    fn grid_round_trip_and_uniform_density() {
        let d = MatrixFisher::new(Matrix3::zeros()).unwrap();
        let rows = density_grid(&d, 8, 4);
        assert_eq!(rows.len(), 32);
        for r in &rows {
            for p in r.p_axis {
                assert_relative_eq!(p, 1.0, epsilon = 1e-12);
            }
        }
        let mut buf = Vec::new();
        write_density_grid(&rows, &mut buf).unwrap();
        let back = read_density_grid(std::io::Cursor::new(buf)).unwrap();
        assert_eq!(back.len(), rows.len());
        for (a, b) in rows.iter().zip(&back) {
            assert_eq!(a, b);
        }
    }

    #[test]
    fn grid_reader_rejects_unknown_version() {
        let text = "# other v9\n0,0,1,1,1\n";
        assert!(read_density_grid(std::io::Cursor::new(text.as_bytes().to_vec())).is_err());
    }
}
