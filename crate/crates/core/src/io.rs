//! Plain-text persistence: CSV tables with JSON sidecars.
//!
//! Reals are written with 17 significant digits so every double survives a
//! round trip. Files are UTF-8 with LF line endings.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::boundary::BoundaryReport;
use crate::error::{Error, Result};
use crate::lle_core::MatrixMeta;
use crate::samplers::PointCloud;
use crate::sparse::CsrMatrix;
use crate::spectral::{Method, Ordering, Spectrum};

/// Formats a double with 17 significant digits.
pub fn fmt_real(x: f64) -> String {
    format!("{x:.16e}")
}

/// Sidecar path of a data file: same stem, `.json` extension.
pub fn sidecar_path(path: &Path) -> PathBuf {
    path.with_extension("json")
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            std::fs::create_dir_all(dir)?;
        }
    }
    Ok(BufWriter::new(File::create(path)?))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut f = create(path)?;
    serde_json::to_writer_pretty(&mut f, value)?;
    f.write_all(b"\n")?;
    f.flush()?;
    Ok(())
}

/// `x1,...,xp[,bdist]`, one point per line.
pub fn write_cloud(cloud: &PointCloud, path: &Path) -> Result<()> {
    let mut f = create(path)?;
    let p = cloud.p();
    let mut header: Vec<String> = (1..=p).map(|i| format!("x{i}")).collect();
    let bd = cloud.boundary_dist();
    if bd.is_some() {
        header.push("bdist".into());
    }
    writeln!(f, "{}", header.join(","))?;
    for i in 0..cloud.n() {
        let mut row: Vec<String> = cloud.point(i).iter().map(|&x| fmt_real(x)).collect();
        if let Some(b) = bd {
            row.push(fmt_real(b[i]));
        }
        writeln!(f, "{}", row.join(","))?;
    }
    f.flush()?;
    Ok(())
}

/// Reads the coordinates written by [`write_cloud`]; a `bdist` column is ignored.
pub fn read_cloud(path: &Path, intrinsic_dim: usize) -> Result<PointCloud> {
    let reader = BufReader::new(File::open(path)?);
    let mut lines = reader.lines();
    let header = lines
        .next()
        .ok_or(Error::Parse {
            line: 1,
            message: "missing header".into(),
        })??;
    let p = header.split(',').filter(|h| h.starts_with('x')).count();
    let mut coords = Vec::new();
    for (i, line) in lines.enumerate() {
        let line = line?;
        if line.is_empty() {
            continue;
        }
        let vals = parse_reals(&line, i + 2)?;
        if vals.len() < p {
            return Err(Error::Parse {
                line: i + 2,
                message: format!("expected {p} coordinates"),
            });
        }
        coords.extend_from_slice(&vals[..p]);
    }
    PointCloud::new(coords, p, intrinsic_dim)
}

fn parse_reals(line: &str, lineno: usize) -> Result<Vec<f64>> {
    line.split(',')
        .map(|s| {
            s.trim().parse::<f64>().map_err(|e| Error::Parse {
                line: lineno,
                message: format!("'{s}': {e}"),
            })
        })
        .collect()
}

/// Writes `row,col,value` triplets in lexicographic order plus the sidecar.
pub fn save_matrix(w: &CsrMatrix, meta: &MatrixMeta, path: &Path) -> Result<()> {
    if meta.n != w.n_rows() {
        return Err(Error::Validation(format!(
            "metadata says n = {}, matrix has {} rows",
            meta.n,
            w.n_rows()
        )));
    }
    let mut trips: Vec<(usize, usize, f64)> = w.triplets().collect();
    trips.sort_by_key(|t| (t.0, t.1));
    let mut f = create(path)?;
    writeln!(f, "row,col,value")?;
    for (i, j, v) in trips {
        writeln!(f, "{i},{j},{}", fmt_real(v))?;
    }
    f.flush()?;
    write_json(&sidecar_path(path), meta)
}

/// Loads a matrix written by [`save_matrix`] and checks it against its sidecar.
pub fn load_matrix(path: &Path) -> Result<(CsrMatrix, MatrixMeta)> {
    let side = sidecar_path(path);
    let meta: MatrixMeta = serde_json::from_reader(BufReader::new(File::open(&side)?))
        .map_err(|e| Error::Validation(format!("{}: {e}", side.display())))?;
    if meta.scheme.starts_with("epsilon_ball") && meta.epsilon.is_none() {
        return Err(Error::Validation("epsilon_ball matrix without epsilon".into()));
    }
    if meta.scheme.starts_with("knn") && meta.k.is_none() {
        return Err(Error::Validation("knn matrix without K".into()));
    }
    if meta.c.is_none() {
        return Err(Error::Validation("sidecar lacks the regularizer c".into()));
    }
    let reader = BufReader::new(File::open(path)?);
    let mut lines = reader.lines();
    let header = lines.next().transpose()?;
    match header.as_deref().map(str::trim) {
        Some("row,col,value") => {}
        _ => {
            return Err(Error::Parse {
                line: 1,
                message: "expected header 'row,col,value'".into(),
            })
        }
    }
    let mut trips = Vec::new();
    for (i, line) in lines.enumerate() {
        let lineno = i + 2;
        let line = line?;
        if line.is_empty() {
            continue;
        }
        let parts: Vec<&str> = line.split(',').collect();
        if parts.len() != 3 {
            return Err(Error::Parse {
                line: lineno,
                message: format!("expected 3 fields, found {}", parts.len()),
            });
        }
        let idx = |s: &str| {
            s.trim().parse::<usize>().map_err(|e| Error::Parse {
                line: lineno,
                message: format!("'{s}': {e}"),
            })
        };
        let v = parts[2].trim().parse::<f64>().map_err(|e| Error::Parse {
            line: lineno,
            message: format!("'{}': {e}", parts[2]),
        })?;
        trips.push((idx(parts[0])?, idx(parts[1])?, v));
    }
    let w = CsrMatrix::from_triplets(meta.n, meta.n, &trips)?;
    Ok((w, meta))
}

/// `re,im[,residual]`, one eigenvalue per line.
pub fn write_spectrum(s: &Spectrum, path: &Path) -> Result<()> {
    let mut f = create(path)?;
    let with_res = s.residuals.len() == s.eigenvalues.len() && !s.residuals.is_empty();
    writeln!(f, "{}", if with_res { "re,im,residual" } else { "re,im" })?;
    for (i, z) in s.eigenvalues.iter().enumerate() {
        if with_res {
            writeln!(f, "{},{},{}", fmt_real(z.re), fmt_real(z.im), fmt_real(s.residuals[i]))?;
        } else {
            writeln!(f, "{},{}", fmt_real(z.re), fmt_real(z.im))?;
        }
    }
    f.flush()?;
    Ok(())
}

/// Sidecar of an eigenvector file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EigvecMeta {
    pub rows: usize,
    pub cols: usize,
    pub eigenvalues: Vec<[f64; 2]>,
    pub residuals: Vec<f64>,
    pub ordering: Ordering,
    pub method: Method,
}

/// Eigenvectors in column-major order: `vec,idx,re,im`, plus a sidecar.
pub fn write_eigenvectors(s: &Spectrum, path: &Path) -> Result<()> {
    let vecs = s
        .eigenvectors
        .as_ref()
        .ok_or_else(|| Error::Validation("spectrum carries no eigenvectors".into()))?;
    let rows = vecs.first().map_or(0, Vec::len);
    let mut f = create(path)?;
    writeln!(f, "vec,idx,re,im")?;
    for (j, v) in vecs.iter().enumerate() {
        for (i, z) in v.iter().enumerate() {
            writeln!(f, "{j},{i},{},{}", fmt_real(z.re), fmt_real(z.im))?;
        }
    }
    f.flush()?;
    write_json(
        &sidecar_path(path),
        &EigvecMeta {
            rows,
            cols: vecs.len(),
            eigenvalues: s.eigenvalues.iter().map(|z| [z.re, z.im]).collect(),
            residuals: s.residuals.clone(),
            ordering: s.ordering,
            method: s.method,
        },
    )
}

/// Reads eigenvectors written by [`write_eigenvectors`].
pub fn read_eigenvectors(path: &Path) -> Result<(Vec<Vec<Complex64>>, EigvecMeta)> {
    let side = sidecar_path(path);
    let meta: EigvecMeta = serde_json::from_reader(BufReader::new(File::open(&side)?))?;
    let mut out = vec![vec![Complex64::new(0.0, 0.0); meta.rows]; meta.cols];
    let reader = BufReader::new(File::open(path)?);
    for (i, line) in reader.lines().enumerate().skip(1) {
        let line = line?;
        let v = parse_reals(&line, i + 1)?;
        if v.len() != 4 {
            return Err(Error::Parse {
                line: i + 1,
                message: "expected 4 fields".into(),
            });
        }
        let (c, r) = (v[0] as usize, v[1] as usize);
        if c >= meta.cols || r >= meta.rows {
            return Err(Error::Validation(format!("entry ({r}, {c}) out of range")));
        }
        out[c][r] = Complex64::new(v[2], v[3]);
    }
    Ok((out, meta))
}

/// `idx,B,label,region,bdist`; empty fields where a value is absent.
pub fn write_report(report: &BoundaryReport, bdist: Option<&[f64]>, path: &Path) -> Result<()> {
    let mut f = create(path)?;
    writeln!(f, "idx,B,label,region,bdist")?;
    for (k, &b) in report.b_values.iter().enumerate() {
        let label = report
            .labels
            .as_ref()
            .and_then(|l| l[k])
            .map_or("", |l| l.name());
        let region = report.regions.as_ref().map_or("", |r| r[k].name());
        let bd = bdist.map_or(String::new(), |d| fmt_real(d[k]));
        writeln!(f, "{k},{},{label},{region},{bd}", fmt_real(b))?;
    }
    f.flush()?;
    Ok(())
}

/// Writes any serializable value as pretty JSON.
pub fn write_summary<T: Serialize>(value: &T, path: &Path) -> Result<()> {
    write_json(path, value)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::samplers::sample_disk;

    fn meta(n: usize) -> MatrixMeta {
        MatrixMeta {
            n,
            scheme: "epsilon_ball".into(),
            epsilon: Some(0.1),
            k: None,
            c: Some(1e-3),
            d: 1,
            seed: 0,
        }
    }

    #[test]
    fn real_formatting_roundtrips() {
        for x in [0.1, 1.0 / 3.0, -2.5e-300, 6.02e23, f64::MIN_POSITIVE] {
            assert_eq!(fmt_real(x).parse::<f64>().unwrap(), x);
        }
    }

    #[test]
    fn empty_matrix() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("w.csv");
        let w = CsrMatrix::from_rows(0, vec![]);
        save_matrix(&w, &meta(0), &p).unwrap();
        assert_eq!(std::fs::read_to_string(&p).unwrap(), "row,col,value\n");
        let (back, _) = load_matrix(&p).unwrap();
        assert_eq!(back.n_rows(), 0);
    }

    #[test]
    fn malformed_line_reports_line_number() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("w.csv");
        let w = CsrMatrix::identity(3);
        save_matrix(&w, &meta(3), &p).unwrap();
        std::fs::write(&p, "row,col,value\n0,0,1\n1,x,1\n").unwrap();
        match load_matrix(&p) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("{other:?}"),
        }
        std::fs::write(&p, "row,col,value\n5,0,1\n").unwrap();
        assert!(matches!(load_matrix(&p), Err(Error::Validation(_))));
        let mut m = meta(3);
        m.epsilon = None;
        write_json(&sidecar_path(&p), &m).unwrap();
        assert!(matches!(load_matrix(&p), Err(Error::Validation(_))));
    }

    #[test]
    fn cloud_csv_header() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("cloud.csv");
        let c = sample_disk(50, 1).unwrap();
        write_cloud(&c, &p).unwrap();
        let text = std::fs::read_to_string(&p).unwrap();
        assert!(text.starts_with("x1,x2,bdist\n"));
        let back = read_cloud(&p, 2).unwrap();
        assert_eq!(back.coords(), c.coords());
    }
}
