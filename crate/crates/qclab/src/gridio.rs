//! Grid dumps and CSV export.
//!
//! Dump layout: a 32-byte header — magic `QCF1`, then `nx`, `ny`, and the
//! component count as little-endian u32, then 16 reserved zero bytes —
//! followed by row-major little-endian f64 samples with the components of
//! each sample interleaved. A JSON sidecar at `<path>.json` carries the
//! [`GridSpec`].

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use num_complex::Complex64;
use thiserror::Error;

use crate::fields::{ComplexGrid, GridField, GridSpec, Provenance};
use crate::matalg::Mat2;

pub const MAGIC: &[u8; 4] = b"QCF1";

#[derive(Debug, Error)]
pub enum GridIoError {
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{path} is not a QCF1 dump")]
    BadMagic { path: PathBuf },
    #[error("{path}: dump holds {got} components, expected {want}")]
    WrongComponents { path: PathBuf, got: u32, want: u32 },
    #[error("{path}: payload size disagrees with header")]
    Truncated { path: PathBuf },
    #[error("sidecar {path}: {reason}")]
    BadSidecar { path: PathBuf, reason: String },
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> GridIoError + '_ {
    move |source| GridIoError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn sidecar_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".json");
    PathBuf::from(s)
}

/// Write a dump with `ncomp` interleaved components per sample.
pub fn write_dump(
    path: &Path,
    spec: &GridSpec,
    ncomp: u32,
    samples: impl Iterator<Item = f64>,
) -> Result<(), GridIoError> {
    let mut w = BufWriter::new(File::create(path).map_err(io_err(path))?);
    w.write_all(MAGIC).map_err(io_err(path))?;
    w.write_all(&(spec.nx as u32).to_le_bytes())
        .map_err(io_err(path))?;
    w.write_all(&(spec.ny as u32).to_le_bytes())
        .map_err(io_err(path))?;
    w.write_all(&ncomp.to_le_bytes()).map_err(io_err(path))?;
    w.write_all(&[0u8; 16]).map_err(io_err(path))?;
    let mut count = 0usize;
    for v in samples {
        w.write_all(&v.to_le_bytes()).map_err(io_err(path))?;
        count += 1;
    }
    debug_assert_eq!(count, spec.len() * ncomp as usize);
    w.flush().map_err(io_err(path))?;

    let sc = sidecar_path(path);
    let json = serde_json::to_string_pretty(spec).expect("GridSpec serializes");
    std::fs::write(&sc, json).map_err(io_err(&sc))?;
    Ok(())
}

fn read_dump(path: &Path, want_comp: u32) -> Result<(GridSpec, Vec<f64>), GridIoError> {
    let mut r = BufReader::new(File::open(path).map_err(io_err(path))?);
    let mut header = [0u8; 32];
    r.read_exact(&mut header).map_err(io_err(path))?;
    if &header[0..4] != MAGIC {
        return Err(GridIoError::BadMagic {
            path: path.to_path_buf(),
        });
    }
    let u32_at = |o: usize| u32::from_le_bytes(header[o..o + 4].try_into().unwrap());
    let (nx, ny, ncomp) = (u32_at(4), u32_at(8), u32_at(12));
    if ncomp != want_comp {
        return Err(GridIoError::WrongComponents {
            path: path.to_path_buf(),
            got: ncomp,
            want: want_comp,
        });
    }
    let n = nx as usize * ny as usize * ncomp as usize;
    let mut bytes = Vec::new();
    r.read_to_end(&mut bytes).map_err(io_err(path))?;
    if bytes.len() != n * 8 {
        return Err(GridIoError::Truncated {
            path: path.to_path_buf(),
        });
    }
    let data: Vec<f64> = bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();

    let sc = sidecar_path(path);
    let text = std::fs::read_to_string(&sc).map_err(io_err(&sc))?;
    let spec: GridSpec = serde_json::from_str(&text).map_err(|e| GridIoError::BadSidecar {
        path: sc.clone(),
        reason: e.to_string(),
    })?;
    if spec.nx != nx as usize || spec.ny != ny as usize {
        return Err(GridIoError::BadSidecar {
            path: sc,
            reason: format!(
                "sidecar grid {}x{} disagrees with dump {}x{}",
                spec.nx, spec.ny, nx, ny
            ),
        });
    }
    Ok((spec, data))
}

/// Two-component dump of a complex field (re, im).
pub fn write_complex_grid(path: &Path, g: &ComplexGrid) -> Result<(), GridIoError> {
    write_dump(path, &g.spec, 2, g.values.iter().flat_map(|v| [v.re, v.im]))
}

pub fn read_complex_grid(path: &Path) -> Result<ComplexGrid, GridIoError> {
    let (spec, data) = read_dump(path, 2)?;
    let values = data
        .chunks_exact(2)
        .map(|c| Complex64::new(c[0], c[1]))
        .collect();
    Ok(ComplexGrid { spec, values })
}

/// Two-component dump of a mapping's values (gradients are not stored).
pub fn write_field_values(path: &Path, f: &GridField) -> Result<(), GridIoError> {
    write_dump(path, &f.spec, 2, f.values.iter().flatten().copied())
}

/// Read mapping values; gradients come back zeroed with numeric provenance,
/// so callers rebuild them with `finite_diff_gradients` when needed.
pub fn read_field_values(path: &Path) -> Result<GridField, GridIoError> {
    let (spec, data) = read_dump(path, 2)?;
    let values: Vec<[f64; 2]> = data.chunks_exact(2).map(|c| [c[0], c[1]]).collect();
    Ok(GridField {
        spec,
        values,
        gradients: vec![Mat2::ZERO; spec.len()],
        provenance: Provenance::Numeric,
    })
}

/// One-component dump (masks, scalar diagnostics).
pub fn write_scalar_grid(path: &Path, spec: &GridSpec, data: &[f64]) -> Result<(), GridIoError> {
    write_dump(path, spec, 1, data.iter().copied())
}

/// Scan results as `delta,integral` rows.
pub fn write_scan_csv(path: &Path, rows: &[(f64, f64)]) -> Result<(), GridIoError> {
    let mut w = BufWriter::new(File::create(path).map_err(io_err(path))?);
    writeln!(w, "delta,integral").map_err(io_err(path))?;
    for (d, v) in rows {
        writeln!(w, "{d:.17e},{v:.17e}").map_err(io_err(path))?;
    }
    w.flush().map_err(io_err(path))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::catalog::AnalyticMap;
    use crate::fields::sample;

    #[test]
    fn complex_grid_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("mu.qcf1");
        let spec = GridSpec::square(-1.0, 1.0, 17);
        let mut g = ComplexGrid::zeros(spec);
        for (k, v) in g.values.iter_mut().enumerate() {
            *v = Complex64::new(k as f64 * 0.25, -(k as f64) * 0.5);
        }
        write_complex_grid(&path, &g).unwrap();
        let back = read_complex_grid(&path).unwrap();
        assert_eq!(back.spec, spec);
        assert_eq!(back.values, g.values);
    }

    #[test]
    fn field_values_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("f.qcf1");
        let spec = GridSpec::square(0.0, 1.0, 9);
        let f = sample(&AnalyticMap::monomial(Complex64::new(0.0, 0.0), 2), &spec).unwrap();
        write_field_values(&path, &f).unwrap();
        let back = read_field_values(&path).unwrap();
        assert_eq!(back.values, f.values);
        assert_eq!(back.provenance, Provenance::Numeric);
    }

    #[test]
    fn header_is_32_bytes_and_checked() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("g.qcf1");
        let spec = GridSpec::square(0.0, 1.0, 3);
        let g = ComplexGrid::zeros(spec);
        write_complex_grid(&path, &g).unwrap();
        let bytes = std::fs::read(&path).unwrap();
        assert_eq!(&bytes[0..4], b"QCF1");
        assert_eq!(bytes.len(), 32 + 3 * 3 * 2 * 8);
        // wrong component count is refused
        assert!(matches!(
            read_dump(&path, 1),
            Err(GridIoError::WrongComponents { .. })
        ));
        // corrupted magic is refused
        let mut bad = bytes.clone();
        bad[0] = b'X';
        std::fs::write(&path, &bad).unwrap();
        assert!(matches!(
            read_complex_grid(&path),
            Err(GridIoError::BadMagic { .. })
        ));
    }

    #[test]
    fn scan_csv_format() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("scan.csv");
        write_scan_csv(&path, &[(0.5, 1.25), (0.25, 2.5)]).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("delta,integral"));
        assert!(lines.next().unwrap().starts_with("5.0"));
    }
}
