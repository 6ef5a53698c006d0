//! Binary wave-field dumps with a text sidecar, and CSV export for small
//! grids.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use ndarray::{ArrayD, IxDyn};
use num_complex::Complex64 as C64;

use super::grid::{build_grid, AxisSpec};
use super::spec::SystemSpec;
use super::wave::WaveField;
use crate::error::{Error, Result};

const MAGIC: &str = "mpqhd-wavefield 1";

fn with_ext(stem: &Path, ext: &str) -> PathBuf {
    let mut s = stem.as_os_str().to_owned();
    s.push(ext);
    PathBuf::from(s)
}

/// Writes `<stem>.bin` (little-endian interleaved re, im in row-major order)
/// and `<stem>.hdr`.
pub fn save_wavefield(psi: &WaveField, stem: &Path) -> Result<()> {
    let mut bytes = Vec::with_capacity(psi.values.len() * 16);
    for z in psi.values.iter() {
        bytes.extend_from_slice(&z.re.to_le_bytes());
        bytes.extend_from_slice(&z.im.to_le_bytes());
    }
    let mut hdr = String::new();
    writeln!(hdr, "{MAGIC}").unwrap();
    writeln!(hdr, "axes = {}", psi.grid.axes.len()).unwrap();
    for (k, a) in psi.grid.axes.iter().enumerate() {
        writeln!(hdr, "axis{k} = {:?} {:?} {}", a.min, a.max, a.n).unwrap();
    }
    writeln!(hdr, "time_tag = {:?}", psi.time_tag).unwrap();
    writeln!(hdr, "spec_hash = {}", psi.spec.hash()).unwrap();
    fs::write(with_ext(stem, ".bin"), bytes)?;
    fs::write(with_ext(stem, ".hdr"), hdr)?;
    Ok(())
}

/// Reads a dump written by [`save_wavefield`]; `spec` must hash to the
/// recorded value.
pub fn load_wavefield(stem: &Path, spec: &SystemSpec) -> Result<WaveField> {
    let hdr = fs::read_to_string(with_ext(stem, ".hdr"))?;
    let mut lines = hdr.lines();
    if lines.next() != Some(MAGIC) {
        return Err(Error::Config("not a wave-field header".into()));
    }
    let mut axes = Vec::new();
    let mut time_tag = 0.0;
    let mut hash = String::new();
    let bad = |l: &str| Error::Config(format!("bad header line `{l}`"));
    for line in lines {
        let (key, val) = line.split_once(" = ").ok_or_else(|| bad(line))?;
        match key {
            "axes" => {}
            "time_tag" => time_tag = val.parse().map_err(|_| bad(line))?,
            "spec_hash" => hash = val.to_string(),
            k if k.starts_with("axis") => {
                let f: Vec<&str> = val.split_whitespace().collect();
                if f.len() != 3 {
                    return Err(bad(line));
                }
                axes.push(AxisSpec::new(
                    f[0].parse().map_err(|_| bad(line))?,
                    f[1].parse().map_err(|_| bad(line))?,
                    f[2].parse().map_err(|_| bad(line))?,
                ));
            }
            _ => return Err(bad(line)),
        }
    }
    if hash != spec.hash() {
        return Err(Error::Mismatch("spec hash differs from the dump".into()));
    }
    // The dump was within some cap when written; do not re-impose one here.
    let grid = build_grid(spec, axes, Some(usize::MAX))?;
    let bytes = fs::read(with_ext(stem, ".bin"))?;
    if bytes.len() != grid.n_points() * 16 {
        return Err(Error::Mismatch(format!(
            "binary has {} bytes, grid needs {}",
            bytes.len(),
            grid.n_points() * 16
        )));
    }
    let f = |c: &[u8]| f64::from_le_bytes(c.try_into().unwrap());
    let data: Vec<C64> = bytes.chunks_exact(16).map(|c| C64::new(f(&c[..8]), f(&c[8..]))).collect();
    let values = ArrayD::from_shape_vec(IxDyn(&grid.shape()), data)
        .map_err(|e| Error::Mismatch(e.to_string()))?;
    let mut psi = WaveField::new(spec.clone(), grid, values)?;
    psi.time_tag = time_tag;
    Ok(psi)
}

/// CSV with columns q0.., re, im; only for grids of at most two axes.
pub fn wavefield_csv(psi: &WaveField) -> Result<String> {
    let n = psi.grid.axes.len();
    if n > 2 {
        return Err(Error::Config(format!("CSV export supports at most 2 axes, got {n}")));
    }
    let coords: Vec<Vec<f64>> = psi.grid.axes.iter().map(|a| a.coords()).collect();
    let mut out = String::new();
    let names: Vec<String> = (0..n).map(|k| format!("q{k}")).collect();
    writeln!(out, "{},re,im", names.join(",")).unwrap();
    for (idx, z) in psi.values.indexed_iter() {
        for k in 0..n {
            write!(out, "{:?},", coords[k][idx[k]]).unwrap();
        }
        writeln!(out, "{:?},{:?}", z.re, z.im).unwrap();
    }
    Ok(out)
}
