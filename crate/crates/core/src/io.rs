//! Trajectory output: long-format CSV and a compact binary dump.
//!
//! Binary layout, all little-endian:
//!
//! ```text
//! magic      8 bytes  "PHIHEAT\0"
//! n_t        u64
//! n_modes    u64
//! n_x        u64
//! mode_dim   u64
//! n_base     u64      base angles among the mode_dim
//! gamma      f64
//! modes      n_modes * mode_dim i64
//! x nodes    n_x f64
//! t nodes    n_t f64
//! data       n_t * n_modes * n_x (re f64, im f64), time-major then mode then x
//! ```
//!
//! Coefficients are stored raw, so `u = x^gamma Σ c e^{ik·θ}`.

use std::io::{Read, Write};
use std::sync::Arc;

use num_complex::Complex64;

use crate::error::{PhiError, Result};
use crate::field::{Field, Grid, ModeSet};

pub const MAGIC: &[u8; 8] = b"PHIHEAT\0";

fn mode_label(m: &[i64]) -> String {
    m.iter().map(|k| k.to_string()).collect::<Vec<_>>().join(";")
}

/// Writes `t,x,mode,re,im` rows of the weighted coefficients
/// `x^gamma c`. Modes are labelled `k1;k2;...`.
pub fn write_trajectory_csv<W: Write>(field: &Field, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["t", "x", "mode", "re", "im"])?;
    let g = &field.grid;
    let labels: Vec<String> = g.modes.iter().map(mode_label).collect();
    for (it, t) in g.t_nodes.iter().enumerate() {
        for (mi, label) in labels.iter().enumerate() {
            for (ix, x) in g.x_nodes.iter().enumerate() {
                let c = field.at(it, mi, ix) * x.powf(field.gamma);
                w.write_record([
                    format!("{t:.17e}"),
                    format!("{x:.17e}"),
                    label.clone(),
                    format!("{:.17e}", c.re),
                    format!("{:.17e}", c.im),
                ])?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

pub fn write_binary<W: Write>(field: &Field, mut out: W) -> Result<()> {
    let g = &field.grid;
    out.write_all(MAGIC)?;
    for n in [g.n_t(), g.n_modes(), g.n_x(), g.modes.dims(), g.modes.b] {
        out.write_all(&(n as u64).to_le_bytes())?;
    }
    out.write_all(&field.gamma.to_le_bytes())?;
    for m in g.modes.iter() {
        for k in m {
            out.write_all(&k.to_le_bytes())?;
        }
    }
    for v in g.x_nodes.iter().chain(&g.t_nodes) {
        out.write_all(&v.to_le_bytes())?;
    }
    for c in &field.data {
        out.write_all(&c.re.to_le_bytes())?;
        out.write_all(&c.im.to_le_bytes())?;
    }
    out.flush()?;
    Ok(())
}

fn read_u64<R: Read>(r: &mut R) -> Result<u64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(u64::from_le_bytes(b))
}

fn read_f64<R: Read>(r: &mut R) -> Result<f64> {
    Ok(f64::from_bits(read_u64(r)?))
}

/// Reads a dump written by [`write_binary`]. The mode box is rebuilt from
/// the stored indices and must be a full `ModeSet` box.
pub fn read_binary<R: Read>(mut input: R) -> Result<Field> {
    let mut magic = [0u8; 8];
    input.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(PhiError::Config("not a phi-heat binary dump".into()));
    }
    let n_t = read_u64(&mut input)? as usize;
    let n_modes = read_u64(&mut input)? as usize;
    let n_x = read_u64(&mut input)? as usize;
    let dim = read_u64(&mut input)? as usize;
    let n_base = read_u64(&mut input)? as usize;
    if n_base > dim {
        return Err(PhiError::Config("corrupt header: n_base > mode_dim".into()));
    }
    let gamma = read_f64(&mut input)?;
    let mut modes = Vec::with_capacity(n_modes);
    for _ in 0..n_modes {
        let mut m = Vec::with_capacity(dim);
        for _ in 0..dim {
            m.push(read_u64(&mut input)? as i64);
        }
        modes.push(m);
    }
    let x_nodes = (0..n_x).map(|_| read_f64(&mut input)).collect::<Result<Vec<_>>>()?;
    let t_nodes = (0..n_t).map(|_| read_f64(&mut input)).collect::<Result<Vec<_>>>()?;
    let modeset = rebuild_modes(&modes, dim, n_base)?;
    let grid = Arc::new(Grid::from_nodes(x_nodes, modeset, t_nodes)?);
    let mut data = Vec::with_capacity(n_t * n_modes * n_x);
    for _ in 0..n_t * n_modes * n_x {
        let re = read_f64(&mut input)?;
        let im = read_f64(&mut input)?;
        data.push(Complex64::new(re, im));
    }
    Ok(Field { grid, gamma, data })
}

fn rebuild_modes(modes: &[Vec<i64>], dim: usize, b: usize) -> Result<ModeSet> {
    let range = |d: usize| modes.iter().map(|m| m[d].unsigned_abs() as usize).max().unwrap_or(0);
    let k_max = if b > 0 { range(0) } else { 0 };
    let l_max = if dim > b { range(b) } else { 0 };
    let set = ModeSet::new(b, dim - b, k_max, l_max);
    if set.len() != modes.len() || set.iter().zip(modes).any(|(a, b)| a != b.as_slice()) {
        return Err(PhiError::Config("stored modes do not form a mode box".into()));
    }
    Ok(set)
}
