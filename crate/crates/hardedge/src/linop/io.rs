//! KernelMatrix files.
//!
//! CSV: `#`-prefixed header lines `dim`, `interval`, `grid_hash`, `label`, then a
//! column header `node,weight,k0,...` and one row per node holding the node, its
//! weight and the matrix row. Binary: magic `HEKM`, version 1, then little-endian
//! dim (u64), interval (2 x f64), 16 hash bytes, label length (u64) and bytes,
//! nodes, weights and the row-major entries (f64 each).

use super::{Grid, KernelMatrix};
use crate::error::{Error, Result};
use nalgebra::DMatrix;
use std::io::{BufRead, Read, Write};
use std::sync::Arc;

const MAGIC: &[u8; 4] = b"HEKM";

fn bad(msg: impl Into<String>) -> Error {
    Error::Validation(msg.into())
}

pub fn write_csv<W: Write>(m: &KernelMatrix, mut w: W) -> Result<()> {
    let g = &m.grid;
    writeln!(w, "# dim: {}", m.dim())?;
    writeln!(w, "# interval: {},{}", g.interval.0, g.interval.1)?;
    writeln!(w, "# grid_hash: {}", g.hash())?;
    writeln!(w, "# label: {}", m.label)?;
    let cols: Vec<String> = (0..m.dim()).map(|j| format!("k{j}")).collect();
    writeln!(w, "node,weight,{}", cols.join(","))?;
    for i in 0..m.dim() {
        let row: Vec<String> = (0..m.dim()).map(|j| format!("{:e}", m.entries[(i, j)])).collect();
        writeln!(w, "{:e},{:e},{}", g.nodes[i], g.weights[i], row.join(","))?;
    }
    Ok(())
}

fn parse_f(s: &str) -> Result<f64> {
    s.trim().parse::<f64>().map_err(|_| bad(format!("not a number: {s:?}")))
}

pub fn read_csv<R: BufRead>(r: R) -> Result<KernelMatrix> {
    let mut dim = None;
    let mut interval = None;
    let mut hash = None;
    let mut label = String::new();
    let mut nodes = vec![];
    let mut weights = vec![];
    let mut rows: Vec<f64> = vec![];
    let mut seen_header = false;
    for line in r.lines() {
        let line = line?;
        if let Some(meta) = line.strip_prefix('#') {
            let (k, v) = meta.split_once(':').ok_or_else(|| bad("malformed header line"))?;
            let v = v.trim();
            match k.trim() {
                "dim" => dim = Some(v.parse::<usize>().map_err(|_| bad("bad dim"))?),
                "interval" => {
                    let (a, b) = v.split_once(',').ok_or_else(|| bad("bad interval"))?;
                    interval = Some((parse_f(a)?, parse_f(b)?));
                }
                "grid_hash" => hash = Some(v.to_string()),
                "label" => label = v.to_string(),
                _ => {}
            }
            continue;
        }
        if !seen_header {
            seen_header = true;
            continue;
        }
        if line.trim().is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split(',').collect();
        let n = dim.ok_or_else(|| bad("missing dim header"))?;
        if f.len() != n + 2 {
            return Err(bad(format!("row has {} fields, expected {}", f.len(), n + 2)));
        }
        nodes.push(parse_f(f[0])?);
        weights.push(parse_f(f[1])?);
        for v in &f[2..] {
            rows.push(parse_f(v)?);
        }
    }
    let n = dim.ok_or_else(|| bad("missing dim header"))?;
    if nodes.len() != n {
        return Err(bad(format!("expected {n} rows, found {}", nodes.len())));
    }
    let grid = Grid { nodes, weights, interval: interval.ok_or_else(|| bad("missing interval"))?, cutoff: None };
    if let Some(h) = hash {
        if h != grid.hash() {
            return Err(bad("grid hash mismatch"));
        }
    }
    KernelMatrix::new(DMatrix::from_row_slice(n, n, &rows), Arc::new(grid), label)
}

pub fn write_binary<W: Write>(m: &KernelMatrix, mut w: W) -> Result<()> {
    let g = &m.grid;
    w.write_all(MAGIC)?;
    w.write_all(&1u32.to_le_bytes())?;
    w.write_all(&(m.dim() as u64).to_le_bytes())?;
    w.write_all(&g.interval.0.to_le_bytes())?;
    w.write_all(&g.interval.1.to_le_bytes())?;
    let h = g.hash();
    let mut hb = [0u8; 16];
    hb[..h.len().min(16)].copy_from_slice(&h.as_bytes()[..h.len().min(16)]);
    w.write_all(&hb)?;
    w.write_all(&(m.label.len() as u64).to_le_bytes())?;
    w.write_all(m.label.as_bytes())?;
    for v in g.nodes.iter().chain(&g.weights) {
        w.write_all(&v.to_le_bytes())?;
    }
    for i in 0..m.dim() {
        for j in 0..m.dim() {
            w.write_all(&m.entries[(i, j)].to_le_bytes())?;
        }
    }
    Ok(())
}

fn read_u64<R: Read>(r: &mut R) -> Result<u64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(u64::from_le_bytes(b))
}

fn read_f64<R: Read>(r: &mut R) -> Result<f64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(f64::from_le_bytes(b))
}

pub fn read_binary<R: Read>(mut r: R) -> Result<KernelMatrix> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(bad("not a kernel matrix file"));
    }
    let mut v = [0u8; 4];
    r.read_exact(&mut v)?;
    if u32::from_le_bytes(v) != 1 {
        return Err(bad("unsupported kernel matrix file version"));
    }
    let n = read_u64(&mut r)? as usize;
    let interval = (read_f64(&mut r)?, read_f64(&mut r)?);
    let mut hb = [0u8; 16];
    r.read_exact(&mut hb)?;
    let ll = read_u64(&mut r)? as usize;
    if ll > 1 << 20 {
        return Err(bad("label too long"));
    }
    let mut lb = vec![0u8; ll];
    r.read_exact(&mut lb)?;
    let label = String::from_utf8(lb).map_err(|_| bad("label is not utf-8"))?;
    let mut nodes = Vec::with_capacity(n);
    let mut weights = Vec::with_capacity(n);
    for _ in 0..n {
        nodes.push(read_f64(&mut r)?);
    }
    for _ in 0..n {
        weights.push(read_f64(&mut r)?);
    }
    let mut e = Vec::with_capacity(n * n);
    for _ in 0..n * n {
        e.push(read_f64(&mut r)?);
    }
    let grid = Grid { nodes, weights, interval, cutoff: None };
    if grid.hash().as_bytes() != &hb[..] {
        return Err(bad("grid hash mismatch"));
    }
    KernelMatrix::new(DMatrix::from_row_slice(n, n, &e), Arc::new(grid), label)
}
