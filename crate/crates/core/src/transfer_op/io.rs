//! Plain-text and binary files for grid functions.
//!
//! CSV layout: a header `# fiber=<j> N=<n> alpha=<α> space=<interval|circle>`,
//! a column line, then one row per node: `x,re,im` followed by `re,im` for
//! every further component. Binary layout (little endian): magic `SQGF`,
//! `u32` version, `i64` fiber, `u64` N, `u8` space, `f64` α, `u32`
//! component count, then the values component-major as `(re, im)` pairs.

use std::io::{BufRead, Read, Write};

use num_complex::Complex64;

use super::grid::{Grid, GridFunction};
use crate::error::{Error, Result};
use crate::map_zoo::Space;

const MAGIC: &[u8; 4] = b"SQGF";
const VERSION: u32 = 1;

fn io_err(e: std::io::Error) -> Error {
    Error::Numeric(format!("i/o: {e}"))
}

fn space_name(s: Space) -> &'static str {
    match s {
        Space::Interval => "interval",
        Space::Circle => "circle",
    }
}

fn check_components(components: &[GridFunction]) -> Result<&GridFunction> {
    let first = components.first().ok_or_else(|| Error::Parameter("no components to write".into()))?;
    if components.iter().any(|c| c.grid != first.grid || c.fiber != first.fiber) {
        return Err(Error::Parameter("components must share fiber and grid".into()));
    }
    Ok(first)
}

pub fn write_csv<W: Write>(mut w: W, components: &[GridFunction], alpha: f64) -> Result<()> {
    let first = check_components(components)?;
    let g = first.grid;
    writeln!(w, "# fiber={} N={} alpha={} space={}", first.fiber, g.n, alpha, space_name(g.space)).map_err(io_err)?;
    let mut cols = String::from("x");
    for a in 0..components.len() {
        if a == 0 {
            cols.push_str(",re,im");
        } else {
            cols.push_str(&format!(",re{a},im{a}"));
        }
    }
    writeln!(w, "{cols}").map_err(io_err)?;
    for k in 0..g.len() {
        let mut line = format!("{:e}", g.node(k));
        for c in components {
            let v = c.values[k];
            line.push_str(&format!(",{:e},{:e}", v.re, v.im));
        }
        writeln!(w, "{line}").map_err(io_err)?;
    }
    Ok(())
}

/// Returns the components and the α recorded in the header.
pub fn read_csv<R: BufRead>(r: R) -> Result<(Vec<GridFunction>, f64)> {
    let mut lines = r.lines();
    let header = lines.next().ok_or_else(|| Error::Parameter("empty grid-function file".into()))?.map_err(io_err)?;
    let mut fiber = None;
    let mut n = None;
    let mut alpha = None;
    let mut space = Space::Interval;
    for tok in header.trim_start_matches('#').split_whitespace() {
        let (k, v) = tok.split_once('=').ok_or_else(|| Error::Parameter(format!("bad header token {tok}")))?;
        let bad = || Error::Parameter(format!("bad header value {tok}"));
        match k {
            "fiber" => fiber = Some(v.parse::<i64>().map_err(|_| bad())?),
            "N" => n = Some(v.parse::<usize>().map_err(|_| bad())?),
            "alpha" => alpha = Some(v.parse::<f64>().map_err(|_| bad())?),
            "space" => {
                space = match v {
                    "interval" => Space::Interval,
                    "circle" => Space::Circle,
                    _ => return Err(bad()),
                }
            }
            _ => {}
        }
    }
    let missing = |what: &str| Error::Parameter(format!("header lacks {what}"));
    let grid = Grid::new(space, n.ok_or_else(|| missing("N"))?)?;
    let fiber = fiber.ok_or_else(|| missing("fiber"))?;
    let alpha = alpha.ok_or_else(|| missing("alpha"))?;
    lines.next();
    let mut cols: Vec<Vec<Complex64>> = Vec::new();
    for line in lines {
        let line = line.map_err(io_err)?;
        if line.trim().is_empty() {
            continue;
        }
        let nums: Vec<f64> = line
            .split(',')
            .map(|t| t.trim().parse::<f64>().map_err(|_| Error::Parameter(format!("bad number in row: {line}"))))
            .collect::<Result<_>>()?;
        if nums.len() < 3 || nums.len() % 2 == 0 {
            return Err(Error::Parameter(format!("bad row: {line}")));
        }
        let comps = (nums.len() - 1) / 2;
        if cols.is_empty() {
            cols = vec![Vec::with_capacity(grid.len()); comps];
        } else if cols.len() != comps {
            return Err(Error::Parameter("ragged rows".into()));
        }
        for a in 0..comps {
            cols[a].push(Complex64::new(nums[1 + 2 * a], nums[2 + 2 * a]));
        }
    }
    let fns = cols.into_iter().map(|v| GridFunction::new(fiber, grid, v)).collect::<Result<Vec<_>>>()?;
    Ok((fns, alpha))
}

pub fn write_binary<W: Write>(mut w: W, components: &[GridFunction], alpha: f64) -> Result<()> {
    let first = check_components(components)?;
    let g = first.grid;
    let mut buf = Vec::with_capacity(40 + components.len() * g.len() * 16);
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&VERSION.to_le_bytes());
    buf.extend_from_slice(&first.fiber.to_le_bytes());
    buf.extend_from_slice(&(g.n as u64).to_le_bytes());
    buf.push(u8::from(g.space == Space::Circle));
    buf.extend_from_slice(&alpha.to_le_bytes());
    buf.extend_from_slice(&(components.len() as u32).to_le_bytes());
    for c in components {
        for v in &c.values {
            buf.extend_from_slice(&v.re.to_le_bytes());
            buf.extend_from_slice(&v.im.to_le_bytes());
        }
    }
    w.write_all(&buf).map_err(io_err)
}

pub fn read_binary<R: Read>(mut r: R) -> Result<(Vec<GridFunction>, f64)> {
    let mut buf = Vec::new();
    r.read_to_end(&mut buf).map_err(io_err)?;
    let mut pos = 0usize;
    let mut take = |n: usize| -> Result<&[u8]> {
        let s = buf.get(pos..pos + n).ok_or_else(|| Error::Parameter("truncated binary grid function".into()))?;
        pos += n;
        Ok(s)
    };
    if take(4)? != MAGIC {
        return Err(Error::Parameter("not a grid-function file".into()));
    }
    let version = u32::from_le_bytes(take(4)?.try_into().expect("4 bytes"));
    if version != VERSION {
        return Err(Error::Parameter(format!("unsupported grid-function version {version}")));
    }
    let fiber = i64::from_le_bytes(take(8)?.try_into().expect("8 bytes"));
    let n = u64::from_le_bytes(take(8)?.try_into().expect("8 bytes")) as usize;
    let space = if take(1)?[0] == 1 { Space::Circle } else { Space::Interval };
    let alpha = f64::from_le_bytes(take(8)?.try_into().expect("8 bytes"));
    let comps = u32::from_le_bytes(take(4)?.try_into().expect("4 bytes")) as usize;
    let grid = Grid::new(space, n)?;
    let mut out = Vec::with_capacity(comps);
    for _ in 0..comps {
        let mut v = Vec::with_capacity(grid.len());
        for _ in 0..grid.len() {
            let re = f64::from_le_bytes(take(8)?.try_into().expect("8 bytes"));
            let im = f64::from_le_bytes(take(8)?.try_into().expect("8 bytes"));
            v.push(Complex64::new(re, im));
        }
        out.push(GridFunction::new(fiber, grid, v)?);
    }
    Ok((out, alpha))
}
