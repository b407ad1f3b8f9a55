//! Plain-text checkpoints:
//!
//! ```text
//! prelu-checkpoint 1
//! p h D C
//! <h lines of D values: W row-major>
//! <h lines of C values: v>
//! ```
//!
//! Floats are written in shortest round-trip form, so a reload is bit-exact.

use std::io::{BufRead, Write};

use ndarray::Array2;

use super::PreluNet;
use crate::{Error, Result};

pub const CHECKPOINT_VERSION: u32 = 1;
const MAGIC: &str = "prelu-checkpoint";

pub fn write_checkpoint<W: Write>(net: &PreluNet, mut w: W) -> Result<()> {
    writeln!(w, "{MAGIC} {CHECKPOINT_VERSION}")?;
    writeln!(w, "{:e} {} {} {}", net.p, net.width(), net.dim(), net.outputs())?;
    for m in [&net.w, &net.v] {
        for row in m.rows() {
            let line: Vec<String> = row.iter().map(|x| format!("{x:e}")).collect();
            writeln!(w, "{}", line.join(" "))?;
        }
    }
    Ok(())
}

fn bad(msg: impl Into<String>) -> Error {
    Error::Config(format!("checkpoint: {}", msg.into()))
}

fn parse_row(line: Option<std::io::Result<String>>, len: usize) -> Result<Vec<f64>> {
    let line = line.ok_or_else(|| bad("unexpected end of file"))??;
    let vals = line
        .split_whitespace()
        .map(|t| t.parse::<f64>().map_err(|_| bad(format!("bad number {t:?}"))))
        .collect::<Result<Vec<_>>>()?;
    if vals.len() != len {
        return Err(bad(format!("expected {len} values, found {}", vals.len())));
    }
    Ok(vals)
}

pub fn read_checkpoint<R: BufRead>(r: R) -> Result<PreluNet> {
    let mut lines = r.lines();
    let head = lines.next().ok_or_else(|| bad("empty file"))??;
    let version =
        head.strip_prefix(MAGIC).and_then(|v| v.trim().parse::<u32>().ok()).ok_or_else(|| bad("missing header"))?;
    if version != CHECKPOINT_VERSION {
        return Err(bad(format!("unsupported version {version}")));
    }
    let dims = lines.next().ok_or_else(|| bad("missing shape line"))??;
    let fields: Vec<&str> = dims.split_whitespace().collect();
    if fields.len() != 4 {
        return Err(bad("shape line needs p h D C"));
    }
    let p: f64 = fields[0].parse().map_err(|_| bad("bad p"))?;
    let sizes =
        fields[1..].iter().map(|t| t.parse::<usize>().map_err(|_| bad("bad size"))).collect::<Result<Vec<_>>>()?;
    let (h, d, c) = (sizes[0], sizes[1], sizes[2]);
    let mut wv = Vec::with_capacity(h * d);
    for _ in 0..h {
        wv.extend(parse_row(lines.next(), d)?);
    }
    let mut vv = Vec::with_capacity(h * c);
    for _ in 0..h {
        vv.extend(parse_row(lines.next(), c)?);
    }
    let w = Array2::from_shape_vec((h, d), wv).map_err(|e| bad(e.to_string()))?;
    let v = Array2::from_shape_vec((h, c), vv).map_err(|e| bad(e.to_string()))?;
    PreluNet::new(w, v, p)
}
