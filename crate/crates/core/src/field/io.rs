//! Plain-text field files and CSV export.
//!
//! A field file is a single header line
//!
//! ```text
//! frontlim-field v1 dim=2 extents=201,201 origin=-2,-2 h=0.02
//! ```
//!
//! followed by one line per grid row (x varying fastest), values separated by
//! single spaces and printed in shortest round-trip form.

use std::io::{BufRead, Write};

use super::{Grid, ScalarField};
use crate::error::{Error, Result};

pub const FIELD_MAGIC: &str = "frontlim-field v1";

pub fn write_field<W: Write>(mut w: W, field: &ScalarField) -> Result<()> {
    let g = field.grid();
    let o = g.origin();
    if g.dim() == 1 {
        writeln!(
            w,
            "{FIELD_MAGIC} dim=1 extents={} origin={} h={}",
            g.nx(),
            o[0],
            g.h()
        )?;
    } else {
        writeln!(
            w,
            "{FIELD_MAGIC} dim=2 extents={},{} origin={},{} h={}",
            g.nx(),
            g.ny(),
            o[0],
            o[1],
            g.h()
        )?;
    }
    let mut line = String::new();
    for row in field.values().chunks(g.nx()) {
        line.clear();
        for (k, v) in row.iter().enumerate() {
            if k > 0 {
                line.push(' ');
            }
            line.push_str(&format!("{v:e}"));
        }
        writeln!(w, "{line}")?;
    }
    Ok(())
}

fn bad(message: impl Into<String>) -> Error {
    Error::Parse {
        path: "<field>".into(),
        message: message.into(),
    }
}

fn parse_list<T: std::str::FromStr>(s: &str) -> Result<Vec<T>> {
    s.split(',')
        .map(|t| t.trim().parse::<T>().map_err(|_| bad(format!("bad number '{t}'"))))
        .collect()
}

pub fn read_field<R: BufRead>(r: R) -> Result<ScalarField> {
    let mut lines = r.lines();
    let header = lines.next().ok_or_else(|| bad("empty file"))??;
    let rest = header
        .strip_prefix(FIELD_MAGIC)
        .ok_or_else(|| bad("missing frontlim-field v1 header"))?;
    let (mut dim, mut extents, mut origin, mut h) = (None, None, None, None);
    for kv in rest.split_whitespace() {
        let (k, v) = kv.split_once('=').ok_or_else(|| bad(format!("bad header token '{kv}'")))?;
        match k {
            "dim" => dim = Some(v.parse::<usize>().map_err(|_| bad("bad dim"))?),
            "extents" => extents = Some(parse_list::<usize>(v)?),
            "origin" => origin = Some(parse_list::<f64>(v)?),
            "h" => h = Some(v.parse::<f64>().map_err(|_| bad("bad h"))?),
            _ => return Err(bad(format!("unknown header key '{k}'"))),
        }
    }
    let (dim, extents, origin, h) = match (dim, extents, origin, h) {
        (Some(d), Some(e), Some(o), Some(h)) => (d, e, o, h),
        _ => return Err(bad("incomplete header")),
    };
    if extents.len() != dim || origin.len() != dim {
        return Err(bad("header lists do not match dim"));
    }
    let grid = match dim {
        1 => Grid::new_1d(origin[0], h, extents[0])?,
        2 => Grid::new_2d([origin[0], origin[1]], h, [extents[0], extents[1]])?,
        d => return Err(bad(format!("unsupported dim {d}"))),
    };
    let mut values = Vec::with_capacity(grid.len());
    for line in lines {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let before = values.len();
        for t in line.split_whitespace() {
            values.push(t.parse::<f64>().map_err(|_| bad(format!("bad value '{t}'")))?);
        }
        if values.len() - before != grid.nx() {
            return Err(bad("row length does not match extents"));
        }
    }
    ScalarField::new(grid, values)
}

/// CSV with columns `x,value` (1D) or `x,y,value` (2D).
pub fn write_csv<W: Write>(mut w: W, field: &ScalarField) -> Result<()> {
    let g = field.grid();
    if g.dim() == 1 {
        writeln!(w, "x,value")?;
    } else {
        writeln!(w, "x,y,value")?;
    }
    for (k, v) in field.values().iter().enumerate() {
        let p = g.coord(k);
        if g.dim() == 1 {
            writeln!(w, "{},{v:e}", p[0])?;
        } else {
            writeln!(w, "{},{},{v:e}", p[0], p[1])?;
        }
    }
    Ok(())
}
