//! Plain-text snapshot files.
//!
//! ```text
//! plapsys-field v1 n=2 k=2 cells=64,64 L=8 t=0.5
//! 1.2345678901234567e-3 0.0000000000000000e0
//! ...
//! ```
//!
//! One line per cell in row-major order, `k` values per line, each written
//! with 17 significant digits.

use std::io::{BufRead, Write};

use crate::error::{Error, Result};
use crate::field::{Grid, VectorField};

const MAGIC: &str = "plapsys-field";
const VERSION: &str = "v1";

pub fn write_snapshot<W: Write>(field: &VectorField, mut w: W) -> Result<()> {
    let grid = field.grid();
    let cells = grid
        .cells()
        .iter()
        .map(|c| c.to_string())
        .collect::<Vec<_>>()
        .join(",");
    writeln!(
        w,
        "{MAGIC} {VERSION} n={} k={} cells={} L={} t={}",
        grid.n(),
        field.k(),
        cells,
        grid.half_extent(),
        field.time()
    )?;
    let mut line = String::new();
    for idx in 0..grid.len() {
        line.clear();
        for (l, c) in field.components().iter().enumerate() {
            if l > 0 {
                line.push(' ');
            }
            line.push_str(&format!("{:.16e}", c[idx]));
        }
        line.push('\n');
        w.write_all(line.as_bytes())?;
    }
    Ok(())
}

pub fn snapshot_to_string(field: &VectorField) -> String {
    let mut buf = Vec::new();
    write_snapshot(field, &mut buf).expect("writing to a Vec cannot fail");
    String::from_utf8(buf).expect("snapshot output is ASCII")
}

fn format_err(line: usize, message: impl Into<String>) -> Error {
    Error::Format {
        line,
        message: message.into(),
    }
}

struct Header {
    n: usize,
    k: usize,
    cells: Vec<usize>,
    half_extent: f64,
    time: f64,
}

fn parse_header(text: &str) -> Result<Header> {
    let mut parts = text.split_whitespace();
    if parts.next() != Some(MAGIC) {
        return Err(format_err(1, format!("expected `{MAGIC}` header")));
    }
    if parts.next() != Some(VERSION) {
        return Err(format_err(1, format!("unsupported version, expected `{VERSION}`")));
    }
    let (mut n, mut k, mut cells, mut half_extent, mut time) = (None, None, None, None, None);
    for kv in parts {
        let (key, value) = kv
            .split_once('=')
            .ok_or_else(|| format_err(1, format!("malformed header field `{kv}`")))?;
        let bad = |_| format_err(1, format!("cannot parse `{kv}`"));
        match key {
            "n" => n = Some(value.parse::<usize>().map_err(bad)?),
            "k" => k = Some(value.parse::<usize>().map_err(bad)?),
            "cells" => {
                cells = Some(
                    value
                        .split(',')
                        .map(|c| c.parse::<usize>())
                        .collect::<std::result::Result<Vec<_>, _>>()
                        .map_err(|_| format_err(1, format!("cannot parse `{kv}`")))?,
                )
            }
            "L" => half_extent = Some(value.parse::<f64>().map_err(|_| format_err(1, format!("cannot parse `{kv}`")))?),
            "t" => time = Some(value.parse::<f64>().map_err(|_| format_err(1, format!("cannot parse `{kv}`")))?),
            _ => return Err(format_err(1, format!("unknown header field `{key}`"))),
        }
    }
    let missing = |name: &str| format_err(1, format!("header is missing `{name}`"));
    Ok(Header {
        n: n.ok_or_else(|| missing("n"))?,
        k: k.ok_or_else(|| missing("k"))?,
        cells: cells.ok_or_else(|| missing("cells"))?,
        half_extent: half_extent.ok_or_else(|| missing("L"))?,
        time: time.ok_or_else(|| missing("t"))?,
    })
}

pub fn read_snapshot<R: BufRead>(r: R) -> Result<VectorField> {
    let mut lines = r.lines();
    let header = lines
        .next()
        .ok_or_else(|| format_err(1, "empty snapshot"))??;
    let header = parse_header(&header)?;
    if header.cells.len() != header.n {
        return Err(format_err(1, "cells count does not match n"));
    }
    let grid = Grid::new(header.n, &header.cells, header.half_extent)?;
    let mut components = vec![Vec::with_capacity(grid.len()); header.k];
    for idx in 0..grid.len() {
        let lineno = idx + 2;
        let line = lines
            .next()
            .ok_or_else(|| format_err(lineno, "unexpected end of file"))??;
        let mut count = 0;
        for (l, tok) in line.split_whitespace().enumerate() {
            if l >= header.k {
                return Err(format_err(lineno, format!("expected {} values", header.k)));
            }
            let v: f64 = tok
                .parse()
                .map_err(|_| format_err(lineno, format!("cannot parse `{tok}`")))?;
            components[l].push(v);
            count += 1;
        }
        if count != header.k {
            return Err(format_err(lineno, format!("expected {} values, got {count}", header.k)));
        }
    }
    if let Some(extra) = lines.next() {
        if !extra?.trim().is_empty() {
            return Err(format_err(grid.len() + 2, "trailing data after last cell"));
        }
    }
    VectorField::new(grid, components, header.time)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn header_layout() {
        let g = Grid::new(2, &[3, 2], 1.5).unwrap();
        let f = VectorField::zeros(g, 2, 0.25).unwrap();
        let text = snapshot_to_string(&f);
        let first = text.lines().next().unwrap();
        assert_eq!(first, "plapsys-field v1 n=2 k=2 cells=3,2 L=1.5 t=0.25");
        assert_eq!(text.lines().count(), 7);
        assert_eq!(text.lines().nth(1).unwrap(), "0.0000000000000000e0 0.0000000000000000e0");
    }

    #[test]
    fn rejects_malformed_input() {
        assert!(read_snapshot("nope v1\n".as_bytes()).is_err());
        let short = "plapsys-field v1 n=1 k=1 cells=2 L=1 t=0\n1.0\n";
        assert!(matches!(read_snapshot(short.as_bytes()), Err(Error::Format { line: 3, .. })));
        let wide = "plapsys-field v1 n=1 k=1 cells=1 L=1 t=0\n1.0 2.0\n";
        assert!(read_snapshot(wide.as_bytes()).is_err());
    }

    proptest! {
        #[test]
        fn round_trip_is_bit_exact(values in prop::collection::vec(0.0f64..1e6, 12), t in 0.0f64..100.0, l in 0.1f64..50.0) {
            let g = Grid::new(2, &[3, 2], l).unwrap();
            let comps = vec![values[..6].to_vec(), values[6..].to_vec()];
            let f = VectorField::new(g, comps, t).unwrap();
            let back = read_snapshot(snapshot_to_string(&f).as_bytes()).unwrap();
            prop_assert_eq!(back, f);
        }
    }
}
