//! Lattice grids as CSV: one row per node in lexicographic lattice order,
//! columns `x, t1..t{n−1}, u1..un, p1..pn`, floats with 17 significant digits.

use std::io::{Read, Write};

use nijenhuis::flows::{AxisSpec, GridMeta, SolutionGrid};

use crate::CliError;

fn float(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn header(grid: &SolutionGrid) -> Vec<String> {
    let mut h = grid.axis_names.clone();
    h.extend((1..=grid.n).map(|i| format!("u{i}")));
    if grid.p.is_some() {
        h.extend((1..=grid.n).map(|i| format!("p{i}")));
    }
    h
}

pub fn write_grid_csv<W: Write>(grid: &SolutionGrid, out: W) -> Result<(), CliError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(header(grid))?;
    let mut row = Vec::with_capacity(grid.axes.len() + 2 * grid.n);
    for flat in 0..grid.len() {
        row.clear();
        row.extend(grid.coordinates(flat).into_iter().map(float));
        row.extend(grid.u[flat].iter().copied().map(float));
        if let Some(p) = &grid.p {
            row.extend(p[flat].iter().copied().map(float));
        }
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn grid_csv_string(grid: &SolutionGrid) -> Result<String, CliError> {
    let mut buf = Vec::new();
    write_grid_csv(grid, &mut buf)?;
    String::from_utf8(buf).map_err(|e| CliError::Input(e.to_string()))
}

fn bad(msg: impl Into<String>) -> CliError {
    CliError::Input(format!("grid csv: {}", msg.into()))
}

fn numbered(name: &str, prefix: char) -> Option<usize> {
    name.strip_prefix(prefix)?.parse().ok()
}

/// Reads a grid written by [`write_grid_csv`], rebuilding the axes from the
/// coordinate columns.
pub fn read_grid_csv<R: Read>(input: R) -> Result<SolutionGrid, CliError> {
    let mut r = csv::Reader::from_reader(input);
    let header: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
    let first_u = header
        .iter()
        .position(|h| h == "u1")
        .ok_or_else(|| bad("no u1 column"))?;
    let naxes = first_u;
    let n = header[naxes..]
        .iter()
        .take_while(|h| numbered(h, 'u').is_some())
        .count();
    let with_p = header.len() == naxes + 2 * n;
    if n == 0 || (!with_p && header.len() != naxes + n) {
        return Err(bad("unexpected column layout"));
    }
    for i in 0..n {
        if header[naxes + i] != format!("u{}", i + 1)
            || (with_p && header[naxes + n + i] != format!("p{}", i + 1))
        {
            return Err(bad("unexpected column layout"));
        }
    }

    let mut coords: Vec<Vec<f64>> = Vec::new();
    let mut u = Vec::new();
    let mut p = Vec::new();
    for (line, rec) in r.records().enumerate() {
        let rec = rec?;
        if rec.len() != header.len() {
            return Err(bad(format!("row {} has {} fields", line + 1, rec.len())));
        }
        let vals = rec
            .iter()
            .map(|s| {
                s.trim()
                    .parse::<f64>()
                    .map_err(|e| bad(format!("row {}: {e}", line + 1)))
            })
            .collect::<Result<Vec<_>, _>>()?;
        coords.push(vals[..naxes].to_vec());
        u.push(vals[naxes..naxes + n].to_vec());
        if with_p {
            p.push(vals[naxes + n..].to_vec());
        }
    }
    if coords.is_empty() {
        return Err(bad("no rows"));
    }

    let mut axes = Vec::with_capacity(naxes);
    for k in 0..naxes {
        let mut distinct: Vec<f64> = Vec::new();
        for c in &coords {
            if !distinct.iter().any(|d| d.to_bits() == c[k].to_bits()) {
                distinct.push(c[k]);
            }
        }
        let (min, max) = (distinct[0], *distinct.last().expect("nonempty"));
        axes.push(AxisSpec::new(min, max, distinct.len()).map_err(|e| bad(e.to_string()))?);
    }
    let grid = SolutionGrid {
        axes,
        axis_names: header[..naxes].to_vec(),
        n,
        u,
        p: with_p.then_some(p),
        meta: GridMeta::default(),
        flow_generated: with_p,
    };
    if !grid.is_consistent() {
        return Err(bad("row count does not match the lattice"));
    }
    for (flat, c) in coords.iter().enumerate() {
        if grid.coordinates(flat) != *c {
            return Err(bad(format!("row {} is out of lattice order", flat + 1)));
        }
    }
    Ok(grid)
}
