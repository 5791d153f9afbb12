//! CSV field dump: `u1..un, r, v, tau, kappa_1..kappa_n, sigma_k, cone_margin`,
//! one row per node in grid order, header mandatory.

use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use super::grid::{BaseGrid, RadialGraphField};
use super::jet::HypersurfaceJet;
use super::GeometryError;
use crate::symfunc::cone_test;

/// Parsed contents of one data row.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldRow {
    pub u: Vec<f64>,
    pub r: f64,
}

fn header(n: usize) -> Vec<String> {
    let mut cols: Vec<String> = (1..=n).map(|i| format!("u{i}")).collect();
    cols.extend(["r", "v", "tau"].map(String::from));
    cols.extend((1..=n).map(|i| format!("kappa_{i}")));
    cols.extend(["sigma_k", "cone_margin"].map(String::from));
    cols
}

pub fn dump_field<W: Write>(
    writer: W,
    field: &RadialGraphField,
    jets: &[HypersurfaceJet],
    k: usize,
) -> Result<(), GeometryError> {
    let grid = field.grid;
    let n = grid.dim();
    if jets.len() != grid.len() {
        return Err(GeometryError::ShapeMismatch {
            expected: format!("{} jets", grid.len()),
            found: format!("{}", jets.len()),
        });
    }
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(header(n))?;
    let mut record: Vec<String> = Vec::with_capacity(2 * n + 5);
    for (node, jet) in jets.iter().enumerate() {
        let cone = cone_test(k, &jet.kappa).map_err(|e| GeometryError::InvalidGrid(e.to_string()))?;
        record.clear();
        let u = grid.position(node);
        record.extend(u[..n].iter().map(|x| x.to_string()));
        record.push(field.values[node].to_string());
        record.push(jet.v.to_string());
        record.push(jet.tau.to_string());
        record.extend(jet.kappa.iter().map(|x| x.to_string()));
        record.push(crate::symfunc::sigma(k, &jet.kappa).to_string());
        record.push(cone.margin.to_string());
        w.write_record(&record)?;
    }
    w.flush()?;
    Ok(())
}

pub fn dump_field_to_path(
    path: &Path,
    field: &RadialGraphField,
    jets: &[HypersurfaceJet],
    k: usize,
) -> Result<(), GeometryError> {
    dump_field(File::create(path)?, field, jets, k)
}

/// Reads a dump back onto `grid`. Every cell must be a finite number and the
/// `u` columns must match the grid node of their row. Admissibility is not
/// checked.
pub fn parse_field<R: Read>(
    reader: R,
    grid: BaseGrid,
    annulus: (f64, f64),
) -> Result<RadialGraphField, GeometryError> {
    let n = grid.dim();
    let expected = header(n);
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let found: Vec<String> = rdr.headers()?.iter().map(|s| s.trim().to_string()).collect();
    if found != expected {
        return Err(GeometryError::ShapeMismatch {
            expected: expected.join(","),
            found: found.join(","),
        });
    }
    let mut values = Vec::with_capacity(grid.len());
    for (i, rec) in rdr.records().enumerate() {
        let row = i + 1;
        let rec = rec.map_err(|e| GeometryError::Malformed {
            row,
            message: e.to_string(),
        })?;
        if rec.len() != expected.len() {
            return Err(GeometryError::Malformed {
                row,
                message: format!("{} cells, expected {}", rec.len(), expected.len()),
            });
        }
        let mut cells = Vec::with_capacity(rec.len());
        for (cell, name) in rec.iter().zip(&expected) {
            let x: f64 = cell.trim().parse().map_err(|_| GeometryError::Malformed {
                row,
                message: format!("column `{name}`: cannot parse `{cell}`"),
            })?;
            if !x.is_finite() {
                return Err(GeometryError::NonFinite {
                    row,
                    column: name.clone(),
                });
            }
            cells.push(x);
        }
        if i < grid.len() && grid.locate(&cells[..n]) != Some(i) {
            return Err(GeometryError::Malformed {
                row,
                message: "u coordinates do not match the grid node of this row".into(),
            });
        }
        values.push(cells[n]);
    }
    if values.len() != grid.len() {
        return Err(GeometryError::ShapeMismatch {
            expected: format!("{} rows", grid.len()),
            found: format!("{} rows", values.len()),
        });
    }
    RadialGraphField::new(grid, values, annulus)
}

pub fn parse_field_from_path(
    path: &Path,
    grid: BaseGrid,
    annulus: (f64, f64),
) -> Result<RadialGraphField, GeometryError> {
    parse_field(File::open(path)?, grid, annulus)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{jet_sweep, WarpKind, WarpProfile};

    fn sample() -> (RadialGraphField, Vec<HypersurfaceJet>) {
        let p = WarpProfile::new(WarpKind::Euclidean, (1.0, 3.0)).unwrap();
        let g = BaseGrid::new(2, 8).unwrap();
        let f = RadialGraphField::from_fn(g, (1.0, 3.0), |u| 2.0 + 0.1 * (u[0] + 0.3).sin() * u[1].cos());
        let jets = jet_sweep(&p, &f).unwrap();
        (f, jets)
    }

    #[test]
    fn round_trip_is_bitwise() {
        let (f, jets) = sample();
        let mut buf = Vec::new();
        dump_field(&mut buf, &f, &jets, 2).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("u1,u2,r,v,tau,kappa_1,kappa_2,sigma_k,cone_margin\n"));
        let back = parse_field(&buf[..], f.grid, f.annulus).unwrap();
        assert_eq!(back, f);
    }

    #[test]
    fn row_count_mismatch() {
        let (f, jets) = sample();
        let mut buf = Vec::new();
        dump_field(&mut buf, &f, &jets, 2).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let truncated: String = text.lines().take(10).map(|l| format!("{l}\n")).collect();
        assert!(matches!(
            parse_field(truncated.as_bytes(), f.grid, f.annulus),
            Err(GeometryError::ShapeMismatch { .. })
        ));
    }

    #[test]
    fn nan_cell_names_row() {
        let (f, jets) = sample();
        let mut buf = Vec::new();
        dump_field(&mut buf, &f, &jets, 2).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines: Vec<String> = text.lines().map(String::from).collect();
        let mut cells: Vec<String> = lines[4].split(',').map(String::from).collect();
        cells[2] = "NaN".into();
        lines[4] = cells.join(",");
        let bad = lines.join("\n");
        match parse_field(bad.as_bytes(), f.grid, f.annulus) {
            Err(GeometryError::NonFinite { row, column }) => {
                assert_eq!(row, 4);
                assert_eq!(column, "r");
            }
            other => panic!("{other:?}"),
        }
    }
}
