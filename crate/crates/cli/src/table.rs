//! Sample tables: CSV with header `xi_1,…,xi_d[,y]` and floats written with
//! 17 significant digits.

use std::path::Path;

use nalgebra::{DMatrix, DVector};

use crate::error::{CliError, CliResult};

pub fn format_float(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn header(d: usize, with_y: bool) -> String {
    let mut cols: Vec<String> = (1..=d).map(|i| format!("xi_{i}")).collect();
    if with_y {
        cols.push("y".into());
    }
    cols.join(",")
}

/// Renders `points` and, when given, responses.
pub fn render(points: &DMatrix<f64>, y: Option<&DVector<f64>>) -> String {
    let mut out = header(points.ncols(), y.is_some());
    out.push('\n');
    for i in 0..points.nrows() {
        let mut row: Vec<String> = points.row(i).iter().map(|v| format_float(*v)).collect();
        if let Some(y) = y {
            row.push(format_float(y[i]));
        }
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

pub fn write(path: &Path, points: &DMatrix<f64>, y: Option<&DVector<f64>>) -> CliResult<()> {
    std::fs::write(path, render(points, y)).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

/// Reads a table whose header is `xi_1..xi_d` optionally followed by `y`.
pub fn read(path: &Path) -> CliResult<(DMatrix<f64>, Option<DVector<f64>>)> {
    let bad = |m: String| CliError::Config(format!("{}: {m}", path.display()));
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| bad(e.to_string()))?;
    let head: Vec<String> = reader
        .headers()
        .map_err(|e| bad(e.to_string()))?
        .iter()
        .map(str::to_owned)
        .collect();
    let with_y = head.last().is_some_and(|h| h == "y");
    let d = head.len() - usize::from(with_y);
    if d == 0 || head[..d].iter().enumerate().any(|(i, h)| *h != format!("xi_{}", i + 1)) {
        return Err(bad(format!("expected header xi_1..xi_d[,y], found {}", head.join(","))));
    }
    let mut values = Vec::new();
    let mut rows = 0;
    for (line, rec) in reader.records().enumerate() {
        let rec = rec.map_err(|e| bad(e.to_string()))?;
        if rec.len() != head.len() {
            return Err(bad(format!(
                "row {} has {} fields, expected {}",
                line + 1,
                rec.len(),
                head.len()
            )));
        }
        for field in rec.iter() {
            let v: f64 = field
                .parse()
                .map_err(|_| bad(format!("row {}: cannot parse {field:?}", line + 1)))?;
            if !v.is_finite() {
                return Err(bad(format!("row {}: non-finite value", line + 1)));
            }
            values.push(v);
        }
        rows += 1;
    }
    let all = DMatrix::from_row_slice(rows, head.len(), &values);
    let points = all.columns(0, d).into_owned();
    let y = with_y.then(|| all.column(d).into_owned());
    Ok((points, y))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_is_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.csv");
        let pts = DMatrix::from_row_slice(2, 2, &[0.1, 1.0 / 3.0, -2.5e-17, 1e300]);
        let y = DVector::from_vec(vec![std::f64::consts::PI, -0.0]);
        write(&path, &pts, Some(&y)).unwrap();
        let (p2, y2) = read(&path).unwrap();
        assert_eq!(p2, pts);
        assert_eq!(y2.unwrap(), y);
    }

    #[test]
    fn header_checked() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.csv");
        std::fs::write(&path, "a,b\n1,2\n").unwrap();
        assert!(read(&path).is_err());
    }
}
