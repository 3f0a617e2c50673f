//! CSV and JSON serialisation of matrices, ensembles, measurements and
//! recovery results.
//!
//! Floats are written with 17 significant digits so that every value
//! round-trips exactly.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::sampling::{MeasurementSeries, SamplingEnsemble};
use crate::solver::RecoveryResult;

/// `v` with 17 significant digits.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

pub(crate) fn io_err(path: &Path, source: std::io::Error) -> Error {
    Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn csv_err(path: &Path, e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(source) => io_err(path, source),
        other => Error::data(format!("{}: {other:?}", path.display())),
    }
}

pub(crate) fn write_file(path: &Path, contents: &str) -> Result<()> {
    let mut f = BufWriter::new(File::create(path).map_err(|e| io_err(path, e))?);
    f.write_all(contents.as_bytes()).map_err(|e| io_err(path, e))?;
    f.flush().map_err(|e| io_err(path, e))
}

fn parse_f64(field: &str, path: &Path, line: usize) -> Result<f64> {
    field
        .trim()
        .parse()
        .map_err(|_| Error::data(format!("{}:{line}: '{field}' is not a number", path.display())))
}

fn parse_usize(field: &str, path: &Path, line: usize) -> Result<usize> {
    field
        .trim()
        .parse()
        .map_err(|_| Error::data(format!("{}:{line}: '{field}' is not a nonnegative integer", path.display())))
}

/// Header row and records of a CSV file, skipping `#` comment lines.
pub(crate) fn read_records(path: &Path) -> Result<(Vec<String>, Vec<csv::StringRecord>)> {
    let file = File::open(path).map_err(|e| io_err(path, e))?;
    let mut rdr = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(file);
    let header = rdr
        .headers()
        .map_err(|e| csv_err(path, e))?
        .iter()
        .map(str::to_string)
        .collect();
    let records = rdr.records().collect::<std::result::Result<Vec<_>, _>>().map_err(|e| csv_err(path, e))?;
    Ok((header, records))
}

fn expect_header(path: &Path, got: &[String], want: &[&str]) -> Result<()> {
    if got.len() != want.len() || got.iter().zip(want).any(|(g, w)| g != w) {
        return Err(Error::data(format!(
            "{}: expected columns {}, found {}",
            path.display(),
            want.join(","),
            got.join(",")
        )));
    }
    Ok(())
}

fn matrix_body(x: &DMatrix<f64>) -> String {
    let mut out = String::new();
    for i in 0..x.nrows() {
        let row: Vec<String> = (0..x.ncols()).map(|j| fmt_f64(x[(i, j)])).collect();
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

fn parse_matrix_lines<'a>(lines: impl Iterator<Item = (usize, &'a str)>, path: &Path) -> Result<DMatrix<f64>> {
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (line, text) in lines {
        if text.trim().is_empty() {
            continue;
        }
        let row = text
            .split(',')
            .map(|f| parse_f64(f, path, line))
            .collect::<Result<Vec<_>>>()?;
        if let Some(first) = rows.first() {
            if first.len() != row.len() {
                return Err(Error::data(format!("{}:{line}: ragged matrix row", path.display())));
            }
        }
        rows.push(row);
    }
    let nrows = rows.len();
    let ncols = rows.first().map_or(0, Vec::len);
    Ok(DMatrix::from_row_iterator(nrows, ncols, rows.into_iter().flatten()))
}

/// Row-major matrix CSV without a header row.
pub fn write_matrix_csv(path: &Path, x: &DMatrix<f64>) -> Result<()> {
    write_file(path, &matrix_body(x))
}

pub fn read_matrix_csv(path: &Path) -> Result<DMatrix<f64>> {
    let text = std::fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    parse_matrix_lines(text.lines().enumerate().map(|(i, l)| (i + 1, l)), path)
}

/// One JSON header line followed by the matrix CSV body.
pub fn write_matrix_bundle(path: &Path, header: &Value, x: &DMatrix<f64>) -> Result<()> {
    let mut out = serde_json::to_string(header).expect("JSON values always serialise");
    out.push('\n');
    out.push_str(&matrix_body(x));
    write_file(path, &out)
}

pub fn read_matrix_bundle(path: &Path) -> Result<(Value, DMatrix<f64>)> {
    let file = File::open(path).map_err(|e| io_err(path, e))?;
    let mut lines = Vec::new();
    for line in BufReader::new(file).lines() {
        lines.push(line.map_err(|e| io_err(path, e))?);
    }
    let first = lines.first().ok_or_else(|| Error::data(format!("{}: empty bundle", path.display())))?;
    let header: Value =
        serde_json::from_str(first).map_err(|e| Error::data(format!("{}:1: bad JSON header: {e}", path.display())))?;
    let x = parse_matrix_lines(lines.iter().enumerate().skip(1).map(|(i, l)| (i + 1, l.as_str())), path)?;
    Ok((header, x))
}

/// Columns `t, m, i, j`; `t` and `m` are 1-based, `i` and `j` 0-based.
pub fn write_ensembles_csv(path: &Path, ensembles: &[SamplingEnsemble]) -> Result<()> {
    let mut out = String::from("t,m,i,j\n");
    for (t, e) in ensembles.iter().enumerate() {
        for (m, &(i, j)) in e.pairs().iter().enumerate() {
            out.push_str(&format!("{},{},{i},{j}\n", t + 1, m + 1));
        }
    }
    write_file(path, &out)
}

/// Rows must be grouped by `t` in order with consecutive `m`.
pub fn read_ensembles_csv(path: &Path, n: usize) -> Result<Vec<SamplingEnsemble>> {
    let (header, records) = read_records(path)?;
    expect_header(path, &header, &["t", "m", "i", "j"])?;
    let mut steps: Vec<Vec<(usize, usize)>> = Vec::new();
    for (k, rec) in records.iter().enumerate() {
        let line = k + 2;
        let t = parse_usize(&rec[0], path, line)?;
        let m = parse_usize(&rec[1], path, line)?;
        let pair = (parse_usize(&rec[2], path, line)?, parse_usize(&rec[3], path, line)?);
        if t == steps.len() + 1 && m == 1 {
            steps.push(vec![pair]);
        } else if t == steps.len() && t > 0 && m == steps[t - 1].len() + 1 {
            steps[t - 1].push(pair);
        } else {
            return Err(Error::data(format!("{}:{line}: out-of-order (t, m) = ({t}, {m})", path.display())));
        }
    }
    steps.into_iter().map(|pairs| SamplingEnsemble::from_pairs(n, pairs)).collect()
}

/// Columns `t, m, y`.
pub fn write_measurements_csv(path: &Path, series: &MeasurementSeries) -> Result<()> {
    let mut out = String::from("t,m,y\n");
    for (t, y) in series.observations().iter().enumerate() {
        for (m, v) in y.iter().enumerate() {
            out.push_str(&format!("{},{},{}\n", t + 1, m + 1, fmt_f64(*v)));
        }
    }
    write_file(path, &out)
}

/// Pair observations with ensembles read separately.
pub fn read_measurements_csv(path: &Path, ensembles: Vec<SamplingEnsemble>, sigma1: f64) -> Result<MeasurementSeries> {
    let (header, records) = read_records(path)?;
    expect_header(path, &header, &["t", "m", "y"])?;
    let mut y: Vec<Vec<f64>> = vec![Vec::new(); ensembles.len()];
    for (k, rec) in records.iter().enumerate() {
        let line = k + 2;
        let t = parse_usize(&rec[0], path, line)?;
        let m = parse_usize(&rec[1], path, line)?;
        if t == 0 || t > y.len() || m != y[t - 1].len() + 1 {
            return Err(Error::data(format!("{}:{line}: unexpected (t, m) = ({t}, {m})", path.display())));
        }
        y[t - 1].push(parse_f64(&rec[2], path, line)?);
    }
    let y = y.into_iter().map(DVector::from_vec).collect();
    MeasurementSeries::new(ensembles, y, sigma1).map_err(|e| Error::data(format!("{}: {e}", path.display())))
}

/// Scalars and objective trace of a solve.
pub fn recovery_summary(result: &RecoveryResult) -> Value {
    json!({
        "iterations_used": result.iterations_used,
        "converged": result.converged,
        "used_random_fallback": result.used_random_fallback,
        "objective_trace": result.objective_trace,
    })
}

/// `<stem>.json` with the summary and `<stem>.csv` with `Xhat`.
pub fn write_recovery(stem: &Path, result: &RecoveryResult) -> Result<()> {
    let json_path = stem.with_extension("json");
    let text = serde_json::to_string_pretty(&recovery_summary(result)).expect("JSON values always serialise");
    write_file(&json_path, &(text + "\n"))?;
    write_matrix_csv(&stem.with_extension("csv"), result.xhat.matrix())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::randkit::RngStream;
    use crate::sampling::draw_uniform_ensembles;

    #[test]
    fn float_format_round_trips() {
        for v in [0.1, -1.0 / 3.0, 1e-300, f64::MAX, 0.0, 123456.789] {
            let s = fmt_f64(v);
            assert_eq!(s.parse::<f64>().unwrap(), v);
        }
        assert_eq!(fmt_f64(0.5), "5.0000000000000000e-1");
    }

    #[test]
    fn matrix_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let x = DMatrix::from_row_slice(2, 3, &[0.1, -2.5, 1.0 / 7.0, 3.0, 0.0, -1e-12]);
        let p = dir.path().join("x.csv");
        write_matrix_csv(&p, &x).unwrap();
        assert_eq!(read_matrix_csv(&p).unwrap(), x);
        let b = dir.path().join("x.bundle");
        let header = json!({"n": 2, "t": 4});
        write_matrix_bundle(&b, &header, &x).unwrap();
        let (h, y) = read_matrix_bundle(&b).unwrap();
        assert_eq!(h, header);
        assert_eq!(y, x);
    }

    #[test]
    fn ragged_matrix_is_data_error() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("bad.csv");
        std::fs::write(&p, "1,2\n3\n").unwrap();
        assert!(read_matrix_csv(&p).unwrap_err().is_data_error());
        let missing = dir.path().join("missing.csv");
        assert!(matches!(read_matrix_csv(&missing), Err(Error::Io { .. })));
    }

    #[test]
    fn ensembles_and_measurements_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let ens = draw_uniform_ensembles(5, 7, 3, &RngStream::root(3)).unwrap();
        let y: Vec<DVector<f64>> = (0..3).map(|t| DVector::from_fn(7, |m, _| (t * 7 + m) as f64 / 9.0)).collect();
        let series = MeasurementSeries::new(ens.clone(), y, 0.1).unwrap();
        let pe = dir.path().join("ens.csv");
        let pm = dir.path().join("y.csv");
        write_ensembles_csv(&pe, &ens).unwrap();
        write_measurements_csv(&pm, &series).unwrap();
        let ens2 = read_ensembles_csv(&pe, 5).unwrap();
        assert_eq!(ens2, ens);
        let back = read_measurements_csv(&pm, ens2, 0.1).unwrap();
        assert_eq!(back.observations(), series.observations());
        assert!(read_ensembles_csv(&pe, 2).unwrap_err().is_data_error());
    }
}
