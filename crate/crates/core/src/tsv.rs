//! Text formats: CSV datasets in, TSV tables out. Floats are written with 17
//! significant digits so every value reads back bit-exactly.

use std::path::Path;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::likelihood::{Dataset, Family};

pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |source| Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn csv_err(path: &Path, e: csv::Error) -> Error {
    let line = e.position().map_or(0, |p| p.line());
    match e.into_kind() {
        csv::ErrorKind::Io(source) => Error::Io {
            path: path.to_path_buf(),
            source,
        },
        other => Error::Parse {
            path: path.to_path_buf(),
            line,
            message: format!("{other:?}"),
        },
    }
}

/// Writes a tab-separated table with a header row.
pub fn write_table(path: &Path, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
    let mut w = csv::WriterBuilder::new()
        .delimiter(b'\t')
        .from_path(path)
        .map_err(|e| csv_err(path, e))?;
    w.write_record(header).map_err(|e| csv_err(path, e))?;
    for row in rows {
        w.write_record(row).map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(io_err(path))
}

/// Reads a CSV dataset: response first for linear and GLM families, or
/// `time,status` first for Cox; the remaining columns are covariates.
/// No intercept column is added.
pub fn read_dataset(path: &Path, family: Family) -> Result<Dataset> {
    let file = std::fs::File::open(path).map_err(io_err(path))?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(file);
    let header: Vec<String> = reader
        .headers()
        .map_err(|e| csv_err(path, e))?
        .iter()
        .map(str::to_string)
        .collect();
    let lead = if family == Family::Cox { 2 } else { 1 };
    let parse_err = |line: u64, message: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        message,
    };
    if header.len() <= lead {
        return Err(parse_err(1, format!("header has {} columns; need {} leading column(s) and at least one covariate", header.len(), lead)));
    }
    if family == Family::Cox && (header[0] != "time" || header[1] != "status") {
        return Err(parse_err(1, "Cox data must start with columns `time,status`".into()));
    }
    let d = header.len() - lead;
    let mut response = Vec::new();
    let mut status = Vec::new();
    let mut values = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| csv_err(path, e))?;
        let line = record.position().map_or(0, |p| p.line());
        if record.len() != header.len() {
            return Err(parse_err(line, format!("expected {} fields, found {}", header.len(), record.len())));
        }
        let num = |k: usize| -> Result<f64> {
            let field = &record[k];
            field
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| parse_err(line, format!("column `{}`: `{field}` is not a finite number", header[k])))
        };
        response.push(num(0)?);
        if family == Family::Cox {
            status.push(match &record[1] {
                "1" => true,
                "0" => false,
                other => return Err(parse_err(line, format!("column `status`: `{other}` is not 0 or 1"))),
            });
        }
        for k in lead..header.len() {
            values.push(num(k)?);
        }
    }
    let n = response.len();
    if n == 0 {
        return Err(parse_err(1, "no data rows".into()));
    }
    let design = DMatrix::from_row_slice(n, d, &values);
    let names = header[lead..].to_vec();
    let response = DVector::from_vec(response);
    if family == Family::Cox {
        Dataset::survival(design, response, status, names)
    } else {
        Dataset::new(design, response, names)
    }
}

/// Writes `data` in the layout [`read_dataset`] expects.
pub fn write_dataset(path: &Path, data: &Dataset) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_err(path, e))?;
    let mut header: Vec<String> = match data.status() {
        Some(_) => vec!["time".into(), "status".into()],
        None => vec!["y".into()],
    };
    header.extend(data.column_names().iter().cloned());
    w.write_record(&header).map_err(|e| csv_err(path, e))?;
    let x = data.design();
    for i in 0..data.n() {
        let mut row = vec![fmt_f64(data.response()[i])];
        if let Some(s) = data.status() {
            row.push(if s[i] { "1" } else { "0" }.into());
        }
        row.extend((0..data.d()).map(|j| fmt_f64(x[(i, j)])));
        w.write_record(&row).map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(io_err(path))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seventeen_digits_round_trip() {
        for x in [0.1, 1.0 / 3.0, -2.5e-300, 6.02214076e23, f64::MIN_POSITIVE, 0.0, -0.0] {
            let s = fmt_f64(x);
            assert_eq!(s.parse::<f64>().unwrap().to_bits(), x.to_bits(), "{s}");
        }
        assert_eq!(fmt_f64(1.0), "1.0000000000000000e0");
    }

    #[test]
    fn malformed_row_cites_its_line() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("bad.csv");
        std::fs::write(&p, "y,x1\n1,2\n3,oops\n").unwrap();
        match read_dataset(&p, Family::Linear) {
            Err(Error::Parse { line, message, .. }) => {
                assert_eq!(line, 3);
                assert!(message.contains("oops"));
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn cox_header_is_required() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("cox.csv");
        std::fs::write(&p, "t,d,x1\n1,1,0.5\n").unwrap();
        assert!(matches!(read_dataset(&p, Family::Cox), Err(Error::Parse { line: 1, .. })));
        std::fs::write(&p, "time,status,x1\n1,2,0.5\n").unwrap();
        assert!(matches!(read_dataset(&p, Family::Cox), Err(Error::Parse { line: 2, .. })));
    }

    #[test]
    fn missing_file_is_io_error() {
        let e = read_dataset(Path::new("/definitely/not/here.csv"), Family::Linear).unwrap_err();
        assert!(matches!(e, Error::Io { .. }));
        assert!(e.is_input_error());
    }
}
