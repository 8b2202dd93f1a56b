//! CSV tables.
//!
//! Records: header `t,f,J1,…,JN`, one record per row, `N` read from the
//! header. Dense signals: header `t,f`. Floats are written with 17
//! significant digits.

use std::io::{Read, Write};
use std::path::Path;

use crate::calculus::DenseSignal;
use crate::error::{Error, Result};
use crate::recovery::SampleRecord;

fn parse_err(path: &str, line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_string(),
        line,
        message: message.into(),
    }
}

fn fmt(x: f64) -> String {
    format!("{x:.16e}")
}

/// Rows of finite floats after a header check. Line numbers are 1-based and
/// count the header.
fn read_table<R: Read>(
    reader: R,
    path: &str,
    check_header: impl Fn(&[String]) -> std::result::Result<(), String>,
) -> Result<(Vec<String>, Vec<(usize, Vec<f64>)>)> {
    let mut rdr = ::csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .trim(::csv::Trim::All)
        .from_reader(reader);
    let header: Vec<String> = rdr
        .headers()
        .map_err(|e| parse_err(path, 1, format!("unreadable header: {e}")))?
        .iter()
        .map(str::to_string)
        .collect();
    check_header(&header).map_err(|m| parse_err(path, 1, m))?;

    let mut rows = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let line = i + 2;
        let rec = rec.map_err(|e| parse_err(path, line, format!("malformed row: {e}")))?;
        if rec.iter().all(str::is_empty) {
            continue;
        }
        if rec.len() != header.len() {
            return Err(parse_err(
                path,
                line,
                format!("expected {} columns, found {}", header.len(), rec.len()),
            ));
        }
        let mut values = Vec::with_capacity(rec.len());
        for (field, name) in rec.iter().zip(&header) {
            let v: f64 = field
                .parse()
                .map_err(|_| parse_err(path, line, format!("column {name}: {field:?} is not a number")))?;
            if !v.is_finite() {
                return Err(parse_err(path, line, format!("column {name}: non-finite value {field}")));
            }
            values.push(v);
        }
        rows.push((line, values));
    }
    for w in rows.windows(2) {
        let (prev, cur) = (w[0].1[0], w[1].1[0]);
        if cur == prev {
            return Err(parse_err(path, w[1].0, format!("duplicate time {cur}")));
        }
        if cur < prev {
            return Err(parse_err(path, w[1].0, format!("time {cur} follows {prev}; times must increase")));
        }
    }
    Ok((header, rows))
}

pub fn read_records_from<R: Read>(reader: R, path: &str) -> Result<Vec<SampleRecord>> {
    let (header, rows) = read_table(reader, path, |h| {
        if h.len() < 2 || h[0] != "t" || h[1] != "f" {
            return Err(format!("header must start with t,f; got {}", h.join(",")));
        }
        for (i, name) in h[2..].iter().enumerate() {
            let want = format!("J{}", i + 1);
            if *name != want {
                return Err(format!("column {} must be {want}, got {name}", i + 3));
            }
        }
        Ok(())
    })?;
    let _ = header;
    rows.into_iter()
        .map(|(line, v)| {
            SampleRecord::new(v[0], v[1], v[2..].to_vec()).map_err(|e| parse_err(path, line, e.to_string()))
        })
        .collect()
}

pub fn read_records(path: &Path) -> Result<Vec<SampleRecord>> {
    let file = std::fs::File::open(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    read_records_from(file, &path.display().to_string())
}

pub fn write_records_to<W: Write>(mut out: W, records: &[SampleRecord]) -> Result<()> {
    let depth = records.iter().map(SampleRecord::depth).min().unwrap_or(0);
    let mut header = vec!["t".to_string(), "f".to_string()];
    header.extend((1..=depth).map(|k| format!("J{k}")));
    writeln!(out, "{}", header.join(","))?;
    for r in records {
        let mut row = vec![fmt(r.t()), fmt(r.f_value())];
        row.extend(r.integrals()[..depth].iter().map(|v| fmt(*v)));
        writeln!(out, "{}", row.join(","))?;
    }
    Ok(())
}

pub fn write_records(path: &Path, records: &[SampleRecord]) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    write_records_to(std::io::BufWriter::new(file), records)
}

pub fn read_dense_from<R: Read>(reader: R, path: &str) -> Result<DenseSignal> {
    let (_, rows) = read_table(reader, path, |h| {
        if h.len() == 2 && h[0] == "t" && h[1] == "f" {
            Ok(())
        } else {
            Err(format!("header must be t,f; got {}", h.join(",")))
        }
    })?;
    let (grid, values) = rows.into_iter().map(|(_, v)| (v[0], v[1])).unzip();
    DenseSignal::new(grid, values).map_err(|e| parse_err(path, 1, e.to_string()))
}

pub fn read_dense(path: &Path) -> Result<DenseSignal> {
    let file = std::fs::File::open(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    read_dense_from(file, &path.display().to_string())
}

pub fn write_dense_to<W: Write>(mut out: W, signal: &DenseSignal) -> Result<()> {
    writeln!(out, "t,f")?;
    for (t, f) in signal.grid().iter().zip(signal.values()) {
        writeln!(out, "{},{}", fmt(*t), fmt(*f))?;
    }
    Ok(())
}

pub fn write_dense(path: &Path, signal: &DenseSignal) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    write_dense_to(std::io::BufWriter::new(file), signal)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str) -> Result<Vec<SampleRecord>> {
        read_records_from(text.as_bytes(), "mem")
    }

    fn line_of(err: Error) -> usize {
        match err {
            Error::Parse { line, .. } => line,
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn reads_records() {
        let recs = parse("t,f,J1,J2\n0,1,0,0\n1,2.5,1.5,0.7\n").unwrap();
        assert_eq!(recs.len(), 2);
        assert_eq!(recs[1].integral(2), 0.7);
    }

    #[test]
    fn rejects_bad_rows_with_line_numbers() {
        assert_eq!(line_of(parse("t,f,J1\n0,1,0\n0.5,1\n").unwrap_err()), 3);
        assert_eq!(line_of(parse("t,f,J1\n0,1,0\n1,NaN,0.2\n").unwrap_err()), 3);
        assert_eq!(line_of(parse("t,f,J1\n0,1,0\n1,inf,0.2\n").unwrap_err()), 3);
        assert_eq!(line_of(parse("t,f,J1\n0,1,0\n1,2,0.2\n1,3,0.4\n").unwrap_err()), 4);
        assert_eq!(line_of(parse("t,f,J1\n0,1,0\n2,2,0.2\n1,3,0.4\n").unwrap_err()), 4);
        assert_eq!(line_of(parse("t,f,J1\n0,1,0\n1,abc,0.2\n").unwrap_err()), 3);
        assert_eq!(line_of(parse("t,g,J1\n0,1,0\n").unwrap_err()), 1);
        assert_eq!(line_of(parse("t,f,J2\n0,1,0\n").unwrap_err()), 1);
    }

    #[test]
    fn messages_differ_per_failure() {
        let msgs: Vec<String> = [
            "t,f\n0,1\n1\n",
            "t,f\n0,1\n1,NaN\n",
            "t,f\n0,1\n0,2\n",
            "t,f\n1,1\n0,2\n",
        ]
        .iter()
        .map(|s| parse(s).unwrap_err().to_string())
        .collect();
        for i in 0..msgs.len() {
            for j in 0..i {
                assert_ne!(msgs[i], msgs[j]);
            }
        }
    }

    #[test]
    fn record_round_trip_is_bit_exact() {
        let recs = vec![
            SampleRecord::new(0.0, 0.1, vec![0.0, 0.0]).unwrap(),
            SampleRecord::new(1.0 / 3.0, std::f64::consts::PI, vec![1e-300, -2.0 / 7.0]).unwrap(),
        ];
        let mut buf = Vec::new();
        write_records_to(&mut buf, &recs).unwrap();
        let back = read_records_from(buf.as_slice(), "mem").unwrap();
        assert_eq!(back, recs);
    }

    #[test]
    fn dense_round_trip() {
        let signal = DenseSignal::new(vec![0.0, 0.1, 0.3], vec![1.0, -0.5, 2.0 / 3.0]).unwrap();
        let mut buf = Vec::new();
        write_dense_to(&mut buf, &signal).unwrap();
        let back = read_dense_from(buf.as_slice(), "mem").unwrap();
        assert_eq!(back, signal);
        assert!(read_dense_from("t,f,J1\n0,1,0\n".as_bytes(), "mem").is_err());
    }
}
