//! Numeric CSV: `,` separated, `.` decimal, LF line endings.
//!
//! Stream files carry a `step,<name>,...` header followed by one row per
//! synchronized sample. Matrix files have no header.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use csv::{ReaderBuilder, Terminator, WriterBuilder};

use crate::error::{Error, Result};
use crate::table::StreamTable;

/// Name of the leading index column of stream files.
pub const STEP_COLUMN: &str = "step";

#[derive(Debug, Clone, PartialEq)]
pub struct NumericCsv {
    pub header: Option<Vec<String>>,
    pub rows: Vec<Vec<f64>>,
}

/// Read a CSV of numbers. The first line is taken as a header when any of
/// its fields is not a number. All rows must have the same width.
pub fn read_numeric<R: Read>(input: R) -> Result<NumericCsv> {
    let mut reader = ReaderBuilder::new().has_headers(false).flexible(true).from_reader(input);
    let mut header = None;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut width = None;
    for (k, record) in reader.records().enumerate() {
        let record = record.map_err(|e| Error::Data {
            line: e.position().map_or(k + 1, |p| p.line() as usize),
            message: e.to_string(),
        })?;
        let line = record.position().map_or(k + 1, |p| p.line() as usize);
        if k == 0 && record.iter().any(|f| f.trim().parse::<f64>().is_err()) {
            let names: Vec<String> = record.iter().map(|f| f.trim().to_string()).collect();
            width = Some(names.len());
            header = Some(names);
            continue;
        }
        let w = *width.get_or_insert(record.len());
        if record.len() != w {
            return Err(Error::Data { line, message: format!("{} fields, expected {w}", record.len()) });
        }
        let row = record
            .iter()
            .enumerate()
            .map(|(c, f)| {
                f.trim().parse::<f64>().map_err(|_| Error::Data {
                    line,
                    message: format!("column {}: `{f}` is not a number", c + 1),
                })
            })
            .collect::<Result<Vec<f64>>>()?;
        rows.push(row);
    }
    Ok(NumericCsv { header, rows })
}

pub fn write_numeric<W: Write>(out: W, header: Option<&[String]>, rows: &[Vec<f64>]) -> Result<()> {
    let mut writer = WriterBuilder::new().terminator(Terminator::Any(b'\n')).from_writer(out);
    let csv_err = |e: csv::Error| Error::Format(e.to_string());
    if let Some(h) = header {
        writer.write_record(h).map_err(csv_err)?;
    }
    for row in rows {
        writer.write_record(row.iter().map(|v| v.to_string())).map_err(csv_err)?;
    }
    writer.flush()?;
    Ok(())
}

/// Parse a stream file into a table (the step column is dropped).
pub fn read_streams<R: Read>(input: R) -> Result<StreamTable> {
    let csv = read_numeric(input)?;
    let header = csv
        .header
        .ok_or_else(|| Error::Data { line: 1, message: "missing `step,<names>` header".into() })?;
    if header.first().map(String::as_str) != Some(STEP_COLUMN) || header.len() < 2 {
        return Err(Error::Data {
            line: 1,
            message: format!("header must start with `{STEP_COLUMN}` and name at least one stream"),
        });
    }
    let names = header[1..].to_vec();
    let rows = csv.rows.into_iter().map(|r| r[1..].to_vec()).collect();
    StreamTable::with_rows(names, rows).map_err(|e| Error::Data { line: 1, message: e.to_string() })
}

pub fn write_streams<W: Write>(out: W, table: &StreamTable) -> Result<()> {
    let mut header = vec![STEP_COLUMN.to_string()];
    header.extend(table.names().iter().cloned());
    let mut writer = WriterBuilder::new().terminator(Terminator::Any(b'\n')).from_writer(out);
    let csv_err = |e: csv::Error| Error::Format(e.to_string());
    writer.write_record(&header).map_err(csv_err)?;
    for (k, row) in table.rows().iter().enumerate() {
        let fields = std::iter::once(k.to_string()).chain(row.iter().map(|v| v.to_string()));
        writer.write_record(fields).map_err(csv_err)?;
    }
    writer.flush()?;
    Ok(())
}

pub fn load_streams(path: &Path) -> Result<StreamTable> {
    read_streams(BufReader::new(File::open(path)?))
}

pub fn save_streams(path: &Path, table: &StreamTable) -> Result<()> {
    write_streams(BufWriter::new(File::create(path)?), table)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn table() -> StreamTable {
        StreamTable::with_rows(
            vec!["x".into(), "y".into()],
            vec![vec![0.1, 0.01], vec![1.0 / 3.0, 1.0 / 9.0], vec![-2.5e-17, 7.0]],
        )
        .unwrap()
    }

    #[test]
    fn stream_round_trip_is_exact() {
        let mut buf = Vec::new();
        write_streams(&mut buf, &table()).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("step,x,y\n0,0.1,0.01\n1,"));
        assert!(!text.contains('\r'));
        assert_eq!(read_streams(&buf[..]).unwrap(), table());
    }

    #[test]
    fn bad_cell_reports_its_line() {
        let text = "step,x\n0,0.5\n1,abc\n";
        match read_streams(text.as_bytes()) {
            Err(Error::Data { line, .. }) => assert_eq!(line, 3),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn ragged_rows_are_rejected() {
        let text = "step,x,y\n0,0.5,0.1\n1,0.2\n";
        assert!(matches!(read_streams(text.as_bytes()), Err(Error::Data { line: 3, .. })));
    }

    #[test]
    fn header_is_required() {
        assert!(read_streams("0,1\n1,2\n".as_bytes()).is_err());
        assert!(read_streams("x,y\n1,2\n".as_bytes()).is_err());
        assert!(read_streams("step\n1\n".as_bytes()).is_err());
    }

    #[test]
    fn matrix_without_header() {
        let rows = vec![vec![1.0, 0.0], vec![0.0, 1.0]];
        let mut buf = Vec::new();
        write_numeric(&mut buf, None, &rows).unwrap();
        assert_eq!(String::from_utf8(buf.clone()).unwrap(), "1,0\n0,1\n");
        let back = read_numeric(&buf[..]).unwrap();
        assert_eq!(back.header, None);
        assert_eq!(back.rows, rows);
    }

    #[test]
    fn header_only_file_has_no_rows() {
        let t = read_streams("step,a,b\n".as_bytes()).unwrap();
        assert!(t.is_empty());
        assert_eq!(t.names(), ["a", "b"]);
    }
}
