//! CSV input: data files with columns `x[,y],z` and location files with `x[,y]`.

use std::io::Read;

use crate::error::{Error, Result};
use crate::spatial::{Dataset, Location};

fn normalized_header(reader: &mut csv::Reader<impl Read>) -> Result<Vec<String>> {
    Ok(reader
        .headers()?
        .iter()
        .map(|h| h.trim().trim_start_matches('\u{feff}').to_ascii_lowercase())
        .collect())
}

fn parse_row(record: &csv::StringRecord, line: usize, width: usize) -> Result<Vec<f64>> {
    if record.len() != width {
        return Err(Error::Parse(format!(
            "line {line}: expected {width} fields, found {}",
            record.len()
        )));
    }
    record
        .iter()
        .map(|field| {
            let v: f64 = field
                .trim()
                .parse()
                .map_err(|_| Error::Parse(format!("line {line}: {field:?} is not a number")))?;
            if v.is_finite() {
                Ok(v)
            } else {
                Err(Error::Parse(format!("line {line}: non-finite value {field:?}")))
            }
        })
        .collect()
}

fn rows(reader: impl Read, expected: &[&[&str]]) -> Result<(usize, Vec<Vec<f64>>)> {
    let mut reader = csv::ReaderBuilder::new().flexible(true).from_reader(reader);
    let header = normalized_header(&mut reader)?;
    let schema = expected
        .iter()
        .find(|cols| cols.iter().copied().eq(header.iter().map(String::as_str)))
        .ok_or_else(|| {
            let wanted: Vec<String> = expected.iter().map(|c| c.join(",")).collect();
            Error::Parse(format!("header {:?} must be one of {}", header.join(","), wanted.join(" | ")))
        })?;
    let mut out = vec![];
    for (k, record) in reader.records().enumerate() {
        let record = record?;
        if record.iter().all(|f| f.trim().is_empty()) {
            continue;
        }
        out.push(parse_row(&record, k + 2, schema.len())?);
    }
    Ok((schema.len(), out))
}

/// Reads a dataset with header `x,z` or `x,y,z`.
pub fn read_dataset(reader: impl Read) -> Result<Dataset> {
    let (width, rows) = rows(reader, &[&["x", "z"], &["x", "y", "z"]])?;
    let p = width - 1;
    let locations = rows.iter().map(|r| Location::new(&r[..p])).collect::<Result<Vec<_>>>()?;
    let values: Vec<f64> = rows.iter().map(|r| r[p]).collect();
    Dataset::from_parts(&locations, &values)
}

/// Reads target locations with header `x` or `x,y`.
pub fn read_locations(reader: impl Read) -> Result<Vec<Location>> {
    let (_, rows) = rows(reader, &[&["x"], &["x", "y"]])?;
    if rows.is_empty() {
        return Err(Error::Parse("no locations found".into()));
    }
    rows.iter().map(|r| Location::new(r)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reads_both_dimensions() {
        let d = read_dataset("x,z\n0.5,1\n1.5,2\n".as_bytes()).unwrap();
        assert_eq!((d.len(), d.dim()), (2, 1));
        let d = read_dataset(" X , Y , Z \n0,0,1\n1,0,2\n0,1,3\n\n".as_bytes()).unwrap();
        assert_eq!((d.len(), d.dim()), (3, 2));
        assert_eq!(d.values(), vec![1.0, 2.0, 3.0]);
        let t = read_locations("x,y\n0.1,0.2\n".as_bytes()).unwrap();
        assert_eq!(t, vec![Location::xy(0.1, 0.2)]);
    }

    #[test]
    fn rejects_malformed_input() {
        assert!(read_dataset("a,b\n1,2\n".as_bytes()).is_err());
        assert!(read_dataset("x,z\n1,abc\n2,3\n".as_bytes()).is_err());
        assert!(read_dataset("x,y,z\n1,2\n".as_bytes()).is_err());
        assert!(read_dataset("x,z\n1,nan\n2,3\n".as_bytes()).is_err());
        assert!(read_dataset("x,z\n1,2\n".as_bytes()).is_err());
        assert!(read_locations("x,y\n".as_bytes()).is_err());
    }
}
