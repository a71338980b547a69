//! Numeric CSV ingestion shared by time series and datasets.

use crate::error::{Error, Result};

/// Parses comma-separated numeric rows with `min..=max` columns. A first
/// record that does not parse as numbers is taken as a header. Rows are
/// numbered from 1 as they appear in the file, header included, and each
/// row is returned with its line number.
pub(crate) fn numeric_rows(text: &str, min: usize, max: usize) -> Result<Vec<(usize, Vec<f64>)>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(text.as_bytes());
    let mut rows = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let line = |r: &csv::StringRecord| r.position().map_or(i + 1, |p| p.line() as usize);
        let record = record.map_err(|e| Error::Parse {
            row: e.position().map_or(i + 1, |p| p.line() as usize),
            message: e.to_string(),
        })?;
        let row = line(&record);
        if record.iter().all(|f| f.is_empty()) {
            continue;
        }
        let parsed: std::result::Result<Vec<f64>, _> = record.iter().map(str::parse::<f64>).collect();
        match parsed {
            Err(_) if rows.is_empty() && i == 0 => continue,
            Err(e) => {
                return Err(Error::Parse {
                    row,
                    message: format!("{e} in `{}`", record.iter().collect::<Vec<_>>().join(",")),
                })
            }
            Ok(v) if v.len() < min || v.len() > max => {
                return Err(Error::Parse {
                    row,
                    message: format!("expected {min} to {max} columns, found {}", v.len()),
                })
            }
            Ok(v) => {
                if let Some(bad) = v.iter().find(|x| !x.is_finite()) {
                    return Err(Error::Parse {
                        row,
                        message: format!("non-finite value {bad}"),
                    });
                }
                rows.push((row, v));
            }
        }
    }
    Ok(rows)
}

/// Column names of the first record when it is a header, else None.
pub(crate) fn header(text: &str) -> Option<Vec<String>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(text.as_bytes());
    let first = reader.records().next()?.ok()?;
    if first.iter().all(|f| f.parse::<f64>().is_ok()) {
        return None;
    }
    Some(first.iter().map(str::to_string).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn header_and_rows() {
        let rows = numeric_rows("t_s,p3\n0,0.5\n1e-3, 0.25\n\n", 2, 3).unwrap();
        assert_eq!(rows, vec![(2, vec![0.0, 0.5]), (3, vec![1e-3, 0.25])]);
        assert_eq!(numeric_rows("0,1\n", 2, 2).unwrap().len(), 1);
    }

    #[test]
    fn header_detection() {
        assert_eq!(header("# note\nt_s, p3\n0,1\n").unwrap(), vec!["t_s", "p3"]);
        assert!(header("0,1\n").is_none());
    }

    #[test]
    fn bad_row_is_numbered() {
        match numeric_rows("t_s,p3\n0,0.5\n1,abc\n", 2, 2) {
            Err(Error::Parse { row, .. }) => assert_eq!(row, 3),
            other => panic!("{other:?}"),
        }
        match numeric_rows("0,0.5\n1\n", 2, 2) {
            Err(Error::Parse { row, .. }) => assert_eq!(row, 2),
            other => panic!("{other:?}"),
        }
    }
}
