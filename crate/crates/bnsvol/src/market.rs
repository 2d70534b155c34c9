//! Market data ingestion: daily closing prices and trading volumes.

use std::io::Read;
use std::path::Path;

use crate::error::{Error, Result};

/// Default divisor for raw volumes (volumes expressed in millions).
pub const DEFAULT_VOLUME_UNIT: f64 = 1e6;

/// A validated daily price/volume series.
///
/// Row `i` supplies the closing price and the volume observed at the end of
/// day `i`, so the return over day `i` pairs with the volumes at both of its
/// endpoints: `n` returns align with `n + 1` volumes.
#[derive(Debug, Clone, PartialEq)]
pub struct MarketDataset {
    pub dates: Vec<String>,
    pub close: Vec<f64>,
    pub volume: Vec<f64>,
    pub volume_unit: f64,
}

fn validate_iso_date(s: &str, line: usize) -> Result<()> {
    let bytes = s.as_bytes();
    let ok = bytes.len() == 10
        && bytes[4] == b'-'
        && bytes[7] == b'-'
        && bytes
            .iter()
            .enumerate()
            .all(|(i, b)| matches!(i, 4 | 7) || b.is_ascii_digit());
    if !ok {
        return Err(Error::Data(format!(
            "line {line}: date {s:?} is not ISO-8601 (YYYY-MM-DD)"
        )));
    }
    let month: u32 = s[5..7].parse().unwrap();
    let day: u32 = s[8..10].parse().unwrap();
    if !(1..=12).contains(&month) || !(1..=31).contains(&day) {
        return Err(Error::Data(format!("line {line}: impossible date {s:?}")));
    }
    Ok(())
}

/// Parses a `date,close,volume` CSV.
pub fn load_csv_reader<R: Read>(reader: R, volume_unit: f64) -> Result<MarketDataset> {
    if !(volume_unit > 0.0) {
        return Err(Error::Parameter(format!(
            "volume unit must be > 0, got {volume_unit}"
        )));
    }
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    {
        let headers = rdr.headers()?;
        let want = ["date", "close", "volume"];
        let got: Vec<String> = headers.iter().map(|h| h.to_ascii_lowercase()).collect();
        if got != want {
            return Err(Error::Data(format!(
                "expected header date,close,volume; got {}",
                got.join(",")
            )));
        }
    }
    let mut dates: Vec<String> = Vec::new();
    let mut close = Vec::new();
    let mut volume = Vec::new();
    for (idx, record) in rdr.records().enumerate() {
        let line = idx + 2;
        let record = record?;
        if record.len() != 3 {
            return Err(Error::Data(format!(
                "line {line}: expected 3 fields, got {}",
                record.len()
            )));
        }
        let date = record[0].to_string();
        validate_iso_date(&date, line)?;
        if let Some(prev) = dates.last() {
            // zero-padded ISO dates order lexicographically
            if date.as_str() <= prev.as_str() {
                return Err(Error::Data(format!(
                    "line {line}: dates must be strictly increasing ({prev} then {date})"
                )));
            }
        }
        let c: f64 = record[1]
            .parse()
            .map_err(|_| Error::Data(format!("line {line}: bad close {:?}", &record[1])))?;
        if !(c > 0.0) {
            return Err(Error::Data(format!(
                "line {line}: close must be positive, got {c}"
            )));
        }
        let v: f64 = record[2]
            .parse()
            .map_err(|_| Error::Data(format!("line {line}: bad volume {:?}", &record[2])))?;
        if !(v >= 0.0) {
            return Err(Error::Data(format!(
                "line {line}: volume must be nonnegative, got {v}"
            )));
        }
        dates.push(date);
        close.push(c);
        volume.push(v);
    }
    if close.len() < 2 {
        return Err(Error::Data(format!(
            "need at least 2 rows, got {}",
            close.len()
        )));
    }
    Ok(MarketDataset {
        dates,
        close,
        volume,
        volume_unit,
    })
}

/// Loads and validates a market CSV file.
pub fn load_csv<P: AsRef<Path>>(path: P, volume_unit: f64) -> Result<MarketDataset> {
    let path = path.as_ref();
    let file = std::fs::File::open(path)
        .map_err(|e| Error::Data(format!("cannot open {}: {e}", path.display())))?;
    load_csv_reader(file, volume_unit)
}

impl MarketDataset {
    /// Log returns `X_i = log(close_i / close_{i-1})`.
    pub fn returns(&self) -> Vec<f64> {
        self.close.windows(2).map(|w| (w[1] / w[0]).ln()).collect()
    }

    /// Volumes in model units, `tau_i = volume_i / volume_unit`.
    pub fn tau(&self) -> Vec<f64> {
        self.volume.iter().map(|v| v / self.volume_unit).collect()
    }

    pub fn n_returns(&self) -> usize {
        self.close.len() - 1
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const FIXTURE: &str = "date,close,volume\n\
        2023-01-02,100,2e6\n\
        2023-01-03,101,3e6\n\
        2023-01-04,99.5,2.5e6\n";

    #[test]
    fn parses_and_derives_series() {
        let d = load_csv_reader(FIXTURE.as_bytes(), DEFAULT_VOLUME_UNIT).unwrap();
        let x = d.returns();
        assert!((x[0] - (101.0f64 / 100.0).ln()).abs() < 1e-15);
        assert!((x[1] - (99.5f64 / 101.0).ln()).abs() < 1e-15);
        assert_eq!(d.tau(), vec![2.0, 3.0, 2.5]);
        assert_eq!(d.n_returns(), 2);
    }

    #[test]
    fn duplicate_or_unsorted_dates_fail() {
        let dup = "date,close,volume\n2023-01-02,100,1e6\n2023-01-02,101,1e6\n";
        assert!(load_csv_reader(dup.as_bytes(), 1e6).is_err());
        let unsorted = "date,close,volume\n2023-01-03,100,1e6\n2023-01-02,101,1e6\n";
        assert!(load_csv_reader(unsorted.as_bytes(), 1e6).is_err());
    }

    #[test]
    fn bad_rows_name_the_line() {
        let neg = "date,close,volume\n2023-01-02,100,1e6\n2023-01-03,-5,1e6\n";
        let err = load_csv_reader(neg.as_bytes(), 1e6).unwrap_err();
        assert!(err.to_string().contains("line 3"), "{err}");
        let bad_date = "date,close,volume\n2023-13-02,100,1e6\n2023-01-03,5,1e6\n";
        assert!(load_csv_reader(bad_date.as_bytes(), 1e6).is_err());
        let bad_header = "day,close,volume\n2023-01-02,100,1e6\n";
        assert!(load_csv_reader(bad_header.as_bytes(), 1e6).is_err());
    }
}
