//! JSON-lines event logs: one header line, then one record per event.

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::{KernelVariant, Site};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LogHeader {
    pub model: String,
    pub d: usize,
    #[serde(rename = "L")]
    pub range: u32,
    pub kernel: KernelVariant,
    pub seed: u64,
    /// Model-specific parameters (horizon, bond probability, …).
    #[serde(default)]
    pub params: serde_json::Map<String, serde_json::Value>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LogRecord {
    pub t: f64,
    pub kind: String,
    pub sites: Vec<Vec<i32>>,
}

impl LogRecord {
    pub fn new(t: f64, kind: &str, sites: &[Site], d: usize) -> LogRecord {
        LogRecord { t, kind: kind.to_string(), sites: sites.iter().map(|s| s.coords(d).to_vec()).collect() }
    }

    pub fn site(&self, i: usize) -> Result<Site> {
        let c = self.sites.get(i).ok_or_else(|| Error::EventLog(format!("record at t={} lacks site {i}", self.t)))?;
        if c.len() > crate::lattice::MAX_DIM {
            return Err(Error::EventLog("site dimension too large".into()));
        }
        Ok(Site::new(c))
    }
}

pub fn write_log<W: Write>(mut w: W, header: &LogHeader, records: &[LogRecord]) -> Result<()> {
    serde_json::to_writer(&mut w, header)?;
    w.write_all(b"\n")?;
    for r in records {
        serde_json::to_writer(&mut w, r)?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_log<R: BufRead>(r: R) -> Result<(LogHeader, Vec<LogRecord>)> {
    let mut lines = r.lines();
    let first = lines.next().ok_or_else(|| Error::EventLog("empty log".into()))??;
    let header: LogHeader = serde_json::from_str(&first)?;
    let mut records = Vec::new();
    for line in lines {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        records.push(serde_json::from_str(&line)?);
    }
    Ok((header, records))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_is_bit_exact() {
        let header = LogHeader {
            model: "voter".into(),
            d: 2,
            range: 1,
            kernel: KernelVariant::NearestNeighbor,
            seed: 11,
            params: Default::default(),
        };
        let recs = vec![
            LogRecord::new(0.1 + 0.2, "birth", &[Site::new(&[0, 0]), Site::new(&[1, 0])], 2),
            LogRecord::new(1.0 / 3.0, "death", &[Site::new(&[5, -3]), Site::new(&[1, 0])], 2),
        ];
        let mut buf = Vec::new();
        write_log(&mut buf, &header, &recs).unwrap();
        let (h, r) = read_log(buf.as_slice()).unwrap();
        assert_eq!(h, header);
        assert_eq!(r, recs);
        assert_eq!(r[0].t.to_bits(), (0.1f64 + 0.2).to_bits());
        let mut again = Vec::new();
        write_log(&mut again, &h, &r).unwrap();
        assert_eq!(buf, again);
    }

    #[test]
    fn empty_log_is_an_error() {
        assert!(matches!(read_log(&b""[..]), Err(Error::EventLog(_))));
    }
}
