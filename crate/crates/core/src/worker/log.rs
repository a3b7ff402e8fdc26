use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use crate::error::{Error, Result};

pub const CSV_HEADER: &str = "iter,wall_ms,batch_loss,cumulated_loss,exchanged,period_len";

/// One local SGD iteration as seen by the worker.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainRecord {
    /// 1-based iteration index.
    pub iter: u64,
    /// Milliseconds since the run started (virtual time in the simulator).
    pub wall_ms: u64,
    pub batch_loss: f64,
    /// Accumulated loss after this iteration; 0 on exchange records.
    pub cumulated_loss: f64,
    pub exchanged: bool,
    /// Iterations since the previous exchange, set on exchange records.
    pub period_len: u64,
}

impl TrainRecord {
    /// Equality of every field except the wall clock, with losses compared
    /// bitwise.
    pub fn same_trajectory(&self, other: &TrainRecord) -> bool {
        self.iter == other.iter
            && self.batch_loss.to_bits() == other.batch_loss.to_bits()
            && self.cumulated_loss.to_bits() == other.cumulated_loss.to_bits()
            && self.exchanged == other.exchanged
            && self.period_len == other.period_len
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainLog {
    pub records: Vec<TrainRecord>,
}

impl TrainLog {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn exchanges(&self) -> impl Iterator<Item = &TrainRecord> {
        self.records.iter().filter(|r| r.exchanged)
    }

    /// Period lengths of all exchanges, in order.
    pub fn periods(&self) -> Vec<u64> {
        self.exchanges().map(|r| r.period_len).collect()
    }

    pub fn same_trajectory(&self, other: &TrainLog) -> bool {
        self.records.len() == other.records.len()
            && self
                .records
                .iter()
                .zip(&other.records)
                .all(|(a, b)| a.same_trajectory(b))
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        writeln!(w, "{CSV_HEADER}")?;
        for r in &self.records {
            writeln!(
                w,
                "{},{},{},{},{},{}",
                r.iter,
                r.wall_ms,
                r.batch_loss,
                r.cumulated_loss,
                u8::from(r.exchanged),
                r.period_len
            )?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv(path: &Path) -> Result<TrainLog> {
        let reader = BufReader::new(File::open(path)?);
        let mut records = Vec::new();
        for (i, line) in reader.lines().enumerate() {
            let line = line?;
            let err = |message: String| Error::Parse {
                line: i + 1,
                message,
            };
            if i == 0 {
                if line.trim() != CSV_HEADER {
                    return Err(err(format!("unexpected header {line:?}")));
                }
                continue;
            }
            let cells: Vec<&str> = line.trim().split(',').collect();
            if cells.len() != 6 {
                return Err(err(format!("expected 6 columns, found {}", cells.len())));
            }
            let int = |s: &str| s.parse::<u64>().map_err(|e| err(format!("{s:?}: {e}")));
            let real = |s: &str| s.parse::<f64>().map_err(|e| err(format!("{s:?}: {e}")));
            records.push(TrainRecord {
                iter: int(cells[0])?,
                wall_ms: int(cells[1])?,
                batch_loss: real(cells[2])?,
                cumulated_loss: real(cells[3])?,
                exchanged: match cells[4] {
                    "1" => true,
                    "0" => false,
                    other => return Err(err(format!("exchanged flag {other:?}"))),
                },
                period_len: int(cells[5])?,
            });
        }
        Ok(TrainLog { records })
    }
}
