//! `label,f1,...,fk` text ingestion.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use super::Dataset;
use crate::error::{Error, Result};

pub fn load_csv(path: &Path) -> Result<Dataset> {
    read_csv(BufReader::new(File::open(path)?))
}

/// Parses rows of `label,f1,...,fk`. Blank lines are skipped; every other
/// row must carry the same number of features. `n_classes` is the largest
/// label plus one.
pub fn read_csv<R: BufRead>(reader: R) -> Result<Dataset> {
    let mut features = Vec::new();
    let mut labels = Vec::new();
    let mut width: Option<usize> = None;
    for (idx, line) in reader.lines().enumerate() {
        let line_no = idx + 1;
        let line = line?;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let parse_err = |message: String| Error::Parse {
            line: line_no,
            message,
        };
        let mut cells = line.split(',').map(str::trim);
        let label_cell = cells.next().unwrap_or_default();
        let label: u32 = label_cell
            .parse()
            .map_err(|_| parse_err(format!("label {label_cell:?} is not a nonnegative integer")))?;
        let before = features.len();
        for cell in cells {
            let v: f32 = cell
                .parse()
                .map_err(|_| parse_err(format!("feature {cell:?} is not a number")))?;
            if !v.is_finite() {
                return Err(parse_err(format!("feature {cell:?} is not finite")));
            }
            features.push(v);
        }
        let k = features.len() - before;
        match width {
            None if k == 0 => return Err(parse_err("row has no features".into())),
            None => width = Some(k),
            Some(w) if w != k => {
                return Err(parse_err(format!("expected {w} features, found {k}")));
            }
            Some(_) => {}
        }
        labels.push(label);
    }
    let Some(width) = width else {
        return Err(Error::Parse {
            line: 0,
            message: "file contains no samples".into(),
        });
    };
    let n_classes = labels.iter().max().map_or(0, |&m| m as usize + 1);
    Dataset::new(features, labels, width, n_classes)
}

/// Writes features with shortest round-trip formatting, so loading the file
/// back reproduces the f32 values exactly.
pub fn write_csv(ds: &Dataset, path: &Path) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    for (row, label) in ds.rows().zip(ds.labels()) {
        write!(w, "{label}")?;
        for f in row {
            write!(w, ",{f}")?;
        }
        writeln!(w)?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{gen_synthetic, SyntheticSpec};

    fn parse(text: &str) -> Result<Dataset> {
        read_csv(text.as_bytes())
    }

    #[test]
    fn well_formed() {
        let ds = parse("0,1.0,2.0\n1,3,4\n2,-0.5,1e3\n").unwrap();
        assert_eq!(ds.len(), 3);
        assert_eq!(ds.n_features(), 2);
        assert_eq!(ds.n_classes(), 3);
        assert_eq!(ds.row(2), &[-0.5, 1000.0]);
    }

    #[test]
    fn ragged_row_names_line() {
        match parse("0,1,2\n1,3\n") {
            Err(Error::Parse { line, message }) => {
                assert_eq!(line, 2);
                assert!(message.contains("expected 2"), "{message}");
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn bad_cells_and_empty() {
        assert!(matches!(
            parse("0,1\nx,2\n"),
            Err(Error::Parse { line: 2, .. })
        ));
        assert!(matches!(
            parse("0,1\n1,abc\n"),
            Err(Error::Parse { line: 2, .. })
        ));
        assert!(matches!(parse("-1,1\n"), Err(Error::Parse { line: 1, .. })));
        assert!(matches!(
            parse("0,inf\n"),
            Err(Error::Parse { line: 1, .. })
        ));
        assert!(matches!(parse("3\n"), Err(Error::Parse { line: 1, .. })));
        assert!(matches!(parse(""), Err(Error::Parse { .. })));
        assert!(matches!(parse("\n\n"), Err(Error::Parse { .. })));
    }

    #[test]
    fn generated_roundtrip() {
        let spec = SyntheticSpec {
            n_samples: 300,
            n_features: 5,
            n_classes: 3,
            class_separation: 4.0,
            noise_sigma: 1.3,
            seed: 8,
        };
        let ds = gen_synthetic(&spec).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d.csv");
        write_csv(&ds, &path).unwrap();
        let back = load_csv(&path).unwrap();
        assert_eq!(back.labels(), ds.labels());
        for (a, b) in back.features().iter().zip(ds.features()) {
            let rel = ((a - b) / b.abs().max(f32::MIN_POSITIVE)).abs();
            assert!(rel < 5e-6, "{a} vs {b}");
        }
    }
}
