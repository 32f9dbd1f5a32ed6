use std::collections::HashSet;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use super::{LabelVector, LabeledExample, Provenance, LABEL_NAMES, NUM_LABELS};
use crate::error::{Error, Result};

const PROVENANCE_PREFIX: &str = "# provenance=";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct LoadStats {
    pub rows: usize,
    pub dropped_duplicates: usize,
    pub dropped_empty: usize,
}

#[derive(Debug, Clone)]
pub struct DatasetFile {
    pub examples: Vec<LabeledExample>,
    pub provenance: Provenance,
    pub stats: LoadStats,
}

/// Reads a dataset CSV (`text,bully,sexual,religious,threat,spam`).
///
/// Rows with an empty text are dropped and counted, as are repeated texts
/// (after the first occurrence) in original files. An optional first line
/// `# provenance=<tag>` marks resampled files, whose duplicates are kept.
pub fn load_dataset(path: &Path) -> Result<DatasetFile> {
    let file = std::fs::File::open(path)?;
    read_dataset(file, path)
}

pub fn read_dataset<R: Read>(reader: R, path: &Path) -> Result<DatasetFile> {
    let mut buf = BufReader::new(reader);
    let mut provenance = Provenance::Original;
    let mut line_offset = 0;
    let mut first = String::new();
    buf.read_line(&mut first)?;
    let rest: Box<dyn Read> = if let Some(tag) = first.trim_end().strip_prefix(PROVENANCE_PREFIX) {
        provenance = Provenance::parse(tag.trim())?;
        line_offset = 1;
        Box::new(buf)
    } else {
        Box::new(std::io::Cursor::new(first.into_bytes()).chain(buf))
    };

    let parse_err = |line: u64, msg: String| Error::Parse {
        path: path.to_path_buf(),
        line: line + line_offset,
        msg,
    };

    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(rest);
    let header = rdr.headers()?.clone();
    let expected: Vec<&str> = std::iter::once("text").chain(LABEL_NAMES).collect();
    if header.iter().map(str::trim).collect::<Vec<_>>() != expected {
        return Err(parse_err(1, format!("header must be {}", expected.join(","))));
    }

    let mut stats = LoadStats::default();
    let mut seen = HashSet::new();
    let mut examples = Vec::new();
    for (row_idx, rec) in rdr.records().enumerate() {
        let line = row_idx as u64 + 2;
        let rec = rec.map_err(|e| parse_err(line, e.to_string()))?;
        if rec.len() != NUM_LABELS + 1 {
            return Err(parse_err(
                line,
                format!("expected {} fields, found {}", NUM_LABELS + 1, rec.len()),
            ));
        }
        stats.rows += 1;
        let mut bits = [false; NUM_LABELS];
        for (k, bit) in bits.iter_mut().enumerate() {
            *bit = match rec[k + 1].trim() {
                "0" => false,
                "1" => true,
                other => {
                    return Err(parse_err(
                        line,
                        format!("label {} must be 0 or 1, found {other:?}", LABEL_NAMES[k]),
                    ))
                }
            };
        }
        let text = rec[0].trim();
        if text.is_empty() {
            stats.dropped_empty += 1;
            continue;
        }
        if provenance == Provenance::Original && !seen.insert(text.to_string()) {
            stats.dropped_duplicates += 1;
            continue;
        }
        examples.push(LabeledExample::new(row_idx, text, LabelVector(bits)));
    }
    if stats.dropped_duplicates + stats.dropped_empty > 0 {
        log::info!(
            "{}: dropped {} duplicate and {} empty rows",
            path.display(),
            stats.dropped_duplicates,
            stats.dropped_empty
        );
    }
    Ok(DatasetFile {
        examples,
        provenance,
        stats,
    })
}

/// Writes examples in the dataset CSV format. Non-original provenance is
/// recorded on a leading comment line. Resampled files keep duplicates.
pub fn write_dataset(path: &Path, examples: &[LabeledExample], provenance: Provenance) -> Result<()> {
    let mut out = Vec::new();
    if provenance != Provenance::Original {
        writeln!(out, "{PROVENANCE_PREFIX}{}", provenance.as_str())?;
    }
    {
        let mut w = csv::Writer::from_writer(&mut out);
        w.write_record(std::iter::once("text").chain(LABEL_NAMES))?;
        for e in examples {
            let bits = e.labels.0.map(|b| if b { "1" } else { "0" });
            w.write_record(std::iter::once(e.text.as_str()).chain(bits))?;
        }
        w.flush()?;
    }
    std::fs::write(path, out)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn read(s: &str) -> Result<DatasetFile> {
        read_dataset(s.as_bytes(), Path::new("mem.csv"))
    }

    #[test]
    fn parses_quoted_text() {
        let d = read("text,bully,sexual,religious,threat,spam\n\"a, b\",1,0,0,0,1\nc,0,0,0,0,0\n").unwrap();
        assert_eq!(d.examples.len(), 2);
        assert_eq!(d.examples[0].text, "a, b");
        assert!(d.examples[0].labels.has(4));
        assert_eq!(d.provenance, Provenance::Original);
    }

    #[test]
    fn non_binary_label_reports_line() {
        let err = read("text,bully,sexual,religious,threat,spam\nok,0,0,0,0,0\nbad,2,0,0,0,0\n").unwrap_err();
        match err {
            Error::Parse { line, .. } => assert_eq!(line, 3),
            e => panic!("unexpected {e}"),
        }
    }

    #[test]
    fn wrong_header() {
        assert!(matches!(read("text,a,b,c,d,e\n"), Err(Error::Parse { line: 1, .. })));
    }

    #[test]
    fn duplicates_and_empty_dropped() {
        let d = read("text,bully,sexual,religious,threat,spam\nx,1,0,0,0,0\nx,1,0,0,0,0\n  ,0,0,0,0,0\n").unwrap();
        assert_eq!(d.examples.len(), 1);
        assert_eq!(d.stats.dropped_duplicates, 1);
        assert_eq!(d.stats.dropped_empty, 1);
    }

    #[test]
    fn provenance_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("over.csv");
        let ex = vec![
            LabeledExample::new(0, "a", LabelVector([true, false, false, false, false])),
            LabeledExample::new(0, "a", LabelVector([true, false, false, false, false])),
        ];
        write_dataset(&p, &ex, Provenance::Oversampled).unwrap();
        let d = load_dataset(&p).unwrap();
        assert_eq!(d.provenance, Provenance::Oversampled);
        assert_eq!(d.examples.len(), 2);
    }
}
