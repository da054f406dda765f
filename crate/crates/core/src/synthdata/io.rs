use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::synthdata::SyntheticSample;

/// Writes one JSON record per line.
pub fn write_dataset(samples: &[SyntheticSample], path: &Path) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    for s in samples {
        let line = serde_json::to_string(s).map_err(|e| Error::InvalidArgument(e.to_string()))?;
        writeln!(w, "{line}").map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_dataset(path: &Path) -> Result<Vec<SyntheticSample>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        out.extend(parse_line(&line, path, i + 1)?);
    }
    Ok(out)
}

/// Parses dataset text already in memory. `origin` only labels errors.
pub fn parse_dataset(text: &str, origin: &Path) -> Result<Vec<SyntheticSample>> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        out.extend(parse_line(line, origin, i + 1)?);
    }
    Ok(out)
}

fn parse_line(line: &str, path: &Path, line_no: usize) -> Result<Option<SyntheticSample>> {
    if line.trim().is_empty() {
        return Ok(None);
    }
    let bad = |message: String| Error::MalformedRecord {
        path: path.to_path_buf(),
        line: line_no,
        message,
    };
    let s: SyntheticSample = serde_json::from_str(line).map_err(|e| bad(e.to_string()))?;
    let side = (s.image.len() as f64).sqrt() as usize;
    if side == 0 || side * side != s.image.len() {
        return Err(bad(format!("image has {} pixels, not a square grid", s.image.len())));
    }
    if s.image.iter().any(|p| !(0.0..=1.0).contains(p)) {
        return Err(bad("pixel outside [0, 1]".into()));
    }
    if !(s.gt > 0.0 && s.gt < 1.0) {
        return Err(bad(format!("gt {} outside (0, 1)", s.gt)));
    }
    if s.spec.seed != s.seed {
        return Err(bad("spec seed differs from record seed".into()));
    }
    Ok(Some(s))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synthdata::{generate_dataset, GenConfig};

    #[test]
    fn round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d.jsonl");
        let data = generate_dataset(1, "train", 100, &GenConfig::default()).unwrap();
        write_dataset(&data, &path).unwrap();
        assert_eq!(read_dataset(&path).unwrap(), data);
    }

    #[test]
    fn empty_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("e.jsonl");
        write_dataset(&[], &path).unwrap();
        assert!(read_dataset(&path).unwrap().is_empty());
    }

    #[test]
    fn truncated_names_line() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.jsonl");
        let data = generate_dataset(1, "train", 3, &GenConfig::default()).unwrap();
        write_dataset(&data, &path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let cut = text.len() - text.lines().last().unwrap().len() / 2;
        std::fs::write(&path, &text[..cut]).unwrap();
        match read_dataset(&path) {
            Err(Error::MalformedRecord { line, .. }) => assert_eq!(line, 3),
            other => panic!("expected malformed record, got {other:?}"),
        }
    }

    #[test]
    fn missing_file_names_path() {
        let err = read_dataset(Path::new("/nonexistent/x.jsonl")).unwrap_err();
        assert!(err.to_string().contains("/nonexistent/x.jsonl"));
    }
}
