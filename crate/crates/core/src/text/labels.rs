use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::TextError;

/// One class: its short name and its longer semantic description.
/// Line order in a label file is class-index order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LabelEntry {
    pub name: String,
    pub description: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LabelSet {
    /// Eight basic expressions, alphabetical.
    Fe,
    /// Fifteen action units (AU1 … AU26).
    Au,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ActivitySet {
    Bp4d,
    Bp4dPlus,
}

pub fn builtin_labels(set: LabelSet) -> Vec<LabelEntry> {
    let src = match set {
        LabelSet::Fe => include_str!("../../data/labels/fe_labels.jsonl"),
        LabelSet::Au => include_str!("../../data/labels/au_labels.jsonl"),
    };
    parse_labels(BufReader::new(src.as_bytes())).expect("bundled labels are well-formed")
}

pub fn builtin_activities(set: ActivitySet) -> Vec<String> {
    let src = match set {
        ActivitySet::Bp4d => include_str!("../../data/activities/bp4d.txt"),
        ActivitySet::Bp4dPlus => include_str!("../../data/activities/bp4d_plus.txt"),
    };
    src.lines().filter(|l| !l.is_empty()).map(String::from).collect()
}

fn parse_labels(reader: impl BufRead) -> Result<Vec<LabelEntry>, TextError> {
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let entry: LabelEntry = serde_json::from_str(&line).map_err(|e| TextError::Parse {
            line: i + 1,
            message: e.to_string(),
        })?;
        out.push(entry);
    }
    Ok(out)
}

pub fn load_labels(path: impl AsRef<Path>) -> Result<Vec<LabelEntry>, TextError> {
    parse_labels(BufReader::new(std::fs::File::open(path)?))
}

pub fn write_labels(path: impl AsRef<Path>, labels: &[LabelEntry]) -> Result<(), TextError> {
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    for l in labels {
        writeln!(f, "{}", serde_json::to_string(l).expect("label serializes"))?;
    }
    f.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtin_sets() {
        let fe = builtin_labels(LabelSet::Fe);
        assert_eq!(fe.len(), 8);
        assert_eq!(fe[4].name, "happiness");
        let au = builtin_labels(LabelSet::Au);
        assert_eq!(au.len(), 15);
        assert_eq!(au[0].name, "inner brow raiser");
        assert_eq!(builtin_activities(ActivitySet::Bp4d).len(), 8);
        assert_eq!(builtin_activities(ActivitySet::Bp4dPlus).len(), 10);
    }

    #[test]
    fn label_file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("labels.jsonl");
        let labels = builtin_labels(LabelSet::Fe);
        write_labels(&path, &labels).unwrap();
        assert_eq!(load_labels(&path).unwrap(), labels);
    }

    #[test]
    fn malformed_line_reports_line_number() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("labels.jsonl");
        std::fs::write(&path, "{\"name\":\"a\",\"description\":\"b\"}\n{\"name\":1}\n").unwrap();
        assert!(matches!(load_labels(&path), Err(TextError::Parse { line: 2, .. })));
    }
}
