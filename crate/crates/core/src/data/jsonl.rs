use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{DataError, Dataset, Image, Sample, Target};
use crate::Task;

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Record {
    id: String,
    image: Vec<Vec<f32>>,
    identity: usize,
    activity: usize,
    activity_text: String,
    target: Target,
}

fn schema(line: usize, field: &'static str, message: impl Into<String>) -> DataError {
    DataError::Schema {
        line,
        field,
        message: message.into(),
    }
}

/// Reads one sample per line. Image size, task and class count are taken
/// from the file: the first sample fixes H×W and, for multi-hot targets, C;
/// for class targets C is one past the largest class seen.
pub fn load_jsonl(path: impl AsRef<Path>) -> Result<Dataset, DataError> {
    let reader = BufReader::new(std::fs::File::open(path)?);
    let mut ds = Dataset {
        height: 0,
        width: 0,
        task: Task::Fer,
        n_classes: 0,
        samples: Vec::new(),
    };
    for (i, line) in reader.lines().enumerate() {
        let line_no = i + 1;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: Record = serde_json::from_str(&line).map_err(|e| {
            if e.is_data() {
                let msg = e.to_string();
                let field = ["id", "image", "identity", "activity", "activity_text", "target"]
                    .into_iter()
                    .find(|f| msg.contains(&format!("`{f}`")))
                    .unwrap_or("record");
                schema(line_no, field, msg)
            } else {
                DataError::Parse {
                    line: line_no,
                    message: e.to_string(),
                }
            }
        })?;
        let h = rec.image.len();
        let w = rec.image.first().map_or(0, Vec::len);
        if h == 0 || w == 0 || rec.image.iter().any(|r| r.len() != w) {
            return Err(schema(line_no, "image", "image must be a non-empty rectangular grid"));
        }
        let first = ds.samples.is_empty();
        if first {
            ds.height = h;
            ds.width = w;
            ds.task = match rec.target {
                Target::Class(_) => Task::Fer,
                Target::MultiHot(_) => Task::Aur,
            };
        } else if (h, w) != (ds.height, ds.width) {
            return Err(schema(
                line_no,
                "image",
                format!("expected {}×{}, got {h}×{w}", ds.height, ds.width),
            ));
        }
        let pixels: Vec<f32> = rec.image.into_iter().flatten().collect();
        if pixels.iter().any(|p| !(0.0..=1.0).contains(p)) {
            return Err(schema(line_no, "image", "pixels must lie in [0, 1]"));
        }
        match (&rec.target, ds.task) {
            (Target::Class(c), Task::Fer) => ds.n_classes = ds.n_classes.max(c + 1),
            (Target::MultiHot(v), Task::Aur) => {
                if first {
                    ds.n_classes = v.len();
                }
                if v.len() != ds.n_classes {
                    return Err(schema(line_no, "target", format!("expected {} entries", ds.n_classes)));
                }
                if v.iter().any(|&b| b > 1) {
                    return Err(schema(line_no, "target", "multi-hot entries must be 0 or 1"));
                }
            }
            _ => return Err(schema(line_no, "target", "target kind differs from the first sample")),
        }
        ds.samples.push(Sample {
            id: rec.id,
            image: Image::new(h, w, pixels),
            identity: rec.identity,
            activity: rec.activity,
            activity_text: rec.activity_text,
            target: rec.target,
        });
    }
    Ok(ds)
}

pub fn write_jsonl(path: impl AsRef<Path>, dataset: &Dataset) -> Result<(), DataError> {
    let mut out = BufWriter::new(std::fs::File::create(path)?);
    for s in &dataset.samples {
        let rec = Record {
            id: s.id.clone(),
            image: s.image.to_rows(),
            identity: s.identity,
            activity: s.activity,
            activity_text: s.activity_text.clone(),
            target: s.target.clone(),
        };
        serde_json::to_writer(&mut out, &rec).map_err(std::io::Error::other)?;
        out.write_all(b"\n")?;
    }
    out.flush()?;
    Ok(())
}
