use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::harness::{build_groups, AttributeTable, BuiltGroups, GroupSpec};
use crate::scalar::sigmoid;
use crate::{Dataset, Sample};

pub const SCORE: &str = "score";
pub const LABEL: &str = "label";
pub const LOGIT: &str = "logit";
pub const SAMPLE_ID: &str = "sample_id";

/// Contents of a prediction file: scores and labels plus whatever
/// attribute columns came with them.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictionFile {
    pub dataset: Dataset,
    pub attributes: AttributeTable,
    pub sample_ids: Option<Vec<String>>,
}

fn parse_err(line: usize, message: impl Into<String>) -> Error {
    Error::Parse { line, message: message.into() }
}

pub fn read_predictions<R: Read>(reader: R) -> Result<PredictionFile> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let header: Vec<String> = rdr.headers()?.iter().map(|h| h.trim().to_string()).collect();
    let find = |name: &str| header.iter().position(|h| h == name);
    let score_col = find(SCORE).ok_or_else(|| Error::Schema(format!("missing required column {SCORE}")))?;
    let label_col = find(LABEL).ok_or_else(|| Error::Schema(format!("missing required column {LABEL}")))?;
    let logit_col = find(LOGIT);
    let id_col = find(SAMPLE_ID);
    let attr_cols: Vec<usize> =
        (0..header.len()).filter(|&k| ![Some(score_col), Some(label_col), logit_col, id_col].contains(&Some(k))).collect();

    let mut samples = Vec::new();
    let mut ids = Vec::new();
    let mut attrs: Vec<Vec<String>> = vec![Vec::new(); attr_cols.len()];
    for record in rdr.records() {
        let record = record.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line() as usize);
            parse_err(line, e.to_string())
        })?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        let cell = |k: usize| record.get(k).unwrap_or("").trim();

        let raw = cell(score_col);
        let score: f64 = raw.parse().map_err(|_| parse_err(line, format!("score {raw:?} is not a number")))?;
        if !(0.0..=1.0).contains(&score) {
            return Err(parse_err(line, format!("score {raw} outside [0, 1]")));
        }
        let label = match cell(label_col) {
            "0" => false,
            "1" => true,
            other => return Err(parse_err(line, format!("label {other:?} is not 0 or 1"))),
        };
        let mut sample = Sample::new(score, label);
        if let Some(k) = logit_col {
            let raw = cell(k);
            if !raw.is_empty() {
                let z: f64 = raw.parse().map_err(|_| parse_err(line, format!("logit {raw:?} is not a number")))?;
                if !z.is_finite() || (sigmoid(z) - score).abs() > 1e-6 {
                    return Err(parse_err(line, format!("logit {raw} does not match score {score}")));
                }
                sample = sample.with_logit(z);
            }
        }
        samples.push(sample);
        if let Some(k) = id_col {
            ids.push(cell(k).to_string());
        }
        for (col, &k) in attrs.iter_mut().zip(&attr_cols) {
            col.push(cell(k).to_string());
        }
    }
    if samples.is_empty() {
        return Err(Error::Schema("prediction file has no rows".into()));
    }
    let n = samples.len();
    let attributes = if attr_cols.is_empty() {
        AttributeTable::empty(n)
    } else {
        AttributeTable::new(attr_cols.iter().map(|&k| header[k].clone()).collect(), attrs)?
    };
    Ok(PredictionFile {
        dataset: Dataset::new(samples, Vec::new())?,
        attributes,
        sample_ids: id_col.map(|_| ids),
    })
}

pub fn load_predictions(path: &Path) -> Result<PredictionFile> {
    read_predictions(File::open(path)?)
}

/// Writes `sample_id` (if any), `score`, `label`, `logit` (if any sample
/// has one) and the attribute columns. Floats use the shortest text that
/// parses back to the same value.
pub fn write_predictions<W: Write>(file: &PredictionFile, writer: W) -> Result<()> {
    let samples = file.dataset.samples();
    let has_logit = samples.iter().any(|s| s.logit.is_some());
    let mut w = csv::Writer::from_writer(writer);
    let mut header: Vec<&str> = Vec::new();
    if file.sample_ids.is_some() {
        header.push(SAMPLE_ID);
    }
    header.extend([SCORE, LABEL]);
    if has_logit {
        header.push(LOGIT);
    }
    header.extend(file.attributes.names().iter().map(String::as_str));
    w.write_record(&header)?;
    for (i, s) in samples.iter().enumerate() {
        let mut row: Vec<String> = Vec::with_capacity(header.len());
        if let Some(ids) = &file.sample_ids {
            row.push(ids[i].clone());
        }
        row.push(s.score.to_string());
        row.push(if s.label { "1" } else { "0" }.to_string());
        if has_logit {
            row.push(s.logit.map(|z| z.to_string()).unwrap_or_default());
        }
        row.extend(file.attributes.row(i).map(str::to_string));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn save_predictions(file: &PredictionFile, path: &Path) -> Result<()> {
    write_predictions(file, File::create(path)?)
}

/// Loads a prediction file and attaches masks for the groups that pass the `gamma` filter.
pub fn load_dataset(path: &Path, groups: &[GroupSpec], gamma: f64) -> Result<(Dataset, BuiltGroups)> {
    let file = load_predictions(path)?;
    let built = build_groups(groups, &file.attributes, gamma)?;
    let dataset = file.dataset.with_groups(built.collection.names(), &built.collection.masks())?;
    Ok((dataset, built))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn read(text: &str) -> Result<PredictionFile> {
        read_predictions(text.as_bytes())
    }

    #[test]
    fn two_rows() {
        let f = read("score,label\n0.2,0\n0.8,1\n").unwrap();
        assert_eq!(f.dataset.len(), 2);
        assert_eq!(f.dataset.scores(), vec![0.2, 0.8]);
        assert_eq!(f.dataset.labels(), vec![false, true]);
        assert!(f.sample_ids.is_none());
    }

    #[test]
    fn bad_score_names_its_line() {
        let err = read("score,label\n0.2,0\n1.2,1\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 3, .. }), "{err}");
        assert!(err.to_string().starts_with("line 3:"));
    }

    #[test]
    fn bad_labels_and_missing_columns() {
        assert!(matches!(read("score,label\n0.5,2\n"), Err(Error::Parse { line: 2, .. })));
        assert!(matches!(read("score,y\n0.5,1\n"), Err(Error::Schema(_))));
        assert!(matches!(read("score,label\n0.5\n"), Err(Error::Parse { line: 2, .. })));
        assert!(matches!(read("score,label,logit\n0.5,1,3.0\n"), Err(Error::Parse { line: 2, .. })));
    }

    #[test]
    fn round_trip_is_exact() {
        let text = "sample_id,score,label,logit,age,city\n\
                    a,0.1234567890123,1,,41,Paris\n\
                    b,0.5,0,0,17,Lyon\n\
                    c,0.3333333333333333,0,-0.6931471805599453,60,Nice\n";
        let f = read(text).unwrap();
        let mut out = Vec::new();
        write_predictions(&f, &mut out).unwrap();
        let g = read(std::str::from_utf8(&out).unwrap()).unwrap();
        assert_eq!(f, g);
        assert_eq!(g.attributes.column("city").unwrap(), ["Paris", "Lyon", "Nice"]);
        let mut again = Vec::new();
        write_predictions(&g, &mut again).unwrap();
        assert_eq!(out, again);
    }
}
