//! PMLB-style tab-separated files with an optional `.meta.json` sidecar.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use flate2::read::GzDecoder;
use flate2::write::GzEncoder;
use flate2::Compression;
use serde::{Deserialize, Serialize};

use super::{DataError, Dataset, Difficulty, Split, Task, TaskSpec};
use crate::expr::{parse, print_infix};

pub const TARGET_COLUMN: &str = "target";

/// Generator metadata stored next to a dataset file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetMeta {
    pub name: String,
    pub task: Option<Task>,
    pub difficulty: Option<Difficulty>,
    pub seed: Option<u64>,
    pub split: Option<Split>,
    /// Infix model string, variables `x0`-based.
    pub ground_truth: Option<String>,
    pub relevant_vars: Vec<usize>,
    pub irrelevant_vars: Vec<usize>,
    pub noise_ratio: Option<f64>,
    pub spec: Option<TaskSpec>,
    /// Defaults chosen by the generator rather than fixed by the task design.
    pub assumptions: Vec<String>,
}

const ASSUMPTIONS: &[&str] = &[
    "sample counts default to 1000 train / 1000 test",
    "inputs uniform on [-3, 3] unless the task fixes its own range",
    "noise standard deviation is sigma_y * sqrt(ratio / (1 - ratio)) with sample sigma_y of the clean target",
    "noise is added to the training target only",
];

impl DatasetMeta {
    fn from_dataset(ds: &Dataset) -> Self {
        DatasetMeta {
            name: ds.name.clone(),
            task: ds.spec.as_ref().map(|s| s.task),
            difficulty: ds.spec.as_ref().map(|s| s.difficulty),
            seed: ds.spec.as_ref().map(|s| s.seed),
            split: ds.split,
            ground_truth: ds.ground_truth.as_ref().map(print_infix),
            relevant_vars: ds.relevant_vars.clone(),
            irrelevant_vars: ds.irrelevant_vars.clone(),
            noise_ratio: ds.spec.as_ref().map(|s| s.noise_ratio),
            spec: ds.spec.clone(),
            assumptions: if ds.spec.is_some() {
                ASSUMPTIONS.iter().map(|s| s.to_string()).collect()
            } else {
                vec![]
            },
        }
    }
}

/// `data/foo.tsv` and `data/foo.tsv.gz` both map to `data/foo.meta.json`.
pub fn sidecar_path(path: &Path) -> PathBuf {
    let name = path.file_name().and_then(|n| n.to_str()).unwrap_or("dataset");
    let stem = name.strip_suffix(".gz").unwrap_or(name);
    let stem = match stem.rfind('.') {
        Some(i) if i > 0 => &stem[..i],
        _ => stem,
    };
    path.with_file_name(format!("{stem}.meta.json"))
}

fn is_gz(path: &Path) -> bool {
    path.extension().is_some_and(|e| e == "gz")
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> DataError + '_ {
    move |source| DataError::Io {
        path: path.display().to_string(),
        source,
    }
}

fn schema_err(path: &Path, message: impl Into<String>) -> DataError {
    DataError::Schema {
        path: path.display().to_string(),
        message: message.into(),
    }
}

fn render(ds: &Dataset) -> String {
    let mut out = String::new();
    for name in &ds.feature_names {
        out.push_str(name);
        out.push('\t');
    }
    out.push_str(TARGET_COLUMN);
    out.push('\n');
    for (row, y) in ds.features.iter().zip(&ds.target) {
        for v in row {
            out.push_str(&format!("{v:?}\t"));
        }
        out.push_str(&format!("{y:?}\n"));
    }
    out
}

/// Writes `ds` as TSV (gzip when the path ends in `.gz`) plus its sidecar.
pub fn write_dataset(ds: &Dataset, path: &Path) -> Result<(), DataError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(io_err(dir))?;
    }
    let body = render(ds);
    let file = File::create(path).map_err(io_err(path))?;
    if is_gz(path) {
        let mut enc = GzEncoder::new(BufWriter::new(file), Compression::default());
        enc.write_all(body.as_bytes()).map_err(io_err(path))?;
        enc.finish().map_err(io_err(path))?.flush().map_err(io_err(path))?;
    } else {
        let mut w = BufWriter::new(file);
        w.write_all(body.as_bytes()).map_err(io_err(path))?;
        w.flush().map_err(io_err(path))?;
    }
    let meta = DatasetMeta::from_dataset(ds);
    let side = sidecar_path(path);
    let json = serde_json::to_string_pretty(&meta).expect("metadata serializes");
    std::fs::write(&side, json + "\n").map_err(io_err(&side))?;
    Ok(())
}

/// Reads a PMLB-style file; the sidecar is used when present.
pub fn read_dataset(path: &Path) -> Result<Dataset, DataError> {
    let file = File::open(path).map_err(io_err(path))?;
    let mut text = String::new();
    if is_gz(path) {
        GzDecoder::new(BufReader::new(file))
            .read_to_string(&mut text)
            .map_err(io_err(path))?;
    } else {
        BufReader::new(file).read_to_string(&mut text).map_err(io_err(path))?;
    }

    let mut reader = csv::ReaderBuilder::new()
        .delimiter(b'\t')
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let header: Vec<String> = reader
        .headers()
        .map_err(|e| schema_err(path, e.to_string()))?
        .iter()
        .map(str::to_string)
        .collect();
    let target_col = header
        .iter()
        .position(|h| h == TARGET_COLUMN)
        .ok_or_else(|| schema_err(path, "missing `target` column"))?;

    let mut features = Vec::new();
    let mut target = Vec::new();
    for (line, record) in reader.records().enumerate() {
        let record = record.map_err(|e| schema_err(path, e.to_string()))?;
        if record.len() != header.len() {
            return Err(schema_err(
                path,
                format!("row {} has {} fields", line + 1, record.len()),
            ));
        }
        let mut row = Vec::with_capacity(header.len() - 1);
        for (j, field) in record.iter().enumerate() {
            let v: f64 = field
                .parse()
                .map_err(|_| schema_err(path, format!("row {}: `{field}` is not a number", line + 1)))?;
            if j == target_col {
                target.push(v);
            } else {
                row.push(v);
            }
        }
        features.push(row);
    }

    let name = path
        .file_name()
        .and_then(|n| n.to_str())
        .map(|n| n.trim_end_matches(".gz").trim_end_matches(".tsv").to_string())
        .unwrap_or_default();
    let mut ds = Dataset::new(name, features, target);
    ds.feature_names = header
        .iter()
        .enumerate()
        .filter(|(j, _)| *j != target_col)
        .map(|(_, h)| h.clone())
        .collect();

    let side = sidecar_path(path);
    if side.exists() {
        let text = std::fs::read_to_string(&side).map_err(io_err(&side))?;
        let meta: DatasetMeta = serde_json::from_str(&text).map_err(|e| schema_err(&side, e.to_string()))?;
        ds.name = meta.name;
        ds.ground_truth = match meta.ground_truth {
            Some(s) => Some(parse(&s).map_err(|e| schema_err(&side, e.to_string()))?),
            None => None,
        };
        ds.relevant_vars = meta.relevant_vars;
        ds.irrelevant_vars = meta.irrelevant_vars;
        ds.spec = meta.spec;
        ds.split = meta.split;
    }
    Ok(ds)
}
