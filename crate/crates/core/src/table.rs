//! Event tables and their CSV representation.

use std::fmt;
use std::io::{Read, Write};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::significance::CountPair;

/// Where an event was recorded.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Region {
    On,
    /// One of the background regions, identified by index.
    Off(u32),
    /// Excluded from training and significance evaluation.
    Unlabeled,
}

impl Region {
    pub fn is_on(self) -> bool {
        matches!(self, Region::On)
    }

    pub fn is_labeled(self) -> bool {
        !matches!(self, Region::Unlabeled)
    }
}

impl fmt::Display for Region {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Region::On => f.write_str("on"),
            Region::Off(k) => write!(f, "off:{k}"),
            Region::Unlabeled => Ok(()),
        }
    }
}

impl FromStr for Region {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let s = s.trim();
        match s.to_ascii_lowercase().as_str() {
            "on" => Ok(Region::On),
            "off" => Ok(Region::Off(0)),
            "" | "unlabeled" => Ok(Region::Unlabeled),
            lower => lower
                .strip_prefix("off:")
                .and_then(|k| k.parse().ok())
                .map(Region::Off)
                .ok_or_else(|| format!("unknown region literal '{s}'")),
        }
    }
}

/// Ground-truth class of an event.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Label {
    Positive,
    Negative,
}

impl Label {
    pub fn is_positive(self) -> bool {
        matches!(self, Label::Positive)
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(if self.is_positive() { "1" } else { "-1" })
    }
}

impl FromStr for Label {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s.trim() {
            "1" | "+1" | "1.0" => Ok(Label::Positive),
            "-1" | "0" | "-1.0" | "0.0" => Ok(Label::Negative),
            other => Err(format!("unknown class label '{other}' (expected 1 or -1)")),
        }
    }
}

/// Feature vectors with region tags, group keys and optional clean labels.
#[derive(Debug, Clone, PartialEq)]
pub struct EventTable {
    feature_names: Vec<String>,
    features: Vec<f64>,
    regions: Vec<Region>,
    groups: Vec<String>,
    clean_labels: Option<Vec<Label>>,
}

pub const DEFAULT_GROUP: &str = "all";

impl EventTable {
    /// Builds a table from row-major features. `groups` defaults to one
    /// shared key when `None`.
    pub fn new(
        feature_names: Vec<String>,
        features: Vec<f64>,
        regions: Vec<Region>,
        groups: Option<Vec<String>>,
        clean_labels: Option<Vec<Label>>,
    ) -> Result<Self> {
        let d = feature_names.len();
        if d == 0 {
            return Err(Error::invalid("a table needs at least one feature"));
        }
        let n = regions.len();
        if features.len() != n * d {
            return Err(Error::invalid(format!(
                "{} feature values do not fill {n} rows of {d} features",
                features.len()
            )));
        }
        if let Some(i) = features.iter().position(|x| !x.is_finite()) {
            return Err(Error::invalid(format!(
                "non-finite feature at row {}, column '{}'",
                i / d,
                feature_names[i % d]
            )));
        }
        let groups = groups.unwrap_or_else(|| vec![DEFAULT_GROUP.to_string(); n]);
        if groups.len() != n {
            return Err(Error::invalid("group keys do not match the row count"));
        }
        if clean_labels.as_ref().is_some_and(|l| l.len() != n) {
            return Err(Error::invalid("clean labels do not match the row count"));
        }
        Ok(EventTable {
            feature_names,
            features,
            regions,
            groups,
            clean_labels,
        })
    }

    /// Builds a table from feature rows, naming features `f0, f1, ...`.
    pub fn from_rows(rows: &[Vec<f64>], regions: Vec<Region>) -> Result<Self> {
        let d = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != d) {
            return Err(Error::invalid("rows have differing lengths"));
        }
        let names = (0..d).map(|j| format!("f{j}")).collect();
        Self::new(names, rows.concat(), regions, None, None)
    }

    pub fn n_rows(&self) -> usize {
        self.regions.len()
    }

    pub fn n_features(&self) -> usize {
        self.feature_names.len()
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn features(&self) -> &[f64] {
        &self.features
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        let d = self.n_features();
        &self.features[i * d..(i + 1) * d]
    }

    #[inline]
    pub fn value(&self, i: usize, j: usize) -> f64 {
        self.features[i * self.n_features() + j]
    }

    pub fn region(&self, i: usize) -> Region {
        self.regions[i]
    }

    pub fn regions(&self) -> &[Region] {
        &self.regions
    }

    pub fn group(&self, i: usize) -> &str {
        &self.groups[i]
    }

    pub fn groups(&self) -> &[String] {
        &self.groups
    }

    pub fn clean_labels(&self) -> Option<&[Label]> {
        self.clean_labels.as_deref()
    }

    /// Indices of rows tagged On or Off.
    pub fn labeled_rows(&self) -> Vec<usize> {
        (0..self.n_rows()).filter(|&i| self.regions[i].is_labeled()).collect()
    }

    /// On/Off totals over the given rows (duplicates count repeatedly).
    pub fn counts(&self, rows: &[usize]) -> CountPair {
        let mut c = CountPair::ZERO;
        for &i in rows {
            match self.regions[i] {
                Region::On => c.n_on += 1.0,
                Region::Off(_) => c.n_off += 1.0,
                Region::Unlabeled => {}
            }
        }
        c
    }

    /// Distinct Off region indices, ascending.
    pub fn off_regions(&self) -> Vec<u32> {
        let mut out: Vec<u32> = self
            .regions
            .iter()
            .filter_map(|r| match r {
                Region::Off(k) => Some(*k),
                _ => None,
            })
            .collect();
        out.sort_unstable();
        out.dedup();
        out
    }

    /// The same table with new region tags.
    pub fn with_regions(&self, regions: Vec<Region>) -> Result<Self> {
        if regions.len() != self.n_rows() {
            return Err(Error::invalid("region tags do not match the row count"));
        }
        Ok(EventTable {
            regions,
            ..self.clone()
        })
    }

    /// A new table holding the given rows, in order.
    pub fn select(&self, rows: &[usize]) -> EventTable {
        let d = self.n_features();
        let mut features = Vec::with_capacity(rows.len() * d);
        for &i in rows {
            features.extend_from_slice(self.row(i));
        }
        EventTable {
            feature_names: self.feature_names.clone(),
            features,
            regions: rows.iter().map(|&i| self.regions[i]).collect(),
            groups: rows.iter().map(|&i| self.groups[i].clone()).collect(),
            clean_labels: self.clean_labels.as_ref().map(|l| rows.iter().map(|&i| l[i]).collect()),
        }
    }
}

/// Column roles for CSV ingestion. Every other column is a numeric feature.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CsvSchema {
    /// Region column; when the file lacks it every row is unlabeled.
    pub region_column: String,
    pub group_column: Option<String>,
    pub label_column: Option<String>,
}

impl Default for CsvSchema {
    fn default() -> Self {
        CsvSchema {
            region_column: "region".into(),
            group_column: None,
            label_column: None,
        }
    }
}

pub fn load_event_csv(path: impl AsRef<Path>, schema: &CsvSchema) -> Result<EventTable> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_event_csv(file, schema)
}

pub fn read_event_csv(reader: impl Read, schema: &CsvSchema) -> Result<EventTable> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let header: Vec<String> = rdr.headers()?.iter().map(|h| h.trim().to_string()).collect();

    let find = |name: &str| header.iter().position(|h| h == name);
    let region_col = find(&schema.region_column);
    let group_col = match &schema.group_column {
        Some(g) => Some(find(g).ok_or_else(|| Error::invalid(format!("group column '{g}' not in header")))?),
        None => None,
    };
    let label_col = match &schema.label_column {
        Some(l) => Some(find(l).ok_or_else(|| Error::invalid(format!("label column '{l}' not in header")))?),
        None => None,
    };
    let feature_cols: Vec<usize> = (0..header.len())
        .filter(|&c| Some(c) != region_col && Some(c) != group_col && Some(c) != label_col)
        .collect();
    if feature_cols.is_empty() {
        return Err(Error::invalid("no feature columns in header"));
    }

    let mut features = Vec::new();
    let mut regions = Vec::new();
    let mut groups = group_col.map(|_| Vec::new());
    let mut labels = label_col.map(|_| Vec::new());

    for (r, record) in rdr.records().enumerate() {
        let record = record?;
        let row = r + 2;
        if record.len() != header.len() {
            return Err(Error::Csv {
                row,
                column: String::new(),
                message: format!("expected {} fields, found {}", header.len(), record.len()),
            });
        }
        for &c in &feature_cols {
            let cell = record[c].trim();
            let err = |message: String| Error::Csv {
                row,
                column: header[c].clone(),
                message,
            };
            if cell.is_empty() {
                return Err(err("missing feature value".into()));
            }
            let x: f64 = cell.parse().map_err(|_| err(format!("non-numeric value '{cell}'")))?;
            if !x.is_finite() {
                return Err(err(format!("non-finite value '{cell}'")));
            }
            features.push(x);
        }
        regions.push(match region_col {
            Some(c) => record[c].parse::<Region>().map_err(|message| Error::Csv {
                row,
                column: header[c].clone(),
                message,
            })?,
            None => Region::Unlabeled,
        });
        if let (Some(c), Some(g)) = (group_col, groups.as_mut()) {
            g.push(record[c].trim().to_string());
        }
        if let (Some(c), Some(l)) = (label_col, labels.as_mut()) {
            l.push(record[c].parse::<Label>().map_err(|message| Error::Csv {
                row,
                column: header[c].clone(),
                message,
            })?);
        }
    }

    let names = feature_cols.iter().map(|&c| header[c].clone()).collect();
    EventTable::new(names, features, regions, groups, labels)
}

/// Writes `table` with its features first, then the schema's region, group
/// and label columns (the latter two only when the schema names them).
pub fn write_event_csv(table: &EventTable, schema: &CsvSchema, writer: impl Write) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    let mut header: Vec<&str> = table.feature_names().iter().map(String::as_str).collect();
    header.push(&schema.region_column);
    if let Some(g) = &schema.group_column {
        header.push(g);
    }
    if let (Some(l), Some(_)) = (&schema.label_column, table.clean_labels()) {
        header.push(l);
    }
    wtr.write_record(&header)?;
    for i in 0..table.n_rows() {
        let mut rec: Vec<String> = table.row(i).iter().map(|x| x.to_string()).collect();
        rec.push(table.region(i).to_string());
        if schema.group_column.is_some() {
            rec.push(table.group(i).to_string());
        }
        if let (Some(_), Some(labels)) = (&schema.label_column, table.clean_labels()) {
            rec.push(labels[i].to_string());
        }
        wtr.write_record(&rec)?;
    }
    wtr.flush().map_err(|e| Error::io("<csv output>", e))?;
    Ok(())
}
