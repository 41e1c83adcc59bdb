//! Tabular data with missing cells.
//!
//! A [`Dataset`] is an `n x d` grid where each attribute is either continuous
//! or nominal. Learners never see it directly: [`Dataset::encode`] min-max
//! scales continuous attributes into `[0, 1]` and expands each nominal
//! attribute into one column per category, giving an [`EncodedMatrix`].
//! [`EncodedMatrix::decode`] maps a dense prediction grid back to the
//! original schema.

use std::fmt;
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default token marking a missing cell.
pub const MISSING_TOKEN: &str = "?";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum AttributeKind {
    Continuous { min: f64, max: f64 },
    Nominal { categories: Vec<String> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttributeSpec {
    pub name: String,
    pub kind: AttributeKind,
}

impl AttributeSpec {
    pub fn continuous(name: impl Into<String>, min: f64, max: f64) -> Self {
        AttributeSpec {
            name: name.into(),
            kind: AttributeKind::Continuous { min, max },
        }
    }

    pub fn nominal<S: Into<String>>(name: impl Into<String>, categories: impl IntoIterator<Item = S>) -> Self {
        AttributeSpec {
            name: name.into(),
            kind: AttributeKind::Nominal {
                categories: categories.into_iter().map(Into::into).collect(),
            },
        }
    }

    pub fn is_nominal(&self) -> bool {
        matches!(self.kind, AttributeKind::Nominal { .. })
    }

    /// Number of encoded columns this attribute expands to.
    pub fn width(&self) -> usize {
        match &self.kind {
            AttributeKind::Continuous { .. } => 1,
            AttributeKind::Nominal { categories } => categories.len(),
        }
    }

    pub fn categories(&self) -> Option<&[String]> {
        match &self.kind {
            AttributeKind::Nominal { categories } => Some(categories),
            AttributeKind::Continuous { .. } => None,
        }
    }

    /// Scales a raw continuous value into the unit interval. A constant
    /// attribute maps everything to 0.5.
    pub fn normalize(&self, value: f64) -> f64 {
        match self.kind {
            AttributeKind::Continuous { min, max } if max > min => (value - min) / (max - min),
            _ => 0.5,
        }
    }

    /// Inverse of [`normalize`](Self::normalize), clamping to `[0, 1]` first.
    pub fn denormalize(&self, value: f64) -> f64 {
        match self.kind {
            AttributeKind::Continuous { min, max } => {
                let v = if value.is_nan() { 0.5 } else { value.clamp(0.0, 1.0) };
                if max > min {
                    min + v * (max - min)
                } else {
                    min
                }
            }
            AttributeKind::Nominal { .. } => value,
        }
    }

    fn validate(&self) -> Result<()> {
        match &self.kind {
            AttributeKind::Continuous { min, max } => {
                if min.is_finite() && max.is_finite() && min > max {
                    return Err(Error::Schema(format!(
                        "attribute '{}': min {min} exceeds max {max}",
                        self.name
                    )));
                }
            }
            AttributeKind::Nominal { categories } => {
                if categories.is_empty() {
                    return Err(Error::Schema(format!("attribute '{}' has no categories", self.name)));
                }
                for (i, c) in categories.iter().enumerate() {
                    if categories[..i].contains(c) {
                        return Err(Error::Schema(format!(
                            "attribute '{}' lists category '{c}' twice",
                            self.name
                        )));
                    }
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Cell {
    Missing,
    Real(f64),
    Category(usize),
}

impl Cell {
    pub fn is_missing(&self) -> bool {
        matches!(self, Cell::Missing)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    attrs: Vec<AttributeSpec>,
    rows: usize,
    cells: Vec<Cell>,
}

impl Dataset {
    /// Builds a dataset from row-major cells, checking every cell against
    /// its attribute.
    pub fn new(attrs: Vec<AttributeSpec>, cells: Vec<Vec<Cell>>) -> Result<Self> {
        if attrs.is_empty() {
            return Err(Error::Schema("dataset needs at least one attribute".into()));
        }
        if cells.is_empty() {
            return Err(Error::Schema("dataset needs at least one row".into()));
        }
        for a in &attrs {
            a.validate()?;
        }
        let d = attrs.len();
        let rows = cells.len();
        let mut flat = Vec::with_capacity(rows * d);
        for (r, row) in cells.into_iter().enumerate() {
            if row.len() != d {
                return Err(Error::parse(r, format!("expected {d} cells, found {}", row.len())));
            }
            for (c, cell) in row.into_iter().enumerate() {
                check_cell(&attrs[c], cell, r)?;
                flat.push(cell);
            }
        }
        Ok(Dataset { attrs, rows, cells: flat })
    }

    /// Builds a dataset of continuous attributes, with `None` marking
    /// missing cells. Observed ranges are computed from the known cells.
    pub fn from_reals(names: &[&str], rows: &[Vec<Option<f64>>]) -> Result<Self> {
        let attrs = names
            .iter()
            .map(|n| AttributeSpec::continuous(*n, 0.0, 1.0))
            .collect();
        let cells = rows
            .iter()
            .map(|row| row.iter().map(|v| v.map_or(Cell::Missing, Cell::Real)).collect())
            .collect();
        let mut ds = Dataset::new(attrs, cells)?;
        ds.refresh_ranges();
        Ok(ds)
    }

    pub fn n_rows(&self) -> usize {
        self.rows
    }

    pub fn n_attrs(&self) -> usize {
        self.attrs.len()
    }

    pub fn attrs(&self) -> &[AttributeSpec] {
        &self.attrs
    }

    pub fn cell(&self, row: usize, attr: usize) -> Cell {
        self.cells[row * self.attrs.len() + attr]
    }

    pub fn row(&self, row: usize) -> &[Cell] {
        let d = self.attrs.len();
        &self.cells[row * d..(row + 1) * d]
    }

    pub fn set_cell(&mut self, row: usize, attr: usize, cell: Cell) -> Result<()> {
        check_cell(&self.attrs[attr], cell, row)?;
        let d = self.attrs.len();
        self.cells[row * d + attr] = cell;
        Ok(())
    }

    pub fn missing_count(&self) -> usize {
        self.cells.iter().filter(|c| c.is_missing()).count()
    }

    pub fn known_count(&self) -> usize {
        self.cells.len() - self.missing_count()
    }

    /// Recomputes continuous `(min, max)` from the known cells. A column
    /// with no known cells gets the unit range.
    pub fn refresh_ranges(&mut self) {
        let d = self.attrs.len();
        for c in 0..d {
            if let AttributeKind::Continuous { .. } = self.attrs[c].kind {
                let mut lo = f64::INFINITY;
                let mut hi = f64::NEG_INFINITY;
                for r in 0..self.rows {
                    if let Cell::Real(v) = self.cells[r * d + c] {
                        lo = lo.min(v);
                        hi = hi.max(v);
                    }
                }
                if lo > hi {
                    (lo, hi) = (0.0, 1.0);
                }
                self.attrs[c].kind = AttributeKind::Continuous { min: lo, max: hi };
            }
        }
    }

    /// Same schema, with every cell of a different set of rows.
    pub(crate) fn with_cells(&self, cells: Vec<Cell>) -> Dataset {
        debug_assert_eq!(cells.len(), self.cells.len());
        Dataset {
            attrs: self.attrs.clone(),
            rows: self.rows,
            cells,
        }
    }

    pub(crate) fn cells(&self) -> &[Cell] {
        &self.cells
    }

    /// Formats one cell the way [`write_csv`](Self::write_csv) does.
    pub fn format_cell(&self, row: usize, attr: usize, missing_token: &str) -> String {
        match self.cell(row, attr) {
            Cell::Missing => missing_token.to_string(),
            Cell::Real(v) => format_real(v),
            Cell::Category(k) => self.attrs[attr].categories().expect("nominal attribute")[k].clone(),
        }
    }

    pub fn load(path: impl AsRef<Path>, schema: Option<&[AttributeSpec]>, opts: &LoadOptions) -> Result<Self> {
        let file = File::open(path)?;
        Self::read_csv(file, schema, opts)
    }

    pub fn from_csv_str(text: &str, schema: Option<&[AttributeSpec]>, opts: &LoadOptions) -> Result<Self> {
        Self::read_csv(text.as_bytes(), schema, opts)
    }

    /// Parses comma-separated text. Without a schema, an all-numeric column
    /// becomes continuous and anything else nominal with categories in
    /// first-seen order.
    pub fn read_csv<R: Read>(reader: R, schema: Option<&[AttributeSpec]>, opts: &LoadOptions) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(false)
            .flexible(true)
            .trim(csv::Trim::All)
            .from_reader(reader);
        let mut records: Vec<Vec<String>> = Vec::new();
        for (i, rec) in rdr.records().enumerate() {
            let rec = rec.map_err(|e| Error::parse(i, e.to_string()))?;
            if rec.len() == 1 && rec[0].is_empty() {
                continue;
            }
            records.push(rec.iter().map(str::to_string).collect());
        }
        if records.is_empty() {
            return Err(Error::parse(0, "no rows"));
        }
        let width = records[0].len();
        for (i, rec) in records.iter().enumerate() {
            if rec.len() != width {
                return Err(Error::parse(i, format!("expected {width} fields, found {}", rec.len())));
            }
        }
        if let Some(s) = schema {
            if s.len() != width {
                return Err(Error::Schema(format!(
                    "schema declares {} attributes but the file has {width} columns",
                    s.len()
                )));
            }
        }

        let missing = opts.missing_token.as_str();
        let header = match opts.header {
            Some(h) => h,
            None => detect_header(&records, schema, missing),
        };
        let (names, body, offset) = if header {
            (records[0].clone(), &records[1..], 1)
        } else {
            ((0..width).map(|i| format!("attr{i}")).collect(), &records[..], 0)
        };
        if body.is_empty() {
            return Err(Error::parse(offset, "no data rows"));
        }

        let attrs: Vec<AttributeSpec> = match schema {
            Some(s) => s.to_vec(),
            None => (0..width)
                .map(|c| infer_attribute(&names[c], body.iter().map(|r| r[c].as_str()), missing))
                .collect(),
        };
        for a in &attrs {
            a.validate()?;
        }

        let mut cells = Vec::with_capacity(body.len() * width);
        for (i, rec) in body.iter().enumerate() {
            for (c, tok) in rec.iter().enumerate() {
                cells.push(parse_cell(&attrs[c], tok, missing, i + offset)?);
            }
        }
        let mut ds = Dataset {
            attrs,
            rows: body.len(),
            cells,
        };
        ds.refresh_ranges_where(|a| schema.is_none() || !has_explicit_range(a));
        Ok(ds)
    }

    fn refresh_ranges_where(&mut self, pred: impl Fn(&AttributeSpec) -> bool) {
        let saved = self.attrs.clone();
        self.refresh_ranges();
        for (a, old) in self.attrs.iter_mut().zip(saved) {
            if !pred(&old) {
                *a = old;
            }
        }
    }

    /// Writes a header row followed by one line per row.
    pub fn write_csv<W: Write>(&self, writer: W, missing_token: &str) -> Result<()> {
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(writer);
        w.write_record(self.attrs.iter().map(|a| a.name.as_str()))?;
        for r in 0..self.rows {
            w.write_record((0..self.n_attrs()).map(|c| self.format_cell(r, c, missing_token)))?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn save(&self, path: impl AsRef<Path>, missing_token: &str) -> Result<()> {
        let file = File::create(path)?;
        self.write_csv(std::io::BufWriter::new(file), missing_token)
    }

    /// Normalizes and one-hot expands the dataset.
    pub fn encode(&self) -> EncodedMatrix {
        let mut columns = Vec::new();
        let mut offsets = Vec::with_capacity(self.attrs.len());
        for (a, spec) in self.attrs.iter().enumerate() {
            offsets.push(columns.len());
            match &spec.kind {
                AttributeKind::Continuous { .. } => columns.push(ColumnSource { attr: a, category: None }),
                AttributeKind::Nominal { categories } => {
                    columns.extend((0..categories.len()).map(|k| ColumnSource {
                        attr: a,
                        category: Some(k),
                    }));
                }
            }
        }
        let width = columns.len();
        let mut values = vec![f64::NAN; self.rows * width];
        let mut known = vec![false; self.rows * width];
        for r in 0..self.rows {
            for (a, spec) in self.attrs.iter().enumerate() {
                let base = r * width + offsets[a];
                match self.cell(r, a) {
                    Cell::Missing => {}
                    Cell::Real(v) => {
                        values[base] = spec.normalize(v);
                        known[base] = true;
                    }
                    Cell::Category(k) => {
                        for j in 0..spec.width() {
                            values[base + j] = if j == k { 1.0 } else { 0.0 };
                            known[base + j] = true;
                        }
                    }
                }
            }
        }
        EncodedMatrix {
            rows: self.rows,
            width,
            values,
            known,
            columns,
            offsets,
            attrs: self.attrs.clone(),
        }
    }
}

impl fmt::Display for Dataset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut buf = Vec::new();
        self.write_csv(&mut buf, MISSING_TOKEN).map_err(|_| fmt::Error)?;
        f.write_str(&String::from_utf8_lossy(&buf))
    }
}

#[derive(Debug, Clone)]
pub struct LoadOptions {
    pub missing_token: String,
    /// `None` detects a header row from the data.
    pub header: Option<bool>,
}

impl Default for LoadOptions {
    fn default() -> Self {
        LoadOptions {
            missing_token: MISSING_TOKEN.to_string(),
            header: None,
        }
    }
}

fn format_real(v: f64) -> String {
    // `{}` is the shortest string that parses back to the same f64.
    format!("{v}")
}

fn check_cell(attr: &AttributeSpec, cell: Cell, row: usize) -> Result<()> {
    match (&attr.kind, cell) {
        (_, Cell::Missing) => Ok(()),
        (AttributeKind::Continuous { .. }, Cell::Real(v)) if v.is_finite() => Ok(()),
        (AttributeKind::Nominal { categories }, Cell::Category(k)) if k < categories.len() => Ok(()),
        _ => Err(Error::Schema(format!(
            "row {row}: cell {cell:?} does not fit attribute '{}'",
            attr.name
        ))),
    }
}

fn has_explicit_range(a: &AttributeSpec) -> bool {
    matches!(a.kind, AttributeKind::Continuous { min, max } if min.is_finite() && max.is_finite())
}

fn is_numeric(tok: &str) -> bool {
    tok.parse::<f64>().is_ok_and(f64::is_finite)
}

/// A first row is a header when it matches the schema's names, or when some
/// column holds a non-numeric token there but only numbers below it.
fn detect_header(records: &[Vec<String>], schema: Option<&[AttributeSpec]>, missing: &str) -> bool {
    let first = &records[0];
    if let Some(s) = schema {
        if s.iter().zip(first).all(|(a, tok)| a.name == *tok) {
            return true;
        }
    }
    if records.len() < 2 {
        return false;
    }
    (0..first.len()).any(|c| {
        let head = first[c].as_str();
        head != missing
            && !is_numeric(head)
            && records[1..]
                .iter()
                .map(|r| r[c].as_str())
                .filter(|t| *t != missing)
                .all(is_numeric)
    })
}

fn infer_attribute<'a>(name: &str, tokens: impl Iterator<Item = &'a str> + Clone, missing: &str) -> AttributeSpec {
    let known = tokens.filter(|t| *t != missing);
    if known.clone().all(is_numeric) {
        // Ranges are filled in once the cells are parsed.
        return AttributeSpec::continuous(name, 0.0, 1.0);
    }
    let mut categories: Vec<String> = Vec::new();
    for t in known {
        if !categories.iter().any(|c| c == t) {
            categories.push(t.to_string());
        }
    }
    AttributeSpec::nominal(name, categories)
}

fn parse_cell(attr: &AttributeSpec, tok: &str, missing: &str, row: usize) -> Result<Cell> {
    if tok == missing {
        return Ok(Cell::Missing);
    }
    match &attr.kind {
        AttributeKind::Continuous { .. } => match tok.parse::<f64>() {
            Ok(v) if v.is_finite() => Ok(Cell::Real(v)),
            _ => Err(Error::Schema(format!(
                "row {row}: '{tok}' is not a number for continuous attribute '{}'",
                attr.name
            ))),
        },
        AttributeKind::Nominal { categories } => categories
            .iter()
            .position(|c| c == tok)
            .map(Cell::Category)
            .ok_or_else(|| {
                Error::Schema(format!(
                    "row {row}: label '{tok}' is not a declared category of '{}'",
                    attr.name
                ))
            }),
    }
}

/// One entry of a JSON schema file.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SchemaEntry {
    pub name: String,
    pub kind: SchemaKind,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub categories: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub min: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SchemaKind {
    Continuous,
    Nominal,
}

/// Reads a schema file: a JSON list of `{name, kind, categories}` objects.
/// Continuous entries may pin their normalization range with `min`/`max`;
/// otherwise the range is taken from the data.
pub fn parse_schema(json: &str) -> Result<Vec<AttributeSpec>> {
    let entries: Vec<SchemaEntry> = serde_json::from_str(json)?;
    entries
        .into_iter()
        .map(|e| {
            let spec = match e.kind {
                SchemaKind::Continuous => AttributeSpec {
                    name: e.name,
                    kind: match (e.min, e.max) {
                        (Some(min), Some(max)) => AttributeKind::Continuous { min, max },
                        _ => AttributeKind::Continuous {
                            min: f64::NAN,
                            max: f64::NAN,
                        },
                    },
                },
                SchemaKind::Nominal => AttributeSpec::nominal(e.name, e.categories),
            };
            spec.validate()?;
            Ok(spec)
        })
        .collect()
}

pub fn load_schema(path: impl AsRef<Path>) -> Result<Vec<AttributeSpec>> {
    parse_schema(&std::fs::read_to_string(path)?)
}

pub fn schema_json(attrs: &[AttributeSpec]) -> Result<String> {
    let entries: Vec<SchemaEntry> = attrs
        .iter()
        .map(|a| match &a.kind {
            AttributeKind::Continuous { min, max } => SchemaEntry {
                name: a.name.clone(),
                kind: SchemaKind::Continuous,
                categories: Vec::new(),
                min: Some(*min),
                max: Some(*max),
            },
            AttributeKind::Nominal { categories } => SchemaEntry {
                name: a.name.clone(),
                kind: SchemaKind::Nominal,
                categories: categories.clone(),
                min: None,
                max: None,
            },
        })
        .collect();
    Ok(serde_json::to_string_pretty(&entries)?)
}

/// Where an encoded column comes from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ColumnSource {
    pub attr: usize,
    pub category: Option<usize>,
}

/// Fully continuous view of a [`Dataset`]. Unknown entries hold NaN and are
/// flagged in the mask; nothing downstream may read them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EncodedMatrix {
    rows: usize,
    width: usize,
    values: Vec<f64>,
    known: Vec<bool>,
    columns: Vec<ColumnSource>,
    offsets: Vec<usize>,
    attrs: Vec<AttributeSpec>,
}

impl EncodedMatrix {
    /// A matrix without schema: every column is its own continuous
    /// attribute already in `[0, 1]`.
    pub fn from_dense(rows: usize, width: usize, values: Vec<Option<f64>>) -> Result<Self> {
        if values.len() != rows * width {
            return Err(Error::arg(format!(
                "expected {} values for a {rows}x{width} matrix, got {}",
                rows * width,
                values.len()
            )));
        }
        if rows == 0 || width == 0 {
            return Err(Error::arg("matrix must be non-empty"));
        }
        let known = values.iter().map(Option::is_some).collect();
        let values = values.into_iter().map(|v| v.unwrap_or(f64::NAN)).collect();
        Ok(EncodedMatrix {
            rows,
            width,
            values,
            known,
            columns: (0..width).map(|a| ColumnSource { attr: a, category: None }).collect(),
            offsets: (0..width).collect(),
            attrs: (0..width)
                .map(|a| AttributeSpec::continuous(format!("attr{a}"), 0.0, 1.0))
                .collect(),
        })
    }

    pub fn n_rows(&self) -> usize {
        self.rows
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn columns(&self) -> &[ColumnSource] {
        &self.columns
    }

    /// First encoded column of each source attribute.
    pub fn attr_offsets(&self) -> &[usize] {
        &self.offsets
    }

    pub fn attrs(&self) -> &[AttributeSpec] {
        &self.attrs
    }

    pub fn is_known(&self, row: usize, col: usize) -> bool {
        self.known[row * self.width + col]
    }

    /// The stored value, or `None` for an unknown entry.
    pub fn get(&self, row: usize, col: usize) -> Option<f64> {
        let i = row * self.width + col;
        self.known[i].then(|| self.values[i])
    }

    pub fn known_count(&self) -> usize {
        self.known.iter().filter(|k| **k).count()
    }

    pub fn unknown_count(&self) -> usize {
        self.known.len() - self.known_count()
    }

    /// Every known entry as `(row, col, value)` in row-major order.
    pub fn known_entries(&self) -> Vec<(usize, usize, f64)> {
        let mut out = Vec::with_capacity(self.known_count());
        for r in 0..self.rows {
            for c in 0..self.width {
                if let Some(v) = self.get(r, c) {
                    out.push((r, c, v));
                }
            }
        }
        out
    }

    /// Overwrites every unknown entry's backing storage. Only useful for
    /// checking that nothing reads it.
    pub fn poison_unknown(&mut self, sentinel: f64) {
        for (v, k) in self.values.iter_mut().zip(&self.known) {
            if !k {
                *v = sentinel;
            }
        }
    }

    /// Maps a dense `n x width` prediction grid back to the source schema.
    /// Continuous predictions are clamped to `[0, 1]` and denormalized,
    /// nominal attributes take the category with the largest prediction
    /// (first on ties), and cells known in `original` are copied verbatim.
    pub fn decode(&self, predictions: &[f64], original: &Dataset) -> Result<Dataset> {
        if predictions.len() != self.rows * self.width {
            return Err(Error::arg(format!(
                "prediction grid has {} values, expected {}",
                predictions.len(),
                self.rows * self.width
            )));
        }
        if original.n_rows() != self.rows || original.attrs() != self.attrs.as_slice() {
            return Err(Error::arg("prediction grid does not match the dataset schema"));
        }
        let d = self.attrs.len();
        let mut cells = Vec::with_capacity(self.rows * d);
        for r in 0..self.rows {
            let row = &predictions[r * self.width..(r + 1) * self.width];
            for (a, spec) in self.attrs.iter().enumerate() {
                let known = original.cell(r, a);
                if !known.is_missing() {
                    cells.push(known);
                    continue;
                }
                let off = self.offsets[a];
                cells.push(match &spec.kind {
                    AttributeKind::Continuous { .. } => Cell::Real(spec.denormalize(row[off])),
                    AttributeKind::Nominal { categories } => {
                        Cell::Category(argmax(&row[off..off + categories.len()]))
                    }
                });
            }
        }
        Ok(original.with_cells(cells))
    }
}

/// Index of the largest value, lowest index on ties. NaN never wins.
pub(crate) fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate() {
        if *v > values[best] || values[best].is_nan() && !v.is_nan() {
            best = i;
        }
    }
    best
}

/// Cells removed from a dataset, with enough information to rebuild the
/// removal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorruptionPlan {
    pub u: f64,
    pub seed: u64,
    pub removed: Vec<(usize, usize)>,
}

impl CorruptionPlan {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(json: &str) -> Result<Self> {
        Ok(serde_json::from_str(json)?)
    }
}

/// Number of cells an MCAR corruption of `u` percent removes.
pub fn removal_count(u: f64, rows: usize, attrs: usize) -> usize {
    (u / 100.0 * (rows * attrs) as f64).round() as usize
}

/// Removes `round(u/100 * n * d)` known cells uniformly at random without
/// replacement. Attribute ranges are kept from the input, so normalization
/// matches the uncorrupted data.
pub fn corrupt_mcar(ds: &Dataset, u: f64, seed: u64) -> Result<(Dataset, CorruptionPlan)> {
    if !(u > 0.0 && u < 100.0) {
        return Err(Error::arg(format!("sparsity u must lie in (0, 100), got {u}")));
    }
    let count = removal_count(u, ds.n_rows(), ds.n_attrs());
    let candidates: Vec<usize> = ds
        .cells
        .iter()
        .enumerate()
        .filter(|(_, c)| !c.is_missing())
        .map(|(i, _)| i)
        .collect();
    if candidates.len() < count {
        return Err(Error::arg(format!(
            "cannot remove {count} cells: only {} are known",
            candidates.len()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut picked: Vec<usize> = index::sample(&mut rng, candidates.len(), count)
        .into_iter()
        .map(|i| candidates[i])
        .collect();
    picked.sort_unstable();

    let d = ds.n_attrs();
    let mut cells = ds.cells.clone();
    for &i in &picked {
        cells[i] = Cell::Missing;
    }
    let plan = CorruptionPlan {
        u,
        seed,
        removed: picked.iter().map(|&i| (i / d, i % d)).collect(),
    };
    Ok((ds.with_cells(cells), plan))
}
