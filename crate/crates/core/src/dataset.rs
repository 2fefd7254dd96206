//! Mixed-type tabular datasets: loading, schema validation, target rules and
//! privileged/unprivileged group assignment.

use std::collections::{BTreeSet, HashMap};
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_MISSING_TOKENS: [&str; 3] = ["", "NA", "NULL"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ColumnKind {
    Numeric,
    Categorical,
}

/// Schema of one column. Numeric columns carry the observed `(min, max)`
/// over non-missing cells; categorical columns carry their levels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColumnSchema {
    pub name: String,
    pub kind: ColumnKind,
    pub sensitive: bool,
    pub range: Option<(f64, f64)>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub levels: Vec<String>,
}

impl ColumnSchema {
    pub fn numeric(name: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            kind: ColumnKind::Numeric,
            sensitive: false,
            range: None,
            levels: Vec::new(),
        }
    }

    pub fn categorical(name: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            kind: ColumnKind::Categorical,
            sensitive: false,
            range: None,
            levels: Vec::new(),
        }
    }

    pub fn is_numeric(&self) -> bool {
        self.kind == ColumnKind::Numeric
    }

    /// Level code, inserting the level if it is new.
    pub fn intern(&mut self, level: &str) -> u32 {
        match self.levels.iter().position(|l| l == level) {
            Some(i) => i as u32,
            None => {
                self.levels.push(level.to_string());
                (self.levels.len() - 1) as u32
            }
        }
    }

    pub fn level_code(&self, level: &str) -> Option<u32> {
        self.levels
            .iter()
            .position(|l| l == level)
            .map(|i| i as u32)
    }
}

/// A cell value. Categorical cells hold a code into the column's levels.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Cell {
    Num(f64),
    Cat(u32),
    Missing,
}

impl Cell {
    pub fn is_missing(&self) -> bool {
        matches!(self, Cell::Missing)
    }

    pub fn as_num(&self) -> Option<f64> {
        match *self {
            Cell::Num(v) => Some(v),
            _ => None,
        }
    }

    pub fn as_cat(&self) -> Option<u32> {
        match *self {
            Cell::Cat(c) => Some(c),
            _ => None,
        }
    }
}

/// Per-column override used when loading.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct ColumnHint {
    pub name: String,
    #[serde(default)]
    pub kind: Option<ColumnKind>,
    #[serde(default)]
    pub sensitive: bool,
    /// Fixes the level order of a categorical column.
    #[serde(default)]
    pub levels: Option<Vec<String>>,
}

/// Loader configuration; deserializable from the schema JSON file.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct LoadOptions {
    pub delimiter: char,
    pub missing_tokens: Vec<String>,
    /// Target column name. Defaults to the last column.
    pub target: Option<String>,
    pub columns: Vec<ColumnHint>,
    /// Columns to discard after reading (identifiers and the like).
    pub drop: Vec<String>,
    /// Shorthand for marking columns sensitive without a full hint.
    pub sensitive: Vec<String>,
}

impl Default for LoadOptions {
    fn default() -> Self {
        Self {
            delimiter: ',',
            missing_tokens: DEFAULT_MISSING_TOKENS
                .iter()
                .map(|s| s.to_string())
                .collect(),
            target: None,
            columns: Vec::new(),
            drop: Vec::new(),
            sensitive: Vec::new(),
        }
    }
}

impl LoadOptions {
    pub fn from_json_file(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Ok(serde_json::from_str(&text)?)
    }

    pub fn with_target(mut self, target: impl Into<String>) -> Self {
        self.target = Some(target.into());
        self
    }

    fn hint(&self, name: &str) -> Option<&ColumnHint> {
        self.columns.iter().find(|h| h.name == name)
    }

    fn is_missing(&self, token: &str) -> bool {
        self.missing_tokens.iter().any(|t| t == token)
    }
}

/// An immutable-by-convention table of typed cells with a designated target.
#[derive(Debug, Clone, PartialEq)]
pub struct TabularDataset {
    columns: Vec<ColumnSchema>,
    rows: Vec<Vec<Cell>>,
    target: usize,
}

impl TabularDataset {
    /// Validates and builds a dataset, recomputing numeric ranges.
    pub fn new(columns: Vec<ColumnSchema>, rows: Vec<Vec<Cell>>, target: usize) -> Result<Self> {
        let mut names = BTreeSet::new();
        for c in &columns {
            if !names.insert(c.name.as_str()) {
                return Err(Error::Schema(format!("duplicate column `{}`", c.name)));
            }
        }
        if target >= columns.len() {
            return Err(Error::Schema("target index out of range".into()));
        }
        if rows.is_empty() {
            return Err(Error::EmptyDataset);
        }
        if rows.len() < 2 {
            return Err(Error::TooFewRows {
                required: 2,
                found: rows.len(),
            });
        }
        for (i, row) in rows.iter().enumerate() {
            if row.len() != columns.len() {
                return Err(Error::Parse {
                    row: i,
                    message: format!("expected {} cells, found {}", columns.len(), row.len()),
                });
            }
            for (c, cell) in row.iter().enumerate() {
                let ok = match (cell, columns[c].kind) {
                    (Cell::Missing, _) => true,
                    (Cell::Num(v), ColumnKind::Numeric) => v.is_finite(),
                    (Cell::Cat(code), ColumnKind::Categorical) => {
                        (*code as usize) < columns[c].levels.len()
                    }
                    _ => false,
                };
                if !ok {
                    return Err(Error::Schema(format!(
                        "row {i}: cell {cell:?} does not fit column `{}`",
                        columns[c].name
                    )));
                }
            }
            if row[target].is_missing() {
                return Err(Error::MissingCell {
                    row: i,
                    column: columns[target].name.clone(),
                });
            }
        }
        let mut ds = Self {
            columns,
            rows,
            target,
        };
        ds.recompute_ranges();
        Ok(ds)
    }

    /// Loads a delimiter-separated file with a header row.
    pub fn load(path: impl AsRef<Path>, opts: &LoadOptions) -> Result<Self> {
        let file = File::open(path)?;
        Self::from_reader(file, opts)
    }

    pub fn from_reader<R: Read>(reader: R, opts: &LoadOptions) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .delimiter(opts.delimiter as u8)
            .has_headers(true)
            .flexible(true)
            .from_reader(reader);
        let header: Vec<String> = rdr
            .headers()?
            .iter()
            .map(|h| h.trim().to_string())
            .collect();
        if header.is_empty() || (header.len() == 1 && header[0].is_empty()) {
            return Err(Error::EmptyDataset);
        }
        let mut raw: Vec<Vec<String>> = Vec::new();
        for (i, rec) in rdr.records().enumerate() {
            let rec = rec?;
            if rec.len() != header.len() {
                return Err(Error::Parse {
                    row: i,
                    message: format!("expected {} fields, found {}", header.len(), rec.len()),
                });
            }
            raw.push(rec.iter().map(|s| s.trim().to_string()).collect());
        }
        if raw.is_empty() {
            return Err(Error::EmptyDataset);
        }
        for name in &opts.drop {
            if !header.contains(name) {
                return Err(Error::UnknownColumn(name.clone()));
            }
        }
        let keep: Vec<usize> = (0..header.len())
            .filter(|&c| !opts.drop.contains(&header[c]))
            .collect();

        let mut columns = Vec::with_capacity(keep.len());
        let mut cells: Vec<Vec<Cell>> = vec![Vec::with_capacity(keep.len()); raw.len()];
        for &c in &keep {
            let name = &header[c];
            let hint = opts.hint(name);
            let kind = match hint.and_then(|h| h.kind) {
                Some(k) => k,
                None => infer_kind(raw.iter().map(|r| r[c].as_str()), opts),
            };
            let mut schema = ColumnSchema {
                name: name.clone(),
                kind,
                sensitive: hint.map(|h| h.sensitive).unwrap_or(false)
                    || opts.sensitive.contains(name),
                range: None,
                levels: hint.and_then(|h| h.levels.clone()).unwrap_or_default(),
            };
            for (i, r) in raw.iter().enumerate() {
                let tok = r[c].as_str();
                let cell = if opts.is_missing(tok) {
                    Cell::Missing
                } else {
                    match kind {
                        ColumnKind::Numeric => match parse_finite(tok) {
                            Some(v) => Cell::Num(v),
                            None => {
                                return Err(Error::Type {
                                    row: i,
                                    column: name.clone(),
                                    value: tok.to_string(),
                                })
                            }
                        },
                        ColumnKind::Categorical => Cell::Cat(schema.intern(tok)),
                    }
                };
                cells[i].push(cell);
            }
            columns.push(schema);
        }
        for h in &opts.columns {
            if !columns.iter().any(|c| c.name == h.name) {
                return Err(Error::UnknownColumn(h.name.clone()));
            }
        }
        for s in &opts.sensitive {
            if !columns.iter().any(|c| &c.name == s) {
                return Err(Error::UnknownColumn(s.clone()));
            }
        }
        let target = match &opts.target {
            Some(t) => columns
                .iter()
                .position(|c| &c.name == t)
                .ok_or_else(|| Error::UnknownColumn(t.clone()))?,
            None => columns.len() - 1,
        };
        Self::new(columns, cells, target)
    }

    /// Column hints that reload a serialized copy of this dataset with the
    /// same kinds, level order and sensitivity flags.
    pub fn load_options(&self) -> LoadOptions {
        LoadOptions {
            target: Some(self.target_name().to_string()),
            columns: self
                .columns
                .iter()
                .map(|c| ColumnHint {
                    name: c.name.clone(),
                    kind: Some(c.kind),
                    sensitive: c.sensitive,
                    levels: (!c.is_numeric()).then(|| c.levels.clone()),
                })
                .collect(),
            ..LoadOptions::default()
        }
    }

    /// Writes the dataset as CSV. Missing cells are written as empty fields.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        self.write_csv_with(w, None)
    }

    /// Writes the dataset, optionally appending one extra string column.
    pub fn write_csv_with<W: Write>(&self, w: W, extra: Option<(&str, &[String])>) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(w);
        let mut header: Vec<&str> = self.columns.iter().map(|c| c.name.as_str()).collect();
        if let Some((name, values)) = extra {
            if values.len() != self.n_rows() {
                return Err(Error::Dimension("extra column length".into()));
            }
            header.push(name);
        }
        wtr.write_record(&header)?;
        for (i, row) in self.rows.iter().enumerate() {
            let mut rec: Vec<String> = row
                .iter()
                .enumerate()
                .map(|(c, cell)| self.render(c, cell))
                .collect();
            if let Some((_, values)) = extra {
                rec.push(values[i].clone());
            }
            wtr.write_record(&rec)?;
        }
        wtr.flush()?;
        Ok(())
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let f = File::create(path)?;
        self.write_csv(std::io::BufWriter::new(f))
    }

    /// Text form of a cell.
    pub fn render(&self, col: usize, cell: &Cell) -> String {
        match *cell {
            Cell::Num(v) => format!("{v}"),
            Cell::Cat(code) => self.columns[col].levels[code as usize].clone(),
            Cell::Missing => String::new(),
        }
    }

    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn n_columns(&self) -> usize {
        self.columns.len()
    }

    pub fn columns(&self) -> &[ColumnSchema] {
        &self.columns
    }

    pub fn column(&self, idx: usize) -> &ColumnSchema {
        &self.columns[idx]
    }

    pub fn column_index(&self, name: &str) -> Result<usize> {
        self.columns
            .iter()
            .position(|c| c.name == name)
            .ok_or_else(|| Error::UnknownColumn(name.to_string()))
    }

    pub fn rows(&self) -> &[Vec<Cell>] {
        &self.rows
    }

    pub fn row(&self, i: usize) -> &[Cell] {
        &self.rows[i]
    }

    pub fn cell(&self, i: usize, c: usize) -> Cell {
        self.rows[i][c]
    }

    pub fn target_index(&self) -> usize {
        self.target
    }

    pub fn target_name(&self) -> &str {
        &self.columns[self.target].name
    }

    /// Every column except the target, in schema order.
    pub fn feature_indices(&self) -> Vec<usize> {
        (0..self.columns.len())
            .filter(|&c| c != self.target)
            .collect()
    }

    pub fn missing_count(&self) -> usize {
        self.rows
            .iter()
            .flat_map(|r| r.iter())
            .filter(|c| c.is_missing())
            .count()
    }

    pub fn set_sensitive(&mut self, name: &str, sensitive: bool) -> Result<()> {
        let c = self.column_index(name)?;
        self.columns[c].sensitive = sensitive;
        Ok(())
    }

    pub fn recompute_ranges(&mut self) {
        for (c, col) in self.columns.iter_mut().enumerate() {
            if col.kind != ColumnKind::Numeric {
                col.range = None;
                continue;
            }
            let mut range: Option<(f64, f64)> = None;
            for row in &self.rows {
                if let Cell::Num(v) = row[c] {
                    range = Some(match range {
                        None => (v, v),
                        Some((lo, hi)) => (lo.min(v), hi.max(v)),
                    });
                }
            }
            col.range = range;
        }
    }

    /// Class labels of a categorical target (level codes).
    pub fn labels(&self) -> Result<Labels> {
        let col = &self.columns[self.target];
        if col.kind != ColumnKind::Categorical {
            return Err(Error::Schema(format!(
                "target `{}` is numeric; apply a binarization or binning rule first",
                col.name
            )));
        }
        let values = self
            .rows
            .iter()
            .map(|r| r[self.target].as_cat().map(|c| c as usize))
            .collect::<Option<Vec<_>>>()
            .ok_or_else(|| Error::Schema("target has missing cells".into()))?;
        Ok(Labels {
            values,
            names: col.levels.clone(),
        })
    }

    /// A copy restricted to `idx` (rows may repeat).
    pub fn select_rows(&self, idx: &[usize]) -> Result<Self> {
        let rows = idx.iter().map(|&i| self.rows[i].clone()).collect();
        Self::new(self.columns.clone(), rows, self.target)
    }

    /// A copy with extra rows appended. Ranges are recomputed.
    pub fn with_rows_appended(&self, extra: Vec<Vec<Cell>>) -> Result<Self> {
        let mut rows = self.rows.clone();
        rows.extend(extra);
        Self::new(self.columns.clone(), rows, self.target)
    }

    /// A copy with one cell replaced.
    pub(crate) fn replace_cells(&self, updates: &[(usize, usize, Cell)]) -> Result<Self> {
        let mut rows = self.rows.clone();
        for &(i, c, cell) in updates {
            rows[i][c] = cell;
        }
        Self::new(self.columns.clone(), rows, self.target)
    }

    /// Replaces column `c` entirely and optionally makes it the target.
    fn with_column(
        &self,
        c: usize,
        schema: ColumnSchema,
        cells: Vec<Cell>,
        target: bool,
    ) -> Result<Self> {
        let mut columns = self.columns.clone();
        columns[c] = schema;
        let mut rows = self.rows.clone();
        for (row, cell) in rows.iter_mut().zip(cells) {
            row[c] = cell;
        }
        Self::new(columns, rows, if target { c } else { self.target })
    }
}

/// Class labels `0..names.len()`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Labels {
    pub values: Vec<usize>,
    pub names: Vec<String>,
}

impl Labels {
    pub fn n_classes(&self) -> usize {
        self.names.len()
    }

    pub fn counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.names.len()];
        for &v in &self.values {
            counts[v] += 1;
        }
        counts
    }
}

fn parse_finite(tok: &str) -> Option<f64> {
    tok.parse::<f64>().ok().filter(|v| v.is_finite())
}

fn infer_kind<'a>(tokens: impl Iterator<Item = &'a str>, opts: &LoadOptions) -> ColumnKind {
    let mut all_numeric = true;
    for tok in tokens {
        if opts.is_missing(tok) {
            continue;
        }
        if parse_finite(tok).is_none() {
            all_numeric = false;
            break;
        }
    }
    if all_numeric {
        ColumnKind::Numeric
    } else {
        ColumnKind::Categorical
    }
}

// ---------------------------------------------------------------------------
// Groups

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CmpOp {
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
}

/// One clause of a group predicate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Condition {
    pub column: String,
    pub op: CmpOp,
    pub value: serde_json::Value,
}

/// Conjunction of conditions; rows satisfying all of them are privileged.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct GroupSpec {
    pub conditions: Vec<Condition>,
}

impl GroupSpec {
    pub fn new(conditions: Vec<Condition>) -> Self {
        Self { conditions }
    }

    pub fn from_json_file(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Ok(serde_json::from_str(&text)?)
    }

    pub fn columns(&self) -> Vec<&str> {
        self.conditions.iter().map(|c| c.column.as_str()).collect()
    }
}

/// Per-row group indicator, `s[i] == 1` for privileged rows.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct GroupAssignment {
    pub s: Vec<u8>,
    pub n_privileged: usize,
    pub n_unprivileged: usize,
    /// One of the two groups is empty.
    pub degenerate: bool,
}

impl GroupAssignment {
    pub fn from_indicator(s: Vec<u8>) -> Self {
        let n_privileged = s.iter().filter(|&&v| v == 1).count();
        let n_unprivileged = s.len() - n_privileged;
        Self {
            s,
            n_privileged,
            n_unprivileged,
            degenerate: n_privileged == 0 || n_unprivileged == 0,
        }
    }
}

enum Compiled {
    Num {
        col: usize,
        op: CmpOp,
        value: f64,
    },
    Cat {
        col: usize,
        eq: bool,
        code: Option<u32>,
    },
}

/// Evaluates `spec` on every row.
pub fn assign_groups(ds: &TabularDataset, spec: &GroupSpec) -> Result<GroupAssignment> {
    let mut compiled = Vec::with_capacity(spec.conditions.len());
    for cond in &spec.conditions {
        let col = ds.column_index(&cond.column)?;
        let schema = ds.column(col);
        match schema.kind {
            ColumnKind::Numeric => {
                let value = match &cond.value {
                    serde_json::Value::Number(n) => n.as_f64(),
                    serde_json::Value::String(s) => s.trim().parse().ok(),
                    _ => None,
                }
                .ok_or_else(|| {
                    Error::Schema(format!(
                        "condition on numeric column `{}` needs a numeric value",
                        cond.column
                    ))
                })?;
                compiled.push(Compiled::Num {
                    col,
                    op: cond.op,
                    value,
                });
            }
            ColumnKind::Categorical => {
                let eq = match cond.op {
                    CmpOp::Eq => true,
                    CmpOp::Ne => false,
                    _ => {
                        return Err(Error::Schema(format!(
                            "ordering comparison on categorical column `{}`",
                            cond.column
                        )))
                    }
                };
                let text = match &cond.value {
                    serde_json::Value::String(s) => s.clone(),
                    other => other.to_string(),
                };
                compiled.push(Compiled::Cat {
                    col,
                    eq,
                    code: schema.level_code(&text),
                });
            }
        }
    }

    let mut s = Vec::with_capacity(ds.n_rows());
    for (i, row) in ds.rows().iter().enumerate() {
        let mut pass = true;
        for c in &compiled {
            let ok = match *c {
                Compiled::Num { col, op, value } => {
                    let v = row[col].as_num().ok_or_else(|| Error::MissingCell {
                        row: i,
                        column: ds.column(col).name.clone(),
                    })?;
                    match op {
                        CmpOp::Eq => v == value,
                        CmpOp::Ne => v != value,
                        CmpOp::Lt => v < value,
                        CmpOp::Le => v <= value,
                        CmpOp::Gt => v > value,
                        CmpOp::Ge => v >= value,
                    }
                }
                Compiled::Cat { col, eq, code } => {
                    let v = row[col].as_cat().ok_or_else(|| Error::MissingCell {
                        row: i,
                        column: ds.column(col).name.clone(),
                    })?;
                    (Some(v) == code) == eq
                }
            };
            pass &= ok;
        }
        s.push(pass as u8);
    }
    let out = GroupAssignment::from_indicator(s);
    if out.degenerate {
        log::warn!(
            "group predicate leaves one group empty ({} privileged, {} unprivileged)",
            out.n_privileged,
            out.n_unprivileged
        );
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// Target rules

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum BinarizeRule {
    /// Values strictly above the median map to 1.
    MedianSplit,
    /// Values strictly above the threshold map to 1.
    Threshold { value: f64 },
    /// Listed levels map to 1, all others to 0.
    CategoryPartition { positive: Vec<String> },
}

impl std::str::FromStr for BinarizeRule {
    type Err = Error;

    /// Parses `median`, `threshold:<x>` or `levels:<a>,<b>,...`.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s == "median" {
            return Ok(Self::MedianSplit);
        }
        if let Some(v) = s.strip_prefix("threshold:") {
            let value = v
                .trim()
                .parse()
                .map_err(|_| Error::Parameter(format!("bad threshold `{v}`")))?;
            return Ok(Self::Threshold { value });
        }
        if let Some(v) = s.strip_prefix("levels:") {
            let positive = v.split(',').map(|t| t.trim().to_string()).collect();
            return Ok(Self::CategoryPartition { positive });
        }
        Err(Error::Parameter(format!(
            "unknown binarization rule `{s}` (expected median, threshold:<x> or levels:<a,b>)"
        )))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinaryTargetRule {
    pub source_column: String,
    pub rule: BinarizeRule,
}

fn median(sorted: &[f64]) -> f64 {
    let n = sorted.len();
    if n % 2 == 1 {
        sorted[n / 2]
    } else {
        0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
    }
}

/// Replaces the source column with a `{0, 1}` categorical target (levels
/// `"0"`, `"1"`; 1 is the favorable label) and makes it the target.
pub fn binarize_target(ds: &TabularDataset, rule: &BinaryTargetRule) -> Result<TabularDataset> {
    let c = ds.column_index(&rule.source_column)?;
    let col = ds.column(c);
    let mut positive = Vec::with_capacity(ds.n_rows());
    match &rule.rule {
        BinarizeRule::MedianSplit | BinarizeRule::Threshold { .. } => {
            if !col.is_numeric() {
                return Err(Error::Schema(format!(
                    "column `{}` must be numeric for this rule",
                    col.name
                )));
            }
            let values = numeric_column(ds, c)?;
            let threshold = match &rule.rule {
                BinarizeRule::Threshold { value } => *value,
                _ => {
                    let mut sorted = values.clone();
                    sorted.sort_by(f64::total_cmp);
                    let m = median(&sorted);
                    let max = *sorted.last().unwrap();
                    if m < max {
                        m
                    } else {
                        // Every value ties at or below the median: split the
                        // top value off instead so two classes remain.
                        sorted
                            .iter()
                            .rev()
                            .copied()
                            .find(|&v| v < max)
                            .unwrap_or(max)
                    }
                }
            };
            positive.extend(values.iter().map(|&v| v > threshold));
        }
        BinarizeRule::CategoryPartition { positive: levels } => {
            if col.is_numeric() {
                let values = numeric_column(ds, c)?;
                let wanted: Vec<f64> = levels
                    .iter()
                    .map(|l| l.parse::<f64>())
                    .collect::<std::result::Result<_, _>>()
                    .map_err(|_| {
                        Error::Schema("numeric partition levels must be numbers".into())
                    })?;
                positive.extend(values.iter().map(|v| wanted.contains(v)));
            } else {
                for l in levels {
                    if col.level_code(l).is_none() {
                        return Err(Error::Schema(format!(
                            "level `{l}` not present in column `{}`",
                            col.name
                        )));
                    }
                }
                for (i, row) in ds.rows().iter().enumerate() {
                    let code = row[c].as_cat().ok_or_else(|| Error::MissingCell {
                        row: i,
                        column: col.name.clone(),
                    })?;
                    positive.push(levels.contains(&col.levels[code as usize]));
                }
            }
        }
    }
    let ones = positive.iter().filter(|&&p| p).count();
    if ones == 0 || ones == positive.len() {
        return Err(Error::SingleClass);
    }
    let mut schema = ColumnSchema::categorical(col.name.clone());
    schema.sensitive = col.sensitive;
    schema.levels = vec!["0".into(), "1".into()];
    let cells = positive.into_iter().map(|p| Cell::Cat(p as u32)).collect();
    ds.with_column(c, schema, cells, true)
}

/// Bins a numeric column at ascending cut points (`v < cuts[0]` is bin 0,
/// `cuts[i-1] <= v < cuts[i]` is bin `i`) into a categorical target. Empty
/// bins are dropped so class codes stay contiguous.
pub fn discretize_target(
    ds: &TabularDataset,
    source: &str,
    cuts: &[f64],
) -> Result<TabularDataset> {
    if cuts.is_empty() || cuts.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Parameter(
            "cut points must be non-empty and strictly ascending".into(),
        ));
    }
    let c = ds.column_index(source)?;
    let col = ds.column(c);
    if !col.is_numeric() {
        return Err(Error::Schema(format!(
            "column `{source}` must be numeric to bin"
        )));
    }
    let values = numeric_column(ds, c)?;
    let bins: Vec<usize> = values
        .iter()
        .map(|&v| cuts.iter().take_while(|&&cut| v >= cut).count())
        .collect();
    let used: BTreeSet<usize> = bins.iter().copied().collect();
    if used.len() < 2 {
        return Err(Error::SingleClass);
    }
    let remap: HashMap<usize, u32> = used
        .iter()
        .enumerate()
        .map(|(k, &b)| (b, k as u32))
        .collect();
    let label = |b: usize| -> String {
        let lo = if b == 0 {
            "-inf".to_string()
        } else {
            format!("{}", cuts[b - 1])
        };
        let hi = if b == cuts.len() {
            "inf".to_string()
        } else {
            format!("{}", cuts[b])
        };
        format!("[{lo},{hi})")
    };
    let mut schema = ColumnSchema::categorical(col.name.clone());
    schema.sensitive = col.sensitive;
    schema.levels = used.iter().map(|&b| label(b)).collect();
    let cells = bins.iter().map(|b| Cell::Cat(remap[b])).collect();
    ds.with_column(c, schema, cells, true)
}

fn numeric_column(ds: &TabularDataset, c: usize) -> Result<Vec<f64>> {
    ds.rows()
        .iter()
        .enumerate()
        .map(|(i, r)| {
            r[c].as_num().ok_or_else(|| Error::MissingCell {
                row: i,
                column: ds.column(c).name.clone(),
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn load(text: &str, opts: &LoadOptions) -> Result<TabularDataset> {
        TabularDataset::from_reader(text.as_bytes(), opts)
    }

    #[test]
    fn minimal_file_loads() {
        let ds = load("x,y\n1,a\n2,b\n", &LoadOptions::default()).unwrap();
        assert_eq!(ds.n_rows(), 2);
        assert_eq!(ds.column(0).kind, ColumnKind::Numeric);
        assert_eq!(ds.column(0).range, Some((1.0, 2.0)));
        assert_eq!(ds.column(1).kind, ColumnKind::Categorical);
        assert_eq!(ds.target_name(), "y");
    }

    #[test]
    fn configured_missing_token() {
        let ds = load("x,y\n1,a\nNA,b\n3,a\n", &LoadOptions::default()).unwrap();
        assert_eq!(ds.column(0).kind, ColumnKind::Numeric);
        assert!(ds.cell(1, 0).is_missing());
        assert_eq!(ds.column(0).range, Some((1.0, 3.0)));

        let opts = LoadOptions {
            missing_tokens: vec!["?".into()],
            ..LoadOptions::default()
        };
        let ds = load("x,y\n1,a\n?,b\n", &opts).unwrap();
        assert!(ds.cell(1, 0).is_missing());
    }

    #[test]
    fn wrong_arity_reports_row() {
        let err = load("x,y\n1,a\n2\n", &LoadOptions::default()).unwrap_err();
        assert!(matches!(err, Error::Parse { row: 1, .. }), "{err}");
    }

    #[test]
    fn forced_numeric_with_text_is_type_error() {
        let opts = LoadOptions {
            columns: vec![ColumnHint {
                name: "x".into(),
                kind: Some(ColumnKind::Numeric),
                ..ColumnHint::default()
            }],
            ..LoadOptions::default()
        };
        let err = load("x,y\n1,a\nfoo,b\n", &opts).unwrap_err();
        assert!(matches!(err, Error::Type { row: 1, .. }), "{err}");
    }

    #[test]
    fn empty_and_single_row_rejected() {
        assert!(matches!(
            load("x,y\n", &LoadOptions::default()),
            Err(Error::EmptyDataset)
        ));
        assert!(matches!(
            load("x,y\n1,a\n", &LoadOptions::default()),
            Err(Error::TooFewRows { .. })
        ));
    }

    #[test]
    fn missing_target_rejected() {
        let err = load("x,y\n1,a\n2,\n", &LoadOptions::default()).unwrap_err();
        assert!(matches!(err, Error::MissingCell { row: 1, .. }));
    }

    fn colors() -> TabularDataset {
        load(
            "color,size,label\nred,1,a\nred,2,b\nblue,3,a\ngreen,4,b\n",
            &LoadOptions::default(),
        )
        .unwrap()
    }

    #[test]
    fn groups_by_equality() {
        let spec: GroupSpec =
            serde_json::from_str(r#"[{"column": "color", "op": "eq", "value": "red"}]"#).unwrap();
        let g = assign_groups(&colors(), &spec).unwrap();
        assert_eq!(g.s, vec![1, 1, 0, 0]);
        assert!(!g.degenerate);
    }

    #[test]
    fn groups_conjunction_with_threshold() {
        let spec: GroupSpec = serde_json::from_str(
            r#"[{"column": "color", "op": "eq", "value": "red"}, {"column": "size", "op": "le", "value": 1}]"#,
        )
        .unwrap();
        let g = assign_groups(&colors(), &spec).unwrap();
        assert_eq!(g.s, vec![1, 0, 0, 0]);
    }

    #[test]
    fn degenerate_group_is_flagged() {
        let spec: GroupSpec =
            serde_json::from_str(r#"[{"column": "size", "op": "ge", "value": 0}]"#).unwrap();
        let g = assign_groups(&colors(), &spec).unwrap();
        assert_eq!(g.s, vec![1; 4]);
        assert!(g.degenerate);
    }

    #[test]
    fn unknown_group_column() {
        let spec: GroupSpec =
            serde_json::from_str(r#"[{"column": "shape", "op": "eq", "value": "x"}]"#).unwrap();
        assert!(matches!(
            assign_groups(&colors(), &spec),
            Err(Error::UnknownColumn(_))
        ));
    }

    #[test]
    fn median_split() {
        let ds = load("v,t\n1,a\n2,a\n3,b\n4,b\n", &LoadOptions::default()).unwrap();
        let rule = BinaryTargetRule {
            source_column: "v".into(),
            rule: BinarizeRule::MedianSplit,
        };
        let out = binarize_target(&ds, &rule).unwrap();
        assert_eq!(out.target_name(), "v");
        assert_eq!(out.labels().unwrap().values, vec![0, 0, 1, 1]);
    }

    #[test]
    fn median_split_with_ties_at_top_keeps_two_classes() {
        let ds = load("v,t\n1,a\n2,a\n2,b\n2,b\n", &LoadOptions::default()).unwrap();
        let rule = BinaryTargetRule {
            source_column: "v".into(),
            rule: BinarizeRule::MedianSplit,
        };
        let out = binarize_target(&ds, &rule).unwrap();
        assert_eq!(out.labels().unwrap().values, vec![0, 1, 1, 1]);
    }

    #[test]
    fn constant_column_median_split_fails() {
        let ds = load("v,t\n5,a\n5,b\n5,a\n", &LoadOptions::default()).unwrap();
        let rule = BinaryTargetRule {
            source_column: "v".into(),
            rule: BinarizeRule::MedianSplit,
        };
        assert!(matches!(
            binarize_target(&ds, &rule),
            Err(Error::SingleClass)
        ));
    }

    #[test]
    fn category_partition_on_binary_column_is_identity() {
        let ds = load(
            "v,t\n1,0\n2,1\n3,1\n",
            &LoadOptions::default().with_target("v"),
        )
        .unwrap();
        // `t` is inferred numeric; partition by numeric level.
        let rule = BinaryTargetRule {
            source_column: "t".into(),
            rule: BinarizeRule::CategoryPartition {
                positive: vec!["1".into()],
            },
        };
        let out = binarize_target(&ds, &rule).unwrap();
        assert_eq!(out.labels().unwrap().values, vec![0, 1, 1]);
    }

    #[test]
    fn rule_parsing() {
        assert_eq!(
            "median".parse::<BinarizeRule>().unwrap(),
            BinarizeRule::MedianSplit
        );
        assert_eq!(
            "threshold:40".parse::<BinarizeRule>().unwrap(),
            BinarizeRule::Threshold { value: 40.0 }
        );
        assert_eq!(
            "levels:a,b".parse::<BinarizeRule>().unwrap(),
            BinarizeRule::CategoryPartition {
                positive: vec!["a".into(), "b".into()]
            }
        );
        assert!("bogus".parse::<BinarizeRule>().is_err());
    }

    #[test]
    fn discretize_drops_empty_bins() {
        let ds = load("v,t\n1,a\n5,a\n25,b\n26,b\n", &LoadOptions::default()).unwrap();
        let out = discretize_target(&ds, "v", &[2.0, 10.0, 20.0]).unwrap();
        let labels = out.labels().unwrap();
        assert_eq!(labels.values, vec![0, 1, 2, 2]);
        assert_eq!(labels.names, vec!["[-inf,2)", "[2,10)", "[20,inf)"]);
    }

    #[test]
    fn drop_and_sensitive_options() {
        let opts = LoadOptions {
            drop: vec!["id".into()],
            sensitive: vec!["g".into()],
            ..LoadOptions::default()
        };
        let ds = load("id,g,y\n1,m,a\n2,f,b\n", &opts).unwrap();
        assert_eq!(ds.n_columns(), 2);
        assert!(ds.column(0).sensitive);
    }
}
