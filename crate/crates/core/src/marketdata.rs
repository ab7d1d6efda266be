//! Daily OHLCV and attention-series ingestion, date alignment and window carving.
//!
//! The candle series is the authoritative calendar: every aligned table has one
//! row per candle date, and external series are joined onto it.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{Read, Write};
use std::ops::Range;
use std::path::Path;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DATE_FORMAT: &str = "%Y-%m-%d";

pub const OHLCV_HEADER: [&str; 6] = ["Date", "Open", "High", "Low", "Close", "Volume"];

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Candle {
    pub date: NaiveDate,
    pub open: f64,
    pub high: f64,
    pub low: f64,
    pub close: f64,
    pub volume: f64,
}

impl Candle {
    fn check(&self, row: usize) -> Result<()> {
        let fields = [
            ("Open", self.open),
            ("High", self.high),
            ("Low", self.low),
            ("Close", self.close),
            ("Volume", self.volume),
        ];
        for (name, v) in fields {
            if !v.is_finite() {
                return Err(parse_err(row, name, "value is not finite"));
            }
        }
        if self.low > self.open.min(self.close) || self.low > self.high {
            return Err(parse_err(row, "Low", "low exceeds open/close/high"));
        }
        if self.high < self.open.max(self.close) {
            return Err(parse_err(row, "High", "high below open/close"));
        }
        if self.volume < 0.0 {
            return Err(parse_err(row, "Volume", "negative volume"));
        }
        Ok(())
    }
}

/// Date-ordered daily bars.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct CandleSeries {
    candles: Vec<Candle>,
}

impl CandleSeries {
    /// Sorts by date and validates every bar. Duplicate dates are rejected.
    pub fn new(mut candles: Vec<Candle>) -> Result<Self> {
        for (i, c) in candles.iter().enumerate() {
            c.check(i + 1)?;
        }
        candles.sort_by_key(|c| c.date);
        if let Some(w) = candles.windows(2).find(|w| w[0].date == w[1].date) {
            return Err(Error::DuplicateDate(w[0].date));
        }
        Ok(Self { candles })
    }

    pub fn len(&self) -> usize {
        self.candles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.candles.is_empty()
    }

    pub fn candles(&self) -> &[Candle] {
        &self.candles
    }

    pub fn dates(&self) -> Vec<NaiveDate> {
        self.candles.iter().map(|c| c.date).collect()
    }

    pub fn opens(&self) -> Vec<f64> {
        self.candles.iter().map(|c| c.open).collect()
    }

    pub fn highs(&self) -> Vec<f64> {
        self.candles.iter().map(|c| c.high).collect()
    }

    pub fn lows(&self) -> Vec<f64> {
        self.candles.iter().map(|c| c.low).collect()
    }

    pub fn closes(&self) -> Vec<f64> {
        self.candles.iter().map(|c| c.close).collect()
    }

    pub fn volumes(&self) -> Vec<f64> {
        self.candles.iter().map(|c| c.volume).collect()
    }

    /// Writes the series back out in the ingestion schema. Values use the
    /// shortest representation that parses back to the identical `f64`.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(w);
        wtr.write_record(OHLCV_HEADER)?;
        for c in &self.candles {
            wtr.write_record([
                c.date.format(DATE_FORMAT).to_string(),
                c.open.to_string(),
                c.high.to_string(),
                c.low.to_string(),
                c.close.to_string(),
                c.volume.to_string(),
            ])?;
        }
        wtr.flush().map_err(|e| Error::io("<writer>", e))?;
        Ok(())
    }
}

fn parse_err(row: usize, column: &str, message: impl Into<String>) -> Error {
    Error::Parse { row, column: column.to_string(), message: message.into() }
}

fn parse_date(raw: &str, row: usize, column: &str) -> Result<NaiveDate> {
    NaiveDate::parse_from_str(raw.trim(), DATE_FORMAT)
        .map_err(|e| parse_err(row, column, format!("bad date {raw:?}: {e}")))
}

fn parse_num(raw: &str, row: usize, column: &str) -> Result<f64> {
    raw.trim().parse::<f64>().map_err(|_| parse_err(row, column, format!("bad number {raw:?}")))
}

fn header_index(headers: &csv::StringRecord, name: &str) -> Result<usize> {
    headers
        .iter()
        .position(|h| h.trim().eq_ignore_ascii_case(name))
        .ok_or_else(|| Error::MissingColumn(name.to_string()))
}

fn open_file(path: &Path) -> Result<File> {
    File::open(path).map_err(|e| Error::io(path, e))
}

pub fn load_ohlcv(path: impl AsRef<Path>) -> Result<CandleSeries> {
    let path = path.as_ref();
    read_ohlcv(open_file(path)?)
}

/// Parses `Date,Open,High,Low,Close,Volume` CSV. Extra columns (such as a
/// Yahoo `Adj Close`) are ignored. Row numbers in errors count data rows from 1.
pub fn read_ohlcv<R: Read>(reader: R) -> Result<CandleSeries> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers()?.clone();
    let mut idx = [0usize; 6];
    for (slot, name) in idx.iter_mut().zip(OHLCV_HEADER) {
        *slot = header_index(&headers, name)?;
    }

    let mut candles = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let row = i + 1;
        let rec = rec?;
        let field = |k: usize| rec.get(idx[k]).unwrap_or("");
        let candle = Candle {
            date: parse_date(field(0), row, OHLCV_HEADER[0])?,
            open: parse_num(field(1), row, OHLCV_HEADER[1])?,
            high: parse_num(field(2), row, OHLCV_HEADER[2])?,
            low: parse_num(field(3), row, OHLCV_HEADER[3])?,
            close: parse_num(field(4), row, OHLCV_HEADER[4])?,
            volume: parse_num(field(5), row, OHLCV_HEADER[5])?,
        };
        candle.check(row)?;
        candles.push(candle);
    }
    CandleSeries::new(candles)
}

/// A dated attention series such as daily tweet counts or search-trend index.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExternalSeries {
    pub name: String,
    points: Vec<(NaiveDate, f64)>,
}

impl ExternalSeries {
    pub fn new(name: impl Into<String>, mut points: Vec<(NaiveDate, f64)>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::EmptySeries);
        }
        for (i, &(_, v)) in points.iter().enumerate() {
            if !v.is_finite() {
                return Err(parse_err(i + 1, "Value", "value is not finite"));
            }
            if v < 0.0 {
                return Err(parse_err(i + 1, "Value", "negative value"));
            }
        }
        points.sort_by_key(|p| p.0);
        if let Some(w) = points.windows(2).find(|w| w[0].0 == w[1].0) {
            return Err(Error::DuplicateDate(w[0].0));
        }
        Ok(Self { name: name.into(), points })
    }

    pub fn points(&self) -> &[(NaiveDate, f64)] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Writes `Date,Value` rows, the schema [`read_external`] parses.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(w);
        wtr.write_record(["Date", "Value"])?;
        for (d, v) in &self.points {
            wtr.write_record([d.format(DATE_FORMAT).to_string(), v.to_string()])?;
        }
        wtr.flush().map_err(|e| Error::io("<writer>", e))?;
        Ok(())
    }

    /// Number of reference dates with no observation in this series.
    pub fn missing_count(&self, reference: &[NaiveDate]) -> usize {
        let have: std::collections::HashSet<_> = self.points.iter().map(|p| p.0).collect();
        reference.iter().filter(|d| !have.contains(d)).count()
    }
}

pub fn load_external(path: impl AsRef<Path>, name: &str) -> Result<ExternalSeries> {
    let path = path.as_ref();
    read_external(open_file(path)?, name)
}

/// Parses a two-column `Date,Value` CSV.
pub fn read_external<R: Read>(reader: R, name: &str) -> Result<ExternalSeries> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers()?.clone();
    let di = header_index(&headers, "Date")?;
    let vi = header_index(&headers, "Value")?;
    let mut points = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let row = i + 1;
        let rec = rec?;
        let date = parse_date(rec.get(di).unwrap_or(""), row, "Date")?;
        let value = parse_num(rec.get(vi).unwrap_or(""), row, "Value")?;
        if value < 0.0 {
            return Err(parse_err(row, "Value", "negative value"));
        }
        points.push((date, value));
    }
    ExternalSeries::new(name, points)
}

/// A named numeric column with a per-cell gap mask. Gap cells hold NaN.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Column {
    pub name: String,
    pub values: Vec<f64>,
    pub gaps: Vec<bool>,
}

impl Column {
    /// Column with gaps wherever the value is non-finite.
    pub fn from_values(name: impl Into<String>, mut values: Vec<f64>) -> Self {
        let gaps: Vec<bool> = values.iter().map(|v| !v.is_finite()).collect();
        for (v, &g) in values.iter_mut().zip(&gaps) {
            if g {
                *v = f64::NAN;
            }
        }
        Self { name: name.into(), values, gaps }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Count of leading gap cells.
    pub fn warmup(&self) -> usize {
        self.gaps.iter().take_while(|&&g| g).count()
    }

    pub fn get(&self, i: usize) -> Option<f64> {
        if self.gaps[i] {
            None
        } else {
            Some(self.values[i])
        }
    }
}

/// How dates absent from an external series are handled during alignment.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FillPolicy {
    #[default]
    Zero,
    /// Carry the last observation forward; dates before the first observation stay gaps.
    Previous,
    /// Drop every date where any external series is absent.
    DropRow,
}

/// Date-indexed matrix of named columns sharing one calendar.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct AlignedTable {
    dates: Vec<NaiveDate>,
    columns: Vec<Column>,
    /// Number of cells filled per external column during alignment.
    pub filled: BTreeMap<String, usize>,
}

impl AlignedTable {
    pub fn new(dates: Vec<NaiveDate>) -> Self {
        Self { dates, columns: Vec::new(), filled: BTreeMap::new() }
    }

    pub fn dates(&self) -> &[NaiveDate] {
        &self.dates
    }

    pub fn len(&self) -> usize {
        self.dates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dates.is_empty()
    }

    pub fn columns(&self) -> &[Column] {
        &self.columns
    }

    pub fn column(&self, name: &str) -> Option<&Column> {
        self.columns.iter().find(|c| c.name == name)
    }

    pub fn require(&self, name: &str) -> Result<&Column> {
        self.column(name).ok_or_else(|| Error::MissingColumn(name.to_string()))
    }

    pub fn push(&mut self, column: Column) -> Result<()> {
        if column.len() != self.dates.len() {
            return Err(Error::LengthMismatch { left: column.len(), right: self.dates.len() });
        }
        if self.column(&column.name).is_some() {
            return Err(Error::InvalidData(format!("duplicate column {}", column.name)));
        }
        self.columns.push(column);
        Ok(())
    }

    pub fn slice_rows(&self, range: Range<usize>) -> AlignedTable {
        AlignedTable {
            dates: self.dates[range.clone()].to_vec(),
            columns: self
                .columns
                .iter()
                .map(|c| Column {
                    name: c.name.clone(),
                    values: c.values[range.clone()].to_vec(),
                    gaps: c.gaps[range.clone()].to_vec(),
                })
                .collect(),
            filled: self.filled.clone(),
        }
    }

    fn keep_rows(&mut self, keep: &[bool]) {
        let filter = |v: &mut Vec<f64>| {
            let mut it = keep.iter();
            v.retain(|_| *it.next().unwrap());
        };
        let mut it = keep.iter();
        self.dates.retain(|_| *it.next().unwrap());
        for c in &mut self.columns {
            filter(&mut c.values);
            let mut it = keep.iter();
            c.gaps.retain(|_| *it.next().unwrap());
        }
    }

    /// CSV with a `Date` column first; gap cells are written as empty fields.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        write_columns_csv(w, &self.dates, &self.columns)
    }
}

pub(crate) fn write_columns_csv<W: Write>(w: W, dates: &[NaiveDate], columns: &[Column]) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    let mut header = vec!["Date".to_string()];
    header.extend(columns.iter().map(|c| c.name.clone()));
    wtr.write_record(&header)?;
    for (i, d) in dates.iter().enumerate() {
        let mut rec = vec![d.format(DATE_FORMAT).to_string()];
        rec.extend(columns.iter().map(|c| match c.get(i) {
            Some(v) => v.to_string(),
            None => String::new(),
        }));
        wtr.write_record(&rec)?;
    }
    wtr.flush().map_err(|e| Error::io("<writer>", e))?;
    Ok(())
}

pub const CANDLE_COLUMNS: [&str; 5] = ["open", "high", "low", "close", "volume"];

/// Joins external series onto the candle calendar.
pub fn align_and_fill(candles: &CandleSeries, externals: &[ExternalSeries], fill: FillPolicy) -> Result<AlignedTable> {
    if candles.is_empty() {
        return Err(Error::EmptySeries);
    }
    let dates = candles.dates();
    let first = dates[0];
    let last = *dates.last().unwrap();

    let mut table = AlignedTable::new(dates.clone());
    let base = [candles.opens(), candles.highs(), candles.lows(), candles.closes(), candles.volumes()];
    for (name, values) in CANDLE_COLUMNS.iter().zip(base) {
        table.push(Column::from_values(*name, values))?;
    }

    let mut drop = vec![false; dates.len()];
    for ext in externals {
        let pts = ext.points();
        if pts.iter().all(|&(d, _)| d < first || d > last) {
            return Err(Error::DisjointSeries(ext.name.clone()));
        }
        let lookup: BTreeMap<NaiveDate, f64> = pts.iter().copied().collect();
        let mut values = Vec::with_capacity(dates.len());
        let mut filled = 0;
        let mut previous: Option<f64> = None;
        for (i, d) in dates.iter().enumerate() {
            match lookup.get(d) {
                Some(&v) => {
                    previous = Some(v);
                    values.push(v);
                }
                None => {
                    filled += 1;
                    values.push(match fill {
                        FillPolicy::Zero => 0.0,
                        FillPolicy::Previous => previous.unwrap_or(f64::NAN),
                        FillPolicy::DropRow => {
                            drop[i] = true;
                            f64::NAN
                        }
                    });
                }
            }
        }
        table.filled.insert(ext.name.clone(), filled);
        table.push(Column::from_values(ext.name.clone(), values))?;
    }

    if fill == FillPolicy::DropRow && drop.iter().any(|&d| d) {
        let keep: Vec<bool> = drop.iter().map(|d| !d).collect();
        table.keep_rows(&keep);
        if table.is_empty() {
            return Err(Error::EmptySeries);
        }
    }
    Ok(table)
}

/// The four date windows used for training and out-of-time validation.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WindowTag {
    Complete,
    Reduced,
    Validation30,
    Validation60,
}

impl WindowTag {
    pub const ALL: [WindowTag; 4] =
        [WindowTag::Complete, WindowTag::Reduced, WindowTag::Validation30, WindowTag::Validation60];

    pub fn as_str(&self) -> &'static str {
        match self {
            WindowTag::Complete => "complete",
            WindowTag::Reduced => "reduced",
            WindowTag::Validation30 => "validation30",
            WindowTag::Validation60 => "validation60",
        }
    }

    pub fn is_training(&self) -> bool {
        matches!(self, WindowTag::Complete | WindowTag::Reduced)
    }

    pub fn validation_len(&self) -> Option<usize> {
        match self {
            WindowTag::Validation30 => Some(30),
            WindowTag::Validation60 => Some(60),
            _ => None,
        }
    }
}

impl std::fmt::Display for WindowTag {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for WindowTag {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        WindowTag::ALL
            .into_iter()
            .find(|w| w.as_str() == s)
            .ok_or_else(|| Error::Config(format!("unknown window {s:?}")))
    }
}

/// Where training ends and how long the reduced window is.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct WindowPlan {
    /// Last date (inclusive) of the complete training window.
    pub train_end: NaiveDate,
    pub reduced_rows: usize,
}

impl WindowPlan {
    pub fn new(train_end: NaiveDate) -> Self {
        Self { train_end, reduced_rows: 365 }
    }

    /// Row range of `tag` within a date-sorted calendar.
    pub fn range(&self, dates: &[NaiveDate], tag: WindowTag) -> Result<Range<usize>> {
        let split = dates.partition_point(|d| *d <= self.train_end);
        match tag {
            WindowTag::Complete | WindowTag::Reduced => {
                let want = if tag == WindowTag::Reduced { self.reduced_rows } else { 1 };
                if split < want {
                    return Err(Error::InsufficientRows { window: tag.to_string(), requested: want, available: split });
                }
                Ok(if tag == WindowTag::Reduced { split - self.reduced_rows..split } else { 0..split })
            }
            WindowTag::Validation30 | WindowTag::Validation60 => {
                let want = tag.validation_len().unwrap();
                let available = dates.len() - split;
                if available < want {
                    return Err(Error::InsufficientRows { window: tag.to_string(), requested: want, available });
                }
                Ok(split..split + want)
            }
        }
    }
}

/// Carves one window out of an aligned table.
pub fn window(table: &AlignedTable, tag: WindowTag, plan: &WindowPlan) -> Result<AlignedTable> {
    let range = plan.range(table.dates(), tag)?;
    Ok(table.slice_rows(range))
}
