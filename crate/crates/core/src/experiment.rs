//! Config-driven batch experiment: ingest, build every dataset variant,
//! grid-search each family, refit the winner, evaluate it on the validation
//! windows and write comparison reports.
//!
//! Output layout under the output directory:
//!
//! ```text
//! manifest.json                   run manifest (includes timings)
//! accuracy_by_model.csv           accuracy per variant, family and section
//! timing_<kind>.csv / .txt        train/predict seconds per family and window
//! <kind>_<window>/comparison.csv  long-format metric table with flags
//! <kind>_<window>/comparison.txt  aligned table, one column per family
//! <kind>_<window>/grid_<family>.csv
//! <kind>_<window>/roc_<family>.csv
//! ```
//!
//! Everything except `manifest.json` and the timing files is a pure function
//! of the inputs, the config and the seed.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use serde::{Deserialize, Deserializer, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::eval::{self, paired_t_test, timeit, Metrics, Protocol, Roc, Significance, ALPHA};
use crate::features::{Dataset, DatasetKind, DatasetManifest, FeatureFrame, LabelMode};
use crate::indicators::IndicatorConfig;
use crate::marketdata::{align_and_fill, load_external, load_ohlcv, FillPolicy, WindowPlan, WindowTag};
use crate::models::{self, grid::GridCell, Family, Grid, ModelSpec, ParamValue, Prediction};

pub const TWEET_COLUMN: &str = "tweet";
pub const TREND_COLUMN: &str = "google_trend";

fn parse_date<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<NaiveDate, D::Error> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Str(String),
        Toml(toml::value::Datetime),
    }
    let s = match Repr::deserialize(d)? {
        Repr::Str(s) => s,
        Repr::Toml(t) => t.to_string(),
    };
    NaiveDate::parse_from_str(&s, crate::marketdata::DATE_FORMAT)
        .map_err(|e| serde::de::Error::custom(format!("bad date {s:?}: {e}")))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataConfig {
    pub ohlcv: PathBuf,
    #[serde(default)]
    pub tweets: Option<PathBuf>,
    #[serde(default)]
    pub trends: Option<PathBuf>,
    #[serde(default)]
    pub fill: FillPolicy,
    /// Last date of the complete training window.
    #[serde(deserialize_with = "parse_date")]
    pub train_end: NaiveDate,
    #[serde(default = "default_reduced")]
    pub reduced_rows: usize,
}

fn default_reduced() -> usize {
    365
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GridPreset {
    /// The levels searched in the original study.
    Paper,
    /// A small subset of those levels.
    #[default]
    Quick,
    /// One cell with every family's default hyperparameters.
    Defaults,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum OneOrMany {
    One(ParamValue),
    Many(Vec<ParamValue>),
}

impl OneOrMany {
    fn levels(&self) -> Vec<ParamValue> {
        match self {
            OneOrMany::One(v) => vec![v.clone()],
            OneOrMany::Many(v) => v.clone(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum CustomGrid {
    Block(BTreeMap<String, OneOrMany>),
    Blocks(Vec<BTreeMap<String, OneOrMany>>),
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridsConfig {
    #[serde(default)]
    pub preset: GridPreset,
    /// Per-family grids replacing the preset, keyed by family name.
    #[serde(default)]
    pub custom: BTreeMap<String, CustomGrid>,
}

impl GridsConfig {
    pub fn grid_for(&self, family: Family) -> Grid {
        if let Some(c) = self.custom.get(family.as_str()) {
            let to_axes = |b: &BTreeMap<String, OneOrMany>| b.iter().map(|(k, v)| (k.clone(), v.levels())).collect();
            let blocks = match c {
                CustomGrid::Block(b) => vec![to_axes(b)],
                CustomGrid::Blocks(bs) => bs.iter().map(to_axes).collect(),
            };
            return Grid { family, blocks };
        }
        match self.preset {
            GridPreset::Paper => Grid::paper(family),
            GridPreset::Quick => Grid::quick(family),
            GridPreset::Defaults => Grid::single(&ModelSpec::new(family)),
        }
    }
}

fn default_seed() -> u64 {
    42
}
fn default_output() -> PathBuf {
    PathBuf::from("out")
}
fn default_families() -> Vec<String> {
    Family::TABLE_ORDER.iter().map(|f| f.as_str().to_string()).collect()
}
fn default_kinds() -> Vec<DatasetKind> {
    vec![DatasetKind::Continuous, DatasetKind::Trend]
}
fn default_windows() -> Vec<WindowTag> {
    vec![WindowTag::Complete, WindowTag::Reduced]
}
fn default_validation() -> Vec<WindowTag> {
    vec![WindowTag::Validation30, WindowTag::Validation60]
}
fn default_protocol() -> Protocol {
    Protocol::Cv { k: 20, stratified: true }
}
fn default_repeats() -> usize {
    1
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default = "default_output")]
    pub output_dir: PathBuf,
    #[serde(default)]
    pub label_mode: LabelMode,
    #[serde(default = "default_families")]
    pub families: Vec<String>,
    #[serde(default = "default_kinds")]
    pub kinds: Vec<DatasetKind>,
    #[serde(default = "default_windows")]
    pub windows: Vec<WindowTag>,
    #[serde(default = "default_validation")]
    pub validation: Vec<WindowTag>,
    /// Timed refits per winner; the median is reported.
    #[serde(default = "default_repeats")]
    pub timing_repeats: usize,
    #[serde(default)]
    pub save_models: bool,
    pub data: DataConfig,
    #[serde(default)]
    pub indicators: IndicatorConfig,
    #[serde(default = "default_protocol")]
    pub protocol: Protocol,
    /// Per-family protocol, keyed by family name.
    #[serde(default)]
    pub protocol_overrides: BTreeMap<String, Protocol>,
    #[serde(default)]
    pub grids: GridsConfig,
    /// Directory relative data paths resolve against (the config file's).
    #[serde(skip)]
    pub base_dir: PathBuf,
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = Self::from_toml(&text)?;
        cfg.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(cfg)
    }

    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    /// Selected families in report order.
    pub fn family_list(&self) -> Result<Vec<Family>> {
        let mut out = Vec::new();
        for name in &self.families {
            let f: Family = name.parse()?;
            if !out.contains(&f) {
                out.push(f);
            }
        }
        out.sort_by_key(|f| Family::TABLE_ORDER.iter().position(|g| g == f));
        Ok(out)
    }

    pub fn protocol_for(&self, family: Family) -> &Protocol {
        self.protocol_overrides.get(family.as_str()).unwrap_or(&self.protocol)
    }

    /// Structural checks that need no data.
    pub fn check(&self) -> Result<()> {
        let families = self.family_list()?;
        if families.is_empty() {
            return Err(Error::Config("no families selected".into()));
        }
        if self.kinds.is_empty() || self.windows.is_empty() {
            return Err(Error::Config("at least one dataset kind and one training window are required".into()));
        }
        if let Some(w) = self.windows.iter().find(|w| !w.is_training()) {
            return Err(Error::Config(format!("windows: {w} is not a training window")));
        }
        if let Some(w) = self.validation.iter().find(|w| w.is_training()) {
            return Err(Error::Config(format!("validation: {w} is not a validation window")));
        }
        if self.timing_repeats < 1 {
            return Err(Error::Config("timing_repeats must be at least 1".into()));
        }
        for name in self.protocol_overrides.keys().chain(self.grids.custom.keys()) {
            name.parse::<Family>()?;
        }
        self.indicators.validate().map_err(|e| Error::Config(format!("indicators: {e}")))?;
        Ok(())
    }

    /// SHA-256 of the canonical JSON form; stable under re-serialization.
    pub fn hash(&self) -> String {
        let json = serde_json::to_string(self).expect("config serializes");
        let digest = Sha256::digest(json.as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }
}

/// Metrics for one evaluation section (test or a validation window).
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SectionResult {
    pub metrics: Metrics,
    /// Protocol pairing vector (per fold or per seed); empty for validation windows.
    pub unit_accuracy: Vec<f64>,
    /// Per-row correctness `(row, fraction correct)`, for t-test fallback pairing.
    pub row_correct: Vec<(usize, f64)>,
    pub roc: Option<Roc>,
}

impl SectionResult {
    fn new(y: &[u8], rows_preds: &[(usize, Prediction)], unit_accuracy: Vec<f64>) -> Result<Self> {
        let yt: Vec<u8> = rows_preds.iter().map(|(i, _)| y[*i]).collect();
        let preds: Vec<Prediction> = rows_preds.iter().map(|(_, p)| *p).collect();
        let metrics = Metrics::from_predictions(&yt, &preds)?;
        let scores: Vec<f64> = preds.iter().map(|p| p.score).collect();
        let roc = eval::roc_auc(&yt, &scores).ok();
        let mut acc: BTreeMap<usize, (f64, f64)> = BTreeMap::new();
        for (i, p) in rows_preds {
            let e = acc.entry(*i).or_default();
            e.0 += f64::from(p.label == y[*i]);
            e.1 += 1.0;
        }
        Ok(Self { metrics, unit_accuracy, row_correct: acc.into_iter().map(|(i, (c, n))| (i, c / n)).collect(), roc })
    }
}

/// Outcome for one (variant, family) pair.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FamilyResult {
    pub kind: DatasetKind,
    pub window: WindowTag,
    pub family: Family,
    pub best: Option<ModelSpec>,
    pub grid: Vec<GridCell>,
    pub test: Option<SectionResult>,
    pub validation: BTreeMap<WindowTag, SectionResult>,
    pub train_seconds: f64,
    pub predict_seconds: f64,
    pub warnings: Vec<String>,
    pub error: Option<String>,
}

pub const MANIFEST_FILE: &str = "manifest.json";
pub const STALE_FILE: &str = "STALE";

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RunManifest {
    pub config_hash: String,
    pub config: ExperimentConfig,
    pub datasets: Vec<DatasetManifest>,
    pub results: Vec<FamilyResult>,
    /// Paths relative to the output directory.
    pub reports: Vec<String>,
    pub total_seconds: f64,
}

impl RunManifest {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let s = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_str(&s)?)
    }

    fn families(&self) -> Vec<Family> {
        let mut f: Vec<Family> = Vec::new();
        for r in &self.results {
            if !f.contains(&r.family) {
                f.push(r.family);
            }
        }
        f
    }

    fn variants(&self) -> Vec<(DatasetKind, WindowTag)> {
        let mut v: Vec<(DatasetKind, WindowTag)> = Vec::new();
        for r in &self.results {
            if !v.contains(&(r.kind, r.window)) {
                v.push((r.kind, r.window));
            }
        }
        v
    }
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / 2.0
    }
}

struct Variant {
    kind: DatasetKind,
    window: WindowTag,
    train: Dataset,
    validation: Vec<(WindowTag, Dataset)>,
}

/// Loads and aligns the inputs and builds every requested dataset variant.
fn build_variants(cfg: &ExperimentConfig) -> Result<Vec<Variant>> {
    let ohlcv = cfg.resolve(&cfg.data.ohlcv);
    let candles = load_ohlcv(&ohlcv).map_err(|e| e.in_stage("ingest"))?;
    let mut externals = Vec::new();
    for (path, name) in [(&cfg.data.tweets, TWEET_COLUMN), (&cfg.data.trends, TREND_COLUMN)] {
        if let Some(p) = path {
            externals.push(load_external(cfg.resolve(p), name).map_err(|e| e.in_stage("ingest"))?);
        }
    }
    let table = align_and_fill(&candles, &externals, cfg.data.fill).map_err(|e| e.in_stage("align"))?;
    let plan = WindowPlan { train_end: cfg.data.train_end, reduced_rows: cfg.data.reduced_rows };
    let frame = FeatureFrame::new(&table, &cfg.indicators, cfg.label_mode, plan).map_err(|e| e.in_stage("features"))?;
    let mut out = Vec::new();
    for &kind in &cfg.kinds {
        for &window in &cfg.windows {
            let build = |w: WindowTag| {
                frame.build_dataset(kind, w, window).map_err(|e| e.in_stage(format!("dataset {kind}/{w}")))
            };
            let train = build(window)?;
            let validation = cfg.validation.iter().map(|&w| build(w).map(|d| (w, d))).collect::<Result<Vec<_>>>()?;
            out.push(Variant { kind, window, train, validation });
        }
    }
    Ok(out)
}

fn run_family(cfg: &ExperimentConfig, v: &Variant, family: Family, seed: u64, out_dir: &Path) -> Result<FamilyResult> {
    let grid = cfg.grids.grid_for(family);
    let protocol = cfg.protocol_for(family);
    let search = models::grid_search(&grid, &v.train, protocol, seed)?;
    let best = search.best_cell().spec.clone();
    // Re-run the winning cell for its held-out predictions.
    let held = eval::run_protocol(&best, &v.train, protocol, seed)?;
    let test = SectionResult::new(&prepared_labels(&best, &v.train)?, &held.held_out, held.unit_accuracy.clone())?;

    let mut train_times = Vec::new();
    let mut predict_times = Vec::new();
    let mut model = None;
    for _ in 0..cfg.timing_repeats {
        let m = models::fit(&best, &v.train, seed)?;
        train_times.push(m.meta.train_seconds);
        let (preds, secs) = timeit(|| m.predict(&v.train));
        preds?;
        predict_times.push(secs);
        model = Some(m);
    }
    let model = model.expect("at least one timing repeat");

    let mut validation = BTreeMap::new();
    for (w, ds) in &v.validation {
        let preds = model.predict(ds)?;
        let rows: Vec<(usize, Prediction)> = preds.into_iter().enumerate().collect();
        validation.insert(*w, SectionResult::new(&ds.labels, &rows, Vec::new())?);
    }
    if cfg.save_models {
        let dir = out_dir.join(variant_dir(v.kind, v.window));
        model.save(dir.join(format!("model_{family}.json")))?;
    }
    let mut warnings = held.warnings.clone();
    warnings.extend(model.meta.warnings.iter().cloned());
    warnings.dedup();
    Ok(FamilyResult {
        kind: v.kind,
        window: v.window,
        family,
        best: Some(best),
        grid: search.cells,
        test: Some(test),
        validation,
        train_seconds: median(train_times),
        predict_seconds: median(predict_times),
        warnings,
        error: None,
    })
}

fn prepared_labels(spec: &ModelSpec, ds: &Dataset) -> Result<Vec<u8>> {
    Ok(models::prepare(spec, ds)?.labels.clone())
}

pub fn variant_dir(kind: DatasetKind, window: WindowTag) -> String {
    format!("{kind}_{window}")
}

/// Overrides applied on top of the config file.
#[derive(Clone, Debug, Default)]
pub struct RunOptions {
    pub seed: Option<u64>,
    pub output_dir: Option<PathBuf>,
}

/// Runs the whole experiment and writes every report.
pub fn run(cfg: &ExperimentConfig, opts: &RunOptions) -> Result<RunManifest> {
    cfg.check()?;
    let mut cfg = cfg.clone();
    if let Some(s) = opts.seed {
        cfg.seed = s;
    }
    if let Some(o) = &opts.output_dir {
        cfg.output_dir.clone_from(o);
    }
    let out_dir = cfg.output_dir.clone();
    std::fs::create_dir_all(&out_dir).map_err(|e| Error::io(&out_dir, e))?;
    let stale = out_dir.join(STALE_FILE);
    std::fs::write(&stale, "run in progress or aborted; outputs here may be stale\n")
        .map_err(|e| Error::io(&stale, e))?;

    let (result, total_seconds) = timeit(|| -> Result<(Vec<DatasetManifest>, Vec<FamilyResult>)> {
        let variants = build_variants(&cfg)?;
        let families = cfg.family_list()?;
        let mut datasets = Vec::new();
        let mut results = Vec::new();
        for v in &variants {
            datasets.push(v.train.manifest.clone());
            datasets.extend(v.validation.iter().map(|(_, d)| d.manifest.clone()));
            if cfg.save_models {
                let dir = out_dir.join(variant_dir(v.kind, v.window));
                std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
            }
            for &family in &families {
                let r = run_family(&cfg, v, family, cfg.seed, &out_dir).unwrap_or_else(|e| FamilyResult {
                    kind: v.kind,
                    window: v.window,
                    family,
                    best: None,
                    grid: Vec::new(),
                    test: None,
                    validation: BTreeMap::new(),
                    train_seconds: 0.0,
                    predict_seconds: 0.0,
                    warnings: Vec::new(),
                    error: Some(e.to_string()),
                });
                results.push(r);
            }
        }
        Ok((datasets, results))
    });
    let (datasets, results) = result?;
    let mut manifest =
        RunManifest { config_hash: cfg.hash(), config: cfg, datasets, results, reports: Vec::new(), total_seconds };
    manifest.reports = write_reports(&manifest, &out_dir, ReportFormat::Both)?;
    manifest.reports.push(MANIFEST_FILE.into());
    let path = out_dir.join(MANIFEST_FILE);
    std::fs::write(&path, serde_json::to_string_pretty(&manifest)?).map_err(|e| Error::io(&path, e))?;
    std::fs::remove_file(&stale).map_err(|e| Error::io(&stale, e))?;
    Ok(manifest)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ReportFormat {
    Csv,
    Text,
    Both,
}

impl std::str::FromStr for ReportFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(ReportFormat::Csv),
            "text" | "aligned-text" => Ok(ReportFormat::Text),
            "both" => Ok(ReportFormat::Both),
            other => Err(Error::Config(format!("unknown report format {other:?} (csv, text, both)"))),
        }
    }
}

/// One metric row of a comparison section.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ComparisonRow {
    pub section: String,
    pub metric: &'static str,
    /// Per family in report order; `None` when the family failed or the
    /// metric is undefined.
    pub values: Vec<Option<f64>>,
    pub flags: Vec<Significance>,
}

/// Pairs two sections for a t-test: protocol vectors when both have the same
/// length of at least 2, otherwise per-row correctness on shared rows.
fn pair_vectors(a: &SectionResult, b: &SectionResult) -> Option<(Vec<f64>, Vec<f64>)> {
    if a.unit_accuracy.len() >= 2 && a.unit_accuracy.len() == b.unit_accuracy.len() {
        return Some((a.unit_accuracy.clone(), b.unit_accuracy.clone()));
    }
    let bm: BTreeMap<usize, f64> = b.row_correct.iter().copied().collect();
    let (x, y): (Vec<f64>, Vec<f64>) = a.row_correct.iter().filter_map(|(i, v)| bm.get(i).map(|w| (*v, *w))).unzip();
    (x.len() >= 2).then_some((x, y))
}

/// Accuracy/F/AUC rows for one section. The highest value in each row is
/// starred (first family on ties). In the accuracy row every other family is
/// top-group when a paired t-test against the best gives `p > ALPHA`.
pub fn comparison_rows(section: &str, cells: &[Option<&SectionResult>]) -> Vec<ComparisonRow> {
    type Getter = fn(&Metrics) -> Option<f64>;
    let metric_rows: [(&'static str, Getter); 3] =
        [("accuracy", |m| Some(m.accuracy)), ("f_score", |m| Some(m.f_score)), ("auc", |m| m.auc)];
    metric_rows
        .iter()
        .map(|(name, get)| {
            let values: Vec<Option<f64>> = cells.iter().map(|c| c.and_then(|s| get(&s.metrics))).collect();
            let mut best: Option<usize> = None;
            for (i, v) in values.iter().enumerate() {
                if let Some(v) = v {
                    if best.is_none_or(|b| *v > values[b].unwrap()) {
                        best = Some(i);
                    }
                }
            }
            let flags = (0..values.len())
                .map(|i| match best {
                    Some(b) if b == i => Significance::Best,
                    Some(b) if *name == "accuracy" && values[i].is_some() => {
                        let pair = pair_vectors(cells[b].unwrap(), cells[i].unwrap());
                        match pair.map(|(x, y)| paired_t_test(&x, &y)) {
                            Some(Ok(t)) if t.p > ALPHA => Significance::TopGroup,
                            Some(Ok(_)) => Significance::Other,
                            _ if values[i] == values[b] => Significance::TopGroup,
                            _ => Significance::Other,
                        }
                    }
                    _ => Significance::Other,
                })
                .collect();
            ComparisonRow { section: section.to_string(), metric: name, values, flags }
        })
        .collect()
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn csv_string(rows: Vec<Vec<String>>) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.write_record(&r)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::InvalidData(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

fn section_names(m: &RunManifest) -> Vec<(String, Option<WindowTag>)> {
    let mut s = vec![("test".to_string(), None)];
    s.extend(m.config.validation.iter().map(|w| (w.to_string(), Some(*w))));
    s
}

fn write_file(dir: &Path, rel: &str, body: &str, written: &mut Vec<String>) -> Result<()> {
    let path = dir.join(rel);
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    std::fs::write(&path, body).map_err(|e| Error::io(&path, e))?;
    written.push(rel.to_string());
    Ok(())
}

/// Writes comparison, grid, ROC, accuracy and timing reports; returns the
/// relative paths written.
pub fn write_reports(m: &RunManifest, dir: &Path, format: ReportFormat) -> Result<Vec<String>> {
    let csv = matches!(format, ReportFormat::Csv | ReportFormat::Both);
    let text = matches!(format, ReportFormat::Text | ReportFormat::Both);
    let families = m.families();
    let mut written = Vec::new();
    let mut accuracy_rows =
        vec![vec!["kind".into(), "window".into(), "section".into(), "family".into(), "accuracy".into()]];

    for (kind, window) in m.variants() {
        let vdir = variant_dir(kind, window);
        let results: Vec<&FamilyResult> = families
            .iter()
            .map(|f| {
                m.results
                    .iter()
                    .find(|r| r.kind == kind && r.window == window && r.family == *f)
                    .expect("every variant has every family")
            })
            .collect();
        let mut rows = Vec::new();
        for (name, tag) in section_names(m) {
            let cells: Vec<Option<&SectionResult>> = results
                .iter()
                .map(|r| match tag {
                    None => r.test.as_ref(),
                    Some(w) => r.validation.get(&w),
                })
                .collect();
            for (f, c) in families.iter().zip(&cells) {
                accuracy_rows.push(vec![
                    kind.to_string(),
                    window.to_string(),
                    name.clone(),
                    f.as_str().into(),
                    fmt_opt(c.map(|s| s.metrics.accuracy)),
                ]);
            }
            rows.extend(comparison_rows(&name, &cells));
        }
        if csv {
            let mut out = vec![vec!["section".into(), "metric".into(), "family".into(), "value".into(), "flag".into()]];
            for r in &rows {
                for ((f, v), flag) in families.iter().zip(&r.values).zip(&r.flags) {
                    out.push(vec![
                        r.section.clone(),
                        r.metric.into(),
                        f.as_str().into(),
                        fmt_opt(*v),
                        eval::serde_plain_flag(*flag).into(),
                    ]);
                }
            }
            write_file(dir, &format!("{vdir}/comparison.csv"), &csv_string(out)?, &mut written)?;
        }
        if text {
            let mut s = String::new();
            let _ = writeln!(s, "{kind} data, {window} training window");
            let _ = write!(s, "{:<12} {:<9}", "section", "metric");
            for f in &families {
                let _ = write!(s, " {:>9}", f.display_name());
            }
            s.push('\n');
            for r in &rows {
                let _ = write!(s, "{:<12} {:<9}", r.section, r.metric);
                for (v, flag) in r.values.iter().zip(&r.flags) {
                    let cell = match v {
                        Some(v) => format!("{v:.3}{}", flag.marker()),
                        None => "-".into(),
                    };
                    let _ = write!(s, " {cell:>9}");
                }
                s.push('\n');
            }
            for r in results.iter().filter(|r| r.error.is_some()) {
                let _ = writeln!(s, "{} failed: {}", r.family.display_name(), r.error.as_deref().unwrap());
            }
            let _ = writeln!(s, "* best in row, + not significantly below the best (paired t-test, p > {ALPHA})");
            write_file(dir, &format!("{vdir}/comparison.txt"), &s, &mut written)?;
        }
        if csv {
            for r in &results {
                let mut g = vec![vec!["params".into(), "accuracy".into(), "auc".into(), "error".into()]];
                for c in &r.grid {
                    g.push(vec![
                        c.spec.key(),
                        fmt_opt(c.accuracy),
                        fmt_opt(c.auc),
                        c.error.clone().unwrap_or_default(),
                    ]);
                }
                if let Some(e) = &r.error {
                    g.push(vec![String::new(), String::new(), String::new(), e.clone()]);
                }
                write_file(dir, &format!("{vdir}/grid_{}.csv", r.family), &csv_string(g)?, &mut written)?;
                let mut roc = vec![vec!["threshold".into(), "fpr".into(), "tpr".into()]];
                if let Some(points) = r.test.as_ref().and_then(|t| t.roc.as_ref()).map(|r| &r.points) {
                    for p in points {
                        roc.push(vec![p.threshold.to_string(), p.fpr.to_string(), p.tpr.to_string()]);
                    }
                }
                write_file(dir, &format!("{vdir}/roc_{}.csv", r.family), &csv_string(roc)?, &mut written)?;
            }
        }
    }
    if csv {
        write_file(dir, "accuracy_by_model.csv", &csv_string(accuracy_rows)?, &mut written)?;
    }

    // Timing tables: one per kind, a row per family, train and predict
    // seconds for each training window.
    let kinds: Vec<DatasetKind> = m.variants().iter().fold(Vec::new(), |mut acc, (k, _)| {
        if !acc.contains(k) {
            acc.push(*k);
        }
        acc
    });
    let windows = &m.config.windows;
    for kind in kinds {
        let mut header = vec!["family".to_string()];
        for w in windows {
            header.push(format!("train_{w}"));
            header.push(format!("predict_{w}"));
        }
        let mut table = vec![header];
        for f in &families {
            let mut row = vec![f.display_name().to_string()];
            for w in windows {
                let r = m.results.iter().find(|r| r.kind == kind && r.window == *w && r.family == *f);
                match r.filter(|r| r.error.is_none()) {
                    Some(r) => {
                        row.push(r.train_seconds.to_string());
                        row.push(r.predict_seconds.to_string());
                    }
                    None => {
                        row.push(String::new());
                        row.push(String::new());
                    }
                }
            }
            table.push(row);
        }
        if csv {
            write_file(dir, &format!("timing_{kind}.csv"), &csv_string(table.clone())?, &mut written)?;
        }
        if text {
            let mut s = format!("Elapsed time in seconds ({kind} data)\n");
            for (i, row) in table.iter().enumerate() {
                let _ = write!(s, "{:<9}", row[0]);
                for cell in &row[1..] {
                    let shown = match (i, cell.parse::<f64>()) {
                        (0, _) => cell.clone(),
                        (_, Ok(v)) => format!("{v:.3}"),
                        _ => "-".into(),
                    };
                    let _ = write!(s, " {shown:>17}");
                }
                s.push('\n');
            }
            write_file(dir, &format!("timing_{kind}.txt"), &s, &mut written)?;
        }
    }
    Ok(written)
}

/// Findings from checking a config without running it.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Diagnostics {
    pub errors: Vec<String>,
    pub warnings: Vec<String>,
}

impl Diagnostics {
    pub fn is_clean(&self) -> bool {
        self.errors.is_empty()
    }
}

/// Schema, path, grid and protocol checks. Protocol feasibility is checked
/// against the actual row counts when the data loads.
pub fn validate_config(path: impl AsRef<Path>) -> Diagnostics {
    let mut d = Diagnostics::default();
    let cfg = match ExperimentConfig::load(path) {
        Ok(c) => c,
        Err(e) => {
            d.errors.push(e.to_string());
            return d;
        }
    };
    if let Err(e) = cfg.check() {
        d.errors.push(e.to_string());
        return d;
    }
    let mut paths = vec![("data.ohlcv", &cfg.data.ohlcv)];
    if let Some(p) = &cfg.data.tweets {
        paths.push(("data.tweets", p));
    }
    if let Some(p) = &cfg.data.trends {
        paths.push(("data.trends", p));
    }
    let mut paths_ok = true;
    for (name, p) in paths {
        let full = cfg.resolve(p);
        if !full.is_file() {
            d.errors.push(format!("{name}: {} does not exist", full.display()));
            paths_ok = false;
        }
    }
    let families = cfg.family_list().unwrap_or_default();
    for &f in &families {
        let grid = cfg.grids.grid_for(f);
        if let Err(e) = grid.validate() {
            d.errors.push(format!("grids.{f}: {e}"));
            continue;
        }
        for spec in grid.specs() {
            let w = match f {
                Family::Ann => models::ann::AnnParams::from_spec(&spec).map(|p| p.grid_warnings()),
                Family::Lstm => models::lstm::LstmParams::from_spec(&spec).map(|p| p.grid_warnings()),
                _ => Ok(Vec::new()),
            };
            for msg in w.unwrap_or_default() {
                if !d.warnings.contains(&msg) {
                    d.warnings.push(msg);
                }
            }
        }
    }
    if paths_ok {
        match build_variants(&cfg) {
            Ok(variants) => {
                for v in &variants {
                    for &f in &families {
                        let p = cfg.protocol_for(f);
                        if let Err(e) = p.check_feasible(v.train.len()) {
                            let which = if cfg.protocol_overrides.contains_key(f.as_str()) {
                                format!("protocol_overrides.{f}")
                            } else {
                                "protocol".to_string()
                            };
                            let msg = format!("{which} on {}/{}: {e}", v.kind, v.window);
                            if !d.errors.contains(&msg) {
                                d.errors.push(msg);
                            }
                        }
                    }
                }
            }
            Err(e) => d.errors.push(e.to_string()),
        }
    }
    d
}

/// Human-readable diagnostics summary.
pub fn render_diagnostics(d: &Diagnostics) -> String {
    let mut s = String::new();
    for e in &d.errors {
        let _ = writeln!(s, "error: {e}");
    }
    for w in &d.warnings {
        let _ = writeln!(s, "warning: {w}");
    }
    if d.is_clean() {
        let _ = writeln!(s, "config ok");
    }
    s
}
