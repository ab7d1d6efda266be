//! Direction-of-movement classification for daily market series.
//!
//! The pipeline runs in five stages:
//!
//! 1. [`marketdata`] loads OHLCV bars and attention series (tweet counts,
//!    search trends) from CSV, aligns them on the candle calendar and carves
//!    the complete / reduced / validation windows.
//! 2. [`indicators`] computes the technical indicator set.
//! 3. [`features`] derives direction labels and builds either min-max scaled
//!    *continuous* datasets or binarized *trend* datasets.
//! 4. [`models`] holds seven classifier families written from scratch behind
//!    one fit/predict interface, plus exhaustive grid search.
//! 5. [`eval`] provides metrics, validation protocols, paired t-tests and
//!    timing; [`experiment`] wires everything into a config-driven runner.
//!
//! Inner loops that are data-parallel (grid cells, folds, forest trees, kernel
//! rows, neighbor queries) go through [`par`], which uses rayon when the
//! `parallel` feature is enabled and plain iteration otherwise.

// `!(x >= 0.0)` style checks reject NaN on purpose, and index loops read better
// than zipped iterators in the numeric kernels.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod error;
pub mod eval;
pub mod experiment;
pub mod features;
pub mod indicators;
pub mod marketdata;
pub mod matrix;
pub mod models;
pub mod par;
pub mod synthetic;

pub use error::{Error, Result};
pub use features::{Dataset, DatasetKind, LabelMode};
pub use marketdata::{AlignedTable, CandleSeries, WindowPlan, WindowTag};
pub use matrix::Matrix;
pub use models::{Family, ModelSpec, TrainedModel};
