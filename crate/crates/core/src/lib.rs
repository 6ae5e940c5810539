//! Rank-frequency analysis for discrete symbol sequences.
//!
//! The pipeline runs from frame-level features to fitted power laws:
//!
//! * [`quantize`] trains a k-means codebook, maps frames to unit ids and
//!   collapses repeated units.
//! * [`ngram`] counts unit, character and word n-grams into mergeable tables
//!   and picks `n` from sequence-length ratios.
//! * [`powerlaw`] ranks table entries, trims them to a rank band and fits
//!   `f_r = a · r^(-eta)` by least squares in log-log space.
//! * [`deviation`] compares groups of utterances against a reference group.
//! * [`corpus`] holds the on-disk record, feature and manifest formats.

pub mod corpus;
pub mod deviation;
pub mod error;
pub mod ngram;
pub mod powerlaw;
pub mod quantize;

pub use corpus::{FeatureMatrix, ManifestEntry, TokenRecord, UtteranceRecord};
pub use deviation::{compare_groups, subsample_groups, top_mass, DeviationReport};
pub use error::{Error, Result};
pub use ngram::{choose_n, count_char_ngrams, count_unit_ngrams, count_words, merge, AlphabetKind, Charset, Gram, NgramTable};
pub use powerlaw::{fit_powerlaw, rank_frequency, sample_zipf, thin, trim, PowerLawFit, RankFrequency};
pub use quantize::{assign, dedupe, inertia, kmeans_train, Codebook, TrainOptions};
