//! Group comparison: equal-size subsampling per group, per-group fits and
//! scalar deviation metrics against a reference group.
//!
//! `delta_eta`, `log_curve_distance` and `top_mass_k` are this toolkit's own
//! summary metrics; the report lists them under `derived_metrics`.

use std::collections::BTreeMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::UtteranceRecord;
use crate::error::{Error, Result};
use crate::ngram::{count_unit_ngrams, NgramTable};
use crate::powerlaw::{
    fit_powerlaw, rank_frequency, trim, RankFrequency, DEFAULT_TRIM_HI, DEFAULT_TRIM_LO,
};

pub const DEFAULT_TOP_K: usize = 20;
pub const DEFAULT_SAMPLE_SIZE: usize = 10_000;

const DERIVED_METRICS: [&str; 3] = ["delta_eta", "log_curve_distance", "top_mass_k"];

/// Utterance ids per group label, ids ascending.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct GroupPartition {
    pub groups: BTreeMap<String, Vec<String>>,
}

impl GroupPartition {
    /// Groups labelled records; unlabelled ones are left out.
    pub fn from_records(records: &[UtteranceRecord]) -> Self {
        let mut groups: BTreeMap<String, Vec<String>> = BTreeMap::new();
        for r in records {
            if let Some(g) = &r.group {
                groups.entry(g.clone()).or_default().push(r.id.clone());
            }
        }
        groups.values_mut().for_each(|ids| ids.sort());
        GroupPartition { groups }
    }
}

fn fnv1a(s: &str) -> u64 {
    s.bytes().fold(0xcbf2_9ce4_8422_2325, |h, b| {
        (h ^ b as u64).wrapping_mul(0x0000_0100_0000_01b3)
    })
}

/// Picks exactly `size` records from every labelled group, uniformly without
/// replacement over ids in ascending order. Each group draws from its own
/// stream of `seed`, so adding a group never changes another's sample.
pub fn subsample_groups(
    records: &[UtteranceRecord],
    size: usize,
    seed: u64,
) -> Result<BTreeMap<String, Vec<UtteranceRecord>>> {
    if size == 0 {
        return Err(Error::InvalidArgument("sample size must be >= 1".into()));
    }
    let mut by_group: BTreeMap<&str, Vec<&UtteranceRecord>> = BTreeMap::new();
    for r in records {
        if let Some(g) = &r.group {
            by_group.entry(g).or_default().push(r);
        }
    }

    let mut out = BTreeMap::new();
    for (label, mut members) in by_group {
        if members.len() < size {
            return Err(Error::InsufficientData {
                group: label.to_owned(),
                have: members.len(),
                need: size,
            });
        }
        members.sort_by(|a, b| a.id.cmp(&b.id));
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(fnv1a(label));
        let mut picked = rand::seq::index::sample(&mut rng, members.len(), size).into_vec();
        picked.sort_unstable();
        out.insert(
            label.to_owned(),
            picked.into_iter().map(|i| members[i].clone()).collect(),
        );
    }
    Ok(out)
}

/// Share of all tokens taken by the `k` most frequent items.
pub fn top_mass(rf: &RankFrequency, k: usize) -> f64 {
    let head: u64 = rf.entries.iter().take(k).map(|e| e.count).sum();
    head as f64 / rf.total as f64
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupStats {
    pub eta: f64,
    /// Fitted scale on relative frequencies, comparable across group sizes.
    pub a: f64,
    pub rmse_log: f64,
    pub top_mass_k: f64,
    pub delta_eta: f64,
    pub log_curve_distance: f64,
    pub vocab_size: usize,
    pub trim_lo_rank: usize,
    pub trim_hi_rank: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeviationReport {
    pub reference: String,
    pub n: usize,
    pub kind: String,
    pub trim_lo: f64,
    pub trim_hi: f64,
    #[serde(rename = "K")]
    pub k: usize,
    pub n_utterances_per_group: Option<usize>,
    pub seed: Option<u64>,
    pub derived_metrics: Vec<String>,
    pub per_group: BTreeMap<String, GroupStats>,
}

struct GroupCurve {
    rf: RankFrequency,
    lo: usize,
    hi: usize,
    eta: f64,
    a: f64,
    rmse_log: f64,
}

fn group_curve(label: &str, table: &NgramTable, trim_lo: f64, trim_hi: f64) -> Result<GroupCurve> {
    let too_few = |have| Error::TooFewPoints {
        have,
        group: Some(label.to_owned()),
    };
    let rf = rank_frequency(table).map_err(|_| too_few(0))?;
    let band = trim(&rf, trim_lo, trim_hi).map_err(|e| match e {
        Error::TooFewPoints { have, .. } => too_few(have),
        other => other,
    })?;
    let points: Vec<(f64, f64)> = band
        .iter()
        .map(|&(r, _)| (r as f64, rf.entries[r - 1].rel_freq))
        .collect();
    let fit = fit_powerlaw(&points, None)?;
    Ok(GroupCurve {
        lo: band[0].0,
        hi: band[band.len() - 1].0,
        eta: fit.eta,
        a: fit.a,
        rmse_log: fit.rmse_log,
        rf,
    })
}

/// Mean absolute log10 gap between relative frequencies over the ranks both
/// trimmed bands share.
fn log_curve_distance(label: &str, g: &GroupCurve, reference: &GroupCurve) -> Result<f64> {
    let (lo, hi) = (g.lo.max(reference.lo), g.hi.min(reference.hi));
    if lo > hi {
        return Err(Error::TooFewPoints {
            have: 0,
            group: Some(label.to_owned()),
        });
    }
    let sum: f64 = (lo..=hi)
        .map(|r| (g.rf.entries[r - 1].rel_freq.log10() - reference.rf.entries[r - 1].rel_freq.log10()).abs())
        .sum();
    Ok(sum / (hi - lo + 1) as f64)
}

/// Fits every group and measures its deviation from `reference`.
pub fn compare_groups(
    tables: &BTreeMap<String, NgramTable>,
    reference: &str,
    trim_lo: f64,
    trim_hi: f64,
    k: usize,
) -> Result<DeviationReport> {
    let ref_table = tables
        .get(reference)
        .ok_or_else(|| Error::MissingReference(reference.to_owned()))?;
    if k == 0 {
        return Err(Error::InvalidArgument("K must be >= 1".into()));
    }
    for (label, t) in tables {
        if t.n() != ref_table.n() || t.kind() != ref_table.kind() {
            return Err(Error::IncompatibleTables(format!(
                "group {label:?} is a {}-gram {} table, reference is {}-gram {}",
                t.n(),
                t.kind(),
                ref_table.n(),
                ref_table.kind()
            )));
        }
    }

    let curves = tables
        .iter()
        .map(|(label, t)| Ok((label.as_str(), group_curve(label, t, trim_lo, trim_hi)?)))
        .collect::<Result<BTreeMap<_, _>>>()?;
    let ref_curve = &curves[reference];

    let mut per_group = BTreeMap::new();
    for (&label, c) in &curves {
        per_group.insert(
            label.to_owned(),
            GroupStats {
                eta: c.eta,
                a: c.a,
                rmse_log: c.rmse_log,
                top_mass_k: top_mass(&c.rf, k),
                delta_eta: c.eta - ref_curve.eta,
                log_curve_distance: log_curve_distance(label, c, ref_curve)?,
                vocab_size: c.rf.vocab_size(),
                trim_lo_rank: c.lo,
                trim_hi_rank: c.hi,
            },
        );
    }

    Ok(DeviationReport {
        reference: reference.to_owned(),
        n: ref_table.n(),
        kind: ref_table.kind().to_string(),
        trim_lo,
        trim_hi,
        k,
        n_utterances_per_group: None,
        seed: None,
        derived_metrics: DERIVED_METRICS.iter().map(|s| s.to_string()).collect(),
        per_group,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct CompareOptions {
    pub reference: String,
    pub n: usize,
    pub sample_size: usize,
    pub seed: u64,
    pub trim_lo: f64,
    pub trim_hi: f64,
    pub top_k: usize,
}

impl CompareOptions {
    pub fn new(reference: impl Into<String>) -> Self {
        CompareOptions {
            reference: reference.into(),
            n: 1,
            sample_size: DEFAULT_SAMPLE_SIZE,
            seed: 0,
            trim_lo: DEFAULT_TRIM_LO,
            trim_hi: DEFAULT_TRIM_HI,
            top_k: DEFAULT_TOP_K,
        }
    }
}

/// Per-group rank-frequency curves and their deviation report.
#[derive(Debug, Clone)]
pub struct GroupAnalysis {
    pub report: DeviationReport,
    pub curves: BTreeMap<String, RankFrequency>,
}

/// Subsample, count unit n-grams per group, then compare.
pub fn analyze_groups(records: &[UtteranceRecord], opts: &CompareOptions) -> Result<GroupAnalysis> {
    if !records
        .iter()
        .any(|r| r.group.as_deref() == Some(opts.reference.as_str()))
    {
        return Err(Error::MissingReference(opts.reference.clone()));
    }
    let samples = subsample_groups(records, opts.sample_size, opts.seed)?;
    let tables = samples
        .iter()
        .map(|(g, recs)| Ok((g.clone(), count_unit_ngrams(recs, opts.n)?)))
        .collect::<Result<BTreeMap<_, _>>>()?;
    let mut report = compare_groups(&tables, &opts.reference, opts.trim_lo, opts.trim_hi, opts.top_k)?;
    report.n_utterances_per_group = Some(opts.sample_size);
    report.seed = Some(opts.seed);
    let curves = tables
        .iter()
        .map(|(g, t)| Ok((g.clone(), rank_frequency(t)?)))
        .collect::<Result<_>>()?;
    Ok(GroupAnalysis { report, curves })
}
