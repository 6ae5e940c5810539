//! Rank-frequency distributions and least-squares power-law fits
//! `f_r = a · r^(-eta)` in log10-log10 space.

use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ngram::{AlphabetKind, Gram, NgramTable};

pub const DEFAULT_TRIM_LO: f64 = 0.001;
pub const DEFAULT_TRIM_HI: f64 = 0.10;
pub const DEFAULT_THIN_POINTS: usize = 500;

#[derive(Debug, Clone, PartialEq)]
pub struct RankEntry {
    pub rank: usize,
    pub item: Gram,
    pub count: u64,
    pub rel_freq: f64,
}

/// Items of a table sorted by descending count, ranked `1..=V`.
#[derive(Debug, Clone, PartialEq)]
pub struct RankFrequency {
    pub entries: Vec<RankEntry>,
    pub total: u64,
}

impl RankFrequency {
    /// Vocabulary size `V`.
    pub fn vocab_size(&self) -> usize {
        self.entries.len()
    }

    /// `(rank, count)` pairs as reals, ready for fitting.
    pub fn points(&self) -> Vec<(f64, f64)> {
        self.entries
            .iter()
            .map(|e| (e.rank as f64, e.count as f64))
            .collect()
    }

    /// Writes `rank,item,count,rel_freq` rows.
    pub fn write_plot_csv<W: Write>(&self, out: W) -> Result<()> {
        let err = |e: csv::Error| Error::io("<plot csv>", e.into());
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["rank", "item", "count", "rel_freq"])
            .map_err(err)?;
        for e in &self.entries {
            w.write_record([
                e.rank.to_string(),
                e.item.to_string(),
                e.count.to_string(),
                e.rel_freq.to_string(),
            ])
            .map_err(err)?;
        }
        w.flush().map_err(|e| Error::io("<plot csv>", e))
    }
}

/// Ranks every item of `table`; ties get distinct ranks in item order.
pub fn rank_frequency(table: &NgramTable) -> Result<RankFrequency> {
    if table.is_empty() {
        return Err(Error::EmptyTable);
    }
    let total = table.total();
    let entries = table
        .sorted_entries()
        .into_iter()
        .enumerate()
        .map(|(i, (item, count))| RankEntry {
            rank: i + 1,
            item: item.clone(),
            count,
            rel_freq: count as f64 / total as f64,
        })
        .collect();
    Ok(RankFrequency { entries, total })
}

/// Snaps values within rounding noise of an integer before ceil/floor, so
/// `0.001 * 10000` counts as exactly 10.
fn snap(x: f64) -> f64 {
    let r = x.round();
    if (x - r).abs() <= 1e-9 * r.abs().max(1.0) {
        r
    } else {
        x
    }
}

/// Inclusive rank range `[lo_rank, hi_rank]` kept by a trim band over a
/// vocabulary of `vocab` items.
pub fn trim_ranks(vocab: usize, lo_frac: f64, hi_frac: f64) -> Result<(usize, usize)> {
    if !(0.0..1.0).contains(&lo_frac) || !(hi_frac <= 1.0) || lo_frac >= hi_frac {
        return Err(Error::BadBand {
            lo: lo_frac,
            hi: hi_frac,
        });
    }
    let v = vocab as f64;
    let lo = (snap(lo_frac * v).ceil() as usize).max(1);
    let hi = (snap(hi_frac * v).floor() as usize).max(lo);
    Ok((lo, hi))
}

/// `(rank, count)` pairs inside the trim band. Fails unless at least two
/// ranks survive.
pub fn trim(rf: &RankFrequency, lo_frac: f64, hi_frac: f64) -> Result<Vec<(usize, u64)>> {
    let (lo, hi) = trim_ranks(rf.vocab_size(), lo_frac, hi_frac)?;
    let kept: Vec<_> = rf
        .entries
        .iter()
        .filter(|e| (lo..=hi).contains(&e.rank))
        .map(|e| (e.rank, e.count))
        .collect();
    if kept.len() < 2 {
        return Err(Error::TooFewPoints {
            have: kept.len(),
            group: None,
        });
    }
    Ok(kept)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerLawFit {
    pub a: f64,
    pub eta: f64,
    pub eta_fixed: bool,
    /// Root-mean-square residual in log10 space.
    pub rmse_log: f64,
    pub n_points: usize,
    pub trim_lo_rank: usize,
    pub trim_hi_rank: usize,
}

impl PowerLawFit {
    pub fn predict(&self, rank: f64) -> f64 {
        self.a * rank.powf(-self.eta)
    }
}

/// Least-squares fit of `log10 f = log10 a - eta · log10 r`.
///
/// With `fix_eta` only `a` is estimated: `log10 a = mean(log10 f + eta · log10 r)`.
pub fn fit_powerlaw(points: &[(f64, f64)], fix_eta: Option<f64>) -> Result<PowerLawFit> {
    if points.len() < 2 {
        return Err(Error::TooFewPoints {
            have: points.len(),
            group: None,
        });
    }
    if let Some(&(rank, count)) = points
        .iter()
        .find(|(r, c)| !(r.is_finite() && *r >= 1.0 && c.is_finite() && *c > 0.0))
    {
        return Err(Error::InvalidPoint { rank, count });
    }
    if let Some(eta) = fix_eta.filter(|e| !e.is_finite()) {
        return Err(Error::InvalidArgument(format!("fixed eta {eta} is not finite")));
    }

    let n = points.len() as f64;
    let xs: Vec<f64> = points.iter().map(|p| p.0.log10()).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.1.log10()).collect();

    let (eta, log_a) = match fix_eta {
        Some(eta) => {
            let log_a = xs.iter().zip(&ys).map(|(x, y)| y + eta * x).sum::<f64>() / n;
            (eta, log_a)
        }
        None => {
            let mx = xs.iter().sum::<f64>() / n;
            let my = ys.iter().sum::<f64>() / n;
            let (mut sxx, mut sxy) = (0.0, 0.0);
            for (x, y) in xs.iter().zip(&ys) {
                sxx += (x - mx) * (x - mx);
                sxy += (x - mx) * (y - my);
            }
            if sxx == 0.0 {
                return Err(Error::DegeneratePoints { rank: points[0].0 });
            }
            let slope = sxy / sxx;
            (-slope, my - slope * mx)
        }
    };

    let sse: f64 = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| {
            let r = y - (log_a - eta * x);
            r * r
        })
        .sum();
    let lo = points.iter().map(|p| p.0).fold(f64::INFINITY, f64::min);
    let hi = points.iter().map(|p| p.0).fold(f64::NEG_INFINITY, f64::max);

    Ok(PowerLawFit {
        a: 10f64.powf(log_a),
        eta,
        eta_fixed: fix_eta.is_some(),
        rmse_log: (sse / n).sqrt(),
        n_points: points.len(),
        trim_lo_rank: lo as usize,
        trim_hi_rank: hi as usize,
    })
}

/// Trims a distribution to the band and fits it.
pub fn fit_band(
    rf: &RankFrequency,
    lo_frac: f64,
    hi_frac: f64,
    fix_eta: Option<f64>,
) -> Result<PowerLawFit> {
    let points: Vec<(f64, f64)> = trim(rf, lo_frac, hi_frac)?
        .into_iter()
        .map(|(r, c)| (r as f64, c as f64))
        .collect();
    fit_powerlaw(&points, fix_eta)
}

/// Fit summary as written by the `fit` command.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub a: f64,
    pub eta: f64,
    pub eta_fixed: bool,
    pub rmse_log: f64,
    pub n_points: usize,
    pub trim_lo_rank: usize,
    pub trim_hi_rank: usize,
    pub total_tokens: u64,
    pub vocab_size: usize,
}

impl FitReport {
    pub fn new(fit: &PowerLawFit, rf: &RankFrequency) -> Self {
        FitReport {
            a: fit.a,
            eta: fit.eta,
            eta_fixed: fit.eta_fixed,
            rmse_log: fit.rmse_log,
            n_points: fit.n_points,
            trim_lo_rank: fit.trim_lo_rank,
            trim_hi_rank: fit.trim_hi_rank,
            total_tokens: rf.total,
            vocab_size: rf.vocab_size(),
        }
    }
}

/// Keeps at most `max_points` entries at ranks nearest a log-uniform grid
/// over `1..=V`, always including ranks 1 and V. For plotting only.
pub fn thin(rf: &RankFrequency, max_points: usize) -> RankFrequency {
    let v = rf.vocab_size();
    let m = max_points.max(2);
    if v <= m {
        return rf.clone();
    }
    let log_v = (v as f64).ln();
    let mut ranks: Vec<usize> = (0..m)
        .map(|i| {
            let r = (log_v * i as f64 / (m - 1) as f64).exp().round() as usize;
            r.clamp(1, v)
        })
        .collect();
    ranks[0] = 1;
    ranks[m - 1] = v;
    ranks.dedup();
    RankFrequency {
        entries: ranks.iter().map(|&r| rf.entries[r - 1].clone()).collect(),
        total: rf.total,
    }
}

/// Draws over items `1..=V` with probability proportional to `r^(-eta)`.
#[derive(Debug, Clone)]
pub struct ZipfSampler {
    cdf: Vec<f64>,
}

impl ZipfSampler {
    pub fn new(vocab: usize, eta: f64) -> Result<Self> {
        if vocab == 0 || vocab > u32::MAX as usize {
            return Err(Error::InvalidArgument(format!(
                "vocabulary size {vocab} out of range"
            )));
        }
        if !(eta.is_finite() && eta >= 0.0) {
            return Err(Error::InvalidArgument(format!("eta {eta} must be >= 0")));
        }
        let mut acc = 0.0;
        let cdf = (1..=vocab)
            .map(|r| {
                acc += (r as f64).powf(-eta);
                acc
            })
            .collect();
        Ok(ZipfSampler { cdf })
    }

    pub fn vocab_size(&self) -> usize {
        self.cdf.len()
    }

    /// Exact probability of item `rank`.
    pub fn probability(&self, rank: usize) -> f64 {
        let below = if rank > 1 { self.cdf[rank - 2] } else { 0.0 };
        (self.cdf[rank - 1] - below) / self.cdf[self.cdf.len() - 1]
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> u32 {
        let total = self.cdf[self.cdf.len() - 1];
        let u = rng.random::<f64>() * total;
        let idx = self.cdf.partition_point(|&c| c <= u).min(self.cdf.len() - 1);
        idx as u32 + 1
    }

    /// Deterministic stream of draws for `seed`.
    pub fn draws(&self, seed: u64) -> impl Iterator<Item = u32> + '_ {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        std::iter::repeat_with(move || self.sample(&mut rng))
    }
}

/// Unigram unit table of `n_draws` i.i.d. Zipf draws (unit id = rank).
pub fn sample_zipf(vocab: usize, eta: f64, n_draws: u64, seed: u64) -> Result<NgramTable> {
    let sampler = ZipfSampler::new(vocab, eta)?;
    let mut counts = vec![0u64; vocab];
    for item in sampler.draws(seed).take(n_draws as usize) {
        counts[item as usize - 1] += 1;
    }
    let mut table = NgramTable::new(1, AlphabetKind::Unit)?;
    for (i, c) in counts.into_iter().enumerate() {
        table.add(Gram::Units(vec![i as u32 + 1].into()), c)?;
    }
    Ok(table)
}
