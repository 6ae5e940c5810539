//! k-means vector quantization: codebook training, frame assignment and
//! run-length deduplication of the resulting unit sequences.

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::corpus::{read_f32_grid, write_f32_grid, FeatureMatrix, UtteranceRecord};
use crate::error::{Error, Result};

pub(crate) const CODEBOOK_MAGIC: [u8; 4] = *b"CDBK";

pub const DEFAULT_K: usize = 200;
pub const DEFAULT_MAX_ITERS: usize = 100;
pub const DEFAULT_TOL: f64 = 1e-6;

/// `k` centroids of dimension `dim`, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Codebook {
    k: usize,
    dim: usize,
    centroids: Vec<f64>,
    pub trained_on: Option<String>,
}

impl Codebook {
    pub fn new(dim: usize, centroids: Vec<f64>) -> Result<Self> {
        if dim == 0 || centroids.is_empty() || centroids.len() % dim != 0 {
            return Err(Error::InvalidArgument(format!(
                "{} centroid values do not form k >= 1 rows of dim {dim}",
                centroids.len()
            )));
        }
        if let Some(pos) = centroids.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFiniteValue {
                frame: pos / dim,
                component: pos % dim,
            });
        }
        Ok(Codebook {
            k: centroids.len() / dim,
            dim,
            centroids,
            trained_on: None,
        })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn centroid(&self, i: usize) -> &[f64] {
        &self.centroids[i * self.dim..(i + 1) * self.dim]
    }

    pub fn centroids(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        self.centroids.chunks_exact(self.dim)
    }

    /// Index and squared distance of the nearest centroid. Ties go to the
    /// lowest index.
    pub fn nearest(&self, frame: &[f32]) -> (u32, f64) {
        let mut best = (0u32, f64::INFINITY);
        for (i, c) in self.centroids().enumerate() {
            let d = sq_dist(frame, c);
            if d < best.1 {
                best = (i as u32, d);
            }
        }
        best
    }

    fn check_dim(&self, dim: usize) -> Result<()> {
        if dim != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                actual: dim,
            });
        }
        Ok(())
    }
}

fn sq_dist(frame: &[f32], centroid: &[f64]) -> f64 {
    frame
        .iter()
        .zip(centroid)
        .map(|(&x, &c)| {
            let d = x as f64 - c;
            d * d
        })
        .sum()
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainOptions {
    pub k: usize,
    pub seed: u64,
    pub max_iters: usize,
    pub tol: f64,
}

impl Default for TrainOptions {
    fn default() -> Self {
        TrainOptions {
            k: DEFAULT_K,
            seed: 0,
            max_iters: DEFAULT_MAX_ITERS,
            tol: DEFAULT_TOL,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Training {
    pub codebook: Codebook,
    /// Lloyd iterations performed.
    pub iterations: usize,
    /// Inertia of the initial centroids followed by the inertia after each
    /// update; the last entry is the inertia of `codebook`.
    pub inertia_trace: Vec<f64>,
    pub converged: bool,
}

impl Training {
    pub fn inertia(&self) -> f64 {
        *self.inertia_trace.last().unwrap()
    }
}

fn collect_frames(features: &[FeatureMatrix]) -> Result<(usize, Vec<&[f32]>)> {
    let dim = features.first().map_or(0, FeatureMatrix::dim);
    let mut frames = Vec::new();
    for m in features {
        if m.dim() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                actual: m.dim(),
            });
        }
        frames.extend(m.frames());
    }
    Ok((dim, frames))
}

/// Nearest-centroid labels and squared distances for every frame.
fn assign_frames(codebook: &Codebook, frames: &[&[f32]]) -> Vec<(u32, f64)> {
    frames.par_iter().map(|f| codebook.nearest(f)).collect()
}

/// Sum in frame order so the result does not depend on thread scheduling.
fn total_distance(labels: &[(u32, f64)]) -> f64 {
    labels.iter().map(|&(_, d)| d).sum()
}

/// k-means++ seeding: first centre uniform, then proportional to squared
/// distance from the nearest centre chosen so far.
fn init_plus_plus(frames: &[&[f32]], dim: usize, k: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let to_f64 = |f: &[f32]| f.iter().map(|&v| v as f64).collect::<Vec<_>>();
    let first = rng.random_range(0..frames.len());
    let mut centroids = to_f64(frames[first]);
    let mut dists: Vec<f64> = frames
        .iter()
        .map(|f| sq_dist(f, &centroids[..dim]))
        .collect();

    for _ in 1..k {
        let total: f64 = dists.iter().sum();
        let pick = if total > 0.0 {
            let target = rng.random::<f64>() * total;
            let mut acc = 0.0;
            let mut chosen = None;
            for (i, &d) in dists.iter().enumerate() {
                acc += d;
                if d > 0.0 && acc > target {
                    chosen = Some(i);
                    break;
                }
            }
            // Rounding can leave `target` just above the final sum.
            chosen.unwrap_or_else(|| dists.iter().rposition(|&d| d > 0.0).unwrap())
        } else {
            rng.random_range(0..frames.len())
        };
        let c = to_f64(frames[pick]);
        for (d, f) in dists.iter_mut().zip(frames) {
            *d = d.min(sq_dist(f, &c));
        }
        centroids.extend(c);
    }
    centroids
}

/// Recomputes centroids as cluster means. An empty cluster takes the frame
/// farthest from its current centroid (each frame used at most once).
fn update_centroids(
    frames: &[&[f32]],
    labels: &[(u32, f64)],
    k: usize,
    dim: usize,
) -> Vec<f64> {
    let mut sums = vec![0.0f64; k * dim];
    let mut counts = vec![0usize; k];
    for (f, &(c, _)) in frames.iter().zip(labels) {
        let c = c as usize;
        counts[c] += 1;
        for (s, &x) in sums[c * dim..(c + 1) * dim].iter_mut().zip(f.iter()) {
            *s += x as f64;
        }
    }

    let mut taken = vec![false; frames.len()];
    for c in 0..k {
        let row = &mut sums[c * dim..(c + 1) * dim];
        if counts[c] > 0 {
            let n = counts[c] as f64;
            row.iter_mut().for_each(|s| *s /= n);
            continue;
        }
        let far = labels
            .iter()
            .enumerate()
            .filter(|(i, _)| !taken[*i])
            .fold(None::<(usize, f64)>, |best, (i, &(_, d))| match best {
                Some((_, bd)) if bd >= d => best,
                _ => Some((i, d)),
            });
        if let Some((i, _)) = far {
            taken[i] = true;
            for (s, &x) in row.iter_mut().zip(frames[i].iter()) {
                *s = x as f64;
            }
        }
    }
    sums
}

/// Full-batch Lloyd's algorithm with k-means++ initialization.
///
/// Stops once no centroid moves more than `tol` (Euclidean) in an update, or
/// after `max_iters` updates. Identical inputs and options give a bitwise
/// identical codebook.
pub fn kmeans_train(features: &[FeatureMatrix], opts: &TrainOptions) -> Result<Training> {
    if opts.k == 0 {
        return Err(Error::InvalidArgument("k must be >= 1".into()));
    }
    if !(opts.tol >= 0.0) {
        return Err(Error::InvalidArgument("tol must be non-negative".into()));
    }
    let (dim, frames) = collect_frames(features)?;
    if frames.len() < opts.k {
        return Err(Error::InsufficientPoints {
            frames: frames.len(),
            k: opts.k,
        });
    }

    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut codebook = Codebook::new(dim, init_plus_plus(&frames, dim, opts.k, &mut rng))?;
    let mut labels = assign_frames(&codebook, &frames);
    let mut trace = vec![total_distance(&labels)];
    let mut iterations = 0;
    let mut converged = false;

    while iterations < opts.max_iters {
        let next = update_centroids(&frames, &labels, opts.k, dim);
        let shift = codebook
            .centroids
            .chunks_exact(dim)
            .zip(next.chunks_exact(dim))
            .map(|(a, b)| {
                a.iter()
                    .zip(b)
                    .map(|(x, y)| (x - y) * (x - y))
                    .sum::<f64>()
                    .sqrt()
            })
            .fold(0.0, f64::max);
        codebook.centroids = next;
        iterations += 1;
        labels = assign_frames(&codebook, &frames);
        trace.push(total_distance(&labels));
        if shift <= opts.tol {
            converged = true;
            break;
        }
    }

    Ok(Training {
        codebook,
        iterations,
        inertia_trace: trace,
        converged,
    })
}

/// Maps each frame to its nearest centroid. Id and group are carried over.
pub fn assign(codebook: &Codebook, features: &FeatureMatrix) -> Result<UtteranceRecord> {
    codebook.check_dim(features.dim())?;
    Ok(UtteranceRecord {
        id: features.id.clone(),
        group: features.group.clone(),
        units: features.frames().map(|f| codebook.nearest(f).0).collect(),
    })
}

/// Collapses each maximal run of equal adjacent symbols to its first element.
pub fn dedupe<T: PartialEq + Clone>(units: &[T]) -> Vec<T> {
    let mut out = units.to_vec();
    out.dedup();
    out
}

/// Sum of squared distances from every frame to its nearest centroid.
pub fn inertia(codebook: &Codebook, features: &[FeatureMatrix]) -> Result<f64> {
    let mut total = 0.0;
    for m in features {
        codebook.check_dim(m.dim())?;
        total += m.frames().map(|f| codebook.nearest(f).1).sum::<f64>();
    }
    Ok(total)
}

/// Reads a `CDBK` file. Centroids are stored as f32 on disk.
pub fn read_codebook(path: impl AsRef<Path>) -> Result<Codebook> {
    let path = path.as_ref();
    let (k, dim, values) = read_f32_grid(path, CODEBOOK_MAGIC)?;
    if k == 0 {
        return Err(Error::BadHeader {
            path: path.into(),
            reason: "codebook has k = 0".into(),
        });
    }
    let mut cb = Codebook::new(dim, values.into_iter().map(f64::from).collect())?;
    cb.trained_on = Some(path.display().to_string());
    Ok(cb)
}

pub fn write_codebook(codebook: &Codebook, path: impl AsRef<Path>) -> Result<()> {
    write_f32_grid(
        path.as_ref(),
        CODEBOOK_MAGIC,
        codebook.k,
        codebook.dim,
        codebook.centroids.iter().map(|&v| v as f32),
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    fn matrix(points: &[[f32; 2]]) -> FeatureMatrix {
        FeatureMatrix::new("m", 2, points.iter().flatten().copied().collect()).unwrap()
    }

    #[test]
    fn dedupe_examples() {
        assert_eq!(dedupe(&[3, 3, 3, 50, 200, 200]), vec![3, 50, 200]);
        assert_eq!(dedupe::<u32>(&[]), Vec::<u32>::new());
        assert_eq!(dedupe(&[1, 2, 1]), vec![1, 2, 1]);
    }

    #[test]
    fn assign_nearest_with_low_index_ties() {
        let cb = Codebook::new(2, vec![0.0, 0.0, 10.0, 10.0]).unwrap();
        let rec = assign(&cb, &matrix(&[[1.0, 1.0], [9.0, 9.0], [5.0, 5.0]])).unwrap();
        assert_eq!(rec.units, vec![0, 1, 0]);

        let empty = FeatureMatrix::new("e", 2, vec![]).unwrap();
        assert!(assign(&cb, &empty).unwrap().units.is_empty());

        let wrong = FeatureMatrix::new("w", 3, vec![0.0; 3]).unwrap();
        assert!(matches!(
            assign(&cb, &wrong),
            Err(Error::DimensionMismatch { expected: 2, actual: 3 })
        ));
    }

    #[test]
    fn assign_propagates_id_and_group() {
        let cb = Codebook::new(2, vec![0.0, 0.0]).unwrap();
        let m = matrix(&[[0.0, 0.0]]).with_group(Some("high".into()));
        let rec = assign(&cb, &m).unwrap();
        assert_eq!((rec.id.as_str(), rec.group.as_deref()), ("m", Some("high")));
    }

    #[test]
    fn k_one_gives_mean() {
        let m = matrix(&[[1.0, 2.0], [3.0, 6.0], [5.0, 1.0]]);
        let t = kmeans_train(
            &[m],
            &TrainOptions {
                k: 1,
                ..Default::default()
            },
        )
        .unwrap();
        assert_eq!(t.codebook.centroid(0), &[3.0, 3.0]);
    }

    #[test]
    fn too_few_frames() {
        let m = matrix(&[[0.0, 0.0], [1.0, 1.0], [2.0, 2.0]]);
        let err = kmeans_train(
            &[m],
            &TrainOptions {
                k: 5,
                ..Default::default()
            },
        )
        .unwrap_err();
        assert!(matches!(err, Error::InsufficientPoints { frames: 3, k: 5 }));
    }

    #[test]
    fn mixed_dims_rejected() {
        let a = matrix(&[[0.0, 0.0]]);
        let b = FeatureMatrix::new("b", 3, vec![0.0; 3]).unwrap();
        assert!(matches!(
            kmeans_train(&[a, b], &TrainOptions { k: 1, ..Default::default() }),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn distinct_centroids_when_enough_distinct_points() {
        // Heavy duplication: only 4 distinct points among 40 frames.
        let pts: Vec<[f32; 2]> = (0..40).map(|i| [(i % 4) as f32, 0.0]).collect();
        for seed in 0..20 {
            let t = kmeans_train(
                &[matrix(&pts)],
                &TrainOptions {
                    k: 4,
                    seed,
                    ..Default::default()
                },
            )
            .unwrap();
            let mut xs: Vec<f64> = t.codebook.centroids().map(|c| c[0]).collect();
            xs.sort_by(f64::total_cmp);
            assert_eq!(xs, vec![0.0, 1.0, 2.0, 3.0], "seed {seed}");
            assert_eq!(t.inertia(), 0.0);
        }
    }

    #[test]
    fn empty_cluster_takes_farthest_frame() {
        let frames = [[0.0f32, 0.0], [1.0, 0.0], [10.0, 0.0]];
        let refs: Vec<&[f32]> = frames.iter().map(|f| &f[..]).collect();
        // Both frames near the origin go to centroid 0, the far one too;
        // centroid 1 is empty.
        let labels = vec![(0, 0.0), (0, 1.0), (0, 100.0)];
        let next = update_centroids(&refs, &labels, 2, 2);
        assert_eq!(&next[2..], &[10.0, 0.0]);
    }

    #[test]
    fn inertia_examples() {
        let cb = Codebook::new(2, vec![0.0, 0.0, 10.0, 10.0]).unwrap();
        assert_eq!(inertia(&cb, &[matrix(&[[0.0, 0.0], [10.0, 10.0]])]).unwrap(), 0.0);
        assert_eq!(inertia(&cb, &[matrix(&[[0.0, 2.0]])]).unwrap(), 4.0);
    }

    #[test]
    fn codebook_file_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cb.bin");
        let cb = Codebook::new(2, vec![0.5, -1.0, 3.25, 8.0]).unwrap();
        write_codebook(&cb, &path).unwrap();
        let bytes = std::fs::read(&path).unwrap();
        assert_eq!(&bytes[..4], b"CDBK");
        assert_eq!(bytes.len(), 16 + 4 * 4);
        let back = read_codebook(&path).unwrap();
        assert_eq!((back.k(), back.dim()), (2, 2));
        assert_eq!(back.centroid(1), &[3.25, 8.0]);
    }
}
