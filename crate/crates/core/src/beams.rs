//! Beam labelling by 1-D K-means over inclination angles, and whole-beam
//! discarding to bring a scan down to another sensor's beam count.

use std::collections::HashMap;

use rand::seq::index;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;
use crate::scan::Scan;

pub const DEFAULT_MAX_ITERS: usize = 100;

/// Per-point beam ids from K-means over inclinations.
#[derive(Debug, Clone, PartialEq)]
pub struct BeamModel {
    assignments: Vec<u16>,
    centroids: Vec<f64>,
    inertia_history: Vec<f64>,
    converged: bool,
}

impl BeamModel {
    pub fn k(&self) -> usize {
        self.centroids.len()
    }

    /// Beam index of every point, numbered by ascending centroid.
    pub fn assignments(&self) -> &[u16] {
        &self.assignments
    }

    /// Beam inclinations in radians, ascending.
    pub fn centroids(&self) -> &[f64] {
        &self.centroids
    }

    /// Within-cluster sum of squared deviations after each update step.
    pub fn inertia_history(&self) -> &[f64] {
        &self.inertia_history
    }

    /// Whether Lloyd iterations reached an assignment fixpoint before `max_iters`.
    pub fn converged(&self) -> bool {
        self.converged
    }

    pub fn beam_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.k()];
        for &a in &self.assignments {
            sizes[a as usize] += 1;
        }
        sizes
    }
}

/// Cluster point inclinations into `k` beams with Lloyd's algorithm.
///
/// Centroids start at `k` evenly spaced quantiles of the sorted inclinations,
/// so the result is fully deterministic. Ties go to the lower beam. A centroid
/// that loses all its points is moved onto the point farthest from its own
/// centroid.
pub fn kmeans_label_beams(scan: &Scan, k: usize, max_iters: usize) -> Result<BeamModel> {
    if k == 0 || k > u16::MAX as usize {
        return Err(Error::InvalidParameter(format!(
            "beam count {k} out of range"
        )));
    }
    let values = scan
        .points()
        .iter()
        .map(|p| p.inclination())
        .collect::<Result<Vec<f64>>>()?;
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let sorted: Vec<f64> = order.iter().map(|&i| values[i]).collect();

    let distinct =
        sorted.windows(2).filter(|w| w[0] != w[1]).count() + usize::from(!sorted.is_empty());
    if distinct < k {
        return Err(Error::InsufficientBeamSeparation { distinct, k });
    }

    let n = sorted.len();
    let mut centroids: Vec<f64> = (0..k)
        .map(|j| sorted[(((2 * j + 1) * n) / (2 * k)).min(n - 1)])
        .collect();
    let mut bounds = segment_bounds(&sorted, &centroids);
    let mut history = Vec::new();
    let mut converged = false;

    for iter in 0..max_iters {
        if iter > 0 {
            let next = segment_bounds(&sorted, &centroids);
            if next == bounds {
                converged = true;
                break;
            }
            bounds = next;
        }
        let mut empty = Vec::new();
        let mut start = 0;
        for (j, &end) in bounds.iter().enumerate() {
            if end > start {
                let seg = &sorted[start..end];
                centroids[j] = seg.iter().sum::<f64>() / seg.len() as f64;
            } else {
                empty.push(j);
            }
            start = end;
        }
        history.push(inertia(&sorted, &bounds, &centroids));
        if !empty.is_empty() {
            reseed_empty(&sorted, &bounds, &mut centroids, &empty);
            centroids.sort_by(f64::total_cmp);
        }
    }

    // final assignment against the final centroids
    let bounds = segment_bounds(&sorted, &centroids);
    let mut assignments = vec![0u16; n];
    let mut start = 0;
    for (j, &end) in bounds.iter().enumerate() {
        for &i in &order[start..end] {
            assignments[i] = j as u16;
        }
        start = end;
    }
    Ok(BeamModel {
        assignments,
        centroids,
        inertia_history: history,
        converged,
    })
}

/// Exclusive end offsets of each centroid's segment in `sorted`. Centroids must
/// be ascending; a value goes to the lower centroid unless strictly closer to
/// the next one.
fn segment_bounds(sorted: &[f64], centroids: &[f64]) -> Vec<usize> {
    let mut bounds = Vec::with_capacity(centroids.len());
    let mut lo = 0;
    for w in centroids.windows(2) {
        let (a, b) = (w[0], w[1]);
        let end = lo + sorted[lo..].partition_point(|&v| (v - a).abs() <= (v - b).abs());
        bounds.push(end);
        lo = end;
    }
    bounds.push(sorted.len());
    bounds
}

fn inertia(sorted: &[f64], bounds: &[usize], centroids: &[f64]) -> f64 {
    let mut total = 0.0;
    let mut start = 0;
    for (j, &end) in bounds.iter().enumerate() {
        total += sorted[start..end]
            .iter()
            .map(|v| (v - centroids[j]) * (v - centroids[j]))
            .sum::<f64>();
        start = end;
    }
    total
}

fn reseed_empty(sorted: &[f64], bounds: &[usize], centroids: &mut [f64], empty: &[usize]) {
    let mut dist = Vec::with_capacity(sorted.len());
    let mut start = 0;
    for (j, &end) in bounds.iter().enumerate() {
        dist.extend(sorted[start..end].iter().map(|v| (v - centroids[j]).abs()));
        start = end;
    }
    for &j in empty {
        let (far, _) = dist
            .iter()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |best, (i, &d)| {
                if d > best.1 {
                    (i, d)
                } else {
                    best
                }
            });
        centroids[j] = sorted[far];
        dist[far] = 0.0;
    }
}

/// How to choose which beams survive a beam-count reduction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum BeamSelect {
    /// Evenly spaced over the inclination-sorted beams.
    #[default]
    Even,
    /// Uniform random subset (ablation only).
    Random,
}

/// Keep beams `round(i·(K−1)/(target−1))` for `i in 0..target`; a single
/// surviving beam is the middle one.
pub fn select_beams_even(k: usize, target: usize) -> Result<Vec<usize>> {
    check_target(k, target)?;
    if target == 1 {
        return Ok(vec![((k - 1) as f64 / 2.0).round() as usize]);
    }
    let step = (k - 1) as f64 / (target - 1) as f64;
    Ok((0..target)
        .map(|i| (i as f64 * step).round() as usize)
        .collect())
}

/// Uniformly random set of `target` beams, ascending.
pub fn select_beams_random(k: usize, target: usize, seed: u64) -> Result<Vec<usize>> {
    check_target(k, target)?;
    let mut rng = rng::stream(seed, rng::purpose::BEAM_SELECT);
    let mut kept = index::sample(&mut rng, k, target).into_vec();
    kept.sort_unstable();
    Ok(kept)
}

fn check_target(k: usize, target: usize) -> Result<()> {
    if target == 0 || target > k {
        return Err(Error::TargetCountOutOfRange { target, k });
    }
    Ok(())
}

/// Keep only points whose beam is in `kept`. Returns the reduced scan and, for
/// each output point, its index in the input.
pub fn discard_beams(scan: &Scan, model: &BeamModel, kept: &[usize]) -> Result<(Scan, Vec<usize>)> {
    if model.assignments.len() != scan.len() {
        return Err(Error::LengthMismatch {
            what: "beam assignments",
            expected: scan.len(),
            got: model.assignments.len(),
        });
    }
    let mut keep = vec![false; model.k()];
    for &b in kept {
        *keep.get_mut(b).ok_or_else(|| {
            Error::InvalidParameter(format!("beam {b} out of range for {} beams", model.k()))
        })? = true;
    }
    let map: Vec<usize> = model
        .assignments
        .iter()
        .enumerate()
        .filter(|(_, &a)| keep[a as usize])
        .map(|(i, _)| i)
        .collect();
    Ok((scan.select(&map), map))
}

/// Reduce `scan` from `source_beams` to `target_beams` beams. A no-op when the
/// target is not smaller than the source.
pub fn reduce_beams(
    scan: &Scan,
    source_beams: usize,
    target_beams: usize,
    select: BeamSelect,
    seed: u64,
) -> Result<(Scan, Vec<usize>)> {
    if target_beams >= source_beams {
        return Ok((scan.clone(), (0..scan.len()).collect()));
    }
    let model = kmeans_label_beams(scan, source_beams, DEFAULT_MAX_ITERS)?;
    let kept = match select {
        BeamSelect::Even => select_beams_even(source_beams, target_beams)?,
        BeamSelect::Random => select_beams_random(source_beams, target_beams, seed)?,
    };
    discard_beams(scan, &model, &kept)
}

/// Adjusted Rand index between two labelings of the same points. Two
/// single-cluster labelings score 1.
pub fn adjusted_rand_index<A, B>(a: &[A], b: &[B]) -> f64
where
    A: Copy + Eq + std::hash::Hash,
    B: Copy + Eq + std::hash::Hash,
{
    assert_eq!(a.len(), b.len(), "labelings must cover the same points");
    let pairs = |c: u64| (c * c.saturating_sub(1) / 2) as f64;
    let mut table: HashMap<(A, B), u64> = HashMap::new();
    let mut rows: HashMap<A, u64> = HashMap::new();
    let mut cols: HashMap<B, u64> = HashMap::new();
    for (&x, &y) in a.iter().zip(b) {
        *table.entry((x, y)).or_default() += 1;
        *rows.entry(x).or_default() += 1;
        *cols.entry(y).or_default() += 1;
    }
    let index: f64 = table.values().map(|&c| pairs(c)).sum();
    let sum_a: f64 = rows.values().map(|&c| pairs(c)).sum();
    let sum_b: f64 = cols.values().map(|&c| pairs(c)).sum();
    let total = pairs(a.len() as u64);
    if total == 0.0 {
        return 1.0;
    }
    let expected = sum_a * sum_b / total;
    let max = 0.5 * (sum_a + sum_b);
    if max == expected {
        return 1.0;
    }
    (index - expected) / (max - expected)
}
