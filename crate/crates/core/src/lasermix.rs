//! Intertwined inclination-area mixing of a source and a target scan, and the
//! confidence-thresholded pseudo-labels that label the target half.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::ProbabilityField;
use crate::scan::{InclinationPartition, Point, Scan};

pub const DEFAULT_PSEUDO_THRESHOLD: f64 = 0.9;
pub const DEFAULT_MIX_AREAS: usize = 4;
/// Margin added on both sides of data-driven inclination bounds, in radians.
pub const BOUNDS_MARGIN: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
#[repr(u8)]
pub enum Provenance {
    Source = 0,
    Target = 1,
}

/// The two complementary mixed scans and where each of their points came from.
#[derive(Debug, Clone, PartialEq)]
pub struct MixResult {
    /// Source in even inclination areas, target in odd ones.
    pub mix1: Scan,
    /// Target in even inclination areas, source in odd ones.
    pub mix2: Scan,
    pub provenance1: Vec<Provenance>,
    pub provenance2: Vec<Provenance>,
    /// Index of each point of `mix1` in the scan named by `provenance1`.
    pub origin1: Vec<usize>,
    pub origin2: Vec<usize>,
}

impl MixResult {
    pub fn labels1(&self) -> &[u16] {
        self.mix1.labels().expect("mixed scans are always labelled")
    }

    pub fn labels2(&self) -> &[u16] {
        self.mix2.labels().expect("mixed scans are always labelled")
    }
}

/// Mix two labelled scans area by area.
///
/// Points are grouped by inclination area; `mix1` takes area `i` from the
/// source when `i` is even and from the target when `i` is odd, `mix2` the
/// other way round. Areas are emitted in ascending order and each block keeps
/// the original point order. Instance ids are carried only when both scans
/// have them; the mixed scans take the source sensor spec.
pub fn laser_mix(scan_s: &Scan, scan_t: &Scan, part: &InclinationPartition) -> Result<MixResult> {
    let (ls, lt) = match (scan_s.labels(), scan_t.labels()) {
        (Some(a), Some(b)) => (a, b),
        _ => return Err(Error::UnlabeledScan),
    };
    let carry_ids = scan_s.instance_ids().is_some() && scan_t.instance_ids().is_some();
    let areas_s = bucket(scan_s.points(), part);
    let areas_t = bucket(scan_t.points(), part);

    let assemble = |even: Provenance| -> Result<(Scan, Vec<Provenance>, Vec<usize>)> {
        let total = scan_s.len() + scan_t.len();
        let mut points = Vec::with_capacity(total);
        let mut labels = Vec::with_capacity(total);
        let mut ids = Vec::with_capacity(if carry_ids { total } else { 0 });
        let mut prov = Vec::with_capacity(total);
        let mut origin = Vec::with_capacity(total);
        for area in 0..part.n() {
            let from = match (area % 2 == 0, even) {
                (true, p) => p,
                (false, Provenance::Source) => Provenance::Target,
                (false, Provenance::Target) => Provenance::Source,
            };
            let (scan, lab, idx) = match from {
                Provenance::Source => (scan_s, ls, &areas_s[area]),
                Provenance::Target => (scan_t, lt, &areas_t[area]),
            };
            for &i in idx {
                points.push(scan.points()[i]);
                labels.push(lab[i]);
                if carry_ids {
                    ids.push(scan.instance_ids().expect("checked")[i]);
                }
                prov.push(from);
                origin.push(i);
            }
        }
        let scan = Scan::from_parts(
            points,
            Some(labels),
            carry_ids.then_some(ids),
            scan_s.sensor(),
        )?;
        Ok((scan, prov, origin))
    };

    let (mix1, provenance1, origin1) = assemble(Provenance::Source)?;
    let (mix2, provenance2, origin2) = assemble(Provenance::Target)?;
    Ok(MixResult {
        mix1,
        mix2,
        provenance1,
        provenance2,
        origin1,
        origin2,
    })
}

fn bucket(points: &[Point], part: &InclinationPartition) -> Vec<Vec<usize>> {
    let mut areas = vec![Vec::new(); part.n()];
    for (i, p) in points.iter().enumerate() {
        areas[part.area_index(p)].push(i);
    }
    areas
}

/// Min / max inclination over both scans, widened by [`BOUNDS_MARGIN`].
pub fn default_inclination_bounds(scan_s: &Scan, scan_t: &Scan) -> Result<(f64, f64)> {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for p in scan_s.points().iter().chain(scan_t.points()) {
        let phi = p.raw_inclination();
        lo = lo.min(phi);
        hi = hi.max(phi);
    }
    if lo > hi {
        return Err(Error::Empty("scan union"));
    }
    Ok((lo - BOUNDS_MARGIN, hi + BOUNDS_MARGIN))
}

/// [`InclinationPartition`] over the data-driven bounds of a scan pair.
pub fn default_partition(scan_s: &Scan, scan_t: &Scan, n: usize) -> Result<InclinationPartition> {
    let (lo, hi) = default_inclination_bounds(scan_s, scan_t)?;
    InclinationPartition::new(n, lo, hi)
}

/// Recompute every point's area from its coordinates and check that `mix`
/// is a valid intertwined mix of the two inputs. Returns one message per
/// violation; empty means valid.
pub fn verify_mix(
    scan_s: &Scan,
    scan_t: &Scan,
    part: &InclinationPartition,
    mix: &MixResult,
) -> Vec<String> {
    let mut problems = Vec::new();
    if mix.mix1.len() + mix.mix2.len() != scan_s.len() + scan_t.len() {
        problems.push(format!(
            "point count {} + {} != {} + {}",
            mix.mix1.len(),
            mix.mix2.len(),
            scan_s.len(),
            scan_t.len()
        ));
    }
    let mut used_s = vec![0u32; scan_s.len()];
    let mut used_t = vec![0u32; scan_t.len()];
    let halves = [
        (
            &mix.mix1,
            &mix.provenance1,
            &mix.origin1,
            Provenance::Source,
            "mix1",
        ),
        (
            &mix.mix2,
            &mix.provenance2,
            &mix.origin2,
            Provenance::Target,
            "mix2",
        ),
    ];
    for (scan, prov, origin, even, name) in halves {
        if prov.len() != scan.len() || origin.len() != scan.len() {
            problems.push(format!("{name}: provenance length mismatch"));
            continue;
        }
        let labels = scan.labels().unwrap_or(&[]);
        for (k, p) in scan.points().iter().enumerate() {
            let area = part.area_index(p);
            let expected = if area.is_multiple_of(2) {
                even
            } else if even == Provenance::Source {
                Provenance::Target
            } else {
                Provenance::Source
            };
            if prov[k] != expected {
                problems.push(format!("{name}[{k}]: area {area} holds {:?}", prov[k]));
            }
            let (src, used) = match prov[k] {
                Provenance::Source => (scan_s, &mut used_s),
                Provenance::Target => (scan_t, &mut used_t),
            };
            let j = origin[k];
            if j >= src.len() {
                problems.push(format!("{name}[{k}]: origin {j} out of range"));
                continue;
            }
            used[j] += 1;
            if !src.points()[j].bit_eq(p) {
                problems.push(format!("{name}[{k}]: point differs from its origin"));
            }
            if src.labels().map(|l| l[j]) != labels.get(k).copied() {
                problems.push(format!("{name}[{k}]: label differs from its origin"));
            }
        }
    }
    for (name, used) in [("source", &used_s), ("target", &used_t)] {
        if let Some(j) = used.iter().position(|&c| c != 1) {
            problems.push(format!("{name} point {j} used {} times", used[j]));
        }
    }
    problems
}

/// Teacher pseudo-labels: the most probable semantic class where its
/// probability strictly exceeds the threshold, `0` otherwise.
#[derive(Debug, Clone, PartialEq)]
pub struct PseudoLabels {
    classes: Vec<u16>,
    confidence: Vec<f64>,
    threshold: f64,
}

impl PseudoLabels {
    /// Wrap already-decided classes; accepted points get confidence `1`, rejected `0`.
    pub fn from_classes(classes: Vec<u16>) -> Self {
        let confidence = classes
            .iter()
            .map(|&k| if k == 0 { 0.0 } else { 1.0 })
            .collect();
        PseudoLabels {
            classes,
            confidence,
            threshold: 0.5,
        }
    }

    pub fn classes(&self) -> &[u16] {
        &self.classes
    }

    pub fn confidence(&self) -> &[f64] {
        &self.confidence
    }

    pub fn threshold(&self) -> f64 {
        self.threshold
    }

    pub fn len(&self) -> usize {
        self.classes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.classes.is_empty()
    }

    pub fn accepted(&self) -> usize {
        self.classes.iter().filter(|&&k| k != 0).count()
    }
}

/// Argmax over the semantic columns (ties go to the lowest class id), accepted
/// only when the maximum is strictly greater than `th_p`.
pub fn generate_pseudo_labels(probs: &ProbabilityField, th_p: f64) -> Result<PseudoLabels> {
    if !(0.0..=1.0).contains(&th_p) {
        return Err(Error::InvalidParameter(format!(
            "threshold {th_p} outside [0, 1]"
        )));
    }
    let cols = probs.semantic_columns();
    let mut classes = Vec::with_capacity(probs.rows());
    let mut confidence = Vec::with_capacity(probs.rows());
    for i in 0..probs.rows() {
        let row = probs.row(i);
        let mut best = cols.start;
        for j in cols.clone() {
            if row[j] > row[best] {
                best = j;
            }
        }
        let conf = row[best];
        classes.push(if conf > th_p {
            probs.class_of_column(best)
        } else {
            0
        });
        confidence.push(conf);
    }
    Ok(PseudoLabels {
        classes,
        confidence,
        threshold: th_p,
    })
}
