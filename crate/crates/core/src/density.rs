//! Dataset density profiles and the density-guided translator.
//!
//! Translation works in three steps. First every point is assigned a radial
//! area. Next the per-area totals of two datasets give clipped ratios `r_i`.
//! Finally `round(a_i · (1 − r_i))` random points are dropped from each area
//! of a scan, and Gaussian jitter is optionally added to the survivors.

use rand::seq::index;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;
use crate::scan::{RadialPartition, Scan};

pub const DEFAULT_NOISE_SIGMA: f64 = 0.01;

/// Per-area point totals of one domain, accumulated scan by scan.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityProfile {
    partition: RadialPartition,
    domain: String,
    totals: Vec<u64>,
    scan_count: u64,
}

impl DensityProfile {
    pub fn new(partition: RadialPartition, domain: impl Into<String>) -> Self {
        DensityProfile {
            partition,
            domain: domain.into(),
            totals: vec![0; partition.m()],
            scan_count: 0,
        }
    }

    pub fn from_totals(
        partition: RadialPartition,
        domain: String,
        totals: Vec<u64>,
        scan_count: u64,
    ) -> Result<Self> {
        if totals.len() != partition.m() {
            return Err(Error::ProfileLengthMismatch {
                m: partition.m(),
                got: totals.len(),
            });
        }
        Ok(DensityProfile {
            partition,
            domain,
            totals,
            scan_count,
        })
    }

    pub fn partition(&self) -> &RadialPartition {
        &self.partition
    }

    pub fn domain(&self) -> &str {
        &self.domain
    }

    pub fn totals(&self) -> &[u64] {
        &self.totals
    }

    pub fn scan_count(&self) -> u64 {
        self.scan_count
    }

    pub fn total_points(&self) -> u64 {
        self.totals.iter().sum()
    }

    /// Mean points per scan in each area; zeros for an empty profile.
    pub fn mean_per_scan(&self) -> Vec<f64> {
        let n = self.scan_count.max(1) as f64;
        self.totals.iter().map(|&c| c as f64 / n).collect()
    }

    /// Add one scan's area histogram.
    pub fn accumulate(&mut self, scan: &Scan) {
        for p in scan.points() {
            self.totals[self.partition.area_index(p)] += 1;
        }
        self.scan_count += 1;
    }
}

pub fn accumulate_profile(mut profile: DensityProfile, scan: &Scan) -> DensityProfile {
    profile.accumulate(scan);
    profile
}

/// Element-wise sum of two profiles of the same partition and domain.
pub fn merge_profiles(a: &DensityProfile, b: &DensityProfile) -> Result<DensityProfile> {
    if a.partition != b.partition {
        return Err(Error::PartitionMismatch(format!(
            "{:?} vs {:?}",
            a.partition, b.partition
        )));
    }
    if a.domain != b.domain {
        return Err(Error::PartitionMismatch(format!(
            "domain {:?} vs {:?}",
            a.domain, b.domain
        )));
    }
    Ok(DensityProfile {
        partition: a.partition,
        domain: a.domain.clone(),
        totals: a.totals.iter().zip(&b.totals).map(|(x, y)| x + y).collect(),
        scan_count: a.scan_count + b.scan_count,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    /// Make source scans look like target scans.
    #[default]
    SourceToTarget,
    /// Make target scans look like source scans.
    TargetToSource,
}

/// How per-area counts are compared between datasets of different sizes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Normalization {
    /// Raw dataset totals.
    Totals,
    /// Totals divided by the number of scans.
    #[default]
    PerScanMean,
}

/// Clipped per-area keep ratios.
#[derive(Debug, Clone, PartialEq)]
pub struct TranslationRatios {
    values: Vec<f64>,
    partition: RadialPartition,
    direction: Direction,
    normalization: Normalization,
}

impl TranslationRatios {
    /// Ratios given directly; each must lie in `[0, 1]`.
    pub fn from_values(
        partition: RadialPartition,
        values: Vec<f64>,
        direction: Direction,
        normalization: Normalization,
    ) -> Result<Self> {
        if values.len() != partition.m() {
            return Err(Error::ProfileLengthMismatch {
                m: partition.m(),
                got: values.len(),
            });
        }
        if let Some(v) = values.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::InvalidParameter(format!("ratio {v} outside [0, 1]")));
        }
        Ok(TranslationRatios {
            values,
            partition,
            direction,
            normalization,
        })
    }

    pub fn identity(partition: RadialPartition) -> Self {
        TranslationRatios {
            values: vec![1.0; partition.m()],
            partition,
            direction: Direction::SourceToTarget,
            normalization: Normalization::PerScanMean,
        }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn partition(&self) -> &RadialPartition {
        &self.partition
    }

    pub fn direction(&self) -> Direction {
        self.direction
    }

    pub fn normalization(&self) -> Normalization {
        self.normalization
    }

    pub fn is_identity(&self) -> bool {
        self.values.iter().all(|&r| r >= 1.0)
    }
}

/// Per-area ratio of the destination density to the density being translated,
/// clipped to `[0, 1]`. An area the translated domain never populates gets 1.
pub fn compute_ratios(
    src: &DensityProfile,
    tgt: &DensityProfile,
    direction: Direction,
    normalization: Normalization,
) -> Result<TranslationRatios> {
    if src.partition != tgt.partition {
        return Err(Error::PartitionMismatch(format!(
            "{:?} vs {:?}",
            src.partition, tgt.partition
        )));
    }
    if src.scan_count == 0 || tgt.scan_count == 0 {
        return Err(Error::Empty("profile"));
    }
    let (from, to) = match direction {
        Direction::SourceToTarget => (src, tgt),
        Direction::TargetToSource => (tgt, src),
    };
    let norm = |p: &DensityProfile, i: usize| match normalization {
        Normalization::Totals => p.totals[i] as f64,
        Normalization::PerScanMean => p.totals[i] as f64 / p.scan_count as f64,
    };
    let values = (0..src.partition.m())
        .map(|i| {
            let den = norm(from, i);
            if den == 0.0 {
                1.0
            } else {
                (norm(to, i) / den).clamp(0.0, 1.0)
            }
        })
        .collect();
    Ok(TranslationRatios {
        values,
        partition: src.partition,
        direction,
        normalization,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum NoiseAxes {
    #[default]
    Xy,
    Xyz,
}

/// Zero-mean Gaussian jitter applied to surviving points.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseConfig {
    pub enabled: bool,
    /// Standard deviation in meters.
    pub sigma: f64,
    pub axes: NoiseAxes,
}

impl NoiseConfig {
    pub fn off() -> Self {
        NoiseConfig {
            enabled: false,
            ..Self::default()
        }
    }

    pub fn xy(sigma: f64) -> Self {
        NoiseConfig {
            enabled: true,
            sigma,
            axes: NoiseAxes::Xy,
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.sigma.is_finite() && self.sigma >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "noise sigma {} must be finite and >= 0",
                self.sigma
            )));
        }
        Ok(())
    }
}

impl Default for NoiseConfig {
    fn default() -> Self {
        NoiseConfig::xy(DEFAULT_NOISE_SIGMA)
    }
}

/// Which points to drop from one scan.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TranslationPlan {
    /// Points of this scan in each area.
    pub area_counts: Vec<u64>,
    /// Points to drop from each area.
    pub discard_counts: Vec<u64>,
    /// Input indices chosen for removal, ascending.
    pub selected: Vec<usize>,
}

impl TranslationPlan {
    pub fn total_discarded(&self) -> u64 {
        self.discard_counts.iter().sum()
    }
}

/// Per-area discard counts `round(a_i · (1 − r_i))` (ties to even), with the
/// points drawn uniformly without replacement inside each area.
pub fn plan_discards(
    scan: &Scan,
    partition: &RadialPartition,
    ratios: &TranslationRatios,
    seed: u64,
) -> Result<TranslationPlan> {
    if ratios.partition != *partition {
        return Err(Error::PartitionMismatch(format!(
            "ratios built for {:?}, scan partitioned by {:?}",
            ratios.partition, partition
        )));
    }
    let m = partition.m();
    let areas: Vec<u32> = scan
        .points()
        .iter()
        .map(|p| partition.area_index(p) as u32)
        .collect();

    // counting sort of point indices by area
    let mut area_counts = vec![0u64; m];
    for &a in &areas {
        area_counts[a as usize] += 1;
    }
    let mut offsets = vec![0usize; m + 1];
    for i in 0..m {
        offsets[i + 1] = offsets[i] + area_counts[i] as usize;
    }
    let mut cursor = offsets.clone();
    let mut by_area = vec![0usize; areas.len()];
    for (i, &a) in areas.iter().enumerate() {
        by_area[cursor[a as usize]] = i;
        cursor[a as usize] += 1;
    }

    let mut rng = rng::stream(seed, rng::purpose::DISCARD);
    let mut discard_counts = vec![0u64; m];
    let mut selected = Vec::new();
    for i in 0..m {
        let r = ratios.values[i];
        let count = area_counts[i];
        if r >= 1.0 || count == 0 {
            continue;
        }
        let del = (count as f64 * (1.0 - r))
            .round_ties_even()
            .clamp(0.0, count as f64) as u64;
        discard_counts[i] = del;
        if del == 0 {
            continue;
        }
        let members = &by_area[offsets[i]..offsets[i + 1]];
        if del == count {
            selected.extend_from_slice(members);
        } else {
            selected.extend(
                index::sample(&mut rng, members.len(), del as usize)
                    .into_iter()
                    .map(|k| members[k]),
            );
        }
    }
    selected.sort_unstable();
    Ok(TranslationPlan {
        area_counts,
        discard_counts,
        selected,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum TranslateMode {
    /// Drop points area by area according to the ratios.
    #[default]
    Density,
    /// Drop the same total number of points uniformly over the whole scan,
    /// ignoring areas. Baseline for ablations.
    RandomGlobal,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TranslationResult {
    pub scan: Scan,
    /// Input index of each output point, strictly increasing.
    pub kept_index_map: Vec<usize>,
    pub plan: TranslationPlan,
}

/// Translate one scan: plan and apply discards, then jitter the survivors.
pub fn translate_scan(
    scan: &Scan,
    partition: &RadialPartition,
    ratios: &TranslationRatios,
    noise: &NoiseConfig,
    mode: TranslateMode,
    seed: u64,
) -> Result<TranslationResult> {
    noise.validate()?;
    let mut plan = plan_discards(scan, partition, ratios, seed)?;
    if mode == TranslateMode::RandomGlobal {
        let total = plan.total_discarded() as usize;
        let mut rng = rng::stream(seed, rng::purpose::DISCARD);
        let mut selected = index::sample(&mut rng, scan.len(), total).into_vec();
        selected.sort_unstable();
        plan.selected = selected;
    }

    let mut drop = vec![false; scan.len()];
    for &i in &plan.selected {
        drop[i] = true;
    }
    let kept_index_map: Vec<usize> = (0..scan.len()).filter(|&i| !drop[i]).collect();
    let mut out = scan.select(&kept_index_map);

    if noise.enabled && noise.sigma > 0.0 {
        let normal = Normal::new(0.0, noise.sigma)
            .map_err(|e| Error::InvalidParameter(format!("noise: {e}")))?;
        let mut rng = rng::stream(seed, rng::purpose::NOISE);
        let with_z = noise.axes == NoiseAxes::Xyz;
        for p in out.points_mut() {
            p.x = (p.x as f64 + normal.sample(&mut rng)) as f32;
            p.y = (p.y as f64 + normal.sample(&mut rng)) as f32;
            if with_z {
                p.z = (p.z as f64 + normal.sample(&mut rng)) as f32;
            }
        }
    }

    Ok(TranslationResult {
        scan: out,
        kept_index_map,
        plan,
    })
}

/// Removed indices that lie in areas the ratios say to leave alone (`r_i = 1`).
/// Always empty for density-mode translations.
pub fn area_locality_violations(
    scan: &Scan,
    partition: &RadialPartition,
    ratios: &TranslationRatios,
    removed: &[usize],
) -> Vec<usize> {
    removed
        .iter()
        .copied()
        .filter(|&i| ratios.values[partition.area_index(&scan.points()[i])] >= 1.0)
        .collect()
}
