//! Closed-form losses and state updates for two-stage self-training.
//!
//! Nothing here runs a network: the segmentor's probabilities and features
//! and the discriminator's outputs are inputs. Natural logarithms throughout;
//! probabilities are floored at [`PROB_FLOOR`] before any logarithm or ratio.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lasermix::PseudoLabels;

pub const PROB_FLOOR: f64 = 1e-12;
/// Allowed deviation of a probability row sum from one.
pub const ROW_SUM_TOLERANCE: f64 = 1e-6;
/// Weight of the reweighted adversarial term in the stage-one objective.
pub const DEFAULT_GAMMA_ADV: f64 = 0.001;
/// Weight of the consistency term in the stage-two objective.
pub const DEFAULT_GAMMA_ST: f64 = 0.001;
pub const DEFAULT_EMA_ALPHA: f64 = 0.99;
pub const DEFAULT_EMA_INTERVAL: u64 = 100;

/// How the columns of a [`ProbabilityField`] map to class ids.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ClassLayout {
    /// Column `j` is class `j`; column 0 is the unlabeled class.
    #[default]
    WithUnlabeled,
    /// Column `j` is class `j + 1`; there is no unlabeled column.
    SemanticOnly,
}

/// `N` rows of per-point class probabilities.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbabilityField {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
    layout: ClassLayout,
}

impl ProbabilityField {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>, layout: ClassLayout) -> Result<Self> {
        if cols == 0 {
            return Err(Error::InvalidParameter(
                "probability field needs >= 1 column".into(),
            ));
        }
        if data.len() != rows * cols {
            return Err(Error::InvalidParameter(format!(
                "{} values do not fill a {rows}x{cols} field",
                data.len()
            )));
        }
        if layout == ClassLayout::WithUnlabeled && cols < 2 {
            return Err(Error::InvalidParameter(
                "a field with an unlabeled column needs >= 2 columns".into(),
            ));
        }
        for (row, r) in data.chunks_exact(cols).enumerate() {
            if let Some(v) = r.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
                return Err(Error::MalformedProbabilities {
                    row,
                    reason: format!("entry {v} is not a finite non-negative number"),
                });
            }
            let sum: f64 = r.iter().sum();
            if (sum - 1.0).abs() > ROW_SUM_TOLERANCE {
                return Err(Error::MalformedProbabilities {
                    row,
                    reason: format!("row sums to {sum}"),
                });
            }
        }
        Ok(ProbabilityField {
            rows,
            cols,
            data,
            layout,
        })
    }

    pub fn from_rows(rows: &[Vec<f64>], layout: ClassLayout) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != cols) {
            return Err(Error::InvalidParameter("ragged probability rows".into()));
        }
        Self::new(rows.len(), cols, rows.concat(), layout)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn layout(&self) -> ClassLayout {
        self.layout
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    /// Number of semantic classes `K`.
    pub fn classes(&self) -> usize {
        match self.layout {
            ClassLayout::WithUnlabeled => self.cols - 1,
            ClassLayout::SemanticOnly => self.cols,
        }
    }

    pub fn class_of_column(&self, j: usize) -> u16 {
        match self.layout {
            ClassLayout::WithUnlabeled => j as u16,
            ClassLayout::SemanticOnly => (j + 1) as u16,
        }
    }

    pub fn column_of_class(&self, k: u16) -> Option<usize> {
        let k = k as usize;
        let j = match self.layout {
            ClassLayout::WithUnlabeled => Some(k),
            ClassLayout::SemanticOnly => k.checked_sub(1),
        }?;
        (j < self.cols).then_some(j)
    }

    /// Column range holding semantic (non-unlabeled) classes.
    pub fn semantic_columns(&self) -> std::ops::Range<usize> {
        match self.layout {
            ClassLayout::WithUnlabeled => 1..self.cols,
            ClassLayout::SemanticOnly => 0..self.cols,
        }
    }
}

/// `N` rows of `d`-dimensional per-point embeddings.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureField {
    rows: usize,
    dim: usize,
    data: Vec<f64>,
}

impl FeatureField {
    pub fn new(rows: usize, dim: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * dim {
            return Err(Error::InvalidParameter(format!(
                "{} values do not fill a {rows}x{dim} feature field",
                data.len()
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter("non-finite feature value".into()));
        }
        Ok(FeatureField { rows, dim, data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let dim = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != dim) {
            return Err(Error::InvalidParameter("ragged feature rows".into()));
        }
        Self::new(rows.len(), dim, rows.concat())
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }
}

/// Per-point discriminator outputs. Squashing (sigmoid or not) is the caller's
/// choice; any finite value is accepted.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscriminatorField(Vec<f64>);

impl DiscriminatorField {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter(
                "non-finite discriminator output".into(),
            ));
        }
        Ok(DiscriminatorField(values))
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Which form of the least-squares adversarial terms to evaluate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AdvForm {
    /// Negated mean of `|D - label|`, the sign and norm as printed in the
    /// original formulation.
    PaperLiteral,
    /// Mean of `(D - label)²`, the conventional least-squares GAN objective.
    Standard,
}

impl AdvForm {
    fn distance(self, d: f64, label: f64) -> f64 {
        match self {
            AdvForm::PaperLiteral => (d - label).abs(),
            AdvForm::Standard => (d - label) * (d - label),
        }
    }

    fn sign(self) -> f64 {
        match self {
            AdvForm::PaperLiteral => -1.0,
            AdvForm::Standard => 1.0,
        }
    }
}

/// Domain label the discriminator should assign to source inputs.
pub const SOURCE_DOMAIN: f64 = 0.0;
/// Domain label the discriminator should assign to target inputs.
pub const TARGET_DOMAIN: f64 = 1.0;

/// Mean cross-entropy over points whose label is not `ignore_class`.
pub fn cross_entropy_loss(
    probs: &ProbabilityField,
    labels: &[u16],
    ignore_class: u16,
) -> Result<f64> {
    if labels.len() != probs.rows() {
        return Err(Error::LengthMismatch {
            what: "labels",
            expected: probs.rows(),
            got: labels.len(),
        });
    }
    let mut sum = 0.0;
    let mut counted = 0usize;
    for (i, &y) in labels.iter().enumerate() {
        if y == ignore_class {
            continue;
        }
        let col = probs.column_of_class(y).ok_or(Error::LabelOutOfRange {
            label: y,
            classes: probs.classes(),
        })?;
        sum += probs.row(i)[col].max(PROB_FLOOR).ln();
        counted += 1;
    }
    if counted == 0 {
        return Err(Error::NoLabeledPoints);
    }
    Ok(-sum / counted as f64)
}

/// Element-wise `-p ln p` with `0 ln 0 = 0`, same shape as `probs`.
pub fn self_information_map(probs: &ProbabilityField) -> Vec<f64> {
    probs
        .as_slice()
        .iter()
        .map(|&p| if p > 0.0 { -p * p.ln() } else { 0.0 })
        .collect()
}

/// Adversarial loss that pushes target outputs toward the source label.
pub fn lsgan_adv_loss(d_target: &DiscriminatorField, form: AdvForm) -> Result<f64> {
    Ok(form.sign() * mean_distance(d_target, SOURCE_DOMAIN, form)?)
}

/// Discriminator loss: source outputs toward 0, target outputs toward 1.
pub fn lsgan_disc_loss(
    d_source: &DiscriminatorField,
    d_target: &DiscriminatorField,
    form: AdvForm,
) -> Result<f64> {
    let s = mean_distance(d_source, SOURCE_DOMAIN, form)?;
    let t = mean_distance(d_target, TARGET_DOMAIN, form)?;
    Ok(form.sign() * s + form.sign() * t)
}

fn mean_distance(d: &DiscriminatorField, label: f64, form: AdvForm) -> Result<f64> {
    if d.is_empty() {
        return Err(Error::Empty("discriminator field"));
    }
    let sum: f64 = d.values().iter().map(|&v| form.distance(v, label)).sum();
    Ok(sum / d.len() as f64)
}

/// Per-class feature centroids built from labelled source points.
///
/// Sums and counts are kept so batches can be folded in incrementally; a class
/// with no points has no prototype.
#[derive(Debug, Clone, PartialEq)]
pub struct Prototypes {
    classes: usize,
    dim: usize,
    sums: Vec<f64>,
    counts: Vec<u64>,
}

impl Prototypes {
    pub fn empty(classes: usize, dim: usize) -> Self {
        Prototypes {
            classes,
            dim,
            sums: vec![0.0; classes * dim],
            counts: vec![0; classes],
        }
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Fold a batch of source features and ground-truth labels in. Label 0 is
    /// skipped.
    pub fn accumulate(&mut self, features: &FeatureField, source_labels: &[u16]) -> Result<()> {
        if source_labels.len() != features.rows() {
            return Err(Error::LengthMismatch {
                what: "labels",
                expected: features.rows(),
                got: source_labels.len(),
            });
        }
        if features.rows() > 0 && features.dim() != self.dim {
            return Err(Error::InvalidParameter(format!(
                "feature dim {} != prototype dim {}",
                features.dim(),
                self.dim
            )));
        }
        if let Some(&bad) = source_labels.iter().find(|&&k| k as usize > self.classes) {
            return Err(Error::LabelOutOfRange {
                label: bad,
                classes: self.classes,
            });
        }
        for (i, &k) in source_labels.iter().enumerate() {
            if k == 0 {
                continue;
            }
            let slot = k as usize - 1;
            self.counts[slot] += 1;
            let acc = &mut self.sums[slot * self.dim..(slot + 1) * self.dim];
            for (a, f) in acc.iter_mut().zip(features.row(i)) {
                *a += f;
            }
        }
        Ok(())
    }

    pub fn count(&self, class: u16) -> u64 {
        match class as usize {
            0 => 0,
            k if k <= self.classes => self.counts[k - 1],
            _ => 0,
        }
    }

    pub fn is_valid(&self, class: u16) -> bool {
        self.count(class) > 0
    }

    /// Mean feature of `class`, or `None` if the class has no points.
    pub fn prototype(&self, class: u16) -> Option<Vec<f64>> {
        let n = self.count(class);
        if n == 0 {
            return None;
        }
        let slot = class as usize - 1;
        Some(
            self.sums[slot * self.dim..(slot + 1) * self.dim]
                .iter()
                .map(|s| s / n as f64)
                .collect(),
        )
    }
}

/// One-shot prototypes of `classes` semantic classes from a single batch.
pub fn compute_prototypes(
    features: &FeatureField,
    source_labels: &[u16],
    classes: usize,
) -> Result<Prototypes> {
    let mut p = Prototypes::empty(classes, features.dim());
    p.accumulate(features, source_labels)?;
    Ok(p)
}

/// Per-point reweighting factors: `1 - cos(feature, prototype)` for accepted
/// pseudo-labels, `1` for everything else.
#[derive(Debug, Clone, PartialEq)]
pub struct AlignmentWeights(Vec<f64>);

impl AlignmentWeights {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::InvalidParameter(
                "alignment weights must be finite and >= 0".into(),
            ));
        }
        Ok(AlignmentWeights(values))
    }

    pub fn ones(n: usize) -> Self {
        AlignmentWeights(vec![1.0; n])
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

pub fn alignment_weights(
    features: &FeatureField,
    pseudo: &PseudoLabels,
    prototypes: &Prototypes,
) -> Result<AlignmentWeights> {
    if pseudo.len() != features.rows() {
        return Err(Error::LengthMismatch {
            what: "pseudo-labels",
            expected: features.rows(),
            got: pseudo.len(),
        });
    }
    let mut invalid: Vec<u16> = pseudo
        .classes()
        .iter()
        .copied()
        .filter(|&k| k != 0 && !prototypes.is_valid(k))
        .collect();
    if !invalid.is_empty() {
        invalid.sort_unstable();
        invalid.dedup();
        return Err(Error::InvalidPrototype(invalid));
    }
    if features.rows() > 0 && features.dim() != prototypes.dim() {
        return Err(Error::InvalidParameter(format!(
            "feature dim {} != prototype dim {}",
            features.dim(),
            prototypes.dim()
        )));
    }

    let centroids: BTreeMap<u16, (Vec<f64>, f64)> = pseudo
        .classes()
        .iter()
        .filter(|&&k| k != 0)
        .map(|&k| {
            let c = prototypes.prototype(k).expect("validated above");
            let norm = dot(&c, &c).sqrt();
            (k, (c, norm))
        })
        .collect();

    let weights = pseudo
        .classes()
        .iter()
        .enumerate()
        .map(|(i, &k)| {
            if k == 0 {
                return 1.0;
            }
            let (c, c_norm) = &centroids[&k];
            let f = features.row(i);
            let f_norm = dot(f, f).sqrt();
            if f_norm == 0.0 || *c_norm == 0.0 {
                return 1.0;
            }
            let cos = (dot(f, c) / (f_norm * c_norm)).clamp(-1.0, 1.0);
            1.0 - cos
        })
        .collect();
    Ok(AlignmentWeights(weights))
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Class-aggregated adversarial loss on target outputs, each point weighted by
/// its alignment weight. Rejected points (class 0) form their own class.
pub fn reweighted_adv_loss(
    d_target: &DiscriminatorField,
    weights: &AlignmentWeights,
    pseudo: &PseudoLabels,
    form: AdvForm,
) -> Result<f64> {
    if d_target.is_empty() {
        return Err(Error::Empty("discriminator field"));
    }
    for (what, got) in [
        ("alignment weights", weights.len()),
        ("pseudo-labels", pseudo.len()),
    ] {
        if got != d_target.len() {
            return Err(Error::LengthMismatch {
                what,
                expected: d_target.len(),
                got,
            });
        }
    }
    let mut per_class: BTreeMap<u16, (f64, usize)> = BTreeMap::new();
    for ((&d, &m), &k) in d_target
        .values()
        .iter()
        .zip(weights.values())
        .zip(pseudo.classes())
    {
        let e = per_class.entry(k).or_insert((0.0, 0));
        e.0 += m * form.distance(d, SOURCE_DOMAIN);
        e.1 += 1;
    }
    let total: f64 = per_class.values().map(|&(s, n)| s / n as f64).sum();
    Ok(form.sign() * total)
}

/// Exponential-moving-average teacher parameters, refreshed every `interval`
/// iterations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmaState {
    teacher: Vec<f64>,
    alpha: f64,
    interval: u64,
    last_update_iter: u64,
}

impl EmaState {
    pub fn new(teacher: Vec<f64>, alpha: f64, interval: u64) -> Result<Self> {
        if !(0.0..=1.0).contains(&alpha) {
            return Err(Error::InvalidParameter(format!(
                "alpha {alpha} outside [0, 1]"
            )));
        }
        if interval == 0 {
            return Err(Error::InvalidParameter("EMA interval must be >= 1".into()));
        }
        Ok(EmaState {
            teacher,
            alpha,
            interval,
            last_update_iter: 0,
        })
    }

    pub fn with_defaults(teacher: Vec<f64>) -> Self {
        EmaState {
            teacher,
            alpha: DEFAULT_EMA_ALPHA,
            interval: DEFAULT_EMA_INTERVAL,
            last_update_iter: 0,
        }
    }

    pub fn teacher(&self) -> &[f64] {
        &self.teacher
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn interval(&self) -> u64 {
        self.interval
    }

    pub fn last_update_iter(&self) -> u64 {
        self.last_update_iter
    }
}

/// Blend the student into the teacher when at least `interval` iterations have
/// passed since the last blend; otherwise return the state unchanged.
pub fn ema_update(mut state: EmaState, student: &[f64], iter: u64) -> Result<EmaState> {
    if student.len() != state.teacher.len() {
        return Err(Error::LengthMismatch {
            what: "student parameters",
            expected: state.teacher.len(),
            got: student.len(),
        });
    }
    if iter.saturating_sub(state.last_update_iter) < state.interval {
        return Ok(state);
    }
    let a = state.alpha;
    for (t, s) in state.teacher.iter_mut().zip(student) {
        *t = a * *t + (1.0 - a) * s;
    }
    state.last_update_iter = iter;
    Ok(state)
}

fn check_alignment(
    translated: &ProbabilityField,
    teacher: &ProbabilityField,
    kept_index_map: &[usize],
) -> Result<()> {
    if kept_index_map.len() != translated.rows() {
        return Err(Error::LengthMismatch {
            what: "kept-index map",
            expected: translated.rows(),
            got: kept_index_map.len(),
        });
    }
    if translated.cols() != teacher.cols() {
        return Err(Error::InvalidParameter(format!(
            "column count {} != {}",
            translated.cols(),
            teacher.cols()
        )));
    }
    if let Some(&index) = kept_index_map.iter().find(|&&j| j >= teacher.rows()) {
        return Err(Error::IndexOutOfRange {
            index,
            len: teacher.rows(),
        });
    }
    if kept_index_map.is_empty() {
        return Err(Error::Empty("kept-index map"));
    }
    Ok(())
}

/// Mean KL divergence `KL(P_translated ‖ P_teacher)` over aligned points.
///
/// `kept_index_map[i]` names the teacher row that row `i` of `p_translated` was
/// derived from. Per-row values are clamped at zero, which only removes
/// round-off introduced by flooring.
pub fn sac_consistency_loss(
    p_translated: &ProbabilityField,
    p_teacher_raw: &ProbabilityField,
    kept_index_map: &[usize],
) -> Result<f64> {
    check_alignment(p_translated, p_teacher_raw, kept_index_map)?;
    let total: f64 = kept_index_map
        .iter()
        .enumerate()
        .map(|(i, &j)| {
            p_translated
                .row(i)
                .iter()
                .zip(p_teacher_raw.row(j))
                .map(|(&p, &q)| {
                    let (p, q) = (p.max(PROB_FLOOR), q.max(PROB_FLOOR));
                    p * (p / q).ln()
                })
                .sum::<f64>()
                .max(0.0)
        })
        .sum();
    Ok(total / kept_index_map.len() as f64)
}

/// The consistency expression exactly as printed, without the logarithm:
/// `-(1/N) Σ_i Σ_k P_k · P_k / P_k^tea`. Kept for auditing only.
pub fn sac_paper_literal(
    p_translated: &ProbabilityField,
    p_teacher_raw: &ProbabilityField,
    kept_index_map: &[usize],
) -> Result<f64> {
    check_alignment(p_translated, p_teacher_raw, kept_index_map)?;
    let total: f64 = kept_index_map
        .iter()
        .enumerate()
        .map(|(i, &j)| {
            p_translated
                .row(i)
                .iter()
                .zip(p_teacher_raw.row(j))
                .map(|(&p, &q)| {
                    let (p, q) = (p.max(PROB_FLOOR), q.max(PROB_FLOOR));
                    p * (p / q)
                })
                .sum::<f64>()
        })
        .sum();
    Ok(-total / kept_index_map.len() as f64)
}

/// Stage-one objective: source cross-entropy plus weighted adversarial term.
pub fn total_adv_loss(ce_source: f64, adv_reweighted: f64, gamma_adv: f64) -> f64 {
    ce_source + gamma_adv * adv_reweighted
}

/// Stage-two objective: translated-source CE, mixed-scan CE and weighted
/// consistency term.
pub fn total_st_loss(ce_source_translated: f64, ce_mixed: f64, sac: f64, gamma_st: f64) -> f64 {
    ce_source_translated + ce_mixed + gamma_st * sac
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lasermix::generate_pseudo_labels;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use std::f64::consts::LN_2;

    fn field(rows: &[Vec<f64>]) -> ProbabilityField {
        ProbabilityField::from_rows(rows, ClassLayout::WithUnlabeled).unwrap()
    }

    fn pseudo(classes: Vec<u16>) -> PseudoLabels {
        PseudoLabels::from_classes(classes)
    }

    #[test]
    fn field_validation() {
        assert!(
            ProbabilityField::from_rows(&[vec![0.5, 0.6]], ClassLayout::WithUnlabeled).is_err()
        );
        assert!(
            ProbabilityField::from_rows(&[vec![-0.1, 1.1]], ClassLayout::WithUnlabeled).is_err()
        );
        assert!(ProbabilityField::from_rows(&[vec![1.0]], ClassLayout::WithUnlabeled).is_err());
        assert!(ProbabilityField::from_rows(&[vec![1.0]], ClassLayout::SemanticOnly).is_ok());
        let f = field(&[vec![0.2, 0.8]]);
        assert_eq!(f.column_of_class(1), Some(1));
        assert_eq!(f.column_of_class(2), None);
    }

    #[test]
    fn cross_entropy_examples() {
        assert_eq!(
            cross_entropy_loss(&field(&[vec![0.0, 1.0]]), &[1], 0).unwrap(),
            0.0
        );
        assert_relative_eq!(
            cross_entropy_loss(&field(&[vec![0.5, 0.5]]), &[1], 0).unwrap(),
            LN_2,
            epsilon = 1e-15
        );
        let f = field(&[vec![0.5, 0.5], vec![0.0, 1.0]]);
        assert_eq!(cross_entropy_loss(&f, &[0, 1], 0).unwrap(), 0.0);
        assert!(matches!(
            cross_entropy_loss(&f, &[0, 0], 0),
            Err(Error::NoLabeledPoints)
        ));
        assert!(matches!(
            cross_entropy_loss(&f, &[0, 7], 0),
            Err(Error::LabelOutOfRange { label: 7, .. })
        ));
        // floored probability keeps the loss finite
        let f = field(&[vec![1.0, 0.0]]);
        assert_relative_eq!(
            cross_entropy_loss(&f, &[1], 0).unwrap(),
            -PROB_FLOOR.ln(),
            epsilon = 1e-12
        );
    }

    #[test]
    fn self_information_examples() {
        let s = self_information_map(&field(&[vec![1.0, 0.0], vec![0.5, 0.5]]));
        assert_eq!(s[0], 0.0);
        assert_eq!(s[1], 0.0);
        assert_relative_eq!(s[2], 0.5 * LN_2, epsilon = 1e-15);
        assert_relative_eq!(s[2], 0.3466, epsilon = 1e-4);
    }

    #[test]
    fn lsgan_examples() {
        let zeros = DiscriminatorField::new(vec![0.0; 4]).unwrap();
        assert_eq!(lsgan_adv_loss(&zeros, AdvForm::PaperLiteral).unwrap(), 0.0);
        let one = DiscriminatorField::new(vec![1.0]).unwrap();
        assert_eq!(
            lsgan_adv_loss(&one, AdvForm::PaperLiteral).unwrap().abs(),
            1.0
        );
        let half = DiscriminatorField::new(vec![0.5; 3]).unwrap();
        assert_eq!(
            mean_distance(&half, SOURCE_DOMAIN, AdvForm::Standard).unwrap(),
            0.25
        );
        assert_eq!(
            mean_distance(&half, TARGET_DOMAIN, AdvForm::Standard).unwrap(),
            0.25
        );
        assert_eq!(
            lsgan_disc_loss(&half, &half, AdvForm::Standard).unwrap(),
            0.5
        );
        assert_eq!(
            lsgan_disc_loss(&half, &half, AdvForm::PaperLiteral).unwrap(),
            -1.0
        );
        let empty = DiscriminatorField::new(vec![]).unwrap();
        assert!(lsgan_adv_loss(&empty, AdvForm::Standard).is_err());
    }

    #[test]
    fn prototype_examples() {
        let f = FeatureField::from_rows(&[vec![1.0, 0.0], vec![0.0, 1.0], vec![9.0, 9.0]]).unwrap();
        let p = compute_prototypes(&f, &[2, 2, 0], 3).unwrap();
        assert_eq!(p.prototype(2), Some(vec![0.5, 0.5]));
        assert_eq!(p.prototype(1), None);
        assert_eq!(p.prototype(0), None);
        let single = FeatureField::from_rows(&[vec![3.0, -1.0]]).unwrap();
        assert_eq!(
            compute_prototypes(&single, &[1], 1).unwrap().prototype(1),
            Some(vec![3.0, -1.0])
        );
        assert!(compute_prototypes(&single, &[4], 3).is_err());
    }

    #[test]
    fn alignment_weight_examples() {
        let protos = compute_prototypes(
            &FeatureField::from_rows(&[vec![1.0, 1.0]]).unwrap(),
            &[1],
            2,
        )
        .unwrap();
        let f = FeatureField::from_rows(&[
            vec![1.0, 1.0],
            vec![1.0, -1.0],
            vec![5.0, 2.0],
            vec![0.0, 0.0],
        ])
        .unwrap();
        let m = alignment_weights(&f, &pseudo(vec![1, 1, 0, 1]), &protos).unwrap();
        assert_relative_eq!(m.values()[0], 0.0, epsilon = 1e-15);
        assert_relative_eq!(m.values()[1], 1.0, epsilon = 1e-15);
        assert_eq!(m.values()[2], 1.0);
        assert_eq!(m.values()[3], 1.0);
        assert!(matches!(
            alignment_weights(&f, &pseudo(vec![2, 1, 0, 2]), &protos),
            Err(Error::InvalidPrototype(v)) if v == vec![2]
        ));
    }

    #[test]
    fn reweighted_examples() {
        let d = DiscriminatorField::new(vec![0.2, 0.4, 0.6]).unwrap();
        let m = AlignmentWeights::new(vec![0.5, 0.0, 1.0]).unwrap();
        let loss =
            reweighted_adv_loss(&d, &m, &pseudo(vec![1, 1, 0]), AdvForm::PaperLiteral).unwrap();
        assert_relative_eq!(loss, -0.65, epsilon = 1e-15);

        let ones = AlignmentWeights::ones(3);
        for form in [AdvForm::PaperLiteral, AdvForm::Standard] {
            assert_eq!(
                reweighted_adv_loss(&d, &ones, &pseudo(vec![4, 4, 4]), form).unwrap(),
                lsgan_adv_loss(&d, form).unwrap()
            );
        }
        let zeros = AlignmentWeights::new(vec![0.0; 3]).unwrap();
        assert_eq!(
            reweighted_adv_loss(&d, &zeros, &pseudo(vec![1, 2, 2]), AdvForm::PaperLiteral)
                .unwrap()
                .abs(),
            0.0
        );
    }

    #[test]
    fn ema_examples() {
        let s = EmaState::new(vec![1.0, 2.0], 1.0, 1).unwrap();
        assert_eq!(
            ema_update(s, &[5.0, 5.0], 1).unwrap().teacher(),
            &[1.0, 2.0]
        );
        let s = EmaState::new(vec![1.0, 2.0], 0.0, 1).unwrap();
        assert_eq!(
            ema_update(s, &[5.0, 6.0], 1).unwrap().teacher(),
            &[5.0, 6.0]
        );
        let s = EmaState::with_defaults(vec![1.0]);
        let s = ema_update(s, &[0.0], 100).unwrap();
        assert_relative_eq!(s.teacher()[0], 0.99, epsilon = 1e-15);
        assert!(ema_update(s, &[0.0, 1.0], 200).is_err());
        assert!(EmaState::new(vec![], 1.5, 1).is_err());
        assert!(EmaState::new(vec![], 0.5, 0).is_err());
    }

    #[test]
    fn ema_skips_between_scheduled_iterations() {
        let s = EmaState::with_defaults(vec![0.25, -3.0]);
        let s = ema_update(s, &[1.0, 1.0], 100).unwrap();
        let before = s.clone();
        for iter in 101..200 {
            let next = ema_update(s.clone(), &[7.0, 7.0], iter).unwrap();
            assert_eq!(next, before);
        }
        let after = ema_update(s, &[7.0, 7.0], 200).unwrap();
        assert_ne!(after, before);
        assert_eq!(after.last_update_iter(), 200);
    }

    #[test]
    fn sac_examples() {
        let p = field(&[vec![0.3, 0.7]]);
        assert_eq!(sac_consistency_loss(&p, &p, &[0]).unwrap(), 0.0);
        let p = field(&[vec![1.0, 0.0]]);
        let q = field(&[vec![0.5, 0.5]]);
        assert_relative_eq!(
            sac_consistency_loss(&p, &q, &[0]).unwrap(),
            LN_2,
            epsilon = 1e-10
        );
        assert!(matches!(
            sac_consistency_loss(&p, &q, &[3]),
            Err(Error::IndexOutOfRange { index: 3, len: 1 })
        ));
        assert_relative_eq!(
            sac_paper_literal(&p, &q, &[0]).unwrap(),
            -2.0,
            epsilon = 1e-9
        );
    }

    #[test]
    fn totals() {
        assert_eq!(total_adv_loss(1.0, 2.0, 0.0), 1.0);
        assert_relative_eq!(
            total_adv_loss(1.0, 2.0, DEFAULT_GAMMA_ADV),
            1.002,
            epsilon = 1e-15
        );
        assert_relative_eq!(
            total_st_loss(1.0, 1.0, 3.0, DEFAULT_GAMMA_ST),
            2.003,
            epsilon = 1e-15
        );
    }

    fn prob_row(raw: &[f64]) -> Vec<f64> {
        let s: f64 = raw.iter().sum();
        raw.iter().map(|v| v / s).collect()
    }

    proptest! {
        #[test]
        fn cross_entropy_decreases_with_label_probability(
            p in 0.01f64..0.98, dp in 0.001f64..0.01, rest in prop::collection::vec(0.1f64..1.0, 2..5)
        ) {
            let build = |py: f64| {
                let s: f64 = rest.iter().sum();
                let mut row = vec![py];
                row.extend(rest.iter().map(|r| r / s * (1.0 - py)));
                ProbabilityField::from_rows(&[row], ClassLayout::SemanticOnly).unwrap()
            };
            let lo = cross_entropy_loss(&build(p), &[1], 0).unwrap();
            let hi = cross_entropy_loss(&build(p + dp), &[1], 0).unwrap();
            prop_assert!(hi < lo);
        }

        #[test]
        fn weights_in_range_and_scale_invariant(
            rows in prop::collection::vec(prop::collection::vec(-5f64..5.0, 3), 1..20),
            scale in 0.01f64..100.0,
            labels_seed in prop::collection::vec(0u16..3, 20),
        ) {
            let f = FeatureField::from_rows(&rows).unwrap();
            let labels: Vec<u16> = labels_seed[..rows.len()].to_vec();
            let protos = compute_prototypes(
                &FeatureField::from_rows(&[vec![1.0, 2.0, 3.0], vec![-1.0, 0.5, 0.0]]).unwrap(),
                &[1, 2], 2).unwrap();
            let pl = pseudo(labels.clone());
            let m = alignment_weights(&f, &pl, &protos).unwrap();
            let scaled: Vec<Vec<f64>> = rows.iter().map(|r| r.iter().map(|v| v * scale).collect()).collect();
            let m2 = alignment_weights(&FeatureField::from_rows(&scaled).unwrap(), &pl, &protos).unwrap();
            for (i, (&a, &b)) in m.values().iter().zip(m2.values()).enumerate() {
                prop_assert!((0.0..=2.0).contains(&a));
                if labels[i] == 0 { prop_assert_eq!(a, 1.0); }
                prop_assert!((a - b).abs() < 1e-9);
            }
        }

        #[test]
        fn prototypes_are_permutation_invariant(
            rows in prop::collection::vec((prop::collection::vec(-5f64..5.0, 2), 0u16..4), 1..30),
            rot in 0usize..30,
        ) {
            let feats: Vec<Vec<f64>> = rows.iter().map(|r| r.0.clone()).collect();
            let labels: Vec<u16> = rows.iter().map(|r| r.1).collect();
            let k = rot % rows.len();
            let mut f2 = feats.clone(); f2.rotate_left(k);
            let mut l2 = labels.clone(); l2.rotate_left(k);
            let a = compute_prototypes(&FeatureField::from_rows(&feats).unwrap(), &labels, 3).unwrap();
            let b = compute_prototypes(&FeatureField::from_rows(&f2).unwrap(), &l2, 3).unwrap();
            for c in 1..=3u16 {
                match (a.prototype(c), b.prototype(c)) {
                    (Some(x), Some(y)) => for (u, v) in x.iter().zip(&y) { prop_assert!((u - v).abs() < 1e-12) },
                    (None, None) => {}
                    _ => prop_assert!(false),
                }
            }
        }

        #[test]
        fn sac_is_non_negative_and_zero_on_identity(
            raw in prop::collection::vec(prop::collection::vec(0f64..1.0, 4), 1..10),
            raw2 in prop::collection::vec(prop::collection::vec(0.001f64..1.0, 4), 10),
        ) {
            let p: Vec<Vec<f64>> = raw.iter().map(|r| { let mut r = r.clone(); r[0] += 0.01; prob_row(&r) }).collect();
            let q: Vec<Vec<f64>> = raw2[..p.len()].iter().map(|r| prob_row(r)).collect();
            let pf = field(&p);
            let qf = field(&q);
            let map: Vec<usize> = (0..p.len()).collect();
            prop_assert!(sac_consistency_loss(&pf, &qf, &map).unwrap() >= 0.0);
            prop_assert!(sac_consistency_loss(&pf, &pf, &map).unwrap().abs() < 1e-12);
        }

        #[test]
        fn pseudo_labels_feed_weights(rows in prop::collection::vec(prop::collection::vec(0.01f64..1.0, 3), 1..10)) {
            let probs: Vec<Vec<f64>> = rows.iter().map(|r| prob_row(r)).collect();
            let pf = ProbabilityField::from_rows(&probs, ClassLayout::SemanticOnly).unwrap();
            let pl = generate_pseudo_labels(&pf, 0.5).unwrap();
            let feats = FeatureField::from_rows(&probs).unwrap();
            let protos = compute_prototypes(
                &FeatureField::from_rows(&[vec![1.0, 0.0, 0.0], vec![0.0, 1.0, 0.0], vec![0.0, 0.0, 1.0]]).unwrap(),
                &[1, 2, 3], 3).unwrap();
            let m = alignment_weights(&feats, &pl, &protos).unwrap();
            prop_assert_eq!(m.len(), probs.len());
        }
    }
}
