//! Fact-prediction evaluation.
//!
//! A labeled test set mixes true facts (label 1) with corrupted ones
//! (label 0) at a 60/40 ratio, stratified per relation. Test positives are
//! masked out of the training graph; negatives corrupt the object of a
//! positive and are rejected if they collide with any known fact. Scores are
//! thresholded with a single global threshold tuned on a validation sample,
//! never on the test set, and reported as AUC, micro/macro F1, and
//! per-relation precision/recall/F1.

use std::collections::HashSet;
use std::fmt::Write as _;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::graph::{build_tensor, subsample_subjects, KnowledgeGraph};
use crate::models::{FactorSet, Hyperparams, ModelKind};
use crate::seed::derive_seed;
use crate::similarity::{compute_similarity, Encoding};
use crate::solver::{fit, FitConfig};

/// Where a labeled test set came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Provenance {
    StratifiedUniform,
    StratifiedWeighted,
    ExternalFile,
}

/// Labeled (s, r, o, label) items plus any sampling warnings.
#[derive(Debug, Clone)]
pub struct LabeledTriples {
    pub items: Vec<(u32, u32, u32, bool)>,
    pub provenance: Provenance,
    pub warnings: Vec<String>,
}

impl LabeledTriples {
    pub fn positives(&self) -> impl Iterator<Item = (u32, u32, u32)> + '_ {
        self.items
            .iter()
            .filter(|it| it.3)
            .map(|&(s, r, o, _)| (s, r, o))
    }

    pub fn labels(&self) -> Vec<bool> {
        self.items.iter().map(|it| it.3).collect()
    }

    /// TSV rows subject⟨TAB⟩relation⟨TAB⟩object⟨TAB⟩label.
    pub fn write_tsv(&self, path: &Path, kg: &KnowledgeGraph) -> Result<()> {
        let mut text = String::new();
        for &(s, r, o, label) in &self.items {
            let _ = writeln!(
                text,
                "{}\t{}\t{}\t{}",
                kg.entities.label(s),
                kg.relations.label(r),
                kg.entities.label(o),
                u8::from(label)
            );
        }
        std::fs::write(path, text).map_err(|e| Error::Io {
            path: path.to_owned(),
            source: e,
        })
    }
}

/// Read a labeled TSV against an existing graph's dictionaries.
pub fn read_labeled_tsv(path: &Path, kg: &KnowledgeGraph) -> Result<LabeledTriples> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Io {
        path: path.to_owned(),
        source: e,
    })?;
    let mut items = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 4 {
            return Err(Error::MalformedLine {
                path: path.to_owned(),
                line: lineno + 1,
                expected: 4,
                found: fields.len(),
            });
        }
        let lookup = |what: &str, label: &str, id: Option<u32>| {
            id.ok_or_else(|| {
                Error::InvalidArgument(format!(
                    "{}:{}: unknown {what} {label:?}",
                    path.display(),
                    lineno + 1
                ))
            })
        };
        let s = lookup("entity", fields[0], kg.entities.get(fields[0]))?;
        let r = lookup("relation", fields[1], kg.relations.get(fields[1]))?;
        let o = lookup("entity", fields[2], kg.entities.get(fields[2]))?;
        let label = match fields[3] {
            "0" => false,
            "1" => true,
            other => {
                return Err(Error::InvalidArgument(format!(
                    "{}:{}: label must be 0 or 1, got {other:?}",
                    path.display(),
                    lineno + 1
                )))
            }
        };
        items.push((s, r, o, label));
    }
    if items.is_empty() {
        return Err(Error::EmptyInput(path.to_owned()));
    }
    Ok(LabeledTriples {
        items,
        provenance: Provenance::ExternalFile,
        warnings: Vec::new(),
    })
}

const MAX_CORRUPTION_DRAWS: usize = 1000;

fn corrupt_with_rng(
    reject_kg: &KnowledgeGraph,
    positives: &[(u32, u32, u32)],
    count: usize,
    rng: &mut ChaCha8Rng,
    taken: &mut HashSet<(u32, u32, u32)>,
    warnings: &mut Vec<String>,
) -> Vec<(u32, u32, u32)> {
    let n_entities = reject_kg.n_entities() as u32;
    let positive_set: HashSet<(u32, u32, u32)> = positives.iter().copied().collect();
    let mut out = Vec::with_capacity(count);
    for idx in 0..count {
        let (s, r, _) = positives[idx % positives.len()];
        let mut found = None;
        for _ in 0..MAX_CORRUPTION_DRAWS {
            let o = rng.random_range(0..n_entities);
            let cand = (s, r, o);
            if reject_kg.contains(s, r, o) || positive_set.contains(&cand) || taken.contains(&cand)
            {
                continue;
            }
            found = Some(cand);
            break;
        }
        match found {
            Some(cand) => {
                taken.insert(cand);
                out.push(cand);
            }
            None => warnings.push(format!(
                "no valid corruption for ({}, {}) after {MAX_CORRUPTION_DRAWS} draws, skipped",
                reject_kg.entities.label(s),
                reject_kg.relations.label(r)
            )),
        }
    }
    out
}

/// Negative sampling: each negative keeps the (s, r) of a positive and
/// redraws the object uniformly from the entity pool, rejecting anything
/// present in the graph or among the positives. Items that exhaust the draw
/// budget are skipped with a warning.
pub fn corrupt_objects(
    kg: &KnowledgeGraph,
    positives: &[(u32, u32, u32)],
    count: usize,
    seed: u64,
) -> Result<(Vec<(u32, u32, u32)>, Vec<String>)> {
    if count < 1 {
        return Err(Error::InvalidArgument("count must be at least 1".into()));
    }
    if positives.is_empty() {
        return Err(Error::InvalidArgument(
            "cannot corrupt an empty positive list".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut taken = HashSet::new();
    let mut warnings = Vec::new();
    let negs = corrupt_with_rng(kg, positives, count, &mut rng, &mut taken, &mut warnings);
    Ok((negs, warnings))
}

fn positive_count_for(per_slice: usize) -> usize {
    (0.6 * per_slice as f64).round() as usize
}

/// Stratified 60/40 sample: per relation, positives drawn from `source`'s
/// triples and negatives corrupted against `reject` (normally the full
/// graph). Does not mask anything.
pub fn sample_stratified(
    source: &KnowledgeGraph,
    reject: &KnowledgeGraph,
    per_slice: usize,
    seed: u64,
) -> Result<LabeledTriples> {
    if per_slice < 1 {
        return Err(Error::InvalidArgument(
            "per_slice must be at least 1".into(),
        ));
    }
    let n_r = source.n_relations();
    let mut by_relation: Vec<Vec<(u32, u32, u32)>> = vec![Vec::new(); n_r];
    for &(s, r, o) in source.triples() {
        by_relation[r as usize].push((s, r, o));
    }
    let empty: Vec<String> = by_relation
        .iter()
        .enumerate()
        .filter(|(_, v)| v.is_empty())
        .map(|(k, _)| source.relations.label(k as u32).to_owned())
        .collect();
    if !empty.is_empty() {
        return Err(Error::InvalidArgument(format!(
            "relations without positive candidates: {}",
            empty.join(", ")
        )));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut items = Vec::new();
    let mut warnings = Vec::new();
    let mut taken = HashSet::new();
    let n_pos_target = positive_count_for(per_slice);
    for k in 0..n_r {
        let pool = &by_relation[k];
        let n_pos = n_pos_target.min(pool.len());
        if n_pos < n_pos_target {
            warnings.push(format!(
                "relation {} capped at {n_pos} positives (wanted {n_pos_target})",
                source.relations.label(k as u32)
            ));
        }
        let n_neg = if n_pos == n_pos_target {
            per_slice - n_pos_target
        } else {
            ((n_pos as f64) * 2.0 / 3.0).round() as usize
        };
        let picked = rand::seq::index::sample(&mut rng, pool.len(), n_pos);
        let positives: Vec<(u32, u32, u32)> = picked.iter().map(|i| pool[i]).collect();
        for &(s, r, o) in &positives {
            items.push((s, r, o, true));
        }
        if n_neg > 0 {
            let negs = corrupt_with_rng(
                reject,
                &positives,
                n_neg,
                &mut rng,
                &mut taken,
                &mut warnings,
            );
            for (s, r, o) in negs {
                items.push((s, r, o, false));
            }
        }
    }
    Ok(LabeledTriples {
        items,
        provenance: Provenance::StratifiedUniform,
        warnings,
    })
}

/// Stratified-uniform test set plus the training graph with the test
/// positives masked out.
pub fn make_test_set(
    kg: &KnowledgeGraph,
    per_slice: usize,
    seed: u64,
) -> Result<(LabeledTriples, KnowledgeGraph)> {
    let test = sample_stratified(kg, kg, per_slice, seed)?;
    let masked = mask_positives(kg, &test);
    Ok((test, masked))
}

fn mask_positives(kg: &KnowledgeGraph, test: &LabeledTriples) -> KnowledgeGraph {
    let held: HashSet<(u32, u32, u32)> = test.positives().collect();
    let remaining = kg
        .triples()
        .iter()
        .copied()
        .filter(|t| !held.contains(t))
        .collect();
    kg.with_triples(remaining)
}

/// How the weighted mode reaches its 60/40 ratio from a provided positive
/// test file.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum WeightedPolicy {
    /// Keep every provided positive and add negatives until positives are
    /// 60% of the set.
    #[default]
    KeepAllPositives,
    /// Keep a random 60% of the provided positives and corrupt the remaining
    /// 40% into negatives.
    SubsamplePositives,
}

impl std::str::FromStr for WeightedPolicy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "keep_all" => Ok(WeightedPolicy::KeepAllPositives),
            "subsample" => Ok(WeightedPolicy::SubsamplePositives),
            other => Err(Error::InvalidArgument(format!(
                "unknown weighted policy {other:?} (expected keep_all or subsample)"
            ))),
        }
    }
}

/// Stratified-weighted test set from an externally provided positive list,
/// plus the masked training graph.
pub fn make_weighted_test_set(
    kg: &KnowledgeGraph,
    provided: &[(u32, u32, u32)],
    policy: WeightedPolicy,
    seed: u64,
) -> Result<(LabeledTriples, KnowledgeGraph)> {
    if provided.is_empty() {
        return Err(Error::InvalidArgument("empty positive test list".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut warnings = Vec::new();
    let mut taken = HashSet::new();
    let mut items = Vec::new();
    match policy {
        WeightedPolicy::KeepAllPositives => {
            for &(s, r, o) in provided {
                items.push((s, r, o, true));
            }
            let n_neg = ((provided.len() as f64) * 2.0 / 3.0).round() as usize;
            let negs = corrupt_with_rng(kg, provided, n_neg, &mut rng, &mut taken, &mut warnings);
            for (s, r, o) in negs {
                items.push((s, r, o, false));
            }
        }
        WeightedPolicy::SubsamplePositives => {
            let n_pos = ((provided.len() as f64) * 0.6).round() as usize;
            let picked = rand::seq::index::sample(&mut rng, provided.len(), n_pos);
            let mask: HashSet<usize> = picked.iter().collect();
            let mut rest = Vec::new();
            for (i, &(s, r, o)) in provided.iter().enumerate() {
                if mask.contains(&i) {
                    items.push((s, r, o, true));
                } else {
                    rest.push((s, r, o));
                }
            }
            if !rest.is_empty() {
                let negs =
                    corrupt_with_rng(kg, &rest, rest.len(), &mut rng, &mut taken, &mut warnings);
                for (s, r, o) in negs {
                    items.push((s, r, o, false));
                }
            }
        }
    }
    let test = LabeledTriples {
        items,
        provenance: Provenance::StratifiedWeighted,
        warnings,
    };
    let masked = mask_positives(kg, &test);
    Ok((test, masked))
}

/// Rank-based AUC (Mann–Whitney with midranks for ties): the probability
/// that a random positive outscores a random negative, ties counting ½.
pub fn auc(scores: &[f64], labels: &[bool]) -> Result<f64> {
    if scores.len() != labels.len() {
        return Err(Error::ShapeMismatch(format!(
            "{} scores vs {} labels",
            scores.len(),
            labels.len()
        )));
    }
    if scores.iter().any(|v| v.is_nan()) {
        return Err(Error::Numerical("NaN score in AUC input".into()));
    }
    let n_pos = labels.iter().filter(|&&l| l).count();
    let n_neg = labels.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::SingleClass);
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].partial_cmp(&scores[b]).unwrap());
    let mut rank_sum_pos = 0.0f64;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j < order.len() && scores[order[j]] == scores[order[i]] {
            j += 1;
        }
        let midrank = (i + 1 + j) as f64 / 2.0;
        for &idx in &order[i..j] {
            if labels[idx] {
                rank_sum_pos += midrank;
            }
        }
        i = j;
    }
    let np = n_pos as f64;
    Ok((rank_sum_pos - np * (np + 1.0) / 2.0) / (np * n_neg as f64))
}

fn micro_f1_at(scores: &[f64], labels: &[bool], threshold: f64) -> f64 {
    let mut tp = 0usize;
    let mut fp = 0usize;
    let mut fn_ = 0usize;
    for (&s, &l) in scores.iter().zip(labels) {
        let pred = s > threshold;
        match (pred, l) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, true) => fn_ += 1,
            (false, false) => {}
        }
    }
    let den = 2 * tp + fp + fn_;
    if den == 0 {
        0.0
    } else {
        2.0 * tp as f64 / den as f64
    }
}

/// Single global threshold maximizing micro-F1 on the provided data.
/// Candidates are the midpoints between consecutive distinct scores plus
/// ±∞ sentinels; ties go to the larger threshold.
pub fn tune_threshold(scores: &[f64], labels: &[bool]) -> Result<f64> {
    if scores.len() != labels.len() {
        return Err(Error::ShapeMismatch(format!(
            "{} scores vs {} labels",
            scores.len(),
            labels.len()
        )));
    }
    let n_pos = labels.iter().filter(|&&l| l).count();
    if n_pos == 0 || n_pos == labels.len() {
        return Err(Error::SingleClass);
    }
    let mut distinct: Vec<f64> = scores.to_vec();
    distinct.sort_by(|a, b| a.partial_cmp(b).unwrap());
    distinct.dedup();
    let mut candidates = vec![f64::NEG_INFINITY];
    for w in distinct.windows(2) {
        candidates.push(0.5 * (w[0] + w[1]));
    }
    candidates.push(f64::INFINITY);
    let mut best = (f64::NEG_INFINITY, f64::NEG_INFINITY);
    for tau in candidates {
        let f1 = micro_f1_at(scores, labels, tau);
        if f1 >= best.1 {
            best = (tau, f1);
        }
    }
    Ok(best.0)
}

/// Per-relation precision/recall/F1. Support counts the relation's positive
/// test items.
#[derive(Debug, Clone, PartialEq)]
pub struct RelationMetrics {
    pub relation: u32,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: usize,
}

#[derive(Debug, Clone)]
pub struct EvalReport {
    pub auc: f64,
    pub threshold: f64,
    pub f1_micro: f64,
    pub f1_macro: f64,
    pub per_relation: Vec<RelationMetrics>,
    pub n_items: usize,
}

pub fn score_items(factors: &FactorSet, items: &[(u32, u32, u32, bool)]) -> Result<Vec<f64>> {
    items
        .iter()
        .map(|&(s, r, o, _)| factors.score(s as usize, r as usize, o as usize))
        .collect()
}

/// Threshold the scores and assemble the full report. Predictions are
/// score > threshold; zero denominators yield precision = recall = F1 = 0;
/// macro-F1 averages relations with positive support.
pub fn classify_and_report(
    factors: &FactorSet,
    test: &LabeledTriples,
    threshold: f64,
) -> Result<EvalReport> {
    if threshold.is_nan() {
        return Err(Error::InvalidArgument("threshold is NaN".into()));
    }
    let scores = score_items(factors, &test.items)?;
    let labels = test.labels();
    let auc = auc(&scores, &labels)?;
    let f1_micro = micro_f1_at(&scores, &labels, threshold);

    let mut relations: Vec<u32> = test.items.iter().map(|it| it.1).collect();
    relations.sort_unstable();
    relations.dedup();
    let mut per_relation = Vec::with_capacity(relations.len());
    for &rel in &relations {
        let mut tp = 0usize;
        let mut fp = 0usize;
        let mut fn_ = 0usize;
        let mut support = 0usize;
        for (i, &(_, r, _, label)) in test.items.iter().enumerate() {
            if r != rel {
                continue;
            }
            if label {
                support += 1;
            }
            let pred = scores[i] > threshold;
            match (pred, label) {
                (true, true) => tp += 1,
                (true, false) => fp += 1,
                (false, true) => fn_ += 1,
                (false, false) => {}
            }
        }
        let precision = if tp + fp == 0 {
            0.0
        } else {
            tp as f64 / (tp + fp) as f64
        };
        let recall = if tp + fn_ == 0 {
            0.0
        } else {
            tp as f64 / (tp + fn_) as f64
        };
        let f1 = if precision + recall == 0.0 {
            0.0
        } else {
            2.0 * precision * recall / (precision + recall)
        };
        per_relation.push(RelationMetrics {
            relation: rel,
            precision,
            recall,
            f1,
            support,
        });
    }
    let with_support: Vec<&RelationMetrics> =
        per_relation.iter().filter(|m| m.support > 0).collect();
    let f1_macro = if with_support.is_empty() {
        0.0
    } else {
        with_support.iter().map(|m| m.f1).sum::<f64>() / with_support.len() as f64
    };
    Ok(EvalReport {
        auc,
        threshold,
        f1_micro,
        f1_macro,
        per_relation,
        n_items: test.items.len(),
    })
}

/// One masked train/tune/test run; the building block of the repeated
/// protocol and the density sweep.
///
/// Sub-seeds: the test sample uses `seed` directly, factor init uses
/// derive_seed(seed, "init"), the validation sample (threshold tuning)
/// derive_seed(seed, "valid").
pub fn single_run(
    kg: &KnowledgeGraph,
    kind: ModelKind,
    encoding: Encoding,
    h: &Hyperparams,
    cfg: &FitConfig,
    per_slice: usize,
    seed: u64,
) -> Result<EvalReport> {
    let (test, masked) = make_test_set(kg, per_slice, seed)?;
    let x = build_tensor(&masked)?;
    let c = kind
        .uses_similarity()
        .then(|| compute_similarity(&x, encoding))
        .transpose()?;
    let fit_cfg = FitConfig {
        seed: derive_seed(seed, "init"),
        ..cfg.clone()
    };
    let (factors, _trace) = fit(kind, &x, c.as_ref(), h, &fit_cfg)?;
    let validation = sample_stratified(&masked, kg, per_slice, derive_seed(seed, "valid"))?;
    let v_scores = score_items(&factors, &validation.items)?;
    let threshold = tune_threshold(&v_scores, &validation.labels())?;
    classify_and_report(&factors, &test, threshold)
}

/// Repeat the protocol `repeats` times with seeds base, base+1, ...
/// Repeats run in parallel; results are ordered and deterministic.
pub fn run_protocol(
    kg: &KnowledgeGraph,
    kind: ModelKind,
    encoding: Encoding,
    h: &Hyperparams,
    cfg: &FitConfig,
    per_slice: usize,
    repeats: usize,
    base_seed: u64,
) -> Result<Vec<EvalReport>> {
    if repeats < 1 {
        return Err(Error::InvalidArgument("repeats must be at least 1".into()));
    }
    (0..repeats)
        .into_par_iter()
        .map(|r| single_run(kg, kind, encoding, h, cfg, per_slice, base_seed + r as u64))
        .collect()
}

/// Mean and sample standard deviation over repeats.
#[derive(Debug, Clone, Default)]
pub struct MeanStd {
    pub mean: f64,
    pub std: f64,
}

pub fn mean_std(values: &[f64]) -> MeanStd {
    let n = values.len() as f64;
    if values.is_empty() {
        return MeanStd::default();
    }
    let mean = values.iter().sum::<f64>() / n;
    let var = if values.len() < 2 {
        0.0
    } else {
        values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)
    };
    MeanStd {
        mean,
        std: var.sqrt(),
    }
}

/// AUC of selected models at decreasing subject fractions.
#[derive(Debug, Clone)]
pub struct DensityRow {
    pub fraction: f64,
    /// AUC per model, parallel to the `kinds` argument.
    pub auc: Vec<f64>,
}

/// For each fraction: subsample subjects, rebuild tensor and similarity,
/// fit each model, and evaluate on a stratified-uniform test set drawn from
/// the subsampled graph.
pub fn density_sweep(
    kg: &KnowledgeGraph,
    fractions: &[f64],
    kinds: &[ModelKind],
    encoding: Encoding,
    hs: &[Hyperparams],
    cfg: &FitConfig,
    per_slice: usize,
    seed: u64,
) -> Result<Vec<DensityRow>> {
    if kinds.is_empty() || kinds.len() != hs.len() {
        return Err(Error::InvalidArgument(
            "density sweep needs one hyperparameter set per model".into(),
        ));
    }
    for &f in fractions {
        if !(f > 0.0 && f <= 1.0) {
            return Err(Error::InvalidArgument(format!(
                "fractions must lie in (0, 1], got {f}"
            )));
        }
    }
    fractions
        .iter()
        .map(|&fraction| {
            let sub = subsample_subjects(kg, fraction, derive_seed(seed, "subsample"))?;
            let auc = kinds
                .par_iter()
                .zip(hs)
                .map(|(&kind, h)| {
                    single_run(&sub, kind, encoding, h, cfg, per_slice, seed).map(|rep| rep.auc)
                })
                .collect::<Result<Vec<f64>>>()?;
            Ok(DensityRow { fraction, auc })
        })
        .collect()
}
