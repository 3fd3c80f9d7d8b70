//! Fitting loop with convergence tracing.
//!
//! A fit cold-starts the factors from the seed, then runs sweeps until the
//! maximum relative change of the unknowns
//!
//!   δ(z_t, z_{t+1}) = maxᵢ |(z_t(i) − z_{t+1}(i)) / ((z_t(i) + z_{t+1}(i))/2)|
//!
//! drops below the tolerance or the iteration cap is reached. z concatenates
//! the entity factors and all relation slices (see [`FactorSet::flatten`]);
//! multipliers are dual variables and are not part of z. A coordinate that
//! stays at exactly zero contributes 0 (the 0/0 convention).

use std::fmt;
use std::path::Path;
use std::time::Instant;

use crate::error::{Error, Result};
use crate::graph::SparseTensor3;
use crate::models::{
    init_factors, objective_value, sweep, CouplingMode, FactorSet, Hyperparams, ModelKind,
    ObjectiveBreakdown, SweepInputs,
};
use crate::similarity::SimilarityMatrix;

/// Iteration budget and stopping tolerance.
#[derive(Debug, Clone, PartialEq)]
pub struct FitConfig {
    pub max_iter: usize,
    pub tol: f64,
    pub coupling: CouplingMode,
    pub seed: u64,
}

impl Default for FitConfig {
    fn default() -> Self {
        FitConfig {
            max_iter: 100,
            tol: 1e-6,
            coupling: CouplingMode::Derived,
            seed: 42,
        }
    }
}

impl FitConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_iter < 1 {
            return Err(Error::InvalidArgument("max_iter must be at least 1".into()));
        }
        if !(self.tol > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "tol must be positive, got {}",
                self.tol
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TerminationReason {
    MaxIter,
    DeltaBelowTol,
    WarningFallback,
}

impl fmt::Display for TerminationReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TerminationReason::MaxIter => "max_iter",
            TerminationReason::DeltaBelowTol => "delta_below_tol",
            TerminationReason::WarningFallback => "warning_fallback",
        })
    }
}

/// One completed sweep.
#[derive(Debug, Clone)]
pub struct SweepRecord {
    pub sweep: usize,
    pub objective: ObjectiveBreakdown,
    pub delta: f64,
    pub seconds: f64,
}

/// Everything a fit left behind.
#[derive(Debug, Clone)]
pub struct SolverTrace {
    pub records: Vec<SweepRecord>,
    pub warnings: Vec<String>,
    pub termination: TerminationReason,
}

impl SolverTrace {
    /// CSV with columns sweep, objective, f, g, f_s, f_rho, f_lag, delta, seconds.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut text = String::from("sweep,objective,f,g,f_s,f_rho,f_lag,delta,seconds\n");
        for r in &self.records {
            let o = &r.objective;
            text.push_str(&format!(
                "{},{:.12e},{:.12e},{:.12e},{:.12e},{:.12e},{:.12e},{:.12e},{:.6}\n",
                r.sweep,
                o.total(),
                o.reconstruction,
                o.regularization,
                o.similarity,
                o.proximal,
                o.lagrangian,
                r.delta,
                r.seconds
            ));
        }
        std::fs::write(path, text).map_err(|e| Error::Io {
            path: path.to_owned(),
            source: e,
        })
    }
}

/// Maximum coordinatewise relative change between two snapshots of the
/// unknowns, with the mean of old and new as the reference scale.
pub fn delta(z_prev: &[f64], z_next: &[f64]) -> Result<f64> {
    if z_prev.len() != z_next.len() {
        return Err(Error::ShapeMismatch(format!(
            "delta over vectors of lengths {} and {}",
            z_prev.len(),
            z_next.len()
        )));
    }
    let mut worst = 0.0f64;
    for (&a, &b) in z_prev.iter().zip(z_next) {
        let num = a - b;
        if num == 0.0 {
            continue;
        }
        let den = 0.5 * (a + b);
        let r = if den == 0.0 {
            f64::INFINITY
        } else {
            (num / den).abs()
        };
        worst = worst.max(r);
    }
    Ok(worst)
}

/// Cold-start fit: init factors from the seed, sweep to convergence, trace
/// every sweep. Deterministic for a fixed seed.
pub fn fit(
    kind: ModelKind,
    x: &SparseTensor3,
    c: Option<&SimilarityMatrix>,
    h: &Hyperparams,
    cfg: &FitConfig,
) -> Result<(FactorSet, SolverTrace)> {
    cfg.validate()?;
    h.validate()?;
    let c_matrix = c.map(|s| s.matrix());
    let mut factors = init_factors(kind, x.n_entities(), x.n_relations(), h, cfg.seed)?;
    let inputs = SweepInputs {
        x,
        c: c_matrix,
        h,
        coupling: cfg.coupling,
    };
    let mut records = Vec::new();
    let mut warnings = Vec::new();
    let mut termination = TerminationReason::MaxIter;
    let mut z_prev = factors.flatten();

    for sweep_idx in 1..=cfg.max_iter {
        let before = factors.clone();
        let start = Instant::now();
        let outcome = sweep(kind, &mut factors, &inputs)?;
        let seconds = start.elapsed().as_secs_f64();
        if !outcome.fallback_slices.is_empty() {
            warnings.push(format!(
                "sweep {sweep_idx}: least-norm fallback on relation slices {:?}",
                outcome.fallback_slices
            ));
        }
        if !factors.is_finite() {
            warnings.push(format!(
                "sweep {sweep_idx}: non-finite factor values, keeping previous sweep's factors"
            ));
            factors = before;
            termination = TerminationReason::WarningFallback;
            break;
        }
        let z_next = factors.flatten();
        let d = delta(&z_prev, &z_next)?;
        z_prev = z_next;
        let objective = objective_value(kind, &factors, x, c_matrix, h)?;
        records.push(SweepRecord {
            sweep: sweep_idx,
            objective,
            delta: d,
            seconds,
        });
        if d < cfg.tol {
            termination = TerminationReason::DeltaBelowTol;
            break;
        }
    }

    Ok((
        factors,
        SolverTrace {
            records,
            warnings,
            termination,
        },
    ))
}

/// Candidate values per hyperparameter for the coordinate-descent search.
#[derive(Debug, Clone)]
pub struct SearchGrid {
    pub lambda_a: Vec<f64>,
    pub lambda_r: Vec<f64>,
    pub lambda_e: Vec<f64>,
    pub lambda_s: Vec<f64>,
}

impl Default for SearchGrid {
    fn default() -> Self {
        SearchGrid {
            lambda_a: vec![0.0001, 0.01, 0.1, 0.0, 1.0, 10.0, 100.0, 1000.0],
            lambda_r: vec![0.002, 0.2, 0.01, 0.1, 0.0, 1.0, 10.0, 100.0, 1000.0],
            lambda_e: vec![1.0, 2.0, 5.0, 10.0],
            lambda_s: vec![0.00002, 0.02, 0.2, 0.1, 0.0, 1.0],
        }
    }
}

impl SearchGrid {
    pub fn validate(&self) -> Result<()> {
        for (name, grid) in [
            ("lambda_a", &self.lambda_a),
            ("lambda_r", &self.lambda_r),
            ("lambda_e", &self.lambda_e),
            ("lambda_s", &self.lambda_s),
        ] {
            if grid.is_empty() {
                return Err(Error::InvalidArgument(format!("empty grid for {name}")));
            }
        }
        Ok(())
    }
}

/// Coordinate descent over the grid: one hyperparameter changes at a time,
/// always moving from the best configuration found so far; passes repeat
/// until no parameter moves (at most three). Ties keep the earlier
/// configuration. Returns the best hyperparameters and their metric value.
pub fn hyper_search(
    base: &Hyperparams,
    grid: &SearchGrid,
    mut metric: impl FnMut(&Hyperparams) -> Result<f64>,
) -> Result<(Hyperparams, f64)> {
    grid.validate()?;
    let mut cache: std::collections::HashMap<[u64; 4], f64> = std::collections::HashMap::new();
    let key = |h: &Hyperparams| {
        [
            h.lambda_a.to_bits(),
            h.lambda_r.to_bits(),
            h.lambda_e.to_bits(),
            h.lambda_s.to_bits(),
        ]
    };

    let mut best = base.clone();
    best.lambda_a = grid.lambda_a[0];
    best.lambda_r = grid.lambda_r[0];
    best.lambda_e = grid.lambda_e[0];
    best.lambda_s = grid.lambda_s[0];
    let mut best_score = metric(&best)?;
    cache.insert(key(&best), best_score);

    for _pass in 0..3 {
        let mut moved = false;
        for param in 0..4 {
            let values = match param {
                0 => &grid.lambda_a,
                1 => &grid.lambda_r,
                2 => &grid.lambda_e,
                _ => &grid.lambda_s,
            };
            for &v in values {
                let mut candidate = best.clone();
                match param {
                    0 => candidate.lambda_a = v,
                    1 => candidate.lambda_r = v,
                    2 => candidate.lambda_e = v,
                    _ => candidate.lambda_s = v,
                }
                let k = key(&candidate);
                let score = match cache.get(&k) {
                    Some(&s) => s,
                    None => {
                        let s = metric(&candidate)?;
                        cache.insert(k, s);
                        s
                    }
                };
                if score > best_score {
                    best_score = score;
                    best = candidate;
                    moved = true;
                }
            }
        }
        if !moved {
            break;
        }
    }
    Ok((best, best_score))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{build_tensor, KnowledgeGraph};
    use crate::models::EntityFactors;
    use crate::similarity::{compute_similarity, Encoding};
    use approx::assert_relative_eq;
    use nalgebra::DMatrix;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn delta_examples() {
        assert_eq!(delta(&[1.0, 2.0], &[1.0, 2.0]).unwrap(), 0.0);
        assert_relative_eq!(delta(&[1.0], &[3.0]).unwrap(), 1.0);
        // scale invariance
        let a = [0.5, -2.0, 7.0];
        let b = [0.25, -2.5, 7.5];
        let d1 = delta(&a, &b).unwrap();
        let scaled_a: Vec<f64> = a.iter().map(|v| v * 3.0).collect();
        let scaled_b: Vec<f64> = b.iter().map(|v| v * 3.0).collect();
        assert_relative_eq!(d1, delta(&scaled_a, &scaled_b).unwrap(), epsilon = 1e-12);
        // symmetry and the 0/0 convention
        assert_relative_eq!(d1, delta(&b, &a).unwrap());
        assert_eq!(delta(&[0.0], &[0.0]).unwrap(), 0.0);
        assert!(delta(&[1.0], &[1.0, 2.0]).is_err());
    }

    fn planted_instance(ne: usize, nr: usize, p: usize, seed: u64) -> (SparseTensor3, usize) {
        // deterministic structured graph with an exact low-rank flavor:
        // block communities connected by each relation
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut kg = KnowledgeGraph::default();
        for e in 0..ne {
            kg.insert(&format!("e{e}"), "r0", &format!("e{e}"));
        }
        for r in 1..nr {
            kg.insert("e0", &format!("r{r}"), "e0");
        }
        let mut triples = Vec::new();
        for s in 0..ne {
            for o in 0..ne {
                for r in 0..nr {
                    if (s / p + o / p + r) % 3 == 0 || rng.random::<f64>() < 0.05 {
                        triples.push((s as u32, r as u32, o as u32));
                    }
                }
            }
        }
        let kg = kg.with_triples(triples);
        let n = kg.triples().len();
        (build_tensor(&kg).unwrap(), n)
    }

    #[test]
    fn max_iter_one_gives_single_record() {
        let (x, _) = planted_instance(6, 2, 2, 9);
        let c = compute_similarity(&x, Encoding::Symmetric).unwrap();
        let h = Hyperparams {
            p: Some(2),
            ..Hyperparams::default()
        };
        let cfg = FitConfig {
            max_iter: 1,
            ..FitConfig::default()
        };
        let (_, trace) = fit(ModelKind::LinearReg, &x, Some(&c), &h, &cfg).unwrap();
        assert_eq!(trace.records.len(), 1);
        assert_eq!(trace.termination, TerminationReason::MaxIter);
        assert_eq!(trace.records[0].sweep, 1);
    }

    #[test]
    fn fit_is_reproducible() {
        let (x, _) = planted_instance(8, 3, 2, 10);
        let c = compute_similarity(&x, Encoding::Transitivity).unwrap();
        let h = Hyperparams {
            p: Some(3),
            ..Hyperparams::default()
        };
        let cfg = FitConfig {
            max_iter: 5,
            ..FitConfig::default()
        };
        let (f1, t1) = fit(ModelKind::QuadConstraint, &x, Some(&c), &h, &cfg).unwrap();
        let (f2, t2) = fit(ModelKind::QuadConstraint, &x, Some(&c), &h, &cfg).unwrap();
        assert_eq!(f1, f2);
        assert_eq!(t1.records.len(), t2.records.len());
        for (a, b) in t1.records.iter().zip(&t2.records) {
            assert_eq!(a.delta, b.delta);
            assert_eq!(a.objective.total(), b.objective.total());
        }
    }

    #[test]
    fn missing_similarity_matrix_is_rejected() {
        let (x, _) = planted_instance(5, 2, 2, 3);
        let h = Hyperparams::default();
        let cfg = FitConfig::default();
        assert!(fit(ModelKind::QuadConstraint, &x, None, &h, &cfg).is_err());
        assert!(fit(ModelKind::Rescal, &x, None, &h, &cfg).is_ok());
    }

    #[test]
    fn exact_instance_converges_below_tolerance() {
        // 10×10×3 with planted rank-3 structure: with the block indicator
        // B (10×3, blocks {4,3,3}), r0 = B·I·Bᵀ, r1 = B·shift·Bᵀ,
        // r2 = B·shift²·Bᵀ — exactly representable at p = 3
        let mut kg = KnowledgeGraph::default();
        for e in 0..10 {
            kg.insert(&format!("e{e}"), "r0", &format!("e{e}"));
        }
        kg.insert("e0", "r1", "e0");
        kg.insert("e0", "r2", "e0");
        let block = |e: u32| -> u32 {
            if e < 4 {
                0
            } else if e < 7 {
                1
            } else {
                2
            }
        };
        let mut triples = Vec::new();
        for s in 0..10u32 {
            for o in 0..10u32 {
                for r in 0..3u32 {
                    if block(s) + r == block(o) {
                        triples.push((s, r, o));
                    }
                }
            }
        }
        let kg = kg.with_triples(triples);
        let x = build_tensor(&kg).unwrap();
        let c = compute_similarity(&x, Encoding::Symmetric).unwrap();
        let h = Hyperparams {
            p: Some(3),
            lambda_a: 0.0,
            lambda_r: 0.0,
            lambda_e: 0.0,
            lambda_s: 0.0,
            rho: 1.0,
            ..Hyperparams::default()
        };
        let cfg = FitConfig::default();
        let (_, trace) = fit(ModelKind::LinearReg, &x, Some(&c), &h, &cfg).unwrap();
        assert_eq!(trace.termination, TerminationReason::DeltaBelowTol);
        assert!(trace.records.len() < 100);
        let last = trace.records.last().unwrap();
        assert!(last.delta < 1e-6);
    }

    #[test]
    fn trace_csv_has_expected_columns() {
        let (x, _) = planted_instance(5, 2, 2, 4);
        let h = Hyperparams {
            p: Some(2),
            ..Hyperparams::default()
        };
        let cfg = FitConfig {
            max_iter: 3,
            ..FitConfig::default()
        };
        let (_, trace) = fit(ModelKind::Rescal, &x, None, &h, &cfg).unwrap();
        let f = tempfile::NamedTempFile::new().unwrap();
        trace.write_csv(f.path()).unwrap();
        let text = std::fs::read_to_string(f.path()).unwrap();
        let mut lines = text.lines();
        assert_eq!(
            lines.next().unwrap(),
            "sweep,objective,f,g,f_s,f_rho,f_lag,delta,seconds"
        );
        assert_eq!(lines.count(), trace.records.len());
    }

    #[test]
    fn single_point_grid_returns_that_point() {
        let grid = SearchGrid {
            lambda_a: vec![0.5],
            lambda_r: vec![0.25],
            lambda_e: vec![2.0],
            lambda_s: vec![0.0],
        };
        let mut evals = 0;
        let (best, score) = hyper_search(&Hyperparams::default(), &grid, |h| {
            evals += 1;
            assert_eq!(h.lambda_a, 0.5);
            Ok(1.0)
        })
        .unwrap();
        assert_eq!(best.lambda_a, 0.5);
        assert_eq!(best.lambda_r, 0.25);
        assert_eq!(best.lambda_e, 2.0);
        assert_eq!(best.lambda_s, 0.0);
        assert_eq!(score, 1.0);
        assert_eq!(evals, 1, "cache should collapse repeat evaluations");
    }

    #[test]
    fn planted_optimum_is_found() {
        let grid = SearchGrid {
            lambda_a: vec![0.1, 1.0, 10.0],
            lambda_r: vec![0.1, 1.0],
            lambda_e: vec![1.0],
            lambda_s: vec![0.0, 0.5],
        };
        let (best, score) = hyper_search(&Hyperparams::default(), &grid, |h| {
            // strictly best at (1.0, 0.1, 1.0, 0.5)
            let mut s = 0.0;
            s -= (h.lambda_a - 1.0).abs();
            s -= (h.lambda_r - 0.1).abs();
            s -= (h.lambda_s - 0.5).abs();
            Ok(s)
        })
        .unwrap();
        assert_eq!(best.lambda_a, 1.0);
        assert_eq!(best.lambda_r, 0.1);
        assert_eq!(best.lambda_s, 0.5);
        assert_relative_eq!(score, 0.0);
    }

    #[test]
    fn table_grid_accepts_published_lambda_a_values() {
        let grid = SearchGrid::default();
        assert_eq!(
            grid.lambda_a,
            vec![0.0001, 0.01, 0.1, 0.0, 1.0, 10.0, 100.0, 1000.0]
        );
    }

    #[test]
    fn linear_reg_objective_monotone_for_finite_rho() {
        let (x, _) = planted_instance(7, 3, 2, 12);
        let c = compute_similarity(&x, Encoding::Transitivity).unwrap();
        for rho in [0.1, 1.0] {
            let h = Hyperparams {
                p: Some(3),
                lambda_s: 0.2,
                rho,
                ..Hyperparams::default()
            };
            let cfg = FitConfig {
                max_iter: 25,
                ..FitConfig::default()
            };
            let (_, trace) = fit(ModelKind::LinearReg, &x, Some(&c), &h, &cfg).unwrap();
            let mut prev = f64::INFINITY;
            for rec in &trace.records {
                let total = rec.objective.total();
                assert!(
                    total <= prev + 1e-10,
                    "objective rose from {prev} to {total} at sweep {}",
                    rec.sweep
                );
                prev = total;
            }
        }
    }

    #[test]
    fn flatten_matches_documented_order() {
        let a1 = DMatrix::from_row_slice(1, 2, &[1.0, 2.0]);
        let a2 = DMatrix::from_row_slice(1, 2, &[3.0, 4.0]);
        let r = DMatrix::from_row_slice(2, 2, &[5.0, 6.0, 7.0, 8.0]);
        let f = FactorSet {
            entity: EntityFactors::Linear { a1, a2 },
            relations: vec![r],
            multipliers: None,
        };
        assert_eq!(f.flatten(), vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0]);
    }
}
