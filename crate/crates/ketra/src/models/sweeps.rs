//! Closed-form alternating update sweeps.
//!
//! A sweep is one block Gauss–Seidel pass in the fixed order: entity factors
//! (A, or A1 then A2), then each relation slice R_k in index order, then the
//! Lagrange multipliers for constrained models. Every block update solves its
//! strictly convex subproblem exactly (gradient-zero), so the objective can
//! only go down for the regularized models:
//!
//!   A      (quadratic)  RESCAL rule with the Gram AᵀA frozen at the old A
//!   A1     ← [Σ_k X_k A2 R_kᵀ + λ_e A2]·[Σ_k R_k A2ᵀA2 R_kᵀ + (λ_{a1}+λ_e+prox)I]⁻¹
//!   A2     mirrored
//!   R_k    Kronecker ridge solve; similarity/multiplier couplings enter the
//!          diagonal and the right-hand side
//!   λᵢⱼ    ← max(0, (1−η)λᵢⱼ + η(‖Rᵢ−Rⱼ‖² + Cᵢⱼ − 1)), diagonal pinned at 0
//!
//! where prox = 2/ρ for the proximally augmented linear model and 0
//! otherwise. Couplings are weighted with the symmetrized coefficients
//! (C_{k,i} + C_{i,k}), resp. (λ_{kj} + λ_{jk})/2, which is what zeroing the
//! exact block gradient of the double-sum penalty requires; for symmetric
//! inputs the multiplier weights reduce to the familiar Σⱼ λ_{kj}.
//!
//! The constrained models keep their published sign conventions: the
//! quadratic one adds the multiplier sum to the ridge diagonal, the linear
//! one subtracts it. A subtracted sum can make the slice system indefinite;
//! those solves fall back to the least-norm solution and the sweep reports
//! it.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::graph::SparseTensor3;

use super::kron::KronRidgeSolver;
use super::{
    check_model_shapes, slice_mul, slice_tmul, EntityFactors, FactorSet, Hyperparams, ModelKind,
};

/// How the slice update of the linear regularized model treats the
/// similarity coupling.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CouplingMode {
    /// Gradient-derived rule: coupled right-hand side, symmetrized weights.
    #[default]
    Derived,
    /// The rule as published: one-sided weights on the diagonal only, no
    /// coupling term (the dimensionally forced transpose is always applied).
    Literal,
}

impl std::str::FromStr for CouplingMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "derived" => Ok(CouplingMode::Derived),
            "literal" => Ok(CouplingMode::Literal),
            other => Err(Error::InvalidArgument(format!(
                "unknown coupling mode {other:?} (expected derived or literal)"
            ))),
        }
    }
}

/// Everything a sweep reads besides the factors themselves.
#[derive(Clone, Copy)]
pub struct SweepInputs<'a> {
    pub x: &'a SparseTensor3,
    pub c: Option<&'a DMatrix<f64>>,
    pub h: &'a Hyperparams,
    pub coupling: CouplingMode,
}

/// What happened during one sweep.
#[derive(Debug, Clone, Default)]
pub struct SweepOutcome {
    /// Relation slices whose system was indefinite/singular and fell back to
    /// the least-norm solve.
    pub fallback_slices: Vec<usize>,
}

fn solve_right(num: &DMatrix<f64>, den: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    // A · Den = Num with symmetric Den: solve Den · Aᵀ = Numᵀ
    let nt = num.transpose();
    if let Some(ch) = den.clone().cholesky() {
        return Ok(ch.solve(&nt).transpose());
    }
    den.clone()
        .lu()
        .solve(&nt)
        .map(|x| x.transpose())
        .ok_or_else(|| Error::Numerical("singular entity-factor system".into()))
}

fn clamp_nonnegative(m: &mut DMatrix<f64>) {
    for v in m.iter_mut() {
        if *v < 0.0 {
            *v = 0.0;
        }
    }
}

/// RESCAL entity update, Gram frozen at the current A.
fn update_quad_a(f: &mut FactorSet, x: &SparseTensor3, h: &Hyperparams) -> Result<()> {
    let a = match &f.entity {
        EntityFactors::Quadratic(a) => a.clone(),
        _ => unreachable!("shape-checked"),
    };
    let p = a.ncols();
    let gram = a.transpose() * &a;
    let mut num = DMatrix::zeros(a.nrows(), p);
    let mut den = DMatrix::from_diagonal_element(p, p, h.lambda_a);
    for (k, rk) in f.relations.iter().enumerate() {
        let slice = x.slice(k)?;
        num += slice_mul(slice, &(&a * rk.transpose()), a.nrows());
        num += slice_tmul(slice, &(&a * rk), a.nrows());
        den += rk * &gram * rk.transpose();
        den += rk.transpose() * &gram * rk;
    }
    f.entity = EntityFactors::Quadratic(solve_right(&num, &den)?);
    Ok(())
}

fn update_lin_a1(
    kind: ModelKind,
    f: &mut FactorSet,
    x: &SparseTensor3,
    h: &Hyperparams,
) -> Result<()> {
    let (a1_rows, a2) = match &f.entity {
        EntityFactors::Linear { a1, a2 } => (a1.nrows(), a2.clone()),
        _ => unreachable!("shape-checked"),
    };
    let p = a2.ncols();
    let prox = if kind == ModelKind::LinearReg {
        2.0 * h.rho_inv()
    } else {
        0.0
    };
    let gram = a2.transpose() * &a2;
    let mut num = &a2 * h.lambda_e;
    let mut den = DMatrix::from_diagonal_element(p, p, h.lambda_a1() + h.lambda_e + prox);
    for (k, rk) in f.relations.iter().enumerate() {
        num += slice_mul(x.slice(k)?, &(&a2 * rk.transpose()), a1_rows);
        den += rk * &gram * rk.transpose();
    }
    let a1 = solve_right(&num, &den)?;
    if let EntityFactors::Linear { a1: slot, .. } = &mut f.entity {
        *slot = a1;
    }
    Ok(())
}

fn update_lin_a2(
    kind: ModelKind,
    f: &mut FactorSet,
    x: &SparseTensor3,
    h: &Hyperparams,
) -> Result<()> {
    let (a2_rows, a1) = match &f.entity {
        EntityFactors::Linear { a1, a2 } => (a2.nrows(), a1.clone()),
        _ => unreachable!("shape-checked"),
    };
    let p = a1.ncols();
    let prox = if kind == ModelKind::LinearReg {
        2.0 * h.rho_inv()
    } else {
        0.0
    };
    let gram = a1.transpose() * &a1;
    let mut num = &a1 * h.lambda_e;
    let mut den = DMatrix::from_diagonal_element(p, p, h.lambda_a2() + h.lambda_e + prox);
    for (k, rk) in f.relations.iter().enumerate() {
        num += slice_tmul(x.slice(k)?, &(&a1 * rk), a2_rows);
        den += rk.transpose() * &gram * rk;
    }
    let a2 = solve_right(&num, &den)?;
    if let EntityFactors::Linear { a2: slot, .. } = &mut f.entity {
        *slot = a2;
    }
    Ok(())
}

/// Ridge diagonal and right-hand side of slice k's system, given the
/// current stack. Returns (alpha, rhs, lenient).
fn slice_system(
    kind: ModelKind,
    f: &FactorSet,
    k: usize,
    proj: DMatrix<f64>,
    inp: &SweepInputs,
) -> (f64, DMatrix<f64>, bool) {
    let h = inp.h;
    let n = f.relations.len();
    match kind {
        ModelKind::Rescal | ModelKind::NnRescal => (h.lambda_r, proj, false),
        ModelKind::QuadReg | ModelKind::LinearReg => {
            if kind == ModelKind::LinearReg && inp.coupling == CouplingMode::Literal {
                let c = inp.c.expect("shape-checked");
                let row_sum: f64 = (0..n).map(|i| c[(k, i)]).sum();
                return (h.lambda_r + h.rho_inv() + h.lambda_s * row_sum, proj, false);
            }
            let prox = if kind == ModelKind::LinearReg {
                2.0 * h.rho_inv()
            } else {
                0.0
            };
            if h.lambda_s == 0.0 {
                return (h.lambda_r + prox, proj, false);
            }
            let c = inp.c.expect("shape-checked");
            let mut rhs = proj;
            let mut wsum = 0.0;
            for i in 0..n {
                if i == k {
                    continue;
                }
                let w = c[(k, i)] + c[(i, k)];
                if w != 0.0 {
                    wsum += w;
                    rhs += &f.relations[i] * (h.lambda_s * w);
                }
            }
            (h.lambda_r + prox + h.lambda_s * wsum, rhs, false)
        }
        ModelKind::QuadConstraint | ModelKind::LinearConstraint => {
            let lam = f.multipliers.as_ref().expect("shape-checked");
            let sign = if kind == ModelKind::QuadConstraint {
                1.0
            } else {
                -1.0
            };
            let mut rhs = proj;
            let mut wsum = 0.0;
            for j in 0..n {
                if j == k {
                    continue;
                }
                let w = 0.5 * (lam[(k, j)] + lam[(j, k)]);
                if w != 0.0 {
                    wsum += w;
                    rhs += &f.relations[j] * (sign * w);
                }
            }
            (h.lambda_r + sign * wsum, rhs, true)
        }
    }
}

fn update_slice_with(
    solver: &KronRidgeSolver,
    kind: ModelKind,
    f: &mut FactorSet,
    k: usize,
    proj: DMatrix<f64>,
    inp: &SweepInputs,
) -> Result<bool> {
    let (alpha, rhs, lenient) = slice_system(kind, f, k, proj, inp);
    let (solution, fell_back) = if lenient {
        let (r, flags) = solver.solve_lenient(alpha, &rhs)?;
        (r, flags.fell_back)
    } else {
        (solver.solve(alpha, &rhs)?, false)
    };
    f.relations[k] = solution;
    if kind == ModelKind::NnRescal {
        clamp_nonnegative(&mut f.relations[k]);
    }
    Ok(fell_back)
}

fn grams(f: &FactorSet) -> (DMatrix<f64>, DMatrix<f64>, DMatrix<f64>, DMatrix<f64>) {
    match &f.entity {
        EntityFactors::Quadratic(a) => {
            let g = a.transpose() * a;
            (a.clone(), a.clone(), g.clone(), g)
        }
        EntityFactors::Linear { a1, a2 } => (
            a1.clone(),
            a2.clone(),
            a1.transpose() * a1,
            a2.transpose() * a2,
        ),
    }
}

/// Projected dual step on the off-diagonal multipliers: relaxed assignment
/// toward the violation ‖Rᵢ − Rⱼ‖² + Cᵢⱼ − 1 (η = 1 is plain assignment),
/// clamped at zero. The clamp drops the repulsive regime of the equality
/// constraint, which keeps the slice systems positive definite and the dual
/// iteration from oscillating. The diagonal constraint ‖Rᵢ − Rᵢ‖² = 1 − Cᵢᵢ
/// is unsatisfiable unless Cᵢᵢ = 1, so λᵢᵢ stays 0.
pub fn update_multipliers(f: &mut FactorSet, c: &DMatrix<f64>, h: &Hyperparams) -> Result<()> {
    let n = f.relations.len();
    let eta = h.lagrange_step;
    let lam = f
        .multipliers
        .as_mut()
        .ok_or_else(|| Error::InvalidArgument("factor set has no multipliers".into()))?;
    for i in 0..n {
        for j in 0..n {
            if i == j {
                lam[(i, j)] = 0.0;
                continue;
            }
            let violation = (&f.relations[i] - &f.relations[j]).norm_squared() + c[(i, j)] - 1.0;
            lam[(i, j)] = ((1.0 - eta) * lam[(i, j)] + eta * violation).max(0.0);
        }
    }
    Ok(())
}

/// One addressable block of a sweep.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Block {
    EntityA,
    EntityA1,
    EntityA2,
    Relation(usize),
    Multipliers,
}

/// The block order of one sweep of `kind`.
pub fn block_sequence(kind: ModelKind, n_relations: usize) -> Vec<Block> {
    let mut seq = Vec::new();
    if kind.is_linear() {
        seq.push(Block::EntityA1);
        seq.push(Block::EntityA2);
    } else {
        seq.push(Block::EntityA);
    }
    seq.extend((0..n_relations).map(Block::Relation));
    if kind.is_constrained() {
        seq.push(Block::Multipliers);
    }
    seq
}

/// Apply one block update in isolation. Returns whether a least-norm
/// fallback happened (relation blocks only).
pub fn update_entity_block(kind: ModelKind, f: &mut FactorSet, inp: &SweepInputs) -> Result<()> {
    check_model_shapes(kind, f, inp.x, inp.c)?;
    if kind.is_linear() {
        update_lin_a1(kind, f, inp.x, inp.h)?;
        update_lin_a2(kind, f, inp.x, inp.h)?;
    } else {
        update_quad_a(f, inp.x, inp.h)?;
        if kind == ModelKind::NnRescal {
            if let EntityFactors::Quadratic(a) = &mut f.entity {
                clamp_nonnegative(a);
            }
        }
    }
    Ok(())
}

/// Apply one block update in isolation. Returns whether a least-norm
/// fallback happened (relation blocks only).
pub fn update_block(
    kind: ModelKind,
    f: &mut FactorSet,
    inp: &SweepInputs,
    block: Block,
) -> Result<bool> {
    check_model_shapes(kind, f, inp.x, inp.c)?;
    match block {
        Block::EntityA => {
            update_quad_a(f, inp.x, inp.h)?;
            if kind == ModelKind::NnRescal {
                if let EntityFactors::Quadratic(a) = &mut f.entity {
                    clamp_nonnegative(a);
                }
            }
            Ok(false)
        }
        Block::EntityA1 => update_lin_a1(kind, f, inp.x, inp.h).map(|()| false),
        Block::EntityA2 => update_lin_a2(kind, f, inp.x, inp.h).map(|()| false),
        Block::Relation(k) => update_relation_slice(kind, f, k, inp),
        Block::Multipliers => {
            update_multipliers(f, inp.c.expect("shape-checked"), inp.h)?;
            Ok(false)
        }
    }
}

/// Solve relation slice k's system against the current stack.
pub fn update_relation_slice(
    kind: ModelKind,
    f: &mut FactorSet,
    k: usize,
    inp: &SweepInputs,
) -> Result<bool> {
    check_model_shapes(kind, f, inp.x, inp.c)?;
    if k >= f.relations.len() {
        return Err(Error::IndexOutOfRange(format!(
            "relation {k} of {}",
            f.relations.len()
        )));
    }
    let (left, right, g1, g2) = grams(f);
    let solver = KronRidgeSolver::new(&g1, &g2)?;
    let proj = left.transpose() * slice_mul(inp.x.slice(k)?, &right, left.nrows());
    update_slice_with(&solver, kind, f, k, proj, inp)
}

/// One full sweep of `kind` over all blocks.
pub fn sweep(kind: ModelKind, f: &mut FactorSet, inp: &SweepInputs) -> Result<SweepOutcome> {
    check_model_shapes(kind, f, inp.x, inp.c)?;
    inp.h.validate()?;
    let mut outcome = SweepOutcome::default();

    if kind.is_linear() {
        update_lin_a1(kind, f, inp.x, inp.h)?;
        update_lin_a2(kind, f, inp.x, inp.h)?;
    } else {
        update_quad_a(f, inp.x, inp.h)?;
        if kind == ModelKind::NnRescal {
            if let EntityFactors::Quadratic(a) = &mut f.entity {
                clamp_nonnegative(a);
            }
        }
    }

    // the entity factors are fixed for the rest of the sweep, so one
    // eigendecomposition pair serves every slice solve
    let (left, right, g1, g2) = grams(f);
    let solver = KronRidgeSolver::new(&g1, &g2)?;
    for k in 0..f.relations.len() {
        let proj = left.transpose() * slice_mul(inp.x.slice(k)?, &right, left.nrows());
        if update_slice_with(&solver, kind, f, k, proj, inp)? {
            outcome.fallback_slices.push(k);
        }
    }

    if kind.is_constrained() {
        update_multipliers(f, inp.c.expect("shape-checked"), inp.h)?;
    }
    Ok(outcome)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{build_tensor, KnowledgeGraph};
    use crate::models::{init_factors, objective_value};
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_tensor(rng: &mut ChaCha8Rng, ne: usize, nr: usize, fill: f64) -> SparseTensor3 {
        let mut kg = KnowledgeGraph::default();
        // intern all names first so dimensions are stable
        for e in 0..ne {
            for r in 0..nr {
                kg.insert(&format!("e{e}"), &format!("r{r}"), &format!("e{e}"));
            }
        }
        let base = kg.triples().len();
        let mut kg = kg.with_triples(kg.triples()[..base].to_vec());
        let mut kept = Vec::new();
        for s in 0..ne {
            for r in 0..nr {
                for o in 0..ne {
                    if rng.random::<f64>() < fill {
                        kept.push((s as u32, r as u32, o as u32));
                    }
                }
            }
        }
        if kept.is_empty() {
            kept.push((0, 0, 0));
        }
        kg = kg.with_triples(kept);
        build_tensor(&kg).unwrap()
    }

    fn random_sym(rng: &mut ChaCha8Rng, n: usize) -> DMatrix<f64> {
        let mut c = DMatrix::zeros(n, n);
        for i in 0..n {
            for j in i..n {
                let v: f64 = rng.random();
                c[(i, j)] = v;
                c[(j, i)] = v;
            }
        }
        c
    }

    #[test]
    fn scalar_linear_instance_matches_hand_formula() {
        let mut kg = KnowledgeGraph::default();
        kg.insert("a", "r", "a");
        let x = build_tensor(&kg).unwrap();
        let h = Hyperparams {
            p: Some(1),
            lambda_a: 0.3,
            lambda_r: 0.2,
            lambda_e: 0.7,
            lambda_s: 0.0,
            rho: 2.0,
            ..Hyperparams::default()
        };
        let c = DMatrix::zeros(1, 1);
        let mut f = init_factors(ModelKind::LinearReg, 1, 1, &h, 4).unwrap();
        let (a2, r) = match (&f.entity, &f.relations[0]) {
            (EntityFactors::Linear { a2, .. }, r) => (a2[(0, 0)], r[(0, 0)]),
            _ => unreachable!(),
        };
        let inp = SweepInputs {
            x: &x,
            c: Some(&c),
            h: &h,
            coupling: CouplingMode::Derived,
        };
        update_block(ModelKind::LinearReg, &mut f, &inp, Block::EntityA1).unwrap();
        // scalar closed form: (x·a2·r + λ_e·a2) / (r·a2²·r + λ_a1 + λ_e + 2/ρ)
        let expect = (1.0 * a2 * r + 0.7 * a2) / (r * a2 * a2 * r + 0.3 + 0.7 + 1.0);
        let got = match &f.entity {
            EntityFactors::Linear { a1, .. } => a1[(0, 0)],
            _ => unreachable!(),
        };
        assert_relative_eq!(got, expect, epsilon = 1e-12);
    }

    #[test]
    fn zero_numerator_gives_zero_a1() {
        // X with one far-away entry keeps the tensor non-degenerate while the
        // first relation sees no data; with λ_e = 0 the A1 numerator vanishes.
        let mut kg = KnowledgeGraph::default();
        kg.insert("a", "r", "b");
        let x = build_tensor(&kg).unwrap();
        let h = Hyperparams {
            p: Some(2),
            lambda_a: 1.0,
            lambda_e: 0.0,
            lambda_s: 0.0,
            ..Hyperparams::default()
        };
        let c = DMatrix::zeros(1, 1);
        let mut f = init_factors(ModelKind::LinearReg, 2, 1, &h, 8).unwrap();
        f.relations[0] = DMatrix::zeros(2, 2); // kills the data term too
        let inp = SweepInputs {
            x: &x,
            c: Some(&c),
            h: &h,
            coupling: CouplingMode::Derived,
        };
        update_block(ModelKind::LinearReg, &mut f, &inp, Block::EntityA1).unwrap();
        match &f.entity {
            EntityFactors::Linear { a1, .. } => assert!(a1.norm() < 1e-14),
            _ => unreachable!(),
        }
    }

    #[test]
    fn constraint_free_limits_agree_with_plain_least_squares() {
        // multipliers all zero, λ_r = 0: constrained slice update collapses to
        // the unconstrained normal equations
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let x = random_tensor(&mut rng, 4, 2, 0.5);
        let h = Hyperparams {
            p: Some(2),
            lambda_r: 0.0,
            ..Hyperparams::default()
        };
        let c = random_sym(&mut rng, 2);
        let mut f = init_factors(ModelKind::QuadConstraint, 4, 2, &h, 3).unwrap();
        let inp = SweepInputs {
            x: &x,
            c: Some(&c),
            h: &h,
            coupling: CouplingMode::Derived,
        };
        let mut g = f.clone();
        update_relation_slice(ModelKind::QuadConstraint, &mut f, 0, &inp).unwrap();
        // reference: solve (G⊗G) vec(R) = vec(AᵀX₀A) densely
        let a = match &g.entity {
            EntityFactors::Quadratic(a) => a.clone(),
            _ => unreachable!(),
        };
        let gram = a.transpose() * &a;
        let proj = a.transpose() * slice_mul(x.slice(0).unwrap(), &a, 4);
        let expect = crate::models::kron::tests::dense_kron_solve(&gram, &gram, 0.0, &proj);
        g.relations[0] = expect.clone();
        assert_relative_eq!(f.relations[0], expect, max_relative = 1e-7);
    }

    #[test]
    fn satisfied_constraint_leaves_multipliers_at_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let x = random_tensor(&mut rng, 3, 2, 0.4);
        let h = Hyperparams {
            p: Some(2),
            ..Hyperparams::default()
        };
        let mut f = init_factors(ModelKind::QuadConstraint, 3, 2, &h, 6).unwrap();
        // equal slices and C = all-ones: violation = 0 + 1 − 1 = 0
        f.relations[1] = f.relations[0].clone();
        let c = DMatrix::from_element(2, 2, 1.0);
        let _ = x;
        update_multipliers(&mut f, &c, &h).unwrap();
        assert!(f.multipliers.as_ref().unwrap().norm() < 1e-15);
    }

    #[test]
    fn multiplier_assignment_and_damping() {
        let h = Hyperparams::default(); // η = 1
        let mut f = init_factors(
            ModelKind::QuadConstraint,
            2,
            2,
            &Hyperparams {
                p: Some(1),
                ..h.clone()
            },
            2,
        )
        .unwrap();
        f.relations[0] = DMatrix::from_element(1, 1, 2.0);
        f.relations[1] = DMatrix::from_element(1, 1, 0.5);
        let c = DMatrix::from_element(2, 2, 0.25);
        update_multipliers(
            &mut f,
            &c,
            &Hyperparams {
                p: Some(1),
                ..h.clone()
            },
        )
        .unwrap();
        let lam = f.multipliers.clone().unwrap();
        // direct assignment: ‖2 − 0.5‖² + 0.25 − 1
        assert_relative_eq!(lam[(0, 1)], 2.25 + 0.25 - 1.0);
        assert_eq!(lam[(0, 0)], 0.0);
        // damped: λ ← (1−η)λ + η·v keeps the fixed point
        let damped = Hyperparams {
            p: Some(1),
            lagrange_step: 0.25,
            ..Hyperparams::default()
        };
        let before = lam[(0, 1)];
        update_multipliers(&mut f, &c, &damped).unwrap();
        let after = f.multipliers.as_ref().unwrap()[(0, 1)];
        assert_relative_eq!(after, 0.75 * before + 0.25 * before);
    }

    #[test]
    fn nn_rescal_stays_nonnegative_and_fixes_exact_factorizations() {
        // rank-1 exact instance: X = a r aᵀ with nonnegative a, r — only
        // representable exactly by entries in {0,1}, so build it directly
        let mut kg = KnowledgeGraph::default();
        for s in 0..3 {
            for o in 0..3 {
                kg.insert(&format!("e{s}"), "r", &format!("e{o}"));
            }
        }
        let x = build_tensor(&kg).unwrap();
        let h = Hyperparams {
            p: Some(1),
            lambda_a: 0.0,
            lambda_r: 0.0,
            ..Hyperparams::default()
        };
        let mut f = FactorSet {
            entity: EntityFactors::Quadratic(DMatrix::from_element(3, 1, 1.0)),
            relations: vec![DMatrix::from_element(1, 1, 1.0)],
            multipliers: None,
        };
        let inp = SweepInputs {
            x: &x,
            c: None,
            h: &h,
            coupling: CouplingMode::Derived,
        };
        let before = f.clone();
        sweep(ModelKind::NnRescal, &mut f, &inp).unwrap();
        match (&f.entity, &before.entity) {
            (EntityFactors::Quadratic(a), EntityFactors::Quadratic(b)) => {
                assert_relative_eq!(*a, *b, epsilon = 1e-10)
            }
            _ => unreachable!(),
        }
        assert_relative_eq!(f.relations[0], before.relations[0], epsilon = 1e-10);

        // random instance: projection keeps everything nonnegative
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let x = random_tensor(&mut rng, 5, 3, 0.3);
        let h = Hyperparams {
            p: Some(3),
            ..Hyperparams::default()
        };
        let mut f = init_factors(ModelKind::NnRescal, 5, 3, &h, 1).unwrap();
        let inp = SweepInputs {
            x: &x,
            c: None,
            h: &h,
            coupling: CouplingMode::Derived,
        };
        for _ in 0..5 {
            sweep(ModelKind::NnRescal, &mut f, &inp).unwrap();
            assert!(f.flatten().iter().all(|&v| v >= 0.0));
        }
    }

    #[test]
    fn rescal_objective_trace_is_nonincreasing() {
        let mut rng = ChaCha8Rng::seed_from_u64(33);
        let x = random_tensor(&mut rng, 6, 3, 0.25);
        let h = Hyperparams {
            p: Some(3),
            lambda_a: 0.1,
            lambda_r: 0.1,
            ..Hyperparams::default()
        };
        let mut f = init_factors(ModelKind::Rescal, 6, 3, &h, 7).unwrap();
        let inp = SweepInputs {
            x: &x,
            c: None,
            h: &h,
            coupling: CouplingMode::Derived,
        };
        let mut prev = objective_value(ModelKind::Rescal, &f, &x, None, &h)
            .unwrap()
            .total();
        for _ in 0..20 {
            sweep(ModelKind::Rescal, &mut f, &inp).unwrap();
            let now = objective_value(ModelKind::Rescal, &f, &x, None, &h)
                .unwrap()
                .total();
            assert!(now <= prev + 1e-9, "objective rose from {prev} to {now}");
            prev = now;
        }
    }

    #[test]
    fn quad_reg_with_identity_c_matches_lambda_s_zero_solution() {
        // C = I contributes only self-terms, which cancel exactly
        let mut rng = ChaCha8Rng::seed_from_u64(44);
        let x = random_tensor(&mut rng, 4, 2, 0.4);
        let h = Hyperparams {
            p: Some(2),
            lambda_s: 0.7,
            ..Hyperparams::default()
        };
        let h0 = Hyperparams {
            lambda_s: 0.0,
            ..h.clone()
        };
        let c = DMatrix::identity(2, 2);
        let f0 = init_factors(ModelKind::QuadReg, 4, 2, &h, 5).unwrap();
        let mut with_c = f0.clone();
        let mut without = f0.clone();
        sweep(
            ModelKind::QuadReg,
            &mut with_c,
            &SweepInputs {
                x: &x,
                c: Some(&c),
                h: &h,
                coupling: CouplingMode::Derived,
            },
        )
        .unwrap();
        sweep(
            ModelKind::QuadReg,
            &mut without,
            &SweepInputs {
                x: &x,
                c: Some(&c),
                h: &h0,
                coupling: CouplingMode::Derived,
            },
        )
        .unwrap();
        for k in 0..2 {
            assert_relative_eq!(with_c.relations[k], without.relations[k], epsilon = 1e-12);
        }
    }

    #[test]
    fn model3_with_zero_multipliers_matches_model1_limit() {
        // λ ≡ 0 in the linear constrained model vs λ_s = 0, 1/ρ = 0 in the
        // linear regularized model: identical slice systems
        let mut rng = ChaCha8Rng::seed_from_u64(50);
        let x = random_tensor(&mut rng, 4, 2, 0.4);
        let h = Hyperparams {
            p: Some(2),
            lambda_s: 0.0,
            rho: f64::INFINITY,
            ..Hyperparams::default()
        };
        let c = random_sym(&mut rng, 2);
        let mut lin_con = init_factors(ModelKind::LinearConstraint, 4, 2, &h, 9).unwrap();
        let mut lin_reg = FactorSet {
            entity: lin_con.entity.clone(),
            relations: lin_con.relations.clone(),
            multipliers: None,
        };
        update_relation_slice(
            ModelKind::LinearConstraint,
            &mut lin_con,
            0,
            &SweepInputs {
                x: &x,
                c: Some(&c),
                h: &h,
                coupling: CouplingMode::Derived,
            },
        )
        .unwrap();
        update_relation_slice(
            ModelKind::LinearReg,
            &mut lin_reg,
            0,
            &SweepInputs {
                x: &x,
                c: Some(&c),
                h: &h,
                coupling: CouplingMode::Derived,
            },
        )
        .unwrap();
        assert_relative_eq!(lin_con.relations[0], lin_reg.relations[0], epsilon = 1e-12);
    }

    #[test]
    fn literal_coupling_reproduces_printed_slice_rule() {
        let mut rng = ChaCha8Rng::seed_from_u64(71);
        let x = random_tensor(&mut rng, 4, 3, 0.4);
        let h = Hyperparams {
            p: Some(2),
            lambda_s: 0.6,
            rho: 2.0,
            ..Hyperparams::default()
        };
        let c = {
            let mut c = DMatrix::zeros(3, 3);
            for i in 0..3 {
                for j in 0..3 {
                    c[(i, j)] = rng.random::<f64>();
                }
            }
            c
        };
        let f0 = init_factors(ModelKind::LinearReg, 4, 3, &h, 5).unwrap();

        let mut literal = f0.clone();
        update_relation_slice(
            ModelKind::LinearReg,
            &mut literal,
            1,
            &SweepInputs {
                x: &x,
                c: Some(&c),
                h: &h,
                coupling: CouplingMode::Literal,
            },
        )
        .unwrap();
        // printed rule: ridge (λ_r + 1/ρ + λ_s Σᵢ C[k][i]) around vec(A1ᵀX_kA2)
        let (a1, a2) = match &f0.entity {
            EntityFactors::Linear { a1, a2 } => (a1.clone(), a2.clone()),
            _ => unreachable!(),
        };
        let proj = a1.transpose() * slice_mul(x.slice(1).unwrap(), &a2, 4);
        let row_sum: f64 = (0..3).map(|i| c[(1, i)]).sum();
        let alpha = h.lambda_r + 0.5 + h.lambda_s * row_sum;
        let expect = crate::models::kron::tests::dense_kron_solve(
            &(a1.transpose() * &a1),
            &(a2.transpose() * &a2),
            alpha,
            &proj,
        );
        assert_relative_eq!(literal.relations[1], expect, max_relative = 1e-8);

        // and it differs from the gradient-derived rule when λ_s > 0
        let mut derived = f0.clone();
        update_relation_slice(
            ModelKind::LinearReg,
            &mut derived,
            1,
            &SweepInputs {
                x: &x,
                c: Some(&c),
                h: &h,
                coupling: CouplingMode::Derived,
            },
        )
        .unwrap();
        assert!((&derived.relations[1] - &literal.relations[1]).norm() > 1e-6);
    }

    #[test]
    fn relabeling_entities_commutes_with_quadratic_sweeps() {
        let mut rng = ChaCha8Rng::seed_from_u64(61);
        let ne = 5;
        let x = random_tensor(&mut rng, ne, 2, 0.3);
        let perm: Vec<usize> = vec![3, 0, 4, 1, 2];
        // permuted tensor
        let mut kg = KnowledgeGraph::default();
        for e in 0..ne {
            kg.insert(&format!("e{e}"), "r0", &format!("e{e}"));
            kg.insert(&format!("e{e}"), "r1", &format!("e{e}"));
        }
        let mut permuted = Vec::new();
        for (k, slice) in x.slices().iter().enumerate() {
            for &(i, j) in slice {
                permuted.push((perm[i as usize] as u32, k as u32, perm[j as usize] as u32));
            }
        }
        let xp = build_tensor(&kg.with_triples(permuted)).unwrap();

        let h = Hyperparams {
            p: Some(2),
            ..Hyperparams::default()
        };
        let f0 = init_factors(ModelKind::Rescal, ne, 2, &h, 77).unwrap();
        let a0 = match &f0.entity {
            EntityFactors::Quadratic(a) => a.clone(),
            _ => unreachable!(),
        };
        let mut f = f0.clone();
        let mut fp = FactorSet {
            entity: EntityFactors::Quadratic(DMatrix::from_fn(ne, 2, |i, j| {
                // row perm[i] of the permuted factors equals row i of the originals
                let src = perm.iter().position(|&t| t == i).unwrap();
                a0[(src, j)]
            })),
            relations: f0.relations.clone(),
            multipliers: None,
        };
        // permute rows the forward way instead: A'[perm[i]] = A[i]
        let mut ap = DMatrix::zeros(ne, 2);
        for i in 0..ne {
            for j in 0..2 {
                ap[(perm[i], j)] = a0[(i, j)];
            }
        }
        fp.entity = EntityFactors::Quadratic(ap);

        let inp = SweepInputs {
            x: &x,
            c: None,
            h: &h,
            coupling: CouplingMode::Derived,
        };
        let inp_p = SweepInputs {
            x: &xp,
            c: None,
            h: &h,
            coupling: CouplingMode::Derived,
        };
        sweep(ModelKind::Rescal, &mut f, &inp).unwrap();
        sweep(ModelKind::Rescal, &mut fp, &inp_p).unwrap();
        let a = match &f.entity {
            EntityFactors::Quadratic(a) => a.clone(),
            _ => unreachable!(),
        };
        let apn = match &fp.entity {
            EntityFactors::Quadratic(a) => a.clone(),
            _ => unreachable!(),
        };
        for i in 0..ne {
            for j in 0..2 {
                assert_relative_eq!(apn[(perm[i], j)], a[(i, j)], epsilon = 1e-9);
            }
        }
        for k in 0..2 {
            assert_relative_eq!(fp.relations[k], f.relations[k], epsilon = 1e-9);
        }
    }
}
