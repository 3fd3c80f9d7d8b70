//! Factor sets, scoring, and the per-model objective.
//!
//! All six models reconstruct each relation slice as X_k ≈ A_α R_k A_βᵀ.
//! The quadratic family uses a single entity matrix A on both sides; the
//! linear family splits it into A1 (subject side) and A2 (object side) tied
//! together by a penalty λ_e‖A1 − A2‖², which makes every block subproblem
//! linear. Constrained models additionally carry a matrix of Lagrange
//! multipliers λᵢⱼ enforcing ‖Rᵢ − Rⱼ‖² = 1 − Cᵢⱼ.

mod kron;
mod sweeps;

pub use kron::{kron_ridge_solve, KronRidgeSolver, SolveFlags};
pub use sweeps::{
    block_sequence, sweep, update_block, update_entity_block, update_multipliers,
    update_relation_slice, Block, CouplingMode, SweepInputs, SweepOutcome,
};

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::graph::SparseTensor3;
use crate::similarity::weighted_slice_distance;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ModelKind {
    Rescal,
    NnRescal,
    QuadReg,
    QuadConstraint,
    LinearReg,
    LinearConstraint,
}

impl ModelKind {
    pub const ALL: [ModelKind; 6] = [
        ModelKind::Rescal,
        ModelKind::NnRescal,
        ModelKind::QuadReg,
        ModelKind::QuadConstraint,
        ModelKind::LinearReg,
        ModelKind::LinearConstraint,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ModelKind::Rescal => "rescal",
            ModelKind::NnRescal => "nn_rescal",
            ModelKind::QuadReg => "quad_reg",
            ModelKind::QuadConstraint => "quad_constraint",
            ModelKind::LinearReg => "linear_reg",
            ModelKind::LinearConstraint => "linear_constraint",
        }
    }

    /// Linear models split the entity factor into A1/A2.
    pub fn is_linear(self) -> bool {
        matches!(self, ModelKind::LinearReg | ModelKind::LinearConstraint)
    }

    /// Constrained models carry Lagrange multipliers.
    pub fn is_constrained(self) -> bool {
        matches!(
            self,
            ModelKind::QuadConstraint | ModelKind::LinearConstraint
        )
    }

    /// Whether the model consumes a relation-similarity matrix.
    pub fn uses_similarity(self) -> bool {
        !matches!(self, ModelKind::Rescal | ModelKind::NnRescal)
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "rescal" => Ok(ModelKind::Rescal),
            "nn_rescal" => Ok(ModelKind::NnRescal),
            "quad_reg" => Ok(ModelKind::QuadReg),
            "quad_constraint" => Ok(ModelKind::QuadConstraint),
            "linear_reg" => Ok(ModelKind::LinearReg),
            "linear_constraint" => Ok(ModelKind::LinearConstraint),
            other => Err(Error::InvalidArgument(format!(
                "unknown model kind {other:?} (expected one of: rescal, nn_rescal, quad_reg, \
                 quad_constraint, linear_reg, linear_constraint)"
            ))),
        }
    }
}

/// Regularization weights and solver knobs shared by all models.
///
/// `rho` may be `f64::INFINITY`, which zeroes the proximal term (1/ρ = 0).
#[derive(Debug, Clone, PartialEq)]
pub struct Hyperparams {
    /// Embedding rank; `None` means "number of relations".
    pub p: Option<usize>,
    /// Entity embedding regularizer λ_A.
    pub lambda_a: f64,
    /// Relation embedding regularizer λ_r.
    pub lambda_r: f64,
    /// Penalty λ_e on ‖A1 − A2‖² (linear models).
    pub lambda_e: f64,
    /// Similarity regularizer λ_s (regularized models).
    pub lambda_s: f64,
    /// Per-side overrides of λ_A for A1/A2; default to λ_A.
    pub lambda_a1: Option<f64>,
    pub lambda_a2: Option<f64>,
    /// Proximal parameter ρ of the convergent linear model.
    pub rho: f64,
    /// Multiplier update damping η in (0, 1]; 1 is the direct assignment
    /// λᵢⱼ ← max(0, ‖Rᵢ − Rⱼ‖² + Cᵢⱼ − 1).
    pub lagrange_step: f64,
}

impl Default for Hyperparams {
    fn default() -> Self {
        Hyperparams {
            p: None,
            lambda_a: 0.1,
            lambda_r: 0.1,
            lambda_e: 1.0,
            lambda_s: 0.1,
            lambda_a1: None,
            lambda_a2: None,
            rho: f64::INFINITY,
            lagrange_step: 1.0,
        }
    }
}

impl Hyperparams {
    pub fn rho_inv(&self) -> f64 {
        if self.rho.is_infinite() {
            0.0
        } else {
            1.0 / self.rho
        }
    }

    pub fn lambda_a1(&self) -> f64 {
        self.lambda_a1.unwrap_or(self.lambda_a)
    }

    pub fn lambda_a2(&self) -> f64 {
        self.lambda_a2.unwrap_or(self.lambda_a)
    }

    pub fn rank_for(&self, n_relations: usize) -> usize {
        self.p.unwrap_or(n_relations)
    }

    pub fn validate(&self) -> Result<()> {
        let named = [
            ("lambda_a", self.lambda_a),
            ("lambda_r", self.lambda_r),
            ("lambda_e", self.lambda_e),
            ("lambda_s", self.lambda_s),
            ("lambda_a1", self.lambda_a1()),
            ("lambda_a2", self.lambda_a2()),
        ];
        for (name, v) in named {
            if !(v >= 0.0) {
                return Err(Error::InvalidArgument(format!(
                    "{name} must be nonnegative, got {v}"
                )));
            }
        }
        if !(self.rho > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "rho must be positive (or infinity), got {}",
                self.rho
            )));
        }
        if !(self.lagrange_step > 0.0 && self.lagrange_step <= 1.0) {
            return Err(Error::InvalidArgument(format!(
                "lagrange_step must be in (0, 1], got {}",
                self.lagrange_step
            )));
        }
        if self.p == Some(0) {
            return Err(Error::InvalidArgument("rank p must be at least 1".into()));
        }
        Ok(())
    }
}

/// Entity-side factors: one shared matrix or a split pair.
#[derive(Debug, Clone, PartialEq)]
pub enum EntityFactors {
    Quadratic(DMatrix<f64>),
    Linear { a1: DMatrix<f64>, a2: DMatrix<f64> },
}

impl EntityFactors {
    pub fn n_entities(&self) -> usize {
        match self {
            EntityFactors::Quadratic(a) => a.nrows(),
            EntityFactors::Linear { a1, .. } => a1.nrows(),
        }
    }

    pub fn rank(&self) -> usize {
        match self {
            EntityFactors::Quadratic(a) => a.ncols(),
            EntityFactors::Linear { a1, .. } => a1.ncols(),
        }
    }
}

/// Entity factors, stacked relation slices, and (for constrained models)
/// the multiplier matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct FactorSet {
    pub entity: EntityFactors,
    pub relations: Vec<DMatrix<f64>>,
    pub multipliers: Option<DMatrix<f64>>,
}

impl FactorSet {
    pub fn n_entities(&self) -> usize {
        self.entity.n_entities()
    }

    pub fn rank(&self) -> usize {
        self.entity.rank()
    }

    pub fn n_relations(&self) -> usize {
        self.relations.len()
    }

    pub fn is_finite(&self) -> bool {
        let ent = match &self.entity {
            EntityFactors::Quadratic(a) => a.iter().all(|v| v.is_finite()),
            EntityFactors::Linear { a1, a2 } => {
                a1.iter().all(|v| v.is_finite()) && a2.iter().all(|v| v.is_finite())
            }
        };
        ent && self
            .relations
            .iter()
            .all(|r| r.iter().all(|v| v.is_finite()))
    }

    /// All unknowns as one flat vector: entity factors first (A, or A1 then
    /// A2), then each R_k in order, each matrix row-major. This is the order
    /// the convergence measure δ is computed over.
    pub fn flatten(&self) -> Vec<f64> {
        let mut z = Vec::new();
        let mut push = |m: &DMatrix<f64>| {
            for i in 0..m.nrows() {
                for j in 0..m.ncols() {
                    z.push(m[(i, j)]);
                }
            }
        };
        match &self.entity {
            EntityFactors::Quadratic(a) => push(a),
            EntityFactors::Linear { a1, a2 } => {
                push(a1);
                push(a2);
            }
        }
        for r in &self.relations {
            push(r);
        }
        z
    }

    /// Bilinear score of one triple: aₛᵀ R_r a_o (quadratic) or
    /// a1ₛᵀ R_r a2_o (linear).
    pub fn score(&self, s: usize, r: usize, o: usize) -> Result<f64> {
        let ne = self.n_entities();
        if s >= ne || o >= ne {
            return Err(Error::IndexOutOfRange(format!(
                "entity {} of {ne}",
                s.max(o)
            )));
        }
        let rel = self.relations.get(r).ok_or_else(|| {
            Error::IndexOutOfRange(format!("relation {r} of {}", self.n_relations()))
        })?;
        let (left, right) = match &self.entity {
            EntityFactors::Quadratic(a) => (a.row(s), a.row(o)),
            EntityFactors::Linear { a1, a2 } => (a1.row(s), a2.row(o)),
        };
        Ok((left * rel * right.transpose())[(0, 0)])
    }
}

/// Random cold-start factors: entries i.i.d. uniform on [0, 1) scaled by
/// 1/√p, multipliers at zero. Deterministic per seed; fill order matches
/// [`FactorSet::flatten`].
pub fn init_factors(
    kind: ModelKind,
    n_entities: usize,
    n_relations: usize,
    h: &Hyperparams,
    seed: u64,
) -> Result<FactorSet> {
    if n_entities == 0 || n_relations == 0 {
        return Err(Error::InvalidArgument(
            "cannot initialize factors for an empty tensor".into(),
        ));
    }
    h.validate()?;
    let p = h.rank_for(n_relations);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let scale = 1.0 / (p as f64).sqrt();
    let mut draw = |rows: usize, cols: usize| {
        let mut m = DMatrix::zeros(rows, cols);
        for i in 0..rows {
            for j in 0..cols {
                m[(i, j)] = rng.random::<f64>() * scale;
            }
        }
        m
    };
    let entity = if kind.is_linear() {
        let a1 = draw(n_entities, p);
        let a2 = draw(n_entities, p);
        EntityFactors::Linear { a1, a2 }
    } else {
        EntityFactors::Quadratic(draw(n_entities, p))
    };
    let relations = (0..n_relations).map(|_| draw(p, p)).collect();
    let multipliers = kind
        .is_constrained()
        .then(|| DMatrix::zeros(n_relations, n_relations));
    Ok(FactorSet {
        entity,
        relations,
        multipliers,
    })
}

/// Collapse a linear factor set onto the quadratic objective's point
/// (R, (A1 + A2)/2).
pub fn merge_entity_factors(f: &FactorSet) -> Result<FactorSet> {
    match &f.entity {
        EntityFactors::Linear { a1, a2 } => Ok(FactorSet {
            entity: EntityFactors::Quadratic((a1 + a2) * 0.5),
            relations: f.relations.clone(),
            multipliers: None,
        }),
        EntityFactors::Quadratic(_) => Err(Error::InvalidArgument(
            "merge_entity_factors expects a linear factor set".into(),
        )),
    }
}

/// X_k · M for a sparse slice: row i of the result accumulates M's row j for
/// every entry (i, j).
pub(crate) fn slice_mul(slice: &[(u32, u32)], m: &DMatrix<f64>, n_rows: usize) -> DMatrix<f64> {
    let mut out = DMatrix::zeros(n_rows, m.ncols());
    for &(i, j) in slice {
        for c in 0..m.ncols() {
            out[(i as usize, c)] += m[(j as usize, c)];
        }
    }
    out
}

/// X_kᵀ · M.
pub(crate) fn slice_tmul(slice: &[(u32, u32)], m: &DMatrix<f64>, n_rows: usize) -> DMatrix<f64> {
    let mut out = DMatrix::zeros(n_rows, m.ncols());
    for &(i, j) in slice {
        for c in 0..m.ncols() {
            out[(j as usize, c)] += m[(i as usize, c)];
        }
    }
    out
}

/// Lᵀ X_k M without densifying X_k.
pub(crate) fn project_slice(
    left: &DMatrix<f64>,
    slice: &[(u32, u32)],
    right: &DMatrix<f64>,
) -> DMatrix<f64> {
    left.transpose() * slice_mul(slice, right, left.nrows())
}

/// Per-term values of a model objective. Terms that do not apply to a model
/// are zero.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ObjectiveBreakdown {
    /// ½ Σ_k ‖X_k − A_α R_k A_βᵀ‖²
    pub reconstruction: f64,
    /// Frobenius regularizers, incl. ½λ_e‖A1 − A2‖² for linear models.
    pub regularization: f64,
    /// ½ λ_s Σ_{k,i} C_{k,i} ‖R_k − R_i‖²
    pub similarity: f64,
    /// (1/ρ)(‖A1‖² + ‖A2‖² + Σ_k ‖R_k‖²)
    pub proximal: f64,
    /// Σ_{i≠j} λᵢⱼ (1 − ‖Rᵢ − Rⱼ‖² + Cᵢⱼ)
    pub lagrangian: f64,
}

impl ObjectiveBreakdown {
    pub fn total(&self) -> f64 {
        self.reconstruction
            + self.regularization
            + self.similarity
            + self.proximal
            + self.lagrangian
    }
}

pub(crate) fn check_model_shapes(
    kind: ModelKind,
    f: &FactorSet,
    x: &SparseTensor3,
    c: Option<&DMatrix<f64>>,
) -> Result<()> {
    if kind.is_linear() != matches!(f.entity, EntityFactors::Linear { .. }) {
        return Err(Error::ShapeMismatch(format!(
            "{kind} expects {} entity factors",
            if kind.is_linear() {
                "split A1/A2"
            } else {
                "a single A"
            }
        )));
    }
    if kind.is_constrained() != f.multipliers.is_some() {
        return Err(Error::ShapeMismatch(format!(
            "{kind} {} Lagrange multipliers",
            if kind.is_constrained() {
                "requires"
            } else {
                "does not carry"
            }
        )));
    }
    if f.n_entities() != x.n_entities() || f.n_relations() != x.n_relations() {
        return Err(Error::ShapeMismatch(format!(
            "factors are {}×·×{} but tensor is {}×·×{}",
            f.n_entities(),
            f.n_relations(),
            x.n_entities(),
            x.n_relations()
        )));
    }
    let p = f.rank();
    for r in &f.relations {
        if r.shape() != (p, p) {
            return Err(Error::ShapeMismatch(format!(
                "relation slice is {}×{}, expected {p}×{p}",
                r.nrows(),
                r.ncols()
            )));
        }
    }
    if kind.uses_similarity() {
        match c {
            None => {
                return Err(Error::InvalidArgument(format!(
                    "{kind} requires a similarity matrix"
                )))
            }
            Some(c) => {
                if c.nrows() != x.n_relations() || c.ncols() != x.n_relations() {
                    return Err(Error::ShapeMismatch(format!(
                        "similarity matrix is {}×{} but tensor has {} relations",
                        c.nrows(),
                        c.ncols(),
                        x.n_relations()
                    )));
                }
            }
        }
    }
    Ok(())
}

/// Full objective of `kind` at the given factors, reported term by term.
pub fn objective_value(
    kind: ModelKind,
    f: &FactorSet,
    x: &SparseTensor3,
    c: Option<&DMatrix<f64>>,
    h: &Hyperparams,
) -> Result<ObjectiveBreakdown> {
    check_model_shapes(kind, f, x, c)?;
    h.validate()?;
    let mut out = ObjectiveBreakdown::default();

    let (left, right) = match &f.entity {
        EntityFactors::Quadratic(a) => (a, a),
        EntityFactors::Linear { a1, a2 } => (a1, a2),
    };
    let gl = left.transpose() * left;
    let gr = right.transpose() * right;
    for (k, rk) in f.relations.iter().enumerate() {
        let slice = x.slice(k)?;
        let proj = project_slice(left, slice, right);
        let lin = proj.dot(rk);
        let quad = (&gl * rk * &gr).dot(rk);
        out.reconstruction += 0.5 * (slice.len() as f64 - 2.0 * lin + quad);
    }

    let sum_r_sq: f64 = f.relations.iter().map(|r| r.norm_squared()).sum();
    match &f.entity {
        EntityFactors::Quadratic(a) => {
            out.regularization = 0.5 * h.lambda_a * a.norm_squared() + 0.5 * h.lambda_r * sum_r_sq;
        }
        EntityFactors::Linear { a1, a2 } => {
            out.regularization = 0.5 * h.lambda_a1() * a1.norm_squared()
                + 0.5 * h.lambda_a2() * a2.norm_squared()
                + 0.5 * h.lambda_e * (a1 - a2).norm_squared()
                + 0.5 * h.lambda_r * sum_r_sq;
            if kind == ModelKind::LinearReg {
                out.proximal = h.rho_inv() * (a1.norm_squared() + a2.norm_squared() + sum_r_sq);
            }
        }
    }

    match kind {
        ModelKind::QuadReg | ModelKind::LinearReg => {
            if h.lambda_s != 0.0 {
                let c = c.expect("checked above");
                out.similarity = 0.5 * h.lambda_s * weighted_slice_distance(&f.relations, c)?;
            }
        }
        ModelKind::QuadConstraint | ModelKind::LinearConstraint => {
            let c = c.expect("checked above");
            let lam = f.multipliers.as_ref().expect("checked above");
            let n = f.relations.len();
            for i in 0..n {
                for j in 0..n {
                    if i == j || lam[(i, j)] == 0.0 {
                        continue;
                    }
                    let d = (&f.relations[i] - &f.relations[j]).norm_squared();
                    out.lagrangian += lam[(i, j)] * (1.0 - d + c[(i, j)]);
                }
            }
        }
        _ => {}
    }
    Ok(out)
}

/// Write one CSV per factor matrix into `dir` (A.csv or A1.csv/A2.csv,
/// R_000.csv..., multipliers.csv when present). Values round-trip exactly.
pub fn write_factor_csvs(dir: &Path, f: &FactorSet) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::Io {
        path: dir.to_owned(),
        source: e,
    })?;
    let write = |name: &str, m: &DMatrix<f64>| -> Result<()> {
        let path = dir.join(name);
        let mut text = String::new();
        for i in 0..m.nrows() {
            let row: Vec<String> = (0..m.ncols()).map(|j| format!("{:?}", m[(i, j)])).collect();
            text.push_str(&row.join(","));
            text.push('\n');
        }
        std::fs::write(&path, text).map_err(|e| Error::Io { path, source: e })
    };
    match &f.entity {
        EntityFactors::Quadratic(a) => write("A.csv", a)?,
        EntityFactors::Linear { a1, a2 } => {
            write("A1.csv", a1)?;
            write("A2.csv", a2)?;
        }
    }
    for (k, r) in f.relations.iter().enumerate() {
        write(&format!("R_{k:03}.csv"), r)?;
    }
    if let Some(lam) = &f.multipliers {
        write("multipliers.csv", lam)?;
    }
    Ok(())
}

/// Read factors written by [`write_factor_csvs`].
pub fn read_factor_csvs(dir: &Path) -> Result<FactorSet> {
    let read = |name: &str| -> Result<DMatrix<f64>> {
        let path = dir.join(name);
        let text = std::fs::read_to_string(&path).map_err(|e| Error::Io {
            path: path.clone(),
            source: e,
        })?;
        let mut rows: Vec<Vec<f64>> = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            if line.is_empty() {
                continue;
            }
            let row: std::result::Result<Vec<f64>, _> =
                line.split(',').map(str::parse::<f64>).collect();
            let row = row.map_err(|e| {
                Error::InvalidArgument(format!("{}:{}: {e}", path.display(), lineno + 1))
            })?;
            rows.push(row);
        }
        if rows.is_empty() {
            return Err(Error::EmptyInput(path));
        }
        let cols = rows[0].len();
        if rows.iter().any(|r| r.len() != cols) {
            return Err(Error::ShapeMismatch(format!(
                "ragged rows in {}",
                path.display()
            )));
        }
        Ok(DMatrix::from_fn(rows.len(), cols, |i, j| rows[i][j]))
    };
    let entity = if dir.join("A.csv").exists() {
        EntityFactors::Quadratic(read("A.csv")?)
    } else {
        EntityFactors::Linear {
            a1: read("A1.csv")?,
            a2: read("A2.csv")?,
        }
    };
    let mut relations = Vec::new();
    loop {
        let name = format!("R_{:03}.csv", relations.len());
        if !dir.join(&name).exists() {
            break;
        }
        relations.push(read(&name)?);
    }
    if relations.is_empty() {
        return Err(Error::InvalidArgument(format!(
            "no relation factor files in {}",
            dir.display()
        )));
    }
    let multipliers = if dir.join("multipliers.csv").exists() {
        Some(read("multipliers.csv")?)
    } else {
        None
    };
    Ok(FactorSet {
        entity,
        relations,
        multipliers,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{build_tensor, KnowledgeGraph};
    use approx::assert_relative_eq;

    fn tensor_1x1x1() -> SparseTensor3 {
        let mut kg = KnowledgeGraph::default();
        kg.insert("a", "r", "a");
        build_tensor(&kg).unwrap()
    }

    #[test]
    fn init_is_deterministic_and_bounded() {
        let h = Hyperparams {
            p: Some(4),
            ..Hyperparams::default()
        };
        let a = init_factors(ModelKind::Rescal, 5, 3, &h, 9).unwrap();
        let b = init_factors(ModelKind::Rescal, 5, 3, &h, 9).unwrap();
        assert_eq!(a, b);
        // uniform [0,1) scaled by 1/√4
        for v in a.flatten() {
            assert!((0.0..0.5).contains(&v));
        }
        let lin = init_factors(ModelKind::LinearConstraint, 5, 3, &h, 9).unwrap();
        assert!(matches!(lin.entity, EntityFactors::Linear { .. }));
        assert_eq!(lin.multipliers.as_ref().unwrap().nrows(), 3);
    }

    #[test]
    fn score_matches_explicit_arithmetic() {
        // unit-vector rows with identity R: score(s, r, o) = [s == o]
        let a = DMatrix::identity(3, 3);
        let f = FactorSet {
            entity: EntityFactors::Quadratic(a),
            relations: vec![DMatrix::identity(3, 3)],
            multipliers: None,
        };
        assert_eq!(f.score(1, 0, 1).unwrap(), 1.0);
        assert_eq!(f.score(1, 0, 2).unwrap(), 0.0);
        assert!(f.score(3, 0, 0).is_err());
        assert!(f.score(0, 1, 0).is_err());

        let a1 = DMatrix::from_row_slice(3, 2, &[0.3, -1.0, 0.2, 0.5, 1.5, 0.0]);
        let a2 = DMatrix::from_row_slice(3, 2, &[1.0, 2.0, -0.5, 0.25, 0.0, 1.0]);
        let r = DMatrix::from_row_slice(2, 2, &[0.5, 1.0, -2.0, 0.125]);
        let f = FactorSet {
            entity: EntityFactors::Linear {
                a1: a1.clone(),
                a2: a2.clone(),
            },
            relations: vec![r.clone()],
            multipliers: None,
        };
        let mut manual = 0.0;
        for u in 0..2 {
            for v in 0..2 {
                manual += a1[(0, u)] * r[(u, v)] * a2[(2, v)];
            }
        }
        assert_relative_eq!(f.score(0, 0, 2).unwrap(), manual);
    }

    #[test]
    fn zero_relation_annihilates() {
        let f = FactorSet {
            entity: EntityFactors::Quadratic(DMatrix::from_element(3, 2, 0.7)),
            relations: vec![DMatrix::zeros(2, 2)],
            multipliers: None,
        };
        for s in 0..3 {
            for o in 0..3 {
                assert_eq!(f.score(s, 0, o).unwrap(), 0.0);
            }
        }
    }

    #[test]
    fn objective_zero_factors_counts_entries() {
        let mut kg = KnowledgeGraph::default();
        kg.insert("a", "r1", "b");
        kg.insert("b", "r1", "c");
        kg.insert("a", "r2", "c");
        let x = build_tensor(&kg).unwrap();
        let f = FactorSet {
            entity: EntityFactors::Quadratic(DMatrix::zeros(3, 2)),
            relations: vec![DMatrix::zeros(2, 2); 2],
            multipliers: None,
        };
        let h = Hyperparams::default();
        let b = objective_value(ModelKind::Rescal, &f, &x, None, &h).unwrap();
        assert_relative_eq!(b.reconstruction, 1.5);
        assert_eq!(b.regularization, 0.0);
        assert_eq!(b.total(), 1.5);
    }

    #[test]
    fn objective_scalar_instance() {
        // X = [1], A1 = [2], A2 = [1], R = [0.5], λ_A = λ_e = λ_r = 1, ρ = ∞
        let x = tensor_1x1x1();
        let f = FactorSet {
            entity: EntityFactors::Linear {
                a1: DMatrix::from_element(1, 1, 2.0),
                a2: DMatrix::from_element(1, 1, 1.0),
            },
            relations: vec![DMatrix::from_element(1, 1, 0.5)],
            multipliers: None,
        };
        let h = Hyperparams {
            lambda_a: 1.0,
            lambda_e: 1.0,
            lambda_r: 1.0,
            lambda_s: 0.0,
            rho: f64::INFINITY,
            ..Hyperparams::default()
        };
        let c = DMatrix::zeros(1, 1);
        let b = objective_value(ModelKind::LinearReg, &f, &x, Some(&c), &h).unwrap();
        assert_relative_eq!(b.reconstruction, 0.0);
        assert_relative_eq!(b.regularization, 3.125);
        assert_eq!(b.similarity, 0.0);
        assert_eq!(b.proximal, 0.0);
    }

    #[test]
    fn objective_lambda_s_zero_kills_similarity_term() {
        let x = tensor_1x1x1();
        let f = init_factors(ModelKind::QuadReg, 1, 1, &Hyperparams::default(), 1).unwrap();
        let h = Hyperparams {
            lambda_s: 0.0,
            ..Hyperparams::default()
        };
        let c = DMatrix::from_element(1, 1, 1.0);
        let b = objective_value(ModelKind::QuadReg, &f, &x, Some(&c), &h).unwrap();
        assert_eq!(b.similarity, 0.0);
    }

    #[test]
    fn merge_averages_entity_factors() {
        let a2 = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 3.0, 4.0]);
        let f = FactorSet {
            entity: EntityFactors::Linear {
                a1: &a2 * 2.0,
                a2: a2.clone(),
            },
            relations: vec![DMatrix::identity(2, 2)],
            multipliers: None,
        };
        let merged = merge_entity_factors(&f).unwrap();
        match &merged.entity {
            EntityFactors::Quadratic(a) => assert_relative_eq!(*a, &a2 * 1.5),
            _ => panic!("expected quadratic"),
        }
        assert!(merge_entity_factors(&merged).is_err());
    }

    #[test]
    fn merged_score_expands_bilinearly() {
        let h = Hyperparams {
            p: Some(3),
            ..Hyperparams::default()
        };
        let f = init_factors(ModelKind::LinearReg, 4, 2, &h, 3).unwrap();
        let merged = merge_entity_factors(&f).unwrap();
        let (a1, a2) = match &f.entity {
            EntityFactors::Linear { a1, a2 } => (a1, a2),
            _ => unreachable!(),
        };
        for (s, r, o) in [(0usize, 0usize, 1usize), (2, 1, 3)] {
            let sum_s = a1.row(s) + a2.row(s);
            let sum_o = a1.row(o) + a2.row(o);
            let expect = 0.25 * (sum_s * &f.relations[r] * sum_o.transpose())[(0, 0)];
            assert_relative_eq!(merged.score(s, r, o).unwrap(), expect, epsilon = 1e-12);
        }
    }

    #[test]
    fn factor_csv_roundtrip() {
        let h = Hyperparams {
            p: Some(3),
            ..Hyperparams::default()
        };
        let f = init_factors(ModelKind::QuadConstraint, 4, 2, &h, 11).unwrap();
        let dir = tempfile::tempdir().unwrap();
        write_factor_csvs(dir.path(), &f).unwrap();
        let back = read_factor_csvs(dir.path()).unwrap();
        assert_eq!(f, back);
    }
}
