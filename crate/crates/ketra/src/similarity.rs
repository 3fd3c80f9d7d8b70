//! Relation-similarity matrices.
//!
//! Each entry C(i, j) scores how similar two relations are by the Jaccard
//! overlap of the entity sets they touch. Five encodings are supported,
//! differing in which sets are compared:
//!
//!   symmetric            (S(Xᵢ) ∪ O(Xᵢ)) vs (S(Xⱼ) ∪ O(Xⱼ))
//!   agency               S(Xᵢ) vs S(Xⱼ)
//!   patient              O(Xᵢ) vs O(Xⱼ)
//!   transitivity         S(Xᵢ) vs O(Xⱼ)
//!   reverse_transitivity O(Xᵢ) vs S(Xⱼ)
//!
//! where S(X_k)/O(X_k) are the subjects/objects appearing in slice k.
//! The Laplacian square root S = (deg(C) − C)^{1/2} turns the weighted
//! pairwise slice distance Σᵢⱼ Cᵢⱼ‖Rᵢ − Rⱼ‖² into the mode-3 product form
//! 2‖R ×₃ S‖², which is what the convergence analysis works with.

use std::collections::BTreeSet;
use std::path::Path;
use std::str::FromStr;

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{Error, Result};
use crate::graph::{Dictionary, SparseTensor3};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Encoding {
    Symmetric,
    Agency,
    Patient,
    Transitivity,
    ReverseTransitivity,
}

impl Encoding {
    pub const ALL: [Encoding; 5] = [
        Encoding::Symmetric,
        Encoding::Agency,
        Encoding::Patient,
        Encoding::Transitivity,
        Encoding::ReverseTransitivity,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Encoding::Symmetric => "symmetric",
            Encoding::Agency => "agency",
            Encoding::Patient => "patient",
            Encoding::Transitivity => "transitivity",
            Encoding::ReverseTransitivity => "reverse_transitivity",
        }
    }
}

impl FromStr for Encoding {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "symmetric" => Ok(Encoding::Symmetric),
            "agency" => Ok(Encoding::Agency),
            "patient" => Ok(Encoding::Patient),
            "transitivity" => Ok(Encoding::Transitivity),
            "reverse_transitivity" => Ok(Encoding::ReverseTransitivity),
            other => Err(Error::InvalidArgument(format!(
                "unknown similarity encoding {other:?} (expected one of: symmetric, agency, \
                 patient, transitivity, reverse_transitivity)"
            ))),
        }
    }
}

/// Subject and object sets of one relation slice.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RelationProfile {
    pub subjects: BTreeSet<u32>,
    pub objects: BTreeSet<u32>,
}

pub fn relation_profile(t: &SparseTensor3, k: usize) -> Result<RelationProfile> {
    let slice = t.slice(k)?;
    Ok(RelationProfile {
        subjects: slice.iter().map(|&(i, _)| i).collect(),
        objects: slice.iter().map(|&(_, j)| j).collect(),
    })
}

fn jaccard(a: &BTreeSet<u32>, b: &BTreeSet<u32>) -> f64 {
    let union = a.union(b).count();
    if union == 0 {
        // both sets empty: no evidence of similarity
        return 0.0;
    }
    a.intersection(b).count() as f64 / union as f64
}

/// N_r × N_r relation-similarity matrix under one encoding.
#[derive(Debug, Clone)]
pub struct SimilarityMatrix {
    pub encoding: Encoding,
    c: DMatrix<f64>,
}

impl SimilarityMatrix {
    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.c
    }

    pub fn n_relations(&self) -> usize {
        self.c.nrows()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.c[(i, j)]
    }

    /// Laplacian square root S = (deg(C) − C)^{1/2}, with C symmetrized as
    /// (C + Cᵀ)/2 first so the transitivity encodings are usable too.
    pub fn laplacian_sqrt(&self) -> Result<DMatrix<f64>> {
        laplacian_sqrt(&self.c)
    }

    /// From an explicit matrix (tests, external similarity sources).
    pub fn from_matrix(encoding: Encoding, c: DMatrix<f64>) -> Result<SimilarityMatrix> {
        if c.nrows() != c.ncols() {
            return Err(Error::ShapeMismatch(format!(
                "similarity matrix must be square, got {}×{}",
                c.nrows(),
                c.ncols()
            )));
        }
        Ok(SimilarityMatrix { encoding, c })
    }

    /// Labeled CSV: header row/column carry the relation labels, entries are
    /// printed with 6 fractional digits for heatmap reproduction.
    pub fn write_csv(&self, path: &Path, relations: &Dictionary) -> Result<()> {
        let n = self.n_relations();
        let file = std::fs::File::create(path).map_err(|e| Error::Io {
            path: path.to_owned(),
            source: e,
        })?;
        let mut w = csv::Writer::from_writer(file);
        let io_err = |e: csv::Error| Error::Io {
            path: path.to_owned(),
            source: std::io::Error::other(e),
        };
        let mut header = vec![String::new()];
        header.extend(relations.labels().iter().cloned());
        w.write_record(&header).map_err(io_err)?;
        for i in 0..n {
            let mut row = vec![relations.label(i as u32).to_owned()];
            for j in 0..n {
                row.push(format!("{:.6}", self.c[(i, j)]));
            }
            w.write_record(&row).map_err(io_err)?;
        }
        w.flush().map_err(|e| Error::Io {
            path: path.to_owned(),
            source: e,
        })
    }
}

/// Compute C for all relation pairs of a tensor under one encoding.
/// Empty denominators score 0 by convention.
pub fn compute_similarity(t: &SparseTensor3, encoding: Encoding) -> Result<SimilarityMatrix> {
    let n = t.n_relations();
    if n == 0 {
        return Err(Error::InvalidArgument("tensor has no relations".into()));
    }
    let profiles: Vec<RelationProfile> = (0..n)
        .map(|k| relation_profile(t, k))
        .collect::<Result<_>>()?;
    let mut c = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            let (pi, pj) = (&profiles[i], &profiles[j]);
            c[(i, j)] = match encoding {
                Encoding::Symmetric => {
                    let a: BTreeSet<u32> = pi.subjects.union(&pi.objects).copied().collect();
                    let b: BTreeSet<u32> = pj.subjects.union(&pj.objects).copied().collect();
                    jaccard(&a, &b)
                }
                Encoding::Agency => jaccard(&pi.subjects, &pj.subjects),
                Encoding::Patient => jaccard(&pi.objects, &pj.objects),
                Encoding::Transitivity => jaccard(&pi.subjects, &pj.objects),
                Encoding::ReverseTransitivity => jaccard(&pi.objects, &pj.subjects),
            };
        }
    }
    Ok(SimilarityMatrix { encoding, c })
}

/// S = (deg(C̄) − C̄)^{1/2} for C̄ = (C + Cᵀ)/2, via symmetric
/// eigendecomposition. Eigenvalues in [−1e-8, 0) are clamped to zero;
/// anything more negative is a numerical error.
pub fn laplacian_sqrt(c: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if c.nrows() != c.ncols() {
        return Err(Error::ShapeMismatch(format!(
            "similarity matrix must be square, got {}×{}",
            c.nrows(),
            c.ncols()
        )));
    }
    let n = c.nrows();
    let sym = (c + c.transpose()) * 0.5;
    let mut lap = DMatrix::zeros(n, n);
    for i in 0..n {
        let deg: f64 = sym.row(i).iter().sum();
        for j in 0..n {
            lap[(i, j)] = if i == j { deg } else { 0.0 } - sym[(i, j)];
        }
    }
    let eig = SymmetricEigen::new(lap);
    let mut roots = eig.eigenvalues.clone();
    for v in roots.iter_mut() {
        if *v < -1e-8 {
            return Err(Error::Numerical(format!(
                "Laplacian has eigenvalue {v}, not positive semi-definite"
            )));
        }
        *v = v.max(0.0).sqrt();
    }
    let v = &eig.eigenvectors;
    Ok(v * DMatrix::from_diagonal(&roots) * v.transpose())
}

/// Σᵢⱼ Cᵢⱼ ‖Rᵢ − Rⱼ‖²_F over a stack of equally shaped slices.
pub fn weighted_slice_distance(slices: &[DMatrix<f64>], c: &DMatrix<f64>) -> Result<f64> {
    let n = slices.len();
    if c.nrows() != n || c.ncols() != n {
        return Err(Error::ShapeMismatch(format!(
            "similarity matrix is {}×{} but stack has {n} slices",
            c.nrows(),
            c.ncols()
        )));
    }
    for s in slices.iter().skip(1) {
        if s.shape() != slices[0].shape() {
            return Err(Error::ShapeMismatch("slices differ in shape".into()));
        }
    }
    let mut total = 0.0;
    for i in 0..n {
        for j in 0..n {
            if c[(i, j)] != 0.0 {
                let d = (&slices[i] - &slices[j]).norm_squared();
                total += c[(i, j)] * d;
            }
        }
    }
    Ok(total)
}

/// Same quantity through the Laplacian route: 2‖R ×₃ S‖²_F with
/// S = (deg(C̄) − C̄)^{1/2}. The factor 2 comes from the quadratic-form
/// identity xᵀ(deg(W) − W)x = ½ Σᵢⱼ wᵢⱼ(xᵢ − xⱼ)².
pub fn weighted_slice_distance_mode3(slices: &[DMatrix<f64>], c: &DMatrix<f64>) -> Result<f64> {
    let n = slices.len();
    if c.nrows() != n || c.ncols() != n {
        return Err(Error::ShapeMismatch(format!(
            "similarity matrix is {}×{} but stack has {n} slices",
            c.nrows(),
            c.ncols()
        )));
    }
    if n == 0 {
        return Ok(0.0);
    }
    let s = laplacian_sqrt(c)?;
    let (rows, cols) = slices[0].shape();
    let mut total = 0.0;
    for k in 0..n {
        let mut mixed = DMatrix::zeros(rows, cols);
        for m in 0..n {
            if slices[m].shape() != (rows, cols) {
                return Err(Error::ShapeMismatch("slices differ in shape".into()));
            }
            mixed += &slices[m] * s[(k, m)];
        }
        total += mixed.norm_squared();
    }
    Ok(2.0 * total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{build_tensor, KnowledgeGraph};
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn kg_from(triples: &[(&str, &str, &str)]) -> KnowledgeGraph {
        let mut kg = KnowledgeGraph::default();
        for (s, r, o) in triples {
            kg.insert(s, r, o);
        }
        kg
    }

    #[test]
    fn profile_of_small_slices() {
        let kg = kg_from(&[("a", "r1", "b"), ("b", "r1", "c"), ("x", "r2", "y")]);
        let t = build_tensor(&kg).unwrap();
        let p = relation_profile(&t, 0).unwrap();
        let a = kg.entities.get("a").unwrap();
        let b = kg.entities.get("b").unwrap();
        let c = kg.entities.get("c").unwrap();
        assert_eq!(p.subjects, BTreeSet::from([a, b]));
        assert_eq!(p.objects, BTreeSet::from([b, c]));
        assert!(relation_profile(&t, 5).is_err());
    }

    #[test]
    fn symmetric_and_transitivity_hand_cases() {
        // X1 = {(a,b)}, X2 = {(b,c)}
        let kg = kg_from(&[("a", "r1", "b"), ("b", "r2", "c")]);
        let t = build_tensor(&kg).unwrap();
        let sym = compute_similarity(&t, Encoding::Symmetric).unwrap();
        assert_relative_eq!(sym.get(0, 1), 1.0 / 3.0);
        assert_relative_eq!(sym.get(0, 0), 1.0);
        let tr = compute_similarity(&t, Encoding::Transitivity).unwrap();
        // S(X1) ∩ O(X2) = {} over S(X1) ∪ O(X2) = {a, c}
        assert_relative_eq!(tr.get(0, 1), 0.0);
        // S(X2) ∩ O(X1) = {b} over union {b}
        assert_relative_eq!(tr.get(1, 0), 1.0);
    }

    #[test]
    fn transpose_duality_of_transitivity() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..20 {
            let mut kg = KnowledgeGraph::default();
            for _ in 0..15 {
                let s = format!("e{}", rng.random_range(0..6u32));
                let r = format!("r{}", rng.random_range(0..4u32));
                let o = format!("e{}", rng.random_range(0..6u32));
                kg.insert(&s, &r, &o);
            }
            let t = build_tensor(&kg).unwrap();
            let fwd = compute_similarity(&t, Encoding::Transitivity).unwrap();
            let rev = compute_similarity(&t, Encoding::ReverseTransitivity).unwrap();
            assert_eq!(fwd.matrix().transpose(), *rev.matrix());
        }
    }

    #[test]
    fn laplacian_sqrt_identity_cases() {
        let c = DMatrix::identity(2, 2);
        let s = laplacian_sqrt(&c).unwrap();
        assert!(s.norm() < 1e-12);

        let ones = DMatrix::from_element(2, 2, 1.0);
        let s = laplacian_sqrt(&ones).unwrap();
        let expected = DMatrix::from_row_slice(2, 2, &[1.0, -1.0, -1.0, 1.0]) / 2f64.sqrt();
        assert_relative_eq!(s, expected, epsilon = 1e-10);
    }

    #[test]
    fn laplacian_sqrt_reconstructs() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..30 {
            let n = 3;
            let mut c = DMatrix::zeros(n, n);
            for i in 0..n {
                for j in i..n {
                    let v: f64 = rng.random();
                    c[(i, j)] = v;
                    c[(j, i)] = v;
                }
            }
            let s = laplacian_sqrt(&c).unwrap();
            let mut lap = DMatrix::zeros(n, n);
            for i in 0..n {
                let deg: f64 = c.row(i).iter().sum();
                for j in 0..n {
                    lap[(i, j)] = if i == j { deg } else { 0.0 } - c[(i, j)];
                }
            }
            let resid = (&s * &s - &lap).norm() / lap.norm().max(1.0);
            assert!(resid < 1e-8, "residual {resid}");
        }
    }

    #[test]
    fn slice_distance_trivial_cases() {
        let r = vec![DMatrix::from_element(2, 2, 0.5); 3];
        let c = DMatrix::from_element(3, 3, 0.7);
        assert_eq!(weighted_slice_distance(&r, &c).unwrap(), 0.0);

        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let r: Vec<DMatrix<f64>> = (0..3)
            .map(|_| DMatrix::from_fn(2, 2, |_, _| rng.random::<f64>()))
            .collect();
        let zero = DMatrix::zeros(3, 3);
        assert_eq!(weighted_slice_distance(&r, &zero).unwrap(), 0.0);
    }

    #[test]
    fn slice_distance_paths_agree() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for _ in 0..25 {
            let n = 3;
            let slices: Vec<DMatrix<f64>> = (0..n)
                .map(|_| DMatrix::from_fn(2, 2, |_, _| rng.random::<f64>()))
                .collect();
            let mut c = DMatrix::zeros(n, n);
            for i in 0..n {
                for j in i..n {
                    let v: f64 = rng.random();
                    c[(i, j)] = v;
                    c[(j, i)] = v;
                }
            }
            let pairwise = weighted_slice_distance(&slices, &c).unwrap();
            let mode3 = weighted_slice_distance_mode3(&slices, &c).unwrap();
            assert_relative_eq!(pairwise, mode3, max_relative = 1e-8);
        }
    }

    #[test]
    fn csv_shape_and_labels() {
        let kg = kg_from(&[("a", "likes", "b"), ("b", "made", "c")]);
        let t = build_tensor(&kg).unwrap();
        let sim = compute_similarity(&t, Encoding::Symmetric).unwrap();
        let f = tempfile::NamedTempFile::new().unwrap();
        sim.write_csv(f.path(), &kg.relations).unwrap();
        let text = std::fs::read_to_string(f.path()).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 3);
        assert_eq!(lines[0], ",likes,made");
        assert!(lines[1].starts_with("likes,1.000000,"));
    }
}
