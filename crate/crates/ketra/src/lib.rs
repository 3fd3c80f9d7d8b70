//! ketra — knowledge-enriched tensor factorization for fact prediction.
//!
//! A multi-relational knowledge graph is a binary order-3 tensor X of shape
//! N_e × N_e × N_r whose frontal slice X_k is the adjacency matrix of
//! relation k. ketra factorizes X into entity embeddings and per-relation
//! interaction matrices, X_k ≈ A_α R_k A_βᵀ, enriched by an N_r × N_r
//! relation-similarity matrix C that either regularizes relation embeddings
//! toward each other or constrains their distances via Lagrange multipliers.
//! The learned factors score triples for the binary fact-prediction task.
//!
//! Six models are available (see [`models::ModelKind`]):
//!
//! | model              | entity factors | similarity use        |
//! |--------------------|----------------|-----------------------|
//! | rescal             | single A       | none                  |
//! | nn_rescal          | single A       | none, factors ≥ 0     |
//! | quad_reg           | single A       | regularizer           |
//! | quad_constraint    | single A       | Lagrangian constraint |
//! | linear_reg         | split A1/A2    | regularizer           |
//! | linear_constraint  | split A1/A2    | Lagrangian constraint |
//!
//! All training is alternating least squares with closed-form block updates;
//! the linear regularized model carries a proximal term (1/ρ) that makes
//! every block strictly convex and the sweep provably convergent.
//!
//! The `examples/` directory holds one runnable program per capability:
//! dataset statistics, similarity matrices, convergence traces, the
//! fact-prediction protocol, density sweeps, and hyperparameter search. The
//! `ketra` binary exposes the same capabilities as subcommands.

pub mod commands;
pub mod config;
pub mod error;
pub mod eval;
pub mod graph;
pub mod models;
pub mod seed;
pub mod similarity;
pub mod solver;

pub use error::{Error, Result};
