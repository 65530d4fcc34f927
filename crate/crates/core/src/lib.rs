//! Exact non-Archimedean potential theory on the projective line.
//!
//! Lattices over ramified extensions `K_M` of the rationals, finite skeleta
//! of the Berkovich line, piecewise-linear metrics on `O(d)`, sup norms of
//! sections, relative volumes and the experiments built on top of them.
//! Valuations are normalized by `v(p) = 1` and everything is an exact
//! rational.

pub mod corpus;
pub mod experiments;
pub mod field;
pub mod lattices;
pub mod lp;
pub mod metrics;
pub mod sections;
pub mod tree;
pub mod volumes;

pub use field::{FieldContext, FieldElement, Rational, Valuation};
pub use lattices::{relative_volume, smith_normal_form, DiagonalNorm, FieldMatrix, Lattice, TorsionModule};
pub use metrics::Metric;
pub use sections::{sup_norm, vol_m, Section};
pub use tree::{DiscreteMeasure, PLFunction, SkeletonTree, TreePoint};
pub use volumes::{vol_limit, Window};
