//! Document clustering and cluster-quality evaluation for homogeneous
//! scientific collections, using expert subject headings as ground truth.
//!
//! The pipeline runs: compose text fields → tokenize → vocabulary → tf-idf
//! weighting → feature selection (VCGS or document frequency) → optional
//! LSA → maximin or k-means++ clustering → silhouette, purity, homogeneity
//! and adjusted mutual information.

pub mod cluster;
pub mod corpus;
pub mod descriptors;
pub mod error;
pub mod featselect;
pub mod harness;
pub mod lsa;
pub mod metrics;
pub mod synth;
pub mod vectorizer;

pub use error::{Error, Result};
