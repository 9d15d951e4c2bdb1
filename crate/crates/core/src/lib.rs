//! Tree models for graphs of bounded linear cliquewidth.
//!
//! The library decomposes graphs into shallow tree-shaped models and verifies
//! every construction against brute-force oracles:
//!
//! - [`structure`]: graphs, bipartite graphs, posets, and generic relational
//!   structures, with the elementary operations everything else consumes.
//! - [`tmodel`]: semi-plane rooted trees, T-models, the adjacency
//!   interpretation `build`, relational encodings, and restrictions.
//! - [`cotree`]: cograph recognition and the unique clean cotree.
//! - [`bicotree`]: shallow ordered bicographs (sobs), the cleaning procedure,
//!   duality, and deterministic decomposition.
//! - [`splitdec`]: splits, amalgam assembly, `sbuild`, and coupling views.
//! - [`posetenc`]: couplings encoded as colored posets and decoded back.
//! - [`anchor`]: bounded-size anchors, restricted models, and covers.
//! - [`folang`]: a small first-order parser/evaluator used as an independent
//!   semantic oracle, plus atomic transduction steps.
//! - [`gen`]: seeded random instance generators for the test suites.
//! - [`suites`]: the property suites shared by the CLI and the tests.
//!
//! All values are immutable after construction and all operations are pure,
//! so everything is safe to evaluate from parallel test runners. The
//! `parallel` feature (on by default) routes bulk suite work through rayon;
//! disabling it keeps the same API with sequential execution.

#![forbid(unsafe_code)]

pub mod exec;
pub mod structure;
pub mod anchor;
pub mod bicotree;
pub mod cotree;
pub mod folang;
pub mod gen;
pub mod posetenc;
pub mod report;
pub mod splitdec;
pub mod suites;
pub mod tmodel;
