//! Harmonization engine for child-behavioral questionnaires.
//!
//! Source instruments are ingested into a common format, every question is
//! placed on a leaf of a clinical-domain ontology, and a crosswalk maps each
//! source question (and each of its answer choices) onto a shared set of
//! Rosetta questions with severity-ordered answer codes. Subject responses can
//! then be fused into one partially-missing vector per subject and fed to a
//! two-stage gradient-boosted cascade separating autism, ADHD and neither.
//!
//! Modules:
//!
//! * [`registry`]: ontology, instruments, Rosetta questions, crosswalk, parsers
//!   and the structural validator.
//! * [`fusion`]: translation of raw responses into Rosetta vectors and
//!   conflict-aware merging into labeled cohorts.
//! * [`analytics`]: per-leaf fusion statistics and the instrument overlap
//!   matrix.
//! * [`ml`]: imputation, gradient-boosted trees, the cascade, feature
//!   selection, AUC and stratified cross-validation.
//! * [`synth`]: synthetic labeled cohorts with multi-instrument sparsity.

pub mod analytics;
pub mod error;
pub mod fusion;
pub mod ml;
pub mod registry;
pub mod synth;

pub use error::{Error, ParseError, Result};
pub use fusion::{AssessmentRecord, ConflictPolicy, Label, LabeledCohort, RosettaVector};
pub use registry::{Registry, ValidationReport};
