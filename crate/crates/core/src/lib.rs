//! Interpretable text-to-image evaluation with visual programs.
//!
//! The crate is split along the pipeline:
//!
//! - [`perception`]: detections, OCR tokens, VQA answers and the backends that
//!   produce them (a JSON fixture backend and an HTTP client).
//! - [`layout`]: the two-step layout language (object counts, then quantized
//!   box placements).
//! - [`dsl`]: parser, printer and validator for evaluation programs.
//! - [`modules`]: executable semantics of the evaluation modules.
//! - [`runner`]: program execution, score aggregation and batch runs.
//! - [`bench`]: the skill-based prompt corpus generator.
//! - [`progen`]: program generation from open-ended prompts.
//! - [`stats`]: Spearman ρ, Cohen κ and Krippendorff α.
//! - [`report`]: text, SVG and tabular renderings of reports.
//!
//! ```
//! use vprog::dsl::parse_program;
//! use vprog::perception::FixtureBackend;
//! use vprog::runner::{run_program, RunConfig};
//!
//! let fixture = r#"{"images": {"img1": {"objdet": {"dog": [
//!     {"box": [0.1, 0.2, 0.5, 0.6], "confidence": 0.9, "closeness": 0.4}
//! ]}}}}"#;
//! let backend = FixtureBackend::from_json_str(fixture).unwrap();
//! let program = parse_program("objectEval(img, 'dog')\ncountEval(img, 'dog', '==2')").unwrap();
//! let report = run_program(&backend, "img1", &program, "a dog", &RunConfig::default());
//! assert_eq!(report.score, 0.5);
//! ```

pub mod bench;
pub mod dsl;
pub mod layout;
pub mod modules;
pub mod perception;
pub mod progen;
pub mod report;
pub mod runner;
pub mod stats;
pub mod text;

#[cfg(doctest)]
#[doc = include_str!("../../../README.md")]
mod readme {}

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/layout.md")]
    mod layout {}
    #[doc = include_str!("../../../book/src/programs.md")]
    mod programs {}
    #[doc = include_str!("../../../book/src/modules.md")]
    mod modules {}
    #[doc = include_str!("../../../book/src/running.md")]
    mod running {}
    #[doc = include_str!("../../../book/src/benchmark.md")]
    mod benchmark {}
    #[doc = include_str!("../../../book/src/generation.md")]
    mod generation {}
    #[doc = include_str!("../../../book/src/statistics.md")]
    mod statistics {}
    #[doc = include_str!("../../../book/src/reports.md")]
    mod reports {}
}
