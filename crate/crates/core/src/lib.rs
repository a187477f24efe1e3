//! Structural analysis of GCC machine-description files.
//!
//! The pipeline reads MD sources ([`reader`]), turns RTL templates into
//! typed trees ([`rtl`]), abstracts them into machine-independent patterns
//! ([`pattern`], [`analysis`]), compares architectures ([`similarity`]) and
//! splits/recombines corpora through text archives ([`archive`]).

pub mod analysis;
pub mod archive;
pub mod pattern;
pub mod reader;
pub mod rtl;
pub mod similarity;

pub use analysis::{analyze, AnalysisOptions, MdAnalysis};
pub use pattern::{canonicalize, pattern_equal, ParamBinding, ParamName, PatternStore, RtlPattern};
pub use reader::{load_md_file, parse_md, ReaderOptions, SExpr, TopLevelForm};
pub use rtl::{RtlExpr, RtxClass, RtxCodeTable};
