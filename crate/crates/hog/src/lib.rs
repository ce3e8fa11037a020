//! A toolkit for higher-order grammars: a two-step, intersection-type
//! directed transformation of an order-(n+1) word grammar into an order-n
//! tree grammar with the same language (read off tree frontiers), the
//! converse word-grammar construction, and bounded-enumeration oracles for
//! checking language equality at desk scale.
//!
//! The modules follow the stages:
//!
//! * [`grammar`]: sorts, terms, grammars, the text format;
//! * [`ext`]: extended terms with set arguments and desugaring;
//! * [`semantics`]: reduction and bounded tree/word/frontier languages;
//! * [`preprocess`]: order normalization and `br` saturation;
//! * [`step1`]: the order-lowering transformation (balanced/unbalanced
//!   intersection types);
//! * [`step2`]: elimination of redundant `e` leaves (ε/+ types);
//! * [`converse`]: the tree-to-word construction;
//! * [`verify`]: the pipeline, two-budget slice oracles, fixtures, and a
//!   random grammar generator.

pub mod converse;
pub mod ext;
pub mod grammar;
pub mod preprocess;
pub mod semantics;
pub mod step1;
pub mod step2;
pub mod verify;
