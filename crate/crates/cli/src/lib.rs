//! Reproduction harness for the `nep` command: built-in reference
//! configurations, the published comparison tables, coefficient fits and
//! output formatting.

pub mod fit;
pub mod format;
pub mod tables;
