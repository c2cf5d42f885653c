//! File formats, datasets and the `helmholtz` command-line tool.

// negated float comparisons are used on purpose so that NaN fails validation
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod dataset;
pub mod hfd;
pub mod run;
