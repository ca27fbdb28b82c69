//! Library behind the `viewkeeper` binary: dataset generation, batch file
//! parsing, the scenario pipeline, and reference-comparison reports.

// Errors here propagate straight to process exit; size over speed.
#![allow(clippy::result_large_err)]

pub mod batchfile;
pub mod gen;
pub mod report;
pub mod scenario;

use viewkeeper_core::avderive::DeriveError;
use viewkeeper_core::catalog::SchemaError;
use viewkeeper_core::gluing::GlueError;
use viewkeeper_core::maintenance::MaintainError;
use viewkeeper_core::relstore::{CsvError, StoreError};

/// Top-level error for CLI operations. Everything here is an input or
/// environment problem (exit code 2); oracle mismatches are reported in
/// the scenario outcome instead, and exit with code 1.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error(transparent)]
    Schema(#[from] SchemaError),
    #[error(transparent)]
    Csv(#[from] CsvError),
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error(transparent)]
    Derive(#[from] DeriveError),
    #[error(transparent)]
    Glue(#[from] GlueError),
    #[error(transparent)]
    Maintain(#[from] MaintainError),
    #[error(transparent)]
    Batch(#[from] batchfile::BatchError),
    #[error(transparent)]
    Gen(#[from] gen::GenError),
}

/// Process exit codes: 0 success, 1 oracle mismatch, 2 input error.
pub const EXIT_OK: i32 = 0;
pub const EXIT_ORACLE_MISMATCH: i32 = 1;
pub const EXIT_INPUT_ERROR: i32 = 2;
