//! Self-maintainable select-project-join views over insert-only sources.
//!
//! The crate is organized around one pipeline:
//!
//! 1. [`catalog`] parses and validates relation schemas and view
//!    definitions, exposing the foreign-key join digraph.
//! 2. [`relstore`] holds in-memory relation instances with set semantics
//!    and referential integrity, and evaluates views from base data (the
//!    recompute oracle).
//! 3. [`avderive`] derives, per view, the minimal auxiliary views needed to
//!    apply insertions without base-table access.
//! 4. [`gluing`] merges auxiliary views across materialized views when a
//!    byte-cost model says the merged extent is cheaper to store.
//! 5. [`maintenance`] applies insertion batches to the materialized views
//!    and auxiliary views using only warehouse-resident data.

pub mod avderive;
pub mod catalog;
pub mod gluing;
pub mod maintenance;
pub mod relstore;
pub mod value;

pub use catalog::{parse_schema, parse_view, Catalog, Predicate, SchemaError, ViewDef};
pub use relstore::{Database, InsertionBatch, StoreError, Tuple, TupleSet};
pub use value::{Decimal, Value};
