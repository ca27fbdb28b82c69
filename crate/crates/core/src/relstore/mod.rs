//! In-memory relation instances with set semantics and referential-integrity
//! enforcement.
//!
//! Base relations are keyed by primary key and iterated in key order, which
//! makes dumps and reports deterministic. Derived extents (view results,
//! auxiliary views) are plain [`TupleSet`]s.

mod csvio;
mod eval;

pub use csvio::{
    decode_field, dump_relation, encode_field, load_dir, parse_relation_csv, split_record,
    write_dir, CsvError,
};
pub use eval::{
    eval_av, evaluate_view, filter_project_relation, filter_project_set, join_leaves, AvEnv,
    CompiledPredicate, JoinLeaf, VirtualAv,
};

use std::collections::btree_map::Entry;
use std::collections::{BTreeMap, BTreeSet};

use crate::catalog::{Catalog, RelationDef};
use crate::value::Value;

/// One row of a relation: values in schema attribute order.
pub type Tuple = Vec<Value>;

/// A batch of insertions, by relation name. Batches are applied atomically
/// in referenced-first order so a batch may insert a parent row and a child
/// row referencing it.
pub type InsertionBatch = BTreeMap<String, Vec<Tuple>>;

/// Errors raised by the store.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum StoreError {
    #[error("unknown relation `{0}`")]
    UnknownRelation(String),
    #[error("relation `{relation}`: expected {expected} values, got {got}")]
    ArityMismatch {
        relation: String,
        expected: usize,
        got: usize,
    },
    #[error("relation `{relation}`: attribute `{attribute}` rejects {found} value `{value}`")]
    DomainMismatch {
        relation: String,
        attribute: String,
        found: String,
        value: String,
    },
    #[error("relation `{relation}`: duplicate primary key ({key})")]
    DuplicatePrimaryKey { relation: String, key: String },
    #[error("relation `{relation}`: foreign key ({value}) has no match in `{target}`")]
    DanglingForeignKey {
        relation: String,
        target: String,
        value: String,
    },
    #[error("auxiliary view `{0}` is not materialized")]
    UnresolvedAv(String),
    #[error("extent `{extent}` has no column `{column}`")]
    MissingColumn { extent: String, column: String },
}

fn fmt_key(key: &[Value]) -> String {
    key.iter()
        .map(Value::to_string)
        .collect::<Vec<_>>()
        .join(",")
}

/// Checks a row's arity and per-attribute domains against a schema.
pub fn check_row(schema: &RelationDef, row: &[Value]) -> Result<(), StoreError> {
    if row.len() != schema.attributes.len() {
        return Err(StoreError::ArityMismatch {
            relation: schema.name.clone(),
            expected: schema.attributes.len(),
            got: row.len(),
        });
    }
    for (attr, value) in schema.attributes.iter().zip(row) {
        if !attr.domain.admits(value) {
            return Err(StoreError::DomainMismatch {
                relation: schema.name.clone(),
                attribute: attr.name.clone(),
                found: value.kind().to_string(),
                value: value.to_string(),
            });
        }
    }
    Ok(())
}

/// Primary-key values of a schema-conforming row.
pub fn row_key(schema: &RelationDef, row: &[Value]) -> Tuple {
    schema
        .pk_indices()
        .iter()
        .map(|&i| row[i].clone())
        .collect()
}

/// Rows of one base relation, keyed by primary key.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RelationInstance {
    schema: RelationDef,
    rows: BTreeMap<Tuple, Tuple>,
}

impl RelationInstance {
    pub fn new(schema: RelationDef) -> Self {
        RelationInstance {
            schema,
            rows: BTreeMap::new(),
        }
    }

    pub fn schema(&self) -> &RelationDef {
        &self.schema
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Rows in primary-key order.
    pub fn rows(&self) -> impl Iterator<Item = &Tuple> {
        self.rows.values()
    }

    pub fn contains_key(&self, key: &[Value]) -> bool {
        self.rows.contains_key(key)
    }

    /// Primary-key values of a row, in key-attribute order.
    pub fn key_of(&self, row: &[Value]) -> Tuple {
        self.schema
            .pk_indices()
            .iter()
            .map(|&i| row[i].clone())
            .collect()
    }

    fn insert(&mut self, row: Tuple) -> Result<(), StoreError> {
        let key = self.key_of(&row);
        match self.rows.entry(key) {
            Entry::Vacant(slot) => {
                slot.insert(row);
                Ok(())
            }
            Entry::Occupied(slot) => Err(StoreError::DuplicatePrimaryKey {
                relation: self.schema.name.clone(),
                key: fmt_key(slot.key()),
            }),
        }
    }
}

/// A database: one instance per catalog relation, with global referential
/// integrity maintained across batch inserts.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Database {
    catalog: Catalog,
    relations: BTreeMap<String, RelationInstance>,
}

impl Database {
    pub fn new(catalog: Catalog) -> Self {
        let relations = catalog
            .relations()
            .map(|rel| (rel.name.clone(), RelationInstance::new(rel.clone())))
            .collect();
        Database { catalog, relations }
    }

    pub fn catalog(&self) -> &Catalog {
        &self.catalog
    }

    pub fn relation(&self, name: &str) -> Result<&RelationInstance, StoreError> {
        self.relations
            .get(name)
            .ok_or_else(|| StoreError::UnknownRelation(name.to_string()))
    }

    pub fn relations(&self) -> impl Iterator<Item = &RelationInstance> {
        self.relations.values()
    }

    pub fn total_rows(&self) -> usize {
        self.relations.values().map(RelationInstance::len).sum()
    }

    /// Applies a batch atomically: either every tuple is inserted or the
    /// database is unchanged. Relations are staged referenced-first, so a
    /// foreign key may resolve to a row inserted earlier in the same batch.
    pub fn insert_batch(&mut self, batch: &InsertionBatch) -> Result<(), StoreError> {
        for name in batch.keys() {
            if !self.relations.contains_key(name) {
                return Err(StoreError::UnknownRelation(name.clone()));
            }
        }
        let order = self.catalog.topo_order().expect("catalog validated");

        // Validation pass over staged state; nothing is committed until
        // every row has been checked.
        let mut staged: BTreeMap<&str, BTreeSet<Tuple>> = BTreeMap::new();
        for name in &order {
            let Some(rows) = batch.get(name) else {
                continue;
            };
            let instance = &self.relations[name];
            let staged_keys: &mut BTreeSet<Tuple> = staged.entry(name).or_default();
            for row in rows {
                check_row(instance.schema(), row)?;
                let key = instance.key_of(row);
                if instance.contains_key(&key) || !staged_keys.insert(key.clone()) {
                    return Err(StoreError::DuplicatePrimaryKey {
                        relation: name.clone(),
                        key: fmt_key(&key),
                    });
                }
            }
        }
        for name in &order {
            let Some(rows) = batch.get(name) else {
                continue;
            };
            let schema = self.relations[name].schema().clone();
            for row in rows {
                for fk in &schema.foreign_keys {
                    let fk_value: Tuple = fk
                        .attributes
                        .iter()
                        .map(|a| row[schema.attr_index(a).expect("validated")].clone())
                        .collect();
                    let target = &self.relations[&fk.target_relation];
                    let in_staged = staged
                        .get(fk.target_relation.as_str())
                        .is_some_and(|keys| keys.contains(&fk_value));
                    if !target.contains_key(&fk_value) && !in_staged {
                        return Err(StoreError::DanglingForeignKey {
                            relation: name.clone(),
                            target: fk.target_relation.clone(),
                            value: fmt_key(&fk_value),
                        });
                    }
                }
            }
        }

        // Commit; insert cannot fail after the checks above.
        for name in &order {
            let Some(rows) = batch.get(name) else {
                continue;
            };
            let instance = self.relations.get_mut(name).expect("checked");
            for row in rows {
                instance.insert(row.clone()).expect("validated batch");
            }
        }
        Ok(())
    }

    /// Full referential-integrity scan; used by tests and the load path.
    pub fn check_integrity(&self) -> Result<(), StoreError> {
        for instance in self.relations.values() {
            let schema = instance.schema();
            for fk in &schema.foreign_keys {
                let indices: Vec<usize> = fk
                    .attributes
                    .iter()
                    .map(|a| schema.attr_index(a).expect("validated"))
                    .collect();
                let target = self.relation(&fk.target_relation)?;
                for row in instance.rows() {
                    let value: Tuple = indices.iter().map(|&i| row[i].clone()).collect();
                    if !target.contains_key(&value) {
                        return Err(StoreError::DanglingForeignKey {
                            relation: schema.name.clone(),
                            target: fk.target_relation.clone(),
                            value: fmt_key(&value),
                        });
                    }
                }
            }
        }
        Ok(())
    }
}

/// A derived extent: named columns plus a set of rows. Equality is exact
/// set equality, which is what the oracle comparisons use.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct TupleSet {
    pub columns: Vec<String>,
    rows: BTreeSet<Tuple>,
}

impl TupleSet {
    pub fn new(columns: Vec<String>) -> Self {
        TupleSet {
            columns,
            rows: BTreeSet::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Inserts a row, returning whether it was new.
    pub fn insert(&mut self, row: Tuple) -> bool {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.insert(row)
    }

    pub fn contains(&self, row: &[Value]) -> bool {
        self.rows.contains(row)
    }

    /// Rows in lexicographic order.
    pub fn rows(&self) -> impl Iterator<Item = &Tuple> {
        self.rows.iter()
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == name)
    }

    /// Set difference `self \ other` over rows (columns must match).
    pub fn difference(&self, other: &TupleSet) -> TupleSet {
        let mut out = TupleSet::new(self.columns.clone());
        for row in self.rows.difference(&other.rows) {
            out.insert(row.clone());
        }
        out
    }
}

impl FromIterator<Tuple> for TupleSet {
    /// Builds an unnamed-column set; for tests and intermediate values.
    fn from_iter<T: IntoIterator<Item = Tuple>>(iter: T) -> Self {
        let rows: BTreeSet<Tuple> = iter.into_iter().collect();
        let columns = rows
            .iter()
            .next()
            .map(|r| (0..r.len()).map(|i| format!("c{i}")).collect())
            .unwrap_or_default();
        TupleSet { columns, rows }
    }
}
