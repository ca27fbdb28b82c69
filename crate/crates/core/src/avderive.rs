//! Auxiliary-view derivation.
//!
//! For each materialized view, derives the set of auxiliary views that make
//! it maintainable under insertions without touching base relations:
//!
//! * relations referenced by no other view relation are pruned entirely —
//!   their existing rows can never join a later insertion, because new rows
//!   elsewhere carry fresh keys and existing rows only reference keys that
//!   already existed;
//! * every other relation keeps a selection of its rows, filtered by the
//!   view's local predicate and by semijoin membership in the auxiliary
//!   views of the relations it references (when those carry any filter).

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write;

use crate::catalog::{view_join_digraph, Catalog, Predicate, ViewDef};
use crate::relstore::{eval_av, AvEnv, CompiledPredicate, Database, StoreError};

/// Errors from auxiliary-view derivation and counting.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum DeriveError {
    #[error("relation `{relation}` is not part of view `{view}`")]
    RelationNotInView { view: String, relation: String },
    #[error(transparent)]
    Store(#[from] StoreError),
}

/// Semijoin membership: this relation's `attributes` must appear in the
/// projection of auxiliary view `av` onto `av_attributes`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Membership {
    pub attributes: Vec<String>,
    pub av: String,
    pub av_attributes: Vec<String>,
}

/// Definition of one auxiliary view: a filtered projection of a single
/// source relation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AvDef {
    pub name: String,
    /// Name of the materialized view this AV maintains.
    pub view: String,
    pub source_relation: String,
    /// Subset of the source's attributes, in schema order. Always includes
    /// the relation's view-output attributes and its join attributes.
    pub retained_attributes: Vec<String>,
    pub local_predicate: Option<Predicate>,
    pub memberships: Vec<Membership>,
}

impl AvDef {
    /// The full selection condition: local predicate AND all memberships.
    pub fn full_condition(&self) -> Option<Predicate> {
        let mut parts: Vec<Predicate> = Vec::new();
        if let Some(local) = &self.local_predicate {
            parts.push(local.clone());
        }
        parts.extend(self.memberships.iter().map(|m| Predicate::InAv {
            attributes: m.attributes.clone(),
            av: m.av.clone(),
            av_attributes: m.av_attributes.clone(),
        }));
        Predicate::conjoin(parts)
    }
}

/// The auxiliary views of one materialized view, plus the relations pruned
/// by referential-integrity reasoning.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AvSet {
    pub view: String,
    /// Relation name -> its auxiliary view.
    pub avs: BTreeMap<String, AvDef>,
    /// View relations with no auxiliary view.
    pub pruned: Vec<String>,
    /// Relations with AVs in referenced-first order; memberships always
    /// point at AVs earlier in this order.
    pub eval_order: Vec<String>,
}

impl AvSet {
    /// Materializes every AV over the base database, returning extents by
    /// AV name. Used at warehouse initialization and by count reports.
    pub fn materialize(&self, db: &Database) -> Result<AvEnv, DeriveError> {
        let mut env = AvEnv::new();
        for relation in &self.eval_order {
            let def = &self.avs[relation];
            let extent = eval_av(db, def, &env)?;
            env.insert_extent(def.name.clone(), extent);
        }
        Ok(env)
    }
}

/// Whether `relation` needs an auxiliary view in `view`: true exactly when
/// some other view relation references it through a view join.
pub fn needs_av(catalog: &Catalog, view: &ViewDef, relation: &str) -> Result<bool, DeriveError> {
    if !view.relations.iter().any(|r| r == relation) {
        return Err(DeriveError::RelationNotInView {
            view: view.name.clone(),
            relation: relation.to_string(),
        });
    }
    Ok(view_join_digraph(catalog, view).in_degree(relation) >= 1)
}

/// Attributes an auxiliary view must retain for `relation`: the relation's
/// view-output attributes plus every key attribute it contributes to a view
/// join (so delta joins stay unambiguous), in schema order.
pub fn retained_attrs(catalog: &Catalog, view: &ViewDef, relation: &str) -> Vec<String> {
    let mut keep: BTreeSet<&str> = view
        .output
        .iter()
        .filter(|(rel, _)| rel == relation)
        .map(|(_, attr)| attr.as_str())
        .collect();
    for edge in &view.joins {
        if edge.from == relation {
            keep.extend(edge.from_attrs.iter().map(String::as_str));
        }
        if edge.to == relation {
            keep.extend(edge.to_attrs.iter().map(String::as_str));
        }
    }
    let schema = catalog.relation(relation).expect("validated view relation");
    schema
        .attr_names()
        .filter(|name| keep.contains(name))
        .map(str::to_string)
        .collect()
}

fn av_name(view: &str, relation: &str) -> String {
    format!("aux_{view}_{relation}")
}

/// Derives the pruned auxiliary-view set for a view. Memberships are added
/// along each view join whose referenced subtree carries a local predicate;
/// an unfiltered subtree would make the semijoin a no-op.
pub fn derive_av_set(catalog: &Catalog, view: &ViewDef) -> AvSet {
    let digraph = view_join_digraph(catalog, view);

    // Relations whose reachable subtree (inclusive) filters rows. The
    // referenced-first order guarantees successors are decided first.
    let mut filtered: BTreeSet<String> = BTreeSet::new();
    for relation in digraph.referenced_first_order() {
        if view.local_predicates.contains_key(&relation)
            || digraph
                .successors(&relation)
                .iter()
                .any(|s| filtered.contains(*s))
        {
            filtered.insert(relation);
        }
    }

    let mut avs = BTreeMap::new();
    let mut pruned = Vec::new();
    for relation in &view.relations {
        if digraph.in_degree(relation) == 0 {
            pruned.push(relation.clone());
            continue;
        }
        let mut memberships = Vec::new();
        for edge in &view.joins {
            if &edge.from == relation && filtered.contains(&edge.to) {
                memberships.push(Membership {
                    attributes: edge.from_attrs.clone(),
                    av: av_name(&view.name, &edge.to),
                    av_attributes: edge.to_attrs.clone(),
                });
            }
        }
        avs.insert(
            relation.clone(),
            AvDef {
                name: av_name(&view.name, relation),
                view: view.name.clone(),
                source_relation: relation.clone(),
                retained_attributes: retained_attrs(catalog, view, relation),
                local_predicate: view.local_predicates.get(relation).cloned(),
                memberships,
            },
        );
    }
    let eval_order = digraph
        .referenced_first_order()
        .into_iter()
        .filter(|rel| avs.contains_key(rel))
        .collect();
    AvSet {
        view: view.name.clone(),
        avs,
        pruned,
        eval_order,
    }
}

/// Derivation without referential-integrity pruning: every view relation
/// keeps an AV filtered by its local predicate alone. Used for the space
/// comparison reports; the maintenance engine always runs the pruned plan.
pub fn derive_av_set_local_only(catalog: &Catalog, view: &ViewDef) -> AvSet {
    let digraph = view_join_digraph(catalog, view);
    let avs: BTreeMap<String, AvDef> = view
        .relations
        .iter()
        .map(|relation| {
            let def = AvDef {
                name: av_name(&view.name, relation),
                view: view.name.clone(),
                source_relation: relation.clone(),
                retained_attributes: retained_attrs(catalog, view, relation),
                local_predicate: view.local_predicates.get(relation).cloned(),
                memberships: Vec::new(),
            };
            (relation.clone(), def)
        })
        .collect();
    AvSet {
        view: view.name.clone(),
        avs,
        pruned: Vec::new(),
        eval_order: digraph.referenced_first_order(),
    }
}

/// Per-relation tuple counts: base cardinality, rows passing the local
/// selection, and rows in the auxiliary view.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CountRow {
    pub relation: String,
    pub base: u64,
    pub pass_local: u64,
    pub av: u64,
}

/// Count report for one view over one database, with a totals row.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CountReport {
    pub view: String,
    pub rows: Vec<CountRow>,
}

impl CountReport {
    pub fn total(&self) -> CountRow {
        let mut total = CountRow {
            relation: "TOTAL".into(),
            base: 0,
            pass_local: 0,
            av: 0,
        };
        for row in &self.rows {
            total.base += row.base;
            total.pass_local += row.pass_local;
            total.av += row.av;
        }
        total
    }

    pub fn row(&self, relation: &str) -> Option<&CountRow> {
        self.rows.iter().find(|r| r.relation == relation)
    }

    /// Tab-separated rendering: `relation base pass_local av`, one row per
    /// view relation, final TOTAL row.
    pub fn to_tsv(&self) -> String {
        let mut out = String::from("relation\tbase\tpass_local\tav\n");
        for row in self.rows.iter().chain([&self.total()]) {
            let _ = writeln!(
                out,
                "{}\t{}\t{}\t{}",
                row.relation, row.base, row.pass_local, row.av
            );
        }
        out
    }
}

/// Measures base/pass-local/AV tuple counts for every view relation.
/// Pruned relations report an AV count of zero.
pub fn tuple_count_report(
    db: &Database,
    view: &ViewDef,
    avset: &AvSet,
) -> Result<CountReport, DeriveError> {
    let env = avset.materialize(db)?;
    let mut rows = Vec::with_capacity(view.relations.len());
    for relation in &view.relations {
        let instance = db.relation(relation)?;
        let columns: Vec<String> = instance.schema().attr_names().map(str::to_string).collect();
        let local = CompiledPredicate::compile(
            view.local_predicates.get(relation),
            &columns,
            relation,
            &AvEnv::new(),
        )
        .map_err(DeriveError::Store)?;
        let pass_local = instance.rows().filter(|row| local.matches(row)).count() as u64;
        let av = match avset.avs.get(relation) {
            Some(def) => env.resolve(&def.name).map_err(DeriveError::Store)?.len() as u64,
            None => 0,
        };
        rows.push(CountRow {
            relation: relation.clone(),
            base: instance.len() as u64,
            pass_local,
            av,
        });
    }
    Ok(CountReport {
        view: view.name.clone(),
        rows,
    })
}
