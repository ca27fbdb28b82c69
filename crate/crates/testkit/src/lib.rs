//! Test support for the viewkeeper workspace.
//!
//! Two halves:
//!
//! * a brute-force nested-loop evaluator, kept deliberately independent of
//!   the production join and predicate-compilation paths so it can serve
//!   as a differential oracle;
//! * seeded random generators for catalogs, views, databases, and
//!   referential-integrity-valid insertion batches.

use std::collections::{BTreeMap, BTreeSet};

use rand::prelude::IndexedRandom;
use rand::Rng;

use viewkeeper_core::avderive::AvDef;
use viewkeeper_core::catalog::{
    AttributeDef, Catalog, CmpOp, Domain, ForeignKey, JoinEdge, Predicate, RelationDef, ViewDef,
};
use viewkeeper_core::relstore::{Database, InsertionBatch, TupleSet};
use viewkeeper_core::value::{Decimal, Value};
use viewkeeper_core::Tuple;

// ---------------------------------------------------------------------------
// Brute-force oracle
// ---------------------------------------------------------------------------

/// Direct recursive predicate evaluation against a named-attribute row.
/// Membership nodes scan the referenced extent linearly.
fn eval_predicate(
    pred: &Predicate,
    row: &[Value],
    attr_names: &[&str],
    extents: &BTreeMap<String, TupleSet>,
) -> bool {
    let value_of = |name: &str| {
        let idx = attr_names
            .iter()
            .position(|a| *a == name)
            .expect("attribute in scope");
        &row[idx]
    };
    match pred {
        Predicate::Cmp {
            attribute,
            op,
            value,
        } => op.eval(value_of(attribute).cmp(value)),
        Predicate::And(a, b) => {
            eval_predicate(a, row, attr_names, extents)
                && eval_predicate(b, row, attr_names, extents)
        }
        Predicate::Or(a, b) => {
            eval_predicate(a, row, attr_names, extents)
                || eval_predicate(b, row, attr_names, extents)
        }
        Predicate::InAv {
            attributes,
            av,
            av_attributes,
        } => {
            let extent = extents.get(av).expect("membership target materialized");
            let needle: Vec<&Value> = attributes.iter().map(|a| value_of(a)).collect();
            extent.rows().any(|av_row| {
                av_attributes.iter().zip(&needle).all(|(col, want)| {
                    let idx = extent.column_index(col).expect("av column");
                    &av_row[idx] == *want
                })
            })
        }
    }
}

/// Evaluates a view by materializing the full cross product of its
/// relations and filtering every join and local condition per tuple.
/// Exponential and proud of it; keep per-relation cardinalities small.
pub fn brute_force_view(db: &Database, view: &ViewDef) -> TupleSet {
    let instances: Vec<_> = view
        .relations
        .iter()
        .map(|name| db.relation(name).expect("view relation"))
        .collect();
    let attr_names: Vec<Vec<&str>> = instances
        .iter()
        .map(|inst| inst.schema().attr_names().collect())
        .collect();
    let empty = BTreeMap::new();

    let mut result = TupleSet::new(
        view.output
            .iter()
            .map(|(rel, attr)| format!("{rel}.{attr}"))
            .collect(),
    );
    // Odometer over row indices of every relation. An empty relation makes
    // the guard below reject every combination.
    let rows_per: Vec<Vec<&Tuple>> = instances.iter().map(|inst| inst.rows().collect()).collect();
    let mut combo = vec![0usize; rows_per.len()];
    'outer: loop {
        if rows_per.iter().all(|r| !r.is_empty()) {
            let picked: Vec<&Tuple> = combo
                .iter()
                .zip(&rows_per)
                .map(|(&i, rows)| rows[i])
                .collect();
            let rel_index = |name: &str| {
                view.relations
                    .iter()
                    .position(|r| r == name)
                    .expect("view relation")
            };
            let joins_ok = view.joins.iter().all(
                |JoinEdge {
                     from,
                     from_attrs,
                     to,
                     to_attrs,
                 }| {
                    let fi = rel_index(from);
                    let ti = rel_index(to);
                    from_attrs.iter().zip(to_attrs).all(|(fa, ta)| {
                        let fv = &picked[fi][attr_names[fi].iter().position(|a| a == fa).unwrap()];
                        let tv = &picked[ti][attr_names[ti].iter().position(|a| a == ta).unwrap()];
                        fv == tv
                    })
                },
            );
            let locals_ok = view.local_predicates.iter().all(|(rel, pred)| {
                let ri = rel_index(rel);
                eval_predicate(pred, picked[ri], &attr_names[ri], &empty)
            });
            if joins_ok && locals_ok {
                let out = view
                    .output
                    .iter()
                    .map(|(rel, attr)| {
                        let ri = rel_index(rel);
                        picked[ri][attr_names[ri].iter().position(|a| a == attr).unwrap()].clone()
                    })
                    .collect();
                result.insert(out);
            }
        }
        // Advance the odometer.
        for pos in (0..combo.len()).rev() {
            combo[pos] += 1;
            if combo[pos] < rows_per[pos].len().max(1) {
                continue 'outer;
            }
            combo[pos] = 0;
        }
        break;
    }
    result
}

/// Materializes an auxiliary view by linear scans: local predicate plus
/// nested-scan membership checks against already-materialized extents.
pub fn brute_force_av(db: &Database, av: &AvDef, extents: &BTreeMap<String, TupleSet>) -> TupleSet {
    let instance = db
        .relation(&av.source_relation)
        .expect("av source relation");
    let attr_names: Vec<&str> = instance.schema().attr_names().collect();
    let mut result = TupleSet::new(av.retained_attributes.clone());
    for row in instance.rows() {
        let local_ok = av
            .local_predicate
            .as_ref()
            .map(|p| eval_predicate(p, row, &attr_names, extents))
            .unwrap_or(true);
        if !local_ok {
            continue;
        }
        let memberships_ok = av.memberships.iter().all(|m| {
            eval_predicate(
                &Predicate::InAv {
                    attributes: m.attributes.clone(),
                    av: m.av.clone(),
                    av_attributes: m.av_attributes.clone(),
                },
                row,
                &attr_names,
                extents,
            )
        });
        if !memberships_ok {
            continue;
        }
        result.insert(
            av.retained_attributes
                .iter()
                .map(|a| {
                    row[attr_names
                        .iter()
                        .position(|x| x == a)
                        .expect("retained attr")]
                    .clone()
                })
                .collect(),
        );
    }
    result
}

/// Materializes a whole AV set with the brute-force path, referenced
/// relations first.
pub fn brute_force_av_set(
    db: &Database,
    avset: &viewkeeper_core::avderive::AvSet,
) -> BTreeMap<String, TupleSet> {
    let mut extents = BTreeMap::new();
    for relation in &avset.eval_order {
        let def = &avset.avs[relation];
        let extent = brute_force_av(db, def, &extents);
        extents.insert(def.name.clone(), extent);
    }
    extents
}

// ---------------------------------------------------------------------------
// Random generators
// ---------------------------------------------------------------------------

/// Knobs for random catalog generation.
pub struct CatalogShape {
    pub max_relations: usize,
    /// Probability that a relation gains a composite (two-attribute) key.
    pub composite_key_prob: f64,
}

impl Default for CatalogShape {
    fn default() -> Self {
        CatalogShape {
            max_relations: 5,
            composite_key_prob: 0.15,
        }
    }
}

const TEXT_POOL: [&str; 8] = ["ash", "birch", "cedar", "elm", "fir", "oak", "pine", "yew"];

fn random_domain(rng: &mut impl Rng) -> Domain {
    match rng.random_range(0..3) {
        0 => Domain::Integer,
        1 => Domain::Decimal,
        _ => Domain::Text(rng.random_range(5..=16)),
    }
}

pub fn random_value(domain: Domain, rng: &mut impl Rng) -> Value {
    match domain {
        Domain::Integer => Value::Int(rng.random_range(0..8)),
        Domain::Decimal => Value::Dec(Decimal::from_scaled(rng.random_range(0..40) * 2_500)),
        Domain::Text(_) => Value::text(*TEXT_POOL.choose(rng).expect("nonempty pool")),
    }
}

/// Builds a random acyclic catalog: relations `R0..Rn`, integer keys
/// (sometimes composite), random payload attributes, and foreign keys only
/// toward earlier relations.
pub fn random_catalog(rng: &mut impl Rng, shape: &CatalogShape) -> Catalog {
    let n = rng.random_range(1..=shape.max_relations.max(1));
    let mut defs: Vec<RelationDef> = Vec::with_capacity(n);
    for i in 0..n {
        let name = format!("R{i}");
        let composite = rng.random_bool(shape.composite_key_prob);
        let mut attributes = vec![AttributeDef {
            name: "k1".into(),
            domain: Domain::Integer,
        }];
        let mut primary_key = vec!["k1".to_string()];
        if composite {
            attributes.push(AttributeDef {
                name: "k2".into(),
                domain: Domain::Integer,
            });
            primary_key.push("k2".into());
        }
        for p in 0..rng.random_range(0..=2) {
            attributes.push(AttributeDef {
                name: format!("p{p}"),
                domain: random_domain(rng),
            });
        }
        let mut foreign_keys = Vec::new();
        for (j, target) in defs.iter().enumerate() {
            let mut links = 0;
            while links < 2 && rng.random_bool(if links == 0 { 0.5 } else { 0.15 }) {
                let fk_attrs: Vec<String> = target
                    .primary_key
                    .iter()
                    .enumerate()
                    .map(|(pos, _)| format!("f{j}_{links}_{pos}"))
                    .collect();
                for attr in &fk_attrs {
                    attributes.push(AttributeDef {
                        name: attr.clone(),
                        domain: Domain::Integer,
                    });
                }
                foreign_keys.push(ForeignKey {
                    attributes: fk_attrs,
                    target_relation: target.name.clone(),
                    target_attributes: target.primary_key.clone(),
                });
                links += 1;
            }
        }
        defs.push(RelationDef {
            name,
            attributes,
            primary_key,
            foreign_keys,
        });
    }
    Catalog::new(defs).expect("generated catalog is valid by construction")
}

fn random_predicate(rel: &RelationDef, rng: &mut impl Rng) -> Predicate {
    let attr = rel.attributes.choose(rng).expect("relation has attributes");
    let op = *[
        CmpOp::Eq,
        CmpOp::Ne,
        CmpOp::Lt,
        CmpOp::Le,
        CmpOp::Gt,
        CmpOp::Ge,
    ]
    .choose(rng)
    .expect("ops");
    Predicate::Cmp {
        attribute: attr.name.clone(),
        op,
        value: random_value(attr.domain, rng),
    }
}

/// Grows a random single-source view: start at a source relation and walk
/// declared foreign keys outward. Every generated view validates.
pub fn random_view(catalog: &Catalog, name: &str, rng: &mut impl Rng) -> ViewDef {
    let relations: Vec<&RelationDef> = catalog.relations().collect();
    let source = relations.choose(rng).expect("nonempty catalog");

    let mut in_view: Vec<String> = vec![source.name.clone()];
    let mut joins: Vec<JoinEdge> = Vec::new();
    for _ in 0..rng.random_range(0..=4) {
        // Candidate edges: any unused FK from an in-view relation.
        let candidates: Vec<JoinEdge> = in_view
            .iter()
            .flat_map(|rel_name| {
                let rel = catalog.relation(rel_name).expect("in-view relation");
                rel.foreign_keys.iter().map(|fk| JoinEdge {
                    from: rel.name.clone(),
                    from_attrs: fk.attributes.clone(),
                    to: fk.target_relation.clone(),
                    to_attrs: fk.target_attributes.clone(),
                })
            })
            .filter(|edge| !joins.contains(edge))
            .collect();
        let Some(edge) = candidates.choose(rng).cloned() else {
            break;
        };
        if !in_view.contains(&edge.to) {
            in_view.push(edge.to.clone());
        }
        joins.push(edge);
    }

    let mut local_predicates = BTreeMap::new();
    for rel_name in &in_view {
        if rng.random_bool(0.5) {
            let rel = catalog.relation(rel_name).expect("in-view relation");
            local_predicates.insert(rel_name.clone(), random_predicate(rel, rng));
        }
    }

    let all_outputs: Vec<(String, String)> = in_view
        .iter()
        .flat_map(|rel_name| {
            let rel = catalog.relation(rel_name).expect("in-view relation");
            rel.attr_names()
                .map(|a| (rel_name.clone(), a.to_string()))
                .collect::<Vec<_>>()
        })
        .collect();
    let mut output: Vec<(String, String)> = all_outputs
        .iter()
        .filter(|_| rng.random_bool(0.4))
        .cloned()
        .collect();
    if output.is_empty() {
        output.push(all_outputs.choose(rng).expect("attributes exist").clone());
    }

    let view = ViewDef {
        name: name.to_string(),
        relations: in_view,
        joins,
        local_predicates,
        output,
    };
    view.validate(catalog)
        .expect("generated view is valid by construction");
    view
}

/// Tracks fresh primary keys across generated batches.
#[derive(Debug, Default)]
pub struct KeyCounter {
    next: BTreeMap<String, i64>,
}

impl KeyCounter {
    /// Primes counters past every key already present in `db`.
    pub fn seeded_from(db: &Database) -> Self {
        let mut next = BTreeMap::new();
        for instance in db.relations() {
            let max = instance
                .rows()
                .map(|row| match &row[instance.schema().pk_indices()[0]] {
                    Value::Int(n) => *n,
                    _ => 0,
                })
                .max()
                .unwrap_or(0);
            next.insert(instance.schema().name.clone(), max + 1);
        }
        KeyCounter { next }
    }

    pub fn fresh(&mut self, relation: &str) -> i64 {
        let slot = self.next.entry(relation.to_string()).or_insert(1);
        let id = *slot;
        *slot += 1;
        id
    }
}

fn fresh_row(
    schema: &RelationDef,
    keys: &mut KeyCounter,
    parent_keys: &BTreeMap<String, Vec<Tuple>>,
    rng: &mut impl Rng,
) -> Option<Tuple> {
    let id = keys.fresh(&schema.name);
    let mut row: Tuple = Vec::with_capacity(schema.attributes.len());
    for attr in &schema.attributes {
        row.push(random_value(attr.domain, rng));
    }
    // Overwrite key attributes with a fresh unique key.
    let pk = schema.pk_indices();
    row[pk[0]] = Value::Int(id);
    for &extra in pk.iter().skip(1) {
        row[extra] = Value::Int(rng.random_range(0..4));
    }
    // Overwrite FK attributes with keys that actually exist.
    for fk in &schema.foreign_keys {
        let pool = parent_keys.get(&fk.target_relation)?;
        if pool.is_empty() {
            return None;
        }
        let target_key = pool.choose(rng).expect("nonempty pool");
        for (attr, value) in fk.attributes.iter().zip(target_key) {
            let idx = schema.attr_index(attr).expect("fk attribute");
            row[idx] = value.clone();
        }
    }
    Some(row)
}

/// Populates a random database: referenced relations first, foreign keys
/// sampled from rows already inserted.
pub fn random_database(
    catalog: &Catalog,
    max_rows_per_relation: usize,
    rng: &mut impl Rng,
) -> Database {
    let mut keys = KeyCounter::default();
    let mut parent_keys: BTreeMap<String, Vec<Tuple>> = BTreeMap::new();
    let mut batch = InsertionBatch::new();
    for name in catalog.topo_order().expect("valid catalog") {
        let schema = catalog.relation(&name).expect("catalog relation").clone();
        let n = rng.random_range(0..=max_rows_per_relation);
        let mut rows = Vec::with_capacity(n);
        let mut this_keys = Vec::new();
        for _ in 0..n {
            if let Some(row) = fresh_row(&schema, &mut keys, &parent_keys, rng) {
                this_keys.push(viewkeeper_core::relstore::row_key(&schema, &row));
                rows.push(row);
            }
        }
        parent_keys.insert(name.clone(), this_keys);
        batch.insert(name, rows);
    }
    let mut db = Database::new(catalog.clone());
    db.insert_batch(&batch)
        .expect("generated data satisfies integrity");
    db
}

/// Generates an RI-valid batch over the current database: a random subset
/// of relations, fresh keys, and foreign keys drawn from existing rows or
/// from parents staged earlier in the same batch.
pub fn random_batch(
    db: &Database,
    keys: &mut KeyCounter,
    max_relations: usize,
    max_rows: usize,
    rng: &mut impl Rng,
) -> InsertionBatch {
    let order = db.catalog().topo_order().expect("valid catalog");
    let chosen: BTreeSet<&String> = {
        let mut set = BTreeSet::new();
        let want = rng.random_range(1..=max_relations.min(order.len()).max(1));
        while set.len() < want {
            set.insert(order.choose(rng).expect("relations"));
        }
        set
    };

    // Existing keys plus keys staged earlier in this batch.
    let mut parent_keys: BTreeMap<String, Vec<Tuple>> = db
        .relations()
        .map(|inst| {
            let keys = inst.rows().map(|row| inst.key_of(row)).collect();
            (inst.schema().name.clone(), keys)
        })
        .collect();

    let mut batch = InsertionBatch::new();
    for name in &order {
        if !chosen.contains(name) {
            continue;
        }
        let schema = db
            .catalog()
            .relation(name)
            .expect("catalog relation")
            .clone();
        let mut rows = Vec::new();
        for _ in 0..rng.random_range(1..=max_rows.max(1)) {
            if let Some(row) = fresh_row(&schema, keys, &parent_keys, rng) {
                parent_keys
                    .get_mut(name)
                    .expect("all relations present")
                    .push(viewkeeper_core::relstore::row_key(&schema, &row));
                rows.push(row);
            }
        }
        if !rows.is_empty() {
            batch.insert(name.clone(), rows);
        }
    }
    batch
}

/// Generates a batch touching exactly one relation.
pub fn random_single_relation_batch(
    db: &Database,
    relation: &str,
    keys: &mut KeyCounter,
    max_rows: usize,
    rng: &mut impl Rng,
) -> InsertionBatch {
    let schema = db
        .catalog()
        .relation(relation)
        .expect("catalog relation")
        .clone();
    let parent_keys: BTreeMap<String, Vec<Tuple>> = db
        .relations()
        .map(|inst| {
            let keys = inst.rows().map(|row| inst.key_of(row)).collect();
            (inst.schema().name.clone(), keys)
        })
        .collect();
    let mut rows = Vec::new();
    for _ in 0..rng.random_range(1..=max_rows.max(1)) {
        if let Some(row) = fresh_row(&schema, keys, &parent_keys, rng) {
            rows.push(row);
        }
    }
    let mut batch = InsertionBatch::new();
    if !rows.is_empty() {
        batch.insert(relation.to_string(), rows);
    }
    batch
}
