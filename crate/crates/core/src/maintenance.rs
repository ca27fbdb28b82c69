//! The self-maintenance engine.
//!
//! A [`WarehouseState`] holds materialized views and auxiliary views and
//! nothing else: it has no handle to base relations, so applying a batch
//! can only use the delta and warehouse-resident data. Relations are
//! processed referenced-first; an inserted row joins outward through the
//! auxiliary views of the relations it references, and views in which the
//! inserted relation is itself referenced are skipped outright — existing
//! referencing rows cannot point at a freshly keyed insertion.

use std::collections::BTreeMap;

use crate::avderive::AvSet;
use crate::catalog::{view_join_digraph, Catalog, ViewDef, ViewDigraph};
use crate::gluing::{AvUnit, GlueError, MergedAvSet};
use crate::relstore::{
    check_row, evaluate_view, join_leaves, row_key, AvEnv, CompiledPredicate, Database,
    InsertionBatch, JoinLeaf, StoreError, Tuple, TupleSet,
};

/// Added view tuples per view name, one entry per view that grew.
pub type ViewDelta = BTreeMap<String, TupleSet>;

/// Errors from plan assembly and batch application.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum MaintainError {
    #[error("plan covers views {plan:?} but state was initialized with {given:?}")]
    PlanViewMismatch {
        plan: Vec<String>,
        given: Vec<String>,
    },
    #[error("application order must list every catalog relation exactly once")]
    BadOrder,
    #[error("application order is not topological: `{referencing}` precedes `{referenced}`")]
    NotTopological {
        referencing: String,
        referenced: String,
    },
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error(transparent)]
    Glue(#[from] GlueError),
}

/// The stored-extent plan of a warehouse: which auxiliary views each
/// materialized view uses, and which physical units (glued or separate)
/// hold them.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MaintenancePlan {
    per_view: BTreeMap<String, AvSet>,
    units: BTreeMap<String, Vec<AvUnit>>,
}

impl MaintenancePlan {
    /// A plan storing every per-view AV as its own extent.
    pub fn separate(avsets: Vec<AvSet>) -> Self {
        let mut units: BTreeMap<String, Vec<AvUnit>> = BTreeMap::new();
        for set in &avsets {
            for def in set.avs.values() {
                units
                    .entry(def.source_relation.clone())
                    .or_default()
                    .push(AvUnit::Single(def.clone()));
            }
        }
        let per_view = avsets.into_iter().map(|s| (s.view.clone(), s)).collect();
        MaintenancePlan { per_view, units }
    }

    /// A plan storing the merged units produced by gluing.
    pub fn merged(avsets: Vec<AvSet>, merged: MergedAvSet) -> Result<Self, MaintainError> {
        let plan_views: Vec<String> = avsets.iter().map(|s| s.view.clone()).collect();
        if merged.views != plan_views {
            return Err(MaintainError::PlanViewMismatch {
                plan: merged.views.clone(),
                given: plan_views,
            });
        }
        let per_view = avsets.into_iter().map(|s| (s.view.clone(), s)).collect();
        Ok(MaintenancePlan {
            per_view,
            units: merged.entries,
        })
    }

    pub fn view_avs(&self, view: &str) -> Option<&AvSet> {
        self.per_view.get(view)
    }

    pub fn units(&self) -> impl Iterator<Item = &AvUnit> {
        self.units.values().flatten()
    }

    pub fn units_for(&self, relation: &str) -> &[AvUnit] {
        self.units.get(relation).map(Vec::as_slice).unwrap_or(&[])
    }

    /// Registers reconstruction recipes so per-view AV names resolve even
    /// when their extent is stored glued.
    fn register_virtuals(&self, env: &mut AvEnv) -> Result<(), MaintainError> {
        for unit in self.units() {
            if let AvUnit::Glued(glued) = unit {
                for (idx, parent) in glued.parents.iter().enumerate() {
                    env.insert_virtual(parent.name.clone(), glued.parent_virtual(idx)?);
                }
            }
        }
        Ok(())
    }

    /// Materializes every stored unit over the base database. Used once at
    /// initialization and by the consistency checker.
    pub fn materialize(&self, db: &Database) -> Result<BTreeMap<String, TupleSet>, MaintainError> {
        let mut env = AvEnv::new();
        self.register_virtuals(&mut env)?;
        for relation in db.catalog().topo_order().expect("validated catalog") {
            for unit in self.units_for(&relation) {
                let extent = match unit {
                    AvUnit::Single(def) => crate::relstore::eval_av(db, def, &env)?,
                    AvUnit::Glued(glued) => glued.materialize(db, &env)?,
                };
                env.insert_extent(unit.name().to_string(), extent);
            }
        }
        Ok(env.extents().clone())
    }
}

/// Per-view maintenance counters.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ViewCounters {
    /// Delta joins actually evaluated for this view.
    pub delta_joins: u64,
    /// Applications skipped because the inserted relation is referenced
    /// within the view (no evaluation performed).
    pub skipped: u64,
}

/// Materialized views plus auxiliary views, mutated in place by insertion
/// batches. Holds no reference to base data.
#[derive(Debug, Clone)]
pub struct WarehouseState {
    catalog: Catalog,
    views: BTreeMap<String, ViewDef>,
    digraphs: BTreeMap<String, ViewDigraph>,
    plan: MaintenancePlan,
    mvs: BTreeMap<String, TupleSet>,
    avs: BTreeMap<String, TupleSet>,
    counters: BTreeMap<String, ViewCounters>,
    topo: Vec<String>,
}

/// Materializes the warehouse once from base data. The returned state keeps
/// the catalog and definitions but no base rows.
pub fn init_state(
    db: &Database,
    views: &[ViewDef],
    plan: MaintenancePlan,
) -> Result<WarehouseState, MaintainError> {
    let given: Vec<String> = views.iter().map(|v| v.name.clone()).collect();
    let mut plan_views: Vec<String> = plan.per_view.keys().cloned().collect();
    plan_views.sort();
    let mut sorted_given = given.clone();
    sorted_given.sort();
    if plan_views != sorted_given {
        return Err(MaintainError::PlanViewMismatch {
            plan: plan_views,
            given,
        });
    }

    let catalog = db.catalog().clone();
    let mut mvs = BTreeMap::new();
    let mut digraphs = BTreeMap::new();
    let mut counters = BTreeMap::new();
    for view in views {
        mvs.insert(view.name.clone(), evaluate_view(db, view)?);
        digraphs.insert(view.name.clone(), view_join_digraph(&catalog, view));
        counters.insert(view.name.clone(), ViewCounters::default());
    }
    let avs = plan.materialize(db)?;
    let topo = catalog.topo_order().expect("validated catalog");
    Ok(WarehouseState {
        catalog,
        views: views.iter().map(|v| (v.name.clone(), v.clone())).collect(),
        digraphs,
        plan,
        mvs,
        avs,
        counters,
        topo,
    })
}

impl WarehouseState {
    pub fn catalog(&self) -> &Catalog {
        &self.catalog
    }

    pub fn views(&self) -> impl Iterator<Item = &ViewDef> {
        self.views.values()
    }

    pub fn mv(&self, view: &str) -> Option<&TupleSet> {
        self.mvs.get(view)
    }

    pub fn mvs(&self) -> &BTreeMap<String, TupleSet> {
        &self.mvs
    }

    pub fn av(&self, name: &str) -> Option<&TupleSet> {
        self.avs.get(name)
    }

    pub fn avs(&self) -> &BTreeMap<String, TupleSet> {
        &self.avs
    }

    pub fn plan(&self) -> &MaintenancePlan {
        &self.plan
    }

    pub fn counters(&self, view: &str) -> ViewCounters {
        self.counters.get(view).copied().unwrap_or_default()
    }

    /// Applies a batch in the catalog's referenced-first order.
    pub fn apply_batch(&mut self, batch: &InsertionBatch) -> Result<ViewDelta, MaintainError> {
        let order = self.topo.clone();
        self.apply_batch_ordered(batch, &order)
    }

    /// Applies a batch processing relations in the given order, which must
    /// be a topological order of the catalog (referenced before
    /// referencing). Any such order yields the same final state.
    pub fn apply_batch_ordered(
        &mut self,
        batch: &InsertionBatch,
        order: &[String],
    ) -> Result<ViewDelta, MaintainError> {
        self.check_order(order)?;
        self.check_batch(batch)?;

        // Stage on clones; swap in only when the whole batch computed.
        let mut avs = self.avs.clone();
        let mut mvs = self.mvs.clone();
        let mut counters = self.counters.clone();
        let mut delta = ViewDelta::new();

        for relation in order {
            let Some(rows) = batch.get(relation) else {
                continue;
            };
            if rows.is_empty() {
                continue;
            }
            let row_refs: Vec<&Tuple> = rows.iter().collect();

            // View deltas first: they read only other relations' AVs, which
            // this relation's own AV updates cannot affect.
            for (view_name, view) in &self.views {
                if !view.relations.contains(relation) {
                    continue;
                }
                let counter = counters.entry(view_name.clone()).or_default();
                if self.digraphs[view_name].in_degree(relation) >= 1 {
                    // Existing rows elsewhere cannot reference the fresh
                    // keys in this delta; nothing to evaluate.
                    counter.skipped += 1;
                    continue;
                }
                counter.delta_joins += 1;
                let additions = self.delta_join(view, relation, &row_refs, &avs)?;
                let mv = mvs.get_mut(view_name).expect("initialized view");
                let mut added = TupleSet::new(additions.columns.clone());
                for row in additions.rows() {
                    if mv.insert(row.clone()) {
                        added.insert(row.clone());
                    }
                }
                if !added.is_empty() {
                    match delta.entry(view_name.clone()) {
                        std::collections::btree_map::Entry::Vacant(slot) => {
                            slot.insert(added);
                        }
                        std::collections::btree_map::Entry::Occupied(mut slot) => {
                            for row in added.rows() {
                                slot.get_mut().insert(row.clone());
                            }
                        }
                    }
                }
            }

            // Then fold the delta into this relation's stored AV units.
            for unit in self.plan.units_for(relation) {
                let additions = self.unit_additions(unit, relation, &row_refs, &avs)?;
                let extent = avs.get_mut(unit.name()).expect("initialized unit");
                for row in additions {
                    extent.insert(row);
                }
            }
        }

        self.avs = avs;
        self.mvs = mvs;
        self.counters = counters;
        Ok(delta)
    }

    /// Computes the view additions an insertion into `relation` produces,
    /// without mutating state. AV deltas of relations earlier in the
    /// referenced-first order must already be applied.
    pub fn mv_delta(&self, relation: &str, rows: &[Tuple]) -> Result<ViewDelta, MaintainError> {
        let row_refs: Vec<&Tuple> = rows.iter().collect();
        let mut delta = ViewDelta::new();
        for (view_name, view) in &self.views {
            if !view.relations.contains(&relation.to_string())
                || self.digraphs[view_name].in_degree(relation) >= 1
            {
                continue;
            }
            let additions = self.delta_join(view, relation, &row_refs, &self.avs)?;
            let mv = &self.mvs[view_name];
            let fresh = additions.difference(mv);
            if !fresh.is_empty() {
                delta.insert(view_name.clone(), fresh);
            }
        }
        Ok(delta)
    }

    /// Computes per-AV-unit additions for an insertion into `relation`,
    /// without mutating state.
    pub fn av_delta(
        &self,
        relation: &str,
        rows: &[Tuple],
    ) -> Result<BTreeMap<String, Vec<Tuple>>, MaintainError> {
        let row_refs: Vec<&Tuple> = rows.iter().collect();
        let mut out = BTreeMap::new();
        for unit in self.plan.units_for(relation) {
            let additions = self.unit_additions(unit, relation, &row_refs, &self.avs)?;
            if !additions.is_empty() {
                out.insert(unit.name().to_string(), additions);
            }
        }
        Ok(out)
    }

    /// Joins a delta on the view's source relation outward through the
    /// view's AV chain and projects to the view output.
    fn delta_join(
        &self,
        view: &ViewDef,
        relation: &str,
        rows: &[&Tuple],
        avs: &BTreeMap<String, TupleSet>,
    ) -> Result<TupleSet, MaintainError> {
        let env = self.env_over(avs)?;
        let schema = self
            .catalog
            .relation(relation)
            .expect("validated view relation");
        let columns: Vec<String> = schema.attr_names().map(str::to_string).collect();
        let local = CompiledPredicate::compile(
            view.local_predicates.get(relation),
            &columns,
            relation,
            &env,
        )?;
        let delta_rows: Vec<&Tuple> = rows
            .iter()
            .copied()
            .filter(|row| local.matches(row))
            .collect();

        // Resolve the per-view AV extent for every other view relation;
        // glued units are seen through their parent reconstruction.
        let avset = self.plan.view_avs(&view.name).expect("plan covers view");
        let mut resolved = Vec::new();
        for other in &view.relations {
            if other == relation {
                continue;
            }
            let def = &avset.avs[other];
            let extent = env.resolve(&def.name)?.into_owned();
            resolved.push((other.clone(), def.retained_attributes.clone(), extent));
        }

        let mut leaves = Vec::with_capacity(view.relations.len());
        leaves.push(JoinLeaf {
            relation: relation.to_string(),
            columns,
            rows: delta_rows,
        });
        for (rel, attrs, extent) in &resolved {
            leaves.push(JoinLeaf {
                relation: rel.clone(),
                columns: attrs.clone(),
                rows: extent.rows().collect(),
            });
        }
        join_leaves(&leaves, &view.joins, &view.output).map_err(MaintainError::Store)
    }

    /// Rows of a delta that belong in one stored AV unit, projected to the
    /// unit's stored attributes (discriminators come straight from the
    /// delta tuple) and deduplicated against the current extent.
    fn unit_additions(
        &self,
        unit: &AvUnit,
        relation: &str,
        rows: &[&Tuple],
        avs: &BTreeMap<String, TupleSet>,
    ) -> Result<Vec<Tuple>, MaintainError> {
        let env = self.env_over(avs)?;
        let schema = self.catalog.relation(relation).expect("plan relation");
        let columns: Vec<String> = schema.attr_names().map(str::to_string).collect();
        let condition = unit.condition();
        let pred = CompiledPredicate::compile(condition.as_ref(), &columns, relation, &env)?;
        let indices: Vec<usize> = unit
            .stored_attributes()
            .iter()
            .map(|a| schema.attr_index(a).expect("validated attribute"))
            .collect();
        let extent = &avs[unit.name()];
        let mut additions = Vec::new();
        for row in rows {
            if pred.matches(row) {
                let projected: Tuple = indices.iter().map(|&i| row[i].clone()).collect();
                if !extent.contains(&projected) && !additions.contains(&projected) {
                    additions.push(projected);
                }
            }
        }
        Ok(additions)
    }

    /// Evaluation environment over the given extent store, with glued
    /// parents resolvable by name.
    fn env_over(&self, avs: &BTreeMap<String, TupleSet>) -> Result<AvEnv, MaintainError> {
        let mut env = AvEnv::new();
        for (name, extent) in avs {
            env.insert_extent(name.clone(), extent.clone());
        }
        self.plan.register_virtuals(&mut env)?;
        Ok(env)
    }

    fn check_order(&self, order: &[String]) -> Result<(), MaintainError> {
        let mut position = BTreeMap::new();
        for (idx, name) in order.iter().enumerate() {
            if position.insert(name.as_str(), idx).is_some() {
                return Err(MaintainError::BadOrder);
            }
        }
        if position.len() != self.catalog.len() {
            return Err(MaintainError::BadOrder);
        }
        for rel in self.catalog.relations() {
            let Some(&at) = position.get(rel.name.as_str()) else {
                return Err(MaintainError::BadOrder);
            };
            for fk in &rel.foreign_keys {
                let target_at = position[fk.target_relation.as_str()];
                if target_at > at {
                    return Err(MaintainError::NotTopological {
                        referencing: rel.name.clone(),
                        referenced: fk.target_relation.clone(),
                    });
                }
            }
        }
        Ok(())
    }

    /// Shape validation: known relations, arity/domain per schema, and no
    /// duplicate primary key within the batch. Full key freshness and
    /// foreign-key validity are the source's contract; the warehouse holds
    /// no base data to check them against.
    fn check_batch(&self, batch: &InsertionBatch) -> Result<(), MaintainError> {
        for (relation, rows) in batch {
            let schema = self
                .catalog
                .relation(relation)
                .ok_or_else(|| StoreError::UnknownRelation(relation.clone()))?;
            let mut keys = std::collections::BTreeSet::new();
            for row in rows {
                check_row(schema, row)?;
                let key = row_key(schema, row);
                if !keys.insert(key.clone()) {
                    return Err(MaintainError::Store(StoreError::DuplicatePrimaryKey {
                        relation: relation.clone(),
                        key: key
                            .iter()
                            .map(|v| v.to_string())
                            .collect::<Vec<_>>()
                            .join(","),
                    }));
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::avderive::derive_av_set;
    use crate::catalog::{parse_schema, parse_view};
    use crate::gluing::merge_av_sets;
    use crate::value::Value;

    fn catalog() -> Catalog {
        parse_schema(
            "CREATE TABLE Department (
               Dep_no INTEGER, Dep_name TEXT(16), HOD_name TEXT(16), PRIMARY KEY (Dep_no)
             );
             CREATE TABLE Student (
               Roll_no INTEGER, Name TEXT(16), Dep_no INTEGER,
               PRIMARY KEY (Roll_no),
               FOREIGN KEY (Dep_no) REFERENCES Department (Dep_no)
             );
             CREATE TABLE Results (
               Result_id INTEGER, Roll_no INTEGER, GPA DECIMAL,
               PRIMARY KEY (Result_id),
               FOREIGN KEY (Roll_no) REFERENCES Student (Roll_no)
             );",
        )
        .unwrap()
    }

    fn views(catalog: &Catalog) -> Vec<ViewDef> {
        ["IT", "BBA"]
            .iter()
            .map(|dept| {
                parse_view(
                    &format!(
                        "CREATE VIEW marks_{dept} AS
                         SELECT Results.GPA, Student.Name, Department.HOD_name
                         FROM Department, Student, Results
                         WHERE Results.Roll_no = Student.Roll_no
                           and Student.Dep_no = Department.Dep_no
                           and Department.Dep_name = '{dept}';"
                    ),
                    catalog,
                )
                .unwrap()
            })
            .collect()
    }

    fn seed_db(catalog: &Catalog) -> Database {
        let mut db = Database::new(catalog.clone());
        db.insert_batch(&InsertionBatch::from([
            (
                "Department".to_string(),
                vec![
                    vec![Value::Int(1), Value::text("IT"), Value::text("H1")],
                    vec![Value::Int(2), Value::text("BBA"), Value::text("H2")],
                    vec![Value::Int(3), Value::text("EE"), Value::text("H3")],
                ],
            ),
            (
                "Student".to_string(),
                vec![
                    vec![Value::Int(10), Value::text("Ali"), Value::Int(1)],
                    vec![Value::Int(11), Value::text("Sara"), Value::Int(2)],
                    vec![Value::Int(12), Value::text("Bilal"), Value::Int(3)],
                ],
            ),
        ]))
        .unwrap();
        db
    }

    fn glued_state(db: &Database, views: &[ViewDef]) -> WarehouseState {
        let catalog = db.catalog();
        let avsets: Vec<_> = views.iter().map(|v| derive_av_set(catalog, v)).collect();
        let merged = merge_av_sets(db, &avsets[0], &avsets[1]).unwrap();
        let plan = MaintenancePlan::merged(avsets, merged).unwrap();
        init_state(db, views, plan).unwrap()
    }

    /// Applies to both the warehouse and the shadow base, then checks the
    /// MVs against a fresh recompute and the AVs against re-materialization.
    fn apply_and_check(
        state: &mut WarehouseState,
        db: &mut Database,
        batch: InsertionBatch,
    ) -> ViewDelta {
        db.insert_batch(&batch).unwrap();
        let delta = state.apply_batch(&batch).unwrap();
        for view in views(db.catalog()) {
            let oracle = evaluate_view(db, &view).unwrap();
            assert_eq!(
                state.mv(&view.name).unwrap(),
                &oracle,
                "MV {} drifted",
                view.name
            );
        }
        let fresh = state.plan().materialize(db).unwrap();
        assert_eq!(state.avs(), &fresh, "AV extents drifted");
        delta
    }

    #[test]
    fn init_materializes_mvs_and_avs() {
        let catalog = catalog();
        let db = seed_db(&catalog);
        let views = views(&catalog);
        let state = glued_state(&db, &views);
        assert_eq!(state.mvs().len(), 2);
        // One glued unit per AV-bearing relation (Department, Student).
        assert_eq!(state.avs().len(), 2);
        assert!(state.mv("marks_IT").unwrap().is_empty());
    }

    #[test]
    fn empty_database_initializes_empty() {
        let catalog = catalog();
        let db = Database::new(catalog.clone());
        let views = views(&catalog);
        let state = glued_state(&db, &views);
        assert!(state.mvs().values().all(TupleSet::is_empty));
        assert!(state.avs().values().all(TupleSet::is_empty));
    }

    #[test]
    fn plan_must_cover_the_views() {
        let catalog = catalog();
        let db = seed_db(&catalog);
        let views = views(&catalog);
        let plan = MaintenancePlan::separate(vec![derive_av_set(&catalog, &views[0])]);
        assert!(matches!(
            init_state(&db, &views, plan),
            Err(MaintainError::PlanViewMismatch { .. })
        ));
    }

    #[test]
    fn source_insert_lands_in_exactly_the_matching_view() {
        let catalog = catalog();
        let mut db = seed_db(&catalog);
        let view_list = views(&catalog);
        let mut state = glued_state(&db, &view_list);
        // A result for an IT student.
        let delta = apply_and_check(
            &mut state,
            &mut db,
            InsertionBatch::from([(
                "Results".to_string(),
                vec![vec![Value::Int(100), Value::Int(10), Value::Dec(3.into())]],
            )]),
        );
        assert_eq!(delta.len(), 1);
        assert_eq!(delta["marks_IT"].len(), 1);
        // A result for the EE student lands nowhere.
        let delta = apply_and_check(
            &mut state,
            &mut db,
            InsertionBatch::from([(
                "Results".to_string(),
                vec![vec![Value::Int(101), Value::Int(12), Value::Dec(2.into())]],
            )]),
        );
        assert!(delta.is_empty());
    }

    #[test]
    fn referenced_relation_inserts_are_skipped_not_evaluated() {
        let catalog = catalog();
        let mut db = seed_db(&catalog);
        let view_list = views(&catalog);
        let mut state = glued_state(&db, &view_list);
        let before = state.counters("marks_IT");
        let delta = apply_and_check(
            &mut state,
            &mut db,
            InsertionBatch::from([(
                "Student".to_string(),
                vec![vec![Value::Int(13), Value::text("Zara"), Value::Int(1)]],
            )]),
        );
        assert!(delta.is_empty());
        let after = state.counters("marks_IT");
        assert_eq!(after.skipped, before.skipped + 1);
        assert_eq!(after.delta_joins, before.delta_joins);
        // The student entered the glued AV though.
        let av_rows: usize = state.avs().values().map(TupleSet::len).sum();
        assert_eq!(av_rows, 2 + 3); // two departments, Ali+Sara+Zara
    }

    #[test]
    fn intra_batch_chain_produces_view_rows() {
        let catalog = catalog();
        let mut db = seed_db(&catalog);
        let view_list = views(&catalog);
        let mut state = glued_state(&db, &view_list);
        // New student in IT plus a result for them, one batch.
        let delta = apply_and_check(
            &mut state,
            &mut db,
            InsertionBatch::from([
                (
                    "Student".to_string(),
                    vec![vec![Value::Int(14), Value::text("Omar"), Value::Int(1)]],
                ),
                (
                    "Results".to_string(),
                    vec![vec![Value::Int(102), Value::Int(14), Value::Dec(4.into())]],
                ),
            ]),
        );
        assert_eq!(delta["marks_IT"].len(), 1);
        assert!(!delta.contains_key("marks_BBA"));
    }

    #[test]
    fn new_department_matching_predicate_extends_the_av() {
        let catalog = catalog();
        let mut db = seed_db(&catalog);
        let view_list = views(&catalog);
        let mut state = glued_state(&db, &view_list);
        // A second department named IT: its students must flow into
        // marks_IT through the discriminated glued AVs.
        apply_and_check(
            &mut state,
            &mut db,
            InsertionBatch::from([(
                "Department".to_string(),
                vec![vec![Value::Int(4), Value::text("IT"), Value::text("H4")]],
            )]),
        );
        let delta = apply_and_check(
            &mut state,
            &mut db,
            InsertionBatch::from([
                (
                    "Student".to_string(),
                    vec![vec![Value::Int(15), Value::text("Noor"), Value::Int(4)]],
                ),
                (
                    "Results".to_string(),
                    vec![vec![Value::Int(103), Value::Int(15), Value::Dec(3.into())]],
                ),
            ]),
        );
        assert_eq!(delta["marks_IT"].len(), 1);
        let row = delta["marks_IT"].rows().next().unwrap().clone();
        assert_eq!(row[2], Value::text("H4"));
    }

    #[test]
    fn non_matching_department_changes_nothing() {
        let catalog = catalog();
        let mut db = seed_db(&catalog);
        let view_list = views(&catalog);
        let mut state = glued_state(&db, &view_list);
        let avs_before = state.avs().clone();
        let delta = apply_and_check(
            &mut state,
            &mut db,
            InsertionBatch::from([(
                "Department".to_string(),
                vec![vec![Value::Int(5), Value::text("Math"), Value::text("H5")]],
            )]),
        );
        assert!(delta.is_empty());
        assert_eq!(state.avs(), &avs_before);
    }

    #[test]
    fn empty_batch_is_a_no_op() {
        let catalog = catalog();
        let db = seed_db(&catalog);
        let view_list = views(&catalog);
        let mut state = glued_state(&db, &view_list);
        let before = state.clone_extents();
        let delta = state.apply_batch(&InsertionBatch::new()).unwrap();
        assert!(delta.is_empty());
        assert_eq!(state.clone_extents(), before);
    }

    #[test]
    fn malformed_batch_leaves_state_unchanged() {
        let catalog = catalog();
        let db = seed_db(&catalog);
        let view_list = views(&catalog);
        let mut state = glued_state(&db, &view_list);
        let before = state.clone_extents();
        let err = state
            .apply_batch(&InsertionBatch::from([(
                "Student".to_string(),
                vec![vec![Value::Int(20)]],
            )]))
            .unwrap_err();
        assert!(matches!(
            err,
            MaintainError::Store(StoreError::ArityMismatch { .. })
        ));
        let err = state
            .apply_batch(&InsertionBatch::from([(
                "Student".to_string(),
                vec![
                    vec![Value::Int(20), Value::text("A"), Value::Int(1)],
                    vec![Value::Int(20), Value::text("B"), Value::Int(1)],
                ],
            )]))
            .unwrap_err();
        assert!(matches!(
            err,
            MaintainError::Store(StoreError::DuplicatePrimaryKey { .. })
        ));
        assert_eq!(state.clone_extents(), before);
    }

    #[test]
    fn any_topological_order_yields_the_same_state() {
        let catalog = catalog();
        let mut db = seed_db(&catalog);
        let view_list = views(&catalog);
        let mut a = glued_state(&db, &view_list);
        let mut b = a.clone();
        let batch = InsertionBatch::from([
            (
                "Department".to_string(),
                vec![vec![Value::Int(6), Value::text("IT"), Value::text("H6")]],
            ),
            (
                "Student".to_string(),
                vec![vec![Value::Int(16), Value::text("Hira"), Value::Int(6)]],
            ),
            (
                "Results".to_string(),
                vec![vec![Value::Int(104), Value::Int(16), Value::Dec(3.into())]],
            ),
        ]);
        db.insert_batch(&batch).unwrap();
        let d1 = a
            .apply_batch_ordered(
                &batch,
                &["Department".into(), "Student".into(), "Results".into()],
            )
            .unwrap();
        // The chain admits exactly one topological order; a transposed one
        // must be rejected.
        let err = b
            .apply_batch_ordered(
                &batch,
                &["Student".into(), "Department".into(), "Results".into()],
            )
            .unwrap_err();
        assert!(matches!(err, MaintainError::NotTopological { .. }));
        let d2 = b.apply_batch(&batch).unwrap();
        assert_eq!(d1, d2);
        assert_eq!(a.clone_extents(), b.clone_extents());
    }

    #[test]
    fn diamond_schema_orders_commute() {
        // Marks and Fees both reference Student, which references
        // Department: two incomparable mid-level relations, so two distinct
        // topological orders exist.
        let catalog = parse_schema(
            "CREATE TABLE Department (
               Dep_no INTEGER, Dep_name TEXT(16), PRIMARY KEY (Dep_no)
             );
             CREATE TABLE Student (
               Roll_no INTEGER, Dep_no INTEGER,
               PRIMARY KEY (Roll_no),
               FOREIGN KEY (Dep_no) REFERENCES Department (Dep_no)
             );
             CREATE TABLE Marks (
               Mark_id INTEGER, Roll_no INTEGER, Score INTEGER,
               PRIMARY KEY (Mark_id),
               FOREIGN KEY (Roll_no) REFERENCES Student (Roll_no)
             );
             CREATE TABLE Fees (
               Fee_id INTEGER, Roll_no INTEGER, Amount INTEGER,
               PRIMARY KEY (Fee_id),
               FOREIGN KEY (Roll_no) REFERENCES Student (Roll_no)
             );",
        )
        .unwrap();
        let marks_view = parse_view(
            "CREATE VIEW high_marks AS
             SELECT Marks.Score, Student.Roll_no
             FROM Department, Student, Marks
             WHERE Marks.Roll_no = Student.Roll_no
               and Student.Dep_no = Department.Dep_no
               and Department.Dep_name = 'IT';",
            &catalog,
        )
        .unwrap();
        let fees_view = parse_view(
            "CREATE VIEW it_fees AS
             SELECT Fees.Amount, Student.Roll_no
             FROM Department, Student, Fees
             WHERE Fees.Roll_no = Student.Roll_no
               and Student.Dep_no = Department.Dep_no
               and Department.Dep_name = 'IT';",
            &catalog,
        )
        .unwrap();
        let mut db = Database::new(catalog.clone());
        db.insert_batch(&InsertionBatch::from([
            (
                "Department".to_string(),
                vec![vec![Value::Int(1), Value::text("IT")]],
            ),
            (
                "Student".to_string(),
                vec![vec![Value::Int(10), Value::Int(1)]],
            ),
        ]))
        .unwrap();
        let views = vec![marks_view, fees_view];
        let avsets: Vec<_> = views.iter().map(|v| derive_av_set(&catalog, v)).collect();
        let plan = MaintenancePlan::separate(avsets);
        let mut a = init_state(&db, &views, plan).unwrap();
        let mut b = a.clone();

        let batch = InsertionBatch::from([
            (
                "Student".to_string(),
                vec![vec![Value::Int(11), Value::Int(1)]],
            ),
            (
                "Marks".to_string(),
                vec![vec![Value::Int(1), Value::Int(11), Value::Int(90)]],
            ),
            (
                "Fees".to_string(),
                vec![vec![Value::Int(1), Value::Int(11), Value::Int(500)]],
            ),
        ]);
        let order1: Vec<String> = ["Department", "Student", "Fees", "Marks"]
            .map(String::from)
            .into();
        let order2: Vec<String> = ["Department", "Student", "Marks", "Fees"]
            .map(String::from)
            .into();
        let d1 = a.apply_batch_ordered(&batch, &order1).unwrap();
        let d2 = b.apply_batch_ordered(&batch, &order2).unwrap();
        assert_eq!(d1, d2);
        assert_eq!(a.clone_extents(), b.clone_extents());
        assert_eq!(d1["high_marks"].len(), 1);
        assert_eq!(d1["it_fees"].len(), 1);
    }

    impl WarehouseState {
        fn clone_extents(&self) -> (BTreeMap<String, TupleSet>, BTreeMap<String, TupleSet>) {
            (self.mvs.clone(), self.avs.clone())
        }
    }
}
