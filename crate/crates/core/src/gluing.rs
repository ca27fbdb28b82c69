//! Gluing of auxiliary views across materialized views.
//!
//! Two auxiliary views over the same source relation can be stored as one
//! extent: the projection onto the union of their attributes, selected by
//! the disjunction of their conditions. Each parent remains reconstructable
//! by re-applying its own condition and projection, so the merged warehouse
//! serves both views. The merge is taken only when the byte-cost rule says
//! the glued extent is no larger than keeping the pair.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write;

use crate::avderive::{AvDef, AvSet};
use crate::catalog::{Catalog, Predicate};
use crate::relstore::{
    eval_av, filter_project_relation, filter_project_set, AvEnv, Database, StoreError, TupleSet,
    VirtualAv,
};

/// Errors from gluing and merging.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum GlueError {
    #[error("cannot glue `{0}` with `{1}`: different source relations")]
    DifferentSourceRelations(String, String),
    #[error("shared width {shared} exceeds a parent tuple width ({b1}, {b2})")]
    SharedWidthExceedsParent { shared: u64, b1: u64, b2: u64 },
    #[error("glued view `{glued}` has no parent {index}")]
    NoSuchParent { glued: String, index: usize },
    #[error(transparent)]
    Store(#[from] StoreError),
}

/// A glued auxiliary view: one stored extent serving several parent AVs.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GluedAv {
    pub name: String,
    pub source_relation: String,
    /// Stored attributes in schema order: the union of the parents'
    /// retained attributes plus every attribute their conditions mention,
    /// so each parent's selection stays evaluable over the glued extent.
    pub attributes: Vec<String>,
    /// Disjunction of the parents' full conditions; `None` means all rows.
    pub condition: Option<Predicate>,
    pub parents: Vec<AvDef>,
}

impl GluedAv {
    pub fn parent(&self, index: usize) -> Result<&AvDef, GlueError> {
        self.parents
            .get(index)
            .ok_or_else(|| GlueError::NoSuchParent {
                glued: self.name.clone(),
                index,
            })
    }

    /// Reconstruction recipe for one parent, usable as an [`AvEnv`] virtual.
    pub fn parent_virtual(&self, index: usize) -> Result<VirtualAv, GlueError> {
        let parent = self.parent(index)?;
        Ok(VirtualAv {
            extent: self.name.clone(),
            condition: parent.full_condition(),
            projection: parent.retained_attributes.clone(),
        })
    }

    /// Materializes the glued extent over the base database.
    pub fn materialize(&self, db: &Database, env: &AvEnv) -> Result<TupleSet, StoreError> {
        filter_project_relation(
            db,
            &self.source_relation,
            self.condition.as_ref(),
            &self.attributes,
            env,
        )
    }
}

/// One stored extent in a merged plan: a plain AV or a glued one.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum AvUnit {
    Single(AvDef),
    Glued(GluedAv),
}

impl AvUnit {
    pub fn name(&self) -> &str {
        match self {
            AvUnit::Single(def) => &def.name,
            AvUnit::Glued(glued) => &glued.name,
        }
    }

    pub fn source_relation(&self) -> &str {
        match self {
            AvUnit::Single(def) => &def.source_relation,
            AvUnit::Glued(glued) => &glued.source_relation,
        }
    }

    pub fn stored_attributes(&self) -> &[String] {
        match self {
            AvUnit::Single(def) => &def.retained_attributes,
            AvUnit::Glued(glued) => &glued.attributes,
        }
    }

    /// Selection condition of the stored extent.
    pub fn condition(&self) -> Option<Predicate> {
        match self {
            AvUnit::Single(def) => def.full_condition(),
            AvUnit::Glued(glued) => glued.condition.clone(),
        }
    }

    /// The parent AV definitions this unit serves.
    pub fn parents(&self) -> &[AvDef] {
        match self {
            AvUnit::Single(def) => std::slice::from_ref(def),
            AvUnit::Glued(glued) => &glued.parents,
        }
    }
}

/// The cost-model verdict for one attempted glue.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GlueDecision {
    pub relation: String,
    /// Tuple counts of the two inputs.
    pub n1: u64,
    pub n2: u64,
    /// Bytes per tuple of the two inputs.
    pub b1: u64,
    pub b2: u64,
    /// Bytes per tuple of the attributes the inputs share.
    pub shared_width: u64,
    /// Tuple count of the glued extent.
    pub glued_count: u64,
    pub glued_cost: u64,
    pub separate_cost: u64,
    pub chose_glue: bool,
}

/// Applies the byte-cost rule: glue when
/// `glued_count * (b1 + b2 - shared_width) <= n1*b1 + n2*b2`.
/// Ties glue.
pub fn glue_cost(
    relation: &str,
    counts: [u64; 2],
    widths: [u64; 2],
    shared_width: u64,
    glued_count: u64,
) -> Result<GlueDecision, GlueError> {
    let [n1, n2] = counts;
    let [b1, b2] = widths;
    if shared_width > b1.min(b2) {
        return Err(GlueError::SharedWidthExceedsParent {
            shared: shared_width,
            b1,
            b2,
        });
    }
    let glued_cost = glued_count * (b1 + b2 - shared_width);
    let separate_cost = n1 * b1 + n2 * b2;
    Ok(GlueDecision {
        relation: relation.to_string(),
        n1,
        n2,
        b1,
        b2,
        shared_width,
        glued_count,
        glued_cost,
        separate_cost,
        chose_glue: glued_cost <= separate_cost,
    })
}

/// Renders glue decisions as a tab-separated log.
pub fn decisions_to_tsv(decisions: &[GlueDecision]) -> String {
    let mut out =
        String::from("relation\tn1\tn2\tb1\tb2\tB\tC\tglued_cost\tseparate_cost\tchose_glue\n");
    for d in decisions {
        let _ = writeln!(
            out,
            "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}",
            d.relation,
            d.n1,
            d.n2,
            d.b1,
            d.b2,
            d.shared_width,
            d.glued_count,
            d.glued_cost,
            d.separate_cost,
            d.chose_glue
        );
    }
    out
}

fn width_of(catalog: &Catalog, relation: &str, attrs: &[String]) -> u64 {
    let schema = catalog.relation(relation).expect("validated relation");
    attrs
        .iter()
        .map(|a| {
            schema
                .attribute(a)
                .expect("validated attribute")
                .domain
                .byte_width()
        })
        .sum()
}

fn glued_name(relation: &str, parents: &[AvDef]) -> String {
    let mut name = format!("glued_{relation}");
    for parent in parents {
        name.push_str("__");
        name.push_str(&parent.view);
    }
    name
}

/// Builds the glued view over `parents` (all on the same source relation).
fn glue_parents(catalog: &Catalog, parents: Vec<AvDef>) -> Result<GluedAv, GlueError> {
    let relation = parents[0].source_relation.clone();
    if let Some(other) = parents.iter().find(|p| p.source_relation != relation) {
        return Err(GlueError::DifferentSourceRelations(
            relation,
            other.source_relation.clone(),
        ));
    }

    let mut keep: BTreeSet<String> = BTreeSet::new();
    let mut conditions = Vec::with_capacity(parents.len());
    for parent in &parents {
        keep.extend(parent.retained_attributes.iter().cloned());
        let condition = parent.full_condition();
        if let Some(cond) = &condition {
            cond.referenced_attributes(&mut keep);
        }
        conditions.push(condition);
    }
    // A parent with no condition keeps every source row, so the disjunction
    // is vacuous.
    let condition = if conditions.iter().any(Option::is_none) {
        None
    } else {
        conditions.into_iter().flatten().reduce(Predicate::or)
    };

    let schema = catalog.relation(&relation).expect("validated relation");
    let attributes = schema
        .attr_names()
        .filter(|a| keep.contains(*a))
        .map(str::to_string)
        .collect();
    Ok(GluedAv {
        name: glued_name(&relation, &parents),
        source_relation: relation,
        attributes,
        condition,
        parents,
    })
}

/// Glues two auxiliary-view definitions over the same source relation.
pub fn glue_defs(catalog: &Catalog, a: &AvDef, b: &AvDef) -> Result<GluedAv, GlueError> {
    glue_parents(catalog, vec![a.clone(), b.clone()])
}

/// Reconstructs one parent of a glued view from the glued extent: apply the
/// parent's condition, project to its retained attributes.
pub fn reconstruct_av(
    glued: &GluedAv,
    index: usize,
    glued_extent: &TupleSet,
    env: &AvEnv,
) -> Result<TupleSet, GlueError> {
    let parent = glued.parent(index)?;
    filter_project_set(
        glued_extent,
        parent.full_condition().as_ref(),
        &parent.retained_attributes,
        env,
    )
    .map_err(GlueError::Store)
}

/// A merged collection of auxiliary views covering several materialized
/// views: per relation, the stored units (glued or separate), plus the
/// cost-model decision log.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MergedAvSet {
    pub views: Vec<String>,
    pub entries: BTreeMap<String, Vec<AvUnit>>,
    pub decisions: Vec<GlueDecision>,
}

impl MergedAvSet {
    pub fn units(&self) -> impl Iterator<Item = &AvUnit> {
        self.entries.values().flatten()
    }

    pub fn decision_for(&self, relation: &str) -> Option<&GlueDecision> {
        self.decisions.iter().find(|d| d.relation == relation)
    }
}

/// Merges two auxiliary-view sets over the same catalog, measuring glued
/// candidates against `db` and keeping whichever side the cost rule picks.
pub fn merge_av_sets(db: &Database, a1: &AvSet, a2: &AvSet) -> Result<MergedAvSet, GlueError> {
    merge_fold(db, &[a1, a2])
}

/// Pairwise fold of any number of AV sets, in input order. The two-set case
/// is the algorithm proper; more sets are an extension that tries to glue
/// each next AV onto the existing units in order and keeps it separate when
/// every attempt loses on cost.
pub fn merge_fold(db: &Database, sets: &[&AvSet]) -> Result<MergedAvSet, GlueError> {
    let catalog = db.catalog().clone();

    // Measurement environment: every per-view AV materialized directly,
    // referenced relations first so memberships resolve.
    let mut env = AvEnv::new();
    for relation in catalog.topo_order().expect("validated catalog") {
        for set in sets {
            if let Some(def) = set.avs.get(&relation) {
                let extent = eval_av(db, def, &env)?;
                env.insert_extent(def.name.clone(), extent);
            }
        }
    }

    let mut relations: BTreeSet<&str> = BTreeSet::new();
    for set in sets {
        relations.extend(set.avs.keys().map(String::as_str));
    }

    let mut entries: BTreeMap<String, Vec<AvUnit>> = BTreeMap::new();
    let mut decisions = Vec::new();
    for relation in relations {
        let mut units: Vec<AvUnit> = Vec::new();
        for set in sets {
            let Some(def) = set.avs.get(relation) else {
                continue;
            };
            let def_count = env.resolve(&def.name)?.len() as u64;
            let def_width = width_of(&catalog, relation, &def.retained_attributes);

            let mut glued_in = None;
            for (idx, unit) in units.iter().enumerate() {
                let mut parents = unit.parents().to_vec();
                parents.push(def.clone());
                let candidate = glue_parents(&catalog, parents)?;
                let candidate_extent = candidate.materialize(db, &env)?;

                let unit_count = env.resolve(unit.name())?.len() as u64;
                let unit_width = width_of(&catalog, relation, unit.stored_attributes());
                let shared: Vec<String> = unit
                    .stored_attributes()
                    .iter()
                    .filter(|a| def.retained_attributes.contains(a))
                    .cloned()
                    .collect();
                let decision = glue_cost(
                    relation,
                    [unit_count, def_count],
                    [unit_width, def_width],
                    width_of(&catalog, relation, &shared),
                    candidate_extent.len() as u64,
                )?;
                let accepted = decision.chose_glue;
                decisions.push(decision);
                if accepted {
                    env.insert_extent(candidate.name.clone(), candidate_extent);
                    glued_in = Some((idx, candidate));
                    break;
                }
            }
            match glued_in {
                Some((idx, glued)) => units[idx] = AvUnit::Glued(glued),
                None => units.push(AvUnit::Single(def.clone())),
            }
        }
        entries.insert(relation.to_string(), units);
    }
    Ok(MergedAvSet {
        views: sets.iter().map(|s| s.view.clone()).collect(),
        entries,
        decisions,
    })
}
