//! Relational evaluation: predicate compilation, hash joins over
//! foreign-key edges, view evaluation, and auxiliary-view materialization.
//!
//! [`evaluate_view`] recomputes a view from base relations and doubles as
//! the recompute oracle the maintenance engine is checked against.

use std::borrow::Cow;
use std::collections::{BTreeMap, HashMap, HashSet};

use crate::avderive::AvDef;
use crate::catalog::{JoinEdge, Predicate, ViewDef};
use crate::value::Value;

use super::{Database, StoreError, Tuple, TupleSet};

/// Resolves auxiliary-view names to materialized extents during predicate
/// evaluation. A name resolves either directly to a stored extent or
/// through a *virtual* entry that reconstructs a glued view's parent by
/// filtering and projecting the glued extent.
#[derive(Debug, Clone, Default)]
pub struct AvEnv {
    extents: BTreeMap<String, TupleSet>,
    virtuals: BTreeMap<String, VirtualAv>,
}

/// Reconstruction recipe for one parent of a glued extent.
#[derive(Debug, Clone)]
pub struct VirtualAv {
    /// Name of the stored (glued) extent to reconstruct from.
    pub extent: String,
    pub condition: Option<Predicate>,
    pub projection: Vec<String>,
}

impl AvEnv {
    pub fn new() -> Self {
        AvEnv::default()
    }

    pub fn insert_extent(&mut self, name: impl Into<String>, extent: TupleSet) {
        self.extents.insert(name.into(), extent);
    }

    pub fn insert_virtual(&mut self, name: impl Into<String>, virt: VirtualAv) {
        self.virtuals.insert(name.into(), virt);
    }

    pub fn extents(&self) -> &BTreeMap<String, TupleSet> {
        &self.extents
    }

    /// Looks up an extent, reconstructing through virtual entries.
    pub fn resolve(&self, name: &str) -> Result<Cow<'_, TupleSet>, StoreError> {
        if let Some(extent) = self.extents.get(name) {
            return Ok(Cow::Borrowed(extent));
        }
        let virt = self
            .virtuals
            .get(name)
            .ok_or_else(|| StoreError::UnresolvedAv(name.to_string()))?;
        let base = self
            .extents
            .get(&virt.extent)
            .ok_or_else(|| StoreError::UnresolvedAv(virt.extent.clone()))?;
        filter_project_set(base, virt.condition.as_ref(), &virt.projection, self).map(Cow::Owned)
    }
}

/// A predicate lowered against a concrete column list, with semijoin
/// memberships resolved to lookup sets.
#[derive(Debug, Clone)]
pub enum CompiledPredicate {
    True,
    Cmp {
        index: usize,
        op: crate::catalog::CmpOp,
        value: Value,
    },
    And(Box<CompiledPredicate>, Box<CompiledPredicate>),
    Or(Box<CompiledPredicate>, Box<CompiledPredicate>),
    InSet {
        indices: Vec<usize>,
        set: HashSet<Tuple>,
    },
}

impl CompiledPredicate {
    /// Lowers `pred` against `columns`. Membership nodes are resolved
    /// through `env` at compile time, so evaluation is pure row work.
    pub fn compile(
        pred: Option<&Predicate>,
        columns: &[String],
        scope: &str,
        env: &AvEnv,
    ) -> Result<Self, StoreError> {
        match pred {
            None => Ok(CompiledPredicate::True),
            Some(pred) => Self::compile_node(pred, columns, scope, env),
        }
    }

    fn compile_node(
        pred: &Predicate,
        columns: &[String],
        scope: &str,
        env: &AvEnv,
    ) -> Result<Self, StoreError> {
        let column = |name: &str| {
            columns
                .iter()
                .position(|c| c == name)
                .ok_or_else(|| StoreError::MissingColumn {
                    extent: scope.to_string(),
                    column: name.to_string(),
                })
        };
        match pred {
            Predicate::Cmp {
                attribute,
                op,
                value,
            } => Ok(CompiledPredicate::Cmp {
                index: column(attribute)?,
                op: *op,
                value: value.clone(),
            }),
            Predicate::And(a, b) => Ok(CompiledPredicate::And(
                Box::new(Self::compile_node(a, columns, scope, env)?),
                Box::new(Self::compile_node(b, columns, scope, env)?),
            )),
            Predicate::Or(a, b) => Ok(CompiledPredicate::Or(
                Box::new(Self::compile_node(a, columns, scope, env)?),
                Box::new(Self::compile_node(b, columns, scope, env)?),
            )),
            Predicate::InAv {
                attributes,
                av,
                av_attributes,
            } => {
                let indices = attributes
                    .iter()
                    .map(|a| column(a))
                    .collect::<Result<Vec<_>, _>>()?;
                let extent = env.resolve(av)?;
                let positions: Vec<usize> = av_attributes
                    .iter()
                    .map(|a| {
                        extent
                            .column_index(a)
                            .ok_or_else(|| StoreError::MissingColumn {
                                extent: av.clone(),
                                column: a.clone(),
                            })
                    })
                    .collect::<Result<_, _>>()?;
                let set = extent
                    .rows()
                    .map(|row| positions.iter().map(|&i| row[i].clone()).collect())
                    .collect();
                Ok(CompiledPredicate::InSet { indices, set })
            }
        }
    }

    pub fn matches(&self, row: &[Value]) -> bool {
        match self {
            CompiledPredicate::True => true,
            CompiledPredicate::Cmp { index, op, value } => op.eval(row[*index].cmp(value)),
            CompiledPredicate::And(a, b) => a.matches(row) && b.matches(row),
            CompiledPredicate::Or(a, b) => a.matches(row) || b.matches(row),
            CompiledPredicate::InSet { indices, set } => {
                let key: Tuple = indices.iter().map(|&i| row[i].clone()).collect();
                set.contains(&key)
            }
        }
    }
}

/// One input of a join: a relation name (its role in the view), the
/// attribute names it provides, and its rows.
pub struct JoinLeaf<'a> {
    pub relation: String,
    pub columns: Vec<String>,
    pub rows: Vec<&'a Tuple>,
}

/// Hash-joins leaves along the given foreign-key edges and projects to
/// `output`. Leaves must form a connected graph under `edges`; leaf order
/// determines the (semantics-free) join order.
pub fn join_leaves(
    leaves: &[JoinLeaf<'_>],
    edges: &[JoinEdge],
    output: &[(String, String)],
) -> Result<TupleSet, StoreError> {
    assert!(!leaves.is_empty(), "join requires at least one leaf");

    // Wide-row column registry: (relation, attribute) -> index.
    fn register(
        col_index: &mut HashMap<(String, String), usize>,
        next_index: &mut usize,
        rel: &str,
        attrs: &[String],
    ) {
        for attr in attrs {
            let key = (rel.to_string(), attr.clone());
            col_index.entry(key).or_insert_with(|| {
                *next_index += 1;
                *next_index - 1
            });
        }
    }
    let mut col_index: HashMap<(String, String), usize> = HashMap::new();
    let mut width = 0usize;

    let mut placed = vec![false; leaves.len()];
    placed[0] = true;
    register(
        &mut col_index,
        &mut width,
        &leaves[0].relation,
        &leaves[0].columns,
    );
    let mut current: Vec<Tuple> = leaves[0].rows.iter().map(|r| (*r).clone()).collect();

    for _ in 1..leaves.len() {
        // Next leaf in declaration order that joins to something placed.
        let next = (0..leaves.len())
            .find(|&i| {
                !placed[i]
                    && edges.iter().any(|e| {
                        let touches = |rel: &str| rel == leaves[i].relation;
                        let placed_rel = |rel: &str| {
                            leaves
                                .iter()
                                .enumerate()
                                .any(|(j, l)| placed[j] && l.relation == rel)
                        };
                        (touches(&e.from) && placed_rel(&e.to))
                            || (touches(&e.to) && placed_rel(&e.from))
                    })
            })
            .expect("validated views have connected join graphs");
        let leaf = &leaves[next];

        // Collect key columns on both sides across all connecting edges.
        let mut probe_cols: Vec<usize> = Vec::new();
        let mut build_cols: Vec<usize> = Vec::new();
        let leaf_col = |attr: &str| {
            leaf.columns
                .iter()
                .position(|c| c == attr)
                .ok_or_else(|| StoreError::MissingColumn {
                    extent: leaf.relation.clone(),
                    column: attr.into(),
                })
        };
        for edge in edges {
            let (leaf_attrs, other_rel, other_attrs) = if edge.from == leaf.relation {
                (&edge.from_attrs, &edge.to, &edge.to_attrs)
            } else if edge.to == leaf.relation {
                (&edge.to_attrs, &edge.from, &edge.from_attrs)
            } else {
                continue;
            };
            let other_placed = leaves
                .iter()
                .enumerate()
                .any(|(j, l)| placed[j] && &l.relation == other_rel);
            if !other_placed {
                continue;
            }
            for (leaf_attr, other_attr) in leaf_attrs.iter().zip(other_attrs) {
                build_cols.push(leaf_col(leaf_attr)?);
                probe_cols.push(col_index[&(other_rel.clone(), other_attr.clone())]);
            }
        }

        let mut table: HashMap<Tuple, Vec<&Tuple>> = HashMap::new();
        for row in &leaf.rows {
            let key: Tuple = build_cols.iter().map(|&i| row[i].clone()).collect();
            table.entry(key).or_default().push(row);
        }

        let mut joined = Vec::new();
        for wide_row in &current {
            let key: Tuple = probe_cols.iter().map(|&i| wide_row[i].clone()).collect();
            if let Some(matches) = table.get(&key) {
                for leaf_row in matches {
                    let mut out = wide_row.clone();
                    out.extend(leaf_row.iter().cloned());
                    joined.push(out);
                }
            }
        }
        current = joined;
        register(&mut col_index, &mut width, &leaf.relation, &leaf.columns);
        placed[next] = true;
    }

    let out_indices: Vec<usize> = output
        .iter()
        .map(|(rel, attr)| {
            col_index
                .get(&(rel.clone(), attr.clone()))
                .copied()
                .ok_or_else(|| StoreError::MissingColumn {
                    extent: rel.clone(),
                    column: attr.clone(),
                })
        })
        .collect::<Result<_, _>>()?;
    let mut result = TupleSet::new(
        output
            .iter()
            .map(|(rel, attr)| format!("{rel}.{attr}"))
            .collect(),
    );
    for row in current {
        result.insert(out_indices.iter().map(|&i| row[i].clone()).collect());
    }
    Ok(result)
}

/// Evaluates a view from base relations under set semantics. This is a
/// full recompute and serves as the oracle for incremental maintenance.
pub fn evaluate_view(db: &Database, view: &ViewDef) -> Result<TupleSet, StoreError> {
    let env = AvEnv::new();
    let mut leaves = Vec::with_capacity(view.relations.len());
    for rel_name in &view.relations {
        let instance = db.relation(rel_name)?;
        let columns: Vec<String> = instance.schema().attr_names().map(str::to_string).collect();
        let pred = CompiledPredicate::compile(
            view.local_predicates.get(rel_name),
            &columns,
            rel_name,
            &env,
        )?;
        let rows = instance.rows().filter(|row| pred.matches(row)).collect();
        leaves.push(JoinLeaf {
            relation: rel_name.clone(),
            columns,
            rows,
        });
    }
    join_leaves(&leaves, &view.joins, &view.output)
}

/// Materializes one auxiliary view over the base database: selection by the
/// local condition and semijoin memberships (resolved through `env`),
/// projected to the retained attributes.
pub fn eval_av(db: &Database, av: &AvDef, env: &AvEnv) -> Result<TupleSet, StoreError> {
    filter_project_relation(
        db,
        &av.source_relation,
        av.full_condition().as_ref(),
        &av.retained_attributes,
        env,
    )
}

/// σ/π over a base relation.
pub fn filter_project_relation(
    db: &Database,
    relation: &str,
    condition: Option<&Predicate>,
    projection: &[String],
    env: &AvEnv,
) -> Result<TupleSet, StoreError> {
    let instance = db.relation(relation)?;
    let columns: Vec<String> = instance.schema().attr_names().map(str::to_string).collect();
    let pred = CompiledPredicate::compile(condition, &columns, relation, env)?;
    let indices: Vec<usize> = projection
        .iter()
        .map(|a| {
            instance
                .schema()
                .attr_index(a)
                .ok_or_else(|| StoreError::MissingColumn {
                    extent: relation.to_string(),
                    column: a.clone(),
                })
        })
        .collect::<Result<_, _>>()?;
    let mut out = TupleSet::new(projection.to_vec());
    for row in instance.rows() {
        if pred.matches(row) {
            out.insert(indices.iter().map(|&i| row[i].clone()).collect());
        }
    }
    Ok(out)
}

/// σ/π over an already-materialized extent.
pub fn filter_project_set(
    set: &TupleSet,
    condition: Option<&Predicate>,
    projection: &[String],
    env: &AvEnv,
) -> Result<TupleSet, StoreError> {
    let pred = CompiledPredicate::compile(condition, &set.columns, "extent", env)?;
    let indices: Vec<usize> = projection
        .iter()
        .map(|a| {
            set.column_index(a)
                .ok_or_else(|| StoreError::MissingColumn {
                    extent: "extent".to_string(),
                    column: a.clone(),
                })
        })
        .collect::<Result<_, _>>()?;
    let mut out = TupleSet::new(projection.to_vec());
    for row in set.rows() {
        if pred.matches(row) {
            out.insert(indices.iter().map(|&i| row[i].clone()).collect());
        }
    }
    Ok(out)
}
