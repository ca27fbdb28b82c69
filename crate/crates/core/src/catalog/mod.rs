//! Schema catalog and view definitions.
//!
//! The catalog holds relation schemas with primary and foreign keys and
//! exposes the foreign-key digraph that drives auxiliary-view pruning,
//! batch application order, and semijoin placement. View definitions are
//! select-project-join queries whose every join instantiates a declared
//! foreign key.

mod parse;
mod render;

pub use parse::{parse_schema, parse_view};
pub use render::render_schema;

use std::collections::{BTreeMap, BTreeSet};

use crate::value::Value;

/// Attribute domain. The byte width feeds the view-merging cost model:
/// integers are 4 bytes, decimals 8, and `text(n)` is `n`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Domain {
    Integer,
    Decimal,
    Text(u32),
}

impl Domain {
    pub fn byte_width(self) -> u64 {
        match self {
            Domain::Integer => 4,
            Domain::Decimal => 8,
            Domain::Text(n) => n as u64,
        }
    }

    /// Whether a value belongs to this domain. Text values must also fit the
    /// declared width.
    pub fn admits(self, value: &Value) -> bool {
        match (self, value) {
            (Domain::Integer, Value::Int(_)) => true,
            (Domain::Decimal, Value::Dec(_)) => true,
            (Domain::Text(n), Value::Text(s)) => s.len() as u64 <= n as u64,
            _ => false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AttributeDef {
    pub name: String,
    pub domain: Domain,
}

/// A foreign key: `attributes` of the owning relation reference the full
/// primary key of `target_relation`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ForeignKey {
    pub attributes: Vec<String>,
    pub target_relation: String,
    pub target_attributes: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RelationDef {
    pub name: String,
    pub attributes: Vec<AttributeDef>,
    pub primary_key: Vec<String>,
    pub foreign_keys: Vec<ForeignKey>,
}

impl RelationDef {
    pub fn attribute(&self, name: &str) -> Option<&AttributeDef> {
        self.attributes.iter().find(|a| a.name == name)
    }

    pub fn attr_index(&self, name: &str) -> Option<usize> {
        self.attributes.iter().position(|a| a.name == name)
    }

    pub fn attr_names(&self) -> impl Iterator<Item = &str> {
        self.attributes.iter().map(|a| a.name.as_str())
    }

    pub fn pk_indices(&self) -> Vec<usize> {
        self.primary_key
            .iter()
            .map(|k| self.attr_index(k).expect("validated pk attribute"))
            .collect()
    }
}

/// Errors raised while building or validating schemas and views.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum SchemaError {
    #[error("syntax error at line {line}, column {column}: {message}")]
    Syntax {
        line: u32,
        column: u32,
        message: String,
    },
    #[error("duplicate relation `{0}`")]
    DuplicateRelation(String),
    #[error("duplicate attribute `{attribute}` in relation `{relation}`")]
    DuplicateAttribute { relation: String, attribute: String },
    #[error("relation `{relation}`: unknown attribute `{attribute}`")]
    UnknownAttribute { relation: String, attribute: String },
    #[error("relation `{relation}`: foreign key references unknown relation `{target}`")]
    UnknownFkTarget { relation: String, target: String },
    #[error("relation `{relation}`: foreign key to `{target}` does not match that relation's primary key")]
    FkKeyMismatch { relation: String, target: String },
    #[error("foreign-key graph contains a cycle through `{0}`")]
    FkCycle(String),
    #[error("relation `{relation}`: text width must be at least 1")]
    ZeroWidthText { relation: String },
    #[error("relation `{0}`: primary key must be nonempty")]
    EmptyPrimaryKey(String),
    #[error("view `{view}`: unknown relation `{relation}`")]
    ViewUnknownRelation { view: String, relation: String },
    #[error("view `{view}`: relation `{relation}` listed more than once")]
    ViewDuplicateRelation { view: String, relation: String },
    #[error("view `{view}`: join {from}({from_attrs}) = {to}({to_attrs}) does not match a declared foreign key")]
    JoinNotForeignKey {
        view: String,
        from: String,
        from_attrs: String,
        to: String,
        to_attrs: String,
    },
    #[error("view `{view}`: join graph is not connected")]
    DisconnectedJoinGraph { view: String },
    #[error(
        "view `{view}`: join graph has {count} unreferenced relations; exactly one is supported"
    )]
    MultipleSourceRelations { view: String, count: usize },
    #[error("view `{view}`: predicate on `{relation}` compares `{attribute}` ({expected}) with a {found} constant")]
    PredicateTypeMismatch {
        view: String,
        relation: String,
        attribute: String,
        expected: String,
        found: String,
    },
    #[error("view `{view}`: condition mixes attributes of `{left}` and `{right}` without matching a foreign key")]
    NonLocalCondition {
        view: String,
        left: String,
        right: String,
    },
}

/// Validated set of relation schemas with an acyclic foreign-key digraph.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Catalog {
    relations: BTreeMap<String, RelationDef>,
}

impl Catalog {
    /// Validates relation definitions into a catalog. Rejects duplicate
    /// names, unknown or mismatched foreign-key targets, and any cycle in
    /// the foreign-key digraph.
    pub fn new(relations: Vec<RelationDef>) -> Result<Self, SchemaError> {
        let mut map = BTreeMap::new();
        for rel in relations {
            // Per-relation checks first so errors carry the local context.
            let mut seen = BTreeSet::new();
            for attr in &rel.attributes {
                if !seen.insert(attr.name.clone()) {
                    return Err(SchemaError::DuplicateAttribute {
                        relation: rel.name.clone(),
                        attribute: attr.name.clone(),
                    });
                }
                if let Domain::Text(0) = attr.domain {
                    return Err(SchemaError::ZeroWidthText {
                        relation: rel.name.clone(),
                    });
                }
            }
            if rel.primary_key.is_empty() {
                return Err(SchemaError::EmptyPrimaryKey(rel.name.clone()));
            }
            for key_attr in rel
                .primary_key
                .iter()
                .chain(rel.foreign_keys.iter().flat_map(|fk| &fk.attributes))
            {
                if rel.attribute(key_attr).is_none() {
                    return Err(SchemaError::UnknownAttribute {
                        relation: rel.name.clone(),
                        attribute: key_attr.clone(),
                    });
                }
            }
            let name = rel.name.clone();
            if map.insert(name.clone(), rel).is_some() {
                return Err(SchemaError::DuplicateRelation(name));
            }
        }

        let catalog = Catalog { relations: map };
        for rel in catalog.relations.values() {
            for fk in &rel.foreign_keys {
                let target = catalog.relations.get(&fk.target_relation).ok_or_else(|| {
                    SchemaError::UnknownFkTarget {
                        relation: rel.name.clone(),
                        target: fk.target_relation.clone(),
                    }
                })?;
                if fk.target_attributes != target.primary_key
                    || fk.attributes.len() != fk.target_attributes.len()
                {
                    return Err(SchemaError::FkKeyMismatch {
                        relation: rel.name.clone(),
                        target: fk.target_relation.clone(),
                    });
                }
            }
        }
        catalog.topo_order()?;
        Ok(catalog)
    }

    pub fn relation(&self, name: &str) -> Option<&RelationDef> {
        self.relations.get(name)
    }

    pub fn relations(&self) -> impl Iterator<Item = &RelationDef> {
        self.relations.values()
    }

    pub fn relation_names(&self) -> impl Iterator<Item = &str> {
        self.relations.keys().map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.relations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.relations.is_empty()
    }

    /// Relations ordered so that every referenced relation precedes its
    /// referencing relations; ties broken by name. This is the order in
    /// which insertion batches are applied and auxiliary views evaluated.
    pub fn topo_order(&self) -> Result<Vec<String>, SchemaError> {
        // Kahn's algorithm over the reversed FK digraph, smallest name first.
        let mut pending: BTreeMap<&str, BTreeSet<&str>> = self
            .relations
            .values()
            .map(|rel| {
                let targets = rel
                    .foreign_keys
                    .iter()
                    .map(|fk| fk.target_relation.as_str())
                    .collect();
                (rel.name.as_str(), targets)
            })
            .collect();
        let mut order = Vec::with_capacity(pending.len());
        while !pending.is_empty() {
            let ready = pending
                .iter()
                .find(|(_, targets)| targets.iter().all(|t| !pending.contains_key(*t)))
                .map(|(name, _)| *name);
            match ready {
                Some(name) => {
                    pending.remove(name);
                    order.push(name.to_string());
                }
                None => {
                    let stuck = pending.keys().next().unwrap().to_string();
                    return Err(SchemaError::FkCycle(stuck));
                }
            }
        }
        Ok(order)
    }
}

/// Comparison operators usable in local selection conditions.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CmpOp {
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
}

impl CmpOp {
    pub fn eval(self, ord: std::cmp::Ordering) -> bool {
        use std::cmp::Ordering::*;
        match self {
            CmpOp::Eq => ord == Equal,
            CmpOp::Ne => ord != Equal,
            CmpOp::Lt => ord == Less,
            CmpOp::Le => ord != Greater,
            CmpOp::Gt => ord == Greater,
            CmpOp::Ge => ord != Less,
        }
    }

    pub fn symbol(self) -> &'static str {
        match self {
            CmpOp::Eq => "=",
            CmpOp::Ne => "!=",
            CmpOp::Lt => "<",
            CmpOp::Le => "<=",
            CmpOp::Gt => ">",
            CmpOp::Ge => ">=",
        }
    }
}

/// Predicate over a single relation's tuples. `InAv` is semijoin
/// membership: the named attribute tuple must appear in the projection of a
/// named auxiliary view onto `av_attributes`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Predicate {
    Cmp {
        attribute: String,
        op: CmpOp,
        value: Value,
    },
    And(Box<Predicate>, Box<Predicate>),
    Or(Box<Predicate>, Box<Predicate>),
    InAv {
        attributes: Vec<String>,
        av: String,
        av_attributes: Vec<String>,
    },
}

impl Predicate {
    pub fn cmp(attribute: impl Into<String>, op: CmpOp, value: Value) -> Self {
        Predicate::Cmp {
            attribute: attribute.into(),
            op,
            value,
        }
    }

    pub fn and(self, other: Predicate) -> Self {
        Predicate::And(Box::new(self), Box::new(other))
    }

    pub fn or(self, other: Predicate) -> Self {
        Predicate::Or(Box::new(self), Box::new(other))
    }

    /// Conjunction of an optional predicate list; `None` when empty.
    pub fn conjoin(parts: impl IntoIterator<Item = Predicate>) -> Option<Predicate> {
        parts.into_iter().reduce(Predicate::and)
    }

    /// Every attribute of the scope relation the predicate looks at.
    pub fn referenced_attributes(&self, into: &mut BTreeSet<String>) {
        match self {
            Predicate::Cmp { attribute, .. } => {
                into.insert(attribute.clone());
            }
            Predicate::And(a, b) | Predicate::Or(a, b) => {
                a.referenced_attributes(into);
                b.referenced_attributes(into);
            }
            Predicate::InAv { attributes, .. } => {
                into.extend(attributes.iter().cloned());
            }
        }
    }

    /// Names of auxiliary views referenced by membership nodes.
    pub fn referenced_avs(&self, into: &mut BTreeSet<String>) {
        match self {
            Predicate::Cmp { .. } => {}
            Predicate::And(a, b) | Predicate::Or(a, b) => {
                a.referenced_avs(into);
                b.referenced_avs(into);
            }
            Predicate::InAv { av, .. } => {
                into.insert(av.clone());
            }
        }
    }
}

/// An equijoin edge of a view: `from` references `to` through the declared
/// foreign key on `from_attrs`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct JoinEdge {
    pub from: String,
    pub from_attrs: Vec<String>,
    pub to: String,
    pub to_attrs: Vec<String>,
}

/// A select-project-join view over catalog relations. All joins follow
/// declared foreign keys and all predicates are local to one relation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ViewDef {
    pub name: String,
    /// Relations in FROM order; also the count-report row order.
    pub relations: Vec<String>,
    pub joins: Vec<JoinEdge>,
    pub local_predicates: BTreeMap<String, Predicate>,
    /// Output columns as (relation, attribute) pairs, in SELECT order.
    pub output: Vec<(String, String)>,
}

impl ViewDef {
    /// Validates a view against the catalog; see the error variants for the
    /// rules enforced.
    pub fn validate(&self, catalog: &Catalog) -> Result<(), SchemaError> {
        let unknown = |relation: &str| SchemaError::ViewUnknownRelation {
            view: self.name.clone(),
            relation: relation.to_string(),
        };
        let mut seen = BTreeSet::new();
        for rel in &self.relations {
            if catalog.relation(rel).is_none() {
                return Err(unknown(rel));
            }
            if !seen.insert(rel.clone()) {
                return Err(SchemaError::ViewDuplicateRelation {
                    view: self.name.clone(),
                    relation: rel.clone(),
                });
            }
        }
        for edge in &self.joins {
            for rel in [&edge.from, &edge.to] {
                if !seen.contains(rel) {
                    return Err(unknown(rel));
                }
            }
            let from_rel = catalog.relation(&edge.from).unwrap();
            let matches_fk = from_rel.foreign_keys.iter().any(|fk| {
                fk.target_relation == edge.to
                    && fk.attributes == edge.from_attrs
                    && fk.target_attributes == edge.to_attrs
            });
            if !matches_fk {
                return Err(SchemaError::JoinNotForeignKey {
                    view: self.name.clone(),
                    from: edge.from.clone(),
                    from_attrs: edge.from_attrs.join(","),
                    to: edge.to.clone(),
                    to_attrs: edge.to_attrs.join(","),
                });
            }
        }
        for (rel, attr) in &self.output {
            let rel_def = catalog.relation(rel).ok_or_else(|| unknown(rel))?;
            if !seen.contains(rel) {
                return Err(unknown(rel));
            }
            if rel_def.attribute(attr).is_none() {
                return Err(SchemaError::UnknownAttribute {
                    relation: rel.clone(),
                    attribute: attr.clone(),
                });
            }
        }
        for (rel, pred) in &self.local_predicates {
            let rel_def = catalog.relation(rel).ok_or_else(|| unknown(rel))?;
            if !self.relations.contains(rel) {
                return Err(unknown(rel));
            }
            let mut attrs = BTreeSet::new();
            pred.referenced_attributes(&mut attrs);
            for attr in attrs {
                if rel_def.attribute(&attr).is_none() {
                    return Err(SchemaError::UnknownAttribute {
                        relation: rel.clone(),
                        attribute: attr,
                    });
                }
            }
            validate_predicate_types(&self.name, rel_def, pred)?;
        }

        let digraph = view_join_digraph(catalog, self);
        if !digraph.is_connected() {
            return Err(SchemaError::DisconnectedJoinGraph {
                view: self.name.clone(),
            });
        }
        // The maintenance plan stores no data for unreferenced relations, so
        // deltas can only be joined outward from a single such relation.
        let sources = digraph.source_count();
        if sources != 1 {
            return Err(SchemaError::MultipleSourceRelations {
                view: self.name.clone(),
                count: sources,
            });
        }
        Ok(())
    }
}

fn validate_predicate_types(
    view: &str,
    rel: &RelationDef,
    pred: &Predicate,
) -> Result<(), SchemaError> {
    match pred {
        Predicate::Cmp {
            attribute, value, ..
        } => {
            let attr = rel.attribute(attribute).expect("checked above");
            let compatible = matches!(
                (attr.domain, value),
                (Domain::Integer, Value::Int(_))
                    | (Domain::Decimal, Value::Dec(_))
                    | (Domain::Text(_), Value::Text(_))
            );
            if !compatible {
                return Err(SchemaError::PredicateTypeMismatch {
                    view: view.to_string(),
                    relation: rel.name.clone(),
                    attribute: attribute.clone(),
                    expected: format!("{:?}", attr.domain).to_lowercase(),
                    found: value.kind().to_string(),
                });
            }
            Ok(())
        }
        Predicate::And(a, b) | Predicate::Or(a, b) => {
            validate_predicate_types(view, rel, a)?;
            validate_predicate_types(view, rel, b)
        }
        Predicate::InAv { .. } => Ok(()),
    }
}

/// Directed join graph of one view: an edge `R -> S` for every view join in
/// which `R` references `S`. Node order follows the view's FROM list.
#[derive(Debug, Clone)]
pub struct ViewDigraph {
    nodes: Vec<String>,
    /// Edge list as indexes into `nodes`, one entry per join condition.
    edges: Vec<(usize, usize)>,
}

/// Builds the join digraph of a validated view.
pub fn view_join_digraph(_catalog: &Catalog, view: &ViewDef) -> ViewDigraph {
    let nodes = view.relations.clone();
    let index = |name: &str| nodes.iter().position(|n| n == name).expect("view relation");
    let edges = view
        .joins
        .iter()
        .map(|edge| (index(&edge.from), index(&edge.to)))
        .collect();
    ViewDigraph { nodes, edges }
}

impl ViewDigraph {
    pub fn nodes(&self) -> &[String] {
        &self.nodes
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> impl Iterator<Item = (&str, &str)> {
        self.edges
            .iter()
            .map(|&(f, t)| (self.nodes[f].as_str(), self.nodes[t].as_str()))
    }

    pub fn in_degree(&self, relation: &str) -> usize {
        match self.nodes.iter().position(|n| n == relation) {
            Some(idx) => self.edges.iter().filter(|&&(_, t)| t == idx).count(),
            None => 0,
        }
    }

    /// Relations no other view relation references (in-degree zero).
    pub fn sources(&self) -> Vec<&str> {
        self.nodes
            .iter()
            .enumerate()
            .filter(|(idx, _)| self.edges.iter().all(|&(_, t)| t != *idx))
            .map(|(_, name)| name.as_str())
            .collect()
    }

    fn source_count(&self) -> usize {
        self.sources().len()
    }

    /// Relations directly referenced by `relation` in this view, with the
    /// edges that reference them.
    pub fn successors<'a>(&'a self, relation: &str) -> Vec<&'a str> {
        match self.nodes.iter().position(|n| n == relation) {
            Some(idx) => self
                .edges
                .iter()
                .filter(|&&(f, _)| f == idx)
                .map(|&(_, t)| self.nodes[t].as_str())
                .collect(),
            None => Vec::new(),
        }
    }

    pub fn is_connected(&self) -> bool {
        if self.nodes.len() <= 1 {
            return true;
        }
        let mut reached = vec![false; self.nodes.len()];
        let mut stack = vec![0usize];
        reached[0] = true;
        while let Some(node) = stack.pop() {
            for &(f, t) in &self.edges {
                let next = if f == node {
                    t
                } else if t == node {
                    f
                } else {
                    continue;
                };
                if !reached[next] {
                    reached[next] = true;
                    stack.push(next);
                }
            }
        }
        reached.into_iter().all(|r| r)
    }

    /// View relations ordered referenced-first (every edge target precedes
    /// its origin), ties broken by FROM position.
    pub fn referenced_first_order(&self) -> Vec<String> {
        let mut remaining: Vec<usize> = (0..self.nodes.len()).collect();
        let mut order = Vec::with_capacity(self.nodes.len());
        while !remaining.is_empty() {
            let pos = remaining
                .iter()
                .position(|&n| {
                    self.edges
                        .iter()
                        .all(|&(f, t)| f != n || !remaining.contains(&t))
                })
                .expect("view join digraph is acyclic");
            order.push(self.nodes[remaining.remove(pos)].clone());
        }
        order
    }
}
