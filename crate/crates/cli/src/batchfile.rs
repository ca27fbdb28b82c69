//! Batch file format: newline-delimited records `relation,v1,v2,...` in
//! schema attribute order, with blank lines separating batches. Applied
//! view deltas use the same record format prefixed with the view name.

use viewkeeper_core::catalog::Catalog;
use viewkeeper_core::maintenance::ViewDelta;
use viewkeeper_core::relstore::{decode_field, encode_field, split_record, InsertionBatch};

/// Errors from reading batch files.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("{path}:{line}: {message}")]
pub struct BatchError {
    pub path: String,
    pub line: usize,
    pub message: String,
}

/// Parses a batch file into a sequence of insertion batches.
pub fn parse_batches(
    text: &str,
    catalog: &Catalog,
    path: &str,
) -> Result<Vec<InsertionBatch>, BatchError> {
    let err = |line: usize, message: String| BatchError {
        path: path.to_string(),
        line,
        message,
    };
    let mut batches = Vec::new();
    let mut current = InsertionBatch::new();
    for (idx, line) in text.lines().enumerate() {
        let line_no = idx + 1;
        if line.trim().is_empty() {
            if !current.is_empty() {
                batches.push(std::mem::take(&mut current));
            }
            continue;
        }
        let fields = split_record(line).map_err(|m| err(line_no, m))?;
        let (relation, values) = fields
            .split_first()
            .ok_or_else(|| err(line_no, "empty record".into()))?;
        let schema = catalog
            .relation(relation)
            .ok_or_else(|| err(line_no, format!("unknown relation `{relation}`")))?;
        if values.len() != schema.attributes.len() {
            return Err(err(
                line_no,
                format!(
                    "relation `{relation}` expects {} values, got {}",
                    schema.attributes.len(),
                    values.len()
                ),
            ));
        }
        let row = schema
            .attributes
            .iter()
            .zip(values)
            .map(|(attr, raw)| decode_field(attr.domain, raw))
            .collect::<Result<Vec<_>, String>>()
            .map_err(|m| err(line_no, m))?;
        current.entry(relation.clone()).or_default().push(row);
    }
    if !current.is_empty() {
        batches.push(current);
    }
    Ok(batches)
}

/// Renders one batch's view delta: `view,v1,v2,...` per added tuple, views
/// in name order, rows in set order.
pub fn format_view_delta(delta: &ViewDelta) -> String {
    let mut out = String::new();
    for (view, rows) in delta {
        for row in rows.rows() {
            out.push_str(view);
            for value in row {
                out.push(',');
                out.push_str(&encode_field(value));
            }
            out.push('\n');
        }
    }
    out
}
