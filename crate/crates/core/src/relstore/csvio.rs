//! CSV load and dump: one file per relation, header row of attribute
//! names, values in schema order, rows dumped in primary-key order.

use std::collections::BTreeMap;
use std::fs;
use std::io;
use std::path::Path;

use crate::catalog::{Catalog, Domain, RelationDef};
use crate::value::Value;

use super::{Database, InsertionBatch, RelationInstance, StoreError, Tuple};

/// Errors from reading or writing dataset files.
#[derive(Debug, thiserror::Error)]
pub enum CsvError {
    #[error("{path}: {source}")]
    Io { path: String, source: io::Error },
    #[error("{path}:{line}: {message}")]
    Format {
        path: String,
        line: usize,
        message: String,
    },
    #[error("{path}: {source}")]
    Store { path: String, source: StoreError },
}

fn field_needs_quoting(s: &str) -> bool {
    s.is_empty() || s.contains([',', '"', '\n', '\r']) || s.starts_with(' ') || s.ends_with(' ')
}

/// Encodes one value; text is quoted only when structurally necessary
/// (decoding is schema-directed, so bare text never ambiguates).
pub fn encode_field(value: &Value) -> String {
    let raw = value.to_string();
    if field_needs_quoting(&raw) {
        format!("\"{}\"", raw.replace('"', "\"\""))
    } else {
        raw
    }
}

/// Splits one CSV record into raw fields, honoring double quotes.
pub fn split_record(line: &str) -> Result<Vec<String>, String> {
    let mut fields = Vec::new();
    let mut field = String::new();
    let mut chars = line.chars().peekable();
    let mut quoted = false;
    loop {
        match chars.next() {
            None => {
                if quoted {
                    return Err("unterminated quoted field".into());
                }
                fields.push(field);
                return Ok(fields);
            }
            Some('"') if quoted => {
                if chars.peek() == Some(&'"') {
                    chars.next();
                    field.push('"');
                } else {
                    quoted = false;
                }
            }
            Some('"') if field.is_empty() && !quoted => quoted = true,
            Some(',') if !quoted => {
                fields.push(std::mem::take(&mut field));
            }
            Some(c) => field.push(c),
        }
    }
}

/// Decodes a raw field according to the attribute domain.
pub fn decode_field(domain: Domain, raw: &str) -> Result<Value, String> {
    match domain {
        Domain::Integer => raw
            .parse()
            .map(Value::Int)
            .map_err(|_| format!("malformed integer `{raw}`")),
        Domain::Decimal => raw
            .parse()
            .map(Value::Dec)
            .map_err(|_| format!("malformed decimal `{raw}`")),
        Domain::Text(_) => Ok(Value::Text(raw.to_string())),
    }
}

/// Renders a relation instance as CSV with a header row; rows come out in
/// primary-key order, so dumps are deterministic.
pub fn dump_relation(instance: &RelationInstance) -> String {
    let schema = instance.schema();
    let mut out = String::new();
    out.push_str(&schema.attr_names().collect::<Vec<_>>().join(","));
    out.push('\n');
    for row in instance.rows() {
        let line: Vec<String> = row.iter().map(encode_field).collect();
        out.push_str(&line.join(","));
        out.push('\n');
    }
    out
}

/// Parses one relation's CSV (header plus records) into tuples.
pub fn parse_relation_csv(
    schema: &RelationDef,
    text: &str,
    path: &str,
) -> Result<Vec<Tuple>, CsvError> {
    let format_err = |line: usize, message: String| CsvError::Format {
        path: path.to_string(),
        line,
        message,
    };
    let mut lines = text.lines().enumerate();
    let Some((_, header)) = lines.next() else {
        return Err(format_err(1, "missing header row".into()));
    };
    let header_fields = split_record(header).map_err(|m| format_err(1, m))?;
    let expected: Vec<&str> = schema.attr_names().collect();
    if header_fields != expected {
        return Err(format_err(
            1,
            format!("header {header_fields:?} does not match schema {expected:?}"),
        ));
    }
    let mut rows = Vec::new();
    for (idx, line) in lines {
        if line.is_empty() {
            continue;
        }
        let fields = split_record(line).map_err(|m| format_err(idx + 1, m))?;
        if fields.len() != schema.attributes.len() {
            return Err(format_err(
                idx + 1,
                format!(
                    "expected {} fields, got {}",
                    schema.attributes.len(),
                    fields.len()
                ),
            ));
        }
        let row = schema
            .attributes
            .iter()
            .zip(&fields)
            .map(|(attr, raw)| decode_field(attr.domain, raw))
            .collect::<Result<Tuple, String>>()
            .map_err(|m| format_err(idx + 1, m))?;
        rows.push(row);
    }
    Ok(rows)
}

/// Writes one `<relation>.csv` per relation into `dir`.
pub fn write_dir(db: &Database, dir: &Path) -> Result<(), CsvError> {
    let io_err = |path: &Path, source| CsvError::Io {
        path: path.display().to_string(),
        source,
    };
    fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    for instance in db.relations() {
        let path = dir.join(format!("{}.csv", instance.schema().name));
        fs::write(&path, dump_relation(instance)).map_err(|e| io_err(&path, e))?;
    }
    Ok(())
}

/// Loads `<relation>.csv` for every catalog relation from `dir` and
/// validates referential integrity on the way in.
pub fn load_dir(catalog: &Catalog, dir: &Path) -> Result<Database, CsvError> {
    let mut batch: InsertionBatch = BTreeMap::new();
    for rel in catalog.relations() {
        let path = dir.join(format!("{}.csv", rel.name));
        let text = fs::read_to_string(&path).map_err(|e| CsvError::Io {
            path: path.display().to_string(),
            source: e,
        })?;
        let rows = parse_relation_csv(rel, &text, &path.display().to_string())?;
        batch.insert(rel.name.clone(), rows);
    }
    let mut db = Database::new(catalog.clone());
    db.insert_batch(&batch).map_err(|e| CsvError::Store {
        path: dir.display().to_string(),
        source: e,
    })?;
    Ok(db)
}
