//! Canonical textual rendering of a catalog, inverse of `parse_schema`.

use std::fmt::Write;

use super::{Catalog, Domain};

/// Renders a catalog as schema-definition text such that
/// `parse_schema(render_schema(c)) == c`.
pub fn render_schema(catalog: &Catalog) -> String {
    let mut out = String::new();
    for rel in catalog.relations() {
        let _ = writeln!(out, "CREATE TABLE {} (", rel.name);
        for attr in &rel.attributes {
            let ty = match attr.domain {
                Domain::Integer => "INTEGER".to_string(),
                Domain::Decimal => "DECIMAL".to_string(),
                Domain::Text(n) => format!("TEXT({n})"),
            };
            let _ = writeln!(out, "  {} {},", attr.name, ty);
        }
        let _ = write!(out, "  PRIMARY KEY ({})", rel.primary_key.join(", "));
        for fk in &rel.foreign_keys {
            let _ = write!(
                out,
                ",\n  FOREIGN KEY ({}) REFERENCES {} ({})",
                fk.attributes.join(", "),
                fk.target_relation,
                fk.target_attributes.join(", ")
            );
        }
        out.push_str("\n);\n\n");
    }
    out
}
