//! Parser for the schema-definition and view-definition file formats.
//!
//! The grammar is a small SQL-style subset:
//!
//! ```text
//! CREATE TABLE name (attr TYPE, ..., PRIMARY KEY (a, ...),
//!                    FOREIGN KEY (a, ...) REFERENCES target (b, ...));
//! CREATE VIEW name AS SELECT rel.attr, ... FROM rel, ...
//!   WHERE rel.attr = rel.attr and rel.attr op constant and ...;
//! ```
//!
//! Keywords are case-insensitive, identifiers are case-sensitive, and `--`
//! starts a line comment. Bare tokens such as `2010-2014` that are neither
//! integer nor decimal literals are read as text constants, which is how
//! session ranges are written in view files.

use std::collections::BTreeMap;

use super::{
    AttributeDef, Catalog, CmpOp, Domain, ForeignKey, JoinEdge, Predicate, RelationDef,
    SchemaError, ViewDef,
};
use crate::value::{Decimal, Value};

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Ident(String),
    Int(i64),
    Dec(Decimal),
    /// Quoted string or a bare digit-led token that is not a number.
    Text(String),
    LParen,
    RParen,
    Comma,
    Dot,
    Semi,
    Op(CmpOp),
}

#[derive(Debug, Clone)]
struct Spanned {
    tok: Tok,
    line: u32,
    column: u32,
}

struct Lexer<'a> {
    src: &'a [u8],
    pos: usize,
    line: u32,
    column: u32,
}

impl<'a> Lexer<'a> {
    fn new(src: &'a str) -> Self {
        Lexer {
            src: src.as_bytes(),
            pos: 0,
            line: 1,
            column: 1,
        }
    }

    fn error(&self, message: impl Into<String>) -> SchemaError {
        SchemaError::Syntax {
            line: self.line,
            column: self.column,
            message: message.into(),
        }
    }

    fn bump(&mut self) -> u8 {
        let b = self.src[self.pos];
        self.pos += 1;
        if b == b'\n' {
            self.line += 1;
            self.column = 1;
        } else {
            self.column += 1;
        }
        b
    }

    fn peek(&self) -> Option<u8> {
        self.src.get(self.pos).copied()
    }

    fn peek2(&self) -> Option<u8> {
        self.src.get(self.pos + 1).copied()
    }

    fn skip_trivia(&mut self) {
        loop {
            match self.peek() {
                Some(b) if b.is_ascii_whitespace() => {
                    self.bump();
                }
                Some(b'-') if self.peek2() == Some(b'-') => {
                    while let Some(b) = self.peek() {
                        if b == b'\n' {
                            break;
                        }
                        self.bump();
                    }
                }
                _ => break,
            }
        }
    }

    fn tokenize(mut self) -> Result<Vec<Spanned>, SchemaError> {
        let mut out = Vec::new();
        loop {
            self.skip_trivia();
            let (line, column) = (self.line, self.column);
            let Some(b) = self.peek() else { break };
            let tok = match b {
                b'(' => {
                    self.bump();
                    Tok::LParen
                }
                b')' => {
                    self.bump();
                    Tok::RParen
                }
                b',' => {
                    self.bump();
                    Tok::Comma
                }
                b'.' => {
                    self.bump();
                    Tok::Dot
                }
                b';' => {
                    self.bump();
                    Tok::Semi
                }
                b'=' => {
                    self.bump();
                    Tok::Op(CmpOp::Eq)
                }
                b'!' => {
                    self.bump();
                    if self.peek() == Some(b'=') {
                        self.bump();
                        Tok::Op(CmpOp::Ne)
                    } else {
                        return Err(self.error("expected `=` after `!`"));
                    }
                }
                b'<' => {
                    self.bump();
                    match self.peek() {
                        Some(b'=') => {
                            self.bump();
                            Tok::Op(CmpOp::Le)
                        }
                        Some(b'>') => {
                            self.bump();
                            Tok::Op(CmpOp::Ne)
                        }
                        _ => Tok::Op(CmpOp::Lt),
                    }
                }
                b'>' => {
                    self.bump();
                    if self.peek() == Some(b'=') {
                        self.bump();
                        Tok::Op(CmpOp::Ge)
                    } else {
                        Tok::Op(CmpOp::Gt)
                    }
                }
                b'\'' => {
                    self.bump();
                    let mut s = String::new();
                    loop {
                        match self.peek() {
                            None => return Err(self.error("unterminated string literal")),
                            Some(b'\'') => {
                                self.bump();
                                // SQL-style escaped quote: '' inside a string.
                                if self.peek() == Some(b'\'') {
                                    self.bump();
                                    s.push('\'');
                                } else {
                                    break;
                                }
                            }
                            Some(_) => s.push(self.bump() as char),
                        }
                    }
                    Tok::Text(s)
                }
                b'-' if self.peek2().is_some_and(|c| c.is_ascii_digit()) => {
                    self.bump();
                    let word = self.read_digit_word();
                    match classify_number(&word) {
                        Some(Tok::Int(n)) => Tok::Int(-n),
                        Some(Tok::Dec(d)) => Tok::Dec(Decimal::from_scaled(-d.scaled())),
                        _ => return Err(self.error(format!("malformed number `-{word}`"))),
                    }
                }
                b if b.is_ascii_digit() => {
                    let word = self.read_digit_word();
                    classify_number(&word).unwrap_or(Tok::Text(word))
                }
                b if b.is_ascii_alphabetic() || b == b'_' => {
                    let mut s = String::new();
                    while let Some(c) = self.peek() {
                        if c.is_ascii_alphanumeric() || c == b'_' {
                            s.push(self.bump() as char);
                        } else {
                            break;
                        }
                    }
                    Tok::Ident(s)
                }
                other => {
                    return Err(self.error(format!("unexpected character `{}`", other as char)))
                }
            };
            out.push(Spanned { tok, line, column });
        }
        Ok(out)
    }

    /// Reads a digit-led token spanning digits, dots, and dashes, so that
    /// range constants like `2010-2014` come out as a single token.
    fn read_digit_word(&mut self) -> String {
        let mut s = String::new();
        while let Some(c) = self.peek() {
            if c.is_ascii_digit() || c == b'.' || c == b'-' {
                s.push(self.bump() as char);
            } else {
                break;
            }
        }
        s
    }
}

fn classify_number(word: &str) -> Option<Tok> {
    if word.bytes().all(|b| b.is_ascii_digit()) {
        return word.parse().ok().map(Tok::Int);
    }
    if word.bytes().filter(|&b| b == b'.').count() == 1 && !word.contains('-') {
        return word.parse().ok().map(Tok::Dec);
    }
    None
}

struct Parser {
    toks: Vec<Spanned>,
    pos: usize,
    /// Position of the end of input, for errors past the last token.
    eof: (u32, u32),
}

impl Parser {
    fn new(src: &str) -> Result<Self, SchemaError> {
        let toks = Lexer::new(src).tokenize()?;
        let eof = toks
            .last()
            .map(|t| (t.line, t.column + 1))
            .unwrap_or((1, 1));
        Ok(Parser { toks, pos: 0, eof })
    }

    fn error_here(&self, message: impl Into<String>) -> SchemaError {
        let (line, column) = self
            .toks
            .get(self.pos)
            .map(|t| (t.line, t.column))
            .unwrap_or(self.eof);
        SchemaError::Syntax {
            line,
            column,
            message: message.into(),
        }
    }

    fn at_end(&self) -> bool {
        self.pos >= self.toks.len()
    }

    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|t| &t.tok)
    }

    fn next(&mut self, expected: &str) -> Result<Tok, SchemaError> {
        match self.toks.get(self.pos) {
            Some(t) => {
                self.pos += 1;
                Ok(t.tok.clone())
            }
            None => Err(self.error_here(format!("expected {expected}, found end of input"))),
        }
    }

    fn expect(&mut self, tok: Tok, what: &str) -> Result<(), SchemaError> {
        let found = self.next(what)?;
        if found == tok {
            Ok(())
        } else {
            self.pos -= 1;
            Err(self.error_here(format!("expected {what}")))
        }
    }

    fn ident(&mut self, what: &str) -> Result<String, SchemaError> {
        match self.next(what)? {
            Tok::Ident(s) => Ok(s),
            _ => {
                self.pos -= 1;
                Err(self.error_here(format!("expected {what}")))
            }
        }
    }

    /// Consumes an identifier matching `kw` case-insensitively.
    fn keyword(&mut self, kw: &str) -> Result<(), SchemaError> {
        match self.peek() {
            Some(Tok::Ident(s)) if s.eq_ignore_ascii_case(kw) => {
                self.pos += 1;
                Ok(())
            }
            _ => Err(self.error_here(format!("expected keyword `{}`", kw.to_uppercase()))),
        }
    }

    fn peek_keyword(&self, kw: &str) -> bool {
        matches!(self.peek(), Some(Tok::Ident(s)) if s.eq_ignore_ascii_case(kw))
    }

    fn ident_list(&mut self, what: &str) -> Result<Vec<String>, SchemaError> {
        self.expect(Tok::LParen, "`(`")?;
        let mut names = vec![self.ident(what)?];
        while self.peek() == Some(&Tok::Comma) {
            self.pos += 1;
            names.push(self.ident(what)?);
        }
        self.expect(Tok::RParen, "`)`")?;
        Ok(names)
    }

    fn parse_table(&mut self) -> Result<RelationDef, SchemaError> {
        let name = self.ident("relation name")?;
        self.expect(Tok::LParen, "`(`")?;
        let mut attributes = Vec::new();
        let mut primary_key: Option<Vec<String>> = None;
        let mut foreign_keys = Vec::new();
        loop {
            if self.peek_keyword("primary") {
                self.pos += 1;
                self.keyword("key")?;
                if primary_key.is_some() {
                    return Err(self.error_here("duplicate PRIMARY KEY clause"));
                }
                primary_key = Some(self.ident_list("primary-key attribute")?);
            } else if self.peek_keyword("foreign") {
                self.pos += 1;
                self.keyword("key")?;
                let attrs = self.ident_list("foreign-key attribute")?;
                self.keyword("references")?;
                let target = self.ident("referenced relation")?;
                let target_attrs = self.ident_list("referenced attribute")?;
                foreign_keys.push(ForeignKey {
                    attributes: attrs,
                    target_relation: target,
                    target_attributes: target_attrs,
                });
            } else {
                let attr_name = self.ident("attribute name")?;
                let domain = self.parse_domain(&name)?;
                attributes.push(AttributeDef {
                    name: attr_name,
                    domain,
                });
            }
            match self.next("`,` or `)`")? {
                Tok::Comma => continue,
                Tok::RParen => break,
                _ => {
                    self.pos -= 1;
                    return Err(self.error_here("expected `,` or `)`"));
                }
            }
        }
        self.expect(Tok::Semi, "`;`")?;
        let primary_key = primary_key.ok_or_else(|| SchemaError::EmptyPrimaryKey(name.clone()))?;
        Ok(RelationDef {
            name,
            attributes,
            primary_key,
            foreign_keys,
        })
    }

    fn parse_domain(&mut self, relation: &str) -> Result<Domain, SchemaError> {
        let ty = self.ident("attribute type")?;
        if ty.eq_ignore_ascii_case("integer") {
            Ok(Domain::Integer)
        } else if ty.eq_ignore_ascii_case("decimal") {
            Ok(Domain::Decimal)
        } else if ty.eq_ignore_ascii_case("text") {
            self.expect(Tok::LParen, "`(`")?;
            let width = match self.next("text width")? {
                Tok::Int(n) if n > 0 && n <= u32::MAX as i64 => n as u32,
                Tok::Int(_) => {
                    return Err(SchemaError::ZeroWidthText {
                        relation: relation.to_string(),
                    })
                }
                _ => {
                    self.pos -= 1;
                    return Err(self.error_here("expected text width"));
                }
            };
            self.expect(Tok::RParen, "`)`")?;
            Ok(Domain::Text(width))
        } else {
            self.pos -= 1;
            Err(self.error_here(format!("unknown type `{ty}`")))
        }
    }

    fn qualified(&mut self) -> Result<(String, String), SchemaError> {
        let rel = self.ident("relation name")?;
        self.expect(Tok::Dot, "`.`")?;
        let attr = self.ident("attribute name")?;
        Ok((rel, attr))
    }

    fn constant(&mut self) -> Result<Value, SchemaError> {
        match self.next("constant")? {
            Tok::Int(n) => Ok(Value::Int(n)),
            Tok::Dec(d) => Ok(Value::Dec(d)),
            Tok::Text(s) => Ok(Value::Text(s)),
            _ => {
                self.pos -= 1;
                Err(self.error_here("expected constant"))
            }
        }
    }

    fn parse_view(&mut self, catalog: &Catalog) -> Result<ViewDef, SchemaError> {
        let name = self.ident("view name")?;
        self.keyword("as")?;
        self.keyword("select")?;
        let mut output = vec![self.qualified()?];
        while self.peek() == Some(&Tok::Comma) {
            self.pos += 1;
            output.push(self.qualified()?);
        }
        self.keyword("from")?;
        let mut relations = vec![self.ident("relation name")?];
        while self.peek() == Some(&Tok::Comma) {
            self.pos += 1;
            relations.push(self.ident("relation name")?);
        }

        let mut joins: Vec<(JoinEdge, Vec<bool>)> = Vec::new();
        let mut local: BTreeMap<String, Vec<Predicate>> = BTreeMap::new();
        if self.peek_keyword("where") {
            self.pos += 1;
            loop {
                self.parse_condition(catalog, &name, &mut joins, &mut local)?;
                if self.peek_keyword("and") {
                    self.pos += 1;
                } else {
                    break;
                }
            }
        }
        if self.peek() == Some(&Tok::Semi) {
            self.pos += 1;
        }
        // A composite foreign key is joined with one conjunct per attribute
        // pair; all pairs must be present.
        for (edge, matched) in &joins {
            if matched.iter().any(|m| !m) {
                return Err(SchemaError::JoinNotForeignKey {
                    view: name.clone(),
                    from: edge.from.clone(),
                    from_attrs: edge.from_attrs.join(","),
                    to: edge.to.clone(),
                    to_attrs: edge.to_attrs.join(","),
                });
            }
        }
        let joins = joins.into_iter().map(|(edge, _)| edge).collect();

        let local_predicates = local
            .into_iter()
            .map(|(rel, preds)| (rel, Predicate::conjoin(preds).expect("nonempty")))
            .collect();
        let view = ViewDef {
            name,
            relations,
            joins,
            local_predicates,
            output,
        };
        view.validate(catalog)?;
        Ok(view)
    }

    /// One WHERE conjunct: either `R.a = S.b` (a join that must instantiate
    /// a declared foreign key) or `R.a op constant` (a local condition).
    fn parse_condition(
        &mut self,
        catalog: &Catalog,
        view: &str,
        joins: &mut Vec<(JoinEdge, Vec<bool>)>,
        local: &mut BTreeMap<String, Vec<Predicate>>,
    ) -> Result<(), SchemaError> {
        let (lhs_rel, lhs_attr) = self.qualified()?;
        let op = match self.next("comparison operator")? {
            Tok::Op(op) => op,
            _ => {
                self.pos -= 1;
                return Err(self.error_here("expected comparison operator"));
            }
        };
        // A qualified name on the right makes this a join condition.
        let is_qualified = matches!(
            (self.peek(), self.toks.get(self.pos + 1).map(|t| &t.tok)),
            (Some(Tok::Ident(_)), Some(Tok::Dot))
        );
        if is_qualified {
            let (rhs_rel, rhs_attr) = self.qualified()?;
            if op != CmpOp::Eq {
                return Err(SchemaError::NonLocalCondition {
                    view: view.to_string(),
                    left: lhs_rel,
                    right: rhs_rel,
                });
            }
            let (edge, attr_idx) =
                resolve_join(catalog, view, (&lhs_rel, &lhs_attr), (&rhs_rel, &rhs_attr))?;
            match joins.iter_mut().find(|(e, _)| *e == edge) {
                Some((_, matched)) => matched[attr_idx] = true,
                None => {
                    let mut matched = vec![false; edge.from_attrs.len()];
                    matched[attr_idx] = true;
                    joins.push((edge, matched));
                }
            }
        } else {
            let value = self.constant()?;
            local.entry(lhs_rel).or_default().push(Predicate::Cmp {
                attribute: lhs_attr,
                op,
                value,
            });
        }
        Ok(())
    }
}

/// Orients an equijoin to the declared foreign key it instantiates and
/// reports which attribute pair of that key the conjunct covered.
fn resolve_join(
    catalog: &Catalog,
    view: &str,
    left: (&str, &str),
    right: (&str, &str),
) -> Result<(JoinEdge, usize), SchemaError> {
    for ((from, from_attr), (to, to_attr)) in [(left, right), (right, left)] {
        let Some(rel) = catalog.relation(from) else {
            continue;
        };
        for fk in &rel.foreign_keys {
            if fk.target_relation != to {
                continue;
            }
            if let Some(idx) = fk.attributes.iter().position(|a| a == from_attr) {
                if fk.target_attributes[idx] == to_attr {
                    let edge = JoinEdge {
                        from: from.to_string(),
                        from_attrs: fk.attributes.clone(),
                        to: to.to_string(),
                        to_attrs: fk.target_attributes.clone(),
                    };
                    return Ok((edge, idx));
                }
            }
        }
    }
    Err(SchemaError::JoinNotForeignKey {
        view: view.to_string(),
        from: left.0.to_string(),
        from_attrs: left.1.to_string(),
        to: right.0.to_string(),
        to_attrs: right.1.to_string(),
    })
}

/// Parses a schema file into a validated catalog. Empty input yields an
/// empty catalog.
pub fn parse_schema(text: &str) -> Result<Catalog, SchemaError> {
    let mut parser = Parser::new(text)?;
    let mut relations = Vec::new();
    while !parser.at_end() {
        parser.keyword("create")?;
        parser.keyword("table")?;
        relations.push(parser.parse_table()?);
    }
    Catalog::new(relations)
}

/// Parses a single view definition and validates it against the catalog.
pub fn parse_view(text: &str, catalog: &Catalog) -> Result<ViewDef, SchemaError> {
    let mut parser = Parser::new(text)?;
    parser.keyword("create")?;
    parser.keyword("view")?;
    let view = parser.parse_view(catalog)?;
    if !parser.at_end() {
        return Err(parser.error_here("expected end of input after view definition"));
    }
    Ok(view)
}
