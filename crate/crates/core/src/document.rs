//! The `.cmdl` model file format.
//!
//! ```text
//! # comments run to end of line
//! model "foundry" {
//!   param sand_price = 0.06 eur_per_kg;
//!   input part_mass_kg kg;
//!   process green_sand { param labor_rate = 38 eur_per_h; }
//!   material steel { param alloy_price = "base_price * 1.2" eur_per_kg; }
//!   entity pattern_wear { driver = parts_per_mold; formula = "..."; category = tooling; }
//!   component mold { kind = produced; sub_assembly = mold_making; quantity_per_output = "1 / parts_per_mold"; }
//!   operation pouring { cycle_time_s = 90; parts_per_cycle = "parts_per_mold"; param ladle_rate = 25; }
//!   assembly moulage { components = [mold, core]; operations = [remoulage]; }
//!   root = piece_brute;
//! }
//! ```
//!
//! Grammar violations are fatal. Problems inside otherwise well-formed
//! syntax (unknown keys, malformed expressions, bad enum values) are
//! collected as positioned diagnostics so an editor can show all of them.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::Serialize;
use thiserror::Error;

use crate::expr::format::format_number;
use crate::expr::parse::scan_number;
use crate::expr::{is_identifier, parse_expr, Expr};
use crate::model::{
    Assembly, Category, Component, ComponentSource, ContextScope, CostEntity, CostModel, InputDecl,
    Operation, ParamScope, ParamValue, Parameter,
};
use crate::validate::{validate_model, Diagnostic, ItemKind, Location, Severity};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct Span {
    pub line: usize,
    pub column: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{line}:{column}: {message}")]
pub struct ModelSyntaxError {
    pub line: usize,
    pub column: usize,
    pub message: String,
}

/// A diagnostic tied to a source position.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct DocDiagnostic {
    pub severity: Severity,
    pub line: usize,
    pub column: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub location: Option<Location>,
    pub message: String,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub related: Vec<Span>,
}

impl DocDiagnostic {
    pub fn is_error(&self) -> bool {
        self.severity == Severity::Error
    }
}

impl std::fmt::Display for DocDiagnostic {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let sev = match self.severity {
            Severity::Error => "error",
            Severity::Warning => "warning",
        };
        write!(f, "{}:{}: {sev}: ", self.line, self.column)?;
        if let Some(loc) = &self.location {
            write!(f, "{loc}: ")?;
        }
        f.write_str(&self.message)?;
        for r in &self.related {
            write!(f, " (see {}:{})", r.line, r.column)?;
        }
        Ok(())
    }
}

/// Parsed model text together with where each declaration came from.
#[derive(Debug, Clone)]
pub struct ModelDocument {
    pub source: String,
    pub model: CostModel,
    pub locations: BTreeMap<Location, Span>,
    parse_diagnostics: Vec<DocDiagnostic>,
}

impl ModelDocument {
    /// Parse-level and validation diagnostics, ordered by position.
    pub fn diagnostics(&self) -> Vec<DocDiagnostic> {
        let mut out = self.parse_diagnostics.clone();
        out.extend(
            validate_model(&self.model)
                .into_iter()
                .map(|d| self.position(d)),
        );
        out.sort_by(|a, b| (a.line, a.column, &a.message).cmp(&(b.line, b.column, &b.message)));
        out
    }

    pub fn has_errors(&self) -> bool {
        self.parse_diagnostics.iter().any(DocDiagnostic::is_error)
            || crate::validate::has_errors(&validate_model(&self.model))
    }

    /// Source position of a logical location, falling back to the
    /// enclosing declaration.
    pub fn span_of(&self, loc: &Location) -> Span {
        let mut probe = loc.clone();
        if let Some(s) = self.locations.get(&probe) {
            return *s;
        }
        probe.field = None;
        if let Some(s) = self.locations.get(&probe) {
            return *s;
        }
        probe.param = None;
        self.locations
            .get(&probe)
            .or_else(|| self.locations.get(&Location::model()))
            .copied()
            .unwrap_or(Span { line: 1, column: 1 })
    }

    fn position(&self, d: Diagnostic) -> DocDiagnostic {
        let span = self.span_of(&d.location);
        DocDiagnostic {
            severity: d.severity,
            line: span.line,
            column: span.column,
            related: d.related.iter().map(|r| self.span_of(r)).collect(),
            location: Some(d.location),
            message: d.message,
        }
    }
}

// ---------------------------------------------------------------- lexer

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Ident(String),
    Str(String),
    Num(f64),
    LBrace,
    RBrace,
    LBracket,
    RBracket,
    Eq,
    Semi,
    Comma,
    Eof,
}

impl Tok {
    fn describe(&self) -> String {
        match self {
            Tok::Ident(s) => format!("`{s}`"),
            Tok::Str(_) => "string".into(),
            Tok::Num(_) => "number".into(),
            Tok::LBrace => "`{`".into(),
            Tok::RBrace => "`}`".into(),
            Tok::LBracket => "`[`".into(),
            Tok::RBracket => "`]`".into(),
            Tok::Eq => "`=`".into(),
            Tok::Semi => "`;`".into(),
            Tok::Comma => "`,`".into(),
            Tok::Eof => "end of file".into(),
        }
    }
}

fn lex(text: &str) -> Result<Vec<(Span, Tok)>, ModelSyntaxError> {
    let bytes = text.as_bytes();
    let mut out = Vec::new();
    let (mut i, mut line, mut line_start) = (0usize, 1usize, 0usize);
    let span_at = |i: usize, line: usize, line_start: usize| Span {
        line,
        column: text[line_start..i].chars().count() + 1,
    };
    while i < bytes.len() {
        let b = bytes[i];
        let span = span_at(i, line, line_start);
        let fail = |message: String| ModelSyntaxError {
            line: span.line,
            column: span.column,
            message,
        };
        match b {
            b'\n' => {
                i += 1;
                line += 1;
                line_start = i;
            }
            b' ' | b'\t' | b'\r' => i += 1,
            b'#' => {
                while i < bytes.len() && bytes[i] != b'\n' {
                    i += 1;
                }
            }
            b'{' | b'}' | b'[' | b']' | b'=' | b';' | b',' => {
                let tok = match b {
                    b'{' => Tok::LBrace,
                    b'}' => Tok::RBrace,
                    b'[' => Tok::LBracket,
                    b']' => Tok::RBracket,
                    b'=' => Tok::Eq,
                    b';' => Tok::Semi,
                    _ => Tok::Comma,
                };
                out.push((span, tok));
                i += 1;
            }
            b'"' => {
                i += 1;
                let mut s = String::new();
                loop {
                    let Some(c) = text[i..].chars().next() else {
                        return Err(fail("unterminated string".into()));
                    };
                    i += c.len_utf8();
                    match c {
                        '"' => break,
                        '\n' => return Err(fail("newline in string".into())),
                        '\\' => {
                            let Some(esc) = text[i..].chars().next() else {
                                return Err(fail("unterminated string".into()));
                            };
                            i += esc.len_utf8();
                            s.push(match esc {
                                'n' => '\n',
                                't' => '\t',
                                '"' => '"',
                                '\\' => '\\',
                                other => return Err(fail(format!("unknown escape `\\{other}`"))),
                            });
                        }
                        c => s.push(c),
                    }
                }
                out.push((span, Tok::Str(s)));
            }
            b'-' | b'0'..=b'9' => {
                let neg = b == b'-';
                let start = if neg { i + 1 } else { i };
                let (v, end) =
                    scan_number(bytes, start).map_err(|_| fail("malformed number".into()))?;
                out.push((span, Tok::Num(if neg { -v } else { v })));
                i = end;
            }
            b'a'..=b'z' | b'A'..=b'Z' | b'_' => {
                let start = i;
                while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                    i += 1;
                }
                out.push((span, Tok::Ident(text[start..i].to_string())));
            }
            _ => {
                let c = text[i..].chars().next().unwrap_or('?');
                return Err(fail(format!("unexpected character `{c}`")));
            }
        }
    }
    out.push((span_at(bytes.len(), line, line_start), Tok::Eof));
    Ok(out)
}

// --------------------------------------------------------------- parser

#[derive(Debug, Clone)]
enum Value {
    Num(f64),
    Str(String),
    Ident(String),
    List(Vec<String>),
}

struct Parser {
    toks: Vec<(Span, Tok)>,
    pos: usize,
    model: CostModel,
    locations: BTreeMap<Location, Span>,
    diags: Vec<DocDiagnostic>,
}

type PResult<T> = Result<T, ModelSyntaxError>;

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.pos].1
    }

    fn span(&self) -> Span {
        self.toks[self.pos].0
    }

    fn bump(&mut self) -> (Span, Tok) {
        let t = self.toks[self.pos].clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn fail<T>(&self, expected: &str) -> PResult<T> {
        let span = self.span();
        Err(ModelSyntaxError {
            line: span.line,
            column: span.column,
            message: format!("expected {expected}, found {}", self.peek().describe()),
        })
    }

    fn expect(&mut self, tok: Tok) -> PResult<Span> {
        if *self.peek() == tok {
            Ok(self.bump().0)
        } else {
            self.fail(&tok.describe())
        }
    }

    fn ident(&mut self) -> PResult<(Span, String)> {
        match self.peek().clone() {
            Tok::Ident(s) => Ok((self.bump().0, s)),
            _ => self.fail("identifier"),
        }
    }

    fn keyword(&mut self, kw: &str) -> bool {
        if matches!(self.peek(), Tok::Ident(s) if s == kw) {
            self.bump();
            true
        } else {
            false
        }
    }

    fn diag(&mut self, span: Span, location: Option<Location>, message: impl Into<String>) {
        self.diags.push(DocDiagnostic {
            severity: Severity::Error,
            line: span.line,
            column: span.column,
            location,
            message: message.into(),
            related: Vec::new(),
        });
    }

    fn document(&mut self) -> PResult<()> {
        let span = self.span();
        if !self.keyword("model") {
            return self.fail("model");
        }
        self.locations.insert(Location::model(), span);
        match self.bump() {
            (_, Tok::Str(id)) => self.model.id = id,
            _ => {
                self.pos -= 1;
                return self.fail("model name string");
            }
        }
        self.expect(Tok::LBrace)?;
        while *self.peek() != Tok::RBrace {
            self.item()?;
        }
        self.expect(Tok::RBrace)?;
        if *self.peek() != Tok::Eof {
            return self.fail("end of file");
        }
        Ok(())
    }

    fn item(&mut self) -> PResult<()> {
        let (kw_span, kw) = match self.peek().clone() {
            Tok::Ident(s) => (self.span(), s),
            _ => return self.fail("declaration"),
        };
        self.bump();
        match kw.as_str() {
            "param" => {
                let index = self.model.globals.params.len();
                let (span, p) = self.param()?;
                self.locations.insert(Location::global_param(index, &p.name), span);
                self.model.globals.push(p);
            }
            "input" => {
                let (span, name) = self.ident()?;
                let unit = self.unit()?;
                self.expect(Tok::Semi)?;
                let index = self.model.inputs.len();
                self.locations.insert(Location::item(ItemKind::Input, index, &name), span);
                self.model.inputs.push(InputDecl { name, unit });
            }
            "process" | "material" => {
                let kind = if kw == "process" { ItemKind::Process } else { ItemKind::Material };
                let (span, id) = self.ident()?;
                let index = if kind == ItemKind::Process {
                    self.model.processes.len()
                } else {
                    self.model.materials.len()
                };
                let loc = Location::item(kind, index, &id);
                self.locations.insert(loc.clone(), span);
                self.expect(Tok::LBrace)?;
                let mut params = ParamScope::default();
                while *self.peek() != Tok::RBrace {
                    if !self.keyword("param") {
                        return self.fail("param or `}`");
                    }
                    let (pspan, p) = self.param()?;
                    self.locations.insert(loc.clone().param(params.params.len(), &p.name), pspan);
                    params.push(p);
                }
                self.expect(Tok::RBrace)?;
                let scope = ContextScope { id, params };
                if kind == ItemKind::Process {
                    self.model.processes.push(scope);
                } else {
                    self.model.materials.push(scope);
                }
            }
            "entity" => self.entity()?,
            "component" => self.component()?,
            "operation" => self.operation()?,
            "assembly" => self.assembly()?,
            "root" => {
                self.expect(Tok::Eq)?;
                let (span, id) = self.ident()?;
                self.expect(Tok::Semi)?;
                self.locations.insert(Location::item(ItemKind::Root, 0, &id), span);
                self.model.root_assembly = id;
            }
            _ => {
                return Err(ModelSyntaxError {
                    line: kw_span.line,
                    column: kw_span.column,
                    message: format!(
                        "expected declaration (param, input, process, material, entity, component, operation, assembly, root), found `{kw}`"
                    ),
                })
            }
        }
        Ok(())
    }

    fn unit(&mut self) -> PResult<Option<String>> {
        match self.peek().clone() {
            Tok::Ident(u) | Tok::Str(u) => {
                self.bump();
                Ok(Some(u))
            }
            _ => Ok(None),
        }
    }

    /// `ID '=' (NUMBER | STRING) unit? ';'`, after the `param` keyword.
    fn param(&mut self) -> PResult<(Span, Parameter)> {
        let (span, name) = self.ident()?;
        self.expect(Tok::Eq)?;
        let (vspan, tok) = self.bump();
        let value = match tok {
            Tok::Num(v) => ParamValue::Literal(v),
            Tok::Str(s) => match parse_expr(&s) {
                Ok(e) => ParamValue::Expr(e),
                Err(e) => {
                    self.diag(
                        string_offset(vspan, e.position),
                        None,
                        format!("malformed expression for `{name}`: {e}"),
                    );
                    ParamValue::Literal(0.0)
                }
            },
            _ => {
                self.pos -= 1;
                return self.fail("number or expression string");
            }
        };
        let unit = self.unit()?;
        self.expect(Tok::Semi)?;
        Ok((span, Parameter { name, value, unit }))
    }

    fn value(&mut self) -> PResult<(Span, Value)> {
        let span = self.span();
        let v = match self.peek().clone() {
            Tok::Num(v) => Value::Num(v),
            Tok::Str(s) => Value::Str(s),
            Tok::Ident(s) => Value::Ident(s),
            Tok::LBracket => {
                self.bump();
                let mut ids = Vec::new();
                while *self.peek() != Tok::RBracket {
                    ids.push(self.ident()?.1);
                    if *self.peek() == Tok::Comma {
                        self.bump();
                    } else {
                        break;
                    }
                }
                self.expect(Tok::RBracket)?;
                return Ok((span, Value::List(ids)));
            }
            _ => return self.fail("value"),
        };
        self.bump();
        Ok((span, v))
    }

    /// Reads `{ key = value; ... }`; `param` lines are only accepted when
    /// `params` is given.
    fn block(
        &mut self,
        loc: &Location,
        mut params: Option<&mut ParamScope>,
    ) -> PResult<Vec<(Span, String, Span, Value)>> {
        self.expect(Tok::LBrace)?;
        let mut out = Vec::new();
        while *self.peek() != Tok::RBrace {
            if params.is_some() && self.keyword("param") {
                let (span, p) = self.param()?;
                let scope = params.as_deref_mut().expect("checked");
                self.locations
                    .insert(loc.clone().param(scope.params.len(), &p.name), span);
                scope.push(p);
                continue;
            }
            let (kspan, key) = self.ident()?;
            self.expect(Tok::Eq)?;
            let (vspan, value) = self.value()?;
            self.expect(Tok::Semi)?;
            self.locations.insert(loc.clone().field(&key), kspan);
            out.push((kspan, key, vspan, value));
        }
        self.expect(Tok::RBrace)?;
        Ok(out)
    }

    fn expr_value(&mut self, loc: &Location, key: &str, span: Span, v: Value) -> Option<Expr> {
        match v {
            Value::Num(n) => Some(Expr::Num(n)),
            Value::Str(s) => match parse_expr(&s) {
                Ok(e) => Some(e),
                Err(e) => {
                    self.diag(
                        string_offset(span, e.position),
                        Some(loc.clone().field(key)),
                        format!("malformed expression: {e}"),
                    );
                    None
                }
            },
            Value::Ident(name) => Some(Expr::Var(name)),
            Value::List(_) => {
                self.diag(
                    span,
                    Some(loc.clone().field(key)),
                    "expected an expression, found a list",
                );
                None
            }
        }
    }

    fn ident_value(&mut self, loc: &Location, key: &str, span: Span, v: Value) -> Option<String> {
        match v {
            Value::Ident(s) => Some(s),
            _ => {
                self.diag(
                    span,
                    Some(loc.clone().field(key)),
                    format!("`{key}` expects an identifier"),
                );
                None
            }
        }
    }

    fn string_value(&mut self, loc: &Location, key: &str, span: Span, v: Value) -> Option<String> {
        match v {
            Value::Str(s) => Some(s),
            _ => {
                self.diag(
                    span,
                    Some(loc.clone().field(key)),
                    format!("`{key}` expects a string"),
                );
                None
            }
        }
    }

    fn unknown_key(&mut self, loc: &Location, span: Span, key: &str) {
        let what = loc.kind.as_str();
        self.diag(
            span,
            Some(loc.clone().field(key)),
            format!("unknown key `{key}` in {what}"),
        );
    }

    fn missing(&mut self, loc: &Location, key: &str) {
        // A present but malformed value was already reported.
        if self.locations.contains_key(&loc.clone().field(key)) {
            return;
        }
        let span = self
            .locations
            .get(loc)
            .copied()
            .unwrap_or(Span { line: 1, column: 1 });
        self.diag(span, Some(loc.clone()), format!("missing `{key}`"));
    }

    fn declare(&mut self, kind: ItemKind, index: usize) -> PResult<(Location, String)> {
        let (span, id) = self.ident()?;
        let loc = Location::item(kind, index, &id);
        self.locations.insert(loc.clone(), span);
        Ok((loc, id))
    }

    fn entity(&mut self) -> PResult<()> {
        let (loc, id) = self.declare(ItemKind::Entity, self.model.entities.len())?;
        let (mut driver, mut formula, mut category, mut credit) = (None, None, None, false);
        for (kspan, key, vspan, v) in self.block(&loc, None)? {
            match key.as_str() {
                "driver" => {
                    driver = match v {
                        Value::Ident(s) | Value::Str(s) => Some(s),
                        _ => {
                            self.diag(
                                vspan,
                                Some(loc.clone().field("driver")),
                                "`driver` expects one parameter name",
                            );
                            None
                        }
                    }
                }
                "formula" => formula = self.expr_value(&loc, &key, vspan, v),
                "category" => {
                    category = match &v {
                        Value::Ident(s) => Category::parse(s),
                        _ => None,
                    };
                    if category.is_none() {
                        self.diag(
                            vspan,
                            Some(loc.clone().field("category")),
                            "category must be one of material, labor, machine, consumable, scrap, tooling",
                        );
                    }
                }
                "credit" => match v {
                    Value::Ident(s) if s == "true" || s == "false" => credit = s == "true",
                    _ => self.diag(
                        vspan,
                        Some(loc.clone().field("credit")),
                        "`credit` expects true or false",
                    ),
                },
                _ => self.unknown_key(&loc, kspan, &key),
            }
        }
        let driver = driver.unwrap_or_else(|| {
            self.missing(&loc, "driver");
            String::new()
        });
        let formula = formula.unwrap_or_else(|| {
            self.missing(&loc, "formula");
            Expr::Num(0.0)
        });
        let category = category.unwrap_or(Category::Material);
        self.model.entities.push(CostEntity {
            id,
            driver,
            formula,
            category,
            credit,
        });
        Ok(())
    }

    fn component(&mut self) -> PResult<()> {
        let (loc, id) = self.declare(ItemKind::Component, self.model.components.len())?;
        let mut name = None;
        let mut kind = None;
        let mut quantity = None;
        let mut unit_cost = None;
        let mut sub_assembly = None;
        let mut material_yield = None;
        let mut entity = None;
        let mut kind_span = None;
        for (kspan, key, vspan, v) in self.block(&loc, None)? {
            match key.as_str() {
                "name" => name = self.string_value(&loc, &key, vspan, v),
                "kind" => {
                    kind_span = Some(vspan);
                    kind = match &v {
                        Value::Ident(s) if s == "purchased" || s == "produced" => Some(s.clone()),
                        _ => {
                            self.diag(
                                vspan,
                                Some(loc.clone().field("kind")),
                                "kind must be purchased or produced",
                            );
                            None
                        }
                    }
                }
                "quantity_per_output" => quantity = self.expr_value(&loc, &key, vspan, v),
                "unit_cost" => unit_cost = self.expr_value(&loc, &key, vspan, v),
                "sub_assembly" => sub_assembly = self.ident_value(&loc, &key, vspan, v),
                "material_yield" => material_yield = self.expr_value(&loc, &key, vspan, v),
                "entity" => entity = self.ident_value(&loc, &key, vspan, v),
                _ => self.unknown_key(&loc, kspan, &key),
            }
        }
        let kind = kind.unwrap_or_else(|| {
            if sub_assembly.is_some() {
                "produced"
            } else {
                "purchased"
            }
            .to_string()
        });
        let span = kind_span.unwrap_or_else(|| self.locations[&loc]);
        let source = match (kind.as_str(), unit_cost, sub_assembly) {
            ("purchased", Some(unit_cost), None) => ComponentSource::Purchased { unit_cost },
            ("produced", None, Some(sub_assembly)) => ComponentSource::Produced { sub_assembly },
            ("purchased", unit_cost, _) => {
                self.diag(
                    span,
                    Some(loc.clone()),
                    "a purchased component needs `unit_cost` and no `sub_assembly`",
                );
                ComponentSource::Purchased {
                    unit_cost: unit_cost.unwrap_or(Expr::Num(0.0)),
                }
            }
            (_, _, sub_assembly) => {
                self.diag(
                    span,
                    Some(loc.clone()),
                    "a produced component needs `sub_assembly` and no `unit_cost`",
                );
                ComponentSource::Produced {
                    sub_assembly: sub_assembly.unwrap_or_default(),
                }
            }
        };
        let quantity_per_output = quantity.unwrap_or_else(|| {
            self.missing(&loc, "quantity_per_output");
            Expr::Num(0.0)
        });
        self.model.components.push(Component {
            name: name.unwrap_or_else(|| id.clone()),
            id,
            source,
            quantity_per_output,
            material_yield: material_yield.unwrap_or(Expr::Num(1.0)),
            entity,
        });
        Ok(())
    }

    fn operation(&mut self) -> PResult<()> {
        let (loc, id) = self.declare(ItemKind::Operation, self.model.operations.len())?;
        let mut params = ParamScope::default();
        let entries = self.block(&loc, Some(&mut params))?;
        let mut name = None;
        let mut process = None;
        let mut material = None;
        let mut entity = None;
        let mut exprs: BTreeMap<&'static str, Expr> = BTreeMap::new();
        const EXPR_KEYS: [&str; 7] = [
            "cycle_time_s",
            "parts_per_cycle",
            "machine_rate_per_h",
            "labor_rate_per_h",
            "crew_size",
            "scrap_rate",
            "consumable_cost_per_part",
        ];
        for (kspan, key, vspan, v) in entries {
            match key.as_str() {
                "name" => name = self.string_value(&loc, &key, vspan, v),
                "process" => process = self.ident_value(&loc, &key, vspan, v),
                "material" => material = self.ident_value(&loc, &key, vspan, v),
                "entity" => entity = self.ident_value(&loc, &key, vspan, v),
                k => match EXPR_KEYS.iter().find(|e| **e == k) {
                    Some(field) => {
                        if let Some(e) = self.expr_value(&loc, k, vspan, v) {
                            exprs.insert(field, e);
                        }
                    }
                    None => self.unknown_key(&loc, kspan, &key),
                },
            }
        }
        if !exprs.contains_key("cycle_time_s") {
            self.missing(&loc, "cycle_time_s");
        }
        let mut take = |k: &str, default: f64| exprs.remove(k).unwrap_or(Expr::Num(default));
        let op = Operation {
            name: name.unwrap_or_else(|| id.clone()),
            id,
            process,
            material,
            params,
            cycle_time_s: take("cycle_time_s", 0.0),
            parts_per_cycle: take("parts_per_cycle", 1.0),
            machine_rate_per_h: take("machine_rate_per_h", 0.0),
            labor_rate_per_h: take("labor_rate_per_h", 0.0),
            crew_size: take("crew_size", 0.0),
            scrap_rate: take("scrap_rate", 0.0),
            consumable_cost_per_part: take("consumable_cost_per_part", 0.0),
            entity,
        };
        self.model.operations.push(op);
        Ok(())
    }

    fn assembly(&mut self) -> PResult<()> {
        let (loc, id) = self.declare(ItemKind::Assembly, self.model.assemblies.len())?;
        let mut name = None;
        let mut output_name = None;
        let (mut components, mut entities, mut operations) = (vec![], vec![], vec![]);
        for (kspan, key, vspan, v) in self.block(&loc, None)? {
            match (key.as_str(), v) {
                ("name", v) => name = self.string_value(&loc, &key, vspan, v),
                ("output_name", v) => output_name = self.string_value(&loc, &key, vspan, v),
                ("components", Value::List(ids)) => components = ids,
                ("entities", Value::List(ids)) => entities = ids,
                ("operations", Value::List(ids)) => operations = ids,
                ("components" | "entities" | "operations", _) => self.diag(
                    vspan,
                    Some(loc.clone().field(&key)),
                    format!("`{key}` expects a list `[a, b]`"),
                ),
                _ => self.unknown_key(&loc, kspan, &key),
            }
        }
        self.model.assemblies.push(Assembly {
            name: name.unwrap_or_else(|| id.clone()),
            output_name: output_name.unwrap_or_else(|| id.clone()),
            id,
            components,
            entities,
            operations,
        });
        Ok(())
    }
}

/// Position inside a one-line string literal that starts at `span`.
fn string_offset(span: Span, offset: usize) -> Span {
    Span {
        line: span.line,
        column: span.column + 1 + offset,
    }
}

/// Parses model text. Fatal grammar errors abort; everything else is
/// reported through [`ModelDocument::diagnostics`].
pub fn parse_model(text: &str) -> Result<ModelDocument, ModelSyntaxError> {
    let toks = lex(text)?;
    let mut p = Parser {
        toks,
        pos: 0,
        model: CostModel::empty(""),
        locations: BTreeMap::new(),
        diags: Vec::new(),
    };
    p.document()?;
    Ok(ModelDocument {
        source: text.to_string(),
        model: p.model,
        locations: p.locations,
        parse_diagnostics: p.diags,
    })
}

// -------------------------------------------------------------- printer

fn quote(s: &str) -> String {
    let mut out = String::with_capacity(s.len() + 2);
    out.push('"');
    for c in s.chars() {
        match c {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            '\t' => out.push_str("\\t"),
            c => out.push(c),
        }
    }
    out.push('"');
    out
}

fn expr_text(e: &Expr) -> String {
    match e {
        Expr::Num(v) => format_number(*v),
        other => quote(&other.to_text()),
    }
}

fn unit_text(unit: &Option<String>) -> String {
    match unit {
        Some(u) if is_identifier(u) => format!(" {u}"),
        Some(u) => format!(" {}", quote(u)),
        None => String::new(),
    }
}

fn write_param(out: &mut String, indent: &str, p: &Parameter) {
    let value = match &p.value {
        ParamValue::Literal(v) => format_number(*v),
        ParamValue::Expr(e) => quote(&e.to_text()),
    };
    let _ = writeln!(
        out,
        "{indent}param {} = {value}{};",
        p.name,
        unit_text(&p.unit)
    );
}

/// Canonical text for a model. Comments and layout are not preserved.
pub fn print_model(model: &CostModel) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "model {} {{", quote(&model.id));
    for p in &model.globals.params {
        write_param(&mut out, "  ", p);
    }
    for i in &model.inputs {
        let _ = writeln!(out, "  input {}{};", i.name, unit_text(&i.unit));
    }
    for (kw, scopes) in [
        ("process", &model.processes),
        ("material", &model.materials),
    ] {
        for s in scopes {
            let _ = writeln!(out, "\n  {kw} {} {{", s.id);
            for p in &s.params.params {
                write_param(&mut out, "    ", p);
            }
            out.push_str("  }\n");
        }
    }
    for e in &model.entities {
        let _ = writeln!(out, "\n  entity {} {{", e.id);
        let _ = writeln!(
            out,
            "    driver = {};",
            if is_identifier(&e.driver) {
                e.driver.clone()
            } else {
                quote(&e.driver)
            }
        );
        let _ = writeln!(out, "    formula = {};", expr_text(&e.formula));
        let _ = writeln!(out, "    category = {};", e.category);
        if e.credit {
            out.push_str("    credit = true;\n");
        }
        out.push_str("  }\n");
    }
    for c in &model.components {
        let _ = writeln!(out, "\n  component {} {{", c.id);
        let _ = writeln!(out, "    name = {};", quote(&c.name));
        let _ = writeln!(out, "    kind = {};", c.kind().as_str());
        let _ = writeln!(
            out,
            "    quantity_per_output = {};",
            expr_text(&c.quantity_per_output)
        );
        match &c.source {
            ComponentSource::Purchased { unit_cost } => {
                let _ = writeln!(out, "    unit_cost = {};", expr_text(unit_cost));
            }
            ComponentSource::Produced { sub_assembly } => {
                let _ = writeln!(out, "    sub_assembly = {sub_assembly};");
            }
        }
        let _ = writeln!(
            out,
            "    material_yield = {};",
            expr_text(&c.material_yield)
        );
        if let Some(e) = &c.entity {
            let _ = writeln!(out, "    entity = {e};");
        }
        out.push_str("  }\n");
    }
    for o in &model.operations {
        let _ = writeln!(out, "\n  operation {} {{", o.id);
        let _ = writeln!(out, "    name = {};", quote(&o.name));
        for (key, v) in [
            ("process", &o.process),
            ("material", &o.material),
            ("entity", &o.entity),
        ] {
            if let Some(v) = v {
                let _ = writeln!(out, "    {key} = {v};");
            }
        }
        for (key, e) in o.fields() {
            let _ = writeln!(out, "    {key} = {};", expr_text(e));
        }
        for p in &o.params.params {
            write_param(&mut out, "    ", p);
        }
        out.push_str("  }\n");
    }
    for a in &model.assemblies {
        let _ = writeln!(out, "\n  assembly {} {{", a.id);
        let _ = writeln!(out, "    name = {};", quote(&a.name));
        let _ = writeln!(out, "    output_name = {};", quote(&a.output_name));
        let _ = writeln!(out, "    components = [{}];", a.components.join(", "));
        if !a.entities.is_empty() {
            let _ = writeln!(out, "    entities = [{}];", a.entities.join(", "));
        }
        let _ = writeln!(out, "    operations = [{}];", a.operations.join(", "));
        out.push_str("  }\n");
    }
    if !model.root_assembly.is_empty() {
        let _ = writeln!(out, "\n  root = {};", model.root_assembly);
    }
    out.push_str("}\n");
    out
}
