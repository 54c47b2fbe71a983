//! Static checks over a [`CostModel`].
//!
//! An empty diagnostic list means the model is structurally sound and that
//! every formula resolves, for every process/material pair a part could
//! select, once the part provides the model's declared inputs.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::fmt;

use petgraph::algo::tarjan_scc;
use petgraph::graph::DiGraph;
use serde::Serialize;

use crate::expr::{BinOp, Expr};
use crate::model::{CostModel, ParamScope, ParamValue};
use crate::resolve::MAX_REFERENCE_DEPTH;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Severity {
    Error,
    Warning,
}

/// Kind of model item a diagnostic points at, in file order of sections.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ItemKind {
    Model,
    Global,
    Input,
    Process,
    Material,
    Entity,
    Component,
    Operation,
    Assembly,
    Root,
}

impl ItemKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ItemKind::Model => "model",
            ItemKind::Global => "param",
            ItemKind::Input => "input",
            ItemKind::Process => "process",
            ItemKind::Material => "material",
            ItemKind::Entity => "entity",
            ItemKind::Component => "component",
            ItemKind::Operation => "operation",
            ItemKind::Assembly => "assembly",
            ItemKind::Root => "root",
        }
    }
}

/// Logical position of a diagnostic inside a model.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct Location {
    pub kind: ItemKind,
    /// Declaration index within the item kind.
    pub index: usize,
    pub id: String,
    /// Parameter (declaration index, name) inside the item's scope.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub param: Option<(usize, String)>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub field: Option<String>,
}

impl Location {
    pub fn item(kind: ItemKind, index: usize, id: &str) -> Location {
        Location {
            kind,
            index,
            id: id.to_string(),
            param: None,
            field: None,
        }
    }

    pub fn model() -> Location {
        Location::item(ItemKind::Model, 0, "")
    }

    pub fn field(mut self, field: &str) -> Location {
        self.field = Some(field.to_string());
        self
    }

    pub fn param(mut self, index: usize, name: &str) -> Location {
        self.param = Some((index, name.to_string()));
        self
    }

    /// Location of parameter `index` of the global scope.
    pub fn global_param(index: usize, name: &str) -> Location {
        Location::item(ItemKind::Global, index, name)
    }
}

impl fmt::Display for Location {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.kind {
            ItemKind::Model => f.write_str("model")?,
            ItemKind::Root => f.write_str("root")?,
            kind => write!(f, "{} `{}`", kind.as_str(), self.id)?,
        }
        if let Some((_, name)) = &self.param {
            write!(f, " param `{name}`")?;
        }
        if let Some(field) = &self.field {
            write!(f, " field {field}")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Diagnostic {
    pub severity: Severity,
    pub location: Location,
    pub message: String,
    /// Other locations involved, such as the first of two duplicates.
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub related: Vec<Location>,
}

impl Diagnostic {
    pub fn error(location: Location, message: impl Into<String>) -> Diagnostic {
        Diagnostic {
            severity: Severity::Error,
            location,
            message: message.into(),
            related: Vec::new(),
        }
    }

    pub fn warning(location: Location, message: impl Into<String>) -> Diagnostic {
        Diagnostic {
            severity: Severity::Warning,
            ..Diagnostic::error(location, message)
        }
    }

    pub fn with_related(mut self, related: Location) -> Diagnostic {
        self.related.push(related);
        self
    }

    pub fn is_error(&self) -> bool {
        self.severity == Severity::Error
    }
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sev = match self.severity {
            Severity::Error => "error",
            Severity::Warning => "warning",
        };
        write!(f, "{sev}: {}: {}", self.location, self.message)
    }
}

pub fn has_errors(diags: &[Diagnostic]) -> bool {
    diags.iter().any(Diagnostic::is_error)
}

fn is_snake_case(s: &str) -> bool {
    let mut chars = s.chars();
    matches!(chars.next(), Some(c) if c.is_ascii_lowercase() || c == '_')
        && chars.all(|c| c.is_ascii_lowercase() || c.is_ascii_digit() || c == '_')
}

/// Runs every check and returns diagnostics ordered by location.
pub fn validate_model(model: &CostModel) -> Vec<Diagnostic> {
    let mut v = Validator {
        model,
        diags: Vec::new(),
    };
    v.identifiers();
    v.duplicates();
    v.literals();
    v.references();
    v.entities();
    v.assemblies();
    v.graph();
    v.resolvability();
    v.units();
    let mut diags = v.diags;
    diags.sort_by(|a, b| {
        a.location
            .cmp(&b.location)
            .then_with(|| a.message.cmp(&b.message))
    });
    diags.dedup();
    diags
}

struct Validator<'m> {
    model: &'m CostModel,
    diags: Vec<Diagnostic>,
}

impl<'m> Validator<'m> {
    fn push(&mut self, d: Diagnostic) {
        self.diags.push(d);
    }

    /// Every parameter scope with the location of its owner.
    fn scopes(&self) -> Vec<(Option<Location>, &'m ParamScope)> {
        let m = self.model;
        let mut out: Vec<(Option<Location>, &ParamScope)> = vec![(None, &m.globals)];
        for (i, p) in m.processes.iter().enumerate() {
            out.push((Some(Location::item(ItemKind::Process, i, &p.id)), &p.params));
        }
        for (i, p) in m.materials.iter().enumerate() {
            out.push((
                Some(Location::item(ItemKind::Material, i, &p.id)),
                &p.params,
            ));
        }
        for (i, o) in m.operations.iter().enumerate() {
            out.push((
                Some(Location::item(ItemKind::Operation, i, &o.id)),
                &o.params,
            ));
        }
        out
    }

    fn param_location(owner: &Option<Location>, index: usize, name: &str) -> Location {
        match owner {
            None => Location::global_param(index, name),
            Some(loc) => loc.clone().param(index, name),
        }
    }

    fn identifiers(&mut self) {
        let m = self.model;
        let check = |loc: Location, id: &str, diags: &mut Vec<Diagnostic>| {
            if !is_snake_case(id) {
                diags.push(Diagnostic::error(
                    loc,
                    format!("identifier `{id}` is not snake_case"),
                ));
            }
        };
        let diags = &mut self.diags;
        for (i, x) in m.inputs.iter().enumerate() {
            check(Location::item(ItemKind::Input, i, &x.name), &x.name, diags);
        }
        for (i, x) in m.processes.iter().enumerate() {
            check(Location::item(ItemKind::Process, i, &x.id), &x.id, diags);
        }
        for (i, x) in m.materials.iter().enumerate() {
            check(Location::item(ItemKind::Material, i, &x.id), &x.id, diags);
        }
        for (i, x) in m.entities.iter().enumerate() {
            check(Location::item(ItemKind::Entity, i, &x.id), &x.id, diags);
        }
        for (i, x) in m.components.iter().enumerate() {
            check(Location::item(ItemKind::Component, i, &x.id), &x.id, diags);
        }
        for (i, x) in m.operations.iter().enumerate() {
            check(Location::item(ItemKind::Operation, i, &x.id), &x.id, diags);
        }
        for (i, x) in m.assemblies.iter().enumerate() {
            check(Location::item(ItemKind::Assembly, i, &x.id), &x.id, diags);
        }
        for (owner, scope) in self.scopes() {
            for (i, p) in scope.params.iter().enumerate() {
                check(
                    Self::param_location(&owner, i, &p.name),
                    &p.name,
                    &mut self.diags,
                );
            }
        }
    }

    fn duplicates(&mut self) {
        let m = self.model;
        let kinds: Vec<(ItemKind, Vec<&str>)> = vec![
            (
                ItemKind::Input,
                m.inputs.iter().map(|x| x.name.as_str()).collect(),
            ),
            (
                ItemKind::Process,
                m.processes.iter().map(|x| x.id.as_str()).collect(),
            ),
            (
                ItemKind::Material,
                m.materials.iter().map(|x| x.id.as_str()).collect(),
            ),
            (
                ItemKind::Entity,
                m.entities.iter().map(|x| x.id.as_str()).collect(),
            ),
            (
                ItemKind::Component,
                m.components.iter().map(|x| x.id.as_str()).collect(),
            ),
            (
                ItemKind::Operation,
                m.operations.iter().map(|x| x.id.as_str()).collect(),
            ),
            (
                ItemKind::Assembly,
                m.assemblies.iter().map(|x| x.id.as_str()).collect(),
            ),
        ];
        for (kind, ids) in kinds {
            let mut first: HashMap<&str, usize> = HashMap::new();
            for (i, id) in ids.iter().enumerate() {
                if let Some(&j) = first.get(id) {
                    self.push(
                        Diagnostic::error(
                            Location::item(kind, i, id),
                            format!("duplicate {} id `{id}`", kind.as_str()),
                        )
                        .with_related(Location::item(kind, j, id)),
                    );
                } else {
                    first.insert(id, i);
                }
            }
        }
        for (owner, scope) in self.scopes() {
            let mut first: HashMap<&str, usize> = HashMap::new();
            for (i, p) in scope.params.iter().enumerate() {
                if let Some(&j) = first.get(p.name.as_str()) {
                    self.push(
                        Diagnostic::error(
                            Self::param_location(&owner, i, &p.name),
                            format!("duplicate parameter `{}`", p.name),
                        )
                        .with_related(Self::param_location(&owner, j, &p.name)),
                    );
                } else {
                    first.insert(&p.name, i);
                }
            }
        }
    }

    fn literals(&mut self) {
        for (owner, scope) in self.scopes() {
            for (i, p) in scope.params.iter().enumerate() {
                let bad = match &p.value {
                    ParamValue::Literal(v) => !v.is_finite(),
                    ParamValue::Expr(e) => has_nonfinite_literal(e),
                };
                if bad {
                    self.push(Diagnostic::error(
                        Self::param_location(&owner, i, &p.name),
                        "literal value is not finite",
                    ));
                }
            }
        }
    }

    fn references(&mut self) {
        let m = self.model;
        let unresolved =
            |loc: Location, id: &str| Diagnostic::error(loc, format!("unresolved id {id}"));
        let mut out = Vec::new();
        for (i, c) in m.components.iter().enumerate() {
            let loc = Location::item(ItemKind::Component, i, &c.id);
            if let Some(sub) = c.sub_assembly() {
                if m.assembly(sub).is_none() {
                    out.push(unresolved(loc.clone().field("sub_assembly"), sub));
                }
            }
            if let Some(e) = &c.entity {
                if m.entity(e).is_none() {
                    out.push(unresolved(loc.field("entity"), e));
                }
            }
        }
        for (i, o) in m.operations.iter().enumerate() {
            let loc = Location::item(ItemKind::Operation, i, &o.id);
            if let Some(p) = &o.process {
                if m.process(p).is_none() {
                    out.push(unresolved(loc.clone().field("process"), p));
                }
            }
            if let Some(mat) = &o.material {
                if m.material(mat).is_none() {
                    out.push(unresolved(loc.clone().field("material"), mat));
                }
            }
            if let Some(e) = &o.entity {
                if m.entity(e).is_none() {
                    out.push(unresolved(loc.field("entity"), e));
                }
            }
        }
        for (i, a) in m.assemblies.iter().enumerate() {
            let loc = Location::item(ItemKind::Assembly, i, &a.id);
            for c in &a.components {
                if m.component(c).is_none() {
                    out.push(unresolved(loc.clone().field("components"), c));
                }
            }
            for e in &a.entities {
                if m.entity(e).is_none() {
                    out.push(unresolved(loc.clone().field("entities"), e));
                }
            }
            for o in &a.operations {
                if m.operation(o).is_none() {
                    out.push(unresolved(loc.clone().field("operations"), o));
                }
            }
        }
        if m.root_assembly.is_empty() {
            out.push(Diagnostic::error(
                Location::item(ItemKind::Root, 0, ""),
                "missing root assembly",
            ));
        } else if m.assembly(&m.root_assembly).is_none() {
            out.push(unresolved(
                Location::item(ItemKind::Root, 0, &m.root_assembly),
                &m.root_assembly,
            ));
        }
        if m.processes.is_empty() {
            out.push(Diagnostic::error(
                Location::model(),
                "model declares no process",
            ));
        }
        if m.materials.is_empty() {
            out.push(Diagnostic::error(
                Location::model(),
                "model declares no material",
            ));
        }
        self.diags.extend(out);
    }

    fn entities(&mut self) {
        for (i, e) in self.model.entities.iter().enumerate() {
            let loc = Location::item(ItemKind::Entity, i, &e.id);
            // an empty driver was already reported by the parser
            if !e.driver.is_empty() && !e.formula.free_variables().contains(&e.driver) {
                self.push(Diagnostic::error(
                    loc.clone().field("driver"),
                    format!(
                        "driver `{}` does not appear in formula of entity `{}`",
                        e.driver, e.id
                    ),
                ));
            }
            if e.credit {
                self.push(Diagnostic::warning(
                    loc,
                    format!("entity `{}` encodes a credit and may lower cost", e.id),
                ));
            }
        }
    }

    fn assemblies(&mut self) {
        for (i, a) in self.model.assemblies.iter().enumerate() {
            let loc = Location::item(ItemKind::Assembly, i, &a.id);
            if a.components.is_empty() && a.operations.is_empty() {
                self.push(Diagnostic::error(
                    loc.clone(),
                    format!("assembly `{}` has no components or operations", a.id),
                ));
            }
            for (field, ids) in [
                ("components", &a.components),
                ("entities", &a.entities),
                ("operations", &a.operations),
            ] {
                let mut seen = HashSet::new();
                for id in ids {
                    if !seen.insert(id) {
                        self.push(Diagnostic::error(
                            loc.clone().field(field),
                            format!("`{id}` listed more than once in assembly `{}`", a.id),
                        ));
                    }
                }
            }
        }
    }

    /// Cycles in the produced-component graph, and unreachable assemblies.
    fn graph(&mut self) {
        let m = self.model;
        let mut g = DiGraph::<usize, ()>::new();
        let nodes: Vec<_> = (0..m.assemblies.len()).map(|i| g.add_node(i)).collect();
        let mut first_index: HashMap<&str, usize> = HashMap::new();
        for (i, a) in m.assemblies.iter().enumerate() {
            first_index.entry(a.id.as_str()).or_insert(i);
        }
        let mut edges = Vec::new();
        for (i, a) in m.assemblies.iter().enumerate() {
            for c in a.components.iter().filter_map(|id| m.component(id)) {
                if let Some(&j) = c.sub_assembly().and_then(|s| first_index.get(s)) {
                    edges.push((i, j));
                    g.add_edge(nodes[i], nodes[j], ());
                }
            }
        }
        for scc in tarjan_scc(&g) {
            let mut members: Vec<usize> = scc.iter().map(|n| g[*n]).collect();
            members.sort_unstable();
            let cyclic = members.len() > 1 || edges.contains(&(members[0], members[0]));
            if cyclic {
                let names: Vec<&str> = members
                    .iter()
                    .map(|&i| m.assemblies[i].id.as_str())
                    .collect();
                let head = members[0];
                self.push(Diagnostic::error(
                    Location::item(ItemKind::Assembly, head, &m.assemblies[head].id),
                    format!("cycle {}", names.join(",")),
                ));
            }
        }
        let Some(&root) = first_index.get(m.root_assembly.as_str()) else {
            return;
        };
        let mut reached = vec![false; m.assemblies.len()];
        let mut stack = vec![root];
        while let Some(i) = stack.pop() {
            if std::mem::replace(&mut reached[i], true) {
                continue;
            }
            stack.extend(edges.iter().filter(|(a, _)| *a == i).map(|(_, b)| *b));
        }
        for (i, a) in m.assemblies.iter().enumerate() {
            if !reached[i] && first_index.get(a.id.as_str()) == Some(&i) {
                self.push(Diagnostic::warning(
                    Location::item(ItemKind::Assembly, i, &a.id),
                    format!("assembly `{}` is not reachable from root", a.id),
                ));
            }
        }
    }

    /// Enumerates every (process, material) a part could select and checks
    /// that each formula's free variables resolve.
    fn resolvability(&mut self) {
        let m = self.model;
        if m.processes.is_empty() || m.materials.is_empty() {
            return;
        }
        let mut checker = Checker {
            model: m,
            memo: HashMap::new(),
        };
        let mut found: BTreeMap<(Location, String), String> = BTreeMap::new();
        let mut record = |loc: Location, problem: Problem| {
            let (key, msg) = match problem {
                Problem::Unresolved(name) => {
                    (name.clone(), format!("unresolved parameter `{name}`"))
                }
                Problem::Cyclic(chain) => (
                    chain.join(">"),
                    format!("cyclic parameter reference {}", chain.join(" -> ")),
                ),
            };
            found.entry((loc, key)).or_insert(msg);
        };
        let ids =
            |v: &[crate::model::ContextScope]| v.iter().map(|s| s.id.clone()).collect::<Vec<_>>();
        let processes = ids(&m.processes);
        let materials = ids(&m.materials);

        // Component and assembly-entity contexts: (part process, part material).
        let used_entities: BTreeSet<&str> = m
            .assemblies
            .iter()
            .flat_map(|a| a.entities.iter().map(String::as_str))
            .collect();
        for p in &processes {
            for mat in &materials {
                let ctx = Scopes::new(m, p, mat, None);
                for (i, c) in m.components.iter().enumerate() {
                    let loc = Location::item(ItemKind::Component, i, &c.id);
                    let mut fields = vec![
                        ("quantity", &c.quantity_per_output),
                        ("yield", &c.material_yield),
                    ];
                    if let crate::model::ComponentSource::Purchased { unit_cost } = &c.source {
                        fields.push(("unit_cost", unit_cost));
                    }
                    for (field, e) in fields {
                        for problem in checker.expr(e, &ctx) {
                            record(loc.clone().field(field), problem);
                        }
                    }
                    if let Some(ent) = c.entity.as_deref().and_then(|e| m.entity(e)) {
                        for problem in checker.name(&ent.driver, &ctx, &mut Vec::new()) {
                            record(loc.clone().field("entity"), problem);
                        }
                    }
                }
                for (i, e) in m.entities.iter().enumerate() {
                    if !used_entities.contains(e.id.as_str()) {
                        continue;
                    }
                    let loc = Location::item(ItemKind::Entity, i, &e.id).field("formula");
                    for problem in checker.expr(&e.formula, &ctx) {
                        record(loc.clone(), problem);
                    }
                }
            }
        }
        // Operation contexts: explicit process/material win over the part's.
        for (i, o) in m.operations.iter().enumerate() {
            let loc = Location::item(ItemKind::Operation, i, &o.id);
            let mut seen = HashSet::new();
            for p in &processes {
                for mat in &materials {
                    let p = o.process.clone().unwrap_or_else(|| p.clone());
                    let mat = o.material.clone().unwrap_or_else(|| mat.clone());
                    if !seen.insert((p.clone(), mat.clone())) {
                        continue;
                    }
                    let ctx = Scopes::new(m, &p, &mat, Some(i));
                    for (field, e) in o.fields() {
                        for problem in checker.expr(e, &ctx) {
                            record(loc.clone().field(field), problem);
                        }
                    }
                    if let Some(ent) = o.entity.as_deref().and_then(|e| m.entity(e)) {
                        for problem in checker.name(&ent.driver, &ctx, &mut Vec::new()) {
                            record(loc.clone().field("entity"), problem);
                        }
                    }
                }
            }
        }
        for (loc, msg) in found.into_iter().map(|((loc, _), msg)| (loc, msg)) {
            self.push(Diagnostic::error(loc, msg));
        }
    }

    fn units(&mut self) {
        let m = self.model;
        let mut units: HashMap<&str, BTreeSet<&str>> = HashMap::new();
        let mut unlabeled: HashSet<&str> = HashSet::new();
        let mut note = |name: &'m str, unit: &'m Option<String>| match unit {
            Some(u) => {
                units.entry(name).or_default().insert(u.as_str());
            }
            None => {
                unlabeled.insert(name);
            }
        };
        for i in &m.inputs {
            note(&i.name, &i.unit);
        }
        for (_, scope) in self.scopes() {
            for p in &scope.params {
                note(&p.name, &p.unit);
            }
        }
        // A name has a known unit only if every definition agrees on it.
        let known: HashMap<&str, &str> = units
            .into_iter()
            .filter(|(name, set)| set.len() == 1 && !unlabeled.contains(name))
            .map(|(name, set)| (name, *set.iter().next().unwrap()))
            .collect();

        let mut sites: Vec<(Location, &Expr)> = Vec::new();
        for (owner, scope) in self.scopes() {
            for (i, p) in scope.params.iter().enumerate() {
                if let ParamValue::Expr(e) = &p.value {
                    sites.push((Self::param_location(&owner, i, &p.name), e));
                }
            }
        }
        for (i, e) in m.entities.iter().enumerate() {
            sites.push((
                Location::item(ItemKind::Entity, i, &e.id).field("formula"),
                &e.formula,
            ));
        }
        for (i, c) in m.components.iter().enumerate() {
            let loc = Location::item(ItemKind::Component, i, &c.id);
            sites.push((loc.clone().field("quantity"), &c.quantity_per_output));
            sites.push((loc.clone().field("yield"), &c.material_yield));
            if let crate::model::ComponentSource::Purchased { unit_cost } = &c.source {
                sites.push((loc.field("unit_cost"), unit_cost));
            }
        }
        for (i, o) in m.operations.iter().enumerate() {
            for (field, e) in o.fields() {
                sites.push((
                    Location::item(ItemKind::Operation, i, &o.id).field(field),
                    e,
                ));
            }
        }
        for (loc, e) in sites {
            let mut mixes = Vec::new();
            unit_of(e, &known, &mut mixes);
            for (a, b) in mixes {
                self.push(Diagnostic::warning(
                    loc.clone(),
                    format!("adds quantities labelled `{a}` and `{b}`"),
                ));
            }
        }
    }
}

fn has_nonfinite_literal(e: &Expr) -> bool {
    match e {
        Expr::Num(v) => !v.is_finite(),
        Expr::Var(_) => false,
        Expr::Neg(inner) => has_nonfinite_literal(inner),
        Expr::Binary(_, a, b) => has_nonfinite_literal(a) || has_nonfinite_literal(b),
        Expr::Call(_, args) => args.iter().any(has_nonfinite_literal),
    }
}

/// Label-level unit inference: only sums and differences of two known,
/// different labels are reported.
fn unit_of<'a>(
    e: &Expr,
    known: &HashMap<&str, &'a str>,
    mixes: &mut Vec<(&'a str, &'a str)>,
) -> Option<&'a str> {
    match e {
        Expr::Num(_) => None,
        Expr::Var(name) => known.get(name.as_str()).copied(),
        Expr::Neg(inner) => unit_of(inner, known, mixes),
        Expr::Binary(BinOp::Add | BinOp::Sub, a, b) => {
            let ua = unit_of(a, known, mixes);
            let ub = unit_of(b, known, mixes);
            match (ua, ub) {
                (Some(x), Some(y)) if x != y => {
                    mixes.push((x, y));
                    None
                }
                (x, y) => x.or(y),
            }
        }
        Expr::Binary(_, a, b) => {
            unit_of(a, known, mixes);
            unit_of(b, known, mixes);
            None
        }
        Expr::Call(_, args) => {
            let us: Vec<_> = args.iter().map(|a| unit_of(a, known, mixes)).collect();
            let first = us[0];
            if us.iter().all(|u| *u == first) {
                first
            } else {
                None
            }
        }
    }
}

enum Problem {
    Unresolved(String),
    Cyclic(Vec<String>),
}

/// Scope chain for symbolic resolution; part inputs sit above it.
struct Scopes<'m> {
    key: (String, String, Option<usize>),
    chain: Vec<&'m ParamScope>,
}

impl<'m> Scopes<'m> {
    fn new(m: &'m CostModel, process: &str, material: &str, feature: Option<usize>) -> Self {
        let mut chain = Vec::new();
        if let Some(i) = feature {
            chain.push(&m.operations[i].params);
        }
        if let Some(s) = m.material(material) {
            chain.push(&s.params);
        }
        if let Some(s) = m.process(process) {
            chain.push(&s.params);
        }
        chain.push(&m.globals);
        Scopes {
            key: (process.to_string(), material.to_string(), feature),
            chain,
        }
    }
}

/// (process, material, operation index) a name is looked up from.
type ScopeKey = (String, String, Option<usize>);

struct Checker<'m> {
    model: &'m CostModel,
    /// Names already proven resolvable in a context.
    memo: HashMap<(ScopeKey, String), bool>,
}

impl<'m> Checker<'m> {
    fn expr(&mut self, e: &Expr, ctx: &Scopes<'m>) -> Vec<Problem> {
        let mut out = Vec::new();
        for name in e.free_variables() {
            out.extend(self.name(&name, ctx, &mut Vec::new()));
        }
        out
    }

    fn name(&mut self, name: &str, ctx: &Scopes<'m>, chain: &mut Vec<String>) -> Vec<Problem> {
        if self.model.input(name).is_some() {
            return Vec::new();
        }
        let memo_key = (ctx.key.clone(), name.to_string());
        if self.memo.get(&memo_key) == Some(&true) {
            return Vec::new();
        }
        let Some(param) = ctx.chain.iter().find_map(|s| s.get(name)) else {
            return vec![Problem::Unresolved(name.to_string())];
        };
        let ParamValue::Expr(e) = &param.value else {
            self.memo.insert(memo_key, true);
            return Vec::new();
        };
        if chain.iter().any(|c| c == name) || chain.len() >= MAX_REFERENCE_DEPTH {
            let mut cycle = chain.clone();
            cycle.push(name.to_string());
            return vec![Problem::Cyclic(cycle)];
        }
        chain.push(name.to_string());
        let mut out = Vec::new();
        for var in e.free_variables() {
            out.extend(self.name(&var, ctx, chain));
        }
        chain.pop();
        if out.is_empty() && chain.is_empty() {
            // Only memoize from the top: depth limits depend on the chain.
            self.memo.insert(memo_key, true);
        }
        out
    }
}
