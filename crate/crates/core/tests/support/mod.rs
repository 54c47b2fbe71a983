//! Shared generators, brute-force oracles and checks for the integration
//! tests. Also pulled into the acceptance suite by path.

#![allow(dead_code)]

use std::collections::BTreeMap;
use std::fmt::Write as _;

use castcost::expr::{BinOp, Builtin, Expr};
use castcost::rollup::BreakdownChild;
use castcost::{CostBreakdown, CostModel, PartSpec};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn rel_close(a: f64, b: f64, tol: f64) -> bool {
    if a == b {
        return true;
    }
    (a - b).abs() <= tol * a.abs().max(b.abs())
}

// ---------------------------------------------------------------- exprs

const VARS: [&str; 6] = ["a", "b", "rate_h", "x1", "cycle_s", "n_cores"];

fn random_number(rng: &mut impl Rng) -> f64 {
    match rng.gen_range(0..5) {
        0 => rng.gen_range(0..100) as f64,
        1 => rng.gen_range(0..10_000) as f64 / 100.0,
        2 => rng.gen::<f64>() * 1e6,
        3 => rng.gen::<f64>() * 1e-4,
        _ => rng.gen::<f64>(),
    }
}

/// A random well-formed AST; literals are non-negative, as the parser
/// produces them.
pub fn random_expr(rng: &mut impl Rng, depth: u32) -> Expr {
    let leaf = depth == 0 || rng.gen_bool(0.3);
    if leaf {
        return if rng.gen_bool(0.5) {
            Expr::Num(random_number(rng))
        } else {
            Expr::Var(VARS.choose(rng).unwrap().to_string())
        };
    }
    match rng.gen_range(0..8) {
        0 => Expr::Neg(Box::new(random_expr(rng, depth - 1))),
        1 => {
            let f = *Builtin::ALL.choose(rng).unwrap();
            let args = (0..f.arity())
                .map(|_| random_expr(rng, depth - 1))
                .collect();
            Expr::Call(f, args)
        }
        _ => {
            let op = *[BinOp::Add, BinOp::Sub, BinOp::Mul, BinOp::Div]
                .choose(rng)
                .unwrap();
            Expr::Binary(
                op,
                Box::new(random_expr(rng, depth - 1)),
                Box::new(random_expr(rng, depth - 1)),
            )
        }
    }
}

const FUZZ_ALPHABET: &[u8] = b"0123456789.eE+-*/(),_ abcxyzminaxceilfloorabs\t\n#\"[]{};=";

/// Arbitrary bytes, biased toward the expression alphabet.
pub fn fuzz_bytes(rng: &mut impl Rng) -> Vec<u8> {
    let len = rng.gen_range(0..48);
    (0..len)
        .map(|_| {
            if rng.gen_bool(0.8) {
                *FUZZ_ALPHABET.choose(rng).unwrap()
            } else {
                rng.gen()
            }
        })
        .collect()
}

// ---------------------------------------------------------------- models

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Kind {
    Money,
    Quantity,
    PerCycle,
    Scrap,
}

/// One parameter name with its definitions at each scope. The global
/// definition always exists so every model resolves.
#[derive(Debug, Clone)]
pub struct Def {
    pub name: String,
    pub kind: Kind,
    pub global: f64,
    pub process: Option<f64>,
    pub material: Option<f64>,
    /// Operation index to feature-scope value.
    pub feature: BTreeMap<usize, f64>,
    pub part: Option<f64>,
}

#[derive(Debug, Clone)]
pub enum Term {
    Lit(f64),
    Name(String),
    Scaled(String, f64),
}

impl Term {
    fn text(&self) -> String {
        match self {
            Term::Lit(v) => format!("{v}"),
            Term::Name(n) => n.clone(),
            Term::Scaled(n, k) => format!("\"{n} * {k}\""),
        }
    }
}

#[derive(Debug, Clone)]
pub enum Source {
    Purchased(Term),
    Produced(usize),
}

#[derive(Debug, Clone)]
pub struct RComponent {
    pub qty: Term,
    pub source: Source,
    pub material_yield: f64,
}

#[derive(Debug, Clone)]
pub struct ROperation {
    pub cycle_s: Term,
    pub per_cycle: Term,
    pub machine: Term,
    pub labor: Term,
    pub crew: Term,
    pub scrap: Term,
    pub consumables: Term,
}

/// `driver * money`, in the part context.
#[derive(Debug, Clone)]
pub struct REntity {
    pub driver: String,
    pub money: String,
}

#[derive(Debug, Clone)]
pub struct RAssembly {
    pub components: Vec<usize>,
    pub entities: Vec<usize>,
    pub operations: Vec<usize>,
}

#[derive(Debug, Clone)]
pub struct RandomModel {
    pub defs: Vec<Def>,
    pub components: Vec<RComponent>,
    pub operations: Vec<ROperation>,
    pub entities: Vec<REntity>,
    pub assemblies: Vec<RAssembly>,
}

fn value_for(kind: Kind, rng: &mut impl Rng) -> f64 {
    match kind {
        Kind::Money => rng.gen_range(0.0..200.0),
        Kind::Quantity => rng.gen_range(0.1..10.0),
        Kind::PerCycle => rng.gen_range(1.0..8.0),
        Kind::Scrap => rng.gen_range(0.0..0.3),
    }
}

impl RandomModel {
    /// Up to 3 assemblies, each with at most 3 components and 3 operations.
    #[allow(clippy::needless_range_loop)]
    pub fn generate(rng: &mut impl Rng) -> RandomModel {
        let n_asm = rng.gen_range(1..=3);
        let max_ops = n_asm * 3;
        let mut defs = Vec::new();
        for (prefix, kind, count) in [
            ("m", Kind::Money, 3),
            ("q", Kind::Quantity, 3),
            ("n", Kind::PerCycle, 1),
            ("s", Kind::Scrap, 2),
        ] {
            for i in 0..count {
                let mut feature = BTreeMap::new();
                for op in 0..max_ops {
                    if rng.gen_bool(0.2) {
                        feature.insert(op, value_for(kind, rng));
                    }
                }
                defs.push(Def {
                    name: format!("{prefix}{i}"),
                    kind,
                    global: value_for(kind, rng),
                    process: rng.gen_bool(0.3).then(|| value_for(kind, rng)),
                    material: rng.gen_bool(0.3).then(|| value_for(kind, rng)),
                    feature,
                    part: rng.gen_bool(0.2).then(|| value_for(kind, rng)),
                });
            }
        }
        let names = |kind: Kind| -> Vec<String> {
            defs.iter()
                .filter(|d| d.kind == kind)
                .map(|d| d.name.clone())
                .collect()
        };
        let money = names(Kind::Money);
        let qty = names(Kind::Quantity);
        let per_cycle = names(Kind::PerCycle);
        let scrap = names(Kind::Scrap);

        fn term(
            rng: &mut impl Rng,
            pool: &[String],
            lit: impl FnOnce(&mut dyn rand::RngCore) -> f64,
        ) -> Term {
            match rng.gen_range(0..3) {
                0 => Term::Lit(lit(rng)),
                1 => Term::Name(pool.choose(rng).unwrap().clone()),
                _ => Term::Scaled(
                    pool.choose(rng).unwrap().clone(),
                    rng.gen_range(1..=4) as f64 * 0.5,
                ),
            }
        }

        let mut assemblies: Vec<RAssembly> = (0..n_asm)
            .map(|_| RAssembly {
                components: Vec::new(),
                entities: Vec::new(),
                operations: Vec::new(),
            })
            .collect();
        let mut components = Vec::new();
        let mut operations = Vec::new();
        let mut entities = Vec::new();

        // every sub-assembly is used by an earlier one
        for j in 1..n_asm {
            let i = rng.gen_range(0..j);
            if assemblies[i].components.len() < 3 {
                assemblies[i].components.push(components.len());
            } else {
                assemblies[0].components.push(components.len());
            }
            components.push(RComponent {
                qty: term(rng, &qty, |r| r.gen_range(0.1..4.0)),
                source: Source::Produced(j),
                material_yield: if rng.gen_bool(0.5) {
                    1.0
                } else {
                    rng.gen_range(0.5..1.0)
                },
            });
        }
        for a in 0..n_asm {
            let n_comp = rng.gen_range(0..=3 - assemblies[a].components.len().min(3));
            for _ in 0..n_comp {
                let source = if a + 1 < n_asm && rng.gen_bool(0.2) {
                    Source::Produced(rng.gen_range(a + 1..n_asm))
                } else {
                    Source::Purchased(term(rng, &money, |r| r.gen_range(0.0..50.0)))
                };
                assemblies[a].components.push(components.len());
                components.push(RComponent {
                    qty: term(rng, &qty, |r| r.gen_range(0.1..4.0)),
                    source,
                    material_yield: if rng.gen_bool(0.5) {
                        1.0
                    } else {
                        rng.gen_range(0.5..1.0)
                    },
                });
            }
            if rng.gen_bool(0.3) {
                assemblies[a].entities.push(entities.len());
                entities.push(REntity {
                    driver: qty.choose(rng).unwrap().clone(),
                    money: money.choose(rng).unwrap().clone(),
                });
            }
            let min_ops = usize::from(assemblies[a].components.is_empty());
            for _ in 0..rng.gen_range(min_ops..=3) {
                assemblies[a].operations.push(operations.len());
                operations.push(ROperation {
                    cycle_s: term(rng, &qty, |r| r.gen_range(0.0..600.0)),
                    per_cycle: term(rng, &per_cycle, |r| r.gen_range(1.0..6.0)),
                    machine: term(rng, &money, |r| r.gen_range(0.0..150.0)),
                    labor: term(rng, &money, |r| r.gen_range(0.0..60.0)),
                    crew: term(rng, &qty, |r| r.gen_range(0.0..3.0)),
                    scrap: term(rng, &scrap, |r| {
                        if r.gen_bool(0.3) {
                            0.0
                        } else {
                            r.gen_range(0.0..0.25)
                        }
                    }),
                    consumables: term(rng, &money, |r| r.gen_range(0.0..5.0)),
                });
            }
        }
        // scaled names must stay in range
        for op in &mut operations {
            if let Term::Scaled(n, _) = &op.per_cycle {
                op.per_cycle = Term::Name(n.clone());
            }
            if let Term::Scaled(n, _) = &op.scrap {
                op.scrap = Term::Name(n.clone());
            }
        }
        RandomModel {
            defs,
            components,
            operations,
            entities,
            assemblies,
        }
    }

    /// Every money value, in every scope and literal, times `lambda`.
    pub fn scaled(&self, lambda: f64) -> RandomModel {
        let mut out = self.clone();
        for d in out.defs.iter_mut().filter(|d| d.kind == Kind::Money) {
            d.global *= lambda;
            for v in [&mut d.process, &mut d.material, &mut d.part]
                .into_iter()
                .flatten()
            {
                *v *= lambda;
            }
            for v in d.feature.values_mut() {
                *v *= lambda;
            }
        }
        let scale = |t: &mut Term| {
            if let Term::Lit(v) = t {
                *v *= lambda;
            }
        };
        for c in &mut out.components {
            if let Source::Purchased(t) = &mut c.source {
                scale(t);
            }
        }
        for o in &mut out.operations {
            scale(&mut o.machine);
            scale(&mut o.labor);
            scale(&mut o.consumables);
        }
        out
    }

    /// The same structure with every money literal replaced by a money
    /// name, so that overriding all money names reprices everything.
    pub fn money_through_names(&self) -> RandomModel {
        let mut out = self.clone();
        let names = self.money_names();
        let mut k = 0;
        let mut swap = |t: &mut Term| {
            if let Term::Lit(_) = t {
                *t = Term::Name(names[k % names.len()].clone());
                k += 1;
            }
        };
        for c in &mut out.components {
            if let Source::Purchased(t) = &mut c.source {
                swap(t);
            }
        }
        for op in &mut out.operations {
            swap(&mut op.machine);
            swap(&mut op.labor);
            swap(&mut op.consumables);
        }
        out
    }

    pub fn money_names(&self) -> Vec<String> {
        self.defs
            .iter()
            .filter(|d| d.kind == Kind::Money)
            .map(|d| d.name.clone())
            .collect()
    }

    /// The model in the file format.
    pub fn to_text(&self) -> String {
        let mut s = String::from("model \"random\" {\n");
        for d in &self.defs {
            let _ = writeln!(s, "  param {} = {};", d.name, d.global);
        }
        let scope = |s: &mut String, kw: &str, id: &str, pick: &dyn Fn(&Def) -> Option<f64>| {
            let _ = writeln!(s, "  {kw} {id} {{");
            for d in &self.defs {
                if let Some(v) = pick(d) {
                    let _ = writeln!(s, "    param {} = {v};", d.name);
                }
            }
            s.push_str("  }\n");
        };
        scope(&mut s, "process", "proc", &|d| d.process);
        scope(&mut s, "material", "mat", &|d| d.material);
        for (i, e) in self.entities.iter().enumerate() {
            let _ = writeln!(
                s,
                "  entity e{i} {{ driver = {}; formula = \"{} * {}\"; category = tooling; }}",
                e.driver, e.driver, e.money
            );
        }
        for (i, c) in self.components.iter().enumerate() {
            let _ = writeln!(s, "  component c{i} {{");
            let _ = writeln!(s, "    quantity_per_output = {};", c.qty.text());
            match &c.source {
                Source::Purchased(t) => {
                    let _ = writeln!(s, "    kind = purchased;\n    unit_cost = {};", t.text());
                }
                Source::Produced(a) => {
                    let _ = writeln!(s, "    kind = produced;\n    sub_assembly = a{a};");
                }
            }
            let _ = writeln!(s, "    material_yield = {};\n  }}", c.material_yield);
        }
        for (i, o) in self.operations.iter().enumerate() {
            let _ = writeln!(s, "  operation o{i} {{");
            for (k, t) in [
                ("cycle_time_s", &o.cycle_s),
                ("parts_per_cycle", &o.per_cycle),
                ("machine_rate_per_h", &o.machine),
                ("labor_rate_per_h", &o.labor),
                ("crew_size", &o.crew),
                ("scrap_rate", &o.scrap),
                ("consumable_cost_per_part", &o.consumables),
            ] {
                let _ = writeln!(s, "    {k} = {};", t.text());
            }
            for d in &self.defs {
                if let Some(v) = d.feature.get(&i) {
                    let _ = writeln!(s, "    param {} = {v};", d.name);
                }
            }
            s.push_str("  }\n");
        }
        let list = |prefix: &str, ids: &[usize]| {
            ids.iter()
                .map(|i| format!("{prefix}{i}"))
                .collect::<Vec<_>>()
                .join(", ")
        };
        for (i, a) in self.assemblies.iter().enumerate() {
            let _ = writeln!(
                s,
                "  assembly a{i} {{ components = [{}]; entities = [{}]; operations = [{}]; }}",
                list("c", &a.components),
                list("e", &a.entities),
                list("o", &a.operations)
            );
        }
        s.push_str("  root = a0;\n}\n");
        s
    }

    pub fn model(&self) -> CostModel {
        let doc = castcost::parse_model(&self.to_text()).expect("generated model parses");
        let diags = doc.diagnostics();
        assert!(
            !doc.has_errors(),
            "generated model has errors: {diags:?}\n{}",
            self.to_text()
        );
        doc.model
    }

    pub fn part(&self) -> PartSpec {
        let mut part = PartSpec::new("proc", "mat");
        for d in &self.defs {
            if let Some(v) = d.part {
                part.params.insert(d.name.clone(), v);
            }
        }
        part
    }

    // ------------------------------------------------------------ oracle

    fn resolve(&self, name: &str, op: Option<usize>) -> f64 {
        let d = self
            .defs
            .iter()
            .find(|d| d.name == name)
            .expect("known name");
        d.part
            .or_else(|| op.and_then(|o| d.feature.get(&o).copied()))
            .or(d.material)
            .or(d.process)
            .unwrap_or(d.global)
    }

    fn term(&self, t: &Term, op: Option<usize>) -> f64 {
        match t {
            Term::Lit(v) => *v,
            Term::Name(n) => self.resolve(n, op),
            Term::Scaled(n, k) => self.resolve(n, op) * k,
        }
    }

    /// Cost per good unit of assembly `a`, straight from the definitions.
    pub fn oracle_assembly(&self, a: usize) -> f64 {
        let asm = &self.assemblies[a];
        let mut cost = 0.0;
        for &c in &asm.components {
            let comp = &self.components[c];
            let unit = match &comp.source {
                Source::Purchased(t) => self.term(t, None),
                Source::Produced(sub) => self.oracle_assembly(*sub),
            };
            cost += self.term(&comp.qty, None) * unit / comp.material_yield;
        }
        for &e in &asm.entities {
            let ent = &self.entities[e];
            cost += self.resolve(&ent.driver, None) * self.resolve(&ent.money, None);
        }
        for &o in &asm.operations {
            let op = &self.operations[o];
            let t = |x: &Term| self.term(x, Some(o));
            let conversion = t(&op.cycle_s) / 3600.0 / t(&op.per_cycle)
                * (t(&op.machine) + t(&op.labor) * t(&op.crew))
                + t(&op.consumables);
            cost = (cost + conversion) / (1.0 - t(&op.scrap));
        }
        cost
    }

    pub fn oracle_total(&self) -> f64 {
        self.oracle_assembly(0)
    }
}

// ---------------------------------------------------------------- checks

/// Subtotals equal the in-order sum of children bit for bit; category
/// totals add up to the subtotal within `1e-12` relative.
pub fn check_conservation(b: &CostBreakdown) -> Result<(), String> {
    let sum = b.children.iter().fold(0.0, |acc, c| acc + c.amount());
    if sum.to_bits() != b.subtotal.to_bits() {
        return Err(format!(
            "{}: subtotal {} != children {}",
            b.label, b.subtotal, sum
        ));
    }
    let cats: f64 = b.category_totals.values().sum();
    let scale = b
        .category_totals
        .values()
        .map(|v| v.abs())
        .sum::<f64>()
        .max(b.subtotal.abs());
    if (cats - b.subtotal).abs() > 1e-12 * scale {
        return Err(format!(
            "{}: categories {} != subtotal {}",
            b.label, cats, b.subtotal
        ));
    }
    for c in &b.children {
        if let BreakdownChild::Node(n) = c {
            check_conservation(n)?;
        }
    }
    Ok(())
}

/// The same checks on a serialized breakdown, exact in micro-units.
pub fn check_serialized_conservation(node: &serde_json::Value) -> Result<i128, String> {
    let micros = |v: &serde_json::Value| castcost::report::to_micros(v.as_f64().expect("number"));
    let mut sum = 0;
    for c in node["children"].as_array().expect("children") {
        sum += if c.get("children").is_some() {
            check_serialized_conservation(c)?
        } else {
            micros(&c["amount"])
        };
    }
    let label = node["label"].as_str().unwrap_or("?");
    if sum != micros(&node["subtotal"]) {
        return Err(format!(
            "{label}: serialized children {sum} != subtotal {}",
            node["subtotal"]
        ));
    }
    let cats: i128 = node["category_totals"]
        .as_object()
        .expect("categories")
        .values()
        .map(micros)
        .sum();
    if cats != sum {
        return Err(format!(
            "{label}: serialized categories {cats} != subtotal {sum}"
        ));
    }
    Ok(sum)
}

// ---------------------------------------------------------------- precedence

/// Scopes from lowest to highest precedence.
pub const SCOPES: [&str; 6] = [
    "global", "process", "material", "feature", "part", "scenario",
];

/// Defines `x` at the scopes selected by `mask` (bit i = `SCOPES[i]`)
/// with value `10 + i`, and resolves it from the operation's context.
/// Returns (expected, resolved).
pub fn precedence_case(mask: u8) -> (f64, castcost::Result<f64>) {
    use castcost::{ContextPath, ContextScope, Operation, ParamScope, Parameter};
    let value = |i: usize| 10.0 + i as f64;
    let scope_with = |i: usize| {
        let mut s = ParamScope::default();
        if mask & (1 << i) != 0 {
            s.push(Parameter::literal("x", value(i), None));
        }
        s
    };
    let mut model = CostModel::empty("precedence");
    model.globals = scope_with(0);
    model.processes.push(ContextScope {
        id: "proc".into(),
        params: scope_with(1),
    });
    model.materials.push(ContextScope {
        id: "mat".into(),
        params: scope_with(2),
    });
    model.operations.push(Operation {
        id: "op".into(),
        name: "op".into(),
        process: None,
        material: None,
        params: scope_with(3),
        cycle_time_s: Expr::Var("x".into()),
        parts_per_cycle: Expr::Num(1.0),
        machine_rate_per_h: Expr::Num(3600.0),
        labor_rate_per_h: Expr::Num(0.0),
        crew_size: Expr::Num(0.0),
        scrap_rate: Expr::Num(0.0),
        consumable_cost_per_part: Expr::Num(0.0),
        entity: None,
    });
    let mut part = BTreeMap::new();
    if mask & (1 << 4) != 0 {
        part.insert("x".to_string(), value(4));
    }
    let mut scenario = BTreeMap::new();
    if mask & (1 << 5) != 0 {
        scenario.insert("x".to_string(), value(5));
    }
    let highest = (0..6)
        .rev()
        .find(|i| mask & (1 << i) != 0)
        .expect("non-empty mask");
    let ctx = ContextPath::process("proc")
        .with_material("mat")
        .with_feature("op");
    let got = castcost::resolve_parameter(&model, "x", &ctx, &[&scenario, &part]);
    (value(highest), got)
}

// ---------------------------------------------------------------- digraphs

/// Brute-force cycle test: some node reaches itself by a walk of length
/// 1..=n, found by repeated boolean matrix products.
pub fn has_cycle(n: usize, edges: &[(usize, usize)]) -> bool {
    let mut adj = vec![vec![false; n]; n];
    for &(a, b) in edges {
        adj[a][b] = true;
    }
    let mut reach = adj.clone();
    for _ in 1..n {
        let mut next = reach.clone();
        for i in 0..n {
            for k in 0..n {
                if reach[i][k] {
                    for j in 0..n {
                        next[i][j] |= adj[k][j];
                    }
                }
            }
        }
        reach = next;
    }
    (0..n).any(|i| reach[i][i])
}

/// Assembly `g{i}` gets a produced component for each edge `i -> j`,
/// plus one purchased component so no assembly is empty.
pub fn digraph_model(n: usize, edges: &[(usize, usize)]) -> CostModel {
    use castcost::{Assembly, Component, ComponentSource, ContextScope};
    let mut model = CostModel::empty("graph");
    model.processes.push(ContextScope {
        id: "p".into(),
        params: Default::default(),
    });
    model.materials.push(ContextScope {
        id: "m".into(),
        params: Default::default(),
    });
    let component = |id: String, source| Component {
        name: id.clone(),
        id,
        source,
        quantity_per_output: Expr::Num(1.0),
        material_yield: Expr::Num(1.0),
        entity: None,
    };
    model.components.push(component(
        "raw".into(),
        ComponentSource::Purchased {
            unit_cost: Expr::Num(1.0),
        },
    ));
    let mut lists: Vec<Vec<String>> = vec![vec!["raw".into()]; n];
    for (k, (a, b)) in edges.iter().enumerate() {
        let id = format!("e{k}_{a}_{b}");
        model.components.push(component(
            id.clone(),
            ComponentSource::Produced {
                sub_assembly: format!("g{b}"),
            },
        ));
        lists[*a].push(id);
    }
    for (i, components) in lists.into_iter().enumerate() {
        model.assemblies.push(Assembly {
            id: format!("g{i}"),
            name: format!("g{i}"),
            output_name: String::new(),
            components,
            entities: Vec::new(),
            operations: Vec::new(),
        });
    }
    model.root_assembly = "g0".into();
    model
}
