//! Bottom-up cost rollup.
//!
//! Each assembly is priced once, after the assemblies its produced
//! components come from. Inside an assembly, component and entity lines
//! form the upstream cost; operations then add conversion cost in
//! declaration order and each operation's scrap rate inflates everything
//! accumulated so far (a part scrapped at a stage forfeits all value put
//! into it up to and including that stage).
//!
//! Produced components appear as nested nodes whose lines are rescaled to
//! the parent's output, so every amount in a breakdown is expressed per
//! good unit of the root assembly.

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{
    Assembly, Category, Component, ComponentSource, ContextPath, CostEntity, CostModel, Operation,
    PartSpec,
};
use crate::resolve::{entity_cost_in, Env, Overlays};
use crate::scenario::{apply_scenario, Scenario};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LineKind {
    Component,
    Entity,
    Operation,
    Scrap,
}

/// A priced leaf of a breakdown.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LineItem {
    pub source_id: String,
    pub label: String,
    pub kind: LineKind,
    pub category: Category,
    /// Currency per good unit of output.
    pub amount: f64,
    /// Driver quantity behind the amount.
    pub quantity: f64,
    pub context: ContextPath,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NodeKind {
    Assembly,
    Component,
}

#[derive(Debug, Clone, PartialEq)]
pub enum BreakdownChild {
    Node(CostBreakdown),
    Item(LineItem),
}

impl BreakdownChild {
    pub fn label(&self) -> &str {
        match self {
            BreakdownChild::Node(n) => &n.label,
            BreakdownChild::Item(i) => &i.label,
        }
    }

    pub fn amount(&self) -> f64 {
        match self {
            BreakdownChild::Node(n) => n.subtotal,
            BreakdownChild::Item(i) => i.amount,
        }
    }
}

/// Tree of priced lines mirroring the assembly structure.
#[derive(Debug, Clone, PartialEq)]
pub struct CostBreakdown {
    pub label: String,
    pub kind: NodeKind,
    /// Assembly this node expands.
    pub assembly: String,
    pub children: Vec<BreakdownChild>,
    /// Sum of the children, in order.
    pub subtotal: f64,
    pub category_totals: BTreeMap<Category, f64>,
    /// Product of 1 / (1 - scrap) over this assembly's operations.
    pub scrap_multiplier: f64,
}

impl CostBreakdown {
    fn new(
        label: String,
        kind: NodeKind,
        assembly: String,
        children: Vec<BreakdownChild>,
        scrap_multiplier: f64,
    ) -> Self {
        let subtotal = sum_children(&children);
        let category_totals = category_totals(&children);
        CostBreakdown {
            label,
            kind,
            assembly,
            children,
            subtotal,
            category_totals,
            scrap_multiplier,
        }
    }

    pub fn total(&self) -> f64 {
        self.subtotal
    }

    /// Depth-first search for a node with the given label.
    pub fn find(&self, label: &str) -> Option<&CostBreakdown> {
        if self.label == label {
            return Some(self);
        }
        self.children.iter().find_map(|c| match c {
            BreakdownChild::Node(n) => n.find(label),
            BreakdownChild::Item(_) => None,
        })
    }

    pub fn nodes(&self) -> impl Iterator<Item = &CostBreakdown> {
        self.children.iter().filter_map(|c| match c {
            BreakdownChild::Node(n) => Some(n),
            BreakdownChild::Item(_) => None,
        })
    }

    pub fn items(&self) -> impl Iterator<Item = &LineItem> {
        self.children.iter().filter_map(|c| match c {
            BreakdownChild::Item(i) => Some(i),
            BreakdownChild::Node(_) => None,
        })
    }

    /// Every leaf with the labels of the nodes above it.
    pub fn leaves(&self) -> Vec<(Vec<&str>, &LineItem)> {
        let mut out = Vec::new();
        self.collect_leaves(&mut vec![], &mut out);
        out
    }

    fn collect_leaves<'a>(
        &'a self,
        path: &mut Vec<&'a str>,
        out: &mut Vec<(Vec<&'a str>, &'a LineItem)>,
    ) {
        path.push(&self.label);
        for child in &self.children {
            match child {
                BreakdownChild::Node(n) => n.collect_leaves(path, out),
                BreakdownChild::Item(i) => out.push((path.clone(), i)),
            }
        }
        path.pop();
    }

    /// Copy with every amount multiplied by `factor`.
    fn scaled(&self, factor: f64, label: &str, kind: NodeKind) -> CostBreakdown {
        let children = self
            .children
            .iter()
            .map(|c| match c {
                BreakdownChild::Node(n) => BreakdownChild::Node(n.scaled(factor, &n.label, n.kind)),
                BreakdownChild::Item(i) => BreakdownChild::Item(LineItem {
                    amount: i.amount * factor,
                    quantity: i.quantity * factor,
                    ..i.clone()
                }),
            })
            .collect();
        CostBreakdown::new(
            label.to_string(),
            kind,
            self.assembly.clone(),
            children,
            self.scrap_multiplier,
        )
    }
}

pub(crate) fn sum_children(children: &[BreakdownChild]) -> f64 {
    children.iter().fold(0.0, |acc, c| acc + c.amount())
}

fn category_totals(children: &[BreakdownChild]) -> BTreeMap<Category, f64> {
    let mut out: BTreeMap<Category, f64> = BTreeMap::new();
    for child in children {
        match child {
            BreakdownChild::Item(i) => *out.entry(i.category).or_insert(0.0) += i.amount,
            BreakdownChild::Node(n) => {
                for (cat, v) in &n.category_totals {
                    *out.entry(*cat).or_insert(0.0) += v;
                }
            }
        }
    }
    out
}

/// Runs upstream cost through an ordered chain of (conversion cost, scrap
/// rate) stages. Returns the cost per good part and the cumulative
/// multiplier `Π 1/(1 - scrap)`.
pub fn apply_scrap_chain(stages: &[(f64, f64)], upstream_cost: f64) -> Result<(f64, f64)> {
    let mut cost = upstream_cost;
    let mut multiplier = 1.0;
    for &(conversion, scrap) in stages {
        check_scrap(scrap)?;
        cost = (cost + conversion) / (1.0 - scrap);
        multiplier /= 1.0 - scrap;
    }
    Ok((cost, multiplier))
}

fn check_scrap(scrap: f64) -> Result<()> {
    if (0.0..1.0).contains(&scrap) {
        Ok(())
    } else {
        Err(Error::ScrapRateOutOfRange { value: scrap })
    }
}

/// Prices one component. `sub_assembly_subtotal` is required for produced
/// components and ignored for purchased ones.
pub fn component_cost(
    model: &CostModel,
    component: &Component,
    context: &ContextPath,
    overlays: &Overlays<'_>,
    sub_assembly_subtotal: Option<f64>,
) -> Result<LineItem> {
    let env = Env::new(model, context, overlays)?;
    component_line(model, &env, component, sub_assembly_subtotal)
}

fn component_line(
    model: &CostModel,
    env: &Env<'_>,
    c: &Component,
    sub_subtotal: Option<f64>,
) -> Result<LineItem> {
    let quantity = env.eval(&c.quantity_per_output)?;
    let material_yield = env.eval(&c.material_yield)?;
    if !(material_yield > 0.0 && material_yield <= 1.0) {
        return Err(Error::YieldOutOfRange {
            component: c.id.clone(),
            value: material_yield,
        });
    }
    let unit = match (&c.source, sub_subtotal) {
        (ComponentSource::Purchased { unit_cost }, _) => env.eval(unit_cost)?,
        (ComponentSource::Produced { .. }, Some(s)) => s,
        (ComponentSource::Produced { sub_assembly }, None) => {
            return Err(Error::UnknownId {
                kind: "sub-assembly result",
                id: sub_assembly.clone(),
            })
        }
    };
    let (category, driver_qty) = classify(
        model,
        env,
        c.entity.as_deref(),
        Category::Material,
        quantity,
    )?;
    Ok(LineItem {
        source_id: c.id.clone(),
        label: c.id.clone(),
        kind: LineKind::Component,
        category,
        amount: quantity * unit / material_yield,
        quantity: driver_qty,
        context: env.context().clone(),
    })
}

/// Category and driver quantity, from the attached entity when present.
fn classify(
    model: &CostModel,
    env: &Env<'_>,
    entity: Option<&str>,
    default: Category,
    default_qty: f64,
) -> Result<(Category, f64)> {
    match entity {
        None => Ok((default, default_qty)),
        Some(id) => {
            let e = model.entity(id).ok_or_else(|| Error::UnknownId {
                kind: "entity",
                id: id.to_string(),
            })?;
            Ok((e.category, env.resolve(&e.driver)?))
        }
    }
}

/// Evaluated figures of one operation, before scrap.
#[derive(Debug, Clone, PartialEq)]
pub struct OperationFigures {
    pub line: LineItem,
    pub scrap_rate: f64,
}

/// Prices one operation per good part:
/// `(cycle_time_s / 3600) / parts_per_cycle × (machine_rate + labor_rate × crew) + consumables`.
/// Scrap is not applied here.
pub fn operation_cost(
    model: &CostModel,
    op: &Operation,
    context: &ContextPath,
    overlays: &Overlays<'_>,
) -> Result<OperationFigures> {
    let env = Env::new(model, context, overlays)?;
    operation_line(model, &env, op)
}

fn operation_line(model: &CostModel, env: &Env<'_>, op: &Operation) -> Result<OperationFigures> {
    let cycle_time_s = env.eval(&op.cycle_time_s)?;
    let parts_per_cycle = env.eval(&op.parts_per_cycle)?;
    if parts_per_cycle < 1.0 {
        return Err(Error::PartsPerCycleOutOfRange {
            operation: op.id.clone(),
            value: parts_per_cycle,
        });
    }
    let machine_rate = env.eval(&op.machine_rate_per_h)?;
    let labor_rate = env.eval(&op.labor_rate_per_h)?;
    let crew = env.eval(&op.crew_size)?;
    if crew < 0.0 {
        return Err(Error::NegativeCrewSize {
            operation: op.id.clone(),
            value: crew,
        });
    }
    let scrap_rate = env.eval(&op.scrap_rate)?;
    check_scrap(scrap_rate)?;
    let consumables = env.eval(&op.consumable_cost_per_part)?;

    let hours_per_part = cycle_time_s / 3600.0 / parts_per_cycle;
    let amount = hours_per_part * (machine_rate + labor_rate * crew) + consumables;
    let (category, quantity) = classify(
        model,
        env,
        op.entity.as_deref(),
        Category::Machine,
        cycle_time_s / parts_per_cycle,
    )?;
    Ok(OperationFigures {
        line: LineItem {
            source_id: op.id.clone(),
            label: op.id.clone(),
            kind: LineKind::Operation,
            category,
            amount,
            quantity,
            context: env.context().clone(),
        },
        scrap_rate,
    })
}

fn entity_line(env: &Env<'_>, e: &CostEntity) -> Result<LineItem> {
    let amount = entity_cost_in(env, e)?;
    Ok(LineItem {
        source_id: e.id.clone(),
        label: e.id.clone(),
        kind: LineKind::Entity,
        category: e.category,
        amount,
        quantity: env.resolve(&e.driver)?,
        context: env.context().clone(),
    })
}

/// Prices a part. The scenario, when given, is layered on top of the part.
pub fn compute_part_cost(
    model: &CostModel,
    part: &PartSpec,
    scenario: Option<&Scenario>,
) -> Result<CostBreakdown> {
    match scenario {
        Some(s) => compute_with_overlays(model, &apply_scenario(model, part, s)?, &[]),
        None => compute_with_overlays(model, part, &[]),
    }
}

/// Prices a part with extra overlay scopes placed between the part's
/// scenario layer and its own parameters (used for plant rate tables).
pub fn compute_with_overlays(
    model: &CostModel,
    part: &PartSpec,
    extra: &[&BTreeMap<String, f64>],
) -> Result<CostBreakdown> {
    if model.process(&part.process).is_none() {
        return Err(Error::UnknownId {
            kind: "process",
            id: part.process.clone(),
        });
    }
    if model.material(&part.material).is_none() {
        return Err(Error::UnknownId {
            kind: "material",
            id: part.material.clone(),
        });
    }
    let mut overlays: Vec<&BTreeMap<String, f64>> = Vec::with_capacity(extra.len() + 2);
    overlays.push(&part.overrides);
    overlays.extend_from_slice(extra);
    overlays.push(&part.params);

    let rollup = Rollup {
        model,
        part,
        overlays: &overlays,
    };
    let mut done = HashMap::new();
    let mut stack = Vec::new();
    rollup.assembly(&model.root_assembly, &mut done, &mut stack)?;
    Ok(done
        .remove(model.root_assembly.as_str())
        .expect("root priced"))
}

struct Rollup<'a> {
    model: &'a CostModel,
    part: &'a PartSpec,
    overlays: &'a Overlays<'a>,
}

impl<'a> Rollup<'a> {
    fn assembly(
        &self,
        id: &'a str,
        done: &mut HashMap<&'a str, CostBreakdown>,
        stack: &mut Vec<&'a str>,
    ) -> Result<()> {
        if done.contains_key(id) {
            return Ok(());
        }
        if let Some(pos) = stack.iter().position(|s| *s == id) {
            return Err(Error::AssemblyCycle(
                stack[pos..].iter().map(|s| s.to_string()).collect(),
            ));
        }
        let asm = self.model.assembly(id).ok_or_else(|| Error::UnknownId {
            kind: "assembly",
            id: id.to_string(),
        })?;
        stack.push(id);
        let node = self
            .price(asm, done, stack)
            .map_err(|e| e.at(format!("assembly {id}")));
        stack.pop();
        done.insert(id, node?);
        Ok(())
    }

    fn price(
        &self,
        asm: &'a Assembly,
        done: &mut HashMap<&'a str, CostBreakdown>,
        stack: &mut Vec<&'a str>,
    ) -> Result<CostBreakdown> {
        let model = self.model;
        let part_ctx = ContextPath::process(&self.part.process).with_material(&self.part.material);
        let env = Env::new(model, &part_ctx, self.overlays)?;
        let mut children = Vec::new();

        for cid in &asm.components {
            let c = model.component(cid).ok_or_else(|| Error::UnknownId {
                kind: "component",
                id: cid.clone(),
            })?;
            let child = match &c.source {
                ComponentSource::Purchased { .. } => {
                    let line = component_line(model, &env, c, None)
                        .map_err(|e| e.at(format!("component {cid}")))?;
                    BreakdownChild::Item(line)
                }
                ComponentSource::Produced { sub_assembly } => {
                    self.assembly(sub_assembly, done, stack)?;
                    let sub = &done[sub_assembly.as_str()];
                    // range checks only; the node carries the rescaled lines
                    component_line(model, &env, c, Some(sub.subtotal))
                        .map_err(|e| e.at(format!("component {cid}")))?;
                    let qty = env.eval(&c.quantity_per_output)?;
                    let yld = env.eval(&c.material_yield)?;
                    BreakdownChild::Node(sub.scaled(qty / yld, &c.id, NodeKind::Component))
                }
            };
            children.push(child);
        }
        for eid in &asm.entities {
            let e = model.entity(eid).ok_or_else(|| Error::UnknownId {
                kind: "entity",
                id: eid.clone(),
            })?;
            let line = entity_line(&env, e).map_err(|err| err.at(format!("entity {eid}")))?;
            children.push(BreakdownChild::Item(line));
        }

        let mut accumulated = sum_children(&children);
        let mut multiplier = 1.0;
        for oid in &asm.operations {
            let op = model.operation(oid).ok_or_else(|| Error::UnknownId {
                kind: "operation",
                id: oid.clone(),
            })?;
            let ctx = op.context(&self.part.process, &self.part.material);
            let figures = Env::new(model, &ctx, self.overlays)
                .and_then(|env| operation_line(model, &env, op))
                .map_err(|e| e.at(format!("operation {oid}")))?;
            let base = accumulated + figures.line.amount;
            let s = figures.scrap_rate;
            let loss = base * s / (1.0 - s);
            accumulated = base / (1.0 - s);
            multiplier /= 1.0 - s;
            let scrap = LineItem {
                source_id: op.id.clone(),
                label: format!("scrap:{}", op.id),
                kind: LineKind::Scrap,
                category: Category::Scrap,
                amount: loss,
                quantity: s,
                context: ctx,
            };
            children.push(BreakdownChild::Item(figures.line));
            children.push(BreakdownChild::Item(scrap));
        }
        Ok(CostBreakdown::new(
            asm.id.clone(),
            NodeKind::Assembly,
            asm.id.clone(),
            children,
            multiplier,
        ))
    }
}
