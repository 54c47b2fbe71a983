//! Cost model domain types.
//!
//! A [`CostModel`] is a declarative description of how a part is costed:
//! parameter scopes arranged as a context tree (process, material, feature),
//! cost entities, components, operations and the assemblies that combine
//! them bottom-up. Models are immutable once built and safe to share
//! between threads.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::expr::Expr;

/// Value of a declared parameter.
#[derive(Debug, Clone, PartialEq)]
pub enum ParamValue {
    Literal(f64),
    Expr(Expr),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Parameter {
    pub name: String,
    pub value: ParamValue,
    /// Free-form unit label such as `eur_per_h`, `s` or `kg`.
    pub unit: Option<String>,
}

impl Parameter {
    pub fn literal(name: impl Into<String>, value: f64, unit: Option<&str>) -> Parameter {
        Parameter {
            name: name.into(),
            value: ParamValue::Literal(value),
            unit: unit.map(str::to_string),
        }
    }

    pub fn expr(name: impl Into<String>, expr: Expr, unit: Option<&str>) -> Parameter {
        Parameter {
            name: name.into(),
            value: ParamValue::Expr(expr),
            unit: unit.map(str::to_string),
        }
    }
}

/// An ordered list of parameter definitions. Lookups return the first
/// definition; duplicates are reported by validation.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ParamScope {
    pub params: Vec<Parameter>,
}

impl ParamScope {
    pub fn new(params: Vec<Parameter>) -> Self {
        Self { params }
    }

    pub fn get(&self, name: &str) -> Option<&Parameter> {
        self.params.iter().find(|p| p.name == name)
    }

    pub fn contains(&self, name: &str) -> bool {
        self.get(name).is_some()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    pub fn push(&mut self, param: Parameter) {
        self.params.push(param);
    }
}

/// A process or material node of the context tree.
#[derive(Debug, Clone, PartialEq)]
pub struct ContextScope {
    pub id: String,
    pub params: ParamScope,
}

/// A node of the context tree: process, optionally narrowed to a material,
/// optionally narrowed further to a feature (an operation's own scope).
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct ContextPath {
    pub process: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub material: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub feature: Option<String>,
}

impl ContextPath {
    pub fn process(process: impl Into<String>) -> Self {
        Self {
            process: process.into(),
            material: None,
            feature: None,
        }
    }

    pub fn with_material(mut self, material: impl Into<String>) -> Self {
        self.material = Some(material.into());
        self
    }

    /// Panics if no material is set: a feature nests under a material.
    pub fn with_feature(mut self, feature: impl Into<String>) -> Self {
        assert!(
            self.material.is_some(),
            "feature context requires a material"
        );
        self.feature = Some(feature.into());
        self
    }
}

impl fmt::Display for ContextPath {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.process)?;
        if let Some(m) = &self.material {
            write!(f, "/{m}")?;
        }
        if let Some(feat) = &self.feature {
            write!(f, "/{feat}")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Category {
    Material,
    Labor,
    Machine,
    Consumable,
    Scrap,
    Tooling,
}

impl Category {
    pub const ALL: [Category; 6] = [
        Category::Material,
        Category::Labor,
        Category::Machine,
        Category::Consumable,
        Category::Scrap,
        Category::Tooling,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Category::Material => "material",
            Category::Labor => "labor",
            Category::Machine => "machine",
            Category::Consumable => "consumable",
            Category::Scrap => "scrap",
            Category::Tooling => "tooling",
        }
    }

    pub fn parse(s: &str) -> Option<Category> {
        Category::ALL.into_iter().find(|c| c.as_str() == s)
    }
}

impl fmt::Display for Category {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A grouping of costs tied to the resources one activity consumes,
/// scaled by a single driver.
#[derive(Debug, Clone, PartialEq)]
pub struct CostEntity {
    pub id: String,
    /// The one parameter that scales this entity's cost.
    pub driver: String,
    pub formula: Expr,
    pub category: Category,
    /// Marks an entity whose formula may legitimately go negative.
    pub credit: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ComponentKind {
    Purchased,
    Produced,
}

impl ComponentKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ComponentKind::Purchased => "purchased",
            ComponentKind::Produced => "produced",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ComponentSource {
    Purchased { unit_cost: Expr },
    Produced { sub_assembly: String },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Component {
    pub id: String,
    pub name: String,
    pub source: ComponentSource,
    /// Units of this component per unit of the parent's output.
    pub quantity_per_output: Expr,
    /// Fraction of the input that ends up in the output, in (0, 1].
    pub material_yield: Expr,
    /// Optional entity that classifies this line (category and driver).
    pub entity: Option<String>,
}

impl Component {
    pub fn kind(&self) -> ComponentKind {
        match self.source {
            ComponentSource::Purchased { .. } => ComponentKind::Purchased,
            ComponentSource::Produced { .. } => ComponentKind::Produced,
        }
    }

    pub fn sub_assembly(&self) -> Option<&str> {
        match &self.source {
            ComponentSource::Produced { sub_assembly } => Some(sub_assembly),
            ComponentSource::Purchased { .. } => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Operation {
    pub id: String,
    pub name: String,
    /// Process context; the part's process when absent.
    pub process: Option<String>,
    /// Material context; the part's material when absent.
    pub material: Option<String>,
    /// Feature scope: parameters owned by this operation.
    pub params: ParamScope,
    pub cycle_time_s: Expr,
    pub parts_per_cycle: Expr,
    pub machine_rate_per_h: Expr,
    pub labor_rate_per_h: Expr,
    pub crew_size: Expr,
    pub scrap_rate: Expr,
    pub consumable_cost_per_part: Expr,
    pub entity: Option<String>,
}

impl Operation {
    /// Field name and expression for each costed field, in declaration order.
    pub fn fields(&self) -> [(&'static str, &Expr); 7] {
        [
            ("cycle_time_s", &self.cycle_time_s),
            ("parts_per_cycle", &self.parts_per_cycle),
            ("machine_rate_per_h", &self.machine_rate_per_h),
            ("labor_rate_per_h", &self.labor_rate_per_h),
            ("crew_size", &self.crew_size),
            ("scrap_rate", &self.scrap_rate),
            ("consumable_cost_per_part", &self.consumable_cost_per_part),
        ]
    }

    /// Context this operation is evaluated in for a part made from
    /// `process` and `material`.
    pub fn context(&self, process: &str, material: &str) -> ContextPath {
        ContextPath {
            process: self.process.clone().unwrap_or_else(|| process.to_string()),
            material: Some(
                self.material
                    .clone()
                    .unwrap_or_else(|| material.to_string()),
            ),
            feature: Some(self.id.clone()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Assembly {
    pub id: String,
    pub name: String,
    pub output_name: String,
    pub components: Vec<String>,
    /// Standalone cost entities priced per unit of output.
    pub entities: Vec<String>,
    pub operations: Vec<String>,
}

/// A value the part spec must provide.
#[derive(Debug, Clone, PartialEq)]
pub struct InputDecl {
    pub name: String,
    pub unit: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CostModel {
    pub id: String,
    pub globals: ParamScope,
    pub inputs: Vec<InputDecl>,
    pub processes: Vec<ContextScope>,
    pub materials: Vec<ContextScope>,
    pub entities: Vec<CostEntity>,
    pub components: Vec<Component>,
    pub operations: Vec<Operation>,
    pub assemblies: Vec<Assembly>,
    pub root_assembly: String,
}

impl CostModel {
    pub fn empty(id: impl Into<String>) -> CostModel {
        CostModel {
            id: id.into(),
            globals: ParamScope::default(),
            inputs: Vec::new(),
            processes: Vec::new(),
            materials: Vec::new(),
            entities: Vec::new(),
            components: Vec::new(),
            operations: Vec::new(),
            assemblies: Vec::new(),
            root_assembly: String::new(),
        }
    }

    pub fn process(&self, id: &str) -> Option<&ContextScope> {
        self.processes.iter().find(|p| p.id == id)
    }

    pub fn material(&self, id: &str) -> Option<&ContextScope> {
        self.materials.iter().find(|m| m.id == id)
    }

    pub fn entity(&self, id: &str) -> Option<&CostEntity> {
        self.entities.iter().find(|e| e.id == id)
    }

    pub fn component(&self, id: &str) -> Option<&Component> {
        self.components.iter().find(|c| c.id == id)
    }

    pub fn operation(&self, id: &str) -> Option<&Operation> {
        self.operations.iter().find(|o| o.id == id)
    }

    pub fn assembly(&self, id: &str) -> Option<&Assembly> {
        self.assemblies.iter().find(|a| a.id == id)
    }

    pub fn input(&self, name: &str) -> Option<&InputDecl> {
        self.inputs.iter().find(|i| i.name == name)
    }

    /// True when `name` is a declared input or defined in any scope of the
    /// model.
    pub fn defines_name(&self, name: &str) -> bool {
        self.input(name).is_some()
            || self.globals.contains(name)
            || self.processes.iter().any(|p| p.params.contains(name))
            || self.materials.iter().any(|m| m.params.contains(name))
            || self.operations.iter().any(|o| o.params.contains(name))
    }
}

/// Designer inputs for one part: context selection plus part-level values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PartSpec {
    pub process: String,
    #[serde(alias = "alloy_id")]
    pub material: String,
    #[serde(default)]
    pub params: BTreeMap<String, f64>,
    /// Scenario scope layered on top by `apply_scenario`.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub overrides: BTreeMap<String, f64>,
}

impl PartSpec {
    pub fn new(process: impl Into<String>, material: impl Into<String>) -> Self {
        Self {
            process: process.into(),
            material: material.into(),
            params: BTreeMap::new(),
            overrides: BTreeMap::new(),
        }
    }

    pub fn with_param(mut self, name: impl Into<String>, value: f64) -> Self {
        self.params.insert(name.into(), value);
        self
    }
}

/// Batch quantity and the lump-sum tooling spent on it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeriesSpec {
    pub quantity: u64,
    pub tooling_cost: f64,
}
