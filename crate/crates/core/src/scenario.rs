//! What-if analysis: scenarios, breakdown diffs, lever sweeps and
//! cross-plant benchmarking.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::indicators::target_indicator;
use crate::model::{CostModel, PartSpec};
use crate::rollup::{compute_part_cost, compute_with_overlays, BreakdownChild, CostBreakdown};

/// A named set of top-precedence overrides, optionally switching the
/// part's material.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    #[serde(default)]
    pub id: String,
    #[serde(default)]
    pub label: String,
    #[serde(default)]
    pub overrides: BTreeMap<String, f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub material: Option<String>,
}

impl Scenario {
    pub fn new(id: impl Into<String>) -> Self {
        Scenario {
            id: id.into(),
            ..Default::default()
        }
    }

    pub fn with_override(mut self, name: impl Into<String>, value: f64) -> Self {
        self.overrides.insert(name.into(), value);
        self
    }
}

/// One plant's rates, cadences, yields and scrap rates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateTable {
    pub plant_id: String,
    #[serde(default)]
    pub overrides: BTreeMap<String, f64>,
}

fn check_overrides(
    model: &CostModel,
    part: &PartSpec,
    overrides: &BTreeMap<String, f64>,
) -> Result<()> {
    for (name, value) in overrides {
        if !model.defines_name(name) && !part.params.contains_key(name) {
            return Err(Error::UnknownOverride(name.clone()));
        }
        if !value.is_finite() {
            return Err(Error::NonFiniteOverride { name: name.clone() });
        }
    }
    Ok(())
}

/// Returns a copy of `part` with the scenario layered on top.
pub fn apply_scenario(model: &CostModel, part: &PartSpec, scenario: &Scenario) -> Result<PartSpec> {
    check_overrides(model, part, &scenario.overrides)?;
    let mut out = part.clone();
    if let Some(material) = &scenario.material {
        if model.material(material).is_none() {
            return Err(Error::UnknownId {
                kind: "material",
                id: material.clone(),
            });
        }
        out.material = material.clone();
    }
    out.overrides
        .extend(scenario.overrides.iter().map(|(k, v)| (k.clone(), *v)));
    Ok(out)
}

/// Per-node comparison of two breakdowns of the same shape.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DeltaTree {
    pub label: String,
    pub base_subtotal: f64,
    pub variant_subtotal: f64,
    pub delta: f64,
    /// `delta / base`, absent when the base is zero.
    pub relative_delta: Option<f64>,
    pub children: Vec<DeltaTree>,
}

impl DeltaTree {
    fn leaf(label: &str, base: f64, variant: f64) -> DeltaTree {
        let delta = variant - base;
        DeltaTree {
            label: label.to_string(),
            base_subtotal: base,
            variant_subtotal: variant,
            delta,
            relative_delta: (base != 0.0).then(|| delta / base),
            children: Vec::new(),
        }
    }

    /// All nodes in depth-first order.
    pub fn walk(&self) -> Vec<&DeltaTree> {
        let mut out = vec![self];
        for c in &self.children {
            out.extend(c.walk());
        }
        out
    }
}

pub fn diff_breakdowns(base: &CostBreakdown, variant: &CostBreakdown) -> Result<DeltaTree> {
    diff_nodes(base, variant, &mut Vec::new())
}

fn diff_nodes<'a>(
    base: &'a CostBreakdown,
    variant: &'a CostBreakdown,
    path: &mut Vec<&'a str>,
) -> Result<DeltaTree> {
    path.push(&base.label);
    let mismatch = |path: &Vec<&str>| Error::ShapeMismatch {
        path: path.join("/"),
    };
    if base.label != variant.label || base.children.len() != variant.children.len() {
        return Err(mismatch(path));
    }
    let mut children = Vec::with_capacity(base.children.len());
    for (b, v) in base.children.iter().zip(&variant.children) {
        let child = match (b, v) {
            (BreakdownChild::Node(bn), BreakdownChild::Node(vn)) => diff_nodes(bn, vn, path)?,
            (BreakdownChild::Item(bi), BreakdownChild::Item(vi)) if bi.label == vi.label => {
                DeltaTree::leaf(&bi.label, bi.amount, vi.amount)
            }
            _ => {
                path.push(b.label());
                return Err(mismatch(path));
            }
        };
        children.push(child);
    }
    path.pop();
    let mut node = DeltaTree::leaf(&base.label, base.subtotal, variant.subtotal);
    node.children = children;
    Ok(node)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub value: f64,
    pub total: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub target_ratio: Option<f64>,
}

/// Recomputes the part once per lever value. Rows come back in the order
/// given; the first failing row is reported with its index.
pub fn sweep(
    model: &CostModel,
    part: &PartSpec,
    lever: &str,
    values: &[f64],
    target: Option<f64>,
) -> Result<Vec<SweepRow>> {
    if !model.defines_name(lever) && !part.params.contains_key(lever) {
        return Err(Error::UnknownOverride(lever.to_string()));
    }
    if let Some(t) = target {
        target_indicator(0.0, t)?;
    }
    values
        .par_iter()
        .enumerate()
        .map(|(i, &value)| {
            let scenario = Scenario::new(format!("{lever}={value}")).with_override(lever, value);
            let total = compute_part_cost(model, part, Some(&scenario))
                .map_err(|e| e.at(format!("row {i}")))?
                .total();
            let target_ratio = target.map(|t| target_indicator(total, t)).transpose()?;
            Ok(SweepRow {
                value,
                total,
                target_ratio,
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchRow {
    pub plant_id: String,
    pub total: f64,
    /// Dense rank, 1 for the cheapest; equal totals share a rank.
    pub rank: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchFailure {
    pub plant_id: String,
    pub message: String,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct BenchmarkReport {
    pub rows: Vec<BenchRow>,
    pub errors: Vec<BenchFailure>,
}

/// Prices the part under each plant's rate table. A failing plant is
/// reported in `errors` without stopping the others.
pub fn benchmark_compare(
    model: &CostModel,
    part: &PartSpec,
    tables: &[RateTable],
) -> Result<BenchmarkReport> {
    if tables.is_empty() {
        return Err(Error::NoRateTables);
    }
    let results: Vec<(String, Result<f64>)> = tables
        .par_iter()
        .map(|t| {
            let total = check_overrides(model, part, &t.overrides)
                .and_then(|_| compute_with_overlays(model, part, &[&t.overrides]))
                .map(|b| b.total());
            (t.plant_id.clone(), total)
        })
        .collect();

    let mut report = BenchmarkReport::default();
    let mut priced = Vec::new();
    for (plant_id, r) in results {
        match r {
            Ok(total) => priced.push((plant_id, total)),
            Err(e) => report.errors.push(BenchFailure {
                plant_id,
                message: e.to_string(),
            }),
        }
    }
    priced.sort_by(|a, b| a.1.total_cmp(&b.1).then_with(|| a.0.cmp(&b.0)));
    let mut rank = 0;
    let mut last = None;
    for (plant_id, total) in priced {
        if last != Some(total) {
            rank += 1;
            last = Some(total);
        }
        report.rows.push(BenchRow {
            plant_id,
            total,
            rank,
        });
    }
    Ok(report)
}
