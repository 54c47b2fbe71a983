//! Serialized reports shared by the command line and the HTTP service.
//!
//! Amounts are rounded half-even to six decimals at serialization time
//! only. Leaves are rounded individually; node subtotals and category
//! totals are summed from the rounded leaves in integer micro-units, so
//! the serialized tree adds up exactly at the serialized precision. A
//! report's headline total is the engine total rounded once, so it may
//! differ from the root subtotal by a few micro-units.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::indicators::{amortize_series, budget_overrun_indicator, target_indicator, Indicators};
use crate::model::{Category, ContextPath, CostModel, PartSpec, SeriesSpec};
use crate::rollup::{compute_part_cost, BreakdownChild, CostBreakdown, LineKind, NodeKind};
use crate::scenario::{
    benchmark_compare, diff_breakdowns, sweep, BenchmarkReport, DeltaTree, RateTable, Scenario,
    SweepRow,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Json,
    Csv,
}

/// Decimal places kept in serialized amounts.
pub const AMOUNT_DECIMALS: usize = 6;

/// `x` in millionths, rounded half to even.
pub fn to_micros(x: f64) -> i128 {
    let text = format!("{:.*}", AMOUNT_DECIMALS, x);
    text.replace('.', "").parse().expect("finite amount")
}

fn from_micros(m: i128) -> f64 {
    // Decimal text keeps the conversion correctly rounded.
    format!("{m}e-{AMOUNT_DECIMALS}")
        .parse()
        .expect("valid decimal")
}

/// `x` rounded half-even to six decimals.
pub fn round_amount(x: f64) -> f64 {
    from_micros(to_micros(x))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeReport {
    pub label: String,
    pub kind: NodeKind,
    pub assembly: String,
    pub subtotal: f64,
    pub category_totals: BTreeMap<Category, f64>,
    pub scrap_multiplier: f64,
    pub children: Vec<ChildReport>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ChildReport {
    Node(NodeReport),
    Leaf(LeafReport),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LeafReport {
    pub label: String,
    pub kind: LineKind,
    pub source_id: String,
    pub category: Category,
    pub amount: f64,
    pub quantity: f64,
    pub context: ContextPath,
}

struct Rounded {
    subtotal: i128,
    categories: BTreeMap<Category, i128>,
}

fn node_report(b: &CostBreakdown) -> (NodeReport, Rounded) {
    let mut sums = Rounded {
        subtotal: 0,
        categories: BTreeMap::new(),
    };
    let mut children = Vec::with_capacity(b.children.len());
    for child in &b.children {
        match child {
            BreakdownChild::Node(n) => {
                let (report, r) = node_report(n);
                sums.subtotal += r.subtotal;
                for (cat, m) in r.categories {
                    *sums.categories.entry(cat).or_insert(0) += m;
                }
                children.push(ChildReport::Node(report));
            }
            BreakdownChild::Item(i) => {
                let m = to_micros(i.amount);
                sums.subtotal += m;
                *sums.categories.entry(i.category).or_insert(0) += m;
                children.push(ChildReport::Leaf(LeafReport {
                    label: i.label.clone(),
                    kind: i.kind,
                    source_id: i.source_id.clone(),
                    category: i.category,
                    amount: from_micros(m),
                    quantity: i.quantity,
                    context: i.context.clone(),
                }));
            }
        }
    }
    let report = NodeReport {
        label: b.label.clone(),
        kind: b.kind,
        assembly: b.assembly.clone(),
        subtotal: from_micros(sums.subtotal),
        category_totals: sums
            .categories
            .iter()
            .map(|(c, m)| (*c, from_micros(*m)))
            .collect(),
        scrap_multiplier: b.scrap_multiplier,
        children,
    };
    (report, sums)
}

/// The serializable, rounded form of a breakdown.
pub fn breakdown_report(b: &CostBreakdown) -> NodeReport {
    node_report(b).0
}

fn csv_bytes(b: &CostBreakdown) -> Vec<u8> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["path", "category", "amount"])
        .expect("in-memory write");
    for (path, item) in b.leaves() {
        let mut full = path.join("/");
        full.push('/');
        full.push_str(&item.label);
        let amount = format!(
            "{:.*}",
            AMOUNT_DECIMALS,
            from_micros(to_micros(item.amount))
        );
        w.write_record([full.as_str(), item.category.as_str(), amount.as_str()])
            .expect("in-memory write");
    }
    w.into_inner().expect("in-memory flush")
}

fn json_bytes<T: Serialize>(value: &T) -> Vec<u8> {
    let mut out = serde_json::to_vec_pretty(value).expect("serializable report");
    out.push(b'\n');
    out
}

pub fn emit_breakdown(b: &CostBreakdown, format: Format) -> Vec<u8> {
    match format {
        Format::Json => json_bytes(&breakdown_report(b)),
        Format::Csv => csv_bytes(b),
    }
}

/// Inputs of one costing run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComputeRequest {
    pub part: PartSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scenario: Option<Scenario>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub series: Option<SeriesSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub budget: Option<f64>,
}

impl ComputeRequest {
    pub fn new(part: PartSpec) -> Self {
        ComputeRequest {
            part,
            scenario: None,
            series: None,
            target: None,
            budget: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SeriesReport {
    pub quantity: u64,
    pub tooling_cost: f64,
    /// Direct cost plus the tooling share.
    pub cost_per_part: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComputeReport {
    pub model: String,
    pub breakdown: CostBreakdown,
    /// Direct cost per good part.
    pub total: f64,
    pub series: Option<SeriesReport>,
    pub indicators: Indicators,
}

#[derive(Serialize)]
struct ComputeJson<'a> {
    model: &'a str,
    total: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    series: Option<SeriesReport>,
    indicators: Indicators,
    breakdown: NodeReport,
}

impl ComputeReport {
    pub fn to_json(&self) -> Vec<u8> {
        let breakdown = breakdown_report(&self.breakdown);
        json_bytes(&ComputeJson {
            model: &self.model,
            // rounded once; the breakdown root adds up its rounded leaves
            total: round_amount(self.total),
            series: self.series.as_ref().map(|s| SeriesReport {
                cost_per_part: round_amount(s.cost_per_part),
                tooling_cost: round_amount(s.tooling_cost),
                ..*s
            }),
            indicators: self.indicators,
            breakdown,
        })
    }

    pub fn emit(&self, format: Format) -> Vec<u8> {
        match format {
            Format::Json => self.to_json(),
            Format::Csv => csv_bytes(&self.breakdown),
        }
    }
}

/// Prices the part and derives the series figures and indicators. The
/// target is compared with the amortized cost when a series is given,
/// and the budget with that cost times the series quantity.
pub fn compute_report(model: &CostModel, req: &ComputeRequest) -> Result<ComputeReport> {
    let breakdown = compute_part_cost(model, &req.part, req.scenario.as_ref())?;
    let total = breakdown.total();
    let series = req
        .series
        .as_ref()
        .map(|s| {
            amortize_series(total, s).map(|cost_per_part| SeriesReport {
                quantity: s.quantity,
                tooling_cost: s.tooling_cost,
                cost_per_part,
            })
        })
        .transpose()?;
    let (unit_cost, quantity) = match &series {
        Some(s) => (s.cost_per_part, s.quantity as f64),
        None => (total, 1.0),
    };
    let indicators = Indicators {
        cost_to_target_ratio: req
            .target
            .map(|t| target_indicator(unit_cost, t))
            .transpose()?,
        budget_overrun_ratio: req
            .budget
            .map(|b| budget_overrun_indicator(unit_cost * quantity, b))
            .transpose()?,
    };
    Ok(ComputeReport {
        model: model.id.clone(),
        breakdown,
        total,
        series,
        indicators,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WhatIfRequest {
    pub part: PartSpec,
    #[serde(default)]
    pub scenarios: Vec<Scenario>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DeltaReport {
    pub label: String,
    pub base_subtotal: f64,
    pub variant_subtotal: f64,
    pub delta: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub relative_delta: Option<f64>,
    pub children: Vec<DeltaReport>,
}

impl DeltaReport {
    fn from_tree(t: &DeltaTree) -> DeltaReport {
        DeltaReport {
            label: t.label.clone(),
            base_subtotal: round_amount(t.base_subtotal),
            variant_subtotal: round_amount(t.variant_subtotal),
            delta: round_amount(t.delta),
            relative_delta: t.relative_delta,
            children: t.children.iter().map(DeltaReport::from_tree).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScenarioDelta {
    pub scenario: String,
    pub label: String,
    pub total: f64,
    pub delta: DeltaReport,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WhatIfReport {
    pub model: String,
    pub base_total: f64,
    pub scenarios: Vec<ScenarioDelta>,
}

/// Diffs each scenario against the unmodified part, in the order given.
pub fn whatif_report(model: &CostModel, req: &WhatIfRequest) -> Result<WhatIfReport> {
    let base = compute_part_cost(model, &req.part, None)?;
    let mut scenarios = Vec::with_capacity(req.scenarios.len());
    for (i, s) in req.scenarios.iter().enumerate() {
        let name = if s.id.is_empty() {
            format!("scenario {i}")
        } else {
            s.id.clone()
        };
        let variant =
            compute_part_cost(model, &req.part, Some(s)).map_err(|e| e.at(name.clone()))?;
        let tree = diff_breakdowns(&base, &variant)?;
        scenarios.push(ScenarioDelta {
            scenario: s.id.clone(),
            label: s.label.clone(),
            total: round_amount(variant.total()),
            delta: DeltaReport::from_tree(&tree),
        });
    }
    Ok(WhatIfReport {
        model: model.id.clone(),
        base_total: round_amount(base.total()),
        scenarios,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRequest {
    pub part: PartSpec,
    pub lever: String,
    pub values: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepReport {
    pub model: String,
    pub lever: String,
    pub rows: Vec<SweepRow>,
}

pub fn sweep_report(model: &CostModel, req: &SweepRequest) -> Result<SweepReport> {
    let rows = sweep(model, &req.part, &req.lever, &req.values, req.target)?
        .into_iter()
        .map(|r| SweepRow {
            total: round_amount(r.total),
            ..r
        })
        .collect();
    Ok(SweepReport {
        model: model.id.clone(),
        lever: req.lever.clone(),
        rows,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchRequest {
    pub part: PartSpec,
    pub tables: Vec<RateTable>,
}

/// Benchmark with totals rounded for output; ranks come from the
/// unrounded totals.
pub fn bench_report(model: &CostModel, req: &BenchRequest) -> Result<BenchmarkReport> {
    let mut report = benchmark_compare(model, &req.part, &req.tables)?;
    for row in &mut report.rows {
        row.total = round_amount(row.total);
    }
    Ok(report)
}

/// Pretty JSON with a trailing newline, as every report is written.
pub fn to_json_bytes<T: Serialize>(value: &T) -> Vec<u8> {
    json_bytes(value)
}
