//! Cost-entity modeling engine for sand-cast parts.
//!
//! A [`CostModel`] describes processes, materials, cost entities and an
//! assembly tree. Parameters resolve through a context path from the
//! operation outward to the globals, and [`compute_part_cost`] rolls the
//! tree up into a [`CostBreakdown`] per good part.

pub mod document;
pub mod error;
pub mod expr;
pub mod indicators;
pub mod model;
pub mod reference;
pub mod report;
pub mod resolve;
pub mod rollup;
pub mod scenario;
pub mod validate;

pub use document::{
    parse_model, print_model, DocDiagnostic, ModelDocument, ModelSyntaxError, Span,
};
pub use error::{Error, Result};
pub use expr::{eval_expr, format_expr, free_variables, parse_expr, EvalError, Expr, SyntaxError};
pub use indicators::{amortize_series, budget_overrun_indicator, target_indicator, Indicators};
pub use model::{
    Assembly, Category, Component, ComponentKind, ComponentSource, ContextPath, ContextScope,
    CostEntity, CostModel, InputDecl, Operation, ParamScope, ParamValue, Parameter, PartSpec,
    SeriesSpec,
};
pub use reference::{
    build_reference_model, model_levers, reference_levers, Lever, LeverKind, ReferenceBundle,
};
pub use report::{
    bench_report, compute_report, emit_breakdown, sweep_report, whatif_report, BenchRequest,
    ComputeReport, ComputeRequest, Format, SweepRequest, WhatIfRequest,
};
pub use resolve::{entity_cost, resolve_parameter, MAX_REFERENCE_DEPTH};
pub use rollup::{
    apply_scrap_chain, component_cost, compute_part_cost, compute_with_overlays, operation_cost,
    BreakdownChild, CostBreakdown, LineItem, LineKind, NodeKind,
};
pub use scenario::{
    apply_scenario, benchmark_compare, diff_breakdowns, sweep, BenchFailure, BenchRow,
    BenchmarkReport, DeltaTree, RateTable, Scenario, SweepRow,
};
pub use validate::{has_errors, validate_model, Diagnostic, ItemKind, Location, Severity};
