//! Series amortization and the two target-costing indicators.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::SeriesSpec;

/// Per-part cost once the series' lump-sum tooling is spread over it.
pub fn amortize_series(direct_cost_per_part: f64, series: &SeriesSpec) -> Result<f64> {
    if series.quantity < 1 {
        return Err(Error::InvalidSeries("quantity must be at least 1".into()));
    }
    if !(series.tooling_cost >= 0.0 && series.tooling_cost.is_finite()) {
        return Err(Error::InvalidSeries(
            "tooling cost must be a finite non-negative amount".into(),
        ));
    }
    Ok(direct_cost_per_part + series.tooling_cost / series.quantity as f64)
}

/// Actual cost over target cost.
pub fn target_indicator(actual_cost: f64, target_cost: f64) -> Result<f64> {
    // NaN fails too
    if target_cost.is_nan() || target_cost <= 0.0 {
        return Err(Error::NonPositiveTarget(target_cost));
    }
    Ok(actual_cost / target_cost)
}

/// Amount spent beyond the budget, as a fraction of the budget.
pub fn budget_overrun_indicator(actual_spend: f64, budget: f64) -> Result<f64> {
    if budget.is_nan() || budget <= 0.0 {
        return Err(Error::NonPositiveBudget(budget));
    }
    Ok((actual_spend - budget).max(0.0) / budget)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct Indicators {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cost_to_target_ratio: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub budget_overrun_ratio: Option<f64>,
}
