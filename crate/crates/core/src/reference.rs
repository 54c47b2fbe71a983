//! The bundled sand-casting reference model and its design levers.

use serde::{Deserialize, Serialize};

use crate::document::parse_model;
use crate::model::{CostModel, PartSpec, SeriesSpec};

pub const MODEL_TEXT: &str = include_str!("../fixtures/reference.cmdl");
pub const PART_JSON: &str = include_str!("../fixtures/reference.part.json");
pub const TARGETS_JSON: &str = include_str!("../fixtures/reference.targets.json");
/// Total produced by the flat recomputation kept with the tests.
pub const ORACLE_JSON: &str = include_str!("../fixtures/reference.oracle.json");

#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceBundle {
    pub model: CostModel,
    pub part: PartSpec,
    pub series: SeriesSpec,
    pub target: f64,
    pub oracle_total: f64,
}

#[derive(Deserialize)]
struct Targets {
    series: SeriesSpec,
    target: f64,
}

#[derive(Deserialize)]
struct Oracle {
    total: f64,
}

pub fn build_reference_model() -> ReferenceBundle {
    let doc = parse_model(MODEL_TEXT).expect("bundled model parses");
    let targets: Targets = serde_json::from_str(TARGETS_JSON).expect("bundled targets");
    let oracle: Oracle = serde_json::from_str(ORACLE_JSON).expect("bundled oracle");
    ReferenceBundle {
        model: doc.model,
        part: serde_json::from_str(PART_JSON).expect("bundled part"),
        series: targets.series,
        target: targets.target,
        oracle_total: oracle.total,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LeverKind {
    /// A parameter overridden with a number.
    Numeric,
    /// The part's material, picked from `options`.
    Choice,
}

/// A design or process parameter the designer may vary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Lever {
    pub name: String,
    pub description: String,
    pub kind: LeverKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub min: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub step: Option<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub options: Vec<String>,
}

/// Name of the material-choice lever.
pub const ALLOY_LEVER: &str = "alloy_id";

fn numeric(name: &str, description: &str, min: f64, max: f64, step: Option<f64>) -> Lever {
    Lever {
        name: name.into(),
        description: description.into(),
        kind: LeverKind::Numeric,
        min: Some(min),
        max: Some(max),
        step,
        options: Vec::new(),
    }
}

pub fn reference_levers() -> Vec<Lever> {
    vec![
        numeric(
            "n_cores",
            "cores per part, set by the parting line choice",
            0.0,
            8.0,
            Some(1.0),
        ),
        numeric(
            "parts_per_mold",
            "parts cast together in one mold",
            1.0,
            12.0,
            Some(1.0),
        ),
        numeric(
            "quality_class",
            "expected quality, 1 to 3, driving casting scrap",
            1.0,
            3.0,
            Some(1.0),
        ),
        numeric("part_mass_kg", "good casting mass", 0.5, 250.0, None),
        numeric(
            "core_scrap_rate",
            "scrap rate of core blowing",
            0.0,
            0.3,
            None,
        ),
        numeric(
            "mold_scrap_rate",
            "scrap rate of mold making",
            0.0,
            0.3,
            None,
        ),
        numeric(
            "remoulage_scrap_rate",
            "scrap rate of mold closing",
            0.0,
            0.3,
            None,
        ),
        numeric(
            "casting_scrap_rate",
            "scrap rate at pouring, overriding the quality table",
            0.0,
            0.5,
            None,
        ),
        numeric(
            "finishing_scrap_rate",
            "scrap rate of finishing",
            0.0,
            0.3,
            None,
        ),
        Lever {
            name: ALLOY_LEVER.into(),
            description: "alloy poured, selecting the material context".into(),
            kind: LeverKind::Choice,
            min: None,
            max: None,
            step: None,
            options: vec!["steel_g20mn5".into(), "stainless_cf8m".into()],
        },
    ]
}

/// Levers for any model: the reference levers that resolve in it, then
/// its remaining declared inputs. The alloy choice lists the model's own
/// materials and is offered only when there is more than one.
pub fn model_levers(model: &CostModel) -> Vec<Lever> {
    let mut out = Vec::new();
    for mut lever in reference_levers() {
        match lever.kind {
            LeverKind::Numeric if model.defines_name(&lever.name) => out.push(lever),
            LeverKind::Choice if model.materials.len() > 1 => {
                lever.options = model.materials.iter().map(|m| m.id.clone()).collect();
                out.push(lever);
            }
            _ => {}
        }
    }
    for input in &model.inputs {
        if !out.iter().any(|l| l.name == input.name) {
            let unit = input
                .unit
                .as_deref()
                .map(|u| format!(" ({u})"))
                .unwrap_or_default();
            out.push(Lever {
                name: input.name.clone(),
                description: format!("part input{unit}"),
                kind: LeverKind::Numeric,
                min: Some(0.0),
                max: None,
                step: None,
                options: Vec::new(),
            });
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ContextPath;
    use crate::resolve::resolve_parameter;
    use crate::validate::validate_model;

    #[test]
    fn bundle_validates_clean() {
        let b = build_reference_model();
        assert_eq!(validate_model(&b.model), vec![]);
        assert_eq!(b.model.root_assembly, "piece_brute");
    }

    #[test]
    fn every_lever_resolves() {
        let b = build_reference_model();
        let ctx = ContextPath::process(&b.part.process).with_material(&b.part.material);
        for lever in reference_levers() {
            match lever.kind {
                LeverKind::Numeric => {
                    resolve_parameter(&b.model, &lever.name, &ctx, &[&b.part.params]).unwrap();
                }
                LeverKind::Choice => {
                    assert!(lever.options.iter().all(|m| b.model.material(m).is_some()));
                }
            }
        }
        let names: Vec<_> = reference_levers().into_iter().map(|l| l.name).collect();
        assert!(names.contains(&"parts_per_mold".to_string()));
        assert!(names.contains(&"n_cores".to_string()));
        let levers = model_levers(&b.model);
        assert_eq!(levers[..10], reference_levers()[..]);
        let extra: Vec<_> = levers[10..].iter().map(|l| l.name.as_str()).collect();
        assert_eq!(
            extra,
            [
                "box_length_mm",
                "box_width_mm",
                "box_height_mm",
                "core_volume_dm3"
            ]
        );
    }

    #[test]
    fn density_comes_from_the_material_scope() {
        let b = build_reference_model();
        let ctx = ContextPath::process("green_sand").with_material("steel_g20mn5");
        assert_eq!(
            resolve_parameter(&b.model, "density", &ctx, &[&b.part.params]),
            Ok(7.8)
        );
    }

    #[test]
    fn part_inputs_match_the_declared_inputs() {
        let b = build_reference_model();
        let declared: Vec<_> = b.model.inputs.iter().map(|i| i.name.as_str()).collect();
        let given: Vec<_> = b.part.params.keys().map(String::as_str).collect();
        let mut declared_sorted = declared.clone();
        declared_sorted.sort();
        assert_eq!(declared_sorted, given);
    }
}
