//! Parameter resolution through the context tree.
//!
//! Precedence, highest first: the caller's overlays (scenario, then part,
//! in the order given), then the feature scope, material, process and
//! finally the model's globals. Expression-valued parameters are evaluated
//! in the same environment they were found from.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::expr::{EvalError, Expr};
use crate::model::{ContextPath, CostEntity, CostModel, ParamScope, ParamValue};

/// Maximum chain of parameter-to-parameter references.
pub const MAX_REFERENCE_DEPTH: usize = 32;

/// Ordered overlay scopes, highest precedence first.
pub type Overlays<'a> = [&'a BTreeMap<String, f64>];

/// A resolution environment bound to one context path.
#[derive(Debug, Clone)]
pub struct Env<'a> {
    context: ContextPath,
    overlays: &'a Overlays<'a>,
    scopes: Vec<&'a ParamScope>,
}

impl<'a> Env<'a> {
    pub fn new(
        model: &'a CostModel,
        context: &ContextPath,
        overlays: &'a Overlays<'a>,
    ) -> Result<Self> {
        let mut scopes = Vec::with_capacity(4);
        if let Some(feature) = &context.feature {
            let op = model.operation(feature).ok_or_else(|| Error::UnknownId {
                kind: "feature",
                id: feature.clone(),
            })?;
            scopes.push(&op.params);
        }
        if let Some(material) = &context.material {
            let m = model.material(material).ok_or_else(|| Error::UnknownId {
                kind: "material",
                id: material.clone(),
            })?;
            scopes.push(&m.params);
        }
        let p = model
            .process(&context.process)
            .ok_or_else(|| Error::UnknownId {
                kind: "process",
                id: context.process.clone(),
            })?;
        scopes.push(&p.params);
        scopes.push(&model.globals);
        Ok(Env {
            context: context.clone(),
            overlays,
            scopes,
        })
    }

    pub fn context(&self) -> &ContextPath {
        &self.context
    }

    pub fn resolve(&self, name: &str) -> Result<f64> {
        self.resolve_in_chain(name, &mut Vec::new())
    }

    pub fn eval(&self, expr: &Expr) -> Result<f64> {
        let mut chain = Vec::new();
        expr.eval_with(&mut |n: &str| self.resolve_in_chain(n, &mut chain))
    }

    fn resolve_in_chain(&self, name: &str, chain: &mut Vec<String>) -> Result<f64> {
        for overlay in self.overlays {
            if let Some(&v) = overlay.get(name) {
                return finite(v);
            }
        }
        let Some(param) = self.scopes.iter().find_map(|s| s.get(name)) else {
            return Err(Error::UnresolvedParameter {
                name: name.to_string(),
                context: self.context.clone(),
            });
        };
        match &param.value {
            ParamValue::Literal(v) => finite(*v),
            ParamValue::Expr(expr) => {
                if chain.iter().any(|c| c == name) || chain.len() >= MAX_REFERENCE_DEPTH {
                    let mut cycle = chain.clone();
                    cycle.push(name.to_string());
                    return Err(Error::CyclicParameter { chain: cycle });
                }
                chain.push(name.to_string());
                let value = expr.eval_with(&mut |n: &str| self.resolve_in_chain(n, chain));
                chain.pop();
                value
            }
        }
    }
}

fn finite(v: f64) -> Result<f64> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(EvalError::NonFiniteResult.into())
    }
}

pub fn resolve_parameter(
    model: &CostModel,
    name: &str,
    context: &ContextPath,
    overlays: &Overlays<'_>,
) -> Result<f64> {
    Env::new(model, context, overlays)?.resolve(name)
}

/// Evaluates an entity's formula. Negative results are an error unless the
/// entity is marked as a credit.
pub fn entity_cost(
    model: &CostModel,
    entity: &CostEntity,
    context: &ContextPath,
    overlays: &Overlays<'_>,
) -> Result<f64> {
    let env = Env::new(model, context, overlays)?;
    entity_cost_in(&env, entity)
}

pub(crate) fn entity_cost_in(env: &Env<'_>, entity: &CostEntity) -> Result<f64> {
    let value = env.eval(&entity.formula)?;
    if value < 0.0 && !entity.credit {
        return Err(Error::NegativeCost {
            entity: entity.id.clone(),
            value,
        });
    }
    Ok(value)
}
