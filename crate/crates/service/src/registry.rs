//! Named model snapshots shared by all request handlers.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::{Arc, RwLock};

use castcost::{parse_model, DocDiagnostic, ModelDocument, ModelSyntaxError};
use serde::Serialize;
use thiserror::Error;

/// One registered model. Handlers hold the `Arc` for the whole request,
/// so a concurrent replacement never shows them a mix of two versions.
#[derive(Debug)]
pub struct ModelEntry {
    pub doc: ModelDocument,
    pub version: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ModelSummary {
    pub id: String,
    pub version: u64,
}

/// A models-directory file that could not be registered.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct LoadError {
    pub file: PathBuf,
    pub message: String,
}

#[derive(Debug, Error)]
pub enum RejectedModel {
    #[error("syntax error at {0}")]
    Syntax(#[from] ModelSyntaxError),
    #[error("model has {} error diagnostic(s)", .0.iter().filter(|d| d.is_error()).count())]
    Invalid(Vec<DocDiagnostic>),
}

/// Parses and validates model text; only models without errors pass.
pub fn check_model(text: &str) -> Result<ModelDocument, RejectedModel> {
    let doc = parse_model(text)?;
    if doc.has_errors() {
        return Err(RejectedModel::Invalid(doc.diagnostics()));
    }
    Ok(doc)
}

#[derive(Debug, Default)]
pub struct ModelRegistry {
    models: RwLock<BTreeMap<String, Arc<ModelEntry>>>,
    load_errors: Vec<LoadError>,
}

impl ModelRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    /// The current snapshot of `id`.
    pub fn get(&self, id: &str) -> Option<Arc<ModelEntry>> {
        self.models.read().expect("registry lock").get(id).cloned()
    }

    /// Registers or replaces `id`, returning the new version.
    pub fn insert(&self, id: &str, doc: ModelDocument) -> u64 {
        let mut models = self.models.write().expect("registry lock");
        let version = models.get(id).map_or(1, |e| e.version + 1);
        models.insert(id.to_string(), Arc::new(ModelEntry { doc, version }));
        version
    }

    pub fn list(&self) -> Vec<ModelSummary> {
        self.models
            .read()
            .expect("registry lock")
            .iter()
            .map(|(id, e)| ModelSummary {
                id: id.clone(),
                version: e.version,
            })
            .collect()
    }

    pub fn len(&self) -> usize {
        self.models.read().expect("registry lock").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn load_errors(&self) -> &[LoadError] {
        &self.load_errors
    }
}

/// Registers every `*.cmdl` file of `dir` under its file stem. Files that
/// cannot be read, parsed or validated are recorded, not registered.
pub fn load_models(dir: &Path) -> std::io::Result<ModelRegistry> {
    let mut files: Vec<PathBuf> = std::fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_file() && p.extension().is_some_and(|x| x == "cmdl"))
        .collect();
    files.sort();

    let mut registry = ModelRegistry::new();
    for file in files {
        let Some(id) = file.file_stem().and_then(|s| s.to_str()).map(str::to_owned) else {
            registry.load_errors.push(LoadError {
                message: "file name is not valid UTF-8".into(),
                file,
            });
            continue;
        };
        let outcome = std::fs::read_to_string(&file)
            .map_err(|e| e.to_string())
            .and_then(|text| check_model(&text).map_err(|e| describe(&e)));
        match outcome {
            Ok(doc) => {
                registry.insert(&id, doc);
            }
            Err(message) => registry.load_errors.push(LoadError { file, message }),
        }
    }
    Ok(registry)
}

fn describe(e: &RejectedModel) -> String {
    match e {
        RejectedModel::Syntax(s) => format!("syntax error at {s}"),
        RejectedModel::Invalid(diags) => diags
            .iter()
            .filter(|d| d.is_error())
            .map(ToString::to_string)
            .collect::<Vec<_>>()
            .join("; "),
    }
}
