//! Running the real `castcost` binary, as a command and as a server.

#![allow(dead_code)]

use std::io::{BufRead, BufReader};
use std::path::{Path, PathBuf};
use std::process::{Child, Command, Output, Stdio};

pub const BIN: &str = env!("CARGO_BIN_EXE_castcost");

pub fn manifest_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
}

pub fn fixture(name: &str) -> PathBuf {
    manifest_dir().join("tests/fixtures").join(name)
}

pub fn reference_model() -> PathBuf {
    manifest_dir().join("../core/fixtures/reference.cmdl")
}

pub fn reference_part() -> PathBuf {
    manifest_dir().join("../core/fixtures/reference.part.json")
}

/// Path of a model named in the parity manifest.
pub fn named_model(name: &str) -> PathBuf {
    match name {
        "reference" => reference_model(),
        other => fixture(&format!("{other}.cmdl")),
    }
}

pub fn run(args: &[&str]) -> Output {
    Command::new(BIN)
        .args(args)
        .env_remove("COST_MODEL_PATH")
        .output()
        .expect("binary runs")
}

pub fn run_path(args: &[&str], model_path: &Path) -> Output {
    Command::new(BIN)
        .args(args)
        .env("COST_MODEL_PATH", model_path)
        .output()
        .expect("binary runs")
}

/// A `castcost serve` child process, killed on drop.
pub struct ServerProcess {
    child: Child,
    pub base: String,
}

impl ServerProcess {
    pub fn start(models: &Path, extra: &[&str]) -> ServerProcess {
        let mut child = Command::new(BIN)
            .args(["serve", "--port", "0", "--models"])
            .arg(models)
            .args(extra)
            .stderr(Stdio::piped())
            .stdout(Stdio::null())
            .spawn()
            .expect("server starts");
        let mut lines = BufReader::new(child.stderr.take().unwrap()).lines();
        let base = loop {
            let line = lines.next().expect("server announces its address").unwrap();
            if let Some(url) = line.split_whitespace().find(|w| w.starts_with("http://")) {
                break url.to_string();
            }
        };
        // keep draining so the child never blocks on a full pipe
        std::thread::spawn(move || for _ in lines {});
        ServerProcess { child, base }
    }

    pub fn post(&self, path: &str, body: &[u8]) -> (u16, Vec<u8>) {
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .http_status_as_error(false)
            .build()
            .into();
        let mut resp = agent
            .post(format!("{}{path}", self.base))
            .content_type("application/json")
            .send(body)
            .expect("request");
        let status = resp.status().as_u16();
        (status, resp.body_mut().read_to_vec().expect("body"))
    }

    pub fn get(&self, path: &str) -> (u16, Vec<u8>) {
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .http_status_as_error(false)
            .build()
            .into();
        let mut resp = agent
            .get(format!("{}{path}", self.base))
            .call()
            .expect("request");
        let status = resp.status().as_u16();
        (status, resp.body_mut().read_to_vec().expect("body"))
    }
}

impl Drop for ServerProcess {
    fn drop(&mut self) {
        let _ = self.child.kill();
        let _ = self.child.wait();
    }
}

/// A directory holding every model of the parity manifest.
pub fn models_dir() -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    std::fs::copy(reference_model(), dir.path().join("reference.cmdl")).unwrap();
    std::fs::copy(fixture("bracket.cmdl"), dir.path().join("bracket.cmdl")).unwrap();
    dir
}

/// One parity case: the CLI flags and the equivalent request body.
pub struct ParityCase {
    pub name: String,
    pub model: String,
    pub args: Vec<String>,
    pub body: serde_json::Value,
}

/// Reads the manifest, writing each case's part and scenario files to `dir`.
pub fn parity_cases(dir: &Path) -> Vec<ParityCase> {
    let text = std::fs::read_to_string(fixture("parity.json")).unwrap();
    let cases: Vec<serde_json::Value> = serde_json::from_str(&text).unwrap();
    cases
        .into_iter()
        .map(|c| {
            let name = c["name"].as_str().unwrap().to_string();
            let model = c["model"].as_str().unwrap().to_string();
            let part_file = dir.join(format!("{name}.part.json"));
            std::fs::write(&part_file, c["part"].to_string()).unwrap();
            let mut args: Vec<String> = vec![
                "compute".into(),
                "--model".into(),
                named_model(&model).display().to_string(),
                "--part".into(),
                part_file.display().to_string(),
            ];
            let mut body = serde_json::json!({ "part": c["part"] });
            if let Some(s) = c.get("scenario") {
                let f = dir.join(format!("{name}.scenario.json"));
                std::fs::write(&f, s.to_string()).unwrap();
                args.extend(["--scenario".into(), f.display().to_string()]);
                body["scenario"] = s.clone();
            }
            if let Some(s) = c.get("series") {
                args.extend([
                    "--series".into(),
                    format!("{}:{}", s["quantity"], s["tooling_cost"].as_f64().unwrap()),
                ]);
                body["series"] = s.clone();
            }
            for key in ["target", "budget"] {
                if let Some(v) = c.get(key) {
                    args.extend([format!("--{key}"), v.as_f64().unwrap().to_string()]);
                    body[key] = v.clone();
                }
            }
            ParityCase {
                name,
                model,
                args,
                body,
            }
        })
        .collect()
}
