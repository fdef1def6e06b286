//! Shared helpers for CLI integration tests: a temp workspace with a
//! fixture-backed config, and binary invocation with captured output.

use std::path::{Path, PathBuf};
use std::process::{Child, Command, Output};

use trellis_core::config::{BackendKind, EngineConfig};

pub fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/fixtures")
}

pub struct Workspace {
    pub dir: tempfile::TempDir,
    pub config_path: PathBuf,
    pub config: EngineConfig,
}

impl Workspace {
    /// Fixture-backed workspace: taxonomy from the shared fixtures,
    /// artifacts inside the temp dir, echo generator, scripted agents.
    pub fn new() -> Self {
        let dir = tempfile::tempdir().unwrap();
        let mut config = EngineConfig::default();
        config.paths.taxonomy = fixtures().join("taxonomy.json");
        config.paths.chunks = dir.path().join("artifacts/chunks.jsonl");
        config.paths.sparse_index = dir.path().join("artifacts/sparse.json");
        config.paths.dense_index = dir.path().join("artifacts/dense.json");
        config.paths.graph = dir.path().join("artifacts/graph.json");
        config.paths.triples = dir.path().join("artifacts/triples.jsonl");
        config.generation.roles.agent.kind = BackendKind::Scripted;
        config.generation.roles.agent.script = Some(fixtures().join("scripts/forge_agents.json"));
        let config_path = dir.path().join("trellis.json");
        let ws = Workspace {
            dir,
            config_path,
            config,
        };
        ws.write_config();
        ws
    }

    pub fn write_config(&self) {
        let json = serde_json::to_string_pretty(&self.config).unwrap();
        std::fs::write(&self.config_path, json).unwrap();
    }

    pub fn run(&self, args: &[&str]) -> Output {
        let mut all = vec!["--config", self.config_path.to_str().unwrap()];
        all.extend_from_slice(args);
        Command::new(env!("CARGO_BIN_EXE_trellis"))
            .args(&all)
            .current_dir(self.dir.path())
            .output()
            .expect("binary runs")
    }

    /// Run and require success, returning stdout.
    pub fn run_ok(&self, args: &[&str]) -> String {
        let out = self.run(args);
        assert!(
            out.status.success(),
            "command {args:?} failed\nstdout: {}\nstderr: {}",
            String::from_utf8_lossy(&out.stdout),
            String::from_utf8_lossy(&out.stderr)
        );
        String::from_utf8(out.stdout).unwrap()
    }

    /// Ingest the 20-doc fixture corpus and build all artifacts.
    pub fn ingest_and_index(&self) {
        self.run_ok(&["ingest", "--input", fixtures().join("corpus").to_str().unwrap()]);
        self.run_ok(&["index"]);
    }
}

/// Kills the child process on drop (used for `serve`).
pub struct ChildGuard(pub Child);

impl Drop for ChildGuard {
    fn drop(&mut self) {
        let _ = self.0.kill();
        let _ = self.0.wait();
    }
}

/// Spawn `trellis serve` on a free port and wait for readiness.
pub fn spawn_server(ws: &Workspace) -> (ChildGuard, String) {
    let port = {
        let listener = std::net::TcpListener::bind("127.0.0.1:0").unwrap();
        listener.local_addr().unwrap().port()
    };
    let child = Command::new(env!("CARGO_BIN_EXE_trellis"))
        .args([
            "--config",
            ws.config_path.to_str().unwrap(),
            "serve",
            "--port",
            &port.to_string(),
        ])
        .current_dir(ws.dir.path())
        .stdout(std::process::Stdio::piped())
        .stderr(std::process::Stdio::piped())
        .spawn()
        .expect("server spawns");
    let base = format!("http://127.0.0.1:{port}");
    let guard = ChildGuard(child);

    for _ in 0..100 {
        std::thread::sleep(std::time::Duration::from_millis(50));
        if ureq::get(&format!("{base}/healthz")).call().is_ok() {
            return (guard, base);
        }
    }
    panic!("server did not become ready on {base}");
}

pub fn exit_code(out: &Output) -> i32 {
    out.status.code().unwrap_or(-1)
}
