//! Result manifest and the content-hash cache built on it.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{TaskError, TaskResult};

pub const MANIFEST_FILE: &str = "manifest.json";
pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

/// Hash of any serializable value through its canonical JSON form.
pub fn hash_of<T: Serialize>(value: &T) -> String {
    sha256_hex(&serde_json::to_vec(value).expect("serializable"))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TaskStatus {
    Done,
    Cached,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutputRecord {
    pub path: String,
    pub sha256: String,
    pub bytes: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskRecord {
    pub kind: String,
    pub key: String,
    pub status: TaskStatus,
    pub seconds: f64,
    pub outputs: Vec<OutputRecord>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultManifest {
    pub run_id: String,
    pub config_hash: String,
    pub tool_version: String,
    /// Keyed by task id, e.g. `quench/g0.31/dddu`.
    pub tasks: BTreeMap<String, TaskRecord>,
}

impl ResultManifest {
    pub fn new(config_hash: &str) -> Self {
        ResultManifest {
            run_id: config_hash[..16.min(config_hash.len())].to_owned(),
            config_hash: config_hash.to_owned(),
            tool_version: TOOL_VERSION.to_owned(),
            tasks: BTreeMap::new(),
        }
    }

    /// Loads the manifest in `dir`, or starts a fresh one.
    pub fn load_or_new(dir: &Path, config_hash: &str) -> Self {
        let mut m = std::fs::read_to_string(dir.join(MANIFEST_FILE))
            .ok()
            .and_then(|s| serde_json::from_str::<ResultManifest>(&s).ok())
            .unwrap_or_else(|| Self::new(config_hash));
        if m.config_hash != config_hash || m.tool_version != TOOL_VERSION {
            let tasks = std::mem::take(&mut m.tasks);
            m = Self::new(config_hash);
            // per-task keys still decide reuse, so records survive a config edit
            m.tasks = tasks;
        }
        m
    }

    pub fn save(&self, dir: &Path) -> TaskResult<()> {
        let path = dir.join(MANIFEST_FILE);
        std::fs::write(&path, crate::io::json_bytes(self)).map_err(|e| TaskError::io(path, e))
    }

    /// True when `id` was completed under `key` and its outputs are unchanged on disk.
    pub fn is_fresh(&self, dir: &Path, id: &str, key: &str) -> bool {
        let Some(r) = self.tasks.get(id) else { return false };
        r.key == key
            && r.status != TaskStatus::Failed
            && r.outputs.iter().all(|o| std::fs::read(dir.join(&o.path)).is_ok_and(|b| sha256_hex(&b) == o.sha256))
    }

    /// Output paths of every recorded task.
    pub fn all_outputs(&self) -> Vec<&str> {
        self.tasks.values().flat_map(|t| t.outputs.iter().map(|o| o.path.as_str())).collect()
    }
}

/// Files a task produced, by path relative to the output directory.
pub type Outputs = Vec<(String, Vec<u8>)>;

/// One unit of work. Tasks only read inputs from disk and return bytes.
pub struct Task<'a> {
    pub id: String,
    pub kind: &'static str,
    pub key: String,
    pub run: Box<dyn Fn() -> TaskResult<Outputs> + Send + Sync + 'a>,
}

impl<'a> Task<'a> {
    /// `key_material` is everything the outputs depend on.
    pub fn new<K: Serialize>(
        id: String,
        kind: &'static str,
        key_material: &K,
        run: impl Fn() -> TaskResult<Outputs> + Send + Sync + 'a,
    ) -> Self {
        let key = hash_of(&(TOOL_VERSION, kind, key_material));
        Task { id, kind, key, run: Box::new(run) }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct StageSummary {
    pub done: usize,
    pub cached: usize,
    pub failed: Vec<(String, String)>,
}

/// Runs `tasks` on the current rayon pool, writes outputs, and records them.
/// Fresh tasks are skipped unless `force`.
pub fn run_stage(dir: &Path, manifest: &mut ResultManifest, tasks: Vec<Task<'_>>, force: bool) -> TaskResult<StageSummary> {
    let mut summary = StageSummary::default();
    let (cached, pending): (Vec<_>, Vec<_>) =
        tasks.into_iter().partition(|t| !force && manifest.is_fresh(dir, &t.id, &t.key));
    for t in cached {
        if let Some(r) = manifest.tasks.get_mut(&t.id) {
            r.status = TaskStatus::Cached;
        }
        summary.cached += 1;
    }
    let results: Vec<(Task<'_>, f64, TaskResult<Outputs>)> = pending
        .into_par_iter()
        .map(|t| {
            let start = Instant::now();
            let r = (t.run)();
            let secs = start.elapsed().as_secs_f64();
            (t, secs, r)
        })
        .collect();
    for (t, secs, r) in results {
        let record = match r.and_then(|files| write_outputs(dir, files)) {
            Ok(outputs) => {
                summary.done += 1;
                // files the previous run of this task wrote but this one did not
                if let Some(old) = manifest.tasks.get(&t.id) {
                    for o in old.outputs.iter().filter(|o| !outputs.iter().any(|n| n.path == o.path)) {
                        let _ = std::fs::remove_file(dir.join(&o.path));
                    }
                }
                TaskRecord { kind: t.kind.into(), key: t.key, status: TaskStatus::Done, seconds: secs, outputs, error: None }
            }
            Err(e) => {
                summary.failed.push((t.id.clone(), e.to_string()));
                // earlier outputs of this task stay on disk and listed
                let outputs = manifest.tasks.get(&t.id).map(|r| r.outputs.clone()).unwrap_or_default();
                TaskRecord {
                    kind: t.kind.into(),
                    key: t.key,
                    status: TaskStatus::Failed,
                    seconds: secs,
                    outputs,
                    error: Some(e.to_string()),
                }
            }
        };
        manifest.tasks.insert(t.id, record);
    }
    manifest.save(dir)?;
    Ok(summary)
}

fn write_outputs(dir: &Path, files: Outputs) -> TaskResult<Vec<OutputRecord>> {
    let mut records = Vec::with_capacity(files.len());
    for (rel, bytes) in files {
        let path: PathBuf = dir.join(&rel);
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent).map_err(|e| TaskError::io(parent, e))?;
        }
        std::fs::write(&path, &bytes).map_err(|e| TaskError::io(&path, e))?;
        records.push(OutputRecord { path: rel, sha256: sha256_hex(&bytes), bytes: bytes.len() as u64 });
    }
    records.sort_by(|a, b| a.path.cmp(&b.path));
    Ok(records)
}

/// Hash of the files a downstream task reads; missing files are an error.
pub fn input_hashes(dir: &Path, paths: &[String]) -> TaskResult<Vec<(String, String)>> {
    paths
        .iter()
        .map(|p| {
            let full = dir.join(p);
            match std::fs::read(&full) {
                Ok(b) => Ok((p.clone(), sha256_hex(&b))),
                Err(e) if e.kind() == std::io::ErrorKind::NotFound => Err(TaskError::MissingInput(full)),
                Err(e) => Err(TaskError::io(full, e)),
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sha256_known_value() {
        assert_eq!(sha256_hex(b"abc"), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
    }

    #[test]
    fn stage_caches_and_detects_tampering() {
        let dir = tempfile::tempdir().unwrap();
        let mut m = ResultManifest::new("cafe");
        let make = || vec![Task::new("a".into(), "test", &1, || Ok(vec![("x/a.txt".into(), b"hello".to_vec())]))];
        assert_eq!(run_stage(dir.path(), &mut m, make(), false).unwrap().done, 1);
        assert_eq!(run_stage(dir.path(), &mut m, make(), false).unwrap().cached, 1);
        std::fs::write(dir.path().join("x/a.txt"), b"tampered").unwrap();
        assert_eq!(run_stage(dir.path(), &mut m, make(), false).unwrap().done, 1);
        assert_eq!(run_stage(dir.path(), &mut m, make(), true).unwrap().done, 1);
        let failing = vec![Task::new("b".into(), "test", &2, || Err(TaskError::Other("boom".into())))];
        let s = run_stage(dir.path(), &mut m, failing, false).unwrap();
        assert_eq!(s.failed.len(), 1);
        assert_eq!(m.tasks["b"].status, TaskStatus::Failed);
        assert_eq!(m.tasks["a"].outputs[0].path, "x/a.txt");
    }
}
