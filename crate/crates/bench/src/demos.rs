//! Demonstration persistence: one CSV per trajectory plus `manifest.json`.

use std::path::{Path, PathBuf};

use robust_policy::expert::{generate_demos, DemoSet, InitSampler};
use robust_policy::state_space::{LinearPolicy, Trajectory};
use robust_policy::Matrix64;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::{ExperimentConfig, Experiment};
use crate::error::{io_err, BenchError, ModuleContext, Result};
use crate::output::{csv_writer, finish_csv, fmt_f64, to_json_bytes, write_atomic};

pub const MANIFEST: &str = "manifest.json";

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub num_demos: usize,
    pub horizon: usize,
    pub n: usize,
    pub m: usize,
    pub seed: u64,
    pub sampler: String,
    pub radius_r: f64,
    /// SHA-256 of the generating gain: `m`, `n` as little-endian u64, then the
    /// row-major entries as little-endian f64.
    pub gain_sha256: String,
    pub files: Vec<String>,
}

pub fn gain_digest(k: &Matrix64) -> String {
    let mut h = Sha256::new();
    h.update((k.rows() as u64).to_le_bytes());
    h.update((k.cols() as u64).to_le_bytes());
    for v in k.as_slice() {
        h.update(v.to_le_bytes());
    }
    hex::encode(h.finalize())
}

fn header(n: usize, m: usize) -> Vec<String> {
    std::iter::once("t".to_string())
        .chain((0..n).map(|i| format!("x_{i}")))
        .chain((0..m).map(|j| format!("u_{j}")))
        .collect()
}

/// `T + 1` rows `t, x_t, u_t`; the final row leaves the input cells empty.
pub fn trajectory_csv(tr: &Trajectory<f64>) -> Vec<u8> {
    let n = tr.states[0].len();
    let m = tr.inputs.first().map_or(0, Vec::len);
    let mut w = csv_writer();
    w.write_record(header(n, m)).expect("in-memory");
    for (t, x) in tr.states.iter().enumerate() {
        let mut rec = vec![t.to_string()];
        rec.extend(x.iter().map(|v| fmt_f64(*v)));
        match tr.inputs.get(t) {
            Some(u) => rec.extend(u.iter().map(|v| fmt_f64(*v))),
            None => rec.extend(std::iter::repeat_n(String::new(), m)),
        }
        w.write_record(&rec).expect("in-memory");
    }
    finish_csv(w)
}

fn parse_trajectory(path: &Path, n: usize, m: usize, horizon: usize) -> Result<Trajectory<f64>> {
    let bad = |message: String| BenchError::Parse {
        path: path.to_path_buf(),
        message,
    };
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path)
        .map_err(|e| bad(e.to_string()))?;
    let hdr = rdr.headers().map_err(|e| bad(e.to_string()))?;
    if hdr.iter().map(str::to_string).collect::<Vec<_>>() != header(n, m) {
        return Err(bad(format!("unexpected header {:?}", hdr)));
    }
    let mut states = Vec::with_capacity(horizon + 1);
    let mut inputs = Vec::with_capacity(horizon);
    for (line, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| bad(e.to_string()))?;
        let num = |i: usize| -> Result<f64> {
            rec[i]
                .parse::<f64>()
                .map_err(|e| bad(format!("row {}: column {}: {e}", line + 1, i)))
        };
        states.push((1..=n).map(num).collect::<Result<Vec<_>>>()?);
        if line < horizon {
            inputs.push((n + 1..=n + m).map(num).collect::<Result<Vec<_>>>()?);
        }
    }
    if states.len() != horizon + 1 {
        return Err(bad(format!("expected {} rows, found {}", horizon + 1, states.len())));
    }
    Ok(Trajectory {
        perturbations: vec![vec![0.0; n]; horizon],
        states,
        inputs,
    })
}

/// Writes the demo files into `dir` and returns the manifest.
pub fn write_demos(dir: &Path, demos: &DemoSet<f64>, expert: &LinearPolicy<f64>) -> Result<Manifest> {
    let width = demos.len().saturating_sub(1).to_string().len().max(3);
    let mut files = Vec::with_capacity(demos.len());
    for (i, tr) in demos.trajectories.iter().enumerate() {
        let name = format!("demo_{i:0width$}.csv");
        write_atomic(&dir.join(&name), &trajectory_csv(tr))?;
        files.push(name);
    }
    let manifest = Manifest {
        num_demos: demos.len(),
        horizon: demos.horizon(),
        n: demos.n(),
        m: demos.m(),
        seed: demos.seed,
        sampler: demos.sampler.label().to_string(),
        radius_r: demos.radius_r,
        gain_sha256: gain_digest(expert.gain()),
        files,
    };
    write_atomic(&dir.join(MANIFEST), &to_json_bytes(&manifest))?;
    Ok(manifest)
}

/// Reads a demo directory, checking it against the expected generator gain.
pub fn read_demos(dir: &Path, sampler: InitSampler<f64>, expert: &LinearPolicy<f64>) -> Result<DemoSet<f64>> {
    let mpath = dir.join(MANIFEST);
    let text = std::fs::read_to_string(&mpath).map_err(io_err(&mpath))?;
    let manifest: Manifest = serde_json::from_str(&text).map_err(|e| BenchError::Parse {
        path: mpath.clone(),
        message: e.to_string(),
    })?;
    if manifest.gain_sha256 != gain_digest(expert.gain()) {
        return Err(BenchError::Config(format!(
            "{} was generated by a different expert gain",
            mpath.display()
        )));
    }
    if manifest.files.len() != manifest.num_demos {
        return Err(BenchError::Parse {
            path: mpath,
            message: "file list does not match num_demos".into(),
        });
    }
    let trajectories = manifest
        .files
        .iter()
        .map(|f| parse_trajectory(&dir.join(f), manifest.n, manifest.m, manifest.horizon))
        .collect::<Result<Vec<_>>>()?;
    DemoSet::from_trajectories(trajectories, manifest.radius_r, sampler, manifest.seed).module("expert")
}

/// Loads demos from `demos.path` when it holds a manifest, otherwise
/// generates them from the config.
pub fn obtain_demos(cfg: &ExperimentConfig, ex: &Experiment, expert: &LinearPolicy<f64>) -> Result<DemoSet<f64>> {
    if let Some(dir) = &cfg.demos.path {
        if dir.join(MANIFEST).exists() {
            return read_demos(dir, ex.sampler.clone(), expert);
        }
    }
    generate_demos(
        &ex.sys,
        expert,
        cfg.demos.num_demos,
        cfg.demos.horizon,
        ex.sampler.clone(),
        ex.demo_seed,
    )
    .module("expert")
}

pub fn demo_dir(cfg: &ExperimentConfig) -> PathBuf {
    cfg.demos.path.clone().unwrap_or_else(|| cfg.output_dir.join("demos"))
}
