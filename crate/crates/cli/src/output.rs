use std::fs;
use std::io::Write;
use std::path::Path;

use serde::Serialize;
use serde_json::Value;
use sha2::{Digest, Sha256};
use wanelab::bundle_models::{make_builtin_bundle, BuiltinBundle, BundleModel};

use crate::config::{ExperimentConfig, CONFIG_VERSION};
use crate::experiments::Outcome;

/// Builtin models covered by the definitions hash.
pub const HASHED_BUILTINS: [BuiltinBundle; 4] =
    [BuiltinBundle::FlatTorusBundle, BuiltinBundle::Hopf, BuiltinBundle::ChernTorus(1), BuiltinBundle::TrivialSu2];

/// SHA-256 of `blob <len>\0<content>`, hex encoded.
pub fn content_hash(content: &str) -> String {
    let mut h = Sha256::new();
    h.update(format!("blob {}\0", content.len()).as_bytes());
    h.update(content.as_bytes());
    hex::encode(h.finalize())
}

/// Hash of the builtin model descriptions, one per line.
pub fn builtin_models_hash() -> String {
    let text: Vec<String> = HASHED_BUILTINS.iter().map(|&b| make_builtin_bundle(b).describe()).collect();
    content_hash(&text.join("\n"))
}

#[derive(Serialize)]
struct Record<'a> {
    version: &'static str,
    experiment: &'a str,
    model: &'a str,
    model_description: String,
    builtin_models_hash: String,
    seed: u64,
    steps: usize,
    schedule: ScheduleRecord<'a>,
    tolerances: &'a std::collections::BTreeMap<String, f64>,
    verdict: String,
    key_metric: KeyMetric,
    columns: Vec<&'static str>,
    rows: Vec<Vec<Option<f64>>>,
    details: &'a Value,
}

#[derive(Serialize)]
struct ScheduleRecord<'a> {
    eps0: f64,
    ratio: f64,
    count: usize,
    eps: &'a [f64],
}

#[derive(Serialize)]
struct KeyMetric {
    name: &'static str,
    value: f64,
}

pub fn columns(out: &Outcome) -> Vec<&'static str> {
    let mut c = vec!["eps", "coupling_norm", "hh_ortho_residual"];
    c.extend(&out.extra_columns);
    c
}

fn table(out: &Outcome) -> Vec<Vec<Option<f64>>> {
    out.rows
        .iter()
        .map(|r| {
            let mut v = vec![Some(r.eps), r.coupling_norm, r.hh_ortho_residual];
            v.extend(r.extra.iter().map(|&x| Some(x)));
            v
        })
        .collect()
}

pub fn results_json(cfg: &ExperimentConfig, b: &BundleModel, eps: &[f64], out: &Outcome) -> String {
    let record = Record {
        version: CONFIG_VERSION,
        experiment: cfg.experiment.name(),
        model: &cfg.model,
        model_description: b.describe(),
        builtin_models_hash: builtin_models_hash(),
        seed: cfg.seed,
        steps: cfg.steps,
        schedule: ScheduleRecord { eps0: cfg.schedule.eps0, ratio: cfg.schedule.ratio, count: cfg.schedule.count, eps },
        tolerances: &cfg.tolerances,
        verdict: out.verdict.to_string(),
        key_metric: KeyMetric { name: out.key_metric, value: out.key_value },
        columns: columns(out),
        rows: table(out),
        details: &out.details,
    };
    let mut s = serde_json::to_string_pretty(&record).expect("record serialises");
    s.push('\n');
    s
}

/// Header row, then one row per entry; empty cells for columns that do not
/// apply.
pub fn results_csv(out: &Outcome) -> csv::Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(columns(out))?;
    for row in table(out) {
        w.write_record(row.iter().map(|c| c.map(|x| format!("{x:e}")).unwrap_or_default()))?;
    }
    let bytes = w.into_inner().map_err(|e| csv::Error::from(e.into_error()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

pub fn summary_line(cfg: &ExperimentConfig, out: &Outcome) -> String {
    format!(
        "experiment={} model={} verdict={} key_metric={:e}",
        cfg.experiment, cfg.model, out.verdict, out.key_value
    )
}

/// Writes through a temporary file in the same directory, then renames.
pub fn write_atomic(dir: &Path, name: &str, contents: &str) -> std::io::Result<()> {
    let tmp = dir.join(format!(".{name}.tmp"));
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(contents.as_bytes())?;
        f.sync_all()?;
    }
    fs::rename(&tmp, dir.join(name))
}
