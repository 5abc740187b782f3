//! Experiment configuration files.
//!
//! ```json
//! {
//!   "version": "wanelab/1",
//!   "experiment": "wane_group",
//!   "model": "flat_torus_bundle",
//!   "schedule": { "eps0": 1.0, "ratio": 0.5, "count": 13 },
//!   "steps": 1024,
//!   "seed": 7,
//!   "output_dir": "out/wane",
//!   "tolerances": { "identity": 1e-3 }
//! }
//! ```
//!
//! Only `version`, `experiment` and `model` are required. The same seed and
//! config always give the same results: every random draw comes from a
//! ChaCha8 stream seeded with `seed`.

use std::collections::BTreeMap;
use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use serde::Serialize;
use serde_json::Value;
use wanelab::bundle_models::bundle_by_name;
use wanelab::collapse_lab::CollapseSchedule;

pub const CONFIG_VERSION: &str = "wanelab/1";
pub const MAX_COUNT: usize = 24;
pub const MIN_STEPS: usize = 32;
pub const MAX_STEPS: usize = 1 << 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Experiment {
    CollapseLimit,
    ShrinkHolonomy,
    WaneGroup,
    Uniqueness,
    FiberGh,
    BergerProduct,
    ParamdepdGap,
}

impl Experiment {
    pub const ALL: [Experiment; 7] = [
        Experiment::CollapseLimit,
        Experiment::ShrinkHolonomy,
        Experiment::WaneGroup,
        Experiment::Uniqueness,
        Experiment::FiberGh,
        Experiment::BergerProduct,
        Experiment::ParamdepdGap,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Experiment::CollapseLimit => "collapse_limit",
            Experiment::ShrinkHolonomy => "shrink_holonomy",
            Experiment::WaneGroup => "wane_group",
            Experiment::Uniqueness => "uniqueness",
            Experiment::FiberGh => "fiber_gh",
            Experiment::BergerProduct => "berger_product",
            Experiment::ParamdepdGap => "paramdepd_gap",
        }
    }

    /// Verdict thresholds and their defaults.
    pub fn default_tolerances(self) -> &'static [(&'static str, f64)] {
        match self {
            Experiment::CollapseLimit => &[("slope_min", 0.8), ("slope_max", 1.2), ("hh_gap", 1e-4)],
            Experiment::ShrinkHolonomy => &[("final_distance", 0.05)],
            Experiment::WaneGroup => &[("identity", 1e-3), ("density", 0.15)],
            Experiment::Uniqueness => &[("final_spread", 0.05)],
            Experiment::FiberGh => &[("gh_bound", 0.15)],
            Experiment::BergerProduct => &[("gh_bound", 0.1)],
            Experiment::ParamdepdGap => &[("final_gap", 1e-2)],
        }
    }
}

impl fmt::Display for Experiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Experiment {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        Experiment::ALL.into_iter().find(|e| e.name() == s).ok_or_else(|| {
            let names: Vec<&str> = Experiment::ALL.iter().map(|e| e.name()).collect();
            format!("unknown experiment `{s}`; valid names are {}", names.join(", "))
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScheduleConfig {
    pub eps0: f64,
    pub ratio: f64,
    pub count: usize,
}

impl Default for ScheduleConfig {
    fn default() -> Self {
        ScheduleConfig { eps0: 1.0, ratio: 0.5, count: 13 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    pub model: String,
    pub schedule: ScheduleConfig,
    pub steps: usize,
    pub seed: u64,
    pub output_dir: PathBuf,
    /// Every threshold of the experiment, defaults filled in.
    pub tolerances: BTreeMap<String, f64>,
}

impl ExperimentConfig {
    pub fn tol(&self, key: &str) -> f64 {
        self.tolerances[key]
    }

    /// Checks the fields that command-line overrides can touch.
    pub fn check_overrides(&self) -> Vec<String> {
        let mut errors = Vec::new();
        if !(MIN_STEPS..=MAX_STEPS).contains(&self.steps) {
            errors.push(format!("steps must lie in [{MIN_STEPS}, {MAX_STEPS}]"));
        }
        errors
    }
}

/// Parses and validates a config, reporting every violation at once.
pub fn validate_config(text: &str) -> Result<ExperimentConfig, Vec<String>> {
    let root: Value = serde_json::from_str(text).map_err(|e| vec![format!("config is not valid JSON: {e}")])?;
    let Some(obj) = root.as_object() else {
        return Err(vec!["config must be a JSON object".into()]);
    };
    let mut errors = Vec::new();
    const KNOWN: [&str; 8] = ["version", "experiment", "model", "schedule", "steps", "seed", "output_dir", "tolerances"];
    for key in obj.keys().filter(|k| !KNOWN.contains(&k.as_str())) {
        errors.push(format!("unknown field `{key}`"));
    }

    match obj.get("version").map(Value::as_str) {
        Some(Some(CONFIG_VERSION)) => {}
        Some(_) => errors.push(format!("version must be \"{CONFIG_VERSION}\"")),
        None => errors.push("missing field `version`".into()),
    }

    let experiment = match obj.get("experiment").map(Value::as_str) {
        Some(Some(s)) => s.parse::<Experiment>().map_err(|e| errors.push(e)).ok(),
        Some(None) => {
            errors.push("experiment must be a string".into());
            None
        }
        None => {
            errors.push("missing field `experiment`".into());
            None
        }
    };

    let model = match obj.get("model").map(Value::as_str) {
        Some(Some(s)) => match bundle_by_name(s) {
            Ok(_) => Some(s.to_string()),
            Err(e) => {
                errors.push(format!("model: {e}"));
                None
            }
        },
        Some(None) => {
            errors.push("model must be a string".into());
            None
        }
        None => {
            errors.push("missing field `model`".into());
            None
        }
    };

    let schedule = parse_schedule(obj.get("schedule"), &mut errors);

    let steps = match obj.get("steps") {
        None => 1024,
        Some(v) => match v.as_u64() {
            Some(s) if (MIN_STEPS as u64..=MAX_STEPS as u64).contains(&s) => s as usize,
            _ => {
                errors.push(format!("steps must be an integer in [{MIN_STEPS}, {MAX_STEPS}]"));
                0
            }
        },
    };

    let seed = match obj.get("seed") {
        None => 0,
        Some(v) => v.as_u64().unwrap_or_else(|| {
            errors.push("seed must be a nonnegative 64-bit integer".into());
            0
        }),
    };

    let output_dir = match obj.get("output_dir") {
        None => PathBuf::from("wanelab-out"),
        Some(Value::String(s)) if !s.is_empty() => PathBuf::from(s),
        Some(_) => {
            errors.push("output_dir must be a nonempty string".into());
            PathBuf::new()
        }
    };

    let tolerances = experiment.map(|e| parse_tolerances(e, obj.get("tolerances"), &mut errors));

    match (experiment, model, tolerances) {
        (Some(experiment), Some(model), Some(tolerances)) if errors.is_empty() => Ok(ExperimentConfig {
            experiment,
            model,
            schedule,
            steps,
            seed,
            output_dir,
            tolerances,
        }),
        _ => Err(errors),
    }
}

fn parse_schedule(v: Option<&Value>, errors: &mut Vec<String>) -> ScheduleConfig {
    let mut s = ScheduleConfig::default();
    let Some(v) = v else { return s };
    let before = errors.len();
    let Some(obj) = v.as_object() else {
        errors.push("schedule must be an object".into());
        return s;
    };
    for key in obj.keys().filter(|k| !["eps0", "ratio", "count"].contains(&k.as_str())) {
        errors.push(format!("unknown field `schedule.{key}`"));
    }
    if let Some(x) = obj.get("eps0") {
        match x.as_f64() {
            Some(e) if e > 0.0 && e.is_finite() => s.eps0 = e,
            _ => errors.push("schedule.eps0 must be positive".into()),
        }
    }
    if let Some(x) = obj.get("ratio") {
        match x.as_f64() {
            Some(r) if r > 0.0 && r < 1.0 => s.ratio = r,
            _ => errors.push("schedule.ratio must lie in (0, 1)".into()),
        }
    }
    if let Some(x) = obj.get("count") {
        match x.as_u64() {
            Some(c) if c >= 1 && c as usize <= MAX_COUNT => s.count = c as usize,
            _ => errors.push(format!("schedule.count must be an integer in [1, {MAX_COUNT}]")),
        }
    }
    if errors.len() == before {
        if let Err(e) = CollapseSchedule::geometric(s.eps0, s.ratio, s.count) {
            errors.push(format!("schedule: {e}"));
        }
    }
    s
}

fn parse_tolerances(e: Experiment, v: Option<&Value>, errors: &mut Vec<String>) -> BTreeMap<String, f64> {
    let defaults = e.default_tolerances();
    let mut out: BTreeMap<String, f64> = defaults.iter().map(|(k, x)| (k.to_string(), *x)).collect();
    let Some(v) = v else { return out };
    let Some(obj) = v.as_object() else {
        errors.push("tolerances must be an object".into());
        return out;
    };
    for (key, x) in obj {
        if !out.contains_key(key) {
            let names: Vec<&str> = defaults.iter().map(|(k, _)| *k).collect();
            errors.push(format!("unknown tolerance `{key}` for {e}; valid keys are {}", names.join(", ")));
            continue;
        }
        match x.as_f64() {
            Some(t) if t.is_finite() => {
                out.insert(key.clone(), t);
            }
            _ => errors.push(format!("tolerances.{key} must be a finite number")),
        }
    }
    out
}
