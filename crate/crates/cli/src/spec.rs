//! Problem specification: a single JSON document, validated strictly.
//!
//! Validation walks the parsed JSON by hand so that every problem is
//! reported at once, including unknown keys.

use std::fmt;
use std::path::{Path, PathBuf};

use num_complex::Complex64 as C64;
use pcwk::{CMat, Horizon, Truncation};
use serde_json::{Map, Value};

pub const DEFAULT_GRID: usize = pcwk::spectral::DEFAULT_GRID;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Task {
    Interpolate,
    Extrapolate,
    ExtrapolateFinite,
    Filter,
    Factorize,
    MinimaxY,
    MinimaxInterpDm,
    MinimaxExtrapD01,
    MinimaxFilterD0eps,
    OracleCheck,
    Simulate,
}

impl Task {
    pub const ALL: [Task; 11] = [
        Task::Interpolate,
        Task::Extrapolate,
        Task::ExtrapolateFinite,
        Task::Filter,
        Task::Factorize,
        Task::MinimaxY,
        Task::MinimaxInterpDm,
        Task::MinimaxExtrapD01,
        Task::MinimaxFilterD0eps,
        Task::OracleCheck,
        Task::Simulate,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Task::Interpolate => "interpolate",
            Task::Extrapolate => "extrapolate",
            Task::ExtrapolateFinite => "extrapolate-finite",
            Task::Filter => "filter",
            Task::Factorize => "factorize",
            Task::MinimaxY => "minimax-y",
            Task::MinimaxInterpDm => "minimax-interp-dm",
            Task::MinimaxExtrapD01 => "minimax-extrap-d01",
            Task::MinimaxFilterD0eps => "minimax-filter-d0eps",
            Task::OracleCheck => "oracle-check",
            Task::Simulate => "simulate",
        }
    }

    fn parse(s: &str) -> Option<Task> {
        Task::ALL.into_iter().find(|t| t.name() == s)
    }

    /// Horizon implied by the task, if any.
    fn horizon_kind(&self) -> Option<HorizonKind> {
        match self {
            Task::Interpolate | Task::MinimaxInterpDm => Some(HorizonKind::Interpolation),
            Task::Extrapolate | Task::MinimaxY | Task::MinimaxExtrapD01 => {
                Some(HorizonKind::Extrapolation)
            }
            Task::ExtrapolateFinite => Some(HorizonKind::ExtrapolationFinite),
            Task::Filter | Task::MinimaxFilterD0eps => Some(HorizonKind::Filtering),
            Task::Factorize | Task::OracleCheck | Task::Simulate => None,
        }
    }

    fn needs_weights(&self) -> bool {
        !matches!(self, Task::Factorize | Task::Simulate | Task::OracleCheck)
    }

    fn needs_f(&self) -> bool {
        matches!(
            self,
            Task::Interpolate
                | Task::Extrapolate
                | Task::ExtrapolateFinite
                | Task::Filter
                | Task::Factorize
                | Task::Simulate
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HorizonKind {
    Interpolation,
    Extrapolation,
    ExtrapolationFinite,
    Filtering,
}

impl HorizonKind {
    fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "interpolation" => HorizonKind::Interpolation,
            "extrapolation" => HorizonKind::Extrapolation,
            "extrapolation-finite" => HorizonKind::ExtrapolationFinite,
            "filtering" => HorizonKind::Filtering,
            _ => return None,
        })
    }

    pub fn name(&self) -> &'static str {
        match self {
            HorizonKind::Interpolation => "interpolation",
            HorizonKind::Extrapolation => "extrapolation",
            HorizonKind::ExtrapolationFinite => "extrapolation-finite",
            HorizonKind::Filtering => "filtering",
        }
    }

    /// Horizon for weights covering blocks `0..=last`.
    pub fn horizon(&self, last: usize) -> Horizon {
        match self {
            HorizonKind::Interpolation => Horizon::Interpolation(last),
            HorizonKind::Extrapolation => Horizon::Extrapolation,
            HorizonKind::ExtrapolationFinite => Horizon::ExtrapolationFinite(last),
            HorizonKind::Filtering => Horizon::Filtering,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LiftSpec {
    pub period: f64,
    pub harmonics: usize,
    pub quadrature_points: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub enum WeightSource {
    Inline(Vec<Vec<C64>>),
    Csv {
        path: PathBuf,
        last_block: Option<usize>,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct WeightSpec {
    pub source: WeightSource,
    pub horizon: HorizonKind,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Numerics {
    pub grid: usize,
    pub truncation: Truncation,
    /// Task-specific default when absent.
    pub tolerance: Option<f64>,
    /// Task-specific default when absent.
    pub max_iter: Option<usize>,
    pub cond_threshold: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClassParams {
    pub p_zeta: Option<f64>,
    pub p_theta: Option<f64>,
    pub epsilon: Option<f64>,
    pub g2: Option<PathBuf>,
    pub power: Option<CMat>,
    pub constraints: Vec<CMat>,
    pub samples: usize,
    pub sample_degree: usize,
    pub window_start: usize,
    pub window_max: usize,
    pub rel_tolerance: f64,
    pub suite_k: Vec<usize>,
    pub blocks: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProblemSpec {
    pub task: Task,
    pub lift: LiftSpec,
    pub f: Option<PathBuf>,
    pub g: Option<PathBuf>,
    pub weights: Option<WeightSpec>,
    pub numerics: Numerics,
    pub class: ClassParams,
}

/// Every problem found in a specification.
#[derive(Debug, Clone, PartialEq)]
pub struct SpecErrors(pub Vec<String>);

impl fmt::Display for SpecErrors {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "invalid specification:")?;
        for e in &self.0 {
            write!(f, "\n  - {e}")?;
        }
        Ok(())
    }
}

impl std::error::Error for SpecErrors {}

const TOP_KEYS: &[&str] = &[
    "task",
    "lift",
    "densities",
    "weights",
    "numerics",
    "class_params",
];
const LIFT_KEYS: &[&str] = &["period", "harmonics", "quadrature_points"];
const DENSITY_KEYS: &[&str] = &["f", "g"];
const WEIGHT_KEYS: &[&str] = &["blocks", "csv", "last_block", "horizon"];
const NUMERIC_KEYS: &[&str] = &[
    "grid",
    "truncation",
    "tolerance",
    "max_iter",
    "cond_threshold",
    "seed",
];
const CLASS_KEYS: &[&str] = &[
    "p_zeta",
    "p_theta",
    "epsilon",
    "g2",
    "power",
    "constraints",
    "samples",
    "sample_degree",
    "window_start",
    "window_max",
    "rel_tolerance",
    "suite_k",
    "blocks",
];

struct Walker {
    errors: Vec<String>,
    base: PathBuf,
}

impl Walker {
    fn object<'a>(
        &mut self,
        v: Option<&'a Value>,
        name: &str,
        keys: &[&str],
    ) -> Option<&'a Map<String, Value>> {
        let v = v?;
        let Some(obj) = v.as_object() else {
            self.errors.push(if name.is_empty() {
                "the specification must be a JSON object".to_string()
            } else {
                format!("`{name}` must be an object")
            });
            return None;
        };
        for k in obj.keys() {
            if !keys.contains(&k.as_str()) {
                let key = if name.is_empty() {
                    k.clone()
                } else {
                    format!("{name}.{k}")
                };
                self.errors.push(format!("unknown key `{key}`"));
            }
        }
        Some(obj)
    }

    fn number(&mut self, obj: Option<&Map<String, Value>>, path: &str, key: &str) -> Option<f64> {
        let v = obj?.get(key)?;
        match v.as_f64() {
            Some(x) if x.is_finite() => Some(x),
            _ => {
                self.errors
                    .push(format!("`{path}.{key}` must be a finite number"));
                None
            }
        }
    }

    fn positive(&mut self, obj: Option<&Map<String, Value>>, path: &str, key: &str) -> Option<f64> {
        let x = self.number(obj, path, key)?;
        if x > 0.0 {
            Some(x)
        } else {
            self.errors.push(format!("`{path}.{key}` must be positive"));
            None
        }
    }

    fn unsigned(&mut self, obj: Option<&Map<String, Value>>, path: &str, key: &str) -> Option<u64> {
        let v = obj?.get(key)?;
        match v.as_u64() {
            Some(x) => Some(x),
            None => {
                self.errors
                    .push(format!("`{path}.{key}` must be a nonnegative integer"));
                None
            }
        }
    }

    fn path(&mut self, obj: Option<&Map<String, Value>>, path: &str, key: &str) -> Option<PathBuf> {
        let v = obj?.get(key)?;
        let Some(s) = v.as_str() else {
            self.errors
                .push(format!("`{path}.{key}` must be a file path string"));
            return None;
        };
        let p = self.base.join(s);
        if !p.is_file() {
            self.errors
                .push(format!("`{path}.{key}`: file `{}` not found", p.display()));
        }
        Some(p)
    }

    fn complex(&mut self, v: &Value, at: &str) -> Option<C64> {
        match v {
            Value::Number(n) => n.as_f64().map(|x| C64::new(x, 0.0)),
            Value::Array(a) if a.len() == 2 => match (a[0].as_f64(), a[1].as_f64()) {
                (Some(re), Some(im)) => Some(C64::new(re, im)),
                _ => None,
            },
            _ => None,
        }
        .or_else(|| {
            self.errors
                .push(format!("{at} must be a number or a [re, im] pair"));
            None
        })
    }

    fn vector(&mut self, v: &Value, at: &str) -> Option<Vec<C64>> {
        let Some(a) = v.as_array() else {
            self.errors.push(format!("{at} must be an array"));
            return None;
        };
        let out: Vec<Option<C64>> = a
            .iter()
            .enumerate()
            .map(|(i, x)| self.complex(x, &format!("{at}[{i}]")))
            .collect();
        out.into_iter().collect()
    }

    fn matrix(&mut self, v: &Value, at: &str) -> Option<CMat> {
        let Some(rows) = v.as_array() else {
            self.errors.push(format!("{at} must be an array of rows"));
            return None;
        };
        let parsed: Vec<Option<Vec<C64>>> = rows
            .iter()
            .enumerate()
            .map(|(i, r)| self.vector(r, &format!("{at}[{i}]")))
            .collect();
        let parsed: Vec<Vec<C64>> = parsed.into_iter().collect::<Option<_>>()?;
        let n = parsed.len();
        if n == 0 || parsed.iter().any(|r| r.len() != n) {
            self.errors
                .push(format!("{at} must be a nonempty square matrix"));
            return None;
        }
        Some(CMat::from_fn(n, n, |i, j| parsed[i][j]))
    }
}

/// Parses and validates a specification; relative paths are resolved
/// against `base`.
pub fn parse_spec_str(text: &str, base: &Path) -> Result<ProblemSpec, SpecErrors> {
    let root: Value =
        serde_json::from_str(text).map_err(|e| SpecErrors(vec![format!("not valid JSON: {e}")]))?;
    let mut w = Walker {
        errors: Vec::new(),
        base: base.to_path_buf(),
    };
    let Some(top) = w.object(Some(&root), "", TOP_KEYS) else {
        return Err(SpecErrors(w.errors));
    };

    let task = match top.get("task").map(|t| t.as_str()) {
        None => {
            w.errors.push("missing required field `task`".into());
            None
        }
        Some(Some(s)) => Task::parse(s).or_else(|| {
            let names: Vec<_> = Task::ALL.iter().map(|t| t.name()).collect();
            w.errors.push(format!(
                "unknown task `{s}` (expected one of {})",
                names.join(", ")
            ));
            None
        }),
        Some(None) => {
            w.errors.push("`task` must be a string".into());
            None
        }
    };

    let lift_obj = w.object(top.get("lift"), "lift", LIFT_KEYS);
    let harmonics = match lift_obj.and_then(|o| o.get("harmonics")) {
        Some(v) => match v.as_u64() {
            Some(0) => {
                w.errors.push("K must be ≥ 1 (`lift.harmonics`)".into());
                None
            }
            Some(k) => Some(k as usize),
            None => {
                w.errors
                    .push("`lift.harmonics` must be a positive integer".into());
                None
            }
        },
        None => {
            w.errors
                .push("missing required field `lift.harmonics`".into());
            None
        }
    };
    let period = w.positive(lift_obj, "lift", "period").unwrap_or(1.0);
    let quadrature_points = w
        .unsigned(lift_obj, "lift", "quadrature_points")
        .map(|q| q as usize)
        .unwrap_or(4 * harmonics.unwrap_or(1).max(1));
    if let Some(k) = harmonics {
        if quadrature_points < 4 * k {
            w.errors.push(format!(
                "`lift.quadrature_points` must be at least 4K = {}",
                4 * k
            ));
        }
    }

    let dens = w.object(top.get("densities"), "densities", DENSITY_KEYS);
    let f = w.path(dens, "densities", "f");
    let g = w.path(dens, "densities", "g");

    let num = w.object(top.get("numerics"), "numerics", NUMERIC_KEYS);
    let grid = w
        .unsigned(num, "numerics", "grid")
        .map(|g| g as usize)
        .unwrap_or(DEFAULT_GRID);
    if grid < 16 || !grid.is_multiple_of(2) {
        w.errors.push(format!(
            "`numerics.grid` must be an even number >= 16, got {grid}"
        ));
    }
    let truncation = match num.and_then(|o| o.get("truncation")) {
        None => Truncation::Auto,
        Some(Value::String(s)) if s == "auto" => Truncation::Auto,
        Some(v) => match v.as_u64() {
            Some(j) => Truncation::Fixed(j as usize),
            None => {
                w.errors
                    .push("`numerics.truncation` must be \"auto\" or a nonnegative integer".into());
                Truncation::Auto
            }
        },
    };
    let numerics = Numerics {
        grid,
        truncation,
        tolerance: w.positive(num, "numerics", "tolerance"),
        max_iter: w.unsigned(num, "numerics", "max_iter").map(|x| x as usize),
        cond_threshold: w
            .positive(num, "numerics", "cond_threshold")
            .unwrap_or(pcwk::spectral::DEFAULT_COND_THRESHOLD),
        seed: w.unsigned(num, "numerics", "seed").unwrap_or(0),
    };

    let weights = parse_weights(&mut w, top.get("weights"), task, harmonics);

    let cls = w.object(top.get("class_params"), "class_params", CLASS_KEYS);
    let power = cls
        .and_then(|o| o.get("power"))
        .and_then(|v| w.matrix(v, "`class_params.power`"));
    let constraints = match cls.and_then(|o| o.get("constraints")) {
        None => Vec::new(),
        Some(Value::Array(items)) => {
            let parsed: Vec<Option<CMat>> = items
                .iter()
                .enumerate()
                .map(|(m, v)| w.matrix(v, &format!("`class_params.constraints[{m}]`")))
                .collect();
            parsed.into_iter().flatten().collect()
        }
        Some(_) => {
            w.errors
                .push("`class_params.constraints` must be an array of matrices".into());
            Vec::new()
        }
    };
    let suite_k = match cls.and_then(|o| o.get("suite_k")) {
        None => vec![1, 2, 4],
        Some(v) => match v.as_array().map(|a| {
            a.iter()
                .map(|x| x.as_u64().filter(|&k| k >= 1))
                .collect::<Option<Vec<_>>>()
        }) {
            Some(Some(ks)) if !ks.is_empty() => ks.into_iter().map(|k| k as usize).collect(),
            _ => {
                w.errors.push(
                    "`class_params.suite_k` must be a nonempty array of integers >= 1".into(),
                );
                Vec::new()
            }
        },
    };
    let class = ClassParams {
        p_zeta: w.positive(cls, "class_params", "p_zeta"),
        p_theta: w.number(cls, "class_params", "p_theta"),
        epsilon: w.number(cls, "class_params", "epsilon"),
        g2: w.path(cls, "class_params", "g2"),
        power,
        constraints,
        samples: w
            .unsigned(cls, "class_params", "samples")
            .map(|x| x as usize)
            .unwrap_or(100),
        sample_degree: w
            .unsigned(cls, "class_params", "sample_degree")
            .map(|x| x as usize)
            .unwrap_or(1),
        window_start: w
            .unsigned(cls, "class_params", "window_start")
            .map(|x| x as usize)
            .unwrap_or(8),
        window_max: w
            .unsigned(cls, "class_params", "window_max")
            .map(|x| x as usize)
            .unwrap_or(256),
        rel_tolerance: w
            .positive(cls, "class_params", "rel_tolerance")
            .unwrap_or(1e-5),
        suite_k,
        blocks: w
            .unsigned(cls, "class_params", "blocks")
            .map(|x| x as usize)
            .unwrap_or(1000),
    };

    if let Some(task) = task {
        // A present but malformed block is already reported; don't also call it missing.
        let has_weights = weights.is_some() || top.contains_key("weights");
        check_task_requirements(&mut w, task, f.is_some(), g.is_some(), has_weights, &class);
    }

    if !w.errors.is_empty() {
        return Err(SpecErrors(w.errors));
    }
    Ok(ProblemSpec {
        task: task.expect("validated"),
        lift: LiftSpec {
            period,
            harmonics: harmonics.expect("validated"),
            quadrature_points,
        },
        f,
        g,
        weights,
        numerics,
        class,
    })
}

fn parse_weights(
    w: &mut Walker,
    v: Option<&Value>,
    task: Option<Task>,
    k: Option<usize>,
) -> Option<WeightSpec> {
    let obj = w.object(v, "weights", WEIGHT_KEYS)?;
    let declared = match obj.get("horizon") {
        None => None,
        Some(h) => match h.as_str().and_then(HorizonKind::parse) {
            Some(h) => Some(h),
            None => {
                w.errors.push(
                    "`weights.horizon` must be one of interpolation, extrapolation, extrapolation-finite, filtering"
                        .into(),
                );
                None
            }
        },
    };
    let implied = task.and_then(|t| t.horizon_kind());
    let horizon = match (declared, implied) {
        (Some(d), Some(i)) if d != i => {
            w.errors.push(format!(
                "`weights.horizon` is {} but task {} needs {}",
                d.name(),
                task.map(|t| t.name()).unwrap_or(""),
                i.name()
            ));
            None
        }
        (Some(d), _) => Some(d),
        (None, Some(i)) => Some(i),
        (None, None) => {
            if task.is_some() {
                w.errors
                    .push("`weights.horizon` is required for this task".into());
            }
            None
        }
    };
    let source = match (obj.get("blocks"), obj.contains_key("csv")) {
        (Some(_), true) => {
            w.errors
                .push("weights doubly specified (`weights.blocks` and `weights.csv`)".into());
            None
        }
        (None, false) => {
            w.errors.push("`weights` needs `blocks` or `csv`".into());
            None
        }
        (Some(b), false) => {
            let blocks = match b.as_array() {
                Some(items) if !items.is_empty() => {
                    let parsed: Vec<Option<Vec<C64>>> = items
                        .iter()
                        .enumerate()
                        .map(|(j, x)| w.vector(x, &format!("`weights.blocks[{j}]`")))
                        .collect();
                    parsed.into_iter().collect::<Option<Vec<_>>>()
                }
                _ => {
                    w.errors
                        .push("`weights.blocks` must be a nonempty array of blocks".into());
                    None
                }
            };
            if obj.contains_key("last_block") {
                w.errors
                    .push("`weights.last_block` applies only to `weights.csv`".into());
            }
            if let (Some(blocks), Some(k)) = (&blocks, k) {
                for (j, b) in blocks.iter().enumerate() {
                    if b.len() != k {
                        w.errors.push(format!(
                            "`weights.blocks[{j}]` has {} entries, expected K = {k}",
                            b.len()
                        ));
                    }
                }
            }
            blocks.map(WeightSource::Inline)
        }
        (None, true) => {
            let path = w.path(Some(obj), "weights", "csv");
            let last_block = w
                .unsigned(Some(obj), "weights", "last_block")
                .map(|x| x as usize);
            path.map(|path| WeightSource::Csv { path, last_block })
        }
    };
    Some(WeightSpec {
        source: source?,
        horizon: horizon?,
    })
}

fn check_task_requirements(
    w: &mut Walker,
    task: Task,
    has_f: bool,
    has_g: bool,
    has_weights: bool,
    class: &ClassParams,
) {
    let mut missing = |cond: bool, what: &str| {
        if cond {
            w.errors
                .push(format!("task {} requires {what}", task.name()));
        }
    };
    missing(task.needs_f() && !has_f, "`densities.f`");
    missing(task.needs_weights() && !has_weights, "`weights`");
    missing(task == Task::Filter && !has_g, "`densities.g`");
    match task {
        Task::MinimaxY => missing(class.p_zeta.is_none(), "`class_params.p_zeta`"),
        Task::MinimaxExtrapD01 => missing(class.power.is_none(), "`class_params.power`"),
        Task::MinimaxInterpDm => {
            missing(class.constraints.is_empty(), "`class_params.constraints`")
        }
        Task::MinimaxFilterD0eps => {
            missing(class.p_zeta.is_none(), "`class_params.p_zeta`");
            missing(class.p_theta.is_none(), "`class_params.p_theta`");
            missing(class.epsilon.is_none(), "`class_params.epsilon`");
            missing(class.g2.is_none(), "`class_params.g2`");
        }
        Task::OracleCheck if has_f => {
            missing(!has_weights, "`weights` when `densities.f` is given")
        }
        _ => {}
    }
    if task == Task::ExtrapolateFinite && has_g {
        w.errors
            .push("task extrapolate-finite is noiseless; remove `densities.g`".into());
    }
}

/// Reads and validates a specification file.
pub fn parse_spec(path: &Path) -> Result<ProblemSpec, SpecErrors> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| SpecErrors(vec![format!("cannot read `{}`: {e}", path.display())]))?;
    let base = path.parent().unwrap_or(Path::new("."));
    parse_spec_str(&text, base)
}
