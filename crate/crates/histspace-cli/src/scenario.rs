//! Scenario file schema and its translation into library objects.
//!
//! A scenario is one self-describing JSON document: a key/value tree with
//! arrays, complex numbers written as `[re, im]` pairs, partition cells as
//! coordinate index sets, and events as named cylinder constraint lists.
//! Unknown keys are rejected.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use histspace::analyser::{heisenberg_analyser, Analyser, Partition, Time};
use histspace::histories::{Event, HistorySpace};
use histspace::linalg::{CMatrix, CVector, C64};

/// Input-level failure: malformed file, inconsistent dimensions, invalid
/// partitions. Maps to exit code 1.
#[derive(Debug)]
pub struct InputError(pub String);

impl std::fmt::Display for InputError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for InputError {}

fn fail<T>(msg: impl Into<String>) -> Result<T, InputError> {
    Err(InputError(msg.into()))
}

pub type InputResult<T> = Result<T, InputError>;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub dimension: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hamiltonian: Option<HamiltonianSpec>,
    /// State vector entries as `[re, im]` pairs.
    pub state: Vec<[f64; 2]>,
    pub times: Vec<f64>,
    pub partitions: PartitionSpec,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub events: BTreeMap<String, Vec<CylinderConstraint>>,
    /// Value tables keyed by comma-joined history labels.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub observables: BTreeMap<String, BTreeMap<String, f64>>,
    pub tasks: Vec<Task>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sample: Option<SampleSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub refinement: Option<RefinementSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tolerances: Option<ToleranceSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub budget: Option<usize>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, tag = "kind", rename_all = "lowercase")]
pub enum HamiltonianSpec {
    Zero,
    Dense { matrix: Vec<Vec<[f64; 2]>> },
    Laplacian,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CellSpec {
    pub label: String,
    pub indices: Vec<usize>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, tag = "mode", rename_all = "lowercase")]
pub enum PartitionSpec {
    /// Index-set cells per time, keyed by the time's decimal form.
    Explicit {
        cells: BTreeMap<String, Vec<CellSpec>>,
    },
    /// One base partition conjugated through the Hamiltonian evolution.
    Heisenberg { base: Vec<CellSpec> },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CylinderConstraint {
    pub time: f64,
    pub labels: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Task {
    Commutant,
    Probabilities,
    Conditional,
    Observables,
    Sample,
    Defect,
    Refine,
    Logic,
}

impl std::fmt::Display for Task {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let name = match self {
            Task::Commutant => "commutant",
            Task::Probabilities => "probabilities",
            Task::Conditional => "conditional",
            Task::Observables => "observables",
            Task::Sample => "sample",
            Task::Defect => "defect",
            Task::Refine => "refine",
            Task::Logic => "logic",
        };
        f.write_str(name)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SampleSpec {
    pub n: usize,
    pub seed: u64,
    /// Label → configuration point; when present the trajectory CSV gains
    /// `_x` columns.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub config: BTreeMap<String, Vec<f64>>,
    /// Time pairs for agreement statistics; defaults to consecutive times.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pairs: Option<Vec<[f64; 2]>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RefinementSpec {
    /// time key → parent label → sub-cells (index sets).
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub splits: BTreeMap<String, BTreeMap<String, Vec<CellSpec>>>,
    /// Extra times appended to the child analyser, with their partitions.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub extra: BTreeMap<String, Vec<CellSpec>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ToleranceSpec {
    /// Operator-residual tolerance for pass/fail decisions.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub op: Option<f64>,
    /// Probability tolerance for pass/fail decisions.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prob: Option<f64>,
}

/// Check tolerances after applying file and flag overrides.
#[derive(Debug, Clone, Copy)]
pub struct Tolerances {
    pub op: f64,
    pub prob: f64,
}

impl ScenarioFile {
    pub fn tolerances(&self, flag_override: Option<f64>) -> Tolerances {
        let mut op = histspace::tol::op(self.dimension).max(1e-9);
        let mut prob = histspace::tol::PROB;
        if let Some(spec) = &self.tolerances {
            if let Some(v) = spec.op {
                op = v;
            }
            if let Some(v) = spec.prob {
                prob = v;
            }
        }
        if let Some(v) = flag_override {
            op = v;
            prob = v;
        }
        Tolerances { op, prob }
    }
}

/// Scenario compiled into library objects, ready for the task runner.
pub struct Compiled {
    pub analyser: Analyser,
    pub state: CVector,
    pub space: HistorySpace,
    pub events: Vec<(String, Event)>,
    /// Observable name → values by flat history index.
    pub observables: Vec<(String, Vec<f64>)>,
    pub budget: usize,
}

fn parse_time_key(key: &str) -> InputResult<f64> {
    match key.parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(v),
        _ => fail(format!("invalid time key `{key}`")),
    }
}

fn build_partition(dim: usize, time: &str, cells: &[CellSpec]) -> InputResult<Partition> {
    let spec: Vec<(String, Vec<usize>)> = cells
        .iter()
        .map(|c| (c.label.clone(), c.indices.clone()))
        .collect();
    for c in cells {
        for &i in &c.indices {
            if i >= dim {
                return fail(format!(
                    "cell `{}` at time {time} uses index {i} beyond dimension {dim}",
                    c.label
                ));
            }
        }
    }
    Partition::from_index_cells(dim, &spec).map_err(|e| match e {
        histspace::Error::PartitionOverlap { residual, .. } => InputError(format!(
            "partition cells overlap at time {time} (residual {residual:.3e})"
        )),
        histspace::Error::PartitionSum { residual, .. } => InputError(format!(
            "partition cells do not cover every coordinate at time {time} \
             (sum residual {residual:.3e})"
        )),
        other => InputError(format!("invalid partition at time {time}: {other}")),
    })
}

fn build_hamiltonian(file: &ScenarioFile) -> InputResult<CMatrix> {
    let d = file.dimension;
    match &file.hamiltonian {
        None | Some(HamiltonianSpec::Zero) => Ok(CMatrix::zeros(d, d)),
        Some(HamiltonianSpec::Dense { matrix }) => {
            if matrix.len() != d || matrix.iter().any(|row| row.len() != d) {
                return fail(format!("hamiltonian matrix must be {d} x {d}"));
            }
            Ok(CMatrix::from_fn(d, d, |i, j| {
                C64::new(matrix[i][j][0], matrix[i][j][1])
            }))
        }
        Some(HamiltonianSpec::Laplacian) => {
            let mut h = CMatrix::zeros(d, d);
            for i in 0..d {
                h[(i, i)] = C64::new(2.0, 0.0);
                let next = (i + 1) % d;
                h[(i, next)] = C64::new(-1.0, 0.0);
                h[(next, i)] = C64::new(-1.0, 0.0);
            }
            Ok(h)
        }
    }
}

impl ScenarioFile {
    /// Validates the document and builds the analyser, state, events and
    /// observable tables.
    pub fn compile(&self) -> InputResult<Compiled> {
        let d = self.dimension;
        if d == 0 || d > 256 {
            return fail(format!("dimension must lie in 1..=256, got {d}"));
        }
        if self.state.len() != d {
            return fail(format!(
                "state has {} entries, dimension is {d}",
                self.state.len()
            ));
        }
        let state = CVector::from_iterator(d, self.state.iter().map(|&[re, im]| C64::new(re, im)));
        if state.norm() == 0.0 {
            return fail("state vector is zero");
        }
        if self.times.is_empty() {
            return fail("at least one time is required");
        }
        for &t in &self.times {
            if !t.is_finite() {
                return fail(format!("time {t} is not finite"));
            }
        }

        let analyser = match &self.partitions {
            PartitionSpec::Explicit { cells } => {
                // normalize map keys ("0.0" and "0" address the same time)
                let mut canonical: BTreeMap<String, &Vec<CellSpec>> = BTreeMap::new();
                for (key, specs) in cells {
                    let v = parse_time_key(key)?;
                    if canonical
                        .insert(Time::new(v).key().to_string(), specs)
                        .is_some()
                    {
                        return fail(format!("duplicate partition key for time {v}"));
                    }
                }
                let mut items = Vec::new();
                for &t in &self.times {
                    let key = Time::new(t).key().to_string();
                    let specs = canonical
                        .get(&key)
                        .ok_or_else(|| InputError(format!("no partition given for time {key}")))?;
                    items.push((Time::new(t), build_partition(d, &key, specs)?));
                }
                // every partition key must correspond to a declared time
                for key in cells.keys() {
                    let v = parse_time_key(key)?;
                    if !self.times.iter().any(|&t| Time::new(t) == Time::new(v)) {
                        return fail(format!("partition key {key} is not a declared time"));
                    }
                }
                Analyser::new(items).map_err(|e| InputError(format!("invalid analyser: {e}")))?
            }
            PartitionSpec::Heisenberg { base } => {
                let base = build_partition(d, "base", base)?;
                let h = build_hamiltonian(self)?;
                heisenberg_analyser(&base, &h, &self.times)
                    .map_err(|e| InputError(format!("heisenberg construction failed: {e}")))?
            }
        };

        let space = HistorySpace::from_analyser(&analyser);
        let size = space
            .size()
            .map_err(|e| InputError(format!("history space: {e}")))?;
        let budget = self.budget.unwrap_or(histspace::DEFAULT_BUDGET);
        if size > budget {
            return fail(format!(
                "history space has {size} histories, budget is {budget}"
            ));
        }

        let mut events = Vec::new();
        for (name, constraints) in &self.events {
            let list: Vec<(Time, Vec<String>)> = constraints
                .iter()
                .map(|c| (Time::new(c.time), c.labels.clone()))
                .collect();
            let event = Event::cylinder(&space, &list)
                .map_err(|e| InputError(format!("event `{name}`: {e}")))?;
            events.push((name.clone(), event));
        }

        let mut observables = Vec::new();
        for (name, table) in &self.observables {
            let mut values = Vec::with_capacity(size);
            let mut seen = 0usize;
            for flat in 0..size {
                let key = space.history_labels(flat).join(",");
                match table.get(&key) {
                    Some(&v) => {
                        values.push(v);
                        seen += 1;
                    }
                    None => return fail(format!("observable `{name}` is missing history `{key}`")),
                }
            }
            if table.len() != seen {
                return fail(format!(
                    "observable `{name}` has {} entries that match no history",
                    table.len() - seen
                ));
            }
            observables.push((name.clone(), values));
        }

        Ok(Compiled {
            analyser,
            state,
            space,
            events,
            observables,
            budget,
        })
    }
}
