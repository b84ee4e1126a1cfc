//! Run report: machine-readable JSON plus a plain-text rendering.
//!
//! Every residual is reported next to the tolerance it was judged
//! against; wall-clock fields are informational and excluded from
//! round-trip comparisons.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::scenario::ScenarioFile;

/// A residual with the tolerance it was checked against.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct Check {
    pub value: f64,
    pub tol: f64,
    pub pass: bool,
}

impl Check {
    pub fn new(value: f64, tol: f64) -> Self {
        Self {
            value,
            tol,
            pass: value < tol,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ConditionalEntry {
    pub given: String,
    pub event: String,
    pub value: f64,
    pub gap: Check,
}

#[derive(Debug, Clone, Serialize)]
pub struct ObservableEntry {
    pub name: String,
    pub expectation: f64,
    pub expectation_gap: Check,
}

#[derive(Debug, Clone, Serialize)]
pub struct SampleFreq {
    pub empirical: f64,
    pub expected: f64,
    pub sigma: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, Serialize)]
#[serde(tag = "task", rename_all = "lowercase")]
pub enum TaskReport {
    Commutant {
        dim_h_pi: usize,
        dim_n: usize,
        surviving_histories: usize,
        hpi_nperp_distance: Check,
        ordered_product_residual: Check,
        permutation_residual: Check,
        wall_ms: f64,
        pass: bool,
    },
    Probabilities {
        per_history: BTreeMap<String, f64>,
        total_mass_error: Check,
        dual_form_gap: Check,
        per_event: BTreeMap<String, f64>,
        wall_ms: f64,
        pass: bool,
    },
    Conditional {
        table: Vec<ConditionalEntry>,
        wall_ms: f64,
        pass: bool,
    },
    Observables {
        entries: Vec<ObservableEntry>,
        max_restricted_commutator: Check,
        wall_ms: f64,
        pass: bool,
    },
    Sample {
        n: usize,
        seed: u64,
        csv: Option<String>,
        event_freqs: BTreeMap<String, SampleFreq>,
        agreement: BTreeMap<String, f64>,
        wall_ms: f64,
        pass: bool,
    },
    Defect {
        defects: BTreeMap<String, f64>,
        max_defect: f64,
        max_commutator: f64,
        norm_bound: Check,
        verdict: String,
        verdict_consistent: bool,
        wall_ms: f64,
        pass: bool,
    },
    Refine {
        events_checked: usize,
        operator_residual: Check,
        commutation_residual: Check,
        subspace_distance: Check,
        hpi_containment: Check,
        wall_ms: f64,
        pass: bool,
    },
    Logic {
        pvm_additivity: Check,
        pvm_multiplicativity: Check,
        pvm_complement: Check,
        sigma_subset_leak: Check,
        sigma_union_leak: Check,
        sigma_intersection_leak: Check,
        wall_ms: f64,
        pass: bool,
    },
    Failed {
        name: String,
        error: String,
        wall_ms: f64,
        pass: bool,
    },
}

impl TaskReport {
    pub fn pass(&self) -> bool {
        match self {
            TaskReport::Commutant { pass, .. }
            | TaskReport::Probabilities { pass, .. }
            | TaskReport::Conditional { pass, .. }
            | TaskReport::Observables { pass, .. }
            | TaskReport::Sample { pass, .. }
            | TaskReport::Defect { pass, .. }
            | TaskReport::Refine { pass, .. }
            | TaskReport::Logic { pass, .. }
            | TaskReport::Failed { pass, .. } => *pass,
        }
    }
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct ToleranceEcho {
    pub op: f64,
    pub prob: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunReport {
    pub scenario: ScenarioFile,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    pub tolerances: ToleranceEcho,
    pub tasks: Vec<TaskReport>,
    pub max_residual: f64,
    pub pass: bool,
}

fn fmt_check(label: &str, c: &Check) -> String {
    format!(
        "  {label}: {:.3e} (tol {:.1e}) {}",
        c.value,
        c.tol,
        if c.pass { "ok" } else { "FAIL" }
    )
}

/// Plain-text rendering of a report.
pub fn render_text(report: &RunReport) -> String {
    let mut out = String::new();
    let push = |out: &mut String, line: String| {
        out.push_str(&line);
        out.push('\n');
    };
    push(
        &mut out,
        format!("run: {}", if report.pass { "PASS" } else { "FAIL" }),
    );
    push(
        &mut out,
        format!(
            "tolerances: op {:.1e}, prob {:.1e}; max residual {:.3e}",
            report.tolerances.op, report.tolerances.prob, report.max_residual
        ),
    );
    for task in &report.tasks {
        match task {
            TaskReport::Commutant {
                dim_h_pi,
                dim_n,
                surviving_histories,
                hpi_nperp_distance,
                ordered_product_residual,
                permutation_residual,
                wall_ms,
                pass,
            } => {
                push(
                    &mut out,
                    format!(
                        "[commutant] {} ({wall_ms:.1} ms)",
                        if *pass { "ok" } else { "FAIL" }
                    ),
                );
                push(
                    &mut out,
                    format!(
                        "  dim H_pi = {dim_h_pi}, dim N = {dim_n}, surviving histories = {surviving_histories}"
                    ),
                );
                push(
                    &mut out,
                    fmt_check("H_pi vs N-perp distance", hpi_nperp_distance),
                );
                push(
                    &mut out,
                    fmt_check("ordered product residual", ordered_product_residual),
                );
                push(
                    &mut out,
                    fmt_check("permutation residual", permutation_residual),
                );
            }
            TaskReport::Probabilities {
                per_history,
                total_mass_error,
                dual_form_gap,
                per_event,
                wall_ms,
                pass,
            } => {
                push(
                    &mut out,
                    format!(
                        "[probabilities] {} ({wall_ms:.1} ms)",
                        if *pass { "ok" } else { "FAIL" }
                    ),
                );
                for (history, p) in per_history {
                    push(&mut out, format!("  P({history}) = {p:.12}"));
                }
                for (name, p) in per_event {
                    push(&mut out, format!("  P[{name}] = {p:.12}"));
                }
                push(&mut out, fmt_check("total mass error", total_mass_error));
                push(&mut out, fmt_check("meet vs product gap", dual_form_gap));
            }
            TaskReport::Conditional {
                table,
                wall_ms,
                pass,
            } => {
                push(
                    &mut out,
                    format!(
                        "[conditional] {} ({wall_ms:.1} ms)",
                        if *pass { "ok" } else { "FAIL" }
                    ),
                );
                for entry in table {
                    push(
                        &mut out,
                        format!(
                            "  P({} | {}) = {:.12} (gap {:.3e} {})",
                            entry.event,
                            entry.given,
                            entry.value,
                            entry.gap.value,
                            if entry.gap.pass { "ok" } else { "FAIL" }
                        ),
                    );
                }
            }
            TaskReport::Observables {
                entries,
                max_restricted_commutator,
                wall_ms,
                pass,
            } => {
                push(
                    &mut out,
                    format!(
                        "[observables] {} ({wall_ms:.1} ms)",
                        if *pass { "ok" } else { "FAIL" }
                    ),
                );
                for e in entries {
                    push(
                        &mut out,
                        format!(
                            "  <{}> = {:.12} (gap {:.3e} {})",
                            e.name,
                            e.expectation,
                            e.expectation_gap.value,
                            if e.expectation_gap.pass { "ok" } else { "FAIL" }
                        ),
                    );
                }
                push(
                    &mut out,
                    fmt_check("max restricted commutator", max_restricted_commutator),
                );
            }
            TaskReport::Sample {
                n,
                seed,
                csv,
                event_freqs,
                agreement,
                wall_ms,
                pass,
            } => {
                push(
                    &mut out,
                    format!(
                        "[sample] {} ({wall_ms:.1} ms)",
                        if *pass { "ok" } else { "FAIL" }
                    ),
                );
                push(&mut out, format!("  n = {n}, seed = {seed}"));
                if let Some(path) = csv {
                    push(&mut out, format!("  trajectories: {path}"));
                }
                for (name, f) in event_freqs {
                    push(
                        &mut out,
                        format!(
                            "  freq[{name}] = {:.5} (expected {:.5}, sigma {:.2e}) {}",
                            f.empirical,
                            f.expected,
                            f.sigma,
                            if f.pass { "ok" } else { "FAIL" }
                        ),
                    );
                }
                for (pair, f) in agreement {
                    push(&mut out, format!("  agreement[{pair}] = {f:.5}"));
                }
            }
            TaskReport::Defect {
                defects,
                max_defect,
                max_commutator,
                norm_bound,
                verdict,
                verdict_consistent,
                wall_ms,
                pass,
            } => {
                push(
                    &mut out,
                    format!(
                        "[defect] {} ({wall_ms:.1} ms)",
                        if *pass { "ok" } else { "FAIL" }
                    ),
                );
                for (key, v) in defects {
                    push(&mut out, format!("  defect[{key}] = {v:.12}"));
                }
                push(
                    &mut out,
                    format!(
                        "  max defect = {max_defect:.12}, max commutator = {max_commutator:.12}"
                    ),
                );
                push(&mut out, fmt_check("norm bound (<= 2)", norm_bound));
                push(
                    &mut out,
                    format!(
                        "  verdict: {verdict} (defect and commutator agree: {verdict_consistent})"
                    ),
                );
            }
            TaskReport::Refine {
                events_checked,
                operator_residual,
                commutation_residual,
                subspace_distance,
                hpi_containment,
                wall_ms,
                pass,
            } => {
                push(
                    &mut out,
                    format!(
                        "[refine] {} ({wall_ms:.1} ms, {events_checked} events)",
                        if *pass { "ok" } else { "FAIL" }
                    ),
                );
                push(&mut out, fmt_check("operator residual", operator_residual));
                push(
                    &mut out,
                    fmt_check("commutation residual", commutation_residual),
                );
                push(&mut out, fmt_check("subspace distance", subspace_distance));
                push(&mut out, fmt_check("H_pi' containment", hpi_containment));
            }
            TaskReport::Logic {
                pvm_additivity,
                pvm_multiplicativity,
                pvm_complement,
                sigma_subset_leak,
                sigma_union_leak,
                sigma_intersection_leak,
                wall_ms,
                pass,
            } => {
                push(
                    &mut out,
                    format!(
                        "[logic] {} ({wall_ms:.1} ms)",
                        if *pass { "ok" } else { "FAIL" }
                    ),
                );
                push(&mut out, fmt_check("pvm additivity", pvm_additivity));
                push(
                    &mut out,
                    fmt_check("pvm multiplicativity", pvm_multiplicativity),
                );
                push(&mut out, fmt_check("pvm complement", pvm_complement));
                push(&mut out, fmt_check("null subset leak", sigma_subset_leak));
                push(&mut out, fmt_check("null union leak", sigma_union_leak));
                push(
                    &mut out,
                    fmt_check("null intersection leak", sigma_intersection_leak),
                );
            }
            TaskReport::Failed {
                name,
                error,
                wall_ms,
                ..
            } => {
                push(&mut out, format!("[{name}] FAIL ({wall_ms:.1} ms)"));
                push(&mut out, format!("  error: {error}"));
            }
        }
    }
    out
}
