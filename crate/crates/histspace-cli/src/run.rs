//! Task orchestration: compile the scenario, execute the requested tasks
//! in order, and assemble the report.
//!
//! Input problems (schema, dimensions, invalid partitions, malformed
//! refinement blocks) surface before any task runs and abort without a
//! report. Failures inside a task (a state outside the commutation
//! subspace, a residual beyond tolerance) are recorded in the report and
//! turn the run into a check failure.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use histspace::analyser::{refine, Analyser, CellSplit, Partition, RefinementMap, Time};
use histspace::commutant::{
    check_hpi_characterizations, compute_commutant, event_projector, CommutantDecomposition,
};
use histspace::consistency::{defect_report, Verdict};
use histspace::histories::{
    check_pvm_axioms, event_probability, measure_expectation, observable, sigma_ideal_checks,
    Event, PathMeasure,
};
use histspace::linalg::{operator_norm, CVector, Projector};
use histspace::refinement::check_refinement_identity;
use histspace::sampler::{record_statistics, sample_exact, to_configuration, write_csv, ConfigMap};

use crate::report::{
    Check, ConditionalEntry, ObservableEntry, RunReport, SampleFreq, TaskReport, ToleranceEcho,
};
use crate::scenario::{Compiled, InputError, InputResult, ScenarioFile, Task, Tolerances};

pub struct Flags {
    pub out: PathBuf,
    pub seed: Option<u64>,
    pub tol: Option<f64>,
    pub budget: Option<usize>,
}

/// Seed for the permutation spot checks inside the commutant task.
const HPI_CHECK_SEED: u64 = 2025;
/// Permutations sampled per history in the commutant task.
const HPI_CHECK_PERMS: usize = 5;
/// Binomial tolerance, in standard deviations, for empirical frequencies.
const SAMPLE_SIGMAS: f64 = 5.0;

struct MeasureCache(Option<Result<PathMeasure, String>>);

impl MeasureCache {
    fn get(
        &mut self,
        an: &Analyser,
        dec: &CommutantDecomposition,
        state: &CVector,
        budget: usize,
    ) -> Result<&PathMeasure, String> {
        if self.0.is_none() {
            self.0 = Some(PathMeasure::new(an, dec, state, budget).map_err(|e| e.to_string()));
        }
        self.0.as_ref().unwrap().as_ref().map_err(|e| e.clone())
    }
}

fn prepare_refinement(file: &ScenarioFile, an: &Analyser) -> InputResult<RefinementMap> {
    let spec = file
        .refinement
        .as_ref()
        .ok_or_else(|| InputError("task `refine` requires a refinement block".into()))?;
    let dim = file.dimension;
    let mut splits: BTreeMap<(Time, String), CellSplit> = BTreeMap::new();
    for (time_key, per_label) in &spec.splits {
        let t: f64 = time_key
            .parse()
            .map_err(|_| InputError(format!("invalid refinement time key `{time_key}`")))?;
        for (parent_label, sub_cells) in per_label {
            let split: CellSplit = sub_cells
                .iter()
                .map(|c| {
                    Projector::coordinates(dim, &c.indices)
                        .map(|p| (c.label.clone(), p))
                        .map_err(|e| {
                            InputError(format!(
                                "refinement cell `{}` at time {time_key}: {e}",
                                c.label
                            ))
                        })
                })
                .collect::<InputResult<_>>()?;
            splits.insert((Time::new(t), parent_label.clone()), split);
        }
    }
    let mut extra: Vec<(Time, Partition)> = Vec::new();
    for (time_key, cell_specs) in &spec.extra {
        let t: f64 = time_key
            .parse()
            .map_err(|_| InputError(format!("invalid refinement time key `{time_key}`")))?;
        let cells: Vec<(String, Vec<usize>)> = cell_specs
            .iter()
            .map(|c| (c.label.clone(), c.indices.clone()))
            .collect();
        let part = Partition::from_index_cells(dim, &cells)
            .map_err(|e| InputError(format!("refinement partition at time {time_key}: {e}")))?;
        extra.push((Time::new(t), part));
    }
    refine(an, &splits, &extra).map_err(|e| InputError(format!("invalid refinement: {e}")))
}

pub fn execute(mut file: ScenarioFile, flags: &Flags) -> InputResult<RunReport> {
    if let Some(seed) = flags.seed {
        if let Some(sample) = file.sample.as_mut() {
            sample.seed = seed;
        }
    }
    if let Some(budget) = flags.budget {
        file.budget = Some(budget);
    }
    let tol = file.tolerances(flags.tol);

    let compiled = file.compile()?;
    let dec = compute_commutant(&compiled.analyser, compiled.budget)
        .map_err(|e| InputError(format!("commutant enumeration: {e}")))?;
    if file.tasks.contains(&Task::Sample) && file.sample.is_none() {
        return Err(InputError("task `sample` requires a sample block".into()));
    }
    let refinement = if file.tasks.contains(&Task::Refine) {
        Some(prepare_refinement(&file, &compiled.analyser)?)
    } else {
        None
    };

    let mut residuals: Vec<f64> = Vec::new();
    let mut tasks = Vec::new();
    let mut pm_cache = MeasureCache(None);
    for task in &file.tasks {
        let start = Instant::now();
        let outcome = run_task(
            *task,
            &file,
            &compiled,
            &dec,
            refinement.as_ref(),
            &mut pm_cache,
            tol,
            &flags.out,
        );
        let wall_ms = start.elapsed().as_secs_f64() * 1e3;
        let report = match outcome {
            Ok((mut report, mut checks)) => {
                set_wall(&mut report, wall_ms);
                residuals.append(&mut checks);
                report
            }
            Err(message) => TaskReport::Failed {
                name: task.to_string(),
                error: message,
                wall_ms,
                pass: false,
            },
        };
        tasks.push(report);
    }

    let pass = tasks.iter().all(|t| t.pass());
    let max_residual = residuals.iter().copied().fold(0.0, f64::max);
    Ok(RunReport {
        scenario: file.clone(),
        seed: file.sample.as_ref().map(|s| s.seed),
        tolerances: ToleranceEcho {
            op: tol.op,
            prob: tol.prob,
        },
        tasks,
        max_residual,
        pass,
    })
}

fn set_wall(report: &mut TaskReport, ms: f64) {
    match report {
        TaskReport::Commutant { wall_ms, .. }
        | TaskReport::Probabilities { wall_ms, .. }
        | TaskReport::Conditional { wall_ms, .. }
        | TaskReport::Observables { wall_ms, .. }
        | TaskReport::Sample { wall_ms, .. }
        | TaskReport::Defect { wall_ms, .. }
        | TaskReport::Refine { wall_ms, .. }
        | TaskReport::Logic { wall_ms, .. }
        | TaskReport::Failed { wall_ms, .. } => *wall_ms = ms,
    }
}

type TaskOutcome = Result<(TaskReport, Vec<f64>), String>;

#[allow(clippy::too_many_arguments)]
fn run_task(
    task: Task,
    file: &ScenarioFile,
    compiled: &Compiled,
    dec: &CommutantDecomposition,
    refinement: Option<&RefinementMap>,
    pm_cache: &mut MeasureCache,
    tol: Tolerances,
    out_dir: &Path,
) -> TaskOutcome {
    match task {
        Task::Commutant => task_commutant(compiled, dec, tol),
        Task::Probabilities => task_probabilities(compiled, dec, pm_cache, tol),
        Task::Conditional => task_conditional(compiled, dec, pm_cache, tol),
        Task::Observables => task_observables(compiled, dec, pm_cache, tol),
        Task::Sample => task_sample(file, compiled, dec, pm_cache, out_dir),
        Task::Defect => task_defect(compiled, tol),
        Task::Refine => task_refine(compiled, dec, refinement, tol),
        Task::Logic => task_logic(compiled, dec, pm_cache, tol),
    }
}

fn task_commutant(
    compiled: &Compiled,
    dec: &CommutantDecomposition,
    tol: Tolerances,
) -> TaskOutcome {
    let report =
        check_hpi_characterizations(&compiled.analyser, dec, HPI_CHECK_PERMS, HPI_CHECK_SEED)
            .map_err(|e| e.to_string())?;
    let distance = Check::new(report.hpi_nperp_distance, tol.op);
    let ordered = Check::new(report.max_ordered_residual, tol.op);
    let permuted = Check::new(report.max_permutation_residual, tol.op);
    let pass = distance.pass && ordered.pass && permuted.pass;
    Ok((
        TaskReport::Commutant {
            dim_h_pi: dec.h_pi().dim(),
            dim_n: dec.n_space().dim(),
            surviving_histories: dec.surviving_histories().count(),
            hpi_nperp_distance: distance,
            ordered_product_residual: ordered,
            permutation_residual: permuted,
            wall_ms: 0.0,
            pass,
        },
        vec![distance.value, ordered.value, permuted.value],
    ))
}

fn task_probabilities(
    compiled: &Compiled,
    dec: &CommutantDecomposition,
    pm_cache: &mut MeasureCache,
    tol: Tolerances,
) -> TaskOutcome {
    let pm = pm_cache.get(&compiled.analyser, dec, &compiled.state, compiled.budget)?;
    let space = pm.space();
    let size = space.size().map_err(|e| e.to_string())?;
    let mut per_history = BTreeMap::new();
    let mut total = 0.0;
    let mut dual_gap: f64 = 0.0;
    for flat in 0..size {
        let p = pm.probability(flat);
        total += p;
        per_history.insert(
            space.history_labels(flat).join(","),
            pm.display_probability(flat),
        );
        // product form for the dual-evaluation gap
        let mut v = pm.state().clone();
        for (i, &a) in space.decode(flat).iter().enumerate() {
            v = compiled.analyser.partition_at(i).cells()[a].apply(&v);
        }
        dual_gap = dual_gap.max((p - v.norm_squared()).abs());
    }
    let mut per_event = BTreeMap::new();
    for (name, event) in &compiled.events {
        let p = event_probability(pm, event).map_err(|e| e.to_string())?;
        per_event.insert(name.clone(), p);
    }
    let mass_error = Check::new((total - 1.0).abs(), tol.prob);
    let dual = Check::new(dual_gap, tol.prob);
    let in_range = per_history
        .values()
        .chain(per_event.values())
        .all(|&p| (0.0..=1.0 + tol.prob).contains(&p));
    let pass = mass_error.pass && dual.pass && in_range;
    Ok((
        TaskReport::Probabilities {
            per_history,
            total_mass_error: mass_error,
            dual_form_gap: dual,
            per_event,
            wall_ms: 0.0,
            pass,
        },
        vec![mass_error.value, dual.value],
    ))
}

fn task_conditional(
    compiled: &Compiled,
    dec: &CommutantDecomposition,
    pm_cache: &mut MeasureCache,
    tol: Tolerances,
) -> TaskOutcome {
    let pm = pm_cache.get(&compiled.analyser, dec, &compiled.state, compiled.budget)?;
    let mut table = Vec::new();
    let mut checks = Vec::new();
    let mut pass = true;
    for (name_a, a) in &compiled.events {
        let pa = event_probability(pm, a).map_err(|e| e.to_string())?;
        if pa <= tol.prob {
            continue;
        }
        for (name_b, b) in &compiled.events {
            if name_a == name_b {
                continue;
            }
            let pab = event_probability(pm, &a.intersection(b).map_err(|e| e.to_string())?)
                .map_err(|e| e.to_string())?;
            let ratio = pab / pa;
            let projected = event_projector(dec, a)
                .map_err(|e| e.to_string())?
                .apply(pm.state());
            let pm2 = PathMeasure::new(&compiled.analyser, dec, &projected, compiled.budget)
                .map_err(|e| e.to_string())?;
            let via_projection = event_probability(&pm2, b).map_err(|e| e.to_string())?;
            let gap = Check::new((ratio - via_projection).abs(), tol.prob);
            pass &= gap.pass;
            checks.push(gap.value);
            table.push(ConditionalEntry {
                given: name_a.clone(),
                event: name_b.clone(),
                value: ratio,
                gap,
            });
        }
    }
    Ok((
        TaskReport::Conditional {
            table,
            wall_ms: 0.0,
            pass,
        },
        checks,
    ))
}

fn task_observables(
    compiled: &Compiled,
    dec: &CommutantDecomposition,
    pm_cache: &mut MeasureCache,
    tol: Tolerances,
) -> TaskOutcome {
    let pm = pm_cache.get(&compiled.analyser, dec, &compiled.state, compiled.budget)?;
    let mut entries = Vec::new();
    let mut checks = Vec::new();
    let mut pass = true;
    let mut operators = Vec::new();
    for (name, values) in &compiled.observables {
        let obs = observable(dec, values).map_err(|e| e.to_string())?;
        let via_operator = obs
            .expectation(&compiled.state)
            .map_err(|e| e.to_string())?;
        let direct = measure_expectation(pm, values).map_err(|e| e.to_string())?;
        let gap = Check::new((via_operator - direct).abs(), tol.prob);
        pass &= gap.pass;
        checks.push(gap.value);
        entries.push(ObservableEntry {
            name: name.clone(),
            expectation: via_operator,
            expectation_gap: gap,
        });
        operators.push(obs);
    }
    let mut worst: f64 = 0.0;
    for i in 0..operators.len() {
        for j in (i + 1)..operators.len() {
            let (f, g) = (operators[i].matrix(), operators[j].matrix());
            worst = worst.max(operator_norm(&(f * g - g * f)));
        }
    }
    let commutator = Check::new(worst, tol.op);
    pass &= commutator.pass;
    checks.push(commutator.value);
    Ok((
        TaskReport::Observables {
            entries,
            max_restricted_commutator: commutator,
            wall_ms: 0.0,
            pass,
        },
        checks,
    ))
}

fn task_sample(
    file: &ScenarioFile,
    compiled: &Compiled,
    dec: &CommutantDecomposition,
    pm_cache: &mut MeasureCache,
    out_dir: &Path,
) -> TaskOutcome {
    let spec = file.sample.as_ref().expect("checked before running tasks");
    let pm = pm_cache.get(&compiled.analyser, dec, &compiled.state, compiled.budget)?;
    let trajs = sample_exact(pm, spec.n, spec.seed).map_err(|e| e.to_string())?;
    let space = pm.space().clone();

    let pairs: Vec<(Time, Time)> = match &spec.pairs {
        Some(list) => list
            .iter()
            .map(|&[s, t]| (Time::new(s), Time::new(t)))
            .collect(),
        None => space
            .times()
            .windows(2)
            .map(|w| (w[0].clone(), w[1].clone()))
            .collect(),
    };
    let stats = record_statistics(&space, &trajs, &pairs, &compiled.events, spec.seed)
        .map_err(|e| e.to_string())?;

    let mut event_freqs = BTreeMap::new();
    let mut checks = Vec::new();
    let mut pass = true;
    for (name, empirical) in &stats.event_freqs {
        let event = &compiled
            .events
            .iter()
            .find(|(n, _)| n == name)
            .expect("stat names come from compiled events")
            .1;
        let expected = event_probability(pm, event).map_err(|e| e.to_string())?;
        let sigma = (expected * (1.0 - expected) / spec.n as f64).sqrt();
        let ok = if sigma == 0.0 {
            (empirical - expected).abs() == 0.0
        } else {
            (empirical - expected).abs() < SAMPLE_SIGMAS * sigma
        };
        pass &= ok;
        checks.push((empirical - expected).abs());
        event_freqs.insert(
            name.clone(),
            SampleFreq {
                empirical: *empirical,
                expected,
                sigma,
                pass: ok,
            },
        );
    }
    let agreement: BTreeMap<String, f64> = stats
        .agreement
        .iter()
        .map(|((s, t), f)| (format!("{s}|{t}"), *f))
        .collect();

    let csv_name = "trajectories.csv";
    let csv_path = out_dir.join(csv_name);
    let decorated = if spec.config.is_empty() {
        trajs
    } else {
        to_configuration(&space, &trajs, &ConfigMap::new(spec.config.clone()))
            .map_err(|e| e.to_string())?
    };
    let csv_file = std::fs::File::create(&csv_path)
        .map_err(|e| format!("cannot write {}: {e}", csv_path.display()))?;
    write_csv(&space, &decorated, std::io::BufWriter::new(csv_file))
        .map_err(|e| format!("cannot write {}: {e}", csv_path.display()))?;

    Ok((
        TaskReport::Sample {
            n: spec.n,
            seed: spec.seed,
            csv: Some(csv_name.to_string()),
            event_freqs,
            agreement,
            wall_ms: 0.0,
            pass,
        },
        checks,
    ))
}

fn task_defect(compiled: &Compiled, tol: Tolerances) -> TaskOutcome {
    let report = defect_report(&compiled.analyser, tol.op).map_err(|e| e.to_string())?;
    let mut defects = BTreeMap::new();
    for (s, t, b, v) in &report.defects {
        defects.insert(format!("{s}->{t}|{b}"), *v);
    }
    let norm_bound = Check::new(report.max_defect, 2.0 + 1e-12);
    let verdict_consistent = (report.max_defect < tol.op) == (report.max_commutator < tol.op);
    let pass = norm_bound.pass && verdict_consistent;
    Ok((
        TaskReport::Defect {
            defects,
            max_defect: report.max_defect,
            max_commutator: report.max_commutator,
            norm_bound,
            verdict: match report.verdict {
                Verdict::Commuting => "commuting".into(),
                Verdict::NonCommuting => "non-commuting".into(),
            },
            verdict_consistent,
            wall_ms: 0.0,
            pass,
        },
        Vec::new(),
    ))
}

fn task_refine(
    compiled: &Compiled,
    dec: &CommutantDecomposition,
    refinement: Option<&RefinementMap>,
    tol: Tolerances,
) -> TaskOutcome {
    let rm = refinement.expect("prepared before running tasks");
    let child_dec = compute_commutant(rm.child(), compiled.budget).map_err(|e| e.to_string())?;
    let events: Vec<Event> = if compiled.events.is_empty() {
        vec![Event::full(&compiled.space).map_err(|e| e.to_string())?]
    } else {
        compiled.events.iter().map(|(_, e)| e.clone()).collect()
    };
    let check =
        check_refinement_identity(rm, dec, &child_dec, &events).map_err(|e| e.to_string())?;
    let fold = |f: fn(&histspace::refinement::EventResidual) -> f64| {
        check.per_event.iter().map(f).fold(0.0, f64::max)
    };
    let operator = Check::new(fold(|e| e.operator), tol.op);
    let commutation = Check::new(fold(|e| e.commutation), tol.op);
    let subspace = Check::new(fold(|e| e.subspace), tol.op);
    let containment = Check::new(check.hpi_containment, tol.op);
    let pass = operator.pass && commutation.pass && subspace.pass && containment.pass;
    Ok((
        TaskReport::Refine {
            events_checked: events.len(),
            operator_residual: operator,
            commutation_residual: commutation,
            subspace_distance: subspace,
            hpi_containment: containment,
            wall_ms: 0.0,
            pass,
        },
        vec![
            operator.value,
            commutation.value,
            subspace.value,
            containment.value,
        ],
    ))
}

fn task_logic(
    compiled: &Compiled,
    dec: &CommutantDecomposition,
    pm_cache: &mut MeasureCache,
    tol: Tolerances,
) -> TaskOutcome {
    let pm = pm_cache.get(&compiled.analyser, dec, &compiled.state, compiled.budget)?;
    let events: Vec<Event> = compiled.events.iter().map(|(_, e)| e.clone()).collect();
    let sigma = sigma_ideal_checks(pm, &events).map_err(|e| e.to_string())?;
    let mut pairs = Vec::new();
    for i in 0..events.len() {
        for j in (i + 1)..events.len() {
            pairs.push((events[i].clone(), events[j].clone()));
        }
    }
    let pvm = check_pvm_axioms(dec, &pairs).map_err(|e| e.to_string())?;
    let additivity = Check::new(pvm.max_additivity, tol.op);
    let multiplicativity = Check::new(pvm.max_multiplicativity, tol.op);
    let complement = Check::new(pvm.max_complement, tol.op);
    let subset = Check::new(sigma.max_subset_leak, tol.prob);
    let union = Check::new(sigma.max_union_leak, tol.prob);
    let intersection = Check::new(sigma.max_intersection_leak, tol.prob);
    let pass = additivity.pass
        && multiplicativity.pass
        && complement.pass
        && subset.pass
        && union.pass
        && intersection.pass;
    Ok((
        TaskReport::Logic {
            pvm_additivity: additivity,
            pvm_multiplicativity: multiplicativity,
            pvm_complement: complement,
            sigma_subset_leak: subset,
            sigma_union_leak: union,
            sigma_intersection_leak: intersection,
            wall_ms: 0.0,
            pass,
        },
        vec![
            additivity.value,
            multiplicativity.value,
            complement.value,
            subset.value,
            union.value,
            intersection.value,
        ],
    ))
}
