//! Built-in scenarios, code-generated into the ordinary file schema so a
//! report's echoed scenario re-runs byte-identically.

use std::collections::BTreeMap;

use histspace::analyser::Builtin;

use crate::scenario::{
    CellSpec, CylinderConstraint, HamiltonianSpec, PartitionSpec, SampleSpec, ScenarioFile, Task,
};

pub struct BuiltinEntry {
    pub name: &'static str,
    pub summary: &'static str,
}

/// Stable listing for `histspace list`.
pub fn catalog() -> Vec<BuiltinEntry> {
    Builtin::catalog()
        .into_iter()
        .map(|info| BuiltinEntry {
            name: info.name,
            summary: info.summary,
        })
        .collect()
}

fn cells(dim: usize, groups: &[(&str, Vec<usize>)]) -> Vec<CellSpec> {
    let _ = dim;
    groups
        .iter()
        .map(|(label, indices)| CellSpec {
            label: label.to_string(),
            indices: indices.clone(),
        })
        .collect()
}

fn state_pairs(name: &str) -> Vec<[f64; 2]> {
    let (_, phi) = histspace::analyser::scenario(name, &BTreeMap::new()).unwrap();
    phi.iter().map(|c| [c.re, c.im]).collect()
}

fn q2() -> ScenarioFile {
    let w = std::f64::consts::FRAC_PI_4;
    ScenarioFile {
        dimension: 2,
        hamiltonian: Some(HamiltonianSpec::Dense {
            matrix: vec![vec![[0.0, 0.0], [0.0, -w]], vec![[0.0, w], [0.0, 0.0]]],
        }),
        state: vec![[1.0, 0.0], [0.0, 0.0]],
        times: vec![0.0, 1.0],
        partitions: PartitionSpec::Heisenberg {
            base: cells(2, &[("+", vec![0]), ("-", vec![1])]),
        },
        events: BTreeMap::from([
            (
                "plus_at_0".to_string(),
                vec![CylinderConstraint {
                    time: 0.0,
                    labels: vec!["+".into()],
                }],
            ),
            (
                "plus_at_1".to_string(),
                vec![CylinderConstraint {
                    time: 1.0,
                    labels: vec!["+".into()],
                }],
            ),
        ]),
        observables: BTreeMap::new(),
        tasks: vec![Task::Commutant, Task::Defect],
        sample: None,
        refinement: None,
        tolerances: None,
        budget: None,
    }
}

fn d4() -> ScenarioFile {
    let mut partitions = BTreeMap::new();
    partitions.insert(
        "0".to_string(),
        cells(4, &[("1", vec![0, 1]), ("2", vec![2, 3])]),
    );
    partitions.insert(
        "1".to_string(),
        cells(4, &[("1", vec![0, 2]), ("2", vec![1, 3])]),
    );
    let mut observable = BTreeMap::new();
    for s in ["1", "2"] {
        for t in ["1", "2"] {
            observable.insert(format!("{s},{t}"), if s == "1" { 1.0 } else { 0.0 });
        }
    }
    let mut splits = BTreeMap::new();
    splits.insert(
        "0".to_string(),
        BTreeMap::from([
            (
                "1".to_string(),
                cells(4, &[("1a", vec![0]), ("1b", vec![1])]),
            ),
            (
                "2".to_string(),
                cells(4, &[("2a", vec![2]), ("2b", vec![3])]),
            ),
        ]),
    );
    ScenarioFile {
        dimension: 4,
        hamiltonian: None,
        state: vec![[0.5, 0.0]; 4],
        times: vec![0.0, 1.0],
        partitions: PartitionSpec::Explicit { cells: partitions },
        events: BTreeMap::from([
            (
                "first_1".to_string(),
                vec![CylinderConstraint {
                    time: 0.0,
                    labels: vec!["1".into()],
                }],
            ),
            (
                "second_1".to_string(),
                vec![CylinderConstraint {
                    time: 1.0,
                    labels: vec!["1".into()],
                }],
            ),
        ]),
        observables: BTreeMap::from([("first_is_1".to_string(), observable)]),
        tasks: vec![
            Task::Commutant,
            Task::Probabilities,
            Task::Conditional,
            Task::Observables,
            Task::Refine,
            Task::Logic,
        ],
        sample: None,
        refinement: Some(crate::scenario::RefinementSpec {
            splits,
            extra: BTreeMap::new(),
        }),
        tolerances: None,
        budget: None,
    }
}

fn tri9() -> ScenarioFile {
    let mut partitions = BTreeMap::new();
    partitions.insert(
        "1".to_string(),
        cells(9, &[("1", vec![0, 1, 2]), ("2", (3..9).collect())]),
    );
    partitions.insert(
        "2".to_string(),
        cells(9, &[("1", vec![0]), ("2", (1..9).collect())]),
    );
    let third = 1.0 / 3.0;
    ScenarioFile {
        dimension: 9,
        hamiltonian: None,
        state: vec![[third, 0.0]; 9],
        times: vec![1.0, 2.0],
        partitions: PartitionSpec::Explicit { cells: partitions },
        events: BTreeMap::from([
            (
                "level1".to_string(),
                vec![CylinderConstraint {
                    time: 1.0,
                    labels: vec!["1".into()],
                }],
            ),
            (
                "level2".to_string(),
                vec![CylinderConstraint {
                    time: 2.0,
                    labels: vec!["1".into()],
                }],
            ),
            (
                "escaped_then_back".to_string(),
                vec![
                    CylinderConstraint {
                        time: 1.0,
                        labels: vec!["2".into()],
                    },
                    CylinderConstraint {
                        time: 2.0,
                        labels: vec!["1".into()],
                    },
                ],
            ),
        ]),
        observables: BTreeMap::new(),
        tasks: vec![Task::Commutant, Task::Probabilities, Task::Logic],
        sample: None,
        refinement: None,
        tolerances: None,
        budget: None,
    }
}

fn static_5() -> ScenarioFile {
    let p: f64 = 0.7;
    ScenarioFile {
        dimension: 2,
        hamiltonian: Some(HamiltonianSpec::Zero),
        state: vec![[p.sqrt(), 0.0], [(1.0 - p).sqrt(), 0.0]],
        times: (0..5).map(|k| k as f64).collect(),
        partitions: PartitionSpec::Heisenberg {
            base: cells(2, &[("1", vec![0]), ("2", vec![1])]),
        },
        events: BTreeMap::from([(
            "starts_1".to_string(),
            vec![CylinderConstraint {
                time: 0.0,
                labels: vec!["1".into()],
            }],
        )]),
        observables: BTreeMap::new(),
        tasks: vec![Task::Commutant, Task::Probabilities, Task::Sample],
        sample: Some(SampleSpec {
            n: 100_000,
            seed: 20_250_810,
            config: BTreeMap::from([("1".to_string(), vec![0.0]), ("2".to_string(), vec![1.0])]),
            pairs: None,
        }),
        refinement: None,
        tolerances: None,
        budget: None,
    }
}

fn pgrid() -> ScenarioFile {
    let sites = 16usize;
    ScenarioFile {
        dimension: sites,
        hamiltonian: Some(HamiltonianSpec::Laplacian),
        state: state_pairs("PGRID"),
        times: vec![0.0, 1.0],
        partitions: PartitionSpec::Heisenberg {
            base: cells(
                sites,
                &[
                    ("L", (0..sites / 2).collect()),
                    ("R", (sites / 2..sites).collect()),
                ],
            ),
        },
        events: BTreeMap::new(),
        // the packet sits mostly outside the commutation subspace, so the
        // default tasks are the structural diagnostics
        observables: BTreeMap::new(),
        tasks: vec![Task::Commutant, Task::Defect],
        sample: None,
        refinement: None,
        tolerances: None,
        budget: None,
    }
}

/// Expands a builtin name into a full scenario document.
pub fn expand(name: &str) -> Option<ScenarioFile> {
    match name.to_ascii_uppercase().as_str() {
        "Q2" => Some(q2()),
        "D4" => Some(d4()),
        "TRI9" => Some(tri9()),
        "STATIC" => Some(static_5()),
        "PGRID" => Some(pgrid()),
        _ => None,
    }
}
