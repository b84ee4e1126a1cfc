//! Trajectory generation in label space.
//!
//! Two samplers with the same single-time marginals but very different
//! joint laws:
//!
//! * [`sample_exact`] draws full histories from the Born path measure by
//!   sequential conditional sampling in time order: project, renormalize,
//!   draw the next label from the collapse weights. For states in the
//!   commutation subspace this chain rule reproduces the path measure
//!   exactly, so correlations across time (records of the past) come out
//!   right.
//! * [`sample_independent`] draws each time's label independently from the
//!   single-time Born weights. Marginals match, joints generally do not;
//!   this is the minimal "equivariance-only" sampler kept for contrast.
//!
//! Randomness is a counter-based stream cipher keyed by `(seed, trajectory
//! index)` with the time index consumed in order, so trajectories can be
//! generated in parallel with output identical to the sequential run.

use std::collections::BTreeMap;
use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::analyser::{Analyser, Time};
use crate::error::{Error, Result};
use crate::histories::{Event, HistorySpace, PathMeasure};
use crate::linalg::{CVector, C64};
use crate::tol;

/// A realized history: one label index per time, optionally decorated with
/// configuration points.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub labels: Vec<usize>,
    pub points: Option<Vec<Vec<f64>>>,
}

impl Trajectory {
    pub fn label_strings<'a>(&self, space: &'a HistorySpace) -> Vec<&'a str> {
        self.labels
            .iter()
            .enumerate()
            .map(|(i, &a)| space.labels_at(i)[a].as_str())
            .collect()
    }

    pub fn flat_index(&self, space: &HistorySpace) -> Result<usize> {
        space.flat_index(&self.labels)
    }
}

/// Maps labels to configuration points. Whether each point actually lies
/// in the region its label describes is the caller's modeling obligation;
/// `region_note` records that intent.
#[derive(Debug, Clone, Default)]
pub struct ConfigMap {
    points: BTreeMap<String, Vec<f64>>,
    pub region_note: Option<String>,
}

impl ConfigMap {
    pub fn new(points: BTreeMap<String, Vec<f64>>) -> Self {
        Self {
            points,
            region_note: None,
        }
    }

    pub fn point(&self, label: &str) -> Option<&[f64]> {
        self.points.get(label).map(|v| v.as_slice())
    }
}

/// Empirical statistics of a trajectory batch.
#[derive(Debug, Clone)]
pub struct SampleReport {
    pub n_paths: usize,
    pub rng_seed: u64,
    /// Named event → empirical frequency.
    pub event_freqs: Vec<(String, f64)>,
    /// Per time pair: empirical probability that the labels agree.
    pub agreement: Vec<((Time, Time), f64)>,
}

fn trajectory_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index + 1);
    rng
}

fn pick(weights: &[f64], u: f64) -> usize {
    let total: f64 = weights.iter().sum();
    let mut acc = 0.0;
    let target = u * total;
    for (i, w) in weights.iter().enumerate() {
        acc += w;
        if target < acc {
            return i;
        }
    }
    weights.len() - 1
}

/// Draws `n` i.i.d. full histories from the path measure by the exact
/// chain rule, deterministically in `(seed, draw index)`.
pub fn sample_exact(pm: &PathMeasure, n: usize, seed: u64) -> Result<Vec<Trajectory>> {
    if pm.total_mass() < tol::PROB {
        return Err(Error::DegenerateMeasure(pm.total_mass()));
    }
    let an = pm.analyser().clone();
    let dim = an.dim();
    let zero_cut = tol::vec(dim);
    let start = pm.state().clone();
    (0..n)
        .into_par_iter()
        .map(|i| {
            let mut rng = trajectory_rng(seed, i as u64);
            let mut state = start.clone();
            let mut labels = Vec::with_capacity(an.len());
            for (_, part) in an.iter() {
                let projections: Vec<CVector> =
                    part.cells().iter().map(|p| p.apply(&state)).collect();
                let weights: Vec<f64> = projections.iter().map(|v| v.norm_squared()).collect();
                let chosen = pick(&weights, rng.random::<f64>());
                labels.push(chosen);
                let norm = weights[chosen].sqrt();
                if norm < zero_cut {
                    // numerically dead branch; weights made this
                    // (near-)impossible, keep the state unrenormalized
                    state = projections[chosen].clone();
                } else {
                    state = &projections[chosen] / C64::new(norm, 0.0);
                }
            }
            Ok(Trajectory {
                labels,
                points: None,
            })
        })
        .collect()
}

/// Draws each time's label independently from the single-time Born
/// weights `||p^t_a φ̂||²`.
pub fn sample_independent(
    an: &Analyser,
    phi: &CVector,
    n: usize,
    seed: u64,
) -> Result<Vec<Trajectory>> {
    let norm = phi.norm();
    if norm == 0.0 {
        return Err(Error::ZeroState);
    }
    let state = phi / C64::new(norm, 0.0);
    let weights_per_time: Vec<Vec<f64>> = an
        .iter()
        .map(|(_, part)| {
            part.cells()
                .iter()
                .map(|p| p.apply(&state).norm_squared())
                .collect()
        })
        .collect();
    Ok((0..n)
        .into_par_iter()
        .map(|i| {
            let mut rng = trajectory_rng(seed, i as u64);
            let labels = weights_per_time
                .iter()
                .map(|w| pick(w, rng.random::<f64>()))
                .collect();
            Trajectory {
                labels,
                points: None,
            }
        })
        .collect())
}

/// Per-pair label agreement frequencies plus empirical frequencies of the
/// supplied named events.
pub fn record_statistics(
    space: &HistorySpace,
    trajs: &[Trajectory],
    pairs: &[(Time, Time)],
    events: &[(String, Event)],
    rng_seed: u64,
) -> Result<SampleReport> {
    if trajs.is_empty() {
        return Err(Error::EmptyTrajectories);
    }
    let n = trajs.len() as f64;
    let mut agreement = Vec::with_capacity(pairs.len());
    for (s, t) in pairs {
        let si = space.time_index(s)?;
        let ti = space.time_index(t)?;
        let agree = trajs
            .iter()
            .filter(|tr| space.labels_at(si)[tr.labels[si]] == space.labels_at(ti)[tr.labels[ti]])
            .count();
        agreement.push(((s.clone(), t.clone()), agree as f64 / n));
    }
    let mut event_freqs = Vec::with_capacity(events.len());
    for (name, event) in events {
        if event.space() != space {
            return Err(Error::EventSpaceMismatch);
        }
        let hits = trajs
            .iter()
            .map(|tr| tr.flat_index(space))
            .collect::<Result<Vec<_>>>()?
            .into_iter()
            .filter(|f| event.contains(*f))
            .count();
        event_freqs.push((name.clone(), hits as f64 / n));
    }
    Ok(SampleReport {
        n_paths: trajs.len(),
        rng_seed,
        event_freqs,
        agreement,
    })
}

/// Attaches configuration points `x_t = x(ω_t)`; label content is left
/// unchanged.
pub fn to_configuration(
    space: &HistorySpace,
    trajs: &[Trajectory],
    cmap: &ConfigMap,
) -> Result<Vec<Trajectory>> {
    trajs
        .iter()
        .map(|tr| {
            let points = tr
                .labels
                .iter()
                .enumerate()
                .map(|(i, &a)| {
                    let label = &space.labels_at(i)[a];
                    cmap.point(label)
                        .map(|p| p.to_vec())
                        .ok_or_else(|| Error::MissingConfigLabel(label.clone()))
                })
                .collect::<Result<Vec<_>>>()?;
            Ok(Trajectory {
                labels: tr.labels.clone(),
                points: Some(points),
            })
        })
        .collect()
}

/// Writes trajectories as CSV: `traj_id`, one label column per time, and,
/// when configuration points are attached, one `_x` column per time
/// (multi-dimensional points joined by `;`).
pub fn write_csv<W: Write>(
    space: &HistorySpace,
    trajs: &[Trajectory],
    mut out: W,
) -> std::io::Result<()> {
    let with_points = trajs.iter().any(|t| t.points.is_some());
    let mut header = vec!["traj_id".to_string()];
    for t in space.times() {
        header.push(format!("t_{}", t.key()));
    }
    if with_points {
        for t in space.times() {
            header.push(format!("t_{}_x", t.key()));
        }
    }
    writeln!(out, "{}", header.join(","))?;
    for (id, tr) in trajs.iter().enumerate() {
        let mut row = vec![id.to_string()];
        for (i, &a) in tr.labels.iter().enumerate() {
            row.push(space.labels_at(i)[a].clone());
        }
        if with_points {
            match &tr.points {
                Some(points) => {
                    for p in points {
                        let cell = p
                            .iter()
                            .map(|x| format!("{x}"))
                            .collect::<Vec<_>>()
                            .join(";");
                        row.push(cell);
                    }
                }
                None => {
                    for _ in space.times() {
                        row.push(String::new());
                    }
                }
            }
        }
        writeln!(out, "{}", row.join(","))?;
    }
    Ok(())
}
