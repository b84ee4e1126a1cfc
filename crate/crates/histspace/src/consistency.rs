//! Quantitative converse machinery: how far two time partitions are from
//! commuting.
//!
//! For times `s < t` and a label `b` at `t`, the defect operator is
//! `Σ_a Q_a` with `Q_a = p^s_a p^t_b (I - p^s_a)`. Its operator norm
//! vanishes exactly when the additivity identity
//! `Σ_a ||p^t_b p^s_a φ||² = ||p^t_b φ||²` holds for every state, which in
//! turn forces `p^s_a` and `p^t_b` to commute; the norm is bounded by 2 in
//! general. When the partitions do not commute, a state lying inside one
//! cell at the earlier time still carries a consistent two-time probability
//! table `P(X_s = a, X_t = b) = ||p^t_b φ̂||² δ_{a,c}`, the exceptional
//! measure.

use std::collections::BTreeMap;

use crate::analyser::{Analyser, Time};
use crate::error::{Error, Result};
use crate::linalg::{operator_norm, CMatrix, CVector, C64};
use crate::tol;

/// Operator norm of the defect `Σ_a p^s_a p^t_b (I - p^s_a)`.
pub fn consistency_defect(an: &Analyser, s: &Time, t: &Time, b: &str) -> Result<f64> {
    if s >= t {
        return Err(Error::TimeOrder(s.key().to_string(), t.key().to_string()));
    }
    let d = an.dim();
    let pt_b = an.cell(t, b)?;
    let id = CMatrix::identity(d, d);
    let mut sum = CMatrix::zeros(d, d);
    for (_, ps_a) in an.partition(s)?.iter() {
        sum += ps_a.matrix() * pt_b.matrix() * (&id - ps_a.matrix());
    }
    Ok(operator_norm(&sum))
}

/// `|Σ_a ||p^t_b p^s_a φ̂||² - ||p^t_b φ̂||²|`, the additivity residual of
/// one state. Bounded above by twice the consistency defect.
pub fn additivity_residual(
    an: &Analyser,
    s: &Time,
    t: &Time,
    b: &str,
    phi: &CVector,
) -> Result<f64> {
    if s >= t {
        return Err(Error::TimeOrder(s.key().to_string(), t.key().to_string()));
    }
    let norm = phi.norm();
    if norm == 0.0 {
        return Err(Error::ZeroState);
    }
    let state = phi / C64::new(norm, 0.0);
    let pt_b = an.cell(t, b)?;
    let direct = pt_b.apply(&state).norm_squared();
    let mut split = 0.0;
    for (_, ps_a) in an.partition(s)?.iter() {
        split += pt_b.apply(&ps_a.apply(&state)).norm_squared();
    }
    Ok((split - direct).abs())
}

/// The exceptional two-time table `P(X_s = a, X_t = b) = ||p^t_b φ̂||²
/// δ_{a,c}` for a state inside the cell `c` at the earlier time.
///
/// The table sums to one and reproduces both single-time Born marginals;
/// those identities are re-verified before returning.
pub fn exceptional_two_time_measure(
    an: &Analyser,
    s: &Time,
    t: &Time,
    phi: &CVector,
    c: &str,
) -> Result<BTreeMap<(String, String), f64>> {
    if s >= t {
        return Err(Error::TimeOrder(s.key().to_string(), t.key().to_string()));
    }
    let norm = phi.norm();
    if norm == 0.0 {
        return Err(Error::ZeroState);
    }
    let state = phi / C64::new(norm, 0.0);
    let cell_c = an.cell(s, c)?;
    let residual = (&state - cell_c.apply(&state)).norm();
    if residual > tol::vec(an.dim()) {
        return Err(Error::StateOutsideCell {
            time: s.key().to_string(),
            label: c.to_string(),
            residual,
        });
    }
    let mut table = BTreeMap::new();
    for (a, _) in an.partition(s)?.iter() {
        for (b, pt_b) in an.partition(t)?.iter() {
            let weight = if a == c {
                pt_b.apply(&state).norm_squared()
            } else {
                0.0
            };
            table.insert((a.clone(), b.clone()), weight);
        }
    }
    let mass: f64 = table.values().sum();
    if (mass - 1.0).abs() > 1e-12 {
        return Err(Error::MassDeficit { mass });
    }
    // marginal identities of the table
    for (a, _) in an.partition(s)?.iter() {
        let row: f64 = an
            .partition(t)?
            .labels()
            .iter()
            .map(|b| table[&(a.clone(), b.clone())])
            .sum();
        let expected = if a == c { 1.0 } else { 0.0 };
        if (row - expected).abs() > 1e-12 {
            return Err(Error::MassDeficit { mass: row });
        }
    }
    for (b, pt_b) in an.partition(t)?.iter() {
        let col: f64 = an
            .partition(s)?
            .labels()
            .iter()
            .map(|a| table[&(a.clone(), b.clone())])
            .sum();
        let born = pt_b.apply(&state).norm_squared();
        if (col - born).abs() > 1e-12 {
            return Err(Error::MassDeficit { mass: col });
        }
    }
    Ok(table)
}

/// Commutation verdict of a defect scan.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Commuting,
    NonCommuting,
}

/// Defect norms per `(s, t, b)` triple plus the worst cell commutator.
#[derive(Debug, Clone)]
pub struct DefectReport {
    /// `(s, t, b, ||Σ_a Q_a||)` for every ordered time pair and label.
    pub defects: Vec<(Time, Time, String, f64)>,
    pub max_defect: f64,
    /// Worst `||[p^s_a, p^t_b]||` over all pairs.
    pub max_commutator: f64,
    pub verdict: Verdict,
}

/// Scans every ordered time pair of the analyser.
///
/// The verdict is `Commuting` exactly when every defect norm and every
/// cell commutator stays below `tolerance`.
pub fn defect_report(an: &Analyser, tolerance: f64) -> Result<DefectReport> {
    let times = an.times().to_vec();
    let mut defects = Vec::new();
    let mut max_defect: f64 = 0.0;
    let mut max_commutator: f64 = 0.0;
    for i in 0..times.len() {
        for j in (i + 1)..times.len() {
            let (s, t) = (&times[i], &times[j]);
            for b in an.partition(t)?.labels().to_vec() {
                let value = consistency_defect(an, s, t, &b)?;
                max_defect = max_defect.max(value);
                defects.push((s.clone(), t.clone(), b, value));
            }
            for (_, ps_a) in an.partition(s)?.iter() {
                for (_, pt_b) in an.partition(t)?.iter() {
                    let comm = ps_a.matrix() * pt_b.matrix() - pt_b.matrix() * ps_a.matrix();
                    max_commutator = max_commutator.max(operator_norm(&comm));
                }
            }
        }
    }
    let verdict = if max_defect < tolerance && max_commutator < tolerance {
        Verdict::Commuting
    } else {
        Verdict::NonCommuting
    };
    Ok(DefectReport {
        defects,
        max_defect,
        max_commutator,
        verdict,
    })
}
