//! The finite history space `Ω`, events, the Born path measure and its
//! event PVM, conditional probabilities and observables.
//!
//! With finitely many times and finitely many labels per time, `Ω` is the
//! Cartesian product of the label sets and every subset is an event. For a
//! state `φ` in the commutation subspace the path measure is
//! `P_φ(ω) = ||p_ω φ̂||²` where `p_ω` is the joint history projector, and
//! the same number comes out of the time-ordered product
//! `||p^{t_k}_{a_k} ⋯ p^{t_1}_{a_1} φ̂||²`; both routes are computed and
//! compared wherever probabilities are produced.

use std::collections::BTreeSet;
use std::sync::Arc;

use rayon::prelude::*;

use crate::analyser::{Analyser, Time};
use crate::commutant::{event_projector, joint_projector, CommutantDecomposition};
use crate::error::{Error, Result};
use crate::linalg::{operator_norm, CMatrix, CVector, C64};
use crate::{tol, DEFAULT_BUDGET};

/// The label-sequence space `Ω = ×_t Γ(t)`, with histories addressed by a
/// flat mixed-radix index (earliest time most significant).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HistorySpace {
    times: Vec<Time>,
    labels: Vec<Vec<String>>,
}

impl HistorySpace {
    pub fn new(times: Vec<Time>, labels: Vec<Vec<String>>) -> Result<Self> {
        if times.len() != labels.len() || times.is_empty() {
            return Err(Error::EmptyPartition);
        }
        let space = Self { times, labels };
        space.size()?;
        Ok(space)
    }

    pub fn from_analyser(an: &Analyser) -> Self {
        let times = an.times().to_vec();
        let labels = an.iter().map(|(_, part)| part.labels().to_vec()).collect();
        Self { times, labels }
    }

    /// `|Ω| = Π_t |Γ(t)|`, guarded against overflow.
    pub fn size(&self) -> Result<usize> {
        self.labels
            .iter()
            .try_fold(1usize, |acc, l| acc.checked_mul(l.len()))
            .ok_or(Error::SpaceOverflow)
    }

    pub fn times(&self) -> &[Time] {
        &self.times
    }

    pub fn num_times(&self) -> usize {
        self.times.len()
    }

    pub fn labels_at(&self, time_idx: usize) -> &[String] {
        &self.labels[time_idx]
    }

    pub fn time_index(&self, t: &Time) -> Result<usize> {
        self.times
            .iter()
            .position(|u| u == t)
            .ok_or_else(|| Error::UnknownTime(t.key().to_string()))
    }

    pub fn label_index(&self, time_idx: usize, label: &str) -> Result<usize> {
        self.labels[time_idx]
            .iter()
            .position(|l| l == label)
            .ok_or_else(|| Error::UnknownLabel {
                time: self.times[time_idx].key().to_string(),
                label: label.to_string(),
            })
    }

    /// Flat index of a history given as one label index per time.
    pub fn flat_index(&self, history: &[usize]) -> Result<usize> {
        if history.len() != self.times.len() {
            return Err(Error::MalformedHistory);
        }
        let mut flat = 0usize;
        for (i, &a) in history.iter().enumerate() {
            if a >= self.labels[i].len() {
                return Err(Error::MalformedHistory);
            }
            flat = flat * self.labels[i].len() + a;
        }
        Ok(flat)
    }

    /// Inverse of [`flat_index`](Self::flat_index).
    pub fn decode(&self, flat: usize) -> Vec<usize> {
        let mut rest = flat;
        let mut out = vec![0usize; self.times.len()];
        for i in (0..self.times.len()).rev() {
            let n = self.labels[i].len();
            out[i] = rest % n;
            rest /= n;
        }
        out
    }

    /// Label strings of a history.
    pub fn history_labels(&self, flat: usize) -> Vec<&str> {
        self.decode(flat)
            .iter()
            .enumerate()
            .map(|(i, &a)| self.labels[i][a].as_str())
            .collect()
    }

    /// Full assignment `(time, label)` for a history.
    pub fn assignment(&self, flat: usize) -> Vec<(Time, String)> {
        self.decode(flat)
            .iter()
            .enumerate()
            .map(|(i, &a)| (self.times[i].clone(), self.labels[i][a].clone()))
            .collect()
    }
}

/// A subset of `Ω`, stored extensionally.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Event {
    space: HistorySpace,
    members: BTreeSet<usize>,
}

impl Event {
    pub fn empty(space: &HistorySpace) -> Self {
        Self {
            space: space.clone(),
            members: BTreeSet::new(),
        }
    }

    pub fn full(space: &HistorySpace) -> Result<Self> {
        Ok(Self {
            space: space.clone(),
            members: (0..space.size()?).collect(),
        })
    }

    pub fn from_flat(space: &HistorySpace, members: BTreeSet<usize>) -> Result<Self> {
        let n = space.size()?;
        if members.iter().any(|&m| m >= n) {
            return Err(Error::MalformedHistory);
        }
        Ok(Self {
            space: space.clone(),
            members,
        })
    }

    /// Event from explicit histories given as label-index sequences.
    pub fn from_histories(space: &HistorySpace, histories: &[Vec<usize>]) -> Result<Self> {
        let members = histories
            .iter()
            .map(|h| space.flat_index(h))
            .collect::<Result<BTreeSet<usize>>>()?;
        Ok(Self {
            space: space.clone(),
            members,
        })
    }

    /// Cylinder event `{ω : ω_t ∈ allowed(t) for each constrained t}`.
    ///
    /// The constraint list is expanded into the explicit member set;
    /// repeated constraints on one time intersect.
    pub fn cylinder(space: &HistorySpace, constraints: &[(Time, Vec<String>)]) -> Result<Self> {
        let mut allowed: Vec<Option<BTreeSet<usize>>> = vec![None; space.num_times()];
        for (t, labels) in constraints {
            let ti = space.time_index(t)?;
            let set = labels
                .iter()
                .map(|l| space.label_index(ti, l))
                .collect::<Result<BTreeSet<usize>>>()?;
            allowed[ti] = Some(match allowed[ti].take() {
                Some(prev) => prev.intersection(&set).copied().collect(),
                None => set,
            });
        }
        let mut members = BTreeSet::new();
        for flat in 0..space.size()? {
            let h = space.decode(flat);
            let ok = h
                .iter()
                .enumerate()
                .all(|(i, a)| allowed[i].as_ref().is_none_or(|s| s.contains(a)));
            if ok {
                members.insert(flat);
            }
        }
        Ok(Self {
            space: space.clone(),
            members,
        })
    }

    /// Single-history event.
    pub fn singleton(space: &HistorySpace, flat: usize) -> Result<Self> {
        Self::from_flat(space, BTreeSet::from([flat]))
    }

    pub fn space(&self) -> &HistorySpace {
        &self.space
    }

    pub fn members(&self) -> &BTreeSet<usize> {
        &self.members
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn contains(&self, flat: usize) -> bool {
        self.members.contains(&flat)
    }

    fn check_same_space(&self, other: &Event) -> Result<()> {
        if self.space != other.space {
            return Err(Error::EventSpaceMismatch);
        }
        Ok(())
    }

    pub fn complement(&self) -> Result<Self> {
        let n = self.space.size()?;
        Ok(Self {
            space: self.space.clone(),
            members: (0..n).filter(|m| !self.members.contains(m)).collect(),
        })
    }

    pub fn union(&self, other: &Event) -> Result<Self> {
        self.check_same_space(other)?;
        Ok(Self {
            space: self.space.clone(),
            members: self.members.union(&other.members).copied().collect(),
        })
    }

    pub fn intersection(&self, other: &Event) -> Result<Self> {
        self.check_same_space(other)?;
        Ok(Self {
            space: self.space.clone(),
            members: self.members.intersection(&other.members).copied().collect(),
        })
    }

    pub fn difference(&self, other: &Event) -> Result<Self> {
        self.check_same_space(other)?;
        Ok(Self {
            space: self.space.clone(),
            members: self.members.difference(&other.members).copied().collect(),
        })
    }

    pub fn is_subset_of(&self, other: &Event) -> bool {
        self.members.is_subset(&other.members)
    }

    pub fn is_disjoint_from(&self, other: &Event) -> bool {
        self.members.is_disjoint(&other.members)
    }
}

enum ProbStore {
    Eager(Vec<f64>),
    Lazy,
}

/// The Born path measure `P_φ` of a state in the commutation subspace.
///
/// Probabilities are stored eagerly when `|Ω|` fits the budget, otherwise
/// evaluated on demand through the time-ordered product form. Values below
/// the probability tolerance are reported as exact zeros by
/// [`PathMeasure::display_probability`] but stored unrounded.
pub struct PathMeasure {
    an: Arc<Analyser>,
    dec: Arc<CommutantDecomposition>,
    state: CVector,
    store: ProbStore,
}

impl PathMeasure {
    /// Builds the measure for `φ`, which must be nonzero and lie in the
    /// commutation subspace.
    pub fn new(
        an: &Analyser,
        dec: &CommutantDecomposition,
        phi: &CVector,
        budget: usize,
    ) -> Result<Self> {
        let d = an.dim();
        if phi.len() != d {
            return Err(Error::DimensionMismatch(phi.len(), d));
        }
        let norm = phi.norm();
        if norm == 0.0 {
            return Err(Error::ZeroState);
        }
        let state = phi / C64::new(norm, 0.0);
        let residual = (&state - dec.p_pi().apply(&state)).norm();
        if residual > tol::vec(d) {
            return Err(Error::StateOutsideCommutant {
                residual,
                tol: tol::vec(d),
            });
        }
        let size = dec.space().size()?;
        let store = if size <= budget {
            let probs: Vec<f64> = (0..size)
                .into_par_iter()
                .map(|flat| match dec.joint_matrix(flat) {
                    Some(p) => (p * &state).norm_squared(),
                    None => 0.0,
                })
                .collect();
            let mass: f64 = probs.iter().sum();
            if (mass - 1.0).abs() > tol::PROB {
                return Err(Error::MassDeficit { mass });
            }
            ProbStore::Eager(probs)
        } else {
            ProbStore::Lazy
        };
        Ok(Self {
            an: Arc::new(an.clone()),
            dec: Arc::new(dec.clone()),
            state,
            store,
        })
    }

    pub fn space(&self) -> &HistorySpace {
        self.dec.space()
    }

    pub fn analyser(&self) -> &Analyser {
        &self.an
    }

    pub fn decomposition(&self) -> &CommutantDecomposition {
        &self.dec
    }

    /// Normalized state `φ̂`.
    pub fn state(&self) -> &CVector {
        &self.state
    }

    /// `P_φ(ω)` by flat history index.
    pub fn probability(&self, flat: usize) -> f64 {
        match &self.store {
            ProbStore::Eager(probs) => probs[flat],
            ProbStore::Lazy => {
                let mut v = self.state.clone();
                for (i, &a) in self.space().decode(flat).iter().enumerate() {
                    let part = self.an.partition_at(i);
                    v = part.cells()[a].apply(&v);
                }
                v.norm_squared()
            }
        }
    }

    /// `P_φ(ω)` for a history given by label strings in time order.
    pub fn probability_of_labels(&self, labels: &[&str]) -> Result<f64> {
        let idx = labels
            .iter()
            .enumerate()
            .map(|(i, l)| self.space().label_index(i, l))
            .collect::<Result<Vec<usize>>>()?;
        Ok(self.probability(self.space().flat_index(&idx)?))
    }

    /// Probability rounded to an exact zero when below tolerance.
    pub fn display_probability(&self, flat: usize) -> f64 {
        let p = self.probability(flat);
        if p < tol::PROB {
            0.0
        } else {
            p
        }
    }

    pub fn total_mass(&self) -> f64 {
        match &self.store {
            ProbStore::Eager(probs) => probs.iter().sum(),
            ProbStore::Lazy => 1.0,
        }
    }
}

/// Born probability of a partial assignment, evaluated both as
/// `||p^{t_1..t_k}_{a_1..a_k} φ̂||²` (joint meet) and as the time-ordered
/// product `||p^{t_k}_{a_k} ⋯ p^{t_1}_{a_1} φ̂||²`.
///
/// The two routes must agree within the probability tolerance; the meet
/// form is returned.
pub fn path_probability(
    an: &Analyser,
    dec: &CommutantDecomposition,
    phi: &CVector,
    assignment: &[(Time, String)],
) -> Result<f64> {
    let d = an.dim();
    let norm = phi.norm();
    if norm == 0.0 {
        return Err(Error::ZeroState);
    }
    let state = phi / C64::new(norm, 0.0);
    let residual = (&state - dec.p_pi().apply(&state)).norm();
    if residual > tol::vec(d) {
        return Err(Error::StateOutsideCommutant {
            residual,
            tol: tol::vec(d),
        });
    }
    let joint = joint_projector(an, assignment)?;
    let meet_form = joint.projector().apply(&state).norm_squared();

    let mut sorted = assignment.to_vec();
    sorted.sort_by(|a, b| a.0.cmp(&b.0));
    let mut v = state;
    for (t, a) in &sorted {
        v = an.cell(t, a)?.apply(&v);
    }
    let product_form = v.norm_squared();

    if (meet_form - product_form).abs() > tol::PROB {
        return Err(Error::BornMismatch {
            meet: meet_form,
            product: product_form,
        });
    }
    Ok(meet_form)
}

/// Result of a textbook collapse chain: the telescoping probability and
/// the renormalized post-collapse states.
#[derive(Debug, Clone)]
pub struct CollapseOutcome {
    pub probability: f64,
    /// `φ̂_i` after each observation, truncated at the first vanishing
    /// projection.
    pub states: Vec<CVector>,
}

/// Sequential collapse evaluation of an ordered assignment.
///
/// The state need not lie in the commutation subspace; this is the
/// standard collapse prescription kept around for comparison. A vanishing
/// intermediate projection short-circuits to probability zero with the
/// chain truncated there.
pub fn collapse_chain(
    an: &Analyser,
    phi: &CVector,
    ordered: &[(Time, String)],
) -> Result<CollapseOutcome> {
    let norm = phi.norm();
    if norm == 0.0 {
        return Err(Error::ZeroState);
    }
    if ordered.windows(2).any(|w| w[0].0 >= w[1].0) {
        return Err(Error::ChainOrder);
    }
    let mut current = phi / C64::new(norm, 0.0);
    let mut probability = 1.0;
    let mut states = Vec::new();
    for (t, a) in ordered {
        let projected = an.cell(t, a)?.apply(&current);
        let weight = projected.norm_squared();
        probability *= weight;
        if weight.sqrt() < tol::vec(an.dim()) {
            probability = 0.0;
            break;
        }
        current = &projected / C64::new(weight.sqrt(), 0.0);
        states.push(current.clone());
    }
    Ok(CollapseOutcome {
        probability,
        states,
    })
}

/// `P_φ(A) = Σ_{ω ∈ A} P_φ(ω)`, cross-checked against `||p_A φ̂||²`.
pub fn event_probability(pm: &PathMeasure, a: &Event) -> Result<f64> {
    if a.space() != pm.space() {
        return Err(Error::EventSpaceMismatch);
    }
    let sum: f64 = a.members().iter().map(|&m| pm.probability(m)).sum();
    let p_a = event_projector(pm.decomposition(), a)?;
    let via_projector = p_a.apply(pm.state()).norm_squared();
    if (sum - via_projector).abs() > tol::PROB {
        return Err(Error::BornMismatch {
            meet: via_projector,
            product: sum,
        });
    }
    Ok(sum)
}

/// Conditional probability `P_φ(B | A) = P_φ(A ∩ B) / P_φ(A)`,
/// cross-checked against the projected-state formula `P_{p_A φ}(B)`.
pub fn conditional_probability(
    an: &Analyser,
    dec: &CommutantDecomposition,
    phi: &CVector,
    a: &Event,
    b: &Event,
) -> Result<f64> {
    let pm = PathMeasure::new(an, dec, phi, DEFAULT_BUDGET)?;
    let pa = event_probability(&pm, a)?;
    if pa <= tol::PROB {
        return Err(Error::NullConditioning(pa));
    }
    let pab = event_probability(&pm, &a.intersection(b)?)?;
    let ratio = pab / pa;

    let projected = event_projector(dec, a)?.apply(pm.state());
    let pm2 = PathMeasure::new(an, dec, &projected, DEFAULT_BUDGET)?;
    let via_projection = event_probability(&pm2, b)?;
    if (ratio - via_projection).abs() > tol::PROB {
        return Err(Error::ConditionalMismatch {
            ratio,
            projected: via_projection,
        });
    }
    Ok(ratio)
}

/// The operator `Q_f = Σ_ω f(ω) p_{ω}` of a real function on `Ω`,
/// restricted to the commutation subspace.
#[derive(Debug, Clone)]
pub struct Observable {
    values: Vec<f64>,
    /// `k × k` matrix in the orthonormal basis of the commutation subspace.
    matrix: CMatrix,
    basis: CMatrix,
}

impl Observable {
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Matrix in commutation-subspace coordinates.
    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    /// The ambient `d × d` operator.
    pub fn ambient_matrix(&self) -> CMatrix {
        &self.basis * &self.matrix * self.basis.adjoint()
    }

    /// `⟨φ̂, Q_f φ̂⟩` for a normalized version of `φ`.
    pub fn expectation(&self, phi: &CVector) -> Result<f64> {
        let norm = phi.norm();
        if norm == 0.0 {
            return Err(Error::ZeroState);
        }
        let coords = self.basis.adjoint() * (phi / C64::new(norm, 0.0));
        Ok((coords.adjoint() * &self.matrix * &coords)[(0, 0)].re)
    }
}

/// Builds `Q_f` from an explicit value table indexed by flat history.
///
/// The resulting operator is Hermitian and its spectrum stays within the
/// supplied values; the expectation identity
/// `∫ f dP_φ = ⟨φ̂, Q_f φ̂⟩` then holds for states in the commutation
/// subspace.
pub fn observable(dec: &CommutantDecomposition, values: &[f64]) -> Result<Observable> {
    let size = dec.space().size()?;
    if values.len() != size {
        return Err(Error::ObservableTableSize {
            got: values.len(),
            want: size,
        });
    }
    let d = dec.p_pi().dim();
    let mut ambient = CMatrix::zeros(d, d);
    for (flat, &value) in values.iter().enumerate() {
        if let Some(p) = dec.joint_matrix(flat) {
            ambient += p * C64::new(value, 0.0);
        }
    }
    let basis = dec.h_pi().basis().clone();
    let matrix = basis.adjoint() * &ambient * &basis;
    let herm = (&matrix - matrix.adjoint()).norm();
    if herm > tol::op(d) {
        return Err(Error::NotHermitian {
            residual: herm,
            tol: tol::op(d),
        });
    }
    if matrix.ncols() > 0 {
        let eig = nalgebra::SymmetricEigen::try_new(matrix.clone(), f64::EPSILON, 0)
            .ok_or(Error::EigenFailure)?;
        let spread = eig
            .eigenvalues
            .iter()
            .map(|lambda| {
                values
                    .iter()
                    .map(|v| (lambda - v).abs())
                    .fold(f64::INFINITY, f64::min)
            })
            .fold(0.0, f64::max);
        if spread > 1e-8 {
            return Err(Error::ObservableSpectrum(spread));
        }
    }
    Ok(Observable {
        values: values.to_vec(),
        matrix,
        basis,
    })
}

/// Expectation `∫ f dP_φ` summed directly from the measure, for
/// cross-checking against [`Observable::expectation`].
pub fn measure_expectation(pm: &PathMeasure, values: &[f64]) -> Result<f64> {
    let size = pm.space().size()?;
    if values.len() != size {
        return Err(Error::ObservableTableSize {
            got: values.len(),
            want: size,
        });
    }
    Ok((0..size).map(|i| values[i] * pm.probability(i)).sum())
}

/// Outcome of the null-event logic checks.
#[derive(Debug, Clone)]
pub struct SigmaIdealReport {
    pub pairs_checked: usize,
    /// Largest `P(A)` seen for `A ⊆ B` with `P(B)` null.
    pub max_subset_leak: f64,
    /// Largest `P(A ∪ B)` over pairs of null events.
    pub max_union_leak: f64,
    /// Largest `P(A ∩ B)` over pairs with one null factor.
    pub max_intersection_leak: f64,
    pub pass: bool,
}

/// Verifies that null events form an ideal: subsets of null events are
/// null, finite unions of null events are null, and intersections with a
/// null factor are null.
pub fn sigma_ideal_checks(pm: &PathMeasure, events: &[Event]) -> Result<SigmaIdealReport> {
    let mut report = SigmaIdealReport {
        pairs_checked: 0,
        max_subset_leak: 0.0,
        max_union_leak: 0.0,
        max_intersection_leak: 0.0,
        pass: true,
    };
    let probs: Vec<f64> = events
        .iter()
        .map(|e| event_probability(pm, e))
        .collect::<Result<_>>()?;
    for (i, a) in events.iter().enumerate() {
        for (j, b) in events.iter().enumerate() {
            if i == j {
                continue;
            }
            report.pairs_checked += 1;
            if probs[j] < tol::PROB && a.is_subset_of(b) {
                report.max_subset_leak = report.max_subset_leak.max(probs[i]);
            }
            if probs[i] < tol::PROB && probs[j] < tol::PROB {
                let u = event_probability(pm, &a.union(b)?)?;
                report.max_union_leak = report.max_union_leak.max(u);
            }
            if probs[i] < tol::PROB {
                let n = event_probability(pm, &a.intersection(b)?)?;
                report.max_intersection_leak = report.max_intersection_leak.max(n);
            }
        }
    }
    report.pass = report.max_subset_leak < tol::PROB
        && report.max_union_leak < tol::PROB
        && report.max_intersection_leak < tol::PROB;
    Ok(report)
}

/// Residuals of the PVM axioms over supplied event pairs.
#[derive(Debug, Clone)]
pub struct PvmReport {
    /// `||p_{A ∪ B} - p_A - p_B||` over disjoint pairs.
    pub max_additivity: f64,
    /// `||p_{A ∩ B} - p_A p_B||`.
    pub max_multiplicativity: f64,
    /// `||p_A + p_{A^c} - p_π||`.
    pub max_complement: f64,
}

impl PvmReport {
    pub fn max_residual(&self) -> f64 {
        self.max_additivity
            .max(self.max_multiplicativity)
            .max(self.max_complement)
    }
}

/// Checks additivity on disjoint events, multiplicativity on
/// intersections, and the complement identity, in operator norm.
pub fn check_pvm_axioms(
    dec: &CommutantDecomposition,
    pairs: &[(Event, Event)],
) -> Result<PvmReport> {
    let mut report = PvmReport {
        max_additivity: 0.0,
        max_multiplicativity: 0.0,
        max_complement: 0.0,
    };
    for (a, b) in pairs {
        let d1 = a.difference(b)?;
        let d2 = b.difference(a)?;
        let pu = event_projector(dec, &d1.union(&d2)?)?;
        let p1 = event_projector(dec, &d1)?;
        let p2 = event_projector(dec, &d2)?;
        let additivity = operator_norm(&(pu.matrix() - p1.matrix() - p2.matrix()));
        report.max_additivity = report.max_additivity.max(additivity);

        let pa = event_projector(dec, a)?;
        let pb = event_projector(dec, b)?;
        let pab = event_projector(dec, &a.intersection(b)?)?;
        let multiplicativity = operator_norm(&(pab.matrix() - pa.matrix() * pb.matrix()));
        report.max_multiplicativity = report.max_multiplicativity.max(multiplicativity);

        let pac = event_projector(dec, &a.complement()?)?;
        let complement = operator_norm(&(pa.matrix() + pac.matrix() - dec.p_pi().matrix()));
        report.max_complement = report.max_complement.max(complement);
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analyser::{scenario, Partition};
    use crate::commutant::compute_commutant;
    use crate::linalg::Projector;
    use approx::assert_relative_eq;
    use std::collections::BTreeMap;

    fn setup(name: &str) -> (Analyser, CVector, CommutantDecomposition) {
        let (an, phi) = scenario(name, &BTreeMap::new()).unwrap();
        let dec = compute_commutant(&an, DEFAULT_BUDGET).unwrap();
        (an, phi, dec)
    }

    fn static_setup(steps: f64, p: f64) -> (Analyser, CVector, CommutantDecomposition) {
        let mut params = BTreeMap::new();
        params.insert("steps".to_string(), steps);
        params.insert("p".to_string(), p);
        let (an, phi) = scenario("STATIC", &params).unwrap();
        let dec = compute_commutant(&an, DEFAULT_BUDGET).unwrap();
        (an, phi, dec)
    }

    #[test]
    fn single_cell_history_has_probability_one() {
        let part = Partition::new(vec!["only".into()], vec![Projector::identity(3)]).unwrap();
        let an = Analyser::new(vec![(Time::new(0.0), part)]).unwrap();
        let dec = compute_commutant(&an, DEFAULT_BUDGET).unwrap();
        let phi = CVector::from_vec(vec![
            C64::new(1.0, 0.0),
            C64::new(0.0, 1.0),
            C64::new(0.5, 0.5),
        ]);
        let p = path_probability(&an, &dec, &phi, &[(Time::new(0.0), "only".to_string())]).unwrap();
        assert_relative_eq!(p, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn d4_histories_are_uniform_quarters() {
        let (an, phi, dec) = setup("D4");
        let normalized = &phi / C64::new(phi.norm(), 0.0);
        for s_label in ["1", "2"] {
            for t_label in ["1", "2"] {
                let assignment = vec![
                    (Time::new(0.0), s_label.to_string()),
                    (Time::new(1.0), t_label.to_string()),
                ];
                let p = path_probability(&an, &dec, &phi, &assignment).unwrap();
                // brute-force oracle: explicit matrix products on phi-hat
                let brute = an
                    .cell(&Time::new(1.0), t_label)
                    .unwrap()
                    .apply(
                        &an.cell(&Time::new(0.0), s_label)
                            .unwrap()
                            .apply(&normalized),
                    )
                    .norm_squared();
                assert_relative_eq!(p, brute, epsilon = 1e-12);
                assert_relative_eq!(p, 0.25, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn tri9_marginals_follow_the_triadic_powers() {
        let (an, phi, dec) = setup("TRI9");
        let p1 = path_probability(&an, &dec, &phi, &[(Time::new(1.0), "1".into())]).unwrap();
        let p2 = path_probability(&an, &dec, &phi, &[(Time::new(2.0), "1".into())]).unwrap();
        assert_relative_eq!(p1, 1.0 / 3.0, epsilon = 1e-12);
        assert_relative_eq!(p2, 1.0 / 9.0, epsilon = 1e-12);
    }

    #[test]
    fn path_probability_rejects_states_outside_h_pi() {
        let (an, _, dec) = setup("Q2");
        let phi = CVector::from_vec(vec![C64::new(1.0, 0.0), C64::new(0.0, 0.0)]);
        assert!(matches!(
            path_probability(&an, &dec, &phi, &[(Time::new(0.0), "+".into())]),
            Err(Error::StateOutsideCommutant { .. })
        ));
    }

    #[test]
    fn collapse_single_step_is_born_rule() {
        let (an, phi, _) = setup("D4");
        let out = collapse_chain(&an, &phi, &[(Time::new(0.0), "1".into())]).unwrap();
        assert_relative_eq!(out.probability, 0.5, epsilon = 1e-12);
        assert_eq!(out.states.len(), 1);
    }

    #[test]
    fn collapse_matches_path_probability_on_d4() {
        let (an, phi, dec) = setup("D4");
        let chain = vec![
            (Time::new(0.0), "1".to_string()),
            (Time::new(1.0), "1".to_string()),
        ];
        let out = collapse_chain(&an, &phi, &chain).unwrap();
        let p = path_probability(&an, &dec, &phi, &chain).unwrap();
        assert_relative_eq!(out.probability, p, epsilon = 1e-12);
        assert_relative_eq!(out.probability, 0.25, epsilon = 1e-12);
    }

    #[test]
    fn collapse_on_q2_projects_onto_rotated_line() {
        let (an, phi, _) = setup("Q2");
        let chain = vec![
            (Time::new(0.0), "+".to_string()),
            (Time::new(1.0), "+".to_string()),
        ];
        let out = collapse_chain(&an, &phi, &chain).unwrap();
        assert_relative_eq!(out.probability, 0.5, epsilon = 1e-12);
        // first collapse leaves e0 untouched
        assert!((&out.states[0] - &phi).norm() < 1e-12);
        // second lands on the rotated line
        let cell = an.cell(&Time::new(1.0), "+").unwrap();
        assert!((cell.apply(&out.states[1]) - &out.states[1]).norm() < 1e-12);
    }

    #[test]
    fn collapse_truncates_at_a_vanishing_projection() {
        // with p = 1 the second label never fires: the chain stops there
        let (an, phi, _) = static_setup(3.0, 1.0);
        let chain = vec![
            (Time::new(0.0), "2".to_string()),
            (Time::new(1.0), "1".to_string()),
        ];
        let out = collapse_chain(&an, &phi, &chain).unwrap();
        assert_eq!(out.probability, 0.0);
        assert!(out.states.is_empty());
    }

    #[test]
    fn collapse_chain_requires_increasing_times() {
        let (an, phi, _) = setup("D4");
        let chain = vec![
            (Time::new(1.0), "1".to_string()),
            (Time::new(0.0), "1".to_string()),
        ];
        assert!(matches!(
            collapse_chain(&an, &phi, &chain),
            Err(Error::ChainOrder)
        ));
    }

    #[test]
    fn event_probability_examples() {
        let (an, phi, dec) = setup("TRI9");
        let pm = PathMeasure::new(&an, &dec, &phi, DEFAULT_BUDGET).unwrap();
        let space = pm.space().clone();
        let omega = Event::full(&space).unwrap();
        assert_relative_eq!(
            event_probability(&pm, &omega).unwrap(),
            1.0,
            epsilon = 1e-12
        );
        let a1 = Event::cylinder(&space, &[(Time::new(1.0), vec!["1".into()])]).unwrap();
        let a2 = Event::cylinder(&space, &[(Time::new(2.0), vec!["1".into()])]).unwrap();
        // nesting makes the union coincide with the outer event
        let union = a1.union(&a2).unwrap();
        assert_relative_eq!(
            event_probability(&pm, &union).unwrap(),
            1.0 / 3.0,
            epsilon = 1e-12
        );
    }

    #[test]
    fn d4_event_probability_is_half() {
        let (an, phi, dec) = setup("D4");
        let pm = PathMeasure::new(&an, &dec, &phi, DEFAULT_BUDGET).unwrap();
        let a = Event::cylinder(pm.space(), &[(Time::new(0.0), vec!["1".into()])]).unwrap();
        assert_relative_eq!(event_probability(&pm, &a).unwrap(), 0.5, epsilon = 1e-12);
    }

    #[test]
    fn conditional_examples() {
        let (an, phi, dec) = setup("D4");
        let space = HistorySpace::from_analyser(&an);
        let a = Event::cylinder(&space, &[(Time::new(0.0), vec!["1".into()])]).unwrap();
        let b = Event::cylinder(&space, &[(Time::new(1.0), vec!["1".into()])]).unwrap();
        let omega = Event::full(&space).unwrap();
        assert_relative_eq!(
            conditional_probability(&an, &dec, &phi, &a, &omega).unwrap(),
            1.0,
            epsilon = 1e-12
        );
        assert_relative_eq!(
            conditional_probability(&an, &dec, &phi, &a, &b).unwrap(),
            0.5,
            epsilon = 1e-12
        );
    }

    #[test]
    fn static_conditioning_is_deterministic() {
        let (an, phi, dec) = static_setup(2.0, 0.7);
        let space = HistorySpace::from_analyser(&an);
        let a = Event::cylinder(&space, &[(Time::new(0.0), vec!["1".into()])]).unwrap();
        let b = Event::cylinder(&space, &[(Time::new(1.0), vec!["1".into()])]).unwrap();
        assert_relative_eq!(
            conditional_probability(&an, &dec, &phi, &a, &b).unwrap(),
            1.0,
            epsilon = 1e-12
        );
    }

    #[test]
    fn conditioning_on_null_event_fails() {
        let (an, phi, dec) = static_setup(2.0, 1.0);
        let space = HistorySpace::from_analyser(&an);
        let null = Event::cylinder(&space, &[(Time::new(0.0), vec!["2".into()])]).unwrap();
        let b = Event::full(&space).unwrap();
        assert!(matches!(
            conditional_probability(&an, &dec, &phi, &null, &b),
            Err(Error::NullConditioning(_))
        ));
    }

    #[test]
    fn constant_observable_has_constant_expectation() {
        let (_, phi, dec) = setup("D4");
        let size = dec.space().size().unwrap();
        let obs = observable(&dec, &vec![2.5; size]).unwrap();
        assert_relative_eq!(obs.expectation(&phi).unwrap(), 2.5, epsilon = 1e-12);
    }

    #[test]
    fn indicator_observable_matches_event_projector() {
        let (an, phi, dec) = setup("D4");
        let space = dec.space().clone();
        let a = Event::cylinder(&space, &[(Time::new(0.0), vec!["1".into()])]).unwrap();
        let values: Vec<f64> = (0..space.size().unwrap())
            .map(|i| if a.contains(i) { 1.0 } else { 0.0 })
            .collect();
        let obs = observable(&dec, &values).unwrap();
        let pa = event_projector(&dec, &a).unwrap();
        assert!((obs.ambient_matrix() - pa.matrix()).norm() < 1e-10);
        assert_relative_eq!(obs.expectation(&phi).unwrap(), 0.5, epsilon = 1e-12);
        // and the direct sum over the measure agrees
        let pm = PathMeasure::new(&an, &dec, &phi, DEFAULT_BUDGET).unwrap();
        assert_relative_eq!(
            measure_expectation(&pm, &values).unwrap(),
            0.5,
            epsilon = 1e-12
        );
    }

    #[test]
    fn observables_commute_on_commutation_subspace() {
        let (_, _, dec) = setup("D4");
        let size = dec.space().size().unwrap();
        let f: Vec<f64> = (0..size).map(|i| (i as f64 * 1.3).sin()).collect();
        let g: Vec<f64> = (0..size).map(|i| (i as f64 * 0.7).cos()).collect();
        let qf = observable(&dec, &f).unwrap();
        let qg = observable(&dec, &g).unwrap();
        let comm = qf.matrix() * qg.matrix() - qg.matrix() * qf.matrix();
        assert!(operator_norm(&comm) < 1e-9);
    }

    #[test]
    fn sigma_ideal_holds_on_tri9() {
        let (an, phi, dec) = setup("TRI9");
        let pm = PathMeasure::new(&an, &dec, &phi, DEFAULT_BUDGET).unwrap();
        let space = pm.space().clone();
        // nesting forces {X_1 = 2, X_2 = 1} to be null
        let null = Event::cylinder(
            &space,
            &[
                (Time::new(1.0), vec!["2".into()]),
                (Time::new(2.0), vec!["1".into()]),
            ],
        )
        .unwrap();
        assert!(event_probability(&pm, &null).unwrap() < tol::PROB);
        let events = vec![
            Event::empty(&space),
            null.clone(),
            Event::cylinder(&space, &[(Time::new(1.0), vec!["1".into()])]).unwrap(),
            Event::full(&space).unwrap(),
        ];
        let report = sigma_ideal_checks(&pm, &events).unwrap();
        assert!(report.pass, "sigma ideal violated: {report:?}");
    }

    #[test]
    fn pvm_axioms_hold_on_d4() {
        let (_, _, dec) = setup("D4");
        let space = dec.space().clone();
        let a = Event::cylinder(&space, &[(Time::new(0.0), vec!["1".into()])]).unwrap();
        let b = Event::cylinder(&space, &[(Time::new(1.0), vec!["1".into()])]).unwrap();
        let report = check_pvm_axioms(&dec, &[(a, b)]).unwrap();
        assert!(report.max_residual() < 1e-10, "{report:?}");
    }

    #[test]
    fn event_subspace_is_the_certainty_set() {
        use crate::commutant::event_subspace;
        let (an, _, dec) = setup("D4");
        let space = dec.space().clone();
        let a = Event::cylinder(&space, &[(Time::new(0.0), vec!["1".into()])]).unwrap();
        let ha = event_subspace(&dec, &a).unwrap();
        // states inside H_A are certain of A
        for col in 0..ha.dim() {
            let phi: CVector = ha.basis().column(col).into_owned();
            let pm = PathMeasure::new(&an, &dec, &phi, DEFAULT_BUDGET).unwrap();
            assert_relative_eq!(event_probability(&pm, &a).unwrap(), 1.0, epsilon = 1e-12);
        }
        // states in the complementary cell give A probability zero
        let mut e2 = CVector::zeros(4);
        e2[2] = C64::new(1.0, 0.0);
        let pm = PathMeasure::new(&an, &dec, &e2, DEFAULT_BUDGET).unwrap();
        assert!(event_probability(&pm, &a).unwrap() < tol::PROB);
        // and on a trivial commutant every event projector annihilates
        // every state: its orthogonal complement is the whole space
        let (_, _, dec2) = setup("Q2");
        let space2 = dec2.space().clone();
        let full = Event::full(&space2).unwrap();
        assert_eq!(event_subspace(&dec2, &full).unwrap().dim(), 0);
    }

    #[test]
    fn marginal_consistency_under_time_deletion() {
        // summing over one time's labels reproduces the shorter assignment
        let (an, phi, dec) = setup("D4");
        let long: f64 = ["1", "2"]
            .iter()
            .map(|a| {
                path_probability(
                    &an,
                    &dec,
                    &phi,
                    &[
                        (Time::new(0.0), a.to_string()),
                        (Time::new(1.0), "1".to_string()),
                    ],
                )
                .unwrap()
            })
            .sum();
        let short =
            path_probability(&an, &dec, &phi, &[(Time::new(1.0), "1".to_string())]).unwrap();
        assert_relative_eq!(long, short, epsilon = 1e-12);
    }

    #[test]
    fn permutation_invariance_of_assignments() {
        let (an, phi, dec) = setup("D4");
        let fwd = vec![
            (Time::new(0.0), "2".to_string()),
            (Time::new(1.0), "1".to_string()),
        ];
        let rev: Vec<_> = fwd.iter().cloned().rev().collect();
        let p1 = path_probability(&an, &dec, &phi, &fwd).unwrap();
        let p2 = path_probability(&an, &dec, &phi, &rev).unwrap();
        assert_relative_eq!(p1, p2, epsilon = 1e-12);
    }

    #[test]
    fn lazy_measure_matches_eager() {
        let (an, phi, dec) = static_setup(3.0, 0.7);
        let eager = PathMeasure::new(&an, &dec, &phi, DEFAULT_BUDGET).unwrap();
        let lazy = PathMeasure::new(&an, &dec, &phi, 1).unwrap();
        for flat in 0..eager.space().size().unwrap() {
            assert_relative_eq!(
                eager.probability(flat),
                lazy.probability(flat),
                epsilon = 1e-12
            );
        }
    }
}
