//! Analysers: time-indexed partitions of the identity.
//!
//! An analyser is a family `π = {p^t_a : t ∈ S, a ∈ Γ(t)}` where for each
//! time `t` the cells `{p^t_a}` are mutually orthogonal projectors summing
//! to the identity. Times form a finite label set compared exactly (by
//! canonical decimal form, not float tolerance); cell labels are opaque
//! strings.

mod scenario;

pub use scenario::{scenario, Builtin, ScenarioInfo};

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use crate::error::{Error, Result};
use crate::linalg::{hermitian_evolution, CMatrix, Projector};
use crate::tol;

/// A time label: an exact scalar identified by its canonical decimal form.
#[derive(Debug, Clone)]
pub struct Time {
    value: f64,
    key: String,
}

impl Time {
    /// Wraps a finite scalar. The shortest round-trip decimal form is the
    /// identity of the label; `Time::new(0.0)` and `Time::new(-0.0)` differ.
    pub fn new(value: f64) -> Self {
        assert!(value.is_finite(), "time labels must be finite");
        Self {
            value,
            key: format!("{value}"),
        }
    }

    pub fn value(&self) -> f64 {
        self.value
    }

    pub fn key(&self) -> &str {
        &self.key
    }
}

impl PartialEq for Time {
    fn eq(&self, other: &Self) -> bool {
        self.key == other.key
    }
}

impl Eq for Time {}

impl std::hash::Hash for Time {
    fn hash<H: std::hash::Hasher>(&self, state: &mut H) {
        self.key.hash(state);
    }
}

impl PartialOrd for Time {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Time {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.value
            .partial_cmp(&other.value)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then_with(|| self.key.cmp(&other.key))
    }
}

impl fmt::Display for Time {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.key)
    }
}

impl From<f64> for Time {
    fn from(v: f64) -> Self {
        Time::new(v)
    }
}

/// A partition of the identity: labelled cells `{p_a}` with `Σ_a p_a = I`
/// and `p_a p_b = 0` for `a ≠ b`.
#[derive(Debug, Clone)]
pub struct Partition {
    labels: Vec<String>,
    cells: Vec<Projector>,
}

impl Partition {
    /// Validates and wraps a labelled cell list. Orthogonality of distinct
    /// cells is re-derived from the products, not assumed.
    pub fn new(labels: Vec<String>, cells: Vec<Projector>) -> Result<Self> {
        Self::validated(labels, cells, "?")
    }

    fn validated(labels: Vec<String>, cells: Vec<Projector>, time: &str) -> Result<Self> {
        if cells.is_empty() || labels.len() != cells.len() {
            return Err(Error::EmptyPartition);
        }
        let mut seen = BTreeSet::new();
        for l in &labels {
            if !seen.insert(l.clone()) {
                return Err(Error::DuplicateLabel(l.clone()));
            }
        }
        let d = cells[0].dim();
        for c in &cells {
            if c.dim() != d {
                return Err(Error::DimensionMismatch(d, c.dim()));
            }
        }
        let t = tol::op(d);
        let mut sum = CMatrix::zeros(d, d);
        for c in &cells {
            sum += c.matrix();
        }
        let residual = (&sum - CMatrix::identity(d, d)).norm();
        if residual > t {
            return Err(Error::PartitionSum { residual, tol: t });
        }
        for i in 0..cells.len() {
            for j in (i + 1)..cells.len() {
                let overlap = (cells[i].matrix() * cells[j].matrix()).norm();
                if overlap > t {
                    return Err(Error::PartitionOverlap {
                        time: time.to_string(),
                        residual: overlap,
                        tol: t,
                    });
                }
            }
        }
        Ok(Self { labels, cells })
    }

    /// Diagonal partition from disjoint coordinate index sets covering
    /// `0..dim`.
    pub fn from_index_cells(dim: usize, cells: &[(String, Vec<usize>)]) -> Result<Self> {
        let mut labels = Vec::new();
        let mut projs = Vec::new();
        for (label, idx) in cells {
            labels.push(label.clone());
            projs.push(Projector::coordinates(dim, idx)?);
        }
        Self::new(labels, projs)
    }

    pub fn dim(&self) -> usize {
        self.cells[0].dim()
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn cells(&self) -> &[Projector] {
        &self.cells
    }

    pub fn index_of(&self, label: &str) -> Option<usize> {
        self.labels.iter().position(|l| l == label)
    }

    pub fn cell(&self, label: &str) -> Option<&Projector> {
        self.index_of(label).map(|i| &self.cells[i])
    }

    pub fn iter(&self) -> impl Iterator<Item = (&String, &Projector)> {
        self.labels.iter().zip(self.cells.iter())
    }
}

/// Validates a labelled cell list as a partition of the identity.
///
/// Same as [`Partition::new`], exposed under the operation name.
pub fn validate_partition(labels: Vec<String>, cells: Vec<Projector>) -> Result<Partition> {
    Partition::new(labels, cells)
}

/// A finite family of partitions of identity indexed by distinct times,
/// kept sorted in time order.
#[derive(Debug, Clone)]
pub struct Analyser {
    times: Vec<Time>,
    partitions: Vec<Partition>,
}

impl Analyser {
    pub fn new(items: Vec<(Time, Partition)>) -> Result<Self> {
        if items.is_empty() {
            return Err(Error::EmptyPartition);
        }
        let d = items[0].1.dim();
        let mut seen = BTreeSet::new();
        for (t, p) in &items {
            if p.dim() != d {
                return Err(Error::DimensionMismatch(d, p.dim()));
            }
            if !seen.insert(t.key().to_string()) {
                return Err(Error::DuplicateTime(t.key().to_string()));
            }
        }
        let mut items = items;
        items.sort_by(|a, b| a.0.cmp(&b.0));
        let (times, partitions) = items.into_iter().unzip();
        Ok(Self { times, partitions })
    }

    pub fn dim(&self) -> usize {
        self.partitions[0].dim()
    }

    pub fn times(&self) -> &[Time] {
        &self.times
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn time_index(&self, t: &Time) -> Result<usize> {
        self.times
            .iter()
            .position(|u| u == t)
            .ok_or_else(|| Error::UnknownTime(t.key().to_string()))
    }

    pub fn partition(&self, t: &Time) -> Result<&Partition> {
        Ok(&self.partitions[self.time_index(t)?])
    }

    pub fn partition_at(&self, idx: usize) -> &Partition {
        &self.partitions[idx]
    }

    pub fn cell(&self, t: &Time, label: &str) -> Result<&Projector> {
        let part = self.partition(t)?;
        part.cell(label).ok_or_else(|| Error::UnknownLabel {
            time: t.key().to_string(),
            label: label.to_string(),
        })
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Time, &Partition)> {
        self.times.iter().zip(self.partitions.iter())
    }
}

/// Conjugates a base partition through Heisenberg evolution,
/// `p^t_a = U_{-t} p_a U_t` with `U_t = exp(-itH)`.
///
/// Partition invariants are re-verified after each conjugation.
pub fn heisenberg_analyser(base: &Partition, h: &CMatrix, times: &[f64]) -> Result<Analyser> {
    let d = base.dim();
    if h.nrows() != d {
        return Err(Error::DimensionMismatch(h.nrows(), d));
    }
    let mut items = Vec::with_capacity(times.len());
    for &t in times {
        let u = hermitian_evolution(h, t)?;
        let cells = base
            .cells()
            .iter()
            .map(|p| Projector::new(u.adjoint() * p.matrix() * &u))
            .collect::<Result<Vec<_>>>()?;
        let part = Partition::validated(base.labels().to_vec(), cells, &format!("{t}"))?;
        items.push((Time::new(t), part));
    }
    Analyser::new(items)
}

/// How one parent cell splits into child cells, `(child label, projector)`
/// pairs summing to the parent cell.
pub type CellSplit = Vec<(String, Projector)>;

/// A refinement relation between two analysers.
///
/// `parent` is the coarse family `π`, `child` the fine family `π'` with
/// `S_parent ⊆ S_child`; `cell_map` sends each parent cell `(t, a)` to the
/// child labels `Γ'_a(t)` whose cells sum back to `p^t_a`.
#[derive(Debug, Clone)]
pub struct RefinementMap {
    parent: Analyser,
    child: Analyser,
    cell_map: BTreeMap<(Time, String), Vec<String>>,
}

impl RefinementMap {
    /// Validates the refinement identities and wraps the triple.
    pub fn new(
        parent: Analyser,
        child: Analyser,
        cell_map: BTreeMap<(Time, String), Vec<String>>,
    ) -> Result<Self> {
        let d = parent.dim();
        if child.dim() != d {
            return Err(Error::DimensionMismatch(d, child.dim()));
        }
        for (t, part) in parent.iter() {
            let child_part = child.partition(t).map_err(|_| {
                Error::InvalidRefinement(format!("parent time {t} missing from child"))
            })?;
            let mut used: BTreeSet<&String> = BTreeSet::new();
            for (a, cell) in part.iter() {
                let group = cell_map.get(&(t.clone(), a.clone())).ok_or_else(|| {
                    Error::InvalidRefinement(format!("no cell map entry for ({t}, {a})"))
                })?;
                let mut sum = CMatrix::zeros(d, d);
                for b in group {
                    if !used.insert(b) {
                        return Err(Error::InvalidRefinement(format!(
                            "child label {b} at time {t} mapped twice"
                        )));
                    }
                    let sub = child_part.cell(b).ok_or_else(|| Error::UnknownLabel {
                        time: t.key().to_string(),
                        label: b.clone(),
                    })?;
                    sum += sub.matrix();
                }
                let residual = (&sum - cell.matrix()).norm();
                if residual > tol::op(d) {
                    return Err(Error::InvalidRefinement(format!(
                        "cells for ({t}, {a}) sum off by {residual:.3e}"
                    )));
                }
            }
            if used.len() != child_part.len() {
                return Err(Error::InvalidRefinement(format!(
                    "child labels at time {t} are not exhausted by the cell map"
                )));
            }
        }
        Ok(Self {
            parent,
            child,
            cell_map,
        })
    }

    pub fn parent(&self) -> &Analyser {
        &self.parent
    }

    pub fn child(&self) -> &Analyser {
        &self.child
    }

    pub fn cell_map(&self) -> &BTreeMap<(Time, String), Vec<String>> {
        &self.cell_map
    }

    pub fn child_labels(&self, t: &Time, parent_label: &str) -> Option<&[String]> {
        self.cell_map
            .get(&(t.clone(), parent_label.to_string()))
            .map(|v| v.as_slice())
    }

    /// Parent label owning a given child label at a parent time.
    pub fn parent_label(&self, t: &Time, child_label: &str) -> Option<&str> {
        self.cell_map.iter().find_map(|((u, a), group)| {
            (u == t && group.iter().any(|b| b == child_label)).then_some(a.as_str())
        })
    }

    /// Composes `self : π → π'` with `finer : π' → π''` into `π → π''`.
    pub fn compose(&self, finer: &RefinementMap) -> Result<RefinementMap> {
        let mut map = BTreeMap::new();
        for ((t, a), mids) in &self.cell_map {
            let mut group = Vec::new();
            for b in mids {
                let leaf = finer.child_labels(t, b).ok_or_else(|| {
                    Error::InvalidRefinement(format!("composition missing ({t}, {b})"))
                })?;
                group.extend(leaf.iter().cloned());
            }
            map.insert((t.clone(), a.clone()), group);
        }
        RefinementMap::new(self.parent.clone(), finer.child.clone(), map)
    }
}

/// Splits parent cells and appends extra times, producing the refinement
/// relation from the parent to the refined analyser.
///
/// Cells without an entry in `splits` are carried over unchanged under
/// their parent label.
pub fn refine(
    parent: &Analyser,
    splits: &BTreeMap<(Time, String), CellSplit>,
    extra_times: &[(Time, Partition)],
) -> Result<RefinementMap> {
    let d = parent.dim();
    let mut items = Vec::new();
    let mut cell_map = BTreeMap::new();
    for (t, part) in parent.iter() {
        let mut labels = Vec::new();
        let mut cells = Vec::new();
        for (a, cell) in part.iter() {
            match splits.get(&(t.clone(), a.clone())) {
                Some(split) => {
                    let mut sum = CMatrix::zeros(d, d);
                    let mut group = Vec::new();
                    for (b, sub) in split {
                        sum += sub.matrix();
                        labels.push(b.clone());
                        cells.push(sub.clone());
                        group.push(b.clone());
                    }
                    let residual = (&sum - cell.matrix()).norm();
                    if residual > tol::op(d) {
                        return Err(Error::SplitSum {
                            time: t.key().to_string(),
                            label: a.clone(),
                            residual,
                        });
                    }
                    cell_map.insert((t.clone(), a.clone()), group);
                }
                None => {
                    labels.push(a.clone());
                    cells.push(cell.clone());
                    cell_map.insert((t.clone(), a.clone()), vec![a.clone()]);
                }
            }
        }
        items.push((t.clone(), Partition::validated(labels, cells, t.key())?));
    }
    for (t, part) in extra_times {
        items.push((t.clone(), part.clone()));
    }
    let child = Analyser::new(items)?;
    RefinementMap::new(parent.clone(), child, cell_map)
}

/// Merges labels and drops times, producing the refinement relation whose
/// coarse side is the merged analyser and whose fine side is `parent`.
///
/// `merges` gives, per kept time, the label groups `(merged label,
/// members)`; times without an entry keep their labels as singleton groups.
pub fn coarsen(
    parent: &Analyser,
    merges: &BTreeMap<Time, Vec<(String, Vec<String>)>>,
    keep_times: &[Time],
) -> Result<RefinementMap> {
    let d = parent.dim();
    let mut items = Vec::new();
    let mut cell_map = BTreeMap::new();
    for t in keep_times {
        let part = parent.partition(t)?;
        let groups: Vec<(String, Vec<String>)> = match merges.get(t) {
            Some(g) => g.clone(),
            None => part
                .labels()
                .iter()
                .map(|a| (a.clone(), vec![a.clone()]))
                .collect(),
        };
        let mut used: BTreeSet<String> = BTreeSet::new();
        let mut labels = Vec::new();
        let mut cells = Vec::new();
        for (merged, members) in &groups {
            let mut sum = CMatrix::zeros(d, d);
            for b in members {
                if part.index_of(b).is_none() || !used.insert(b.clone()) {
                    return Err(Error::InvalidGrouping(t.key().to_string()));
                }
                sum += part.cell(b).unwrap().matrix();
            }
            labels.push(merged.clone());
            cells.push(Projector::new(sum)?);
            cell_map.insert((t.clone(), merged.clone()), members.clone());
        }
        if used.len() != part.len() {
            return Err(Error::InvalidGrouping(t.key().to_string()));
        }
        items.push((t.clone(), Partition::validated(labels, cells, t.key())?));
    }
    let coarse = Analyser::new(items)?;
    RefinementMap::new(coarse, parent.clone(), cell_map)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{meet, subspace_distance, CVector, C64};

    fn diag_partition(dim: usize, groups: &[(&str, &[usize])]) -> Partition {
        let cells: Vec<(String, Vec<usize>)> = groups
            .iter()
            .map(|(l, idx)| (l.to_string(), idx.to_vec()))
            .collect();
        Partition::from_index_cells(dim, &cells).unwrap()
    }

    #[test]
    fn single_cell_partition_is_valid() {
        let p = Partition::new(vec!["a".into()], vec![Projector::identity(3)]).unwrap();
        assert_eq!(p.len(), 1);
    }

    #[test]
    fn two_cell_diagonal_partition_is_valid() {
        let p = diag_partition(2, &[("0", &[0]), ("1", &[1])]);
        assert_eq!(p.dim(), 2);
    }

    #[test]
    fn overlapping_cells_are_rejected() {
        let c = Projector::coordinates(2, &[0]).unwrap();
        let err = Partition::new(vec!["a".into(), "b".into()], vec![c.clone(), c]).unwrap_err();
        assert!(matches!(
            err,
            Error::PartitionSum { .. } | Error::PartitionOverlap { .. }
        ));
    }

    #[test]
    fn static_hamiltonian_reproduces_base() {
        let base = diag_partition(2, &[("1", &[0]), ("2", &[1])]);
        let h = CMatrix::zeros(2, 2);
        let an = heisenberg_analyser(&base, &h, &[0.0, 1.0, 2.0]).unwrap();
        for (_, part) in an.iter() {
            for (a, cell) in part.iter() {
                assert!((cell.matrix() - base.cell(a).unwrap().matrix()).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn quarter_rotation_gives_45_degree_lines() {
        let base = diag_partition(2, &[("+", &[0]), ("-", &[1])]);
        let mut sy = CMatrix::zeros(2, 2);
        sy[(0, 1)] = C64::new(0.0, -1.0) * C64::new(std::f64::consts::FRAC_PI_4, 0.0);
        sy[(1, 0)] = C64::new(0.0, 1.0) * C64::new(std::f64::consts::FRAC_PI_4, 0.0);
        let an = heisenberg_analyser(&base, &sy, &[0.0, 1.0]).unwrap();
        // closed-form: U_1 is the rotation by pi/4, so the time-1 "+" cell
        // is the line through (cos pi/4, -sin pi/4)
        let c = std::f64::consts::FRAC_PI_4.cos();
        let line = CVector::from_vec(vec![C64::new(c, 0.0), C64::new(-c, 0.0)]);
        let expected = Projector::onto_vector(&line).unwrap();
        let got = an.cell(&Time::new(1.0), "+").unwrap();
        assert!((got.matrix() - expected.matrix()).norm() < 1e-12);
        // rank is preserved by conjugation
        assert_eq!(got.rank(), 1);
    }

    #[test]
    fn conjugation_preserves_cell_ranks() {
        let base = diag_partition(5, &[("a", &[0, 1]), ("b", &[2, 3, 4])]);
        let h = CMatrix::from_fn(5, 5, |i, j| {
            C64::new(((i * 5 + j) as f64).sin(), (i as f64 - j as f64) * 0.2)
        });
        let h = (&h + h.adjoint()) * C64::new(0.5, 0.0);
        let an = heisenberg_analyser(&base, &h, &[0.0, 0.7, 2.3]).unwrap();
        for (_, part) in an.iter() {
            for (label, cell) in part.iter() {
                assert_eq!(cell.rank(), base.cell(label).unwrap().rank());
            }
        }
    }

    #[test]
    fn heisenberg_group_consistency() {
        // conjugating the time-t cells by U_s lands on the time-(t+s) cells
        let base = diag_partition(3, &[("a", &[0, 1]), ("b", &[2])]);
        let mut h = CMatrix::zeros(3, 3);
        for i in 0..3 {
            for j in 0..3 {
                h[(i, j)] = C64::new(0.3 * (1 + i.min(j)) as f64, 0.1 * (i as f64 - j as f64));
            }
        }
        let (s, t) = (0.7, 1.3);
        let an = heisenberg_analyser(&base, &h, &[t, t + s]).unwrap();
        let us = hermitian_evolution(&h, s).unwrap();
        for label in ["a", "b"] {
            let pt = an.cell(&Time::new(t), label).unwrap();
            let pts = an.cell(&Time::new(t + s), label).unwrap();
            let shifted = us.adjoint() * pt.matrix() * &us;
            assert!((shifted - pts.matrix()).norm() < 1e-10);
        }
    }

    fn d4() -> Analyser {
        let s = diag_partition(4, &[("1", &[0, 1]), ("2", &[2, 3])]);
        let t = diag_partition(4, &[("1", &[0, 2]), ("2", &[1, 3])]);
        Analyser::new(vec![(Time::new(0.0), s), (Time::new(1.0), t)]).unwrap()
    }

    #[test]
    fn identity_refinement_is_identity() {
        let an = d4();
        let rm = refine(&an, &BTreeMap::new(), &[]).unwrap();
        assert_eq!(rm.child().times(), rm.parent().times());
        for (t, part) in rm.parent().iter() {
            for (a, cell) in part.iter() {
                let child_cell = rm.child().cell(t, a).unwrap();
                assert!((cell.matrix() - child_cell.matrix()).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn binary_split_refines() {
        let an = Analyser::new(vec![(
            Time::new(0.0),
            diag_partition(4, &[("1", &[0, 1]), ("2", &[2, 3])]),
        )])
        .unwrap();
        let mut splits = BTreeMap::new();
        splits.insert(
            (Time::new(0.0), "1".to_string()),
            vec![
                ("1a".to_string(), Projector::coordinates(4, &[0]).unwrap()),
                ("1b".to_string(), Projector::coordinates(4, &[1]).unwrap()),
            ],
        );
        let rm = refine(&an, &splits, &[]).unwrap();
        assert_eq!(rm.child().partition(&Time::new(0.0)).unwrap().len(), 3);
        assert_eq!(rm.parent_label(&Time::new(0.0), "1b"), Some("1"));
    }

    #[test]
    fn d4_refined_by_other_time_has_rank_one_cells() {
        let an = d4();
        let s = Time::new(0.0);
        let mut splits = BTreeMap::new();
        // split each time-s cell along the time-t labels
        splits.insert(
            (s.clone(), "1".to_string()),
            vec![
                ("1&1".to_string(), Projector::coordinates(4, &[0]).unwrap()),
                ("1&2".to_string(), Projector::coordinates(4, &[1]).unwrap()),
            ],
        );
        splits.insert(
            (s.clone(), "2".to_string()),
            vec![
                ("2&1".to_string(), Projector::coordinates(4, &[2]).unwrap()),
                ("2&2".to_string(), Projector::coordinates(4, &[3]).unwrap()),
            ],
        );
        let rm = refine(&an, &splits, &[]).unwrap();
        let part = rm.child().partition(&s).unwrap();
        assert_eq!(part.len(), 4);
        assert!(part.cells().iter().all(|c| c.rank() == 1));
        // brute-force check of the cell sums
        for (a, cell) in an.partition(&s).unwrap().iter() {
            let group = rm.child_labels(&s, a).unwrap();
            let mut sum = CMatrix::zeros(4, 4);
            for b in group {
                sum += part.cell(b).unwrap().matrix();
            }
            assert!((sum - cell.matrix()).norm() < 1e-12);
        }
    }

    #[test]
    fn split_sum_mismatch_is_rejected() {
        let an = d4();
        let mut splits = BTreeMap::new();
        splits.insert(
            (Time::new(0.0), "1".to_string()),
            vec![("x".to_string(), Projector::coordinates(4, &[0]).unwrap())],
        );
        assert!(matches!(
            refine(&an, &splits, &[]),
            Err(Error::SplitSum { .. })
        ));
    }

    #[test]
    fn coarsen_merge_all_gives_trivial_cells() {
        let an = d4();
        let mut merges = BTreeMap::new();
        for t in an.times() {
            merges.insert(
                t.clone(),
                vec![("all".to_string(), vec!["1".to_string(), "2".to_string()])],
            );
        }
        let rm = coarsen(&an, &merges, an.times()).unwrap();
        for (_, part) in rm.parent().iter() {
            assert_eq!(part.len(), 1);
            assert_eq!(part.cells()[0].rank(), 4);
        }
    }

    #[test]
    fn coarsen_keep_single_time() {
        let an = d4();
        let rm = coarsen(&an, &BTreeMap::new(), &[Time::new(0.0)]).unwrap();
        assert_eq!(rm.parent().len(), 1);
        assert_eq!(rm.child().len(), 2);
    }

    #[test]
    fn coarsen_merges_two_of_three() {
        let an = Analyser::new(vec![(
            Time::new(0.0),
            diag_partition(3, &[("a", &[0]), ("b", &[1]), ("c", &[2])]),
        )])
        .unwrap();
        let mut merges = BTreeMap::new();
        merges.insert(
            Time::new(0.0),
            vec![
                ("ab".to_string(), vec!["a".to_string(), "b".to_string()]),
                ("c".to_string(), vec!["c".to_string()]),
            ],
        );
        let rm = coarsen(&an, &merges, an.times()).unwrap();
        let part = rm.parent().partition(&Time::new(0.0)).unwrap();
        assert_eq!(part.len(), 2);
        let expected = Projector::coordinates(3, &[0, 1]).unwrap();
        assert!((part.cell("ab").unwrap().matrix() - expected.matrix()).norm() < 1e-12);
    }

    #[test]
    fn coarsen_identity_is_identity() {
        let an = d4();
        let rm = coarsen(&an, &BTreeMap::new(), an.times()).unwrap();
        for (t, part) in an.iter() {
            for (a, cell) in part.iter() {
                let coarse = rm.parent().cell(t, a).unwrap();
                assert!((coarse.matrix() - cell.matrix()).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn refinement_composition_reaches_grandparent() {
        let an = Analyser::new(vec![(
            Time::new(0.0),
            diag_partition(4, &[("top", &[0, 1, 2, 3])]),
        )])
        .unwrap();
        let mut s1 = BTreeMap::new();
        s1.insert(
            (Time::new(0.0), "top".to_string()),
            vec![
                (
                    "lo".to_string(),
                    Projector::coordinates(4, &[0, 1]).unwrap(),
                ),
                (
                    "hi".to_string(),
                    Projector::coordinates(4, &[2, 3]).unwrap(),
                ),
            ],
        );
        let rm1 = refine(&an, &s1, &[]).unwrap();
        let mut s2 = BTreeMap::new();
        s2.insert(
            (Time::new(0.0), "lo".to_string()),
            vec![
                ("0".to_string(), Projector::coordinates(4, &[0]).unwrap()),
                ("1".to_string(), Projector::coordinates(4, &[1]).unwrap()),
            ],
        );
        let rm2 = refine(rm1.child(), &s2, &[]).unwrap();
        let composed = rm1.compose(&rm2).unwrap();
        let group = composed.child_labels(&Time::new(0.0), "top").unwrap();
        assert_eq!(group.len(), 3);
    }

    #[test]
    fn q2_scenario_has_zero_meets() {
        let (an, _) = scenario("Q2", &BTreeMap::new()).unwrap();
        let t0 = Time::new(0.0);
        let t1 = Time::new(1.0);
        for a in ["+", "-"] {
            for b in ["+", "-"] {
                let m = meet(an.cell(&t0, a).unwrap(), an.cell(&t1, b).unwrap()).unwrap();
                assert_eq!(m.rank(), 0, "meet of ({a}, {b}) should vanish");
            }
        }
    }

    #[test]
    fn static_scenario_partitions_are_identical() {
        let mut params = BTreeMap::new();
        params.insert("steps".to_string(), 4.0);
        params.insert("p".to_string(), 0.7);
        let (an, phi) = scenario("STATIC", &params).unwrap();
        assert_eq!(an.len(), 4);
        let first = an.partition_at(0);
        for i in 1..an.len() {
            for (a, cell) in an.partition_at(i).iter() {
                assert!((cell.matrix() - first.cell(a).unwrap().matrix()).norm() < 1e-14);
            }
        }
        assert!((phi[0].re - 0.7_f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn tri9_cells_are_nested() {
        let (an, phi) = scenario("TRI9", &BTreeMap::new()).unwrap();
        assert_eq!(an.dim(), 9);
        let inner = an.cell(&Time::new(2.0), "1").unwrap();
        let outer = an.cell(&Time::new(1.0), "1").unwrap();
        // nesting: the level-2 cell sits inside the level-1 cell
        assert!((outer.matrix() * inner.matrix() - inner.matrix()).norm() < 1e-12);
        assert!((phi.norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn pgrid_scenario_builds() {
        let mut params = BTreeMap::new();
        params.insert("sites".to_string(), 8.0);
        let (an, phi) = scenario("PGRID", &params).unwrap();
        assert_eq!(an.dim(), 8);
        assert_eq!(an.len(), 2);
        assert!((phi.norm() - 1.0).abs() < 1e-12);
        // conjugation preserves cell ranks
        for (_, part) in an.iter() {
            assert!(part.cells().iter().all(|c| c.rank() == 4));
        }
    }

    #[test]
    fn unknown_scenario_is_an_error() {
        assert!(matches!(
            scenario("NOPE", &BTreeMap::new()),
            Err(Error::UnknownScenario(_))
        ));
    }

    #[test]
    fn double_complement_via_distance() {
        // complement twice through the partition machinery used above
        let part = diag_partition(4, &[("1", &[0, 1]), ("2", &[2, 3])]);
        let s = part.cells()[0].range().unwrap();
        let cc = crate::linalg::complement(&crate::linalg::complement(&s).unwrap()).unwrap();
        assert!(subspace_distance(&s, &cc) < tol::op(4));
    }
}
