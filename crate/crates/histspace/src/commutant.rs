//! The commutation subspace and everything hanging off the joint history
//! projectors.
//!
//! For each full history `ω` the joint projector is the iterated meet
//! `p_ω = ∧_i p^{t_i}_{ω_i}`. Distinct histories have orthogonal joint
//! ranges, so `E = Σ_ω p_ω` is itself a projector: its range is the
//! commutation subspace `H_π` (order-independence of all products from the
//! analyser) and its kernel is the null space `N`, with `H_π = N^⊥`.
//! Event subspaces `H_A` and the kernels `F_A` are ranges and kernels of
//! the partial sums `Σ_{ω ∈ A} p_ω`.
//!
//! Enumeration walks the history tree depth-first in time order and prunes
//! every subtree below a vanishing meet; extending an annihilated history
//! can never resurrect it.

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::analyser::{Analyser, Time};
use crate::error::{Error, Result};
use crate::histories::{Event, HistorySpace};
use crate::linalg::{
    complement, meet, meet_all, subspace_distance, CMatrix, CVector, Projector, Subspace,
};
use crate::tol;

/// Maximum number of times the subset search in [`na_member`] will handle.
pub const MAX_SUBSET_TIMES: usize = 12;

/// A joint history projector `p^{t_1..t_k}_{a_1..a_k}` with its index data.
#[derive(Debug, Clone)]
pub struct JointProjector {
    times: Vec<Time>,
    labels: Vec<String>,
    projector: Projector,
}

impl JointProjector {
    pub fn times(&self) -> &[Time] {
        &self.times
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn projector(&self) -> &Projector {
        &self.projector
    }

    pub fn rank(&self) -> usize {
        self.projector.rank()
    }

    pub fn is_zero(&self) -> bool {
        self.projector.is_zero()
    }
}

/// Iterated meet of the cells selected by `assignment`, taken in ascending
/// time order with early exit once the meet vanishes.
pub fn joint_projector(an: &Analyser, assignment: &[(Time, String)]) -> Result<JointProjector> {
    if assignment.is_empty() {
        return Err(Error::EmptyPartition);
    }
    let mut sorted = assignment.to_vec();
    sorted.sort_by(|a, b| a.0.cmp(&b.0));
    for w in sorted.windows(2) {
        if w[0].0 == w[1].0 {
            return Err(Error::DuplicateAssignment(w[0].0.key().to_string()));
        }
    }
    let cells = sorted
        .iter()
        .map(|(t, a)| an.cell(t, a))
        .collect::<Result<Vec<_>>>()?;
    let projector = meet_all(&cells)?;
    let (times, labels) = sorted.into_iter().unzip();
    Ok(JointProjector {
        times,
        labels,
        projector,
    })
}

/// The split `H = H_π ⊕ N` together with the table of nonzero joint
/// history projectors.
#[derive(Debug, Clone)]
pub struct CommutantDecomposition {
    space: HistorySpace,
    h_pi: Subspace,
    n_space: Subspace,
    p_pi: Projector,
    /// Flat history index → joint projector; pruned histories are absent
    /// and stand for the zero projector.
    joint_table: BTreeMap<usize, Projector>,
}

impl CommutantDecomposition {
    pub fn space(&self) -> &HistorySpace {
        &self.space
    }

    /// The commutation subspace `H_π`.
    pub fn h_pi(&self) -> &Subspace {
        &self.h_pi
    }

    /// The null space `N = H_π^⊥`.
    pub fn n_space(&self) -> &Subspace {
        &self.n_space
    }

    /// Projection onto `H_π`.
    pub fn p_pi(&self) -> &Projector {
        &self.p_pi
    }

    /// Joint projector matrix for a history, `None` when it vanished.
    pub fn joint_matrix(&self, flat: usize) -> Option<&CMatrix> {
        self.joint_table.get(&flat).map(|p| p.matrix())
    }

    /// Joint projector for a history, materialized with its index data.
    pub fn joint(&self, flat: usize) -> JointProjector {
        let assignment = self.space.assignment(flat);
        let (times, labels): (Vec<Time>, Vec<String>) = assignment.into_iter().unzip();
        let projector = self
            .joint_table
            .get(&flat)
            .cloned()
            .unwrap_or_else(|| Projector::zero(self.p_pi.dim()));
        JointProjector {
            times,
            labels,
            projector,
        }
    }

    /// Flat indices of the histories whose joint projector survived.
    pub fn surviving_histories(&self) -> impl Iterator<Item = usize> + '_ {
        self.joint_table.keys().copied()
    }
}

fn enumerate_joints(
    an: &Analyser,
    space: &HistorySpace,
    depth: usize,
    flat_prefix: usize,
    current: Option<&Projector>,
    table: &mut BTreeMap<usize, Projector>,
) -> Result<()> {
    if depth == space.num_times() {
        if let Some(p) = current {
            table.insert(flat_prefix, p.clone());
        }
        return Ok(());
    }
    let part = an.partition_at(depth);
    for (a, cell) in part.cells().iter().enumerate() {
        let next = match current {
            None => cell.clone(),
            Some(prev) => meet(prev, cell)?,
        };
        if next.is_zero() && depth + 1 < space.num_times() {
            // whole subtree annihilates
            continue;
        }
        if next.is_zero() {
            continue;
        }
        enumerate_joints(
            an,
            space,
            depth + 1,
            flat_prefix * part.len() + a,
            Some(&next),
            table,
        )?;
    }
    Ok(())
}

/// Enumerates all joint history projectors and splits the space into the
/// commutation subspace and its orthogonal null space.
pub fn compute_commutant(an: &Analyser, budget: usize) -> Result<CommutantDecomposition> {
    let space = HistorySpace::from_analyser(an);
    let size = space.size()?;
    if size > budget {
        return Err(Error::BudgetExceeded { size, budget });
    }
    let mut joint_table = BTreeMap::new();
    enumerate_joints(an, &space, 0, 0, None, &mut joint_table)?;

    let d = an.dim();
    let mut sum = CMatrix::zeros(d, d);
    for p in joint_table.values() {
        sum += p.matrix();
    }
    let e = Projector::new(sum)?;
    let h_pi = e.range()?;
    let n_space = e.kernel()?;
    let p_pi = h_pi.projector();
    Ok(CommutantDecomposition {
        space,
        h_pi,
        n_space,
        p_pi,
        joint_table,
    })
}

/// Residuals from checking the characterizations of the commutation
/// subspace on its own basis vectors.
#[derive(Debug, Clone)]
pub struct HpiReport {
    /// Worst `||p^{t_k}..p^{t_1} φ - p_ω φ||` over basis vectors and
    /// histories.
    pub max_ordered_residual: f64,
    /// Worst spread across randomly permuted products.
    pub max_permutation_residual: f64,
    /// `distance(H_π, N^⊥)`.
    pub hpi_nperp_distance: f64,
    pub checked_vectors: usize,
}

impl HpiReport {
    pub fn max_residual(&self) -> f64 {
        self.max_ordered_residual
            .max(self.max_permutation_residual)
            .max(self.hpi_nperp_distance)
    }
}

/// For each basis vector `φ` of `H_π`: the time-ordered products must agree
/// with the joint projectors, random reorderings of the products must leave
/// the result unchanged, and `H_π` must coincide with `N^⊥`.
pub fn check_hpi_characterizations(
    an: &Analyser,
    dec: &CommutantDecomposition,
    n_perms: usize,
    seed: u64,
) -> Result<HpiReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let space = dec.space();
    let size = space.size()?;
    let basis = dec.h_pi().basis();
    let mut report = HpiReport {
        max_ordered_residual: 0.0,
        max_permutation_residual: 0.0,
        hpi_nperp_distance: subspace_distance(dec.h_pi(), &complement(dec.n_space())?),
        checked_vectors: basis.ncols(),
    };
    for col in 0..basis.ncols() {
        let phi: CVector = basis.column(col).into_owned();
        for flat in 0..size {
            let history = space.decode(flat);
            let reference = match dec.joint_matrix(flat) {
                Some(p) => p * &phi,
                None => CVector::zeros(phi.len()),
            };
            // ascending time order: earliest factor applied first
            let mut ordered = phi.clone();
            for (i, &a) in history.iter().enumerate() {
                ordered = an.partition_at(i).cells()[a].apply(&ordered);
            }
            report.max_ordered_residual = report
                .max_ordered_residual
                .max((&ordered - &reference).norm());

            let mut order: Vec<usize> = (0..history.len()).collect();
            for _ in 0..n_perms {
                order.shuffle(&mut rng);
                let mut permuted = phi.clone();
                for &i in order.iter().rev() {
                    permuted = an.partition_at(i).cells()[history[i]].apply(&permuted);
                }
                report.max_permutation_residual = report
                    .max_permutation_residual
                    .max((&permuted - &reference).norm());
            }
        }
    }
    Ok(report)
}

fn check_event_space(dec: &CommutantDecomposition, a: &Event) -> Result<()> {
    if a.space() != dec.space() {
        return Err(Error::EventSpaceMismatch);
    }
    Ok(())
}

/// The event operator `p_A = Σ_{ω ∈ A} p_ω` (orthogonal sum, hence itself
/// a projector).
pub fn event_projector(dec: &CommutantDecomposition, a: &Event) -> Result<Projector> {
    check_event_space(dec, a)?;
    let d = dec.p_pi().dim();
    let mut sum = CMatrix::zeros(d, d);
    for &flat in a.members() {
        if let Some(p) = dec.joint_matrix(flat) {
            sum += p;
        }
    }
    Projector::new(sum)
}

/// The event subspace `H_A ⊆ H_π`, the range of the event operator.
pub fn event_subspace(dec: &CommutantDecomposition, a: &Event) -> Result<Subspace> {
    event_projector(dec, a)?.range()
}

/// The kernel `F_A` of the event operator: states annihilated by every
/// joint projector of a history in `A`. Satisfies `F_Ω = N`, antitone in
/// `A`, and `F_{A ∪ B} = F_A ∩ F_B`.
pub fn fa_kernel(dec: &CommutantDecomposition, a: &Event) -> Result<Subspace> {
    event_projector(dec, a)?.kernel()
}

/// Searches for one time subset that annihilates `φ` uniformly over all
/// histories in `A`.
///
/// Subsets of the analyser's times are scanned in order of increasing
/// size; the first witness is returned. The search is a full power-set
/// scan, capped at [`MAX_SUBSET_TIMES`] times.
pub fn na_member(an: &Analyser, a: &Event, phi: &CVector) -> Result<Option<Vec<Time>>> {
    let num_times = an.times().len();
    if num_times > MAX_SUBSET_TIMES {
        return Err(Error::SubsetSearchTooLarge {
            max: MAX_SUBSET_TIMES,
            got: num_times,
        });
    }
    let norm = phi.norm();
    if norm == 0.0 {
        return Err(Error::ZeroState);
    }
    let state = phi / nalgebra::Complex::new(norm, 0.0);
    let cutoff = tol::vec(an.dim());

    let mut masks: Vec<u32> = (1..(1u32 << num_times)).collect();
    masks.sort_by_key(|m| (m.count_ones(), *m));

    'mask: for mask in masks {
        let chosen: Vec<usize> = (0..num_times).filter(|i| mask & (1 << i) != 0).collect();
        // distinct restrictions of the member histories to the chosen times
        let mut restrictions: BTreeSet<Vec<usize>> = BTreeSet::new();
        for &flat in a.members() {
            let h = a.space().decode(flat);
            restrictions.insert(chosen.iter().map(|&i| h[i]).collect());
        }
        for restriction in &restrictions {
            let cells: Vec<&Projector> = chosen
                .iter()
                .enumerate()
                .map(|(pos, &ti)| &an.partition_at(ti).cells()[restriction[pos]])
                .collect();
            let p = meet_all(&cells)?;
            if p.apply(&state).norm() >= cutoff {
                continue 'mask;
            }
        }
        return Ok(Some(
            chosen.iter().map(|&i| an.times()[i].clone()).collect(),
        ));
    }
    Ok(None)
}
