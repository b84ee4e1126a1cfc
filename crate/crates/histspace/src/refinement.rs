//! Lifting events across a refinement and verifying the refinement
//! identity `p_{A'} = p_A p_{π'} = p_{π'} p_A`.
//!
//! A parent event `A` lifts to the child event `A'` containing every child
//! history whose labels at each parent time fall inside the split of the
//! corresponding parent label; labels at extra child times are
//! unconstrained. The lift commutes with complements and disjoint unions,
//! and on the operator side `H_{A'} = H_A ∩ H_{π'}`.

use crate::analyser::RefinementMap;
use crate::commutant::{event_projector, event_subspace, CommutantDecomposition};
use crate::error::{Error, Result};
use crate::histories::{Event, HistorySpace};
use crate::linalg::{meet, operator_norm, subspace_distance};

/// An event and its lift across a refinement.
#[derive(Debug, Clone)]
pub struct RefinedEvent {
    pub parent_event: Event,
    pub child_event: Event,
}

/// Lifts a parent event to the child history space.
pub fn refine_event(rm: &RefinementMap, a: &Event) -> Result<RefinedEvent> {
    let parent_space = HistorySpace::from_analyser(rm.parent());
    if a.space() != &parent_space {
        return Err(Error::EventSpaceMismatch);
    }
    let child_space = HistorySpace::from_analyser(rm.child());

    // map each (child time index, child label index) at a parent time to
    // the parent label index it came from
    let parent_times = rm.parent().times().to_vec();
    let mut origin: Vec<Option<Vec<usize>>> = vec![None; child_space.num_times()];
    for (pi, t) in parent_times.iter().enumerate() {
        let ci = child_space.time_index(t)?;
        let child_labels = child_space.labels_at(ci);
        let mut back = vec![usize::MAX; child_labels.len()];
        for (bi, b) in child_labels.iter().enumerate() {
            let pa = rm.parent_label(t, b).ok_or_else(|| {
                Error::InvalidRefinement(format!("child label {b} at {t} has no parent cell"))
            })?;
            back[bi] = parent_space.label_index(pi, pa)?;
        }
        origin[ci] = Some(back);
    }
    let parent_time_child_idx: Vec<usize> = parent_times
        .iter()
        .map(|t| child_space.time_index(t))
        .collect::<Result<_>>()?;

    let mut members = std::collections::BTreeSet::new();
    for flat in 0..child_space.size()? {
        let h = child_space.decode(flat);
        let mut parent_history = Vec::with_capacity(parent_times.len());
        for (pi, &ci) in parent_time_child_idx.iter().enumerate() {
            let back = origin[ci].as_ref().expect("parent time indexed");
            let _ = pi;
            parent_history.push(back[h[ci]]);
        }
        if a.contains(parent_space.flat_index(&parent_history)?) {
            members.insert(flat);
        }
    }
    Ok(RefinedEvent {
        parent_event: a.clone(),
        child_event: Event::from_flat(&child_space, members)?,
    })
}

/// Residuals of the refinement identity for one event.
#[derive(Debug, Clone)]
pub struct EventResidual {
    /// `||p_{A'} - p_A p_{π'}||`.
    pub operator: f64,
    /// `||p_A p_{π'} - p_{π'} p_A||`.
    pub commutation: f64,
    /// `distance(H_{A'}, H_A ∩ H_{π'})`.
    pub subspace: f64,
}

/// Refinement-identity residuals over a batch of events.
#[derive(Debug, Clone)]
pub struct RefinementCheck {
    pub per_event: Vec<EventResidual>,
    /// `||p_π p_{π'} - p_{π'}||`, the containment `H_{π'} ⊆ H_π`.
    pub hpi_containment: f64,
    pub max_residual: f64,
}

/// Verifies `p_{A'} = p_A p_{π'}`, the commutation of the two factors, and
/// the subspace identity `H_{A'} = H_A ∩ H_{π'}` for each supplied parent
/// event.
///
/// Both the operator and subspace forms are computed; they catch different
/// failure modes (product non-commutation vs. numerical rank loss).
pub fn check_refinement_identity(
    rm: &RefinementMap,
    parent_dec: &CommutantDecomposition,
    child_dec: &CommutantDecomposition,
    events: &[Event],
) -> Result<RefinementCheck> {
    let p_pi_child = child_dec.p_pi();
    let hpi_containment =
        operator_norm(&(parent_dec.p_pi().matrix() * p_pi_child.matrix() - p_pi_child.matrix()));
    let mut per_event = Vec::with_capacity(events.len());
    let mut max_residual = hpi_containment;
    for a in events {
        let lifted = refine_event(rm, a)?;
        let p_lift = event_projector(child_dec, &lifted.child_event)?;
        let p_a = event_projector(parent_dec, a)?;
        let operator = operator_norm(&(p_lift.matrix() - p_a.matrix() * p_pi_child.matrix()));
        let commutation = operator_norm(
            &(p_a.matrix() * p_pi_child.matrix() - p_pi_child.matrix() * p_a.matrix()),
        );
        let h_lift = event_subspace(child_dec, &lifted.child_event)?;
        let cap = meet(&p_a, p_pi_child)?.range()?;
        let subspace = subspace_distance(&h_lift, &cap);
        max_residual = max_residual.max(operator).max(commutation).max(subspace);
        per_event.push(EventResidual {
            operator,
            commutation,
            subspace,
        });
    }
    Ok(RefinementCheck {
        per_event,
        hpi_containment,
        max_residual,
    })
}
