//! Checks of the retrodiction axioms as numerical residuals.

use serde::Serialize;

use crate::channels::Channel;
use crate::error::Result;
use crate::qmat::{numerical_rank, CMatrix};
use crate::supermaps::{identity, Superchannel, SuperchannelReport};

/// Residual threshold for the property verdicts.
pub const PROPERTY_TOL: f64 = 1e-9;

#[derive(Clone, Debug, Serialize)]
pub struct PropertyReport {
    /// The retrodiction map is a superchannel.
    pub validity: SuperchannelReport,
    pub property1: bool,
    /// `max |R(S(Gamma)) - Gamma|` over Choi entries.
    pub property2_residual: f64,
    pub property2: bool,
    /// `max |R o S - id|` over Choi entries, when `S` is injective on its slot.
    pub property3_residual: Option<f64>,
    pub property3: Option<bool>,
}

/// Properties 1 to 3 for a retrodiction map `r` of `s` with prior `prior`.
pub fn verify_properties(r: &Superchannel, s: &Superchannel, prior: &Channel) -> Result<PropertyReport> {
    let validity = r.validate();
    let property2_residual = r.apply(&s.apply(prior)?)?.distance(prior);
    let property3_residual = if slot_injective(s) { Some(s.then(r)?.distance(&identity(s.x(), s.y()))) } else { None };
    Ok(PropertyReport {
        property1: validity.valid,
        validity,
        property2: property2_residual <= PROPERTY_TOL,
        property2_residual,
        property3: property3_residual.map(|d| d <= PROPERTY_TOL),
        property3_residual,
    })
}

/// Whether `C_N -> C_S(N)` is injective on all operators of the slot.
pub fn slot_injective(s: &Superchannel) -> bool {
    let [dw, dx, dy, dz] = s.group_dims();
    let (din, dout) = (dx * dy, dw * dz);
    let t = s.transfer();
    // Natural representation acting on row-major vectorized operators.
    let l = CMatrix::from_fn(dout * dout, din * din, |r, c| {
        let (o, p) = (r / dout, r % dout);
        let (a, b) = (c / din, c % din);
        t[(a * dout + o, b * dout + p)]
    });
    numerical_rank(&l.adjoint().matmul(&l), 1e-12) == din * din
}

/// Compositionality: the retrodiction of `outer o inner` against
/// `inner_retro o outer_retro`, where `outer_retro` uses the propagated prior.
pub fn compositional_residual(
    joint: &Superchannel,
    outer_retro: &Superchannel,
    inner_retro: &Superchannel,
) -> Result<f64> {
    Ok(joint.distance(&outer_retro.then(inner_retro)?))
}

/// Tensoriality: the retrodiction of `S1 (x) S2` against the product of retrodictions.
pub fn tensorial_residual(joint: &Superchannel, first: &Superchannel, second: &Superchannel) -> Result<f64> {
    Ok(joint.distance(&first.tensor(second)?))
}

/// Distance between a supermap and the retrodiction of its retrodiction. Diagnostic only.
pub fn involutive_residual(s: &Superchannel, retro_of_retro: &Superchannel) -> f64 {
    s.distance(retro_of_retro)
}
