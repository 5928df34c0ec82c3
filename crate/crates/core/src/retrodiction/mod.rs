//! Retrodiction: the Petz map and retrodiction supermaps.
//!
//! A retrodiction supermap `R` for a supermap `S` and a prior channel `Gamma`
//! takes the observed channel `S(N)` back to an updated belief about `N`.

pub(crate) mod coisometry;
mod families;
mod properties;

pub use coisometry::{build_from_v, extract_v, naive_v_counterexample, NaiveCounterexample, RetrodictionBuild};
pub use families::{analytical_v, circuit_realization, AngleFamily, Family};
pub use properties::{
    compositional_residual, involutive_residual, slot_injective, tensorial_residual, verify_properties, PropertyReport,
};

use crate::channels::{instrument_phi, Channel, DensityMatrix, MeasurePrepareChannel, CHANNEL_TOL};
use crate::choi;
use crate::error::{Error, Result};
use crate::qmat::{herm_sqrt, kron, pinv_sqrt, CMatrix, SystemDims, C64, PSD_TOL};
use crate::supermaps::{from_pre_post, s2, Superchannel};

/// Eigenvalues at or below this are treated as kernel when inverting `E(gamma)`.
pub const SUPPORT_TOL: f64 = 1e-12;

/// `R(sigma) = sqrt(gamma) E^dag(E(gamma)^(-1/2) sigma E(gamma)^(-1/2)) sqrt(gamma)`.
///
/// Inverse square roots act on the support of `E(gamma)`.
pub fn petz(e: &Channel, gamma: &DensityMatrix) -> Result<Channel> {
    if gamma.dims().dims() != e.in_dims().dims() {
        return Err(Error::DimensionMismatch(format!(
            "prior on {:?} for a channel from {:?}",
            gamma.dims().dims(),
            e.in_dims().dims()
        )));
    }
    let image = e.apply_operator(gamma.mat())?;
    let inv = pinv_sqrt(&image, SUPPORT_TOL);
    let root = herm_sqrt(gamma.mat(), PSD_TOL)?;
    let choi = choi::from_linear_map(e.dout(), e.din(), |sigma| {
        root.matmul(&choi::apply_dual(e.choi(), e.din(), e.dout(), &inv.sandwich(sigma))).matmul(&root)
    });
    Channel::from_choi_unchecked(choi, e.out_dims().clone(), e.in_dims().clone())
}

/// Retrodiction for `S1(N) = N (x) id_M`: feed the maximally mixed state into `M` and discard its output.
pub fn retro_s1(x: &SystemDims, y: &SystemDims, m: &SystemDims) -> Result<Superchannel> {
    let (dx, dm) = (x.total(), m.total());
    let tau = CMatrix::identity(dm).scale_re(1.0 / dm as f64);
    let xm = x.concat(m)?;
    let ym = y.concat(m)?;
    let append =
        Channel::from_choi_unchecked(choi::from_linear_map(dx, dx * dm, |r| kron(r, &tau)), x.clone(), xm.clone())?;
    let discard = Channel::partial_trace_map(&ym, m.labels())?;
    from_pre_post(&append, &discard, &xm, &ym, 1)
}

/// Retrodiction for `S2(N) = U_R o N o U_L`: the inverse conjugation, independent of the prior.
pub fn retro_s2(
    u_left: &CMatrix,
    u_right: &CMatrix,
    w: &SystemDims,
    x: &SystemDims,
    y: &SystemDims,
    z: &SystemDims,
) -> Result<Superchannel> {
    for u in [u_left, u_right] {
        let residual = u.unitarity_residual();
        if !u.is_square() || residual > crate::supermaps::UNITARY_TOL {
            return Err(Error::NotUnitary { residual });
        }
    }
    s2(&u_left.adjoint(), &u_right.adjoint(), x, w, z, y)
}

/// Splits `dims` into leading factors and the trailing `ancilla` factors.
fn split_trailing<S: AsRef<str>>(dims: &SystemDims, ancilla: &[S]) -> Result<(SystemDims, SystemDims)> {
    let a = dims.select(ancilla)?;
    let rest = dims.without(ancilla)?;
    if rest.concat(&a)?.labels() != dims.labels() {
        return Err(Error::InvalidDims(format!(
            "{:?} must be the trailing factors of {:?}",
            a.labels(),
            dims.labels()
        )));
    }
    Ok((rest, a))
}

/// Retrodiction for `S3(N) = N o (id_W (x) P_phi)` with a prior `Gamma: W A -> Y` whose
/// dependence on `A` ignores coherence between `phi` and its complement:
///
/// `R(M) = M (x) (Tr o J_1) + Tr[M(tau)] Gamma o (id_W (x) J_0)`, `tau = 1/d_W`.
pub fn retro_s3_coherence<S: AsRef<str>>(prior: &Channel, phi: &[C64], ancilla: &[S]) -> Result<Superchannel> {
    let (w, a) = split_trailing(prior.in_dims(), ancilla)?;
    let inst = instrument_phi(phi, a.clone())?;
    let dephase = Channel::identity(w.clone()).tensor(&inst.channel())?;
    let residual = dephase.then(prior)?.distance(prior);
    if residual > CHANNEL_TOL {
        return Err(Error::PriorNotDecohered { residual });
    }
    let (dw, da, dy) = (w.total(), a.total(), prior.dout());
    // Tr o J_1 has Choi operator conj(|phi><phi|).
    let t1 = CMatrix::projector(phi).conj();
    let rest = Channel::identity(w.clone()).tensor(&inst.branch(1))?.then(prior)?;
    let y = prior.out_dims().clone();
    Ok(Superchannel::from_action(prior.in_dims().clone(), w, y.clone(), y, |c| {
        let kept = choi::tensor(c, dw, dy, &t1, da, 1);
        &kept + &rest.choi().scale_re(c.trace().re / dw as f64)
    }))
}

/// Retrodiction for `S4(N) = Tr_A o N` with a measure-and-prepare prior: measure with the
/// prior's projectors and apply the Petz map of `Tr_A` with prior `gamma_k` on outcome `k`.
pub fn retro_s4_measure_prepare<S: AsRef<str>>(prior: &MeasurePrepareChannel, traced: &[S]) -> Result<Superchannel> {
    let out = prior.out_dims();
    let kept = out.without(traced)?;
    let x = prior.in_dims();
    let tr = Channel::partial_trace_map(out, traced)?;
    let inst = prior.instrument();
    let branches: Vec<(Channel, Channel)> =
        prior.prepared().iter().enumerate().map(|(k, g)| Ok((inst.branch(k), petz(&tr, g)?))).collect::<Result<_>>()?;
    let (dx, dz, dout) = (x.total(), kept.total(), out.total());
    Ok(Superchannel::from_action(x.clone(), x.clone(), kept, out.clone(), |c| {
        let mut acc = CMatrix::zeros(dx * dout, dx * dout);
        for (jk, pk) in &branches {
            let measured = choi::compose(jk.choi(), dx, dx, c, dz);
            acc += &choi::compose(&measured, dx, dz, pk.choi(), dout);
        }
        acc
    }))
}
