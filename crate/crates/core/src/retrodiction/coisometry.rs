//! Retrodiction supermaps for `Tr_A` in co-isometry form.
//!
//! For a full-rank prior `Gamma: X -> Z A` every retrodiction supermap that
//! restores the prior acts on Choi operators as
//! `C_M -> C_Gamma^(1/2) V (C_SGamma^(-1/2) C_M C_SGamma^(-1/2) (x) 1_R) V^dag C_Gamma^(1/2)`
//! with `V V^dag = 1` and `C_SGamma = Tr_A C_Gamma`.

use serde::Serialize;

use crate::channels::Channel;
use crate::choi;
use crate::error::{Error, Result};
use crate::qmat::{eigvalsh, herm_sqrt, kron, pinv_sqrt, trace_out, CMatrix, SystemDims, PSD_TOL};
use crate::retrodiction::families::{analytical_v, AngleFamily, Family};
use crate::supermaps::{Superchannel, SuperchannelReport};

/// Smallest eigenvalue a prior Choi operator must exceed to count as full rank.
pub const FULL_RANK_TOL: f64 = 1e-9;

/// Tolerance on `V V^dag = 1`.
pub const CO_ISOMETRY_TOL: f64 = 1e-9;

/// Inputs and diagnostics of a retrodiction supermap built from a co-isometry.
#[derive(Clone, Debug)]
pub struct RetrodictionBuild {
    /// The prior with its output ordered as `(kept, traced)`.
    pub prior: Channel,
    pub traced: Vec<String>,
    pub v: CMatrix,
    pub r_dim: usize,
    /// Labels of the row factors of `V`: the recovered input, kept and traced systems.
    pub row_basis: Vec<String>,
    /// Labels of the column factors of `V`: input, kept system and `R`.
    pub col_basis: Vec<String>,
    pub angle: Option<AngleFamily>,
    pub validity: SuperchannelReport,
}

impl RetrodictionBuild {
    /// The closed-form build for a prior family.
    pub fn for_family(family: Family, p: f64) -> Result<(Superchannel, RetrodictionBuild)> {
        let (v, angle) = analytical_v(family, p)?;
        let (s, mut build) = build_from_v(&family.prior(p)?, &v, 2, &["A"])?;
        build.angle = Some(angle);
        Ok((s, build))
    }

    /// Reassembles the supermap.
    pub fn supermap(&self) -> Result<Superchannel> {
        Ok(build_from_v(&self.prior, &self.v, self.r_dim, &self.traced)?.0)
    }
}

pub(crate) struct PriorParts {
    pub ordered: Channel,
    pub kept: SystemDims,
    pub traced: SystemDims,
    pub c_gamma: CMatrix,
    pub c_s_gamma: CMatrix,
}

pub(crate) fn prior_parts<S: AsRef<str>>(prior: &Channel, traced: &[S]) -> Result<PriorParts> {
    let out = prior.out_dims();
    let kept = out.without(traced)?;
    let traced = out.select(traced)?;
    if traced.is_empty() {
        return Err(Error::MissingInput("no traced output system".into()));
    }
    let order: Vec<String> = kept.labels().iter().chain(traced.labels()).cloned().collect();
    let ordered = prior.permute_output(&order)?;
    let c_gamma = ordered.choi().clone();
    let c_s_gamma = trace_out(&c_gamma, &[prior.din(), kept.total(), traced.total()], &[false, false, true]);
    for (what, m) in [("prior", &c_gamma), ("traced prior", &c_s_gamma)] {
        let min = eigvalsh(m)[0];
        if min <= FULL_RANK_TOL {
            return Err(Error::RankDeficient(format!(
                "the {what} Choi operator is not full rank (min eigenvalue {min:e})"
            )));
        }
    }
    Ok(PriorParts { ordered, kept, traced, c_gamma, c_s_gamma })
}

/// Assembles the retrodiction supermap for `Tr_traced` from a co-isometry `V`.
///
/// The supermap's systems are `W = X_r`, slot `X -> Z`, and `Z_out = Z_r A_r`,
/// with recovered labels carrying an `r` suffix. Validity is reported, not assumed.
pub fn build_from_v<S: AsRef<str>>(
    prior: &Channel,
    v: &CMatrix,
    r_dim: usize,
    traced: &[S],
) -> Result<(Superchannel, RetrodictionBuild)> {
    let parts = prior_parts(prior, traced)?;
    let (dx, dz, da) = (prior.din(), parts.kept.total(), parts.traced.total());
    let (rows, cols) = (dx * dz * da, dx * dz * r_dim);
    if v.shape() != (rows, cols) {
        return Err(Error::DimensionMismatch(format!(
            "V is {}x{}, expected {rows}x{cols} for d_R = {r_dim}",
            v.nrows(),
            v.ncols()
        )));
    }
    let residual = v.co_isometry_residual();
    if residual > CO_ISOMETRY_TOL {
        return Err(Error::NotCoIsometric { residual });
    }
    let k = herm_sqrt(&parts.c_gamma, PSD_TOL)?
        .matmul(v)
        .matmul(&kron(&pinv_sqrt(&parts.c_s_gamma, FULL_RANK_TOL), &CMatrix::identity(r_dim)));
    let kraus: Vec<CMatrix> =
        (0..r_dim).map(|r| CMatrix::from_fn(rows, dx * dz, |i, j| k[(i, j * r_dim + r)])).collect();

    let x = prior.in_dims().clone();
    let out = parts.ordered.out_dims();
    let w = x.with_suffix("r");
    let z = out.with_suffix("r");
    let s = Superchannel::from_action(w.clone(), x.clone(), parts.kept.clone(), z.clone(), |c| {
        kraus.iter().fold(CMatrix::zeros(rows, rows), |mut acc, kk| {
            acc += &kk.sandwich(c);
            acc
        })
    });
    let validity = s.validate();
    let mut col_basis: Vec<String> = x.labels().iter().chain(parts.kept.labels()).cloned().collect();
    col_basis.push("R".to_string());
    let build = RetrodictionBuild {
        traced: parts.traced.labels().to_vec(),
        prior: parts.ordered,
        v: v.clone(),
        r_dim,
        row_basis: w.labels().iter().chain(z.labels()).cloned().collect(),
        col_basis,
        angle: None,
        validity,
    };
    Ok((s, build))
}

/// Recovers `V = C_Gamma^(-1/2) K (C_SGamma^(1/2) (x) 1_R)` from a retrodiction supermap built
/// for `prior`, using the Kraus operators `K_k` of its action on Choi operators.
///
/// Returns `V` and `d_R`, the number of Kraus operators.
pub fn extract_v<S: AsRef<str>>(r: &Superchannel, prior: &Channel, traced: &[S]) -> Result<(CMatrix, usize)> {
    let parts = prior_parts(prior, traced)?;
    let (dx, dz, da) = (prior.din(), parts.kept.total(), parts.traced.total());
    let [dw, rx, ry, rz] = r.group_dims();
    if rx != dx || ry != dz || dw * rz != dx * dz * da {
        return Err(Error::DimensionMismatch("supermap does not retrodict this prior".into()));
    }
    let (din, dout) = (dx * dz, dx * dz * da);
    let kraus = choi::kraus_from_choi(&r.transfer(), din, dout, FULL_RANK_TOL);
    let r_dim = kraus.len();
    let k = CMatrix::from_fn(dout, din * r_dim, |i, j| kraus[j % r_dim][(i, j / r_dim)]);
    let v = pinv_sqrt(&parts.c_gamma, FULL_RANK_TOL)
        .matmul(&k)
        .matmul(&kron(&herm_sqrt(&parts.c_s_gamma, PSD_TOL)?, &CMatrix::identity(r_dim)));
    Ok((v, r_dim))
}

/// The naive choice `V = 1` for the identity-family prior at `p = 1/2`.
#[derive(Clone, Debug, Serialize)]
pub struct NaiveCounterexample {
    #[serde(skip)]
    pub supermap: Superchannel,
    pub report: SuperchannelReport,
    /// `Tr_{Z_r A_r}` of the supermap Choi operator, in the basis `(X_r, X, Z)`.
    #[serde(skip)]
    pub marginal: CMatrix,
}

pub fn naive_v_counterexample() -> Result<NaiveCounterexample> {
    let prior = Family::Identity.prior(0.5)?;
    let (supermap, build) = build_from_v(&prior, &CMatrix::identity(8), 2, &["A"])?;
    Ok(NaiveCounterexample { marginal: supermap.marginal_wxy(), report: build.validity, supermap })
}
