//! Superchannels: maps from channels `X -> Y` to channels `W -> Z`.
//!
//! The Choi operator of a supermap is stored over the factor order
//! `(W, X, Y, Z)`. It acts on the Choi operator of a channel by the link
//! product `C_S(N) = Tr_XY[(1_W (x) C_N^T (x) 1_Z) C]`.

use serde::{Deserialize, Serialize};

use crate::channels::{Channel, CHANNEL_TOL};
use crate::choi;
use crate::error::{Error, Result};
use crate::qmat::{eigvalsh, kron, numerical_rank, permute_factors, trace_out, CMatrix, SystemDims, C64, ONE};

/// Tolerance on isometries supplied to constructors.
pub const UNITARY_TOL: f64 = 1e-10;

/// Threshold for [`Superchannel::rank`], relative to the largest eigenvalue.
pub const RANK_TOL: f64 = 1e-9;

/// Residuals of the superchannel conditions. `valid` holds iff every residual is within [`CHANNEL_TOL`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SuperchannelReport {
    pub hermiticity_violation: f64,
    pub min_eigenvalue: f64,
    /// `max |Tr_Z C - Tr_YZ C / d_Y (x) 1_Y|`.
    pub condition1_residual: f64,
    /// `max |Tr_XYZ C - d_Y 1_W|`.
    pub condition2_residual: f64,
    pub valid: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Superchannel {
    choi: CMatrix,
    w: SystemDims,
    x: SystemDims,
    y: SystemDims,
    z: SystemDims,
}

impl Superchannel {
    /// Checks shapes only; see [`Superchannel::validate`].
    pub fn from_choi_unchecked(
        choi: CMatrix,
        w: SystemDims,
        x: SystemDims,
        y: SystemDims,
        z: SystemDims,
    ) -> Result<Self> {
        let n = w.total() * x.total() * y.total() * z.total();
        if !choi.is_square() || choi.nrows() != n {
            return Err(Error::DimensionMismatch(format!(
                "{}x{} supermap Choi operator for dims {:?} {:?} {:?} {:?}",
                choi.nrows(),
                choi.ncols(),
                w.dims(),
                x.dims(),
                y.dims(),
                z.dims()
            )));
        }
        if !choi.is_finite() {
            return Err(Error::NonFinite);
        }
        Ok(Self { choi, w, x, y, z })
    }

    /// Validated constructor.
    pub fn new(choi: CMatrix, w: SystemDims, x: SystemDims, y: SystemDims, z: SystemDims) -> Result<Self> {
        let s = Self::from_choi_unchecked(choi, w, x, y, z)?;
        s.ensure_valid()?;
        Ok(s)
    }

    /// Supermap with the given linear action on Choi operators `C_N (X,Y) -> C_S(N) (W,Z)`.
    pub fn from_action(
        w: SystemDims,
        x: SystemDims,
        y: SystemDims,
        z: SystemDims,
        f: impl Fn(&CMatrix) -> CMatrix,
    ) -> Self {
        let transfer = choi::from_linear_map(x.total() * y.total(), w.total() * z.total(), f);
        Self::from_transfer(transfer, w, x, y, z)
    }

    /// Inverse of [`Superchannel::transfer`].
    fn from_transfer(transfer: CMatrix, w: SystemDims, x: SystemDims, y: SystemDims, z: SystemDims) -> Self {
        let dims = [x.total(), y.total(), w.total(), z.total()];
        let choi = permute_factors(&transfer, &dims, &[2, 0, 1, 3]);
        Self { choi, w, x, y, z }
    }

    /// The Choi operator reordered to `(X Y)(W Z)`, i.e. the Choi operator of
    /// the supermap viewed as a CP map on slot Choi operators.
    pub fn transfer(&self) -> CMatrix {
        permute_factors(&self.choi, &self.group_dims(), &[1, 2, 0, 3])
    }

    pub fn choi(&self) -> &CMatrix {
        &self.choi
    }

    pub fn w(&self) -> &SystemDims {
        &self.w
    }

    pub fn x(&self) -> &SystemDims {
        &self.x
    }

    pub fn y(&self) -> &SystemDims {
        &self.y
    }

    pub fn z(&self) -> &SystemDims {
        &self.z
    }

    /// Total dimensions of `W, X, Y, Z`.
    pub fn group_dims(&self) -> [usize; 4] {
        [self.w.total(), self.x.total(), self.y.total(), self.z.total()]
    }

    /// `Tr_Z C`, an operator on `W X Y`.
    pub fn marginal_wxy(&self) -> CMatrix {
        trace_out(&self.choi, &self.group_dims(), &[false, false, false, true])
    }

    pub fn validate(&self) -> SuperchannelReport {
        let [dw, dx, dy, _] = self.group_dims();
        let hermiticity_violation = self.choi.hermiticity_violation();
        let min_eigenvalue = eigvalsh(&self.choi).first().copied().unwrap_or(0.0);
        let tz = self.marginal_wxy();
        let tyz = trace_out(&tz, &[dw * dx, dy], &[false, true]);
        let cond1 = kron(&tyz.scale_re(1.0 / dy as f64), &CMatrix::identity(dy));
        let condition1_residual = tz.max_abs_diff(&cond1);
        let txyz = trace_out(&tyz, &[dw, dx], &[false, true]);
        let condition2_residual = txyz.max_abs_diff(&CMatrix::identity(dw).scale_re(dy as f64));
        SuperchannelReport {
            hermiticity_violation,
            min_eigenvalue,
            condition1_residual,
            condition2_residual,
            valid: hermiticity_violation <= CHANNEL_TOL
                && min_eigenvalue >= -CHANNEL_TOL
                && condition1_residual <= CHANNEL_TOL
                && condition2_residual <= CHANNEL_TOL,
        }
    }

    fn ensure_valid(&self) -> Result<()> {
        let r = self.validate();
        if r.hermiticity_violation > CHANNEL_TOL {
            return Err(Error::NotHermitian { violation: r.hermiticity_violation });
        }
        if r.min_eigenvalue < -CHANNEL_TOL {
            return Err(Error::NotPsd { min_eigenvalue: r.min_eigenvalue });
        }
        let residual = r.condition1_residual.max(r.condition2_residual);
        if residual > CHANNEL_TOL {
            return Err(Error::NotTracePreserving { residual });
        }
        Ok(())
    }

    /// Link product with an arbitrary operator on `X Y`.
    pub fn apply_choi(&self, c_n: &CMatrix) -> Result<CMatrix> {
        let [dw, dx, dy, dz] = self.group_dims();
        if c_n.shape() != (dx * dy, dx * dy) {
            return Err(Error::DimensionMismatch(format!(
                "{}x{} operator in a slot of dimension {}",
                c_n.nrows(),
                c_n.ncols(),
                dx * dy
            )));
        }
        Ok(choi::apply(&self.transfer(), dx * dy, dw * dz, c_n))
    }

    /// `S(N)`. The result is not re-validated; a valid supermap maps channels to channels.
    pub fn apply(&self, n: &Channel) -> Result<Channel> {
        if n.din() != self.x.total() || n.dout() != self.y.total() {
            return Err(Error::DimensionMismatch(format!(
                "channel {} -> {} in a slot {} -> {}",
                n.din(),
                n.dout(),
                self.x.total(),
                self.y.total()
            )));
        }
        Channel::from_choi_unchecked(self.apply_choi(n.choi())?, self.w.clone(), self.z.clone())
    }

    /// `next o self`: the outer systems of `self` become the slot of `next`.
    pub fn then(&self, next: &Superchannel) -> Result<Superchannel> {
        let [dw, dx, dy, dz] = self.group_dims();
        if next.x.total() != dw || next.y.total() != dz {
            return Err(Error::DimensionMismatch(format!(
                "supermap with outer {} -> {} feeds a slot {} -> {}",
                dw,
                dz,
                next.x.total(),
                next.y.total()
            )));
        }
        let [nw, _, _, nz] = next.group_dims();
        let transfer = choi::compose(&self.transfer(), dx * dy, dw * dz, &next.transfer(), nw * nz);
        Ok(Self::from_transfer(transfer, next.w.clone(), self.x.clone(), self.y.clone(), next.z.clone()))
    }

    /// `S1 (x) S2`, acting on product channels as `N1 (x) N2 -> S1(N1) (x) S2(N2)`.
    pub fn tensor(&self, other: &Superchannel) -> Result<Superchannel> {
        let a = self.group_dims();
        let b = other.group_dims();
        let dims = [a[0], a[1], a[2], a[3], b[0], b[1], b[2], b[3]];
        let choi = permute_factors(&kron(&self.choi, &other.choi), &dims, &[0, 4, 1, 5, 2, 6, 3, 7]);
        Self::from_choi_unchecked(
            choi,
            self.w.concat(&other.w)?,
            self.x.concat(&other.x)?,
            self.y.concat(&other.y)?,
            self.z.concat(&other.z)?,
        )
    }

    /// Numerical rank of the Choi operator.
    pub fn rank(&self) -> usize {
        numerical_rank(&self.choi, RANK_TOL)
    }

    pub fn distance(&self, other: &Superchannel) -> f64 {
        if self.choi.shape() != other.choi.shape() {
            return f64::INFINITY;
        }
        self.choi.max_abs_diff(&other.choi)
    }
}

/// Superchannel validation as a free function over raw data.
pub fn validate_superchannel(
    choi: CMatrix,
    w: SystemDims,
    x: SystemDims,
    y: SystemDims,
    z: SystemDims,
) -> Result<SuperchannelReport> {
    Ok(Superchannel::from_choi_unchecked(choi, w, x, y, z)?.validate())
}

/// Numerical rank of a superchannel's Choi operator.
pub fn supermap_rank(s: &Superchannel) -> usize {
    s.rank()
}

/// The identity supermap on channels `x -> y`.
pub fn identity(x: &SystemDims, y: &SystemDims) -> Superchannel {
    Superchannel::from_action(x.clone(), x.clone(), y.clone(), y.clone(), CMatrix::clone)
}

/// `S(N) = post o (N (x) id_M) o pre` with a memory wire `M` of dimension `mem_dim`.
///
/// `pre` maps `W` into `X (x) M`, `post` maps `Y (x) M` into `Z`.
pub fn from_pre_post(
    pre: &Channel,
    post: &Channel,
    x: &SystemDims,
    y: &SystemDims,
    mem_dim: usize,
) -> Result<Superchannel> {
    let (dx, dy) = (x.total(), y.total());
    if pre.dout() != dx * mem_dim || post.din() != dy * mem_dim {
        return Err(Error::DimensionMismatch(format!(
            "pre-processing into {} and post-processing from {} around a {dx} -> {dy} slot with memory {mem_dim}",
            pre.dout(),
            post.din()
        )));
    }
    let (dw, dz) = (pre.din(), post.dout());
    let mem = choi::identity(mem_dim);
    Ok(Superchannel::from_action(pre.in_dims().clone(), x.clone(), y.clone(), post.out_dims().clone(), |c| {
        let widened = choi::tensor(c, dx, dy, &mem, mem_dim, mem_dim);
        let first = choi::compose(pre.choi(), dw, dx * mem_dim, &widened, dy * mem_dim);
        choi::compose(&first, dw, dy * mem_dim, post.choi(), dz)
    }))
}

/// `S1(N) = N (x) id_M`.
pub fn s1(x: &SystemDims, y: &SystemDims, m: &SystemDims) -> Result<Superchannel> {
    let (dx, dy, dm) = (x.total(), y.total(), m.total());
    let mem = choi::identity(dm);
    Ok(Superchannel::from_action(x.concat(m)?, x.clone(), y.clone(), y.concat(m)?, |c| {
        choi::tensor(c, dx, dy, &mem, dm, dm)
    }))
}

/// `S2(N) = U_R o N o U_L` for isometries `U_L: W -> X` and `U_R: Y -> Z`.
pub fn s2(
    u_left: &CMatrix,
    u_right: &CMatrix,
    w: &SystemDims,
    x: &SystemDims,
    y: &SystemDims,
    z: &SystemDims,
) -> Result<Superchannel> {
    check_isometry(u_left, w.total(), x.total())?;
    check_isometry(u_right, y.total(), z.total())?;
    let m = kron(&u_left.transpose(), u_right);
    Ok(Superchannel::from_action(w.clone(), x.clone(), y.clone(), z.clone(), |c| m.sandwich(c)))
}

/// `S3(N) = N o (id_W (x) P_phi)`, where `P_phi` prepares `phi` on `A` and the slot input is `W A`.
pub fn s3(w: &SystemDims, a: &SystemDims, phi: &[C64], y: &SystemDims) -> Result<Superchannel> {
    check_unit(phi, a.total())?;
    let (dw, dy) = (w.total(), y.total());
    let row = CMatrix::from_vec(1, phi.len(), phi.to_vec())?;
    let m = kron(&kron(&CMatrix::identity(dw), &row), &CMatrix::identity(dy));
    Ok(Superchannel::from_action(w.clone(), w.concat(a)?, y.clone(), y.clone(), |c| m.sandwich(c)))
}

/// `S4(N) = Tr_A o N` for a slot `x -> z (x) a`.
pub fn s4(x: &SystemDims, z: &SystemDims, a: &SystemDims) -> Result<Superchannel> {
    let (dx, dz, da) = (x.total(), z.total(), a.total());
    Ok(Superchannel::from_action(x.clone(), x.clone(), z.concat(a)?, z.clone(), |c| {
        trace_out(c, &[dx, dz, da], &[false, false, true])
    }))
}

/// Circuit form of a superchannel:
/// `S(N) = Tr_AR o U_R o (N (x) id_AM) o U_L o (id_W (x) P_phi)`.
///
/// The teeth may be isometries: `U_L: W A_L -> X A_M`, `U_R: Y A_M -> Z A_R`.
#[derive(Clone, Debug)]
pub struct TeethRealization {
    pub phi: Vec<C64>,
    pub u_left: CMatrix,
    pub u_right: CMatrix,
    pub w: SystemDims,
    pub x: SystemDims,
    pub y: SystemDims,
    pub z: SystemDims,
    pub a_left: SystemDims,
    pub a_mid: SystemDims,
    pub a_right: SystemDims,
}

impl TeethRealization {
    /// Teeth without the initial ancilla `A_L`.
    pub fn without_initial_ancilla(
        u_left: CMatrix,
        u_right: CMatrix,
        dims: [SystemDims; 4],
        a_mid: SystemDims,
        a_right: SystemDims,
    ) -> Self {
        let [w, x, y, z] = dims;
        Self { phi: vec![ONE], u_left, u_right, w, x, y, z, a_left: SystemDims::empty(), a_mid, a_right }
    }

    pub fn check(&self) -> Result<()> {
        let (dw, dx, dy, dz) = (self.w.total(), self.x.total(), self.y.total(), self.z.total());
        let (dal, dam, dar) = (self.a_left.total(), self.a_mid.total(), self.a_right.total());
        check_unit(&self.phi, dal)?;
        check_isometry(&self.u_left, dw * dal, dx * dam)?;
        check_isometry(&self.u_right, dy * dam, dz * dar)
    }
}

/// Superchannel of a circuit realization, validated.
pub fn from_teeth(t: &TeethRealization) -> Result<Superchannel> {
    t.check()?;
    let (dw, dz) = (t.w.total(), t.z.total());
    let (dam, dar) = (t.a_mid.total(), t.a_right.total());
    let xm = t.x.concat(&t.a_mid)?;
    let ym = t.y.concat(&t.a_mid)?;
    let prep = kron(&CMatrix::identity(dw), &CMatrix::ket(&t.phi));
    let pre = Channel::from_kraus(&[t.u_left.matmul(&prep)], t.w.clone(), xm)?;
    let discard: Vec<CMatrix> = (0..dar)
        .map(|k| {
            let bra = CMatrix::from_fn(1, dar, |_, j| if j == k { ONE } else { C64::default() });
            kron(&CMatrix::identity(dz), &bra).matmul(&t.u_right)
        })
        .collect();
    let post = Channel::from_kraus(&discard, ym, t.z.clone())?;
    let s = from_pre_post(&pre, &post, &t.x, &t.y, dam)?;
    s.ensure_valid()?;
    Ok(s)
}

fn check_isometry(u: &CMatrix, din: usize, dout: usize) -> Result<()> {
    if u.shape() != (dout, din) {
        return Err(Error::DimensionMismatch(format!(
            "{}x{} operator where {dout}x{din} is required",
            u.nrows(),
            u.ncols()
        )));
    }
    let residual = u.isometry_residual();
    if residual > UNITARY_TOL {
        return Err(Error::NotUnitary { residual });
    }
    Ok(())
}

fn check_unit(phi: &[C64], d: usize) -> Result<()> {
    if phi.len() != d {
        return Err(Error::DimensionMismatch(format!("vector of length {} on a {d}-dimensional system", phi.len())));
    }
    let norm = phi.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    if (norm - 1.0).abs() > UNITARY_TOL {
        return Err(Error::NotUnitVector { norm });
    }
    Ok(())
}
