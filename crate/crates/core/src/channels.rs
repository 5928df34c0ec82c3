//! States, channels and instruments.
//!
//! A [`Channel`] stores the unnormalized Choi operator over `(input, output)`
//! together with labeled dimension lists for both sides.

use serde::Serialize;

use crate::choi;
use crate::error::{Error, Result};
use crate::qmat::{
    c, eigvalsh, herm_sqrt, kron, partial_trace, permutation_indices, permute_factors, re, CMatrix, SystemDims, C64,
    ONE, PSD_TOL, ZERO,
};

/// Uniform tolerance for channel validation.
pub const CHANNEL_TOL: f64 = 1e-9;
/// Tolerance on density-matrix hermiticity and trace.
pub const STATE_TOL: f64 = 1e-10;

#[derive(Clone, Debug, PartialEq)]
pub struct DensityMatrix {
    mat: CMatrix,
    dims: SystemDims,
}

impl DensityMatrix {
    pub fn new(mat: CMatrix, dims: SystemDims) -> Result<Self> {
        if !mat.is_square() || mat.nrows() != dims.total() {
            return Err(Error::DimensionMismatch(format!(
                "{}x{} state for dims {:?}",
                mat.nrows(),
                mat.ncols(),
                dims.dims()
            )));
        }
        let violation = mat.hermiticity_violation();
        if violation > STATE_TOL {
            return Err(Error::NotHermitian { violation });
        }
        let mat = mat.hermitian_part();
        let min = eigvalsh(&mat).first().copied().unwrap_or(0.0);
        if min < -PSD_TOL {
            return Err(Error::NotPsd { min_eigenvalue: min });
        }
        let tr = mat.trace().re;
        if (tr - 1.0).abs() > STATE_TOL {
            return Err(Error::NotNormalized { trace: tr });
        }
        Ok(Self { mat, dims })
    }

    /// `|psi><psi|`; `psi` must be normalized.
    pub fn pure(psi: &[C64], dims: SystemDims) -> Result<Self> {
        let norm = psi.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if (norm - 1.0).abs() > STATE_TOL {
            return Err(Error::NotUnitVector { norm });
        }
        Self::new(CMatrix::projector(psi), dims)
    }

    pub fn maximally_mixed(dims: SystemDims) -> Self {
        let d = dims.total();
        Self { mat: CMatrix::identity(d).scale_re(1.0 / d as f64), dims }
    }

    pub fn mat(&self) -> &CMatrix {
        &self.mat
    }

    pub fn dims(&self) -> &SystemDims {
        &self.dims
    }

    pub fn into_inner(self) -> CMatrix {
        self.mat
    }
}

/// The six Pauli eigenstates `|0>, |1>, |+>, |->, |+i>, |-i>` on a qubit labeled `label`.
pub fn pauli_eigenstates(label: &str) -> Vec<DensityMatrix> {
    let h = std::f64::consts::FRAC_1_SQRT_2;
    let kets: [[C64; 2]; 6] =
        [[ONE, ZERO], [ZERO, ONE], [re(h), re(h)], [re(h), re(-h)], [re(h), c(0.0, h)], [re(h), c(0.0, -h)]];
    kets.iter()
        .map(|k| DensityMatrix::pure(k, SystemDims::single(label, 2)).expect("normalized Pauli eigenstate"))
        .collect()
}

/// Uhlmann fidelity `(Tr sqrt(sqrt(a) b sqrt(a)))^2`.
pub fn fidelity(a: &DensityMatrix, b: &DensityMatrix) -> Result<f64> {
    if a.dims.dims() != b.dims.dims() {
        return Err(Error::DimensionMismatch(format!("{:?} vs {:?}", a.dims.dims(), b.dims.dims())));
    }
    let s = herm_sqrt(&a.mat, PSD_TOL)?;
    let inner = s.matmul(&b.mat).matmul(&s);
    let root_trace: f64 = eigvalsh(&inner).iter().map(|&v| v.max(0.0).sqrt()).sum();
    Ok(root_trace * root_trace)
}

/// Diagnostics of a CPTP check.
#[derive(Clone, Debug, Serialize)]
pub struct ChannelReport {
    pub hermiticity_violation: f64,
    pub min_eigenvalue: f64,
    pub trace_preservation_residual: f64,
    pub valid: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Channel {
    choi: CMatrix,
    in_dims: SystemDims,
    out_dims: SystemDims,
}

impl Channel {
    /// Validated constructor (CPTP to [`CHANNEL_TOL`]).
    pub fn new(choi: CMatrix, in_dims: SystemDims, out_dims: SystemDims) -> Result<Self> {
        let ch = Self::from_choi_unchecked(choi, in_dims, out_dims)?;
        let report = ch.validate();
        if report.hermiticity_violation > CHANNEL_TOL {
            return Err(Error::NotHermitian { violation: report.hermiticity_violation });
        }
        if report.min_eigenvalue < -CHANNEL_TOL {
            return Err(Error::NotPsd { min_eigenvalue: report.min_eigenvalue });
        }
        if report.trace_preservation_residual > CHANNEL_TOL {
            return Err(Error::NotTracePreserving { residual: report.trace_preservation_residual });
        }
        Ok(ch)
    }

    /// Wraps a Choi operator after checking shapes only. Use [`Channel::validate`]
    /// when the map may fail to be CPTP.
    pub fn from_choi_unchecked(choi: CMatrix, in_dims: SystemDims, out_dims: SystemDims) -> Result<Self> {
        let n = in_dims.total() * out_dims.total();
        if !choi.is_square() || choi.nrows() != n {
            return Err(Error::DimensionMismatch(format!(
                "{}x{} Choi operator for {} -> {}",
                choi.nrows(),
                choi.ncols(),
                in_dims.total(),
                out_dims.total()
            )));
        }
        if !choi.is_finite() {
            return Err(Error::NonFinite);
        }
        Ok(Self { choi, in_dims, out_dims })
    }

    pub fn from_kraus(kraus: &[CMatrix], in_dims: SystemDims, out_dims: SystemDims) -> Result<Self> {
        choi_of_kraus(kraus, in_dims, out_dims)
    }

    pub fn unitary(u: &CMatrix, in_dims: SystemDims, out_dims: SystemDims) -> Result<Self> {
        let residual = u.isometry_residual();
        if residual > CHANNEL_TOL {
            return Err(Error::NotUnitary { residual });
        }
        Self::from_kraus(std::slice::from_ref(u), in_dims, out_dims)
    }

    pub fn identity(dims: SystemDims) -> Self {
        let d = dims.total();
        Self { choi: choi::identity(d), in_dims: dims.clone(), out_dims: dims }
    }

    /// `rho -> Tr_(traced)[rho]` on `dims`.
    pub fn partial_trace_map<S: AsRef<str>>(dims: &SystemDims, traced: &[S]) -> Result<Self> {
        let kept = dims.without(traced)?;
        let d = dims.total();
        let dk = kept.total();
        let choi = choi::from_linear_map(d, dk, |x| partial_trace(x, dims, traced).expect("labels checked"));
        Self::from_choi_unchecked(choi, dims.clone(), kept)
    }

    pub fn choi(&self) -> &CMatrix {
        &self.choi
    }

    pub fn in_dims(&self) -> &SystemDims {
        &self.in_dims
    }

    pub fn out_dims(&self) -> &SystemDims {
        &self.out_dims
    }

    pub fn din(&self) -> usize {
        self.in_dims.total()
    }

    pub fn dout(&self) -> usize {
        self.out_dims.total()
    }

    pub fn validate(&self) -> ChannelReport {
        let hermiticity_violation = self.choi.hermiticity_violation();
        let min_eigenvalue = eigvalsh(&self.choi).first().copied().unwrap_or(0.0);
        let marginal = crate::qmat::trace_out(&self.choi, &[self.din(), self.dout()], &[false, true]);
        let trace_preservation_residual = marginal.max_abs_diff(&CMatrix::identity(self.din()));
        ChannelReport {
            hermiticity_violation,
            min_eigenvalue,
            trace_preservation_residual,
            valid: hermiticity_violation <= CHANNEL_TOL
                && min_eigenvalue >= -CHANNEL_TOL
                && trace_preservation_residual <= CHANNEL_TOL,
        }
    }

    /// Applies the map to an arbitrary operator on the input space.
    pub fn apply_operator(&self, x: &CMatrix) -> Result<CMatrix> {
        if x.shape() != (self.din(), self.din()) {
            return Err(Error::DimensionMismatch(format!(
                "{}x{} operator into a {}-dimensional input",
                x.nrows(),
                x.ncols(),
                self.din()
            )));
        }
        Ok(choi::apply(&self.choi, self.din(), self.dout(), x))
    }

    pub fn apply(&self, rho: &DensityMatrix) -> Result<DensityMatrix> {
        apply(self, rho)
    }

    /// Heisenberg-picture map `N^dag`.
    pub fn dual(&self, y: &CMatrix) -> Result<CMatrix> {
        if y.shape() != (self.dout(), self.dout()) {
            return Err(Error::DimensionMismatch("operator does not match the channel output".into()));
        }
        Ok(choi::apply_dual(&self.choi, self.din(), self.dout(), y))
    }

    /// `next o self`.
    pub fn then(&self, next: &Channel) -> Result<Channel> {
        if self.dout() != next.din() {
            return Err(Error::DimensionMismatch(format!(
                "cannot feed a {}-dimensional output into a {}-dimensional input",
                self.dout(),
                next.din()
            )));
        }
        let choi = choi::compose(&self.choi, self.din(), self.dout(), &next.choi, next.dout());
        Self::from_choi_unchecked(choi, self.in_dims.clone(), next.out_dims.clone())
    }

    /// `self (x) other`.
    pub fn tensor(&self, other: &Channel) -> Result<Channel> {
        let choi = choi::tensor(&self.choi, self.din(), self.dout(), &other.choi, other.din(), other.dout());
        Self::from_choi_unchecked(choi, self.in_dims.concat(&other.in_dims)?, self.out_dims.concat(&other.out_dims)?)
    }

    /// `Tr_(traced) o self`.
    pub fn trace_output<S: AsRef<str>>(&self, traced: &[S]) -> Result<Channel> {
        self.then(&Self::partial_trace_map(&self.out_dims, traced)?)
    }

    /// Reorders the output factors.
    pub fn permute_output<S: AsRef<str>>(&self, order: &[S]) -> Result<Channel> {
        let perm = permutation_indices(&self.out_dims, order)?;
        let mut dims = vec![self.din()];
        dims.extend_from_slice(self.out_dims.dims());
        let mut full = vec![0];
        full.extend(perm.iter().map(|k| k + 1));
        let choi = permute_factors(&self.choi, &dims, &full);
        Self::from_choi_unchecked(choi, self.in_dims.clone(), self.out_dims.select(order)?)
    }

    pub fn kraus(&self) -> Vec<CMatrix> {
        choi::kraus_from_choi(&self.choi, self.din(), self.dout(), CHANNEL_TOL)
    }

    /// Number of Kraus operators in a minimal decomposition.
    pub fn kraus_rank(&self) -> usize {
        crate::qmat::numerical_rank(&self.choi, CHANNEL_TOL)
    }

    /// Smallest eigenvalue of the Choi operator.
    pub fn min_choi_eigenvalue(&self) -> f64 {
        eigvalsh(&self.choi).first().copied().unwrap_or(0.0)
    }

    /// Entrywise distance between Choi operators.
    pub fn distance(&self, other: &Channel) -> f64 {
        self.choi.max_abs_diff(&other.choi)
    }
}

/// Choi operator `sum_ij |i><j| (x) N(|i><j|)` of a trace-preserving Kraus set.
pub fn choi_of_kraus(kraus: &[CMatrix], in_dims: SystemDims, out_dims: SystemDims) -> Result<Channel> {
    let first = kraus.first().ok_or_else(|| Error::MissingInput("empty Kraus set".into()))?;
    let shape = first.shape();
    if kraus.iter().any(|k| k.shape() != shape) {
        return Err(Error::DimensionMismatch("Kraus operators differ in shape".into()));
    }
    if shape != (out_dims.total(), in_dims.total()) {
        return Err(Error::DimensionMismatch(format!(
            "{}x{} Kraus operators for {} -> {}",
            shape.0,
            shape.1,
            in_dims.total(),
            out_dims.total()
        )));
    }
    let mut completeness = CMatrix::zeros(shape.1, shape.1);
    for k in kraus {
        completeness += &k.adjoint().matmul(k);
    }
    let residual = completeness.max_abs_diff(&CMatrix::identity(shape.1));
    if residual > CHANNEL_TOL {
        return Err(Error::NotTracePreserving { residual });
    }
    Channel::from_choi_unchecked(choi::from_kraus(kraus), in_dims, out_dims)
}

/// `Tr_in[(rho^T (x) 1) C]`.
pub fn apply(ch: &Channel, rho: &DensityMatrix) -> Result<DensityMatrix> {
    if rho.dims.dims() != ch.in_dims.dims() {
        return Err(Error::DimensionMismatch(format!(
            "state dims {:?} vs channel input {:?}",
            rho.dims.dims(),
            ch.in_dims.dims()
        )));
    }
    let out = choi::apply(&ch.choi, ch.din(), ch.dout(), &rho.mat);
    DensityMatrix::new(out, ch.out_dims.clone())
}

/// `D_p(rho) = (1 - p) rho + p 1/d`.
pub fn depolarizing(p: f64, dims: SystemDims) -> Result<Channel> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::OutOfRange { what: "depolarizing parameter", value: p });
    }
    let d = dims.total();
    let ident = choi::identity(d).scale_re(1.0 - p);
    let noise = CMatrix::identity(d * d).scale_re(p / d as f64);
    Channel::from_choi_unchecked(&ident + &noise, dims.clone(), dims)
}

/// `rho -> D_p(U (rho (x) |0><0|) U^dag)`, one qubit `X` into two qubits `(Z, A)`.
pub fn prior_gamma(p: f64, u_gamma: &CMatrix) -> Result<Channel> {
    if u_gamma.shape() != (4, 4) {
        return Err(Error::DimensionMismatch("U_Gamma must be 4x4".into()));
    }
    let residual = u_gamma.unitarity_residual();
    if residual > STATE_TOL {
        return Err(Error::NotUnitary { residual });
    }
    let za = SystemDims::qubits(&["Z", "A"]);
    let ancilla = CMatrix::ket(&[ONE, ZERO]);
    let isometry = u_gamma.matmul(&kron(&CMatrix::identity(2), &ancilla));
    let embed = Channel::from_kraus(&[isometry], SystemDims::single("X", 2), za.clone())?;
    embed.then(&depolarizing(p, za)?)
}

/// A collection of CP maps summing to a channel.
#[derive(Clone, Debug)]
pub struct Instrument {
    branches: Vec<CMatrix>,
    in_dims: SystemDims,
    out_dims: SystemDims,
}

impl Instrument {
    pub fn new(branches: Vec<CMatrix>, in_dims: SystemDims, out_dims: SystemDims) -> Result<Self> {
        let n = in_dims.total() * out_dims.total();
        for b in &branches {
            if b.shape() != (n, n) {
                return Err(Error::DimensionMismatch("instrument branch shape".into()));
            }
            let min = eigvalsh(b).first().copied().unwrap_or(0.0);
            if min < -CHANNEL_TOL {
                return Err(Error::NotPsd { min_eigenvalue: min });
            }
        }
        let inst = Self { branches, in_dims, out_dims };
        Channel::new(inst.total_choi(), inst.in_dims.clone(), inst.out_dims.clone())?;
        Ok(inst)
    }

    /// Projective instrument `rho -> P_k rho P_k`.
    pub fn from_projectors(projectors: &[CMatrix], dims: SystemDims) -> Result<Self> {
        check_projectors(projectors, dims.total())?;
        let branches = projectors.iter().map(|p| choi::from_kraus(std::slice::from_ref(p))).collect();
        Self::new(branches, dims.clone(), dims)
    }

    pub fn branches(&self) -> &[CMatrix] {
        &self.branches
    }

    pub fn branch(&self, k: usize) -> Channel {
        Channel { choi: self.branches[k].clone(), in_dims: self.in_dims.clone(), out_dims: self.out_dims.clone() }
    }

    pub fn len(&self) -> usize {
        self.branches.len()
    }

    pub fn is_empty(&self) -> bool {
        self.branches.is_empty()
    }

    fn total_choi(&self) -> CMatrix {
        let n = self.in_dims.total() * self.out_dims.total();
        self.branches.iter().fold(CMatrix::zeros(n, n), |mut acc, b| {
            acc += b;
            acc
        })
    }

    /// Sum of all branches.
    pub fn channel(&self) -> Channel {
        Channel { choi: self.total_choi(), in_dims: self.in_dims.clone(), out_dims: self.out_dims.clone() }
    }
}

/// `{J_1, J_0}`: projection onto `phi` and onto its orthogonal complement.
pub fn instrument_phi(phi: &[C64], dims: SystemDims) -> Result<Instrument> {
    let norm = phi.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    if (norm - 1.0).abs() > STATE_TOL {
        return Err(Error::NotUnitVector { norm });
    }
    if phi.len() != dims.total() {
        return Err(Error::DimensionMismatch("phi does not match the system dimension".into()));
    }
    let p1 = CMatrix::projector(phi);
    let p0 = &CMatrix::identity(phi.len()) - &p1;
    Instrument::from_projectors(&[p1, p0], dims)
}

fn check_projectors(projectors: &[CMatrix], d: usize) -> Result<()> {
    if projectors.is_empty() {
        return Err(Error::MissingInput("no projectors".into()));
    }
    let mut residual = 0.0f64;
    let mut sum = CMatrix::zeros(d, d);
    for (k, pk) in projectors.iter().enumerate() {
        if pk.shape() != (d, d) {
            return Err(Error::DimensionMismatch("projector shape".into()));
        }
        residual = residual.max(pk.hermiticity_violation());
        for (l, pl) in projectors.iter().enumerate() {
            let prod = pk.matmul(pl);
            let expect = if k == l { pk.clone() } else { CMatrix::zeros(d, d) };
            residual = residual.max(prod.max_abs_diff(&expect));
        }
        sum += pk;
    }
    residual = residual.max(sum.max_abs_diff(&CMatrix::identity(d)));
    if residual > STATE_TOL {
        return Err(Error::InvalidProjectors { residual });
    }
    Ok(())
}

/// `rho -> sum_k Tr[P_k rho] gamma_k` with orthogonal projectors `P_k`.
#[derive(Clone, Debug)]
pub struct MeasurePrepareChannel {
    projectors: Vec<CMatrix>,
    prepared: Vec<DensityMatrix>,
    in_dims: SystemDims,
}

impl MeasurePrepareChannel {
    pub fn new(projectors: Vec<CMatrix>, prepared: Vec<DensityMatrix>, in_dims: SystemDims) -> Result<Self> {
        if projectors.len() != prepared.len() {
            return Err(Error::DimensionMismatch("one prepared state per projector".into()));
        }
        check_projectors(&projectors, in_dims.total())?;
        let out = prepared[0].dims().dims();
        if prepared.iter().any(|g| g.dims().dims() != out) {
            return Err(Error::DimensionMismatch("prepared states differ in dims".into()));
        }
        Ok(Self { projectors, prepared, in_dims })
    }

    pub fn projectors(&self) -> &[CMatrix] {
        &self.projectors
    }

    pub fn prepared(&self) -> &[DensityMatrix] {
        &self.prepared
    }

    pub fn in_dims(&self) -> &SystemDims {
        &self.in_dims
    }

    pub fn out_dims(&self) -> &SystemDims {
        self.prepared[0].dims()
    }

    /// Choi operator `sum_k P_k^T (x) gamma_k`.
    pub fn channel(&self) -> Channel {
        let n = self.in_dims.total() * self.out_dims().total();
        let mut choi = CMatrix::zeros(n, n);
        for (p, g) in self.projectors.iter().zip(&self.prepared) {
            choi += &kron(&p.transpose(), g.mat());
        }
        Channel { choi, in_dims: self.in_dims.clone(), out_dims: self.out_dims().clone() }
    }

    /// The instrument `{rho -> P_k rho P_k}`.
    pub fn instrument(&self) -> Instrument {
        Instrument::from_projectors(&self.projectors, self.in_dims.clone()).expect("projectors validated")
    }
}
