//! Numerical search for a co-isometry `V` that makes the retrodiction form a superchannel.
//!
//! Iterates stay on the manifold: `V <- V exp(i H)` with `H` Hermitian on the column space.
//! Steps come from Levenberg-Marquardt (default) or backtracking gradient descent on the
//! generator coefficients, with Jacobians by central finite differences.

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::channels::Channel;
use crate::error::{Error, Result};
use crate::qmat::{expi_hermitian, herm_sqrt, kron, nearest_unitary, pinv_sqrt, trace_out, CMatrix, C64, PSD_TOL};
use crate::random::haar_unitary;
use crate::retrodiction::coisometry::{prior_parts, FULL_RANK_TOL};

/// Finite-difference step on generator coefficients.
pub const FD_STEP: f64 = 1e-6;

/// Objective value below which an iterate is taken as exact and polishing stops.
const EXACT: f64 = 1e-28;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "rule")]
pub enum StepRule {
    LevenbergMarquardt,
    /// Steepest descent with Armijo backtracking from `initial_step`.
    GradientDescent {
        initial_step: f64,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub seed: u64,
    /// Iteration cap per restart.
    pub max_iters: usize,
    pub tol: f64,
    pub restarts: usize,
    pub step_rule: StepRule,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self { seed: 0, max_iters: 400, tol: 1e-9, restarts: 8, step_rule: StepRule::LevenbergMarquardt }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if self.tol.is_nan() || self.tol <= 0.0 {
            return Err(Error::OutOfRange { what: "solver tolerance", value: self.tol });
        }
        if self.max_iters == 0 {
            return Err(Error::OutOfRange { what: "solver max_iters", value: 0.0 });
        }
        if self.restarts == 0 {
            return Err(Error::OutOfRange { what: "solver restarts", value: 0.0 });
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SolverResult {
    pub v: CMatrix,
    pub residual: f64,
    /// Iterations spent by the restart that produced `v`.
    pub iterations: usize,
    pub converged: bool,
    /// Index of the restart that produced `v`.
    pub restart: usize,
}

/// Fixed data of the retrodiction form for one prior.
struct Form {
    root_gamma: CMatrix,
    /// `C_SGamma^(-1/2) (x) 1_R`.
    right: CMatrix,
    dx: usize,
    dz: usize,
    da: usize,
    r_dim: usize,
}

impl Form {
    fn new(prior: &Channel, traced: &[String], r_dim: usize) -> Result<Self> {
        let parts = prior_parts(prior, traced)?;
        Ok(Self {
            root_gamma: herm_sqrt(&parts.c_gamma, PSD_TOL)?,
            right: kron(&pinv_sqrt(&parts.c_s_gamma, FULL_RANK_TOL), &CMatrix::identity(r_dim)),
            dx: prior.din(),
            dz: parts.kept.total(),
            da: parts.traced.total(),
            r_dim,
        })
    }

    fn shape(&self) -> (usize, usize) {
        (self.dx * self.dz * self.da, self.dx * self.dz * self.r_dim)
    }

    fn check(&self, v: &CMatrix) -> Result<()> {
        let (rows, cols) = self.shape();
        if v.shape() != (rows, cols) {
            return Err(Error::DimensionMismatch(format!("V is {}x{}, expected {rows}x{cols}", v.nrows(), v.ncols())));
        }
        Ok(())
    }

    /// The two validity defects of the supermap whose stacked Kraus matrix is `k`:
    /// `Tr_Zout C - Tr_{Z Zout} C / d_Z (x) 1_Z` on `(X_r, X, Z)` and `Tr_{X Z Zout} C - d_Z 1` on `X_r`.
    fn defects(&self, k: &CMatrix) -> (CMatrix, CMatrix) {
        let (dx, dz, r) = (self.dx, self.dz, self.r_dim);
        let dza = dz * self.da;
        // B[(x_r, x z), (o, k)] = K[(x_r, o), (x z, k)], so Tr_Zout C = B B^dag.
        let b = CMatrix::from_fn(dx * dx * dz, dza * r, |row, col| {
            let (xr, c) = (row / (dx * dz), row % (dx * dz));
            let (o, kk) = (col / r, col % r);
            k[(xr * dza + o, c * r + kk)]
        });
        let marginal = b.matmul(&b.adjoint());
        let wx = trace_out(&marginal, &[dx * dx, dz], &[false, true]);
        let d1 = &marginal - &kron(&wx.scale_re(1.0 / dz as f64), &CMatrix::identity(dz));
        let w = trace_out(&wx, &[dx, dx], &[false, true]);
        let d2 = &w - &CMatrix::identity(dx).scale_re(dz as f64);
        (d1, d2)
    }

    fn residuals(&self, k: &CMatrix) -> Vec<f64> {
        let (d1, d2) = self.defects(k);
        d1.data().iter().chain(d2.data()).flat_map(|z| [z.re, z.im]).collect()
    }

    fn value(&self, k: &CMatrix) -> f64 {
        let (d1, d2) = self.defects(k);
        d1.frobenius_norm_sqr() + d2.frobenius_norm_sqr()
    }
}

/// Orthonormal basis of `n x n` Hermitian matrices.
fn hermitian_basis(n: usize) -> Vec<CMatrix> {
    let h = std::f64::consts::FRAC_1_SQRT_2;
    let mut out = Vec::with_capacity(n * n);
    for i in 0..n {
        out.push(CMatrix::unit(n, n, i, i));
        for j in i + 1..n {
            let mut sym = CMatrix::zeros(n, n);
            sym[(i, j)] = C64::new(h, 0.0);
            sym[(j, i)] = C64::new(h, 0.0);
            out.push(sym);
            let mut anti = CMatrix::zeros(n, n);
            anti[(i, j)] = C64::new(0.0, -h);
            anti[(j, i)] = C64::new(0.0, h);
            out.push(anti);
        }
    }
    out
}

fn generator(basis: &[CMatrix], theta: &DVector<f64>) -> CMatrix {
    let n = basis[0].nrows();
    let mut h = CMatrix::zeros(n, n);
    for (g, &t) in basis.iter().zip(theta.iter()) {
        if t != 0.0 {
            h += &g.scale_re(t);
        }
    }
    h
}

/// Search state for one prior: the form plus the finite-difference probes `exp(+-i h G_j) M`.
struct Problem {
    form: Form,
    basis: Vec<CMatrix>,
    probes: Vec<(CMatrix, CMatrix)>,
}

impl Problem {
    fn new(form: Form) -> Self {
        let basis = hermitian_basis(form.shape().1);
        let probes = basis
            .iter()
            .map(|g| {
                let plus = expi_hermitian(&g.scale_re(FD_STEP)).matmul(&form.right);
                let minus = expi_hermitian(&g.scale_re(-FD_STEP)).matmul(&form.right);
                (plus, minus)
            })
            .collect();
        Self { form, basis, probes }
    }

    fn kraus(&self, v: &CMatrix) -> CMatrix {
        self.form.root_gamma.matmul(v).matmul(&self.form.right)
    }

    fn value(&self, v: &CMatrix) -> f64 {
        self.form.value(&self.kraus(v))
    }

    /// Residual vector at `v` and its Jacobian in the coordinates `v exp(i sum theta_j G_j)`.
    fn linearize(&self, v: &CMatrix) -> (DVector<f64>, DMatrix<f64>) {
        let left = self.form.root_gamma.matmul(v);
        let r = DVector::from_vec(self.form.residuals(&left.matmul(&self.form.right)));
        let mut jac = DMatrix::zeros(r.len(), self.basis.len());
        for (j, (plus, minus)) in self.probes.iter().enumerate() {
            let rp = self.form.residuals(&left.matmul(plus));
            let rm = self.form.residuals(&left.matmul(minus));
            for (i, (a, b)) in rp.iter().zip(&rm).enumerate() {
                jac[(i, j)] = (a - b) / (2.0 * FD_STEP);
            }
        }
        (r, jac)
    }

    fn step(&self, v: &CMatrix, theta: &DVector<f64>) -> CMatrix {
        v.matmul(&expi_hermitian(&generator(&self.basis, theta)))
    }

    fn run(&self, start: CMatrix, cfg: &SolverConfig) -> (CMatrix, f64, usize) {
        match cfg.step_rule {
            StepRule::LevenbergMarquardt => self.levenberg_marquardt(start, cfg),
            StepRule::GradientDescent { initial_step } => self.gradient_descent(start, cfg, initial_step),
        }
    }

    /// Levenberg-Marquardt with the gain-ratio damping update of Nielsen.
    fn levenberg_marquardt(&self, mut v: CMatrix, cfg: &SolverConfig) -> (CMatrix, f64, usize) {
        let mut f = self.value(&v);
        let mut lambda = 1e-3;
        let mut nu = 2.0;
        let mut history = Vec::with_capacity(cfg.max_iters);
        let mut iters = 0;
        while iters < cfg.max_iters && f > EXACT {
            iters += 1;
            history.push(f);
            let (r, jac) = self.linearize(&v);
            let jt = jac.transpose();
            let normal = &jt * &jac;
            let grad = &jt * &r;
            let mut improved = false;
            while lambda < 1e16 {
                let damped = &normal + DMatrix::identity(normal.nrows(), normal.ncols()) * lambda;
                let Some(chol) = damped.cholesky() else {
                    lambda *= nu;
                    nu *= 2.0;
                    continue;
                };
                let delta = -chol.solve(&grad);
                let predicted = -2.0 * delta.dot(&grad) - (&jac * &delta).norm_squared();
                let candidate = self.step(&v, &delta);
                let fc = self.value(&candidate);
                if fc < f {
                    let rho = if predicted > 0.0 { (f - fc) / predicted } else { 0.0 };
                    lambda = (lambda * (1.0 / 3.0f64).max(1.0 - (2.0 * rho - 1.0).powi(3))).max(1e-15);
                    nu = 2.0;
                    v = candidate;
                    f = fc;
                    improved = true;
                    break;
                }
                lambda *= nu;
                nu *= 2.0;
            }
            if !improved || stalled(&history, f, cfg.tol) {
                break;
            }
        }
        (v, f, iters)
    }

    fn gradient_descent(&self, mut v: CMatrix, cfg: &SolverConfig, initial_step: f64) -> (CMatrix, f64, usize) {
        let mut f = self.value(&v);
        let mut eta = initial_step;
        let mut history = Vec::with_capacity(cfg.max_iters);
        let mut iters = 0;
        while iters < cfg.max_iters && f > EXACT {
            iters += 1;
            history.push(f);
            let (r, jac) = self.linearize(&v);
            let grad = jac.transpose() * r * 2.0;
            let slope = grad.norm_squared();
            if slope == 0.0 {
                break;
            }
            let mut improved = false;
            while eta > 1e-14 {
                let candidate = self.step(&v, &(&grad * -eta));
                let fc = self.value(&candidate);
                if fc <= f - 1e-4 * eta * slope {
                    v = candidate;
                    f = fc;
                    eta *= 2.0;
                    improved = true;
                    break;
                }
                eta *= 0.5;
            }
            if !improved || stalled(&history, f, cfg.tol) {
                break;
            }
        }
        (v, f, iters)
    }
}

/// Whether a restart above `tol` has settled in a local minimum. Below `tol` polishing
/// continues while steps still improve.
fn stalled(history: &[f64], f: f64, tol: f64) -> bool {
    const WINDOW: usize = 25;
    f > tol && history.len() >= WINDOW && f > history[history.len() - WINDOW] * 0.999
}

fn traced_last(prior: &Channel) -> Result<(Vec<String>, usize)> {
    let out = prior.out_dims();
    match out.labels().last() {
        Some(label) if out.len() >= 2 => Ok((vec![label.clone()], out.dims()[out.len() - 1])),
        _ => Err(Error::MissingInput("prior needs a kept and a traced output system".into())),
    }
}

/// Sum of squared Frobenius norms of both validity defects of the supermap built from `v`,
/// tracing the prior's last output system.
pub fn objective(prior: &Channel, v: &CMatrix) -> Result<f64> {
    let (traced, _) = traced_last(prior)?;
    objective_with(prior, v, &traced)
}

/// [`objective`] with an explicit traced system. `d_R` is read off the shape of `v`.
pub fn objective_with<S: AsRef<str>>(prior: &Channel, v: &CMatrix, traced: &[S]) -> Result<f64> {
    let traced: Vec<String> = traced.iter().map(|s| s.as_ref().to_string()).collect();
    let dxz = prior.din() * prior.out_dims().without(&traced)?.total();
    if !v.ncols().is_multiple_of(dxz) || v.ncols() == 0 {
        return Err(Error::DimensionMismatch(format!("V has {} columns, not a multiple of {dxz}", v.ncols())));
    }
    let form = Form::new(prior, &traced, v.ncols() / dxz)?;
    form.check(v)?;
    Ok(form.value(&form.root_gamma.matmul(v).matmul(&form.right)))
}

/// Solves for a unitary `V` (`d_R = d_A`), tracing the prior's last output system.
pub fn solve(prior: &Channel, cfg: &SolverConfig) -> Result<SolverResult> {
    let (traced, da) = traced_last(prior)?;
    solve_with(prior, &traced, da, cfg)
}

/// Runs `cfg.restarts` seeded restarts and returns the first one reaching `tol`,
/// or else the lowest residual (earliest restart on ties).
pub fn solve_with<S: AsRef<str>>(
    prior: &Channel,
    traced: &[S],
    r_dim: usize,
    cfg: &SolverConfig,
) -> Result<SolverResult> {
    cfg.validate()?;
    if r_dim == 0 {
        return Err(Error::OutOfRange { what: "d_R", value: 0.0 });
    }
    let traced: Vec<String> = traced.iter().map(|s| s.as_ref().to_string()).collect();
    let problem = Problem::new(Form::new(prior, &traced, r_dim)?);
    let (rows, cols) = problem.form.shape();
    if rows > cols {
        return Err(Error::DimensionMismatch(format!("no {rows}x{cols} co-isometry exists")));
    }
    let mut best: Option<SolverResult> = None;
    for restart in 0..cfg.restarts {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(restart as u64));
        let u = haar_unitary(&mut rng, cols);
        let start = CMatrix::from_fn(rows, cols, |i, j| u[(i, j)]);
        let (v, _, iterations) = problem.run(start, cfg);
        let v = if rows == cols { nearest_unitary(&v) } else { v };
        let residual = problem.value(&v);
        let converged = residual <= cfg.tol && v.co_isometry_residual() <= 1e-9;
        let result = SolverResult { v, residual, iterations, converged, restart };
        if converged {
            return Ok(result);
        }
        if best.as_ref().is_none_or(|b| residual < b.residual) {
            best = Some(result);
        }
    }
    Ok(best.expect("at least one restart"))
}
