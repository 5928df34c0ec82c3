//! JSON files for matrices, states, channels, supermaps, builds and solver results.
//!
//! Every matrix is an object with `"dims"`, `"labels"` and `"rows"`, where each entry is
//! an `[re, im]` pair. Doubles round-trip exactly.

use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::channels::{Channel, DensityMatrix};
use crate::error::{Error, Result};
use crate::qmat::{CMatrix, SystemDims, C64};
use crate::retrodiction::{build_from_v, AngleFamily, RetrodictionBuild};
use crate::supermaps::{Superchannel, SuperchannelReport};
use crate::vsolver::{SolverConfig, SolverResult};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MatrixJson {
    pub dims: Vec<usize>,
    pub labels: Vec<String>,
    pub rows: Vec<Vec<[f64; 2]>>,
    /// Column factors of a rectangular matrix; rows and columns share `dims` otherwise.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub col_dims: Option<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub col_labels: Option<Vec<String>>,
}

impl MatrixJson {
    pub fn square(m: &CMatrix, dims: &SystemDims) -> Self {
        Self {
            dims: dims.dims().to_vec(),
            labels: dims.labels().to_vec(),
            rows: rows_of(m),
            col_dims: None,
            col_labels: None,
        }
    }

    pub fn rectangular(m: &CMatrix, rows: &SystemDims, cols: &SystemDims) -> Self {
        Self {
            dims: rows.dims().to_vec(),
            labels: rows.labels().to_vec(),
            rows: rows_of(m),
            col_dims: Some(cols.dims().to_vec()),
            col_labels: Some(cols.labels().to_vec()),
        }
    }

    /// The matrix, checked against the declared dimensions.
    pub fn matrix(&self) -> Result<CMatrix> {
        let nrows = self.dims.iter().product::<usize>();
        let ncols = self.col_dims.as_ref().map_or(nrows, |d| d.iter().product());
        if self.labels.len() != self.dims.len() {
            return Err(Error::Parse(format!("{} labels for {} dims", self.labels.len(), self.dims.len())));
        }
        if self.rows.len() != nrows || self.rows.iter().any(|r| r.len() != ncols) {
            return Err(Error::Parse(format!("rows do not form a {nrows}x{ncols} matrix")));
        }
        let data = self.rows.iter().flatten().map(|&[re, im]| C64::new(re, im)).collect();
        let m = CMatrix::from_vec(nrows, ncols, data)?;
        if !m.is_finite() {
            return Err(Error::NonFinite);
        }
        Ok(m)
    }

    pub fn systems(&self) -> Result<SystemDims> {
        SystemDims::new(self.labels.iter().cloned(), &self.dims)
    }
}

fn rows_of(m: &CMatrix) -> Vec<Vec<[f64; 2]>> {
    (0..m.nrows()).map(|i| m.row(i).iter().map(|z| [z.re, z.im]).collect()).collect()
}

/// A Choi operator over `(in, out)` factors. Input and output labels may coincide.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChannelJson {
    #[serde(flatten)]
    pub choi: MatrixJson,
    pub in_dims: Vec<usize>,
    pub out_dims: Vec<usize>,
}

impl ChannelJson {
    pub fn from_channel(ch: &Channel) -> Self {
        Self {
            choi: MatrixJson {
                dims: [ch.in_dims().dims(), ch.out_dims().dims()].concat(),
                labels: [ch.in_dims().labels(), ch.out_dims().labels()].concat(),
                rows: rows_of(ch.choi()),
                col_dims: None,
                col_labels: None,
            },
            in_dims: ch.in_dims().dims().to_vec(),
            out_dims: ch.out_dims().dims().to_vec(),
        }
    }

    fn parts(&self) -> Result<(CMatrix, SystemDims, SystemDims)> {
        let k = self.in_dims.len();
        if self.choi.dims != [self.in_dims.as_slice(), self.out_dims.as_slice()].concat() {
            return Err(Error::Parse("dims must list in_dims then out_dims".into()));
        }
        let m = self.choi.matrix()?;
        let in_dims = SystemDims::new(self.choi.labels[..k].iter().cloned(), &self.in_dims)?;
        let out_dims = SystemDims::new(self.choi.labels[k..].iter().cloned(), &self.out_dims)?;
        Ok((m, in_dims, out_dims))
    }

    /// Shape-checked only, for diagnostics.
    pub fn to_channel_unchecked(&self) -> Result<Channel> {
        let (m, a, b) = self.parts()?;
        Channel::from_choi_unchecked(m, a, b)
    }

    pub fn to_channel(&self) -> Result<Channel> {
        let (m, a, b) = self.parts()?;
        Channel::new(m, a, b)
    }
}

/// A supermap Choi operator with four group entries in `dims`/`labels` (`W`, `X`, `Y`, `Z`).
/// Group labels join their factor labels with spaces; `factor_dims` restores the factors.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SuperchannelJson {
    #[serde(flatten)]
    pub choi: MatrixJson,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub factor_dims: Option<[Vec<usize>; 4]>,
}

impl SuperchannelJson {
    pub fn from_superchannel(s: &Superchannel) -> Self {
        let groups = [s.w(), s.x(), s.y(), s.z()];
        Self {
            choi: MatrixJson {
                dims: groups.iter().map(|g| g.total()).collect(),
                labels: groups.iter().map(|g| g.labels().join(" ")).collect(),
                rows: rows_of(s.choi()),
                col_dims: None,
                col_labels: None,
            },
            factor_dims: Some(groups.map(|g| g.dims().to_vec())),
        }
    }

    fn parts(&self) -> Result<(CMatrix, [SystemDims; 4])> {
        if self.choi.dims.len() != 4 || self.choi.labels.len() != 4 {
            return Err(Error::Parse("a supermap needs four system groups".into()));
        }
        let m = self.choi.matrix()?;
        let group = |k: usize| -> Result<SystemDims> {
            let label = &self.choi.labels[k];
            match &self.factor_dims {
                Some(fd) => {
                    if fd[k].iter().product::<usize>() != self.choi.dims[k] {
                        return Err(Error::Parse(format!("factor dims of group {k} do not multiply to its dim")));
                    }
                    let names: Vec<&str> = if fd[k].is_empty() { vec![] } else { label.split_whitespace().collect() };
                    SystemDims::new(names, &fd[k])
                }
                None => Ok(SystemDims::single(label.clone(), self.choi.dims[k])),
            }
        };
        Ok((m, [group(0)?, group(1)?, group(2)?, group(3)?]))
    }

    pub fn to_superchannel_unchecked(&self) -> Result<Superchannel> {
        let (m, [w, x, y, z]) = self.parts()?;
        Superchannel::from_choi_unchecked(m, w, x, y, z)
    }

    pub fn to_superchannel(&self) -> Result<Superchannel> {
        let (m, [w, x, y, z]) = self.parts()?;
        Superchannel::new(m, w, x, y, z)
    }
}

pub fn state_to_json(rho: &DensityMatrix) -> MatrixJson {
    MatrixJson::square(rho.mat(), rho.dims())
}

pub fn state_from_json(j: &MatrixJson) -> Result<DensityMatrix> {
    DensityMatrix::new(j.matrix()?, j.systems()?)
}

/// A retrodiction build: the prior, the traced system and `V`. Validity is recomputed on load.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BuildJson {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub angle: Option<AngleFamily>,
    pub prior: ChannelJson,
    pub traced: Vec<String>,
    pub r_dim: usize,
    pub row_basis: Vec<String>,
    pub col_basis: Vec<String>,
    pub v: MatrixJson,
    pub validity: SuperchannelReport,
}

impl BuildJson {
    pub fn from_build(b: &RetrodictionBuild) -> Result<Self> {
        let factors: Vec<usize> = b.prior.in_dims().dims().iter().chain(b.prior.out_dims().dims()).copied().collect();
        let rows = SystemDims::new(b.row_basis.iter().cloned(), &factors)?;
        let kept = b.prior.out_dims().without(&b.traced)?;
        let cols = b.prior.in_dims().concat(&kept)?.concat(&SystemDims::single("R", b.r_dim))?;
        Ok(Self {
            angle: b.angle,
            prior: ChannelJson::from_channel(&b.prior),
            traced: b.traced.clone(),
            r_dim: b.r_dim,
            row_basis: b.row_basis.clone(),
            col_basis: b.col_basis.clone(),
            v: MatrixJson::rectangular(&b.v, &rows, &cols),
            validity: b.validity.clone(),
        })
    }

    pub fn to_build(&self) -> Result<(Superchannel, RetrodictionBuild)> {
        let prior = self.prior.to_channel()?;
        let (s, mut build) = build_from_v(&prior, &self.v.matrix()?, self.r_dim, &self.traced)?;
        build.angle = self.angle;
        Ok((s, build))
    }
}

/// A solver run: the configuration, the result fields and the basis of `V`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolverJson {
    pub config: SolverConfig,
    pub residual: f64,
    pub iterations: usize,
    pub converged: bool,
    pub restart: usize,
    pub traced: Vec<String>,
    pub r_dim: usize,
    pub row_basis: Vec<String>,
    pub col_basis: Vec<String>,
    pub v: MatrixJson,
}

impl SolverJson {
    pub fn new<S: AsRef<str>>(prior: &Channel, traced: &[S], cfg: &SolverConfig, res: &SolverResult) -> Result<Self> {
        let traced: Vec<String> = traced.iter().map(|s| s.as_ref().to_string()).collect();
        let kept = prior.out_dims().without(&traced)?;
        let out = kept.concat(&prior.out_dims().select(&traced)?)?;
        let rows = prior.in_dims().concat(&out)?.with_suffix("r");
        let dxz = prior.din() * kept.total();
        let r_dim = res.v.ncols() / dxz;
        let cols = prior.in_dims().concat(&kept)?.concat(&SystemDims::single("R", r_dim))?;
        Ok(Self {
            config: cfg.clone(),
            residual: res.residual,
            iterations: res.iterations,
            converged: res.converged,
            restart: res.restart,
            traced,
            r_dim,
            row_basis: rows.labels().to_vec(),
            col_basis: cols.labels().to_vec(),
            v: MatrixJson::rectangular(&res.v, &rows, &cols),
        })
    }

    pub fn result(&self) -> Result<SolverResult> {
        Ok(SolverResult {
            v: self.v.matrix()?,
            residual: self.residual,
            iterations: self.iterations,
            converged: self.converged,
            restart: self.restart,
        })
    }
}

pub fn read_json<T: DeserializeOwned>(path: impl AsRef<Path>) -> Result<T> {
    let text = std::fs::read_to_string(path)?;
    Ok(serde_json::from_str(&text)?)
}

pub fn write_json<T: Serialize>(path: impl AsRef<Path>, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    std::fs::write(path, text)?;
    Ok(())
}
