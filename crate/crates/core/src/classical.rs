//! Classical Bayes and Jeffrey updates, and the classical forms of the S3 and S4 retrodictions.
//!
//! These double as oracles for quantum instances whose Choi operators are diagonal,
//! see [`ConditionalDistribution::to_channel`].

use serde::{Deserialize, Serialize};

use crate::channels::Channel;
use crate::error::{Error, Result};
use crate::qmat::{CMatrix, SystemDims};

/// Tolerance for nonnegativity and normalization.
pub const PROB_TOL: f64 = 1e-12;

fn check_probs(p: &[f64], what: &str) -> Result<()> {
    if let Some(bad) = p.iter().find(|v| !v.is_finite() || **v < -PROB_TOL) {
        return Err(Error::InvalidDistribution(format!("{what} has entry {bad}")));
    }
    let sum: f64 = p.iter().sum();
    if (sum - 1.0).abs() > PROB_TOL {
        return Err(Error::InvalidDistribution(format!("{what} sums to {sum}")));
    }
    Ok(())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Distribution {
    probs: Vec<f64>,
}

impl Distribution {
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        if probs.is_empty() {
            return Err(Error::InvalidDistribution("empty alphabet".into()));
        }
        check_probs(&probs, "distribution")?;
        Ok(Self { probs })
    }

    pub fn uniform(n: usize) -> Result<Self> {
        Self::new(vec![1.0 / n as f64; n])
    }

    pub fn point_mass(n: usize, k: usize) -> Result<Self> {
        if k >= n {
            return Err(Error::OutOfRange { what: "outcome", value: k as f64 });
        }
        let mut probs = vec![0.0; n];
        probs[k] = 1.0;
        Self::new(probs)
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    /// Largest entrywise difference.
    pub fn distance(&self, other: &Self) -> f64 {
        if self.len() != other.len() {
            return f64::INFINITY;
        }
        self.probs.iter().zip(&other.probs).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
    }
}

/// `P(out | in)` stored as `table[out][in]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConditionalDistribution {
    n_out: usize,
    n_in: usize,
    table: Vec<f64>,
}

impl ConditionalDistribution {
    /// From rows indexed by output value.
    pub fn new(table: Vec<Vec<f64>>) -> Result<Self> {
        let n_out = table.len();
        let n_in = table.first().map_or(0, Vec::len);
        if n_out == 0 || n_in == 0 || table.iter().any(|r| r.len() != n_in) {
            return Err(Error::InvalidDistribution("table must be a nonempty rectangle".into()));
        }
        Self::from_fn(n_out, n_in, |o, i| table[o][i])
    }

    pub fn from_fn(n_out: usize, n_in: usize, f: impl Fn(usize, usize) -> f64) -> Result<Self> {
        let table: Vec<f64> = (0..n_out).flat_map(|o| (0..n_in).map(move |i| (o, i))).map(|(o, i)| f(o, i)).collect();
        let cd = Self { n_out, n_in, table };
        for i in 0..n_in {
            check_probs(&cd.column(i), &format!("column {i}"))?;
        }
        Ok(cd)
    }

    /// The deterministic map `in -> f(in)`.
    pub fn deterministic(n_out: usize, n_in: usize, f: impl Fn(usize) -> usize) -> Result<Self> {
        Self::from_fn(n_out, n_in, |o, i| if f(i) == o { 1.0 } else { 0.0 })
    }

    pub fn n_out(&self) -> usize {
        self.n_out
    }

    pub fn n_in(&self) -> usize {
        self.n_in
    }

    pub fn get(&self, out: usize, input: usize) -> f64 {
        self.table[out * self.n_in + input]
    }

    pub fn column(&self, input: usize) -> Vec<f64> {
        (0..self.n_out).map(|o| self.get(o, input)).collect()
    }

    /// `P(out) = sum_in P(out | in) P(in)`.
    pub fn propagate(&self, prior: &Distribution) -> Result<Distribution> {
        self.check_input(prior.len())?;
        Distribution::new(
            (0..self.n_out).map(|o| (0..self.n_in).map(|i| self.get(o, i) * prior.probs[i]).sum()).collect(),
        )
    }

    pub fn distance(&self, other: &Self) -> f64 {
        if (self.n_out, self.n_in) != (other.n_out, other.n_in) {
            return f64::INFINITY;
        }
        self.table.iter().zip(&other.table).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
    }

    fn check_input(&self, n: usize) -> Result<()> {
        if n != self.n_in {
            return Err(Error::DimensionMismatch(format!("{n} input values for a table over {}", self.n_in)));
        }
        Ok(())
    }

    /// The channel with diagonal Choi operator `sum P(out|in) |in><in| (x) |out><out|`.
    pub fn to_channel(&self, in_dims: SystemDims, out_dims: SystemDims) -> Result<Channel> {
        if in_dims.total() != self.n_in || out_dims.total() != self.n_out {
            return Err(Error::DimensionMismatch("system sizes differ from the alphabets".into()));
        }
        let diag: Vec<f64> =
            (0..self.n_in).flat_map(|i| (0..self.n_out).map(move |o| (i, o))).map(|(i, o)| self.get(o, i)).collect();
        Channel::new(CMatrix::diag_real(&diag), in_dims, out_dims)
    }

    /// Reads `P(out|in)` off the diagonal of a channel's Choi operator.
    pub fn from_channel(ch: &Channel) -> Result<Self> {
        let (din, dout) = (ch.din(), ch.dout());
        Self::from_fn(dout, din, |o, i| ch.choi()[(i * dout + o, i * dout + o)].re)
    }
}

/// `P(y|z) = P(z|y) P(y) / sum_y' P(z|y') P(y')`.
pub fn bayes_posterior(likelihood: &ConditionalDistribution, prior: &Distribution, z: usize) -> Result<Distribution> {
    likelihood.check_input(prior.len())?;
    if z >= likelihood.n_out {
        return Err(Error::OutOfRange { what: "evidence value", value: z as f64 });
    }
    let joint: Vec<f64> = (0..prior.len()).map(|y| likelihood.get(z, y) * prior.probs[y]).collect();
    let evidence: f64 = joint.iter().sum();
    if evidence <= PROB_TOL {
        return Err(Error::ZeroProbabilityEvidence);
    }
    Distribution::new(joint.into_iter().map(|p| p / evidence).collect())
}

/// `Q(y) = sum_z P(y|z) R(z)` for soft evidence `R`.
pub fn jeffrey_update(
    likelihood: &ConditionalDistribution,
    prior: &Distribution,
    soft_evidence: &Distribution,
) -> Result<Distribution> {
    if soft_evidence.len() != likelihood.n_out {
        return Err(Error::DimensionMismatch("soft evidence over the wrong alphabet".into()));
    }
    let predicted = likelihood.propagate(prior)?;
    let mut q = vec![0.0; prior.len()];
    for (z, &r) in soft_evidence.probs.iter().enumerate() {
        if r <= 0.0 {
            continue;
        }
        if predicted.probs[z] <= PROB_TOL {
            return Err(Error::SupportViolation);
        }
        let post = bayes_posterior(likelihood, prior, z)?;
        for (acc, p) in q.iter_mut().zip(&post.probs) {
            *acc += r * p;
        }
    }
    Distribution::new(q)
}

/// `Q(y|wa) = R(y|w)` for `a = a0` and `P(y|wa)` otherwise. Inputs of `prior` are `(w, a)` with `a` fastest.
pub fn s3_classical_update(
    prior: &ConditionalDistribution,
    observation: &ConditionalDistribution,
    a0: usize,
) -> Result<ConditionalDistribution> {
    let n_w = observation.n_in;
    if observation.n_out != prior.n_out || !prior.n_in.is_multiple_of(n_w) {
        return Err(Error::DimensionMismatch("observation does not match the prior's shape".into()));
    }
    let n_a = prior.n_in / n_w;
    if a0 >= n_a {
        return Err(Error::OutOfRange { what: "a0", value: a0 as f64 });
    }
    ConditionalDistribution::from_fn(prior.n_out, prior.n_in, |y, wa| {
        let (w, a) = (wa / n_a, wa % n_a);
        if a == a0 {
            observation.get(y, w)
        } else {
            prior.get(y, wa)
        }
    })
}

/// `Q(za|x) = R(z|x) P(za|x) / P(z|x)`. Outputs of `prior` are `(z, a)` with `a` fastest.
pub fn s4_classical_update(
    prior: &ConditionalDistribution,
    observation: &ConditionalDistribution,
) -> Result<ConditionalDistribution> {
    let n_z = observation.n_out;
    if observation.n_in != prior.n_in || !prior.n_out.is_multiple_of(n_z) {
        return Err(Error::DimensionMismatch("observation does not match the prior's shape".into()));
    }
    let n_a = prior.n_out / n_z;
    let marginal = |z: usize, x: usize| (0..n_a).map(|a| prior.get(z * n_a + a, x)).sum::<f64>();
    for x in 0..prior.n_in {
        for z in 0..n_z {
            if observation.get(z, x) > 0.0 && marginal(z, x) <= PROB_TOL {
                return Err(Error::SupportViolation);
            }
        }
    }
    ConditionalDistribution::from_fn(prior.n_out, prior.n_in, |za, x| {
        let z = za / n_a;
        let r = observation.get(z, x);
        if r == 0.0 {
            0.0
        } else {
            r * prior.get(za, x) / marginal(z, x)
        }
    })
}
