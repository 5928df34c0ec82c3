//! Recovering a two-qubit server output whose second qubit was lost, by three strategies:
//! the Petz map on the received qubit, replaying the prior on the stored input, and the
//! retrodiction supermap. Sweeps compare their average fidelities over prior and true noise.

use std::fmt::Write as _;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channels::{fidelity, pauli_eigenstates, Channel, DensityMatrix};
use crate::error::{Error, Result};
use crate::qmat::SystemDims;
use crate::retrodiction::{circuit_realization, petz, Family, RetrodictionBuild};
use crate::supermaps::{from_teeth, s4, Superchannel};

/// Upper bound allowed on a computed fidelity.
pub const FIDELITY_SLACK: f64 = 1e-9;

pub const CSV_HEADER: &str = "x,y,f_petz,f_prior,f_retro";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum StrategyId {
    /// Petz map of `Tr_A` with prior `Gamma(rho)`, applied to the received qubit.
    PetzOnResult,
    /// `Gamma(rho)`, ignoring the server.
    PriorReplay,
    /// The retrodiction supermap applied to the observed channel, then to `rho`.
    SupermapRetro,
}

impl StrategyId {
    pub const ALL: [StrategyId; 3] = [StrategyId::PetzOnResult, StrategyId::PriorReplay, StrategyId::SupermapRetro];
}

fn loss_supermap() -> Result<Superchannel> {
    s4(&SystemDims::single("X", 2), &SystemDims::single("Z", 2), &SystemDims::single("A", 2))
}

fn check_prior_shape(ch: &Channel, what: &str) -> Result<()> {
    if ch.in_dims().dims() != [2] || ch.out_dims().dims() != [2, 2] {
        return Err(Error::DimensionMismatch(format!("{what} must map one qubit to two")));
    }
    Ok(())
}

/// The recovered two-qubit state for one strategy.
///
/// `rho` is handed only to the Petz strategy; `retro` is the retrodiction supermap of
/// `Tr_A` for `prior`, needed only by the supermap strategy. The true channel enters
/// solely through the qubit that survives the loss.
pub fn run_strategy(
    id: StrategyId,
    prior: &Channel,
    true_channel: &Channel,
    rho: &DensityMatrix,
    retro: Option<&Superchannel>,
) -> Result<DensityMatrix> {
    check_prior_shape(prior, "prior")?;
    check_prior_shape(true_channel, "true channel")?;
    match id {
        StrategyId::PetzOnResult => {
            let received = true_channel.trace_output(&["A"])?.apply(rho)?;
            petz_recovery(prior, rho)?.apply(&received)
        }
        StrategyId::PriorReplay => prior.apply(rho),
        StrategyId::SupermapRetro => {
            let r = retro.ok_or_else(|| Error::MissingInput("the supermap strategy needs a retrodiction".into()))?;
            r.apply(&loss_supermap()?.apply(true_channel)?)?.apply(rho)
        }
    }
}

fn petz_recovery(prior: &Channel, rho: &DensityMatrix) -> Result<Channel> {
    let partial = Channel::partial_trace_map(prior.out_dims(), &["A"])?;
    petz(&partial, &prior.apply(rho)?)
}

/// Mean fidelity with `true_channel(rho)` over the six Pauli eigenstates.
pub fn average_fidelity(
    id: StrategyId,
    prior: &Channel,
    true_channel: &Channel,
    retro: Option<&Superchannel>,
) -> Result<f64> {
    let states = pauli_eigenstates("X");
    let mut total = 0.0;
    for rho in &states {
        let ideal = true_channel.apply(rho)?;
        total += fidelity(&run_strategy(id, prior, true_channel, rho, retro)?, &ideal)?;
    }
    Ok(total / states.len() as f64)
}

/// The retrodiction supermap for `family` at noise `x`: the closed form for `x > 0`
/// and the circuit realization at `x = 0`.
pub fn retrodiction_for(family: Family, x: f64) -> Result<Superchannel> {
    if x == 0.0 {
        from_teeth(&circuit_realization(family))
    } else {
        Ok(RetrodictionBuild::for_family(family, x)?.0)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    pub prior_family: Family,
    pub true_family: Family,
    /// Prior noise values, in `(0, 1]`.
    pub xs: Vec<f64>,
    /// True noise values, in `[0, 1]`.
    pub ys: Vec<f64>,
}

/// `n` evenly spaced values from 0.05 to 1.
pub fn default_grid(n: usize) -> Vec<f64> {
    match n {
        0 => vec![],
        1 => vec![1.0],
        _ => (0..n).map(|k| 0.05 + 0.95 * k as f64 / (n - 1) as f64).collect(),
    }
}

impl SweepSpec {
    /// The same `n`-point default grid on both axes.
    pub fn square(prior_family: Family, true_family: Family, n: usize) -> Self {
        let grid = default_grid(n);
        Self { prior_family, true_family, xs: grid.clone(), ys: grid }
    }

    pub fn validate(&self) -> Result<()> {
        if self.xs.is_empty() || self.ys.is_empty() {
            return Err(Error::MissingInput("empty sweep grid".into()));
        }
        // A noiseless prior makes the Petz strategy lose trace off its support.
        if let Some(&x) = self.xs.iter().find(|x| !(**x > 0.0 && **x <= 1.0)) {
            return Err(Error::OutOfRange { what: "prior noise", value: x });
        }
        if let Some(&y) = self.ys.iter().find(|y| !(0.0..=1.0).contains(*y)) {
            return Err(Error::OutOfRange { what: "true noise", value: y });
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub x: f64,
    pub y: f64,
    pub f_petz: f64,
    pub f_prior: f64,
    pub f_retro: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub spec: SweepSpec,
    pub rows: Vec<SweepRow>,
}

/// Data that depends only on the true noise `y`.
struct TrueSide {
    y: f64,
    observed: Channel,
    received: Vec<DensityMatrix>,
    ideal: Vec<DensityMatrix>,
}

fn true_side(family: Family, y: f64, states: &[DensityMatrix]) -> Result<TrueSide> {
    let channel = family.prior(y)?;
    let observed = loss_supermap()?.apply(&channel)?;
    let received = states.iter().map(|rho| observed.apply(rho)).collect::<Result<_>>()?;
    let ideal = states.iter().map(|rho| channel.apply(rho)).collect::<Result<_>>()?;
    Ok(TrueSide { y, observed, received, ideal })
}

fn column(spec: &SweepSpec, x: f64, truths: &[TrueSide], states: &[DensityMatrix]) -> Result<Vec<SweepRow>> {
    let at = |y: f64| move |e: Error| Error::SweepPoint { x, y, source: Box::new(e) };
    let first_y = truths[0].y;
    let prior = spec.prior_family.prior(x).map_err(at(first_y))?;
    let retro = retrodiction_for(spec.prior_family, x).map_err(at(first_y))?;
    let petz_maps: Vec<Channel> =
        states.iter().map(|rho| petz_recovery(&prior, rho)).collect::<Result<_>>().map_err(at(first_y))?;
    let replayed: Vec<DensityMatrix> =
        states.iter().map(|rho| prior.apply(rho)).collect::<Result<_>>().map_err(at(first_y))?;
    truths
        .iter()
        .map(|t| {
            let point = || -> Result<SweepRow> {
                let recovered = retro.apply(&t.observed)?;
                let n = states.len() as f64;
                let (mut f1, mut f2, mut f3) = (0.0, 0.0, 0.0);
                for (k, rho) in states.iter().enumerate() {
                    f1 += fidelity(&petz_maps[k].apply(&t.received[k])?, &t.ideal[k])?;
                    f2 += fidelity(&replayed[k], &t.ideal[k])?;
                    f3 += fidelity(&recovered.apply(rho)?, &t.ideal[k])?;
                }
                let row = SweepRow { x, y: t.y, f_petz: f1 / n, f_prior: f2 / n, f_retro: f3 / n };
                for f in [row.f_petz, row.f_prior, row.f_retro] {
                    if !(0.0..=1.0 + FIDELITY_SLACK).contains(&f) {
                        return Err(Error::OutOfRange { what: "fidelity", value: f });
                    }
                }
                Ok(row)
            };
            point().map_err(at(t.y))
        })
        .collect()
}

/// Average fidelities of the three strategies at every `(x, y)` of the grid, sorted by `(x, y)`.
pub fn sweep(spec: &SweepSpec) -> Result<SweepResult> {
    spec.validate()?;
    let states = pauli_eigenstates("X");
    let mut ys = spec.ys.clone();
    ys.sort_by(f64::total_cmp);
    let mut xs = spec.xs.clone();
    xs.sort_by(f64::total_cmp);
    let truths: Vec<TrueSide> = ys
        .par_iter()
        .map(|&y| {
            true_side(spec.true_family, y, &states).map_err(|e| Error::SweepPoint { x: xs[0], y, source: Box::new(e) })
        })
        .collect::<Result<_>>()?;
    let columns: Vec<Vec<SweepRow>> =
        xs.par_iter().map(|&x| column(spec, x, &truths, &states)).collect::<Result<_>>()?;
    Ok(SweepResult { spec: spec.clone(), rows: columns.into_iter().flatten().collect() })
}

/// `%.12g`-style formatting.
pub fn format_g12(v: f64) -> String {
    if v == 0.0 {
        return "0".to_string();
    }
    if !v.is_finite() {
        return v.to_string();
    }
    let sci = format!("{v:.11e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent in scientific format");
    let exp: i32 = exp.parse().expect("integer exponent");
    if (-5..12).contains(&exp) {
        let fixed = format!("{:.*}", (11 - exp) as usize, v);
        trim_zeros(&fixed).to_string()
    } else {
        format!("{}e{}{:02}", trim_zeros(mantissa), if exp < 0 { '-' } else { '+' }, exp.abs())
    }
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

impl SweepResult {
    pub fn to_csv(&self) -> String {
        let mut out = String::with_capacity(64 * (self.rows.len() + 1));
        out.push_str(CSV_HEADER);
        out.push('\n');
        for r in &self.rows {
            let cells = [r.x, r.y, r.f_petz, r.f_prior, r.f_retro].map(format_g12);
            writeln!(out, "{}", cells.join(",")).expect("writing to a String");
        }
        out
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_csv())?;
        Ok(())
    }

    pub fn row(&self, x: f64, y: f64) -> Option<&SweepRow> {
        self.rows.iter().find(|r| r.x == x && r.y == y)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn g12_matches_printf() {
        let cases = [
            (1.0, "1"),
            (0.05, "0.05"),
            (0.1 + 0.2, "0.3"),
            (2.0 / 3.0, "0.666666666667"),
            (123456.789, "123456.789"),
            (1e-7, "1e-07"),
            (-2.5e-9, "-2.5e-09"),
            (1.5e15, "1.5e+15"),
            (0.99999999999999, "1"),
            (0.0001234, "0.0001234"),
        ];
        for (v, want) in cases {
            assert_eq!(format_g12(v), want, "{v}");
        }
    }

    #[test]
    fn default_grid_endpoints() {
        let g = default_grid(21);
        assert_eq!(g.len(), 21);
        assert_eq!(g[0], 0.05);
        assert!((g[20] - 1.0).abs() < 1e-15);
        assert!((g[1] - 0.0975).abs() < 1e-15);
    }

    #[test]
    fn matching_prior_gives_perfect_recovery() {
        for fam in Family::ALL {
            let prior = fam.prior(0.4).unwrap();
            let r = retrodiction_for(fam, 0.4).unwrap();
            for id in StrategyId::ALL {
                let f = average_fidelity(id, &prior, &prior, Some(&r)).unwrap();
                assert!((f - 1.0).abs() < 1e-9, "{fam} {id:?}: {f}");
            }
        }
    }

    #[test]
    fn prior_replay_ignores_the_true_channel() {
        let prior = Family::Cnot.prior(0.3).unwrap();
        let rho = &pauli_eigenstates("X")[2];
        let a = run_strategy(StrategyId::PriorReplay, &prior, &Family::Swap.prior(0.9).unwrap(), rho, None).unwrap();
        let b = run_strategy(StrategyId::PriorReplay, &prior, &Family::Cnot.prior(0.1).unwrap(), rho, None).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn supermap_strategy_needs_a_retrodiction() {
        let prior = Family::Cnot.prior(0.3).unwrap();
        let rho = &pauli_eigenstates("X")[0];
        assert!(matches!(
            run_strategy(StrategyId::SupermapRetro, &prior, &prior, rho, None),
            Err(Error::MissingInput(_))
        ));
    }

    #[test]
    fn swap_petz_and_supermap_agree() {
        let prior = Family::Swap.prior(0.3).unwrap();
        let truth = Family::Swap.prior(0.8).unwrap();
        let r = retrodiction_for(Family::Swap, 0.3).unwrap();
        let f1 = average_fidelity(StrategyId::PetzOnResult, &prior, &truth, Some(&r)).unwrap();
        let f3 = average_fidelity(StrategyId::SupermapRetro, &prior, &truth, Some(&r)).unwrap();
        assert!((f1 - f3).abs() <= 1e-10, "{f1} {f3}");
    }

    #[test]
    fn small_sweep_matches_pointwise_evaluation() {
        let spec = SweepSpec::square(Family::Cnot, Family::Cnot, 3);
        let res = sweep(&spec).unwrap();
        assert_eq!(res.rows.len(), 9);
        for r in &res.rows {
            if r.x == r.y {
                for f in [r.f_petz, r.f_prior, r.f_retro] {
                    assert!((f - 1.0).abs() < 1e-9);
                }
            }
        }
        let pick = res.rows[1];
        let prior = Family::Cnot.prior(pick.x).unwrap();
        let truth = Family::Cnot.prior(pick.y).unwrap();
        let retro = retrodiction_for(Family::Cnot, pick.x).unwrap();
        let f3 = average_fidelity(StrategyId::SupermapRetro, &prior, &truth, Some(&retro)).unwrap();
        let f1 = average_fidelity(StrategyId::PetzOnResult, &prior, &truth, None).unwrap();
        assert!((f3 - pick.f_retro).abs() < 1e-14 && (f1 - pick.f_petz).abs() < 1e-14);
        let csv = res.to_csv();
        assert!(csv.starts_with("x,y,f_petz,f_prior,f_retro\n"));
        assert_eq!(csv.lines().count(), 10);
        assert_eq!(csv, sweep(&spec).unwrap().to_csv());
    }

    #[test]
    fn noiseless_prior_uses_the_circuit() {
        for fam in Family::ALL {
            let prior = fam.prior(0.0).unwrap();
            let r = retrodiction_for(fam, 0.0).unwrap();
            assert!(r.validate().valid);
            let f = average_fidelity(StrategyId::SupermapRetro, &prior, &prior, Some(&r)).unwrap();
            assert!((f - 1.0).abs() < 1e-9, "{fam}: {f}");
        }
        let spec = SweepSpec { prior_family: Family::Swap, true_family: Family::Swap, xs: vec![0.0], ys: vec![0.5] };
        assert!(matches!(sweep(&spec), Err(Error::OutOfRange { .. })));
        let spec = SweepSpec { prior_family: Family::Swap, true_family: Family::Swap, xs: vec![0.5], ys: vec![0.0] };
        assert_eq!(sweep(&spec).unwrap().rows.len(), 1);
    }

    #[test]
    fn bad_grids_are_rejected() {
        let mut spec = SweepSpec::square(Family::Cnot, Family::Cnot, 2);
        spec.ys.push(1.5);
        assert!(matches!(sweep(&spec), Err(Error::OutOfRange { .. })));
        spec.ys.clear();
        assert!(matches!(sweep(&spec), Err(Error::MissingInput(_))));
    }
}
