use std::process::ExitCode;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use supermap::channels::{depolarizing, CHANNEL_TOL};
use supermap::classical::{s3_classical_update, s4_classical_update, ConditionalDistribution};
use supermap::experiments::{sweep, SweepSpec};
use supermap::qmat::{basis_vec, trace_distance};
use supermap::random::{haar_unitary, random_channel, random_state};
use supermap::retrodiction::{
    analytical_v, build_from_v, circuit_realization, extract_v, naive_v_counterexample, petz, retro_s1, retro_s2,
    retro_s3_coherence, retro_s4_measure_prepare, verify_properties, Family,
};
use supermap::supermaps::{from_teeth, identity, s1, s2, s3, s4};
use supermap::vsolver::{objective, solve, SolverConfig};
use supermap::{CMatrix, Channel, DensityMatrix, MeasurePrepareChannel, Result, SystemDims, C64};

struct Outcome {
    pass: bool,
    detail: String,
}

fn q(label: &str) -> SystemDims {
    SystemDims::single(label, 2)
}

fn p_grid() -> Vec<f64> {
    (1..=20).map(|k| k as f64 * 0.05).collect()
}

fn za() -> SystemDims {
    SystemDims::qubits(&["Z", "A"])
}

/// Petz recovery of random full-rank channel and prior pairs.
fn petz_recovery() -> Result<Outcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let (mut worst, mut invalid) = (0.0f64, 0);
    for k in 0..100 {
        let din = if k % 2 == 0 { 1 } else { 2 };
        let dout = 1 + rng.random_range(0..2);
        let labels = |prefix: &str, n: usize| -> Vec<String> { (0..n).map(|i| format!("{prefix}{i}")).collect() };
        let xin = labels("X", din);
        let yout = labels("Y", dout);
        let in_dims = SystemDims::qubits(&xin.iter().map(String::as_str).collect::<Vec<_>>());
        let out_dims = SystemDims::qubits(&yout.iter().map(String::as_str).collect::<Vec<_>>());
        let kraus = in_dims.total() * out_dims.total();
        let e = random_channel(&mut rng, in_dims.clone(), out_dims, kraus);
        let gamma = random_state(&mut rng, in_dims);
        let r = petz(&e, &gamma)?;
        if !r.validate().valid {
            invalid += 1;
        }
        let back = r.apply(&e.apply(&gamma)?)?;
        worst = worst.max(trace_distance(back.mat(), gamma.mat()));
    }
    Ok(Outcome {
        pass: worst <= 1e-10 && invalid == 0,
        detail: format!("max trace distance {worst:.2e}, invalid recovery maps {invalid}/100"),
    })
}

/// The naive co-isometry for the identity family at p = 1/2.
fn naive_supermap_rejected() -> Result<Outcome> {
    let a = naive_v_counterexample()?;
    let s5 = 5f64.sqrt() / 5.0;
    let (big, small) = (s5 + 0.5, 0.5 - s5);
    let neg = s5 - 0.5;
    let mut expect = CMatrix::zeros(8, 8);
    for (i, j, v) in [
        (0, 0, big),
        (0, 6, big),
        (1, 1, 1.0),
        (1, 4, neg),
        (1, 7, big),
        (3, 3, small),
        (3, 6, neg),
        (4, 1, neg),
        (4, 4, small),
        (6, 0, big),
        (6, 3, neg),
        (6, 6, 1.0),
        (7, 1, big),
        (7, 7, big),
    ] {
        expect[(i, j)] = C64::new(v, 0.0);
    }
    let diff = a.marginal.max_abs_diff(&expect);
    let c1 = a.report.condition1_residual;
    Ok(Outcome {
        pass: diff <= 1e-10 && c1 > CHANNEL_TOL && !a.report.valid,
        detail: format!("marginal deviation {diff:.2e}, condition 1 residual {c1:.3e}"),
    })
}

/// Closed-form builds are superchannels that restore the prior.
fn closed_form_builds() -> Result<Outcome> {
    let (mut validity, mut p2) = (0.0f64, 0.0f64);
    let mut checked = 0;
    for fam in Family::ALL {
        for p in p_grid() {
            let prior = fam.prior(p)?;
            let (v, _) = analytical_v(fam, p)?;
            let (r, build) = build_from_v(&prior, &v, 2, &["A"])?;
            let rep = &build.validity;
            validity = validity.max(rep.condition1_residual).max(rep.condition2_residual).max(-rep.min_eigenvalue);
            let s = s4(prior.in_dims(), &q("Z"), &q("A"))?;
            p2 = p2.max(verify_properties(&r, &s, &prior)?.property2_residual);
            checked += 1;
        }
    }
    Ok(Outcome {
        pass: validity <= 1e-9 && p2 <= 1e-9,
        detail: format!("{checked} builds, max validity residual {validity:.2e}, max property 2 residual {p2:.2e}"),
    })
}

/// Circuit realizations of the noiseless limit.
fn circuit_builds() -> Result<Outcome> {
    let (mut worst, mut invalid) = (0.0f64, 0);
    for fam in Family::ALL {
        let r = from_teeth(&circuit_realization(fam))?;
        if !r.validate().valid {
            invalid += 1;
        }
        let prior = fam.prior(0.0)?;
        let s = s4(prior.in_dims(), &q("Z"), &q("A"))?;
        worst = worst.max(verify_properties(&r, &s, &prior)?.property2_residual);
    }
    Ok(Outcome {
        pass: worst <= 1e-9 && invalid == 0,
        detail: format!("invalid realizations {invalid}/3, max property 2 residual {worst:.2e}"),
    })
}

/// Extracting V from a supermap and rebuilding it.
fn round_trip() -> Result<Outcome> {
    let mut sources: Vec<(Channel, CMatrix)> = Vec::new();
    for fam in Family::ALL {
        for p in [0.05, 0.3, 0.5, 0.75, 1.0] {
            sources.push((fam.prior(p)?, analytical_v(fam, p)?.0));
        }
    }
    for fam in [Family::Cnot, Family::Swap] {
        let prior = fam.prior(0.5)?;
        let res = solve(&prior, &SolverConfig { seed: 7, ..SolverConfig::default() })?;
        sources.push((prior, res.v));
    }
    let (mut coiso, mut unitary, mut rebuild) = (0.0f64, 0.0f64, 0.0f64);
    let mut wrong_rank = 0;
    for (prior, v) in &sources {
        let (r, _) = build_from_v(prior, v, 2, &["A"])?;
        let (v2, r_dim) = extract_v(&r, prior, &["A"])?;
        if r_dim != 2 || v2.nrows() != v2.ncols() {
            wrong_rank += 1;
            continue;
        }
        coiso = coiso.max(v2.co_isometry_residual());
        unitary = unitary.max(v2.unitarity_residual());
        let (r2, _) = build_from_v(prior, &v2, r_dim, &["A"])?;
        rebuild = rebuild.max(r2.distance(&r));
    }
    Ok(Outcome {
        pass: wrong_rank == 0 && coiso <= 1e-9 && unitary <= 1e-9 && rebuild <= 1e-9,
        detail: format!(
            "{} builds, VV^dag residual {coiso:.2e}, unitarity residual {unitary:.2e}, rebuild distance {rebuild:.2e}, rank mismatches {wrong_rank}",
            sources.len()
        ),
    })
}

/// Numerical search for V and the objective at the closed forms.
fn solver() -> Result<Outcome> {
    let cfg = SolverConfig::default();
    let mut parts = Vec::new();
    let mut pass = true;
    for fam in [Family::Cnot, Family::Swap] {
        let res = solve(&fam.prior(0.5)?, &cfg)?;
        pass &= res.converged && res.residual <= 1e-9 && res.restart < cfg.restarts;
        parts.push(format!("{fam}: objective {:.2e} on restart {}", res.residual, res.restart));
    }
    let mut worst = 0.0f64;
    for fam in Family::ALL {
        for p in p_grid() {
            worst = worst.max(objective(&fam.prior(p)?, &analytical_v(fam, p)?.0)?);
        }
    }
    pass &= worst <= 1e-15;
    parts.push(format!("closed-form objective max {worst:.2e}"));
    Ok(Outcome { pass, detail: parts.join(", ") })
}

/// Same-family 21x21 fidelity sweeps.
fn sweeps() -> Result<Outcome> {
    let (mut diag, mut dominance, mut swap_gap) = (0.0f64, 0.0f64, 0.0f64);
    for fam in Family::ALL {
        let result = sweep(&SweepSpec::square(fam, fam, 21))?;
        for row in &result.rows {
            if row.x == row.y {
                for f in [row.f_petz, row.f_prior, row.f_retro] {
                    diag = diag.max((f - 1.0).abs());
                }
            }
            dominance = dominance.max(row.f_petz - row.f_retro).max(row.f_prior - row.f_retro);
            if fam == Family::Swap {
                swap_gap = swap_gap.max((row.f_petz - row.f_retro).abs());
            }
        }
    }
    Ok(Outcome {
        pass: diag <= 1e-9 && dominance <= 1e-9 && swap_gap <= 1e-10,
        detail: format!(
            "diagonal deviation {diag:.2e}, max shortfall of retrodiction {dominance:.2e}, swap |f_petz - f_retro| {swap_gap:.2e}"
        ),
    })
}

/// Binary distributions on the 1/3 lattice: (q, 1 - q) with q in {0, 1/3, 2/3, 1}.
fn binary_columns() -> Vec<[f64; 2]> {
    (0..4).map(|k| [k as f64 / 3.0, 1.0 - k as f64 / 3.0]).collect()
}

/// Distributions on four outcomes with entries in multiples of 1/3.
fn quaternary_columns() -> Vec<[f64; 4]> {
    let mut out = Vec::new();
    for a in 0..=3 {
        for b in 0..=3 - a {
            for c in 0..=3 - a - b {
                let d = 3 - a - b - c;
                out.push([a, b, c, d].map(|n| n as f64 / 3.0));
            }
        }
    }
    out
}

fn binary_observations() -> Result<Vec<ConditionalDistribution>> {
    let cols = binary_columns();
    let mut out = Vec::new();
    for c0 in &cols {
        for c1 in &cols {
            out.push(ConditionalDistribution::new(vec![vec![c0[0], c1[0]], vec![c0[1], c1[1]]])?);
        }
    }
    Ok(out)
}

/// Quantum S3 and S4 retrodiction on diagonal embeddings against the classical updates.
fn classical_agreement() -> Result<Outcome> {
    let observations = binary_observations()?;
    let (mut worst, mut instances, mut skipped) = (0.0f64, 0usize, 0usize);

    let cols = binary_columns();
    let wa = SystemDims::qubits(&["W", "A"]);
    for idx in 0..cols.len().pow(4) {
        let pick: Vec<[f64; 2]> = (0..4).map(|k| cols[(idx / cols.len().pow(k)) % cols.len()]).collect();
        let prior = ConditionalDistribution::new((0..2).map(|y| pick.iter().map(|c| c[y]).collect()).collect())?;
        let gamma = prior.to_channel(wa.clone(), q("Y"))?;
        for a0 in 0..2 {
            let r = retro_s3_coherence(&gamma, &basis_vec(2, a0), &["A"])?;
            for obs in &observations {
                let quantum = r.apply(&obs.to_channel(q("W"), q("Y"))?)?;
                let classical = s3_classical_update(&prior, obs, a0)?;
                worst = worst.max(ConditionalDistribution::from_channel(&quantum)?.distance(&classical));
                instances += 1;
            }
        }
    }

    let quads = quaternary_columns();
    let projectors: Vec<CMatrix> = (0..2).map(|x| CMatrix::projector(&basis_vec(2, x))).collect();
    for c0 in &quads {
        for c1 in &quads {
            let prior = ConditionalDistribution::new((0..4).map(|o| vec![c0[o], c1[o]]).collect())?;
            let prepared = [c0, c1]
                .iter()
                .map(|c| DensityMatrix::new(CMatrix::diag_real(&c[..]), za()))
                .collect::<Result<Vec<_>>>()?;
            let mp = MeasurePrepareChannel::new(projectors.clone(), prepared, q("X"))?;
            let r = retro_s4_measure_prepare(&mp, &["A"])?;
            for obs in &observations {
                let Ok(classical) = s4_classical_update(&prior, obs) else {
                    skipped += 1;
                    continue;
                };
                let quantum = r.apply(&obs.to_channel(q("X"), q("Z"))?)?;
                worst = worst.max(ConditionalDistribution::from_channel(&quantum)?.distance(&classical));
                instances += 1;
            }
        }
    }
    Ok(Outcome {
        pass: worst <= 1e-10,
        detail: format!(
            "{instances} instances, max deviation {worst:.2e}, {skipped} observations outside the prior's support"
        ),
    })
}

/// Retrodiction of the basic supermaps on random inputs.
fn basic_supermaps() -> Result<Outcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let (mut inverse, mut p2, mut invalid) = (0.0f64, 0.0f64, 0);

    let (x, y, m) = (q("X"), q("Y"), q("M"));
    let (s, r) = (s1(&x, &y, &m)?, retro_s1(&x, &y, &m)?);
    inverse = inverse.max(s.then(&r)?.distance(&identity(&x, &y)));
    for _ in 0..10 {
        let kraus = 1 + rng.random_range(0..4);
        let n = random_channel(&mut rng, x.clone(), y.clone(), kraus);
        inverse = inverse.max(r.apply(&s.apply(&n)?)?.distance(&n));
    }

    let dims = [q("W"), q("X"), q("Y"), q("Z")];
    for _ in 0..10 {
        let (ul, ur) = (haar_unitary(&mut rng, 2), haar_unitary(&mut rng, 2));
        let s = s2(&ul, &ur, &dims[0], &dims[1], &dims[2], &dims[3])?;
        let r = retro_s2(&ul, &ur, &dims[0], &dims[1], &dims[2], &dims[3])?;
        inverse = inverse.max(s.then(&r)?.distance(&identity(&dims[1], &dims[2])));
        let n = random_channel(&mut rng, dims[1].clone(), dims[2].clone(), 2);
        inverse = inverse.max(r.apply(&s.apply(&n)?)?.distance(&n));
    }

    let wa = SystemDims::qubits(&["W", "A"]);
    for _ in 0..20 {
        let u = haar_unitary(&mut rng, 2);
        let phi: Vec<C64> = u.column(0).to_vec();
        let dephase = Channel::from_kraus(
            &(0..2)
                .map(|k| supermap::qmat::kron(&CMatrix::identity(2), &CMatrix::projector(&u.column(k))))
                .collect::<Vec<_>>(),
            wa.clone(),
            wa.clone(),
        )?;
        let kraus = 2 + rng.random_range(0..3);
        let gamma = dephase.then(&random_channel(&mut rng, wa.clone(), q("Y"), kraus))?;
        let r = retro_s3_coherence(&gamma, &phi, &["A"])?;
        let s = s3(&q("W"), &q("A"), &phi, &q("Y"))?;
        let rep = verify_properties(&r, &s, &gamma)?;
        invalid += usize::from(!rep.property1);
        p2 = p2.max(rep.property2_residual);
    }

    for _ in 0..20 {
        let u = haar_unitary(&mut rng, 2);
        let projectors: Vec<CMatrix> = (0..2).map(|k| CMatrix::projector(&u.column(k))).collect();
        let prepared = (0..2).map(|_| random_state(&mut rng, za())).collect();
        let mp = MeasurePrepareChannel::new(projectors, prepared, q("X"))?;
        let gamma = mp.channel();
        let r = retro_s4_measure_prepare(&mp, &["A"])?;
        let s = s4(&q("X"), &q("Z"), &q("A"))?;
        let rep = verify_properties(&r, &s, &gamma)?;
        invalid += usize::from(!rep.property1);
        p2 = p2.max(rep.property2_residual);
    }

    let noisy = depolarizing(0.4, q("X"))?;
    inverse = inverse.max(retro_s1(&x, &y, &m)?.apply(&s1(&x, &y, &m)?.apply(&noisy)?)?.distance(&noisy));

    Ok(Outcome {
        pass: inverse <= 1e-10 && p2 <= 1e-9 && invalid == 0,
        detail: format!(
            "max |R o S - id| {inverse:.2e}, max property 2 residual {p2:.2e}, invalid retrodictions {invalid}/40"
        ),
    })
}

type Criterion = (u32, &'static str, Duration, fn() -> Result<Outcome>);

fn main() -> ExitCode {
    let criteria: [Criterion; 9] = [
        (1, "Petz recovery of random full-rank pairs", Duration::from_secs(10), petz_recovery),
        (2, "naive co-isometry is rejected", Duration::from_secs(1), naive_supermap_rejected),
        (3, "closed-form builds over the noise grid", Duration::from_secs(30), closed_form_builds),
        (4, "circuit realizations of the noiseless limit", Duration::from_secs(5), circuit_builds),
        (5, "co-isometry extraction round trip", Duration::from_secs(10), round_trip),
        (6, "numerical co-isometry search", Duration::from_secs(300), solver),
        (7, "same-family fidelity sweeps", Duration::from_secs(300), sweeps),
        (8, "agreement with classical updates", Duration::from_secs(30), classical_agreement),
        (9, "retrodiction of the basic supermaps", Duration::from_secs(30), basic_supermaps),
    ];
    let mut failures = 0;
    for (id, name, budget, run) in criteria {
        let start = Instant::now();
        let outcome = run();
        let elapsed = start.elapsed();
        let (pass, detail) = match outcome {
            Ok(o) => (o.pass && elapsed <= budget, o.detail),
            Err(e) => (false, format!("error: {e}")),
        };
        if !pass {
            failures += 1;
        }
        println!(
            "[{}] criterion {id}: {name}: {detail} ({:.2} s, budget {} s)",
            if pass { "PASS" } else { "FAIL" },
            elapsed.as_secs_f64(),
            budget.as_secs()
        );
    }
    if failures == 0 {
        println!("acceptance: all 9 criteria passed");
        ExitCode::SUCCESS
    } else {
        println!("acceptance: {failures} of 9 criteria failed");
        ExitCode::FAILURE
    }
}
