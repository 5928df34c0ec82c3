use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use supermap::channels::fidelity;
use supermap::classical::{bayes_posterior, jeffrey_update, ConditionalDistribution, Distribution};
use supermap::qmat::{eigvalsh, herm_sqrt, kron, partial_trace, permute_systems, trace_distance};
use supermap::random::{ginibre, haar_unitary, random_channel, random_isometry, random_pure_state, random_state};
use supermap::retrodiction::{analytical_v, build_from_v, petz, Family};
use supermap::supermaps::{from_teeth, s2, TeethRealization};
use supermap::vsolver::objective;
use supermap::{CMatrix, Channel, DensityMatrix, SystemDims, C64};

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn q(label: &str) -> SystemDims {
    SystemDims::single(label, 2)
}

fn random_teeth(seed: u64, mid: usize, right: usize) -> TeethRealization {
    let mut r = rng(seed);
    let phi = random_pure_state(&mut r, q("L")).mat().column(0);
    let norm = phi.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    let phi: Vec<C64> = phi.iter().map(|z| z / norm).collect();
    TeethRealization {
        phi,
        u_left: random_isometry(&mut r, 2 * mid, 4),
        u_right: random_isometry(&mut r, 2 * right, 2 * mid),
        w: q("W"),
        x: q("X"),
        y: q("Y"),
        z: q("Z"),
        a_left: q("L"),
        a_mid: SystemDims::single("M", mid),
        a_right: SystemDims::single("R", right),
    }
}

fn random_s2(seed: u64, dims: [&str; 4]) -> supermap::Superchannel {
    let mut r = rng(seed);
    let (ul, ur) = (haar_unitary(&mut r, 2), haar_unitary(&mut r, 2));
    let [w, x, y, z] = dims.map(q);
    s2(&ul, &ur, &w, &x, &y, &z).unwrap()
}

fn distribution(weights: &[f64]) -> Distribution {
    let total: f64 = weights.iter().sum();
    Distribution::new(weights.iter().map(|w| w / total).collect()).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn kron_is_associative(seed in any::<u64>(), a in 1usize..4, b in 1usize..4, c in 1usize..4) {
        let mut r = rng(seed);
        let (x, y, z) = (ginibre(&mut r, a, b), ginibre(&mut r, b, c), ginibre(&mut r, c, a));
        let left = kron(&kron(&x, &y), &z);
        let right = kron(&x, &kron(&y, &z));
        prop_assert!(left.max_abs_diff(&right) < 1e-13);
    }

    #[test]
    fn partial_trace_of_product_is_scaled_factor(seed in any::<u64>()) {
        let mut r = rng(seed);
        let a = random_state(&mut r, q("A"));
        let b = random_state(&mut r, SystemDims::single("B", 3));
        let joint = kron(a.mat(), b.mat());
        let dims = SystemDims::new(["A", "B"], &[2, 3]).unwrap();
        prop_assert!(partial_trace(&joint, &dims, &["B"]).unwrap().max_abs_diff(a.mat()) < 1e-13);
        prop_assert!(partial_trace(&joint, &dims, &["A"]).unwrap().max_abs_diff(b.mat()) < 1e-13);
    }

    #[test]
    fn herm_sqrt_squares_back(seed in any::<u64>(), d in 1usize..6) {
        let mut r = rng(seed);
        let g = ginibre(&mut r, d, d);
        let psd = g.matmul(&g.adjoint());
        let s = herm_sqrt(&psd, 1e-12).unwrap();
        prop_assert!(s.hermiticity_violation() < 1e-12);
        prop_assert!(s.matmul(&s).max_abs_diff(&psd) < 1e-10 * (1.0 + psd.max_abs()));
    }

    #[test]
    fn permutation_preserves_trace_and_spectrum(seed in any::<u64>()) {
        let mut r = rng(seed);
        let dims = SystemDims::new(["A", "B", "C"], &[2, 3, 2]).unwrap();
        let rho = random_state(&mut r, dims.clone());
        let p = permute_systems(rho.mat(), &dims, &["C", "A", "B"]).unwrap();
        prop_assert!((p.trace() - rho.mat().trace()).norm() < 1e-13);
        let (e1, e2) = (eigvalsh(rho.mat()), eigvalsh(&p));
        for (x, y) in e1.iter().zip(&e2) {
            prop_assert!((x - y).abs() < 1e-12);
        }
        let back = permute_systems(&p, &SystemDims::new(["C", "A", "B"], &[2, 2, 3]).unwrap(), &["A", "B", "C"]).unwrap();
        prop_assert!(back.max_abs_diff(rho.mat()) < 1e-15);
    }

    #[test]
    fn kraus_and_choi_agree(seed in any::<u64>(), k in 1usize..5) {
        let mut r = rng(seed);
        let ch = random_channel(&mut r, q("X"), SystemDims::new(["Y"], &[3]).unwrap(), k);
        let kraus = ch.kraus();
        prop_assert!(kraus.len() <= k);
        let rebuilt = Channel::from_kraus(&kraus, ch.in_dims().clone(), ch.out_dims().clone()).unwrap();
        prop_assert!(rebuilt.distance(&ch) < 1e-12);
        let rho = random_state(&mut r, q("X"));
        let direct = kraus.iter().fold(CMatrix::zeros(3, 3), |mut acc, m| {
            acc += &m.sandwich(rho.mat());
            acc
        });
        prop_assert!(ch.apply(&rho).unwrap().mat().max_abs_diff(&direct) < 1e-12);
        prop_assert!(ch.validate().valid);
    }

    #[test]
    fn fidelity_is_symmetric_bounded_and_unitarily_invariant(seed in any::<u64>()) {
        let mut r = rng(seed);
        let (a, b) = (random_state(&mut r, q("X")), random_state(&mut r, q("X")));
        let f = fidelity(&a, &b).unwrap();
        prop_assert!((f - fidelity(&b, &a).unwrap()).abs() < 1e-10);
        prop_assert!((-1e-12..=1.0 + 1e-12).contains(&f));
        prop_assert!((fidelity(&a, &a).unwrap() - 1.0).abs() < 1e-10);
        let u = haar_unitary(&mut r, 2);
        let rot = |s: &DensityMatrix| DensityMatrix::new(u.sandwich(s.mat()), q("X")).unwrap();
        prop_assert!((fidelity(&rot(&a), &rot(&b)).unwrap() - f).abs() < 1e-10);
        let td = trace_distance(a.mat(), b.mat());
        prop_assert!(1.0 - f.sqrt() <= td + 1e-10 && td <= (1.0 - f).max(0.0).sqrt() + 1e-10);
    }

    #[test]
    fn random_teeth_give_superchannels(seed in any::<u64>(), mid in 2usize..4, extra in 1usize..3) {
        let s = from_teeth(&random_teeth(seed, mid, mid * extra)).unwrap();
        let rep = s.validate();
        prop_assert!(rep.valid, "{:?}", rep);
        let mut r = rng(seed ^ 1);
        let n = random_channel(&mut r, q("X"), q("Y"), 2);
        prop_assert!(s.apply(&n).unwrap().validate().valid);
    }

    #[test]
    fn supermaps_are_linear(seed in any::<u64>(), t in 0.0f64..1.0) {
        let s = from_teeth(&random_teeth(seed, 2, 2)).unwrap();
        let mut r = rng(seed ^ 2);
        let (n1, n2) = (random_channel(&mut r, q("X"), q("Y"), 2), random_channel(&mut r, q("X"), q("Y"), 3));
        let mut mix = n1.choi().scale_re(t);
        mix += &n2.choi().scale_re(1.0 - t);
        let lhs = s.apply_choi(&mix).unwrap();
        let mut rhs = s.apply(&n1).unwrap().choi().scale_re(t);
        rhs += &s.apply(&n2).unwrap().choi().scale_re(1.0 - t);
        prop_assert!(lhs.max_abs_diff(&rhs) < 1e-12);
    }

    #[test]
    fn composition_matches_sequential_application(seed in any::<u64>()) {
        let first = random_s2(seed, ["W", "X", "Y", "Z"]);
        let second = random_s2(seed ^ 3, ["V", "W", "Z", "U"]);
        let joint = first.then(&second).unwrap();
        prop_assert!(joint.validate().valid);
        let mut r = rng(seed ^ 4);
        let n = random_channel(&mut r, q("X"), q("Y"), 2);
        let direct = second.apply(&first.apply(&n).unwrap()).unwrap();
        prop_assert!(joint.apply(&n).unwrap().distance(&direct) < 1e-12);
    }

    #[test]
    fn petz_recovers_prior_and_is_involutive(seed in any::<u64>(), dout in 2usize..4) {
        let mut r = rng(seed);
        let out = SystemDims::single("Y", dout);
        let e = random_channel(&mut r, q("X"), out, 2 * dout);
        let gamma = random_state(&mut r, q("X"));
        let rec = petz(&e, &gamma).unwrap();
        prop_assert!(rec.validate().valid);
        let pushed = e.apply(&gamma).unwrap();
        prop_assert!(trace_distance(rec.apply(&pushed).unwrap().mat(), gamma.mat()) < 1e-10);
        prop_assert!(petz(&rec, &pushed).unwrap().distance(&e) < 1e-9);
    }

    #[test]
    fn closed_form_families_are_valid(fam in prop::sample::select(Family::ALL.to_vec()), p in 0.01f64..=1.0) {
        let prior = fam.prior(p).unwrap();
        let (v, angle) = analytical_v(fam, p).unwrap();
        prop_assert!((angle.sin().powi(2) + angle.cos().powi(2) - 1.0).abs() < 1e-14);
        prop_assert!(v.unitarity_residual() < 1e-14);
        prop_assert!(objective(&prior, &v).unwrap() < 1e-15);
        let (_, build) = build_from_v(&prior, &v, 2, &["A"]).unwrap();
        prop_assert!(build.validity.valid, "{:?}", build.validity);
    }

    #[test]
    fn classical_updates_stay_normalized(
        prior in prop::collection::vec(0.01f64..1.0, 3),
        soft in prop::collection::vec(0.0f64..1.0, 2).prop_filter("nonzero", |v| v.iter().sum::<f64>() > 1e-3),
        cols in prop::collection::vec(0.0f64..1.0, 3),
    ) {
        let prior = distribution(&prior);
        let likelihood = ConditionalDistribution::from_fn(2, 3, |y, x| if y == 0 { cols[x] } else { 1.0 - cols[x] }).unwrap();
        let predicted = likelihood.propagate(&prior).unwrap();
        prop_assert!((predicted.probs().iter().sum::<f64>() - 1.0).abs() < 1e-12);
        for y in 0..2 {
            if predicted.probs()[y] > 1e-9 {
                let post = bayes_posterior(&likelihood, &prior, y).unwrap();
                prop_assert!((post.probs().iter().sum::<f64>() - 1.0).abs() < 1e-12);
            }
        }
        prop_assert!(jeffrey_update(&likelihood, &prior, &predicted).unwrap().distance(&prior) < 1e-9);
        if predicted.probs().iter().all(|&p| p > 1e-9) {
            let update = jeffrey_update(&likelihood, &prior, &distribution(&soft)).unwrap();
            prop_assert!((update.probs().iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }
}
