mod common;

use authcap::simkit::{
    authentication_exact, epsilon_exact, epsilon_mc, epsilon_round, omega_exact, omega_with_strategy, AaCode,
    CodeParams, Decision, RationalKernel, RemappedCode, SimError, SimmonsCode, TableCode, TypeClassCode,
};
use authcap::typelab::{empirical, empirical_cond, CondNType, Sequence};
use common::*;
use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};
use proptest::prelude::*;

fn identity2() -> RationalKernel {
    RationalKernel::identity(2).unwrap()
}

#[test]
fn corpus_matches_brute_force_epsilon_and_omega() {
    for inst in corpus() {
        let code = inst.code.as_ref();
        for round in 0..code.params().rounds {
            let eps = epsilon_round(code, &inst.t, round).unwrap();
            assert_eq!(eps, brute_epsilon(code, &inst.t, round), "epsilon, {} round {round}", inst.name);
            let om = omega_exact(code, &inst.q, round).unwrap();
            assert_eq!(om.value, brute_omega(code, &inst.q, round), "omega, {} round {round}", inst.name);
            assert_eq!(omega_with_strategy(code, &inst.q, &om.strategy).unwrap(), om.value, "{}", inst.name);
        }
    }
}

#[test]
fn omega_beats_every_deterministic_map_on_reference_instance() {
    let inst = corpus().into_iter().find(|i| i.name == "keyed-n2-k2").unwrap();
    let code = inst.code.as_ref();
    let p = code.params();
    assert_eq!((p.n, p.keys, p.rounds), (2, 2, 1));
    let exact = omega_exact(code, &inst.q, 0).unwrap().value;
    assert_eq!(exact, all_maps_omega(code, &inst.q, 0));
    assert!(exact > BigRational::zero());
}

#[test]
fn omega_with_single_key_and_noiseless_links_is_one() {
    let params = CodeParams::new(2, 1, 4, 1, 2, 2).unwrap();
    let code = TableCode::deterministic(params, |m, _| m, |y, _| Decision::Message(y)).unwrap();
    let q = identity2();
    assert_eq!(omega_exact(&code, &q, 0).unwrap().value, BigRational::one());
    assert!(epsilon_exact(&code, &q).unwrap().value.is_zero());

    let simmons = SimmonsCode::build(2, 2, 1, 3).unwrap();
    assert_eq!(omega_exact(&simmons, &q, 0).unwrap().value, BigRational::one());
}

#[test]
fn accept_all_decoders() {
    // Every y is accepted, as a y-dependent message: an interloper that sees x
    // always has a y naming another message.
    let params = CodeParams::new(2, 1, 2, 2, 2, 2).unwrap();
    let code = TableCode::deterministic(params.clone(), |m, k| 2 * k + m, |y, _| Decision::Message(y % 2)).unwrap();
    assert_eq!(omega_exact(&code, &identity2(), 0).unwrap().value, BigRational::one());
    // A decoder stuck on one message is fooled exactly when another message was sent.
    let params3 = CodeParams::new(1, 1, 3, 1, 2, 2).unwrap();
    let fixed = TableCode::deterministic(params3, |m, _| m % 2, |_, _| Decision::Message(2)).unwrap();
    let dead = RationalKernel::new(vec![vec![rat(1, 2), rat(1, 2)]; 2]).unwrap();
    assert_eq!(omega_exact(&fixed, &dead, 0).unwrap().value, rat(2, 3));
    let always_zero = TableCode::deterministic(params, |m, k| 2 * k + m, |_, _| Decision::Message(0)).unwrap();
    assert_eq!(omega_exact(&always_zero, &identity2(), 0).unwrap().value, rat(1, 2));
}

#[test]
fn epsilon_edge_cases() {
    let params = CodeParams::new(3, 1, 8, 1, 2, 2).unwrap();
    let code = TableCode::deterministic(params, |m, _| m, |y, _| Decision::Message(y)).unwrap();
    assert!(epsilon_exact(&code, &identity2()).unwrap().value.is_zero());
    let eps = epsilon_exact(&code, &bsc(1, 2)).unwrap().value;
    assert!(eps >= rat(1, 2));
    assert_eq!(eps, rat(7, 8));
    for inst in corpus() {
        let e = epsilon_exact(inst.code.as_ref(), &bsc(1, 2));
        if inst.code.params().messages >= 2 {
            assert!(e.unwrap().value >= rat(1, 2), "{}", inst.name);
        }
    }
}

#[test]
fn epsilon_monte_carlo_agrees() {
    for inst in corpus() {
        let code = inst.code.as_ref();
        let exact = epsilon_round(code, &inst.t, 0).unwrap().to_f64().unwrap();
        let mc = epsilon_mc(code, &inst.t, 0, 100_000, 2026).unwrap();
        assert!((mc.mean - exact).abs() <= 3.0 * mc.stderr + 1e-12, "{}: {} vs {exact} ± {}", inst.name, mc.mean, mc.stderr);
    }
}

#[test]
fn budget_is_enforced() {
    let params = CodeParams::new(10, 1, 64, 2, 2, 4).unwrap();
    let code = TableCode::deterministic(params, |m, _| m, |_, _| Decision::Intrusion).unwrap();
    let t = RationalKernel::new(vec![vec![rat(1, 4); 4]; 2]).unwrap();
    assert!(matches!(epsilon_exact(&code, &t), Err(SimError::Budget { .. })));
    let q = RationalKernel::new(vec![vec![rat(1, 4); 4]; 2]).unwrap();
    assert!(matches!(omega_exact(&code, &q, 0), Err(SimError::Budget { .. })));
}

#[test]
fn simmons_attacks_and_omega_agree() {
    for seed in 0..20 {
        let code = SimmonsCode::build(4, 2, 4, seed).unwrap();
        let sub = code.substitution_success();
        assert!(code.impersonation_success() <= sub);
        // With a noiseless wiretap the interloper sees x itself.
        assert_eq!(omega_exact(&code, &identity2(), 0).unwrap().value, sub);
    }
}

#[test]
fn simmons_average_substitution_is_near_half_key_exponent() {
    let total: BigRational = (0..1000u64).map(|s| SimmonsCode::build(4, 2, 4, s).unwrap().substitution_success()).sum();
    let mean = total.to_f64().unwrap() / 1000.0;
    assert!((0.25..=1.0).contains(&mean), "{mean}");
}

// Brute-force version of the decoding rule: score every triple by summing
// t(y|x) over all x whose conditional type given u matches rho.
fn brute_decode(code: &TypeClassCode, y: usize, key: usize) -> Decision {
    let spec = code.spec();
    let n = spec.n;
    let xa = spec.rho.out_size();
    let ya = spec.t.out_size();
    let yseq = Sequence::from_index(y, n, ya);
    let mut scores = Vec::new();
    for hat in 0..spec.message_hat {
        for tilde in 0..spec.message_tilde {
            for k in 0..spec.keys {
                let u = code.u(hat, tilde, k);
                let mut s = BigRational::zero();
                for x in 0..xa.pow(n as u32) {
                    let xseq = Sequence::from_index(x, n, xa);
                    if empirical_cond(&xseq, u).unwrap() == spec.rho {
                        s += spec.t.seq_prob(xseq.symbols(), yseq.symbols());
                    }
                }
                scores.push((s, hat * spec.message_tilde + tilde, k));
            }
        }
    }
    let best = scores.iter().map(|s| s.0.clone()).max().unwrap();
    let top: Vec<_> = scores.iter().filter(|s| s.0 == best).collect();
    match top.as_slice() {
        [(_, m, k)] if *k == key => Decision::Message(*m),
        _ => Decision::Intrusion,
    }
}

#[test]
fn typeclass_decoder_matches_brute_force() {
    let specs = [
        typeclass_spec(3, 1, 2, 2, 2, vec![3], vec![vec![1, 2]], vec![vec![1, 0], vec![1, 1]], random_t(1)),
        typeclass_spec(
            3,
            1,
            2,
            1,
            3,
            vec![2, 1],
            vec![vec![1, 1, 0], vec![0, 0, 1]],
            vec![vec![1, 0], vec![0, 1], vec![0, 1]],
            random_t(2),
        ),
        typeclass_spec(4, 1, 1, 3, 2, vec![4], vec![vec![2, 2]], vec![vec![1, 1], vec![0, 2]], random_t(3)),
    ];
    for (i, spec) in specs.into_iter().enumerate() {
        let code = TypeClassCode::build(spec, 40 + i as u64).unwrap();
        let ys = 2usize.pow(code.params().n as u32);
        for y in 0..ys {
            for k in 0..code.params().keys {
                assert_eq!(code.decode(0, y, k), brute_decode(&code, y, k), "spec {i} y {y} k {k}");
            }
        }
    }
}

fn random_t(seed: u64) -> RationalKernel {
    use rand::SeedableRng;
    random_kernel(&mut rand_chacha::ChaCha8Rng::seed_from_u64(seed), 2, 2)
}

#[test]
fn typeclass_codebook_lies_in_its_classes() {
    let spec = typeclass_spec(
        4,
        1,
        3,
        2,
        2,
        vec![2, 2],
        vec![vec![1, 1, 0], vec![0, 0, 2]],
        vec![vec![1, 0], vec![0, 1], vec![1, 1]],
        bsc(1, 10),
    );
    let code = TypeClassCode::build(spec.clone(), 3).unwrap();
    for hat in 0..3 {
        let w = &code.w()[hat];
        assert_eq!(empirical(w), spec.tau);
        for tilde in 0..2 {
            for k in 0..2 {
                let u = code.u(hat, tilde, k);
                assert_eq!(empirical_cond(u, w).unwrap(), spec.sigma);
                for (x, p) in code.encode(0, hat * 2 + tilde, k) {
                    let xs = Sequence::from_index(x, 4, 2);
                    assert_eq!(empirical_cond(&xs, u).unwrap(), spec.rho);
                    assert!(p > BigRational::zero());
                }
            }
        }
    }
    assert_eq!(code, TypeClassCode::build(spec.clone(), 3).unwrap());
    assert_eq!(code.to_json(), TypeClassCode::build(spec, 3).unwrap().to_json());
}

#[test]
fn typeclass_degenerate_choices() {
    // sigma = identity on a point-mass tau: every w and every u coincide.
    let spec = typeclass_spec(3, 1, 3, 2, 2, vec![3, 0], vec![vec![3, 0], vec![0, 0]], vec![vec![2, 1], vec![0, 0]], bsc(1, 10));
    let code = TypeClassCode::build(spec, 1).unwrap();
    assert!(code.w().iter().all(|w| w == &code.w()[0]));
    // rho = sigma = identity types: singleton classes, deterministic encoder.
    let spec = typeclass_spec(4, 1, 2, 2, 2, vec![2, 2], vec![vec![2, 0], vec![0, 2]], vec![vec![2, 0], vec![0, 2]], bsc(1, 10));
    let code = TypeClassCode::build(spec, 2).unwrap();
    for m in 0..4 {
        for k in 0..2 {
            let enc = code.encode(0, m, k);
            assert_eq!(enc.len(), 1);
            assert!(enc[0].1.is_one());
        }
    }
}

#[test]
fn typeclass_rejects_bad_types() {
    let mut spec = typeclass_spec(2, 1, 1, 1, 1, vec![2], vec![vec![1, 1]], vec![vec![1, 0], vec![0, 1]], bsc(1, 4));
    spec.sigma = CondNType::new(vec![vec![2, 0]]).unwrap();
    assert!(TypeClassCode::build(spec.clone(), 0).is_err());
    spec.sigma = CondNType::new(vec![vec![1, 1], vec![1, 0]]).unwrap();
    assert!(TypeClassCode::build(spec, 0).is_err());
}

#[test]
fn noiseless_unique_image_decodes_to_its_message() {
    let spec = typeclass_spec(3, 1, 1, 3, 1, vec![3], vec![vec![2, 1]], vec![vec![2, 0], vec![0, 1]], identity2());
    let u = vec![
        Sequence::new(vec![0, 0, 1], 2).unwrap(),
        Sequence::new(vec![0, 1, 0], 2).unwrap(),
        Sequence::new(vec![1, 0, 0], 2).unwrap(),
    ];
    let w = vec![Sequence::new(vec![0, 0, 0], 1).unwrap()];
    let code = TypeClassCode::from_codebook(spec, w.clone(), u.clone()).unwrap();
    for (m, ui) in u.iter().enumerate() {
        assert_eq!(code.decode_sequence(ui, 0), Decision::Message(m));
    }
    // Two codewords with the same u tie under every y.
    let spec = typeclass_spec(3, 1, 1, 2, 1, vec![3], vec![vec![2, 1]], vec![vec![2, 0], vec![0, 1]], identity2());
    let tied = TypeClassCode::from_codebook(spec, w, vec![u[0].clone(), u[0].clone()]).unwrap();
    assert_eq!(tied.decode_sequence(&u[0], 0), Decision::Intrusion);
}

#[test]
fn identity_remap_changes_nothing() {
    for inst in corpus().into_iter().filter(|i| i.name.starts_with("typeclass")) {
        let p = inst.code.params().clone();
        let ident: Vec<usize> = (0..p.messages).collect();
        let maps = vec![vec![ident; p.rounds]];
        let remapped = RemappedCode::from_maps(inst.code.as_ref(), p.messages, maps).unwrap();
        assert_eq!(epsilon_exact(&remapped, &inst.t).unwrap(), epsilon_exact(inst.code.as_ref(), &inst.t).unwrap());
        assert_eq!(authentication_exact(&remapped, &inst.q).unwrap(), authentication_exact(inst.code.as_ref(), &inst.q).unwrap());
    }
}

#[test]
fn remap_with_permutations_keeps_average_epsilon() {
    let inst = corpus().into_iter().find(|i| i.name == "typeclass-n3-j2").unwrap();
    let p = inst.code.params().clone();
    let remapped = RemappedCode::build(inst.code.as_ref(), p.messages, 4).unwrap();
    assert_eq!(remapped.extra_keys(), 1);
    assert_eq!(epsilon_exact(&remapped, &inst.t).unwrap(), epsilon_exact(inst.code.as_ref(), &inst.t).unwrap());
}

#[test]
fn remap_folds_foreign_messages_into_intrusion() {
    let base = SimmonsCode::build(2, 2, 1, 0).unwrap();
    let remapped = RemappedCode::from_maps(&base, 1, vec![vec![vec![2]]]).unwrap();
    let foreign = base.codewords()[0][1];
    assert_eq!(base.decode(0, foreign, 0), Decision::Message(1));
    assert_eq!(remapped.decode(0, foreign, 0), Decision::Intrusion);
    assert_eq!(remapped.decode(0, base.codewords()[0][2], 0), Decision::Message(0));
}

#[test]
fn remapped_omega_within_exponent_slack() {
    for seed in 0..6u64 {
        let spec = typeclass_spec(2, 1, 1, 4, 1, vec![2], vec![vec![1, 1]], vec![vec![1, 0], vec![0, 1]], bsc(1, 10));
        let base = TypeClassCode::build(spec, seed).unwrap();
        let q = bsc(1, 5);
        let before = omega_exact(&base, &q, 0).unwrap().value;
        let remapped = RemappedCode::build(&base, 2, seed).unwrap();
        let after = omega_exact(&remapped, &q, 0).unwrap().value;
        // ω̃ ≤ ω · 2^{-nβ} · (ne)², with e² < 739/100.
        let n = BigRational::from_integer(BigInt::from(2));
        let bound = &before * rat(2, 4) * &n * &n * rat(739, 100);
        assert!(after <= bound, "seed {seed}: {after} vs {bound}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn simmons_impersonation_never_beats_substitution(seed in any::<u64>(), n in 2usize..5) {
        let code = SimmonsCode::build(n, 2, 4, seed).unwrap();
        prop_assert!(code.impersonation_success() <= code.substitution_success());
    }

    #[test]
    fn epsilon_matches_brute_force_on_random_tables(seed in any::<u64>(), n in 1usize..4, keys in 1usize..4, messages in 1usize..4) {
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let params = CodeParams::new(n, 1, messages, keys, 2, 2).unwrap();
        let code = random_table_code(&mut rng, params, 1);
        let t = random_kernel(&mut rng, 2, 2);
        prop_assert_eq!(epsilon_round(&code, &t, 0).unwrap(), brute_epsilon(&code, &t, 0));
    }
}

// Fewer keys do not always mean a weaker interloper under the maximum-score
// decoder: here three keys leave every output tied, and a fourth key with a
// fresh codeword becomes a unique maximizer the interloper can aim at.
#[test]
fn an_extra_key_can_break_ties_for_the_interloper() {
    let spec = typeclass_spec(3, 1, 1, 2, 4, vec![3], vec![vec![2, 1]], vec![vec![1, 1], vec![0, 1]], bsc(1, 8));
    let code = TypeClassCode::build(spec, 5357134745019926694).unwrap();
    let q = bsc(1, 4);
    let omega: Vec<_> = (1..=4).map(|k| omega_exact(&code.restrict_keys(k).unwrap(), &q, 0).unwrap().value).collect();
    assert_eq!(omega, vec![rat(5, 8), rat(0, 1), rat(0, 1), rat(1, 8)]);
}
