// Shared simulation corpus and brute-force oracles. Also pulled into the
// acceptance target by path.
#![allow(dead_code)]

pub mod projection;

use authcap::simkit::{
    AaCode, CodeParams, Decision, RationalKernel, RemappedCode, SimmonsCode, TableCode, TypeClassCode, TypeClassSpec,
};
use authcap::typelab::{CondNType, NType};
use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rat(a: i64, b: i64) -> BigRational {
    BigRational::new(BigInt::from(a), BigInt::from(b))
}

pub fn bsc(a: i64, b: i64) -> RationalKernel {
    RationalKernel::bsc(&rat(a, b)).unwrap()
}

fn base_digits(mut index: usize, n: usize, alphabet: usize) -> Vec<usize> {
    let mut out = vec![0; n];
    for slot in out.iter_mut().rev() {
        *slot = index % alphabet;
        index /= alphabet;
    }
    out
}

fn pow(b: usize, e: usize) -> usize {
    (0..e).fold(1, |acc, _| acc * b)
}

fn word_prob(k: &RationalKernel, x: usize, y: usize, n: usize) -> BigRational {
    let xs = base_digits(x, n, k.in_size());
    let ys = base_digits(y, n, k.out_size());
    let mut p = BigRational::one();
    for i in 0..n {
        p *= k.get(xs[i], ys[i]);
    }
    p
}

/// Full encoder row `f(x|m,k)` over every `x`.
fn full_encoder(code: &dyn AaCode, round: usize, m: usize, k: usize) -> Vec<BigRational> {
    let p = code.params();
    let mut row = vec![BigRational::zero(); pow(p.x_alphabet, p.n)];
    for (x, w) in code.encode(round, m, k) {
        row[x] += w;
    }
    row
}

/// `ε` by summing `φ(m|y,k) t(y|x) f(x|m,k)` over every `(m, k, x, y)`.
pub fn brute_epsilon(code: &dyn AaCode, t: &RationalKernel, round: usize) -> BigRational {
    let p = code.params();
    let (xs, ys) = (pow(p.x_alphabet, p.n), pow(p.y_alphabet, p.n));
    let mut correct = BigRational::zero();
    for m in 0..p.messages {
        for k in 0..p.keys {
            let f = full_encoder(code, round, m, k);
            for x in 0..xs {
                if f[x].is_zero() {
                    continue;
                }
                for y in 0..ys {
                    if code.decode(round, y, k) == Decision::Message(m) {
                        correct += &f[x] * word_prob(t, x, y, p.n);
                    }
                }
            }
        }
    }
    BigRational::one() - correct / BigRational::from_integer(BigInt::from(p.messages * p.keys))
}

/// `Pr(zⁱ, m, k)` written out term by term.
fn history_prob(code: &dyn AaCode, q: &RationalKernel, round: usize, blocks: &[usize], m: usize, k: usize) -> BigRational {
    let p = code.params();
    let xs = pow(p.x_alphabet, p.n);
    let mut prob = BigRational::new(BigInt::one(), BigInt::from(p.keys * pow(p.messages, round + 1)));
    for (l, &z) in blocks.iter().enumerate() {
        let mut factor = BigRational::zero();
        let msgs: Vec<usize> = if l == round { vec![m] } else { (0..p.messages).collect() };
        for &mm in &msgs {
            let f = full_encoder(code, l, mm, k);
            for x in 0..xs {
                if !f[x].is_zero() {
                    factor += &f[x] * word_prob(q, x, z, p.n);
                }
            }
        }
        prob *= factor;
    }
    prob
}

fn history_table(code: &dyn AaCode, q: &RationalKernel, round: usize) -> (Vec<Vec<BigRational>>, usize) {
    let p = code.params();
    let zs = pow(q.out_size(), p.n);
    let hist = pow(zs, round + 1);
    let table = (0..hist)
        .map(|h| {
            let blocks = base_digits(h, round + 1, zs);
            (0..p.messages * p.keys)
                .map(|i| history_prob(code, q, round, &blocks, i / p.keys, i % p.keys))
                .collect()
        })
        .collect();
    (table, hist)
}

fn success(code: &dyn AaCode, round: usize, probs: &[BigRational], y: usize) -> BigRational {
    let p = code.params();
    let mut acc = BigRational::zero();
    for m in 0..p.messages {
        for k in 0..p.keys {
            if matches!(code.decode(round, y, k), Decision::Message(d) if d != m) {
                acc += &probs[m * p.keys + k];
            }
        }
    }
    acc
}

/// `max_ψ 𝔼[ω]`, maximizing the attack separately after each history.
pub fn brute_omega(code: &dyn AaCode, q: &RationalKernel, round: usize) -> BigRational {
    let ys = pow(code.params().y_alphabet, code.params().n);
    let (table, _) = history_table(code, q, round);
    table
        .iter()
        .map(|probs| (0..ys).map(|y| success(code, round, probs, y)).max().unwrap())
        .sum()
}

/// `max_ψ 𝔼[ω]` by trying every deterministic map from histories to `y`.
pub fn all_maps_omega(code: &dyn AaCode, q: &RationalKernel, round: usize) -> BigRational {
    let ys = pow(code.params().y_alphabet, code.params().n);
    let (table, hist) = history_table(code, q, round);
    let gains: Vec<Vec<BigRational>> =
        table.iter().map(|probs| (0..ys).map(|y| success(code, round, probs, y)).collect()).collect();
    let mut best = BigRational::zero();
    for map in 0..pow(ys, hist) {
        let choice = base_digits(map, hist, ys);
        let v: BigRational = choice.iter().enumerate().map(|(h, &y)| gains[h][y].clone()).sum();
        if v > best {
            best = v;
        }
    }
    best
}

pub fn random_kernel(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> RationalKernel {
    let den = 20;
    RationalKernel::new(
        (0..rows)
            .map(|_| {
                let mut cuts: Vec<i64> = (0..cols - 1).map(|_| rng.gen_range(0..=den)).collect();
                cuts.push(0);
                cuts.push(den);
                cuts.sort();
                cuts.windows(2).map(|w| rat(w[1] - w[0], den)).collect()
            })
            .collect(),
    )
    .unwrap()
}

/// Random stochastic encoders and random decoders with some intrusion outputs.
pub fn random_table_code(rng: &mut ChaCha8Rng, params: CodeParams, tables: usize) -> TableCode {
    let xs = pow(params.x_alphabet, params.n);
    let ys = pow(params.y_alphabet, params.n);
    let encoders = (0..tables)
        .map(|_| {
            (0..params.messages * params.keys)
                .map(|_| {
                    let a = rng.gen_range(0..xs);
                    let b = rng.gen_range(0..xs);
                    if a == b {
                        vec![(a, BigRational::one())]
                    } else {
                        let w = rat(rng.gen_range(1..4), 4);
                        vec![(a, w.clone()), (b, BigRational::one() - w)]
                    }
                })
                .collect()
        })
        .collect();
    let decoders = (0..tables)
        .map(|_| {
            (0..params.keys * ys)
                .map(|_| {
                    let v = rng.gen_range(0..=params.messages);
                    if v == params.messages { Decision::Intrusion } else { Decision::Message(v) }
                })
                .collect()
        })
        .collect();
    TableCode::new(params, encoders, decoders).unwrap()
}

#[allow(clippy::too_many_arguments)]
pub fn typeclass_spec(
    n: usize,
    rounds: usize,
    hat: usize,
    tilde: usize,
    keys: usize,
    tau: Vec<u64>,
    sigma: Vec<Vec<u64>>,
    rho: Vec<Vec<u64>>,
    t: RationalKernel,
) -> TypeClassSpec {
    TypeClassSpec {
        n,
        rounds,
        message_hat: hat,
        message_tilde: tilde,
        keys,
        tau: NType::new(tau).unwrap(),
        sigma: CondNType::new(sigma).unwrap(),
        rho: CondNType::new(rho).unwrap(),
        t,
    }
}

pub struct Instance {
    pub name: &'static str,
    pub code: Box<dyn AaCode>,
    pub t: RationalKernel,
    pub q: RationalKernel,
}

/// Ten fixed codes with `n ≤ 3`, `|K| ≤ 4` and `j ≤ 2`, each paired with its channels.
pub fn corpus() -> Vec<Instance> {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let mut out = Vec::new();

    // Two keys with disjoint codeword pairs; the reference for the all-maps check.
    out.push(Instance {
        name: "keyed-n2-k2",
        code: Box::new(SimmonsCode::from_codewords(2, 2, vec![vec![0, 3], vec![1, 2]]).unwrap()),
        t: bsc(1, 10),
        q: bsc(1, 4),
    });

    let t = bsc(1, 8);
    let spec = typeclass_spec(
        3,
        2,
        2,
        1,
        2,
        vec![2, 1],
        vec![vec![1, 1, 0], vec![0, 0, 1]],
        vec![vec![1, 0], vec![0, 1], vec![1, 0]],
        t.clone(),
    );
    out.push(Instance { name: "typeclass-n3-j2", code: Box::new(TypeClassCode::build(spec, 7).unwrap()), t, q: bsc(1, 5) });

    let t = bsc(1, 6);
    let spec = typeclass_spec(
        3,
        1,
        2,
        1,
        2,
        vec![2, 1],
        vec![vec![1, 1, 0], vec![0, 0, 1]],
        vec![vec![1, 0], vec![0, 1], vec![1, 0]],
        t.clone(),
    );
    out.push(Instance { name: "typeclass-n3-w2", code: Box::new(TypeClassCode::build(spec, 7).unwrap()), t, q: bsc(1, 3) });

    let t = bsc(1, 10);
    let spec = typeclass_spec(3, 1, 1, 1, 4, vec![3], vec![vec![1, 2]], vec![vec![1, 0], vec![1, 1]], t.clone());
    out.push(Instance { name: "typeclass-n3-k4", code: Box::new(TypeClassCode::build(spec, 8).unwrap()), t, q: bsc(1, 4) });

    out.push(Instance {
        name: "simmons-n2-k4",
        code: Box::new(SimmonsCode::build(2, 2, 4, 9).unwrap()),
        t: bsc(1, 10),
        q: RationalKernel::identity(2).unwrap(),
    });
    out.push(Instance {
        name: "simmons-n3-k4",
        code: Box::new(SimmonsCode::build(3, 2, 4, 10).unwrap()),
        t: RationalKernel::identity(2).unwrap(),
        q: bsc(1, 4),
    });

    let t = bsc(1, 10);
    let spec = typeclass_spec(2, 1, 1, 2, 1, vec![2], vec![vec![1, 1]], vec![vec![1, 0], vec![0, 1]], t.clone());
    let base = TypeClassCode::build(spec, 11).unwrap();
    out.push(Instance { name: "remap-typeclass-n2", code: Box::new(RemappedCode::build(base, 1, 12).unwrap()), t, q: bsc(1, 5) });

    let base = SimmonsCode::build(2, 2, 1, 13).unwrap();
    out.push(Instance {
        name: "remap-simmons-n2",
        code: Box::new(RemappedCode::build(base, 2, 14).unwrap()),
        t: bsc(1, 5),
        q: bsc(1, 3),
    });

    let params = CodeParams::new(2, 2, 2, 3, 2, 2).unwrap();
    let t = random_kernel(&mut rng, 2, 2);
    let q = random_kernel(&mut rng, 2, 2);
    out.push(Instance { name: "table-n2-j2", code: Box::new(random_table_code(&mut rng, params, 2)), t, q });

    let params = CodeParams::new(3, 1, 3, 4, 2, 2).unwrap();
    let t = random_kernel(&mut rng, 2, 2);
    let q = random_kernel(&mut rng, 2, 2);
    out.push(Instance { name: "table-n3-k4", code: Box::new(random_table_code(&mut rng, params, 1)), t, q });

    out
}
