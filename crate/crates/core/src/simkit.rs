//! Small authentication codes evaluated exactly.
//!
//! Sequences are addressed by their lexicographic index (first symbol most
//! significant). Encoders are finite mixtures with rational weights and every
//! decoder here is deterministic, so message error and false-authentication
//! probabilities come out as exact rationals.

use std::collections::{BTreeSet, HashMap};

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use rand::seq::{index, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use serde_json::json;
use thiserror::Error;

use crate::probcore::{CondDist, ProbError};
use crate::typelab::{self, CondNType, NType, Sequence, TypeError};

/// Elementary operations allowed for one exact evaluation.
pub const OP_BUDGET: u128 = 100_000_000;
/// Largest type class that will be listed member by member.
const MEMBER_CAP: usize = 1 << 20;
/// Largest sequence space a code may live in.
const SPACE_CAP: usize = 1 << 24;
/// Monte Carlo work is split into this many independently seeded chunks.
const MC_CHUNKS: u64 = 64;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error("invalid parameters: {0}")]
    Params(String),
    #[error("empty type class: {0}")]
    EmptyClass(String),
    #[error("exact evaluation needs {needed} operations, budget is {budget}")]
    Budget { needed: u128, budget: u128 },
    #[error("invalid kernel: {0}")]
    Kernel(String),
    #[error(transparent)]
    Type(#[from] TypeError),
    #[error(transparent)]
    Prob(#[from] ProbError),
}

pub type Result<T> = std::result::Result<T, SimError>;

fn check_budget(needed: u128) -> Result<()> {
    if needed > OP_BUDGET {
        return Err(SimError::Budget { needed, budget: OP_BUDGET });
    }
    Ok(())
}

fn int(v: usize) -> BigRational {
    BigRational::from_integer(BigInt::from(v))
}

fn checked_pow(base: usize, exp: usize) -> Result<usize> {
    let mut acc: usize = 1;
    for _ in 0..exp {
        acc = acc
            .checked_mul(base)
            .filter(|&v| v <= SPACE_CAP)
            .ok_or_else(|| SimError::Params(format!("{base}^{exp} sequences is too many")))?;
    }
    Ok(acc)
}

fn digits(index: usize, n: usize, alphabet: usize) -> Vec<usize> {
    Sequence::from_index(index, n, alphabet).symbols().to_vec()
}

// ---------------------------------------------------------------------------
// Random streams

/// Purpose tags for the seeded generators; each purpose reads its own stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stream {
    Simmons,
    Codebook,
    Remap,
    MonteCarlo,
}

impl Stream {
    fn id(self) -> u64 {
        match self {
            Stream::Simmons => 1,
            Stream::Codebook => 2,
            Stream::Remap => 3,
            Stream::MonteCarlo => 4,
        }
    }
}

/// ChaCha8 seeded from `seed`, positioned on the stream for `(purpose, sub)`.
pub fn rng_stream(seed: u64, purpose: Stream, sub: u32) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream((purpose.id() << 32) | sub as u64);
    rng
}

fn pick(rng: &mut ChaCha8Rng, len: usize) -> usize {
    rng.gen_range(0..len as u64) as usize
}

// ---------------------------------------------------------------------------
// Exact kernels

/// Parses `"3/8"`, `"0.15"`, `"-2"` or `"1.5e-3"` into an exact rational.
pub fn parse_rational(text: &str) -> Result<BigRational> {
    let s = text.trim();
    let bad = || SimError::Kernel(format!("not a number: {text:?}"));
    if let Some((a, b)) = s.split_once('/') {
        let num: BigInt = a.trim().parse().map_err(|_| bad())?;
        let den: BigInt = b.trim().parse().map_err(|_| bad())?;
        if den.is_zero() {
            return Err(bad());
        }
        return Ok(BigRational::new(num, den));
    }
    let (mantissa, exp) = match s.find(['e', 'E']) {
        Some(i) => (&s[..i], s[i + 1..].parse::<i32>().map_err(|_| bad())?),
        None => (s, 0),
    };
    let (neg, body) = match mantissa.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, mantissa.strip_prefix('+').unwrap_or(mantissa)),
    };
    let (whole, frac) = body.split_once('.').unwrap_or((body, ""));
    if whole.is_empty() && frac.is_empty() {
        return Err(bad());
    }
    if !whole.chars().chain(frac.chars()).all(|c| c.is_ascii_digit()) {
        return Err(bad());
    }
    let digits_str = format!("{whole}{frac}");
    let mut num: BigInt = if digits_str.is_empty() { BigInt::zero() } else { digits_str.parse().map_err(|_| bad())? };
    if neg {
        num = -num;
    }
    let shift = exp - frac.len() as i32;
    let ten = BigInt::from(10);
    Ok(if shift >= 0 {
        BigRational::from_integer(num * num_traits::pow(ten, shift as usize))
    } else {
        BigRational::new(num, num_traits::pow(ten, (-shift) as usize))
    })
}

/// The shortest decimal that round-trips to `v`, as a rational.
pub fn decimal_rational(v: f64) -> Result<BigRational> {
    if !v.is_finite() {
        return Err(SimError::Kernel(format!("non-finite value {v}")));
    }
    parse_rational(&format!("{v}"))
}

/// A channel with rational transition probabilities.
#[derive(Debug, Clone, PartialEq)]
pub struct RationalKernel {
    in_size: usize,
    out_size: usize,
    entries: Vec<BigRational>,
}

impl RationalKernel {
    pub fn new(rows: Vec<Vec<BigRational>>) -> Result<Self> {
        let in_size = rows.len();
        let out_size = rows.first().map(Vec::len).unwrap_or(0);
        if in_size == 0 || out_size == 0 {
            return Err(SimError::Kernel("empty kernel".into()));
        }
        let mut entries = Vec::with_capacity(in_size * out_size);
        for (i, row) in rows.into_iter().enumerate() {
            if row.len() != out_size {
                return Err(SimError::Kernel(format!("row {i} has {} entries, expected {out_size}", row.len())));
            }
            if row.iter().any(|p| p.is_negative()) {
                return Err(SimError::Kernel(format!("row {i} has a negative entry")));
            }
            let sum: BigRational = row.iter().sum();
            if !sum.is_one() {
                return Err(SimError::Kernel(format!("row {i} sums to {sum}")));
            }
            entries.extend(row);
        }
        Ok(RationalKernel { in_size, out_size, entries })
    }

    /// Reads each entry as its shortest decimal, then rescales rows to sum to one exactly.
    pub fn from_cond_dist(k: &CondDist) -> Result<Self> {
        let mut rows = Vec::with_capacity(k.in_size());
        for row in k.rows() {
            let vals = row.iter().map(|&v| decimal_rational(v)).collect::<Result<Vec<_>>>()?;
            let sum: BigRational = vals.iter().sum();
            if sum.is_zero() {
                return Err(SimError::Kernel("zero row".into()));
            }
            rows.push(vals.into_iter().map(|v| v / &sum).collect());
        }
        Self::new(rows)
    }

    pub fn parse(rows: &[Vec<String>]) -> Result<Self> {
        let rows = rows
            .iter()
            .map(|r| r.iter().map(|s| parse_rational(s)).collect::<Result<Vec<_>>>())
            .collect::<Result<Vec<_>>>()?;
        Self::new(rows)
    }

    pub fn identity(size: usize) -> Result<Self> {
        Self::new(
            (0..size)
                .map(|i| (0..size).map(|j| if i == j { BigRational::one() } else { BigRational::zero() }).collect())
                .collect(),
        )
    }

    pub fn bsc(flip: &BigRational) -> Result<Self> {
        let stay = BigRational::one() - flip;
        Self::new(vec![vec![stay.clone(), flip.clone()], vec![flip.clone(), stay]])
    }

    pub fn in_size(&self) -> usize {
        self.in_size
    }

    pub fn out_size(&self) -> usize {
        self.out_size
    }

    pub fn get(&self, input: usize, output: usize) -> &BigRational {
        &self.entries[input * self.out_size + output]
    }

    pub fn to_cond_dist(&self) -> Result<CondDist> {
        let data = self.entries.iter().map(|p| p.to_f64().unwrap_or(f64::NAN)).collect();
        Ok(CondDist::from_flat(self.in_size, self.out_size, data)?)
    }

    /// Product-channel probability of `y` given `x`.
    pub fn seq_prob(&self, x: &[usize], y: &[usize]) -> BigRational {
        x.iter().zip(y).map(|(&a, &b)| self.get(a, b).clone()).product()
    }

    /// `t(y|x)` for every output sequence `y`, in lexicographic order.
    pub fn seq_row(&self, x: &[usize]) -> Vec<BigRational> {
        let mut row = vec![BigRational::one()];
        for &a in x {
            let mut next = Vec::with_capacity(row.len() * self.out_size);
            for p in &row {
                for b in 0..self.out_size {
                    next.push(p * self.get(a, b));
                }
            }
            row = next;
        }
        row
    }

    pub fn to_strings(&self) -> Vec<Vec<String>> {
        self.entries.chunks(self.out_size).map(|r| r.iter().map(|p| p.to_string()).collect()).collect()
    }
}

// ---------------------------------------------------------------------------
// Codes

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CodeParams {
    pub n: usize,
    pub rounds: usize,
    pub messages: usize,
    pub keys: usize,
    pub x_alphabet: usize,
    pub y_alphabet: usize,
}

impl CodeParams {
    pub fn new(n: usize, rounds: usize, messages: usize, keys: usize, x_alphabet: usize, y_alphabet: usize) -> Result<Self> {
        let p = CodeParams { n, rounds, messages, keys, x_alphabet, y_alphabet };
        if [n, rounds, messages, keys, x_alphabet, y_alphabet].contains(&0) {
            return Err(SimError::Params(format!("all sizes must be positive: {p:?}")));
        }
        p.x_count()?;
        p.y_count()?;
        Ok(p)
    }

    pub fn x_count(&self) -> Result<usize> {
        checked_pow(self.x_alphabet, self.n)
    }

    pub fn y_count(&self) -> Result<usize> {
        checked_pow(self.y_alphabet, self.n)
    }

    /// `log₂|M| / n`.
    pub fn rate(&self) -> f64 {
        (self.messages as f64).log2() / self.n as f64
    }

    /// `log₂|K| / (n j)`.
    pub fn key_rate(&self) -> f64 {
        (self.keys as f64).log2() / (self.n * self.rounds) as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum Decision {
    Message(usize),
    Intrusion,
}

/// A `j`-round keyed code. Rounds are zero-based; `encode` returns the
/// support of `f_i(·|m,k)` as `(x index, probability)` pairs.
pub trait AaCode: Sync {
    fn params(&self) -> &CodeParams;
    fn encode(&self, round: usize, message: usize, key: usize) -> Vec<(usize, BigRational)>;
    fn decode(&self, round: usize, y: usize, key: usize) -> Decision;
}

impl<C: AaCode + ?Sized> AaCode for &C {
    fn params(&self) -> &CodeParams {
        (**self).params()
    }

    fn encode(&self, round: usize, message: usize, key: usize) -> Vec<(usize, BigRational)> {
        (**self).encode(round, message, key)
    }

    fn decode(&self, round: usize, y: usize, key: usize) -> Decision {
        (**self).decode(round, y, key)
    }
}

/// Keyed subsets of a noiseless alphabet: key `k` owns `codewords[k]`, and
/// message `m` is sent as `codewords[k][m]`.
#[derive(Debug, Clone, PartialEq)]
pub struct SimmonsCode {
    params: CodeParams,
    seed: Option<u64>,
    codewords: Vec<Vec<usize>>,
    lookup: Vec<HashMap<usize, usize>>,
}

impl SimmonsCode {
    /// Random subsets of size `|X|ⁿ / √|K|`; `|K|` must be a perfect square
    /// whose root divides `|X|ⁿ`.
    pub fn build(n: usize, alphabet: usize, keys: usize, seed: u64) -> Result<Self> {
        let total = checked_pow(alphabet, n)?;
        let root = (keys as f64).sqrt().round() as usize;
        if keys == 0 || root * root != keys {
            return Err(SimError::Params(format!("key count {keys} is not a perfect square")));
        }
        if total % root != 0 {
            return Err(SimError::Params(format!("sqrt(|K|) = {root} does not divide {total}")));
        }
        let messages = total / root;
        let mut rng = rng_stream(seed, Stream::Simmons, 0);
        let codewords = (0..keys)
            .map(|_| {
                let mut set = index::sample(&mut rng, total, messages).into_vec();
                set.shuffle(&mut rng);
                set
            })
            .collect();
        let mut code = Self::from_codewords(n, alphabet, codewords)?;
        code.seed = Some(seed);
        Ok(code)
    }

    pub fn from_codewords(n: usize, alphabet: usize, codewords: Vec<Vec<usize>>) -> Result<Self> {
        let total = checked_pow(alphabet, n)?;
        let messages = codewords.first().map(Vec::len).unwrap_or(0);
        let params = CodeParams::new(n, 1, messages, codewords.len(), alphabet, alphabet)?;
        let mut lookup = Vec::with_capacity(codewords.len());
        for (k, set) in codewords.iter().enumerate() {
            if set.len() != messages {
                return Err(SimError::Params(format!("key {k} has {} codewords, expected {messages}", set.len())));
            }
            let map: HashMap<usize, usize> = set.iter().enumerate().map(|(m, &x)| (x, m)).collect();
            if map.len() != messages || set.iter().any(|&x| x >= total) {
                return Err(SimError::Params(format!("key {k} map is not injective into {total} sequences")));
            }
            lookup.push(map);
        }
        Ok(SimmonsCode { params, seed: None, codewords, lookup })
    }

    pub fn codewords(&self) -> &[Vec<usize>] {
        &self.codewords
    }

    fn key_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.params.x_count().unwrap_or(0)];
        for set in &self.codewords {
            for &x in set {
                counts[x] += 1;
            }
        }
        counts
    }

    /// The best substitution attack: having seen `x`, send the `x' ≠ x` that
    /// shares the most keys with it.
    pub fn substitution_success(&self) -> BigRational {
        let total = self.params.x_count().unwrap_or(0);
        let mut owners: Vec<Vec<usize>> = vec![Vec::new(); total];
        for (k, set) in self.codewords.iter().enumerate() {
            for &x in set {
                owners[x].push(k);
            }
        }
        let mut hits = 0usize;
        let mut shared = vec![0usize; total];
        for x in 0..total {
            if owners[x].is_empty() {
                continue;
            }
            shared.iter_mut().for_each(|c| *c = 0);
            for &k in &owners[x] {
                for &other in &self.codewords[k] {
                    shared[other] += 1;
                }
            }
            hits += (0..total).filter(|&o| o != x).map(|o| shared[o]).max().unwrap_or(0);
        }
        BigRational::new(BigInt::from(hits), BigInt::from(self.params.keys * self.params.messages))
    }

    /// The best blind attack, scored like substitution: a fixed `y` counts
    /// only when it decodes to a message other than the one sent.
    pub fn impersonation_success(&self) -> BigRational {
        let best = self.key_counts().into_iter().max().unwrap_or(0);
        let m = self.params.messages;
        BigRational::new(BigInt::from(best * (m - 1)), BigInt::from(self.params.keys * m))
    }

    /// Classical impersonation: probability that a fixed `y` is accepted at all.
    pub fn acceptance_probability(&self) -> BigRational {
        let best = self.key_counts().into_iter().max().unwrap_or(0);
        BigRational::new(BigInt::from(best), BigInt::from(self.params.keys))
    }

    pub fn to_json(&self) -> serde_json::Value {
        json!({ "kind": "simmons", "params": self.params, "seed": self.seed, "codewords": self.codewords })
    }
}

impl AaCode for SimmonsCode {
    fn params(&self) -> &CodeParams {
        &self.params
    }

    fn encode(&self, _round: usize, message: usize, key: usize) -> Vec<(usize, BigRational)> {
        vec![(self.codewords[key][message], BigRational::one())]
    }

    fn decode(&self, _round: usize, y: usize, key: usize) -> Decision {
        self.lookup[key].get(&y).map_or(Decision::Intrusion, |&m| Decision::Message(m))
    }
}

/// A code given by explicit tables. A single table is reused for every round.
#[derive(Debug, Clone, PartialEq)]
pub struct TableCode {
    params: CodeParams,
    // [round][m * keys + k]
    encoders: Vec<Vec<Vec<(usize, BigRational)>>>,
    // [round][k * |Y|ⁿ + y]
    decoders: Vec<Vec<Decision>>,
}

impl TableCode {
    pub fn new(params: CodeParams, encoders: Vec<Vec<Vec<(usize, BigRational)>>>, decoders: Vec<Vec<Decision>>) -> Result<Self> {
        let xs = params.x_count()?;
        let ys = params.y_count()?;
        for tables in [encoders.len(), decoders.len()] {
            if tables != 1 && tables != params.rounds {
                return Err(SimError::Params(format!("{tables} tables for {} rounds", params.rounds)));
            }
        }
        for enc in &encoders {
            if enc.len() != params.messages * params.keys {
                return Err(SimError::Params("encoder table has the wrong size".into()));
            }
            for mix in enc {
                let sum: BigRational = mix.iter().map(|(_, p)| p.clone()).sum();
                if !sum.is_one() || mix.iter().any(|(x, p)| *x >= xs || p.is_negative()) {
                    return Err(SimError::Params("encoder entry is not a distribution on Xⁿ".into()));
                }
            }
        }
        for dec in &decoders {
            if dec.len() != params.keys * ys {
                return Err(SimError::Params("decoder table has the wrong size".into()));
            }
            if dec.iter().any(|d| matches!(d, Decision::Message(m) if *m >= params.messages)) {
                return Err(SimError::Params("decoder names an unknown message".into()));
            }
        }
        Ok(TableCode { params, encoders, decoders })
    }

    /// Deterministic encoder `x = codeword(m, k)` with decoder `decide(y, k)`.
    pub fn deterministic(
        params: CodeParams,
        codeword: impl Fn(usize, usize) -> usize,
        decide: impl Fn(usize, usize) -> Decision,
    ) -> Result<Self> {
        let ys = params.y_count()?;
        let enc = (0..params.messages)
            .flat_map(|m| (0..params.keys).map(move |k| (m, k)))
            .map(|(m, k)| vec![(codeword(m, k), BigRational::one())])
            .collect();
        let dec = (0..params.keys).flat_map(|k| (0..ys).map(move |y| (k, y))).map(|(k, y)| decide(y, k)).collect();
        Self::new(params, vec![enc], vec![dec])
    }
}

impl AaCode for TableCode {
    fn params(&self) -> &CodeParams {
        &self.params
    }

    fn encode(&self, round: usize, message: usize, key: usize) -> Vec<(usize, BigRational)> {
        let enc = &self.encoders[round.min(self.encoders.len() - 1)];
        enc[message * self.params.keys + key].clone()
    }

    fn decode(&self, round: usize, y: usize, key: usize) -> Decision {
        let ys = self.params.y_count().unwrap_or(0);
        self.decoders[round.min(self.decoders.len() - 1)][key * ys + y]
    }
}

/// Inputs of the type-class construction. `rho` holds counts of `(u, x)`,
/// `sigma` counts of `(w, u)` and `tau` counts of `w`; `t` is the channel the
/// decoder is matched to. Messages are pairs `(m̂, m̃)` flattened as
/// `m̂·|M̃| + m̃`.
#[derive(Debug, Clone, PartialEq)]
pub struct TypeClassSpec {
    pub n: usize,
    pub rounds: usize,
    pub message_hat: usize,
    pub message_tilde: usize,
    pub keys: usize,
    pub rho: CondNType,
    pub sigma: CondNType,
    pub tau: NType,
    pub t: RationalKernel,
}

/// One codebook drawn from the type-class ensemble, reused in every round.
#[derive(Debug, Clone, PartialEq)]
pub struct TypeClassCode {
    spec: TypeClassSpec,
    params: CodeParams,
    seed: Option<u64>,
    w: Vec<Sequence>,
    // indexed by (m̂·|M̃| + m̃)·|K| + k
    u: Vec<Sequence>,
    u_class: Vec<usize>,
    classes: Vec<Vec<usize>>,
    winners: Vec<Option<(usize, usize)>>,
}

impl TypeClassCode {
    pub fn build(spec: TypeClassSpec, seed: u64) -> Result<Self> {
        validate_typeclass_spec(&spec)?;
        let mut rng = rng_stream(seed, Stream::Codebook, 0);
        let w_pool = typelab::ntype_class_members(&spec.tau, MEMBER_CAP)?;
        if w_pool.is_empty() {
            return Err(SimError::EmptyClass("T_tau".into()));
        }
        let w: Vec<Sequence> = (0..spec.message_hat).map(|_| w_pool[pick(&mut rng, w_pool.len())].clone()).collect();
        let mut u_pools: HashMap<Sequence, Vec<Sequence>> = HashMap::new();
        let mut u = Vec::with_capacity(spec.message_hat * spec.message_tilde * spec.keys);
        for wm in &w {
            if !u_pools.contains_key(wm) {
                u_pools.insert(wm.clone(), typelab::cond_class_members(&spec.sigma, wm, MEMBER_CAP)?);
            }
            let pool = &u_pools[wm];
            if pool.is_empty() {
                return Err(SimError::EmptyClass("T_sigma(w)".into()));
            }
            for _ in 0..spec.message_tilde * spec.keys {
                u.push(pool[pick(&mut rng, pool.len())].clone());
            }
        }
        let mut code = Self::assemble(spec, w, u)?;
        code.seed = Some(seed);
        Ok(code)
    }

    /// A code with a given codebook; every entry is checked against its class.
    pub fn from_codebook(spec: TypeClassSpec, w: Vec<Sequence>, u: Vec<Sequence>) -> Result<Self> {
        validate_typeclass_spec(&spec)?;
        if w.len() != spec.message_hat || u.len() != spec.message_hat * spec.message_tilde * spec.keys {
            return Err(SimError::Params("codebook has the wrong size".into()));
        }
        Self::assemble(spec, w, u)
    }

    fn assemble(spec: TypeClassSpec, w: Vec<Sequence>, u: Vec<Sequence>) -> Result<Self> {
        let params = CodeParams::new(
            spec.n,
            spec.rounds,
            spec.message_hat * spec.message_tilde,
            spec.keys,
            spec.rho.out_size(),
            spec.t.out_size(),
        )?;
        let per_hat = spec.message_tilde * spec.keys;
        for (i, wm) in w.iter().enumerate() {
            if typelab::empirical(wm) != spec.tau {
                return Err(SimError::Params(format!("w({i}) is not in T_tau")));
            }
            for ui in &u[i * per_hat..(i + 1) * per_hat] {
                if typelab::empirical_cond(ui, wm)? != spec.sigma {
                    return Err(SimError::Params(format!("a u under w({i}) is not in T_sigma(w)")));
                }
            }
        }
        let mut class_of: HashMap<Sequence, usize> = HashMap::new();
        let mut classes: Vec<Vec<usize>> = Vec::new();
        let mut u_class = Vec::with_capacity(u.len());
        for ui in &u {
            let id = match class_of.get(ui) {
                Some(&id) => id,
                None => {
                    let members = typelab::cond_class_members(&spec.rho, ui, MEMBER_CAP)?;
                    if members.is_empty() {
                        return Err(SimError::EmptyClass("T_rho(u)".into()));
                    }
                    classes.push(members.iter().map(Sequence::index).collect());
                    class_of.insert(ui.clone(), classes.len() - 1);
                    classes.len() - 1
                }
            };
            u_class.push(id);
        }
        let mut code = TypeClassCode { spec, params, seed: None, w, u, u_class, classes, winners: Vec::new() };
        code.winners = code.compute_winners()?;
        Ok(code)
    }

    /// For each `y`, the unique triple maximizing `Σ_{x∈T_ρ(u)} t(y|x)`, as
    /// `(message, key)`, or `None` on a tie.
    fn compute_winners(&self) -> Result<Vec<Option<(usize, usize)>>> {
        let ys = self.params.y_count()?;
        let n = self.params.n as u128;
        let work: u128 = self.classes.iter().map(|c| c.len() as u128).sum::<u128>() * ys as u128 * n;
        check_budget(work)?;
        let xa = self.params.x_alphabet;
        let scores: Vec<Vec<BigRational>> = self
            .classes
            .par_iter()
            .map(|members| {
                let mut acc = vec![BigRational::zero(); ys];
                for &x in members {
                    let row = self.spec.t.seq_row(&digits(x, self.params.n, xa));
                    for (a, p) in acc.iter_mut().zip(row) {
                        *a += p;
                    }
                }
                acc
            })
            .collect();
        let keys = self.params.keys;
        Ok((0..ys)
            .map(|y| {
                let mut best: Option<&BigRational> = None;
                let mut holder = None;
                let mut ties = 0;
                for (triple, &c) in self.u_class.iter().enumerate() {
                    let s = &scores[c][y];
                    match best {
                        Some(b) if s < b => {}
                        Some(b) if s == b => ties += 1,
                        _ => {
                            best = Some(s);
                            holder = Some(triple);
                            ties = 1;
                        }
                    }
                }
                holder.filter(|_| ties == 1).map(|t| (t / keys, t % keys))
            })
            .collect())
    }

    /// The same codebook with only the first `keys` keys.
    pub fn restrict_keys(&self, keys: usize) -> Result<Self> {
        if keys == 0 || keys > self.spec.keys {
            return Err(SimError::Params(format!("cannot restrict {} keys to {keys}", self.spec.keys)));
        }
        let old = self.spec.keys;
        let u = self.u.iter().enumerate().filter(|(i, _)| i % old < keys).map(|(_, s)| s.clone()).collect();
        let mut spec = self.spec.clone();
        spec.keys = keys;
        let mut code = Self::assemble(spec, self.w.clone(), u)?;
        code.seed = self.seed;
        Ok(code)
    }

    pub fn spec(&self) -> &TypeClassSpec {
        &self.spec
    }

    pub fn w(&self) -> &[Sequence] {
        &self.w
    }

    /// `u_f(m̂, m̃, k)`.
    pub fn u(&self, hat: usize, tilde: usize, key: usize) -> &Sequence {
        &self.u[(hat * self.spec.message_tilde + tilde) * self.spec.keys + key]
    }

    pub fn decode_sequence(&self, y: &Sequence, key: usize) -> Decision {
        self.decode(0, y.index(), key)
    }

    pub fn to_json(&self) -> serde_json::Value {
        let seqs = |v: &[Sequence]| v.iter().map(|s| s.symbols().to_vec()).collect::<Vec<_>>();
        json!({
            "kind": "typeclass",
            "params": self.params,
            "seed": self.seed,
            "message_hat": self.spec.message_hat,
            "message_tilde": self.spec.message_tilde,
            "rho": self.spec.rho,
            "sigma": self.spec.sigma,
            "tau": self.spec.tau,
            "t": self.spec.t.to_strings(),
            "w": seqs(&self.w),
            "u": seqs(&self.u),
        })
    }
}

fn validate_typeclass_spec(spec: &TypeClassSpec) -> Result<()> {
    let n = spec.n as u64;
    if spec.rho.n() != n || spec.sigma.n() != n || spec.tau.n() != n {
        return Err(SimError::Params(format!("types must all have denominator {n}")));
    }
    if spec.sigma.cond_marginal() != spec.tau {
        return Err(SimError::Params("sigma's w-marginal differs from tau".into()));
    }
    if spec.rho.cond_marginal() != spec.sigma.out_marginal() {
        return Err(SimError::Params("rho's u-marginal differs from sigma's output marginal".into()));
    }
    if !spec.sigma.is_determining() {
        return Err(TypeError::NotDetermining.into());
    }
    if spec.t.in_size() != spec.rho.out_size() {
        return Err(SimError::Params("channel input alphabet differs from rho's output alphabet".into()));
    }
    if spec.message_hat == 0 || spec.message_tilde == 0 || spec.keys == 0 || spec.rounds == 0 {
        return Err(SimError::Params("message, key and round counts must be positive".into()));
    }
    Ok(())
}

impl AaCode for TypeClassCode {
    fn params(&self) -> &CodeParams {
        &self.params
    }

    fn encode(&self, _round: usize, message: usize, key: usize) -> Vec<(usize, BigRational)> {
        let members = &self.classes[self.u_class[message * self.spec.keys + key]];
        let w = BigRational::new(BigInt::one(), BigInt::from(members.len()));
        members.iter().map(|&x| (x, w.clone())).collect()
    }

    fn decode(&self, _round: usize, y: usize, key: usize) -> Decision {
        match self.winners[y] {
            Some((m, k)) if k == key => Decision::Message(m),
            _ => Decision::Intrusion,
        }
    }
}

/// A base code sending `|M̃| ≤ |M|` messages through per-`(k₂, round)`
/// injections `g: M̃ → M`. Keys are `k₁·|K₂| + k₂`.
#[derive(Debug, Clone, PartialEq)]
pub struct RemappedCode<B> {
    base: B,
    params: CodeParams,
    extra_keys: usize,
    // [k2][round][m']
    maps: Vec<Vec<Vec<usize>>>,
    inverse: Vec<Vec<HashMap<usize, usize>>>,
}

impl<B: AaCode> RemappedCode<B> {
    /// Draws the injections uniformly, with `|K₂| = (|M|/|M̃|)^(j+1)`, which
    /// must be an integer.
    pub fn build(base: B, tilde_messages: usize, seed: u64) -> Result<Self> {
        let bp = base.params().clone();
        if tilde_messages == 0 || tilde_messages > bp.messages {
            return Err(SimError::Params(format!("need 1 <= |M~| <= {}", bp.messages)));
        }
        let e = bp.rounds as u32 + 1;
        let overflow = || SimError::Params("extra key count overflows".into());
        let num = (bp.messages as u128).checked_pow(e).ok_or_else(overflow)?;
        let den = (tilde_messages as u128).checked_pow(e).ok_or_else(overflow)?;
        if num % den != 0 {
            return Err(SimError::Params(format!("(|M|/|M~|)^{e} = {num}/{den} is not an integer")));
        }
        let extra = usize::try_from(num / den).map_err(|_| overflow())?;
        let mut rng = rng_stream(seed, Stream::Remap, 0);
        let maps = (0..extra)
            .map(|_| {
                (0..bp.rounds)
                    .map(|_| {
                        let mut g = index::sample(&mut rng, bp.messages, tilde_messages).into_vec();
                        g.shuffle(&mut rng);
                        g
                    })
                    .collect()
            })
            .collect();
        Self::from_maps(base, tilde_messages, maps)
    }

    /// Explicit injections `maps[k₂][round][m']`.
    pub fn from_maps(base: B, tilde_messages: usize, maps: Vec<Vec<Vec<usize>>>) -> Result<Self> {
        let bp = base.params().clone();
        if maps.is_empty() {
            return Err(SimError::Params("no extra keys".into()));
        }
        let mut inverse = Vec::with_capacity(maps.len());
        for per_round in &maps {
            if per_round.len() != bp.rounds {
                return Err(SimError::Params("one injection per round is required".into()));
            }
            let mut inv_rounds = Vec::with_capacity(bp.rounds);
            for g in per_round {
                let inv: HashMap<usize, usize> = g.iter().enumerate().map(|(m, &b)| (b, m)).collect();
                if g.len() != tilde_messages || inv.len() != tilde_messages || g.iter().any(|&b| b >= bp.messages) {
                    return Err(SimError::Params("map is not an injection M~ -> M".into()));
                }
                inv_rounds.push(inv);
            }
            inverse.push(inv_rounds);
        }
        let keys = bp.keys.checked_mul(maps.len()).ok_or_else(|| SimError::Params("key count overflows".into()))?;
        let params = CodeParams::new(bp.n, bp.rounds, tilde_messages, keys, bp.x_alphabet, bp.y_alphabet)?;
        Ok(RemappedCode { extra_keys: maps.len(), base, params, maps, inverse })
    }

    pub fn base(&self) -> &B {
        &self.base
    }

    pub fn extra_keys(&self) -> usize {
        self.extra_keys
    }

    pub fn maps(&self) -> &[Vec<Vec<usize>>] {
        &self.maps
    }
}

impl<B: AaCode> AaCode for RemappedCode<B> {
    fn params(&self) -> &CodeParams {
        &self.params
    }

    fn encode(&self, round: usize, message: usize, key: usize) -> Vec<(usize, BigRational)> {
        let (k1, k2) = (key / self.extra_keys, key % self.extra_keys);
        self.base.encode(round, self.maps[k2][round][message], k1)
    }

    fn decode(&self, round: usize, y: usize, key: usize) -> Decision {
        let (k1, k2) = (key / self.extra_keys, key % self.extra_keys);
        match self.base.decode(round, y, k1) {
            Decision::Message(m) => self.inverse[k2][round].get(&m).map_or(Decision::Intrusion, |&t| Decision::Message(t)),
            Decision::Intrusion => Decision::Intrusion,
        }
    }
}

// ---------------------------------------------------------------------------
// Operational quantities

fn check_channel(code: &(impl AaCode + ?Sized), k: &RationalKernel, out: Option<usize>) -> Result<()> {
    let p = code.params();
    if k.in_size() != p.x_alphabet || out.is_some_and(|o| o != k.out_size()) {
        return Err(SimError::Params(format!(
            "channel is {}x{}, code alphabets are {}x{}",
            k.in_size(),
            k.out_size(),
            p.x_alphabet,
            p.y_alphabet
        )));
    }
    Ok(())
}

fn check_round(code: &(impl AaCode + ?Sized), round: usize) -> Result<()> {
    if round >= code.params().rounds {
        return Err(SimError::Params(format!("round {round} out of range 0..{}", code.params().rounds)));
    }
    Ok(())
}

fn encoder_table(code: &(impl AaCode + ?Sized), round: usize) -> Vec<Vec<(usize, BigRational)>> {
    let p = code.params();
    (0..p.messages * p.keys).map(|i| code.encode(round, i / p.keys, i % p.keys)).collect()
}

/// `t(·|x)` rows for every `x` in some encoder support.
fn support_rows(
    code: &(impl AaCode + ?Sized),
    k: &RationalKernel,
    tables: &[&Vec<Vec<(usize, BigRational)>>],
) -> HashMap<usize, Vec<BigRational>> {
    let support: BTreeSet<usize> = tables.iter().flat_map(|t| t.iter()).flat_map(|mix| mix.iter().map(|(x, _)| *x)).collect();
    let p = code.params();
    support
        .into_par_iter()
        .map(|x| (x, k.seq_row(&digits(x, p.n, p.x_alphabet))))
        .collect::<Vec<_>>()
        .into_iter()
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EpsilonExact {
    #[serde(serialize_with = "ser_rationals")]
    pub per_round: Vec<BigRational>,
    #[serde(serialize_with = "ser_rational")]
    pub value: BigRational,
}

/// Message error of one round, averaged over messages, keys, encoder and channel.
pub fn epsilon_round(code: &(impl AaCode + ?Sized), t: &RationalKernel, round: usize) -> Result<BigRational> {
    check_round(code, round)?;
    check_channel(code, t, Some(code.params().y_alphabet))?;
    let p = code.params();
    let ys = p.y_count()?;
    let enc = encoder_table(code, round);
    let support: u128 = enc.iter().map(|m| m.len() as u128).sum();
    check_budget(support * ys as u128 * p.n as u128)?;
    let rows = support_rows(code, t, &[&enc]);
    let decoders: Vec<Vec<Decision>> = (0..p.keys).map(|k| (0..ys).map(|y| code.decode(round, y, k)).collect()).collect();
    let correct: Vec<BigRational> = enc
        .par_iter()
        .enumerate()
        .map(|(i, mix)| {
            let (m, k) = (i / p.keys, i % p.keys);
            let mut acc = BigRational::zero();
            for (x, w) in mix {
                let row = &rows[x];
                let hit: BigRational = (0..ys).filter(|&y| decoders[k][y] == Decision::Message(m)).map(|y| row[y].clone()).sum();
                acc += w * hit;
            }
            acc
        })
        .collect();
    let total: BigRational = correct.into_iter().sum();
    Ok(BigRational::one() - total / int(p.messages * p.keys))
}

/// Per-round message error and its minimum over rounds.
pub fn epsilon_exact(code: &(impl AaCode + ?Sized), t: &RationalKernel) -> Result<EpsilonExact> {
    let per_round = (0..code.params().rounds).map(|i| epsilon_round(code, t, i)).collect::<Result<Vec<_>>>()?;
    let value = per_round.iter().min().cloned().unwrap_or_else(BigRational::zero);
    Ok(EpsilonExact { per_round, value })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct McEstimate {
    pub mean: f64,
    pub stderr: f64,
    pub samples: u64,
}

fn sample_index(rng: &mut ChaCha8Rng, weights: &[f64]) -> usize {
    let u: f64 = rng.gen();
    let mut acc = 0.0;
    for (i, w) in weights.iter().enumerate() {
        acc += w;
        if u < acc {
            return i;
        }
    }
    weights.iter().rposition(|&w| w > 0.0).unwrap_or(0)
}

/// Seeded Monte Carlo estimate of one round's message error. The sample is
/// split into fixed chunks with their own streams, so the result does not
/// depend on the number of worker threads.
pub fn epsilon_mc(code: &(impl AaCode + ?Sized), t: &RationalKernel, round: usize, samples: u64, seed: u64) -> Result<McEstimate> {
    check_round(code, round)?;
    check_channel(code, t, Some(code.params().y_alphabet))?;
    if samples == 0 {
        return Err(SimError::Params("at least one sample is required".into()));
    }
    let p = code.params();
    let t_rows: Vec<Vec<f64>> = (0..t.in_size())
        .map(|a| (0..t.out_size()).map(|b| t.get(a, b).to_f64().unwrap_or(0.0)).collect())
        .collect();
    let errors: Vec<u64> = (0..MC_CHUNKS)
        .into_par_iter()
        .map(|c| {
            let count = samples / MC_CHUNKS + u64::from(c < samples % MC_CHUNKS);
            let mut rng = rng_stream(seed, Stream::MonteCarlo, (round as u64 * MC_CHUNKS + c) as u32);
            let mut errors = 0u64;
            for _ in 0..count {
                let m = pick(&mut rng, p.messages);
                let k = pick(&mut rng, p.keys);
                let mix = code.encode(round, m, k);
                let weights: Vec<f64> = mix.iter().map(|(_, w)| w.to_f64().unwrap_or(0.0)).collect();
                let x = mix[sample_index(&mut rng, &weights)].0;
                let mut y = 0usize;
                for a in digits(x, p.n, p.x_alphabet) {
                    y = y * p.y_alphabet + sample_index(&mut rng, &t_rows[a]);
                }
                if code.decode(round, y, k) != Decision::Message(m) {
                    errors += 1;
                }
            }
            errors
        })
        .collect();
    let errors: u64 = errors.into_iter().sum();
    let mean = errors as f64 / samples as f64;
    let stderr = (mean * (1.0 - mean) / samples as f64).sqrt();
    Ok(McEstimate { mean, stderr, samples })
}

/// A deterministic interloper for one round: `choice[h]` is the `y` sent
/// after observing the history `h = (z₁, …, z_i)`, indexed lexicographically
/// with `z₁` most significant.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct AdversaryStrategy {
    pub round: usize,
    pub z_count: usize,
    pub choice: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OmegaExact {
    #[serde(serialize_with = "ser_rational")]
    pub value: BigRational,
    pub strategy: AdversaryStrategy,
}

fn omega_setup(code: &(impl AaCode + ?Sized), q: &RationalKernel, round: usize) -> Result<(usize, usize, usize)> {
    check_round(code, round)?;
    check_channel(code, q, None)?;
    let p = code.params();
    let zs = checked_pow(q.out_size(), p.n)?;
    let hist = checked_pow(zs, round + 1)?;
    Ok((zs, hist, p.y_count()?))
}

/// Pushes each encoder mixture of a round through `q`: `out[m·|K|+k][z]`.
fn through_q(
    enc: &[Vec<(usize, BigRational)>],
    rows: &HashMap<usize, Vec<BigRational>>,
    zs: usize,
) -> Vec<Vec<BigRational>> {
    enc.par_iter()
        .map(|mix| {
            let mut acc = vec![BigRational::zero(); zs];
            for (x, w) in mix {
                for (a, pz) in acc.iter_mut().zip(&rows[x]) {
                    *a += w * pz;
                }
            }
            acc
        })
        .collect()
}

/// The largest expected false-acceptance probability `𝔼[ω]` in `round`
/// (zero-based) over deterministic interlopers, with the maximizing map.
///
/// The objective is linear in `ψ(·|zⁱ)`, so a point mass on the best `y` for
/// each history is optimal and the maximization splits over histories.
pub fn omega_exact(code: &(impl AaCode + ?Sized), q: &RationalKernel, round: usize) -> Result<OmegaExact> {
    let (zs, hist, ys) = omega_setup(code, q, round)?;
    let p = code.params();
    let keys = p.keys;
    let tables: Vec<_> = (0..=round).map(|l| encoder_table(code, l)).collect();
    let support: u128 = tables.iter().flatten().map(|m| m.len() as u128).sum();
    check_budget(support * zs as u128 * p.n as u128 + hist as u128 * ys as u128 * keys as u128)?;
    let rows = support_rows(code, q, &tables.iter().collect::<Vec<_>>());

    // Earlier rounds enter only through A_k(z) = Σ_{m,x} q(z|x) f(x|m,k).
    let prior: Vec<Vec<Vec<BigRational>>> = tables[..round]
        .iter()
        .map(|enc| {
            let pushed = through_q(enc, &rows, zs);
            (0..keys)
                .map(|k| (0..zs).map(|z| (0..p.messages).map(|m| pushed[m * keys + k][z].clone()).sum()).collect())
                .collect()
        })
        .collect();
    // C_k(z, y) = Σ_m B_{k,m}(z)·[y decodes under k to a message other than m].
    let current = through_q(&tables[round], &rows, zs);
    let gain: Vec<Vec<Vec<BigRational>>> = (0..keys)
        .into_par_iter()
        .map(|k| {
            let decided: Vec<Decision> = (0..ys).map(|y| code.decode(round, y, k)).collect();
            (0..zs)
                .map(|z| {
                    let total: BigRational = (0..p.messages).map(|m| current[m * keys + k][z].clone()).sum();
                    decided
                        .iter()
                        .map(|d| match *d {
                            Decision::Message(d) => &total - &current[d * keys + k][z],
                            Decision::Intrusion => BigRational::zero(),
                        })
                        .collect()
                })
                .collect()
        })
        .collect();

    let best: Vec<(BigRational, usize)> = (0..hist)
        .into_par_iter()
        .map(|h| {
            let blocks = digits(h, round + 1, zs);
            let weights: Vec<BigRational> = (0..keys)
                .map(|k| prior.iter().zip(&blocks).map(|(a, &z)| a[k][z].clone()).product())
                .collect();
            let last = blocks[round];
            let mut best = (BigRational::zero(), 0usize);
            for y in 0..ys {
                let v: BigRational = (0..keys)
                    .filter(|&k| !weights[k].is_zero())
                    .map(|k| &weights[k] * &gain[k][last][y])
                    .sum();
                if v > best.0 {
                    best = (v, y);
                }
            }
            best
        })
        .collect();
    let mut value = BigRational::zero();
    let mut choice = Vec::with_capacity(hist);
    for (v, y) in best {
        value += v;
        choice.push(y);
    }
    let norm = int(keys) * num_traits::pow(int(p.messages), round + 1);
    Ok(OmegaExact { value: value / norm, strategy: AdversaryStrategy { round, z_count: zs, choice } })
}

/// `𝔼[ω]` for a fixed interloper, straight from the joint law of
/// `(zⁱ, m, k)`.
pub fn omega_with_strategy(code: &(impl AaCode + ?Sized), q: &RationalKernel, strategy: &AdversaryStrategy) -> Result<BigRational> {
    let round = strategy.round;
    let (zs, hist, ys) = omega_setup(code, q, round)?;
    if strategy.z_count != zs || strategy.choice.len() != hist || strategy.choice.iter().any(|&y| y >= ys) {
        return Err(SimError::Params("strategy does not fit this code and channel".into()));
    }
    let p = code.params();
    let needed = hist as u128 * (p.keys * p.messages) as u128 * (round as u128 + 1) * p.messages as u128;
    check_budget(needed)?;
    let tables: Vec<_> = (0..=round).map(|l| encoder_table(code, l)).collect();
    let rows = support_rows(code, q, &tables.iter().collect::<Vec<_>>());
    let prob_z = |mix: &Vec<(usize, BigRational)>, z: usize| -> BigRational { mix.iter().map(|(x, w)| w * &rows[x][z]).sum() };
    let terms: Vec<BigRational> = (0..hist)
        .into_par_iter()
        .map(|h| {
            let blocks = digits(h, round + 1, zs);
            let y = strategy.choice[h];
            let mut acc = BigRational::zero();
            for k in 0..p.keys {
                let mut past = BigRational::one();
                for (l, &z) in blocks[..round].iter().enumerate() {
                    past *= (0..p.messages).map(|m| prob_z(&tables[l][m * p.keys + k], z)).sum::<BigRational>();
                }
                if past.is_zero() {
                    continue;
                }
                for m in 0..p.messages {
                    if matches!(code.decode(round, y, k), Decision::Message(d) if d != m) {
                        acc += &past * prob_z(&tables[round][m * p.keys + k], blocks[round]);
                    }
                }
            }
            acc
        })
        .collect();
    let total: BigRational = terms.into_iter().sum();
    Ok(total / (int(p.keys) * num_traits::pow(int(p.messages), round + 1)))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AuthenticationExact {
    #[serde(serialize_with = "ser_rationals")]
    pub omega: Vec<BigRational>,
    /// `min_i −n⁻¹ log₂ ω_i`; `+∞` when some round cannot be attacked at all.
    pub alpha: f64,
}

/// Worst-case `ω` in every round and the resulting authentication exponent.
pub fn authentication_exact(code: &(impl AaCode + ?Sized), q: &RationalKernel) -> Result<AuthenticationExact> {
    let omega = (0..code.params().rounds).map(|i| omega_exact(code, q, i).map(|o| o.value)).collect::<Result<Vec<_>>>()?;
    let n = code.params().n as f64;
    let alpha = omega
        .iter()
        .map(|w| if w.is_zero() { f64::INFINITY } else { -typelab::log2_ratio(w) / n })
        .fold(f64::INFINITY, f64::min);
    Ok(AuthenticationExact { omega, alpha })
}

fn ser_rational<S: serde::Serializer>(v: &BigRational, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.serialize_str(&v.to_string())
}

fn ser_rationals<S: serde::Serializer>(v: &[BigRational], s: S) -> std::result::Result<S::Ok, S::Error> {
    s.collect_seq(v.iter().map(|r| r.to_string()))
}
