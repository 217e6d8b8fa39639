//! Method of types: empirical distributions, type classes and exact counts.
//!
//! Counts and class sizes are exact big integers; logarithms are taken only
//! at the very end.

use num_bigint::{BigInt, BigUint};
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::probcore::{CondDist, Dist, ProbError};

/// Default cap on the number of joint types a single `fn_project` call visits.
pub const ENUMERATION_BUDGET: usize = 10_000_000;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TypeError {
    #[error("symbol {symbol} outside alphabet of size {alphabet}")]
    Symbol { symbol: usize, alphabet: usize },
    #[error("sequence lengths differ: {0} vs {1}")]
    Length(usize, usize),
    #[error("type mismatch: {0}")]
    Mismatch(String),
    #[error("enumeration would exceed the budget of {0} items")]
    Budget(usize),
    #[error("conditioning kernel is not determining")]
    NotDetermining,
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error(transparent)]
    Prob(#[from] ProbError),
}

pub type Result<T> = std::result::Result<T, TypeError>;

/// A length-n sequence over `0..alphabet`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Sequence {
    symbols: Vec<usize>,
    alphabet: usize,
}

impl Sequence {
    pub fn new(symbols: Vec<usize>, alphabet: usize) -> Result<Self> {
        if let Some(&symbol) = symbols.iter().find(|&&s| s >= alphabet) {
            return Err(TypeError::Symbol { symbol, alphabet });
        }
        Ok(Sequence { symbols, alphabet })
    }

    /// The `index`-th sequence in lexicographic order (first symbol most significant).
    pub fn from_index(mut index: usize, n: usize, alphabet: usize) -> Self {
        let mut symbols = vec![0; n];
        for s in symbols.iter_mut().rev() {
            *s = index % alphabet;
            index /= alphabet;
        }
        Sequence { symbols, alphabet }
    }

    pub fn index(&self) -> usize {
        self.symbols.iter().fold(0, |acc, &s| acc * self.alphabet + s)
    }

    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }

    pub fn alphabet(&self) -> usize {
        self.alphabet
    }

    pub fn symbols(&self) -> &[usize] {
        &self.symbols
    }

    pub fn get(&self, i: usize) -> usize {
        self.symbols[i]
    }
}

/// Empirical distribution with denominator `n`, stored as counts.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct NType {
    counts: Vec<u64>,
}

impl NType {
    pub fn new(counts: Vec<u64>) -> Result<Self> {
        if counts.is_empty() {
            return Err(TypeError::Prob(ProbError::EmptyAlphabet));
        }
        Ok(NType { counts })
    }

    pub fn n(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn alphabet(&self) -> usize {
        self.counts.len()
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn dist(&self) -> Result<Dist> {
        let n = self.n() as f64;
        Ok(Dist::new(self.counts.iter().map(|&c| c as f64 / n).collect())?)
    }

    pub fn prob(&self, symbol: usize) -> BigRational {
        ratio(self.counts[symbol], self.n())
    }
}

/// Joint counts of `(cond, out)` pairs; the conditional type is `count / cond count`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct CondNType {
    cond_size: usize,
    out_size: usize,
    counts: Vec<u64>,
}

impl CondNType {
    /// From a table `counts[cond][out]`.
    pub fn new(table: Vec<Vec<u64>>) -> Result<Self> {
        let cond_size = table.len();
        let out_size = table.first().map_or(0, Vec::len);
        if cond_size == 0 || out_size == 0 {
            return Err(TypeError::Prob(ProbError::EmptyAlphabet));
        }
        if table.iter().any(|r| r.len() != out_size) {
            return Err(TypeError::Prob(ProbError::Ragged));
        }
        Ok(CondNType { cond_size, out_size, counts: table.into_iter().flatten().collect() })
    }

    pub fn cond_size(&self) -> usize {
        self.cond_size
    }

    pub fn out_size(&self) -> usize {
        self.out_size
    }

    pub fn n(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn get(&self, cond: usize, out: usize) -> u64 {
        self.counts[cond * self.out_size + out]
    }

    pub fn row(&self, cond: usize) -> &[u64] {
        &self.counts[cond * self.out_size..(cond + 1) * self.out_size]
    }

    pub fn cond_marginal(&self) -> NType {
        NType { counts: (0..self.cond_size).map(|c| self.row(c).iter().sum()).collect() }
    }

    pub fn out_marginal(&self) -> NType {
        NType { counts: (0..self.out_size).map(|o| (0..self.cond_size).map(|c| self.get(c, o)).sum()).collect() }
    }

    /// `count(cond,out) / count(cond)`, or `None` for an unseen conditioning symbol.
    pub fn cond_prob(&self, cond: usize, out: usize) -> Option<BigRational> {
        let total: u64 = self.row(cond).iter().sum();
        (total > 0).then(|| ratio(self.get(cond, out), total))
    }

    /// The conditional law as a kernel; unseen conditioning symbols get `fallback`.
    pub fn to_cond_dist(&self, fallback: &Dist) -> Result<CondDist> {
        let rows = (0..self.cond_size)
            .map(|c| {
                let total: u64 = self.row(c).iter().sum();
                if total == 0 {
                    fallback.mass().to_vec()
                } else {
                    self.row(c).iter().map(|&k| k as f64 / total as f64).collect()
                }
            })
            .collect();
        Ok(CondDist::new(rows)?)
    }

    /// The `≫` property on the observed support: each output symbol occurs
    /// under at most one conditioning symbol.
    pub fn is_determining(&self) -> bool {
        (0..self.out_size).all(|o| (0..self.cond_size).filter(|&c| self.get(c, o) > 0).count() <= 1)
    }

    fn owner(&self, out: usize) -> Option<usize> {
        (0..self.cond_size).find(|&c| self.get(c, out) > 0)
    }
}

fn ratio(a: u64, b: u64) -> BigRational {
    BigRational::new(BigInt::from(a), BigInt::from(b))
}

pub fn empirical(x: &Sequence) -> NType {
    let mut counts = vec![0; x.alphabet];
    x.symbols.iter().for_each(|&s| counts[s] += 1);
    NType { counts }
}

/// Joint counts of `(x_i, y_i)`, i.e. the conditional type of `y` given `x`.
pub fn empirical_cond(y: &Sequence, x: &Sequence) -> Result<CondNType> {
    if y.len() != x.len() {
        return Err(TypeError::Length(y.len(), x.len()));
    }
    let mut counts = vec![0; x.alphabet * y.alphabet];
    for (&a, &b) in x.symbols.iter().zip(&y.symbols) {
        counts[a * y.alphabet + b] += 1;
    }
    Ok(CondNType { cond_size: x.alphabet, out_size: y.alphabet, counts })
}

/// All compositions of `n` into `k` parts, lexicographic, or a budget error.
fn compositions(n: u64, k: usize, cap: usize) -> Result<Vec<Vec<u64>>> {
    let count = binomial(n + k as u64 - 1, k as u64 - 1);
    if count > BigUint::from(cap) {
        return Err(TypeError::Budget(cap));
    }
    fn rec(rem: u64, k: usize, cur: &mut Vec<u64>, out: &mut Vec<Vec<u64>>) {
        if k == 1 {
            cur.push(rem);
            out.push(cur.clone());
            cur.pop();
            return;
        }
        for v in (0..=rem).rev() {
            cur.push(v);
            rec(rem - v, k - 1, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(n, k, &mut Vec::new(), &mut out);
    out.reverse();
    Ok(out)
}

/// Every n-type over an alphabet of size `k`, in lexicographic count order.
pub fn enumerate_ntypes(n: u64, k: usize, cap: usize) -> Result<Vec<NType>> {
    if k == 0 {
        return Err(TypeError::Prob(ProbError::EmptyAlphabet));
    }
    Ok(compositions(n, k, cap)?.into_iter().map(|counts| NType { counts }).collect())
}

/// Every conditional type over `out_size` symbols whose conditioning marginal is `cond`.
pub fn enumerate_cond_ntypes(cond: &NType, out_size: usize, cap: usize) -> Result<Vec<CondNType>> {
    let per_row: Vec<Vec<Vec<u64>>> =
        cond.counts.iter().map(|&c| compositions(c, out_size, cap)).collect::<Result<_>>()?;
    let total = per_row.iter().try_fold(1usize, |acc, r| acc.checked_mul(r.len()).filter(|&t| t <= cap));
    total.ok_or(TypeError::Budget(cap))?;
    let mut out = vec![Vec::new()];
    for rows in &per_row {
        out = out
            .into_iter()
            .flat_map(|prefix: Vec<u64>| {
                rows.iter().map(move |r| {
                    let mut p = prefix.clone();
                    p.extend_from_slice(r);
                    p
                })
            })
            .collect();
    }
    Ok(out.into_iter().map(|counts| CondNType { cond_size: cond.alphabet(), out_size, counts }).collect())
}

pub fn factorial(n: u64) -> BigUint {
    (2..=n).fold(BigUint::one(), |acc, k| acc * k)
}

pub fn binomial(n: u64, k: u64) -> BigUint {
    if k > n {
        return BigUint::zero();
    }
    let k = k.min(n - k);
    (0..k).fold(BigUint::one(), |acc, i| acc * (n - i) / (i + 1))
}

/// `(Σ parts)! / Π parts!`.
pub fn multinomial(parts: &[u64]) -> BigUint {
    let mut total = 0;
    let mut acc = BigUint::one();
    for &p in parts {
        total += p;
        acc *= binomial(total, p);
    }
    acc
}

/// `|T_p|` for an unconditioned type.
pub fn ntype_class_size(p: &NType) -> BigUint {
    multinomial(&p.counts)
}

/// `|T_μ(x)|`: the number of `y` with conditional type `μ` given `x`.
pub fn type_class_size(mu: &CondNType, x: &Sequence) -> Result<BigUint> {
    if mu.cond_marginal() != empirical(x) {
        return Err(TypeError::Mismatch("conditioning type of the sequence differs from the type's".into()));
    }
    Ok((0..mu.cond_size).map(|c| multinomial(mu.row(c))).product())
}

/// `log₂` of a positive big integer, accurate to double precision.
pub fn log2_big(v: &BigUint) -> f64 {
    let bits = v.bits();
    if bits <= 1000 {
        return v.to_f64().unwrap_or(f64::INFINITY).log2();
    }
    let shift = bits - 64;
    (v >> shift).to_f64().unwrap_or(0.0).log2() + shift as f64
}

pub fn log2_ratio(r: &BigRational) -> f64 {
    let num = r.numer().magnitude();
    let den = r.denom().magnitude();
    if num.is_zero() {
        return f64::NEG_INFINITY;
    }
    log2_big(num) - log2_big(den)
}

/// `-(1/n) log₂ t(y|x)` over the product channel, `+∞` on a zero transition.
pub fn seq_prob_log(t: &CondDist, y: &Sequence, x: &Sequence) -> Result<f64> {
    if y.len() != x.len() {
        return Err(TypeError::Length(y.len(), x.len()));
    }
    if t.in_size() != x.alphabet || t.out_size() != y.alphabet {
        return Err(TypeError::Mismatch("channel shape differs from the alphabets".into()));
    }
    let mut acc = 0.0;
    for (&a, &b) in x.symbols.iter().zip(&y.symbols) {
        let p = t.get(a, b);
        if p == 0.0 {
            return Ok(f64::INFINITY);
        }
        acc -= p.log2();
    }
    Ok(acc / x.len() as f64)
}

/// `-(1/n) log₂ t(T_μ(x)|x)`, computed as class size times per-sequence probability.
pub fn typeclass_prob_log(t: &CondDist, mu: &CondNType, x: &Sequence) -> Result<f64> {
    let size = type_class_size(mu, x)?;
    let mut per_seq = 0.0;
    for c in 0..mu.cond_size {
        for o in 0..mu.out_size {
            let k = mu.get(c, o);
            if k == 0 {
                continue;
            }
            let p = t.get(c, o);
            if p == 0.0 {
                return Ok(f64::INFINITY);
            }
            per_seq += k as f64 * p.log2();
        }
    }
    Ok(-(log2_big(&size) + per_seq) / x.len() as f64)
}

/// All members of the unconditioned class `T_p`, lexicographic.
pub fn ntype_class_members(p: &NType, cap: usize) -> Result<Vec<Sequence>> {
    if ntype_class_size(p) > BigUint::from(cap) {
        return Err(TypeError::Budget(cap));
    }
    let n = p.n() as usize;
    let mut out = Vec::new();
    let mut counts = p.counts.clone();
    let mut cur = Vec::with_capacity(n);
    fn rec(counts: &mut [u64], cur: &mut Vec<usize>, n: usize, alphabet: usize, out: &mut Vec<Sequence>) {
        if cur.len() == n {
            out.push(Sequence { symbols: cur.clone(), alphabet });
            return;
        }
        for s in 0..alphabet {
            if counts[s] > 0 {
                counts[s] -= 1;
                cur.push(s);
                rec(counts, cur, n, alphabet, out);
                cur.pop();
                counts[s] += 1;
            }
        }
    }
    rec(&mut counts, &mut cur, n, p.alphabet(), &mut out);
    Ok(out)
}

/// All members of `T_μ(x)`, lexicographic.
pub fn cond_class_members(mu: &CondNType, x: &Sequence, cap: usize) -> Result<Vec<Sequence>> {
    if type_class_size(mu, x)? > BigUint::from(cap) {
        return Err(TypeError::Budget(cap));
    }
    let n = x.len();
    let mut remaining = mu.counts.clone();
    let mut cur = Vec::with_capacity(n);
    let mut out = Vec::new();
    fn rec(x: &Sequence, mu: &CondNType, rem: &mut [u64], cur: &mut Vec<usize>, out: &mut Vec<Sequence>) {
        let i = cur.len();
        if i == x.len() {
            out.push(Sequence { symbols: cur.clone(), alphabet: mu.out_size });
            return;
        }
        let c = x.get(i);
        for o in 0..mu.out_size {
            let slot = c * mu.out_size + o;
            if rem[slot] > 0 {
                rem[slot] -= 1;
                cur.push(o);
                rec(x, mu, rem, cur, out);
                cur.pop();
                rem[slot] += 1;
            }
        }
    }
    rec(x, mu, &mut remaining, &mut cur, &mut out);
    Ok(out)
}

/// `(νσ)(z|w) = Σ_u ν(z|u)σ(u|w)` as exact rationals, for every `w` that
/// has been observed by `sigma`.
fn composed_cond(nu: &CondNType, sigma: &CondNType) -> Vec<Option<Vec<BigRational>>> {
    (0..sigma.cond_size)
        .map(|w| {
            if sigma.row(w).iter().all(|&k| k == 0) {
                return None;
            }
            let mut row = vec![BigRational::zero(); nu.out_size];
            for u in 0..sigma.out_size {
                let Some(su) = sigma.cond_prob(w, u) else { continue };
                if su.is_zero() {
                    continue;
                }
                for (z, cell) in row.iter_mut().enumerate() {
                    if let Some(nz) = nu.cond_prob(u, z) {
                        *cell += &su * nz;
                    }
                }
            }
            Some(row)
        })
        .collect()
}

/// Whether `z ∈ T_{νσ}(w)`. With `z ∈ T_ν(u)`, `u ∈ T_σ(w)` and `σ`
/// determining the answer is always yes; without the determining property it
/// can fail, which is why the check is done from scratch.
pub fn chain_membership(nu: &CondNType, sigma: &CondNType, z: &Sequence, u: &Sequence, w: &Sequence) -> Result<bool> {
    if z.len() != u.len() || u.len() != w.len() {
        return Err(TypeError::Length(z.len(), w.len()));
    }
    let composed = composed_cond(nu, sigma);
    let observed = empirical_cond(z, w)?;
    for (wi, row) in composed.iter().enumerate().take(observed.cond_size) {
        let seen: u64 = observed.row(wi).iter().sum();
        if seen == 0 {
            continue;
        }
        let Some(row) = row else { return Ok(false) };
        for (zi, p) in row.iter().enumerate() {
            if observed.cond_prob(wi, zi).as_ref() != Some(p) {
                return Ok(false);
            }
        }
    }
    Ok(true)
}

/// Shared validation for the chained-class helpers: returns the joint
/// counts `N(w, y)` of the observed sequences.
fn check_chained(mu: &CondNType, sigma: &CondNType, tau: &NType, w: &Sequence, y: &Sequence) -> Result<CondNType> {
    if !sigma.is_determining() {
        return Err(TypeError::NotDetermining);
    }
    if empirical(w) != *tau {
        return Err(TypeError::Precondition("w is not of type τ".into()));
    }
    if sigma.cond_marginal() != *tau {
        return Err(TypeError::Precondition("σ is not a conditional type on τ".into()));
    }
    if mu.cond_size != sigma.out_size {
        return Err(TypeError::Mismatch("μ conditions on a different alphabet than σ produces".into()));
    }
    let wy = empirical_cond(y, w)?;
    // y ∈ T_{μσ}(w): the lifted counts [w = owner(u)]·N_μ(u,y) must add up to N(w,y).
    for wi in 0..sigma.cond_size {
        for yi in 0..mu.out_size {
            let lifted: u64 = (0..mu.cond_size).filter(|&u| sigma.owner(u) == Some(wi)).map(|u| mu.get(u, yi)).sum();
            if lifted != wy.get(wi, yi) && mu.cond_marginal() == sigma.out_marginal() {
                return Err(TypeError::Precondition("y is not in the composed class of w".into()));
            }
        }
    }
    Ok(wy)
}

/// `Pr(y ∈ T_μ(U))` for `U` uniform on `T_σ(w)`, exactly. Requires σ
/// determining, `w ∈ T_τ` and `y ∈ T_{μσ}(w)`.
///
/// Because `u` determines `w`, the joint type of `(w,u,y)` is forced to
/// `[w = owner(u)]·N_μ(u,y)`, so the favourable `u` form a single conditional
/// class given `(y,w)`.
pub fn membership_prob(mu: &CondNType, sigma: &CondNType, tau: &NType, w: &Sequence, y: &Sequence) -> Result<BigRational> {
    check_chained(mu, sigma, tau, w, y)?;
    if mu.cond_marginal() != sigma.out_marginal() {
        return Ok(BigRational::zero());
    }
    let favourable = lifted_class_size(mu, sigma);
    let total: BigUint = (0..sigma.cond_size).map(|wi| multinomial(sigma.row(wi))).product();
    Ok(BigRational::new(BigInt::from(favourable), BigInt::from(total)))
}

fn lifted_table(mu: &CondNType, sigma: &CondNType) -> CondNType {
    // Conditioning symbol is the pair (w, y), flattened as w·|Y| + y.
    let (nw, ny, nu) = (sigma.cond_size, mu.out_size, mu.cond_size);
    let mut counts = vec![0; nw * ny * nu];
    for u in 0..nu {
        if let Some(wi) = sigma.owner(u) {
            for yi in 0..ny {
                counts[(wi * ny + yi) * nu + u] = mu.get(u, yi);
            }
        }
    }
    CondNType { cond_size: nw * ny, out_size: nu, counts }
}

fn lifted_class_size(mu: &CondNType, sigma: &CondNType) -> BigUint {
    let lifted = lifted_table(mu, sigma);
    (0..lifted.cond_size).map(|c| multinomial(lifted.row(c))).product()
}

/// The class `T_{μ̄}(y,w)` with `μ̄ × μσ = μ × σ`: the sequences `ũ` with
/// `ũ ∈ T_σ(w)` and `y ∈ T_μ(ũ)`, built directly from the lifted type.
pub fn chained_preimage(mu: &CondNType, sigma: &CondNType, tau: &NType, w: &Sequence, y: &Sequence, cap: usize) -> Result<Vec<Sequence>> {
    check_chained(mu, sigma, tau, w, y)?;
    if mu.cond_marginal() != sigma.out_marginal() {
        return Ok(Vec::new());
    }
    let lifted = lifted_table(mu, sigma);
    let pairs: Vec<usize> = w.symbols.iter().zip(&y.symbols).map(|(&a, &b)| a * mu.out_size + b).collect();
    let pair_seq = Sequence::new(pairs, sigma.cond_size * mu.out_size)?;
    cond_class_members(&lifted, &pair_seq, cap)
}

/// Integer contingency tables with the given row and column sums, lexicographic.
fn contingency_tables(row_sums: &[u64], col_sums: &[u64], visit: &mut dyn FnMut(&[u64]), budget: &mut usize) -> Result<()> {
    let (ny, nx) = (row_sums.len(), col_sums.len());
    let mut cells = vec![0u64; ny * nx];
    let mut col_rem = col_sums.to_vec();
    fn fill(
        idx: usize,
        row_rem: u64,
        cells: &mut [u64],
        col_rem: &mut [u64],
        row_sums: &[u64],
        nx: usize,
        visit: &mut dyn FnMut(&[u64]),
        budget: &mut usize,
    ) -> std::result::Result<(), ()> {
        let ny = row_sums.len();
        let (y, x) = (idx / nx, idx % nx);
        if y == ny {
            if col_rem.iter().all(|&c| c == 0) {
                if *budget == 0 {
                    return Err(());
                }
                *budget -= 1;
                visit(cells);
            }
            return Ok(());
        }
        if x == nx - 1 {
            // The last cell of a row is forced.
            if row_rem > col_rem[x] {
                return Ok(());
            }
            cells[idx] = row_rem;
            col_rem[x] -= row_rem;
            let next_rem = row_sums.get(y + 1).copied().unwrap_or(0);
            let r = fill(idx + 1, next_rem, cells, col_rem, row_sums, nx, visit, budget);
            col_rem[x] += row_rem;
            return r;
        }
        for v in 0..=row_rem.min(col_rem[x]) {
            cells[idx] = v;
            col_rem[x] -= v;
            let r = fill(idx + 1, row_rem - v, cells, col_rem, row_sums, nx, visit, budget);
            col_rem[x] += v;
            r?;
        }
        Ok(())
    }
    if ny == 0 || nx == 0 {
        return Ok(());
    }
    fill(0, row_sums[0], &mut cells, &mut col_rem, row_sums, nx, visit, budget).map_err(|_| TypeError::Budget(ENUMERATION_BUDGET))
}

/// `𝔽ₙ(μ‖t,ρ|σ)`: the both-marginal projection restricted to joint n-types.
///
/// `mu` holds counts of `(u, y)`, `rho` counts of `(u, x)` and `sigma_tau`
/// counts of `u`; all three must agree on `n` and on the `u` marginal. The
/// objective separates over `u`, so each conditioning symbol is searched on
/// its own. Returns `+∞` when no joint type fits.
pub fn fn_project(mu: &CondNType, t: &CondDist, rho: &CondNType, sigma_tau: &NType) -> Result<f64> {
    fn_project_with_budget(mu, t, rho, sigma_tau, ENUMERATION_BUDGET)
}

pub fn fn_project_with_budget(mu: &CondNType, t: &CondDist, rho: &CondNType, sigma_tau: &NType, budget: usize) -> Result<f64> {
    if mu.cond_marginal() != *sigma_tau || rho.cond_marginal() != *sigma_tau {
        return Err(TypeError::Mismatch("μ, ρ and σ must share the conditioning type".into()));
    }
    if t.in_size() != rho.out_size || t.out_size() != mu.out_size {
        return Err(TypeError::Mismatch("channel shape differs from the type alphabets".into()));
    }
    let n = sigma_tau.n() as f64;
    let nx = rho.out_size;
    let mut remaining = budget;
    let mut total = 0.0;
    for u in 0..sigma_tau.alphabet() {
        let nu_count = sigma_tau.counts[u];
        if nu_count == 0 {
            continue;
        }
        let m = nu_count as f64;
        let mut best = f64::INFINITY;
        let mut visit = |cells: &[u64]| {
            let mut d = 0.0;
            for (i, &k) in cells.iter().enumerate() {
                if k == 0 {
                    continue;
                }
                let (y, x) = (i / nx, i % nx);
                let reference = t.get(x, y) * rho.get(u, x) as f64 / m;
                if reference == 0.0 {
                    return;
                }
                let z = k as f64 / m;
                d += z * (z / reference).log2();
            }
            if d < best {
                best = d;
            }
        };
        contingency_tables(mu.row(u), rho.row(u), &mut visit, &mut remaining)?;
        if best.is_infinite() {
            return Ok(f64::INFINITY);
        }
        total += m / n * best;
    }
    Ok(total.max(0.0))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn seq(s: &[usize], k: usize) -> Sequence {
        Sequence::new(s.to_vec(), k).unwrap()
    }

    #[test]
    fn empirical_types() {
        assert_eq!(empirical(&seq(&[0, 0, 1, 1], 2)).counts(), &[2, 2]);
        assert_eq!(empirical(&seq(&[2, 2, 2], 3)).counts(), &[0, 0, 3]);
        let c = empirical_cond(&seq(&[0, 0, 1, 1], 2), &seq(&[1, 0, 1, 0], 2)).unwrap();
        let half = BigRational::new(1.into(), 2.into());
        for x in 0..2 {
            for y in 0..2 {
                assert_eq!(c.cond_prob(x, y).unwrap(), half);
            }
        }
        assert!(empirical_cond(&seq(&[0], 2), &seq(&[0, 1], 2)).is_err());
    }

    #[test]
    fn ntype_counts() {
        assert_eq!(enumerate_ntypes(4, 2, 100).unwrap().len(), 5);
        assert_eq!(enumerate_ntypes(2, 3, 100).unwrap().len(), 6);
        assert_eq!(enumerate_ntypes(1, 5, 100).unwrap().len(), 5);
        assert!(matches!(enumerate_ntypes(10, 5, 10), Err(TypeError::Budget(_))));
        let types = enumerate_ntypes(3, 3, 100).unwrap();
        assert!(types.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn class_sizes() {
        assert_eq!(ntype_class_size(&NType::new(vec![2, 2]).unwrap()), BigUint::from(6u32));
        assert_eq!(ntype_class_size(&NType::new(vec![0, 4]).unwrap()), BigUint::one());
        let x = seq(&[0, 0, 1, 1, 1], 2);
        let mu = CondNType::new(vec![vec![1, 1], vec![2, 1]]).unwrap();
        assert_eq!(type_class_size(&mu, &x).unwrap(), BigUint::from(6u32));
        assert_eq!(cond_class_members(&mu, &x, 100).unwrap().len(), 6);
        let wrong = CondNType::new(vec![vec![1, 0], vec![2, 1]]).unwrap();
        assert!(type_class_size(&wrong, &x).is_err());
    }

    #[test]
    fn sequence_probabilities() {
        let id = CondDist::identity(2).unwrap();
        let x = seq(&[0, 1, 1, 0], 2);
        assert_eq!(seq_prob_log(&id, &x, &x).unwrap(), 0.0);
        let b = CondDist::bsc(0.25).unwrap();
        let y = seq(&[1, 1, 1, 0], 2);
        let v = seq_prob_log(&b, &y, &x).unwrap();
        assert!((v - 0.811_278_124_459_132_9).abs() < 1e-12);
        assert_eq!(seq_prob_log(&id, &y, &x).unwrap(), f64::INFINITY);

        let copy = empirical_cond(&x, &x).unwrap();
        assert_eq!(typeclass_prob_log(&id, &copy, &x).unwrap(), 0.0);
        assert_eq!(typeclass_prob_log(&id, &empirical_cond(&y, &x).unwrap(), &x).unwrap(), f64::INFINITY);
    }

    #[test]
    fn non_determining_kernel_breaks_chaining() {
        let w = seq(&[0, 0, 1, 1], 2);
        let u = seq(&[1, 0, 1, 0], 2);
        let z = seq(&[0, 0, 1, 1], 2);
        let nu = empirical_cond(&z, &u).unwrap();
        let sigma = empirical_cond(&u, &w).unwrap();
        assert!(!sigma.is_determining());
        assert!(!chain_membership(&nu, &sigma, &z, &u, &w).unwrap());
    }

    #[test]
    fn identity_chain_holds() {
        let w = seq(&[0, 1, 1, 0, 1], 2);
        let id = empirical_cond(&w, &w).unwrap();
        assert!(chain_membership(&id, &id, &w, &w, &w).unwrap());
    }

    #[test]
    fn membership_with_identity_sigma() {
        let w = seq(&[0, 1, 1, 0], 2);
        let sigma = empirical_cond(&w, &w).unwrap();
        let tau = empirical(&w);
        let y = seq(&[1, 1, 0, 0], 2);
        let mu = empirical_cond(&y, &w).unwrap();
        assert_eq!(membership_prob(&mu, &sigma, &tau, &w, &y).unwrap(), BigRational::one());
        let other = CondNType::new(vec![vec![0, 2], vec![2, 0]]).unwrap();
        // y is not in the class composed from `other`, so the precondition fails.
        assert!(membership_prob(&other, &sigma, &tau, &w, &y).is_err());
    }

    #[test]
    fn membership_two_symbol_enumeration() {
        // n = 2, trivial w, u uniform over both values: T_σ(w) = {01, 10}.
        let w = seq(&[0, 0], 1);
        let sigma = CondNType::new(vec![vec![1, 1]]).unwrap();
        let tau = empirical(&w);
        let y = seq(&[0, 1], 2);
        let mu = CondNType::new(vec![vec![1, 0], vec![0, 1]]).unwrap();
        // Only u = 01 maps to y = 01 under the copy type.
        let p = membership_prob(&mu, &sigma, &tau, &w, &y).unwrap();
        assert_eq!(p, BigRational::new(1.into(), 2.into()));
        let pre = chained_preimage(&mu, &sigma, &tau, &w, &y, 100).unwrap();
        assert_eq!(pre, vec![seq(&[0, 1], 2)]);
    }

    #[test]
    fn fn_project_singleton_case() {
        // Both marginals are point masses, so the only joint type is forced.
        let t = CondDist::bsc(0.2).unwrap();
        let mu = CondNType::new(vec![vec![4, 0]]).unwrap();
        let rho = CondNType::new(vec![vec![0, 4]]).unwrap();
        let sigma = NType::new(vec![4]).unwrap();
        let v = fn_project(&mu, &t, &rho, &sigma).unwrap();
        assert!((v - (1.0 / 0.2f64).log2()).abs() < 1e-12);
        let id = CondDist::identity(2).unwrap();
        assert_eq!(fn_project(&mu, &id, &rho, &sigma).unwrap(), f64::INFINITY);
    }
}
