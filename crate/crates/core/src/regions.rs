//! Rate-region membership and boundary sweeps.
//!
//! Three region systems are implemented: the single-stage region built from
//! the channel secrecy budget `𝕃`, its closure under the key-for-rate
//! transform (the region used for all sweeps), and the comparison region of
//! the earlier two-key scheme with its corrected error exponent.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::infofn::{kl_vec, mutual_info, mutual_info_marginal, pos_part};
use crate::iproject::{golden_section, l_func, LFuncError, NuSearch};
use crate::probcore::{compose, ChannelPair, CondDist, DetCondDist, Dist, ProbError};

/// Slacks at or above `-DEFAULT_TOL` count as satisfied.
pub const DEFAULT_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RegionError {
    #[error(transparent)]
    Prob(#[from] ProbError),
    #[error(transparent)]
    LFunc(#[from] LFuncError),
    #[error("rates must be non-negative and finite, got {0}")]
    InvalidPoint(String),
    #[error("β = {beta} must satisfy 0 ≤ β < r = {r}")]
    BetaRange { beta: f64, r: f64 },
    #[error("round count must be at least 1")]
    Rounds,
    #[error("grid has {0} cells, above the budget")]
    Budget(usize),
    #[error("invalid parameter: {0}")]
    Parameter(String),
}

pub type Result<T> = std::result::Result<T, RegionError>;

/// `(r, α, κ)` in bits per channel use.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RatePoint {
    pub r: f64,
    pub alpha: f64,
    pub kappa: f64,
}

impl RatePoint {
    pub fn new(r: f64, alpha: f64, kappa: f64) -> Result<Self> {
        if [r, alpha, kappa].iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(RegionError::InvalidPoint(format!("({r}, {alpha}, {kappa})")));
        }
        Ok(RatePoint { r, alpha, kappa })
    }
}

/// Auxiliary laws `ρ(x|u)`, `σ(u|w)`, `τ(w)` and the round count.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AuxiliaryChoice {
    pub rho: CondDist,
    pub sigma: DetCondDist,
    pub tau: Dist,
    pub j: u32,
}

impl AuxiliaryChoice {
    pub fn new(rho: CondDist, sigma: DetCondDist, tau: Dist, j: u32) -> Result<Self> {
        if j == 0 {
            return Err(RegionError::Rounds);
        }
        if sigma.kernel().in_size() != tau.len() || sigma.kernel().out_size() != rho.in_size() {
            return Err(ProbError::Dimension("σ must map the τ alphabet onto the ρ inputs".into()).into());
        }
        Ok(AuxiliaryChoice { rho, sigma, tau, j })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Slack {
    pub name: String,
    pub slack: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionVerdict {
    pub contained: bool,
    pub constraints: Vec<Slack>,
    /// The constraint with the smallest slack.
    pub binding: String,
    /// Comparison region only: the auxiliary key split achieving the verdict.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub kappa_tilde: Option<f64>,
}

impl RegionVerdict {
    fn from_slacks(slacks: Vec<(&str, f64)>, tol: f64) -> Self {
        let mut binding = 0;
        for (i, s) in slacks.iter().enumerate() {
            if s.1 < slacks[binding].1 {
                binding = i;
            }
        }
        RegionVerdict {
            contained: slacks.iter().all(|s| s.1 >= -tol),
            binding: slacks[binding].0.to_string(),
            constraints: slacks.into_iter().map(|(n, s)| Slack { name: n.to_string(), slack: s }).collect(),
            kappa_tilde: None,
        }
    }

    pub fn slack(&self, name: &str) -> Option<f64> {
        self.constraints.iter().find(|s| s.name == name).map(|s| s.slack)
    }
}

/// Constraint identifiers shared by the two stage regions.
pub mod constraint {
    pub const SUM_RATE: &str = "r+alpha<=I(trho,sigmatau)";
    pub const L_BUDGET: &str = "alpha<=L";
    pub const COND_INFO: &str = "alpha<=I(trho,sigma|tau)";
    pub const KEY: &str = "alpha-j*kappa<=0";
    pub const L_BUDGET_CLOSED: &str = "(1+1/j)alpha-kappa<=L";
    pub const COND_INFO_CLOSED: &str = "(1+1/j)alpha-kappa<=I(trho,sigma|tau)";
    pub const G_RATE: &str = "r+kappa<=I(trho,tau)+kappa_tilde";
    pub const G_KEY: &str = "alpha-kappa<=-kappa_tilde";
    pub const G_EXPONENT: &str = "alpha<=inf_nu D+|kappa_tilde+I(trho,tau)-I(nu,tau)|+";
}

/// The three information quantities the stage regions depend on.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegionQuantities {
    /// `𝕀(tρ,στ)`.
    pub i_total: f64,
    /// `𝕃(t,q|ρ,σ,τ)`.
    pub l_value: f64,
    /// `𝕀(tρ,σ|τ)`.
    pub i_cond: f64,
}

impl RegionQuantities {
    pub fn compute(pair: &ChannelPair, aux: &AuxiliaryChoice, search: NuSearch) -> Result<Self> {
        let t_rho = compose(&pair.t, &aux.rho)?;
        let sigma_tau = aux.sigma.kernel().push(&aux.tau)?;
        let i_total = mutual_info_marginal(&t_rho, &sigma_tau)?;
        let i_cond = mutual_info(&t_rho, aux.sigma.kernel(), &aux.tau)?;
        let l_value = l_func(&pair.t, &pair.q, &aux.rho, &aux.sigma, &aux.tau, search)?.value;
        Ok(RegionQuantities { i_total, l_value, i_cond })
    }

    pub fn theorem1_verdict(&self, p: &RatePoint, j: u32, tol: f64) -> RegionVerdict {
        use constraint::*;
        RegionVerdict::from_slacks(
            vec![
                (SUM_RATE, self.i_total - p.r - p.alpha),
                (L_BUDGET, self.l_value - p.alpha),
                (COND_INFO, self.i_cond - p.alpha),
                (KEY, j as f64 * p.kappa - p.alpha),
            ],
            tol,
        )
    }

    pub fn theorem3_verdict(&self, p: &RatePoint, j: u32, tol: f64) -> RegionVerdict {
        use constraint::*;
        let lifted = (1.0 + 1.0 / j as f64) * p.alpha - p.kappa;
        RegionVerdict::from_slacks(
            vec![
                (SUM_RATE, self.i_total - p.r - p.alpha),
                (L_BUDGET_CLOSED, self.l_value - lifted),
                (COND_INFO_CLOSED, self.i_cond - lifted),
                (KEY, j as f64 * p.kappa - p.alpha),
            ],
            tol,
        )
    }

    /// Largest α with `(r, α, κ)` in the single-stage region, or `None` if empty.
    pub fn theorem1_max_alpha(&self, r: f64, kappa: f64, j: u32) -> Option<(f64, &'static str)> {
        use constraint::*;
        argmin(&[
            (self.i_total - r, SUM_RATE),
            (self.l_value, L_BUDGET),
            (self.i_cond, COND_INFO),
            (j as f64 * kappa, KEY),
        ])
    }

    /// Largest α with `(r, α, κ)` in the closed region, or `None` if empty.
    pub fn theorem3_max_alpha(&self, r: f64, kappa: f64, j: u32) -> Option<(f64, &'static str)> {
        use constraint::*;
        let scale = 1.0 + 1.0 / j as f64;
        argmin(&[
            (self.i_total - r, SUM_RATE),
            ((self.l_value + kappa) / scale, L_BUDGET_CLOSED),
            ((self.i_cond + kappa) / scale, COND_INFO_CLOSED),
            (j as f64 * kappa, KEY),
        ])
    }
}

/// First minimal bound; `None` when the minimum is negative (empty region).
fn argmin(bounds: &[(f64, &'static str)]) -> Option<(f64, &'static str)> {
    let mut best = bounds[0];
    for &b in &bounds[1..] {
        if b.0 < best.0 {
            best = b;
        }
    }
    (best.0 >= 0.0).then_some(best)
}

pub fn theorem1_contains(p: &RatePoint, pair: &ChannelPair, aux: &AuxiliaryChoice, search: NuSearch) -> Result<RegionVerdict> {
    Ok(RegionQuantities::compute(pair, aux, search)?.theorem1_verdict(p, aux.j, DEFAULT_TOL))
}

pub fn theorem3_contains(p: &RatePoint, pair: &ChannelPair, aux: &AuxiliaryChoice, search: NuSearch) -> Result<RegionVerdict> {
    Ok(RegionQuantities::compute(pair, aux, search)?.theorem3_verdict(p, aux.j, DEFAULT_TOL))
}

/// `(r - β, α + β, κ + (1 + 1/j)β)` for `0 ≤ β < r`.
pub fn theorem2_transform(p: &RatePoint, beta: f64, j: u32) -> Result<RatePoint> {
    if j == 0 {
        return Err(RegionError::Rounds);
    }
    if !(beta >= 0.0 && (beta < p.r || beta == 0.0)) {
        return Err(RegionError::BetaRange { beta, r: p.r });
    }
    Ok(RatePoint { r: p.r - beta, alpha: p.alpha + beta, kappa: p.kappa + (1.0 + 1.0 / j as f64) * beta })
}

/// Table of `(𝔻(ν‖qρ|τ), 𝕀(ν,τ))` over a ν grid, for the comparison region's
/// exponent `G(c) = inf_ν 𝔻(ν‖qρ|τ) + |c - 𝕀(ν,τ)|⁺`.
#[derive(Debug, Clone)]
pub struct GungorProfile {
    q_rho: CondDist,
    tau: Dist,
    /// `𝕀(tρ,τ)`.
    pub i_main: f64,
    table: Vec<(f64, f64, usize)>,
    steps: usize,
    row_points: Vec<Vec<f64>>,
}

/// Objective evaluations allowed in one pattern search.
pub const PATTERN_EVAL_CAP: usize = 20_000;

/// Largest ν table built by [`GungorProfile::new`].
pub const GUNGOR_GRID_BUDGET: usize = 4_000_000;

impl GungorProfile {
    pub fn new(pair: &ChannelPair, rho: &CondDist, tau: &Dist, steps: usize) -> Result<Self> {
        if steps == 0 {
            return Err(RegionError::Parameter("ν grid needs at least one step".into()));
        }
        let q_rho = compose(&pair.q, rho)?;
        let t_rho = compose(&pair.t, rho)?;
        let i_main = mutual_info_marginal(&t_rho, tau)?;
        let (u_size, z_size) = (q_rho.in_size(), q_rho.out_size());
        let row_points: Vec<Vec<f64>> = simplex_points(steps, z_size);
        let cells = row_points
            .len()
            .checked_pow(u_size as u32)
            .filter(|&c| c <= GUNGOR_GRID_BUDGET)
            .ok_or(RegionError::Budget(row_points.len().saturating_pow(u_size as u32)))?;
        let mut profile = GungorProfile { q_rho, tau: tau.clone(), i_main, table: Vec::new(), steps, row_points };
        let table: Vec<(f64, f64, usize)> = (0..cells)
            .into_par_iter()
            .map(|i| {
                let nu = profile.cell(i);
                let (d, inf) = profile.eval_rows(&nu);
                (d, inf, i)
            })
            .filter(|e| e.0.is_finite())
            .collect();
        profile.table = table;
        Ok(profile)
    }

    fn cell(&self, mut idx: usize) -> Vec<Vec<f64>> {
        let u_size = self.q_rho.in_size();
        let mut rows = vec![Vec::new(); u_size];
        for row in rows.iter_mut().rev() {
            *row = self.row_points[idx % self.row_points.len()].clone();
            idx /= self.row_points.len();
        }
        rows
    }

    /// `(𝔻(ν‖qρ|τ), 𝕀(ν,τ))`.
    fn eval_rows(&self, nu: &[Vec<f64>]) -> (f64, f64) {
        let mut d = 0.0;
        let mut out = vec![0.0; self.q_rho.out_size()];
        let mut h_cond = 0.0;
        for (u, row) in nu.iter().enumerate() {
            let w = self.tau.get(u);
            if w == 0.0 {
                continue;
            }
            let k = kl_vec(row, self.q_rho.row(u));
            if k.is_infinite() {
                return (f64::INFINITY, 0.0);
            }
            d += w * k;
            h_cond += w * crate::infofn::entropy_vec(row);
            out.iter_mut().zip(row).for_each(|(o, p)| *o += w * p);
        }
        let i = (crate::infofn::entropy_vec(&out) - h_cond).max(0.0);
        (d, i)
    }

    fn objective(d: f64, i: f64, c: f64) -> f64 {
        d + pos_part(c - i)
    }

    /// `G(c)` from the grid alone (an upper bound on the infimum).
    pub fn g_grid(&self, c: f64) -> f64 {
        self.table.iter().map(|&(d, i, _)| Self::objective(d, i, c)).fold(f64::INFINITY, f64::min)
    }

    /// `G(c)` refined by pattern search from the best grid cell.
    pub fn g(&self, c: f64) -> f64 {
        let mut best = (f64::INFINITY, 0);
        for &(d, i, idx) in &self.table {
            let v = Self::objective(d, i, c);
            if v < best.0 {
                best = (v, idx);
            }
        }
        if best.0.is_infinite() {
            return best.0;
        }
        let mut rows = self.cell(best.1);
        let mut value = best.0;
        let initial = 1.0 / self.steps as f64;
        let mut step = initial;
        let moves = pair_moves(&rows);
        let mut evals = 0;
        while step > 1e-11 && evals < PATTERN_EVAL_CAP {
            let mut improved = false;
            for mv in &moves {
                let mut trial = rows.clone();
                if !apply_move(&mut trial, mv, step) {
                    continue;
                }
                let (d, i) = self.eval_rows(&trial);
                evals += 1;
                let v = Self::objective(d, i, c);
                if v < value {
                    value = v;
                    rows = trial;
                    improved = true;
                }
            }
            step = if improved { (2.0 * step).min(initial) } else { step / 2.0 };
        }
        value
    }

    /// Largest α in `∪_{κ̃} R_G(κ̃)` at `(r, κ)` with this `(ρ, τ)`, with the
    /// achieving κ̃, or `None` when no κ̃ admits any α.
    ///
    /// The two α bounds `κ - κ̃` and `G(κ̃ + 𝕀(tρ,τ))` are respectively
    /// decreasing and non-decreasing in κ̃, so the optimum is at their crossing.
    pub fn max_alpha(&self, r: f64, kappa: f64) -> Option<(f64, f64)> {
        let lo = (r + kappa - self.i_main).max(0.0);
        if lo > kappa {
            return None;
        }
        let h = |kt: f64| kappa - kt - self.g(kt + self.i_main);
        if h(lo) <= 0.0 {
            return Some((kappa - lo, lo));
        }
        let (mut a, mut b) = (lo, kappa);
        while b - a > 1e-13 {
            let m = 0.5 * (a + b);
            if h(m) > 0.0 {
                a = m;
            } else {
                b = m;
            }
        }
        // At the crossing both bounds agree; report the smaller to stay inside.
        let kt = 0.5 * (a + b);
        Some(((kappa - kt).min(self.g(kt + self.i_main)), kt))
    }

    /// Verdict for a point, scanning κ̃ over `[0, 2]` at `resolution` and
    /// keeping the κ̃ with the largest worst-case slack.
    pub fn contains(&self, p: &RatePoint, resolution: f64, tol: f64) -> Result<RegionVerdict> {
        if !(resolution > 0.0) {
            return Err(RegionError::Parameter("κ̃ resolution must be positive".into()));
        }
        let steps = (2.0 / resolution).round().max(1.0) as usize;
        let slacks = |kt: f64, g: f64| {
            use constraint::*;
            vec![
                (G_RATE, self.i_main + kt - p.r - p.kappa),
                (G_KEY, p.kappa - kt - p.alpha),
                (G_EXPONENT, g - p.alpha),
            ]
        };
        let worst = |v: &[(&str, f64)]| v.iter().map(|s| s.1).fold(f64::INFINITY, f64::min);
        let scores: Vec<f64> = (0..=steps)
            .into_par_iter()
            .map(|i| {
                let kt = 2.0 * i as f64 / steps as f64;
                worst(&slacks(kt, self.g_grid(kt + self.i_main)))
            })
            .collect();
        let mut best = 0;
        for (i, &s) in scores.iter().enumerate() {
            if s > scores[best] {
                best = i;
            }
        }
        let kt = 2.0 * best as f64 / steps as f64;
        let mut verdict = RegionVerdict::from_slacks(slacks(kt, self.g(kt + self.i_main)), tol);
        verdict.kappa_tilde = Some(kt);
        Ok(verdict)
    }
}

fn simplex_points(steps: usize, parts: usize) -> Vec<Vec<f64>> {
    fn rec(rem: usize, parts: usize, steps: usize, cur: &mut Vec<f64>, out: &mut Vec<Vec<f64>>) {
        if parts == 1 {
            cur.push(rem as f64 / steps as f64);
            out.push(cur.clone());
            cur.pop();
            return;
        }
        for v in 0..=rem {
            cur.push(v as f64 / steps as f64);
            rec(rem - v, parts - 1, steps, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(steps, parts, steps, &mut Vec::new(), &mut out);
    out
}

type Move = Vec<(usize, usize, usize)>;

fn pair_moves(rows: &[Vec<f64>]) -> Vec<Move> {
    let singles: Vec<(usize, usize, usize)> = (0..rows.len())
        .flat_map(|u| {
            let z = rows[u].len();
            (0..z).flat_map(move |a| (0..z).filter(move |&b| b != a).map(move |b| (u, a, b)))
        })
        .collect();
    let mut moves: Vec<Move> = singles.iter().map(|&m| vec![m]).collect();
    for (i, &m1) in singles.iter().enumerate() {
        for &m2 in &singles[i + 1..] {
            if m1.0 != m2.0 {
                moves.push(vec![m1, m2]);
            }
        }
    }
    moves
}

fn apply_move(rows: &mut [Vec<f64>], mv: &Move, step: f64) -> bool {
    for &(u, a, b) in mv {
        if rows[u][b] < step {
            return false;
        }
        rows[u][a] += step;
        rows[u][b] -= step;
    }
    true
}

/// Membership in the comparison region for explicit `(ρ, τ)`.
pub fn gungor_contains(
    p: &RatePoint,
    pair: &ChannelPair,
    rho: &CondDist,
    tau: &Dist,
    nu_steps: usize,
    kappa_tilde_resolution: f64,
) -> Result<RegionVerdict> {
    GungorProfile::new(pair, rho, tau, nu_steps)?.contains(p, kappa_tilde_resolution, DEFAULT_TOL)
}

/// Both channels binary symmetric, with flip probabilities in `[0, 1/2]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BscFamily {
    pub lambda_t: f64,
    pub lambda_q: f64,
}

impl BscFamily {
    pub fn new(lambda_t: f64, lambda_q: f64) -> Result<Self> {
        for (name, v) in [("lambda_t", lambda_t), ("lambda_q", lambda_q)] {
            if !(0.0..=0.5).contains(&v) {
                return Err(RegionError::Parameter(format!("{name} = {v} outside [0, 1/2]")));
            }
        }
        Ok(BscFamily { lambda_t, lambda_q })
    }

    pub fn pair(&self) -> Result<ChannelPair> {
        Ok(ChannelPair::bsc(self.lambda_t, self.lambda_q)?)
    }

    /// `1 - h(λ_t)`.
    pub fn capacity(&self) -> f64 {
        1.0 - crate::infofn::entropy_vec(&[self.lambda_t, 1.0 - self.lambda_t])
    }
}

/// How σ is realized in the binary-symmetric family.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SigmaShape {
    /// Trivial `W`, σ uniform on binary `U`: the same laws as a half-flip σ
    /// with uniform τ, while satisfying the determining property strictly.
    Uniform,
    /// `U = W` binary with σ the identity and τ uniform.
    Identity,
}

/// Symmetric auxiliary laws: `ρ = BSC(a)` and σ per `shape`.
pub fn bsc_aux(a: f64, shape: SigmaShape, j: u32) -> Result<AuxiliaryChoice> {
    let rho = CondDist::bsc(a)?;
    let (sigma, tau) = match shape {
        SigmaShape::Uniform => (CondDist::new(vec![vec![0.5, 0.5]])?, Dist::point(1, 0)?),
        SigmaShape::Identity => (CondDist::identity(2)?, Dist::uniform(2)?),
    };
    AuxiliaryChoice::new(rho, DetCondDist::new(sigma)?, tau, j)
}

/// Resolutions for the binary-symmetric searches.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BscSearch {
    /// Cells over the ρ flip parameter in `[0, 1/2]`.
    pub rho_steps: usize,
    /// Cells over the symmetric ν parameter in `[0, 1]` inside `𝕃`.
    pub nu_steps: usize,
    /// Cells over the comparison region's input bias in `(0, 1/2]`.
    pub tau_steps: usize,
    /// Simplex denominator for the comparison region's general ν.
    pub gungor_nu_steps: usize,
}

impl Default for BscSearch {
    fn default() -> Self {
        BscSearch { rho_steps: 50, nu_steps: 200, tau_steps: 50, gungor_nu_steps: 100 }
    }
}

/// Region quantities for one symmetric auxiliary choice, keeping the better σ shape.
fn bsc_quantities(family: &BscFamily, a: f64, search: &BscSearch) -> Result<[RegionQuantities; 2]> {
    let pair = family.pair()?;
    let nu = NuSearch::Symmetric { steps: search.nu_steps };
    let uni = RegionQuantities::compute(&pair, &bsc_aux(a, SigmaShape::Uniform, 1)?, nu)?;
    let id = RegionQuantities::compute(&pair, &bsc_aux(a, SigmaShape::Identity, 1)?, nu)?;
    Ok([uni, id])
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BscOptimum {
    pub alpha: f64,
    pub binding: String,
    pub rho_flip: f64,
    pub sigma: SigmaShape,
}

/// Maximizes the closed-region α over the symmetric ρ flip for fixed `(r, κ, j)`.
/// `quantities(a)` supplies the region quantities at flip `a`.
fn maximize_over_rho(
    grid: &[(f64, [RegionQuantities; 2])],
    refine: impl Fn(f64) -> Result<[RegionQuantities; 2]>,
    r: f64,
    kappa: f64,
    j: u32,
) -> Result<Option<BscOptimum>> {
    let score = |q: &[RegionQuantities; 2]| -> Option<(f64, &'static str, SigmaShape)> {
        let a = q[0].theorem3_max_alpha(r, kappa, j).map(|(v, b)| (v, b, SigmaShape::Uniform));
        let b = q[1].theorem3_max_alpha(r, kappa, j).map(|(v, b)| (v, b, SigmaShape::Identity));
        match (a, b) {
            (Some(x), Some(y)) => Some(if y.0 > x.0 { y } else { x }),
            (x, y) => x.or(y),
        }
    };
    let mut best: Option<(usize, (f64, &'static str, SigmaShape))> = None;
    for (i, (_, q)) in grid.iter().enumerate() {
        if let Some(s) = score(q) {
            if best.map_or(true, |(_, b)| s.0 > b.0) {
                best = Some((i, s));
            }
        }
    }
    let Some((i, s)) = best else { return Ok(None) };
    let mut opt = BscOptimum { alpha: s.0, binding: s.1.to_string(), rho_flip: grid[i].0, sigma: s.2 };
    if grid.len() > 1 {
        let lo = grid[i.saturating_sub(1)].0;
        let hi = grid[(i + 1).min(grid.len() - 1)].0;
        let neg = |a: f64| -> Result<f64> { Ok(refine(a).map(|q| score(&q).map_or(f64::INFINITY, |s| -s.0))?) };
        let a_star = golden_section(neg, lo, hi, 1e-6)?;
        let q = refine(a_star)?;
        if let Some(s) = score(&q) {
            if s.0 > opt.alpha {
                opt = BscOptimum { alpha: s.0, binding: s.1.to_string(), rho_flip: a_star, sigma: s.2 };
            }
        }
    }
    Ok(Some(opt))
}

fn rho_grid(family: &BscFamily, search: &BscSearch) -> Result<Vec<(f64, [RegionQuantities; 2])>> {
    let steps = search.rho_steps.max(1);
    (0..=steps)
        .into_par_iter()
        .map(|i| {
            let a = 0.5 * i as f64 / steps as f64;
            Ok((a, bsc_quantities(family, a, search)?))
        })
        .collect()
}

/// Best closed-region α over the binary-symmetric auxiliary family.
pub fn bsc_theorem3_max_alpha(family: &BscFamily, r: f64, kappa: f64, j: u32, search: &BscSearch) -> Result<Option<BscOptimum>> {
    let grid = rho_grid(family, search)?;
    maximize_over_rho(&grid, |a| bsc_quantities(family, a, search), r, kappa, j)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GungorOptimum {
    pub alpha: f64,
    pub kappa_tilde: f64,
    /// `τ = Bernoulli(bias)` on the channel input.
    pub bias: f64,
}

/// Comparison-region profiles over the channel-input bias, with ρ the identity.
pub struct GungorBsc {
    pair: ChannelPair,
    search: BscSearch,
    grid: Vec<(f64, GungorProfile)>,
}

impl GungorBsc {
    pub fn new(family: &BscFamily, search: &BscSearch) -> Result<Self> {
        let pair = family.pair()?;
        let steps = search.tau_steps.max(1);
        let grid = (1..=steps)
            .into_par_iter()
            .map(|i| {
                let p = 0.5 * i as f64 / steps as f64;
                Ok((p, Self::profile(&pair, p, search)?))
            })
            .collect::<Result<_>>()?;
        Ok(GungorBsc { pair, search: *search, grid })
    }

    fn profile(pair: &ChannelPair, p: f64, search: &BscSearch) -> Result<GungorProfile> {
        GungorProfile::new(pair, &CondDist::identity(2)?, &Dist::bernoulli(p)?, search.gungor_nu_steps)
    }

    pub fn max_alpha(&self, r: f64, kappa: f64) -> Result<Option<GungorOptimum>> {
        let mut best: Option<(usize, f64, f64)> = None;
        for (i, (_, prof)) in self.grid.iter().enumerate() {
            if let Some((a, kt)) = prof.max_alpha(r, kappa) {
                if best.map_or(true, |b| a > b.1) {
                    best = Some((i, a, kt));
                }
            }
        }
        let Some((i, alpha, kt)) = best else { return Ok(None) };
        let mut opt = GungorOptimum { alpha, kappa_tilde: kt, bias: self.grid[i].0 };
        let lo = if i == 0 { 1e-6 } else { self.grid[i - 1].0 };
        let hi = self.grid[(i + 1).min(self.grid.len() - 1)].0;
        let neg = |p: f64| -> Result<f64> {
            Ok(Self::profile(&self.pair, p, &self.search)?.max_alpha(r, kappa).map_or(f64::INFINITY, |m| -m.0))
        };
        let p_star = golden_section(neg, lo, hi, 1e-6)?;
        if let Some((a, kt)) = Self::profile(&self.pair, p_star, &self.search)?.max_alpha(r, kappa) {
            if a > opt.alpha {
                opt = GungorOptimum { alpha: a, kappa_tilde: kt, bias: p_star };
            }
        }
        Ok(Some(opt))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SweepMode {
    RVsAlpha,
    AlphaVsKappa,
    AlphaVsLambdaT,
}

/// Fixed parameters of a sweep; the swept one is ignored.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepFixed {
    pub r: f64,
    pub kappa: f64,
    pub j: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub x: f64,
    pub value: f64,
    pub binding: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gungor: Option<f64>,
}

/// Evenly spaced abscissae `start, start + step, ..., ≤ stop`.
pub fn abscissae(start: f64, stop: f64, step: f64) -> Result<Vec<f64>> {
    if !(step > 0.0) || !(stop >= start) {
        return Err(RegionError::Parameter(format!("bad grid {start}:{step}:{stop}")));
    }
    let count = ((stop - start) / step + 1e-9).floor() as usize;
    Ok((0..=count).map(|i| start + i as f64 * step).collect())
}

/// Maximum α of the closed region along one parameter, over the binary
/// symmetric auxiliary family. Abscissae with an empty region are omitted.
/// With `compare`, the comparison region's maximum α is added alongside
/// (`None` where that region is empty).
pub fn sweep_bsc(
    family: &BscFamily,
    mode: SweepMode,
    fixed: SweepFixed,
    xs: &[f64],
    search: &BscSearch,
    compare: bool,
) -> Result<Vec<CurvePoint>> {
    if fixed.j == 0 {
        return Err(RegionError::Rounds);
    }
    let shared = match mode {
        SweepMode::AlphaVsLambdaT => None,
        _ => Some((rho_grid(family, search)?, if compare { Some(GungorBsc::new(family, search)?) } else { None })),
    };
    let points: Vec<Option<CurvePoint>> = xs
        .par_iter()
        .map(|&x| -> Result<Option<CurvePoint>> {
            let (fam, r, kappa) = match mode {
                SweepMode::RVsAlpha => (*family, x, fixed.kappa),
                SweepMode::AlphaVsKappa => (*family, fixed.r, x),
                SweepMode::AlphaVsLambdaT => (BscFamily::new(x, family.lambda_q)?, fixed.r, fixed.kappa),
            };
            if r < 0.0 || kappa < 0.0 {
                return Err(RegionError::InvalidPoint(format!("abscissa {x}")));
            }
            let (opt, gungor) = match &shared {
                Some((grid, g)) => {
                    let opt = maximize_over_rho(grid, |a| bsc_quantities(&fam, a, search), r, kappa, fixed.j)?;
                    let gv = match g {
                        Some(g) => g.max_alpha(r, kappa)?,
                        None => None,
                    };
                    (opt, gv)
                }
                None => {
                    let grid: Vec<_> = (0..=search.rho_steps.max(1))
                        .map(|i| {
                            let a = 0.5 * i as f64 / search.rho_steps.max(1) as f64;
                            Ok((a, bsc_quantities(&fam, a, search)?))
                        })
                        .collect::<Result<_>>()?;
                    let opt = maximize_over_rho(&grid, |a| bsc_quantities(&fam, a, search), r, kappa, fixed.j)?;
                    let gv = if compare { GungorBsc::new(&fam, search)?.max_alpha(r, kappa)? } else { None };
                    (opt, gv)
                }
            };
            Ok(opt.map(|o| CurvePoint {
                x,
                value: o.alpha,
                binding: o.binding,
                gungor: compare.then(|| gungor.map_or(f64::NAN, |g| g.alpha)),
            }))
        })
        .collect::<Result<_>>()?;
    Ok(points.into_iter().flatten().collect())
}
