//! Constrained divergence minimization.
//!
//! The both-marginal problem is an I-projection of `t×ρ` onto a
//! transportation polytope, solved per conditioning symbol by iterative
//! proportional fitting. The output-marginal-only problem is the same
//! projection in disguise: writing `ζ'(z,x|u) = ζ(z|x,u)ρ(x|u)` turns the
//! coupled row constraint into a pair of marginals, so one solver serves both.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::infofn::{kl_vec, pos_part, s_theorem1};
use crate::probcore::{compose, CondDist, DetCondDist, Dist, JointKernel, ProbError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ConstraintMode {
    BothMarginals,
    OutputMarginalOnly,
}

/// `min 𝔻(ζ‖reference×ρ|σ)` subject to the marginal constraints of `mode`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ProjectionProblem {
    pub reference: CondDist,
    pub rho: CondDist,
    pub sigma: Dist,
    pub target: CondDist,
    pub mode: ConstraintMode,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Minimizer {
    /// `ζ(y,x|u)`.
    Joint(JointKernel),
    /// `ζ(z|x,u)` with rows indexed `u·|X| + x`.
    Conditional(CondDist),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ProjectionResult {
    /// Bits; `+∞` when the constraint set is empty.
    #[serde(with = "extended_real")]
    pub value: f64,
    pub minimizer: Option<Minimizer>,
    pub iterations: usize,
    pub converged: bool,
}

/// JSON has no infinity; encode it as the string `"inf"`.
pub mod extended_real {
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    #[derive(Serialize, Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Finite(f64),
        Text(String),
    }

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_finite() {
            Repr::Finite(*v).serialize(s)
        } else if *v > 0.0 {
            Repr::Text("inf".into()).serialize(s)
        } else {
            Repr::Text("nan".into()).serialize(s)
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        match Repr::deserialize(d)? {
            Repr::Finite(v) => Ok(v),
            Repr::Text(t) if t == "inf" => Ok(f64::INFINITY),
            Repr::Text(t) => Err(serde::de::Error::custom(format!("unexpected value {t}"))),
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct SolverOptions {
    pub tol: f64,
    pub max_iter: usize,
    pub stall_gap: f64,
    pub stall_iters: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions { tol: 1e-10, max_iter: 10_000, stall_gap: 1e-6, stall_iters: 1_000 }
    }
}

/// Support pattern slack used by the feasibility pre-check.
const HALL_SLACK: f64 = 1e-12;
const MAX_HALL_SIDE: usize = 22;

/// Outcome of fitting a single conditioning row.
struct RowFit {
    /// `ζ[y][x]`, flattened as `y * nx + x`.
    coupling: Vec<f64>,
    iterations: usize,
    converged: bool,
}

/// Neighbours of a set of columns (x) in the support graph, as a bitmask of rows (y).
fn row_neighbours(support: &[bool], ny: usize, nx: usize, rows: u32) -> u32 {
    let mut cols = 0u32;
    for y in 0..ny {
        if rows >> y & 1 == 1 {
            for x in 0..nx {
                if support[y * nx + x] {
                    cols |= 1 << x;
                }
            }
        }
    }
    cols
}

fn mask_mass(mass: &[f64], mask: u32) -> f64 {
    mass.iter().enumerate().filter(|(i, _)| mask >> i & 1 == 1).map(|(_, p)| p).sum()
}

/// Gale's condition on the support graph. Returns `None` when infeasible;
/// otherwise the support with every entry that is forced to zero removed.
fn restrict_support(mut support: Vec<bool>, row_target: &[f64], col_target: &[f64]) -> Option<Vec<bool>> {
    let (ny, nx) = (row_target.len(), col_target.len());
    if ny > MAX_HALL_SIDE || nx > 32 {
        return Some(support);
    }
    loop {
        let mut changed = false;
        for rows in 1u32..(1u32 << ny) {
            let cols = row_neighbours(&support, ny, nx, rows);
            let demand = mask_mass(row_target, rows);
            let supply = mask_mass(col_target, cols);
            if demand > supply + HALL_SLACK {
                return None;
            }
            if demand >= supply - HALL_SLACK && rows != (1u32 << ny) - 1 {
                // All mass of these columns must flow into these rows.
                for y in 0..ny {
                    if rows >> y & 1 == 1 {
                        continue;
                    }
                    for x in 0..nx {
                        if cols >> x & 1 == 1 && support[y * nx + x] {
                            support[y * nx + x] = false;
                            changed = true;
                        }
                    }
                }
            }
        }
        if !changed {
            return Some(support);
        }
    }
}

/// Iterative proportional fitting of `kernel` (flattened `y * nx + x`) to the
/// row sums `row_target` (over y) and column sums `col_target` (over x).
fn fit_row(kernel: &[f64], row_target: &[f64], col_target: &[f64], opts: &SolverOptions) -> Option<RowFit> {
    let (ny, nx) = (row_target.len(), col_target.len());
    let support: Vec<bool> = kernel
        .iter()
        .enumerate()
        .map(|(i, &k)| k > 0.0 && row_target[i / nx] > 0.0 && col_target[i % nx] > 0.0)
        .collect();
    let support = restrict_support(support, row_target, col_target)?;
    let mut z: Vec<f64> = kernel.iter().zip(&support).map(|(&k, &s)| if s { k } else { 0.0 }).collect();

    let mut stalled_for = 0;
    for iteration in 1..=opts.max_iter {
        for y in 0..ny {
            let row = &mut z[y * nx..(y + 1) * nx];
            let s: f64 = row.iter().sum();
            if s > 0.0 {
                let f = row_target[y] / s;
                row.iter_mut().for_each(|v| *v *= f);
            }
        }
        for x in 0..nx {
            let s: f64 = (0..ny).map(|y| z[y * nx + x]).sum();
            if s > 0.0 {
                let f = col_target[x] / s;
                (0..ny).for_each(|y| z[y * nx + x] *= f);
            }
        }
        let row_gap = (0..ny)
            .map(|y| (z[y * nx..(y + 1) * nx].iter().sum::<f64>() - row_target[y]).abs())
            .fold(0.0, f64::max);
        let col_gap = (0..nx)
            .map(|x| ((0..ny).map(|y| z[y * nx + x]).sum::<f64>() - col_target[x]).abs())
            .fold(0.0, f64::max);
        let gap = row_gap.max(col_gap);
        if gap < opts.tol {
            return Some(RowFit { coupling: z, iterations: iteration, converged: true });
        }
        if gap > opts.stall_gap {
            stalled_for += 1;
            if stalled_for >= opts.stall_iters {
                return None;
            }
        } else {
            stalled_for = 0;
        }
    }
    Some(RowFit { coupling: z, iterations: opts.max_iter, converged: false })
}

fn check_problem(p: &ProjectionProblem) -> Result<()> {
    let (u, x) = (p.rho.in_size(), p.rho.out_size());
    if p.sigma.len() != u {
        return Err(ProbError::Dimension("conditioning law does not match ρ inputs".into()));
    }
    if p.reference.in_size() != x {
        return Err(ProbError::Dimension("reference kernel inputs do not match ρ outputs".into()));
    }
    if p.target.in_size() != u || p.target.out_size() != p.reference.out_size() {
        return Err(ProbError::Dimension("target law does not match reference output or ρ inputs".into()));
    }
    Ok(())
}

fn infeasible(iterations: usize) -> ProjectionResult {
    ProjectionResult { value: f64::INFINITY, minimizer: None, iterations, converged: true }
}

/// Solves the both-marginal core and returns the joint minimizer.
fn solve_joint(p: &ProjectionProblem, opts: &SolverOptions) -> Result<(ProjectionResult, Option<JointKernel>)> {
    check_problem(p)?;
    let (nu, nx, ny) = (p.rho.in_size(), p.rho.out_size(), p.reference.out_size());
    let mut data = vec![0.0; nu * ny * nx];
    let mut value = 0.0;
    let mut iterations = 0;
    let mut converged = true;
    for u in 0..nu {
        let rho_u = p.rho.row(u);
        let kernel: Vec<f64> =
            (0..ny * nx).map(|i| p.reference.get(i % nx, i / nx) * rho_u[i % nx]).collect();
        let out = &mut data[u * ny * nx..(u + 1) * ny * nx];
        if p.sigma.get(u) == 0.0 {
            // Unweighted rows never enter the objective; keep a valid kernel.
            out.copy_from_slice(&kernel);
            continue;
        }
        let Some(fit) = fit_row(&kernel, p.target.row(u), rho_u, opts) else {
            return Ok((infeasible(iterations), None));
        };
        iterations = iterations.max(fit.iterations);
        converged &= fit.converged;
        let d = kl_vec(&fit.coupling, &kernel);
        if d.is_infinite() {
            return Ok((infeasible(iterations), None));
        }
        value += p.sigma.get(u) * d;
        let total: f64 = fit.coupling.iter().sum();
        out.iter_mut().zip(&fit.coupling).for_each(|(o, z)| *o = z / total);
    }
    let joint = JointKernel::new(ny, nx, CondDist::from_flat(nu, ny * nx, data)?)?;
    let result = ProjectionResult { value: value.max(0.0), minimizer: None, iterations, converged };
    Ok((result, Some(joint)))
}

/// `𝔽(μ‖t,ρ|σ)`: both marginals of `ζ(y,x|u)` pinned to `μ(y|u)` and `ρ(x|u)`.
pub fn f_project(p: &ProjectionProblem) -> Result<ProjectionResult> {
    f_project_with(p, &SolverOptions::default())
}

pub fn f_project_with(p: &ProjectionProblem, opts: &SolverOptions) -> Result<ProjectionResult> {
    let (mut result, joint) = solve_joint(p, opts)?;
    result.minimizer = joint.map(Minimizer::Joint);
    Ok(result)
}

/// `𝔽(ν‖q,ρ|σ)`: `ζ(z|x,u)` free except for `Σ_x ζ(z|x,u)ρ(x|u) = ν(z|u)`.
pub fn f_project_single(p: &ProjectionProblem) -> Result<ProjectionResult> {
    f_project_single_with(p, &SolverOptions::default())
}

pub fn f_project_single_with(p: &ProjectionProblem, opts: &SolverOptions) -> Result<ProjectionResult> {
    let (mut result, joint) = solve_joint(p, opts)?;
    if let Some(joint) = joint {
        let (nu, nx, nz) = (joint.u_size(), joint.x_size(), joint.y_size());
        let mut rows = Vec::with_capacity(nu * nx);
        for u in 0..nu {
            for x in 0..nx {
                let px = p.rho.get(u, x);
                if px > 0.0 {
                    let col: Vec<f64> = (0..nz).map(|z| joint.get(u, z, x)).collect();
                    let s: f64 = col.iter().sum();
                    rows.push(col.into_iter().map(|v| v / s).collect());
                } else {
                    rows.push(p.reference.row(x).to_vec());
                }
            }
        }
        result.minimizer = Some(Minimizer::Conditional(CondDist::new(rows)?));
    }
    Ok(result)
}

/// How the outer minimization of `𝕃` searches over `ν ∈ P(Z|U)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NuSearch {
    /// `ν = BSC(b)`, `b ∈ [0,1]` on `steps` cells (binary U and Z only).
    Symmetric { steps: usize },
    /// Every row on a simplex grid with denominator `steps`.
    Simplex { steps: usize },
}

/// Largest simplex grid evaluated before reporting a budget error.
pub const SIMPLEX_GRID_BUDGET: usize = 2_000_000;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LResult {
    pub value: f64,
    /// The minimizing ν found; not claimed unique.
    pub nu: CondDist,
    /// `𝔽(ν‖q,ρ|στ)` at the witness.
    pub penalty: f64,
    /// `𝕊(tρ,ν|σ,τ)` at the witness (before clipping).
    pub secrecy: f64,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum LFuncError {
    #[error(transparent)]
    Prob(#[from] ProbError),
    #[error("symmetric search needs binary U and Z, got |U|={u}, |Z|={z}")]
    NotBinary { u: usize, z: usize },
    #[error("grid needs at least one step")]
    EmptyGrid,
    #[error("ν grid has {0} cells, above the budget")]
    Budget(usize),
}

/// The pieces of `𝕃(t,q|ρ,σ,τ)` that do not depend on ν.
pub struct LObjective<'a> {
    q: &'a CondDist,
    rho: &'a CondDist,
    sigma: &'a DetCondDist,
    tau: &'a Dist,
    t_rho: CondDist,
    sigma_tau: Dist,
}

impl<'a> LObjective<'a> {
    pub fn new(t: &CondDist, q: &'a CondDist, rho: &'a CondDist, sigma: &'a DetCondDist, tau: &'a Dist) -> Result<Self> {
        if sigma.kernel().out_size() != rho.in_size() {
            return Err(ProbError::Dimension("σ outputs do not match ρ inputs".into()));
        }
        let t_rho = compose(t, rho)?;
        let sigma_tau = sigma.kernel().push(tau)?;
        Ok(LObjective { q, rho, sigma, tau, t_rho, sigma_tau })
    }

    /// Returns `(penalty + |secrecy|⁺, penalty, secrecy)` at `ν`.
    pub fn eval(&self, nu: &CondDist) -> Result<(f64, f64, f64)> {
        let problem = ProjectionProblem {
            reference: self.q.clone(),
            rho: self.rho.clone(),
            sigma: self.sigma_tau.clone(),
            target: nu.clone(),
            mode: ConstraintMode::OutputMarginalOnly,
        };
        let penalty = solve_joint(&problem, &SolverOptions::default())?.0.value;
        if penalty.is_infinite() {
            return Ok((f64::INFINITY, penalty, f64::NAN));
        }
        let secrecy = s_theorem1(&self.t_rho, nu, self.sigma, self.tau)?;
        Ok((penalty + pos_part(secrecy), penalty, secrecy))
    }

    pub fn q_rho(&self) -> Result<CondDist> {
        compose(self.q, self.rho)
    }
}

/// `𝕃(t,q|ρ,σ,τ) = min_ν 𝔽(ν‖q,ρ|στ) + |𝕊(tρ,ν|σ,τ)|⁺`.
///
/// A grid over ν is followed by local refinement around the best cell; the
/// point `ν = qρ` is always a candidate, so the result never exceeds it.
pub fn l_func(
    t: &CondDist,
    q: &CondDist,
    rho: &CondDist,
    sigma: &DetCondDist,
    tau: &Dist,
    search: NuSearch,
) -> std::result::Result<LResult, LFuncError> {
    let obj = LObjective::new(t, q, rho, sigma, tau)?;
    let (nu_size, z_size) = (rho.in_size(), q.out_size());
    let best = match search {
        NuSearch::Symmetric { steps } => {
            if nu_size != 2 || z_size != 2 {
                return Err(LFuncError::NotBinary { u: nu_size, z: z_size });
            }
            if steps == 0 {
                return Err(LFuncError::EmptyGrid);
            }
            symmetric_search(&obj, steps)?
        }
        NuSearch::Simplex { steps } => {
            if steps == 0 {
                return Err(LFuncError::EmptyGrid);
            }
            simplex_search(&obj, nu_size, z_size, steps)?
        }
    };
    let anchor = obj.q_rho()?;
    let (v, f, s) = obj.eval(&anchor)?;
    let (value, nu, penalty, secrecy) = if v < best.0 { (v, anchor, f, s) } else { best };
    Ok(LResult { value, nu, penalty, secrecy })
}

type Candidate = (f64, CondDist, f64, f64);

fn bsc(b: f64) -> Result<CondDist> {
    CondDist::bsc(b.clamp(0.0, 1.0))
}

fn symmetric_search(obj: &LObjective<'_>, steps: usize) -> Result<Candidate> {
    let values: Vec<f64> = (0..=steps)
        .into_par_iter()
        .map(|i| obj.eval(&bsc(i as f64 / steps as f64)?).map(|e| e.0))
        .collect::<Result<_>>()?;
    // First minimum wins, which is the smallest flip among ties.
    let mut best_i = 0;
    for (i, &v) in values.iter().enumerate() {
        if v < values[best_i] {
            best_i = i;
        }
    }
    let h = 1.0 / steps as f64;
    let lo = (best_i as f64 - 1.0).max(0.0) * h;
    let hi = ((best_i + 1) as f64 * h).min(1.0);
    let f = |b: f64| obj.eval(&bsc(b)?).map(|e| e.0);
    let b_ref = golden_section(f, lo, hi, 1e-12)?;
    let b_grid = best_i as f64 * h;
    let b = if f(b_ref)? < values[best_i] { b_ref } else { b_grid };
    let nu = bsc(b)?;
    let (v, p, s) = obj.eval(&nu)?;
    Ok((v, nu, p, s))
}

/// Golden-section minimization of a unimodal-near-the-bracket function.
pub fn golden_section<E>(f: impl Fn(f64) -> std::result::Result<f64, E>, mut lo: f64, mut hi: f64, tol: f64) -> std::result::Result<f64, E> {
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = hi - g * (hi - lo);
    let mut d = lo + g * (hi - lo);
    let mut fc = f(c)?;
    let mut fd = f(d)?;
    while hi - lo > tol {
        if fc <= fd {
            hi = d;
            d = c;
            fd = fc;
            c = hi - g * (hi - lo);
            fc = f(c)?;
        } else {
            lo = c;
            c = d;
            fc = fd;
            d = lo + g * (hi - lo);
            fd = f(d)?;
        }
    }
    Ok(if fc <= fd { c } else { d })
}

/// All compositions of `steps` into `parts` non-negative parts, lexicographic.
fn compositions(steps: usize, parts: usize) -> Vec<Vec<usize>> {
    fn rec(rem: usize, parts: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if parts == 1 {
            cur.push(rem);
            out.push(cur.clone());
            cur.pop();
            return;
        }
        for v in 0..=rem {
            cur.push(v);
            rec(rem - v, parts - 1, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(steps, parts, &mut Vec::new(), &mut out);
    out
}

fn simplex_search(obj: &LObjective<'_>, u_size: usize, z_size: usize, steps: usize) -> std::result::Result<Candidate, LFuncError> {
    let row_points = compositions(steps, z_size);
    let cells = row_points
        .len()
        .checked_pow(u_size as u32)
        .filter(|&c| c <= SIMPLEX_GRID_BUDGET)
        .ok_or(LFuncError::Budget(row_points.len().saturating_pow(u_size as u32)))?;
    let to_nu = |mut idx: usize| -> Result<CondDist> {
        let mut rows = vec![Vec::new(); u_size];
        for row in rows.iter_mut().rev() {
            *row = row_points[idx % row_points.len()].iter().map(|&c| c as f64 / steps as f64).collect();
            idx /= row_points.len();
        }
        CondDist::new(rows)
    };
    let values: Vec<f64> = (0..cells)
        .into_par_iter()
        .map(|i| obj.eval(&to_nu(i)?).map(|e| e.0))
        .collect::<Result<_>>()?;
    let mut best_i = 0;
    for (i, &v) in values.iter().enumerate() {
        if v < values[best_i] {
            best_i = i;
        }
    }
    let start = to_nu(best_i)?;
    Ok(compass_refine(obj, start, 1.0 / steps as f64)?)
}

/// Pattern search. Each move shifts mass between two symbols of one row, or
/// combines two such shifts in different rows so kinks along diagonals are
/// still crossed.
fn compass_refine(obj: &LObjective<'_>, start: CondDist, mut step: f64) -> Result<Candidate> {
    let mut rows = start.to_rows();
    let singles: Vec<(usize, usize, usize)> = (0..rows.len())
        .flat_map(|u| {
            let z = rows[u].len();
            (0..z).flat_map(move |a| (0..z).filter(move |&b| b != a).map(move |b| (u, a, b)))
        })
        .collect();
    let mut moves: Vec<Vec<(usize, usize, usize)>> = singles.iter().map(|&m| vec![m]).collect();
    for (i, &m1) in singles.iter().enumerate() {
        for &m2 in &singles[i + 1..] {
            if m1.0 != m2.0 {
                moves.push(vec![m1, m2]);
            }
        }
    }
    let mut best = obj.eval(&start)?.0;
    let initial = step;
    let mut evals = 0;
    while step > 1e-10 && evals < crate::regions::PATTERN_EVAL_CAP {
        let mut improved = false;
        for mv in &moves {
            let mut trial = rows.clone();
            let mut valid = true;
            for &(u, a, b) in mv {
                if trial[u][b] < step {
                    valid = false;
                    break;
                }
                trial[u][a] += step;
                trial[u][b] -= step;
            }
            if !valid {
                continue;
            }
            let v = obj.eval(&CondDist::new(trial.clone())?)?.0;
            evals += 1;
            if v < best {
                best = v;
                rows = trial;
                improved = true;
            }
        }
        step = if improved { (2.0 * step).min(initial) } else { step / 2.0 };
    }
    let nu = CondDist::new(rows)?;
    let (v, p, s) = obj.eval(&nu)?;
    Ok((v, nu, p, s))
}
