//! Entropy, mutual information, divergence and the secrecy functionals.
//!
//! Every quantity is in bits. Conditioning weights of exactly zero drop their
//! inner term, so a zero-probability context never contributes `0 · ∞`.

use crate::probcore::{compose, CondDist, DetCondDist, Dist, Kernel, ProbError, Result};

fn plogp(p: f64) -> f64 {
    if p > 0.0 {
        -p * p.log2()
    } else {
        0.0
    }
}

/// Shannon entropy of a probability vector.
pub fn entropy_vec(p: &[f64]) -> f64 {
    p.iter().copied().map(plogp).sum()
}

fn check_cond(rho: &CondDist, sigma: &Dist) -> Result<()> {
    if rho.in_size() != sigma.len() {
        return Err(ProbError::Dimension(format!(
            "kernel has {} inputs but the conditioning law has {} symbols",
            rho.in_size(),
            sigma.len()
        )));
    }
    Ok(())
}

/// `ℍ(ρ|σ) = -Σ_u σ(u) Σ_x ρ(x|u) log ρ(x|u)`.
pub fn entropy(rho: &CondDist, sigma: &Dist) -> Result<f64> {
    check_cond(rho, sigma)?;
    Ok(rho
        .rows()
        .zip(sigma.mass())
        .filter(|(_, &w)| w > 0.0)
        .map(|(row, &w)| w * entropy_vec(row))
        .sum())
}

/// `ℍ(q|ρσ)`: entropy of `q(·|x,u)` averaged over `ρ(x|u)σ(u)`.
fn cond_entropy_kernel(q: Kernel<'_>, rho: &CondDist, sigma: &Dist) -> f64 {
    let x_size = rho.out_size();
    let mut h = 0.0;
    for (u, &wu) in sigma.mass().iter().enumerate() {
        if wu == 0.0 {
            continue;
        }
        for (x, &wx) in rho.row(u).iter().enumerate() {
            if wx == 0.0 {
                continue;
            }
            h += wu * wx * entropy_vec(q.row(x, u, x_size));
        }
    }
    h
}

/// `𝕀(q,ρ|σ) = ℍ(qρ|σ) - ℍ(q|ρσ)`.
pub fn mutual_info<'a>(q: impl Into<Kernel<'a>>, rho: &CondDist, sigma: &Dist) -> Result<f64> {
    let q = q.into();
    check_cond(rho, sigma)?;
    let q_rho = compose(q, rho)?;
    let value = entropy(&q_rho, sigma)? - cond_entropy_kernel(q, rho, sigma);
    // Cancellation can leave a few ulps below zero.
    Ok(value.max(0.0))
}

/// `𝕀(v,σ) = ℍ(vσ) - ℍ(v|σ)` for a kernel with no further conditioning.
pub fn mutual_info_marginal(v: &CondDist, sigma: &Dist) -> Result<f64> {
    check_cond(v, sigma)?;
    let out = v.push(sigma)?;
    Ok((entropy_vec(out.mass()) - entropy(v, sigma)?).max(0.0))
}

/// `𝔻(ρ‖ω|σ)`, or `+∞` when a σ-weighted row of ρ escapes the support of ω.
pub fn kl_div(rho: &CondDist, omega: &CondDist, sigma: &Dist) -> Result<f64> {
    check_cond(rho, sigma)?;
    if rho.in_size() != omega.in_size() || rho.out_size() != omega.out_size() {
        return Err(ProbError::Dimension("divergence between kernels of different shapes".into()));
    }
    let mut d = 0.0;
    for (u, &w) in sigma.mass().iter().enumerate() {
        if w == 0.0 {
            continue;
        }
        let row = kl_vec(rho.row(u), omega.row(u));
        if row.is_infinite() {
            return Ok(f64::INFINITY);
        }
        d += w * row;
    }
    Ok(d.max(0.0))
}

/// Unconditional divergence of two probability vectors.
pub fn kl_vec(p: &[f64], q: &[f64]) -> f64 {
    let mut d = 0.0;
    for (&a, &b) in p.iter().zip(q) {
        if a == 0.0 {
            continue;
        }
        if b == 0.0 {
            return f64::INFINITY;
        }
        d += a * (a / b).log2();
    }
    d
}

/// `|a|⁺ = a · 1{a > 0}`.
pub fn pos_part(a: f64) -> f64 {
    if a > 0.0 {
        a
    } else {
        0.0
    }
}

/// `|a|⁻ = a · 1{a < 0}`.
pub fn neg_part(a: f64) -> f64 {
    if a < 0.0 {
        a
    } else {
        0.0
    }
}

/// `𝕊_{a,b}(μ,ν|ρ,σ) = 𝕀(μ,ρ|σ) + a - 𝕀(ν,ρ|σ) + |𝕀(μρ,σ) + b - 𝕀(νρ,σ)|⁺`.
pub fn s_ab(mu: &CondDist, nu: &CondDist, a: f64, b: f64, rho: &CondDist, sigma: &Dist) -> Result<f64> {
    let i_mu = mutual_info(mu, rho, sigma)?;
    let i_nu = mutual_info(nu, rho, sigma)?;
    let i_mu_outer = mutual_info_marginal(&compose(mu, rho)?, sigma)?;
    let i_nu_outer = mutual_info_marginal(&compose(nu, rho)?, sigma)?;
    Ok(i_mu + a - i_nu + pos_part(i_mu_outer + b - i_nu_outer))
}

/// `𝕊_{a,b}(ν|ρ,σ) = a - 𝕀(ν,ρ|σ) + |b - 𝕀(νρ,σ)|⁺`.
pub fn s_ab_single(nu: &CondDist, a: f64, b: f64, rho: &CondDist, sigma: &Dist) -> Result<f64> {
    let i_nu = mutual_info(nu, rho, sigma)?;
    let i_nu_outer = mutual_info_marginal(&compose(nu, rho)?, sigma)?;
    Ok(a - i_nu + pos_part(b - i_nu_outer))
}

/// The secrecy term of the keyed-authentication region:
/// `𝕀(μ,σ|τ) - 𝕀(ν,σ|τ) + |𝕀(μσ,τ) - 𝕀(νσ,τ)|⁺`.
pub fn s_theorem1(mu: &CondDist, nu: &CondDist, sigma: &DetCondDist, tau: &Dist) -> Result<f64> {
    s_ab(mu, nu, 0.0, 0.0, sigma.kernel(), tau)
}
