// Grid oracles for the constrained divergence problems, written from the
// constraint sets directly: each conditioning symbol leaves one or two free
// coordinates, scanned on a 1e-3 grid and refined by golden section.

use authcap::probcore::{CondDist, Dist};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

fn term(z: f64, w: f64) -> f64 {
    if z <= 0.0 {
        0.0
    } else if w <= 0.0 {
        f64::INFINITY
    } else {
        z * (z / w).log2()
    }
}

fn golden(f: &dyn Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let mut best = f(lo).min(f(hi));
    while hi - lo > 1e-12 {
        let a = hi - g * (hi - lo);
        let b = lo + g * (hi - lo);
        let (fa, fb) = (f(a), f(b));
        best = best.min(fa).min(fb);
        if fa <= fb {
            hi = b;
        } else {
            lo = a;
        }
    }
    best.min(f(0.5 * (lo + hi)))
}

/// Minimum of a convex function on `[lo, hi]`: 1e-3 grid, then golden section
/// between the best cell's neighbours.
pub fn scan_min(f: &dyn Fn(f64) -> f64, lo: f64, hi: f64) -> f64 {
    if hi < lo - 1e-15 {
        return f64::INFINITY;
    }
    let hi = hi.max(lo);
    let cells = ((hi - lo) / 1e-3).ceil().max(1.0) as usize;
    let at = |i: usize| lo + (hi - lo) * i as f64 / cells as f64;
    let (mut bi, mut bv) = (0, f64::INFINITY);
    for i in 0..=cells {
        let v = f(at(i));
        if v < bv {
            bi = i;
            bv = v;
        }
    }
    if !bv.is_finite() {
        return bv;
    }
    bv.min(golden(f, at(bi.saturating_sub(1)), at((bi + 1).min(cells))))
}

/// Both-marginal problem with binary `x` and `|y| ∈ {2, 3}`: the free
/// coordinates are `ζ(y, x=0)` for all but the last `y`.
pub fn oracle_both(t: &CondDist, rho: &CondDist, sigma: &Dist, mu: &CondDist) -> f64 {
    assert_eq!(rho.out_size(), 2);
    let ny = t.out_size();
    let mut total = 0.0;
    for u in 0..rho.in_size() {
        if sigma.get(u) == 0.0 {
            continue;
        }
        let (r0, m) = (rho.get(u, 0), mu.row(u).to_vec());
        let weight = |y: usize, x: usize| t.get(x, y) * rho.get(u, x);
        // Divergence given the first column; `None` if it leaves the polytope.
        let objective = |col0: &[f64]| -> f64 {
            let mut d = 0.0;
            for y in 0..ny {
                let (z0, z1) = (col0[y], m[y] - col0[y]);
                if z0 < -1e-12 || z1 < -1e-12 {
                    return f64::INFINITY;
                }
                d += term(z0.max(0.0), weight(y, 0)) + term(z1.max(0.0), weight(y, 1));
            }
            d
        };
        let best = match ny {
            2 => {
                let f = |a: f64| objective(&[a, r0 - a]);
                scan_min(&f, (r0 - m[1]).max(0.0), m[0].min(r0))
            }
            3 => {
                let inner = |a: f64| {
                    let f = |b: f64| objective(&[a, b, r0 - a - b]);
                    scan_min(&f, (r0 - a - m[2]).max(0.0), m[1].min(r0 - a))
                };
                scan_min(&inner, (r0 - m[1] - m[2]).max(0.0), m[0].min(r0))
            }
            _ => panic!("oracle covers |Y| of 2 or 3"),
        };
        if !best.is_finite() {
            return f64::INFINITY;
        }
        total += sigma.get(u) * best;
    }
    total
}

/// Output-marginal problem with binary `x` and `z`: `c_x = ζ(z=0|x,u)` must
/// satisfy `ρ0 c0 + ρ1 c1 = ν0`.
pub fn oracle_single(q: &CondDist, rho: &CondDist, sigma: &Dist, nu: &CondDist) -> f64 {
    let mut total = 0.0;
    for u in 0..rho.in_size() {
        if sigma.get(u) == 0.0 {
            continue;
        }
        let (r0, r1, n0) = (rho.get(u, 0), rho.get(u, 1), nu.get(u, 0));
        let div = |x: usize, c: f64| term(c, q.get(x, 0)) + term(1.0 - c, q.get(x, 1));
        let best = if r1 == 0.0 {
            div(0, n0)
        } else if r0 == 0.0 {
            div(1, n0)
        } else {
            let f = |c0: f64| {
                let c1 = (n0 - r0 * c0) / r1;
                if !(-1e-12..=1.0 + 1e-12).contains(&c1) {
                    return f64::INFINITY;
                }
                r0 * div(0, c0) + r1 * div(1, c1.clamp(0.0, 1.0))
            };
            scan_min(&f, ((n0 - r1) / r0).max(0.0), (n0 / r0).min(1.0))
        };
        if !best.is_finite() {
            return f64::INFINITY;
        }
        total += sigma.get(u) * best;
    }
    total
}

pub fn random_row(rng: &mut ChaCha8Rng, len: usize, floor: f64) -> Vec<f64> {
    let raw: Vec<f64> = (0..len).map(|_| rng.gen_range(floor..1.0)).collect();
    let s: f64 = raw.iter().sum();
    raw.into_iter().map(|v| v / s).collect()
}

pub fn random_kernel(rng: &mut ChaCha8Rng, rows: usize, cols: usize, floor: f64) -> CondDist {
    CondDist::new((0..rows).map(|_| random_row(rng, cols, floor)).collect()).unwrap()
}

/// `(reference, ρ, σ, target)` with strictly positive entries.
pub fn random_problem(rng: &mut ChaCha8Rng, u: usize, x: usize, y: usize) -> (CondDist, CondDist, Dist, CondDist) {
    let t = random_kernel(rng, x, y, 0.05);
    let rho = random_kernel(rng, u, x, 0.05);
    let sigma = Dist::new(random_row(rng, u, 0.05)).unwrap();
    let target = random_kernel(rng, u, y, 0.05);
    (t, rho, sigma, target)
}
