use authcap::iproject::{f_project_single_with, f_project_with, l_func, ConstraintMode, NuSearch, ProjectionProblem, SolverOptions};
use authcap::probcore::{compose, ChannelPair, CondDist, DetCondDist, Dist};
use authcap::regions::{
    abscissae, bsc_aux, sweep_bsc, theorem2_transform, AuxiliaryChoice, BscFamily, BscSearch, GungorBsc, GungorProfile,
    RatePoint, RegionQuantities, RegionVerdict, SigmaShape, SweepFixed, SweepMode,
};
use authcap::simkit::{
    authentication_exact, epsilon_exact, epsilon_mc, parse_rational, AaCode, RationalKernel, RemappedCode, SimError,
    SimmonsCode, TypeClassCode, TypeClassSpec,
};
use authcap::typelab::{CondNType, NType};
use num_rational::BigRational;
use rayon::prelude::*;
use serde_json::{json, Value};

use crate::args::*;
use crate::error::CliError;
use crate::output::{g12, write_csv, write_json, write_svg};

pub fn dispatch(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Region(a) => region(a),
        Command::Sweep(a) => sweep(a),
        Command::Project(a) => project(a),
        Command::Lfunc(a) => lfunc(a),
        Command::Transform(a) => transform(a),
        Command::SimulateSimmons(a) => simulate_simmons(a),
        Command::SimulateCode(a) => simulate_code(a),
    }
}

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

fn parse_f64(field: &str, s: &str) -> Result<f64, CliError> {
    s.trim().parse().map_err(|_| usage(format!("{field}: {s:?} is not a number")))
}

fn parse_vector(field: &str, s: &str) -> Result<Vec<f64>, CliError> {
    s.split(',').map(|v| parse_f64(field, v)).collect()
}

fn parse_matrix(field: &str, s: &str) -> Result<Vec<Vec<f64>>, CliError> {
    s.split(';').map(|row| parse_vector(field, row)).collect()
}

fn parse_counts(field: &str, s: &str) -> Result<Vec<Vec<u64>>, CliError> {
    s.split(';')
        .map(|row| {
            row.split(',')
                .map(|v| v.trim().parse().map_err(|_| usage(format!("{field}: {v:?} is not a count"))))
                .collect()
        })
        .collect()
}

fn parse_rational_matrix(field: &str, s: &str) -> Result<RationalKernel, CliError> {
    let rows: Vec<Vec<String>> = s.split(';').map(|r| r.split(',').map(|v| v.trim().to_string()).collect()).collect();
    RationalKernel::parse(&rows).map_err(|e| usage(format!("{field}: {e}")))
}

fn parse_point(s: &str) -> Result<RatePoint, CliError> {
    let v = parse_vector("--point", s)?;
    let [r, alpha, kappa] = v[..] else {
        return Err(usage(format!("--point needs r,alpha,kappa, got {s:?}")));
    };
    Ok(RatePoint::new(r, alpha, kappa)?)
}

fn point_json(p: &RatePoint) -> Value {
    json!({ "r": p.r, "alpha": p.alpha, "kappa": p.kappa })
}

/// The channel pair, plus the binary-symmetric family when no explicit matrix was given.
fn channels(c: &ChannelArgs) -> Result<(ChannelPair, Option<BscFamily>), CliError> {
    let t = match &c.t_kernel {
        Some(s) => CondDist::new(parse_matrix("--t-kernel", s)?)?,
        None => CondDist::bsc(c.lt)?,
    };
    let q = match &c.q_kernel {
        Some(s) => CondDist::new(parse_matrix("--q-kernel", s)?)?,
        None => CondDist::bsc(c.lq)?,
    };
    let family = if c.t_kernel.is_none() && c.q_kernel.is_none() { Some(BscFamily::new(c.lt, c.lq)?) } else { None };
    Ok((ChannelPair::new(t, q)?, family))
}

fn shape(s: Shape) -> SigmaShape {
    match s {
        Shape::Uniform => SigmaShape::Uniform,
        Shape::Identity => SigmaShape::Identity,
    }
}

fn shape_name(s: SigmaShape) -> &'static str {
    match s {
        SigmaShape::Uniform => "uniform",
        SigmaShape::Identity => "identity",
    }
}

/// Explicit auxiliary laws if any were given, with a JSON description.
fn auxiliary(a: &AuxArgs, j: u32) -> Result<Option<(AuxiliaryChoice, Value)>, CliError> {
    let explicit = [&a.rho, &a.sigma, &a.tau].iter().filter(|v| v.is_some()).count();
    if explicit > 0 {
        if explicit < 3 || a.rho_flip.is_some() {
            return Err(usage("--rho, --sigma and --tau go together and exclude --rho-flip"));
        }
        let rho = CondDist::new(parse_matrix("--rho", a.rho.as_deref().unwrap())?)?;
        let sigma = DetCondDist::new(CondDist::new(parse_matrix("--sigma", a.sigma.as_deref().unwrap())?)?)?;
        let tau = Dist::new(parse_vector("--tau", a.tau.as_deref().unwrap())?)?;
        let desc = json!({ "rho": rho.to_rows(), "sigma": sigma.kernel().to_rows(), "tau": tau.mass() });
        return Ok(Some((AuxiliaryChoice::new(rho, sigma, tau, j)?, desc)));
    }
    match a.rho_flip {
        Some(flip) => {
            let s = shape(a.sigma_shape);
            Ok(Some((bsc_aux(flip, s, j)?, json!({ "rho_flip": flip, "sigma_shape": shape_name(s) }))))
        }
        None => Ok(None),
    }
}

fn nu_search(kind: Search, steps: usize) -> NuSearch {
    match kind {
        Search::Symmetric => NuSearch::Symmetric { steps },
        Search::Simplex => NuSearch::Simplex { steps },
    }
}

fn bsc_search(g: &GridArgs) -> BscSearch {
    BscSearch { rho_steps: g.rho_steps, nu_steps: g.nu_steps, tau_steps: g.tau_steps, gungor_nu_steps: g.gungor_nu_steps }
}

fn worst_slack(v: &RegionVerdict) -> f64 {
    v.constraints.iter().map(|s| s.slack).fold(f64::INFINITY, f64::min)
}

fn region(a: RegionArgs) -> Result<(), CliError> {
    let p = parse_point(&a.point)?;
    if a.j == 0 {
        return Err(usage("--j must be at least 1"));
    }
    let (pair, family) = channels(&a.channels)?;
    let search = nu_search(a.search, a.grid.nu_steps);
    let aux = auxiliary(&a.aux, a.j)?;

    let (verdict, aux_desc) = match a.theorem {
        Theorem::One | Theorem::Three => {
            let judge = |q: &RegionQuantities| match a.theorem {
                Theorem::One => q.theorem1_verdict(&p, a.j, a.tol),
                _ => q.theorem3_verdict(&p, a.j, a.tol),
            };
            match aux {
                Some((aux, desc)) => (judge(&RegionQuantities::compute(&pair, &aux, search)?), desc),
                None => {
                    if family.is_none() {
                        return Err(usage("explicit channels need --rho/--sigma/--tau or --rho-flip"));
                    }
                    // Grid over the symmetric family; keep the choice with the largest worst slack.
                    let steps = a.grid.rho_steps.max(1);
                    let cands: Vec<(RegionVerdict, Value)> = (0..=steps)
                        .into_par_iter()
                        .flat_map_iter(|i| [(i, SigmaShape::Uniform), (i, SigmaShape::Identity)])
                        .map(|(i, s)| {
                            let flip = 0.5 * i as f64 / steps as f64;
                            let q = RegionQuantities::compute(&pair, &bsc_aux(flip, s, a.j)?, search)?;
                            Ok((judge(&q), json!({ "rho_flip": flip, "sigma_shape": shape_name(s) })))
                        })
                        .collect::<Result<_, CliError>>()?;
                    let mut best = 0;
                    for (i, c) in cands.iter().enumerate() {
                        if worst_slack(&c.0) > worst_slack(&cands[best].0) {
                            best = i;
                        }
                    }
                    cands.into_iter().nth(best).expect("non-empty grid")
                }
            }
        }
        Theorem::Gungor => {
            let (profile, desc) = match (&aux, family) {
                (Some((aux, desc)), _) => (GungorProfile::new(&pair, &aux.rho, &aux.tau, a.grid.gungor_nu_steps)?, desc.clone()),
                (None, Some(fam)) => {
                    let bs = bsc_search(&a.grid);
                    let bias = GungorBsc::new(&fam, &bs)?.max_alpha(p.r, p.kappa)?.map_or(0.5, |o| o.bias);
                    let prof = GungorProfile::new(&pair, &CondDist::identity(2)?, &Dist::bernoulli(bias)?, a.grid.gungor_nu_steps)?;
                    (prof, json!({ "rho": "identity", "tau_bias": bias }))
                }
                (None, None) => return Err(usage("explicit channels need --rho/--sigma/--tau")),
            };
            (profile.contains(&p, a.kappa_tilde_resolution, a.tol)?, desc)
        }
    };

    let theorem = match a.theorem {
        Theorem::One => "1",
        Theorem::Three => "3",
        Theorem::Gungor => "gungor",
    };
    let path = a.out.output.as_deref();
    match a.format {
        Format::Json => write_json(
            path,
            &json!({ "theorem": theorem, "point": point_json(&p), "j": a.j, "auxiliary": aux_desc, "verdict": verdict }),
        ),
        Format::Csv => {
            let mut rows = vec![
                vec!["contained".to_string(), verdict.contained.to_string()],
                vec!["binding".to_string(), verdict.binding.clone()],
            ];
            if let Some(kt) = verdict.kappa_tilde {
                rows.push(vec!["kappa_tilde".into(), g12(kt)]);
            }
            rows.extend(verdict.constraints.iter().map(|s| vec![s.name.clone(), g12(s.slack)]));
            write_csv(path, &["quantity", "value"], &rows)
        }
    }
}

fn sweep(a: SweepArgs) -> Result<(), CliError> {
    let family = BscFamily::new(a.lt, a.lq)?;
    let xs = abscissae(a.from, a.to, a.step)?;
    let mode = match a.mode {
        Mode::RVsAlpha => SweepMode::RVsAlpha,
        Mode::AlphaVsKappa => SweepMode::AlphaVsKappa,
        Mode::AlphaVsLambdaT => SweepMode::AlphaVsLambdaT,
    };
    let compare = a.compare == Compare::Gungor;
    let fixed = SweepFixed { r: a.r, kappa: a.kappa, j: a.j };
    let curve = sweep_bsc(&family, mode, fixed, &xs, &bsc_search(&a.grid), compare)?;

    let x_label = match a.mode {
        Mode::RVsAlpha => "r",
        Mode::AlphaVsKappa => "kappa",
        Mode::AlphaVsLambdaT => "lambda_t",
    };
    if let Some(svg) = &a.svg {
        let mut curves = vec![("closed region", curve.iter().map(|c| (c.x, c.value)).collect())];
        if compare {
            curves.push(("comparison", curve.iter().filter_map(|c| c.gungor.map(|g| (c.x, g))).collect()));
        }
        write_svg(svg, x_label, "alpha", &curves)?;
    }

    let path = a.out.output.as_deref();
    match a.format {
        Format::Json => write_json(
            path,
            &json!({
                "mode": x_label,
                "fixed": { "r": a.r, "kappa": a.kappa, "j": a.j, "lambda_t": a.lt, "lambda_q": a.lq },
                "points": curve,
            }),
        ),
        Format::Csv => {
            let mut header = vec!["x", "value", "binding_constraint"];
            if compare {
                header.push("gungor_value");
            }
            let rows: Vec<Vec<String>> = curve
                .iter()
                .map(|c| {
                    let mut row = vec![g12(c.x), g12(c.value), c.binding.clone()];
                    if let Some(g) = c.gungor {
                        row.push(g12(g));
                    }
                    row
                })
                .collect();
            write_csv(path, &header, &rows)
        }
    }
}

fn project(a: ProjectArgs) -> Result<(), CliError> {
    let reference = match &a.t_kernel {
        Some(s) => CondDist::new(parse_matrix("--t-kernel", s)?)?,
        None => CondDist::bsc(a.lt)?,
    };
    let rho = CondDist::new(parse_matrix("--rho", &a.rho)?)?;
    let sigma = Dist::new(parse_vector("--sigma", &a.sigma)?)?;
    let target = match &a.target {
        Some(s) => CondDist::new(parse_matrix("--target", s)?)?,
        None => compose(&reference, &rho)?,
    };
    if !(a.tol > 0.0) || a.max_iter == 0 {
        return Err(usage("--tol must be positive and --max-iter at least 1"));
    }
    let mode = match a.mode {
        ProjectMode::Both => ConstraintMode::BothMarginals,
        ProjectMode::Single => ConstraintMode::OutputMarginalOnly,
    };
    let problem = ProjectionProblem { reference, rho, sigma, target, mode };
    let opts = SolverOptions { tol: a.tol, max_iter: a.max_iter, ..SolverOptions::default() };
    let result = match a.mode {
        ProjectMode::Both => f_project_with(&problem, &opts)?,
        ProjectMode::Single => f_project_single_with(&problem, &opts)?,
    };

    let path = a.out.output.as_deref();
    match a.format {
        Format::Json => write_json(path, &serde_json::to_value(&result)?)?,
        Format::Csv => write_csv(
            path,
            &["quantity", "value"],
            &[
                vec!["value".into(), g12(result.value)],
                vec!["iterations".into(), result.iterations.to_string()],
                vec!["converged".into(), result.converged.to_string()],
            ],
        )?,
    }
    if !result.converged {
        return Err(CliError::NonConvergence(format!("solver stopped after {} iterations without converging", result.iterations)));
    }
    Ok(())
}

fn lfunc(a: LfuncArgs) -> Result<(), CliError> {
    let (pair, _) = channels(&a.channels)?;
    let (aux, desc) = auxiliary(&a.aux, 1)?.ok_or_else(|| usage("give --rho-flip or --rho/--sigma/--tau"))?;
    let res = l_func(&pair.t, &pair.q, &aux.rho, &aux.sigma, &aux.tau, nu_search(a.search, a.nu_steps))?;
    let path = a.out.output.as_deref();
    match a.format {
        Format::Json => write_json(path, &json!({ "auxiliary": desc, "result": res })),
        Format::Csv => write_csv(
            path,
            &["quantity", "value"],
            &[
                vec!["value".into(), g12(res.value)],
                vec!["penalty".into(), g12(res.penalty)],
                vec!["secrecy".into(), g12(res.secrecy)],
            ],
        ),
    }
}

fn transform(a: TransformArgs) -> Result<(), CliError> {
    let p = parse_point(&a.point)?;
    let out = theorem2_transform(&p, a.beta, a.j)?;
    let path = a.out.output.as_deref();
    match a.format {
        Format::Json => write_json(path, &json!({ "input": point_json(&p), "beta": a.beta, "j": a.j, "output": point_json(&out) })),
        Format::Csv => write_csv(path, &["r", "alpha", "kappa"], &[vec![g12(out.r), g12(out.alpha), g12(out.kappa)]]),
    }
}

fn to_f64(r: &BigRational) -> f64 {
    num_traits::ToPrimitive::to_f64(r).unwrap_or(f64::NAN)
}

/// One output row: `quantity, value, exact, method, stderr`.
fn row(quantity: String, value: f64, exact: Option<&BigRational>, method: &str, stderr: Option<f64>) -> Vec<String> {
    vec![
        quantity,
        g12(value),
        exact.map_or(String::new(), |r| r.to_string()),
        method.to_string(),
        stderr.map_or(String::new(), g12),
    ]
}

const SIM_HEADER: [&str; 5] = ["quantity", "value", "exact", "method", "stderr"];

fn mean_stderr(v: &[f64]) -> (f64, Option<f64>) {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    if v.len() < 2 {
        return (mean, None);
    }
    let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, Some((var / n).sqrt()))
}

fn simulate_simmons(a: SimmonsArgs) -> Result<(), CliError> {
    if a.codes == 0 {
        return Err(usage("--codes must be at least 1"));
    }
    let codes: Vec<SimmonsCode> = (0..a.codes as u64)
        .into_par_iter()
        .map(|i| SimmonsCode::build(a.n, a.alphabet, a.keys, a.seed.wrapping_add(i)))
        .collect::<Result<_, SimError>>()?;
    let stats: Vec<[BigRational; 3]> =
        codes.iter().map(|c| [c.substitution_success(), c.impersonation_success(), c.acceptance_probability()]).collect();
    let params = codes[0].params().clone();
    let bound = (a.keys as f64).powf(-0.5);

    let mut rows = Vec::new();
    let names = ["substitution", "impersonation", "acceptance"];
    for (i, name) in names.iter().enumerate() {
        if a.codes == 1 {
            rows.push(row(name.to_string(), to_f64(&stats[0][i]), Some(&stats[0][i]), "exact", None));
        } else {
            let vals: Vec<f64> = stats.iter().map(|s| to_f64(&s[i])).collect();
            let (m, se) = mean_stderr(&vals);
            rows.push(row(name.to_string(), m, None, "exact-mean", se));
        }
    }
    rows.push(row("half_key_bound".into(), bound, None, "closed-form", None));
    rows.push(row("rate".into(), params.rate(), None, "closed-form", None));
    rows.push(row("key_rate".into(), params.key_rate(), None, "closed-form", None));

    let path = a.out.output.as_deref();
    match a.format {
        Format::Csv => write_csv(path, &SIM_HEADER, &rows),
        Format::Json => {
            let per_code: Vec<Value> = codes
                .iter()
                .zip(&stats)
                .map(|(c, s)| {
                    json!({
                        "code": c.to_json(),
                        "substitution": s[0].to_string(),
                        "impersonation": s[1].to_string(),
                        "acceptance": s[2].to_string(),
                    })
                })
                .collect();
            write_json(path, &json!({ "summary": rows_json(&rows), "codes": per_code }))
        }
    }
}

fn rows_json(rows: &[Vec<String>]) -> Value {
    Value::Array(
        rows.iter()
            .map(|r| {
                let obj: serde_json::Map<String, Value> =
                    SIM_HEADER.iter().zip(r).map(|(k, v)| (k.to_string(), Value::String(v.clone()))).collect();
                Value::Object(obj)
            })
            .collect(),
    )
}

fn rational_channel(flip: &str, kernel: &Option<String>, field: &str) -> Result<RationalKernel, CliError> {
    match kernel {
        Some(s) => parse_rational_matrix(field, s),
        None => {
            let p = parse_rational(flip).map_err(|e| usage(format!("{field}: {e}")))?;
            Ok(RationalKernel::bsc(&p)?)
        }
    }
}

fn simulate_code(a: CodeArgs) -> Result<(), CliError> {
    let t = rational_channel(&a.t_flip, &a.t_kernel, "--t-flip")?;
    let q = rational_channel(&a.q_flip, &a.q_kernel, "--q-flip")?;
    match a.kind {
        Kind::Keyed => {
            let code = match &a.codewords {
                Some(s) => {
                    let words = parse_counts("--codewords", s)?
                        .into_iter()
                        .map(|r| r.into_iter().map(|v| v as usize).collect())
                        .collect();
                    SimmonsCode::from_codewords(a.n, a.alphabet, words)?
                }
                None => SimmonsCode::build(a.n, a.alphabet, a.keys, a.seed)?,
            };
            let desc = code.to_json();
            run_code(&a, code, desc, &t, &q)
        }
        Kind::Typeclass => {
            let need = |v: &Option<String>, f: &str| v.clone().ok_or_else(|| usage(format!("typeclass codes need {f}")));
            let tau = parse_counts("--tau", &need(&a.tau, "--tau")?)?;
            let [tau] = <[Vec<u64>; 1]>::try_from(tau).map_err(|_| usage("--tau is a single row"))?;
            let spec = TypeClassSpec {
                n: a.n,
                rounds: a.j,
                message_hat: a.message_hat,
                message_tilde: a.message_tilde,
                keys: a.keys,
                tau: NType::new(tau)?,
                sigma: CondNType::new(parse_counts("--sigma", &need(&a.sigma, "--sigma")?)?)?,
                rho: CondNType::new(parse_counts("--rho", &need(&a.rho, "--rho")?)?)?,
                t: t.clone(),
            };
            let code = TypeClassCode::build(spec, a.seed)?;
            let desc = code.to_json();
            run_code(&a, code, desc, &t, &q)
        }
    }
}

fn run_code<C: AaCode>(a: &CodeArgs, code: C, desc: Value, t: &RationalKernel, q: &RationalKernel) -> Result<(), CliError> {
    match a.remap {
        Some(tilde) => {
            let code = RemappedCode::build(code, tilde, a.seed)?;
            let desc = json!({ "kind": "remapped", "base": desc, "extra_keys": code.extra_keys(), "maps": code.maps() });
            report_code(a, &code, desc, t, q)
        }
        None => report_code(a, &code, desc, t, q),
    }
}

fn report_code(a: &CodeArgs, code: &impl AaCode, desc: Value, t: &RationalKernel, q: &RationalKernel) -> Result<(), CliError> {
    let params = code.params().clone();
    let mut rows = Vec::new();
    let mut json_out = serde_json::Map::new();

    match epsilon_exact(code, t) {
        Ok(eps) => {
            for (i, e) in eps.per_round.iter().enumerate() {
                rows.push(row(format!("epsilon_round_{}", i + 1), to_f64(e), Some(e), "exact", None));
            }
            rows.push(row("epsilon".into(), to_f64(&eps.value), Some(&eps.value), "exact", None));
            json_out.insert("epsilon".into(), serde_json::to_value(&eps)?);
        }
        Err(SimError::Budget { .. }) => {
            let mut ests = Vec::new();
            for round in 0..params.rounds {
                let est = epsilon_mc(code, t, round, a.fallback_samples, a.seed)?;
                rows.push(row(format!("epsilon_round_{}", round + 1), est.mean, None, "monte-carlo", Some(est.stderr)));
                ests.push(est);
            }
            json_out.insert("epsilon_monte_carlo".into(), serde_json::to_value(&ests)?);
        }
        Err(e) => return Err(e.into()),
    }

    let auth = authentication_exact(code, q)?;
    for (i, w) in auth.omega.iter().enumerate() {
        rows.push(row(format!("omega_round_{}", i + 1), to_f64(w), Some(w), "exact", None));
    }
    rows.push(row("alpha".into(), auth.alpha, None, "exact", None));
    json_out.insert("omega".into(), json!(auth.omega.iter().map(|w| w.to_string()).collect::<Vec<_>>()));
    json_out.insert("alpha".into(), if auth.alpha.is_finite() { json!(auth.alpha) } else { json!("inf") });

    if a.mc_samples > 0 {
        let mut ests = Vec::new();
        for round in 0..params.rounds {
            let est = epsilon_mc(code, t, round, a.mc_samples, a.seed)?;
            rows.push(row(format!("epsilon_mc_round_{}", round + 1), est.mean, None, "monte-carlo", Some(est.stderr)));
            ests.push(est);
        }
        json_out.insert("epsilon_mc".into(), serde_json::to_value(&ests)?);
    }
    rows.push(row("rate".into(), params.rate(), None, "closed-form", None));
    rows.push(row("key_rate".into(), params.key_rate(), None, "closed-form", None));

    let path = a.out.output.as_deref();
    match a.format {
        Format::Csv => write_csv(path, &SIM_HEADER, &rows),
        Format::Json => {
            json_out.insert("params".into(), serde_json::to_value(&params)?);
            json_out.insert("t".into(), json!(t.to_strings()));
            json_out.insert("q".into(), json!(q.to_strings()));
            json_out.insert("code".into(), desc);
            write_json(path, &Value::Object(json_out))
        }
    }
}
