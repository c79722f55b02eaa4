//! One function per subcommand. Each builds a [`Report`] carrying the full
//! parameter set and the computed payload; partial results (a density table
//! with budget-skipped rows, say) still emit, with the skip reflected in the
//! exit code.

use clap::ValueEnum;
use densimean::engine::{self, DensityLikeSpec, Ladder, ReportRequest};
use densimean::fields::{
    divisor_order_class, normal_count_formula, normal_density, normal_density_spec,
    normal_mean_bounds, normal_variance_bound, primitive_density, primitive_density_spec,
    primitive_fraction, primitive_mean_witness, proportion_bound, PrimePower,
};
use densimean::numtheory::{self, euler_phi};
use densimean::oracle::{self, Tower};
use densimean::{Error, Limits};
use num_bigint::BigUint;
use serde_json::json;

use crate::config::Settings;
use crate::report::{Cell, Report};
use crate::CliError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum MeanFamily {
    EulerRatio,
    Primitive,
    Normal,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum DensityFamily {
    Primitive,
    Normal,
}

fn family_spec(
    family: MeanFamily,
    q: Option<u64>,
    limits: Limits,
) -> Result<(DensityLikeSpec, Ladder), CliError> {
    match family {
        MeanFamily::EulerRatio => {
            if q.is_some() {
                return Err(CliError::usage(
                    "--q does not apply to the euler-ratio family".into(),
                ));
            }
            Ok((
                DensityLikeSpec::euler_ratio(limits),
                Ladder::integer_lcm(limits),
            ))
        }
        MeanFamily::Primitive => {
            let q = require_q(q)?;
            Ok((
                primitive_density_spec(q, limits)?,
                Ladder::prime_power_lcm(BigUint::from(q), limits)?,
            ))
        }
        MeanFamily::Normal => {
            let q = require_q(q)?;
            Ok((
                normal_density_spec(q, limits)?,
                Ladder::prime_power_lcm(BigUint::from(q), limits)?,
            ))
        }
    }
}

fn require_q(q: Option<u64>) -> Result<u64, CliError> {
    q.ok_or_else(|| CliError::usage("this family needs --q".into()))
}

#[allow(clippy::too_many_arguments)]
pub fn mean(
    family: MeanFamily,
    q: Option<u64>,
    t_max: usize,
    alpha: f64,
    log_mean_depth: Option<u64>,
    empirical_xs: Vec<u64>,
    settings: &Settings,
) -> Result<Report, CliError> {
    if t_max == 0 {
        return Err(CliError::usage("--t-max must be at least 1".into()));
    }
    if !(alpha >= 1.0) {
        return Err(CliError::usage("--alpha must be at least 1".into()));
    }
    // each primitive-family log-mean term costs a q^d - 1 factorization, so
    // its default depth is far shallower than the cheap families'
    let depth = log_mean_depth.unwrap_or(match family {
        MeanFamily::Primitive => 50,
        _ => 1000,
    });
    let (spec, mut ladder) = family_spec(family, q, settings.limits)?;
    let request = ReportRequest {
        alpha,
        t_max,
        log_mean_depth: depth,
        empirical_xs: empirical_xs.clone(),
    };
    let report = engine::mean_value_report(&spec, &mut ladder, &request)?;
    report.validate()?;

    let mut params = settings.params();
    params.insert("family".into(), format!("{family:?}").to_lowercase());
    if let Some(q) = q {
        params.insert("q".into(), q.to_string());
    }
    params.insert("alpha".into(), format!("{alpha}"));
    params.insert("t_max".into(), t_max.to_string());
    params.insert("log_mean_depth".into(), depth.to_string());
    params.insert(
        "empirical_x".into(),
        empirical_xs
            .iter()
            .map(u64::to_string)
            .collect::<Vec<_>>()
            .join(","),
    );

    let mut rows = Vec::new();
    for (t, a) in report.t_values.iter().zip(&report.mean_trajectory) {
        rows.push(vec![
            Cell::Text("mean".into()),
            Cell::Int(*t as i64),
            Cell::Real(*a),
        ]);
    }
    if let Some(v) = report.truncated_log_mean {
        rows.push(vec![
            Cell::Text("log_mean".into()),
            Cell::Int(depth as i64),
            Cell::Real(v),
        ]);
    }
    if let Some(v) = report.geometric_lower {
        rows.push(vec![
            Cell::Text("geometric_lower".into()),
            Cell::Int(depth as i64),
            Cell::Real(v),
        ]);
    }
    rows.push(vec![
        Cell::Text("variance".into()),
        Cell::Int(t_max as i64),
        Cell::Real(report.variance_estimate),
    ]);
    for d in &report.diagnostics {
        rows.push(vec![
            Cell::Text("empirical".into()),
            Cell::Int(d.x as i64),
            Cell::Real(d.empirical),
        ]);
        rows.push(vec![
            Cell::Text("window_index".into()),
            Cell::Int(d.x as i64),
            Cell::Int(d.window_t as i64),
        ]);
        rows.push(vec![
            Cell::Text("window_mean".into()),
            Cell::Int(d.x as i64),
            Cell::Real(d.ladder_mean),
        ]);
        rows.push(vec![
            Cell::Text("window_gap".into()),
            Cell::Int(d.x as i64),
            Cell::Real(d.gap),
        ]);
    }

    Ok(Report {
        command: "mean",
        params,
        header: vec!["series", "index", "value"],
        rows,
        data: serde_json::to_value(&report)
            .map_err(|e| CliError::internal(format!("report serialization: {e}")))?,
        exit: 0,
    })
}

pub fn density(
    family: DensityFamily,
    q: u64,
    range: (u64, u64),
    settings: &Settings,
) -> Result<Report, CliError> {
    let limits = settings.limits;
    let (lo, hi) = range;
    let mut params = settings.params();
    params.insert("q".into(), q.to_string());
    params.insert("n_range".into(), format!("{lo}..{hi}"));

    match family {
        DensityFamily::Primitive => {
            params.insert("family".into(), "primitive".into());
            let mut rows = Vec::new();
            let mut json_rows = Vec::new();
            let mut skipped = Vec::new();
            for n in lo..=hi {
                match primitive_density(q, n, &limits) {
                    Ok(f) => {
                        let fraction = primitive_fraction(q, n, &limits)?;
                        let gap = f - fraction;
                        rows.push(vec![
                            Cell::Int(n as i64),
                            Cell::Real(f),
                            Cell::Real(fraction),
                            Cell::Real(gap),
                        ]);
                        json_rows.push(json!({
                            "n": n,
                            "density": f,
                            "fraction": fraction,
                            "gap": gap,
                        }));
                    }
                    Err(Error::FactorBudget { .. }) => {
                        eprintln!("warning: n={n}: factoring budget exhausted, row skipped");
                        skipped.push(n);
                    }
                    Err(e) => return Err(e.into()),
                }
            }
            let exit = if skipped.is_empty() { 0 } else { 3 };
            Ok(Report {
                command: "density",
                params,
                header: vec!["n", "density", "fraction", "gap"],
                rows,
                data: json!({"rows": json_rows, "skipped": skipped}),
                exit,
            })
        }
        DensityFamily::Normal => {
            params.insert("family".into(), "normal".into());
            let mut rows = Vec::new();
            let mut json_rows = Vec::new();
            for n in lo..=hi {
                let mu = normal_density(q, n, &limits)?;
                let count = normal_count_formula(q, n, &limits)?;
                let n32 = u32::try_from(n)
                    .map_err(|_| CliError::usage(format!("n = {n} out of range")))?;
                let ratio = numtheory::ratio_f64(&count, &BigUint::from(q).pow(n32));
                let gap = (mu - ratio).abs();
                rows.push(vec![
                    Cell::Int(n as i64),
                    Cell::Real(mu),
                    Cell::Big(count.to_string()),
                    Cell::Real(ratio),
                    Cell::Real(gap),
                ]);
                json_rows.push(json!({
                    "n": n,
                    "density": mu,
                    "count": count.to_string(),
                    "count_ratio": ratio,
                    "gap": gap,
                }));
            }
            Ok(Report {
                command: "density",
                params,
                header: vec!["n", "density", "count", "count_ratio", "gap"],
                rows,
                data: json!({"rows": json_rows}),
                exit: 0,
            })
        }
    }
}

pub fn oracle(q: u64, n: u32, settings: &Settings) -> Result<Report, CliError> {
    let limits = settings.limits;
    let pp = PrimePower::new(q)?;
    if n == 0 {
        return Err(CliError::usage("--n must be at least 1".into()));
    }
    let tower = Tower::build(pp.base(), pp.exponent(), n, &limits)?;
    let primitive_count = oracle::count_primitive(tower.top_field(), &limits)?;
    let primitive_formula = euler_phi(&(BigUint::from(q).pow(n) - 1u32), &limits)?;
    let normal_count = tower.count_normal();
    let normal_formula = normal_count_formula(q, n as u64, &limits)?;
    let agree = BigUint::from(primitive_count) == primitive_formula
        && BigUint::from(normal_count) == normal_formula;

    let mut params = settings.params();
    params.insert("q".into(), q.to_string());
    params.insert("n".into(), n.to_string());
    Ok(Report {
        command: "oracle",
        params,
        header: vec![
            "q",
            "n",
            "primitive_count",
            "primitive_formula",
            "normal_count",
            "normal_formula",
            "match",
        ],
        rows: vec![vec![
            Cell::Int(q as i64),
            Cell::Int(n as i64),
            Cell::Big(primitive_count.to_string()),
            Cell::Big(primitive_formula.to_string()),
            Cell::Big(normal_count.to_string()),
            Cell::Big(normal_formula.to_string()),
            Cell::Bool(agree),
        ]],
        data: json!({
            "q": q,
            "n": n,
            "primitive_count": primitive_count.to_string(),
            "primitive_formula": primitive_formula.to_string(),
            "normal_count": normal_count.to_string(),
            "normal_formula": normal_formula.to_string(),
            "match": agree,
        }),
        exit: 0,
    })
}

pub fn bounds_sigma0(max: u64, settings: &Settings) -> Result<Report, CliError> {
    if max < 3 {
        return Err(CliError::usage("--max must be at least 3".into()));
    }
    if max > 100_000_000 {
        return Err(CliError::usage(
            "--max above 1e8 would need several GB for the sieve".into(),
        ));
    }
    let n = max as usize;
    let mut counts = vec![0u32; n + 1];
    for i in 1..=n {
        let mut j = i;
        while j <= n {
            counts[j] += 1;
            j += i;
        }
    }
    let mut worst_m = 0u64;
    let mut worst_ratio = 0.0f64;
    for m in 3..=n {
        let ceiling = ((m as f64).ln() * 1.1 / (m as f64).ln().ln()).exp();
        let ratio = counts[m] as f64 / ceiling;
        if ratio > worst_ratio {
            worst_ratio = ratio;
            worst_m = m as u64;
        }
    }
    let all_below = worst_ratio < 1.0;

    let mut params = settings.params();
    params.insert("max".into(), max.to_string());
    Ok(Report {
        command: "bounds",
        params,
        header: vec!["max", "worst_m", "worst_sigma0", "worst_ratio", "all_below"],
        rows: vec![vec![
            Cell::Int(max as i64),
            Cell::Int(worst_m as i64),
            Cell::Int(counts[worst_m as usize] as i64),
            Cell::Real(worst_ratio),
            Cell::Bool(all_below),
        ]],
        data: json!({
            "kind": "sigma0",
            "max": max,
            "worst_m": worst_m,
            "worst_sigma0": counts[worst_m as usize],
            "worst_ratio": worst_ratio,
            "all_below": all_below,
        }),
        exit: 0,
    })
}

pub fn bounds_normal_big(q: u64, t_max: usize, settings: &Settings) -> Result<Report, CliError> {
    if t_max == 0 {
        return Err(CliError::usage("--t-max must be at least 1".into()));
    }
    let limits = settings.limits;
    let (lower, upper) = normal_mean_bounds(q)?;
    let spec = normal_density_spec(q, limits)?;
    let mut ladder = Ladder::prime_power_lcm(BigUint::from(q), limits)?;
    ladder.extend_to(t_max)?;
    let mut means = Vec::with_capacity(t_max);
    for t in 1..=t_max {
        means.push(engine::convolution_mean(&spec, &ladder, t, 1.0)?);
    }
    let all_inside = means.iter().all(|&a| lower < a && a <= upper + 1e-12);

    let mut params = settings.params();
    params.insert("q".into(), q.to_string());
    params.insert("t_max".into(), t_max.to_string());
    let mut rows = vec![
        vec![
            Cell::Text("lower".into()),
            Cell::Int(0),
            Cell::Real(lower),
        ],
        vec![
            Cell::Text("upper".into()),
            Cell::Int(0),
            Cell::Real(upper),
        ],
    ];
    for (i, a) in means.iter().enumerate() {
        rows.push(vec![
            Cell::Text("mean".into()),
            Cell::Int(i as i64 + 1),
            Cell::Real(*a),
        ]);
    }
    rows.push(vec![
        Cell::Text("all_inside".into()),
        Cell::Int(0),
        Cell::Bool(all_inside),
    ]);
    Ok(Report {
        command: "bounds",
        params,
        header: vec!["series", "index", "value"],
        rows,
        data: json!({
            "kind": "normal-big",
            "q": q,
            "lower": lower,
            "upper": upper,
            "t_values": (1..=t_max).collect::<Vec<_>>(),
            "means": means,
            "all_inside": all_inside,
        }),
        exit: 0,
    })
}

pub fn bounds_variance(q: u64, t_max: usize, settings: &Settings) -> Result<Report, CliError> {
    if t_max == 0 {
        return Err(CliError::usage("--t-max must be at least 1".into()));
    }
    let limits = settings.limits;
    let cap = normal_variance_bound(q)?;
    let spec = normal_density_spec(q, limits)?;
    let mut ladder = Ladder::prime_power_lcm(BigUint::from(q), limits)?;
    ladder.extend_to(t_max)?;
    let variance = engine::variance_estimate(&spec, &ladder, t_max)?;
    let within = variance >= -1e-9 && variance <= cap + 0.05;

    let mut params = settings.params();
    params.insert("q".into(), q.to_string());
    params.insert("t_max".into(), t_max.to_string());
    Ok(Report {
        command: "bounds",
        params,
        header: vec!["q", "t", "variance", "cap", "within"],
        rows: vec![vec![
            Cell::Int(q as i64),
            Cell::Int(t_max as i64),
            Cell::Real(variance),
            Cell::Real(cap),
            Cell::Bool(within),
        ]],
        data: json!({
            "kind": "variance",
            "q": q,
            "t": t_max,
            "variance": variance,
            "cap": cap,
            "within": within,
        }),
        exit: 0,
    })
}

pub fn bounds_proportion(
    q: u64,
    margin: Option<f64>,
    settings: &Settings,
) -> Result<Report, CliError> {
    let _ = settings;
    let margin = margin.unwrap_or(1.0 / (q as f64).sqrt());
    let bound = proportion_bound(q, margin)?;
    let meets = bound.threshold >= 0.95;

    let mut params = settings.params();
    params.insert("q".into(), q.to_string());
    params.insert("margin".into(), format!("{margin}"));
    Ok(Report {
        command: "bounds",
        params,
        header: vec!["q", "margin", "threshold", "fraction", "meets_0_95"],
        rows: vec![vec![
            Cell::Int(q as i64),
            Cell::Real(margin),
            Cell::Real(bound.threshold),
            Cell::Real(bound.fraction),
            Cell::Bool(meets),
        ]],
        data: json!({
            "kind": "proportion",
            "q": q,
            "margin": margin,
            "threshold": bound.threshold,
            "fraction": bound.fraction,
            "meets_0_95": meets,
        }),
        exit: 0,
    })
}

pub fn bounds_order_sums(q: u64, j_max: u64, settings: &Settings) -> Result<Report, CliError> {
    if j_max == 0 {
        return Err(CliError::usage("--j-max must be at least 1".into()));
    }
    let limits = settings.limits;
    let mut rows = Vec::new();
    let mut json_rows = Vec::new();
    for j in 1..=j_max {
        let class = divisor_order_class(q, j, &limits)?;
        let cap = (q as f64).powf(j as f64 / 2.0);
        let ok = class.totient_ratio_sum <= cap;
        let members: Vec<String> = class.members.iter().map(|m| m.to_string()).collect();
        rows.push(vec![
            Cell::Int(j as i64),
            Cell::Int(class.members.len() as i64),
            Cell::Real(class.totient_ratio_sum),
            Cell::Real(class.per_order_weight),
            Cell::Real(cap),
            Cell::Bool(ok),
            Cell::Text(members.join(";")),
        ]);
        json_rows.push(json!({
            "j": j,
            "member_count": class.members.len(),
            "totient_ratio_sum": class.totient_ratio_sum,
            "per_order_weight": class.per_order_weight,
            "cap": cap,
            "ok": ok,
            "members": members,
        }));
    }

    let mut params = settings.params();
    params.insert("q".into(), q.to_string());
    params.insert("j_max".into(), j_max.to_string());
    Ok(Report {
        command: "bounds",
        params,
        header: vec![
            "j",
            "member_count",
            "totient_ratio_sum",
            "per_order_weight",
            "cap",
            "ok",
            "members",
        ],
        rows,
        data: json!({"kind": "order-sums", "q": q, "rows": json_rows}),
        exit: 0,
    })
}

pub fn witness(q: u64, k_max: usize, settings: &Settings) -> Result<Report, CliError> {
    if k_max == 0 {
        return Err(CliError::usage("--k-max must be at least 1".into()));
    }
    let k_max = u32::try_from(k_max)
        .map_err(|_| CliError::usage(format!("--k-max {k_max} out of range")))?;
    let steps = primitive_mean_witness(q, k_max, &settings.limits)?;
    let mut rows = Vec::new();
    let mut json_rows = Vec::new();
    for step in &steps {
        rows.push(vec![
            Cell::Int(step.index as i64),
            Cell::Big(step.prime_product.to_string()),
            Cell::Big(step.exponent_lcm.to_string()),
            Cell::Real(step.bound),
        ]);
        json_rows.push(json!({
            "k": step.index,
            "prime_product": step.prime_product.to_string(),
            "exponent_lcm": step.exponent_lcm.to_string(),
            "bound": step.bound,
        }));
    }

    let mut params = settings.params();
    params.insert("q".into(), q.to_string());
    params.insert("k_max".into(), k_max.to_string());
    Ok(Report {
        command: "witness",
        params,
        header: vec!["k", "prime_product", "exponent_lcm", "bound"],
        rows,
        data: json!({"q": q, "rows": json_rows}),
        exit: 0,
    })
}

pub fn cache_stats(settings: &Settings) -> Result<Report, CliError> {
    let entries = crate::cachefile::stats(&settings.cache_path);
    let mut params = settings.params();
    params.insert("action".into(), "stats".into());
    Ok(Report {
        command: "cache",
        params,
        header: vec!["path", "entries"],
        rows: vec![vec![
            Cell::Text(settings.cache_path.display().to_string()),
            Cell::Int(entries as i64),
        ]],
        data: json!({
            "action": "stats",
            "path": settings.cache_path.display().to_string(),
            "entries": entries,
        }),
        exit: 0,
    })
}

pub fn cache_clear(settings: &Settings) -> Result<Report, CliError> {
    let removed = crate::cachefile::clear(&settings.cache_path)?;
    let mut params = settings.params();
    params.insert("action".into(), "clear".into());
    Ok(Report {
        command: "cache",
        params,
        header: vec!["path", "removed"],
        rows: vec![vec![
            Cell::Text(settings.cache_path.display().to_string()),
            Cell::Bool(removed),
        ]],
        data: json!({
            "action": "clear",
            "path": settings.cache_path.display().to_string(),
            "removed": removed,
        }),
        exit: 0,
    })
}
