//! The four subcommands. Timings go to stderr so result files stay
//! byte-identical across reruns.

use std::time::Instant;

use serde::Serialize;

use sdot::dual::{DualProblem, PotentialVector, SimplexWeights, SolveOptions};
use sdot::functionals::{fd_directional_quotient, gamma_deriv_from, hadamard_delta_deriv, Functional};
use sdot::inference::{
    band_radius, bootstrap_delta, bootstrap_gamma, confidence_band, confidence_set_radius, covariance_model,
    derive_seed, limit_variance_gamma, plugin_estimate, sample_limit_delta, sample_limit_gamma, streams,
    super_consistency_probe, BootstrapConfig, CovarianceModel, LimitLawSample,
};
use sdot::measure::{Backend, FacetEstimator, FacetTable};
use sdot::{ReferenceMeasure, SiteSet};

use crate::config::LoadedConfig;
use crate::output::{num, opt_num, OutputDir};
use crate::studies::{coverage_study, weighted_grid, CoverageSettings};
use crate::CliError;

/// Seed stream for validation directions.
const VALIDATE_STREAM: u64 = 6;

fn stage(name: &str, start: Instant) {
    eprintln!("[{name}] {:.3?}", start.elapsed());
}

fn coords(sites: &SiteSet, i: usize) -> Vec<String> {
    sites.point(i).iter().map(|v| num(*v)).collect()
}

fn coord_header(prefix: &str, d: usize) -> Vec<String> {
    (0..d).map(|k| format!("{prefix}{k}")).collect()
}

fn estimator_name(e: FacetEstimator) -> &'static str {
    match e {
        FacetEstimator::ExactLineIntegral => "exact",
        FacetEstimator::ThinSlabMonteCarlo => "thin_slab_mc",
    }
}

fn write_facets(out: &OutputDir, name: &str, table: &FacetTable, mc_seed: u64) -> Result<(), CliError> {
    let rows: Vec<Vec<String>> = table
        .records()
        .iter()
        .map(|r| {
            let mc = r.estimator == FacetEstimator::ThinSlabMonteCarlo;
            vec![
                r.pair.0.to_string(),
                r.pair.1.to_string(),
                num(r.surface_mass),
                opt_num(r.extent),
                estimator_name(r.estimator).to_string(),
                opt_num(r.std_error),
                if mc { mc_seed.to_string() } else { String::new() },
            ]
        })
        .collect();
    out.csv(
        name,
        &["i", "j", "surface_mass", "extent", "estimator", "std_error", "mc_seed"],
        &rows,
    )?;
    Ok(())
}

/// Population weights, or the empirical frequencies of configured counts.
fn target_weights(cfg: &LoadedConfig) -> Result<SimplexWeights, CliError> {
    if let Some(p) = cfg.weights()? {
        return Ok(p);
    }
    let counts = cfg.sample_counts()?.expect("config has weights or counts");
    Ok(SimplexWeights::from_counts(&counts)?)
}

pub fn cmd_solve(cfg: &LoadedConfig, out: &OutputDir) -> Result<(), CliError> {
    let start = Instant::now();
    let sites = cfg.sites()?;
    let measure = cfg.measure()?;
    let problem = DualProblem::new(&measure, &sites)?;
    let q = target_weights(cfg)?;
    let report = problem.solve(&q, &SolveOptions::default())?;
    let z = report.z.as_slice();
    let diagram = problem.diagram(z)?;
    let masses = measure.cell_masses(&diagram)?;
    let mc_seed = measure.mc_config().seed;
    let d = sites.dim();
    let mut header = vec!["site".to_string()];
    header.extend(coord_header("x", d));
    header.extend(["z", "target", "mass", "backend", "std_error", "mc_seed"].map(String::from));
    let rows: Vec<Vec<String>> = (0..sites.len())
        .map(|i| {
            let m = masses[i];
            let mut row = vec![i.to_string()];
            row.extend(coords(&sites, i));
            row.extend([
                num(z[i]),
                num(q.as_slice()[i]),
                num(m.value),
                m.backend.as_str().to_string(),
                opt_num(m.std_error),
                if m.backend == Backend::MonteCarlo { mc_seed.to_string() } else { String::new() },
            ]);
            row
        })
        .collect();
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    out.csv("potentials.csv", &header, &rows)?;
    write_facets(out, "facets.csv", &measure.facet_table(&diagram)?, mc_seed)?;
    out.csv(
        "solve_report.csv",
        &["iterations", "gradient_norm", "warm_start_steps", "mass_floor", "converged"],
        &[vec![
            report.iterations.to_string(),
            num(report.gradient_norm),
            report.warm_start_steps.to_string(),
            num(report.mass_floor),
            report.converged.to_string(),
        ]],
    )?;
    stage("solve", start);
    Ok(())
}

#[derive(Serialize)]
struct DrawRecord<'a> {
    statistic: &'a str,
    parameter: &'a str,
    source: &'a str,
    index: usize,
    value: f64,
}

fn draw_records<'a>(statistic: &'a str, parameter: &'a str, source: &'a str, draws: &[f64]) -> Vec<DrawRecord<'a>> {
    draws
        .iter()
        .enumerate()
        .map(|(index, &value)| DrawRecord {
            statistic,
            parameter,
            source,
            index,
            value,
        })
        .collect()
}

fn summary_row(statistic: &str, parameter: &str, sample: &LimitLawSample) -> Vec<String> {
    vec![
        statistic.to_string(),
        parameter.to_string(),
        sample.n_draws().to_string(),
        num(sample.mean()),
        num(sample.variance()),
        num(sample.std_error()),
    ]
}

/// One statistic's draws for the histogram table.
struct HistogramInput {
    statistic: &'static str,
    parameter: String,
    limit: Option<Vec<f64>>,
    bootstrap: Option<Vec<f64>>,
    analytic: Option<Box<dyn Fn(f64) -> f64>>,
}

fn histogram_rows(inputs: &[HistogramInput], bins: usize) -> Vec<Vec<String>> {
    let mut rows = Vec::new();
    for h in inputs {
        let all: Vec<f64> = h.limit.iter().chain(h.bootstrap.iter()).flatten().copied().collect();
        if all.is_empty() {
            continue;
        }
        let lo = all.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = all.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let width = if hi > lo { (hi - lo) / bins as f64 } else { 1.0 };
        let density = |draws: &Option<Vec<f64>>, k: usize| -> String {
            draws.as_ref().map_or(String::new(), |d| {
                let count = d
                    .iter()
                    .filter(|&&v| {
                        let b = (((v - lo) / width) as usize).min(bins - 1);
                        b == k
                    })
                    .count();
                num(count as f64 / (d.len() as f64 * width))
            })
        };
        for k in 0..bins {
            let a = lo + k as f64 * width;
            let b = a + width;
            rows.push(vec![
                h.statistic.to_string(),
                h.parameter.clone(),
                num(a),
                num(b),
                density(&h.limit, k),
                density(&h.bootstrap, k),
                h.analytic.as_ref().map_or(String::new(), |f| num(f(0.5 * (a + b)))),
            ]);
        }
    }
    rows
}

fn normal_pdf(sd: f64) -> impl Fn(f64) -> f64 {
    move |x| (-0.5 * (x / sd).powi(2)).exp() / (sd * (2.0 * std::f64::consts::PI).sqrt())
}

/// Closed-form limit density of `δ_s` when a single facet carries mass.
fn delta_limit_density(model: &CovarianceModel, facets: &FacetTable, sites: &SiteSet, s: f64) -> Option<Box<dyn Fn(f64) -> f64>> {
    let active: Vec<_> = facets.records().iter().filter(|r| r.surface_mass > 0.0).collect();
    let [r] = active.as_slice() else { return None };
    let (i, j) = r.pair;
    let v = model.sigma[(i, i)] + model.sigma[(j, j)] - 2.0 * model.sigma[(i, j)];
    let sd = sites.distance(i, j).powf(s - 1.0) * r.surface_mass * v.max(0.0).sqrt();
    if !(sd > 0.0) {
        return None;
    }
    let pdf = normal_pdf(sd);
    Some(Box::new(move |x| if x < 0.0 { 0.0 } else { 2.0 * pdf(x) }))
}

pub fn cmd_infer(cfg: &LoadedConfig, seed: u64, out: &OutputDir) -> Result<(), CliError> {
    let c = &cfg.config;
    let sites = cfg.sites()?;
    let measure = cfg.measure()?;
    let problem = DualProblem::new(&measure, &sites)?;
    let fields = cfg.fields()?;
    let n_sites = sites.len();
    let opts = SolveOptions::default();

    let start = Instant::now();
    let sample = cfg.sample(derive_seed(seed, streams::SAMPLE, 0))?.ok_or_else(|| {
        CliError::Config("problem: infer needs `counts`, or `weights` with `sample_size`".into())
    })?;
    let truth = match cfg.weights()? {
        Some(p) => {
            let z = problem.solve(&p, &opts)?.z;
            Some((p, z))
        }
        None => None,
    };
    let plug = plugin_estimate(&sample, &problem, &PotentialVector::zeros(n_sites), &opts)?;
    let counts = sample.counts();
    let rows: Vec<Vec<String>> = (0..n_sites)
        .map(|i| {
            vec![
                i.to_string(),
                counts[i].to_string(),
                num(plug.p_hat.as_slice()[i]),
                num(plug.z.as_slice()[i]),
                truth.as_ref().map_or(String::new(), |(_, z)| num(z.as_slice()[i])),
                plug.fallback.to_string(),
            ]
        })
        .collect();
    out.csv("plugin.csv", &["site", "count", "p_hat", "z_hat", "z_star", "fallback"], &rows)?;
    stage("plugin", start);

    // population quantities when weights are known, plug-in otherwise
    let (basis_name, basis_p, basis_z) = match &truth {
        Some((p, z)) => ("population", p.clone(), z.clone()),
        None => ("plug-in", plug.p_hat.clone(), plug.z.clone()),
    };
    let basis_diagram = problem.diagram(basis_z.as_slice())?;
    let facets = measure.facet_table(&basis_diagram)?;
    let integrals = fields
        .iter()
        .map(|(_, f)| measure.facet_integrals(&basis_diagram, f))
        .collect::<Result<Vec<_>, _>>()?;
    write_facets(out, "facets.csv", &facets, measure.mc_config().seed)?;
    let zero = vec![0.0; n_sites];
    let mut deriv_rows = Vec::new();
    for &s in &c.functionals.s {
        for t in hadamard_delta_deriv(&sites, &facets, &zero, &zero, s)?.terms {
            deriv_rows.push(vec![basis_name.into(), "delta".into(), num(s), t.pair.0.to_string(), t.pair.1.to_string(), num(t.weight)]);
        }
    }
    for ((label, _), ints) in fields.iter().zip(&integrals) {
        for t in gamma_deriv_from(&sites, ints, &zero)?.terms {
            deriv_rows.push(vec![basis_name.into(), "gamma".into(), label.clone(), t.pair.0.to_string(), t.pair.1.to_string(), num(t.weight)]);
        }
    }
    out.csv("derivatives.csv", &["basis", "statistic", "parameter", "i", "j", "weight"], &deriv_rows)?;

    let mut hist: Vec<HistogramInput> = Vec::new();
    let s_params: Vec<String> = c.functionals.s.iter().map(|s| num(*s)).collect();

    if c.stages.limit_law && n_sites >= 2 {
        let start = Instant::now();
        let model = covariance_model(&problem, &basis_p, basis_z.as_slice())?;
        let mut cov_rows = Vec::new();
        for (name, m) in [("A", &model.a), ("B", &model.b), ("Sigma", &model.sigma)] {
            for r in 0..m.nrows() {
                for col in 0..m.ncols() {
                    cov_rows.push(vec![name.to_string(), r.to_string(), col.to_string(), num(m[(r, col)])]);
                }
            }
        }
        out.csv("covariance.csv", &["matrix", "row", "col", "value"], &cov_rows)?;
        let mut summary = Vec::new();
        let mut records = Vec::new();
        let mut gamma_variances = Vec::new();
        let mut delta_samples = Vec::new();
        let mut gamma_samples = Vec::new();
        for (k, &s) in c.functionals.s.iter().enumerate() {
            let draws = sample_limit_delta(
                &model,
                &facets,
                &sites,
                s,
                c.replications.limit_draws,
                derive_seed(seed, streams::LIMIT_DELTA, k as u64),
            )?;
            summary.push(summary_row("delta", &s_params[k], &draws));
            delta_samples.push(draws);
        }
        for (k, ((label, _), ints)) in fields.iter().zip(&integrals).enumerate() {
            let var = limit_variance_gamma(&model, ints, &sites)?;
            let draws = sample_limit_gamma(
                &model,
                ints,
                &sites,
                label,
                c.replications.limit_draws,
                derive_seed(seed, streams::LIMIT_GAMMA, k as u64),
            )?;
            let mut row = summary_row("gamma", label, &draws);
            row.push(num(var));
            summary.push(row);
            gamma_variances.push(var);
            gamma_samples.push(draws);
        }
        for row in summary.iter_mut().filter(|r| r.len() == 6) {
            row.push(String::new());
        }
        for (k, d) in delta_samples.iter().enumerate() {
            records.extend(draw_records("delta", &s_params[k], "limit", &d.draws));
        }
        for (k, d) in gamma_samples.iter().enumerate() {
            records.extend(draw_records("gamma", &fields[k].0, "limit", &d.draws));
        }
        out.csv(
            "limit_summary.csv",
            &["statistic", "parameter", "draws", "mean", "variance", "std_error", "analytic_variance"],
            &summary,
        )?;
        out.jsonl("limit_draws.jsonl", &records)?;
        for (k, d) in delta_samples.into_iter().enumerate() {
            hist.push(HistogramInput {
                statistic: "delta",
                parameter: s_params[k].clone(),
                limit: Some(d.draws),
                bootstrap: None,
                analytic: delta_limit_density(&model, &facets, &sites, c.functionals.s[k]),
            });
        }
        for (k, d) in gamma_samples.into_iter().enumerate() {
            let var = gamma_variances[k];
            hist.push(HistogramInput {
                statistic: "gamma",
                parameter: fields[k].0.clone(),
                limit: Some(d.draws),
                bootstrap: None,
                analytic: (var > 0.0).then(|| Box::new(normal_pdf(var.sqrt())) as Box<dyn Fn(f64) -> f64>),
            });
        }
        stage("limit law", start);
    }

    let n = sample.n();
    let mut l1_draws: Option<Vec<f64>> = None;
    if c.stages.bootstrap && n_sites >= 2 {
        let start = Instant::now();
        let mut summary = Vec::new();
        let mut records_owned: Vec<(String, String, Vec<f64>)> = Vec::new();
        let mut conf_rows = Vec::new();
        let mut s_list = c.functionals.s.clone();
        if c.stages.band && !s_list.contains(&1.0) {
            s_list.push(1.0);
        }
        for (k, &s) in s_list.iter().enumerate() {
            let config = BootstrapConfig {
                replications: c.replications.bootstrap,
                seed: derive_seed(seed, streams::BOOTSTRAP, k as u64),
                solve: opts.clone(),
            };
            let boot = bootstrap_delta(&sample, &problem, &plug.z, s, &config)?;
            let param = num(s);
            let mut row = summary_row("delta", &param, &boot.sample);
            row.extend([boot.fallback_count.to_string(), boot.failure_count.to_string()]);
            summary.push(row);
            for &alpha in &c.alpha {
                let tau = confidence_set_radius(&boot.sample.draws, alpha)?;
                let tau_half = confidence_set_radius(&boot.sample.draws, alpha / 2.0)?;
                conf_rows.push(vec![
                    param.clone(),
                    num(alpha),
                    num(tau),
                    num(tau_half),
                    if s == 1.0 { num(band_radius(tau_half, n, alpha)) } else { String::new() },
                ]);
            }
            if s == 1.0 {
                l1_draws = Some(boot.sample.draws.clone());
            }
            if let Some(h) = hist.iter_mut().find(|h| h.statistic == "delta" && h.parameter == param) {
                h.bootstrap = Some(boot.sample.draws.clone());
            } else if c.functionals.s.contains(&s) {
                hist.push(HistogramInput {
                    statistic: "delta",
                    parameter: param.clone(),
                    limit: None,
                    bootstrap: Some(boot.sample.draws.clone()),
                    analytic: None,
                });
            }
            records_owned.push(("delta".into(), param, boot.sample.draws));
        }
        for (k, (label, field)) in fields.iter().enumerate() {
            let config = BootstrapConfig {
                replications: c.replications.bootstrap,
                seed: derive_seed(seed, streams::BOOTSTRAP, 1000 + k as u64),
                solve: opts.clone(),
            };
            let boot = bootstrap_gamma(&sample, &problem, &plug.z, field, &config)?;
            let mut row = summary_row("gamma", label, &boot.sample);
            row.extend([boot.fallback_count.to_string(), boot.failure_count.to_string()]);
            summary.push(row);
            if let Some(h) = hist.iter_mut().find(|h| h.statistic == "gamma" && &h.parameter == label) {
                h.bootstrap = Some(boot.sample.draws.clone());
            } else {
                hist.push(HistogramInput {
                    statistic: "gamma",
                    parameter: label.clone(),
                    limit: None,
                    bootstrap: Some(boot.sample.draws.clone()),
                    analytic: None,
                });
            }
            records_owned.push(("gamma".into(), label.clone(), boot.sample.draws));
        }
        out.csv(
            "bootstrap_summary.csv",
            &["statistic", "parameter", "draws", "mean", "variance", "std_error", "fallbacks", "failures"],
            &summary,
        )?;
        let records: Vec<DrawRecord<'_>> = records_owned
            .iter()
            .flat_map(|(st, p, d)| draw_records(st, p, "bootstrap", d))
            .collect();
        out.jsonl("bootstrap_draws.jsonl", &records)?;
        out.csv("confidence.csv", &["s", "alpha", "tau", "tau_half", "band_radius"], &conf_rows)?;
        stage("bootstrap", start);
    }

    if c.stages.band {
        if let Some(draws) = &l1_draws {
            let start = Instant::now();
            let grid: Vec<Vec<f64>> = weighted_grid(&measure, c.band.grid).into_iter().map(|(y, _)| y).collect();
            let mut header = vec!["alpha".to_string()];
            header.extend(coord_header("y", sites.dim()));
            header.extend(["estimate", "radius", "members"].map(String::from));
            let mut rows = Vec::new();
            for &alpha in &c.alpha {
                let tau_half = confidence_set_radius(draws, alpha / 2.0)?;
                for b in confidence_band(plug.z.as_slice(), tau_half, n, alpha, &grid, &sites)? {
                    let mut row = vec![num(alpha)];
                    row.extend(b.point.iter().map(|v| num(*v)));
                    row.extend([
                        b.estimate.to_string(),
                        num(b.radius),
                        b.members.iter().map(usize::to_string).collect::<Vec<_>>().join(" "),
                    ]);
                    rows.push(row);
                }
            }
            let header: Vec<&str> = header.iter().map(String::as_str).collect();
            out.csv("band.csv", &header, &rows)?;
            stage("band", start);
        }
    }

    if c.stages.probe && measure.support().is_exact() && n_sites >= 2 {
        if let Some((_, z_star)) = &truth {
            let truth_diagram = problem.diagram(z_star.as_slice())?;
            let fraction =
                super_consistency_probe(plug.z.as_slice(), &truth_diagram, c.probe.margin, c.probe.grid_per_cell)?;
            out.csv(
                "probe.csv",
                &["margin", "grid_per_cell", "fraction"],
                &[vec![
                    num(c.probe.margin),
                    c.probe.grid_per_cell.to_string(),
                    fraction.map_or("not-applicable".to_string(), num),
                ]],
            )?;
        }
    }

    if !hist.is_empty() {
        out.csv(
            "histogram.csv",
            &["statistic", "parameter", "bin_lo", "bin_hi", "limit_density", "bootstrap_density", "analytic_density"],
            &histogram_rows(&hist, c.replications.histogram_bins),
        )?;
    }
    Ok(())
}

/// A reproducible pseudo-random direction in `[-1, 1]^n`.
fn direction(seed: u64, k: u64, n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| {
            let bits = derive_seed(seed, VALIDATE_STREAM, k * n as u64 + i as u64) >> 11;
            2.0 * (bits as f64 / (1u64 << 53) as f64) - 1.0
        })
        .collect()
}

struct Check {
    name: String,
    value: f64,
    tolerance: f64,
}

impl Check {
    fn pass(&self) -> bool {
        self.value <= self.tolerance
    }
}

fn relative(fd: f64, exact: f64) -> f64 {
    if exact.abs() < 1e-12 {
        (fd - exact).abs() / 1e-6
    } else {
        (fd - exact).abs() / exact.abs()
    }
}

pub fn cmd_validate(cfg: &LoadedConfig, seed: u64, out: &OutputDir) -> Result<(), CliError> {
    let start = Instant::now();
    let c = &cfg.config;
    let sites = cfg.sites()?;
    let measure = cfg.measure()?;
    let problem = DualProblem::new(&measure, &sites)?;
    let q = target_weights(cfg)?;
    let z = problem.solve(&q, &SolveOptions::default())?.z.into_inner();
    let diagram = problem.diagram(&z)?;
    let masses = measure.cell_masses(&diagram)?;
    let exact = measure.support().is_exact();
    let n = sites.len();
    let mut checks = Vec::new();

    let total: f64 = masses.iter().map(|m| m.value).sum();
    let mc_se: f64 = masses.iter().filter_map(|m| m.std_error).map(|s| s * s).sum::<f64>().sqrt();
    checks.push(Check {
        name: "mass_conservation".into(),
        value: (total - 1.0).abs(),
        tolerance: if exact { 1e-9 } else { 3.0 * mc_se.max(1e-12) },
    });
    if exact {
        let worst = masses.iter().zip(q.as_slice()).map(|(m, w)| (m.value - w).abs()).fold(0.0, f64::max);
        checks.push(Check {
            name: "optimality".into(),
            value: worst,
            tolerance: 1e-9,
        });
    }

    if exact && n >= 2 {
        let hess = problem.hessian_reduced(&z)?;
        let t = 1e-6;
        let reduced = |w: &[f64]| -> Result<Vec<f64>, CliError> {
            let g = problem.gradient(w, &q)?;
            let last = g[n - 1];
            Ok(g[..n - 1].iter().map(|v| v - last).collect())
        };
        let mut err = 0.0f64;
        for b in 0..n - 1 {
            let mut plus = z.clone();
            let mut minus = z.clone();
            plus[b] += t;
            plus[n - 1] -= t;
            minus[b] -= t;
            minus[n - 1] += t;
            let (gp, gm) = (reduced(&plus)?, reduced(&minus)?);
            for a in 0..n - 1 {
                let fd = (gp[a] - gm[a]) / (2.0 * t);
                err = err.max((fd - hess[(a, b)]).abs() / hess.norm());
            }
        }
        checks.push(Check {
            name: "hessian_vs_fd".into(),
            value: err,
            tolerance: 1e-3,
        });

        let facets = measure.facet_table(&diagram)?.scaled(c.validate.corrupt_facet_scale);
        let t = c.validate.fd_step;
        for &s in &c.functionals.s {
            for k in 0..c.validate.directions {
                let h1 = direction(seed, 2 * k as u64, n);
                let h2 = direction(seed, 2 * k as u64 + 1, n);
                let analytic = hadamard_delta_deriv(&sites, &facets, &h1, &h2, s)?.total;
                let f = Functional::Delta { s, h1, h2 };
                let fd = fd_directional_quotient(&measure, &sites, &f, &z, &[t])?[0];
                checks.push(Check {
                    name: format!("fd_delta_s{}_dir{k}", num(s)),
                    value: relative(fd, analytic),
                    tolerance: 1e-2,
                });
            }
        }
        for (label, field) in cfg.fields()? {
            let integrals = measure.facet_integrals(&diagram, &field)?;
            for k in 0..c.validate.directions {
                let h = direction(seed, 1000 + k as u64, n);
                let analytic = gamma_deriv_from(&sites, &integrals, &h)?.total;
                let f = Functional::Gamma {
                    field: &field,
                    h,
                };
                let fd = fd_directional_quotient(&measure, &sites, &f, &z, &[t])?[0];
                checks.push(Check {
                    name: format!("fd_gamma_{label}_dir{k}"),
                    value: relative(fd, analytic),
                    tolerance: 1e-2,
                });
            }
        }
    }

    if exact && sites.dim() == 2 && n >= 2 {
        checks.extend(backend_checks(&measure, &sites, &z, c.validate.mc_samples, seed)?);
    }

    let rows: Vec<Vec<String>> = checks
        .iter()
        .map(|ch| vec![ch.name.clone(), num(ch.value), num(ch.tolerance), ch.pass().to_string()])
        .collect();
    out.csv("validation.csv", &["check", "value", "tolerance", "pass"], &rows)?;
    stage("validate", start);
    let failed: Vec<&str> = checks.iter().filter(|c| !c.pass()).map(|c| c.name.as_str()).collect();
    if failed.is_empty() {
        Ok(())
    } else {
        Err(CliError::Validation(format!("{} check(s) failed: {}", failed.len(), failed.join(", "))))
    }
}

/// Exact vs Monte Carlo cell masses and line-integral vs thin-slab facet masses,
/// in units of Monte Carlo standard errors.
fn backend_checks(
    measure: &ReferenceMeasure,
    sites: &SiteSet,
    z: &[f64],
    samples: usize,
    seed: u64,
) -> Result<Vec<Check>, CliError> {
    let problem = DualProblem::new(measure, sites)?;
    let diagram = problem.diagram(z)?;
    let mut checks = Vec::new();
    let mut worst = 0.0f64;
    for i in 0..sites.len() {
        let exact = measure.cell_mass(&diagram, i)?.value;
        let (m, se) = measure.mc_cell_mass(sites, z, i, samples, derive_seed(seed, VALIDATE_STREAM, 10_000))?;
        worst = worst.max((m - exact).abs() / se.max(1e-300));
    }
    checks.push(Check {
        name: "mc_vs_exact_mass_sigmas".into(),
        value: worst,
        tolerance: 3.0,
    });
    let mut worst = 0.0f64;
    let eps = 1e-3 * measure.support().diameter();
    for (k, facet) in diagram.facets().iter().enumerate() {
        let line = measure.facet_surface_mass(&diagram, facet)?.surface_mass;
        let slab = measure.thin_slab(
            &diagram,
            facet,
            eps,
            samples,
            derive_seed(seed, VALIDATE_STREAM, 20_000 + k as u64),
            None,
        )?;
        worst = worst.max((slab.value - line).abs() / slab.std_error.unwrap_or(0.0).max(1e-300));
    }
    checks.push(Check {
        name: "thin_slab_vs_line_sigmas".into(),
        value: worst,
        tolerance: 3.0,
    });
    Ok(checks)
}

pub fn cmd_coverage(cfg: &LoadedConfig, seed: u64, out: &OutputDir) -> Result<(), CliError> {
    let start = Instant::now();
    let c = &cfg.config;
    let sites = cfg.sites()?;
    let measure = cfg.measure()?;
    if !measure.support().is_exact() {
        return Err(CliError::Config("reference: coverage-study needs an interval or polygon support".into()));
    }
    let p = cfg
        .weights()?
        .ok_or_else(|| CliError::Config("problem: coverage-study needs population `weights`".into()))?;
    let problem = DualProblem::new(&measure, &sites)?;
    let z_star = problem.solve(&p, &SolveOptions::default())?.z.into_inner();
    let mut summary_rows = Vec::new();
    let mut rep_rows = Vec::new();
    for (k, &alpha) in c.alpha.iter().enumerate() {
        let settings = CoverageSettings {
            n: c.coverage.n,
            outer_reps: c.coverage.outer_reps,
            bootstrap_reps: c.coverage.bootstrap_reps,
            alpha,
            band_grid: c.coverage.band_grid,
            seed: derive_seed(seed, streams::OUTER, k as u64),
        };
        let s = coverage_study(&problem, &p, &z_star, &settings)?;
        let fallbacks = s.records.iter().filter(|r| r.plugin_fallback).count();
        let boot_fallbacks: usize = s.records.iter().map(|r| r.bootstrap_fallbacks).sum();
        let boot_failures: usize = s.records.iter().map(|r| r.bootstrap_failures).sum();
        summary_rows.push(vec![
            num(alpha),
            num(1.0 - alpha),
            c.coverage.n.to_string(),
            c.coverage.outer_reps.to_string(),
            c.coverage.bootstrap_reps.to_string(),
            num(s.set_coverage),
            num(s.band_average_coverage),
            fallbacks.to_string(),
            boot_fallbacks.to_string(),
            boot_failures.to_string(),
        ]);
        for (r, rec) in s.records.iter().enumerate() {
            rep_rows.push(vec![
                num(alpha),
                r.to_string(),
                num(rec.statistic),
                num(rec.tau),
                num(rec.tau_half),
                rec.set_covered.to_string(),
                num(rec.band_coverage),
            ]);
        }
    }
    out.csv(
        "coverage.csv",
        &[
            "alpha",
            "nominal",
            "n",
            "outer_reps",
            "bootstrap_reps",
            "set_coverage",
            "band_average_coverage",
            "plugin_fallbacks",
            "bootstrap_fallbacks",
            "bootstrap_failures",
        ],
        &summary_rows,
    )?;
    out.csv(
        "coverage_replications.csv",
        &["alpha", "replication", "statistic", "tau", "tau_half", "set_covered", "band_coverage"],
        &rep_rows,
    )?;
    stage("coverage-study", start);
    Ok(())
}

/// Directions used by `validate` are also exposed for tests.
pub fn validation_direction(seed: u64, k: u64, n: usize) -> Vec<f64> {
    direction(seed, k, n)
}
