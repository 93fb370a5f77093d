use std::path::Path;

use cbp_core::em::{
    em_fit_progenitors_traced, em_fit_sizes_traced, multi_start, MultiStart, TraceRow,
};
use cbp_core::io::{read_sample, write_full, Sample};
use cbp_core::likelihood::{n_params, scan, IncompleteSample, ScanConfig};
use cbp_core::mle::{confidence_intervals, estimate, CompleteMle, ConfidenceIntervals, Interval};
use cbp_core::trees::tree_bounds;
use cbp_core::{
    bootstrap, efficiency, simulate, BootstrapConfig, BootstrapSummary, ControlFamily, ControlKind,
    EmConfig, EmFit, FullTreeSample, InformationCriterion, OffspringDistribution, ParameterVector,
    ProgenitorSample, Scheme, SizesSample,
};
use log::{info, warn};

use crate::args::{BootstrapArgs, EmArgs, LoglikArgs, MleArgs, ScanArgs, SimulateArgs, TreesArgs};
use crate::output::{open, usage, CliResult, Floats, Meta, Table};

const DEFAULT_FAMILY: ControlKind = ControlKind::Binomial;
const DEFAULT_S_MAX: usize = 3;
const DEFAULT_STARTS: usize = 10;

fn load(path: Option<&Path>) -> CliResult<(Sample, String)> {
    let path = path.ok_or_else(|| usage("an input CSV is required (--input)"))?;
    let (sample, _) = read_sample(open(path)?)?;
    Ok((sample, path.display().to_string()))
}

/// Progenitor counts when the sample has them, unless `scheme` says otherwise.
fn resolve_scheme(sample: &Sample, scheme: Option<Scheme>) -> Scheme {
    scheme.unwrap_or(match sample {
        Sample::Sizes(_) => Scheme::Sizes,
        _ => Scheme::Progenitors,
    })
}

enum Observed {
    Progenitors(ProgenitorSample),
    Sizes(SizesSample),
}

impl Observed {
    fn from(sample: Sample, scheme: Scheme) -> CliResult<Self> {
        Ok(match scheme {
            Scheme::Progenitors => Observed::Progenitors(sample.into_progenitors()?),
            Scheme::Sizes => Observed::Sizes(sample.into_sizes()),
        })
    }

    fn borrow(&self) -> IncompleteSample<'_> {
        match self {
            Observed::Progenitors(s) => IncompleteSample::Progenitors(s),
            Observed::Sizes(s) => IncompleteSample::Sizes(s),
        }
    }

    fn n_generations(&self) -> usize {
        match self {
            Observed::Progenitors(s) => s.n_generations(),
            Observed::Sizes(s) => s.n_generations(),
        }
    }

    fn prefix(&self, n: usize) -> CliResult<Self> {
        Ok(match self {
            Observed::Progenitors(s) => Observed::Progenitors(s.prefix(n)?),
            Observed::Sizes(s) => Observed::Sizes(s.prefix(n)?),
        })
    }
}

fn model(
    p: Option<Vec<f64>>,
    family: ControlKind,
    theta: Option<f64>,
    mu: Option<f64>,
) -> CliResult<(OffspringDistribution, ControlFamily)> {
    let p = OffspringDistribution::new(
        p.ok_or_else(|| usage("offspring probabilities are required (--p)"))?,
    )?;
    let control = match (theta, mu) {
        (Some(t), None) => ControlFamily::new(family, t)?,
        (None, Some(m)) => ControlFamily::from_mu(family, m)?,
        _ => return Err(usage("give exactly one of --theta and --mu")),
    };
    Ok((p, control))
}

fn meta_model(meta: &mut Meta, p: &OffspringDistribution, control: &ControlFamily) {
    meta.set_list("p", p.probs())
        .set("family", control.kind())
        .set("theta", control.theta());
}

fn meta_em(meta: &mut Meta, cfg: &EmConfig) {
    meta.set("family", cfg.kind)
        .set("s_max", cfg.s_max)
        .set("tol", cfg.tol)
        .set("max_iters", cfg.max_iters);
}

fn em_config(
    family: Option<ControlKind>,
    s_max: Option<usize>,
    tol: Option<f64>,
    max_iters: Option<usize>,
) -> CliResult<EmConfig> {
    let mut cfg = EmConfig::new(
        family.unwrap_or(DEFAULT_FAMILY),
        s_max.unwrap_or(DEFAULT_S_MAX),
    );
    if let Some(t) = tol {
        cfg.tol = t;
    }
    if let Some(m) = max_iters {
        cfg.max_iters = m;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn into_bytes(table: &Table, meta: &Meta) -> CliResult<Vec<u8>> {
    let mut buf = Vec::new();
    table.write(&mut buf, meta)?;
    Ok(buf)
}

pub fn simulate_cmd(a: SimulateArgs) -> CliResult<Vec<u8>> {
    let (p, control) = model(a.p, a.family.unwrap_or(DEFAULT_FAMILY), a.theta, a.mu)?;
    let z0 = a.z0.unwrap_or(1);
    let n = a.generations.unwrap_or(30);
    let seed = a.seed.unwrap_or(0);
    let tree = simulate(&p, &control, z0, n, seed)?;
    let mut meta = Meta::new("simulate");
    meta_model(&mut meta, &p, &control);
    meta.set("z0", z0).set("generations", n).set("seed", seed);
    let mut buf = Vec::new();
    write_full(&mut buf, &tree, meta.lines())?;
    Ok(buf)
}

fn mle_rows(mle: &CompleteMle, ci: &ConfidenceIntervals) -> Vec<(String, f64, Option<Interval>)> {
    let mut rows: Vec<(String, f64, Option<Interval>)> =
        ci.p.iter()
            .enumerate()
            .map(|(k, i)| (format!("p{k}"), i.estimate, Some(*i)))
            .collect();
    rows.push(("m".into(), mle.m_hat, Some(ci.m)));
    rows.push(("sigma2".into(), mle.sigma2_hat, Some(ci.sigma2)));
    rows.push(("mu".into(), mle.mu_hat, Some(ci.mu)));
    rows.push(("theta".into(), mle.theta_hat, None));
    rows.push(("tau".into(), mle.tau_hat, Some(ci.tau)));
    rows
}

pub fn mle_cmd(a: MleArgs, floats: Floats) -> CliResult<Vec<u8>> {
    let (sample, path) = load(a.input.as_deref())?;
    let tree = sample.into_full()?;
    let family = a.family.unwrap_or(DEFAULT_FAMILY);
    let level = a.level.unwrap_or(0.95);
    let mut meta = Meta::new("mle");
    meta.set("input", path)
        .set("family", family)
        .set("level", level)
        .set("evolve", a.evolve);

    let fit = |t: &FullTreeSample| -> CliResult<_> {
        let mle = estimate(t, family)?;
        let ci = confidence_intervals(&mle, t, level)?;
        Ok(mle_rows(&mle, &ci))
    };
    let row = |name: String, est: f64, ci: Option<Interval>| {
        vec![
            name,
            floats.fmt(est),
            floats.opt(ci.map(|i| i.low)),
            floats.opt(ci.map(|i| i.high)),
        ]
    };
    let table = if a.evolve {
        let mut table = Table::new(["n", "parameter", "estimate", "ci_low", "ci_high"]);
        for n in 1..=tree.n_generations() {
            match fit(&tree.prefix(n)?) {
                Ok(rows) => {
                    for (name, est, ci) in rows {
                        table.push([n.to_string()].into_iter().chain(row(name, est, ci)));
                    }
                }
                Err(e) => info!("n = {n}: {e}"),
            }
        }
        table
    } else {
        let mut table = Table::new(["parameter", "estimate", "ci_low", "ci_high"]);
        for (name, est, ci) in fit(&tree)? {
            table.push(row(name, est, ci));
        }
        table
    };
    into_bytes(&table, &meta)
}

fn fit_rows(fit: &EmFit) -> Vec<(String, f64)> {
    let mut rows: Vec<(String, f64)> = fit
        .p
        .probs()
        .iter()
        .enumerate()
        .map(|(k, &v)| (format!("p{k}"), v))
        .collect();
    rows.extend([
        ("m".to_string(), fit.m),
        ("sigma2".to_string(), fit.sigma2),
        ("mu".to_string(), fit.mu),
        ("theta".to_string(), fit.theta),
        ("tau".to_string(), fit.tau()),
    ]);
    rows
}

struct EmRun {
    fit: EmFit,
    starts: Option<MultiStart>,
}

fn run_em(
    obs: &Observed,
    cfg: &EmConfig,
    n_starts: usize,
    seed: u64,
    trace: Option<&mut Vec<TraceRow>>,
) -> CliResult<EmRun> {
    match obs {
        Observed::Progenitors(s) => {
            let init = OffspringDistribution::uniform(cfg.s_max)?;
            let fit = em_fit_progenitors_traced(s, &init, 0.5, cfg, trace)?;
            Ok(EmRun { fit, starts: None })
        }
        Observed::Sizes(s) => {
            let ms = multi_start(s, n_starts, seed, cfg)?;
            let fit = match trace {
                Some(trace) => {
                    let best = &ms.starts[ms.best_start];
                    let init = OffspringDistribution::new(best.init_p.clone())?;
                    em_fit_sizes_traced(s, &init, best.init_theta, cfg, Some(trace))?
                }
                None => ms.best.clone(),
            };
            Ok(EmRun {
                fit,
                starts: Some(ms),
            })
        }
    }
}

pub fn em_cmd(a: EmArgs, floats: Floats) -> CliResult<Vec<u8>> {
    let (sample, path) = load(a.input.as_deref())?;
    let scheme = resolve_scheme(&sample, a.scheme);
    let obs = Observed::from(sample, scheme)?;
    let cfg = em_config(a.family, a.s_max, a.tol, a.max_iters)?;
    let n_starts = a.multi_start.unwrap_or(DEFAULT_STARTS);
    let seed = a.seed.unwrap_or(0);

    let mut meta = Meta::new("em");
    meta.set("input", path).set("scheme", scheme);
    meta_em(&mut meta, &cfg);
    if scheme == Scheme::Sizes {
        meta.set("multi_start", n_starts).set("seed", seed);
    }
    meta.set("evolve", a.evolve);

    if a.evolve {
        let mut table = Table::new(["n", "parameter", "estimate", "ci_low", "ci_high"]);
        for n in 1..=obs.n_generations() {
            match run_em(&obs.prefix(n)?, &cfg, n_starts, seed, None) {
                Ok(run) => {
                    for (name, v) in fit_rows(&run.fit) {
                        table.push([
                            n.to_string(),
                            name,
                            floats.fmt(v),
                            String::new(),
                            String::new(),
                        ]);
                    }
                }
                Err(e) => info!("n = {n}: {e}"),
            }
        }
        return into_bytes(&table, &meta);
    }

    let mut trace = Vec::new();
    let run = run_em(
        &obs,
        &cfg,
        n_starts,
        seed,
        a.trace.as_ref().map(|_| &mut trace),
    )?;
    info!(
        "EM stopped after {} iterations (converged: {})",
        run.fit.iterations, run.fit.converged
    );
    if !run.fit.converged {
        warn!(
            "EM hit max_iters = {} before reaching tol = {}",
            cfg.max_iters, cfg.tol
        );
    }

    if let Some(path) = &a.trace {
        let mut t = Table::new(
            ["iteration".to_string()]
                .into_iter()
                .chain((0..=cfg.s_max).map(|k| format!("p{k}")))
                .chain(["theta".to_string(), "loglik".to_string()]),
        );
        for row in &trace {
            t.push(
                [row.iteration.to_string()]
                    .into_iter()
                    .chain(row.p.iter().map(|&v| floats.fmt(v)))
                    .chain([floats.fmt(row.theta), floats.fmt(row.loglik)]),
            );
        }
        t.to_path(path, &meta)?;
    }
    if let (Some(path), Some(ms)) = (&a.starts, &run.starts) {
        let mut t = Table::new([
            "start",
            "init_theta",
            "loglik",
            "iterations",
            "converged",
            "m",
            "mu",
            "error",
        ]);
        for s in &ms.starts {
            let cells = match &s.fit {
                Ok(f) => [
                    floats.fmt(f.loglik),
                    f.iterations.to_string(),
                    f.converged.to_string(),
                    floats.fmt(f.m),
                    floats.fmt(f.mu),
                    String::new(),
                ],
                Err(e) => [
                    String::new(),
                    String::new(),
                    String::new(),
                    String::new(),
                    String::new(),
                    e.clone(),
                ],
            };
            t.push(
                [s.start.to_string(), floats.fmt(s.init_theta)]
                    .into_iter()
                    .chain(cells),
            );
        }
        t.to_path(path, &meta)?;
    }

    let mut table = Table::new(["parameter", "estimate"]);
    for (name, v) in fit_rows(&run.fit) {
        table.push([name, floats.fmt(v)]);
    }
    table.push(["loglik".to_string(), floats.fmt(run.fit.loglik)]);
    table.push(["iterations".to_string(), run.fit.iterations.to_string()]);
    table.push(["converged".to_string(), run.fit.converged.to_string()]);
    if let Some(ms) = &run.starts {
        table.push(["best_start".to_string(), ms.best_start.to_string()]);
    }
    into_bytes(&table, &meta)
}

pub fn loglik_cmd(a: LoglikArgs, floats: Floats) -> CliResult<Vec<u8>> {
    let (sample, path) = load(a.input.as_deref())?;
    let scheme = resolve_scheme(&sample, a.scheme);
    let obs = Observed::from(sample, scheme)?;
    let (p, control) = model(a.p, a.family.unwrap_or(DEFAULT_FAMILY), a.theta, a.mu)?;
    let criterion = a.criterion.unwrap_or_default();

    let mut meta = Meta::new("loglik");
    meta.set("input", path).set("scheme", scheme);
    meta_model(&mut meta, &p, &control);
    meta.set("criterion", criterion_name(criterion));

    let sample = obs.borrow();
    let ll = sample.loglik(&p, &control);
    let k = n_params(p.s_max());
    let n_obs = sample.n_observations();
    let aic = criterion.evaluate(ll.value, k, n_obs);
    if let Err(e) = &aic {
        info!("AIC undefined: {e}");
    }
    let mut table = Table::new(["quantity", "value"]);
    table.push(["loglik".to_string(), floats.fmt(ll.value)]);
    table.push([
        "impossible_at".to_string(),
        ll.impossible_at.map_or_else(String::new, |g| g.to_string()),
    ]);
    table.push(["n_params".to_string(), k.to_string()]);
    table.push(["n_obs".to_string(), n_obs.to_string()]);
    table.push(["aic".to_string(), floats.opt(aic.ok())]);
    into_bytes(&table, &meta)
}

fn criterion_name(c: InformationCriterion) -> &'static str {
    match c {
        InformationCriterion::Corrected => "corrected",
        InformationCriterion::Plain => "plain",
    }
}

pub fn scan_cmd(a: ScanArgs, floats: Floats) -> CliResult<Vec<u8>> {
    let (sample, path) = load(a.input.as_deref())?;
    let scheme = resolve_scheme(&sample, a.scheme);
    let obs = Observed::from(sample, scheme)?;
    let families = a.families.unwrap_or_else(|| ControlKind::ALL.to_vec());
    let grid = a.s_max.unwrap_or_else(|| vec![3, 4, 5, 6]);
    let defaults = ScanConfig::default();
    let cfg = ScanConfig {
        tol: a.tol.unwrap_or(defaults.tol),
        max_iters: a.max_iters.unwrap_or(defaults.max_iters),
        n_starts: a.n_starts.unwrap_or(defaults.n_starts),
        seed: a.seed.unwrap_or(defaults.seed),
        criterion: a.criterion.unwrap_or(defaults.criterion),
    };

    let mut meta = Meta::new("scan");
    meta.set("input", path)
        .set("scheme", scheme)
        .set_list("families", &families)
        .set_list("s_max", &grid)
        .set("tol", cfg.tol)
        .set("max_iters", cfg.max_iters);
    if scheme == Scheme::Sizes {
        meta.set("n_starts", cfg.n_starts).set("seed", cfg.seed);
    }
    meta.set("criterion", criterion_name(cfg.criterion));

    let result = scan(obs.borrow(), &families, &grid, &cfg)?;
    meta.set("n_obs", result.n_obs);
    let mut table = Table::new([
        "s_max",
        "family",
        "loglik",
        "aic",
        "iterations",
        "best_for_s_max",
        "best_overall",
        "error",
    ]);
    for row in &result.rows {
        let cells = match &row.outcome {
            Ok(c) => [
                floats.fmt(c.loglik),
                floats.fmt(c.aic),
                c.iterations.to_string(),
                String::new(),
            ],
            Err(e) => [String::new(), String::new(), String::new(), e.clone()],
        };
        table.push([
            row.s_max.to_string(),
            row.family.to_string(),
            cells[0].clone(),
            cells[1].clone(),
            cells[2].clone(),
            row.best_for_s_max.to_string(),
            row.best_overall.to_string(),
            cells[3].clone(),
        ]);
    }
    into_bytes(&table, &meta)
}

pub fn bootstrap_cmd(a: BootstrapArgs, floats: Floats) -> CliResult<Vec<u8>> {
    let (sample, path) = load(a.input.as_deref())?;
    let progenitors = sample.into_progenitors()?;
    let em = em_config(a.family, a.s_max, a.tol, a.max_iters)?;
    let schemes = match a.scheme {
        Some(s) => vec![s],
        None => vec![Scheme::Progenitors, Scheme::Sizes],
    };
    let reps = a.reps.unwrap_or(1000);
    let generations = a.generations.unwrap_or(progenitors.n_generations());
    let n_starts = a.n_starts.unwrap_or(DEFAULT_STARTS);
    let fit_starts = a.fit_starts.unwrap_or(DEFAULT_STARTS);
    let seed = a.seed.unwrap_or(0);

    let mut meta = Meta::new("bootstrap");
    meta.set("input", path).set_list("schemes", &schemes);
    meta_em(&mut meta, &em);
    meta.set("reps", reps)
        .set("generations", generations)
        .set("z0", progenitors.z()[0])
        .set("n_starts", n_starts)
        .set("fit_starts", fit_starts)
        .set("seed", seed);

    let mut summaries: Vec<BootstrapSummary> = Vec::new();
    for &scheme in &schemes {
        let fit = match scheme {
            Scheme::Progenitors => {
                run_em(
                    &Observed::Progenitors(progenitors.clone()),
                    &em,
                    0,
                    seed,
                    None,
                )?
                .fit
            }
            Scheme::Sizes => {
                run_em(
                    &Observed::Sizes(progenitors.to_sizes()),
                    &em,
                    fit_starts,
                    seed,
                    None,
                )?
                .fit
            }
        };
        info!("{scheme} fit: m = {}, mu = {}", fit.m, fit.mu);
        let cfg = BootstrapConfig {
            n_reps: reps,
            n_generations: generations,
            z0: progenitors.z()[0],
            master_seed: seed,
            n_starts,
            ..BootstrapConfig::new(scheme, em.clone())
        };
        let summary = bootstrap(&fit.p, &fit.control(), &ParameterVector::of_fit(&fit), &cfg)?;
        meta.set(&format!("{scheme}_success"), summary.n_success)
            .set(&format!("{scheme}_extinct"), summary.n_extinct)
            .set(
                &format!("{scheme}_failed"),
                summary.n_failed - summary.n_extinct,
            );
        for (i, why) in summary.failures.iter().take(5) {
            warn!("{scheme} replicate {i} failed: {why}");
        }
        summaries.push(summary);
    }

    if let Some(path) = &a.replicates {
        let mut t = Table::new(["scheme", "replicate", "parameter", "estimate"]);
        for s in &summaries {
            for (j, &rep) in s.replicate_ids.iter().enumerate() {
                for (name, col) in s.names.iter().zip(&s.estimates) {
                    t.push([
                        s.scheme.to_string(),
                        rep.to_string(),
                        name.clone(),
                        floats.fmt(col[j]),
                    ]);
                }
            }
        }
        t.to_path(path, &meta)?;
    }

    let mut header = vec!["parameter".to_string()];
    for s in &summaries {
        header.extend(["truth", "mean", "mse"].map(|c| format!("{c}_{}", s.scheme)));
    }
    let eff = match summaries.as_slice() {
        [a, b] => Some(efficiency(a, b)?),
        _ => None,
    };
    if eff.is_some() {
        header.push("eff".into());
    }
    let mut table = Table::new(header);
    for (i, name) in summaries[0].names.iter().enumerate() {
        let mut row = vec![name.clone()];
        for s in &summaries {
            row.extend([
                floats.fmt(s.truth[i]),
                floats.fmt(s.mean(i)),
                floats.fmt(s.mse[i]),
            ]);
        }
        if let Some(eff) = &eff {
            row.push(floats.fmt(eff[i]));
        }
        table.push(row);
    }
    into_bytes(&table, &meta)
}

pub fn trees_cmd(a: TreesArgs) -> CliResult<Vec<u8>> {
    let grid = a.s_max.unwrap_or_else(|| vec![3, 4, 5]);
    let z_max = a.z_max.unwrap_or(167);
    if z_max == 0 || grid.contains(&0) {
        return Err(usage("z_max and every s_max must be positive"));
    }
    let mut meta = Meta::new("trees");
    meta.set_list("s_max", &grid).set("z_max", z_max);
    let columns: Vec<_> = grid.iter().map(|&s| tree_bounds(s, z_max)).collect();
    let mut table = Table::new(
        ["z_l".to_string()].into_iter().chain(
            grid.iter()
                .flat_map(|s| [format!("b_max_{s}"), format!("b_star_max_{s}")]),
        ),
    );
    for z in 0..z_max {
        table.push(
            [(z + 1).to_string()].into_iter().chain(
                columns
                    .iter()
                    .flat_map(|c| [c[z].b_max.to_string(), c[z].b_star_max.to_string()]),
            ),
        );
    }
    into_bytes(&table, &meta)
}
