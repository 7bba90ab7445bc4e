use std::path::Path;

use serde::Serialize;

use coverlab_core::acceptance::run_all;
use coverlab_core::correlation::{
    brute_force_cap, decay_report, fit_log_rate, floquet_mode_correlation, k_split_correlation, required_radius,
    Method, PowerStrategy,
};
use coverlab_core::floquet::ThetaGrid;
use coverlab_core::jet::JetExport;
use coverlab_core::resonance::{amplitude_jet_auto, covariance_from_lambda, lambda_jet_auto};
use coverlab_core::stationary_phase::{check_spectral_preconditions, drift_comparison, expand, ExpansionReport};
use coverlab_core::twisted::{resonance_surface, SurfaceOptions};
use coverlab_core::{CoverError, CoverObservable, MarkovModel};

use crate::cache::{self, Artifacts};
use crate::inputs::{complex_pair, load_model, load_observables, parse_list, CanonicalInputs};
use crate::{Command, ObsArgs, Result};

/// Largest torus grid, in nodes, a command will build.
const NODE_CAP: usize = 1 << 22;

pub fn run(command: &Command, out: &Path, use_cache: bool) -> Result<u8> {
    match command {
        Command::Spectrum(a) => {
            let model = load_model(&a.model.model)?;
            let params = (a.grid, a.k);
            cached(out, use_cache, "spectrum", &model, &[], params, &["surface.csv"], || {
                spectrum(&model, a.grid, a.k)
            })
        }
        Command::Expand(a) => {
            let model = load_model(&a.model.model)?;
            let (f, g) = load_observables(&a.obs, &model)?;
            let params = (a.order, a.k_band);
            cached(out, use_cache, "expand", &model, &[&f, &g], params, &["expansion.json", "jets.json"], || {
                expand_cmd(&model, &a.obs, &f, &g, a.order, a.k_band)
            })
        }
        Command::Correlate(a) => {
            let model = load_model(&a.model.model)?;
            let (f, g) = load_observables(&a.obs, &model)?;
            let params = (a.order, a.k_band, a.t_min, a.t_max, a.t_step, &a.method);
            cached(
                out,
                use_cache,
                "correlate",
                &model,
                &[&f, &g],
                params,
                &["correlation.csv", "expansion.json"],
                || correlate(&model, &a.obs, &f, &g, a),
            )
        }
        Command::Drift(a) => {
            let model = load_model(&a.model.model)?;
            let (f, g) = load_observables(&a.obs, &model)?;
            let params = (a.epsilon, &a.direction, &a.t_values);
            cached(out, use_cache, "drift", &model, &[&f, &g], params, &["drift.csv"], || {
                drift(&model, &f, &g, a)
            })
        }
        Command::U1(a) => {
            let model = load_model(&a.model.model)?;
            let (f, g) = load_observables(&a.obs, &model)?;
            let params = (a.k_band, a.t_min, a.t_max, a.t_step, a.grid);
            cached(out, use_cache, "u1", &model, &[&f, &g], params, &["u1.csv", "u1.json"], || {
                u1(&model, &f, &g, a)
            })
        }
        Command::Verify => verify(out),
    }
}

const SUMMARY: &str = "summary.txt";

#[allow(clippy::too_many_arguments)]
fn cached<P: Serialize>(
    out: &Path,
    use_cache: bool,
    command: &str,
    model: &MarkovModel,
    observables: &[&CoverObservable],
    params: P,
    names: &[&str],
    compute: impl FnOnce() -> Result<Artifacts>,
) -> Result<u8> {
    let inputs = CanonicalInputs {
        command,
        version: env!("CARGO_PKG_VERSION"),
        model: model.to_config(),
        observables: observables.iter().map(|o| o.to_entries()).collect(),
        params,
    };
    let key = cache::key(&inputs)?;
    let root = cache::root(out);
    let mut all_names = names.to_vec();
    all_names.push(SUMMARY);

    let hit = if use_cache { cache::load(&root, &key, &all_names) } else { None };
    let from_cache = hit.is_some();
    let artifacts = match hit {
        Some(a) => a,
        None => {
            let a = compute()?;
            if use_cache {
                cache::store(&root, &key, &a)?;
            }
            a
        }
    };
    let (summary, files): (Vec<_>, Vec<_>) = artifacts.files.into_iter().partition(|(n, _)| n == SUMMARY);
    let written = cache::write_outputs(out, &Artifacts { files })?;
    if let Some((_, text)) = summary.first() {
        print!("{}", String::from_utf8_lossy(text));
    }
    for p in written {
        println!("wrote {}", p.display());
    }
    if from_cache {
        eprintln!("served from cache entry {key}");
    }
    Ok(0)
}

fn json_bytes<T: Serialize>(value: &T) -> Result<Vec<u8>> {
    let mut v = serde_json::to_vec_pretty(value)?;
    v.push(b'\n');
    Ok(v)
}

fn grid_for(model: &MarkovModel, points: usize) -> Result<ThetaGrid> {
    let nodes = points.checked_pow(model.dim() as u32).unwrap_or(usize::MAX);
    if nodes > NODE_CAP {
        return Err(CoverError::ResourceGuard(format!(
            "grid of {points}^{} nodes exceeds {NODE_CAP} (about {} MiB of eigenvalues)",
            model.dim(),
            nodes.saturating_mul(model.state_count()).saturating_mul(16) >> 20
        )));
    }
    ThetaGrid::new(model.dim(), points)
}

fn spectrum(model: &MarkovModel, points: usize, k: i64) -> Result<Artifacts> {
    let grid = grid_for(model, points)?;
    let surface = resonance_surface(model, &grid, k, SurfaceOptions::default())?;
    let mut csv = Vec::new();
    surface.write_csv(&mut csv)?;
    let summary = format!(
        "surface: {} nodes, k={k}, max spectral radius off origin {:.12}, {} nodes fail the gap test\n",
        grid.node_count(),
        surface.max_specrad_off_origin(),
        surface.flagged_nodes().len()
    );
    let mut art = Artifacts::default();
    art.add("surface.csv", csv);
    art.add(SUMMARY, summary.into_bytes());
    Ok(art)
}

fn labels(obs: &ObsArgs) -> Vec<String> {
    let f = obs
        .obs_f
        .as_ref()
        .map(|p| p.display().to_string())
        .unwrap_or_else(|| "delta".to_string());
    let g = obs.obs_g.as_ref().map(|p| p.display().to_string()).unwrap_or_else(|| f.clone());
    vec![f, g]
}

#[derive(Serialize)]
struct Jets {
    lambda: JetExport,
    amplitude: JetExport,
}

fn expansion_summary(report: &ExpansionReport) -> String {
    let c: Vec<String> = report.c.iter().map(|z| format!("{:.10}{:+.3e}i", z[0], z[1])).collect();
    format!("kappa = {:.10}\nc = [{}]\n", report.kappa, c.join(", "))
}

fn expand_cmd(
    model: &MarkovModel,
    obs: &ObsArgs,
    f: &CoverObservable,
    g: &CoverObservable,
    order: usize,
    k_band: usize,
) -> Result<Artifacts> {
    let e = expand(model, f, g, order, k_band)?;
    let report = ExpansionReport::new(&model.to_config().name, labels(obs), &e.coefficients, Vec::new());
    let jets = Jets {
        lambda: e.lambda.export(),
        amplitude: e.amplitude.export(),
    };
    let mut art = Artifacts::default();
    art.add("expansion.json", json_bytes(&report)?);
    art.add("jets.json", json_bytes(&jets)?);
    art.add(SUMMARY, expansion_summary(&report).into_bytes());
    Ok(art)
}

fn correlate(
    model: &MarkovModel,
    obs: &ObsArgs,
    f: &CoverObservable,
    g: &CoverObservable,
    a: &crate::CorrelateArgs,
) -> Result<Artifacts> {
    if a.t_step == 0 || a.t_min > a.t_max {
        return Err(CoverError::Config(format!(
            "need t-min <= t-max and t-step > 0 (got {}, {}, {})",
            a.t_min, a.t_max, a.t_step
        )));
    }
    let method = match a.method.as_str() {
        "brute" => Method::Brute,
        "floquet" => Method::Floquet,
        "k-split" => Method::KSplit,
        "auto" if required_radius(model, f, g, a.t_max) <= brute_force_cap(model.dim()) => Method::Brute,
        "auto" => Method::Floquet,
        other => return Err(CoverError::Config(format!("unknown method {other:?}"))),
    };
    let e = expand(model, f, g, a.order, a.k_band)?;
    let ts: Vec<usize> = (a.t_min..=a.t_max).step_by(a.t_step).collect();
    let decay = decay_report(model, f, g, &ts, &e.coefficients, method)?;
    let mut csv = Vec::new();
    decay.write_csv(&mut csv)?;
    let report = ExpansionReport::new(&model.to_config().name, labels(obs), &e.coefficients, decay.residual_slopes.clone());
    let slopes: Vec<String> = decay
        .residual_slopes
        .iter()
        .enumerate()
        .map(|(i, s)| match s {
            Some(s) => format!("N={}: {s:.4}", i + 1),
            None => format!("N={}: n/a", i + 1),
        })
        .collect();
    let summary = format!(
        "{}method = {}, {} times\nresidual slopes: {}\n",
        expansion_summary(&report),
        method.as_str(),
        ts.len(),
        slopes.join(", ")
    );
    let mut art = Artifacts::default();
    art.add("correlation.csv", csv);
    art.add("expansion.json", json_bytes(&report)?);
    art.add(SUMMARY, summary.into_bytes());
    Ok(art)
}

fn drift(model: &MarkovModel, f: &CoverObservable, g: &CoverObservable, a: &crate::DriftArgs) -> Result<Artifacts> {
    let d = model.dim();
    let direction: Vec<i64> = match &a.direction {
        Some(s) => parse_list(s, "direction")?,
        None => (0..d).map(|i| i64::from(i == 0)).collect(),
    };
    if direction.len() != d {
        return Err(CoverError::Config(format!("direction has {} entries, model has d = {d}", direction.len())));
    }
    let ts: Vec<usize> = parse_list(&a.t_values, "t-values")?;
    check_spectral_preconditions(model, 0)?;
    let lambda = lambda_jet_auto(model, 2)?;
    let sigma = covariance_from_lambda(&lambda.jet)?;
    let amp = amplitude_jet_auto(model, f, g, 0)?;
    let points = drift_comparison(model, f, g, &sigma, &amp.jet, a.epsilon, &ts, &direction)?;

    let k_cols: Vec<String> = if d == 1 { vec!["k".into()] } else { (1..=d).map(|i| format!("k_{i}")).collect() };
    let mut csv = format!("t,{},predicted,exact,relerr\n", k_cols.join(","));
    let mut summary = format!("drift regime, epsilon = {}\n", a.epsilon);
    for p in &points {
        let k: Vec<String> = p.k.iter().map(|x| x.to_string()).collect();
        csv.push_str(&format!(
            "{},{},{:.17e},{:.17e},{:.17e}\n",
            p.t,
            k.join(","),
            p.predicted,
            p.exact,
            p.relerr
        ));
        summary.push_str(&format!("t = {:>6}  k = {:?}  relerr = {:.3e}\n", p.t, p.k, p.relerr));
    }
    let mut art = Artifacts::default();
    art.add("drift.csv", csv.into_bytes());
    art.add(SUMMARY, summary.into_bytes());
    Ok(art)
}

#[derive(Serialize)]
struct ModeRate {
    k: i64,
    fitted_log_rate: Option<f64>,
    log_sup_specrad: f64,
    relative_error: Option<f64>,
}

#[derive(Serialize)]
struct U1Report {
    model: String,
    k_band: usize,
    t_min: usize,
    t_max: usize,
    modes: Vec<ModeRate>,
    principal_at_t_max: [f64; 2],
    remainder_at_t_max: f64,
}

fn u1(model: &MarkovModel, f: &CoverObservable, g: &CoverObservable, a: &crate::U1Args) -> Result<Artifacts> {
    if a.k_band == 0 || a.t_step == 0 || a.t_min > a.t_max {
        return Err(CoverError::Config("u1 needs k-band >= 1, t-step > 0 and t-min <= t-max".into()));
    }
    check_spectral_preconditions(model, a.k_band)?;
    let grid = grid_for(model, a.grid)?;
    let ts: Vec<usize> = (a.t_min..=a.t_max).step_by(a.t_step).collect();
    let tf: Vec<f64> = ts.iter().map(|&t| t as f64).collect();
    let modes: Vec<i64> = (1..=a.k_band as i64).flat_map(|k| [-k, k]).collect();

    let mut columns: Vec<Vec<f64>> = Vec::new();
    let mut rates = Vec::new();
    for &k in &modes {
        let surface = resonance_surface(model, &grid, k, SurfaceOptions::default())?;
        let rho = surface.specrad.iter().copied().fold(0.0, f64::max);
        let ys: Vec<f64> = ts
            .iter()
            .map(|&t| floquet_mode_correlation(model, f, g, t, k, PowerStrategy::Iterative).map(|z| z.norm()))
            .collect::<Result<_>>()?;
        let fitted = fit_log_rate(&tf, &ys);
        rates.push(ModeRate {
            k,
            fitted_log_rate: fitted,
            log_sup_specrad: rho.ln(),
            relative_error: fitted.map(|r| (r - rho.ln()).abs() / rho.ln().abs()),
        });
        columns.push(ys);
    }

    let mut header = vec!["t".to_string(), "principal_re".into(), "principal_im".into(), "remainder_abs".into()];
    header.extend(modes.iter().map(|k| format!("abs_c_k{k}")));
    let mut csv = header.join(",") + "\n";
    let mut last = None;
    for (i, &t) in ts.iter().enumerate() {
        let split = k_split_correlation(model, f, g, t)?;
        let mut row = vec![
            t.to_string(),
            format!("{:.17e}", split.principal.re),
            format!("{:.17e}", split.principal.im),
            format!("{:.17e}", split.remainder.norm()),
        ];
        row.extend(columns.iter().map(|c| format!("{:.17e}", c[i])));
        csv.push_str(&(row.join(",") + "\n"));
        last = Some(split);
    }
    let last = last.expect("at least one time");
    let report = U1Report {
        model: model.to_config().name,
        k_band: a.k_band,
        t_min: a.t_min,
        t_max: a.t_max,
        modes: rates,
        principal_at_t_max: complex_pair(last.principal),
        remainder_at_t_max: last.remainder.norm(),
    };
    let mut summary = String::new();
    for m in &report.modes {
        summary.push_str(&format!(
            "k = {:>3}: fitted log rate {}, ln sup specrad {:.6}\n",
            m.k,
            m.fitted_log_rate.map(|r| format!("{r:.6}")).unwrap_or_else(|| "n/a".into()),
            m.log_sup_specrad
        ));
    }
    summary.push_str(&format!("remainder at t = {}: {:.3e}\n", a.t_max, report.remainder_at_t_max));
    let mut art = Artifacts::default();
    art.add("u1.csv", csv.into_bytes());
    art.add("u1.json", json_bytes(&report)?);
    art.add(SUMMARY, summary.into_bytes());
    Ok(art)
}

#[derive(Serialize)]
struct VerifyRow<'a> {
    name: &'a str,
    pass: bool,
    detail: &'a str,
}

fn verify(out: &Path) -> Result<u8> {
    let results = run_all();
    for r in &results {
        println!("{}", r.line());
    }
    let failed = results.iter().filter(|r| !r.pass).count();
    println!("{} of {} criteria passed", results.len() - failed, results.len());
    let rows: Vec<VerifyRow> = results
        .iter()
        .map(|r| VerifyRow {
            name: r.name,
            pass: r.pass,
            detail: &r.detail,
        })
        .collect();
    let mut art = Artifacts::default();
    art.add("verify.json", json_bytes(&rows)?);
    for p in cache::write_outputs(out, &art)? {
        println!("wrote {}", p.display());
    }
    Ok(if failed == 0 { 0 } else { 5 })
}
