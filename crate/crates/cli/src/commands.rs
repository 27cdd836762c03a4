//! One function per subcommand, each turning a validated config into a
//! [`Report`].

use serde_json::json;
use transfer_core::asymptotics::{sweep_block_structure, sweep_eigenfunction_closeness, sweep_singular_ratio, METRICS};
use transfer_core::harmonic::{harmonic_eigenvalue, harmonic_singular_value};
use transfer_core::potentials::{check_assumptions, SampleGrid};
use transfer_core::spectral::{block_report, top_eigenpairs, top_singular_values};
use transfer_core::{
    assemble_operator, auto_resolution, saddle_params, solve_rotation, ChainModel, ChainPotential, DiscretizedOperator,
    Error, HarmonicParams, HarmonicSpectrum, Observable, Potential, PowerOptions, Result, Rotation, TransferKernel,
    C64,
};

use crate::config::RunConfig;
use crate::output::{cnum, complex_json, num, GridInfo, Report, Table};

fn cfg_err(e: crate::config::ConfigError) -> Error {
    Error::InvalidInput(e.0)
}

fn get_f64(cfg: &RunConfig, key: &str) -> Result<f64> {
    cfg.f64(key).map_err(cfg_err)
}

fn get_usize(cfg: &RunConfig, key: &str) -> Result<usize> {
    cfg.usize(key).map_err(cfg_err)
}

fn power_options(cfg: &RunConfig) -> Result<PowerOptions> {
    Ok(PowerOptions {
        tol: get_f64(cfg, "solver.tol")?,
        max_iters: get_usize(cfg, "solver.max_iters")?,
        seed: cfg.u64("solver.seed").map_err(cfg_err)?,
    })
}

fn observable(cfg: &RunConfig, key: &str) -> Result<Observable> {
    Observable::by_name(cfg.raw(key))
}

/// The model a config describes, before any `W` is fixed.
#[derive(Debug, Clone, Copy)]
enum Model {
    Harmonic { a: f64, b: f64 },
    Chain(ChainPotential),
}

fn model(cfg: &RunConfig) -> Result<Model> {
    let a = get_f64(cfg, "model.a")?;
    Ok(match cfg.raw("model.kind") {
        "harmonic" => Model::Harmonic {
            a,
            b: get_f64(cfg, "model.b")?,
        },
        "rotated-log" => Model::Chain(ChainPotential::Log {
            a,
            b: C64::new(get_f64(cfg, "model.b")?, get_f64(cfg, "model.b_im")?),
        }),
        _ => Model::Chain(ChainPotential::Quadratic {
            v2: C64::new(get_f64(cfg, "model.v2")?, get_f64(cfg, "model.v2_im")?),
        }),
    })
}

/// `None` means "solve from `V″(0)`".
fn explicit_rotation(cfg: &RunConfig) -> Result<Option<Rotation>> {
    match cfg.raw("model.zeta_arg") {
        "solve" => Ok(None),
        "normal" => Err(Error::InvalidInput(
            "model.zeta_arg = normal applies to the harmonic model only".into(),
        )),
        _ => Ok(Some(Rotation::from_arg(get_f64(cfg, "model.zeta_arg")?))),
    }
}

fn harmonic_family(cfg: &RunConfig, a: f64, b: f64) -> Result<impl Fn(f64) -> Result<HarmonicParams> + Sync + Copy> {
    #[derive(Clone, Copy)]
    enum Mode {
        Solve,
        Normal,
        Fixed(Rotation),
    }
    let mode = match cfg.raw("model.zeta_arg") {
        "solve" => Mode::Solve,
        "normal" => Mode::Normal,
        _ => Mode::Fixed(Rotation::from_arg(get_f64(cfg, "model.zeta_arg")?)),
    };
    Ok(move |w: f64| match mode {
        Mode::Solve => HarmonicParams::rotated(w, a, b),
        Mode::Normal => HarmonicParams::exactly_normal(w, a, b),
        Mode::Fixed(z) => HarmonicParams::new(w, z, a, b),
    })
}

fn chain_potential(cfg: &RunConfig, v: ChainPotential, zeta: Rotation) -> Result<Potential> {
    let p = v.rotated(zeta)?;
    Ok(match v {
        ChainPotential::Log { .. } => p.with_domain(get_f64(cfg, "model.domain")?),
        ChainPotential::Quadratic { .. } => p,
    })
}

/// Rotation and rotated potential, independent of `W` for chain models.
fn chain_setup(cfg: &RunConfig, v: ChainPotential) -> Result<(Rotation, Potential)> {
    let zeta = match explicit_rotation(cfg)? {
        Some(z) => z,
        None => solve_rotation(v.v_second())?,
    };
    Ok((zeta, chain_potential(cfg, v, zeta)?))
}

struct Assembled {
    zeta: Rotation,
    potential: Potential,
    operator: DiscretizedOperator,
    harmonic: Option<HarmonicParams>,
}

fn assemble(cfg: &RunConfig, w: f64) -> Result<Assembled> {
    let rtol = get_f64(cfg, "solver.resolution_tol")?;
    let (zeta, potential, kernel, harmonic) = match model(cfg)? {
        Model::Harmonic { a, b } => {
            let p = harmonic_family(cfg, a, b)?(w)?;
            (p.zeta, p.potential(), p.kernel(), Some(p))
        }
        Model::Chain(v) => {
            let (zeta, potential) = chain_setup(cfg, v)?;
            let kernel = TransferKernel::new(w, zeta, potential.clone())?;
            (zeta, potential, kernel, None)
        }
    };
    let grid = auto_resolution(w, zeta, &potential, rtol)?.grid()?;
    let operator = assemble_operator(&kernel, &grid)?;
    Ok(Assembled {
        zeta,
        potential,
        operator,
        harmonic,
    })
}

pub fn oracle(cfg: &RunConfig) -> Result<Report> {
    let Model::Harmonic { a, b } = model(cfg)? else {
        return Err(Error::InvalidInput("oracle needs model.kind = harmonic".into()));
    };
    let w = get_f64(cfg, "model.w")?;
    let p = harmonic_family(cfg, a, b)?(w)?;
    let spec = HarmonicSpectrum::new(&p, get_usize(cfg, "experiment.j_max")?)?;
    let mut t = Table::new(&[
        "j",
        "lambda_re",
        "lambda_im",
        "lambda_abs",
        "s",
        "s_radical",
        "alpha_hr_re",
        "alpha_hr_im",
        "alpha_t",
    ]);
    let mut summary = Vec::new();
    for (j, l) in spec.eigenvalues.iter().enumerate() {
        let s = spec.singular_values[j];
        let sp = spec.singular_values_radical[j];
        t.push(vec![
            j.to_string(),
            num(l.re),
            num(l.im),
            num(l.norm()),
            num(s),
            num(sp),
            num(spec.alpha_hr.re),
            num(spec.alpha_hr.im),
            num(spec.alpha_t),
        ]);
        summary.push(format!(
            "j={j} |lambda|={} s={} s_radical={}",
            num(l.norm()),
            num(s),
            num(sp)
        ));
    }
    let mut r = Report::new(t);
    r.set("spectrum", &spec);
    r.set("normal_case", p.normal_case());
    r.summary = summary;
    Ok(r)
}

pub fn spectrum(cfg: &RunConfig) -> Result<Report> {
    let w = get_f64(cfg, "model.w")?;
    let k = get_usize(cfg, "experiment.k")?;
    let opts = power_options(cfg)?;
    let asm = assemble(cfg, w)?;
    let pairs = top_eigenpairs(&asm.operator, k, None, &opts)?;
    let sigmas = top_singular_values(&asm.operator, k, &opts)?;
    let mut t = Table::new(&[
        "j",
        "lambda_re",
        "lambda_im",
        "lambda_abs",
        "residual",
        "sigma",
        "exact_lambda_re",
        "exact_lambda_im",
        "exact_sigma",
    ]);
    let mut summary = Vec::new();
    let mut eig_json = Vec::new();
    for (j, (pair, s)) in pairs.iter().zip(&sigmas).enumerate() {
        let (el, es) = match &asm.harmonic {
            Some(p) => (harmonic_eigenvalue(p, j)?, harmonic_singular_value(p, j)),
            None => (C64::new(f64::NAN, f64::NAN), f64::NAN),
        };
        t.push(vec![
            j.to_string(),
            num(pair.lambda0.re),
            num(pair.lambda0.im),
            num(pair.lambda0.norm()),
            num(pair.residual),
            num(*s),
            num(el.re),
            num(el.im),
            num(es),
        ]);
        summary.push(format!(
            "W={} j={j} lambda={} sigma={} residual={}",
            num(w),
            cnum(pair.lambda0),
            num(*s),
            num(pair.residual)
        ));
        eig_json.push(json!({
            "lambda": complex_json(pair.lambda0),
            "residual": pair.residual,
            "iterations": pair.iterations,
            "bilinear_norm": complex_json(pair.bilinear_norm),
        }));
    }
    let mut r = Report::new(t);
    r.grids.push(GridInfo::of(w, &asm.operator.grid));
    r.set("w", w);
    r.set("zeta_arg", asm.zeta.arg());
    r.set("potential", asm.potential.id());
    r.set("eigenpairs", eig_json);
    r.set("singular_values", &sigmas);
    r.summary = summary;
    Ok(r)
}

pub fn blocks(cfg: &RunConfig) -> Result<Report> {
    let w = get_f64(cfg, "model.w")?;
    let opts = power_options(cfg)?;
    let asm = assemble(cfg, w)?;
    let params = saddle_params(w, asm.zeta, asm.potential.second_derivative_at_zero)?;
    let rep = block_report(&asm.operator, &params, &opts)?;
    let b = &rep.blocks;
    let mut t = Table::new(&[
        "w",
        "a_re",
        "a_im",
        "abs_a_minus_1",
        "norm_b",
        "norm_c",
        "norm_d",
        "gap_d",
        "lambda0_over_mu_minus_1",
        "u0_minus_galpha",
        "c0",
    ]);
    let lm = (rep.lambda0 / rep.mu - 1.0).norm();
    t.push(vec![
        num(w),
        num(b.a.re),
        num(b.a.im),
        num((b.a - 1.0).norm()),
        num(b.norm_b),
        num(b.norm_c),
        num(b.norm_d),
        num(rep.gap_d()),
        num(lm),
        num(rep.u0_minus_galpha),
        num(rep.c0),
    ]);
    let mut r = Report::new(t);
    r.grids.push(GridInfo::of(w, &asm.operator.grid));
    r.summary.push(format!(
        "W={} |A-1|={} |B|={} |C|={} |D|={} gap_ratio={}",
        num(w),
        num((b.a - 1.0).norm()),
        num(b.norm_b),
        num(b.norm_c),
        num(b.norm_d),
        num(rep.gap_ratio())
    ));
    r.set("params", params);
    r.set("gap_ratio", rep.gap_ratio());
    r.set("report", &rep);
    Ok(r)
}

pub fn sweep(cfg: &RunConfig) -> Result<Report> {
    let ws = cfg.w_list().map_err(cfg_err)?;
    let opts = power_options(cfg)?;
    let rtol = get_f64(cfg, "solver.resolution_tol")?;
    match model(cfg)? {
        Model::Harmonic { a, b } => harmonic_sweep(cfg, a, b, &ws, rtol, &opts),
        Model::Chain(v) => {
            let (zeta, potential) = chain_setup(cfg, v)?;
            let res = sweep_block_structure(&potential, zeta, &ws, rtol, &opts)?;
            let mut header = vec!["w", "half_length", "n"];
            header.extend(METRICS);
            header.extend(["gap_ratio", "overlap_precondition_ok", "failure"]);
            let mut t = Table::new(&header);
            let mut r = Report::new(Table::default());
            for row in &res.rows {
                let (l, n) = match row.resolution {
                    Some(g) => (num(g.half_length), g.n.to_string()),
                    None => ("".into(), "".into()),
                };
                let mut cells = vec![num(row.w), l, n];
                for m in METRICS {
                    cells.push(row.metric(m).map(num).unwrap_or_default());
                }
                cells.push(num(row.gap_ratio));
                cells.push(row.overlap_precondition_ok.to_string());
                cells.push(row.failure.clone().unwrap_or_default());
                t.push(cells);
                if let Some(g) = row.resolution {
                    r.grids.push(GridInfo {
                        w: row.w,
                        half_length: g.half_length,
                        n: g.n,
                    });
                }
                r.summary.push(match &row.failure {
                    None => format!(
                        "W={} |A-1|={} gap_d={} lambda0/mu-1={}",
                        num(row.w),
                        num(row.metric("abs_a_minus_1").unwrap_or(f64::NAN)),
                        num(row.metric("gap_d").unwrap_or(f64::NAN)),
                        num(row.metric("lambda0_over_mu_minus_1").unwrap_or(f64::NAN))
                    ),
                    Some(e) => format!("W={} failed: {e}", num(row.w)),
                });
            }
            r.table = t;
            r.set("zeta_arg", zeta.arg());
            r.set("potential", potential.id());
            r.set("c0", res.c0);
            r.set("delta_hat", res.delta_hat);
            r.set("fits", &res.fits);
            if res.rows.iter().all(|row| !row.converged()) {
                return Err(Error::NonConvergence {
                    what: "every sweep row",
                    iterations: 0,
                    residual: f64::NAN,
                });
            }
            Ok(r)
        }
    }
}

fn harmonic_sweep(cfg: &RunConfig, a: f64, b: f64, ws: &[f64], rtol: f64, opts: &PowerOptions) -> Result<Report> {
    let family = harmonic_family(cfg, a, b)?;
    let j_max = get_usize(cfg, "experiment.j_max")?;
    let normal = family(ws[0])?.normal_case();
    let ratio = if normal {
        Some(sweep_singular_ratio(family, ws, j_max, rtol, opts)?)
    } else {
        None
    };
    let closeness = sweep_eigenfunction_closeness(family, ws, rtol, opts)?;
    let mut header: Vec<String> = vec!["w".into(), "eigen_residual".into(), "singular_vector_distance".into()];
    header.extend((0..=j_max).map(|j| format!("ratio_{j}")));
    let mut t = Table {
        header,
        rows: Vec::new(),
    };
    let mut r = Report::new(Table::default());
    for (i, &w) in ws.iter().enumerate() {
        let mut cells = vec![
            num(w),
            num(closeness.eigen_residual[i]),
            num(closeness.singular_vector_distance[i]),
        ];
        for j in 0..=j_max {
            cells.push(ratio.as_ref().map(|s| num(s.ratios[i][j])).unwrap_or_default());
        }
        r.summary.push(format!(
            "W={} eigen_residual={} singular_vector_distance={}",
            num(w),
            num(closeness.eigen_residual[i]),
            num(closeness.singular_vector_distance[i])
        ));
        t.rows.push(cells);
        let p = family(w)?;
        let res = auto_resolution(w, p.zeta, &p.potential(), rtol)?;
        r.grids.push(GridInfo {
            w,
            half_length: res.half_length,
            n: res.n,
        });
    }
    r.table = t;
    r.set("normal_case", normal);
    r.set("singular_ratio", &ratio);
    r.set("eigenfunction", &closeness);
    Ok(r)
}

fn chain_model(cfg: &RunConfig, zeta: Option<Rotation>) -> Result<ChainModel> {
    let Model::Chain(v) = model(cfg)? else {
        return Err(Error::InvalidInput(
            "chain experiments need model.kind = rotated-log or quadratic".into(),
        ));
    };
    let w = get_f64(cfg, "model.w")?;
    let rtol = get_f64(cfg, "solver.resolution_tol")?;
    ChainModel::new(v, w, zeta, rtol, power_options(cfg)?)
}

pub fn correlate(cfg: &RunConfig) -> Result<Report> {
    let f = observable(cfg, "experiment.f")?;
    let g = observable(cfg, "experiment.g")?;
    let n_max = get_usize(cfg, "experiment.n_max")?;
    let m = chain_model(cfg, explicit_rotation(cfg)?)?;
    let series = m.correlation_series(&f, &g, n_max)?;
    let mean_f = m.mean_observable(&f)?;
    let mut t = Table::new(&["n", "re", "im", "abs"]);
    let mut r = Report::new(Table::default());
    for (n, v) in series.separations.iter().zip(&series.values) {
        t.push(vec![n.to_string(), num(v.re), num(v.im), num(v.norm())]);
        r.summary.push(format!("n={n} corr={}", cnum(*v)));
    }
    r.table = t;
    r.grids.push(GridInfo::of(m.w, m.grid()));
    let rate = series.rate;
    r.summary.push(format!(
        "rate={} predicted={} c0/W={}",
        rate.map(num).unwrap_or_else(|| "none".into()),
        num(m.predicted_rate()),
        num(series.c0_over_w)
    ));
    r.set("zeta_arg", m.zeta.arg());
    r.set("rate", rate);
    r.set("predicted_rate", m.predicted_rate());
    r.set("c0_over_w", series.c0_over_w);
    r.set(
        "rate_deviation_over_c0_over_w",
        rate.map(|x| (x - m.predicted_rate()).abs() / series.c0_over_w),
    );
    r.set("mean_f", complex_json(mean_f));
    Ok(r)
}

pub fn check_contour(cfg: &RunConfig) -> Result<Report> {
    let f = observable(cfg, "experiment.f")?;
    let sites_left = get_usize(cfg, "experiment.m")?;
    let sites_right = get_usize(cfg, "experiment.n")?;
    let rotated = chain_model(cfg, explicit_rotation(cfg)?)?;
    let straight = chain_model(cfg, Some(Rotation::identity()))?;
    let mut t = Table::new(&["zeta_arg", "finite_re", "finite_im", "infinite_re", "infinite_im"]);
    let mut r = Report::new(Table::default());
    let mut values = Vec::new();
    for m in [&straight, &rotated] {
        let fin = m.finite_chain_mean(&f, sites_left, sites_right)?;
        let inf = m.mean_observable(&f)?;
        t.push(vec![
            num(m.zeta.arg()),
            num(fin.re),
            num(fin.im),
            num(inf.re),
            num(inf.im),
        ]);
        r.summary.push(format!(
            "zeta_arg={} finite={} infinite={}",
            num(m.zeta.arg()),
            cnum(fin),
            cnum(inf)
        ));
        r.grids.push(GridInfo::of(m.w, m.grid()));
        values.push((fin, inf));
    }
    r.table = t;
    let finite_diff = (values[0].0 - values[1].0).norm();
    let infinite_diff = (values[0].1 - values[1].1).norm();
    r.set("finite_abs_diff", finite_diff);
    r.set("infinite_abs_diff", infinite_diff);
    r.summary.push(format!(
        "|finite diff|={} |infinite diff|={}",
        num(finite_diff),
        num(infinite_diff)
    ));
    Ok(r)
}

/// Always produces a report; the caller turns failed checks into the
/// assumption exit code after the files are written.
pub fn check_assumptions_report(cfg: &RunConfig) -> Result<(Report, Vec<String>)> {
    let w = get_f64(cfg, "model.w")?;
    let rtol = get_f64(cfg, "solver.resolution_tol")?;
    let (zeta, potential, chain) = match model(cfg)? {
        Model::Harmonic { a, b } => {
            let p = harmonic_family(cfg, a, b)?(w)?;
            (p.zeta, p.potential(), None)
        }
        Model::Chain(v) => {
            let (zeta, potential) = chain_setup(cfg, v)?;
            (zeta, potential, Some(v))
        }
    };
    let half_length = match auto_resolution(w, zeta, &potential, rtol) {
        Ok(res) => res.half_length,
        Err(_) => potential.domain_halfwidth.min(10.0),
    };
    let report = check_assumptions(&potential, zeta, &SampleGrid::covering(half_length));
    let mut failures: Vec<String> = report.failures().iter().map(|s| s.to_string()).collect();
    let mut t = Table::new(&["check", "passed", "margin"]);
    for (name, c) in [
        ("U1", &report.u1),
        ("U2", &report.u2),
        ("U3", &report.u3),
        ("U4", &report.u4),
    ] {
        t.push(vec![name.into(), c.passed.to_string(), num(c.margin)]);
    }
    for name in cfg.list("experiment.observables") {
        let f = Observable::by_name(&name)?;
        let ok = chain.map(|v| v.admits(&f)).unwrap_or(true);
        if !ok {
            failures.push(format!("F2({name})"));
        }
        t.push(vec![format!("F2:{name}"), ok.to_string(), num(f.growth_degree)]);
    }
    let mut r = Report::new(Table::default());
    for row in &t.rows {
        r.summary
            .push(format!("{} passed={} margin={}", row[0], row[1], row[2]));
    }
    r.table = t;
    r.set("zeta_arg", zeta.arg());
    r.set("potential", potential.id());
    r.set("sample_half_length", half_length);
    r.set("assumptions", &report);
    r.set("failures", &failures);
    Ok((r, failures))
}
