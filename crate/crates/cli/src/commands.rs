//! Command implementations. Each command fills an [`Outputs`] buffer; the
//! files and the manifest are written once at the end.

use std::error::Error as StdError;
use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;
use serde_json::json;
use weylspec::classify::{self, ClassifyOptions, NuSchedule, ScanOptions, Verdict};
use weylspec::linalg::{self, c, CMat};
use weylspec::propagate::{self, WeightedSequence};
use weylspec::system::{check_atkinson, validate_system, DEFAULT_TOL};
use weylspec::weyl::{N_MAX, N_MIN};
use weylspec::{oracle, resolvent, BoundaryMatrix, Complex64, LimitOptions, MFunction, MPlusEvaluation, SymplecticSystem, SystemMFunction};

use crate::config::{self, Config, Target};
use crate::output::{self, num, opt, Csv, NScheduleInfo, NuScheduleInfo, Outputs, RunInputs, Tolerances};
use crate::{Command, Flags, Format};

type AnyResult<T> = Result<T, Box<dyn StdError + Send + Sync>>;

/// Exit code for scans dominated by `Undetermined` verdicts.
const EXIT_UNDETERMINED: u8 = 2;
const EXIT_ERROR: u8 = 1;

const DEFAULT_SEED: u64 = 0x5eed;

/// `tau` smooths at `ν₀/100`; the bottom of the ν schedule is too close to
/// the axis for the Weyl limit inside continuous spectrum.
const TAU_NU_FACTOR: f64 = 1e-2;

struct Settings {
    limit: LimitOptions,
    scan: ScanOptions,
    structure_tol: f64,
    /// Smoothing height of the spectral-function increments.
    tau_nu: f64,
}

impl Settings {
    fn resolve(cfg: &config::ConfigOptions, flags: &Flags) -> AnyResult<Self> {
        let base = NuSchedule::default();
        let schedule = NuSchedule {
            nu0: flags.nu0.or(cfg.nu0).unwrap_or(base.nu0),
            ratio: flags.nu_ratio.or(cfg.nu_ratio).unwrap_or(base.ratio),
            count: flags.nu_count.or(cfg.nu_count).unwrap_or(base.count),
        };
        schedule.validate()?;
        let tol = flags.tol.or(cfg.tol);
        let limit = LimitOptions {
            tol: tol.unwrap_or(LimitOptions::default().tol),
            n_min: N_MIN,
            n_max: flags.nmax.or(cfg.nmax).unwrap_or(N_MAX),
            seed: flags.seed.or(cfg.seed).unwrap_or(DEFAULT_SEED),
            probes: None,
        };
        if limit.n_max < limit.n_min {
            return Err(format!("--nmax must be at least {N_MIN}").into());
        }
        let scan = ScanOptions { classify: ClassifyOptions { schedule, ..ClassifyOptions::default() }, ..ScanOptions::default() };
        Ok(Self { limit, scan, structure_tol: tol.unwrap_or(DEFAULT_TOL), tau_nu: TAU_NU_FACTOR * schedule.nu0 })
    }

    fn schedule(&self) -> NuSchedule {
        self.scan.classify.schedule
    }
}

fn describe(flags: &Flags, settings: &Settings) -> Vec<String> {
    vec![
        format!("tau_nu={}", num(settings.tau_nu)),
        format!(
            "format={}",
            match flags.format {
                Format::Csv => "csv",
                Format::Json => "json",
            }
        ),
        format!("range={:?}", flags.range),
        format!("resolution={:?}", flags.resolution),
        format!("lambda={:?}", flags.lambda.map(|z| (z.re, z.im))),
        format!("window={:?}", flags.window),
    ]
}

pub fn run(command: Command, flags: &Flags, start: Instant) -> AnyResult<u8> {
    let path = flags.config.as_ref().ok_or("--config is required")?;
    let loaded = config::load(path)?;
    let settings = Settings::resolve(&loaded.config.options, flags)?;
    let schedule = settings.schedule();
    let copts = &settings.scan.classify;
    let inputs = RunInputs {
        tool: "weylspec",
        version: env!("CARGO_PKG_VERSION"),
        command: command.name().to_string(),
        arguments: describe(flags, &settings),
        config_sha256: output::sha256_hex(&loaded.raw),
        seed: settings.limit.seed,
        tolerances: Tolerances {
            limit_tol: settings.limit.tol,
            eps_l_rel: copts.eps_l_rel,
            eps_im: copts.eps_im,
            eps_tau: copts.eps_tau,
            structure_tol: settings.structure_tol,
        },
        nu_schedule: NuScheduleInfo { nu0: schedule.nu0, ratio: schedule.ratio, count: schedule.count, nodes: schedule.nodes() },
        n_schedule: NScheduleInfo { n_min: settings.limit.n_min, n_max: settings.limit.n_max, rule: "dyadic" },
    };
    let hash = inputs.hash();
    let mut out = Outputs::default();
    let ctx = Context { cfg: &loaded.config, flags, settings: &settings, hash: &hash };
    let code = match dispatch(command, &ctx, &mut out) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            out.add_json("error.json", &hash, &json!({ "error": e.to_string() }));
            match e.downcast_ref::<weylspec::Error>() {
                Some(weylspec::Error::Inconclusive(_)) => EXIT_UNDETERMINED,
                _ => EXIT_ERROR,
            }
        }
    };
    out.write(&flags.out_dir, &inputs, &hash, code, start.elapsed().as_secs_f64())?;
    Ok(code)
}

struct Context<'a> {
    cfg: &'a Config,
    flags: &'a Flags,
    settings: &'a Settings,
    hash: &'a str,
}

impl Context<'_> {
    fn mfunction(&self) -> Box<dyn MFunction> {
        match &self.cfg.target {
            Target::System { sys, alpha, .. } => {
                Box::new(SystemMFunction::new(sys.clone(), alpha.clone()).with_options(self.settings.limit.clone()))
            }
            Target::Herglotz(h) => Box::new(h.clone()),
        }
    }

    fn system(&self, command: Command) -> AnyResult<(&SymplecticSystem, &BoundaryMatrix)> {
        match &self.cfg.target {
            Target::System { sys, alpha, .. } => Ok((sys, alpha)),
            Target::Herglotz(_) => Err(format!("{} needs a system model", command.name()).into()),
        }
    }

    fn range(&self) -> AnyResult<(f64, f64)> {
        match self.flags.range.as_deref() {
            Some(&[a, b]) if a < b => Ok((a, b)),
            Some(_) => Err("--range needs A < B".into()),
            None => Err("--range A B is required".into()),
        }
    }

    fn grid(&self, default_resolution: usize) -> AnyResult<Vec<f64>> {
        let (a, b) = self.range()?;
        let r = self.flags.resolution.unwrap_or(default_resolution);
        if r < 2 {
            return Err("--resolution must be at least 2".into());
        }
        let h = (b - a) / (r - 1) as f64;
        Ok((0..r).map(|i| a + h * i as f64).collect())
    }

    fn real_lambda(&self) -> AnyResult<f64> {
        match self.flags.lambda {
            Some(z) if z.im == 0.0 => Ok(z.re),
            Some(_) => Err("--lambda must be real here".into()),
            None => Err("--lambda is required".into()),
        }
    }
}

fn dispatch(command: Command, ctx: &Context<'_>, out: &mut Outputs) -> AnyResult<u8> {
    if command != Command::Validate {
        config::check_structure(ctx.cfg)?;
    }
    match command {
        Command::Validate => validate(ctx, out),
        Command::Mfun => mfun(ctx, out),
        Command::Classify => classify_cmd(ctx, out),
        Command::Spectrum => spectrum(ctx, out),
        Command::Tau => tau(ctx, out),
        Command::Resolve => resolve(ctx, out),
        Command::Oracle => oracle_cmd(ctx, out),
        Command::Interlace => interlace(ctx, out),
    }
}

fn tr_re(m: &CMat) -> f64 {
    linalg::trace(m).re
}

fn tr_im(m: &CMat) -> f64 {
    linalg::trace(m).im
}

fn validate(ctx: &Context<'_>, out: &mut Outputs) -> AnyResult<u8> {
    let Target::System { sys, .. } = &ctx.cfg.target else {
        out.add_json(
            "validation.json",
            ctx.hash,
            &json!({ "pass": true, "failed_checks": [], "note": "closed-form M-function; no coefficients to check" }),
        );
        return Ok(0);
    };
    let k_max = ctx.flags.window.unwrap_or(1000);
    let tol = ctx.settings.structure_tol;
    let report = validate_system(sys, k_max, tol)?;
    let atkinson = check_atkinson(sys, 1, tol)?;
    let failed = report.failed_checks();
    let pass = report.pass && atkinson.holds;
    let mut failed_names: Vec<&str> = failed.clone();
    if !atkinson.holds {
        failed_names.push("atkinson");
    }
    out.add_json(
        "validation.json",
        ctx.hash,
        &json!({
            "pass": pass,
            "failed_checks": failed_names,
            "structure": report,
            "atkinson": { "holds": atkinson.holds, "window": atkinson.window, "min_eigenvalue": atkinson.min_eigenvalue },
        }),
    );
    if pass {
        Ok(0)
    } else {
        eprintln!("validation failed: {}", failed_names.join(", "));
        Ok(EXIT_ERROR)
    }
}

#[derive(Serialize)]
struct FailedPoint {
    #[serde(serialize_with = "weylspec::serde_complex::scalar")]
    lambda: Complex64,
    error: String,
}

#[derive(Serialize)]
#[serde(untagged)]
enum GridPoint {
    Ok(MPlusEvaluation),
    Failed(FailedPoint),
}

fn mfun(ctx: &Context<'_>, out: &mut Outputs) -> AnyResult<u8> {
    let mf = ctx.mfunction();
    if let Some(lambda) = ctx.flags.lambda {
        let ev = mf.eval(lambda)?;
        out.add_json("mfun.json", ctx.hash, &ev);
        return Ok(0);
    }
    let res = ctx.grid(21)?;
    let nus = ctx.settings.schedule().nodes();
    let points: Vec<Complex64> = res.iter().flat_map(|&t| nus.iter().map(move |&nu| c(t, nu))).collect();
    let evals: Vec<GridPoint> = points
        .par_iter()
        .map(|&z| match mf.eval(z) {
            Ok(ev) => GridPoint::Ok(ev),
            Err(e) => GridPoint::Failed(FailedPoint { lambda: z, error: e.to_string() }),
        })
        .collect();
    match ctx.flags.format {
        Format::Json => out.add_json("mfun.json", ctx.hash, &json!({ "points": evals })),
        Format::Csv => {
            let mut csv = Csv::new(ctx.hash, "re,im,M_re,M_im,N_used,diameter");
            for (z, p) in points.iter().zip(&evals) {
                let cells = match p {
                    GridPoint::Ok(ev) => {
                        vec![num(z.re), num(z.im), num(tr_re(&ev.value)), num(tr_im(&ev.value)), ev.n_used.to_string(), num(ev.diameter)]
                    }
                    GridPoint::Failed(_) => vec![num(z.re), num(z.im), String::new(), String::new(), String::new(), String::new()],
                };
                csv.row(&cells);
            }
            out.add_csv("mfun.csv", csv);
        }
    }
    Ok(0)
}

fn classify_cmd(ctx: &Context<'_>, out: &mut Outputs) -> AnyResult<u8> {
    let lambda0 = ctx.real_lambda()?;
    let rec = classify::classify_point(&*ctx.mfunction(), lambda0, &ctx.settings.scan.classify);
    out.add_json("classification.json", ctx.hash, &rec);
    Ok(if rec.verdict == Verdict::Undetermined { EXIT_UNDETERMINED } else { 0 })
}

fn spectrum(ctx: &Context<'_>, out: &mut Outputs) -> AnyResult<u8> {
    let (a, b) = ctx.range()?;
    let resolution = ctx.flags.resolution.unwrap_or(61);
    let map = classify::scan_spectrum(&*ctx.mfunction(), a, b, resolution, &ctx.settings.scan)?;
    match ctx.flags.format {
        Format::Json => out.add_json("spectrum.json", ctx.hash, &map),
        Format::Csv => {
            let mut csv = Csv::new(ctx.hash, "lambda0,verdict,L_re,L_im,Kminus1,density_im,residual");
            for r in &map.records {
                csv.row(&[
                    num(r.lambda0),
                    r.verdict.to_string(),
                    num(tr_re(&r.l_hat)),
                    num(tr_im(&r.l_hat)),
                    opt(r.k_minus1_trace()),
                    opt(r.density_hat.as_ref().map(tr_re)),
                    num(r.diagnostics.l_residual),
                ]);
            }
            out.add_csv("spectrum.csv", csv);
            let mut eig = Csv::new(ctx.hash, "lambda,verdict,Kminus1");
            for e in &map.eigenvalues {
                eig.row(&[num(e.lambda), e.verdict.to_string(), num(tr_re(&e.k_minus1))]);
            }
            out.add_csv("eigenvalues.csv", eig);
        }
    }
    Ok(if map.undetermined_fraction() > 0.5 { EXIT_UNDETERMINED } else { 0 })
}

#[derive(Serialize)]
struct TauRow {
    t1: f64,
    t2: f64,
    #[serde(serialize_with = "weylspec::serde_complex::matrix")]
    increment: CMat,
}

fn tau(ctx: &Context<'_>, out: &mut Outputs) -> AnyResult<u8> {
    let grid = ctx.grid(11)?;
    let nu = ctx.settings.tau_nu;
    let mf = ctx.mfunction();
    let rows: Vec<TauRow> = grid
        .par_windows(2)
        .map(|w| Ok(TauRow { t1: w[0], t2: w[1], increment: classify::tau_increment(&*mf, w[0], w[1], nu)? }))
        .collect::<weylspec::Result<_>>()?;
    match ctx.flags.format {
        Format::Json => out.add_json("tau.json", ctx.hash, &json!({ "nu": nu, "rows": rows })),
        Format::Csv => {
            let mut csv = Csv::new(ctx.hash, "t1,t2,increment");
            for r in &rows {
                csv.row(&[num(r.t1), num(r.t2), num(tr_re(&r.increment))]);
            }
            out.add_csv("tau.csv", csv);
        }
    }
    Ok(0)
}

fn resolve(ctx: &Context<'_>, out: &mut Outputs) -> AnyResult<u8> {
    let (sys, alpha) = ctx.system(Command::Resolve)?;
    let lambda = ctx.flags.lambda.ok_or("--lambda is required")?;
    if lambda.im == 0.0 {
        return Err("--lambda must be nonreal for resolve".into());
    }
    let n = sys.n();
    let window = ctx.flags.window.unwrap_or(100);
    let (start, values) = match &ctx.cfg.rhs {
        Some((s, v)) => (*s, v.clone()),
        // unit load on the weighted component at k = 0
        None => (0, vec![CMat::from_fn(2 * n, 1, |i, _| if i >= n { c(1.0, 0.0) } else { linalg::ZERO })]),
    };
    let f = WeightedSequence::new(start, values);
    let xi = linalg::zeros(n, 1);
    let z = resolvent::resolve(sys, alpha, lambda, &f, &xi, window)?;
    let defect = resolvent::resolve_defect(sys, lambda, &z, &f)?;
    let norm_z = propagate::seminorm(sys, &z, (0, window))?.norm;
    let norm_f = propagate::seminorm(sys, &f, (f.start, f.end() - 1))?.norm;
    let bound = norm_f / lambda.im.abs();
    let summary = json!({
        "lambda": [lambda.re, lambda.im],
        "window": window,
        "defect": defect,
        "norm_z": norm_z,
        "norm_f": norm_f,
        "bound": bound,
        "within_bound": norm_z <= bound * (1.0 + 1e-6),
    });
    match ctx.flags.format {
        Format::Json => {
            let values: Vec<Vec<[f64; 2]>> = z.values.iter().map(|v| v.iter().map(|x| [x.re, x.im]).collect()).collect();
            out.add_json("resolve.json", ctx.hash, &json!({ "summary": summary, "z": values }));
        }
        Format::Csv => {
            out.add_json("resolve.json", ctx.hash, &json!({ "summary": summary }));
            let mut csv = Csv::new(ctx.hash, "k,component,re,im");
            for (k, v) in z.values.iter().enumerate() {
                for (i, x) in v.iter().enumerate() {
                    csv.row(&[k.to_string(), i.to_string(), num(x.re), num(x.im)]);
                }
            }
            out.add_csv("resolve.csv", csv);
        }
    }
    Ok(0)
}

fn oracle_cmd(ctx: &Context<'_>, out: &mut Outputs) -> AnyResult<u8> {
    let (sys, alpha) = ctx.system(Command::Oracle)?;
    let (a, b) = ctx.range()?;
    let size = ctx.flags.window.unwrap_or(200);
    if size == 0 {
        return Err("--window must be positive".into());
    }
    let resolution = ctx.flags.resolution.unwrap_or(40 * size);
    let beta = BoundaryMatrix::dirichlet(sys.n());
    let scan = oracle::det_root_scan(sys, alpha, &beta, size, a, b, resolution)?;
    let tridiagonal: Option<Vec<f64>> = match (&ctx.cfg.target, alpha.angle()) {
        (Target::System { jacobi: Some(model), .. }, Some(angle)) => {
            Some(oracle::jacobi_truncation_eigs(model, size, angle)?.into_iter().filter(|x| (a..=b).contains(x)).collect())
        }
        _ => None,
    };
    let paired = tridiagonal.as_ref().filter(|t| t.len() == scan.roots.len());
    let max_difference = paired.map(|t| t.iter().zip(&scan.roots).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max));
    let summary = json!({
        "size": size,
        "resolution": resolution,
        "det_scan_count": scan.roots.len(),
        "tridiagonal_count": tridiagonal.as_ref().map(Vec::len),
        "max_difference": max_difference,
        "refined_intervals": scan.refined_intervals,
    });
    match ctx.flags.format {
        Format::Json => {
            out.add_json("oracle.json", ctx.hash, &json!({ "summary": summary, "det_scan": scan.roots, "tridiagonal": tridiagonal }))
        }
        Format::Csv => {
            out.add_json("oracle.json", ctx.hash, &json!({ "summary": summary }));
            let mut csv = Csv::new(ctx.hash, "index,tridiagonal,det_scan,difference");
            let rows = scan.roots.len().max(tridiagonal.as_ref().map_or(0, Vec::len));
            for i in 0..rows {
                let t = tridiagonal.as_ref().and_then(|v| v.get(i).copied());
                let d = scan.roots.get(i).copied();
                let diff = paired.and(t.zip(d)).map(|(x, y)| (x - y).abs());
                csv.row(&[i.to_string(), opt(t), opt(d), opt(diff)]);
            }
            out.add_csv("oracle.csv", csv);
        }
    }
    Ok(0)
}

fn interlace(ctx: &Context<'_>, out: &mut Outputs) -> AnyResult<u8> {
    let (sys, alpha) = ctx.system(Command::Interlace)?;
    let (a, b) = ctx.range()?;
    let resolution = ctx.flags.resolution.unwrap_or(61);
    let alpha_hat = ctx.cfg.alpha_hat.clone().unwrap_or_else(|| alpha.complement());
    let first = SystemMFunction::new(sys.clone(), alpha.clone()).with_options(ctx.settings.limit.clone());
    let second = SystemMFunction::new(sys.clone(), alpha_hat.clone()).with_options(ctx.settings.limit.clone());
    let report = classify::interlace_check(&first, &second, alpha, &alpha_hat, a, b, resolution, &ctx.settings.scan)?;
    out.add_json("interlace.json", ctx.hash, &report);
    Ok(0)
}
