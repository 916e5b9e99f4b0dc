//! Point classification and interval scans.

use std::fmt;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use super::boundary::{boundary_limit, NuSchedule};
use super::laurent::refine_pole;
use super::tau::tau_increment;
use crate::error::{Error, Result};
use crate::linalg::{self, c, CMat};
use crate::weyl::MFunction;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum Verdict {
    Resolvent,
    DiscreteEigenvalue,
    PointContinuous,
    Continuous,
    Undetermined,
}

impl Verdict {
    pub const ALL: [Verdict; 5] =
        [Verdict::Resolvent, Verdict::DiscreteEigenvalue, Verdict::PointContinuous, Verdict::Continuous, Verdict::Undetermined];

    pub fn as_str(self) -> &'static str {
        match self {
            Verdict::Resolvent => "Resolvent",
            Verdict::DiscreteEigenvalue => "DiscreteEigenvalue",
            Verdict::PointContinuous => "PointContinuous",
            Verdict::Continuous => "Continuous",
            Verdict::Undetermined => "Undetermined",
        }
    }
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClassifyOptions {
    pub schedule: NuSchedule,
    /// Grid step; sets the isolation radii `δ = 10·step`, `δ′ = step`.
    pub step: f64,
    /// Distance to the nearest other spectral candidate, if known.
    pub neighbor_distance: f64,
    pub eps_l_rel: f64,
    pub eps_im: f64,
    pub eps_tau: f64,
    pub rho_max: f64,
}

impl Default for ClassifyOptions {
    fn default() -> Self {
        Self {
            schedule: NuSchedule::default(),
            step: 0.05,
            neighbor_distance: f64::INFINITY,
            eps_l_rel: 1e-4,
            eps_im: 1e-3,
            eps_tau: 1e-5,
            rho_max: 0.1,
        }
    }
}

impl ClassifyOptions {
    /// `(δ, δ′)`
    pub fn isolation_radii(&self) -> (f64, f64) {
        let delta = (10.0 * self.step).min(0.5 * self.neighbor_distance);
        let inner = self.step.min(delta / 10.0);
        (delta, inner)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Diagnostics {
    pub nus: Vec<f64>,
    pub l_residual: f64,
    pub density_residual: f64,
    pub eps_l: f64,
    /// `(left, right)` flank increments of the isolation test.
    pub flank_increments: Option<(f64, f64)>,
    /// Extrapolated `M₊(λ₀ + i0)` at resolvent points.
    #[serde(serialize_with = "crate::serde_complex::opt_matrix")]
    pub boundary_value: Option<CMat>,
    pub note: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClassificationRecord {
    pub lambda0: f64,
    pub verdict: Verdict,
    #[serde(serialize_with = "crate::serde_complex::matrix")]
    pub l_hat: CMat,
    #[serde(serialize_with = "crate::serde_complex::opt_matrix")]
    pub k_minus1: Option<CMat>,
    /// `None` when `Im M` diverges (pole candidates).
    #[serde(serialize_with = "crate::serde_complex::opt_matrix")]
    pub density_hat: Option<CMat>,
    /// Refined pole position for point-spectrum verdicts.
    pub lambda_star: Option<f64>,
    pub diagnostics: Diagnostics,
}

impl ClassificationRecord {
    fn undetermined(lambda0: f64, n: usize, note: String) -> Self {
        Self {
            lambda0,
            verdict: Verdict::Undetermined,
            l_hat: linalg::zeros(n, n),
            k_minus1: None,
            density_hat: None,
            lambda_star: None,
            diagnostics: Diagnostics {
                nus: Vec::new(),
                l_residual: f64::NAN,
                density_residual: f64::NAN,
                eps_l: f64::NAN,
                flank_increments: None,
                boundary_value: None,
                note: Some(note),
            },
        }
    }

    /// Trace of `K₋₁` (the scalar for `n = 1`).
    pub fn k_minus1_trace(&self) -> Option<f64> {
        self.k_minus1.as_ref().map(|k| linalg::trace(k).re)
    }
}

fn flank<F: MFunction + ?Sized>(mf: &F, l1: f64, l2: f64, nu: f64) -> Result<f64> {
    let inc = tau_increment(mf, l1, l2, nu)?;
    Ok(linalg::fro(&inc))
}

/// Decision procedure at one real point. Never fails: numerical trouble is
/// reported as `Undetermined`.
pub fn classify_point<F: MFunction + ?Sized>(mf: &F, lambda0: f64, opts: &ClassifyOptions) -> ClassificationRecord {
    let n = mf.half_dim();
    let bl = match boundary_limit(mf, lambda0, &opts.schedule) {
        Ok(b) => b,
        Err(e) => return ClassificationRecord::undetermined(lambda0, n, e.to_string()),
    };
    let eps_l = opts.eps_l_rel * (1.0 + linalg::fro(&bl.m_at_nu0));
    let mut rec = ClassificationRecord {
        lambda0,
        verdict: Verdict::Undetermined,
        l_hat: bl.l_hat.clone(),
        k_minus1: None,
        density_hat: Some(bl.density.clone()),
        lambda_star: None,
        diagnostics: Diagnostics {
            nus: bl.nus.clone(),
            l_residual: bl.l_residual,
            density_residual: bl.density_residual,
            eps_l,
            flank_increments: None,
            boundary_value: None,
            note: None,
        },
    };

    if linalg::fro(&bl.l_hat) > eps_l {
        rec.density_hat = None;
        let (delta, inner) = opts.isolation_radii();
        let nu = inner / 100.0;
        let flanks =
            flank(mf, lambda0 - delta, lambda0 - inner, nu).and_then(|l| Ok((l, flank(mf, lambda0 + inner, lambda0 + delta, nu)?)));
        let (left, right) = match flanks {
            Ok(f) => f,
            Err(e) => {
                rec.diagnostics.note = Some(format!("isolation test failed: {e}"));
                return rec;
            }
        };
        rec.diagnostics.flank_increments = Some((left, right));
        if left < opts.eps_tau && right < opts.eps_tau {
            let rho = opts.rho_max.min(delta).min(0.5 * opts.neighbor_distance);
            match refine_pole(mf, lambda0, rho, 4) {
                Ok(p) => {
                    let k = p.k_minus1;
                    let negative = linalg::max_eig(&k) <= 1e-8 * (1.0 + linalg::fro(&k));
                    if negative && linalg::fro(&k) > eps_l {
                        rec.verdict = Verdict::DiscreteEigenvalue;
                        rec.k_minus1 = Some(k);
                        rec.lambda_star = Some(p.position);
                    } else {
                        rec.diagnostics.note = Some("contour residue is not negative semidefinite".into());
                    }
                }
                Err(e) => rec.diagnostics.note = Some(format!("residue extraction failed: {e}")),
            }
        } else if left > 10.0 * opts.eps_tau || right > 10.0 * opts.eps_tau {
            rec.verdict = Verdict::PointContinuous;
            rec.k_minus1 = Some(linalg::re_part(&(&bl.l_hat * linalg::I)));
            rec.lambda_star = Some(lambda0);
        } else {
            rec.diagnostics.note = Some("flank increments between eps_tau and 10 eps_tau".into());
        }
        return rec;
    }

    let d = &bl.density;
    if linalg::fro(d) < opts.eps_im {
        rec.verdict = Verdict::Resolvent;
        rec.diagnostics.boundary_value = Some(bl.m_boundary);
    } else if linalg::max_eig(d) > opts.eps_im && linalg::min_eig(d) > -opts.eps_im {
        rec.verdict = Verdict::Continuous;
    } else {
        rec.diagnostics.note = Some("boundary density is indefinite".into());
    }
    rec
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScanOptions {
    pub classify: ClassifyOptions,
    /// Candidates need `ν₀‖M(t + iν₀)‖` above this.
    pub candidate_threshold: f64,
    /// Number of `ν ← ν/10` refinement levels.
    pub refine_levels: usize,
    pub golden_iterations: usize,
}

impl Default for ScanOptions {
    fn default() -> Self {
        Self { classify: ClassifyOptions::default(), candidate_threshold: 1e-6, refine_levels: 5, golden_iterations: 40 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PointSpectrumEntry {
    pub lambda: f64,
    pub verdict: Verdict,
    #[serde(serialize_with = "crate::serde_complex::matrix")]
    pub k_minus1: CMat,
    pub record: ClassificationRecord,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpectralMap {
    pub interval: (f64, f64),
    pub resolution: usize,
    pub records: Vec<ClassificationRecord>,
    pub eigenvalues: Vec<PointSpectrumEntry>,
}

impl SpectralMap {
    pub fn count(&self, verdict: Verdict) -> usize {
        self.records.iter().filter(|r| r.verdict == verdict).count()
    }

    pub fn undetermined_fraction(&self) -> f64 {
        self.count(Verdict::Undetermined) as f64 / self.records.len().max(1) as f64
    }

    pub fn discrete_eigenvalues(&self) -> Vec<f64> {
        self.eigenvalues.iter().filter(|e| e.verdict == Verdict::DiscreteEigenvalue).map(|e| e.lambda).collect()
    }
}

fn profile<F: MFunction + ?Sized>(mf: &F, t: f64, nu: f64) -> Option<f64> {
    match mf.eval(c(t, nu)) {
        Ok(ev) if ev.converged => Some(nu * linalg::fro(&ev.value)),
        _ => None,
    }
}

/// Golden-section maximization on `[lo, hi]`; `None` if an evaluation fails.
fn golden_max<G: Fn(f64) -> Option<f64>>(g: G, mut lo: f64, mut hi: f64, iterations: usize) -> Option<(f64, f64)> {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = hi - inv_phi * (hi - lo);
    let mut x2 = lo + inv_phi * (hi - lo);
    let mut f1 = g(x1)?;
    let mut f2 = g(x2)?;
    for _ in 0..iterations {
        if f1 < f2 {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + inv_phi * (hi - lo);
            f2 = g(x2)?;
        } else {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - inv_phi * (hi - lo);
            f1 = g(x1)?;
        }
    }
    Some(if f1 > f2 { (x1, f1) } else { (x2, f2) })
}

/// Follows a profile maximum through `ν₀, ν₀/10, …`. Near a pole the peak
/// height tends to `‖K₋₁‖`; away from one it shrinks like `ν`, so a last
/// level that lost more than half the height rejects the candidate.
fn refine_candidate<F: MFunction + ?Sized>(mf: &F, t0: f64, half_width: f64, opts: &ScanOptions) -> Option<f64> {
    let nu0 = opts.classify.schedule.nu0;
    let (mut center, mut peak) = golden_max(|t| profile(mf, t, nu0), t0 - half_width, t0 + half_width, opts.golden_iterations)?;
    let mut nu_prev = nu0;
    let mut last_ratio = 1.0;
    for level in 1..=opts.refine_levels {
        let nu = nu0 * 10f64.powi(-(level as i32));
        let span = 5.0 * nu_prev;
        let Some((t, p)) = golden_max(|t| profile(mf, t, nu), center - span, center + span, opts.golden_iterations) else {
            break;
        };
        last_ratio = p / peak;
        center = t;
        peak = p;
        nu_prev = nu;
    }
    (last_ratio >= 0.5).then_some(center)
}

/// Classifies every grid point of `[a, b]` and the refined pole candidates.
pub fn scan_spectrum<F: MFunction + ?Sized>(mf: &F, a: f64, b: f64, resolution: usize, opts: &ScanOptions) -> Result<SpectralMap> {
    if !(a < b) || resolution < 2 {
        return Err(Error::BadInput("scan needs a < b and resolution >= 2".into()));
    }
    let h = (b - a) / (resolution - 1) as f64;
    let grid: Vec<f64> = (0..resolution).map(|i| a + h * i as f64).collect();
    let mut copts = opts.classify.clone();
    copts.step = h;

    // candidate profile on a grid padded by ten steps per side
    let pad = 10usize;
    let ext: Vec<f64> = (0..resolution + 2 * pad).map(|i| a + h * (i as f64 - pad as f64)).collect();
    let nu0 = copts.schedule.nu0;
    let g: Vec<Option<f64>> = ext.par_iter().map(|&t| profile(mf, t, nu0)).collect();
    let mut seeds = Vec::new();
    for i in 1..ext.len() - 1 {
        if let (Some(l), Some(m), Some(r)) = (g[i - 1], g[i], g[i + 1]) {
            if m > l && m >= r && m > opts.candidate_threshold {
                seeds.push(ext[i]);
            }
        }
    }
    let records: Vec<ClassificationRecord> = grid.par_iter().map(|&t| classify_point(mf, t, &copts)).collect();

    let mut cands: Vec<f64> = seeds.par_iter().filter_map(|&t| refine_candidate(mf, t, h, opts)).collect();
    // M₊ increases between poles, so a drop of tr M between two resolvent
    // neighbours encloses a pole too small to show in the profile
    let drops: Vec<f64> = records
        .windows(2)
        .filter_map(|w| {
            let lo = w[0].diagnostics.boundary_value.as_ref()?;
            let hi = w[1].diagnostics.boundary_value.as_ref()?;
            (linalg::trace(hi).re < linalg::trace(lo).re).then_some(0.5 * (w[0].lambda0 + w[1].lambda0))
        })
        .collect();
    cands.extend(
        drops
            .par_iter()
            .filter_map(|&t| {
                let p = refine_pole(mf, t, h, 4).ok()?;
                ((p.position - t).abs() <= h).then_some(p.position)
            })
            .collect::<Vec<_>>(),
    );
    cands.sort_by(f64::total_cmp);
    cands.dedup_by(|x, y| (*x - *y).abs() < 1e-6);

    let entries: Vec<Option<PointSpectrumEntry>> = cands
        .par_iter()
        .enumerate()
        .map(|(i, &t)| {
            let left = if i > 0 { t - cands[i - 1] } else { f64::INFINITY };
            let right = cands.get(i + 1).map_or(f64::INFINITY, |u| u - t);
            let mut o = copts.clone();
            o.neighbor_distance = left.min(right);
            let first = classify_point(mf, t, &o);
            let rec = match (first.verdict, first.lambda_star) {
                (Verdict::DiscreteEigenvalue, Some(p)) if p != t => {
                    let again = classify_point(mf, p, &o);
                    if again.verdict == Verdict::DiscreteEigenvalue {
                        again
                    } else {
                        first
                    }
                }
                _ => first,
            };
            let lambda = rec.lambda_star?;
            if !(a..=b).contains(&lambda) {
                return None;
            }
            match rec.verdict {
                Verdict::DiscreteEigenvalue | Verdict::PointContinuous => Some(PointSpectrumEntry {
                    lambda,
                    verdict: rec.verdict,
                    k_minus1: rec.k_minus1.clone().expect("point verdicts carry a residue"),
                    record: rec,
                }),
                _ => None,
            }
        })
        .collect();
    let eigenvalues = entries.into_iter().flatten().collect();
    Ok(SpectralMap { interval: (a, b), resolution, records, eigenvalues })
}

/// `M` at a real point, via the boundary limit; only meaningful where the
/// point is classified `Resolvent`.
pub fn boundary_value<F: MFunction + ?Sized>(mf: &F, lambda0: f64, schedule: &NuSchedule) -> Result<Complex64> {
    let b = boundary_limit(mf, lambda0, schedule)?;
    Ok(linalg::trace(&b.m_boundary))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classify::herglotz::HerglotzModel;

    #[test]
    fn one_jump_is_discrete() {
        let model = HerglotzModel::scalar(&[(0.0, 1.0)], 0.0, 0.0).unwrap();
        let rec = classify_point(&model, 0.0, &ClassifyOptions::default());
        assert_eq!(rec.verdict, Verdict::DiscreteEigenvalue);
        assert!((rec.k_minus1.unwrap()[(0, 0)].re + 1.0).abs() < 1e-10);
    }

    #[test]
    fn away_from_jump_is_resolvent() {
        let model = HerglotzModel::scalar(&[(0.0, 1.0)], 0.0, 0.0).unwrap();
        let rec = classify_point(&model, 0.7, &ClassifyOptions::default());
        assert_eq!(rec.verdict, Verdict::Resolvent);
    }

    #[test]
    fn golden_section_finds_peak() {
        let (x, _) = golden_max(|t| Some(-(t - 0.3).powi(2)), 0.0, 1.0, 60).unwrap();
        assert!((x - 0.3).abs() < 1e-8);
    }
}
