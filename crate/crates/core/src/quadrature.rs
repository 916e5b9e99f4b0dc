//! Adaptive Gauss–Kronrod (7/15) quadrature for matrix-valued integrands.

use crate::error::{Error, Result};
use crate::linalg::{self, c, CMat};

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_728,
];
const WG: [f64; 4] = [0.129_484_966_168_869_7, 0.279_705_391_489_276_7, 0.381_830_050_505_118_9, 0.417_959_183_673_469_4];

/// One 15-point Kronrod panel: `(estimate, |kronrod − gauss|)`.
fn panel<F>(f: &F, a: f64, b: f64) -> Result<(CMat, f64)>
where
    F: Fn(f64) -> Result<CMat>,
{
    let mid = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let center = f(mid)?;
    let mut kron = &center * c(WGK[7], 0.0);
    let mut gauss = &center * c(WG[3], 0.0);
    for j in 0..7 {
        let dx = half * XGK[j];
        let pair = f(mid - dx)? + f(mid + dx)?;
        kron += &pair * c(WGK[j], 0.0);
        if j % 2 == 1 {
            gauss += &pair * c(WG[j / 2], 0.0);
        }
    }
    let err = linalg::fro(&(&kron - &gauss)) * half.abs();
    Ok((kron * c(half, 0.0), err))
}

/// `∫_a^b f` to `max(abs_tol, rel_tol·‖∫‖)` by global bisection of the
/// worst panel.
pub fn integrate<F>(f: F, a: f64, b: f64, abs_tol: f64, rel_tol: f64, max_panels: usize) -> Result<CMat>
where
    F: Fn(f64) -> Result<CMat>,
{
    if a == b {
        let shape = f(a)?.shape();
        return Ok(linalg::zeros(shape.0, shape.1));
    }
    let (v, e) = panel(&f, a, b)?;
    let mut panels = vec![(a, b, v, e)];
    loop {
        let total: CMat = panels.iter().skip(1).fold(panels[0].2.clone(), |acc, p| acc + &p.2);
        let err: f64 = panels.iter().map(|p| p.3).sum();
        if err <= abs_tol.max(rel_tol * linalg::fro(&total)) {
            return Ok(total);
        }
        if panels.len() >= max_panels {
            return Err(Error::NotConverged(format!("quadrature on [{a}, {b}] stalled at error {err:.2e} after {max_panels} panels")));
        }
        let worst = panels.iter().enumerate().max_by(|x, y| x.1 .3.total_cmp(&y.1 .3)).map(|(i, _)| i).expect("nonempty");
        let (pa, pb, _, _) = panels.swap_remove(worst);
        let pm = 0.5 * (pa + pb);
        let (lv, le) = panel(&f, pa, pm)?;
        let (rv, re) = panel(&f, pm, pb)?;
        panels.push((pa, pm, lv, le));
        panels.push((pm, pb, rv, re));
    }
}
