use proptest::prelude::*;
use weylspec::linalg::{self, c, CMat};
use weylspec::models::{self, RandomSystemSpec};
use weylspec::propagate::{self, WeightedSequence};
use weylspec::resolvent::{self, GreenKernel};
use weylspec::{BoundaryMatrix, Complex64, SymplecticSystem};

fn system(which: usize, seed: u64) -> SymplecticSystem {
    match which {
        0 => models::free_jacobi(),
        1 => models::oscillator(1.0),
        _ => models::random_system(&RandomSystemSpec::new(2, seed)),
    }
}

fn rhs(sys: &SymplecticSystem, start: usize, raw: &[(f64, f64)]) -> WeightedSequence {
    let dim = sys.dim();
    let values = raw.chunks(dim).filter(|ch| ch.len() == dim).map(|ch| CMat::from_fn(dim, 1, |i, _| c(ch[i].0, ch[i].1))).collect();
    WeightedSequence::new(start, values)
}

fn lambda_strategy() -> impl Strategy<Value = Complex64> {
    (-3.0..3.0f64, 0.2..1.5f64, any::<bool>()).prop_map(|(re, im, flip)| c(re, if flip { -im } else { im }))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn resolvent_solves_and_contracts(
        which in 0usize..3,
        seed in 0u64..500,
        lambda in lambda_strategy(),
        start in 0usize..5,
        raw in prop::collection::vec((-1.0..1.0f64, -1.0..1.0f64), 4..24),
    ) {
        let sys = system(which, seed);
        let f = rhs(&sys, start, &raw);
        prop_assume!(!f.values.is_empty());
        let n = sys.n();
        let n_out = 160;
        let z = resolvent::resolve(&sys, &BoundaryMatrix::dirichlet(n), lambda, &f, &linalg::zeros(n, 1), n_out).unwrap();
        let defect = resolvent::resolve_defect(&sys, lambda, &z, &f).unwrap();
        prop_assert!(defect < 1e-9, "defect {defect:e}");
        let nz = propagate::seminorm(&sys, &z, (0, n_out)).unwrap().norm;
        let nf = propagate::seminorm(&sys, &f, (f.start, f.end() - 1)).unwrap().norm;
        prop_assert!(nz <= nf / lambda.im.abs() * (1.0 + 1e-6), "{nz} > {nf}/{}", lambda.im.abs());
    }

    #[test]
    fn kernel_symmetries(which in 0usize..3, seed in 0u64..500, lambda in lambda_strategy()) {
        let sys = system(which, seed);
        let alpha = BoundaryMatrix::dirichlet(sys.n());
        let g = GreenKernel::new(&sys, &alpha, lambda, 20).unwrap();
        let gb = GreenKernel::new(&sys, &alpha, lambda.conj(), 20).unwrap();
        let j = linalg::j_matrix(sys.n());
        for k in 0..=20 {
            for jx in 0..=20 {
                let lhs = gb.entry(k, jx).unwrap();
                let mut rhs = g.entry(jx, k).unwrap().adjoint();
                if k == jx {
                    rhs -= &j;
                }
                prop_assert!(linalg::fro(&(lhs - rhs)) < 1e-9, "({k}, {jx})");
            }
        }
    }
}

#[test]
fn first_resolvent_identity() {
    // R(λ) − R(μ) = (λ − μ) R(λ) R(μ), with R(μ)f truncated where it has decayed
    for sys in [models::free_jacobi(), models::oscillator(0.5)] {
        let alpha = BoundaryMatrix::dirichlet(1);
        let (l, m) = (c(0.3, 0.8), c(-0.5, 1.1));
        let f = WeightedSequence::new(
            0,
            vec![CMat::from_column_slice(2, 1, &[c(0.0, 0.0), c(1.0, 0.0)]), CMat::from_column_slice(2, 1, &[c(0.5, 0.0), c(0.0, 1.0)])],
        );
        let xi = linalg::zeros(1, 1);
        let n = 200;
        let zl = resolvent::resolve(&sys, &alpha, l, &f, &xi, n).unwrap();
        let zm = resolvent::resolve(&sys, &alpha, m, &f, &xi, n).unwrap();
        let peak = zm.values.iter().map(linalg::fro).fold(0.0, f64::max);
        let keep = zm.values.iter().rposition(|v| linalg::fro(v) > 1e-17 * peak).unwrap() + 1;
        let zm_cut = WeightedSequence::new(0, zm.values[..keep].to_vec());
        let rz = resolvent::resolve(&sys, &alpha, l, &zm_cut, &xi, n).unwrap();
        for k in 0..=40 {
            let lhs = zl.get(k).unwrap() - zm.get(k).unwrap();
            let rhs = rz.get(k).unwrap() * (l - m);
            assert!(linalg::fro(&(lhs - rhs)) < 1e-10, "{} at k = {k}", sys.label);
        }
    }
}
