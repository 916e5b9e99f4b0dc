use proptest::prelude::*;
use std::f64::consts::FRAC_PI_2;
use weylspec::models::{self, JacobiModel};
use weylspec::oracle::{det_root_scan, jacobi_truncation_eigs};
use weylspec::system::{Seq, TailRule};
use weylspec::BoundaryMatrix;

/// Eigenvalues below `x` of `T y = λ W y` on indices `1..=size` with
/// `y_0 = y_{size+1} = 0`: negative pivots of `T − xW`.
fn sturm_count(m: &JacobiModel, size: usize, x: f64) -> usize {
    let mut negative = 0;
    let mut d = 1.0;
    for k in 1..=size {
        let coupling = if k == 1 { 0.0 } else { m.a(k - 1).unwrap().powi(2) / d };
        d = m.b(k).unwrap() - x * m.w(k).unwrap() - coupling;
        if d == 0.0 {
            d = f64::EPSILON;
        }
        if d < 0.0 {
            negative += 1;
        }
    }
    negative
}

fn model_strategy() -> impl Strategy<Value = JacobiModel> {
    (5usize..40).prop_flat_map(|len| {
        (
            prop::collection::vec(prop_oneof![0.3..2.0f64, -2.0..-0.3f64], len + 2),
            prop::collection::vec(-2.0..2.0f64, len + 2),
            prop::collection::vec(0.5..2.0f64, len + 2),
        )
            .prop_map(|(a, b, w)| {
                let t = |values| Seq::Table { values, tail: TailRule::RepeatLast };
                JacobiModel::new(t(a), t(b), t(w))
            })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn both_oracles_match_sturm_counts(model in model_strategy(), size in 3usize..30, probes in prop::collection::vec(-6.0..6.0f64, 5)) {
        let eigs = jacobi_truncation_eigs(&model, size, FRAC_PI_2).unwrap();
        prop_assert_eq!(eigs.len(), size);
        let sys = models::jacobi_to_symplectic(&model).unwrap();
        let d = BoundaryMatrix::dirichlet(1);
        let (lo, hi) = (eigs[0] - 1.0, eigs[size - 1] + 1.0);
        let roots = det_root_scan(&sys, &d, &d, size, lo, hi, 30 * size).unwrap().roots;
        prop_assert_eq!(roots.len(), size);
        for (x, y) in roots.iter().zip(&eigs) {
            prop_assert!((x - y).abs() < 1e-8, "{} vs {}", x, y);
        }
        for x in probes {
            let expected = sturm_count(&model, size, x);
            // skip probes that sit on an eigenvalue
            if eigs.iter().any(|e| (e - x).abs() < 1e-9) {
                continue;
            }
            prop_assert_eq!(eigs.iter().filter(|&&e| e < x).count(), expected);
            prop_assert_eq!(roots.iter().filter(|&&e| e < x).count(), expected);
        }
    }
}

#[test]
fn direct_sum_roots_are_the_union() {
    let parts = [models::free_jacobi(), models::oscillator(1.0)];
    let sum = models::direct_sum(&parts).unwrap();
    let size = 25;
    let mut union = jacobi_truncation_eigs(&models::free_jacobi_model(), size, FRAC_PI_2).unwrap();
    union.extend(jacobi_truncation_eigs(&models::oscillator_model(1.0), size, FRAC_PI_2).unwrap());
    union.retain(|x| (-3.0..8.0).contains(x));
    union.sort_by(f64::total_cmp);
    let d = BoundaryMatrix::dirichlet(2);
    let roots = det_root_scan(&sum, &d, &d, size, -3.0, 8.0, 1500).unwrap().roots;
    assert_eq!(roots.len(), union.len(), "{roots:?}\n{union:?}");
    for (x, y) in roots.iter().zip(&union) {
        assert!((x - y).abs() < 1e-8, "{x} vs {y}");
    }
}
