//! Randomised invariants.

use proptest::prelude::*;
use uldp_core::designs::binomial_u64;
use uldp_core::mechanism::ubd_mechanism;
use uldp_core::sim::{exact_mse, exact_mse_dense};
use uldp_core::simplex::project_subspace;
use uldp_core::*;

fn normalise(raw: Vec<f64>) -> Vec<f64> {
    let s: f64 = raw.iter().sum();
    raw.iter().map(|x| x / s).collect()
}

/// `(w, v)` with `1 <= v < w <= max_w`.
fn shape(max_w: usize) -> impl Strategy<Value = (usize, usize)> {
    (2..=max_w).prop_flat_map(|w| (Just(w), 1..w))
}

fn weights(len: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.01f64..1.0, len).prop_map(normalise)
}

/// Sparse mixture: random weights with about half the entries zeroed. Some
/// block size below `v` always keeps its weight, otherwise the sensitive
/// block carries no information.
fn mixture(v: usize) -> impl Strategy<Value = Vec<f64>> {
    (weights(v), prop::collection::vec(any::<bool>(), v), 0..(v - 1).max(1)).prop_map(|(t, keep, anchor)| {
        let t: Vec<f64> = t
            .iter()
            .zip(&keep)
            .enumerate()
            .map(|(k, (&x, &on))| if on || k == anchor { x } else { 0.0 })
            .collect();
        normalise(t)
    })
}

fn case(max_w: usize) -> impl Strategy<Value = (usize, usize, f64, Vec<f64>)> {
    shape(max_w).prop_flat_map(|(w, v)| (Just(w), Just(v), 0.05f64..4.0, mixture(v)))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn distribution_renormalises(raw in weights(9)) {
        let d = Distribution::new(raw).unwrap();
        prop_assert!((d.as_slice().iter().sum::<f64>() - 1.0).abs() < 1e-15);
        prop_assert!(d.as_slice().iter().all(|&x| x >= 0.0));
    }

    #[test]
    fn projections_decompose_vector((w, v) in shape(10), raw in prop::collection::vec(-1.0f64..1.0, 10)) {
        let part = Partition::new(w, v).unwrap();
        let h = &raw[..w];
        let parts: Vec<Vec<f64>> = Subspace::ALL
            .iter()
            .map(|&s| project_subspace(&part, h, s).unwrap())
            .collect();
        for x in 0..w {
            let sum: f64 = parts.iter().map(|p| p[x]).sum();
            let mean = h.iter().sum::<f64>() / w as f64;
            // the three subspaces span the zero-sum hyperplane
            prop_assert!((sum - (h[x] - mean)).abs() < 1e-12);
        }
        for i in 0..3 {
            for j in (i + 1)..3 {
                let d: f64 = parts[i].iter().zip(&parts[j]).map(|(a, b)| a * b).sum();
                prop_assert!(d.abs() < 1e-12);
            }
        }
    }

    #[test]
    fn complete_designs_are_balanced(v in 2usize..9, k_raw in 1usize..9) {
        let k = 1 + (k_raw - 1) % v;
        let d = complete_design(v, k).unwrap();
        let p = d.params();
        prop_assert_eq!(p.b as u64, binomial_u64(v, k).unwrap());
        prop_assert!(validate_design(v, d.edges()).is_valid());
    }

    #[test]
    fn ubd_rows_are_stochastic_and_private((w, v, eps, t) in case(7)) {
        let part = Partition::new(w, v).unwrap();
        let m = ubd_mechanism(&part, eps, &Mixture::new(t).unwrap(), None).unwrap();
        for x in 0..w {
            let s: f64 = m.row(x).unwrap().iter().sum();
            prop_assert!((s - 1.0).abs() < 1e-12);
        }
        prop_assert!(validate_uldp(&m).is_valid());
    }

    #[test]
    fn estimator_is_unbiased((w, v, eps, t) in case(6), alpha in 0.0f64..=1.0) {
        let part = Partition::new(w, v).unwrap();
        let m = ubd_mechanism(&part, eps, &Mixture::new(t).unwrap(), None).unwrap();
        let table = EstimatorTable::for_mechanism(&m, alpha).unwrap();
        let outputs = m.outputs().unwrap();
        let est: Vec<Vec<f64>> = outputs.iter().map(|y| table.estimate_output(y)).collect();
        for x in 0..w {
            for z in 0..w {
                let mean: f64 = m.row(x).unwrap().iter().zip(&est).map(|(q, e)| q * e[z]).sum();
                let target = if z == x { 1.0 } else { 0.0 };
                prop_assert!((mean - target).abs() < 1e-10, "x={} z={} mean={}", x, z, mean);
            }
        }
    }

    #[test]
    fn exact_mse_routes_agree((w, v, eps, t) in case(6), alpha in 0.0f64..=1.0, p in weights(6)) {
        let part = Partition::new(w, v).unwrap();
        let p = Distribution::new(normalise(p[..w].to_vec())).unwrap();
        let m = ubd_mechanism(&part, eps, &Mixture::new(t).unwrap(), None).unwrap();
        let table = EstimatorTable::for_mechanism(&m, alpha).unwrap();
        let a = exact_mse(&table, &p).unwrap();
        let b = exact_mse_dense(&m, &table, &p).unwrap();
        prop_assert!((a - b).abs() < 1e-9 * b.max(1.0), "{} vs {}", a, b);
    }

    #[test]
    fn objective_concave_in_alpha((w, v, eps, t) in case(40), a in 0.0f64..=1.0, b in 0.0f64..=1.0) {
        let p = Problem::new(w, v, eps).unwrap();
        let f = |x: f64| p.objective(x, &t).unwrap().total;
        let mid = f(0.5 * (a + b));
        prop_assert!(mid >= 0.5 * (f(a) + f(b)) - 1e-10 * mid.abs().max(1.0));
    }

    #[test]
    fn objective_convex_in_mixture(
        (w, v, eps, t) in case(40),
        alpha in 0.0f64..=1.0,
        seed in any::<u64>(),
    ) {
        // second mixture: a cyclic shift of the first, so both share a length
        let s = (seed as usize) % v;
        let u: Vec<f64> = (0..v).map(|k| t[(k + s) % v]).collect();
        let p = Problem::new(w, v, eps).unwrap();
        let f = |x: &[f64]| p.objective(alpha, x).unwrap().total;
        let mid: Vec<f64> = t.iter().zip(&u).map(|(a, b)| 0.5 * (a + b)).collect();
        let fm = f(&mid);
        prop_assert!(fm <= 0.5 * (f(&t) + f(&u)) + 1e-10 * fm.abs().max(1.0));
    }

    #[test]
    fn inner_min_beats_vertices((w, v) in shape(30), eps in 0.05f64..4.0, alpha in 0.0f64..=1.0) {
        let p = Problem::new(w, v, eps).unwrap();
        let inner = p.inner_min(alpha).unwrap();
        for k in 1..=v {
            let mut e = vec![0.0; v];
            e[k - 1] = 1.0;
            let fv = p.objective(alpha, &e).unwrap().total;
            prop_assert!(inner.value <= fv * (1.0 + 1e-9));
        }
    }

    #[test]
    fn saddle_point_inequalities((w, v) in shape(20), eps in 0.05f64..4.0, alpha in 0.0f64..=1.0, t in weights(20)) {
        let p = Problem::new(w, v, eps).unwrap();
        let s = p.solve().unwrap();
        let t = normalise(t[..v].to_vec());
        let tol = 1e-6 * s.value;
        prop_assert!(p.objective(alpha, &s.t_star).unwrap().total <= s.value + tol);
        prop_assert!(p.objective(s.alpha_star, &t).unwrap().total >= s.value - tol);
        // the uBD scheme at the saddle is never worse than subset selection
        if let Some(u) = p.uss_min_worst_case() {
            prop_assert!(s.value <= u * (1.0 + 1e-9));
        }
        if v >= 2 {
            prop_assert!(s.value >= ldp_optimum(v, eps).unwrap().value * (1.0 - 1e-9));
        }
    }

    #[test]
    fn stats_merge_is_order_free(xs in prop::collection::vec(0usize..6, 1..40), ys in prop::collection::vec(0usize..6, 1..40)) {
        let part = Partition::new(6, 3).unwrap();
        let fill = |v: &[usize]| {
            let mut s = SufficientStats::new(&part);
            for &x in v {
                if x < 3 { s.record_protected(&[x]) } else { s.record_invertible(x) }
            }
            s
        };
        let (mut a, mut b) = (fill(&xs), fill(&ys));
        let a0 = a.clone();
        a.merge(&b).unwrap();
        b.merge(&a0).unwrap();
        prop_assert_eq!(a, b);
    }
}
