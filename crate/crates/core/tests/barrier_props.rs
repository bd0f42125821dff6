use proptest::prelude::*;

use relulab::barrier::{self, FnObjective, PathSpec};
use relulab::relunet::Params;

fn pt(v: &[f64]) -> Params {
    Params::from_flat(&[2, 1], v.to_vec()).unwrap()
}

fn bowl() -> FnObjective<impl Fn(&[f64]) -> f64 + Sync, impl Fn(&[f64]) -> f64 + Sync> {
    FnObjective {
        loss: |p: &[f64]| p.iter().map(|x| x * x).sum::<f64>(),
        grad_norm: |p: &[f64]| 2.0 * p.iter().map(|x| x * x).sum::<f64>().sqrt(),
    }
}

fn wavy() -> FnObjective<impl Fn(&[f64]) -> f64 + Sync, impl Fn(&[f64]) -> f64 + Sync> {
    FnObjective {
        loss: |p: &[f64]| (3.0 * p[0]).sin() + (2.0 * p[1]).cos() * p[2],
        grad_norm: |p: &[f64]| {
            let g = [3.0 * (3.0 * p[0]).cos(), -2.0 * (2.0 * p[1]).sin() * p[2], (2.0 * p[1]).cos()];
            g.iter().map(|x| x * x).sum::<f64>().sqrt()
        },
    }
}

fn coords() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-3.0f64..3.0, 3)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn convex_segments_have_no_excess(a in coords(), b in coords()) {
        let s = barrier::segment_barrier(&pt(&a), &pt(&b), &bowl(), 256).unwrap();
        prop_assert!(s.excess().abs() <= 1e-12);
    }

    #[test]
    fn refining_the_grid_never_lowers_the_max(a in coords(), b in coords(), res in 2usize..64) {
        let coarse = barrier::segment_barrier(&pt(&a), &pt(&b), &wavy(), res).unwrap();
        let fine = barrier::segment_barrier(&pt(&a), &pt(&b), &wavy(), 2 * res).unwrap();
        prop_assert!(fine.max_loss >= coarse.max_loss);
        prop_assert!(coarse.excess() >= 0.0);
    }

    #[test]
    fn path_max_is_the_max_over_segments(pts in prop::collection::vec(coords(), 2..6)) {
        let way: Vec<Params> = pts.iter().map(|v| pt(v)).collect();
        let spec = PathSpec::new(way.clone(), 32).unwrap();
        let p = barrier::path_barrier(&spec, &wavy()).unwrap();
        let seg_max = way
            .windows(2)
            .map(|w| barrier::segment_barrier(&w[0], &w[1], &wavy(), 32).unwrap().max_loss)
            .fold(f64::NEG_INFINITY, f64::max);
        prop_assert_eq!(p.max_loss, seg_max);
        prop_assert!(p.ulb_holds);
    }
}

#[test]
fn too_coarse_resolution_is_rejected() {
    assert!(barrier::segment_barrier(&pt(&[0.0; 3]), &pt(&[1.0; 3]), &bowl(), 1).is_err());
    assert!(PathSpec::new(vec![pt(&[0.0; 3])], 8).is_err());
}
