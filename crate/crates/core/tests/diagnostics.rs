mod common;

use nalgebra::DMatrix;
use proptest::prelude::*;
use romkit::diagnostics::{probe_series, relative_error, svd_decay_report, tiled_windows, ProbeSpec};
use romkit::fom::{simulate, FlameProxyModel, FlameProxyParams, FullModel, FLAME_DEFAULT_TIME};

fn matrix() -> impl Strategy<Value = DMatrix<f64>> {
    (1usize..10, 1usize..10).prop_flat_map(|(r, c)| {
        proptest::collection::vec(-1.0f64..1.0, r * c).prop_map(move |v| DMatrix::from_vec(r, c, v))
    })
}

proptest! {
    #[test]
    fn relative_error_is_scale_invariant(q in matrix(), seed in any::<u64>(), c in prop_oneof![-1e3f64..-1e-3, 1e-3f64..1e3]) {
        prop_assume!(q.norm() > 0.0);
        let mut rng = romkit_testkit::rng(seed);
        let approx = &q + romkit_testkit::random_matrix(&mut rng, q.nrows(), q.ncols()) * 0.1;
        let e = relative_error(&approx, &q).unwrap();
        let scaled = relative_error(&(&approx * c), &(&q * c)).unwrap();
        prop_assert!((e - scaled).abs() <= 1e-14 * e.max(1.0));
    }

    #[test]
    fn decay_rows_start_at_one_and_never_increase(q in matrix(), width in 1usize..5) {
        prop_assume!(q.amax() > 0.0);
        let windows = tiled_windows(q.ncols(), width);
        let rows = svd_decay_report(&q, &windows).unwrap();
        prop_assert_eq!(rows.len(), windows.len() + 1);
        for r in rows {
            if r.normalized[0] == 0.0 {
                continue;
            }
            prop_assert_eq!(r.normalized[0], 1.0);
            prop_assert!(r.normalized.windows(2).all(|w| w[0] >= w[1]));
        }
    }
}

#[test]
fn error_metric_trivial_cases() {
    let q = DMatrix::from_row_slice(2, 1, &[1.0, 0.0]);
    assert_eq!(relative_error(&q, &q).unwrap(), 0.0);
    assert_eq!(relative_error(&DMatrix::zeros(2, 1), &q).unwrap(), 1.0);
    assert_eq!(relative_error(&DMatrix::from_row_slice(2, 1, &[0.0, 1.0]), &q).unwrap(), 2.0);
}

#[test]
fn flame_probes_match_reference_run() {
    let model = FlameProxyModel::new(FlameProxyParams::default(), FLAME_DEFAULT_TIME).unwrap();
    let q = simulate(&model);
    let spec = ProbeSpec { locations: vec![0.25, 0.5, 0.75], variables: vec!["T".into(), "Y".into()] };
    let series = probe_series(&q, &model.grid(), &model.layout(), &spec, model.time().dt).unwrap();
    assert_eq!(series.len(), 6);

    let mut text = String::from("variable,location,cell,time,value\n");
    for s in &series {
        for &(t, v) in s.samples.iter().step_by(20) {
            text.push_str(&format!("{},{},{},{t},{v}\n", s.variable, s.location, s.cell));
        }
    }
    let golden = common::golden_text("flame_probes.csv", &text);
    let (ours, theirs): (Vec<&str>, Vec<&str>) = (text.lines().collect(), golden.lines().collect());
    assert_eq!(ours.len(), theirs.len());
    assert_eq!(ours[0], theirs[0]);
    for (a, b) in ours[1..].iter().zip(&theirs[1..]) {
        let (ka, va) = a.rsplit_once(',').unwrap();
        let (kb, vb) = b.rsplit_once(',').unwrap();
        assert_eq!(ka, kb);
        let (va, vb): (f64, f64) = (va.parse().unwrap(), vb.parse().unwrap());
        assert!((va - vb).abs() <= 1e-12 * vb.abs().max(1.0), "{a} vs {b}");
    }
}
