use polypos::diffop::DiffOp;
use polypos::preserver::{
    check_preserver, check_preserver_halfline, chebyshev_box, compact_rigidity_check, default_trials,
    falsify_on_grid, Certificate, Grid, KDescriptor, Status, Witness,
};
use polypos::{DiscreteMeasure64, MultiIndex, Poly64, Truncation};

fn samples(k: &KDescriptor<f64>, per_axis: usize) -> Vec<Vec<f64>> {
    let axes = k.default_grid(per_axis).unwrap();
    let (lo, hi): (Vec<f64>, Vec<f64>) = axes.axes().iter().map(|(l, h, _)| (*l, *h)).unzip();
    chebyshev_box(&lo, &hi, per_axis)
}

#[test]
fn moment_operators_supported_in_ksharp_survive() {
    let cases = [
        (
            KDescriptor::<f64>::parse("cone:1,0;1,1", 2).unwrap(),
            vec![(vec![1.0, 0.0], 0.5), (vec![2.0, 1.0], 0.25), (vec![3.0, 2.5], 1.0)],
        ),
        (
            KDescriptor::parse("striphalf:-1,1", 2).unwrap(),
            vec![(vec![0.0, 0.5], 1.0), (vec![0.0, 2.0], 0.3)],
        ),
        (KDescriptor::parse("box:-1,1;-1,1", 2).unwrap(), vec![(vec![0.0, 0.0], 2.0)]),
        (KDescriptor::halfline(), vec![(vec![0.5], 1.0), (vec![1.5], 0.5)]),
    ];
    for (k, atoms) in cases {
        let n = k.n();
        let mu = DiscreteMeasure64::new(n, atoms).unwrap();
        let cert = Certificate::MomentOperator(mu);
        assert_eq!(cert.verdict(&k).status, Status::Pass, "{k}");
        let t = cert.operator(5).unwrap();
        let v = check_preserver(&t, &k, 2, &samples(&k, 7), 1e-10).unwrap();
        assert_eq!(v.status, Status::Inconclusive, "{k}: {:?}", v.witnesses.first());
        assert!(v.checked.points > 0);
    }
}

#[test]
fn moment_operators_leaving_ksharp_are_refuted() {
    let k = KDescriptor::<f64>::parse("cone:1,0;0,1", 2).unwrap();
    let mu = DiscreteMeasure64::dirac(vec![-0.5, 1.0]);
    let cert = Certificate::MomentOperator(mu);
    assert_eq!(cert.verdict(&k).status, Status::Inconclusive);
    let t = cert.operator(5).unwrap();
    let v = check_preserver(&t, &k, 2, &[vec![0.0, 0.0]], 1e-10).unwrap();
    assert_eq!(v.status, Status::Fail);
    assert!(v
        .witnesses
        .iter()
        .any(|w| matches!(w, Witness::Eigen { weight: Some(_), .. })));
}

#[test]
fn shifts_on_the_half_line() {
    let shift = |c: f64| Certificate::MomentOperator(DiscreteMeasure64::dirac(vec![c])).operator(5).unwrap();
    let ys: Vec<f64> = (0..=10).map(|i| f64::from(i) * 0.5).collect();
    let fwd = check_preserver_halfline(&shift(0.7), 2, &ys, 1e-10).unwrap();
    assert_eq!(fwd.status, Status::Inconclusive);
    let back = check_preserver_halfline(&shift(-0.7), 2, &[0.0], 1e-10).unwrap();
    assert_eq!(back.status, Status::Fail);
    let k = KDescriptor::halfline();
    let trials = default_trials(&k, 3).unwrap();
    let grid = Grid::uniform(1, 0.0, 5.0, 501);
    let g = falsify_on_grid(&shift(-0.7), &k, &trials, &grid).unwrap();
    assert_eq!(g.status, Status::Fail);
}

#[test]
fn substitution_construction_passes_on_the_line() {
    let mu = DiscreteMeasure64::new(1, vec![(vec![-1.0], 0.5), (vec![2.0], 0.5)]).unwrap();
    let p = vec![Poly64::parse("x^2 - 1", 1).unwrap()];
    let cert = Certificate::Substitution { p, mu };
    assert_eq!(cert.verdict(&KDescriptor::full(1)).status, Status::Pass);
    assert_eq!(cert.verdict(&KDescriptor::halfline()).status, Status::Inconclusive);
    let t = cert.operator(6).unwrap();
    let v = check_preserver(&t, &KDescriptor::full(1), 3, &samples(&KDescriptor::full(1), 21), 1e-9).unwrap();
    assert_eq!(v.status, Status::Inconclusive);
}

#[test]
fn compact_sets_only_keep_nonnegative_scalars() {
    let k = KDescriptor::<f64>::parse("ball:0,0,1", 2).unwrap();
    assert_eq!(k.ksharp(), KDescriptor::origin(2));
    let laplace = DiffOp::constant(
        2,
        Truncation::Exact,
        [
            (MultiIndex::zero(2), 1.0),
            (MultiIndex::new(vec![2, 0]), 0.1),
            (MultiIndex::new(vec![0, 2]), 0.1),
        ],
    );
    assert!(!compact_rigidity_check(&laplace).unwrap());
    let v = check_preserver(&laplace, &k, 1, &samples(&k, 5), 1e-10).unwrap();
    assert_eq!(v.status, Status::Fail);
    assert!(compact_rigidity_check(&DiffOp::scalar(2, 3.0)).unwrap());
    let v = check_preserver(&DiffOp::scalar(2, 3.0), &k, 1, &samples(&k, 5), 1e-10).unwrap();
    assert_eq!(v.status, Status::Inconclusive);
}

#[test]
fn lattice_sets_are_catalogue_only() {
    let k = KDescriptor::<f64>::parse("lattice:0.25", 2).unwrap();
    assert_eq!(k.ksharp(), KDescriptor::Lattice { n: 2 });
    let t = DiffOp::identity(2);
    assert!(matches!(
        check_preserver(&t, &k, 1, &[vec![0.0, 0.0]], 1e-10),
        Err(polypos::Error::Unsupported(_))
    ));
}
