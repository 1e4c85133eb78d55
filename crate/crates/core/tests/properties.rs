use std::collections::{BTreeMap, BTreeSet};

use proptest::prelude::*;
use stringnet::control::{declared_controls, feasibility, Feasibility};
use stringnet::io::{bounds, fmt_f64, plot_svg, NetworkFile, Series};
use stringnet::material::{characteristic_frame, default_skew_axis, invert_stress, stress, stress_jacobian, MaterialLaw};
use stringnet::network::{connected_components, laplacian, laplacian_int, laplacian_rank, End, SpringGraph, StarParams, RANK_TOL};
use stringnet::{Mat3, Vec3};

fn graph(n: usize, mask: &[bool]) -> SpringGraph {
    let mut edges = Vec::new();
    let mut k = 0;
    for a in 0..n {
        for b in a + 1..n {
            if mask[k] {
                edges.push((a, b));
            }
            k += 1;
        }
    }
    SpringGraph::from_edges(n, &edges, 1.0, vec![1.0; n], (0..n).map(|i| (i + 1, End::Start)).collect())
}

fn graph_strategy() -> impl Strategy<Value = (usize, Vec<bool>)> {
    (1usize..8).prop_flat_map(|n| (Just(n), proptest::collection::vec(any::<bool>(), n * (n - 1) / 2)))
}

fn quartic() -> MaterialLaw {
    MaterialLaw::custom(
        |s| 0.5 * (s - 1.0).powi(2) + 0.25 * (s - 1.0).powi(4),
        |s| (s - 1.0) + (s - 1.0).powi(3),
        |s| 1.0 + 3.0 * (s - 1.0).powi(2),
        (0.0, 10.0),
    )
    .unwrap()
}

fn strain_strategy() -> impl Strategy<Value = Vec3> {
    (1.01f64..2.0, -1.0f64..1.0, 0.0f64..std::f64::consts::TAU).prop_map(|(s, z, phi)| {
        let r = (1.0 - z * z).sqrt();
        Vec3::new(r * phi.cos(), r * phi.sin(), z) * s
    })
}

proptest! {
    #[test]
    fn rank_is_size_minus_components((n, mask) in graph_strategy()) {
        let g = graph(n, &mask);
        let l = laplacian_int(&g);
        for (i, row) in l.iter().enumerate() {
            prop_assert_eq!(row.iter().sum::<i64>(), 0);
            for (j, v) in row.iter().enumerate() {
                prop_assert_eq!(*v, l[j][i]);
            }
        }
        let rank = laplacian_rank(&laplacian(&g), RANK_TOL).unwrap();
        prop_assert_eq!(rank, n - connected_components(&g).len());
    }

    #[test]
    fn feasibility_is_monotone_in_edges(n in 2usize..6, mask in proptest::collection::vec(any::<bool>(), 15), extra in 0usize..15, ctl in proptest::collection::vec(any::<bool>(), 6)) {
        let pairs: Vec<(usize, usize)> = (0..n).flat_map(|a| (a + 1..n).map(move |b| (a, b))).collect();
        let mut p = StarParams::uniform(n);
        p.edges = pairs.iter().zip(&mask).filter(|(_, &m)| m).map(|(e, _)| *e).collect();
        let spec = p.build();
        let controls: BTreeSet<usize> = (1..=n).filter(|&i| ctl[i - 1]).collect();
        let before = feasibility(&spec, &controls);
        let added = pairs[extra % pairs.len()];
        if !p.edges.contains(&added) {
            p.edges.push(added);
        }
        let after = feasibility(&p.build(), &controls);
        if matches!(before, Feasibility::Feasible(_)) {
            prop_assert!(matches!(after, Feasibility::Feasible(_)), "{:?} -> {:?}", before, after);
        }
    }

    #[test]
    fn frame_reproduces_jacobian(v in strain_strategy(), h in 0.2f64..5.0, rho in 0.2f64..5.0, custom in any::<bool>()) {
        let law = if custom { quartic() } else { MaterialLaw::hookean(h) };
        let axis = default_skew_axis(&v);
        let f = characteristic_frame(&law, rho, &v, &axis).unwrap();
        let gv = stress_jacobian(&law, &v).unwrap();
        prop_assert!((gv / rho - f.reconstruct()).norm() <= 1e-10 * gv.norm());
        prop_assert!((f.q.transpose() * f.q - Mat3::identity()).norm() < 1e-12);
        let d = 1e-6;
        for c in 0..3 {
            let mut e = Vec3::zeros();
            e[c] = d;
            let fd = (stress(&law, &(v + e)).unwrap() - stress(&law, &(v - e)).unwrap()) / (2.0 * d);
            prop_assert!((fd - gv.column(c)).norm() <= 1e-6 * gv.norm());
        }
    }

    #[test]
    fn riemann_round_trip(v in strain_strategy(), w in proptest::array::uniform9(-1.0f64..1.0)) {
        let law = MaterialLaw::hookean(1.0);
        let f = characteristic_frame(&law, 1.0, &v, &default_skew_axis(&v)).unwrap();
        let (w1, w2, w3) = (Vec3::new(w[0], w[1], w[2]), Vec3::new(w[3], w[4], w[5]), Vec3::new(w[6], w[7], w[8]));
        let (a, b, c) = f.from_riemann(&f.to_riemann(&w1, &w2, &w3));
        prop_assert!((a - w1).norm() <= 1e-12 && (b - w2).norm() <= 1e-12 && (c - w3).norm() <= 1e-12);
        let xi = f.to_riemann(&w1, &w2, &w3);
        let back = f.to_riemann(&a, &b, &c);
        prop_assert!((back.xi_plus - xi.xi_plus).norm() <= 1e-12 && (back.xi_minus - xi.xi_minus).norm() <= 1e-12);
        prop_assert!((f.strain_from_minus(&xi.xi_minus, &w2) - w1).norm() <= 1e-12);
        prop_assert!((f.strain_from_plus(&xi.xi_plus, &w2) - w1).norm() <= 1e-12);
    }

    #[test]
    fn stress_inversion_round_trip(v in strain_strategy(), custom in any::<bool>()) {
        let law = if custom { quartic() } else { MaterialLaw::hookean(1.3) };
        let back = invert_stress(&law, &stress(&law, &v).unwrap()).unwrap();
        prop_assert!((back - v).norm() <= 1e-12 * v.norm());
    }

    #[test]
    fn csv_floats_round_trip(v in any::<f64>().prop_filter("finite", |v| v.is_finite())) {
        let s = fmt_f64(v);
        prop_assert_eq!(s.parse::<f64>().unwrap(), if v == 0.0 { 0.0 } else { v });
    }

    #[test]
    fn network_file_round_trip(n in 1usize..6, mask in proptest::collection::vec(any::<bool>(), 15), mass in 0.01f64..1.0, kappa in 0.1f64..10.0) {
        let mut p = StarParams::uniform(n);
        p.edges = (0..n).flat_map(|a| (a + 1..n).map(move |b| (a, b))).zip(&mask).filter(|(_, &m)| m).map(|(e, _)| e).collect();
        p.mass = mass;
        p.stiffness = kappa;
        let spec = p.build();
        let text = NetworkFile::from_spec(&spec).to_toml();
        let back = NetworkFile::parse(&text).unwrap().build(&BTreeMap::new()).unwrap();
        prop_assert_eq!(&back.strings, &spec.strings);
        prop_assert_eq!(&back.nodes, &spec.nodes);
        prop_assert_eq!(declared_controls(&back), declared_controls(&spec));
    }

    #[test]
    fn svg_bounds_and_determinism(pts in proptest::collection::vec((-1e3f64..1e3, -1e3f64..1e3), 2..40)) {
        let s = [Series { label: "a".into(), points: pts.clone() }];
        let b = bounds(&s).unwrap();
        let (x0, x1) = pts.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), p| (a.min(p.0), b.max(p.0)));
        if x1 > x0 {
            prop_assert!((b.x0 - (x0 - 0.05 * (x1 - x0))).abs() <= 1e-9 * (1.0 + x0.abs()));
            prop_assert!((b.x1 - (x1 + 0.05 * (x1 - x0))).abs() <= 1e-9 * (1.0 + x1.abs()));
        }
        prop_assert_eq!(plot_svg("p", "x", "y", &s), plot_svg("p", "x", "y", &s));
    }
}
