//! Seeded property tests for the geometric layers.

use proptest::prelude::*;

use cym_core::catalog::{random_tensor, sample_points, ConnSpec, FactorSpec, MetricSpec};
use cym_core::conformal::rescale;
use cym_core::curvature::Curvature;
use cym_core::fields::{contract, hash_action, nabla, residual, Connections, Curvatures};
use cym_core::gauge::{cym_current, ym_current};
use cym_core::holography::collar_extend;
use cym_core::{Slot, Tensor};

fn catalog_metrics(seed: u64) -> Vec<MetricSpec> {
    vec![
        MetricSpec::Flat { n: 5 },
        MetricSpec::Sphere { n: 4 },
        MetricSpec::Hyperbolic { n: 4 },
        MetricSpec::S3xs3,
        MetricSpec::G6Example { f: Default::default() },
        MetricSpec::RandomMetric { n: 5, seed, amp: 0.2 },
    ]
}

fn config() -> ProptestConfig {
    ProptestConfig { cases: 8, ..ProptestConfig::default() }
}

proptest! {
    #![proptest_config(config())]

    #[test]
    fn levi_civita_is_metric_and_torsion_free(seed in 0u64..1000) {
        for spec in catalog_metrics(seed) {
            for p in sample_points(&spec.anchor(), seed, 10, 0.4) {
                let m = spec.metric(&p, 2).unwrap();
                let lc = Connections::levi_civita(&m);
                let dg = nabla(&m.g, &lc).unwrap();
                prop_assert!(dg.max_abs_coeffs() < 1e-10, "{} {}", spec.name(), dg.max_abs_coeffs());
                let n = m.n;
                for c in 0..n {
                    for a in 0..n {
                        for b in 0..n {
                            let d = m.gamma.get(&[c, a, b]) - m.gamma.get(&[c, b, a]);
                            prop_assert!(d.max_abs() < 1e-13);
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn ricci_identity(seed in 0u64..1000) {
        let spec = MetricSpec::RandomMetric { n: 4, seed, amp: 0.2 };
        let p = sample_points(&spec.anchor(), seed, 1, 0.4).remove(0);
        let m = spec.metric(&p, 4).unwrap();
        let curv = Curvature::new(&m).unwrap();
        let a = ConnSpec::RandomGauge { seed, rank: 2, amp: 0.5 }.connection(&spec, &p, 4).unwrap();
        let f = a.curvature().unwrap();
        let conns = Connections::with_gauge(&m, &a);
        let hash = Curvatures { riemann: &curv.riemann, gauge: Some(&f), tractor: None };
        let v = random_tensor(vec![Slot::Up], vec![4], &p, 4, seed, 1.0);
        let w = random_tensor(vec![Slot::Down], vec![4], &p, 4, seed + 1, 1.0);
        let t = random_tensor(vec![Slot::Down, Slot::Down, Slot::EndUp, Slot::EndDown], vec![4, 4, 2, 2], &p, 4, seed + 2, 1.0)
            .antisymmetrize(&[0, 1])
            .unwrap();
        for x in [v, w, t] {
            let dd = nabla(&nabla(&x, &conns).unwrap(), &conns).unwrap();
            let mut perm: Vec<usize> = (0..dd.rank()).collect();
            perm.swap(0, 1);
            let comm = dd.sub(&dd.permute(&perm).unwrap()).unwrap();
            let rhs = hash_action(&x, &hash).unwrap();
            let r = residual(&comm, &rhs).unwrap();
            prop_assert!(r < 1e-9, "{r}");
        }
    }

    #[test]
    fn schouten_divergence_and_split(seed in 0u64..1000, n in 4usize..=6) {
        let spec = MetricSpec::RandomMetric { n, seed, amp: 0.2 };
        let p = sample_points(&spec.anchor(), seed, 1, 0.4).remove(0);
        let m = spec.metric(&p, 3).unwrap();
        let c = Curvature::new(&m).unwrap();
        let lc = Connections::levi_civita(&m);
        let dp = nabla(&c.schouten, &lc).unwrap(); // [c, a, b]
        let div = dp.metric_trace(0, 1, &m).unwrap();
        let dj = Tensor::try_from_fn(vec![Slot::Down], vec![n], |i| c.j.partial(i[0])).unwrap();
        prop_assert!(residual(&div, &dj).unwrap() < 1e-9);

        let p0 = c.schouten.trace_free(&m).unwrap();
        let dp0 = nabla(&p0, &lc).unwrap();
        let div0 = dp0.metric_trace(0, 1, &m).unwrap().scale(1.0 / (n as f64 - 1.0)); // [c]
        let o = dp0.order();
        let split = Tensor::from_fn(dp.slots().to_vec(), dp.dims().to_vec(), |i| {
            dp0.get(i) + &(m.g.get(&[i[1], i[2]]).truncate(o) * div0.get(&[i[0]]).truncate(o))
        });
        prop_assert!(residual(&dp, &split).unwrap() < 1e-9);
    }

    #[test]
    fn gauge_covariance_of_k(seed in 0u64..1000) {
        let spec = MetricSpec::RandomMetric { n: 6, seed, amp: 0.2 };
        let p = sample_points(&spec.anchor(), seed, 1, 0.4).remove(0);
        let m = spec.metric(&p, 4).unwrap();
        let curv = Curvature::new(&m).unwrap();
        let a = ConnSpec::RandomGauge { seed, rank: 2, amp: 0.5 }.connection(&spec, &p, 5).unwrap();
        let g = random_tensor(vec![Slot::EndUp, Slot::EndDown], vec![2, 2], &p, 5, seed + 9, 0.3);
        let u: Vec<Vec<_>> = (0..2)
            .map(|i| (0..2).map(|j| if i == j { g.get(&[i, j]) + 1.0 } else { g.get(&[i, j]).clone() }).collect())
            .collect();
        let b = a.gauge_transform(&u).unwrap();
        let uinv = cym_core::fields::invert_matrix(&u).unwrap();
        let uinv_t: Vec<Vec<_>> = (0..2).map(|i| (0..2).map(|j| uinv[j][i].clone()).collect()).collect();
        let conj = |t: &Tensor| {
            let r = t.rank();
            t.transform_slot(r - 2, Slot::EndUp, &u).unwrap().transform_slot(r - 1, Slot::EndDown, &uinv_t).unwrap()
        };
        for (x, y) in [
            (a.curvature().unwrap(), b.curvature().unwrap()),
            (ym_current(&m, &a).unwrap(), ym_current(&m, &b).unwrap()),
            (cym_current(&m, &curv, &a).unwrap(), cym_current(&m, &curv, &b).unwrap()),
        ] {
            prop_assert!(residual(&y, &conj(&x)).unwrap() < 1e-9);
        }
    }

    #[test]
    fn unit_conormal_scales_with_omega(seed in 0u64..1000) {
        let spec = MetricSpec::RandomMetric { n: 4, seed, amp: 0.2 };
        let x = sample_points(&spec.anchor(), seed, 1, 0.4).remove(0);
        let cs = collar_extend(&spec, &x, 0.2, 3).unwrap();
        let mut q = x.clone();
        q.push(0.2);
        let om = FactorSpec::new(seed).omega(&q, 3);
        let unit = |g: &cym_core::Metric| {
            let nl = cs.normal_lower().truncate(g.order());
            let nu = nl.raise(0, g).unwrap();
            let len = contract(&nl, 0, &nu, 0).unwrap().data()[0].sqrt().unwrap();
            nl.mul_jet(&len.recip().unwrap())
        };
        let (hat, _) = rescale(&cs.bulk, &om).unwrap();
        let lhs = unit(&hat);
        let rhs = unit(&cs.bulk).mul_jet(&om.truncate(lhs.order()));
        prop_assert!(residual(&lhs, &rhs).unwrap() < 1e-12);
    }
}
