//! Levi-Civita curvature: Riemann, Ricci, Schouten, Weyl, Cotton and Bach.
//!
//! Sign convention: `[∇_a, ∇_b] v^c = R_ab^c_d v^d`, Ricci `R_bc = R_ab^a_c`,
//! so the round sphere has positive scalar curvature.

use crate::error::{Error, Result};
use crate::fields::{contract, nabla, Connections, Metric, Slot, Tensor};
use crate::jet::Jet;

/// `R_ab^c_d` from the Christoffel symbols; slots `[Down, Down, Up, Down]`.
pub fn riemann(metric: &Metric) -> Result<Tensor> {
    let n = metric.n;
    let gam = &metric.gamma;
    let dgam: Vec<Tensor> = (0..n).map(|e| gam.try_map(|j| j.partial(e))).collect::<Result<_>>()?;
    Ok(Tensor::from_fn(vec![Slot::Down, Slot::Down, Slot::Up, Slot::Down], vec![n; 4], |i| {
        let (a, b, c, d) = (i[0], i[1], i[2], i[3]);
        let mut acc = dgam[a].get(&[c, b, d]) - dgam[b].get(&[c, a, d]);
        for e in 0..n {
            acc.add_product(gam.get(&[c, a, e]), gam.get(&[e, b, d]));
            let t = gam.get(&[c, b, e]) * gam.get(&[e, a, d]);
            acc -= &t;
        }
        acc
    }))
}

/// The Riemann tensor and its traces.
#[derive(Debug, Clone)]
pub struct Curvature {
    pub riemann: Tensor,
    pub ricci: Tensor,
    pub scalar: Jet,
    pub schouten: Tensor,
    pub j: Jet,
}

impl Curvature {
    pub fn new(metric: &Metric) -> Result<Curvature> {
        let n = metric.n;
        if n < 3 {
            return Err(Error::Unsupported(format!("Schouten tensor needs dimension ≥ 3, got {n}")));
        }
        let riemann = riemann(metric)?;
        let ricci = riemann.trace(0, 2)?;
        let scalar = metric.trace(&ricci)?;
        let g = metric.g.truncate(scalar.order());
        let nf = n as f64;
        let schouten = ricci
            .sub(&g.mul_jet(&scalar).scale(1.0 / (2.0 * (nf - 1.0))))?
            .scale(1.0 / (nf - 2.0));
        let j = metric.trace(&schouten)?;
        Ok(Curvature { riemann, ricci, scalar, schouten, j })
    }

    /// `R_abcd = g_ce R_ab^e_d`.
    pub fn riemann_lowered(&self, metric: &Metric) -> Result<Tensor> {
        self.riemann.lower(2, metric)
    }

    /// `W_abcd`, all indices down.
    pub fn weyl(&self, metric: &Metric) -> Result<Tensor> {
        let n = metric.n;
        let r = self.riemann_lowered(metric)?;
        let g = &metric.g;
        let p = &self.schouten;
        let w = Tensor::from_fn(vec![Slot::Down; 4], vec![n; 4], |i| {
            let (a, b, c, d) = (i[0], i[1], i[2], i[3]);
            let mut acc = r.get(i).clone();
            acc -= &(g.get(&[c, a]) * p.get(&[b, d]));
            acc += &(g.get(&[c, b]) * p.get(&[a, d]));
            acc -= &(g.get(&[d, b]) * p.get(&[a, c]));
            acc += &(g.get(&[d, a]) * p.get(&[b, c]));
            acc
        });
        Ok(w)
    }

    /// `C_abc = ∇_a P_bc − ∇_b P_ac`.
    pub fn cotton(&self, metric: &Metric) -> Result<Tensor> {
        let dp = nabla(&self.schouten, &Connections::levi_civita(metric))?;
        dp.sub(&dp.permute(&[1, 0, 2])?)
    }

    /// `B_ab = ∇^c C_cab + P^cd W_cadb`.
    pub fn bach(&self, metric: &Metric) -> Result<Tensor> {
        let c = self.cotton(metric)?;
        let w = self.weyl(metric)?;
        let lc = Connections::levi_civita(metric);
        let div = nabla(&c, &lc)?.metric_trace(0, 1, metric)?;
        let pup = self.schouten.raise(0, metric)?.raise(1, metric)?;
        // P^{cd} W_cadb: contract c, then d (now slot 2 of W_adb after the first contraction)
        let pw = contract(&pup, 0, &w, 0)?; // [d, a, d', b]
        let pw = pw.trace(0, 2)?; // [a, b]
        let order = div.order();
        div.add(&pw.truncate(order))
    }
}

/// Curvature stack with Weyl, Cotton and Bach, computed together.
#[derive(Debug, Clone)]
pub struct FullCurvature {
    pub curv: Curvature,
    pub weyl: Tensor,
    pub cotton: Tensor,
    pub bach: Tensor,
}

impl FullCurvature {
    pub fn new(metric: &Metric) -> Result<FullCurvature> {
        let curv = Curvature::new(metric)?;
        let weyl = curv.weyl(metric)?;
        let cotton = curv.cotton(metric)?;
        let bach = curv.bach(metric)?;
        Ok(FullCurvature { curv, weyl, cotton, bach })
    }
}

/// Residuals of `∇^a P_ab = ∇_b J` and of the trace-free split of `∇P`.
pub fn schouten_bianchi_residuals(metric: &Metric, curv: &Curvature) -> Result<(f64, f64)> {
    let n = metric.n;
    let lc = Connections::levi_civita(metric);
    let dp = nabla(&curv.schouten, &lc)?; // [c, a, b]
    let div = dp.metric_trace(0, 1, metric)?;
    let dj = Tensor::try_from_fn(vec![Slot::Down], vec![n], |i| curv.j.partial(i[0]))?;
    let r1 = div.sub(&dj)?.max_abs() / (1.0 + dj.max_abs().max(div.max_abs()));

    let p0 = curv.schouten.trace_free(metric)?;
    let dp0 = nabla(&p0, &lc)?; // [c, a, b]
    let divp0 = dp0.metric_trace(0, 1, metric)?; // [c] = ∇^d P°_dc
    let g = metric.g.truncate(divp0.order());
    let rhs = Tensor::from_fn(vec![Slot::Down; 3], vec![n; 3], |i| {
        let (c, a, b) = (i[0], i[1], i[2]);
        dp0.get(&[c, a, b]) + &(g.get(&[a, b]) * divp0.get(&[c])).scale(1.0 / (n as f64 - 1.0))
    });
    let r2 = dp.truncate(rhs.order()).sub(&rhs)?.max_abs() / (1.0 + dp.max_abs());
    Ok((r1, r2))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::hash_action;

    fn metric_from(p: &[f64], order: usize, f: impl Fn(&[Jet], usize, usize) -> Jet) -> Metric {
        let n = p.len();
        let x = Jet::seed_all(p, order);
        Metric::new(Tensor::from_fn(vec![Slot::Down, Slot::Down], vec![n, n], |i| f(&x, i[0], i[1]))).unwrap()
    }

    fn sphere(p: &[f64], order: usize) -> Metric {
        metric_from(p, order, |x, a, b| {
            let mut r2 = x[0].zero_like();
            for xi in x {
                r2 += &(xi * xi);
            }
            let conf = (&r2 + 1.0).powi(2).recip().unwrap().scale(4.0);
            if a == b {
                conf
            } else {
                conf.zero_like()
            }
        })
    }

    fn wobbly(p: &[f64], order: usize) -> Metric {
        metric_from(p, order, |x, a, b| {
            let base = if a == b { 1.0 } else { 0.0 };
            let s = (&x[a] * &x[b]).scale(0.1) + (&x[(a + b) % x.len()]).sin().scale(0.05);
            &s + base
        })
    }

    #[test]
    fn sphere_schouten_is_half_metric() {
        let p = [0.2, -0.1, 0.3, 0.05];
        let m = sphere(&p, 3);
        let c = Curvature::new(&m).unwrap();
        let diff = c.schouten.sub(&m.g.truncate(1).scale(0.5)).unwrap();
        assert!(diff.max_abs() < 1e-12);
        assert!((c.j.value() - 2.0).abs() < 1e-12);
        assert!(c.weyl(&m).unwrap().max_abs() < 1e-12);
    }

    #[test]
    fn commutator_matches_riemann() {
        let p = [0.1, 0.2, -0.3];
        let m = wobbly(&p, 4);
        let c = Curvature::new(&m).unwrap();
        let lc = Connections::levi_civita(&m);
        let x = Jet::seed_all(&p, 4);
        let v = Tensor::from_fn(vec![Slot::Up], vec![3], |i| (&x[i[0]] * &x[(i[0] + 1) % 3]).exp());
        let dd = nabla(&nabla(&v, &lc).unwrap(), &lc).unwrap();
        let comm = dd.sub(&dd.permute(&[1, 0, 2]).unwrap()).unwrap();
        let curv = crate::fields::Curvatures { riemann: &c.riemann, gauge: None, tractor: None };
        let rhs = hash_action(&v, &curv).unwrap();
        assert!(comm.sub(&rhs.truncate(comm.order())).unwrap().max_abs_coeffs() < 1e-10);
        let w = v.lower(0, &m).unwrap();
        let dd = nabla(&nabla(&w, &lc).unwrap(), &lc).unwrap();
        let comm = dd.sub(&dd.permute(&[1, 0, 2]).unwrap()).unwrap();
        let rhs = hash_action(&w, &curv).unwrap();
        assert!(comm.sub(&rhs.truncate(comm.order())).unwrap().max_abs_coeffs() < 1e-10);
    }

    #[test]
    fn weyl_is_trace_free_and_cotton_antisymmetric() {
        let m = wobbly(&[0.1, 0.2, -0.3, 0.15], 3);
        let f = Curvature::new(&m).unwrap();
        let w = f.weyl(&m).unwrap();
        for (i, j) in [(0, 2), (0, 3), (1, 2), (1, 3)] {
            assert!(w.metric_trace(i, j, &m).unwrap().max_abs() < 1e-12);
        }
        let c = f.cotton(&m).unwrap();
        assert!(c.add(&c.permute(&[1, 0, 2]).unwrap()).unwrap().max_abs() < 1e-12);
        let (r1, r2) = schouten_bianchi_residuals(&m, &f).unwrap();
        assert!(r1 < 1e-11 && r2 < 1e-11, "{r1} {r2}");
    }

    #[test]
    fn bach_is_symmetric_trace_free_and_divergence_free_in_four_dimensions() {
        let m = wobbly(&[0.1, 0.2, -0.3, 0.15], 5);
        let f = FullCurvature::new(&m).unwrap();
        let b = &f.bach;
        assert!(b.sub(&b.permute(&[1, 0]).unwrap()).unwrap().max_abs_coeffs() < 1e-10);
        assert!(m.trace(b).unwrap().max_abs() < 1e-10);
        let div = nabla(b, &Connections::levi_civita(&m)).unwrap().metric_trace(0, 1, &m).unwrap();
        assert!(div.max_abs() < 1e-9 * (1.0 + b.max_abs_coeffs()), "{}", div.max_abs());
    }

    #[test]
    fn low_dimension_is_rejected() {
        let m = metric_from(&[0.0, 0.0], 2, |x, a, b| x[0].constant_like(if a == b { 1.0 } else { 0.0 }));
        assert!(matches!(Curvature::new(&m), Err(Error::Unsupported(_))));
    }
}
