//! Bundle connections in a local trivialization: curvature, the Yang–Mills
//! current `j`, the conformal Yang–Mills current `k` and the six-dimensional
//! energy density.

use crate::curvature::Curvature;
use crate::error::{Error, Result};
use crate::fields::{contract, nabla, Connections, Metric, Slot, Tensor};
use crate::jet::Jet;

/// `A_a`, an `r×r` matrix of jets per coordinate direction, acting on column
/// vectors: `∇_a v = ∂_a v + A_a v`.
#[derive(Debug, Clone)]
pub struct GaugeConnection {
    pub rank: usize,
    /// Slots `[Down, EndUp, EndDown]`.
    pub a: Tensor,
}

impl GaugeConnection {
    pub fn new(a: Tensor) -> Result<GaugeConnection> {
        if a.slots() != [Slot::Down, Slot::EndUp, Slot::EndDown] || a.dims()[1] != a.dims()[2] {
            return Err(Error::ShapeMismatch("connection must have slots [Down, EndUp, EndDown]".into()));
        }
        Ok(GaugeConnection { rank: a.dims()[1], a })
    }

    pub fn zero(n: usize, rank: usize, like: &Jet) -> GaugeConnection {
        let a = Tensor::zeros(vec![Slot::Down, Slot::EndUp, Slot::EndDown], vec![n, rank, rank], like);
        GaugeConnection { rank, a }
    }

    pub fn dim(&self) -> usize {
        self.a.dims()[0]
    }

    pub fn order(&self) -> usize {
        self.a.order()
    }

    pub fn matrix(&self, a: usize) -> Vec<Vec<Jet>> {
        (0..self.rank).map(|i| (0..self.rank).map(|m| self.a.get(&[a, i, m]).clone()).collect()).collect()
    }

    pub fn truncate(&self, order: usize) -> GaugeConnection {
        GaugeConnection { rank: self.rank, a: self.a.truncate(order) }
    }

    /// `F_ab = ∂_a A_b − ∂_b A_a + [A_a, A_b]`, slots `[Down, Down, EndUp, EndDown]`.
    pub fn curvature(&self) -> Result<Tensor> {
        let n = self.dim();
        let r = self.rank;
        let da: Vec<Tensor> = (0..n).map(|e| self.a.try_map(|j| j.partial(e))).collect::<Result<_>>()?;
        let t = Tensor::from_fn(vec![Slot::Down, Slot::Down, Slot::EndUp, Slot::EndDown], vec![n, n, r, r], |i| {
            let (a, b, p, q) = (i[0], i[1], i[2], i[3]);
            let mut acc = da[a].get(&[b, p, q]) - da[b].get(&[a, p, q]);
            for m in 0..r {
                let x = self.a.get(&[a, p, m]);
                let y = self.a.get(&[b, m, q]);
                if !x.is_zero() && !y.is_zero() {
                    acc.add_product(x, y);
                }
                let x = self.a.get(&[b, p, m]);
                let y = self.a.get(&[a, m, q]);
                if !x.is_zero() && !y.is_zero() {
                    acc -= &(x * y);
                }
            }
            acc
        });
        Ok(t)
    }

    /// Gauge transform by a pointwise invertible matrix field `u` acting on the
    /// fibre: `A ↦ u A u⁻¹ − (∂u) u⁻¹`.
    pub fn gauge_transform(&self, u: &[Vec<Jet>]) -> Result<GaugeConnection> {
        let n = self.dim();
        let r = self.rank;
        let uinv = crate::fields::invert_matrix(u)?;
        let t = Tensor::try_from_fn(vec![Slot::Down, Slot::EndUp, Slot::EndDown], vec![n, r, r], |i| {
            let (a, p, q) = (i[0], i[1], i[2]);
            let mut acc = u[0][0].zero_like();
            for m in 0..r {
                for l in 0..r {
                    acc += &(&(&u[p][m] * self.a.get(&[a, m, l])) * &uinv[l][q]);
                }
                let du = u[p][m].partial(a)?;
                acc -= &(&du * &uinv[m][q]);
            }
            Ok(acc)
        })?;
        GaugeConnection::new(t)
    }
}

/// Matrix product over the trailing `[EndUp, EndDown]` pairs of `x` and `y`;
/// the leading slots of `x` come first, then those of `y`.
pub fn end_mul(x: &Tensor, y: &Tensor) -> Result<Tensor> {
    let (rx, ry) = (x.rank(), y.rank());
    if rx < 2 || ry < 2 || x.slots()[rx - 2..] != [Slot::EndUp, Slot::EndDown] || y.slots()[ry - 2..] != [Slot::EndUp, Slot::EndDown]
    {
        return Err(Error::ShapeMismatch("end_mul needs endomorphism-valued operands".into()));
    }
    // contract x's EndDown with y's EndUp, then move y's EndDown after x's EndUp
    let c = contract(x, rx - 1, y, ry - 2)?; // [x.., xUp, y.., yDown]
    let total = c.rank();
    let xs = rx - 2;
    let ys = ry - 2;
    let mut perm: Vec<usize> = (0..xs).collect();
    perm.extend((xs + 1)..(xs + 1 + ys));
    perm.push(xs);
    perm.push(total - 1);
    c.permute(&perm)
}

/// Matrix trace over the trailing endomorphism pair.
pub fn end_trace(x: &Tensor) -> Result<Tensor> {
    let r = x.rank();
    x.trace(r - 2, r - 1)
}

fn end_commutator(x: &Tensor, y: &Tensor) -> Result<Tensor> {
    let xy = end_mul(x, y)?;
    let yx = end_mul(y, x)?;
    // yx has y's leading slots first; bring them into x-first order
    let (lx, ly) = (x.rank() - 2, y.rank() - 2);
    let mut perm: Vec<usize> = (ly..ly + lx).collect();
    perm.extend(0..ly);
    perm.push(lx + ly);
    perm.push(lx + ly + 1);
    xy.sub(&yx.permute(&perm)?)
}

/// `j_b = g^{ac} ∇_a F_cb`.
pub fn ym_current(metric: &Metric, conn: &GaugeConnection) -> Result<Tensor> {
    let f = conn.curvature()?;
    ym_current_from(metric, conn, &f)
}

pub fn ym_current_from(metric: &Metric, conn: &GaugeConnection, f: &Tensor) -> Result<Tensor> {
    let c = Connections::with_gauge(metric, conn);
    nabla(f, &c)?.metric_trace(0, 1, metric)
}

/// The conformal Yang–Mills current: `j` in dimension four, and in dimension six
/// `k_a = ½∇^c(∇_[c j_a] − 4P_[c^b F_a]b − J F_ca) + ½[j^b, F_ba]`.
pub fn cym_current(metric: &Metric, curv: &Curvature, conn: &GaugeConnection) -> Result<Tensor> {
    match metric.n {
        4 => ym_current(metric, conn),
        6 => cym_current_d6(metric, curv, conn),
        n => Err(Error::Unsupported(format!("conformal Yang–Mills current in dimension {n}"))),
    }
}

fn cym_current_d6(metric: &Metric, curv: &Curvature, conn: &GaugeConnection) -> Result<Tensor> {
    cym_current_d6_with(metric, curv, conn, 0.5)
}

/// The six-dimensional current with coefficient `comm_coeff` in place of ½
/// on `[j^b, F_ba]`. Conformal covariance and conservation for nonabelian
/// connections need ¼.
pub fn cym_current_d6_with(metric: &Metric, curv: &Curvature, conn: &GaugeConnection, comm_coeff: f64) -> Result<Tensor> {
    if metric.n != 6 {
        return Err(Error::Unsupported(format!("six-dimensional current in dimension {}", metric.n)));
    }
    let c = Connections::with_gauge(metric, conn);
    let f = conn.curvature()?;
    let j = ym_current_from(metric, conn, &f)?; // [a, End]
    let dj = nabla(&j, &c)?; // [c, a, End]
    // P_c^b F_ab, as [c, a, End]
    let p_up = curv.schouten.raise(1, metric)?; // P_c^b
    let pf = contract(&p_up, 1, &f, 1)?; // [c, a, End]
    let order = dj.order();
    let jf = f.mul_jet(&curv.j).truncate(order); // J F_ca
    let pf = pf.truncate(order);
    let half_alt = |t: &Tensor| -> Result<Tensor> { Ok(t.sub(&t.permute(&[1, 0, 2, 3])?)?.scale(0.5)) };
    let s = half_alt(&dj)?.sub(&half_alt(&pf)?.scale(4.0))?.sub(&jf)?;
    let div = nabla(&s, &c)?.metric_trace(0, 1, metric)?.scale(0.5); // [a, End]
    let j_up = j.raise(0, metric)?;
    let comm = end_commutator(&j_up, &f)?; // [b, b', a, End]
    let comm = comm.trace(0, 1)?.scale(comm_coeff);
    div.add(&comm.truncate(div.order()))
}

/// `𝓔 = Tr(j_a j^a + J F_ab F^ab + 4 F^ab P_a^c F_bc − ∇^a v_a)` with
/// `v_a = ¼ ∇_a(F_cd F^cd) + 2 F_ab j^b`, in dimension six.
pub fn energy_density_d6(metric: &Metric, curv: &Curvature, conn: &GaugeConnection) -> Result<Jet> {
    if metric.n != 6 {
        return Err(Error::Unsupported(format!("energy density in dimension {}", metric.n)));
    }
    let c = Connections::with_gauge(metric, conn);
    let f = conn.curvature()?;
    let j = ym_current_from(metric, conn, &f)?;
    let j_up = j.raise(0, metric)?;
    let f_up = f.raise(0, metric)?.raise(1, metric)?;

    let ff = end_mul(&f, &f_up)?.trace(0, 2)?.trace(0, 1)?; // F_cd F^cd
    let dff = nabla(&ff, &c)?.scale(0.25);
    let fj = end_mul(&f, &j_up)?.trace(1, 2)?.scale(2.0); // F_ab j^b
    let order = dff.order();
    let v = dff.add(&fj.truncate(order))?;
    let divv = nabla(&v, &c)?.metric_trace(0, 1, metric)?;

    let jj = end_trace(&end_mul(&j, &j_up)?.trace(0, 1)?)?;
    let jff = end_trace(&ff)?.data()[0].clone() * curv.j.clone();
    // F^ab P_a^c F_bc
    let p_up = curv.schouten.raise(1, metric)?; // P_a^c
    let fp = contract(&f_up, 0, &p_up, 0)?; // [b, End.., c]
    let fp = fp.permute(&[0, 3, 1, 2])?; // [b, c, End]
    let fpf = end_mul(&fp, &f)?; // [b, c, b', c', End]
    let fpf = fpf.trace(0, 2)?.trace(0, 1)?;
    let total = jj.data()[0].truncate(divv.order())
        + jff.truncate(divv.order())
        + end_trace(&fpf)?.data()[0].scale(4.0).truncate(divv.order());
    Ok(total - end_trace(&divv)?.data()[0].clone())
}

/// `F^ab (C_abc − g_ca ∇_b J)`, which is proportional to `k` when `∇F = 0`.
pub fn reduced_current_parallel(metric: &Metric, curv: &Curvature, cotton: &Tensor, f: &Tensor) -> Result<Tensor> {
    let n = metric.n;
    let f_up = f.raise(0, metric)?.raise(1, metric)?; // [a, b, End]
    let fc = contract(&f_up, 0, cotton, 0)?; // [b, End.., b', c]
    let fc = fc.trace(0, 3)?; // [End, c]
    let fc = fc.permute(&[2, 0, 1])?; // [c, End]
    let dj = Tensor::try_from_fn(vec![Slot::Down], vec![n], |i| curv.j.partial(i[0]))?;
    let f_mixed = f.raise(1, metric)?; // F_c^b
    let fdj = contract(&f_mixed, 1, &dj, 0)?; // [c, End, ] -> slots [c, EndUp, EndDown]
    let order = fc.order().min(fdj.order());
    fc.truncate(order).sub(&fdj.truncate(order))
}

/// Both sides of `ΔF_bc = 2∇_[b j_c] − 2(n−4)P_[b^a F_c]a + 2J F_bc + 2W_b^de_c F_de`.
pub fn laplacian_f_identity(metric: &Metric, curv: &Curvature, weyl: &Tensor, conn: &GaugeConnection) -> Result<(Tensor, Tensor)> {
    let n = metric.n as f64;
    let c = Connections::with_gauge(metric, conn);
    let f = conn.curvature()?;
    let df = nabla(&f, &c)?;
    let lap = nabla(&df, &c)?.metric_trace(0, 1, metric)?;
    let j = df.metric_trace(0, 1, metric)?;
    let dj = nabla(&j, &c)?; // [b, c, End]
    let alt = |t: &Tensor| -> Result<Tensor> { t.sub(&t.permute(&[1, 0, 2, 3])?) };
    let p_up = curv.schouten.raise(1, metric)?; // P_b^a
    let pf = contract(&p_up, 1, &f, 1)?; // P_b^a F_ca as [b, c, End]
    let w_up = weyl.raise(1, metric)?.raise(2, metric)?; // W_b^de_c
    let wf = contract(&w_up, 1, &f, 0)?; // [b, e, c, e', End]
    let wf = wf.trace(1, 3)?; // [b, c, End]
    let order = lap.order();
    let mut rhs = alt(&dj)?.truncate(order);
    rhs = rhs.sub(&alt(&pf)?.scale(n - 4.0).truncate(order))?;
    rhs = rhs.add(&f.mul_jet(&curv.j).scale(2.0).truncate(order))?;
    rhs = rhs.add(&wf.scale(2.0).truncate(order))?;
    Ok((lap, rhs))
}

/// `2 g^{ad} [F_db, F_ac]`: the quadratic term in `ΔF` that survives only
/// for nonabelian connections.
pub fn laplacian_f_commutator(metric: &Metric, f: &Tensor) -> Result<Tensor> {
    let fu = f.raise(0, metric)?;
    Ok(end_commutator(&fu, f)?.trace(0, 2)?.scale(2.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::{hash_action, residual, Curvatures};

    fn poly_metric(p: &[f64], order: usize) -> Metric {
        let n = p.len();
        let x = Jet::seed_all(p, order);
        Metric::new(Tensor::from_fn(vec![Slot::Down, Slot::Down], vec![n, n], |i| {
            let (a, b) = (i[0], i[1]);
            let base = if a == b { 1.0 } else { 0.0 };
            &((&x[a] * &x[b]).scale(0.08) + (&x[(a * b) % n] * &x[(a + b) % n] * x[0].clone()).scale(0.03)) + base
        }))
        .unwrap()
    }

    fn poly_gauge(p: &[f64], order: usize, rank: usize) -> GaugeConnection {
        let n = p.len();
        let x = Jet::seed_all(p, order);
        let a = Tensor::from_fn(vec![Slot::Down, Slot::EndUp, Slot::EndDown], vec![n, rank, rank], |i| {
            let (a, q, r) = (i[0], i[1], i[2]);
            let c = 0.3 * ((a + 2 * q + 3 * r) % 5) as f64 - 0.6;
            (&(&x[(a + q) % n] * &x[(r + 1) % n]).scale(c) + 0.1 * c) + x[(a + r) % n].scale(0.2)
        });
        GaugeConnection::new(a).unwrap()
    }

    #[test]
    fn zero_connection_has_zero_curvature() {
        let like = Jet::constant(3, 2, 0.0);
        assert_eq!(GaugeConnection::zero(3, 2, &like).curvature().unwrap().max_abs_coeffs(), 0.0);
    }

    #[test]
    fn commutator_on_sections_is_curvature() {
        let p = [0.1, -0.2, 0.3];
        let m = poly_metric(&p, 4);
        let a = poly_gauge(&p, 4, 2);
        let f = a.curvature().unwrap();
        let x = Jet::seed_all(&p, 4);
        let v = Tensor::from_fn(vec![Slot::EndUp], vec![2], |i| x[i[0]].sin());
        let c = Connections::with_gauge(&m, &a);
        let dd = nabla(&nabla(&v, &c).unwrap(), &c).unwrap();
        let comm = dd.sub(&dd.permute(&[1, 0, 2]).unwrap()).unwrap();
        let curv = Curvature::new(&m).unwrap();
        let h = hash_action(&v, &Curvatures { riemann: &curv.riemann, gauge: Some(&f), tractor: None }).unwrap();
        assert!(residual(&comm, &h).unwrap() < 1e-12);

        let dd = nabla(&nabla(&f, &c).unwrap(), &c).unwrap();
        let comm = dd.sub(&dd.permute(&[1, 0, 2, 3, 4, 5]).unwrap()).unwrap();
        let h = hash_action(&f, &Curvatures { riemann: &curv.riemann, gauge: Some(&f), tractor: None }).unwrap();
        assert!(residual(&comm, &h).unwrap() < 1e-11);
    }

    #[test]
    fn bianchi_identity() {
        let p = [0.1, -0.2, 0.3, 0.05];
        let m = poly_metric(&p, 3);
        let a = poly_gauge(&p, 3, 2);
        let f = a.curvature().unwrap();
        let df = nabla(&f, &Connections::with_gauge(&m, &a)).unwrap();
        let cyc = df.add(&df.permute(&[1, 2, 0, 3, 4]).unwrap()).unwrap().add(&df.permute(&[2, 0, 1, 3, 4]).unwrap()).unwrap();
        assert!(cyc.max_abs() < 1e-12);
    }

    #[test]
    fn gauge_covariance_of_currents() {
        let p = [0.1, -0.2, 0.3, 0.05, 0.2, -0.1];
        let m = poly_metric(&p, 4);
        let curv = Curvature::new(&m).unwrap();
        let a = poly_gauge(&p, 5, 2);
        let x = Jet::seed_all(&p, 5);
        let u = vec![vec![&x[0].exp() + 0.5, x[1].clone()], vec![x[2].sin(), &x[3] + 1.5]];
        let b = a.gauge_transform(&u).unwrap();
        let uinv = crate::fields::invert_matrix(&u).unwrap();
        let uinv_t: Vec<Vec<Jet>> = (0..2).map(|i| (0..2).map(|j| uinv[j][i].clone()).collect()).collect();
        let conj = |t: &Tensor| -> Tensor {
            let r = t.rank();
            let ut = t.transform_slot(r - 2, Slot::EndUp, &u).unwrap();
            ut.transform_slot(r - 1, Slot::EndDown, &uinv_t).unwrap()
        };
        let fa = a.curvature().unwrap();
        assert!(residual(&b.curvature().unwrap(), &conj(&fa)).unwrap() < 1e-12);
        let ka = cym_current(&m, &curv, &a).unwrap();
        let kb = cym_current(&m, &curv, &b).unwrap();
        assert!(residual(&kb, &conj(&ka)).unwrap() < 1e-10);
    }

    #[test]
    fn laplacian_identity_in_five_dimensions() {
        let p = [0.1, -0.2, 0.3, 0.05, 0.2];
        let m = poly_metric(&p, 4);
        let curv = Curvature::new(&m).unwrap();
        let w = curv.weyl(&m).unwrap();
        let a = poly_gauge(&p, 4, 1);
        let (l, r) = laplacian_f_identity(&m, &curv, &w, &a).unwrap();
        assert!(residual(&l, &r).unwrap() < 1e-10, "abelian {}", residual(&l, &r).unwrap());
        let a = poly_gauge(&p, 4, 2);
        let (l, r) = laplacian_f_identity(&m, &curv, &w, &a).unwrap();
        assert!(residual(&l, &r).unwrap() > 1e-3);
        let extra = laplacian_f_commutator(&m, &a.curvature().unwrap()).unwrap();
        let fixed = r.add(&extra.truncate(r.order())).unwrap();
        assert!(residual(&l, &fixed).unwrap() < 1e-10);
    }

    #[test]
    fn unsupported_dimension() {
        let p = [0.1, -0.2, 0.3, 0.05, 0.2];
        let m = poly_metric(&p, 4);
        let curv = Curvature::new(&m).unwrap();
        let a = poly_gauge(&p, 4, 1);
        assert!(matches!(cym_current(&m, &curv, &a), Err(Error::Unsupported(_))));
    }

    #[test]
    fn commutator_coefficient_for_covariance() {
        use crate::catalog::{ConnSpec, FactorSpec, MetricSpec};
        use crate::conformal::weight_check;
        let p = [0.05, -0.1, 0.12, 0.02, -0.07, 0.1];
        let spec = MetricSpec::RandomMetric { n: 6, seed: 3, amp: 0.2 };
        let m = spec.metric(&p, 4).unwrap();
        let a = ConnSpec::RandomGauge { seed: 3, rank: 2, amp: 0.5 }.connection(&spec, &p, 4).unwrap();
        let om = FactorSpec::new(3).omega(&p, 4);
        let r = |c: f64| {
            weight_check(&m, &om, -4.0, crate::conformal::Conjugation::None, |g| {
                cym_current_d6_with(g, &Curvature::new(g)?, &a, c)
            })
            .unwrap()
        };
        assert!(r(0.5) > 1e-3);
        assert!(r(0.25) < 1e-12, "{}", r(0.25));
    }
}
