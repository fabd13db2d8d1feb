//! Collar computations for a five-dimensional bulk over a four-dimensional
//! boundary: `ḡ = ds² + g − s²P + ¼s⁴P²`, `g₊ = ḡ/s²`, defining density `σ = s`.
//!
//! The collar variable is jet variable [`S`]. At a boundary base point
//! (`s = 0`) multiplication by `σ` shifts coefficients exactly and division by
//! powers of `s` is coefficient extraction, so boundary limits carry no
//! extrapolation error.

use crate::catalog::MetricSpec;
use crate::curvature::{Curvature, FullCurvature};
use crate::error::{Error, Result};
use crate::fields::{contract, nabla, Connections, Metric, Slot, Tensor};
use crate::gauge::{ym_current, GaugeConnection};
use crate::jet::Jet;
use crate::tractor::{form_to_end, q_s, tractor_connection, TractorCalculus};

/// Bulk dimension.
pub const D: usize = 5;
/// Boundary dimension.
pub const N: usize = 4;
/// Jet variable index of the collar coordinate.
pub const S: usize = 4;

/// Bulk tractor indices that survive restriction to the boundary: everything
/// except the normal middle slot.
pub const BOUNDARY_TRACTOR: [usize; 6] = [0, 1, 2, 3, 4, 6];

/// Collar data at a base point `(x, s0)`.
#[derive(Debug, Clone)]
pub struct Collar {
    pub s0: f64,
    /// Boundary metric over the four boundary variables, two orders above the bulk.
    pub boundary: Metric,
    pub boundary_curv: FullCurvature,
    /// `ḡ` over `(x, s)`.
    pub bulk: Metric,
    pub sigma: Jet,
}

/// Builds the collar metric over the boundary metric `spec` at `x`, with bulk
/// jets of the given order based at collar height `s0`.
pub fn collar_extend(spec: &MetricSpec, x: &[f64], s0: f64, order: usize) -> Result<Collar> {
    if spec.dim() != N || x.len() != N {
        return Err(Error::Unsupported(format!("collar over a boundary of dimension {}", spec.dim())));
    }
    if s0 < 0.0 {
        return Err(Error::ChartDomain(format!("collar height {s0} is negative")));
    }
    let boundary = spec.metric(x, order + 2)?;
    let boundary_curv = FullCurvature::new(&boundary)?;
    let bound = positivity_bound(&boundary, &boundary_curv.curv);
    if s0 >= bound {
        return Err(Error::InvalidParam(format!("collar height {s0} exceeds positivity bound {bound:.4}")));
    }
    let mut base = x.to_vec();
    base.push(s0);
    let sigma = Jet::variable(&base, S, order)?;
    let map = [0, 1, 2, 3];
    let s2 = sigma.powi(2);
    let p = &boundary_curv.curv.schouten;
    let pp = contract(&p.raise(1, &boundary)?, 1, p, 0)?; // P_a^c P_cb
    let g = Tensor::try_from_fn(vec![Slot::Down; 2], vec![D, D], |i| {
        let (a, b) = (i[0], i[1]);
        if a == S || b == S {
            return Ok(sigma.constant_like(if a == b { 1.0 } else { 0.0 }));
        }
        let lift = |j: &Jet| j.truncate(order).embed(D, &map);
        let gab = lift(boundary.g.get(&[a, b]))?;
        let pab = lift(p.get(&[a, b]))?;
        let ppab = lift(pp.get(&[a, b]))?;
        Ok(gab - &s2 * &(pab - (&s2 * &ppab).scale(0.25)))
    })?;
    Ok(Collar { s0, boundary, boundary_curv, bulk: Metric::new(g)?, sigma })
}

/// A height below which `g − s²P + ¼s⁴P²` is positive definite: `1/√‖g⁻¹P‖_F` at the base point.
pub fn positivity_bound(g: &Metric, curv: &Curvature) -> f64 {
    let mixed = curv.schouten.raise(0, g).expect("schouten is covariant");
    let norm = mixed.values().iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm == 0.0 {
        f64::INFINITY
    } else {
        1.0 / norm.sqrt()
    }
}

impl Collar {
    pub fn order(&self) -> usize {
        self.bulk.order()
    }

    pub fn at_boundary(&self) -> bool {
        self.s0 == 0.0
    }

    /// `σ^m x`, exact to one order higher per power when based on the boundary.
    pub fn sigma_times(&self, x: &Jet, m: usize) -> Result<Jet> {
        if self.at_boundary() {
            x.mul_var_power(S, m)
        } else {
            Ok(x * &self.sigma.powi(m as u32))
        }
    }

    fn sigma_times_tensor(&self, t: &Tensor, m: usize) -> Result<Tensor> {
        t.try_map(|j| self.sigma_times(j, m))
    }

    /// `n_a = ∇_a σ`.
    pub fn normal_lower(&self) -> Tensor {
        let like = self.sigma.zero_like();
        Tensor::from_fn(vec![Slot::Down], vec![D], |i| like.constant_like(if i[0] == S { 1.0 } else { 0.0 }))
    }

    /// `n^a = ḡ^{ab} n_b`.
    pub fn normal_upper(&self) -> Tensor {
        Tensor::from_fn(vec![Slot::Up], vec![D], |i| self.bulk.ginv.get(&[i[0], S]).clone())
    }

    /// `g₊ = ḡ/σ²`; only defined away from the boundary.
    pub fn bulk_plus(&self) -> Result<Metric> {
        if self.at_boundary() {
            return Err(Error::Singular(0.0));
        }
        let inv = self.sigma.powi(2).recip()?;
        Metric::new(self.bulk.g.mul_jet(&inv))
    }

    fn dividing(&self) -> Result<()> {
        if self.at_boundary() {
            Ok(())
        } else {
            Err(Error::InvalidParam("boundary limits need a base point with s = 0".into()))
        }
    }

    /// `σP̄ + ∇̄∇̄σ`, which equals `σ P^{g₊}` up to a multiple of the metric.
    pub fn scaled_schouten_plus(&self, curv: &Curvature) -> Result<Tensor> {
        let sp = self.sigma_times_tensor(&curv.schouten, 1)?;
        let hess = Tensor::from_fn(vec![Slot::Down; 2], vec![D, D], |i| -self.bulk.gamma.get(&[S, i[0], i[1]]));
        let o = sp.order().min(hess.order());
        sp.truncate(o).add(&hess.truncate(o))
    }

    /// `P^{g₊}` from the rescaling law, `P̄ + σ⁻¹∇̄n − ½σ⁻²|n|²ḡ`, away from the boundary.
    pub fn schouten_plus_law(&self, curv: &Curvature) -> Result<Tensor> {
        let q = self.scaled_schouten_plus(curv)?;
        let o = q.order();
        let inv = self.sigma.truncate(o).recip()?;
        let nn = self.bulk.ginv.get(&[S, S]).truncate(o);
        let corr = self.bulk.g.truncate(o).mul_jet(&(&nn * &inv.powi(2))).scale(0.5);
        q.mul_jet(&inv).sub(&corr)
    }

    /// `σ C^{g₊}_abc = σC̄_abc − n^d W̄_dcab`.
    pub fn scaled_cotton_plus(&self, full: &FullCurvature) -> Result<Tensor> {
        let sc = self.sigma_times_tensor(&full.cotton, 1)?;
        let nw = contract(&self.normal_upper(), 0, &full.weyl, 0)?.permute(&[1, 2, 0])?;
        let o = sc.order().min(nw.order());
        sc.truncate(o).sub(&nw.truncate(o))
    }

    /// `B^{g₊} = σ²B̄ − 2(d−4)σ n^d C̄_d(ab) − (d−4) n^c n^d W̄_cabd`.
    pub fn bach_plus(&self, full: &FullCurvature) -> Result<Tensor> {
        let k = D as f64 - 4.0;
        let nu = self.normal_upper();
        let sb = self.sigma_times_tensor(&full.bach, 2)?;
        let nc = contract(&nu, 0, &full.cotton, 0)?.symmetrize(&[0, 1])?;
        let snc = self.sigma_times_tensor(&nc, 1)?.scale(2.0 * k);
        let nwn = contract(&contract(&nu, 0, &full.weyl, 0)?, 2, &nu, 0)?.scale(k);
        let o = sb.order().min(snc.order()).min(nwn.order());
        sb.truncate(o).sub(&snc.truncate(o))?.sub(&nwn.truncate(o))
    }

    /// `j[g₊, A] = σ² j[ḡ, A] − (d−4) σ n^e F_eb` for a bulk connection.
    pub fn ym_current_plus(&self, conn: &GaugeConnection) -> Result<Tensor> {
        let jbar = ym_current(&self.bulk, conn)?;
        let f = conn.curvature()?;
        let nf = contract(&self.normal_upper(), 0, &f, 0)?;
        let a = self.sigma_times_tensor(&jbar, 2)?;
        let b = self.sigma_times_tensor(&nf, 1)?.scale(D as f64 - 4.0);
        let o = a.order().min(b.order());
        a.truncate(o).sub(&b.truncate(o))
    }

    /// The bulk tractor connection built from `ḡ`.
    pub fn bulk_tractor(&self, curv: &Curvature) -> Result<GaugeConnection> {
        tractor_connection(&self.bulk, curv)
    }

    /// The trivial extension of a boundary connection: no `ds` component and
    /// no `s` dependence.
    pub fn extend_connection(&self, conn: &GaugeConnection) -> Result<GaugeConnection> {
        if conn.dim() != N {
            return Err(Error::ShapeMismatch("boundary connection must live on the boundary".into()));
        }
        let r = conn.rank;
        let like = self.sigma.zero_like().truncate(conn.order());
        let map = [0, 1, 2, 3];
        let a = Tensor::try_from_fn(vec![Slot::Down, Slot::EndUp, Slot::EndDown], vec![D, r, r], |i| {
            if i[0] == S {
                Ok(like.clone())
            } else {
                conn.a.get(i).embed(D, &map)
            }
        })?;
        GaugeConnection::new(a)
    }
}

/// Divides every component by `s^m` and restricts to `s = 0`, returning
/// boundary jets and the largest discarded coefficient.
pub fn boundary_coefficient(t: &Tensor, m: usize) -> Result<(Tensor, f64)> {
    let mut dropped = 0.0f64;
    let out = t.try_map(|j| {
        let (q, d) = j.divide_by_var_power(S, m)?;
        dropped = dropped.max(d);
        q.restrict_var(S)
    })?;
    Ok((out, dropped))
}

/// Keeps tangential values of every tangent slot and boundary tractor indices
/// of every tractor or endomorphism slot.
pub fn tangential(t: &Tensor) -> Result<Tensor> {
    let dims: Vec<usize> = t
        .slots()
        .iter()
        .zip(t.dims())
        .map(|(s, &d)| match s {
            Slot::Up | Slot::Down => Ok(N),
            _ if d == D + 2 => Ok(N + 2),
            _ => Ok(d),
        })
        .collect::<Result<_>>()?;
    let mut src = vec![0; t.rank()];
    let big: Vec<bool> = t.slots().iter().zip(t.dims()).map(|(s, &d)| !matches!(s, Slot::Up | Slot::Down) && d == D + 2).collect();
    Ok(Tensor::from_fn(t.slots().to_vec(), dims, |idx| {
        for k in 0..idx.len() {
            src[k] = if big[k] { BOUNDARY_TRACTOR[idx[k]] } else { idx[k] };
        }
        t.get(&src).clone()
    })
    .with_weight(t.weight))
}

/// `max|a − b| / max|b|` on base values.
pub fn relative(a: &Tensor, b: &Tensor) -> Result<f64> {
    let order = a.order().min(b.order());
    let d = a.truncate(order).sub(&b.truncate(order))?;
    let scale = b.max_abs();
    if scale == 0.0 {
        return Ok(d.max_abs());
    }
    Ok(d.max_abs() / scale)
}

/// The obstruction read off the collar: `𝓑 = s⁻³(σP̄ + ∇̄∇̄σ)_∘ |_{s=0}`.
#[derive(Debug, Clone)]
pub struct Obstruction {
    /// Bulk components `[Down, Down]` over the boundary variables.
    pub tensor: Tensor,
    /// Largest coefficient discarded by the division.
    pub dropped: f64,
    /// Largest antisymmetric part.
    pub asymmetry: f64,
    /// `|ḡ^{ab}𝓑_ab|`.
    pub trace: f64,
    /// Largest component with a normal index.
    pub normal: f64,
    /// Least-squares ratio of the tangential block to the boundary Bach tensor.
    pub c0: f64,
    /// `max|𝓑_∥ − c₀·Bach| / max|Bach|`.
    pub fit: f64,
}

/// The bulk Bach tensor extension `c·B` padded with zero normal components.
pub fn extend_two_tensor(b: &Tensor, c: f64) -> Tensor {
    let like = b.data()[0].zero_like();
    Tensor::from_fn(vec![Slot::Down; 2], vec![D, D], |i| {
        if i[0] == S || i[1] == S {
            like.clone()
        } else {
            b.get(i).scale(c)
        }
    })
}

impl Collar {
    pub fn obstruction(&self) -> Result<Obstruction> {
        self.dividing()?;
        let curv = Curvature::new(&self.bulk)?;
        let q = self.scaled_schouten_plus(&curv)?;
        let o = q.order();
        let bulk_o = Metric::new(self.bulk.g.truncate(o + 1))?;
        let qtf = q.trace_free(&bulk_o)?;
        if o < 3 {
            return Err(Error::OrderExhausted { needed: 4, available: self.order() });
        }
        let (tensor, dropped) = boundary_coefficient(&qtf, 3)?;
        let mut asymmetry = 0.0f64;
        let mut normal = 0.0f64;
        let mut trace = 0.0;
        for a in 0..D {
            trace += tensor.value(&[a, a]) * self.bulk.ginv.value(&[a, a]);
            for b in 0..D {
                asymmetry = asymmetry.max((tensor.value(&[a, b]) - tensor.value(&[b, a])).abs());
                if a != b {
                    trace += tensor.value(&[a, b]) * self.bulk.ginv.value(&[a, b]);
                }
                if a == S || b == S {
                    normal = normal.max(tensor.value(&[a, b]).abs());
                }
            }
        }
        let bach = &self.boundary_curv.bach;
        let (mut num, mut den) = (0.0, 0.0);
        for a in 0..N {
            for b in 0..N {
                num += tensor.value(&[a, b]) * bach.value(&[a, b]);
                den += bach.value(&[a, b]).powi(2);
            }
        }
        if den == 0.0 {
            return Err(Error::Singular(0.0));
        }
        let c0 = num / den;
        let tang = tangential(&tensor)?;
        let fit = relative(&tang, &bach.scale(c0))?;
        Ok(Obstruction { tensor, dropped, asymmetry, trace: trace.abs(), normal, c0, fit })
    }

    /// Largest coefficient of `∇_a I^A` of `s`-degree below two, with `I = D̂σ`
    /// built from `ḡ`. Relative to `1 + max|I|`.
    pub fn parallel_defect(&self) -> Result<f64> {
        self.dividing()?;
        let curv = Curvature::new(&self.bulk)?;
        let calc = TractorCalculus::new(&self.bulk, &curv, None)?;
        let i = calc.thomas_d_hat(&Tensor::scalar(self.sigma.clone()).with_weight(1.0), 1.0)?;
        let di = nabla(&i, &Connections::with_tractor(&self.bulk, &calc.omega))?;
        if di.order() < 2 {
            return Err(Error::OrderExhausted { needed: self.order() + 2 - di.order(), available: self.order() });
        }
        let (_, dropped) = boundary_coefficient(&di, 2)?;
        Ok(dropped / (1.0 + i.max_abs()))
    }

    /// Residual of the boundary restriction of the bulk tractor connection
    /// against the boundary tractor connection, tangential directions only.
    pub fn tractor_restriction_residual(&self) -> Result<f64> {
        self.dividing()?;
        let curv = Curvature::new(&self.bulk)?;
        let bulk = self.bulk_tractor(&curv)?;
        let (restricted, _) = boundary_coefficient(&bulk.a, 0)?;
        let restricted = tangential(&restricted)?;
        let boundary = tractor_connection(&self.boundary, &self.boundary_curv.curv)?;
        crate::fields::residual(&restricted, &boundary.a)
    }
}

/// Leading coefficients of the rescaled Cotton and Bach tensors at the boundary,
/// each as a relative residual against `𝓑 = c₀·Bach`.
#[derive(Debug, Clone, Copy)]
pub struct AsymptoticsReport {
    /// `s¹` coefficient of `C^{g₊}` against `2(d−2) n_[a 𝓑_b]c`.
    pub cotton: f64,
    /// `s¹` coefficient of `n^a C^{g₊}_abc` against `(d−2)𝓑_bc`.
    pub cotton_normal: f64,
    /// `s²` coefficient of `B^{g₊}` against `(d−2)𝓑`.
    pub bach: f64,
    /// Largest coefficient below the leading power in any of the three.
    pub dropped: f64,
}

pub fn asymptotics_check(cs: &Collar, c0: f64) -> Result<AsymptoticsReport> {
    cs.dividing()?;
    let full = FullCurvature::new(&cs.bulk)?;
    let ob = extend_two_tensor(&cs.boundary_curv.bach, c0);
    let ob = ob.map(|j| j.embed(D, &[0, 1, 2, 3]).expect("four variables").restrict_var(S).expect("five variables"));
    let dm2 = D as f64 - 2.0;

    let sc = cs.scaled_cotton_plus(&full)?;
    if sc.order() < 2 {
        return Err(Error::OrderExhausted { needed: 4, available: cs.order() });
    }
    let (c1, d1) = boundary_coefficient(&sc, 2)?;
    let like = ob.data()[0].zero_like();
    let n_low = Tensor::from_fn(vec![Slot::Down], vec![D], |i| like.constant_like(if i[0] == S { 1.0 } else { 0.0 }));
    let expected_c = n_low.outer(&ob).antisymmetrize(&[0, 1])?.scale(2.0 * dm2);
    let cotton = relative(&c1, &expected_c)?;

    let nu = Tensor::from_fn(vec![Slot::Up], vec![D], |i| like.constant_like(if i[0] == S { 1.0 } else { 0.0 }));
    let cn = contract(&nu, 0, &c1, 0)?;
    let cotton_normal = relative(&tangential(&cn)?, &tangential(&ob)?.scale(dm2))?;

    let bp = cs.bach_plus(&full)?;
    let (b2, d2) = boundary_coefficient(&bp, 2)?;
    let bach = relative(&b2, &ob.scale(dm2))?;
    Ok(AsymptoticsReport { cotton, cotton_normal, bach, dropped: d1.max(d2) })
}

/// Which bulk connection enters the scaled current.
#[derive(Debug, Clone, Copy)]
pub enum BulkConnection<'a> {
    /// A boundary connection, trivially extended.
    External(&'a GaugeConnection),
    /// The tractor connection of the collar class.
    Tractor,
}

/// `s⁻² j[g₊, A]` at `s = 0`, tangential components.
#[derive(Debug, Clone)]
pub struct ScaledLimit {
    /// Slots `[Down, EndUp, EndDown]` over the boundary variables; tractor
    /// endomorphisms are restricted to [`BOUNDARY_TRACTOR`].
    pub limit: Tensor,
    /// The full bulk limit before tangential restriction.
    pub bulk_limit: Tensor,
    /// Largest `s⁰` or `s¹` coefficient, relative to `1 + max|limit|`.
    pub lower_order: f64,
}

pub fn scaled_bulk_ym_limit(cs: &Collar, conn: BulkConnection) -> Result<ScaledLimit> {
    cs.dividing()?;
    let bulk_conn = match conn {
        BulkConnection::External(a) => cs.extend_connection(a)?,
        BulkConnection::Tractor => cs.bulk_tractor(&Curvature::new(&cs.bulk)?)?,
    };
    let j = cs.ym_current_plus(&bulk_conn)?;
    if j.order() < 2 {
        return Err(Error::OrderExhausted { needed: 2 + cs.order() - j.order(), available: cs.order() });
    }
    let (bulk_limit, dropped) = boundary_coefficient(&j, 2)?;
    let limit = tangential(&bulk_limit)?;
    let lower_order = dropped / (1.0 + bulk_limit.max_abs());
    Ok(ScaledLimit { limit, bulk_limit, lower_order })
}

/// `2(d−2)(d−3)·q_s(c₀·Bach)` as an endomorphism-valued boundary 1-form.
pub fn tractor_current_prediction(cs: &Collar, c0: f64) -> Result<Tensor> {
    let b = cs.boundary_curv.bach.scale(c0);
    let q = q_s(&b, 1, N)?.permute(&[2, 0, 1])?; // [c, A, B]
    let dm2 = D as f64 - 2.0;
    let dm3 = D as f64 - 3.0;
    Ok(form_to_end(&q, &cs.boundary)?.scale(2.0 * dm2 * dm3))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog::ConnSpec;
    use crate::fields::residual;
    use crate::gauge::cym_current;

    fn random4(seed: u64) -> MetricSpec {
        MetricSpec::RandomMetric { n: 4, seed, amp: 0.2 }
    }

    const X: [f64; 4] = [0.05, -0.1, 0.08, 0.02];

    #[test]
    fn flat_boundary_gives_hyperbolic_space() {
        let cs = collar_extend(&MetricSpec::Flat { n: 4 }, &X, 0.7, 4).unwrap();
        let gp = cs.bulk_plus().unwrap();
        let c = Curvature::new(&gp).unwrap();
        let r = residual(&c.schouten, &gp.g.scale(-0.5)).unwrap();
        assert!(r < 1e-13, "{r}");
    }

    #[test]
    fn rescaling_laws_match_direct_bulk() {
        let cs = collar_extend(&random4(3), &X, 0.3, 5).unwrap();
        let gp = cs.bulk_plus().unwrap();
        let direct = FullCurvature::new(&gp).unwrap();
        let full = FullCurvature::new(&cs.bulk).unwrap();
        let p = cs.schouten_plus_law(&full.curv).unwrap();
        assert!(residual(&p, &direct.curv.schouten).unwrap() < 1e-11);
        let sc = cs.scaled_cotton_plus(&full).unwrap();
        let c = direct.cotton.mul_jet(&cs.sigma.truncate(direct.cotton.order()));
        assert!(residual(&sc, &c).unwrap() < 1e-11);
        let b = cs.bach_plus(&full).unwrap();
        assert!(residual(&b, &direct.bach).unwrap() < 1e-10, "{}", residual(&b, &direct.bach).unwrap());
        let a = cs.extend_connection(&ConnSpec::RandomGauge { seed: 2, rank: 2, amp: 0.5 }.connection(&random4(3), &X, 4).unwrap()).unwrap();
        let j = cs.ym_current_plus(&a).unwrap();
        assert!(residual(&j, &ym_current(&gp, &a).unwrap()).unwrap() < 1e-11);
    }

    #[test]
    fn positivity_bound_is_enforced() {
        let spec = random4(1);
        let m = spec.metric(&X, 2).unwrap();
        let bound = positivity_bound(&m, &Curvature::new(&m).unwrap());
        assert!(collar_extend(&spec, &X, 1.1 * bound, 3).is_err());
        assert!(collar_extend(&spec, &X, -0.1, 3).is_err());
    }

    #[test]
    fn obstruction_is_a_multiple_of_bach() {
        let mut c0s = Vec::new();
        for seed in [1, 2, 3] {
            let cs = collar_extend(&random4(seed), &X, 0.0, 4).unwrap();
            let ob = cs.obstruction().unwrap();
            assert!(ob.dropped < 1e-10, "{}", ob.dropped);
            assert!(ob.asymmetry < 1e-12 && ob.trace < 1e-10 && ob.normal < 1e-10, "{ob:?}");
            assert!(ob.fit < 1e-9, "{}", ob.fit);
            c0s.push(ob.c0);
        }
        for c in &c0s {
            assert!((c - 1.0 / 6.0).abs() < 1e-12, "{c0s:?}");
        }
    }

    #[test]
    fn sigma_gives_parallel_tractor_to_second_order() {
        let cs = collar_extend(&random4(4), &X, 0.0, 4).unwrap();
        assert!(matches!(cs.parallel_defect(), Err(Error::OrderExhausted { .. })));
        let cs = collar_extend(&random4(4), &X, 0.0, 5).unwrap();
        let r = cs.parallel_defect().unwrap();
        assert!(r < 1e-10, "{r}");
    }

    #[test]
    fn cotton_and_bach_asymptotics() {
        let cs = collar_extend(&random4(5), &X, 0.0, 4).unwrap();
        let c0 = cs.obstruction().unwrap().c0;
        let rep = asymptotics_check(&cs, c0).unwrap();
        assert!(rep.cotton < 1e-9 && rep.cotton_normal < 1e-9 && rep.bach < 1e-9 && rep.dropped < 1e-10, "{rep:?}");
    }

    #[test]
    fn external_limit_is_boundary_current() {
        let spec = random4(6);
        let cs = collar_extend(&spec, &X, 0.0, 4).unwrap();
        let a = ConnSpec::ConstantF { seed: 3 }.connection(&spec, &X, 4).unwrap();
        let lim = scaled_bulk_ym_limit(&cs, BulkConnection::External(&a)).unwrap();
        assert!(lim.lower_order < 1e-12, "{}", lim.lower_order);
        let j = ym_current(&cs.boundary, &a).unwrap();
        assert!(residual(&lim.limit, &j).unwrap() < 1e-12);
    }

    #[test]
    fn flat_boundary_without_connection_has_zero_limit() {
        let cs = collar_extend(&MetricSpec::Flat { n: 4 }, &X, 0.0, 4).unwrap();
        let a = GaugeConnection::zero(4, 1, &Jet::constant(4, 4, 0.0));
        let lim = scaled_bulk_ym_limit(&cs, BulkConnection::External(&a)).unwrap();
        assert_eq!(lim.limit.max_abs_coeffs(), 0.0);
    }

    #[test]
    fn tractor_limit_matches_obstruction() {
        let spec = random4(7);
        let cs = collar_extend(&spec, &X, 0.0, 4).unwrap();
        let c0 = cs.obstruction().unwrap().c0;
        let lim = scaled_bulk_ym_limit(&cs, BulkConnection::Tractor).unwrap();
        assert!(lim.lower_order < 1e-10, "{}", lim.lower_order);
        // The limit is the boundary current and carries the opposite sign to
        // 12·q_s(c₀·Bach) with q_s = X_[A Z_B].
        let predicted = tractor_current_prediction(&cs, c0).unwrap();
        let r = relative(&lim.limit, &predicted.scale(-1.0)).unwrap();
        assert!(r < 1e-9, "{r}");
        assert!(relative(&lim.limit, &predicted).unwrap() > 1.0);
        let omega = tractor_connection(&cs.boundary, &cs.boundary_curv.curv).unwrap();
        let j = cym_current(&cs.boundary, &cs.boundary_curv.curv, &omega).unwrap();
        assert!(relative(&lim.limit, &j).unwrap() < 1e-9);
    }

    #[test]
    fn tractor_connection_restricts_to_boundary() {
        let cs = collar_extend(&random4(8), &X, 0.0, 4).unwrap();
        let r = cs.tractor_restriction_residual().unwrap();
        assert!(r < 1e-12, "{r}");
    }
}
