//! Conformal rescaling `ĝ = Ω²g` and transformation-law checks.

use crate::curvature::{Curvature, FullCurvature};
use crate::error::{Error, Result};
use crate::fields::{contract, nabla, residual, Connections, Metric, Slot, Tensor};
use crate::jet::Jet;
use crate::tractor::{change_splitting, splitting_matrix};

/// A positive conformal factor and `Υ_a = Ω⁻¹∂_aΩ`.
#[derive(Debug, Clone)]
pub struct ConformalFactor {
    pub omega: Jet,
    /// Slots `[Down]`, one order below `omega`.
    pub upsilon: Tensor,
}

impl ConformalFactor {
    pub fn new(omega: Jet) -> Result<ConformalFactor> {
        if omega.value() <= 0.0 {
            return Err(Error::InvalidParam(format!("conformal factor must be positive, got {}", omega.value())));
        }
        let ln = omega.ln()?;
        let n = omega.nvars();
        let upsilon = Tensor::try_from_fn(vec![Slot::Down], vec![n], |i| ln.partial(i[0]))?;
        Ok(ConformalFactor { omega, upsilon })
    }
}

/// `Ω²g` together with the factor data.
pub fn rescale(metric: &Metric, omega: &Jet) -> Result<(Metric, ConformalFactor)> {
    let factor = ConformalFactor::new(omega.clone())?;
    let order = metric.order().min(omega.order());
    let o2 = omega.truncate(order).powi(2);
    let g = metric.g.truncate(order).mul_jet(&o2);
    Ok((Metric::new(g)?, factor))
}

/// How components computed in two scales are compared.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Conjugation {
    /// Plain density scaling by `Ω^w`.
    None,
    /// Tractor slots change splitting.
    Splitting,
    /// Tractor slots and tractor-endomorphism slots change splitting.
    AdjointSplitting,
}

/// Normalized residual of `producer(Ω²g) = Ω^w · conj(producer(g))`.
pub fn weight_check(
    metric: &Metric,
    omega: &Jet,
    w: f64,
    conjugation: Conjugation,
    producer: impl Fn(&Metric) -> Result<Tensor>,
) -> Result<f64> {
    let (hat, _) = rescale(metric, omega)?;
    let a = producer(metric)?.with_weight(w);
    let b = producer(&hat)?;
    let order = a.order().min(b.order());
    let expected = match conjugation {
        Conjugation::None => a.mul_jet(&omega.truncate(a.order()).powf(w)?),
        Conjugation::Splitting | Conjugation::AdjointSplitting => {
            let s = splitting_matrix(metric, omega)?;
            let s: Vec<Vec<Jet>> = s.iter().map(|r| r.iter().map(|j| j.truncate(a.order())).collect()).collect();
            change_splitting(&a, &s, &omega.truncate(a.order()), conjugation == Conjugation::AdjointSplitting)?
        }
    };
    residual(&expected.truncate(order), &b.truncate(order))
}

/// Residuals of the Schouten, Cotton and Bach transformation laws, each
/// comparing the curvature of `Ω²g` against the law applied to `g`. The Bach
/// law is `Ω²B̂ = B + (n−4)(c·Υ^d C_d(ab) − Υ^c Υ^d W_cabd)` with `c = bach_c`.
pub fn ptrans_residuals(metric: &Metric, omega: &Jet, bach_c: f64) -> Result<[f64; 3]> {
    let n = metric.n;
    let (hat, factor) = rescale(metric, omega)?;
    let full = FullCurvature::new(metric)?;
    let full_hat = FullCurvature::new(&hat)?;
    let lc = Connections::levi_civita(metric);
    let ups = &factor.upsilon;
    let ups_up = ups.raise(0, metric)?;
    let norm = contract(ups, 0, &ups_up, 0)?.data()[0].clone();

    // P̂ = P − ∇Υ + ΥΥ − ½|Υ|² g
    let dups = nabla(ups, &lc)?;
    let o = dups.order();
    let p_law = Tensor::from_fn(vec![Slot::Down; 2], vec![n; 2], |i| {
        let (a, b) = (i[0], i[1]);
        let mut v = full.curv.schouten.get(i).truncate(o) - dups.get(i).clone();
        v.add_product(&ups.get(&[a]).truncate(o), &ups.get(&[b]).truncate(o));
        v - (&norm.truncate(o) * &metric.g.get(i).truncate(o)).scale(0.5)
    });
    let r_p = residual(&full_hat.curv.schouten, &p_law)?;

    // Ĉ_abc = C_abc + Υ^d W_dcab
    let uw = contract(&ups_up, 0, &full.weyl, 0)?; // [c, a, b]
    let c_law = full.cotton.add(&uw.permute(&[1, 2, 0])?.truncate(full.cotton.order()))?;
    let r_c = residual(&full_hat.cotton, &c_law)?;

    let uc = contract(&ups_up, 0, &full.cotton, 0)?.symmetrize(&[0, 1])?; // [a, b]
    let uwu = contract(&ups_up, 0, &full.weyl, 0)?; // [a, b, d]
    let uwu = contract(&uwu, 2, &ups_up, 0)?; // [a, b]
    let o = full.bach.order();
    let corr = uc.scale(bach_c).truncate(o).sub(&uwu.truncate(o))?.scale(n as f64 - 4.0);
    let b_law = full.bach.add(&corr)?;
    let b_hat = full_hat.bach.mul_jet(&omega.truncate(o).powi(2));
    let r_b = residual(&b_hat, &b_law)?;
    Ok([r_p, r_c, r_b])
}

/// Residual of `P̂ = ½ĝ` for `ĝ = Ω²g`, used with the stereographic factor on flat space.
pub fn einstein_schouten_residual(metric: &Metric, lambda: f64) -> Result<f64> {
    let c = Curvature::new(metric)?;
    residual(&c.schouten, &metric.g.scale(lambda))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog::{FactorSpec, MetricSpec};

    #[test]
    fn unit_factor_is_identity() {
        let m = MetricSpec::RandomMetric { n: 4, seed: 3, amp: 0.2 }.metric(&[0.1; 4], 3).unwrap();
        let one = m.g.data()[0].constant_like(1.0);
        let (hat, f) = rescale(&m, &one).unwrap();
        assert_eq!(residual(&hat.g, &m.g).unwrap(), 0.0);
        assert_eq!(f.upsilon.max_abs_coeffs(), 0.0);
        assert!(ConformalFactor::new(one.scale(-1.0)).is_err());
    }

    #[test]
    fn stereographic_factor_gives_round_sphere() {
        let p = [0.1, -0.2, 0.3, 0.05];
        let m = MetricSpec::Flat { n: 4 }.metric(&p, 4).unwrap();
        let x = Jet::seed_all(&p, 4);
        let mut r2 = x[0].zero_like();
        for xi in &x {
            r2.add_product(xi, xi);
        }
        let omega = (&r2 + 1.0).recip().unwrap().scale(2.0);
        let (hat, _) = rescale(&m, &omega).unwrap();
        assert!(einstein_schouten_residual(&hat, 0.5).unwrap() < 1e-13);
    }

    #[test]
    fn upsilon_is_log_gradient() {
        let p = [0.1, -0.2, 0.3];
        let om = FactorSpec::new(4).omega(&p, 3);
        let f = ConformalFactor::new(om.clone()).unwrap();
        let h = 1e-6;
        for a in 0..3 {
            let mut q = p;
            q[a] += h;
            let mut r = p;
            r[a] -= h;
            let fd = (FactorSpec::new(4).omega(&q, 0).value().ln() - FactorSpec::new(4).omega(&r, 0).value().ln()) / (2.0 * h);
            assert!((f.upsilon.value(&[a]) - fd).abs() < 1e-8);
        }
    }

    #[test]
    fn schouten_cotton_bach_laws() {
        let p = [0.05, -0.1, 0.12, 0.02, -0.07];
        let m = MetricSpec::RandomMetric { n: 5, seed: 11, amp: 0.2 }.metric(&p, 4).unwrap();
        let om = FactorSpec::new(2).omega(&p, 4);
        let r = ptrans_residuals(&m, &om, 1.0).unwrap();
        assert!(r[0] < 1e-12 && r[1] < 1e-12, "{r:?}");
        assert!(r[2] > 1e-3, "{r:?}");
        let r = ptrans_residuals(&m, &om, 2.0).unwrap();
        assert!(r[2] < 1e-12, "{r:?}");
    }

    #[test]
    fn weyl_is_invariant() {
        let p = [0.05, -0.1, 0.12, 0.02];
        let m = MetricSpec::RandomMetric { n: 4, seed: 5, amp: 0.2 }.metric(&p, 3).unwrap();
        let om = FactorSpec::new(9).omega(&p, 3);
        let r = weight_check(&m, &om, 0.0, Conjugation::None, |g| {
            let c = Curvature::new(g)?;
            c.weyl(g)?.raise(2, g)
        })
        .unwrap();
        assert!(r < 1e-12, "{r}");
    }
}
