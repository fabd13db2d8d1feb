//! Named metrics, connections and conformal factors used by checks and the CLI.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::curvature::Curvature;
use crate::error::{Error, Result};
use crate::fields::{Metric, Slot, Tensor};
use crate::gauge::GaugeConnection;
use crate::jet::Jet;
use crate::tractor::tractor_connection;

/// Monomial exponents of total degree `1..=deg` in `n` variables.
fn monomials(n: usize, deg: usize) -> Vec<Vec<usize>> {
    fn rec(n: usize, left: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == n {
            out.push(cur.clone());
            return;
        }
        for e in 0..=left {
            cur.push(e);
            rec(n, left - e, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(n, deg, &mut Vec::new(), &mut out);
    out.retain(|m| m.iter().sum::<usize>() > 0);
    out
}

fn monomial_jets(x: &[Jet], mons: &[Vec<usize>]) -> Vec<Jet> {
    mons.iter()
        .map(|m| {
            let mut acc = x[0].constant_like(1.0);
            for (xi, &e) in x.iter().zip(m) {
                if e > 0 {
                    acc = &acc * &xi.powi(e as u32);
                }
            }
            acc
        })
        .collect()
}

/// A seeded random polynomial without constant term, coefficients in `[-1, 1]`.
#[derive(Debug, Clone)]
struct RandomPoly {
    mons: Vec<Vec<usize>>,
    coeffs: Vec<f64>,
}

impl RandomPoly {
    fn new(rng: &mut ChaCha8Rng, n: usize, deg: usize) -> RandomPoly {
        let mons = monomials(n, deg);
        let coeffs = mons.iter().map(|_| rng.gen_range(-1.0..1.0)).collect();
        RandomPoly { mons, coeffs }
    }

    fn eval(&self, monos: &[Jet]) -> Jet {
        let mut acc = monos[0].zero_like();
        for (m, &c) in monos.iter().zip(&self.coeffs) {
            acc += &m.scale(c);
        }
        acc
    }
}

/// Parameters of the six-dimensional example `δ + 2√(1−f(u+v)²) du dv` with
/// `f(t) = (offset + amp·sin t)/scale`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct G6Params {
    pub offset: f64,
    pub amp: f64,
    pub scale: f64,
}

impl Default for G6Params {
    fn default() -> Self {
        G6Params { offset: 2.0, amp: 1.0, scale: 4.0 }
    }
}

impl G6Params {
    pub fn validate(&self) -> Result<()> {
        if self.scale == 0.0 || self.offset.abs() <= self.amp.abs() || self.offset.abs() + self.amp.abs() >= self.scale.abs()
        {
            return Err(Error::InvalidParam("g6_example needs 0 < |f| < 1 everywhere".into()));
        }
        Ok(())
    }

    pub fn f(&self, t: &Jet) -> Jet {
        (&t.sin().scale(self.amp) + self.offset).scale(1.0 / self.scale)
    }

    /// A primitive of `f`.
    pub fn primitive(&self, t: &Jet) -> Jet {
        (&t.scale(self.offset) - &t.cos().scale(self.amp)).scale(1.0 / self.scale)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case")]
pub enum MetricSpec {
    Flat { n: usize },
    Sphere { n: usize },
    Hyperbolic { n: usize },
    S3xs3,
    G6Example {
        #[serde(default)]
        f: G6Params,
    },
    RandomMetric {
        n: usize,
        seed: u64,
        #[serde(default = "default_amp")]
        amp: f64,
    },
}

fn default_amp() -> f64 {
    0.2
}

impl MetricSpec {
    pub fn dim(&self) -> usize {
        match self {
            MetricSpec::Flat { n } | MetricSpec::Sphere { n } | MetricSpec::Hyperbolic { n } => *n,
            MetricSpec::RandomMetric { n, .. } => *n,
            MetricSpec::S3xs3 | MetricSpec::G6Example { .. } => 6,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            MetricSpec::Flat { .. } => "flat",
            MetricSpec::Sphere { .. } => "sphere",
            MetricSpec::Hyperbolic { .. } => "hyperbolic",
            MetricSpec::S3xs3 => "s3xs3",
            MetricSpec::G6Example { .. } => "g6_example",
            MetricSpec::RandomMetric { .. } => "random_metric",
        }
    }

    /// Centre of the default sampling box.
    pub fn anchor(&self) -> Vec<f64> {
        let n = self.dim();
        match self {
            MetricSpec::Hyperbolic { .. } => {
                let mut p = vec![0.0; n];
                p[n - 1] = 1.0;
                p
            }
            _ => vec![0.0; n],
        }
    }

    pub fn in_domain(&self, p: &[f64]) -> bool {
        match self {
            MetricSpec::Hyperbolic { n } => p.len() == *n && p[n - 1] > 0.0,
            _ => p.len() == self.dim(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.dim();
        if n == 0 {
            return Err(Error::InvalidParam("dimension must be positive".into()));
        }
        match self {
            MetricSpec::G6Example { f } => f.validate(),
            MetricSpec::RandomMetric { amp, .. } if !(0.0..=0.5).contains(amp) => {
                Err(Error::InvalidParam("random_metric amplitude must lie in [0, 0.5]".into()))
            }
            _ => Ok(()),
        }
    }

    pub fn components(&self, p: &[f64], order: usize) -> Result<Tensor> {
        self.validate()?;
        if !self.in_domain(p) {
            return Err(Error::ChartDomain(format!("{} at {p:?}", self.name())));
        }
        let n = self.dim();
        let x = Jet::seed_all(p, order);
        let delta = |a: usize, b: usize| if a == b { 1.0 } else { 0.0 };
        let shape = (vec![Slot::Down, Slot::Down], vec![n, n]);
        let t = match self {
            MetricSpec::Flat { .. } => Tensor::from_fn(shape.0, shape.1, |i| x[0].constant_like(delta(i[0], i[1]))),
            MetricSpec::Sphere { .. } => {
                let conf = conformal_sphere(&x)?;
                Tensor::from_fn(shape.0, shape.1, |i| conf.scale(delta(i[0], i[1])))
            }
            MetricSpec::Hyperbolic { .. } => {
                let conf = x[n - 1].powi(2).recip()?;
                Tensor::from_fn(shape.0, shape.1, |i| conf.scale(delta(i[0], i[1])))
            }
            MetricSpec::S3xs3 => {
                let c1 = conformal_sphere(&x[..3])?;
                let c2 = conformal_sphere(&x[3..])?;
                Tensor::from_fn(shape.0, shape.1, |i| {
                    let (a, b) = (i[0], i[1]);
                    match (a < 3, b < 3) {
                        (true, true) => c1.scale(delta(a, b)),
                        (false, false) => c2.scale(delta(a, b)),
                        _ => c1.zero_like(),
                    }
                })
            }
            MetricSpec::G6Example { f } => {
                let ff = f.f(&(&x[0] + &x[1]));
                let off = (&(&ff * &ff).scale(-1.0) + 1.0).sqrt()?;
                Tensor::from_fn(shape.0, shape.1, |i| match (i[0], i[1]) {
                    (0, 1) | (1, 0) => off.clone(),
                    (a, b) => x[0].constant_like(delta(a, b)),
                })
            }
            MetricSpec::RandomMetric { seed, amp, .. } => {
                let mut rng = ChaCha8Rng::seed_from_u64(*seed);
                let polys: Vec<RandomPoly> = (0..n * (n + 1) / 2).map(|_| RandomPoly::new(&mut rng, n, 3)).collect();
                let monos = monomial_jets(&x, &polys[0].mons);
                let vals: Vec<Jet> = polys.iter().map(|q| q.eval(&monos).scale(*amp)).collect();
                Tensor::from_fn(shape.0, shape.1, |i| {
                    let (a, b) = (i[0].min(i[1]), i[0].max(i[1]));
                    let k = a * n - a * (a + 1) / 2 + b;
                    &vals[k] + delta(a, b)
                })
            }
        };
        check_positive(&t)?;
        Ok(t)
    }

    pub fn metric(&self, p: &[f64], order: usize) -> Result<Metric> {
        Metric::new(self.components(p, order)?)
    }
}

/// `4/(1+|x|²)²`.
fn conformal_sphere(x: &[Jet]) -> Result<Jet> {
    let mut r2 = x[0].zero_like();
    for xi in x {
        r2.add_product(xi, xi);
    }
    Ok((&r2 + 1.0).powi(2).recip()?.scale(4.0))
}

/// Cholesky on base-point values.
fn check_positive(g: &Tensor) -> Result<()> {
    let n = g.dims()[0];
    let mut l = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..=i {
            let mut s = g.value(&[i, j]);
            for k in 0..j {
                s -= l[i][k] * l[j][k];
            }
            if i == j {
                if s <= 0.0 {
                    return Err(Error::InvalidParam("metric is not positive definite at this point".into()));
                }
                l[i][i] = s.sqrt();
            } else {
                l[i][j] = s / l[j][j];
            }
        }
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case")]
pub enum ConnSpec {
    /// The trivial connection on a trivial bundle.
    Zero {
        #[serde(default = "one")]
        rank: usize,
    },
    /// `A = E♭(λ) E♭` for the Euler field `E` and a constant `λ`.
    EuclidGauge { lambda: Vec<f64> },
    /// Abelian potential `A_b = ½ F_ab x^a` of a constant seeded 2-form.
    #[serde(rename = "constant_F")]
    ConstantF { seed: u64 },
    /// Abelian potential `G(u+v) dv` with `G' = f`, whose curvature is `f du∧dv`.
    G6Potential {
        #[serde(default)]
        f: G6Params,
    },
    /// Seeded quadratic polynomial connection.
    RandomGauge {
        seed: u64,
        #[serde(default = "two")]
        rank: usize,
        #[serde(default = "default_gauge_amp")]
        amp: f64,
    },
    /// The tractor connection of the metric.
    Tractor,
}

fn one() -> usize {
    1
}

fn two() -> usize {
    2
}

fn default_gauge_amp() -> f64 {
    0.5
}

impl ConnSpec {
    pub fn name(&self) -> &'static str {
        match self {
            ConnSpec::Zero { .. } => "zero",
            ConnSpec::EuclidGauge { .. } => "euclid_gauge",
            ConnSpec::ConstantF { .. } => "constant_F",
            ConnSpec::G6Potential { .. } => "g6_potential",
            ConnSpec::RandomGauge { .. } => "random_gauge",
            ConnSpec::Tractor => "tractor",
        }
    }

    pub fn is_tractor(&self) -> bool {
        matches!(self, ConnSpec::Tractor)
    }

    /// Evaluates the connection at `p` with jets of order `order`. The tractor
    /// connection needs the metric at order `order + 2`.
    pub fn connection(&self, metric_spec: &MetricSpec, p: &[f64], order: usize) -> Result<GaugeConnection> {
        let n = metric_spec.dim();
        let x = Jet::seed_all(p, order);
        let shape = |r: usize| (vec![Slot::Down, Slot::EndUp, Slot::EndDown], vec![n, r, r]);
        match self {
            ConnSpec::Zero { rank } => Ok(GaugeConnection::zero(n, *rank, &x[0])),
            ConnSpec::EuclidGauge { lambda } => {
                if lambda.len() != n {
                    return Err(Error::InvalidParam(format!("lambda needs {n} components")));
                }
                let mut el = x[0].zero_like();
                for (xi, &l) in x.iter().zip(lambda) {
                    el += &xi.scale(l);
                }
                let (s, d) = shape(1);
                GaugeConnection::new(Tensor::from_fn(s, d, |i| &el * &x[i[0]]))
            }
            ConnSpec::ConstantF { seed } => {
                let f = constant_two_form(n, *seed);
                let (s, d) = shape(1);
                GaugeConnection::new(Tensor::from_fn(s, d, |i| {
                    let mut acc = x[0].zero_like();
                    for (a, xa) in x.iter().enumerate() {
                        acc += &xa.scale(0.5 * f[a][i[0]]);
                    }
                    acc
                }))
            }
            ConnSpec::G6Potential { f } => {
                f.validate()?;
                if n != 6 {
                    return Err(Error::InvalidParam("g6_potential lives on six-dimensional charts".into()));
                }
                let g = f.primitive(&(&x[0] + &x[1]));
                let (s, d) = shape(1);
                GaugeConnection::new(Tensor::from_fn(s, d, |i| if i[0] == 1 { g.clone() } else { g.zero_like() }))
            }
            ConnSpec::RandomGauge { seed, rank, amp } => {
                if *rank == 0 {
                    return Err(Error::InvalidParam("rank must be positive".into()));
                }
                let mut rng = ChaCha8Rng::seed_from_u64(*seed ^ 0x9e37_79b9_7f4a_7c15);
                let polys: Vec<(f64, RandomPoly)> = (0..n * rank * rank)
                    .map(|_| (rng.gen_range(-1.0..1.0), RandomPoly::new(&mut rng, n, 2)))
                    .collect();
                let monos = monomial_jets(&x, &polys[0].1.mons);
                let (s, d) = shape(*rank);
                let mut k = 0;
                GaugeConnection::new(Tensor::from_fn(s, d, |_| {
                    let (c, q) = &polys[k];
                    k += 1;
                    (&q.eval(&monos) + *c).scale(*amp)
                }))
            }
            ConnSpec::Tractor => {
                let m = metric_spec.metric(p, order + 2)?;
                tractor_connection(&m, &Curvature::new(&m)?)
            }
        }
    }
}

/// A seeded antisymmetric matrix with entries in `[-1, 1]`.
pub fn constant_two_form(n: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut f = vec![vec![0.0; n]; n];
    for a in 0..n {
        for b in a + 1..n {
            let v = rng.gen_range(-1.0..1.0);
            f[a][b] = v;
            f[b][a] = -v;
        }
    }
    f
}

/// `Ω = exp(p)` for a seeded polynomial `p` of degree ≤ 3 with coefficients of
/// magnitude at most `amp`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FactorSpec {
    pub seed: u64,
    #[serde(default = "default_factor_amp")]
    pub amp: f64,
}

fn default_factor_amp() -> f64 {
    0.1
}

impl FactorSpec {
    pub fn new(seed: u64) -> FactorSpec {
        FactorSpec { seed, amp: default_factor_amp() }
    }

    pub fn omega(&self, p: &[f64], order: usize) -> Jet {
        let n = p.len();
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed.wrapping_mul(0x2545_f491_4f6c_dd1d));
        let c0: f64 = rng.gen_range(-1.0..1.0);
        let poly = RandomPoly::new(&mut rng, n, 3);
        let x = Jet::seed_all(p, order);
        let monos = monomial_jets(&x, &poly.mons);
        (&poly.eval(&monos) + c0).scale(self.amp).exp()
    }
}

/// A seeded tensor field whose components are `amp·(c + quadratic polynomial)`.
pub fn random_tensor(slots: Vec<Slot>, dims: Vec<usize>, p: &[f64], order: usize, seed: u64, amp: f64) -> Tensor {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5851_f42d_4c95_7f2d);
    let x = Jet::seed_all(p, order);
    let mons = monomials(p.len(), 2);
    let monos = monomial_jets(&x, &mons);
    Tensor::from_fn(slots, dims, |_| {
        let c: f64 = rng.gen_range(-1.0..1.0);
        let q = RandomPoly::new(&mut rng, p.len(), 2);
        (&q.eval(&monos) + c).scale(amp)
    })
}

/// `count` points uniform in the box of side `side` centred at `anchor`.
pub fn sample_points(anchor: &[f64], seed: u64, count: usize, side: f64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| anchor.iter().map(|&c| c + side * (rng.gen::<f64>() - 0.5)).collect())
        .collect()
}

/// Catalog names for `list`.
pub const METRICS: [&str; 6] = ["flat", "sphere", "hyperbolic", "s3xs3", "g6_example", "random_metric"];
pub const CONNECTIONS: [&str; 6] = ["zero", "euclid_gauge", "constant_F", "g6_potential", "random_gauge", "tractor"];

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gauge::ym_current;

    #[test]
    fn sphere_at_origin_is_four_delta() {
        let g = MetricSpec::Sphere { n: 4 }.components(&[0.0; 4], 2).unwrap();
        assert_eq!(g.value(&[2, 2]), 4.0);
        assert_eq!(g.value(&[1, 2]), 0.0);
    }

    #[test]
    fn g6_off_diagonal_at_origin() {
        let g = MetricSpec::G6Example { f: G6Params::default() }.components(&[0.0; 6], 2).unwrap();
        assert!((2.0 * g.value(&[0, 1]) - 3f64.sqrt()).abs() < 1e-15);
        let bad = G6Params { offset: 3.0, amp: 1.0, scale: 4.0 };
        assert!(MetricSpec::G6Example { f: bad }.components(&[0.0; 6], 2).is_err());
    }

    #[test]
    fn hyperbolic_domain() {
        let h = MetricSpec::Hyperbolic { n: 3 };
        assert!(matches!(h.components(&[0.0, 0.0, -1.0], 2), Err(Error::ChartDomain(_))));
    }

    #[test]
    fn random_metric_is_positive_on_samples() {
        let spec = MetricSpec::RandomMetric { n: 6, seed: 7, amp: 0.05 };
        for p in sample_points(&spec.anchor(), 1, 5, 0.4) {
            spec.components(&p, 1).unwrap();
        }
        let a = spec.components(&[0.1; 6], 2).unwrap();
        let b = spec.components(&[0.1; 6], 2).unwrap();
        assert_eq!(a.values(), b.values());
    }

    #[test]
    fn euclid_gauge_current() {
        let spec = MetricSpec::Flat { n: 6 };
        let lambda = vec![1.0, 0.0, 0.0, 0.0, 0.0, 0.0];
        let p = [0.3, -0.2, 0.1, 0.4, 0.0, 0.2];
        let a = ConnSpec::EuclidGauge { lambda: lambda.clone() }.connection(&spec, &p, 3).unwrap();
        let j = ym_current(&spec.metric(&p, 3).unwrap(), &a).unwrap();
        for b in 0..6 {
            assert!((j.value(&[b, 0, 0]) + 5.0 * lambda[b]).abs() < 1e-13);
        }
    }

    #[test]
    fn g6_potential_curvature() {
        let spec = MetricSpec::G6Example { f: G6Params::default() };
        let p = [0.2, 0.1, 0.0, 0.0, 0.0, 0.0];
        let a = ConnSpec::G6Potential { f: G6Params::default() }.connection(&spec, &p, 2).unwrap();
        let f = a.curvature().unwrap();
        let want = (2.0 + 0.3f64.sin()) / 4.0;
        assert!((f.value(&[0, 1, 0, 0]) - want).abs() < 1e-15);
    }
}
