//! Named identity checks. Each returns the largest normalized residual over
//! its sampled configurations.

use crate::catalog::{random_tensor, sample_points, ConnSpec, FactorSpec, MetricSpec};
use crate::conformal::{ptrans_residuals, rescale, weight_check, Conjugation};
use crate::curvature::{Curvature, FullCurvature};
use crate::error::{Error, Result};
use crate::fields::{contract, nabla, residual, vanishing, Connections, Metric, Slot, Tensor};
use crate::gauge::{
    cym_current, cym_current_d6_with, energy_density_d6, laplacian_f_commutator, laplacian_f_identity, reduced_current_parallel,
    ym_current, GaugeConnection,
};
use crate::holography::{
    asymptotics_check, collar_extend, relative, scaled_bulk_ym_limit, tractor_current_prediction, BulkConnection,
};
use crate::jet::Jet;
use crate::tractor::{
    change_splitting, curvature_tractor, einstein_check, form_to_end, interior, kappa_closed_form, q_s,
    q_w, q_w_star, raise_tractor, scale_tractor, splitting_matrix, tractor_connection, tractor_contract,
    tractor_metric, tractor_metric_inverse, tractor_ym_closed_form, w_tractor, x_lower, x_upper, y_upper,
    z_projector, TractorCalculus, TOP,
};

/// Inputs shared by every check.
#[derive(Debug, Clone)]
pub struct CheckContext {
    pub seed: u64,
    /// Global jet order cap.
    pub order: usize,
    pub points: usize,
    pub side: f64,
    pub metric: Option<MetricSpec>,
    pub conn: Option<ConnSpec>,
}

impl CheckContext {
    pub fn new(seed: u64, order: usize) -> CheckContext {
        CheckContext { seed, order, points: 5, side: 0.4, metric: None, conn: None }
    }

    /// The order a computation needs, or an error when the cap is lower.
    fn need(&self, k: usize) -> Result<usize> {
        if k > self.order {
            Err(Error::OrderExhausted { needed: k, available: self.order })
        } else {
            Ok(k)
        }
    }

    fn metric_or(&self, default: MetricSpec) -> MetricSpec {
        self.metric.clone().unwrap_or(default)
    }

    fn conn_or(&self, default: ConnSpec) -> ConnSpec {
        self.conn.clone().unwrap_or(default)
    }

    fn sub_seed(&self, i: usize) -> u64 {
        self.seed.wrapping_mul(1000).wrapping_add(i as u64)
    }

    /// Sample points around the anchor of `spec`, inside its chart.
    fn points_for(&self, spec: &MetricSpec) -> Vec<Vec<f64>> {
        sample_points(&spec.anchor(), self.seed, self.points, self.side)
            .into_iter()
            .filter(|p| spec.in_domain(p))
            .collect()
    }

    /// Seeded configuration `i` of the tractor suite: a random metric in the
    /// given dimensions (alternating), unless a metric is fixed.
    fn suite(&self, i: usize, dims: &[usize]) -> (MetricSpec, Vec<f64>, u64) {
        let s = self.sub_seed(i);
        let spec = self.metric_or(MetricSpec::RandomMetric { n: dims[i % dims.len()], seed: s, amp: 0.2 });
        let p = sample_points(&spec.anchor(), s, 1, self.side).remove(0);
        (spec, p, s)
    }

    fn gauge(&self, spec: &MetricSpec, p: &[f64], seed: u64, rank: usize, order: usize) -> Result<GaugeConnection> {
        self.conn_or(ConnSpec::RandomGauge { seed, rank, amp: 0.5 }).connection(spec, p, order)
    }
}

/// A registered check.
#[derive(Clone, Copy)]
pub struct CheckDef {
    pub name: &'static str,
    pub paper_ref: &'static str,
    pub tolerance: f64,
    /// Acceptance criterion this check belongs to, if any.
    pub criterion: Option<u8>,
    pub run: fn(&CheckContext) -> Result<f64>,
}

impl std::fmt::Debug for CheckDef {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("CheckDef").field("name", &self.name).field("tolerance", &self.tolerance).finish()
    }
}

pub fn find(name: &str) -> Option<&'static CheckDef> {
    REGISTRY.iter().find(|c| c.name == name)
}

pub fn registry() -> &'static [CheckDef] {
    &REGISTRY
}

macro_rules! check {
    ($name:literal, $crit:expr, $tol:expr, $reference:literal, $f:path) => {
        CheckDef { name: $name, paper_ref: $reference, tolerance: $tol, criterion: $crit, run: $f }
    };
}

static REGISTRY: [CheckDef; 45] = [
    check!("euclid_current", Some(1), 1e-10, "flat Euclid example: j = -5 lambda", euclid_current),
    check!("euclid_cym_vanishes", Some(1), 1e-10, "flat Euclid example is conformal Yang-Mills", euclid_cym_vanishes),
    check!("g6_parallel_curvature", Some(2), 1e-10, "g6 example: F is parallel, hence Yang-Mills", g6_parallel_curvature),
    check!("g6_not_cym", Some(2), 0.0, "g6 example: k does not vanish", g6_not_cym),
    check!("g6_reduced_ratio", Some(2), 1e-6, "g6 example: k is a fixed multiple of F^ab(C_abc - g_ca dJ_b)", g6_reduced_ratio),
    check!("einstein_tractor_ym", Some(3), 1e-9, "tractor connection of an Einstein metric is Yang-Mills", einstein_tractor_ym),
    check!("einstein_tractor_cym", Some(3), 1e-8, "k vanishes for the tractor connection of an Einstein metric", einstein_tractor_cym),
    check!("k_conformal_invariance", Some(4), 1e-7, "k[Omega^2 g, A] = Omega^(2-n) k[g, A]", k_conformal_invariance),
    check!("energy_conformal_invariance", Some(4), 1e-7, "energy integrand has conformal weight -n", energy_conformal_invariance),
    check!("tractor_dxyz", Some(5), 1e-8, "derivatives of the tractor projectors X, Y, Z", tractor_dxyz),
    check!("tractor_metric_parallel", Some(5), 1e-8, "tractor metric is parallel", tractor_metric_parallel),
    check!("kappa_closed_form", Some(5), 1e-8, "tractor curvature from Weyl and Cotton", kappa_closed_form_check),
    check!("tractor_ym_closed_form", Some(5), 1e-8, "Yang-Mills current of the tractor connection from Cotton and Bach", tractor_ym_closed_form_check),
    check!("x_dot_d_hat", Some(5), 1e-8, "X.D-hat T = w T", x_dot_d_hat),
    check!("leibniz_failure", Some(5), 1e-8, "failure of the Leibniz rule for D-hat", leibniz_failure),
    check!("dd_commutator", Some(5), 1e-8, "commutator of Thomas-D operators and the W-tractor", dd_commutator),
    check!("iota", Some(5), 1e-8, "interior slashed-D of q_w vanishes", iota),
    check!("lastgasp", Some(5), 1e-8, "q_w* of iota_U q_s(mu) equals mu X.U", lastgasp),
    check!("tractor_bianchi", Some(5), 1e-8, "alternation of slashed-D-hat of the curvature tractor vanishes", tractor_bianchi),
    check!("laplacian_f_identity", Some(6), 1e-7, "Laplacian of F in terms of j, Schouten and Weyl", laplacian_f_identity_check),
    check!("k_conservation", Some(6), 1e-7, "divergence of k vanishes", k_conservation),
    check!("holographic_current", Some(7), 1e-7, "s^-2 scaled bulk current restricts to the boundary current", holographic_current),
    check!("obstruction_constant", Some(8), 1e-6, "collar obstruction is a constant multiple of Bach", obstruction_constant),
    check!("tractor_current_obstruction", Some(8), 1e-6, "tractor Yang-Mills current equals 12 q_s(c0 Bach)", tractor_current_obstruction),
    check!("collar_asymptotics", Some(8), 1e-6, "leading Cotton and Bach coefficients of the bulk metric", collar_asymptotics),
    check!("ptrans_schouten", Some(9), 1e-8, "Schouten transformation law", ptrans_schouten),
    check!("ptrans_cotton", Some(9), 1e-8, "Cotton transformation law", ptrans_cotton),
    check!("ptrans_bach", Some(9), 1e-8, "Bach transformation law as stated", ptrans_bach),
    check!("splitting_tractor_metric", Some(9), 1e-8, "tractor metric under change of splitting", splitting_tractor_metric),
    check!("splitting_tractor_curvature", Some(9), 1e-8, "tractor curvature under change of splitting", splitting_tractor_curvature),
    check!("splitting_curvature_tractor", Some(9), 1e-8, "curvature tractor under change of splitting", splitting_curvature_tractor),
    check!("splitting_scale_tractor", Some(9), 1e-8, "scale tractor under change of splitting", splitting_scale_tractor),
    check!("diag_bach_law_corrected", None, 1e-8, "Bach transformation law with Cotton coefficient 2", diag_bach_law_corrected),
    check!("diag_k_invariance_quarter", None, 1e-7, "k with coefficient 1/4 on [j, F] has conformal weight -4", diag_k_invariance_quarter),
    check!("diag_k_conservation_quarter", None, 1e-7, "k with coefficient 1/4 on [j, F] is divergence free", diag_k_conservation_quarter),
    check!("diag_laplacian_f_commutator", None, 1e-7, "Laplacian of F including the commutator term", diag_laplacian_f_commutator),
    check!("diag_tractor_bianchi_abelian", None, 1e-8, "tractor Bianchi identity for abelian connections", diag_tractor_bianchi_abelian),
    check!("diag_lastgasp_half", None, 1e-8, "q_w* of iota_U q_s(mu) equals half of mu X.U", diag_lastgasp_half),
    check!("diag_tractor_current_signed", None, 1e-6, "tractor Yang-Mills current equals -12 q_s(c0 Bach)", diag_tractor_current_signed),
    check!("diag_parallel_asymptotics", None, 1e-8, "scale tractor of the defining density is parallel to second order", diag_parallel_asymptotics),
    check!("diag_obstruction_structure", None, 1e-8, "collar obstruction is symmetric, trace-free and tangential", diag_obstruction_structure),
    check!("diag_tractor_restriction", None, 1e-9, "bulk tractor connection restricts to the boundary one", diag_tractor_restriction),
    check!("diag_collar_laws", None, 1e-8, "rescaling laws against a direct bulk computation", diag_collar_laws),
    check!("diag_hyperbolic_collar", None, 1e-10, "flat boundary gives hyperbolic space", diag_hyperbolic_collar),
    check!("diag_sphere_scale_tractor", None, 1e-10, "round sphere has a parallel scale tractor", diag_sphere_scale_tractor),
];

fn max_of(values: impl IntoIterator<Item = Result<f64>>) -> Result<f64> {
    let mut m = 0.0f64;
    let mut any = false;
    for v in values {
        m = m.max(v?);
        any = true;
    }
    if !any {
        return Err(Error::InvalidParam("no sample point inside the chart domain".into()));
    }
    Ok(m)
}

/// `max(0, 1 − m/(1e-4·scale))`: zero exactly when `m` clears the threshold.
fn nonvanishing(m: f64, scale: f64) -> f64 {
    (1.0 - m / (1e-4 * scale.max(f64::MIN_POSITIVE))).max(0.0)
}

fn require_dim(spec: &MetricSpec, dims: &[usize]) -> Result<()> {
    if dims.contains(&spec.dim()) {
        Ok(())
    } else {
        Err(Error::Unsupported(format!("check needs dimension in {dims:?}, metric has {}", spec.dim())))
    }
}

// ---- Euclid and g6 examples --------------------------------------------------

fn euclid_conn(ctx: &CheckContext, n: usize) -> Result<(ConnSpec, Vec<f64>)> {
    let mut lambda = vec![0.0; n];
    lambda[0] = 1.0;
    match ctx.conn_or(ConnSpec::EuclidGauge { lambda }) {
        ConnSpec::EuclidGauge { lambda } => Ok((ConnSpec::EuclidGauge { lambda: lambda.clone() }, lambda)),
        other => Err(Error::InvalidParam(format!("check needs euclid_gauge, got {}", other.name()))),
    }
}

fn euclid_current(ctx: &CheckContext) -> Result<f64> {
    let spec = ctx.metric_or(MetricSpec::Flat { n: 6 });
    let (conn, lambda) = euclid_conn(ctx, spec.dim())?;
    let k = ctx.need(3)?;
    max_of(ctx.points_for(&spec).iter().map(|p| {
        let m = spec.metric(p, k)?;
        let j = ym_current(&m, &conn.connection(&spec, p, k)?)?;
        let want = Tensor::from_fn(j.slots().to_vec(), j.dims().to_vec(), |i| j.get(i).constant_like(-5.0 * lambda[i[0]]));
        Ok(j.sub(&want)?.max_abs_coeffs())
    }))
}

fn euclid_cym_vanishes(ctx: &CheckContext) -> Result<f64> {
    let spec = ctx.metric_or(MetricSpec::Flat { n: 6 });
    let (conn, _) = euclid_conn(ctx, spec.dim())?;
    let k = ctx.need(4)?;
    max_of(ctx.points_for(&spec).iter().map(|p| {
        let m = spec.metric(p, k)?;
        let curv = Curvature::new(&m)?;
        Ok(cym_current(&m, &curv, &conn.connection(&spec, p, k)?)?.max_abs_coeffs())
    }))
}

fn g6_setup(ctx: &CheckContext) -> (MetricSpec, ConnSpec) {
    (
        ctx.metric_or(MetricSpec::G6Example { f: Default::default() }),
        ctx.conn_or(ConnSpec::G6Potential { f: Default::default() }),
    )
}

fn g6_parallel_curvature(ctx: &CheckContext) -> Result<f64> {
    let (spec, conn) = g6_setup(ctx);
    let k = ctx.need(3)?;
    max_of(ctx.points_for(&spec).iter().map(|p| {
        let m = spec.metric(p, k)?;
        let a = conn.connection(&spec, p, k)?;
        let df = nabla(&a.curvature()?, &Connections::with_gauge(&m, &a))?;
        Ok(df.max_abs_coeffs())
    }))
}

fn g6_k_and_reduced(spec: &MetricSpec, conn: &ConnSpec, p: &[f64], k: usize) -> Result<(Tensor, Tensor, f64)> {
    let m = spec.metric(p, k)?;
    let full = FullCurvature::new(&m)?;
    let a = conn.connection(spec, p, k)?;
    let f = a.curvature()?;
    let kk = cym_current(&m, &full.curv, &a)?;
    let red = reduced_current_parallel(&m, &full.curv, &full.cotton, &f)?;
    Ok((kk, red, f.max_abs()))
}

fn g6_not_cym(ctx: &CheckContext) -> Result<f64> {
    let (spec, conn) = g6_setup(ctx);
    let k = ctx.need(4)?;
    let mut kmax = 0.0f64;
    let mut scale = 0.0f64;
    for p in ctx.points_for(&spec) {
        let (kk, _, fmax) = g6_k_and_reduced(&spec, &conn, &p, k)?;
        kmax = kmax.max(kk.max_abs());
        scale = scale.max(fmax);
    }
    Ok(nonvanishing(kmax, scale))
}

fn g6_reduced_ratio(ctx: &CheckContext) -> Result<f64> {
    let (spec, conn) = g6_setup(ctx);
    let k = ctx.need(4)?;
    let mut ratios = Vec::new();
    let mut fit = 0.0f64;
    for p in ctx.points_for(&spec) {
        let (kk, red, _) = g6_k_and_reduced(&spec, &conn, &p, k)?;
        let (kv, rv) = (kk.values(), red.values());
        let den: f64 = rv.iter().map(|r| r * r).sum();
        if den == 0.0 {
            return Err(Error::Singular(0.0));
        }
        let c = kv.iter().zip(&rv).map(|(a, b)| a * b).sum::<f64>() / den;
        let kmax = kv.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let dev = kv.iter().zip(&rv).fold(0.0f64, |m, (a, b)| m.max((a - c * b).abs()));
        fit = fit.max(dev / kmax);
        ratios.push(c);
    }
    let mean = ratios.iter().sum::<f64>() / ratios.len() as f64;
    let spread = ratios.iter().fold(0.0f64, |m, r| m.max((r - mean).abs())) / mean.abs();
    Ok(spread.max(fit))
}

// ---- Einstein instances and conformal invariance ------------------------------

fn einstein_tractor_ym(ctx: &CheckContext) -> Result<f64> {
    let spec = ctx.metric_or(MetricSpec::Sphere { n: 6 });
    let k = ctx.need(4)?;
    max_of(ctx.points_for(&spec).iter().map(|p| {
        let m = spec.metric(p, k)?;
        let omega = ConnSpec::Tractor.connection(&spec, p, k - 2)?;
        let j = ym_current(&m, &omega)?;
        Ok(vanishing(&j, omega.curvature()?.max_abs()))
    }))
}

fn einstein_tractor_cym(ctx: &CheckContext) -> Result<f64> {
    let spec = ctx.metric_or(MetricSpec::Sphere { n: 6 });
    require_dim(&spec, &[4, 6])?;
    let k = ctx.need(6)?;
    max_of(ctx.points_for(&spec).iter().map(|p| {
        let m = spec.metric(p, k)?;
        let curv = Curvature::new(&m)?;
        let omega = tractor_connection(&m, &curv)?;
        let kk = cym_current(&m, &curv, &omega)?;
        Ok(vanishing(&kk, omega.curvature()?.max_abs()))
    }))
}

fn invariance_config(ctx: &CheckContext, i: usize, k: usize) -> Result<(Metric, GaugeConnection, Jet)> {
    let (spec, p, s) = ctx.suite(i, &[6]);
    require_dim(&spec, &[6])?;
    let m = spec.metric(&p, k)?;
    let a = ctx.gauge(&spec, &p, s, 2, k)?;
    let om = FactorSpec::new(s).omega(&p, k);
    Ok((m, a, om))
}

fn k_invariance(ctx: &CheckContext, comm: f64) -> Result<f64> {
    let k = ctx.need(4)?;
    max_of((0..ctx.points).map(|i| {
        let (m, a, om) = invariance_config(ctx, i, k)?;
        weight_check(&m, &om, -4.0, Conjugation::None, |g| cym_current_d6_with(g, &Curvature::new(g)?, &a, comm))
    }))
}

fn k_conformal_invariance(ctx: &CheckContext) -> Result<f64> {
    k_invariance(ctx, 0.5)
}

fn diag_k_invariance_quarter(ctx: &CheckContext) -> Result<f64> {
    k_invariance(ctx, 0.25)
}

fn energy_conformal_invariance(ctx: &CheckContext) -> Result<f64> {
    let k = ctx.need(4)?;
    max_of((0..ctx.points).map(|i| {
        let (m, a, om) = invariance_config(ctx, i, k)?;
        weight_check(&m, &om, -6.0, Conjugation::None, |g| {
            Ok(Tensor::scalar(energy_density_d6(g, &Curvature::new(g)?, &a)?))
        })
    }))
}

// ---- Tractor identity suite ----------------------------------------------------

const SUITE_DIMS: [usize; 2] = [5, 7];

fn suite_max(ctx: &CheckContext, dims: &[usize], f: impl Fn(&MetricSpec, &[f64], u64) -> Result<f64>) -> Result<f64> {
    max_of((0..ctx.points).map(|i| {
        let (spec, p, s) = ctx.suite(i, dims);
        f(&spec, &p, s)
    }))
}

fn tractor_dxyz(ctx: &CheckContext) -> Result<f64> {
    let k = ctx.need(3)?;
    suite_max(ctx, &SUITE_DIMS, |spec, p, _| {
        let m = spec.metric(p, k)?;
        let n = m.n;
        let curv = Curvature::new(&m)?;
        let calc = TractorCalculus::new(&m, &curv, None)?;
        let c = calc.conns();
        let z_up = z_projector(&m, true); // [A, b]
        let dx = nabla(&x_upper(&m), &c)?;
        let r_x = residual(&dx, &z_up.permute(&[1, 0])?)?;
        let dz = nabla(&z_up, &c)?; // [a, A, b]
        let o = dz.order();
        let p_ab = curv.schouten.truncate(o);
        let g = m.g.truncate(o);
        let like = p_ab.data()[0].zero_like();
        let want_z = Tensor::from_fn(dz.slots().to_vec(), dz.dims().to_vec(), |i| match i[1] {
            TOP => -p_ab.get(&[i[0], i[2]]),
            x if x == n + 1 => -g.get(&[i[0], i[2]]),
            _ => like.clone(),
        });
        let r_z = residual(&dz, &want_z)?;
        let dy = nabla(&y_upper(&m), &c)?; // [a, A]
        let p_mixed = curv.schouten.raise(1, &m)?.truncate(dy.order());
        let like = like.truncate(dy.order());
        let want_y = Tensor::from_fn(dy.slots().to_vec(), dy.dims().to_vec(), |i| {
            if (1..=n).contains(&i[1]) {
                p_mixed.get(&[i[0], i[1] - 1]).clone()
            } else {
                like.clone()
            }
        });
        let r_y = residual(&dy, &want_y)?;
        Ok(r_x.max(r_z).max(r_y))
    })
}

fn tractor_metric_parallel(ctx: &CheckContext) -> Result<f64> {
    let k = ctx.need(3)?;
    suite_max(ctx, &SUITE_DIMS, |spec, p, _| {
        let m = spec.metric(p, k)?;
        let curv = Curvature::new(&m)?;
        let calc = TractorCalculus::new(&m, &curv, None)?;
        let h = tractor_metric(&m);
        let hi = tractor_metric_inverse(&m);
        let a = vanishing(&nabla(&h, &calc.conns())?, h.max_abs());
        let b = vanishing(&nabla(&hi, &calc.conns())?, hi.max_abs());
        Ok(a.max(b))
    })
}

fn kappa_closed_form_check(ctx: &CheckContext) -> Result<f64> {
    let k = ctx.need(4)?;
    suite_max(ctx, &SUITE_DIMS, |spec, p, _| {
        let m = spec.metric(p, k)?;
        let full = FullCurvature::new(&m)?;
        let kappa = tractor_connection(&m, &full.curv)?.curvature()?;
        let closed = form_to_end(&kappa_closed_form(&m, &full.weyl, &full.cotton), &m)?;
        residual(&kappa, &closed)
    })
}

fn tractor_ym_closed_form_check(ctx: &CheckContext) -> Result<f64> {
    let k = ctx.need(4)?;
    suite_max(ctx, &SUITE_DIMS, |spec, p, _| {
        let m = spec.metric(p, k)?;
        let full = FullCurvature::new(&m)?;
        let j = ym_current(&m, &tractor_connection(&m, &full.curv)?)?;
        let closed = form_to_end(&tractor_ym_closed_form(&m, &full.cotton, &full.bach), &m)?;
        residual(&j, &closed)
    })
}

/// A seeded section of `T* ⊗ V` for a rank-2 bundle.
fn tractor_section(n: usize, p: &[f64], order: usize, seed: u64) -> Tensor {
    random_tensor(vec![Slot::TractorDown, Slot::EndUp], vec![n + 2, 2], p, order, seed, 0.5)
}

fn x_dot_d_hat(ctx: &CheckContext) -> Result<f64> {
    let k = ctx.need(3)?;
    suite_max(ctx, &SUITE_DIMS, |spec, p, s| {
        let m = spec.metric(p, k)?;
        let curv = Curvature::new(&m)?;
        let a = ctx.gauge(spec, p, s, 2, k - 1)?;
        let calc = TractorCalculus::new(&m, &curv, Some(&a))?;
        let t = tractor_section(m.n, p, k - 1, s);
        max_of([-2.0, 1.0, 3.0].into_iter().map(|w| {
            let d = calc.thomas_d_hat(&t.clone().with_weight(w), w)?;
            let xd = contract(&x_upper(&m), 0, &d, 0)?;
            residual(&xd, &t.scale(w))
        }))
    })
}

fn leibniz_failure(ctx: &CheckContext) -> Result<f64> {
    let k = ctx.need(3)?;
    suite_max(ctx, &SUITE_DIMS, |spec, p, s| {
        let m = spec.metric(p, k)?;
        let n = m.n as f64;
        let curv = Curvature::new(&m)?;
        let a = ctx.gauge(spec, p, s, 2, k - 1)?;
        let calc = TractorCalculus::new(&m, &curv, Some(&a))?;
        let (w1, w2) = (0.5, -1.0);
        let u1 = random_tensor(vec![], vec![], p, k - 1, s + 1, 0.5).with_weight(w1);
        let u2 = tractor_section(m.n, p, k - 1, s + 2).with_weight(w2);
        let lhs = calc.thomas_d_hat(&u1.outer(&u2), w1 + w2)?;
        let d1 = calc.thomas_d_hat(&u1, w1)?;
        let d2 = calc.thomas_d_hat(&u2, w2)?;
        let o = lhs.order();
        let lhs = lhs.sub(&d1.outer(&u2).truncate(o))?.sub(&u1.outer(&d2).truncate(o))?;
        let dot = tractor_contract(&d1, 0, &d2, 0, &m)?;
        let rhs = x_lower(&m).outer(&dot).scale(-2.0 / (n + 2.0 * (w1 + w2) - 2.0));
        residual(&lhs, &rhs)
    })
}

fn dd_commutator(ctx: &CheckContext) -> Result<f64> {
    let k = ctx.need(5)?;
    suite_max(ctx, &[5, 6, 7], |spec, p, s| {
        let m = spec.metric(p, k)?;
        let full = FullCurvature::new(&m)?;
        let calc = TractorCalculus::new(&m, &full.curv, None)?;
        let wt = w_tractor(&m, &full)?;
        let t = random_tensor(vec![Slot::TractorDown], vec![m.n + 2], p, k - 1, s, 0.5);
        max_of([0.5, -1.0].into_iter().map(|w| {
            let (lhs, rhs) = calc.dd_commutator_sides(&t.clone().with_weight(w), w, &wt)?;
            residual(&lhs, &rhs)
        }))
    })
}

/// `ι_D̸ q_w(t)` for a seeded `ℓ`-form valued in a bundle of the given rank.
fn iota_residual(spec: &MetricSpec, p: &[f64], s: u64, k: usize, rank: usize, ell: usize, w: f64) -> Result<f64> {
    let m = spec.metric(p, k)?;
    let n = m.n;
    let full = FullCurvature::new(&m)?;
    let a = ConnSpec::RandomGauge { seed: s, rank, amp: 0.5 }.connection(spec, p, k - 1)?;
    let calc = TractorCalculus::new(&m, &full.curv, Some(&a))?;
    let wt = w_tractor(&m, &full)?;
    let mut slots = vec![Slot::Down; ell];
    slots.extend([Slot::EndUp, Slot::EndDown]);
    let mut dims = vec![n; ell];
    dims.extend([rank, rank]);
    let group: Vec<usize> = (0..ell).collect();
    let t = random_tensor(slots, dims, p, k - 1, s + 3, 0.5).antisymmetrize(&group)?.with_weight(w);
    let q = q_w(&t, ell, w, &calc.conns())?;
    let d = calc.slashed_d(&q, w - ell as f64, &wt)?;
    let idd = raise_tractor(&d, 0, &m)?.trace(0, 1)?;
    Ok(vanishing(&idd, d.max_abs()))
}

fn iota(ctx: &CheckContext) -> Result<f64> {
    let k = ctx.need(5)?;
    suite_max(ctx, &SUITE_DIMS, |spec, p, s| {
        max_of([(1, 0.5), (2, 0.0), (2, 1.5)].into_iter().map(|(ell, w)| iota_residual(spec, p, s, k, 1, ell, w)))
    })
}

fn lastgasp_sides(spec: &MetricSpec, p: &[f64], s: u64, k: usize) -> Result<(Tensor, Tensor)> {
    let m = spec.metric(p, k)?;
    let n = m.n;
    let lc = Connections::levi_civita(&m);
    let mu = random_tensor(vec![Slot::Down], vec![n], p, k, s, 0.5);
    let u = random_tensor(vec![Slot::TractorUp], vec![n + 2], p, k, s + 1, 0.5);
    let t = interior(&u, &q_s(&mu, 1, n)?)?;
    let lhs = q_w_star(&t, 1, 0.0, &lc)?;
    let xu = contract(&x_lower(&m), 0, &u, 0)?;
    Ok((lhs, mu.outer(&xu)))
}

fn lastgasp(ctx: &CheckContext) -> Result<f64> {
    let k = ctx.need(2)?;
    suite_max(ctx, &SUITE_DIMS, |spec, p, s| {
        let (lhs, rhs) = lastgasp_sides(spec, p, s, k)?;
        residual(&lhs, &rhs)
    })
}

fn diag_lastgasp_half(ctx: &CheckContext) -> Result<f64> {
    let k = ctx.need(2)?;
    suite_max(ctx, &SUITE_DIMS, |spec, p, s| {
        let (lhs, rhs) = lastgasp_sides(spec, p, s, k)?;
        residual(&lhs, &rhs.scale(0.5))
    })
}

fn bianchi_residual(ctx: &CheckContext, rank: usize) -> Result<f64> {
    let k = ctx.need(5)?;
    suite_max(ctx, &SUITE_DIMS, |spec, p, s| {
        require_dim(spec, &SUITE_DIMS)?;
        let m = spec.metric(p, k)?;
        let full = FullCurvature::new(&m)?;
        let a = ctx.gauge(spec, p, s, rank, k - 1)?;
        let calc = TractorCalculus::new(&m, &full.curv, Some(&a))?;
        let wt = w_tractor(&m, &full)?;
        let f = curvature_tractor(&m, &a)?;
        let d = calc.slashed_d_hat(&f, -2.0, &wt)?;
        Ok(vanishing(&d.antisymmetrize(&[0, 1, 2])?, d.max_abs()))
    })
}

fn tractor_bianchi(ctx: &CheckContext) -> Result<f64> {
    bianchi_residual(ctx, 2)
}

fn diag_tractor_bianchi_abelian(ctx: &CheckContext) -> Result<f64> {
    bianchi_residual(ctx, 1)
}

// ---- ΔF identity and conservation ------------------------------------------------

fn laplacian_sides(ctx: &CheckContext) -> Result<Vec<(Tensor, Tensor, Tensor)>> {
    let k = ctx.need(4)?;
    (0..ctx.points)
        .map(|i| {
            let (spec, p, s) = ctx.suite(i, &[5, 6]);
            let m = spec.metric(&p, k)?;
            let curv = Curvature::new(&m)?;
            let w = curv.weyl(&m)?;
            let a = ctx.gauge(&spec, &p, s, 2, k)?;
            let (l, r) = laplacian_f_identity(&m, &curv, &w, &a)?;
            let extra = laplacian_f_commutator(&m, &a.curvature()?)?;
            Ok((l, r, extra))
        })
        .collect()
}

fn laplacian_f_identity_check(ctx: &CheckContext) -> Result<f64> {
    max_of(laplacian_sides(ctx)?.into_iter().map(|(l, r, _)| residual(&l, &r)))
}

fn diag_laplacian_f_commutator(ctx: &CheckContext) -> Result<f64> {
    max_of(laplacian_sides(ctx)?.into_iter().map(|(l, r, extra)| residual(&l, &r.add(&extra.truncate(r.order()))?)))
}

fn k_conservation(ctx: &CheckContext) -> Result<f64> {
    k_divergence(ctx, 0.5)
}

fn diag_k_conservation_quarter(ctx: &CheckContext) -> Result<f64> {
    k_divergence(ctx, 0.25)
}

fn k_divergence(ctx: &CheckContext, comm: f64) -> Result<f64> {
    let k = ctx.need(5)?;
    max_of((0..ctx.points).map(|i| {
        let (spec, p, s) = ctx.suite(i, &[6]);
        require_dim(&spec, &[6])?;
        let m = spec.metric(&p, k)?;
        let curv = Curvature::new(&m)?;
        let a = ctx.gauge(&spec, &p, s, 2, k)?;
        let kk = cym_current_d6_with(&m, &curv, &a, comm)?;
        let div = nabla(&kk, &Connections::with_gauge(&m, &a))?.metric_trace(0, 1, &m)?;
        Ok(vanishing(&div, kk.max_abs()))
    }))
}

// ---- Holography ----------------------------------------------------------------

/// Boundary metric `i` and a boundary point for the collar checks.
fn boundary_configs(ctx: &CheckContext) -> Vec<(MetricSpec, Vec<f64>, u64)> {
    let mut out = Vec::new();
    for i in 0..3 {
        let s = ctx.sub_seed(i);
        let spec = ctx.metric_or(MetricSpec::RandomMetric { n: 4, seed: s, amp: 0.2 });
        for p in sample_points(&spec.anchor(), s, ctx.points, ctx.side) {
            out.push((spec.clone(), p, s));
        }
    }
    out
}

fn holographic_current(ctx: &CheckContext) -> Result<f64> {
    let k = ctx.need(4)?;
    max_of(boundary_configs(ctx).into_iter().map(|(spec, p, s)| {
        let cs = collar_extend(&spec, &p, 0.0, k)?;
        let a = ctx.gauge(&spec, &p, s, 1, k)?;
        let lim = scaled_bulk_ym_limit(&cs, BulkConnection::External(&a))?;
        Ok(residual(&lim.limit, &ym_current(&cs.boundary, &a)?)?.max(lim.lower_order))
    }))
}

fn obstruction_constant(ctx: &CheckContext) -> Result<f64> {
    let k = ctx.need(4)?;
    let mut c0s = Vec::new();
    let mut fit = 0.0f64;
    for (spec, p, _) in boundary_configs(ctx) {
        let ob = collar_extend(&spec, &p, 0.0, k)?.obstruction()?;
        fit = fit.max(ob.fit);
        c0s.push(ob.c0);
    }
    let mean = c0s.iter().sum::<f64>() / c0s.len() as f64;
    let spread = c0s.iter().fold(0.0f64, |m, c| m.max((c - mean).abs())) / mean.abs();
    Ok(spread.max(fit))
}

fn tractor_current_vs(ctx: &CheckContext, sign: f64) -> Result<f64> {
    let k = ctx.need(4)?;
    max_of(boundary_configs(ctx).into_iter().map(|(spec, p, _)| {
        let cs = collar_extend(&spec, &p, 0.0, k)?;
        let c0 = cs.obstruction()?.c0;
        let omega = tractor_connection(&cs.boundary, &cs.boundary_curv.curv)?;
        let j = cym_current(&cs.boundary, &cs.boundary_curv.curv, &omega)?;
        relative(&j, &tractor_current_prediction(&cs, c0)?.scale(sign))
    }))
}

fn tractor_current_obstruction(ctx: &CheckContext) -> Result<f64> {
    tractor_current_vs(ctx, 1.0)
}

fn diag_tractor_current_signed(ctx: &CheckContext) -> Result<f64> {
    tractor_current_vs(ctx, -1.0)
}

fn collar_asymptotics(ctx: &CheckContext) -> Result<f64> {
    let k = ctx.need(4)?;
    max_of(boundary_configs(ctx).into_iter().map(|(spec, p, _)| {
        let cs = collar_extend(&spec, &p, 0.0, k)?;
        let c0 = cs.obstruction()?.c0;
        let r = asymptotics_check(&cs, c0)?;
        Ok(r.cotton.max(r.cotton_normal).max(r.bach).max(r.dropped))
    }))
}

fn diag_parallel_asymptotics(ctx: &CheckContext) -> Result<f64> {
    let k = ctx.need(5)?;
    max_of(boundary_configs(ctx).into_iter().map(|(spec, p, _)| collar_extend(&spec, &p, 0.0, k)?.parallel_defect()))
}

fn diag_obstruction_structure(ctx: &CheckContext) -> Result<f64> {
    let k = ctx.need(4)?;
    max_of(boundary_configs(ctx).into_iter().map(|(spec, p, _)| {
        let ob = collar_extend(&spec, &p, 0.0, k)?.obstruction()?;
        let scale = ob.tensor.max_abs();
        Ok(ob.dropped.max(ob.asymmetry).max(ob.trace).max(ob.normal) / (1.0 + scale))
    }))
}

fn diag_tractor_restriction(ctx: &CheckContext) -> Result<f64> {
    let k = ctx.need(4)?;
    max_of(
        boundary_configs(ctx)
            .into_iter()
            .map(|(spec, p, _)| collar_extend(&spec, &p, 0.0, k)?.tractor_restriction_residual()),
    )
}

fn diag_collar_laws(ctx: &CheckContext) -> Result<f64> {
    let k = ctx.need(5)?;
    max_of(boundary_configs(ctx).into_iter().map(|(spec, p, s)| {
        let cs = collar_extend(&spec, &p, 0.3, k)?;
        let gp = cs.bulk_plus()?;
        let direct = FullCurvature::new(&gp)?;
        let full = FullCurvature::new(&cs.bulk)?;
        let r_p = residual(&cs.schouten_plus_law(&full.curv)?, &direct.curv.schouten)?;
        let sc = direct.cotton.mul_jet(&cs.sigma.truncate(direct.cotton.order()));
        let r_c = residual(&cs.scaled_cotton_plus(&full)?, &sc)?;
        let r_b = residual(&cs.bach_plus(&full)?, &direct.bach)?;
        let a = cs.extend_connection(&ctx.gauge(&spec, &p, s, 2, k - 1)?)?;
        let r_j = residual(&cs.ym_current_plus(&a)?, &ym_current(&gp, &a)?)?;
        Ok(r_p.max(r_c).max(r_b).max(r_j))
    }))
}

fn diag_hyperbolic_collar(ctx: &CheckContext) -> Result<f64> {
    let k = ctx.need(3)?;
    let spec = MetricSpec::Flat { n: 4 };
    max_of(ctx.points_for(&spec).iter().map(|p| {
        let cs = collar_extend(&spec, p, 0.5, k)?;
        let gp = cs.bulk_plus()?;
        let c = Curvature::new(&gp)?;
        residual(&c.schouten, &gp.g.scale(-0.5))
    }))
}

fn diag_sphere_scale_tractor(ctx: &CheckContext) -> Result<f64> {
    let spec = ctx.metric_or(MetricSpec::Sphere { n: 6 });
    let k = ctx.need(3)?;
    max_of(ctx.points_for(&spec).iter().map(|p| {
        let m = spec.metric(p, k)?;
        let curv = Curvature::new(&m)?;
        let calc = TractorCalculus::new(&m, &curv, None)?;
        let (di, ae) = einstein_check(&calc, &m.g.data()[0].constant_like(1.0))?;
        Ok(di.max(ae))
    }))
}

// ---- Transformation laws ------------------------------------------------------------

fn ptrans(ctx: &CheckContext, which: usize, bach_c: f64) -> Result<f64> {
    let k = ctx.need(5)?;
    suite_max(ctx, &[5, 6], |spec, p, s| {
        let m = spec.metric(p, k)?;
        let om = FactorSpec::new(s).omega(p, k);
        Ok(ptrans_residuals(&m, &om, bach_c)?[which])
    })
}

fn ptrans_schouten(ctx: &CheckContext) -> Result<f64> {
    ptrans(ctx, 0, 1.0)
}

fn ptrans_cotton(ctx: &CheckContext) -> Result<f64> {
    ptrans(ctx, 1, 1.0)
}

fn ptrans_bach(ctx: &CheckContext) -> Result<f64> {
    ptrans(ctx, 2, 1.0)
}

fn diag_bach_law_corrected(ctx: &CheckContext) -> Result<f64> {
    ptrans(ctx, 2, 2.0)
}

fn splitting_tractor_metric(ctx: &CheckContext) -> Result<f64> {
    let k = ctx.need(3)?;
    suite_max(ctx, &SUITE_DIMS, |spec, p, s| {
        let m = spec.metric(p, k)?;
        let om = FactorSpec::new(s).omega(p, k);
        weight_check(&m, &om, 0.0, Conjugation::Splitting, |g| Ok(tractor_metric(g)))
    })
}

fn splitting_tractor_curvature(ctx: &CheckContext) -> Result<f64> {
    let k = ctx.need(5)?;
    suite_max(ctx, &SUITE_DIMS, |spec, p, s| {
        let m = spec.metric(p, k)?;
        let om = FactorSpec::new(s).omega(p, k);
        weight_check(&m, &om, 0.0, Conjugation::AdjointSplitting, |g| {
            tractor_connection(g, &Curvature::new(g)?)?.curvature()
        })
    })
}

fn splitting_curvature_tractor(ctx: &CheckContext) -> Result<f64> {
    let k = ctx.need(5)?;
    suite_max(ctx, &SUITE_DIMS, |spec, p, s| {
        let m = spec.metric(p, k)?;
        let om = FactorSpec::new(s).omega(p, k);
        let a = ctx.gauge(spec, p, s, 2, k - 1)?;
        weight_check(&m, &om, -2.0, Conjugation::Splitting, |g| curvature_tractor(g, &a))
    })
}

fn splitting_scale_tractor(ctx: &CheckContext) -> Result<f64> {
    let k = ctx.need(4)?;
    suite_max(ctx, &SUITE_DIMS, |spec, p, s| {
        let m = spec.metric(p, k)?;
        let om = FactorSpec::new(s).omega(p, k);
        let tau = FactorSpec::new(s + 7).omega(p, k);
        let curv = Curvature::new(&m)?;
        let i = scale_tractor(&TractorCalculus::new(&m, &curv, None)?, &tau)?;
        let (hat, _) = rescale(&m, &om)?;
        let curv_hat = Curvature::new(&hat)?;
        let i_hat = scale_tractor(&TractorCalculus::new(&hat, &curv_hat, None)?, &(&tau * &om))?;
        let o = i.order().min(i_hat.order());
        let sm = splitting_matrix(&m, &om)?;
        let sm: Vec<Vec<Jet>> = sm.iter().map(|r| r.iter().map(|j| j.truncate(o)).collect()).collect();
        let expected = change_splitting(&i.truncate(o), &sm, &om.truncate(o), false)?;
        residual(&expected, &i_hat.truncate(o))
    })
}
