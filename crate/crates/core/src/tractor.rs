//! Tractor calculus in the splitting determined by a metric representative.
//!
//! A cotractor `V_A = σ Y_A + μ_a Z_A^a + ρ X_A` is stored as the column
//! `(σ, μ_0, …, μ_{n−1}, ρ)`: index 0 is the top slot, `1 + a` the middle
//! slots and `n + 1` the bottom slot. Upper tractor indices use the dual
//! basis, so `X^A` is `(1, 0, …, 0)` and `X^A V_A = σ`.
//!
//! Lower tractor slots are `Slot::TractorDown`. Tractor endomorphisms (for
//! instance the curvature of the tractor connection, or currents of the tractor
//! connection computed by the gauge module) act on cotractor columns and use
//! `EndUp`/`EndDown` slots of size `n + 2`.

use crate::curvature::{Curvature, FullCurvature};
use crate::error::{Error, Result};
use crate::fields::{contract, invert_matrix, nabla, Connections, Metric, Slot, Tensor};
use crate::gauge::GaugeConnection;
use crate::jet::Jet;

pub const TOP: usize = 0;

pub fn mid(a: usize) -> usize {
    1 + a
}

pub fn bottom(n: usize) -> usize {
    n + 1
}

fn const_like(like: &Jet, c: f64) -> Jet {
    like.constant_like(c)
}

/// `h^{AB}` in the splitting: `[[0,0,1],[0,g⁻¹,0],[1,0,0]]`.
pub fn gram(metric: &Metric) -> Vec<Vec<Jet>> {
    let n = metric.n;
    let like = metric.ginv.data()[0].zero_like();
    let mut m = vec![vec![like.clone(); n + 2]; n + 2];
    m[TOP][bottom(n)] = const_like(&like, 1.0);
    m[bottom(n)][TOP] = const_like(&like, 1.0);
    for a in 0..n {
        for b in 0..n {
            m[mid(a)][mid(b)] = metric.ginv.get(&[a, b]).clone();
        }
    }
    m
}

/// `h_{AB}` in the splitting: `[[0,0,1],[0,g,0],[1,0,0]]`.
pub fn gram_inverse(metric: &Metric) -> Vec<Vec<Jet>> {
    let n = metric.n;
    let like = metric.g.data()[0].zero_like();
    let mut m = vec![vec![like.clone(); n + 2]; n + 2];
    m[TOP][bottom(n)] = const_like(&like, 1.0);
    m[bottom(n)][TOP] = const_like(&like, 1.0);
    for a in 0..n {
        for b in 0..n {
            m[mid(a)][mid(b)] = metric.g.get(&[a, b]).clone();
        }
    }
    m
}

fn matrix_tensor(m: &[Vec<Jet>], slots: [Slot; 2]) -> Tensor {
    let d = m.len();
    Tensor::from_fn(slots.to_vec(), vec![d, d], |i| m[i[0]][i[1]].clone())
}

fn transpose(m: &[Vec<Jet>]) -> Vec<Vec<Jet>> {
    (0..m[0].len()).map(|j| m.iter().map(|row| row[j].clone()).collect()).collect()
}

/// The tractor metric `h_AB`.
pub fn tractor_metric(metric: &Metric) -> Tensor {
    matrix_tensor(&gram_inverse(metric), [Slot::TractorDown, Slot::TractorDown])
}

/// The inverse tractor metric `h^AB`.
pub fn tractor_metric_inverse(metric: &Metric) -> Tensor {
    matrix_tensor(&gram(metric), [Slot::TractorUp, Slot::TractorUp])
}

fn selector(metric: &Metric, slot: Slot, at: usize) -> Tensor {
    let n = metric.n;
    let like = metric.g.data()[0].zero_like();
    Tensor::from_fn(vec![slot], vec![n + 2], |i| const_like(&like, if i[0] == at { 1.0 } else { 0.0 }))
}

/// The projectors `X_A, Y_A` (lower) and `X^A, Y^A` (upper).
pub fn x_lower(metric: &Metric) -> Tensor {
    selector(metric, Slot::TractorDown, bottom(metric.n))
}

pub fn y_lower(metric: &Metric) -> Tensor {
    selector(metric, Slot::TractorDown, TOP)
}

pub fn x_upper(metric: &Metric) -> Tensor {
    selector(metric, Slot::TractorUp, TOP)
}

pub fn y_upper(metric: &Metric) -> Tensor {
    selector(metric, Slot::TractorUp, bottom(metric.n))
}

/// `Z_A^a` (slots `[TractorDown, Up]`) or `Z^A_a` (slots `[TractorUp, Down]`).
pub fn z_projector(metric: &Metric, upper: bool) -> Tensor {
    let n = metric.n;
    let like = metric.g.data()[0].zero_like();
    let slots = if upper { vec![Slot::TractorUp, Slot::Down] } else { vec![Slot::TractorDown, Slot::Up] };
    Tensor::from_fn(slots, vec![n + 2, n], |i| const_like(&like, if i[0] == mid(i[1]) { 1.0 } else { 0.0 }))
}

/// Raises the tractor slot at `pos` with `h^{AB}`.
pub fn raise_tractor(t: &Tensor, pos: usize, metric: &Metric) -> Result<Tensor> {
    if t.slots().get(pos) != Some(&Slot::TractorDown) {
        return Err(Error::ShapeMismatch(format!("slot {pos} is not a lower tractor index")));
    }
    t.transform_slot(pos, Slot::TractorUp, &gram(metric))
}

pub fn lower_tractor(t: &Tensor, pos: usize, metric: &Metric) -> Result<Tensor> {
    if t.slots().get(pos) != Some(&Slot::TractorUp) {
        return Err(Error::ShapeMismatch(format!("slot {pos} is not an upper tractor index")));
    }
    t.transform_slot(pos, Slot::TractorDown, &gram_inverse(metric))
}

/// `h^{AB} U_A V_B` contracted over slot `iu` of `u` and `iv` of `v`.
pub fn tractor_contract(u: &Tensor, iu: usize, v: &Tensor, iv: usize, metric: &Metric) -> Result<Tensor> {
    contract(&raise_tractor(u, iu, metric)?, iu, v, iv)
}

/// The tractor connection as a rank `n + 2` connection on cotractor columns.
pub fn tractor_connection(metric: &Metric, curv: &Curvature) -> Result<GaugeConnection> {
    let n = metric.n;
    let order = curv.schouten.order();
    let p = &curv.schouten;
    let p_mixed = p.raise(1, metric)?; // P_a^d
    let like = p.data()[0].zero_like();
    let g = metric.g.truncate(order);
    let gam = metric.gamma.truncate(order);
    let a = Tensor::from_fn(vec![Slot::Down, Slot::EndUp, Slot::EndDown], vec![n, n + 2, n + 2], |i| {
        let (a, r, c) = (i[0], i[1], i[2]);
        match (r, c) {
            (TOP, c) if (1..=n).contains(&c) => const_like(&like, if c - 1 == a { -1.0 } else { 0.0 }),
            (r, TOP) if (1..=n).contains(&r) => p.get(&[a, r - 1]).clone(),
            (r, c) if (1..=n).contains(&r) && (1..=n).contains(&c) => -gam.get(&[c - 1, a, r - 1]),
            (r, c) if (1..=n).contains(&r) && c == n + 1 => g.get(&[a, r - 1]).clone(),
            (r, c) if r == n + 1 && (1..=n).contains(&c) => -p_mixed.get(&[a, c - 1]),
            _ => like.clone(),
        }
    });
    GaugeConnection::new(a)
}

/// Converts the trailing pair of lower tractor slots of a 2-form into an
/// endomorphism of cotractor columns: `M = t·h^{-1}`.
pub fn form_to_end(t: &Tensor, metric: &Metric) -> Result<Tensor> {
    let r = t.rank();
    if r < 2 || t.slots()[r - 2..] != [Slot::TractorDown, Slot::TractorDown] {
        return Err(Error::ShapeMismatch("form_to_end needs two trailing lower tractor slots".into()));
    }
    let gt = transpose(&gram(metric));
    Ok(t.transform_slot(r - 1, Slot::EndDown, &gt)?.relabel(r - 2, Slot::EndUp))
}

/// Inverse of [`form_to_end`].
pub fn end_to_form(m: &Tensor, metric: &Metric) -> Result<Tensor> {
    let r = m.rank();
    if r < 2 || m.slots()[r - 2..] != [Slot::EndUp, Slot::EndDown] {
        return Err(Error::ShapeMismatch("end_to_form needs a trailing endomorphism pair".into()));
    }
    let gt = transpose(&gram_inverse(metric));
    Ok(m.transform_slot(r - 1, Slot::TractorDown, &gt)?.relabel(r - 2, Slot::TractorDown))
}

/// Tractor curvature `κ_abCD` assembled from Weyl and Cotton.
pub fn kappa_closed_form(metric: &Metric, w: &Tensor, c: &Tensor) -> Tensor {
    let n = metric.n;
    let order = c.order();
    let like = c.data()[0].zero_like();
    Tensor::from_fn(vec![Slot::Down, Slot::Down, Slot::TractorDown, Slot::TractorDown], vec![n, n, n + 2, n + 2], |i| {
        let (a, b, p, q) = (i[0], i[1], i[2], i[3]);
        let is_mid = |x: usize| (1..=n).contains(&x);
        if is_mid(p) && is_mid(q) {
            w.get(&[a, b, p - 1, q - 1]).truncate(order)
        } else if is_mid(p) && q == n + 1 {
            c.get(&[a, b, p - 1]).clone()
        } else if p == n + 1 && is_mid(q) {
            -c.get(&[a, b, q - 1])
        } else {
            like.clone()
        }
    })
}

/// `(d−4) C_dec Z_D^d Z_E^e + 2 B_cd Z_[D^d X_E]`, slots `[Down c, TractorDown D, TractorDown E]`.
pub fn tractor_ym_closed_form(metric: &Metric, c: &Tensor, b: &Tensor) -> Tensor {
    let n = metric.n;
    let order = b.order();
    let like = b.data()[0].zero_like();
    let nf = n as f64;
    Tensor::from_fn(vec![Slot::Down, Slot::TractorDown, Slot::TractorDown], vec![n, n + 2, n + 2], |i| {
        let (cc, p, q) = (i[0], i[1], i[2]);
        let is_mid = |x: usize| (1..=n).contains(&x);
        if is_mid(p) && is_mid(q) {
            c.get(&[p - 1, q - 1, cc]).truncate(order).scale(nf - 4.0)
        } else if is_mid(p) && q == n + 1 {
            b.get(&[cc, p - 1]).clone()
        } else if p == n + 1 && is_mid(q) {
            -b.get(&[cc, q - 1])
        } else {
            like.clone()
        }
    })
}

/// Acts with an endomorphism of cotractor columns on every tractor slot of `t`
/// from `first` onwards.
pub fn tractor_hash(t: &Tensor, m: &[Vec<Jet>], first: usize) -> Result<Tensor> {
    let mt = transpose(m);
    let mut acc = t.zero_like();
    for (s, &slot) in t.slots().iter().enumerate().skip(first) {
        let term = match slot {
            Slot::TractorDown => t.transform_slot(s, slot, m)?,
            Slot::TractorUp => t.transform_slot(s, slot, &mt)?.scale(-1.0),
            _ => continue,
        };
        acc = acc.add(&term.truncate(acc.order()))?.truncate(term.order().min(acc.order()));
    }
    Ok(acc)
}

/// The W-tractor `W_ABCD`.
pub fn w_tractor(metric: &Metric, full: &FullCurvature) -> Result<Tensor> {
    let n = metric.n;
    if n == 4 {
        return Err(Error::Excluded("W-tractor in dimension 4".into()));
    }
    let (w, c, b) = (&full.weyl, &full.cotton, &full.bach);
    let order = b.order();
    let nb = n + 1;
    let mut t = Tensor::zeros(vec![Slot::TractorDown; 4], vec![n + 2; 4], &b.data()[0]);
    let inv = 1.0 / (n as f64 - 4.0);
    for a in 0..n {
        for bb in 0..n {
            for cc in 0..n {
                for d in 0..n {
                    *t.get_mut(&[mid(a), mid(bb), mid(cc), mid(d)]) = w.get(&[a, bb, cc, d]).truncate(order);
                }
                // C_{c b a} with (a, b, c) = (a, bb, cc)
                let cv = c.get(&[cc, bb, a]).truncate(order);
                *t.get_mut(&[nb, mid(a), mid(bb), mid(cc)]) += &cv;
                *t.get_mut(&[mid(a), nb, mid(bb), mid(cc)]) -= &cv;
                *t.get_mut(&[mid(cc), mid(bb), nb, mid(a)]) -= &cv;
                *t.get_mut(&[mid(cc), mid(bb), mid(a), nb]) += &cv;
            }
            let bv = b.get(&[a, bb]).scale(inv);
            *t.get_mut(&[mid(a), nb, mid(bb), nb]) += &bv;
            *t.get_mut(&[mid(a), nb, nb, mid(bb)]) -= &bv;
            *t.get_mut(&[nb, mid(a), mid(bb), nb]) -= &bv;
            *t.get_mut(&[nb, mid(a), nb, mid(bb)]) += &bv;
        }
    }
    Ok(t)
}

/// Tractor operators for a fixed metric representative, optionally twisted by
/// a bundle connection.
pub struct TractorCalculus<'a> {
    pub metric: &'a Metric,
    pub curv: &'a Curvature,
    pub omega: GaugeConnection,
    pub gauge: Option<&'a GaugeConnection>,
}

impl<'a> TractorCalculus<'a> {
    pub fn new(metric: &'a Metric, curv: &'a Curvature, gauge: Option<&'a GaugeConnection>) -> Result<Self> {
        let omega = tractor_connection(metric, curv)?;
        Ok(TractorCalculus { metric, curv, omega, gauge })
    }

    pub fn n(&self) -> usize {
        self.metric.n
    }

    pub fn conns(&self) -> Connections<'_> {
        Connections { metric: self.metric, gauge: self.gauge, tractor: Some(&self.omega) }
    }

    /// Thomas-D of a weight `w` field; the new lower tractor slot comes first.
    pub fn thomas_d(&self, t: &Tensor, w: f64) -> Result<Tensor> {
        let n = self.n();
        let c = self.conns();
        let dt = nabla(t, &c)?;
        let lap = nabla(&dt, &c)?.metric_trace(0, 1, self.metric)?;
        let order = lap.order();
        let coef = n as f64 + 2.0 * w - 2.0;
        let top = t.truncate(order).scale(coef * w);
        let bot = lap.add(&t.mul_jet(&self.curv.j).scale(w).truncate(order))?.scale(-1.0);
        let mut data = top.into_data();
        data.extend(dt.truncate(order).scale(coef).into_data());
        data.extend(bot.into_data());
        let mut slots = vec![Slot::TractorDown];
        slots.extend_from_slice(t.slots());
        let mut dims = vec![n + 2];
        dims.extend_from_slice(t.dims());
        Tensor::new(slots, dims, data, w - 1.0)
    }

    fn hat_factor(&self, w: f64) -> Result<f64> {
        let coef = self.n() as f64 + 2.0 * w - 2.0;
        if coef == 0.0 {
            return Err(Error::Excluded(format!("hatted Thomas-D at weight {w} in dimension {}", self.n())));
        }
        Ok(1.0 / coef)
    }

    pub fn thomas_d_hat(&self, t: &Tensor, w: f64) -> Result<Tensor> {
        let f = self.hat_factor(w)?;
        Ok(self.thomas_d(t, w)?.scale(f))
    }

    /// `Σ_{s≠s'} W^D_{B}^E_{C} T_{..D(s)..E(s')..}` over ordered pairs of lower
    /// tractor slots.
    pub fn w_sharp_sharp(&self, t: &Tensor, wt: &Tensor) -> Result<Tensor> {
        let g = gram(self.metric);
        let wm = wt.transform_slot(0, Slot::TractorUp, &g)?.transform_slot(2, Slot::TractorUp, &g)?;
        let tractor_slots: Vec<usize> =
            t.slots().iter().enumerate().filter(|(_, &s)| s == Slot::TractorDown).map(|(i, _)| i).collect();
        if t.slots().contains(&Slot::TractorUp) {
            return Err(Error::Unsupported("double hash on upper tractor slots".into()));
        }
        let r = t.rank();
        let mut acc = t.zero_like().truncate(t.order().min(wm.order()));
        for &s1 in &tractor_slots {
            for &s2 in &tractor_slots {
                if s1 == s2 {
                    continue;
                }
                let mut perm = vec![s1, s2];
                perm.extend((0..r).filter(|&k| k != s1 && k != s2));
                let tp = t.permute(&perm)?;
                let c = contract(&wm, 0, &tp, 0)?; // [B, E, C, E', rest]
                let c = c.trace(1, 3)?; // [B, C, rest]
                let mut inv = vec![0; r];
                for (k, &p) in perm.iter().enumerate() {
                    inv[p] = k;
                }
                let back = c.permute(&inv)?;
                acc = acc.add(&back.truncate(acc.order()))?;
            }
        }
        Ok(acc)
    }

    /// Slashed Thomas-D `D − X ∘ W^♯♯` on tractor forms.
    pub fn slashed_d(&self, t: &Tensor, w: f64, wt: &Tensor) -> Result<Tensor> {
        let d = self.thomas_d(t, w)?;
        let ww = self.w_sharp_sharp(t, wt)?;
        let order = d.order().min(ww.order());
        let x = x_lower(self.metric);
        let xw = x.outer(&ww);
        Ok(d.truncate(order).sub(&xw.truncate(order).with_weight(d.weight))?)
    }

    pub fn slashed_d_hat(&self, t: &Tensor, w: f64, wt: &Tensor) -> Result<Tensor> {
        let f = self.hat_factor(w)?;
        Ok(self.slashed_d(t, w, wt)?.scale(f))
    }

    /// Both sides of `[D_A, D_B] T = (n+2w−4)(n+2w−2) W_AB^♯ T + 4 X_[A W_B]C^♯ D^C T`.
    pub fn dd_commutator_sides(&self, t: &Tensor, w: f64, wt: &Tensor) -> Result<(Tensor, Tensor)> {
        let n = self.n() as f64;
        let metric = self.metric;
        let d1 = self.thomas_d(t, w)?;
        let dd = self.thomas_d(&d1, w - 1.0)?; // [A, B, ...]
        let r = dd.rank();
        let mut swap: Vec<usize> = vec![1, 0];
        swap.extend(2..r);
        let lhs = dd.sub(&dd.permute(&swap)?)?;

        let order = lhs.order();
        let g = gram(metric);
        // W_AB^♯ T as [A, B, T...]
        let nn = self.n() + 2;
        let w_end = |a: usize, b: usize| -> Vec<Vec<Jet>> {
            (0..nn)
                .map(|p| {
                    (0..nn)
                        .map(|q| {
                            let mut acc = wt.data()[0].zero_like();
                            for e in 0..nn {
                                if !g[e][q].is_zero() {
                                    acc.add_product(wt.get(&[a, b, p, e]), &g[e][q]);
                                }
                            }
                            acc
                        })
                        .collect()
                })
                .collect()
        };
        let mats: Vec<Vec<Vec<Jet>>> = (0..nn * nn).map(|ab| w_end(ab / nn, ab % nn)).collect();
        let mut blocks = Vec::with_capacity(nn * nn);
        for m in &mats {
            blocks.push(tractor_hash(t, m, 0)?.truncate(order));
        }
        let coef = (n + 2.0 * w - 4.0) * (n + 2.0 * w - 2.0);
        let mut data = Vec::new();
        for b in &blocks {
            data.extend(b.scale(coef).into_data());
        }
        let mut slots = vec![Slot::TractorDown, Slot::TractorDown];
        slots.extend_from_slice(t.slots());
        let mut dims = vec![nn, nn];
        dims.extend_from_slice(t.dims());
        let first = Tensor::new(slots.clone(), dims.clone(), data, lhs.weight)?;

        // Q_B = Σ_C W_BC^♯ (D^C T), acting on the T slots only
        let dup = raise_tractor(&d1, 0, metric)?; // [C^, T...]
        let per_c = dup.data().len() / nn;
        let mut q_data = Vec::with_capacity(nn * per_c);
        for b in 0..nn {
            let mut acc: Option<Tensor> = None;
            for c in 0..nn {
                let slice = Tensor::new(
                    t.slots().to_vec(),
                    t.dims().to_vec(),
                    dup.data()[c * per_c..(c + 1) * per_c].to_vec(),
                    0.0,
                )?;
                let h = tractor_hash(&slice, &mats[b * nn + c], 0)?;
                acc = Some(match acc {
                    None => h,
                    Some(a) => {
                        let o = a.order().min(h.order());
                        a.truncate(o).add(&h.truncate(o))?
                    }
                });
            }
            q_data.extend(acc.expect("nn > 0").truncate(order).into_data());
        }
        let mut qslots = vec![Slot::TractorDown];
        qslots.extend_from_slice(t.slots());
        let mut qdims = vec![nn];
        qdims.extend_from_slice(t.dims());
        let q = Tensor::new(qslots, qdims, q_data, 0.0)?;
        let xq = x_lower(metric).outer(&q); // [A, B, T...] = X_A Q_B
        let second = xq.sub(&xq.permute(&swap)?)?.scale(2.0);
        let rhs = first.add(&second.with_weight(first.weight))?;
        Ok((lhs, rhs))
    }
}

/// `q_s(t) = X_[A1 Z_A2^a1 ⋯ Z_Aℓ+1]^aℓ t_a1⋯aℓ`. The first `ell` slots of `t`
/// are the form slots; any remaining slots are carried along.
pub fn q_s(t: &Tensor, ell: usize, n: usize) -> Result<Tensor> {
    check_form_slots(t, ell)?;
    let rest_slots = &t.slots()[ell..];
    let rest_dims = &t.dims()[ell..];
    let mut slots = vec![Slot::TractorDown; ell + 1];
    slots.extend_from_slice(rest_slots);
    let mut dims = vec![n + 2; ell + 1];
    dims.extend_from_slice(rest_dims);
    let like = t.data()[0].zero_like();
    let mut src = vec![0; t.rank()];
    let raw = Tensor::from_fn(slots, dims, |idx| {
        if idx[0] != bottom(n) || idx[1..=ell].iter().any(|&i| !(1..=n).contains(&i)) {
            return like.clone();
        }
        for k in 0..ell {
            src[k] = idx[1 + k] - 1;
        }
        src[ell..].copy_from_slice(&idx[ell + 1..]);
        t.get(&src).clone()
    });
    let group: Vec<usize> = (0..=ell).collect();
    Ok(raw.antisymmetrize(&group)?.with_weight(t.weight - ell as f64 + 1.0))
}

fn check_form_slots(t: &Tensor, ell: usize) -> Result<()> {
    if t.rank() < ell || t.slots()[..ell].iter().any(|&s| s != Slot::Down) {
        return Err(Error::ShapeMismatch(format!("expected {ell} leading lower tangent slots")));
    }
    Ok(())
}

/// Inserts `Z` projectors for the first `k` slots and an optional leading `X`.
fn insert_projectors(t: &Tensor, k: usize, lead_x: bool, n: usize) -> Tensor {
    let off = usize::from(lead_x);
    let mut slots = vec![Slot::TractorDown; k + off];
    slots.extend_from_slice(&t.slots()[k..]);
    let mut dims = vec![n + 2; k + off];
    dims.extend_from_slice(&t.dims()[k..]);
    let like = t.data()[0].zero_like();
    let mut src = vec![0; t.rank()];
    Tensor::from_fn(slots, dims, |idx| {
        if lead_x && idx[0] != bottom(n) {
            return like.clone();
        }
        if idx[off..off + k].iter().any(|&i| !(1..=n).contains(&i)) {
            return like.clone();
        }
        for j in 0..k {
            src[j] = idx[off + j] - 1;
        }
        src[k..].copy_from_slice(&idx[off + k..]);
        t.get(&src).clone()
    })
}

/// `q_w(t) = Z⋯Z t − ℓ/(n+w−2ℓ) X_[A1 Z_A2^a2 ⋯ Z_Aℓ]^aℓ ∇^a1 t_a1 a2⋯aℓ`.
pub fn q_w(t: &Tensor, ell: usize, w: f64, conns: &Connections) -> Result<Tensor> {
    check_form_slots(t, ell)?;
    let n = conns.metric.n;
    let denom = n as f64 + w - 2.0 * ell as f64;
    if denom == 0.0 {
        return Err(Error::Excluded(format!("q_w at weight {w} for {ell}-forms in dimension {n}")));
    }
    let group: Vec<usize> = (0..ell).collect();
    let zz = insert_projectors(t, ell, false, n).antisymmetrize(&group)?;
    let div = nabla(t, conns)?.metric_trace(0, 1, conns.metric)?; // [a2..aℓ, rest]
    let xz = insert_projectors(&div, ell - 1, true, n).antisymmetrize(&group)?;
    let order = xz.order();
    Ok(zz.truncate(order).sub(&xz.scale(ell as f64 / denom))?.with_weight(w - ell as f64))
}

/// `q_w*(T) = Z⋯Z T − ℓ/(w+ℓ) ∇_[a1 (X^A1 Z_a2^A2 ⋯ T_A1⋯Aℓ)]`; the derivative
/// term is dropped when `ι_X T = 0`.
pub fn q_w_star(t: &Tensor, ell: usize, w: f64, conns: &Connections) -> Result<Tensor> {
    let n = conns.metric.n;
    if t.rank() < ell || t.slots()[..ell].iter().any(|&s| s != Slot::TractorDown) {
        return Err(Error::ShapeMismatch(format!("expected {ell} leading lower tractor slots")));
    }
    let mut slots = vec![Slot::Down; ell];
    slots.extend_from_slice(&t.slots()[ell..]);
    let mut dims = vec![n; ell];
    dims.extend_from_slice(&t.dims()[ell..]);
    let mut src = vec![0; t.rank()];
    let zpart = Tensor::from_fn(slots.clone(), dims.clone(), |idx| {
        for k in 0..ell {
            src[k] = mid(idx[k]);
        }
        src[ell..].copy_from_slice(&idx[ell..]);
        t.get(&src).clone()
    });
    // S_{a2..aℓ, rest} = T[TOP, mid(a2), ...]
    let s = Tensor::from_fn(slots[1..].to_vec(), dims[1..].to_vec(), |idx| {
        src[0] = TOP;
        for k in 1..ell {
            src[k] = mid(idx[k - 1]);
        }
        src[ell..].copy_from_slice(&idx[ell - 1..]);
        t.get(&src).clone()
    });
    let weight = w + ell as f64;
    if s.max_abs_coeffs() == 0.0 {
        return Ok(zpart.with_weight(weight));
    }
    if w + ell as f64 == 0.0 {
        return Err(Error::Excluded(format!("q_w* at weight {w} on {ell}-forms")));
    }
    let group: Vec<usize> = (0..ell).collect();
    let ds = nabla(&s, conns)?.antisymmetrize(&group)?;
    let order = ds.order();
    Ok(zpart.truncate(order).sub(&ds.scale(ell as f64 / (w + ell as f64)))?.with_weight(weight))
}

/// `ι_U T`: contraction of a standard tractor with the first slot of `T`.
pub fn interior(u_upper: &Tensor, t: &Tensor) -> Result<Tensor> {
    contract(u_upper, 0, t, 0)
}

/// Curvature tractor `𝓕 = q_w(F)` for a bundle connection, weight −2.
pub fn curvature_tractor(metric: &Metric, conn: &GaugeConnection) -> Result<Tensor> {
    let f = conn.curvature()?;
    q_w(&f, 2, 0.0, &Connections::with_gauge(metric, conn))
}

/// `Z Z F + 2/(n−4) Z_[A^a X_B] j_a`.
pub fn curvature_tractor_closed_form(metric: &Metric, conn: &GaugeConnection) -> Result<Tensor> {
    let n = metric.n;
    if n == 4 {
        return Err(Error::Excluded("curvature tractor in dimension 4".into()));
    }
    let f = conn.curvature()?;
    let j = crate::gauge::ym_current_from(metric, conn, &f)?;
    let zz = insert_projectors(&f, 2, false, n);
    // Z_[A^a X_B] j_a
    let zx = insert_projectors(&j, 1, false, n).outer(&x_lower(metric));
    let r = zx.rank();
    let mut perm = vec![0, r - 1];
    perm.extend(1..r - 1);
    let zx = zx.permute(&perm)?.antisymmetrize(&[0, 1])?;
    let order = zx.order();
    Ok(zz.truncate(order).add(&zx.scale(2.0 / (n as f64 - 4.0)))?.with_weight(-2.0))
}

/// Scale tractor `I_A = D̂_A τ` of a weight-one scale.
pub fn scale_tractor(calc: &TractorCalculus, tau: &Jet) -> Result<Tensor> {
    if tau.value() <= 0.0 {
        return Err(Error::InvalidParam("scale must be positive".into()));
    }
    calc.thomas_d_hat(&Tensor::scalar(tau.clone()).with_weight(1.0), 1.0)
}

/// `(max|∇_a I_A|, max|trace-free(∇_a∇_b τ + P_ab τ)|)`.
pub fn einstein_check(calc: &TractorCalculus, tau: &Jet) -> Result<(f64, f64)> {
    let metric = calc.metric;
    let i = scale_tractor(calc, tau)?;
    let di = nabla(&i, &Connections::with_tractor(metric, &calc.omega))?;
    let lc = Connections::levi_civita(metric);
    let t = Tensor::scalar(tau.clone());
    let hess = nabla(&nabla(&t, &lc)?, &lc)?;
    let order = hess.order();
    let ae = hess.add(&calc.curv.schouten.mul_jet(tau).truncate(order))?;
    let ae = ae.symmetrize(&[0, 1])?.trace_free(metric)?;
    Ok((di.max_abs(), ae.max_abs()))
}

/// The change-of-splitting matrix `S` for `ĝ = Ω² g`, acting on cotractor
/// columns of functions: `V̂ = S V` with the weights of the slots included.
pub fn splitting_matrix(metric: &Metric, omega: &Jet) -> Result<Vec<Vec<Jet>>> {
    let n = metric.n;
    let ln = omega.ln()?;
    let ups: Vec<Jet> = (0..n).map(|a| ln.partial(a)).collect::<Result<_>>()?;
    let order = ups[0].order();
    let om = omega.truncate(order);
    let om_inv = om.recip()?;
    let ginv = metric.ginv.truncate(order);
    let ups_up: Vec<Jet> = (0..n)
        .map(|c| {
            let mut acc = ups[0].zero_like();
            for d in 0..n {
                acc.add_product(ginv.get(&[c, d]), &ups[d]);
            }
            acc
        })
        .collect();
    let mut norm = ups[0].zero_like();
    for a in 0..n {
        norm.add_product(&ups[a], &ups_up[a]);
    }
    let zero = ups[0].zero_like();
    let mut s = vec![vec![zero.clone(); n + 2]; n + 2];
    s[TOP][TOP] = om.clone();
    for b in 0..n {
        s[mid(b)][TOP] = &om * &ups[b];
        s[mid(b)][mid(b)] = om.clone();
        s[bottom(n)][mid(b)] = -(&om_inv * &ups_up[b]);
    }
    s[bottom(n)][TOP] = (&om_inv * &norm).scale(-0.5);
    s[bottom(n)][bottom(n)] = om_inv;
    Ok(s)
}

/// Re-expresses `t` (computed in the `g` splitting) in the `Ω²g` splitting:
/// lower tractor slots by `S`, upper ones by `S^{-T}`, and, when
/// `tractor_end` is set, endomorphism slots by conjugation; then scales by `Ω^w`.
pub fn change_splitting(t: &Tensor, s: &[Vec<Jet>], omega: &Jet, tractor_end: bool) -> Result<Tensor> {
    let sinv = invert_matrix(s)?;
    let sinv_t = transpose(&sinv);
    let mut out = t.clone();
    for (pos, &slot) in t.slots().iter().enumerate() {
        out = match slot {
            Slot::TractorDown => out.transform_slot(pos, slot, s)?,
            Slot::TractorUp => out.transform_slot(pos, slot, &sinv_t)?,
            Slot::EndUp if tractor_end => out.transform_slot(pos, slot, s)?,
            Slot::EndDown if tractor_end => out.transform_slot(pos, slot, &sinv_t)?,
            _ => out,
        };
    }
    let order = out.order();
    let factor = omega.truncate(order).powf(t.weight)?;
    Ok(out.mul_jet(&factor))
}
