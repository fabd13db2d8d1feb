//! Jet-valued tensors at a chart point, index algebra, and coupled covariant
//! differentiation.
//!
//! A [`Tensor`] is a dense row-major array of [`Jet`]s. Each slot records what
//! kind of index it is, which decides how a connection acts on it:
//!
//! | slot          | size | action of `∇_a`                       |
//! |---------------|------|---------------------------------------|
//! | `Up`          | n    | `+Γ^i_{am}`                          |
//! | `Down`        | n    | `−Γ^m_{ai}`                          |
//! | `TractorDown` | n+2  | `+ω_a[i][m]` (tractor connection)    |
//! | `TractorUp`   | n+2  | `−ω_a[m][i]`                         |
//! | `EndUp`       | r    | `+A_a[i][m]` (bundle connection)     |
//! | `EndDown`     | r    | `−A_a[m][i]`                         |
//!
//! An endomorphism value is an `EndUp, EndDown` slot pair, so the two rules
//! above combine into the adjoint action `[A_a, ·]`.

use crate::error::{Error, Result};
use crate::gauge::GaugeConnection;
use crate::jet::Jet;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Slot {
    Up,
    Down,
    TractorUp,
    TractorDown,
    EndUp,
    EndDown,
}

impl Slot {
    fn name(self) -> &'static str {
        match self {
            Slot::Up | Slot::Down => "tangent",
            Slot::TractorUp | Slot::TractorDown => "tractor",
            Slot::EndUp | Slot::EndDown => "bundle",
        }
    }
}

/// Dense array of jets indexed by a list of slots.
#[derive(Debug, Clone)]
pub struct Tensor {
    slots: Vec<Slot>,
    dims: Vec<usize>,
    data: Vec<Jet>,
    /// Conformal weight; additive under tensor products.
    pub weight: f64,
}

fn strides(dims: &[usize]) -> Vec<usize> {
    let mut s = vec![1; dims.len()];
    for k in (0..dims.len().saturating_sub(1)).rev() {
        s[k] = s[k + 1] * dims[k + 1];
    }
    s
}

fn unravel(mut flat: usize, dims: &[usize], out: &mut [usize]) {
    for k in (0..dims.len()).rev() {
        out[k] = flat % dims[k];
        flat /= dims[k];
    }
}

fn permutations(k: usize) -> Vec<(Vec<usize>, f64)> {
    fn rec(cur: &mut Vec<usize>, used: &mut Vec<bool>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == used.len() {
            out.push(cur.clone());
            return;
        }
        for i in 0..used.len() {
            if !used[i] {
                used[i] = true;
                cur.push(i);
                rec(cur, used, out);
                cur.pop();
                used[i] = false;
            }
        }
    }
    let mut perms = Vec::new();
    rec(&mut Vec::new(), &mut vec![false; k], &mut perms);
    perms
        .into_iter()
        .map(|p| {
            let mut inversions = 0;
            for i in 0..k {
                for j in i + 1..k {
                    if p[i] > p[j] {
                        inversions += 1;
                    }
                }
            }
            let sign = if inversions % 2 == 0 { 1.0 } else { -1.0 };
            (p, sign)
        })
        .collect()
}

impl Tensor {
    pub fn new(slots: Vec<Slot>, dims: Vec<usize>, data: Vec<Jet>, weight: f64) -> Result<Tensor> {
        if slots.len() != dims.len() {
            return Err(Error::ShapeMismatch("slot and dimension lists differ in length".into()));
        }
        let len: usize = dims.iter().product();
        if data.len() != len || len == 0 {
            return Err(Error::ShapeMismatch(format!("expected {len} components, got {}", data.len())));
        }
        Ok(Tensor { slots, dims, data, weight })
    }

    pub fn scalar(j: Jet) -> Tensor {
        Tensor { slots: vec![], dims: vec![], data: vec![j], weight: 0.0 }
    }

    pub fn from_fn(slots: Vec<Slot>, dims: Vec<usize>, mut f: impl FnMut(&[usize]) -> Jet) -> Tensor {
        let len: usize = dims.iter().product();
        let mut idx = vec![0; dims.len()];
        let data = (0..len)
            .map(|flat| {
                unravel(flat, &dims, &mut idx);
                f(&idx)
            })
            .collect();
        Tensor { slots, dims, data, weight: 0.0 }
    }

    pub fn try_from_fn(
        slots: Vec<Slot>,
        dims: Vec<usize>,
        mut f: impl FnMut(&[usize]) -> Result<Jet>,
    ) -> Result<Tensor> {
        let len: usize = dims.iter().product();
        let mut idx = vec![0; dims.len()];
        let mut data = Vec::with_capacity(len);
        for flat in 0..len {
            unravel(flat, &dims, &mut idx);
            data.push(f(&idx)?);
        }
        Ok(Tensor { slots, dims, data, weight: 0.0 })
    }

    pub fn zeros(slots: Vec<Slot>, dims: Vec<usize>, like: &Jet) -> Tensor {
        let z = like.zero_like();
        Tensor::from_fn(slots, dims, |_| z.clone())
    }

    pub fn with_weight(mut self, w: f64) -> Tensor {
        self.weight = w;
        self
    }

    pub fn slots(&self) -> &[Slot] {
        &self.slots
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn rank(&self) -> usize {
        self.slots.len()
    }

    pub fn data(&self) -> &[Jet] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [Jet] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<Jet> {
        self.data
    }

    pub fn order(&self) -> usize {
        self.data[0].order()
    }

    pub fn nvars(&self) -> usize {
        self.data[0].nvars()
    }

    fn offset(&self, idx: &[usize]) -> usize {
        debug_assert_eq!(idx.len(), self.dims.len());
        idx.iter().zip(&self.dims).fold(0, |acc, (&i, &d)| {
            debug_assert!(i < d);
            acc * d + i
        })
    }

    pub fn get(&self, idx: &[usize]) -> &Jet {
        &self.data[self.offset(idx)]
    }

    pub fn get_mut(&mut self, idx: &[usize]) -> &mut Jet {
        let o = self.offset(idx);
        &mut self.data[o]
    }

    pub fn value(&self, idx: &[usize]) -> f64 {
        self.get(idx).value()
    }

    /// Values at the base point in row-major order.
    pub fn values(&self) -> Vec<f64> {
        self.data.iter().map(Jet::value).collect()
    }

    pub fn map(&self, f: impl Fn(&Jet) -> Jet) -> Tensor {
        Tensor {
            slots: self.slots.clone(),
            dims: self.dims.clone(),
            data: self.data.iter().map(f).collect(),
            weight: self.weight,
        }
    }

    pub fn try_map(&self, f: impl FnMut(&Jet) -> Result<Jet>) -> Result<Tensor> {
        Ok(Tensor {
            slots: self.slots.clone(),
            dims: self.dims.clone(),
            data: self.data.iter().map(f).collect::<Result<_>>()?,
            weight: self.weight,
        })
    }

    fn check_same_shape(&self, other: &Tensor) -> Result<()> {
        if self.slots != other.slots || self.dims != other.dims {
            return Err(Error::ShapeMismatch(format!(
                "{:?}{:?} vs {:?}{:?}",
                self.slots, self.dims, other.slots, other.dims
            )));
        }
        Ok(())
    }

    pub fn add(&self, other: &Tensor) -> Result<Tensor> {
        self.check_same_shape(other)?;
        let data = self.data.iter().zip(&other.data).map(|(a, b)| a + b).collect();
        Ok(Tensor { slots: self.slots.clone(), dims: self.dims.clone(), data, weight: self.weight })
    }

    pub fn sub(&self, other: &Tensor) -> Result<Tensor> {
        self.check_same_shape(other)?;
        let data = self.data.iter().zip(&other.data).map(|(a, b)| a - b).collect();
        Ok(Tensor { slots: self.slots.clone(), dims: self.dims.clone(), data, weight: self.weight })
    }

    pub fn scale(&self, s: f64) -> Tensor {
        self.map(|j| j.scale(s))
    }

    pub fn mul_jet(&self, f: &Jet) -> Tensor {
        self.map(|j| j * f)
    }

    pub fn truncate(&self, order: usize) -> Tensor {
        self.map(|j| j.truncate(order))
    }

    /// Largest absolute component value at the base point.
    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0f64, |m, j| m.max(j.value().abs()))
    }

    /// Largest absolute Taylor coefficient over all components.
    pub fn max_abs_coeffs(&self) -> f64 {
        self.data.iter().fold(0.0f64, |m, j| m.max(j.max_abs()))
    }

    /// Reorders slots: slot `k` of the result is slot `perm[k]` of `self`.
    pub fn permute(&self, perm: &[usize]) -> Result<Tensor> {
        let r = self.rank();
        let mut seen = vec![false; r];
        if perm.len() != r || perm.iter().any(|&p| p >= r || std::mem::replace(&mut seen[p], true)) {
            return Err(Error::ShapeMismatch(format!("invalid permutation {perm:?}")));
        }
        let slots: Vec<Slot> = perm.iter().map(|&p| self.slots[p]).collect();
        let dims: Vec<usize> = perm.iter().map(|&p| self.dims[p]).collect();
        let mut src = vec![0; r];
        let t = Tensor::from_fn(slots, dims, |idx| {
            for k in 0..r {
                src[perm[k]] = idx[k];
            }
            self.get(&src).clone()
        });
        Ok(t.with_weight(self.weight))
    }

    fn check_group(&self, positions: &[usize]) -> Result<()> {
        let first = *positions.first().ok_or_else(|| Error::ShapeMismatch("empty slot group".into()))?;
        for &p in positions {
            if p >= self.rank() || self.slots[p] != self.slots[first] || self.dims[p] != self.dims[first] {
                return Err(Error::ShapeMismatch(format!("slot group {positions:?} is not homogeneous")));
            }
        }
        Ok(())
    }

    fn average_over_group(&self, positions: &[usize], signed: bool) -> Result<Tensor> {
        self.check_group(positions)?;
        let perms = permutations(positions.len());
        let norm = 1.0 / perms.len() as f64;
        let mut acc = self.zero_like();
        for (p, sign) in &perms {
            let mut full: Vec<usize> = (0..self.rank()).collect();
            for (k, &q) in p.iter().enumerate() {
                full[positions[k]] = positions[q];
            }
            let s = if signed { *sign } else { 1.0 };
            let term = self.permute(&full)?;
            for (a, b) in acc.data.iter_mut().zip(&term.data) {
                *a += &b.scale(s * norm);
            }
        }
        Ok(acc)
    }

    /// Unit-weight antisymmetrization over the given slots.
    pub fn antisymmetrize(&self, positions: &[usize]) -> Result<Tensor> {
        self.average_over_group(positions, true)
    }

    /// Unit-weight symmetrization over the given slots.
    pub fn symmetrize(&self, positions: &[usize]) -> Result<Tensor> {
        self.average_over_group(positions, false)
    }

    pub fn zero_like(&self) -> Tensor {
        Tensor::zeros(self.slots.clone(), self.dims.clone(), &self.data[0]).with_weight(self.weight)
    }

    pub fn outer(&self, other: &Tensor) -> Tensor {
        let len_b = other.data.len();
        let mut slots = self.slots.clone();
        slots.extend_from_slice(&other.slots);
        let mut dims = self.dims.clone();
        dims.extend_from_slice(&other.dims);
        let mut data = Vec::with_capacity(self.data.len() * len_b);
        for a in &self.data {
            for b in &other.data {
                data.push(a * b);
            }
        }
        Tensor { slots, dims, data, weight: self.weight + other.weight }
    }

    /// Changes the kind of one slot without touching components.
    pub fn relabel(mut self, pos: usize, slot: Slot) -> Tensor {
        self.slots[pos] = slot;
        self
    }

    /// Trace over two slots of equal size (no metric involved).
    pub fn trace(&self, i: usize, j: usize) -> Result<Tensor> {
        if i == j || i >= self.rank() || j >= self.rank() || self.dims[i] != self.dims[j] {
            return Err(Error::ShapeMismatch(format!("cannot trace slots {i} and {j}")));
        }
        let keep: Vec<usize> = (0..self.rank()).filter(|&k| k != i && k != j).collect();
        let slots = keep.iter().map(|&k| self.slots[k]).collect();
        let dims = keep.iter().map(|&k| self.dims[k]).collect();
        let mut src = vec![0; self.rank()];
        let t = Tensor::from_fn(slots, dims, |idx| {
            for (k, &p) in keep.iter().enumerate() {
                src[p] = idx[k];
            }
            let mut acc = self.data[0].zero_like();
            for m in 0..self.dims[i] {
                src[i] = m;
                src[j] = m;
                acc += self.get(&src);
            }
            acc
        });
        Ok(t.with_weight(self.weight))
    }

    /// Applies a square matrix to one slot: `out[..a..] = Σ_m mat[a][m] T[..m..]`.
    pub fn transform_slot(&self, pos: usize, new_slot: Slot, mat: &[Vec<Jet>]) -> Result<Tensor> {
        if pos >= self.rank() {
            return Err(Error::ShapeMismatch(format!("slot {pos} out of range")));
        }
        let old = self.dims[pos];
        let new_dim = mat.len();
        if mat.iter().any(|row| row.len() != old) {
            return Err(Error::ShapeMismatch("matrix does not match slot size".into()));
        }
        let mut slots = self.slots.clone();
        slots[pos] = new_slot;
        let mut dims = self.dims.clone();
        dims[pos] = new_dim;
        let mut src = vec![0; self.rank()];
        let t = Tensor::from_fn(slots, dims, |idx| {
            src.copy_from_slice(idx);
            let mut acc = self.data[0].zero_like();
            for (m, c) in mat[idx[pos]].iter().enumerate() {
                if !c.is_zero() {
                    src[pos] = m;
                    acc.add_product(c, self.get(&src));
                }
            }
            acc
        });
        Ok(t.with_weight(self.weight))
    }

    pub fn raise(&self, pos: usize, metric: &Metric) -> Result<Tensor> {
        if self.slots.get(pos) != Some(&Slot::Down) {
            return Err(Error::ShapeMismatch(format!("slot {pos} is not a lower tangent index")));
        }
        self.transform_slot(pos, Slot::Up, &metric.ginv_rows())
    }

    pub fn lower(&self, pos: usize, metric: &Metric) -> Result<Tensor> {
        if self.slots.get(pos) != Some(&Slot::Up) {
            return Err(Error::ShapeMismatch(format!("slot {pos} is not an upper tangent index")));
        }
        self.transform_slot(pos, Slot::Down, &metric.g_rows())
    }

    /// Metric trace over two tangent slots of the same valence.
    pub fn metric_trace(&self, i: usize, j: usize, metric: &Metric) -> Result<Tensor> {
        match (self.slots.get(i), self.slots.get(j)) {
            (Some(Slot::Down), Some(Slot::Down)) => self.raise(i, metric)?.trace(i, j),
            (Some(Slot::Up), Some(Slot::Up)) => self.lower(i, metric)?.trace(i, j),
            (Some(Slot::Up), Some(Slot::Down)) | (Some(Slot::Down), Some(Slot::Up)) => self.trace(i, j),
            _ => Err(Error::ShapeMismatch("metric trace needs tangent slots".into())),
        }
    }

    /// Trace-free part of a covariant symmetric 2-tensor.
    pub fn trace_free(&self, metric: &Metric) -> Result<Tensor> {
        if self.slots != [Slot::Down, Slot::Down] {
            return Err(Error::ShapeMismatch("trace-free part needs a covariant 2-tensor".into()));
        }
        let tr = self.metric_trace(0, 1, metric)?.data[0].clone();
        let n = metric.n as f64;
        let sub = metric.g.mul_jet(&tr).scale(1.0 / n);
        self.sub(&sub)
    }
}

/// `Σ_k a[.., k (slot ia), ..] b[.., k (slot ib), ..]`; result slots are those of
/// `a` without `ia` followed by those of `b` without `ib`.
pub fn contract(a: &Tensor, ia: usize, b: &Tensor, ib: usize) -> Result<Tensor> {
    if ia >= a.rank() || ib >= b.rank() || a.dims[ia] != b.dims[ib] {
        return Err(Error::ShapeMismatch("contraction slots do not match".into()));
    }
    let keep_a: Vec<usize> = (0..a.rank()).filter(|&k| k != ia).collect();
    let keep_b: Vec<usize> = (0..b.rank()).filter(|&k| k != ib).collect();
    let slots = keep_a.iter().map(|&k| a.slots[k]).chain(keep_b.iter().map(|&k| b.slots[k])).collect();
    let dims = keep_a.iter().map(|&k| a.dims[k]).chain(keep_b.iter().map(|&k| b.dims[k])).collect();
    let sa = strides(&a.dims);
    let sb = strides(&b.dims);
    let na = keep_a.len();
    let t = Tensor::from_fn(slots, dims, |idx| {
        let base_a: usize = keep_a.iter().enumerate().map(|(k, &p)| idx[k] * sa[p]).sum();
        let base_b: usize = keep_b.iter().enumerate().map(|(k, &p)| idx[na + k] * sb[p]).sum();
        let mut acc = a.data[0].zero_like();
        for m in 0..a.dims[ia] {
            let x = &a.data[base_a + m * sa[ia]];
            let y = &b.data[base_b + m * sb[ib]];
            if !x.is_zero() && !y.is_zero() {
                acc.add_product(x, y);
            }
        }
        acc
    });
    Ok(t.with_weight(a.weight + b.weight))
}

/// `max|a − b| / (1 + max(max|a|, max|b|))` over base-point values.
pub fn residual(a: &Tensor, b: &Tensor) -> Result<f64> {
    let order = a.order().min(b.order());
    let d = a.truncate(order).sub(&b.truncate(order))?;
    Ok(d.max_abs() / (1.0 + a.max_abs().max(b.max_abs())))
}

/// Normalized size of a quantity that should vanish, relative to a scale.
pub fn vanishing(t: &Tensor, scale: f64) -> f64 {
    t.max_abs() / (1.0 + scale)
}

/// Inverts a square jet matrix by Gauss–Jordan elimination with partial
/// pivoting on base-point values.
pub fn invert_matrix(m: &[Vec<Jet>]) -> Result<Vec<Vec<Jet>>> {
    let n = m.len();
    if n == 0 || m.iter().any(|r| r.len() != n) {
        return Err(Error::ShapeMismatch("matrix must be square and nonempty".into()));
    }
    let scale = m.iter().flatten().fold(0.0f64, |s, j| s.max(j.value().abs())).max(1e-300);
    let mut a: Vec<Vec<Jet>> = m.to_vec();
    let mut inv: Vec<Vec<Jet>> =
        (0..n).map(|i| (0..n).map(|j| m[0][0].constant_like(if i == j { 1.0 } else { 0.0 })).collect()).collect();
    for col in 0..n {
        let piv = (col..n)
            .max_by(|&x, &y| a[x][col].value().abs().total_cmp(&a[y][col].value().abs()))
            .expect("nonempty");
        let pv = a[piv][col].value();
        if pv.abs() <= 1e-13 * scale {
            return Err(Error::Singular(pv));
        }
        a.swap(col, piv);
        inv.swap(col, piv);
        let r = a[col][col].recip()?;
        for j in 0..n {
            a[col][j] = &a[col][j] * &r;
            inv[col][j] = &inv[col][j] * &r;
        }
        for row in 0..n {
            if row == col || a[row][col].is_zero() {
                continue;
            }
            let f = a[row][col].clone();
            for j in 0..n {
                let da = &f * &a[col][j];
                a[row][j] -= &da;
                let di = &f * &inv[col][j];
                inv[row][j] -= &di;
            }
        }
    }
    Ok(inv)
}

/// Metric components, inverse and Christoffel symbols at a point.
#[derive(Debug, Clone)]
pub struct Metric {
    pub n: usize,
    /// `g_ab`, slots `[Down, Down]`.
    pub g: Tensor,
    /// `g^ab`, slots `[Up, Up]`.
    pub ginv: Tensor,
    /// `Γ^a_bc`, slots `[Up, Down, Down]`, one order lower than `g`.
    pub gamma: Tensor,
}

impl Metric {
    /// Builds the metric from its covariant components.
    pub fn new(g: Tensor) -> Result<Metric> {
        let n = g.dims().first().copied().unwrap_or(0);
        if g.slots() != [Slot::Down, Slot::Down] || g.dims() != [n, n] {
            return Err(Error::ShapeMismatch("metric must be an n×n covariant tensor".into()));
        }
        if g.nvars() != n {
            return Err(Error::ShapeMismatch(format!("metric of size {n} over {} variables", g.nvars())));
        }
        if g.order() == 0 {
            return Err(Error::OrderExhausted { needed: 1, available: 0 });
        }
        for a in 0..n {
            for b in 0..a {
                let d = (g.get(&[a, b]) - g.get(&[b, a])).max_abs();
                if d > 1e-12 * (1.0 + g.get(&[a, b]).max_abs()) {
                    return Err(Error::ShapeMismatch("metric components are not symmetric".into()));
                }
            }
        }
        let rows: Vec<Vec<Jet>> = (0..n).map(|a| (0..n).map(|b| g.get(&[a, b]).clone()).collect()).collect();
        let inv = invert_matrix(&rows)?;
        let ginv = Tensor::from_fn(vec![Slot::Up, Slot::Up], vec![n, n], |i| inv[i[0]][i[1]].clone());
        let dg: Vec<Vec<Vec<Jet>>> = (0..n)
            .map(|e| {
                (0..n).map(|a| (0..n).map(|b| g.get(&[a, b]).partial(e).expect("order ≥ 1")).collect()).collect()
            })
            .collect();
        let gamma = Tensor::from_fn(vec![Slot::Up, Slot::Down, Slot::Down], vec![n, n, n], |i| {
            let (a, b, c) = (i[0], i[1], i[2]);
            let mut acc = dg[0][0][0].zero_like();
            for d in 0..n {
                let s = &(&dg[b][d][c] + &dg[c][b][d]) - &dg[d][b][c];
                acc.add_product(ginv.get(&[a, d]), &s);
            }
            acc.scale(0.5)
        });
        Ok(Metric { n, g, ginv, gamma })
    }

    pub fn order(&self) -> usize {
        self.g.order()
    }

    pub fn g_rows(&self) -> Vec<Vec<Jet>> {
        (0..self.n).map(|a| (0..self.n).map(|b| self.g.get(&[a, b]).clone()).collect()).collect()
    }

    pub fn ginv_rows(&self) -> Vec<Vec<Jet>> {
        (0..self.n).map(|a| (0..self.n).map(|b| self.ginv.get(&[a, b]).clone()).collect()).collect()
    }

    /// `g^{ab} S_ab` for a covariant 2-tensor.
    pub fn trace(&self, s: &Tensor) -> Result<Jet> {
        Ok(s.metric_trace(0, 1, self)?.data[0].clone())
    }
}

/// Matrix families `M[outer][i][m]`; entries that are identically zero are `None`.
type Family = Vec<Vec<Vec<Option<Jet>>>>;

fn family_from(t: &Tensor, outer: usize, dim: usize) -> Family {
    (0..outer)
        .map(|o| {
            (0..dim)
                .map(|i| {
                    (0..dim)
                        .map(|m| {
                            let j = &t.data[(o * dim + i) * dim + m];
                            (!j.is_zero()).then(|| j.clone())
                        })
                        .collect()
                })
                .collect()
        })
        .collect()
}

/// Connections used to differentiate each slot kind.
#[derive(Clone, Copy)]
pub struct Connections<'a> {
    pub metric: &'a Metric,
    pub gauge: Option<&'a GaugeConnection>,
    pub tractor: Option<&'a GaugeConnection>,
}

impl<'a> Connections<'a> {
    pub fn levi_civita(metric: &'a Metric) -> Self {
        Connections { metric, gauge: None, tractor: None }
    }

    pub fn with_gauge(metric: &'a Metric, gauge: &'a GaugeConnection) -> Self {
        Connections { metric, gauge: Some(gauge), tractor: None }
    }

    pub fn with_tractor(metric: &'a Metric, tractor: &'a GaugeConnection) -> Self {
        Connections { metric, gauge: None, tractor: Some(tractor) }
    }

    pub fn gauge(mut self, gauge: Option<&'a GaugeConnection>) -> Self {
        self.gauge = gauge;
        self
    }

    pub fn tractor(mut self, tractor: Option<&'a GaugeConnection>) -> Self {
        self.tractor = tractor;
        self
    }
}

/// The curvatures matching [`Connections`], used by [`hash_action`].
#[derive(Clone, Copy)]
pub struct Curvatures<'a> {
    /// `R_ab^c_d`, slots `[Down, Down, Up, Down]`.
    pub riemann: &'a Tensor,
    /// `F_ab`, slots `[Down, Down, EndUp, EndDown]`.
    pub gauge: Option<&'a Tensor>,
    /// Tractor curvature as an endomorphism of cotractor columns.
    pub tractor: Option<&'a Tensor>,
}

/// Adds `Σ_slots action` to `out`, where `out` is laid out as `[outer][t]`.
fn accumulate_actions(
    t: &Tensor,
    out: &mut [Jet],
    outer: usize,
    mut family_for: impl FnMut(Slot) -> Result<(Family, bool)>,
) -> Result<()> {
    let len = t.data.len();
    let st = strides(&t.dims);
    for (s, &slot) in t.slots.iter().enumerate() {
        let (fam, direct) = family_for(slot)?;
        let dim = t.dims[s];
        if fam.iter().any(|m| m.len() != dim) {
            return Err(Error::ShapeMismatch(format!("{} connection rank does not match slot size", slot.name())));
        }
        let stride = st[s];
        for flat in 0..len {
            let i = (flat / stride) % dim;
            let base = flat - i * stride;
            for (o, mat) in fam.iter().enumerate().take(outer) {
                for m in 0..dim {
                    let c = if direct { &mat[i][m] } else { &mat[m][i] };
                    if let Some(c) = c {
                        let x = &t.data[base + m * stride];
                        if x.is_zero() {
                            continue;
                        }
                        let p = c * x;
                        if direct {
                            out[o * len + flat] += &p;
                        } else {
                            out[o * len + flat] -= &p;
                        }
                    }
                }
            }
        }
    }
    Ok(())
}

/// Coupled covariant derivative; the new lower index is placed first.
pub fn nabla(t: &Tensor, conn: &Connections) -> Result<Tensor> {
    let metric = conn.metric;
    let n = metric.n;
    if t.order() == 0 {
        return Err(Error::OrderExhausted { needed: 1, available: 0 });
    }
    if t.nvars() != n {
        return Err(Error::ShapeMismatch("tensor and metric use different charts".into()));
    }
    let len = t.data.len();
    let mut out = Vec::with_capacity(n * len);
    for a in 0..n {
        for j in &t.data {
            out.push(j.partial(a)?);
        }
    }
    let lc = family_from(&metric.gamma.permute(&[1, 0, 2])?, n, n);
    let gauge = conn.gauge.map(|g| family_from(&g.a, n, g.rank));
    let tractor = conn.tractor.map(|g| family_from(&g.a, n, g.rank));
    accumulate_actions(t, &mut out, n, |slot| match slot {
        Slot::Up => Ok((lc.clone(), true)),
        Slot::Down => Ok((lc.clone(), false)),
        Slot::EndUp => gauge.clone().map(|f| (f, true)).ok_or(Error::MissingConnection("bundle")),
        Slot::EndDown => gauge.clone().map(|f| (f, false)).ok_or(Error::MissingConnection("bundle")),
        Slot::TractorDown => tractor.clone().map(|f| (f, true)).ok_or(Error::MissingConnection("tractor")),
        Slot::TractorUp => tractor.clone().map(|f| (f, false)).ok_or(Error::MissingConnection("tractor")),
    })?;
    let mut slots = vec![Slot::Down];
    slots.extend_from_slice(&t.slots);
    let mut dims = vec![n];
    dims.extend_from_slice(&t.dims);
    Ok(Tensor { slots, dims, data: out, weight: t.weight })
}

/// Curvature action `R_ab^♯ T + F_ab^♯ T + κ_ab^♯ T` with two new lower
/// indices placed first; equals `[∇_a, ∇_b] T`.
pub fn hash_action(t: &Tensor, curv: &Curvatures) -> Result<Tensor> {
    let n = curv.riemann.dims()[0];
    let len = t.data.len();
    let outer = n * n;
    let mut out = vec![t.data[0].zero_like(); outer * len];
    let riem = family_from(curv.riemann, outer, n);
    let gauge = curv.gauge.map(|f| family_from(f, outer, f.dims()[2]));
    let tractor = curv.tractor.map(|f| family_from(f, outer, f.dims()[2]));
    accumulate_actions(t, &mut out, outer, |slot| match slot {
        Slot::Up => Ok((riem.clone(), true)),
        Slot::Down => Ok((riem.clone(), false)),
        Slot::EndUp => gauge.clone().map(|f| (f, true)).ok_or(Error::MissingConnection("bundle")),
        Slot::EndDown => gauge.clone().map(|f| (f, false)).ok_or(Error::MissingConnection("bundle")),
        Slot::TractorDown => tractor.clone().map(|f| (f, true)).ok_or(Error::MissingConnection("tractor")),
        Slot::TractorUp => tractor.clone().map(|f| (f, false)).ok_or(Error::MissingConnection("tractor")),
    })?;
    let mut slots = vec![Slot::Down, Slot::Down];
    slots.extend_from_slice(&t.slots);
    let mut dims = vec![n, n];
    dims.extend_from_slice(&t.dims);
    Ok(Tensor { slots, dims, data: out, weight: t.weight })
}

/// `g^{ab} ∇_a ∇_b T`.
pub fn laplacian(t: &Tensor, conn: &Connections) -> Result<Tensor> {
    let dd = nabla(&nabla(t, conn)?, conn)?;
    dd.metric_trace(0, 1, conn.metric)
}

/// `g^{ab} ∇_a T_{b...}`: divergence on the first slot, which must be `Down`.
pub fn divergence(t: &Tensor, conn: &Connections) -> Result<Tensor> {
    if t.slots.first() != Some(&Slot::Down) {
        return Err(Error::ShapeMismatch("divergence needs a leading lower index".into()));
    }
    nabla(t, conn)?.metric_trace(0, 1, conn.metric)
}

/// A tensor field given by a closed-form evaluator on coordinate jets.
pub struct TensorField {
    pub name: String,
    pub slots: Vec<Slot>,
    pub dims: Vec<usize>,
    pub weight: f64,
    domain: Box<dyn Fn(&[f64]) -> bool + Send + Sync>,
    eval: Box<dyn Fn(&[Jet]) -> Result<Vec<Jet>> + Send + Sync>,
}

impl std::fmt::Debug for TensorField {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("TensorField").field("name", &self.name).field("slots", &self.slots).finish()
    }
}

impl TensorField {
    pub fn new(
        name: impl Into<String>,
        slots: Vec<Slot>,
        dims: Vec<usize>,
        domain: impl Fn(&[f64]) -> bool + Send + Sync + 'static,
        eval: impl Fn(&[Jet]) -> Result<Vec<Jet>> + Send + Sync + 'static,
    ) -> TensorField {
        TensorField { name: name.into(), slots, dims, weight: 0.0, domain: Box::new(domain), eval: Box::new(eval) }
    }

    pub fn in_domain(&self, p: &[f64]) -> bool {
        (self.domain)(p)
    }

    /// Components at `p` as jets of order `order`.
    pub fn eval_field(&self, p: &[f64], order: usize) -> Result<Tensor> {
        if !self.in_domain(p) {
            return Err(Error::ChartDomain(format!("{} at {p:?}", self.name)));
        }
        let x = Jet::seed_all(p, order);
        let data = (self.eval)(&x)?;
        Ok(Tensor::new(self.slots.clone(), self.dims.clone(), data, self.weight)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn flat_metric(p: &[f64], order: usize) -> Metric {
        let n = p.len();
        let x = Jet::seed_all(p, order);
        let g = Tensor::from_fn(vec![Slot::Down, Slot::Down], vec![n, n], |i| {
            x[0].constant_like(if i[0] == i[1] { 1.0 } else { 0.0 })
        });
        Metric::new(g).unwrap()
    }

    fn conformally_flat(p: &[f64], order: usize) -> Metric {
        // g = e^{2φ} δ with φ = x0 x1
        let n = p.len();
        let x = Jet::seed_all(p, order);
        let e = (&(&x[0] * &x[1]) * 2.0).exp();
        let g = Tensor::from_fn(vec![Slot::Down, Slot::Down], vec![n, n], |i| {
            if i[0] == i[1] {
                e.clone()
            } else {
                e.zero_like()
            }
        });
        Metric::new(g).unwrap()
    }

    #[test]
    fn trace_of_identity_is_dimension() {
        let m = flat_metric(&[0.1, 0.2, 0.3, 0.4], 2);
        let delta = Tensor::from_fn(vec![Slot::Up, Slot::Down], vec![4, 4], |i| {
            m.g.data[0].constant_like(if i[0] == i[1] { 1.0 } else { 0.0 })
        });
        assert_eq!(delta.trace(0, 1).unwrap().data()[0].value(), 4.0);
        assert_eq!(m.g.trace_free(&m).unwrap().max_abs_coeffs(), 0.0);
        assert_eq!(m.g.antisymmetrize(&[0, 1]).unwrap().max_abs_coeffs(), 0.0);
    }

    #[test]
    fn inverse_is_exact_in_all_coefficients() {
        let m = conformally_flat(&[0.3, -0.2, 0.1], 4);
        let prod = contract(&m.g, 1, &m.ginv, 0).unwrap();
        for a in 0..3 {
            for b in 0..3 {
                let want = if a == b { 1.0 } else { 0.0 };
                let d = prod.get(&[a, b]) + -want;
                assert!(d.max_abs() < 1e-12);
            }
        }
    }

    #[test]
    fn christoffel_of_conformally_flat_metric() {
        let p = [0.3, -0.2, 0.1];
        let m = conformally_flat(&p, 3);
        let dphi = [p[1], p[0], 0.0];
        for a in 0..3 {
            for b in 0..3 {
                for c in 0..3 {
                    let d = |i: usize, j: usize| if i == j { 1.0 } else { 0.0 };
                    let want = d(a, b) * dphi[c] + d(a, c) * dphi[b] - d(b, c) * dphi[a];
                    assert!((m.gamma.value(&[a, b, c]) - want).abs() < 1e-13);
                }
            }
        }
    }

    #[test]
    fn metric_is_parallel() {
        let m = conformally_flat(&[0.3, -0.2, 0.1, 0.05], 3);
        let c = Connections::levi_civita(&m);
        assert!(nabla(&m.g, &c).unwrap().max_abs_coeffs() < 1e-12);
        assert!(nabla(&m.ginv, &c).unwrap().max_abs_coeffs() < 1e-12);
    }

    #[test]
    fn missing_connection_is_reported() {
        let m = flat_metric(&[0.0, 0.0, 0.0], 2);
        let t = Tensor::zeros(vec![Slot::EndUp], vec![2], &m.g.data[0]);
        assert!(matches!(nabla(&t, &Connections::levi_civita(&m)), Err(Error::MissingConnection(_))));
    }

    #[test]
    fn permute_and_outer() {
        let x = Jet::seed_all(&[1.0, 2.0], 1);
        let v = Tensor::from_fn(vec![Slot::Up], vec![2], |i| x[i[0]].clone());
        let w = Tensor::from_fn(vec![Slot::Down], vec![2], |i| x[1 - i[0]].clone());
        let vw = v.outer(&w);
        let wv = vw.permute(&[1, 0]).unwrap();
        assert_eq!(vw.value(&[0, 1]), wv.value(&[1, 0]));
        assert_eq!(vw.trace(0, 1).unwrap().data()[0].value(), 1.0 * 2.0 + 2.0 * 1.0);
        assert!(vw.permute(&[0, 0]).is_err());
    }

    #[test]
    fn invert_rejects_singular() {
        let one = Jet::constant(1, 1, 1.0);
        let m = vec![vec![one.clone(), one.clone()], vec![one.clone(), one]];
        assert!(matches!(invert_matrix(&m), Err(Error::Singular(_))));
    }
}
