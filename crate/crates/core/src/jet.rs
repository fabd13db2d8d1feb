//! Truncated multivariate Taylor series ("jets") at a base point.
//!
//! A jet of order `K` in `n` variables stores the Taylor coefficients
//! `c[α] = ∂^α f(p) / α!` for every multi-index with `|α| ≤ K`. Coefficients are
//! kept densely in graded lexicographic order: all monomials of degree 0, then
//! degree 1, and so on; inside one degree the exponent of variable 0 decreases
//! first, then variable 1, etc. For two variables the order is
//! `1, x0, x1, x0², x0x1, x1², ...`.
//!
//! Because the ordering is graded, a jet of order `k < K` is exactly the prefix
//! of the same function's order-`K` jet. Differentiation drops one order, and
//! binary operations truncate to the smaller order of their operands.

use std::collections::HashMap;
use std::fmt;
use std::ops::{Add, AddAssign, Mul, Neg, Sub, SubAssign};
use std::sync::{Arc, Mutex, OnceLock};

use crate::error::{Error, Result};

/// Number of monomials of total degree `≤ order` in `nvars` variables.
pub fn coeff_count(nvars: usize, order: usize) -> usize {
    binomial(nvars + order, order)
}

fn binomial(n: usize, k: usize) -> usize {
    let k = k.min(n - k.min(n));
    let mut r: u128 = 1;
    for i in 0..k {
        r = r * (n - i) as u128 / (i + 1) as u128;
    }
    r as usize
}

/// Precomputed index tables for one `(nvars, order)` pair.
pub struct Basis {
    nvars: usize,
    order: usize,
    exps: Vec<u8>,
    degree_start: Vec<usize>,
    lookup: HashMap<Vec<u8>, usize>,
    mul: Vec<(u32, u32, u32)>,
    mul_end: Vec<usize>,
    raise: Vec<u32>,
    alpha_factorial: Vec<f64>,
}

const NONE: u32 = u32::MAX;

fn monomials_of_degree(nvars: usize, degree: usize, out: &mut Vec<Vec<u8>>) {
    fn rec(prefix: &mut Vec<u8>, remaining: usize, left: usize, out: &mut Vec<Vec<u8>>) {
        if left == 1 {
            prefix.push(remaining as u8);
            out.push(prefix.clone());
            prefix.pop();
            return;
        }
        for e in (0..=remaining).rev() {
            prefix.push(e as u8);
            rec(prefix, remaining - e, left - 1, out);
            prefix.pop();
        }
    }
    if nvars == 0 {
        if degree == 0 {
            out.push(Vec::new());
        }
        return;
    }
    rec(&mut Vec::with_capacity(nvars), degree, nvars, out);
}

impl Basis {
    fn build(nvars: usize, order: usize) -> Basis {
        let mut monos = Vec::new();
        let mut degree_start = Vec::with_capacity(order + 2);
        for d in 0..=order {
            degree_start.push(monos.len());
            monomials_of_degree(nvars, d, &mut monos);
        }
        degree_start.push(monos.len());
        let len = monos.len();
        let lookup: HashMap<Vec<u8>, usize> =
            monos.iter().enumerate().map(|(i, m)| (m.clone(), i)).collect();

        let mut mul = Vec::new();
        let mut mul_end = vec![0usize; order + 1];
        let mut beta = vec![0u8; nvars];
        let mut rest = vec![0u8; nvars];
        for (o, alpha) in monos.iter().enumerate() {
            // Enumerate every β ≤ α componentwise.
            beta.iter_mut().for_each(|b| *b = 0);
            loop {
                for v in 0..nvars {
                    rest[v] = alpha[v] - beta[v];
                }
                mul.push((lookup[&beta] as u32, lookup[&rest] as u32, o as u32));
                let mut v = 0;
                while v < nvars {
                    if beta[v] < alpha[v] {
                        beta[v] += 1;
                        break;
                    }
                    beta[v] = 0;
                    v += 1;
                }
                if v == nvars {
                    break;
                }
            }
            let deg: usize = alpha.iter().map(|&e| e as usize).sum();
            for k in deg..=order {
                mul_end[k] = mul.len();
            }
        }
        // mul_end[k] must count entries with out-degree ≤ k; entries are
        // appended in graded order so the running maximum is correct.
        for k in 0..=order {
            mul_end[k] = mul.iter().take_while(|t| (t.2 as usize) < degree_start[k + 1]).count();
        }

        let mut raise = vec![NONE; nvars * len];
        for (idx, alpha) in monos.iter().enumerate() {
            let deg: usize = alpha.iter().map(|&e| e as usize).sum();
            if deg < order {
                for v in 0..nvars {
                    let mut up = alpha.clone();
                    up[v] += 1;
                    raise[v * len + idx] = lookup[&up] as u32;
                }
            }
        }
        let alpha_factorial = monos
            .iter()
            .map(|a| a.iter().map(|&e| (1..=e as u32).map(f64::from).product::<f64>()).product())
            .collect();
        let exps = monos.concat();
        Basis { nvars, order, exps, degree_start, lookup, mul, mul_end, raise, alpha_factorial }
    }

    pub fn len(&self) -> usize {
        self.degree_start[self.order + 1]
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn exponents(&self, idx: usize) -> &[u8] {
        &self.exps[idx * self.nvars..(idx + 1) * self.nvars]
    }

    pub fn index_of(&self, alpha: &[u8]) -> Option<usize> {
        self.lookup.get(alpha).copied()
    }
}

type BasisCache = Mutex<HashMap<(usize, usize), Arc<Basis>>>;

/// Shared index tables for `(nvars, order)`; built once per process.
pub fn basis(nvars: usize, order: usize) -> Arc<Basis> {
    static CACHE: OnceLock<BasisCache> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    let mut guard = cache.lock().expect("basis cache poisoned");
    guard
        .entry((nvars, order))
        .or_insert_with(|| Arc::new(Basis::build(nvars, order)))
        .clone()
}

/// A truncated Taylor expansion of a scalar function at a base point.
#[derive(Clone)]
pub struct Jet {
    basis: Arc<Basis>,
    coeffs: Vec<f64>,
}

impl fmt::Debug for Jet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Jet")
            .field("nvars", &self.nvars())
            .field("order", &self.order())
            .field("coeffs", &self.coeffs)
            .finish()
    }
}

impl PartialEq for Jet {
    fn eq(&self, other: &Jet) -> bool {
        self.nvars() == other.nvars() && self.order() == other.order() && self.coeffs == other.coeffs
    }
}

impl Jet {
    pub fn zero(nvars: usize, order: usize) -> Jet {
        Jet::constant(nvars, order, 0.0)
    }

    pub fn constant(nvars: usize, order: usize, c: f64) -> Jet {
        let basis = basis(nvars, order);
        let mut coeffs = vec![0.0; basis.len()];
        coeffs[0] = c;
        Jet { basis, coeffs }
    }

    /// The coordinate function `x_i` expanded at `point`.
    pub fn variable(point: &[f64], i: usize, order: usize) -> Result<Jet> {
        let nvars = point.len();
        if i >= nvars {
            return Err(Error::IndexOutOfRange { index: i, nvars });
        }
        let mut j = Jet::constant(nvars, order, point[i]);
        if order >= 1 {
            // Degree-one monomials are x0, x1, ... in that order.
            j.coeffs[1 + i] = 1.0;
        }
        Ok(j)
    }

    /// All coordinate jets at `point`.
    pub fn seed_all(point: &[f64], order: usize) -> Vec<Jet> {
        (0..point.len()).map(|i| Jet::variable(point, i, order).expect("in range")).collect()
    }

    /// Builds a jet from raw graded-lex coefficients.
    pub fn from_coeffs(nvars: usize, order: usize, coeffs: Vec<f64>) -> Result<Jet> {
        let basis = basis(nvars, order);
        if coeffs.len() != basis.len() {
            return Err(Error::ShapeMismatch(format!(
                "expected {} coefficients, got {}",
                basis.len(),
                coeffs.len()
            )));
        }
        Ok(Jet { basis, coeffs })
    }

    pub fn nvars(&self) -> usize {
        self.basis.nvars
    }

    pub fn order(&self) -> usize {
        self.basis.order
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn basis(&self) -> &Basis {
        &self.basis
    }

    /// Value at the base point.
    pub fn value(&self) -> f64 {
        self.coeffs[0]
    }

    pub fn zero_like(&self) -> Jet {
        Jet { basis: self.basis.clone(), coeffs: vec![0.0; self.coeffs.len()] }
    }

    pub fn constant_like(&self, c: f64) -> Jet {
        let mut z = self.zero_like();
        z.coeffs[0] = c;
        z
    }

    /// Taylor coefficient of `x^α`.
    pub fn coeff(&self, alpha: &[u8]) -> Result<f64> {
        self.check_alpha(alpha)?;
        Ok(self.basis.index_of(alpha).map_or(0.0, |i| self.coeffs[i]))
    }

    /// `∂^α f(p)`, i.e. `α! · c[α]`.
    pub fn derivative(&self, alpha: &[u8]) -> Result<f64> {
        self.check_alpha(alpha)?;
        let idx = self.basis.index_of(alpha).expect("checked");
        Ok(self.basis.alpha_factorial[idx] * self.coeffs[idx])
    }

    fn check_alpha(&self, alpha: &[u8]) -> Result<()> {
        if alpha.len() != self.nvars() {
            return Err(Error::ShapeMismatch(format!(
                "multi-index of length {} for {} variables",
                alpha.len(),
                self.nvars()
            )));
        }
        let deg: usize = alpha.iter().map(|&e| e as usize).sum();
        if deg > self.order() {
            return Err(Error::OrderExhausted { needed: deg, available: self.order() });
        }
        Ok(())
    }

    pub fn truncate(&self, order: usize) -> Jet {
        if order >= self.order() {
            return self.clone();
        }
        let basis = basis(self.nvars(), order);
        let coeffs = self.coeffs[..basis.len()].to_vec();
        Jet { basis, coeffs }
    }

    /// Partial derivative in variable `i`; the result has one order less.
    pub fn partial(&self, i: usize) -> Result<Jet> {
        let nvars = self.nvars();
        if i >= nvars {
            return Err(Error::IndexOutOfRange { index: i, nvars });
        }
        if self.order() == 0 {
            return Err(Error::OrderExhausted { needed: 1, available: 0 });
        }
        let target = basis(nvars, self.order() - 1);
        let len = self.coeffs.len();
        let mut coeffs = vec![0.0; target.len()];
        for (idx, c) in coeffs.iter_mut().enumerate() {
            let up = self.basis.raise[i * len + idx] as usize;
            let e = self.basis.exps[up * nvars + i] as f64;
            *c = e * self.coeffs[up];
        }
        Ok(Jet { basis: target, coeffs })
    }

    pub fn max_abs(&self) -> f64 {
        self.coeffs.iter().fold(0.0f64, |m, c| m.max(c.abs()))
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.iter().all(|&c| c == 0.0)
    }

    fn is_constant(&self) -> bool {
        self.coeffs[1..].iter().all(|&c| c == 0.0)
    }

    pub fn scale(&self, s: f64) -> Jet {
        Jet { basis: self.basis.clone(), coeffs: self.coeffs.iter().map(|c| c * s).collect() }
    }

    fn assert_compatible(&self, other: &Jet) {
        assert_eq!(self.nvars(), other.nvars(), "jets over different variable counts");
    }

    fn product(&self, other: &Jet) -> Jet {
        self.assert_compatible(other);
        let (lo, hi) = if self.order() <= other.order() { (self, other) } else { (other, self) };
        let len = lo.coeffs.len();
        if lo.is_constant() {
            let c = lo.coeffs[0];
            return Jet { basis: lo.basis.clone(), coeffs: hi.coeffs[..len].iter().map(|x| x * c).collect() };
        }
        if hi.coeffs[1..len].iter().all(|&c| c == 0.0) {
            let c = hi.coeffs[0];
            return lo.scale(c);
        }
        let mut out = vec![0.0; len];
        let a = &lo.coeffs;
        let b = &hi.coeffs;
        for &(i, j, o) in &lo.basis.mul[..lo.basis.mul_end[lo.order()]] {
            out[o as usize] += a[i as usize] * b[j as usize];
        }
        Jet { basis: lo.basis.clone(), coeffs: out }
    }

    fn combine(&self, other: &Jet, sign: f64) -> Jet {
        self.assert_compatible(other);
        let (basis, len) = if self.order() <= other.order() {
            (self.basis.clone(), self.coeffs.len())
        } else {
            (other.basis.clone(), other.coeffs.len())
        };
        let coeffs = (0..len).map(|i| self.coeffs[i] + sign * other.coeffs[i]).collect();
        Jet { basis, coeffs }
    }

    /// Evaluates `Σ_k series[k] h^k` where `h = self − value` is nilpotent.
    fn compose(&self, series: &[f64]) -> Jet {
        let mut h = self.clone();
        h.coeffs[0] = 0.0;
        let k = series.len() - 1;
        let mut acc = self.constant_like(series[k]);
        for c in series[..k].iter().rev() {
            acc = acc.product(&h);
            acc.coeffs[0] += c;
        }
        acc
    }

    /// Taylor coefficients `f^(k)(a)/k!` of a univariate function, given its
    /// derivatives at `a`.
    fn series_from_derivatives(derivs: impl Iterator<Item = f64>) -> Vec<f64> {
        let mut fact = 1.0;
        derivs
            .enumerate()
            .map(|(k, d)| {
                if k > 0 {
                    fact *= k as f64;
                }
                d / fact
            })
            .collect()
    }

    pub fn recip(&self) -> Result<Jet> {
        let a = self.value();
        if a == 0.0 {
            return Err(Error::ZeroDivision);
        }
        // 1/(a+h) = Σ (-1)^k h^k / a^(k+1)
        let series: Vec<f64> = (0..=self.order()).map(|k| (-1f64).powi(k as i32) / a.powi(k as i32 + 1)).collect();
        Ok(self.compose(&series))
    }

    pub fn div(&self, other: &Jet) -> Result<Jet> {
        Ok(self * &other.recip()?)
    }

    /// Real power `self^r` for positive value.
    pub fn powf(&self, r: f64) -> Result<Jet> {
        let a = self.value();
        if a <= 0.0 {
            return Err(Error::OutOfDomain { op: "powf", value: a });
        }
        let mut series = Vec::with_capacity(self.order() + 1);
        let mut binom = 1.0;
        for k in 0..=self.order() {
            if k > 0 {
                binom *= (r - (k as f64 - 1.0)) / k as f64;
            }
            series.push(binom * a.powf(r - k as f64));
        }
        Ok(self.compose(&series))
    }

    pub fn sqrt(&self) -> Result<Jet> {
        let a = self.value();
        if a <= 0.0 {
            return Err(Error::OutOfDomain { op: "sqrt", value: a });
        }
        self.powf(0.5)
    }

    pub fn exp(&self) -> Jet {
        let e = self.value().exp();
        let series = Self::series_from_derivatives((0..=self.order()).map(|_| e));
        self.compose(&series)
    }

    pub fn ln(&self) -> Result<Jet> {
        let a = self.value();
        if a <= 0.0 {
            return Err(Error::OutOfDomain { op: "ln", value: a });
        }
        let mut series = vec![a.ln()];
        for k in 1..=self.order() {
            series.push((-1f64).powi(k as i32 + 1) / (k as f64 * a.powi(k as i32)));
        }
        Ok(self.compose(&series))
    }

    pub fn sin(&self) -> Jet {
        let (s, c) = self.value().sin_cos();
        let cycle = [s, c, -s, -c];
        let series = Self::series_from_derivatives((0..=self.order()).map(|k| cycle[k % 4]));
        self.compose(&series)
    }

    pub fn cos(&self) -> Jet {
        let (s, c) = self.value().sin_cos();
        let cycle = [c, -s, -c, s];
        let series = Self::series_from_derivatives((0..=self.order()).map(|k| cycle[k % 4]));
        self.compose(&series)
    }

    pub fn powi(&self, p: u32) -> Jet {
        let mut acc = self.constant_like(1.0);
        for _ in 0..p {
            acc = acc.product(self);
        }
        acc
    }

    /// Divides by `x_var^m`, assuming the function is `O(x_var^m)`.
    ///
    /// Returns the quotient (order reduced by `m`) and the largest magnitude
    /// among the discarded coefficients of lower `x_var` degree, which must be
    /// negligible for the division to be meaningful. Requires the base point to
    /// have `x_var = 0`.
    pub fn divide_by_var_power(&self, var: usize, m: usize) -> Result<(Jet, f64)> {
        let nvars = self.nvars();
        if var >= nvars {
            return Err(Error::IndexOutOfRange { index: var, nvars });
        }
        if m > self.order() {
            return Err(Error::OrderExhausted { needed: m, available: self.order() });
        }
        let target = basis(nvars, self.order() - m);
        let mut coeffs = vec![0.0; target.len()];
        let mut alpha = vec![0u8; nvars];
        for (idx, c) in coeffs.iter_mut().enumerate() {
            alpha.copy_from_slice(target.exponents(idx));
            alpha[var] += m as u8;
            *c = self.coeffs[self.basis.index_of(&alpha).expect("degree within order")];
        }
        let mut dropped = 0.0f64;
        for (idx, c) in self.coeffs.iter().enumerate() {
            if (self.basis.exponents(idx)[var] as usize) < m {
                dropped = dropped.max(c.abs());
            }
        }
        Ok((Jet { basis: target, coeffs }, dropped))
    }

    /// Multiplies by `(x_var − p_var)^m`, raising the order by `m`. Exact: the
    /// product is known to the new order.
    pub fn mul_var_power(&self, var: usize, m: usize) -> Result<Jet> {
        let nvars = self.nvars();
        if var >= nvars {
            return Err(Error::IndexOutOfRange { index: var, nvars });
        }
        let target = basis(nvars, self.order() + m);
        let mut coeffs = vec![0.0; target.len()];
        let mut alpha = vec![0u8; nvars];
        for (idx, c) in self.coeffs.iter().enumerate() {
            alpha.copy_from_slice(self.basis.exponents(idx));
            alpha[var] += m as u8;
            coeffs[target.index_of(&alpha).expect("degree within order")] = *c;
        }
        Ok(Jet { basis: target, coeffs })
    }

    /// Restricts to the slice `x_var = p_var`, dropping that variable.
    pub fn restrict_var(&self, var: usize) -> Result<Jet> {
        let nvars = self.nvars();
        if var >= nvars || nvars == 1 {
            return Err(Error::IndexOutOfRange { index: var, nvars });
        }
        let target = basis(nvars - 1, self.order());
        let mut coeffs = vec![0.0; target.len()];
        let mut alpha = Vec::with_capacity(nvars - 1);
        for (idx, c) in self.coeffs.iter().enumerate() {
            let e = self.basis.exponents(idx);
            if e[var] != 0 {
                continue;
            }
            alpha.clear();
            alpha.extend(e.iter().enumerate().filter(|&(v, _)| v != var).map(|(_, &x)| x));
            coeffs[target.index_of(&alpha).expect("same degree")] = *c;
        }
        Ok(Jet { basis: target, coeffs })
    }

    /// Re-expresses the jet in a larger variable set: variable `i` becomes
    /// variable `map[i]` of the target.
    pub fn embed(&self, nvars: usize, map: &[usize]) -> Result<Jet> {
        if map.len() != self.nvars() || map.iter().any(|&m| m >= nvars) {
            return Err(Error::ShapeMismatch("embedding map".into()));
        }
        let target = basis(nvars, self.order());
        let mut coeffs = vec![0.0; target.len()];
        let mut alpha = vec![0u8; nvars];
        for (idx, c) in self.coeffs.iter().enumerate() {
            alpha.iter_mut().for_each(|a| *a = 0);
            for (v, &e) in self.basis.exponents(idx).iter().enumerate() {
                alpha[map[v]] += e;
            }
            coeffs[target.index_of(&alpha).expect("same degree")] += c;
        }
        Ok(Jet { basis: target, coeffs })
    }
}

/// Operation selector for [`jet_arith`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum JetOp {
    Add,
    Sub,
    Mul,
    Div,
    Sqrt,
    Sin,
    Cos,
    Exp,
    Pow(f64),
}

/// Dispatches one arithmetic operation over jets sharing `(nvars, order)`.
pub fn jet_arith(op: JetOp, args: &[&Jet]) -> Result<Jet> {
    let arity = match op {
        JetOp::Add | JetOp::Sub | JetOp::Mul | JetOp::Div => 2,
        _ => 1,
    };
    if args.len() != arity {
        return Err(Error::ShapeMismatch(format!("{op:?} takes {arity} arguments")));
    }
    if args.iter().any(|a| a.nvars() != args[0].nvars() || a.order() != args[0].order()) {
        return Err(Error::ShapeMismatch("jets must share variable count and order".into()));
    }
    let a = args[0];
    Ok(match op {
        JetOp::Add => a + args[1],
        JetOp::Sub => a - args[1],
        JetOp::Mul => a * args[1],
        JetOp::Div => a.div(args[1])?,
        JetOp::Sqrt => a.sqrt()?,
        JetOp::Sin => a.sin(),
        JetOp::Cos => a.cos(),
        JetOp::Exp => a.exp(),
        JetOp::Pow(r) => a.powf(r)?,
    })
}

impl<'a> Add<&'a Jet> for &'a Jet {
    type Output = Jet;
    fn add(self, rhs: &Jet) -> Jet {
        self.combine(rhs, 1.0)
    }
}

impl<'a> Sub<&'a Jet> for &'a Jet {
    type Output = Jet;
    fn sub(self, rhs: &Jet) -> Jet {
        self.combine(rhs, -1.0)
    }
}

impl<'a> Mul<&'a Jet> for &'a Jet {
    type Output = Jet;
    fn mul(self, rhs: &Jet) -> Jet {
        self.product(rhs)
    }
}

impl Add for Jet {
    type Output = Jet;
    fn add(self, rhs: Jet) -> Jet {
        &self + &rhs
    }
}

impl Sub for Jet {
    type Output = Jet;
    fn sub(self, rhs: Jet) -> Jet {
        &self - &rhs
    }
}

impl Mul for Jet {
    type Output = Jet;
    fn mul(self, rhs: Jet) -> Jet {
        &self * &rhs
    }
}

impl Neg for &Jet {
    type Output = Jet;
    fn neg(self) -> Jet {
        self.scale(-1.0)
    }
}

impl Neg for Jet {
    type Output = Jet;
    fn neg(self) -> Jet {
        self.scale(-1.0)
    }
}

impl Add<f64> for &Jet {
    type Output = Jet;
    fn add(self, rhs: f64) -> Jet {
        let mut j = self.clone();
        j.coeffs[0] += rhs;
        j
    }
}

impl Mul<f64> for &Jet {
    type Output = Jet;
    fn mul(self, rhs: f64) -> Jet {
        self.scale(rhs)
    }
}

impl Mul<f64> for Jet {
    type Output = Jet;
    fn mul(self, rhs: f64) -> Jet {
        self.scale(rhs)
    }
}

impl AddAssign<&Jet> for Jet {
    fn add_assign(&mut self, rhs: &Jet) {
        if rhs.order() >= self.order() {
            for (a, b) in self.coeffs.iter_mut().zip(&rhs.coeffs) {
                *a += b;
            }
        } else {
            *self = &*self + rhs;
        }
    }
}

impl SubAssign<&Jet> for Jet {
    fn sub_assign(&mut self, rhs: &Jet) {
        if rhs.order() >= self.order() {
            for (a, b) in self.coeffs.iter_mut().zip(&rhs.coeffs) {
                *a -= b;
            }
        } else {
            *self = &*self - rhs;
        }
    }
}

impl Jet {
    /// `self += a * b` without allocating an intermediate when orders allow.
    pub fn add_product(&mut self, a: &Jet, b: &Jet) {
        let p = a * b;
        *self += &p;
    }
}
