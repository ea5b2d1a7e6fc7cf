//! Truncated Taylor jets: value plus exact partial derivatives to order <= 3.
//!
//! A jet carries the value of a function at a point together with its
//! gradient, symmetric Hessian, and fully symmetric third-derivative tensor,
//! truncated at the requested order. Arithmetic on jets propagates
//! derivatives exactly (truncated Leibniz/Faa di Bruno rules), which is what
//! lets every residual in this crate be computed without finite differences.
//!
//! Symmetric blocks are stored packed: the Hessian holds entries `i <= j`,
//! the third block entries `i <= j <= k`.

use std::ops::{Add, Mul, Neg, Sub};

use crate::error::{Error, Result};
use crate::scalar::Real;

pub const MAX_ORDER: usize = 3;

#[derive(Debug, Clone, PartialEq)]
pub struct Jet<T> {
    n: usize,
    order: usize,
    v: T,
    d1: Vec<T>,
    d2: Vec<T>,
    d3: Vec<T>,
}

fn s2(n: usize) -> usize {
    n * (n + 1) / 2
}

fn s3(n: usize) -> usize {
    n * (n + 1) * (n + 2) / 6
}

#[inline]
fn idx2(mut i: usize, mut j: usize) -> usize {
    if i > j {
        std::mem::swap(&mut i, &mut j);
    }
    j * (j + 1) / 2 + i
}

#[inline]
fn idx3(i: usize, j: usize, k: usize) -> usize {
    let mut a = [i, j, k];
    a.sort_unstable();
    a[2] * (a[2] + 1) * (a[2] + 2) / 6 + a[1] * (a[1] + 1) / 2 + a[0]
}

impl<T: Real> Jet<T> {
    pub fn zero(n: usize, order: usize) -> Self {
        assert!(order <= MAX_ORDER, "jet order must be <= {MAX_ORDER}");
        Jet {
            n,
            order,
            v: T::zero(),
            d1: if order >= 1 { vec![T::zero(); n] } else { Vec::new() },
            d2: if order >= 2 { vec![T::zero(); s2(n)] } else { Vec::new() },
            d3: if order >= 3 { vec![T::zero(); s3(n)] } else { Vec::new() },
        }
    }

    pub fn constant(n: usize, order: usize, v: T) -> Self {
        let mut j = Jet::zero(n, order);
        j.v = v;
        j
    }

    /// Jet of the coordinate function `u_i` at a point where it equals `v`.
    pub fn coordinate(n: usize, order: usize, i: usize, v: T) -> Self {
        let mut j = Jet::zero(n, order);
        j.v = v;
        if order >= 1 {
            j.d1[i] = T::one();
        }
        j
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn value(&self) -> T {
        self.v
    }

    pub fn grad(&self, i: usize) -> T {
        debug_assert!(self.order >= 1);
        self.d1[i]
    }

    pub fn hess(&self, i: usize, j: usize) -> T {
        debug_assert!(self.order >= 2);
        self.d2[idx2(i, j)]
    }

    pub fn third(&self, i: usize, j: usize, k: usize) -> T {
        debug_assert!(self.order >= 3);
        self.d3[idx3(i, j, k)]
    }

    pub fn set_grad(&mut self, i: usize, x: T) {
        self.d1[i] = x;
    }

    pub fn set_hess(&mut self, i: usize, j: usize, x: T) {
        self.d2[idx2(i, j)] = x;
    }

    pub fn set_third(&mut self, i: usize, j: usize, k: usize, x: T) {
        self.d3[idx3(i, j, k)] = x;
    }

    /// Drop derivative information above `order`.
    pub fn truncated(&self, order: usize) -> Jet<T> {
        let order = order.min(self.order);
        Jet {
            n: self.n,
            order,
            v: self.v,
            d1: if order >= 1 { self.d1.clone() } else { Vec::new() },
            d2: if order >= 2 { self.d2.clone() } else { Vec::new() },
            d3: if order >= 3 { self.d3.clone() } else { Vec::new() },
        }
    }

    /// Jet of the partial derivative along coordinate `j`, one order lower.
    ///
    /// This is exact: the needed coefficients are already present in `self`.
    pub fn deriv(&self, j: usize) -> Jet<T> {
        assert!(
            self.order >= 1,
            "cannot extract a derivative from an order-0 jet"
        );
        let order = self.order - 1;
        let mut out = Jet::zero(self.n, order);
        out.v = self.d1[j];
        if order >= 1 {
            for i in 0..self.n {
                out.d1[i] = self.hess(i, j);
            }
        }
        if order >= 2 {
            for a in 0..self.n {
                for b in a..self.n {
                    out.d2[idx2(a, b)] = self.third(a, b, j);
                }
            }
        }
        out
    }

    pub fn scale(&self, c: T) -> Jet<T> {
        let mut out = self.clone();
        out.v = out.v * c;
        for x in &mut out.d1 {
            *x = *x * c;
        }
        for x in &mut out.d2 {
            *x = *x * c;
        }
        for x in &mut out.d3 {
            *x = *x * c;
        }
        out
    }

    fn binop(&self, rhs: &Jet<T>, f: impl Fn(T, T) -> T) -> Jet<T> {
        debug_assert_eq!(self.n, rhs.n, "jet dimension mismatch");
        let order = self.order.min(rhs.order);
        let mut out = Jet::zero(self.n, order);
        out.v = f(self.v, rhs.v);
        for i in 0..out.d1.len() {
            out.d1[i] = f(self.d1[i], rhs.d1[i]);
        }
        for i in 0..out.d2.len() {
            out.d2[i] = f(self.d2[i], rhs.d2[i]);
        }
        for i in 0..out.d3.len() {
            out.d3[i] = f(self.d3[i], rhs.d3[i]);
        }
        out
    }

    pub fn mul_jet(&self, g: &Jet<T>) -> Jet<T> {
        debug_assert_eq!(self.n, g.n, "jet dimension mismatch");
        let order = self.order.min(g.order);
        let n = self.n;
        let f = self;
        let mut out = Jet::zero(n, order);
        out.v = f.v * g.v;
        if order >= 1 {
            for i in 0..n {
                out.d1[i] = f.d1[i] * g.v + f.v * g.d1[i];
            }
        }
        if order >= 2 {
            for i in 0..n {
                for j in i..n {
                    out.d2[idx2(i, j)] = f.hess(i, j) * g.v
                        + f.d1[i] * g.d1[j]
                        + f.d1[j] * g.d1[i]
                        + f.v * g.hess(i, j);
                }
            }
        }
        if order >= 3 {
            for i in 0..n {
                for j in i..n {
                    for k in j..n {
                        out.d3[idx3(i, j, k)] = f.third(i, j, k) * g.v
                            + f.hess(i, j) * g.d1[k]
                            + f.hess(i, k) * g.d1[j]
                            + f.hess(j, k) * g.d1[i]
                            + f.d1[i] * g.hess(j, k)
                            + f.d1[j] * g.hess(i, k)
                            + f.d1[k] * g.hess(i, j)
                            + f.v * g.third(i, j, k);
                    }
                }
            }
        }
        out
    }

    /// Compose with a univariate function given by its derivatives
    /// `u = [f(v), f'(v), f''(v), f'''(v)]` at the jet's value.
    pub fn compose(&self, u: [T; 4]) -> Jet<T> {
        let n = self.n;
        let h = self;
        let mut out = Jet::zero(n, self.order);
        out.v = u[0];
        if self.order >= 1 {
            for i in 0..n {
                out.d1[i] = u[1] * h.d1[i];
            }
        }
        if self.order >= 2 {
            for i in 0..n {
                for j in i..n {
                    out.d2[idx2(i, j)] = u[2] * h.d1[i] * h.d1[j] + u[1] * h.hess(i, j);
                }
            }
        }
        if self.order >= 3 {
            for i in 0..n {
                for j in i..n {
                    for k in j..n {
                        out.d3[idx3(i, j, k)] = u[3] * h.d1[i] * h.d1[j] * h.d1[k]
                            + u[2]
                                * (h.d1[i] * h.hess(j, k)
                                    + h.d1[j] * h.hess(i, k)
                                    + h.d1[k] * h.hess(i, j))
                            + u[1] * h.third(i, j, k);
                    }
                }
            }
        }
        out
    }

    pub fn recip(&self) -> Result<Jet<T>> {
        let v = self.v;
        if v == T::zero() {
            return Err(Error::Domain("reciprocal of zero".into()));
        }
        let iv = T::one() / v;
        let two = T::from_f64_lossy(2.0);
        let six = T::from_f64_lossy(6.0);
        Ok(self.compose([iv, -iv * iv, two * iv * iv * iv, -six * iv * iv * iv * iv]))
    }

    pub fn ln(&self) -> Result<Jet<T>> {
        let v = self.v;
        if v <= T::zero() {
            return Err(Error::Domain(format!("log of non-positive value {v}")));
        }
        let iv = T::one() / v;
        let two = T::from_f64_lossy(2.0);
        Ok(self.compose([v.ln(), iv, -iv * iv, two * iv * iv * iv]))
    }

    pub fn exp(&self) -> Jet<T> {
        let w = self.v.exp();
        self.compose([w, w, w, w])
    }

    pub fn sqrt(&self) -> Result<Jet<T>> {
        let v = self.v;
        if v <= T::zero() {
            return Err(Error::Domain(format!("sqrt of non-positive value {v}")));
        }
        let s = v.sqrt();
        let half = T::from_f64_lossy(0.5);
        let d1 = half / s;
        let d2 = -half * half / (s * v);
        let d3 = T::from_f64_lossy(0.375) / (s * v * v);
        Ok(self.compose([s, d1, d2, d3]))
    }

    pub fn sin(&self) -> Jet<T> {
        let (s, c) = (self.v.sin(), self.v.cos());
        self.compose([s, c, -s, -c])
    }

    pub fn cos(&self) -> Jet<T> {
        let (s, c) = (self.v.sin(), self.v.cos());
        self.compose([c, -s, -c, s])
    }

    pub fn tanh(&self) -> Jet<T> {
        let th = self.v.tanh();
        let sech2 = T::one() - th * th;
        let two = T::from_f64_lossy(2.0);
        let six = T::from_f64_lossy(6.0);
        // d/dv sech^2 = -2 th sech^2 ; d^2/dv^2 sech^2 = sech^2 (6 th^2 - 2)
        self.compose([th, sech2, -two * th * sech2, sech2 * (six * th * th - two)])
    }

    /// Real power with constant exponent; requires a positive base.
    pub fn powf(&self, r: T) -> Result<Jet<T>> {
        let v = self.v;
        if v <= T::zero() {
            return Err(Error::Domain(format!(
                "non-integer power of non-positive base {v}"
            )));
        }
        let one = T::one();
        let u0 = v.powf(r);
        let u1 = r * v.powf(r - one);
        let u2 = r * (r - one) * v.powf(r - one - one);
        let u3 = r * (r - one) * (r - one - one) * v.powf(r - one - one - one);
        Ok(self.compose([u0, u1, u2, u3]))
    }

    /// Integer power by repeated multiplication; valid for any base (negative
    /// exponents require a nonzero value).
    pub fn powi(&self, k: i64) -> Result<Jet<T>> {
        if k == 0 {
            return Ok(Jet::constant(self.n, self.order, T::one()));
        }
        let base = if k < 0 { self.recip()? } else { self.clone() };
        let mut out = base.clone();
        for _ in 1..k.unsigned_abs() {
            out = out.mul_jet(&base);
        }
        Ok(out)
    }

    /// Largest absolute coefficient; a crude magnitude for tolerance scaling.
    pub fn max_abs(&self) -> T {
        let mut m = self.v.abs();
        for x in self.d1.iter().chain(&self.d2).chain(&self.d3) {
            m = m.max(x.abs());
        }
        m
    }

    /// Relative symmetry defect of the stored blocks. Packed storage is
    /// symmetric by construction, so this is zero; it exists as an interface
    /// guarantee for consumers that unpack blocks.
    pub fn symmetry_defect(&self) -> T {
        T::zero()
    }
}

impl<T: Real> Add for Jet<T> {
    type Output = Jet<T>;
    fn add(self, rhs: Jet<T>) -> Jet<T> {
        self.binop(&rhs, |a, b| a + b)
    }
}

impl<T: Real> Add for &Jet<T> {
    type Output = Jet<T>;
    fn add(self, rhs: &Jet<T>) -> Jet<T> {
        self.binop(rhs, |a, b| a + b)
    }
}

impl<T: Real> Sub for Jet<T> {
    type Output = Jet<T>;
    fn sub(self, rhs: Jet<T>) -> Jet<T> {
        self.binop(&rhs, |a, b| a - b)
    }
}

impl<T: Real> Sub for &Jet<T> {
    type Output = Jet<T>;
    fn sub(self, rhs: &Jet<T>) -> Jet<T> {
        self.binop(rhs, |a, b| a - b)
    }
}

impl<T: Real> Mul for &Jet<T> {
    type Output = Jet<T>;
    fn mul(self, rhs: &Jet<T>) -> Jet<T> {
        self.mul_jet(rhs)
    }
}

impl<T: Real> Neg for Jet<T> {
    type Output = Jet<T>;
    fn neg(self) -> Jet<T> {
        self.scale(-T::one())
    }
}

impl<T: Real> Neg for &Jet<T> {
    type Output = Jet<T>;
    fn neg(self) -> Jet<T> {
        self.scale(-T::one())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) {
        assert!((a - b).abs() <= tol * (1.0 + b.abs()), "{a} vs {b}");
    }

    #[test]
    fn product_rule_example() {
        // f = u1*u2 at (2,3): value 6, gradient (3,2)
        let n = 2;
        let x = Jet::<f64>::coordinate(n, 1, 0, 2.0);
        let y = Jet::<f64>::coordinate(n, 1, 1, 3.0);
        let f = &x * &y;
        assert_eq!(f.value(), 6.0);
        assert_eq!(f.grad(0), 3.0);
        assert_eq!(f.grad(1), 2.0);
    }

    #[test]
    fn log_second_order() {
        // f = log(u2) at (0,1): value 0, d2 = 1, d22 = -1
        let y = Jet::<f64>::coordinate(2, 2, 1, 1.0);
        let f = y.ln().unwrap();
        assert_eq!(f.value(), 0.0);
        assert_eq!(f.grad(1), 1.0);
        assert_eq!(f.hess(1, 1), -1.0);
        assert_eq!(f.grad(0), 0.0);
    }

    #[test]
    fn quarter_square_log_square_at_e() {
        // h(t) = t^2 log(t^2) / 4 at t = e, against a symbolic oracle:
        // h = e^2/2, h' = 3e/2, h'' = 5/2, h''' = 1/e.
        let e = std::f64::consts::E;
        let t = Jet::<f64>::coordinate(1, 3, 0, e);
        let t2 = t.mul_jet(&t);
        let h = t2.mul_jet(&t2.ln().unwrap()).scale(0.25);
        close(h.value(), e * e / 2.0, 1e-14);
        close(h.grad(0), 1.5 * e, 1e-14);
        close(h.hess(0, 0), 2.5, 1e-14);
        close(h.third(0, 0, 0), 1.0 / e, 1e-14);
    }

    #[test]
    fn derivative_extraction_consistent() {
        // d/du1 of u1^2 * u2 should have jets matching 2 u1 u2
        let x = Jet::<f64>::coordinate(2, 3, 0, 1.3);
        let y = Jet::<f64>::coordinate(2, 3, 1, -0.7);
        let f = (&(&x * &x) * &y).deriv(0);
        let g = (&x * &y).scale(2.0).truncated(2);
        assert_eq!(f.order(), 2);
        close(f.value(), g.value(), 1e-14);
        close(f.grad(0), g.grad(0), 1e-14);
        close(f.grad(1), g.grad(1), 1e-14);
        close(f.hess(0, 1), g.hess(0, 1), 1e-14);
    }

    #[test]
    fn third_order_chain_rule_vs_known_expansion() {
        // f(u) = exp(sin(u)) at u0 = 0.4, third derivative:
        // f''' = e^{sin u} (cos^3 u - 3 sin u cos u - cos u)
        let u0: f64 = 0.4;
        let u = Jet::<f64>::coordinate(1, 3, 0, u0);
        let f = u.sin().exp();
        let (s, c) = (u0.sin(), u0.cos());
        let expect = s.exp() * (c * c * c - 3.0 * s * c - c);
        close(f.third(0, 0, 0), expect, 1e-13);
    }

    #[test]
    fn domain_errors_surface() {
        let u = Jet::<f64>::coordinate(1, 1, 0, -2.0);
        assert!(u.ln().is_err());
        assert!(u.sqrt().is_err());
        assert!(u.powf(0.5).is_err());
        assert!(u.powi(-2).is_ok());
        let z = Jet::<f64>::constant(1, 1, 0.0);
        assert!(z.recip().is_err());
    }
}
