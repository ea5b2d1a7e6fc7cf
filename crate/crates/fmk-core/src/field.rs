//! Component-function bundles over a chart.
//!
//! A field is a pure evaluation rule producing jets of a requested order at a
//! point. Fields are either backed by expressions or by exact composition of
//! other fields (products, inverses, covariant derivatives, brackets); both
//! kinds produce exact derivatives, so derived constructions like dual
//! connections can be differentiated again without precision loss.
//!
//! Index conventions, used consistently everywhere downstream:
//! * `MultField` stores structure functions `c^k_ij` symmetric in `(i, j)`;
//!   `(X o Y)^k = c^k_ij X^i Y^j`.
//! * `ConnField` stores Christoffel functions `G^k_ij` with the derivation
//!   index first: `(nabla_{d_i} d_j)^k = G^k_ij`.
//! * `EndoField` stores `A^k_j` with `(A X)^k = A^k_j X^j`.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::expr::{Expr, Params};
use crate::jet::Jet;
use crate::linalg::{condition_estimate, lu_solve_jets, COND_GATE};
use crate::scalar::Real;

type ScalarRule<T> = Arc<dyn Fn(&[T], usize) -> Result<Jet<T>> + Send + Sync>;
type BundleRule<T> = Arc<dyn Fn(&[T], usize) -> Result<Vec<Jet<T>>> + Send + Sync>;

#[derive(Clone)]
pub struct ScalarField<T> {
    n: usize,
    rule: ScalarRule<T>,
}

impl<T: Real> ScalarField<T> {
    pub fn from_expr(n: usize, expr: Expr, params: Arc<Params<T>>) -> Self {
        ScalarField {
            n,
            rule: Arc::new(move |p, order| expr.eval_jet(p, order, &params)),
        }
    }

    pub fn from_fn(
        n: usize,
        f: impl Fn(&[T], usize) -> Result<Jet<T>> + Send + Sync + 'static,
    ) -> Self {
        ScalarField { n, rule: Arc::new(f) }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn eval(&self, p: &[T], order: usize) -> Result<Jet<T>> {
        (self.rule)(p, order)
    }

    pub fn value(&self, p: &[T]) -> Result<T> {
        Ok(self.eval(p, 0)?.value())
    }
}

/// `n` scalar components in the chart frame, evaluated as one bundle.
#[derive(Clone)]
pub struct VectorField<T> {
    n: usize,
    rule: BundleRule<T>,
}

impl<T: Real> VectorField<T> {
    pub fn from_exprs(n: usize, comps: Vec<Expr>, params: Arc<Params<T>>) -> Result<Self> {
        if comps.len() != n {
            return Err(Error::Model(format!(
                "vector field needs {n} components, got {}",
                comps.len()
            )));
        }
        Ok(VectorField {
            n,
            rule: Arc::new(move |p, order| {
                comps
                    .iter()
                    .map(|e| e.eval_jet(p, order, &params))
                    .collect()
            }),
        })
    }

    pub fn from_fn(
        n: usize,
        f: impl Fn(&[T], usize) -> Result<Vec<Jet<T>>> + Send + Sync + 'static,
    ) -> Self {
        VectorField { n, rule: Arc::new(f) }
    }

    /// Constant coordinate field `d_i`.
    pub fn coordinate(n: usize, i: usize) -> Self {
        VectorField::from_fn(n, move |p, order| {
            Ok((0..n)
                .map(|k| {
                    Jet::constant(p.len(), order, if k == i { T::one() } else { T::zero() })
                })
                .collect())
        })
    }

    pub fn constant(n: usize, values: Vec<T>) -> Self {
        VectorField::from_fn(n, move |p, order| {
            Ok(values
                .iter()
                .map(|v| Jet::constant(p.len(), order, *v))
                .collect())
        })
    }

    pub fn zero(n: usize) -> Self {
        VectorField::constant(n, vec![T::zero(); n])
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn eval(&self, p: &[T], order: usize) -> Result<Vec<Jet<T>>> {
        (self.rule)(p, order)
    }

    pub fn values(&self, p: &[T]) -> Result<Vec<T>> {
        Ok(self.eval(p, 0)?.into_iter().map(|j| j.value()).collect())
    }

    /// Scale by a scalar field.
    pub fn scaled(&self, f: ScalarField<T>) -> VectorField<T> {
        let me = self.clone();
        VectorField::from_fn(self.n, move |p, order| {
            let s = f.eval(p, order)?;
            Ok(me.eval(p, order)?.iter().map(|c| c * &s).collect())
        })
    }

    pub fn add(&self, other: &VectorField<T>) -> VectorField<T> {
        let a = self.clone();
        let b = other.clone();
        VectorField::from_fn(self.n, move |p, order| {
            let x = a.eval(p, order)?;
            let y = b.eval(p, order)?;
            Ok(x.iter().zip(&y).map(|(u, v)| u + v).collect())
        })
    }

    pub fn sub(&self, other: &VectorField<T>) -> VectorField<T> {
        let a = self.clone();
        let b = other.clone();
        VectorField::from_fn(self.n, move |p, order| {
            let x = a.eval(p, order)?;
            let y = b.eval(p, order)?;
            Ok(x.iter().zip(&y).map(|(u, v)| u - v).collect())
        })
    }

    pub fn scale_const(&self, c: f64) -> VectorField<T> {
        let a = self.clone();
        VectorField::from_fn(self.n, move |p, order| {
            Ok(a.eval(p, order)?
                .into_iter()
                .map(|j| j.scale(T::from_f64_lossy(c)))
                .collect())
        })
    }
}

/// Packed rank-3 bundle of jets with layout `[k][i][j]`.
#[derive(Clone)]
pub struct Tensor3<T> {
    pub n: usize,
    pub data: Vec<Jet<T>>,
}

impl<T: Real> Tensor3<T> {
    pub fn new(n: usize, data: Vec<Jet<T>>) -> Self {
        debug_assert_eq!(data.len(), n * n * n);
        Tensor3 { n, data }
    }

    #[inline]
    pub fn get(&self, k: usize, i: usize, j: usize) -> &Jet<T> {
        &self.data[(k * self.n + i) * self.n + j]
    }
}

/// Multiplication on the tangent sheaf: structure functions plus a designated
/// unit field.
#[derive(Clone)]
pub struct MultField<T> {
    n: usize,
    c: Arc<dyn Fn(&[T], usize) -> Result<Tensor3<T>> + Send + Sync>,
    unit: VectorField<T>,
}

impl<T: Real> MultField<T> {
    /// Build from expression components `c[k][i][j]`. Storage is symmetrized
    /// by reading only the `i <= j` entry, so `c^k_ij = c^k_ji` holds exactly;
    /// use [`MultField::symmetry_defect_exprs`] to validate the raw input
    /// before construction.
    pub fn from_exprs(n: usize, comps: Vec<Vec<Vec<Expr>>>, params: Arc<Params<T>>) -> Result<Self> {
        if comps.len() != n || comps.iter().any(|m| m.len() != n || m.iter().any(|r| r.len() != n)) {
            return Err(Error::Model(format!(
                "multiplication needs {n}x{n}x{n} structure functions"
            )));
        }
        let c_comps = Arc::new(comps);
        let c = Arc::new(move |p: &[T], order: usize| {
            let mut data = Vec::with_capacity(n * n * n);
            for k in 0..n {
                for i in 0..n {
                    for j in 0..n {
                        let (a, b) = if i <= j { (i, j) } else { (j, i) };
                        data.push(c_comps[k][a][b].eval_jet(p, order, &params)?);
                    }
                }
            }
            Ok(Tensor3::new(n, data))
        });
        Ok(MultField {
            n,
            c,
            unit: VectorField::zero(n),
        })
    }

    pub fn with_unit(mut self, unit: VectorField<T>) -> Self {
        self.unit = unit;
        self
    }

    pub fn from_fn(
        n: usize,
        unit: VectorField<T>,
        f: impl Fn(&[T], usize) -> Result<Tensor3<T>> + Send + Sync + 'static,
    ) -> Self {
        MultField {
            n,
            c: Arc::new(f),
            unit,
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn unit(&self) -> &VectorField<T> {
        &self.unit
    }

    pub fn eval(&self, p: &[T], order: usize) -> Result<Tensor3<T>> {
        (self.c)(p, order)
    }

    /// Raw (pre-symmetrization) symmetry defect of declared expressions.
    pub fn symmetry_defect_exprs(
        n: usize,
        comps: &[Vec<Vec<Expr>>],
        params: &Params<T>,
        points: &[Vec<T>],
    ) -> Result<T> {
        let mut worst = T::zero();
        for p in points {
            for k in 0..n {
                for i in 0..n {
                    for j in i + 1..n {
                        let a = comps[k][i][j].eval_jet(p, 0, params)?.value();
                        let b = comps[k][j][i].eval_jet(p, 0, params)?.value();
                        worst = worst.max((a - b).abs());
                    }
                }
            }
        }
        Ok(worst)
    }
}

/// Christoffel functions `G^k_ij` (no symmetry assumed).
#[derive(Clone)]
pub struct ConnField<T> {
    n: usize,
    g: Arc<dyn Fn(&[T], usize) -> Result<Tensor3<T>> + Send + Sync>,
}

impl<T: Real> ConnField<T> {
    pub fn from_exprs(n: usize, comps: Vec<Vec<Vec<Expr>>>, params: Arc<Params<T>>) -> Result<Self> {
        if comps.len() != n || comps.iter().any(|m| m.len() != n || m.iter().any(|r| r.len() != n)) {
            return Err(Error::Model(format!(
                "connection needs {n}x{n}x{n} Christoffel functions"
            )));
        }
        Ok(ConnField {
            n,
            g: Arc::new(move |p, order| {
                let mut data = Vec::with_capacity(n * n * n);
                for k in 0..n {
                    for i in 0..n {
                        for j in 0..n {
                            data.push(comps[k][i][j].eval_jet(p, order, &params)?);
                        }
                    }
                }
                Ok(Tensor3::new(n, data))
            }),
        })
    }

    pub fn zero(n: usize) -> Self {
        ConnField::from_fn(n, move |p, order| {
            Ok(Tensor3::new(
                n,
                vec![Jet::zero(p.len(), order); n * n * n],
            ))
        })
    }

    pub fn from_fn(
        n: usize,
        f: impl Fn(&[T], usize) -> Result<Tensor3<T>> + Send + Sync + 'static,
    ) -> Self {
        ConnField { n, g: Arc::new(f) }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn eval(&self, p: &[T], order: usize) -> Result<Tensor3<T>> {
        (self.g)(p, order)
    }
}

/// Endomorphism-valued field `A^k_j`, layout `[k][j]`.
#[derive(Clone)]
pub struct EndoField<T> {
    n: usize,
    a: BundleRule<T>,
}

impl<T: Real> EndoField<T> {
    pub fn from_fn(
        n: usize,
        f: impl Fn(&[T], usize) -> Result<Vec<Jet<T>>> + Send + Sync + 'static,
    ) -> Self {
        EndoField { n, a: Arc::new(f) }
    }

    pub fn from_exprs(n: usize, comps: Vec<Vec<Expr>>, params: Arc<Params<T>>) -> Result<Self> {
        if comps.len() != n || comps.iter().any(|r| r.len() != n) {
            return Err(Error::Model(format!("endomorphism needs {n}x{n} components")));
        }
        Ok(EndoField {
            n,
            a: Arc::new(move |p, order| {
                let mut out = Vec::with_capacity(n * n);
                for row in &comps {
                    for e in row {
                        out.push(e.eval_jet(p, order, &params)?);
                    }
                }
                Ok(out)
            }),
        })
    }

    pub fn zero(n: usize) -> Self {
        EndoField::from_fn(n, move |p, order| {
            Ok(vec![Jet::zero(p.len(), order); n * n])
        })
    }

    pub fn identity(n: usize) -> Self {
        EndoField::from_fn(n, move |p, order| {
            let mut out = Vec::with_capacity(n * n);
            for k in 0..n {
                for j in 0..n {
                    out.push(Jet::constant(
                        p.len(),
                        order,
                        if k == j { T::one() } else { T::zero() },
                    ));
                }
            }
            Ok(out)
        })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn eval(&self, p: &[T], order: usize) -> Result<Vec<Jet<T>>> {
        (self.a)(p, order)
    }

    #[inline]
    pub fn entry<'a>(&self, jets: &'a [Jet<T>], k: usize, j: usize) -> &'a Jet<T> {
        &jets[k * self.n + j]
    }
}

// ---------------------------------------------------------------------------
// Pointwise jet combinators shared by algebra and connection code
// ---------------------------------------------------------------------------

/// `(X o Y)^k = c^k_ij X^i Y^j` on jets.
pub fn mul_jets<T: Real>(c: &Tensor3<T>, x: &[Jet<T>], y: &[Jet<T>]) -> Vec<Jet<T>> {
    let n = c.n;
    let order = x
        .iter()
        .chain(y.iter())
        .map(|j| j.order())
        .min()
        .unwrap_or(0)
        .min(c.data.iter().map(|j| j.order()).min().unwrap_or(0));
    let dim = x[0].dim();
    (0..n)
        .map(|k| {
            let mut acc = Jet::zero(dim, order);
            for i in 0..n {
                for j in 0..n {
                    let t = c.get(k, i, j).mul_jet(&x[i]).mul_jet(&y[j]);
                    acc = &acc + &t;
                }
            }
            acc
        })
        .collect()
}

/// Partial derivative of a jet bundle along coordinate `j` (one order lower).
pub fn deriv_jets<T: Real>(x: &[Jet<T>], j: usize) -> Vec<Jet<T>> {
    x.iter().map(|e| e.deriv(j)).collect()
}

/// Lie bracket `[X, Y]^i = X^j d_j Y^i - Y^j d_j X^i`, exact.
pub fn lie_bracket<T: Real>(x: &VectorField<T>, y: &VectorField<T>) -> VectorField<T> {
    let n = x.dim();
    let xf = x.clone();
    let yf = y.clone();
    VectorField::from_fn(n, move |p, order| {
        let xs = xf.eval(p, order + 1)?;
        let ys = yf.eval(p, order + 1)?;
        let mut out = Vec::with_capacity(n);
        for i in 0..n {
            let mut acc = Jet::zero(p.len(), order);
            for j in 0..n {
                let t1 = xs[j].truncated(order).mul_jet(&ys[i].deriv(j));
                let t2 = ys[j].truncated(order).mul_jet(&xs[i].deriv(j));
                acc = &acc + &(&t1 - &t2);
            }
            out.push(acc);
        }
        Ok(out)
    })
}

/// Product field `X o Y` for a multiplication `c`.
pub fn mul_vf<T: Real>(c: &MultField<T>, x: &VectorField<T>, y: &VectorField<T>) -> VectorField<T> {
    let cf = c.clone();
    let xf = x.clone();
    let yf = y.clone();
    VectorField::from_fn(c.dim(), move |p, order| {
        let ct = cf.eval(p, order)?;
        let xs = xf.eval(p, order)?;
        let ys = yf.eval(p, order)?;
        Ok(mul_jets(&ct, &xs, &ys))
    })
}

/// Jets of the inverse `V^{-1}` at a point: solves `(V o x) = e` with jet
/// entries, so derivatives come out of the linear algebra (implicit function
/// theorem) rather than any re-differencing.
pub fn invert_at<T: Real>(
    c: &MultField<T>,
    v: &VectorField<T>,
    p: &[T],
    order: usize,
) -> Result<Vec<Jet<T>>> {
    let n = c.dim();
    let ct = c.eval(p, order)?;
    let vs = v.eval(p, order)?;
    let unit = c.unit().eval(p, order)?;
    // M^k_j = c^k_ij V^i
    let mut m = vec![vec![Jet::zero(p.len(), order); n]; n];
    for k in 0..n {
        for j in 0..n {
            let mut acc = Jet::zero(p.len(), order);
            for i in 0..n {
                acc = &acc + &ct.get(k, i, j).mul_jet(&vs[i]);
            }
            m[k][j] = acc;
        }
    }
    let values: Vec<Vec<T>> = m
        .iter()
        .map(|row| row.iter().map(|j| j.value()).collect())
        .collect();
    let cond = condition_estimate(&values);
    if !(cond <= COND_GATE) {
        return Err(Error::NonInvertible(format!(
            "multiplication operator of the field has condition estimate {cond:.3e} (gate {COND_GATE:.1e})"
        )));
    }
    let sol = lu_solve_jets(&m, &[unit])?;
    Ok(sol.into_iter().next().unwrap())
}

/// Inverse as a field.
pub fn invert_vf<T: Real>(c: &MultField<T>, v: &VectorField<T>) -> VectorField<T> {
    let cf = c.clone();
    let vf = v.clone();
    VectorField::from_fn(c.dim(), move |p, order| invert_at(&cf, &vf, p, order))
}

/// Covariant derivative `nabla_X Y` in the chart frame.
pub fn nabla_vf<T: Real>(
    conn: &ConnField<T>,
    x: &VectorField<T>,
    y: &VectorField<T>,
) -> VectorField<T> {
    let n = conn.dim();
    let gf = conn.clone();
    let xf = x.clone();
    let yf = y.clone();
    VectorField::from_fn(n, move |p, order| {
        let g = gf.eval(p, order)?;
        let xs = xf.eval(p, order)?;
        let ys = yf.eval(p, order + 1)?;
        let mut out = Vec::with_capacity(n);
        for k in 0..n {
            let mut acc = Jet::zero(p.len(), order);
            for i in 0..n {
                // X^i d_i Y^k
                acc = &acc + &xs[i].truncated(order).mul_jet(&ys[k].deriv(i));
                for s in 0..n {
                    acc = &acc
                        + &g.get(k, i, s)
                            .mul_jet(&xs[i].truncated(order))
                            .mul_jet(&ys[s].truncated(order));
                }
            }
            out.push(acc);
        }
        Ok(out)
    })
}

/// Apply an endomorphism field to a vector field.
pub fn apply_endo<T: Real>(a: &EndoField<T>, x: &VectorField<T>) -> VectorField<T> {
    let n = a.dim();
    let af = a.clone();
    let xf = x.clone();
    VectorField::from_fn(n, move |p, order| {
        let aj = af.eval(p, order)?;
        let xs = xf.eval(p, order)?;
        let mut out = Vec::with_capacity(n);
        for k in 0..n {
            let mut acc = Jet::zero(p.len(), order);
            for j in 0..n {
                acc = &acc + &aj[k * n + j].mul_jet(&xs[j]);
            }
            out.push(acc);
        }
        Ok(out)
    })
}

// ---------------------------------------------------------------------------
// Finite differences: the independent cross-check oracle for jets
// ---------------------------------------------------------------------------

/// Central finite-difference check of orders 1 and 2 of a scalar rule
/// against its jets; returns the worst relative disagreement
/// `|AD - FD|/(1 + |AD|)`.
///
/// First derivatives are checked against value differences. Second
/// derivatives are checked against central differences of the first-order
/// jets at the same step: a pure 4-point value stencil at `h = 1e-5` carries
/// ~4e-6 relative roundoff in `f64`, which would drown the gate this check
/// has to clear, while differencing the (independently validated) gradients
/// keeps the full check at the pinned step with ~1e-10 headroom.
pub fn fd_crosscheck<T: Real>(
    f: &dyn Fn(&[T], usize) -> Result<Jet<T>>,
    p: &[T],
    h: f64,
) -> Result<T> {
    let n = p.len();
    let hh = T::from_f64_lossy(h);
    let shift = |p: &[T], i: usize, s: f64| -> Vec<T> {
        let mut q = p.to_vec();
        q[i] = q[i] + T::from_f64_lossy(s) * hh;
        q
    };
    let two = T::from_f64_lossy(2.0);
    let mut worst = T::zero();
    let mut rel = |ad: T, fd: T| {
        let r = (ad - fd).abs() / (T::one() + ad.abs());
        if r > worst {
            worst = r;
        }
    };
    let jets = f(p, 2)?;
    for i in 0..n {
        let fp = f(&shift(p, i, 1.0), 1)?;
        let fm = f(&shift(p, i, -1.0), 1)?;
        rel(jets.grad(i), (fp.value() - fm.value()) / (two * hh));
        for j in 0..n {
            rel(jets.hess(i, j), (fp.grad(j) - fm.grad(j)) / (two * hh));
        }
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse_expr;

    fn params() -> Arc<Params<f64>> {
        Arc::new(Params::new())
    }

    fn vf(n: usize, comps: &[&str]) -> VectorField<f64> {
        let exprs = comps
            .iter()
            .map(|s| parse_expr(s, n, &[]).unwrap())
            .collect();
        VectorField::from_exprs(n, exprs, params()).unwrap()
    }

    #[test]
    fn bracket_antisymmetry_and_coordinate_case() {
        // [X, X] = 0
        let x = vf(2, &["u1*u2", "sin(u1)"]);
        let b = lie_bracket(&x, &x);
        let v = b.values(&[0.7, 1.3]).unwrap();
        assert!(v.iter().all(|z| z.abs() < 1e-15));

        // X = u1 d1, Y = d1: [X, Y] = -d1
        let x = vf(1, &["u1"]);
        let y = vf(1, &["1"]);
        let v = lie_bracket(&x, &y).values(&[2.2]).unwrap();
        assert!((v[0] + 1.0).abs() < 1e-15);
    }

    #[test]
    fn inverse_field_jets_match_closed_form() {
        // semisimple n=2: V = (u1, u2), V^{-1} = (1/u1, 1/u2)
        let n = 2;
        let c = MultField::from_fn(
            n,
            VectorField::constant(n, vec![1.0, 1.0]),
            move |p, order| {
                let mut data = Vec::new();
                for k in 0..n {
                    for i in 0..n {
                        for j in 0..n {
                            let v = if i == j && j == k { 1.0 } else { 0.0 };
                            data.push(Jet::constant(p.len(), order, v));
                        }
                    }
                }
                Ok(Tensor3::new(n, data))
            },
        );
        let v = vf(2, &["u1", "u2"]);
        let inv = invert_at(&c, &v, &[1.0, 2.0], 2).unwrap();
        assert!((inv[0].value() - 1.0).abs() < 1e-14);
        assert!((inv[1].value() - 0.5).abs() < 1e-14);
        // d/du2 (1/u2) = -1/4, d2/du2^2 = 2/8
        assert!((inv[1].grad(1) + 0.25).abs() < 1e-14);
        assert!((inv[1].hess(1, 1) - 0.25).abs() < 1e-14);

        // vanishing canonical component -> not invertible
        let bad = vf(2, &["0", "u2"]);
        assert!(matches!(
            invert_at(&c, &bad, &[1.0, 2.0], 0),
            Err(Error::NonInvertible(_))
        ));
    }

    #[test]
    fn fd_agrees_with_jets() {
        let e = parse_expr("log(u2) * exp(u1) + u1^3 * sqrt(u2)", 2, &[]).unwrap();
        let pr = params();
        let p = [0.4, 1.7];
        let rule = move |q: &[f64], order: usize| e.eval_jet(q, order, &pr);
        let worst = fd_crosscheck(&rule, &p, 1e-5).unwrap();
        assert!(worst <= 1e-6, "AD vs FD disagreement {worst:.3e}");
    }
}
