//! The multiplication algebra on the tangent sheaf.
//!
//! Products, inverses and powers of vector fields, Lie derivatives of the
//! multiplication, the Hertling-Manin integrability defect, the
//! eventual-identity characterization, twisted (dual) multiplications, and
//! the power-bracket identity.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::expr::Expr;
use crate::field::{
    invert_vf, lie_bracket, mul_jets, mul_vf, MultField, ScalarField, Tensor3, VectorField,
};
use crate::jet::Jet;
use crate::scalar::Real;

/// Default gate on the eventual-identity defect before twisting.
pub const EI_GATE: f64 = 1e-8;

/// Residual accumulator: max and mean of absolute component values.
#[derive(Debug, Clone, Copy, Default)]
pub struct Residual {
    pub max: f64,
    pub sum: f64,
    pub count: u64,
}

impl Residual {
    pub fn absorb<T: Real>(&mut self, x: T) {
        let v = x.abs().to_f64_lossy();
        if v > self.max {
            self.max = v;
        }
        self.sum += v;
        self.count += 1;
    }

    pub fn absorb_all<T: Real>(&mut self, xs: &[Jet<T>]) {
        for j in xs {
            self.absorb(j.value());
        }
    }

    pub fn merge(&mut self, other: &Residual) {
        self.max = self.max.max(other.max);
        self.sum += other.sum;
        self.count += other.count;
    }

    pub fn mean(&self) -> f64 {
        if self.count == 0 {
            0.0
        } else {
            self.sum / self.count as f64
        }
    }
}

/// `multiply`: pointwise product of two vector fields (re-export of the field
/// combinator under its operation name).
pub fn multiply<T: Real>(c: &MultField<T>, x: &VectorField<T>, y: &VectorField<T>) -> VectorField<T> {
    mul_vf(c, x, y)
}

/// Commutativity, associativity, and unit-law sup-residuals over the
/// coordinate frame at the given points.
pub fn algebra_defects<T: Real>(
    c: &MultField<T>,
    points: &[Vec<T>],
) -> Result<(Residual, Residual, Residual)> {
    let n = c.dim();
    let mut comm = Residual::default();
    let mut assoc = Residual::default();
    let mut unit = Residual::default();
    for p in points {
        let ct = c.eval(p, 0)?;
        let e = c.unit().eval(p, 0)?;
        let frame: Vec<Vec<Jet<T>>> = (0..n)
            .map(|i| {
                (0..n)
                    .map(|k| Jet::constant(p.len(), 0, if i == k { T::one() } else { T::zero() }))
                    .collect()
            })
            .collect();
        for i in 0..n {
            // unit law once per frame vector
            let ex = mul_jets(&ct, &e, &frame[i]);
            for k in 0..n {
                unit.absorb(ex[k].value() - frame[i][k].value());
            }
            for j in 0..n {
                let ij = mul_jets(&ct, &frame[i], &frame[j]);
                let ji = mul_jets(&ct, &frame[j], &frame[i]);
                for k in 0..n {
                    comm.absorb(ij[k].value() - ji[k].value());
                }
                for l in 0..n {
                    let a = mul_jets(&ct, &ij, &frame[l]);
                    let jl = mul_jets(&ct, &frame[j], &frame[l]);
                    let b = mul_jets(&ct, &frame[i], &jl);
                    for k in 0..n {
                        assoc.absorb(a[k].value() - b[k].value());
                    }
                }
            }
        }
    }
    Ok((comm, assoc, unit))
}

/// Inverse of `v` at a point (components only); field-level variant is
/// [`invert_vf`].
pub fn invert<T: Real>(c: &MultField<T>, v: &VectorField<T>, p: &[T]) -> Result<Vec<T>> {
    Ok(crate::field::invert_at(c, v, p, 0)?
        .into_iter()
        .map(|j| j.value())
        .collect())
}

/// `k`-th multiplication power of `v`; `k = 0` gives the unit, negative
/// powers go through the inverse.
pub fn vf_power<T: Real>(c: &MultField<T>, v: &VectorField<T>, k: i64) -> VectorField<T> {
    if k == 0 {
        return c.unit().clone();
    }
    let base = if k < 0 { invert_vf(c, v) } else { v.clone() };
    let mut out = base.clone();
    for _ in 1..k.unsigned_abs() {
        out = mul_vf(c, &out, &base);
    }
    out
}

/// Lie derivative of the multiplication:
/// `(L_X(o))(Y, Z) = [X, Y o Z] - [X, Y] o Z - Y o [X, Z]`.
pub fn lie_derivative_mul<T: Real>(
    c: &MultField<T>,
    x: &VectorField<T>,
    y: &VectorField<T>,
    z: &VectorField<T>,
) -> VectorField<T> {
    let yz = mul_vf(c, y, z);
    let t1 = lie_bracket(x, &yz);
    let t2 = mul_vf(c, &lie_bracket(x, y), z);
    let t3 = mul_vf(c, y, &lie_bracket(x, z));
    t1.sub(&t2).sub(&t3)
}

/// Probe polynomials used to scale coordinate frames in the integrability
/// checks. Fixed, positive on sensible boxes, and mildly anisotropic.
fn probe_polys(n: usize) -> Vec<Expr> {
    use crate::expr::Expr as E;
    let mut out = Vec::new();
    // 1 + u1^2
    out.push(E::add(
        E::num(1.0),
        E::pow(E::coord(0), E::num(2.0)),
    ));
    // 2 + u_n
    out.push(E::add(E::num(2.0), E::coord(n - 1)));
    // 1 + u1*u_n/4
    out.push(E::add(
        E::num(1.0),
        E::mul(E::num(0.25), E::mul(E::coord(0), E::coord(n - 1))),
    ));
    out
}

/// Hertling-Manin defect:
/// `L_{X o Y}(o)(Z, W) - X o L_Y(o)(Z, W) - Y o L_X(o)(Z, W)`,
/// sup over coordinate-frame tuples and over probe-scaled frames in the
/// `X`, `Y` slots (the expression is manifestly tensorial in `Z`, `W`).
pub fn hm_defect<T: Real>(c: &MultField<T>, points: &[Vec<T>]) -> Result<Residual> {
    let n = c.dim();
    let mut probes: Vec<VectorField<T>> = (0..n).map(|i| VectorField::coordinate(n, i)).collect();
    for poly in probe_polys(n) {
        let s = ScalarField::from_expr(n, poly, Arc::new(crate::expr::Params::new()));
        for i in 0..n {
            probes.push(VectorField::coordinate(n, i).scaled(s.clone()));
        }
    }
    let frame: Vec<VectorField<T>> = (0..n).map(|i| VectorField::coordinate(n, i)).collect();

    let mut res = Residual::default();
    for (xi, x) in probes.iter().enumerate() {
        for (yi, y) in probes.iter().enumerate() {
            if yi > xi {
                continue; // symmetric in (X, Y)
            }
            let xy = mul_vf(c, x, y);
            for z in &frame {
                for w in &frame {
                    let lhs = lie_derivative_mul(c, &xy, z, w);
                    let t1 = mul_vf(c, x, &lie_derivative_mul(c, y, z, w));
                    let t2 = mul_vf(c, y, &lie_derivative_mul(c, x, z, w));
                    let defect = lhs.sub(&t1).sub(&t2);
                    for p in points {
                        res.absorb_all(&defect.eval(p, 0)?);
                    }
                }
            }
        }
    }
    Ok(res)
}

/// Tensoriality audit: `L`-defect of `(f X, Y, Z, W)` minus `f` times the
/// defect of `(X, Y, Z, W)`, which bilinearity predicts to vanish.
pub fn hm_tensoriality_audit<T: Real>(c: &MultField<T>, points: &[Vec<T>]) -> Result<Residual> {
    let n = c.dim();
    let poly = probe_polys(n).remove(0);
    let params = Arc::new(crate::expr::Params::new());
    let s = ScalarField::from_expr(n, poly, params);
    let mut res = Residual::default();
    let frame: Vec<VectorField<T>> = (0..n).map(|i| VectorField::coordinate(n, i)).collect();

    let hm_field = |x: &VectorField<T>, y: &VectorField<T>, z: &VectorField<T>, w: &VectorField<T>| {
        let xy = mul_vf(c, x, y);
        lie_derivative_mul(c, &xy, z, w)
            .sub(&mul_vf(c, x, &lie_derivative_mul(c, y, z, w)))
            .sub(&mul_vf(c, y, &lie_derivative_mul(c, x, z, w)))
    };

    for i in 0..n {
        let scaled = frame[i].clone().scaled(s.clone());
        for j in 0..n {
            for k in 0..n {
                for l in 0..n {
                    let a = hm_field(&scaled, &frame[j], &frame[k], &frame[l]);
                    let b = hm_field(&frame[i], &frame[j], &frame[k], &frame[l]).scaled(s.clone());
                    let d = a.sub(&b);
                    for p in points {
                        res.absorb_all(&d.eval(p, 0)?);
                    }
                }
            }
        }
    }
    Ok(res)
}

/// Eventual-identity defect:
/// `L_E(o)(X, Y) - [e, E] o X o Y` over the coordinate frame.
pub fn eventual_identity_defect<T: Real>(
    c: &MultField<T>,
    ev: &VectorField<T>,
    points: &[Vec<T>],
) -> Result<Residual> {
    let n = c.dim();
    let e_ev = lie_bracket(c.unit(), ev);
    let mut res = Residual::default();
    for i in 0..n {
        let x = VectorField::coordinate(n, i);
        for j in i..n {
            let y = VectorField::coordinate(n, j);
            let lhs = lie_derivative_mul(c, ev, &x, &y);
            let rhs = mul_vf(c, &mul_vf(c, &e_ev, &x), &y);
            let d = lhs.sub(&rhs);
            for p in points {
                res.absorb_all(&d.eval(p, 0)?);
            }
        }
    }
    Ok(res)
}

/// A multiplication twisted by an eventual identity, with its provenance.
#[derive(Clone)]
pub struct DualMultResult<T> {
    /// The twisted multiplication `X * Y = X o Y o E^{-1}`, unit `E`.
    pub mult: MultField<T>,
    pub source: MultField<T>,
    pub identity: VectorField<T>,
    pub identity_inverse: VectorField<T>,
    /// Characterization defect measured at gate time (if gated).
    pub gate_defect: Option<f64>,
}

/// Twist `c` by an invertible field `ev`. When `gate` is set, the
/// eventual-identity defect is measured on `gate_points` first and an error
/// is returned if it exceeds the gate.
pub fn dual_mul<T: Real>(
    c: &MultField<T>,
    ev: &VectorField<T>,
    gate: Option<(f64, &[Vec<T>])>,
) -> Result<DualMultResult<T>> {
    let n = c.dim();
    let mut gate_defect = None;
    if let Some((tol, pts)) = gate {
        let d = eventual_identity_defect(c, ev, pts)?.max;
        if d > tol {
            return Err(Error::NotEventualIdentity { defect: d, gate: tol });
        }
        gate_defect = Some(d);
    }
    let inv = invert_vf(c, ev);
    let cf = c.clone();
    let invf = inv.clone();
    let star = MultField::from_fn(n, ev.clone(), move |p, order| {
        let ct = cf.eval(p, order)?;
        let iv = invf.eval(p, order)?;
        let dim = p.len();
        let mut data = Vec::with_capacity(n * n * n);
        // c*(k,i,j) = (d_i o d_j o Einv)^k = c^k_st c^s_ij Einv^t
        for k in 0..n {
            for i in 0..n {
                for j in 0..n {
                    let mut acc = Jet::zero(dim, order);
                    for s in 0..n {
                        for t in 0..n {
                            acc = &acc + &ct.get(k, s, t).mul_jet(ct.get(s, i, j)).mul_jet(&iv[t]);
                        }
                    }
                    data.push(acc);
                }
            }
        }
        Ok(Tensor3::new(n, data))
    });
    Ok(DualMultResult {
        mult: star,
        source: c.clone(),
        identity: ev.clone(),
        identity_inverse: inv,
        gate_defect,
    })
}

/// Power-bracket defect: `[E^n, E^m] - (m - n) E^{m+n-1} o [e, E]`.
pub fn power_bracket_defect<T: Real>(
    c: &MultField<T>,
    ev: &VectorField<T>,
    npow: i64,
    mpow: i64,
    points: &[Vec<T>],
) -> Result<Residual> {
    let en = vf_power(c, ev, npow);
    let em = vf_power(c, ev, mpow);
    let lhs = lie_bracket(&en, &em);
    let emn = vf_power(c, ev, mpow + npow - 1);
    let rhs = mul_vf(c, &emn, &lie_bracket(c.unit(), ev)).scale_const((mpow - npow) as f64);
    let d = lhs.sub(&rhs);
    let mut res = Residual::default();
    for p in points {
        res.absorb_all(&d.eval(p, 0)?);
    }
    Ok(res)
}

/// Sup-residual of the unit law of `star` against its own unit (used for the
/// dual unit law and for model load gates).
pub fn unit_law_defect<T: Real>(c: &MultField<T>, points: &[Vec<T>]) -> Result<Residual> {
    let n = c.dim();
    let mut res = Residual::default();
    for p in points {
        let ct = c.eval(p, 0)?;
        let e = c.unit().eval(p, 0)?;
        for i in 0..n {
            let x: Vec<Jet<T>> = (0..n)
                .map(|k| Jet::constant(p.len(), 0, if i == k { T::one() } else { T::zero() }))
                .collect();
            let ex = mul_jets(&ct, &e, &x);
            for k in 0..n {
                res.absorb(ex[k].value() - x[k].value());
            }
        }
    }
    Ok(res)
}

/// Max component difference of two multiplications over the frame.
pub fn mult_difference<T: Real>(
    a: &MultField<T>,
    b: &MultField<T>,
    points: &[Vec<T>],
) -> Result<Residual> {
    let n = a.dim();
    let mut res = Residual::default();
    for p in points {
        let at = a.eval(p, 0)?;
        let bt = b.eval(p, 0)?;
        for k in 0..n {
            for i in 0..n {
                for j in 0..n {
                    res.absorb(at.get(k, i, j).value() - bt.get(k, i, j).value());
                }
            }
        }
    }
    Ok(res)
}

/// Max component difference of two vector fields.
pub fn vf_difference<T: Real>(
    a: &VectorField<T>,
    b: &VectorField<T>,
    points: &[Vec<T>],
) -> Result<Residual> {
    let mut res = Residual::default();
    for p in points {
        let av = a.eval(p, 0)?;
        let bv = b.eval(p, 0)?;
        for k in 0..av.len() {
            res.absorb(av[k].value() - bv[k].value());
        }
    }
    Ok(res)
}
