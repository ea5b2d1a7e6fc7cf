//! External-bundle constructions over a chart: induced multiplications and
//! pull-back connections from `(D, A, u)` data on a trivialized bundle.
//!
//! The bundle is rank `r` with a connection `D` (Christoffel-like functions
//! `D^a_{i b}`), an endomorphism-valued one-form `A` (`(A_i)^a_b`), and a
//! section `u`. When the compatibility conditions hold and the bundle map
//! `F(X) = A_X(u)` is an isomorphism, `X o Y = F^{-1}(A_X A_Y u)` is an
//! F-manifold multiplication and `F^* D` a compatible torsion-free
//! connection. Treating the tangent bundle with its multiplication operator
//! as the bundle recovers the Legendre transformation.

use crate::algebra::Residual;
use crate::error::{Error, Result};
use crate::field::{ConnField, MultField, Tensor3, VectorField};
use crate::jet::Jet;
use crate::linalg::{condition_estimate, lu_solve_jets, COND_GATE};
use crate::scalar::Real;

/// Trivialized bundle data over the chart. The rank must equal the chart
/// dimension for the induced multiplication (the bundle map must be square).
#[derive(Clone)]
pub struct BundleData<T> {
    pub rank: usize,
    /// `D^a_{i b}`: connection coefficients, layout as a `ConnField` with
    /// `get(a, i, b)`.
    pub d: ConnField<T>,
    /// `(A_i)^a_b`, layout `get(a, i, b)`.
    pub a: ConnField<T>,
    /// Section components `u^a`.
    pub u: VectorField<T>,
}

impl<T: Real> BundleData<T> {
    /// Tangent-bundle data built from a multiplication operator (the Higgs
    /// field `A_X(Y) = X o Y`), a connection `D`, and a section `u`.
    pub fn higgs(c: &MultField<T>, d: &ConnField<T>, u: &VectorField<T>) -> Self {
        let n = c.dim();
        let cf = c.clone();
        let a = ConnField::from_fn(n, move |p, order| {
            let ct = cf.eval(p, order)?;
            let mut data = Vec::with_capacity(n * n * n);
            for aa in 0..n {
                for i in 0..n {
                    for b in 0..n {
                        data.push(ct.get(aa, i, b).clone());
                    }
                }
            }
            Ok(Tensor3::new(n, data))
        });
        BundleData {
            rank: n,
            d: d.clone(),
            a,
            u: u.clone(),
        }
    }
}

/// `(D_i u)^a = d_i u^a + D^a_{i b} u^b` at a point, layout `[i][a]`.
fn d_section<T: Real>(b: &BundleData<T>, p: &[T], order: usize) -> Result<Vec<Vec<Jet<T>>>> {
    let r = b.rank;
    let n = p.len();
    let dt = b.d.eval(p, order)?;
    let us = b.u.eval(p, order + 1)?;
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let mut row = Vec::with_capacity(r);
        for a in 0..r {
            let mut acc = us[a].deriv(i);
            for bb in 0..r {
                acc = &acc + &dt.get(a, i, bb).mul_jet(&us[bb].truncated(order));
            }
            row.push(acc);
        }
        out.push(row);
    }
    Ok(out)
}

/// Residuals of the three bundle conditions over the coordinate frame:
/// flatness of `A` under `d^D`, commutativity of the `A_i`, and symmetry of
/// `A(D u)`.
pub fn bundle_conditions<T: Real>(
    b: &BundleData<T>,
    points: &[Vec<T>],
) -> Result<(Residual, Residual, Residual)> {
    let r = b.rank;
    let mut cond1 = Residual::default();
    let mut cond2 = Residual::default();
    let mut cond3 = Residual::default();
    for p in points {
        let n = p.len();
        let at = b.a.eval(p, 1)?;
        let dt = b.d.eval(p, 0)?;
        // cond1: D_i(A_j) - D_j(A_i) with [d_i, d_j] = 0:
        // (D_i A_j)^a_b = d_i (A_j)^a_b + D^a_{i c}(A_j)^c_b - (A_j)^a_c D^c_{i b}
        for i in 0..n {
            for j in 0..n {
                if i == j {
                    continue;
                }
                for a in 0..r {
                    for bb in 0..r {
                        let mut acc = at.get(a, j, bb).deriv(i) - at.get(a, i, bb).deriv(j);
                        for cc in 0..r {
                            let t1 = dt.get(a, i, cc).mul_jet(&at.get(cc, j, bb).truncated(0));
                            let t2 = at.get(a, j, cc).truncated(0).mul_jet(dt.get(cc, i, bb));
                            let t3 = dt.get(a, j, cc).mul_jet(&at.get(cc, i, bb).truncated(0));
                            let t4 = at.get(a, i, cc).truncated(0).mul_jet(dt.get(cc, j, bb));
                            acc = &(&(&acc + &t1) - &t2) - &(&t3 - &t4);
                        }
                        cond1.absorb(acc.value());
                    }
                }
            }
        }
        // cond2: [A_i, A_j] = 0
        for i in 0..n {
            for j in i + 1..n {
                for a in 0..r {
                    for bb in 0..r {
                        let mut acc = T::zero();
                        for cc in 0..r {
                            acc = acc
                                + at.get(a, i, cc).value() * at.get(cc, j, bb).value()
                                - at.get(a, j, cc).value() * at.get(cc, i, bb).value();
                        }
                        cond2.absorb(acc);
                    }
                }
            }
        }
        // cond3: A_i(D_j u) - A_j(D_i u) = 0
        let du = d_section(b, p, 0)?;
        for i in 0..n {
            for j in i + 1..n {
                for a in 0..r {
                    let mut acc = T::zero();
                    for bb in 0..r {
                        acc = acc + at.get(a, i, bb).value() * du[j][bb].value()
                            - at.get(a, j, bb).value() * du[i][bb].value();
                    }
                    cond3.absorb(acc);
                }
            }
        }
    }
    Ok((cond1, cond2, cond3))
}

/// Bundle map `F^a_i = (A_i)^a_b u^b` at a point, with an invertibility flag
/// based on the condition estimate.
pub fn bundle_map<T: Real>(b: &BundleData<T>, p: &[T]) -> Result<(Vec<Vec<T>>, bool)> {
    let f = bundle_map_jets(b, p, 0)?;
    let values: Vec<Vec<T>> = f
        .iter()
        .map(|row| row.iter().map(|j| j.value()).collect())
        .collect();
    let cond = condition_estimate(&values);
    Ok((values, cond <= COND_GATE))
}

/// `F` with jet entries, layout `[a][i]`.
fn bundle_map_jets<T: Real>(b: &BundleData<T>, p: &[T], order: usize) -> Result<Vec<Vec<Jet<T>>>> {
    let r = b.rank;
    let n = p.len();
    if r != n {
        return Err(Error::NotIsomorphism(format!(
            "bundle rank {r} differs from chart dimension {n}"
        )));
    }
    let at = b.a.eval(p, order)?;
    let us = b.u.eval(p, order)?;
    let mut f = vec![vec![Jet::zero(n, order); n]; r];
    for a in 0..r {
        for i in 0..n {
            let mut acc = Jet::zero(n, order);
            for bb in 0..r {
                acc = &acc + &at.get(a, i, bb).mul_jet(&us[bb]);
            }
            f[a][i] = acc;
        }
    }
    Ok(f)
}

fn solve_f<T: Real>(
    b: &BundleData<T>,
    p: &[T],
    order: usize,
    rhs: &[Vec<Jet<T>>],
) -> Result<Vec<Vec<Jet<T>>>> {
    let f = bundle_map_jets(b, p, order)?;
    let values: Vec<Vec<T>> = f
        .iter()
        .map(|row| row.iter().map(|j| j.value()).collect())
        .collect();
    let cond = condition_estimate(&values);
    if !(cond <= COND_GATE) {
        return Err(Error::NotIsomorphism(format!(
            "bundle map condition estimate {cond:.3e} exceeds gate {COND_GATE:.1e}"
        )));
    }
    lu_solve_jets(&f, rhs)
}

/// Induced multiplication `X o Y = F^{-1}(A_X A_Y u)` with unit `F^{-1}(u)`.
pub fn induced_multiplication<T: Real>(b: &BundleData<T>) -> MultField<T> {
    let n = b.rank;
    let bu = b.clone();
    let unit = VectorField::from_fn(n, move |p, order| {
        let us = bu.u.eval(p, order)?;
        Ok(solve_f(&bu, p, order, &[us])?.into_iter().next().unwrap())
    });
    let bc = b.clone();
    MultField::from_fn(n, unit, move |p, order| {
        let at = bc.a.eval(p, order)?;
        let us = bc.u.eval(p, order)?;
        // rhs per (i,j): A_i A_j u
        let mut rhs = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                let mut col = Vec::with_capacity(n);
                for a in 0..n {
                    let mut acc = Jet::zero(p.len(), order);
                    for bb in 0..n {
                        for cc in 0..n {
                            acc = &acc
                                + &at
                                    .get(a, i, bb)
                                    .mul_jet(at.get(bb, j, cc))
                                    .mul_jet(&us[cc]);
                        }
                    }
                    col.push(acc);
                }
                rhs.push(col);
            }
        }
        let sols = solve_f(&bc, p, order, &rhs)?;
        let mut data = Vec::with_capacity(n * n * n);
        for k in 0..n {
            for i in 0..n {
                for j in 0..n {
                    data.push(sols[i * n + j][k].clone());
                }
            }
        }
        Ok(Tensor3::new(n, data))
    })
}

/// Multiplicativity defect `A_{d_i o d_j} - A_i A_j` for the induced
/// multiplication.
pub fn rel_u_defect<T: Real>(
    b: &BundleData<T>,
    induced: &MultField<T>,
    points: &[Vec<T>],
) -> Result<Residual> {
    let n = b.rank;
    let mut res = Residual::default();
    for p in points {
        let at = b.a.eval(p, 0)?;
        let ct = induced.eval(p, 0)?;
        for i in 0..n {
            for j in 0..n {
                for a in 0..n {
                    for bb in 0..n {
                        // (A_{d_i o d_j})^a_b = c^s_ij (A_s)^a_b
                        let mut lhs = T::zero();
                        for s in 0..n {
                            lhs = lhs + ct.get(s, i, j).value() * at.get(a, s, bb).value();
                        }
                        let mut rhs = T::zero();
                        for cc in 0..n {
                            rhs = rhs + at.get(a, i, cc).value() * at.get(cc, j, bb).value();
                        }
                        res.absorb(lhs - rhs);
                    }
                }
            }
        }
    }
    Ok(res)
}

/// Identity `A_{F^{-1}(v)}(u) = v` checked on the frame of constant sections.
pub fn bundle_map_identity_defect<T: Real>(
    b: &BundleData<T>,
    points: &[Vec<T>],
) -> Result<Residual> {
    let n = b.rank;
    let mut res = Residual::default();
    for p in points {
        let at = b.a.eval(p, 0)?;
        let us = b.u.eval(p, 0)?;
        for v in 0..n {
            let rhs: Vec<Jet<T>> = (0..n)
                .map(|a| Jet::constant(p.len(), 0, if a == v { T::one() } else { T::zero() }))
                .collect();
            let x = solve_f(b, p, 0, &[rhs])?.remove(0);
            for a in 0..n {
                let mut acc = T::zero();
                for i in 0..n {
                    for bb in 0..n {
                        acc = acc + at.get(a, i, bb).value() * us[bb].value() * x[i].value();
                    }
                }
                let expect = if a == v { T::one() } else { T::zero() };
                res.absorb(acc - expect);
            }
        }
    }
    Ok(res)
}

/// Pull-back connection `(F^*(D + zA))_X Y = F^{-1}((D + zA)_X F(Y))`
/// materialized as Christoffel functions.
pub fn pullback_connection<T: Real>(b: &BundleData<T>, z: f64) -> ConnField<T> {
    let n = b.rank;
    let bc = b.clone();
    let zt = z;
    ConnField::from_fn(n, move |p, order| {
        let f = bundle_map_jets(&bc, p, order + 1)?;
        let dt = bc.d.eval(p, order)?;
        let at = bc.a.eval(p, order)?;
        let zj = T::from_f64_lossy(zt);
        // rhs per (i,j): (D_{d_i} + z A_i)(F(d_j)) with components
        // d_i F^a_j + D^a_{i b} F^b_j + z (A_i)^a_b F^b_j
        let mut rhs = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                let mut col = Vec::with_capacity(n);
                for a in 0..n {
                    let mut acc = f[a][j].deriv(i);
                    for bb in 0..n {
                        acc = &acc + &dt.get(a, i, bb).mul_jet(&f[bb][j].truncated(order));
                        acc = &acc
                            + &at
                                .get(a, i, bb)
                                .mul_jet(&f[bb][j].truncated(order))
                                .scale(zj);
                    }
                    col.push(acc);
                }
                rhs.push(col);
            }
        }
        let sols = solve_f(&bc, p, order, &rhs)?;
        let mut data = Vec::with_capacity(n * n * n);
        for k in 0..n {
            for i in 0..n {
                for j in 0..n {
                    data.push(sols[i * n + j][k].clone());
                }
            }
        }
        Ok(Tensor3::new(n, data))
    })
}
