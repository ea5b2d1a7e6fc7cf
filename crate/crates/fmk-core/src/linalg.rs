//! Small dense linear algebra over jets and plain scalars.
//!
//! Charts here are low-dimensional (n <= 4 in practice), so everything is a
//! hand-rolled LU with partial pivoting. Solving a linear system whose
//! entries are jets propagates derivatives through the solve, which is
//! exactly the implicit-function-theorem rule for derived fields like
//! inverse vector fields.

use crate::error::{Error, Result};
use crate::jet::Jet;
use crate::scalar::Real;

/// Condition-number gate for multiplication-operator solves.
pub const COND_GATE: f64 = 1e8;

/// Solve `M x = b` for several right-hand sides, entries being jets.
/// Pivoting is by absolute value of the jet values.
pub fn lu_solve_jets<T: Real>(
    m: &[Vec<Jet<T>>],
    rhs: &[Vec<Jet<T>>],
) -> Result<Vec<Vec<Jet<T>>>> {
    let n = m.len();
    let mut a: Vec<Vec<Jet<T>>> = m.to_vec();
    let mut b: Vec<Vec<Jet<T>>> = rhs.to_vec();
    let nrhs = b.len();

    // scale for the singularity test
    let mut scale = T::zero();
    for row in &a {
        for e in row {
            scale = scale.max(e.value().abs());
        }
    }
    if scale == T::zero() {
        return Err(Error::NonInvertible("zero operator".into()));
    }
    let tiny = scale * T::from_f64_lossy(1e-13);

    for col in 0..n {
        let mut piv = col;
        for r in col + 1..n {
            if a[r][col].value().abs() > a[piv][col].value().abs() {
                piv = r;
            }
        }
        if a[piv][col].value().abs() <= tiny {
            return Err(Error::NonInvertible(format!(
                "pivot {:.3e} below threshold in column {col}",
                a[piv][col].value().to_f64_lossy()
            )));
        }
        if piv != col {
            a.swap(piv, col);
            for rb in b.iter_mut() {
                rb.swap(piv, col);
            }
        }
        let inv_piv = a[col][col].recip()?;
        for r in col + 1..n {
            let factor = a[r][col].mul_jet(&inv_piv);
            for c in col..n {
                let t = factor.mul_jet(&a[col][c]);
                a[r][c] = &a[r][c] - &t;
            }
            for rb in b.iter_mut() {
                let t = factor.mul_jet(&rb[col]);
                rb[r] = &rb[r] - &t;
            }
        }
    }

    // back substitution
    let mut out = Vec::with_capacity(nrhs);
    for rb in &b {
        let mut x: Vec<Jet<T>> = rb.clone();
        for r in (0..n).rev() {
            for c in r + 1..n {
                let t = a[r][c].mul_jet(&x[c]);
                x[r] = &x[r] - &t;
            }
            x[r] = x[r].mul_jet(&a[r][r].recip()?);
        }
        out.push(x);
    }
    Ok(out)
}

/// Infinity-norm condition estimate of a value matrix.
pub fn condition_estimate<T: Real>(m: &[Vec<T>]) -> f64 {
    let norm = |mm: &[Vec<T>]| -> f64 {
        let mut best = 0.0f64;
        for row in mm {
            let s: f64 = row.iter().map(|x| x.abs().to_f64_lossy()).sum();
            best = best.max(s);
        }
        best
    };
    let inv = match invert_values(m) {
        Some(inv) => inv,
        None => return f64::INFINITY,
    };
    norm(m) * norm(&inv)
}

/// Plain value-level inverse (Gauss-Jordan), `None` if singular.
pub fn invert_values<T: Real>(m: &[Vec<T>]) -> Option<Vec<Vec<T>>> {
    let n = m.len();
    let mut a: Vec<Vec<T>> = m.to_vec();
    let mut inv: Vec<Vec<T>> = (0..n)
        .map(|i| (0..n).map(|j| if i == j { T::one() } else { T::zero() }).collect())
        .collect();
    for col in 0..n {
        let mut piv = col;
        for r in col + 1..n {
            if a[r][col].abs() > a[piv][col].abs() {
                piv = r;
            }
        }
        if a[piv][col].abs() == T::zero() {
            return None;
        }
        a.swap(piv, col);
        inv.swap(piv, col);
        let d = a[col][col];
        for c in 0..n {
            a[col][c] = a[col][c] / d;
            inv[col][c] = inv[col][c] / d;
        }
        for r in 0..n {
            if r != col {
                let f = a[r][col];
                for c in 0..n {
                    a[r][c] = a[r][c] - f * a[col][c];
                    inv[r][c] = inv[r][c] - f * inv[col][c];
                }
            }
        }
    }
    Some(inv)
}

/// Least squares `min |A x - b|` via normal equations; A is tall and thin
/// (rows >= cols, cols <= 4 here). Returns the solution and the residual
/// max-norm.
pub fn least_squares<T: Real>(a: &[Vec<T>], b: &[T]) -> Result<(Vec<T>, T)> {
    let rows = a.len();
    let cols = if rows == 0 { 0 } else { a[0].len() };
    let mut ata = vec![vec![T::zero(); cols]; cols];
    let mut atb = vec![T::zero(); cols];
    for r in 0..rows {
        for i in 0..cols {
            atb[i] = atb[i] + a[r][i] * b[r];
            for j in 0..cols {
                ata[i][j] = ata[i][j] + a[r][i] * a[r][j];
            }
        }
    }
    let inv = invert_values(&ata)
        .ok_or_else(|| Error::NonInvertible("normal equations singular in least squares".into()))?;
    let mut x = vec![T::zero(); cols];
    for i in 0..cols {
        for j in 0..cols {
            x[i] = x[i] + inv[i][j] * atb[j];
        }
    }
    let mut res = T::zero();
    for r in 0..rows {
        let mut pred = T::zero();
        for i in 0..cols {
            pred = pred + a[r][i] * x[i];
        }
        res = res.max((pred - b[r]).abs());
    }
    Ok((x, res))
}
