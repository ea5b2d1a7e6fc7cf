//! Chart domains: a coordinate box with exclusion margins, and deterministic
//! quasi-random sampling inside it.
//!
//! Sampling uses a Halton sequence with a seeded Cranley-Patterson rotation,
//! so the same `(count, seed)` always produces the same admissible points,
//! while different seeds decorrelate. Candidate points are rejected until all
//! exclusion predicates clear their margins; exclusions keep samples away
//! from caustics (coincident canonical coordinates, non-invertible loci,
//! branch points of logs).

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

use crate::error::{Error, Result};
use crate::expr::{Expr, Params};
use crate::scalar::Real;

const PRIMES: [u64; 8] = [2, 3, 5, 7, 11, 13, 17, 19];

/// Default margin (absolute) for exclusion predicates.
pub const DEFAULT_MARGIN: f64 = 0.1;

#[derive(Debug, Clone)]
pub struct Exclusion {
    pub expr: Expr,
    pub margin: f64,
}

#[derive(Debug, Clone)]
pub struct ChartDomain<T> {
    pub n: usize,
    pub lo: Vec<T>,
    pub hi: Vec<T>,
    pub exclusions: Vec<Exclusion>,
}

fn radical_inverse(mut i: u64, base: u64) -> f64 {
    let inv = 1.0 / base as f64;
    let mut result = 0.0;
    let mut frac = inv;
    while i > 0 {
        result += (i % base) as f64 * frac;
        i /= base;
        frac *= inv;
    }
    result
}

impl<T: Real> ChartDomain<T> {
    pub fn new(lo: Vec<T>, hi: Vec<T>) -> Result<Self> {
        if lo.len() != hi.len() || lo.is_empty() {
            return Err(Error::Model("domain box dimensions inconsistent".into()));
        }
        if lo.len() > PRIMES.len() {
            return Err(Error::Model(format!(
                "dimension {} exceeds the supported maximum {}",
                lo.len(),
                PRIMES.len()
            )));
        }
        for i in 0..lo.len() {
            if !(lo[i] < hi[i]) {
                return Err(Error::Model(format!(
                    "domain box empty in coordinate {}: lo >= hi",
                    i + 1
                )));
            }
        }
        Ok(ChartDomain {
            n: lo.len(),
            lo,
            hi,
            exclusions: Vec::new(),
        })
    }

    pub fn with_exclusion(mut self, expr: Expr, margin: f64) -> Self {
        self.exclusions.push(Exclusion { expr, margin });
        self
    }

    pub fn admissible(&self, p: &[T], params: &Params<T>) -> Result<bool> {
        for (i, x) in p.iter().enumerate() {
            if *x < self.lo[i] || *x > self.hi[i] {
                return Ok(false);
            }
        }
        for ex in &self.exclusions {
            let v = match ex.expr.eval_jet(p, 0, params) {
                Ok(j) => j.value(),
                // outside the real domain of the predicate counts as excluded
                Err(Error::Domain(_)) => return Ok(false),
                Err(e) => return Err(e),
            };
            if v.abs() < T::from_f64_lossy(ex.margin) {
                return Ok(false);
            }
        }
        Ok(true)
    }

    /// Deterministic low-discrepancy sample of `count` admissible points.
    pub fn sample(&self, count: usize, seed: u64, params: &Params<T>) -> Result<Vec<Vec<T>>> {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let shifts: Vec<f64> = (0..self.n).map(|_| rng.gen::<f64>()).collect();
        let mut points = Vec::with_capacity(count);
        let max_attempts = 1000 * count as u64 + 1000;
        let mut idx: u64 = 1;
        while points.len() < count {
            if idx > max_attempts {
                return Err(Error::Sampling(format!(
                    "only {} of {count} points found after {max_attempts} candidates; \
                     domain too constrained by its exclusion margins",
                    points.len()
                )));
            }
            let mut p = Vec::with_capacity(self.n);
            for d in 0..self.n {
                let u = (radical_inverse(idx, PRIMES[d]) + shifts[d]).fract();
                let x = self.lo[d]
                    + (self.hi[d] - self.lo[d]) * T::from_f64_lossy(u);
                p.push(x);
            }
            idx += 1;
            if self.admissible(&p, params)? {
                points.push(p);
            }
        }
        Ok(points)
    }
}
