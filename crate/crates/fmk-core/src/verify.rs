//! Check suites and machine-readable reports.
//!
//! A suite is a deterministic list of named checks run against a model at a
//! fixed `(seed, points, tol)`. Every check records its max/mean residual,
//! its tolerance, and a pass/fail status with `pass <=> max <= tolerance`.
//! Discrimination checks (where the theory requires a residual to be LARGE)
//! store `max(0, threshold - defect)` with tolerance zero, so the pass rule
//! stays uniform.
//!
//! Reports serialize to JSON with a stable key order and no volatile fields
//! (wall-clock time is reported on the terminal, not in the file), so a
//! fixed `(model, suite, seed, points, tol)` produces byte-identical output.

use std::sync::Arc;

use serde::Serialize;

use crate::algebra::{self, dual_mul, Residual, EI_GATE};
use crate::conn::{self, SpecialFamily};
use crate::error::{Error, Result};
use crate::expr::{parse_expr, Expr, Params};
use crate::field::{
    fd_crosscheck, lie_bracket, mul_vf, nabla_vf, EndoField, MultField, Tensor3, VectorField,
};
use crate::jet::Jet;
use crate::models::{kappa_eventual_identity, kappa_residual_slope, kappa_series_field, Model};
use crate::pullback::{self, BundleData};

pub const SUITES: [&str; 9] = [
    "algebra",
    "duality",
    "connections",
    "flatness",
    "lorenz",
    "legendre",
    "pullback",
    "kappa",
    "all",
];

pub const REPORT_SCHEMA: &str = "fmk-report/1";

#[derive(Debug, Clone, Serialize)]
pub struct CheckResult {
    pub name: String,
    pub anchor: String,
    pub points: usize,
    pub seed: u64,
    pub max_residual: f64,
    pub mean_residual: f64,
    pub tolerance: f64,
    pub status: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct CheckReport {
    pub schema: String,
    pub model: String,
    pub suite: String,
    pub seed: u64,
    pub points: usize,
    pub tolerance: f64,
    pub checks: Vec<CheckResult>,
    pub passed: usize,
    pub failed: usize,
    pub all_pass: bool,
    /// Filled for terminal display; serialized as `null` in report files so
    /// reports are byte-reproducible.
    pub wall_clock_secs: Option<f64>,
}

impl CheckReport {
    /// Deterministic serialization: wall-clock nulled, keys in struct order,
    /// checks sorted by name.
    pub fn to_canonical_json(&self) -> String {
        let mut clone = self.clone();
        clone.wall_clock_secs = None;
        let mut s = serde_json::to_string_pretty(&clone).expect("report serializes");
        s.push('\n');
        s
    }
}

struct Ctx<'m> {
    model: &'m Model<f64>,
    seed: u64,
    npoints: usize,
    tol: f64,
    points: Vec<Vec<f64>>,
    checks: Vec<CheckResult>,
}

impl<'m> Ctx<'m> {
    fn new(model: &'m Model<f64>, seed: u64, npoints: usize, tol: f64) -> Result<Self> {
        let points = model.sample(npoints, seed)?;
        Ok(Ctx {
            model,
            seed,
            npoints,
            tol,
            points,
            checks: Vec::new(),
        })
    }

    fn tol_for(&self, name: &str, default: f64) -> f64 {
        self.model.tolerance_for(name, default)
    }

    /// Residual-style check: pass iff `res.max <= tol`.
    fn residual(&mut self, name: &str, anchor: &str, res: &Residual, default_tol: f64) {
        let tol = self.tol_for(name, default_tol);
        self.checks.push(CheckResult {
            name: name.to_string(),
            anchor: anchor.to_string(),
            points: self.npoints,
            seed: self.seed,
            max_residual: res.max,
            mean_residual: res.mean(),
            tolerance: tol,
            status: if res.max <= tol { "pass" } else { "fail" }.to_string(),
        });
    }

    /// Discrimination check: the defect must EXCEED `threshold`; the stored
    /// residual is the shortfall `max(0, threshold - defect)`.
    fn sharpness(&mut self, name: &str, anchor: &str, defect: f64, threshold: f64) {
        let shortfall = (threshold - defect).max(0.0);
        self.checks.push(CheckResult {
            name: name.to_string(),
            anchor: format!(
                "{anchor} (defect must exceed {threshold:.1e}; residual is the shortfall)"
            ),
            points: self.npoints,
            seed: self.seed,
            max_residual: shortfall,
            mean_residual: shortfall,
            tolerance: 0.0,
            status: if shortfall <= 0.0 { "pass" } else { "fail" }.to_string(),
        });
    }

    /// Boolean check (status agreement and similar).
    fn flag(&mut self, name: &str, anchor: &str, ok: bool) {
        self.checks.push(CheckResult {
            name: name.to_string(),
            anchor: anchor.to_string(),
            points: self.npoints,
            seed: self.seed,
            max_residual: if ok { 0.0 } else { 1.0 },
            mean_residual: if ok { 0.0 } else { 1.0 },
            tolerance: 0.0,
            status: if ok { "pass" } else { "fail" }.to_string(),
        });
    }
}

fn first_identity<'m>(m: &'m Model<f64>) -> Result<(&'m str, &'m VectorField<f64>)> {
    m.identities
        .first()
        .map(|(n, e)| (n.as_str(), &e.field))
        .ok_or_else(|| {
            Error::Config(format!(
                "model `{}` declares no eventual identity; this suite requires one",
                m.spec.name
            ))
        })
}

fn require_families(m: &Model<f64>) -> Result<()> {
    if m.families.is_empty() {
        return Err(Error::Config(format!(
            "model `{}` declares no connection; this suite requires one",
            m.spec.name
        )));
    }
    Ok(())
}

/// Seeded polynomial vector field with mild coefficients, used as a probe.
fn seeded_poly_vf(n: usize, seed: u64) -> VectorField<f64> {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha20Rng::seed_from_u64(seed);
    let mut comps = Vec::with_capacity(n);
    for _ in 0..n {
        let c0: f64 = rng.gen_range(-0.5..0.5);
        let mut s = format!("{c0}");
        for v in 0..n {
            let c: f64 = rng.gen_range(-0.25..0.25);
            s = format!("{s} + {c}*u{}", v + 1);
        }
        comps.push(parse_expr(&s, n, &[]).unwrap());
    }
    VectorField::from_exprs(n, comps, Arc::new(Params::new())).unwrap()
}

fn seeded_endo(n: usize, seed: u64) -> EndoField<f64> {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha20Rng::seed_from_u64(seed);
    let mut comps = Vec::with_capacity(n);
    for _ in 0..n {
        let mut row = Vec::with_capacity(n);
        for _ in 0..n {
            let c0: f64 = rng.gen_range(-0.5..0.5);
            let mut s = format!("{c0}");
            for v in 0..n {
                let c: f64 = rng.gen_range(-0.25..0.25);
                s = format!("{s} + {c}*u{}", v + 1);
            }
            row.push(parse_expr(&s, n, &[]).unwrap());
        }
        comps.push(row);
    }
    EndoField::from_exprs(n, comps, Arc::new(Params::new())).unwrap()
}

/// Multiplication with a symmetric seeded perturbation of the given
/// magnitude added to every structure function.
fn perturbed_mult(c: &MultField<f64>, magnitude: f64, seed: u64) -> MultField<f64> {
    use rand::{Rng, SeedableRng};
    let n = c.dim();
    let mut rng = rand_chacha::ChaCha20Rng::seed_from_u64(seed);
    let mut weights = vec![0.0; n * n * n];
    for k in 0..n {
        for i in 0..n {
            for j in i..n {
                let w: f64 = rng.gen_range(0.5..1.0) * magnitude;
                weights[(k * n + i) * n + j] = w;
                weights[(k * n + j) * n + i] = w;
            }
        }
    }
    let base = c.clone();
    MultField::from_fn(n, c.unit().clone(), move |p, order| {
        let ct = base.eval(p, order)?;
        let u1 = Jet::coordinate(p.len(), order, 0, p[0]);
        let mut data = Vec::with_capacity(n * n * n);
        for (idx, jet) in ct.data.iter().enumerate() {
            data.push(jet + &u1.scale(weights[idx]));
        }
        Ok(Tensor3::new(n, data))
    })
}

// ---------------------------------------------------------------------------
// Suites
// ---------------------------------------------------------------------------

fn suite_algebra(ctx: &mut Ctx) -> Result<()> {
    let m = ctx.model;
    let pts = ctx.points.clone();
    let tol = ctx.tol;

    let (comm, assoc, unit) = algebra::algebra_defects(&m.mult, &pts)?;
    ctx.residual(
        "algebra.commutativity",
        "commutativity of the multiplication",
        &comm,
        tol,
    );
    ctx.residual(
        "algebra.associativity",
        "associativity of the multiplication",
        &assoc,
        tol,
    );
    ctx.residual("algebra.unit_law", "unit law e o X = X", &unit, tol);

    let hm = algebra::hm_defect(&m.mult, &pts)?;
    ctx.residual(
        "algebra.hm",
        "Hertling-Manin integrability of the multiplication",
        &hm,
        tol,
    );
    let audit = algebra::hm_tensoriality_audit(&m.mult, &pts[..pts.len().min(10)])?;
    ctx.residual(
        "algebra.hm_tensoriality",
        "integrability defect scales linearly under function-scaled frames",
        &audit,
        tol,
    );

    // negative controls
    let pert = perturbed_mult(&m.mult, 0.1, ctx.seed ^ 0xA55A);
    let (_, assoc_p, _) = algebra::algebra_defects(&pert, &pts[..pts.len().min(10)])?;
    ctx.sharpness(
        "algebra.associativity_sharpness",
        "a perturbed multiplication loses associativity",
        assoc_p.max,
        1e-3,
    );
    let hm_p = algebra::hm_defect(&pert, &pts[..pts.len().min(6)])?;
    ctx.sharpness(
        "algebra.hm_sharpness",
        "a perturbed multiplication loses integrability",
        hm_p.max,
        1e-3,
    );

    for (name, entry) in &m.identities {
        let d = algebra::eventual_identity_defect(&m.mult, &entry.field, &pts)?;
        ctx.residual(
            &format!("algebra.ei_defect.{name}"),
            "eventual-identity characterization L_E(mult)(X,Y) = [e,E] o X o Y",
            &d,
            tol,
        );
        for (npow, mpow) in [(-1i64, 1i64), (2, -2), (1, 1)] {
            let r = algebra::power_bracket_defect(&m.mult, &entry.field, npow, mpow, &pts)?;
            ctx.residual(
                &format!("algebra.power_bracket.{name}.{npow}_{mpow}"),
                "power-bracket identity [E^n, E^m] = (m-n) E^(m+n-1) o [e,E]",
                &r,
                tol,
            );
        }
    }
    if m.identities.len() >= 2 {
        let prod = mul_vf(&m.mult, &m.identities[0].1.field, &m.identities[1].1.field);
        let d = algebra::eventual_identity_defect(&m.mult, &prod, &pts)?;
        ctx.residual(
            "algebra.ei_group",
            "products of eventual identities are eventual identities",
            &d,
            tol,
        );
    }
    // a coordinate rotation is generically not an eventual identity
    if m.n >= 2 {
        let mut comps = Vec::with_capacity(m.n);
        for i in 0..m.n {
            comps.push(Expr::Coord((i + 1) % m.n));
        }
        let bad = VectorField::from_exprs(m.n, comps, Arc::new(Params::new()))?;
        let d = algebra::eventual_identity_defect(&m.mult, &bad, &pts)?;
        ctx.sharpness(
            "algebra.ei_sharpness",
            "a coordinate-rotated field fails the characterization",
            d.max,
            1e-3,
        );
    }

    // exact jets against central finite differences on every declared field
    let mut worst = Residual::default();
    let fd_pts = &pts[..pts.len().min(50)];
    {
        let n = m.n;
        let mut rules: Vec<Box<dyn Fn(&[f64], usize) -> Result<Jet<f64>>>> = Vec::new();
        let mult = m.mult.clone();
        for k in 0..n {
            for i in 0..n {
                for j in i..n {
                    let mult = mult.clone();
                    rules.push(Box::new(move |p, order| {
                        Ok(mult.eval(p, order)?.get(k, i, j).clone())
                    }));
                }
            }
        }
        for (_, e) in &m.identities {
            for comp in 0..n {
                let f = e.field.clone();
                rules.push(Box::new(move |p, order| Ok(f.eval(p, order)?[comp].clone())));
            }
        }
        for (_, fam) in &m.families {
            let g = fam.family.conn.clone();
            for k in 0..n {
                for i in 0..n {
                    for j in 0..n {
                        let g = g.clone();
                        rules.push(Box::new(move |p, order| {
                            Ok(g.eval(p, order)?.get(k, i, j).clone())
                        }));
                    }
                }
            }
        }
        for (_, l) in &m.legendres {
            for comp in 0..n {
                let f = l.field.clone();
                rules.push(Box::new(move |p, order| Ok(f.eval(p, order)?[comp].clone())));
            }
        }
        for rule in &rules {
            for p in fd_pts {
                worst.absorb(fd_crosscheck(rule.as_ref(), p, 1e-5)?);
            }
        }
    }
    ctx.residual(
        "algebra.jets_vs_fd",
        "exact jets agree with central finite differences (relative, orders 1-2)",
        &worst,
        1e-6,
    );
    Ok(())
}

fn suite_duality(ctx: &mut Ctx) -> Result<()> {
    let m = ctx.model;
    let pts = ctx.points.clone();
    let tol = ctx.tol;
    first_identity(m)?;

    let ei_gate = m.tolerance_for("gates.eventual_identity", EI_GATE);
    for (ei_name, entry) in &m.identities {
        let ev = &entry.field;
        let star = dual_mul(&m.mult, ev, Some((ei_gate, &pts)))?;

        // unit law of the twisted multiplication
        let ul = algebra::unit_law_defect(&star.mult, &pts)?;
        ctx.residual(
            &format!("duality.dual_unit.{ei_name}"),
            "E is the unit of the twisted multiplication",
            &ul,
            tol,
        );

        // e^{-1,*} = E o E
        let e_inv_star = crate::field::invert_vf(&star.mult, m.unit());
        let ee = mul_vf(&m.mult, ev, ev);
        let d = algebra::vf_difference(&e_inv_star, &ee, &pts)?;
        ctx.residual(
            &format!("duality.unit_inverse.{ei_name}"),
            "the twisted inverse of e is E o E",
            &d,
            tol,
        );

        // twisting twice returns the multiplication and its unit
        let back = dual_mul(&star.mult, m.unit(), None)?;
        let mut inv = algebra::mult_difference(&back.mult, &m.mult, &pts)?;
        inv.merge(&algebra::vf_difference(back.mult.unit(), m.unit(), &pts)?);
        ctx.residual(
            &format!("duality.involution_mult.{ei_name}"),
            "twisting by E then by e returns the multiplication and unit",
            &inv,
            tol,
        );

        // integrability transports with a one-order-of-magnitude allowance
        let hm_star = algebra::hm_defect(&star.mult, &pts[..pts.len().min(10)])?;
        ctx.residual(
            &format!("duality.hm_transport.{ei_name}"),
            "the twisted multiplication is integrable",
            &hm_star,
            10.0 * tol,
        );

        for (fam_name, fam) in &m.families {
            let r = conn::aux_identity_defect(&fam.family, ev, &pts)?;
            ctx.residual(
                &format!("duality.aux_identity.{fam_name}.{ei_name}"),
                "auxiliary covariant-derivative identity for E and its inverse",
                &r,
                tol,
            );

            let r = conn::duality_involution_defect(&fam.family, ev, m.unit(), &pts)?;
            ctx.residual(
                &format!("duality.involution_families.{fam_name}.{ei_name}"),
                "duality involution on special families (shift 1/2 [E,E^-1] + nabla_e e)",
                &r,
                tol,
            );

            let second = conn::second_structure(&fam.family, ev);
            let dual0 = conn::dual_connection(&fam.family, ev, &VectorField::zero(m.n))?;
            let cmp = conn::family_equal(&second, &dual0, &star.mult, &pts, tol)?;
            ctx.residual(
                &format!("duality.second_member.{fam_name}.{ei_name}"),
                "the second structure connection lies in the dual family",
                &cmp.residual,
                tol,
            );

            // nabla^F_X(E) = ([E, e] o E) * X
            let t = mul_vf(&m.mult, &lie_bracket(ev, m.unit()), ev);
            let mut r = Residual::default();
            for i in 0..m.n {
                let di = VectorField::coordinate(m.n, i);
                let lhs = nabla_vf(&second, &di, ev);
                let rhs = mul_vf(&star.mult, &t, &di);
                let dd = lhs.sub(&rhs);
                for p in &pts {
                    r.absorb_all(&dd.eval(p, 0)?);
                }
            }
            ctx.residual(
                &format!("duality.second_nabla_e.{fam_name}.{ei_name}"),
                "derivative of the identity under the second structure connection",
                &r,
                tol,
            );
        }

        // fixed-unit involution with U = 0 on the first family
        if let Some((_, fam0)) = m.families.first() {
            let fam0 = &fam0.family;
            let v = conn::unit_shift(fam0, &VectorField::zero(m.n));
            let rep = SpecialFamily::new(conn::shift(fam0, &v), m.mult.clone());
            let dual = conn::dual_fixed_unit(&rep, ev, &VectorField::zero(m.n))?;
            let mut r =
                conn::unit_derivative_defect(&dual, &star.mult, &VectorField::zero(m.n), &pts)?;
            let dual_fam = SpecialFamily::new(dual, star.mult.clone());
            let back = conn::dual_fixed_unit(&dual_fam, m.unit(), &VectorField::zero(m.n))?;
            r.merge(&conn::conn_difference(&back, &rep.conn, &pts)?);
            ctx.residual(
                &format!("duality.unit_parallel_double.{ei_name}"),
                "fixed-unit duality preserves parallel units and is an involution",
                &r,
                tol,
            );

            // second-structure involution under its unit condition
            let u = lie_bracket(&star.identity_inverse, ev).scale_const(0.5);
            let v = conn::unit_shift(fam0, &u);
            let rep = SpecialFamily::new(conn::shift(fam0, &v), m.mult.clone());
            let second = conn::second_structure(&rep, ev);
            let back = conn::dual_rep_conn(&second, &star.mult, m.unit());
            let r = conn::conn_difference(&back, &rep.conn, &pts)?;
            ctx.residual(
                &format!("duality.second_double.{ei_name}"),
                "second-structure duality is an involution under its unit condition",
                &r,
                tol,
            );
        }
    }
    Ok(())
}

fn suite_connections(ctx: &mut Ctx) -> Result<()> {
    let m = ctx.model;
    let pts = ctx.points.clone();
    let tol = ctx.tol;
    require_families(m)?;

    for (fam_name, fam) in &m.families {
        let t = conn::torsion_defect(&fam.family.conn, &pts)?;
        ctx.residual(
            &format!("connections.torsion.{fam_name}"),
            "the representative is torsion-free",
            &t,
            tol,
        );
        let cd = conn::compat_defect(&fam.family.conn, &m.mult, &pts)?;
        ctx.residual(
            &format!("connections.compat.{fam_name}"),
            "nabla(mult) is totally symmetric",
            &cd,
            tol,
        );

        // shifts stay inside the family and are recovered
        let v = seeded_poly_vf(m.n, ctx.seed ^ 0x51F7);
        let shifted = conn::shift(&fam.family, &v);
        let mut r = conn::torsion_defect(&shifted, &pts)?;
        r.merge(&conn::compat_defect(&shifted, &m.mult, &pts)?);
        let cmp = conn::family_equal(&fam.family.conn, &shifted, &m.mult, &pts, tol)?;
        r.merge(&cmp.residual);
        let mut rec = Residual::default();
        for (p, got) in pts.iter().zip(&cmp.shifts) {
            let want = v.values(p)?;
            for k in 0..m.n {
                rec.absorb(got[k] - want[k]);
            }
        }
        r.merge(&rec);
        ctx.residual(
            &format!("connections.shift_roundtrip.{fam_name}"),
            "multiplication shifts preserve the family and are recovered by least squares",
            &r,
            tol,
        );

        // unit shift: U = 0 gives the unit-parallel member
        let v = conn::unit_shift(&fam.family, &VectorField::zero(m.n));
        let parallel = conn::shift(&fam.family, &v);
        let r = conn::unit_derivative_defect(&parallel, &m.mult, &VectorField::zero(m.n), &pts)?;
        ctx.residual(
            &format!("connections.unit_parallel.{fam_name}"),
            "each family has a unique unit-parallel member",
            &r,
            tol,
        );

        for (ei_name, entry) in &m.identities {
            let ev = &entry.field;
            let star = dual_mul(&m.mult, ev, None)?;
            let mut worst = Residual::default();
            for w in [VectorField::zero(m.n), m.unit().clone(), ev.clone()] {
                let dual = conn::dual_connection(&fam.family, ev, &w)?;
                worst.merge(&conn::torsion_defect(&dual, &pts)?);
                worst.merge(&conn::compat_defect(&dual, &star.mult, &pts)?);
            }
            ctx.residual(
                &format!("connections.dual_family.{fam_name}.{ei_name}"),
                "dual connections are torsion-free and star-compatible (probes W = 0, e, E)",
                &worst,
                tol,
            );
        }
    }

    // sharpness: an endomorphism outside the admissible form breaks the
    // structure. The admissible forms are `E o nabla(E^-1) + (mult op)`, so
    // adding a single off-diagonal nilpotent (never a multiplication
    // operator) to the admissible base is malformed on every model.
    if let (Some((_, fam)), Ok((_, ev))) = (m.families.first(), first_identity(m)) {
        let star = dual_mul(&m.mult, ev, None)?;
        let n = m.n;
        let base_conn = fam.family.conn.clone();
        let base_mult = m.mult.clone();
        let base_ev = ev.clone();
        let a = EndoField::from_fn(n, move |p, order| {
            let evinv = crate::field::invert_vf(&base_mult, &base_ev);
            let mut out = Vec::with_capacity(n * n);
            for k in 0..n {
                for j in 0..n {
                    let dj = VectorField::coordinate(n, j);
                    let col = mul_vf(
                        &base_mult,
                        &base_ev,
                        &nabla_vf(&base_conn, &dj, &evinv),
                    )
                    .eval(p, order)?;
                    let mut jet = col[k].clone();
                    if k == 0 && j == n - 1 {
                        jet = &jet + &Jet::constant(p.len(), order, 1.0);
                    }
                    out.push(jet);
                }
            }
            Ok(out)
        });
        let bad = conn::conjugated_conn_with_a(&fam.family.conn, &m.mult, ev, &a);
        let t = conn::torsion_defect(&bad, &pts)?;
        let cd = conn::compat_defect(&bad, &star.mult, &pts)?;
        ctx.sharpness(
            "connections.dual_malformed",
            "endomorphisms outside the admissible form break torsion or compatibility",
            t.max.max(cd.max),
            1e-3,
        );
    }
    Ok(())
}

fn suite_flatness(ctx: &mut Ctx) -> Result<()> {
    let m = ctx.model;
    let pts = ctx.points.clone();
    let tol = ctx.tol;
    require_families(m)?;
    if !m.families.iter().any(|(_, f)| f.flat) {
        return Err(Error::Config(format!(
            "model `{}` declares no flat connection; the flatness suite requires one",
            m.spec.name
        )));
    }

    for (fam_name, fam) in &m.families {
        if !fam.flat {
            continue;
        }
        let c = conn::curvature_defect(&fam.family.conn, &pts)?;
        ctx.residual(
            &format!("flatness.curvature.{fam_name}"),
            "the declared flat representative has zero curvature",
            &c,
            tol,
        );

        // unit-multiple pencil stays flat
        let mut pencil = Residual::default();
        for lambda in [-1.0, 0.5, 2.5] {
            let v = m.unit().scale_const(lambda);
            let (crit, curv, inc) = conn::flat_shift_defect(&fam.family, &v, &pts)?;
            pencil.merge(&crit);
            pencil.merge(&curv);
            pencil.merge(&inc);
        }
        ctx.residual(
            &format!("flatness.pencil.{fam_name}"),
            "unit-multiple shifts of a flat member stay flat",
            &pencil,
            tol,
        );

        // a generic shift loses flatness, and the criterion sees it
        let v = seeded_poly_vf(m.n, ctx.seed ^ 0xF1A7);
        let (crit, curv, inc) = conn::flat_shift_defect(&fam.family, &v, &pts)?;
        ctx.sharpness(
            &format!("flatness.shift_criterion.{fam_name}"),
            "a generic shift breaks flatness and the shift criterion detects it",
            crit.max.min(curv.max),
            1e-4,
        );
        ctx.residual(
            &format!("flatness.curvature_increment.{fam_name}"),
            "the curvature increment identity for shifted connections",
            &inc,
            tol,
        );

        for (ei_name, entry) in &m.identities {
            let ev = &entry.field;
            if entry.dual_flat {
                let h = conn::hessian_defect(&fam.family.conn, ev, &pts)?;
                ctx.residual(
                    &format!("flatness.hessian.{fam_name}.{ei_name}"),
                    "the identity's second covariant derivative vanishes",
                    &h,
                    ctx.tol_for(&format!("flatness.hessian.{fam_name}.{ei_name}"), 1e-12),
                );
                let report =
                    conn::dual_flat_defect(&fam.family, ev, &VectorField::zero(m.n), &pts, tol)?;
                ctx.residual(
                    &format!("flatness.dual_flat_condition.{fam_name}.{ei_name}"),
                    "flatness transport condition to the dual family (zero probe)",
                    &report.condition,
                    tol,
                );
                let curv = report.dual_curvature.unwrap_or_else(|| {
                    let mut r = Residual::default();
                    r.absorb(f64::INFINITY);
                    r
                });
                ctx.residual(
                    &format!("flatness.dual_flat_curvature.{fam_name}.{ei_name}"),
                    "the constructed dual connection is flat",
                    &curv,
                    ctx.tol_for(
                        &format!("flatness.dual_flat_curvature.{fam_name}.{ei_name}"),
                        1e-8,
                    ),
                );

                // representative independence of the condition
                let shifted = SpecialFamily::new(
                    conn::shift(&fam.family, &m.unit().scale_const(2.5)),
                    m.mult.clone(),
                );
                let report2 =
                    conn::dual_flat_defect(&shifted, ev, &VectorField::zero(m.n), &pts, tol)?;
                ctx.flag(
                    &format!("flatness.dual_flat_representative.{fam_name}.{ei_name}"),
                    "the transport condition is independent of the flat representative",
                    (report2.condition.max <= tol) == (report.condition.max <= tol)
                        && (report2.condition.max - report.condition.max).abs() <= tol,
                );
            } else {
                // generic identity: the condition must fail visibly
                let report =
                    conn::dual_flat_defect(&fam.family, ev, &VectorField::zero(m.n), &pts, tol)?;
                ctx.sharpness(
                    &format!("flatness.dual_flat_sharpness.{fam_name}.{ei_name}"),
                    "a generic identity fails the flatness transport condition",
                    report.condition.max,
                    1e-4,
                );
            }
        }
    }
    Ok(())
}

fn suite_lorenz(ctx: &mut Ctx) -> Result<()> {
    let m = ctx.model;
    let pts = ctx.points.clone();
    let tol = ctx.tol;
    require_families(m)?;

    for (fam_name, fam) in &m.families {
        let base = conn::lorenz_defect(&fam.family.conn, &m.mult, &pts)?;
        if fam.lorenz_expected {
            ctx.residual(
                &format!("lorenz.status.{fam_name}"),
                "cyclic curvature (semi-Hamiltonian) condition",
                &base,
                tol,
            );
        } else {
            ctx.sharpness(
                &format!("lorenz.status.{fam_name}"),
                "cyclic curvature condition fails for this family",
                base.max,
                1e-4,
            );
        }
        let base_pass = base.max <= tol;

        let mut stable = true;
        for k in 0..5u64 {
            let v = seeded_poly_vf(m.n, ctx.seed ^ (0x10C0 + k));
            let shifted = conn::shift(&fam.family, &v);
            let s = conn::lorenz_defect(&shifted, &m.mult, &pts)?.max <= tol;
            stable &= s == base_pass;
        }
        ctx.flag(
            &format!("lorenz.shift_invariance.{fam_name}"),
            "the condition's status is invariant inside the family (5 seeded shifts)",
            stable,
        );

        for (ei_name, entry) in &m.identities {
            let ev = &entry.field;
            let star = dual_mul(&m.mult, ev, None)?;
            let dual = conn::dual_connection(&fam.family, ev, &VectorField::zero(m.n))?;
            let s = conn::lorenz_defect(&dual, &star.mult, &pts)?.max <= tol;
            ctx.flag(
                &format!("lorenz.duality_invariance.{fam_name}.{ei_name}"),
                "the condition's status is preserved by the duality",
                s == base_pass,
            );
        }
    }

    // the curvature conjugation identity behind the invariance, for
    // arbitrary endomorphism fields
    if let (Some((fam_name, fam)), Ok((ei_name, ev))) = (m.families.first(), first_identity(m)) {
        let mut worst = Residual::default();
        for k in 0..5u64 {
            let a = seeded_endo(m.n, ctx.seed ^ (0xAE00 + k));
            let r = conn::curvature_conjugation_defect(
                &fam.family.conn,
                &m.mult,
                ev,
                &a,
                &pts[..pts.len().min(25)],
            )?;
            worst.merge(&r);
        }
        ctx.residual(
            &format!("lorenz.conjugation.{fam_name}.{ei_name}"),
            "curvature conjugation identity for twisted connections (5 random endomorphisms)",
            &worst,
            tol,
        );
    }
    Ok(())
}

fn suite_legendre(ctx: &mut Ctx) -> Result<()> {
    let m = ctx.model;
    let pts = ctx.points.clone();
    let tol = ctx.tol;
    if m.legendres.is_empty() {
        return Err(Error::Config(format!(
            "model `{}` declares no Legendre field; this suite requires one",
            m.spec.name
        )));
    }

    for (u_name, entry) in &m.legendres {
        let fam = m.family(&entry.family).ok_or_else(|| {
            Error::Config(format!(
                "legendre field `{u_name}` references a missing connection"
            ))
        })?;
        let u = &entry.field;

        let d = conn::legendre_defect(&fam.family, u, &pts)?;
        ctx.residual(
            &format!("legendre.defect.{u_name}"),
            "Legendre symmetry nabla_X(u) o Y = nabla_Y(u) o X",
            &d,
            tol,
        );

        // representative independence
        let shifted = SpecialFamily::new(
            conn::shift(&fam.family, &seeded_poly_vf(m.n, ctx.seed ^ 0x7E6)),
            m.mult.clone(),
        );
        let d2 = conn::legendre_defect(&shifted, u, &pts)?;
        ctx.flag(
            &format!("legendre.representative_independence.{u_name}"),
            "the Legendre defect does not depend on the family representative",
            (d.max - d2.max).abs() <= tol,
        );

        // a generic field fails
        let bad = seeded_poly_vf(m.n, ctx.seed ^ 0xBAD);
        let db = conn::legendre_defect(&fam.family, &bad, &pts)?;
        ctx.sharpness(
            &format!("legendre.sharpness.{u_name}"),
            "a generic field is not a Legendre field",
            db.max,
            1e-4,
        );

        // the transform is special again and conjugates the curvature
        let t = conn::legendre_transform(&fam.family, u, Some((tol, &pts)))?;
        let mut r = conn::torsion_defect(&t.conn, &pts)?;
        r.merge(&conn::compat_defect(&t.conn, &m.mult, &pts)?);
        ctx.residual(
            &format!("legendre.transform_special.{u_name}"),
            "the Legendre transform is torsion-free and compatible",
            &r,
            tol,
        );
        let cc = conn::legendre_curvature_defect(&fam.family, &t.conn, u, &pts)?;
        ctx.residual(
            &format!("legendre.curvature_conjugation.{u_name}"),
            "Legendre curvature conjugation R' = u^-1 o R(u o .)",
            &cc,
            tol,
        );
        if fam.flat {
            let c = conn::curvature_defect(&t.conn, &pts)?;
            ctx.residual(
                &format!("legendre.flat_transport.{u_name}"),
                "Legendre transforms preserve flatness",
                &c,
                tol,
            );
        }
        let before = conn::lorenz_defect(&fam.family.conn, &m.mult, &pts)?.max <= tol;
        let after = conn::lorenz_defect(&t.conn, &m.mult, &pts)?.max <= tol;
        ctx.flag(
            &format!("legendre.lorenz_transport.{u_name}"),
            "Legendre transforms preserve the cyclic curvature status",
            before == after,
        );

        for (ei_name, id_entry) in &m.identities {
            let report =
                conn::legendre_duality_commute(&fam.family, &id_entry.field, u, &pts, tol)?;
            let mut r = report.comparison.residual;
            r.merge(&report.shift_residual);
            r.merge(&report.dual_legendre);
            ctx.residual(
                &format!("legendre.duality_commute.{u_name}.{ei_name}"),
                "Legendre transforms commute with the duality (shift [E^-1,u] + [e,E^-1] o u)",
                &r,
                tol,
            );
        }
    }
    Ok(())
}

fn suite_pullback(ctx: &mut Ctx) -> Result<()> {
    let m = ctx.model;
    let pts = ctx.points.clone();
    let tol = ctx.tol;

    // bundle data: explicit from the model file, and/or the multiplication
    // operator of the first Legendre field's family
    let mut bundles: Vec<(String, BundleData<f64>, Option<String>)> = Vec::new();
    if let Some(b) = &m.bundle {
        bundles.push(("file".to_string(), b.clone(), None));
    }
    if let Some((u_name, entry)) = m.legendres.first() {
        let fam = m.family(&entry.family).ok_or_else(|| {
            Error::Config(format!(
                "legendre field `{u_name}` references a missing connection"
            ))
        })?;
        bundles.push((
            format!("higgs_{u_name}"),
            BundleData::higgs(&m.mult, &fam.family.conn, &entry.field),
            Some(entry.family.clone()),
        ));
    }
    if bundles.is_empty() {
        return Err(Error::Config(format!(
            "model `{}` has neither bundle data nor a Legendre field; the pullback suite needs one",
            m.spec.name
        )));
    }

    for (bname, b, fam_name) in &bundles {
        let (c1, c2, c3) = pullback::bundle_conditions(b, &pts)?;
        let mut all = c1;
        all.merge(&c2);
        all.merge(&c3);
        ctx.residual(
            &format!("pullback.conditions.{bname}"),
            "bundle conditions: flatness of A, commutativity, symmetric derivative of the section",
            &all,
            tol,
        );

        let idd = pullback::bundle_map_identity_defect(b, &pts)?;
        ctx.residual(
            &format!("pullback.map_identity.{bname}"),
            "bundle map identity: A at the preimage returns the argument",
            &idd,
            tol,
        );

        let induced = pullback::induced_multiplication(b);
        let rel = pullback::rel_u_defect(b, &induced, &pts)?;
        ctx.residual(
            &format!("pullback.multiplicative.{bname}"),
            "A is multiplicative over the induced product",
            &rel,
            tol,
        );
        let hm = algebra::hm_defect(&induced, &pts[..pts.len().min(8)])?;
        ctx.residual(
            &format!("pullback.hm_induced.{bname}"),
            "the induced multiplication is integrable",
            &hm,
            tol,
        );

        let f0 = pullback::pullback_connection(b, 0.0);
        let mut r = conn::torsion_defect(&f0, &pts)?;
        r.merge(&conn::compat_defect(&f0, &induced, &pts)?);
        ctx.residual(
            &format!("pullback.connection.{bname}"),
            "the pull-back connection is torsion-free and compatible",
            &r,
            tol,
        );

        // pencil identity F*(D + zA) = F*D + z (induced product)
        let z = 0.7;
        let fz = pullback::pullback_connection(b, z);
        let mut pencil = Residual::default();
        for p in &pts {
            let a = fz.eval(p, 0)?;
            let b0 = f0.eval(p, 0)?;
            let ct = induced.eval(p, 0)?;
            for k in 0..m.n {
                for i in 0..m.n {
                    for j in 0..m.n {
                        pencil.absorb(
                            a.get(k, i, j).value()
                                - b0.get(k, i, j).value()
                                - z * ct.get(k, i, j).value(),
                        );
                    }
                }
            }
        }
        ctx.residual(
            &format!("pullback.pencil.{bname}"),
            "pulling back the connection pencil adds the product pencil",
            &pencil,
            tol,
        );

        if let Some(fam_name) = fam_name {
            let fam = m.family(fam_name).unwrap();
            // the Higgs-field bundle reproduces the source multiplication
            let rep = algebra::mult_difference(&induced, &m.mult, &pts)?;
            ctx.residual(
                &format!("pullback.reproduces_mult.{bname}"),
                "the induced multiplication reproduces the source multiplication",
                &rep,
                ctx.tol_for(&format!("pullback.reproduces_mult.{bname}"), 1e-12),
            );
            // ... and the pull-back connection is the Legendre transform
            let u = &m.legendres.first().unwrap().1.field;
            let lu = conn::legendre_conn(&fam.family.conn, &m.mult, u);
            let d = conn::conn_difference(&f0, &lu, &pts)?;
            ctx.residual(
                &format!("pullback.is_legendre.{bname}"),
                "the pull-back connection is the Legendre conjugation by the section",
                &d,
                tol,
            );
            if fam.flat {
                let mut flat = Residual::default();
                for zz in [-1.0, 0.5, 2.5] {
                    let fzz = pullback::pullback_connection(b, zz);
                    flat.merge(&conn::curvature_defect(&fzz, &pts)?);
                }
                ctx.residual(
                    &format!("pullback.pencil_flat.{bname}"),
                    "all pencil members are flat over a flat bundle connection",
                    &flat,
                    tol,
                );
            }
            // breaking the section symmetry breaks the torsion, while the
            // induced multiplication stays integrable; the probe is a small
            // perturbation of the unit so it remains invertible
            let bad = m
                .unit()
                .add(&seeded_poly_vf(m.n, ctx.seed ^ 0xC3).scale_const(0.3));
            let bb = BundleData::higgs(&m.mult, &fam.family.conn, &bad);
            let (_, _, c3b) = pullback::bundle_conditions(&bb, &pts)?;
            let tb = conn::torsion_defect(&pullback::pullback_connection(&bb, 0.0), &pts)?;
            ctx.sharpness(
                &format!("pullback.section_sharpness.{bname}"),
                "a section violating the symmetric-derivative condition produces torsion",
                c3b.max.min(tb.max),
                1e-4,
            );
            let induced_bad = pullback::induced_multiplication(&bb);
            let hm_bad = algebra::hm_defect(&induced_bad, &pts[..pts.len().min(6)])?;
            ctx.residual(
                &format!("pullback.hm_without_section_condition.{bname}"),
                "dropping the section condition still yields an integrable multiplication",
                &hm_bad,
                tol,
            );
        }
    }
    Ok(())
}

fn suite_kappa(ctx: &mut Ctx) -> Result<()> {
    let m = ctx.model;
    let tol = ctx.tol;
    if !m.spec.kappa_example {
        return Err(Error::Config(format!(
            "model `{}` is not the deformed-prepotential example; the kappa suite does not apply",
            m.spec.name
        )));
    }

    // stored coefficients against independently written closed forms
    let series = kappa_series_field::<f64>()?;
    let pts = m.sample(ctx.npoints.min(60), ctx.seed)?;
    let mut coeff = Residual::default();
    for p in &pts {
        let x = p[1];
        let expect: [[f64; 2]; 4] = [
            [p[0], 2.0 * x],
            [0.5 * x.ln(), x.sqrt()],
            [-0.5 / x.sqrt(), -0.5],
            [0.25 / x, -0.125 / x.sqrt()],
        ];
        for (r, want) in expect.iter().enumerate() {
            let got = series.coefficients[r].values(p)?;
            coeff.absorb(got[0] - want[0]);
            coeff.absorb(got[1] - want[1]);
        }
    }
    ctx.residual(
        "kappa.series_coefficients",
        "stored series coefficients match their closed forms",
        &coeff,
        1e-12,
    );

    // the order-2 truncation solves the component equations to cubic order,
    // with residuals matching their closed forms
    let (_, rep) = kappa_eventual_identity(m, 1e-2, 2)?;
    let exact = rep.ode_exactness.unwrap();
    ctx.residual(
        "kappa.ode_exactness",
        "order-2 residuals equal k^3/(4x) and 3k^3/(16 sqrt(x)) (relative)",
        &exact,
        1e-5,
    );

    let slope = kappa_residual_slope(m, &[1e-1, 1e-2, 1e-3])?;
    ctx.sharpness(
        "kappa.residual_slope",
        "log-log slope of the equation residual against the deformation strength",
        slope,
        2.7,
    );

    let (_, rep) = kappa_eventual_identity(m, 1e-3, 2)?;
    ctx.residual(
        "kappa.identity_defect",
        "characterization defect of the truncated identity at strength 1e-3",
        &rep.identity_defect,
        1e-6,
    );
    ctx.residual(
        "kappa.unit_bracket",
        "[e, E] = e for the series ansatz",
        &rep.unit_bracket,
        1e-12,
    );

    // the truncated identity still twists involutively at finite strength
    let deformed = crate::models::kappa_model(0.1)?;
    let dpts = deformed.sample(ctx.npoints, ctx.seed)?;
    let ev = series.truncate(0.1, 3);
    let star = dual_mul(&deformed.mult, &ev, None)?;
    let back = dual_mul(&star.mult, deformed.unit(), None)?;
    let mut inv = algebra::mult_difference(&back.mult, &deformed.mult, &dpts)?;
    inv.merge(&algebra::vf_difference(
        back.mult.unit(),
        deformed.unit(),
        &dpts,
    )?);
    ctx.residual(
        "kappa.truncated_involution",
        "twisting twice by the truncated identity returns the deformed multiplication",
        &inv,
        tol,
    );
    Ok(())
}

/// Run one suite (or `all`) and assemble the report. Inside `all`, suites
/// whose ingredients the model lacks are skipped; asking for such a suite by
/// name is a configuration error.
pub fn run_suite(
    model: &Model<f64>,
    suite: &str,
    seed: u64,
    npoints: usize,
    tol: f64,
) -> Result<CheckReport> {
    let started = std::time::Instant::now();
    let mut ctx = Ctx::new(model, seed, npoints, tol)?;
    type SuiteFn = fn(&mut Ctx) -> Result<()>;
    let table: [(&str, SuiteFn); 8] = [
        ("algebra", suite_algebra),
        ("duality", suite_duality),
        ("connections", suite_connections),
        ("flatness", suite_flatness),
        ("lorenz", suite_lorenz),
        ("legendre", suite_legendre),
        ("pullback", suite_pullback),
        ("kappa", suite_kappa),
    ];
    match suite {
        "all" => {
            for (_, f) in table {
                match f(&mut ctx) {
                    Ok(()) => {}
                    Err(Error::Config(_)) => {} // ingredient missing: skip inside `all`
                    Err(e) => return Err(e),
                }
            }
        }
        name => {
            let f = table
                .iter()
                .find(|(sname, _)| *sname == name)
                .map(|(_, f)| *f)
                .ok_or_else(|| {
                    Error::Config(format!(
                        "unknown suite `{name}` (available: {})",
                        SUITES.join(", ")
                    ))
                })?;
            f(&mut ctx)?;
        }
    }

    let mut checks = ctx.checks;
    checks.sort_by(|a, b| a.name.cmp(&b.name));
    let passed = checks.iter().filter(|c| c.status == "pass").count();
    let failed = checks.len() - passed;
    Ok(CheckReport {
        schema: REPORT_SCHEMA.to_string(),
        model: model.spec.name.clone(),
        suite: suite.to_string(),
        seed,
        points: npoints,
        tolerance: tol,
        checks,
        passed,
        failed,
        all_pass: failed == 0,
        wall_clock_secs: Some(started.elapsed().as_secs_f64()),
    })
}

/// Static listing of the checks each suite can emit; names with `{...}`
/// segments expand per model ingredient.
pub fn list_checks(suite: &str) -> Vec<(&'static str, &'static str)> {
    let algebra = vec![
        ("algebra.commutativity", "commutativity of the multiplication"),
        ("algebra.associativity", "associativity of the multiplication"),
        ("algebra.unit_law", "unit law e o X = X"),
        ("algebra.hm", "Hertling-Manin integrability of the multiplication"),
        ("algebra.hm_tensoriality", "integrability defect scales under function-scaled frames"),
        ("algebra.associativity_sharpness", "perturbed multiplication loses associativity"),
        ("algebra.hm_sharpness", "perturbed multiplication loses integrability"),
        ("algebra.ei_defect.{ei}", "eventual-identity characterization"),
        ("algebra.power_bracket.{ei}.{n}_{m}", "power-bracket identity"),
        ("algebra.ei_group", "products of eventual identities are eventual identities"),
        ("algebra.ei_sharpness", "a coordinate-rotated field fails the characterization"),
        ("algebra.jets_vs_fd", "exact jets against central finite differences"),
    ];
    let duality = vec![
        ("duality.dual_unit.{ei}", "E is the unit of the twist"),
        ("duality.unit_inverse.{ei}", "twisted inverse of e is E o E"),
        ("duality.involution_mult.{ei}", "twisting twice returns the structure"),
        ("duality.hm_transport.{ei}", "the twist is integrable"),
        ("duality.aux_identity.{conn}.{ei}", "auxiliary covariant-derivative identity"),
        ("duality.involution_families.{conn}.{ei}", "duality involution on special families"),
        ("duality.second_member.{conn}.{ei}", "second structure connection lies in the dual family"),
        ("duality.second_nabla_e.{conn}.{ei}", "derivative of the identity under the second structure connection"),
        ("duality.unit_parallel_double.{ei}", "fixed-unit duality is an involution"),
        ("duality.second_double.{ei}", "second-structure duality is an involution"),
    ];
    let connections = vec![
        ("connections.torsion.{conn}", "representative is torsion-free"),
        ("connections.compat.{conn}", "nabla(mult) is totally symmetric"),
        ("connections.shift_roundtrip.{conn}", "shifts preserve the family and are recovered"),
        ("connections.unit_parallel.{conn}", "unique unit-parallel member"),
        ("connections.dual_family.{conn}.{ei}", "dual connections torsion-free and star-compatible"),
        ("connections.dual_malformed", "inadmissible endomorphisms break the dual structure"),
    ];
    let flatness = vec![
        ("flatness.curvature.{conn}", "declared flat representative has zero curvature"),
        ("flatness.pencil.{conn}", "unit-multiple shifts stay flat"),
        ("flatness.shift_criterion.{conn}", "generic shifts break flatness detectably"),
        ("flatness.curvature_increment.{conn}", "curvature increment identity"),
        ("flatness.hessian.{conn}.{ei}", "second covariant derivative of the identity vanishes"),
        ("flatness.dual_flat_condition.{conn}.{ei}", "flatness transport condition"),
        ("flatness.dual_flat_curvature.{conn}.{ei}", "constructed dual connection is flat"),
        ("flatness.dual_flat_representative.{conn}.{ei}", "condition independent of the representative"),
        ("flatness.dual_flat_sharpness.{conn}.{ei}", "generic identities fail the condition"),
    ];
    let lorenz = vec![
        ("lorenz.status.{conn}", "cyclic curvature (semi-Hamiltonian) condition"),
        ("lorenz.shift_invariance.{conn}", "status invariant inside the family"),
        ("lorenz.duality_invariance.{conn}.{ei}", "status preserved by the duality"),
        ("lorenz.conjugation.{conn}.{ei}", "curvature conjugation identity"),
    ];
    let legendre = vec![
        ("legendre.defect.{u}", "Legendre symmetry"),
        ("legendre.representative_independence.{u}", "defect independent of the representative"),
        ("legendre.sharpness.{u}", "generic fields are not Legendre"),
        ("legendre.transform_special.{u}", "transform is torsion-free and compatible"),
        ("legendre.curvature_conjugation.{u}", "Legendre curvature conjugation"),
        ("legendre.flat_transport.{u}", "transform preserves flatness"),
        ("legendre.lorenz_transport.{u}", "transform preserves the cyclic curvature status"),
        ("legendre.duality_commute.{u}.{ei}", "Legendre transforms commute with the duality"),
    ];
    let pullback = vec![
        ("pullback.conditions.{bundle}", "bundle conditions"),
        ("pullback.map_identity.{bundle}", "bundle map identity"),
        ("pullback.multiplicative.{bundle}", "A multiplicative over the induced product"),
        ("pullback.hm_induced.{bundle}", "induced multiplication is integrable"),
        ("pullback.connection.{bundle}", "pull-back connection torsion-free and compatible"),
        ("pullback.pencil.{bundle}", "pencil identity"),
        ("pullback.reproduces_mult.{bundle}", "induced multiplication reproduces the source"),
        ("pullback.is_legendre.{bundle}", "pull-back connection is the Legendre conjugation"),
        ("pullback.pencil_flat.{bundle}", "pencil members flat over a flat connection"),
        ("pullback.section_sharpness.{bundle}", "bad sections produce torsion"),
    ];
    let kappa = vec![
        ("kappa.series_coefficients", "stored series coefficients match closed forms"),
        ("kappa.ode_exactness", "order-2 residuals equal their closed forms"),
        ("kappa.residual_slope", "cubic residual scaling in the deformation"),
        ("kappa.identity_defect", "truncated identity characterization defect"),
        ("kappa.unit_bracket", "[e, E] = e for the ansatz"),
        ("kappa.truncated_involution", "truncated identity twists involutively"),
    ];
    match suite {
        "algebra" => algebra,
        "duality" => duality,
        "connections" => connections,
        "flatness" => flatness,
        "lorenz" => lorenz,
        "legendre" => legendre,
        "pullback" => pullback,
        "kappa" => kappa,
        "all" => {
            let mut out = algebra;
            out.extend(duality);
            out.extend(connections);
            out.extend(flatness);
            out.extend(lorenz);
            out.extend(legendre);
            out.extend(pullback);
            out.extend(kappa);
            out
        }
        _ => Vec::new(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::build_builtin;

    #[test]
    fn reports_are_byte_reproducible() {
        let m = build_builtin("semisimple2").unwrap();
        let a = run_suite(&m, "algebra", 42, 40, 1e-9).unwrap();
        let b = run_suite(&m, "algebra", 42, 40, 1e-9).unwrap();
        assert_eq!(a.to_canonical_json(), b.to_canonical_json());
        assert!(a.wall_clock_secs.is_some());
        assert!(a.to_canonical_json().contains("\"wall_clock_secs\": null"));
    }

    #[test]
    fn unknown_suite_is_config_error() {
        let m = build_builtin("semisimple2").unwrap();
        assert!(matches!(
            run_suite(&m, "nope", 1, 10, 1e-9),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn missing_ingredient_is_config_error() {
        let spec = crate::models::semisimple_model_spec(
            "bare",
            2,
            vec![[0.5, 1.5], [2.0, 3.0]],
            Default::default(),
        );
        let m = spec.build::<f64>().unwrap();
        assert!(matches!(
            run_suite(&m, "duality", 1, 10, 1e-9),
            Err(Error::Config(_))
        ));
        // `all` skips missing-ingredient suites and still reports the rest
        let rep = run_suite(&m, "all", 1, 10, 1e-9).unwrap();
        assert!(rep.all_pass);
        assert!(rep.checks.iter().any(|c| c.name == "algebra.hm"));
    }

    #[test]
    fn list_checks_nonempty_for_every_suite() {
        for s in SUITES {
            assert!(!list_checks(s).is_empty(), "{s}");
        }
    }
}
