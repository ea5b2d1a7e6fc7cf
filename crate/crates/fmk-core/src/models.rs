//! Built-in geometries and the declarative model format.
//!
//! A [`ModelSpec`] is the pure-data description (everything an expression
//! string); [`ModelSpec::build`] parses, validates the load gates, and
//! produces a runtime [`Model`]. The built-ins:
//!
//! * `semisimple2`, `semisimple3` — canonical-coordinate charts where the
//!   multiplication is componentwise, with Euler-type identities and both
//!   curved and flat compatible connections,
//! * `kappa2d` — the deformed prepotential
//!   `F = t1^2 t2 / 2 + t2^2 log(t2^2) / 4 - k t1^3 / 6`, whose `k = 0`
//!   slice is a Frobenius chart and whose deformation carries a power-series
//!   eventual identity,
//! * `frob-cp1` — `F = t1^2 t2 / 2 + exp(t2)`, a second flat prepotential
//!   chart.

use std::collections::BTreeMap;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::algebra::{
    algebra_defects, eventual_identity_defect, hm_defect, Residual, EI_GATE,
};
use crate::conn::{legendre_defect, SpecialFamily};
use crate::domain::{ChartDomain, DEFAULT_MARGIN};
use crate::error::{Error, Result};
use crate::expr::{parse_expr, Expr, Params};
use crate::field::{ConnField, MultField, VectorField};
use crate::linalg::invert_values;
use crate::pullback::BundleData;
use crate::scalar::Real;

/// Load-gate tolerance for algebra and connection validation.
pub const LOAD_GATE: f64 = 1e-9;
const VALIDATION_POINTS: usize = 30;
const VALIDATION_SEED: u64 = 0xF0F0;

// ---------------------------------------------------------------------------
// Declarative model description
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExclusionSpec {
    pub expr: String,
    pub margin: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DomainSpec {
    /// Per-coordinate `[lo, hi]`.
    #[serde(rename = "box")]
    pub bounds: Vec<[f64; 2]>,
    #[serde(default)]
    pub exclusions: Vec<ExclusionSpec>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum MultSpec {
    /// Structure constants from a prepotential: `c^k_ij = eta^{kl} F_lij`
    /// with `eta_ij = F_1ij` required constant and invertible; the unit is
    /// the first coordinate field.
    Prepotential { prepotential: String },
    /// Explicit structure functions `c[k][i][j]`.
    Explicit { c: Vec<Vec<Vec<String>>> },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct IdentitySpec {
    pub components: Vec<String>,
    /// Whether the flat-duality transport check (second covariant derivative
    /// condition with zero probe) is expected to hold for this identity.
    #[serde(default)]
    pub dual_flat: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConnectionSpec {
    pub gamma: Vec<Vec<Vec<String>>>,
    #[serde(default)]
    pub flat: bool,
    /// Expected status of the cyclic curvature condition.
    #[serde(default = "default_true")]
    pub lorenz: bool,
}

fn default_true() -> bool {
    true
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LegendreSpec {
    pub components: Vec<String>,
    /// Name of the connection this field is a Legendre field for.
    pub family: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BundleSpec {
    pub rank: usize,
    /// `D^a_{i b}` as `d[a][i][b]`.
    pub d: Vec<Vec<Vec<String>>>,
    /// `(A_i)^a_b` as `a[aa][i][b]`.
    pub a: Vec<Vec<Vec<String>>>,
    pub u: Vec<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModelSpec {
    pub schema: String,
    pub name: String,
    pub dimension: usize,
    #[serde(default)]
    pub parameters: BTreeMap<String, f64>,
    pub domain: DomainSpec,
    pub multiplication: MultSpec,
    /// Unit field components; optional (and implied) for prepotential models.
    #[serde(default)]
    pub unit: Option<Vec<String>>,
    #[serde(default)]
    pub eventual_identities: BTreeMap<String, IdentitySpec>,
    #[serde(default)]
    pub connections: BTreeMap<String, ConnectionSpec>,
    #[serde(default)]
    pub legendre_fields: BTreeMap<String, LegendreSpec>,
    #[serde(default)]
    pub bundle: Option<BundleSpec>,
    /// Marks the deformed-prepotential example the `kappa` suite runs on.
    #[serde(default)]
    pub kappa_example: bool,
    /// Per-check tolerance overrides, keyed by check name.
    #[serde(default)]
    pub tolerances: BTreeMap<String, f64>,
}

pub const SCHEMA_VERSION: &str = "fmk-model/1";

// ---------------------------------------------------------------------------
// Runtime model
// ---------------------------------------------------------------------------

pub struct FamilyEntry<T> {
    pub family: SpecialFamily<T>,
    pub flat: bool,
    pub lorenz_expected: bool,
}

pub struct LegendreEntry<T> {
    pub field: VectorField<T>,
    pub family: String,
}

pub struct IdentityEntry<T> {
    pub field: VectorField<T>,
    pub dual_flat: bool,
}

pub struct Model<T> {
    pub spec: ModelSpec,
    pub n: usize,
    pub domain: ChartDomain<T>,
    pub params: Arc<Params<T>>,
    pub mult: MultField<T>,
    pub identities: Vec<(String, IdentityEntry<T>)>,
    pub families: Vec<(String, FamilyEntry<T>)>,
    pub legendres: Vec<(String, LegendreEntry<T>)>,
    pub bundle: Option<BundleData<T>>,
}

impl<T> std::fmt::Debug for Model<T> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "Model({}, n={})", self.spec.name, self.n)
    }
}

impl<T: Real> Model<T> {
    pub fn unit(&self) -> &VectorField<T> {
        self.mult.unit()
    }

    pub fn sample(&self, count: usize, seed: u64) -> Result<Vec<Vec<T>>> {
        self.domain.sample(count, seed, &self.params)
    }

    pub fn identity(&self, name: &str) -> Option<&IdentityEntry<T>> {
        self.identities
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, e)| e)
    }

    pub fn family(&self, name: &str) -> Option<&FamilyEntry<T>> {
        self.families.iter().find(|(n, _)| n == name).map(|(_, e)| e)
    }

    pub fn tolerance_for(&self, check: &str, default: f64) -> f64 {
        self.spec.tolerances.get(check).copied().unwrap_or(default)
    }
}

impl ModelSpec {
    /// Parse, validate every load gate, and build the runtime model.
    pub fn build<T: Real>(&self) -> Result<Model<T>> {
        if self.schema != SCHEMA_VERSION {
            return Err(Error::Schema(format!(
                "unsupported schema `{}` (expected `{SCHEMA_VERSION}`)",
                self.schema
            )));
        }
        let n = self.dimension;
        if n == 0 {
            return Err(Error::Schema("dimension must be positive".into()));
        }
        let param_names: Vec<&str> = self.parameters.keys().map(|s| s.as_str()).collect();
        let parse = |s: &str| -> Result<Expr> { parse_expr(s, n, &param_names) };

        if self.domain.bounds.len() != n {
            return Err(Error::Schema(format!(
                "domain box has {} entries for dimension {n}",
                self.domain.bounds.len()
            )));
        }
        let lo: Vec<T> = self
            .domain
            .bounds
            .iter()
            .map(|b| T::from_f64_lossy(b[0]))
            .collect();
        let hi: Vec<T> = self
            .domain
            .bounds
            .iter()
            .map(|b| T::from_f64_lossy(b[1]))
            .collect();
        let mut domain = ChartDomain::new(lo, hi)?;
        for ex in &self.domain.exclusions {
            domain = domain.with_exclusion(parse(&ex.expr)?, ex.margin);
        }

        let params = Arc::new(Params::from_iter(
            self.parameters
                .iter()
                .map(|(k, v)| (k.clone(), T::from_f64_lossy(*v))),
        ));
        let points = domain.sample(VALIDATION_POINTS, VALIDATION_SEED, &params)?;

        // multiplication + unit
        let mult = match &self.multiplication {
            MultSpec::Explicit { c } => {
                let unit_exprs = self.unit.as_ref().ok_or_else(|| {
                    Error::Schema("explicit multiplication requires a unit field".into())
                })?;
                if c.len() != n
                    || c.iter().any(|m| m.len() != n || m.iter().any(|r| r.len() != n))
                {
                    return Err(Error::Schema(format!(
                        "multiplication needs {n}x{n}x{n} structure functions"
                    )));
                }
                let mut comps = Vec::with_capacity(n);
                for k in 0..n {
                    let mut mat = Vec::with_capacity(n);
                    for i in 0..n {
                        let mut row = Vec::with_capacity(n);
                        for j in 0..n {
                            row.push(parse(&c[k][i][j])?);
                        }
                        mat.push(row);
                    }
                    comps.push(mat);
                }
                let sym = MultField::symmetry_defect_exprs(n, &comps, &params, &points)?;
                if sym.to_f64_lossy() > 1e-12 {
                    return Err(Error::Model(format!(
                        "gate multiplication-symmetry: declared c^k_ij differs from c^k_ji by {:.3e}",
                        sym.to_f64_lossy()
                    )));
                }
                let unit = VectorField::from_exprs(
                    n,
                    unit_exprs
                        .iter()
                        .map(|s| parse(s))
                        .collect::<Result<Vec<_>>>()?,
                    params.clone(),
                )?;
                MultField::from_exprs(n, comps, params.clone())?.with_unit(unit)
            }
            MultSpec::Prepotential { prepotential } => {
                let f = parse(prepotential)?;
                if let Some(unit_exprs) = &self.unit {
                    let expect: Vec<String> = (0..n)
                        .map(|i| if i == 0 { "1" } else { "0" }.to_string())
                        .collect();
                    if unit_exprs != &expect {
                        return Err(Error::Schema(
                            "prepotential models fix the unit to the first coordinate field".into(),
                        ));
                    }
                }
                build_prepotential_mult(n, &f, params.clone(), &points)?
            }
        };

        // basic algebra gates
        let (comm, assoc, unitlaw) = algebra_defects(&mult, &points)?;
        for (name, r) in [
            ("commutativity", &comm),
            ("associativity", &assoc),
            ("unit-law", &unitlaw),
        ] {
            if r.max > LOAD_GATE {
                return Err(Error::Model(format!(
                    "gate {name}: residual {:.3e} exceeds {LOAD_GATE:.1e}",
                    r.max
                )));
            }
        }
        let hm = hm_defect(&mult, &points[..points.len().min(10)])?;
        if hm.max > LOAD_GATE {
            return Err(Error::Model(format!(
                "gate hertling-manin: residual {:.3e} exceeds {LOAD_GATE:.1e}",
                hm.max
            )));
        }

        // eventual identities (gate overridable through the tolerances map)
        let ei_gate = self
            .tolerances
            .get("gates.eventual_identity")
            .copied()
            .unwrap_or(EI_GATE);
        let mut identities = Vec::new();
        for (name, spec) in &self.eventual_identities {
            let field = VectorField::from_exprs(
                n,
                spec.components
                    .iter()
                    .map(|s| parse(s))
                    .collect::<Result<Vec<_>>>()?,
                params.clone(),
            )?;
            let d = eventual_identity_defect(&mult, &field, &points)?;
            if d.max > ei_gate {
                return Err(Error::Model(format!(
                    "gate eventual-identity `{name}`: characterization defect {:.3e} exceeds {ei_gate:.1e}",
                    d.max
                )));
            }
            identities.push((
                name.clone(),
                IdentityEntry {
                    field,
                    dual_flat: spec.dual_flat,
                },
            ));
        }

        // connections
        let mut families = Vec::new();
        for (name, spec) in &self.connections {
            if spec.gamma.len() != n
                || spec
                    .gamma
                    .iter()
                    .any(|m| m.len() != n || m.iter().any(|r| r.len() != n))
            {
                return Err(Error::Schema(format!(
                    "connection `{name}` needs {n}x{n}x{n} Christoffel functions"
                )));
            }
            let mut comps = Vec::with_capacity(n);
            for k in 0..n {
                let mut mat = Vec::with_capacity(n);
                for i in 0..n {
                    let mut row = Vec::with_capacity(n);
                    for j in 0..n {
                        row.push(parse(&spec.gamma[k][i][j])?);
                    }
                    mat.push(row);
                }
                comps.push(mat);
            }
            let conn = ConnField::from_exprs(n, comps, params.clone())?;
            let family = SpecialFamily::new(conn, mult.clone());
            // torsion and compatibility gate at load; flatness claims are a
            // suite check, so a model declaring `flat` on a curved
            // connection loads fine and fails the named check instead
            family
                .validate(&points, LOAD_GATE)
                .map_err(|e| Error::Model(format!("connection `{name}`: {e}")))?;
            families.push((
                name.clone(),
                FamilyEntry {
                    family,
                    flat: spec.flat,
                    lorenz_expected: spec.lorenz,
                },
            ));
        }

        // legendre fields
        let mut legendres = Vec::new();
        for (name, spec) in &self.legendre_fields {
            let field = VectorField::from_exprs(
                n,
                spec.components
                    .iter()
                    .map(|s| parse(s))
                    .collect::<Result<Vec<_>>>()?,
                params.clone(),
            )?;
            let fam = families
                .iter()
                .find(|(fname, _)| fname == &spec.family)
                .map(|(_, f)| f)
                .ok_or_else(|| {
                    Error::Schema(format!(
                        "legendre field `{name}` references unknown connection `{}`",
                        spec.family
                    ))
                })?;
            let d = legendre_defect(&fam.family, &field, &points)?;
            if d.max > LOAD_GATE {
                return Err(Error::Model(format!(
                    "gate legendre `{name}`: symmetry defect {:.3e} exceeds {LOAD_GATE:.1e}",
                    d.max
                )));
            }
            legendres.push((
                name.clone(),
                LegendreEntry {
                    field,
                    family: spec.family.clone(),
                },
            ));
        }

        // bundle data
        let bundle = match &self.bundle {
            None => None,
            Some(b) => {
                let r = b.rank;
                let grid = |src: &Vec<Vec<Vec<String>>>, what: &str| -> Result<ConnField<T>> {
                    if src.len() != r
                        || src
                            .iter()
                            .any(|m| m.len() != n || m.iter().any(|row| row.len() != r))
                    {
                        return Err(Error::Schema(format!(
                            "bundle `{what}` needs shape {r}x{n}x{r}"
                        )));
                    }
                    let mut comps = Vec::with_capacity(r);
                    for a in 0..r {
                        let mut mat = Vec::with_capacity(n);
                        for i in 0..n {
                            let mut row = Vec::with_capacity(r);
                            for bb in 0..r {
                                row.push(parse(&src[a][i][bb])?);
                            }
                            mat.push(row);
                        }
                        comps.push(mat);
                    }
                    ConnField::from_exprs(r, comps, params.clone())
                };
                Some(BundleData {
                    rank: r,
                    d: grid(&b.d, "d")?,
                    a: grid(&b.a, "a")?,
                    u: VectorField::from_exprs(
                        r,
                        b.u.iter().map(|s| parse(s)).collect::<Result<Vec<_>>>()?,
                        params.clone(),
                    )?,
                })
            }
        };

        Ok(Model {
            spec: self.clone(),
            n,
            domain,
            params,
            mult,
            identities,
            families,
            legendres,
            bundle,
        })
    }
}

/// Derive structure functions from a prepotential: validates that the
/// pairing `eta_ij = F_1ij` is constant over the chart and invertible, then
/// raises an index.
fn build_prepotential_mult<T: Real>(
    n: usize,
    f: &Expr,
    params: Arc<Params<T>>,
    points: &[Vec<T>],
) -> Result<MultField<T>> {
    // third derivatives
    let mut d3 = vec![vec![vec![Expr::Num(0.0); n]; n]; n];
    for i in 0..n {
        let fi = f.diff(i);
        for j in i..n {
            let fij = fi.diff(j);
            for l in j..n {
                let e = fij.diff(l);
                for perm in [(i, j, l), (i, l, j), (j, i, l), (j, l, i), (l, i, j), (l, j, i)] {
                    d3[perm.0][perm.1][perm.2] = e.clone();
                }
            }
        }
    }
    // eta must be constant and invertible
    let p0 = &points[0];
    let mut eta = vec![vec![T::zero(); n]; n];
    for i in 0..n {
        for j in 0..n {
            eta[i][j] = d3[0][i][j].eval_jet(p0, 0, &params)?.value();
        }
    }
    let mut variation = T::zero();
    for p in points {
        for i in 0..n {
            for j in 0..n {
                let v = d3[0][i][j].eval_jet(p, 0, &params)?.value();
                variation = variation.max((v - eta[i][j]).abs());
            }
        }
    }
    if variation.to_f64_lossy() > 1e-10 {
        return Err(Error::Model(format!(
            "gate eta-constancy: pairing varies by {:.3e} over the chart",
            variation.to_f64_lossy()
        )));
    }
    let eta_inv = invert_values(&eta).ok_or_else(|| {
        Error::Model("gate eta-invertibility: degenerate pairing from the prepotential".into())
    })?;

    // c^k_ij = eta^{kl} F_lij as expressions with numeric coefficients
    let mut comps = vec![vec![vec![Expr::Num(0.0); n]; n]; n];
    for k in 0..n {
        for i in 0..n {
            for j in 0..n {
                let mut acc = Expr::Num(0.0);
                for l in 0..n {
                    let w = eta_inv[k][l].to_f64_lossy();
                    if w != 0.0 {
                        acc = Expr::add(acc, Expr::mul(Expr::Num(w), d3[l][i][j].clone()));
                    }
                }
                comps[k][i][j] = acc;
            }
        }
    }
    let mut unit_vals = vec![T::zero(); n];
    unit_vals[0] = T::one();
    let unit = VectorField::constant(n, unit_vals);
    Ok(MultField::from_exprs(n, comps, params)?.with_unit(unit))
}

// ---------------------------------------------------------------------------
// Semisimple builders
// ---------------------------------------------------------------------------

/// Structure functions for canonical coordinates: `c^k_ij = 1` iff
/// `i = j = k`, unit `(1, ..., 1)`.
fn semisimple_mult_spec(n: usize) -> MultSpec {
    let mut c = vec![vec![vec!["0".to_string(); n]; n]; n];
    #[allow(clippy::needless_range_loop)]
    for k in 0..n {
        c[k][k][k] = "1".to_string();
    }
    MultSpec::Explicit { c }
}

/// Assemble a semisimple chart spec with the given box and identities.
pub fn semisimple_model_spec(
    name: &str,
    n: usize,
    bounds: Vec<[f64; 2]>,
    identities: BTreeMap<String, IdentitySpec>,
) -> ModelSpec {
    let mut exclusions = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            exclusions.push(ExclusionSpec {
                expr: format!("u{} - u{}", i + 1, j + 1),
                margin: DEFAULT_MARGIN,
            });
        }
    }
    for i in 0..n {
        exclusions.push(ExclusionSpec {
            expr: format!("u{}", i + 1),
            margin: DEFAULT_MARGIN,
        });
    }
    ModelSpec {
        schema: SCHEMA_VERSION.to_string(),
        name: name.to_string(),
        dimension: n,
        parameters: BTreeMap::new(),
        domain: DomainSpec { bounds, exclusions },
        multiplication: semisimple_mult_spec(n),
        unit: Some(vec!["1".to_string(); n]),
        eventual_identities: identities,
        connections: BTreeMap::new(),
        legendre_fields: BTreeMap::new(),
        bundle: None,
        kappa_example: false,
        tolerances: BTreeMap::new(),
    }
}

/// Validation used by [`semisimple_model`]: each identity component must be
/// a nonvanishing function of its own coordinate alone.
pub fn validate_semisimple_identity<T: Real>(
    n: usize,
    comps: &[Expr],
    params: &Params<T>,
    points: &[Vec<T>],
) -> Result<()> {
    for (i, e) in comps.iter().enumerate() {
        for j in 0..n {
            if j == i {
                continue;
            }
            let d = e.diff(j);
            for p in points {
                if d.eval_jet(p, 0, params)?.value().abs() > T::from_f64_lossy(1e-12) {
                    return Err(Error::Model(format!(
                        "identity component {} depends on coordinate {} (must be a function of u{} alone)",
                        i + 1,
                        j + 1,
                        i + 1
                    )));
                }
            }
        }
        let mut lo = T::infinity();
        let mut hi = T::neg_infinity();
        for p in points {
            let v = e.eval_jet(p, 0, params)?.value();
            lo = lo.min(v);
            hi = hi.max(v);
        }
        if (lo < T::zero() && hi > T::zero()) || lo.abs().min(hi.abs()) < T::from_f64_lossy(1e-6) {
            return Err(Error::Model(format!(
                "identity component {} vanishes on the chart",
                i + 1
            )));
        }
    }
    Ok(())
}

/// Build a semisimple chart model with the identity
/// `sum_i f_i(u^i) d_i` (each `f_i` nonvanishing, depending on `u^i` only).
pub fn semisimple_model<T: Real>(
    n: usize,
    f_exprs: &[&str],
    bounds: Vec<[f64; 2]>,
) -> Result<Model<T>> {
    let mut ids = BTreeMap::new();
    ids.insert(
        "custom".to_string(),
        IdentitySpec {
            components: f_exprs.iter().map(|s| s.to_string()).collect(),
            dual_flat: false,
        },
    );
    let spec = semisimple_model_spec("semisimple-custom", n, bounds, ids);
    // structural validation of the f_i before the generic gates run
    let params: Params<T> = Params::new();
    let comps: Vec<Expr> = f_exprs
        .iter()
        .map(|s| parse_expr(s, n, &[]))
        .collect::<Result<Vec<_>>>()?;
    let lo: Vec<T> = spec.domain.bounds.iter().map(|b| T::from_f64_lossy(b[0])).collect();
    let hi: Vec<T> = spec.domain.bounds.iter().map(|b| T::from_f64_lossy(b[1])).collect();
    let mut dom = ChartDomain::new(lo, hi)?;
    for ex in &spec.domain.exclusions {
        dom = dom.with_exclusion(parse_expr(&ex.expr, n, &[])?, ex.margin);
    }
    let pts = dom.sample(VALIDATION_POINTS, VALIDATION_SEED, &params)?;
    validate_semisimple_identity(n, &comps, &params, &pts)?;
    spec.build()
}

/// Christoffel expressions of the distinguished-field connection on a
/// semisimple chart: `G^j_ii = d_i X^j / (X^j - X^i)` off the diagonal,
/// `G^i_ij = G^i_ji = -G^i_jj`, and free diagonal entries `G^i_ii`.
pub fn semisimple_connection_gamma(n: usize, x0: &[Expr], diag: &[Expr]) -> Vec<Vec<Vec<Expr>>> {
    let mut g = vec![vec![vec![Expr::Num(0.0); n]; n]; n];
    for i in 0..n {
        for j in 0..n {
            if i == j {
                continue;
            }
            g[j][i][i] = Expr::div(x0[j].diff(i), Expr::sub(x0[j].clone(), x0[i].clone()));
        }
    }
    for i in 0..n {
        for j in 0..n {
            if i == j {
                continue;
            }
            let v = g[i][j][j].clone();
            g[i][i][j] = Expr::neg(v.clone());
            g[i][j][i] = Expr::neg(v);
        }
    }
    for i in 0..n {
        g[i][i][i] = diag[i].clone();
    }
    g
}

/// Validate distinctness of the distinguished field's components and attach
/// the connection (plus its Legendre field `x0_<name>`) to a semisimple
/// model spec.
pub fn attach_semisimple_connection<T: Real>(
    spec: &mut ModelSpec,
    conn_name: &str,
    x0_exprs: &[&str],
    diag_exprs: &[&str],
    flat: bool,
    lorenz: bool,
) -> Result<()> {
    let n = spec.dimension;
    let x0: Vec<Expr> = x0_exprs
        .iter()
        .map(|s| parse_expr(s, n, &[]))
        .collect::<Result<Vec<_>>>()?;
    let diag: Vec<Expr> = diag_exprs
        .iter()
        .map(|s| parse_expr(s, n, &[]))
        .collect::<Result<Vec<_>>>()?;

    // margin check: components pairwise distinct on the chart
    let params: Params<T> = Params::new();
    let lo: Vec<T> = spec.domain.bounds.iter().map(|b| T::from_f64_lossy(b[0])).collect();
    let hi: Vec<T> = spec.domain.bounds.iter().map(|b| T::from_f64_lossy(b[1])).collect();
    let mut dom = ChartDomain::new(lo, hi)?;
    for ex in &spec.domain.exclusions {
        dom = dom.with_exclusion(parse_expr(&ex.expr, n, &[])?, ex.margin);
    }
    let pts = dom.sample(VALIDATION_POINTS, VALIDATION_SEED, &params)?;
    for p in &pts {
        for i in 0..n {
            for j in i + 1..n {
                let xi = x0[i].eval_jet(p, 0, &params)?.value();
                let xj = x0[j].eval_jet(p, 0, &params)?.value();
                if (xi - xj).abs() < T::from_f64_lossy(DEFAULT_MARGIN) {
                    return Err(Error::Model(format!(
                        "distinguished field components {} and {} coincide on the chart (margin {DEFAULT_MARGIN})",
                        i + 1,
                        j + 1
                    )));
                }
            }
        }
    }

    let gamma = semisimple_connection_gamma(n, &x0, &diag);
    let gamma_strings: Vec<Vec<Vec<String>>> = gamma
        .iter()
        .map(|m| m.iter().map(|r| r.iter().map(|e| e.to_string()).collect()).collect())
        .collect();
    spec.connections.insert(
        conn_name.to_string(),
        ConnectionSpec {
            gamma: gamma_strings,
            flat,
            lorenz,
        },
    );
    spec.legendre_fields.insert(
        format!("x0_{conn_name}"),
        LegendreSpec {
            components: x0_exprs.iter().map(|s| s.to_string()).collect(),
            family: conn_name.to_string(),
        },
    );
    Ok(())
}

// ---------------------------------------------------------------------------
// Built-in registry
// ---------------------------------------------------------------------------

pub const BUILTIN_NAMES: [&str; 4] = ["semisimple2", "semisimple3", "kappa2d", "frob-cp1"];

pub fn builtin_spec(name: &str) -> Result<ModelSpec> {
    match name {
        "semisimple2" => semisimple2_spec(),
        "semisimple3" => semisimple3_spec(),
        "kappa2d" => kappa_spec(0.0),
        "frob-cp1" => frob_cp1_spec(),
        other => Err(Error::Config(format!(
            "unknown builtin model `{other}` (available: {})",
            BUILTIN_NAMES.join(", ")
        ))),
    }
}

pub fn build_builtin(name: &str) -> Result<Model<f64>> {
    builtin_spec(name)?.build()
}

fn semisimple2_spec() -> Result<ModelSpec> {
    let mut ids = BTreeMap::new();
    ids.insert(
        "euler".to_string(),
        IdentitySpec {
            components: vec!["u1".into(), "u2".into()],
            dual_flat: true,
        },
    );
    ids.insert(
        "exps".to_string(),
        IdentitySpec {
            components: vec!["exp(u1)".into(), "1 + u2^2".into()],
            dual_flat: false,
        },
    );
    let mut spec = semisimple_model_spec("semisimple2", 2, vec![[0.5, 1.5], [2.0, 3.0]], ids);
    attach_semisimple_connection::<f64>(
        &mut spec,
        "x0",
        &["u1 + u2^2/4", "2*u2 + u1^2/4"],
        &["u2/4", "u1/4"],
        false,
        true,
    )?;
    // first structure connection of the two-dimensional flat prepotential
    // chart written in canonical coordinates; flat and compatible, with
    // nonzero off-diagonal Christoffels so the flat-shift criterion has
    // teeth here
    let gamma = vec![
        vec![
            vec!["-1/(2*(u1 - u2))".to_string(), "1/(2*(u1 - u2))".to_string()],
            vec!["1/(2*(u1 - u2))".to_string(), "-1/(2*(u1 - u2))".to_string()],
        ],
        vec![
            vec!["1/(2*(u1 - u2))".to_string(), "-1/(2*(u1 - u2))".to_string()],
            vec!["-1/(2*(u1 - u2))".to_string(), "1/(2*(u1 - u2))".to_string()],
        ],
    ];
    spec.connections.insert(
        "flat".to_string(),
        ConnectionSpec {
            gamma,
            flat: true,
            lorenz: true,
        },
    );
    spec.legendre_fields.insert(
        "w_flat".to_string(),
        LegendreSpec {
            components: vec!["(u1 - u2)/4".into(), "-(u1 - u2)/4".into()],
            family: "flat".to_string(),
        },
    );
    Ok(spec)
}

fn semisimple3_spec() -> Result<ModelSpec> {
    let mut ids = BTreeMap::new();
    ids.insert(
        "euler".to_string(),
        IdentitySpec {
            components: vec!["u1".into(), "u2".into(), "u3".into()],
            dual_flat: true,
        },
    );
    let mut spec = semisimple_model_spec(
        "semisimple3",
        3,
        vec![[0.4, 1.2], [1.8, 2.6], [3.2, 4.0]],
        ids,
    );
    // generic distinguished field: the cyclic curvature condition fails here
    attach_semisimple_connection::<f64>(
        &mut spec,
        "x0",
        &["u1 + u2*u3/8", "2*u2 + u1*u3/8", "3*u3 + u1*u2/8"],
        &["0", "0", "0"],
        false,
        false,
    )?;
    // Euler distinguished field with cross-coupled diagonal terms: curved,
    // but the cyclic curvature condition holds
    attach_semisimple_connection::<f64>(
        &mut spec,
        "diag",
        &["u1", "u2", "u3"],
        &["u2*u3/8", "u1*u3/8", "u1*u2/8"],
        false,
        true,
    )?;
    // single-variable diagonal terms give a flat member
    attach_semisimple_connection::<f64>(
        &mut spec,
        "flat",
        &["u1", "u2", "u3"],
        &["1/u1", "1/u2", "1/u3"],
        true,
        true,
    )?;
    Ok(spec)
}

/// Build a prepotential model directly: third derivatives of `f_expr` give
/// the structure functions through the constant pairing, the unit is the
/// first coordinate field, and a zero-Christoffel flat representative is
/// attached.
pub fn prepotential_model<T: Real>(
    f_expr: &str,
    parameters: BTreeMap<String, f64>,
    bounds: Vec<[f64; 2]>,
    exclusions: Vec<ExclusionSpec>,
) -> Result<Model<T>> {
    let n = bounds.len();
    let mut connections = BTreeMap::new();
    connections.insert(
        "flat".to_string(),
        ConnectionSpec {
            gamma: vec![vec![vec!["0".into(); n]; n]; n],
            flat: true,
            lorenz: true,
        },
    );
    ModelSpec {
        schema: SCHEMA_VERSION.to_string(),
        name: "prepotential-custom".to_string(),
        dimension: n,
        parameters,
        domain: DomainSpec { bounds, exclusions },
        multiplication: MultSpec::Prepotential {
            prepotential: f_expr.to_string(),
        },
        unit: None,
        eventual_identities: BTreeMap::new(),
        connections,
        legendre_fields: BTreeMap::new(),
        bundle: None,
        kappa_example: false,
        tolerances: BTreeMap::new(),
    }
    .build()
}

pub const KAPPA_PREPOTENTIAL: &str = "(1/2)*t1^2*t2 + (1/4)*t2^2*log(t2^2) - (k/6)*t1^3";

/// The deformed prepotential chart at deformation strength `kappa`.
///
/// The Euler field of the undeformed chart is declared as a (gated)
/// eventual identity only at `kappa = 0`, where it is one exactly; deformed
/// charts carry their approximate truncated-series identity through
/// [`kappa_series_field`] instead of the gated identity list.
pub fn kappa_spec(kappa: f64) -> Result<ModelSpec> {
    let mut ids = BTreeMap::new();
    if kappa == 0.0 {
        ids.insert(
            "euler".to_string(),
            IdentitySpec {
                components: vec!["t1".into(), "2*t2".into()],
                dual_flat: true,
            },
        );
    }
    let mut connections = BTreeMap::new();
    connections.insert(
        "flat".to_string(),
        ConnectionSpec {
            gamma: vec![vec![vec!["0".into(); 2]; 2]; 2],
            flat: true,
            lorenz: true,
        },
    );
    let mut legendre_fields = BTreeMap::new();
    legendre_fields.insert(
        "p2".to_string(),
        LegendreSpec {
            components: vec!["0".into(), "1".into()],
            family: "flat".to_string(),
        },
    );
    let mut parameters = BTreeMap::new();
    parameters.insert("k".to_string(), kappa);
    Ok(ModelSpec {
        schema: SCHEMA_VERSION.to_string(),
        name: "kappa2d".to_string(),
        dimension: 2,
        parameters,
        domain: DomainSpec {
            bounds: vec![[-1.0, 1.0], [0.2, 3.0]],
            exclusions: vec![
                ExclusionSpec {
                    expr: "t2".into(),
                    margin: DEFAULT_MARGIN,
                },
                ExclusionSpec {
                    expr: "t1^2 - 4*t2".into(),
                    margin: DEFAULT_MARGIN,
                },
            ],
        },
        multiplication: MultSpec::Prepotential {
            prepotential: KAPPA_PREPOTENTIAL.to_string(),
        },
        unit: None,
        eventual_identities: ids,
        connections,
        legendre_fields,
        bundle: None,
        kappa_example: true,
        tolerances: BTreeMap::new(),
    })
}

pub fn kappa_model(kappa: f64) -> Result<Model<f64>> {
    kappa_spec(kappa)?.build()
}

fn frob_cp1_spec() -> Result<ModelSpec> {
    let mut ids = BTreeMap::new();
    ids.insert(
        "euler".to_string(),
        IdentitySpec {
            components: vec!["t1".into(), "2".into()],
            dual_flat: true,
        },
    );
    let mut connections = BTreeMap::new();
    connections.insert(
        "flat".to_string(),
        ConnectionSpec {
            gamma: vec![vec![vec!["0".into(); 2]; 2]; 2],
            flat: true,
            lorenz: true,
        },
    );
    let mut legendre_fields = BTreeMap::new();
    legendre_fields.insert(
        "p2".to_string(),
        LegendreSpec {
            components: vec!["0".into(), "1".into()],
            family: "flat".to_string(),
        },
    );
    Ok(ModelSpec {
        schema: SCHEMA_VERSION.to_string(),
        name: "frob-cp1".to_string(),
        dimension: 2,
        parameters: BTreeMap::new(),
        domain: DomainSpec {
            bounds: vec![[-1.0, 1.0], [-1.0, 1.0]],
            exclusions: vec![ExclusionSpec {
                expr: "t1^2 - 4*exp(t2)".into(),
                margin: DEFAULT_MARGIN,
            }],
        },
        multiplication: MultSpec::Prepotential {
            prepotential: "(1/2)*t1^2*t2 + exp(t2)".to_string(),
        },
        unit: None,
        eventual_identities: ids,
        connections,
        legendre_fields,
        bundle: None,
        kappa_example: false,
        tolerances: BTreeMap::new(),
    })
}

// ---------------------------------------------------------------------------
// The series eventual identity of the deformed chart
// ---------------------------------------------------------------------------

/// Power-series vector field: coefficient fields per power of a deformation
/// parameter. Coefficients must not themselves mention the parameter.
pub struct SeriesVectorField<T> {
    pub coefficients: Vec<VectorField<T>>,
    pub parameter: String,
}

impl<T: Real> SeriesVectorField<T> {
    /// Assemble the truncation using powers `0..=order` of `value`.
    pub fn truncate(&self, value: T, order: usize) -> VectorField<T> {
        let order = order.min(self.coefficients.len() - 1);
        let mut acc = self.coefficients[0].clone();
        let mut pw = T::one();
        for r in 1..=order {
            pw = pw * value;
            acc = acc.add(&self.coefficients[r].scale_const(pw.to_f64_lossy()));
        }
        acc
    }
}

/// Series coefficients of the deformation identity
/// `E + k (f(t2) d1 + g(t2) d2)` with
/// `f = log(t2)/2 - k/(2 sqrt(t2)) + k^2/(4 t2)` and
/// `g = sqrt(t2) - k/2 - k^2/(8 sqrt(t2))`.
///
/// These are the unique solutions (integration constants set to zero, the
/// leading homogeneous constant pinned by the order-`k` coefficient of `f`)
/// of the component equations `2 x g' - g - k x f' = 0` and
/// `2 x^2 f' + k x g' - k g = x` that the ansatz reduces the
/// eventual-identity characterization to.
pub fn kappa_series_strings() -> (Vec<[&'static str; 2]>, &'static str) {
    (
        vec![
            ["t1", "2*t2"],
            ["log(t2)/2", "sqrt(t2)"],
            ["-1/(2*sqrt(t2))", "-1/2"],
            ["1/(4*t2)", "-1/(8*sqrt(t2))"],
        ],
        "k",
    )
}

pub fn kappa_series_field<T: Real>() -> Result<SeriesVectorField<T>> {
    let (coeffs, parameter) = kappa_series_strings();
    let params = Arc::new(Params::new());
    let coefficients = coeffs
        .iter()
        .map(|pair| {
            let exprs = pair
                .iter()
                .map(|s| parse_expr(s, 2, &[]))
                .collect::<Result<Vec<_>>>()?;
            VectorField::from_exprs(2, exprs, params.clone())
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SeriesVectorField {
        coefficients,
        parameter: parameter.to_string(),
    })
}

/// Report of the series checks at one deformation strength.
pub struct KappaReport {
    /// Sup-residuals of the two component equations for the truncation.
    pub ode1: Residual,
    pub ode2: Residual,
    /// Relative disagreement of the residuals with their closed forms
    /// `k^3/(4x)` and `3 k^3/(16 sqrt(x))` (order-2 truncation only).
    pub ode_exactness: Option<Residual>,
    /// Characterization defect of the truncated identity on the chart.
    pub identity_defect: Residual,
    /// `[e, E] - e` residual.
    pub unit_bracket: Residual,
}

/// Evaluate the series checks at strength `kappa` with the series truncated
/// at order `order` in the parameter (0..=2).
pub fn kappa_eventual_identity(
    model: &Model<f64>,
    kappa: f64,
    order: usize,
) -> Result<(SeriesVectorField<f64>, KappaReport)> {
    if !model.spec.kappa_example {
        return Err(Error::Config(
            "series identity checks run on the deformed-prepotential example only".into(),
        ));
    }
    if order > 2 {
        return Err(Error::Config(format!(
            "series truncation order {order} out of range 0..=2"
        )));
    }
    let series = kappa_series_field::<f64>()?;

    // the chart of the deformed model at this strength
    let deformed = kappa_model(kappa)?;
    let points = deformed.sample(60, 0x5EED)?;

    // truncated f and g as 1-d expressions of x (= t2, parsed as the sole
    // coordinate of a 1-d chart)
    let coeffs_1d: [[&str; 2]; 3] = [
        ["log(u1)/2", "sqrt(u1)"],
        ["-1/(2*sqrt(u1))", "-1/2"],
        ["1/(4*u1)", "-1/(8*sqrt(u1))"],
    ];
    let fg = |col: usize| -> Result<Expr> {
        let mut acc = Expr::Num(0.0);
        let mut pw = 1.0;
        for row in coeffs_1d.iter().take(order + 1) {
            let term = parse_expr(row[col], 1, &[])?;
            acc = Expr::add(acc, Expr::mul(Expr::Num(pw), term));
            pw *= kappa;
        }
        Ok(acc)
    };
    let f = fg(0)?;
    let g = fg(1)?;
    let fp = f.diff(0);
    let gp = g.diff(0);
    let x = Expr::coord(0);
    let kk = Expr::Num(kappa);
    // 2 x g' - g - k x f'
    let r1 = Expr::sub(
        Expr::sub(
            Expr::mul(Expr::Num(2.0), Expr::mul(x.clone(), gp.clone())),
            g.clone(),
        ),
        Expr::mul(kk.clone(), Expr::mul(x.clone(), fp.clone())),
    );
    // 2 x^2 f' + k x g' - k g - x
    let r2 = Expr::sub(
        Expr::sub(
            Expr::add(
                Expr::mul(
                    Expr::Num(2.0),
                    Expr::mul(Expr::pow(x.clone(), Expr::Num(2.0)), fp),
                ),
                Expr::mul(kk.clone(), Expr::mul(x.clone(), gp)),
            ),
            Expr::mul(kk, g.clone()),
        ),
        x.clone(),
    );

    let par = Params::<f64>::new();
    let mut ode1 = Residual::default();
    let mut ode2 = Residual::default();
    let mut exact = Residual::default();
    for p in &points {
        let xq = [p[1]];
        let v1 = r1.eval_jet(&xq, 0, &par)?.value();
        let v2 = r2.eval_jet(&xq, 0, &par)?.value();
        ode1.absorb(v1);
        ode2.absorb(v2);
        if order == 2 && kappa != 0.0 {
            let c1 = kappa.powi(3) / (4.0 * p[1]);
            let c2 = 3.0 * kappa.powi(3) / (16.0 * p[1].sqrt());
            exact.absorb(v1 / c1 - 1.0);
            exact.absorb(v2 / c2 - 1.0);
        }
    }

    let truncated = series.truncate(kappa, order + 1);
    let identity_defect = eventual_identity_defect(&deformed.mult, &truncated, &points)?;
    let eb = crate::field::lie_bracket(deformed.unit(), &truncated).sub(deformed.unit());
    let mut unit_bracket = Residual::default();
    for p in &points {
        unit_bracket.absorb_all(&eb.eval(p, 0)?);
    }

    Ok((
        series,
        KappaReport {
            ode1,
            ode2,
            ode_exactness: if order == 2 && kappa != 0.0 {
                Some(exact)
            } else {
                None
            },
            identity_defect,
            unit_bracket,
        },
    ))
}

/// Least-squares slope of `log(residual)` against `log(kappa)` for the
/// order-2 truncation over the given strengths.
pub fn kappa_residual_slope(model: &Model<f64>, kappas: &[f64]) -> Result<f64> {
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for &k in kappas {
        let (_, report) = kappa_eventual_identity(model, k, 2)?;
        let r = report.ode1.max.max(report.ode2.max);
        xs.push(k.ln());
        ys.push(r.ln());
    }
    let m = xs.len() as f64;
    let xbar = xs.iter().sum::<f64>() / m;
    let ybar = ys.iter().sum::<f64>() / m;
    let num: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - xbar) * (y - ybar)).sum();
    let den: f64 = xs.iter().map(|x| (x - xbar) * (x - xbar)).sum();
    Ok(num / den)
}
