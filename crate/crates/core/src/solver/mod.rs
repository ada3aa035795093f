//! Modulus of time-respecting path families.
//!
//! [`modulus`] runs the basic constraint-generation loop: start from ρ ≡ 0,
//! ask the separation oracle ([`min_length_trp`](crate::paths::min_length_trp))
//! for a shortest object, and if it is shorter than one add its usage row to
//! the active set and re-solve the restricted problem. When the oracle's
//! shortest object has length at least `1 − tol`, ρ* is admissible for the
//! whole family up to that tolerance and its energy is the modulus.
//!
//! The restricted problem's Lagrange multipliers, normalized, form the
//! optimal plan μ over the active paths and η* = Nᵀμ is the expected usage.

mod oracle;
mod restricted;
mod sweep;

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::paths::{min_length_static, min_length_trp_indexed, EventIndex, SearchOptions, ShortestPath, TemporalPath};
use crate::penalty::{usage_row, PenaltyConfig, PenaltyMode, UsageRow};
use crate::tempgraph::{EdgeId, TemporalGraph, VertexId};

pub use oracle::{brute_force_modulus, ENUMERATION_LIMIT};
pub use restricted::{restricted_solve, RestrictedSolution};
pub use sweep::{
    delta_p_metric, lambda_sweep, p_continuity, p_sweep, sigma_derivative_check, ContinuityPoint, LambdaPoint,
    LambdaSweep, PPoint, PSweep,
};

/// The exponent p ∈ [1, ∞].
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Exponent {
    Finite(f64),
    Infinity,
}

impl Exponent {
    pub fn new(p: f64) -> Result<Self> {
        if p == f64::INFINITY {
            Ok(Exponent::Infinity)
        } else if p >= 1.0 && p.is_finite() {
            Ok(Exponent::Finite(p))
        } else {
            Err(Error::Config(format!("p must lie in [1, ∞], got {p}")))
        }
    }

    pub fn value(self) -> f64 {
        match self {
            Exponent::Finite(p) => p,
            Exponent::Infinity => f64::INFINITY,
        }
    }

    /// 1 < p < ∞.
    pub fn is_interior(self) -> bool {
        matches!(self, Exponent::Finite(p) if p > 1.0)
    }

    /// q = p/(p − 1), with 1 ↔ ∞.
    pub fn conjugate(self) -> Exponent {
        match self {
            Exponent::Infinity => Exponent::Finite(1.0),
            Exponent::Finite(1.0) => Exponent::Infinity,
            Exponent::Finite(p) => Exponent::Finite(p / (p - 1.0)),
        }
    }
}

impl fmt::Display for Exponent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Exponent::Finite(p) => write!(f, "{p}"),
            Exponent::Infinity => f.write_str("inf"),
        }
    }
}

impl FromStr for Exponent {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "inf" | "infinity" | "∞" => Ok(Exponent::Infinity),
            other => Exponent::new(other.parse().map_err(|_| Error::Config(format!("cannot parse p `{s}`")))?),
        }
    }
}

/// Nonnegative values indexed by edge id.
#[derive(Clone, Debug, PartialEq)]
pub struct Density(Vec<f64>);

impl Density {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if let Some(i) = values.iter().position(|v| !(*v >= 0.0 && v.is_finite())) {
            return Err(Error::Validation(format!("density is negative or not finite on edge {i}")));
        }
        Ok(Density(values))
    }

    pub fn zeros(n: usize) -> Self {
        Density(vec![0.0; n])
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn get(&self, e: EdgeId) -> f64 {
        self.0[e.0]
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// E_{p,σ}(ρ): Σσρ^p, or max σρ for p = ∞.
pub fn energy(rho: &[f64], p: Exponent, sigma: &[f64]) -> f64 {
    match p {
        Exponent::Finite(p) => rho.iter().zip(sigma).map(|(r, s)| s * r.powf(p)).sum(),
        Exponent::Infinity => rho.iter().zip(sigma).map(|(r, s)| s * r).fold(0.0, f64::max),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FamilyKind {
    /// Time-respecting paths with the configured penalty.
    TimeRespecting,
    /// Paths of the aggregated graph, times ignored, unit usage.
    Static,
}

#[derive(Clone, Debug)]
pub struct FamilySpec {
    pub source: VertexId,
    pub target: VertexId,
    pub p: Exponent,
    pub penalty: PenaltyConfig,
    /// Replaces the graph's edge weights when set.
    pub sigma: Option<Vec<f64>>,
    pub kind: FamilyKind,
    /// Restricts the family to paths with at most this many steps.
    pub max_hops: Option<usize>,
}

impl FamilySpec {
    pub fn new(source: VertexId, target: VertexId, p: Exponent, penalty: PenaltyConfig) -> Self {
        FamilySpec { source, target, p, penalty, sigma: None, kind: FamilyKind::TimeRespecting, max_hops: None }
    }

    pub fn with_sigma(mut self, sigma: Vec<f64>) -> Self {
        self.sigma = Some(sigma);
        self
    }

    pub fn with_p(mut self, p: Exponent) -> Self {
        self.p = p;
        self
    }

    pub fn with_penalty(mut self, penalty: PenaltyConfig) -> Self {
        self.penalty = penalty;
        self
    }

    pub fn with_kind(mut self, kind: FamilyKind) -> Self {
        self.kind = kind;
        self
    }

    pub fn with_max_hops(mut self, max_hops: Option<usize>) -> Self {
        self.max_hops = max_hops;
        self
    }

    /// σ for every edge of `g`.
    pub fn sigma_for(&self, g: &TemporalGraph) -> Result<Vec<f64>> {
        let sigma = match &self.sigma {
            Some(s) if s.len() != g.edge_count() => {
                return Err(Error::Validation(format!("σ has {} entries for {} edges", s.len(), g.edge_count())))
            }
            Some(s) => s.clone(),
            None => g.weights(),
        };
        if let Some(i) = sigma.iter().position(|s| !(*s > 0.0 && s.is_finite())) {
            return Err(Error::Validation(format!("σ must be positive, edge {i} has {}", sigma[i])));
        }
        Ok(sigma)
    }

    pub fn validate(&self, g: &TemporalGraph) -> Result<Vec<f64>> {
        for v in [self.source, self.target] {
            if v.0 >= g.vertex_count() {
                return Err(Error::UnknownVertex(format!("#{}", v.0)));
            }
        }
        if self.source == self.target {
            return Err(Error::Precondition("source and target coincide".into()));
        }
        if self.kind == FamilyKind::Static && self.max_hops.is_some() {
            return Err(Error::Config("hop limits apply to time-respecting families only".into()));
        }
        Exponent::new(self.p.value())?;
        self.sigma_for(g)
    }

    /// Penalty defining the usage rows of this family.
    pub fn usage_config(&self) -> PenaltyConfig {
        match self.kind {
            FamilyKind::TimeRespecting => self.penalty,
            FamilyKind::Static => PenaltyConfig::unpenalized(),
        }
    }
}

#[derive(Clone, Debug)]
pub struct SolverOptions {
    /// Relative admissibility tolerance of the outer loop.
    pub tol: f64,
    /// Relative duality gap of each restricted solve.
    pub inner_tol: f64,
    /// Outer iteration budget; defaults to max(10·|E|, 100).
    pub max_outer: Option<usize>,
    /// Drop active rows whose multiplier stayed zero this many iterations.
    pub prune_after: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions::with_tol(1e-6)
    }
}

impl SolverOptions {
    pub fn with_tol(tol: f64) -> Self {
        SolverOptions { tol, inner_tol: tol / 10.0, max_outer: None, prune_after: 5 }
    }

    fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0 && self.tol < 1.0 && self.inner_tol > 0.0) {
            return Err(Error::Config(format!("tolerances must lie in (0, 1), got {} / {}", self.tol, self.inner_tol)));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PlanEntry {
    pub path: TemporalPath,
    pub mass: f64,
    /// Mass of this entry and every heavier one.
    pub cumulative: f64,
}

#[derive(Clone, Debug)]
pub struct ModulusResult {
    pub value: f64,
    pub p: Exponent,
    pub rho_star: Density,
    pub eta_star: Vec<f64>,
    /// μ over the active paths, heaviest first.
    pub plan: Vec<PlanEntry>,
    pub active_paths: Vec<TemporalPath>,
    pub rows: Vec<UsageRow>,
    /// Multiplier of each active row.
    pub duals: Vec<f64>,
    pub iterations: usize,
    /// 1 − (shortest length at exit).
    pub max_violation: f64,
    /// Relative gap between `upper_bound` (or the restricted primal value) and `lower_bound`.
    pub duality_gap: f64,
    pub lower_bound: f64,
    pub upper_bound: Option<f64>,
    pub empty_family: bool,
    /// Paths left out because their additive penalty reached one (brute force only).
    pub dropped: usize,
}

impl ModulusResult {
    pub(crate) fn empty(p: Exponent, edges: usize) -> Self {
        ModulusResult {
            value: 0.0,
            p,
            rho_star: Density::zeros(edges),
            eta_star: vec![0.0; edges],
            plan: Vec::new(),
            active_paths: Vec::new(),
            rows: Vec::new(),
            duals: Vec::new(),
            iterations: 0,
            max_violation: 0.0,
            duality_gap: 0.0,
            lower_bound: 0.0,
            upper_bound: Some(0.0),
            empty_family: true,
            dropped: 0,
        }
    }

    /// Smallest set of heaviest paths carrying at least `mass` of the plan.
    pub fn plan_prefix(&self, mass: f64) -> &[PlanEntry] {
        let k = self.plan.iter().position(|e| e.cumulative >= mass - 1e-12).map_or(self.plan.len(), |i| i + 1);
        &self.plan[..k]
    }
}

/// Normalized multipliers as a plan over `paths`, heaviest first, and η = Nᵀμ.
pub(crate) fn plan_from(
    rows: &[UsageRow],
    duals: &[f64],
    paths: &[TemporalPath],
    edges: usize,
) -> Result<(Vec<f64>, Vec<PlanEntry>)> {
    let total: f64 = duals.iter().sum();
    if !(total > 0.0) {
        return Err(Error::DegenerateDuals);
    }
    let mut eta = vec![0.0; edges];
    for (row, d) in rows.iter().zip(duals) {
        for &(e, v) in &row.entries {
            eta[e.0] += v * d / total;
        }
    }
    let mut order: Vec<usize> = (0..duals.len()).filter(|&i| duals[i] > 0.0).collect();
    order.sort_by(|&a, &b| duals[b].total_cmp(&duals[a]).then(a.cmp(&b)));
    let mut cumulative = 0.0;
    let plan = order
        .into_iter()
        .map(|i| {
            let mass = duals[i] / total;
            cumulative += mass;
            PlanEntry { path: paths[i].clone(), mass, cumulative }
        })
        .collect();
    Ok((eta, plan))
}

#[derive(Clone, Debug)]
pub struct DualRecovery {
    pub eta: Vec<f64>,
    pub plan: Vec<PlanEntry>,
    /// max over edges of |σρ^p/E_p(ρ) − σ̂η^q/E_q(η)|, relative to the largest term.
    pub identity_residual: f64,
}

/// Recovers (η*, μ) from the multipliers of a converged result and checks the
/// per-edge identity σρ*^p / E_{p,σ}(ρ*) = σ̂η*^q / E_{q,σ̂}(η*).
pub fn dual_recover(result: &ModulusResult, p: Exponent, sigma: &[f64]) -> Result<DualRecovery> {
    let Exponent::Finite(pv) = p else {
        return Err(Error::Precondition("dual recovery needs 1 < p < ∞".into()));
    };
    if !p.is_interior() {
        return Err(Error::Precondition("dual recovery needs 1 < p < ∞".into()));
    }
    if result.empty_family {
        return Err(Error::Precondition("the family is empty".into()));
    }
    let (eta, plan) = plan_from(&result.rows, &result.duals, &result.active_paths, sigma.len())?;
    let q = pv / (pv - 1.0);
    let rho = result.rho_star.values();
    let ep = energy(rho, p, sigma);
    let sigma_hat: Vec<f64> = sigma.iter().map(|s| s.powf(-q / pv)).collect();
    let eq = energy(&eta, Exponent::Finite(q), &sigma_hat);
    let mut identity_residual: f64 = 0.0;
    let mut largest: f64 = 0.0;
    for e in 0..sigma.len() {
        let a = sigma[e] * rho[e].powf(pv) / ep;
        let b = sigma_hat[e] * eta[e].powf(q) / eq;
        identity_residual = identity_residual.max((a - b).abs());
        largest = largest.max(a).max(b);
    }
    Ok(DualRecovery { eta, plan, identity_residual: identity_residual / largest.max(f64::MIN_POSITIVE) })
}

/// Σ η(e)², the expected overlap of two independent paths drawn from μ.
/// Defined for p = 2 with σ ≡ 1; callers should pass η from an unpenalized family.
pub fn expected_overlap(eta_star: &[f64], p: Exponent, sigma: &[f64]) -> Result<f64> {
    if p != Exponent::Finite(2.0) {
        return Err(Error::Precondition(format!("expected overlap needs p = 2, got {p}")));
    }
    if sigma.iter().any(|&s| s != 1.0) {
        return Err(Error::Precondition("expected overlap needs σ ≡ 1".into()));
    }
    Ok(eta_star.iter().map(|x| x * x).sum())
}

enum Separation<'g> {
    Temporal(EventIndex<'g>, SearchOptions),
    Static(&'g TemporalGraph),
}

impl Separation<'_> {
    fn shortest(&self, spec: &FamilySpec, rho: &[f64]) -> Result<ShortestPath> {
        match self {
            Separation::Temporal(index, opts) => {
                min_length_trp_indexed(index, spec.source, spec.target, rho, &spec.penalty, *opts)
            }
            Separation::Static(g) => min_length_static(g, spec.source, spec.target, rho),
        }
    }
}

struct ActiveRow {
    path: TemporalPath,
    row: UsageRow,
    dual: f64,
    idle: usize,
}

/// Mod_{p,σ} of the family described by `spec`.
pub fn modulus(g: &TemporalGraph, spec: &FamilySpec, opts: &SolverOptions) -> Result<ModulusResult> {
    opts.validate()?;
    let sigma = spec.validate(g)?;
    let ne = g.edge_count();
    let sep = match spec.kind {
        FamilyKind::TimeRespecting => {
            Separation::Temporal(EventIndex::new(g), SearchOptions { dominance: true, max_hops: spec.max_hops })
        }
        FamilyKind::Static => Separation::Static(g),
    };
    let usage = spec.usage_config();
    let additive_edge = spec.kind == FamilyKind::TimeRespecting && spec.penalty.mode() == PenaltyMode::AddPerEdge;
    let budget = opts.max_outer.unwrap_or((10 * ne).max(100));

    let mut active: Vec<ActiveRow> = Vec::new();
    let mut rho = vec![0.0; ne];
    let mut last: Option<RestrictedSolution> = None;
    let mut iterations = 0;
    loop {
        let sp = match sep.shortest(spec, &rho) {
            Ok(sp) => sp,
            Err(Error::NoPath) if active.is_empty() => return Ok(ModulusResult::empty(spec.p, ne)),
            Err(e) => return Err(e),
        };
        let value = energy(&rho, spec.p, &sigma);
        let upper = || {
            if additive_edge {
                (sp.length >= 1.0).then_some(value)
            } else if sp.length > 0.0 {
                Some(match spec.p {
                    Exponent::Finite(p) => value / sp.length.powf(p),
                    Exponent::Infinity => value / sp.length,
                })
            } else {
                None
            }
        };
        if let Some(sol) = &last {
            if sp.length >= 1.0 - opts.tol {
                let upper_bound = upper();
                let lower_bound = sol.lower.min(value);
                let duality_gap = match upper_bound {
                    Some(u) if u > 0.0 => ((u - lower_bound) / u).max(0.0),
                    _ => sol.gap(),
                };
                let rows: Vec<UsageRow> = active.iter().map(|a| a.row.clone()).collect();
                let duals: Vec<f64> = active.iter().map(|a| a.dual).collect();
                let paths: Vec<TemporalPath> = active.iter().map(|a| a.path.clone()).collect();
                let (eta_star, plan) = plan_from(&rows, &duals, &paths, ne)?;
                return Ok(ModulusResult {
                    value,
                    p: spec.p,
                    rho_star: Density::new(rho)?,
                    eta_star,
                    plan,
                    active_paths: paths,
                    rows,
                    duals,
                    iterations,
                    max_violation: 1.0 - sp.length,
                    duality_gap,
                    lower_bound,
                    upper_bound,
                    empty_family: false,
                    dropped: 0,
                });
            }
        }
        if iterations >= budget {
            return Err(Error::BudgetExceeded {
                budget,
                lower: last.as_ref().map_or(0.0, |s| s.lower),
                upper: upper(),
            });
        }
        iterations += 1;

        let row = usage_row(&sp.path, &usage)?;
        active.push(ActiveRow { path: sp.path, row, dual: 0.0, idle: 0 });
        let rows: Vec<UsageRow> = active.iter().map(|a| a.row.clone()).collect();
        let warm: Vec<f64> = active.iter().map(|a| a.dual).collect();
        let sol = restricted::solve_warm(&rows, spec.p, &sigma, opts.inner_tol, Some(&warm))?;
        let newest = active.len() - 1;
        for (i, (a, &d)) in active.iter_mut().zip(&sol.duals).enumerate() {
            a.dual = d;
            a.idle = if d > 0.0 || i == newest { 0 } else { a.idle + 1 };
        }
        active.retain(|a| a.idle < opts.prune_after);
        rho.clone_from(&sol.rho);
        last = Some(sol);
    }
}
