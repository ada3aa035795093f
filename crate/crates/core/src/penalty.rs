//! Temporal penalty functions and temporal usage.
//!
//! The usage of an edge e by a time-respecting path γ is
//! `N(γ, e) = ψ(γ, e) · Ň(γ̌, e)`, where Ň is the 0/1 incidence of the
//! projected edge set and ψ applies the penalty φ in one of four ways:
//!
//! | mode             | ψ(γ, e) for e ∈ γ̌           |
//! |------------------|------------------------------|
//! | `MulPerEdge`     | φ(t) where (e, t) ∈ γ        |
//! | `AddPerEdge`     | (1 − Σᵢ φ(tᵢ))⁻¹             |
//! | `MulPerObject`   | maxᵢ φ(tᵢ)                   |
//! | `AddPerObject`   | (1 − maxᵢ φ(tᵢ))⁻¹           |
//!
//! Multiplicative modes need φ = 1 at the time origin, additive modes φ = 0.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::paths::TemporalPath;
use crate::tempgraph::EdgeId;

/// Additive penalties with `1 - total` below this are treated as infeasible.
pub const ADDITIVE_SINGULARITY: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum PhiKind {
    /// φ(t) = c
    Constant(f64),
    /// φ(t) = 1 + a·t
    AffinePlusOne(f64),
    /// φ(t) = exp(rate·(t − t0))
    ExpNormalized { rate: f64, t0: f64 },
    /// φ(t) = exp(rate·(t − t0)) − 1
    ExpZero { rate: f64, t0: f64 },
}

impl PhiKind {
    /// Time at which the unscaled function takes its reference value.
    fn origin(&self) -> f64 {
        match *self {
            PhiKind::ExpNormalized { t0, .. } | PhiKind::ExpZero { t0, .. } => t0,
            _ => 0.0,
        }
    }
}

impl fmt::Display for PhiKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            PhiKind::Constant(c) => write!(f, "const:{c}"),
            PhiKind::AffinePlusOne(a) => write!(f, "affine:{a}"),
            PhiKind::ExpNormalized { rate, t0 } => write!(f, "exp:{rate}:{t0}"),
            PhiKind::ExpZero { rate, t0 } => write!(f, "exp0:{rate}:{t0}"),
        }
    }
}

impl FromStr for PhiKind {
    type Err = Error;

    /// Accepts `const:c`, `affine:a`, `exp:rate[:t0]` and `exp0:rate[:t0]`.
    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::Config(format!("cannot parse penalty function `{s}`"));
        let mut parts = s.split(':');
        let name = parts.next().ok_or_else(bad)?;
        let nums: Vec<f64> = parts.map(|x| x.trim().parse::<f64>().map_err(|_| bad())).collect::<Result<_>>()?;
        let kind = match (name.trim(), nums.as_slice()) {
            ("const", [c]) => PhiKind::Constant(*c),
            ("affine", [a]) => PhiKind::AffinePlusOne(*a),
            ("exp", [rate]) => PhiKind::ExpNormalized { rate: *rate, t0: 0.0 },
            ("exp", [rate, t0]) => PhiKind::ExpNormalized { rate: *rate, t0: *t0 },
            ("exp0", [rate]) => PhiKind::ExpZero { rate: *rate, t0: 0.0 },
            ("exp0", [rate, t0]) => PhiKind::ExpZero { rate: *rate, t0: *t0 },
            _ => return Err(bad()),
        };
        Ok(kind)
    }
}

/// A penalty function together with its time scale λ.
///
/// The scaled function is `φ^λ(t) = φ(t0 + λ·(t − t0))`, i.e. λ stretches the
/// time elapsed since the origin `t0` (zero except for the exponential kinds).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PhiSpec {
    pub kind: PhiKind,
    pub lambda: f64,
}

impl PhiSpec {
    pub fn new(kind: PhiKind) -> Self {
        PhiSpec { kind, lambda: 1.0 }
    }

    pub fn with_lambda(self, lambda: f64) -> Self {
        PhiSpec { lambda, ..self }
    }

    pub fn eval(&self, t: f64) -> f64 {
        let elapsed = self.lambda * (t - self.kind.origin());
        match self.kind {
            PhiKind::Constant(c) => c,
            PhiKind::AffinePlusOne(a) => 1.0 + a * elapsed,
            PhiKind::ExpNormalized { rate, .. } => (rate * elapsed).exp(),
            PhiKind::ExpZero { rate, .. } => (rate * elapsed).exp_m1(),
        }
    }

    /// φ at the time origin.
    pub fn origin_value(&self) -> f64 {
        self.eval(self.kind.origin())
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lambda > 0.0 && self.lambda.is_finite()) {
            return Err(Error::Config(format!("lambda must be positive, got {}", self.lambda)));
        }
        let ok = match self.kind {
            PhiKind::Constant(c) => c > 0.0 && c.is_finite(),
            PhiKind::AffinePlusOne(a) => a >= 0.0 && a.is_finite(),
            PhiKind::ExpNormalized { rate, t0 } | PhiKind::ExpZero { rate, t0 } => {
                rate >= 0.0 && rate.is_finite() && t0.is_finite()
            }
        };
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!("`{}` is not a nondecreasing penalty function", self.kind)))
        }
    }
}

/// φ^λ(t).
pub fn phi_eval(phi: &PhiSpec, t: f64) -> f64 {
    phi.eval(t)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum PenaltyMode {
    MulPerEdge,
    AddPerEdge,
    MulPerObject,
    AddPerObject,
}

impl PenaltyMode {
    pub const ALL: [PenaltyMode; 4] =
        [PenaltyMode::MulPerEdge, PenaltyMode::AddPerEdge, PenaltyMode::MulPerObject, PenaltyMode::AddPerObject];

    pub fn is_additive(self) -> bool {
        matches!(self, PenaltyMode::AddPerEdge | PenaltyMode::AddPerObject)
    }

    pub fn is_per_object(self) -> bool {
        matches!(self, PenaltyMode::MulPerObject | PenaltyMode::AddPerObject)
    }
}

impl fmt::Display for PenaltyMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PenaltyMode::MulPerEdge => "mul-edge",
            PenaltyMode::AddPerEdge => "add-edge",
            PenaltyMode::MulPerObject => "mul-object",
            PenaltyMode::AddPerObject => "add-object",
        })
    }
}

impl FromStr for PenaltyMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mul-edge" => Ok(PenaltyMode::MulPerEdge),
            "add-edge" => Ok(PenaltyMode::AddPerEdge),
            "mul-object" => Ok(PenaltyMode::MulPerObject),
            "add-object" => Ok(PenaltyMode::AddPerObject),
            _ => Err(Error::Config(format!("unknown penalty mode `{s}`"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PenaltyConfig {
    mode: PenaltyMode,
    phi: PhiSpec,
}

impl PenaltyConfig {
    /// Checks φ is nondecreasing and takes the reference value the mode needs
    /// at its origin (1 for multiplicative modes, 0 for additive ones).
    pub fn new(mode: PenaltyMode, phi: PhiSpec) -> Result<Self> {
        phi.validate()?;
        let want = if mode.is_additive() { 0.0 } else { 1.0 };
        let got = phi.origin_value();
        if (got - want).abs() > 1e-12 {
            return Err(Error::Config(format!(
                "mode {mode} needs φ = {want} at the origin, `{}` gives {got}",
                phi.kind
            )));
        }
        Ok(PenaltyConfig { mode, phi })
    }

    /// φ ≡ 1 with per-edge multiplication: the usage of the aggregated family.
    pub fn unpenalized() -> Self {
        PenaltyConfig { mode: PenaltyMode::MulPerEdge, phi: PhiSpec::new(PhiKind::Constant(1.0)) }
    }

    pub fn mode(&self) -> PenaltyMode {
        self.mode
    }

    pub fn phi(&self) -> &PhiSpec {
        &self.phi
    }

    pub fn with_lambda(&self, lambda: f64) -> Result<Self> {
        PenaltyConfig::new(self.mode, self.phi.with_lambda(lambda))
    }

    pub fn is_unpenalized(&self) -> bool {
        self.mode == PenaltyMode::MulPerEdge && self.phi.kind == PhiKind::Constant(1.0)
    }

    /// Whole-object penalty: Σφ for additive per-edge, maxφ for per-object modes.
    /// `None` for multiplicative per-edge, where the penalty is not aggregated.
    pub fn object_penalty(&self, gamma: &TemporalPath) -> Option<f64> {
        let phis = gamma.steps.iter().map(|s| self.phi.eval(s.time));
        match self.mode {
            PenaltyMode::MulPerEdge => None,
            PenaltyMode::AddPerEdge => Some(phis.sum()),
            PenaltyMode::MulPerObject | PenaltyMode::AddPerObject => Some(phis.fold(f64::NEG_INFINITY, f64::max)),
        }
    }

    fn additive_factor(&self, penalty: f64) -> Result<f64> {
        let slack = 1.0 - penalty;
        if slack < ADDITIVE_SINGULARITY {
            Err(Error::InfeasibleObject { penalty })
        } else {
            Ok(1.0 / slack)
        }
    }
}

/// ψ(γ, e).
pub fn psi(gamma: &TemporalPath, e: EdgeId, cfg: &PenaltyConfig) -> Result<f64> {
    let Some(step) = gamma.steps.iter().find(|s| s.edge == e) else {
        return Ok(1.0);
    };
    match cfg.mode {
        PenaltyMode::MulPerEdge => Ok(cfg.phi.eval(step.time)),
        PenaltyMode::MulPerObject => Ok(cfg.object_penalty(gamma).unwrap()),
        PenaltyMode::AddPerEdge | PenaltyMode::AddPerObject => cfg.additive_factor(cfg.object_penalty(gamma).unwrap()),
    }
}

/// Sparse row N(γ, ·): entries sorted by edge id, one per edge of γ̌.
#[derive(Clone, Debug, PartialEq)]
pub struct UsageRow {
    pub entries: Vec<(EdgeId, f64)>,
}

impl UsageRow {
    pub fn get(&self, e: EdgeId) -> f64 {
        self.entries.binary_search_by_key(&e, |&(id, _)| id).map(|i| self.entries[i].1).unwrap_or(0.0)
    }

    /// (Nρ)(γ)
    pub fn dot(&self, rho: &[f64]) -> f64 {
        self.entries.iter().map(|&(e, n)| n * rho[e.0]).sum()
    }
}

pub fn usage_row(gamma: &TemporalPath, cfg: &PenaltyConfig) -> Result<UsageRow> {
    let shared = match cfg.mode {
        PenaltyMode::MulPerEdge => None,
        PenaltyMode::MulPerObject => cfg.object_penalty(gamma),
        PenaltyMode::AddPerEdge | PenaltyMode::AddPerObject => {
            Some(cfg.additive_factor(cfg.object_penalty(gamma).unwrap())?)
        }
    };
    let mut entries: Vec<(EdgeId, f64)> =
        gamma.steps.iter().map(|s| (s.edge, shared.unwrap_or_else(|| cfg.phi.eval(s.time)))).collect();
    entries.sort_by_key(|&(e, _)| e);
    Ok(UsageRow { entries })
}

/// ℓ_ρ(γ) = Σₑ N(γ, e) ρ(e).
pub fn rho_length(gamma: &TemporalPath, rho: &[f64], cfg: &PenaltyConfig) -> Result<f64> {
    Ok(usage_row(gamma, cfg)?.dot(rho))
}

/// Length in the form the penalty was defined with. For additive per-edge
/// penalization this is `Σρ(eᵢ) + Σφ(tᵢ)`; every other mode coincides with
/// [`rho_length`]. Either way, `raw_length ≥ 1` iff `rho_length ≥ 1`.
pub fn raw_length(gamma: &TemporalPath, rho: &[f64], cfg: &PenaltyConfig) -> Result<f64> {
    match cfg.mode {
        PenaltyMode::AddPerEdge => {
            let penalty = cfg.object_penalty(gamma).unwrap();
            Ok(gamma.steps.iter().map(|s| rho[s.edge.0]).sum::<f64>() + penalty)
        }
        _ => rho_length(gamma, rho, cfg),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::paths::Step;
    use crate::tempgraph::VertexId;
    use proptest::prelude::*;

    fn path(steps: &[(usize, f64)]) -> TemporalPath {
        TemporalPath {
            source: VertexId(0),
            target: VertexId(1),
            steps: steps.iter().map(|&(e, t)| Step { edge: EdgeId(e), time: t, forward: true }).collect(),
        }
    }

    fn cfg(mode: PenaltyMode, kind: PhiKind) -> PenaltyConfig {
        PenaltyConfig::new(mode, PhiSpec::new(kind)).unwrap()
    }

    #[test]
    fn phi_values() {
        let t0 = 1_082_040_961.0;
        let exp = PhiSpec::new(PhiKind::ExpNormalized { rate: 1e-7, t0 });
        assert_eq!(phi_eval(&exp, t0), 1.0);
        assert_eq!(phi_eval(&PhiSpec::new(PhiKind::AffinePlusOne(1.0)), 3.0), 4.0);
        assert_eq!(phi_eval(&PhiSpec::new(PhiKind::Constant(1.0)), 17.5), 1.0);
        let scaled = PhiSpec::new(PhiKind::AffinePlusOne(1.0)).with_lambda(0.5);
        assert_eq!(scaled.eval(4.0), 3.0);
        assert_eq!(PhiSpec::new(PhiKind::ExpZero { rate: 2.0, t0: 0.0 }).eval(0.0), 0.0);
    }

    #[test]
    fn phi_strings_round_trip() {
        for s in ["const:1", "affine:0.5", "exp:0.0000001:12", "exp0:2:0"] {
            let k: PhiKind = s.parse().unwrap();
            assert_eq!(k.to_string().parse::<PhiKind>().unwrap(), k);
        }
        assert_eq!("exp:3".parse::<PhiKind>().unwrap(), PhiKind::ExpNormalized { rate: 3.0, t0: 0.0 });
        assert!("exp".parse::<PhiKind>().is_err());
        assert!("linear:1".parse::<PhiKind>().is_err());
        assert!("affine:x".parse::<PhiKind>().is_err());
    }

    #[test]
    fn mode_compatibility_checked() {
        use PenaltyMode::*;
        assert!(PenaltyConfig::new(MulPerEdge, PhiSpec::new(PhiKind::AffinePlusOne(1.0))).is_ok());
        assert!(PenaltyConfig::new(AddPerEdge, PhiSpec::new(PhiKind::AffinePlusOne(1.0))).is_err());
        assert!(PenaltyConfig::new(AddPerObject, PhiSpec::new(PhiKind::ExpZero { rate: 1.0, t0: 0.0 })).is_ok());
        assert!(PenaltyConfig::new(MulPerObject, PhiSpec::new(PhiKind::ExpZero { rate: 1.0, t0: 0.0 })).is_err());
        assert!(PenaltyConfig::new(MulPerEdge, PhiSpec::new(PhiKind::Constant(2.0))).is_err());
        assert!(PenaltyConfig::new(MulPerEdge, PhiSpec::new(PhiKind::AffinePlusOne(-1.0))).is_err());
        assert!(PenaltyConfig::new(MulPerEdge, PhiSpec::new(PhiKind::Constant(1.0)).with_lambda(0.0)).is_err());
        assert!(["mul-edge", "add-edge", "mul-object", "add-object"].iter().all(|s| s
            .parse::<PenaltyMode>()
            .unwrap()
            .to_string()
            == *s));
    }

    #[test]
    fn psi_by_mode() {
        let affine = PhiKind::AffinePlusOne(1.0);
        let g = path(&[(0, 3.0)]);
        assert_eq!(psi(&g, EdgeId(0), &cfg(PenaltyMode::MulPerEdge, affine)).unwrap(), 4.0);

        let g = path(&[(1, 1.0), (2, 5.0)]);
        assert_eq!(psi(&g, EdgeId(1), &cfg(PenaltyMode::MulPerObject, affine)).unwrap(), 6.0);
        // brute-force row: every entry is the max over the path
        let row = usage_row(&g, &cfg(PenaltyMode::MulPerObject, affine)).unwrap();
        let max_phi = g.steps.iter().map(|s| 1.0 + s.time).fold(0.0, f64::max);
        assert!(row.entries.iter().all(|&(_, v)| v == max_phi));

        for mode in PenaltyMode::ALL {
            let kind = if mode.is_additive() { PhiKind::ExpZero { rate: 0.01, t0: 0.0 } } else { affine };
            assert_eq!(psi(&g, EdgeId(7), &cfg(mode, kind)).unwrap(), 1.0);
        }

        let exp0 = PhiKind::ExpZero { rate: 0.1, t0: 0.0 };
        let add_edge = cfg(PenaltyMode::AddPerEdge, exp0);
        let total = (0.1f64).exp_m1() + (0.5f64).exp_m1();
        assert!((psi(&g, EdgeId(1), &add_edge).unwrap() - 1.0 / (1.0 - total)).abs() < 1e-15);
        let add_obj = cfg(PenaltyMode::AddPerObject, exp0);
        assert!((psi(&g, EdgeId(2), &add_obj).unwrap() - 1.0 / (1.0 - (0.5f64).exp_m1())).abs() < 1e-15);
    }

    #[test]
    fn additive_infeasibility() {
        let g = path(&[(0, 5.0), (1, 6.0)]);
        let c = cfg(PenaltyMode::AddPerEdge, PhiKind::ExpZero { rate: 0.1, t0: 0.0 });
        assert!(matches!(usage_row(&g, &c), Err(Error::InfeasibleObject { .. })));
        let c = cfg(PenaltyMode::AddPerObject, PhiKind::ExpZero { rate: 1.0, t0: 0.0 });
        assert!(matches!(psi(&g, EdgeId(0), &c), Err(Error::InfeasibleObject { .. })));
    }

    #[test]
    fn rows_and_lengths() {
        // path s-a-t of the paw example with φ(T) = α on its last edge
        let alpha = 2.0;
        let phi = PhiKind::ExpNormalized { rate: std::f64::consts::LN_2, t0: 3.0 };
        let c = cfg(PenaltyMode::MulPerObject, phi);
        let row = usage_row(&path(&[(0, 1.0), (1, 4.0)]), &c).unwrap();
        assert_eq!(row.entries, vec![(EdgeId(0), alpha), (EdgeId(1), alpha)]);
        let row = usage_row(&path(&[(0, 1.0), (2, 2.0), (3, 3.0)]), &c).unwrap();
        assert_eq!(row.entries, vec![(EdgeId(0), 1.0), (EdgeId(2), 1.0), (EdgeId(3), 1.0)]);

        let g = path(&[(0, 1.0), (1, 2.0), (2, 4.0)]);
        let flat = usage_row(&g, &PenaltyConfig::unpenalized()).unwrap();
        assert!(flat.entries.iter().all(|&(_, v)| v == 1.0));

        let rho = [0.5, 0.25, 2.0];
        let mul_edge = cfg(PenaltyMode::MulPerEdge, PhiKind::AffinePlusOne(1.0));
        assert_eq!(rho_length(&g, &rho, &mul_edge).unwrap(), 0.5 * 2.0 + 0.25 * 3.0 + 2.0 * 5.0);
        assert_eq!(rho_length(&g, &[0.0; 3], &mul_edge).unwrap(), 0.0);
        let mul_obj = cfg(PenaltyMode::MulPerObject, PhiKind::AffinePlusOne(1.0));
        assert_eq!(rho_length(&g, &[1.0; 3], &mul_obj).unwrap(), 3.0 * 5.0);
        assert_eq!(UsageRow { entries: vec![(EdgeId(2), 3.0)] }.get(EdgeId(2)), 3.0);
    }

    #[test]
    fn raw_and_row_forms_agree_on_admissibility() {
        let g = path(&[(0, 1.0), (1, 2.0)]);
        let c = cfg(PenaltyMode::AddPerEdge, PhiKind::ExpZero { rate: 0.1, t0: 0.0 });
        for scale in [0.1, 0.3, 0.37, 0.5, 1.0] {
            let rho = [scale, scale];
            let raw = raw_length(&g, &rho, &c).unwrap();
            let n = rho_length(&g, &rho, &c).unwrap();
            assert_eq!(raw >= 1.0, n >= 1.0, "scale {scale}");
        }
    }

    fn any_mode_cfg() -> impl Strategy<Value = PenaltyConfig> {
        (0usize..4, 0.0f64..0.3).prop_map(|(m, rate)| {
            let mode = PenaltyMode::ALL[m];
            let kind = if mode.is_additive() {
                PhiKind::ExpZero { rate: rate / 10.0, t0: 0.0 }
            } else {
                PhiKind::ExpNormalized { rate, t0: 0.0 }
            };
            cfg(mode, kind)
        })
    }

    proptest! {
        #[test]
        fn psi_monotone_in_inclusion_and_time(
            c in any_mode_cfg(),
            times in prop::collection::vec(0.5f64..10.0, 1..5),
            drop in 0usize..5,
            shrink in 0.1f64..1.0,
        ) {
            let steps: Vec<(usize, f64)> = times.iter().enumerate().map(|(i, &t)| (i, t)).collect();
            let full = path(&steps);
            let mut sub_steps = steps.clone();
            if sub_steps.len() > 1 { sub_steps.remove(drop % sub_steps.len()); }
            let sub = path(&sub_steps);
            let earlier = path(&steps.iter().map(|&(e, t)| (e, t * shrink)).collect::<Vec<_>>());
            if usage_row(&full, &c).is_ok() {
                for e in 0..steps.len() {
                    let e = EdgeId(e);
                    let whole = psi(&full, e, &c).unwrap();
                    prop_assert!(psi(&sub, e, &c).unwrap() <= whole + 1e-12);
                    prop_assert!(psi(&earlier, e, &c).unwrap() <= whole + 1e-12);
                }
                if !c.mode().is_additive() {
                    prop_assert!(usage_row(&full, &c).unwrap().entries.iter().all(|&(_, v)| v >= 1.0));
                }
            }
        }

        #[test]
        fn psi_tends_to_one_as_lambda_vanishes(
            c in any_mode_cfg(),
            times in prop::collection::vec(0.5f64..10.0, 1..4),
        ) {
            let g = path(&times.iter().enumerate().map(|(i, &t)| (i, t)).collect::<Vec<_>>());
            let mut prev = f64::INFINITY;
            for k in 1..=6 {
                let lambda = 10f64.powi(-k);
                let scaled = c.with_lambda(lambda).unwrap();
                let v = psi(&g, EdgeId(0), &scaled).unwrap();
                prop_assert!(v <= prev + 1e-15);
                prev = v;
            }
            prop_assert!((prev - 1.0).abs() < 1e-4);
        }
    }
}
