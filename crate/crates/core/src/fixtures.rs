//! Small graphs whose modulus is known in closed form, and the golden
//! examples built on them.

use crate::error::Result;
use crate::penalty::{PenaltyConfig, PenaltyMode, PhiKind, PhiSpec};
use crate::solver::{dual_recover, modulus, Exponent, FamilySpec, SolverOptions};
use crate::tempgraph::{EdgeId, GraphBuilder, TemporalGraph, VertexId};

fn endpoints(g: &TemporalGraph, s: &str, t: &str) -> (VertexId, VertexId) {
    (g.vertex(s).unwrap(), g.vertex(t).unwrap())
}

/// k internally disjoint s–t paths of ℓ unit edges, each with times 1, 2, …, ℓ.
pub fn parallel_paths(k: usize, l: usize) -> (TemporalGraph, VertexId, VertexId) {
    let times: Vec<f64> = (1..=l).map(|i| i as f64).collect();
    consecutive_paths(k, &times)
}

/// k internally disjoint s–t paths whose i-th edges are available at `times[i]`.
pub fn consecutive_paths(k: usize, times: &[f64]) -> (TemporalGraph, VertexId, VertexId) {
    let mut b = GraphBuilder::new(false);
    let r = times.len();
    for path in 0..k {
        let hop = |i: usize| match i {
            0 => "s".to_string(),
            i if i == r => "t".to_string(),
            i => format!("p{path}_{i}"),
        };
        for (i, &t) in times.iter().enumerate() {
            b.keyed_edge(&hop(i), &hop(i + 1), 1.0, &[t], &path.to_string());
        }
    }
    let g = b.build().unwrap();
    let (s, t) = endpoints(&g, "s", "t");
    (g, s, t)
}

/// Parallel a–b edges, one per time.
pub fn multiedge(times: &[f64]) -> (TemporalGraph, VertexId, VertexId) {
    let mut b = GraphBuilder::new(false);
    for (i, &t) in times.iter().enumerate() {
        b.keyed_edge("a", "b", 1.0, &[t], &i.to_string());
    }
    let g = b.build().unwrap();
    let (s, t) = endpoints(&g, "a", "b");
    (g, s, t)
}

/// A single path v0–v1–…–vn with the given increasing times.
pub fn single_path(times: &[f64]) -> (TemporalGraph, VertexId, VertexId) {
    let mut b = GraphBuilder::new(false);
    for (i, &t) in times.iter().enumerate() {
        b.edge(&format!("v{i}"), &format!("v{}", i + 1), 1.0, &[t]);
    }
    let g = b.build().unwrap();
    let (s, t) = endpoints(&g, "v0", &format!("v{}", times.len()));
    (g, s, t)
}

/// The paw graph: s–a at 1, a–b at 2, b–t at 3 and the chord a–t at 4.
/// Its family is {s-a-t, s-a-b-t}.
pub fn paw() -> (TemporalGraph, VertexId, VertexId) {
    let mut b = GraphBuilder::new(false);
    b.edge("s", "a", 1.0, &[1.0]);
    b.edge("a", "b", 1.0, &[2.0]);
    b.edge("b", "t", 1.0, &[3.0]);
    b.edge("a", "t", 1.0, &[4.0]);
    let g = b.build().unwrap();
    let (s, t) = endpoints(&g, "s", "t");
    (g, s, t)
}

/// Per-object penalty on the paw with φ(3) = 1 and φ(4) = 2: the long path
/// has usage 1 on each edge, the short one usage 2.
pub fn paw_penalty() -> PenaltyConfig {
    let phi = PhiSpec::new(PhiKind::ExpNormalized { rate: std::f64::consts::LN_2, t0: 3.0 });
    PenaltyConfig::new(PenaltyMode::MulPerObject, phi).unwrap()
}

/// φ(t) = 1 + t under a multiplicative mode.
pub fn affine_penalty(mode: PenaltyMode) -> PenaltyConfig {
    PenaltyConfig::new(mode, PhiSpec::new(PhiKind::AffinePlusOne(1.0))).unwrap()
}

/// Optimal weight δ of the short paw path for f(δ) = 2α²δ² + 2αβδ(1−δ) + 3β²(1−δ)².
pub fn paw_optimal_delta(alpha: f64, beta: f64) -> f64 {
    // f'(δ) = 0 for the quadratic aδ² + bδ + c
    let a = 2.0 * alpha * alpha - 2.0 * alpha * beta + 3.0 * beta * beta;
    let b = 2.0 * alpha * beta - 6.0 * beta * beta;
    (-b / (2.0 * a)).clamp(0.0, 1.0)
}

/// Mod₂ of the paw family, 1 / min f.
pub fn paw_value(alpha: f64, beta: f64) -> f64 {
    let d = paw_optimal_delta(alpha, beta);
    let f = 2.0 * alpha * alpha * d * d + 2.0 * alpha * beta * d * (1.0 - d) + 3.0 * beta * beta * (1.0 - d).powi(2);
    1.0 / f
}

pub struct GoldenCase {
    pub group: &'static str,
    pub name: String,
    pub expected: f64,
    pub tolerance: f64,
    compute: Box<dyn Fn() -> Result<f64> + Send + Sync>,
}

impl GoldenCase {
    fn new(
        group: &'static str,
        name: impl Into<String>,
        expected: f64,
        tolerance: f64,
        compute: impl Fn() -> Result<f64> + Send + Sync + 'static,
    ) -> Self {
        GoldenCase { group, name: name.into(), expected, tolerance, compute: Box::new(compute) }
    }

    pub fn compute(&self) -> Result<f64> {
        (self.compute)()
    }
}

fn value_of(g: &TemporalGraph, spec: &FamilySpec) -> Result<f64> {
    Ok(modulus(g, spec, &SolverOptions::with_tol(1e-9))?.value)
}

/// The built-in golden suite, grouped by example.
pub fn golden_cases() -> Vec<GoldenCase> {
    let mut cases = Vec::new();

    for (k, l, p) in [(3, 2, 2.0), (2, 4, 1.5), (5, 1, 3.0)] {
        cases.push(GoldenCase::new(
            "parallel paths",
            format!("k={k} l={l} p={p}"),
            k as f64 / (l as f64).powf(p - 1.0),
            1e-5,
            move || {
                let (g, s, t) = parallel_paths(k, l);
                value_of(&g, &FamilySpec::new(s, t, Exponent::Finite(p), PenaltyConfig::unpenalized()))
            },
        ));
    }

    let multi = || {
        let (g, s, t) = multiedge(&[1.0, 2.0]);
        let spec = FamilySpec::new(s, t, Exponent::Finite(2.0), affine_penalty(PenaltyMode::MulPerEdge));
        (g, spec)
    };
    cases.push(GoldenCase::new("multiedge", "modulus", 13.0 / 36.0, 1e-6, move || {
        let (g, spec) = multi();
        value_of(&g, &spec)
    }));
    for (e, expected) in [(0, 0.5), (1, 1.0 / 3.0)] {
        cases.push(GoldenCase::new("multiedge", format!("rho(e{e})"), expected, 1e-6, move || {
            let (g, spec) = multi();
            Ok(modulus(&g, &spec, &SolverOptions::with_tol(1e-9))?.rho_star.get(EdgeId(e)))
        }));
    }

    let consec = |mode| {
        let (g, s, t) = consecutive_paths(2, &[1.0, 2.0]);
        (g, FamilySpec::new(s, t, Exponent::Finite(2.0), affine_penalty(mode)))
    };
    cases.push(GoldenCase::new("consecutive paths", "per-object", 1.0 / 9.0, 1e-6, move || {
        let (g, spec) = consec(PenaltyMode::MulPerObject);
        value_of(&g, &spec)
    }));
    cases.push(GoldenCase::new("consecutive paths", "per-edge", 2.0 / 13.0, 1e-6, move || {
        let (g, spec) = consec(PenaltyMode::MulPerEdge);
        value_of(&g, &spec)
    }));
    cases.push(GoldenCase::new("consecutive paths", "plan mass", 0.5, 1e-4, move || {
        let (g, spec) = consec(PenaltyMode::MulPerEdge);
        let r = modulus(&g, &spec, &SolverOptions::with_tol(1e-9))?;
        let d = dual_recover(&r, spec.p, &g.weights())?;
        Ok(d.plan.iter().map(|e| e.mass).fold(0.0, f64::max))
    }));

    cases.push(GoldenCase::new("paw", "modulus", 0.35, 1e-5, || {
        let (g, s, t) = paw();
        value_of(&g, &FamilySpec::new(s, t, Exponent::Finite(2.0), paw_penalty()))
    }));
    cases.push(GoldenCase::new("paw", "short path mass", 1.0 / 7.0, 1e-4, || {
        let (g, s, t) = paw();
        let spec = FamilySpec::new(s, t, Exponent::Finite(2.0), paw_penalty());
        let r = modulus(&g, &spec, &SolverOptions::with_tol(1e-9))?;
        let d = dual_recover(&r, spec.p, &g.weights())?;
        Ok(d.plan.iter().find(|e| e.path.len() == 2).map_or(0.0, |e| e.mass))
    }));
    cases
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn paw_quadratic() {
        assert!((paw_optimal_delta(2.0, 1.0) - 1.0 / 7.0).abs() < 1e-15);
        assert!((paw_value(2.0, 1.0) - 0.35).abs() < 1e-15);
    }

    #[test]
    fn paw_penalty_values() {
        let phi = paw_penalty();
        assert!((phi.phi().eval(4.0) - 2.0).abs() < 1e-15);
        assert_eq!(phi.phi().eval(3.0), 1.0);
    }

    #[test]
    fn golden_suite_passes() {
        for case in golden_cases() {
            let got = case.compute().unwrap();
            assert!((got - case.expected).abs() <= case.tolerance, "{} {}: {got}", case.group, case.name);
        }
    }
}
