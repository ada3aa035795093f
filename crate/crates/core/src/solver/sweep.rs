//! Parameter sweeps and derived quantities. Sweep points are independent and
//! run in parallel; results come back in axis order.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::penalty::PenaltyConfig;
use crate::tempgraph::{EdgeId, TemporalGraph, VertexId};

use super::{modulus, Exponent, FamilyKind, FamilySpec, SolverOptions};

#[derive(Clone, Debug)]
pub struct LambdaPoint {
    pub lambda: f64,
    pub value: f64,
    pub rho: Vec<f64>,
    /// Mod(Γ̌)/φ^λ(M)^p for multiplicative modes, M the latest contact time.
    pub lower: Option<f64>,
    /// Mod(Γ̌).
    pub upper: f64,
    pub within_bounds: bool,
    /// Not larger than the value at the previous (smaller) λ.
    pub monotone: bool,
}

#[derive(Clone, Debug)]
pub struct LambdaSweep {
    /// Modulus of the same family with φ ≡ 1.
    pub static_value: f64,
    pub static_rho: Vec<f64>,
    pub points: Vec<LambdaPoint>,
}

fn slack(opts: &SolverOptions, p: Exponent) -> f64 {
    10.0 * opts.tol * p.value().clamp(1.0, 1e3)
}

/// Modulus under φ^λ for every λ, sorted by λ.
pub fn lambda_sweep(
    g: &TemporalGraph,
    spec: &FamilySpec,
    lambdas: &[f64],
    opts: &SolverOptions,
) -> Result<LambdaSweep> {
    if lambdas.is_empty() {
        return Err(Error::Config("empty λ list".into()));
    }
    if let Some(l) = lambdas.iter().find(|l| !(**l > 0.0 && l.is_finite())) {
        return Err(Error::Config(format!("λ must be positive, got {l}")));
    }
    let mut lambdas = lambdas.to_vec();
    lambdas.sort_by(f64::total_cmp);
    let flat = modulus(g, &spec.clone().with_penalty(PenaltyConfig::unpenalized()), opts)?;
    let results: Vec<Result<(f64, f64, Vec<f64>)>> = lambdas
        .par_iter()
        .map(|&lambda| {
            let penalty = spec.penalty.with_lambda(lambda)?;
            let r = modulus(g, &spec.clone().with_penalty(penalty), opts)?;
            Ok((lambda, r.value, r.rho_star.values().to_vec()))
        })
        .collect();
    let tol = slack(opts, spec.p);
    let max_time = g.max_time();
    let mut points: Vec<LambdaPoint> = Vec::with_capacity(results.len());
    for res in results {
        let (lambda, value, rho) = res?;
        let lower = (!spec.penalty.mode().is_additive()).then(|| {
            let top = spec.penalty.phi().with_lambda(lambda).eval(max_time);
            match spec.p {
                Exponent::Finite(p) => flat.value / top.powf(p),
                Exponent::Infinity => flat.value / top,
            }
        });
        let within_bounds = value <= flat.value * (1.0 + tol) && lower.is_none_or(|lo| value >= lo * (1.0 - tol));
        let monotone = points.last().is_none_or(|prev| value <= prev.value * (1.0 + tol));
        points.push(LambdaPoint { lambda, value, rho, lower, upper: flat.value, within_bounds, monotone });
    }
    Ok(LambdaSweep { static_value: flat.value, static_rho: flat.rho_star.values().to_vec(), points })
}

#[derive(Clone, Debug)]
pub struct PPoint {
    pub p: f64,
    pub value: f64,
    /// (σ(E)⁻¹·Mod)^{1/p}
    pub transform: f64,
    /// Transform not smaller than at the previous p.
    pub monotone: bool,
}

#[derive(Clone, Debug)]
pub struct PSweep {
    pub sigma_total: f64,
    pub points: Vec<PPoint>,
}

/// Modulus for every p, sorted by p.
pub fn p_sweep(g: &TemporalGraph, spec: &FamilySpec, ps: &[f64], opts: &SolverOptions) -> Result<PSweep> {
    if ps.is_empty() {
        return Err(Error::Config("empty p list".into()));
    }
    let mut ps = ps.iter().map(|&p| Exponent::new(p)).collect::<Result<Vec<_>>>()?;
    if ps.contains(&Exponent::Infinity) {
        return Err(Error::Config("p sweeps take finite exponents".into()));
    }
    ps.sort_by(|a, b| a.value().total_cmp(&b.value()));
    let sigma_total: f64 = spec.sigma_for(g)?.iter().sum();
    let values: Vec<Result<f64>> =
        ps.par_iter().map(|&p| Ok(modulus(g, &spec.clone().with_p(p), opts)?.value)).collect();
    let mut points: Vec<PPoint> = Vec::with_capacity(ps.len());
    for (p, value) in ps.into_iter().zip(values) {
        let value = value?;
        let p = p.value();
        let transform = (value / sigma_total).powf(1.0 / p);
        let monotone = points.last().is_none_or(|prev| transform >= prev.transform * (1.0 - 10.0 * opts.tol));
        points.push(PPoint { p, value, transform, monotone });
    }
    Ok(PSweep { sigma_total, points })
}

#[derive(Clone, Debug)]
pub struct ContinuityPoint {
    pub p: f64,
    pub value: f64,
    pub shifted_value: f64,
    /// |Mod(p + step) − Mod(p)| / Mod(p)
    pub relative_change: f64,
}

/// Compares the modulus at p and p + step.
pub fn p_continuity(
    g: &TemporalGraph,
    spec: &FamilySpec,
    ps: &[f64],
    step: f64,
    opts: &SolverOptions,
) -> Result<Vec<ContinuityPoint>> {
    ps.par_iter()
        .map(|&p| {
            let a = modulus(g, &spec.clone().with_p(Exponent::new(p)?), opts)?.value;
            let b = modulus(g, &spec.clone().with_p(Exponent::new(p + step)?), opts)?.value;
            let relative_change = if a > 0.0 { (b - a).abs() / a } else { (b - a).abs() };
            Ok(ContinuityPoint { p, value: a, shifted_value: b, relative_change })
        })
        .collect()
}

/// Central difference of Mod in σ(e) with step `h`, and the analytic
/// derivative ρ*(e)^p.
pub fn sigma_derivative_check(
    g: &TemporalGraph,
    spec: &FamilySpec,
    e: EdgeId,
    h: f64,
    opts: &SolverOptions,
) -> Result<(f64, f64)> {
    let Exponent::Finite(p) = spec.p else {
        return Err(Error::Precondition("σ-derivative needs 1 < p < ∞".into()));
    };
    if !spec.p.is_interior() {
        return Err(Error::Precondition("σ-derivative needs 1 < p < ∞".into()));
    }
    let sigma = spec.sigma_for(g)?;
    if e.0 >= sigma.len() {
        return Err(Error::Validation(format!("no edge {}", e.0)));
    }
    if !(h > 0.0 && h < sigma[e.0]) {
        return Err(Error::Precondition(format!("step {h} must lie in (0, σ(e))")));
    }
    let at = |delta: f64| -> Result<f64> {
        let mut s = sigma.clone();
        s[e.0] += delta;
        Ok(modulus(g, &spec.clone().with_sigma(s), opts)?.value)
    };
    let base = modulus(g, &spec.clone().with_sigma(sigma.clone()), opts)?;
    let fd = (at(h)? - at(-h)?) / (2.0 * h);
    Ok((fd, base.rho_star.get(e).powf(p)))
}

/// δ_p(x, y) = Mod_p(Γ(x, y))^{−q/p} over the static path family, with the
/// template's p and σ. Infinite when x and y are disconnected.
pub fn delta_p_metric(
    g: &TemporalGraph,
    template: &FamilySpec,
    x: VertexId,
    y: VertexId,
    opts: &SolverOptions,
) -> Result<f64> {
    if g.directed() {
        return Err(Error::Precondition("δ_p is defined on undirected graphs".into()));
    }
    let Exponent::Finite(p) = template.p else {
        return Err(Error::Precondition("δ_p needs 1 < p < ∞".into()));
    };
    if !template.p.is_interior() {
        return Err(Error::Precondition("δ_p needs 1 < p < ∞".into()));
    }
    if x == y {
        return Ok(0.0);
    }
    let spec = FamilySpec {
        source: x,
        target: y,
        kind: FamilyKind::Static,
        penalty: PenaltyConfig::unpenalized(),
        max_hops: None,
        ..template.clone()
    };
    let r = modulus(g, &spec, opts)?;
    if r.empty_family {
        return Ok(f64::INFINITY);
    }
    let q = p / (p - 1.0);
    Ok(r.value.powf(-q / p))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::penalty::PenaltyMode;

    fn opts() -> SolverOptions {
        SolverOptions::with_tol(1e-9)
    }

    #[test]
    fn lambda_sweep_on_multiedge() {
        let (g, s, t) = fixtures::multiedge(&[1.0, 2.0]);
        let spec = FamilySpec::new(s, t, Exponent::Finite(2.0), fixtures::affine_penalty(PenaltyMode::MulPerEdge));
        let sweep = lambda_sweep(&g, &spec, &[1.0, 1e-3, 0.1], &opts()).unwrap();
        assert_eq!(sweep.points.iter().map(|p| p.lambda).collect::<Vec<_>>(), vec![1e-3, 0.1, 1.0]);
        assert!(sweep.points.iter().all(|p| p.within_bounds && p.monotone));
        assert!((sweep.static_value - 2.0).abs() < 1e-8);
        assert!(lambda_sweep(&g, &spec, &[], &opts()).is_err());
        assert!(lambda_sweep(&g, &spec, &[0.0], &opts()).is_err());
    }

    #[test]
    fn p_sweep_matches_parallel_formula() {
        let (g, s, t) = fixtures::parallel_paths(3, 2);
        let spec = FamilySpec::new(s, t, Exponent::Finite(2.0), PenaltyConfig::unpenalized());
        let sweep = p_sweep(&g, &spec, &[3.0, 1.5, 2.0], &opts()).unwrap();
        for pt in &sweep.points {
            assert!((pt.value - 3.0 / 2f64.powf(pt.p - 1.0)).abs() < 1e-7);
            assert!(pt.monotone);
        }
        let cont = p_continuity(&g, &spec, &[1.5, 2.0], 0.01, &opts()).unwrap();
        assert!(cont.iter().all(|c| c.relative_change < 0.05));
    }

    #[test]
    fn derivative_of_multiedge() {
        let (g, s, t) = fixtures::multiedge(&[1.0, 2.0]);
        let spec = FamilySpec::new(s, t, Exponent::Finite(2.0), fixtures::affine_penalty(PenaltyMode::MulPerEdge));
        let (fd, exact) = sigma_derivative_check(&g, &spec, EdgeId(0), 1e-4, &SolverOptions::with_tol(1e-11)).unwrap();
        assert!((exact - 0.25).abs() < 1e-8);
        assert!((fd - exact).abs() < 1e-6);
    }

    #[test]
    fn unused_edge_has_zero_derivative() {
        let mut b = crate::tempgraph::GraphBuilder::new(false);
        b.edge("s", "t", 1.0, &[1.0]);
        b.edge("t", "x", 1.0, &[2.0]);
        let g = b.build().unwrap();
        let spec = FamilySpec::new(
            g.vertex("s").unwrap(),
            g.vertex("t").unwrap(),
            Exponent::Finite(2.0),
            PenaltyConfig::unpenalized(),
        );
        let (fd, exact) = sigma_derivative_check(&g, &spec, EdgeId(1), 1e-4, &opts()).unwrap();
        assert_eq!(exact, 0.0);
        assert!(fd.abs() < 1e-9);
    }

    #[test]
    fn delta_is_effective_resistance_at_two() {
        let (g, s, t) = fixtures::parallel_paths(3, 2);
        let spec = FamilySpec::new(s, t, Exponent::Finite(2.0), PenaltyConfig::unpenalized());
        let d = delta_p_metric(&g, &spec, s, t, &opts()).unwrap();
        assert!((d - 2.0 / 3.0).abs() < 1e-8);
        assert_eq!(delta_p_metric(&g, &spec, s, s, &opts()).unwrap(), 0.0);
        let mut b = crate::tempgraph::GraphBuilder::new(false);
        b.edge("a", "b", 1.0, &[1.0]);
        b.vertex("c");
        let g = b.build().unwrap();
        let d = delta_p_metric(&g, &spec, g.vertex("a").unwrap(), g.vertex("c").unwrap(), &opts()).unwrap();
        assert_eq!(d, f64::INFINITY);
    }
}
