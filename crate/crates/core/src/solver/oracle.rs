//! Reference solver over the fully enumerated family.
//!
//! It shares nothing with the cutting-plane path beyond the usage rows. For
//! 1 < p < ∞ it follows the central path of the primal problem with a log
//! barrier and Newton centering, and certifies the value by weak duality.
//! p = 1 and p = ∞ have direct forms.

use microlp::{ComparisonOp, OptimizationDirection, Problem};
use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::paths::{enumerate_static_paths, enumerate_trp, EnumerateOptions};
use crate::penalty::UsageRow;
use crate::tempgraph::TemporalGraph;

use super::{energy, plan_from, Density, Exponent, FamilyKind, FamilySpec, ModulusResult};

/// Largest family the brute-force solver accepts.
pub const ENUMERATION_LIMIT: usize = 10_000;

/// Mod_{p,σ} by enumerating every path and solving the complete problem.
///
/// Reports the certified lower bound as the value and the energy of the
/// rescaled barrier iterate as `upper_bound`.
pub fn brute_force_modulus(g: &TemporalGraph, spec: &FamilySpec, tol: f64) -> Result<ModulusResult> {
    let sigma = spec.validate(g)?;
    let ne = g.edge_count();
    let enumeration = match spec.kind {
        FamilyKind::TimeRespecting => enumerate_trp(
            g,
            spec.source,
            spec.target,
            &EnumerateOptions { max_hops: spec.max_hops, max_count: ENUMERATION_LIMIT, simple_vertices: false },
        ),
        FamilyKind::Static => enumerate_static_paths(g, spec.source, spec.target, ENUMERATION_LIMIT),
    };
    if enumeration.truncated {
        return Err(Error::EnumerationOverflow { limit: ENUMERATION_LIMIT });
    }
    let cfg = spec.usage_config();
    let mut paths = Vec::new();
    let mut rows = Vec::new();
    let mut dropped = 0;
    for path in enumeration.paths {
        match crate::penalty::usage_row(&path, &cfg) {
            Ok(row) => {
                rows.push(row);
                paths.push(path);
            }
            Err(Error::InfeasibleObject { .. }) => dropped += 1,
            Err(e) => return Err(e),
        }
    }
    if rows.is_empty() {
        let mut r = ModulusResult::empty(spec.p, ne);
        r.dropped = dropped;
        return Ok(r);
    }

    let (weights, rho, lower, upper, iterations) = match spec.p {
        Exponent::Infinity => {
            let reach: Vec<f64> = rows.iter().map(|r| r.entries.iter().map(|&(e, v)| v / sigma[e.0]).sum()).collect();
            let best = (0..reach.len()).min_by(|&a, &b| reach[a].total_cmp(&reach[b])).unwrap();
            let value = 1.0 / reach[best];
            let mut weights = vec![0.0; rows.len()];
            weights[best] = 1.0;
            let rho = sigma.iter().map(|s| value / s).collect();
            (weights, rho, value, value, 1)
        }
        Exponent::Finite(1.0) => {
            let (weights, value) = simplex_lp(&rows, &sigma)?;
            let rho = covering_lp(&rows, &sigma)?;
            let upper = energy(&rho, spec.p, &sigma);
            (weights, rho, value, upper, 1)
        }
        Exponent::Finite(p) => barrier(&rows, &sigma, p, tol)?,
    };

    let (eta_star, plan) = plan_from(&rows, &weights, &paths, ne)?;
    let min_length = rows.iter().map(|r| r.dot(&rho)).fold(f64::INFINITY, f64::min);
    Ok(ModulusResult {
        value: lower,
        p: spec.p,
        rho_star: Density::new(rho)?,
        eta_star,
        plan,
        active_paths: paths,
        rows,
        duals: weights,
        iterations,
        max_violation: 1.0 - min_length,
        duality_gap: if upper > 0.0 { ((upper - lower) / upper).max(0.0) } else { 0.0 },
        lower_bound: lower,
        upper_bound: Some(upper),
        empty_family: false,
        dropped,
    })
}

/// min z s.t. Nᵀμ ≤ zσ, Σμ = 1, μ ≥ 0; Mod₁ = 1/z.
fn simplex_lp(rows: &[UsageRow], sigma: &[f64]) -> Result<(Vec<f64>, f64)> {
    let mut lp = Problem::new(OptimizationDirection::Minimize);
    let z = lp.add_var(1.0, (0.0, f64::INFINITY));
    let mu: Vec<_> = rows.iter().map(|_| lp.add_var(0.0, (0.0, f64::INFINITY))).collect();
    let mut cols: Vec<Vec<(microlp::Variable, f64)>> = vec![Vec::new(); sigma.len()];
    for (i, r) in rows.iter().enumerate() {
        for &(e, v) in &r.entries {
            cols[e.0].push((mu[i], v));
        }
    }
    for (e, mut col) in cols.into_iter().enumerate() {
        if col.is_empty() {
            continue;
        }
        col.push((z, -sigma[e]));
        lp.add_constraint(col.as_slice(), ComparisonOp::Le, 0.0);
    }
    let ones: Vec<_> = mu.iter().map(|&m| (m, 1.0)).collect();
    lp.add_constraint(ones.as_slice(), ComparisonOp::Eq, 1.0);
    let sol =
        lp.solve().map_err(|e| Error::Lp(e.to_string()))?.into_solution().map_err(|e| Error::Lp(format!("{e:?}")))?;
    let weights: Vec<f64> = mu.iter().map(|&m| sol.var_value(m).max(0.0)).collect();
    Ok((weights, 1.0 / sol.var_value(z)))
}

/// min σᵀρ s.t. Nρ ≥ 1, ρ ≥ 0.
fn covering_lp(rows: &[UsageRow], sigma: &[f64]) -> Result<Vec<f64>> {
    let mut lp = Problem::new(OptimizationDirection::Minimize);
    let vars: Vec<_> = sigma.iter().map(|&s| lp.add_var(s, (0.0, f64::INFINITY))).collect();
    for r in rows {
        let expr: Vec<_> = r.entries.iter().map(|&(e, v)| (vars[e.0], v)).collect();
        lp.add_constraint(expr.as_slice(), ComparisonOp::Ge, 1.0);
    }
    let sol =
        lp.solve().map_err(|e| Error::Lp(e.to_string()))?.into_solution().map_err(|e| Error::Lp(format!("{e:?}")))?;
    Ok(vars.iter().map(|&v| sol.var_value(v).max(0.0)).collect())
}

/// (μ, ρ, lower, upper, iterations)
type Solved = (Vec<f64>, Vec<f64>, f64, f64, usize);

fn certified(weights: Vec<f64>, rho: Vec<f64>, lower: f64, upper: f64, iterations: usize, tol: f64) -> Result<Solved> {
    let gap = (upper - lower) / upper;
    if gap > tol {
        return Err(Error::InnerNonConvergence { iterations, gap, rho });
    }
    Ok((weights, rho, lower, upper, iterations))
}

/// Primal log-barrier method on
/// `min τΣσρ^p − Σᵢ log(Nᵢρ − 1) − Σₑ log ρₑ` over the edges the rows touch.
/// The multipliers λᵢ = 1/(τ(Nᵢρ − 1)) certify a lower bound through weak
/// duality, Σλ − (p^{1−q}/q)Σσ̂(Nᵀλ)^q.
fn barrier(rows: &[UsageRow], sigma: &[f64], p: f64, tol: f64) -> Result<Solved> {
    let q = p / (p - 1.0);
    let mut used: Vec<usize> = rows.iter().flat_map(|r| r.entries.iter().map(|&(e, _)| e.0)).collect();
    used.sort_unstable();
    used.dedup();
    let n = used.len();
    let local: Vec<Vec<(usize, f64)>> =
        rows.iter().map(|r| r.entries.iter().map(|&(e, v)| (used.binary_search(&e.0).unwrap(), v)).collect()).collect();
    let sig: Vec<f64> = used.iter().map(|&e| sigma[e]).collect();
    let slack =
        |x: &[f64]| -> Vec<f64> { local.iter().map(|r| r.iter().map(|&(j, v)| v * x[j]).sum::<f64>() - 1.0).collect() };
    let phi = |x: &[f64], tau: f64| -> f64 {
        if x.iter().any(|&v| v <= 0.0) {
            return f64::INFINITY;
        }
        let s = slack(x);
        if s.iter().any(|&v| v <= 0.0) {
            return f64::INFINITY;
        }
        tau * x.iter().zip(&sig).map(|(r, w)| w * r.powf(p)).sum::<f64>()
            - s.iter().map(|v| v.ln()).sum::<f64>()
            - x.iter().map(|v| v.ln()).sum::<f64>()
    };

    let min_sum = local.iter().map(|r| r.iter().map(|&(_, v)| v).sum::<f64>()).fold(f64::INFINITY, f64::min);
    let mut x = vec![2.0 / min_sum; n];
    let e0: f64 = x.iter().zip(&sig).map(|(r, w)| w * r.powf(p)).sum();
    let count = (rows.len() + n) as f64;
    let mut tau = count / e0;
    let (mut lower, mut upper) = (0.0, f64::INFINITY);
    let (mut best_rho, mut best_lam) = (vec![0.0; sigma.len()], vec![0.0; rows.len()]);
    let mut iterations = 0;

    for _ in 0..80 {
        for _ in 0..200 {
            iterations += 1;
            let s = slack(&x);
            let mut grad = DVector::from_fn(n, |j, _| tau * p * sig[j] * x[j].powf(p - 1.0) - 1.0 / x[j]);
            let mut hess = DMatrix::from_fn(n, n, |a, b| {
                if a == b {
                    tau * p * (p - 1.0) * sig[a] * x[a].powf(p - 2.0) + 1.0 / (x[a] * x[a])
                } else {
                    0.0
                }
            });
            for (r, &si) in local.iter().zip(&s) {
                for &(a, va) in r {
                    grad[a] -= va / si;
                    for &(b, vb) in r {
                        hess[(a, b)] += va * vb / (si * si);
                    }
                }
            }
            let Some(ch) = hess.cholesky() else { break };
            let dir = ch.solve(&(-&grad));
            let decrement = -grad.dot(&dir);
            if decrement < 1e-18 {
                break;
            }
            let f0 = phi(&x, tau);
            let mut step = 1.0;
            let mut moved = false;
            for _ in 0..60 {
                let cand: Vec<f64> = x.iter().zip(dir.iter()).map(|(a, d)| a + step * d).collect();
                let f1 = phi(&cand, tau);
                if f1 <= f0 - 0.25 * step * decrement || (step == 1.0 && f1.is_finite() && decrement < 1e-12) {
                    x = cand;
                    moved = true;
                    break;
                }
                step *= 0.5;
            }
            if !moved || decrement < 1e-14 {
                break;
            }
        }

        let s = slack(&x);
        let lam: Vec<f64> = s.iter().map(|v| 1.0 / (tau * v)).collect();
        let mut eta = vec![0.0; n];
        for (r, &l) in local.iter().zip(&lam) {
            for &(j, v) in r {
                eta[j] += v * l;
            }
        }
        let dual = lam.iter().sum::<f64>()
            - p.powf(1.0 - q) / q * eta.iter().zip(&sig).map(|(h, w)| w.powf(1.0 - q) * h.powf(q)).sum::<f64>();
        if dual > lower {
            lower = dual;
            best_lam = lam;
        }
        let min_row = s.iter().fold(f64::INFINITY, |a, v| a.min(v + 1.0));
        let mut rho = vec![0.0; sigma.len()];
        for (j, &e) in used.iter().enumerate() {
            rho[e] = x[j] / min_row;
        }
        let up = energy(&rho, Exponent::Finite(p), sigma);
        if up < upper {
            upper = up;
            best_rho = rho;
        }
        if upper - lower <= tol * upper {
            break;
        }
        tau *= 10.0;
    }
    certified(best_lam, best_rho, lower, upper, iterations, tol)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::penalty::{PenaltyConfig, PenaltyMode};

    #[test]
    fn consecutive_paths_per_object() {
        let (g, s, t) = fixtures::consecutive_paths(2, &[1.0, 2.0]);
        let spec = FamilySpec::new(s, t, Exponent::Finite(2.0), fixtures::affine_penalty(PenaltyMode::MulPerObject));
        let r = brute_force_modulus(&g, &spec, 1e-9).unwrap();
        assert!((r.value - 1.0 / 9.0).abs() < 1e-8, "{}", r.value);
    }

    #[test]
    fn single_path_formula() {
        let (g, s, t) = fixtures::single_path(&[1.0, 2.0, 3.0]);
        for p in [1.5, 2.0, 3.0] {
            let spec = FamilySpec::new(s, t, Exponent::Finite(p), fixtures::affine_penalty(PenaltyMode::MulPerEdge));
            let r = brute_force_modulus(&g, &spec, 1e-10).unwrap();
            let q = p / (p - 1.0);
            let expected = [2.0f64, 3.0, 4.0].iter().map(|x| x.powf(q)).sum::<f64>().powf(-p / q);
            assert!((r.value - expected).abs() < 1e-9 * expected);
        }
    }

    #[test]
    fn paw_value() {
        let (g, s, t) = fixtures::paw();
        let spec = FamilySpec::new(s, t, Exponent::Finite(2.0), fixtures::paw_penalty());
        let r = brute_force_modulus(&g, &spec, 1e-10).unwrap();
        assert!((r.value - 0.35).abs() < 1e-8);
        assert_eq!(r.active_paths.len(), 2);
    }

    #[test]
    fn endpoints_p_one_and_infinity() {
        let (g, s, t) = fixtures::parallel_paths(3, 2);
        let cfg = PenaltyConfig::unpenalized();
        let one = brute_force_modulus(&g, &FamilySpec::new(s, t, Exponent::Finite(1.0), cfg), 1e-9).unwrap();
        assert!((one.value - 3.0).abs() < 1e-9);
        let inf = brute_force_modulus(&g, &FamilySpec::new(s, t, Exponent::Infinity, cfg), 1e-9).unwrap();
        assert!((inf.value - 0.5).abs() < 1e-12);
    }

    #[test]
    fn overflow_is_refused() {
        // 2^14 combinations of parallel edge choices along a chain
        let mut b = crate::tempgraph::GraphBuilder::new(true);
        for i in 0..14 {
            for k in 0..2 {
                b.keyed_edge(&format!("v{i:02}"), &format!("v{:02}", i + 1), 1.0, &[i as f64 + 1.0], &k.to_string());
            }
        }
        let g = b.build().unwrap();
        let spec = FamilySpec::new(
            g.vertex("v00").unwrap(),
            g.vertex("v14").unwrap(),
            Exponent::Finite(2.0),
            PenaltyConfig::unpenalized(),
        );
        assert!(matches!(brute_force_modulus(&g, &spec, 1e-6), Err(Error::EnumerationOverflow { .. })));
    }
}
