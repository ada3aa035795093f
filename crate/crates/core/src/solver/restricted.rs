//! Modulus restricted to finitely many rows.
//!
//! For 1 < p < ∞ the solver works on the Lagrange dual. With q = p/(p−1),
//! σ̂ = σ^{1−q} and η = Nᵀλ, the dual objective to minimize over λ ≥ 0 is
//!
//! ```text
//!     f(λ) = (p^{1−q}/q) Σ σ̂ η^q − Σ λ
//! ```
//!
//! whose gradient is Nρ(λ) − 1 with ρ(λ) = p^{1−q} σ̂ η^{q−1}. It is minimized by
//! projected Newton steps on an ε-active set. Every iterate certifies
//! `−f(λ) ≤ Mod ≤ E(ρ)/min(Nρ)^p`, and the loop stops when the relative gap
//! drops below the requested tolerance.
//!
//! p = 1 is solved as a pair of linear programs (primal for ρ, dual for λ) and
//! p = ∞ in closed form.

use microlp::{ComparisonOp, OptimizationDirection, Problem};
use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::penalty::UsageRow;

use super::Exponent;

const MAX_NEWTON: usize = 500;
const ARMIJO: f64 = 1e-4;

#[derive(Clone, Debug)]
pub struct RestrictedSolution {
    /// Optimal density on every edge of the graph, zero off the rows' support.
    /// Scaled so the shortest row has length exactly one.
    pub rho: Vec<f64>,
    /// One multiplier per input row.
    pub duals: Vec<f64>,
    /// Certified bounds on the restricted modulus.
    pub lower: f64,
    pub upper: f64,
    pub iterations: usize,
}

impl RestrictedSolution {
    pub fn gap(&self) -> f64 {
        if self.upper > 0.0 {
            ((self.upper - self.lower) / self.upper).max(0.0)
        } else {
            0.0
        }
    }
}

/// Minimizes the energy subject to `row·ρ ≥ 1` for every row.
pub fn restricted_solve(rows: &[UsageRow], p: Exponent, sigma: &[f64], inner_tol: f64) -> Result<RestrictedSolution> {
    solve_warm(rows, p, sigma, inner_tol, None)
}

pub(crate) fn solve_warm(
    rows: &[UsageRow],
    p: Exponent,
    sigma: &[f64],
    inner_tol: f64,
    warm: Option<&[f64]>,
) -> Result<RestrictedSolution> {
    if rows.is_empty() {
        return Err(Error::Precondition("restricted problem has no rows".into()));
    }
    if let Some(i) = rows.iter().position(|r| !r.entries.iter().any(|&(_, v)| v > 0.0)) {
        return Err(Error::Precondition(format!("row {i} has no positive entry")));
    }
    let (local, groups) = Local::new(rows, sigma);
    let warm_local = warm.map(|w| {
        let mut lam = vec![0.0; local.rows.len()];
        for (g, members) in groups.iter().enumerate() {
            lam[g] = members.iter().map(|&i| w.get(i).copied().unwrap_or(0.0)).sum();
        }
        lam
    });
    let sol = match p {
        Exponent::Finite(1.0) => local.solve_lp()?,
        Exponent::Finite(p) => local.solve_newton(p, inner_tol, warm_local)?,
        Exponent::Infinity => local.solve_inf(),
    };
    // merged duplicates: the first member carries the summed multiplier
    let mut duals = vec![0.0; rows.len()];
    for (g, members) in groups.iter().enumerate() {
        duals[members[0]] = sol.duals[g];
    }
    let mut rho = vec![0.0; sigma.len()];
    for (j, &e) in local.edge_of.iter().enumerate() {
        rho[e] = sol.rho[j];
    }
    Ok(RestrictedSolution { rho, duals, lower: sol.lower, upper: sol.upper, iterations: sol.iterations })
}

/// Rows over the edges they touch, with identical rows merged.
struct Local {
    rows: Vec<Vec<(usize, f64)>>,
    cols: Vec<Vec<(usize, f64)>>,
    sigma: Vec<f64>,
    edge_of: Vec<usize>,
}

struct LocalSolution {
    rho: Vec<f64>,
    duals: Vec<f64>,
    lower: f64,
    upper: f64,
    iterations: usize,
}

impl Local {
    fn new(rows: &[UsageRow], sigma: &[f64]) -> (Local, Vec<Vec<usize>>) {
        let mut edge_of: Vec<usize> = rows.iter().flat_map(|r| r.entries.iter().map(|&(e, _)| e.0)).collect();
        edge_of.sort_unstable();
        edge_of.dedup();
        let mut groups: Vec<Vec<usize>> = Vec::new();
        let mut seen: std::collections::HashMap<Vec<(usize, u64)>, usize> = std::collections::HashMap::new();
        let mut local_rows = Vec::new();
        for (i, r) in rows.iter().enumerate() {
            let key: Vec<(usize, u64)> =
                r.entries.iter().filter(|&&(_, v)| v != 0.0).map(|&(e, v)| (e.0, v.to_bits())).collect();
            if let Some(&g) = seen.get(&key) {
                groups[g].push(i);
                continue;
            }
            seen.insert(key, groups.len());
            groups.push(vec![i]);
            local_rows.push(
                r.entries
                    .iter()
                    .filter(|&&(_, v)| v != 0.0)
                    .map(|&(e, v)| (edge_of.binary_search(&e.0).unwrap(), v))
                    .collect::<Vec<_>>(),
            );
        }
        let mut cols = vec![Vec::new(); edge_of.len()];
        for (i, r) in local_rows.iter().enumerate() {
            for &(j, v) in r {
                cols[j].push((i, v));
            }
        }
        let sigma = edge_of.iter().map(|&e| sigma[e]).collect();
        (Local { rows: local_rows, cols, sigma, edge_of }, groups)
    }

    fn row_dot(&self, i: usize, rho: &[f64]) -> f64 {
        self.rows[i].iter().map(|&(j, v)| v * rho[j]).sum()
    }

    fn min_row(&self, rho: &[f64]) -> f64 {
        (0..self.rows.len()).map(|i| self.row_dot(i, rho)).fold(f64::INFINITY, f64::min)
    }

    fn solve_inf(&self) -> LocalSolution {
        // ρ = t/σ saturates every edge at energy t; the binding row has the least Σ N/σ
        let reach: Vec<f64> = self.rows.iter().map(|r| r.iter().map(|&(j, v)| v / self.sigma[j]).sum()).collect();
        let (best, &min) = reach.iter().enumerate().min_by(|a, b| a.1.total_cmp(b.1)).unwrap();
        let t = 1.0 / min;
        let mut duals = vec![0.0; self.rows.len()];
        duals[best] = t;
        LocalSolution { rho: self.sigma.iter().map(|s| t / s).collect(), duals, lower: t, upper: t, iterations: 1 }
    }

    fn solve_lp(&self) -> Result<LocalSolution> {
        let lp_err = |e: microlp::Error| Error::Lp(e.to_string());
        let mut primal = Problem::new(OptimizationDirection::Minimize);
        let vars: Vec<_> = self.sigma.iter().map(|&s| primal.add_var(s, (0.0, f64::INFINITY))).collect();
        for r in &self.rows {
            let expr: Vec<_> = r.iter().map(|&(j, v)| (vars[j], v)).collect();
            primal.add_constraint(expr.as_slice(), ComparisonOp::Ge, 1.0);
        }
        let sol = primal.solve().map_err(lp_err)?.into_solution().map_err(|e| Error::Lp(format!("{e:?}")))?;
        let mut rho: Vec<f64> = vars.iter().map(|&v| sol.var_value(v).max(0.0)).collect();

        let mut dual = Problem::new(OptimizationDirection::Maximize);
        let lams: Vec<_> = self.rows.iter().map(|_| dual.add_var(1.0, (0.0, f64::INFINITY))).collect();
        for (j, col) in self.cols.iter().enumerate() {
            let expr: Vec<_> = col.iter().map(|&(i, v)| (lams[i], v)).collect();
            dual.add_constraint(expr.as_slice(), ComparisonOp::Le, self.sigma[j]);
        }
        let dsol = dual.solve().map_err(lp_err)?.into_solution().map_err(|e| Error::Lp(format!("{e:?}")))?;
        let duals: Vec<f64> = lams.iter().map(|&v| dsol.var_value(v).max(0.0)).collect();

        let m = self.min_row(&rho);
        if m > 0.0 {
            rho.iter_mut().for_each(|r| *r /= m);
        }
        let upper = rho.iter().zip(&self.sigma).map(|(r, s)| r * s).sum::<f64>();
        // the dual may violate σ by rounding; scaling restores feasibility
        let slack = self
            .cols
            .iter()
            .enumerate()
            .map(|(j, col)| col.iter().map(|&(i, v)| v * duals[i]).sum::<f64>() / self.sigma[j])
            .fold(1.0, f64::max);
        let lower = duals.iter().sum::<f64>() / slack;
        Ok(LocalSolution { rho, duals, lower, upper, iterations: 1 })
    }

    fn solve_newton(&self, p: f64, tol: f64, warm: Option<Vec<f64>>) -> Result<LocalSolution> {
        let dual = Dual::new(self, p);
        let m = self.rows.len();
        let mut lam = warm.unwrap_or_else(|| vec![0.0; m]);
        lam.truncate(m);
        lam.resize(m, 0.0);
        for x in lam.iter_mut() {
            if !(x.is_finite() && *x > 0.0) {
                *x = 0.0;
            }
        }
        // rows without weight get a one-dimensional solve against the rest
        for i in 0..m {
            if lam[i] == 0.0 {
                dual.coordinate_init(&mut lam, i);
            }
        }

        let mut best: Option<(f64, Vec<f64>, Vec<f64>, f64)> = None;
        let mut iterations = 0;
        let mut stalled = false;
        while iterations < MAX_NEWTON {
            iterations += 1;
            let eta = dual.eta(&lam);
            let rho = dual.rho(&eta);
            let grad: Vec<f64> = (0..m).map(|i| self.row_dot(i, &rho) - 1.0).collect();
            let min_row = grad.iter().fold(f64::INFINITY, |a, g| a.min(g + 1.0));
            let energy = dual.energy(&eta);
            let lower = lam.iter().sum::<f64>() - dual.c * dual.power_sum(&eta);
            if min_row > 0.0 {
                let upper = energy / min_row.powf(p);
                if best.as_ref().is_none_or(|b| upper - lower < b.0 - b.3) {
                    let scaled = rho.iter().map(|r| r / min_row).collect();
                    best = Some((upper, scaled, lam.clone(), lower));
                }
            }
            if let Some((upper, _, _, lo)) = &best {
                if upper - lo <= tol * upper {
                    break;
                }
            }
            if stalled {
                break;
            }
            match dual.newton_step(&mut lam, &eta, &grad) {
                Some(_) => {}
                None => stalled = true,
            }
        }
        let (upper, rho, duals, lower) = best.ok_or(Error::InnerNonConvergence {
            iterations,
            gap: f64::INFINITY,
            rho: vec![0.0; self.sigma.len()],
        })?;
        let gap = (upper - lower) / upper;
        // below this the certificate is limited by rounding, not by the iteration
        if gap > tol.max(1e-13) {
            return Err(Error::InnerNonConvergence { iterations, gap, rho });
        }
        Ok(LocalSolution { rho, duals, lower: lower.min(upper), upper, iterations })
    }
}

struct Dual<'a> {
    local: &'a Local,
    p: f64,
    q: f64,
    c: f64,
    sigma_hat: Vec<f64>,
}

impl<'a> Dual<'a> {
    fn new(local: &'a Local, p: f64) -> Self {
        let q = p / (p - 1.0);
        Dual { local, p, q, c: p.powf(1.0 - q) / q, sigma_hat: local.sigma.iter().map(|s| s.powf(1.0 - q)).collect() }
    }

    fn eta(&self, lam: &[f64]) -> Vec<f64> {
        self.local.cols.iter().map(|col| col.iter().map(|&(i, v)| v * lam[i]).sum()).collect()
    }

    fn rho_at(&self, j: usize, eta: f64) -> f64 {
        if eta > 0.0 {
            self.p.powf(1.0 - self.q) * self.sigma_hat[j] * eta.powf(self.q - 1.0)
        } else {
            0.0
        }
    }

    fn rho(&self, eta: &[f64]) -> Vec<f64> {
        eta.iter().enumerate().map(|(j, &x)| self.rho_at(j, x)).collect()
    }

    fn power_sum(&self, eta: &[f64]) -> f64 {
        eta.iter().zip(&self.sigma_hat).map(|(x, s)| s * x.max(0.0).powf(self.q)).sum()
    }

    /// Σσρ^p at ρ(λ).
    fn energy(&self, eta: &[f64]) -> f64 {
        self.p.powf(-self.q) * self.power_sum(eta)
    }

    fn objective(&self, lam: &[f64]) -> f64 {
        self.c * self.power_sum(&self.eta(lam)) - lam.iter().sum::<f64>()
    }

    /// Minimizes f along coordinate i, the others fixed.
    fn coordinate_init(&self, lam: &mut [f64], i: usize) {
        let mut eta = self.eta(lam);
        let row = &self.local.rows[i];
        for &(j, v) in row {
            eta[j] -= v * lam[i];
        }
        let slope = |x: f64| -> f64 { row.iter().map(|&(j, v)| v * self.rho_at(j, eta[j] + v * x)).sum::<f64>() - 1.0 };
        if slope(0.0) >= 0.0 {
            lam[i] = 0.0;
            return;
        }
        let (mut lo, mut hi) = (0.0, 1.0);
        let mut guard = 0;
        while slope(hi) < 0.0 && guard < 2000 {
            lo = hi;
            hi *= 2.0;
            guard += 1;
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if slope(mid) < 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        lam[i] = 0.5 * (lo + hi);
    }

    /// One projected Newton iteration. Returns `None` when no decrease is possible.
    fn newton_step(&self, lam: &mut [f64], eta: &[f64], grad: &[f64]) -> Option<()> {
        let m = lam.len();
        let pg: f64 = (0..m).map(|i| (lam[i] - (lam[i] - grad[i]).max(0.0)).powi(2)).sum::<f64>().sqrt();
        let eps = pg.min(1e-3 * lam.iter().cloned().fold(0.0, f64::max).max(1e-300));
        let active: Vec<bool> = (0..m).map(|i| lam[i] <= eps && grad[i] > 0.0).collect();
        let free: Vec<usize> = (0..m).filter(|&i| !active[i]).collect();

        let max_eta = eta.iter().cloned().fold(0.0, f64::max);
        let floor = (1e-12 * max_eta).max(f64::MIN_POSITIVE);
        let scale = (self.q - 1.0) * self.p.powf(1.0 - self.q);
        let w: Vec<f64> = eta
            .iter()
            .zip(&self.sigma_hat)
            .map(|(&x, s)| {
                let x = if self.q < 2.0 { x.max(floor) } else { x };
                scale * s * x.powf(self.q - 2.0)
            })
            .collect();

        let mut pos = vec![usize::MAX; m];
        for (k, &i) in free.iter().enumerate() {
            pos[i] = k;
        }
        let nf = free.len();
        let mut h = DMatrix::<f64>::zeros(nf, nf);
        let mut diag = vec![0.0; m];
        for (j, col) in self.local.cols.iter().enumerate() {
            for &(a, va) in col {
                diag[a] += w[j] * va * va;
                if pos[a] == usize::MAX {
                    continue;
                }
                for &(b, vb) in col {
                    if pos[b] != usize::MAX {
                        h[(pos[a], pos[b])] += w[j] * va * vb;
                    }
                }
            }
        }

        let mut dir = vec![0.0; m];
        if nf > 0 {
            let rhs = DVector::from_iterator(nf, free.iter().map(|&i| -grad[i]));
            let dmax = (0..nf).map(|k| h[(k, k)]).fold(0.0, f64::max).max(f64::MIN_POSITIVE);
            let mut delta = 0.0;
            let mut solved = None;
            for _ in 0..12 {
                let mut reg = h.clone();
                for k in 0..nf {
                    reg[(k, k)] += delta;
                }
                if let Some(ch) = reg.cholesky() {
                    let d = ch.solve(&rhs);
                    if d.iter().all(|x| x.is_finite()) {
                        solved = Some(d);
                        break;
                    }
                }
                delta = if delta == 0.0 { 1e-14 * dmax } else { delta * 100.0 };
            }
            match solved {
                Some(d) => {
                    for (k, &i) in free.iter().enumerate() {
                        dir[i] = d[k];
                    }
                }
                None => {
                    for &i in &free {
                        dir[i] = -grad[i] / diag[i].max(f64::MIN_POSITIVE);
                    }
                }
            }
        }
        for i in 0..m {
            if active[i] {
                dir[i] = -grad[i] / diag[i].max(1e-300);
            }
        }
        if free.iter().map(|&i| grad[i] * dir[i]).sum::<f64>() > 0.0 {
            for &i in &free {
                dir[i] = -grad[i] / diag[i].max(1e-300);
            }
        }

        let f0 = self.objective(lam);
        let mut alpha = 1.0;
        let mut cand = vec![0.0; m];
        for _ in 0..60 {
            for i in 0..m {
                cand[i] = (lam[i] + alpha * dir[i]).max(0.0);
            }
            let f1 = self.objective(&cand);
            let predicted: f64 =
                (0..m).map(|i| if active[i] { grad[i] * (lam[i] - cand[i]) } else { -alpha * grad[i] * dir[i] }).sum();
            // a decrease below the resolution of f cannot be measured; take the full step
            let unmeasurable = alpha == 1.0 && predicted <= 1e-12 * f0.abs();
            if f1.is_finite() && (f1 <= f0 - ARMIJO * predicted || unmeasurable) {
                if cand == lam {
                    return None;
                }
                lam.copy_from_slice(&cand);
                return Some(());
            }
            alpha *= 0.5;
        }
        None
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tempgraph::EdgeId;

    fn row(entries: &[(usize, f64)]) -> UsageRow {
        UsageRow { entries: entries.iter().map(|&(e, v)| (EdgeId(e), v)).collect() }
    }

    #[test]
    fn single_row_kkt_by_hand() {
        let sol = restricted_solve(&[row(&[(0, 4.0)])], Exponent::Finite(2.0), &[1.0], 1e-10).unwrap();
        assert!((sol.rho[0] - 0.25).abs() < 1e-10);
        assert!((sol.upper - 1.0 / 16.0).abs() < 1e-10);
        // stationarity: pσρ^{p−1} = λN
        assert!((2.0 * sol.rho[0] - 4.0 * sol.duals[0]).abs() < 1e-9);
    }

    #[test]
    fn singleton_rows_invert_their_entries() {
        let rows = [row(&[(0, 2.0)]), row(&[(1, 3.0)])];
        for p in [Exponent::Finite(1.5), Exponent::Finite(2.0), Exponent::Finite(3.0), Exponent::Finite(1.0)] {
            let sol = restricted_solve(&rows, p, &[1.0, 1.0], 1e-10).unwrap();
            assert!((sol.rho[0] - 0.5).abs() < 1e-8, "{p:?}");
            assert!((sol.rho[1] - 1.0 / 3.0).abs() < 1e-8, "{p:?}");
        }
    }

    #[test]
    fn duplicate_rows_are_harmless() {
        let one = restricted_solve(&[row(&[(0, 1.0), (1, 1.0)])], Exponent::Finite(2.0), &[1.0; 2], 1e-10).unwrap();
        let two = restricted_solve(
            &[row(&[(0, 1.0), (1, 1.0)]), row(&[(0, 1.0), (1, 1.0)])],
            Exponent::Finite(2.0),
            &[1.0; 2],
            1e-10,
        )
        .unwrap();
        assert!((one.rho[0] - two.rho[0]).abs() < 1e-10);
        assert!((one.duals[0] - two.duals[0] - two.duals[1]).abs() < 1e-9);
    }

    #[test]
    fn duality_gap_and_complementary_slackness() {
        // two overlapping paths plus one dominated row
        let rows = [row(&[(0, 1.0), (1, 1.0)]), row(&[(0, 1.0), (2, 2.0)]), row(&[(0, 1.0), (1, 1.0), (2, 2.0)])];
        for p in [1.5, 2.0, 3.0, 10.0] {
            let sol = restricted_solve(&rows, Exponent::Finite(p), &[1.0, 2.0, 0.5], 1e-9).unwrap();
            assert!(sol.gap() <= 1e-9, "p={p}");
            let lengths: Vec<f64> = rows.iter().map(|r| r.dot(&sol.rho)).collect();
            assert!(lengths.iter().all(|&l| l >= 1.0 - 1e-12));
            for (l, d) in lengths.iter().zip(&sol.duals) {
                assert!(*d * (l - 1.0) <= 1e-7 * sol.upper, "p={p}");
            }
            assert!(sol.duals[2] == 0.0 || lengths[2] - 1.0 < 1e-7);
        }
    }

    #[test]
    fn infinity_and_one() {
        let rows = [row(&[(0, 1.0), (1, 1.0)]), row(&[(2, 1.0)])];
        let inf = restricted_solve(&rows, Exponent::Infinity, &[1.0; 3], 1e-9).unwrap();
        // worst row is the single edge
        assert_eq!(inf.upper, 1.0);
        let one = restricted_solve(&rows, Exponent::Finite(1.0), &[1.0; 3], 1e-9).unwrap();
        assert!((one.upper - 2.0).abs() < 1e-9);
        assert!((one.lower - 2.0).abs() < 1e-9);
    }

    #[test]
    fn preconditions() {
        assert!(matches!(restricted_solve(&[], Exponent::Finite(2.0), &[], 1e-9), Err(Error::Precondition(_))));
        assert!(matches!(
            restricted_solve(&[row(&[(0, 0.0)])], Exponent::Finite(2.0), &[1.0], 1e-9),
            Err(Error::Precondition(_))
        ));
    }
}
