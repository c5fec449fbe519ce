//! Exact Prohorov distance between finite atomic measures and the
//! `d_{M_O}` metric.
//!
//! For finite measures the Prohorov distance is
//!
//! ```text
//! p(mu, nu) = inf { eps : mu(A) <= nu(A^eps) + eps and nu(A) <= mu(A^eps) + eps, all closed A }
//! ```
//!
//! with `A^eps` the closed `eps`-neighbourhood. For atomic measures the
//! worst set is a subset of the support, and the deficiency
//! `F(eps) = max_A [mu(A) - nu(A^eps)]` is total mass minus a bipartite
//! max-flow. `F` only changes at cross distances between the supports, so
//! the infimum is found among finitely many breakpoints.
//!
//! `d_{M_O}(mu, nu) = int_0^inf e^-r p_r / (1 + p_r) dr`, where `p_r`
//! compares the restrictions to `S \ C^r`. Restrictions are constant between
//! consecutive atom cone distances, so the integral is a finite sum.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::maxflow::FlowNetwork;
use crate::measures::{restrict_unchecked, AtomicMeasure};

/// Largest combined atom count accepted by [`prohorov_bruteforce`].
pub const BRUTEFORCE_LIMIT: usize = 16;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProhorovResult {
    pub value: f64,
    /// Candidate `eps` values examined (sorted, deduplicated).
    pub witness_epsilon_breakpoints: Vec<f64>,
}

/// Cross distances `d(mu_i, nu_j)` plus the breakpoint grid `{0} u {d_ij}`.
fn cross_distances(mu: &AtomicMeasure, nu: &AtomicMeasure) -> (Vec<Vec<f64>>, Vec<f64>) {
    let space = mu.space();
    let dist: Vec<Vec<f64>> = mu
        .atoms()
        .iter()
        .map(|a| {
            nu.atoms()
                .iter()
                .map(|b| space.distance_raw(a.location.coords(), b.location.coords()))
                .collect()
        })
        .collect();
    let mut grid: Vec<f64> = dist.iter().flatten().copied().collect();
    grid.push(0.0);
    grid.sort_by(f64::total_cmp);
    grid.dedup();
    (dist, grid)
}

/// `max_A [src(A) - dst(A^eps)]` over subsets of the source support, via
/// max-flow. The maximizing set is read off the minimum cut and its value
/// recomputed as plain ascending-index sums.
fn deficiency_by_flow(
    src_w: &[f64],
    dst_w: &[f64],
    adjacent: impl Fn(usize, usize) -> bool,
) -> f64 {
    let (m, n) = (src_w.len(), dst_w.len());
    if m == 0 {
        return 0.0;
    }
    let scale = src_w.iter().chain(dst_w).fold(1.0f64, |a, &b| a.max(b));
    let (s, t) = (0, m + n + 1);
    let mut g = FlowNetwork::new(m + n + 2, 1e-12 * scale);
    for (i, &w) in src_w.iter().enumerate() {
        g.add_edge(s, 1 + i, w);
    }
    for (j, &w) in dst_w.iter().enumerate() {
        g.add_edge(1 + m + j, t, w);
    }
    for i in 0..m {
        for j in 0..n {
            if adjacent(i, j) {
                g.add_edge(1 + i, 1 + m + j, f64::INFINITY);
            }
        }
    }
    g.max_flow(s, t);
    let reach = g.reachable(s);
    let chosen: Vec<usize> = (0..m).filter(|&i| reach[1 + i]).collect();
    let mut mass_a = 0.0;
    for &i in &chosen {
        mass_a += src_w[i];
    }
    let mut mass_nb = 0.0;
    for j in 0..n {
        if chosen.iter().any(|&i| adjacent(i, j)) {
            mass_nb += dst_w[j];
        }
    }
    (mass_a - mass_nb).max(0.0)
}

/// Two-sided deficiency `max(F_mu_nu(eps), F_nu_mu(eps))`.
fn two_sided_deficiency(mu_w: &[f64], nu_w: &[f64], dist: &[Vec<f64>], eps: f64) -> f64 {
    let f_mn = deficiency_by_flow(mu_w, nu_w, |i, j| dist[i][j] <= eps);
    let f_nm = deficiency_by_flow(nu_w, mu_w, |j, i| dist[i][j] <= eps);
    f_mn.max(f_nm)
}

fn check_same_space(mu: &AtomicMeasure, nu: &AtomicMeasure) -> Result<()> {
    if mu.space() != nu.space() {
        return Err(Error::SpaceMismatch);
    }
    Ok(())
}

/// Exact Prohorov distance between two atomic measures.
///
/// `g(eps) = max(eps, F(eps))` is minimised over the breakpoint grid. Since
/// the grid is increasing and `F` is nonincreasing, the minimum sits where
/// `d_k >= F(d_k)` first holds, so a binary search needs `O(log K)` flows.
pub fn prohorov_distance(mu: &AtomicMeasure, nu: &AtomicMeasure) -> Result<ProhorovResult> {
    check_same_space(mu, nu)?;
    let (dist, grid) = cross_distances(mu, nu);
    let mu_w: Vec<f64> = mu.atoms().iter().map(|a| a.weight).collect();
    let nu_w: Vec<f64> = nu.atoms().iter().map(|a| a.weight).collect();
    let f_at = |k: usize| two_sided_deficiency(&mu_w, &nu_w, &dist, grid[k]);

    // first index with grid[k] >= F(grid[k])
    let (mut lo, mut hi) = (0usize, grid.len());
    let mut f_cache: Vec<Option<f64>> = vec![None; grid.len()];
    let mut f = |k: usize| *f_cache[k].get_or_insert_with(|| f_at(k));
    while lo < hi {
        let mid = (lo + hi) / 2;
        if grid[mid] >= f(mid) {
            hi = mid;
        } else {
            lo = mid + 1;
        }
    }
    let value = if lo == grid.len() {
        // even the largest breakpoint is infeasible: the last interval is unbounded
        f(grid.len() - 1)
    } else if lo == 0 {
        grid[0].max(f(0))
    } else {
        grid[lo].min(f(lo - 1))
    };
    Ok(ProhorovResult {
        value,
        witness_epsilon_breakpoints: grid,
    })
}

/// Independent oracle for [`prohorov_distance`] on small inputs.
///
/// Enumerates every subset of each support as the candidate closed set and
/// evaluates `max(eps, F(eps))` at every breakpoint, taking the minimum.
pub fn prohorov_bruteforce(mu: &AtomicMeasure, nu: &AtomicMeasure) -> Result<f64> {
    check_same_space(mu, nu)?;
    let total = mu.len() + nu.len();
    if total > BRUTEFORCE_LIMIT {
        return Err(Error::TooManyAtoms {
            got: total,
            limit: BRUTEFORCE_LIMIT,
        });
    }
    let (dist, grid) = cross_distances(mu, nu);
    let mu_w: Vec<f64> = mu.atoms().iter().map(|a| a.weight).collect();
    let nu_w: Vec<f64> = nu.atoms().iter().map(|a| a.weight).collect();
    let mut best = f64::INFINITY;
    for &eps in &grid {
        let f_mn = subset_deficiency(&mu_w, &nu_w, |i, j| dist[i][j] <= eps);
        let f_nm = subset_deficiency(&nu_w, &mu_w, |j, i| dist[i][j] <= eps);
        best = best.min(eps.max(f_mn.max(f_nm)));
    }
    Ok(best)
}

fn subset_deficiency(src_w: &[f64], dst_w: &[f64], adjacent: impl Fn(usize, usize) -> bool) -> f64 {
    let m = src_w.len();
    let mut best = 0.0f64;
    for mask in 1u32..(1u32 << m) {
        let mut mass_a = 0.0;
        for (i, w) in src_w.iter().enumerate() {
            if mask & (1 << i) != 0 {
                mass_a += w;
            }
        }
        let mut mass_nb = 0.0;
        for (j, w) in dst_w.iter().enumerate() {
            if (0..m).any(|i| mask & (1 << i) != 0 && adjacent(i, j)) {
                mass_nb += w;
            }
        }
        best = best.max(mass_a - mass_nb);
    }
    best
}

/// `d_{M_O}(mu, nu)`, evaluated segment by segment.
pub fn mo_distance(mu: &AtomicMeasure, nu: &AtomicMeasure) -> Result<f64> {
    check_same_space(mu, nu)?;
    let mut radii: Vec<f64> = mu.cone_distances();
    radii.extend(nu.cone_distances());
    radii.push(0.0);
    radii.sort_by(f64::total_cmp);
    radii.dedup();

    // on (r_j, r_{j+1}] the restrictions equal the ones at r_{j+1}
    let terms: Vec<f64> = radii
        .par_windows(2)
        .map(|w| {
            let (a, b) = (w[0], w[1]);
            let p = prohorov_distance(&restrict_unchecked(mu, b), &restrict_unchecked(nu, b))
                .expect("same space")
                .value;
            p / (1.0 + p) * ((-a).exp() - (-b).exp())
        })
        .collect();
    Ok(terms.iter().sum())
}

/// The integrand `r -> e^-r p_r / (1 + p_r)` at a single radius.
pub fn mo_integrand(mu: &AtomicMeasure, nu: &AtomicMeasure, r: f64) -> Result<f64> {
    check_same_space(mu, nu)?;
    if !(r > 0.0) {
        return Err(crate::error::invalid("radius must be positive"));
    }
    let p = prohorov_distance(&restrict_unchecked(mu, r), &restrict_unchecked(nu, r))?.value;
    Ok((-r).exp() * p / (1.0 + p))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cone_space::SpaceDescriptor;
    use crate::measures::Atom;

    fn line(atoms: &[(f64, f64)]) -> AtomicMeasure {
        AtomicMeasure::new(
            SpaceDescriptor::euclidean_origin(1).unwrap(),
            atoms.iter().map(|&(x, w)| Atom::new(vec![x], w)).collect(),
        )
        .unwrap()
    }

    #[test]
    fn prohorov_examples() {
        let d = |a: &[(f64, f64)], b: &[(f64, f64)]| {
            prohorov_distance(&line(a), &line(b)).unwrap().value
        };
        assert_eq!(d(&[(1.0, 1.0)], &[(1.0, 1.0)]), 0.0);
        assert_eq!(d(&[(1.0, 1.0)], &[(1.5, 1.0)]), 0.5);
        assert_eq!(d(&[(1.0, 2.0)], &[(1.0, 1.0)]), 1.0);
        assert_eq!(d(&[(1.0, 1.0)], &[(2.0, 1.0)]), 1.0);
        assert_eq!(d(&[], &[]), 0.0);
        assert_eq!(d(&[(1.0, 1.0)], &[]), 1.0);
        // no cap at 1 for heavier measures
        assert_eq!(d(&[(1.0, 3.0)], &[]), 3.0);
    }

    #[test]
    fn bruteforce_examples() {
        let b = |a: &[(f64, f64)], c: &[(f64, f64)]| prohorov_bruteforce(&line(a), &line(c)).unwrap();
        assert_eq!(b(&[(1.0, 1.0)], &[(2.0, 1.0)]), 1.0);
        assert_eq!(b(&[], &[]), 0.0);
        assert_eq!(b(&[(1.0, 1.0)], &[]), 1.0);
        assert_eq!(b(&[(1.0, 1.0)], &[(1.5, 1.0)]), 0.5);
        assert_eq!(b(&[(1.0, 2.0)], &[(1.0, 1.0)]), 1.0);
    }

    #[test]
    fn bruteforce_refuses_large_inputs() {
        let big: Vec<(f64, f64)> = (1..=9).map(|i| (i as f64, 1.0)).collect();
        let err = prohorov_bruteforce(&line(&big), &line(&big)).unwrap_err();
        assert!(matches!(err, Error::TooManyAtoms { got: 18, limit: 16 }));
    }

    #[test]
    fn space_mismatch() {
        let other = AtomicMeasure::empty(SpaceDescriptor::euclidean_origin(2).unwrap());
        assert!(matches!(
            prohorov_distance(&line(&[]), &other),
            Err(Error::SpaceMismatch)
        ));
        assert!(matches!(mo_distance(&line(&[]), &other), Err(Error::SpaceMismatch)));
    }

    #[test]
    fn mo_examples() {
        let m = line(&[(2.0, 1.0), (-0.5, 2.0)]);
        assert_eq!(mo_distance(&m, &m).unwrap(), 0.0);

        let v = mo_distance(&line(&[(2.0, 1.0)]), &line(&[])).unwrap();
        assert!((v - (1.0 - (-2f64).exp()) / 2.0).abs() < 1e-15);
        assert!((v - 0.43233).abs() < 5e-6);

        let v = mo_distance(&line(&[(1.0, 1.0)]), &line(&[(1.2, 1.0)])).unwrap();
        let expect = (1.0 - (-1f64).exp()) * (0.2 / 1.2) + ((-1f64).exp() - (-1.2f64).exp()) * 0.5;
        assert!((v - expect).abs() < 1e-12);
        assert!((v - 0.138696).abs() < 5e-6);
    }

    #[test]
    fn breakpoints_reported() {
        let r = prohorov_distance(&line(&[(1.0, 1.0), (3.0, 1.0)]), &line(&[(1.5, 1.0)])).unwrap();
        assert_eq!(r.witness_epsilon_breakpoints, vec![0.0, 0.5, 1.5]);
        assert_eq!(r.value, 1.0);
    }
}
