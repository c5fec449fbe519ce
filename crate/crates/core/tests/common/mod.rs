#![allow(dead_code)]

use mo_pointproc::cone_space::SpaceDescriptor;
use mo_pointproc::measures::{Atom, AtomicMeasure};
use mo_pointproc::mo_metric::prohorov_bruteforce;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub fn line() -> SpaceDescriptor {
    SpaceDescriptor::euclidean_origin(1).unwrap()
}

pub fn random_space(rng: &mut ChaCha8Rng) -> SpaceDescriptor {
    match rng.random_range(0..3) {
        0 => SpaceDescriptor::euclidean_origin(1).unwrap(),
        1 => SpaceDescriptor::euclidean_origin(2).unwrap(),
        _ => SpaceDescriptor::euclidean_axes(2).unwrap(),
    }
}

/// Up to `max_atoms` atoms on a coarse grid (so distances tie often), with
/// integer or real weights.
pub fn random_measure(
    rng: &mut ChaCha8Rng,
    space: SpaceDescriptor,
    max_atoms: usize,
    integer_weights: bool,
) -> AtomicMeasure {
    let n = rng.random_range(0..=max_atoms);
    let mut atoms = Vec::with_capacity(n);
    while atoms.len() < n {
        let x: Vec<f64> = (0..space.dim())
            .map(|_| rng.random_range(-8i32..=8) as f64 / 4.0)
            .collect();
        if space.cone_distance_raw(&x) == 0.0 {
            continue;
        }
        let w = if integer_weights {
            rng.random_range(1..=3) as f64
        } else {
            rng.random_range(0.05..2.5)
        };
        atoms.push(Atom::new(x, w));
    }
    AtomicMeasure::new(space, atoms).unwrap()
}

fn keep_from(m: &AtomicMeasure, r: f64) -> AtomicMeasure {
    let s = m.space();
    let atoms = m
        .atoms()
        .iter()
        .filter(|a| s.cone_distance_raw(a.location.coords()) >= r)
        .cloned()
        .collect();
    AtomicMeasure::new(s, atoms).unwrap()
}

/// Adaptive Simpson on `[a, b]`.
pub fn simpson<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64) -> f64 {
    fn rec<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, fa: f64, fm: f64, fb: f64, whole: f64, tol: f64, depth: u32) -> f64 {
        let m = 0.5 * (a + b);
        let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
        let (flm, frm) = (f(lm), f(rm));
        let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
        let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
        if depth == 0 || (left + right - whole).abs() <= 15.0 * tol {
            return left + right + (left + right - whole) / 15.0;
        }
        rec(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1)
            + rec(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1)
    }
    let (fa, fb, fm) = (f(a), f(b), f(0.5 * (a + b)));
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    rec(f, a, b, fa, fm, fb, whole, tol, 50)
}

/// `∫_0^∞ e^-r p_r / (1 + p_r) dr` by adaptive quadrature, with `p_r` from
/// the brute-force Prohorov distance of the restrictions to
/// `{d(x, C) >= r}`. `p_r` only changes at atom radii, so the quadrature is
/// run piece by piece and `p_r` is evaluated once inside each piece.
pub fn mo_quadrature(mu: &AtomicMeasure, nu: &AtomicMeasure) -> f64 {
    let mut radii: Vec<f64> = mu.cone_distances();
    radii.extend(nu.cone_distances());
    radii.push(0.0);
    radii.sort_by(f64::total_cmp);
    radii.dedup();
    let mut total = 0.0;
    for w in radii.windows(2) {
        let mid = 0.5 * (w[0] + w[1]);
        let p = prohorov_bruteforce(&keep_from(mu, mid), &keep_from(nu, mid)).unwrap();
        let g = |r: f64| (-r).exp() * p / (1.0 + p);
        total += simpson(&g, w[0], w[1], 1e-13);
    }
    total
}
