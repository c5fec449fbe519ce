//! Finite atomic measures and homogeneous limit measures.
//!
//! [`AtomicMeasure`] is the concrete stand-in for elements of `M_O`: a finite
//! list of weighted atoms away from the cone. [`HomogeneousMeasure`] is an
//! analytic limit measure with tail index `alpha` and a discrete angular
//! part, so its mass on every [`TailSet`] has a closed form.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::cone_space::{Point, SpaceDescriptor};
use crate::error::{invalid, Result};

/// Tolerance for matching a point's direction against a listed direction.
pub const DIRECTION_TOL: f64 = 1e-9;
/// Absolute tolerance of the integer-weight check.
pub const INTEGER_TOL: f64 = 1e-9;
/// Allowed deviation of `d(omega, C)` from 1 for angular atoms.
pub const UNIT_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Atom {
    #[serde(rename = "x")]
    pub location: Point,
    #[serde(rename = "w")]
    pub weight: f64,
}

impl Atom {
    pub fn new(location: impl Into<Point>, weight: f64) -> Self {
        Atom {
            location: location.into(),
            weight,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AtomicMeasure {
    space: SpaceDescriptor,
    atoms: Vec<Atom>,
}

#[derive(Deserialize)]
struct AtomicMeasureJson {
    space: SpaceDescriptor,
    atoms: Vec<Atom>,
}

impl<'de> Deserialize<'de> for AtomicMeasure {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let j = AtomicMeasureJson::deserialize(d)?;
        AtomicMeasure::new(j.space, j.atoms).map_err(serde::de::Error::custom)
    }
}

/// The diffuse part of a decomposition. Atomic measures never carry one.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NullDiffuse;

#[derive(Debug, Clone, PartialEq)]
pub struct Decomposition {
    pub atomic: AtomicMeasure,
    pub diffuse: NullDiffuse,
}

impl AtomicMeasure {
    /// Validates every atom: correct dimension, finite coordinates, positive
    /// finite weight, location off the cone.
    pub fn new(space: SpaceDescriptor, atoms: Vec<Atom>) -> Result<Self> {
        for a in &atoms {
            space.check_point(&a.location)?;
            if !(a.weight > 0.0) || !a.weight.is_finite() {
                return Err(invalid(format!("atom weight must be positive, got {}", a.weight)));
            }
            if space.cone_distance_raw(a.location.coords()) <= 0.0 {
                return Err(invalid("atom located on the cone"));
            }
        }
        Ok(AtomicMeasure { space, atoms })
    }

    pub fn empty(space: SpaceDescriptor) -> Self {
        AtomicMeasure {
            space,
            atoms: Vec::new(),
        }
    }

    /// Caller guarantees the invariants checked by [`AtomicMeasure::new`].
    pub(crate) fn from_trusted(space: SpaceDescriptor, atoms: Vec<Atom>) -> Self {
        AtomicMeasure { space, atoms }
    }

    pub fn space(&self) -> SpaceDescriptor {
        self.space
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn total_mass(&self) -> f64 {
        self.atoms.iter().map(|a| a.weight).sum()
    }

    pub fn cone_distances(&self) -> Vec<f64> {
        self.atoms
            .iter()
            .map(|a| self.space.cone_distance_raw(a.location.coords()))
            .collect()
    }

    /// Equal locations merged by summing weights; atoms keep the order of
    /// their first appearance.
    pub fn canonical(&self) -> AtomicMeasure {
        let n = self.atoms.len();
        let mut order: Vec<usize> = (0..n).collect();
        let loc = |i: usize| self.atoms[i].location.coords();
        order.sort_by(|&i, &j| lex_cmp(loc(i), loc(j)).then(i.cmp(&j)));

        // group representative (first index) for every atom
        let mut rep = vec![0usize; n];
        let mut k = 0;
        while k < n {
            let first = order[k];
            let mut e = k;
            while e < n && loc(order[e]) == loc(first) {
                rep[order[e]] = first;
                e += 1;
            }
            k = e;
        }
        let mut merged: Vec<Option<Atom>> = vec![None; n];
        for (i, a) in self.atoms.iter().enumerate() {
            match &mut merged[rep[i]] {
                Some(m) => m.weight += a.weight,
                slot => *slot = Some(a.clone()),
            }
        }
        AtomicMeasure {
            space: self.space,
            atoms: merged.into_iter().flatten().collect(),
        }
    }
}

fn lex_cmp(a: &[f64], b: &[f64]) -> Ordering {
    for (x, y) in a.iter().zip(b) {
        match x.total_cmp(y) {
            Ordering::Equal => continue,
            o => return o,
        }
    }
    a.len().cmp(&b.len())
}

/// Atomic/diffuse decomposition. The atomic part is the canonical form;
/// the diffuse part is always null for this representation.
pub fn decompose(m: &AtomicMeasure) -> Decomposition {
    Decomposition {
        atomic: m.canonical(),
        diffuse: NullDiffuse,
    }
}

/// True iff every canonical weight is a positive integer (within
/// [`INTEGER_TOL`]).
pub fn is_counting(m: &AtomicMeasure) -> bool {
    m.canonical()
        .atoms
        .iter()
        .all(|a| a.weight >= 1.0 - INTEGER_TOL && (a.weight - a.weight.round()).abs() <= INTEGER_TOL)
}

/// Restriction to `S \ C^r`, i.e. atoms with cone distance `>= r`.
pub fn restrict(m: &AtomicMeasure, r: f64) -> Result<AtomicMeasure> {
    if !(r > 0.0) {
        return Err(invalid(format!("restriction radius must be positive, got {r}")));
    }
    Ok(restrict_unchecked(m, r))
}

pub(crate) fn restrict_unchecked(m: &AtomicMeasure, r: f64) -> AtomicMeasure {
    let atoms = m
        .atoms
        .iter()
        .filter(|a| m.space.cone_distance_raw(a.location.coords()) >= r)
        .cloned()
        .collect();
    AtomicMeasure {
        space: m.space,
        atoms,
    }
}

/// One atom of an angular measure: a direction on the unit cone-sphere.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AngularAtom {
    pub omega: Point,
    pub w: f64,
}

/// `mu(cone_distance > u, direction = omega_k) = w_k u^-alpha`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HomogeneousMeasure {
    space: SpaceDescriptor,
    alpha: f64,
    angular: Vec<AngularAtom>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct HomogeneousJson {
    #[serde(default)]
    space: Option<SpaceDescriptor>,
    alpha: f64,
    angular: Vec<AngularAtom>,
}

impl<'de> Deserialize<'de> for HomogeneousMeasure {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let j = HomogeneousJson::deserialize(d)?;
        let space = match j.space {
            Some(s) => s,
            None => {
                let dim = j.angular.first().map_or(1, |a| a.omega.len());
                SpaceDescriptor::euclidean_origin(dim).map_err(serde::de::Error::custom)?
            }
        };
        HomogeneousMeasure::new(space, j.alpha, j.angular).map_err(serde::de::Error::custom)
    }
}

impl HomogeneousMeasure {
    /// `space` must be a base space (no time axis); time enters through
    /// tail-set windows.
    pub fn new(space: SpaceDescriptor, alpha: f64, angular: Vec<AngularAtom>) -> Result<Self> {
        if space.has_time() {
            return Err(invalid("homogeneous measures live on the base space"));
        }
        if !(alpha > 0.0) || !alpha.is_finite() {
            return Err(invalid(format!("tail index must be positive, got {alpha}")));
        }
        if angular.is_empty() {
            return Err(invalid("angular measure needs at least one atom"));
        }
        for a in &angular {
            space.check_point(&a.omega)?;
            if !(a.w > 0.0) || !a.w.is_finite() {
                return Err(invalid("angular weights must be positive"));
            }
            let r = space.cone_distance_raw(a.omega.coords());
            if (r - 1.0).abs() > UNIT_TOL {
                return Err(invalid(format!("angular direction has cone distance {r}, not 1")));
            }
        }
        Ok(HomogeneousMeasure {
            space,
            alpha,
            angular,
        })
    }

    /// The one-dimensional measure with `mu(|x| > u) = total * u^-alpha`,
    /// all mass on the positive half-line.
    pub fn one_sided(alpha: f64, total: f64) -> Result<Self> {
        let s = SpaceDescriptor::euclidean_origin(1)?;
        Self::new(s, alpha, vec![AngularAtom { omega: Point::new(vec![1.0]), w: total }])
    }

    pub fn space(&self) -> SpaceDescriptor {
        self.space
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn angular(&self) -> &[AngularAtom] {
        &self.angular
    }

    pub fn total_angular(&self) -> f64 {
        self.angular.iter().map(|a| a.w).sum()
    }
}

/// Which directions a [`TailSet`] admits.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Directions {
    #[default]
    All,
    Only(Vec<Point>),
}

/// `{x : u_lo < d(x, C) <= u_hi, direction admitted, t1 < t <= t2}`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TailSet {
    pub u_lo: f64,
    pub u_hi: Option<f64>,
    #[serde(skip_serializing_if = "is_all")]
    pub directions: Directions,
    #[serde(rename = "time", skip_serializing_if = "Option::is_none")]
    pub time_window: Option<(f64, f64)>,
}

fn is_all(d: &Directions) -> bool {
    matches!(d, Directions::All)
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct TailSetJson {
    u_lo: f64,
    #[serde(default)]
    u_hi: Option<f64>,
    #[serde(default)]
    directions: Option<Vec<Point>>,
    #[serde(default)]
    time: Option<(f64, f64)>,
}

impl<'de> Deserialize<'de> for TailSet {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let j = TailSetJson::deserialize(d)?;
        let mut a = TailSet::band(j.u_lo, j.u_hi).map_err(serde::de::Error::custom)?;
        if let Some(dirs) = j.directions {
            a = a.with_directions(dirs);
        }
        if let Some((t1, t2)) = j.time {
            a = a.with_time_window(t1, t2).map_err(serde::de::Error::custom)?;
        }
        Ok(a)
    }
}

impl TailSet {
    /// `{d(x, C) > u_lo}`.
    pub fn above(u_lo: f64) -> Result<Self> {
        Self::band(u_lo, None)
    }

    /// `{u_lo < d(x, C) <= u_hi}`; `None` means no upper bound.
    pub fn band(u_lo: f64, u_hi: Option<f64>) -> Result<Self> {
        if !(u_lo > 0.0) || !u_lo.is_finite() {
            return Err(invalid(format!("tail sets need 0 < u_lo < inf, got {u_lo}")));
        }
        let u_hi = match u_hi {
            Some(h) if h.is_infinite() && h > 0.0 => None,
            Some(h) if !(h > u_lo) => {
                return Err(invalid(format!("need u_lo < u_hi, got {u_lo} and {h}")))
            }
            other => other,
        };
        Ok(TailSet {
            u_lo,
            u_hi,
            directions: Directions::All,
            time_window: None,
        })
    }

    pub fn with_directions(mut self, dirs: Vec<Point>) -> Self {
        self.directions = Directions::Only(dirs);
        self
    }

    /// Half-open window `(t1, t2]`.
    pub fn with_time_window(mut self, t1: f64, t2: f64) -> Result<Self> {
        if !(t1 < t2) || !t1.is_finite() || !t2.is_finite() {
            return Err(invalid(format!("need t1 < t2, got {t1} and {t2}")));
        }
        self.time_window = Some((t1, t2));
        Ok(self)
    }

    /// `lambda A`: the radial band scaled by `lambda`.
    pub fn scaled(&self, lambda: f64) -> Result<Self> {
        if !(lambda > 0.0) {
            return Err(invalid("scale factor must be positive"));
        }
        Ok(TailSet {
            u_lo: self.u_lo * lambda,
            u_hi: self.u_hi.map(|h| h * lambda),
            ..self.clone()
        })
    }

    pub fn upper(&self) -> f64 {
        self.u_hi.unwrap_or(f64::INFINITY)
    }

    pub(crate) fn admits_direction(&self, omega: &[f64]) -> bool {
        match &self.directions {
            Directions::All => true,
            Directions::Only(list) => list.iter().any(|d| {
                d.len() == omega.len()
                    && d.coords()
                        .iter()
                        .zip(omega)
                        .all(|(a, b)| (a - b).abs() <= DIRECTION_TOL)
            }),
        }
    }

    /// Membership of raw coordinates of a point of `space`.
    pub fn contains_raw(&self, space: &SpaceDescriptor, coords: &[f64]) -> bool {
        let r = space.cone_distance_raw(coords);
        if !(r > self.u_lo && r <= self.upper()) {
            return false;
        }
        if let Some((t1, t2)) = self.time_window {
            match space.split(coords).0 {
                Some(t) if t > t1 && t <= t2 => {}
                _ => return false,
            }
        }
        match &self.directions {
            Directions::All => true,
            Directions::Only(_) => space
                .direction_raw(coords)
                .is_some_and(|omega| self.admits_direction(&omega)),
        }
    }

    pub fn contains(&self, space: &SpaceDescriptor, x: &Point) -> Result<bool> {
        space.check_point(x)?;
        if self.time_window.is_some() && !space.has_time() {
            return Err(invalid("time window on a space without a time axis"));
        }
        Ok(self.contains_raw(space, x.coords()))
    }

    /// True iff the two sets cannot share a point.
    pub fn disjoint_from(&self, other: &TailSet) -> bool {
        let radial = self.u_lo.max(other.u_lo) >= self.upper().min(other.upper());
        let time = match (self.time_window, other.time_window) {
            (Some((a1, a2)), Some((b1, b2))) => a1.max(b1) >= a2.min(b2),
            _ => false,
        };
        let dirs = match (&self.directions, &other.directions) {
            (Directions::Only(a), Directions::Only(_)) => {
                a.iter().all(|d| !other.admits_direction(d.coords()))
            }
            _ => false,
        };
        radial || time || dirs
    }

    fn time_factor(&self) -> f64 {
        self.time_window.map_or(1.0, |(t1, t2)| t2 - t1)
    }
}

/// Exact `mu(A)` (times the window length when `A` has a time window,
/// i.e. the mass under `dt x dmu`).
pub fn tail_mass(h: &HomogeneousMeasure, a: &TailSet) -> f64 {
    let radial = a.u_lo.powf(-h.alpha)
        - match a.u_hi {
            Some(hi) => hi.powf(-h.alpha),
            None => 0.0,
        };
    let w: f64 = h
        .angular
        .iter()
        .filter(|k| a.admits_direction(k.omega.coords()))
        .map(|k| k.w)
        .sum();
    w * radial * a.time_factor()
}

/// `m(A)`: total weight of atoms inside `A`.
pub fn atomic_mass(m: &AtomicMeasure, a: &TailSet) -> Result<f64> {
    if a.time_window.is_some() && !m.space.has_time() {
        return Err(invalid("time window on a space without a time axis"));
    }
    Ok(m.atoms
        .iter()
        .filter(|at| a.contains_raw(&m.space, at.location.coords()))
        .map(|at| at.weight)
        .sum())
}

/// Count of atoms of a counting measure inside `A`.
#[cfg(test)]
pub(crate) fn count_in(m: &AtomicMeasure, a: &TailSet) -> u64 {
    m.atoms
        .iter()
        .filter(|at| a.contains_raw(&m.space, at.location.coords()))
        .count() as u64
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn line() -> SpaceDescriptor {
        SpaceDescriptor::euclidean_origin(1).unwrap()
    }

    fn m(atoms: &[(f64, f64)]) -> AtomicMeasure {
        AtomicMeasure::new(line(), atoms.iter().map(|&(x, w)| Atom::new(vec![x], w)).collect())
            .unwrap()
    }

    #[test]
    fn decompose_merges_equal_locations() {
        let d = decompose(&m(&[(1.0, 1.0), (1.0, 2.0), (2.0, 1.0)]));
        assert_eq!(d.atomic, m(&[(1.0, 3.0), (2.0, 1.0)]));
        assert_eq!(d.diffuse, NullDiffuse);
        assert!(decompose(&m(&[])).atomic.is_empty());
        assert_eq!(decompose(&m(&[(1.0, 0.5)])).atomic, m(&[(1.0, 0.5)]));
    }

    #[test]
    fn decompose_keeps_first_appearance_order() {
        let d = decompose(&m(&[(3.0, 1.0), (-1.0, 1.0), (3.0, 1.0)]));
        assert_eq!(d.atomic, m(&[(3.0, 2.0), (-1.0, 1.0)]));
    }

    #[test]
    fn counting_check() {
        assert!(is_counting(&m(&[(1.0, 3.0), (2.0, 1.0)])));
        assert!(!is_counting(&m(&[(1.0, 1.5)])));
        assert!(is_counting(&m(&[])));
        // two halves merge into an integer
        assert!(is_counting(&m(&[(1.0, 0.5), (1.0, 0.5)])));
    }

    #[test]
    fn invalid_atoms_rejected() {
        assert!(AtomicMeasure::new(line(), vec![Atom::new(vec![0.0], 1.0)]).is_err());
        assert!(AtomicMeasure::new(line(), vec![Atom::new(vec![1.0], 0.0)]).is_err());
        assert!(AtomicMeasure::new(line(), vec![Atom::new(vec![1.0, 2.0], 1.0)]).is_err());
    }

    #[test]
    fn restrict_examples() {
        let x = m(&[(0.5, 1.0), (-1.5, 1.0)]);
        assert_eq!(restrict(&x, 1.0).unwrap(), m(&[(-1.5, 1.0)]));
        assert_eq!(restrict(&x, 0.1).unwrap(), x);
        assert!(restrict(&x, 2.0).unwrap().is_empty());
        assert!(restrict(&x, 0.0).is_err());
        // S \ C^r is closed: the boundary atom stays
        assert_eq!(restrict(&x, 1.5).unwrap(), m(&[(-1.5, 1.0)]));
    }

    #[test]
    fn tail_mass_examples() {
        let h = HomogeneousMeasure::one_sided(1.0, 1.0).unwrap();
        assert_eq!(tail_mass(&h, &TailSet::above(2.0).unwrap()), 0.5);
        let h2 = HomogeneousMeasure::one_sided(2.0, 1.0).unwrap();
        let a = TailSet::above(1.0).unwrap();
        assert_eq!(tail_mass(&h2, &a), 1.0);
        assert_eq!(tail_mass(&h2, &a.scaled(2.0).unwrap()), 0.25);
        let mut prev = f64::INFINITY;
        for eps in [1e-1, 1e-3, 1e-6, 1e-9] {
            let b = TailSet::band(2.0 - eps, Some(2.0)).unwrap();
            let v = tail_mass(&h, &b);
            assert!(v < prev && v >= 0.0);
            prev = v;
        }
        assert!(prev < 1e-9);
    }

    #[test]
    fn tail_mass_with_directions_and_time() {
        let s = SpaceDescriptor::euclidean_origin(1).unwrap();
        let h = HomogeneousMeasure::new(
            s,
            1.0,
            vec![
                AngularAtom { omega: Point::new(vec![1.0]), w: 0.75 },
                AngularAtom { omega: Point::new(vec![-1.0]), w: 0.25 },
            ],
        )
        .unwrap();
        let a = TailSet::above(2.0).unwrap().with_directions(vec![Point::new(vec![-1.0])]);
        assert_eq!(tail_mass(&h, &a), 0.125);
        let b = TailSet::above(2.0).unwrap().with_time_window(0.0, 0.5).unwrap();
        assert_eq!(tail_mass(&h, &b), 0.25);
    }

    #[test]
    fn atomic_mass_examples() {
        let a = TailSet::above(1.0).unwrap();
        assert_eq!(atomic_mass(&m(&[(3.0, 1.0)]), &a).unwrap(), 1.0);
        assert_eq!(atomic_mass(&m(&[]), &a).unwrap(), 0.0);
        assert_eq!(atomic_mass(&m(&[(3.0, 1.0), (-2.0, 2.0)]), &a).unwrap(), 3.0);
        let timed = a.clone().with_time_window(0.0, 1.0).unwrap();
        assert!(atomic_mass(&m(&[(3.0, 1.0)]), &timed).is_err());
    }

    #[test]
    fn direction_filter_on_atoms() {
        let s = SpaceDescriptor::euclidean_origin(2).unwrap();
        let x = AtomicMeasure::new(
            s,
            vec![Atom::new(vec![3.0, 0.0], 1.0), Atom::new(vec![0.0, 3.0], 1.0)],
        )
        .unwrap();
        let a = TailSet::above(1.0).unwrap().with_directions(vec![Point::new(vec![1.0, 0.0])]);
        assert_eq!(atomic_mass(&x, &a).unwrap(), 1.0);
    }

    #[test]
    fn disjointness() {
        let a = TailSet::band(1.0, Some(2.0)).unwrap();
        let b = TailSet::above(2.0).unwrap();
        assert!(a.disjoint_from(&b));
        assert!(!a.disjoint_from(&TailSet::above(1.5).unwrap()));
        let t1 = b.clone().with_time_window(0.0, 0.5).unwrap();
        let t2 = b.clone().with_time_window(0.5, 1.0).unwrap();
        assert!(t1.disjoint_from(&t2));
    }

    #[test]
    fn json_shapes() {
        let x: AtomicMeasure = serde_json::from_str(
            r#"{"space":{"kind":"euclidean-origin","dim":1},"atoms":[{"x":[2.0],"w":1.0}]}"#,
        )
        .unwrap();
        assert_eq!(x, m(&[(2.0, 1.0)]));
        let bad = r#"{"space":{"kind":"euclidean-origin","dim":1},"atoms":[{"x":[0.0],"w":1.0}]}"#;
        assert!(serde_json::from_str::<AtomicMeasure>(bad).is_err());
        let h: HomogeneousMeasure =
            serde_json::from_str(r#"{"alpha":1.0,"angular":[{"omega":[1.0],"w":1.0}]}"#).unwrap();
        assert_eq!(h, HomogeneousMeasure::one_sided(1.0, 1.0).unwrap());
        let a: TailSet = serde_json::from_str(r#"{"u_lo":1.0,"u_hi":null,"time":[0,1]}"#).unwrap();
        assert_eq!(a, TailSet::above(1.0).unwrap().with_time_window(0.0, 1.0).unwrap());
    }

    fn measures() -> impl Strategy<Value = AtomicMeasure> {
        // small grid of locations so that duplicates occur
        prop::collection::vec(((-4i32..=4).prop_filter("off cone", |v| *v != 0), 1u32..4), 0..12)
            .prop_map(|v| m(&v.into_iter().map(|(x, w)| (x as f64 * 0.5, w as f64 * 0.5)).collect::<Vec<_>>()))
    }

    proptest! {
        #[test]
        fn decompose_idempotent(x in measures()) {
            let once = decompose(&x).atomic;
            prop_assert_eq!(decompose(&once).atomic, once);
        }

        #[test]
        fn restrict_composes(x in measures(), r in 0.01f64..3.0, s in 0.01f64..3.0) {
            let lhs = restrict(&restrict(&x, r).unwrap(), s).unwrap();
            prop_assert_eq!(lhs, restrict(&x, r.max(s)).unwrap());
        }

        #[test]
        fn atomic_mass_additive(x in measures(), a in 0.1f64..1.0, b in 1.0f64..2.0) {
            let lo = TailSet::band(a, Some(b)).unwrap();
            let hi = TailSet::above(b).unwrap();
            let all = TailSet::above(a).unwrap();
            // weights are multiples of 0.5, so sums are exact
            prop_assert_eq!(
                atomic_mass(&x, &lo).unwrap() + atomic_mass(&x, &hi).unwrap(),
                atomic_mass(&x, &all).unwrap()
            );
        }

        #[test]
        fn tail_mass_homogeneous(alpha in 0.2f64..4.0, lo in 0.1f64..5.0, span in prop::option::of(0.1f64..5.0), lambda in 0.1f64..10.0) {
            let h = HomogeneousMeasure::one_sided(alpha, 1.3).unwrap();
            let a = TailSet::band(lo, span.map(|s| lo + s)).unwrap();
            let lhs = tail_mass(&h, &a.scaled(lambda).unwrap());
            let rhs = lambda.powf(-alpha) * tail_mass(&h, &a);
            prop_assert!((lhs - rhs).abs() <= 1e-10 * rhs.abs());
        }
    }
}
