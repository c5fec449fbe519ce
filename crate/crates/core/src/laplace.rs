//! Test functions vanishing near the cone and Laplace functionals
//! `L_N[f] = E exp(-∫ f dN)`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cone_space::{Point, SpaceDescriptor};
use crate::error::{invalid, Error, Result};
use crate::measures::{tail_mass, AtomicMeasure, HomogeneousMeasure, TailSet};
use crate::quad;
use crate::stats::mean_and_se;

/// Absolute tolerance on the Laplace exponent for the quadrature path.
pub const QUAD_TOL: f64 = 1e-9;

/// One term `c 1_A` of a step function.
#[derive(Debug, Clone, PartialEq)]
pub struct StepPiece {
    pub set: TailSet,
    pub c: f64,
}

/// Bounded nonnegative function vanishing on `C^r` for some `r > 0`.
#[derive(Debug, Clone, PartialEq)]
pub enum TestFunction {
    /// `sum c_i 1_{A_i}` over pairwise disjoint tail sets.
    Step(Vec<StepPiece>),
    /// `c clamp((d(x, C) - r) / w, 0, 1)`, optionally restricted to a time
    /// window `(t1, t2]`.
    Ramp {
        c: f64,
        r: f64,
        w: f64,
        time: Option<(f64, f64)>,
    },
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PieceJson {
    u_lo: f64,
    #[serde(default)]
    u_hi: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    directions: Option<Vec<Point>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    time: Option<(f64, f64)>,
    c: f64,
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "form", rename_all = "lowercase")]
enum TestFunctionJson {
    Step {
        pieces: Vec<PieceJson>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        time: Option<(f64, f64)>,
    },
    Ramp {
        c: f64,
        r: f64,
        w: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        time: Option<(f64, f64)>,
    },
}

impl TryFrom<TestFunctionJson> for TestFunction {
    type Error = Error;

    fn try_from(j: TestFunctionJson) -> Result<Self> {
        match j {
            TestFunctionJson::Step { pieces, time } => {
                let pieces = pieces
                    .into_iter()
                    .map(|p| {
                        let mut set = TailSet::band(p.u_lo, p.u_hi)?;
                        if let Some(d) = p.directions {
                            set = set.with_directions(d);
                        }
                        if let Some((t1, t2)) = p.time.or(time) {
                            set = set.with_time_window(t1, t2)?;
                        }
                        Ok(StepPiece { set, c: p.c })
                    })
                    .collect::<Result<Vec<_>>>()?;
                TestFunction::step(pieces)
            }
            TestFunctionJson::Ramp { c, r, w, time } => TestFunction::ramp(c, r, w, time),
        }
    }
}

impl From<&TestFunction> for TestFunctionJson {
    fn from(f: &TestFunction) -> Self {
        match f {
            TestFunction::Step(pieces) => TestFunctionJson::Step {
                pieces: pieces
                    .iter()
                    .map(|p| PieceJson {
                        u_lo: p.set.u_lo,
                        u_hi: p.set.u_hi,
                        directions: match &p.set.directions {
                            crate::measures::Directions::All => None,
                            crate::measures::Directions::Only(d) => Some(d.clone()),
                        },
                        time: p.set.time_window,
                        c: p.c,
                    })
                    .collect(),
                time: None,
            },
            &TestFunction::Ramp { c, r, w, time } => TestFunctionJson::Ramp { c, r, w, time },
        }
    }
}

impl Serialize for TestFunction {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        TestFunctionJson::from(self).serialize(s)
    }
}

impl<'de> Deserialize<'de> for TestFunction {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        TestFunctionJson::deserialize(d)?
            .try_into()
            .map_err(serde::de::Error::custom)
    }
}

fn check_window(w: Option<(f64, f64)>) -> Result<()> {
    match w {
        Some((t1, t2)) if !(t1 < t2) || !t1.is_finite() || !t2.is_finite() => {
            Err(invalid(format!("need t1 < t2, got {t1} and {t2}")))
        }
        _ => Ok(()),
    }
}

fn in_window(w: Option<(f64, f64)>, t: Option<f64>) -> bool {
    match (w, t) {
        (None, _) => true,
        (Some((t1, t2)), Some(t)) => t > t1 && t <= t2,
        (Some(_), None) => false,
    }
}

impl TestFunction {
    /// The zero function.
    pub fn zero() -> Self {
        TestFunction::Step(Vec::new())
    }

    /// Step function; rejects overlapping sets and negative or NaN heights.
    /// Heights may be `+inf`.
    pub fn step(pieces: Vec<StepPiece>) -> Result<Self> {
        for (i, p) in pieces.iter().enumerate() {
            if !(p.c >= 0.0) {
                return Err(invalid(format!("step heights must be nonnegative, got {}", p.c)));
            }
            if let Some(q) = pieces[..i].iter().find(|q| !q.set.disjoint_from(&p.set)) {
                return Err(invalid(format!(
                    "step sets must be disjoint: {:?} overlaps {:?}",
                    q.set, p.set
                )));
            }
        }
        Ok(TestFunction::Step(pieces))
    }

    /// `c 1_{d(x, C) > u}`.
    pub fn indicator_above(u: f64, c: f64) -> Result<Self> {
        Self::step(vec![StepPiece {
            set: TailSet::above(u)?,
            c,
        }])
    }

    pub fn ramp(c: f64, r: f64, w: f64, time: Option<(f64, f64)>) -> Result<Self> {
        if !(c >= 0.0) || !c.is_finite() {
            return Err(invalid(format!("ramp height must be finite and nonnegative, got {c}")));
        }
        if !(r > 0.0) || !r.is_finite() || !(w > 0.0) || !w.is_finite() {
            return Err(invalid(format!("ramp needs r > 0 and w > 0, got r={r}, w={w}")));
        }
        check_window(time)?;
        Ok(TestFunction::Ramp { c, r, w, time })
    }

    /// `k f` for `k >= 0`.
    pub fn times(&self, k: f64) -> Result<Self> {
        if !(k >= 0.0) || !k.is_finite() {
            return Err(invalid(format!("scalar must be finite and nonnegative, got {k}")));
        }
        Ok(match self {
            TestFunction::Step(p) => TestFunction::Step(
                p.iter()
                    .map(|p| StepPiece {
                        set: p.set.clone(),
                        c: if k == 0.0 { 0.0 } else { p.c * k },
                    })
                    .collect(),
            ),
            &TestFunction::Ramp { c, r, w, time } => TestFunction::Ramp { c: c * k, r, w, time },
        })
    }

    /// Largest `r` with `f = 0` on `{d(x, C) <= r}`; `+inf` for the zero
    /// function.
    pub fn vanish_radius(&self) -> f64 {
        match self {
            TestFunction::Step(p) => p.iter().map(|p| p.set.u_lo).fold(f64::INFINITY, f64::min),
            TestFunction::Ramp { r, .. } => *r,
        }
    }

    /// `sup f`.
    pub fn bound(&self) -> f64 {
        match self {
            TestFunction::Step(p) => p.iter().map(|p| p.c).fold(0.0, f64::max),
            TestFunction::Ramp { c, .. } => *c,
        }
    }

    fn uses_time(&self) -> bool {
        match self {
            TestFunction::Step(p) => p.iter().any(|p| p.set.time_window.is_some()),
            TestFunction::Ramp { time, .. } => time.is_some(),
        }
    }

    fn check_space(&self, space: &SpaceDescriptor) -> Result<()> {
        if self.uses_time() && !space.has_time() {
            return Err(invalid("time window on a space without a time axis"));
        }
        Ok(())
    }

    pub(crate) fn eval_raw(&self, space: &SpaceDescriptor, coords: &[f64]) -> f64 {
        match self {
            TestFunction::Step(pieces) => pieces
                .iter()
                .find(|p| p.set.contains_raw(space, coords))
                .map_or(0.0, |p| p.c),
            &TestFunction::Ramp { c, r, w, time } => {
                if !in_window(time, space.split(coords).0) {
                    return 0.0;
                }
                let d = space.cone_distance_raw(coords);
                c * ((d - r) / w).clamp(0.0, 1.0)
            }
        }
    }

    pub fn eval(&self, space: &SpaceDescriptor, x: &Point) -> Result<f64> {
        space.check_point(x)?;
        self.check_space(space)?;
        Ok(self.eval_raw(space, x.coords()))
    }

    fn time_breaks(&self) -> Vec<f64> {
        let mut b = Vec::new();
        let mut push = |w: Option<(f64, f64)>| {
            if let Some((t1, t2)) = w {
                b.push(t1);
                b.push(t2);
            }
        };
        match self {
            TestFunction::Step(p) => p.iter().for_each(|p| push(p.set.time_window)),
            TestFunction::Ramp { time, .. } => push(*time),
        }
        b
    }

    fn radial_breaks(&self) -> Vec<f64> {
        match self {
            TestFunction::Step(p) => p
                .iter()
                .flat_map(|p| [Some(p.set.u_lo), p.set.u_hi])
                .flatten()
                .collect(),
            TestFunction::Ramp { r, w, .. } => vec![*r, r + w],
        }
    }
}

/// `∫ f dn = sum w_i f(x_i)`.
pub fn integrate_against(n: &AtomicMeasure, f: &TestFunction) -> Result<f64> {
    let space = n.space();
    f.check_space(&space)?;
    Ok(n.atoms()
        .iter()
        .map(|a| a.weight * f.eval_raw(&space, a.location.coords()))
        .sum())
}

/// Mean measure of a PRM: `mu`, or `dt x mu` on `[0, T] x S` when a
/// horizon is given.
#[derive(Debug, Clone, PartialEq)]
pub struct PrmMean {
    pub measure: HomogeneousMeasure,
    pub horizon: Option<f64>,
}

impl PrmMean {
    pub fn new(measure: HomogeneousMeasure, horizon: Option<f64>) -> Result<Self> {
        if let Some(t) = horizon {
            if !(t > 0.0) || !t.is_finite() {
                return Err(invalid(format!("time horizon must be positive, got {t}")));
            }
        }
        Ok(PrmMean { measure, horizon })
    }

    pub fn space(&self) -> SpaceDescriptor {
        let s = self.measure.space();
        match self.horizon {
            Some(_) => s.make_product_space().expect("base space"),
            None => s,
        }
    }

    /// Mean mass of `A`, with time windows clipped to `[0, T]`.
    pub fn mass(&self, a: &TailSet) -> Result<f64> {
        match (self.horizon, a.time_window) {
            (None, Some(_)) => Err(invalid("time window on a space without a time axis")),
            (None, None) => Ok(tail_mass(&self.measure, a)),
            (Some(t), None) => Ok(t * tail_mass(&self.measure, a)),
            (Some(t), Some((t1, t2))) => {
                let (lo, hi) = (t1.max(0.0), t2.min(t));
                if lo >= hi {
                    return Ok(0.0);
                }
                let mut clipped = a.clone();
                clipped.time_window = Some((lo, hi));
                Ok(tail_mass(&self.measure, &clipped))
            }
        }
    }
}

/// `∫ (1 - e^{-f}) d mean` in closed form; step functions only.
pub fn laplace_exponent_closed(mean: &PrmMean, f: &TestFunction) -> Result<f64> {
    let TestFunction::Step(pieces) = f else {
        return Err(Error::Unsupported("closed form needs a step function".into()));
    };
    f.check_space(&mean.space())?;
    pieces
        .iter()
        .map(|p| Ok(-(-p.c).exp_m1() * mean.mass(&p.set)?))
        .sum()
}

/// `∫ (1 - e^{-f}) d mean` by adaptive quadrature. Along each angular atom
/// the radial integral is taken in `v = s^-alpha`, which maps the mean
/// measure to Lebesgue measure on `(0, r^-alpha]`.
pub fn laplace_exponent_quadrature(mean: &PrmMean, f: &TestFunction) -> Result<f64> {
    let space = mean.space();
    f.check_space(&space)?;
    let r = f.vanish_radius();
    if !r.is_finite() {
        return Ok(0.0);
    }
    let alpha = mean.measure.alpha();
    let v_max = r.powf(-alpha);
    let v_breaks: Vec<f64> = f.radial_breaks().iter().map(|s| s.powf(-alpha)).collect();

    // time cells on which f does not depend on t
    let cells: Vec<(Option<f64>, f64)> = match mean.horizon {
        None => vec![(None, 1.0)],
        Some(t) => {
            let mut b: Vec<f64> = f
                .time_breaks()
                .into_iter()
                .filter(|&x| x > 0.0 && x < t)
                .collect();
            b.push(0.0);
            b.push(t);
            b.sort_by(f64::total_cmp);
            b.dedup();
            b.windows(2)
                .map(|w| (Some(0.5 * (w[0] + w[1])), w[1] - w[0]))
                .collect()
        }
    };

    let atoms = mean.measure.angular();
    let tol = QUAD_TOL / (10.0 * (atoms.len() * cells.len()) as f64);
    let mut total = 0.0;
    for atom in atoms {
        let omega = atom.omega.coords();
        for &(t, len) in &cells {
            let mut coords: Vec<f64> = t.into_iter().chain(omega.iter().copied()).collect();
            let off = usize::from(t.is_some());
            let g = |v: f64| {
                let s = v.powf(-1.0 / alpha);
                for (c, w) in coords[off..].iter_mut().zip(omega) {
                    *c = s * w;
                }
                -(-f.eval_raw(&space, &coords)).exp_m1()
            };
            total += atom.w * len * quad::integrate_pieces(g, 0.0, v_max, &v_breaks, tol);
        }
    }
    Ok(total)
}

/// `L[f] = exp(-∫ (1 - e^{-f}) d mean)`: closed form for step functions,
/// quadrature for ramps.
pub fn analytic_prm_laplace(mean: &PrmMean, f: &TestFunction) -> Result<f64> {
    let e = match f {
        TestFunction::Step(_) => laplace_exponent_closed(mean, f)?,
        TestFunction::Ramp { .. } => laplace_exponent_quadrature(mean, f)?,
    };
    Ok((-e).exp())
}

fn laplace_values(samples: &[AtomicMeasure], f: &TestFunction) -> Result<Vec<f64>> {
    samples
        .par_iter()
        .map(|n| integrate_against(n, f).map(|v| (-v).exp()))
        .collect()
}

/// Mean and standard error of `exp(-∫ f dN_i)` over the samples.
pub fn empirical_laplace(samples: &[AtomicMeasure], f: &TestFunction) -> Result<(f64, f64)> {
    if samples.len() < 2 {
        return Err(Error::InsufficientData(format!(
            "need at least 2 samples, got {}",
            samples.len()
        )));
    }
    Ok(mean_and_se(&laplace_values(samples, f)?))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ContinuityReport {
    pub limit_estimate: f64,
    pub limit_std_error: f64,
    /// `|L_hat[f_n] - L_hat[f]|` for each `n`.
    pub gaps: Vec<f64>,
    /// Standard errors of the paired differences.
    pub gap_std_errors: Vec<f64>,
    /// `max |f_n - f|` over the sample atoms.
    pub sup_gaps: Vec<f64>,
    /// Gaps nonincreasing up to `3 sqrt(se_n^2 + se_{n+1}^2)`.
    pub monotone: bool,
    /// All functions vanish below the same radius.
    pub common_vanish_radius: Option<f64>,
}

/// Compares empirical Laplace functionals along `f_n` with the limit `f`,
/// using paired differences over the same samples.
pub fn laplace_continuity_check(
    samples: &[AtomicMeasure],
    f_sequence: &[TestFunction],
    f_limit: &TestFunction,
) -> Result<ContinuityReport> {
    let limit = laplace_values(samples, f_limit)?;
    let (limit_estimate, limit_std_error) = empirical_laplace(samples, f_limit)?;
    let mut gaps = Vec::with_capacity(f_sequence.len());
    let mut gap_std_errors = Vec::with_capacity(f_sequence.len());
    let mut sup_gaps = Vec::with_capacity(f_sequence.len());
    for f in f_sequence {
        let vals = laplace_values(samples, f)?;
        let diff: Vec<f64> = vals.iter().zip(&limit).map(|(a, b)| a - b).collect();
        let (m, se) = mean_and_se(&diff);
        gaps.push(m.abs());
        gap_std_errors.push(se);
        let sup = samples
            .iter()
            .flat_map(|n| {
                let space = n.space();
                n.atoms().iter().map(move |a| {
                    let x = a.location.coords();
                    (f.eval_raw(&space, x) - f_limit.eval_raw(&space, x)).abs()
                })
            })
            .fold(0.0, f64::max);
        sup_gaps.push(sup);
    }
    let monotone = (1..gaps.len()).all(|i| {
        let slack = 3.0 * gap_std_errors[i - 1].hypot(gap_std_errors[i]);
        gaps[i] <= gaps[i - 1] + slack
    });
    let r0 = f_limit.vanish_radius();
    let common = f_sequence
        .iter()
        .all(|f| f.vanish_radius() == r0)
        .then_some(r0);
    Ok(ContinuityReport {
        limit_estimate,
        limit_std_error,
        gaps,
        gap_std_errors,
        sup_gaps,
        monotone,
        common_vanish_radius: common,
    })
}
