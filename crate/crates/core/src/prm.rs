//! Poisson random measures with homogeneous mean measures.
//!
//! Realizations are truncated at a radius `r_min`: atoms with cone distance
//! below `r_min` are not generated. Queries on tail sets with
//! `u_lo >= r_min` are therefore exact in law.
//!
//! Two samplers are provided. [`sample_prm`] draws the total count once and
//! places atoms by inverting the radial tail. [`sample_prm_annuli`] follows
//! the ring decomposition `O^(1) = S \ C^{r_1}`,
//! `O^(j+1) = C^{r_j} \ C^{r_{j+1}}` with independent Poisson counts per ring.
//! Both produce the same law.

use std::sync::Arc;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::cone_space::{Point, SpaceDescriptor};
use crate::error::{invalid, Result};
use crate::measures::{Atom, AtomicMeasure, HomogeneousMeasure};
use crate::rng::{self, open_unit};

/// Consecutive ring radii differ by this factor in [`sample_prm_annuli`].
pub const RING_RATIO: f64 = 2.0;

/// Below this mean, Poisson counts are drawn by inversion.
const INVERSION_LIMIT: f64 = 30.0;

#[derive(Debug, Clone, PartialEq)]
pub struct PrmSpec {
    mean: HomogeneousMeasure,
    r_min: f64,
    time_horizon: Option<f64>,
}

impl PrmSpec {
    pub fn new(mean: HomogeneousMeasure, r_min: f64, time_horizon: Option<f64>) -> Result<Self> {
        if !(r_min > 0.0) || !r_min.is_finite() {
            return Err(invalid(format!("r_min must be positive, got {r_min}")));
        }
        if let Some(t) = time_horizon {
            if !(t > 0.0) || !t.is_finite() {
                return Err(invalid(format!("time horizon must be positive, got {t}")));
            }
        }
        Ok(PrmSpec {
            mean,
            r_min,
            time_horizon,
        })
    }

    pub fn mean(&self) -> &HomogeneousMeasure {
        &self.mean
    }

    pub fn r_min(&self) -> f64 {
        self.r_min
    }

    pub fn time_horizon(&self) -> Option<f64> {
        self.time_horizon
    }

    /// Space of the realizations (product-time when a horizon is set).
    pub fn output_space(&self) -> SpaceDescriptor {
        let base = self.mean.space();
        if self.time_horizon.is_some() {
            base.make_product_space().expect("base space")
        } else {
            base
        }
    }

    /// Expected number of generated atoms.
    pub fn expected_count(&self) -> f64 {
        self.time_horizon.unwrap_or(1.0) * self.mass_between(self.r_min, f64::INFINITY)
    }

    /// `mu(lo <= d(x, C) < hi)` without time factor.
    fn mass_between(&self, lo: f64, hi: f64) -> f64 {
        let a = self.mean.alpha();
        let upper = if hi.is_finite() { hi.powf(-a) } else { 0.0 };
        self.mean.total_angular() * (lo.powf(-a) - upper)
    }
}

/// Poisson variate. Inversion for small means, the library sampler
/// (transformed rejection) above [`INVERSION_LIMIT`].
pub fn poisson<R: Rng + ?Sized>(rng: &mut R, mean: f64) -> u64 {
    if mean <= 0.0 {
        return 0;
    }
    if mean < INVERSION_LIMIT {
        let u: f64 = rng.random();
        let mut k = 0u64;
        let mut p = (-mean).exp();
        let mut cdf = p;
        while u > cdf && k < 10_000 {
            k += 1;
            p *= mean / k as f64;
            if p == 0.0 {
                break;
            }
            cdf += p;
        }
        k
    } else {
        let d = rand_distr::Poisson::new(mean).expect("finite positive mean");
        d.sample(rng) as u64
    }
}

struct AtomSampler<'a> {
    spec: &'a PrmSpec,
    dirs: Option<WeightedIndex<f64>>,
}

impl<'a> AtomSampler<'a> {
    fn new(spec: &'a PrmSpec) -> Self {
        let ang = spec.mean.angular();
        let dirs = (ang.len() > 1)
            .then(|| WeightedIndex::new(ang.iter().map(|a| a.w)).expect("positive weights"));
        AtomSampler { spec, dirs }
    }

    /// One atom with radius drawn from `P(R > s) ∝ s^-alpha` on `[lo, hi)`.
    fn draw(&self, rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> Atom {
        let a = self.spec.mean.alpha();
        let u = open_unit(rng);
        let radius = if hi.is_finite() {
            let (tl, th) = (lo.powf(-a), hi.powf(-a));
            (th + u * (tl - th)).powf(-1.0 / a)
        } else {
            lo * u.powf(-1.0 / a)
        };
        let k = self.dirs.as_ref().map_or(0, |d| d.sample(rng));
        let omega = self.spec.mean.angular()[k].omega.coords();
        let mut coords = Vec::with_capacity(omega.len() + 1);
        if let Some(t) = self.spec.time_horizon {
            coords.push(t * (1.0 - open_unit(rng)));
        }
        coords.extend(omega.iter().map(|w| radius * w));
        Atom::new(coords, 1.0)
    }
}

fn sample_on(spec: &PrmSpec, rng: &mut ChaCha8Rng) -> AtomicMeasure {
    let n = poisson(rng, spec.expected_count());
    let sampler = AtomSampler::new(spec);
    let atoms = (0..n)
        .map(|_| sampler.draw(rng, spec.r_min, f64::INFINITY))
        .collect();
    AtomicMeasure::from_trusted(spec.output_space(), atoms)
}

/// One PRM realization, deterministic in `seed`.
pub fn sample_prm(spec: &PrmSpec, seed: u64) -> AtomicMeasure {
    sample_prm_replicate(spec, seed, 0)
}

/// Replicate `replicate` of the stream family keyed by `seed`.
pub fn sample_prm_replicate(spec: &PrmSpec, seed: u64, replicate: u64) -> AtomicMeasure {
    sample_on(spec, &mut rng::stream(seed, replicate, rng::LANE_MAIN))
}

/// `reps` independent realizations, computed in parallel; the result does
/// not depend on the thread count.
pub fn prm_ensemble(spec: &PrmSpec, seed: u64, reps: usize) -> Vec<AtomicMeasure> {
    (0..reps as u64)
        .into_par_iter()
        .map(|r| sample_prm_replicate(spec, seed, r))
        .collect()
}

/// Ring radii `r_1 > r_2 > ... > r_rings = r_min`, geometric with ratio
/// [`RING_RATIO`].
pub fn ring_radii(r_min: f64, rings: usize) -> Vec<f64> {
    (1..=rings)
        .map(|j| r_min * RING_RATIO.powi((rings - j) as i32))
        .collect()
}

/// PRM realization built ring by ring, each ring on its own stream.
pub fn sample_prm_annuli(spec: &PrmSpec, seed: u64, rings: usize) -> Result<AtomicMeasure> {
    sample_prm_annuli_replicate(spec, seed, 0, rings)
}

pub fn sample_prm_annuli_replicate(
    spec: &PrmSpec,
    seed: u64,
    replicate: u64,
    rings: usize,
) -> Result<AtomicMeasure> {
    if rings == 0 {
        return Err(invalid("need at least one ring"));
    }
    let radii = ring_radii(spec.r_min, rings);
    let horizon = spec.time_horizon.unwrap_or(1.0);
    let sampler = AtomSampler::new(spec);
    let mut atoms = Vec::new();
    for (j, &lo) in radii.iter().enumerate() {
        let hi = if j == 0 { f64::INFINITY } else { radii[j - 1] };
        let mut rng = rng::stream(seed, replicate, 1 + j as u64);
        let n = poisson(&mut rng, horizon * spec.mass_between(lo, hi));
        atoms.extend((0..n).map(|_| sampler.draw(&mut rng, lo, hi)));
    }
    Ok(AtomicMeasure::from_trusted(spec.output_space(), atoms))
}

/// Transformations with preimages of sets bounded away from the cone
/// themselves bounded away from the cone.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, serde::Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Transform {
    /// `x -> lambda x`.
    ScaleBy { lambda: f64 },
    /// `r omega -> r^beta omega` in polar form `r = d(x, C)`.
    NormPower { beta: f64 },
}

impl Transform {
    fn validate(&self) -> Result<()> {
        let v = match *self {
            Transform::ScaleBy { lambda } => lambda,
            Transform::NormPower { beta } => beta,
        };
        if !(v > 0.0) || !v.is_finite() {
            return Err(invalid(format!("transform parameter must be positive, got {v}")));
        }
        Ok(())
    }

    fn apply(&self, space: &SpaceDescriptor, coords: &[f64]) -> Vec<f64> {
        match *self {
            Transform::ScaleBy { lambda } => space.scale_raw(lambda, coords),
            Transform::NormPower { beta } => {
                let r = space.cone_distance_raw(coords);
                space.scale_raw(r.powf(beta - 1.0), coords)
            }
        }
    }
}

/// Atom-wise image `N o T^-1 = sum delta_{T X_i}`; weights are kept.
pub fn map_prm(n: &AtomicMeasure, transform: Transform) -> Result<AtomicMeasure> {
    transform.validate()?;
    let space = n.space();
    let atoms = n
        .atoms()
        .iter()
        .map(|a| Atom::new(transform.apply(&space, a.location.coords()), a.weight))
        .collect();
    AtomicMeasure::new(space, atoms)
}

/// Mean measure of the mapped process, `mu o T^-1`.
pub fn pushforward_mean(mean: &HomogeneousMeasure, transform: Transform) -> Result<HomogeneousMeasure> {
    transform.validate()?;
    let (alpha, factor) = match transform {
        // mu(d > u / lambda) = lambda^alpha w u^-alpha
        Transform::ScaleBy { lambda } => (mean.alpha(), lambda.powf(mean.alpha())),
        // mu(d^beta > u) = w u^(-alpha/beta)
        Transform::NormPower { beta } => (mean.alpha() / beta, 1.0),
    };
    let angular = mean
        .angular()
        .iter()
        .map(|a| crate::measures::AngularAtom {
            omega: a.omega.clone(),
            w: a.w * factor,
        })
        .collect();
    HomogeneousMeasure::new(mean.space(), alpha, angular)
}

type ProbFn = Arc<dyn Fn(&Point) -> f64 + Send + Sync>;
type DistFn = Arc<dyn Fn(&Point) -> Vec<f64> + Send + Sync>;

/// Transition kernel `G(x, .)` on a finite mark space.
#[derive(Clone)]
pub enum MarkKernel {
    /// Mark 1 with probability `q(x)`, else 0.
    Bernoulli(ProbFn),
    /// Label `labels[k]` with probability `probs(x)[k]`.
    Discrete { labels: Vec<String>, probs: DistFn },
}

impl std::fmt::Debug for MarkKernel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            MarkKernel::Bernoulli(_) => f.write_str("MarkKernel::Bernoulli(..)"),
            MarkKernel::Discrete { labels, .. } => {
                write!(f, "MarkKernel::Discrete {{ labels: {labels:?}, .. }}")
            }
        }
    }
}

impl MarkKernel {
    pub fn bernoulli(q: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&q) {
            return Err(invalid(format!("retention probability must lie in [0, 1], got {q}")));
        }
        Ok(MarkKernel::Bernoulli(Arc::new(move |_| q)))
    }

    pub fn bernoulli_fn(q: impl Fn(&Point) -> f64 + Send + Sync + 'static) -> Self {
        MarkKernel::Bernoulli(Arc::new(q))
    }

    pub fn discrete(labels: Vec<String>, probs: Vec<f64>) -> Result<Self> {
        if labels.len() != probs.len() || labels.is_empty() {
            return Err(invalid("labels and probabilities must match and be nonempty"));
        }
        check_distribution(&probs)?;
        Ok(MarkKernel::Discrete {
            labels,
            probs: Arc::new(move |_| probs.clone()),
        })
    }

    pub fn discrete_fn(
        labels: Vec<String>,
        probs: impl Fn(&Point) -> Vec<f64> + Send + Sync + 'static,
    ) -> Self {
        MarkKernel::Discrete {
            labels,
            probs: Arc::new(probs),
        }
    }

    pub fn labels(&self) -> Vec<String> {
        match self {
            MarkKernel::Bernoulli(_) => vec!["0".into(), "1".into()],
            MarkKernel::Discrete { labels, .. } => labels.clone(),
        }
    }

    fn draw(&self, rng: &mut ChaCha8Rng, x: &Point) -> Result<usize> {
        match self {
            MarkKernel::Bernoulli(q) => {
                let q = q(x);
                if !(0.0..=1.0).contains(&q) {
                    return Err(invalid(format!("kernel returned probability {q}")));
                }
                Ok(usize::from(rng.random::<f64>() < q))
            }
            MarkKernel::Discrete { labels, probs } => {
                let p = probs(x);
                if p.len() != labels.len() {
                    return Err(invalid("kernel returned wrong number of probabilities"));
                }
                check_distribution(&p)?;
                let u: f64 = rng.random();
                let mut acc = 0.0;
                for (k, pk) in p.iter().enumerate() {
                    acc += pk;
                    if u < acc {
                        return Ok(k);
                    }
                }
                // round-off: last label with positive probability
                Ok(p.iter().rposition(|&v| v > 0.0).unwrap_or(p.len() - 1))
            }
        }
    }
}

fn check_distribution(p: &[f64]) -> Result<()> {
    if p.iter().any(|v| !(0.0..=1.0).contains(v)) || (p.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
        return Err(invalid(format!("mark probabilities {p:?} do not form a distribution")));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MarkedAtom {
    #[serde(flatten)]
    pub atom: Atom,
    pub mark: usize,
}

/// A PRM on `O x K` for a finite mark space `K`, stored as atoms with mark
/// indices into `labels`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MarkedMeasure {
    pub space: SpaceDescriptor,
    pub labels: Vec<String>,
    pub atoms: Vec<MarkedAtom>,
}

impl MarkedMeasure {
    /// Atoms carrying the given label, as a measure on the original space.
    pub fn label_view(&self, label: &str) -> Option<AtomicMeasure> {
        let k = self.labels.iter().position(|l| l == label)?;
        Some(self.view(k))
    }

    /// For Bernoulli kernels: atoms with mark 1.
    pub fn thinned(&self) -> AtomicMeasure {
        self.view(1)
    }

    /// The location marginal (all atoms).
    pub fn locations(&self) -> AtomicMeasure {
        AtomicMeasure::from_trusted(self.space, self.atoms.iter().map(|a| a.atom.clone()).collect())
    }

    fn view(&self, k: usize) -> AtomicMeasure {
        let atoms = self
            .atoms
            .iter()
            .filter(|a| a.mark == k)
            .map(|a| a.atom.clone())
            .collect();
        AtomicMeasure::from_trusted(self.space, atoms)
    }
}

/// Independent marks `K_i ~ G(X_i, .)`, drawn in atom order.
pub fn mark_prm(n: &AtomicMeasure, kernel: &MarkKernel, seed: u64) -> Result<MarkedMeasure> {
    mark_prm_replicate(n, kernel, seed, 0)
}

pub fn mark_prm_replicate(
    n: &AtomicMeasure,
    kernel: &MarkKernel,
    seed: u64,
    replicate: u64,
) -> Result<MarkedMeasure> {
    let mut rng = rng::stream(seed, replicate, rng::LANE_MARKS);
    let atoms = n
        .atoms()
        .iter()
        .map(|a| {
            Ok(MarkedAtom {
                mark: kernel.draw(&mut rng, &a.location)?,
                atom: a.clone(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(MarkedMeasure {
        space: n.space(),
        labels: kernel.labels(),
        atoms,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measures::{count_in, is_counting, tail_mass, AngularAtom, TailSet};
    use crate::stats::{mean_and_se, sample_variance};

    fn toy(r_min: f64) -> PrmSpec {
        PrmSpec::new(HomogeneousMeasure::one_sided(1.0, 1.0).unwrap(), r_min, None).unwrap()
    }

    fn counts(ms: &[AtomicMeasure], a: &TailSet) -> Vec<f64> {
        ms.iter().map(|m| count_in(m, a) as f64).collect()
    }

    #[test]
    fn poisson_inversion_and_rejection_means() {
        for mean in [0.3, 5.0, 29.0, 31.0, 200.0] {
            let mut r = rng::stream(11, 0, 0);
            let xs: Vec<f64> = (0..20_000).map(|_| poisson(&mut r, mean) as f64).collect();
            let (m, se) = mean_and_se(&xs);
            assert!((m - mean).abs() < 4.0 * se, "mean {mean}: {m} ± {se}");
        }
        assert_eq!(poisson(&mut rng::stream(0, 0, 0), 0.0), 0);
    }

    #[test]
    fn sample_is_counting_and_deterministic() {
        let spec = toy(0.5);
        let a = sample_prm(&spec, 42);
        assert!(is_counting(&a));
        assert_eq!(a, sample_prm(&spec, 42));
        assert!(a.cone_distances().iter().all(|&r| r >= 0.5));
    }

    #[test]
    fn expected_total_count() {
        let spec = toy(0.5);
        assert_eq!(spec.expected_count(), 2.0);
        let ens = prm_ensemble(&spec, 1, 10_000);
        let n: Vec<f64> = ens.iter().map(|m| m.len() as f64).collect();
        let (m, _) = mean_and_se(&n);
        assert!((m - 2.0).abs() <= 3.0 * (2.0f64 / 1e4).sqrt(), "{m}");
    }

    #[test]
    fn count_variance_matches_mean() {
        let ens = prm_ensemble(&toy(0.5), 2, 100_000);
        let c = counts(&ens, &TailSet::above(1.0).unwrap());
        let (m, _) = mean_and_se(&c);
        let v = sample_variance(&c);
        assert!((v / m - 1.0).abs() < 0.05, "mean {m} var {v}");
    }

    #[test]
    fn truncation_below_query_is_irrelevant() {
        let spec = toy(1.0);
        let a = TailSet::above(2.0).unwrap();
        let target = tail_mass(spec.mean(), &a);
        assert_eq!(target, 0.5);
        let c = counts(&prm_ensemble(&spec, 3, 20_000), &a);
        let (m, se) = mean_and_se(&c);
        assert!((m - target).abs() < 4.0 * se);
    }

    #[test]
    fn annuli_single_ring_and_ring_masses() {
        assert_eq!(ring_radii(0.5, 1), vec![0.5]);
        assert_eq!(ring_radii(0.5, 3), vec![2.0, 1.0, 0.5]);
        let spec = toy(0.5);
        // ring (0.5, 1] has mass 1/0.5 - 1/1 = 1
        let band = TailSet::band(0.5, Some(1.0)).unwrap();
        assert_eq!(tail_mass(spec.mean(), &band), 1.0);
        let ens: Vec<AtomicMeasure> = (0..10_000)
            .map(|r| sample_prm_annuli_replicate(&spec, 4, r, 3).unwrap())
            .collect();
        let total: Vec<f64> = ens.iter().map(|m| m.len() as f64).collect();
        let (m, se) = mean_and_se(&total);
        assert!((m - 2.0).abs() < 3.0 * se.max((2.0f64 / 1e4).sqrt()));
        let ring = counts(&ens, &band);
        let (m, se) = mean_and_se(&ring);
        assert!((m - 1.0).abs() < 4.0 * se);
        assert!(sample_prm_annuli(&spec, 0, 0).is_err());
    }

    #[test]
    fn map_identity_and_scaling() {
        let n = sample_prm(&toy(0.25), 9);
        assert_eq!(map_prm(&n, Transform::ScaleBy { lambda: 1.0 }).unwrap(), n);
        let doubled = map_prm(&n, Transform::ScaleBy { lambda: 2.0 }).unwrap();
        for (a, b) in n.atoms().iter().zip(doubled.atoms()) {
            assert_eq!(b.location.coords()[0], 2.0 * a.location.coords()[0]);
            assert_eq!(a.weight, b.weight);
        }
        assert!(map_prm(&n, Transform::NormPower { beta: 0.0 }).is_err());
    }

    #[test]
    fn pushforward_masses() {
        let h = HomogeneousMeasure::one_sided(1.0, 1.0).unwrap();
        let above1 = TailSet::above(1.0).unwrap();
        let scaled = pushforward_mean(&h, Transform::ScaleBy { lambda: 2.0 }).unwrap();
        assert_eq!(tail_mass(&scaled, &above1), 2.0);
        let h2 = HomogeneousMeasure::one_sided(2.0, 1.0).unwrap();
        let pw = pushforward_mean(&h2, Transform::NormPower { beta: 2.0 }).unwrap();
        assert_eq!(pw.alpha(), 1.0);
        assert_eq!(tail_mass(&pw, &TailSet::above(4.0).unwrap()), 0.25);
    }

    #[test]
    fn norm_power_changes_tail_index() {
        // alpha = 2 input, beta = 2: P(R^2 > u) = u^-1 above r_min^2
        let spec = PrmSpec::new(HomogeneousMeasure::one_sided(2.0, 1.0).unwrap(), 0.5, None).unwrap();
        let a = TailSet::above(4.0).unwrap();
        let c: Vec<f64> = (0..20_000)
            .map(|r| {
                let m = map_prm(&sample_prm_replicate(&spec, 5, r), Transform::NormPower { beta: 2.0 })
                    .unwrap();
                count_in(&m, &a) as f64
            })
            .collect();
        let (m, se) = mean_and_se(&c);
        assert!((m - 0.25).abs() < 4.0 * se, "{m} ± {se}");
    }

    #[test]
    fn norm_power_in_two_dims_keeps_direction() {
        let s = SpaceDescriptor::euclidean_origin(2).unwrap();
        let n = AtomicMeasure::new(s, vec![Atom::new(vec![3.0, 4.0], 1.0)]).unwrap();
        let m = map_prm(&n, Transform::NormPower { beta: 2.0 }).unwrap();
        let c = m.atoms()[0].location.coords();
        assert!((c[0] - 15.0).abs() < 1e-12 && (c[1] - 20.0).abs() < 1e-12);
    }

    #[test]
    fn bernoulli_marks() {
        let n = sample_prm(&toy(0.1), 3);
        let all = mark_prm(&n, &MarkKernel::bernoulli(1.0).unwrap(), 1).unwrap();
        assert!(all.atoms.iter().all(|a| a.mark == 1));
        assert_eq!(all.thinned(), n);
        let none = mark_prm(&n, &MarkKernel::bernoulli(0.0).unwrap(), 1).unwrap();
        assert!(none.thinned().is_empty());
        assert!(MarkKernel::bernoulli(1.5).is_err());
    }

    #[test]
    fn thinning_rate() {
        let spec = toy(0.5);
        let k = MarkKernel::bernoulli(0.3).unwrap();
        let a = TailSet::above(1.0).unwrap();
        let c: Vec<f64> = (0..20_000)
            .map(|r| {
                let n = sample_prm_replicate(&spec, 6, r);
                count_in(&mark_prm_replicate(&n, &k, 6, r).unwrap().thinned(), &a) as f64
            })
            .collect();
        let (m, se) = mean_and_se(&c);
        assert!((m - 0.3).abs() < 4.0 * se);
    }

    #[test]
    fn discrete_labels_symmetric() {
        let spec = toy(0.5);
        let k = MarkKernel::discrete(vec!["a".into(), "b".into()], vec![0.5, 0.5]).unwrap();
        let (mut ca, mut cb) = (Vec::new(), Vec::new());
        for r in 0..10_000 {
            let n = sample_prm_replicate(&spec, 8, r);
            let marked = mark_prm_replicate(&n, &k, 8, r).unwrap();
            ca.push(marked.label_view("a").unwrap().len() as f64);
            cb.push(marked.label_view("b").unwrap().len() as f64);
        }
        let (ma, sa) = mean_and_se(&ca);
        let (mb, sb) = mean_and_se(&cb);
        assert!((ma - mb).abs() < 3.0 * (sa * sa + sb * sb).sqrt(), "{ma} vs {mb}");
        assert!(marked_label_missing(&k));
    }

    fn marked_label_missing(k: &MarkKernel) -> bool {
        let n = sample_prm(&toy(0.5), 0);
        mark_prm(&n, k, 0).unwrap().label_view("zzz").is_none()
    }

    #[test]
    fn location_dependent_kernel() {
        // keep only atoms beyond radius 2
        let k = MarkKernel::bernoulli_fn(|x| if x.coords()[0].abs() > 2.0 { 1.0 } else { 0.0 });
        let n = sample_prm(&toy(0.05), 12);
        let kept = mark_prm(&n, &k, 0).unwrap().thinned();
        assert!(kept.cone_distances().iter().all(|&r| r > 2.0));
        let bad = MarkKernel::discrete_fn(vec!["a".into()], |_| vec![0.5]);
        assert!(mark_prm(&n, &bad, 0).is_err() || n.is_empty());
    }

    #[test]
    fn product_time_realization() {
        let h = HomogeneousMeasure::new(
            SpaceDescriptor::euclidean_origin(2).unwrap(),
            1.5,
            vec![AngularAtom { omega: Point::new(vec![0.6, 0.8]), w: 2.0 }],
        )
        .unwrap();
        let spec = PrmSpec::new(h, 0.5, Some(3.0)).unwrap();
        let n = sample_prm(&spec, 1);
        assert!(n.space().has_time());
        for a in n.atoms() {
            let c = a.location.coords();
            assert!(c[0] > 0.0 && c[0] <= 3.0);
        }
        assert!((spec.expected_count() - 3.0 * 2.0 * 0.5f64.powf(-1.5)).abs() < 1e-12);
    }
}
