//! Complete convergence of `N_n = sum delta_{(i/n, X_i / b(n))}` to a PRM
//! with mean `dt x mu`, Poisson count tests, and tightness diagnostics.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cone_space::{Point, SpaceDescriptor};
use crate::error::{invalid, Error, Result};
use crate::laplace::{analytic_prm_laplace, integrate_against, PrmMean, TestFunction};
use crate::measures::{atomic_mass, AngularAtom, Atom, AtomicMeasure, HomogeneousMeasure, TailSet};
use crate::regvar::{scaling_b, HeavyTailSampler, RadialLaw, ScalingFunction};
use crate::rng;
use crate::stats::{chi_square_sf, mean_and_se, poisson_pmf, poisson_upper_tail, sample_variance};

/// Report schema identifier.
pub const SCHEMA: &str = "mo-pointproc/report-v1";
/// Largest accepted `|z|`.
pub const Z_MAX: f64 = 4.0;
/// Smallest accepted chi-square p-value.
pub const P_MIN: f64 = 0.001;
/// Gap monotonicity slack, in combined standard errors.
pub const GAP_SLACK: f64 = 2.0;
/// Minimum number of counts for [`poisson_count_test`].
pub const MIN_COUNTS: usize = 100;
/// Minimum expected frequency per chi-square cell.
const MIN_EXPECTED: f64 = 5.0;
/// Lane offset for experiment replicates; the grid index is added.
const LANE_EXPERIMENT: u64 = 0x4558_5000;

/// `sum_i delta_{(i/n, X_i / b_n)}` on `[0, inf) x S`.
pub fn build_empirical_pp(space: &SpaceDescriptor, samples: &[Point], b_n: f64) -> Result<AtomicMeasure> {
    if samples.is_empty() {
        return Err(Error::InsufficientData("need at least one sample".into()));
    }
    if !(b_n > 0.0) || !b_n.is_finite() {
        return Err(invalid(format!("b_n must be positive, got {b_n}")));
    }
    let product = space.make_product_space()?;
    let n = samples.len();
    let mut atoms = Vec::with_capacity(n);
    for (i, x) in samples.iter().enumerate() {
        space.check_point(x)?;
        if let Some(a) = pp_atom(space, i, n, x.coords(), b_n, 0.0) {
            atoms.push(a);
        }
    }
    AtomicMeasure::new(product, atoms)
}

/// Atom `(i/n, x / b)` when `d(x / b, C) > keep_above`.
fn pp_atom(space: &SpaceDescriptor, i: usize, n: usize, x: &[f64], b: f64, keep_above: f64) -> Option<Atom> {
    let y = space.scale_raw(1.0 / b, x);
    let d = space.cone_distance_raw(&y);
    (d > 0.0 && d > keep_above).then(|| {
        let mut c = Vec::with_capacity(y.len() + 1);
        c.push((i + 1) as f64 / n as f64);
        c.extend(y);
        Atom::new(c, 1.0)
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CountTest {
    pub p_value: f64,
    pub mean_z: f64,
    pub var_z: f64,
    pub chi_square: f64,
    pub df: usize,
    /// Lower edges of the chi-square cells; the last cell is open.
    pub cells: Vec<u64>,
}

impl CountTest {
    pub fn pass(&self) -> bool {
        self.p_value >= P_MIN && self.mean_z.abs() <= Z_MAX && self.var_z.abs() <= Z_MAX
    }
}

/// Chi-square goodness of fit against Poisson(`mean`), with cells merged
/// so every expected frequency is at least 5, plus z-scores of the sample
/// mean and variance.
pub fn poisson_count_test(counts: &[u64], mean: f64) -> Result<CountTest> {
    let n = counts.len();
    if n < MIN_COUNTS {
        return Err(Error::InsufficientData(format!(
            "need at least {MIN_COUNTS} counts, got {n}"
        )));
    }
    if !(mean > 0.0) || !mean.is_finite() {
        return Err(invalid(format!("Poisson mean must be positive, got {mean}")));
    }
    let nf = n as f64;
    let max_obs = counts.iter().copied().max().unwrap_or(0) as usize;
    let len = max_obs.max(crate::stats::poisson_quantile(mean, 1.0 - 1e-12) as usize) + 2;
    let pmf = poisson_pmf(mean, len);

    // cells [edges[j], edges[j+1]) with the last one open
    let mut edges = vec![0u64];
    let mut acc = 0.0;
    for (k, p) in pmf.iter().enumerate() {
        acc += nf * p;
        let rest = nf * poisson_upper_tail(mean, k as u64);
        if acc >= MIN_EXPECTED && rest >= MIN_EXPECTED {
            edges.push(k as u64 + 1);
            acc = 0.0;
        }
    }
    let cells = edges.len();
    let expected: Vec<f64> = (0..cells)
        .map(|j| {
            let lo = edges[j];
            nf * match edges.get(j + 1) {
                Some(&hi) => pmf[lo as usize..hi as usize].iter().sum::<f64>(),
                None if lo == 0 => 1.0,
                None => poisson_upper_tail(mean, lo - 1),
            }
        })
        .collect();
    let mut observed = vec![0u64; cells];
    for &c in counts {
        let j = edges.partition_point(|&e| e <= c) - 1;
        observed[j] += 1;
    }
    let chi_square: f64 = if cells == 1 {
        0.0
    } else {
        observed
            .iter()
            .zip(&expected)
            .map(|(&o, &e)| (o as f64 - e).powi(2) / e)
            .sum()
    };
    let df = cells - 1;
    let values: Vec<f64> = counts.iter().map(|&c| c as f64).collect();
    let (m, _) = mean_and_se(&values);
    let v = sample_variance(&values);
    Ok(CountTest {
        p_value: chi_square_sf(chi_square, df),
        mean_z: (m - mean) / (mean / nf).sqrt(),
        var_z: (v - mean) / ((mean + 2.0 * mean * mean) / nf).sqrt(),
        chi_square,
        df,
        cells: edges,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TightnessParams {
    /// Strictly decreasing shell radii `r_i`.
    pub r_grid: Vec<f64>,
    /// Mass bounds `M_i`.
    pub m_grid: Vec<f64>,
    /// Box half-width `B` of the compacts `K_i`.
    pub box_bound: f64,
    /// Allowed violation probability.
    pub eps: f64,
    /// Mass threshold outside `K_i`.
    #[serde(default = "default_eps_prime")]
    pub eps_prime: f64,
}

fn default_eps_prime() -> f64 {
    1.0
}

impl TightnessParams {
    fn validate(&self) -> Result<()> {
        if self.r_grid.len() != self.m_grid.len() || self.r_grid.is_empty() {
            return Err(invalid("r_grid and m_grid must be nonempty and of equal length"));
        }
        if self.r_grid.iter().any(|&r| !(r > 0.0))
            || self.r_grid.windows(2).any(|w| !(w[1] < w[0]))
        {
            return Err(invalid("r_grid must be positive and strictly decreasing"));
        }
        if !(self.eps > 0.0) || !(self.eps_prime > 0.0) || !(self.box_bound > 0.0) {
            return Err(invalid("eps, eps_prime and box_bound must be positive"));
        }
        Ok(())
    }
}

/// `M_i` at the `level` quantile of the Poisson count of `S \ C^{r_i}` under
/// `mean`.
pub fn poisson_m_grid(mean: &PrmMean, r_grid: &[f64], level: f64) -> Result<Vec<f64>> {
    r_grid
        .iter()
        .map(|&r| {
            let m = mean.mass(&TailSet::above(r)?)?;
            Ok(crate::stats::poisson_quantile(m, level) as f64)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TightnessRow {
    pub r: f64,
    pub m: f64,
    /// Fraction of members with `xi(S \ C^r) > M`.
    pub frac_shell_above_m: f64,
    /// Fraction of members with mass `>= eps'` on `(S \ C^r) \ K`.
    pub frac_outside_box: f64,
    pub tight1: bool,
    pub tight2: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TightnessTable {
    pub rows: Vec<TightnessRow>,
    pub eps: f64,
    pub eps_prime: f64,
    pub box_bound: f64,
    pub pass: bool,
}

/// Per member and shell: (mass with `d >= r_i`, the part of it outside the
/// box).
fn member_summary(m: &AtomicMeasure, p: &TightnessParams) -> Vec<(f64, f64)> {
    let space = m.space();
    let mut out = vec![(0.0, 0.0); p.r_grid.len()];
    for a in m.atoms() {
        let x = a.location.coords();
        let d = space.cone_distance_raw(x);
        let outside = x.iter().any(|c| c.abs() > p.box_bound);
        for (slot, &r) in out.iter_mut().zip(&p.r_grid) {
            if d >= r {
                slot.0 += a.weight;
                if outside {
                    slot.1 += a.weight;
                }
            }
        }
    }
    out
}

fn table_from_summaries(summaries: &[Vec<(f64, f64)>], p: &TightnessParams) -> TightnessTable {
    let n = summaries.len().max(1) as f64;
    let rows: Vec<TightnessRow> = p
        .r_grid
        .iter()
        .zip(&p.m_grid)
        .enumerate()
        .map(|(i, (&r, &m))| {
            let above = summaries.iter().filter(|s| s[i].0 > m).count() as f64 / n;
            let outside = summaries.iter().filter(|s| s[i].1 >= p.eps_prime).count() as f64 / n;
            TightnessRow {
                r,
                m,
                frac_shell_above_m: above,
                frac_outside_box: outside,
                tight1: above < p.eps,
                tight2: outside < p.eps,
            }
        })
        .collect();
    let pass = rows.iter().all(|r| r.tight1 && r.tight2);
    TightnessTable {
        rows,
        eps: p.eps,
        eps_prime: p.eps_prime,
        box_bound: p.box_bound,
        pass,
    }
}

/// Empirical version of the two tightness conditions over an ensemble.
/// `K_i = {x : d(x, C) >= r_i, |x_j| <= B for all j}`.
pub fn tightness_diagnostic(ensemble: &[AtomicMeasure], params: &TightnessParams) -> Result<TightnessTable> {
    params.validate()?;
    let summaries: Vec<_> = ensemble.par_iter().map(|m| member_summary(m, params)).collect();
    Ok(table_from_summaries(&summaries, params))
}

/// Sampler section of an experiment config.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SamplerConfig {
    pub alpha: f64,
    /// Defaults to the single direction `+1` on the line.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub angular: Option<Vec<AngularAtom>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub space: Option<SpaceDescriptor>,
    #[serde(default = "default_radial")]
    pub radial: RadialLaw,
}

fn default_radial() -> RadialLaw {
    RadialLaw::PurePareto
}

impl SamplerConfig {
    pub fn build(&self) -> Result<HeavyTailSampler> {
        let shape = match &self.angular {
            None => HomogeneousMeasure::one_sided(self.alpha, 1.0)?,
            Some(ang) => {
                let space = match self.space {
                    Some(s) => s,
                    None => {
                        let d = ang.first().map_or(0, |a| a.omega.len());
                        SpaceDescriptor::euclidean_origin(d)?
                    }
                };
                HomogeneousMeasure::new(space, self.alpha, ang.clone())?
            }
        };
        HeavyTailSampler::new(&shape, self.radial)
    }
}

/// How `b(n)` is obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "kebab-case")]
pub enum ScalingChoice {
    /// `n^(1/alpha)`.
    #[default]
    Analytic,
    /// Exact radial quantile `F^-1(1 - 1/n)`.
    Quantile,
    /// Quantile of a pilot sample of the given size.
    Empirical { pilot: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub sampler: SamplerConfig,
    pub n_grid: Vec<usize>,
    pub reps: usize,
    #[serde(default)]
    pub test_functions: Vec<TestFunction>,
    #[serde(default)]
    pub tail_sets: Vec<TailSet>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub scaling: ScalingChoice,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tightness: Option<TightnessParams>,
}

impl ExperimentConfig {
    fn validate(&self) -> Result<()> {
        if self.n_grid.is_empty() || self.n_grid.contains(&0) {
            return Err(invalid("n_grid must be nonempty with positive entries"));
        }
        if self.reps < MIN_COUNTS {
            return Err(invalid(format!("reps must be at least {MIN_COUNTS}")));
        }
        let in_unit = |w: Option<(f64, f64)>| w.is_none_or(|(a, b)| a >= 0.0 && b <= 1.0);
        for f in &self.test_functions {
            if !(f.vanish_radius() > 0.0) {
                return Err(invalid("test functions must vanish near the cone"));
            }
            let ok = match f {
                TestFunction::Step(p) => p.iter().all(|p| in_unit(p.set.time_window)),
                TestFunction::Ramp { time, .. } => in_unit(*time),
            };
            if !ok {
                return Err(invalid("test function time support must lie in [0, 1]"));
            }
        }
        if !self.tail_sets.iter().all(|a| in_unit(a.time_window)) {
            return Err(invalid("tail set time windows must lie in [0, 1]"));
        }
        if let Some(t) = &self.tightness {
            t.validate()?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LaplaceRow {
    pub n: usize,
    pub function: usize,
    pub estimate: f64,
    pub std_error: f64,
    pub target: f64,
    pub gap: f64,
    pub z: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CountRow {
    pub n: usize,
    pub set: usize,
    /// Poisson mean under `dt x mu`.
    pub target_mean: f64,
    /// `E N_n(A)` for the finite `n`.
    pub exact_mean: f64,
    pub sample_mean: f64,
    /// `histogram[k]` replicates had count `k`.
    pub histogram: Vec<u64>,
    pub test: CountTest,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GapTrend {
    pub function: usize,
    pub gaps: Vec<f64>,
    pub std_errors: Vec<f64>,
    pub nonincreasing: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Thresholds {
    pub z_max: f64,
    pub p_min: f64,
    pub gap_slack_se: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceReport {
    pub schema: &'static str,
    pub b: Vec<f64>,
    pub laplace: Vec<LaplaceRow>,
    pub counts: Vec<CountRow>,
    pub gap_trends: Vec<GapTrend>,
    pub tightness: Vec<TightnessTable>,
    pub thresholds: Thresholds,
    pub pass: bool,
}

struct RepSummary {
    counts: Vec<u64>,
    laplace: Vec<f64>,
    tight: Vec<(f64, f64)>,
}

/// Runs the experiment: for every `n`, `reps` independent `N_n`, compared
/// with PRM(`dt x mu`) on `[0, 1] x S`.
///
/// Passes iff at the largest `n` every Laplace and count z-score is within
/// [`Z_MAX`] and every chi-square p-value is at least [`P_MIN`], and every
/// Laplace gap sequence is nonincreasing up to [`GAP_SLACK`] combined
/// standard errors.
pub fn complete_convergence_experiment(cfg: &ExperimentConfig) -> Result<ConvergenceReport> {
    cfg.validate()?;
    let sampler = cfg.sampler.build()?;
    let space = sampler.space();
    let limit = PrmMean::new(sampler.limit_measure(), Some(1.0))?;

    let sf = match cfg.scaling {
        ScalingChoice::Analytic => ScalingFunction::analytic(sampler.alpha())?,
        ScalingChoice::Quantile => ScalingFunction::for_sampler(&sampler),
        ScalingChoice::Empirical { pilot } => {
            if pilot == 0 {
                return Err(invalid("pilot sample size must be positive"));
            }
            let xs = sampler.sample_with(&mut rng::stream(cfg.seed, 0, rng::LANE_PILOT), pilot);
            ScalingFunction::empirical(&space, &xs)?
        }
    };

    // atoms at or below this cone distance never matter
    let keep_above = cfg
        .test_functions
        .iter()
        .map(|f| f.vanish_radius())
        .chain(cfg.tail_sets.iter().map(|a| a.u_lo))
        .chain(cfg.tightness.iter().flat_map(|t| t.r_grid.iter().map(|r| r * (1.0 - 1e-12))))
        .fold(f64::INFINITY, f64::min)
        .min(f64::MAX);

    let f_targets = cfg
        .test_functions
        .iter()
        .map(|f| analytic_prm_laplace(&limit, f))
        .collect::<Result<Vec<_>>>()?;
    let a_targets = cfg
        .tail_sets
        .iter()
        .map(|a| limit.mass(a))
        .collect::<Result<Vec<_>>>()?;

    let mut b_values = Vec::new();
    let mut laplace = Vec::new();
    let mut counts = Vec::new();
    let mut tightness = Vec::new();
    let product = space.make_product_space()?;

    for (gi, &n) in cfg.n_grid.iter().enumerate() {
        let b = scaling_b(&sf, n as f64)?;
        b_values.push(b);
        let lane = LANE_EXPERIMENT + gi as u64;
        let reps: Vec<RepSummary> = (0..cfg.reps as u64)
            .into_par_iter()
            .map(|rep| {
                let xs = sampler.sample_with(&mut rng::stream(cfg.seed, rep, lane), n);
                let atoms: Vec<Atom> = xs
                    .iter()
                    .enumerate()
                    .filter_map(|(i, x)| pp_atom(&space, i, n, x.coords(), b, keep_above))
                    .collect();
                let m = AtomicMeasure::new(product, atoms).expect("valid atoms");
                RepSummary {
                    counts: cfg
                        .tail_sets
                        .iter()
                        .map(|a| atomic_mass(&m, a).expect("time space") as u64)
                        .collect(),
                    laplace: cfg
                        .test_functions
                        .iter()
                        .map(|f| (-integrate_against(&m, f).expect("time space")).exp())
                        .collect(),
                    tight: cfg
                        .tightness
                        .as_ref()
                        .map_or_else(Vec::new, |p| member_summary(&m, p)),
                }
            })
            .collect();

        for (k, &target) in f_targets.iter().enumerate() {
            let vals: Vec<f64> = reps.iter().map(|r| r.laplace[k]).collect();
            let (estimate, std_error) = mean_and_se(&vals);
            laplace.push(LaplaceRow {
                n,
                function: k,
                estimate,
                std_error,
                target,
                gap: (estimate - target).abs(),
                z: z_score(estimate, target, std_error),
            });
        }
        for (k, (a, &target)) in cfg.tail_sets.iter().zip(&a_targets).enumerate() {
            let c: Vec<u64> = reps.iter().map(|r| r.counts[k]).collect();
            let max = c.iter().copied().max().unwrap_or(0) as usize;
            let mut histogram = vec![0u64; max + 1];
            for &v in &c {
                histogram[v as usize] += 1;
            }
            let vals: Vec<f64> = c.iter().map(|&v| v as f64).collect();
            let test = if target > 0.0 {
                poisson_count_test(&c, target)?
            } else {
                degenerate_test(&c)
            };
            counts.push(CountRow {
                n,
                set: k,
                target_mean: target,
                exact_mean: exact_count_mean(&sampler, a, n, b),
                sample_mean: mean_and_se(&vals).0,
                histogram,
                test,
            });
        }
        if let Some(p) = &cfg.tightness {
            let s: Vec<Vec<(f64, f64)>> = reps.into_iter().map(|r| r.tight).collect();
            tightness.push(table_from_summaries(&s, p));
        }
    }

    let nf = cfg.test_functions.len();
    let gap_trends: Vec<GapTrend> = (0..nf)
        .map(|k| {
            let rows: Vec<&LaplaceRow> = laplace.iter().filter(|r| r.function == k).collect();
            let gaps: Vec<f64> = rows.iter().map(|r| r.gap).collect();
            let std_errors: Vec<f64> = rows.iter().map(|r| r.std_error).collect();
            let nonincreasing = (1..gaps.len()).all(|i| {
                gaps[i] <= gaps[i - 1] + GAP_SLACK * std_errors[i - 1].hypot(std_errors[i])
            });
            GapTrend {
                function: k,
                gaps,
                std_errors,
                nonincreasing,
            }
        })
        .collect();

    let n_last = *cfg.n_grid.last().expect("nonempty");
    let last_ok = laplace
        .iter()
        .filter(|r| r.n == n_last)
        .all(|r| r.z.abs() <= Z_MAX)
        && counts.iter().filter(|r| r.n == n_last).all(|r| r.test.pass());
    let pass = last_ok && gap_trends.iter().all(|g| g.nonincreasing);

    Ok(ConvergenceReport {
        schema: SCHEMA,
        b: b_values,
        laplace,
        counts,
        gap_trends,
        tightness,
        thresholds: Thresholds {
            z_max: Z_MAX,
            p_min: P_MIN,
            gap_slack_se: GAP_SLACK,
        },
        pass,
    })
}

fn z_score(est: f64, target: f64, se: f64) -> f64 {
    if se > 0.0 {
        (est - target) / se
    } else if est == target {
        0.0
    } else {
        f64::INFINITY.copysign(est - target)
    }
}

/// Test against the zero measure: any positive count is a failure.
fn degenerate_test(c: &[u64]) -> CountTest {
    let bad = c.iter().any(|&v| v > 0);
    CountTest {
        p_value: if bad { 0.0 } else { 1.0 },
        mean_z: if bad { f64::INFINITY } else { 0.0 },
        var_z: if bad { f64::INFINITY } else { 0.0 },
        chi_square: if bad { f64::INFINITY } else { 0.0 },
        df: 0,
        cells: vec![0],
    }
}

/// `E N_n(A) = #{i : i/n in window} P(X / b in A)`.
fn exact_count_mean(s: &HeavyTailSampler, a: &TailSet, n: usize, b: f64) -> f64 {
    let (t1, t2) = a.time_window.unwrap_or((0.0, 1.0));
    let nf = n as f64;
    // i in (n t1, n t2]
    let hi = (nf * t2).floor().clamp(0.0, nf);
    let lo = (nf * t1).floor().clamp(0.0, nf);
    let mut spatial = a.clone();
    spatial.time_window = None;
    (hi - lo) * s.scaled_probability(&spatial, b, 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::prm::{prm_ensemble, poisson, PrmSpec};

    fn line() -> SpaceDescriptor {
        SpaceDescriptor::euclidean_origin(1).unwrap()
    }

    #[test]
    fn empirical_pp_examples() {
        let m = build_empirical_pp(&line(), &[Point::new(vec![2.0])], 1.0).unwrap();
        assert_eq!(m.atoms()[0].location.coords(), &[1.0, 2.0]);
        let xs: Vec<Point> = [1.0, 2.0, 3.0].iter().map(|&x| Point::new(vec![x])).collect();
        let m = build_empirical_pp(&line(), &xs, 1.0).unwrap();
        let t: Vec<f64> = m.atoms().iter().map(|a| a.location.coords()[0]).collect();
        assert_eq!(t, vec![1.0 / 3.0, 2.0 / 3.0, 1.0]);
        let h = build_empirical_pp(&line(), &xs, 2.0).unwrap();
        for (a, b) in m.atoms().iter().zip(h.atoms()) {
            assert_eq!(b.location.coords()[1], a.location.coords()[1] / 2.0);
        }
        assert!(build_empirical_pp(&line(), &xs, 0.0).is_err());
    }

    #[test]
    fn count_test_examples() {
        let t = poisson_count_test(&vec![0; 200], 1e-9).unwrap();
        assert!(t.p_value > 0.999);
        let t = poisson_count_test(&vec![1; 100_000], 1.0).unwrap();
        assert!(t.p_value < 1e-6);
        assert!(t.var_z.abs() > 100.0);
        assert!(poisson_count_test(&[1; 99], 1.0).is_err());
    }

    #[test]
    fn count_test_cells_have_enough_mass() {
        let mut r = rng::stream(3, 0, 0);
        let c: Vec<u64> = (0..1000).map(|_| poisson(&mut r, 2.5)).collect();
        let t = poisson_count_test(&c, 2.5).unwrap();
        assert!(t.df >= 3);
        assert!(t.p_value > P_MIN);
        let pmf = poisson_pmf(2.5, 60);
        for w in t.cells.windows(2) {
            let e: f64 = pmf[w[0] as usize..w[1] as usize].iter().sum();
            assert!(1000.0 * e >= MIN_EXPECTED);
        }
        let last = *t.cells.last().unwrap();
        assert!(1000.0 * poisson_upper_tail(2.5, last - 1) >= MIN_EXPECTED);
    }

    #[test]
    fn count_test_calibration() {
        let mut passes = 0;
        for meta in 0..20 {
            let mut r = rng::stream(100 + meta, 0, 0);
            let c: Vec<u64> = (0..20_000).map(|_| poisson(&mut r, 1.0)).collect();
            if poisson_count_test(&c, 1.0).unwrap().p_value > P_MIN {
                passes += 1;
            }
        }
        assert!(passes >= 19);
    }

    #[test]
    fn tightness_examples() {
        let spec = PrmSpec::new(HomogeneousMeasure::one_sided(1.0, 1.0).unwrap(), 0.5, None).unwrap();
        let ens = prm_ensemble(&spec, 4, 5000);
        let p = TightnessParams {
            r_grid: vec![1.0],
            m_grid: vec![10.0],
            box_bound: 1e6,
            eps: 0.01,
            eps_prime: 1.0,
        };
        let t = tightness_diagnostic(&ens, &p).unwrap();
        assert_eq!(t.rows[0].frac_shell_above_m, 0.0);
        assert!(t.pass);

        let empty = vec![AtomicMeasure::empty(line()); 10];
        let t = tightness_diagnostic(&empty, &p).unwrap();
        assert!(t.rows.iter().all(|r| r.frac_shell_above_m == 0.0 && r.frac_outside_box == 0.0));

        let small_box = TightnessParams { box_bound: 1.0, ..p.clone() };
        let t = tightness_diagnostic(&ens, &small_box).unwrap();
        assert!(t.rows[0].frac_outside_box > 0.5);
        assert!(!t.pass);

        let bad = TightnessParams { m_grid: vec![1.0, 2.0], ..p.clone() };
        assert!(tightness_diagnostic(&ens, &bad).is_err());
        let bad = TightnessParams { r_grid: vec![1.0, 2.0], m_grid: vec![1.0, 2.0], ..p };
        assert!(tightness_diagnostic(&ens, &bad).is_err());
    }

    #[test]
    fn exact_mean_pure_pareto() {
        let s = HeavyTailSampler::one_sided(1.0, RadialLaw::PurePareto).unwrap();
        let a = TailSet::above(1.0).unwrap().with_time_window(0.0, 1.0).unwrap();
        assert!((exact_count_mean(&s, &a, 100, 100.0) - 1.0).abs() < 1e-12);
        let half = TailSet::above(2.0).unwrap().with_time_window(0.0, 0.5).unwrap();
        assert!((exact_count_mean(&s, &half, 100, 100.0) - 0.25).abs() < 1e-12);
    }

    #[test]
    fn small_experiment() {
        let cfg = ExperimentConfig {
            sampler: SamplerConfig {
                alpha: 1.0,
                angular: None,
                space: None,
                radial: RadialLaw::PurePareto,
            },
            n_grid: vec![50, 200],
            reps: 400,
            test_functions: vec![TestFunction::indicator_above(1.0, std::f64::consts::LN_2).unwrap()],
            tail_sets: vec![
                TailSet::above(1.0).unwrap().with_time_window(0.0, 1.0).unwrap(),
                TailSet::above(2.0).unwrap().with_time_window(0.0, 0.5).unwrap(),
            ],
            seed: 1,
            scaling: ScalingChoice::Analytic,
            tightness: None,
        };
        let rep = complete_convergence_experiment(&cfg).unwrap();
        assert_eq!(rep.schema, SCHEMA);
        assert_eq!(rep.b, vec![50.0, 200.0]);
        assert!(rep.counts.iter().any(|c| (c.target_mean - 0.25).abs() < 1e-15));
        assert!(rep.pass, "{rep:#?}");
        assert_eq!(rep, complete_convergence_experiment(&cfg).unwrap());
    }
}
