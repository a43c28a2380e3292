//! Seeded Monte-Carlo stability experiments: perturb the input data of the
//! inverse problem within an epsilon ball, rerun the reconstruction, and fit
//! the error growth against epsilon.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::ComplexGrid;
use crate::maineq::{invert, invert_regularized, InvertOptions, KnownData};
use crate::problem::{BoundaryH, ProblemSpec};
use crate::spectra::{find_spectrum, Subspectrum};

/// Which inputs get perturbed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PerturbationFamily {
    /// Eigenvalues moved inside an l2 ball of radius epsilon.
    Eigenvalues,
    /// q2 replaced by a mean-preserving perturbation of L2 size epsilon.
    Q2MeanPreserving,
    /// Joint (H, q2) draw preserving H + (1/2) int q2 with
    /// |dH| + ||dq2|| = epsilon.
    HAndQ2Constrained,
}

#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub spec: ProblemSpec,
    /// Number of eigenvalues taken from problem B0 (0 to skip it).
    pub n0: usize,
    /// Number of eigenvalues taken from problem B1.
    pub n1: usize,
    pub epsilons: Vec<f64>,
    pub samples: usize,
    pub seed: u64,
    pub family: PerturbationFamily,
    pub modes: Option<usize>,
    pub reg: f64,
    pub grid_n: usize,
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.samples == 0 {
            return Err(Error::InvalidInput("samples must be >= 1".into()));
        }
        if self.epsilons.is_empty() {
            return Err(Error::InvalidInput("epsilon sweep is empty".into()));
        }
        let mut prev = -1.0;
        for &e in &self.epsilons {
            if e < 0.0 || e <= prev {
                return Err(Error::InvalidInput(
                    "epsilons must be nonnegative and strictly ascending".into(),
                ));
            }
            prev = e;
        }
        if self.n0 + self.n1 == 0 {
            return Err(Error::InvalidInput("no subspectrum selected".into()));
        }
        if self.family != PerturbationFamily::Eigenvalues && self.n0 > 0 {
            // potential/boundary perturbations change B0 too; the joint
            // family is stated for the B1 data alone
            if self.family == PerturbationFamily::HAndQ2Constrained {
                return Err(Error::InvalidInput(
                    "the joint (H, q2) family uses the B1 subspectrum only".into(),
                ));
            }
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let raw: ConfigJson = serde_json::from_str(text)?;
        let cfg = Self {
            spec: ProblemSpec::from_json(&serde_json::to_string(&raw.spec)?)?,
            n0: raw.n0,
            n1: raw.n1,
            epsilons: raw.epsilons,
            samples: raw.samples,
            seed: raw.seed,
            family: raw.family,
            modes: raw.modes,
            reg: raw.reg.unwrap_or(1e-10),
            grid_n: raw.grid_n.unwrap_or(256),
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Serialize, Deserialize)]
struct ConfigJson {
    spec: serde_json::Value,
    #[serde(default)]
    n0: usize,
    n1: usize,
    epsilons: Vec<f64>,
    samples: usize,
    seed: u64,
    family: PerturbationFamily,
    #[serde(default)]
    modes: Option<usize>,
    #[serde(default)]
    reg: Option<f64>,
    #[serde(default)]
    grid_n: Option<usize>,
}

#[derive(Debug, Clone, Serialize)]
pub struct EpsilonStats {
    pub epsilon: f64,
    /// L2 errors against the true potential.
    pub q_errors: Vec<f64>,
    pub h_errors: Vec<f64>,
    /// Distances to the unperturbed reconstruction (the discretization
    /// baseline removed), used for the scaling fit.
    pub q_deviations: Vec<f64>,
    pub h_deviations: Vec<f64>,
    pub q_median: f64,
    pub h_median: f64,
    pub q_deviation_median: f64,
    pub h_deviation_median: f64,
    pub failures: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct StabilityReport {
    pub family: PerturbationFamily,
    /// Error of the unperturbed reconstruction against the true data.
    pub baseline_q: f64,
    pub baseline_h: f64,
    pub per_epsilon: Vec<EpsilonStats>,
    /// Fitted exponent p and constant C in median deviation ~ C eps^p for
    /// the potential and the boundary constant; deviations are measured
    /// from the unperturbed reconstruction so the fit sees the
    /// perturbation response rather than the fixed discretization bias.
    pub exponent_q: f64,
    pub constant_q: f64,
    pub exponent_h: f64,
    pub constant_h: f64,
    pub failure_count: usize,
}

impl StabilityReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).unwrap()
    }
}

fn median(values: &[f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Standard complex Gaussian via Box-Muller (keeps the dependency surface
/// at the seeded generator itself).
fn complex_gaussian(rng: &mut ChaCha8Rng) -> Complex64 {
    let u1: f64 = rng.gen_range(f64::MIN_POSITIVE..1.0);
    let u2: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
    let r = (-2.0 * u1.ln()).sqrt();
    Complex64::new(r * u2.cos(), r * u2.sin())
}

/// A zero-mean cosine-series perturbation of unit L2 norm on (0, d2).
fn unit_bump(rng: &mut ChaCha8Rng, d2: f64, modes: usize) -> ComplexGrid {
    let coeffs: Vec<Complex64> = (1..=modes).map(|_| complex_gaussian(rng)).collect();
    let norm = coeffs.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
    let pi = std::f64::consts::PI;
    ComplexGrid::from_fn(d2, 256, |t| {
        coeffs
            .iter()
            .enumerate()
            .map(|(k, c)| c / norm * (2.0 / d2).sqrt() * ((k + 1) as f64 * pi * t / d2).cos())
            .sum()
    })
    .unwrap()
}

fn add_grids(base: &ComplexGrid, bump: &ComplexGrid, scale: Complex64) -> ComplexGrid {
    let n = base.len().max(bump.len()) - 1;
    ComplexGrid::from_fn(base.interval_length, n, |t| {
        base.eval(t) + scale * bump.eval(t)
    })
    .unwrap()
}

struct Draw {
    known: KnownData,
    perturbed0: Vec<Complex64>,
    perturbed1: Vec<Complex64>,
}

fn draw_sample(
    cfg: &ExperimentConfig,
    sub0: &Subspectrum,
    sub1: &Subspectrum,
    epsilon: f64,
    rng: &mut ChaCha8Rng,
) -> Result<Draw> {
    let base = KnownData::from_spec(&cfg.spec);
    let d2 = 1.0 - cfg.spec.a;
    match cfg.family {
        PerturbationFamily::Eigenvalues => {
            let mus0 = sub0.mus();
            let mus1 = sub1.mus();
            let total = mus0.len() + mus1.len();
            let deltas: Vec<Complex64> = (0..total).map(|_| complex_gaussian(rng)).collect();
            let norm = deltas.iter().map(|d| d.norm_sqr()).sum::<f64>().sqrt();
            let scale = if norm > 0.0 { epsilon / norm } else { 0.0 };
            Ok(Draw {
                known: base,
                perturbed0: mus0
                    .iter()
                    .zip(&deltas[..mus0.len()])
                    .map(|(m, d)| m + scale * d)
                    .collect(),
                perturbed1: mus1
                    .iter()
                    .zip(&deltas[mus0.len()..])
                    .map(|(m, d)| m + scale * d)
                    .collect(),
            })
        }
        PerturbationFamily::Q2MeanPreserving => {
            let bump = unit_bump(rng, d2, 8);
            let q2 = add_grids(&cfg.spec.q2, &bump, Complex64::from(epsilon));
            Ok(Draw {
                known: KnownData::new(base.a, q2, base.big_h, base.a1, base.a2, base.omega1)?,
                perturbed0: sub0.mus(),
                perturbed1: sub1.mus(),
            })
        }
        PerturbationFamily::HAndQ2Constrained => {
            let big_h = match base.big_h {
                BoundaryH::Value(v) => v,
                BoundaryH::Infinity => {
                    return Err(Error::InvalidInput(
                        "the joint (H, q2) family needs a finite H".into(),
                    ))
                }
            };
            // raw draw, then a global rescale so |dH| + ||dq2|| = epsilon;
            // the compensating constant -2 dH / d2 keeps H + (1/2) int q2
            // exact by construction
            let dh_raw = complex_gaussian(rng);
            let bump_raw = complex_gaussian(rng).norm();
            let bump = unit_bump(rng, d2, 8);
            let shift = -2.0 * dh_raw / d2;
            let dq_norm_raw =
                (bump_raw * bump_raw + shift.norm_sqr() * d2).sqrt();
            let q1_raw = dh_raw.norm() + dq_norm_raw;
            let s = if q1_raw > 0.0 { epsilon / q1_raw } else { 0.0 };
            let q2 = ComplexGrid::from_fn(d2, 256, |t| {
                cfg.spec.q2.eval(t) + s * (bump_raw * bump.eval(t) + shift)
            })
            .unwrap();
            Ok(Draw {
                known: KnownData::new(
                    base.a,
                    q2,
                    BoundaryH::Value(big_h + s * dh_raw),
                    base.a1,
                    base.a2,
                    base.omega1,
                )?,
                perturbed0: sub0.mus(),
                perturbed1: sub1.mus(),
            })
        }
    }
}

/// Run the Monte-Carlo sweep. Reconstruction failures inside a sample are
/// recorded per epsilon; the sweep itself only fails on setup errors.
pub fn run_stability(cfg: &ExperimentConfig) -> Result<StabilityReport> {
    cfg.validate()?;
    let sub0 = if cfg.n0 > 0 {
        find_spectrum(&cfg.spec, 0, cfg.n0).map_err(|e| Error::stage("reference spectrum", e))?
    } else {
        Subspectrum::new(0, vec![])?
    };
    let sub1 = if cfg.n1 > 0 {
        find_spectrum(&cfg.spec, 1, cfg.n1).map_err(|e| Error::stage("reference spectrum", e))?
    } else {
        Subspectrum::new(1, vec![])?
    };
    let options = InvertOptions {
        modes: cfg.modes,
        reg: cfg.reg,
        grid_n: cfg.grid_n,
    };

    let baseline = invert(&KnownData::from_spec(&cfg.spec), &sub0, &sub1, &options)
        .map_err(|e| Error::stage("baseline reconstruction", e))?;
    let baseline_q = baseline.q1.l2_distance(&cfg.spec.q1);
    let baseline_h = (baseline.h - cfg.spec.h).norm();

    let mut per_epsilon = Vec::new();
    let mut failure_count = 0usize;
    for (e_idx, &epsilon) in cfg.epsilons.iter().enumerate() {
        let mut q_errors = Vec::new();
        let mut h_errors = Vec::new();
        let mut q_deviations = Vec::new();
        let mut h_deviations = Vec::new();
        let mut failures = 0usize;
        for s in 0..cfg.samples {
            let sample_seed = cfg
                .seed
                .wrapping_add((e_idx as u64) << 32)
                .wrapping_add(s as u64 + 1);
            let mut rng = ChaCha8Rng::seed_from_u64(sample_seed);
            let draw = draw_sample(cfg, &sub0, &sub1, epsilon, &mut rng)?;
            let run = if cfg.family == PerturbationFamily::Eigenvalues {
                invert_regularized(
                    &draw.known,
                    &sub0,
                    &draw.perturbed0,
                    &sub1,
                    &draw.perturbed1,
                    &options,
                )
            } else {
                invert(&draw.known, &sub0, &sub1, &options)
            };
            match run {
                Ok(result) => {
                    q_errors.push(result.q1.l2_distance(&cfg.spec.q1));
                    h_errors.push((result.h - cfg.spec.h).norm());
                    q_deviations.push(result.q1.l2_distance(&baseline.q1));
                    h_deviations.push((result.h - baseline.h).norm());
                }
                Err(_) => failures += 1,
            }
        }
        failure_count += failures;
        per_epsilon.push(EpsilonStats {
            epsilon,
            q_median: median(&q_errors),
            h_median: median(&h_errors),
            q_deviation_median: median(&q_deviations),
            h_deviation_median: median(&h_deviations),
            q_errors,
            h_errors,
            q_deviations,
            h_deviations,
            failures,
        });
    }

    // log-log fit of the medians over the positive epsilons
    let fit = |pick: fn(&EpsilonStats) -> f64| -> (f64, f64) {
        let pts: Vec<(f64, f64)> = per_epsilon
            .iter()
            .filter(|s| s.epsilon > 0.0 && pick(s).is_finite() && pick(s) > 0.0)
            .map(|s| (s.epsilon.ln(), pick(s).ln()))
            .collect();
        if pts.len() < 2 {
            return (f64::NAN, f64::NAN);
        }
        let n = pts.len() as f64;
        let sx: f64 = pts.iter().map(|p| p.0).sum();
        let sy: f64 = pts.iter().map(|p| p.1).sum();
        let sxx: f64 = pts.iter().map(|p| p.0 * p.0).sum();
        let sxy: f64 = pts.iter().map(|p| p.0 * p.1).sum();
        let slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
        let intercept = (sy - slope * sx) / n;
        (slope, intercept.exp())
    };
    let (exponent_q, constant_q) = fit(|s| s.q_deviation_median);
    let (exponent_h, constant_h) = fit(|s| s.h_deviation_median);

    Ok(StabilityReport {
        family: cfg.family,
        baseline_q,
        baseline_h,
        per_epsilon,
        exponent_q,
        constant_q,
        exponent_h,
        constant_h,
        failure_count,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn small_spec() -> ProblemSpec {
        let a = 0.5;
        ProblemSpec::new(
            a,
            ComplexGrid::from_fn(a, 64, |x| c(0.3 * (PI * x / a).sin(), 0.1 * x)).unwrap(),
            ComplexGrid::from_fn(0.5, 64, |x| c(0.2 * (2.0 * x).cos(), 0.05)).unwrap(),
            c(0.2, -0.1),
            BoundaryH::Value(c(0.3, 0.1)),
            1.0,
            Complex64::ZERO,
        )
        .unwrap()
    }

    fn small_config(family: PerturbationFamily) -> ExperimentConfig {
        ExperimentConfig {
            spec: small_spec(),
            n0: 0,
            n1: 16,
            epsilons: vec![1e-3, 3e-3, 1e-2],
            samples: 2,
            seed: 7,
            family,
            modes: None,
            reg: 1e-10,
            grid_n: 128,
        }
    }

    #[test]
    fn config_validation() {
        let mut cfg = small_config(PerturbationFamily::Eigenvalues);
        cfg.epsilons = vec![1e-2, 1e-3];
        assert!(cfg.validate().is_err());
        cfg.epsilons = vec![1e-3];
        cfg.samples = 0;
        assert!(cfg.validate().is_err());
        let mut cfg = small_config(PerturbationFamily::HAndQ2Constrained);
        cfg.n0 = 4;
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn mean_preservation_of_draws() {
        let cfg = small_config(PerturbationFamily::Q2MeanPreserving);
        let sub0 = Subspectrum::new(0, vec![]).unwrap();
        let sub1 = find_spectrum(&cfg.spec, 1, 4).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let draw = draw_sample(&cfg, &sub0, &sub1, 1e-2, &mut rng).unwrap();
        let gap = (draw.known.q2.integral() - cfg.spec.q2.integral()).norm();
        assert!(gap < 1e-9, "mean gap {gap}");

        let cfg = small_config(PerturbationFamily::HAndQ2Constrained);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let draw = draw_sample(&cfg, &sub0, &sub1, 1e-2, &mut rng).unwrap();
        let before = c(0.3, 0.1) + 0.5 * cfg.spec.q2.integral();
        let after = match draw.known.big_h {
            BoundaryH::Value(v) => v + 0.5 * draw.known.q2.integral(),
            BoundaryH::Infinity => unreachable!(),
        };
        assert!((after - before).norm() < 1e-9);
        // the perturbation size hits epsilon
        let dh = match draw.known.big_h {
            BoundaryH::Value(v) => (v - c(0.3, 0.1)).norm(),
            BoundaryH::Infinity => unreachable!(),
        };
        let dq = draw.known.q2.l2_distance(&cfg.spec.q2);
        assert!((dh + dq - 1e-2).abs() < 2e-4, "size {}", dh + dq);
    }

    #[test]
    fn eigenvalue_draw_hits_epsilon_ball_boundary() {
        let cfg = small_config(PerturbationFamily::Eigenvalues);
        let sub0 = Subspectrum::new(0, vec![]).unwrap();
        let sub1 = find_spectrum(&cfg.spec, 1, 8).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let eps = 5e-3;
        let draw = draw_sample(&cfg, &sub0, &sub1, eps, &mut rng).unwrap();
        let lam: f64 = sub1
            .mus()
            .iter()
            .zip(&draw.perturbed1)
            .map(|(m, p)| (m - p).norm_sqr())
            .sum::<f64>()
            .sqrt();
        assert!((lam - eps).abs() < 1e-12);
    }

    #[test]
    fn determinism_byte_identical() {
        let mut cfg = small_config(PerturbationFamily::Eigenvalues);
        cfg.epsilons = vec![1e-3];
        cfg.samples = 1;
        cfg.n1 = 6;
        let r1 = run_stability(&cfg).unwrap().to_json();
        let r2 = run_stability(&cfg).unwrap().to_json();
        assert_eq!(r1, r2);
    }

    #[test]
    fn config_json_round_trip() {
        let spec = small_spec();
        let text = format!(
            "{{\"spec\": {}, \"n1\": 10, \"epsilons\": [0.001, 0.01], \"samples\": 2, \"seed\": 3, \"family\": \"q2-mean-preserving\"}}",
            spec.to_json()
        );
        let cfg = ExperimentConfig::from_json(&text).unwrap();
        assert_eq!(cfg.n1, 10);
        assert_eq!(cfg.family, PerturbationFamily::Q2MeanPreserving);
        assert_eq!(cfg.grid_n, 256);
    }
}
