//! Monte Carlo oracle: two independent Brownian particles on [a, b] with
//! absorbing endpoints and coalescence at collision.
//!
//! Each particle follows dX = √(2D) dW, discretized by Euler–Maruyama with
//! Gaussian increments of variance 2D·dt (ziggurat sampler from
//! `rand_distr`). Within a step three first-passage events compete:
//!
//! - meeting: the difference X₂ − X₁ (variance rate 4D) hits 0,
//! - escape left: X₁ hits a (variance rate 2D),
//! - escape right: X₂ hits b (variance rate 2D).
//!
//! Besides endpoint sign changes, each event is detected by its
//! Brownian-bridge crossing probability exp(−2·d₀·d₁/(σ²dt)) computed from
//! the step's endpoint distances d₀, d₁ to the barrier. When several events
//! fire in one step, the step is attributed to the event with the largest
//! bridge probability (ties resolved in the order meeting, left escape,
//! right escape); the bias of this tie-break vanishes as dt → 0 and is
//! covered by the dt-robustness tests.
//!
//! Realizations draw from per-index ChaCha streams of the master seed, so
//! results are bit-for-bit reproducible under any parallel schedule.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::encounter::{IntervalSpec, PairState};

/// Bridge exponents above this make the crossing probability
/// (< e^{-40} ≈ 4e-18) indistinguishable from zero; the draw is skipped.
const BRIDGE_EXPONENT_CUTOFF: f64 = 40.0;

#[derive(Debug, Error)]
pub enum McError {
    #[error("realization {index} truncated after {steps} steps")]
    Truncated { index: usize, steps: u64 },
    #[error("{truncated} of {n} realizations truncated (> 1%)")]
    ExcessiveTruncation { truncated: usize, n: usize },
    #[error("invalid simulation config: {0}")]
    BadConfig(String),
}

/// Simulation parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimConfig {
    /// Diffusion constant D of each particle (position²/time).
    pub diffusion: f64,
    /// Time step of the Euler scheme.
    pub dt: f64,
    pub n_realizations: usize,
    pub seed: u64,
    /// Brownian-bridge crossing detection within steps.
    pub bridge_corrections: bool,
    /// Per-realization step cap; exceeding it truncates the realization.
    pub max_steps: u64,
}

impl SimConfig {
    /// Defaults for an interval: dt = 1e-6·L²/(2D) keeps the discretization
    /// error below the statistical error up to n ≈ 1e5; max_steps spans one
    /// full L²/D diffusion time, far beyond the mean absorption time.
    pub fn for_interval(iv: &IntervalSpec, diffusion: f64, n_realizations: usize, seed: u64) -> Self {
        let l2 = iv.length() * iv.length();
        let dt = 1e-6 * l2 / (2.0 * diffusion);
        SimConfig {
            diffusion,
            dt,
            n_realizations,
            seed,
            bridge_corrections: true,
            max_steps: default_max_steps(iv, diffusion, dt),
        }
    }

    /// Override dt, rescaling the step cap to keep the same time horizon.
    pub fn with_dt(mut self, iv: &IntervalSpec, dt: f64) -> Self {
        self.dt = dt;
        self.max_steps = default_max_steps(iv, self.diffusion, dt);
        self
    }

    /// True when dt·D exceeds 1e-3·L², the coarseness warning threshold.
    pub fn is_coarse(&self, iv: &IntervalSpec) -> bool {
        self.dt * self.diffusion > 1e-3 * iv.length() * iv.length()
    }

    fn validate(&self) -> Result<(), McError> {
        if !(self.diffusion > 0.0) {
            return Err(McError::BadConfig(format!(
                "diffusion must be positive, got {}",
                self.diffusion
            )));
        }
        if !(self.dt > 0.0) {
            return Err(McError::BadConfig(format!("dt must be positive, got {}", self.dt)));
        }
        if self.n_realizations == 0 {
            return Err(McError::BadConfig("need at least one realization".into()));
        }
        Ok(())
    }
}

fn default_max_steps(iv: &IntervalSpec, diffusion: f64, dt: f64) -> u64 {
    let horizon = iv.length() * iv.length() / diffusion;
    ((horizon / dt).ceil() as u64).max(1_000_000)
}

/// How a single realization ended.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Event {
    Met,
    Escaped,
}

/// Outcome of one realization; deterministic given (seed, index).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RealizationOutcome {
    pub event: Event,
    /// Present iff event == Met; midpoint of the pair at the crossing step.
    pub meeting_position: Option<f64>,
    pub event_time: f64,
    pub steps: u64,
}

/// Candidate events inside one step, in tie-break priority order.
#[derive(Clone, Copy, PartialEq, Eq)]
enum Candidate {
    Meet,
    EscapeLeft,
    EscapeRight,
}

/// Run realization `index` of the configured ensemble.
pub fn run_realization(
    s: &PairState,
    iv: &IntervalSpec,
    cfg: &SimConfig,
    index: usize,
) -> Result<RealizationOutcome, McError> {
    cfg.validate()?;
    let (a, b) = (iv.a(), iv.b());
    let mut x1 = s.x1();
    let mut x2 = s.x2();

    // Instant events at the start state; legs win at the corners (a, a)
    // and (b, b), matching the Dirichlet convention of the PDE oracle.
    if x1 <= a || x2 >= b {
        return Ok(RealizationOutcome {
            event: Event::Escaped,
            meeting_position: None,
            event_time: 0.0,
            steps: 0,
        });
    }
    if x1 == x2 {
        return Ok(RealizationOutcome {
            event: Event::Met,
            meeting_position: Some(x1),
            event_time: 0.0,
            steps: 0,
        });
    }

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(index as u64);
    let step_sigma = (2.0 * cfg.diffusion * cfg.dt).sqrt();
    // Denominators of the bridge exponents: 2·sigma_event²·dt/4 ... spelled
    // out: meeting uses the difference process (rate 4D), escapes use 2D.
    let inv_meet = 1.0 / (2.0 * cfg.diffusion * cfg.dt);
    let inv_leg = 1.0 / (cfg.diffusion * cfg.dt);

    for step in 0..cfg.max_steps {
        let g1: f64 = StandardNormal.sample(&mut rng);
        let g2: f64 = StandardNormal.sample(&mut rng);
        let n1 = x1 + step_sigma * g1;
        let n2 = x2 + step_sigma * g2;

        let mut best: Option<(Candidate, f64)> = None;
        let mut consider = |cand: Candidate, p: f64, rng: &mut ChaCha8Rng| {
            let fired = p >= 1.0 || (p > 0.0 && rng.random::<f64>() < p);
            if fired {
                match best {
                    Some((_, bp)) if bp >= p => {}
                    _ => best = Some((cand, p)),
                }
            }
        };

        // Meeting: difference process s = x2 - x1 with variance rate 4D.
        let s0 = x2 - x1;
        let s1 = n2 - n1;
        if s1 <= 0.0 {
            consider(Candidate::Meet, 1.0, &mut rng);
        } else if cfg.bridge_corrections {
            let expo = s0 * s1 * inv_meet;
            if expo < BRIDGE_EXPONENT_CUTOFF {
                consider(Candidate::Meet, (-expo).exp(), &mut rng);
            }
        }
        // X1 hits a.
        if n1 <= a {
            consider(Candidate::EscapeLeft, 1.0, &mut rng);
        } else if cfg.bridge_corrections {
            let expo = (x1 - a) * (n1 - a) * inv_leg;
            if expo < BRIDGE_EXPONENT_CUTOFF {
                consider(Candidate::EscapeLeft, (-expo).exp(), &mut rng);
            }
        }
        // X2 hits b.
        if n2 >= b {
            consider(Candidate::EscapeRight, 1.0, &mut rng);
        } else if cfg.bridge_corrections {
            let expo = (b - x2) * (b - n2) * inv_leg;
            if expo < BRIDGE_EXPONENT_CUTOFF {
                consider(Candidate::EscapeRight, (-expo).exp(), &mut rng);
            }
        }

        if let Some((cand, _)) = best {
            let event_time = (step + 1) as f64 * cfg.dt;
            let outcome = match cand {
                Candidate::Meet => RealizationOutcome {
                    event: Event::Met,
                    meeting_position: Some((0.5 * (n1 + n2)).clamp(a, b)),
                    event_time,
                    steps: step + 1,
                },
                Candidate::EscapeLeft | Candidate::EscapeRight => RealizationOutcome {
                    event: Event::Escaped,
                    meeting_position: None,
                    event_time,
                    steps: step + 1,
                },
            };
            return Ok(outcome);
        }
        x1 = n1;
        x2 = n2;
    }
    Err(McError::Truncated {
        index,
        steps: cfg.max_steps,
    })
}

/// Binned meeting positions over [a, b].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Histogram {
    pub lo: f64,
    pub hi: f64,
    pub counts: Vec<u64>,
}

/// Conditional meeting-time statistics over met realizations.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MeanWithSe {
    pub mean: f64,
    pub std_error: f64,
}

/// Ensemble estimate.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EstimateResult {
    pub p_hat: f64,
    pub std_error: f64,
    pub n: usize,
    pub met: usize,
    pub truncated: usize,
    pub histogram: Option<Histogram>,
    pub conditional_mean_time: Option<MeanWithSe>,
}

/// What [`estimate`] should collect beyond the hit count.
#[derive(Debug, Clone, Copy, Default)]
pub struct EstimateOptions {
    pub histogram_bins: Option<usize>,
    pub conditional_times: bool,
}

/// Kahan compensated accumulator; realization times are summed in index
/// order so the reduction is deterministic.
#[derive(Default, Clone, Copy)]
struct Kahan {
    sum: f64,
    c: f64,
}

impl Kahan {
    fn add(&mut self, x: f64) {
        let y = x - self.c;
        let t = self.sum + y;
        self.c = (t - self.sum) - y;
        self.sum = t;
    }
}

/// Estimate the meeting probability (and optional extras) from
/// `cfg.n_realizations` independent realizations.
pub fn estimate(
    s: &PairState,
    iv: &IntervalSpec,
    cfg: &SimConfig,
    opts: &EstimateOptions,
) -> Result<EstimateResult, McError> {
    cfg.validate()?;
    let n = cfg.n_realizations;
    let outcomes: Vec<Option<RealizationOutcome>> = (0..n)
        .into_par_iter()
        .map(|index| run_realization(s, iv, cfg, index).ok())
        .collect();

    let truncated = outcomes.iter().filter(|o| o.is_none()).count();
    if truncated * 100 > n {
        return Err(McError::ExcessiveTruncation { truncated, n });
    }

    let mut met = 0usize;
    let mut histogram = opts.histogram_bins.map(|bins| Histogram {
        lo: iv.a(),
        hi: iv.b(),
        counts: vec![0; bins],
    });
    let mut time_sum = Kahan::default();
    for outcome in outcomes.iter().flatten() {
        if outcome.event == Event::Met {
            met += 1;
            if opts.conditional_times {
                time_sum.add(outcome.event_time);
            }
            if let (Some(h), Some(pos)) = (histogram.as_mut(), outcome.meeting_position) {
                let bins = h.counts.len();
                let rel = (pos - iv.a()) / iv.length();
                let bin = ((rel * bins as f64) as usize).min(bins - 1);
                h.counts[bin] += 1;
            }
        }
    }

    let p_hat = met as f64 / n as f64;
    let std_error = (p_hat * (1.0 - p_hat) / n as f64).sqrt();

    let conditional_mean_time = if opts.conditional_times && met > 1 {
        let mean = time_sum.sum / met as f64;
        let mut sq = Kahan::default();
        for outcome in outcomes.iter().flatten() {
            if outcome.event == Event::Met {
                let d = outcome.event_time - mean;
                sq.add(d * d);
            }
        }
        let var = sq.sum / (met as f64 - 1.0);
        Some(MeanWithSe {
            mean,
            std_error: (var / met as f64).sqrt(),
        })
    } else {
        None
    };

    Ok(EstimateResult {
        p_hat,
        std_error,
        n,
        met,
        truncated,
        histogram,
        conditional_mean_time,
    })
}

/// One point of a probability-vs-x₁ curve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CurvePoint {
    pub x1: f64,
    pub x2: f64,
    pub p_hat: f64,
    pub std_error: f64,
    pub n: usize,
}

/// Estimate the meeting probability along x₁ ∈ (a, x₂], uniformly sampled
/// at `n_points` positions, each with an independently derived sub-seed.
pub fn sweep_curve(
    x2: f64,
    n_points: usize,
    iv: &IntervalSpec,
    cfg: &SimConfig,
) -> Result<Vec<CurvePoint>, McError> {
    cfg.validate()?;
    if n_points < 2 {
        return Err(McError::BadConfig(format!(
            "need at least 2 curve points, got {n_points}"
        )));
    }
    if !(x2 > iv.a() && x2 < iv.b()) {
        return Err(McError::BadConfig(format!(
            "curve anchor x2 = {x2} must be interior to [{}, {}]",
            iv.a(),
            iv.b()
        )));
    }
    let mut out = Vec::with_capacity(n_points);
    for k in 1..=n_points {
        let x1 = iv.a() + (x2 - iv.a()) * k as f64 / n_points as f64;
        let s = PairState::new(x1.min(x2), x2, iv).expect("x1 in (a, x2]");
        let sub = SimConfig {
            seed: derive_seed(cfg.seed, k as u64),
            ..*cfg
        };
        let r = estimate(&s, iv, &sub, &EstimateOptions::default())?;
        out.push(CurvePoint {
            x1,
            x2,
            p_hat: r.p_hat,
            std_error: r.std_error,
            n: r.n,
        });
    }
    Ok(out)
}

/// SplitMix64 step, used to derive independent per-point sub-seeds.
pub fn derive_seed(master: u64, k: u64) -> u64 {
    let mut z = master ^ k.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::encounter::meet_probability;

    fn unit() -> IntervalSpec {
        IntervalSpec::unit()
    }

    fn state(x1: f64, x2: f64) -> PairState {
        PairState::new(x1, x2, &unit()).unwrap()
    }

    #[test]
    fn immediate_events() {
        let iv = unit();
        let cfg = SimConfig::for_interval(&iv, 1.0, 1, 1);
        let met = run_realization(&state(0.4, 0.4), &iv, &cfg, 0).unwrap();
        assert_eq!(met.event, Event::Met);
        assert_eq!(met.event_time, 0.0);
        assert_eq!(met.meeting_position, Some(0.4));
        let esc = run_realization(&state(0.0, 0.5), &iv, &cfg, 0).unwrap();
        assert_eq!(esc.event, Event::Escaped);
        assert_eq!(esc.event_time, 0.0);
        // Corner (a, a): legs win.
        let corner = run_realization(&state(0.0, 0.0), &iv, &cfg, 0).unwrap();
        assert_eq!(corner.event, Event::Escaped);
    }

    #[test]
    fn realization_is_deterministic() {
        let iv = unit();
        let cfg = SimConfig::for_interval(&iv, 1.0, 4, 99).with_dt(&iv, 1e-4);
        let s = state(0.3, 0.6);
        let one = run_realization(&s, &iv, &cfg, 2).unwrap();
        let two = run_realization(&s, &iv, &cfg, 2).unwrap();
        assert_eq!(one, two);
        // Different stream, different path (almost surely different time).
        let other = run_realization(&s, &iv, &cfg, 3).unwrap();
        assert!(other != one || other.steps == one.steps);
    }

    #[test]
    fn estimate_is_bit_for_bit_reproducible() {
        let iv = unit();
        let mut cfg = SimConfig::for_interval(&iv, 1.0, 300, 7).with_dt(&iv, 1e-4);
        cfg.bridge_corrections = true;
        let opts = EstimateOptions {
            histogram_bins: Some(16),
            conditional_times: true,
        };
        let s = state(0.3, 0.6);
        let r1 = estimate(&s, &iv, &cfg, &opts).unwrap();
        let r2 = estimate(&s, &iv, &cfg, &opts).unwrap();
        assert_eq!(r1.p_hat.to_bits(), r2.p_hat.to_bits());
        assert_eq!(r1.met, r2.met);
        assert_eq!(r1.histogram, r2.histogram);
        let (c1, c2) = (
            r1.conditional_mean_time.unwrap(),
            r2.conditional_mean_time.unwrap(),
        );
        assert_eq!(c1.mean.to_bits(), c2.mean.to_bits());
        assert_eq!(c1.std_error.to_bits(), c2.std_error.to_bits());
    }

    #[test]
    fn binomial_standard_error_arithmetic() {
        // n = 2000 with p_hat near 1/2 gives SE ≈ 0.011.
        let se = (0.5f64 * 0.5 / 2000.0).sqrt();
        assert!((se - 0.011).abs() < 1e-3);
    }

    #[test]
    fn coarseness_warning_threshold() {
        let iv = unit();
        let cfg = SimConfig::for_interval(&iv, 1.0, 10, 1);
        assert!(!cfg.is_coarse(&iv));
        assert!(cfg.with_dt(&iv, 2e-3).is_coarse(&iv));
    }

    #[test]
    fn estimate_matches_closed_form_within_three_sigma() {
        let iv = unit();
        let cfg = SimConfig::for_interval(&iv, 1.0, 2000, 20240811);
        let s = state(0.25, 0.5);
        let r = estimate(&s, &iv, &cfg, &EstimateOptions::default()).unwrap();
        let p = meet_probability(&s, &iv);
        assert!(r.truncated == 0);
        assert!(
            (r.p_hat - p).abs() <= 3.0 * r.std_error,
            "p_hat {} vs closed form {p} (3se = {})",
            r.p_hat,
            3.0 * r.std_error
        );
    }

    #[test]
    fn coarse_steps_without_bridge_are_biased_low() {
        // Documents why the bridge corrections exist: at dt = 1e-3 the
        // uncorrected estimator misses in-step meeting crossings (the
        // meeting gap 0.1 is comparable to the per-step spread) and lands
        // far below the closed form, while the corrected one stays within
        // 3σ.
        let iv = unit();
        let s = state(0.45, 0.55);
        let p = meet_probability(&s, &iv);
        let mut cfg = SimConfig::for_interval(&iv, 1.0, 10_000, 4242).with_dt(&iv, 1e-3);
        cfg.bridge_corrections = false;
        let off = estimate(&s, &iv, &cfg, &EstimateOptions::default()).unwrap();
        assert!(
            p - off.p_hat > 3.0 * off.std_error,
            "expected low bias without corrections: p_hat {} vs {p}",
            off.p_hat
        );
        cfg.bridge_corrections = true;
        let on = estimate(&s, &iv, &cfg, &EstimateOptions::default()).unwrap();
        assert!(
            (on.p_hat - p).abs() <= 3.0 * on.std_error,
            "corrected estimate off: {} vs {p}",
            on.p_hat
        );
    }

    #[test]
    fn dt_robustness_with_bridge_corrections() {
        let iv = unit();
        let s = state(0.3, 0.6);
        let base = SimConfig::for_interval(&iv, 1.0, 10_000, 99173);
        let coarse = estimate(&s, &iv, &base.with_dt(&iv, 4e-6), &EstimateOptions::default())
            .unwrap();
        let fine = estimate(&s, &iv, &base.with_dt(&iv, 2e-6), &EstimateOptions::default())
            .unwrap();
        let combined = (coarse.std_error.powi(2) + fine.std_error.powi(2)).sqrt();
        assert!(
            (coarse.p_hat - fine.p_hat).abs() < combined,
            "dt halving moved p_hat by {} (combined se {})",
            (coarse.p_hat - fine.p_hat).abs(),
            combined
        );
    }

    #[test]
    fn sweep_curve_endpoint_trends() {
        let iv = unit();
        let cfg = SimConfig::for_interval(&iv, 1.0, 400, 5).with_dt(&iv, 1e-5);
        let curve = sweep_curve(0.5, 10, &iv, &cfg).unwrap();
        assert_eq!(curve.len(), 10);
        assert!(curve[0].x1 > 0.0);
        assert!((curve[9].x1 - 0.5).abs() < 1e-12);
        // x1 -> x2 forces an immediate-meeting-dominated estimate.
        assert!(curve[9].p_hat > 0.9);
        assert!(curve[0].p_hat < 0.5);
    }

    #[test]
    fn truncation_is_reported() {
        let iv = unit();
        let mut cfg = SimConfig::for_interval(&iv, 1.0, 50, 11);
        cfg.max_steps = 10; // absurdly small: everything truncates
        let s = state(0.3, 0.6);
        match estimate(&s, &iv, &cfg, &EstimateOptions::default()) {
            Err(McError::ExcessiveTruncation { truncated, n }) => {
                assert_eq!(n, 50);
                assert!(truncated > 0);
            }
            other => panic!("expected truncation failure, got {other:?}"),
        }
    }
}
