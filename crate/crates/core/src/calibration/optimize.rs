use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use super::surface::{fit_quadratic, CostSample, QuadraticSurface};
use crate::error::{Error, Result};

/// Anything that can price a parameter pair for a given test.
pub trait CostEvaluator: Sync {
    fn evaluate(&self, test: &str, c: f64, g: f64) -> Result<f64>;
}

impl<F> CostEvaluator for F
where
    F: Fn(&str, f64, f64) -> Result<f64> + Sync,
{
    fn evaluate(&self, test: &str, c: f64, g: f64) -> Result<f64> {
        self(test, c, g)
    }
}

/// Axis-aligned box in (C_VVVV, G_c).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ParameterRange {
    pub c: (f64, f64),
    pub g: (f64, f64),
}

impl ParameterRange {
    pub fn new(c: (f64, f64), g: (f64, f64)) -> Result<Self> {
        for (name, (lo, hi)) in [("C_VVVV", c), ("G_c", g)] {
            if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                return Err(Error::Parameter(format!("{name} range [{lo}, {hi}] is empty")));
            }
        }
        Ok(Self { c, g })
    }

    pub fn contains(&self, c: f64, g: f64) -> bool {
        (self.c.0..=self.c.1).contains(&c) && (self.g.0..=self.g.1).contains(&g)
    }

    /// Equidistant n × n grid including the corners.
    pub fn grid(&self, n: usize) -> Vec<(f64, f64)> {
        let axis = |(lo, hi): (f64, f64)| -> Vec<f64> {
            (0..n).map(|k| lo + (hi - lo) * k as f64 / (n - 1) as f64).collect()
        };
        let (cs, gs) = (axis(self.c), axis(self.g));
        cs.iter().flat_map(|c| gs.iter().map(move |g| (*c, *g))).collect()
    }

    /// A box `factor` times as wide, centred on `center` as far as it can be
    /// without leaving `self`.
    pub fn shrink_around(&self, center: (f64, f64), factor: f64) -> Self {
        let axis = |(lo, hi): (f64, f64), x: f64| {
            let half = 0.5 * factor * (hi - lo);
            let mid = x.clamp(lo + half, hi - half);
            (mid - half, mid + half)
        };
        Self { c: axis(self.c, center.0), g: axis(self.g, center.1) }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationOptions {
    /// Grid size per round.
    pub grids: Vec<usize>,
    pub shrink: f64,
    pub workers: usize,
}

impl Default for CalibrationOptions {
    fn default() -> Self {
        Self { grids: vec![3, 3, 5], shrink: 0.5, workers: 1 }
    }
}

impl CalibrationOptions {
    pub fn validate(&self) -> Result<()> {
        if self.grids.is_empty() || self.grids.iter().any(|n| *n < 3) {
            return Err(Error::Parameter(format!("each round needs a grid of at least 3×3, got {:?}", self.grids)));
        }
        if !(self.shrink > 0.0 && self.shrink <= 1.0) {
            return Err(Error::Parameter(format!("shrink factor must lie in (0, 1], got {}", self.shrink)));
        }
        if self.workers == 0 {
            return Err(Error::Parameter("worker count must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundReport {
    pub range: ParameterRange,
    pub samples: Vec<CostSample>,
    /// Grid points whose evaluation failed, with the reason.
    pub failures: Vec<(f64, f64, String)>,
    pub surface: QuadraticSurface,
    /// Minimizer of the surface, or the best sample if the surface has none.
    pub optimum: (f64, f64),
    pub from_surface: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestCalibration {
    pub test: String,
    pub rounds: Vec<RoundReport>,
    pub optimum: (f64, f64),
    /// Final minimizer outside the last sampled box (or not a minimizer).
    pub boundary_warning: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationResult {
    pub tests: Vec<TestCalibration>,
    pub optimum: (f64, f64),
    pub flagged: bool,
}

/// Evaluates all points, in parallel when more than one worker is allowed.
/// Results come back in input order.
fn evaluate_batch(
    evaluator: &dyn CostEvaluator,
    test: &str,
    points: &[(f64, f64)],
    workers: usize,
) -> Vec<Result<f64>> {
    let next = AtomicUsize::new(0);
    let slots: Mutex<Vec<Option<Result<f64>>>> = Mutex::new((0..points.len()).map(|_| None).collect());
    let work = || loop {
        let i = next.fetch_add(1, Ordering::Relaxed);
        let Some(&(c, g)) = points.get(i) else { break };
        let r = evaluator.evaluate(test, c, g).and_then(|v| {
            if v.is_finite() && v >= 0.0 {
                Ok(v)
            } else {
                Err(Error::Domain(format!("cost {v} at ({c}, {g}) is not a non-negative number")))
            }
        });
        slots.lock().unwrap()[i] = Some(r);
    };
    let threads = workers.min(points.len()).max(1);
    if threads == 1 {
        work();
    } else {
        std::thread::scope(|s| {
            for _ in 0..threads {
                s.spawn(&work);
            }
        });
    }
    slots.into_inner().unwrap().into_iter().map(|r| r.expect("every point evaluated")).collect()
}

fn run_round(
    evaluator: &dyn CostEvaluator,
    test: &str,
    range: ParameterRange,
    n: usize,
    workers: usize,
) -> Result<RoundReport> {
    let points = range.grid(n);
    let mut samples = Vec::new();
    let mut failures = Vec::new();
    for (&(c, g), r) in points.iter().zip(evaluate_batch(evaluator, test, &points, workers)) {
        match r {
            Ok(cost) => samples.push(CostSample { c, g, cost }),
            Err(e) => {
                log::warn!("{test}: evaluation at C = {c}, G = {g} failed: {e}");
                failures.push((c, g, e.to_string()));
            }
        }
    }
    if samples.len() < 6 {
        return Err(Error::InsufficientData(format!(
            "{test}: only {} of {} grid evaluations succeeded",
            samples.len(),
            points.len()
        )));
    }
    let surface = fit_quadratic(&samples)?;
    let (optimum, from_surface) = match surface.argmin() {
        Ok(p) => (p, true),
        Err(e) => {
            log::warn!("{test}: {e}; continuing from the best sample");
            let best = samples.iter().min_by(|a, b| a.cost.total_cmp(&b.cost)).unwrap();
            ((best.c, best.g), false)
        }
    };
    Ok(RoundReport { range, samples, failures, surface, optimum, from_surface })
}

/// Grid-refinement loop for one test.
pub fn calibrate_test(
    evaluator: &dyn CostEvaluator,
    test: &str,
    initial: ParameterRange,
    options: &CalibrationOptions,
) -> Result<TestCalibration> {
    options.validate()?;
    let mut range = initial;
    let mut rounds: Vec<RoundReport> = Vec::new();
    for (k, &n) in options.grids.iter().enumerate() {
        if k > 0 {
            range = range.shrink_around(rounds[k - 1].optimum, options.shrink);
        }
        let report = run_round(evaluator, test, range, n, options.workers)?;
        log::info!(
            "{test} round {}: optimum C = {:.6}, G = {:.6e}",
            k + 1,
            report.optimum.0,
            report.optimum.1
        );
        rounds.push(report);
    }
    let last = rounds.last().unwrap();
    let boundary_warning = !last.from_surface || !last.range.contains(last.optimum.0, last.optimum.1);
    if boundary_warning {
        log::warn!("{test}: final optimum {:?} is not an interior minimum of the last grid", last.optimum);
    }
    Ok(TestCalibration { test: test.to_string(), optimum: last.optimum, rounds, boundary_warning })
}

/// Calibrates every test and averages the per-test optima.
pub fn calibrate(
    tests: &[&str],
    evaluator: &dyn CostEvaluator,
    initial: ParameterRange,
    options: &CalibrationOptions,
) -> Result<CalibrationResult> {
    let tests = tests
        .iter()
        .map(|t| calibrate_test(evaluator, t, initial, options))
        .collect::<Result<Vec<_>>>()?;
    let optimum = average_optima(&tests.iter().map(|t| t.optimum).collect::<Vec<_>>())?;
    let flagged = tests.iter().any(|t| t.boundary_warning);
    Ok(CalibrationResult { tests, optimum, flagged })
}

pub fn average_optima(optima: &[(f64, f64)]) -> Result<(f64, f64)> {
    if optima.is_empty() {
        return Err(Error::InsufficientData("no optima to average".into()));
    }
    let n = optima.len() as f64;
    Ok((optima.iter().map(|p| p.0).sum::<f64>() / n, optima.iter().map(|p| p.1).sum::<f64>() / n))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    const TRUTH: (f64, f64) = (2057.0, 0.0923);

    fn bowl(c: f64, g: f64) -> f64 {
        let (x, y) = ((c - TRUTH.0) / 500.0, (g - TRUTH.1) / 0.05);
        3.0 * x * x + 2.0 * y * y + 1.5 * x * y + 0.4
    }

    fn range() -> ParameterRange {
        ParameterRange::new((1000.0, 3500.0), (0.02, 0.3)).unwrap()
    }

    fn rel(a: (f64, f64), b: (f64, f64)) -> f64 {
        ((a.0 - b.0) / b.0).abs().max(((a.1 - b.1) / b.1).abs())
    }

    #[test]
    fn exact_bowl_is_found_in_the_first_round() {
        let t = calibrate_test(&|_: &str, c, g| Ok(bowl(c, g)), "HC", range(), &CalibrationOptions::default()).unwrap();
        assert_eq!(t.rounds.len(), 3);
        assert_eq!(t.rounds[0].samples.len(), 9);
        assert_eq!(t.rounds[2].samples.len(), 25);
        for r in &t.rounds {
            assert!(rel(r.optimum, TRUTH) < 1e-6);
        }
        assert!(!t.boundary_warning);
        // Rounds shrink by half inside the previous box.
        let (a, b) = (t.rounds[0].range, t.rounds[1].range);
        assert!(((b.c.1 - b.c.0) - 0.5 * (a.c.1 - a.c.0)).abs() < 1e-9);
        assert!(b.c.0 >= a.c.0 && b.c.1 <= a.c.1 && b.g.0 >= a.g.0 && b.g.1 <= a.g.1);
    }

    #[test]
    fn rescaled_cost_gives_the_same_optimum() {
        let skew = |c: f64, g: f64| bowl(c, g) + 0.05 * ((c - 2000.0) / 500.0).powi(3);
        let opts = CalibrationOptions::default();
        let a = calibrate_test(&|_: &str, c, g| Ok(skew(c, g)), "HB", range(), &opts).unwrap();
        let b = calibrate_test(&|_: &str, c, g| Ok(37.5 * skew(c, g)), "HB", range(), &opts).unwrap();
        assert!(rel(a.optimum, b.optimum) < 1e-9);
    }

    #[test]
    fn parallel_matches_serial() {
        let eval = |_: &str, c: f64, g: f64| Ok(bowl(c, g) + 0.01 * (c / 300.0).sin());
        let serial = calibrate_test(&eval, "HA", range(), &CalibrationOptions::default()).unwrap();
        let opts = CalibrationOptions { workers: 4, ..Default::default() };
        let parallel = calibrate_test(&eval, "HA", range(), &opts).unwrap();
        assert_eq!(serial, parallel);
    }

    #[test]
    fn seeded_noise_stays_within_five_percent() {
        for seed in 0..20u64 {
            let noisy = move |_: &str, c: f64, g: f64| {
                let key = seed ^ c.to_bits().rotate_left(17) ^ g.to_bits();
                let mut rng = ChaCha8Rng::seed_from_u64(key);
                Ok(bowl(c, g) * (1.0 + 0.01 * rng.random_range(-1.0..1.0)))
            };
            let t = calibrate_test(&noisy, "H45", range(), &CalibrationOptions::default()).unwrap();
            assert!(rel(t.optimum, TRUTH) < 0.05, "seed {seed}: {:?}", t.optimum);
        }
    }

    #[test]
    fn failed_samples_are_tolerated_down_to_six() {
        let flaky = |_: &str, c: f64, g: f64| {
            if c == 1000.0 && g == 0.02 {
                Err(Error::Convergence("synthetic".into()))
            } else {
                Ok(bowl(c, g))
            }
        };
        let t = calibrate_test(&flaky, "HC", range(), &CalibrationOptions::default()).unwrap();
        assert_eq!(t.rounds[0].failures.len(), 1);
        assert!(rel(t.optimum, TRUTH) < 1e-6);
        let broken = |_: &str, c: f64, _: f64| if c > 1500.0 { Err(Error::Convergence("x".into())) } else { Ok(1.0) };
        assert!(matches!(
            calibrate_test(&broken, "HC", range(), &CalibrationOptions::default()),
            Err(Error::InsufficientData(_))
        ));
    }

    #[test]
    fn minimum_outside_the_box_is_flagged() {
        let t = calibrate_test(&|_: &str, c, g| Ok(bowl(c - 3000.0, g)), "HC", range(), &CalibrationOptions::default()).unwrap();
        assert!(t.boundary_warning);
        let all = calibrate(&["HC", "HB"], &|_: &str, c, g| Ok(bowl(c - 3000.0, g)), range(), &CalibrationOptions::default()).unwrap();
        assert!(all.flagged);
    }

    #[test]
    fn per_test_optima_average() {
        let (c, g) = average_optima(&[(2118.0, 8.30e-2), (1958.0, 8.62e-2), (2040.0, 8.55e-2), (2112.0, 11.45e-2)]).unwrap();
        assert_eq!(c.round(), 2057.0);
        assert!((g - 9.23e-2).abs() < 5e-5);
        let per_test = |t: &str, c: f64, g: f64| {
            let shift = if t == "A" { 100.0 } else { -100.0 };
            Ok(bowl(c - shift, g))
        };
        let r = calibrate(&["A", "B"], &per_test, range(), &CalibrationOptions::default()).unwrap();
        assert!(rel(r.optimum, TRUTH) < 1e-6 && !r.flagged);
    }

    #[test]
    fn options_are_validated() {
        let bad = CalibrationOptions { grids: vec![2], ..Default::default() };
        assert!(calibrate_test(&|_: &str, c, g| Ok(bowl(c, g)), "HC", range(), &bad).is_err());
        assert!(ParameterRange::new((2.0, 1.0), (0.0, 1.0)).is_err());
    }
}
