use serde::Serialize;

use super::{cubic_q, BistableModel, Scaling};
use crate::field::Point;

/// One checked inequality.
#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    /// Failing a blocking check means the solvers cannot be run on the model.
    pub blocking: bool,
    /// Sample with the smallest margin, and that margin (negative on failure).
    pub worst_point: Option<Point>,
    pub worst_margin: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ValidationReport {
    pub checks: Vec<Check>,
    /// `max |∇c^ε| · ε^k` over the samples (finite differences). Bounded in
    /// ε when the velocity family has the expected gradient growth; reported,
    /// not judged.
    pub gradient_growth: f64,
    /// `max |D²c^ε| · ε^{2k}` over the samples, same caveat.
    pub hessian_growth: f64,
}

impl ValidationReport {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    /// True when no blocking check failed.
    pub fn runnable(&self) -> bool {
        self.checks.iter().all(|c| c.passed || !c.blocking)
    }

    pub fn failed(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| !c.passed)
    }

    pub fn get(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }
}

/// Tracks the worst margin of a pointwise inequality `margin(x) >= 0`.
struct Tracker {
    name: &'static str,
    blocking: bool,
    worst: Option<(Point, f64)>,
}

impl Tracker {
    fn new(name: &'static str, blocking: bool) -> Self {
        Tracker {
            name,
            blocking,
            worst: None,
        }
    }

    fn see(&mut self, x: Point, margin: f64) {
        let replace = match self.worst {
            None => true,
            // NaN margins always win so they surface as failures
            Some((_, w)) => margin < w || margin.is_nan(),
        };
        if replace {
            self.worst = Some((x, margin));
        }
    }

    fn finish(self, strict: bool) -> Check {
        let (pt, m) = match self.worst {
            Some((p, m)) => (Some(p), m),
            None => (None, 0.0),
        };
        let passed = if strict { m > 0.0 } else { m >= 0.0 };
        Check {
            name: self.name,
            passed: passed || pt.is_none(),
            blocking: self.blocking,
            worst_point: pt,
            worst_margin: m,
        }
    }
}

fn scalar_check(name: &'static str, blocking: bool, margin: f64, strict: bool) -> Check {
    let passed = if strict { margin > 0.0 } else { margin >= 0.0 };
    Check {
        name,
        passed,
        blocking,
        worst_point: None,
        worst_margin: margin,
    }
}

/// Checks the structure conditions of the bistable model on `samples`.
///
/// Speeds are compared in front-speed units, so under scaling two the
/// bounds apply to `c^ε / ε`.
pub fn validate_assumptions(model: &BistableModel, samples: &[Point]) -> ValidationReport {
    let v = &model.velocity;
    let eps = model.epsilon;
    let rho = v.rho;
    let mut checks = vec![
        scalar_check("rho positive", true, rho, true),
        scalar_check("epsilon positive", true, eps, true),
        scalar_check(
            "mollification exponent in range",
            true,
            match model.scaling {
                Scaling::One => (v.k).min(0.5 - v.k),
                Scaling::Two => (v.k).min(1.0 - v.k - f64::EPSILON),
            },
            false,
        ),
    ];

    let mut lower_bound = Tracker::new("lower speed bound 2 rho <= n1", true);
    let mut ordering = Tracker::new("speed ordering n1 < n2", true);
    let mut upper_bound = Tracker::new("upper speed bound n2 <= 2 (1 - rho)", false);
    let mut between = Tracker::new("velocity between n1 and n2", true);
    let mut roots = Tracker::new("root ordering rho < m_o < 1 - rho", false);
    let mut monotone = Tracker::new("wave monotone q_r > 0", true);
    let mut stable = Tracker::new("stable roots f_q(+-1) > 0", true);
    let mut envelopes = Tracker::new("envelope ordering", true);

    let rs: Vec<f64> = (-60..=60).map(|k| k as f64 * 0.25).collect();
    let snap = 0.0;
    for &x in samples {
        let n1 = v.n1_at(x);
        let n2 = v.n2_at(x);
        lower_bound.see(x, n1 - 2.0 * rho);
        ordering.see(x, n2 - n1);
        upper_bound.see(x, 2.0 * (1.0 - rho) - n2);
        let speed = model.front_speed(x);
        between.see(x, (speed - n1).min(n2 - speed));

        let m_o = 0.5 * speed;
        match model.scaling {
            Scaling::One => roots.see(x, (m_o - rho).min(1.0 - rho - m_o)),
            Scaling::Two => {
                let m = model.unstable_root(x);
                roots.see(x, m.min(1.0 - m));
            }
        }

        let c = model.c_eps(x);
        if c.abs() >= 2.0 || !c.is_finite() {
            monotone.see(x, -1.0);
        } else {
            let slope = rs
                .iter()
                .map(|&r| model.wave_slope(r, x))
                .fold(f64::INFINITY, f64::min);
            // tanh saturates in floating point far out; check the core only
            monotone.see(x, slope.min(model.wave_slope(0.0, x)));
        }
        stable.see(x, cubic_q(1.0, c).min(cubic_q(-1.0, c)));

        let (lo, hi) = model.one_sided_velocities(x);
        let (a_lo, a_hi) = v.alpha_envelopes(x, snap);
        let chain = [
            lo - n1,
            speed - lo,
            hi - speed,
            n2 - hi,
            a_lo - lo,
            a_hi - a_lo,
            hi - a_hi,
        ];
        // the blends are convex combinations; allow their rounding
        let slack = 4.0 * f64::EPSILON * n2.abs().max(1.0);
        envelopes.see(x, chain.iter().copied().fold(f64::INFINITY, f64::min) + slack);
    }

    checks.push(lower_bound.finish(false));
    checks.push(ordering.finish(true));
    checks.push(upper_bound.finish(false));
    checks.push(between.finish(false));
    checks.push(roots.finish(false));
    checks.push(monotone.finish(true));
    checks.push(stable.finish(true));
    checks.push(envelopes.finish(false));

    let (gradient_growth, hessian_growth) = derivative_growth(model, samples);
    ValidationReport {
        checks,
        gradient_growth,
        hessian_growth,
    }
}

fn derivative_growth(model: &BistableModel, samples: &[Point]) -> (f64, f64) {
    let band = model.epsilon.powf(model.velocity.k);
    let step = 1e-3 * band.max(1e-6);
    let c = |x: Point| model.front_speed(x);
    let mut g = 0.0_f64;
    let mut hmax = 0.0_f64;
    for &x in samples {
        let c0 = c(x);
        for axis in 0..2 {
            let mut xp = x;
            let mut xm = x;
            xp[axis] += step;
            xm[axis] -= step;
            let (cp, cm) = (c(xp), c(xm));
            g = g.max(((cp - cm) / (2.0 * step)).abs());
            hmax = hmax.max(((cp - 2.0 * c0 + cm) / (step * step)).abs());
        }
    }
    (g * band, hmax * band * band)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Interface, VelocityModel};

    fn samples() -> Vec<Point> {
        let mut s = Vec::new();
        for i in -20..=20 {
            for j in -5..=5 {
                s.push([i as f64 * 0.05, j as f64 * 0.1]);
            }
        }
        s
    }

    fn model(n1: f64, n2: f64, rho: f64) -> BistableModel {
        let v = VelocityModel::piecewise_constant(
            n1,
            n2,
            rho,
            Interface::Hyperplane {
                normal: [1.0, 0.0],
                offset: 0.0,
            },
            0.25,
        )
        .unwrap();
        BistableModel::new(v, 0.02, Scaling::One).unwrap()
    }

    #[test]
    fn default_example_passes() {
        for &eps in &[0.1, 0.02, 0.001] {
            let m = model(1.0, 1.5, 0.25).with_epsilon(eps).unwrap();
            let r = validate_assumptions(&m, &samples());
            assert!(r.all_passed(), "{:?}", r.failed().collect::<Vec<_>>());
        }
    }

    #[test]
    fn lower_bound_failure() {
        let r = validate_assumptions(&model(0.1, 1.5, 0.25), &samples());
        let c = r.get("lower speed bound 2 rho <= n1").unwrap();
        assert!(!c.passed && c.blocking);
        assert!(!r.runnable());
    }

    #[test]
    fn equal_speeds_fail_ordering() {
        let r = validate_assumptions(&model(1.0, 1.0, 0.25), &samples());
        assert!(!r.get("speed ordering n1 < n2").unwrap().passed);
    }

    #[test]
    fn saturated_upper_speed_is_reported_but_runnable() {
        let r = validate_assumptions(&model(1.0, 2.0, 0.05), &samples());
        assert!(!r.get("upper speed bound n2 <= 2 (1 - rho)").unwrap().passed);
        assert!(r.runnable());
    }

    #[test]
    fn growth_rates_are_bounded_along_a_ladder() {
        let mut rates = Vec::new();
        for &eps in &[0.08, 0.04, 0.02, 0.01] {
            let m = model(1.0, 1.5, 0.25).with_epsilon(eps).unwrap();
            rates.push(validate_assumptions(&m, &samples()).gradient_growth);
        }
        let (lo, hi) = rates
            .iter()
            .fold((f64::INFINITY, 0.0_f64), |(a, b), &r| (a.min(r), b.max(r)));
        assert!(hi / lo < 1.5, "{rates:?}");
    }
}
