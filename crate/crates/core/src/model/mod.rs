//! The bistable reaction term, its velocity family with a jump across a fixed
//! hypersurface, the explicit traveling waves, and the speed fields that the
//! level-set solvers consume.

mod speed;
mod validate;
mod wave;

pub use speed::{SpeedMode, Velocity};
pub use validate::{validate_assumptions, Check, ValidationReport};
pub use wave::{wave_residual, wave_residual_fd};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::expr::Expr;
use crate::field::Point;

/// The hypersurface across which the limiting speed jumps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Interface {
    /// `{x : normal · x = offset}`, positive on the side the normal points to.
    Hyperplane { normal: Point, offset: f64 },
    /// `{x : |x - center| = radius}`, positive outside.
    Circle { center: Point, radius: f64 },
}

impl Interface {
    /// Signed distance to the hypersurface.
    pub fn signed_distance(&self, x: Point) -> f64 {
        match self {
            Interface::Hyperplane { normal, offset } => {
                let n = normal[0].hypot(normal[1]);
                (normal[0] * x[0] + normal[1] * x[1] - offset) / n
            }
            Interface::Circle { center, radius } => (x[0] - center[0]).hypot(x[1] - center[1]) - radius,
        }
    }

    fn check(&self) -> Result<()> {
        match self {
            Interface::Hyperplane { normal, offset } => {
                if !(normal[0].hypot(normal[1]) > 0.0) || !offset.is_finite() {
                    return Err(Error::InvalidModel("hyperplane needs a nonzero normal".into()));
                }
            }
            Interface::Circle { radius, center } => {
                if !(*radius > 0.0) || !center.iter().all(|c| c.is_finite()) {
                    return Err(Error::InvalidModel("circle needs a positive radius".into()));
                }
            }
        }
        Ok(())
    }
}

fn default_rho() -> f64 {
    0.05
}
fn default_k() -> f64 {
    0.25
}

/// Speeds `n1` (on the negative side of the interface) and `n2` (positive
/// side), the lower bound `rho` and the mollification exponent `k`.
///
/// Construction only checks that the data are well formed; the structural
/// inequalities are checked pointwise by [`validate_assumptions`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VelocityModel {
    pub n1: Expr,
    pub n2: Expr,
    #[serde(default = "default_rho")]
    pub rho: f64,
    pub interface: Interface,
    #[serde(default = "default_k")]
    pub k: f64,
}

impl VelocityModel {
    pub fn new(n1: Expr, n2: Expr, rho: f64, interface: Interface, k: f64) -> Result<Self> {
        let m = VelocityModel {
            n1,
            n2,
            rho,
            interface,
            k,
        };
        m.check()?;
        Ok(m)
    }

    /// Constant speeds on either side of `interface`.
    pub fn piecewise_constant(n1: f64, n2: f64, rho: f64, interface: Interface, k: f64) -> Result<Self> {
        Self::new(Expr::constant(n1), Expr::constant(n2), rho, interface, k)
    }

    pub(crate) fn check(&self) -> Result<()> {
        if !(self.rho > 0.0) || !self.rho.is_finite() {
            return Err(Error::InvalidModel(format!("rho must be positive, got {}", self.rho)));
        }
        if !(self.k >= 0.0) || !(self.k < 1.0) {
            return Err(Error::InvalidModel(format!("k must lie in [0, 1), got {}", self.k)));
        }
        self.interface.check()
    }

    pub fn dtilde(&self, x: Point) -> f64 {
        self.interface.signed_distance(x)
    }

    pub fn n1_at(&self, x: Point) -> f64 {
        self.n1.eval(x)
    }

    pub fn n2_at(&self, x: Point) -> f64 {
        self.n2.eval(x)
    }

    /// Lower and upper semicontinuous envelopes of the limiting speed.
    /// Points within `snap` of the interface see the whole interval
    /// `[n1, n2]`.
    pub fn alpha_envelopes(&self, x: Point, snap: f64) -> (f64, f64) {
        let d = self.dtilde(x);
        let (n1, n2) = (self.n1_at(x), self.n2_at(x));
        if d.abs() <= snap {
            (n1, n2)
        } else if d < 0.0 {
            (n1, n1)
        } else {
            (n2, n2)
        }
    }

    /// Largest speed over a set of sample points (upper envelope).
    pub fn max_speed(&self, samples: impl IntoIterator<Item = Point>) -> f64 {
        samples
            .into_iter()
            .map(|x| self.n1_at(x).max(self.n2_at(x)))
            .fold(0.0, f64::max)
    }
}

/// Which singular-perturbation scaling the reaction-diffusion problem uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scaling {
    /// `u_t - eps Δu + f(u)/eps = 0`, limit front speed `α`.
    #[default]
    One,
    /// `u_t - Δu + f(u)/eps² = 0` with wave speed `eps·α`, limit front speed
    /// curvature minus `α`.
    Two,
}

/// A velocity model together with the small parameter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BistableModel {
    #[serde(flatten)]
    pub velocity: VelocityModel,
    pub epsilon: f64,
    #[serde(default)]
    pub scaling: Scaling,
}

/// C² step from 0 (t ≤ 0) to 1 (t ≥ 1).
fn smootherstep(t: f64) -> f64 {
    let t = t.clamp(0.0, 1.0);
    t * t * t * (t * (6.0 * t - 15.0) + 10.0)
}

impl BistableModel {
    pub fn new(velocity: VelocityModel, epsilon: f64, scaling: Scaling) -> Result<Self> {
        let m = BistableModel {
            velocity,
            epsilon,
            scaling,
        };
        m.check()?;
        Ok(m)
    }

    pub fn check(&self) -> Result<()> {
        self.velocity.check()?;
        if !(self.epsilon > 0.0) || !self.epsilon.is_finite() {
            return Err(Error::InvalidModel(format!(
                "epsilon must be positive, got {}",
                self.epsilon
            )));
        }
        if self.scaling == Scaling::One && self.velocity.k > 0.5 {
            return Err(Error::InvalidModel(format!(
                "k must lie in [0, 1/2] under scaling one, got {}",
                self.velocity.k
            )));
        }
        Ok(())
    }

    /// Same model with a different `epsilon`.
    pub fn with_epsilon(&self, epsilon: f64) -> Result<Self> {
        Self::new(self.velocity.clone(), epsilon, self.scaling)
    }

    /// Interpolated speed between `n1` and `n2` over a band of width
    /// `eps^k` around the interface, in limit-speed units.
    fn blended_speed(&self, x: Point) -> f64 {
        let v = &self.velocity;
        let t = (v.dtilde(x) / self.epsilon.powf(v.k)).tanh();
        0.5 * v.n1_at(x) * (1.0 - t) + 0.5 * v.n2_at(x) * (1.0 + t)
    }

    /// Traveling-wave velocity `c^ε(x)` entering the reaction term. Under
    /// scaling two this is `ε` times the blended speed.
    pub fn c_eps(&self, x: Point) -> f64 {
        match self.scaling {
            Scaling::One => self.blended_speed(x),
            Scaling::Two => self.epsilon * self.blended_speed(x),
        }
    }

    /// Front speed implied by `c^ε`: `c^ε` itself under scaling one and
    /// `c^ε / ε` under scaling two.
    pub fn front_speed(&self, x: Point) -> f64 {
        self.blended_speed(x)
    }

    /// The unstable zero `m_o^ε = c^ε / 2` of the reaction term.
    pub fn unstable_root(&self, x: Point) -> f64 {
        0.5 * self.c_eps(x)
    }

    /// Continuous lower and upper modifications of the front speed: the lower
    /// one is pulled to `n1` on `{d̃ ≤ ε}`, the upper one to `n2` on
    /// `{d̃ ≥ -ε}`, with C² transitions over the next `ε`. Values are in
    /// front-speed units.
    pub fn one_sided_velocities(&self, x: Point) -> (f64, f64) {
        let v = &self.velocity;
        let e = self.epsilon;
        let d = v.dtilde(x);
        let c = self.front_speed(x);
        let eta = smootherstep((d + 2.0 * e) / e);
        let xi = 1.0 - smootherstep((d - e) / e);
        let lower = xi * v.n1_at(x) + (1.0 - xi) * c;
        let upper = eta * v.n2_at(x) + (1.0 - eta) * c;
        (lower, upper)
    }

    /// The cubic `2 (q - c^ε/2)(q² - 1)`.
    pub fn f_eps(&self, q: f64, x: Point) -> f64 {
        cubic(q, self.c_eps(x))
    }

    /// `∂f/∂q`.
    pub fn f_eps_q(&self, q: f64, x: Point) -> f64 {
        cubic_q(q, self.c_eps(x))
    }

    /// Phase shift `½ ln((2 + c)/(2 - c))` that puts the unstable zero at r = 0.
    pub fn wave_shift(&self, x: Point) -> f64 {
        wave_shift(self.c_eps(x))
    }

    /// Traveling wave `tanh(r + r^ε(x))` with `x` frozen.
    pub fn traveling_wave(&self, r: f64, x: Point) -> f64 {
        (r + self.wave_shift(x)).tanh()
    }

    /// `∂_r` of the traveling wave, `1 - q²`, evaluated as `sech²` so it
    /// stays positive where `q` rounds to ±1.
    pub fn wave_slope(&self, r: f64, x: Point) -> f64 {
        let ch = (r + self.wave_shift(x)).cosh();
        1.0 / (ch * ch)
    }

    /// Lipschitz bound of `f^ε(·, x)` on `[-1, 1]` over the given points,
    /// from a 201-point `q` sample.
    pub fn reaction_lipschitz(&self, points: impl IntoIterator<Item = Point>) -> f64 {
        let mut lip = 0.0_f64;
        for x in points {
            let c = self.c_eps(x);
            for s in 0..=200 {
                let q = -1.0 + s as f64 * 0.01;
                lip = lip.max(cubic_q(q, c).abs());
            }
        }
        lip
    }
}

pub(crate) fn cubic(q: f64, c: f64) -> f64 {
    2.0 * (q - 0.5 * c) * (q * q - 1.0)
}

pub(crate) fn cubic_q(q: f64, c: f64) -> f64 {
    6.0 * q * q - 2.0 * c * q - 2.0
}

pub(crate) fn wave_shift(c: f64) -> f64 {
    0.5 * ((2.0 + c) / (2.0 - c)).ln()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn plane() -> Interface {
        Interface::Hyperplane {
            normal: [1.0, 0.0],
            offset: 0.0,
        }
    }

    fn model(n1: f64, n2: f64, eps: f64, k: f64) -> BistableModel {
        let v = VelocityModel::piecewise_constant(n1, n2, 0.25, plane(), k).unwrap();
        BistableModel::new(v, eps, Scaling::One).unwrap()
    }

    #[test]
    fn c_eps_examples() {
        let m = model(1.0, 1.5, 0.01, 0.25);
        let w = 0.01_f64.powf(0.25);
        assert!((m.c_eps([0.0, 0.0]) - 1.25).abs() < 1e-15);
        assert!((m.c_eps([10.0 * w, 0.0]) - 1.5).abs() < 1e-8);
        let expected = 1.0 + 0.5 * (1.0 + 1.0_f64.tanh()) / 2.0;
        assert!((m.c_eps([w, 0.0]) - expected).abs() < 1e-14);
        assert!((expected - 1.440).abs() < 1e-3);
    }

    #[test]
    fn scaling_two_multiplies_by_epsilon() {
        let v = VelocityModel::piecewise_constant(1.0, 1.5, 0.25, plane(), 0.5).unwrap();
        let m = BistableModel::new(v, 0.05, Scaling::Two).unwrap();
        let x = [0.3, 0.0];
        assert!((m.c_eps(x) - 0.05 * m.front_speed(x)).abs() < 1e-15);
        assert!(m.c_eps(x) > 0.05 * 1.0 && m.c_eps(x) < 0.05 * 1.5);
    }

    #[test]
    fn envelopes() {
        let v = VelocityModel::piecewise_constant(1.0, 2.0, 0.25, plane(), 0.25).unwrap();
        assert_eq!(v.alpha_envelopes([-1.0, 0.0], 0.01), (1.0, 1.0));
        assert_eq!(v.alpha_envelopes([0.0, 0.0], 0.01), (1.0, 2.0));
        assert_eq!(v.alpha_envelopes([0.3, 0.0], 0.01), (2.0, 2.0));
    }

    #[test]
    fn one_sided_examples() {
        let eps = 0.02;
        let m = model(1.0, 1.5, eps, 0.25);
        let at = |d: f64| [d, 0.0];
        let (lo, hi) = m.one_sided_velocities(at(-3.0 * eps));
        assert_eq!(lo, 1.0);
        assert_eq!(hi, m.c_eps(at(-3.0 * eps)));
        assert_eq!(m.one_sided_velocities(at(0.0)), (1.0, 1.5));
        let (lo, hi) = m.one_sided_velocities(at(3.0 * eps));
        assert_eq!(lo, m.c_eps(at(3.0 * eps)));
        assert_eq!(hi, 1.5);
    }

    #[test]
    fn one_sided_chain_on_a_lattice() {
        let eps = 0.03;
        let m = model(1.0, 1.8, eps, 0.5);
        let snap = 0.005;
        for s in -400..=400 {
            let x = [s as f64 * 0.00075, 0.0];
            let (lo, hi) = m.one_sided_velocities(x);
            let c = m.c_eps(x);
            let (a_lo, a_hi) = m.velocity.alpha_envelopes(x, snap);
            assert!(1.0 <= lo && lo <= c && c <= hi && hi <= 1.8, "{x:?}");
            assert!(lo <= a_lo && a_lo <= a_hi && a_hi <= hi, "{x:?}");
        }
    }

    #[test]
    fn cubic_examples() {
        let m = model(1.0, 1.5, 0.02, 0.25);
        let x = [-5.0, 0.0];
        let c = m.c_eps(x);
        assert_eq!(m.f_eps(1.0, x), 0.0);
        assert_eq!(m.f_eps(-1.0, x), 0.0);
        assert_eq!(m.f_eps(0.5 * c, x), 0.0);
        assert_eq!(cubic(0.0, 1.0), 1.0);
        assert_eq!(cubic(2.0, 1.0), 9.0);
    }

    #[test]
    fn cubic_sign_pattern() {
        for (cs, c) in (-19..=19).map(|k| (k, k as f64 * 0.1)) {
            let m = 0.5 * c;
            for s in -300..=300 {
                let q = s as f64 * 0.01 + 0.003 * cs as f64;
                let f = cubic(q, c);
                if q == -1.0 || q == m || q == 1.0 {
                    continue;
                }
                let positive = (q > -1.0 && q < m) || q > 1.0;
                assert_eq!(f > 0.0, positive, "q={q} c={c}");
            }
            assert!(cubic_q(1.0, c) > 0.0 && cubic_q(-1.0, c) > 0.0);
        }
    }

    #[test]
    fn wave_passes_through_unstable_root() {
        let m = model(1.0, 1.9, 0.02, 0.25);
        for s in -50..=50 {
            let x = [s as f64 * 0.02, 0.0];
            assert!((m.traveling_wave(0.0, x) - 0.5 * m.c_eps(x)).abs() < 1e-12);
        }
    }

    #[test]
    fn wave_limits_and_symmetric_value() {
        let m = model(1.0, 1.5, 0.02, 0.25);
        let x = [0.1, 0.0];
        assert_eq!(m.traveling_wave(40.0, x), 1.0);
        assert_eq!(m.traveling_wave(-40.0, x), -1.0);
        assert!((wave_shift(0.0)).abs() < 1e-300);
        assert!(((1.0 + wave_shift(0.0)).tanh() - 0.761_594_155_955_764_9).abs() < 1e-15);
        for s in -100..100 {
            let r = s as f64 * 0.05;
            assert!(m.traveling_wave(r + 0.05, x) > m.traveling_wave(r, x));
            assert!(m.wave_slope(r, x) > 0.0);
        }
    }

    #[test]
    fn c_eps_error_halves_with_band_width() {
        // off the interface the error decays like exp(-2 d / eps^k), so it
        // at least halves whenever eps^k halves
        let v = VelocityModel::piecewise_constant(1.0, 1.5, 0.25, plane(), 0.5).unwrap();
        for &d in &[-0.3, 0.2, 0.5] {
            let mut prev = f64::INFINITY;
            for j in 0..5 {
                let w = 0.2 / 2f64.powi(j);
                let eps = w * w;
                let m = BistableModel::new(v.clone(), eps, Scaling::One).unwrap();
                let alpha = if d < 0.0 { 1.0 } else { 1.5 };
                let err = (m.c_eps([d, 0.0]) - alpha).abs();
                assert!(err <= 0.5 * prev || err < 1e-15, "d={d} j={j}");
                prev = err;
            }
        }
    }

    #[test]
    fn constructor_checks() {
        assert!(VelocityModel::piecewise_constant(1.0, 2.0, 0.0, plane(), 0.25).is_err());
        assert!(VelocityModel::piecewise_constant(1.0, 2.0, 0.1, plane(), 1.0).is_err());
        let v = VelocityModel::piecewise_constant(1.0, 2.0, 0.1, plane(), 0.75).unwrap();
        assert!(BistableModel::new(v.clone(), 0.1, Scaling::One).is_err());
        assert!(BistableModel::new(v.clone(), 0.1, Scaling::Two).is_ok());
        assert!(BistableModel::new(v, 0.0, Scaling::Two).is_err());
    }
}
