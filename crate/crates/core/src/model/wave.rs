use super::{cubic, BistableModel};
use crate::field::Point;

/// Largest `|q_rr + c q_r - f(q)|` over `rs`, using the closed-form
/// derivatives of the tanh profile.
pub fn wave_residual(model: &BistableModel, x: Point, rs: &[f64]) -> f64 {
    let c = model.c_eps(x);
    rs.iter()
        .map(|&r| {
            let q = model.traveling_wave(r, x);
            let q_r = 1.0 - q * q;
            let q_rr = -2.0 * q * q_r;
            (q_rr + c * q_r - cubic(q, c)).abs()
        })
        .fold(0.0, f64::max)
}

/// Same residual with centred finite differences of step `step`.
pub fn wave_residual_fd(model: &BistableModel, x: Point, rs: &[f64], step: f64) -> f64 {
    let c = model.c_eps(x);
    let q = |r: f64| model.traveling_wave(r, x);
    rs.iter()
        .map(|&r| {
            let (qm, q0, qp) = (q(r - step), q(r), q(r + step));
            let q_r = (qp - qm) / (2.0 * step);
            let q_rr = (qp - 2.0 * q0 + qm) / (step * step);
            (q_rr + c * q_r - cubic(q0, c)).abs()
        })
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Interface, Scaling, VelocityModel};

    fn model() -> BistableModel {
        let v = VelocityModel::piecewise_constant(
            1.0,
            1.5,
            0.25,
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
    fn exact_derivatives_vanish() {
        let m = model();
        let rs: Vec<f64> = (-100..=100).map(|k| k as f64 * 0.1).collect();
        for s in -10..=10 {
            assert!(wave_residual(&m, [s as f64 * 0.1, 0.0], &rs) < 1e-12);
        }
    }

    #[test]
    fn finite_difference_residual_is_second_order() {
        let m = model();
        let rs: Vec<f64> = (-40..=40).map(|k| k as f64 * 0.1).collect();
        let x = [0.05, 0.0];
        let r1 = wave_residual_fd(&m, x, &rs, 1e-3);
        let r2 = wave_residual_fd(&m, x, &rs, 5e-4);
        assert!(r1 < 1e-5 && r1 > 1e-8, "{r1}");
        let ratio = r1 / r2;
        assert!((3.0..5.0).contains(&ratio), "ratio {ratio}");
    }

    #[test]
    fn symmetric_wave_at_origin() {
        // c = 0: q = tanh r is odd and the residual vanishes pointwise at r = 0
        let q: f64 = 0.0_f64.tanh();
        let q_r = 1.0 - q * q;
        assert_eq!(-2.0 * q * q_r - cubic(q, 0.0), 0.0);
    }
}
