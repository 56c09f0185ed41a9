use serde::{Deserialize, Serialize};

use super::{BistableModel, VelocityModel};
use crate::error::{Error, Result};
use crate::field::{Grid, Point};

/// How a node picks its speed from a discontinuous velocity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpeedMode {
    /// `α_*`: the smaller value on the interface.
    #[default]
    LowerEnvelope,
    /// `α^*`: the larger value on the interface.
    UpperEnvelope,
    /// Continuous lower modification built from `c^ε`.
    OneSidedLower,
    /// Continuous upper modification built from `c^ε`.
    OneSidedUpper,
}

/// Source of front speeds for the level-set and arrival solvers.
#[derive(Debug, Clone, PartialEq)]
pub enum Velocity {
    /// Uniform nonnegative speed.
    Constant(f64),
    Model(VelocityModel),
    Bistable(BistableModel),
}

impl From<VelocityModel> for Velocity {
    fn from(m: VelocityModel) -> Self {
        Velocity::Model(m)
    }
}

impl From<BistableModel> for Velocity {
    fn from(m: BistableModel) -> Self {
        Velocity::Bistable(m)
    }
}

impl Velocity {
    /// Speed at `x`; `snap` is the distance within which a point counts as
    /// lying on the interface.
    pub fn sample(&self, x: Point, mode: SpeedMode, snap: f64) -> Result<f64> {
        let v = match self {
            Velocity::Constant(a) => *a,
            Velocity::Model(m) => match mode {
                SpeedMode::LowerEnvelope => m.alpha_envelopes(x, snap).0,
                SpeedMode::UpperEnvelope => m.alpha_envelopes(x, snap).1,
                SpeedMode::OneSidedLower | SpeedMode::OneSidedUpper => {
                    return Err(Error::Config(
                        "one-sided speeds need a model with epsilon".into(),
                    ))
                }
            },
            Velocity::Bistable(b) => match mode {
                SpeedMode::LowerEnvelope => b.velocity.alpha_envelopes(x, snap).0,
                SpeedMode::UpperEnvelope => b.velocity.alpha_envelopes(x, snap).1,
                SpeedMode::OneSidedLower => b.one_sided_velocities(x).0,
                SpeedMode::OneSidedUpper => b.one_sided_velocities(x).1,
            },
        };
        if !(v >= 0.0) || !v.is_finite() {
            return Err(Error::InvalidModel(format!(
                "speed must be finite and nonnegative, got {v} at {x:?}"
            )));
        }
        Ok(v)
    }

    /// Per-node speeds on `grid`, snapping at half a cell.
    pub fn speed_field(&self, grid: &Grid, mode: SpeedMode) -> Result<Vec<f64>> {
        let snap = 0.5 * grid.h();
        (0..grid.len())
            .map(|k| self.sample(grid.coord(k), mode, snap))
            .collect()
    }

    pub fn velocity_model(&self) -> Option<&VelocityModel> {
        match self {
            Velocity::Constant(_) => None,
            Velocity::Model(m) => Some(m),
            Velocity::Bistable(b) => Some(&b.velocity),
        }
    }
}
