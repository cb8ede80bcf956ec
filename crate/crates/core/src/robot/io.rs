//! Robot description file: key-value text serialization of [`RobotModel`].

use std::path::Path;

use nalgebra::Matrix3;
use thiserror::Error;

use crate::config::{ConfigError, KeyValues};

use super::{RobotError, RobotModel, LEG_NAMES, N_JOINTS, N_LEGS};

#[derive(Debug, Error)]
pub enum RobotIoError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Invalid(#[from] RobotError),
}

impl RobotModel {
    pub fn to_key_values(&self) -> KeyValues {
        let mut kv = KeyValues::default();
        kv.set_f64s("mass", &[self.mass]);
        let i = &self.body_inertia;
        kv.set_f64s(
            "inertia_rows",
            &[
                i[(0, 0)],
                i[(0, 1)],
                i[(0, 2)],
                i[(1, 0)],
                i[(1, 1)],
                i[(1, 2)],
                i[(2, 0)],
                i[(2, 1)],
                i[(2, 2)],
            ],
        );
        kv.set_f64s("upper_leg_len", &[self.upper_leg_len]);
        kv.set_f64s("lower_leg_len", &[self.lower_leg_len]);
        kv.set_f64s("friction_mu", &[self.friction_mu]);
        kv.set_f64s("nominal_stance_depth", &[self.nominal_stance_depth]);
        for leg in 0..N_LEGS {
            let name = LEG_NAMES[leg];
            let h = self.hip_offsets[leg];
            kv.set_f64s(&format!("hip_{name}"), &[h.x, h.y, h.z]);
            let c = self.kinematic_box_centers[leg];
            kv.set_f64s(&format!("box_center_{name}"), &[c.x, c.y, c.z]);
            let e = self.kinematic_box_half_extents[leg];
            kv.set_f64s(&format!("box_half_{name}"), &[e.x, e.y, e.z]);
        }
        let mut limits = Vec::with_capacity(2 * N_JOINTS);
        for &(lo, hi) in &self.joint_limits {
            limits.push(lo);
            limits.push(hi);
        }
        kv.set_f64s("joint_limits", &limits);
        kv
    }

    pub fn from_key_values(kv: &KeyValues) -> Result<RobotModel, RobotIoError> {
        let inertia_vals = kv.get_f64s("inertia_rows", 9)?;
        let body_inertia = Matrix3::from_row_slice(&inertia_vals);
        let mut model = RobotModel {
            mass: kv.get_f64("mass")?,
            body_inertia,
            hip_offsets: [Default::default(); N_LEGS],
            upper_leg_len: kv.get_f64("upper_leg_len")?,
            lower_leg_len: kv.get_f64("lower_leg_len")?,
            kinematic_box_centers: [Default::default(); N_LEGS],
            kinematic_box_half_extents: [Default::default(); N_LEGS],
            friction_mu: kv.get_f64("friction_mu")?,
            joint_limits: [(0.0, 0.0); N_JOINTS],
            nominal_stance_depth: kv.get_f64("nominal_stance_depth")?,
        };
        for leg in 0..N_LEGS {
            let name = LEG_NAMES[leg];
            model.hip_offsets[leg] = kv.get_vec3(&format!("hip_{name}"))?;
            model.kinematic_box_centers[leg] = kv.get_vec3(&format!("box_center_{name}"))?;
            model.kinematic_box_half_extents[leg] = kv.get_vec3(&format!("box_half_{name}"))?;
        }
        let limits = kv.get_f64s("joint_limits", 2 * N_JOINTS)?;
        for j in 0..N_JOINTS {
            model.joint_limits[j] = (limits[2 * j], limits[2 * j + 1]);
        }
        model.validate()?;
        Ok(model)
    }

    pub fn save_config(&self, path: impl AsRef<Path>) -> Result<(), RobotIoError> {
        self.to_key_values().save(path)?;
        Ok(())
    }

    pub fn load_config(path: impl AsRef<Path>) -> Result<RobotModel, RobotIoError> {
        Self::from_key_values(&KeyValues::load(path)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_round_trip_preserves_model() {
        let model = RobotModel::default();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("robot.cfg");
        model.save_config(&path).unwrap();
        let loaded = RobotModel::load_config(&path).unwrap();
        assert_eq!(loaded.mass, model.mass);
        assert_eq!(loaded.body_inertia, model.body_inertia);
        assert_eq!(loaded.hip_offsets, model.hip_offsets);
        assert_eq!(loaded.kinematic_box_centers, model.kinematic_box_centers);
        assert_eq!(loaded.kinematic_box_half_extents, model.kinematic_box_half_extents);
        assert_eq!(loaded.joint_limits, model.joint_limits);
        assert_eq!(loaded.nominal_stance_depth, model.nominal_stance_depth);
    }

    #[test]
    fn invalid_config_is_rejected() {
        let mut bad = RobotModel::default();
        bad.friction_mu = 3.0;
        let kv = bad.to_key_values();
        assert!(matches!(
            RobotModel::from_key_values(&kv),
            Err(RobotIoError::Invalid(RobotError::BadFriction(_)))
        ));
    }
}
