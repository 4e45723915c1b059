//! Bundled chains, food presets and the default feeding scene.

use std::sync::OnceLock;

use nalgebra::{Rotation3, UnitQuaternion, Vector3};

use crate::error::{Error, Result};
use crate::geometry::Pose;
use crate::human::FoodPreset;
use crate::kinematics::{ik_damped_least_squares, ChainModel, IkParams, JointConfig, ARM_DOF};
use crate::transfer::transfer_orientation;

pub const CHAIN_FIXED_JSON: &str = include_str!("../data/chain_fixed.json");
pub const CHAIN_WRIST_JSON: &str = include_str!("../data/chain_wrist.json");
pub const FOODS_JSON: &str = include_str!("../data/foods.json");

/// Default upward fork tilt at the pre-mouth pose.
pub const FORK_PITCH_DEG: f64 = 25.0;

pub fn chain_without_wrist() -> ChainModel {
    ChainModel::from_json(CHAIN_FIXED_JSON).expect("bundled chain is valid")
}

pub fn chain_with_wrist() -> ChainModel {
    ChainModel::from_json(CHAIN_WRIST_JSON).expect("bundled chain is valid")
}

pub fn chain_by_name(name: &str) -> Result<ChainModel> {
    match name {
        "fixed" | "panda_fixed_fork" => Ok(chain_without_wrist()),
        "wrist" | "panda_wrist_fork" => Ok(chain_with_wrist()),
        other => Err(Error::UnknownPreset(other.into())),
    }
}

/// Mouth frame of the seated user: z toward the robot, y up, x to the user's left.
pub fn default_mouth_pose() -> Pose {
    let rot = Rotation3::from_basis_unchecked(&[
        Vector3::new(0.0, -1.0, 0.0),
        Vector3::new(0.0, 0.0, 1.0),
        Vector3::new(-1.0, 0.0, 0.0),
    ]);
    Pose::new(Vector3::new(0.80, 0.0, 0.50), UnitQuaternion::from_rotation_matrix(&rot))
}

/// Fork at the mouth center in the upside-down, upward-tilted transfer orientation.
pub fn pre_mouth_pose() -> Pose {
    let m = default_mouth_pose();
    Pose::new(m.position, transfer_orientation(&m, FORK_PITCH_DEG.to_radians()))
}

const NOMINAL_SEED: [f64; ARM_DOF] = [-0.63, 0.68, 0.46, -1.30, 1.21, 1.42, -0.78];

/// Arm configuration placing the fork at the pre-mouth pose; wrist joints at zero.
pub fn home_config(chain: &ChainModel) -> JointConfig {
    static ARM: OnceLock<Vec<f64>> = OnceLock::new();
    let arm = ARM.get_or_init(|| {
        let fixed = chain_without_wrist();
        let params = IkParams {
            pos_tol: 1e-6,
            rot_tol: 1e-6,
            max_iter: 500,
            ..IkParams::default()
        };
        let sol = ik_damped_least_squares(&fixed, &pre_mouth_pose(), &JointConfig(NOMINAL_SEED.to_vec()), &params)
            .expect("bundled chain accepts the nominal seed");
        sol.q.0
    });
    JointConfig(arm.clone()).padded(chain.dof())
}

pub fn foods() -> Vec<FoodPreset> {
    serde_json::from_str(FOODS_JSON).expect("bundled food presets are valid")
}

pub fn food(name: &str) -> Result<FoodPreset> {
    let key = name.trim().to_ascii_lowercase().replace([' ', '-'], "_");
    foods()
        .into_iter()
        .find(|f| f.name == key)
        .ok_or_else(|| Error::UnknownPreset(name.into()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kinematics::forward_kinematics;

    #[test]
    fn home_reaches_pre_mouth() {
        let chain = chain_without_wrist();
        let q = home_config(&chain);
        assert!(chain.within_limits(&q));
        let tip = forward_kinematics(&chain, &q).unwrap();
        assert!(tip.translation_distance(&pre_mouth_pose()) < 1e-5);
        assert!(tip.angular_distance(&pre_mouth_pose()) < 1e-5);

        let wrist = chain_with_wrist();
        let qw = home_config(&wrist);
        let tip_w = forward_kinematics(&wrist, &qw).unwrap();
        assert!(tip_w.translation_distance(&tip) < 1e-9);
    }

    #[test]
    fn eight_foods_bundled() {
        let all = foods();
        assert_eq!(all.len(), 8);
        for f in &all {
            f.validate().unwrap();
        }
        assert_eq!(food("Cherry Tomato").unwrap().name, "cherry_tomato");
        assert!(matches!(food("pizza"), Err(Error::UnknownPreset(_))));
    }
}
