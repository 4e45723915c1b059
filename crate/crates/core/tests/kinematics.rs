use proptest::prelude::*;

use bitesim::geometry::rotation_log;
use bitesim::kinematics::*;
use bitesim::presets;

fn config_in(chain: &ChainModel) -> impl Strategy<Value = JointConfig> {
    let lims = chain.limits();
    lims.into_iter()
        .map(|l| l[0]..=l[1])
        .collect::<Vec<_>>()
        .prop_map(JointConfig)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn jacobian_matches_central_differences(q in config_in(&presets::chain_with_wrist())) {
        let chain = presets::chain_with_wrist();
        let j = jacobian(&chain, &q).unwrap();
        let h = 1e-6;
        for i in 0..chain.dof() {
            let mut a = q.clone();
            let mut b = q.clone();
            a.0[i] += h;
            b.0[i] -= h;
            let pa = forward_kinematics(&chain, &a).unwrap();
            let pb = forward_kinematics(&chain, &b).unwrap();
            let dp = (pa.position - pb.position) / (2.0 * h);
            let dr = rotation_log(&(pa.orientation * pb.orientation.inverse())) / (2.0 * h);
            for r in 0..3 {
                prop_assert!((j[(r, i)] - dp[r]).abs() < 1e-5);
                prop_assert!((j[(r + 3, i)] - dr[r]).abs() < 1e-5);
            }
        }
    }

    #[test]
    fn converged_solutions_reach_the_target(q in config_in(&presets::chain_without_wrist())) {
        let chain = presets::chain_without_wrist();
        let target = forward_kinematics(&chain, &q).unwrap();
        let params = IkParams::default();
        let sol = ik_multistart(&chain, &target, &presets::home_config(&chain), &params, &RestartParams::default()).unwrap();
        prop_assert!(chain.within_limits(&sol.q));
        prop_assert!(sol.iterations <= params.max_iter);
        if sol.converged {
            let reached = forward_kinematics(&chain, &sol.q).unwrap();
            prop_assert!(reached.translation_distance(&target) <= params.pos_tol);
            prop_assert!(reached.angular_distance(&target) <= params.rot_tol);
        }
    }

    #[test]
    fn displacement_is_symmetric(a in config_in(&presets::chain_with_wrist()), b in config_in(&presets::chain_with_wrist())) {
        let arm: Vec<usize> = (0..ARM_DOF).collect();
        let ab = joint_displacement(&a, &b, &arm).unwrap();
        let ba = joint_displacement(&b, &a, &arm).unwrap();
        prop_assert_eq!(&ab.per_joint, &ba.per_joint);
        prop_assert!(ab.mean >= 0.0);
        let mean = ab.per_joint.iter().sum::<f64>() / ARM_DOF as f64;
        prop_assert!((ab.mean - mean).abs() < 1e-15);
    }

    #[test]
    fn wrist_at_zero_reproduces_fixed_tip(q in config_in(&presets::chain_without_wrist())) {
        let fixed = forward_kinematics(&presets::chain_without_wrist(), &q).unwrap();
        let wrist = forward_kinematics(&presets::chain_with_wrist(), &q.padded(9)).unwrap();
        prop_assert!(fixed.translation_distance(&wrist) < 1e-12);
        prop_assert!(fixed.angular_distance(&wrist) < 1e-12);
    }
}

#[test]
fn ik_from_home_reaches_the_pre_mouth_pose_on_both_chains() {
    for chain in [presets::chain_without_wrist(), presets::chain_with_wrist()] {
        let home = presets::home_config(&chain);
        let sol = ik_damped_least_squares(&chain, &presets::pre_mouth_pose(), &home, &IkParams::default()).unwrap();
        assert!(sol.converged);
        assert_eq!(sol.iterations, 0);
    }
}

#[test]
fn chain_json_roundtrip() {
    let chain = presets::chain_with_wrist();
    let back = ChainModel::from_json(&chain.to_json()).unwrap();
    let q = JointConfig(vec![0.1, -0.2, 0.3, -1.0, 0.4, 1.2, -0.5, 0.2, 0.7]);
    assert_eq!(
        forward_kinematics(&chain, &q).unwrap(),
        forward_kinematics(&back, &q).unwrap()
    );
}
