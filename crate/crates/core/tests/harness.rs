use nalgebra::Vector3;

use bitesim::controller::{
    desired_wrench, reactive_term, ControllerState, GainSchedule, ImpedanceParams, ReactivityGains, Wrench,
    TICK_PERIOD,
};
use bitesim::geometry::Pose;
use bitesim::harness::*;
use bitesim::human::{BiteScript, Disturbance, FoodStatus};
use bitesim::presets;
use bitesim::transfer::{EventKind, TransferPhase};

fn quiet(seed: u64) -> Scenario {
    Scenario {
        log_joints: false,
        ..Scenario::nominal(seed)
    }
}

fn wait_start(r: &TrialResult) -> f64 {
    r.report
        .events
        .iter()
        .find(|e| e.phase_to == TransferPhase::BiteWait)
        .expect("reaches the bite wait")
        .t
}

#[test]
fn nominal_bite_half_a_second_into_the_wait() {
    let r = run_trial(&Scenario::nominal(1)).unwrap();
    assert_eq!(r.report.outcome, Outcome::Success);
    let bite = r.report.bite_time.unwrap();
    assert!((bite - (wait_start(&r) + 0.5)).abs() <= TICK_PERIOD + 1e-12);
    assert_eq!(r.report.food_status, FoodStatus::Released);
    assert_eq!(r.report.final_phase, TransferPhase::Done);
    assert!(r.log.rows.iter().all(|row| row.q.as_ref().is_some_and(|q| q.len() == 7)));
}

#[test]
fn refusal_times_out_as_bite_failure() {
    let s = Scenario {
        bite: BiteScript::refusing(),
        ..quiet(2)
    };
    let r = run_trial(&s).unwrap();
    assert_eq!(r.report.outcome, Outcome::BiteFailure);
    let t = r.report.timeout_time.unwrap();
    assert!((t - wait_start(&r) - 1.5).abs() < 1e-9);
    assert!(r.report.events.iter().all(|e| e.event != EventKind::Bite));
}

#[test]
fn mouth_error_beyond_half_aperture_is_imprecise() {
    let s = Scenario {
        mouth_error: [0.0, 0.020, 0.0],
        ..quiet(3)
    };
    let r = run_trial(&s).unwrap();
    assert_eq!(r.report.outcome, Outcome::Imprecise);
    assert!((r.report.entry_error[1] - 0.020).abs() < 1e-12);

    let s = Scenario {
        mouth_error: [0.0, 0.010, 0.0],
        ..quiet(3)
    };
    assert_ne!(run_trial(&s).unwrap().report.outcome, Outcome::Imprecise);
}

#[test]
fn every_preset_food_and_method_succeeds_nominally() {
    for food in presets::foods() {
        for m in Method::ALL {
            let s = Scenario {
                food: food.name.clone(),
                ..quiet(4).with_method(m)
            };
            let r = run_trial(&s).unwrap();
            assert_eq!(r.report.outcome, Outcome::Success, "{} / {}", food.name, m.name());
        }
    }
}

#[test]
fn zero_stiffness_without_forces_never_moves() {
    let s = Scenario {
        impedance: ImpedanceParams::new([0.0; 6], [0.0; 6]).unwrap(),
        gains: GainSchedule::constant(ReactivityGains::zero()),
        ..quiet(5)
    };
    let r = run_trial(&s).unwrap();
    let first = r.log.rows[0].pose;
    assert!(r.log.rows.iter().all(|row| row.pose == first));
    assert!(r.log.rows.iter().all(|row| row.f_m == Wrench::zero()));
}

fn settle(phase: TransferPhase) -> f64 {
    let axis = Vector3::x();
    let gains = GainSchedule::phased().phase_gains(phase, &axis).unwrap();
    let mut ctrl = ControllerState::new(gains, axis);
    let impedance = ImpedanceParams::critically_damped(DEFAULT_STIFFNESS, &DEFAULT_VIRTUAL_MASS);
    let setpoint = presets::pre_mouth_pose();
    let mut robot = VirtualRobotState::at_rest(setpoint, DEFAULT_VIRTUAL_MASS);
    // 1 N push on the fork along the exit axis, seen by the sensor as -1 N
    let push = Wrench::from_force(axis);
    let f_m = -push;
    for _ in 0..20_000 {
        let f = desired_wrench(&impedance, &robot.pose.error_to(&setpoint), &(-robot.twist)).unwrap();
        let (f_bar, c) = reactive_term(&ctrl, &f_m, TICK_PERIOD).unwrap();
        ctrl = c;
        robot = admittance_step(&robot, &(f - f_bar - f_m), TICK_PERIOD);
    }
    (robot.pose.position - setpoint.position).dot(&axis)
}

#[test]
fn entry_yields_more_than_exit_along_the_exit_axis() {
    let entry = settle(TransferPhase::Entry);
    let exit = settle(TransferPhase::Exit);
    assert!(entry > 0.0 && exit > 0.0);
    assert!(entry > exit, "entry {entry} exit {exit}");
}

#[test]
fn tracking_error_decays_during_a_held_setpoint() {
    let s = Scenario {
        bite: BiteScript::refusing(),
        gains: GainSchedule::constant(ReactivityGains::zero()),
        ..quiet(6)
    };
    let r = run_trial(&s).unwrap();
    let wait: Vec<f64> = r
        .log
        .rows
        .iter()
        .filter(|row| row.phase == TransferPhase::BiteWait)
        .map(TickRecord::deviation)
        .collect();
    assert!(wait.len() > 1000);
    assert!(wait.windows(2).all(|w| w[1] <= w[0] + 1e-15), "{:?}", &wait[..5]);
}

#[test]
fn no_motion_after_abort() {
    let s = Scenario {
        disturbance: Disturbance::Constant { force: [0.0, 0.0, 3.5] },
        ..quiet(7)
    };
    let r = run_trial(&s).unwrap();
    assert_eq!(r.report.outcome, Outcome::Aborted);
    assert_eq!(r.report.abort_time, Some(0.0));
    let k = r.log.rows.iter().position(|row| row.phase == TransferPhase::Aborted).unwrap();
    assert!(r.log.rows[k..].iter().all(|row| row.pose == r.log.rows[k].pose));
}

#[test]
fn trajectory_export_schema_and_deviation() {
    let r = run_trial(&quiet(8)).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("trial.csv");
    export_trajectory(&r.log.rows, &path).unwrap();
    let text = std::fs::read_to_string(&path).unwrap();
    let mut lines = text.lines();
    assert_eq!(
        lines.next().unwrap(),
        "t_s,px,py,pz,qw,qx,qy,qz,fx,fy,fz,tau_x,tau_y,tau_z,phase,sp_px,sp_py,sp_pz,sp_qw,sp_qx,sp_qy,sp_qz,deviation_m"
    );
    let rows: Vec<Vec<&str>> = lines.map(|l| l.split(',').collect()).collect();
    assert_eq!(rows.len(), 10_001);
    for row in &rows {
        let v = |i: usize| row[i].parse::<f64>().unwrap();
        let d = ((v(1) - v(15)).powi(2) + (v(2) - v(16)).powi(2) + (v(3) - v(17)).powi(2)).sqrt();
        assert!((d - v(22)).abs() < 1e-12);
    }
    assert_eq!(rows[0][0], "0");
    assert_eq!(rows[10_000][0], "10");
    assert_eq!(rows[10_000][14], "done");
}

#[test]
fn json_log_replays_bit_for_bit() {
    let s = Scenario {
        head: bitesim::human::HeadPerturbation::RandomWalk {
            step: 0.0005,
            max_amplitude: 0.005,
        },
        ..Scenario::nominal(9)
    };
    let r = run_trial(&s).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("log.json");
    r.log.save(&path).unwrap();
    let loaded = TrialLog::load(&path).unwrap();
    assert_eq!(loaded, r.log);
    assert!(loaded.replay_matches().unwrap());
}

#[test]
fn fixed_pose_fork_holds_while_the_user_leans_in() {
    let r = run_trial(&quiet(10).with_method(Method::FixedPose)).unwrap();
    assert_eq!(r.report.outcome, Outcome::Success);
    let entry: Vec<Pose> = r
        .log
        .rows
        .iter()
        .filter(|row| row.phase == TransferPhase::Entry)
        .map(|row| row.setpoint)
        .collect();
    assert!(entry.iter().all(|p| *p == entry[0]));
}

#[test]
fn unknown_presets_are_config_errors() {
    let s = Scenario {
        food: "pizza".into(),
        ..quiet(11)
    };
    assert!(matches!(run_trial(&s), Err(bitesim::Error::Config(_))));
    let s = Scenario {
        chain: "no_such_chain".into(),
        ..quiet(11)
    };
    assert!(matches!(run_trial(&s), Err(bitesim::Error::Config(_))));
}

#[test]
fn suite_counts_add_up_and_are_seeded() {
    let suite: Suite = serde_json::from_str(
        r#"{
            "seed": 3,
            "repetitions": 2,
            "entries": [
                {"method": "ours", "count": 2},
                {"method": "less-reactive", "count": 1, "scenario": {"food": "tofu"}},
                {"label": "refuse", "count": 2, "scenario": {"bite": {"refuse": true}}}
            ]
        }"#,
    )
    .unwrap();
    let a = run_suite(&suite).unwrap();
    assert_eq!(a.trial_count, 10);
    let sum: usize = a.methods.values().map(|m| m.trials).sum();
    assert_eq!(sum, 10);
    let refuse = &a.methods["refuse"];
    assert_eq!(refuse.count(Outcome::BiteFailure), 4);
    assert_eq!(a.methods["ours"].count(Outcome::Success), 4);
    for m in a.methods.values() {
        let by_outcome: usize = Outcome::ALL.iter().map(|o| m.count(*o)).sum();
        assert_eq!(by_outcome, m.trials);
    }
    let seeds: Vec<u64> = a.trials.iter().map(|t| t.seed).collect();
    assert_eq!(seeds, (0..10).map(|i| derive_seed(3, i)).collect::<Vec<_>>());
    assert_eq!(run_suite(&suite).unwrap(), a);
}

#[test]
fn scenario_json_roundtrip() {
    let s = Scenario {
        disturbance: Disturbance::SumOfSines {
            amplitude: 0.5,
            seed: 3,
            axes: [true, false, true],
        },
        ..Scenario::nominal(12).with_method(Method::MoreReactive)
    };
    assert_eq!(Scenario::from_json(&s.to_json()).unwrap(), s);
}
