use nalgebra::Vector3;
use proptest::prelude::*;

use bitesim::controller::*;
use bitesim::presets;
use bitesim::transfer::*;

fn force() -> impl Strategy<Value = Vector3<f64>> {
    prop::array::uniform3(-0.5f64..0.5).prop_map(Vector3::from)
}

proptest! {
    #[test]
    fn constant_force_matches_closed_form(f in force(), kp in 0.0f64..10.0, ki in 0.0f64..30.0, n in 1usize..600) {
        let mut state = ControllerState::new(ReactivityGains::isotropic(kp, ki), Vector3::z());
        state.anti_windup = f64::INFINITY;
        let w = Wrench::from_force(f);
        let mut out = Wrench::zero();
        for _ in 0..n {
            let (o, s) = reactive_term(&state, &w, TICK_PERIOD).unwrap();
            out = o;
            state = s;
        }
        let expected = f * (kp + ki * n as f64 * TICK_PERIOD);
        prop_assert!((out.force - expected).amax() < 1e-9);
        prop_assert_eq!(out.torque, Vector3::zeros());
    }

    #[test]
    fn any_component_over_the_limit_aborts(f in prop::array::uniform3(-6.0f64..6.0)) {
        let w = Wrench::from_force(Vector3::from(f));
        let over = f.iter().any(|c| c.abs() > 3.0);
        let status = safety_check(&w, 3.0);
        prop_assert_eq!(status == SafetyStatus::Abort, over);
        let latch = SafetyLatch::new(3.0, SafetyRule::default()).unwrap();
        let (latch, first) = latch.update(&w);
        let (_, second) = latch.update(&Wrench::zero());
        prop_assert_eq!(first, status);
        prop_assert_eq!(second, status);
    }

    #[test]
    fn fsm_only_takes_allowed_transitions(forces in prop::collection::vec(-4.0f64..4.0, 1..40), hold in 1usize..400) {
        let mouth = presets::default_mouth_pose();
        let plan = plan_transfer(&presets::pre_mouth_pose(), &mouth, &TrajectoryConfig::default()).unwrap();
        let det = BiteDetector::new(0.3, mouth.y_axis(), 1.5).unwrap();
        let mut ctx = FsmContext::new(det);
        let mut latch = SafetyLatch::new(3.0, SafetyRule::default()).unwrap();
        let mut aborted = false;
        for k in 0..10_001usize {
            let fy = forces[(k / hold) % forces.len()];
            let f_m = Wrench::from_force(mouth.y_axis() * fy);
            let (l, safety) = latch.update(&f_m);
            latch = l;
            let out = step(&ctx, &plan, &Sensors { f_m, clock: k as f64 * TICK_PERIOD, dt: TICK_PERIOD, safety }).unwrap();
            for e in &out.events {
                prop_assert!(TransferPhase::is_allowed_transition(e.phase_from, e.phase_to));
            }
            if aborted {
                prop_assert!(out.setpoint.is_none());
            }
            aborted |= out.ctx.phase == TransferPhase::Aborted;
            prop_assert_eq!(out.setpoint.is_none(), aborted);
            ctx = out.ctx;
        }
        prop_assert!(matches!(ctx.phase, TransferPhase::Done | TransferPhase::Aborted));
    }

    #[test]
    fn plan_invariants_hold_for_any_durations(
        approach in 0.5f64..5.0, entry in 0.2f64..3.0, wait in 0.2f64..3.0, exit in 0.2f64..3.0, retract in 0.5f64..4.0,
    ) {
        let cfg = TrajectoryConfig {
            approach_s: approach,
            entry_s: entry,
            bite_wait_s: wait,
            exit_s: exit,
            retract_s: retract,
            sample_rate_hz: 200.0,
            ..TrajectoryConfig::default()
        };
        let pre = presets::pre_mouth_pose();
        let plan = plan_transfer(&pre, &presets::default_mouth_pose(), &cfg).unwrap();
        prop_assert!(plan.is_strictly_increasing());
        prop_assert!((plan.duration() - cfg.total_duration()).abs() < 1e-9);
        let center = arc_center(&pre, cfg.arc_radius);
        for w in plan.segment_waypoints(SegmentLabel::Arc) {
            prop_assert!(((w.pose.position - center).norm() - cfg.arc_radius).abs() < 1e-9);
        }
        prop_assert_eq!(plan.segment_waypoints(SegmentLabel::Arc).last().unwrap().pose, pre);
        prop_assert_eq!(plan.last_pose().position, plan.first_pose().position);
    }
}

#[test]
fn bite_wait_lasts_exactly_the_timeout_in_the_loop() {
    let mouth = presets::default_mouth_pose();
    let plan = plan_transfer(&presets::pre_mouth_pose(), &mouth, &TrajectoryConfig::default()).unwrap();
    let det = BiteDetector::new(0.3, mouth.y_axis(), 1.5).unwrap();
    let mut ctx = FsmContext::new(det);
    let mut events = Vec::new();
    for k in 0..10_001 {
        let f_m = Wrench::from_force(mouth.y_axis() * 0.2);
        let sensors = Sensors {
            f_m,
            clock: k as f64 * TICK_PERIOD,
            dt: TICK_PERIOD,
            safety: SafetyStatus::Ok,
        };
        let out = step(&ctx, &plan, &sensors).unwrap();
        events.extend(out.events);
        ctx = out.ctx;
    }
    let start = events.iter().find(|e| e.phase_to == TransferPhase::BiteWait).unwrap().t;
    let timeout = events.iter().find(|e| e.event == EventKind::Timeout).unwrap().t;
    assert!((start - 5.0).abs() < 1e-9);
    assert!((timeout - start - 1.5).abs() < 1e-9);
    assert_eq!(ctx.phase, TransferPhase::Done);
}
