mod support;

use lastmile_core::geom::{integrate_step, rollout, rollout_jacobian, CommandSequence, Pose2, Twist};
use proptest::prelude::*;
use support::{checks, oracles};

#[test]
fn rollout_matches_fine_euler_integration() {
    let s = checks::kinematic_check(100);
    assert!(s.passed(), "{s:?}");
}

fn pose() -> impl Strategy<Value = Pose2> {
    (-3.0..3.0f64, -3.0..3.0f64, -3.1..3.1f64).prop_map(|(x, y, t)| Pose2::new(x, y, t))
}

fn sequence() -> impl Strategy<Value = CommandSequence> {
    prop::collection::vec((-0.2..0.5f64, -1.5..1.5f64), 1..30)
        .prop_map(|c| CommandSequence::new(c.into_iter().map(|(v, w)| Twist::new(v, w)).collect(), 0.333).unwrap())
}

proptest! {
    #[test]
    fn angle_wrap_is_odd_and_fixes_in_range(a in -50.0..50.0f64) {
        use lastmile_core::geom::normalize_angle;
        let r = normalize_angle(a);
        prop_assert!(r > -std::f64::consts::PI && r <= std::f64::consts::PI);
        if r.abs() < std::f64::consts::PI {
            prop_assert_eq!(normalize_angle(-a), -r);
        }
        if a.abs() < std::f64::consts::PI {
            prop_assert_eq!(r, a);
        }
    }

    #[test]
    fn rollout_commutes_with_rigid_motion(frame in pose(), seq in sequence()) {
        let local = rollout(&Pose2::IDENTITY, &seq);
        let moved = rollout(&frame, &seq);
        for (l, m) in local.iter().zip(&moved) {
            let expect = frame.compose(l);
            prop_assert!((expect.x - m.x).abs() < 1e-9 && (expect.y - m.y).abs() < 1e-9);
            prop_assert!(lastmile_core::geom::normalize_angle(expect.theta - m.theta).abs() < 1e-9);
        }
    }

    #[test]
    fn single_step_matches_textbook_arc(p in pose(), v in -0.5..0.5f64, w in -2.0..2.0f64) {
        prop_assume!(w.abs() > 1e-3);
        let a = integrate_step(&p, &Twist::new(v, w), 0.333).unwrap();
        let b = oracles::arc_step((p.x, p.y, p.theta), v, w, 0.333);
        prop_assert!((a.x - b.0).abs() < 1e-12 && (a.y - b.1).abs() < 1e-12);
    }

    #[test]
    fn jacobian_matches_differences(p0 in pose(), seq in sequence()) {
        let jac = rollout_jacobian(&p0, &seq);
        let x: Vec<f64> = seq.commands().iter().flat_map(|u| [u.v, u.omega]).collect();
        let n = seq.len();
        let last = n - 1;
        for channel in 0..3 {
            let fd = oracles::central_diff(
                |x| {
                    let s = CommandSequence::new(x.chunks_exact(2).map(|c| Twist::new(c[0], c[1])).collect(), 0.333).unwrap();
                    let p = rollout(&p0, &s)[last];
                    [p.x, p.y, p.theta][channel]
                },
                &x,
                &(0..2 * n).collect::<Vec<_>>(),
                1e-6,
            );
            let analytic: Vec<f64> = (0..n).flat_map(|j| jac.get(last, j)[channel]).collect();
            prop_assert!(oracles::relative_error(&analytic, &fd, 1e-8) < 1e-5);
        }
    }
}
