mod support;

use support::checks;

#[test]
fn teacher_term_switches_at_one_meter() {
    let s = checks::mask_check(200);
    assert!(s.passed(), "{s:?}");
}
