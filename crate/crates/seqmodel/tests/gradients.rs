mod support;

use support::{all_terms_fixture, gradcheck};

#[test]
fn every_parameter_matches_central_differences() {
    let fx = all_terms_fixture(6, 11);
    let terms = fx.model.loss(&fx.skel, &fx.input, &fx.positions, &fx.targets, &fx.weights).unwrap();
    for (name, v) in [
        ("v_root", terms.v_root),
        ("gamma_gv", terms.gamma_gv),
        ("smpl", terms.smpl),
        ("j3d", terms.j3d),
        ("j2d", terms.j2d),
        ("v3d", terms.v3d),
        ("stationary", terms.stationary),
    ] {
        assert!(v > 0.0, "{name} inactive");
    }
    let report = gradcheck(&fx);
    eprintln!("{report:?}");
    assert!(report.worst_rel < 1e-4, "{report:?}");
}
