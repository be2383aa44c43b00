use fmfgc::manifest::{parse_config, DampingKind, RunManifest};
use fmfgc::Error;
use proptest::prelude::*;

#[test]
fn minimal_config_takes_every_default() {
    let m = parse_config("[scenario]\nname = \"bench\"\n").unwrap();
    assert_eq!(m, RunManifest::named("bench"));
    assert_eq!((m.grid.n, m.grid.steps, m.grid.order), (128, 200, 0.75));
    assert_eq!(m.outer.theta_schedule, vec![0.0, 0.25, 0.5, 0.75, 1.0]);
    assert_eq!(m.outer.damping, DampingKind::Fixed);
    // The echo spells the defaults out.
    let echo = m.to_toml();
    for key in [
        "order = 0.75",
        "coupling_beta = 0.3",
        "tolerance = 0.0000000001",
        "[particles]",
    ] {
        assert!(echo.contains(key), "{key} missing from\n{echo}");
    }
}

#[test]
fn order_outside_range_names_the_interval() {
    let err = parse_config("[scenario]\nname = \"x\"\n[grid]\norder = 0.4\n").unwrap_err();
    match &err {
        Error::Range { key, range, .. } => {
            assert_eq!(*key, "grid.order");
            assert_eq!(*range, "s ∈ (1/2, 1)");
        }
        other => panic!("{other:?}"),
    }
    assert!(err.to_string().contains("s ∈ (1/2, 1)"));
}

#[test]
fn duplicate_key_is_a_parse_error_with_line() {
    let text = "[scenario]\nname = \"x\"\n[grid]\nn = 64\nn = 32\n";
    match parse_config(text).unwrap_err() {
        Error::Parse { line, message } => {
            assert_eq!(line, 5, "{message}");
            assert!(message.contains("duplicate"), "{message}");
        }
        other => panic!("{other:?}"),
    }
}

#[test]
fn unknown_key_is_rejected() {
    let text = "[scenario]\nname = \"x\"\n\n[model]\nbeta = 0.3\n";
    match parse_config(text).unwrap_err() {
        Error::Parse { line, message } => {
            assert!(message.contains("beta"), "{message}");
            assert_eq!(line, 5, "{message}");
        }
        other => panic!("{other:?}"),
    }
    assert!(matches!(
        parse_config("[scenario]\nname = \"x\"\n[particles]\nseed = -1\n").unwrap_err(),
        Error::Parse { line: 4, .. }
    ));
    assert!(matches!(
        parse_config("[scenario]\nname = \"x\"\n[extra]\n").unwrap_err(),
        Error::Parse { .. }
    ));
}

#[test]
fn other_ranges() {
    let bad = [
        ("[grid]\nn = 100", "grid.n"),
        ("[grid]\ndim = 3", "grid.dim"),
        ("[model]\ncoupling_beta = 1.0", "model.coupling_beta"),
        ("[model]\nq = 3.0", "model.q"),
        ("[loop]\ntheta = 1.5", "loop.theta"),
        (
            "[loop]\ntheta_schedule = [0.5, 0.25]",
            "loop.theta_schedule",
        ),
        ("[loop]\ndelta = 0.0", "loop.delta"),
        ("[mu]\nrelaxation = 2.0", "mu.relaxation"),
        ("[particles]\ncount = 0", "particles.count"),
    ];
    for (section, expected) in bad {
        let text = format!("[scenario]\nname = \"x\"\n{section}\n");
        match parse_config(&text).unwrap_err() {
            Error::Range { key, .. } => assert_eq!(key, expected),
            other => panic!("{section}: {other:?}"),
        }
    }
}

proptest! {
    #[test]
    fn echo_parses_back_to_the_same_manifest(
        n_pow in 3u32..9,
        steps in 1usize..1000,
        order in 0.5001f64..0.9999,
        horizon in 0.01f64..10.0,
        beta in 0.0f64..0.999,
        decay in 0.0f64..5.0,
        seed in 0..=i64::MAX as u64,
        fictitious in any::<bool>(),
    ) {
        let mut m = RunManifest::named("round trip");
        m.grid.n = 1 << n_pow;
        m.grid.steps = steps;
        m.grid.order = order;
        m.grid.horizon = horizon;
        m.model.coupling_beta = beta;
        m.model.kernel_decay = decay;
        m.particles.seed = seed;
        if fictitious {
            m.outer.damping = DampingKind::FictitiousPlay;
        }
        prop_assert_eq!(parse_config(&m.to_toml()).unwrap(), m);
    }

    #[test]
    fn seeds_beyond_toml_integers_are_range_errors(seed in (i64::MAX as u64 + 1)..=u64::MAX) {
        let mut m = RunManifest::named("big seed");
        m.particles.seed = seed;
        let rejected = matches!(m.validate(), Err(Error::Range { key: "particles.seed", .. }));
        prop_assert!(rejected);
    }
}
