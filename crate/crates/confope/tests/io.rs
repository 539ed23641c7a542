use confope::io::{
    load_dataset, load_mdp, read_csv, save_dataset, save_mdp, sidecar_path, write_csv, DatasetMeta, MdpDoc, OpeRow,
};
use confope::registry::{fixture, fixture_for_data, ENV_IDS};
use confope::sim::{par_map, simulate_dataset};
use confope::svg::{line_plot, mean_sd, Series};
use confope::AppError;
use proptest::prelude::*;
use tempfile::tempdir;

#[test]
fn dataset_round_trip_with_sidecar() {
    let d = tempdir().unwrap();
    let path = d.path().join("d.jsonl");
    let b = fixture("sepsis", Some(4)).unwrap();
    let ds = simulate_dataset("sepsis", b.mdp(), b.behavior(), 25, 3).unwrap();
    save_dataset(&ds, &path).unwrap();
    assert_eq!(sidecar_path(&path), d.path().join("d.jsonl.meta.json"));
    let meta: DatasetMeta = serde_json::from_str(&std::fs::read_to_string(sidecar_path(&path)).unwrap()).unwrap();
    assert_eq!((meta.env_id.as_str(), meta.seed, meta.n, meta.h), ("sepsis", 3, 25, 4));
    assert_eq!(load_dataset(&path).unwrap(), ds);
}

#[test]
fn dataset_without_confounders_or_sidecar_loads() {
    let d = tempdir().unwrap();
    let path = d.path().join("d.jsonl");
    std::fs::write(
        &path,
        "{\"s\":[0,1],\"a\":[1,0],\"r\":[0.5,1.0]}\n\n{\"s\":[1,1],\"a\":[0,0],\"r\":[0,0]}\n",
    )
    .unwrap();
    let ds = load_dataset(&path).unwrap();
    assert_eq!(ds.trajectories.len(), 2);
    assert_eq!(ds.horizon, 2);
    assert!(ds.env_id.is_empty());
    assert!(ds.trajectories.iter().all(|t| t.confounders.is_none()));
}

#[test]
fn malformed_lines_cite_their_line_number() {
    let d = tempdir().unwrap();
    let path = d.path().join("d.jsonl");
    let good = "{\"s\":[0,1],\"a\":[1,0],\"r\":[0,0]}";
    let cases = [
        ("{\"s\":[0,1],\"a\":[1],\"r\":[0,0]}", 3),
        ("{\"s\":[0,1,1],\"a\":[1,0,0],\"r\":[0,0,0]}", 3),
        ("not json", 3),
    ];
    for (bad, line) in cases {
        std::fs::write(&path, format!("{good}\n{good}\n{bad}\n{good}\n")).unwrap();
        match load_dataset(&path) {
            Err(e @ AppError::Parse { .. }) => {
                assert!(e.to_string().contains(&format!(":{line}:")), "{e}");
                assert_eq!(e.exit_code(), 2);
            }
            other => panic!("expected parse error, got {other:?}"),
        }
    }
}

#[test]
fn mdp_json_round_trip() {
    let d = tempdir().unwrap();
    for id in ["thm1", "gridworld", "sepsis", "two-mixture", "memory-chain"] {
        let b = fixture(id, None).unwrap();
        let path = d.path().join(format!("{id}.json"));
        save_mdp(b.mdp(), &path).unwrap();
        assert_eq!(&load_mdp(&path).unwrap(), b.mdp(), "{id}");
        let doc = MdpDoc::from_mdp(b.mdp());
        assert_eq!(&doc.to_mdp().unwrap(), b.mdp());
    }
}

#[test]
fn csv_round_trip() {
    let d = tempdir().unwrap();
    let path = d.path().join("r.csv");
    let rows = vec![
        OpeRow {
            gamma: 1.0,
            method: "fqe".into(),
            state: "start".into(),
            value: -0.1,
            is_lower_bound: false,
            seed: 7,
        },
        OpeRow {
            gamma: 2.5,
            method: "cfqe".into(),
            state: "3".into(),
            value: 1.0 / 3.0,
            is_lower_bound: true,
            seed: 7,
        },
    ];
    write_csv(&path, &rows).unwrap();
    let text = std::fs::read_to_string(&path).unwrap();
    assert!(text.starts_with("gamma,method,state,value,is_lower_bound,seed\n"));
    assert_eq!(read_csv::<OpeRow>(&path).unwrap(), rows);
}

#[test]
fn every_registered_fixture_builds() {
    for id in ENV_IDS {
        let b = fixture(id, None).unwrap();
        let h = b.mdp().horizon();
        assert_eq!(fixture_for_data(id, h).unwrap().mdp(), b.mdp(), "{id}");
    }
    assert!(matches!(fixture("thm1", Some(0)), Err(AppError::Config(_))));
    assert_eq!(fixture("bogus", None).unwrap_err().exit_code(), 2);
}

#[test]
fn simulation_is_reproducible() {
    let b = fixture("gridworld", None).unwrap();
    let a = simulate_dataset("gridworld", b.mdp(), b.behavior(), 40, 11).unwrap();
    let again = simulate_dataset("gridworld", b.mdp(), b.behavior(), 40, 11).unwrap();
    assert_eq!(a, again);
    assert_eq!(
        par_map(10, |i| i * i).unwrap(),
        (0..10).map(|i| i * i).collect::<Vec<_>>()
    );
}

#[test]
fn svg_plot_is_well_formed() {
    let s = Series {
        name: "a<b".into(),
        x: vec![1.0, 2.0, 5.0],
        mean: vec![0.0, -1.0, f64::NAN],
        sd: vec![0.1, 0.2, 0.3],
    };
    let svg = line_plot("t", "x", "y", &[s], true);
    assert!(svg.contains("<svg"));
    assert!(svg.trim_end().ends_with("</svg>"));
    assert!(svg.contains("a&lt;b"));
    assert!(!svg.contains("NaN"));
    assert_eq!(svg.matches("<svg").count(), 1);
}

#[test]
fn mean_sd_examples() {
    assert_eq!(mean_sd(&[2.0]), (2.0, 0.0));
    let (m, s) = mean_sd(&[1.0, 2.0, 3.0, 4.0]);
    assert_eq!(m, 2.5);
    assert!((s - (5.0f64 / 3.0).sqrt()).abs() < 1e-15);
    assert!(mean_sd(&[]).0.is_nan());
}

proptest! {
    #[test]
    fn mean_sd_is_shift_equivariant(xs in prop::collection::vec(-100.0f64..100.0, 1..20), c in -50.0f64..50.0) {
        let (m, s) = mean_sd(&xs);
        let shifted: Vec<f64> = xs.iter().map(|x| x + c).collect();
        let (m2, s2) = mean_sd(&shifted);
        prop_assert!((m2 - m - c).abs() < 1e-9);
        prop_assert!((s2 - s).abs() < 1e-8);
        prop_assert!(s >= 0.0);
    }
}
