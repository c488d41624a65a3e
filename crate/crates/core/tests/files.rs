//! Instances and reports through the filesystem.

use std::fs;

use proptest::prelude::*;

use bilevel_ptp::instances::{load_chao, load_json, load_solomon, random_euclidean, to_json, RandomSpec};
use bilevel_ptp::models::ModelKind;
use bilevel_ptp::report::{write_results_csv, ResultsRow, RESULTS_HEADER};
use bilevel_ptp::solver::brute_force_bilevel;
use bilevel_ptp::verification::{bilevel_sample, Figure1Fixture};

#[test]
fn json_file_round_trip_keeps_the_optimum() {
    let dir = tempfile::tempdir().unwrap();
    let fx = Figure1Fixture::new();
    let path = dir.path().join("figure1.json");
    fs::write(&path, serde_json::to_string_pretty(&to_json(&fx.instance, Some(&fx.compensation))).unwrap()).unwrap();
    let (inst, comp) = load_json(&path).unwrap();
    let best = brute_force_bilevel(&inst, ModelKind::Bpfm, comp.as_ref()).unwrap();
    assert_eq!(best.leader_profit, Figure1Fixture::OPTIMUM);
}

#[test]
fn tampered_costs_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let fx = Figure1Fixture::new();
    let mut doc = to_json(&fx.instance, None);
    doc.costs.as_mut().unwrap()[0][1][2] = 0.75;
    let path = dir.path().join("tampered.json");
    fs::write(&path, serde_json::to_string(&doc).unwrap()).unwrap();
    assert!(load_json(&path).is_err());
}

#[test]
fn benchmark_files_load_from_disk() {
    let dir = tempfile::tempdir().unwrap();
    let chao = dir.path().join("p1.2.k.txt");
    fs::write(&chao, "n 4\nm 2\ntmax 25\n0 0 0\n1 0 5\n0 1 5\n0 0 0\n").unwrap();
    let inst = load_chao(&chao).unwrap();
    assert_eq!((inst.n(), inst.carriers()), (2, 2));
    assert_eq!(inst.capacity().duration(1), Some(25.0));

    let solomon = dir.path().join("r101.txt");
    fs::write(
        &solomon,
        "R101\nVEHICLE\nNUMBER CAPACITY\n25 200\nCUSTOMER\nCUST NO. XCOORD. YCOORD. DEMAND READY DUE SERVICE\n0 35 35 0 0 230 0\n1 41 49 10 161 171 10\n2 35 17 7 50 60 10\n",
    )
    .unwrap();
    let inst = load_solomon(&solomon, 1, None).unwrap();
    assert_eq!(inst.n(), 2);
    assert!(load_solomon(dir.path().join("missing.txt"), 1, None).is_err());
}

#[test]
fn results_table_written_to_a_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("results.csv");
    let fx = Figure1Fixture::new();
    let skeleton = bilevel_ptp::models::build_model(&fx.instance, ModelKind::BpfmZ, Some(&fx.compensation)).unwrap();
    let report = bilevel_ptp::solver::branch_and_cut(
        &skeleton,
        &fx.instance,
        Some(&fx.compensation),
        None,
        &bilevel_ptp::solver::Limits::default(),
    )
    .unwrap();
    let row = ResultsRow::from_report(&fx.instance, &report, None);
    write_results_csv(fs::File::create(&path).unwrap(), &[row]).unwrap();
    let mut reader = csv::Reader::from_path(&path).unwrap();
    assert_eq!(reader.headers().unwrap().iter().collect::<Vec<_>>(), RESULTS_HEADER.to_vec());
    let rec = reader.records().next().unwrap().unwrap();
    assert_eq!(&rec[6], "20");
    assert_eq!(&rec[7], "20");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn random_instances_survive_the_json_round_trip(
        customers in 1usize..7,
        carriers in 1usize..3,
        duration in any::<bool>(),
        seed in 0u64..1000,
    ) {
        let inst = random_euclidean(&RandomSpec { customers, carriers, margins: vec![0.2, 0.5], duration, seed }).unwrap();
        let text = serde_json::to_string(&to_json(&inst, None)).unwrap();
        let (back, comp) = bilevel_ptp::instances::from_json(&serde_json::from_str(&text).unwrap()).unwrap();
        prop_assert!(comp.is_none());
        prop_assert_eq!(back.costs_digest(), inst.costs_digest());
        prop_assert_eq!(back.prices(), inst.prices());
        prop_assert_eq!(back.margins(), inst.margins());
        prop_assert_eq!(back.capacity(), inst.capacity());
    }

    #[test]
    fn sample_compensations_survive_the_json_round_trip(t in 0usize..40) {
        let case = bilevel_sample(t + 1, 5).unwrap().pop().unwrap();
        let text = serde_json::to_string(&to_json(&case.instance, Some(&case.compensation))).unwrap();
        let (_, comp) = bilevel_ptp::instances::from_json(&serde_json::from_str(&text).unwrap()).unwrap();
        prop_assert_eq!(comp.unwrap(), case.compensation);
    }
}
