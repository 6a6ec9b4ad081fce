//! End-to-end runs of scenario files, the bundled profile and the golden output.
//!
//! Set `ECOMP_BLESS=1` to regenerate the pinned files after an intended change.

use std::path::{Path, PathBuf};

use ecomp::baselines::SchemeKind;
use ecomp::harness::profile::write_profile;
use ecomp::harness::{
    bs_budgets_at, load_profiles, parse_results, run_scenario, scenario_profile, write_results, EnergyProfile,
    Format, ProfileMix, ResultTable, Scenario, THREADS_ENV,
};

fn manifest() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
}

fn bless() -> bool {
    std::env::var_os("ECOMP_BLESS").is_some()
}

fn run(path: &Path) -> ResultTable {
    let scn = Scenario::load(path).unwrap();
    let profile = scenario_profile(&scn).unwrap();
    run_scenario(&scn, profile.as_ref()).unwrap()
}

fn csv(table: &ResultTable) -> String {
    let mut buf = Vec::new();
    write_results(table, &mut buf, Format::Csv).unwrap();
    String::from_utf8(buf).unwrap()
}

#[test]
fn bundled_profile_is_the_synthetic_one() {
    let path = manifest().join("data/synthetic_profile.csv");
    let synth = EnergyProfile::synthetic();
    if bless() {
        write_profile(&synth, &path).unwrap();
    }
    let loaded = load_profiles(&path).unwrap();
    assert_eq!(loaded.len(), 384);
    assert_eq!(loaded.timestamps, synth.timestamps);
    for t in 0..384 {
        assert!((loaded.wind[t] - synth.wind[t]).abs() <= 1e-9);
        assert!((loaded.solar[t] - synth.solar[t]).abs() <= 1e-9);
        assert!((0.0..=1.0).contains(&loaded.wind[t]) && (0.0..=1.0).contains(&loaded.solar[t]));
    }
}

#[test]
fn three_bs_budgets_at_sampled_slots() {
    let profile = load_profiles(&manifest().join("data/synthetic_profile.csv")).unwrap();
    let mix = ProfileMix::new(vec![(0.5, 0.5), (0.1, 0.9), (0.9, 0.1)], 10.0).unwrap();
    // Computed by hand from the CSV rows.
    let expected = [
        (0, [2.8214637, 0.56429274, 5.07863466]),
        (48, [9.701101055, 9.940220211, 9.461981899]),
        (330, [5.91125602, 5.616872964, 6.205639076]),
    ];
    for (slot, want) in expected {
        let got = bs_budgets_at(&profile, &mix, slot).unwrap();
        for i in 0..3 {
            assert!((got[i] - want[i]).abs() <= 1e-8, "slot {slot} BS {i}: {} vs {}", got[i], want[i]);
        }
    }
    assert!(bs_budgets_at(&profile, &mix, 384).is_err());
}

#[test]
fn micro_scenario_matches_golden_file() {
    let golden = manifest().join("tests/data/micro_golden.csv");
    let text = csv(&run(&manifest().join("tests/data/micro.toml")));
    if bless() {
        std::fs::write(&golden, &text).unwrap();
    }
    assert_eq!(text, std::fs::read_to_string(&golden).unwrap());
}

#[test]
fn runs_are_deterministic_and_thread_independent() {
    let scn = manifest().join("tests/data/micro_profile.toml");
    let first = csv(&run(&scn));
    assert_eq!(first, csv(&run(&scn)));
    for threads in ["1", "3"] {
        std::env::set_var(THREADS_ENV, threads);
        let again = csv(&run(&scn));
        std::env::remove_var(THREADS_ENV);
        assert_eq!(first, again, "{threads} threads");
    }
}

#[test]
fn profile_scenario_rows_are_complete() {
    let table = run(&manifest().join("tests/data/micro_profile.toml"));
    let slots: Vec<usize> = table.rows.iter().filter_map(|r| r.slot).collect();
    assert!(slots.iter().all(|s| [40, 48].contains(s)));
    // Two slots, four schemes.
    assert_eq!(table.rows.len(), 8);
    assert!(table.rows.iter().all(|r| r.n == 6 && r.failures == 0 && r.mean_rate > 0.0));
}

#[test]
fn rows_respect_beta_order() {
    let table = run(&manifest().join("tests/data/micro.toml"));
    for scheme in [SchemeKind::Joint, SchemeKind::EnergyOnly] {
        for key in ["E_db=0", "E_db=10"] {
            let lo = table.find(key, scheme, Some(0.5)).unwrap();
            let hi = table.find(key, scheme, Some(1.0)).unwrap();
            assert!(hi.mean_rate >= lo.mean_rate - 2.0 * lo.stderr.max(hi.stderr));
        }
    }
}

#[test]
fn shipped_scenarios_validate() {
    for entry in std::fs::read_dir(manifest().join("scenarios")).unwrap() {
        let path = entry.unwrap().path();
        let scn = Scenario::load(&path).unwrap();
        scn.validate().unwrap();
    }
}

#[test]
fn emitted_csv_parses_back() {
    let table = run(&manifest().join("tests/data/micro.toml"));
    let text = csv(&table);
    let back = parse_results(&text, Format::Csv).unwrap();
    assert_eq!(csv(&back), text);
}
