//! The reproduced summary must match the checked-in golden file.

use std::path::Path;

use screenbook::cli::reproduce::reproduce;

#[test]
fn reproduced_summary_matches_golden() {
    let configs = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let report = reproduce(&configs, None).unwrap();
    assert!(report.all_pass(), "{}", report.table());
    let golden = std::fs::read_to_string(configs.join("golden/reproduce.csv")).unwrap();
    let got = report.to_csv().unwrap();
    for (i, (a, b)) in got.lines().zip(golden.lines()).enumerate() {
        assert_eq!(a, b, "line {}", i + 1);
    }
    assert_eq!(got.lines().count(), golden.lines().count());
}
