mod common;

use common::validator_oracle::compare;

#[test]
fn validator_agrees_with_minute_simulation() {
    let c = compare(1500, 11);
    eprintln!("{} cases, {} feasible, violations {:?}", c.cases, c.feasible, c.kinds);
    assert_eq!(c.disagreements, 0);
    assert_eq!(c.kinds.len(), 8, "some violation kinds never occurred: {:?}", c.kinds);
    // Both classes must be well represented for the comparison to mean anything.
    assert!(c.feasible > c.cases / 5 && c.feasible < c.cases * 4 / 5, "feasible {}", c.feasible);
}
