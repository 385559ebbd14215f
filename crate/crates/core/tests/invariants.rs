mod suites;

#[test]
fn randomized_invariants_hold() {
    let results = suites::invariants::all(256);
    let failures: Vec<_> = results.iter().filter(|r| r.failure.is_some()).collect();
    assert!(failures.is_empty(), "{failures:#?}");
    assert!(results.iter().map(|r| r.cases).sum::<u32>() >= 1000);
}
