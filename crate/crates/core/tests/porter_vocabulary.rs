use zsbench_core::preprocess::stem;

const SAMPLE: &str = include_str!("data/porter_sample.txt");

#[test]
fn matches_reference_vocabulary_sample() {
    let pairs: Vec<(&str, &str)> = SAMPLE
        .lines()
        .filter_map(|l| l.split_once(' '))
        .collect();
    assert!(pairs.len() >= 100);
    let wrong: Vec<String> = pairs
        .iter()
        .filter(|(w, s)| stem(w) != *s)
        .map(|(w, s)| format!("{w}: expected {s}, got {}", stem(w)))
        .collect();
    assert!(wrong.is_empty(), "{wrong:#?}");
}

#[test]
fn stemming_is_stable_on_its_own_output_for_common_suffixes() {
    for word in ["run", "quickli", "connect", "gener"] {
        assert_eq!(stem(word), word);
    }
}
