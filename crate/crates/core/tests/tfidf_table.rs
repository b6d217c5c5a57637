use zsbench_core::features::{Vectorizer, VectorizerParams};
use zsbench_core::preprocess::CleanedDocument;

fn doc(id: usize, tokens: &[&str]) -> CleanedDocument {
    CleanedDocument::new(id, tokens.iter().map(|t| t.to_string()).collect())
}

fn toy() -> Vec<CleanedDocument> {
    vec![
        doc(0, &["a", "b", "a"]),
        doc(1, &["b", "c"]),
        doc(2, &["a", "c", "d"]),
        doc(3, &["d"]),
        doc(4, &["b", "b", "e"]),
    ]
}

// worked out by hand from the smoothed idf with N = 5
const IDF: [f64; 5] = [
    1.693_147_180_559_945_4, // ln 2 + 1
    1.405_465_108_108_164_4, // ln 1.5 + 1
    1.693_147_180_559_945_4,
    1.693_147_180_559_945_4,
    2.098_612_288_668_11, // ln 3 + 1
];

const WEIGHTS: [[f64; 5]; 5] = [
    [0.923_607_743_911_373, 0.383_338_930_173_996, 0.0, 0.0, 0.0],
    [0.0, 0.638_710_577_565_487, 0.769_447_072_972_509, 0.0, 0.0],
    [0.577_350_269_189_626, 0.0, 0.577_350_269_189_626, 0.577_350_269_189_626, 0.0],
    [0.0, 0.0, 0.0, 1.0, 0.0],
    [0.0, 0.801_309_686_143_325, 0.0, 0.0, 0.598_249_769_655_523],
];

#[test]
fn weights_match_hand_table() {
    let docs = toy();
    let v = Vectorizer::fit(&docs, VectorizerParams { min_df: 1, ngram_max: 1 }).unwrap();
    assert_eq!(v.terms(), ["a", "b", "c", "d", "e"]);
    for (term, expected) in ["a", "b", "c", "d", "e"].iter().zip(IDF) {
        assert!((v.idf(term).unwrap() - expected).abs() < 1e-9, "{term}");
    }
    for (d, row) in docs.iter().zip(WEIGHTS) {
        let dense = v.transform(d).to_dense();
        for (got, want) in dense.iter().zip(row) {
            assert!((got - want).abs() < 1e-9, "doc {}: {dense:?}", d.id);
        }
    }
}

#[test]
fn min_df_two_prunes_the_hapax() {
    let v = Vectorizer::fit(&toy(), VectorizerParams::default()).unwrap();
    assert_eq!(v.terms(), ["a", "b", "c", "d"]);
    assert_eq!(v.doc_freq("e"), None);
    // idf still uses the full training document count
    assert!((v.idf("b").unwrap() - IDF[1]).abs() < 1e-12);
}

#[test]
fn transforming_test_documents_leaves_the_vocabulary_alone() {
    let v = Vectorizer::fit(&toy(), VectorizerParams { min_df: 1, ngram_max: 1 }).unwrap();
    let before = v.clone();
    let unseen = doc(9, &["zebra", "a", "zebra"]);
    let x = v.transform(&unseen);
    assert_eq!(v, before);
    assert_eq!(x.entries(), &[(0, 1.0)]);
    assert!(v.transform(&doc(10, &["zebra"])).is_zero());
    assert!(v.transform(&doc(11, &[])).is_zero());
}
