use std::io::Write;
use std::path::PathBuf;

use embclust::corpus::{
    ingest_amazon, ingest_news, normalize_whitespace, select_review_sentence, split_sentences,
    word_count, AmazonOptions,
};
use embclust::{Corpus, Error};
use proptest::prelude::*;
use serde_json::json;

fn jsonl(dir: &tempfile::TempDir, name: &str, lines: &[String]) -> PathBuf {
    let path = dir.path().join(name);
    let mut f = std::fs::File::create(&path).unwrap();
    for l in lines {
        writeln!(f, "{l}").unwrap();
    }
    path
}

fn review(text: &str) -> String {
    json!({ "reviewText": text, "overall": 5.0 }).to_string()
}

const GOOD: &str = "I bought this for my brother and he uses it every single day now.";

#[test]
fn keeps_everything_under_the_cap() {
    let dir = tempfile::tempdir().unwrap();
    let p = jsonl(
        &dir,
        "books.json",
        &[review(GOOD), review(GOOD), review(GOOD)],
    );
    let (c, stats) = ingest_amazon(&[(p, "Books".into())], &AmazonOptions::default()).unwrap();
    assert_eq!(c.len(), 3);
    assert_eq!(c.labels, vec!["Books"]);
    assert_eq!(stats.skipped(), 0);
    for ex in &c.examples {
        let w = word_count(&ex.text);
        assert!(w > 10 && w < 20);
    }
}

#[test]
fn categories_come_out_sorted() {
    let dir = tempfile::tempdir().unwrap();
    let toys = jsonl(&dir, "toys.json", &[review(GOOD)]);
    let apps = jsonl(&dir, "apps.json", &[review(GOOD), review(GOOD)]);
    let (c, _) = ingest_amazon(
        &[(toys, "Toys and Games".into()), (apps, "Appliances".into())],
        &AmazonOptions::default(),
    )
    .unwrap();
    assert_eq!(c.labels, vec!["Appliances", "Toys and Games"]);
    assert_eq!(c.examples[0].label, "Appliances");
    assert_eq!(c.examples[2].label, "Toys and Games");
}

#[test]
fn bad_records_are_tallied_not_fatal() {
    let dir = tempfile::tempdir().unwrap();
    let p = jsonl(
        &dir,
        "a.json",
        &[
            review(GOOD),
            "{not json".into(),
            json!({"summary": "Great Product"}).to_string(),
            review(""),
            review("Great Product."),
            String::new(),
        ],
    );
    let (c, stats) = ingest_amazon(&[(p, "A".into())], &AmazonOptions::default()).unwrap();
    assert_eq!(c.len(), 1);
    assert_eq!(stats.malformed, 1);
    assert_eq!(stats.missing_field, 1);
    assert_eq!(stats.empty_text, 1);
    assert_eq!(stats.skipped(), 3);
    assert_eq!(stats.filtered, 1);
}

#[test]
fn custom_review_field() {
    let dir = tempfile::tempdir().unwrap();
    let p = jsonl(&dir, "a.json", &[json!({ "text": GOOD }).to_string()]);
    let opts = AmazonOptions {
        review_field: "text".into(),
        ..AmazonOptions::default()
    };
    assert_eq!(ingest_amazon(&[(p, "A".into())], &opts).unwrap().0.len(), 1);
}

#[test]
fn unreadable_file_names_the_path() {
    let err = ingest_amazon(
        &[(PathBuf::from("/nonexistent/reviews.json"), "A".into())],
        &AmazonOptions::default(),
    )
    .unwrap_err();
    assert!(matches!(err, Error::Ingest { .. }));
    assert!(err.to_string().contains("/nonexistent/reviews.json"));
}

#[test]
fn same_seed_gives_identical_files() {
    let dir = tempfile::tempdir().unwrap();
    let lines: Vec<String> = (0..50)
        .map(|i| {
            review(&format!(
                "{GOOD} Item number {i} was a gift for someone I know well."
            ))
        })
        .collect();
    let p = jsonl(&dir, "a.json", &lines);
    let opts = AmazonOptions {
        per_class: 10,
        seed: 77,
        ..AmazonOptions::default()
    };
    let (a, _) = ingest_amazon(&[(p.clone(), "A".into())], &opts).unwrap();
    let (b, _) = ingest_amazon(&[(p, "A".into())], &opts).unwrap();
    let (fa, fb) = (dir.path().join("a.tsv"), dir.path().join("b.tsv"));
    a.write_tsv(&fa).unwrap();
    b.write_tsv(&fb).unwrap();
    assert_eq!(std::fs::read(&fa).unwrap(), std::fs::read(&fb).unwrap());
    assert_eq!(a.len(), 10);
    assert_eq!(Corpus::read_tsv(&fa).unwrap().examples, a.examples);
}

fn headline(h: &str, c: &str) -> String {
    json!({ "headline": h, "category": c, "short_description": "ignored" }).to_string()
}

#[test]
fn news_maps_fields() {
    let dir = tempfile::tempdir().unwrap();
    let p = jsonl(&dir, "news.json", &[headline("H", "CRIME")]);
    let (c, _) = ingest_news(&p, 1000, 0).unwrap();
    assert_eq!(c.examples[0].label, "CRIME");
    assert_eq!(c.examples[0].text, "H");
}

#[test]
fn news_forty_categories() {
    let dir = tempfile::tempdir().unwrap();
    let lines: Vec<String> = (0..400)
        .map(|i| {
            headline(
                &format!("Headline  number\t{i}"),
                &format!("CAT{:02}", i % 40),
            )
        })
        .collect();
    let p = jsonl(&dir, "news.json", &lines);
    let (c, _) = ingest_news(&p, 1000, 0).unwrap();
    assert_eq!(c.labels.len(), 40);
    assert!(c
        .examples
        .iter()
        .all(|e| !e.text.contains('\t') && !e.text.contains("  ")));
}

#[test]
fn news_empty_headline_skipped() {
    let dir = tempfile::tempdir().unwrap();
    let p = jsonl(
        &dir,
        "news.json",
        &[
            headline("", "CRIME"),
            headline("  ", "CRIME"),
            headline("ok", "TECH"),
        ],
    );
    let (c, stats) = ingest_news(&p, 1000, 0).unwrap();
    assert_eq!(c.len(), 1);
    assert_eq!(stats.empty_text, 2);
    assert_eq!(stats.skipped(), 2);
}

#[test]
fn news_cap_per_class() {
    let dir = tempfile::tempdir().unwrap();
    let mut lines: Vec<String> = (0..1500)
        .map(|i| headline(&format!("Big story {i}"), "BIG"))
        .collect();
    lines.extend((0..400).map(|i| headline(&format!("Small story {i}"), "SMALL")));
    let p = jsonl(&dir, "news.json", &lines);
    let (c, _) = ingest_news(&p, 1000, 5).unwrap();
    let counts = c.count_by_label();
    assert_eq!(counts["BIG"], 1000);
    assert_eq!(counts["SMALL"], 400);
}

proptest! {
    #[test]
    fn selected_sentence_is_a_split_sentence_of_legal_length(
        words in prop::collection::vec("[a-zA-Z]{1,8}[.!?]{0,1}", 0..80),
        seps in prop::collection::vec(prop::sample::select(vec![" ", "  ", "\t", "\n"]), 80),
    ) {
        let text: String = words.iter().zip(&seps).map(|(w, s)| format!("{w}{s}")).collect();
        if let Some(s) = select_review_sentence(&text) {
            let w = word_count(&s);
            prop_assert!(w > 10 && w < 20);
            let norm = normalize_whitespace(&text);
            prop_assert!(split_sentences(&norm).contains(&s.as_str()));
            prop_assert!(!s.contains('\t') && !s.contains('\n'));
        }
    }
}
