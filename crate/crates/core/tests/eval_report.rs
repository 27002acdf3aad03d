use std::collections::{BTreeSet, HashMap};
use std::fs;

use mutox::evaluation::{emit_report, evaluate, read_report, EvalConfig, EvalError, EvalItem, ProviderScores};

fn item(id: &str, lang: &str, label: bool) -> EvalItem {
    EvalItem {
        id: id.into(),
        lang: lang.into(),
        subset: "test".into(),
        label,
        categories: BTreeSet::new(),
    }
}

fn provider(name: &str, scores: &[(&str, f64)]) -> ProviderScores {
    ProviderScores {
        provider: name.into(),
        scores: scores.iter().map(|(i, s)| (i.to_string(), *s)).collect(),
    }
}

fn two_language_report() -> mutox::evaluation::EvalReport {
    let items = vec![
        item("a1", "eng", true),
        item("a2", "eng", false),
        item("a3", "eng", true),
        item("b1", "spa", false),
        item("b2", "spa", true),
    ];
    let providers = vec![
        provider("mutox", &[("a1", 0.9), ("a2", 0.2), ("a3", 0.6), ("b1", 0.7), ("b2", 0.8)]),
        provider("etox", &[("a1", 1.0), ("a2", 0.0), ("a3", 0.0), ("b1", 1.0), ("b2", 1.0)]),
    ];
    evaluate(&items, &providers, &EvalConfig::default()).unwrap()
}

#[test]
fn two_languages_give_two_rows_and_avg() {
    let dir = tempfile::tempdir().unwrap();
    let report = two_language_report();
    emit_report(&report, dir.path()).unwrap();
    let auc = fs::read_to_string(dir.path().join("auc.csv")).unwrap();
    let mutox_rows: Vec<&str> = auc.lines().filter(|l| l.contains(",mutox,")).collect();
    assert_eq!(mutox_rows.len(), 3);
    assert!(mutox_rows[0].starts_with("eng,"));
    assert!(mutox_rows[1].starts_with("spa,"));
    assert!(mutox_rows[2].starts_with("avg,"));
    assert!(!auc.contains("avg7"), "avg7 needs all seven languages");
    assert_eq!(auc.lines().next().unwrap(), "lang,provider,subset,n,n_toxic,auc");
}

#[test]
fn aggregates_are_means_of_member_rows() {
    let report = two_language_report();
    let agg = report.aggregates.iter().find(|a| a.provider == "mutox").unwrap();
    let rows: Vec<_> = report.rows.iter().filter(|r| r.provider == "mutox").collect();
    let mean_auc = rows.iter().map(|r| r.auc.unwrap()).sum::<f64>() / rows.len() as f64;
    assert_eq!(agg.auc, Some(mean_auc));
    let mean_recall = rows.iter().map(|r| r.fixed_precision.recall).sum::<f64>() / rows.len() as f64;
    assert_eq!(agg.fixed_recall, mean_recall);
}

#[test]
fn canonical_provider_order_in_rows() {
    let report = two_language_report();
    assert_eq!(report.providers, ["etox", "mutox"]);
    assert_eq!(report.rows[0].provider, "etox");
}

#[test]
fn reemission_is_byte_identical() {
    let report = two_language_report();
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let files = emit_report(&report, a.path()).unwrap();
    emit_report(&report, b.path()).unwrap();
    for f in files {
        let name = f.file_name().unwrap();
        assert_eq!(fs::read(&f).unwrap(), fs::read(b.path().join(name)).unwrap(), "{name:?}");
    }
}

#[test]
fn report_json_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let report = two_language_report();
    emit_report(&report, dir.path()).unwrap();
    let back = read_report(&dir.path().join("report.json")).unwrap();
    assert_eq!(back.schema, 1);
    assert_eq!(back.rows.len(), report.rows.len());
    let text = fs::read_to_string(dir.path().join("report.json")).unwrap();
    assert!(text.contains("\"schema\": 1"));
}

#[test]
fn empty_provider_set_is_an_error() {
    assert!(matches!(
        evaluate(&[item("a", "eng", true)], &[], &EvalConfig::default()),
        Err(EvalError::EmptyProviderSet)
    ));
    let mut report = two_language_report();
    report.providers.clear();
    let dir = tempfile::tempdir().unwrap();
    assert!(matches!(emit_report(&report, dir.path()), Err(EvalError::EmptyProviderSet)));
}

#[test]
fn avg7_emitted_when_all_members_present() {
    let langs = ["eng", "spa", "fra", "ita", "por", "rus", "tur"];
    let mut items = Vec::new();
    let mut scores = HashMap::new();
    for l in langs {
        for (k, label) in [(0, true), (1, false)] {
            let id = format!("{l}{k}");
            scores.insert(id.clone(), if label { 0.9 } else { 0.1 });
            items.push(item(&id, l, label));
        }
    }
    let p = ProviderScores {
        provider: "mutox".into(),
        scores,
    };
    let report = evaluate(&items, &[p], &EvalConfig::default()).unwrap();
    let names: Vec<&str> = report.aggregates.iter().map(|a| a.name.as_str()).collect();
    assert_eq!(names, ["avg7", "avg"]);
    assert!(report.correlation.is_none());
}
