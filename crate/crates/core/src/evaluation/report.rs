use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::correlation::CANONICAL_PROVIDER_ORDER;
use super::{
    align_scores, category_breakdown, fmt_sig6, pearson_matrix, prf_at_threshold, recall_at_fixed_precision,
    roc_auc, round_sig6, CategoryBreakdown, CorrelationMatrix, EvalError, FixedPrecisionResult, LabeledScores,
    PrecisionTarget, Prf, QuantileReport,
};
use crate::corpus::ToxicityCategory;
use crate::selection::StageCount;

pub const REPORT_SCHEMA: u32 = 1;

/// A named set of languages to macro-average over; `None` means every
/// evaluated language.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LanguageSubset {
    pub name: String,
    pub languages: Option<BTreeSet<String>>,
}

impl LanguageSubset {
    pub fn avg7() -> Self {
        Self {
            name: "avg7".into(),
            languages: Some(
                ["eng", "spa", "fra", "ita", "por", "rus", "tur"]
                    .into_iter()
                    .map(String::from)
                    .collect(),
            ),
        }
    }

    pub fn avg() -> Self {
        Self {
            name: "avg".into(),
            languages: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalConfig {
    pub threshold: f64,
    pub baseline_provider: Option<String>,
    pub precision: PrecisionTarget,
    pub aggregates: Vec<LanguageSubset>,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            threshold: 0.5,
            baseline_provider: Some("etox".into()),
            precision: PrecisionTarget::default(),
            aggregates: vec![LanguageSubset::avg7(), LanguageSubset::avg()],
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalItem {
    pub id: String,
    pub lang: String,
    /// Evaluation split such as `devtest` or `test`.
    pub subset: String,
    pub label: bool,
    pub categories: BTreeSet<ToxicityCategory>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProviderScores {
    pub provider: String,
    pub scores: HashMap<String, f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricRow {
    pub lang: String,
    pub provider: String,
    pub subset: String,
    pub n: usize,
    pub n_toxic: usize,
    pub auc: Option<f64>,
    pub prf: Prf,
    pub fixed_precision: FixedPrecisionResult,
    pub categories: Option<CategoryBreakdown>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateRow {
    pub name: String,
    pub provider: String,
    pub subset: String,
    pub languages: Vec<String>,
    pub n: usize,
    pub n_toxic: usize,
    /// Mean over member rows with a defined AUC.
    pub auc: Option<f64>,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub fixed_precision: f64,
    pub fixed_recall: f64,
    pub fixed_f1: f64,
}

/// F1 of a provider at its fixed-precision threshold against the
/// baseline's F1 at the report threshold, both macro-averaged over the
/// languages the two share.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct F1Gain {
    pub provider: String,
    pub subset: String,
    pub baseline_provider: String,
    pub languages: usize,
    pub baseline_f1: f64,
    pub f1: f64,
    /// `None` when the baseline F1 is 0.
    pub relative_change_pct: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub schema: u32,
    pub config: EvalConfig,
    pub providers: Vec<String>,
    pub rows: Vec<MetricRow>,
    pub aggregates: Vec<AggregateRow>,
    pub f1_gains: Vec<F1Gain>,
    pub correlation: Option<CorrelationMatrix>,
    pub stage_distribution: Option<Vec<StageCount>>,
    pub quantiles: Option<QuantileReport>,
    pub notes: Vec<String>,
}

fn provider_key(p: &str) -> (usize, &str) {
    let rank = CANONICAL_PROVIDER_ORDER
        .iter()
        .position(|c| *c == p)
        .unwrap_or(CANONICAL_PROVIDER_ORDER.len());
    (rank, p)
}

fn mean(values: impl Iterator<Item = f64>) -> Option<f64> {
    let (sum, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    (n > 0).then(|| sum / n as f64)
}

struct Group<'a> {
    lang: &'a str,
    subset: &'a str,
    items: Vec<&'a EvalItem>,
}

fn scored(group: &Group<'_>, provider: &ProviderScores) -> Result<Option<LabeledScores>, EvalError> {
    let mut ids = Vec::new();
    let mut scores = Vec::new();
    let mut labels = Vec::new();
    for item in &group.items {
        if let Some(&s) = provider.scores.get(&item.id) {
            ids.push(item.id.clone());
            scores.push(s);
            labels.push(item.label);
        }
    }
    if ids.is_empty() {
        return Ok(None);
    }
    LabeledScores::new(&provider.provider, group.lang, ids, scores, labels).map(Some)
}

/// Computes every per-language metric, the aggregates, the F1 gains and the
/// correlation matrix.
pub fn evaluate(items: &[EvalItem], providers: &[ProviderScores], cfg: &EvalConfig) -> Result<EvalReport, EvalError> {
    if providers.is_empty() {
        return Err(EvalError::EmptyProviderSet);
    }
    if items.is_empty() {
        return Err(EvalError::Empty);
    }
    let mut grouped: BTreeMap<(&str, &str), Vec<&EvalItem>> = BTreeMap::new();
    for item in items {
        grouped.entry((&item.lang, &item.subset)).or_default().push(item);
    }
    let groups: Vec<Group<'_>> = grouped
        .into_iter()
        .map(|((lang, subset), items)| Group { lang, subset, items })
        .collect();
    let mut providers: Vec<&ProviderScores> = providers.iter().collect();
    providers.sort_by(|a, b| provider_key(&a.provider).cmp(&provider_key(&b.provider)));

    let baseline = cfg
        .baseline_provider
        .as_ref()
        .and_then(|b| providers.iter().find(|p| &p.provider == b).copied());
    let mut notes = Vec::new();
    if let (Some(name), None) = (&cfg.baseline_provider, baseline) {
        notes.push(format!("baseline provider `{name}` has no scores; targets use the floor only"));
    }

    let per_group: Vec<(Vec<MetricRow>, Vec<String>)> = groups
        .par_iter()
        .map(|g| -> Result<_, EvalError> {
            let mut rows = Vec::new();
            let mut notes = Vec::new();
            let floor = cfg.precision.floor_for(g.lang);
            let baseline_precision = match baseline {
                Some(b) => match scored(g, b)? {
                    Some(d) => prf_at_threshold(&d, cfg.threshold).precision,
                    None => {
                        notes.push(format!("{}/{}: no baseline scores; target uses the floor only", g.lang, g.subset));
                        0.0
                    }
                },
                None => 0.0,
            };
            for p in &providers {
                let Some(data) = scored(g, p)? else {
                    notes.push(format!("{}/{}: provider `{}` has no scores", g.lang, g.subset, p.provider));
                    continue;
                };
                let auc = match roc_auc(&data) {
                    Ok(a) => Some(a),
                    Err(EvalError::SingleClass) => None,
                    Err(e) => return Err(e),
                };
                let category_map: HashMap<String, BTreeSet<ToxicityCategory>> = g
                    .items
                    .iter()
                    .filter(|i| i.label && !i.categories.is_empty())
                    .map(|i| (i.id.clone(), i.categories.clone()))
                    .collect();
                let categories = match category_breakdown(&data, &category_map, baseline_precision, floor) {
                    Ok(b) => Some(b),
                    Err(EvalError::MissingCategory(id)) => {
                        notes.push(format!(
                            "{}/{}/{}: category breakdown skipped, toxic item `{id}` has no category",
                            g.lang, g.subset, p.provider
                        ));
                        None
                    }
                    Err(e) => return Err(e),
                };
                rows.push(MetricRow {
                    lang: g.lang.to_string(),
                    provider: p.provider.clone(),
                    subset: g.subset.to_string(),
                    n: data.len(),
                    n_toxic: data.positives(),
                    auc,
                    prf: prf_at_threshold(&data, cfg.threshold),
                    fixed_precision: recall_at_fixed_precision(&data, baseline_precision, floor)?,
                    categories,
                });
            }
            Ok((rows, notes))
        })
        .collect::<Result<_, _>>()?;

    let mut rows = Vec::new();
    for (r, n) in per_group {
        rows.extend(r);
        notes.extend(n);
    }
    rows.sort_by(|a, b| {
        (&a.lang, provider_key(&a.provider), &a.subset).cmp(&(&b.lang, provider_key(&b.provider), &b.subset))
    });

    let subsets: BTreeSet<&str> = rows.iter().map(|r| r.subset.as_str()).collect();
    let mut aggregates = Vec::new();
    for subset in &subsets {
        for agg in &cfg.aggregates {
            for p in &providers {
                let members: Vec<&MetricRow> = rows
                    .iter()
                    .filter(|r| &r.subset == subset && r.provider == p.provider)
                    .filter(|r| agg.languages.as_ref().is_none_or(|l| l.contains(&r.lang)))
                    .collect();
                if members.is_empty() {
                    continue;
                }
                if let Some(langs) = &agg.languages {
                    if members.len() < langs.len() {
                        notes.push(format!(
                            "{}/{}/{}: omitted, {} of {} languages present",
                            agg.name,
                            subset,
                            p.provider,
                            members.len(),
                            langs.len()
                        ));
                        continue;
                    }
                }
                let m = |f: fn(&MetricRow) -> f64| mean(members.iter().map(|r| f(r))).expect("non-empty");
                aggregates.push(AggregateRow {
                    name: agg.name.clone(),
                    provider: p.provider.clone(),
                    subset: subset.to_string(),
                    languages: members.iter().map(|r| r.lang.clone()).collect(),
                    n: members.iter().map(|r| r.n).sum(),
                    n_toxic: members.iter().map(|r| r.n_toxic).sum(),
                    auc: mean(members.iter().filter_map(|r| r.auc)),
                    precision: m(|r| r.prf.precision),
                    recall: m(|r| r.prf.recall),
                    f1: m(|r| r.prf.f1),
                    fixed_precision: m(|r| r.fixed_precision.precision_at_threshold),
                    fixed_recall: m(|r| r.fixed_precision.recall),
                    fixed_f1: m(|r| r.fixed_precision.f1),
                });
            }
        }
    }

    let mut f1_gains = Vec::new();
    if let Some(b) = baseline {
        for subset in &subsets {
            let base: BTreeMap<&str, f64> = rows
                .iter()
                .filter(|r| &r.subset == subset && r.provider == b.provider)
                .map(|r| (r.lang.as_str(), r.prf.f1))
                .collect();
            for p in providers.iter().filter(|p| p.provider != b.provider) {
                let pairs: Vec<(f64, f64)> = rows
                    .iter()
                    .filter(|r| &r.subset == subset && r.provider == p.provider)
                    .filter_map(|r| base.get(r.lang.as_str()).map(|bf| (*bf, r.fixed_precision.f1)))
                    .collect();
                let (Some(baseline_f1), Some(f1)) =
                    (mean(pairs.iter().map(|p| p.0)), mean(pairs.iter().map(|p| p.1)))
                else {
                    continue;
                };
                f1_gains.push(F1Gain {
                    provider: p.provider.clone(),
                    subset: subset.to_string(),
                    baseline_provider: b.provider.clone(),
                    languages: pairs.len(),
                    baseline_f1,
                    f1,
                    relative_change_pct: (baseline_f1 > 0.0).then(|| (f1 / baseline_f1 - 1.0) * 100.0),
                });
            }
        }
    }

    let correlation = if providers.len() >= 2 {
        let ids: BTreeSet<&str> = items.iter().map(|i| i.id.as_str()).collect();
        let restricted: Vec<(String, HashMap<String, f64>)> = providers
            .iter()
            .map(|p| {
                let m = p
                    .scores
                    .iter()
                    .filter(|(id, _)| ids.contains(id.as_str()))
                    .map(|(id, s)| (id.clone(), *s))
                    .collect();
                (p.provider.clone(), m)
            })
            .collect();
        match align_scores(&restricted).and_then(|aligned| pearson_matrix(&aligned)) {
            Ok(m) => Some(m),
            Err(e) => {
                notes.push(format!("correlation skipped: {e}"));
                None
            }
        }
    } else {
        None
    };

    Ok(EvalReport {
        schema: REPORT_SCHEMA,
        config: cfg.clone(),
        providers: providers.iter().map(|p| p.provider.clone()).collect(),
        rows,
        aggregates,
        f1_gains,
        correlation,
        stage_distribution: None,
        quantiles: None,
        notes,
    })
}

fn opt(x: Option<f64>) -> String {
    x.map(fmt_sig6).unwrap_or_default()
}

struct Csv {
    path: PathBuf,
    body: String,
}

impl Csv {
    fn new(dir: &Path, name: &str, header: &[&str]) -> Self {
        let mut c = Csv {
            path: dir.join(name),
            body: String::new(),
        };
        c.row(header.iter().map(|s| s.to_string()));
        c
    }

    fn row<I: IntoIterator<Item = String>>(&mut self, cells: I) {
        let line: Vec<String> = cells.into_iter().map(|c| quote(&c)).collect();
        self.body.push_str(&line.join(","));
        self.body.push('\n');
    }

    fn write(self) -> Result<PathBuf, EvalError> {
        write_file(&self.path, self.body.as_bytes())?;
        Ok(self.path)
    }
}

fn quote(cell: &str) -> String {
    if cell.contains([',', '"', '\n', '\r']) {
        format!("\"{}\"", cell.replace('"', "\"\""))
    } else {
        cell.to_string()
    }
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<(), EvalError> {
    let io = |source| EvalError::Io {
        path: path.to_path_buf(),
        source,
    };
    let mut f = fs::File::create(path).map_err(io)?;
    f.write_all(bytes).map_err(io)
}

fn round_json(v: &mut Value) {
    match v {
        Value::Number(n) if !n.is_i64() && !n.is_u64() => {
            if let Some(x) = n.as_f64() {
                if let Some(r) = serde_json::Number::from_f64(round_sig6(x)) {
                    *n = r;
                }
            }
        }
        Value::Array(a) => a.iter_mut().for_each(round_json),
        Value::Object(o) => o.values_mut().for_each(round_json),
        _ => {}
    }
}

pub fn write_stage_distribution_csv(dir: &Path, stages: &[StageCount]) -> Result<PathBuf, EvalError> {
    let mut csv = Csv::new(dir, "stage_distribution.csv", &["lang", "stage", "count"]);
    for s in stages {
        csv.row([s.lang.clone(), s.stage.clone(), s.count.to_string()]);
    }
    csv.write()
}

pub fn write_quantiles_csv(dir: &Path, q: &QuantileReport) -> Result<PathBuf, EvalError> {
    let mut csv = Csv::new(
        dir,
        "quantiles.csv",
        &["bin", "n", "n_toxic", "score_min", "score_max", "toxic_fraction"],
    );
    for b in &q.bins {
        csv.row([
            b.bin.to_string(),
            b.n.to_string(),
            b.n_toxic.to_string(),
            fmt_sig6(b.score_min),
            fmt_sig6(b.score_max),
            fmt_sig6(b.toxic_fraction),
        ]);
    }
    csv.write()
}

/// Writes one CSV per table plus `report.json`; returns the written paths.
pub fn emit_report(report: &EvalReport, out_dir: &Path) -> Result<Vec<PathBuf>, EvalError> {
    if report.providers.is_empty() {
        return Err(EvalError::EmptyProviderSet);
    }
    fs::create_dir_all(out_dir).map_err(|source| EvalError::Io {
        path: out_dir.to_path_buf(),
        source,
    })?;
    let mut written = Vec::new();
    let key = |r: &MetricRow| [r.lang.clone(), r.provider.clone(), r.subset.clone()];

    let mut auc = Csv::new(out_dir, "auc.csv", &["lang", "provider", "subset", "n", "n_toxic", "auc"]);
    for r in &report.rows {
        auc.row(key(r).into_iter().chain([r.n.to_string(), r.n_toxic.to_string(), opt(r.auc)]));
    }
    for a in &report.aggregates {
        auc.row([
            a.name.clone(),
            a.provider.clone(),
            a.subset.clone(),
            a.n.to_string(),
            a.n_toxic.to_string(),
            opt(a.auc),
        ]);
    }
    written.push(auc.write()?);

    let mut prf = Csv::new(
        out_dir,
        "prf.csv",
        &[
            "lang", "provider", "subset", "threshold", "tp", "fp", "fn", "precision", "recall", "f1", "no_predictions",
        ],
    );
    for r in &report.rows {
        let p = &r.prf;
        prf.row(key(r).into_iter().chain([
            fmt_sig6(p.threshold),
            p.tp.to_string(),
            p.fp.to_string(),
            p.fn_.to_string(),
            fmt_sig6(p.precision),
            fmt_sig6(p.recall),
            fmt_sig6(p.f1),
            p.no_predictions.to_string(),
        ]));
    }
    for a in &report.aggregates {
        prf.row([
            a.name.clone(),
            a.provider.clone(),
            a.subset.clone(),
            fmt_sig6(report.config.threshold),
            String::new(),
            String::new(),
            String::new(),
            fmt_sig6(a.precision),
            fmt_sig6(a.recall),
            fmt_sig6(a.f1),
            String::new(),
        ]);
    }
    written.push(prf.write()?);

    let mut rap = Csv::new(
        out_dir,
        "recall_at_precision.csv",
        &[
            "lang",
            "provider",
            "subset",
            "baseline_precision",
            "floor",
            "target_precision",
            "threshold",
            "precision",
            "recall",
            "f1",
            "reachable",
        ],
    );
    for r in &report.rows {
        let f = &r.fixed_precision;
        rap.row(key(r).into_iter().chain([
            fmt_sig6(f.baseline_precision),
            fmt_sig6(f.floor),
            fmt_sig6(f.target_precision),
            fmt_sig6(f.chosen_threshold),
            fmt_sig6(f.precision_at_threshold),
            fmt_sig6(f.recall),
            fmt_sig6(f.f1),
            f.reachable.to_string(),
        ]));
    }
    for a in &report.aggregates {
        rap.row([
            a.name.clone(),
            a.provider.clone(),
            a.subset.clone(),
            String::new(),
            String::new(),
            String::new(),
            String::new(),
            fmt_sig6(a.fixed_precision),
            fmt_sig6(a.fixed_recall),
            fmt_sig6(a.fixed_f1),
            String::new(),
        ]);
    }
    written.push(rap.write()?);

    let mut gain = Csv::new(
        out_dir,
        "f1_gain.csv",
        &["provider", "subset", "baseline_provider", "languages", "baseline_f1", "f1", "relative_change_pct"],
    );
    for g in &report.f1_gains {
        gain.row([
            g.provider.clone(),
            g.subset.clone(),
            g.baseline_provider.clone(),
            g.languages.to_string(),
            fmt_sig6(g.baseline_f1),
            fmt_sig6(g.f1),
            opt(g.relative_change_pct),
        ]);
    }
    written.push(gain.write()?);

    let corr_header: Vec<&str> = std::iter::once("provider")
        .chain(report.correlation.iter().flat_map(|m| m.providers.iter().map(String::as_str)))
        .collect();
    let mut corr = Csv::new(out_dir, "correlation.csv", &corr_header);
    if let Some(m) = &report.correlation {
        for (p, row) in m.providers.iter().zip(&m.values) {
            corr.row(std::iter::once(p.clone()).chain(row.iter().map(|v| fmt_sig6(*v))));
        }
    }
    written.push(corr.write()?);

    let mut cat = Csv::new(
        out_dir,
        "category_recall.csv",
        &["lang", "provider", "subset", "threshold", "category", "n_toxic", "hits", "recall"],
    );
    let mut var = Csv::new(
        out_dir,
        "category_variance.csv",
        &["lang", "provider", "subset", "categories", "variance"],
    );
    for r in &report.rows {
        let Some(b) = &r.categories else { continue };
        for c in &b.categories {
            cat.row(key(r).into_iter().chain([
                fmt_sig6(b.threshold.chosen_threshold),
                c.category.as_str().to_string(),
                c.n_toxic.to_string(),
                c.hits.to_string(),
                fmt_sig6(c.recall),
            ]));
        }
        var.row(key(r).into_iter().chain([b.categories.len().to_string(), opt(b.variance)]));
    }
    written.push(cat.write()?);
    written.push(var.write()?);

    if let Some(stages) = &report.stage_distribution {
        written.push(write_stage_distribution_csv(out_dir, stages)?);
    }
    if let Some(q) = &report.quantiles {
        written.push(write_quantiles_csv(out_dir, q)?);
    }

    let mut json = serde_json::to_value(report).expect("report serializes");
    round_json(&mut json);
    let mut text = serde_json::to_string_pretty(&json).expect("json value serializes");
    text.push('\n');
    let path = out_dir.join("report.json");
    write_file(&path, text.as_bytes())?;
    written.push(path);
    Ok(written)
}

/// Reads a `report.json` written by [`emit_report`].
pub fn read_report(path: &Path) -> Result<EvalReport, EvalError> {
    let text = fs::read_to_string(path).map_err(|source| EvalError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    serde_json::from_str(&text).map_err(|e| EvalError::Io {
        path: path.to_path_buf(),
        source: std::io::Error::new(std::io::ErrorKind::InvalidData, e),
    })
}
