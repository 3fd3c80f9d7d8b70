//! Command implementations behind the `ketra` binary.
//!
//! Each command is a thin composition of library calls plus file output, so
//! everything here is just as usable from tests and examples.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::config::{EvalMode, RunConfig};
use crate::error::{Error, Result};
use crate::eval::{
    classify_and_report, density_sweep, make_test_set, make_weighted_test_set, mean_std,
    read_labeled_tsv, run_protocol, sample_stratified, score_items, tune_threshold, DensityRow,
    EvalReport, LabeledTriples,
};
use crate::graph::{
    build_tensor, load_dataset_dir, stats, DatasetStats, KnowledgeGraph, LiteralPolicy,
};
use crate::models::{read_factor_csvs, write_factor_csvs, FactorSet, Hyperparams, ModelKind};
use crate::seed::derive_seed;
use crate::similarity::{compute_similarity, Encoding};
use crate::solver::{fit, FitConfig};

fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent).map_err(|e| Error::Io {
                path: parent.to_owned(),
                source: e,
            })?;
        }
    }
    std::fs::write(path, text).map_err(|e| Error::Io {
        path: path.to_owned(),
        source: e,
    })
}

/// `ketra stats`: ingest a dataset directory and report its shape
/// statistics as text or a CSV row.
pub fn run_stats(dir: &Path, policy: LiteralPolicy, csv: bool) -> Result<(DatasetStats, String)> {
    let (kg, report) = load_dataset_dir(dir, policy)?;
    let tensor = build_tensor(&kg)?;
    let st = stats(&tensor);
    let text = if csv {
        format!(
            "n_entities,n_relations,n_facts,avg_degree,graph_density\n{},{},{},{:.5},{:.5}\n",
            st.n_entities, st.n_relations, st.n_facts, st.avg_degree, st.graph_density
        )
    } else {
        let mut s = report.render();
        let _ = writeln!(s, "avg degree:        {:.2}", st.avg_degree);
        let _ = writeln!(s, "graph density:     {:.5}", st.graph_density);
        s
    };
    Ok((st, text))
}

/// `ketra similarity`: write the labeled similarity CSV for one encoding.
pub fn run_similarity(
    dir: &Path,
    encoding: Encoding,
    out: &Path,
    policy: LiteralPolicy,
) -> Result<()> {
    let (kg, _) = load_dataset_dir(dir, policy)?;
    let tensor = build_tensor(&kg)?;
    let sim = compute_similarity(&tensor, encoding)?;
    if let Some(parent) = out.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent).map_err(|e| Error::Io {
                path: parent.to_owned(),
                source: e,
            })?;
        }
    }
    sim.write_csv(out, &kg.relations)
}

fn manifest_text(cfg: &RunConfig, p: usize, extra: &[(String, String)]) -> String {
    let mut lines = cfg.manifest_lines(p);
    lines.extend(extra.iter().cloned());
    let mut text = String::new();
    for (k, v) in lines {
        let _ = writeln!(text, "{k}={v}");
    }
    text
}

/// `ketra train`: fit the configured model on the full dataset and write
/// factors, the sweep trace, and a manifest into the output directory.
pub fn run_train(cfg: &RunConfig) -> Result<PathBuf> {
    cfg.validate()?;
    let (kg, _) = load_dataset_dir(&cfg.dataset_dir, LiteralPolicy::Keep)?;
    let x = build_tensor(&kg)?;
    let c = match cfg.encoding {
        Some(e) if cfg.model.uses_similarity() => Some(compute_similarity(&x, e)?),
        _ => None,
    };
    let fit_cfg = FitConfig {
        seed: derive_seed(cfg.seed, "init"),
        ..cfg.fit.clone()
    };
    let (factors, trace) = fit(cfg.model, &x, c.as_ref(), &cfg.hyperparams, &fit_cfg)?;

    let out = cfg.output_dir.clone();
    std::fs::create_dir_all(&out).map_err(|e| Error::Io {
        path: out.clone(),
        source: e,
    })?;
    write_factor_csvs(&out, &factors)?;
    trace.write_csv(&out.join("trace.csv"))?;
    let extra = vec![
        ("sweeps".into(), trace.records.len().to_string()),
        ("termination".into(), trace.termination.to_string()),
    ];
    write_text(
        &out.join("manifest.txt"),
        &manifest_text(cfg, factors.rank(), &extra),
    )?;
    if !trace.warnings.is_empty() {
        write_text(
            &out.join("warnings.txt"),
            &(trace.warnings.join("\n") + "\n"),
        )?;
    }
    Ok(out)
}

fn check_factor_dims(factors: &FactorSet, kg: &KnowledgeGraph) -> Result<()> {
    if factors.n_entities() != kg.n_entities() || factors.n_relations() != kg.n_relations() {
        return Err(Error::ShapeMismatch(format!(
            "factors cover {} entities / {} relations but the dataset has {} / {}",
            factors.n_entities(),
            factors.n_relations(),
            kg.n_entities(),
            kg.n_relations()
        )));
    }
    Ok(())
}

fn overall_csv(reports: &[EvalReport]) -> String {
    let mut text = String::from("repeat,auc,threshold,f1_micro,f1_macro,n_items\n");
    for (i, r) in reports.iter().enumerate() {
        let _ = writeln!(
            text,
            "{},{:.6},{},{:.6},{:.6},{}",
            i + 1,
            r.auc,
            if r.threshold.is_finite() {
                format!("{:.6}", r.threshold)
            } else {
                format!("{}", r.threshold)
            },
            r.f1_micro,
            r.f1_macro,
            r.n_items
        );
    }
    let col = |f: fn(&EvalReport) -> f64| -> crate::eval::MeanStd {
        mean_std(&reports.iter().map(f).collect::<Vec<_>>())
    };
    let auc = col(|r| r.auc);
    let micro = col(|r| r.f1_micro);
    let macro_ = col(|r| r.f1_macro);
    let _ = writeln!(
        text,
        "mean,{:.6},,{:.6},{:.6},",
        auc.mean, micro.mean, macro_.mean
    );
    let _ = writeln!(
        text,
        "std,{:.6},,{:.6},{:.6},",
        auc.std, micro.std, macro_.std
    );
    text
}

fn per_relation_csv(reports: &[EvalReport], kg: &KnowledgeGraph) -> String {
    use std::collections::BTreeMap;
    let mut acc: BTreeMap<u32, (Vec<f64>, Vec<f64>, Vec<f64>, Vec<f64>)> = BTreeMap::new();
    for r in reports {
        for m in &r.per_relation {
            let entry = acc.entry(m.relation).or_default();
            entry.0.push(m.precision);
            entry.1.push(m.recall);
            entry.2.push(m.f1);
            entry.3.push(m.support as f64);
        }
    }
    let mut text = String::from("relation,precision,recall,f1,support\n");
    for (rel, (p, r, f1, sup)) in acc {
        let _ = writeln!(
            text,
            "{},{:.6},{:.6},{:.6},{:.1}",
            kg.relations.label(rel),
            mean_std(&p).mean,
            mean_std(&r).mean,
            mean_std(&f1).mean,
            mean_std(&sup).mean
        );
    }
    text
}

fn summary_text(cfg: &RunConfig, reports: &[EvalReport]) -> String {
    let auc = mean_std(&reports.iter().map(|r| r.auc).collect::<Vec<_>>());
    let micro = mean_std(&reports.iter().map(|r| r.f1_micro).collect::<Vec<_>>());
    let macro_ = mean_std(&reports.iter().map(|r| r.f1_macro).collect::<Vec<_>>());
    let mut s = String::new();
    let _ = writeln!(s, "model:     {}", cfg.model);
    let _ = writeln!(
        s,
        "encoding:  {}",
        cfg.encoding.map(|e| e.name()).unwrap_or("-")
    );
    let _ = writeln!(s, "repeats:   {}", reports.len());
    let _ = writeln!(s, "AUC:       {:.4} ± {:.4}", auc.mean, auc.std);
    let _ = writeln!(s, "micro-F1:  {:.4} ± {:.4}", micro.mean, micro.std);
    let _ = writeln!(s, "macro-F1:  {:.4} ± {:.4}", macro_.mean, macro_.std);
    s
}

/// `ketra evaluate` without `--factors`: the full masked protocol (sample a
/// test set, train on the rest, tune the threshold on a validation sample,
/// report on the test set), repeated with consecutive seeds.
pub fn run_evaluate(cfg: &RunConfig, factors_dir: Option<&Path>) -> Result<PathBuf> {
    cfg.validate()?;
    let (kg, _) = load_dataset_dir(&cfg.dataset_dir, LiteralPolicy::Keep)?;
    let per_slice = cfg.eval.resolve_per_slice(kg.n_entities());
    let encoding = cfg.encoding.unwrap_or(Encoding::Transitivity);

    let reports: Vec<EvalReport> = match (&cfg.eval.mode, factors_dir) {
        (EvalMode::External, dir) => {
            let test_file = cfg.eval.test_file.as_ref().expect("validated");
            let test = read_labeled_tsv(test_file, &kg)?;
            let factors = match dir {
                Some(d) => read_factor_csvs(d)?,
                None => {
                    return Err(Error::Config(
                        "eval.mode=external needs --factors (train first)".into(),
                    ))
                }
            };
            check_factor_dims(&factors, &kg)?;
            vec![evaluate_given_factors(
                &kg, &factors, &test, per_slice, cfg.seed,
            )?]
        }
        (EvalMode::Weighted, _) => {
            let provided = match &cfg.eval.test_file {
                Some(path) => read_labeled_tsv(path, &kg)?
                    .items
                    .iter()
                    .filter(|it| it.3)
                    .map(|&(s, r, o, _)| (s, r, o))
                    .collect::<Vec<_>>(),
                None => {
                    // the split file has its own interning; re-map by label
                    let split =
                        crate::graph::load_split(&cfg.dataset_dir, "test", LiteralPolicy::Keep)?;
                    split
                        .triples()
                        .iter()
                        .map(|&(s, r, o)| {
                            let find = |label: &str, id: Option<u32>| {
                                id.ok_or_else(|| {
                                    Error::InvalidArgument(format!(
                                        "test split mentions {label:?}, absent from the dataset"
                                    ))
                                })
                            };
                            let s_label = split.entities.label(s);
                            let r_label = split.relations.label(r);
                            let o_label = split.entities.label(o);
                            Ok((
                                find(s_label, kg.entities.get(s_label))?,
                                find(r_label, kg.relations.get(r_label))?,
                                find(o_label, kg.entities.get(o_label))?,
                            ))
                        })
                        .collect::<Result<Vec<_>>>()?
                }
            };
            let (test, masked) =
                make_weighted_test_set(&kg, &provided, cfg.eval.weighted_policy, cfg.seed)?;
            let x = build_tensor(&masked)?;
            let c = cfg
                .model
                .uses_similarity()
                .then(|| compute_similarity(&x, encoding))
                .transpose()?;
            let fit_cfg = FitConfig {
                seed: derive_seed(cfg.seed, "init"),
                ..cfg.fit.clone()
            };
            let (factors, _) = fit(cfg.model, &x, c.as_ref(), &cfg.hyperparams, &fit_cfg)?;
            let validation =
                sample_stratified(&masked, &kg, per_slice, derive_seed(cfg.seed, "valid"))?;
            let v_scores = score_items(&factors, &validation.items)?;
            let threshold = tune_threshold(&v_scores, &validation.labels())?;
            vec![classify_and_report(&factors, &test, threshold)?]
        }
        (EvalMode::Uniform, Some(dir)) => {
            // score pre-trained factors on a fresh stratified sample; note
            // that without masking the positives were seen in training
            let factors = read_factor_csvs(dir)?;
            check_factor_dims(&factors, &kg)?;
            let (test, _) = make_test_set(&kg, per_slice, cfg.seed)?;
            vec![evaluate_given_factors(
                &kg, &factors, &test, per_slice, cfg.seed,
            )?]
        }
        (EvalMode::Uniform, None) => run_protocol(
            &kg,
            cfg.model,
            encoding,
            &cfg.hyperparams,
            &cfg.fit,
            per_slice,
            cfg.eval.repeats,
            cfg.seed,
        )?,
    };

    let out = cfg.output_dir.clone();
    write_text(&out.join("overall.csv"), &overall_csv(&reports))?;
    write_text(
        &out.join("per_relation.csv"),
        &per_relation_csv(&reports, &kg),
    )?;
    write_text(&out.join("summary.txt"), &summary_text(cfg, &reports))?;
    let extra = vec![
        (
            "eval.mode".into(),
            format!("{:?}", cfg.eval.mode).to_lowercase(),
        ),
        ("eval.per_slice".into(), per_slice.to_string()),
        ("eval.repeats".into(), reports.len().to_string()),
    ];
    write_text(
        &out.join("manifest.txt"),
        &manifest_text(cfg, cfg.hyperparams.rank_for(kg.n_relations()), &extra),
    )?;
    Ok(out)
}

fn evaluate_given_factors(
    kg: &KnowledgeGraph,
    factors: &FactorSet,
    test: &LabeledTriples,
    per_slice: usize,
    seed: u64,
) -> Result<EvalReport> {
    let validation = sample_stratified(kg, kg, per_slice, derive_seed(seed, "valid"))?;
    let v_scores = score_items(factors, &validation.items)?;
    let threshold = tune_threshold(&v_scores, &validation.labels())?;
    classify_and_report(factors, test, threshold)
}

fn density_csv(rows: &[DensityRow], kinds: &[ModelKind]) -> String {
    let mut text = String::from("fraction");
    for k in kinds {
        let _ = write!(text, ",auc_{k}");
    }
    text.push('\n');
    for row in rows {
        let _ = write!(text, "{}", row.fraction);
        for a in &row.auc {
            let _ = write!(text, ",{a:.6}");
        }
        text.push('\n');
    }
    text
}

/// `ketra sweep`: density sweep over subject fractions for one or more
/// models, one CSV row per fraction.
pub fn run_sweep(cfg: &RunConfig, fractions: &[f64], kinds: &[ModelKind]) -> Result<PathBuf> {
    cfg.validate()?;
    for k in kinds {
        if k.uses_similarity() && cfg.encoding.is_none() {
            return Err(Error::Config(format!("model {k} requires model.encoding")));
        }
    }
    let (kg, _) = load_dataset_dir(&cfg.dataset_dir, LiteralPolicy::Keep)?;
    let per_slice = cfg.eval.resolve_per_slice(kg.n_entities());
    let encoding = cfg.encoding.unwrap_or(Encoding::Transitivity);
    let hs: Vec<Hyperparams> = kinds.iter().map(|_| cfg.hyperparams.clone()).collect();
    let rows = density_sweep(
        &kg, fractions, kinds, encoding, &hs, &cfg.fit, per_slice, cfg.seed,
    )?;
    let out = cfg.output_dir.clone();
    write_text(&out.join("density.csv"), &density_csv(&rows, kinds))?;
    let extra = vec![
        (
            "sweep.fractions".into(),
            fractions
                .iter()
                .map(|f| f.to_string())
                .collect::<Vec<_>>()
                .join(","),
        ),
        (
            "sweep.models".into(),
            kinds.iter().map(|k| k.name()).collect::<Vec<_>>().join(","),
        ),
    ];
    write_text(
        &out.join("manifest.txt"),
        &manifest_text(cfg, cfg.hyperparams.rank_for(kg.n_relations()), &extra),
    )?;
    Ok(out)
}
