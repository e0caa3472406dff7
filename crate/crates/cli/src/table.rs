//! Markdown rendering of the run report: a metric x selector accuracy table
//! with one column per classifier family, plus the winning hyperparameters.

use eegfc_core::ml::{ModelFamily, ParamValue};

use crate::commands::{CellReport, RunReport};

fn family_title(f: ModelFamily) -> &'static str {
    match f {
        ModelFamily::Svm => "SVM",
        ModelFamily::Dt => "DT",
        ModelFamily::Rf => "RF",
        ModelFamily::Mlp => "MLP",
    }
}

fn param_str(v: &ParamValue) -> String {
    match v {
        ParamValue::Int(i) => i.to_string(),
        ParamValue::Float(f) => format!("{f}"),
        ParamValue::Text(s) => s.clone(),
    }
}

fn cell_text(cell: Option<&CellReport>) -> String {
    match cell {
        None => "—".to_string(),
        Some(c) => match (&c.status[..], &c.report) {
            ("ok", Some(r)) => format!("{:.2}%", r.mean_accuracy),
            _ => "failed".to_string(),
        },
    }
}

pub fn render(report: &RunReport) -> String {
    let mut metrics = Vec::new();
    let mut selectors = Vec::new();
    let mut families = Vec::new();
    for c in &report.cells {
        if !metrics.contains(&c.metric) {
            metrics.push(c.metric);
        }
        if !selectors.contains(&c.selector) {
            selectors.push(c.selector);
        }
        if !families.contains(&c.family) {
            families.push(c.family);
        }
    }

    let mut out = String::new();
    out.push_str(&format!(
        "# Run {}\n\nseed {}, band {:.1}-{:.1} Hz, {}x{} cross-validation, top {} features, {} subjects\n\n",
        report.run_id,
        report.seed,
        report.band.0,
        report.band.1,
        report.cv.folds,
        report.cv.repeats,
        report.top_k,
        report.n_subjects,
    ));

    out.push_str("## Mean cross-validated accuracy\n\n");
    out.push_str("| Metric | Selection |");
    for f in &families {
        out.push_str(&format!(" {} |", family_title(*f)));
    }
    out.push('\n');
    out.push_str("|---|---|");
    for _ in &families {
        out.push_str("---|");
    }
    out.push('\n');
    for m in &metrics {
        for s in &selectors {
            out.push_str(&format!(
                "| {} | {} |",
                m.as_str().to_uppercase(),
                s.as_str().to_uppercase()
            ));
            for f in &families {
                let cell = report
                    .cells
                    .iter()
                    .find(|c| c.metric == *m && c.selector == *s && c.family == *f);
                out.push_str(&format!(" {} |", cell_text(cell)));
            }
            out.push('\n');
        }
    }

    out.push_str("\n## Best hyperparameters per cell\n\n");
    out.push_str("| Metric | Selection | Family | Best hyperparameters | Mean accuracy |\n");
    out.push_str("|---|---|---|---|---|\n");
    for c in &report.cells {
        let (params, acc) = match &c.report {
            Some(r) => {
                let parts: Vec<String> = r
                    .best_params
                    .0
                    .iter()
                    .map(|(k, v)| format!("{k} = {}", param_str(v)))
                    .collect();
                (parts.join(", "), format!("{:.2}%", r.mean_accuracy))
            }
            None => (
                c.error.clone().unwrap_or_else(|| "failed".into()),
                "—".into(),
            ),
        };
        out.push_str(&format!(
            "| {} | {} | {} | {} | {} |\n",
            c.metric.as_str().to_uppercase(),
            c.selector.as_str().to_uppercase(),
            family_title(c.family),
            params,
            acc
        ));
    }
    out
}
