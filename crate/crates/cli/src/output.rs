//! CSV and table renderings.

use anyhow::Context;
use unmixkit::io::PixelRecord;
use unmixkit::metrics::EvalReport;
use unmixkit::SpectralLibrary;

fn csv_text(rows: Vec<Vec<String>>) -> anyhow::Result<String> {
    let mut writer = csv::Writer::from_writer(Vec::new());
    for row in rows {
        writer.write_record(&row)?;
    }
    let bytes = writer.into_inner().context("flushing CSV")?;
    Ok(String::from_utf8(bytes).expect("CSV of UTF-8 fields is UTF-8"))
}

/// One row per nonzero coefficient; a pixel with an empty model gets one
/// row with empty coefficient fields.
pub fn records_csv(records: &[PixelRecord], library: &SpectralLibrary) -> anyhow::Result<String> {
    let mut rows = vec![["id", "solver", "index", "name", "abundance", "rmse", "rmse_units", "runtime_s"]
        .map(String::from)
        .to_vec()];
    for r in records {
        let tail = [r.rmse.to_string(), r.rmse_units.as_str().to_string(), r.runtime_s.to_string()];
        let mut push = |index: String, name: String, abundance: String| {
            let mut row = vec![r.id.clone(), r.solver.clone(), index, name, abundance];
            row.extend(tail.iter().cloned());
            rows.push(row);
        };
        if r.coefficients.is_empty() {
            push(String::new(), String::new(), String::new());
        }
        for (&i, &a) in &r.coefficients {
            let name = library.names().get(i).cloned().unwrap_or_default();
            push(i.to_string(), name, a.to_string());
        }
    }
    csv_text(rows)
}

pub fn records_table(records: &[PixelRecord], library: &SpectralLibrary) -> String {
    let mut out = String::new();
    for r in records {
        out += &format!(
            "pixel {}  solver {}  rmse {:.6} ({})  runtime {:.3e} s\n",
            r.id,
            r.solver,
            r.rmse,
            r.rmse_units.as_str(),
            r.runtime_s
        );
        let mut ranked: Vec<(usize, f64)> = r.coefficients.iter().map(|(&i, &a)| (i, a)).collect();
        ranked.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
        for (i, a) in ranked {
            let name = library.names().get(i).map_or("?", String::as_str);
            out += &format!("  {i:>5}  {name:<24} {a:.6}\n");
        }
    }
    out
}

pub fn mask_csv(ids: &[&str], scores: &[f64], mask: &[bool]) -> anyhow::Result<String> {
    let mut rows = vec![vec!["id".to_string(), "score".to_string(), "selected".to_string()]];
    for ((id, score), selected) in ids.iter().zip(scores).zip(mask) {
        rows.push(vec![id.to_string(), score.to_string(), selected.to_string()]);
    }
    csv_text(rows)
}

pub fn mask_table(ids: &[&str], scores: &[f64], mask: &[bool]) -> String {
    let width = ids.iter().map(|s| s.len()).max().unwrap_or(2).max(2);
    let mut out = format!("{:<width$}  {:>10}  selected\n", "id", "score");
    for ((id, score), selected) in ids.iter().zip(scores).zip(mask) {
        out += &format!("{id:<width$}  {score:>10.6}  {}\n", if *selected { "*" } else { "" });
    }
    out
}

pub fn report_table(report: &EvalReport) -> String {
    let opt = |v: Option<f64>, precision: usize| v.map_or("-".to_string(), |x| format!("{x:.precision$}"));
    let mut out = format!(
        "target {}  k = {}\n{:<10} {:>12} {:>12} {:>14} {:>10} {:>10} {:>9}\n",
        report.target,
        report.k,
        "technique",
        "mean_rmse",
        "units",
        "runtime_s",
        "detection",
        "map_at_k",
        "failures"
    );
    for row in &report.rows {
        out += &format!(
            "{:<10} {:>12} {:>12} {:>14} {:>10} {:>10} {:>9}\n",
            row.technique,
            opt(row.mean_rmse, 6),
            row.rmse_units.as_str(),
            row.mean_runtime_s.map_or("-".to_string(), |x| format!("{x:.3e}")),
            opt(row.detection_pct, 3),
            opt(row.map_at_k, 3),
            row.failures
        );
    }
    out
}
