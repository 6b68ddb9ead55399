use std::fs;
use std::path::Path;

use super::{EvalError, ExperimentConfig, ExperimentResult};

pub const RESULTS_HEADER: [&str; 11] = [
    "ID", "Data", "Event", "Input", "Output", "Features", "Model", "Prec", "TPR", "F1", "AUC",
];

/// Three decimals, printed with a trailing `.0` for whole numbers.
fn r3(v: f64) -> String {
    format!("{:?}", (v * 1000.0).round() / 1000.0)
}

fn csv_line(fields: &[String]) -> String {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(Vec::new());
    w.write_record(fields).expect("in-memory write");
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 fields")
}

/// One results line in the published table layout (newline-terminated).
pub fn results_row(id: &str, cfg: &ExperimentConfig, prec: f64, tpr: f64, f1: f64, auc: f64) -> String {
    csv_line(&[
        id.to_string(),
        cfg.data.clone(),
        r3(cfg.event_proportion),
        r3(cfg.n_in as f64),
        r3(cfg.n_out as f64),
        cfg.features.clone(),
        cfg.model.to_string(),
        r3(prec),
        r3(tpr),
        r3(f1),
        r3(auc),
    ])
}

/// Header plus one row per successful cell, using round means.
pub fn render_results_csv(results: &[ExperimentResult]) -> String {
    let header: Vec<String> = RESULTS_HEADER.iter().map(|s| s.to_string()).collect();
    let mut out = csv_line(&header);
    for r in results.iter().filter(|r| r.is_ok()) {
        let m = |s: &Option<super::Summary>| s.map_or(0.0, |s| s.mean);
        out.push_str(&results_row(&r.id, &r.config, m(&r.precision), m(&r.tpr), m(&r.f1), m(&r.auc)));
    }
    out
}

/// Writes `results.csv`, `results.json` and `cells/<id>/roc_mean.csv`.
pub fn write_reports(out_dir: &Path, results: &[ExperimentResult]) -> Result<(), EvalError> {
    let write = |path: &Path, text: &str| {
        fs::write(path, text).map_err(|source| EvalError::Io {
            path: path.to_path_buf(),
            source,
        })
    };
    fs::create_dir_all(out_dir).map_err(|source| EvalError::Io {
        path: out_dir.to_path_buf(),
        source,
    })?;
    write(&out_dir.join("results.csv"), &render_results_csv(results))?;
    let json = serde_json::to_string_pretty(results).expect("results serialize");
    write(&out_dir.join("results.json"), &json)?;
    for r in results {
        let Some(curve) = &r.mean_roc else { continue };
        let dir = out_dir.join("cells").join(&r.id);
        fs::create_dir_all(&dir).map_err(|source| EvalError::Io {
            path: dir.clone(),
            source,
        })?;
        let mut text = String::from("fpr,tpr\n");
        for &(x, y) in &curve.points {
            text.push_str(&format!("{},{}\n", r3(x), r3(y)));
        }
        write(&dir.join("roc_mean.csv"), &text)?;
    }
    Ok(())
}

pub fn read_results_json(path: &Path) -> Result<Vec<ExperimentResult>, EvalError> {
    let text = fs::read_to_string(path).map_err(|source| EvalError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    serde_json::from_str(&text).map_err(|source| EvalError::Json {
        path: path.to_path_buf(),
        source,
    })
}

/// Relative change from `from` to `to` as a signed percentage with one
/// decimal, e.g. `+90.9%`. `None` when `from` is zero.
pub fn pct_change(from: f64, to: f64) -> Option<String> {
    if from == 0.0 {
        return None;
    }
    Some(format!("{:+.1}%", (to - from) / from * 100.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::ModelKind;

    fn cfg() -> ExperimentConfig {
        ExperimentConfig {
            data: "R+S".into(),
            event_proportion: 0.5,
            n_in: 3,
            n_out: 7,
            features: "TL,W,GPS".into(),
            model: ModelKind::RandomForest,
            multiplier: 1.0,
            rounds: 30,
            seed: 42,
        }
    }

    #[test]
    fn published_row_layout() {
        assert_eq!(
            results_row("I-58", &cfg(), 0.623, 0.014, 0.027, 0.618),
            "I-58,R+S,0.5,3.0,7.0,\"TL,W,GPS\",randomforest,0.623,0.014,0.027,0.618\n"
        );
    }

    #[test]
    fn rounding_and_single_group() {
        let mut c = cfg();
        c.features = "TL".into();
        c.event_proportion = 0.25;
        assert_eq!(
            results_row("I-1", &c, 0.66666, 1.0, 0.0, 0.5004),
            "I-1,R+S,0.25,3.0,7.0,TL,randomforest,0.667,1.0,0.0,0.5\n"
        );
    }

    #[test]
    fn percentage_change() {
        assert_eq!(pct_change(0.011, 0.021).as_deref(), Some("+90.9%"));
        assert_eq!(pct_change(0.5, 0.25).as_deref(), Some("-50.0%"));
        assert_eq!(pct_change(0.0, 0.3), None);
    }

    #[test]
    fn header_line() {
        assert_eq!(render_results_csv(&[]), "ID,Data,Event,Input,Output,Features,Model,Prec,TPR,F1,AUC\n");
    }
}
