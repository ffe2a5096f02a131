//! `simulate`: time evolution across the defect with charge monitoring.

use defectlab::defect_sim::*;
use serde_json::json;

use crate::{Check, CliError, Outcome};

#[derive(Debug, Clone, Copy, Default)]
pub struct SimulateOptions {
    /// Number of resolutions (each halving dx and dt) ending at the configured one.
    pub refine: usize,
    /// Negative control: monitor the canonical charges instead of the modified ones.
    pub disable_defect_terms: bool,
}

/// Minimum order at which drifts must fall under refinement.
pub const MIN_DRIFT_ORDER: f64 = 1.8;
/// Required ratio of canonical to modified drift.
pub const MIN_RATIO: f64 = 1e3;

fn canonical(model: Model) -> Vec<&'static str> {
    if model.is_super() {
        vec!["Q", "Qbar"]
    } else {
        vec!["E", "P"]
    }
}

pub fn simulate(cfg: &SimConfig, opts: SimulateOptions) -> Result<Outcome, CliError> {
    cfg.validate()?;
    let levels = opts.refine.max(1);
    let (series, summary, refinement) = if levels > 1 {
        let r = drift_refinement(&cfg.coarsened(levels - 1)?, levels)?;
        let (series, summary) = r.finest.clone().expect("at least one level");
        (series, summary, Some(r))
    } else {
        let series = run(cfg)?;
        let summary = drift_report(&series, cfg.tolerance)?;
        (series, summary, None)
    };
    let model = serde_json::to_value(cfg.model).ok().and_then(|v| v.as_str().map(String::from)).unwrap_or_default();
    let mut checks = Vec::new();

    if opts.disable_defect_terms {
        let names = canonical(cfg.model);
        let neg = drift_report_for(&series, cfg.tolerance, &names)?;
        let drifts: Vec<String> = names.iter().map(|n| format!("{n} {:.3e}", neg.relative(n).unwrap_or(f64::NAN))).collect();
        checks.push(Check::new(
            None,
            format!("{model}: charges without defect terms drift (negative control)"),
            !neg.pass,
            if neg.pass {
                format!("negative control FAILED: canonical charges conserved to {} ({})", cfg.tolerance, drifts.join(", "))
            } else {
                format!("negative control passed: relative drift {}", drifts.join(", "))
            },
        ));
    } else {
        let drifts: Vec<String> = summary.asserted.iter().map(|n| format!("{n} {:.3e}", summary.relative(n).unwrap_or(f64::NAN))).collect();
        checks.push(Check::new(
            Some(9),
            format!("{model}: modified charges conserved"),
            summary.pass,
            format!("relative drift {} (tolerance {:e})", drifts.join(", "), cfg.tolerance),
        ));
        if !cfg.model.is_super() && cfg.closure == Closure::Defect {
            let ratios: Vec<(String, f64)> = canonical(cfg.model).iter().map(|n| (n.to_string(), summary.ratio(n).unwrap_or(f64::NAN))).collect();
            checks.push(Check::new(
                Some(9),
                format!("{model}: unmodified charges drift more"),
                ratios.iter().all(|(_, r)| *r >= MIN_RATIO),
                ratios.iter().map(|(n, r)| format!("{n}/{n}_mod {r:.3e}")).collect::<Vec<_>>().join(", "),
            ));
        }
        if let Some(r) = &refinement {
            let ok = r.slopes.iter().all(|(_, s)| s.iter().all(|&x| x >= MIN_DRIFT_ORDER));
            let detail = r
                .slopes
                .iter()
                .map(|(n, s)| format!("{n} orders {}", s.iter().map(|x| format!("{x:.2}")).collect::<Vec<_>>().join("/")))
                .collect::<Vec<_>>()
                .join(", ");
            checks.push(Check::new(Some(9), format!("{model}: drifts fall under refinement"), ok, detail));
        }
    }

    let report = json!({
        "config": cfg,
        "rows": series.rows.len(),
        "drift": summary,
        "refinement": refinement,
    });
    Ok(Outcome {
        checks,
        report,
        files: vec![("series.csv".into(), series_csv(&series)), ("closure.csv".into(), closure_csv(&series))],
    })
}
