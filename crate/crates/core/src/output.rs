//! CSV and JSON serialization of experiment results.
//!
//! CSV files are UTF-8 with a single header row and `.` as decimal
//! separator; floats are written with 17 significant digits. The header of
//! each table is fixed for a given [`CSV_SCHEMA_VERSION`]: the sweep table
//! always carries a column block for every protocol and leaves unselected
//! protocols empty.

use std::fmt::Write as _;
use std::io::Write;
use std::path::Path;

use serde::Serialize;

use crate::config::{ExperimentConfig, OutputFormat};
use crate::error::Result;
use crate::experiments::{DmtReport, ExperimentResult, GainRow, GapRow, SingleRealizationReport, SweepRow};
use crate::outage::DmtPoint;
use crate::protocols::Scheme;

pub const CSV_SCHEMA_VERSION: u32 = 1;

/// Float with 17 significant digits.
fn num(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else if x.is_nan() {
        "NaN".to_string()
    } else if x > 0.0 {
        "inf".to_string()
    } else {
        "-inf".to_string()
    }
}

pub fn sweep_header() -> String {
    let mut cols = vec!["snr_db".to_string()];
    for s in Scheme::ALL {
        cols.push(format!("{s}_mean"));
        cols.push(format!("{s}_stderr"));
        cols.push(format!("{s}_fallback"));
    }
    cols.push("interference_decodable_fraction".into());
    cols.push("source_links_dominate_fraction".into());
    cols.join(",")
}

pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut out = sweep_header();
    out.push('\n');
    for row in rows {
        let mut fields = vec![num(row.snr_db)];
        for s in Scheme::ALL {
            match row.stats(s) {
                Some(p) => {
                    fields.push(num(p.mean));
                    fields.push(num(p.std_err));
                    fields.push(num(p.fallback_fraction));
                }
                None => fields.extend(["".to_string(), "".to_string(), "".to_string()]),
            }
        }
        fields.push(num(row.interference_decodable_fraction));
        fields.push(num(row.source_links_dominate_fraction));
        out.push_str(&fields.join(","));
        out.push('\n');
    }
    out
}

pub fn gain_csv(rows: &[GainRow]) -> String {
    let mut out = String::from("l,snr_db,gain,successive_mean,classic2_mean,asymptote\n");
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{}",
            r.l,
            num(r.snr_db),
            num(r.gain),
            num(r.successive_mean),
            num(r.classic2_mean),
            num(r.asymptote)
        );
    }
    out
}

fn dmt_rows(out: &mut String, name: &str, formula: Option<f64>, p: &DmtPoint) {
    for i in 0..p.snr_grid_db.len() {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{}",
            name,
            num(p.multiplexing_r),
            num(p.snr_grid_db[i]),
            num(p.target_rate[i]),
            num(p.outage_prob[i]),
            num(p.std_err[i]),
            p.events[i],
            num(p.diversity_estimate),
            num(p.diversity_lsq),
            formula.map(num).unwrap_or_default(),
            p.low_event_points.contains(&p.snr_grid_db[i]) as u8,
        );
    }
}

pub fn dmt_csv(report: &DmtReport) -> String {
    let mut out = String::from(
        "model,multiplexing_r,snr_db,target_rate,outage_prob,std_err,events,diversity_estimate,diversity_lsq,formula,low_events\n",
    );
    dmt_rows(&mut out, "successive", Some(report.formula), &report.successive);
    if let Some(c) = &report.classic2 {
        dmt_rows(&mut out, "classic2", None, c);
    }
    out
}

pub fn gap_csv(rows: &[GapRow]) -> String {
    let mut out = String::from("snr_db,mean_genie,mean_vblast,mean_gap,min_gap,relative_gap\n");
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{}",
            num(r.snr_db),
            num(r.mean_genie),
            num(r.mean_vblast),
            num(r.mean_gap),
            num(r.min_gap),
            num(r.relative_gap)
        );
    }
    out
}

pub fn single_csv(report: &SingleRealizationReport) -> String {
    let mut out = String::from("snr_db,scheme,rate_per_slot,fallback,interference_decodable,source_links_dominate,per_codeword_rates\n");
    for p in &report.points {
        for r in &p.reports {
            let (decodable, dominate) = match r.conditions {
                Some(c) => (
                    (c.interference_decodable as u8).to_string(),
                    (c.source_links_dominate as u8).to_string(),
                ),
                None => (String::new(), String::new()),
            };
            let caps: Vec<String> = r.per_codeword_rates.iter().map(|&x| num(x)).collect();
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{}",
                num(p.snr_db),
                r.scheme,
                num(r.rate_per_slot),
                r.branch_log.fallback as u8,
                decodable,
                dominate,
                caps.join(";")
            );
        }
    }
    out
}

pub fn to_csv(result: &ExperimentResult) -> String {
    match result {
        ExperimentResult::GeometrySweep(rows) => sweep_csv(rows),
        ExperimentResult::GainCurve(rows) => gain_csv(rows),
        ExperimentResult::DmtSlope(report) => dmt_csv(report),
        ExperimentResult::VblastGap(rows) => gap_csv(rows),
        ExperimentResult::SingleRealization(report) => single_csv(report),
    }
}

#[derive(Serialize)]
struct JsonDocument<'a> {
    version: u32,
    config: &'a ExperimentConfig,
    result: &'a ExperimentResult,
}

pub fn to_json(cfg: &ExperimentConfig, result: &ExperimentResult) -> Result<String> {
    let doc = JsonDocument {
        version: CSV_SCHEMA_VERSION,
        config: cfg,
        result,
    };
    let mut s = serde_json::to_string_pretty(&doc)?;
    s.push('\n');
    Ok(s)
}

pub fn render(cfg: &ExperimentConfig, result: &ExperimentResult) -> Result<String> {
    match cfg.output_format {
        OutputFormat::Csv => Ok(to_csv(result)),
        OutputFormat::Json => to_json(cfg, result),
    }
}

/// Writes the rendered result to `path`, or to stdout when `path` is `None`.
pub fn write_result(cfg: &ExperimentConfig, result: &ExperimentResult, path: Option<&Path>) -> Result<()> {
    let text = render(cfg, result)?;
    match path {
        Some(p) => std::fs::write(p, text)?,
        None => std::io::stdout().lock().write_all(text.as_bytes())?,
    }
    Ok(())
}
