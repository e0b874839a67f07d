//! Report rendering: JSON and markdown summaries and an SVG load-loss plot.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::LoadLossCurve;
use crate::metrics::LoadLevelStats;
use crate::saturation::{
    assess_pdr_accuracy, detect_saturation, Classification, PdrAccuracy, SaturationVerdict,
};

pub const SCHEMA_VERSION: &str = "report-v1";

/// JSON schema for [`ReportBundle`] documents.
pub const REPORT_SCHEMA_V1: &str = include_str!("../schemas/report-v1.json");

/// Lowest PLR drawn on the log axis; zero and smaller losses sit here.
pub const PLR_FLOOR: f64 = 1e-6;

pub const REPORT_JSON: &str = "report.json";
pub const REPORT_MD: &str = "report.md";
pub const LOSS_SVG: &str = "loss_curve.svg";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportBundle {
    pub schema_version: String,
    pub campaign: String,
    /// SHA-256 of the canonical runs file the stats and verdict came from.
    pub curve_checksum: String,
    pub generated_at: String,
    pub accuracy: PdrAccuracy,
    pub verdict: SaturationVerdict,
    pub stats: Vec<LoadLevelStats>,
    pub warnings: Vec<String>,
    pub plot_artifacts: Vec<String>,
}

impl ReportBundle {
    /// Analyze `curve` and bundle the result. Stats, verdict and checksum
    /// all come from the same curve.
    pub fn analyze(
        curve: &LoadLossCurve,
        campaign: impl Into<String>,
        pdr_threshold: f64,
        eta: f64,
        generated_at: impl Into<String>,
    ) -> Result<Self> {
        let verdict = detect_saturation(curve.stats(), pdr_threshold, eta)?;
        Ok(ReportBundle {
            schema_version: SCHEMA_VERSION.into(),
            campaign: campaign.into(),
            curve_checksum: curve.checksum(),
            generated_at: generated_at.into(),
            accuracy: assess_pdr_accuracy(&verdict),
            verdict,
            stats: curve.stats().to_vec(),
            warnings: curve.warnings().to_vec(),
            plot_artifacts: Vec::new(),
        })
    }

    pub fn is_derived_from(&self, curve: &LoadLossCurve) -> bool {
        self.curve_checksum == curve.checksum() && self.stats == curve.stats()
    }

    /// Largest Δ_UCL95 over the levels where it is defined.
    pub fn max_delta_ucl95(&self) -> Option<f64> {
        self.stats
            .iter()
            .filter_map(|s| s.delta_ucl95)
            .fold(None, |acc, d| Some(acc.map_or(d, |a: f64| a.max(d))))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Json,
    Markdown,
}

pub fn emit_report(bundle: &ReportBundle, format: ReportFormat) -> Result<String> {
    match format {
        ReportFormat::Json => {
            let mut s = serde_json::to_string_pretty(bundle)?;
            s.push('\n');
            Ok(s)
        }
        ReportFormat::Markdown => Ok(markdown(bundle)),
    }
}

fn mpps(pps: f64) -> String {
    format!("{:.4}", pps / 1e6)
}

fn opt(v: Option<f64>, f: impl Fn(f64) -> String) -> String {
    v.map(f).unwrap_or_else(|| "n/a".into())
}

fn sci(v: f64) -> String {
    format!("{v:.3e}")
}

fn markdown(b: &ReportBundle) -> String {
    let v = &b.verdict;
    let mut s = String::new();
    let _ = writeln!(s, "# Load-loss report: {}\n", b.campaign);
    let _ = writeln!(s, "- Classification: **{}**", v.classification);
    let pdr_pct = v.pdr_threshold * 100.0;
    let pdr = match (v.pdr_load_pps, v.sweep_exhausted) {
        (Some(l), true) => format!(
            "{} Mpps (sweep exhausted, threshold never exceeded)",
            mpps(l)
        ),
        (Some(l), false) => format!("{} Mpps", mpps(l)),
        (None, _) => "absent (threshold exceeded at the lowest load)".into(),
    };
    let _ = writeln!(s, "- PDR@{pdr_pct}%: {pdr}");
    let _ = writeln!(
        s,
        "- PDR accuracy: {} ({})",
        if b.accuracy.accurate {
            "accurate"
        } else {
            "inaccurate"
        },
        b.accuracy.reason
    );
    let _ = writeln!(
        s,
        "- Potential saturation point: {}",
        opt(v.potential_sat_load_pps, |l| format!("{} Mpps", mpps(l)))
    );
    let _ = writeln!(s, "- η: {}", v.eta);
    let _ = writeln!(s, "- Peak throughput: {} Mpps", mpps(v.peak_throughput_pps));
    let _ = writeln!(s, "- Runs checksum: `{}`", b.curve_checksum);
    let _ = writeln!(s, "- Generated: {}", b.generated_at);
    for w in &b.warnings {
        let _ = writeln!(s, "- Warning: {w}");
    }

    let _ = writeln!(s, "\n## Per-load statistics\n");
    let _ = writeln!(
        s,
        "| Load [Mpps] | K | PLR | DR | σ_PLR | LCL95 | UCL95 | Δ_UCL95 | Throughput [Mpps] |"
    );
    let _ = writeln!(s, "|---|---|---|---|---|---|---|---|---|");
    for l in &b.stats {
        let _ = writeln!(
            s,
            "| {} | {} | {} | {:.6} | {} | {} | {} | {} | {} |",
            mpps(l.offered_load),
            l.k,
            sci(l.plr),
            l.dr,
            opt(l.sigma_plr, sci),
            opt(l.lcl95, sci),
            opt(l.ucl95, sci),
            opt(l.delta_ucl95, |d| format!("{d:.4}")),
            mpps(l.throughput),
        );
    }

    if !v.tir_series.is_empty() {
        let _ = writeln!(s, "\n## Throughput increase ratio\n");
        let _ = writeln!(s, "| From [Mpps] | To [Mpps] | TIR | < η |");
        let _ = writeln!(s, "|---|---|---|---|");
        for p in &v.tir_series {
            let _ = writeln!(
                s,
                "| {} | {} | {:.4} | {} |",
                mpps(p.from_load_pps),
                mpps(p.to_load_pps),
                p.tir,
                if p.tir < v.eta { "yes" } else { "no" }
            );
        }
    }
    s
}

#[derive(Debug, Clone)]
pub struct PlotOptions {
    pub width: f64,
    pub height: f64,
    /// Add a linear-scale delivery-ratio panel under the loss panel.
    pub delivery_panel: bool,
    pub title: String,
}

impl Default for PlotOptions {
    fn default() -> Self {
        PlotOptions {
            width: 800.0,
            height: 480.0,
            delivery_panel: true,
            title: String::new(),
        }
    }
}

const MARGIN_LEFT: f64 = 80.0;
const MARGIN_RIGHT: f64 = 30.0;
const MARGIN_TOP: f64 = 60.0;
const MARGIN_BOTTOM: f64 = 50.0;
const DR_PANEL_HEIGHT: f64 = 220.0;

struct Frame {
    left: f64,
    top: f64,
    width: f64,
    height: f64,
    x_max: f64,
}

impl Frame {
    fn x(&self, load_pps: f64) -> f64 {
        self.left + load_pps / 1e6 / self.x_max * self.width
    }

    /// Log10 PLR mapped from [1e-6, 1] onto the panel, clamped at the floor.
    fn y_log(&self, plr: f64) -> f64 {
        let decades = -PLR_FLOOR.log10();
        let l = plr.clamp(PLR_FLOOR, 1.0).log10();
        self.top + (-l / decades) * self.height
    }

    fn y_lin(&self, v: f64) -> f64 {
        self.top + (1.0 - v.clamp(0.0, 1.0)) * self.height
    }
}

fn nice_step(range: f64) -> f64 {
    let raw = range / 8.0;
    let mag = 10f64.powf(raw.log10().floor());
    let norm = raw / mag;
    let f = if norm <= 1.0 {
        1.0
    } else if norm <= 2.0 {
        2.0
    } else if norm <= 2.5 {
        2.5
    } else if norm <= 5.0 {
        5.0
    } else {
        10.0
    };
    f * mag
}

fn esc(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

fn banner_color(c: Classification) -> &'static str {
    match c {
        Classification::Good => "#2ca02c",
        Classification::Bad => "#d62728",
        Classification::NoSaturation => "#7f7f7f",
    }
}

/// Render the load-loss curve as a standalone SVG document.
///
/// The loss panel uses a log10 PLR axis bottoming out at [`PLR_FLOOR`].
/// Levels with PLR below the floor (including zero loss) are drawn at the
/// floor as hollow squares; the rest as filled circles with 95% CI whiskers.
pub fn render_loss_plot(
    stats: &[LoadLevelStats],
    verdict: &SaturationVerdict,
    options: &PlotOptions,
) -> Result<String> {
    if stats.len() < 2 {
        return Err(Error::invalid(
            "a plot needs at least two load levels; use the tabular report instead",
        ));
    }
    let top_load = stats.iter().map(|l| l.offered_load).fold(0.0, f64::max) / 1e6;
    let step = nice_step(top_load);
    let x_max = (top_load / step).ceil() * step;
    let plot_w = options.width - MARGIN_LEFT - MARGIN_RIGHT;
    let loss = Frame {
        left: MARGIN_LEFT,
        top: MARGIN_TOP,
        width: plot_w,
        height: options.height - MARGIN_TOP - MARGIN_BOTTOM,
        x_max,
    };
    let total_h = if options.delivery_panel {
        options.height + DR_PANEL_HEIGHT
    } else {
        options.height
    };
    let color = banner_color(verdict.classification);

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}" font-family="sans-serif" font-size="12">"#,
        w = options.width,
        h = total_h
    );
    let _ = writeln!(
        s,
        r#"<rect class="border" x="1" y="1" width="{:.2}" height="{:.2}" fill="white" stroke="{color}" stroke-width="2"/>"#,
        options.width - 2.0,
        total_h - 2.0
    );
    let _ = writeln!(
        s,
        r#"<text class="banner" x="{:.2}" y="28" font-size="20" font-weight="bold" fill="{color}" text-anchor="end">{}</text>"#,
        options.width - MARGIN_RIGHT,
        verdict.classification
    );
    if !options.title.is_empty() {
        let _ = writeln!(
            s,
            r#"<text class="title" x="{MARGIN_LEFT}" y="28" font-size="16">{}</text>"#,
            esc(&options.title)
        );
    }

    // loss panel axes
    axes_frame(&mut s, &loss, step);
    for d in 0..=6 {
        let v = 10f64.powi(-d);
        let y = loss.y_log(v);
        let _ = writeln!(
            s,
            r##"<line class="grid" x1="{:.2}" y1="{y:.2}" x2="{:.2}" y2="{y:.2}" stroke="#dddddd"/>"##,
            loss.left,
            loss.left + loss.width
        );
        let _ = writeln!(
            s,
            r#"<text class="ytick" x="{:.2}" y="{:.2}" text-anchor="end">1e-{d}</text>"#,
            loss.left - 6.0,
            y + 4.0
        );
    }
    let _ = writeln!(
        s,
        r#"<text class="ylabel" transform="translate(20 {:.2}) rotate(-90)" text-anchor="middle">Packet loss ratio</text>"#,
        loss.top + loss.height / 2.0
    );

    // pdr marker
    if let Some(pdr) = verdict.pdr_load_pps {
        let x = loss.x(pdr);
        let _ = writeln!(
            s,
            r##"<line class="pdr-marker" x1="{x:.2}" y1="{:.2}" x2="{x:.2}" y2="{:.2}" stroke="#1f77b4" stroke-dasharray="6,4"/>"##,
            loss.top,
            loss.top + loss.height
        );
        let _ = writeln!(
            s,
            r##"<text class="pdr-label" x="{:.2}" y="{:.2}" fill="#1f77b4">PDR@{}% {:.4} Mpps</text>"##,
            x + 4.0,
            loss.top + 14.0,
            verdict.pdr_threshold * 100.0,
            pdr / 1e6
        );
    }

    // curve
    let pts: Vec<String> = stats
        .iter()
        .map(|l| format!("{:.2},{:.2}", loss.x(l.offered_load), loss.y_log(l.plr)))
        .collect();
    let _ = writeln!(
        s,
        r##"<polyline class="plr-line" fill="none" stroke="#2ca02c" stroke-width="1.5" points="{}"/>"##,
        pts.join(" ")
    );
    for l in stats {
        let x = loss.x(l.offered_load);
        if let (Some(lo), Some(hi)) = (l.lcl95, l.ucl95) {
            let (y1, y2) = (loss.y_log(lo), loss.y_log(hi));
            let _ = writeln!(
                s,
                r##"<path class="ci" d="M{x:.2},{y1:.2}V{y2:.2}M{:.2},{y1:.2}h6M{:.2},{y2:.2}h6" stroke="#555555" fill="none"/>"##,
                x - 3.0,
                x - 3.0
            );
        }
        if l.plr < PLR_FLOOR {
            let y = loss.y_log(PLR_FLOOR);
            let _ = writeln!(
                s,
                r##"<rect class="plr-floor" data-plr="{}" x="{:.2}" y="{:.2}" width="7" height="7" fill="white" stroke="#2ca02c"/>"##,
                l.plr,
                x - 3.5,
                y - 3.5
            );
        } else {
            let _ = writeln!(
                s,
                r##"<circle class="plr-point" data-plr="{}" cx="{x:.2}" cy="{:.2}" r="3.5" fill="#2ca02c"/>"##,
                l.plr,
                loss.y_log(l.plr)
            );
        }
    }

    if options.delivery_panel {
        let dr = Frame {
            left: MARGIN_LEFT,
            top: options.height + 10.0,
            width: plot_w,
            height: DR_PANEL_HEIGHT - 10.0 - MARGIN_BOTTOM,
            x_max,
        };
        axes_frame(&mut s, &dr, step);
        for i in 0..=4 {
            let v = i as f64 * 0.25;
            let _ = writeln!(
                s,
                r#"<text class="ytick" x="{:.2}" y="{:.2}" text-anchor="end">{v:.2}</text>"#,
                dr.left - 6.0,
                dr.y_lin(v) + 4.0
            );
        }
        let _ = writeln!(
            s,
            r#"<text class="ylabel" transform="translate(20 {:.2}) rotate(-90)" text-anchor="middle">Delivery ratio</text>"#,
            dr.top + dr.height / 2.0
        );
        let pts: Vec<String> = stats
            .iter()
            .map(|l| format!("{:.2},{:.2}", dr.x(l.offered_load), dr.y_lin(l.dr)))
            .collect();
        let _ = writeln!(
            s,
            r##"<polyline class="dr-line" fill="none" stroke="#d62728" stroke-width="1.5" points="{}"/>"##,
            pts.join(" ")
        );
        for l in stats {
            let _ = writeln!(
                s,
                r##"<circle class="dr-point" cx="{:.2}" cy="{:.2}" r="3" fill="#d62728"/>"##,
                dr.x(l.offered_load),
                dr.y_lin(l.dr)
            );
        }
    }
    s.push_str("</svg>\n");
    Ok(s)
}

fn axes_frame(s: &mut String, f: &Frame, step: f64) {
    let bottom = f.top + f.height;
    let _ = writeln!(
        s,
        r#"<rect class="axes" x="{:.2}" y="{:.2}" width="{:.2}" height="{:.2}" fill="none" stroke="black"/>"#,
        f.left, f.top, f.width, f.height
    );
    let n = (f.x_max / step).round() as usize;
    for i in 0..=n {
        let v = i as f64 * step;
        let x = f.left + v / f.x_max * f.width;
        let _ = writeln!(
            s,
            r#"<line class="xtick" x1="{x:.2}" y1="{bottom:.2}" x2="{x:.2}" y2="{:.2}" stroke="black"/>"#,
            bottom + 5.0
        );
        let _ = writeln!(
            s,
            r#"<text class="xtick-label" x="{x:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
            bottom + 18.0,
            trim_float(v)
        );
    }
    let _ = writeln!(
        s,
        r#"<text class="xlabel" x="{:.2}" y="{:.2}" text-anchor="middle">Offered load [Mpps]</text>"#,
        f.left + f.width / 2.0,
        bottom + 36.0
    );
}

fn trim_float(v: f64) -> String {
    let s = format!("{v:.3}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    s.to_string()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::saturation::detect_saturation;

    fn level(load: f64, plr: f64) -> LoadLevelStats {
        LoadLevelStats {
            offered_load: load,
            k: 2,
            plr,
            dr: 1.0 - plr,
            throughput: load * (1.0 - plr),
            sigma_plr: Some(0.0),
            lcl95: Some(plr),
            ucl95: Some(plr),
            delta_ucl95: (plr > 0.0).then_some(0.0),
        }
    }

    #[test]
    fn nice_steps() {
        assert_eq!(nice_step(2.0), 0.25);
        assert_eq!(nice_step(8.0), 1.0);
        assert_eq!(nice_step(15.0), 2.0);
    }

    #[test]
    fn log_axis_clamps() {
        let f = Frame {
            left: 0.0,
            top: 0.0,
            width: 100.0,
            height: 600.0,
            x_max: 1.0,
        };
        assert_eq!(f.y_log(1.0), 0.0);
        assert_eq!(f.y_log(0.0), 600.0);
        assert_eq!(f.y_log(1e-9), 600.0);
        assert!((f.y_log(1e-2) - 200.0).abs() < 1e-9);
    }

    #[test]
    fn single_level_rejected() {
        let stats = vec![level(1e6, 0.0), level(2e6, 0.5)];
        let v = detect_saturation(&stats, 0.005, 0.1).unwrap();
        assert!(render_loss_plot(&stats[..1], &v, &PlotOptions::default()).is_err());
    }

    #[test]
    fn escapes_title() {
        let stats = vec![level(1e6, 0.0), level(2e6, 0.5), level(3e6, 0.6)];
        let v = detect_saturation(&stats, 0.005, 0.1).unwrap();
        let opts = PlotOptions {
            title: "a<b & c".into(),
            ..PlotOptions::default()
        };
        let svg = render_loss_plot(&stats, &v, &opts).unwrap();
        assert!(svg.contains("a&lt;b &amp; c"));
    }
}
