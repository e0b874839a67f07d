use std::path::{Path, PathBuf};

use pdrcheck::ingest::read_campaign;
use pdrcheck::report::{
    emit_report, render_loss_plot, PlotOptions, ReportBundle, ReportFormat, PLR_FLOOR,
    REPORT_SCHEMA_V1,
};
use pdrcheck::saturation::Classification;
use regex::Regex;
use serde_json::Value;

const STAMP: &str = "2024-01-01T00:00:00Z";

fn valid_fixtures() -> Vec<PathBuf> {
    let root = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/valid");
    let mut v: Vec<PathBuf> = std::fs::read_dir(root)
        .unwrap()
        .map(|e| e.unwrap().path())
        .collect();
    v.sort();
    v
}

fn bundle(name: &str) -> ReportBundle {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("tests/fixtures/valid")
        .join(name);
    let curve = read_campaign(&dir).unwrap();
    ReportBundle::analyze(&curve, name, 0.005, 0.1, STAMP).unwrap()
}

fn validator() -> jsonschema::Validator {
    let schema: Value = serde_json::from_str(REPORT_SCHEMA_V1).unwrap();
    jsonschema::validator_for(&schema).unwrap()
}

#[test]
fn reports_for_all_fixtures_validate() {
    let v = validator();
    for dir in valid_fixtures() {
        let curve = read_campaign(&dir).unwrap();
        let mut b = ReportBundle::analyze(&curve, "x", 0.005, 0.1, STAMP).unwrap();
        for artifacts in [vec![], vec!["loss_curve.svg".to_string()]] {
            b.plot_artifacts = artifacts;
            let doc: Value =
                serde_json::from_str(&emit_report(&b, ReportFormat::Json).unwrap()).unwrap();
            let errors: Vec<String> = v.iter_errors(&doc).map(|e| e.to_string()).collect();
            assert!(errors.is_empty(), "{}: {errors:?}", dir.display());
        }
    }
}

#[test]
fn schema_rejects_tampered_reports() {
    let v = validator();
    let good: Value =
        serde_json::from_str(&emit_report(&bundle("good_sharp"), ReportFormat::Json).unwrap())
            .unwrap();
    assert!(v.is_valid(&good));

    let mut bad = good.clone();
    bad["verdict"]["classification"] = "MAYBE".into();
    assert!(!v.is_valid(&bad));

    let mut bad = good.clone();
    bad["curve_checksum"] = "abc".into();
    assert!(!v.is_valid(&bad));

    let mut bad = good.clone();
    bad["surprise"] = 1.into();
    assert!(!v.is_valid(&bad));

    let mut bad = good;
    bad.as_object_mut().unwrap().remove("stats");
    assert!(!v.is_valid(&bad));
}

#[test]
fn json_round_trips_and_stays_tied_to_its_curve() {
    let b = bundle("good_sharp");
    let text = emit_report(&b, ReportFormat::Json).unwrap();
    assert!(text.ends_with("}\n"));
    let back: ReportBundle = serde_json::from_str(&text).unwrap();
    assert_eq!(back, b);

    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/valid");
    assert!(back.is_derived_from(&read_campaign(dir.join("good_sharp")).unwrap()));
    assert!(!back.is_derived_from(&read_campaign(dir.join("bad_gradual")).unwrap()));
}

#[test]
fn json_key_order_is_fixed() {
    let text = emit_report(&bundle("two_level"), ReportFormat::Json).unwrap();
    let doc: Value = serde_json::from_str(&text).unwrap();
    let keys: Vec<&str> = doc
        .as_object()
        .unwrap()
        .keys()
        .map(String::as_str)
        .collect();
    assert_eq!(
        keys,
        [
            "schema_version",
            "campaign",
            "curve_checksum",
            "generated_at",
            "accuracy",
            "verdict",
            "stats",
            "warnings",
            "plot_artifacts"
        ]
    );
}

#[test]
fn markdown_summarizes_verdict_and_levels() {
    let b = bundle("bad_gradual");
    let md = emit_report(&b, ReportFormat::Markdown).unwrap();
    assert!(md.contains("Classification: **BAD**"));
    assert!(md.contains("inaccurate"));
    let rows = md
        .lines()
        .filter(|l| l.starts_with("| 0.") || l.starts_with("| 1.") || l.starts_with("| 2."))
        .count();
    assert_eq!(rows, b.stats.len() + b.verdict.tir_series.len());

    let md = emit_report(&bundle("first_over"), ReportFormat::Markdown).unwrap();
    assert!(md.contains("absent"));
    let md = emit_report(&bundle("no_saturation"), ReportFormat::Markdown).unwrap();
    assert!(md.contains("sweep exhausted"));
}

fn svg(name: &str) -> (ReportBundle, String) {
    let b = bundle(name);
    let opts = PlotOptions {
        title: name.into(),
        ..PlotOptions::default()
    };
    let s = render_loss_plot(&b.stats, &b.verdict, &opts).unwrap();
    (b, s)
}

#[test]
fn svg_is_deterministic() {
    for name in ["good_sharp", "bad_gradual", "no_saturation"] {
        assert_eq!(svg(name).1, svg(name).1);
    }
}

#[test]
fn svg_draws_every_level_once_and_floors_small_losses() {
    let point = Regex::new(r#"class="plr-point" data-plr="([^"]+)""#).unwrap();
    let floor = Regex::new(r#"class="plr-floor" data-plr="([^"]+)""#).unwrap();
    for name in ["good_sharp", "no_saturation", "two_level", "k_mismatch"] {
        let (b, s) = svg(name);
        let above: Vec<f64> = point
            .captures_iter(&s)
            .map(|c| c[1].parse().unwrap())
            .collect();
        let below: Vec<f64> = floor
            .captures_iter(&s)
            .map(|c| c[1].parse().unwrap())
            .collect();
        assert_eq!(above.len() + below.len(), b.stats.len(), "{name}");
        assert!(above.iter().all(|&p| p >= PLR_FLOOR), "{name}");
        assert!(below.iter().all(|&p| p < PLR_FLOOR), "{name}");
        let zero_levels = b.stats.iter().filter(|l| l.plr == 0.0).count();
        assert_eq!(
            below.iter().filter(|&&p| p == 0.0).count(),
            zero_levels,
            "{name}"
        );
    }
}

#[test]
fn svg_banner_and_pdr_marker_follow_verdict() {
    let (b, s) = svg("good_sharp");
    assert_eq!(b.verdict.classification, Classification::Good);
    assert!(s.contains(">GOOD</text>"));
    assert!(s.contains(r#"class="pdr-marker""#));
    assert!(s.contains(r#"class="dr-point""#));

    let (_, s) = svg("bad_gradual");
    assert!(s.contains(">BAD</text>"));

    let (b, s) = svg("first_over");
    assert!(b.verdict.pdr_load_pps.is_none());
    assert!(!s.contains(r#"class="pdr-marker""#));
}

#[test]
fn svg_omits_whiskers_without_intervals() {
    let (_, s) = svg("single_run");
    assert!(!s.contains(r#"class="ci""#));
    let (_, s) = svg("good_sharp");
    assert!(s.contains(r#"class="ci""#));
}

#[test]
fn svg_without_delivery_panel() {
    let b = bundle("good_sharp");
    let opts = PlotOptions {
        delivery_panel: false,
        ..PlotOptions::default()
    };
    let s = render_loss_plot(&b.stats, &b.verdict, &opts).unwrap();
    assert!(!s.contains("dr-point"));
    assert!(s.starts_with("<svg") && s.trim_end().ends_with("</svg>"));
}
