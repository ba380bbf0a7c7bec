use cmtdp_core::config::ExperimentConfig;
use cmtdp_core::presets::run_preset;
use cmtdp_core::report::{emit_svg, read_curve_csv, Curve};

fn curve(label: &str, mean: Vec<f64>) -> Curve {
    Curve {
        label: label.into(),
        se: vec![0.0; mean.len()],
        mean,
    }
}

#[test]
fn svg_is_well_formed_with_labels() {
    let svg = emit_svg("panel", &[curve("a", vec![0.0, 1.0, 3.0]), curve("b", vec![0.5, 0.5, 0.5])]).unwrap();
    let doc = roxmltree::Document::parse(&svg).unwrap();
    let polylines: Vec<_> = doc.descendants().filter(|n| n.has_tag_name("polyline")).collect();
    assert_eq!(polylines.len(), 2);
    let texts: Vec<&str> = doc.descendants().filter_map(|n| n.text()).collect();
    for needed in ["t", "cumulative regret", "a", "b"] {
        assert!(texts.contains(&needed), "missing text {needed}");
    }
}

#[test]
fn flat_zero_curve_lies_on_the_axis() {
    let svg = emit_svg("zero", &[curve("z", vec![0.0; 5])]).unwrap();
    let doc = roxmltree::Document::parse(&svg).unwrap();
    let axis_y: f64 = doc
        .descendants()
        .find(|n| n.has_tag_name("line"))
        .and_then(|n| n.attribute("y1"))
        .unwrap()
        .parse()
        .unwrap();
    let points = doc
        .descendants()
        .find(|n| n.has_tag_name("polyline"))
        .and_then(|n| n.attribute("points"))
        .unwrap();
    for p in points.split_whitespace() {
        let y: f64 = p.split(',').nth(1).unwrap().parse().unwrap();
        assert!((y - axis_y).abs() < 0.01);
    }
}

#[test]
fn preset_writes_panels_and_reproduces() {
    let mut cfg = ExperimentConfig::default();
    cfg.apply_overrides(&["run.T=40".into(), "run.replications=2".into()]).unwrap();
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let out = run_preset("fig_linear_off", &cfg, a.path(), false).unwrap();
    run_preset("fig_linear_off", &cfg, b.path(), true).unwrap();
    assert_eq!(out.panels, 6);
    let svgs = out.files.iter().filter(|p| p.extension().is_some_and(|e| e == "svg")).count();
    assert_eq!(svgs, 6);
    for f in &out.files {
        let name = f.file_name().unwrap();
        let left = std::fs::read(f).unwrap();
        let right = std::fs::read(b.path().join(name)).unwrap();
        assert_eq!(left, right, "{name:?} differs");
    }
    let c = read_curve_csv("x", std::fs::File::open(a.path().join("linear_identical_d10_n_K500.csv")).map(std::io::BufReader::new).unwrap()).unwrap();
    assert_eq!(c.mean.len(), 40);
}
