//! Deterministic-rendering tests: a golden SVG corpus covering all four
//! plot types plus degenerate-range and single-frame inputs, and structural
//! checks on the generated markup.
//!
//! Regenerate the corpus with UPDATE_GOLDEN=1 after an intentional change:
//! `UPDATE_GOLDEN=1 cargo test --test render_golden`

mod common;

use std::path::PathBuf;

use seispost::engine::Traceability;
use seispost::model::make_result;
use seispost::plotdoc::{
    self, colormap, ArgValue, PlotDocument, PlotType, PresentationBlock,
};
use seispost::render;

const STAMP: &str = "2026-02-03T04:05:06Z";

fn trace() -> Traceability {
    Traceability {
        engine_version: "0.1.0".into(),
        calc_id: "golden".into(),
        source_hash: "00".repeat(32),
        inputs: vec![],
        created_utc: STAMP.into(),
        revision: None,
        edits: vec![],
    }
}

fn doc(
    plot_type: PlotType,
    args: Vec<(String, ArgValue)>,
    presentation: PresentationBlock,
) -> PlotDocument {
    plotdoc::build_document(plot_type, args, presentation, trace(), STAMP).unwrap()
}

fn array(name: &str, units: &str, shape: [usize; 4], values: Vec<f64>) -> ArgValue {
    ArgValue::Array(make_result(name, units, shape, values).unwrap())
}

/// The corpus: (file stem, document) pairs, all fully deterministic.
fn corpus() -> Vec<(&'static str, PlotDocument)> {
    let mut docs = Vec::new();

    // 1. Minimal layer plot; corner colors must hit the scale endpoints.
    docs.push((
        "layer_2x2",
        doc(
            PlotType::Layer,
            vec![("values".into(), array("d", "m", [2, 2, 1, 1], vec![0.0, 1.0, 1.0, 0.0]))],
            PresentationBlock {
                title: "corner layer".into(),
                ..Default::default()
            },
        ),
    ));

    // 2. Larger layer with a smooth gradient and non-default marker size.
    let mut grad = Vec::new();
    for j in 0..5 {
        for i in 0..7 {
            grad.push((i as f64 - 3.0) * (j as f64 + 1.0) / 15.0);
        }
    }
    let mut p = PresentationBlock {
        title: "gradient layer".into(),
        marker_size: 1.2,
        ..Default::default()
    };
    p.axis_limits.x = Some((-1.0, 7.0));
    docs.push((
        "layer_gradient",
        doc(
            PlotType::Layer,
            vec![("values".into(), array("g", "mm", [7, 5, 1, 1], grad))],
            p,
        ),
    ));

    // 3. Degenerate color range: every value equal.
    docs.push((
        "layer_degenerate",
        doc(
            PlotType::Layer,
            vec![("values".into(), array("c", "m", [3, 3, 1, 1], vec![2.5; 9]))],
            PresentationBlock {
                title: "flat layer".into(),
                ..Default::default()
            },
        ),
    ));

    // 4. Channel plot, default frame selection (max excursion).
    let nz = 8;
    let nt = 5;
    let mut dx = Vec::new();
    let mut dy = Vec::new();
    for t in 0..nt {
        for z in 0..nz {
            let s = (t as f64 + 1.0) / nt as f64;
            dx.push(0.02 * s * (z as f64 + 1.0) / nz as f64);
            dy.push(-0.01 * s * (z as f64 + 1.0) / nz as f64);
        }
    }
    docs.push((
        "channel_default_frame",
        doc(
            PlotType::Channel,
            vec![
                ("dx".into(), array("dx", "m", [1, 1, nz, nt], dx.clone())),
                ("dy".into(), array("dy", "m", [1, 1, nz, nt], dy.clone())),
            ],
            PresentationBlock {
                title: "column distortion".into(),
                ..Default::default()
            },
        ),
    ));

    // 5. Channel plot with an explicit frame index.
    docs.push((
        "channel_frame_1",
        doc(
            PlotType::Channel,
            vec![
                ("dx".into(), array("dx", "m", [1, 1, nz, nt], dx)),
                ("dy".into(), array("dy", "m", [1, 1, nz, nt], dy)),
                ("frame".into(), ArgValue::Int(1)),
            ],
            PresentationBlock::default(),
        ),
    ));

    // 6. Time plot, the affine-transform example shape.
    docs.push((
        "time_3_points",
        doc(
            PlotType::Time,
            vec![
                ("values".into(), array("v", "m/s", [1, 1, 1, 3], vec![0.0, 1.0, 0.0])),
                ("dt".into(), ArgValue::Real(0.5)),
            ],
            PresentationBlock {
                title: "pulse".into(),
                ..Default::default()
            },
        ),
    ));

    // 7. Time plot with a degenerate value range (constant series).
    docs.push((
        "time_degenerate",
        doc(
            PlotType::Time,
            vec![
                ("values".into(), array("v", "", [1, 1, 1, 6], vec![4.0; 6])),
                ("dt".into(), ArgValue::Real(0.1)),
            ],
            PresentationBlock::default(),
        ),
    ));

    // 8. Waterfall over a spread-out distribution.
    let (sx, sy, sz, wt) = (3, 2, 4, 10);
    let mut wv = Vec::new();
    for t in 0..wt {
        for k in 0..sz {
            for j in 0..sy {
                for i in 0..sx {
                    wv.push(((i + 2 * j + 3 * k) as f64 * 0.37).sin() * (t as f64 + 1.0));
                }
            }
        }
    }
    docs.push((
        "waterfall_bands",
        doc(
            PlotType::Waterfall,
            vec![
                ("values".into(), array("w", "m", [sx, sy, sz, wt], wv)),
                ("dt".into(), ArgValue::Real(0.25)),
            ],
            PresentationBlock {
                title: "distribution over time".into(),
                ..Default::default()
            },
        ),
    ));

    // 9. Waterfall with a single frame (single time step).
    docs.push((
        "waterfall_single_frame",
        doc(
            PlotType::Waterfall,
            vec![("values".into(), array("w", "m", [2, 2, 2, 1], vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0]))],
            PresentationBlock::default(),
        ),
    ));

    // 10. Waterfall with constant data: all bands collapse onto one line.
    docs.push((
        "waterfall_constant",
        doc(
            PlotType::Waterfall,
            vec![("values".into(), array("w", "", [2, 2, 1, 4], vec![3.0; 16]))],
            PresentationBlock::default(),
        ),
    ));

    docs
}

fn golden_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/golden")
}

#[test]
fn golden_corpus_is_byte_identical() {
    let dir = golden_dir();
    let update = std::env::var_os("UPDATE_GOLDEN").is_some();
    if update {
        std::fs::create_dir_all(&dir).unwrap();
    }
    let mut checked = 0;
    for (stem, doc) in corpus() {
        let svg = render::render(&doc).unwrap();
        // Determinism within a process.
        assert_eq!(svg, render::render(&doc).unwrap(), "{stem}: unstable render");
        let path = dir.join(format!("{stem}.svg"));
        if update {
            std::fs::write(&path, svg.as_bytes()).unwrap();
        } else {
            let golden = std::fs::read_to_string(&path)
                .unwrap_or_else(|e| panic!("missing golden file {}: {e}", path.display()));
            assert_eq!(svg, golden, "{stem}: differs from golden file");
        }
        checked += 1;
    }
    assert!(checked >= 8, "corpus must cover at least 8 documents");
}

#[test]
fn layer_corner_colors_hit_scale_endpoints() {
    let d = doc(
        PlotType::Layer,
        vec![("values".into(), array("d", "m", [2, 2, 1, 1], vec![0.0, 1.0, 1.0, 0.0]))],
        PresentationBlock::default(),
    );
    let svg = render::render(&d).unwrap();
    let low = colormap::colormap_hex("coolwarm-diverging", 0.0).unwrap();
    let high = colormap::colormap_hex("coolwarm-diverging", 1.0).unwrap();
    assert!(svg.contains(&format!("fill=\"{low}\"")), "low endpoint color missing");
    assert!(svg.contains(&format!("fill=\"{high}\"")), "high endpoint color missing");
}

#[test]
fn time_polyline_maps_x_linearly() {
    let d = doc(
        PlotType::Time,
        vec![
            ("values".into(), array("v", "", [1, 1, 1, 3], vec![0.0, 1.0, 0.0])),
            ("dt".into(), ArgValue::Real(0.5)),
        ],
        PresentationBlock::default(),
    );
    let svg = render::render(&d).unwrap();
    let line = svg
        .lines()
        .find(|l| l.starts_with("<polyline"))
        .expect("series polyline present");
    let points: Vec<(f64, f64)> = line
        .split("points=\"")
        .nth(1)
        .unwrap()
        .split('"')
        .next()
        .unwrap()
        .split(' ')
        .map(|p| {
            let (x, y) = p.split_once(',').unwrap();
            (x.parse().unwrap(), y.parse().unwrap())
        })
        .collect();
    assert_eq!(points.len(), 3);
    // t = 0, 0.5, 1.0 map linearly: midpoint x is the mean of the ends.
    let mid = (points[0].0 + points[2].0) / 2.0;
    assert!((points[1].0 - mid).abs() < 1e-9);
    assert!(points[0].0 < points[1].0 && points[1].0 < points[2].0);
}

#[test]
fn axis_limit_edits_change_transforms_not_element_count() {
    // Data elements are the polylines/polygons; ticks and grid lines may
    // legitimately change with the limits.
    fn count_elements(svg: &str) -> (usize, usize, usize) {
        let polylines = svg.matches("<polyline").count();
        let polygons = svg.matches("<polygon").count();
        let points: usize = svg
            .lines()
            .filter(|l| l.starts_with("<polyline"))
            .map(|l| l.split("points=\"").nth(1).unwrap().split('"').next().unwrap().split(' ').count())
            .sum();
        (polylines, polygons, points)
    }
    let base = doc(
        PlotType::Time,
        vec![
            ("values".into(), array("v", "", [1, 1, 1, 5], vec![0.0, 2.0, 1.0, 3.0, 0.5])),
            ("dt".into(), ArgValue::Real(1.0)),
        ],
        PresentationBlock::default(),
    );
    let mut edited = base.clone();
    edited.presentation.axis_limits.y = Some((-5.0, 5.0));
    let a = render::render(&base).unwrap();
    let b = render::render(&edited).unwrap();
    assert_ne!(a, b, "limits must change the output");
    assert_eq!(
        count_elements(&a),
        count_elements(&b),
        "axis limits must not add or remove elements"
    );
}

#[test]
fn colorbar_labels_are_nice_ticks_clipped_to_range() {
    let values: Vec<f64> = (0..9).map(|i| i as f64).collect(); // range [0, 8]
    let d = doc(
        PlotType::Layer,
        vec![("values".into(), array("d", "m", [3, 3, 1, 1], values))],
        PresentationBlock::default(),
    );
    let svg = render::render(&d).unwrap();
    let expected: Vec<f64> = render::nice_ticks(0.0, 8.0, 5)
        .unwrap()
        .into_iter()
        .filter(|&t| (0.0..=8.0).contains(&t))
        .collect();
    for tick in expected {
        let label = format!(">{}</text>", render::fmt_num(tick));
        assert!(svg.contains(&label), "missing colorbar label {tick}");
    }
}

#[test]
fn shape_violations_are_reported() {
    let d = doc(
        PlotType::Layer,
        vec![("values".into(), array("d", "m", [2, 2, 2, 1], vec![0.0; 8]))],
        PresentationBlock::default(),
    );
    let err = render::render(&d).unwrap_err();
    let msg = err.to_string();
    assert!(msg.contains("expected") && msg.contains("(nx, ny, 1, 1)"), "{msg}");
}
