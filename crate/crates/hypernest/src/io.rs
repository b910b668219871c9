//! Readers and writers: point clouds, graph bundles, model files, traces,
//! plot data, and JSON-lines reports.
//!
//! Numeric text is written with 17 significant digits so every f64
//! round-trips exactly; every writer's output is accepted by its reader
//! with value equality.

use std::fmt::Write as _;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::gcn::{
    ClassDecoder, Decoder, EdgeSplit, GraphData, LayerParams, LinkDecoder, MetricRow, Split,
};
use crate::group::LorentzMatrix;
use crate::lorentz::{Point, Tangent};
use crate::nested::{NestingLevel, NestingStack};
use crate::opt::TraceRow;
use crate::reduce::{ReductionModel, SweepRow, TangentPcaModel};

fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

fn parse_f64(token: &str, line: usize) -> Result<f64> {
    token.trim().parse::<f64>().map_err(|_| Error::Parse {
        line,
        message: format!("expected a number, found {token:?}"),
    })
}

fn parse_usize(token: &str, line: usize) -> Result<usize> {
    token.trim().parse::<usize>().map_err(|_| Error::Parse {
        line,
        message: format!("expected an integer, found {token:?}"),
    })
}

/// Numbered, non-empty lines of a file (1-based numbering, blank lines kept
/// out of the stream but counted).
fn numbered_lines(text: &str) -> Vec<(usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim_end()))
        .filter(|(_, l)| !l.trim().is_empty())
        .collect()
}

// ---- Point clouds ----------------------------------------------------------

/// CSV with header `x0,...,xn`, one ambient point per row.
pub fn write_points(path: &Path, points: &[Point]) -> Result<()> {
    if points.is_empty() {
        return Err(Error::input("write_points: empty point list"));
    }
    let n = points[0].dim();
    let mut out = String::new();
    let header: Vec<String> = (0..=n).map(|i| format!("x{i}")).collect();
    out.push_str(&header.join(","));
    out.push('\n');
    for p in points {
        let row: Vec<String> = p.ambient().iter().map(|&x| fmt_f64(x)).collect();
        out.push_str(&row.join(","));
        out.push('\n');
    }
    std::fs::write(path, out)?;
    Ok(())
}

pub fn read_points(path: &Path) -> Result<Vec<Point>> {
    read_points_with_tol(path, &crate::config::Tolerances::default())
}

/// [`read_points`] with caller-chosen validation tolerances.
pub fn read_points_with_tol(path: &Path, tol: &crate::config::Tolerances) -> Result<Vec<Point>> {
    let text = std::fs::read_to_string(path)?;
    let lines = numbered_lines(&text);
    if lines.is_empty() {
        return Err(Error::Parse {
            line: 1,
            message: "empty point file".into(),
        });
    }
    let (hline, header) = lines[0];
    let cols: Vec<&str> = header.split(',').collect();
    for (i, c) in cols.iter().enumerate() {
        if c.trim() != format!("x{i}") {
            return Err(Error::Parse {
                line: hline,
                message: format!("expected header x0,...,x{}, found {header:?}", cols.len() - 1),
            });
        }
    }
    let width = cols.len();
    let mut points = Vec::with_capacity(lines.len() - 1);
    for &(lno, line) in &lines[1..] {
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != width {
            return Err(Error::Parse {
                line: lno,
                message: format!("expected {width} fields, found {}", fields.len()),
            });
        }
        let mut v = DVector::zeros(width);
        for (i, f) in fields.iter().enumerate() {
            v[i] = parse_f64(f, lno)?;
        }
        points.push(Point::with_tol(v, tol).map_err(|e| Error::Parse {
            line: lno,
            message: format!("invalid point: {e}"),
        })?);
    }
    if points.is_empty() {
        return Err(Error::Parse {
            line: hline,
            message: "point file has a header but no rows".into(),
        });
    }
    Ok(points)
}

// ---- Graph bundles ----------------------------------------------------------

/// File stems of a graph bundle rooted at `<stem>`.
fn graph_paths(stem: &Path) -> [std::path::PathBuf; 5] {
    let base = stem.to_string_lossy();
    [
        format!("{base}.edges.tsv").into(),
        format!("{base}.features.csv").into(),
        format!("{base}.labels.csv").into(),
        format!("{base}.masks.csv").into(),
        format!("{base}.edge_samples.csv").into(),
    ]
}

fn split_name(s: Split) -> &'static str {
    match s {
        Split::Train => "train",
        Split::Val => "val",
        Split::Test => "test",
    }
}

fn parse_split(token: &str, line: usize) -> Result<Split> {
    match token.trim() {
        "train" => Ok(Split::Train),
        "val" => Ok(Split::Val),
        "test" => Ok(Split::Test),
        other => Err(Error::Parse {
            line,
            message: format!("expected train/val/test, found {other:?}"),
        }),
    }
}

/// Write a graph as `<stem>.edges.tsv`, `.features.csv`, `.labels.csv`,
/// `.masks.csv`, and `.edge_samples.csv`. Returns the paths written.
pub fn write_graph(stem: &Path, graph: &GraphData) -> Result<Vec<std::path::PathBuf>> {
    let [edges_p, feats_p, labels_p, masks_p, samples_p] = graph_paths(stem);
    let mut written = Vec::new();

    let mut edges = String::new();
    for &(u, v) in graph.edges() {
        writeln!(edges, "{u}\t{v}").unwrap();
    }
    std::fs::write(&edges_p, edges)?;
    written.push(edges_p);

    let d = graph.feature_dim();
    let mut feats = String::new();
    let header: Vec<String> = (0..d).map(|i| format!("f{i}")).collect();
    feats.push_str(&header.join(","));
    feats.push('\n');
    for row in graph.features().row_iter() {
        let cells: Vec<String> = row.iter().map(|&x| fmt_f64(x)).collect();
        feats.push_str(&cells.join(","));
        feats.push('\n');
    }
    std::fs::write(&feats_p, feats)?;
    written.push(feats_p);

    if let Some(labels) = graph.labels() {
        let mut out = String::from("node,label\n");
        for (i, l) in labels.iter().enumerate() {
            writeln!(out, "{i},{l}").unwrap();
        }
        std::fs::write(&labels_p, out)?;
        written.push(labels_p);
    }

    let mut masks = String::from("node,split\n");
    for (i, s) in graph.node_split().iter().enumerate() {
        writeln!(masks, "{i},{}", split_name(*s)).unwrap();
    }
    std::fs::write(&masks_p, masks)?;
    written.push(masks_p);

    let mut samples = String::from("u,v,split,label\n");
    let es = graph.edge_split();
    let groups: [(&Vec<(usize, usize)>, Split, u8); 6] = [
        (&es.train_pos, Split::Train, 1),
        (&es.val_pos, Split::Val, 1),
        (&es.test_pos, Split::Test, 1),
        (&es.train_neg, Split::Train, 0),
        (&es.val_neg, Split::Val, 0),
        (&es.test_neg, Split::Test, 0),
    ];
    for (list, split, label) in groups {
        for &(u, v) in list {
            writeln!(samples, "{u},{v},{},{label}", split_name(split)).unwrap();
        }
    }
    std::fs::write(&samples_p, samples)?;
    written.push(samples_p);
    Ok(written)
}

/// Read a graph bundle written by [`write_graph`]; the labels file may be
/// absent.
pub fn read_graph(stem: &Path) -> Result<GraphData> {
    let [edges_p, feats_p, labels_p, masks_p, samples_p] = graph_paths(stem);

    let text = std::fs::read_to_string(&edges_p)?;
    let mut edges = Vec::new();
    for (lno, line) in numbered_lines(&text) {
        let mut parts = line.split('\t');
        let (Some(u), Some(v)) = (parts.next(), parts.next()) else {
            return Err(Error::Parse {
                line: lno,
                message: "edge rows are u<TAB>v".into(),
            });
        };
        edges.push((parse_usize(u, lno)?, parse_usize(v, lno)?));
    }

    let text = std::fs::read_to_string(&feats_p)?;
    let lines = numbered_lines(&text);
    if lines.is_empty() {
        return Err(Error::Parse {
            line: 1,
            message: "empty features file".into(),
        });
    }
    let width = lines[0].1.split(',').count();
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for &(lno, line) in &lines[1..] {
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != width {
            return Err(Error::Parse {
                line: lno,
                message: format!("expected {width} fields, found {}", fields.len()),
            });
        }
        rows.push(
            fields
                .iter()
                .map(|f| parse_f64(f, lno))
                .collect::<Result<_>>()?,
        );
    }
    let num_nodes = rows.len();
    let features = DMatrix::from_fn(num_nodes, width, |i, j| rows[i][j]);

    let labels = if labels_p.exists() {
        let text = std::fs::read_to_string(&labels_p)?;
        let lines = numbered_lines(&text);
        let mut labels = vec![0usize; num_nodes];
        for &(lno, line) in &lines[1..] {
            let mut parts = line.split(',');
            let (Some(i), Some(l)) = (parts.next(), parts.next()) else {
                return Err(Error::Parse {
                    line: lno,
                    message: "label rows are node,label".into(),
                });
            };
            let i = parse_usize(i, lno)?;
            if i >= num_nodes {
                return Err(Error::Parse {
                    line: lno,
                    message: format!("node {i} out of range"),
                });
            }
            labels[i] = parse_usize(l, lno)?;
        }
        Some(labels)
    } else {
        None
    };

    let text = std::fs::read_to_string(&masks_p)?;
    let lines = numbered_lines(&text);
    let mut node_split = vec![Split::Train; num_nodes];
    for &(lno, line) in &lines[1..] {
        let mut parts = line.split(',');
        let (Some(i), Some(s)) = (parts.next(), parts.next()) else {
            return Err(Error::Parse {
                line: lno,
                message: "mask rows are node,split".into(),
            });
        };
        let i = parse_usize(i, lno)?;
        if i >= num_nodes {
            return Err(Error::Parse {
                line: lno,
                message: format!("node {i} out of range"),
            });
        }
        node_split[i] = parse_split(s, lno)?;
    }

    let text = std::fs::read_to_string(&samples_p)?;
    let lines = numbered_lines(&text);
    let mut es = EdgeSplit::default();
    for &(lno, line) in &lines[1..] {
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 4 {
            return Err(Error::Parse {
                line: lno,
                message: "edge-sample rows are u,v,split,label".into(),
            });
        }
        let u = parse_usize(fields[0], lno)?;
        let v = parse_usize(fields[1], lno)?;
        let split = parse_split(fields[2], lno)?;
        let label = parse_usize(fields[3], lno)?;
        let bucket = match (split, label) {
            (Split::Train, 1) => &mut es.train_pos,
            (Split::Val, 1) => &mut es.val_pos,
            (Split::Test, 1) => &mut es.test_pos,
            (Split::Train, 0) => &mut es.train_neg,
            (Split::Val, 0) => &mut es.val_neg,
            (Split::Test, 0) => &mut es.test_neg,
            _ => {
                return Err(Error::Parse {
                    line: lno,
                    message: format!("edge-sample label must be 0 or 1, found {label}"),
                })
            }
        };
        bucket.push((u, v));
    }

    GraphData::new(num_nodes, edges, features, labels, node_split, es)
}

// ---- Model files -------------------------------------------------------------

/// Any model the tools can persist.
#[derive(Debug, Clone)]
pub enum ModelFile {
    Stack(NestingStack),
    TangentPca(TangentPcaModel),
    Gcn {
        layers: Vec<LayerParams>,
        decoder: Decoder,
        self_weight: Option<f64>,
    },
}

impl ModelFile {
    pub fn from_reduction(model: &ReductionModel) -> Self {
        match model {
            ReductionModel::Nested(s) => ModelFile::Stack(s.clone()),
            ReductionModel::TangentPca(m) => ModelFile::TangentPca(m.clone()),
        }
    }
}

fn write_matrix(out: &mut String, label: &str, m: &DMatrix<f64>) {
    writeln!(out, "{label}: {}x{}", m.nrows(), m.ncols()).unwrap();
    for i in 0..m.nrows() {
        let row: Vec<String> = (0..m.ncols()).map(|j| fmt_f64(m[(i, j)])).collect();
        out.push_str(&row.join(","));
        out.push('\n');
    }
}

fn write_vector(out: &mut String, label: &str, v: &DVector<f64>) {
    let row: Vec<String> = v.iter().map(|&x| fmt_f64(x)).collect();
    writeln!(out, "{label}: {}", row.join(",")).unwrap();
}

/// Sectioned plain-text model format, human-diffable.
pub fn write_model(path: &Path, model: &ModelFile) -> Result<()> {
    let mut out = String::from("hypernest-model v1\n");
    match model {
        ModelFile::Stack(stack) => {
            out.push_str("kind: nested-stack\n");
            writeln!(out, "levels: {}", stack.levels().len()).unwrap();
            for level in stack.levels() {
                out.push_str("[level]\n");
                writeln!(out, "r: {}", fmt_f64(level.r())).unwrap();
                write_matrix(&mut out, "lambda", level.lambda().matrix());
            }
        }
        ModelFile::TangentPca(model) => {
            out.push_str("kind: tangent-pca\n");
            writeln!(out, "target: {}", model.target_dim()).unwrap();
            write_vector(&mut out, "mean", model.mean().ambient());
            let n = model.mean().ambient().len();
            let mut basis = DMatrix::zeros(model.basis().len(), n);
            for (i, b) in model.basis().iter().enumerate() {
                for j in 0..n {
                    basis[(i, j)] = b.components()[j];
                }
            }
            write_matrix(&mut out, "basis", &basis);
            write_vector(
                &mut out,
                "eigenvalues",
                &DVector::from_row_slice(model.eigenvalues()),
            );
        }
        ModelFile::Gcn {
            layers,
            decoder,
            self_weight,
        } => {
            out.push_str("kind: nhgcn\n");
            match self_weight {
                Some(w) => writeln!(out, "self_weight: {}", fmt_f64(*w)).unwrap(),
                None => out.push_str("self_weight: none\n"),
            }
            writeln!(out, "layers: {}", layers.len()).unwrap();
            for layer in layers {
                out.push_str("[layer]\n");
                write_matrix(&mut out, "p_tilde", layer.p_tilde());
                writeln!(out, "alpha: {}", fmt_f64(layer.alpha())).unwrap();
                write_matrix(&mut out, "q", layer.q());
            }
            out.push_str("[decoder]\n");
            match decoder {
                Decoder::Link(d) => {
                    out.push_str("type: link\n");
                    writeln!(out, "r_fd: {}", fmt_f64(d.r_fd)).unwrap();
                    writeln!(out, "t_fd: {}", fmt_f64(d.t_fd)).unwrap();
                }
                Decoder::Class(d) => {
                    out.push_str("type: class\n");
                    write_matrix(&mut out, "weight", &d.weight);
                    write_vector(&mut out, "bias", &d.bias);
                }
            }
        }
    }
    std::fs::write(path, out)?;
    Ok(())
}

struct Cursor<'a> {
    lines: Vec<(usize, &'a str)>,
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn next(&mut self) -> Result<(usize, &'a str)> {
        let item = self.lines.get(self.pos).copied().ok_or(Error::Parse {
            line: self.lines.last().map_or(1, |(l, _)| *l),
            message: "unexpected end of file".into(),
        })?;
        self.pos += 1;
        Ok(item)
    }

    fn expect_field(&mut self, key: &str) -> Result<(usize, &'a str)> {
        let (lno, line) = self.next()?;
        let prefix = format!("{key}:");
        match line.strip_prefix(&prefix) {
            Some(rest) => Ok((lno, rest.trim())),
            None => Err(Error::Parse {
                line: lno,
                message: format!("expected field {key:?}, found {line:?}"),
            }),
        }
    }

    fn expect_literal(&mut self, literal: &str) -> Result<()> {
        let (lno, line) = self.next()?;
        if line.trim() != literal {
            return Err(Error::Parse {
                line: lno,
                message: format!("expected {literal:?}, found {line:?}"),
            });
        }
        Ok(())
    }

    fn read_matrix(&mut self, key: &str) -> Result<DMatrix<f64>> {
        let (lno, shape) = self.expect_field(key)?;
        let mut parts = shape.split('x');
        let (Some(r), Some(c)) = (parts.next(), parts.next()) else {
            return Err(Error::Parse {
                line: lno,
                message: format!("expected RxC shape, found {shape:?}"),
            });
        };
        let rows = parse_usize(r, lno)?;
        let cols = parse_usize(c, lno)?;
        let mut m = DMatrix::zeros(rows, cols);
        for i in 0..rows {
            let (lno, line) = self.next()?;
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != cols {
                return Err(Error::Parse {
                    line: lno,
                    message: format!("expected {cols} fields, found {}", fields.len()),
                });
            }
            for (j, f) in fields.iter().enumerate() {
                m[(i, j)] = parse_f64(f, lno)?;
            }
        }
        Ok(m)
    }

    fn read_vector(&mut self, key: &str) -> Result<DVector<f64>> {
        let (lno, value) = self.expect_field(key)?;
        let fields: Vec<&str> = value.split(',').collect();
        let mut v = DVector::zeros(fields.len());
        for (j, f) in fields.iter().enumerate() {
            v[j] = parse_f64(f, lno)?;
        }
        Ok(v)
    }
}

pub fn read_model(path: &Path) -> Result<ModelFile> {
    let text = std::fs::read_to_string(path)?;
    let mut cur = Cursor {
        lines: numbered_lines(&text),
        pos: 0,
    };
    cur.expect_literal("hypernest-model v1")?;
    let (kind_line, kind) = cur.expect_field("kind")?;
    match kind {
        "nested-stack" => {
            let (lno, count) = cur.expect_field("levels")?;
            let count = parse_usize(count, lno)?;
            let mut levels = Vec::with_capacity(count);
            for _ in 0..count {
                cur.expect_literal("[level]")?;
                let (lno, r) = cur.expect_field("r")?;
                let r = parse_f64(r, lno)?;
                let lambda = cur.read_matrix("lambda")?;
                levels.push(NestingLevel::new(LorentzMatrix::new(lambda)?, r)?);
            }
            Ok(ModelFile::Stack(NestingStack::new(levels)?))
        }
        "tangent-pca" => {
            let (lno, target) = cur.expect_field("target")?;
            let target = parse_usize(target, lno)?;
            let mean = Point::new(cur.read_vector("mean")?)?;
            let basis_m = cur.read_matrix("basis")?;
            if basis_m.nrows() != target {
                return Err(Error::Parse {
                    line: lno,
                    message: format!(
                        "basis has {} rows, target is {target}",
                        basis_m.nrows()
                    ),
                });
            }
            let eigenvalues = cur.read_vector("eigenvalues")?;
            let basis: Vec<Tangent> = (0..basis_m.nrows())
                .map(|i| {
                    Tangent::new(mean.clone(), basis_m.row(i).transpose().into_owned())
                })
                .collect::<Result<_>>()?;
            Ok(ModelFile::TangentPca(TangentPcaModel::from_parts(
                mean,
                basis,
                eigenvalues.iter().copied().collect(),
            )?))
        }
        "nhgcn" => {
            let (lno, sw) = cur.expect_field("self_weight")?;
            let self_weight = if sw == "none" {
                None
            } else {
                Some(parse_f64(sw, lno)?)
            };
            let (lno, count) = cur.expect_field("layers")?;
            let count = parse_usize(count, lno)?;
            let mut layers = Vec::with_capacity(count);
            for _ in 0..count {
                cur.expect_literal("[layer]")?;
                let p_tilde = cur.read_matrix("p_tilde")?;
                let (lno, alpha) = cur.expect_field("alpha")?;
                let alpha = parse_f64(alpha, lno)?;
                let q = cur.read_matrix("q")?;
                layers.push(LayerParams::new(p_tilde, alpha, q)?);
            }
            cur.expect_literal("[decoder]")?;
            let (_, ty) = cur.expect_field("type")?;
            let decoder = match ty {
                "link" => {
                    let (lno, r) = cur.expect_field("r_fd")?;
                    let r = parse_f64(r, lno)?;
                    let (lno, t) = cur.expect_field("t_fd")?;
                    Decoder::Link(LinkDecoder::new(r, parse_f64(t, lno)?)?)
                }
                "class" => {
                    let weight = cur.read_matrix("weight")?;
                    let bias = cur.read_vector("bias")?;
                    Decoder::Class(ClassDecoder { weight, bias })
                }
                other => {
                    return Err(Error::Parse {
                        line: kind_line,
                        message: format!("unknown decoder type {other:?}"),
                    })
                }
            };
            Ok(ModelFile::Gcn {
                layers,
                decoder,
                self_weight,
            })
        }
        other => Err(Error::Parse {
            line: kind_line,
            message: format!("unknown model kind {other:?}"),
        }),
    }
}

// ---- Plot data ----------------------------------------------------------------

/// Poincare coordinates as CSV `p1,...,pn[,label]`.
pub fn write_poincare_csv(
    path: &Path,
    points: &[DVector<f64>],
    labels: Option<&[usize]>,
) -> Result<()> {
    if points.is_empty() {
        return Err(Error::input("write_poincare_csv: no points"));
    }
    let n = points[0].len();
    let mut header: Vec<String> = (1..=n).map(|i| format!("p{i}")).collect();
    if labels.is_some() {
        header.push("label".into());
    }
    let mut out = header.join(",");
    out.push('\n');
    for (i, p) in points.iter().enumerate() {
        let mut row: Vec<String> = p.iter().map(|&x| fmt_f64(x)).collect();
        if let Some(ls) = labels {
            row.push(ls[i].to_string());
        }
        out.push_str(&row.join(","));
        out.push('\n');
    }
    std::fs::write(path, out)?;
    Ok(())
}

const SVG_PALETTE: [&str; 6] = [
    "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b",
];

/// Deterministic SVG of the unit disk with points and optional polylines
/// (2-dimensional Poincare coordinates only).
pub fn write_poincare_svg(
    path: &Path,
    points: &[DVector<f64>],
    labels: Option<&[usize]>,
    polylines: &[Vec<DVector<f64>>],
) -> Result<()> {
    let size = 600.0;
    let center = size / 2.0;
    let radius = size / 2.0 - 10.0;
    let map = |p: &DVector<f64>| -> Result<(f64, f64)> {
        if p.len() != 2 {
            return Err(Error::dim("SVG output needs 2-dimensional coordinates"));
        }
        Ok((center + radius * p[0], center - radius * p[1]))
    };
    let mut out = String::new();
    writeln!(
        out,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{size}\" height=\"{size}\" viewBox=\"0 0 {size} {size}\">"
    )
    .unwrap();
    writeln!(
        out,
        "  <circle cx=\"{center}\" cy=\"{center}\" r=\"{radius}\" fill=\"none\" stroke=\"#333333\" stroke-width=\"1\"/>"
    )
    .unwrap();
    for (k, line) in polylines.iter().enumerate() {
        let mut d = String::new();
        for (i, p) in line.iter().enumerate() {
            let (x, y) = map(p)?;
            write!(d, "{}{x:.3},{y:.3} ", if i == 0 { "M" } else { "L" }).unwrap();
        }
        let color = SVG_PALETTE[(k + 1) % SVG_PALETTE.len()];
        writeln!(
            out,
            "  <path d=\"{}\" fill=\"none\" stroke=\"{color}\" stroke-width=\"1.5\"/>",
            d.trim_end()
        )
        .unwrap();
    }
    for (i, p) in points.iter().enumerate() {
        let (x, y) = map(p)?;
        let color = labels
            .map(|ls| SVG_PALETTE[ls[i] % SVG_PALETTE.len()])
            .unwrap_or(SVG_PALETTE[0]);
        writeln!(
            out,
            "  <circle cx=\"{x:.3}\" cy=\"{y:.3}\" r=\"3\" fill=\"{color}\"/>"
        )
        .unwrap();
    }
    out.push_str("</svg>\n");
    std::fs::write(path, out)?;
    Ok(())
}

// ---- Traces and reports ----------------------------------------------------

/// Optimization trace CSV: iteration, objective, per-parameter grad norms.
pub fn write_trace_csv(path: &Path, trace: &[TraceRow]) -> Result<()> {
    let width = trace.iter().map(|r| r.grad_norms.len()).max().unwrap_or(0);
    let mut header = vec!["iteration".to_string(), "objective".to_string()];
    for i in 0..width {
        header.push(format!("grad_norm_{i}"));
    }
    let mut out = header.join(",");
    out.push('\n');
    for row in trace {
        let mut cells = vec![row.iteration.to_string(), fmt_f64(row.objective)];
        for i in 0..width {
            cells.push(fmt_f64(row.grad_norms.get(i).copied().unwrap_or(f64::NAN)));
        }
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    std::fs::write(path, out)?;
    Ok(())
}

/// Training metric trace CSV: step, loss, metric.
pub fn write_metric_csv(path: &Path, trace: &[MetricRow]) -> Result<()> {
    let mut out = String::from("step,loss,metric\n");
    for row in trace {
        writeln!(out, "{},{},{}", row.step, fmt_f64(row.loss), fmt_f64(row.metric)).unwrap();
    }
    std::fs::write(path, out)?;
    Ok(())
}

/// Variance-sweep CSV with the stable header
/// `sigma,method,mean_error,std_error,seconds`.
pub fn write_sweep_csv(path: &Path, rows: &[SweepRow]) -> Result<()> {
    let mut out = String::from("sigma,method,mean_error,std_error,seconds\n");
    for row in rows {
        writeln!(
            out,
            "{},{},{},{},{:.3}",
            fmt_f64(row.sigma),
            row.method,
            fmt_f64(row.mean_error),
            fmt_f64(row.std_error),
            row.seconds
        )
        .unwrap();
    }
    std::fs::write(path, out)?;
    Ok(())
}

/// Append one JSON-lines record.
pub fn append_jsonl<T: Serialize>(path: &Path, record: &T) -> Result<()> {
    use std::io::Write;
    let mut line = serde_json::to_string(record)
        .map_err(|e| Error::input(format!("report serialization failed: {e}")))?;
    line.push('\n');
    let mut file = std::fs::OpenOptions::new()
        .create(true)
        .append(true)
        .open(path)?;
    file.write_all(line.as_bytes())?;
    Ok(())
}
