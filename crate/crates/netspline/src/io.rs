//! Versioned file formats: network JSON, point CSV, fit JSON and plot-ready
//! CSV dumps.
//!
//! CSV files carry a `# netspline-<kind> v1` stamp on their first line;
//! other `#` lines are comments. Reals are written in the shortest form that
//! parses back to the identical `f64`.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use netspline_core::basis::SplineKind;
use netspline_core::{FitResult, IntensityRatio, Network, NetworkBasis, NetworkPoint, PenaltyOrder, PenaltySet};
use serde::{Deserialize, Serialize};

use crate::error::{AppError, Result};

pub const FORMAT_VERSION: u32 = 1;

pub fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| AppError::io(path, e))
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| AppError::io(dir, e))?;
    }
    fs::write(path, text).map_err(|e| AppError::io(path, e))
}

/// Shortest decimal form that parses back to the same `f64`, switching to
/// exponent notation for very small or large magnitudes.
pub fn real(x: f64) -> String {
    let a = x.abs();
    if a == 0.0 || (1e-4..1e15).contains(&a) || !x.is_finite() {
        x.to_string()
    } else {
        format!("{x:e}")
    }
}

fn check_version(path: &Path, what: &str, version: u64) -> Result<()> {
    if version != FORMAT_VERSION as u64 {
        return Err(AppError::format(
            path,
            None,
            format!("unsupported {what} format version {version} (this build reads version {FORMAT_VERSION})"),
        ));
    }
    Ok(())
}

// Network JSON

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EdgeRecord {
    pub from: usize,
    pub to: usize,
    /// Full polyline including both endpoints.
    pub polyline: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkFile {
    pub version: u32,
    pub vertices: Vec<Vec<f64>>,
    pub edges: Vec<EdgeRecord>,
}

impl NetworkFile {
    pub fn from_network(net: &Network) -> Self {
        let (vertices, edges) = net.to_input();
        Self {
            version: FORMAT_VERSION,
            vertices,
            edges: edges
                .into_iter()
                .map(|e| EdgeRecord {
                    from: e.from,
                    to: e.to,
                    polyline: e.polyline,
                })
                .collect(),
        }
    }

    pub fn build(&self) -> netspline_core::Result<Network> {
        let edges = self
            .edges
            .iter()
            .map(|e| netspline_core::EdgeInput::with_polyline(e.from, e.to, e.polyline.clone()))
            .collect();
        Network::new(self.vertices.clone(), edges)
    }
}

fn versioned<T: for<'de> Deserialize<'de>>(text: &str, path: &Path, what: &str) -> Result<T> {
    let value: serde_json::Value =
        serde_json::from_str(text).map_err(|e| AppError::format(path, Some(e.line() as u64), e.to_string()))?;
    match value.get("version") {
        Some(v) => match v.as_u64() {
            Some(v) => check_version(path, what, v)?,
            None => return Err(AppError::format(path, None, "field `version` must be an integer")),
        },
        None => return Err(AppError::format(path, None, "missing field `version`")),
    }
    serde_json::from_str(text).map_err(|e| AppError::format(path, Some(e.line() as u64), e.to_string()))
}

pub fn parse_network(text: &str, path: &Path) -> Result<Network> {
    let file: NetworkFile = versioned(text, path, "network")?;
    Ok(file.build()?)
}

pub fn read_network(path: &Path) -> Result<Network> {
    parse_network(&read_text(path)?, path)
}

pub fn network_json(net: &Network) -> String {
    let mut s = serde_json::to_string_pretty(&NetworkFile::from_network(net)).expect("network serializes");
    s.push('\n');
    s
}

pub fn write_network(path: &Path, net: &Network) -> Result<()> {
    write_text(path, &network_json(net))
}

// Fit JSON

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FitFile {
    pub version: u32,
    pub network: NetworkFile,
    pub fit: FitResult,
}

pub fn fit_json(net: &Network, fit: &FitResult) -> String {
    let file = FitFile {
        version: FORMAT_VERSION,
        network: NetworkFile::from_network(net),
        fit: fit.clone(),
    };
    let mut s = serde_json::to_string_pretty(&file).expect("fit serializes");
    s.push('\n');
    s
}

pub fn write_fit(path: &Path, net: &Network, fit: &FitResult) -> Result<()> {
    write_text(path, &fit_json(net, fit))
}

pub fn parse_fit(text: &str, path: &Path) -> Result<(Network, FitResult)> {
    let file: FitFile = versioned(text, path, "fit")?;
    let net = file.network.build()?;
    let fit = file.fit;
    if NetworkBasis::new(&net, fit.config.delta) != fit.basis || fit.gamma.len() != fit.basis.dim() {
        return Err(AppError::format(
            path,
            None,
            "stored basis does not match the embedded network",
        ));
    }
    Ok((net, fit))
}

pub fn read_fit(path: &Path) -> Result<(Network, FitResult)> {
    parse_fit(&read_text(path)?, path)
}

// CSV helpers

/// Checks a `# netspline-<kind> v<N>` stamp if present.
fn check_stamp(text: &str, path: &Path, kind: &str) -> Result<()> {
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if !line.starts_with('#') {
            if !line.is_empty() {
                break;
            }
            continue;
        }
        let Some(rest) = line.trim_start_matches('#').trim().strip_prefix("netspline-") else {
            continue;
        };
        let (found, version) = rest.split_once(' ').unwrap_or((rest, ""));
        if found != kind {
            return Err(AppError::format(
                path,
                Some(i as u64 + 1),
                format!("expected a {kind} file, found a {found} file"),
            ));
        }
        let version = version
            .trim()
            .strip_prefix('v')
            .and_then(|v| v.parse::<u64>().ok())
            .ok_or_else(|| AppError::format(path, Some(i as u64 + 1), "malformed version stamp"))?;
        check_version(path, kind, version)?;
    }
    Ok(())
}

fn stamp(kind: &str) -> String {
    format!("# netspline-{kind} v{FORMAT_VERSION}\n")
}

fn csv_reader(text: &str) -> csv::Reader<&[u8]> {
    csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes())
}

fn csv_writer() -> csv::Writer<Vec<u8>> {
    csv::WriterBuilder::new().from_writer(Vec::new())
}

fn finish(kind: &str, w: csv::Writer<Vec<u8>>) -> String {
    let body = String::from_utf8(w.into_inner().expect("in-memory writer")).expect("utf-8 output");
    stamp(kind) + &body
}

fn parse_f64(path: &Path, line: Option<u64>, field: &str, value: &str) -> Result<f64> {
    value
        .parse::<f64>()
        .ok()
        .filter(|v| v.is_finite())
        .ok_or_else(|| AppError::format(path, line, format!("{field}: `{value}` is not a finite number")))
}

// Points CSV

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PointForm {
    /// `edge_id,offset`
    Canonical,
    /// `x,y` (optionally `z`), snapped onto the network.
    Planar,
}

fn point_form(path: &Path, headers: &csv::StringRecord) -> Result<PointForm> {
    let names: Vec<&str> = headers.iter().collect();
    let canonical = names.iter().any(|h| *h == "edge_id" || *h == "offset");
    let planar = names.iter().any(|h| matches!(*h, "x" | "y" | "z"));
    match (canonical, planar) {
        (true, true) => Err(AppError::format(
            path,
            Some(1),
            "mixed point forms: use either `edge_id,offset` or `x,y`",
        )),
        _ if names == ["edge_id", "offset"] => Ok(PointForm::Canonical),
        _ if names == ["x", "y"] || names == ["x", "y", "z"] => Ok(PointForm::Planar),
        _ => Err(AppError::format(
            path,
            Some(1),
            format!("unexpected header `{}`: expected `edge_id,offset` or `x,y`", names.join(",")),
        )),
    }
}

/// Parses a point pattern; planar rows are snapped within `snap_tolerance`.
pub fn parse_points(text: &str, path: &Path, net: &Network, snap_tolerance: f64) -> Result<Vec<NetworkPoint>> {
    check_stamp(text, path, "points")?;
    let mut rdr = csv_reader(text);
    let headers = rdr
        .headers()
        .map_err(|e| AppError::format(path, None, e.to_string()))?
        .clone();
    let form = point_form(path, &headers)?;
    let mut points = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| AppError::format(path, e.position().map(|p| p.line()), e.to_string()))?;
        let line = rec.position().map(|p| p.line());
        let p = match form {
            PointForm::Canonical => {
                let edge = rec[0]
                    .parse::<usize>()
                    .map_err(|_| AppError::format(path, line, format!("edge_id: `{}` is not an index", &rec[0])))?;
                let offset = parse_f64(path, line, "offset", &rec[1])?;
                let p = NetworkPoint::new(edge, offset);
                net.check_point(&p).map_err(|e| AppError::format(path, line, e.to_string()))?;
                p
            }
            PointForm::Planar => {
                let coords = rec
                    .iter()
                    .zip(headers.iter())
                    .map(|(v, h)| parse_f64(path, line, h, v))
                    .collect::<Result<Vec<f64>>>()?;
                net.snap(&coords, snap_tolerance)
                    .map_err(|e| AppError::format(path, line, e.to_string()))?
                    .point
            }
        };
        points.push(p);
    }
    Ok(points)
}

pub fn read_points(path: &Path, net: &Network, snap_tolerance: f64) -> Result<Vec<NetworkPoint>> {
    parse_points(&read_text(path)?, path, net, snap_tolerance)
}

pub fn points_csv(points: &[NetworkPoint]) -> String {
    let mut w = csv_writer();
    w.write_record(["edge_id", "offset"]).expect("in-memory write");
    for p in points {
        w.write_record([p.edge.to_string(), real(p.offset)]).expect("in-memory write");
    }
    finish("points", w)
}

pub fn write_points(path: &Path, points: &[NetworkPoint]) -> Result<()> {
    write_text(path, &points_csv(points))
}

// Dumps

/// Sample locations along every edge: `ceil(d/step)` equal intervals with
/// both endpoints included.
pub fn sample_locations(net: &Network, step: f64) -> Result<Vec<NetworkPoint>> {
    if !(step > 0.0 && step.is_finite()) {
        return Err(AppError::Usage(format!("step must be positive, got {step}")));
    }
    let mut out = Vec::new();
    for (m, e) in net.edges().iter().enumerate() {
        let d = e.length();
        let intervals = ((d / step - 1e-9).ceil() as usize).max(1);
        for k in 0..=intervals {
            let offset = if k == intervals { d } else { d * k as f64 / intervals as f64 };
            out.push(NetworkPoint::new(m, offset));
        }
    }
    Ok(out)
}

/// Bin midpoints of the fit's bin layout.
pub fn bin_midpoints(net: &Network, h: f64) -> Vec<NetworkPoint> {
    netspline_core::BinLayout::with_width(net, h).bins().map(|(z, _)| z).collect()
}

/// `edge_id,offset,x,y,intensity,density` at `points`.
pub fn intensity_csv(net: &Network, fit: &FitResult, points: &[NetworkPoint]) -> Result<String> {
    let mut w = csv_writer();
    w.write_record(["edge_id", "offset", "x", "y", "intensity", "density"])
        .expect("in-memory write");
    for z in points {
        let c = net.embed(z)?;
        let phi = fit.intensity(z);
        let f = fit.density(z, fit.n)?;
        w.write_record([
            z.edge.to_string(),
            real(z.offset),
            real(c[0]),
            real(c[1]),
            real(phi),
            real(f),
        ])
        .expect("in-memory write");
    }
    Ok(finish("intensity", w))
}

/// `edge_id,offset,x,y,numerator,denominator,ratio` with `NA` where the
/// denominator is below the floor.
pub fn ratio_csv(net: &Network, ratio: &IntensityRatio<'_>, points: &[NetworkPoint]) -> Result<String> {
    let mut w = csv_writer();
    w.write_record(["edge_id", "offset", "x", "y", "numerator", "denominator", "ratio"])
        .expect("in-memory write");
    for z in points {
        let c = net.embed(z)?;
        let r = ratio.ratio(z).map_or_else(|| "NA".to_string(), real);
        w.write_record([
            z.edge.to_string(),
            real(z.offset),
            real(c[0]),
            real(c[1]),
            real(ratio.numerator.intensity(z)),
            real(ratio.denominator.intensity(z)),
            r,
        ])
        .expect("in-memory write");
    }
    Ok(finish("ratio", w))
}

/// `spline_id,kind,edge_or_vertex_id,k,peak_edge,peak_offset`.
pub fn basis_csv(basis: &NetworkBasis) -> String {
    let mut w = csv_writer();
    w.write_record(["spline_id", "kind", "edge_or_vertex_id", "k", "peak_edge", "peak_offset"])
        .expect("in-memory write");
    for j in 0..basis.dim() {
        let peak = basis.peak(j);
        let (kind, id, k) = match basis.kind(j) {
            SplineKind::Edge { edge, k } => ("edge", edge, k.to_string()),
            SplineKind::Vertex { vertex } => ("vertex", vertex, String::new()),
        };
        w.write_record([
            j.to_string(),
            kind.to_string(),
            id.to_string(),
            k,
            peak.edge.to_string(),
            real(peak.offset),
        ])
        .expect("in-memory write");
    }
    finish("basis", w)
}

/// Adjacency, difference and penalty matrices as `row col value` triplets,
/// one block per matrix headed by `# <name> <rows> <cols> <entries>`.
pub fn penalty_triplets(penalty: &PenaltySet) -> String {
    let mut out = stamp("triplets");
    let j = penalty.dim();
    let adjacency: Vec<(usize, usize)> = (0..j)
        .flat_map(|i| penalty.adjacency.neighbors(i).iter().map(move |&k| (i, k)))
        .collect();
    let _ = writeln!(out, "# A {j} {j} {}", adjacency.len());
    for (r, c) in adjacency {
        let _ = writeln!(out, "{r} {c} 1");
    }
    for order in [PenaltyOrder::First, PenaltyOrder::Second] {
        let d = penalty.difference(order);
        let n = order.as_u8();
        let entries: Vec<_> = d.triplets().collect();
        let _ = writeln!(out, "# D{n} {} {} {}", d.nrows(), d.ncols(), entries.len());
        for (r, c, v) in entries {
            let _ = writeln!(out, "{r} {c} {v}");
        }
        let k = penalty.matrix(order);
        let _ = writeln!(out, "# K{n} {j} {j} {}", k.nnz());
        for (r, c, v) in k.iter() {
            let _ = writeln!(out, "{r} {c} {v}");
        }
    }
    out
}
