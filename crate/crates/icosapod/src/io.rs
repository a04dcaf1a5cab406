//! File formats: space.json (a basis of four symmetric matrices), pod.json
//! (legs plus provenance), stats.json (survey histograms), and traj.csv
//! (traced motion samples). Writers are canonical: fixed key order and
//! 17-significant-digit floats, so identical inputs give identical bytes.

use nalgebra::{Matrix4, Vector3};
use serde::Deserialize;
use std::collections::BTreeMap;
use std::fmt::Write as _;
use thiserror::Error;

use crate::legspace::Leg;
use crate::pipeline::{LegCounts, Pod, Provenance, SurveyResult};
use crate::spectra::Sym4Space;
use crate::study::LineR3;

#[derive(Debug, Error)]
pub enum ReadError {
    #[error("malformed JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("malformed CSV: {0}")]
    Csv(String),
    #[error("schema violation: {0}")]
    Schema(String),
}

fn finite(x: f64, what: &str) -> Result<f64, ReadError> {
    if x.is_finite() {
        Ok(x)
    } else {
        Err(ReadError::Schema(format!("{what} is not a finite number")))
    }
}

fn fnum(x: f64) -> String {
    format!("{x:.16e}")
}

fn fvec3(v: &Vector3<f64>) -> String {
    format!("[{},{},{}]", fnum(v[0]), fnum(v[1]), fnum(v[2]))
}

fn fmat4(m: &Matrix4<f64>) -> String {
    let rows: Vec<String> = (0..4)
        .map(|i| {
            let cells: Vec<String> = (0..4).map(|j| fnum(m[(i, j)])).collect();
            format!("[{}]", cells.join(","))
        })
        .collect();
    format!("[{}]", rows.join(","))
}

// ---- space.json ----

#[derive(Deserialize)]
struct SpaceFile {
    basis: [[[f64; 4]; 4]; 4],
}

/// Parses {"basis": [four 4x4 row-major matrices]}; entries are symmetrized
/// and the span must be 4-dimensional.
pub fn read_space_json(text: &str) -> Result<Sym4Space, ReadError> {
    let file: SpaceFile = serde_json::from_str(text)?;
    let mut basis = [Matrix4::zeros(); 4];
    for (k, rows) in file.basis.iter().enumerate() {
        for i in 0..4 {
            for j in 0..4 {
                basis[k][(i, j)] = finite(rows[i][j], "basis entry")?;
            }
        }
    }
    Sym4Space::new(basis).map_err(|e| ReadError::Schema(e.to_string()))
}

pub fn write_space_json(space: &Sym4Space) -> String {
    let mats: Vec<String> = space.basis().iter().map(fmat4).collect();
    format!("{{\"basis\":[{}]}}\n", mats.join(","))
}

// ---- pod.json ----

#[derive(Deserialize)]
struct LegFile {
    a: [f64; 3],
    b: [f64; 3],
    d2: f64,
}

#[derive(Deserialize)]
struct ProvenanceFile {
    basis: [[[f64; 4]; 4]; 4],
    seed_line: LineFile,
    seed: u64,
    node_multiplicities: Vec<usize>,
    lifts: Vec<Option<f64>>,
}

#[derive(Deserialize)]
struct LineFile {
    c: [f64; 3],
    u: [f64; 3],
}

#[derive(Deserialize)]
struct CountsFile {
    real_finite: usize,
    at_infinity: usize,
    complex: usize,
}

#[derive(Deserialize)]
struct PodFile {
    legs: Vec<LegFile>,
    provenance: ProvenanceFile,
    counts: CountsFile,
}

pub fn read_pod_json(text: &str) -> Result<Pod, ReadError> {
    let file: PodFile = serde_json::from_str(text)?;
    if file.legs.is_empty() {
        return Err(ReadError::Schema("pod has no legs".into()));
    }
    let mut legs = Vec::with_capacity(file.legs.len());
    for lf in &file.legs {
        let take = |v: &[f64; 3], what| -> Result<Vector3<f64>, ReadError> {
            Ok(Vector3::new(
                finite(v[0], what)?,
                finite(v[1], what)?,
                finite(v[2], what)?,
            ))
        };
        legs.push(Leg {
            a: take(&lf.a, "leg platform point")?,
            b: take(&lf.b, "leg base point")?,
            d2: finite(lf.d2, "leg squared length")?,
        });
    }
    if file.counts.real_finite != file.legs.len() {
        return Err(ReadError::Schema(format!(
            "counts.real_finite = {} but {} legs are listed",
            file.counts.real_finite,
            file.legs.len()
        )));
    }
    let mut basis = [Matrix4::zeros(); 4];
    for (k, rows) in file.provenance.basis.iter().enumerate() {
        for i in 0..4 {
            for j in 0..4 {
                basis[k][(i, j)] = finite(rows[i][j], "provenance basis entry")?;
            }
        }
    }
    let c = file.provenance.seed_line.c;
    let u = file.provenance.seed_line.u;
    let seed_line = LineR3::new(
        Vector3::new(finite(c[0], "seed line")?, finite(c[1], "seed line")?, finite(c[2], "seed line")?),
        Vector3::new(finite(u[0], "seed line")?, finite(u[1], "seed line")?, finite(u[2], "seed line")?),
    )
    .ok_or_else(|| ReadError::Schema("seed line direction is zero".into()))?;
    if file.provenance.lifts.len() != file.provenance.node_multiplicities.len() {
        return Err(ReadError::Schema("lifts and node multiplicities differ in length".into()));
    }
    for l in file.provenance.lifts.iter().flatten() {
        finite(*l, "lift")?;
    }
    Ok(Pod {
        legs,
        provenance: Provenance {
            basis,
            seed_line,
            seed: file.provenance.seed,
            node_multiplicities: file.provenance.node_multiplicities,
            lifts: file.provenance.lifts,
        },
        counts: LegCounts {
            real_finite: file.counts.real_finite,
            at_infinity: file.counts.at_infinity,
            complex: file.counts.complex,
        },
    })
}

pub fn write_pod_json(pod: &Pod) -> String {
    let mut out = String::from("{\n\"version\":\"");
    out.push_str(env!("CARGO_PKG_VERSION"));
    out.push_str("\",\n\"legs\":[\n");
    for (i, leg) in pod.legs.iter().enumerate() {
        let _ = write!(
            out,
            "{{\"a\":{},\"b\":{},\"d2\":{}}}{}\n",
            fvec3(&leg.a),
            fvec3(&leg.b),
            fnum(leg.d2),
            if i + 1 < pod.legs.len() { "," } else { "" }
        );
    }
    out.push_str("],\n\"provenance\":{");
    let p = &pod.provenance;
    let mats: Vec<String> = p.basis.iter().map(fmat4).collect();
    let _ = write!(out, "\"basis\":[{}],", mats.join(","));
    let _ = write!(
        out,
        "\"seed_line\":{{\"c\":{},\"u\":{}}},",
        fvec3(p.seed_line.c()),
        fvec3(p.seed_line.u())
    );
    let _ = write!(out, "\"seed\":{},", p.seed);
    let mults: Vec<String> = p.node_multiplicities.iter().map(|m| m.to_string()).collect();
    let _ = write!(out, "\"node_multiplicities\":[{}],", mults.join(","));
    let lifts: Vec<String> = p
        .lifts
        .iter()
        .map(|l| l.map_or_else(|| "null".to_string(), fnum))
        .collect();
    let _ = write!(out, "\"lifts\":[{}]}},\n", lifts.join(","));
    let _ = write!(
        out,
        "\"counts\":{{\"real_finite\":{},\"at_infinity\":{},\"complex\":{}}}\n}}\n",
        pod.counts.real_finite, pod.counts.at_infinity, pod.counts.complex
    );
    out
}

// ---- stats.json ----

#[derive(Deserialize)]
struct StatsFile {
    samples: usize,
    seed: u64,
    real_points_hist: BTreeMap<String, usize>,
    real_preimage_hist: BTreeMap<String, usize>,
    degenerate: usize,
}

fn parse_hist(h: &BTreeMap<String, usize>, what: &str) -> Result<BTreeMap<usize, usize>, ReadError> {
    h.iter()
        .map(|(k, &v)| {
            k.parse::<usize>()
                .map(|key| (key, v))
                .map_err(|_| ReadError::Schema(format!("{what} key {k:?} is not a count")))
        })
        .collect()
}

pub fn read_stats_json(text: &str) -> Result<SurveyResult, ReadError> {
    let file: StatsFile = serde_json::from_str(text)?;
    let real_points_hist = parse_hist(&file.real_points_hist, "real_points_hist")?;
    let real_preimage_hist = parse_hist(&file.real_preimage_hist, "real_preimage_hist")?;
    let counted: usize = real_points_hist.values().sum();
    if counted + file.degenerate != file.samples {
        return Err(ReadError::Schema(format!(
            "{} histogram entries plus {} degenerate do not account for {} samples",
            counted, file.degenerate, file.samples
        )));
    }
    Ok(SurveyResult {
        samples: file.samples,
        seed: file.seed,
        real_points_hist,
        real_preimage_hist,
        degenerate: file.degenerate,
    })
}

fn hist_json(h: &BTreeMap<usize, usize>) -> String {
    let entries: Vec<String> = h.iter().map(|(k, v)| format!("\"{k}\":{v}")).collect();
    format!("{{{}}}", entries.join(","))
}

pub fn write_stats_json(r: &SurveyResult) -> String {
    format!(
        "{{\n\"version\":\"{}\",\n\"samples\":{},\n\"seed\":{},\n\"real_points_hist\":{},\n\"real_preimage_hist\":{},\n\"degenerate\":{}\n}}\n",
        env!("CARGO_PKG_VERSION"),
        r.samples,
        r.seed,
        hist_json(&r.real_points_hist),
        hist_json(&r.real_preimage_hist),
        r.degenerate
    )
}

// ---- traj.csv ----

#[derive(Debug, Clone, PartialEq)]
pub struct TrajRow {
    pub s: f64,
    pub c: Vector3<f64>,
    pub u: Vector3<f64>,
    /// Platform-point images, three columns each after the line columns.
    pub images: Vec<Vector3<f64>>,
}

pub fn read_traj_csv(text: &str) -> Result<Vec<TrajRow>, ReadError> {
    let mut lines = text.lines();
    let header = lines.next().ok_or_else(|| ReadError::Csv("empty file".into()))?;
    let cols: Vec<&str> = header.split(',').collect();
    if cols.len() < 7 || cols[..7] != ["s", "c1", "c2", "c3", "u1", "u2", "u3"] {
        return Err(ReadError::Csv("header must start with s,c1,c2,c3,u1,u2,u3".into()));
    }
    if (cols.len() - 7) % 3 != 0 {
        return Err(ReadError::Csv("image columns must come in triples".into()));
    }
    let n_img = (cols.len() - 7) / 3;
    let mut rows = Vec::new();
    for (lineno, line) in lines.enumerate() {
        if line.is_empty() {
            continue;
        }
        let cells: Vec<&str> = line.split(',').collect();
        if cells.len() != cols.len() {
            return Err(ReadError::Csv(format!(
                "row {} has {} fields, header has {}",
                lineno + 2,
                cells.len(),
                cols.len()
            )));
        }
        let mut vals = Vec::with_capacity(cells.len());
        for cell in &cells {
            let v: f64 = cell
                .parse()
                .map_err(|_| ReadError::Csv(format!("row {}: bad number {cell:?}", lineno + 2)))?;
            finite(v, "csv value").map_err(|_| {
                ReadError::Csv(format!("row {}: non-finite value", lineno + 2))
            })?;
            vals.push(v);
        }
        let images = (0..n_img)
            .map(|i| Vector3::new(vals[7 + 3 * i], vals[8 + 3 * i], vals[9 + 3 * i]))
            .collect();
        rows.push(TrajRow {
            s: vals[0],
            c: Vector3::new(vals[1], vals[2], vals[3]),
            u: Vector3::new(vals[4], vals[5], vals[6]),
            images,
        });
    }
    Ok(rows)
}
