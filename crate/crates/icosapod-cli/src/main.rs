//! Command-line front end: verify the stored worked example, classify a
//! matrix space, build a pod from it, trace the pod's self-motion, recover
//! legs from traced poses, and survey random spaces.
//!
//! Exit codes: 0 success, 1 verification mismatch, 2 unreadable or
//! schema-violating input, 3 numerical failure.

use clap::{Parser, Subcommand};
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use icosapod::fixture::verify_example;
use icosapod::io::{
    read_pod_json, read_space_json, read_traj_csv, write_pod_json, write_space_json,
    write_stats_json,
};
use icosapod::pipeline::{build_pod_resampling, stats_survey};
use icosapod::solver::{solve_burmester, TrackOptions};
use icosapod::spectra::{adapt_contain_e, compute_type, Sym4Space};
use icosapod::study::{line_to_halfturn, LineR3, StudyPoint};
use icosapod::tracer::{export_csv, trace, TraceOptions};
use nalgebra::Vector3;

#[derive(Parser)]
#[command(name = "icosapod", version, about = "mobile icosapods from quartic spectrahedra")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Recheck the stored worked example's six leg lengths in exact arithmetic.
    VerifyExample {
        /// Largest accepted relative error.
        #[arg(long, default_value_t = 1e-12)]
        tol: f64,
    },
    /// Count real rank-2 points and semidefinite ones for a space.json.
    SpectraType {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, default_value_t = 17)]
        seed: u64,
        #[arg(long, default_value_t = 1e-10)]
        tol_track: f64,
        #[arg(long, default_value_t = 1e-8)]
        tol_real: f64,
    },
    /// Move a space so the distinguished matrix E lies inside its spectrahedron.
    AdaptSpace {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 17)]
        seed: u64,
    },
    /// Build a pod from a space.json; writes pod.json.
    BuildPod {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 17)]
        seed: u64,
        #[arg(long, default_value_t = 1e-10)]
        tol_track: f64,
        #[arg(long, default_value_t = 1e-8)]
        tol_real: f64,
    },
    /// Trace the self-motion of a pod.json; writes traj.csv.
    Trace {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 1000)]
        steps: usize,
        #[arg(long, default_value_t = 1e-9)]
        tol_trace: f64,
        /// Largest arclength step.
        #[arg(long, default_value_t = 5e-2)]
        step_max: f64,
    },
    /// Recover point pairs at fixed distance in seven poses of a traj.csv.
    Burmester {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, default_value_t = 17)]
        seed: u64,
        #[arg(long, default_value_t = 1e-10)]
        tol_track: f64,
        #[arg(long, default_value_t = 1e-8)]
        tol_real: f64,
    },
    /// Classify random spaces containing E; writes histogram stats.json.
    Stats {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 1000)]
        samples: usize,
        #[arg(long, default_value_t = 17)]
        seed: u64,
        #[arg(long, default_value_t = 1e-10)]
        tol_track: f64,
        #[arg(long, default_value_t = 1e-8)]
        tol_real: f64,
    },
}

enum Failure {
    Mismatch(String),
    Input(String),
    Numerical(String),
}

impl Failure {
    fn report(&self) -> ExitCode {
        let (code, msg) = match self {
            Failure::Mismatch(m) => (1, m),
            Failure::Input(m) => (2, m),
            Failure::Numerical(m) => (3, m),
        };
        eprintln!("error: {msg}");
        ExitCode::from(code)
    }
}

fn read_input(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| Failure::Input(format!("{}: {e}", path.display())))
}

fn write_output(path: &Path, text: &str) -> Result<(), Failure> {
    fs::write(path, text).map_err(|e| Failure::Input(format!("{}: {e}", path.display())))
}

fn load_space(path: &Path) -> Result<Sym4Space, Failure> {
    read_space_json(&read_input(path)?).map_err(|e| Failure::Input(e.to_string()))
}

fn track_options(tol_track: f64, tol_real: f64) -> TrackOptions {
    TrackOptions {
        tol_track,
        tol_real,
        ..TrackOptions::default()
    }
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::VerifyExample { tol } => {
            let check = verify_example();
            for (i, e) in check.rel_errors.iter().enumerate() {
                println!("leg {} squared-length relative error {e:.3e}", i + 1);
            }
            println!(
                "exact rational recomputation matches recorded values: {}",
                check.exact_match
            );
            if check.pass(tol) {
                println!("verify-example: pass (tol {tol:.3e})");
                Ok(())
            } else {
                Err(Failure::Mismatch(format!(
                    "recorded leg lengths not reproduced within {tol:.3e}"
                )))
            }
        }
        Command::SpectraType { input, seed, tol_track, tol_real } => {
            let space = load_space(&input)?;
            let (ty, nodes) = compute_type(&space, seed, &track_options(tol_track, tol_real))
                .map_err(|e| Failure::Numerical(e.to_string()))?;
            println!("type ({}, {})", ty.a, ty.b);
            println!("rank-2 points: {} ({} real)", nodes.len(), ty.a);
            println!(
                "contains E: {}",
                if space.e_coefficients().is_some() { "yes" } else { "no" }
            );
            Ok(())
        }
        Command::AdaptSpace { input, out, seed } => {
            let space = load_space(&input)?;
            let adapted =
                adapt_contain_e(&space, seed).map_err(|e| Failure::Numerical(e.to_string()))?;
            write_output(&out, &write_space_json(&adapted))?;
            println!("adapted space written to {}", out.display());
            Ok(())
        }
        Command::BuildPod { input, out, seed, tol_track, tol_real } => {
            let space = load_space(&input)?;
            let (pod, report) =
                build_pod_resampling(&space, seed, &track_options(tol_track, tol_real), 32)
                    .map_err(|e| Failure::Numerical(e.to_string()))?;
            println!(
                "type ({}, {}), legs: {} real finite, {} at infinity, {} complex",
                report.spectra_type.a,
                report.spectra_type.b,
                pod.counts.real_finite,
                pod.counts.at_infinity,
                pod.counts.complex
            );
            println!("max sphere residual at seed pose: {:.3e}", report.max_seed_residual);
            println!("mobile icosapod conditions: {}", if report.dagger.pass() { "pass" } else { "fail" });
            for reason in &report.dagger.reasons {
                println!("  {reason}");
            }
            write_output(&out, &write_pod_json(&pod))?;
            println!("pod written to {}", out.display());
            Ok(())
        }
        Command::Trace { input, out, steps, tol_trace, step_max } => {
            let pod = read_pod_json(&read_input(&input)?)
                .map_err(|e| Failure::Input(e.to_string()))?;
            let opts = TraceOptions {
                tol_trace,
                step_max,
                ..TraceOptions::default()
            };
            let traj = trace(&pod.legs, &pod.provenance.seed_line, steps, &opts)
                .map_err(|e| Failure::Numerical(e.to_string()))?;
            println!(
                "{} samples, arclength {:.6}, max residual {:.3e}, terminated {:?}",
                traj.samples.len(),
                traj.length(),
                traj.max_residual(),
                traj.termination
            );
            let mut buf = Vec::new();
            export_csv(&traj, &mut buf)
                .map_err(|e| Failure::Numerical(format!("csv serialization: {e}")))?;
            write_output(&out, &String::from_utf8(buf).expect("csv is ascii"))?;
            println!("trajectory written to {}", out.display());
            Ok(())
        }
        Command::Burmester { input, seed, tol_track, tol_real } => {
            let rows = read_traj_csv(&read_input(&input)?)
                .map_err(|e| Failure::Input(e.to_string()))?;
            let poses = poses_from_rows(&rows)?;
            let sols = solve_burmester(&poses, seed, &track_options(tol_track, tol_real))
                .map_err(|e| Failure::Numerical(e.to_string()))?;
            let with_mult: usize = sols.iter().map(|s| s.multiplicity).sum();
            let real = sols.iter().filter(|s| s.real).count();
            println!("{with_mult} solutions with multiplicity, {} distinct, {real} real", sols.len());
            let mut lines: Vec<String> = sols
                .iter()
                .filter(|s| s.real)
                .map(|s| {
                    format!(
                        "a=({:.16e},{:.16e},{:.16e}) b=({:.16e},{:.16e},{:.16e}) d2={:.16e}",
                        s.a[0].re, s.a[1].re, s.a[2].re, s.b[0].re, s.b[1].re, s.b[2].re, s.d2.re
                    )
                })
                .collect();
            lines.sort();
            for l in lines {
                println!("{l}");
            }
            Ok(())
        }
        Command::Stats { out, samples, seed, tol_track, tol_real } => {
            let result = stats_survey(samples, seed, &track_options(tol_track, tol_real));
            println!("samples: {}, degenerate: {}", result.samples, result.degenerate);
            println!("real rank-2 points  -> frequency: {:?}", result.real_points_hist);
            println!("real factor points  -> frequency: {:?}", result.real_preimage_hist);
            write_output(&out, &write_stats_json(&result))?;
            println!("stats written to {}", out.display());
            Ok(())
        }
    }
}

/// Seven poses spread along the traced arc, periodically so a closed loop
/// does not contribute the same pose twice.
fn poses_from_rows(rows: &[icosapod::io::TrajRow]) -> Result<[StudyPoint; 7], Failure> {
    if rows.len() < 7 {
        return Err(Failure::Input(format!(
            "need at least 7 trajectory rows, found {}",
            rows.len()
        )));
    }
    let total = rows.last().unwrap().s;
    let mut picked: Vec<usize> = Vec::with_capacity(7);
    for j in 0..7 {
        let target = total * j as f64 / 7.0;
        let best = (0..rows.len())
            .filter(|i| !picked.contains(i))
            .min_by(|&a, &b| {
                let (da, db) = ((rows[a].s - target).abs(), (rows[b].s - target).abs());
                da.partial_cmp(&db).unwrap()
            })
            .unwrap();
        picked.push(best);
    }
    picked.sort_unstable();
    let mut poses = Vec::with_capacity(7);
    for &i in &picked {
        let line = LineR3::new(
            Vector3::new(rows[i].c[0], rows[i].c[1], rows[i].c[2]),
            Vector3::new(rows[i].u[0], rows[i].u[1], rows[i].u[2]),
        )
        .ok_or_else(|| Failure::Input(format!("row {} has a zero direction", i + 2)))?;
        poses.push(line_to_halfturn(&line));
    }
    Ok(poses.try_into().expect("picked exactly seven"))
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => f.report(),
    }
}
