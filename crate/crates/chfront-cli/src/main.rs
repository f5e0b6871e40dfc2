use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{bail, Context, Result};
use chfront::absolute_spectrum::{genericity_check, trace_absolute};
use chfront::branch_point::{closed_form_spreading, find_spreading_speed, track_branch_point};
use chfront::discrete_operator::{build_operator_with, eigenvalues, leading_pair, DENSE_LIMIT};
use chfront::dispersion::{essential_curve, spatial_roots, Side};
use chfront::evans::{
    count_eigs_in_box, eigenfunction_profiles, evans_back, evans_front, find_hopf_crossing, plateau_determinant,
    CBox,
};
use chfront::hopf::{branch_prediction, hopf_at_crossing};
use chfront::simulate::{amplitude_sweep, run_with_field};
use chfront::C64;
use chfront_cli::config::{self, Config, Overrides};
use chfront_cli::output::{Cell, RunOutput};
use chfront_cli::verify::{self, Level, Oracle};
use clap::{Args, Parser, Subcommand};
use serde::Serialize;

/// Trigger-front toolkit: spectra, Evans functions, Hopf data and simulations.
#[derive(Parser, Debug)]
#[command(name = "chfront", version)]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct Global {
    /// TOML configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Worker threads for parallel sweeps.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Plateau half-length.
    #[arg(long, global = true, allow_hyphen_values = true)]
    ell: Option<f64>,
    /// Frame speed c.
    #[arg(long, global = true, allow_hyphen_values = true)]
    speed: Option<f64>,
    /// Cubic coefficient.
    #[arg(long, global = true, allow_hyphen_values = true)]
    gamma: Option<f64>,
    /// Quintic coefficient.
    #[arg(long, global = true, allow_hyphen_values = true)]
    beta: Option<f64>,
    /// Linear coefficient on the plateau.
    #[arg(long, global = true, allow_hyphen_values = true)]
    chi_plus: Option<f64>,
    /// Linear coefficient outside the plateau.
    #[arg(long, global = true, allow_hyphen_values = true)]
    chi_minus: Option<f64>,
    /// Exponential weight rate.
    #[arg(long, global = true, allow_hyphen_values = true)]
    eta: Option<f64>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Spatial roots and Fredholm borders.
    Dispersion {
        #[command(subcommand)]
        cmd: DispersionCmd,
    },
    /// Linear spreading speed and the pinched branch point.
    BranchPoint {
        /// Plateau coefficient for the closed forms (defaults to chi_plus).
        #[arg(long)]
        alpha: Option<f64>,
    },
    /// Absolute spectrum of the plateau state.
    AbsSpectrum {
        #[arg(long, default_value_t = 2.0)]
        gamma_max: f64,
        #[arg(long, default_value_t = 0.01)]
        step: f64,
    },
    /// Evans functions, eigenvalue counts, crossing and eigenfunctions.
    Evans {
        #[command(subcommand)]
        cmd: EvansCmd,
    },
    /// Spectrum of the discretised operator.
    Eigs {
        /// Skip the dense eigensolve and only refine the leading pair.
        #[arg(long)]
        leading_only: bool,
    },
    /// Cubic Hopf coefficient, direction and branch table.
    Hopf,
    /// Time integration in the comoving frame.
    Simulate(SimulateArgs),
    /// Reproduction suite.
    Verify {
        #[arg(value_enum, default_value_t = Level::Fast)]
        level: Level,
    },
}

#[derive(Subcommand, Debug)]
enum DispersionCmd {
    /// Four spatial roots at one lambda.
    Roots {
        #[arg(long, allow_hyphen_values = true)]
        re: f64,
        #[arg(long, allow_hyphen_values = true)]
        im: f64,
    },
    /// Essential-spectrum borders of both states.
    EssCurve {
        #[arg(long, default_value_t = 3.0)]
        k_max: f64,
        #[arg(long, default_value_t = 601)]
        n: usize,
    },
}

#[derive(Subcommand, Debug)]
enum EvansCmd {
    /// Front, back and plateau determinants at one lambda.
    Eval {
        #[arg(long, allow_hyphen_values = true)]
        re: f64,
        #[arg(long, allow_hyphen_values = true)]
        im: f64,
    },
    /// Argument-principle count in a box.
    Count {
        #[arg(long, allow_hyphen_values = true)]
        re_min: f64,
        #[arg(long, allow_hyphen_values = true)]
        re_max: f64,
        #[arg(long, allow_hyphen_values = true)]
        im_min: f64,
        #[arg(long, allow_hyphen_values = true)]
        im_max: f64,
        #[arg(long, default_value_t = 800)]
        n: usize,
    },
    /// First Hopf crossing for the configured ell.
    Crossing,
    /// Eigenfunction and adjoint at the crossing.
    Eigenfunction {
        #[arg(long, default_value_t = 0.05)]
        h: f64,
        /// Extent beyond the plateau on each side.
        #[arg(long, default_value_t = 10.0)]
        pad: f64,
    },
}

#[derive(Args, Debug)]
#[command(args_conflicts_with_subcommands = true)]
struct SimulateArgs {
    #[command(subcommand)]
    sweep: Option<SimulateCmd>,
    /// End time.
    #[arg(long)]
    tfinal: Option<f64>,
    /// Probe position.
    #[arg(long, allow_hyphen_values = true)]
    probe: Option<f64>,
    /// Store the field every N records.
    #[arg(long)]
    save_field: Option<usize>,
}

#[derive(Subcommand, Debug)]
enum SimulateCmd {
    /// Amplitude and frequency over a range of speeds.
    Sweep {
        #[arg(long)]
        cmin: Option<f64>,
        #[arg(long)]
        cmax: Option<f64>,
        #[arg(long)]
        n: Option<usize>,
        #[arg(long)]
        tfinal: Option<f64>,
    },
}

fn c64_cells(z: C64) -> [Cell; 2] {
    [Cell::F(z.re), Cell::F(z.im)]
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn dispatch(cli: Cli) -> Result<ExitCode> {
    let g = &cli.global;
    if let Some(n) = g.threads {
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global().context("thread pool")?;
    }
    let flags = Overrides {
        ell: g.ell,
        speed: g.speed,
        gamma: g.gamma,
        beta: g.beta,
        chi_plus: g.chi_plus,
        chi_minus: g.chi_minus,
        eta: g.eta,
    };
    let cfg = config::load(g.config.as_deref(), std::env::vars(), &flags)?;
    let hash = cfg.hash();
    let out = &g.out;
    let m = cfg.model;
    match cli.command {
        Command::Dispersion { cmd: DispersionCmd::Roots { re, im } } => {
            let mut o = RunOutput::new(out, "dispersion_roots", hash)?;
            let lambda = C64::new(re, im);
            #[derive(Serialize)]
            struct Roots {
                plus: chfront::dispersion::SpatialRootSet,
                minus: chfront::dispersion::SpatialRootSet,
            }
            let r = Roots {
                plus: spatial_roots(m.chi_plus, m.c, lambda)?,
                minus: spatial_roots(m.chi_minus, m.c, lambda)?,
            };
            let p = o.write_json("roots.json", &r)?;
            println!("{}", p.display());
            o.finish()?;
        }
        Command::Dispersion { cmd: DispersionCmd::EssCurve { k_max, n } } => {
            if n < 2 {
                bail!("n >= 2 required");
            }
            let mut o = RunOutput::new(out, "dispersion_ess_curve", hash)?;
            let ks: Vec<f64> = (0..n).map(|i| -k_max + 2.0 * k_max * i as f64 / (n - 1) as f64).collect();
            let mut rows = Vec::new();
            for (side, chi) in [(Side::Plus, m.chi_plus), (Side::Minus, m.chi_minus)] {
                let curve = essential_curve(side, chi, m.c, m.eta, &ks);
                let label = if side == Side::Plus { "plus" } else { "minus" };
                for (k, l) in curve.samples {
                    let [a, b] = c64_cells(l);
                    rows.push(vec![Cell::S(label.into()), Cell::F(k), a, b]);
                }
            }
            let p = o.write_csv("curves.csv", &["side", "k", "re", "im"], &rows)?;
            println!("{}", p.display());
            o.finish()?;
        }
        Command::BranchPoint { alpha } => {
            let mut o = RunOutput::new(out, "branch_point", hash)?;
            let alpha = alpha.unwrap_or(m.chi_plus);
            #[derive(Serialize)]
            struct Report {
                closed_form: chfront::branch_point::LinearSpreading,
                bisection: chfront::branch_point::LinearSpreading,
                at_speed: chfront::branch_point::BranchPoint,
            }
            let t = Instant::now();
            let r = Report {
                closed_form: closed_form_spreading(alpha)?,
                bisection: find_spreading_speed(1.0, alpha)?,
                at_speed: track_branch_point(alpha, m.c)?,
            };
            o.time("solve", t.elapsed().as_secs_f64());
            let p = o.write_json("result.json", &r)?;
            println!("{}", p.display());
            o.finish()?;
        }
        Command::AbsSpectrum { gamma_max, step } => {
            let mut o = RunOutput::new(out, "abs_spectrum", hash)?;
            let bp = track_branch_point(m.chi_plus, m.c)?;
            let curve = trace_absolute(&bp, gamma_max, step)?;
            let rows: Vec<Vec<Cell>> = curve
                .points
                .iter()
                .map(|p| {
                    let [a, b] = c64_cells(p.lambda);
                    vec![Cell::F(p.gamma_sep), a, b]
                })
                .collect();
            o.write_csv("curve.csv", &["gamma_sep", "re", "im"], &rows)?;
            #[derive(Serialize)]
            struct Summary {
                branch_point: chfront::branch_point::BranchPoint,
                genericity: chfront::absolute_spectrum::Genericity,
                fold_detected: bool,
                stopped: Option<String>,
                points: usize,
            }
            let s = Summary {
                branch_point: bp,
                genericity: genericity_check(&curve),
                fold_detected: curve.fold_detected,
                stopped: curve.stopped.clone(),
                points: curve.points.len(),
            };
            let p = o.write_json("summary.json", &s)?;
            println!("{}", p.display());
            o.finish()?;
        }
        Command::Evans { cmd } => evans(cmd, &cfg, out, hash)?,
        Command::Eigs { leading_only } => {
            let mut o = RunOutput::new(out, "eigs", hash)?;
            let op = build_operator_with(&m, m.ell + cfg.eigs.margin, cfg.eigs.h, cfg.eigs.treatment)?;
            let mut seed = None;
            if !leading_only {
                if op.n > DENSE_LIMIT {
                    bail!("{} grid points exceed the dense limit {DENSE_LIMIT}; use --leading-only", op.n);
                }
                let t = Instant::now();
                let ev = eigenvalues(&op)?;
                o.time("dense", t.elapsed().as_secs_f64());
                let rows: Vec<Vec<Cell>> = ev.iter().map(|z| c64_cells(*z).to_vec()).collect();
                o.write_csv("spectrum.csv", &["re", "im"], &rows)?;
                seed = ev.iter().find(|z| z.im > 1e-6).copied();
            }
            let seed = match seed {
                Some(s) => s,
                None => chfront::evans::eigenvalue_near(&m, find_hopf_crossing(&m)?.lambda_star)?,
            };
            let pair = leading_pair(&op, seed)?;
            let rows: Vec<Vec<Cell>> = op
                .x()
                .iter()
                .zip(&pair.v)
                .zip(&pair.w)
                .map(|((x, v), w)| vec![Cell::F(*x), Cell::F(v.re), Cell::F(v.im), Cell::F(w.re), Cell::F(w.im)])
                .collect();
            o.write_csv("leading_vectors.csv", &["x", "v_re", "v_im", "w_re", "w_im"], &rows)?;
            #[derive(Serialize)]
            struct Leading {
                lambda: C64,
                residual: f64,
                h: f64,
                l_half: f64,
                n: usize,
            }
            let p = o.write_json(
                "leading.json",
                &Leading { lambda: pair.lambda, residual: pair.residual, h: op.h, l_half: op.l_half, n: op.n },
            )?;
            println!("{}", p.display());
            o.finish()?;
        }
        Command::Hopf => {
            let mut o = RunOutput::new(out, "hopf", hash)?;
            let h = &cfg.hopf;
            let t = Instant::now();
            let run = hopf_at_crossing(&m, h.h, h.margin, h.normalization)?;
            o.time("solve", t.elapsed().as_secs_f64());
            let r_grid: Vec<f64> = (0..h.r_points).map(|i| h.r_max * i as f64 / (h.r_points - 1) as f64).collect();
            let rows: Vec<Vec<Cell>> = branch_prediction(&run.result, &r_grid)
                .iter()
                .map(|b| vec![Cell::F(b.r), Cell::F(b.c), Cell::F(b.omega)])
                .collect();
            o.write_csv("branch.csv", &["r", "c", "omega"], &rows)?;
            let p = o.write_json("result.json", &run.result)?;
            println!("{}", p.display());
            o.finish()?;
        }
        Command::Simulate(args) => simulate(args, &cfg, out, hash)?,
        Command::Verify { level } => {
            let report = verify::run_suite(level, &Oracle::default(), |r| {
                println!("{}", r.line());
                for n in &r.notes {
                    println!("       {n}");
                }
            });
            let mut o = RunOutput::new(out, &format!("verify_{level:?}").to_lowercase(), hash)?;
            o.write_json("report.json", &report)?;
            o.finish()?;
            println!("{}", if report.pass { "verify: all criteria pass" } else { "verify: FAILURES" });
            return Ok(if report.pass { ExitCode::SUCCESS } else { ExitCode::from(1) });
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn evans(cmd: EvansCmd, cfg: &Config, out: &std::path::Path, hash: String) -> Result<()> {
    let m = cfg.model;
    match cmd {
        EvansCmd::Eval { re, im } => {
            let mut o = RunOutput::new(out, "evans_eval", hash)?;
            let lambda = C64::new(re, im);
            #[derive(Serialize)]
            struct Values {
                front: chfront::evans::EvansValue,
                back: chfront::evans::EvansValue,
                plateau: chfront::evans::EvansValue,
            }
            let v = Values {
                front: evans_front(&m, lambda)?,
                back: evans_back(&m, lambda)?,
                plateau: plateau_determinant(&m, lambda)?,
            };
            let p = o.write_json("values.json", &v)?;
            println!("{}", p.display());
            o.finish()?;
        }
        EvansCmd::Count { re_min, re_max, im_min, im_max, n } => {
            let mut o = RunOutput::new(out, "evans_count", hash)?;
            let bx = CBox::new(re_min, re_max, im_min, im_max);
            let count = count_eigs_in_box(&m, &bx, n)?;
            #[derive(Serialize)]
            struct Count {
                region: CBox,
                count: i64,
            }
            let p = o.write_json("count.json", &Count { region: bx, count })?;
            println!("{count}  ({})", p.display());
            o.finish()?;
        }
        EvansCmd::Crossing => {
            let mut o = RunOutput::new(out, "evans_crossing", hash)?;
            let cr = find_hopf_crossing(&m)?;
            let p = o.write_json("crossing.json", &cr)?;
            println!("{}", p.display());
            o.finish()?;
        }
        EvansCmd::Eigenfunction { h, pad } => {
            if !(h > 0.0 && pad >= 0.0) {
                bail!("need h > 0 and pad >= 0");
            }
            let mut o = RunOutput::new(out, "evans_eigenfunction", hash)?;
            let cr = find_hopf_crossing(&m)?;
            let half = m.ell + pad;
            let n = (2.0 * half / h).round() as usize;
            let grid: Vec<f64> = (0..=n).map(|i| -half + 2.0 * half * i as f64 / n as f64).collect();
            let prof = eigenfunction_profiles(&cr, &m, &grid)?;
            let rows: Vec<Vec<Cell>> = prof
                .grid
                .iter()
                .zip(&prof.p)
                .zip(&prof.psi)
                .map(|((x, p), q)| vec![Cell::F(*x), Cell::F(p.re), Cell::F(p.im), Cell::F(q.re), Cell::F(q.im)])
                .collect();
            o.write_csv("profile.csv", &["x", "p_re", "p_im", "psi_re", "psi_im"], &rows)?;
            #[derive(Serialize)]
            struct Summary {
                crossing: chfront::evans::CrossingData,
                a: f64,
                b: f64,
                b_fit: C64,
                alpha_ell: C64,
                alpha_center: C64,
                fit_r2: f64,
                plateau_residual: f64,
            }
            let s = Summary {
                crossing: cr,
                a: prof.a,
                b: prof.b,
                b_fit: prof.b_fit,
                alpha_ell: prof.alpha_ell,
                alpha_center: prof.alpha_center,
                fit_r2: prof.fit_r2,
                plateau_residual: prof.plateau_residual,
            };
            let p = o.write_json("summary.json", &s)?;
            println!("{}", p.display());
            o.finish()?;
        }
    }
    Ok(())
}

fn simulate(args: SimulateArgs, cfg: &Config, out: &std::path::Path, hash: String) -> Result<()> {
    let mut sim = cfg.sim_config();
    match args.sweep {
        Some(SimulateCmd::Sweep { cmin, cmax, n, tfinal }) => {
            let s = &cfg.sweep;
            let (lo, hi, n) = (cmin.unwrap_or(s.c_min), cmax.unwrap_or(s.c_max), n.unwrap_or(s.n));
            if !(lo < hi) || n < 2 {
                bail!("need cmin < cmax and n >= 2");
            }
            if let Some(t) = tfinal {
                sim.t_final = t;
            }
            let mut o = RunOutput::new(out, "simulate_sweep", hash)?;
            let cs: Vec<f64> = (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect();
            let t = Instant::now();
            let rows = amplitude_sweep(&sim, &cs)?;
            o.time("runs", t.elapsed().as_secs_f64());
            let cells: Vec<Vec<Cell>> = rows
                .iter()
                .map(|r| {
                    let k = serde_json::to_value(r.classification)?.as_str().unwrap_or("?").to_string();
                    Ok(vec![Cell::F(r.c), Cell::F(r.amplitude), Cell::F(r.frequency), Cell::S(k)])
                })
                .collect::<Result<_>>()?;
            let p = o.write_csv("sweep.csv", &["c", "amplitude", "frequency", "classification"], &cells)?;
            println!("{}", p.display());
            o.finish()?;
        }
        None => {
            if let Some(t) = args.tfinal {
                sim.t_final = t;
            }
            if let Some(x) = args.probe {
                sim.probe_x = x;
            }
            if let Some(k) = args.save_field {
                sim.save_field_every = k;
            }
            sim.validate()?;
            let mut o = RunOutput::new(out, "simulate", hash)?;
            let t = Instant::now();
            let (u, diag, field) = run_with_field(&sim, None)?;
            o.time("run", t.elapsed().as_secs_f64());
            let rows: Vec<Vec<Cell>> = diag
                .probe_series
                .iter()
                .zip(&diag.mass_series)
                .map(|(p, mm)| vec![Cell::F(p.0), Cell::F(p.1), Cell::F(mm.1)])
                .collect();
            o.write_csv("probe.csv", &["t", "u_probe", "mean_u"], &rows)?;
            let grid = sim.grid();
            let rows: Vec<Vec<Cell>> = grid.iter().zip(&u).map(|(x, v)| vec![Cell::F(*x), Cell::F(*v)]).collect();
            o.write_csv("final.csv", &["x", "u"], &rows)?;
            #[derive(Serialize)]
            struct Summary {
                amplitude: f64,
                frequency: f64,
                classification: chfront::simulate::Classification,
                peak: f64,
                aliasing_fraction: f64,
                config: chfront::simulate::SimConfig,
            }
            o.write_json(
                "summary.json",
                &Summary {
                    amplitude: diag.amplitude,
                    frequency: diag.frequency,
                    classification: diag.classification,
                    peak: diag.peak,
                    aliasing_fraction: diag.aliasing_fraction,
                    config: sim.clone(),
                },
            )?;
            if let Some(f) = field {
                let bytes: Vec<u8> = f.data.iter().flat_map(|v| v.to_le_bytes()).collect();
                o.write_bytes("field.bin", &bytes)?;
                #[derive(Serialize)]
                struct Header {
                    nx: usize,
                    nt: usize,
                    dx: f64,
                    dt: f64,
                    columns: Vec<f64>,
                    times: Vec<f64>,
                    layout: &'static str,
                }
                o.write_json(
                    "field.json",
                    &Header {
                        nx: f.nx,
                        nt: f.times.len(),
                        dx: f.dx,
                        dt: f.dt,
                        columns: grid,
                        times: f.times.clone(),
                        layout: "little-endian f64, one row of nx values per time",
                    },
                )?;
            }
            println!("amplitude {:.6e}, frequency {:.6}, {:?}", diag.amplitude, diag.frequency, diag.classification);
            o.finish()?;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use std::collections::BTreeMap;
    use std::path::Path;

    use super::*;

    fn run_in(dir: &Path, args: &[&str]) {
        let mut argv = vec!["chfront", "--out", dir.to_str().unwrap()];
        argv.extend_from_slice(args);
        let code = dispatch(Cli::parse_from(argv)).unwrap();
        assert_eq!(code, ExitCode::SUCCESS, "{args:?}");
    }

    /// File name to contents, manifests excluded since they carry timings.
    fn outputs(dir: &Path) -> BTreeMap<String, Vec<u8>> {
        std::fs::read_dir(dir)
            .unwrap()
            .map(|e| e.unwrap().path())
            .filter(|p| !p.to_str().unwrap().ends_with("_manifest.json"))
            .map(|p| (p.file_name().unwrap().to_str().unwrap().to_string(), std::fs::read(&p).unwrap()))
            .collect()
    }

    const COMMANDS: &[&[&str]] = &[
        &["dispersion", "roots", "--re", "0.1", "--im", "-1.2"],
        &["branch-point"],
        &["evans", "crossing"],
        &["hopf"],
        &["simulate", "--tfinal", "20", "--save-field", "10"],
    ];

    #[test]
    fn reruns_are_byte_identical() {
        let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
        for args in COMMANDS {
            run_in(a.path(), args);
            run_in(b.path(), args);
        }
        let (oa, ob) = (outputs(a.path()), outputs(b.path()));
        assert!(oa.len() >= COMMANDS.len());
        assert_eq!(oa, ob);
    }

    #[test]
    fn manifests_list_every_output() {
        let dir = tempfile::tempdir().unwrap();
        for args in COMMANDS {
            run_in(dir.path(), args);
        }
        let mut listed = Vec::new();
        for entry in std::fs::read_dir(dir.path()).unwrap() {
            let p = entry.unwrap().path();
            if p.to_str().unwrap().ends_with("_manifest.json") {
                let m: chfront_cli::output::RunManifest =
                    serde_json::from_slice(&std::fs::read(&p).unwrap()).unwrap();
                assert_eq!(m.config_hash.len(), 64);
                assert!(m.timings.contains_key("total"));
                listed.extend(m.outputs);
            }
        }
        let mut listed: Vec<String> = listed
            .iter()
            .map(|s| Path::new(s).file_name().unwrap().to_str().unwrap().to_string())
            .collect();
        listed.sort();
        let written: Vec<String> = outputs(dir.path()).into_keys().collect();
        assert_eq!(listed, written);
    }

    #[test]
    fn invalid_config_is_an_error() {
        let dir = tempfile::tempdir().unwrap();
        let argv = ["chfront", "--out", dir.path().to_str().unwrap(), "--ell", "-3", "evans", "crossing"];
        let e = dispatch(Cli::parse_from(argv)).unwrap_err();
        assert!(format!("{e:#}").contains("ell"), "{e:#}");
    }
}
