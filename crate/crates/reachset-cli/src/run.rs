//! Subcommand bodies and the thread-parallel drivers behind them.
//!
//! Parallel work always splits into contiguous index chunks whose outputs
//! concatenate in input order, so every file is byte-identical no matter
//! how many workers run.

use std::env;
use std::fs;
use std::path::{Path, PathBuf};
use std::thread;

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};
use reachset_core::families::FamilyKind;
use reachset_core::geom::Path2;
use reachset_core::math::{Vec2, Vec3};
use reachset_core::pmp::{equivalence_check2, equivalence_check3, screen_path2, PmpReport};
use reachset_core::reach::{
    assemble_boundary2, assemble_boundary3, oracle_cloud_from_points, oracle_endpoints2,
    oracle_endpoints3, screen_points2, screen_points3, BoundaryCloud, Mode, OracleCloud,
    OraclePoints, SupportTable2, SupportTable3,
};
use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::emit;

/// A failed run: invalid configuration or input exits with 2, anything
/// that breaks mid-flight exits with 3.
pub enum Failure {
    Config(String),
    Runtime(String),
}

impl Failure {
    pub fn exit_code(&self) -> u8 {
        match self {
            Failure::Config(_) => 2,
            Failure::Runtime(_) => 3,
        }
    }

    pub fn message(&self) -> &str {
        match self {
            Failure::Config(m) | Failure::Runtime(m) => m,
        }
    }
}

fn core_fail(e: reachset_core::Error) -> Failure {
    match e {
        reachset_core::Error::InvalidInput(_) | reachset_core::Error::InvalidGrid(_) => {
            Failure::Config(e.to_string())
        }
        other => Failure::Runtime(other.to_string()),
    }
}

fn io_fail(path: &Path) -> impl FnOnce(std::io::Error) -> Failure + '_ {
    move |e| Failure::Runtime(format!("{}: {e}", path.display()))
}

/// Worker count from `REACHSET_THREADS`; zero, unset or unparsable means
/// one worker per available core.
pub fn thread_count() -> usize {
    let auto = || thread::available_parallelism().map(|n| n.get()).unwrap_or(1);
    match env::var("REACHSET_THREADS") {
        Ok(s) => match s.trim().parse::<usize>() {
            Ok(0) | Err(_) => auto(),
            Ok(n) => n,
        },
        Err(_) => auto(),
    }
}

/// Maps `f` over `[0, n)` in at most `workers` contiguous chunks on
/// scoped threads and concatenates the chunk outputs in index order.
fn par_chunks<T, F>(n: usize, workers: usize, f: F) -> Result<Vec<T>, Failure>
where
    T: Send,
    F: Fn(usize, usize) -> Result<Vec<T>, Failure> + Sync,
{
    let workers = workers.clamp(1, n.max(1));
    let chunk = n.div_ceil(workers);
    let ranges: Vec<(usize, usize)> = (0..workers)
        .map(|w| (w * chunk, ((w + 1) * chunk).min(n)))
        .filter(|(lo, hi)| lo < hi)
        .collect();
    let mut out = Vec::with_capacity(n);
    if ranges.len() <= 1 {
        for (lo, hi) in ranges {
            out.extend(f(lo, hi)?);
        }
        return Ok(out);
    }
    let f = &f;
    let results: Vec<Result<Vec<T>, Failure>> = thread::scope(|scope| {
        let handles: Vec<_> = ranges
            .iter()
            .map(|&(lo, hi)| scope.spawn(move || f(lo, hi)))
            .collect();
        handles
            .into_iter()
            .map(|h| {
                h.join()
                    .unwrap_or_else(|_| Err(Failure::Runtime("worker thread panicked".into())))
            })
            .collect()
    });
    for r in results {
        out.extend(r?);
    }
    Ok(out)
}

/// Samples the Monte Carlo oracle across workers. Each sample owns one
/// counter-offset random stream, so chunked and sequential runs agree.
pub fn build_oracle(config: &RunConfig) -> Result<OracleCloud, Failure> {
    let (t_f, k) = (config.t_f, config.kappa_max);
    let o = &config.oracle;
    let workers = thread_count();
    let points = if config.mode.planar() {
        OraclePoints::Planar(par_chunks(o.n_samples, workers, |lo, hi| {
            oracle_endpoints2(t_f, k, o.n_pieces, o.seed, lo, hi).map_err(core_fail)
        })?)
    } else {
        OraclePoints::Spatial(par_chunks(o.n_samples, workers, |lo, hi| {
            oracle_endpoints3(t_f, k, o.n_pieces, o.seed, lo, hi).map_err(core_fail)
        })?)
    };
    oracle_cloud_from_points(config.mode, t_f, k, o.n_pieces, o.seed, points).map_err(core_fail)
}

/// Enumerates, screens (in parallel) and assembles one boundary.
pub fn build_boundary(config: &RunConfig, oracle: &OracleCloud) -> Result<BoundaryCloud, Failure> {
    let grid = config.grid();
    grid.validate().map_err(core_fail)?;
    let settings = config.oracle_settings();
    let workers = thread_count();
    let wd = config.mode.with_direction();
    if config.mode.planar() {
        let (cands, stats) =
            reachset_core::families::enumerate_2d_stats(&grid, wd).map_err(core_fail)?;
        let screened = par_chunks(cands.len(), workers, |lo, hi| {
            screen_points2(&cands[lo..hi], wd).map_err(core_fail)
        })?;
        assemble_boundary2(config.mode, &grid, &settings, screened, stats, oracle)
            .map_err(core_fail)
    } else {
        let (cands, stats) =
            reachset_core::families::enumerate_3d(&grid, wd).map_err(core_fail)?;
        let screened = par_chunks(cands.len(), workers, |lo, hi| {
            screen_points3(&cands[lo..hi], wd).map_err(core_fail)
        })?;
        assemble_boundary3(config.mode, &grid, &settings, screened, stats, oracle)
            .map_err(core_fail)
    }
}

fn resolve_out(config: &RunConfig, override_out: Option<&Path>, default_name: &str) -> PathBuf {
    override_out
        .map(Path::to_path_buf)
        .or_else(|| config.out.as_ref().map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from(default_name))
}

fn write_sidecar(out: &Path, body: &str) -> Result<PathBuf, Failure> {
    let meta = emit::sidecar_path(out);
    fs::write(&meta, format!("{body}\n")).map_err(io_fail(&meta))?;
    Ok(meta)
}

pub fn cmd_boundary(config: &RunConfig, out: Option<&Path>) -> Result<(), Failure> {
    let oracle = build_oracle(config)?;
    let cloud = build_boundary(config, &oracle)?;
    let out = resolve_out(config, out, "boundary.csv");
    emit::write_boundary_csv(&out, &cloud, &config.hash(), config.oracle.seed)
        .map_err(io_fail(&out))?;
    let meta = write_sidecar(&out, &emit::boundary_sidecar(config, &cloud.meta))?;
    println!(
        "boundary: {} points ({} candidates screened) -> {} + {}",
        cloud.points.len(),
        cloud.meta.enumerated,
        out.display(),
        meta.display()
    );
    Ok(())
}

pub fn cmd_oracle(config: &RunConfig, out: Option<&Path>) -> Result<(), Failure> {
    let cloud = build_oracle(config)?;
    let out = resolve_out(config, out, "oracle.csv");
    emit::write_oracle_csv(&out, &cloud, &config.hash()).map_err(io_fail(&out))?;
    let meta = write_sidecar(&out, &emit::oracle_sidecar(config, &cloud))?;
    println!(
        "oracle: {} samples -> {} + {}",
        cloud.n_samples,
        out.display(),
        meta.display()
    );
    Ok(())
}

/// Pontryagin check report for one stored path.
#[derive(Serialize, Deserialize, PartialEq, Debug)]
pub struct PmpCheckDoc {
    pub version: String,
    pub config_hash: String,
    pub seed: u64,
    pub mode: Mode,
    pub path_file: String,
    pub t_f: f64,
    pub pass: bool,
    pub report: PmpReport,
}

pub fn cmd_pmp_check(config: &RunConfig, out: Option<&Path>) -> Result<(), Failure> {
    if !config.mode.planar() {
        return Err(Failure::Config(
            "pmp-check reads planar path files; use a 2d mode".into(),
        ));
    }
    let Some(path_file) = &config.path_file else {
        return Err(Failure::Config("config key `path_file` is required".into()));
    };
    let text = fs::read_to_string(path_file)
        .map_err(|e| Failure::Config(format!("{path_file}: {e}")))?;
    let path: Path2 =
        serde_json::from_str(&text).map_err(|e| Failure::Config(format!("{path_file}: {e}")))?;
    path.validate().map_err(core_fail)?;
    let t_f = path.total_length();
    let screen = screen_path2(
        &path,
        config.mode.with_direction(),
        t_f / 64.0,
        65,
        config.pmp_tol,
    )
    .map_err(core_fail)?;
    let doc = PmpCheckDoc {
        version: emit::VERSION.into(),
        config_hash: config.hash(),
        seed: config.oracle.seed,
        mode: config.mode,
        path_file: path_file.clone(),
        t_f,
        pass: screen.pass,
        report: screen.report,
    };
    let body = serde_json::to_string_pretty(&doc).expect("report serializes");
    let out = resolve_out(config, out, "pmp_report.json");
    fs::write(&out, format!("{body}\n")).map_err(io_fail(&out))?;
    println!(
        "pmp-check: {} (gap {:.3e}, drift {:.3e}, transversality {:.3e}) -> {}",
        if doc.pass { "pass" } else { "fail" },
        doc.report.max_pointwise_gap,
        doc.report.hamiltonian_drift,
        doc.report.transversality_residual,
        out.display()
    );
    Ok(())
}

/// One support direction drawn from the normalized Gaussian.
fn unit_direction(rng: &mut ChaCha8Rng, dim: usize) -> Vec<f64> {
    const SCALE: f64 = 1.0 / (1u64 << 53) as f64;
    loop {
        let mut v = Vec::with_capacity(dim);
        while v.len() < dim {
            let u1 = ((rng.next_u64() >> 11) as f64 + 0.5) * SCALE;
            let u2 = ((rng.next_u64() >> 11) as f64 + 0.5) * SCALE;
            let r = (-2.0 * u1.ln()).sqrt();
            let (s, c) = (core::f64::consts::TAU * u2).sin_cos();
            v.push(r * c);
            if v.len() < dim {
                v.push(r * s);
            }
        }
        let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if n > 1e-9 {
            return v.into_iter().map(|x| x / n).collect();
        }
    }
}

struct EquivRow {
    c: Vec<f64>,
    support: f64,
    family: FamilyKind,
    h_total_max_abs: f64,
    pass: bool,
}

enum Table {
    Planar(SupportTable2),
    Spatial(SupportTable3),
}

fn equiv_row(
    table: &Table,
    mode: Mode,
    c: Vec<f64>,
    t_f: f64,
    tol: f64,
) -> Result<EquivRow, Failure> {
    let step = t_f / 512.0;
    let (support, family, report) = match table {
        Table::Planar(t) => {
            let (_, index) = t.sweep(&c).map_err(core_fail)?;
            let (value, cand, _) = t.polish(index, &c).map_err(core_fail)?;
            let c_pos = Vec2::new(c[0], c[1]);
            let c_dir = mode.with_direction().then(|| Vec2::new(c[2], c[3]));
            let report =
                equivalence_check2(&cand.path, c_pos, c_dir, 65, step, tol).map_err(core_fail)?;
            (value, cand.family, report)
        }
        Table::Spatial(t) => {
            let (_, index) = t.sweep(&c).map_err(core_fail)?;
            let (value, cand, _) = t.polish(index, &c).map_err(core_fail)?;
            let c_pos = Vec3::new(c[0], c[1], c[2]);
            let c_dir = mode.with_direction().then(|| Vec3::new(c[3], c[4], c[5]));
            let report =
                equivalence_check3(&cand, c_pos, c_dir, 65, step, tol).map_err(core_fail)?;
            (value, cand.family, report)
        }
    };
    Ok(EquivRow {
        c,
        support,
        family,
        h_total_max_abs: report.h_total_max_abs,
        pass: report.pass(tol),
    })
}

#[derive(Serialize)]
struct EquivCounts {
    n_directions: usize,
    passed: usize,
    failed: usize,
}

pub fn cmd_equiv(config: &RunConfig, out: Option<&Path>) -> Result<(), Failure> {
    if config.n_directions == 0 {
        return Err(Failure::Config("n_directions must be at least 1".into()));
    }
    let grid = config.grid();
    grid.validate().map_err(core_fail)?;
    let dim = config.mode.embed_dim();
    let mut rng = ChaCha8Rng::seed_from_u64(config.oracle.seed);
    let directions: Vec<Vec<f64>> = (0..config.n_directions)
        .map(|_| unit_direction(&mut rng, dim))
        .collect();
    let table = if config.mode.planar() {
        Table::Planar(SupportTable2::build(&grid, config.mode.with_direction()).map_err(core_fail)?)
    } else {
        Table::Spatial(SupportTable3::build(&grid, config.mode.with_direction()).map_err(core_fail)?)
    };
    let rows = par_chunks(directions.len(), thread_count(), |lo, hi| {
        directions[lo..hi]
            .iter()
            .map(|c| equiv_row(&table, config.mode, c.clone(), config.t_f, config.equiv_tol))
            .collect()
    })?;

    let out = resolve_out(config, out, "equiv.csv");
    let mut body = String::new();
    body.push_str(&format!("# reachset {}\n", emit::VERSION));
    body.push_str(&format!("# config_hash: {}\n", config.hash()));
    body.push_str(&format!("# seed: {}\n", config.oracle.seed));
    for i in 1..=dim {
        body.push_str(&format!("c{i},"));
    }
    body.push_str("support,family,h_total_max_abs,pass\n");
    for row in &rows {
        for v in &row.c {
            body.push_str(&emit::fmt_f64(*v));
            body.push(',');
        }
        body.push_str(&format!(
            "{},{},{},{}\n",
            emit::fmt_f64(row.support),
            row.family.as_str(),
            emit::fmt_f64(row.h_total_max_abs),
            row.pass
        ));
    }
    fs::write(&out, body).map_err(io_fail(&out))?;

    let passed = rows.iter().filter(|r| r.pass).count();
    let counts = EquivCounts {
        n_directions: rows.len(),
        passed,
        failed: rows.len() - passed,
    };
    let doc = emit::Sidecar {
        version: emit::VERSION,
        config_hash: &config.hash(),
        seed: config.oracle.seed,
        counts,
        config,
    };
    let meta = write_sidecar(&out, &serde_json::to_string_pretty(&doc).expect("sidecar"))?;
    println!(
        "equiv: {passed}/{} directions pass at tol {:e} -> {} + {}",
        rows.len(),
        config.equiv_tol,
        out.display(),
        meta.display()
    );
    Ok(())
}
