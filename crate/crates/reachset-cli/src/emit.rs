//! Output writers. Every file opens with the tool version, the config
//! hash and the seed, floats carry 17 significant digits, rows end in
//! `\n`, and the decimal separator is always `.`.

use std::fmt::Write as _;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use reachset_core::reach::{
    BoundaryCloud, BoundaryMeta, Endpoint, Generator, OracleCloud, OraclePoints,
};
use serde::Serialize;

use crate::config::RunConfig;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// 17 significant digits: enough to reproduce any f64 exactly.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

/// Quotes a field for CSV if it contains commas, quotes or newlines.
fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

fn preamble(w: &mut impl Write, config_hash: &str, seed: u64) -> std::io::Result<()> {
    writeln!(w, "# reachset {VERSION}")?;
    writeln!(w, "# config_hash: {config_hash}")?;
    writeln!(w, "# seed: {seed}")
}

fn endpoint_columns(e: &Endpoint) -> Vec<f64> {
    match e {
        Endpoint::Pos2(p) => p.to_vec(),
        Endpoint::Conf2(c) => vec![c.x, c.y, c.theta()],
        Endpoint::Pos3(p) => p.to_vec(),
        Endpoint::Conf3(c) => vec![c.r.x, c.r.y, c.r.z, c.e.x, c.e.y, c.e.z],
    }
}

fn endpoint_header(e: &Endpoint) -> &'static str {
    match e {
        Endpoint::Pos2(_) => "x,y",
        Endpoint::Conf2(_) => "x,y,theta",
        Endpoint::Pos3(_) => "x,y,z",
        Endpoint::Conf3(_) => "x,y,z,ex,ey,ez",
    }
}

pub fn write_boundary_csv(
    path: &Path,
    boundary: &BoundaryCloud,
    config_hash: &str,
    seed: u64,
) -> std::io::Result<()> {
    let file = fs::File::create(path)?;
    let mut w = BufWriter::new(file);
    preamble(&mut w, config_hash, seed)?;
    let header = boundary
        .points
        .first()
        .map(|p| endpoint_header(&p.endpoint))
        .unwrap_or("x,y");
    writeln!(w, "{header},family,pmp_pass,gen_params_json")?;
    for p in &boundary.points {
        let mut row = String::new();
        for v in endpoint_columns(&p.endpoint) {
            let _ = write!(row, "{},", fmt_f64(v));
        }
        let gen = gen_params_json(&p.generator);
        let _ = write!(
            row,
            "{},{},{}",
            p.family.as_str(),
            p.pmp_pass,
            csv_field(&gen)
        );
        writeln!(w, "{row}")?;
    }
    w.flush()
}

fn gen_params_json(g: &Generator) -> String {
    serde_json::to_string(g).expect("generator serializes")
}

pub fn write_oracle_csv(
    path: &Path,
    cloud: &OracleCloud,
    config_hash: &str,
) -> std::io::Result<()> {
    let file = fs::File::create(path)?;
    let mut w = BufWriter::new(file);
    preamble(&mut w, config_hash, cloud.seed)?;
    match &cloud.points {
        OraclePoints::Planar(pts) => {
            writeln!(w, "x,y,theta")?;
            for c in pts {
                writeln!(
                    w,
                    "{},{},{}",
                    fmt_f64(c.x),
                    fmt_f64(c.y),
                    fmt_f64(c.theta())
                )?;
            }
        }
        OraclePoints::Spatial(pts) => {
            writeln!(w, "x,y,z,ex,ey,ez")?;
            for c in pts {
                writeln!(
                    w,
                    "{},{},{},{},{},{}",
                    fmt_f64(c.r.x),
                    fmt_f64(c.r.y),
                    fmt_f64(c.r.z),
                    fmt_f64(c.e.x),
                    fmt_f64(c.e.y),
                    fmt_f64(c.e.z)
                )?;
            }
        }
    }
    w.flush()
}

/// Metadata written next to every output file.
#[derive(Serialize)]
pub struct Sidecar<'a, C: Serialize> {
    pub version: &'a str,
    pub config_hash: &'a str,
    pub seed: u64,
    pub counts: C,
    pub config: &'a RunConfig,
}

#[derive(Serialize)]
pub struct OracleCounts {
    pub n_samples: usize,
    pub n_pieces: usize,
    pub control_model: String,
}

pub fn boundary_sidecar(config: &RunConfig, meta: &BoundaryMeta) -> String {
    let doc = Sidecar {
        version: VERSION,
        config_hash: &config.hash(),
        seed: config.oracle.seed,
        counts: meta,
        config,
    };
    serde_json::to_string_pretty(&doc).expect("sidecar serializes")
}

pub fn oracle_sidecar(config: &RunConfig, cloud: &OracleCloud) -> String {
    let doc = Sidecar {
        version: VERSION,
        config_hash: &config.hash(),
        seed: cloud.seed,
        counts: OracleCounts {
            n_samples: cloud.n_samples,
            n_pieces: cloud.n_pieces,
            control_model: cloud.control_model.clone(),
        },
        config,
    };
    serde_json::to_string_pretty(&doc).expect("sidecar serializes")
}

/// `out.csv` gets its metadata at `out.meta.json`.
pub fn sidecar_path(out: &Path) -> std::path::PathBuf {
    out.with_extension("meta.json")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn floats_carry_seventeen_digits() {
        let s = fmt_f64(core::f64::consts::PI);
        assert_eq!(s, "3.1415926535897931e0");
        assert_eq!(s.parse::<f64>().unwrap(), core::f64::consts::PI);
    }

    #[test]
    fn csv_quoting_doubles_quotes() {
        assert_eq!(csv_field("plain"), "plain");
        assert_eq!(csv_field(r#"{"a":1}"#), r#""{""a"":1}""#);
        assert_eq!(csv_field("a,b"), "\"a,b\"");
    }

    #[test]
    fn sidecar_path_swaps_extension() {
        let p = sidecar_path(Path::new("/tmp/run/boundary.csv"));
        assert_eq!(p, Path::new("/tmp/run/boundary.meta.json"));
    }
}
