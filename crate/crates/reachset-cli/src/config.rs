//! Run configuration: one JSON document drives every subcommand.
//!
//! A config parses either from a bare `RunConfig` object or from a
//! metadata sidecar written by a previous run (the sidecar embeds the
//! config under `"config"`), so outputs can be reproduced from their own
//! metadata. Unknown keys are rejected everywhere.

use reachset_core::families::{BranchSel, CandidateGrid};
use reachset_core::reach::{Mode, OracleSettings};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

fn default_kappa() -> f64 {
    1.0
}

fn default_n_arc() -> usize {
    64
}

fn default_n_psi() -> usize {
    32
}

fn default_branch() -> BranchSel {
    BranchSel::Both
}

fn default_zeta() -> Vec<f64> {
    reachset_core::torsion::default_zeta_grid()
}

fn default_tau0() -> Vec<f64> {
    reachset_core::torsion::default_tau0_grid()
}

fn default_taudot0() -> Vec<f64> {
    reachset_core::torsion::default_taudot0_grid()
}

fn default_n_directions() -> usize {
    200
}

fn default_equiv_tol() -> f64 {
    1e-4
}

fn default_pmp_tol() -> f64 {
    1e-6
}

/// Monte Carlo oracle settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OracleConfig {
    pub n_samples: usize,
    pub n_pieces: usize,
    pub seed: u64,
    /// Dominance threshold; `null` means `1e-6 * t_f`.
    #[serde(default)]
    pub eps_dom: Option<f64>,
}

impl Default for OracleConfig {
    fn default() -> Self {
        let s = OracleSettings::default();
        OracleConfig {
            n_samples: s.n_samples,
            n_pieces: s.n_pieces,
            seed: s.seed,
            eps_dom: s.eps_dom,
        }
    }
}

/// Full description of one run. Defaults follow the library.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub mode: Mode,
    pub t_f: f64,
    #[serde(default = "default_kappa")]
    pub kappa_max: f64,
    /// Points per arc-length parameter.
    #[serde(default = "default_n_arc")]
    pub n_arc: usize,
    /// Plane angles for embedding planar families into space.
    #[serde(default = "default_n_psi")]
    pub n_psi: usize,
    #[serde(default = "default_branch")]
    pub branch: BranchSel,
    #[serde(default = "default_zeta")]
    pub zeta: Vec<f64>,
    #[serde(default = "default_tau0")]
    pub tau0: Vec<f64>,
    #[serde(default = "default_taudot0")]
    pub taudot0: Vec<f64>,
    #[serde(default)]
    pub oracle: OracleConfig,
    /// Containment tolerance; `null` means `1e-2 * t_f`.
    #[serde(default)]
    pub eps_in: Option<f64>,
    /// Support directions for the `equiv` sweep.
    #[serde(default = "default_n_directions")]
    pub n_directions: usize,
    #[serde(default = "default_equiv_tol")]
    pub equiv_tol: f64,
    #[serde(default = "default_pmp_tol")]
    pub pmp_tol: f64,
    /// Path specification file for `pmp-check`.
    #[serde(default)]
    pub path_file: Option<String>,
    /// Primary output file; sidecars derive from it.
    #[serde(default)]
    pub out: Option<String>,
}

impl RunConfig {
    pub fn new(mode: Mode, t_f: f64) -> Self {
        RunConfig {
            mode,
            t_f,
            kappa_max: default_kappa(),
            n_arc: default_n_arc(),
            n_psi: default_n_psi(),
            branch: default_branch(),
            zeta: default_zeta(),
            tau0: default_tau0(),
            taudot0: default_taudot0(),
            oracle: OracleConfig::default(),
            eps_in: None,
            n_directions: default_n_directions(),
            equiv_tol: default_equiv_tol(),
            pmp_tol: default_pmp_tol(),
            path_file: None,
            out: None,
        }
    }

    pub fn grid(&self) -> CandidateGrid {
        CandidateGrid {
            t_f: self.t_f,
            kappa_max: self.kappa_max,
            n_arc: self.n_arc,
            n_psi: self.n_psi,
            branch: self.branch,
            zeta: self.zeta.clone(),
            tau0: self.tau0.clone(),
            taudot0: self.taudot0.clone(),
        }
    }

    pub fn oracle_settings(&self) -> OracleSettings {
        OracleSettings {
            n_samples: self.oracle.n_samples,
            n_pieces: self.oracle.n_pieces,
            seed: self.oracle.seed,
            eps_dom: self.oracle.eps_dom,
        }
    }

    /// Canonical serialization; the config hash is the SHA-256 of these
    /// bytes, so it is stable across load/override round trips.
    pub fn canonical_json(&self) -> String {
        serde_json::to_string(self).expect("config serializes")
    }

    /// SHA-256 of the canonical form with the output name masked, so two
    /// runs that differ only in where they write agree on the hash.
    pub fn hash(&self) -> String {
        let mut masked = self.clone();
        masked.out = None;
        let digest = Sha256::digest(masked.canonical_json().as_bytes());
        let mut out = String::with_capacity(64);
        for b in digest {
            out.push_str(&format!("{b:02x}"));
        }
        out
    }
}

/// Either a bare config document or a sidecar that embeds one.
#[derive(Deserialize)]
#[serde(untagged)]
enum ConfigDocument {
    Sidecar { config: RunConfig },
    Bare(RunConfig),
}

pub fn parse_config(text: &str) -> Result<RunConfig, String> {
    // Try the strict bare form first so its error messages surface for
    // hand-written configs; fall back to the sidecar wrapper.
    match serde_json::from_str::<RunConfig>(text) {
        Ok(c) => Ok(c),
        Err(bare_err) => match serde_json::from_str::<ConfigDocument>(text) {
            Ok(ConfigDocument::Sidecar { config }) | Ok(ConfigDocument::Bare(config)) => {
                Ok(config)
            }
            Err(_) => Err(format!("invalid config: {bare_err}")),
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_is_identity() {
        let cfg = RunConfig::new(Mode::Dir3, core::f64::consts::PI);
        let text = serde_json::to_string_pretty(&cfg).unwrap();
        let back = parse_config(&text).unwrap();
        assert_eq!(cfg, back);
        assert_eq!(cfg.hash(), back.hash());
    }

    #[test]
    fn unknown_keys_rejected() {
        let text = r#"{"mode":"2d-nodir","t_f":1.0,"bogus":3}"#;
        assert!(parse_config(text).is_err());
        let nested = r#"{"mode":"2d-nodir","t_f":1.0,"oracle":{"n_samples":5,"n_pieces":2,"seed":0,"extra":1}}"#;
        assert!(parse_config(nested).is_err());
    }

    #[test]
    fn sidecar_form_extracts_config() {
        let cfg = RunConfig::new(Mode::NoDir2, 1.0);
        let sidecar = format!(
            r#"{{"version":"x","config_hash":"y","config":{}}}"#,
            cfg.canonical_json()
        );
        let back = parse_config(&sidecar).unwrap();
        assert_eq!(cfg, back);
    }

    #[test]
    fn defaults_fill_missing_fields() {
        let cfg = parse_config(r#"{"mode":"3d-dir","t_f":2.0}"#).unwrap();
        assert_eq!(cfg.n_arc, 64);
        assert_eq!(cfg.oracle.n_samples, 100_000);
        assert!(cfg.eps_in.is_none());
    }
}
