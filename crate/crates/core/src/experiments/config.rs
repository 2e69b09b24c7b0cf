use std::fs;
use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::hamiltonian::EntanglingMode;
use crate::noise::{DecouplingMode, SampleSpec, DEFAULT_MAX_DT};
use crate::sim::{InitialState, SimConfig};
use crate::spin::SpinSystem;
use crate::{Error, Result};

/// Settings shared by all experiment commands. Every field has a default,
/// so an empty file is a valid config. Relative paths are resolved against
/// the directory of the config file.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Molecule file; the built-in 2-propanol table when absent.
    pub molecule: Option<PathBuf>,
    /// Sample preset (`sample1` .. `sample4`), a sample file, or `none`
    /// for noiseless runs.
    pub sample: String,
    /// Pulse program for `run` when none is given on the command line.
    pub program: Option<PathBuf>,
    pub thetas_deg: Vec<f64>,
    /// Echo length of the phase sweep.
    pub tau_ms: f64,
    /// Sensing-time unit of the decay curves (τ = n · unit).
    pub tau_unit_ms: f64,
    /// Largest n of the decay curves.
    pub n_max: u32,
    /// Decoupling override; each command has its own default.
    pub decoupling: Option<DecouplingMode>,
    pub entangling: EntanglingMode,
    pub points: usize,
    pub dwell_ms: f64,
    pub zero_fill: usize,
    /// Center-spin offset in the receiver frame, Hz.
    pub receiver_offset_hz: f64,
    /// `J·T2` of the theoretical spectra.
    pub jt2: f64,
    /// Samples and dwell of the relaxation FIDs.
    pub fid_points: usize,
    pub fid_dwell_ms: f64,
    pub max_dt_s: f64,
    pub check_every: usize,
    /// `thermal` or `rho_i`.
    pub initial: String,
    pub output_dir: PathBuf,
    #[serde(skip)]
    base_dir: PathBuf,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            molecule: None,
            sample: "sample1".into(),
            program: None,
            thetas_deg: vec![0.0, 30.0, 50.0, 90.0],
            tau_ms: 3.4,
            tau_unit_ms: 3.44,
            n_max: 16,
            decoupling: None,
            entangling: EntanglingMode::Ideal,
            points: 4096,
            dwell_ms: 2.0,
            zero_fill: 2,
            receiver_offset_hz: 100.0,
            jt2: 22.0,
            fid_points: 512,
            fid_dwell_ms: 0.5,
            max_dt_s: DEFAULT_MAX_DT,
            check_every: 10,
            initial: "thermal".into(),
            output_dir: PathBuf::from("out"),
            base_dir: PathBuf::new(),
        }
    }
}

impl ExperimentConfig {
    /// Parses a config whose relative paths are taken relative to `base_dir`.
    pub fn from_toml_str(text: &str, base_dir: impl Into<PathBuf>) -> Result<Self> {
        let mut cfg: ExperimentConfig = toml::from_str(text)?;
        cfg.base_dir = base_dir.into();
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Self::from_toml_str(&text, base)
    }

    pub fn base_dir(&self) -> &Path {
        &self.base_dir
    }

    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    pub fn output_path(&self) -> PathBuf {
        self.resolve(&self.output_dir)
    }

    pub fn molecule(&self) -> Result<SpinSystem> {
        match &self.molecule {
            Some(p) => SpinSystem::load(self.resolve(p)),
            None => Ok(SpinSystem::two_propanol()),
        }
    }

    pub fn is_noiseless(&self) -> bool {
        self.sample == "none"
    }

    pub fn sample_spec(&self) -> Result<SampleSpec> {
        if let Ok(s) = SampleSpec::preset_named(&self.sample) {
            return Ok(s);
        }
        let path = self.resolve(Path::new(&self.sample));
        if path.is_file() {
            SampleSpec::load(path)
        } else {
            Err(Error::Config(format!("`{}` is neither a sample preset nor a sample file", self.sample)))
        }
    }

    pub fn initial_state(&self) -> Result<InitialState> {
        self.initial.parse()
    }

    pub fn receiver_offset(&self) -> f64 {
        std::f64::consts::TAU * self.receiver_offset_hz
    }

    /// Checks everything that can be checked without running anything.
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if let Some(t) = self.thetas_deg.iter().find(|t| !t.is_finite()) {
            return bad(format!("theta values must be finite, got {t}"));
        }
        if self.thetas_deg.is_empty() {
            return bad("theta list is empty".into());
        }
        for (name, v) in [
            ("tau_ms", self.tau_ms),
            ("tau_unit_ms", self.tau_unit_ms),
            ("dwell_ms", self.dwell_ms),
            ("fid_dwell_ms", self.fid_dwell_ms),
            ("jt2", self.jt2),
            ("max_dt_s", self.max_dt_s),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return bad(format!("{name} must be a positive number, got {v}"));
            }
        }
        if !self.receiver_offset_hz.is_finite() {
            return bad("receiver_offset_hz must be finite".into());
        }
        if self.points < 2 || self.fid_points < 2 {
            return bad("points and fid_points must be >= 2".into());
        }
        if self.zero_fill == 0 {
            return bad("zero_fill must be >= 1".into());
        }
        if self.n_max < 4 {
            return bad(format!("n_max must be >= 4 for the decay fits, got {}", self.n_max));
        }
        if let Some(p) = &self.molecule {
            let p = self.resolve(p);
            if !p.is_file() {
                return bad(format!("molecule file {} does not exist", p.display()));
            }
        }
        if let Some(p) = &self.program {
            let p = self.resolve(p);
            if !p.is_file() {
                return bad(format!("program file {} does not exist", p.display()));
            }
        }
        self.molecule()?;
        if !self.is_noiseless() {
            self.sample_spec()?;
        }
        self.initial_state()?;
        Ok(())
    }

    /// Creates the output directory and makes sure it accepts files.
    pub fn prepare_output(&self) -> Result<PathBuf> {
        let dir = self.output_path();
        fs::create_dir_all(&dir)
            .map_err(|e| Error::Config(format!("cannot create output dir {}: {e}", dir.display())))?;
        if fs::metadata(&dir)?.permissions().readonly() {
            return Err(Error::Config(format!("output dir {} is not writable", dir.display())));
        }
        Ok(dir)
    }

    /// Simulator settings for `molecule` with the configured sample.
    pub fn sim_config(&self, molecule: &SpinSystem) -> Result<SimConfig> {
        let mut sim = SimConfig::new(molecule.clone());
        if !self.is_noiseless() {
            sim = sim.with_sample(self.sample_spec()?);
        }
        sim.receiver_offset = self.receiver_offset();
        sim.max_dt = self.max_dt_s;
        sim.check_every = self.check_every.max(1);
        Ok(sim)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_config_is_default() {
        let c = ExperimentConfig::from_toml_str("", "").unwrap();
        assert_eq!(c, ExperimentConfig::default());
        c.validate().unwrap();
    }

    #[test]
    fn fields_and_enums_parse() {
        let c = ExperimentConfig::from_toml_str(
            "thetas_deg = [10, 20.5]\ndecoupling = \"selective\"\nentangling = \"quantized\"\nsample = \"sample3\"",
            "",
        )
        .unwrap();
        assert_eq!(c.thetas_deg, vec![10.0, 20.5]);
        assert_eq!(c.decoupling, Some(DecouplingMode::Selective));
        assert_eq!(c.entangling, EntanglingMode::Quantized);
        assert_eq!(c.sample_spec().unwrap().impurity_concentration_mm, 47.0);
    }

    #[test]
    fn rejects_unknown_keys_and_bad_values() {
        assert!(ExperimentConfig::from_toml_str("thetas = [1]", "").is_err());
        assert!(ExperimentConfig::from_toml_str("decoupling = \"partial\"", "").is_err());
        let c = ExperimentConfig::from_toml_str("sample = \"nope.toml\"", "/nonexistent").unwrap();
        assert!(c.validate().is_err());
        let c = ExperimentConfig::from_toml_str("molecule = \"missing.toml\"", "").unwrap();
        assert!(c.validate().is_err());
        let c = ExperimentConfig { thetas_deg: vec![f64::NAN], ..Default::default() };
        assert!(c.validate().is_err());
    }

    #[test]
    fn relative_paths_use_config_dir() {
        let c = ExperimentConfig::from_toml_str("output_dir = \"res\"", "/tmp/x").unwrap();
        assert_eq!(c.output_path(), PathBuf::from("/tmp/x/res"));
    }
}
