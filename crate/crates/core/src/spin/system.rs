use std::collections::BTreeMap;
use std::f64::consts::TAU;
use std::path::Path;

use serde::Deserialize;

use crate::{Error, Result};

const DEFAULT_MOLECULE: &str = include_str!("../../presets/molecule_2propanol.toml");

/// A nuclide class: its gyromagnetic ratio relative to the spectrometer
/// reference nucleus and the carrier used for its rotating frame.
#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
pub struct Species {
    pub ratio: f64,
    pub carrier_ppm: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Spin {
    pub name: String,
    pub species: String,
    pub ppm: f64,
}

/// Roster of named spins with chemical shifts and pairwise scalar couplings.
///
/// The roster order fixes the tensor-factor order of every operator and
/// state built from the system: spin 0 is the most significant bit of a
/// computational-basis index.
#[derive(Debug, Clone, PartialEq)]
pub struct SpinSystem {
    name: String,
    reference_frequency_hz: f64,
    species: BTreeMap<String, Species>,
    spins: Vec<Spin>,
    // n x n, row-major, rad/s
    couplings: Vec<f64>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct MoleculeFile {
    #[serde(default)]
    name: Option<String>,
    reference_frequency_hz: f64,
    species: BTreeMap<String, Species>,
    spin: Vec<SpinEntry>,
    #[serde(default)]
    coupling: Vec<CouplingEntry>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct SpinEntry {
    name: String,
    species: String,
    ppm: f64,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct CouplingEntry {
    between: [String; 2],
    #[serde(default)]
    j_hz: Option<f64>,
    #[serde(default)]
    j_rad_s: Option<f64>,
}

impl SpinSystem {
    /// Builds and validates a system. `couplings` lists `(a, b, J)` with J in
    /// rad/s; unlisted pairs are uncoupled.
    pub fn new(
        name: impl Into<String>,
        reference_frequency_hz: f64,
        species: BTreeMap<String, Species>,
        spins: Vec<Spin>,
        couplings: &[(&str, &str, f64)],
    ) -> Result<Self> {
        if !(reference_frequency_hz.is_finite() && reference_frequency_hz > 0.0) {
            return Err(Error::InvalidSystem(format!(
                "reference frequency must be positive, got {reference_frequency_hz}"
            )));
        }
        if spins.is_empty() {
            return Err(Error::InvalidSystem("no spins".into()));
        }
        for (label, sp) in &species {
            if !(sp.ratio.is_finite() && sp.ratio != 0.0 && sp.carrier_ppm.is_finite()) {
                return Err(Error::InvalidSystem(format!("bad species entry `{label}`")));
            }
        }
        for (i, s) in spins.iter().enumerate() {
            if spins[..i].iter().any(|o| o.name == s.name) {
                return Err(Error::InvalidSystem(format!("duplicate spin name `{}`", s.name)));
            }
            if !species.contains_key(&s.species) {
                return Err(Error::InvalidSystem(format!(
                    "spin `{}` uses undeclared species `{}`",
                    s.name, s.species
                )));
            }
            if !s.ppm.is_finite() {
                return Err(Error::InvalidSystem(format!("spin `{}` has non-finite shift", s.name)));
            }
        }

        let n = spins.len();
        let mut system = SpinSystem {
            name: name.into(),
            reference_frequency_hz,
            species,
            spins,
            couplings: vec![0.0; n * n],
        };
        for &(a, b, j) in couplings {
            let (i, k) = (system.index_of(a)?, system.index_of(b)?);
            if i == k {
                return Err(Error::InvalidSystem(format!("self-coupling on `{a}`")));
            }
            if !(j.is_finite() && j >= 0.0) {
                return Err(Error::InvalidSystem(format!("coupling {a}-{b} must be >= 0, got {j}")));
            }
            if system.couplings[i * n + k] != 0.0 {
                return Err(Error::InvalidSystem(format!("coupling {a}-{b} given twice")));
            }
            system.couplings[i * n + k] = j;
            system.couplings[k * n + i] = j;
        }
        Ok(system)
    }

    /// A system in which each spin's shift is given directly as a
    /// rotating-frame offset in rad/s (single species `X`, carrier at 0).
    /// Handy for small hand-built registers.
    pub fn with_offsets(spins: &[(&str, f64)], couplings: &[(&str, &str, f64)]) -> Result<Self> {
        let mut species = BTreeMap::new();
        species.insert("X".to_string(), Species { ratio: 1.0, carrier_ppm: 0.0 });
        let spins = spins
            .iter()
            .map(|&(name, offset)| Spin { name: name.into(), species: "X".into(), ppm: offset })
            .collect();
        SpinSystem::new("custom", 1e6 / TAU, species, spins, couplings)
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let file: MoleculeFile = toml::from_str(text)?;
        let mut couplings = Vec::with_capacity(file.coupling.len());
        for c in &file.coupling {
            let j = match (c.j_hz, c.j_rad_s) {
                (Some(hz), None) => TAU * hz,
                (None, Some(rad)) => rad,
                _ => {
                    return Err(Error::InvalidSystem(format!(
                        "coupling {}-{} needs exactly one of j_hz / j_rad_s",
                        c.between[0], c.between[1]
                    )))
                }
            };
            couplings.push((c.between[0].as_str(), c.between[1].as_str(), j));
        }
        let spins = file
            .spin
            .into_iter()
            .map(|s| Spin { name: s.name, species: s.species, ppm: s.ppm })
            .collect();
        SpinSystem::new(
            file.name.unwrap_or_else(|| "molecule".into()),
            file.reference_frequency_hz,
            file.species,
            spins,
            &couplings,
        )
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }

    /// The shipped 10-spin 2-propanol molecule (CC, CS1, CS2, HC, HS1..HS6).
    pub fn two_propanol() -> Self {
        Self::from_toml_str(DEFAULT_MOLECULE).expect("shipped molecule file is valid")
    }

    pub fn default_molecule_toml() -> &'static str {
        DEFAULT_MOLECULE
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn len(&self) -> usize {
        self.spins.len()
    }

    pub fn is_empty(&self) -> bool {
        self.spins.is_empty()
    }

    /// Hilbert-space dimension `2^n`.
    pub fn dim(&self) -> usize {
        1 << self.spins.len()
    }

    pub fn spins(&self) -> &[Spin] {
        &self.spins
    }

    pub fn labels(&self) -> Vec<String> {
        self.spins.iter().map(|s| s.name.clone()).collect()
    }

    pub fn reference_frequency_hz(&self) -> f64 {
        self.reference_frequency_hz
    }

    pub fn species(&self, label: &str) -> Option<&Species> {
        self.species.get(label)
    }

    pub fn contains(&self, label: &str) -> bool {
        self.spins.iter().any(|s| s.name == label)
    }

    pub fn index_of(&self, label: &str) -> Result<usize> {
        self.spins
            .iter()
            .position(|s| s.name == label)
            .ok_or_else(|| Error::UnknownSpin(label.to_string()))
    }

    pub fn require(&self, labels: &[&str]) -> Result<()> {
        let missing: Vec<String> =
            labels.iter().filter(|l| !self.contains(l)).map(|l| l.to_string()).collect();
        if missing.is_empty() {
            Ok(())
        } else {
            Err(Error::MissingSpins(missing))
        }
    }

    /// Coupling between spins `i` and `j` in rad/s.
    pub fn coupling(&self, i: usize, j: usize) -> f64 {
        self.couplings[i * self.spins.len() + j]
    }

    pub fn coupling_between(&self, a: &str, b: &str) -> Result<f64> {
        Ok(self.coupling(self.index_of(a)?, self.index_of(b)?))
    }

    /// Conversion factor in rad/s per ppm for a species.
    pub fn rad_s_per_ppm(&self, species: &str) -> Result<f64> {
        let sp = self
            .species
            .get(species)
            .ok_or_else(|| Error::InvalidSystem(format!("unknown species `{species}`")))?;
        Ok(TAU * self.reference_frequency_hz * sp.ratio * 1e-6)
    }

    pub fn ppm_to_rad_s(&self, species: &str, ppm: f64) -> Result<f64> {
        Ok(ppm * self.rad_s_per_ppm(species)?)
    }

    pub fn rad_s_to_ppm(&self, species: &str, omega: f64) -> Result<f64> {
        Ok(omega / self.rad_s_per_ppm(species)?)
    }

    /// Chemically shifted Larmor frequency of spin `i` in rad/s.
    pub fn larmor_rad_s(&self, i: usize) -> f64 {
        let s = &self.spins[i];
        self.ppm_to_rad_s(&s.species, s.ppm).expect("species validated at construction")
    }

    /// Rotating-frame carrier of spin `i`'s species in rad/s.
    pub fn carrier_rad_s(&self, i: usize) -> f64 {
        let s = &self.spins[i];
        let sp = &self.species[&s.species];
        self.ppm_to_rad_s(&s.species, sp.carrier_ppm).expect("species validated at construction")
    }

    /// Restriction of the system to the listed spins, in roster order.
    pub fn subsystem(&self, keep: &[&str]) -> Result<SpinSystem> {
        if keep.is_empty() {
            return Err(Error::EmptySelection);
        }
        let mut idx = Vec::with_capacity(keep.len());
        for label in keep {
            idx.push(self.index_of(label)?);
        }
        idx.sort_unstable();
        idx.dedup();
        let n = idx.len();
        let mut couplings = vec![0.0; n * n];
        for (a, &i) in idx.iter().enumerate() {
            for (b, &k) in idx.iter().enumerate() {
                couplings[a * n + b] = self.coupling(i, k);
            }
        }
        Ok(SpinSystem {
            name: self.name.clone(),
            reference_frequency_hz: self.reference_frequency_hz,
            species: self.species.clone(),
            spins: idx.iter().map(|&i| self.spins[i].clone()).collect(),
            couplings,
        })
    }

    /// Same roster, with every coupling that touches one of `labels` set to
    /// zero.
    pub fn with_couplings_zeroed(&self, labels: &[&str]) -> Result<SpinSystem> {
        let mut out = self.clone();
        let n = self.len();
        for label in labels {
            let i = self.index_of(label)?;
            for k in 0..n {
                out.couplings[i * n + k] = 0.0;
                out.couplings[k * n + i] = 0.0;
            }
        }
        Ok(out)
    }
}
