//! Configuration documents for the Bäcklund and defect-matrix commands.
//!
//! Every key is optional; missing keys take the defaults of the chosen sector.  Complex numbers
//! are written as `[re, im]`.

use std::f64::consts::PI;
use std::path::Path;

use defectlab::liouville::{DefectParams, SpectralParameter};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Sector {
    Bosonic,
    Super,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StateConfig {
    pub sector: Sector,
    /// The coarsest grid is [−a, a]² in (z, z̄) with `n` nodes per direction.
    pub half_width: f64,
    pub n: usize,
    /// Grid levels (spacing halved each time) for convergence tables.
    pub levels: usize,
    pub mu: Complex64,
    pub beta: Complex64,
    pub kappa: f64,
    pub a11: Complex64,
    pub b11: Complex64,
    pub c11: Complex64,
    pub d11: Complex64,
    pub lambda: Complex64,
    /// Position parameter of the static wall used as side-1 data (bosonic sector).
    pub wall_x0: f64,
    pub seed_phi2: Complex64,
    pub seed_lambda0: Complex64,
    /// Seed value of f1, as a multiple of the first seed generator (super sector).
    pub seed_f1: f64,
    /// Seed of φ2 for the type-I companion run (bosonic sector).
    pub type1_seed: Complex64,
    pub generators: usize,
    /// Random off-shell states for the superspace check.
    pub samples: usize,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawStateConfig {
    half_width: Option<f64>,
    n: Option<usize>,
    levels: Option<usize>,
    mu: Option<[f64; 2]>,
    beta: Option<[f64; 2]>,
    kappa: Option<f64>,
    a11: Option<[f64; 2]>,
    b11: Option<[f64; 2]>,
    c11: Option<[f64; 2]>,
    d11: Option<[f64; 2]>,
    lambda: Option<[f64; 2]>,
    wall_x0: Option<f64>,
    seed_phi2: Option<[f64; 2]>,
    seed_lambda0: Option<[f64; 2]>,
    seed_f1: Option<f64>,
    type1_seed: Option<[f64; 2]>,
    generators: Option<usize>,
    samples: Option<usize>,
}

fn c(v: [f64; 2]) -> Complex64 {
    Complex64::new(v[0], v[1])
}

impl StateConfig {
    pub fn defaults(sector: Sector) -> Self {
        match sector {
            Sector::Bosonic => Self {
                sector,
                half_width: 0.5,
                n: 17,
                levels: 3,
                mu: Complex64::new(1.0, 0.0),
                beta: Complex64::new(1.0, 0.0),
                kappa: 0.0,
                a11: Complex64::new(0.6, -0.1),
                b11: Complex64::new(0.4, 0.0),
                c11: Complex64::new(-1.25, 0.0),
                d11: Complex64::new(1.0, 0.0),
                lambda: Complex64::new(1.2, 0.33),
                wall_x0: 1.5,
                seed_phi2: Complex64::new(-0.2, 0.0),
                seed_lambda0: Complex64::new(0.1, 0.3),
                seed_f1: 0.0,
                type1_seed: Complex64::new(-0.3, 0.1),
                generators: defectlab::super_liouville::DEFAULT_GENERATORS,
                samples: 100,
            },
            Sector::Super => Self {
                sector,
                half_width: 0.5,
                n: 9,
                levels: 3,
                mu: Complex64::new(0.7, 0.2),
                beta: Complex64::from_polar(1.0, -PI / 4.0),
                kappa: -1.0,
                a11: Complex64::new(1.0, 0.0),
                b11: Complex64::new(0.8, 0.3),
                c11: Complex64::new(1.0, 0.0),
                d11: Complex64::new(1.1, -0.4),
                lambda: Complex64::new(0.9, -0.2),
                wall_x0: 1.5,
                seed_phi2: Complex64::new(-0.1, 0.0),
                seed_lambda0: Complex64::new(0.2, 0.3),
                seed_f1: 0.4,
                type1_seed: Complex64::new(-0.3, 0.1),
                generators: defectlab::super_liouville::DEFAULT_GENERATORS,
                samples: 100,
            },
        }
    }

    pub fn from_toml_str(sector: Sector, text: &str) -> Result<Self, CliError> {
        let raw: RawStateConfig = toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        let mut cfg = Self::defaults(sector);
        macro_rules! take {
            ($($f:ident),*) => { $(if let Some(v) = raw.$f { cfg.$f = v; })* };
        }
        macro_rules! take_c {
            ($($f:ident),*) => { $(if let Some(v) = raw.$f { cfg.$f = c(v); })* };
        }
        take!(half_width, n, levels, kappa, wall_x0, seed_f1, generators, samples);
        take_c!(mu, beta, a11, b11, c11, d11, lambda, seed_phi2, seed_lambda0, type1_seed);
        Ok(cfg)
    }

    /// Defaults when `path` is None, otherwise the document at `path`.
    pub fn load(sector: Sector, path: Option<&Path>) -> Result<Self, CliError> {
        match path {
            None => Ok(Self::defaults(sector)),
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(|e| CliError::Config(format!("{}: {e}", p.display())))?;
                Self::from_toml_str(sector, &text)
            }
        }
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let bad = |m: String| Err(CliError::Config(m));
        if !(self.half_width > 0.0) {
            return bad("half_width must be positive".into());
        }
        if self.n < 5 {
            return bad("n must be at least 5".into());
        }
        if !(2..=6).contains(&self.levels) {
            return bad("levels must lie in 2..=6".into());
        }
        if self.sector == Sector::Super && self.generators != defectlab::super_liouville::DEFAULT_GENERATORS {
            return bad(format!("the super sector uses {} generators", defectlab::super_liouville::DEFAULT_GENERATORS));
        }
        self.params()?;
        self.spectral()?;
        Ok(())
    }

    pub fn params(&self) -> Result<DefectParams, CliError> {
        let p = DefectParams::new(self.mu, self.beta, Complex64::new(self.kappa, 0.0)).map_err(|e| CliError::Config(e.to_string()))?;
        Ok(DefectParams { a11: self.a11, b11: self.b11, c11: self.c11, d11: self.d11, ..p })
    }

    pub fn spectral(&self) -> Result<SpectralParameter, CliError> {
        SpectralParameter::new(self.lambda).map_err(|e| CliError::Config(format!("lambda: {e}")))
    }
}
