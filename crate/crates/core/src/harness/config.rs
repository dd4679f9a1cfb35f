//! Scenario description: a key/value file, named presets, and per-field overrides.
//!
//! ```text
//! # comment
//! n = 256
//! shape = disc:100
//! model_window = gaussian
//! recon_window = gaussian
//! K = 20
//! sigma = 1
//! noise = complex
//! trials = 50
//! seed = 7
//! r_list = 2, 3, 4, 5.05
//! ```

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::maskgeom::ShapeSpec;
use crate::noise::NoiseKind;
use crate::tfcore::WindowLabel;

pub const N_RANGE: (usize, usize) = (16, 512);

/// Default containment radii in continuous units. The last entry is the
/// radius calibrated for the Figure-1 scenarios (see `tests/acceptance.rs`).
pub const DEFAULT_R_LIST: [f64; 4] = [2.0, 3.0, 4.0, 5.05];

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Preset {
    Figure1Left,
    Figure1Right,
}

impl Preset {
    pub const ALL: [Preset; 2] = [Preset::Figure1Left, Preset::Figure1Right];

    pub fn scenario(self) -> Scenario {
        let model_window = match self {
            Preset::Figure1Left => WindowLabel::Gaussian,
            Preset::Figure1Right => WindowLabel::GaussianT2,
        };
        Scenario {
            n: 256,
            shape: ShapeSpec::Disc { center: None, measure: 100.0 },
            model_window,
            recon_window: WindowLabel::Gaussian,
            k: 20,
            sigma: 1.0,
            noise: NoiseKind::Complex,
            trials: 50,
            seed: 7,
            r_list: DEFAULT_R_LIST.to_vec(),
        }
    }
}

impl fmt::Display for Preset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Preset::Figure1Left => "figure1-left",
            Preset::Figure1Right => "figure1-right",
        })
    }
}

impl FromStr for Preset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "figure1-left" => Ok(Preset::Figure1Left),
            "figure1-right" => Ok(Preset::Figure1Right),
            other => Err(Error::config(format!(
                "unknown preset '{other}' (expected figure1-left or figure1-right)"
            ))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Scenario {
    pub n: usize,
    pub shape: ShapeSpec,
    pub model_window: WindowLabel,
    pub recon_window: WindowLabel,
    pub k: usize,
    pub sigma: f64,
    pub noise: NoiseKind,
    pub trials: usize,
    pub seed: u64,
    /// Radii at which `Omega \triangle Omega_hat \subseteq [dOmega]^r` is tested.
    pub r_list: Vec<f64>,
}

impl Default for Scenario {
    fn default() -> Self {
        Preset::Figure1Left.scenario()
    }
}

impl Scenario {
    pub fn validate(&self) -> Result<()> {
        if !(N_RANGE.0..=N_RANGE.1).contains(&self.n) {
            return Err(Error::config(format!(
                "n must lie in [{}, {}], got {}",
                N_RANGE.0, N_RANGE.1, self.n
            )));
        }
        if self.trials == 0 {
            return Err(Error::config("trials must be at least 1"));
        }
        match self.noise {
            NoiseKind::Complex if self.k < 1 => {
                return Err(Error::config("K must be at least 1"));
            }
            NoiseKind::Real if self.k < 4 => {
                return Err(Error::config(format!("real noise needs K >= 4, got {}", self.k)));
            }
            NoiseKind::Complexified => {
                return Err(Error::config("noise must be 'complex' or 'real'"));
            }
            _ => {}
        }
        if !(self.sigma > 0.0) || !self.sigma.is_finite() {
            return Err(Error::config(format!("sigma must be positive, got {}", self.sigma)));
        }
        if self.r_list.is_empty() {
            return Err(Error::config("r_list must not be empty"));
        }
        if let Some(r) = self.r_list.iter().find(|r| !(**r > 0.0) || !r.is_finite()) {
            return Err(Error::config(format!("r_list entries must be positive, got {r}")));
        }
        Ok(())
    }

    /// Applies one `key = value` assignment.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let value = value.trim();
        let bad = |what: &str| Error::config(format!("invalid {what} '{value}'"));
        match key.trim() {
            "n" => self.n = value.parse().map_err(|_| bad("n"))?,
            "shape" => self.shape = value.parse()?,
            "model_window" | "g" => self.model_window = value.parse()?,
            "recon_window" | "phi" => self.recon_window = value.parse()?,
            "K" | "k" => self.k = value.parse().map_err(|_| bad("K"))?,
            "sigma" => self.sigma = value.parse().map_err(|_| bad("sigma"))?,
            "noise" => self.noise = value.parse()?,
            "trials" => self.trials = value.parse().map_err(|_| bad("trials"))?,
            "seed" => self.seed = value.parse().map_err(|_| bad("seed"))?,
            "r_list" => self.r_list = parse_list(value)?,
            other => return Err(Error::config(format!("unknown configuration key '{other}'"))),
        }
        Ok(())
    }

    /// Overlays the assignments of a config text onto `self`.
    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::config(format!("line {}: expected 'key = value'", lineno + 1))
            })?;
            self.set(key, value)
                .map_err(|e| Error::config(format!("line {}: {}", lineno + 1, strip(&e))))?;
        }
        Ok(())
    }

    pub fn apply_file(&mut self, path: &Path) -> Result<()> {
        let text = std::fs::read_to_string(path).map_err(|e| {
            Error::config(format!("cannot read config {}: {e}", path.display()))
        })?;
        self.apply_text(&text)
    }

    /// Text form accepted by [`Scenario::apply_text`].
    pub fn to_config_text(&self) -> String {
        let r: Vec<String> = self.r_list.iter().map(|r| r.to_string()).collect();
        format!(
            "n = {}\nshape = {}\nmodel_window = {}\nrecon_window = {}\nK = {}\nsigma = {}\n\
             noise = {}\ntrials = {}\nseed = {}\nr_list = {}\n",
            self.n,
            self.shape,
            self.model_window,
            self.recon_window,
            self.k,
            self.sigma,
            self.noise,
            self.trials,
            self.seed,
            r.join(", ")
        )
    }
}

fn strip(e: &Error) -> String {
    match e {
        Error::Config(m) => m.clone(),
        other => other.to_string(),
    }
}

/// Comma-separated reals.
pub fn parse_list(s: &str) -> Result<Vec<f64>> {
    s.split(',')
        .map(str::trim)
        .filter(|t| !t.is_empty())
        .map(|t| t.parse::<f64>().map_err(|_| Error::config(format!("not a number: '{t}'"))))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_match_figure_parameters() {
        let left = Preset::Figure1Left.scenario();
        assert_eq!(left.n, 256);
        assert_eq!(left.k, 20);
        assert_eq!(left.trials, 50);
        assert_eq!(left.seed, 7);
        assert_eq!(left.shape, ShapeSpec::Disc { center: None, measure: 100.0 });
        assert_eq!(left.model_window, WindowLabel::Gaussian);
        let right = Preset::Figure1Right.scenario();
        assert_eq!(right.model_window, WindowLabel::GaussianT2);
        assert_eq!(right.recon_window, WindowLabel::Gaussian);
        for p in Preset::ALL {
            assert_eq!(p.to_string().parse::<Preset>().unwrap(), p);
            p.scenario().validate().unwrap();
        }
    }

    #[test]
    fn text_round_trip() {
        let mut s = Scenario::default();
        s.apply_text("# header\n n = 32 \nshape = rect:0,0,2,2  # trailing\nK=7\nnoise = real\nr_list = 0.5,1\n\n")
            .unwrap();
        assert_eq!(s.n, 32);
        assert_eq!(s.k, 7);
        assert_eq!(s.noise, NoiseKind::Real);
        assert_eq!(s.r_list, vec![0.5, 1.0]);
        let mut t = Scenario::default();
        t.apply_text(&s.to_config_text()).unwrap();
        assert_eq!(s, t);
    }

    #[test]
    fn validation_rejects_out_of_range() {
        let bad = [
            "n = 8",
            "n = 1024",
            "trials = 0",
            "K = 0",
            "noise = real\nK = 3",
            "sigma = 0",
            "sigma = -1",
            "r_list = 1, -2",
        ];
        for text in bad {
            let mut s = Scenario::default();
            let res = s.apply_text(text).and_then(|_| s.validate());
            assert!(matches!(res, Err(Error::Config(_))), "{text}");
        }
        let mut s = Scenario::default();
        assert!(s.apply_text("bogus = 1").is_err());
        assert!(s.apply_text("n 32").is_err());
        assert!(s.apply_text("noise = complexified").and_then(|_| s.validate()).is_err());
    }
}
