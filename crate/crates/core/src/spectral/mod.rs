//! Classical emulation of windowed spectral estimation for normal Koopman
//! generators: window statistics, signed decoding, suppression of decaying
//! modes, the exact outcome distribution and the history-state linear system.

mod emulate;
mod history;
mod modes;
mod window;

use std::io::Write;

use serde::{Deserialize, Serialize};

pub use emulate::{
    ball_mass, emulate_spectral_qka, ideal_mode_distribution, sample_outcomes, total_variation, Emulation,
};
pub use history::{
    history_system, taylor_propagator, uniform_family, FamilyMember, HistorySolution, HistorySystem, UniformFamily,
    PROPAGATOR_GUARD,
};
pub use modes::{suppression_time, Mode, NormalKoopman, OSCILLATORY_TOL};
pub use window::{
    bessel_i0, calibrate, decode, kaiser_window, lookup_calibration, qpe_amplitudes, qpe_distribution, sup_tail_mass,
    tail_mass, tail_mass_with_margin, Calibration, WindowSpec, CALIBRATION_TABLE, NYQUIST_MARGIN,
};

use crate::error::{Error, Result};
use crate::linalg::C64;
use crate::polyflow::fmt_f64;

/// JSON description of an emulation run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpectralConfig {
    /// Rows `[mu, omega, a_re, a_im]`.
    pub modes: Vec<[f64; 4]>,
    #[serde(rename = "J")]
    pub len: usize,
    pub sigma: f64,
    pub dt: f64,
    #[serde(rename = "T1")]
    pub t1: f64,
}

impl SpectralConfig {
    pub fn from_json(s: &str) -> Result<Self> {
        serde_json::from_str(s).map_err(|e| Error::InvalidParameter(e.to_string()))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn koopman(&self) -> Result<NormalKoopman> {
        NormalKoopman::new(self.modes.iter().map(|r| Mode::new(r[0], r[1], C64::new(r[2], r[3]))).collect())
    }

    pub fn window(&self) -> Result<WindowSpec> {
        kaiser_window(self.len, self.sigma)
    }
}

/// Writes `ell,theta_hat,omega_hat,p_ideal,p_emulated,count`.
pub fn write_outcomes<W: Write>(mut w: W, dt: f64, p_ideal: &[f64], p_emulated: &[f64], counts: &[u64]) -> Result<()> {
    let len = p_ideal.len();
    if p_emulated.len() != len || counts.len() != len {
        return Err(Error::DimensionMismatch { expected: len, got: p_emulated.len().min(counts.len()) });
    }
    let io = |e: std::io::Error| Error::InvalidParameter(format!("write failed: {e}"));
    writeln!(w, "ell,theta_hat,omega_hat,p_ideal,p_emulated,count").map_err(io)?;
    for l in 0..len {
        let (theta, omega) = decode(l, len, dt)?;
        writeln!(
            w,
            "{l},{},{},{},{},{}",
            fmt_f64(theta),
            fmt_f64(omega),
            fmt_f64(p_ideal[l]),
            fmt_f64(p_emulated[l]),
            counts[l]
        )
        .map_err(io)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_round_trip() {
        let s = r#"{"modes": [[0, 0.5, 0.6, 0], [1, 0, 0, 0.8]], "J": 21, "sigma": 2, "dt": 1, "T1": 3}"#;
        let cfg = SpectralConfig::from_json(s).unwrap();
        assert_eq!(cfg.len, 21);
        assert_eq!(SpectralConfig::from_json(&cfg.to_json()).unwrap(), cfg);
        assert!((cfg.koopman().unwrap().oscillatory_weight() - 0.36).abs() < 1e-15);
        let err = SpectralConfig::from_json(r#"{"modes": [], "J": 3, "sigma": 1, "dt": 1, "T1": 0, "x": 1}"#);
        assert!(err.unwrap_err().to_string().contains("`x`"));
    }

    #[test]
    fn outcome_csv() {
        let mut buf = Vec::new();
        write_outcomes(&mut buf, 2.0, &[0.5, 0.25, 0.25], &[0.5, 0.3, 0.2], &[1, 2, 3]).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "ell,theta_hat,omega_hat,p_ideal,p_emulated,count");
        assert!(lines[3].starts_with("2,-2.0943951023931957e0,"));
        assert!(lines[3].ends_with(",3"));
    }
}
