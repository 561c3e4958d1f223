//! BPSK over AWGN, all-zero codeword.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChannelSpec {
    pub ebn0_db: f64,
    pub rate: f64,
}

impl ChannelSpec {
    pub fn new(ebn0_db: f64, rate: f64) -> Result<Self> {
        let ch = ChannelSpec { ebn0_db, rate };
        ch.validate()?;
        Ok(ch)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.rate > 0.0 && self.rate <= 1.0) {
            return Err(Error::InvalidChannel(format!("rate {} outside (0, 1]", self.rate)));
        }
        let s = self.noise_variance();
        if !(s.is_finite() && s > 0.0) {
            return Err(Error::InvalidChannel(format!("noise variance {s} at {} dB", self.ebn0_db)));
        }
        Ok(())
    }

    /// Noise variance per real dimension, `1 / (2 R Eb/N0)`.
    pub fn noise_variance(&self) -> f64 {
        1.0 / (2.0 * self.rate * 10f64.powf(self.ebn0_db / 10.0))
    }

    /// Mean of the channel LLR, `2 / sigma^2`; its variance is twice this.
    pub fn llr_mean(&self) -> f64 {
        2.0 / self.noise_variance()
    }

    pub fn llr_variance(&self) -> f64 {
        4.0 / self.noise_variance()
    }

    pub fn llr_scale(&self) -> f64 {
        self.llr_mean()
    }
}

/// Parses `start:step:stop` (inclusive) or a single value.
pub fn parse_grid(s: &str) -> Result<Vec<f64>> {
    let parts: Vec<&str> = s.split(':').collect();
    let num = |t: &str| {
        t.trim()
            .parse::<f64>()
            .map_err(|_| Error::InvalidChannel(format!("bad number '{t}' in '{s}'")))
    };
    match parts.as_slice() {
        [v] => Ok(vec![num(v)?]),
        [a, st, b] => {
            let (a, st, b) = (num(a)?, num(st)?, num(b)?);
            if st <= 0.0 || b < a {
                return Err(Error::InvalidChannel(format!("bad grid '{s}'")));
            }
            let n = ((b - a) / st + 1e-9).floor() as usize;
            Ok((0..=n).map(|k| a + k as f64 * st).collect())
        }
        _ => Err(Error::InvalidChannel(format!("expected start:step:stop, got '{s}'"))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn variance_formula() {
        let ch = ChannelSpec::new(0.0, 0.5).unwrap();
        assert!((ch.noise_variance() - 1.0).abs() < 1e-15);
        assert!((ch.llr_mean() - 2.0).abs() < 1e-15);
        assert!(ChannelSpec::new(3.0, 0.0).is_err());
    }

    #[test]
    fn grids() {
        assert_eq!(parse_grid("5:0.5:7").unwrap(), vec![5.0, 5.5, 6.0, 6.5, 7.0]);
        assert_eq!(parse_grid("6").unwrap(), vec![6.0]);
        assert!(parse_grid("7:1:5").is_err());
        assert!(parse_grid("a:b").is_err());
    }
}
