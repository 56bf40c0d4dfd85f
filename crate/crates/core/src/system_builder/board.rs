//! Target board description and its key-value text form.

use std::fmt::Write;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Resources {
    pub lut: u64,
    pub ff: u64,
    pub bram: u64,
    pub uram: u64,
    pub dsp: u64,
}

impl Resources {
    pub const CLASSES: [&'static str; 5] = ["lut", "ff", "bram", "uram", "dsp"];

    pub fn get(&self, class: &str) -> u64 {
        match class {
            "lut" => self.lut,
            "ff" => self.ff,
            "bram" => self.bram,
            "uram" => self.uram,
            "dsp" => self.dsp,
            _ => 0,
        }
    }

    fn slot(&mut self, class: &str) -> Option<&mut u64> {
        Some(match class {
            "lut" => &mut self.lut,
            "ff" => &mut self.ff,
            "bram" => &mut self.bram,
            "uram" => &mut self.uram,
            "dsp" => &mut self.dsp,
            _ => return None,
        })
    }

    pub fn scale(&self, n: u64) -> Resources {
        Resources { lut: self.lut * n, ff: self.ff * n, bram: self.bram * n, uram: self.uram * n, dsp: self.dsp * n }
    }
}

impl std::ops::Add for Resources {
    type Output = Resources;
    fn add(self, o: Resources) -> Resources {
        Resources { lut: self.lut + o.lut, ff: self.ff + o.ff, bram: self.bram + o.bram, uram: self.uram + o.uram, dsp: self.dsp + o.dsp }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoardSpec {
    pub name: String,
    pub hbm_channels: usize,
    pub channel_capacity_bytes: u64,
    pub bus_width_bits: u32,
    pub hbm_frequency_mhz: f64,
    /// Host link bandwidth in gigabytes per second.
    pub pcie_bandwidth_gbps: f64,
    /// Kernel clock requested from the tools.
    pub target_frequency_mhz: f64,
    pub slrs: Vec<Resources>,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum BoardError {
    #[error("line {line}: {msg}")]
    Syntax { line: usize, msg: String },
    #[error("missing key '{0}'")]
    Missing(&'static str),
    #[error("'{0}' must be positive")]
    NonPositive(String),
}

const DEFAULT_BOARD: &str = include_str!("../../boards/alveo_u280.board");

impl Default for BoardSpec {
    fn default() -> Self {
        Self::alveo_u280()
    }
}

impl BoardSpec {
    pub fn alveo_u280() -> Self {
        Self::parse(DEFAULT_BOARD).expect("bundled board file is valid")
    }

    pub fn default_text() -> &'static str {
        DEFAULT_BOARD
    }

    pub fn totals(&self) -> Resources {
        self.slrs.iter().fold(Resources::default(), |a, &b| a + b)
    }

    pub fn validate(&self) -> Result<(), BoardError> {
        let scalars = [
            ("hbm_channels", self.hbm_channels as f64),
            ("channel_capacity_bytes", self.channel_capacity_bytes as f64),
            ("bus_width_bits", self.bus_width_bits as f64),
            ("hbm_frequency_mhz", self.hbm_frequency_mhz),
            ("pcie_bandwidth_gbps", self.pcie_bandwidth_gbps),
            ("target_frequency_mhz", self.target_frequency_mhz),
        ];
        for (k, v) in scalars {
            if v.is_nan() || v <= 0.0 {
                return Err(BoardError::NonPositive(k.into()));
            }
        }
        if self.slrs.is_empty() {
            return Err(BoardError::Missing("slr resources"));
        }
        for (i, slr) in self.slrs.iter().enumerate() {
            for c in Resources::CLASSES {
                if slr.get(c) == 0 {
                    return Err(BoardError::NonPositive(format!("{c} SLR{i}")));
                }
            }
        }
        Ok(())
    }

    /// Parse `key = value` scalars and `<class> SLR0=<n> SLR1=<n> ...` rows.
    /// `#` starts a comment.
    pub fn parse(text: &str) -> Result<Self, BoardError> {
        let mut name = None;
        let mut scalars: std::collections::BTreeMap<String, (usize, String)> = Default::default();
        let mut slrs: Vec<Resources> = Vec::new();
        for (k, raw) in text.lines().enumerate() {
            let line_no = k + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let err = |msg: String| BoardError::Syntax { line: line_no, msg };
            if let Some((key, value)) = line.split_once('=').filter(|(key, _)| !key.trim().contains(' ')) {
                let (key, value) = (key.trim(), value.trim());
                if key == "name" {
                    name = Some(value.to_string());
                } else {
                    scalars.insert(key.to_string(), (line_no, value.to_string()));
                }
                continue;
            }
            let mut words = line.split_whitespace();
            let class = words.next().unwrap_or_default();
            for w in words {
                let (slr, v) = w.split_once('=').ok_or_else(|| err(format!("expected SLR<n>=<count>, got '{w}'")))?;
                let idx: usize =
                    slr.strip_prefix("SLR").and_then(|s| s.parse().ok()).ok_or_else(|| err(format!("bad SLR name '{slr}'")))?;
                let v: u64 = v.parse().map_err(|_| err(format!("bad count '{v}'")))?;
                if slrs.len() <= idx {
                    slrs.resize(idx + 1, Resources::default());
                }
                *slrs[idx].slot(class).ok_or_else(|| err(format!("unknown resource '{class}'")))? = v;
            }
        }
        fn take<T: std::str::FromStr>(m: &std::collections::BTreeMap<String, (usize, String)>, key: &'static str) -> Result<T, BoardError> {
            let (line, v) = m.get(key).ok_or(BoardError::Missing(key))?;
            v.parse().map_err(|_| BoardError::Syntax { line: *line, msg: format!("bad value for {key}: '{v}'") })
        }
        let board = BoardSpec {
            name: name.unwrap_or_else(|| "board".into()),
            hbm_channels: take(&scalars, "hbm_channels")?,
            channel_capacity_bytes: take(&scalars, "channel_capacity_bytes")?,
            bus_width_bits: take(&scalars, "bus_width_bits")?,
            hbm_frequency_mhz: take(&scalars, "hbm_frequency_mhz")?,
            pcie_bandwidth_gbps: take(&scalars, "pcie_bandwidth_gbps")?,
            target_frequency_mhz: take(&scalars, "target_frequency_mhz")?,
            slrs,
        };
        board.validate()?;
        Ok(board)
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "name = {}", self.name);
        let _ = writeln!(s, "hbm_channels = {}", self.hbm_channels);
        let _ = writeln!(s, "channel_capacity_bytes = {}", self.channel_capacity_bytes);
        let _ = writeln!(s, "bus_width_bits = {}", self.bus_width_bits);
        let _ = writeln!(s, "hbm_frequency_mhz = {}", self.hbm_frequency_mhz);
        let _ = writeln!(s, "pcie_bandwidth_gbps = {}", self.pcie_bandwidth_gbps);
        let _ = writeln!(s, "target_frequency_mhz = {}", self.target_frequency_mhz);
        for c in Resources::CLASSES {
            let cells: Vec<String> = self.slrs.iter().enumerate().map(|(i, r)| format!("SLR{i}={}", r.get(c))).collect();
            let _ = writeln!(s, "{c} {}", cells.join(" "));
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bundled_board() {
        let b = BoardSpec::alveo_u280();
        assert_eq!(b.hbm_channels, 32);
        assert_eq!(b.channel_capacity_bytes, 268_435_456);
        assert_eq!(b.bus_width_bits, 256);
        assert_eq!(b.slrs.len(), 3);
        assert_eq!(b.slrs[1].bram, 468);
        assert_eq!(b.totals().bram, 507 + 468 + 512);
        assert_eq!(b.totals().dsp, 2733 + 2877 + 2880);
        assert_eq!(BoardSpec::parse(&b.to_text()).unwrap(), b);
    }

    #[test]
    fn rejects_bad_boards() {
        let text = BoardSpec::default_text().replace("hbm_channels = 32", "hbm_channels = 0");
        assert_eq!(BoardSpec::parse(&text), Err(BoardError::NonPositive("hbm_channels".into())));
        let text = BoardSpec::default_text().replace("bram SLR0=507", "bram SLR0=x");
        assert!(matches!(BoardSpec::parse(&text), Err(BoardError::Syntax { .. })));
        let text = BoardSpec::default_text().replace("bus_width_bits = 256", "");
        assert_eq!(BoardSpec::parse(&text), Err(BoardError::Missing("bus_width_bits")));
    }
}
