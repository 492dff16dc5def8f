use std::fmt;
use std::str::FromStr;

use clap::ValueEnum;
use pirl_core::nn::Architecture;
use serde::{Deserialize, Serialize};

/// Reward-prediction methods.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, ValueEnum, Serialize, Deserialize)]
pub enum Method {
    /// A single linear reward for every situation.
    #[value(name = "lirl")]
    #[serde(rename = "lirl")]
    Lirl,
    #[value(name = "1dcnn")]
    #[serde(rename = "1dcnn")]
    Cnn1d,
    #[value(name = "bi1dcnn")]
    #[serde(rename = "bi1dcnn")]
    BiCnn1d,
    #[value(name = "pacnn")]
    #[serde(rename = "pacnn")]
    Pacnn,
    /// Policy attention with the attention loss.
    #[value(name = "pacnn+s")]
    #[serde(rename = "pacnn+s")]
    PacnnS,
    /// Policy attention followed by temporal attention.
    #[value(name = "ptacnn")]
    #[serde(rename = "ptacnn")]
    Ptacnn,
    #[value(name = "ptacnn+s")]
    #[serde(rename = "ptacnn+s")]
    PtacnnS,
}

impl Method {
    pub const ALL: [Method; 7] = [
        Method::Lirl,
        Method::Cnn1d,
        Method::BiCnn1d,
        Method::Pacnn,
        Method::PacnnS,
        Method::Ptacnn,
        Method::PtacnnS,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Method::Lirl => "lirl",
            Method::Cnn1d => "1dcnn",
            Method::BiCnn1d => "bi1dcnn",
            Method::Pacnn => "pacnn",
            Method::PacnnS => "pacnn+s",
            Method::Ptacnn => "ptacnn",
            Method::PtacnnS => "ptacnn+s",
        }
    }

    /// Network architecture, `None` for the linear baseline.
    pub fn architecture(self) -> Option<Architecture> {
        match self {
            Method::Lirl => None,
            Method::Cnn1d => Some(Architecture::Cnn1d),
            Method::BiCnn1d => Some(Architecture::BiCnn1d),
            _ => Some(Architecture::Pacnn),
        }
    }

    /// Whether training adds the attention loss.
    pub fn supervised_attention(self) -> bool {
        matches!(self, Method::PacnnS | Method::PtacnnS)
    }

    /// Whether the temporal network mixes the reward history.
    pub fn temporal(self) -> bool {
        matches!(self, Method::Ptacnn | Method::PtacnnS)
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Method::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| format!("unknown method {s:?}"))
    }
}
