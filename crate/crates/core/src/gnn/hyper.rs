use alloc::format;
use alloc::string::ToString;
use alloc::vec;
use alloc::vec::Vec;
use core::cmp::Ordering;
use core::fmt;
use core::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ConvType {
    Gat,
    Gcn,
}

impl fmt::Display for ConvType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ConvType::Gat => "gat",
            ConvType::Gcn => "gcn",
        })
    }
}

impl FromStr for ConvType {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "gat" => Ok(ConvType::Gat),
            "gcn" => Ok(ConvType::Gcn),
            _ => Err(Error::Hyperparam { field: "conv_type", value: s.to_string() }),
        }
    }
}

/// Missing fields deserialize to the defaults.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Hyperparams {
    pub hidden_channels: usize,
    pub hgt_heads: usize,
    pub gat_heads: usize,
    pub hgt_layers: usize,
    pub first_layers: usize,
    pub last_layers: usize,
    pub conv_type: ConvType,
    pub learning_rate: f64,
    pub weight_decay: f64,
    pub max_grad_norm: f64,
}

impl Default for Hyperparams {
    fn default() -> Self {
        Self {
            hidden_channels: 64,
            hgt_heads: 2,
            gat_heads: 1,
            hgt_layers: 2,
            first_layers: 1,
            last_layers: 1,
            conv_type: ConvType::Gat,
            learning_rate: 1e-3,
            weight_decay: 1e-5,
            max_grad_norm: 1.0,
        }
    }
}

impl Hyperparams {
    /// Checks against the standard search domain.
    pub fn validate(&self) -> Result<()> {
        self.validate_in(&SearchSpace::default())
    }

    pub fn validate_in(&self, space: &SearchSpace) -> Result<()> {
        fn bad(field: &'static str, value: impl ToString) -> Error {
            Error::Hyperparam { field, value: value.to_string() }
        }
        let discrete = [
            ("hidden_channels", self.hidden_channels, &space.hidden_channels),
            ("hgt_heads", self.hgt_heads, &space.hgt_heads),
            ("gat_heads", self.gat_heads, &space.gat_heads),
            ("hgt_layers", self.hgt_layers, &space.hgt_layers),
            ("first_layers", self.first_layers, &space.first_layers),
            ("last_layers", self.last_layers, &space.last_layers),
        ];
        for (field, v, allowed) in discrete {
            if !allowed.contains(&v) {
                return Err(bad(field, v));
            }
        }
        if !space.conv_types.contains(&self.conv_type) {
            return Err(bad("conv_type", self.conv_type));
        }
        if self.hidden_channels % self.hgt_heads != 0 {
            return Err(bad("hgt_heads", format!("{} does not divide {}", self.hgt_heads, self.hidden_channels)));
        }
        let continuous = [
            ("learning_rate", self.learning_rate, space.learning_rate),
            ("weight_decay", self.weight_decay, space.weight_decay),
            ("max_grad_norm", self.max_grad_norm, space.max_grad_norm),
        ];
        for (field, v, (lo, hi)) in continuous {
            if !(v >= lo && v <= hi) {
                return Err(bad(field, v));
            }
        }
        Ok(())
    }

    /// Total order used to break leaderboard ties.
    pub fn lexicographic_cmp(&self, other: &Self) -> Ordering {
        (self.hidden_channels, self.hgt_heads, self.gat_heads, self.hgt_layers, self.first_layers, self.last_layers, self.conv_type)
            .cmp(&(
                other.hidden_channels,
                other.hgt_heads,
                other.gat_heads,
                other.hgt_layers,
                other.first_layers,
                other.last_layers,
                other.conv_type,
            ))
            .then(self.learning_rate.total_cmp(&other.learning_rate))
            .then(self.weight_decay.total_cmp(&other.weight_decay))
            .then(self.max_grad_norm.total_cmp(&other.max_grad_norm))
    }
}

/// Allowed values for each hyperparameter. Continuous ranges are sampled
/// log-uniformly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SearchSpace {
    pub hidden_channels: Vec<usize>,
    pub hgt_heads: Vec<usize>,
    pub gat_heads: Vec<usize>,
    pub hgt_layers: Vec<usize>,
    pub first_layers: Vec<usize>,
    pub last_layers: Vec<usize>,
    pub conv_types: Vec<ConvType>,
    pub learning_rate: (f64, f64),
    pub weight_decay: (f64, f64),
    pub max_grad_norm: (f64, f64),
}

impl Default for SearchSpace {
    fn default() -> Self {
        Self {
            hidden_channels: vec![16, 32, 64, 128, 256, 512],
            hgt_heads: vec![1, 2, 4, 8],
            gat_heads: vec![1, 2, 3],
            hgt_layers: vec![0, 1, 2, 3],
            first_layers: vec![0, 1, 2, 3],
            last_layers: vec![0, 1, 2, 3],
            conv_types: vec![ConvType::Gat, ConvType::Gcn],
            learning_rate: (1e-5, 1e-2),
            weight_decay: (1e-6, 5e-3),
            max_grad_norm: (0.5, 5.0),
        }
    }
}

impl SearchSpace {
    /// Default domain with four first/last convolution layers allowed.
    pub fn extended_depth() -> Self {
        Self { first_layers: vec![0, 1, 2, 3, 4], last_layers: vec![0, 1, 2, 3, 4], ..Self::default() }
    }

    /// Anything structurally buildable. For diagnostics on tiny models.
    pub fn unrestricted() -> Self {
        Self {
            hidden_channels: (1..=512).collect(),
            hgt_heads: (1..=8).collect(),
            gat_heads: (1..=8).collect(),
            hgt_layers: (0..=8).collect(),
            first_layers: (0..=8).collect(),
            last_layers: (0..=8).collect(),
            conv_types: vec![ConvType::Gat, ConvType::Gcn],
            learning_rate: (0.0, f64::INFINITY),
            weight_decay: (0.0, f64::INFINITY),
            max_grad_norm: (f64::MIN_POSITIVE, f64::INFINITY),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let lists = [
            ("hidden_channels", self.hidden_channels.is_empty()),
            ("hgt_heads", self.hgt_heads.is_empty()),
            ("gat_heads", self.gat_heads.is_empty()),
            ("hgt_layers", self.hgt_layers.is_empty()),
            ("first_layers", self.first_layers.is_empty()),
            ("last_layers", self.last_layers.is_empty()),
            ("conv_types", self.conv_types.is_empty()),
        ];
        if let Some((field, _)) = lists.iter().find(|(_, empty)| *empty) {
            return Err(Error::Hyperparam { field, value: "empty".into() });
        }
        for (field, (lo, hi)) in
            [("learning_rate", self.learning_rate), ("weight_decay", self.weight_decay), ("max_grad_norm", self.max_grad_norm)]
        {
            if !(lo > 0.0 && lo <= hi) {
                return Err(Error::Hyperparam { field, value: format!("[{lo}, {hi}]") });
            }
        }
        if [&self.hidden_channels, &self.hgt_heads, &self.gat_heads].iter().any(|v| v.contains(&0)) {
            return Err(Error::Hyperparam { field: "hidden_channels", value: "0".into() });
        }
        Ok(())
    }

    /// Number of discrete combinations.
    pub fn grid_size(&self) -> usize {
        self.hidden_channels.len()
            * self.hgt_heads.len()
            * self.gat_heads.len()
            * self.hgt_layers.len()
            * self.first_layers.len()
            * self.last_layers.len()
            * self.conv_types.len()
    }

    /// Discrete point `index` in mixed-radix order (last field fastest), with
    /// the continuous fields left at their lower bounds.
    pub fn grid_point(&self, mut index: usize) -> Hyperparams {
        let mut take = |len: usize| {
            let i = index % len;
            index /= len;
            i
        };
        let conv_type = self.conv_types[take(self.conv_types.len())];
        let last_layers = self.last_layers[take(self.last_layers.len())];
        let first_layers = self.first_layers[take(self.first_layers.len())];
        let hgt_layers = self.hgt_layers[take(self.hgt_layers.len())];
        let gat_heads = self.gat_heads[take(self.gat_heads.len())];
        let hgt_heads = self.hgt_heads[take(self.hgt_heads.len())];
        let hidden_channels = self.hidden_channels[take(self.hidden_channels.len())];
        Hyperparams {
            hidden_channels,
            hgt_heads,
            gat_heads,
            hgt_layers,
            first_layers,
            last_layers,
            conv_type,
            learning_rate: self.learning_rate.0,
            weight_decay: self.weight_decay.0,
            max_grad_norm: self.max_grad_norm.0,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_is_in_domain() {
        Hyperparams::default().validate().unwrap();
    }

    #[test]
    fn out_of_domain_values_are_rejected() {
        let h = Hyperparams { hidden_channels: 8, ..Default::default() };
        assert!(matches!(h.validate(), Err(Error::Hyperparam { field: "hidden_channels", .. })));
        let h = Hyperparams { last_layers: 4, ..Default::default() };
        assert!(h.validate().is_err());
        h.validate_in(&SearchSpace::extended_depth()).unwrap();
        let h = Hyperparams { learning_rate: 0.1, ..Default::default() };
        assert!(matches!(h.validate(), Err(Error::Hyperparam { field: "learning_rate", .. })));
        let h = Hyperparams { hidden_channels: 16, hgt_heads: 8, ..Default::default() };
        h.validate().unwrap();
    }

    #[test]
    fn grid_points_are_distinct() {
        let s = SearchSpace::default();
        assert_eq!(s.grid_size(), 6 * 4 * 3 * 4 * 4 * 4 * 2);
        let a = s.grid_point(0);
        let b = s.grid_point(1);
        assert_ne!(a.conv_type, b.conv_type);
        assert_eq!(s.grid_point(s.grid_size() - 1).hidden_channels, 512);
    }

    #[test]
    fn conv_type_parses() {
        assert_eq!("GAT".parse::<ConvType>().unwrap(), ConvType::Gat);
        assert!("sage".parse::<ConvType>().is_err());
    }
}
