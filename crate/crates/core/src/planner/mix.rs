use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DOMAIN_KEY: &str = "domain";

/// Relative deviation (on the general side) tolerated before resampling.
const RATIO_TOLERANCE: f64 = 0.10;

/// A `domain:general` ratio such as `1:3`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Ratio {
    pub domain: u64,
    pub general: u64,
}

impl Ratio {
    pub fn new(domain: u64, general: u64) -> Self {
        Ratio { domain, general }
    }

    /// General tokens per domain token.
    pub fn general_per_domain(self) -> f64 {
        self.general as f64 / self.domain as f64
    }
}

impl fmt::Display for Ratio {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.domain, self.general)
    }
}

impl FromStr for Ratio {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (a, b) = s
            .split_once(':')
            .ok_or_else(|| Error::config(format!("ratio `{s}` is not of the form A:B")))?;
        let parse = |x: &str| {
            x.trim()
                .parse::<u64>()
                .map_err(|_| Error::config(format!("ratio `{s}` has a non-integer side")))
        };
        let r = Ratio::new(parse(a)?, parse(b)?);
        if r.domain == 0 || r.general == 0 {
            return Err(Error::config(format!(
                "ratio `{s}` must have positive sides"
            )));
        }
        Ok(r)
    }
}

fn gcd(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

/// Exact reduced integer ratio of two token totals.
pub fn reduce_ratio(domain: u64, general: u64) -> Ratio {
    let g = gcd(domain, general).max(1);
    Ratio::new(domain / g, general / g)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixPlan {
    pub per_source_tokens: BTreeMap<String, u64>,
    pub domain_total: u64,
    pub general_total: u64,
    pub total: u64,
    pub ratio: Ratio,
    pub target: Ratio,
    /// Relative deviation of the general-per-domain ratio from the target.
    pub deviation: f64,
    /// Per-source expected token multipliers; all 1.0 when the actual ratio
    /// is within tolerance of the target.
    pub sampling_weights: BTreeMap<String, f64>,
    /// Share of each source in the (re)weighted mix; sums to 1.
    pub mixture: BTreeMap<String, f64>,
    pub resampled: bool,
}

/// Plans the domain:general mix. General sources are `(name, tokens)`.
pub fn plan_mix(domain_tokens: u64, general: &[(String, u64)], target: Ratio) -> Result<MixPlan> {
    if domain_tokens == 0 {
        return Err(Error::data(
            "domain token count is zero; the mix ratio is undefined",
        ));
    }
    if general.is_empty() {
        return Err(Error::data("at least one general source is required"));
    }
    if target.domain == 0 || target.general == 0 {
        return Err(Error::config("target ratio sides must be positive"));
    }
    let mut per_source_tokens = BTreeMap::new();
    per_source_tokens.insert(DOMAIN_KEY.to_owned(), domain_tokens);
    for (name, tokens) in general {
        if name == DOMAIN_KEY {
            return Err(Error::config(format!(
                "general source may not be named `{DOMAIN_KEY}`"
            )));
        }
        if per_source_tokens.insert(name.clone(), *tokens).is_some() {
            return Err(Error::config(format!("duplicate general source `{name}`")));
        }
    }
    let general_total: u64 = general.iter().map(|(_, t)| *t).sum();
    if general_total == 0 {
        return Err(Error::data("general token count is zero"));
    }
    let ratio = reduce_ratio(domain_tokens, general_total);
    let actual = general_total as f64 / domain_tokens as f64;
    let wanted = target.general_per_domain();
    let deviation = (actual - wanted).abs() / wanted;
    let resampled = deviation > RATIO_TOLERANCE;
    let general_weight = if resampled { wanted / actual } else { 1.0 };

    let mut sampling_weights = BTreeMap::new();
    sampling_weights.insert(DOMAIN_KEY.to_owned(), 1.0);
    for (name, _) in general {
        sampling_weights.insert(name.clone(), general_weight);
    }
    let weighted_total = domain_tokens as f64 + general_total as f64 * general_weight;
    let mixture = per_source_tokens
        .iter()
        .map(|(k, &t)| (k.clone(), t as f64 * sampling_weights[k] / weighted_total))
        .collect();

    Ok(MixPlan {
        per_source_tokens,
        domain_total: domain_tokens,
        general_total,
        total: domain_tokens + general_total,
        ratio,
        target,
        deviation,
        sampling_weights,
        mixture,
        resampled,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn general(xs: &[u64]) -> Vec<(String, u64)> {
        xs.iter()
            .enumerate()
            .map(|(i, &t)| (format!("general_{}", i + 1), t))
            .collect()
    }

    #[test]
    fn reported_mix_is_one_to_three() {
        let plan = plan_mix(
            25_000_000_000,
            &general(&[55_000_000_000, 20_000_000_000]),
            Ratio::new(1, 3),
        )
        .unwrap();
        assert_eq!(plan.ratio, Ratio::new(1, 3));
        assert_eq!(plan.total, 100_000_000_000);
        assert!(!plan.resampled);
        assert!(plan.sampling_weights.values().all(|&w| w == 1.0));
        let sum: f64 = plan.mixture.values().sum();
        assert!((sum - 1.0).abs() < 1e-9);
        assert_eq!(
            plan.domain_total + plan.general_total,
            plan.per_source_tokens.values().sum::<u64>()
        );
    }

    #[test]
    fn one_to_five() {
        let plan = plan_mix(
            10_000_000_000,
            &general(&[50_000_000_000]),
            Ratio::new(1, 5),
        )
        .unwrap();
        assert_eq!(plan.ratio, Ratio::new(1, 5));
        assert!(plan.sampling_weights.values().all(|&w| w == 1.0));
    }

    #[test]
    fn zero_domain_rejected() {
        assert!(plan_mix(0, &general(&[1]), Ratio::new(1, 3)).is_err());
    }

    #[test]
    fn resampling_hits_target() {
        // 1:5 available, 1:3 wanted
        let plan = plan_mix(10, &general(&[30, 20]), Ratio::new(1, 3)).unwrap();
        assert!(plan.resampled);
        let expected_general: f64 = plan
            .per_source_tokens
            .iter()
            .filter(|(k, _)| k.as_str() != DOMAIN_KEY)
            .map(|(k, &t)| t as f64 * plan.sampling_weights[k])
            .sum();
        let achieved =
            expected_general / (plan.domain_total as f64 * plan.sampling_weights[DOMAIN_KEY]);
        assert!((achieved - 3.0).abs() / 3.0 < 1e-3);
        let sum: f64 = plan.mixture.values().sum();
        assert!((sum - 1.0).abs() < 1e-9);
        assert!((plan.mixture[DOMAIN_KEY] - 0.25).abs() < 1e-12);
    }

    #[test]
    fn within_tolerance_keeps_uniform_weights() {
        // 1:3.2 vs target 1:3 is a 6.7% deviation
        let plan = plan_mix(10, &general(&[32]), Ratio::new(1, 3)).unwrap();
        assert!(!plan.resampled);
        assert_eq!(plan.ratio, Ratio::new(5, 16));
    }

    #[test]
    fn ratio_parsing() {
        assert_eq!("1:3".parse::<Ratio>().unwrap(), Ratio::new(1, 3));
        assert!("13".parse::<Ratio>().is_err());
        assert!("0:3".parse::<Ratio>().is_err());
    }
}
