use serde::{Deserialize, Serialize};

use super::NeError;

/// Effort tier requested by an agent's indication metric.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GaTier {
    Low,
    Medium,
    High,
}

impl GaTier {
    pub const ALL: [GaTier; 3] = [GaTier::Low, GaTier::Medium, GaTier::High];

    pub fn as_str(self) -> &'static str {
        match self {
            GaTier::Low => "low",
            GaTier::Medium => "medium",
            GaTier::High => "high",
        }
    }
}

/// Standard deviation of the Gaussian mutation, shared by all tiers.
pub const MUTATION_SIGMA: f64 = 0.05;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GaParams {
    pub generations: u32,
    pub population: u32,
    pub elitism: u32,
    pub mutation_rate: f64,
    pub crossover_rate: f64,
    pub mutation_sigma: f64,
}

impl GaParams {
    pub fn validate(&self) -> Result<(), NeError> {
        let bad = |m: String| Err(NeError::InvalidParams(m));
        if self.population < 2 {
            return bad(format!("population {} < 2", self.population));
        }
        if self.elitism < 1 || self.elitism > self.population {
            return bad(format!(
                "elitism {} outside [1, {}]",
                self.elitism, self.population
            ));
        }
        if self.generations < 1 {
            return bad("generations must be at least 1".into());
        }
        if !(0.0..=1.0).contains(&self.mutation_rate) {
            return bad(format!("mutation_rate {} outside [0, 1]", self.mutation_rate));
        }
        if !(0.0..=1.0).contains(&self.crossover_rate) {
            return bad(format!("crossover_rate {} outside [0, 1]", self.crossover_rate));
        }
        if !(self.mutation_sigma > 0.0 && self.mutation_sigma.is_finite()) {
            return bad(format!("mutation_sigma {} must be positive", self.mutation_sigma));
        }
        Ok(())
    }
}

/// Base parameter set of each tier.
pub fn tier_params(tier: GaTier) -> GaParams {
    let (generations, population, elitism, mutation_rate, crossover_rate) = match tier {
        GaTier::Low => (50, 40, 1, 0.01, 0.3),
        GaTier::Medium => (100, 70, 2, 0.1, 0.5),
        GaTier::High => (300, 125, 5, 0.2, 0.8),
    };
    GaParams {
        generations,
        population,
        elitism,
        mutation_rate,
        crossover_rate,
        mutation_sigma: MUTATION_SIGMA,
    }
}

/// Shrinks population and generation budgets by the resource scaling factor.
pub fn scale_params(base: &GaParams, s: f64) -> Result<GaParams, NeError> {
    if !(0.0..=1.0).contains(&s) {
        return Err(NeError::ScalingOutOfRange(s));
    }
    let scale = |v: u32, floor: u32| ((s * f64::from(v)).ceil() as u32).max(floor);
    let population = scale(base.population, 2);
    Ok(GaParams {
        population,
        generations: scale(base.generations, 1),
        elitism: base.elitism.min(population),
        ..*base
    })
}

/// Optional per-field replacements applied on top of a tier's base set.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GaOverrides {
    pub generations: Option<u32>,
    pub population: Option<u32>,
    pub elitism: Option<u32>,
    pub mutation_rate: Option<f64>,
    pub crossover_rate: Option<f64>,
    pub mutation_sigma: Option<f64>,
}

impl GaOverrides {
    pub fn apply(&self, base: &GaParams) -> GaParams {
        GaParams {
            generations: self.generations.unwrap_or(base.generations),
            population: self.population.unwrap_or(base.population),
            elitism: self.elitism.unwrap_or(base.elitism),
            mutation_rate: self.mutation_rate.unwrap_or(base.mutation_rate),
            crossover_rate: self.crossover_rate.unwrap_or(base.crossover_rate),
            mutation_sigma: self.mutation_sigma.unwrap_or(base.mutation_sigma),
        }
    }

    pub fn is_empty(&self) -> bool {
        *self == GaOverrides::default()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tier_tables() {
        let low = tier_params(GaTier::Low);
        assert_eq!(
            (low.generations, low.population, low.elitism, low.mutation_rate, low.crossover_rate),
            (50, 40, 1, 0.01, 0.3)
        );
        let med = tier_params(GaTier::Medium);
        assert_eq!(
            (med.generations, med.population, med.elitism, med.mutation_rate, med.crossover_rate),
            (100, 70, 2, 0.1, 0.5)
        );
        let high = tier_params(GaTier::High);
        assert_eq!(
            (high.generations, high.population, high.elitism, high.mutation_rate, high.crossover_rate),
            (300, 125, 5, 0.2, 0.8)
        );
        for t in GaTier::ALL {
            tier_params(t).validate().unwrap();
        }
    }

    #[test]
    fn scaling_examples() {
        for t in GaTier::ALL {
            assert_eq!(scale_params(&tier_params(t), 1.0).unwrap(), tier_params(t));
        }
        let half = scale_params(&tier_params(GaTier::Low), 0.5).unwrap();
        assert_eq!((half.population, half.generations), (20, 25));

        let zero = scale_params(&tier_params(GaTier::High), 0.0).unwrap();
        assert_eq!((zero.population, zero.generations, zero.elitism), (2, 1, 2));
        assert_eq!(zero.mutation_rate, 0.2);
        assert_eq!(zero.crossover_rate, 0.8);
        zero.validate().unwrap();

        assert!(scale_params(&tier_params(GaTier::Low), 1.5).is_err());
        assert!(scale_params(&tier_params(GaTier::Low), -0.1).is_err());
    }

    #[test]
    fn overrides_replace_fields() {
        let o = GaOverrides {
            generations: Some(500),
            ..Default::default()
        };
        let p = o.apply(&tier_params(GaTier::High));
        assert_eq!(p.generations, 500);
        assert_eq!(p.population, 125);
    }

    #[test]
    fn invalid_params_rejected() {
        let mut p = tier_params(GaTier::Low);
        p.elitism = 41;
        assert!(p.validate().is_err());
        p.elitism = 0;
        assert!(p.validate().is_err());
    }
}
