use std::fmt;

use super::{NodeStats, SearchError};

/// Tree-policy score used during selection. Higher is more attractive.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum UcbVariant {
    /// `(1 / avg_cost) * (1 + c_mult * sqrt(ln n / n_j))` over raw costs.
    InverseAvgMultiplicative { c_mult: f64 },
    /// `avg_reward + c_p * sqrt(2 ln n / n_j)` over normalized rewards.
    AvgInverseAdditive { c_p: f64 },
    /// `avg_reward + avg_reward * sqrt(2 ln n / n_j)`: the exploration weight
    /// tracks the node's own average reward.
    AdaptiveCp,
    /// `win_rate + c_p * sqrt(2 ln n / n_j)` where a simulation wins when it
    /// beats the parent's best cost.
    BinaryReward { c_p: f64 },
}

impl UcbVariant {
    pub fn validate(&self) -> Result<(), SearchError> {
        let ok = |x: f64| x.is_finite() && x > 0.0;
        let valid = match *self {
            UcbVariant::InverseAvgMultiplicative { c_mult } => ok(c_mult),
            UcbVariant::AvgInverseAdditive { c_p } | UcbVariant::BinaryReward { c_p } => ok(c_p),
            UcbVariant::AdaptiveCp => true,
        };
        if valid {
            Ok(())
        } else {
            Err(SearchError::InvalidConfig(format!("{self}: parameters must be > 0")))
        }
    }

    pub fn uses_binary_reward(&self) -> bool {
        matches!(self, UcbVariant::BinaryReward { .. })
    }
}

impl fmt::Display for UcbVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            UcbVariant::InverseAvgMultiplicative { c_mult } => write!(f, "inverse-avg-mult({c_mult})"),
            UcbVariant::AvgInverseAdditive { c_p } => write!(f, "avg-inverse-add({c_p})"),
            UcbVariant::AdaptiveCp => f.write_str("adaptive-cp"),
            UcbVariant::BinaryReward { c_p } => write!(f, "binary-reward({c_p})"),
        }
    }
}

/// Scores a visited child whose parent has `parent_visits` visits.
pub fn ucb_score(child: &NodeStats, parent_visits: u64, variant: UcbVariant) -> Result<f64, SearchError> {
    ucb_score_at(child, parent_visits as f64, variant)
}

/// [`ucb_score`] with a real-valued parent visit count.
pub fn ucb_score_at(child: &NodeStats, parent_visits: f64, variant: UcbVariant) -> Result<f64, SearchError> {
    if child.visits == 0 {
        return Err(SearchError::ZeroVisitChild);
    }
    let nj = child.visits as f64;
    if parent_visits.is_nan() || parent_visits < nj {
        return Err(SearchError::InvalidStatistics(format!(
            "parent visits {parent_visits} below child visits {nj}"
        )));
    }
    Ok(score_with_ln(child, parent_visits.ln(), variant))
}

/// The formulas themselves, given `ln n` and a visited child.
pub(crate) fn score_with_ln(child: &NodeStats, ln_n: f64, variant: UcbVariant) -> f64 {
    let nj = child.visits as f64;
    match variant {
        UcbVariant::InverseAvgMultiplicative { c_mult } => {
            let avg_cost = child.cost_sum / nj;
            (1.0 / avg_cost) * (1.0 + c_mult * (ln_n / nj).sqrt())
        }
        UcbVariant::AvgInverseAdditive { c_p } => child.reward_sum / nj + c_p * (2.0 * ln_n / nj).sqrt(),
        UcbVariant::AdaptiveCp => {
            let avg = child.reward_sum / nj;
            avg + avg * (2.0 * ln_n / nj).sqrt()
        }
        UcbVariant::BinaryReward { c_p } => child.win_sum / nj + c_p * (2.0 * ln_n / nj).sqrt(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn stats(visits: u64, cost_sum: f64) -> NodeStats {
        NodeStats {
            visits,
            cost_sum,
            ..NodeStats::default()
        }
    }

    #[test]
    fn hand_computed_cases() {
        let v = UcbVariant::InverseAvgMultiplicative { c_mult: 1.0 };
        assert_eq!(ucb_score(&stats(1, 2.0), 1, v).unwrap(), 0.5);

        let at_e = ucb_score_at(&stats(1, 1.0), std::f64::consts::E, v).unwrap();
        assert!((at_e - 2.0).abs() < 1e-15);
    }

    #[test]
    fn exploration_coefficient_only_scales_radical() {
        let a = stats(4, 4.0);
        let b = stats(4, 8.0);
        let v1 = UcbVariant::InverseAvgMultiplicative { c_mult: 1.0 };
        let v10 = UcbVariant::InverseAvgMultiplicative { c_mult: 10.0 };
        let radical = (10f64.ln() / 4.0).sqrt();
        assert!((ucb_score(&a, 10, v1).unwrap() - (1.0 + radical)).abs() < 1e-12);
        assert!((ucb_score(&a, 10, v10).unwrap() - (1.0 + 10.0 * radical)).abs() < 1e-12);
        assert!(ucb_score(&a, 10, v1).unwrap() > ucb_score(&b, 10, v1).unwrap());
        assert!(ucb_score(&a, 10, v10).unwrap() > ucb_score(&b, 10, v10).unwrap());
    }

    #[test]
    fn zero_visits_is_an_error() {
        let v = UcbVariant::AdaptiveCp;
        assert!(matches!(
            ucb_score(&stats(0, 0.0), 3, v),
            Err(SearchError::ZeroVisitChild)
        ));
        assert!(matches!(
            ucb_score(&stats(4, 1.0), 3, v),
            Err(SearchError::InvalidStatistics(_))
        ));
    }

    #[test]
    fn rejects_non_positive_parameters() {
        assert!(UcbVariant::BinaryReward { c_p: 0.0 }.validate().is_err());
        assert!(UcbVariant::InverseAvgMultiplicative { c_mult: -1.0 }
            .validate()
            .is_err());
        assert!(UcbVariant::AdaptiveCp.validate().is_ok());
    }
}
