use std::fmt;

use serde::{Deserialize, Serialize};

use crate::weight::Weight;

/// How the additive slack of a pair is scaled.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BetaMode {
    /// `beta * W(u, v)`, the largest edge on the fixed path.
    Relative,
    /// `beta * W_max`, the largest edge of the graph.
    #[serde(alias = "wmax")]
    Absolute,
}

impl fmt::Display for BetaMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BetaMode::Relative => f.write_str("relative"),
            BetaMode::Absolute => f.write_str("wmax"),
        }
    }
}

/// The additive spanner condition `d_H(u,v) <= d_G(u,v) + slack(u,v)`.
#[derive(Clone, Debug, PartialEq)]
pub struct AdditiveCondition<W> {
    pub mode: BetaMode,
    pub beta: W,
}

impl<W: Weight> AdditiveCondition<W> {
    pub fn relative(beta: W) -> Self {
        AdditiveCondition {
            mode: BetaMode::Relative,
            beta,
        }
    }

    pub fn absolute(beta: W) -> Self {
        AdditiveCondition {
            mode: BetaMode::Absolute,
            beta,
        }
    }

    /// Slack for a pair whose fixed path has largest edge `pair_max` in a
    /// graph whose largest edge is `graph_max`.
    pub fn slack(&self, pair_max: &W, graph_max: &W) -> W {
        match self.mode {
            BetaMode::Relative => self.beta.clone() * pair_max.clone(),
            BetaMode::Absolute => self.beta.clone() * graph_max.clone(),
        }
    }

    /// Whether `d_h <= d_g + slack` holds (within the mode's tolerance).
    pub fn holds(&self, d_h: Option<&W>, d_g: &W, slack: &W) -> bool {
        match d_h {
            None => false,
            Some(d) => d.le_tol(&(d_g.clone() + slack.clone())),
        }
    }
}

impl<W: Weight> fmt::Display for AdditiveCondition<W> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.mode {
            BetaMode::Relative => write!(f, "+{}W(u,v)", self.beta),
            BetaMode::Absolute => write!(f, "+{}W_max", self.beta),
        }
    }
}
