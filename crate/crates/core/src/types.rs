//! Shared domain values. Everything here is an immutable value with
//! structural equality and a lossless JSON form.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Per-item multi-objective prediction scores, one non-negative entry per task.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreVector {
    values: Vec<f64>,
}

impl ScoreVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::Empty("score vector"));
        }
        for (task, &value) in values.iter().enumerate() {
            if !(value >= 0.0) || !value.is_finite() {
                return Err(Error::NegativeScore { task, value });
            }
        }
        Ok(Self { values })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// One discrete fusion weight vector: a bin index per task and the bin values
/// those indices address.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FusionAction {
    pub bin_indices: Vec<usize>,
    pub weights: Vec<f64>,
}

impl FusionAction {
    pub fn weight_sum(&self) -> f64 {
        self.weights.iter().sum()
    }
}

/// A candidate item as the environment sees it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub scores: ScoreVector,
    /// Latent relevance in `[0, 1]`.
    pub relevance: f64,
    /// Latent quality in `[0, 1]`.
    pub quality: f64,
    /// Latent surface appeal in `[0, 1]`: draws clicks, says nothing about
    /// satisfaction.
    pub appeal: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ItemFeedback {
    #[serde(with = "bit")]
    pub click: bool,
    #[serde(with = "bit")]
    pub long_play: bool,
    /// Seconds watched.
    pub duration: f64,
    pub relevance_label: f64,
}

/// A logged query: what was shown, how the user reacted to each item, and the
/// query-level outcomes that follow.
///
/// `candidates` are stored in displayed order and `feedback[i]` belongs to
/// `candidates[i]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryEpisode {
    pub user_id: usize,
    pub query_id: usize,
    pub state_features: Vec<f64>,
    pub candidates: Vec<Candidate>,
    /// Fused score of each shown candidate under the logged action.
    pub fused_scores: Vec<f64>,
    pub feedback: Vec<ItemFeedback>,
    #[serde(with = "bit")]
    pub reformulated: bool,
    /// Seconds until the user's next query.
    pub session_gap: f64,
    #[serde(with = "bit")]
    pub retained: bool,
    /// The user's personal gap quantile, seconds.
    pub user_gap_baseline: f64,
    /// Clicks in the follow-up window, used as confidence evidence.
    pub future_clicks: u32,
    pub future_long_plays: u32,
}

impl QueryEpisode {
    pub fn validate(&self) -> Result<()> {
        if self.candidates.is_empty() {
            return Err(Error::Empty("episode candidates"));
        }
        crate::error::check_dim("episode feedback", self.candidates.len(), self.feedback.len())?;
        crate::error::check_dim("episode fused scores", self.candidates.len(), self.fused_scores.len())?;
        if !(self.session_gap > 0.0) {
            return Err(Error::invalid("session_gap", self.session_gap, "> 0"));
        }
        if !(self.user_gap_baseline > 0.0) {
            return Err(Error::invalid(
                "user_gap_baseline",
                self.user_gap_baseline,
                "> 0",
            ));
        }
        Ok(())
    }
}

/// Writes `{0,1}` indicator fields as integers.
mod bit {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &bool, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_u8(u8::from(*v))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<bool, D::Error> {
        match u8::deserialize(d)? {
            0 => Ok(false),
            1 => Ok(true),
            other => Err(serde::de::Error::custom(format!(
                "expected 0 or 1, got {other}"
            ))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn score_vector_rejects_negative() {
        assert!(matches!(
            ScoreVector::new(vec![1.0, -0.5]),
            Err(Error::NegativeScore { task: 1, .. })
        ));
        assert!(ScoreVector::new(vec![0.0, 2.0]).is_ok());
    }

    #[test]
    fn indicator_fields_serialize_as_integers() {
        let fb = ItemFeedback {
            click: true,
            long_play: false,
            duration: 3.5,
            relevance_label: 0.25,
        };
        let text = serde_json::to_string(&fb).unwrap();
        assert_eq!(
            text,
            r#"{"click":1,"long_play":0,"duration":3.5,"relevance_label":0.25}"#
        );
        assert!(serde_json::from_str::<ItemFeedback>(&text.replace("\"click\":1", "\"click\":2")).is_err());
    }

    fn arb_episode() -> impl Strategy<Value = QueryEpisode> {
        (
            prop::collection::vec(-1e6f64..1e6, 1..6),
            prop::collection::vec(
                (prop::collection::vec(0.0f64..1e4, 3), 0.0f64..1.0, 0.0f64..1.0, 0.0f64..1.0),
                1..5,
            ),
            any::<bool>(),
            1e-3f64..1e7,
            any::<bool>(),
            1e-3f64..1e7,
        )
            .prop_map(|(state, cands, reform, gap, ret, base)| {
                let candidates: Vec<Candidate> = cands
                    .into_iter()
                    .map(|(s, r, q, a)| Candidate {
                        scores: ScoreVector::new(s).unwrap(),
                        relevance: r,
                        quality: q,
                        appeal: a,
                    })
                    .collect();
                let feedback = candidates
                    .iter()
                    .map(|c| ItemFeedback {
                        click: c.quality > 0.5,
                        long_play: c.quality > 0.8,
                        duration: c.quality * 37.1,
                        relevance_label: c.relevance,
                    })
                    .collect();
                QueryEpisode {
                    user_id: 3,
                    query_id: 11,
                    state_features: state,
                    fused_scores: candidates.iter().map(|c| c.quality * 1.7).collect(),
                    candidates,
                    feedback,
                    reformulated: reform,
                    session_gap: gap,
                    retained: ret,
                    user_gap_baseline: base,
                    future_clicks: 2,
                    future_long_plays: 1,
                }
            })
    }

    proptest! {
        #[test]
        fn episode_json_round_trip_is_bit_exact(ep in arb_episode()) {
            let line = serde_json::to_string(&ep).unwrap();
            let back: QueryEpisode = serde_json::from_str(&line).unwrap();
            prop_assert_eq!(&back, &ep);
            let bits = |e: &QueryEpisode| e.state_features.iter().map(|v| v.to_bits()).collect::<Vec<_>>();
            prop_assert_eq!(bits(&back), bits(&ep));
        }

        #[test]
        fn action_json_round_trip(idx in prop::collection::vec(0usize..8, 1..5), scale in 0.0f64..1.0) {
            let a = FusionAction { weights: idx.iter().map(|&i| i as f64 * scale / 7.0).collect(), bin_indices: idx };
            let back: FusionAction = serde_json::from_str(&serde_json::to_string(&a).unwrap()).unwrap();
            prop_assert_eq!(back, a);
        }
    }
}
