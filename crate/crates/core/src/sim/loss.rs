use serde::{Deserialize, Serialize};

use crate::cert::NodeId;
use crate::wire::MessageKind;

/// Per-link delivery probability.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "snake_case")]
pub enum LossModel {
    /// Every packet in range is delivered with probability `p`.
    Constant { p: f64 },
    /// `p_near` up to `good_fraction * radius`, then linear down to `p_far`
    /// at the radius.
    Distance {
        p_near: f64,
        p_far: f64,
        good_fraction: f64,
    },
}

impl Default for LossModel {
    fn default() -> Self {
        LossModel::Distance {
            p_near: 0.95,
            p_far: 0.5,
            good_fraction: 0.5,
        }
    }
}

impl LossModel {
    pub fn lossless() -> LossModel {
        LossModel::Constant { p: 1.0 }
    }

    pub fn delivery_probability(&self, dist: f64, radius: f64) -> f64 {
        let p = match *self {
            LossModel::Constant { p } => p,
            LossModel::Distance {
                p_near,
                p_far,
                good_fraction,
            } => {
                let good = good_fraction * radius;
                if dist <= good {
                    p_near
                } else if dist >= radius {
                    p_far
                } else {
                    p_near + (p_far - p_near) * (dist - good) / (radius - good)
                }
            }
        };
        p.clamp(0.0, 1.0)
    }

    /// Parses `near=0.95,far=0.5[,good=0.5]` or `p=0.8`.
    pub fn parse(spec: &str) -> Result<LossModel, String> {
        let mut near = None;
        let mut far = None;
        let mut good = 0.5;
        let mut constant = None;
        for part in spec.split(',').filter(|s| !s.is_empty()) {
            let (key, value) = part
                .split_once('=')
                .ok_or_else(|| format!("expected key=value, got {part:?}"))?;
            let value: f64 = value.parse().map_err(|_| format!("bad number in {part:?}"))?;
            if !(0.0..=1.0).contains(&value) {
                return Err(format!("{key} must be within [0, 1]"));
            }
            match key {
                "near" => near = Some(value),
                "far" => far = Some(value),
                "good" => good = value,
                "p" => constant = Some(value),
                other => return Err(format!("unknown loss parameter {other:?}")),
            }
        }
        match (constant, near, far) {
            (Some(p), None, None) => Ok(LossModel::Constant { p }),
            (None, Some(p_near), Some(p_far)) => Ok(LossModel::Distance {
                p_near,
                p_far,
                good_fraction: good,
            }),
            _ => Err("give either p=.. or both near=.. and far=..".into()),
        }
    }
}

/// Forces loss of the first `count` transmissions of `kind` from `src` to
/// `dst`, on top of the random model.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct LinkRule {
    pub src: NodeId,
    pub dst: NodeId,
    pub kind: MessageKind,
    pub count: u32,
}

/// Uniform draw in `[0, 1)` from a hashed coordinate. Each (trial, link,
/// kind, transmission index) gets its own independent value, so adding
/// retransmissions never changes the fate of earlier packets.
pub(crate) fn link_draw(seed: u64, src: NodeId, dst: NodeId, kind: MessageKind, index: u32) -> f64 {
    let kind = match kind {
        MessageKind::New1 => 1u64,
        MessageKind::New2 => 2u64,
    };
    let mut h = splitmix64(seed ^ 0x7469_6e79_616b_6500);
    h = splitmix64(h ^ (u64::from(src.0) << 16 | u64::from(dst.0)));
    h = splitmix64(h ^ (kind << 32 | u64::from(index)));
    (h >> 11) as f64 / (1u64 << 53) as f64
}

pub(crate) fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn distance_profile() {
        let m = LossModel::default();
        assert_eq!(m.delivery_probability(10.0, 50.0), 0.95);
        assert_eq!(m.delivery_probability(25.0, 50.0), 0.95);
        assert!((m.delivery_probability(37.5, 50.0) - 0.725).abs() < 1e-12);
        assert_eq!(m.delivery_probability(50.0, 50.0), 0.5);
    }

    #[test]
    fn parse_forms() {
        assert_eq!(LossModel::parse("near=0.95,far=0.5").unwrap(), LossModel::default());
        assert_eq!(LossModel::parse("p=1").unwrap(), LossModel::lossless());
        assert!(LossModel::parse("near=0.9").is_err());
        assert!(LossModel::parse("p=2").is_err());
    }

    #[test]
    fn draws_are_uniformish_and_deterministic() {
        let a = NodeId(1);
        let b = NodeId(2);
        let n = 20_000;
        let mean: f64 = (0..n).map(|i| link_draw(7, a, b, MessageKind::New1, i)).sum::<f64>() / n as f64;
        assert!((mean - 0.5).abs() < 0.01, "mean {mean}");
        assert_eq!(
            link_draw(7, a, b, MessageKind::New2, 3),
            link_draw(7, a, b, MessageKind::New2, 3)
        );
        assert_ne!(
            link_draw(7, a, b, MessageKind::New2, 3),
            link_draw(7, b, a, MessageKind::New2, 3)
        );
    }
}
