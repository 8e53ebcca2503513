//! Receptive-field bookkeeping: `rf ← rf + (extent − 1)·jump`, `jump ← jump·stride`.

use serde::Serialize;

use super::config::AggNetConfig;

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct RfStage {
    pub name: String,
    /// Receptive field (px, one axis) after this stage.
    pub rf: usize,
    /// Distance in input pixels between neighbouring outputs of this stage.
    pub jump: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ReceptiveField {
    pub stages: Vec<RfStage>,
    /// Effective extents of the three multi-scale branches of each module.
    pub branch_extents: Vec<[usize; 3]>,
    pub total: usize,
}

/// Receptive field of the network described by `cfg`.
///
/// Inside a module the residual path adds a 3×3 stride-2 convolution and the
/// pooled path adds the widest dilated branch, the 3×3 depthwise convolution
/// and the 2×2 pooling window; the module's field is the larger of the two.
pub fn receptive_field(cfg: &AggNetConfig) -> ReceptiveField {
    let mut rf = 3;
    let mut jump = 1;
    let mut stages = vec![RfStage {
        name: "stem".into(),
        rf,
        jump,
    }];
    let extents = cfg.variant.dilations().map(|dr| 2 * dr + 1);
    let widest = *extents.iter().max().expect("three branches");
    let mut branch_extents = Vec::with_capacity(4);
    for i in 0..4 {
        let residual = rf + 2 * jump;
        let pooled = rf + (widest - 1) * jump + 2 * jump + jump;
        rf = residual.max(pooled);
        jump *= 2;
        branch_extents.push(extents);
        stages.push(RfStage {
            name: format!("msenc{}", i + 1),
            rf,
            jump,
        });
    }
    stages.push(RfStage {
        name: "head".into(),
        rf,
        jump,
    });
    ReceptiveField {
        stages,
        branch_extents,
        total: rf,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::config::Variant;

    #[test]
    fn stem_and_branch_extents() {
        let ms = receptive_field(&AggNetConfig::new(Variant::Ms, 9));
        assert_eq!(ms.stages[0].rf, 3);
        assert!(ms.branch_extents.iter().all(|e| *e == [3, 5, 9]));
        let base = receptive_field(&AggNetConfig::new(Variant::Base, 9));
        assert!(base.branch_extents.iter().all(|e| *e == [3, 3, 3]));
    }

    #[test]
    fn totals() {
        // MS: 3 + 11 + 22 + 44 + 88; Base: 3 + 5 + 10 + 20 + 40
        assert_eq!(receptive_field(&AggNetConfig::new(Variant::Ms, 9)).total, 168);
        assert_eq!(receptive_field(&AggNetConfig::new(Variant::Base, 9)).total, 78);
    }
}
