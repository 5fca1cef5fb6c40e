//! Architecture bookkeeping derived from a [`ModelConfig`] by pure
//! arithmetic, independent of network construction. The audit tests
//! compare a built network against this walk.

use super::ModelConfig;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ResidualKind {
    None,
    Identity,
    Projection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModuleDescriptor {
    pub name: String,
    /// Convolutions counted toward the feature extractor (projection
    /// shortcuts are not feature layers).
    pub feature_conv_layers: usize,
    pub residual: ResidualKind,
    pub output_channels: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArchitectureDescriptor {
    pub modules: Vec<ModuleDescriptor>,
    pub head_outputs: usize,
    pub input_height: usize,
    pub input_width: usize,
    pub final_feature_channels: usize,
}

/// Channel plan shared by the descriptor and the network builder.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) struct ChannelPlan {
    pub stem: [usize; 2],
    pub entry: [usize; 3],
    pub middle: usize,
    pub exit_out: usize,
    pub tail: [usize; 2],
}

pub(crate) fn scaled(base: usize, width_multiplier: f64) -> usize {
    ((base as f64 * width_multiplier).round() as usize).max(1)
}

impl ChannelPlan {
    pub fn of(config: &ModelConfig) -> ChannelPlan {
        let s = |base| scaled(base, config.width_multiplier);
        ChannelPlan {
            stem: [s(32), s(64)],
            entry: [s(128), s(256), s(728)],
            middle: s(728),
            exit_out: s(1024),
            tail: [s(1536), s(2048)],
        }
    }
}

impl ArchitectureDescriptor {
    pub fn from_config(config: &ModelConfig) -> Self {
        let plan = ChannelPlan::of(config);
        let mut modules = Vec::new();
        modules.push(ModuleDescriptor {
            name: "stem".into(),
            feature_conv_layers: 2,
            residual: ResidualKind::None,
            output_channels: plan.stem[1],
        });
        for (i, &out) in plan.entry.iter().enumerate() {
            modules.push(ModuleDescriptor {
                name: format!("entry{}", i + 1),
                feature_conv_layers: 2,
                residual: ResidualKind::Projection,
                output_channels: out,
            });
        }
        for i in 0..config.middle_module_count {
            modules.push(ModuleDescriptor {
                name: format!("middle{}", i + 1),
                feature_conv_layers: 3,
                residual: ResidualKind::Identity,
                output_channels: plan.middle,
            });
        }
        modules.push(ModuleDescriptor {
            name: "exit".into(),
            feature_conv_layers: 2,
            residual: ResidualKind::Projection,
            output_channels: plan.exit_out,
        });
        modules.push(ModuleDescriptor {
            name: "tail".into(),
            feature_conv_layers: 2,
            residual: ResidualKind::None,
            output_channels: plan.tail[1],
        });
        ArchitectureDescriptor {
            modules,
            head_outputs: config.num_classes,
            input_height: config.input_height,
            input_width: config.input_width,
            final_feature_channels: plan.tail[1],
        }
    }

    pub fn module_count(&self) -> usize {
        self.modules.len()
    }

    pub fn feature_conv_layer_count(&self) -> usize {
        self.modules.iter().map(|m| m.feature_conv_layers).sum()
    }

    /// Named shapes of every trainable parameter, walked from the plan.
    pub fn parameter_shapes(config: &ModelConfig) -> Vec<(String, Vec<usize>)> {
        let plan = ChannelPlan::of(config);
        let mut shapes: Vec<(String, Vec<usize>)> = Vec::new();
        let bn = |shapes: &mut Vec<(String, Vec<usize>)>, name: String, c: usize| {
            shapes.push((format!("{name}.gamma"), vec![c]));
            shapes.push((format!("{name}.beta"), vec![c]));
        };
        let sep = |shapes: &mut Vec<(String, Vec<usize>)>, name: String, cin: usize, cout: usize| {
            shapes.push((format!("{name}.depthwise.weight"), vec![cin, 3, 3]));
            shapes.push((format!("{name}.pointwise.weight"), vec![cout, cin, 1, 1]));
        };

        shapes.push(("stem.conv1.weight".into(), vec![plan.stem[0], 3, 3, 3]));
        bn(&mut shapes, "stem.bn1".into(), plan.stem[0]);
        shapes.push((
            "stem.conv2.weight".into(),
            vec![plan.stem[1], plan.stem[0], 3, 3],
        ));
        bn(&mut shapes, "stem.bn2".into(), plan.stem[1]);

        let mut cin = plan.stem[1];
        for (i, &cout) in plan.entry.iter().enumerate() {
            let name = format!("entry{}", i + 1);
            sep(&mut shapes, format!("{name}.sep1"), cin, cout);
            bn(&mut shapes, format!("{name}.bn1"), cout);
            sep(&mut shapes, format!("{name}.sep2"), cout, cout);
            bn(&mut shapes, format!("{name}.bn2"), cout);
            shapes.push((format!("{name}.proj.weight"), vec![cout, cin, 1, 1]));
            bn(&mut shapes, format!("{name}.proj_bn"), cout);
            cin = cout;
        }

        for i in 0..config.middle_module_count {
            let name = format!("middle{}", i + 1);
            for j in 1..=3 {
                sep(&mut shapes, format!("{name}.sep{j}"), plan.middle, plan.middle);
                bn(&mut shapes, format!("{name}.bn{j}"), plan.middle);
            }
        }

        sep(&mut shapes, "exit.sep1".into(), plan.middle, plan.middle);
        bn(&mut shapes, "exit.bn1".into(), plan.middle);
        sep(&mut shapes, "exit.sep2".into(), plan.middle, plan.exit_out);
        bn(&mut shapes, "exit.bn2".into(), plan.exit_out);
        shapes.push(("exit.proj.weight".into(), vec![plan.exit_out, plan.middle, 1, 1]));
        bn(&mut shapes, "exit.proj_bn".into(), plan.exit_out);

        sep(&mut shapes, "tail.sep1".into(), plan.exit_out, plan.tail[0]);
        bn(&mut shapes, "tail.bn1".into(), plan.tail[0]);
        sep(&mut shapes, "tail.sep2".into(), plan.tail[0], plan.tail[1]);
        bn(&mut shapes, "tail.bn2".into(), plan.tail[1]);

        shapes.push(("head.weight".into(), vec![plan.tail[1], config.num_classes]));
        shapes.push(("head.bias".into(), vec![config.num_classes]));
        shapes
    }

    /// Trainable parameter count from the shape walk.
    pub fn parameter_count(config: &ModelConfig) -> usize {
        Self::parameter_shapes(config)
            .iter()
            .map(|(_, shape)| shape.iter().product::<usize>())
            .sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_config_reports_paper_topology() {
        let desc = ArchitectureDescriptor::from_config(&ModelConfig::default());
        assert_eq!(desc.module_count(), 14);
        assert_eq!(desc.feature_conv_layer_count(), 36);
        assert_eq!(desc.head_outputs, 2);
        assert_eq!(desc.modules.first().unwrap().residual, ResidualKind::None);
        assert_eq!(desc.modules.last().unwrap().residual, ResidualKind::None);
        for module in &desc.modules[1..13] {
            assert_ne!(module.residual, ResidualKind::None, "{}", module.name);
        }
        assert_eq!(desc.final_feature_channels, 2048);
    }

    #[test]
    fn middle_count_scales_modules_and_convs() {
        let mut cfg = ModelConfig::default();
        cfg.middle_module_count = 0;
        let desc = ArchitectureDescriptor::from_config(&cfg);
        assert_eq!(desc.module_count(), 6);
        assert_eq!(desc.feature_conv_layer_count(), 12);
    }

    #[test]
    fn width_multiplier_floors_at_one_channel() {
        let mut cfg = ModelConfig::tiny(0);
        cfg.width_multiplier = 1.0 / 1024.0;
        let desc = ArchitectureDescriptor::from_config(&cfg);
        assert!(desc.modules.iter().all(|m| m.output_channels >= 1));
    }
}
