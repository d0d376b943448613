//! The four reference architectures plus a toy network, embedded as config
//! text.
//!
//! Exact filter counts of the published models are not recoverable, so these
//! are reconstructions that keep the published constraints: nine
//! convolutions, four to six max-pools, only 3×3 and 1×1 kernels, filter
//! counts that grow with depth, and the lightweight detector costing at most
//! a tenth of the Tiny-YOLO-VOC multiply-accumulates.

use crate::model::config::{parse_config, NetworkConfig};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ReferenceModel {
    Dronet,
    TinyYoloVoc,
    TinyYoloNet,
    SmallYoloV3,
}

impl ReferenceModel {
    pub const ALL: [ReferenceModel; 4] = [
        ReferenceModel::Dronet,
        ReferenceModel::TinyYoloVoc,
        ReferenceModel::TinyYoloNet,
        ReferenceModel::SmallYoloV3,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ReferenceModel::Dronet => "dronet",
            ReferenceModel::TinyYoloVoc => "tiny_yolo_voc",
            ReferenceModel::TinyYoloNet => "tiny_yolonet",
            ReferenceModel::SmallYoloV3 => "small_yolo_v3",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|m| m.name() == name)
    }

    pub fn text(self) -> &'static str {
        match self {
            ReferenceModel::Dronet => include_str!("../../assets/dronet.cfg"),
            ReferenceModel::TinyYoloVoc => include_str!("../../assets/tiny_yolo_voc.cfg"),
            ReferenceModel::TinyYoloNet => include_str!("../../assets/tiny_yolonet.cfg"),
            ReferenceModel::SmallYoloV3 => include_str!("../../assets/small_yolo_v3.cfg"),
        }
    }

    pub fn config(self) -> NetworkConfig {
        parse_config(self.text()).expect("embedded reference config is valid")
    }
}

/// Three-layer 64×64 network used by the overfit demonstration.
pub const TOY_CONFIG: &str = include_str!("../../assets/toy.cfg");

pub fn toy_config() -> NetworkConfig {
    parse_config(TOY_CONFIG).expect("embedded toy config is valid")
}

pub fn reference_configs() -> Vec<NetworkConfig> {
    ReferenceModel::ALL.iter().map(|m| m.config()).collect()
}
