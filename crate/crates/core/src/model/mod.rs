//! The AggNet classifier: stem convolution, four multi-scale residual encoder
//! (msEnc) modules, a 1×1 class head, global average pooling and softmax.

mod checkpoint;
mod config;
mod labels;
mod network;
mod params;
mod receptive;

pub use checkpoint::{Checkpoint, MAGIC};
pub use config::{AggNetConfig, Variant, MIN_INPUT_SIZE};
pub use labels::{decompose_class_name, ClassSet, GradingCurveLabel, Granularity, CANONICAL_CLASSES};
pub use network::{
    aggnet_forward, aggnet_scores, head_map, msenc_forward, predict_class, record_forward, record_with_nodes,
    RecordedForward,
};
pub use params::{he_init, AggNetParams, ConvLayer, Layers, MsEncParams, ParamKind, TENSOR_COUNT};
pub use receptive::{receptive_field, ReceptiveField, RfStage};
