//! gradanom-core: gradient-anomaly maps for instance masks that cross,
//! touch or overlap, plus the reweighted losses and evaluation metrics
//! built on top of them.
//!
//! Pipeline: per-instance radial distance/direction fields → stacked
//! multi-layer field view → sliding-window direction-angle statistics →
//! max-accumulated joint anomaly map → normalization and f_GA scaling →
//! per-instance restriction. All operations are pure and deterministic.

pub mod anomaly;
pub mod fields;
pub mod grid;
pub mod losses;
pub mod metrics;
pub mod scene;
pub mod synth;

pub use anomaly::{
    generate_joint_map, generate_joint_map_reference, interior_intersection_centers,
    normalize_and_scale, per_instance_maps, window_is_active, window_sigma, AnomalyMap, MapConfig,
    MapError, MapScope, SigmaMode,
};
pub use fields::{
    build_field_stack, centroid, radial_angle_map, radial_distance_map, Centroid, FieldStack,
    InstanceField,
};
pub use grid::Grid;
pub use losses::{
    gradient_anomaly_loss, mask_refinement_loss, pixel_ce, total_loss, LossBreakdown, LossError,
    ProbMap, WeightMode,
};
pub use metrics::{
    aji, dice_object, evaluate, f1_at_iou, iou, map_over_thresholds, ApEntry, InstanceSet,
    MetricError, MetricReport,
};
pub use scene::{load_label_map, load_manifest, save_manifest, InstanceMask, Scene, SceneError};
pub use synth::{rasterize, synth_scene, Preset, ShapeKind, ShapeSpec, SynthError};
