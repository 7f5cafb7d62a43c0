//! Dataset ingestion, synthetic generation, and the split/partition
//! machinery feeding the swarm and the attacks.

mod attack_set;
mod dataset;
mod io;
mod partition;
mod split;

pub use attack_set::{build_attack_set, AttackDataset, FeatureMode, MEMBER, NONMEMBER};
pub use dataset::{generate_synthetic, Dataset};
pub use io::{load_csv, load_idx, parse_idx_images, parse_idx_labels, IDX_IMAGES_MAGIC, IDX_LABELS_MAGIC};
pub use partition::{apply_proportions, partition, partition_indices, PartitionMode, PartitionPlan, PartitionSpec};
pub use split::{make_swarm_split, SplitFractions, SplitIndices, SwarmSplit};
