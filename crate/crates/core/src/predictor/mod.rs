//! From a query image to a saliency map: retrieval of the nearest units,
//! ensemble aggregation, the spatial prior, smoothing and normalization.
//! Also hosts configuration tuning and the similarity-transfer experiment.

mod ensemble;
mod pipeline;
mod prior;
mod transfer;
mod tune;

pub use ensemble::aggregate;
pub use pipeline::{
    compose, predict_saliency, unit_outputs, EnsembleConfig, PreparedQuery, Provenance, SaliencyMap,
};
pub use prior::{
    decode_prior, encode_prior, eval_prior, fit_prior, load_prior, save_prior, PriorKernel, SpatialPrior,
    PRIOR_MAGIC, PRIOR_STD, PRIOR_VERSION,
};
pub use transfer::{
    similarity_transfer_experiment, TransferOptions, TransferPair, TransferReport, TransferScores,
};
pub use tune::{select_config, tune, SearchSpace, TuneResult};
