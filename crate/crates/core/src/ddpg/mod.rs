//! Deep deterministic policy gradient agent: actor and critic networks,
//! replay, exploration noise, training and evaluation.

mod agent;
mod mlp;
mod noise;
mod replay;

pub use agent::{
    actor_gradient, actor_update, adjust_window, best_by_eval, critic_gradient, critic_update,
    evaluate, init, multi_seed, sample_episode, select_action, to_target, train, train_with,
    write_training_log, AgentPolicy, Batch, EpisodeLog, Learner, MultiSeedResult, Networks,
    SeedRun, TrainedAgent, CHECKPOINT_FORMAT, CHECKPOINT_VERSION, MAX_EPISODE_ATTEMPTS,
    TRAINING_LOG_HEADER,
};
pub use mlp::{soft_update, Adam, ForwardCache, Layer, Mlp, OutputActivation};
pub use noise::NoiseProcess;
pub use replay::{Normalizer, ReplayBuffer, Transition};
