//! Reward, replay, DQN and PPO learning rules, the curriculum controller,
//! the episode runner and the training and evaluation loops.

pub mod curriculum;
pub mod dqn;
pub mod eval;
pub mod nav;
pub mod ppo;
pub mod replay;
pub mod reward;
pub mod trainer;

use thiserror::Error;

pub use curriculum::{CurriculumState, ZoneAdvance};
pub use dqn::{dqn_loss_and_grad, dqn_update, DqnConfig};
pub use eval::{evaluate, greedy_action, run_episode, EvalOptions};
pub use nav::{eval_episode_indices, Action, NavEnv, NavSettings, StepResult, TrajectoryRow, EVAL_EPISODE_BASE, VALIDATION_EPISODE_BASE};
pub use ppo::{ppo_update, PpoConfig, PpoLosses, RolloutStep};
pub use replay::{ReplayBuffer, Transition};
pub use reward::{compute_reward, RewardParams};
pub use trainer::{normalized_reward_curve, DqnTrainer, EpisodeLog, PpoTrainer, Progress, TrainEvent, TrainSetup};

use crate::dynamics::ActionError;
use crate::envgen::GenerateError;
use crate::nn::NnError;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AgentError {
    #[error(transparent)]
    Generate(#[from] GenerateError),
    #[error(transparent)]
    Nn(#[from] NnError),
    #[error(transparent)]
    Action(#[from] ActionError),
    #[error("action {0} has no Q-value")]
    ActionOutOfRange(usize),
    #[error("replay buffer holds fewer transitions than learn_start")]
    ReplayNotReady,
    #[error("non-finite advantage or gradient; update aborted")]
    NonFiniteAdvantage,
    #[error("policy template does not match the checkpoint or environment")]
    TemplateMismatch,
    #[error("network has no Gaussian head")]
    WrongHead,
    #[error("invalid {0} configuration")]
    InvalidConfig(&'static str),
}
