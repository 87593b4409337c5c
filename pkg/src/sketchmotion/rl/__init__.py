"""Demonstration-anchored TD3 training at desk scale."""

from .dataset import DemoDataset, Transition, build_demo_dataset, drop_z, dump_demo_dataset, parse_demo_dataset
from .env import ToyEnv, evaluate_policy, rollout_success, toy_env_reset, toy_env_step
from .nets import MLP, Adam, CriticNet, PolicyNet, dump_net, parse_net, polyak_update
from .train import (
    CURVE_COLUMNS,
    ReplayBuffer,
    TD3BCConfig,
    TrainResult,
    actor_loss,
    as_batch,
    bc_dataset_loss,
    bc_pretrain,
    critic_loss_and_grads,
    critic_target_values,
    critic_update,
    curve_to_csv,
    dump_config,
    parse_config,
    parse_curve_csv,
    td3bc_train,
)

__all__ = [
    "Transition",
    "DemoDataset",
    "build_demo_dataset",
    "drop_z",
    "dump_demo_dataset",
    "parse_demo_dataset",
    "ToyEnv",
    "toy_env_step",
    "toy_env_reset",
    "rollout_success",
    "evaluate_policy",
    "MLP",
    "PolicyNet",
    "CriticNet",
    "Adam",
    "polyak_update",
    "dump_net",
    "parse_net",
    "TD3BCConfig",
    "TrainResult",
    "ReplayBuffer",
    "actor_loss",
    "as_batch",
    "bc_pretrain",
    "bc_dataset_loss",
    "critic_target_values",
    "critic_loss_and_grads",
    "critic_update",
    "td3bc_train",
    "curve_to_csv",
    "parse_curve_csv",
    "dump_config",
    "parse_config",
    "CURVE_COLUMNS",
]
