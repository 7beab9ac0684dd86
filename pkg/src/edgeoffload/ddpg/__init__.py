from .agent import (AgentBundle, NonFiniteGradient, TrainConfig, actor_forward, actor_objective_grads,
                    actor_update, critic_action_grad, critic_forward, critic_loss_grads, critic_update,
                    load_checkpoint, make_agent, policy, save_checkpoint, select_action, soft_update,
                    target_values)
from .heads import SimplexHead
from .memory import Batch, ReplayMemory
from .nets import DenseNet
from .noise import OuProcess
from .train import TrainResult, make_streams, train

__all__ = [
    "AgentBundle", "Batch", "SimplexHead", "DenseNet", "NonFiniteGradient", "OuProcess", "ReplayMemory",
    "TrainConfig", "TrainResult", "actor_forward", "actor_objective_grads", "actor_update",
    "critic_action_grad", "critic_forward", "critic_loss_grads", "critic_update", "load_checkpoint",
    "make_agent", "make_streams", "policy", "save_checkpoint",
    "select_action", "soft_update", "target_values", "train",
]
