"""Neural bridge for the multi-turn code generation engine.

Serves a tiny byte-level language model behind the chat-completions contract,
fine-tunes it on the engine's emitted datasets, and trains/serves a tiny
neural reward model behind the scorer contract.
"""

from .dataset import convert_ft_dataset, load_labeled_candidates, load_trainer_ft
from .finetune import finetune_generator
from .jobs import BridgeJob
from .reward_model import TinyRewardModel, train_reward_model
from .server import ServerHandle, make_app
from .tinylm import TinyLM, TinyLMConfig

__version__ = "0.1.0"

__all__ = [
    "BridgeJob",
    "ServerHandle",
    "TinyLM",
    "TinyLMConfig",
    "TinyRewardModel",
    "convert_ft_dataset",
    "finetune_generator",
    "load_labeled_candidates",
    "load_trainer_ft",
    "make_app",
    "train_reward_model",
]
