from .agent import (
    ACTION_DIM,
    DDPGAgent,
    TrainingConfig,
    actor_objective_and_grads,
    build_networks,
    critic_loss_and_grads,
    encode_frame,
)
from .checkpoint import decode_network, encode_network, load_checkpoint, save_checkpoint
from .nets import MLP, Layer, NetKind, soft_update
from .noise import OUNoise
from .replay import Batch, ReplayBuffer
