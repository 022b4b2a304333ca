from .gradcheck import GradCheckReport, grad_check
from .layers import (
    TransformerConfig,
    causal_mask,
    embed,
    scaled_dot_attention,
    transformer_decoder,
    transformer_encoder,
)
from .losses import bce_with_logits, cross_entropy
from .optim import LambState, lamb_step
from .params import CheckpointError, ParameterStore
from .tensor import Tensor, no_grad

PRESETS = {
    "desk": TransformerConfig(n_layers=2, d_model=64, n_heads=4, d_ff=128),
    "paper-editor-6x128": TransformerConfig(n_layers=6, d_model=128, n_heads=8, d_ff=512),
    "paper-generator-8x256": TransformerConfig(n_layers=8, d_model=256, n_heads=8, d_ff=1024),
}
# factorized token embedding width for the full-scale step generator
PAPER_GENERATOR_EMBED_DIM = 64
