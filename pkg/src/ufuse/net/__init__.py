from .adam import AdamState, adam_step
from .checkpoint import load_checkpoint, save_checkpoint
from .model import Model, NonFiniteError, forward_pass, predict_proba
from .train import Sample, grad_check, train

__all__ = ["AdamState", "adam_step", "load_checkpoint", "save_checkpoint", "Model",
           "NonFiniteError", "forward_pass", "predict_proba", "Sample", "grad_check", "train"]
