"""Self-supervised pretraining for multichannel EEG.

Masked reconstruction (``maeeg``) and contrastive (``bendr``) objectives over
a strided conv encoder and a transformer, built on a small numpy autodiff
engine in :mod:`maeeg.core`.
"""

from maeeg.data import Dataset, EegRecord, SynthSpec, read_eegb, synth_dataset, write_eegb
from maeeg.downstream import DownstreamConfig, EvalMetrics, classify, evaluate, finetune_train, probe_train
from maeeg.masking import MaskPlan, MaskSpec, apply_mask, make_plan
from maeeg.model import ModelBundle, ModelConfig, build_model, tiny_config
from maeeg.objectives import PretrainConfig, contrastive_loss, pretrain_run, reconstruction_loss

__version__ = "0.1.0"

__all__ = [
    "Dataset", "DownstreamConfig", "EegRecord", "EvalMetrics", "MaskPlan", "MaskSpec", "ModelBundle",
    "ModelConfig", "PretrainConfig", "SynthSpec", "apply_mask", "build_model", "classify",
    "contrastive_loss", "evaluate", "finetune_train", "make_plan", "pretrain_run", "probe_train",
    "read_eegb", "reconstruction_loss", "synth_dataset", "tiny_config", "write_eegb",
]
