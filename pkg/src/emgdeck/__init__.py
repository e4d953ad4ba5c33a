"""emgdeck: a desk-scale neck-EMG speech decoding pipeline.

Subpackages cover the corpus schema and synthetic generator, the packetized
acquisition simulator, the prompt-session protocol and its operator service,
EMG featurization, from-scratch learning primitives, and the four scripted
experiments (split classification, electrode ablation, one-shot cross-speaker
confusion, speech-EMG correlation).
"""

from ._kernels import BACKEND as KERNEL_BACKEND

__version__ = "0.1.0"

__all__ = ["KERNEL_BACKEND", "__version__"]
