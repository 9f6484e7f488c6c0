"""Ternary neural networks with multiplication-free inference.

A real-valued teacher MLP with stochastically firing ternary neurons is
trained by SGD, then compiled layer by layer into a fully ternary student
network (weights, inputs and activations all in {-1, 0, +1}).  The student
runs on a bit-packed integer engine that uses no multiplications, and an
analytic cost model estimates throughput/latency of the matching pipelined
hardware.
"""

from ternnet.linalg import Rng, matmul
from ternnet.data import Dataset, binarize_threshold, load_mnist_idx, split, synth_blobs
from ternnet.teacher import RealMlp, TrainConfig, train_teacher
from ternnet.ternarize import TernarizeConfig, ternarize_network
from ternnet.runtime import TernaryMlp, load_model, pack, save_model, ternary_dot, unpack

__all__ = [
    "Rng",
    "matmul",
    "Dataset",
    "load_mnist_idx",
    "binarize_threshold",
    "split",
    "synth_blobs",
    "RealMlp",
    "TrainConfig",
    "train_teacher",
    "TernarizeConfig",
    "ternarize_network",
    "TernaryMlp",
    "pack",
    "unpack",
    "ternary_dot",
    "save_model",
    "load_model",
]

__version__ = "0.1.0"
