"""Video feature encoding and GRU captioning toolkit.

Thin python surface over the C++ core: temporal Fourier encoding, semantic
object/action codes, the fixed tanh projection, caption metrics, the
synthetic dataset generator and the batch pipeline stages.
"""

from eve._core import (
    __version__,
    beam_caption,
    bleu4,
    caption,
    cider_d,
    dft_first_p,
    encode,
    encode_activations,
    encode_neuron,
    evaluate,
    greedy_caption,
    project_code,
    pyramid_segments,
    rouge_l,
    sample_frames,
    synth,
    tokenize,
    train,
)

__all__ = [
    "__version__",
    "beam_caption",
    "bleu4",
    "caption",
    "cider_d",
    "dft_first_p",
    "encode",
    "encode_activations",
    "encode_neuron",
    "evaluate",
    "greedy_caption",
    "project_code",
    "pyramid_segments",
    "rouge_l",
    "sample_frames",
    "synth",
    "tokenize",
    "train",
]
