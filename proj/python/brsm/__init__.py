"""Boosted recurrent sparse memory: sparse predictive autoencoder trained
with time-local gradients, plus the stochastic sequential grammar benchmark
and its exact accuracy-ceiling oracle."""

from ._core import (
    BrsmError,
    Grammar,
    RsmModel,
    accuracy,
    ceiling_exact,
    ceiling_montecarlo,
    gen_grammar,
    layer_entropy,
    max_entropy,
    mse_loss,
    ngram_accuracy,
    perplexity,
    run_gradcheck,
    sample_stream,
    synthetic_embedding,
)

__all__ = [
    "BrsmError",
    "Grammar",
    "RsmModel",
    "accuracy",
    "ceiling_exact",
    "ceiling_montecarlo",
    "gen_grammar",
    "layer_entropy",
    "max_entropy",
    "mse_loss",
    "ngram_accuracy",
    "perplexity",
    "run_gradcheck",
    "sample_stream",
    "synthetic_embedding",
]

__version__ = "0.1.0"
