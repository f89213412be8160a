"""Python bindings for the EEG motor-imagery engine."""

from ._core import (
    BciError,
    Model,
    __version__,
    balance_indices,
    class_names,
    cnn_shapes,
    extract_bands,
    fft_magnitude,
    filter_response,
    filter_signal,
    knn_predict,
    lda_predict,
    load_model,
    load_session,
    simulate_session,
    split_indices,
    train_model,
)

__all__ = [
    "BciError",
    "Model",
    "__version__",
    "balance_indices",
    "class_names",
    "cnn_shapes",
    "extract_bands",
    "fft_magnitude",
    "filter_response",
    "filter_signal",
    "knn_predict",
    "lda_predict",
    "load_model",
    "load_session",
    "simulate_session",
    "split_indices",
    "train_model",
]
