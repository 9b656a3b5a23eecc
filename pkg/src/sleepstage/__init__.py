"""Sleep stage classification from multi-channel polysomnography.

The package covers the full experiment pipeline: record ingestion and
epoching, signal denoising and ECG-artifact removal, a from-scratch 1D
convolutional network trained with Adam, TPE hyperparameter search, and
majority-vote ensemble evaluation with Cohen's kappa.
"""

__version__ = "0.1.0"

from sleepstage.errors import ConfigError, DataError, NumericalError

__all__ = ["ConfigError", "DataError", "NumericalError", "__version__"]
