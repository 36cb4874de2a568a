"""fingermi: five-class same-hand finger motor-imagery EEG decoding.

Pure-NumPy/SciPy toolkit: a float64 reverse-mode autodiff tensor engine, the
FingerNet decoder plus its EEGNet and DeepConvNet baselines, the weighted
cross-entropy family with the heuristic bias-mitigation weight schedule, the
preprocessing chain, a synthetic EEG generator, stratified cross-validation,
and exact Wilcoxon significance testing.
"""

from .dataio import (EegfError, EegfMagicError, EegfSizeError,
                     EegfVersionError, SynthSpec, make_biased_fixture,
                     read_eegf, stratified_kfold, synth_dataset, write_eegf)
from .harness import (CvReport, EvalResult, TrainConfig, TrainingDiverged,
                      evaluate, run_cv, summarize_table, train,
                      wilcoxon_signed_rank)
from .losses import (LossSpec, PredictionHistogram, SweepRound, adjust_weights,
                     bias_weighted_cross_entropy, class_frequency_weights,
                     cross_entropy, weight_sweep, weighted_cross_entropy)
from .models import (LayerSpec, ModelConfig, ModelSpec, Network,
                     apply_max_norm, deepconvnet_spec, eegnet_spec,
                     fingernet_spec, forward, init_params, param_count,
                     propagate_shapes)
from .optim import AdamState, adam_init, adam_step
from .prng import Pcg32
from .signal import (DEFAULT_CHANNELS, EpochedDataset, Recording, decimate,
                     epoch, notch_filter, select_channels, zscore_epochs)
from .tensor import Tensor, backprop, gradcheck

__version__ = "0.1.0"
