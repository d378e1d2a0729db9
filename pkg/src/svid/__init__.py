"""svid: text-independent speaker identification.

Configurable acoustic front-ends (MFCC, LPC, PLP with dynamics and energy),
per-utterance feature normalization, GMM-UBM modeling with MAP mean
adaptation, supervector extraction, and linear/RBF SVM classification, plus
an experiment harness for front-end x kernel sweeps.
"""

from .corpus import (Corpus, SplitSpec, Utterance, Waveform, load_corpus,
                     read_wav, save_corpus, split_train_test,
                     synthesize_corpus, write_wav)
from .dsp import (FrameMatrix, PreprocessConfig, VadConfig, apply_window,
                  detect_endpoints, frame_log_energy, frame_signal,
                  hamming_window, pre_emphasize, preprocess)
from .features import (FeatureMatrix, Frontend, FrontendSpec, LpcModel,
                       MfccConfig, PlpConfig, append_deltas,
                       append_log_energy, assemble_frontend, autocorrelation,
                       compute_lpc, compute_mfcc, compute_plp, levinson_durbin)
from .gmm import (GmmModel, Supervector, TrainConfig, em_train_ubm,
                  kmeans_init, log_likelihood, map_adapt_means, supervector)
from .harness import (ResultRow, emit_table, identification_rate,
                      run_experiment, run_sweep)
from .normalize import (NormalizerSpec, cms, cvn, feature_warp, rasta_filter,
                        short_time_gaussianize)
from .svm import (CvGrid, KernelSpec, MulticlassSvm, SvmModel, cross_validate,
                  kernel_eval, predict_binary, train_binary, train_multiclass)

__version__ = "0.1.0"
