"""Covariate-shift monitoring via binned neuron-activation histograms and
minimum-removal test-set reshaping."""

from .bounds import BinningSpec, NeuronInterval, derive_binning, propagate_intervals
from .errors import (
    BinningDomainError,
    ComparabilityError,
    DomainError,
    EmptyDatasetError,
    IncompatibleHistogramError,
    InputShapeError,
    LayerRangeError,
    MissingLabelsError,
    SampleSizeError,
    ValidationError,
    WrongMethodError,
)
from .evaluate import (
    ExperimentConfig,
    ExperimentResult,
    ShiftSpec,
    SpiReport,
    compute_spi,
    gaussian_clusters,
    ratio_distance,
    run_experiment,
    simulate_shift,
)
from .histogram import (
    ActivationHistogram,
    SimilarityReport,
    bin_signatures,
    bin_value,
    build_histogram,
    conservative_kappa,
    epsilon_portion_similar,
    kl_similar,
    load_histogram,
    save_histogram,
)
from .model import (
    Dataset,
    Layer,
    Network,
    collect_values,
    forward,
    load_dataset,
    load_network,
    save_dataset,
    save_network,
    train_fixture,
)
from .reshape import (
    MilpInstance,
    ReshapePlan,
    apply_plan,
    encode,
    export_lp,
    solve_exact,
    solve_greedy,
)

__version__ = "0.1.0"
