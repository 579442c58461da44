"""The CNN hyperparameter configuration space: domains, sampling, compilation.

The search space couples architecture (convblocks, filters, pooling, fully
connected stack), preprocessing (window size, stream count, normalization),
and learning settings (optimizer, learning rate, batch size, shuffling,
early stopping). Repeated structures draw their values independently per
convblock and per fully connected layer.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from iqautoml.nn.model import Conv, Dense, Dropout, Flatten, MaxPool, ModelSpec, SoftmaxHead
from iqautoml.nn.train import LearnConfig

CONFIG_FORMAT_VERSION = 1

# Global cap on training epochs for any single model.
MAX_TRAINING_EPOCHS = 100

# Early-stopping patience used whenever early stopping is on.
EARLY_STOPPING_PATIENCE = 6


class InfeasibleConfigError(ValueError):
    """Sampled or supplied configuration cannot form a valid model."""


class SamplingExhaustedError(RuntimeError):
    """Rejection sampling hit its cap without finding a feasible configuration."""


@dataclass(frozen=True)
class HyperSpace:
    """One finite domain per hyperparameter; num_receivers bounds the stream count."""

    num_receivers: int = 6
    convblocks: tuple = (1, 2, 3)
    filters: tuple = tuple(range(16, 161, 16))
    filter_heights: tuple = tuple(range(16, 161, 16))
    pool_sizes: tuple = tuple(range(5, 76, 10))
    pool_strides: tuple = tuple(range(5, 56, 10))
    fc_layers: tuple = (1, 2, 3, 4)
    fc_neurons: tuple = tuple(range(10, 101, 10))
    activations: tuple = ("relu", "tanh", "sigmoid")
    dropouts: tuple = (0.0, 0.15, 0.3, 0.45, 0.6)
    windows: tuple = tuple(range(128, 513, 32))
    normalizations: tuple = (True, False)
    optimizers: tuple = ("adam", "sgd", "rmsprop")
    learning_rates: tuple = (1e-2, 1e-3, 1e-4, 1e-5)
    early_stoppings: tuple = (True, False)
    batch_sizes: tuple = tuple(range(32, 321, 32))
    shuffles: tuple = (True, False)

    @property
    def stream_counts(self) -> tuple:
        return tuple(range(1, self.num_receivers + 1))

    def scalar_domains(self) -> dict[str, tuple]:
        """The per-hyperparameter domains, one entry per distinct hyperparameter."""
        return {
            "convblocks": self.convblocks,
            "filters": self.filters,
            "filter_heights": self.filter_heights,
            "pool_sizes": self.pool_sizes,
            "pool_strides": self.pool_strides,
            "fc_layers": self.fc_layers,
            "fc_neurons": self.fc_neurons,
            "activation": self.activations,
            "dropout": self.dropouts,
            "window": self.windows,
            "normalize": self.normalizations,
            "streams": self.stream_counts,
            "optimizer": self.optimizers,
            "learning_rate": self.learning_rates,
            "early_stopping": self.early_stoppings,
            "batch_size": self.batch_sizes,
            "shuffle": self.shuffles,
        }

    def cardinality(self) -> int:
        """|configuration space| = product of the domain sizes."""
        out = 1
        for domain in self.scalar_domains().values():
            out *= len(domain)
        return out


@dataclass(frozen=True)
class HyperConfig:
    """One point in the configuration space, with per-block/per-layer values."""

    num_convblocks: int
    filters: tuple
    filter_heights: tuple
    pool_sizes: tuple
    pool_strides: tuple
    conv_dropouts: tuple
    num_fc: int
    fc_neurons: tuple
    fc_dropouts: tuple
    activation: str
    window: int
    normalize: bool
    num_streams: int
    optimizer: str
    learning_rate: float
    early_stopping: bool
    batch_size: int
    shuffle: bool

    def to_dict(self) -> dict:
        return {
            "version": CONFIG_FORMAT_VERSION,
            "num_convblocks": self.num_convblocks,
            "filters": list(self.filters),
            "filter_heights": list(self.filter_heights),
            "pool_sizes": list(self.pool_sizes),
            "pool_strides": list(self.pool_strides),
            "conv_dropouts": list(self.conv_dropouts),
            "num_fc": self.num_fc,
            "fc_neurons": list(self.fc_neurons),
            "fc_dropouts": list(self.fc_dropouts),
            "activation": self.activation,
            "window": self.window,
            "normalize": self.normalize,
            "num_streams": self.num_streams,
            "optimizer": self.optimizer,
            "learning_rate": self.learning_rate,
            "early_stopping": self.early_stopping,
            "batch_size": self.batch_size,
            "shuffle": self.shuffle,
        }

    @staticmethod
    def from_dict(data: dict) -> "HyperConfig":
        version = data.get("version", CONFIG_FORMAT_VERSION)
        if version != CONFIG_FORMAT_VERSION:
            raise ValueError(f"unsupported config version {version}")
        return HyperConfig(
            num_convblocks=data["num_convblocks"],
            filters=tuple(data["filters"]),
            filter_heights=tuple(data["filter_heights"]),
            pool_sizes=tuple(data["pool_sizes"]),
            pool_strides=tuple(data["pool_strides"]),
            conv_dropouts=tuple(data["conv_dropouts"]),
            num_fc=data["num_fc"],
            fc_neurons=tuple(data["fc_neurons"]),
            fc_dropouts=tuple(data["fc_dropouts"]),
            activation=data["activation"],
            window=data["window"],
            normalize=data["normalize"],
            num_streams=data["num_streams"],
            optimizer=data["optimizer"],
            learning_rate=data["learning_rate"],
            early_stopping=data["early_stopping"],
            batch_size=data["batch_size"],
            shuffle=data["shuffle"],
        )


@dataclass(frozen=True)
class FeasibilityVerdict:
    feasible: bool
    failing_block: int | None = None
    stage: str | None = None  # "conv" or "pool"
    detail: str = ""

    def __bool__(self) -> bool:
        return self.feasible


@dataclass(frozen=True)
class PreprocessSettings:
    window: int
    num_streams: int
    normalize: bool


@dataclass(frozen=True)
class BuiltModel:
    spec: ModelSpec
    preprocess: PreprocessSettings
    learn: LearnConfig


def _pick(rng: np.random.Generator, domain: tuple):
    return domain[int(rng.integers(len(domain)))]


def draw_config(space: HyperSpace, rng: np.random.Generator) -> HyperConfig:
    """One uniform draw from every domain, without any feasibility filtering."""
    blocks = _pick(rng, space.convblocks)
    filters = tuple(_pick(rng, space.filters) for _ in range(blocks))
    heights = tuple(_pick(rng, space.filter_heights) for _ in range(blocks))
    pools = tuple(_pick(rng, space.pool_sizes) for _ in range(blocks))
    strides = tuple(_pick(rng, space.pool_strides) for _ in range(blocks))
    conv_drops = tuple(_pick(rng, space.dropouts) for _ in range(blocks))
    fc = _pick(rng, space.fc_layers)
    neurons = tuple(_pick(rng, space.fc_neurons) for _ in range(fc))
    fc_drops = tuple(_pick(rng, space.dropouts) for _ in range(fc))
    return HyperConfig(
        num_convblocks=blocks,
        filters=filters,
        filter_heights=heights,
        pool_sizes=pools,
        pool_strides=strides,
        conv_dropouts=conv_drops,
        num_fc=fc,
        fc_neurons=neurons,
        fc_dropouts=fc_drops,
        activation=_pick(rng, space.activations),
        window=_pick(rng, space.windows),
        normalize=_pick(rng, space.normalizations),
        num_streams=_pick(rng, space.stream_counts),
        optimizer=_pick(rng, space.optimizers),
        learning_rate=_pick(rng, space.learning_rates),
        early_stopping=_pick(rng, space.early_stoppings),
        batch_size=_pick(rng, space.batch_sizes),
        shuffle=_pick(rng, space.shuffles),
    )


def sample_config(
    space: HyperSpace,
    rng: np.random.Generator,
    *,
    max_resamples: int = 1000,
    stats: dict | None = None,
) -> HyperConfig:
    """Uniform rejection sampling: redraw whole configs until shape-feasible.

    `stats`, when given, accumulates {"draws": int, "rejected": int} so callers
    can report the infeasibility rate for a run.
    """
    last_verdict = None
    for _ in range(max_resamples):
        config = draw_config(space, rng)
        verdict = validate_config(config)
        if stats is not None:
            stats["draws"] = stats.get("draws", 0) + 1
            if not verdict:
                stats["rejected"] = stats.get("rejected", 0) + 1
        if verdict:
            return config
        last_verdict = verdict
    raise SamplingExhaustedError(
        f"no feasible configuration in {max_resamples} draws; last failure: "
        f"{last_verdict.detail if last_verdict else 'n/a'}"
    )


def validate_config(config: HyperConfig, input_len: int | None = None) -> FeasibilityVerdict:
    """Simulate the conv/pool shape algebra; feasible iff every time dim >= 1."""
    length = config.window if input_len is None else input_len
    for b in range(config.num_convblocks):
        length = length - config.filter_heights[b] + 1
        if length < 1:
            return FeasibilityVerdict(
                False,
                failing_block=b,
                stage="conv",
                detail=(
                    f"convblock {b}: filter height {config.filter_heights[b]} leaves "
                    f"{length} time steps"
                ),
            )
        if length < config.pool_sizes[b]:
            return FeasibilityVerdict(
                False,
                failing_block=b,
                stage="pool",
                detail=(
                    f"convblock {b}: pool {config.pool_sizes[b]} exceeds {length} time steps"
                ),
            )
        length = (length - config.pool_sizes[b]) // config.pool_strides[b] + 1
    return FeasibilityVerdict(True)


def build_model(config: HyperConfig, num_classes: int = 3) -> BuiltModel:
    """Compile a feasible configuration into a ModelSpec plus its settings.

    Feature extractor: (Conv -> Dropout -> MaxPool) per convblock, then
    Flatten. Classifier: (Dense -> Dropout) per fully connected layer, then a
    softmax head projecting to num_classes.
    """
    verdict = validate_config(config)
    if not verdict:
        raise InfeasibleConfigError(verdict.detail)

    layers: list = []
    for b in range(config.num_convblocks):
        layers.append(Conv(config.filters[b], config.filter_heights[b], config.activation))
        layers.append(Dropout(config.conv_dropouts[b]))
        layers.append(MaxPool(config.pool_sizes[b], config.pool_strides[b]))
    layers.append(Flatten())
    for l in range(config.num_fc):
        layers.append(Dense(config.fc_neurons[l], config.activation))
        layers.append(Dropout(config.fc_dropouts[l]))
    layers.append(SoftmaxHead(num_classes))

    spec = ModelSpec(
        input_shape=(config.window, 2, config.num_streams), layers=tuple(layers)
    )
    spec.validate(num_classes=num_classes)
    return BuiltModel(
        spec=spec,
        preprocess=PreprocessSettings(
            window=config.window,
            num_streams=config.num_streams,
            normalize=config.normalize,
        ),
        learn=LearnConfig(
            optimizer=config.optimizer,
            learning_rate=config.learning_rate,
            batch_size=config.batch_size,
            shuffle=config.shuffle,
            early_stopping=config.early_stopping,
            patience=EARLY_STOPPING_PATIENCE,
        ),
    )


def bcnn_config(num_streams: int, num_receivers: int = 6) -> HyperConfig:
    """The manually tuned single-convblock baseline.

    Learning settings (batch 128, Adam at 1e-4, early stopping with patience
    6, window 512, 100-epoch cap via MAX_TRAINING_EPOCHS) are the published
    manual tuning; the architecture constants (64 filters of 16x2, pool 5
    stride 5, one 100-neuron hidden layer, no dropout) are declared stand-ins
    held fixed across all baseline comparisons. The stream count n is swept by
    the caller.
    """
    if num_streams < 1 or num_streams > num_receivers:
        raise ValueError(
            f"num_streams must be in 1..{num_receivers}, got {num_streams}"
        )
    return HyperConfig(
        num_convblocks=1,
        filters=(64,),
        filter_heights=(16,),
        pool_sizes=(5,),
        pool_strides=(5,),
        conv_dropouts=(0.0,),
        num_fc=1,
        fc_neurons=(100,),
        fc_dropouts=(0.0,),
        activation="relu",
        window=512,
        normalize=True,
        num_streams=num_streams,
        optimizer="adam",
        learning_rate=1e-4,
        early_stopping=True,
        batch_size=128,
        shuffle=True,
    )


def with_normalize(config: HyperConfig, normalize: bool) -> HyperConfig:
    """Same architecture and learning settings, normalization toggled."""
    return replace(config, normalize=normalize)
