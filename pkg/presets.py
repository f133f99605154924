"""
Named hyperparameter presets.

Linear runs ("linear-*") use decaying rates eta0 / (1 + t/t0); nonlinear
MNIST runs ("relu-mnist-*") use constant rates with the
mean-subtracted ReLU. The "table2-*" and "table3-*" names are aliases
for the same sets.
"""
from typing import Dict, List, NamedTuple, Optional, Tuple

from errors import ConfigError
from models import InitSpec, Nonlinearity, ScheduleSpec, TrainConfig, Variant

# (eta0, t0) pairs; t0 None means constant
Rate = Tuple[float, Optional[float]]


class Preset(NamedTuple):
    dataset: str
    k: int
    steps: int
    nonlinearity: Nonlinearity
    bmvr: Tuple[Rate, Rate, Rate]  # eta_w1, eta_w2, eta_q
    backprop: Tuple[Rate, Rate]  # eta_w1, eta_w2
    q_scale: float = 1.0  # Q starts at q_scale * I


PRESETS: Dict[str, Preset] = {
    "default-synth": Preset(
        "synth", 4, 20000, Nonlinearity.LINEAR,
        bmvr=((0.06, 860), (0.00046, 10740), (0.0023, 1285)),
        backprop=((0.015, 1400), (0.03, 1400)),
        q_scale=0.5,
    ),
    "linear-mnist": Preset(
        "mnist", 8, 100000, Nonlinearity.LINEAR,
        bmvr=((0.01, 1e3), (0.01, 1e3), (0.003, 1e3)),
        backprop=((0.02, 1e3), (0.02, 1e3)),
    ),
    "linear-fmnist": Preset(
        "fmnist", 8, 100000, Nonlinearity.LINEAR,
        bmvr=((0.013, 1e3), (0.013, 1e3), (0.005, 1e3)),
        backprop=((0.018, 1e3), (0.018, 1e3)),
    ),
    "linear-cifar10": Preset(
        "cifar10", 8, 200000, Nonlinearity.LINEAR,
        bmvr=((0.01, 1.5e4), (0.002, 1.5e4), (0.002, 1.5e4)),
        backprop=((0.0065, 1e4), (0.0065, 1e4)),
    ),
    "linear-cifar100": Preset(
        "cifar100", 8, 200000, Nonlinearity.LINEAR,
        bmvr=((0.025, 4e4), (0.001, 4e4), (0.002, 4e4)),
        backprop=((0.0065, 1.1e4), (0.0065, 1.1e4)),
    ),
    "relu-mnist-k64": Preset(
        "mnist", 64, 100000, Nonlinearity.RELU,
        bmvr=((0.001, None), (0.0002, None), (0.001, None)),
        backprop=((0.4, None), (0.4, None)),
    ),
    "relu-mnist-k256": Preset(
        "mnist", 256, 100000, Nonlinearity.RELU,
        bmvr=((0.2, None), (0.04, None), (0.04, None)),
        backprop=((0.2, None), (0.2, None)),
    ),
    # k=16 with the k=64 rates
    "relu-mnist-k16": Preset(
        "mnist", 16, 100000, Nonlinearity.RELU,
        bmvr=((0.001, None), (0.0002, None), (0.001, None)),
        backprop=((0.4, None), (0.4, None)),
    ),
}


# Published hyperparameter table names
PRESET_ALIASES: Dict[str, str] = {
    "table2-mnist": "linear-mnist",
    "table2-fmnist": "linear-fmnist",
    "table2-cifar10": "linear-cifar10",
    "table2-cifar100": "linear-cifar100",
    "table3-k64": "relu-mnist-k64",
    "table3-k256": "relu-mnist-k256",
}


def preset_names() -> List[str]:
    return sorted([*PRESETS, *PRESET_ALIASES])


def get_preset(name: str) -> Preset:
    name = PRESET_ALIASES.get(name, name)
    if name not in PRESETS:
        raise ConfigError(f"unknown preset '{name}'; choose from {', '.join(preset_names())}")
    return PRESETS[name]


def _schedule(rate: Rate) -> ScheduleSpec:
    eta0, t0 = rate
    return ScheduleSpec(eta0=eta0, t0=t0)


def preset_config(name: str, variant: Variant = Variant.BMVR, seed: int = 0, **overrides) -> TrainConfig:
    """
    TrainConfig for a preset and variant. Keyword overrides replace the
    matching TrainConfig fields (k, steps, tau, ...).
    """
    preset = get_preset(name)
    if variant == Variant.BACKPROP:
        eta_w1, eta_w2 = (_schedule(r) for r in preset.backprop)
        eta_q = ScheduleSpec(eta0=0.0)
    else:
        eta_w1, eta_w2, eta_q = (_schedule(r) for r in preset.bmvr)

    fields = dict(
        eta_w1=eta_w1,
        eta_w2=eta_w2,
        eta_q=eta_q,
        nonlinearity=preset.nonlinearity,
        variant=variant,
        seed=seed,
        steps=preset.steps,
        k=preset.k,
        init=InitSpec(q_scale=preset.q_scale),
    )
    fields.update({key: value for key, value in overrides.items() if value is not None})
    return TrainConfig(**fields)
