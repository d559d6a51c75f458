"""
Presets Module.

Canned reproductions of the laboratory's headline results. Each preset is an
ordinary experiment config, so `mfront repro --preset NAME` runs exactly what
the matching config file would run.
"""

from typing import Dict

from mfront.core.errors import ConfigError
from mfront.models.config import ExperimentConfig

BURGERS = {
    "ell": 1.0,
    "diffusion": {"name": "constant", "params": {"value": 1.0}},
    "flux": {"name": "burgers", "params": {}},
    "u_minus": 1.0,
    "u_plus": -1.0,
}

SCALING_EPSILONS = [round(0.06 + 0.01 * i, 2) for i in range(7)]
SLOW_MOTION_EPSILONS = [0.07, 0.08, 0.09, 0.10]

PRESET_DOCS = {
    "eigen-scaling": "lambda_1 and lambda_2 at xi = 0.2 over eps = 0.06..0.12, with the fit of ln|lambda_1| vs 1/eps",
    "residual-map": "Omega over the admissible band for eps = 0.06..0.12, with the fit of ln Omega(0.2) vs 1/eps",
    "slow-motion": "Reduced halving time from xi0 = 0.3 over eps = 0.07..0.10, with the fit of ln t_half vs 1/eps",
    "pde-vs-reduced": "PDE interface trajectory against the reduced motion, eps = 0.1, xi0 = 0.3, t <= 2000",
}


def _burgers(epsilon, n: int) -> Dict:
    return {**BURGERS, "epsilon": epsilon, "n": n}


def canned_reproductions() -> Dict[str, ExperimentConfig]:
    """
    The four named presets.

    Returns:
        Dict[str, ExperimentConfig]: Validated configs keyed by preset name
    """
    raw = {
        "eigen-scaling": {
            "problem": _burgers(SCALING_EPSILONS, 2001),
            "experiment": {"kind": "sweep", "of": "spectrum", "xi": 0.2, "K": 4},
        },
        "residual-map": {
            "problem": _burgers(SCALING_EPSILONS, 2001),
            "experiment": {"kind": "sweep", "of": "residual", "xi": 0.2},
        },
        "slow-motion": {
            "problem": _burgers(SLOW_MOTION_EPSILONS, 1001),
            "experiment": {"kind": "sweep", "of": "slow-motion", "xi0": 0.3},
        },
        "pde-vs-reduced": {
            "problem": _burgers(0.1, 1001),
            "experiment": {
                "kind": "simulate",
                "initial": "member",
                "xi0": 0.3,
                "reduced": True,
                "transient": 10.0,
                "integrator": {"t_end": 2000.0, "cfl_safety": 0.5, "n_snapshots": 80, "K": 3},
            },
        },
    }
    return {name: ExperimentConfig.model_validate(config) for name, config in raw.items()}


def get_preset(name: str) -> ExperimentConfig:
    """
    Look up a preset by name.

    Raises:
        ConfigError: If the name is unknown
    """
    presets = canned_reproductions()
    if name not in presets:
        raise ConfigError(f"Unknown preset '{name}'. Available presets: {', '.join(sorted(presets))}")
    return presets[name]
