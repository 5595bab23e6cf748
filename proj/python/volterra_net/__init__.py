import json as _json

from ._volterra_net import (
    BrownianPath,
    DeepONet,
    Experiment,
    NeuralSDE,
    NeuralSVE,
    PathDataset,
    PathModel,
    PathRecord,
    TimeGrid,
    VolterraError,
    coarsen_brownian,
    evaluate,
    experiment,
    generate_dataset,
    lipswish,
    load_model,
    mean_relative_l2,
    sample_brownian,
    set_thread_limit,
    simulate,
    stability_scan,
    train,
    uniform_grid,
    with_deterministic_start,
)
from ._volterra_net import _run

__all__ = [name for name in dir() if not name.startswith("_")] + ["run"]


def run(config, force=False):
    """Run a CLI-style configuration (dict or JSON string). Returns (output_dir, report)."""
    if not isinstance(config, str):
        config = _json.dumps(config)
    return _run(config, force)
