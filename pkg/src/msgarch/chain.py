"""Mutable per-chain sampler state."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .model import (ModelParams, ObservationSeries, StatePath, VarianceInit,
                    path_conditional_logdensity, variance_path)


@dataclass
class ChainState:
    """Everything one Gibbs chain owns: data view, parameters, trajectory.

    ``sigma2`` is kept consistent with (params, path) after every block
    update.  One instance per chain; never share across threads.
    """

    y: ObservationSeries
    params: ModelParams
    path: StatePath
    init: VarianceInit
    sigma2: np.ndarray = field(init=False)

    def __post_init__(self) -> None:
        self.refresh_sigma2()

    def refresh_sigma2(self) -> None:
        self.sigma2 = variance_path(self.y, self.path, self.params, self.init)

    def set_path(self, path: StatePath) -> None:
        self.path = path
        self.refresh_sigma2()

    def set_params(self, params: ModelParams) -> None:
        self.params = params
        self.refresh_sigma2()

    def log_target(self) -> float:
        """Unnormalized log posterior of the current trajectory given params."""
        return path_conditional_logdensity(self.y, self.path, self.params, self.init)
