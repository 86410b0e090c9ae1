"""
Markov IFS workbench (mifs)

This program is free software; you can redistribute it and/or modify it under the terms of the
GNU General Public License as published by the Free Software Foundation; either version 2 of the
License, or (at your option) any later version.  See LICENSE.txt.

Created on:  10/19/26

Settings of the weak curve pipeline, read from the "pipeline" block of a scenario.
"""

from dataclasses import dataclass, field, replace
from logging import getLogger
from typing import Any

from mifs.extensions.presolution.strong_stable import DEFAULT_PER_DOMAIN

logger = getLogger(__name__)

# JSON key -> attribute
_KEYS = {
    'eps': 'eps',
    'eps0': 'eps0',
    'eta': 'eta',
    'depths': 'depths',
    'seed': 'seed',
    'grid': 'grid',
    'dwellLength': 'dwell_length',
    'dwellRadius': 'dwell_radius',
    'dwellSamples': 'dwell_samples',
    'member': 'member',
    'n0': 'n0',
    'supportRadius': 'support_radius',
    'perDomain': 'per_domain',
    'repellerEta': 'repeller_eta',
}


@dataclass(frozen=True)
class PipelineSettings:
    eps: float = 0.1
    eps0: float = 0.05
    eta: float = 0.05
    depths: tuple[int, ...] = (38, 43, 48)
    seed: int = 0
    grid: int = 32
    dwell_length: int = 40
    dwell_radius: float = 0.2
    dwell_samples: int = 200
    # saddle-node member certified on the scenario's own IFS
    member: int = 6
    n0: int | None = None
    support_radius: float = 0.3
    per_domain: int = DEFAULT_PER_DOMAIN
    # two-stage scaling of the deepest family; skipped when None
    repeller_eta: float | None = None
    extras: dict[str, Any] = field(default_factory=dict, compare=False)

    def __post_init__(self):
        object.__setattr__(self, 'depths', tuple(int(d) for d in self.depths))
        if not self.depths or any(d < 1 for d in self.depths):
            raise ValueError(f'depths must be positive integers, got {list(self.depths)}')
        if self.eps <= 0 or self.eps0 <= 0 or self.eta <= 0:
            raise ValueError('eps, eps0 and eta must be positive')
        if self.dwell_length < 1 or self.dwell_radius <= 0:
            raise ValueError('dwell length and radius must be positive')

    @classmethod
    def from_dict(cls, data: dict[str, Any] | None) -> 'PipelineSettings':
        data = dict(data or {})
        kwargs = {}
        for key, attr in _KEYS.items():
            if key in data:
                kwargs[attr] = data.pop(key)
        if data:
            logger.warning('unused pipeline settings: %s', ', '.join(sorted(data)))
        return cls(**kwargs, extras=data)

    def with_overrides(self, **changes) -> 'PipelineSettings':
        """a copy with every non-None change applied"""
        changes = {k: v for k, v in changes.items() if v is not None}
        for k, v in changes.items():
            logger.info('pipeline setting %s overridden: %s -> %s', k, getattr(self, k), v)
        return replace(self, **changes)

    def to_dict(self) -> dict[str, Any]:
        return {key: getattr(self, attr) for key, attr in _KEYS.items()}
