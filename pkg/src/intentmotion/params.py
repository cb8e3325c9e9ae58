"""Flat float64 parameter storage with named, shaped views."""
from __future__ import annotations

import hashlib
from collections import OrderedDict

import numpy as np


class Weights:
    """All parameters of one network in a single contiguous vector.

    ``weights["fc_in.weight"]`` is a writable view into ``weights.flat``, so an
    optimizer can update either the views or the flat vector.
    """

    def __init__(self, kind, config, specs, flat=None):
        self.kind = kind
        self.config = config
        self.specs = OrderedDict((name, tuple(shape)) for name, shape in specs)
        total = sum(int(np.prod(s)) for s in self.specs.values())
        if flat is None:
            flat = np.zeros(total, dtype=np.float64)
        flat = np.ascontiguousarray(flat, dtype=np.float64)
        if flat.shape != (total,):
            raise ValueError(f"flat vector has {flat.size} entries, layout needs {total}")
        self.flat = flat
        self._views = OrderedDict()
        offset = 0
        for name, shape in self.specs.items():
            n = int(np.prod(shape))
            self._views[name] = flat[offset:offset + n].reshape(shape)
            offset += n

    def __getitem__(self, name):
        return self._views[name]

    def __setitem__(self, name, value):
        self._views[name][...] = value

    def __contains__(self, name):
        return name in self._views

    def __iter__(self):
        return iter(self._views)

    def items(self):
        return self._views.items()

    def names(self):
        return list(self._views)

    def copy(self):
        return Weights(self.kind, self.config, self.specs.items(), self.flat.copy())

    def as_dict(self):
        return {k: v.copy() for k, v in self._views.items()}

    def checksum(self):
        return hashlib.sha256(self.flat.tobytes()).hexdigest()

    def all_finite(self):
        return bool(np.all(np.isfinite(self.flat)))

    def __len__(self):
        return self.flat.size


def xavier_uniform(rng, fan_in, fan_out, shape, gain=1.0):
    limit = gain * np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=shape)
