from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field

from ..ingest import ValidationError

METHODS = ("graph2vec", "gl2vec", "ldp", "sf", "netlsd", "fgsd", "feather", "wavelet")
STRUCTURAL = ("ldp", "sf", "netlsd", "fgsd", "feather", "wavelet")

# Per-method defaults; anything not listed falls back to the dataclass default.
_DEFAULTS = {
    "graph2vec": {"dimensions": 128},
    "gl2vec": {"dimensions": 128},
    "wavelet": {"eval_points": 5},
    "ldp": {"bins": 32},
    "feather": {"eval_points": 25},
    "netlsd": {},
    "sf": {"dimensions": 128},
    "fgsd": {"bins": 200},
}


@dataclass
class EmbedderConfig:
    method: str = "fgsd"
    dimensions: int | None = None
    seed: int = 0
    # Weisfeiler-Lehman / doc2vec
    wl_iterations: int = 2
    wl_initial: str = "degree"
    epochs: int = 10
    learning_rate: float = 0.025
    min_learning_rate: float = 0.0001
    negative: int = 5
    min_count: int = 1
    # characteristic-function embedders
    theta_max: float = 2.5
    eval_points: int | None = None
    tau: float = 1.0
    feather_order: int = 5
    wavelet_pools: int = 50
    # histograms
    bins: int | None = None
    fgsd_range: tuple[float, float] = (0.0, 20.0)
    # netlsd
    time_steps: int = 250
    time_range: tuple[float, float] = (1e-2, 1e2)
    eig_approx: int = 200
    exact_spectrum: bool = True
    # spectral methods read edge weights unless this is set
    force_unweighted: bool = False
    workers: int = 1
    extra: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValidationError(f"unknown embedder {self.method!r}; expected one of {METHODS}")
        for key, value in _DEFAULTS[self.method].items():
            if key != "dimensions" and getattr(self, key) is None:
                setattr(self, key, value)
        if self.eval_points is None:
            self.eval_points = 25
        if self.bins is None:
            self.bins = 32 if self.method == "ldp" else 200
        self.fgsd_range = tuple(self.fgsd_range)
        self.time_range = tuple(self.time_range)
        expected = self._derived_dimensions()
        if self.dimensions is None:
            self.dimensions = expected
        elif expected is not None and self.dimensions != expected:
            raise ValidationError(
                f"{self.method}: dimensions={self.dimensions} disagrees with its "
                f"parameters, which give {expected}"
            )
        if self.dimensions is None or self.dimensions <= 0:
            raise ValidationError("dimensions must be positive")
        if self.wl_initial not in ("degree", "concept"):
            raise ValidationError("wl_initial must be 'degree' or 'concept'")

    def _derived_dimensions(self) -> int | None:
        m = self.method
        if m in ("graph2vec", "gl2vec", "sf"):
            return self.dimensions or _DEFAULTS[m]["dimensions"]
        if m == "ldp":
            return 5 * self.bins
        if m == "fgsd":
            return self.bins
        if m == "netlsd":
            return self.time_steps
        if m == "feather":
            return 2 * self.feather_order * self.eval_points * 2
        if m == "wavelet":
            return 2 * 2 * self.eval_points * self.wavelet_pools
        return None

    @property
    def use_weights(self) -> bool:
        return not self.force_unweighted

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["fgsd_range"] = list(self.fgsd_range)
        d["time_range"] = list(self.time_range)
        return d

    @classmethod
    def from_dict(cls, obj: dict) -> "EmbedderConfig":
        names = {f.name for f in dataclasses.fields(cls)}
        unknown = set(obj) - names
        if unknown:
            raise ValidationError(f"unknown embedder config keys: {sorted(unknown)}")
        return cls(**obj)
