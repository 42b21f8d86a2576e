import threading
from dataclasses import dataclass
from enum import Enum
from typing import Any, Dict, List, Optional, Tuple

import numpy as np

from app.core.rng import StreamTag, derive_rng
from app.models.offspring import OffspringLaw


class ModelKind(str, Enum):
    SIBUYA_UNIFORM = "sibuya_uniform"
    FINITE_MIXTURE = "finite_mixture"


@dataclass(frozen=True)
class EnvironmentModel:
    """The law eta of an i.i.d. environment, plus the seed every stream is derived from."""

    kind: ModelKind
    base_seed: int
    alpha_min: Optional[float] = None
    alpha_max: Optional[float] = None
    laws: Tuple[OffspringLaw, ...] = ()
    probs: Tuple[float, ...] = ()

    def draw_law(self, rng: np.random.Generator) -> OffspringLaw:
        if self.kind == ModelKind.SIBUYA_UNIFORM:
            if self.alpha_min == self.alpha_max:
                return OffspringLaw.sibuya(self.alpha_min)
            return OffspringLaw.sibuya(rng.uniform(self.alpha_min, self.alpha_max))
        if len(self.laws) == 1:
            return self.laws[0]
        return self.laws[int(rng.choice(len(self.laws), p=np.asarray(self.probs)))]

    def candidate_laws(self) -> Tuple[OffspringLaw, ...]:
        """Laws a mixture can realize; empty for continuous models."""
        return self.laws

    def to_params(self) -> Dict[str, Any]:
        if self.kind == ModelKind.SIBUYA_UNIFORM:
            return {"kind": self.kind.value, "alpha_min": self.alpha_min, "alpha_max": self.alpha_max}
        params = {
            "kind": self.kind.value,
            "laws": [law.to_params() for law in self.laws],
            "probs": list(self.probs),
        }
        if any(not law.strict for law in self.laws):
            params["relax_assumptions"] = True
        return params


class _LawStream:
    """Lazily realized law sequence of one replicate; extension is lock-protected."""

    def __init__(self, model: EnvironmentModel, replicate_index: int):
        self.model = model
        self.replicate_index = replicate_index
        self._laws: Dict[int, OffspringLaw] = {}
        self._lock = threading.Lock()

    def law(self, position: int) -> OffspringLaw:
        law = self._laws.get(position)
        if law is not None:
            return law
        with self._lock:
            law = self._laws.get(position)
            if law is None:
                rng = derive_rng(self.model.base_seed, StreamTag.ENVIRONMENT, self.replicate_index, position)
                law = self.model.draw_law(rng)
                self._laws[position] = law
            return law

    def max_position(self) -> int:
        return max(self._laws) if self._laws else -1

    def __getstate__(self):
        return {"model": self.model, "replicate_index": self.replicate_index, "laws": dict(self._laws)}

    def __setstate__(self, state):
        self.model = state["model"]
        self.replicate_index = state["replicate_index"]
        self._laws = state["laws"]
        self._lock = threading.Lock()


class Environment:
    """
    A realized environment xi_bar = (xi_0, xi_1, ...) seen from a shift offset.

    law_at(i) depends only on (base_seed, replicate_index, shift_offset + i);
    shifted views share the realized prefix of their parent.
    """

    def __init__(self, stream: _LawStream, shift_offset: int = 0):
        self._stream = stream
        self.shift_offset = shift_offset

    @classmethod
    def create(cls, model: EnvironmentModel, replicate_index: int) -> "Environment":
        return cls(_LawStream(model, replicate_index))

    @classmethod
    def constant(cls, law: OffspringLaw, base_seed: int = 0) -> "Environment":
        """Deterministic environment repeating a single law."""
        model = EnvironmentModel(ModelKind.FINITE_MIXTURE, base_seed, laws=(law,), probs=(1.0,))
        return cls.create(model, 0)

    @classmethod
    def from_laws(cls, laws: List[OffspringLaw], tail: Optional[OffspringLaw] = None) -> "Environment":
        """Environment with a prescribed prefix; positions past the prefix repeat `tail` (or the last law)."""
        tail = tail or laws[-1]
        model = EnvironmentModel(ModelKind.FINITE_MIXTURE, 0, laws=(tail,), probs=(1.0,))
        stream = _LawStream(model, 0)
        for i, law in enumerate(laws):
            stream._laws[i] = law
        return cls(stream)

    @property
    def model(self) -> EnvironmentModel:
        return self._stream.model

    @property
    def replicate_index(self) -> int:
        return self._stream.replicate_index

    def law_at(self, i: int) -> OffspringLaw:
        return self._stream.law(self.shift_offset + i)

    def laws(self, n: int) -> List[OffspringLaw]:
        return [self.law_at(i) for i in range(n)]

    def shift(self, k: int) -> "Environment":
        if k < 0:
            raise ValueError(f"shift requires k >= 0, got {k}")
        return Environment(self._stream, self.shift_offset + k)

    def materialize(self, n: int) -> "Environment":
        """Realize the first n laws eagerly (before sharing across threads)."""
        self.laws(n)
        return self

    def realized_prefix(self) -> List[OffspringLaw]:
        """Absolute positions 0..max touched, independent of the shift offset."""
        return [self._stream.law(i) for i in range(self._stream.max_position() + 1)]

    def alphas(self, n: int) -> List[Optional[float]]:
        return [law.alpha for law in self.laws(n)]
