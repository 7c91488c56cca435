"""
Fuchsian models - generator matrices in SL(2, R) for a surface group.

Models are loaded from JSON under content/data/ and checked on load: the
surface relation must hold up to sign and every short reduced word must be
hyperbolic.
"""

import itertools
import json
import logging
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, Optional, Tuple, Union

import numpy as np

from src.config import (BUILTIN_MODELS, DET_TOLERANCE, HYPERBOLIC_MARGIN,
                        MODEL_CHECK_WORD_LENGTH, RELATION_TOLERANCE)
from src.errors import InvariantViolation, NotHyperbolic, ParseError
from src.surface_group import SurfaceGroupPresentation, Word, format_word

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class MobiusMatrix:
    """[[a, b], [c, d]] with determinant 1 (relative to the entry scale)."""

    a: float
    b: float
    c: float
    d: float

    def __post_init__(self):
        scale = max(1.0, self.a * self.a + self.b * self.b + self.c * self.c + self.d * self.d)
        if abs(self.det - 1.0) > DET_TOLERANCE * scale:
            raise InvariantViolation(f"determinant {self.det!r} is not 1")

    @classmethod
    def identity(cls) -> "MobiusMatrix":
        return cls(1.0, 0.0, 0.0, 1.0)

    @classmethod
    def from_array(cls, m: np.ndarray) -> "MobiusMatrix":
        m = np.asarray(m, dtype=float).reshape(4)
        return cls(*(float(x) for x in m))

    @property
    def det(self) -> float:
        return self.a * self.d - self.b * self.c

    @property
    def trace(self) -> float:
        return self.a + self.d

    def as_array(self) -> np.ndarray:
        return np.array([self.a, self.b, self.c, self.d])

    def __matmul__(self, other: "MobiusMatrix") -> "MobiusMatrix":
        return MobiusMatrix(
            self.a * other.a + self.b * other.c,
            self.a * other.b + self.b * other.d,
            self.c * other.a + self.d * other.c,
            self.c * other.b + self.d * other.d,
        )

    def inverse(self) -> "MobiusMatrix":
        return MobiusMatrix(self.d, -self.b, -self.c, self.a)

    def is_plus_minus_identity(self, tol: float = RELATION_TOLERANCE) -> bool:
        return any(
            max(abs(self.a - s), abs(self.b), abs(self.c), abs(self.d - s)) <= tol
            for s in (1.0, -1.0)
        )

    def displacement_cosh(self) -> float:
        """cosh of the hyperbolic distance from i to M(i)."""
        return (self.a ** 2 + self.b ** 2 + self.c ** 2 + self.d ** 2) / 2.0


def translation_length(m: MobiusMatrix) -> float:
    tr = abs(m.trace)
    if tr <= 2.0 + HYPERBOLIC_MARGIN:
        raise NotHyperbolic(f"|trace| = {tr!r} is not hyperbolic")
    return 2.0 * math.acosh(tr / 2.0)


@dataclass(frozen=True)
class FuchsianModel:
    presentation: SurfaceGroupPresentation
    gen_matrices: Tuple[MobiusMatrix, ...]
    name: str = "custom"
    covering_radius_cosh: Optional[float] = None

    @property
    def genus(self) -> int:
        return self.presentation.genus

    def letter_matrices(self) -> np.ndarray:
        """Row-major matrices for every letter code, shape (4g, 4)."""
        out = []
        for m in self.gen_matrices:
            out.append(m.as_array())
            out.append(m.inverse().as_array())
        return np.array(out)

    def validate(self) -> None:
        relator = word_to_matrix(self, self.presentation.relator)
        if not relator.is_plus_minus_identity():
            raise InvariantViolation(f"{self.name}: relator maps to {relator}, not +-I")
        letters = range(2 * self.presentation.rank)
        for length in range(1, MODEL_CHECK_WORD_LENGTH + 1):
            for w in itertools.product(letters, repeat=length):
                if any(w[i + 1] == w[i] ^ 1 for i in range(length - 1)):
                    continue
                tr = abs(word_to_matrix(self, Word(w)).trace)
                if tr <= 2.0 + HYPERBOLIC_MARGIN:
                    raise NotHyperbolic(f"{self.name}: word {format_word(Word(w))} has |trace| {tr}")


def word_to_matrix(m: FuchsianModel, w: Word) -> MobiusMatrix:
    table = m.letter_matrices()
    acc = np.array([1.0, 0.0, 0.0, 1.0])
    for c in w.letters:
        x = table[c]
        acc = np.array([
            acc[0] * x[0] + acc[1] * x[2],
            acc[0] * x[1] + acc[1] * x[3],
            acc[2] * x[0] + acc[3] * x[2],
            acc[2] * x[1] + acc[3] * x[3],
        ])
    return MobiusMatrix.from_array(acc)


def load_model(source: Union[str, Path] = "bolza", validate: bool = True) -> FuchsianModel:
    """Load a built-in model by name, or a model JSON file by path."""
    path = BUILTIN_MODELS.get(str(source), Path(source))
    try:
        with open(path, "r", encoding="utf-8") as f:
            doc: Dict = json.load(f)
        genus = int(doc["genus"])
        names = [f"{letter}{i}" for i in range(1, genus + 1) for letter in "ab"]
        mats = tuple(MobiusMatrix(*map(float, doc["generators"][nm])) for nm in names)
    except (OSError, KeyError, ValueError, TypeError, json.JSONDecodeError) as exc:
        raise ParseError(f"cannot load Fuchsian model {source}: {exc}") from exc
    model = FuchsianModel(
        presentation=SurfaceGroupPresentation(genus),
        gen_matrices=mats,
        name=doc.get("name", path.stem),
        covering_radius_cosh=doc.get("covering_radius_cosh"),
    )
    if validate:
        model.validate()
        logger.debug("model %s validated", model.name)
    return model
