"""Parameter sets for every PLSA formulation.

Shapes used throughout the package::

    phi          (T, V)   P(w|z), row k is topic k
    theta        (D, T)   P(z|d)
    p_d          (D,)     P(d)
    p_z          (T,)     P(z)
    p_d_given_z  (T, D)   P(d|z)
    p_w_bg       (V,)     background unigram P(w|theta_B)

Models are immutable: arrays are copied on construction and marked
read-only, and every EM update returns a new instance.
"""

from __future__ import annotations

import enum
import json
import math
from dataclasses import dataclass
from typing import Optional, Union

import numpy as np

from .errors import ConversionError, ValidationError

FORMAT_NAME = "plsa-model"
FORMAT_VERSION = 1

INIT_EPS = 1e-8
# Construction-time tolerance and the looser one used after EM updates.
STRICT_TOL = 1e-12
UPDATE_TOL = 1e-9


class Formulation(str, enum.Enum):
    MODERN = "modern"
    F1 = "f1"
    F2 = "f2"
    BG_F1 = "bg_f1"
    BG_F2 = "bg_f2"

    @classmethod
    def parse(cls, value) -> "Formulation":
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).lower().replace("-", "_"))
        except ValueError:
            choices = ", ".join(f.cli_name for f in cls)
            raise ValidationError(f"unknown formulation {value!r}; choose one of {choices}") from None

    @property
    def is_background(self) -> bool:
        return self in (Formulation.BG_F1, Formulation.BG_F2)

    @property
    def cli_name(self) -> str:
        return self.value.replace("_", "-")


def _frozen(a, ndim, name):
    arr = np.array(a, dtype=np.float64)
    if arr.ndim != ndim:
        raise ValidationError(f"{name} must be {ndim}-D, got shape {arr.shape}")
    if arr.size == 0 or 0 in arr.shape:
        raise ValidationError(f"{name} has a zero dimension: shape {arr.shape}")
    arr.setflags(write=False)
    return arr


def check_stochastic(a, name, tol=STRICT_TOL):
    """Raise ValidationError unless every row of ``a`` is a distribution."""
    a = np.asarray(a)
    if not np.all(np.isfinite(a)):
        raise ValidationError(f"{name} contains non-finite values")
    if np.any(a < 0) or np.any(a > 1):
        raise ValidationError(f"{name} has entries outside [0, 1]")
    sums = a.sum(axis=-1)
    bad = np.abs(sums - 1.0) > tol
    if np.any(bad):
        idx = np.flatnonzero(np.atleast_1d(bad))[0]
        s = float(np.atleast_1d(sums)[idx])
        where = f"row {idx} of {name}" if a.ndim > 1 else name
        raise ValidationError(f"{where} sums to {s!r}, not 1 (tol {tol:g})")


@dataclass(frozen=True, eq=False)
class ModelF1:
    """P(d,w) = P(d) sum_z P(w|z) P(z|d).

    With ``modern=True`` the same parameters describe the token-level view,
    whose likelihood has no document prior; ``p_d`` is then carried but
    unused by the likelihood.
    """

    phi: np.ndarray
    theta: np.ndarray
    p_d: np.ndarray
    modern: bool = False

    def __post_init__(self):
        object.__setattr__(self, "phi", _frozen(self.phi, 2, "phi"))
        object.__setattr__(self, "theta", _frozen(self.theta, 2, "theta"))
        object.__setattr__(self, "p_d", _frozen(self.p_d, 1, "p_d"))
        if self.theta.shape[1] != self.phi.shape[0]:
            raise ValidationError(f"theta has {self.theta.shape[1]} topics, phi has {self.phi.shape[0]}")
        if self.p_d.shape[0] != self.theta.shape[0]:
            raise ValidationError(f"p_d has length {self.p_d.shape[0]}, theta has {self.theta.shape[0]} rows")
        self.validate(UPDATE_TOL)

    @property
    def formulation(self) -> Formulation:
        return Formulation.MODERN if self.modern else Formulation.F1

    T = property(lambda self: self.phi.shape[0])
    V = property(lambda self: self.phi.shape[1])
    D = property(lambda self: self.theta.shape[0])

    def validate(self, tol=STRICT_TOL):
        check_stochastic(self.phi, "phi", tol)
        check_stochastic(self.theta, "theta", tol)
        check_stochastic(self.p_d, "p_d", tol)

    def joint(self) -> np.ndarray:
        """Dense (D, V) matrix of P(d,w); the modern view omits P(d)."""
        mix = self.theta @ self.phi
        return mix if self.modern else self.p_d[:, None] * mix

    def __eq__(self, other):
        return (
            isinstance(other, ModelF1)
            and self.modern == other.modern
            and _same(self.phi, other.phi)
            and _same(self.theta, other.theta)
            and _same(self.p_d, other.p_d)
        )


@dataclass(frozen=True, eq=False)
class ModelF2:
    """P(d,w) = sum_z P(w|z) P(d|z) P(z)."""

    phi: np.ndarray
    p_z: np.ndarray
    p_d_given_z: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "phi", _frozen(self.phi, 2, "phi"))
        object.__setattr__(self, "p_z", _frozen(self.p_z, 1, "p_z"))
        object.__setattr__(self, "p_d_given_z", _frozen(self.p_d_given_z, 2, "p_d_given_z"))
        T = self.phi.shape[0]
        if self.p_z.shape[0] != T or self.p_d_given_z.shape[0] != T:
            raise ValidationError(
                f"topic count mismatch: phi {T}, p_z {self.p_z.shape[0]}, p_d_given_z {self.p_d_given_z.shape[0]}"
            )
        self.validate(UPDATE_TOL)

    formulation = property(lambda self: Formulation.F2)
    T = property(lambda self: self.phi.shape[0])
    V = property(lambda self: self.phi.shape[1])
    D = property(lambda self: self.p_d_given_z.shape[1])

    def validate(self, tol=STRICT_TOL):
        check_stochastic(self.phi, "phi", tol)
        check_stochastic(self.p_z, "p_z", tol)
        check_stochastic(self.p_d_given_z, "p_d_given_z", tol)

    def joint(self) -> np.ndarray:
        return (self.p_d_given_z.T * self.p_z) @ self.phi

    def __eq__(self, other):
        return (
            isinstance(other, ModelF2)
            and _same(self.phi, other.phi)
            and _same(self.p_z, other.p_z)
            and _same(self.p_d_given_z, other.p_d_given_z)
        )


@dataclass(frozen=True, eq=False)
class BackgroundMixture:
    """lambda_b * P(w|theta_B) + (1 - lambda_b) * (topic joint of ``base``).

    ``p_w_bg`` stays ``None`` until filled from corpus term frequencies.
    """

    base: Union[ModelF1, ModelF2]
    lambda_b: float
    p_w_bg: Optional[np.ndarray] = None

    def __post_init__(self):
        if not isinstance(self.base, (ModelF1, ModelF2)) or getattr(self.base, "modern", False):
            raise ValidationError("background base must be a Formulation 1 or Formulation 2 model")
        lam = float(self.lambda_b)
        if not (0.0 <= lam <= 1.0):
            raise ValidationError(f"lambda_b must lie in [0, 1], got {self.lambda_b!r}")
        object.__setattr__(self, "lambda_b", lam)
        if self.p_w_bg is not None:
            bg = _frozen(self.p_w_bg, 1, "p_w_bg")
            if bg.shape[0] != self.base.V:
                raise ValidationError(f"p_w_bg has length {bg.shape[0]}, vocabulary has {self.base.V}")
            check_stochastic(bg, "p_w_bg", UPDATE_TOL)
            object.__setattr__(self, "p_w_bg", bg)

    @property
    def formulation(self) -> Formulation:
        return Formulation.BG_F1 if isinstance(self.base, ModelF1) else Formulation.BG_F2

    T = property(lambda self: self.base.T)
    V = property(lambda self: self.base.V)
    D = property(lambda self: self.base.D)
    phi = property(lambda self: self.base.phi)

    def validate(self, tol=STRICT_TOL):
        self.base.validate(tol)
        if self.p_w_bg is not None:
            check_stochastic(self.p_w_bg, "p_w_bg", tol)

    def with_background(self, p_w_bg) -> "BackgroundMixture":
        return BackgroundMixture(self.base, self.lambda_b, p_w_bg)

    def joint(self) -> np.ndarray:
        if self.p_w_bg is None:
            raise ValidationError("background unigram not set")
        return self.lambda_b * self.p_w_bg[None, :] + (1.0 - self.lambda_b) * self.base.joint()

    def __eq__(self, other):
        return (
            isinstance(other, BackgroundMixture)
            and self.lambda_b == other.lambda_b
            and self.base == other.base
            and ((self.p_w_bg is None and other.p_w_bg is None)
                 or (self.p_w_bg is not None and other.p_w_bg is not None and _same(self.p_w_bg, other.p_w_bg)))
        )


Model = Union[ModelF1, ModelF2, BackgroundMixture]


def _same(a, b):
    return a.shape == b.shape and np.array_equal(a, b)


def _random_rows(rng, shape, eps):
    # 1 - U maps [0, 1) onto (0, 1]; affine map lands in (eps, 1].
    x = eps + (1.0 - eps) * (1.0 - rng.random(shape))
    return x / x.sum(axis=-1, keepdims=True)


def init_random(D, V, T, seed, formulation="modern", lambda_b=None, eps=INIT_EPS) -> Model:
    """Seeded random model of the requested formulation.

    Every stochastic vector is drawn entrywise from (eps, 1] and normalized.
    The topic-word matrix is drawn first, so F1/background-F1 (and F2 /
    background-F2) models built from the same seed share their parameters.
    P(d) starts uniform; the background unigram is left unset.
    """
    form = Formulation.parse(formulation)
    for name, n in (("D", D), ("V", V), ("T", T)):
        if int(n) != n or n < 1:
            raise ValidationError(f"{name} must be a positive integer, got {n!r}")
    if form.is_background:
        if lambda_b is None:
            raise ValidationError(f"formulation {form.cli_name} requires lambda_b")
        if not (0.0 <= float(lambda_b) <= 1.0):
            raise ValidationError(f"lambda_b must lie in [0, 1], got {lambda_b!r}")
    elif lambda_b is not None:
        raise ValidationError(f"lambda_b is only valid for background formulations, not {form.cli_name}")

    rng = np.random.default_rng(seed)
    phi = _random_rows(rng, (T, V), eps)
    if form in (Formulation.F2, Formulation.BG_F2):
        p_z = _random_rows(rng, (T,), eps)
        p_d_given_z = _random_rows(rng, (T, D), eps)
        base = ModelF2(phi, p_z, p_d_given_z)
    else:
        theta = _random_rows(rng, (D, T), eps)
        base = ModelF1(phi, theta, np.full(D, 1.0 / D), modern=form is Formulation.MODERN)
    model = BackgroundMixture(base, lambda_b) if form.is_background else base
    model.validate(STRICT_TOL)
    return model


def f1_to_f2(m: ModelF1) -> ModelF2:
    """Re-express a Formulation 1 model via Bayes' rule.

    P(z) = sum_d P(z|d) P(d) and P(d|z) = P(z|d) P(d) / P(z).
    """
    joint_dz = m.theta * m.p_d[:, None]
    p_z = joint_dz.sum(axis=0)
    dead = np.flatnonzero(p_z <= 0)
    if dead.size:
        raise ConversionError(f"topic {int(dead[0])} has P(z) = 0; P(d|z) is undefined")
    return ModelF2(m.phi, p_z, (joint_dz / p_z).T)


def f2_to_f1(m: ModelF2) -> ModelF1:
    """Inverse of :func:`f1_to_f2`: P(d) = sum_z P(d|z)P(z), P(z|d) = P(d|z)P(z)/P(d)."""
    joint_dz = (m.p_d_given_z * m.p_z[:, None]).T
    p_d = joint_dz.sum(axis=1)
    dead = np.flatnonzero(p_d <= 0)
    if dead.size:
        raise ConversionError(f"document {int(dead[0])} has P(d) = 0; P(z|d) is undefined")
    return ModelF1(m.phi, joint_dz / p_d[:, None], p_d)


# -- serialization ---------------------------------------------------------

def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def _matrix_json(a: np.ndarray, indent: str) -> str:
    if a.ndim == 1:
        return "[" + ", ".join(_fmt(x) for x in a) + "]"
    rows = [indent + "  " + _matrix_json(r, indent) for r in a]
    return "[\n" + ",\n".join(rows) + "\n" + indent + "]"


def dumps_model(model: Model) -> str:
    """Serialize to a JSON document with 17-significant-digit floats."""
    form = model.formulation
    base = model.base if isinstance(model, BackgroundMixture) else model
    fields = [
        ("format", json.dumps(FORMAT_NAME)),
        ("version", str(FORMAT_VERSION)),
        ("formulation", json.dumps(form.value)),
        ("D", str(model.D)),
        ("V", str(model.V)),
        ("T", str(model.T)),
    ]
    if isinstance(model, BackgroundMixture):
        fields.append(("lambda_b", _fmt(model.lambda_b)))
    fields.append(("phi", _matrix_json(base.phi, "  ")))
    if isinstance(base, ModelF1):
        fields.append(("theta", _matrix_json(base.theta, "  ")))
        fields.append(("p_d", _matrix_json(base.p_d, "  ")))
    else:
        fields.append(("p_z", _matrix_json(base.p_z, "  ")))
        fields.append(("p_d_given_z", _matrix_json(base.p_d_given_z, "  ")))
    if isinstance(model, BackgroundMixture) and model.p_w_bg is not None:
        fields.append(("p_w_bg", _matrix_json(model.p_w_bg, "  ")))
    return "{\n" + ",\n".join(f'  "{k}": {v}' for k, v in fields) + "\n}\n"


def _array(doc, key, shape):
    if key not in doc:
        raise ValidationError(f"model file lacks field {key!r}")
    try:
        a = np.array(doc[key], dtype=np.float64)
    except (TypeError, ValueError):
        raise ValidationError(f"field {key!r} is not a numeric array") from None
    if a.shape != shape:
        raise ValidationError(f"field {key!r} has shape {a.shape}, header implies {shape}")
    return a


def loads_model(text: str) -> Model:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as e:
        raise ValidationError(f"model file is not valid JSON: {e}") from None
    if not isinstance(doc, dict) or doc.get("format") != FORMAT_NAME:
        raise ValidationError("not a plsa model file")
    if doc.get("version") != FORMAT_VERSION:
        raise ValidationError(f"unsupported model file version {doc.get('version')!r} (expected {FORMAT_VERSION})")
    form = Formulation.parse(doc.get("formulation"))
    dims = []
    for key in ("D", "V", "T"):
        n = doc.get(key)
        if not isinstance(n, int) or isinstance(n, bool) or n < 1:
            raise ValidationError(f"dimension {key} must be a positive integer, got {n!r}")
        dims.append(n)
    D, V, T = dims
    phi = _array(doc, "phi", (T, V))
    if form in (Formulation.F2, Formulation.BG_F2):
        base = ModelF2(phi, _array(doc, "p_z", (T,)), _array(doc, "p_d_given_z", (T, D)))
    else:
        base = ModelF1(phi, _array(doc, "theta", (D, T)), _array(doc, "p_d", (D,)),
                       modern=form is Formulation.MODERN)
    if not form.is_background:
        return base
    lam = doc.get("lambda_b")
    if not isinstance(lam, (int, float)) or isinstance(lam, bool) or not math.isfinite(lam):
        raise ValidationError(f"lambda_b must be a number, got {lam!r}")
    bg = _array(doc, "p_w_bg", (V,)) if "p_w_bg" in doc else None
    return BackgroundMixture(base, lam, bg)


def save_model(model: Model, path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        f.write(dumps_model(model))


def load_model(path) -> Model:
    with open(path, "r", encoding="utf-8") as f:
        return loads_model(f.read())
