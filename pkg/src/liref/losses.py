"""Loss family for light-field synthesis: view-wise errors and refocus-domain errors.

Four families, each in an L1 (``p=1``) and an L2 (``p=2``) flavor:

* ``vwe``    - sum over all views of the per-view mean error. A plain sum,
  not a mean over views.
* ``ucrie``  - average refocused-image error over a continuous range of
  refocus parameters, evaluated by trapezoidal quadrature.
* ``crie``   - as ``ucrie`` but with a Gaussian weight ``exp(-r^2)`` over
  the refocus parameter, which trades the oscillatory sinc behavior of the
  unweighted integral for a smooth non-negative spectral weight.
* ``rie``    - the practical discretization: a Gaussian-weighted sum of
  refocused errors over a uniform grid of refocus parameters. This is the
  regularizer used for synthesis, combined as ``vwe + lambda * rie``.

Per-view errors are per-sample means (``1/(H*W*C)``), so loss magnitudes
are resolution invariant; the spectral cross-check module carries the
matching constants explicitly. Analytic gradients with respect to the
predicted field are provided for every family and both shift engines.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field, replace

import numpy as np

from .lightfield import LightField, View
from .refocus import DEFAULT_ENGINE, Refocuser, RefocusSpec, ShiftEngine, refocus_adjoint

KINDS = ("vwe", "ucrie", "crie", "rie", "vwe+rie")
WEIGHT_CONVENTIONS = ("physical", "index")

DEFAULT_D_MAX = 2.5
DEFAULT_STEP = 0.25
DEFAULT_CRIE_R_MAX = 4.0


def _check_multiple(num: float, den: float, what: str) -> int:
    ratio = num / den
    k = round(ratio)
    if k < 1 or abs(ratio - k) > 1e-9:
        raise ValueError(f"{what}: {num} is not a positive integer multiple of {den}")
    return k


@dataclass(frozen=True)
class RieParams:
    """Parameters of the discrete refocus-domain error.

    ``d_max`` is the largest refocus magnitude considered, ``step`` the
    grid spacing, so nodes sit at ``step * k`` for ``k`` in
    ``[-d_max/step, d_max/step]``. The Gaussian weight is applied to the
    physical refocus value ``step * k`` under the default ``physical``
    convention, or to the bare index ``k`` under the literal ``index``
    convention (which effectively zeroes nodes beyond ``|k| ~ 3`` no matter
    the step; both are available and every report records the choice).
    """

    d_max: float = DEFAULT_D_MAX
    step: float = DEFAULT_STEP
    weight_convention: str = "physical"
    engine: ShiftEngine = DEFAULT_ENGINE

    def __post_init__(self):
        if self.d_max <= 0 or self.step <= 0:
            raise ValueError("d_max and step must be positive")
        _check_multiple(self.d_max, self.step, "rie grid")
        if self.weight_convention not in WEIGHT_CONVENTIONS:
            raise ValueError(f"unknown weight convention {self.weight_convention!r}")

    @property
    def half_count(self) -> int:
        return round(self.d_max / self.step)

    def weights(self) -> np.ndarray:
        """Gaussian node weights for ``k = -d_max/step .. d_max/step``."""
        k = np.arange(-self.half_count, self.half_count + 1, dtype=np.float64)
        arg = self.step * k if self.weight_convention == "physical" else k
        return np.exp(-arg * arg)

    def nodes(self) -> np.ndarray:
        k = np.arange(-self.half_count, self.half_count + 1, dtype=np.float64)
        return self.step * k


@dataclass(frozen=True)
class LossSpec:
    """A fully pinned-down loss configuration.

    ``rie_weight`` only participates when ``kind == "vwe+rie"``.
    ``q`` is the quadrature step for the continuous families and
    ``crie_r_max`` their Gaussian truncation radius (the tail beyond 3 is
    negligible; 4 keeps it below 1e-7 of the weight).
    """

    p: int = 2
    kind: str = "vwe+rie"
    rie_weight: float = 1.0
    rie: RieParams = field(default_factory=RieParams)
    q: float = 0.01
    crie_r_max: float = DEFAULT_CRIE_R_MAX

    def __post_init__(self):
        if self.p not in (1, 2):
            raise ValueError(f"norm p must be 1 or 2, got {self.p}")
        if self.kind not in KINDS:
            raise ValueError(f"unknown loss kind {self.kind!r}")
        if self.rie_weight < 0:
            raise ValueError("rie_weight must be non-negative")
        if self.kind in ("ucrie", "crie"):
            if self.q <= 0:
                raise ValueError("quadrature step must be positive")
        if self.kind == "crie" and self.crie_r_max < 3:
            raise ValueError("crie truncation radius must be at least 3")

    @property
    def token(self) -> str:
        if self.kind == "vwe+rie":
            return f"vwe{self.p}+rie{self.p}"
        return f"{self.kind}{self.p}"


def parse_config_token(token: str, rie: RieParams | None = None,
                       rie_weight: float = 1.0) -> LossSpec:
    """Parse a compact configuration name such as ``vwe2`` or ``vwe1+rie1``."""
    rie = rie if rie is not None else RieParams()
    t = token.strip().lower()
    m_combo = re.fullmatch(r"vwe([12])\+rie([12])", t)
    if m_combo:
        if m_combo.group(1) != m_combo.group(2):
            raise ValueError(f"mismatched norms in combined loss token {token!r}")
        return LossSpec(p=int(m_combo.group(1)), kind="vwe+rie", rie=rie, rie_weight=rie_weight)
    m = re.fullmatch(r"(vwe|ucrie|crie|rie)([12])", t)
    if m is None:
        raise ValueError(f"unrecognized loss configuration token {token!r}")
    return LossSpec(p=int(m.group(2)), kind=m.group(1), rie=rie, rie_weight=rie_weight)


def serialize_loss_spec(spec: LossSpec) -> str:
    """Render a loss spec as the plain-text key-value block used in manifests."""
    engine = spec.rie.engine
    engine_name = "spectral" if engine.is_spectral else f"bilinear-{engine.boundary}"
    lines = [
        f"kind={spec.token}",
        f"D={spec.rie.d_max:g}",
        f"s={spec.rie.step:g}",
        f"lambda={spec.rie_weight:g}",
        f"convention={spec.rie.weight_convention}",
        f"engine={engine_name}",
    ]
    if spec.kind in ("ucrie", "crie"):
        lines.append(f"q={spec.q:g}")
    return "\n".join(lines) + "\n"


def parse_loss_spec(text: str) -> LossSpec:
    """Inverse of :func:`serialize_loss_spec`."""
    fields: dict[str, str] = {}
    for line in text.splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        key, _, value = line.partition("=")
        fields[key.strip()] = value.strip()
    unknown = set(fields) - {"kind", "D", "s", "lambda", "convention", "engine", "q"}
    if unknown:
        raise ValueError(f"unknown loss spec keys: {sorted(unknown)}")
    if "kind" not in fields:
        raise ValueError("loss spec needs a kind")
    engine_name = fields.get("engine", "spectral")
    if engine_name == "spectral":
        engine = ShiftEngine.spectral()
    elif engine_name.startswith("bilinear-"):
        engine = ShiftEngine.bilinear(engine_name.removeprefix("bilinear-"))
    else:
        raise ValueError(f"unknown engine {engine_name!r}")
    rie = RieParams(
        d_max=float(fields.get("D", DEFAULT_D_MAX)),
        step=float(fields.get("s", DEFAULT_STEP)),
        weight_convention=fields.get("convention", "physical"),
        engine=engine,
    )
    spec = parse_config_token(fields["kind"], rie=rie, rie_weight=float(fields.get("lambda", 1.0)))
    if "q" in fields:
        spec = replace(spec, q=float(fields["q"]))
    return spec


def _image_of(x: np.ndarray | View) -> np.ndarray:
    img = x.data if isinstance(x, View) else np.asarray(x, dtype=np.float64)
    if img.ndim == 2:
        img = img[:, :, None]
    return img


def _samples_of(x: LightField | np.ndarray) -> np.ndarray:
    return x.samples if isinstance(x, LightField) else np.asarray(x, dtype=np.float64)


def _norm_value(diff: np.ndarray, p: int) -> float:
    if p == 1:
        return float(np.mean(np.abs(diff)))
    return float(np.mean(diff * diff))


def _norm_gradient(diff: np.ndarray, p: int) -> np.ndarray:
    """Pointwise derivative of the per-sample mean error w.r.t. its first argument."""
    m = diff.size
    if p == 1:
        return np.sign(diff) / m  # subgradient 0 at exact zeros
    return (2.0 / m) * diff


def base_error(a: np.ndarray | View, b: np.ndarray | View, p: int = 2) -> float:
    """Per-sample mean absolute (p=1) or squared (p=2) difference of two images."""
    if p not in (1, 2):
        raise ValueError("norm p must be 1 or 2")
    x, y = _image_of(a), _image_of(b)
    if x.shape != y.shape:
        raise ValueError(f"image shapes differ: {x.shape} vs {y.shape}")
    return _norm_value(x - y, p)


def vwe(pred: LightField | np.ndarray, gt: LightField | np.ndarray, p: int = 2) -> float:
    """Sum over all views of the per-view mean error (a sum, not a mean)."""
    x, y = _samples_of(pred), _samples_of(gt)
    if x.shape != y.shape:
        raise ValueError(f"light field shapes differ: {x.shape} vs {y.shape}")
    diff = x - y
    grid = x.shape[0] * x.shape[1]
    if p == 1:
        return float(np.sum(np.abs(diff)) / (diff.size / grid))
    return float(np.sum(diff * diff) / (diff.size / grid))


def _trapezoid(bound: float, q: float) -> tuple[np.ndarray, np.ndarray]:
    """Nodes and integration weights of the composite trapezoid rule on [-bound, bound]."""
    steps = _check_multiple(2.0 * bound, q, "quadrature")
    nodes = -bound + q * np.arange(steps + 1, dtype=np.float64)
    weights = np.full(steps + 1, q)
    weights[0] = weights[-1] = 0.5 * q
    return nodes, weights


def _refocused_errors(pred, gt, nodes: np.ndarray, p: int, engine: ShiftEngine,
                      chunk: int = 128) -> np.ndarray:
    """Per-node error between the two refocused fields, for a batch of refocus values."""
    x, y = _samples_of(pred), _samples_of(gt)
    if x.shape != y.shape:
        raise ValueError(f"light field shapes differ: {x.shape} vs {y.shape}")
    rp, rg = Refocuser(x, engine), Refocuser(y, engine)
    out = np.empty(len(nodes))
    for start in range(0, len(nodes), chunk):
        rs = nodes[start:start + chunk]
        diff = rp.refocus_many(rs) - rg.refocus_many(rs)
        if p == 1:
            out[start:start + len(rs)] = np.mean(np.abs(diff), axis=(1, 2, 3))
        else:
            out[start:start + len(rs)] = np.mean(diff * diff, axis=(1, 2, 3))
    return out


def ucrie(pred: LightField | np.ndarray, gt: LightField | np.ndarray, p: int = 2,
          d_max: float = DEFAULT_D_MAX, q: float = 0.01,
          engine: ShiftEngine = DEFAULT_ENGINE) -> float:
    """Mean refocused error over ``r in [-d_max, d_max]`` by trapezoidal quadrature."""
    if q <= 0:
        raise ValueError("quadrature step must be positive")
    nodes, weights = _trapezoid(d_max, q)
    errors = _refocused_errors(pred, gt, nodes, p, engine)
    return float(np.sum(weights * errors) / (2.0 * d_max))


def crie(pred: LightField | np.ndarray, gt: LightField | np.ndarray, p: int = 2,
         d_max: float = DEFAULT_D_MAX, r_max: float = DEFAULT_CRIE_R_MAX, q: float = 0.01,
         engine: ShiftEngine = DEFAULT_ENGINE) -> float:
    """Gaussian-weighted refocused error, truncated to ``[-r_max, r_max]``.

    The ``1/(2*d_max)`` prefactor is kept from the discrete-grid convention
    so the continuous and discrete families share a scale; ``r_max >= 3``
    keeps the discarded Gaussian tail negligible.
    """
    if q <= 0:
        raise ValueError("quadrature step must be positive")
    if r_max < 3:
        raise ValueError("crie truncation radius must be at least 3")
    nodes, weights = _trapezoid(r_max, q)
    errors = _refocused_errors(pred, gt, nodes, p, engine)
    gauss = np.exp(-nodes * nodes)
    return float(np.sum(weights * gauss * errors) / (2.0 * d_max))


def rie(pred: LightField | np.ndarray, gt: LightField | np.ndarray, p: int = 2,
        params: RieParams | None = None) -> float:
    """Gaussian-weighted sum of refocused errors over the discrete refocus grid."""
    params = params if params is not None else RieParams()
    nodes = params.nodes()
    errors = _refocused_errors(pred, gt, nodes, p, params.engine)
    return float(np.sum(params.weights() * errors) / (2.0 * params.d_max))


def _refocus_term(spec: LossSpec) -> tuple[np.ndarray, np.ndarray] | None:
    """Refocus-domain nodes and coefficients for the given loss kind, or None."""
    if spec.kind == "vwe":
        return None
    if spec.kind in ("rie", "vwe+rie"):
        nodes = spec.rie.nodes()
        coeffs = spec.rie.weights() / (2.0 * spec.rie.d_max)
    elif spec.kind == "ucrie":
        nodes, weights = _trapezoid(spec.rie.d_max, spec.q)
        coeffs = weights / (2.0 * spec.rie.d_max)
    else:  # crie
        nodes, weights = _trapezoid(spec.crie_r_max, spec.q)
        coeffs = weights * np.exp(-nodes * nodes) / (2.0 * spec.rie.d_max)
    if spec.kind == "vwe+rie":
        coeffs = coeffs * spec.rie_weight
    return nodes, coeffs


def loss_terms(pred: LightField | np.ndarray, gt: LightField | np.ndarray,
               spec: LossSpec) -> tuple[float, float, float]:
    """``(total, view_term, refocus_term)`` of the configured loss.

    The refocus term is reported after ``rie_weight`` scaling for the
    combined kind, so ``total == view_term + refocus_term`` always.
    """
    x, y = _samples_of(pred), _samples_of(gt)
    if x.shape != y.shape:
        raise ValueError(f"light field shapes differ: {x.shape} vs {y.shape}")
    view_term = vwe(x, y, spec.p) if spec.kind in ("vwe", "vwe+rie") else 0.0
    term = _refocus_term(spec)
    refocus_term = 0.0
    if term is not None:
        nodes, coeffs = term
        errors = _refocused_errors(x, y, nodes, spec.p, spec.rie.engine)
        refocus_term = float(np.sum(coeffs * errors))
    return view_term + refocus_term, view_term, refocus_term


def combined_loss(pred: LightField | np.ndarray, gt: LightField | np.ndarray,
                  spec: LossSpec) -> float:
    """Value of the configured loss; for ``vwe+rie`` this is ``vwe + rie_weight * rie``."""
    return loss_terms(pred, gt, spec)[0]


def loss_gradient(pred: LightField | np.ndarray, gt: LightField | np.ndarray,
                  spec: LossSpec) -> np.ndarray:
    """Analytic gradient of :func:`combined_loss` with respect to every predicted sample.

    The view-wise part is the pointwise error derivative per view; each
    refocus-domain node contributes its pointwise derivative at the
    refocused pair pulled back through the refocus adjoint and scaled by
    the node coefficient.
    """
    return value_and_gradient(pred, gt, spec)[3]


def value_and_gradient(pred: LightField | np.ndarray, gt: LightField | np.ndarray,
                       spec: LossSpec) -> tuple[float, float, float, np.ndarray]:
    """``(total, view_term, refocus_term, gradient)`` sharing the refocus work."""
    x, y = _samples_of(pred), _samples_of(gt)
    if x.shape != y.shape:
        raise ValueError(f"light field shapes differ: {x.shape} vs {y.shape}")
    diff = x - y
    grad = np.zeros_like(x)
    view_term = 0.0
    if spec.kind in ("vwe", "vwe+rie"):
        view_term = vwe(x, y, spec.p)
        m = diff[0, 0].size
        if spec.p == 1:
            grad += np.sign(diff) / m
        else:
            grad += (2.0 / m) * diff
    refocus_term = 0.0
    term = _refocus_term(spec)
    if term is not None:
        nodes, coeffs = term
        engine = spec.rie.engine
        refocuser = Refocuser(diff, engine)
        n = refocuser.angular_radius
        for r, c in zip(nodes, coeffs):
            d = refocuser.refocus(r)
            refocus_term += c * _norm_value(d, spec.p)
            grad += c * refocus_adjoint(_norm_gradient(d, spec.p), RefocusSpec(float(r), engine), n)
    return view_term + refocus_term, view_term, refocus_term, grad
