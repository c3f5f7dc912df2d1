"""phi-divergence families and their convex conjugates.

A divergence is described by a convex function ``phi`` with ``phi(1) = 0``,
``phi'(1) = 0`` and ``phi''(1) > 0``. The penalty-form robust problem only
ever touches ``phi`` through its conjugate ``phi*`` and the curvature values
``phi''(1)``, ``phi'''(1)``, which is what :class:`PhiDivergence` carries.
"""

from dataclasses import dataclass, field
from typing import Callable, Dict, Optional

import numpy as np
from scipy.special import xlogy

RELATIVE_ENTROPY = "relative_entropy"
MODIFIED_CHI_SQUARE = "modified_chi_square"

_AT_ONE_TOL = 1e-12
_FENCHEL_TOL = 1e-9
# probe points for the construction-time checks; all lie in the interior of
# dom(phi) for the built-in families
_PROBES = np.array([0.05, 0.2, 0.5, 0.8, 1.0, 1.3, 2.0, 3.5, 7.0])

ArrayFn = Callable[[np.ndarray], np.ndarray]


@dataclass(frozen=True)
class PhiDivergence:
    """Bundle of callables describing one phi-divergence.

    ``conj_d2`` and ``conj_d1m1`` are optional. The second conjugate
    derivative feeds Newton steps and sandwich Jacobians; when absent it is
    finite-differenced from ``conj_d1``. ``conj_d1m1(z)`` returns
    ``conj_d1(z) - 1`` without cancellation and defaults to the naive
    difference.
    """

    kind: str
    phi: ArrayFn
    phi_d1: ArrayFn
    phi_d2: ArrayFn
    phi_d3: ArrayFn
    conj: ArrayFn
    conj_d1: ArrayFn
    domain_lo: float = 0.0
    conj_d2: Optional[ArrayFn] = None
    conj_d1m1: Optional[ArrayFn] = None
    probes: np.ndarray = field(default_factory=lambda: _PROBES.copy(), repr=False)

    def __post_init__(self):
        if self.domain_lo < 0:
            raise ValueError("dom(phi) must lie in [0, inf)")
        at_one = {
            "phi(1)": float(self.phi(np.array(1.0))),
            "phi'(1)": float(self.phi_d1(np.array(1.0))),
        }
        for name, val in at_one.items():
            if abs(val) > _AT_ONE_TOL:
                raise ValueError(f"{self.kind}: {name} = {val!r}, expected 0")
        if not float(self.phi_d2(np.array(1.0))) > 0:
            raise ValueError(f"{self.kind}: phi''(1) must be positive")

        z = self.probes[self.probes > self.domain_lo]
        if np.any(self.phi_d2(z) < 0):
            raise ValueError(f"{self.kind}: phi is not convex on the probe grid")
        lhs = self.conj(self.phi_d1(z))
        rhs = z * self.phi_d1(z) - self.phi(z)
        err = np.max(np.abs(lhs - rhs))
        if err > _FENCHEL_TOL:
            raise ValueError(f"{self.kind}: Fenchel identity violated (max error {err:.3e})")

    @property
    def d2_at_one(self) -> float:
        return float(self.phi_d2(np.array(1.0)))

    @property
    def d3_at_one(self) -> float:
        return float(self.phi_d3(np.array(1.0)))

    def conj_second(self, zeta):
        """Second derivative of the conjugate (finite differences if not supplied)."""
        zeta = np.asarray(zeta, dtype=float)
        if self.conj_d2 is not None:
            return self.conj_d2(zeta)
        h = 1e-6 * np.maximum(1.0, np.abs(zeta))
        return (self.conj_d1(zeta + h) - self.conj_d1(zeta - h)) / (2 * h)

    def conj_first_minus_one(self, zeta):
        zeta = np.asarray(zeta, dtype=float)
        if self.conj_d1m1 is not None:
            return self.conj_d1m1(zeta)
        return self.conj_d1(zeta) - 1.0

    @property
    def is_relative_entropy(self) -> bool:
        return self.kind == RELATIVE_ENTROPY


def _kl_phi(z):
    z = np.asarray(z, dtype=float)
    return xlogy(z, z) - z + 1.0


def relative_entropy() -> PhiDivergence:
    """phi(z) = z ln z - z + 1, with conjugate exp(zeta) - 1."""
    return PhiDivergence(
        kind=RELATIVE_ENTROPY,
        phi=_kl_phi,
        phi_d1=lambda z: np.log(z),
        phi_d2=lambda z: 1.0 / np.asarray(z, dtype=float),
        phi_d3=lambda z: -1.0 / np.asarray(z, dtype=float) ** 2,
        conj=np.expm1,
        conj_d1=np.exp,
        conj_d2=np.exp,
        conj_d1m1=np.expm1,
    )


def _chi2_conj(zeta):
    zeta = np.asarray(zeta, dtype=float)
    return np.where(zeta >= -2.0, zeta + 0.25 * zeta**2, -1.0)


def _chi2_conj_d1(zeta):
    zeta = np.asarray(zeta, dtype=float)
    return np.where(zeta >= -2.0, 1.0 + 0.5 * zeta, 0.0)


def _chi2_conj_d2(zeta):
    zeta = np.asarray(zeta, dtype=float)
    return np.where(zeta >= -2.0, 0.5, 0.0)


def _chi2_conj_d1m1(zeta):
    zeta = np.asarray(zeta, dtype=float)
    return np.where(zeta >= -2.0, 0.5 * zeta, -1.0)


def modified_chi_square() -> PhiDivergence:
    """phi(z) = (z - 1)^2 on z >= 0; conjugate is piecewise quadratic."""
    return PhiDivergence(
        kind=MODIFIED_CHI_SQUARE,
        phi=lambda z: (np.asarray(z, dtype=float) - 1.0) ** 2,
        phi_d1=lambda z: 2.0 * (np.asarray(z, dtype=float) - 1.0),
        phi_d2=lambda z: np.full_like(np.asarray(z, dtype=float), 2.0),
        phi_d3=lambda z: np.zeros_like(np.asarray(z, dtype=float)),
        conj=_chi2_conj,
        conj_d1=_chi2_conj_d1,
        conj_d2=_chi2_conj_d2,
        conj_d1m1=_chi2_conj_d1m1,
    )


_REGISTRY: Dict[str, Callable[[], PhiDivergence]] = {
    RELATIVE_ENTROPY: relative_entropy,
    MODIFIED_CHI_SQUARE: modified_chi_square,
}

_ALIASES = {"kl": RELATIVE_ENTROPY, "chi2": MODIFIED_CHI_SQUARE}


def register_divergence(name: str, factory: Callable[[], PhiDivergence]) -> None:
    """Add a divergence factory to the registry; validation runs on first build."""
    _REGISTRY[name] = factory


def get_divergence(name: str) -> PhiDivergence:
    key = _ALIASES.get(name.lower(), name.lower())
    try:
        return _REGISTRY[key]()
    except KeyError:
        raise ValueError(f"unknown divergence {name!r}; known: {sorted(_REGISTRY)}") from None


def divergence(q, p, phi: PhiDivergence, atol: float = 1e-9) -> float:
    """phi-divergence of weights ``q`` relative to ``p``.

    Returns ``inf`` when ``q`` is not a probability vector supported on the
    support of ``p``; that is a legitimate value of the divergence, not an
    error.

    Raises:
        ValueError: on a length mismatch or a negative weight.
    """
    q = np.asarray(q, dtype=float).ravel()
    p = np.asarray(p, dtype=float).ravel()
    if q.shape != p.shape:
        raise ValueError(f"length mismatch: {q.size} vs {p.size}")
    if np.any(q < 0) or np.any(p < 0):
        raise ValueError("weights must be nonnegative")
    if abs(p.sum() - 1.0) > atol:
        raise ValueError("reference weights p must sum to one")
    support = p > 0
    if np.any(q[~support] > 0) or abs(q[support].sum() - 1.0) > atol:
        return float("inf")
    ratio = q[support] / p[support]
    return float(np.sum(p[support] * phi.phi(ratio)))


def conjugate_taylor_coeffs(d: PhiDivergence):
    """Coefficients of phi*(z) = z + a2 z^2/2 + a3 z^3/6 + o(z^3).

    Returns:
        tuple: ``(a2, a3)`` with ``a2 = 1/phi''(1)`` and
        ``a3 = -phi'''(1)/phi''(1)^3``.
    """
    d2 = d.d2_at_one
    d3 = d.d3_at_one
    return 1.0 / d2, -d3 / d2**3
