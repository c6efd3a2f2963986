"""Equilibrium enumeration, linearization and spectral classification.

The closed-loop equilibria are the 2^p states with every spin at a pole;
each is labelled by its sign pattern.  Linearizing the loop at a pattern Q
gives the tangent-space block matrix

    M_Q = [[K, -E], [E, K]],    K = kappa zeta^T (rank one), E = diag(e),

whose spectrum is the union of the spectra of the complexified pair
K + iE and K - iE.  Eigenvalues are computed from the two p x p complex
matrices (half the dimension of M_Q, which is kept as a test oracle), and
each one is checked against the rank-one secular identity

    sum_j z_j (lambda + i(mu - e_j)) / (lambda^2 + (e_j - mu)^2) = 1

for K + iE (conjugate form for K - iE), with ell = lambda + i mu.
"""

from __future__ import annotations

import enum
import warnings
from dataclasses import dataclass

import numpy as np

from .core import EnsembleState, FrequencySet
from .dynamics import ControlLaw, IntegratorConfig, integrate

__all__ = [
    "Equilibrium",
    "LinearizationPair",
    "Classification",
    "EquilibriumReport",
    "enumerate_equilibria",
    "linearization",
    "spectrum_at",
    "secular_residual",
    "vandermonde_det",
    "invariance_defect",
]

#: guard against 2^p blowup in full enumerations
MAX_ENUM_P = 20

#: frequency gap below which hyperbolicity margins become unreliable
DEGENERATE_GAP = 1e-6


@dataclass(frozen=True)
class Equilibrium:
    """Sign pattern of a pole equilibrium: entry j is the z-coordinate (+-1) of spin j."""

    signs: tuple

    def __post_init__(self):
        if not self.signs or any(s not in (-1, 1) for s in self.signs):
            raise ValueError("signs must be a nonempty tuple of -1/+1")

    @property
    def p(self) -> int:
        return len(self.signs)

    @property
    def is_down(self) -> bool:
        return all(s == -1 for s in self.signs)

    @property
    def is_up(self) -> bool:
        return all(s == 1 for s in self.signs)

    def label(self) -> str:
        return "".join("+" if s == 1 else "-" for s in self.signs)

    @classmethod
    def from_label(cls, text: str) -> "Equilibrium":
        """Parse '+--' or '+1,-1,-1' style pattern strings."""
        text = text.strip()
        if "," in text:
            parts = [int(tok) for tok in text.split(",")]
        else:
            parts = [1 if ch == "+" else -1 if ch == "-" else None for ch in text]
            if None in parts:
                raise ValueError(f"bad pattern character in {text!r}")
        return cls(tuple(parts))

    @classmethod
    def down(cls, p: int) -> "Equilibrium":
        return cls((-1,) * p)

    @classmethod
    def up(cls, p: int) -> "Equilibrium":
        return cls((1,) * p)


def enumerate_equilibria(p: int) -> list[Equilibrium]:
    """All 2^p sign patterns in binary-counting order (bit j -> spin j, 0 -> -1).

    The first pattern is all-down, the last all-up.
    """
    if p < 1:
        raise ValueError("need p >= 1")
    if p > MAX_ENUM_P:
        raise ValueError(f"2^{p} patterns exceed the enumeration guard (p <= {MAX_ENUM_P})")
    out = []
    for k in range(2**p):
        out.append(Equilibrium(tuple(1 if (k >> j) & 1 else -1 for j in range(p))))
    return out


@dataclass(frozen=True, eq=False)
class LinearizationPair:
    """Tangent-space linearization data at a sign pattern.

    ``K = outer(kappa, zeta)`` exactly (rank one); ``E`` is the frequency
    diagonal.  ``complexified()`` returns the pair whose spectra union to
    the spectrum of the block matrix ``block()``.
    """

    K: np.ndarray
    E: np.ndarray
    kappa: np.ndarray
    zeta: np.ndarray

    def complexified(self) -> tuple[np.ndarray, np.ndarray]:
        return self.K + 1j * self.E, self.K - 1j * self.E

    def block(self) -> np.ndarray:
        return np.block([[self.K, -self.E], [self.E, self.K]])


def linearization(q: Equilibrium, freqs: FrequencySet) -> LinearizationPair:
    if q.p != freqs.p:
        raise ValueError(f"pattern size {q.p} vs {freqs.p} frequencies")
    kappa = np.array(q.signs, dtype=float)
    zeta = np.ones(q.p)
    return LinearizationPair(
        K=np.outer(kappa, zeta),
        E=np.diag(freqs.values),
        kappa=kappa,
        zeta=zeta,
    )


def secular_residual(
    ell: complex, q: Equilibrium, freqs: FrequencySet, conjugate: bool = False
) -> complex:
    """Secular-identity residual (LHS - 1) at a spectral point ``ell``.

    ``conjugate=False`` evaluates the identity satisfied by eigenvalues of
    K + iE; ``conjugate=True`` its conjugate form, satisfied by eigenvalues
    of K - iE (which are the conjugates of the K + iE spectrum).  Exact
    eigenvalues give residual 0; other points probe the rank-one update
    structure.

    Raises:
        ZeroDivisionError: when ``ell`` sits on a pole ``i e_j`` (lambda = 0
            and mu = e_j), which signals a non-hyperbolic input.
    """
    if conjugate:
        return complex(
            np.conj(secular_residual(np.conj(ell), q, freqs, conjugate=False))
        )
    lam, mu = float(np.real(ell)), float(np.imag(ell))
    e = freqs.values
    den = lam**2 + (e - mu) ** 2
    if np.any(den == 0.0):
        raise ZeroDivisionError(
            f"spectral point {ell} coincides with a pole i*e_j; identity undefined"
        )
    z = np.array(q.signs, dtype=float)
    terms = z * (lam + 1j * (mu - e)) / den
    return complex(np.sum(terms) - 1.0)


class Classification(enum.Enum):
    ATTRACTOR = "attractor"
    REPELLER = "repeller"
    SADDLE = "saddle"


@dataclass(frozen=True, eq=False)
class EquilibriumReport:
    """Spectrum and stability verdict for one equilibrium pattern.

    ``eigenvalues`` lists the p eigenvalues of K+iE followed by the p of
    K-iE; ``residuals`` aligns with it (conjugate identity for the second
    half).  ``hyperbolic`` uses the relative margin
    ``min|Re| > tol * max(1, max|e|)``.
    """

    pattern: Equilibrium
    eigenvalues: np.ndarray
    residuals: np.ndarray
    n_unstable: int
    n_stable: int
    classification: Classification
    hyperbolic: bool
    min_abs_real: float
    conjugate_paired: bool
    degenerate_freqs: bool

    @property
    def max_abs_residual(self) -> float:
        return float(np.max(np.abs(self.residuals)))


def _conjugate_paired(eigs: np.ndarray, tol: float) -> bool:
    """True when the multiset is closed under conjugation within tol."""
    pool = list(eigs)
    for lam in eigs:
        best, best_d = None, np.inf
        for i, other in enumerate(pool):
            d = abs(np.conj(lam) - other)
            if d < best_d:
                best, best_d = i, d
        if best is None or best_d > tol:
            return False
        pool.pop(best)
    return True


def spectrum_at(
    q: Equilibrium,
    freqs: FrequencySet,
    hyperbolic_tol: float = 1e-8,
    pair_tol: float = 1e-8,
) -> EquilibriumReport:
    """Diagonalize the linearization at a pattern and classify it.

    Eigenvalues come from the complexified p x p pair (dense solver); the
    2p x 2p block matrix is reserved as an independent oracle for tests.
    Near-degenerate frequencies (gap < 1e-6) are flagged in the report
    rather than rejected: margins degrade continuously with the gap.
    """
    if q.p != freqs.p:
        raise ValueError(f"pattern size {q.p} vs {freqs.p} frequencies")
    degenerate = freqs.p > 1 and freqs.min_gap < DEGENERATE_GAP
    if degenerate:
        warnings.warn(
            f"frequency gap {freqs.min_gap:.3e} below {DEGENERATE_GAP:.0e}: "
            "hyperbolicity margins unreliable",
            stacklevel=2,
        )
    pair = linearization(q, freqs)
    a_plus, a_minus = pair.complexified()
    ev_plus = np.linalg.eigvals(a_plus)
    ev_minus = np.linalg.eigvals(a_minus)
    eigs = np.concatenate([ev_plus, ev_minus])

    residuals = np.array(
        [secular_residual(ell, q, freqs, conjugate=False) for ell in ev_plus]
        + [secular_residual(ell, q, freqs, conjugate=True) for ell in ev_minus]
    )

    re = eigs.real
    n_unstable = int(np.sum(re > 0))
    n_stable = int(np.sum(re < 0))
    if n_unstable == 0:
        cls = Classification.ATTRACTOR
    elif n_stable == 0:
        cls = Classification.REPELLER
    else:
        cls = Classification.SADDLE
    scale = max(1.0, float(np.max(np.abs(freqs.values))))
    min_abs_real = float(np.min(np.abs(re)))
    paired = _conjugate_paired(eigs, pair_tol) and n_unstable % 2 == 0

    return EquilibriumReport(
        pattern=q,
        eigenvalues=eigs,
        residuals=residuals,
        n_unstable=n_unstable,
        n_stable=n_stable,
        classification=cls,
        hyperbolic=min_abs_real > hyperbolic_tol * scale,
        min_abs_real=min_abs_real,
        conjugate_paired=paired,
        degenerate_freqs=degenerate,
    )


def vandermonde_det(freqs: FrequencySet) -> float:
    """Product formula ``prod_{i<j} (e_i - e_j)``.

    Nonzero exactly when the frequencies are pairwise distinct; this is the
    certificate that the only invariant states of the zero-sum set are the
    pole equilibria.
    """
    e = freqs.values
    out = 1.0
    for i in range(freqs.p):
        for j in range(i + 1, freqs.p):
            out *= e[i] - e[j]
    return float(out)


def invariance_defect(
    state: EnsembleState,
    horizon: float,
    h: float = 0.01,
    stride: int = 10,
    pre_tol: float = 1e-9,
) -> float:
    """Escape of the zero-sum set under free evolution.

    The state must start with vanishing weighted transverse sums (checked
    with tolerance ``pre_tol``).  Returns ``max_t |sum w x(t)| + |sum w y(t)|``
    over the horizon: values at the tolerance scale certify an invariant
    point (a pole pattern); order-one values certify escape, i.e. the state
    was not in the largest invariant subset.
    """
    w = state.weights.values
    s0 = abs(float(np.dot(w, state.x))) + abs(float(np.dot(w, state.y)))
    if s0 > pre_tol:
        raise ValueError(
            f"state does not start on the zero-sum set (|sums| = {s0:.3e})"
        )
    traj = integrate(
        state, ControlLaw.zero(), IntegratorConfig(t_final=horizon, h=h), stride=stride
    )
    sx = traj.states[:, :, 0] @ w
    sy = traj.states[:, :, 1] @ w
    return float(np.max(np.abs(sx) + np.abs(sy)))
