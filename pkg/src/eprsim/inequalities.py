"""Bell/CHSH inequality checks, product-form analysis, and the
change-of-variables demonstration for station-dependent reparameterization.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .measure import unit_vector


@dataclass(frozen=True)
class Correlation:
    """One pair correlation with its statistical pedigree."""

    value: float
    stderr: float = 0.0
    source: str = "exact"  # exact | monte_carlo | quantum_formula

    def __post_init__(self) -> None:
        if abs(self.value) > 1.0 + self.stderr + 1e-12:
            raise ValueError(f"correlation {self.value!r} outside [-1, 1]")
        if self.stderr < 0.0:
            raise ValueError("stderr must be nonnegative")


def _as_correlation(p) -> Correlation:
    if isinstance(p, Correlation):
        return p
    return Correlation(value=float(p))


@dataclass(frozen=True)
class InequalityReport:
    bound_type: str
    lhs: float
    rhs: float
    tolerance: float

    @property
    def slack(self) -> float:
        return self.rhs - self.lhs

    @property
    def violated(self) -> bool:
        return self.slack < -self.tolerance


def quantum_prediction(a, b) -> float:
    """Singlet-state pair correlation ``-a . b``."""
    a = unit_vector(a)
    b = unit_vector(b)
    return float(-(a @ b))


def coplanar_setting(angle_deg: float) -> np.ndarray:
    """Unit vector at the given angle in the x-y plane."""
    theta = math.radians(angle_deg)
    return np.array([math.cos(theta), math.sin(theta), 0.0])


def bell_check(p_bc, p_ab, p_ac) -> InequalityReport:
    """Three-correlation bound ``1 + P(b,c) >= |P(a,b) - P(a,c)|``.

    With Monte Carlo inputs a violation verdict requires the slack to exceed
    four combined standard errors; exact inputs compare strictly.
    """
    p_bc, p_ab, p_ac = map(_as_correlation, (p_bc, p_ab, p_ac))
    lhs = abs(p_ab.value - p_ac.value)
    rhs = 1.0 + p_bc.value
    tol = 4.0 * math.sqrt(p_bc.stderr**2 + p_ab.stderr**2 + p_ac.stderr**2)
    return InequalityReport(bound_type="bell", lhs=lhs, rhs=rhs, tolerance=tol)


def chsh_check(p_ab, p_db, p_ac, p_dc) -> InequalityReport:
    """Four-correlation bound ``|P(a,b) + P(d,b) + P(a,c) - P(d,c)| <= 2``."""
    p_ab, p_db, p_ac, p_dc = map(_as_correlation, (p_ab, p_db, p_ac, p_dc))
    s = p_ab.value + p_db.value + p_ac.value - p_dc.value
    tol = 4.0 * math.sqrt(
        p_ab.stderr**2 + p_db.stderr**2 + p_ac.stderr**2 + p_dc.stderr**2
    )
    return InequalityReport(bound_type="chsh", lhs=abs(s), rhs=2.0, tolerance=tol)


def sign_identity_check(x: int, y: int, z: int) -> bool:
    """Verify ``|xz - yz| = |x - y| = 1 - xy`` on a +/-1 triple."""
    for name, s in (("x", x), ("y", y), ("z", z)):
        if s not in (-1, 1):
            raise ValueError(f"{name} must be +/-1, got {s!r}")
    return abs(x * z - y * z) == abs(x - y) == 1 - x * y


def chsh_bound_identity(u: float, v: float, x: float, y: float) -> bool:
    """Verify ``|u||x+y| + |v||x-y| <= |x+y| + |x-y| <= 2`` for inputs in [-1, 1]."""
    if max(abs(u), abs(v), abs(x), abs(y)) > 1.0 + 1e-12:
        raise ValueError("all inputs must lie in [-1, 1]")
    middle = abs(x + y) + abs(x - y)
    return (abs(u) * abs(x + y) + abs(v) * abs(x - y) <= middle + 1e-12
            and middle <= 2.0 + 1e-12)


@dataclass(frozen=True)
class ProductFormReport:
    consistent: bool
    witness: tuple[float, float, float, float] | None
    reason: str


def product_form_consistency(p_e1e1: float, p_e2e2: float, p_e1e2: float
                             ) -> ProductFormReport:
    """Can ``F_i G_j`` with ``|F|, |G| <= 1`` reproduce the three basis-pair
    correlations ``P(e1,e1), P(e2,e2), P(e1,e2)``?

    Solvable exactly when the off-diagonal entry is nonzero and dominates
    the diagonal product (``|P11 P22| <= |P12|``), or when a zero
    off-diagonal is matched by a zero diagonal entry.  The singlet values
    ``(-1, -1, 0)`` fail: a zero product forces one factor to vanish, which
    kills one of the unit-magnitude diagonal products.
    """
    p11, p22, p12 = float(p_e1e1), float(p_e2e2), float(p_e1e2)
    for name, p in (("P(e1,e1)", p11), ("P(e2,e2)", p22), ("P(e1,e2)", p12)):
        if abs(p) > 1.0 + 1e-12:
            raise ValueError(f"{name} outside [-1, 1]")

    if p12 == 0.0:
        if p11 == 0.0:
            f2 = math.sqrt(abs(p22))
            g2 = p22 / f2 if f2 else 0.0
            return ProductFormReport(True, (0.0, f2, 0.0, g2),
                                     "F1 = 0 absorbs both zero products")
        if p22 == 0.0:
            f1 = math.sqrt(abs(p11))
            g1 = p11 / f1 if f1 else 0.0
            return ProductFormReport(True, (f1, 0.0, g1, 0.0),
                                     "G2 = 0 absorbs both zero products")
        return ProductFormReport(
            False, None,
            "P(e1,e2) = 0 forces F1 = 0 or G2 = 0, contradicting the nonzero "
            "products F1*G1 = P(e1,e1) and F2*G2 = P(e2,e2)",
        )

    if abs(p11 * p22) <= abs(p12) + 1e-15:
        f1 = max(abs(p11), abs(p12))
        g2 = p12 / f1
        g1 = p11 / f1
        f2 = p22 * f1 / p12
        return ProductFormReport(True, (f1, f2, g1, g2),
                                 "solved with |F1| = max(|P(e1,e1)|, |P(e1,e2)|)")
    return ProductFormReport(
        False, None,
        "bounded factors require |P(e1,e1) * P(e2,e2)| <= |P(e1,e2)|",
    )


def one_norm(a) -> float:
    """Sum of absolute components of a unit vector; always in [1, sqrt(3)]."""
    a = unit_vector(a)
    return float(np.abs(a).sum())


# --- change-of-variables demonstration -------------------------------------

def _step(t) -> np.ndarray:
    return np.where(np.asarray(t) >= 0.0, 1.0, -1.0)


def _demo_a(lam, alpha):
    """Fixed +/-1 step outcome for station 1 (breaks at 1/2 and 1/3)."""
    return _step(lam - 0.5) * _step(alpha - 1.0 / 3.0)


def _demo_b(lam, beta):
    """Fixed +/-1 step outcome for station 2 (breaks at 2/5 and 3/5)."""
    return _step(lam - 0.4) * _step(beta - 0.6)


def default_test_density(lam, alpha, beta):
    """Bounded non-factorizing density on (0, 1]^3 with unit mass."""
    return lam + alpha * beta + 0.25


def uniform_test_density(lam, alpha, beta):
    return np.ones(np.broadcast(lam, alpha, beta).shape)


def jacobian_factor(a, b, x, y) -> float:
    """Jacobian of ``(alpha, beta) = (x**|a|, y**|b|)`` in one-norm exponents."""
    p = one_norm(a)
    q = one_norm(b)
    return float(p * q * x ** (p - 1.0) * y ** (q - 1.0))


def _gauss_panels(edges: np.ndarray, order: int = 12):
    """Composite Gauss-Legendre nodes/weights over consecutive panels."""
    base_x, base_w = np.polynomial.legendre.leggauss(order)
    lo = edges[:-1]
    hi = edges[1:]
    half = 0.5 * (hi - lo)
    mid = 0.5 * (hi + lo)
    nodes = (mid[:, None] + half[:, None] * base_x[None, :]).ravel()
    weights = (half[:, None] * base_w[None, :]).ravel()
    return nodes, weights


def _dim_edges(breaks: tuple[float, ...], panels_per_piece: int,
               graded: bool) -> np.ndarray:
    """Panel edges over [0, 1] split at the breaks; optionally refine the
    first piece geometrically toward 0 (for integrable power kinks)."""
    points = [0.0, *sorted(breaks), 1.0]
    edges: list[float] = [0.0]
    first = True
    for lo, hi in zip(points[:-1], points[1:]):
        if first and graded:
            geo = hi * 0.5 ** np.arange(46, -1, -1)
            edges.extend(geo.tolist())
        else:
            edges.extend(np.linspace(lo, hi, panels_per_piece + 1)[1:].tolist())
        first = False
    return np.asarray(edges)


def change_of_variables_demo(a, b, test_density=None,
                             resolution: int = 10**6) -> dict:
    """Evaluate the pair-correlation integral in both parameterizations.

    The left side integrates fixed +/-1 step outcomes against the test
    density over ``(lambda, alpha, beta)``; the right side substitutes
    ``alpha = x**|a|``, ``beta = y**|b|`` (one-norm exponents) with the
    Jacobian factor.  Both sides agree, showing that the transformed density
    picks up explicit dependence on the settings.  Quadrature is composite
    Gauss-Legendre with panels split at all step breaks and graded toward
    zero where the Jacobian has a power kink.
    """
    p = one_norm(a)
    q = one_norm(b)
    rho = test_density if test_density is not None else default_test_density
    per_dim = max(48, round(resolution ** (1.0 / 3.0)))
    panels = max(2, round(per_dim / 12 / 3))

    lam_n, lam_w = _gauss_panels(_dim_edges((0.4, 0.5), panels, graded=False))
    alpha_n, alpha_w = _gauss_panels(_dim_edges((1.0 / 3.0,), panels, graded=False))
    beta_n, beta_w = _gauss_panels(_dim_edges((0.6,), panels, graded=False))
    x_n, x_w = _gauss_panels(_dim_edges(((1.0 / 3.0) ** (1.0 / p),), panels,
                                        graded=True))
    y_n, y_w = _gauss_panels(_dim_edges((0.6 ** (1.0 / q),), panels,
                                        graded=True))

    def tensor(f, d1, d2, d3):
        (n1, w1), (n2, w2), (n3, w3) = d1, d2, d3
        total = 0.0
        for start in range(0, n1.size, 16):
            blk = slice(start, start + 16)
            vals = f(n1[blk][:, None, None], n2[None, :, None], n3[None, None, :])
            total += np.einsum("i,j,k,ijk->", w1[blk], w2, w3, vals)
        return float(total)

    def lhs_f(lam, alpha, beta):
        return _demo_a(lam, alpha) * _demo_b(lam, beta) * rho(lam, alpha, beta)

    def rhs_f(lam, x, y):
        alpha = x**p
        beta = y**q
        jac = p * q * x ** (p - 1.0) * y ** (q - 1.0)
        return _demo_a(lam, alpha) * _demo_b(lam, beta) * rho(lam, alpha, beta) * jac

    lhs = tensor(lhs_f, (lam_n, lam_w), (alpha_n, alpha_w), (beta_n, beta_w))
    rhs = tensor(rhs_f, (lam_n, lam_w), (x_n, x_w), (y_n, y_w))
    points = lam_n.size * max(alpha_n.size * beta_n.size, x_n.size * y_n.size)
    return {
        "one_norm_a": p,
        "one_norm_b": q,
        "lhs_integral": lhs,
        "rhs_integral": rhs,
        "abs_diff": abs(lhs - rhs),
        "points": points,
        "pass": abs(lhs - rhs) <= 1e-8,
    }
