"""Error-bound calculators: sup-norm ledgers, contraction rates, robustness
tubes, two-timescale coupling bounds, and the assembled error budget."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .symexpr import (
    Domain,
    Expr,
    add,
    compile_expr,
    differentiate,
    eval_expr,
    mul,
    neg,
    nth_derivative,
    scan_argmin,
    scan_supnorm,
)


class BoundsError(Exception):
    pass


class NonContractingError(BoundsError):
    """kappa <= 0 at the declared optimum (objective not locally convex)."""


def lie_along(h: Expr, v: Expr) -> Expr:
    """1-D Lie bracket of v along h: v' h - h' v."""
    return add(mul(differentiate(v), h), neg(mul(differentiate(h), v)))


@dataclass(frozen=True)
class BoundsLedger:
    """Sup-norm estimates of an objective and its derivatives on a domain,
    plus the local curvature kappa at the target optimum."""
    domain: Domain
    norms: tuple          # norms[i] ~ sup |h^(i)| on domain, i = 0..N
    kappa: float
    x_star: float
    composites: dict = field(default_factory=dict)

    def norm(self, i: int) -> float:
        return self.norms[i]

    @property
    def n_derivatives(self) -> int:
        return len(self.norms) - 1

    def to_dict(self) -> dict:
        return {
            "domain": [list(iv) for iv in self.domain.intervals],
            "norms": list(self.norms),
            "kappa": self.kappa,
            "x_star": self.x_star,
            "composites": dict(self.composites),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "BoundsLedger":
        dom = Domain(tuple(tuple(float(v) for v in iv) for iv in d["domain"]))
        return cls(dom, tuple(float(v) for v in d["norms"]), float(d["kappa"]),
                   float(d.get("x_star", 0.0)),
                   {k: float(v) for k, v in d.get("composites", {}).items()})


def build_ledger(h: Expr, dom: Domain, n_derivatives: int = 3,
                 x_star: float | None = None, kappa_mode: str = "optimum",
                 samples_per_axis: int | None = None) -> BoundsLedger:
    """Scan sup norms of h .. h^(N) plus the composite |L_h^2 h'| and read
    off kappa = h''(x*) at the declared (or scanned) optimum.

    kappa_mode "optimum" takes the curvature at x*; "domain-min" takes the
    conservative min of h'' over the whole domain.
    """
    if dom.dim != 1:
        raise BoundsError("ledgers are built for 1-D objectives")
    if n_derivatives < 3:
        raise BoundsError("need norms through the third derivative")
    norms = []
    d = h
    for i in range(n_derivatives + 1):
        norms.append(scan_supnorm(d, dom, samples_per_axis).value)
        d = differentiate(d)
    if x_star is None:
        x_star = scan_argmin(h, dom, samples_per_axis)[0]
    h2 = nth_derivative(h, 2)
    if kappa_mode == "optimum":
        kappa = eval_expr(h2, (x_star,))
    elif kappa_mode == "domain-min":
        xs = np.linspace(*dom.intervals[0], samples_per_axis or 20001)
        kappa = float(np.min(np.broadcast_to(compile_expr(h2)([xs]), xs.shape)))
    else:
        raise BoundsError(f"unknown kappa_mode {kappa_mode!r}")
    if kappa <= 0.0:
        raise NonContractingError(
            f"h''({x_star}) = {kappa}; the declared optimum is not locally convex")
    composite = lie_along(h, lie_along(h, differentiate(h)))
    composites = {"L2h_hprime": scan_supnorm(composite, dom, samples_per_axis).value}
    return BoundsLedger(dom, tuple(norms), float(kappa), float(x_star), composites)


@dataclass(frozen=True)
class ContractionEstimate:
    beta: float
    chi: float
    kappa_robust: float
    metric: tuple

    @property
    def contracting(self) -> bool:
        return self.beta > 0.0


def contraction_rate(fields, dom: Domain, metric=None,
                     samples_per_axis: int = 201) -> ContractionEstimate:
    """Estimate the contraction rate of an autonomous field on a domain under
    a constant diagonal metric: beta = -max_x lambda_max(sym(Theta J Theta^-1))."""
    fields = tuple(fields)
    dim = len(fields)
    if dom.dim != dim:
        raise BoundsError("domain dim must match field dim")
    if metric is None:
        metric = tuple(1.0 for _ in range(dim))
    metric = tuple(float(m) for m in metric)
    if any(m <= 0 for m in metric):
        raise BoundsError("metric entries must be positive")
    jac = [[differentiate(fields[c], d) for d in range(dim)] for c in range(dim)]
    grids = [np.linspace(lo, hi, samples_per_axis) for lo, hi in dom.intervals]
    mesh = np.meshgrid(*grids, indexing="ij")
    axes = [m.ravel() for m in mesh]
    ns = axes[0].size
    jvals = np.empty((ns, dim, dim))
    for c in range(dim):
        for d in range(dim):
            v = compile_expr(jac[c][d])(axes)
            jvals[:, c, d] = np.broadcast_to(v, (ns,))
    if not np.all(np.isfinite(jvals)):
        raise BoundsError("non-finite Jacobian sample")
    m = np.asarray(metric)
    a = jvals * (m[None, :, None] / m[None, None, :])
    sym = 0.5 * (a + np.transpose(a, (0, 2, 1)))
    lam_max = np.linalg.eigvalsh(sym)[:, -1]
    beta = float(-np.max(lam_max))
    chi = max(metric) / min(metric)
    return ContractionEstimate(beta, chi, beta / chi, metric)


def robustness_tube(kappa_robust: float, r_bound: float) -> float:
    """Asymptotic tube radius |R| / kappa for a bounded perturbation."""
    if kappa_robust <= 0.0:
        raise BoundsError("kappa must be positive")
    if r_bound < 0.0:
        raise BoundsError("perturbation bound must be nonnegative")
    return r_bound / kappa_robust


@dataclass(frozen=True)
class SingularPerturbationInputs:
    d: float        # bound on the drift of the fast equilibrium map
    alpha: float    # Lipschitz constant of the slow field in the fast state
    nu: float       # timescale separation
    lambda_z: float  # robustness rate of the fast subsystem

    def __post_init__(self):
        for name in ("d", "alpha", "nu", "lambda_z"):
            if getattr(self, name) <= 0.0:
                raise BoundsError(f"{name} must be > 0")


def singular_perturbation_bound(inp: SingularPerturbationInputs) -> float:
    """Generic two-timescale rate-error bound d * alpha * nu / lambda_z."""
    return inp.d * inp.alpha * inp.nu / inp.lambda_z


def plant_coupling_bound(a: float, eta: float, omega: float,
                         h_norm: float, hprime_norm: float) -> float:
    """Rate-error bound for the first-order-plant scheme in original time:
    eta * omega^2 * |h'| * (eta |h| + a).

    This is the scheme-specific displayed bound; it carries an extra factor
    eta relative to the generic evaluator with alpha = |h'| because the slow
    field's Lipschitz constant in the fast state is eta |h'|.
    """
    return eta * omega ** 2 * hprime_norm * (eta * h_norm + a)


@dataclass(frozen=True)
class ErrorBudget:
    k1: float       # bound on the non-identity transform |dU|
    k2: float       # bound on the computed departure from ideal descent
    k3: float       # bound on the uncomputed averaging tail
    k4: float       # bound on the fast-dynamics coupling error
    delta1: float   # DC error of the averaged system vs ideal descent
    delta2: float   # oscillatory error |x - y|

    def __post_init__(self):
        for name in ("k1", "k2", "k3", "k4", "delta1", "delta2"):
            if getattr(self, name) < 0.0:
                raise BoundsError(f"{name} must be >= 0")
