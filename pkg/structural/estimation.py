# structural/estimation.py
"""
Classical minimum distance estimation of (eps, eta, rho).

The model moments come out of nested root finding, so there are no cheap
gradients: the objective is minimized with scipy's bounded Nelder-Mead,
restarted from Latin-hypercube points, and the best start is polished with a
tighter simplex before it is reported.

The search runs on the unit cube. eps is mapped on a log scale, eta and rho
linearly; scipy clips every trial point back into the cube.
"""

import logging
import math
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.optimize import minimize
from scipy.stats import qmc

from config.exceptions import ConfigurationError
from economy.elasticities import FD_STEP, map_ordered
from economy.params import MARKUP, EconomyParams
from structural.moments import cmd_objective, is_penalized, weighting_matrix

logger = logging.getLogger(__name__)

PARAM_NAMES = ("eps", "eta", "rho")
ALLOWED = {"eps": (0.1, 100.0), "eta": (1.01, 10.0), "rho": (-5.0, 0.99)}

MIN_STARTS = 8
FTOL = 1e-8
XTOL = 1e-7
POLISH_XTOL = 1e-10
MAX_EVALS = 3000
POLISH_EVALS = 1500
INITIAL_STEP = 0.1
POLISH_STEP = 0.01
# spread of simplex values at convergence
FATOL = 1e-12


@dataclass(frozen=True)
class ParamBox:
    eps: tuple = (0.1, 100.0)
    eta: tuple = (1.05, 10.0)
    rho: tuple = (-5.0, 0.99)

    def __post_init__(self):
        for name in PARAM_NAMES:
            lo, hi = (float(v) for v in getattr(self, name))
            low_allowed, high_allowed = ALLOWED[name]
            if not (math.isfinite(lo) and math.isfinite(hi)) or lo > hi:
                raise ConfigurationError(f"box.{name} must be an ordered pair, got ({lo}, {hi})", key=f"box.{name}")
            # eta is open at its lower limit
            too_low = lo <= low_allowed if name == "eta" else lo < low_allowed
            if too_low or hi > high_allowed:
                raise ConfigurationError(
                    f"box.{name} = ({lo}, {hi}) leaves the admissible range {ALLOWED[name]}", key=f"box.{name}"
                )
            object.__setattr__(self, name, (lo, hi))

    @classmethod
    def around(cls, eps, eta, rho):
        """The degenerate box holding a single point."""
        return cls(eps=(eps, eps), eta=(eta, eta), rho=(rho, rho))

    @property
    def free(self):
        return tuple(name for name in PARAM_NAMES if getattr(self, name)[1] > getattr(self, name)[0])

    def _coordinate(self, name, u):
        lo, hi = getattr(self, name)
        if name == "eps":
            return math.exp(math.log(lo) + u * (math.log(hi) - math.log(lo)))
        return lo + u * (hi - lo)

    def values_at(self, z):
        """(eps, eta, rho) for a point of the unit cube over the free coordinates."""
        z = iter(np.clip(np.asarray(z, dtype=float), 0.0, 1.0))
        out = {}
        for name in PARAM_NAMES:
            lo, hi = getattr(self, name)
            out[name] = self._coordinate(name, float(next(z))) if hi > lo else lo
        return out

    def params_at(self, z, base):
        return base.with_updates(market_mode=MARKUP, price=None, **self.values_at(z))

    def to_dict(self):
        return {name: list(getattr(self, name)) for name in PARAM_NAMES}


@dataclass(frozen=True)
class SimplexResult:
    z: np.ndarray
    value: float
    converged: bool
    evaluations: int
    reason: str


@dataclass(frozen=True)
class StartResult:
    start: int
    eps: float
    eta: float
    rho: float
    objective: float
    converged: bool
    evaluations: int
    reason: str


@dataclass(frozen=True)
class CmdResult:
    eps_hat: float
    eta_hat: float
    rho_hat: float
    sigma_KL_hat: float
    objective_value: float
    converged: bool
    starts_tried: int
    evaluations: int = 0
    starts: list = field(default_factory=list)

    def as_dict(self):
        return asdict(self)


def _initial_simplex(start, step):
    simplex = [start]
    for i in range(start.size):
        vertex = start.copy()
        vertex[i] = vertex[i] + step if vertex[i] + step <= 1.0 else vertex[i] - step
        simplex.append(vertex)
    return np.array(simplex)


def nelder_mead(func, start, *, step=INITIAL_STEP, ftol=FTOL, xtol=XTOL, max_evals=MAX_EVALS):
    """
    Minimize func over the unit cube with scipy's bounded Nelder-Mead.

    Stops when the best value drops below ftol or the simplex shrinks below
    xtol; running out of evaluations returns converged=False.
    """
    start = np.clip(np.asarray(start, dtype=float), 0.0, 1.0)

    def halt(intermediate_result):
        if intermediate_result.fun < ftol:
            raise StopIteration

    result = minimize(
        lambda z: float(func(z)),
        start,
        method="Nelder-Mead",
        bounds=[(0.0, 1.0)] * start.size,
        callback=halt,
        options={
            "initial_simplex": _initial_simplex(start, step),
            "xatol": xtol,
            "fatol": FATOL,
            "maxfev": max_evals,
            "maxiter": max_evals,
        },
    )
    z, value = np.clip(result.x, 0.0, 1.0), float(result.fun)
    if value < ftol:
        return SimplexResult(z, value, True, result.nfev, "objective")
    if result.status == 0:
        return SimplexResult(z, value, True, result.nfev, "simplex")
    return SimplexResult(z, value, False, result.nfev, "max_evals")


@dataclass(frozen=True)
class _Problem:
    moments: object
    phi1: float
    phi2: float
    box: ParamBox
    base: EconomyParams
    weight: np.ndarray
    step: float

    def __call__(self, z):
        params = self.box.params_at(z, self.base)
        return cmd_objective(self.moments, params, self.phi1, self.phi2, weight=self.weight, step=self.step)


def _run_start(args):
    problem, index, z0 = args
    result = nelder_mead(problem, z0)
    values = problem.box.values_at(result.z)
    if is_penalized(result.value):
        logger.warning(f"Start {index}: every candidate the simplex visited was penalized")
    return StartResult(
        start=index,
        eps=values["eps"],
        eta=values["eta"],
        rho=values["rho"],
        objective=result.value,
        converged=result.converged and not is_penalized(result.value),
        evaluations=result.evaluations,
        reason=result.reason,
    ), result.z


def latin_hypercube_starts(n_free, starts, seed):
    sampler = qmc.LatinHypercube(d=n_free, seed=np.random.default_rng(seed))
    return sampler.random(n=starts)


def cmd_estimate(
    moments,
    phi1,
    phi2,
    box=None,
    *,
    base=None,
    starts=MIN_STARTS,
    seed=0,
    workers=1,
    weight=None,
    step=FD_STEP,
    polish=True,
):
    """
    Multi-start minimum-distance estimate of (eps, eta, rho).

    weight defaults to the inverse moment covariance. When no start
    converges the best incumbent is returned with converged=False.
    """
    box = box or ParamBox()
    base = base or EconomyParams()
    if starts < MIN_STARTS:
        raise ConfigurationError(f"starts must be >= {MIN_STARTS}, got {starts}", key="starts")
    if weight is None:
        weight = weighting_matrix(moments.vcov)
    problem = _Problem(moments, phi1, phi2, box, base, np.asarray(weight, dtype=float), step)
    free = box.free

    if not free:
        value = problem(np.zeros(0))
        point = box.values_at(np.zeros(0))
        logger.info(f"Degenerate box, objective {value:.3g} at the only admissible point")
        return _result(point, value, value < FTOL, 1, 1, [])

    points = latin_hypercube_starts(len(free), starts, seed)
    outcomes = map_ordered(_run_start, [(problem, i, z0) for i, z0 in enumerate(points)], workers)
    start_results = [r for r, _ in outcomes]
    best_index = min(range(len(outcomes)), key=lambda i: (start_results[i].objective, i))
    best, best_z = outcomes[best_index]
    evaluations = sum(r.evaluations for r in start_results)
    value, z, converged = best.objective, best_z, best.converged

    if polish and not is_penalized(value):
        refined = nelder_mead(problem, z, step=POLISH_STEP, ftol=0.0, xtol=POLISH_XTOL, max_evals=POLISH_EVALS)
        evaluations += refined.evaluations
        if refined.value <= value:
            value, z = refined.value, refined.z
            converged = converged or refined.converged

    point = box.values_at(z)
    n_converged = sum(r.converged for r in start_results)
    logger.info(
        f"CMD estimate eps={point['eps']:.6g} eta={point['eta']:.6g} rho={point['rho']:.6g} "
        f"objective={value:.3g} ({n_converged}/{len(start_results)} starts converged, {evaluations} evaluations)"
    )
    if not converged:
        logger.warning("No CMD start converged; reporting the best incumbent")
    return _result(point, value, converged, len(start_results), evaluations, start_results)


def _result(point, value, converged, starts_tried, evaluations, start_results):
    return CmdResult(
        eps_hat=point["eps"],
        eta_hat=point["eta"],
        rho_hat=point["rho"],
        sigma_KL_hat=1.0 / (1.0 - point["rho"]),
        objective_value=float(value),
        converged=bool(converged),
        starts_tried=starts_tried,
        evaluations=evaluations,
        starts=[asdict(r) for r in start_results],
    )
