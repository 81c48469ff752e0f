"""
Primitive functions: labor supply, CES technology, markdown.

The equilibrium solvers work with x = log(L/K). Under constant returns
log Q = log K + a(x), where a(x) = log f(e^x, 1).
"""

import math

import numpy as np
from scipy.special import expit

from config.exceptions import DomainError

COBB_DOUGLAS_TOL = 1e-6


def labor_supply_wage(L, w0, eps):
    """Inverse labor supply w = w0 * L^(1/eps)."""
    if L <= 0:
        raise DomainError(f"labor must be positive, got {L}")
    if w0 <= 0:
        raise DomainError(f"w0 must be positive, got {w0}")
    if eps <= 0:
        raise DomainError(f"eps must be positive, got {eps}")
    return w0 * math.exp(math.log(L) / eps)


def ces_output(L, K, s_L, s_K, rho):
    """f = (s_L L^rho + s_K K^rho)^(1/rho), Cobb-Douglas L^s_L K^s_K near rho = 0."""
    if rho >= 1:
        raise DomainError(f"rho must be < 1, got {rho}")
    if L <= 0 or K <= 0:
        raise DomainError(f"inputs must be positive, got L={L}, K={K}")
    if s_L <= 0 or s_K <= 0:
        raise DomainError(f"distribution weights must be positive, got s_L={s_L}, s_K={s_K}")

    log_L, log_K = math.log(L), math.log(K)
    if abs(rho) < COBB_DOUGLAS_TOL:
        return math.exp(s_L * log_L + s_K * log_K)
    log_sum = np.logaddexp(math.log(s_L) + rho * log_L, math.log(s_K) + rho * log_K)
    return math.exp(float(log_sum) / rho)


def markdown(eps):
    """(MRPL - w) / w at the monopsony optimum."""
    if eps <= 0:
        raise DomainError(f"eps must be positive, got {eps}")
    return 1.0 / eps


def log_output_per_capital(x, s_L, s_K, rho):
    """a(x) = log f(e^x, 1) for weights summing to one."""
    if abs(rho) < COBB_DOUGLAS_TOL:
        return s_L * x
    return float(np.logaddexp(math.log(s_L) + rho * x, math.log(s_K))) / rho


def labor_output_elasticity(x, s_L, s_K, rho):
    """a'(x) = d log f / d log L, which under CRS is also the labor share of output."""
    if abs(rho) < COBB_DOUGLAS_TOL:
        return s_L
    return float(expit(math.log(s_L) - math.log(s_K) + rho * x))


def marginal_product_labor(L, K, s_L, s_K, rho):
    Q = ces_output(L, K, s_L, s_K, rho)
    x = math.log(L) - math.log(K)
    return labor_output_elasticity(x, s_L, s_K, rho) * Q / L


def marginal_product_capital(L, K, s_L, s_K, rho):
    Q = ces_output(L, K, s_L, s_K, rho)
    x = math.log(L) - math.log(K)
    return (1.0 - labor_output_elasticity(x, s_L, s_K, rho)) * Q / K
