"""Closed-form error and resource models for selective encoding.

The linear error model compares running every CNOT bare (``n2 * p2``) with
running CNOTs on patches and paying for each conversion
(``n2 * pL + nc * pc``). The magic-state model charges a Clifford+T rotation
for the idling of ``n`` logical qubits during distillation.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

# published figures for the (15-to-1)_{13,5,5} protocol at p2 = 1e-3
MSD_FACTORY_QUBITS = 2594
MSD_CYCLES = 31.5
MSD_T_INFIDELITY = 1.9e-6
# average Clifford+T depth blow-up over the VQA benchmarks
MSD_DEPTH_FACTOR = 14.9
MEASURED_PC = 4.3e-3
MIN_BUDGET_DISTANCE = 2


class AnalysisError(ValueError):
    pass


def _prob(name: str, p: float) -> None:
    if not 0.0 <= p <= 1.0:
        raise AnalysisError(f"{name}={p} is not a probability")


def _count(name: str, n: float) -> None:
    if n < 0:
        raise AnalysisError(f"{name}={n} must be >= 0")


@dataclass(frozen=True)
class ErrorBudget:
    p1: float = 1e-6
    p2: float = 1e-3
    pL: float = 1e-6
    pc: float = MEASURED_PC
    n2: int = 0
    nc: int = 0
    n: int = 1
    t: float = MSD_CYCLES

    def __post_init__(self):
        for k in ("p1", "p2", "pL", "pc"):
            _prob(k, getattr(self, k))
        for k in ("n2", "nc", "n", "t"):
            _count(k, getattr(self, k))

    def p_nisq(self) -> float:
        return p_nisq(self.n2, self.p2)

    def p_conv(self) -> float:
        return p_conv(self.n2, self.pL, self.nc, self.pc)

    def conversion_wins(self) -> bool:
        return conversion_wins(self.n2, self.nc, self.p2, self.pL, self.pc)

    def to_dict(self) -> dict:
        return asdict(self)


def p_nisq(n2: int, p2: float) -> float:
    """Probability that at least one of ``n2`` bare CNOTs fails."""
    _count("n2", n2)
    _prob("p2", p2)
    return -math.expm1(n2 * math.log1p(-p2)) if p2 < 1 else float(n2 > 0)


def p_nisq_linear(n2: int, p2: float) -> float:
    _count("n2", n2)
    _prob("p2", p2)
    return n2 * p2


def p_conv(n2: int, pL: float, nc: int, pc: float) -> float:
    """Linear error of ``n2`` logical CNOTs plus ``nc`` conversions."""
    _count("n2", n2)
    _count("nc", nc)
    _prob("pL", pL)
    _prob("pc", pc)
    return n2 * pL + nc * pc


def p_conv_exact(n2: int, pL: float, nc: int, pc: float) -> float:
    """Same events treated as independent failures."""
    p_conv(n2, pL, nc, pc)
    return 1.0 - (1.0 - pL) ** n2 * (1.0 - pc) ** nc


def crossover_ratio(p2: float, pL: float, pc: float) -> float:
    """Smallest ``n2/nc`` at which conversions beat bare execution."""
    _prob("p2", p2)
    _prob("pL", pL)
    _prob("pc", pc)
    if p2 == 0:
        raise AnalysisError("crossover is undefined for p2 = 0")
    if pL >= p2:
        return math.inf
    return (pc / p2) / (1.0 - pL / p2)


def conversion_wins(n2: int, nc: int, p2: float, pL: float, pc: float) -> bool:
    """The inequality ``pc/p2 < (n2/nc)(1 - pL/p2)``; with ``nc = 0`` it reduces to ``pL < p2``."""
    _count("n2", n2)
    _count("nc", nc)
    if p2 == 0:
        raise AnalysisError("crossover is undefined for p2 = 0")
    if nc == 0:
        return n2 > 0 and pL < p2
    return pc / p2 < (n2 / nc) * (1.0 - pL / p2)


def gridsynth_t_count(eps: float) -> float:
    if not 0 < eps < 1:
        raise AnalysisError("precision must lie in (0, 1)")
    return 3.0 * math.log2(1.0 / eps)


def t_count_bound(pL: float) -> float:
    """T gates per rotation at precision ``sqrt(pL)``."""
    if not 0 < pL < 1:
        raise AnalysisError("pL must lie in (0, 1)")
    return 1.5 * math.log2(1.0 / pL)


@dataclass(frozen=True)
class MsdOverheads:
    t_count_bound: float
    idling_error_per_qubit: float
    n: int
    per_gate_conversion_error: float

    @property
    def idling_error(self) -> float:
        return self.idling_error_per_qubit * self.n

    @property
    def conversion_preferred(self) -> bool:
        return self.per_gate_conversion_error < self.idling_error

    def to_dict(self) -> dict:
        out = asdict(self)
        out["idling_error"] = self.idling_error
        out["conversion_preferred"] = self.conversion_preferred
        return out


def msd_overheads(pL: float, n: int = 1, t: float = MSD_CYCLES, pc: float = MEASURED_PC) -> MsdOverheads:
    """T-count bound, idling error while ``n`` qubits wait ``t`` cycles per T state, and ``2 pc``."""
    _count("n", n)
    _prob("pc", pc)
    tc = t_count_bound(pL)
    return MsdOverheads(tc, tc * t * pL, n, 2.0 * pc)


def patch_qubits(d: int, mode: str = "exact") -> int:
    if mode == "exact":
        return 2 * d * d - 1
    if mode == "padded":
        return 2 * d * d
    raise AnalysisError(f"unknown accounting mode {mode!r}")


@dataclass(frozen=True)
class QubitBudget:
    n: int
    d: int
    mode: str
    selective_qubits: int
    msd_factory_qubits: int
    msd_remaining_qubits: int
    msd_remaining_distance: int | None

    @property
    def msd_feasible(self) -> bool:
        return self.msd_remaining_distance is not None

    def to_dict(self) -> dict:
        out = asdict(self)
        out["msd_feasible"] = self.msd_feasible
        return out


def qubit_budgets(n: int, d: int, mode: str = "exact", factory: int = MSD_FACTORY_QUBITS,
                  require_msd: bool = False) -> QubitBudget:
    """Equal-budget comparison: all ``n`` qubits at distance ``d`` versus one factory plus smaller patches.

    ``mode`` picks ``2d^2 - 1`` (exact) or ``2d^2`` (padded) qubits per patch
    for the budget. The remaining distance is the largest ``d'`` (even allowed)
    with ``n (2d'^2 - 1)`` fitting in what the factory leaves; it is None when
    not even distance-2 patches fit, and ``require_msd`` turns that into an error.
    """
    if n < 1:
        raise AnalysisError("n must be >= 1")
    if d < 3 or d % 2 == 0:
        raise AnalysisError("d must be odd and >= 3")
    budget = n * patch_qubits(d, mode)
    remainder = budget - factory
    if remainder < n * patch_qubits(MIN_BUDGET_DISTANCE):
        if require_msd:
            raise AnalysisError(
                f"{remainder} qubits left after the factory cannot host {n} patches of distance {MIN_BUDGET_DISTANCE}"
            )
        return QubitBudget(n, d, mode, budget, factory, remainder, None)
    dprime = math.isqrt((remainder // n + 1) // 2)
    while n * patch_qubits(dprime + 1) <= remainder:
        dprime += 1
    while n * patch_qubits(dprime) > remainder:
        dprime -= 1
    return QubitBudget(n, d, mode, budget, factory, remainder, dprime)


def crossover_table(p2: float, pL: float, pc: float, ratios) -> list[dict]:
    rows = []
    for r in ratios:
        nc = 100
        n2 = int(round(r * nc))
        rows.append({
            "ratio": r, "n2": n2, "nc": nc,
            "p_nisq": p_nisq(n2, p2), "p_nisq_linear": p_nisq_linear(n2, p2),
            "p_conv": p_conv(n2, pL, nc, pc),
            "conversion_wins": conversion_wins(n2, nc, p2, pL, pc),
        })
    return rows


def report(n: int = 30, d: int = 9, p2: float = 1e-3, pL: float = 1e-6, pc: float = MEASURED_PC,
           t: float = MSD_CYCLES, ratios=(1, 2, 3, 4, 5, 6, 8, 10, 20)) -> dict:
    return {
        "inputs": {"n": n, "d": d, "p2": p2, "pL": pL, "pc": pc, "t": t},
        "budgets": {m: qubit_budgets(n, d, m).to_dict() for m in ("exact", "padded")},
        "crossover_ratio": crossover_ratio(p2, pL, pc),
        "crossover_table": crossover_table(p2, pL, pc, ratios),
        "msd": msd_overheads(pL, n, t, pc).to_dict(),
        "msd_depth_factor": MSD_DEPTH_FACTOR,
    }
