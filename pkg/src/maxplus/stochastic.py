"""Stochastic max-plus recursions x(n+1) = A(n) x(n).

Distributions over matrices come in two shapes: a finite support with iid
or Markov-modulated draws, and seeded generator callbacks for continuous
laws. Everything downstream is replayable: random streams are derived from
(seed, replication, channel) alone, replications are independent units, and
aggregation is order-insensitive, so reports do not depend on thread count.

The analysis operations split along the exact/float line. Exact rational
models support coupling certificates (windows whose matrix product is
rank-one), projective-semigroup pattern search, and structural condition
checks; float models get Monte-Carlo estimates and eta-coupling.
"""

from __future__ import annotations

import bisect
import math
from concurrent.futures import ThreadPoolExecutor
from collections import deque
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Optional, Sequence, Union

import numpy as np

from .graphs import graph_of, is_irreducible, scc_decompose, scc_from_arcs
from .projective import (
    ProjVector,
    canonicalize,
    is_rank_one,
    matrix_proj_normal,
    proj_dist,
    proj_diameter,
)
from .semiring import (
    EPS,
    EXACT,
    FLOAT,
    ContractViolation,
    Matrix,
    Vector,
    as_scalar,
    mat_mul,
    mat_vec,
    matrix_from_json,
    matrix_to_json,
    scalar_to_json,
    zero,
)
from .spectral import is_scs1cyc1

DEFAULT_ETA = 1e-6
_Z95 = 1.959963984540054


# ---------------------------------------------------------------------------
# Distributions


def _as_probability(value):
    """Probabilities are Fractions when given exactly, floats otherwise."""
    if isinstance(value, str):
        value = Fraction(value.strip())
    if isinstance(value, bool):
        raise ContractViolation("bool is not a probability")
    if isinstance(value, (int, Fraction)):
        return Fraction(value)
    return float(value)


@dataclass(frozen=True)
class FiniteSupport:
    """Finitely many matrices A_l with probabilities p_l > 0.

    kernel is None for iid draws; otherwise a row-stochastic matrix over
    the support indices, and the index sequence is the stationary Markov
    chain it defines.
    """

    matrices: tuple
    probabilities: tuple
    kernel: Optional[tuple] = None

    @staticmethod
    def make(matrices, probabilities, kernel=None) -> "FiniteSupport":
        mats = tuple(matrices)
        if not mats:
            raise ContractViolation("FiniteSupport: empty support")
        k = mats[0].k
        backing = mats[0].backing
        for M in mats:
            if M.k != k:
                raise ContractViolation("FiniteSupport: mixed dimensions")
            if M.backing != backing:
                raise ContractViolation("FiniteSupport: mixed backings")
        probs = tuple(_as_probability(p) for p in probabilities)
        if len(probs) != len(mats):
            raise ContractViolation("FiniteSupport: probabilities do not match support")
        if any((p <= 0) for p in probs):
            raise ContractViolation("FiniteSupport: probabilities must be positive")
        if all(isinstance(p, Fraction) for p in probs):
            if sum(probs) != 1:
                raise ContractViolation("FiniteSupport: probabilities must sum to 1 exactly")
        elif abs(sum(float(p) for p in probs) - 1.0) > 1e-12:
            raise ContractViolation("FiniteSupport: probabilities must sum to 1 within 1e-12")
        knl = None
        if kernel is not None:
            rows = tuple(tuple(_as_probability(p) for p in row) for row in kernel)
            if len(rows) != len(mats) or any(len(r) != len(mats) for r in rows):
                raise ContractViolation("FiniteSupport: kernel shape must match support size")
            for row in rows:
                if any(p < 0 for p in row):
                    raise ContractViolation("FiniteSupport: kernel entries must be >= 0")
                if all(isinstance(p, Fraction) for p in row):
                    if sum(row) != 1:
                        raise ContractViolation("FiniteSupport: kernel rows must sum to 1")
                elif abs(sum(float(p) for p in row) - 1.0) > 1e-12:
                    raise ContractViolation("FiniteSupport: kernel rows must sum to 1")
            knl = rows
        return FiniteSupport(mats, probs, knl)

    @property
    def k(self) -> int:
        return self.matrices[0].k

    @property
    def backing(self) -> str:
        return self.matrices[0].backing

    @property
    def size(self) -> int:
        return len(self.matrices)

    def is_iid(self) -> bool:
        return self.kernel is None

    def to_float(self) -> "FiniteSupport":
        return FiniteSupport(
            tuple(M.to_float() for M in self.matrices),
            tuple(float(p) for p in self.probabilities),
            self.kernel,
        )


@dataclass(frozen=True)
class GeneratorDistribution:
    """Seeded callback producing float matrices A(n) from a stream position.

    sample_fn receives the per-(seed, replication, channel) random stream
    and the position n, and must depend on nothing else.
    """

    k: int
    sample_fn: Callable
    name: str = "custom"
    params: tuple = ()

    @property
    def backing(self) -> str:
        return FLOAT


MatrixDistribution = Union[FiniteSupport, GeneratorDistribution]


def dist_backing(D: MatrixDistribution) -> str:
    return D.backing


def _stream(seed: int, replication: int = 0, channel: int = 0) -> np.random.Generator:
    if seed < 0:
        raise ContractViolation("seed must be a non-negative integer")
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=(int(replication), int(channel)))
    return np.random.default_rng(ss)


def _cum_floats(probs) -> list:
    cum = []
    acc = 0.0
    for p in probs:
        acc += float(p)
        cum.append(acc)
    cum[-1] = max(cum[-1], 1.0)
    return cum


def _pick(cum: list, u: float) -> int:
    idx = bisect.bisect_right(cum, u)
    return min(idx, len(cum) - 1)


def stationary_distribution(kernel) -> tuple:
    """Fixed point of p = pK from the uniform start, damped to kill
    periodic kernels; tiny entries are clipped to exactly 0."""
    m = len(kernel)
    rows = [[float(p) for p in row] for row in kernel]
    p = [1.0 / m] * m
    for _ in range(200000):
        q = [0.0] * m
        for i, pi in enumerate(p):
            if pi == 0.0:
                continue
            row = rows[i]
            for j in range(m):
                if row[j]:
                    q[j] += pi * row[j]
        nxt = [(a + b) / 2.0 for a, b in zip(p, q)]
        if max(abs(a - b) for a, b in zip(nxt, p)) < 1e-15:
            p = nxt
            break
        p = nxt
    p = [0.0 if x < 1e-12 else x for x in p]
    total = sum(p)
    return tuple(x / total for x in p)


def _recurrent_letters(kernel) -> tuple:
    """Indices with positive stationary mass: members of sink components of
    the positive-transition graph."""
    m = len(kernel)
    arcs = [(i, j) for i in range(m) for j in range(m) if float(kernel[i][j]) > 0.0]
    dec = scc_from_arcs(m, arcs)
    out = []
    for ci, comp in enumerate(dec.components):
        if all(src != ci for src, _dst in dec.condensation_arcs):
            out.extend(comp)
    return tuple(sorted(out))


def _reverse_kernel_cum(kernel, pi) -> list:
    """Cumulative rows of the time-reversed kernel K'(i, j) = pi_j K(j, i) / pi_i."""
    m = len(kernel)
    rows = []
    for i in range(m):
        if pi[i] <= 0.0:
            rows.append(_cum_floats([1.0 / m] * m))
            continue
        raw = [pi[j] * float(kernel[j][i]) / pi[i] for j in range(m)]
        total = sum(raw)
        rows.append(_cum_floats([x / total for x in raw]))
    return rows


class _MatrixStream:
    """Sequential sampler of A(0), A(1), ... or, backward, A(-1), A(-2), ..."""

    def __init__(self, dist: MatrixDistribution, rng: np.random.Generator, backward: bool = False):
        self.dist = dist
        self.rng = rng
        self.position = 0
        self._state = None
        if isinstance(dist, FiniteSupport):
            self._cum = _cum_floats(dist.probabilities)
            if dist.kernel is not None:
                pi = stationary_distribution(dist.kernel)
                self._pi_cum = _cum_floats(pi)
                if backward:
                    self._rows = _reverse_kernel_cum(dist.kernel, pi)
                else:
                    self._rows = [_cum_floats(row) for row in dist.kernel]

    def next(self) -> Matrix:
        d = self.dist
        if isinstance(d, GeneratorDistribution):
            A = d.sample_fn(self.rng, self.position)
            self.position += 1
            if not isinstance(A, Matrix) or A.k != d.k or A.backing != FLOAT:
                raise ContractViolation(
                    f"generator {d.name!r} must produce float matrices of size {d.k}"
                )
            return A
        if d.kernel is None:
            idx = _pick(self._cum, float(self.rng.random()))
        else:
            if self._state is None:
                self._state = _pick(self._pi_cum, float(self.rng.random()))
            else:
                self._state = _pick(self._rows[self._state], float(self.rng.random()))
            idx = self._state
        self.position += 1
        return d.matrices[idx]


def _require_row_finite(A: Matrix, when: str) -> None:
    bad = A.row_finite_violation()
    if bad is not None:
        raise ContractViolation(f"{when}: matrix row {bad} is all eps (every row needs a finite entry)")


def _check_condition_i(D: FiniteSupport) -> None:
    for idx, M in enumerate(D.matrices):
        bad = M.row_finite_violation()
        if bad is not None:
            raise ContractViolation(
                f"support matrix {idx} violates the row-finiteness condition at row {bad}"
            )


def sample_sequence(D: MatrixDistribution, seed: int, n: int, replication: int = 0) -> list:
    """The matrices A(0), ..., A(n-1) that any same-seeded run will see."""
    stream = _MatrixStream(D, _stream(seed, replication, 0))
    return [stream.next() for _ in range(n)]


# ---------------------------------------------------------------------------
# Simulation


@dataclass(frozen=True)
class TrajectoryRecord:
    seed: int
    replication: int
    horizon: int
    thin: int
    x0: Vector
    sample_times: tuple
    states: tuple
    projective: tuple
    increments: tuple  # z(n) = x(n) - x(n-1) for n = 1..horizon, unthinned


def simulate(
    D: MatrixDistribution,
    x0: Vector,
    horizon: int,
    seed: int,
    replication: int = 0,
    thin: int = 1,
) -> TrajectoryRecord:
    """Run x(n+1) = A(n) x(n) and record states, projective states, and
    increments. Replayable: the same (seed, replication) always sees the
    same matrices (cf. sample_sequence)."""
    if horizon < 0 or thin < 1:
        raise ContractViolation("simulate: horizon must be >= 0 and thin >= 1")
    if not x0.is_finite():
        raise ContractViolation("simulate: initial condition must be finite")
    if len(x0) != D.k:
        raise ContractViolation(f"simulate: x0 has length {len(x0)}, model has k={D.k}")
    if x0.backing != dist_backing(D):
        raise ContractViolation("simulate: x0 backing does not match the distribution")
    if isinstance(D, FiniteSupport):
        _check_condition_i(D)
    stream = _MatrixStream(D, _stream(seed, replication, 0))
    times = [0]
    states = [x0]
    # The projective track advances from the canonical representative, not
    # from the absolute state: identical for exact backing (the action
    # commutes with adding constants), and for float backing it keeps
    # rounding error independent of the state's growing magnitude.
    proj = canonicalize(x0)
    projective = [proj]
    increments = []
    x = x0
    for n in range(1, horizon + 1):
        A = stream.next()
        if isinstance(D, GeneratorDistribution):
            _require_row_finite(A, "simulate")
        nxt = mat_vec(A, x)
        increments.append(tuple(b - a for a, b in zip(x.entries, nxt.entries)))
        x = nxt
        proj = canonicalize(mat_vec(A, proj.as_vector()))
        if n % thin == 0 or n == horizon:
            times.append(n)
            states.append(x)
            projective.append(proj)
    return TrajectoryRecord(
        seed=seed,
        replication=replication,
        horizon=horizon,
        thin=thin,
        x0=x0,
        sample_times=tuple(times),
        states=tuple(states),
        projective=tuple(projective),
        increments=tuple(increments),
    )


def _map_replications(fn, replications: int, threads: int) -> list:
    if replications < 1:
        raise ContractViolation("replications must be >= 1")
    if threads <= 1:
        return [fn(r) for r in range(replications)]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, range(replications)))


@dataclass(frozen=True)
class LyapunovEstimate:
    point: object
    ci_low: float
    ci_high: float
    std_error: float
    horizon: int
    replications: int
    per_replication: tuple

    def to_json(self) -> dict:
        return {
            "point": scalar_to_json(self.point),
            "ci_low": self.ci_low,
            "ci_high": self.ci_high,
            "std_error": self.std_error,
            "horizon": self.horizon,
            "replications": self.replications,
            "per_replication": [scalar_to_json(v) for v in self.per_replication],
        }


def lyapunov_estimate(
    D: MatrixDistribution,
    horizon: int,
    replications: int = 30,
    seed: int = 0,
    x0: Optional[Vector] = None,
    threads: int = 1,
    channel: int = 0,
) -> LyapunovEstimate:
    """Estimate the growth rate: mean over replications of |x(horizon)|_inf / horizon.

    The confidence interval is the 95% normal approximation across
    replications. Estimates are invariant to the finite initial condition
    up to O(1/horizon); that is tested, not assumed.
    """
    if horizon < 1:
        raise ContractViolation("lyapunov_estimate: horizon must be >= 1")
    backing = dist_backing(D)
    if x0 is None:
        e = zero(backing)
        x0 = Vector((e,) * D.k, backing)

    def one(rep: int):
        if isinstance(D, FiniteSupport):
            _check_condition_i(D)
        stream = _MatrixStream(D, _stream(seed, rep, channel))
        x = x0
        for _ in range(horizon):
            A = stream.next()
            if isinstance(D, GeneratorDistribution):
                _require_row_finite(A, "lyapunov_estimate")
            x = mat_vec(A, x)
        return max(abs(v) for v in x.entries) / horizon

    values = _map_replications(one, replications, threads)
    if backing == EXACT:
        point = sum(values, Fraction(0)) / len(values)
    else:
        point = sum(values) / len(values)
    fvals = [float(v) for v in values]
    mean = sum(fvals) / len(fvals)
    if len(fvals) > 1:
        var = sum((v - mean) ** 2 for v in fvals) / (len(fvals) - 1)
        se = math.sqrt(var / len(fvals))
    else:
        se = 0.0
    return LyapunovEstimate(
        point=point,
        ci_low=mean - _Z95 * se,
        ci_high=mean + _Z95 * se,
        std_error=se,
        horizon=horizon,
        replications=replications,
        per_replication=tuple(values),
    )


# ---------------------------------------------------------------------------
# Forward coupling


@dataclass(frozen=True)
class CouplingSample:
    replication: int
    merge_time: Optional[int]
    eta_time: Optional[int]
    window_start: Optional[int]
    window_length: Optional[int]

    @property
    def certified_time(self) -> Optional[int]:
        if self.window_start is None:
            return None
        return self.window_start + self.window_length


@dataclass(frozen=True)
class CouplingReport:
    """Per-replication coupling observations for a set of initial conditions.

    merge_time is the first step at which every trajectory lies in one
    projective class (exact backing only; all trajectories see the same
    matrices). The window (start, length) is the earliest-completing
    factor window whose product is exactly rank-one; from its end every
    initial condition, observed or not, is merged. eta_time is the first
    step with all pairwise projective distances <= eta.
    """

    eta: float
    horizon: int
    replications: int
    modes: tuple
    initial_conditions: tuple
    samples: tuple

    def merge_times(self) -> list:
        return [s.merge_time for s in self.samples]

    def strong_fraction(self) -> float:
        hits = sum(1 for s in self.samples if s.merge_time is not None)
        return hits / len(self.samples)

    def certified_fraction(self) -> float:
        hits = sum(1 for s in self.samples if s.window_start is not None)
        return hits / len(self.samples)

    def eta_fraction(self) -> float:
        hits = sum(1 for s in self.samples if s.eta_time is not None)
        return hits / len(self.samples)

    def coupled_fraction_by(self, t: int) -> float:
        hits = sum(
            1 for s in self.samples if s.merge_time is not None and s.merge_time <= t
        )
        return hits / len(self.samples)


def _couple_one(D, x0s, horizon, eta, seed, rep, track_strong):
    stream = _MatrixStream(D, _stream(seed, rep, 0))
    xs = list(x0s)
    merge_time = None
    eta_time = None
    window = (None, None)

    def merged() -> bool:
        first = canonicalize(xs[0]).entries
        return all(canonicalize(x).entries == first for x in xs[1:])

    def eta_close() -> bool:
        for i in range(len(xs)):
            for j in range(i + 1, len(xs)):
                if proj_dist(xs[i], xs[j]) > eta:
                    return False
        return True

    if track_strong and merged():
        merge_time = 0
    if eta_close():
        eta_time = 0
    matrices = []
    prefix = None
    for n in range(1, horizon + 1):
        done_strong = (not track_strong) or (merge_time is not None and window[0] is not None)
        if done_strong and eta_time is not None:
            break
        A = stream.next()
        if isinstance(D, GeneratorDistribution):
            _require_row_finite(A, "forward_coupling")
        xs = [mat_vec(A, x) for x in xs]
        if track_strong and window[0] is None:
            matrices.append(A)
            prefix = A if prefix is None else mat_mul(A, prefix)
            if is_rank_one(prefix):
                # shortest window ending here: walk the start backwards;
                # prod accumulates A(n-1) ... A(p) and p = 0 always hits
                prod = None
                for p in range(n - 1, -1, -1):
                    prod = matrices[p] if prod is None else mat_mul(prod, matrices[p])
                    if is_rank_one(prod):
                        window = (p, n - p)
                        break
                matrices = []
        if track_strong and merge_time is None and merged():
            merge_time = n
        if eta_time is None and eta_close():
            eta_time = n
    return CouplingSample(
        replication=rep,
        merge_time=merge_time,
        eta_time=eta_time,
        window_start=window[0],
        window_length=window[1],
    )


def forward_coupling(
    D: MatrixDistribution,
    initial_conditions: Sequence[Vector],
    horizon: int,
    eta: float = DEFAULT_ETA,
    seed: int = 0,
    replications: int = 1,
    threads: int = 1,
) -> CouplingReport:
    """Drive all initial conditions with the same matrix sequence and watch
    them meet. Exact backing reports strong (exact projective merge) and
    eta coupling plus a rank-one window certificate; float backing reports
    eta coupling only."""
    x0s = tuple(initial_conditions)
    if len(x0s) < 2:
        raise ContractViolation("forward_coupling: need at least two initial conditions")
    backing = dist_backing(D)
    for x in x0s:
        if len(x) != D.k or not x.is_finite():
            raise ContractViolation("forward_coupling: initial conditions must be finite, length k")
        if x.backing != backing:
            raise ContractViolation("forward_coupling: initial condition backing mismatch")
    if isinstance(D, FiniteSupport):
        _check_condition_i(D)
    track_strong = backing == EXACT
    if eta is None or eta < 0:
        raise ContractViolation("forward_coupling: eta must be >= 0")

    def one(rep):
        return _couple_one(D, x0s, horizon, eta, seed, rep, track_strong)

    samples = _map_replications(one, replications, threads)
    return CouplingReport(
        eta=eta,
        horizon=horizon,
        replications=replications,
        modes=("strong", "eta") if track_strong else ("eta",),
        initial_conditions=x0s,
        samples=tuple(sorted(samples, key=lambda s: s.replication)),
    )


# ---------------------------------------------------------------------------
# Backward scheme


@dataclass(frozen=True)
class LoynesResult:
    """Outcome of the backward recursion P(n) = P(n-1) A(-n).

    The projective image of P(n) shrinks monotonically; once its diameter
    hits the tolerance (or the product is exactly rank-one at tolerance 0)
    every column lies in the same near-degenerate class, reported as Z.
    """

    converged: bool
    steps: int
    limit_class: Optional[ProjVector]
    achieved_diameter: object
    tolerance: object
    trace: tuple
    seed: int
    replication: int

    def to_json(self) -> dict:
        return {
            "converged": self.converged,
            "steps": self.steps,
            "limit_class": None
            if self.limit_class is None
            else [scalar_to_json(v) for v in self.limit_class.entries],
            "achieved_diameter": "inf"
            if self.achieved_diameter == math.inf
            else scalar_to_json(self.achieved_diameter),
            "tolerance": scalar_to_json(self.tolerance),
            "trace": [[n, "inf" if d == math.inf else float(d)] for n, d in self.trace],
            "seed": self.seed,
            "replication": self.replication,
        }


def _first_finite_column_class(P: Matrix) -> ProjVector:
    for j in range(P.k):
        col = P.col(j)
        if all(v is not EPS for v in col):
            return canonicalize(Vector(col, P.backing))
    raise ContractViolation("backward product has no finite column")


def backward_loynes(
    D: MatrixDistribution,
    tolerance=0,
    budget: int = 10000,
    seed: int = 0,
    replication: int = 0,
    trace_every: int = 1,
) -> LoynesResult:
    """Grow the backward product one past matrix at a time until its
    projective image is tolerance-thin. tolerance=0 demands an exactly
    rank-one product and needs the exact backing; float models must pass
    a positive tolerance. A budget exhaustion returns a partial result
    with converged=False rather than raising."""
    backing = dist_backing(D)
    tol = as_scalar(tolerance, backing) if tolerance != 0 else 0
    if tol is EPS:
        raise ContractViolation("backward_loynes: tolerance must be a number >= 0")
    if tolerance != 0 and tol < 0:
        raise ContractViolation("backward_loynes: tolerance must be >= 0")
    if tolerance == 0 and backing == FLOAT:
        raise ContractViolation(
            "backward_loynes: exact convergence (tolerance 0) needs the exact backing"
        )
    if isinstance(D, FiniteSupport):
        _check_condition_i(D)
    stream = _MatrixStream(D, _stream(seed, replication, 1), backward=True)
    P = None
    trace = []
    last_diam = math.inf
    for n in range(1, budget + 1):
        A = stream.next()
        if isinstance(D, GeneratorDistribution):
            _require_row_finite(A, "backward_loynes")
        P = A if P is None else mat_mul(P, A)
        if tolerance == 0:
            done = is_rank_one(P)
            diam = 0 if done else None
            if done:
                last_diam = 0
            if trace_every and (n % trace_every == 0 or done):
                if not done:
                    diam = proj_diameter(P)
                    last_diam = diam
                trace.append((n, float(diam)))
        else:
            diam = proj_diameter(P)
            last_diam = diam
            done = diam <= tol
            if trace_every and (n % trace_every == 0 or done):
                trace.append((n, float(diam) if diam != math.inf else math.inf))
        if done:
            return LoynesResult(
                converged=True,
                steps=n,
                limit_class=_first_finite_column_class(P),
                achieved_diameter=last_diam,
                tolerance=tol,
                trace=tuple(trace),
                seed=seed,
                replication=replication,
            )
    if last_diam == math.inf and P is not None and tolerance == 0:
        last_diam = proj_diameter(P)
    return LoynesResult(
        converged=False,
        steps=budget,
        limit_class=None,
        achieved_diameter=last_diam,
        tolerance=tol,
        trace=tuple(trace),
        seed=seed,
        replication=replication,
    )


# ---------------------------------------------------------------------------
# Word search over the admissible semigroup


def _initial_letters(D: FiniteSupport) -> tuple:
    if D.kernel is None:
        return tuple(range(D.size))
    return _recurrent_letters(D.kernel)


def _next_letters(D: FiniteSupport, last: int) -> tuple:
    if D.kernel is None:
        return tuple(range(D.size))
    return tuple(j for j in range(D.size) if float(D.kernel[last][j]) > 0.0)


def _word_bfs(D: FiniteSupport, on_state, max_len: int, budget: int):
    """Breadth-first walk over admissible words, one node per distinct
    (projective product class, last letter if Markov). on_state may return
    a result to stop with. Returns (result, saturated, explored) where
    saturated means the state space was exhausted below max_len."""
    seen = set()
    queue = deque()
    explored = 0
    for letter in _initial_letters(D):
        P = matrix_proj_normal(D.matrices[letter])
        key = (P.rows, letter if D.kernel is not None else None)
        if key in seen:
            continue
        seen.add(key)
        word = (letter,)
        res = on_state(word, P)
        if res is not None:
            return res, False, len(seen)
        queue.append((P, word))
    truncated = False
    while queue:
        explored += 1
        if explored > budget:
            return None, False, len(seen)
        P, word = queue.popleft()
        if len(word) >= max_len:
            truncated = True
            continue
        for letter in _next_letters(D, word[-1]):
            Q = matrix_proj_normal(mat_mul(D.matrices[letter], P))
            key = (Q.rows, letter if D.kernel is not None else None)
            if key in seen:
                continue
            seen.add(key)
            nxt = word + (letter,)
            res = on_state(nxt, Q)
            if res is not None:
                return res, False, len(seen)
            queue.append((Q, nxt))
    return None, not truncated, len(seen)


def word_product(D: FiniteSupport, word: Sequence[int]) -> Matrix:
    """Exact product A(u_{N-1}) ... A(u_0) of the word (u_0, ..., u_{N-1})."""
    P = D.matrices[word[0]]
    for letter in word[1:]:
        P = mat_mul(D.matrices[letter], P)
    return P


def word_probability(D: FiniteSupport, word: Sequence[int]):
    """Probability of seeing the word as the next len(word) letters; the
    stationary chain makes this time-invariant. Exact for iid rational
    probabilities, float under a Markov kernel."""
    if D.kernel is None:
        p = Fraction(1)
        for letter in word:
            p = p * D.probabilities[letter]
        return p
    pi = stationary_distribution(D.kernel)
    p = pi[word[0]]
    for a, b in zip(word, word[1:]):
        p *= float(D.kernel[a][b])
    return p


@dataclass(frozen=True)
class PatternReport:
    found: bool
    word: Optional[tuple]
    matrix: Optional[Matrix]
    length: Optional[int]
    classification: Optional[str]
    probability: object
    status: str  # found | saturated | truncated
    states_explored: int
    max_len: int
    scs1cyc1_word: Optional[tuple] = None
    scs1cyc1_matrix: Optional[Matrix] = None
    scs1cyc1_probability: object = None

    def to_json(self) -> dict:
        return {
            "found": self.found,
            "word": None if self.word is None else list(self.word),
            "matrix": None if self.matrix is None else matrix_to_json(self.matrix),
            "length": self.length,
            "classification": self.classification,
            "probability": None if self.probability is None else scalar_to_json(self.probability),
            "status": self.status,
            "states_explored": self.states_explored,
            "max_len": self.max_len,
            "scs1cyc1_word": None if self.scs1cyc1_word is None else list(self.scs1cyc1_word),
            "scs1cyc1_matrix": None
            if self.scs1cyc1_matrix is None
            else matrix_to_json(self.scs1cyc1_matrix),
            "scs1cyc1_probability": None
            if self.scs1cyc1_probability is None
            else scalar_to_json(self.scs1cyc1_probability),
        }


def pattern_search(D: FiniteSupport, max_len: int = 16, budget: int = 200000) -> PatternReport:
    """Search admissible words for one whose matrix product is rank-one
    (BFS, so a hit has minimal length). Also records the first word whose
    product is irreducible with a one-component, cyclicity-one critical
    graph, a weaker pattern that still forces coupling for iid models.

    status 'saturated' means every product class reachable below max_len
    was visited and none is rank-one, which is definitive for the whole
    semigroup; 'truncated' means the search ran out of length or budget.
    """
    if not isinstance(D, FiniteSupport):
        raise ContractViolation("pattern_search: needs a finite-support distribution")
    if D.backing != EXACT:
        raise ContractViolation("pattern_search: needs the exact backing")
    if max_len < 1:
        raise ContractViolation("pattern_search: max_len must be >= 1")
    _check_condition_i(D)
    weak = {}

    def on_state(word, P):
        if is_rank_one(P):
            return word
        if not weak and is_irreducible(P) and is_scs1cyc1(P):
            weak["word"] = word
        return None

    hit, saturated, explored = _word_bfs(D, on_state, max_len, budget)
    scs_word = weak.get("word")
    scs_mat = word_product(D, scs_word) if scs_word is not None else None
    scs_prob = word_probability(D, scs_word) if scs_word is not None else None
    if hit is not None:
        P = word_product(D, hit)
        cls = "rank-one"
        if is_irreducible(P) and is_scs1cyc1(P):
            cls = "rank-one+scs1cyc1"
        return PatternReport(
            found=True,
            word=hit,
            matrix=P,
            length=len(hit),
            classification=cls,
            probability=word_probability(D, hit),
            status="found",
            states_explored=explored,
            max_len=max_len,
            scs1cyc1_word=scs_word,
            scs1cyc1_matrix=scs_mat,
            scs1cyc1_probability=scs_prob,
        )
    return PatternReport(
        found=False,
        word=None,
        matrix=None,
        length=None,
        classification=None,
        probability=None,
        status="saturated" if saturated else "truncated",
        states_explored=explored,
        max_len=max_len,
        scs1cyc1_word=scs_word,
        scs1cyc1_matrix=scs_mat,
        scs1cyc1_probability=scs_prob,
    )


# ---------------------------------------------------------------------------
# Structural conditions


@dataclass(frozen=True)
class ConditionsReport:
    """condition_i: every support matrix has a finite entry in every row.
    condition_ii: some admissible word has an everywhere-finite product
    (True with a witness, False when the pattern semigroup saturates
    without one, None when the search was truncated)."""

    condition_i: bool
    offending: Optional[tuple]
    condition_ii: Optional[bool]
    witness: Optional[tuple]
    status: str  # found | saturated | truncated
    states_explored: int

    def to_json(self) -> dict:
        return {
            "condition_i": self.condition_i,
            "offending": None if self.offending is None else list(self.offending),
            "condition_ii": self.condition_ii,
            "witness": None if self.witness is None else list(self.witness),
            "status": self.status,
            "states_explored": self.states_explored,
        }


def _mask_rows(M: Matrix) -> tuple:
    rows = []
    for row in M.rows:
        bits = 0
        for j, v in enumerate(row):
            if v is not EPS:
                bits |= 1 << j
        rows.append(bits)
    return tuple(rows)


def _mask_mul(B: tuple, A: tuple, k: int) -> tuple:
    # boolean product: (B A)[i][j] = OR_l B[i][l] & A[l][j], rows as bitmasks
    out = []
    for i in range(k):
        acc = 0
        bi = B[i]
        for l in range(k):
            if bi >> l & 1:
                acc |= A[l]
        out.append(acc)
    return tuple(out)


def structural_conditions(D: FiniteSupport, max_len: int = 64, budget: int = 500000) -> ConditionsReport:
    """Decide the two structural preconditions on the support patterns.
    Pattern products form a finite semigroup, so the word walk either finds
    an all-finite product or saturates, unless the budget cuts it short."""
    if not isinstance(D, FiniteSupport):
        raise ContractViolation("structural_conditions: needs a finite-support distribution")
    offending = None
    for idx, M in enumerate(D.matrices):
        bad = M.row_finite_violation()
        if bad is not None:
            offending = (idx, bad)
            break
    cond_i = offending is None
    k = D.k
    full = (1 << k) - 1
    full_rows = (full,) * k
    masks = [_mask_rows(M) for M in D.matrices]

    seen = set()
    queue = deque()
    witness = None
    explored = 0
    for letter in _initial_letters(D):
        m = masks[letter]
        key = (m, letter if D.kernel is not None else None)
        if key in seen:
            continue
        seen.add(key)
        if m == full_rows:
            witness = (letter,)
            break
        queue.append((m, (letter,)))
    truncated = False
    while witness is None and queue:
        explored += 1
        if explored > budget:
            truncated = True
            break
        m, word = queue.popleft()
        if len(word) >= max_len:
            truncated = True
            continue
        for letter in _next_letters(D, word[-1]):
            nm = _mask_mul(masks[letter], m, k)
            key = (nm, letter if D.kernel is not None else None)
            if key in seen:
                continue
            seen.add(key)
            nxt = word + (letter,)
            if nm == full_rows:
                witness = nxt
                queue.clear()
                break
            queue.append((nm, nxt))
    if witness is not None:
        cond_ii, status = True, "found"
    elif truncated:
        cond_ii, status = None, "truncated"
    else:
        cond_ii, status = False, "saturated"
    return ConditionsReport(
        condition_i=cond_i,
        offending=offending,
        condition_ii=cond_ii,
        witness=witness,
        status=status,
        states_explored=len(seen),
    )


# ---------------------------------------------------------------------------
# Stability verdicts


@dataclass(frozen=True)
class StabilityOptions:
    max_len: int = 16
    search_budget: int = 200000
    mc_seeds: int = 20
    mc_budget: int = 5000
    mc_threshold: float = 0.95
    eta: float = DEFAULT_ETA
    seed: int = 0
    threads: int = 1


@dataclass(frozen=True)
class StabilityVerdict:
    """Four-way stability call with the evidence that produced it.

    StableStrong      a positive-probability pattern certifies coupling
    StableWeak        Monte-Carlo backward diameters shrink below eta
                      (evidence, not a certificate)
    UnstableCertified the pattern semigroup saturates with no rank-one
                      element, so no finite window ever couples exactly
    Inconclusive      structural preconditions fail or evidence is thin
    """

    verdict: str
    basis: str
    certificate: Optional[dict]
    conditions: Optional[ConditionsReport]
    pattern: Optional[PatternReport]
    notes: tuple

    def to_json(self) -> dict:
        return {
            "verdict": self.verdict,
            "basis": self.basis,
            "certificate": self.certificate,
            "conditions": None if self.conditions is None else self.conditions.to_json(),
            "pattern": None if self.pattern is None else self.pattern.to_json(),
            "notes": list(self.notes),
        }


def _mc_backward_evidence(D: MatrixDistribution, options: StabilityOptions) -> dict:
    Df = D.to_float() if isinstance(D, FiniteSupport) and D.backing == EXACT else D

    def one(rep):
        return backward_loynes(
            Df,
            tolerance=options.eta,
            budget=options.mc_budget,
            seed=options.seed,
            replication=rep,
            trace_every=0,
        )

    results = _map_replications(one, options.mc_seeds, options.threads)
    return {
        "seeds": options.mc_seeds,
        "successes": sum(1 for r in results if r.converged),
        "eta": options.eta,
        "budget": options.mc_budget,
        "steps": [r.steps for r in results],
        "diameters": [
            "inf" if r.achieved_diameter == math.inf else float(r.achieved_diameter)
            for r in results
        ],
    }


def stability_verdict(D: MatrixDistribution, options: Optional[StabilityOptions] = None) -> StabilityVerdict:
    """Classify the model on the strong/weak/unstable/inconclusive ladder.

    Exact finite-support models are searched for pattern certificates
    first; everything else (and truncated searches) falls back to
    Monte-Carlo backward-diameter evidence at the eta threshold.
    """
    opt = options or StabilityOptions()
    notes = []
    conditions = None
    pattern = None
    if isinstance(D, FiniteSupport):
        conditions = structural_conditions(D)
        if not conditions.condition_i:
            idx, row = conditions.offending
            raise ContractViolation(
                f"support matrix {idx} violates the row-finiteness condition at row {row}"
            )
        if conditions.condition_ii is False:
            return StabilityVerdict(
                verdict="Inconclusive",
                basis="condition-ii-fails",
                certificate=None,
                conditions=conditions,
                pattern=None,
                notes=(
                    "condition II fails; see open-system analysis",
                    "the pattern semigroup saturated without an everywhere-finite "
                    "product, so the coupling theory does not apply",
                ),
            )
        if conditions.condition_ii is None:
            notes.append("all-finite-product search was truncated; continuing on pattern evidence")
        if D.backing == EXACT:
            pattern = pattern_search(D, max_len=opt.max_len, budget=opt.search_budget)
            if pattern.found:
                basis = (
                    "positive-probability-rank-one-pattern"
                    if D.is_iid()
                    else "stationary-rank-one-pattern"
                )
                cert = {
                    "word": list(pattern.word),
                    "length": pattern.length,
                    "probability": scalar_to_json(pattern.probability),
                    "matrix": matrix_to_json(pattern.matrix),
                    "classification": pattern.classification,
                }
                return StabilityVerdict("StableStrong", basis, cert, conditions, pattern, tuple(notes))
            if D.is_iid() and pattern.scs1cyc1_word is not None:
                cert = {
                    "word": list(pattern.scs1cyc1_word),
                    "length": len(pattern.scs1cyc1_word),
                    "probability": scalar_to_json(pattern.scs1cyc1_probability),
                    "matrix": matrix_to_json(pattern.scs1cyc1_matrix),
                    "classification": "scs1cyc1",
                }
                notes.append(
                    "no rank-one pattern below the length bound; the certificate is an "
                    "irreducible product with a single critical component of cyclicity one"
                )
                return StabilityVerdict(
                    "StableStrong",
                    "positive-probability-scs1cyc1-pattern",
                    cert,
                    conditions,
                    pattern,
                    tuple(notes),
                )
            if pattern.status == "saturated" and D.is_iid():
                cert = {
                    "states_explored": pattern.states_explored,
                    "max_len": pattern.max_len,
                    "status": pattern.status,
                }
                notes.append(
                    "every reachable product class was enumerated and none is rank-one, "
                    "so no factor window ever couples exactly"
                )
                return StabilityVerdict(
                    "UnstableCertified",
                    "pattern-semigroup-saturated-without-rank-one",
                    cert,
                    conditions,
                    pattern,
                    tuple(notes),
                )
            notes.append("pattern search was not definitive; falling back to Monte-Carlo evidence")
        else:
            notes.append("float support: pattern certificates unavailable, using Monte-Carlo evidence")
    else:
        notes.append("generator distribution: using Monte-Carlo backward-diameter evidence")
    evidence = _mc_backward_evidence(D, opt)
    frac = evidence["successes"] / evidence["seeds"]
    if frac >= opt.mc_threshold:
        notes.append("evidence-based verdict from sampled backward diameters, not a certificate")
        return StabilityVerdict(
            "StableWeak", "backward-diameter-evidence", evidence, conditions, pattern, tuple(notes)
        )
    notes.append(
        f"only {evidence['successes']}/{evidence['seeds']} backward runs reached diameter "
        f"<= {opt.eta} within the budget"
    )
    return StabilityVerdict(
        "Inconclusive", "insufficient-evidence", evidence, conditions, pattern, tuple(notes)
    )


# ---------------------------------------------------------------------------
# Open systems


@dataclass(frozen=True)
class OpenSystemReport:
    """Per-component growth rates for a reducible model with a fixed
    support pattern.

    Each strongly connected component of the precedence graph gets the
    growth rate of its own restricted recursion (None when it carries no
    circuit). A node's long-run rate is the maximum over its component
    and all upstream components, walking the condensation.
    """

    components: tuple
    component_rates: tuple
    node_limits: tuple
    two_block: Optional[str]
    notes: tuple
    horizon: int
    replications: int
    seed: int

    def to_json(self) -> dict:
        return {
            "components": [list(c) for c in self.components],
            "component_rates": [None if r is None else r.to_json() for r in self.component_rates],
            "node_limits": [None if v is None else scalar_to_json(v) for v in self.node_limits],
            "two_block": self.two_block,
            "notes": list(self.notes),
            "horizon": self.horizon,
            "replications": self.replications,
            "seed": self.seed,
        }


def _restrict_support(D: FiniteSupport, members: tuple) -> FiniteSupport:
    idx = list(members)
    mats = []
    for M in D.matrices:
        rows = tuple(tuple(M.rows[i][j] for j in idx) for i in idx)
        mats.append(Matrix(rows, M.backing))
    return FiniteSupport(tuple(mats), D.probabilities, D.kernel)


def open_system_analysis(
    D: FiniteSupport,
    horizon: int,
    replications: int,
    seed: int,
    threads: int = 1,
) -> OpenSystemReport:
    """Growth-rate map of a reducible fixed-structure model.

    Needs every support matrix to share one eps pattern so the component
    structure is deterministic. The full recursion need not satisfy the
    row-finiteness condition; only circuit-bearing components are
    simulated, each on its own random channel.
    """
    if not isinstance(D, FiniteSupport):
        raise ContractViolation("open_system_analysis: needs a finite-support distribution")
    pattern = D.matrices[0].eps_pattern()
    for M in D.matrices[1:]:
        if M.eps_pattern() != pattern:
            raise ContractViolation(
                "open_system_analysis: support matrices must share one eps pattern"
            )
    dec = scc_decompose(graph_of(D.matrices[0]))
    notes = []
    rates = []
    for ci, comp in enumerate(dec.components):
        has_circuit = all(
            any(D.matrices[0].entry(i, j) is not EPS for j in comp) for i in comp
        )
        if not has_circuit:
            rates.append(None)
            continue
        sub = _restrict_support(D, comp)
        rates.append(
            lyapunov_estimate(
                sub, horizon=horizon, replications=replications, seed=seed,
                threads=threads, channel=2 + ci,
            )
        )
    # ancestor closure over the condensation (components in topological order)
    n_comp = len(dec.components)
    ancestors = [set((i,)) for i in range(n_comp)]
    changed = True
    while changed:
        changed = False
        for src, dst in dec.condensation_arcs:
            before = len(ancestors[dst])
            ancestors[dst] |= ancestors[src]
            if len(ancestors[dst]) != before:
                changed = True
    node_limits = [None] * D.k
    for node in range(D.k):
        ci = dec.component_of[node]
        vals = [rates[a].point for a in ancestors[ci] if rates[a] is not None]
        if vals:
            node_limits[node] = max(vals)
        else:
            notes.append(f"node {node} has no circuit-bearing component upstream; no growth rate")
    # two-block source -> sink chain: compare the sink's intrinsic rate a
    # against the source rate u it is fed at
    two_block = None
    if n_comp == 2 and dec.condensation_arcs:
        src, snk = dec.condensation_arcs[0]
        u, a = rates[src], rates[snk]
        if u is not None and a is not None:
            if a.ci_low > u.ci_high:
                two_block = "differences diverge"
                notes.append(
                    "the sink component is intrinsically slower than its input, so the "
                    "gap between the blocks grows without bound"
                )
            elif a.ci_high < u.ci_low:
                two_block = "unique stationary regime for differences"
                notes.append(
                    "the sink component is faster than its input; it inherits the source "
                    "rate and the gap between the blocks stays stochastically bounded"
                )
            else:
                two_block = "inconclusive"
                notes.append(
                    "the confidence intervals of the two component rates overlap; "
                    "raise the horizon or replication count to separate them"
                )
    return OpenSystemReport(
        components=dec.components,
        component_rates=tuple(rates),
        node_limits=tuple(node_limits),
        two_block=two_block,
        notes=tuple(notes),
        horizon=horizon,
        replications=replications,
        seed=seed,
    )


# ---------------------------------------------------------------------------
# Serialization


GENERATOR_BUILDERS: dict = {}


def register_generator(name: str, builder: Callable) -> None:
    """builder(params: dict) -> GeneratorDistribution, used by JSON loading."""
    GENERATOR_BUILDERS[name] = builder


def distribution_to_json(D: MatrixDistribution) -> dict:
    if isinstance(D, GeneratorDistribution):
        return {
            "kind": "generator",
            "name": D.name,
            "k": D.k,
            "params": dict(D.params),
        }
    out = {
        "kind": "finite",
        "k": D.k,
        "backing": D.backing,
        "support": [
            {"matrix": matrix_to_json(M), "probability": scalar_to_json(p)}
            for M, p in zip(D.matrices, D.probabilities)
        ],
    }
    if D.kernel is not None:
        out["kernel"] = [[scalar_to_json(p) for p in row] for row in D.kernel]
    return out


def distribution_from_json(obj: dict) -> MatrixDistribution:
    kind = obj.get("kind", "finite")
    if kind == "generator":
        name = obj.get("name")
        builder = GENERATOR_BUILDERS.get(name)
        if builder is None:
            known = ", ".join(sorted(GENERATOR_BUILDERS)) or "(none registered)"
            raise ContractViolation(f"unknown generator {name!r}; known: {known}")
        return builder(obj.get("params", {}))
    if kind != "finite":
        raise ContractViolation(f"unknown distribution kind {kind!r}")
    backing = obj.get("backing")
    if backing not in (EXACT, FLOAT):
        raise ContractViolation('distribution JSON needs "backing": "exact" or "float"')
    support = obj.get("support")
    if not support:
        raise ContractViolation("distribution JSON needs a non-empty support list")
    mats = [matrix_from_json(item["matrix"], backing) for item in support]
    probs = [item["probability"] for item in support]
    return FiniteSupport.make(mats, probs, kernel=obj.get("kernel"))
