"""Model builders: cyclic Jackson networks and random task graphs.

Both reduce domain descriptions to MatrixDistributions. The CJN builder
also carries the closed-form stability condition on service-time vectors
and the reconstruction of idle and waiting times from a trajectory.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from fractions import Fraction
from typing import Optional, Sequence, Union

from .semiring import (
    EPS,
    EXACT,
    FLOAT,
    ContractViolation,
    Matrix,
    as_scalar,
)
from .stochastic import (
    FiniteSupport,
    GeneratorDistribution,
    MatrixDistribution,
    _as_probability,
    register_generator,
)


# ---------------------------------------------------------------------------
# Cyclic Jackson networks


def cjn_matrix(sigma: Sequence, backing: str = EXACT) -> Matrix:
    """Cycle of k single-server queues with service times sigma.

    Queue j starts its n-th service once it has finished the previous one
    (diagonal entry sigma_j) and received the customer from the queue
    before it in the cycle (sub-diagonal entry sigma_j, wrapping at the
    corner). All other entries are eps.
    """
    k = len(sigma)
    if k < 2:
        raise ContractViolation("cjn_matrix: need at least 2 queues")
    s = [as_scalar(v, backing) for v in sigma]
    if any(v is EPS for v in s):
        raise ContractViolation("cjn_matrix: service times must be finite")
    rows = []
    for j in range(k):
        row = [EPS] * k
        row[j] = s[j]
        row[(j - 1) % k] = s[j]
        rows.append(tuple(row))
    return Matrix(tuple(rows), backing)


@dataclass(frozen=True)
class JointServiceLaw:
    """Finite support of whole service vectors: atoms[l] with probability probs[l]."""

    atoms: tuple
    probs: tuple

    @staticmethod
    def make(atoms, probs) -> "JointServiceLaw":
        ats = tuple(tuple(a) for a in atoms)
        if not ats:
            raise ContractViolation("JointServiceLaw: empty support")
        k = len(ats[0])
        if any(len(a) != k for a in ats):
            raise ContractViolation("JointServiceLaw: mixed vector lengths")
        ps = tuple(_as_probability(p) for p in probs)
        if len(ps) != len(ats):
            raise ContractViolation("JointServiceLaw: probabilities do not match atoms")
        return JointServiceLaw(ats, ps)

    @property
    def k(self) -> int:
        return len(self.atoms[0])


@dataclass(frozen=True)
class PerQueueServiceLaw:
    """Independent finite-support service times per queue; the joint law is
    the product over queues."""

    values: tuple  # per queue: tuple of service times
    probs: tuple  # per queue: tuple of probabilities

    @staticmethod
    def make(values, probs) -> "PerQueueServiceLaw":
        vals = tuple(tuple(v) for v in values)
        ps = tuple(tuple(_as_probability(p) for p in row) for row in probs)
        if len(vals) != len(ps) or not vals:
            raise ContractViolation("PerQueueServiceLaw: values/probs shape mismatch")
        for v, p in zip(vals, ps):
            if len(v) != len(p) or not v:
                raise ContractViolation("PerQueueServiceLaw: values/probs shape mismatch")
        return PerQueueServiceLaw(vals, ps)

    @property
    def k(self) -> int:
        return len(self.values)

    def joint(self) -> JointServiceLaw:
        atoms = []
        probs = []
        for combo in itertools.product(*(range(len(v)) for v in self.values)):
            atoms.append(tuple(self.values[q][i] for q, i in enumerate(combo)))
            p = Fraction(1)
            exact = True
            for q, i in enumerate(combo):
                pi = self.probs[q][i]
                if isinstance(pi, Fraction) and exact:
                    p = p * pi
                else:
                    p = float(p) * float(pi)
                    exact = False
            probs.append(p)
        return JointServiceLaw.make(atoms, probs)


@dataclass(frozen=True)
class UniformServiceLaw:
    """Service times drawn independently and uniformly from [low, high] per
    step and per queue; produces a generator-backed distribution."""

    k: int
    low: float
    high: float

    def __post_init__(self):
        if self.k < 2:
            raise ContractViolation("UniformServiceLaw: need at least 2 queues")
        if not (0.0 <= self.low <= self.high):
            raise ContractViolation("UniformServiceLaw: need 0 <= low <= high")


ServiceLaw = Union[JointServiceLaw, PerQueueServiceLaw, UniformServiceLaw]


@dataclass(frozen=True)
class CjnSpec:
    """Closed cyclic network of queues visited in a fixed cyclic order by a
    fixed customer population."""

    queues: int
    customers: int
    law: ServiceLaw

    def __post_init__(self):
        if self.queues < 2:
            raise ContractViolation("CjnSpec: need at least 2 queues")
        if self.customers < 1:
            raise ContractViolation("CjnSpec: need at least 1 customer")
        lk = self.law.k
        if lk != self.queues:
            raise ContractViolation(
                f"CjnSpec: law covers {lk} queues, spec declares {self.queues}"
            )


def _split_positions(queues: int, customers: int) -> list:
    """Indices of the fictive zero-service coordinates after splitting.

    The extra customers - queues coordinates are distributed round-robin:
    physical queue j receives extra // queues fictive queues, plus one
    more for j < extra % queues, each inserted immediately after j in the
    cyclic order.
    """
    extra = customers - queues
    per = [extra // queues + (1 if j < extra % queues else 0) for j in range(queues)]
    fictive = []
    pos = 0
    for j in range(queues):
        pos += 1
        for _ in range(per[j]):
            fictive.append(pos)
            pos += 1
    return fictive


def split_service_vector(sigma: Sequence, customers: int, backing: str = EXACT) -> tuple:
    """Embed a k-queue service vector into dimension = customers by giving
    the fictive coordinates service time e (= 0)."""
    k = len(sigma)
    fictive = set(_split_positions(k, customers))
    out = []
    it = iter(sigma)
    for pos in range(customers):
        if pos in fictive:
            out.append(as_scalar(0, backing))
        else:
            out.append(as_scalar(next(it), backing))
    return tuple(out)


def cjn_distribution(spec: CjnSpec, backing: str = EXACT) -> MatrixDistribution:
    """Matrix distribution of the network.

    customers == queues maps service vectors through cjn_matrix directly.
    customers > queues first splits each vector into dimension customers
    with zero-service fictive coordinates (layout in split_service_vector),
    so exactly customers - queues rows carry service time e. customers <
    queues has no matrix form of this shape and is rejected.
    """
    k, c = spec.queues, spec.customers
    if c < k:
        raise ContractViolation(
            "cjn_distribution: fewer customers than queues needs a different "
            "state representation that this library does not provide"
        )

    def build(sigma):
        if c == k:
            return cjn_matrix(sigma, backing)
        return cjn_matrix(split_service_vector(sigma, c, backing), backing)

    law = spec.law
    if isinstance(law, UniformServiceLaw):
        lo, hi, kk = law.low, law.high, law.k

        # continuous service times force float matrices whatever the caller asked
        def sample(rng, n):
            sigma = [float(v) for v in rng.uniform(lo, hi, size=kk)]
            if c == kk:
                return cjn_matrix(sigma, FLOAT)
            return cjn_matrix(split_service_vector(sigma, c, FLOAT), FLOAT)

        return GeneratorDistribution(
            k=c,
            sample_fn=sample,
            name="cjn_uniform",
            params=(("queues", kk), ("customers", c), ("low", lo), ("high", hi)),
        )
    joint = law.joint() if isinstance(law, PerQueueServiceLaw) else law
    merged = {}
    order = []
    for atom, p in zip(joint.atoms, joint.probs):
        key = tuple(as_scalar(v, backing) for v in atom)
        if key not in merged:
            merged[key] = p
            order.append(key)
        else:
            a = merged[key]
            merged[key] = a + p if isinstance(a, Fraction) and isinstance(p, Fraction) else float(a) + float(p)
    mats = [build(key) for key in order]
    return FiniteSupport.make(mats, [merged[key] for key in order])


def cjn_stability_condition(spec: CjnSpec):
    """Closed-form coupling condition for customers == queues with a finite
    iid service law: some atom has a unique strictly maximal service time,
    or some atom has all service times equal. Returns (bool, witness atom)."""
    if isinstance(spec.law, UniformServiceLaw):
        raise ContractViolation("cjn_stability_condition: needs a finite service law")
    if spec.customers != spec.queues:
        raise ContractViolation("cjn_stability_condition: needs customers == queues")
    joint = spec.law.joint() if isinstance(spec.law, PerQueueServiceLaw) else spec.law
    for atom in joint.atoms:
        top = max(atom)
        if sum(1 for v in atom if v == top) == 1:
            return True, atom
        if all(v == atom[0] for v in atom):
            return True, atom
    return False, None


def cjn_trajectory_columns(traj, matrices, physical: bool = True) -> dict:
    """Reconstruct idle and waiting times from an unthinned trajectory and
    the matrix sequence that drove it (replayable via sample_sequence).

    idle[n-1][j] is the time queue j spent empty between its (n-1)-th and
    n-th departures: x_j(n) - sigma_j - x_j(n-1), with sigma_j read off the
    diagonal of the matrix applied at step n. waiting[n-1][j] is the time
    the customer arriving at queue j waited before service:
    x_j(n) - sigma_j - x_{j-1}(n-1), cyclic in j. Waiting times are only
    meaningful when every coordinate is a physical queue (customers ==
    queues); split models must pass physical=False, which reports
    waiting=None.
    """
    if traj.thin != 1:
        raise ContractViolation("cjn_trajectory_columns: needs an unthinned trajectory")
    if len(matrices) < traj.horizon:
        raise ContractViolation("cjn_trajectory_columns: matrix sequence shorter than horizon")
    k = len(traj.x0)
    idle = []
    waiting = []
    for n in range(1, traj.horizon + 1):
        A = matrices[n - 1]
        prev = traj.states[n - 1].entries
        cur = traj.states[n].entries
        sig = [A.entry(j, j) for j in range(k)]
        idle.append(tuple(cur[j] - sig[j] - prev[j] for j in range(k)))
        if physical:
            waiting.append(tuple(cur[j] - sig[j] - prev[(j - 1) % k] for j in range(k)))
    return {"idle": tuple(idle), "waiting": tuple(waiting) if physical else None}


# ---------------------------------------------------------------------------
# Random task graphs


@dataclass(frozen=True)
class SubsetLaw:
    """Law of the successor set of one processor: subsets as bitmasks over
    processors 0..k-1, with probabilities."""

    masks: tuple
    probs: tuple

    @staticmethod
    def make(masks, probs) -> "SubsetLaw":
        ms = tuple(int(m) for m in masks)
        ps = tuple(_as_probability(p) for p in probs)
        if not ms or len(ms) != len(ps):
            raise ContractViolation("SubsetLaw: masks/probs shape mismatch")
        if any(m < 0 for m in ms):
            raise ContractViolation("SubsetLaw: masks must be non-negative bitmasks")
        return SubsetLaw(ms, ps)

    def can_miss(self, j: int) -> bool:
        """True when processor j is absent from some subset of positive probability."""
        return any(not (m >> j & 1) for m in self.masks)


@dataclass(frozen=True)
class TaskGraphSpec:
    """k processors; after each step, processor i signals a random subset of
    successors (law subsets[i]); the signal from i to j takes a random
    duration (law durations, constant or uniform)."""

    k: int
    subsets: tuple
    duration: object  # scalar constant or ("uniform", low, high)

    def __post_init__(self):
        if self.k < 1:
            raise ContractViolation("TaskGraphSpec: need at least one processor")
        if len(self.subsets) != self.k:
            raise ContractViolation("TaskGraphSpec: one subset law per processor")
        for law in self.subsets:
            for m in law.masks:
                if m >> self.k:
                    raise ContractViolation("TaskGraphSpec: subset mask outside 0..k-1")


def _starved_processor(spec: TaskGraphSpec) -> Optional[int]:
    # row j is all-eps iff no processor signals j; with independent subset
    # draws that event has positive probability iff every law can miss j
    for j in range(spec.k):
        if all(law.can_miss(j) for law in spec.subsets):
            return j
    return None


def taskgraph_distribution(spec: TaskGraphSpec, backing: str = EXACT) -> MatrixDistribution:
    """Distribution of matrices A with A[j][i] = signalling duration when
    processor i signals j, eps otherwise.

    Constant durations enumerate the finitely many subset draws into a
    FiniteSupport (duplicate matrices merged); a uniform duration law
    yields a generator-backed float distribution. Rejected when some
    processor is starved (all-eps row with positive probability).
    """
    starved = _starved_processor(spec)
    if starved is not None:
        raise ContractViolation(
            f"taskgraph_distribution: processor {starved} can be signalled by nobody "
            "(all-eps row with positive probability)"
        )
    k = spec.k
    if isinstance(spec.duration, tuple) and spec.duration and spec.duration[0] == "uniform":
        _, low, high = spec.duration
        if not (0.0 <= low <= high):
            raise ContractViolation("taskgraph_distribution: need 0 <= low <= high")
        laws = spec.subsets

        def sample(rng, n):
            rows = [[EPS] * k for _ in range(k)]
            for i, law in enumerate(laws):
                u = float(rng.random())
                acc = 0.0
                mask = law.masks[-1]
                for m, p in zip(law.masks, law.probs):
                    acc += float(p)
                    if u < acc:
                        mask = m
                        break
                for j in range(k):
                    if mask >> j & 1:
                        rows[j][i] = float(rng.uniform(low, high))
            return Matrix(tuple(tuple(r) for r in rows), FLOAT)

        return GeneratorDistribution(
            k=k,
            sample_fn=sample,
            name="taskgraph_uniform",
            params=(
                ("k", k),
                ("subsets", tuple((law.masks, tuple(str(p) for p in law.probs)) for law in spec.subsets)),
                ("low", low),
                ("high", high),
            ),
        )
    dur = as_scalar(spec.duration, backing)
    if dur is EPS:
        raise ContractViolation("taskgraph_distribution: duration must be finite")
    merged = {}
    order = []
    for combo in itertools.product(*(range(len(law.masks)) for law in spec.subsets)):
        rows = [[EPS] * k for _ in range(k)]
        p = Fraction(1)
        exact = True
        for i, idx in enumerate(combo):
            law = spec.subsets[i]
            mask = law.masks[idx]
            pi = law.probs[idx]
            if isinstance(pi, Fraction) and exact:
                p = p * pi
            else:
                p = float(p) * float(pi)
                exact = False
            for j in range(k):
                if mask >> j & 1:
                    rows[j][i] = dur
        M = Matrix(tuple(tuple(r) for r in rows), backing)
        if M.rows not in merged:
            merged[M.rows] = p
            order.append(M)
        else:
            a = merged[M.rows]
            merged[M.rows] = a + p if isinstance(a, Fraction) and isinstance(p, Fraction) else float(a) + float(p)
    return FiniteSupport.make(order, [merged[M.rows] for M in order])


# ---------------------------------------------------------------------------
# Builtin generator models


def shared_uniform_diagonal(k: int, low: float = 0.0, high: float = 1.0) -> GeneratorDistribution:
    """A(n) has one shared uniform draw U(n) on the whole diagonal and e
    everywhere else, so every coordinate races the same service time
    against its neighbours."""
    if k < 1:
        raise ContractViolation("shared_uniform_diagonal: need k >= 1")

    def sample(rng, n):
        u = float(rng.uniform(low, high))
        rows = tuple(
            tuple(u if i == j else 0.0 for j in range(k)) for i in range(k)
        )
        return Matrix(rows, FLOAT)

    return GeneratorDistribution(
        k=k,
        sample_fn=sample,
        name="shared_uniform_diagonal",
        params=(("k", k), ("low", float(low)), ("high", float(high))),
    )


def independent_uniform_diagonal(k: int, low: float = 0.0, high: float = 1.0) -> GeneratorDistribution:
    """Like shared_uniform_diagonal but with an independent uniform draw per
    diagonal entry."""
    if k < 1:
        raise ContractViolation("independent_uniform_diagonal: need k >= 1")

    def sample(rng, n):
        us = [float(v) for v in rng.uniform(low, high, size=k)]
        rows = tuple(
            tuple(us[i] if i == j else 0.0 for j in range(k)) for i in range(k)
        )
        return Matrix(rows, FLOAT)

    return GeneratorDistribution(
        k=k,
        sample_fn=sample,
        name="independent_uniform_diagonal",
        params=(("k", k), ("low", float(low)), ("high", float(high))),
    )


def _build_shared_uniform(params: dict) -> GeneratorDistribution:
    return shared_uniform_diagonal(
        int(params["k"]), float(params.get("low", 0.0)), float(params.get("high", 1.0))
    )


def _build_independent_uniform(params: dict) -> GeneratorDistribution:
    return independent_uniform_diagonal(
        int(params["k"]), float(params.get("low", 0.0)), float(params.get("high", 1.0))
    )


def _build_cjn_uniform(params: dict) -> GeneratorDistribution:
    law = UniformServiceLaw(
        k=int(params["queues"]), low=float(params.get("low", 0.0)), high=float(params.get("high", 1.0))
    )
    spec = CjnSpec(
        queues=int(params["queues"]),
        customers=int(params.get("customers", params["queues"])),
        law=law,
    )
    return cjn_distribution(spec, backing=FLOAT)


register_generator("shared_uniform_diagonal", _build_shared_uniform)
register_generator("independent_uniform_diagonal", _build_independent_uniform)
register_generator("cjn_uniform", _build_cjn_uniform)


# ---------------------------------------------------------------------------
# Spec JSON


def cjn_spec_from_json(obj: dict) -> CjnSpec:
    """{"queues": k, "customers": c, "law": {"joint": {"atoms": [[...]], "probs": [...]}}
    or {"per_queue": {"values": [[...]], "probs": [[...]]}}
    or {"uniform": {"low": a, "high": b}}}"""
    queues = int(obj["queues"])
    customers = int(obj.get("customers", queues))
    law_obj = obj["law"]
    if "joint" in law_obj:
        j = law_obj["joint"]
        law = JointServiceLaw.make(j["atoms"], j["probs"])
    elif "per_queue" in law_obj:
        p = law_obj["per_queue"]
        law = PerQueueServiceLaw.make(p["values"], p["probs"])
    elif "uniform" in law_obj:
        u = law_obj["uniform"]
        law = UniformServiceLaw(k=queues, low=float(u.get("low", 0.0)), high=float(u.get("high", 1.0)))
    else:
        raise ContractViolation('CjnSpec JSON law must be "joint", "per_queue", or "uniform"')
    return CjnSpec(queues=queues, customers=customers, law=law)


def taskgraph_spec_from_json(obj: dict) -> TaskGraphSpec:
    """{"k": k, "subsets": [{"masks": [...], "probs": [...]}, ...],
    "duration": 1 | "3/2" | {"uniform": {"low": a, "high": b}}}"""
    k = int(obj["k"])
    subsets = tuple(SubsetLaw.make(s["masks"], s["probs"]) for s in obj["subsets"])
    dur = obj.get("duration", 1)
    if isinstance(dur, dict) and "uniform" in dur:
        u = dur["uniform"]
        duration = ("uniform", float(u.get("low", 0.0)), float(u.get("high", 1.0)))
    else:
        duration = dur
    return TaskGraphSpec(k=k, subsets=subsets, duration=duration)
