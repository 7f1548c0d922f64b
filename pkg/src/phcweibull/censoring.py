"""Type-I progressively hybrid censoring: schemes, samples, generation, CSV I/O.

A test places ``n`` units on test with planned removals ``R_1..R_m`` at the
successive failure times and a hard stop at time ``t_max``.  The experiment
ends at ``min(x_(m), t_max)``: ending at the m-th failure is "Case I"
(removals go as planned), ending at ``t_max`` with only ``r < m`` failures is
"Case II" (the ``n - r - sum(R_1..R_r)`` survivors are withdrawn at ``t_max``).
"""

from __future__ import annotations

import enum
import io
import math
from dataclasses import dataclass

import numpy as np

from .distributions import WeibullParams, _quantile_from_log_sf

__all__ = [
    "Case",
    "CensoringScheme",
    "PhcsSample",
    "SchemeError",
    "removals_from_shorthand",
    "generate",
    "write_sample_csv",
    "read_sample_csv",
]

SAMPLE_FORMAT_VERSION = "phcs-sample-v1"


class SchemeError(ValueError):
    """Malformed or unbalanced censoring scheme."""


class Case(enum.Enum):
    I = "I"
    II = "II"


@dataclass(frozen=True)
class CensoringScheme:
    """Test plan: units on test, target failures, removal vector, stop time.

    Invariants: ``1 <= m <= n``, removals nonnegative, ``sum(removals) + m == n``
    (the final removal absorbs every unit still on test), ``t_max > 0``.
    """

    n: int
    m: int
    removals: tuple[int, ...]
    t_max: float

    def __post_init__(self):
        n, m = int(self.n), int(self.m)
        removals = tuple(int(r) for r in self.removals)
        if not 1 <= m <= n:
            raise SchemeError(f"need 1 <= m <= n, got m={m}, n={n}")
        if len(removals) != m:
            raise SchemeError(f"removal vector has {len(removals)} entries, expected m={m}")
        if any(r < 0 for r in removals):
            raise SchemeError(f"removals must be nonnegative, got {removals}")
        if sum(removals) + m != n:
            raise SchemeError(
                f"scheme balance violated: sum(removals) + m = {sum(removals) + m} != n = {n}"
            )
        if math.isnan(float(self.t_max)) or not float(self.t_max) > 0.0:
            raise SchemeError(f"t_max must be positive, got {self.t_max!r}")
        object.__setattr__(self, "n", n)
        object.__setattr__(self, "m", m)
        object.__setattr__(self, "removals", removals)
        object.__setattr__(self, "t_max", float(self.t_max))


@dataclass(frozen=True)
class PhcsSample:
    """Observed outcome of one progressively hybrid censored experiment.

    ``failures`` holds the ``r`` ordered observed failure times and
    ``applied_removals`` the withdrawals that actually happened at each of
    them.  ``c_end`` is the terminal time of the experiment (last failure in
    Case I, ``t_max`` in Case II) and ``r_t`` the number of survivors
    withdrawn there (0 in Case I).  ``r == 0`` is a legal generation outcome;
    estimators reject it.
    """

    failures: np.ndarray
    applied_removals: np.ndarray
    case: Case
    c_end: float
    r_t: int
    n: int
    m: int
    t_max: float

    def __post_init__(self):
        failures = np.asarray(self.failures, dtype=float)
        removals = np.asarray(self.applied_removals, dtype=int)
        if failures.ndim != 1 or removals.shape != failures.shape:
            raise ValueError("failures and applied_removals must be 1-D and equally long")
        # generated samples are strictly increasing almost surely (generate()
        # redraws float ties); recorded real data may carry exact ties
        if failures.size and not np.all(np.diff(failures) >= 0.0):
            raise ValueError("failures must be nondecreasing")
        if failures.size and failures[0] <= 0.0:
            raise ValueError("failure times must be positive")
        if np.any(removals < 0):
            raise ValueError("applied removals must be nonnegative")
        r = failures.size
        total = r + int(removals.sum()) + int(self.r_t)
        if total != self.n:
            raise ValueError(f"accounting broken: r + removals + r_t = {total} != n = {self.n}")
        if self.case is Case.I:
            if self.r_t != 0:
                raise ValueError("Case I carries no terminal withdrawals")
            if r != self.m or (r and not math.isclose(self.c_end, failures[-1])):
                raise ValueError("Case I must end at the m-th failure")
        else:
            if r >= self.m:
                raise ValueError("Case II must observe fewer than m failures")
            if r and failures[-1] >= self.c_end:
                raise ValueError("Case II failures must precede t_max")
        failures.setflags(write=False)
        removals.setflags(write=False)
        object.__setattr__(self, "failures", failures)
        object.__setattr__(self, "applied_removals", removals)
        object.__setattr__(self, "c_end", float(self.c_end))
        object.__setattr__(self, "r_t", int(self.r_t))

    @property
    def r(self) -> int:
        """Number of observed failures."""
        return int(self.failures.size)


def removals_from_shorthand(spec: str, n: int, m: int) -> tuple[int, ...]:
    """Expand run-length removal notation into an explicit vector.

    Accepts forms like ``"(0^14,15)"`` or with symbolic counts,
    ``"(0^{m-1},n-m)"`` / ``"(2^5,0^{m-6},n-m-10)"``; ``n`` and ``m`` are
    substituted before evaluation.  Raises :class:`SchemeError` on parse
    failures and on vectors that do not balance ``sum(R) + m == n``.
    """
    text = spec.strip()
    if text.startswith("(") and text.endswith(")"):
        text = text[1:-1]
    if not text:
        raise SchemeError(f"empty scheme spec: {spec!r}")

    def eval_expr(token: str) -> int:
        token = token.strip()
        if token.startswith("{") and token.endswith("}"):
            token = token[1:-1]
        if not token:
            raise SchemeError(f"empty expression in scheme spec {spec!r}")
        allowed = set("0123456789nm+- ")
        if not set(token) <= allowed:
            raise SchemeError(f"unsupported token {token!r} in scheme spec {spec!r}")
        # additive expressions over integers and the symbols n, m
        total, sign, i = 0, 1, 0
        saw_term = False
        while i < len(token):
            ch = token[i]
            if ch == " ":
                i += 1
            elif ch == "+":
                if not saw_term:
                    raise SchemeError(f"misplaced '+' in {token!r}")
                sign, saw_term, i = 1, False, i + 1
            elif ch == "-":
                sign, saw_term, i = (-sign if not saw_term else -1), False, i + 1
            elif ch == "n":
                total += sign * n
                sign, saw_term, i = 1, True, i + 1
            elif ch == "m":
                total += sign * m
                sign, saw_term, i = 1, True, i + 1
            else:
                j = i
                while j < len(token) and token[j].isdigit():
                    j += 1
                total += sign * int(token[i:j])
                sign, saw_term, i = 1, True, j
        if not saw_term:
            raise SchemeError(f"dangling operator in {token!r}")
        return total

    removals: list[int] = []
    depth = 0
    piece = ""
    pieces: list[str] = []
    for ch in text:
        if ch == "{":
            depth += 1
        elif ch == "}":
            depth -= 1
            if depth < 0:
                raise SchemeError(f"unbalanced braces in scheme spec {spec!r}")
        if ch == "," and depth == 0:
            pieces.append(piece)
            piece = ""
        else:
            piece += ch
    pieces.append(piece)
    if depth != 0:
        raise SchemeError(f"unbalanced braces in scheme spec {spec!r}")

    for part in pieces:
        part = part.strip()
        if not part:
            raise SchemeError(f"empty entry in scheme spec {spec!r}")
        if "^" in part:
            value_txt, _, count_txt = part.partition("^")
            value = eval_expr(value_txt)
            count = eval_expr(count_txt)
            if count < 0:
                raise SchemeError(f"negative repeat count in {part!r}")
            removals.extend([value] * count)
        else:
            removals.append(eval_expr(part))

    if any(r < 0 for r in removals):
        raise SchemeError(f"scheme spec {spec!r} yields negative removals {removals}")
    if len(removals) != m:
        raise SchemeError(
            f"scheme spec {spec!r} yields {len(removals)} removals, expected m={m}"
        )
    if sum(removals) + m != n:
        raise SchemeError(
            f"scheme balance violated: sum(R) + m = {sum(removals) + m} != n = {n}"
        )
    return tuple(removals)


def _progressive_type2_times(scheme: CensoringScheme, truth: WeibullParams,
                             rng: np.random.Generator) -> np.ndarray:
    """Progressive Type-II order statistics via the uniform-spacings algorithm.

    W_i ~ U(0,1); V_i = W_i**(1/(i + R_m + ... + R_{m-i+1}));
    U_i = 1 - V_m V_{m-1} ... V_{m-i+1}; X_(i) = F^{-1}(U_i).
    Carried out in log space so U_i near 1 keeps full precision.
    """
    m = scheme.m
    removal_arr = np.asarray(scheme.removals, dtype=float)
    tail_removals = np.cumsum(removal_arr[::-1])  # R_m, R_m + R_{m-1}, ...
    exponents = np.arange(1, m + 1) + tail_removals
    w = rng.uniform(size=m)
    log_v = np.log(w) / exponents  # log V_i matched to i = 1..m
    # log(1 - U_i) = sum of log V over the last i indices
    log_one_minus_u = np.cumsum(log_v[::-1])
    return _quantile_from_log_sf(log_one_minus_u, truth)


def generate(scheme: CensoringScheme, truth: WeibullParams,
             rng: np.random.Generator) -> PhcsSample:
    """Draw one progressively hybrid censored sample.

    Generates the full progressive Type-II sample of size ``m`` and truncates
    it at ``t_max``: Case I if the m-th failure lands at or before ``t_max``,
    Case II (with terminal withdrawals) otherwise.  A zero-failure outcome
    (``x_(1) > t_max``) comes back as a valid ``PhcsSample`` with ``r == 0``;
    estimators reject those, the bench discards and redraws.
    """
    times = _progressive_type2_times(scheme, truth, rng)
    while np.any(np.diff(times) == 0.0):  # float-rounding tie: resample
        times = _progressive_type2_times(scheme, truth, rng)
    t_max = scheme.t_max
    if times[-1] <= t_max:
        return PhcsSample(
            failures=times,
            applied_removals=np.asarray(scheme.removals, dtype=int),
            case=Case.I,
            c_end=float(times[-1]),
            r_t=0,
            n=scheme.n,
            m=scheme.m,
            t_max=t_max,
        )
    r = int(np.searchsorted(times, t_max, side="left"))
    applied = np.asarray(scheme.removals[:r], dtype=int)
    r_t = scheme.n - r - int(applied.sum())
    return PhcsSample(
        failures=times[:r],
        applied_removals=applied,
        case=Case.II,
        c_end=t_max,
        r_t=r_t,
        n=scheme.n,
        m=scheme.m,
        t_max=t_max,
    )


def write_sample_csv(sample: PhcsSample, path_or_buf) -> None:
    """Write the CLI interchange format: header block then one row per failure."""
    lines = [
        f"# {SAMPLE_FORMAT_VERSION}",
        f"# n={sample.n}",
        f"# m={sample.m}",
        f"# t_max={float(sample.t_max)!r}",
        f"# case={sample.case.value}",
        f"# r_t={sample.r_t}",
        "index,failure_time,removals_applied",
    ]
    for i, (x, rem) in enumerate(zip(sample.failures, sample.applied_removals), start=1):
        lines.append(f"{i},{float(x)!r},{int(rem)}")
    text = "\n".join(lines) + "\n"
    if hasattr(path_or_buf, "write"):
        path_or_buf.write(text)
    else:
        with open(path_or_buf, "w", encoding="utf-8") as fh:
            fh.write(text)


def read_sample_csv(path_or_buf) -> PhcsSample:
    """Parse the interchange format back into a :class:`PhcsSample`."""
    if hasattr(path_or_buf, "read"):
        text = path_or_buf.read()
    else:
        with open(path_or_buf, "r", encoding="utf-8") as fh:
            text = fh.read()
    header: dict[str, str] = {}
    failures: list[float] = []
    removals: list[int] = []
    saw_columns = False
    for lineno, raw in enumerate(io.StringIO(text), start=1):
        line = raw.strip()
        if not line:
            continue
        if line.startswith("#"):
            body = line[1:].strip()
            if "=" in body:
                key, _, value = body.partition("=")
                header[key.strip()] = value.strip()
            continue
        if not saw_columns:
            if line.replace(" ", "") != "index,failure_time,removals_applied":
                raise ValueError(f"line {lineno}: unexpected column header {line!r}")
            saw_columns = True
            continue
        parts = line.split(",")
        if len(parts) != 3:
            raise ValueError(f"line {lineno}: expected 3 fields, got {line!r}")
        failures.append(float(parts[1]))
        removals.append(int(parts[2]))
    for key in ("n", "m", "t_max", "case", "r_t"):
        if key not in header:
            raise ValueError(f"sample file is missing header field {key!r}")
    case = Case(header["case"])
    t_max = float(header["t_max"])
    failures_arr = np.asarray(failures, dtype=float)
    c_end = float(failures_arr[-1]) if case is Case.I else t_max
    return PhcsSample(
        failures=failures_arr,
        applied_removals=np.asarray(removals, dtype=int),
        case=case,
        c_end=c_end,
        r_t=int(header["r_t"]),
        n=int(header["n"]),
        m=int(header["m"]),
        t_max=t_max,
    )
