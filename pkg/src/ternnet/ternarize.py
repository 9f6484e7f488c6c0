"""Layer-wise greedy compilation of a trained teacher into a ternary student.

Each student neuron copies its teacher neuron independently: a pair of
weight thresholds (t_lo <= 0 <= t_hi) ternarizes the real weight vector,
and a pair of integer step thresholds (b_lo, b_hi) is chosen from kernel
density discriminants of the student's transfer outputs grouped by the
teacher's most-probable output class.  Candidate weight thresholds form an
n x p grid (midpoints between consecutive sorted weights plus the
extremes); the grid is searched either exhaustively or by a greedy
dichotomic strategy that discards a third of the remaining range per step,
with an epsilon score policy escalating doubtful neurons to the exhaustive
search.  Layers are processed in feed-forward order; the output layer is
fit against the training labels with round-robin sweeps.
"""

from __future__ import annotations

import multiprocessing
from dataclasses import dataclass, field

import numpy as np

from ternnet.linalg import Rng
from ternnet.runtime import StudentLayer, TernaryMlp, forward_prefix, pack
from ternnet.teacher import (
    RealMlp,
    TrainConfig,
    expected_activations,
    staggered_retrain,
    teacher_classes,
    ternary_probs,
)

_SQRT_2PI = float(np.sqrt(2.0 * np.pi))
_BANDWIDTH_FLOOR = 1e-6


class TernarizeError(RuntimeError):
    pass


@dataclass
class TernConfig:
    """One weight-threshold candidate and the score it achieved."""

    t_lo: float
    t_hi: float
    score: float

    def __post_init__(self):
        if not (self.t_lo <= 0.0 <= self.t_hi):
            raise ValueError(f"thresholds must satisfy t_lo <= 0 <= t_hi, got ({self.t_lo}, {self.t_hi})")
        if self.score < 0.0:
            raise ValueError("score must be non-negative")


@dataclass
class TernarizeConfig:
    epsilon: float = 0.95
    probe_count: int = 5000
    grid_cap: int | None = 128  # max candidate thresholds per axis; None = full grid
    rng_seed: int = 0
    retrain: bool = True

    def __post_init__(self):
        if not 0.0 <= self.epsilon <= 1.0:
            raise ValueError("epsilon must lie in [0, 1]")
        if self.probe_count < 1:
            raise ValueError("probe_count must be >= 1")
        if self.grid_cap is not None and self.grid_cap < 2:
            raise ValueError("grid_cap must be None or >= 2")


@dataclass
class ActivationRecord:
    """Student transfer outputs partitioned by the teacher's output class."""

    y_minus: np.ndarray
    y_zero: np.ndarray
    y_plus: np.ndarray


@dataclass
class StudentNeuron:
    weights: np.ndarray  # int8 ternary vector
    b_lo: int
    b_hi: int

    def __post_init__(self):
        self.weights = np.ascontiguousarray(self.weights, dtype=np.int8)
        fan_in = self.weights.size
        if self.b_lo > self.b_hi:
            raise ValueError("b_lo must not exceed b_hi")
        if abs(self.b_lo) > fan_in or abs(self.b_hi) > fan_in:
            raise ValueError("step thresholds must lie within the transfer output range")


def ternarize_weights(w, t_lo: float, t_hi: float) -> np.ndarray:
    """Map real weights to {-1, 0, 1}: strictly below t_lo -> -1, above t_hi -> +1."""
    if not (t_lo <= 0.0 <= t_hi):
        raise ValueError(f"thresholds must satisfy t_lo <= 0 <= t_hi, got ({t_lo}, {t_hi})")
    w = np.asarray(w, dtype=np.float64)
    return (w > t_hi).astype(np.int8) - (w < t_lo).astype(np.int8)


# ---------------------------------------------------------------------------
# Kernel density estimation and the activation-threshold discriminants.
# ---------------------------------------------------------------------------

def silverman_bandwidth(samples) -> float:
    """0.9 * min(sigma, IQR/1.34) * m^(-1/5), floored at 1e-6."""
    s = np.asarray(samples, dtype=np.float64).ravel()
    if s.size < 2:
        return _BANDWIDTH_FLOOR
    sigma = float(s.std(ddof=1))
    q25, q75 = np.percentile(s, (25.0, 75.0))
    h = 0.9 * min(sigma, (q75 - q25) / 1.34) * s.size ** (-0.2)
    return max(h, _BANDWIDTH_FLOOR)


def kde_estimate(samples, queries) -> np.ndarray:
    """Gaussian-kernel density of `samples` evaluated at `queries`."""
    s = np.asarray(samples, dtype=np.float64).ravel()
    if s.size == 0:
        raise ValueError("kde_estimate needs at least one sample")
    h = silverman_bandwidth(s)
    q = np.asarray(queries, dtype=np.float64)
    z = (q[..., None] - s) / h
    return np.exp(-0.5 * z * z).sum(axis=-1) / (s.size * h * _SQRT_2PI)


class _IntCluster:
    """Histogram-backed bandwidth, mean and density for integer samples.

    Duplicates collapse into counts, percentiles come from the cumulative
    histogram, and because query points are integers too, every kernel
    argument is an integer difference covered by one exp table.
    """

    __slots__ = ("m", "vmin", "vmax", "counts", "mean", "h")

    def __init__(self, values: np.ndarray):
        m = values.size
        self.m = m
        self.vmin = int(values.min())
        self.vmax = int(values.max())
        counts = np.bincount((values - self.vmin).astype(np.int64))
        self.counts = counts.astype(np.float64)
        support = self.vmin + np.arange(counts.size, dtype=np.int64)
        s1 = int((support * counts).sum())
        self.mean = s1 / m
        if m < 2:
            self.h = _BANDWIDTH_FLOOR
            return
        s2 = int((support * support * counts).sum())
        var = (s2 - s1 * (s1 / m)) / (m - 1)
        sigma = float(np.sqrt(max(var, 0.0)))
        cum = np.cumsum(counts)

        def nth(k: int) -> float:
            return float(support[np.searchsorted(cum, k, side="right")])

        def quantile(q: float) -> float:
            rank = (m - 1) * q
            lo = int(np.floor(rank))
            a = nth(lo)
            b = nth(min(lo + 1, m - 1))
            return a + (rank - lo) * (b - a)

        iqr = quantile(0.75) - quantile(0.25)
        self.h = max(0.9 * min(sigma, iqr / 1.34) * m ** (-0.2), _BANDWIDTH_FLOOR)

    def density(self, u: np.ndarray) -> np.ndarray:
        dmin = int(u.min()) - self.vmax
        dmax = int(u.max()) - self.vmin
        deltas = np.arange(dmin, dmax + 1, dtype=np.float64)
        with np.errstate(under="ignore"):
            table = np.exp(-0.5 * (deltas / self.h) ** 2)
        idx = (u[:, None] - self.vmin - dmin) - np.arange(self.counts.size)[None, :]
        return (table[idx] @ self.counts) / (self.m * self.h * _SQRT_2PI)


def _scan_up(low: _IntCluster, high: _IntCluster) -> int:
    """Smallest integer between the cluster means where the high-side density
    reaches the low-side density; the top of the window when it never does."""
    a = int(np.ceil(min(low.mean, high.mean)))
    b = int(np.floor(max(low.mean, high.mean)))
    if a > b:
        return b
    u = np.arange(a, b + 1)
    hits = np.nonzero(high.density(u) >= low.density(u))[0]
    return int(u[hits[0]]) if hits.size else b


def _scan_down(minus: _IntCluster, zero: _IntCluster) -> int:
    """Mirror of _scan_up: largest integer where the minus-side density
    dominates, scanning downward from the zero cluster."""
    a = int(np.ceil(min(minus.mean, zero.mean)))
    b = int(np.floor(max(minus.mean, zero.mean)))
    if a > b:
        return a
    u = np.arange(b, a - 1, -1)
    hits = np.nonzero(minus.density(u) >= zero.density(u))[0]
    return int(u[hits[0]]) if hits.size else a


def _pick_thresholds(ym: np.ndarray, y0: np.ndarray, yp: np.ndarray) -> tuple:
    if not (ym.size or y0.size or yp.size):
        raise ValueError("all three activation clusters are empty")
    cm = _IntCluster(ym) if ym.size else None
    c0 = _IntCluster(y0) if y0.size else None
    cp = _IntCluster(yp) if yp.size else None
    observed_max = max(c.vmax for c in (cm, c0, cp) if c is not None)
    observed_min = min(c.vmin for c in (cm, c0, cp) if c is not None)
    if c0 is not None:
        b_hi = _scan_up(c0, cp) if cp is not None else observed_max + 1
        b_lo = _scan_down(cm, c0) if cm is not None else observed_min - 1
    elif cm is not None and cp is not None:
        b_lo = b_hi = _scan_up(cm, cp)
    elif cp is not None:
        b_lo = b_hi = cp.vmin - 1
    else:
        b_lo = b_hi = cm.vmax + 1
    if b_lo > b_hi:
        b_lo = b_hi = (b_lo + b_hi) // 2
    return int(b_lo), int(b_hi)


def _as_int_cluster(values) -> np.ndarray:
    v = np.asarray(values, dtype=np.float64).ravel()
    if v.size and not np.all(v == np.round(v)):
        raise ValueError("transfer outputs must be integers")
    return v.astype(np.int64)


def output_thresholds(rec: ActivationRecord) -> tuple:
    """Step-activation thresholds from the density discriminants of the clusters."""
    return _pick_thresholds(
        _as_int_cluster(rec.y_minus), _as_int_cluster(rec.y_zero), _as_int_cluster(rec.y_plus)
    )


# ---------------------------------------------------------------------------
# Per-neuron probe data and the candidate score.
# ---------------------------------------------------------------------------

@dataclass
class NeuronProbe:
    """Everything one neuron's threshold search needs.

    probs holds the teacher's analytic (p_minus, p_zero, p_plus) per probe
    sample, computed on the teacher's own input; x_student holds the probe
    inputs as seen by the already-ternarized student prefix.
    """

    weights: np.ndarray  # (fan_in,) float64
    x_student: np.ndarray  # (count, fan_in) int8
    probs: np.ndarray  # (count, 3) float64
    classes: np.ndarray = field(init=False)  # teacher argmax class per sample
    class_prob: np.ndarray = field(init=False)  # probability of that class
    idx: dict = field(init=False)  # class -> sample index array

    def __post_init__(self):
        self.weights = np.asarray(self.weights, dtype=np.float64)
        self.x_student = np.ascontiguousarray(self.x_student, dtype=np.int8)
        self.probs = np.asarray(self.probs, dtype=np.float64)
        if self.x_student.ndim != 2 or self.x_student.shape[1] != self.weights.size:
            raise ValueError("probe inputs do not match the weight vector")
        if self.probs.shape != (len(self.x_student), 3):
            raise ValueError("probs must be one (p-, p0, p+) triple per probe sample")
        self.classes = teacher_classes(self.probs)
        self.class_prob = self.probs[np.arange(len(self.probs)), self.classes.astype(np.int64) + 1]
        self.idx = {c: np.nonzero(self.classes == c)[0] for c in (-1, 0, 1)}
        self.prob_by_class = {c: self.class_prob[self.idx[c]] for c in (-1, 0, 1)}

    @property
    def count(self) -> int:
        return len(self.x_student)

    @property
    def fan_in(self) -> int:
        return self.weights.size


def _score_parts(ym, y0, yp, probe: NeuronProbe) -> tuple:
    """Derive (b_lo, b_hi) from the per-class transfer outputs, then score.

    The score accumulates the teacher's class probability on exactly the
    samples where the student's deterministic output equals the teacher's
    most-probable class.
    """
    b_lo, b_hi = _pick_thresholds(ym, y0, yp)
    score = float(probe.prob_by_class[-1][ym < b_lo].sum())
    score += float(probe.prob_by_class[0][(y0 >= b_lo) & (y0 <= b_hi)].sum())
    score += float(probe.prob_by_class[1][yp > b_hi].sum())
    return b_lo, b_hi, score


def _threshold_and_score(y: np.ndarray, probe: NeuronProbe) -> tuple:
    return _score_parts(y[probe.idx[-1]], y[probe.idx[0]], y[probe.idx[1]], probe)


def score_config(probe: NeuronProbe, t_lo: float, t_hi: float) -> float:
    """Score one (t_lo, t_hi) weight-threshold candidate on the probe set."""
    if probe.count == 0:
        raise ValueError("empty probe set")
    w = ternarize_weights(probe.weights, t_lo, t_hi)
    y = probe.x_student.astype(np.int32) @ w.astype(np.int32)
    return _threshold_and_score(y, probe)[2]


# ---------------------------------------------------------------------------
# Candidate grids and the two search strategies.
# ---------------------------------------------------------------------------

@dataclass
class CandidateEval:
    i: int
    j: int
    score: float
    zeros: int
    t_abs: float
    b_lo: int
    b_hi: int

    @property
    def key(self):
        # Ties prefer sparser weights, then wider thresholds.
        return (self.score, self.zeros, self.t_abs)


class _GridBase:
    """Shared memoization, evaluation counting and best-candidate tracking."""

    n_rows: int
    n_cols: int

    def __init__(self):
        self._memo = {}
        self.evals = 0
        self.best = None

    def _eval(self, i: int, j: int) -> CandidateEval:
        raise NotImplementedError

    def evaluate(self, i: int, j: int) -> CandidateEval:
        ev = self._memo.get((i, j))
        if ev is None:
            ev = self._eval(i, j)
            self._memo[(i, j)] = ev
            self.evals += 1
            # Canonical winner: best key, then lowest grid index, so the
            # result does not depend on evaluation order.
            if (
                self.best is None
                or ev.key > self.best.key
                or (ev.key == self.best.key and (ev.i, ev.j) < (self.best.i, self.best.j))
            ):
                self.best = ev
        return ev


class SyntheticGrid(_GridBase):
    """Score-function-backed grid for search fixtures and audits."""

    def __init__(self, n_rows: int, n_cols: int, score_fn):
        super().__init__()
        self.n_rows = n_rows
        self.n_cols = n_cols
        self._fn = score_fn

    def _eval(self, i, j):
        return CandidateEval(i=i, j=j, score=float(self._fn(i, j)), zeros=0, t_abs=0.0, b_lo=0, b_hi=0)


def _cap_indices(n: int, cap: int | None) -> np.ndarray:
    if cap is None or n <= cap:
        return np.arange(n)
    return np.unique(np.round(np.linspace(0, n - 1, cap)).astype(np.int64))


class NeuronGrid(_GridBase):
    """The n x p candidate grid of one neuron, evaluated incrementally.

    Axis index = number of weight-value groups ternarized on that side, so
    transfer outputs at any candidate come from two prefix-sum tables
    instead of a fresh matrix product.
    """

    def __init__(self, probe: NeuronProbe, grid_cap: int | None = None):
        super().__init__()
        if probe.count == 0:
            raise ValueError("empty probe set")
        self.probe = probe
        w = probe.weights
        # Prefix sums are kept per teacher class so each candidate builds its
        # three activation clusters directly, with no per-sample gathering.
        xs = {c: probe.x_student[probe.idx[c]].astype(np.int32) for c in (-1, 0, 1)}

        neg_vals = np.unique(w[w < 0.0])  # ascending: most negative first
        pos_vals = np.unique(w[w > 0.0])  # ascending: most positive last

        def side(order: np.ndarray):
            cum = {c: np.zeros((len(order) + 1, xs[c].shape[0]), dtype=np.int32) for c in (-1, 0, 1)}
            cnt = np.zeros(len(order) + 1, dtype=np.int64)
            for k, v in enumerate(order):
                members = np.nonzero(w == v)[0]
                for c in (-1, 0, 1):
                    cum[c][k + 1] = cum[c][k] + xs[c][:, members].sum(axis=1, dtype=np.int32)
                cnt[k + 1] = cnt[k] + members.size
            return cum, cnt

        if neg_vals.size:
            mids = (neg_vals[:-1] + neg_vals[1:]) / 2.0
            self.t_lo_vals = np.concatenate(([neg_vals[0]], mids, [0.0]))
            self._neg_cum, self._neg_cnt = side(neg_vals)
        else:
            self.t_lo_vals = np.zeros(1)
            self._neg_cum, self._neg_cnt = side(np.zeros(0))

        if pos_vals.size:
            mids = (pos_vals[:-1] + pos_vals[1:]) / 2.0
            self.t_hi_vals = np.concatenate(([pos_vals[-1]], mids[::-1], [0.0]))
            self._pos_cum, self._pos_cnt = side(pos_vals[::-1])
        else:
            self.t_hi_vals = np.zeros(1)
            self._pos_cum, self._pos_cnt = side(np.zeros(0))

        rows = _cap_indices(len(self.t_lo_vals), grid_cap)
        cols = _cap_indices(len(self.t_hi_vals), grid_cap)
        self.t_lo_vals = self.t_lo_vals[rows]
        self.t_hi_vals = self.t_hi_vals[cols]
        self._neg_cnt = self._neg_cnt[rows]
        self._pos_cnt = self._pos_cnt[cols]
        for c in (-1, 0, 1):
            self._neg_cum[c] = self._neg_cum[c][rows]
            self._pos_cum[c] = self._pos_cum[c][cols]
        self.n_rows = len(self.t_lo_vals)
        self.n_cols = len(self.t_hi_vals)

    def _eval(self, i, j):
        ym = self._pos_cum[-1][j] - self._neg_cum[-1][i]
        y0 = self._pos_cum[0][j] - self._neg_cum[0][i]
        yp = self._pos_cum[1][j] - self._neg_cum[1][i]
        b_lo, b_hi, score = _score_parts(ym, y0, yp, self.probe)
        zeros = self.probe.fan_in - int(self._neg_cnt[i]) - int(self._pos_cnt[j])
        t_abs = abs(float(self.t_lo_vals[i])) + float(self.t_hi_vals[j])
        return CandidateEval(i=i, j=j, score=score, zeros=zeros, t_abs=t_abs, b_lo=b_lo, b_hi=b_hi)


def _exhaustive_core(grid: _GridBase) -> CandidateEval:
    for i in range(grid.n_rows):
        for j in range(grid.n_cols):
            grid.evaluate(i, j)
    return grid.best


def _line_max(evalfn, lo: int, hi: int) -> float:
    """Greedy dichotomic max of a 1-D score slice; exact when strictly unimodal."""
    while hi - lo > 3:
        step = (hi - lo) // 3
        m1, m2 = lo + step, hi - step
        s1 = evalfn(m1).score
        s2 = evalfn(m2).score
        if s1 > s2:
            hi = m2
        elif s2 > s1:
            lo = m1
        else:
            lo, hi = m1, m2
    return max(evalfn(k).score for k in range(lo, hi + 1))


def _dichotomic_core(grid: _GridBase) -> CandidateEval:
    """Pivot search: shrink the longer axis to two-thirds per step.

    Two equally spaced pivot lines are scored by the dichotomic max along
    the other axis, and the third of the range away from the winner is
    discarded.  Nine or fewer remaining candidates are scanned outright.
    All evaluated candidates count toward the returned best.
    """
    r_lo, r_hi = 0, grid.n_rows - 1
    c_lo, c_hi = 0, grid.n_cols - 1
    while (r_hi - r_lo + 1) * (c_hi - c_lo + 1) > 9:
        if r_hi - r_lo >= c_hi - c_lo:
            step = (r_hi - r_lo) // 3
            m1, m2 = r_lo + step, r_hi - step
            s1 = _line_max(lambda j: grid.evaluate(m1, j), c_lo, c_hi)
            s2 = _line_max(lambda j: grid.evaluate(m2, j), c_lo, c_hi)
            if s1 > s2:
                r_hi = m2
            elif s2 > s1:
                r_lo = m1
            else:
                r_lo, r_hi = m1, m2
        else:
            step = (c_hi - c_lo) // 3
            m1, m2 = c_lo + step, c_hi - step
            s1 = _line_max(lambda i: grid.evaluate(i, m1), r_lo, r_hi)
            s2 = _line_max(lambda i: grid.evaluate(i, m2), r_lo, r_hi)
            if s1 > s2:
                c_hi = m2
            elif s2 > s1:
                c_lo = m1
            else:
                c_lo, c_hi = m1, m2
    for i in range(r_lo, r_hi + 1):
        for j in range(c_lo, c_hi + 1):
            grid.evaluate(i, j)
    return grid.best


def _config_from(grid: NeuronGrid, ev: CandidateEval) -> TernConfig:
    return TernConfig(t_lo=float(grid.t_lo_vals[ev.i]), t_hi=float(grid.t_hi_vals[ev.j]), score=ev.score)


def exhaustive_search(probe: NeuronProbe, grid_cap: int | None = None) -> TernConfig:
    """Evaluate every candidate pair and return the score maximizer."""
    grid = NeuronGrid(probe, grid_cap)
    return _config_from(grid, _exhaustive_core(grid))


def dichotomic_search(probe: NeuronProbe, grid_cap: int | None = None) -> TernConfig:
    """Greedy dichotomic grid search; optimal when the score surface is unimodal."""
    grid = NeuronGrid(probe, grid_cap)
    return _config_from(grid, _dichotomic_core(grid))


def _search_neuron(probe: NeuronProbe, cfg: TernarizeConfig) -> dict:
    grid = NeuronGrid(probe, cfg.grid_cap)
    ev = _dichotomic_core(grid)
    dichotomic_evals = grid.evals
    norm = ev.score / probe.count
    kind = "dichotomic"
    if cfg.epsilon >= 1.0 or norm < cfg.epsilon:
        ev = _exhaustive_core(grid)  # grid.best also covers the dichotomic finds
        norm = ev.score / probe.count
        kind = "exhaustive"
    return {
        "ev": ev,
        "grid": grid,
        "kind": kind,
        "norm_score": norm,
        "evals": grid.evals,
        "dichotomic_evals": dichotomic_evals,
    }


def search_with_fallback(probe: NeuronProbe, cfg: TernarizeConfig) -> TernConfig:
    """Dichotomic search, escalated to exhaustive when the normalized score
    falls below cfg.epsilon (epsilon=1 always escalates, 0 never does)."""
    r = _search_neuron(probe, cfg)
    return _config_from(r["grid"], r["ev"])


# ---------------------------------------------------------------------------
# Layer and network ternarization.
# ---------------------------------------------------------------------------

_POOL_CTX: dict = {}


def _pool_init(payload):
    _POOL_CTX.update(payload)


def _pool_neuron(j: int):
    return _emit_neuron(
        _POOL_CTX["weights"][j],
        _POOL_CTX["x_student"],
        _POOL_CTX["probs"][:, j, :],
        _POOL_CTX["cfg"],
    )


def _emit_neuron(w_row, x_student, probs, cfg):
    probe = NeuronProbe(weights=w_row, x_student=x_student, probs=probs)
    r = _search_neuron(probe, cfg)
    ev = r["ev"]
    grid = r["grid"]
    fan_in = probe.fan_in
    weights = ternarize_weights(w_row, float(grid.t_lo_vals[ev.i]), float(grid.t_hi_vals[ev.j]))
    b_lo = int(np.clip(ev.b_lo, -fan_in, fan_in))
    b_hi = int(np.clip(ev.b_hi, -fan_in, fan_in))
    diag = {
        "fan_in": fan_in,
        "grid_rows": grid.n_rows,
        "grid_cols": grid.n_cols,
        "search": r["kind"],
        "score": ev.score,
        "norm_score": r["norm_score"],
        "evals": r["evals"],
        "t_lo": float(grid.t_lo_vals[ev.i]),
        "t_hi": float(grid.t_hi_vals[ev.j]),
        "b_lo": b_lo,
        "b_hi": b_hi,
        "zeros": ev.zeros,
    }
    return weights, b_lo, b_hi, diag


def _map_neurons(weights, x_student, probs_all, cfg, workers):
    n = len(weights)
    if workers <= 1:
        out = []
        for j in range(n):
            try:
                out.append(_emit_neuron(weights[j], x_student, probs_all[:, j, :], cfg))
            except Exception as e:
                raise TernarizeError(f"neuron {j}: {e}") from e
        return out
    payload = {"weights": weights, "x_student": x_student, "probs": probs_all, "cfg": cfg}
    ctx = multiprocessing.get_context("fork")
    with ctx.Pool(workers, initializer=_pool_init, initargs=(payload,)) as pool:
        return pool.map(_pool_neuron, range(n))


def ternarize_layer(model: RealMlp, layer_index: int, x_student, x_teacher, cfg: TernarizeConfig, workers: int = 1):
    """Ternarize one hidden layer; neurons are independent and parallelizable.

    x_student: probe inputs through the ternarized prefix (ternary ints).
    x_teacher: the same probe samples as the teacher's layer input (real).
    Returns (StudentLayer, diagnostics rows).
    """
    lay = model.hidden[layer_index]
    y_t = np.asarray(x_teacher, dtype=np.float64) @ lay.weights.T + lay.bias
    probs_all = ternary_probs(y_t, lay.activation)
    results = _map_neurons(lay.weights, np.ascontiguousarray(x_student, dtype=np.int8), probs_all, cfg, workers)
    neurons = [StudentNeuron(weights=w, b_lo=lo, b_hi=hi) for w, lo, hi, _ in results]
    student = StudentLayer(
        fan_in=lay.fan_in,
        weights=[pack(n.weights) for n in neurons],
        b_lo=np.array([n.b_lo for n in neurons], dtype=np.int32),
        b_hi=np.array([n.b_hi for n in neurons], dtype=np.int32),
    )
    diags = []
    for j, (_, _, _, d) in enumerate(results):
        d = dict(d)
        d["layer"] = layer_index
        d["neuron"] = j
        diags.append(d)
    return student, diags


OUTPUT_SWEEP_CAP = 10


def ternarize_output_layer(model: RealMlp, x_student, labels, cfg: TernarizeConfig, workers: int = 1):
    """Fit the output layer against the actual training labels.

    The target for output neuron i is +1 on samples of class i and -1
    elsewhere.  Neurons are swept round-robin until no configuration
    changes (capped at 10 sweeps; non-convergence returns the best so far
    with a warning flag).
    """
    out = model.output
    labels = np.asarray(labels)
    x_student = np.ascontiguousarray(x_student, dtype=np.int8)
    n_out = out.fan_out
    prev = None
    converged = False
    sweeps = 0
    results = None
    while sweeps < OUTPUT_SWEEP_CAP:
        sweeps += 1
        probs_all = np.empty((len(labels), n_out, 3), dtype=np.float64)
        for i in range(n_out):
            hit = labels == i
            probs_all[:, i, 0] = ~hit
            probs_all[:, i, 1] = 0.0
            probs_all[:, i, 2] = hit
        results = _map_neurons(out.weights, x_student, probs_all, cfg, workers)
        state = [(d["t_lo"], d["t_hi"], d["b_lo"], d["b_hi"]) for _, _, _, d in results]
        if state == prev:
            converged = True
            break
        prev = state
    neurons = [StudentNeuron(weights=w, b_lo=lo, b_hi=hi) for w, lo, hi, _ in results]
    student = StudentLayer(
        fan_in=out.fan_in,
        weights=[pack(n.weights) for n in neurons],
        b_lo=np.array([n.b_lo for n in neurons], dtype=np.int32),
        b_hi=np.array([n.b_hi for n in neurons], dtype=np.int32),
    )
    diags = []
    for j, (_, _, _, d) in enumerate(results):
        d = dict(d)
        d["layer"] = "output"
        d["neuron"] = j
        diags.append(d)
    return student, diags, converged, sweeps


@dataclass
class TernarizeResult:
    model: TernaryMlp
    diagnostics: list
    output_converged: bool
    output_sweeps: int
    retrain_history: list = field(default_factory=list)


def ternarize_network(
    model: RealMlp,
    ds,
    cfg: TernarizeConfig,
    train_cfg: TrainConfig | None = None,
    val=None,
    workers: int = 1,
    teacher_hash: str | None = None,
) -> TernarizeResult:
    """Compile the whole teacher into a ternary student, feed-forward order.

    With cfg.retrain on, the not-yet-ternarized layers are fine-tuned behind
    the frozen student prefix before every layer is converted (teacher and
    student then see identical layer inputs); otherwise the teacher's own
    expectation activations drive its output distributions.
    """
    rng = Rng(cfg.rng_seed)
    n_probe = min(cfg.probe_count, len(ds))
    probe_idx = np.sort(rng.choice(len(ds), size=n_probe, replace=False))
    x0 = ds.inputs[probe_idx]
    probe_labels = ds.labels[probe_idx]

    if cfg.retrain and train_cfg is None:
        train_cfg = TrainConfig(seed=cfg.rng_seed)

    current = model.clone()
    teacher_acts = None if cfg.retrain else expected_activations(current, x0.astype(np.float64))

    student_layers = []
    diagnostics = []
    retrain_history = []
    x_s = x0
    for l in range(len(current.hidden)):
        if cfg.retrain:
            res = staggered_retrain(current, student_layers, ds, train_cfg, val=val)
            current = res.model
            retrain_history.append({"before_layer": l, "epochs": len(res.history), "best_val_acc": res.best_val_acc})
            x_teacher = x_s.astype(np.float64)
        else:
            x_teacher = x0.astype(np.float64) if l == 0 else teacher_acts[l - 1][1]
        layer, diags = ternarize_layer(current, l, x_s, x_teacher, cfg, workers)
        student_layers.append(layer)
        diagnostics.extend(diags)
        x_s = forward_prefix([layer], x_s)

    if cfg.retrain:
        res = staggered_retrain(current, student_layers, ds, train_cfg, val=val)
        current = res.model
        retrain_history.append({"before_layer": "output", "epochs": len(res.history), "best_val_acc": res.best_val_acc})

    out_layer, out_diags, converged, sweeps = ternarize_output_layer(current, x_s, probe_labels, cfg, workers)
    diagnostics.extend(out_diags)

    meta = {
        "epsilon": cfg.epsilon,
        "probe_count": n_probe,
        "grid_cap": cfg.grid_cap,
        "rng_seed": cfg.rng_seed,
        "retrain": cfg.retrain,
        "teacher_hash": teacher_hash,
        "output_converged": converged,
        "output_sweeps": sweeps,
    }
    student = TernaryMlp(layers=student_layers + [out_layer], meta=meta)
    return TernarizeResult(
        model=student,
        diagnostics=diagnostics,
        output_converged=converged,
        output_sweeps=sweeps,
        retrain_history=retrain_history,
    )


DIAG_COLUMNS = [
    "layer",
    "neuron",
    "fan_in",
    "grid_rows",
    "grid_cols",
    "search",
    "score",
    "norm_score",
    "evals",
    "t_lo",
    "t_hi",
    "b_lo",
    "b_hi",
    "zeros",
]


def diagnostics_csv(rows: list) -> str:
    """Per-neuron search diagnostics as CSV with a schema-version comment."""
    lines = ["# tnn-csv-v1 ternarize-diagnostics", ",".join(DIAG_COLUMNS)]
    for r in rows:
        lines.append(
            ",".join(
                f"{r[c]:.10g}" if isinstance(r[c], float) else str(r[c]) for c in DIAG_COLUMNS
            )
        )
    return "\n".join(lines) + "\n"


def exhaustive_fraction(rows: list) -> float:
    """Fraction of searched neurons that escalated to the exhaustive search."""
    if not rows:
        return 0.0
    return sum(r["search"] == "exhaustive" for r in rows) / len(rows)
