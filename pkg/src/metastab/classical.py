"""Classical Glauber dynamics, the discrete entropy-production identity and the Ising hard-disk construction.

Configurations are integers: bit (n - 1 - a) of ``x`` is the state of site ``a`` (site 0 is the most
significant bit), with bit 0 meaning spin up (+1) and bit 1 spin down (-1). Distributions are row
vectors and evolve as nu -> nu exp(t Q) with rows of Q summing to zero.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy import sparse
from scipy.sparse.linalg import expm_multiply
from scipy.special import expit

EXACT_MAX_STATES = 2**20
S_NODES = 64


# ------------------------------------------------------------------ models


@dataclass
class SpinModel:
    """Ising energy E(s) = -sum_{ij} J_ij s_i s_j - sum_i h_i s_i on ``n`` sites."""

    n: int
    couplings: dict = field(default_factory=dict)
    fields: np.ndarray | None = None

    def __post_init__(self):
        self.couplings = {tuple(sorted(k)): float(v) for k, v in self.couplings.items()}
        for i, j in self.couplings:
            if i == j or not (0 <= i < self.n and 0 <= j < self.n):
                raise ValueError(f"bad coupling ({i}, {j}) for {self.n} sites")
        self.fields = np.zeros(self.n) if self.fields is None else np.asarray(self.fields, dtype=float)
        self.neighbors = [[] for _ in range(self.n)]
        for (i, j), J in self.couplings.items():
            self.neighbors[i].append((j, J))
            self.neighbors[j].append((i, J))

    @property
    def n_states(self) -> int:
        return 2**self.n

    def spins(self, xs=None) -> np.ndarray:
        """(len(xs), n) array of +-1 spins for integer configurations (all of them by default)."""
        xs = np.arange(self.n_states) if xs is None else np.asarray(xs)
        bits = (xs[:, None] >> (self.n - 1 - np.arange(self.n))[None, :]) & 1
        return 1 - 2 * bits.astype(np.int8)

    def energies(self, xs=None) -> np.ndarray:
        s = self.spins(xs).astype(float)
        e = -s @ self.fields
        for (i, j), J in self.couplings.items():
            e -= J * s[:, i] * s[:, j]
        return e

    def local_field(self, s: np.ndarray, a: int) -> np.ndarray:
        """sum_j J_aj s_j + h_a for a batch of spin rows."""
        out = np.full(s.shape[0], self.fields[a])
        for j, J in self.neighbors[a]:
            out = out + J * s[:, j]
        return out

    def flip_energy(self, s: np.ndarray, a: int) -> np.ndarray:
        """E(flip_a s) - E(s)."""
        return 2.0 * s[:, a] * self.local_field(s, a)

    def gibbs(self, beta: float) -> np.ndarray:
        e = self.energies()
        w = np.exp(-beta * (e - e.min()))
        return w / w.sum()

    @classmethod
    def grid(cls, rows: int, cols: int, J: float = 1.0, periodic: bool = False) -> "SpinModel":
        idx = lambda r, c: r * cols + c
        couplings = {}
        for r in range(rows):
            for c in range(cols):
                if c + 1 < cols or (periodic and cols > 2):
                    couplings[(idx(r, c), idx(r, (c + 1) % cols))] = J
                if r + 1 < rows or (periodic and rows > 2):
                    couplings[(idx(r, c), idx((r + 1) % rows, c))] = J
        return cls(rows * cols, couplings)


def flip_rates(delta_e: np.ndarray, beta: float, rule: str = "heat-bath") -> np.ndarray:
    if rule == "heat-bath":
        return expit(-beta * delta_e)
    if rule == "metropolis":
        return np.exp(-beta * np.clip(delta_e, 0.0, None))
    raise ValueError(f"unknown update rule {rule!r}")


# ------------------------------------------------------------------ chains


@dataclass
class ClassicalChain:
    """Single-site Glauber dynamics for ``model`` at inverse temperature ``beta`` (exact mode)."""

    model: SpinModel
    beta: float
    rule: str = "heat-bath"
    _rates: dict = field(default_factory=dict, repr=False)
    _gens: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        if self.model.n_states > EXACT_MAX_STATES:
            raise MemoryError(f"{self.model.n} spins exceed the exact-mode limit of 20; use the sampling routines")
        self._spins = self.model.spins()
        self.pi = self.model.gibbs(self.beta)

    @property
    def n(self) -> int:
        return self.model.n

    def rates(self, a: int) -> np.ndarray:
        """Rate of flipping site ``a`` from every configuration."""
        if a not in self._rates:
            self._rates[a] = flip_rates(self.model.flip_energy(self._spins, a), self.beta, self.rule)
        return self._rates[a]

    def _flip(self, a: int) -> np.ndarray:
        return np.arange(self.model.n_states) ^ (1 << (self.n - 1 - a))

    def apply(self, nu, sites: Sequence[int] | None = None) -> np.ndarray:
        """nu Q_S for Q_S the generator of the sites in S (all sites by default)."""
        nu = np.asarray(nu, dtype=float)
        out = np.zeros_like(nu)
        for a in range(self.n) if sites is None else sites:
            r, f = self.rates(a), self._flip(a)
            out += (nu * r)[f] - nu * r
        return out

    def generator(self, sites: Sequence[int] | None = None) -> sparse.csr_matrix:
        key = tuple(range(self.n)) if sites is None else tuple(sorted(sites))
        if key not in self._gens:
            N = self.model.n_states
            rows, cols, vals = [], [], []
            diag = np.zeros(N)
            for a in key:
                r = self.rates(a)
                rows.append(np.arange(N))
                cols.append(self._flip(a))
                vals.append(r)
                diag -= r
            rows.append(np.arange(N))
            cols.append(np.arange(N))
            vals.append(diag)
            self._gens[key] = sparse.csr_matrix(
                (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(N, N)
            )
        return self._gens[key]

    def evolve(self, nu, t: float, sites: Sequence[int] | None = None) -> np.ndarray:
        if t == 0 or (sites is not None and len(sites) == 0):
            return np.asarray(nu, dtype=float).copy()
        return expm_multiply(self.generator(sites).T * t, np.asarray(nu, dtype=float))

    def stationarity_error(self, nu, sites: Sequence[int] | None = None) -> float:
        return float(np.abs(self.apply(nu, sites)).sum())

    def stationary_residual(self) -> float:
        return float(np.abs(self.apply(self.pi)).max())

    def detailed_balance_residual(self) -> float:
        worst = 0.0
        for a in range(self.n):
            r, f = self.rates(a), self._flip(a)
            flux = self.pi * r
            worst = max(worst, float(np.abs(flux - flux[f]).max()))
        return worst

    def row_sum_residual(self) -> float:
        return float(np.abs(np.asarray(self.generator().sum(axis=1))).max())


def glauber_generator(model: SpinModel, beta: float, rule: str = "heat-bath") -> ClassicalChain:
    return ClassicalChain(model, beta, rule)


# ------------------------------------------------ entropy production / Fisher


def _pair_terms(chain: ClassicalChain, nu, sites):
    """Yield (pi(x) Q(x, y), f(x), f(y)) over all single-site moves x -> y of the given sites."""
    f = np.asarray(nu, dtype=float) / chain.pi
    for a in range(chain.n) if sites is None else sites:
        flip = chain._flip(a)
        yield chain.pi * chain.rates(a), f, f[flip]


def classical_ep(chain: ClassicalChain, nu, sites: Sequence[int] | None = None) -> float:
    """Entropy production -d/dt D(nu_t || pi) at t = 0.

    Equals (1/2) E_{x~pi} sum_y Q(x, y) (f(y) - f(x)) log(f(y)/f(x)) with f = nu/pi; the 1/2 is
    needed because every unordered edge appears twice in the sum.
    """
    total = 0.0
    with np.errstate(divide="ignore", invalid="ignore"):
        for w, fx, fy in _pair_terms(chain, nu, sites):
            term = (fy - fx) * (np.log(fy) - np.log(fx))
            term = np.where(fx == fy, 0.0, term)
            total += float((w * term).sum())
    return 0.5 * total


def classical_fisher(chain: ClassicalChain, nu, sites: Sequence[int] | None = None, nodes: int = S_NODES) -> float:
    """(1/2) int_0^1 ds E_{x~pi} sum_y Q(x, y) f(x)^{1-s} f(y)^s log^2(f(y)/f(x))."""
    s, ws = np.polynomial.legendre.leggauss(nodes)
    s, ws = 0.5 * (s + 1), 0.5 * ws
    total = 0.0
    for w, fx, fy in _pair_terms(chain, nu, sites):
        if (fx <= 0).any() or (fy <= 0).any():
            return math.inf
        la = np.log(fy) - np.log(fx)
        integrand = fx[None, :] * np.exp(s[:, None] * la[None, :]) * la[None, :] ** 2
        total += float((w[None, :] * integrand * ws[:, None]).sum())
    return 0.5 * total


def int_log_residual(alpha: float, nodes: int = S_NODES) -> float:
    """|alpha - 1 - log(alpha) int_0^1 alpha^s ds| by Gauss-Legendre on [0, 1]."""
    s, ws = np.polynomial.legendre.leggauss(nodes)
    s, ws = 0.5 * (s + 1), 0.5 * ws
    return abs(alpha - 1 - math.log(alpha) * float((ws * alpha**s).sum()))


def relative_entropy(nu, pi) -> float:
    nu, pi = np.asarray(nu, dtype=float), np.asarray(pi, dtype=float)
    m = nu > 0
    return float((nu[m] * np.log(nu[m] / pi[m])).sum())


def classical_adb_report(chain: ClassicalChain, nu, sites: Sequence[int] | None = None) -> dict:
    """Statistics of |log(nu(x) pi(y) / (nu(y) pi(x)))| over moves x -> y weighted by nu(x) Q(x, y).

    Moves that leave the support of ``nu`` have an infinite deviation; their weight is reported
    separately as ``support_leaving_mass``.
    """
    nu = np.asarray(nu, dtype=float)
    devs, weights = [], []
    for a in range(chain.n) if sites is None else sites:
        flip = chain._flip(a)
        w = nu * chain.rates(a)
        keep = w > 0
        with np.errstate(divide="ignore"):
            d = np.abs(np.log(nu[keep]) - np.log(chain.pi[keep]) - np.log(nu[flip][keep]) + np.log(chain.pi[flip][keep]))
        devs.append(d)
        weights.append(w[keep])
    d, w = np.concatenate(devs), np.concatenate(weights)
    w = w / w.sum()
    finite = np.isfinite(d)
    mean = float((w[finite] * d[finite]).sum() / w[finite].sum()) if finite.any() else math.nan
    order = np.argsort(np.where(finite, d, np.inf))
    cdf = np.cumsum(w[order])
    quantile = lambda q: float(d[order][min(np.searchsorted(cdf, q), len(d) - 1)])
    return {
        "mean": mean,
        "max_finite": float(d[finite].max()) if finite.any() else math.nan,
        "median": quantile(0.5),
        "q90": quantile(0.9),
        "zero_fraction": float(w[finite & (d < 1e-12)].sum()),
        "support_leaving_mass": float(w[~finite].sum()),
    }


# ------------------------------------------------------------------ hard disks


def block_model(m: int, J: float = 1.0) -> SpinModel:
    """Open-boundary nearest-neighbour ferromagnet on an m x m block."""
    return SpinModel.grid(m, m, J)


def majority_mask(m: int, bit: int) -> np.ndarray:
    """Block configurations whose majority is ``bit``; ties count toward ``bit``."""
    n = m * m
    xs = np.arange(2**n)
    ones = np.array([bin(x).count("1") for x in xs]) if n <= 12 else _popcount(xs)
    count = ones if bit == 1 else n - ones
    return 2 * count >= n


def _popcount(xs: np.ndarray) -> np.ndarray:
    c = np.zeros_like(xs)
    v = xs.copy()
    while v.any():
        c += v & 1
        v >>= 1
    return c


def _mi_from_joint(p: np.ndarray) -> float:
    """Mutual information (nats) of a 2-d joint probability table."""
    pa, pb = p.sum(axis=1), p.sum(axis=0)
    m = p > 0
    return float((p[m] * np.log(p[m] / np.outer(pa, pb)[m])).sum())


@dataclass
class HardDisks:
    """L x 2L lattice of m x m ferromagnetic blocks; the right square copies the left block by block.

    With ``pattern=None`` every left/right block pair shares a uniformly random majority bit and each
    block is drawn from the Gibbs measure conditioned on that majority, independently given the bit.
    A fixed ``pattern`` (one bit per block pair) gives the product of conditioned measures instead.
    ``conditioned=False`` replaces the conditioned measures by the block Gibbs measure itself.
    """

    L: int
    m: int
    beta: float
    pattern: Sequence[int] | None = None
    rule: str = "heat-bath"
    conditioned: bool = True
    J: float = 1.0

    def __post_init__(self):
        if self.L % self.m:
            raise ValueError(f"block size {self.m} does not tile a side of length {self.L}")
        if self.m * self.m > 16:
            raise ValueError("exact block enumeration needs m^2 <= 16")
        if self.pattern is not None:
            self.pattern = [int(b) for b in self.pattern]
            if len(self.pattern) != self.n_pairs or set(self.pattern) - {0, 1}:
                raise ValueError(f"pattern needs {self.n_pairs} bits")
        self.block = glauber_generator(block_model(self.m, self.J), self.beta, self.rule)
        pi = self.block.pi
        self.nu = {}
        for bit in (0, 1):
            mask = majority_mask(self.m, bit) if self.conditioned else np.ones_like(pi, dtype=bool)
            w = np.where(mask, pi, 0.0)
            self.nu[bit] = w / w.sum()

    @property
    def n_pairs(self) -> int:
        return (self.L // self.m) ** 2

    # --- per-block quantities

    def block_stationarity(self, bit: int = 0) -> float:
        """||L_block[nu_bit]||_1 for one conditioned block."""
        return self.block.stationarity_error(self.nu[bit])

    def per_site_stationarity(self) -> float:
        return 0.5 * (self.block_stationarity(0) + self.block_stationarity(1)) / self.m**2

    def class_probabilities(self) -> np.ndarray:
        """P(class | bit) for classes (only majority 0, only majority 1, tie), rows indexed by bit."""
        out = np.zeros((2, 3))
        m0, m1 = majority_mask(self.m, 0), majority_mask(self.m, 1)
        classes = [m0 & ~m1, m1 & ~m0, m0 & m1]
        if not self.conditioned:
            classes = [np.ones_like(m0), np.zeros_like(m0), np.zeros_like(m0)]
        for bit in (0, 1):
            out[bit] = [self.nu[bit][c].sum() for c in classes]
        return out

    def mi_block(self) -> float:
        """Mutual information between the two blocks of one pair.

        Given the class of a configuration its conditional law does not depend on the shared bit,
        so the pair information equals that of the class labels.
        """
        if self.pattern is not None:
            return 0.0
        c = self.class_probabilities()
        joint = 0.5 * (np.outer(c[0], c[0]) + np.outer(c[1], c[1]))
        return _mi_from_joint(joint)

    def pair_distribution(self, bit: int | None = None) -> np.ndarray:
        """Joint law of one block pair over 2^(2 m^2) configurations (left block is the high bits)."""
        if bit is not None:
            return np.outer(self.nu[bit], self.nu[bit]).ravel()
        return (0.5 * (np.outer(self.nu[0], self.nu[0]) + np.outer(self.nu[1], self.nu[1]))).ravel()

    def pair_mi_enumerated(self) -> float:
        """Pair information by direct enumeration of the 2^(2 m^2) joint table."""
        if self.m * self.m > 9:
            raise MemoryError("direct pair enumeration is limited to m <= 3")
        bits = [None] if self.pattern is None else [self.pattern[0]]
        N = 2 ** (self.m * self.m)
        return _mi_from_joint(self.pair_distribution(bits[0]).reshape(N, N))

    def cut_mi(self) -> float:
        """Mutual information across the left/right cut; pairs are independent so it adds up."""
        return self.n_pairs * self.mi_block()

    # --- small lattices by enumeration

    def lattice_model(self, pairs: int) -> SpinModel:
        """``pairs`` disconnected block pairs; sites [pair][left block, right block][m x m]."""
        b = block_model(self.m, self.J)
        k = self.m * self.m
        couplings = {}
        for p in range(2 * pairs):
            for (i, j), J in b.couplings.items():
                couplings[(p * k + i, p * k + j)] = J
        return SpinModel(2 * pairs * k, couplings)

    def lattice_distribution(self, pairs: int) -> np.ndarray:
        out = np.ones(1)
        for p in range(pairs):
            bit = None if self.pattern is None else self.pattern[p]
            out = np.kron(out, self.pair_distribution(bit))
        return out

    def enumerated_cut_mi(self, pairs: int) -> float:
        """Information between all left blocks and all right blocks of ``pairs`` pairs, enumerated."""
        k = self.m * self.m
        nu = self.lattice_distribution(pairs).reshape([2**k, 2**k] * pairs)
        left = list(range(0, 2 * pairs, 2))
        right = list(range(1, 2 * pairs, 2))
        joint = nu.transpose(left + right).reshape(2 ** (k * pairs), 2 ** (k * pairs))
        return _mi_from_joint(joint)

    def report(self) -> dict:
        return {
            "L": self.L,
            "m": self.m,
            "beta": self.beta,
            "per_site_stationarity": self.per_site_stationarity(),
            "block_stationarity": self.block_stationarity(0),
            "lattice_stationarity_bound": 2 * self.n_pairs * self.block_stationarity(0),
            "mi_block": self.mi_block(),
            "cut_mi": self.cut_mi(),
            "cut_mi_bits": self.cut_mi() / math.log(2),
            "n_pairs": self.n_pairs,
        }


def hard_disks_metastable(L: int, m: int, beta: float, pattern: Sequence[int] | None = None, **kw) -> HardDisks:
    return HardDisks(L, m, beta, pattern, **kw)


HARD_DISK_COLUMNS = ("m", "beta", "per_site_stationarity", "cut_mi")


def write_hard_disk_csv(reports: Sequence[dict], path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(HARD_DISK_COLUMNS)
        for r in reports:
            w.writerow([r["m"], repr(float(r["beta"])), repr(float(r["per_site_stationarity"])), repr(float(r["cut_mi"]))])


def geometric_decrease(values: Sequence[float], ratio: float = 0.7) -> bool:
    return all(b <= ratio * a for a, b in zip(values[:-1], values[1:]))


# ------------------------------------------------------------------ recovery


def erase_region(nu, region: Sequence[int], n: int, tau=None) -> np.ndarray:
    """nu_{complement} (x) tau_region; tau is a law over region configurations (uniform by default)."""
    region = sorted(region)
    k = len(region)
    tau = np.full(2**k, 1.0 / 2**k) if tau is None else np.asarray(tau, dtype=float)
    t = np.asarray(nu, dtype=float).reshape([2] * n)
    rest = [q for q in range(n) if q not in region]
    marg = t.sum(axis=tuple(region))
    full = np.multiply.outer(marg, tau.reshape([2] * k)) if k else marg
    # axes of ``full`` are rest + region; put them back in site order
    order = np.argsort(rest + region)
    return full.transpose(order).ravel()


@dataclass
class ClassicalRecoveryResult:
    t: float
    total: float
    leakage: float
    mixing: float
    leakage_bound: float


def classical_recovery_experiment(chain: ClassicalChain, nu, region: Sequence[int], t_grid: Sequence[float],
                                  tau=None) -> dict:
    """Errors of exp(t L_A)[nu_{not A} (x) tau_A] against ``nu`` over a time grid, with t* the best time."""
    nu = np.asarray(nu, dtype=float)
    erased = erase_region(nu, region, chain.n, tau)
    rate = chain.stationarity_error(nu, region)
    rows = []
    for t in t_grid:
        rec = chain.evolve(erased, t, region)
        kept = chain.evolve(nu, t, region)
        rows.append(ClassicalRecoveryResult(
            float(t),
            float(np.abs(nu - rec).sum()),
            float(np.abs(nu - kept).sum()),
            float(np.abs(kept - rec).sum()),
            float(t) * rate,
        ))
    best = min(rows, key=lambda r: r.total)
    return {"rows": rows, "t_star": best.t, "error_at_t_star": best.total}


# ------------------------------------------------------------------ sampling mode


def gillespie(model: SpinModel, s: np.ndarray, t: float, beta: float, rng, sites: Sequence[int] | None = None,
              rule: str = "heat-bath") -> np.ndarray:
    """Continuous-time single-site dynamics on ``sites`` for time ``t``, starting from spin array ``s``."""
    s = np.array(s, dtype=np.int8)
    sites = np.arange(model.n) if sites is None else np.asarray(sites)
    clock = 0.0
    while True:
        row = s[None, :]
        rates = np.array([flip_rates(model.flip_energy(row, a), beta, rule)[0] for a in sites])
        total = rates.sum()
        if total <= 0:
            return s
        clock += rng.exponential(1.0 / total)
        if clock > t:
            return s
        a = sites[rng.choice(len(sites), p=rates / total)]
        s[a] = -s[a]


def hard_disk_sampler(hd: HardDisks) -> Callable:
    """Exact sampler of the hard-disk law as spin arrays in the ``lattice_model`` site order."""
    k = hd.m * hd.m
    block = block_model(hd.m)

    def sample(rng, size: int) -> np.ndarray:
        out = np.empty((size, 2 * hd.n_pairs * k), dtype=np.int8)
        for p in range(hd.n_pairs):
            bits = rng.integers(0, 2, size) if hd.pattern is None else np.full(size, hd.pattern[p])
            for side in (0, 1):
                xs = np.where(bits == 0,
                              rng.choice(2**k, size, p=hd.nu[0]),
                              rng.choice(2**k, size, p=hd.nu[1]))
                out[:, (2 * p + side) * k:(2 * p + side + 1) * k] = block.spins(xs)
        return out

    return sample


def sampled_recovery_error(model: SpinModel, beta: float, sampler: Callable, region: Sequence[int], t: float,
                           rng, samples: int = 2000, window: Sequence[int] | None = None,
                           rule: str = "heat-bath", boots: int = 200) -> dict:
    """L1 error on a window marginal after erase-and-resample, with a bootstrap interval.

    The window defaults to the region plus its coupled neighbours. Both the recovered samples and a
    fresh reference batch are drawn with ``rng``.
    """
    region = list(region)
    if window is None:
        window = sorted(set(region) | {j for a in region for j, _ in model.neighbors[a]})
    start = sampler(rng, samples)
    rec = np.empty_like(start)
    for i in range(samples):
        s = start[i].copy()
        s[region] = 1 - 2 * rng.integers(0, 2, len(region))
        rec[i] = gillespie(model, s, t, beta, rng, region, rule)
    ref = sampler(rng, samples)
    weights = 2 ** np.arange(len(window))[::-1]
    code = lambda arr: ((1 - arr[:, window]) // 2) @ weights
    a, b = code(rec), code(ref)
    K = 2 ** len(window)

    def l1(x, y):
        return float(np.abs(np.bincount(x, minlength=K) / len(x) - np.bincount(y, minlength=K) / len(y)).sum())

    est = l1(a, b)
    bs = [l1(rng.choice(a, len(a)), rng.choice(b, len(b))) for _ in range(boots)]
    lo, hi = np.quantile(bs, [0.025, 0.975])
    return {"t": t, "error": est, "ci_low": float(lo), "ci_high": float(hi), "window": window, "samples": samples}
