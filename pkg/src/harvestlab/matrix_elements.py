"""Second-order kernels for inertial pointlike detectors with Gaussian switching.

Conventions: T = 1, switching chi(t) = exp(-(t - t_I)^2 / 2) / sqrt(2 pi),
massless scalar field in 3+1 Minkowski vacuum.  Every kernel is proportional
to lambda^2; the functions below compute the lambda = 1 value and multiply,
so the scaling is exact.

For a pair of detectors I, J the geometry enters only through the spatial
distance L = |x_I - x_J| and the delay Delta = t_I - t_J.

* ``local_L``      - excitation probability, closed form.
* ``nonlocal_L``   - L_IJ by quadrature of the single momentum integral.
* ``nonlocal_L_closed`` - the same in closed form (through the Faddeeva
  function); a cross-check.
* ``M_element``    - M_IJ.  The k-integral reduces to Dawson functions, which
  is the default route; ``M_element_quad`` integrates in k as a cross-check.

M_IJ contains a term proportional to exp(-Delta^2/4) / L coming from the
light-cone singularity of the time-ordered two-point function.  It diverges
for co-located pointlike detectors (L = 0); there the finite part is
returned (the 1/L pole is dropped).  See ``M_element``.
"""

from __future__ import annotations

import hashlib
import json
import math
import os
import threading
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Dict, Optional, Tuple

import numpy as np

from .protocol import ScenarioConfig
from .specfun import (
    DEFAULT_REL_TOL,
    ConvergenceError,
    DomainError,
    GaussianEnvelope,
    dawson,
    erf_complex,
    erfc_real,
    faddeeva,
    integrate_semi_infinite,
    sine_integral,
)

__all__ = [
    "GeometryPair",
    "MatrixElementSet",
    "UnsupportedConfiguration",
    "ElementError",
    "ElementCache",
    "local_L",
    "local_L_integral",
    "nonlocal_L",
    "nonlocal_L_result",
    "nonlocal_L_closed",
    "nonlocal_L_closed_erfi",
    "M_element",
    "M_element_quad",
    "M_integrand",
    "element_set",
    "pair_geometry",
    "default_cache",
    "random_element_set",
]

PI = math.pi
SQRT_PI = math.sqrt(PI)
# Cut-off beyond the Gaussian envelope: exp(-12^2) ~ 1e-63.
_ENVELOPE_WIDTH = 12.0
# Below this separation the Dawson combination in M is expanded in L.
_SMALL_L = 1e-3


class UnsupportedConfiguration(ValueError):
    """The reduced integrals assume a common gap for every detector."""


class ElementError(RuntimeError):
    """A kernel failed to evaluate; ``pair`` names the detector pair."""

    def __init__(self, pair: str, cause: Exception):
        super().__init__(f"pair {pair}: {cause}")
        self.pair = pair
        self.cause = cause


@dataclass(frozen=True)
class GeometryPair:
    """Separation ``L`` >= 0 and delay ``Delta`` = t_I - t_J, both in units of T."""

    L: float
    Delta: float = 0.0

    def __post_init__(self):
        if not (math.isfinite(self.L) and math.isfinite(self.Delta)):
            raise DomainError("geometry must be finite")
        if self.L < 0:
            raise DomainError("separation L must be non-negative")

    def reversed(self) -> "GeometryPair":
        return GeometryPair(self.L, -self.Delta)


@dataclass(frozen=True)
class MatrixElementSet:
    L_AA: float
    L_BB: float
    L_CC: float
    L_AB: complex
    L_AC: complex
    L_BC: complex
    M_AB: complex
    M_AC: complex
    M_BC: complex

    @classmethod
    def zeros(cls) -> "MatrixElementSet":
        return cls(0.0, 0.0, 0.0, 0j, 0j, 0j, 0j, 0j, 0j)

    def replace(self, **kw) -> "MatrixElementSet":
        d = asdict(self)
        d.update(kw)
        return MatrixElementSet(**d)

    def scaled(self, factor: float) -> "MatrixElementSet":
        return MatrixElementSet(**{k: v * factor for k, v in asdict(self).items()})

    def as_dict(self) -> Dict[str, complex]:
        return asdict(self)

    def digest(self) -> str:
        """Short stable hash of the values (12 significant digits)."""
        parts = []
        for k, v in asdict(self).items():
            v = complex(v)
            parts.append(f"{k}={v.real:.11e},{v.imag:.11e}")
        return hashlib.sha256(";".join(parts).encode()).hexdigest()[:16]

    def invariant_violations(self, tol: float = 1e-6) -> list:
        """List the structural invariants this set breaks (empty when valid)."""
        out = []
        for name in ("L_AA", "L_BB", "L_CC"):
            if getattr(self, name) < 0:
                out.append(f"{name} negative")
        loc = {"A": self.L_AA, "B": self.L_BB, "C": self.L_CC}
        for pair in ("AB", "AC", "BC"):
            lij = getattr(self, f"L_{pair}")
            bound = loc[pair[0]] * loc[pair[1]] * (1 + tol)
            if abs(lij) ** 2 > bound:
                out.append(f"|L_{pair}|^2 exceeds L_{pair[0]*2} L_{pair[1]*2}")
        return out


# ---------------------------------------------------------------------------
# Local term
# ---------------------------------------------------------------------------

def _check_gap_lambda(gap: float, lam: float):
    if not (math.isfinite(gap) and gap >= 0):
        raise DomainError("gap must be finite and non-negative")
    if not (math.isfinite(lam) and lam > 0):
        raise DomainError("lambda must be positive")


def local_L(gap: float, lam: float) -> float:
    """Excitation probability of one detector, lambda^2 (e^{-W^2} - sqrt(pi) W erfc W) / 8 pi^2."""
    _check_gap_lambda(gap, lam)
    base = (math.exp(-gap * gap) - SQRT_PI * gap * erfc_real(gap)) / (8 * PI * PI)
    return base * (lam * lam)


def local_L_integral(gap: float, lam: float, rel_tol: float = DEFAULT_REL_TOL):
    """The momentum integral that defines ``local_L``, evaluated by quadrature."""
    _check_gap_lambda(gap, lam)

    def f(k):
        return (k / 2) * np.exp(-(gap + k) ** 2) / (2 * PI * PI)

    res = integrate_semi_infinite(
        f, rel_tol=rel_tol, k_cut=gap + _ENVELOPE_WIDTH,
        envelope=GaussianEnvelope(1 / (4 * PI * PI), shift=gap),
    )
    return res.value.real * (lam * lam)


# ---------------------------------------------------------------------------
# Non-local L
# ---------------------------------------------------------------------------

def _sinc(x):
    return np.sinc(x / PI)


def nonlocal_L_result(gapI: float, gapJ: float, geom: GeometryPair, lam: float,
                      rel_tol: float = DEFAULT_REL_TOL, k_cut: Optional[float] = None):
    """Quadrature result (lambda = 1) for L_IJ; see ``nonlocal_L``."""
    if gapI != gapJ:
        raise UnsupportedConfiguration(
            "unequal gaps: the single momentum integral assumes a common gap")
    gap = gapI
    _check_gap_lambda(gap, lam)
    L, D = geom.L, geom.Delta
    if k_cut is None:
        k_cut = gap + _ENVELOPE_WIDTH

    def f(k):
        return (k / 2) * np.exp(-(gap + k) ** 2 + 1j * (gap + k) * D) * _sinc(k * L) / (2 * PI * PI)

    return integrate_semi_infinite(
        f, rel_tol=rel_tol, k_cut=k_cut,
        envelope=GaussianEnvelope(1 / (4 * PI * PI), shift=gap),
        max_panel=(PI / (2 * L)) if L > 0 else None,
    )


def nonlocal_L(gapI: float, gapJ: float, geom: GeometryPair, lam: float,
               rel_tol: float = DEFAULT_REL_TOL) -> complex:
    """L_IJ = lambda^2/(2 pi^2) int_0^inf (k/2) e^{-(W+k)^2 + i(W+k)Delta} sinc(kL) dk.

    Evaluated by adaptive quadrature; at L = Delta = 0 this is exactly
    ``local_L``.  Unequal gaps are rejected.
    """
    if gapI == gapJ and geom.L == 0 and geom.Delta == 0:
        return complex(local_L(gapI, lam))
    res = nonlocal_L_result(gapI, gapJ, geom, lam, rel_tol)
    return complex(res.value) * (lam * lam)


def nonlocal_L_closed(gap: float, geom: GeometryPair, lam: float) -> complex:
    """Closed form of L_IJ for L > 0.

    lambda^2 / (16 pi^{3/2} L) e^{-L^2/4 - Delta^2/4} {
        e^{L Delta/2 + i W L} [ i + erfi((L - Delta)/2 - iW)]
      + e^{-L Delta/2 - i W L} [-i + erfi((L + Delta)/2 + iW)] }

    The two erfi terms cancel catastrophically for large gaps, so the
    expression is evaluated in the equivalent Faddeeva form
    i e^{-W^2 + iW Delta} [w((Delta - L)/2 + iW) - w((Delta + L)/2 + iW)] / (16 pi^{3/2} L).
    """
    _check_gap_lambda(gap, lam)
    L, D = geom.L, geom.Delta
    if L <= 0:
        raise DomainError("closed form needs L > 0; use nonlocal_L for L = 0")
    w1 = faddeeva(complex((D - L) / 2, gap))
    w2 = faddeeva(complex((D + L) / 2, gap))
    base = 1j * np.exp(-gap * gap + 1j * gap * D) * (w1 - w2) / (16 * PI**1.5 * L)
    return complex(base) * (lam * lam)


def nonlocal_L_closed_erfi(gap: float, geom: GeometryPair, lam: float) -> complex:
    """The erfi form of ``nonlocal_L_closed`` evaluated literally (moderate gaps only)."""
    _check_gap_lambda(gap, lam)
    L, D = geom.L, geom.Delta
    if L <= 0:
        raise DomainError("closed form needs L > 0")
    from .specfun import erfi_complex

    t1 = np.exp(L * D / 2 + 1j * gap * L) * (1j + erfi_complex(complex((L - D) / 2, -gap)))
    t2 = np.exp(-L * D / 2 - 1j * gap * L) * (-1j + erfi_complex(complex((L + D) / 2, gap)))
    base = np.exp(-L * L / 4 - D * D / 4) * (t1 + t2) / (16 * PI**1.5 * L)
    return complex(base) * (lam * lam)


# ---------------------------------------------------------------------------
# M
# ---------------------------------------------------------------------------

def _M_prefactor(gap: float, tI: float, tJ: float) -> complex:
    return -np.exp(1j * gap * (tI + tJ) - gap * gap) / (8 * PI**2.5)


def _dawson_pair_over_2L(L: float, D: float) -> float:
    """[F((L - D)/2) + F((L + D)/2)] / (2L), continuous at L = 0."""
    a = abs(D) / 2
    if L >= _SMALL_L:
        return float(dawson((L - D) / 2) + dawson((L + D) / 2)) / (2 * L)
    # F odd: F(a + h) - F(a - h) = 2h F'(a) + h^3 F'''(a)/3 + O(h^5), h = L/2
    F = float(dawson(a))
    d1 = 1 - 2 * a * F
    d2 = -2 * F - 2 * a * d1
    d3 = -4 * d1 - 2 * a * d2
    return d1 / 2 + L * L * d3 / 48


def M_element(gap: float, tI: float, tJ: float, geom: GeometryPair, lam: float) -> complex:
    """M_IJ for detectors with common gap, peaks tI, tJ, and separation geom.L.

    With P = -lambda^2 e^{i W (tI + tJ) - W^2} / (8 pi^{5/2}) and F Dawson's
    integral,

        M = P/(2L) [2 sqrt(pi) (F((L-Delta)/2) + F((L+Delta)/2))
                    - i pi (e^{-(L-Delta)^2/4} + e^{-(L+Delta)^2/4})].

    At L = 0 the second bracket term is a 1/L pole; the finite part
    P sqrt(pi) (1 - |Delta| F(|Delta|/2)) is returned instead.
    ``geom.Delta`` must equal tI - tJ.
    """
    _check_gap_lambda(gap, lam)
    L, D = geom.L, geom.Delta
    if not math.isclose(D, tI - tJ, rel_tol=1e-12, abs_tol=1e-12):
        raise DomainError("geom.Delta must equal tI - tJ")
    P = _M_prefactor(gap, tI, tJ)
    real_part = 2 * SQRT_PI * _dawson_pair_over_2L(L, D)
    if L > 0:
        pole = -1j * PI * (math.exp(-(L - D) ** 2 / 4) + math.exp(-(L + D) ** 2 / 4)) / (2 * L)
    else:
        pole = 0.0
    return complex(P * (real_part + pole)) * (lam * lam)


def M_integrand(gap: float, tI: float, tJ: float, L: float):
    """The literal k-integrand of M_IJ (lambda = 1), built on erf_complex.

    -(1/4 pi^2) e^{i W (tI+tJ)} (k/2) e^{-(W^2+k^2)} sinc(kL)
        { e^{ik Delta} [1 - erf(Delta/2 + ik)] + e^{-ik Delta} [1 - erf(-Delta/2 + ik)] }

    Only usable for moderate k: erf(Delta/2 + ik) grows like e^{k^2}.
    """
    D = tI - tJ
    pref = -np.exp(1j * gap * (tI + tJ)) / (4 * PI * PI)

    def f(k):
        k = np.asarray(k, dtype=float)
        br = (np.exp(1j * k * D) * (1 - erf_complex(D / 2 + 1j * k))
              + np.exp(-1j * k * D) * (1 - erf_complex(-D / 2 + 1j * k)))
        return pref * (k / 2) * np.exp(-(gap * gap + k * k)) * _sinc(k * L) * br

    return f


def M_element_quad(gap: float, tI: float, tJ: float, geom: GeometryPair, lam: float,
                   rel_tol: float = 1e-10, k_max: float = 400.0):
    """M_IJ by momentum quadrature (cross-check for ``M_element``).

    The braced factor of ``M_integrand`` times e^{-k^2} equals the stable
    B(k) = 2 e^{-k^2 - ik|Delta|} - 2i e^{-Delta^2/4} Im w(k + i|Delta|/2), which
    decays only like 1/k.  The slow part h(k) = k / (sqrt(pi)(k^2 + b^2)),
    b = |Delta|/2 + 1, is subtracted and integrated analytically
    (sqrt(pi) e^{-bL} / 4L; finite part -sqrt(pi) b / 4 at L = 0), and the
    c3/k^3 remainder beyond k_max is added in closed form.

    Returns a QuadratureResult scaled by lambda^2.
    """
    _check_gap_lambda(gap, lam)
    L, D = geom.L, geom.Delta
    a = abs(D) / 2
    b = a + 1.0
    g = math.exp(-D * D / 4)

    def f(k):
        imw = np.imag(faddeeva(k + 1j * a))
        h = k / (SQRT_PI * (k * k + b * b))
        B = 2 * np.exp(-k * k - 1j * k * abs(D)) - 2j * g * (imw - h)
        return (k / 2) * _sinc(k * L) * B

    res = integrate_semi_infinite(
        f, rel_tol=rel_tol, k_cut=k_max,
        max_panel=(PI / (2 * L)) if L > 0 else 1.0,
        abs_tol=1e-14,
    )
    c3 = (b * b - a * a + 0.5) / SQRT_PI
    K = k_max
    if L > 0:
        h_int = SQRT_PI * math.exp(-b * L) / (4 * L)
        # int_K^inf sin(kL)/k^3 dk by parts
        t3 = (math.sin(K * L) / (2 * K * K) + L * math.cos(K * L) / (2 * K)
              - L * L / 2 * (PI / 2 - sine_integral(K * L)))
        tail = c3 / (2 * L) * t3
    else:
        h_int = -SQRT_PI * b / 4
        tail = c3 / (2 * K)
    # Next asymptotic order ~ k^-5 inside; crude bound for the rest.
    tail_err = 2 * g * (b * b + a * a + 2) ** 2 / (SQRT_PI * 6 * K**3)
    total = res.value - 2j * g * (h_int + tail)
    pref = -np.exp(1j * gap * (tI + tJ) - gap * gap) / (4 * PI * PI)
    scale = abs(pref) * lam * lam
    from .specfun import QuadratureResult

    return QuadratureResult(
        complex(pref * total) * (lam * lam),
        (res.abs_error_estimate + tail_err) * scale,
        res.evaluations,
    )


# ---------------------------------------------------------------------------
# Assembly and caching
# ---------------------------------------------------------------------------

def _round12(x: float) -> float:
    return float(f"{x:.11e}")


class ElementCache:
    """Thread-safe cache of lambda = 1 kernels keyed on rounded parameters.

    With ``directory`` set, entries are also persisted there, one small JSON
    file per key (written atomically), so concurrent processes can share it.
    """

    def __init__(self, directory: Optional[os.PathLike] = None):
        self._mem: Dict[Tuple, complex] = {}
        self._lock = threading.Lock()
        self.directory = Path(directory) if directory else None
        if self.directory is not None:
            self.directory.mkdir(parents=True, exist_ok=True)
        self.hits = 0
        self.misses = 0

    @staticmethod
    def key(kind: str, *params: float) -> Tuple:
        return (kind,) + tuple(_round12(float(p)) for p in params)

    def _path(self, key):
        h = hashlib.sha1(repr(key).encode()).hexdigest()
        return self.directory / f"{h}.json"

    def get(self, key):
        with self._lock:
            if key in self._mem:
                self.hits += 1
                return self._mem[key]
        if self.directory is not None:
            p = self._path(key)
            if p.exists():
                try:
                    with open(p) as fh:
                        doc = json.load(fh)
                    val = complex(doc["re"], doc["im"])
                except (OSError, ValueError, KeyError):
                    return None
                with self._lock:
                    self._mem[key] = val
                    self.hits += 1
                return val
        return None

    def put(self, key, value: complex):
        value = complex(value)
        with self._lock:
            self._mem.setdefault(key, value)
            self.misses += 1
        if self.directory is not None:
            p = self._path(key)
            tmp = p.with_suffix(f".{os.getpid()}.{threading.get_ident()}.tmp")
            with open(tmp, "w") as fh:
                json.dump({"key": repr(key), "re": value.real, "im": value.imag}, fh)
            os.replace(tmp, p)

    def get_or_compute(self, key, fn):
        val = self.get(key)
        if val is None:
            val = complex(fn())
            self.put(key, val)
        return val

    def clear(self):
        with self._lock:
            self._mem.clear()
            self.hits = self.misses = 0

    def __len__(self):
        return len(self._mem)


_default_cache: Optional[ElementCache] = None
_default_lock = threading.Lock()


def default_cache() -> ElementCache:
    """Process-wide cache; persisted under $HARVESTLAB_CACHE_DIR when set."""
    global _default_cache
    with _default_lock:
        if _default_cache is None:
            _default_cache = ElementCache(os.environ.get("HARVESTLAB_CACHE_DIR") or None)
        return _default_cache


def pair_geometry(cfg: ScenarioConfig, I: str, J: str) -> Tuple[GeometryPair, float, float]:
    dets = cfg.detectors()
    dI, dJ = dets[I], dets[J]
    L = float(np.linalg.norm(np.subtract(dI.position, dJ.position)))
    return GeometryPair(L, dI.switch_peak - dJ.switch_peak), dI.switch_peak, dJ.switch_peak


def element_set(cfg: ScenarioConfig, rel_tol: float = DEFAULT_REL_TOL,
                cache: Optional[ElementCache] = None) -> MatrixElementSet:
    """All nine kernels for a scenario (common gap required)."""
    gaps = {cfg.detA.gap, cfg.detB.gap, cfg.detC.gap}
    if len(gaps) != 1:
        raise UnsupportedConfiguration("element_set requires equal gaps for A, B and C")
    gap = gaps.pop()
    lam2 = cfg.coupling * cfg.coupling
    cache = cache if cache is not None else default_cache()

    loc = cache.get_or_compute(cache.key("Lloc", gap), lambda: local_L(gap, 1.0)).real

    out = {"L_AA": loc * lam2, "L_BB": loc * lam2, "L_CC": loc * lam2}
    for pair in ("AB", "AC", "BC"):
        geom, tI, tJ = pair_geometry(cfg, pair[0], pair[1])
        try:
            lv = cache.get_or_compute(
                cache.key("L", gap, geom.L, geom.Delta, rel_tol),
                lambda: nonlocal_L(gap, gap, geom, 1.0, rel_tol))
            # M depends on the absolute times only through the phase e^{iW(tI+tJ)}.
            mv0 = cache.get_or_compute(
                cache.key("M", gap, geom.L, abs(geom.Delta)),
                lambda: M_element(gap, abs(geom.Delta), 0.0, GeometryPair(geom.L, abs(geom.Delta)), 1.0)
                * np.exp(-1j * gap * abs(geom.Delta)))
        except (ConvergenceError, DomainError) as exc:
            raise ElementError(pair, exc) from exc
        mv = mv0 * np.exp(1j * gap * (tI + tJ))
        out[f"L_{pair}"] = complex(lv) * lam2
        out[f"M_{pair}"] = complex(mv) * lam2
    return MatrixElementSet(**out)


def random_element_set(rng: np.random.Generator, lam: float) -> MatrixElementSet:
    """A random but structurally valid element set of order lambda^2.

    Local terms are lambda^2 * U(0.5, 2); |L_IJ| is a random fraction of
    sqrt(L_II L_JJ) (so Cauchy-Schwarz holds); |M_IJ| is lambda^2 * U(0, 2).
    All phases are uniform.
    """
    l2 = lam * lam
    loc = rng.uniform(0.5, 2.0, 3) * l2

    def lij(i, j):
        return complex(math.sqrt(loc[i] * loc[j]) * rng.uniform(0.0, 1.0)
                       * np.exp(1j * rng.uniform(0.0, 2 * PI)))

    def m():
        return complex(l2 * rng.uniform(0.0, 2.0) * np.exp(1j * rng.uniform(0.0, 2 * PI)))

    return MatrixElementSet(
        float(loc[0]), float(loc[1]), float(loc[2]),
        lij(0, 1), lij(0, 2), lij(1, 2), m(), m(), m(),
    )
