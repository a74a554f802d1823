"""Photon-correlation measurements and their estimators.

Monte Carlo simulation of Hanbury Brown-Twiss and Hong-Ou-Mandel
coincidence histograms from a per-pulse photon-number source model,
the g2(0) and visibility estimators applied to such histograms, and the
mapping from two-photon indistinguishability to the process fidelity of
a post-selected linear-optical controlled-phase gate.

Delays are in ns throughout; histograms are uniform, symmetric about
zero delay.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class SourceModel:
    """Per-pulse photon statistics of the source plus detection chain.

    (p0, p1, p2) are the per-pulse photon-number probabilities, ``overlap``
    the wavepacket overlap M between photons from consecutive pulses,
    ``efficiency`` the end-to-end detection efficiency per photon.
    """

    p0: float
    p1: float
    p2: float
    overlap: float = 1.0
    efficiency: float = 1.0
    rep_period_ns: float = 1e3 / 82.0
    lifetime_ns: float = 0.408

    def __post_init__(self):
        for name in ("p0", "p1", "p2", "overlap", "efficiency"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name} = {v} outside [0, 1]")
        if abs(self.p0 + self.p1 + self.p2 - 1.0) > 1e-9:
            raise ValueError("photon-number probabilities must sum to 1")
        if not (self.rep_period_ns > 0 and self.lifetime_ns > 0):
            raise ValueError("rep_period_ns and lifetime_ns must be positive")

    def mean_photons(self):
        return self.p1 + 2.0 * self.p2

    def analytic_g2(self):
        """Pulsed g2(0) = <n(n-1)>/<n>^2 of the number distribution."""
        mean = self.mean_photons()
        if mean == 0:
            return 0.0
        return 2.0 * self.p2 / mean**2


@dataclass(frozen=True, eq=False)
class CoincidenceHistogram:
    bin_width_ns: float
    delays_ns: np.ndarray
    counts: np.ndarray
    rep_period_ns: float

    def __post_init__(self):
        delays = np.asarray(self.delays_ns, dtype=float)
        counts = np.asarray(self.counts)
        object.__setattr__(self, "delays_ns", delays)
        object.__setattr__(self, "counts", counts)
        if delays.shape != counts.shape or delays.ndim != 1:
            raise ValueError("delays and counts must be 1-d arrays of equal length")
        if np.any(counts < 0):
            raise ValueError("counts must be non-negative")
        if delays.size > 1:
            steps = np.diff(delays)
            if np.abs(steps - self.bin_width_ns).max() > 1e-9 * self.bin_width_ns:
                raise ValueError("histogram bins must be uniform")
        if abs(delays[0] + delays[-1]) > 1e-9:
            raise ValueError("delay axis must be symmetric about zero")
        if not self.rep_period_ns > 0:
            raise ValueError("rep_period_ns must be positive")

    def window_counts(self, center_ns, window_ns):
        """Total counts with |delay - center| <= window/2."""
        sel = np.abs(self.delays_ns - center_ns) <= 0.5 * window_ns
        return float(self.counts[sel].sum())


def _symmetric_bins(half_span_ns, bin_width_ns):
    n_half = int(math.ceil(half_span_ns / bin_width_ns))
    centers = np.arange(-n_half, n_half + 1) * bin_width_ns
    edges = np.arange(-n_half - 0.5, n_half + 1.5) * bin_width_ns
    return centers, edges


def _bin_delays(delays, half_span_ns, bin_width_ns, rep_period_ns):
    centers, edges = _symmetric_bins(half_span_ns, bin_width_ns)
    counts, _ = np.histogram(delays, bins=edges)
    return CoincidenceHistogram(
        bin_width_ns=bin_width_ns,
        delays_ns=centers,
        counts=counts.astype(np.int64),
        rep_period_ns=rep_period_ns,
    )


# ---------------------------------------------------------------------------
# Hanbury Brown-Twiss
# ---------------------------------------------------------------------------

def simulate_hbt(src, n_pulses, seed, bin_width_ns=0.1, n_periods=4):
    """Monte Carlo HBT histogram over a pulse train.

    Each pulse emits k photons from (p0, p1, p2) with exponential
    emission-time jitter; every photon is routed 50:50 to two detectors
    and detected with the model efficiency.  All cross-detector pairs
    with |delay| within ``n_periods`` repetition periods are binned.
    """
    if n_pulses < 1000:
        raise ValueError("n_pulses must be >= 1e3 for meaningful statistics")
    rng = np.random.default_rng(seed)
    u = rng.random(n_pulses)
    k = (u < src.p1 + src.p2).astype(np.int8) + (u < src.p2)
    pulse_idx = np.repeat(np.arange(n_pulses, dtype=np.int64), k)
    n_photons = pulse_idx.size
    times = pulse_idx * src.rep_period_ns + rng.exponential(src.lifetime_ns, n_photons)
    detected = rng.random(n_photons) < src.efficiency
    to_a = rng.random(n_photons) < 0.5
    t_a = np.sort(times[detected & to_a])
    t_b = np.sort(times[detected & ~to_a])
    span = n_periods * src.rep_period_ns
    delays = _pair_delays(t_a, t_b, span)
    return _bin_delays(delays, span, bin_width_ns, src.rep_period_ns)


def _pair_delays(t_a, t_b, span):
    """Signed delays t_b - t_a for all pairs with |delay| <= span."""
    if t_a.size == 0 or t_b.size == 0:
        return np.empty(0)
    lo = np.searchsorted(t_b, t_a - span, side="left")
    hi = np.searchsorted(t_b, t_a + span, side="right")
    lens = hi - lo
    total = int(lens.sum())
    if total == 0:
        return np.empty(0)
    starts = np.concatenate([[0], np.cumsum(lens)[:-1]])
    flat = lo.repeat(lens) + (np.arange(total) - starts.repeat(lens))
    return t_b[flat] - t_a.repeat(lens)


@dataclass(frozen=True)
class G2Result:
    g2: float
    sigma: float
    window_ns: float
    n_side_peaks: int


def estimate_g2(hist, window_ns=3.2, n_side=6):
    """g2(0) as zero-peak counts over the mean of the nearest side peaks.

    Integrates counts in a window around zero delay and around the
    ``n_side`` nearest repetition-period peaks on each side; the error is
    propagated Poisson counting statistics, with the side-peak scatter
    entering through their empirical variance.
    """
    t_rep = hist.rep_period_ns
    if not window_ns < t_rep:
        raise ValueError(f"window {window_ns} ns overlaps adjacent peaks (period {t_rep} ns)")
    required = n_side * t_rep + 0.5 * window_ns
    if hist.delays_ns[-1] < required - 1e-9:
        raise ValueError(
            f"histogram spans {hist.delays_ns[-1]:.3g} ns but needs {required:.3g} ns "
            f"for {n_side} side peaks"
        )
    n0 = hist.window_counts(0.0, window_ns)
    side = np.array([
        hist.window_counts(sign * k * t_rep, window_ns)
        for k in range(1, n_side + 1)
        for sign in (-1, 1)
    ])
    s_mean = side.mean()
    if s_mean == 0:
        raise ValueError("side peaks are empty; cannot normalise")
    if n0 == 0:
        return G2Result(g2=0.0, sigma=1.0 / s_mean, window_ns=window_ns, n_side_peaks=n_side)
    g2 = n0 / s_mean
    var_s = side.var(ddof=1)
    sigma = g2 * math.sqrt(1.0 / n0 + var_s / (side.size * s_mean**2))
    return G2Result(g2=g2, sigma=sigma, window_ns=window_ns, n_side_peaks=n_side)


# ---------------------------------------------------------------------------
# Hong-Ou-Mandel
# ---------------------------------------------------------------------------

def simulate_hom(src, polarization, n_pulses, seed, mz_visibility=1.0,
                 mz_delay_ns=4.0, bin_width_ns=0.1):
    """Coincidence histogram of the double unbalanced Mach-Zehnder geometry.

    Consecutive pulse pairs separated by ``mz_delay_ns`` each emit photons
    which traverse an analysing MZ with the same path-length difference;
    photons arriving in the same time slot interfere on the output splitter
    with effective overlap M_eff (the model overlap for parallel
    polarisation, zero for cross, reduced by the squared first-order MZ
    visibility).  The zero-delay cluster then carries five peaks at
    0, +-1, +-2 times the delay with ideal areas {1, 2, 2(1 - M_eff), 2, 1}.
    Photon pairs emitted by the same pulse are mutually distinguishable;
    they populate the central peak and set the multi-photon background.
    """
    if polarization not in ("parallel", "cross"):
        raise ValueError(f"polarization must be 'parallel' or 'cross', got {polarization!r}")
    if not 0.0 <= mz_visibility <= 1.0:
        raise ValueError("mz_visibility must be in [0, 1]")
    m_eff = src.overlap * mz_visibility**2 if polarization == "parallel" else 0.0
    rng = np.random.default_rng(seed)
    n_trials = int(n_pulses) // 2
    delays = []

    u = rng.random((n_trials, 2))
    kk = (u < src.p1 + src.p2).astype(np.int8) + (u < src.p2)
    # photons interfere pairwise per arrival slot; fast path for the
    # dominant one-photon-per-pulse trials, python loop for the rest
    both_single = (kk[:, 0] == 1) & (kk[:, 1] == 1)
    idx_single = np.nonzero(both_single)[0]
    ns = idx_single.size
    if ns:
        arms = rng.random((ns, 2)) < 0.5  # True: long arm (+delay)
        jit = rng.exponential(src.lifetime_ns, (ns, 2))
        det = rng.random((ns, 2)) < src.efficiency
        slot1 = arms[:, 0] * mz_delay_ns
        slot2 = mz_delay_ns + arms[:, 1] * mz_delay_ns
        t1 = slot1 + jit[:, 0]
        t2 = slot2 + jit[:, 1]
        overlap_slot = slot1 == slot2
        r_route = rng.random(ns)
        r_side = rng.random(ns)
        both = det[:, 0] & det[:, 1]
        # non-overlapping slots: independent 50:50 routing
        plain = both & ~overlap_slot & (r_route < 0.5)
        # photon 1 to A or B with equal probability: signed delay either way
        sgn = np.where(r_side < 0.5, 1.0, -1.0)
        delays.append(sgn[plain] * (t2[plain] - t1[plain]))
        # overlapping slot: coincidence probability (1 - M_eff)/2
        coinc = both & overlap_slot & (r_route < 0.5 * (1.0 - m_eff))
        delays.append(sgn[coinc] * (t2[coinc] - t1[coinc]))

    rest = np.nonzero(~both_single & (kk.sum(axis=1) >= 2))[0]
    for i in rest:
        photons = []  # (pulse, slot, time)
        for pulse in (0, 1):
            for _ in range(kk[i, pulse]):
                arm = rng.random() < 0.5
                slot = pulse * mz_delay_ns + arm * mz_delay_ns
                photons.append((pulse, slot, slot + rng.exponential(src.lifetime_ns)))
        det_side = _route_photons(photons, m_eff, rng)
        for a in range(len(photons)):
            if det_side[a] is None or rng.random() >= src.efficiency:
                det_side[a] = None
        for a in range(len(photons)):
            for b in range(a + 1, len(photons)):
                if det_side[a] is None or det_side[b] is None:
                    continue
                if det_side[a] != det_side[b]:
                    if det_side[a] == 0:
                        delays.append(np.array([photons[b][2] - photons[a][2]]))
                    else:
                        delays.append(np.array([photons[a][2] - photons[b][2]]))

    all_delays = np.concatenate(delays) if delays else np.empty(0)
    span = 2.0 * mz_delay_ns + 5.0 * src.lifetime_ns
    return _bin_delays(all_delays, span, bin_width_ns, src.rep_period_ns)


def _route_photons(photons, m_eff, rng):
    """Detector side (0/1) per photon after the output beam splitter.

    Two photons sharing an arrival slot interfere: coincidence with
    probability (1 - q)/2, otherwise they bunch to one output.  The pair
    overlap q is m_eff for photons from different pulses and 0 for photons
    of the same pulse.  Slots with three or more photons are routed
    classically (negligible occupancy).
    """
    sides = [None] * len(photons)
    slots = {}
    for idx, (_, slot, _) in enumerate(photons):
        slots.setdefault(slot, []).append(idx)
    for members in slots.values():
        if len(members) == 2:
            a, b = members
            q = m_eff if photons[a][0] != photons[b][0] else 0.0
            r = rng.random()
            if r < 0.5 * (1.0 - q):
                out = (0, 1) if rng.random() < 0.5 else (1, 0)
                sides[a], sides[b] = out
            else:
                side = 0 if rng.random() < 0.5 else 1
                sides[a] = sides[b] = side
        else:
            for idx in members:
                sides[idx] = 0 if rng.random() < 0.5 else 1
    return sides


@dataclass(frozen=True)
class HOMResult:
    v_raw: float
    v_raw_sigma: float
    v_corrected: float
    v_corrected_sigma: float
    window_ns: float
    g2: float
    mz_visibility: float


def hom_raw_visibility(h_parallel, h_cross, window_ns=3.2, outer_peak_ns=8.0):
    """Raw two-photon interference visibility 1 - A_par(0)/A_cross(0).

    Central-window counts of the two histograms are compared after
    normalising each by its outer (+-outer_peak_ns) peaks, which are
    polarisation independent.  Returns (visibility, sigma) with Poisson
    error propagation.
    """
    if abs(h_parallel.bin_width_ns - h_cross.bin_width_ns) > 1e-12:
        raise ValueError("histograms must share the same binning")
    a_par = h_parallel.window_counts(0.0, window_ns)
    a_cross = h_cross.window_counts(0.0, window_ns)
    o_par = (h_parallel.window_counts(-outer_peak_ns, window_ns)
             + h_parallel.window_counts(outer_peak_ns, window_ns))
    o_cross = (h_cross.window_counts(-outer_peak_ns, window_ns)
               + h_cross.window_counts(outer_peak_ns, window_ns))
    if a_cross == 0:
        raise ValueError("cross-polarised central peak is empty; visibility undefined")
    if o_par == 0 or o_cross == 0:
        raise ValueError("outer normalisation peaks are empty")
    ratio = (a_par / o_par) / (a_cross / o_cross)
    rel = math.sqrt(
        (1.0 / a_par if a_par > 0 else 0.0) + 1.0 / a_cross + 1.0 / o_par + 1.0 / o_cross
    )
    return 1.0 - ratio, ratio * rel


def correct_visibility(v_raw, g2, mz_visibility, v_raw_sigma=0.0, g2_sigma=0.0,
                       mz_sigma=0.0):
    """Indistinguishability corrected for multi-photon emission and MZ contrast.

    v_corrected = (v_raw + 2 g2) / xi^2 with xi the first-order MZ
    visibility; first-order error propagation.  This correction is a model
    choice declared here, not a measured relation.
    """
    if mz_visibility == 0:
        raise ValueError("mz_visibility must be nonzero")
    xi2 = mz_visibility**2
    v_corr = (v_raw + 2.0 * g2) / xi2
    var = (v_raw_sigma**2 + 4.0 * g2_sigma**2) / xi2**2 \
        + (2.0 * v_corr * mz_sigma / mz_visibility) ** 2
    return v_corr, math.sqrt(var)


def analyze_hom(h_parallel, h_cross, g2, mz_visibility, window_ns=3.2,
                g2_sigma=0.0, mz_sigma=0.0):
    v_raw, v_sig = hom_raw_visibility(h_parallel, h_cross, window_ns=window_ns)
    v_corr, vc_sig = correct_visibility(v_raw, g2, mz_visibility,
                                        v_raw_sigma=v_sig, g2_sigma=g2_sigma,
                                        mz_sigma=mz_sigma)
    return HOMResult(v_raw=v_raw, v_raw_sigma=v_sig, v_corrected=v_corr,
                     v_corrected_sigma=vc_sig, window_ns=window_ns, g2=g2,
                     mz_visibility=mz_visibility)


# ---------------------------------------------------------------------------
# Controlled-phase gate fidelity
# ---------------------------------------------------------------------------

def cz_process_fidelity(overlap):
    """Process fidelity of the post-selected 1/9 linear-optical CZ gate.

    Brute-force two-photon enumeration over the dual-rail construction:
    the |1> rails meet on a 1/3-reflectivity splitter, the |0> rails are
    attenuated to match, and the output is post-selected on one photon per
    qubit.  Partial distinguishability enters as a two-dimensional internal
    mode with state overlap sqrt(M) between the two photons, traced out of
    the post-selected channel.  Returns the process fidelity of that
    channel against the ideal CZ unitary.
    """
    if not 0.0 <= overlap <= 1.0:
        raise ValueError("overlap must be in [0, 1]")
    r = math.sqrt(1.0 / 3.0)
    a = math.sqrt(2.0 / 3.0)
    v = np.zeros((6, 6), dtype=complex)  # modes c0, c1, t0, t1, v1, v2
    v[0, 0], v[4, 0] = r, a
    v[2, 2], v[5, 2] = r, a
    v[1, 1], v[3, 1] = r, 1j * a
    v[1, 3], v[3, 3] = 1j * a, r
    v[0, 4], v[4, 4] = -a, r
    v[2, 5], v[5, 5] = -a, r
    w = np.kron(v, np.eye(2))  # internal qubit rides along

    chi1 = np.array([1.0, 0.0])
    chi2 = np.array([math.sqrt(overlap), math.sqrt(1.0 - overlap)])
    c_modes = (0, 1)
    t_modes = (2, 3)

    def sp_index(mode, internal):
        return 2 * mode + internal

    # K[mu, nu] are 4x4 qubit maps indexed by the traced internal labels
    kraus = np.zeros((2, 2, 4, 4), dtype=complex)
    for x in (0, 1):
        for y in (0, 1):
            u_vec = np.zeros(12, dtype=complex)
            u_vec[sp_index(c_modes[x], 0)] = chi1[0]
            u_vec[sp_index(c_modes[x], 1)] = chi1[1]
            v_vec = np.zeros(12, dtype=complex)
            v_vec[sp_index(t_modes[y], 0)] = chi2[0]
            v_vec[sp_index(t_modes[y], 1)] = chi2[1]
            c_in = 0.5 * (np.outer(u_vec, v_vec) + np.outer(v_vec, u_vec))
            c_out = w @ c_in @ w.T
            for xp in (0, 1):
                for yp in (0, 1):
                    for mu in (0, 1):
                        for nu in (0, 1):
                            amp = 2.0 * c_out[sp_index(c_modes[xp], mu),
                                              sp_index(t_modes[yp], nu)]
                            kraus[mu, nu, 2 * xp + yp, 2 * x + y] += amp

    ucz = np.diag([1.0, 1.0, 1.0, -1.0]).astype(complex)
    num = 0.0
    den = 0.0
    for mu in (0, 1):
        for nu in (0, 1):
            k = kraus[mu, nu]
            num += abs(np.trace(ucz.conj().T @ k)) ** 2
            den += np.trace(k.conj().T @ k).real
    return float(num / (4.0 * den))


# ---------------------------------------------------------------------------
# Histogram CSV round trip
# ---------------------------------------------------------------------------

def write_histogram_csv(hist, path):
    header = (
        f"bin_width_ns = {hist.bin_width_ns!r}\n"
        f"rep_period_ns = {hist.rep_period_ns!r}\n"
        "delay_ns,counts"
    )
    np.savetxt(path, np.column_stack([hist.delays_ns, hist.counts]),
               delimiter=",", header=header, fmt=["%.12g", "%d"])


def read_histogram_csv(path):
    meta = {}
    with open(path) as fh:
        for line in fh:
            if not line.startswith("#"):
                break
            body = line[1:].strip()
            if "=" in body:
                key, _, value = body.partition("=")
                try:
                    meta[key.strip()] = float(value)
                except ValueError:
                    pass
    data = np.loadtxt(path, delimiter=",", ndmin=2)
    return CoincidenceHistogram(
        bin_width_ns=meta["bin_width_ns"],
        delays_ns=data[:, 0],
        counts=data[:, 1].astype(np.int64),
        rep_period_ns=meta["rep_period_ns"],
    )
