"""Two-sided 2D Fourier transforms, peak analysis, and the stick oracle.

Frequency axes are angular kHz (rad/ms) throughout, matching the internal
angular units of the Hamiltonian. The transform uses the positive-sign
exponent: X(W_a, W_b) ~= sum_ab e^{+i(W_a t_a + W_b t_b)} S(t_a,t_b) dt dt,
so a time factor e^{-i E t} lands at W = +E.

Two distinct frequency scales matter below. The pixel spacing of a padded
transform is 2*pi/(pad*T); the physical resolution bin is 2*pi/T, set by
the unpadded record length T. Peak merging and stick matching are
expressed in resolution bins so they do not depend on the padding factor.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.ndimage import maximum_filter

TWO_PI = 2.0 * np.pi

# Half-maximum argument of |sin(y)/y|: sin(y) = y/2 on (pi/2, pi).
# The magnitude FWHM of a finite rectangular window of length T is
# 4*y0/T, i.e. about 1.2067 resolution bins. Reported alongside measured
# widths so instrumental and physical broadening stay distinguishable.
_SINC_HALF_ARG = 1.8954942670339809
SINC_FWHM_BINS = 2.0 * _SINC_HALF_ARG / np.pi

_TRANSFORM_AXES = {"s13": ("t1", "t3"), "s23": ("t2", "t3")}


@dataclass(frozen=True)
class Spectrum2D:
    """Two-sided 2D spectrum on centered, uniform angular-frequency grids."""

    axis_a: np.ndarray
    axis_b: np.ndarray
    values: np.ndarray
    which: str
    fixed_delay: dict
    metadata: dict


@dataclass(frozen=True)
class Peak:
    """Local maximum of |values| with its interpolated half-max widths."""

    omega_a: float
    omega_b: float
    magnitude: float
    rel_magnitude: float
    fwhm_a: float
    fwhm_b: float
    index_a: int
    index_b: int
    label: str | None = None


@dataclass(frozen=True)
class ResonancePrediction:
    """One eigenbasis pathway term: frequencies are eigenvalue differences.

    intervals holds the (ket, bra) eigenindices active during each
    transformed delay, in axis order."""

    omega_a: float
    omega_b: float
    amplitude: complex
    intervals: tuple[tuple[int, int], tuple[int, int]]


def _uniform_step(axis: np.ndarray, name: str) -> float:
    if axis.size < 2:
        raise ValueError(f"{name} needs at least two samples to transform")
    steps = np.diff(axis)
    if not np.allclose(steps, steps[0], rtol=1e-9, atol=1e-15):
        raise ValueError(f"{name} grid is not uniform")
    return float(steps[0])


def fourier_2d(grid, which: str, pad: int = 4, window: float | None = None) -> Spectrum2D:
    """Padded 2D transform of a delay scan, +i sign convention.

    which names the transform pair (s13 or s23) and must match the axes
    the grid was scanned over. pad multiplies each axis length with
    zeros before transforming; no apodization is applied unless window
    is given, in which case each axis is damped by exp(-2*pi*window*
    (t - t_start)) with window in linear kHz. Grids starting at t > 0
    carry the corresponding linear phase so the transform approximates
    the one-sided integral from the true time origin.
    """
    key = which.lower()
    if key not in _TRANSFORM_AXES:
        raise ValueError(f"unknown transform pair {which!r}, expected s13 or s23")
    expected = _TRANSFORM_AXES[key]
    if tuple(grid.labels) != expected:
        raise ValueError(
            f"{key} transforms delays {expected}, but the scan grids {grid.labels}"
        )
    if pad < 1:
        raise ValueError(f"padding factor must be >= 1, got {pad}")
    ta = np.asarray(grid.axis_a, dtype=float)
    tb = np.asarray(grid.axis_b, dtype=float)
    dta = _uniform_step(ta, "axis a")
    dtb = _uniform_step(tb, "axis b")
    s = np.array(grid.values, dtype=complex)
    if window is not None:
        if window < 0:
            raise ValueError(f"window rate must be >= 0, got {window}")
        rate = TWO_PI * window
        s *= np.exp(-rate * (ta - ta[0]))[:, None]
        s *= np.exp(-rate * (tb - tb[0]))[None, :]
    time_power = float(np.sum(np.abs(s) ** 2))
    la, lb = pad * ta.size, pad * tb.size
    x = la * lb * dta * dtb * np.fft.ifft2(s, s=(la, lb))
    x = np.fft.fftshift(x)
    wa = TWO_PI * np.fft.fftshift(np.fft.fftfreq(la, d=dta))
    wb = TWO_PI * np.fft.fftshift(np.fft.fftfreq(lb, d=dtb))
    # the grid may not start at t = 0; fold the offset into a phase ramp
    if ta[0] != 0.0:
        x *= np.exp(1j * wa * ta[0])[:, None]
    if tb[0] != 0.0:
        x *= np.exp(1j * wb * tb[0])[None, :]
    bin_a = TWO_PI / (ta.size * dta)
    bin_b = TWO_PI / (tb.size * dtb)
    metadata = {
        "which": key,
        "pad": int(pad),
        "window_khz": window,
        "dt_a": dta,
        "dt_b": dtb,
        "time_power": time_power,
        "bin_a": bin_a,
        "bin_b": bin_b,
        "sinc_fwhm_a": SINC_FWHM_BINS * bin_a,
        "sinc_fwhm_b": SINC_FWHM_BINS * bin_b,
        "source": dict(grid.metadata),
    }
    return Spectrum2D(
        axis_a=wa,
        axis_b=wb,
        values=x,
        which=key,
        fixed_delay=dict(grid.fixed),
        metadata=metadata,
    )


def parseval_residual(spectrum: Spectrum2D) -> float:
    """Relative mismatch between spectral and time-domain total power.

    For the normalization used here the exact discrete identity is
    sum |X|^2 = (dt_a dt_b)^2 * L_a * L_b * sum |S|^2, padding included.
    """
    la, lb = spectrum.values.shape
    meta = spectrum.metadata
    expected = (meta["dt_a"] * meta["dt_b"]) ** 2 * la * lb * meta["time_power"]
    got = float(np.sum(np.abs(spectrum.values) ** 2))
    if expected == 0:
        return abs(got)
    return abs(got - expected) / expected


def fold(omega, span):
    """Alias an angular frequency into the centered window of width span."""
    return ((np.asarray(omega) + span / 2.0) % span) - span / 2.0


def stick_spectrum(
    ctx,
    which: str,
    fixed_delay: float,
    n_kicks: int = 2,
    readout_ion: int = 1,
    threshold_rel: float = 1e-8,
) -> list[ResonancePrediction]:
    """Resonance positions and pathway weights from the closed eigen expansion.

    The dissipation-free signal expands exactly over eigenpairs of the
    sector Hamiltonian: inserting eigen resolutions around each free
    interval turns the scan into a sum of terms
    amp * e^{-i(E_ket - E_bra) t} per interval, so each term predicts a
    delta peak at (E_ket - E_bra) on each transformed axis under the +i
    convention. The fixed delay contributes only a phase to the term
    amplitude. Terms below threshold_rel of the strongest are dropped.
    Dephasing shifts positions only at second order in gamma over the
    eigenvalue gaps and is ignored here; this is the oracle the FFT
    route is checked against, not a third route.
    """
    key = which.lower()
    if key not in _TRANSFORM_AXES:
        raise ValueError(f"unknown transform pair {which!r}, expected s13 or s23")
    energies, vectors = np.linalg.eigh(ctx.hamiltonian)
    to_eig = vectors.conj().T
    rho0 = to_eig @ ctx.initial_state() @ vectors
    left = to_eig @ np.linalg.matrix_power(ctx.kick, n_kicks) @ vectors
    right = left.conj().T
    readout = to_eig @ ctx.readout_projector(readout_ion) @ vectors

    # amp[a,b,c,d] = P[d,c] R[b,d] L[c,a] rho0[a,b]; indices are
    # (ket, bra) = (a,b) during t1, (c,b) during t2, (c,d) during t3
    amp = np.einsum("dc,bd,ca,ab->abcd", readout, right, left, rho0)
    peak_amp = np.max(np.abs(amp))
    if peak_amp == 0:
        return []
    idx = np.argwhere(np.abs(amp) > threshold_rel * peak_amp)
    out = []
    for a, b, c, d in idx:
        if key == "s23":
            phase = np.exp(-1j * (energies[a] - energies[b]) * fixed_delay)
            omega_a = energies[c] - energies[b]
            intervals = ((int(c), int(b)), (int(c), int(d)))
        else:
            phase = np.exp(-1j * (energies[c] - energies[b]) * fixed_delay)
            omega_a = energies[a] - energies[b]
            intervals = ((int(a), int(b)), (int(c), int(d)))
        omega_b = energies[c] - energies[d]
        out.append(
            ResonancePrediction(
                omega_a=float(omega_a),
                omega_b=float(omega_b),
                amplitude=complex(amp[a, b, c, d] * phase),
                intervals=intervals,
            )
        )
    out.sort(key=lambda p: -abs(p.amplitude))
    return out


def merged_predictions(
    predictions, decimals: int = 9, threshold_rel: float = 1e-8
) -> list[ResonancePrediction]:
    """Coherently sum pathway terms sharing a frequency pair.

    Degenerate terms interfere; the merged amplitude is what an ideal
    spectrometer would see at that position. Terms whose net amplitude
    cancels below threshold_rel of the strongest merged stick are
    dropped. The surviving intervals are those of the largest single
    contributor.
    """
    table = {}
    for p in predictions:
        key = (round(p.omega_a, decimals), round(p.omega_b, decimals))
        if key in table:
            total, best = table[key]
            if abs(p.amplitude) > abs(best.amplitude):
                best = p
            table[key] = (total + p.amplitude, best)
        else:
            table[key] = (p.amplitude, p)
    merged = [
        ResonancePrediction(
            omega_a=key[0], omega_b=key[1], amplitude=total, intervals=best.intervals
        )
        for key, (total, best) in table.items()
    ]
    top = max(abs(p.amplitude) for p in merged)
    merged = [p for p in merged if abs(p.amplitude) > threshold_rel * top]
    merged.sort(key=lambda p: -abs(p.amplitude))
    return merged


def _half_crossings(line: np.ndarray, i0: int, axis: np.ndarray) -> float:
    """Full width of |line| about the maximum at i0, linear interpolation
    of the half-maximum crossings. NaN when a crossing runs off the grid."""
    half = line[i0] / 2.0
    n = line.size
    j = i0
    while j + 1 < n and line[j + 1] >= half:
        j += 1
    if j + 1 >= n:
        return float("nan")
    t = (line[j] - half) / (line[j] - line[j + 1])
    right = axis[j] + t * (axis[j + 1] - axis[j])
    j = i0
    while j - 1 >= 0 and line[j - 1] >= half:
        j -= 1
    if j - 1 < 0:
        return float("nan")
    t = (line[j] - half) / (line[j] - line[j - 1])
    left = axis[j] + t * (axis[j - 1] - axis[j])
    return float(right - left)


def find_peaks(spectrum: Spectrum2D, threshold_rel: float) -> list[Peak]:
    """Merged local maxima of |values| with interpolated FWHM estimates.

    Maxima above threshold_rel of the global maximum are collected on the
    padded pixel grid (periodic neighborhoods, since the axes wrap), then
    merged greedily, strongest first, within a Chebyshev radius of 3
    resolution bins. That radius covers the first two sidelobe rings of
    the rectangular window, whose inner maxima otherwise register as
    separate peaks, while anything 3 bins out is resolved by construction.
    """
    if not 0.0 < threshold_rel < 1.0:
        raise ValueError(f"threshold_rel must be in (0, 1), got {threshold_rel}")
    mag = np.abs(spectrum.values)
    top = mag.max()
    if top == 0.0:
        return []
    local_max = maximum_filter(mag, size=3, mode="wrap") == mag
    mask = local_max & (mag >= threshold_rel * top)
    coords = np.argwhere(mask)
    order = np.argsort(-mag[mask])
    coords = coords[order]
    pad = int(spectrum.metadata.get("pad", 1))
    radius = 3 * pad
    kept: list[tuple[int, int]] = []
    for ia, ib in coords:
        if any(
            max(abs(int(ia) - ka), abs(int(ib) - kb)) <= radius for ka, kb in kept
        ):
            continue
        kept.append((int(ia), int(ib)))
    peaks = []
    for ia, ib in kept:
        peaks.append(
            Peak(
                omega_a=float(spectrum.axis_a[ia]),
                omega_b=float(spectrum.axis_b[ib]),
                magnitude=float(mag[ia, ib]),
                rel_magnitude=float(mag[ia, ib] / top),
                fwhm_a=_half_crossings(mag[:, ib], ia, spectrum.axis_a),
                fwhm_b=_half_crossings(mag[ia, :], ib, spectrum.axis_b),
                index_a=ia,
                index_b=ib,
            )
        )
    return peaks


def lineshape_report(
    peaks, predictions, spectrum: Spectrum2D, match_bins: float = 3.0
) -> list[dict]:
    """Associate measured peaks with stick predictions, alias-aware.

    Each peak is assigned the nearest merged prediction, distance taken
    in resolution bins after folding the frequency difference into the
    sampled window (an undersampled resonance appears at its alias, and
    should still match). Assignments farther than match_bins are flagged
    unmatched. Each row carries the measured widths, the instrumental
    sinc floor for that axis, and the width anisotropy fwhm_a / fwhm_b.
    """
    if not peaks:
        raise ValueError("no peaks to report on")
    if not predictions:
        raise ValueError("no predictions to match against")
    merged = merged_predictions(predictions)
    meta = spectrum.metadata
    bin_a, bin_b = meta["bin_a"], meta["bin_b"]
    span_a = TWO_PI / meta["dt_a"]
    span_b = TWO_PI / meta["dt_b"]
    rows = []
    for peak in peaks:
        best = None
        best_dist = np.inf
        for pred in merged:
            da = abs(fold(peak.omega_a - pred.omega_a, span_a)) / bin_a
            db = abs(fold(peak.omega_b - pred.omega_b, span_b)) / bin_b
            dist = max(da, db)
            if dist < best_dist:
                best_dist = dist
                best = pred
        matched = best_dist <= match_bins
        anisotropy = (
            peak.fwhm_a / peak.fwhm_b
            if np.isfinite(peak.fwhm_a) and np.isfinite(peak.fwhm_b) and peak.fwhm_b
            else float("nan")
        )
        rows.append(
            {
                "omega_a": peak.omega_a,
                "omega_b": peak.omega_b,
                "magnitude": peak.magnitude,
                "rel_magnitude": peak.rel_magnitude,
                "fwhm_a": peak.fwhm_a,
                "fwhm_b": peak.fwhm_b,
                "sinc_fwhm_a": meta["sinc_fwhm_a"],
                "sinc_fwhm_b": meta["sinc_fwhm_b"],
                "anisotropy": anisotropy,
                "matched": bool(matched),
                "distance_bins": float(best_dist),
                "prediction": None
                if best is None
                else {
                    "omega_a": best.omega_a,
                    "omega_b": best.omega_b,
                    "folded_a": float(fold(best.omega_a, span_a)),
                    "folded_b": float(fold(best.omega_b, span_b)),
                    "amplitude_abs": abs(best.amplitude),
                    "intervals": [list(pair) for pair in best.intervals],
                },
            }
        )
    return rows


def write_spectrum_csv(spectrum: Spectrum2D, path: str | Path) -> None:
    with open(Path(path), "w", newline="") as fh:
        fh.write("omega_a,omega_b,re,im,abs\n")
        for i, wa in enumerate(spectrum.axis_a):
            for j, wb in enumerate(spectrum.axis_b):
                v = spectrum.values[i, j]
                fh.write(
                    f"{float(wa)!r},{float(wb)!r},{float(v.real)!r},"
                    f"{float(v.imag)!r},{float(abs(v))!r}\n"
                )


def write_spectrum_sidecar(
    spectrum: Spectrum2D, path: str | Path, extra: dict | None = None
) -> None:
    doc = {
        "which": spectrum.which,
        "fixed_delay": spectrum.fixed_delay,
        "axis_a": {
            "start": float(spectrum.axis_a[0]),
            "step": float(spectrum.axis_a[1] - spectrum.axis_a[0]),
            "count": int(spectrum.axis_a.size),
            "units": "angular kHz (rad/ms)",
        },
        "axis_b": {
            "start": float(spectrum.axis_b[0]),
            "step": float(spectrum.axis_b[1] - spectrum.axis_b[0]),
            "count": int(spectrum.axis_b.size),
            "units": "angular kHz (rad/ms)",
        },
        "parseval_residual": parseval_residual(spectrum),
    }
    doc.update(spectrum.metadata)
    if extra:
        doc.update(extra)
    with open(Path(path), "w") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True, default=_json_default)
        fh.write("\n")


def _json_default(obj):
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(f"not JSON serializable: {type(obj)}")


def _pyplot():
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    return plt


_AXIS_TEX = {"t1": r"$\Omega_1$", "t2": r"$\Omega_2$", "t3": r"$\Omega_3$"}


def render_spectrum_png(spectrum: Spectrum2D, path: str | Path, title: str | None = None):
    """Grayscale |values| heatmap; the second transformed delay runs along x."""
    plt = _pyplot()
    mag = np.abs(spectrum.values)
    wa, wb = spectrum.axis_a, spectrum.axis_b
    half_a = (wa[1] - wa[0]) / 2.0
    half_b = (wb[1] - wb[0]) / 2.0
    fig, ax = plt.subplots(figsize=(6.4, 5.2))
    image = ax.imshow(
        mag,
        origin="lower",
        aspect="auto",
        cmap="gray",
        extent=(wb[0] - half_b, wb[-1] + half_b, wa[0] - half_a, wa[-1] + half_a),
    )
    name_a, name_b = _TRANSFORM_AXES[spectrum.which]
    ax.set_xlabel(f"{_AXIS_TEX[name_b]} (rad/ms)")
    ax.set_ylabel(f"{_AXIS_TEX[name_a]} (rad/ms)")
    ax.set_title(title or f"|{spectrum.which}| spectrum")
    fig.colorbar(image, ax=ax, label="|S|")
    fig.tight_layout()
    fig.savefig(Path(path), dpi=150, metadata={"Software": None})
    plt.close(fig)


def render_signal_png(grid, path: str | Path, title: str | None = None):
    """Grayscale |S(t_a, t_b)| heatmap of a raw delay scan."""
    plt = _pyplot()
    mag = np.abs(grid.values)
    ta, tb = grid.axis_a, grid.axis_b
    half_a = (ta[1] - ta[0]) / 2.0 if ta.size > 1 else 0.5
    half_b = (tb[1] - tb[0]) / 2.0 if tb.size > 1 else 0.5
    fig, ax = plt.subplots(figsize=(6.4, 5.2))
    image = ax.imshow(
        mag,
        origin="lower",
        aspect="auto",
        cmap="gray",
        extent=(tb[0] - half_b, tb[-1] + half_b, ta[0] - half_a, ta[-1] + half_a),
    )
    name_a, name_b = grid.labels
    ax.set_xlabel(f"{name_b} (ms)")
    ax.set_ylabel(f"{name_a} (ms)")
    ax.set_title(title or "|S| delay scan")
    fig.colorbar(image, ax=ax, label="|S|")
    fig.tight_layout()
    fig.savefig(Path(path), dpi=150, metadata={"Software": None})
    plt.close(fig)
