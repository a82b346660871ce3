"""Subspace machinery for data-association-free fusion.

Stacking the antenna and subcarrier axes of an echo tensor yields an
equivalent virtual array of M*K elements observed over N symbol
snapshots. The sample covariance of that unfolding carries the target
subspace; steering the virtual array by a hypothesized 2-D position
(delay component from range, spatial component from the virtual angle)
lets every AP score the same position without associating detections.
The fused pseudospectrum is the reciprocal of the summed noise-subspace
energy across APs, so true positions appear as sharp common peaks.
"""
from __future__ import annotations

import csv
import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import RankDeficientWarning, ZeroRange
from .geometry import MIN_RANGE, SPEED_OF_LIGHT, ApGeometry, rotation_matrix
from .scenario import OfdmParams
from .echo import EchoTensor, steering_delay, steering_spatial

# relative eigenvalue gap under which the subspace split is flagged
_GAP_FLOOR = 1e-6
_EPS_SCALE = 1e-12  # regularizer per virtual element in the fused spectrum


@dataclass(frozen=True)
class UnfoldedData:
    """Snapshot matrix of one echo tensor plus its factor sizes."""

    matrix: np.ndarray  # (rows, snapshots)
    antenna_count: int
    subcarriers: int


def mode2_unfold(tensor: EchoTensor) -> UnfoldedData:
    """Rearrange (M, N, K) data into an (M*K, N) snapshot matrix.

    Row r = k*M + m holds antenna m on subcarrier k, matching the
    Khatri-Rao order of the delay and spatial steering factors, so a
    noiseless unfolding equals (G kr A) @ (O * beta)^T.
    """
    m_count, n_count, k_count = tensor.data.shape
    mat = np.transpose(tensor.data, (2, 0, 1)).reshape(k_count * m_count, n_count)
    return UnfoldedData(matrix=mat, antenna_count=m_count, subcarriers=k_count)


def refold(unfolded: UnfoldedData) -> np.ndarray:
    """Inverse of :func:`mode2_unfold`, back to an (M, N, K) cube."""
    m, k = unfolded.antenna_count, unfolded.subcarriers
    n = unfolded.matrix.shape[1]
    return unfolded.matrix.reshape(k, m, n).transpose(1, 2, 0)


def delay_unfold(tensor: EchoTensor) -> UnfoldedData:
    """Delay-only rearrangement: (K, N*M) with column c = n*M + m.

    Treats antennas and symbols alike as snapshots of a K-element
    frequency-domain array; used by the single-AP ranging baseline.
    """
    m_count, n_count, k_count = tensor.data.shape
    mat = np.transpose(tensor.data, (2, 1, 0)).reshape(k_count, n_count * m_count)
    return UnfoldedData(matrix=mat, antenna_count=1, subcarriers=k_count)


def sample_covariance(unfolded: UnfoldedData) -> np.ndarray:
    """Snapshot-averaged covariance (1/cols) Y Y^H, Hermitized."""
    y = unfolded.matrix
    r = (y @ y.conj().T) / y.shape[1]
    return 0.5 * (r + r.conj().T)


@dataclass(frozen=True)
class NoiseProjector:
    """Eigendecomposition split of one AP's covariance.

    ``basis`` holds the noise-subspace eigenvectors (the bottom
    rows - L); the signal side and the full eigenvalue list are kept
    for diagnostics and for fast spectrum evaluation.
    """

    ap_index: int
    basis: np.ndarray          # (rows, rows - L) noise subspace
    signal_basis: np.ndarray   # (rows, L)
    eigenvalues: np.ndarray    # (rows,), descending
    antenna_count: int
    subcarriers: int

    @property
    def rows(self) -> int:
        return self.basis.shape[0]

    @property
    def model_order(self) -> int:
        return self.signal_basis.shape[1]

    @property
    def signal_eigenvalues(self) -> np.ndarray:
        return self.eigenvalues[: self.model_order]


def noise_subspace(
    covariance: np.ndarray,
    model_order: int,
    ap_index: int = -1,
    antenna_count: int | None = None,
    subcarriers: int | None = None,
) -> NoiseProjector:
    """Split a covariance into signal and noise eigenvector bases.

    model_order is the assumed source count L (0 allowed); the top-L
    eigenvectors span the signal subspace. Emits RankDeficientWarning
    when eigenvalues L and L+1 differ by under 1e-6 relative, since the
    split is then ambiguous.
    """
    r = np.asarray(covariance)
    rows = r.shape[0]
    if r.shape != (rows, rows):
        raise ValueError("covariance must be square")
    if np.max(np.abs(r - r.conj().T)) > 1e-8 * max(1.0, float(np.max(np.abs(r)))):
        raise ValueError("covariance must be Hermitian")
    if not 0 <= model_order < rows:
        raise ValueError(f"model order {model_order} leaves no split of {rows} rows")

    w, v = np.linalg.eigh(r)
    order = np.argsort(w)[::-1]
    w = w[order]
    v = v[:, order]
    if model_order > 0:
        gap = w[model_order - 1] - w[model_order]
        if gap < _GAP_FLOOR * max(abs(w[model_order - 1]), np.finfo(float).tiny):
            warnings.warn(
                f"eigenvalues {model_order} and {model_order + 1} nearly equal "
                f"(AP {ap_index}); subspace split unreliable",
                RankDeficientWarning,
            )
    if antenna_count is None:
        # delay-only covariances have one implicit antenna row
        antenna_count = 1
    if subcarriers is None:
        subcarriers = rows // antenna_count
    if antenna_count * subcarriers != rows:
        raise ValueError("antenna_count * subcarriers must equal covariance size")
    return NoiseProjector(
        ap_index=ap_index,
        basis=v[:, model_order:],
        signal_basis=v[:, :model_order],
        eigenvalues=w,
        antenna_count=antenna_count,
        subcarriers=subcarriers,
    )


def projector_from_tensor(tensor: EchoTensor, model_order: int,
                          mode: str = "eva") -> NoiseProjector:
    """Unfold, estimate covariance and split, in one step."""
    if mode == "eva":
        unf = mode2_unfold(tensor)
    elif mode == "delay":
        unf = delay_unfold(tensor)
    else:
        raise ValueError(f"unknown mode {mode!r}")
    cov = sample_covariance(unf)
    return noise_subspace(cov, model_order, ap_index=tensor.ap_index,
                          antenna_count=unf.antenna_count,
                          subcarriers=unf.subcarriers)


def eva_steering(point, ap: ApGeometry, ofdm: OfdmParams) -> np.ndarray:
    """Virtual-array response kron(g(tau(p)), a(psi(p))) for one position."""
    from .geometry import candidate_delay, candidate_virtual_angle

    tau = float(candidate_delay(point, ap))
    psi = float(candidate_virtual_angle(point, ap))
    g = steering_delay(tau, ofdm.subcarriers, ofdm.subcarrier_spacing)
    a = steering_spatial(psi, ap.antenna_count, ap.antenna_spacing, ofdm.wavelength)
    return np.kron(g, a)


def _steering_factors(points: np.ndarray, ap: ApGeometry, ofdm: OfdmParams,
                      spatial: bool):
    """Columnwise delay/spatial factors for a batch of candidate points.

    Returns (G, A, on_ap) where on_ap marks points that coincide with
    the AP; their columns are filled with safe garbage and must be
    masked by the caller.
    """
    rel = points - ap.position
    rng = np.linalg.norm(rel, axis=1)
    on_ap = rng < MIN_RANGE
    safe = np.where(on_ap, 1.0, rng)

    tau = 2.0 * safe / SPEED_OF_LIGHT
    k = np.arange(1, ofdm.subcarriers + 1)
    g = np.exp(-2j * np.pi * ofdm.subcarrier_spacing * np.outer(k, tau))

    if spatial:
        loc = rel @ rotation_matrix(ap.kappa).T
        psi = np.clip(loc[:, 0] / safe, -1.0, 1.0)
        m = np.arange(ap.antenna_count)
        a = np.exp(2j * np.pi * (ap.antenna_spacing / ofdm.wavelength)
                   * np.outer(m, psi))
    else:
        a = np.ones((1, points.shape[0]), dtype=complex)
    return g, a, on_ap


def noise_energy_batch(points: np.ndarray, projector: NoiseProjector,
                       ap: ApGeometry, ofdm: OfdmParams):
    """Noise-subspace energy ||U_noise^H w(p)||^2 for a batch of points.

    Computed as ||w||^2 - ||U_signal^H w||^2, which is algebraically the
    same because the two bases are orthonormal complements; the signal
    side only has L columns, so this is far cheaper on large grids.
    Returns (energy, on_ap_mask).
    """
    spatial = projector.antenna_count > 1
    g, a, on_ap = _steering_factors(points, ap, ofdm, spatial)
    k_count, m_count = g.shape[0], a.shape[0]
    u = projector.signal_basis.conj().reshape(k_count, m_count, -1)
    sig = np.einsum("kml,kc,mc->lc", u, g, a, optimize=True)
    w_norm2 = (np.abs(g) ** 2).sum(axis=0) * (np.abs(a) ** 2).sum(axis=0)
    energy = w_norm2 - (np.abs(sig) ** 2).sum(axis=0)
    np.maximum(energy, 0.0, out=energy)
    energy[on_ap] = 0.0
    return energy, on_ap


def fused_spectrum_batch(points, projectors, aps, ofdm: OfdmParams) -> np.ndarray:
    """Fused pseudospectrum over a batch of candidate points.

    Psi(p) = 1 / (sum_p energy_p(p) + eps) with eps tied to the total
    virtual-array size; points on an AP evaluate to 0.
    """
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    total = np.zeros(pts.shape[0])
    invalid = np.zeros(pts.shape[0], dtype=bool)
    floor = 0
    for proj, ap in zip(projectors, aps):
        energy, on_ap = noise_energy_batch(pts, proj, ap, ofdm)
        total += energy
        invalid |= on_ap
        floor += proj.rows
    psi = 1.0 / (total + _EPS_SCALE * floor)
    psi[invalid] = 0.0
    return psi


def fused_spectrum(point, projectors, aps, ofdm: OfdmParams) -> float:
    """Scalar fused pseudospectrum; raises ZeroRange on an AP position."""
    pts = np.asarray(point, dtype=float).reshape(1, 2)
    for ap in aps:
        if np.linalg.norm(pts[0] - ap.position) < MIN_RANGE:
            raise ZeroRange(f"candidate coincides with AP at {ap.position}")
    return float(fused_spectrum_batch(pts, projectors, aps, ofdm)[0])


@dataclass(frozen=True)
class SpectrumGrid:
    """Pseudospectrum sampled on a regular axis-aligned grid.

    values[iy, ix] is the spectrum at (x0 + ix*spacing, y0 + iy*spacing).
    """

    x0: float
    y0: float
    spacing: float
    values: np.ndarray

    @property
    def ny(self) -> int:
        return self.values.shape[0]

    @property
    def nx(self) -> int:
        return self.values.shape[1]

    @property
    def xs(self) -> np.ndarray:
        return self.x0 + self.spacing * np.arange(self.nx)

    @property
    def ys(self) -> np.ndarray:
        return self.y0 + self.spacing * np.arange(self.ny)

    def point(self, iy: int, ix: int) -> np.ndarray:
        return np.array([self.x0 + ix * self.spacing, self.y0 + iy * self.spacing])

    def cells_containing(self, point, tol: float = 1e-9) -> list[tuple[int, int]]:
        """Indices of every closed cell containing the point.

        A point on a shared cell edge belongs to both neighbors, so
        callers checking "the peak falls in the truth's cell" stay
        robust when a coordinate sits exactly between two samples.
        """
        x, y = float(point[0]), float(point[1])
        fx = (x - self.x0) / self.spacing
        fy = (y - self.y0) / self.spacing
        out = []
        for iy in {int(np.floor(fy + tol)), int(np.ceil(fy - tol)) - 1}:
            for ix in {int(np.floor(fx + tol)), int(np.ceil(fx - tol)) - 1}:
                if 0 <= iy < self.ny - 1 and 0 <= ix < self.nx - 1:
                    out.append((iy, ix))
        return sorted(set(out))

    def nearest_index(self, point) -> tuple[int, int]:
        ix = int(round((float(point[0]) - self.x0) / self.spacing))
        iy = int(round((float(point[1]) - self.y0) / self.spacing))
        return min(max(iy, 0), self.ny - 1), min(max(ix, 0), self.nx - 1)

    def to_csv(self, path) -> None:
        """Export for heatmap plotting.

        Two header lines (field names, then origin/spacing/nx/ny), then
        ny rows of nx comma-separated spectrum values in dB
        (10 log10 Psi, row iy ascending in y, columns ascending in x).
        A zero spectrum cell exports as -inf.
        """
        with Path(path).open("w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["origin_x_m", "origin_y_m", "spacing_m",
                             "nx", "ny"])
            writer.writerow([f"{self.x0:.17g}", f"{self.y0:.17g}",
                             f"{self.spacing:.17g}", self.nx, self.ny])
            with np.errstate(divide="ignore"):
                db = 10.0 * np.log10(self.values)
            for iy in range(self.ny):
                writer.writerow([f"{v:.17g}" for v in db[iy]])

    @classmethod
    def from_csv(cls, path) -> "SpectrumGrid":
        """Read a to_csv export back into linear spectrum values."""
        with Path(path).open("r", newline="") as fh:
            rows = list(csv.reader(fh))
        if len(rows) < 2 or rows[0][:3] != ["origin_x_m", "origin_y_m",
                                            "spacing_m"]:
            raise ValueError(f"{path} is not a spectrum grid export")
        x0, y0, spacing = (float(v) for v in rows[1][:3])
        nx, ny = int(rows[1][3]), int(rows[1][4])
        db = np.array([[float(v) for v in row] for row in rows[2:2 + ny]])
        if db.shape != (ny, nx):
            raise ValueError(f"{path}: expected {ny}x{nx} values, "
                             f"got {db.shape}")
        return cls(x0=x0, y0=y0, spacing=spacing,
                   values=10.0 ** (db / 10.0))


def spectrum_grid(projectors, aps, ofdm: OfdmParams, roi, resolution: float,
                  chunk: int = 8192) -> SpectrumGrid:
    """Evaluate the fused spectrum over a rectangular region of interest.

    roi is (x0, y0, x1, y1); samples run from (x0, y0) in steps of
    ``resolution`` up to the far corner inclusive.
    """
    x0, y0, x1, y1 = (float(v) for v in roi)
    if not (x1 > x0 and y1 > y0):
        raise ValueError("roi must be non-degenerate: x1 > x0 and y1 > y0")
    if not resolution > 0:
        raise ValueError("resolution must be positive")
    nx = int(np.floor((x1 - x0) / resolution + 1e-9)) + 1
    ny = int(np.floor((y1 - y0) / resolution + 1e-9)) + 1
    xs = x0 + resolution * np.arange(nx)
    ys = y0 + resolution * np.arange(ny)
    gx, gy = np.meshgrid(xs, ys)
    pts = np.column_stack([gx.ravel(), gy.ravel()])
    vals = np.empty(pts.shape[0])
    for start in range(0, pts.shape[0], chunk):
        stop = min(start + chunk, pts.shape[0])
        vals[start:stop] = fused_spectrum_batch(pts[start:stop], projectors, aps, ofdm)
    return SpectrumGrid(x0=x0, y0=y0, spacing=resolution,
                        values=vals.reshape(ny, nx))
