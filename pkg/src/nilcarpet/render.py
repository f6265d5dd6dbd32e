"""Binary PPM (P6) slices of the carpet and packing on a coordinate 2-plane."""

from __future__ import annotations

import re

import numpy as np

from .carnot import HalfSpacePoint
from .carpet import CarpetSpec, contains
from .groups import BallIndex, _split
from .packing import Packing

CARPET = (40, 40, 48)
REMOVED = (250, 250, 245)
OUTLINE = (30, 90, 200)
EXCLUDED_FILL = (250, 205, 200)
EXCLUDED_OUTLINE = (200, 30, 30)
MAX_RES = 8192

_TERM = re.compile(r"^\s*x(\d+)\s*=\s*([-+0-9.eE]+)\s*$")


class PlaneSpecError(ValueError):
    pass


def parse_plane(spec: str, dim: int) -> tuple[tuple[int, int], np.ndarray]:
    """``"x3=0"``-style assignments fix chart coordinates (1-based).

    ``x{dim+1}`` is the height ``u`` and may only be fixed to 0.  The two
    lowest unfixed chart coordinates span the image; any other unfixed
    coordinate is set to 0.
    """
    fixed: dict[int, float] = {}
    for term in filter(None, (s.strip() for s in spec.split(","))):
        m = _TERM.match(term)
        if not m:
            raise PlaneSpecError(f"cannot parse plane term {term!r}; expected like 'x3=0'")
        axis = int(m.group(1))
        try:
            val = float(m.group(2))
        except ValueError:
            raise PlaneSpecError(f"bad value in plane term {term!r}") from None
        if not 1 <= axis <= dim + 1:
            raise PlaneSpecError(f"coordinate x{axis} out of range 1..{dim + 1}")
        if axis == dim + 1 and val != 0.0:
            raise PlaneSpecError(f"x{axis} is the height u; only the boundary slice u = 0 is rendered")
        if axis <= dim and abs(val) > 0.5:
            raise PlaneSpecError(f"x{axis} = {val} lies outside the cube")
        if axis in fixed:
            raise PlaneSpecError(f"x{axis} fixed twice")
        fixed[axis] = val
    free = [a for a in range(1, dim + 1) if a not in fixed]
    if len(free) < 2:
        raise PlaneSpecError("plane spec leaves fewer than two free chart coordinates")
    base = np.zeros(dim)
    for a, v in fixed.items():
        if a <= dim:
            base[a - 1] = v
    return (free[0] - 1, free[1] - 1), base


def slice_points(axes, base: np.ndarray, res: int) -> np.ndarray:
    t = (np.arange(res) + 0.5) / res - 0.5
    rows, cols = np.meshgrid(t[::-1], t, indexing="ij")  # first image row is the top
    pts = np.broadcast_to(base, (res, res, len(base))).copy()
    pts[..., axes[0]] = cols
    pts[..., axes[1]] = rows
    return pts


def render(carpet: CarpetSpec, packing: Packing | None, plane: str, res: int) -> np.ndarray:
    if not isinstance(res, int) or res < 2 or res > MAX_RES:
        raise ValueError(f"resolution must be an integer in [2, {MAX_RES}], got {res!r}")
    axes, base = parse_plane(plane, carpet.dim)
    pts = slice_points(axes, base, res)
    img = np.empty((res, res, 3), dtype=np.uint8)
    inside = contains(carpet, pts)
    img[inside] = CARPET
    img[~inside] = REMOVED
    if packing is not None and len(packing):
        flat = pts.reshape(-1, carpet.dim)
        idx = BallIndex(packing.centers, packing.radii, packing.algebra, packing.n)
        xi, v = _split(flat, packing.algebra, packing.n)
        cand, ratio = idx.gauge_ratio(HalfSpacePoint(xi, v, np.zeros(len(flat))))
        best = np.argmin(ratio, axis=1)
        which = cand[np.arange(len(flat)), best].reshape(res, res)
        inner = (ratio[np.arange(len(flat)), best] <= 1.0).reshape(res, res)
        which = np.where(inner, which, -1)
        edge = np.zeros_like(inner)
        edge[1:, :] |= which[1:, :] != which[:-1, :]
        edge[:-1, :] |= which[:-1, :] != which[1:, :]
        edge[:, 1:] |= which[:, 1:] != which[:, :-1]
        edge[:, :-1] |= which[:, :-1] != which[:, 1:]
        edge &= inner
        excluded = np.isin(which, np.array(packing.excluded, dtype=np.int64)) & inner
        img[excluded] = EXCLUDED_FILL
        img[edge] = OUTLINE
        img[edge & excluded] = EXCLUDED_OUTLINE
    return img


def to_ppm(img: np.ndarray, comment: str = "") -> bytes:
    h, w, _ = img.shape
    head = b"P6\n"
    if comment:
        head += b"# " + comment.encode("ascii") + b"\n"
    head += f"{w} {h}\n255\n".encode("ascii")
    return head + np.ascontiguousarray(img, dtype=np.uint8).tobytes()


def read_ppm(data: bytes) -> np.ndarray:
    """Minimal P6 reader (comments allowed in the header)."""
    tokens = []
    pos = 0
    while len(tokens) < 4:
        while data[pos:pos + 1].isspace():
            pos += 1
        if data[pos:pos + 1] == b"#":
            pos = data.index(b"\n", pos) + 1
            continue
        end = pos
        while not data[end:end + 1].isspace():
            end += 1
        tokens.append(data[pos:end])
        pos = end
    if tokens[0] != b"P6":
        raise ValueError("not a P6 file")
    w, h, maxval = (int(t) for t in tokens[1:])
    if maxval != 255:
        raise ValueError("only 8-bit pixmaps are supported")
    pos += 1
    return np.frombuffer(data[pos:pos + w * h * 3], dtype=np.uint8).reshape(h, w, 3)
