"""Named property suites with deterministic, machine-readable reports."""

from __future__ import annotations

import json
import math
import zlib
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from . import algebra as alg
from .algebra import Algebra
from .carnot import (CarnotPoint, dilate, kc_dist, kc_norm, max_deviation, random_carnot,
                     random_halfspace, translate)
from .carpet import (CarpetSpec, box_count_dimension, delta1_measure_exact, measure_exact, measure_mc,
                     project_delta1, removed_cells)
from .config import Config
from .groups import (boundary_triviality_check, build_group, carnot_shift, deform, equivariance_check,
                     free_relation_check, klein_check, limit_set_proxy, nontriviality_witness,
                     orbit_disjointness_check)
from .groups import _in_ball, _on_sphere
from .hyperbolic import Ball, Side, bisector_side, invert, invert_by_transport
from .packing import coverage_mc, exclude, inscribe_ball, pack, verify_disjoint
from .stretch import StretchMap

SUITES = ("carnot_isometry", "inversion_involution", "carpet_measure", "stretch_exactness", "packing_disjoint",
          "klein", "equivariance", "nontriviality", "boundary_trivial")


class UnknownSuite(KeyError):
    pass


@dataclass
class SuiteReport:
    suite: str
    config_hash: str
    seed: int
    depth: int
    pack_depth: int
    cases: int = 0
    failures: list = field(default_factory=list)
    max_deviation: float = 0.0
    details: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return not self.failures

    def record(self, name: str, cases: int, deviation: float, limit: float, **inputs):
        """Count ``cases`` and fail when ``deviation`` exceeds ``limit``."""
        self.cases += int(cases)
        if math.isfinite(deviation):
            self.max_deviation = max(self.max_deviation, float(deviation))
        if not deviation <= limit:
            self.failures.append({"check": name, "deviation": float(deviation), "limit": float(limit), **inputs})

    def flag(self, name: str, ok: bool, **inputs):
        self.cases += 1
        if not ok:
            self.failures.append({"check": name, **inputs})

    def to_dict(self) -> dict:
        return {
            "format": "nilcarpet.report",
            "version": 1,
            "suite": self.suite,
            "config_hash": self.config_hash,
            "seed": self.seed,
            "truncation": {"depth": self.depth, "pack_depth": self.pack_depth},
            "cases": self.cases,
            "passed": self.passed,
            "failures": self.failures,
            "max_deviation": self.max_deviation,
            "details": self.details,
        }

    def to_json(self) -> str:
        return json.dumps(_plain(self.to_dict()), sort_keys=True, indent=2) + "\n"


def _plain(x):
    if isinstance(x, dict):
        return {str(k): _plain(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_plain(v) for v in x]
    if isinstance(x, np.generic):
        return x.item()
    if isinstance(x, float) and not math.isfinite(x):
        return repr(x)
    return x


def _rng(seed: int, tag: str) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([seed, zlib.crc32(tag.encode())]))


# -- shared construction --------------------------------------------------


@dataclass(frozen=True, eq=False)
class Construction:
    config: Config
    carpet: CarpetSpec
    cells: object
    packing: object
    group: object

    def stretch(self, t: float) -> StretchMap:
        return _stretch(self, float(t))

    def deformation(self, t: float):
        return _deformation(self, float(t))


@lru_cache(maxsize=8)
def _build(config_json: str) -> Construction:
    from .config import from_dict

    cfg = from_dict(json.loads(config_json))
    carpet = cfg.carpet()
    cells = removed_cells(carpet)
    packing = pack(carpet, cfg.algebra_enum, cfg.n, cfg.pack_depth, cells)
    if cfg.excluded:
        packing = exclude(packing, cfg.excluded)
    group = build_group(carpet, packing, cells)
    return Construction(cfg, carpet, cells, packing, group)


def construct(cfg: Config) -> Construction:
    return _build(cfg.to_json())


@lru_cache(maxsize=32)
def _stretch(con: Construction, t: float) -> StretchMap:
    return StretchMap(t, project_delta1(con.carpet, con.cells), con.carpet)


@lru_cache(maxsize=32)
def _deformation(con: Construction, t: float):
    return deform(con.group, con.stretch(t), con.cells)


# -- suites ---------------------------------------------------------------


def _rel(a, b) -> float:
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    return float(np.max(np.abs(a - b) / np.maximum(np.abs(b), 1e-300))) if a.size else 0.0


def _carnot_isometry(cfg: Config, rep: SuiteReport):
    N = cfg.sample_count("isometry")
    tol = cfg.tol("carnot")
    for a in Algebra:
        rng = _rng(cfg.seed, f"carnot/{a.name}")
        p = random_halfspace(a, cfg.n, N, rng)
        q = random_halfspace(a, cfg.n, N, rng)
        g = random_carnot(a, cfg.n, N, rng)
        d0 = kc_dist(p, q)
        rep.record("left translation invariance", N, _rel(kc_dist(translate(g, p), translate(g, q)), d0), tol,
                   algebra=a.name)
        lam = alg.random_elements(a, (N,), rng)
        scale = np.sqrt(alg.abs2(lam))
        rep.record("dilation similarity", N, _rel(kc_dist(dilate(lam, p), dilate(lam, q)), scale * d0), tol,
                   algebra=a.name)


def _inversion(cfg: Config, rep: SuiteReport):
    N = cfg.sample_count("isometry")
    tol = cfg.tol("involution")
    for a in Algebra:
        rng = _rng(cfg.seed, f"inversion/{a.name}")
        b = random_carnot(a, cfg.n, N, rng)
        rep.record("involution on the boundary", N, max_deviation(invert(invert(b)), b), tol, algebra=a.name)
        h = random_halfspace(a, cfg.n, N, rng)
        rep.record("involution in the interior", N, max_deviation(invert(invert(h)), h), tol, algebra=a.name)
        # the projective route loses digits to cancellation far from the unit sphere,
        # so the cross-check uses moderate coordinates
        w = random_carnot(a, cfg.n, N, rng, scale=0.5).at_height(rng.uniform(0.5, 2.0, size=N))
        rep.record("closed form agrees with projective transport", N, max_deviation(invert(w), invert_by_transport(w)),
                   tol, algebra=a.name)
        unit = _on_sphere(Ball(CarnotPoint.origin(a, cfg.n), 1.0), N, rng)
        rep.record("unit sphere preserved", N, float(np.max(np.abs(kc_norm(invert(unit)) - 1.0))), cfg.tol("sphere"),
                   algebra=a.name)
        xi = rng.standard_normal((N, cfg.n - 1, a.dim))
        xi /= np.sqrt(alg.vec_abs2(xi))[:, None, None]
        chain = CarnotPoint(xi, np.zeros((N, a.im_dim)))
        img = invert(chain)
        dev = max(float(np.max(np.abs(img.xi - chain.xi))), float(np.max(np.abs(img.v), initial=0.0)))
        rep.record("hyperchain fixed", N, dev, 4 * np.finfo(float).eps, algebra=a.name)
        if a is not Algebra.R:
            v = rng.standard_normal((N, a.im_dim))
            v /= np.linalg.norm(v, axis=1, keepdims=True)
            if a is Algebra.C:
                v = np.sign(v)  # unit imaginary parts of C are +-i
            poles = CarnotPoint(np.zeros((N, cfg.n - 1, a.dim)), v)
            img = invert(poles)
            limit = 0.0 if a is Algebra.C else 4 * np.finfo(float).eps
            dev = max(float(np.max(np.abs(img.v + v))), float(np.max(np.abs(img.xi))))
            rep.record("poles swapped", N, dev, limit, algebra=a.name)


def _carpet_measure(cfg: Config, rep: SuiteReport):
    N = cfg.sample_count("measure")
    sig = cfg.tol("sigma")
    specs = [
        cfg.carpet(),
        CarpetSpec.geometric(2, 3, 5),
        CarpetSpec((2), (3, 9), 2),
        CarpetSpec.constant(2, 3, 4),
        CarpetSpec((3), (5, 7), 2),
    ]
    rows = []
    for i, spec in enumerate(specs):
        exact = measure_exact(spec)
        est, se = measure_mc(spec, N, cfg.seed + i)
        rep.record("Monte Carlo within band", 1, abs(est - exact), sig * se, k_seq=list(spec.levels), dim=spec.dim)
        d1 = project_delta1(spec)
        rep.record("gap set measure", 1, abs(d1.measure() - delta1_measure_exact(spec)), cfg.tol("delta1"),
                   k_seq=list(spec.levels))
        rows.append({"dim": spec.dim, "k_seq": list(spec.levels), "exact": exact, "mc": est, "stderr": se,
                     "delta1": d1.measure()})
    rep.details["carpets"] = rows
    slope, counts = box_count_dimension(CarpetSpec.constant(2, 3, 6), 729 * 2, [2, 6, 18, 54, 162])
    target = math.log(8) / math.log(3)
    rep.record("box-count dimension of the classical carpet", 1, abs(slope - target), cfg.tol("box_dim"))
    rep.details["box_dimension"] = {"estimate": slope, "target": target, "counts": counts}
    fat = [measure_exact(CarpetSpec.geometric(2, 3, D)) for D in range(1, 7)]
    rep.flag("fat carpet measure stays >= 0.8765", min(fat) >= 0.8765, values=fat)
    rep.flag("measure strictly decreasing in depth", all(b < a for a, b in zip(fat, fat[1:])))


def _stretch_exactness(cfg: Config, rep: SuiteReport):
    con = construct(cfg)
    rng = _rng(cfg.seed, "stretch")
    x = rng.uniform(-0.5, 0.5, size=10_000)
    one = con.stretch(1.0)
    rep.record("psi_1 is the identity", len(x), float(np.max(np.abs(one.psi(x) - x))), 0.0)
    ref = StretchMap.from_carpet(CarpetSpec((2), (3,), 1), 2.0)
    rep.record("t1 anchor k=(3), t=2", 1, abs(ref.t1() - 5.0 / 3.0), cfg.tol("t1"))
    per_cell = cfg.sample_count("per_cell")
    cells = con.cells
    a, n = cfg.algebra_enum, cfg.n
    rep.details["t1"] = {}
    for t in cfg.t_values:
        fmap = con.stretch(t)
        m = fmap.gap_measure
        rep.record("t1 formula", 1, abs(fmap.t1() - (m + t * (1.0 - m))), cfg.tol("t1"), t=t)
        rep.details["t1"][repr(t)] = fmap.t1()
        y = fmap.psi(x)
        rep.flag("psi strictly increasing", bool(np.all(np.diff(fmap.psi(np.sort(x))) >= 0)), t=t)
        rep.record("psi inverse", len(x), float(np.max(np.abs(fmap.psi_inverse(y) - x))), cfg.tol("psi_inverse"), t=t)
        s = fmap.slope(x)
        lo, hi = min(1.0, t), max(1.0, t)
        rep.record("slope band", len(x), float(max(np.max(lo - s), np.max(s - hi), 0.0)), 1e-6, t=t)
        worst = 0.0
        for i in range(len(cells)):
            c = fmap.cell_translation(cells.cell_id(i))
            lo_, hi_ = cells.interval(i)
            base = random_carnot(a, n, per_cell, rng, scale=0.25)
            xi = np.clip(np.array(base.xi), -0.5, 0.5)
            xi[:, 0, 0] = rng.uniform(float(lo_), float(hi_), size=per_cell)
            p = CarnotPoint(xi, base.v)
            lhs, rhs = fmap.apply(p), translate(carnot_shift(c, a, n), p)
            dev = max(float(np.max(np.abs(lhs.xi - rhs.xi))), float(np.max(np.abs(lhs.v - rhs.v), initial=0.0)))
            worst = max(worst, dev)
        rep.record("cell column map is one translation", len(cells) * per_cell, worst, 0.0, t=t)


def _packing(cfg: Config, rep: SuiteReport):
    con = construct(cfg)
    ok, margin = verify_disjoint(con.packing)
    rep.flag("pairwise disjoint", ok, margin=margin)
    rep.details["balls"] = len(con.packing)
    rep.details["min_margin"] = margin
    N = cfg.sample_count("coverage")
    c1 = coverage_mc(con.packing, con.cells, N, cfg.seed)
    c2 = coverage_mc(con.packing, con.cells, N, cfg.seed)
    rep.flag("coverage reproducible", c1 == c2)
    rep.details["coverage"] = {"estimate": c1[0], "stderr": c1[1]}
    rep.details["limit_set_proxy"] = limit_set_proxy(measure_exact(con.carpet), c1[0])
    # analytic anchor: one disc in the central ninth
    spec = CarpetSpec((2), (3,), 1)
    cells = removed_cells(spec)
    p0 = pack(spec, "R", 3, 0, cells)
    est, se = coverage_mc(p0, cells, N, cfg.seed)
    ratio = math.pi * (0.99 / 6.0) ** 2 * 9.0
    rep.record("d=0 area ratio", 1, abs(est - ratio), cfg.tol("sigma") * se, estimate=est, analytic=ratio)
    rng = _rng(cfg.seed, "packing")
    worst_on = 0.0
    for i in range(0, len(con.packing), max(1, len(con.packing) // 64)):
        ball = con.packing.ball(i)
        rep.flag("center inside", int(bisector_side(ball, ball.center)) == Side.INSIDE, ball=i)
        rim = _on_sphere(ball, 64, rng)
        worst_on = max(worst_on, float(np.max(np.abs(kc_dist(rim, ball.center) / ball.radius - 1.0))))
        box = con.cells.box(int(con.packing.cell[i]))
        inner = _in_ball(ball, 256, rng).to_chart()
        rep.flag("ball inside its cell", bool(np.all(box.contains(inner))), ball=i)
    rep.record("sphere samples on the bisector", 1, worst_on, 1e-10)
    # a sound inscribed ball never exceeds its box
    ib = inscribe_ball(con.cells.box(0), cfg.algebra_enum, cfg.n)
    rep.flag("inscribed ball radius positive", ib.radius > 0)


def _klein(cfg: Config, rep: SuiteReport):
    con = construct(cfg)
    samples = cfg.sample_count("klein")
    for t in (None,) + tuple(cfg.t_values):
        grp = con.group if t is None else con.deformation(t).group
        tag = "base" if t is None else f"t={t!r}"
        r = klein_check(grp, samples, cfg.seed)
        rep.cases += r.cases
        rep.failures += [{**f, "group": tag} for f in r.failures]
    r = free_relation_check(con.group, cfg.sample_count("words"), cfg.seed, tol=cfg.tol("involution"))
    rep.cases += r.cases
    rep.failures += r.failures
    rep.max_deviation = max(rep.max_deviation, r.max_deviation)
    rep.details["smallest_word_move"] = r.details["smallest_move"]
    r = orbit_disjointness_check(con.group, cfg.sample_count("orbit_pairs"), 200, cfg.seed)
    rep.cases += r.cases
    rep.failures += r.failures
    rep.details["generators"] = {"E": len(con.group.steps), "H": len(con.group.ball_radii)}


def _equivariance(cfg: Config, rep: SuiteReport):
    con = construct(cfg)
    for t in cfg.t_values:
        r = equivariance_check(con.group, con.deformation(t), cfg.sample_count("equivariance"), cfg.seed,
                               cfg.tol("equivariance"))
        rep.record("generator-wise equivariance", r.cases, r.max_deviation, cfg.tol("equivariance"), t=t)
        rep.failures += [{**f, "t": t} for f in r.failures[:8]]
        rep.details[f"t={t!r}"] = r.max_deviation


def _witness_pair(cfg: Config):
    con = construct(cfg)
    ts = sorted(set(cfg.t_values) | {1.0})
    other = max(ts, key=lambda t: abs(math.log(t)))
    return con, 1.0, (other if other != 1.0 else 2.0)


def _nontriviality(cfg: Config, rep: SuiteReport):
    con, t0, t1 = _witness_pair(cfg)
    w = nontriviality_witness(con.deformation(t0), con.deformation(t1))
    rep.flag("translation lengths separate", w.nontrivial, **w.to_record())
    ctrl = nontriviality_witness(con.deformation(t0), con.deformation(t0))
    rep.record("t = t' control", 1, ctrl.difference, ctrl.error, t=t0)
    swap = nontriviality_witness(con.deformation(t1), con.deformation(t1), pair=w.pair[::-1])
    rep.record("pair order", 1, abs(swap.ell_a - w.ell_b), 3.0 * (swap.err_a + w.err_b))
    rep.details["witness"] = w.to_record()


def default_excluded(con: Construction, t: float) -> list:
    """First ball whose cell column moves under the stretch, else ball 0."""
    fmap = con.stretch(t)
    for i in range(len(con.packing)):
        if fmap.cell_translation(con.cells.cell_id(int(con.packing.cell[i]))) != 0.0:
            return [i]
    return [0]


def _boundary(cfg: Config, rep: SuiteReport):
    base = construct(cfg)
    ts = [t for t in cfg.t_values if t != 1.0] or [2.0]
    excluded = list(cfg.excluded) or default_excluded(base, ts[0])
    con = construct(cfg.with_(excluded=excluded)) if not cfg.excluded else base
    rep.details["excluded"] = excluded
    rep.flag("generator count drops", len(con.group.ball_radii) == len(con.packing) - len(excluded))
    for t in cfg.t_values:
        r = boundary_triviality_check(con.group, con.deformation(t), con.packing, con.cells,
                                      cfg.sample_count("per_cell"), cfg.seed)
        rep.cases += r.cases
        rep.failures += [{**f, "t": t} for f in r.failures]
        rep.max_deviation = max(rep.max_deviation, r.max_deviation)
        rep.details[f"t={t!r}"] = r.details


_RUNNERS = {
    "carnot_isometry": _carnot_isometry,
    "inversion_involution": _inversion,
    "carpet_measure": _carpet_measure,
    "stretch_exactness": _stretch_exactness,
    "packing_disjoint": _packing,
    "klein": _klein,
    "equivariance": _equivariance,
    "nontriviality": _nontriviality,
    "boundary_trivial": _boundary,
}


def run_suite(name: str, config: Config, seed: int | None = None) -> SuiteReport:
    if name not in _RUNNERS:
        raise UnknownSuite(f"unknown suite {name!r}; expected one of {', '.join(SUITES)}")
    cfg = config if seed is None or seed == config.seed else config.with_(seed=seed)
    rep = SuiteReport(name, cfg.hash(), cfg.seed, cfg.depth, cfg.pack_depth)
    _RUNNERS[name](cfg, rep)
    return rep
