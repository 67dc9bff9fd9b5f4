"""Model files, query batches, slice rendering, statistics, method comparison and the command line."""

from __future__ import annotations

import argparse
import contextlib
import csv
import io
import math
import os
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .kernel import NurbsCurve, NurbsPatch, TrimmedPatch
from .model import Model
from .winding3d import EDGE_TAGS, FAR_TAGS, NEAR_TAGS, CacheSet, GwnConfig, model_gwn_batch

FORMAT_HEADER = "trimgwn-model"
FORMAT_VERSION = 1

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_UNRESOLVED = 2


class ParseError(ValueError):
    def __init__(self, message: str, line: int, column: int = 1):
        super().__init__(f"line {line}, column {column}: {message}")
        self.line = line
        self.column = column


class ModelError(ValueError):
    pass


# ---------------------------------------------------------------------------
# model file format


def _fmt(x: float) -> str:
    return repr(float(x))


def dumps_model(model: Model) -> str:
    """Serialize a model; floats use ``repr`` so parsing back is exact."""
    out = [f"{FORMAT_HEADER} {FORMAT_VERSION}", f"units {model.units}", f"patches {len(model.patches)}"]
    for patch in model.patches:
        s = patch.surface
        nu, nv = s.control.shape[:2]
        out.append(f"patch {patch.id}")
        out.append("orientation +1")
        out.append(f"degrees {s.degrees[0]} {s.degrees[1]}")
        out.append("knots_u " + " ".join(_fmt(k) for k in s.knots_u))
        out.append("knots_v " + " ".join(_fmt(k) for k in s.knots_v))
        out.append(f"grid {nu} {nv}")
        for i in range(nu):
            for j in range(nv):
                x, y, z = s.control[i, j]
                out.append(f"cp {_fmt(x)} {_fmt(y)} {_fmt(z)} {_fmt(s.weights[i, j])}")
        out.append(f"curves {len(patch.loops)}")
        for c in patch.loops:
            out.append(f"curve {c.degree} {len(c.control)}")
            out.append("knots " + " ".join(_fmt(k) for k in c.knots))
            for (u, v), w in zip(c.control, c.weights):
                out.append(f"cp {_fmt(u)} {_fmt(v)} {_fmt(w)}")
        out.append("end")
    return "\n".join(out) + "\n"


def write_model(model: Model, path) -> None:
    Path(path).write_text(dumps_model(model), encoding="utf-8")


@dataclass
class RawCurve:
    degree: int
    knots: list[float]
    control: list[tuple[float, float]]
    weights: list[float]
    line: int


@dataclass
class RawPatch:
    id: str
    line: int
    orientation: int = 1
    degrees: tuple[int, int] = (0, 0)
    knots_u: list[float] = field(default_factory=list)
    knots_v: list[float] = field(default_factory=list)
    grid: tuple[int, int] = (0, 0)
    control: list[tuple[float, float, float, float]] = field(default_factory=list)
    curves: list[RawCurve] = field(default_factory=list)


@dataclass
class RawModel:
    units: str
    patches: list[RawPatch]


class _Lines:
    def __init__(self, text: str):
        self.rows = []
        for n, line in enumerate(text.splitlines(), start=1):
            body = line.split("#", 1)[0]
            if body.strip():
                self.rows.append((n, body))
        self.pos = 0
        self.last = self.rows[-1][0] if self.rows else 1

    def next(self, keyword: str | None = None) -> tuple[int, list[str], str]:
        if self.pos >= len(self.rows):
            raise ParseError(f"unexpected end of file, expected {keyword or 'more input'}", self.last + 1)
        n, body = self.rows[self.pos]
        self.pos += 1
        tokens = body.split()
        if keyword is not None and tokens[0] != keyword:
            col = body.index(tokens[0]) + 1
            raise ParseError(f"expected '{keyword}', found '{tokens[0]}'", n, col)
        return n, tokens, body

    def done(self) -> bool:
        return self.pos >= len(self.rows)


def _column(body: str, tokens: list[str], k: int) -> int:
    col = 0
    for i, tok in enumerate(tokens):
        col = body.index(tok, col)
        if i == k:
            return col + 1
        col += len(tok)
    return len(body) + 1


def _numbers(n: int, body: str, tokens: list[str], start: int, conv=float, count: int | None = None) -> list:
    vals = []
    for k in range(start, len(tokens)):
        try:
            v = conv(tokens[k])
        except ValueError:
            raise ParseError(f"bad number '{tokens[k]}'", n, _column(body, tokens, k)) from None
        if conv is float and not math.isfinite(v):
            raise ParseError(f"non-finite number '{tokens[k]}'", n, _column(body, tokens, k))
        vals.append(v)
    if count is not None and len(vals) != count:
        raise ParseError(f"expected {count} values, found {len(vals)}", n, _column(body, tokens, start + min(len(vals), count)))
    return vals


def parse_raw(text: str) -> RawModel:
    """Syntax-level parse; geometric invariants are left to :func:`validate_raw`."""
    lines = _Lines(text)
    n, tokens, body = lines.next(FORMAT_HEADER)
    (version,) = _numbers(n, body, tokens, 1, int, 1)
    if version != FORMAT_VERSION:
        raise ParseError(f"unsupported format version {version}", n, _column(body, tokens, 1))
    n, tokens, body = lines.next("units")
    units = " ".join(tokens[1:]) or "unitless"
    n, tokens, body = lines.next("patches")
    (count,) = _numbers(n, body, tokens, 1, int, 1)
    patches = []
    for _ in range(count):
        n, tokens, body = lines.next("patch")
        if len(tokens) != 2:
            raise ParseError("patch needs exactly one id", n, _column(body, tokens, min(len(tokens), 2)))
        raw = RawPatch(tokens[1], n)
        n, tokens, body = lines.next("orientation")
        if len(tokens) != 2 or tokens[1] not in ("+1", "1", "-1"):
            raise ParseError("orientation must be +1 or -1", n, _column(body, tokens, 1))
        raw.orientation = -1 if tokens[1] == "-1" else 1
        n, tokens, body = lines.next("degrees")
        raw.degrees = tuple(_numbers(n, body, tokens, 1, int, 2))
        n, tokens, body = lines.next("knots_u")
        raw.knots_u = _numbers(n, body, tokens, 1)
        n, tokens, body = lines.next("knots_v")
        raw.knots_v = _numbers(n, body, tokens, 1)
        n, tokens, body = lines.next("grid")
        raw.grid = tuple(_numbers(n, body, tokens, 1, int, 2))
        if min(raw.grid) < 1:
            raise ParseError("grid sizes must be positive", n, _column(body, tokens, 1))
        for _ in range(raw.grid[0] * raw.grid[1]):
            n, tokens, body = lines.next("cp")
            raw.control.append(tuple(_numbers(n, body, tokens, 1, float, 4)))
        n, tokens, body = lines.next("curves")
        (ncurves,) = _numbers(n, body, tokens, 1, int, 1)
        for _ in range(ncurves):
            n, tokens, body = lines.next("curve")
            degree, npts = _numbers(n, body, tokens, 1, int, 2)
            if npts < 1:
                raise ParseError("curve needs control points", n, _column(body, tokens, 2))
            n2, t2, b2 = lines.next("knots")
            knots = _numbers(n2, b2, t2, 1)
            ctrl, wts = [], []
            for _ in range(npts):
                n3, t3, b3 = lines.next("cp")
                u, v, w = _numbers(n3, b3, t3, 1, float, 3)
                ctrl.append((u, v))
                wts.append(w)
            raw.curves.append(RawCurve(degree, knots, ctrl, wts, n))
        lines.next("end")
        patches.append(raw)
    if not lines.done():
        n, tokens, body = lines.next()
        raise ParseError(f"unexpected '{tokens[0]}' after the last patch", n, _column(body, tokens, 0))
    return RawModel(units, patches)


@dataclass
class Violation:
    level: str  # "error" or "warning"
    patch: str
    line: int
    message: str

    def __str__(self) -> str:
        return f"{self.level}: patch {self.patch} (line {self.line}): {self.message}"


@dataclass
class ValidationReport:
    violations: list[Violation]

    @property
    def errors(self) -> list[Violation]:
        return [v for v in self.violations if v.level == "error"]

    @property
    def warnings(self) -> list[Violation]:
        return [v for v in self.violations if v.level == "warning"]

    @property
    def ok(self) -> bool:
        return not self.errors


def _knot_problems(degree: int, knots: list[float], count: int) -> list[str]:
    out = []
    if degree < 1:
        out.append(f"degree {degree} must be at least 1")
        return out
    if len(knots) != count + degree + 1:
        out.append(f"needs {count + degree + 1} knots, has {len(knots)}")
        return out
    if any(b < a for a, b in zip(knots, knots[1:])):
        out.append("knot vector is not non-decreasing")
    elif knots[0] == knots[-1]:
        out.append("knot vector has an empty domain")
    elif len(set(knots[: degree + 1])) != 1 or len(set(knots[-degree - 1 :])) != 1:
        out.append("knot vector is not clamped")
    return out


def validate_raw(raw: RawModel) -> ValidationReport:
    vs: list[Violation] = []
    ids = set()
    for p in raw.patches:
        err = lambda msg, line=p.line: vs.append(Violation("error", p.id, line, msg))  # noqa: E731
        warn = lambda msg, line=p.line: vs.append(Violation("warning", p.id, line, msg))  # noqa: E731
        if p.id in ids:
            err("duplicate patch id")
        ids.add(p.id)
        for name, deg, knots, cnt in (("u", p.degrees[0], p.knots_u, p.grid[0]), ("v", p.degrees[1], p.knots_v, p.grid[1])):
            for msg in _knot_problems(deg, knots, cnt):
                err(f"{name} direction: {msg}")
        if any(c[3] <= 0 for c in p.control):
            err("non-positive control-point weight")
        domain_ok = not (_knot_problems(p.degrees[0], p.knots_u, p.grid[0]) or _knot_problems(p.degrees[1], p.knots_v, p.grid[1]))
        if domain_ok:
            u0, u1, v0, v1 = p.knots_u[0], p.knots_u[-1], p.knots_v[0], p.knots_v[-1]
            slack = 1e-9 * max(u1 - u0, v1 - v0)
        ends = []
        for k, c in enumerate(p.curves):
            for msg in _knot_problems(c.degree, c.knots, len(c.control)):
                err(f"curve {k}: {msg}", c.line)
            if any(w <= 0 for w in c.weights):
                err(f"curve {k}: non-positive weight", c.line)
            if domain_ok and any(not (u0 - slack <= u <= u1 + slack and v0 - slack <= v <= v1 + slack) for u, v in c.control):
                err(f"curve {k}: control point outside the parameter domain", c.line)
            ends.append((c.control[0], c.control[-1]))
        # open loops: endpoints that do not meet another curve's endpoint
        tol = 1e-9 * (max(u1 - u0, v1 - v0) if domain_ok else 1.0)
        starts = [e[0] for e in ends]
        stops = [e[1] for e in ends]
        unmatched = sum(1 for s in stops if not any(math.dist(s, t) <= tol for t in starts))
        if unmatched:
            warn(f"{unmatched} trimming-curve end(s) not joined to a following curve (open loop)")
        if not p.curves:
            warn("patch has no trimming curves and is invisible")
    return ValidationReport(vs)


def _build_patch(p: RawPatch) -> TrimmedPatch:
    nu, nv = p.grid
    arr = np.array(p.control, dtype=float).reshape(nu, nv, 4)
    surf = NurbsPatch(p.degrees, p.knots_u, p.knots_v, arr[..., :3], arr[..., 3], id=p.id)
    curves = [NurbsCurve(c.degree, c.knots, np.array(c.control, dtype=float), np.array(c.weights, dtype=float)) for c in p.curves]
    if p.orientation < 0:
        # swap u and v (flips the normal); swapping curve coordinates mirrors the
        # loops, so reverse them to keep the visible region on their left
        surf = surf.swapped()
        curves = [NurbsCurve(c.degree, c.knots, c.control[:, ::-1].copy(), c.weights).reversed() for c in curves]
    return TrimmedPatch(surf, tuple(curves), id=p.id)


def loads_model(text: str, validate: bool = True) -> Model:
    raw = parse_raw(text)
    if validate:
        report = validate_raw(raw)
        if not report.ok:
            raise ModelError("; ".join(str(v) for v in report.errors))
    try:
        return Model([_build_patch(p) for p in raw.patches], raw.units)
    except ValueError as exc:
        raise ModelError(str(exc)) from exc


def load_model(path, validate: bool = True) -> Model:
    return loads_model(Path(path).read_text(encoding="utf-8"), validate)


def validate_text(text: str) -> ValidationReport:
    return validate_raw(parse_raw(text))


def models_equal(a: Model, b: Model, tol: float = 1e-15) -> bool:
    if a.units != b.units or len(a.patches) != len(b.patches):
        return False
    close = lambda x, y: np.shape(x) == np.shape(y) and np.allclose(x, y, rtol=tol, atol=tol)  # noqa: E731
    for p, q in zip(a.patches, b.patches):
        s, t = p.surface, q.surface
        if p.id != q.id or s.degrees != t.degrees or len(p.loops) != len(q.loops):
            return False
        if not (close(s.knots_u, t.knots_u) and close(s.knots_v, t.knots_v) and close(s.control, t.control) and close(s.weights, t.weights)):
            return False
        for c, d in zip(p.loops, q.loops):
            if c.degree != d.degree or not (close(c.knots, d.knots) and close(c.control, d.control) and close(c.weights, d.weights)):
                return False
    return True


# ---------------------------------------------------------------------------
# queries and records


def parse_queries(text: str) -> np.ndarray:
    """Three reals per row, separated by commas and/or whitespace; '#' starts a comment."""
    rows = []
    for n, line in enumerate(text.splitlines(), start=1):
        body = line.split("#", 1)[0].replace(",", " ").split()
        if not body:
            continue
        if len(body) != 3:
            raise ParseError(f"expected 3 coordinates, found {len(body)}", n)
        try:
            rows.append([float(x) for x in body])
        except ValueError as exc:
            raise ParseError(str(exc), n) from None
    return np.array(rows, dtype=float).reshape(-1, 3)


def load_queries(path) -> np.ndarray:
    return parse_queries(Path(path).read_text(encoding="utf-8"))


RULES = ("nonzero", "evenodd")


def decide(value: float, rule: str) -> bool:
    k = int(round(value))
    if rule == "nonzero":
        return k != 0
    if rule == "evenodd":
        return k % 2 == 1
    raise ValueError(f"unknown rule {rule!r}")


_SEVERITY = {tag: 0 for tag in FAR_TAGS} | {tag: 1 for tag in NEAR_TAGS} | {tag: 2 for tag in EDGE_TAGS}


def case_class(tag: str) -> str:
    return ("far", "near", "edge")[_SEVERITY[tag]]


@dataclass
class OutputRecord:
    point: tuple[float, float, float]
    value: float
    rounded: int
    inside: bool
    case: str
    surface_evals: int
    coincident: bool
    unresolved: bool
    patch_values: list[float] = field(default_factory=list)
    patch_tags: list[str] = field(default_factory=list)
    patch_times: list[float] = field(default_factory=list)


def run_queries(model: Model, queries, cfg: GwnConfig = GwnConfig(), rule: str = "nonzero", workers: int = 1, chunk: int = 64) -> list[OutputRecord]:
    """Evaluate a batch in fixed-size chunks on a thread pool; output order is input order.

    Each query's value is computed independently of its chunk, so results do
    not depend on the worker count. Every chunk gets its own quadrature caches
    so the evaluation counters do not depend on scheduling either.
    """
    if rule not in RULES:
        raise ValueError(f"unknown rule {rule!r}")
    queries = np.atleast_2d(np.asarray(queries, dtype=float)).reshape(-1, 3)
    chunks = [queries[i : i + chunk] for i in range(0, len(queries), chunk)]

    def work(block):
        return model_gwn_batch(model, block, cfg, CacheSet())

    if workers <= 1 or len(chunks) <= 1:
        parts = [work(c) for c in chunks]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(work, chunks))
    records = []
    for block, (total, per_patch) in zip(chunks, parts):
        for i, q in enumerate(block):
            res = [pp[i] for pp in per_patch]
            value = float(total[i])
            worst = max(res, key=lambda r: _SEVERITY[r.tag]).tag if res else "FarFieldZ"
            records.append(
                OutputRecord(
                    tuple(float(x) for x in q),
                    value,
                    int(round(value)),
                    decide(value, rule),
                    worst,
                    sum(r.surface_evals for r in res),
                    any(r.coincident for r in res),
                    any(r.unresolved for r in res),
                    [r.value for r in res],
                    [r.tag for r in res],
                    [r.elapsed for r in res],
                )
            )
    return records


RECORD_FIELDS = ["x", "y", "z", "gwn", "rounded", "inside", "case", "surface_evals", "coincident", "unresolved"]


def format_records(records: list[OutputRecord], breakdown: bool = False) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(RECORD_FIELDS + (["patch_values", "patch_cases"] if breakdown else []))
    for r in records:
        row = [*(repr(c) for c in r.point), repr(r.value), r.rounded, int(r.inside), r.case, r.surface_evals, int(r.coincident), int(r.unresolved)]
        if breakdown:
            row += [";".join(repr(v) for v in r.patch_values), ";".join(r.patch_tags)]
        w.writerow(row)
    return buf.getvalue()


# ---------------------------------------------------------------------------
# slices


@dataclass
class SliceSpec:
    origin: np.ndarray
    axis_x: np.ndarray
    axis_y: np.ndarray
    extent: tuple[float, float]
    resolution: tuple[int, int]  # (nx, ny)

    def __post_init__(self):
        self.origin = np.asarray(self.origin, dtype=float)
        self.axis_x = np.asarray(self.axis_x, dtype=float)
        self.axis_y = np.asarray(self.axis_y, dtype=float)
        self.axis_x = self.axis_x / np.linalg.norm(self.axis_x)
        self.axis_y = self.axis_y / np.linalg.norm(self.axis_y)
        nx, ny = self.resolution
        if nx < 1 or ny < 1:
            raise ValueError("slice resolution must be at least 1")
        if np.linalg.norm(np.cross(self.axis_x, self.axis_y)) < 1e-12:
            raise ValueError("slice axes must be linearly independent")

    def points(self) -> np.ndarray:
        """Pixel centers, row-major (ny rows of nx); ``origin`` is the slice center."""
        nx, ny = self.resolution
        ex, ey = self.extent
        sx = (np.arange(nx) + 0.5) / nx - 0.5
        sy = (np.arange(ny) + 0.5) / ny - 0.5
        gy, gx = np.meshgrid(sy, sx, indexing="ij")
        return self.origin + (gx * ex)[..., None] * self.axis_x + (gy * ey)[..., None] * self.axis_y


def render_slice(model: Model, spec: SliceSpec, cfg: GwnConfig = GwnConfig(), workers: int = 1) -> tuple[np.ndarray, list[OutputRecord]]:
    pts = spec.points().reshape(-1, 3)
    records = run_queries(model, pts, cfg, workers=workers)
    nx, ny = spec.resolution
    return np.array([r.value for r in records]).reshape(ny, nx), records


def write_pgm(path, values: np.ndarray, vmin: float = 0.0, vmax: float = 1.0) -> None:
    """16-bit binary graymap, big-endian samples, value range mapped linearly to 0..65535."""
    values = np.atleast_2d(np.asarray(values, dtype=float))
    ny, nx = values.shape
    scaled = np.clip((values - vmin) / (vmax - vmin), 0.0, 1.0) if vmax > vmin else np.zeros_like(values)
    data = np.round(scaled * 65535).astype(">u2")
    with open(path, "wb") as fh:
        fh.write(f"P5\n{nx} {ny}\n65535\n".encode("ascii"))
        fh.write(data.tobytes())


def read_pgm(path) -> np.ndarray:
    raw = Path(path).read_bytes()
    parts = raw.split(maxsplit=4)
    if parts[0] != b"P5":
        raise ValueError("not a binary graymap")
    nx, ny, maxval = int(parts[1]), int(parts[2]), int(parts[3])
    dtype = ">u2" if maxval > 255 else "u1"
    return np.frombuffer(parts[4], dtype=dtype, count=nx * ny).reshape(ny, nx)


# ---------------------------------------------------------------------------
# statistics


STATS_ROWS = [
    "% Far-field Cases",
    "% Near-field Cases",
    "% Edge Cases",
    "Avg. Time per Query (ms)",
    "Avg. Far-field Case Time (ms)",
    "Avg. Near-field Case Time (ms)",
    "Avg. Edge Case Time (ms)",
]


def stats_report(records: list[OutputRecord]) -> list[tuple[str, float, int, float]]:
    """Rows ``(label, value, count, per_query_ms)`` over patch-level evaluations.

    Percent rows count patch-level evaluations per case; case-time rows give
    the mean per patch-level evaluation (``value``) and the total spent in
    that case divided by the number of queries (``per_query_ms``). Timings
    depend on the machine.
    """
    counts = {"far": 0, "near": 0, "edge": 0}
    times = {"far": 0.0, "near": 0.0, "edge": 0.0}
    total_time = 0.0
    for r in records:
        for tag, t in zip(r.patch_tags, r.patch_times):
            k = case_class(tag)
            counts[k] += 1
            times[k] += t
            total_time += t
    n = sum(counts.values())
    m = len(records)
    pct = lambda k: 100.0 * counts[k] / n if n else 0.0  # noqa: E731
    mean = lambda k: 1e3 * times[k] / counts[k] if counts[k] else 0.0  # noqa: E731
    perq = lambda k: 1e3 * times[k] / m if m else 0.0  # noqa: E731
    return [
        (STATS_ROWS[0], pct("far"), counts["far"], float("nan")),
        (STATS_ROWS[1], pct("near"), counts["near"], float("nan")),
        (STATS_ROWS[2], pct("edge"), counts["edge"], float("nan")),
        (STATS_ROWS[3], 1e3 * total_time / m if m else 0.0, m, 1e3 * total_time / m if m else 0.0),
        (STATS_ROWS[4], mean("far"), counts["far"], perq("far")),
        (STATS_ROWS[5], mean("near"), counts["near"], perq("near")),
        (STATS_ROWS[6], mean("edge"), counts["edge"], perq("edge")),
    ]


def format_stats(rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["row", "value", "count", "per_query_ms"])
    for label, value, count, perq in rows:
        w.writerow([label, f"{value:.6g}", count, "" if math.isnan(perq) else f"{perq:.6g}"])
    return buf.getvalue()


# ---------------------------------------------------------------------------
# method comparison


@dataclass
class MethodResult:
    name: str
    values: np.ndarray
    evals: np.ndarray
    misclassified: int = 0
    seconds: float = 0.0


def parse_method(spec: str) -> tuple[str, int | None]:
    name, _, arg = spec.partition(":")
    if name == "gwn" and not arg:
        return name, None
    if name in ("mesh", "cloud", "surfquad") and arg:
        try:
            n = int(arg)
        except ValueError:
            raise ValueError(f"method {spec!r} needs an integer argument") from None
        if n < 1:
            raise ValueError(f"method {spec!r} needs a positive argument")
        return name, n
    raise ValueError(f"unknown method {spec!r} (use gwn, mesh:N, cloud:N, surfquad:ORDER)")


def _method_values(model: Model, queries: np.ndarray, spec: str, cfg: GwnConfig, workers: int, seed: int):
    from . import baselines

    name, arg = parse_method(spec)
    if name == "gwn":
        recs = run_queries(model, queries, cfg, workers=workers)
        return np.array([r.value for r in recs]), np.array([r.surface_evals for r in recs])
    if name == "mesh":
        soup = baselines.tessellate_model(model, max(arg, 2))
        vals = baselines.triangles_gwn(soup.triangles, queries) if len(soup) else np.zeros(len(queries))
        return vals, np.full(len(queries), len(soup))
    if name == "cloud":
        cloud = baselines.sample_cloud(model.patches, arg, np.random.default_rng(seed))
        vals = np.array([baselines.cloud_gwn(cloud, q) for q in queries])
        return vals, np.full(len(queries), len(cloud.points))
    vals, evals = [], []
    for q in queries:
        tot, cnt = 0.0, 0
        for p in model.patches:
            v, c = baselines.surface_quadrature_gwn(p, q, order=arg)
            tot += v
            cnt += c
        vals.append(tot)
        evals.append(cnt)
    return np.array(vals), np.array(evals)


def compare_methods(model: Model, queries, methods: list[str], reference=None, cfg: GwnConfig = GwnConfig(), workers: int = 1, seed: int = 0) -> list[MethodResult]:
    """Values, evaluation counts and misclassifications (0.5 threshold) per method.

    ``reference`` is a method name from ``methods``, a callable oracle mapping
    points to inside flags, or ``None`` (first method).
    """
    queries = np.atleast_2d(np.asarray(queries, dtype=float))
    for m in methods:
        parse_method(m)
    results = []
    for m in methods:
        t0 = time.perf_counter()
        vals, evals = _method_values(model, queries, m, cfg, workers, seed)
        results.append(MethodResult(m, vals, evals, seconds=time.perf_counter() - t0))
    if callable(reference):
        truth = np.asarray(reference(queries), dtype=bool)
    else:
        ref = reference if reference is not None else methods[0]
        if ref not in methods:
            raise ValueError(f"reference {ref!r} is not among the methods")
        truth = results[methods.index(ref)].values > 0.5
    for r in results:
        r.misclassified = int(np.count_nonzero((r.values > 0.5) != truth))
    return results


def format_comparison(results: list[MethodResult]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["method", "misclassified", "mean_evals", "seconds"])
    for r in results:
        w.writerow([r.name, r.misclassified, f"{float(np.mean(r.evals)) if len(r.evals) else 0.0:.6g}", f"{r.seconds:.4g}"])
    return buf.getvalue()


# ---------------------------------------------------------------------------
# command line


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _config_args(p: argparse.ArgumentParser) -> None:
    d = GwnConfig()
    p.add_argument("--eps-quad", type=float, default=d.eps_quad, help="quadrature tolerance (default %(default)g)")
    p.add_argument("--eps-ls", type=float, default=d.eps_ls, help="line-search flatness tolerance (default %(default)g)")
    p.add_argument("--disk-radius-pct", type=float, default=d.disk_radius_pct, help="edge-case disk radius, percent of the trim box diagonal")
    p.add_argument("--order", type=int, default=d.quad_order, help="Gauss-Legendre nodes per segment")
    p.add_argument("--seed", type=int, default=d.seed, help="seed for random line directions")
    p.add_argument("--threads", type=int, default=None, help="worker threads (default $TRIMGWN_THREADS or 1)")


def _config(ns) -> GwnConfig:
    return GwnConfig(eps_quad=ns.eps_quad, eps_ls=ns.eps_ls, disk_radius_pct=ns.disk_radius_pct, quad_order=ns.order, seed=ns.seed)


def _threads(ns) -> int:
    if ns.threads is not None:
        return max(1, ns.threads)
    env = os.environ.get("TRIMGWN_THREADS")
    try:
        return max(1, int(env)) if env else 1
    except ValueError:
        return 1


def _open_out(path):
    if path in (None, "-"):
        return contextlib.nullcontext(sys.stdout)
    return open(path, "w", encoding="utf-8", newline="")


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="trimgwn", description="Winding numbers of trimmed NURBS models.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    v = sub.add_parser("validate", help="check a model file")
    v.add_argument("model")

    q = sub.add_parser("query", help="evaluate query points")
    q.add_argument("model")
    q.add_argument("queries", help="text file, three reals per row ('-' for stdin)")
    q.add_argument("-o", "--output", default="-")
    q.add_argument("--rule", choices=RULES, default="nonzero")
    q.add_argument("--breakdown", action="store_true", help="add per-patch values and cases")
    _config_args(q)

    s = sub.add_parser("slice", help="render a planar slice")
    s.add_argument("model")
    s.add_argument("--origin", type=float, nargs=3, default=[0.0, 0.0, 0.0], help="slice center")
    s.add_argument("--axis-x", type=float, nargs=3, default=[1.0, 0.0, 0.0])
    s.add_argument("--axis-y", type=float, nargs=3, default=[0.0, 1.0, 0.0])
    s.add_argument("--extent", type=float, nargs=2, default=None, help="width and height (default: model box diagonal)")
    s.add_argument("--resolution", type=int, nargs=2, default=[64, 64], metavar=("NX", "NY"))
    s.add_argument("--range", type=float, nargs=2, default=[0.0, 1.0], metavar=("LO", "HI"), help="values mapped to black and white")
    s.add_argument("--pgm", required=True, help="output graymap")
    s.add_argument("--values", default=None, help="output value table")
    _config_args(s)

    st = sub.add_parser("stats", help="case statistics for a query batch")
    st.add_argument("model")
    st.add_argument("queries")
    st.add_argument("-o", "--output", default="-")
    _config_args(st)

    c = sub.add_parser("compare", help="compare methods on a query batch")
    c.add_argument("model")
    c.add_argument("queries")
    c.add_argument("--methods", default="gwn,mesh:16", help="comma list of gwn, mesh:N, cloud:N, surfquad:ORDER")
    c.add_argument("--reference", default=None, help="method used as ground truth (default: first)")
    c.add_argument("-o", "--output", default="-")
    _config_args(c)

    mk = sub.add_parser("make-shape", help="write a built-in test model")
    mk.add_argument("shape", choices=["sphere", "torus", "box", "cap-and-disk"])
    mk.add_argument("output")
    return p


def _read_queries_arg(path: str) -> np.ndarray:
    if path == "-":
        return parse_queries(sys.stdin.read())
    return load_queries(path)


def main(argv=None) -> int:
    ns = build_parser().parse_args(argv)
    try:
        return _dispatch(ns)
    except (ParseError, ModelError, ValueError, OSError) as exc:
        print(f"trimgwn: {exc}", file=sys.stderr)
        return EXIT_USAGE


def _dispatch(ns) -> int:
    if ns.command == "validate":
        report = validate_text(Path(ns.model).read_text(encoding="utf-8"))
        for v in report.violations:
            print(v)
        print(f"{len(report.errors)} error(s), {len(report.warnings)} warning(s)")
        return EXIT_OK if report.ok else EXIT_USAGE
    if ns.command == "make-shape":
        from . import shapes

        if ns.shape == "sphere":
            model = shapes.sphere_model()
        elif ns.shape == "torus":
            model = shapes.torus_model()
        elif ns.shape == "box":
            model = shapes.box_model()
        else:
            model = Model([shapes.unit_disk(), shapes.spherical_cap()])
        write_model(model, ns.output)
        return EXIT_OK

    model = load_model(ns.model)
    cfg = _config(ns)
    workers = _threads(ns)
    if ns.command == "query":
        recs = run_queries(model, _read_queries_arg(ns.queries), cfg, ns.rule, workers)
        with _open_out(ns.output) as fh:
            fh.write(format_records(recs, ns.breakdown))
        return EXIT_UNRESOLVED if any(r.unresolved for r in recs) else EXIT_OK
    if ns.command == "slice":
        extent = ns.extent or [model.aabb().diagonal] * 2
        spec = SliceSpec(ns.origin, ns.axis_x, ns.axis_y, tuple(extent), tuple(ns.resolution))
        values, recs = render_slice(model, spec, cfg, workers)
        write_pgm(ns.pgm, values, *ns.range)
        if ns.values:
            with _open_out(ns.values) as fh:
                fh.write(format_records(recs))
        return EXIT_UNRESOLVED if any(r.unresolved for r in recs) else EXIT_OK
    if ns.command == "stats":
        recs = run_queries(model, _read_queries_arg(ns.queries), cfg, workers=workers)
        with _open_out(ns.output) as fh:
            fh.write(format_stats(stats_report(recs)))
        return EXIT_UNRESOLVED if any(r.unresolved for r in recs) else EXIT_OK
    if ns.command == "compare":
        methods = [m.strip() for m in ns.methods.split(",") if m.strip()]
        results = compare_methods(model, _read_queries_arg(ns.queries), methods, ns.reference, cfg, workers, ns.seed)
        with _open_out(ns.output) as fh:
            fh.write(format_comparison(results))
        return EXIT_OK
    return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
