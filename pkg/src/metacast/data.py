"""Synthetic benchmark datasets, selection-accuracy metrics, and file IO.

Generators are seeded and draw in a fixed order, so identical parameters
produce byte-identical clouds. Every generator samples a unit-scale shape
and multiplies by the `scale` knob last, which makes scaling the geometry
equivalent to scaling the output positions exactly.
"""

from __future__ import annotations

import json
import math
import struct
from dataclasses import dataclass, field as dataclass_field
from pathlib import Path

import numpy as np

from .errors import InvalidInputError, ParseError
from .field import DensityGrid, GridSpec, ParticleCloud
from .techniques import Stroke

DATASET_KINDS = ("disk", "rings", "shell", "strings", "filament")

_GEOMETRY_DEFAULTS: dict[str, dict[str, float]] = {
    # Radially decaying blob; the dense core is the target.
    "disk": {"scale": 1.0, "core_fraction": 0.3, "flatten": 0.4,
             "core_exponent": 0.8, "halo_exponent": 0.45},
    # Two perpendicular half rings with a gap; the central arc portions are
    # the target.
    "rings": {"scale": 1.0, "tube_fraction": 0.1, "gap_angle": 0.25,
              "target_arc": 0.5},
    # Hemispherical shell (target) over a half-ball of interferers.
    "shell": {"scale": 1.0, "ball_fraction": 0.52, "inner_fraction": 0.68,
              "outer_fraction": 0.8},
    # Outer helix (target) wrapping a straight central string, both with
    # varying density along their length.
    "strings": {"scale": 1.0, "helix_fraction": 0.3, "tube_fraction": 0.045,
                "turns": 3.0, "wobble": 0.25},
    # Single curved filament (target) in a uniform noise box.
    "filament": {"scale": 1.0, "tube_fraction": 0.035, "amplitude": 0.18,
                 "noise_margin": 0.15},
}


@dataclass
class DatasetParams:
    kind: str
    target_count: int = 20_000
    noise_count: int = 20_000
    rng_seed: int = 0
    geometry: dict = dataclass_field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in DATASET_KINDS:
            raise InvalidInputError(
                f"unknown dataset kind {self.kind!r}; expected one of {DATASET_KINDS}")
        if self.target_count < 0 or self.noise_count < 0:
            raise InvalidInputError("particle counts must be non-negative")
        merged = dict(_GEOMETRY_DEFAULTS[self.kind])
        unknown = set(self.geometry) - set(merged)
        if unknown:
            raise InvalidInputError(
                f"unknown geometry knobs for {self.kind}: {sorted(unknown)}")
        merged.update(self.geometry)
        self.geometry = merged


def _unit_sphere_dirs(rng, n, upper=False):
    z = rng.uniform(0.0 if upper else -1.0, 1.0, n)
    phi = rng.uniform(0.0, 2.0 * np.pi, n)
    r = np.sqrt(np.maximum(0.0, 1.0 - z * z))
    return np.column_stack([r * np.cos(phi), r * np.sin(phi), z])


def _gen_disk(rng, params):
    g = params.geometry
    nt, nn = params.target_count, params.noise_count
    core = g["core_fraction"]
    # Radius CDF exponents give a density that falls from the center out.
    rt = core * rng.random(nt) ** (1.0 / (3.0 * g["core_exponent"]))
    targets = _unit_sphere_dirs(rng, nt) * rt[:, None]
    rn = core + (1.0 - core) * rng.random(nn) ** (1.0 / (3.0 * g["halo_exponent"]))
    noise = _unit_sphere_dirs(rng, nn) * rn[:, None]
    pos = np.vstack([targets, noise])
    pos[:, 2] *= g["flatten"]
    return pos


def _gen_rings(rng, params):
    g = params.geometry
    tube = g["tube_fraction"]
    gap = g["gap_angle"]
    target_arc = g["target_arc"]

    def ring(n, theta0, theta1, plane):
        theta = rng.uniform(theta0, theta1, n)
        rr = tube * np.sqrt(rng.random(n))
        ang = rng.uniform(0.0, 2.0 * np.pi, n)
        circ = np.column_stack([np.cos(theta), np.sin(theta), np.zeros(n)])
        # tube frame: radial direction and the plane normal
        radial = circ.copy()
        normal = np.tile([0.0, 0.0, 1.0], (n, 1))
        pts = circ + rr[:, None] * (np.cos(ang)[:, None] * radial
                                    + np.sin(ang)[:, None] * normal)
        if plane == "xz":
            pts = pts[:, [0, 2, 1]]
        return pts

    half = np.pi - 2.0 * gap
    inner0, inner1 = gap + half * (0.5 - target_arc / 2.0), gap + half * (0.5 + target_arc / 2.0)
    nt_a = params.target_count // 2
    nt_b = params.target_count - nt_a
    nn_a = params.noise_count // 2
    nn_b = params.noise_count - nn_a
    t_a = ring(nt_a, inner0, inner1, "xy")
    n_parts_a = ring(nn_a // 2, gap, inner0, "xy")
    n_parts_a2 = ring(nn_a - nn_a // 2, inner1, np.pi - gap, "xy")
    t_b = ring(nt_b, np.pi + inner0, np.pi + inner1, "xz")
    n_parts_b = ring(nn_b // 2, np.pi + gap, np.pi + inner0, "xz")
    n_parts_b2 = ring(nn_b - nn_b // 2, np.pi + inner1, 2.0 * np.pi - gap, "xz")
    pos = np.vstack([t_a, t_b, n_parts_a, n_parts_a2, n_parts_b, n_parts_b2])
    labels = np.zeros(len(pos), dtype=bool)
    labels[:params.target_count] = True
    return pos, labels


def _gen_shell(rng, params):
    g = params.geometry
    nt, nn = params.target_count, params.noise_count
    r_in, r_out = g["inner_fraction"], g["outer_fraction"]
    rt = (r_in ** 3 + rng.random(nt) * (r_out ** 3 - r_in ** 3)) ** (1.0 / 3.0)
    targets = _unit_sphere_dirs(rng, nt, upper=True) * rt[:, None]
    rb = g["ball_fraction"] * rng.random(nn) ** (1.0 / 3.0)
    noise = _unit_sphere_dirs(rng, nn, upper=True) * rb[:, None]
    return np.vstack([targets, noise])


def _sample_arc_param(rng, n):
    """Arc parameter in [0, 1] with density ~ 1 + 0.5 sin(5 pi t), drawn by
    rejection so the draw count stays deterministic per accepted sample."""
    out = np.empty(n)
    filled = 0
    while filled < n:
        t = rng.random(n - filled)
        u = rng.random(n - filled)
        ok = u * 1.5 <= 1.0 + 0.5 * np.sin(5.0 * np.pi * t)
        take = t[ok]
        out[filled:filled + len(take)] = take
        filled += len(take)
    return out


def _gen_strings(rng, params):
    g = params.geometry
    nt, nn = params.target_count, params.noise_count
    tube = g["tube_fraction"]
    turns = g["turns"]
    # outer helix with varying winding radius and density
    t = _sample_arc_param(rng, nt)
    hr = g["helix_fraction"] * (1.0 + g["wobble"] * np.sin(3.0 * np.pi * t))
    ang = 2.0 * np.pi * turns * t
    centers = np.column_stack([2.0 * t - 1.0, hr * np.cos(ang), hr * np.sin(ang)])
    targets = centers + rng.normal(0.0, tube, (nt, 3))
    # central string, density varying the other way
    tc = _sample_arc_param(rng, nn)
    centers_c = np.column_stack([2.0 * (1.0 - tc) - 1.0, np.zeros(nn), np.zeros(nn)])
    noise = centers_c + rng.normal(0.0, tube, (nn, 3))
    return np.vstack([targets, noise])


def _gen_filament(rng, params):
    g = params.geometry
    nt, nn = params.target_count, params.noise_count
    amp = g["amplitude"]
    t = rng.random(nt)
    spine = np.column_stack([
        t,
        0.5 + amp * np.sin(2.0 * np.pi * 0.75 * t),
        0.5 + 0.6 * amp * np.cos(2.0 * np.pi * 0.5 * t),
    ])
    targets = spine + rng.normal(0.0, g["tube_fraction"], (nt, 3))
    m = g["noise_margin"]
    noise = rng.uniform(-m, 1.0 + m, (nn, 3))
    return np.vstack([targets, noise])


def filament_spine(params: DatasetParams, n: int = 64) -> np.ndarray:
    """Center curve of the generated filament, for scripting strokes."""
    g = params.geometry
    t = np.linspace(0.0, 1.0, n)
    amp = g["amplitude"]
    spine = np.column_stack([
        t,
        0.5 + amp * np.sin(2.0 * np.pi * 0.75 * t),
        0.5 + 0.6 * amp * np.cos(2.0 * np.pi * 0.5 * t),
    ])
    return spine * params.geometry["scale"]


def gen_dataset(params: DatasetParams) -> ParticleCloud:
    """Generate one of the benchmark clouds with ground-truth labels."""
    rng = np.random.default_rng(params.rng_seed)
    labels = None
    if params.kind == "disk":
        pos = _gen_disk(rng, params)
    elif params.kind == "rings":
        pos, labels = _gen_rings(rng, params)
    elif params.kind == "shell":
        pos = _gen_shell(rng, params)
    elif params.kind == "strings":
        pos = _gen_strings(rng, params)
    else:
        pos = _gen_filament(rng, params)
    if labels is None:
        labels = np.zeros(len(pos), dtype=bool)
        labels[:params.target_count] = True
    pos = pos * params.geometry["scale"]
    return ParticleCloud(pos, labels=labels)


@dataclass
class ConfusionStats:
    tp: int
    fp: int
    fn: int
    tn: int
    f1: float
    mcc: float
    flags: tuple[str, ...] = ()

    def to_dict(self) -> dict:
        out = {"tp": self.tp, "fp": self.fp, "fn": self.fn, "tn": self.tn,
               "f1": self.f1, "mcc": self.mcc}
        if self.flags:
            out["flags"] = list(self.flags)
        return out


def confusion_stats(selected, labels) -> ConfusionStats:
    """Confusion counts of a selection against ground-truth labels, with the
    F1 score (harmonic precision/recall mean) and the Matthews correlation
    coefficient. Scores with a vanishing denominator are reported as 0 and
    flagged."""
    labels = np.asarray(labels, dtype=bool)
    selected = np.asarray(selected, dtype=np.int64)
    if len(selected) and (selected.min() < 0 or selected.max() >= len(labels)):
        raise InvalidInputError("selected indices out of range")
    sel = np.zeros(len(labels), dtype=bool)
    sel[selected] = True
    tp = int(np.count_nonzero(sel & labels))
    fp = int(np.count_nonzero(sel & ~labels))
    fn = int(np.count_nonzero(~sel & labels))
    tn = int(np.count_nonzero(~sel & ~labels))
    flags = []
    if tp == 0:
        # covers empty selections, empty label sets, and P = R = 0
        f1 = 0.0
        flags.append("f1 undefined")
    else:
        precision = tp / (tp + fp)
        recall = tp / (tp + fn)
        f1 = 2.0 * precision * recall / (precision + recall)
    denom = (tp + fp) * (tp + fn) * (tn + fp) * (tn + fn)
    if denom == 0:
        mcc = 0.0
        flags.append("mcc undefined")
    else:
        mcc = (tp * tn - fp * fn) / math.sqrt(denom)
    return ConfusionStats(tp, fp, fn, tn, float(f1), float(mcc), tuple(flags))


# ---------------------------------------------------------------------------
# File formats
# ---------------------------------------------------------------------------

_CLOUD_MAGIC = b"MTCC"
_FIELD_MAGIC = b"MTCF"
_FORMAT_VERSION = 1


def canonical_json(obj) -> str:
    """The one JSON serialization used everywhere a byte-identical document
    matters (CLI files and service payloads)."""
    return json.dumps(obj, indent=2) + "\n"


def save_cloud_csv(cloud: ParticleCloud, path):
    lines = ["x,y,z,label" if cloud.labels is not None else "x,y,z"]
    if cloud.labels is not None:
        for (x, y, z), lab in zip(cloud.positions.tolist(), cloud.labels):
            lines.append(f"{x!r},{y!r},{z!r},{int(lab)}")
    else:
        for x, y, z in cloud.positions.tolist():
            lines.append(f"{x!r},{y!r},{z!r}")
    Path(path).write_text("\n".join(lines) + "\n")


def load_cloud_csv(path) -> ParticleCloud:
    path = Path(path)
    with path.open() as fh:
        header = fh.readline().strip()
        cols = [c.strip() for c in header.split(",")]
        if cols[:3] != ["x", "y", "z"] or len(cols) > 4 or \
                (len(cols) == 4 and cols[3] != "label"):
            raise ParseError(f"expected header x,y,z[,label], got {header!r}",
                             path=str(path), line=1)
        has_labels = len(cols) == 4
        positions, labels = [], []
        for lineno, line in enumerate(fh, start=2):
            line = line.strip()
            if not line:
                continue
            parts = line.split(",")
            if len(parts) != len(cols):
                raise ParseError(f"expected {len(cols)} fields, got {len(parts)}",
                                 path=str(path), line=lineno)
            try:
                positions.append([float(parts[0]), float(parts[1]), float(parts[2])])
                if has_labels:
                    labels.append(bool(int(parts[3])))
            except ValueError as exc:
                raise ParseError(str(exc), path=str(path), line=lineno) from exc
    positions = np.array(positions, dtype=np.float64).reshape(-1, 3)
    return ParticleCloud(positions,
                         labels=np.array(labels, dtype=bool) if has_labels else None)


def save_cloud_binary(cloud: ParticleCloud, path):
    with open(path, "wb") as fh:
        fh.write(_CLOUD_MAGIC)
        fh.write(struct.pack("<IQ", _FORMAT_VERSION, cloud.n))
        fh.write(cloud.positions.astype("<f4").tobytes())
        if cloud.labels is not None:
            fh.write(cloud.labels.astype(np.uint8).tobytes())


def load_cloud_binary(path) -> ParticleCloud:
    path = Path(path)
    raw = path.read_bytes()
    if raw[:4] != _CLOUD_MAGIC:
        raise ParseError("bad magic (expected MTCC)", path=str(path), offset=0)
    version, count = struct.unpack_from("<IQ", raw, 4)
    if version != _FORMAT_VERSION:
        raise ParseError(f"unsupported version {version}", path=str(path), offset=4)
    body = raw[16:]
    need = count * 12
    if len(body) not in (need, need + count):
        raise ParseError(f"expected {need} or {need + count} payload bytes, "
                         f"got {len(body)}", path=str(path), offset=16)
    positions = np.frombuffer(body[:need], dtype="<f4").reshape(count, 3).astype(np.float64)
    labels = None
    if len(body) == need + count:
        labels = np.frombuffer(body[need:], dtype=np.uint8).astype(bool)
    return ParticleCloud(positions, labels=labels)


def load_cloud(path) -> ParticleCloud:
    """Load a cloud from CSV or binary, sniffing the magic bytes."""
    path = Path(path)
    with path.open("rb") as fh:
        magic = fh.read(4)
    if magic == _CLOUD_MAGIC:
        return load_cloud_binary(path)
    return load_cloud_csv(path)


def save_density_grid(grid: DensityGrid, path):
    spec = grid.spec
    with open(path, "wb") as fh:
        fh.write(_FIELD_MAGIC)
        fh.write(struct.pack("<I", _FORMAT_VERSION))
        fh.write(struct.pack("<3I", *(int(d) for d in spec.dims)))
        fh.write(struct.pack("<6d", *spec.box_min, *spec.box_max))
        fh.write(struct.pack("<3d", *grid.global_lengths))
        fh.write(grid.values.astype("<f4").ravel(order="F").tobytes())


def load_density_grid(path) -> DensityGrid:
    path = Path(path)
    raw = path.read_bytes()
    if raw[:4] != _FIELD_MAGIC:
        raise ParseError("bad magic (expected MTCF)", path=str(path), offset=0)
    (version,) = struct.unpack_from("<I", raw, 4)
    if version != _FORMAT_VERSION:
        raise ParseError(f"unsupported version {version}", path=str(path), offset=4)
    dims = struct.unpack_from("<3I", raw, 8)
    box = struct.unpack_from("<6d", raw, 20)
    lengths = struct.unpack_from("<3d", raw, 68)
    count = dims[0] * dims[1] * dims[2]
    offset = 92
    if len(raw) != offset + 4 * count:
        raise ParseError(f"expected {offset + 4 * count} bytes, got {len(raw)}",
                         path=str(path), offset=offset)
    values = np.frombuffer(raw, dtype="<f4", count=count, offset=offset)
    values = values.reshape(dims, order="F").astype(np.float64)
    spec = GridSpec(np.array(box[:3]), np.array(box[3:]),
                    np.array(dims, dtype=np.int64))
    return DensityGrid(spec, values, np.array(lengths))


def stroke_to_dict(stroke: Stroke, technique: str = "brush",
                   mode: str = "union") -> dict:
    return {
        "technique": technique,
        "radius": float(stroke.radius),
        "mode": mode,
        "samples": [{"x": float(x), "y": float(y), "z": float(z), "t": float(t)}
                    for (x, y, z), t in zip(stroke.samples, stroke.timestamps)],
    }


def stroke_from_dict(d: dict, path: str | None = None) -> tuple[Stroke, str, str]:
    """Parse a stroke document; returns (stroke, technique, mode)."""
    try:
        technique = d["technique"]
        radius = float(d["radius"])
        mode = d.get("mode", "union")
        samples = [(float(s["x"]), float(s["y"]), float(s["z"])) for s in d["samples"]]
        times = [float(s.get("t", 0.0)) for s in d["samples"]]
    except (KeyError, TypeError, ValueError) as exc:
        raise ParseError(f"malformed stroke object: {exc}", path=path) from exc
    if technique not in ("point", "brush", "paint", "baseline"):
        raise ParseError(f"unknown technique {technique!r}", path=path)
    if mode not in ("union", "subtract"):
        raise ParseError(f"unknown mode {mode!r}", path=path)
    if not samples:
        raise InvalidInputError("stroke has no samples")
    return Stroke(np.array(samples), radius, np.array(times)), technique, mode


def load_stroke(path) -> tuple[Stroke, str, str]:
    path = Path(path)
    try:
        doc = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ParseError(exc.msg, path=str(path), line=exc.lineno,
                         offset=exc.colno) from exc
    return stroke_from_dict(doc, path=str(path))


def save_stroke(stroke: Stroke, path, technique: str = "brush",
                mode: str = "union"):
    Path(path).write_text(canonical_json(stroke_to_dict(stroke, technique, mode)))


def load_json(path) -> dict:
    path = Path(path)
    try:
        return json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ParseError(exc.msg, path=str(path), line=exc.lineno,
                         offset=exc.colno) from exc
