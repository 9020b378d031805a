"""Command line entry point: ``tilingaf <subcommand> [flags] <system.json>``."""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from importlib import resources

from . import affability as af
from . import borders as bd
from . import pathspace as ps
from . import tilingsys as ts
from .exactgeom import Direction, FieldError, Vec2, format_elem

log = logging.getLogger("tilingaf")

BUILTINS = ("sq", "chair")


class InputError(Exception):
    pass


class PreconditionError(Exception):
    pass


def builtin_text(name: str) -> str:
    return resources.files("tilingaf").joinpath("data", f"{name}.json").read_text(encoding="utf-8")


def read_system_text(path: str) -> tuple[str, str]:
    """``(text, name)``; bare built-in names are accepted when no such file exists."""
    if not os.path.exists(path) and path in BUILTINS:
        return builtin_text(path), path
    try:
        with open(path, encoding="utf-8") as fh:
            return fh.read(), path
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc.strerror}") from None


def load(path: str) -> ts.SubstSystem:
    text, name = read_system_text(path)
    try:
        return ts.loads_system(text, name=name)
    except ts.SystemError_ as exc:
        raise InputError(f"{path}: {exc}") from None


def preprocess(S: ts.SubstSystem, collar: bool = False, power: int = 1, normalize: bool = False) -> ts.SubstSystem:
    """Collar, then take a power, then normalise the type-III periods."""
    if collar:
        S = ts.collar_system(S)
    if power > 1:
        S = ts.power_system(S, power)
    if normalize:
        S, n = bd.normalize_periods(S)
        log.info("period normalisation used power %d", n)
    return S


def preprocessed_chair() -> ts.SubstSystem:
    """The built-in chair made border forcing and with period-one corners."""
    return preprocess(ts.loads_system(builtin_text("chair"), "chair"), collar=True, power=4)


def parse_direction(S: ts.SubstSystem, text: str) -> Direction:
    parts = text.split(",")
    if len(parts) != 2:
        raise InputError(f"direction {text!r} must be 'x,y'")
    try:
        v = Vec2(S.field.parse(parts[0].strip()), S.field.parse(parts[1].strip()))
    except FieldError as exc:
        raise InputError(str(exc)) from None
    if v.is_zero():
        raise InputError("direction must be nonzero")
    return Direction(v)


def parse_path(S: ts.SubstSystem, text: str | None) -> ps.PathSpec:
    if not text:
        raise InputError("--path is required")
    try:
        x = ps.PathSpec.parse(text)
        ps.check_path(ps.build_graph(S), x)
    except (ValueError, ps.InvalidPath) as exc:
        raise InputError(str(exc)) from None
    return x


# ---------------------------------------------------------------------------
# reports


def validate_report(S: ts.SubstSystem) -> tuple[dict, bool]:
    rep = {"system": ts.validate_system(S)}
    prim, m = ts.check_primitive(S)
    rep["primitive"] = {"holds": prim, "power": m}
    if rep["system"]["pass"]:
        rep["hypotheses"] = ts.hypothesis_report(S)
    ok = rep["system"]["pass"] and prim
    rep["pass"] = ok
    return rep, ok


def _graph(S, args):
    M = ts.subst_matrix(S)
    prim, m = ts.check_primitive(S)
    return {"graph": ps.build_graph(S).to_json(), "matrix": {"ids": M.ids, "rows": M.rows},
            "primitive": prim, "primitive_power": m}, True


def _corners(S, args):
    if (args.s is None) != (args.t is None):
        raise InputError("give both -s and -t, or neither")
    if args.s is not None:
        pairs = [(parse_direction(S, args.s), parse_direction(S, args.t))]
    else:
        pairs = bd.corner_pairs(S)
    out = [bd.corner_enumerate(S, s, t).to_json() for s, t in pairs]
    return {"corners": out, "vertices": len(S.ids)}, True


def _classify(S, args):
    x = parse_path(S, args.path)
    if not x.cycle:
        raise InputError("classify needs an eventually periodic path 'prefix|cycle'")
    return bd.classify_type(S, x).to_json(), True


def _need_C(S):
    try:
        return bd.C_edges(S)
    except bd.NormalizationRequired as exc:
        raise PreconditionError(f"{exc}; run 'tilingaf preprocess --normalize-periods' first") from None


def _mu(S, args):
    x = parse_path(S, args.path)
    C = _need_C(S)
    n = args.depth or 1
    if x.cycle is None and n > x.length:
        raise InputError(f"path has only {x.length} edges")
    return {"C": C, "depth": n, "mu": dict(zip(C, bd.mu_vector(S, x, n, C)))}, True


def _classes(S, args):
    n = args.depth or 1
    if args.prime:
        C = _need_C(S)
        part = bd.xprime_partition(S, n, C)
    else:
        part = ps.xn_partition(S, n)
    out = part.to_json()
    out["sizes"] = [len(b) for b in part.blocks]
    return out, True


def _charts(S, args):
    C = _need_C(S)
    info = bd.compute_C(S)
    try:
        atlas = af.build_atlas(S)
    except af.NoChart as exc:
        return {"error": "NoChart", "P6": info["P6"]["holds"],
                "failing": [list(f) for f in exc.failures]}, False
    except af.NotBorderForcing as exc:
        raise PreconditionError(f"{exc}; run 'tilingaf preprocess --collar' first") from None
    F = af.choose_F(S)
    disj = af.atlas_disjointness(S, atlas)
    flip = af.verify_border_flip(S, atlas, threads=args.threads)
    cross = af.cross_relation_check(S, atlas, F, args.depth or 8)
    out = {"C": C, "F": [t.fmt() for t in F], "atlas": atlas.to_json(), "disjointness": disj,
           "border_flip": {k: flip[k] for k in ("witnesses", "witnesses_in_Bt", "violations", "pass")},
           "cross_relation": cross}
    ok = disj["domains_disjoint"] and disj["images_disjoint"] and flip["pass"] and cross["pass"]
    return out, ok


def _measure(S, args):
    try:
        pf = ps.pf_measure(S)
    except ps.NotPrimitive as exc:
        raise PreconditionError(str(exc)) from None
    out = {"pf": pf.to_json()}
    n = args.depth
    if n:
        fmt = format_elem if pf.exact else (lambda z: repr(float(z)))
        cyl = {",".join(p): ps.cylinder_measure(S, p) for p in ps.enumerate_paths(S, n)}
        out["depth"] = n
        out["cylinders"] = {k: fmt(v) for k, v in cyl.items()}
        out["total"] = fmt(sum(cyl.values()))
    return out, True


def _decay(S, args):
    if args.t is None:
        dirs = af.choose_F(S)
    else:
        dirs = [parse_direction(S, args.t)]
    out = []
    for t in dirs:
        rep = af.thinness_decay(S, t, args.depth or 6)
        rep.pop("raw")
        out.append(rep)
    return {"decay": out}, True


def _split(S, args):
    _need_C(S)
    try:
        atlas = af.build_atlas(S)
    except af.NoChart:
        atlas = None
    rep = af.splitting_report(S, atlas)
    rep["atlas"] = atlas is not None
    return rep, True


ANALYSES = {
    "graph": _graph, "corners": _corners, "classify": _classify, "mu": _mu, "classes": _classes,
    "charts": _charts, "measure": _measure, "decay": _decay, "split": _split,
}


# ---------------------------------------------------------------------------
# SVG


def _num(z) -> str:
    return f"{float(z):.12g}"


def render_svg(S: ts.SubstSystem, x: ps.PathSpec, n: int, scale: float = 40.0) -> str:
    """The level-n supertile of the origin tile of ``T_x``; its outline (the
    part of the tile boundaries that survives to depth n) is highlighted."""
    if x.cycle is None and n > x.length:
        raise InputError(f"path has only {x.length} edges")
    edges = x.first(n)
    patch = ps.place_path(S, edges)
    anchor = -ps.path_offset(S, edges)
    top = ps.build_graph(S).by_id[edges[-1]].dst
    outline = S.tile_polygon((top, anchor), n)
    xs = [float(v.x) for v in outline.vertices]
    ys = [float(v.y) for v in outline.vertices]
    pad = 0.5
    x0, x1, y0, y1 = min(xs) - pad, max(xs) + pad, min(ys) - pad, max(ys) + pad
    w, h = (x1 - x0) * scale, (y1 - y0) * scale
    lines = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{w:.6g}" height="{h:.6g}" '
        f'viewBox="{x0:.12g} {-y1:.12g} {x1 - x0:.12g} {y1 - y0:.12g}">',
        '<g transform="scale(1,-1)" stroke-linejoin="round">',
    ]

    def pts(poly):
        return " ".join(f"{_num(v.x)},{_num(v.y)}" for v in poly.vertices)

    for i, t in enumerate(patch.tiles):
        fill = "#f4d58d" if i == patch.marked else "#dfe7ef"
        lines.append(f'<polygon data-proto="{t.proto}" points="{pts(S.tile_polygon(t))}" '
                     f'fill="{fill}" stroke="#555" stroke-width="{0.6 / scale:.6g}"/>')
    lines.append(f'<polygon class="surviving" points="{pts(outline)}" fill="none" '
                 f'stroke="#c0392b" stroke-width="{2.5 / scale:.6g}"/>')
    lines.append(f'<circle cx="0" cy="0" r="{2 / scale:.6g}" fill="#000"/>')
    lines.append("</g>")
    lines.append("</svg>")
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="tilingaf", description="Substitution tilings and their AF relations.")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    v = sub.add_parser("validate", help="structural checks and hypotheses (P1)-(P4)")
    v.add_argument("file")
    v.add_argument("--json", dest="json_out")

    p = sub.add_parser("preprocess", help="collar, take powers, normalise periods")
    p.add_argument("file")
    p.add_argument("--power", type=int, default=1)
    p.add_argument("--collar", action="store_true")
    p.add_argument("--normalize-periods", action="store_true")
    p.add_argument("-o", "--output")

    a = sub.add_parser("analyze", help="analyses of a system")
    a.add_argument("analysis", choices=sorted(ANALYSES))
    a.add_argument("file")
    a.add_argument("-n", "--depth", type=int)
    a.add_argument("--path")
    a.add_argument("--prime", action="store_true", help="use the refined partition")
    a.add_argument("-s")
    a.add_argument("-t")
    a.add_argument("--threads", type=int, default=1)
    a.add_argument("--json", dest="json_out")
    a.add_argument("--svg")
    a.add_argument("--scale", type=float, default=40.0)
    return ap


def emit(obj, path: str | None) -> None:
    text = json.dumps(obj, indent=1, sort_keys=True) + "\n"
    if path:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        if args.command == "validate":
            S = load(args.file)
            rep, ok = validate_report(S)
            emit(rep, args.json_out)
            return 0 if ok else 1
        if args.command == "preprocess":
            if args.power < 1:
                raise InputError("--power must be at least 1")
            text, name = read_system_text(args.file)
            try:
                S = ts.loads_system(text, name=name)
            except ts.SystemError_ as exc:
                raise InputError(f"{args.file}: {exc}") from None
            if not (args.collar or args.power > 1 or args.normalize_periods):
                out = text
            else:
                try:
                    S = preprocess(S, args.collar, args.power, args.normalize_periods)
                except ts.ClosureTooLarge as exc:
                    print(f"error: {exc}", file=sys.stderr)
                    return 1
                out = S.dumps(with_adjacency=True)
            if args.output:
                with open(args.output, "w", encoding="utf-8") as fh:
                    fh.write(out)
            else:
                sys.stdout.write(out)
            return 0
        if args.depth is not None and args.depth < 1:
            raise InputError("--depth must be at least 1")
        S = load(args.file)
        if args.svg:
            x = parse_path(S, args.path)
            with open(args.svg, "w", encoding="utf-8") as fh:
                fh.write(render_svg(S, x, args.depth or 1, args.scale))
        rep, ok = ANALYSES[args.analysis](S, args)
        emit(rep, args.json_out)
        return 0 if ok else 1
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except PreconditionError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
