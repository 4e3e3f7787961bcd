"""Command-line interface.

Subcommands: parse, validate, mesh, sample, eval, reflect, stats.
Report-producing commands write JSON plus delimited tables and render
matplotlib figures alongside them.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import geometry, mesh as meshmod, metrics as metricsmod, model
from .clients import EchoClient, HttpClient, ReplayClient
from .errors import CcsError
from .pipeline import (
    BatchConfig,
    CONFIDENCE_THRESHOLD,
    DEFAULT_MAX_RETRIES,
    DEFAULT_THRESHOLD,
    run_batch,
)
from . import reporting


def _read_text(path: str) -> str:
    if path == "-":
        return sys.stdin.read()
    return Path(path).read_text(encoding="utf-8")


def _load_sequence(path: str) -> model.CadSequence:
    text = _read_text(path)
    stripped = text.lstrip()
    if stripped.startswith("{"):
        return model.from_json_obj(json.loads(text))
    return model.parse_ccs(text)


def cmd_parse(args) -> int:
    seq = _load_sequence(args.input)
    if args.json:
        print(json.dumps(model.to_json_obj(seq), ensure_ascii=False, indent=2))
    else:
        print(model.serialize_ccs(seq))
    return 0


def cmd_validate(args) -> int:
    seq = _load_sequence(args.input)
    result = model.validate(seq)
    if args.json:
        print(json.dumps({
            "ok": result.ok,
            "issues": [{"position": i.position, "code": i.code.value,
                        "message": i.message} for i in result.issues],
        }, indent=2))
    elif result.ok:
        print("ok")
    else:
        for issue in result.issues:
            print(f"position {issue.position}: {issue.code.value}: {issue.message}")
    return 0 if result.ok else 1


def _evaluate(seq: model.CadSequence, resolution: int) -> geometry.VoxelSolid:
    result = model.validate(seq)
    if not result.ok:
        codes = ", ".join(i.code.value for i in result.issues)
        raise CcsError(f"sequence is not valid ({codes}); run validate for details")
    return geometry.evaluate_solid(model.dequantize(seq), resolution=resolution)


def cmd_mesh(args) -> int:
    seq = _load_sequence(args.input)
    solid = _evaluate(seq, args.resolution)
    if solid.is_empty:
        print("empty solid: no geometry produced", file=sys.stderr)
        return 1
    tri_mesh = meshmod.extract_mesh(solid)
    with open(args.output, "wb") as fh:
        nbytes = meshmod.export_stl(tri_mesh, fh)
    print(f"wrote {args.output}: {len(tri_mesh.triangles)} triangles, {nbytes} bytes")
    return 0


def cmd_sample(args) -> int:
    path = Path(args.input)
    if path.suffix.lower() == ".stl":
        with open(path, "rb") as fh:
            tri_mesh = meshmod.read_stl(fh)
    else:
        solid = _evaluate(_load_sequence(args.input), args.resolution)
        if solid.is_empty:
            print("empty solid: no geometry produced", file=sys.stderr)
            return 1
        tri_mesh = meshmod.extract_mesh(solid)
    cloud = meshmod.sample_point_cloud(tri_mesh, args.n, args.seed)
    if args.format == "bin":
        with open(args.output, "wb") as fh:
            meshmod.write_point_cloud_bin(cloud, fh)
    else:
        with open(args.output, "w", encoding="utf-8") as fh:
            meshmod.write_xyz(cloud, fh)
    print(f"wrote {args.output}: {len(cloud)} points (seed {args.seed})")
    return 0


def _shape_metrics(records, resolution: int) -> dict:
    ref_clouds, gen_clouds = [], []
    for rec in records:
        for seq, sink in ((rec.ground_truth, ref_clouds), (rec.predicted, gen_clouds)):
            if not model.validate(seq).ok:
                continue
            solid = geometry.evaluate_solid(model.dequantize(seq),
                                            resolution=resolution)
            if solid.is_empty:
                continue
            cloud = meshmod.sample_point_cloud(meshmod.extract_mesh(solid),
                                               2048, seed=0)
            sink.append(cloud)
    if not ref_clouds or not gen_clouds:
        return {}
    cds = [metricsmod.chamfer_distance(r, g)
           for r, g in zip(ref_clouds, gen_clouds)]
    return {
        "cd": float(sum(cds) / len(cds)),
        "mmd": metricsmod.mmd(ref_clouds, gen_clouds),
        "jsd": metricsmod.jsd(ref_clouds, gen_clouds),
    }


def cmd_eval(args) -> int:
    records = metricsmod.load_records_jsonl(args.records)
    report = metricsmod.command_metrics(records)
    if args.shape:
        shape = _shape_metrics(records, args.resolution)
        if shape:
            report.shape = shape
    out = Path(args.output)
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(json.dumps(report.to_json_obj(), indent=2) + "\n",
                   encoding="utf-8")
    csv_path = out.with_suffix(".csv")
    csv_path.write_text(reporting.metrics_csv(report), encoding="utf-8")
    fig_path = out.with_suffix(".png")
    reporting.render_metrics_bars(report, fig_path)
    print(reporting.metrics_table(report))
    print(f"\nwrote {out}, {csv_path}, {fig_path}")
    return 0


def _make_client(args):
    if args.client == "http":
        if not args.endpoint:
            raise CcsError("--endpoint is required with --client http")
        return HttpClient(args.endpoint)
    if args.client == "replay":
        if not args.transcript:
            raise CcsError("--transcript is required with --client replay")
        return ReplayClient(args.transcript)
    return EchoClient()


def cmd_reflect(args) -> int:
    config = BatchConfig(client=_make_client(args), threshold=args.threshold,
                         max_retries=args.max_retries, workers=args.workers,
                         checkpoint_path=args.checkpoint)
    report = run_batch(args.manifest, config)
    out = Path(args.output)
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(json.dumps(report.to_json_obj(), indent=2) + "\n",
                   encoding="utf-8")
    table_path = out.with_suffix(".csv")
    table_path.write_text(reporting.histogram_table(report.histogram_counts),
                          encoding="utf-8")
    reporting.render_ratio_histogram(report.histogram_counts, out.with_suffix(".png"))
    summary = report.to_json_obj()["summary"]
    print(f"{summary['count']} samples, {summary['accepted']} accepted "
          f"(rate {report.acceptance_rate:.3f}), {summary['errors']} errors")
    print(f"wrote {out}, {table_path}, {out.with_suffix('.png')}")
    return 0


def cmd_stats(args) -> int:
    import numpy as np

    counts = np.zeros(50, dtype=int)
    total = accepted = 0
    for path in args.reports:
        obj = json.loads(Path(path).read_text(encoding="utf-8"))
        summary = obj.get("summary", {})
        counts += np.asarray(summary.get("histogram_counts", [0] * 50), dtype=int)
        total += summary.get("count", 0)
        accepted += summary.get("accepted", 0)
    table = reporting.histogram_table(counts.tolist())
    out_dir = Path(args.output_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "lcs_ratio_histogram.csv").write_text(table, encoding="utf-8")
    reporting.render_ratio_histogram(counts.tolist(),
                                     out_dir / "lcs_ratio_histogram.png")
    print(table, end="")
    if total:
        print(f"# acceptance: {accepted}/{total} = {accepted / total:.3f}")
    print(f"wrote {out_dir / 'lcs_ratio_histogram.csv'}, "
          f"{out_dir / 'lcs_ratio_histogram.png'}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ccstools",
        description="Parse, validate, evaluate and score CAD command sequences.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("parse", help="canonicalize CCS text or JSON")
    p.add_argument("input", help="CCS text/JSON file, or - for stdin")
    p.add_argument("--json", action="store_true", help="emit the JSON mirror")
    p.set_defaults(func=cmd_parse)

    p = sub.add_parser("validate", help="check structural invariants")
    p.add_argument("input")
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("mesh", help="evaluate a CCS and export binary STL")
    p.add_argument("input")
    p.add_argument("-o", "--output", required=True)
    p.add_argument("--resolution", type=int, default=64)
    p.set_defaults(func=cmd_mesh)

    p = sub.add_parser("sample", help="sample a surface point cloud")
    p.add_argument("input", help="STL file or CCS text/JSON")
    p.add_argument("-o", "--output", required=True)
    p.add_argument("--n", type=int, default=8000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--resolution", type=int, default=64)
    p.add_argument("--format", choices=("xyz", "bin"), default="xyz")
    p.set_defaults(func=cmd_sample)

    p = sub.add_parser("eval", help="score prediction records (JSONL)")
    p.add_argument("records")
    p.add_argument("-o", "--output", required=True, help="report JSON path")
    p.add_argument("--shape", action="store_true",
                   help="also compute CD/MMD/JSD from evaluated geometry")
    p.add_argument("--resolution", type=int, default=64)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("reflect", help="batch reverse validation + reflection")
    p.add_argument("manifest", help="JSONL manifest: {id, description, gt_ccs_path}")
    p.add_argument("-o", "--output", required=True)
    p.add_argument("--client", choices=("http", "replay", "mock"), default="mock")
    p.add_argument("--endpoint", help="HTTP endpoint URL")
    p.add_argument("--transcript", help="replay transcript path")
    p.add_argument("--threshold", type=float, default=DEFAULT_THRESHOLD)
    p.add_argument("--max-retries", type=int, default=DEFAULT_MAX_RETRIES)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--checkpoint", help="JSONL checkpoint for resume")
    p.set_defaults(func=cmd_reflect)

    p = sub.add_parser("stats", help="merge batch reports into a histogram table")
    p.add_argument("reports", nargs="+")
    p.add_argument("-o", "--output-dir", default=".")
    p.set_defaults(func=cmd_stats)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except CcsError as exc:
        print(f"error [{exc.code}]: {exc.message}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
