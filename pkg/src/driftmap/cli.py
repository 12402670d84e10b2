"""Operator CLI: a thin client over the service API.

Every subcommand drives the same HTTP surface the service exposes. By default
the app is mounted in-process (no daemon needed); `--server URL` points the
client at a running `driftmap serve` instead. Files never cross the wire: the
client reads embeddings, posts, scenarios, and snapshots locally and ships
records/documents.

Exit codes: 0 ok, 1 input/format errors, 2 configuration errors.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

import httpx

from . import snapshot as snapshot_mod
from .vector_io import BatchingConfig, EmptyDatasetError, FormatError, batch_stream, read_embeddings, read_posts, write_embeddings

CONFIG_ENV = "DRIFTMAP_CONFIG"

EXIT_OK = 0
EXIT_INPUT = 1
EXIT_CONFIG = 2


class CliError(Exception):
    def __init__(self, message: str, code: int):
        super().__init__(message)
        self.code = code


def _client(server: str | None) -> httpx.Client:
    if server:
        return httpx.Client(base_url=server, timeout=600.0)
    # in-process mode: mount the app behind the sync-over-ASGI bridge
    import warnings

    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        from fastapi.testclient import TestClient

    from .service.app import create_app

    return TestClient(create_app(), base_url="http://driftmap.local")


def _check(resp: httpx.Response) -> httpx.Response:
    if resp.status_code >= 400:
        try:
            detail = resp.json().get("detail", resp.text)
        except Exception:
            detail = resp.text
        raise CliError(f"service error ({resp.status_code}): {detail}", EXIT_INPUT)
    return resp


def _load_config_defaults() -> dict:
    path = os.environ.get(CONFIG_ENV)
    if not path:
        return {}
    try:
        with open(path, "r", encoding="utf-8") as fh:
            cfg = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise CliError(f"bad config file {path!r}: {exc}", EXIT_CONFIG) from exc
    if not isinstance(cfg, dict):
        raise CliError(f"config file {path!r} must hold a JSON object", EXIT_CONFIG)
    return cfg


def _apply_config(p: argparse.ArgumentParser, cfg: dict) -> None:
    """Config file supplies defaults under the flag's long name; explicit flags win."""
    dests = {a.dest for a in p._actions}
    translated = {}
    for key, value in cfg.items():
        dest = str(key).replace("-", "_")
        if dest == "lambda":
            dest = "lam"
        if dest == "delta":
            dest = "delta_frac"
        if dest in dests:
            translated[dest] = value
    if translated:
        p.set_defaults(**translated)


def _add_engine_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--k0", type=int, default=2, help="initial concept count")
    p.add_argument("--lo", type=float, default=40.0, help="lower distance percentile")
    p.add_argument("--hi", type=float, default=60.0, help="upper distance percentile")
    p.add_argument("--lambda", dest="lam", type=float, default=0.25, help="window multiplier")
    p.add_argument("--delta", dest="delta_frac", type=float, default=0.15, help="outlier threshold as batch fraction")
    p.add_argument("--no-purview-filter", action="store_true", help="flag any record outside the window, not just the concept's purview")
    p.add_argument("--seed", type=int, default=0, help="seed controlling all randomness")


def _engine_params_payload(args: argparse.Namespace) -> dict:
    return {
        "k0": args.k0,
        "lo": args.lo,
        "hi": args.hi,
        "lambda": args.lam,
        "delta_frac": args.delta_frac,
        "purview_filter": not args.no_purview_filter,
        "seed": args.seed,
    }


def _record_payload(records) -> list[dict]:
    return [{"id": r.id, "vector": [float(x) for x in r.vector]} for r in records]


def _read_labels(path: Path) -> dict[str, str]:
    labels: dict[str, str] = {}
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            obj = json.loads(line)
            if "id" not in obj or "label" not in obj:
                raise FormatError(f"{path}: labels file lines need 'id' and 'label'")
            labels[str(obj["id"])] = str(obj["label"])
    if not labels:
        raise EmptyDatasetError(f"{path}: no labels")
    return labels


def cmd_run(args: argparse.Namespace) -> int:
    records, _dim = read_embeddings(args.embeddings)
    batches = batch_stream(records, BatchingConfig(mode="fixed-size", size=args.batch_size))

    with _client(args.server) as client:
        skip = 0
        if args.snapshot_in:
            model = snapshot_mod.load_model(args.snapshot_in, dataset=args.embeddings)
            skip = model.batch_counter
            doc = snapshot_mod.model_to_doc(model, inline_vectors=True)
            resp = _check(client.post("/sessions", json={"snapshot": doc}))
        else:
            resp = _check(client.post("/sessions", json={"params": _engine_params_payload(args)}))
        sid = resp.json()["session_id"]

        todo = batches[skip:]
        if not todo:
            raise CliError(f"snapshot already covers all {len(batches)} batches", EXIT_INPUT)

        outcomes_path = Path(args.outcomes_out) if args.outcomes_out else Path(str(args.snapshot_out) + ".outcomes.jsonl")
        mode = "a" if args.snapshot_in else "w"
        with open(outcomes_path, mode, encoding="utf-8") as log:
            for batch in todo:
                resp = _check(
                    client.post(f"/sessions/{sid}/batches", json={"records": _record_payload(batch.records)})
                )
                outcome = resp.json()
                log.write(json.dumps(outcome, sort_keys=True))
                log.write("\n")
                print(
                    f"batch {outcome['batch_index']}: k={outcome['k_after']} splits={outcome['splits']}",
                    file=sys.stderr,
                )

        snap = _check(client.get(f"/sessions/{sid}/snapshot")).content
        model = snapshot_mod.model_from_doc(snapshot_mod.verify_and_parse(snap))
        snapshot_mod.save_model(
            model,
            args.snapshot_out,
            inline_vectors=args.snapshot_inline,
            dataset=None if args.snapshot_inline else str(args.embeddings),
        )
        client.delete(f"/sessions/{sid}")
    print(f"wrote {args.snapshot_out} and {outcomes_path}")
    return EXIT_OK


def cmd_report(args: argparse.Namespace) -> int:
    model = snapshot_mod.load_model(args.snapshot, dataset=args.embeddings)
    doc = snapshot_mod.model_to_doc(model, inline_vectors=True)
    posts_payload = None
    if args.posts:
        posts = read_posts(args.posts)
        posts_payload = [
            {"id": p.id, "text": p.text, "timestamp": p.timestamp, "label": p.label} for p in posts
        ]

    with _client(args.server) as client:
        sid = _check(client.post("/sessions", json={"snapshot": doc})).json()["session_id"]
        req = {
            "posts": posts_payload,
            "top_terms": args.top_terms,
            "coverage_labels": args.coverage_label or [],
            "include_projection": bool(args.project),
        }
        report = _check(client.post(f"/sessions/{sid}/report", json=req)).json()
        client.delete(f"/sessions/{sid}")

    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "report.json").write_text(json.dumps(report, indent=2, sort_keys=True) + "\n", encoding="utf-8")

    from . import reports as reports_mod

    lines = []
    m = report["metrics"]
    lines.append("Clustering quality")
    lines.append(f"  concepts: {report['k']}  records: {m.get('n')}")
    if "error" in m:
        lines.append(f"  metrics unavailable: {m['error']}")
    else:
        lines.append(
            f"  Davies-Bouldin: {m['davies_bouldin']:.4f}  Silhouette: {m['silhouette']:.4f}  "
            f"Calinski-Harabasz: {m['calinski_harabasz'] if isinstance(m['calinski_harabasz'], str) else round(m['calinski_harabasz'], 4)}"
        )
    lines.append("")
    lines.append(reports_mod.render_lineage_text(model))
    lines.append("")
    if report.get("terms"):
        lines.append(reports_mod.render_terms_text(report["terms"]))
    else:
        lines.append("Trending terms: skipped (no posts file)")
    if report.get("coverage"):
        lines.append("")
        lines.append("Coverage")
        for label, cov in sorted(report["coverage"].items()):
            if cov is None:
                lines.append(f"  {label}: Not Applicable")
            else:
                lines.append(f"  {label}: {100.0 * cov['fraction']:.2f}% (C{cov['cluster']})")
    (out_dir / "report.txt").write_text("\n".join(lines) + "\n", encoding="utf-8")

    if args.project:
        rows = report.get("projection") or []
        csv = "x,y,concept\n" + "".join(f"{r['x']!r},{r['y']!r},{r['concept']}\n" for r in rows)
        (out_dir / "projection.csv").write_text(csv, encoding="utf-8")
    print(f"wrote report to {out_dir}")
    return EXIT_OK


def cmd_synth(args: argparse.Namespace) -> int:
    try:
        with open(args.scenario, "r", encoding="utf-8") as fh:
            scenario = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise CliError(f"cannot read scenario: {exc}", EXIT_CONFIG) from exc
    if args.seed is not None:
        scenario["seed"] = args.seed

    with _client(args.server) as client:
        resp = client.post("/synth", json={"scenario": scenario})
        if resp.status_code == 422:
            raise CliError(f"bad scenario: {resp.json().get('detail')}", EXIT_CONFIG)
        data = _check(resp).json()

    from .vector_io import EmbeddingRecord
    import numpy as np

    records = [
        EmbeddingRecord(id=r["id"], vector=np.asarray(r["vector"], dtype=np.float64))
        for b in data["batches"]
        for r in b["records"]
    ]
    write_embeddings(records, args.out_embeddings, format=args.format)
    with open(args.out_labels, "w", encoding="utf-8") as fh:
        for rec in records:
            fh.write(json.dumps({"id": rec.id, "label": data["labels"][rec.id]}))
            fh.write("\n")
    print(f"wrote {len(records)} records to {args.out_embeddings}; labels to {args.out_labels}")
    return EXIT_OK


def cmd_eval(args: argparse.Namespace) -> int:
    records, _dim = read_embeddings(args.embeddings)
    labels = None
    if args.labels:
        labels = _read_labels(Path(args.labels))
    elif args.posts:
        labels = {p.id: p.label for p in read_posts(args.posts) if p.label is not None}

    methods = [m.strip() for m in args.methods.split(",") if m.strip()]
    for m in methods:
        if m not in ("kmeans", "gmm", "meanshift"):
            raise CliError(f"unknown method {m!r}", EXIT_CONFIG)

    payload = {
        "records": _record_payload(records),
        "labels": labels,
        "methods": methods,
        "k": args.k,
        "seed": args.seed,
        "bandwidth": args.bandwidth,
        "coverage_labels": args.coverage_label or [],
        "engine": {"params": _engine_params_payload(args), "batch_size": args.batch_size},
    }
    with _client(args.server) as client:
        data = _check(client.post("/eval", json=payload)).json()
    print(data["text"])
    if args.json_out:
        Path(args.json_out).write_text(json.dumps(data["rows"], indent=2, sort_keys=True) + "\n", encoding="utf-8")
        print(f"wrote {args.json_out}", file=sys.stderr)
    return EXIT_OK


def cmd_serve(args: argparse.Namespace) -> int:
    import uvicorn

    from .service.app import create_app

    uvicorn.run(create_app(), host=args.host, port=args.port)
    return EXIT_OK


def build_parser(config: dict | None = None) -> argparse.ArgumentParser:
    config = config or {}
    parser = argparse.ArgumentParser(prog="driftmap", description="Online concept discovery over embedding streams.")
    parser.add_argument("--server", default=None, help="base URL of a running driftmap service (default: in-process)")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="stream an embeddings file through the engine")
    p_run.add_argument("--embeddings", required=True)
    p_run.add_argument("--posts", default=None, help="posts JSONL (unused by run; accepted for symmetry)")
    p_run.add_argument("--snapshot-in", default=None, help="resume from this snapshot")
    p_run.add_argument("--snapshot-out", required=True)
    p_run.add_argument("--snapshot-inline", action="store_true", help="embed vectors in the snapshot instead of referencing the dataset")
    p_run.add_argument("--outcomes-out", default=None, help="where to write the per-batch outcome log (JSONL)")
    p_run.add_argument("--batch-size", type=int, default=500)
    _add_engine_flags(p_run)
    p_run.set_defaults(func=cmd_run)

    p_rep = sub.add_parser("report", help="render metrics, lineage, terms, and projection from a snapshot")
    p_rep.add_argument("--snapshot", required=True)
    p_rep.add_argument("--embeddings", default=None, help="dataset backing a reference-mode snapshot")
    p_rep.add_argument("--posts", default=None)
    p_rep.add_argument("--top-terms", type=int, default=10)
    p_rep.add_argument("--coverage-label", action="append", default=None)
    p_rep.add_argument("--project", action="store_true", help="dump a 2-D PCA projection CSV")
    p_rep.add_argument("--out-dir", default="driftmap-report")
    p_rep.set_defaults(func=cmd_report)

    p_syn = sub.add_parser("synth", help="generate a scripted synthetic stream with ground-truth labels")
    p_syn.add_argument("--scenario", required=True)
    p_syn.add_argument("--out-embeddings", required=True)
    p_syn.add_argument("--out-labels", required=True)
    p_syn.add_argument("--format", choices=["jsonl", "binary"], default="jsonl")
    p_syn.add_argument("--seed", type=int, default=None, help="override the scenario's seed")
    p_syn.set_defaults(func=cmd_synth)

    p_eval = sub.add_parser("eval", help="compare the engine against static baselines on one dataset")
    p_eval.add_argument("--embeddings", required=True)
    p_eval.add_argument("--labels", default=None, help="JSONL with id/label rows")
    p_eval.add_argument("--posts", default=None, help="take labels from a posts JSONL instead")
    p_eval.add_argument("--methods", default="kmeans,gmm,meanshift")
    p_eval.add_argument("--k", type=int, default=9)
    p_eval.add_argument("--bandwidth", type=float, default=None)
    p_eval.add_argument("--coverage-label", action="append", default=None)
    p_eval.add_argument("--batch-size", type=int, default=500)
    p_eval.add_argument("--json-out", default=None)
    _add_engine_flags(p_eval)
    p_eval.set_defaults(func=cmd_eval)

    p_srv = sub.add_parser("serve", help="run the HTTP service")
    p_srv.add_argument("--host", default="127.0.0.1")
    p_srv.add_argument("--port", type=int, default=8000)
    p_srv.set_defaults(func=cmd_serve)

    for p in (p_run, p_rep, p_syn, p_eval, p_srv):
        _apply_config(p, config)
    return parser


def main(argv: list[str] | None = None) -> int:
    try:
        parser = build_parser(_load_config_defaults())
    except CliError as exc:
        print(f"driftmap: {exc}", file=sys.stderr)
        return exc.code
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse exits 2 on bad flags, which matches our config-error code
        return int(exc.code or 0)
    try:
        return args.func(args)
    except CliError as exc:
        print(f"driftmap: {exc}", file=sys.stderr)
        return exc.code
    except (FormatError, EmptyDatasetError, snapshot_mod.SnapshotError) as exc:
        print(f"driftmap: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except FileNotFoundError as exc:
        print(f"driftmap: missing file: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except OSError as exc:
        print(f"driftmap: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except ValueError as exc:
        print(f"driftmap: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
