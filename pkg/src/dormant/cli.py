"""Command-line entry point: scan, diff, inject, detect, delta and evolve."""

from __future__ import annotations

import argparse
import hashlib
import json
import statistics
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from functools import lru_cache
from pathlib import Path

from . import __version__
from .archive import ArchiveError, Artifact, load_artifact, parse_classes, write_artifact
from .catalog import PlatformCatalog
from .detect import (
    DEFAULT_MAX_DEPTH, EntryCatalog, GadgetChain, SinkCatalog, build_callgraph, diff_chains, entry_methods,
    filter_by_sinks, find_chains,
)
from .evolution import EvolutionError, analyze, load_rows
from .hierarchy import ChangeKind, diff_serializability, graph_from_classes, jcl_interfaces_of_serializable, serializability
from .inject import DEFAULT_CALLER, Pattern, inject

EXIT_OK, EXIT_USAGE, EXIT_INPUT, EXIT_INTERNAL = 0, 1, 2, 3
ARCHIVE_SUFFIXES = (".jar", ".aar")
PATTERN_DIRS = ("1", "2", "3", "all")


class UsageError(Exception):
    pass


class InputError(Exception):
    pass


class ConfigMismatch(InputError):
    pass


class InvariantViolation(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


# -- configuration ---------------------------------------------------------------------

@dataclass(frozen=True)
class Settings:
    catalog: str | None = None
    entries: str | None = None
    sinks: str | None = None
    all_sinks: bool = False
    max_depth: int = DEFAULT_MAX_DEPTH
    caller: str = DEFAULT_CALLER


@lru_cache(maxsize=8)
def _catalogs(s: Settings) -> tuple[PlatformCatalog, EntryCatalog, SinkCatalog]:
    try:
        catalog = PlatformCatalog.load(s.catalog)
        entries = EntryCatalog.from_file(s.entries) if s.entries else EntryCatalog()
        sinks = SinkCatalog.from_file(s.sinks) if s.sinks else SinkCatalog()
    except (OSError, ValueError, KeyError, ArchiveError) as exc:
        raise InputError(f"cannot load catalog: {exc}") from None
    return catalog, entries, sinks


def analysis_config(s: Settings) -> dict:
    catalog, entries, sinks = _catalogs(s)
    return {
        "platform_catalog": catalog.fingerprint(),
        "entries": entries.describe(),
        "sinks": sinks.describe(),
        "sink_mode": "all" if s.all_sinks else "kept-only",
        "max_depth": s.max_depth,
    }


def digest(config: dict) -> str:
    return hashlib.sha256(json.dumps(config, sort_keys=True, separators=(",", ":")).encode("utf-8")).hexdigest()


def report(command: str, config: dict, body: dict) -> dict:
    return {"schema": f"dormant.{command}/1", "tool_version": __version__, "config": config,
            "config_digest": digest(config), **body}


def _load(path: Path) -> Artifact:
    try:
        return load_artifact(path)
    except FileNotFoundError:
        raise InputError(f"{path}: no such file") from None
    except (ArchiveError, OSError) as exc:
        raise InputError(f"{path}: {type(exc).__name__}: {exc}") from None


def _describe(path: Path, data: bytes | None = None) -> dict:
    data = path.read_bytes() if data is None else data
    return {"path": str(path), "name": path.name, "sha256": hashlib.sha256(data).hexdigest()}


def _artifacts_in(directory: Path) -> list[Path]:
    return sorted(p for p in directory.iterdir() if p.is_file() and p.suffix.lower() in ARCHIVE_SUFFIXES)


def _run_many(fn, tasks: list[tuple], workers: int) -> list:
    """Apply ``fn`` to every task tuple; results keep task order."""
    if workers <= 1 or len(tasks) <= 1:
        return [fn(*t) for t in tasks]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        futures = [pool.submit(fn, *t) for t in tasks]
        return [f.result() for f in futures]


def _guarded(fn, *args) -> dict:
    """Per-artifact corpus task: input errors become an entry, not an abort."""
    try:
        return fn(*args)
    except InputError as exc:
        return {"artifact": {"path": str(args[0]), "name": Path(args[0]).name}, "error": str(exc)}


# -- scan ------------------------------------------------------------------------------

def scan_artifact(path: Path, s: Settings) -> dict:
    a = _load(path)
    catalog, _, _ = _catalogs(s)
    parsed, problems = parse_classes(a)
    graph = graph_from_classes(parsed.values(), catalog, problems)
    view = serializability(graph)
    names = sorted(view.artifact_names)
    body = {
        "artifact": _describe(path),
        "format": a.format.value,
        "class_entries": len(a.class_entries),
        "classes": len(names),
        "counts": view.counts(),
        "serializable": view.serializable_count,
        "serializable_classes_only": sum(1 for n in names if view.is_serializable(n)
                                         and not graph.nodes[n].is_interface),
        "jcl_interfaces": sorted(jcl_interfaces_of_serializable(graph, view, catalog)),
        "statuses": {n: view.status[n].value for n in names},
        "problems": list(graph.problems),
    }
    if a.class_entries and not parsed:
        body["error"] = "no class entry could be parsed"
    return body


def cmd_scan(args, s: Settings) -> tuple[dict, int]:
    config = {"command": "scan", "platform_catalog": _catalogs(s)[0].fingerprint()}
    target = Path(args.path)
    if target.is_dir():
        results = _run_many(_guarded, [(scan_artifact, p, s) for p in _artifacts_in(target)], args.workers)
        failed = sum(1 for r in results if "error" in r)
        body = {"corpus": str(target), "artifacts": results,
                "summary": {"artifacts": len(results), "failed": failed,
                            "with_serializable": sum(1 for r in results if r.get("serializable", 0) > 0)}}
        return report("scan", config, body), EXIT_INPUT if failed else EXIT_OK
    body = scan_artifact(target, s)
    return report("scan", config, body), EXIT_INPUT if "error" in body else EXIT_OK


# -- diff ------------------------------------------------------------------------------

def cmd_diff(args, s: Settings) -> tuple[dict, int]:
    catalog, _, _ = _catalogs(s)
    sides = {}
    graphs = []
    for label, raw in (("old", args.old), ("new", args.new)):
        path = Path(raw)
        parsed, problems = parse_classes(_load(path))
        g = graph_from_classes(parsed.values(), catalog, problems)
        graphs.append(g)
        sides[label] = {**_describe(path), "serializable": serializability(g).serializable_count,
                        "problems": list(g.problems)}
    events = diff_serializability(*graphs)
    by_kind = {k.value: 0 for k in ChangeKind}
    for e in events:
        by_kind[e.kind.value] += 1
    delta = sides["new"]["serializable"] - sides["old"]["serializable"]
    adds = sum(1 for e in events if e.kind.is_add)
    if delta != adds - (len(events) - adds):
        raise InvariantViolation(f"serializable count changed by {delta} but events sum to {adds - (len(events) - adds)}")
    body = {"old": sides["old"], "new": sides["new"], "count_delta": delta, "by_kind": by_kind,
            "events": [e.to_json() for e in events]}
    config = {"command": "diff", "platform_catalog": catalog.fingerprint()}
    return report("diff", config, body), EXIT_OK


# -- inject ----------------------------------------------------------------------------

def inject_artifact(path: Path, pattern: str, out: Path, s: Settings) -> dict:
    a = _load(path)
    catalog, _, _ = _catalogs(s)
    try:
        modified, rep = inject(a, Pattern(pattern), catalog, s.caller)
    except ArchiveError as exc:
        raise InputError(f"{path}: {type(exc).__name__}: {exc}") from None
    data = write_artifact(modified)
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_bytes(data)
    return {"artifact": _describe(path), "output": _describe(out, data), "injection": rep.to_json()}


def _default_output(path: Path, pattern: str) -> Path:
    return path.with_name(f"{path.stem}.dormant-p{pattern}{path.suffix}")


def _spread(values: list[int]) -> dict:
    if not values:
        return {"min": 0, "max": 0, "mean": 0.0, "std": 0.0}
    return {"min": min(values), "max": max(values), "mean": round(statistics.fmean(values), 4),
            "std": round(statistics.pstdev(values), 4)}


def cmd_inject(args, s: Settings) -> tuple[dict, int]:
    config = {"command": "inject", "pattern": args.pattern, "caller": s.caller,
              "platform_catalog": _catalogs(s)[0].fingerprint()}
    target = Path(args.path)
    if target.is_dir():
        out_dir = Path(args.archive_out) if args.archive_out else target.with_name(target.name + "-injected")
        tasks = [(inject_artifact, p, args.pattern, out_dir / args.pattern / p.name, s) for p in _artifacts_in(target)]
        results = _run_many(_guarded, tasks, args.workers)
        ok = [r for r in results if "error" not in r]
        summary = {
            key: _spread([r["injection"][key]["count"] for r in ok])
            for key in ("classes_modified", "constants_extracted", "caller_interfaces")
        }
        summary.update(artifacts=len(results), failed=len(results) - len(ok))
        body = {"corpus": str(target), "output_dir": str(out_dir / args.pattern), "artifacts": results,
                "summary": summary}
        return report("inject", config, body), EXIT_INPUT if len(ok) < len(results) else EXIT_OK
    out = Path(args.archive_out) if args.archive_out else _default_output(target, args.pattern)
    return report("inject", config, inject_artifact(target, args.pattern, out, s)), EXIT_OK


# -- detect / delta ----------------------------------------------------------------------

def detect_artifact(path: Path, s: Settings) -> dict:
    a = _load(path)
    catalog, entries, sinks = _catalogs(s)
    cg = build_callgraph(a, None, catalog)
    chains = filter_by_sinks(find_chains(cg, entries, sinks, s.max_depth),
                             "all" if s.all_sinks else "kept-only", sinks)
    return {
        "artifact": _describe(path),
        "graph": {"methods": len(cg.nodes), "edges": len(cg.edges), "entries": len(entry_methods(cg, entries)),
                  "unresolved_sites": len(cg.unresolved_sites)},
        "count": len(chains),
        "chains": [c.to_json() for c in chains],
    }


def cmd_detect(args, s: Settings) -> tuple[dict, int]:
    config = {"command": "detect", **analysis_config(s)}
    target = Path(args.path)
    if target.is_dir():
        results = _run_many(_guarded, [(detect_artifact, p, s) for p in _artifacts_in(target)], args.workers)
        failed = sum(1 for r in results if "error" in r)
        body = {"corpus": str(target), "artifacts": results,
                "summary": {"artifacts": len(results), "failed": failed,
                            "with_chains": sum(1 for r in results if r.get("count", 0) > 0),
                            "chains": sum(r.get("count", 0) for r in results)}}
        return report("detect", config, body), EXIT_INPUT if failed else EXIT_OK
    return report("detect", config, detect_artifact(target, s)), EXIT_OK


def _side(path: Path, s: Settings, current_digest: str) -> tuple[list[GadgetChain], dict]:
    """Chains for one side of a delta: a stored detect report or an archive."""
    if path.suffix.lower() == ".json":
        try:
            data = json.loads(path.read_text(encoding="utf-8"))
        except (OSError, ValueError) as exc:
            raise InputError(f"{path}: {exc}") from None
        if data.get("schema") != "dormant.detect/1" or "chains" not in data:
            raise InputError(f"{path}: not a single-artifact detect report")
        chains = [GadgetChain.from_json(c) for c in data["chains"]]
        return chains, {"path": str(path), "report": True, "config_digest": data.get("config_digest"),
                        "count": len(chains)}
    result = detect_artifact(path, s)
    chains = [GadgetChain.from_json(c) for c in result["chains"]]
    return chains, {**result["artifact"], "report": False, "config_digest": current_digest, "count": len(chains)}


def delta_pair(original: Path, modified: Path, s: Settings) -> dict:
    current = digest({"command": "detect", **analysis_config(s)})
    before, left = _side(original, s, current)
    after, right = _side(modified, s, current)
    if left["config_digest"] != right["config_digest"]:
        raise ConfigMismatch(f"configuration digests differ: {left['config_digest']} vs {right['config_digest']}")
    new = diff_chains(before, after, (s.caller,))
    return {"original": left, "modified": right, "count": len(new), "delta": [c.to_json() for c in new]}


def _delta_groups(mod_dir: Path) -> dict[str, Path]:
    subdirs = {d.name: d for d in mod_dir.iterdir() if d.is_dir() and d.name in PATTERN_DIRS}
    return dict(sorted(subdirs.items())) if subdirs else {"modified": mod_dir}


def cmd_delta(args, s: Settings) -> tuple[dict, int]:
    config = {"command": "delta", "caller": s.caller, **analysis_config(s)}
    original, modified = Path(args.original), Path(args.modified)
    if original.is_dir() != modified.is_dir():
        raise UsageError("delta needs two files or two directories")
    if not original.is_dir():
        return report("delta", config, delta_pair(original, modified, s)), EXIT_OK

    originals = _artifacts_in(original)
    groups = _delta_groups(modified)
    tasks, keys, warnings = [], [], []
    for group, directory in groups.items():
        for p in originals:
            counterpart = directory / p.name
            if counterpart.is_file():
                tasks.append((delta_pair, p, counterpart, s))
                keys.append(group)
            else:
                warnings.append(f"{group}: no modified counterpart for {p.name}")
    results = _run_many(_guarded, tasks, args.workers)
    per_group: dict[str, list[dict]] = {g: [] for g in groups}
    for key, r in zip(keys, results):
        per_group[key].append(r)
    summary = {}
    failed = 0
    for group, rows in per_group.items():
        ok = [r for r in rows if "error" not in r]
        failed += len(rows) - len(ok)
        hit = sum(1 for r in ok if r["count"] > 0)
        summary[group] = {"dependencies": len(ok), "with_additional": hit,
                          "percent": round(100.0 * hit / len(ok), 2) if ok else 0.0,
                          "new_chains": sum(r["count"] for r in ok)}
    body = {"original": str(original), "modified": str(modified), "groups": per_group, "summary": summary,
            "warnings": warnings}
    return report("delta", config, body), EXIT_INPUT if failed else EXIT_OK


# -- evolve ----------------------------------------------------------------------------

def cmd_evolve(args, s: Settings) -> tuple[dict, int]:
    try:
        rows = load_rows(args.path)
    except OSError as exc:
        raise InputError(f"{args.path}: {exc}") from None
    except EvolutionError as exc:
        raise InputError(f"{args.path}: {exc}") from None
    if not rows:
        raise InputError(f"{args.path}: no rows")
    now_year = args.now_year if args.now_year is not None else max(r.release_date.year for r in rows)
    first, last = args.years
    config = {"command": "evolve", "seed": args.seed, "samples": args.samples, "now_year": now_year,
              "year_range": [first, last]}
    result = analyze(rows, now_year, (first, last), args.samples, args.seed)
    return report("evolve", config, {"input": _describe(Path(args.path)), **result.to_json()}), EXIT_OK


# -- rendering -------------------------------------------------------------------------

def _flatten(value, prefix: str = ""):
    if isinstance(value, dict):
        for k in sorted(value):
            yield from _flatten(value[k], f"{prefix}.{k}" if prefix else str(k))
    elif isinstance(value, list) and any(isinstance(v, (dict, list)) for v in value):
        for i, v in enumerate(value):
            yield from _flatten(v, f"{prefix}[{i}]")
    elif isinstance(value, list):
        yield prefix, ", ".join(str(v) for v in value)
    else:
        yield prefix, "" if value is None else str(value)


def render_table(rep: dict) -> str:
    """Two-column view derived from the JSON report."""
    rows = list(_flatten(rep))
    width = max((len(k) for k, _ in rows), default=0)
    return "\n".join(f"{k.ljust(width)}  {v}" for k, v in rows) + "\n"


def render_json(rep: dict) -> str:
    return json.dumps(rep, sort_keys=True, indent=2, ensure_ascii=False) + "\n"


# -- argument parsing ------------------------------------------------------------------

def _years(text: str) -> tuple[int, int]:
    try:
        first, last = (int(x) for x in text.split("-"))
    except ValueError:
        raise argparse.ArgumentTypeError("expected YYYY-YYYY") from None
    if first > last:
        raise argparse.ArgumentTypeError("empty year range")
    return first, last


def _positive(text: str) -> int:
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError("must be at least 1")
    return value


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--catalog", help="extra platform signatures (.json or a container of class files)")
    common.add_argument("--entries", help="entry-point patterns, one per line")
    common.add_argument("--sinks", help="sink patterns, one per line; a [filtered] line starts the filtered section")
    common.add_argument("--all-sinks", action="store_true", help="keep chains ending in filtered sinks")
    common.add_argument("--max-depth", type=_positive, default=DEFAULT_MAX_DEPTH, help="maximum chain length in frames")
    common.add_argument("--caller", default=DEFAULT_CALLER, help="name of the synthesized Caller class")
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--workers", type=_positive, default=1, help="parallel artifacts in corpus mode")
    common.add_argument("--out", help="write the report here instead of stdout")
    common.add_argument("--format", choices=("json", "table"), default="json")

    parser = _Parser(prog="dormant", description=__doc__)
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("scan", parents=[common], help="serializability summary of an artifact or directory")
    p.add_argument("path")
    p = sub.add_parser("diff", parents=[common], help="serializability change events between two versions")
    p.add_argument("old")
    p.add_argument("new")
    p = sub.add_parser("inject", parents=[common], help="apply a modification pattern")
    p.add_argument("path")
    p.add_argument("--pattern", choices=PATTERN_DIRS, required=True)
    p.add_argument("--archive-out", help="modified archive (directory in corpus mode)")
    p = sub.add_parser("detect", parents=[common], help="gadget chains of an artifact or directory")
    p.add_argument("path")
    p = sub.add_parser("delta", parents=[common], help="chains only present in the modified artifact")
    p.add_argument("original")
    p.add_argument("modified")
    p = sub.add_parser("evolve", parents=[common], help="statistics over a version table (CSV or JSON)")
    p.add_argument("path")
    p.add_argument("--now-year", type=int, help="reference year for recent releases (default: latest in table)")
    p.add_argument("--samples", type=_positive, default=100)
    p.add_argument("--years", type=_years, default=(2015, 2024), help="YYYY-YYYY for the overall correlation")
    return parser


COMMANDS = {"scan": cmd_scan, "diff": cmd_diff, "inject": cmd_inject, "detect": cmd_detect,
            "delta": cmd_delta, "evolve": cmd_evolve}


def main(argv: list[str] | None = None) -> int:
    try:
        args = build_parser().parse_args(argv)
        settings = Settings(args.catalog, args.entries, args.sinks, args.all_sinks, args.max_depth,
                            args.caller.replace(".", "/"))
        rep, code = COMMANDS[args.command](args, settings)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except InputError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except InvariantViolation as exc:
        print(f"internal error: {exc}", file=sys.stderr)
        return EXIT_INTERNAL
    except Exception as exc:  # any other failure is a bug, not bad input
        print(f"internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INTERNAL

    text = render_table(rep) if args.format == "table" else render_json(rep)
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)
    return code


if __name__ == "__main__":
    sys.exit(main())
