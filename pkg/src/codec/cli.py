"""Command-line surface: JSONL projection, synthetic-suite generation,
benchmark harness, and the brute-force oracle.

Input records are one JSON object per line:
    {"id": ..., "source_tokens": [...], "spans": [{"start","end","label"}],
     "template_tokens": [...], "span_translations": [...]?}
Output records mirror the same id order; see README for the full schema.
"""

from __future__ import annotations

import json
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import replace
from math import isfinite
from time import perf_counter

import click
import numpy as np

from .bridge import BridgeScorer
from .pipeline import PipelineConfig, ProjectionResult, project
from .pruning import PruneConfig
from .rerank import FilterConfig
from .scorer import (
    DEFAULT_PLANTED_SPIKE,
    DEFAULT_PLANTED_WORDS,
    PlantedAlignmentScorer,
    load_table_fixture,
    make_planted_vocab,
)
from .search import SearchConfig
from .types import (
    CapacityError,
    LabeledSpan,
    Placement,
    SourceExample,
    Template,
    Vocabulary,
)

DELTA_DEFAULTS = {"train": 1.0, "test": 5.0}
BRIDGE_URL_ENV = "CODEC_BRIDGE_URL"
DEFAULT_BENCH_CONFIGS = \
    "exact,exact+rerank,delta=1,delta=3,delta=1+prune,delta=3+prune"


class RecordError(ValueError):
    pass


def _parse_record(line: str, vocab: Vocabulary):
    try:
        obj = json.loads(line)
    except json.JSONDecodeError as e:
        raise RecordError(f"invalid JSON: {e}") from None
    if not isinstance(obj, dict):
        raise RecordError("record must be a JSON object")
    try:
        rid = obj["id"]
        tokens = vocab.encode(obj["source_tokens"])
        spans = tuple(LabeledSpan(int(s["start"]), int(s["end"]),
                                  str(s["label"]))
                      for s in obj["spans"])
        template = Template(vocab.encode(obj["template_tokens"]))
    except RecordError:
        raise
    except Exception as e:
        raise RecordError(f"bad record: {e}") from None
    try:
        example = SourceExample(tokens=tokens, spans=spans)
    except ValueError as e:
        raise RecordError(str(e)) from None
    return rid, example, template, obj.get("span_translations")


def _collect_surfaces(lines):
    surfaces = []
    for line in lines:
        try:
            obj = json.loads(line)
        except json.JSONDecodeError:
            continue
        if isinstance(obj, dict):
            surfaces.extend(obj.get("source_tokens") or [])
            surfaces.extend(obj.get("template_tokens") or [])
    return surfaces


def _parse_planted_spec(parts):
    seed = int(parts[0])
    noise = float(parts[1]) if len(parts) > 1 else 0.0
    spike = float(parts[2]) if len(parts) > 2 else DEFAULT_PLANTED_SPIKE
    words = int(parts[3]) if len(parts) > 3 else DEFAULT_PLANTED_WORDS
    return seed, noise, spike, words


def make_scorer(spec: str, lines, bridge_url: str | None = None,
                seed: int | None = None):
    """Build (vocab, scorer) from a --scorer spec string."""
    if spec is None:
        raise click.UsageError("--scorer is required "
                               "(planted:<seed> | table:<path> | bridge:<url>)")
    kind, _, rest = spec.partition(":")
    if kind == "planted":
        pseed, noise, spike, words = _parse_planted_spec(rest.split(":"))
        vocab = make_planted_vocab(words)
        return vocab, PlantedAlignmentScorer(vocab, words, seed=pseed,
                                             spike=spike, noise=noise)
    if kind == "table":
        path = rest
        file_surfaces = []
        with open(path, encoding="utf-8") as fh:
            for raw in fh:
                raw = raw.rstrip("\n")
                if not raw or raw.startswith("#"):
                    continue
                fields = raw.split("\t")
                if len(fields) == 4:
                    for key in fields[:2]:
                        if key:
                            file_surfaces.extend(key.split(" "))
                    file_surfaces.append(fields[2])
        vocab = Vocabulary.build(file_surfaces + _collect_surfaces(lines))
        return vocab, load_table_fixture(path, vocab, seed=seed)
    if kind == "bridge":
        url = rest or bridge_url or os.environ.get(BRIDGE_URL_ENV)
        if not url:
            raise click.UsageError(
                f"bridge scorer needs a URL (--bridge-url or {BRIDGE_URL_ENV})")
        vocab = Vocabulary.build(_collect_surfaces(lines))
        return vocab, BridgeScorer(vocab, url=url)
    raise click.UsageError(f"unknown scorer spec: {spec!r}")


def _score_or_null(x):
    if x is None or not isfinite(x):
        return None
    return x


def result_record(rid, res: ProjectionResult, timing: bool) -> dict:
    spans = []
    for p in res.spans:
        spans.append({
            "open_gap": p.placement.open_gap if p.placement else None,
            "close_gap": p.placement.close_gap if p.placement else None,
            "label": p.label,
            "hyp_score": _score_or_null(p.hyp_score),
            "span_score": _score_or_null(p.span_score),
            "topk": [{"open_gap": pl.open_gap, "close_gap": pl.close_gap,
                      "score": s} for pl, s in p.topk],
        })
    d = res.diagnostics
    return {
        "id": rid,
        "status": res.status,
        "projected_spans": spans,
        "diagnostics": {
            "nodes_expanded": d.nodes_expanded,
            "scorer_calls": d.scorer_calls,
            "bound_pruned": d.bound_pruned,
            "gap_pruned": d.gap_pruned,
            "wall_ms": round(d.wall_time * 1000, 3) if timing else None,
        },
    }


def build_pipeline_config(*, search: str, mode: str, k: int,
                          delta: float | None, alpha1: float, alpha2: float,
                          sigma: int, batch_size: int, beam: int,
                          no_prune: bool, no_rerank: bool, no_filter: bool,
                          allow_empty: bool,
                          lex_threshold: float = 0.5,
                          span_threshold: float = -5.0) -> PipelineConfig:
    if delta is None:
        delta = DELTA_DEFAULTS[mode]
    if search == "codec":
        engine, bound = "dfs", "heuristic"
        prune_enabled = not no_prune
        rerank = not no_rerank
    elif search == "exact":
        engine, bound = "dfs", "exact"
        prune_enabled = False
        rerank = not no_rerank
    elif search == "csbs":
        engine, bound = "csbs", "heuristic"
        prune_enabled = False
        rerank = False
    elif search == "oracle":
        engine, bound = "oracle", "exact"
        prune_enabled = False
        rerank = False
    else:
        raise click.UsageError(f"unknown search mode {search!r}")
    return PipelineConfig(
        mode=mode,
        search=SearchConfig(k=k, delta=delta, bound_mode=bound,
                            batch_size=batch_size,
                            allow_empty_spans=allow_empty),
        prune=PruneConfig(alpha1=alpha1, alpha2=alpha2, sigma=sigma,
                          enabled=prune_enabled),
        filter=FilterConfig(lexical_threshold=lex_threshold,
                            span_logprob_threshold=span_threshold,
                            enabled=(mode == "train" and not no_filter)),
        rerank_enabled=rerank,
        engine=engine,
        beam_size=beam,
    )


def run_records(lines, vocab, scorer, cfg: PipelineConfig, workers: int,
                timing: bool, out, err=None):
    """Project every well-formed record, preserving input order.

    Returns 2 if any line was malformed, else 0.
    """
    err = err or sys.stderr
    exit_code = 0
    parsed = []
    for lineno, line in enumerate(lines, 1):
        if not line.strip():
            continue
        try:
            parsed.append(_parse_record(line, vocab))
        except RecordError as e:
            print(f"line {lineno}: {e}", file=err)
            exit_code = 2

    def run_one(rec):
        rid, example, template, translations = rec
        res = project(vocab, example, template, scorer, cfg,
                      span_translations=translations)
        return result_record(rid, res, timing)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            records = list(pool.map(run_one, parsed))
    else:
        records = [run_one(rec) for rec in parsed]
    for rec in records:
        out.write(json.dumps(rec) + "\n")
    return exit_code


def _common_search_options(f):
    options = [
        click.option("--mode", type=click.Choice(["train", "test"]),
                     default="test", show_default=True),
        click.option("--k", type=int, default=5, show_default=True),
        click.option("--delta", type=float, default=None,
                     help="heuristic bound offset; default 1 (train) / 5 "
                          "(test); inf reproduces the exact bound"),
        click.option("--alpha1", type=float, default=0.5, show_default=True),
        click.option("--alpha2", type=float, default=0.1, show_default=True),
        click.option("--sigma", type=int, default=5, show_default=True),
        click.option("--batch-size", type=int, default=16, show_default=True),
        click.option("--beam", type=int, default=16, show_default=True,
                     help="beam width for --search csbs"),
        click.option("--search", "search_mode",
                     type=click.Choice(["codec", "exact", "csbs", "oracle"]),
                     default="codec", show_default=True),
        click.option("--no-prune", is_flag=True),
        click.option("--no-rerank", is_flag=True),
        click.option("--no-filter", is_flag=True),
        click.option("--allow-empty-spans", is_flag=True),
        click.option("--lex-threshold", type=float, default=0.5,
                     show_default=True),
        click.option("--span-threshold", type=float, default=-5.0,
                     show_default=True),
        click.option("--scorer", "scorer_spec", type=str, default=None),
        click.option("--bridge-url", type=str, default=None),
        click.option("--workers", type=int, default=1, show_default=True),
        click.option("--seed", type=int, default=None),
        click.option("--timing", is_flag=True,
                     help="emit wall_ms in diagnostics (non-deterministic)"),
    ]
    for opt in reversed(options):
        f = opt(f)
    return f


@click.group()
def cli():
    """Marker projection into fixed translation templates."""


@cli.command("project")
@_common_search_options
@click.option("-o", "--output", type=click.Path(), default=None)
@click.argument("infile", type=click.File("r"), default="-")
def cmd_project(mode, k, delta, alpha1, alpha2, sigma, batch_size, beam,
                search_mode, no_prune, no_rerank, no_filter,
                allow_empty_spans, lex_threshold, span_threshold,
                scorer_spec, bridge_url, workers, seed, timing,
                output, infile):
    """Project labeled spans for every JSONL record on stdin/INFILE."""
    lines = infile.read().splitlines()
    vocab, scorer = make_scorer(scorer_spec, lines, bridge_url, seed)
    cfg = build_pipeline_config(
        search=search_mode, mode=mode, k=k, delta=delta, alpha1=alpha1,
        alpha2=alpha2, sigma=sigma, batch_size=batch_size, beam=beam,
        no_prune=no_prune, no_rerank=no_rerank, no_filter=no_filter,
        allow_empty=allow_empty_spans, lex_threshold=lex_threshold,
        span_threshold=span_threshold)
    out = open(output, "w", encoding="utf-8") if output else sys.stdout
    try:
        code = run_records(lines, vocab, scorer, cfg, workers, timing, out)
    finally:
        if output:
            out.close()
    return code


@cli.command("oracle")
@click.option("--k", type=int, default=5, show_default=True)
@click.option("--allow-empty-spans", is_flag=True)
@click.option("--scorer", "scorer_spec", type=str, default=None)
@click.option("--bridge-url", type=str, default=None)
@click.option("--workers", type=int, default=1, show_default=True)
@click.option("--seed", type=int, default=None)
@click.option("--timing", is_flag=True)
@click.option("-o", "--output", type=click.Path(), default=None)
@click.argument("infile", type=click.File("r"), default="-")
def cmd_oracle(k, allow_empty_spans, scorer_spec, bridge_url, workers, seed,
               timing, output, infile):
    """Exhaustively enumerate and rank the whole placement space."""
    lines = infile.read().splitlines()
    vocab, scorer = make_scorer(scorer_spec, lines, bridge_url, seed)
    cfg = build_pipeline_config(
        search="oracle", mode="test", k=k, delta=None, alpha1=0.5,
        alpha2=0.1, sigma=5, batch_size=16, beam=16, no_prune=True,
        no_rerank=True, no_filter=True, allow_empty=allow_empty_spans)
    out = open(output, "w", encoding="utf-8") if output else sys.stdout
    try:
        code = run_records(lines, vocab, scorer, cfg, workers, timing, out)
    except CapacityError as e:
        click.echo(f"error: {e}", err=True)
        return 1
    finally:
        if output:
            out.close()
    return code


@cli.command("gen")
@click.option("--seed", type=int, required=True)
@click.option("--count", type=int, default=100, show_default=True)
@click.option("--n-min", type=int, default=4, show_default=True)
@click.option("--n-max", type=int, default=10, show_default=True)
@click.option("--noise", type=float, default=0.0, show_default=True)
@click.option("--spike", type=float, default=DEFAULT_PLANTED_SPIKE,
              show_default=True)
@click.option("--words", type=int, default=DEFAULT_PLANTED_WORDS,
              show_default=True)
@click.option("--max-spans", type=int, default=1, show_default=True)
@click.option("-o", "--output", type=click.Path(), required=True)
@click.option("--gold", "gold_path", type=click.Path(), default=None,
              help="sidecar file of gold placements (default: OUTPUT.gold)")
def cmd_gen(seed, count, n_min, n_max, noise, spike, words, max_spans,
            output, gold_path):
    """Generate a reproducible planted suite plus its gold sidecar.

    Project the suite with --scorer planted:SEED[:NOISE[:SPIKE[:WORDS]]]
    using the same values to evaluate against the gold placements.
    """
    if count < 1:
        raise click.UsageError("--count must be >= 1")
    labels = ("PER", "ORG", "LOC")
    rng = np.random.default_rng(seed)
    gold_path = gold_path or output + ".gold"
    with open(output, "w", encoding="utf-8") as out, \
            open(gold_path, "w", encoding="utf-8") as gold_out:
        for i in range(count):
            n = int(rng.integers(n_min, n_max + 1))
            src = [f"s{int(rng.integers(0, words))}" for _ in range(n)]
            m = 1 if max_spans <= 1 else int(rng.integers(1, max_spans + 1))
            m = min(m, (n + 1) // 2)
            bounds = sorted(int(b) for b in
                            rng.choice(n + 1, size=2 * m, replace=False))
            spans = [{"start": bounds[2 * j], "end": bounds[2 * j + 1],
                      "label": labels[j % len(labels)]}
                     for j in range(m)]
            template = [f"t{s[1:]}" for s in src]
            record = {
                "id": f"ex{i:05d}",
                "source_tokens": src,
                "spans": spans,
                "template_tokens": template,
                "span_translations": [
                    " ".join(template[s["start"]:s["end"]]) for s in spans],
            }
            out.write(json.dumps(record) + "\n")
            gold_out.write(json.dumps({
                "id": record["id"],
                "gold": [{"open_gap": s["start"], "close_gap": s["end"]}
                         for s in spans],
            }) + "\n")
    return 0


def parse_bench_config(name: str):
    """Map an ablation-arm name to (search, delta, prune, rerank, beam)."""
    name = name.strip()
    if name == "exact":
        return dict(search="exact", delta=None, prune=False, rerank=False,
                    beam=None)
    if name == "exact+rerank":
        return dict(search="exact", delta=None, prune=False, rerank=True,
                    beam=None)
    if name.startswith("csbs"):
        _, _, b = name.partition("=")
        return dict(search="csbs", delta=None, prune=False, rerank=False,
                    beam=int(b) if b else 16)
    if name.startswith("delta="):
        body = name[len("delta="):]
        prune = body.endswith("+prune")
        if prune:
            body = body[:-len("+prune")]
        return dict(search="codec", delta=float(body), prune=prune,
                    rerank=True, beam=None)
    raise click.UsageError(f"unknown bench config {name!r}")


@cli.command("bench")
@click.option("--suite", type=click.Path(exists=True), required=True)
@click.option("--gold", "gold_path", type=click.Path(exists=True),
              required=True)
@click.option("--configs", type=str, default=DEFAULT_BENCH_CONFIGS,
              show_default=True)
@click.option("--scorer", "scorer_spec", type=str, required=True)
@click.option("--k", type=int, default=5, show_default=True)
@click.option("--batch-size", type=int, default=16, show_default=True)
@click.option("--alpha1", type=float, default=0.5, show_default=True)
@click.option("--alpha2", type=float, default=0.1, show_default=True)
@click.option("--sigma", type=int, default=5, show_default=True)
@click.option("--allow-empty-spans", is_flag=True)
@click.option("-o", "--output", type=click.Path(), default=None,
              help="write the machine-readable report as JSON")
def cmd_bench(suite, gold_path, configs, scorer_spec, k, batch_size,
              alpha1, alpha2, sigma, allow_empty_spans, output):
    """Run ablation arms over a suite and report accuracy and cost."""
    with open(suite, encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    gold = {}
    with open(gold_path, encoding="utf-8") as fh:
        for line in fh:
            if line.strip():
                obj = json.loads(line)
                gold[obj["id"]] = [Placement(g["open_gap"], g["close_gap"])
                                   for g in obj["gold"]]
    vocab, scorer = make_scorer(scorer_spec, lines)
    parsed = [_parse_record(line, vocab) for line in lines if line.strip()]
    for rid, _ex, _t, _tr in parsed:
        if rid not in gold:
            raise click.UsageError(f"no gold entry for record {rid!r}")

    rows = []
    for name in configs.split(","):
        arm = parse_bench_config(name)
        cfg = build_pipeline_config(
            search=arm["search"], mode="test", k=k, delta=arm["delta"],
            alpha1=alpha1, alpha2=alpha2, sigma=sigma, batch_size=batch_size,
            beam=arm["beam"] or 16, no_prune=not arm["prune"],
            no_rerank=not arm["rerank"], no_filter=True,
            allow_empty=allow_empty_spans)
        total = correct = in_topk = 0
        nodes = calls = 0
        wall = 0.0
        for rid, example, template, translations in parsed:
            t0 = perf_counter()
            res = project(vocab, example, template, scorer, cfg)
            wall += perf_counter() - t0
            nodes += res.diagnostics.nodes_expanded
            calls += res.diagnostics.scorer_calls
            for p, g in zip(res.spans, gold[rid]):
                total += 1
                if p.placement == g:
                    correct += 1
                if any(pl == g for pl, _s in p.topk):
                    in_topk += 1
        count = len(parsed)
        rows.append({
            "config": name.strip(),
            "gold_top1_accuracy": correct / total if total else 1.0,
            "gold_in_topk_rate": in_topk / total if total else 1.0,
            "mean_nodes": nodes / count,
            "mean_scorer_calls": calls / count,
            "mean_wall_ms": 1000.0 * wall / count,
        })

    header = (f"{'config':<16} {'top1':>7} {'in_topk':>8} "
              f"{'nodes':>9} {'calls':>9} {'ms':>8}")
    click.echo(header)
    for r in rows:
        click.echo(f"{r['config']:<16} {r['gold_top1_accuracy']:>7.3f} "
                   f"{r['gold_in_topk_rate']:>8.3f} {r['mean_nodes']:>9.1f} "
                   f"{r['mean_scorer_calls']:>9.1f} "
                   f"{r['mean_wall_ms']:>8.2f}")
    if output:
        with open(output, "w", encoding="utf-8") as fh:
            json.dump({"rows": rows}, fh, indent=2)
            fh.write("\n")
    return 0


def main(argv=None):
    try:
        rv = cli.main(args=argv, standalone_mode=False)
    except click.UsageError as e:
        click.echo(f"error: {e.format_message()}", err=True)
        return 1
    except click.ClickException as e:
        e.show()
        return 1
    except click.Abort:
        return 1
    return rv if isinstance(rv, int) else 0


if __name__ == "__main__":
    sys.exit(main())
