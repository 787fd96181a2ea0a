"""Command-line entry point: ``seqrec-audit {stats,eval,diagnose,split,convert-embeddings}``.

Exit codes: 0 success, 1 usage/config error, 2 data error, 3 internal error.
"""
from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import fields
from pathlib import Path

from . import __version__
from .config import RunConfig
from .errors import AuditError, ConfigError, DataError

_log = logging.getLogger("seqrec_audit")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigError(f"{self.prog}: {message}")


def _column(value: str):
    return int(value) if value.isdigit() else value


def _int_list(value: str) -> list[int]:
    try:
        return [int(v) for v in value.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {value!r}") from None


def _str_list(value: str) -> list[str]:
    return [v.strip() for v in value.split(",") if v.strip()]


def _data_options(p: argparse.ArgumentParser, embeddings: bool = True) -> None:
    g = p.add_argument_group("data")
    g.add_argument("--config", help="JSON config file; flags override its values")
    g.add_argument("--interactions", help="delimiter-separated interaction log")
    if embeddings:
        g.add_argument("--embeddings", help="item embeddings (text or SRAE binary)")
        g.add_argument("--embedding-sep", help="text embedding separator (default: whitespace)")
        g.add_argument("--allow-missing-embeddings", action=argparse.BooleanOptionalAction, default=None,
                       help="use flagged zero vectors for items without an embedding")
    g.add_argument("--out", dest="output_dir", help="output directory")
    g.add_argument("--name", help="dataset label used in reports")
    g.add_argument("--delimiter", help="interaction file delimiter (default: tab)")
    g.add_argument("--user-col", type=_column, help="user column name or 0-based position")
    g.add_argument("--item-col", type=_column, help="item column name or 0-based position")
    g.add_argument("--time-col", type=_column, help="timestamp column name or 0-based position")
    g.add_argument("--header", action=argparse.BooleanOptionalAction, default=None,
                   help="input has a header row (default: only when columns are named)")
    g.add_argument("--lenient", action=argparse.BooleanOptionalAction, default=None,
                   help="skip malformed rows instead of aborting")
    g.add_argument("--min-len", type=int, help="drop users with fewer interactions (>= 3)")
    g.add_argument("--max-len", type=int, help="keep only the most recent N items per user")
    g.add_argument("--min-item-count", type=int, help="iteratively drop rarer items (0 = off)")
    g.add_argument("--max-hop", type=int, help="largest hop for coverage and hop buckets (default 3)")
    g.add_argument("--seed", type=int, help="64-bit seed for every random choice")
    g.add_argument("--threads", type=int, help="parallel users during prediction (env SEQREC_AUDIT_THREADS)")


def _model_options(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("models")
    g.add_argument("--models", type=_str_list,
                   help="comma list of tgh1,tgh2,semnn,idlast,idsem,count-last,external:<file>")
    g.add_argument("--ks", type=_int_list, help="cutoffs, default 1,5,10")
    g.add_argument("--overlap-k", type=int, help="K for overlap and hop-bucket analyses (default 10)")
    g.add_argument("--tgh-alpha", type=float, help="TGH edge-bonus weight (default 0.5)")
    g.add_argument("--exclude-history", action=argparse.BooleanOptionalAction, default=None,
                   help="drop items already in the context from TGH candidates")
    g.add_argument("--bpr-dim", type=int)
    g.add_argument("--bpr-epochs", type=int)
    g.add_argument("--bpr-lr", type=float)
    g.add_argument("--bpr-negatives", type=int)
    g.add_argument("--bpr-reg", type=float)
    g.add_argument("--bpr-sampler", choices=["uniform", "popularity"])
    g.add_argument("--fusion-id-weight", type=float)
    g.add_argument("--fusion-sem-weight", type=float)


def _config_from_args(args: argparse.Namespace) -> RunConfig:
    base = RunConfig.from_file(args.config) if getattr(args, "config", None) else RunConfig()
    names = {f.name for f in fields(RunConfig)}
    overrides = {k: v for k, v in vars(args).items() if k in names and v is not None}
    cfg = base.override(**overrides)
    return cfg.validate()


def _echo_config(cfg: RunConfig, out: Path) -> None:
    out.mkdir(parents=True, exist_ok=True)
    (out / "config.json").write_text(cfg.to_json(), encoding="utf-8")


def cmd_stats(cfg: RunConfig) -> int:
    from .graph import save_graph, write_stats_report
    from .pipeline import compute_stats, prepare

    prep = prepare(cfg, with_embeddings=False)
    stats = compute_stats(prep)
    out = Path(cfg.output_dir)
    _echo_config(cfg, out)
    write_stats_report(stats, out, cfg.name)
    save_graph(prep.graph, out / "graph.srtg")
    print((out / "stats.txt").read_text(encoding="utf-8"), end="")
    return 0


def cmd_eval(cfg: RunConfig) -> int:
    from .baselines import save_id_last
    from .metrics import format_metrics_text, write_metrics_report, write_predictions
    from .pipeline import needs_embeddings, prepare, run_models

    prep = prepare(cfg, with_embeddings=needs_embeddings(cfg.models))
    preds, tables = run_models(prep, cfg.models)
    out = Path(cfg.output_dir)
    _echo_config(cfg, out)
    pred_dir = out / "predictions"
    pred_dir.mkdir(parents=True, exist_ok=True)
    for p in preds:
        write_predictions(p, pred_dir / f"{p.model}.tsv")
    if prep._id_last is not None:
        save_id_last(prep._id_last, prep.split.vocab, out / "idlast.ckpt")
    write_metrics_report(tables, out)
    print(format_metrics_text(tables), end="")
    return 0


def cmd_diagnose(cfg: RunConfig) -> int:
    from .diagnostics import write_audit
    from .metrics import format_metrics_text
    from .pipeline import audit

    report = audit(cfg)
    out = Path(cfg.output_dir)
    _echo_config(cfg, out)
    write_audit(report, out, cfg.name)
    print(format_metrics_text(report.probes), end="")
    print(f"audit written to {out / 'audit.md'}")
    return 0


def cmd_split(cfg: RunConfig) -> int:
    from .corpus import write_split
    from .pipeline import prepare

    prep = prepare(cfg, with_embeddings=False)
    out = Path(cfg.output_dir)
    _echo_config(cfg, out)
    for path in write_split(prep.split, out):
        print(path)
    return 0


def cmd_convert_embeddings(args: argparse.Namespace) -> int:
    import numpy as np

    from .embeddings import EmbeddingMatrix, normalize_rows, read_embedding_file, write_embedding_binary, \
        write_embedding_text

    ids, vecs = read_embedding_file(args.input, sep=args.sep)
    if args.normalize:
        m = normalize_rows(EmbeddingMatrix(np.asarray(vecs, dtype=np.float64)))
        vecs = m.vectors
        if m.zero_rows.any():
            _log.warning("%d all-zero rows left unnormalized", int(m.zero_rows.sum()))
    to = args.to or ("text" if Path(args.output).suffix in (".txt", ".tsv") else "binary")
    if to == "binary":
        write_embedding_binary(args.output, ids, vecs)
    else:
        write_embedding_text(args.output, ids, vecs, sep=args.sep or " ")
    print(f"wrote {len(ids)} x {vecs.shape[1]} embeddings to {args.output} ({to})")
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="seqrec-audit", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    p.add_argument("-v", "--verbose", action="count", default=0)
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("stats", help="transition-graph statistics and coverage")
    _data_options(s, embeddings=False)
    s = sub.add_parser("eval", help="evaluate models under leave-one-out")
    _data_options(s)
    _model_options(s)
    s = sub.add_parser("diagnose", help="full shortcut audit report")
    _data_options(s)
    _model_options(s)
    s = sub.add_parser("split", help="write the leave-one-out split for external trainers")
    _data_options(s, embeddings=False)
    s = sub.add_parser("convert-embeddings", help="convert embeddings between text and SRAE binary")
    s.add_argument("input")
    s.add_argument("output")
    s.add_argument("--to", choices=["text", "binary"], help="output format (default: from the extension)")
    s.add_argument("--normalize", action="store_true", help="L2-normalize rows first")
    s.add_argument("--sep", help="text separator (default: whitespace in, space out)")
    return p


COMMANDS = {"stats": cmd_stats, "eval": cmd_eval, "diagnose": cmd_diagnose, "split": cmd_split}


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except ConfigError as err:
        print(f"error: {err}", file=sys.stderr)
        return 1
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2),
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "convert-embeddings":
            return cmd_convert_embeddings(args)
        return COMMANDS[args.command](_config_from_args(args))
    except AuditError as err:
        kind = "config" if isinstance(err, ConfigError) else "data" if isinstance(err, DataError) else "internal"
        print(f"{kind} error: {err}", file=sys.stderr)
        return err.exit_code
    except Exception as err:  # noqa: BLE001
        _log.debug("internal error", exc_info=True)
        print(f"internal error: {type(err).__name__}: {err}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
