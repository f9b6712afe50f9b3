"""Command-line interface: ``proofsts <command> [options]``.

Exit codes: 0 success, 1 usage error, 2 data error.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import sys
from typing import Dict, List, Optional

import numpy as np

from . import __version__
from .corpus import CorpusError, RunConfig, load_corpus
from .formula import And
from .features import FeatureExtractor, SchemaError, feature_schema, schema_hash
from .forest import ForestRegressor, ModelError, grid_search
from .lexicon import Lexicon, LexiconError
from .metrics import baseline_predictions, metrics
from .oracle import SignatureTooLarge, entails_bounded, satisfiable_bounded
from .pipeline import file_sha256, prove_corpus
from .prover import BidirectionalResult, Status

logger = logging.getLogger("proofsts")

EXIT_OK, EXIT_USAGE, EXIT_DATA = 0, 1, 2


class DataError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


# ---------------------------------------------------------------------------
# Provenance and file helpers
# ---------------------------------------------------------------------------


def _config(args) -> RunConfig:
    config = RunConfig.load(args.config) if getattr(args, "config", None) else RunConfig()
    if getattr(args, "seed", None) is not None:
        config.seed = args.seed
    return config


def _provenance(config: RunConfig, inputs: Dict[str, Optional[str]]) -> Dict:
    return {
        "tool": f"proofsts {__version__}",
        "config": config.to_dict(),
        "inputs": {name: file_sha256(path) for name, path in sorted(inputs.items()) if path},
    }


def _write_text(path, text):
    if path in (None, "-"):
        sys.stdout.write(text)
    else:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)


def _dump(obj) -> str:
    return json.dumps(obj, sort_keys=True)


def _read_jsonl(path):
    records = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                records.append(json.loads(line))
    return records


def _read_proofs(path):
    records = _read_jsonl(path)
    if records and records[0].get("type") == "provenance":
        records = records[1:]
    return {r["id"]: r for r in records}


def _write_csv(path, provenance, header, rows):
    buf = io.StringIO()
    buf.write("# " + _dump(provenance) + "\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([row[0]] + [repr(float(v)) for v in row[1:]])
    _write_text(path, buf.getvalue())


def _read_csv(path):
    with open(path, encoding="utf-8") as fh:
        lines = [l for l in fh if not l.startswith("#")]
    reader = csv.reader(lines)
    header = next(reader)
    ids, rows = [], []
    for rec in reader:
        ids.append(rec[0])
        rows.append([float(v) for v in rec[1:]])
    return header[1:], ids, np.array(rows, dtype=float).reshape(len(rows), len(header) - 1)


def _load_corpus(args, config):
    entries, errors = load_corpus(args.corpus, tuple(config.score_range))
    for err in errors:
        logger.warning("corpus line %d (%s): %s", err.line, err.id, err.message)
    return entries, errors


def _load_kb(path):
    return Lexicon.load(path) if path else Lexicon()


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------


def cmd_prove(args) -> int:
    config = _config(args)
    entries, errors = _load_corpus(args, config)
    lex = _load_kb(args.kb)
    records = prove_corpus(entries, lex, config.prover_config(), args.jobs)
    records += [err.to_dict() for err in errors]
    lines = [_dump({"type": "provenance", **_provenance(config, {"corpus": args.corpus, "kb": args.kb})})]
    lines += [_dump(r) for r in records]
    _write_text(args.out, "\n".join(lines) + "\n")
    failed = sum(1 for r in records if "error" in r)
    logger.info("proved %d pairs, %d errors", len(entries), failed)
    return EXIT_OK


def _matched_results(entries, proofs):
    missing = [e.id for e in entries if e.id not in proofs or "error" in proofs[e.id]]
    if missing:
        raise DataError(f"no proof for ids: {', '.join(missing)}")
    return [(e, BidirectionalResult.from_dict(proofs[e.id])) for e in entries]


def cmd_features(args) -> int:
    config = _config(args)
    entries, _ = _load_corpus(args, config)
    proofs = _read_proofs(args.proofs)
    extra = sorted(set(proofs) - {e.id for e in entries})
    if extra:
        raise DataError(f"proof ids not in corpus: {', '.join(extra)}")
    pairs = _matched_results(entries, proofs)
    lex = _load_kb(args.kb)
    if args.fit_split:
        train = [p for p in pairs if p[0].split == args.fit_split]
        if not train:
            raise DataError(f"no entries in split {args.fit_split!r}")
        fx = FeatureExtractor(lex, config.disconnected_probability).fit(train)
        with open(args.scaler, "w", encoding="utf-8") as fh:
            fh.write(_dump({**fx.to_dict(), "provenance": _provenance(config, {"corpus": args.corpus, "proofs": args.proofs, "kb": args.kb})}))
    else:
        with open(args.scaler, encoding="utf-8") as fh:
            fx = FeatureExtractor.from_dict(json.load(fh), lex)
    X = fx.transform(pairs)
    prov = _provenance(config, {"corpus": args.corpus, "proofs": args.proofs, "kb": args.kb, "scaler": args.scaler})
    prov["schema_hash"] = schema_hash()
    _write_csv(args.out, prov, ["id"] + feature_schema(), [[e.id, *row] for (e, _), row in zip(pairs, X)])
    return EXIT_OK


def _split_rows(args, config, names, ids, X):
    if names != feature_schema():
        raise SchemaError("feature file was written with a different schema")
    entries, _ = _load_corpus(args, config)
    by_id = {e.id: e for e in entries}
    missing = [i for i in ids if i not in by_id]
    if missing:
        raise DataError(f"ids missing from corpus: {', '.join(missing)}")
    split = args.split or config.train_split
    keep = [k for k, i in enumerate(ids) if split == "all" or by_id[i].split == split]
    if not keep:
        raise DataError(f"no rows in split {split!r}")
    return [ids[k] for k in keep], X[keep], [by_id[ids[k]] for k in keep]


def cmd_train(args) -> int:
    config = _config(args)
    names, ids, X = _read_csv(args.features)
    ids, X, entries = _split_rows(args, config, names, ids, X)
    y = np.array([e.gold_score for e in entries])
    search = grid_search(X, y, config.grid, config.k_folds, config.seed, args.jobs)
    model = ForestRegressor(**search.best_params, random_state=config.seed, n_jobs=args.jobs)
    model.fit(X, y, feature_names=names)
    out = model.to_dict()
    out["grid_scores"] = search.scores
    out["provenance"] = _provenance(config, {"features": args.features, "corpus": args.corpus})
    _write_text(args.out, _dump(out))
    logger.info("best parameters %s", search.best_params)
    return EXIT_OK


def cmd_predict(args) -> int:
    config = _config(args)
    names, ids, X = _read_csv(args.features)
    with open(args.model, encoding="utf-8") as fh:
        model = ForestRegressor.from_dict(json.load(fh))
    model.n_jobs = args.jobs
    pred = model.predict(X, schema_hash=schema_hash(names))
    prov = _provenance(config, {"features": args.features, "model": args.model})
    _write_csv(args.out, prov, ["id", "prediction"], [[i, p] for i, p in zip(ids, pred)])
    return EXIT_OK


def cmd_eval(args) -> int:
    config = _config(args)
    _, ids, P = _read_csv(args.predictions)
    entries, _ = _load_corpus(args, config)
    by_id = {e.id: e for e in entries}
    missing = [i for i in ids if i not in by_id]
    if missing:
        raise DataError(f"ids missing from corpus: {', '.join(missing)}")
    split = args.split or "all"
    keep = [k for k, i in enumerate(ids) if split == "all" or by_id[i].split == split]
    if not keep:
        raise DataError(f"no predictions in split {split!r}")
    ids = [ids[k] for k in keep]
    pred = P[keep, 0]
    gold = [by_id[i].gold_score for i in ids]
    report = {"split": split, "model": metrics(pred, gold, ids).to_dict()}
    labels = [by_id[i].gold_label for i in ids]
    if all(l is not None for l in labels):
        report["baseline"] = metrics(baseline_predictions(labels), gold, ids).to_dict()
    else:
        logger.warning("some entries lack entailment labels; baseline skipped")
    report["provenance"] = _provenance(config, {"predictions": args.predictions, "corpus": args.corpus})
    _write_text(args.out, _dump(report) + "\n")
    for name in ("model", "baseline"):
        if name in report:
            r = report[name]
            print(f"{name:8s} pearson={r['pearson']:.4f} spearman={r['spearman']:.4f} mse={r['mse']:.4f}", file=sys.stderr)
    return EXIT_OK


def explain(record) -> str:
    """Readable account of both proof directions of one proof record."""
    lines = [f"pair {record['id']}"]
    for name, arrow in (("forward", "A => B"), ("backward", "B => A")):
        d = record[name]
        labels = d["labels"]
        lines.append("")
        lines.append(f"{name} ({arrow}): {d['status']} at stage {d['stage']}")
        lines.append("  premise pool:")
        for label in d["premise_pool"]:
            lines.append(f"    {label}: {labels.get(label, '?')}")
        if d["matches"]:
            lines.append("  matched sub-goals:")
            for m in d["matches"]:
                goal, source = m[0], m[1]
                via = "reflexivity" if source == "refl" else source
                lines.append(f"    {goal}: {labels.get(goal, '?')} by {via}")
        for step in d["trace"]:
            if step["rule"] == "neg_elim":
                p = step["inputs"][1]
                lines.append(f"  negative premise for negation elimination: {p}: {labels.get(p, '?')}")
        if d["axioms_used"]:
            lines.append("  axioms:")
            for a in d["axioms_used"]:
                lines.append(f"    {a['formula']}  ({a['relation']}, p={a['probability']:.3f})")
        if d["skipped"]:
            lines.append("  unproved sub-goals (skipped):")
            for s in d["skipped"]:
                lines.append(f"    {s}")
        else:
            lines.append("  no skipped sub-goals")
        stats = d["subgoal_stats"]
        lines.append(
            f"  entailment sub-goals: {stats['proved_after_injection']}/{stats['total_subgoals']} proved"
            f" ({stats['proved_before_injection']} before axioms), premise pool {stats['premise_pool_size']}"
        )
        hist = ", ".join(f"{r}={n}" for r, n in d["rule_histogram"].items() if n)
        lines.append(f"  rules: {hist or 'none'}; proof steps {d['proof_steps']}")
    return "\n".join(lines) + "\n"


def cmd_explain(args) -> int:
    proofs = _read_proofs(args.proofs)
    if args.id not in proofs:
        raise DataError(f"unknown id {args.id!r}")
    record = proofs[args.id]
    if "error" in record:
        raise DataError(f"{args.id}: {record['error']}")
    _write_text(args.out, explain(record))
    return EXIT_OK


def check_entry(entry, record, max_size=3) -> List[Dict]:
    """Oracle verdicts for the axiom-free, skip-free outcomes of one entry."""
    out = []
    for name, (p, c) in (("forward", entry.pair), ("backward", entry.pair[::-1])):
        d = record[name]
        if d["axioms_used"] or d["skipped"]:
            continue
        status = Status(d["status"])
        try:
            if status is Status.PROVED:
                ok = entails_bounded(p, c, max_size)
            elif status is Status.NEGATION_PROVED:
                ok = not satisfiable_bounded(And(p, c), max_size)
            else:
                continue
        except SignatureTooLarge as e:
            out.append({"id": entry.id, "direction": name, "status": status.value, "verdict": "skipped", "reason": str(e)})
            continue
        out.append({"id": entry.id, "direction": name, "status": status.value, "verdict": "agree" if ok else "DISAGREE"})
    return out


def cmd_check(args) -> int:
    config = _config(args)
    entries, _ = _load_corpus(args, config)
    proofs = _read_proofs(args.proofs)
    rows = []
    for e in entries:
        if e.id in proofs and "error" not in proofs[e.id]:
            rows.extend(check_entry(e, proofs[e.id], args.max_size))
    bad = [r for r in rows if r["verdict"] == "DISAGREE"]
    report = {
        "checked": sum(1 for r in rows if r["verdict"] != "skipped"),
        "disagreements": len(bad),
        "rows": rows,
        "provenance": _provenance(config, {"corpus": args.corpus, "proofs": args.proofs}),
    }
    _write_text(args.out, _dump(report) + "\n")
    print(f"checked {report['checked']} outcomes, {len(bad)} disagreements", file=sys.stderr)
    return EXIT_DATA if bad else EXIT_OK


# ---------------------------------------------------------------------------
# Argument parsing
# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="proofsts", description="Proof-based semantic textual similarity.")
    parser.add_argument("--version", action="version", version=f"proofsts {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(p, corpus=True):
        if corpus:
            p.add_argument("--corpus", required=True)
        p.add_argument("--config")
        p.add_argument("--seed", type=int)
        p.add_argument("--out", default="-")
        p.add_argument("--jobs", type=int, default=1)

    p = sub.add_parser("prove", help="prove both directions of every pair")
    common(p)
    p.add_argument("--kb")
    p.set_defaults(func=cmd_prove)

    p = sub.add_parser("features", help="extract scaled feature rows")
    common(p)
    p.add_argument("--proofs", required=True)
    p.add_argument("--kb")
    p.add_argument("--scaler", required=True, help="written with --fit-split, read otherwise")
    p.add_argument("--fit-split")
    p.set_defaults(func=cmd_features)

    p = sub.add_parser("train", help="grid-search and fit the forest")
    common(p)
    p.add_argument("--features", required=True)
    p.add_argument("--split")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("predict", help="score feature rows with a model")
    common(p, corpus=False)
    p.add_argument("--features", required=True)
    p.add_argument("--model", required=True)
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("eval", help="Pearson, Spearman and MSE against gold scores")
    common(p)
    p.add_argument("--predictions", required=True)
    p.add_argument("--split")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("explain", help="print a proof narrative for one pair")
    common(p, corpus=False)
    p.add_argument("--proofs", required=True)
    p.add_argument("--id", required=True)
    p.set_defaults(func=cmd_explain)

    p = sub.add_parser("check", help="cross-check proofs with the finite-model oracle")
    common(p)
    p.add_argument("--proofs", required=True)
    p.add_argument("--max-size", type=int, default=3)
    p.set_defaults(func=cmd_check)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s: %(message)s")
    if getattr(args, "jobs", 1) < 1:
        parser.error("--jobs must be at least 1")
    try:
        return args.func(args)
    except (DataError, CorpusError, LexiconError, SchemaError, ModelError, OSError, ValueError, KeyError) as e:
        print(f"proofsts {args.command}: {e}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
