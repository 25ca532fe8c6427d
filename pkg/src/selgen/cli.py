"""Command-line interface.

    selgen synth {domain,scenario}   generate seeded synthetic stores
    selgen fit-gaussian              fit MD / RMD Gaussians
    selgen fit-classifier            fit the binary logistic baseline
    selgen score                     per-example ScoreTable CSV
    selgen combine                   add prsum / linreg abstention columns
    selgen eval {auroc,kendall,qa,survival}
    selgen attribute                 leave-one-out sentence attribution
    selgen ngram                     n-gram overlap report

Exit status: 0 success, 1 usage error, 2 data error.  Every command writes
(or updates) ``manifest.json`` next to its output.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import __version__, attribution, classifier_ood, combiner, evaluation, gaussian_ood, store, synth, textstats
from ._kernels import BACKEND
from ._parallel import default_threads
from .errors import MalformedLine, SelgenError
from .svgplot import line_chart
from .table import QUALITY_PREFIX, SCORE_COLUMNS, ScoreTable, ensure_parent

log = logging.getLogger("selgen")

EXIT_OK, EXIT_USAGE, EXIT_DATA = 0, 1, 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: error: {message}")


# ---------------------------------------------------------------------------
# helpers


def _sha256(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 20), b""):
            h.update(block)
    return h.hexdigest()


def _input_files(paths) -> dict[str, str]:
    out = {}
    for p in paths:
        if p is None:
            continue
        for candidate in _expand_store(p):
            if candidate.exists():
                out[str(candidate)] = _sha256(candidate)
    return dict(sorted(out.items()))


def _expand_store(p) -> list[Path]:
    p = Path(p)
    if p.exists() and p.is_file():
        return [p]
    return list(store.store_paths(p))


def write_manifest(out_dir, command: str, output_name: str, args: argparse.Namespace, inputs) -> Path:
    """Record config, seeds and input checksums; entries are keyed by output name."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    path = out_dir / "manifest.json"
    manifest = {"runs": {}}
    if path.exists():
        try:
            manifest = json.loads(path.read_text())
            manifest.setdefault("runs", {})
        except json.JSONDecodeError:
            manifest = {"runs": {}}
    config = {k: v for k, v in sorted(vars(args).items()) if k not in ("func", "config")}
    manifest["selgen_version"] = __version__
    manifest["runs"][output_name] = {
        "command": command,
        "config": config,
        "seeds": {k: v for k, v in config.items() if "seed" in k},
        "inputs": _input_files(inputs),
    }
    path.write_text(json.dumps(manifest, indent=1, sort_keys=True, default=str) + "\n")
    return path


def _dump(obj, path=None) -> None:
    text = json.dumps(obj, indent=1, sort_keys=True)
    if path is not None:
        ensure_parent(path).write_text(text + "\n")
    print(text)


def _csv_list(value: str) -> list[str]:
    return [v.strip() for v in value.split(",") if v.strip()]


def _alpha_grid(step: float) -> list[float]:
    if not 0 < step < 1:
        raise UsageError("--alpha-step must lie in (0, 1)")
    count = int(round(1.0 / step))
    return [i / count for i in range(count)]


def _threads(args) -> int:
    return default_threads() if args.threads is None else max(1, args.threads)


# ---------------------------------------------------------------------------
# synth


def cmd_synth_domain(args) -> int:
    mean = np.zeros(args.d)
    mean[0] = args.shift
    spec = synth.DomainSpec(name=args.name, n=args.n, d=args.d, mean=mean, seed=args.seed)
    st = synth.gen_domain(spec, split=args.split, side=args.side)
    emb, _ = store.save_store(args.out, st)
    write_manifest(emb.parent, "synth domain", emb.stem, args, [])
    log.info("wrote %d rows to %s", len(st), emb)
    return EXIT_OK


def cmd_synth_scenario(args) -> int:
    st = synth.gen_selective_scenario(
        args.seed, args.n_in, args.n_ood, args.shift, args.noise, d=args.d, n_fit=args.n_fit
    )
    out = Path(args.out_dir)
    for split in ("fit_fg", "fit_bg", "test"):
        store.save_store(out / split, st.where(split=split))
    write_manifest(out, "synth scenario", "scenario", args, [])
    log.info("wrote scenario (%d rows) to %s", len(st), out)
    return EXIT_OK


# ---------------------------------------------------------------------------
# fitting


def _load_rows(prefix, side=None) -> np.ndarray:
    st = store.load_store(prefix)
    if side is not None and any(m.side != side for m in st.meta):
        st = st.where(side=side)
    return st.matrix


def cmd_fit_gaussian(args) -> int:
    fg = {"input": args.input_fg, "output": args.output_fg}
    bg = {"input": args.input_bg, "output": args.output_bg}
    if args.fg:
        fg[args.side] = args.fg
    if args.bg:
        bg[args.side] = args.bg
    used = [s for s in ("input", "output") if fg[s] or bg[s]]
    if not used:
        raise UsageError("fit-gaussian: give --fg (and usually --bg)")
    if all(bg[s] is None for s in used) and len(used) == 1:
        model = gaussian_ood.fit_gaussian(_load_rows(fg[used[0]]), args.ridge)
    else:
        rows = {f"{s}_{k}": _load_rows(src[s]) if src[s] else None for s in used for k, src in (("fg", fg), ("bg", bg))}
        model = gaussian_ood.fit_rmd(**rows, ridge=args.ridge, bg_ridge=args.bg_ridge, pooled=args.pooled)
    out = ensure_parent(args.out)
    store.save_model(out, model)
    write_manifest(out.parent, "fit-gaussian", out.name, args, list(fg.values()) + list(bg.values()))
    return EXIT_OK


def cmd_fit_classifier(args) -> int:
    pos = _load_rows(args.bg)
    neg = _load_rows(args.fg)
    model = classifier_ood.train_logistic(
        pos, neg, l2=args.l2, max_iter=args.max_iter, tol=args.tol, balanced=not args.no_balance, seed=args.seed
    )
    out = ensure_parent(args.out)
    store.save_model(out, model)
    write_manifest(out.parent, "fit-classifier", out.name, args, [args.fg, args.bg])
    return EXIT_OK


# ---------------------------------------------------------------------------
# score


def cmd_score(args) -> int:
    st = store.load_store(args.test)
    n = len(st)
    threads = _threads(args)
    nan = np.full(n, np.nan)
    side = args.side
    cols: dict[str, object] = {
        "id": st.ids,
        "dataset": [m.dataset for m in st.meta],
        "side": [side] * n,
        "md": nan,
        "rmd": nan,
        "logit": nan,
        "knn": nan,
        "perplexity": np.array([np.nan if m.perplexity is None else m.perplexity for m in st.meta]),
    }
    if args.gaussian:
        model = store.load_model(args.gaussian)
        if isinstance(model, gaussian_ood.GaussianModel):
            cols["md"] = gaussian_ood.md_batch(model, st.matrix, threads)
        else:
            fg, _ = model.pair(side)
            cols["md"] = gaussian_ood.md_batch(fg, st.matrix, threads)
            cols["rmd"] = gaussian_ood.batch_score(model, st.matrix, side, threads)
    if args.classifier:
        clf = store.load_model(args.classifier, kind="binary_classifier")
        cols["logit"] = classifier_ood.logit_batch(clf, st.matrix)
    if args.knn_train:
        idx = classifier_ood.build_knn_index(_load_rows(args.knn_train), args.knn_k, args.knn_alpha)
        cols["knn"] = classifier_ood.knn_batch(idx, st.matrix, args.knn_seed, threads)
    metrics = sorted({k for m in st.meta for k in m.quality})
    for metric in metrics:
        cols[QUALITY_PREFIX + metric] = np.array([m.quality.get(metric, np.nan) for m in st.meta])
    table = ScoreTable(cols)
    assert tuple(table.names()[: len(SCORE_COLUMNS)]) == SCORE_COLUMNS
    out = ensure_parent(args.out)
    table.write_csv(out)
    write_manifest(
        out.parent, "score", out.name, args, [args.test, args.gaussian, args.classifier, args.knn_train]
    )
    return EXIT_OK


# ---------------------------------------------------------------------------
# combine


def cmd_combine(args) -> int:
    table = ScoreTable.read_csv(args.scores)
    methods = _csv_list(args.method)
    bad = set(methods) - {"prsum", "linreg"}
    if bad:
        raise UsageError(f"combine: unknown method(s) {sorted(bad)}")
    n = len(table)
    if "prsum" in methods:
        ppx = table.numeric("perplexity")
        ood = table.numeric(args.ood_column)
        if args.reference == "indomain":
            if not args.indomain_dataset:
                raise UsageError("combine: --reference indomain needs --indomain-dataset")
            ref_mask = np.array([d == args.indomain_dataset for d in table.text("dataset")])
        else:
            ref_mask = np.ones(n, dtype=bool)
        ref_ppx = combiner.percentile_reference(ppx[ref_mask])
        ref_ood = combiner.percentile_reference(ood[ref_mask])
        table.add("prsum", combiner.prsum(ref_ppx, ref_ood, ppx, ood))
    if "linreg" in methods:
        if not args.quality:
            raise UsageError("combine: linreg needs --quality")
        features = _csv_list(args.features) if args.features else ["perplexity", args.ood_column]
        X = np.column_stack([table.numeric(f) for f in features])
        y = table.quality(args.quality)
        train, _ = combiner.train_split(n, args.train_fraction, args.seed)
        model = combiner.fit_linear_combiner(X[train], y[train], features)
        flag = np.zeros(n, dtype=np.int64)
        flag[train] = 1
        table.add("linreg", combiner.abstention_from_quality(combiner.predict_batch(model, {f: table.numeric(f) for f in features})))
        table.add("linreg_train", flag)
        if args.model_out:
            store.save_model(ensure_parent(args.model_out), model)
    out = ensure_parent(args.out)
    table.write_csv(out)
    write_manifest(out.parent, "combine", out.name, args, [args.scores])
    return EXIT_OK


# ---------------------------------------------------------------------------
# eval


def _eval_table(args) -> ScoreTable:
    table = ScoreTable.read_csv(args.scores)
    if "linreg_train" in table and not args.include_train:
        table = table.subset(table.numeric("linreg_train") == 0)
    return table


def _eval_out(args, name: str) -> Path | None:
    return Path(args.out_dir) / name if args.out_dir else None


def cmd_eval_auroc(args) -> int:
    table = _eval_table(args)
    labels = table.text("dataset")
    result = {"indomain": args.indomain, "columns": {}}
    for column in _csv_list(args.column):
        scores = table.numeric(column)
        neg = scores[[d == args.indomain for d in labels]]
        ood_sets = args.ood or sorted({d for d in labels if d != args.indomain})
        per = {}
        pos_all = []
        for name in ood_sets:
            pos = scores[[d == name for d in labels]]
            per[name] = evaluation.auroc(neg, pos)
            pos_all.append(pos)
        entry = {"per_dataset": per}
        if pos_all:
            entry["all_ood"] = evaluation.auroc(neg, np.concatenate(pos_all))
        result["columns"][column] = entry
    out = _eval_out(args, "auroc.json")
    _dump(result, out)
    if out:
        write_manifest(out.parent, "eval auroc", out.name, args, [args.scores])
    return EXIT_OK


def cmd_eval_kendall(args) -> int:
    """Tau between the negated abstention score and quality (positive = useful)."""
    table = _eval_table(args)
    q = table.quality(args.quality)
    labels = np.array(table.text("dataset"))
    result = {"quality": args.quality, "convention": "tau(-score, quality)", "columns": {}}
    for column in _csv_list(args.columns):
        s = -table.numeric(column)
        entry = {}
        for name in ["All"] + sorted(set(labels.tolist())):
            mask = np.ones(len(labels), dtype=bool) if name == "All" else labels == name
            try:
                r = evaluation.kendall_tau_b(s[mask], q[mask])
                entry[name] = {"tau": r.tau, "p_value": r.p_value, "significant": r.p_value < 0.05, "n": r.n}
            except SelgenError as exc:
                entry[name] = {"error": str(exc)}
        result["columns"][column] = entry
    out = _eval_out(args, "kendall.json")
    _dump(result, out)
    if out:
        write_manifest(out.parent, "eval kendall", out.name, args, [args.scores])
    return EXIT_OK


def cmd_eval_qa(args) -> int:
    table = _eval_table(args)
    q = table.quality(args.quality)
    alphas = _alpha_grid(args.alpha_step)
    curves = {c: evaluation.qa_curve(table.numeric(c), q, alphas) for c in _csv_list(args.columns)}
    result = {
        "quality": args.quality,
        "curves": {c: {"area": cv.area, "points": cv.points} for c, cv in curves.items()},
    }
    out = _eval_out(args, "qa.json")
    if out:
        out.parent.mkdir(parents=True, exist_ok=True)
        with open(out.parent / "qa.csv", "w") as fh:
            fh.write("column,alpha,mean_quality,n_kept\n")
            for c, cv in curves.items():
                for a, m, k in cv.points:
                    fh.write(f"{c},{a!r},{m!r},{k}\n")
        if args.svg:
            svg = line_chart(
                {c: (cv.alphas, cv.mean_quality) for c, cv in curves.items()},
                title=f"Quality vs abstention ({args.quality})",
                xlabel="abstention rate",
                ylabel=f"mean {args.quality}",
            )
            (out.parent / "qa.svg").write_text(svg)
    _dump(result, out)
    if out:
        write_manifest(out.parent, "eval qa", out.name, args, [args.scores])
    return EXIT_OK


def cmd_eval_survival(args) -> int:
    table = _eval_table(args)
    alphas = _alpha_grid(args.alpha_step)
    surv = evaluation.survival_counts(table.numeric(args.column), table.text("dataset"), alphas)
    result = {
        "column": args.column,
        "alphas": surv.alphas.tolist(),
        "counts": {k: v.tolist() for k, v in surv.counts.items()},
    }
    out = _eval_out(args, "survival.json")
    if out:
        out.parent.mkdir(parents=True, exist_ok=True)
        with open(out.parent / "survival.csv", "w") as fh:
            fh.write("dataset,alpha,surviving\n")
            for name, counts in surv.counts.items():
                for a, c in zip(surv.alphas, counts):
                    fh.write(f"{name},{float(a)!r},{int(c)}\n")
        if args.svg:
            svg = line_chart(
                {k: (surv.alphas, v) for k, v in surv.counts.items()},
                title=f"Survival count ({args.column})",
                xlabel="abstention rate",
                ylabel="examples kept",
            )
            (out.parent / "survival.svg").write_text(svg)
    _dump(result, out)
    if out:
        write_manifest(out.parent, "eval survival", out.name, args, [args.scores])
    return EXIT_OK


# ---------------------------------------------------------------------------
# attribute / ngram


def cmd_attribute(args) -> int:
    model = store.load_model(args.gaussian)
    with open(args.docs, encoding="utf-8") as fh:
        docs = attribution.read_documents(fh)
    out = ensure_parent(args.out)
    with open(out, "w", encoding="utf-8") as fh:
        for doc in docs:
            attrs = attribution.sentence_attribution(doc, model, args.side, args.mode)
            for row in attribution.attribution_rows(doc, attrs, args.mode):
                fh.write(json.dumps(row, sort_keys=True) + "\n")
    write_manifest(out.parent, "attribute", out.name, args, [args.docs, args.gaussian])
    return EXIT_OK


def _read_tokens(path, sample: int | None, seed: int) -> list[list[int]]:
    seqs = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                seqs.append([int(t) for t in json.loads(line)["tokens"]])
            except (KeyError, TypeError, ValueError) as exc:
                raise MalformedLine(f"{path}: {exc}", lineno) from exc
    if sample is not None and sample < len(seqs):
        keep = np.sort(np.random.default_rng(seed).choice(len(seqs), sample, replace=False))
        seqs = [seqs[i] for i in keep]
    return seqs


def cmd_ngram(args) -> int:
    test = textstats.build_profile(_read_tokens(args.test, args.sample, args.seed), args.n_max)
    train = textstats.build_profile(_read_tokens(args.train, None, args.seed), args.n_max)
    report = textstats.overlap_report(test, train)
    out = ensure_parent(args.out) if args.out else None
    _dump(report, out)
    if out:
        write_manifest(out.parent, "ngram", out.name, args, [args.test, args.train])
    return EXIT_OK


# ---------------------------------------------------------------------------
# parser


def build_parser() -> tuple[argparse.ArgumentParser, dict[str, argparse.ArgumentParser]]:
    parser = _Parser(prog="selgen", description="Embedding OOD detection and selective generation.")
    parser.add_argument("--version", action="version", version=f"selgen {__version__} ({BACKEND} kernels)")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)
    leaves: dict[str, argparse.ArgumentParser] = {}

    def leaf(parent, name, func, help_):
        p = parent.add_parser(name, help=help_, description=help_)
        p.add_argument("--config", help="JSON file of option defaults; flags win")
        p.set_defaults(func=func)
        leaves[p.prog] = p
        return p

    # synth
    sp = sub.add_parser("synth", help="generate synthetic stores")
    ssub = sp.add_subparsers(dest="synth_command", parser_class=_Parser)
    p = leaf(ssub, "domain", cmd_synth_domain, "one Gaussian domain N(shift * e1, I)")
    p.add_argument("--name", required=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--d", type=int, required=True)
    p.add_argument("--shift", type=float, default=0.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--split", default="test")
    p.add_argument("--side", choices=gaussian_ood.SIDES, default="input")
    p.add_argument("--out", required=True, help="store prefix (writes PREFIX.emb and PREFIX.jsonl)")
    p = leaf(ssub, "scenario", cmd_synth_scenario, "selective-generation pool with planted quality")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--n-in", type=int, default=2000)
    p.add_argument("--n-ood", type=int, default=2000)
    p.add_argument("--shift", type=float, default=6.0)
    p.add_argument("--noise", type=float, default=0.2)
    p.add_argument("--d", type=int, default=8)
    p.add_argument("--n-fit", type=int, default=None)
    p.add_argument("--out-dir", required=True, help="writes fit_fg, fit_bg and test stores here")

    # fit-gaussian
    p = leaf(sub, "fit-gaussian", cmd_fit_gaussian, "fit foreground/background Gaussians")
    p.add_argument("--fg", help="foreground (in-domain) store for --side")
    p.add_argument("--bg", help="background store for --side")
    p.add_argument("--side", choices=gaussian_ood.SIDES, default="input")
    for side in gaussian_ood.SIDES:
        p.add_argument(f"--{side}-fg")
        p.add_argument(f"--{side}-bg")
    p.add_argument("--ridge", type=float, default=1e-6)
    p.add_argument("--bg-ridge", type=float, default=None)
    p.add_argument("--pooled", action="store_true", help="share one pooled covariance (linear RMD)")
    p.add_argument("--out", required=True)

    # fit-classifier
    p = leaf(sub, "fit-classifier", cmd_fit_classifier, "binary logistic regression, background = label 1")
    p.add_argument("--fg", required=True)
    p.add_argument("--bg", required=True)
    p.add_argument("--l2", type=float, default=classifier_ood.DEFAULT_L2)
    p.add_argument("--max-iter", type=int, default=100)
    p.add_argument("--tol", type=float, default=1e-8)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--no-balance", action="store_true")
    p.add_argument("--out", required=True)

    # score
    p = leaf(sub, "score", cmd_score, "score a store into a ScoreTable CSV")
    p.add_argument("--test", required=True)
    p.add_argument("--gaussian")
    p.add_argument("--classifier")
    p.add_argument("--knn-train")
    p.add_argument("--knn-k", type=int, default=classifier_ood.DEFAULT_K)
    p.add_argument("--knn-alpha", type=float, default=classifier_ood.DEFAULT_ALPHA_PCT)
    p.add_argument("--knn-seed", type=int, default=0)
    p.add_argument("--side", choices=gaussian_ood.SIDES, default="input")
    p.add_argument("--threads", type=int, default=None)
    p.add_argument("--out", required=True)

    # combine
    p = leaf(sub, "combine", cmd_combine, "add prsum / linreg abstention columns")
    p.add_argument("--scores", required=True)
    p.add_argument("--method", default="prsum,linreg")
    p.add_argument("--ood-column", default="rmd")
    p.add_argument("--quality")
    p.add_argument("--features", help="comma list; default perplexity,<ood-column>")
    p.add_argument("--train-fraction", type=float, default=0.1)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--reference", choices=("pool", "indomain"), default="pool")
    p.add_argument("--indomain-dataset")
    p.add_argument("--model-out")
    p.add_argument("--out", required=True)

    # eval
    ep = sub.add_parser("eval", help="metrics")
    esub = ep.add_subparsers(dest="eval_command", parser_class=_Parser)

    def eval_common(q):
        q.add_argument("--scores", required=True)
        q.add_argument("--out-dir")
        q.add_argument("--include-train", action="store_true", help="keep rows used to fit linreg")

    p = leaf(esub, "auroc", cmd_eval_auroc, "AUROC of in-domain (negative) vs shifted (positive)")
    eval_common(p)
    p.add_argument("--column", default="rmd", help="comma list of score columns")
    p.add_argument("--indomain", required=True)
    p.add_argument("--ood", action="append")
    p = leaf(esub, "kendall", cmd_eval_kendall, "Kendall tau-b of scores vs quality")
    eval_common(p)
    p.add_argument("--columns", required=True)
    p.add_argument("--quality", required=True)
    p = leaf(esub, "qa", cmd_eval_qa, "quality vs abstention curves")
    eval_common(p)
    p.add_argument("--columns", required=True)
    p.add_argument("--quality", required=True)
    p.add_argument("--alpha-step", type=float, default=0.01)
    p.add_argument("--svg", action="store_true")
    p = leaf(esub, "survival", cmd_eval_survival, "per-dataset survival counts")
    eval_common(p)
    p.add_argument("--column", required=True)
    p.add_argument("--alpha-step", type=float, default=0.01)
    p.add_argument("--svg", action="store_true")

    # attribute
    p = leaf(sub, "attribute", cmd_attribute, "leave-one-out sentence attribution")
    p.add_argument("--docs", required=True)
    p.add_argument("--gaussian", required=True)
    p.add_argument("--side", choices=gaussian_ood.SIDES, default="input")
    p.add_argument("--mode", choices=attribution.MODES, default="compositional")
    p.add_argument("--out", required=True)

    # ngram
    p = leaf(sub, "ngram", cmd_ngram, "n-gram overlap of a test corpus with the training corpus")
    p.add_argument("--test", required=True)
    p.add_argument("--train", required=True)
    p.add_argument("--n-max", type=int, default=4)
    p.add_argument("--sample", type=int, default=None)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out")

    return parser, leaves


def _load_config(argv: list[str]) -> dict:
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("--config")
    known, _ = pre.parse_known_args(argv)
    if not known.config:
        return {}
    try:
        cfg = json.loads(Path(known.config).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise UsageError(f"cannot read config {known.config}: {exc}") from exc
    if not isinstance(cfg, dict):
        raise UsageError("config file must hold a JSON object")
    return {k.replace("-", "_"): v for k, v in cfg.items()}


def _apply_config(leaves, cfg: dict) -> None:
    """Install config values as parser defaults so explicit flags still win."""
    for p in leaves.values():
        dests = {a.dest for a in p._actions}
        hits = {k: v for k, v in cfg.items() if k in dests}
        for action in p._actions:
            if action.dest in hits:
                action.required = False
        p.set_defaults(**hits)


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser, leaves = build_parser()
    try:
        cfg = _load_config(argv)
        _apply_config(leaves, cfg)
        args = parser.parse_args(argv)
        if getattr(args, "func", None) is None:
            parser.print_usage(sys.stderr)
            raise UsageError("selgen: a subcommand is required")
        unknown = sorted(set(cfg) - set(vars(args)))
        if unknown:
            raise UsageError(f"unknown config keys for this command: {unknown}")
        logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
        return args.func(args)
    except UsageError as exc:
        print(str(exc), file=sys.stderr)
        return EXIT_USAGE
    except (SelgenError, OSError, KeyError, ValueError) as exc:
        print(f"selgen: error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except SystemExit as exc:  # --help / --version
        return int(exc.code or 0)


if __name__ == "__main__":
    sys.exit(main())
