"""Command-line audit runner.

One declarative JSON config describes an audit run; flags override its
scalars. Subcommands: eat, sc-eat, rank, tally, brightness, render.
Every report embeds the effective config hash and seed in a header
comment, is written atomically, and is byte-identical on rerun. Exit
status 0 on success, 2 on configuration or data errors, 3 on numerical
degeneracies.
"""

import argparse
import csv
import hashlib
import json
import os
import sys
import tempfile

import numpy as np

from . import brightness as bright
from . import charts, ranking, stats, tally
from .bundle import load_bundle
from .errors import DataError, DegenerateStatisticError
from .records import default_stimulus_set, load_external_table, load_responses, load_stimulus_set
from .seeds import subseed

MODE_NAMES = {
    "union": stats.UNION_STD,
    "pooled": stats.POOLED_STD,
    "downsample": stats.DOWNSAMPLE_EQUALIZE,
}

EXIT_OK = 0
EXIT_DATA = 2
EXIT_DEGENERATE = 3


def _load_config(args) -> dict:
    if args.config:
        try:
            with open(args.config, encoding="utf-8") as fh:
                cfg = json.load(fh)
        except FileNotFoundError:
            raise DataError(f"{args.config}: config file not found") from None
        except json.JSONDecodeError as exc:
            raise DataError(f"{args.config}: invalid config JSON ({exc})") from None
        if not isinstance(cfg, dict):
            raise DataError(f"{args.config}: config must be a JSON object")
    else:
        cfg = {}
    if args.seed is not None:
        cfg["seed"] = args.seed
    if args.out is not None:
        cfg["out"] = args.out
    if getattr(args, "mode", None) is not None:
        cfg["mode"] = args.mode
    if getattr(args, "permutations", None) is not None:
        cfg["permutations"] = args.permutations
    if getattr(args, "input", None) is not None:
        cfg.setdefault("render", {})["input"] = args.input
    return cfg


def _config_hash(cfg: dict) -> str:
    canon = json.dumps(cfg, sort_keys=True, separators=(",", ":")).encode()
    return hashlib.sha256(canon).hexdigest()[:16]


def _provenance(cfg: dict) -> str:
    return f"config_sha256={_config_hash(cfg)} seed={cfg.get('seed')}"


def _require(cfg: dict, key: str):
    if key not in cfg:
        raise DataError(f"config is missing required field {key!r}")
    return cfg[key]


def _seed(cfg: dict) -> int:
    if "seed" not in cfg or cfg["seed"] is None:
        raise DataError("a seed is required for this command (config 'seed' or --seed)")
    return int(cfg["seed"])


def write_atomic(path: str, text: str) -> None:
    directory = os.path.dirname(path) or "."
    os.makedirs(directory, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=directory, suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _out_path(cfg: dict, filename: str) -> str:
    return os.path.join(cfg.get("out", "."), filename)


def _resolve_mode(test_mode, flag_mode, config_mode):
    # precedence: --mode flag, then the per-test mode, then the config-wide
    # mode; None means the automatic size-based default.
    for raw in (flag_mode, test_mode, config_mode):
        if raw is not None:
            if raw not in MODE_NAMES:
                raise DataError(f"unknown mode {raw!r}; expected union, pooled, or downsample")
            return MODE_NAMES[raw]
    return None


def _attribute_vectors(texts, words: list[str], list_name: str):
    missing = [w for w in words if w not in texts.ids]
    if missing:
        raise DataError(
            f"word {missing[0]!r} from list {list_name!r} has no vector in the text bundle"
        )
    return np.stack([texts.vector_by_id(w) for w in words])


def _effect_rows(results, permutation_values):
    rows = []
    for (name, detail, res), perm in zip(results, permutation_values):
        row = detail + [
            res.denominator_mode, str(res.n_x), str(res.n_y),
            repr(res.d), res.label, repr(res.t_stat), repr(res.df), repr(res.p_value),
        ]
        if perm is not None:
            row.append(repr(perm))
        rows.append((name, row))
    return rows


def cmd_eat(cfg: dict, flag_mode) -> int:
    images = load_bundle(_require(cfg, "images_bundle"))
    texts = load_bundle(_require(cfg, "texts_bundle"))
    stimuli = load_stimulus_set(cfg["stimuli"]) if "stimuli" in cfg else default_stimulus_set()
    tests = _require(cfg, "eat_tests")
    if not tests:
        raise DataError("eat_tests is empty")
    n_perm = int(cfg.get("permutations", 0) or 0)
    needs_seed = n_perm > 0 or "downsample" in (
        flag_mode, cfg.get("mode"), *(t.get("mode") for t in tests)
    )
    seed = _seed(cfg) if needs_seed else int(cfg.get("seed", 0) or 0)

    results, perms = [], []
    for t in tests:
        name = t.get("name") or f"{t['x_group']}_vs_{t['y_group']}"
        x = images.group_vectors(_require(t, "x_group"))
        y = images.group_vectors(_require(t, "y_group"))
        a_list = stimuli.word_list_for_test(_require(t, "a_list"))
        b_list = stimuli.word_list_for_test(_require(t, "b_list"))
        a = _attribute_vectors(texts, a_list, t["a_list"])
        b = _attribute_vectors(texts, b_list, t["b_list"])
        mode = _resolve_mode(t.get("mode"), flag_mode, cfg.get("mode"))
        res = stats.eat(x, y, a, b, mode=mode, seed=subseed(seed, "test", name))
        results.append((name, [name, t["x_group"], t["y_group"], t["a_list"], t["b_list"]], res))
        perms.append(
            stats.permutation_p(x, y, a, b, n_perm, subseed(seed, "perm", name))
            if n_perm else None
        )

    header = ["test,x_group,y_group,a_list,b_list,mode,n_x,n_y,d,effect_size_label,"
              "t_stat,df,p_value" + (",permutation_p" if n_perm else "")]
    lines = [f"# {_provenance(cfg)}"] + header
    for _, row in _effect_rows(results, perms):
        lines.append(",".join(row))
    write_atomic(_out_path(cfg, "eat_results.csv"), "\n".join(lines) + "\n")
    return EXIT_OK


def cmd_sc_eat(cfg: dict, flag_mode) -> int:
    images = load_bundle(_require(cfg, "images_bundle"))
    texts = load_bundle(_require(cfg, "texts_bundle"))
    tests = _require(cfg, "sc_eat_tests")
    if not tests:
        raise DataError("sc_eat_tests is empty")
    n_perm = int(cfg.get("permutations", 0) or 0)
    needs_seed = n_perm > 0 or "downsample" in (
        flag_mode, cfg.get("mode"), *(t.get("mode") for t in tests)
    )
    seed = _seed(cfg) if needs_seed else int(cfg.get("seed", 0) or 0)

    results, perms = [], []
    for t in tests:
        name = t.get("name") or f"{t['prompt_id']}_{t['a_group']}_vs_{t['b_group']}"
        w = texts.vector_by_id(_require(t, "prompt_id"))
        a = images.group_vectors(_require(t, "a_group"))
        b = images.group_vectors(_require(t, "b_group"))
        mode = _resolve_mode(t.get("mode"), flag_mode, cfg.get("mode"))
        res = stats.sc_eat(w, a, b, mode=mode, seed=subseed(seed, "test", name))
        results.append((name, [name, t["prompt_id"], t["a_group"], t["b_group"]], res))
        if n_perm:
            ca = np.asarray([stats.cosine(w, v) for v in a])
            cb = np.asarray([stats.cosine(w, v) for v in b])
            perms.append(stats.mean_diff_permutation_p(ca, cb, n_perm,
                                                       subseed(seed, "perm", name)))
        else:
            perms.append(None)

    header = ["test,prompt,a_group,b_group,mode,n_a,n_b,d,effect_size_label,"
              "t_stat,df,p_value" + (",permutation_p" if n_perm else "")]
    lines = [f"# {_provenance(cfg)}"] + header
    for _, row in _effect_rows(results, perms):
        lines.append(",".join(row))
    write_atomic(_out_path(cfg, "sc_eat_results.csv"), "\n".join(lines) + "\n")
    return EXIT_OK


def cmd_rank(cfg: dict) -> int:
    rank_cfg = _require(cfg, "ranking")
    images = load_bundle(_require(cfg, "images_bundle"))
    prompts_path = rank_cfg.get("prompts_bundle") or _require(cfg, "texts_bundle")
    prompts_bundle = load_bundle(prompts_path)
    config = ranking.RankingConfig(
        k=int(_require(rank_cfg, "k")),
        per_group=int(_require(rank_cfg, "per_group")),
        repetitions=int(_require(rank_cfg, "repetitions")),
        seed=_seed(cfg),
    )
    prompts = [(rid, prompts_bundle.vector_by_id(rid)) for rid in prompts_bundle.ids]
    table = ranking.ranking_survey(prompts, images, config)

    head = [f"# {_provenance(cfg)}"]
    write_atomic(_out_path(cfg, "ranking_long.csv"), table.to_long_csv(head))
    write_atomic(_out_path(cfg, "ranking_wide.csv"), table.to_wide_csv(head))

    if "external" in rank_cfg:
        external = load_external_table(rank_cfg["external"])
        report = ranking.correlate_external(
            table, external, _require(rank_cfg, "group_columns")
        )
        payload = {
            "config_sha256": _config_hash(cfg),
            "seed": cfg.get("seed"),
            "groups": report.per_group,
            "r_squared": report.r_squared,
        }
        write_atomic(_out_path(cfg, "correlations.json"),
                     json.dumps(payload, indent=2) + "\n")
    return EXIT_OK


def cmd_tally(cfg: dict) -> int:
    records = load_responses(_require(cfg, "responses"))
    tally_cfg = _require(cfg, "tally")
    yes_qs = tally_cfg.get("yes_questions", [])
    dist_qs = tally_cfg.get("distribution_questions", [])
    lex_path = tally_cfg.get("lexicon")
    do_mentions = bool(tally_cfg.get("mention_rates", lex_path is not None))
    if not (yes_qs or dist_qs or do_mentions):
        raise DataError("tally config requests nothing to compute")
    head = f"# {_provenance(cfg)}"

    if yes_qs:
        lines = [head, "group,question_or_param,numerator,denominator,rate_percent"]
        for q in yes_qs:
            rates = tally.yes_rate(records, q, groups=tally_cfg.get("groups"))
            for g in sorted(rates):
                r = rates[g]
                lines.append(f"{g},{q},{r.numerator},{r.denominator},{r.rate_percent!r}")
        write_atomic(_out_path(cfg, "yes_rates.csv"), "\n".join(lines) + "\n")

    if dist_qs:
        lines = [head, "group,question_or_param,answer,percent"]
        for q in dist_qs:
            dists = tally.answer_distribution(records, q, groups=tally_cfg.get("groups"))
            for g in sorted(dists):
                for answer, pct in dists[g].items():
                    lines.append(f"{g},{q},{answer},{pct!r}")
        write_atomic(_out_path(cfg, "answer_distribution.csv"), "\n".join(lines) + "\n")

    if do_mentions:
        lexicon = tally.load_lexicon(lex_path) if lex_path else tally.default_lexicon()
        rates = tally.mention_rate(records, lexicon, groups=tally_cfg.get("groups"))
        lines = [head, "group,question_or_param,numerator,denominator,rate_percent"]
        for g, tp in sorted(rates, key=lambda key: (key[0], float(key[1]))):
            r = rates[(g, tp)]
            lines.append(f"{g},{tp},{r.numerator},{r.denominator},{r.rate_percent!r}")
        write_atomic(_out_path(cfg, "mention_rates.csv"), "\n".join(lines) + "\n")
    return EXIT_OK


def cmd_brightness(cfg: dict) -> int:
    bright_cfg = _require(cfg, "brightness")
    manifest = _require(bright_cfg, "crop_manifest")
    luma = bool(bright_cfg.get("luma", False))
    series = bright.series_from_manifest(manifest, luma=luma)
    aggregates = bright.group_series_aggregate(series)
    head = [f"# {_provenance(cfg)}"]

    write_atomic(_out_path(cfg, "brightness_series.csv"),
                 bright.series_to_csv(series, head))
    write_atomic(_out_path(cfg, "brightness_aggregate.csv"),
                 bright.aggregate_to_csv(aggregates, head))

    lines = list(head)
    lines.append("group,initial,peak,peak_iteration,percent_change")
    for group in sorted(aggregates):
        s = aggregates[group]
        values = s.values
        lines.append(
            f"{group},{float(values[0])!r},{float(values.max())!r},"
            f"{bright.peak_iteration(s)},{bright.percent_change_to_peak(s)!r}"
        )
    write_atomic(_out_path(cfg, "brightness_change.csv"), "\n".join(lines) + "\n")

    if bright_cfg.get("svg"):
        svg = charts.render_series_svg(aggregates, header_comment=_provenance(cfg))
        write_atomic(_out_path(cfg, "brightness_aggregate.svg"), svg)
    return EXIT_OK


def cmd_render(cfg: dict) -> int:
    render_cfg = cfg.get("render", {})
    source = render_cfg.get("input")
    if not source:
        raise DataError("render requires an input aggregate CSV (--input or config render.input)")
    rows = _read_aggregate_csv(source)
    aggregates = {}
    for group, samples in rows.items():
        samples.sort(key=lambda sv: sv[0])
        aggregates[group] = bright.BrightnessSeries(
            image_id=f"{group}-mean", group=group, samples=samples
        )
    svg = charts.render_series_svg(aggregates, header_comment=_provenance(cfg))
    out_name = render_cfg.get("output", "series.svg")
    write_atomic(_out_path(cfg, out_name), svg)
    return EXIT_OK


def _read_aggregate_csv(path) -> dict[str, list[tuple[int, float]]]:
    try:
        with open(path, newline="", encoding="utf-8") as fh:
            rows = [r for r in csv.reader(fh) if r and not r[0].startswith("#")]
    except FileNotFoundError:
        raise DataError(f"{path}: aggregate CSV not found") from None
    if not rows or rows[0] != ["group", "iteration", "mean_brightness"]:
        raise DataError(f"{path}: expected header group,iteration,mean_brightness")
    if len(rows) == 1:
        raise DataError(f"{path}: aggregate CSV has no data rows")
    out: dict[str, list[tuple[int, float]]] = {}
    for row in rows[1:]:
        if len(row) != 3:
            raise DataError(f"{path}: malformed row {row!r}")
        try:
            out.setdefault(row[0], []).append((int(row[1]), float(row[2])))
        except ValueError:
            raise DataError(f"{path}: non-numeric row {row!r}") from None
    return out


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="assoc-audit",
        description="Group-association bias audits over embedding bundles and model responses.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name in ("eat", "sc-eat", "rank", "tally", "brightness", "render"):
        p = sub.add_parser(name)
        p.add_argument("--config", help="JSON audit configuration")
        p.add_argument("--seed", type=int, help="override the config seed")
        p.add_argument("--out", help="override the output directory")
        if name in ("eat", "sc-eat"):
            p.add_argument("--mode", choices=sorted(MODE_NAMES),
                           help="force one effect-size denominator mode")
            p.add_argument("--permutations", type=int,
                           help="add a permutation p-value with this many draws")
        if name == "render":
            p.add_argument("--input", help="aggregate CSV to render")
    return parser


def run(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = _load_config(args)
        if args.command == "eat":
            return cmd_eat(cfg, args.mode)
        if args.command == "sc-eat":
            return cmd_sc_eat(cfg, args.mode)
        if args.command == "rank":
            return cmd_rank(cfg)
        if args.command == "tally":
            return cmd_tally(cfg)
        if args.command == "brightness":
            return cmd_brightness(cfg)
        if args.command == "render":
            return cmd_render(cfg)
        raise DataError(f"unknown command {args.command!r}")
    except DegenerateStatisticError as exc:
        print(f"assoc-audit: degenerate statistic: {exc}", file=sys.stderr)
        return EXIT_DEGENERATE
    except DataError as exc:
        print(f"assoc-audit: {exc}", file=sys.stderr)
        return EXIT_DATA
    except OSError as exc:
        print(f"assoc-audit: {exc}", file=sys.stderr)
        return EXIT_DATA


def main(argv=None) -> None:
    sys.exit(run(argv))


if __name__ == "__main__":
    main()
