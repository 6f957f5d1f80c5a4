"""Command-line entry point.

Every run prints its resolved options to stderr so an output file can be
traced back to the exact invocation that produced it.  A key=value config
file supplies defaults that explicit flags override.

Exit codes: 0 success, 1 usage or configuration problem, 2 data or
scoring problem.
"""

from __future__ import annotations

import csv
import os
import sys
from pathlib import Path

import click

from .counterfactuals import GeneratorKind, extract_primitives, load_library, save_library
from .curation import (
    bucket_split,
    evaluate_planner,
    load_plans,
    plan_metrics,
    save_bucket_report,
    save_weights,
    upsample_weights,
)
from .errors import ConfigError, DataError, ScenesiftError
from .prediction import CachedPredictor, ReferencePredictor, load_external
from .ranking import (
    auc_roc,
    build_feature_map,
    derive_labels,
    fit_reward,
    load_preferences,
    load_ranking,
    load_reward_model,
    rank_dataset,
    save_ranking,
    save_reward_model,
    spearman_rankings,
)
from .scenario import canonical_segment, load_dataset, save_dataset
from .surprise import (
    AGENT_AGGREGATIONS,
    METRICS,
    TARGET_POLICIES,
    VARIANT_AGGREGATIONS,
    SurpriseConfig,
    batch_rules,
    batch_score,
    load_scores,
    save_scores,
)

GENERATOR_NAMES = tuple(kind.value for kind in GeneratorKind)


def _read_config_file(path: str | None) -> dict[str, str]:
    """Parse a key=value file; blank lines and # comments are skipped."""
    if path is None:
        return {}
    values: dict[str, str] = {}
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from exc
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected key=value, got {line!r}")
        key, _, value = line.partition("=")
        values[key.strip()] = value.strip()
    return values


def _resolve(ctx: click.Context, params: dict) -> dict:
    """Fill parameters the user left at their defaults from the config file,
    then echo the full resolved set."""
    file_config = (ctx.obj or {}).get("file_config", {})
    by_name = {p.name: p for p in ctx.command.params}
    for name, param in by_name.items():
        key = name.replace("_", "-")
        if key not in file_config:
            continue
        if ctx.get_parameter_source(name) is not click.core.ParameterSource.DEFAULT:
            continue
        params[name] = param.type.convert(file_config[key], param, ctx)
    seed = (ctx.obj or {}).get("seed", 0)
    click.echo(f"[config] command={ctx.command.name} seed={seed}", err=True)
    for name in sorted(params):
        click.echo(f"[config] {name.replace('_', '-')}={params[name]}", err=True)
    return params


def _seed(ctx: click.Context) -> int:
    return (ctx.obj or {}).get("seed", 0)


@click.group(no_args_is_help=False)
@click.option("--seed", type=int, default=0, show_default=True,
              help="Global seed for every stochastic step.")
@click.option("--config", "config_path", type=click.Path(dir_okay=False),
              default=None, help="key=value file merged under explicit flags.")
@click.pass_context
def cli(ctx: click.Context, seed: int, config_path: str | None) -> None:
    """Score, rank, and curate multi-agent driving scenarios."""
    file_config = _read_config_file(config_path)
    if "seed" in file_config and ctx.get_parameter_source("seed") is click.core.ParameterSource.DEFAULT:
        try:
            seed = int(file_config["seed"])
        except ValueError as exc:
            raise ConfigError(f"config seed must be an integer, got {file_config['seed']!r}") from exc
    ctx.obj = {"seed": seed, "file_config": file_config}


@cli.command()
@click.option("--dataset", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--out", type=click.Path(dir_okay=False), default=None,
              help="Optionally rewrite the validated dataset.")
@click.pass_context
def ingest(ctx: click.Context, dataset: str, out: str | None) -> None:
    """Validate a scenario file and report what it contains."""
    params = _resolve(ctx, {"dataset": dataset, "out": out})
    data = load_dataset(params["dataset"])
    n_agents = sum(len(s.agents) for s in data)
    click.echo(f"ingested {len(data)} scenarios, {n_agents} agents")
    if params["out"]:
        save_dataset(data, params["out"])
        click.echo(f"wrote {params['out']}")


@cli.command("extract-primitives")
@click.option("--dataset", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--horizon", required=True, type=float, help="Window span in seconds.")
@click.option("--max-count", type=int, default=64, show_default=True)
@click.option("--out", required=True, type=click.Path(dir_okay=False))
@click.pass_context
def extract_primitives_cmd(ctx: click.Context, dataset: str, horizon: float,
                           max_count: int, out: str) -> None:
    """Mine a behavior-diverse motion primitive library from recorded tracks."""
    params = _resolve(ctx, {"dataset": dataset, "horizon": horizon,
                            "max_count": max_count, "out": out})
    data = load_dataset(params["dataset"])
    lib = extract_primitives(data, params["horizon"], params["max_count"], seed=_seed(ctx))
    save_library(lib, params["out"])
    click.echo(f"extracted {len(lib)} primitives to {params['out']}")


@cli.command()
@click.option("--dataset", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--primitives", type=click.Path(exists=True, dir_okay=False), default=None)
@click.option("--predictions", type=click.Path(exists=True, dir_okay=False), default=None,
              help="External prediction cache; the reference predictor otherwise.")
@click.option("--nominal", type=click.Choice(GENERATOR_NAMES, case_sensitive=False),
              default="FutNone", show_default=True)
@click.option("--counterfactual", type=click.Choice(GENERATOR_NAMES, case_sensitive=False),
              default="HistPrim", show_default=True)
@click.option("--metric", type=click.Choice(METRICS), default="W2", show_default=True)
@click.option("--k", type=int, default=4, show_default=True, help="Prediction modes.")
@click.option("--target-policy", type=click.Choice(TARGET_POLICIES), default="ego",
              show_default=True)
@click.option("--agent-aggregation", type=click.Choice(AGENT_AGGREGATIONS), default="max",
              show_default=True)
@click.option("--variant-aggregation", type=click.Choice(VARIANT_AGGREGATIONS), default="max",
              show_default=True)
@click.option("--max-variants", type=int, default=8, show_default=True)
@click.option("--kld-samples", type=int, default=2000, show_default=True)
@click.option("--label", default=None, help="Metric name to write; derived otherwise.")
@click.option("--jobs", type=int, default=0, show_default="all cores",
              help="Worker processes; 0 means all cores.")
@click.option("--figures/--no-figures", default=True, show_default=True)
@click.option("--out", required=True, type=click.Path(dir_okay=False))
@click.pass_context
def score(ctx: click.Context, **kwargs) -> None:
    """Score every scenario with one surprise-potential configuration."""
    params = _resolve(ctx, kwargs)
    data = load_dataset(params["dataset"])
    cfg = SurpriseConfig(
        nominal=params["nominal"],
        counterfactual=params["counterfactual"],
        metric=params["metric"],
        K=params["k"],
        target_policy=params["target_policy"],
        agent_aggregation=params["agent_aggregation"],
        variant_aggregation=params["variant_aggregation"],
        max_variants=params["max_variants"],
        kld_samples=params["kld_samples"],
        label=params["label"],
    )
    lib = load_library(params["primitives"]) if params["primitives"] else None
    if params["predictions"]:
        cache = load_external(params["predictions"])
        for warning in cache.warnings:
            click.echo(f"warning: {warning}", err=True)
        predictor = CachedPredictor(cache)
    else:
        predictor = ReferencePredictor()
    jobs = params["jobs"] if params["jobs"] > 0 else (os.cpu_count() or 1)
    table = batch_score(data, [cfg], lib, predictor, seed=_seed(ctx), jobs=jobs)
    save_scores(table, params["out"])
    for note in table.diagnostics:
        click.echo(f"diagnostic: {note}", err=True)
    if params["figures"]:
        from .viz import save_score_histogram

        save_score_histogram(table, Path(params["out"]).with_suffix(".png"))
    click.echo(f"scored {len(data)} scenarios -> {params['out']}")


@cli.command()
@click.option("--dataset", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--figures/--no-figures", default=True, show_default=True)
@click.option("--out", required=True, type=click.Path(dir_okay=False))
@click.pass_context
def rules(ctx: click.Context, dataset: str, figures: bool, out: str) -> None:
    """Score every scenario with the rule-based baselines."""
    params = _resolve(ctx, {"dataset": dataset, "figures": figures, "out": out})
    data = load_dataset(params["dataset"])
    table = batch_rules(data, ReferencePredictor())
    save_scores(table, params["out"])
    if params["figures"]:
        from .viz import save_score_histogram

        save_score_histogram(table, Path(params["out"]).with_suffix(".png"))
    click.echo(f"scored {len(data)} scenarios -> {params['out']}")


@cli.command("fit-reward")
@click.option("--preferences", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--scores", "score_paths", required=True, multiple=True,
              type=click.Path(exists=True, dir_okay=False),
              help="Score tables supplying features; repeatable.")
@click.option("--features", default=None,
              help="Comma-separated feature metrics; all table metrics otherwise.")
@click.option("--l2", type=float, default=1e-3, show_default=True)
@click.option("--out", required=True, type=click.Path(dir_okay=False))
@click.pass_context
def fit_reward_cmd(ctx: click.Context, preferences: str, score_paths: tuple[str, ...],
                   features: str | None, l2: float, out: str) -> None:
    """Fit a linear reward model to pairwise preferences."""
    params = _resolve(ctx, {"preferences": preferences, "scores": list(score_paths),
                            "features": features, "l2": l2, "out": out})
    records = load_preferences(params["preferences"])
    tables = [load_scores(p) for p in params["scores"]]
    names = ([n.strip() for n in params["features"].split(",") if n.strip()]
             if params["features"] else sorted({m for t in tables for m in t.metrics()}))
    feature_map = build_feature_map(tables, names)
    model = fit_reward(records, feature_map, names, l2=params["l2"], seed=_seed(ctx))
    save_reward_model(model, params["out"])
    click.echo(
        f"fit {len(names)} features on {model.meta['n_records']} records in "
        f"{model.meta['iterations']} iterations, final loss {model.meta['final_loss']:.6f}"
    )


@cli.command()
@click.option("--model", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--scores", "score_paths", required=True, multiple=True,
              type=click.Path(exists=True, dir_okay=False))
@click.option("--figures/--no-figures", default=True, show_default=True)
@click.option("--out", required=True, type=click.Path(dir_okay=False))
@click.pass_context
def rank(ctx: click.Context, model: str, score_paths: tuple[str, ...],
         figures: bool, out: str) -> None:
    """Rank scenarios by a fitted reward model."""
    params = _resolve(ctx, {"model": model, "scores": list(score_paths),
                            "figures": figures, "out": out})
    reward = load_reward_model(params["model"])
    tables = [load_scores(p) for p in params["scores"]]
    feature_map = build_feature_map(tables, reward.feature_names)
    ranking = rank_dataset(reward, feature_map)
    scores_by_id = reward.score_map(feature_map)
    save_ranking(ranking, scores_by_id, params["out"])
    if params["figures"]:
        from .viz import save_ranking_curve

        save_ranking_curve(ranking, scores_by_id, Path(params["out"]).with_suffix(".png"))
    click.echo(f"ranked {len(ranking)} scenarios -> {params['out']}")


@cli.command("eval")
@click.option("--ranking", "ranking_path", required=True,
              type=click.Path(exists=True, dir_okay=False))
@click.option("--against", required=True, type=click.Path(exists=True, dir_okay=False),
              help="Reference ranking to compare with.")
@click.option("--top-frac", type=float, default=None,
              help="Also report AUC against labels derived from the reference's top fraction.")
@click.pass_context
def eval_cmd(ctx: click.Context, ranking_path: str, against: str,
             top_frac: float | None) -> None:
    """Compare a ranking against a reference ranking."""
    params = _resolve(ctx, {"ranking": ranking_path, "against": against,
                            "top_frac": top_frac})
    ranking, scores = load_ranking(params["ranking"])
    reference, _ = load_ranking(params["against"])
    rho = spearman_rankings(ranking, reference)
    click.echo(f"spearman {rho!r}")
    if params["top_frac"] is not None:
        labels = derive_labels(reference, params["top_frac"])
        auc = auc_roc(scores, labels)
        click.echo(f"auc {auc!r}")


@cli.command()
@click.option("--ranking", "ranking_path", required=True,
              type=click.Path(exists=True, dir_okay=False))
@click.option("--dataset", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--buckets", "n_buckets", type=int, default=5, show_default=True)
@click.option("--planner", type=click.Choice(("rule", "predictor")), default="rule",
              show_default=True)
@click.option("--figures/--no-figures", default=True, show_default=True)
@click.option("--out", required=True, type=click.Path(dir_okay=False))
@click.pass_context
def buckets(ctx: click.Context, ranking_path: str, dataset: str, n_buckets: int,
            planner: str, figures: bool, out: str) -> None:
    """Evaluate a planner on rank buckets of a dataset."""
    params = _resolve(ctx, {"ranking": ranking_path, "dataset": dataset,
                            "buckets": n_buckets, "planner": planner,
                            "figures": figures, "out": out})
    ranking, _ = load_ranking(params["ranking"])
    data = load_dataset(params["dataset"])
    predictor = ReferencePredictor() if params["planner"] == "predictor" else None
    reports = [
        evaluate_planner(params["planner"], bucket, data, predictor)
        for bucket in bucket_split(ranking, params["buckets"])
    ]
    save_bucket_report(reports, params["out"])
    if params["figures"]:
        from .viz import save_bucket_chart

        save_bucket_chart(reports, Path(params["out"]).with_suffix(".png"))
    for report in reports:
        click.echo(
            f"bucket {report.bucket}: mean_ttc {report.mean_ttc:.3f} over {report.n}"
        )


@cli.command()
@click.option("--ranking", "ranking_path", required=True,
              type=click.Path(exists=True, dir_okay=False))
@click.option("--tau", type=float, default=1.0, show_default=True)
@click.option("--figures/--no-figures", default=True, show_default=True)
@click.option("--out", required=True, type=click.Path(dir_okay=False))
@click.pass_context
def weights(ctx: click.Context, ranking_path: str, tau: float, figures: bool,
            out: str) -> None:
    """Write rank-decay sampling weights for a ranking."""
    params = _resolve(ctx, {"ranking": ranking_path, "tau": tau,
                            "figures": figures, "out": out})
    ranking, _ = load_ranking(params["ranking"])
    sample_weights = upsample_weights(ranking, params["tau"])
    save_weights(sample_weights, params["out"])
    if params["figures"]:
        from .viz import save_weight_curve

        save_weight_curve(sample_weights, Path(params["out"]).with_suffix(".png"))
    click.echo(f"wrote weights for {len(sample_weights.ids)} scenarios -> {params['out']}")


@cli.command("plan-eval")
@click.option("--dataset", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--plans", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--out", required=True, type=click.Path(dir_okay=False))
@click.pass_context
def plan_eval(ctx: click.Context, dataset: str, plans: str, out: str) -> None:
    """Evaluate external ego plans against the recorded scenes."""
    params = _resolve(ctx, {"dataset": dataset, "plans": plans, "out": out})
    data = load_dataset(params["dataset"])
    plan_map = load_plans(params["plans"])
    with open(params["out"], "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["scenario_id", "ade", "fde", "collision", "ttc"])
        for sid, plan_xy in plan_map.items():
            seg = canonical_segment(data.get(sid))
            m = plan_metrics(plan_xy, seg)
            writer.writerow([sid, repr(float(m.ade)), repr(float(m.fde)),
                             int(m.collision), repr(float(m.ttc))])
    click.echo(f"evaluated {len(plan_map)} plans -> {params['out']}")


@cli.command()
@click.option("--dataset", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--labels", required=True, type=click.Path(dir_okay=False))
@click.option("--port", type=int, default=8700, show_default=True)
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--strategy", type=click.Choice(("uniform-random", "coverage-balanced")),
              default="uniform-random", show_default=True)
@click.option("--ui-dir", type=click.Path(exists=True, file_okay=False), default=None,
              help="Static frontend to serve at /.")
@click.pass_context
def serve(ctx: click.Context, dataset: str, labels: str, port: int, host: str,
          strategy: str, ui_dir: str | None) -> None:
    """Run the pairwise annotation service."""
    params = _resolve(ctx, {"dataset": dataset, "labels": labels, "port": port,
                            "host": host, "strategy": strategy, "ui_dir": ui_dir})
    from .service import serve as run_service

    data = load_dataset(params["dataset"])
    click.echo(f"serving {len(data)} scenarios on {params['host']}:{params['port']}", err=True)
    run_service(data, params["labels"], port=params["port"], strategy=params["strategy"],
                seed=_seed(ctx), ui_dir=params["ui_dir"], host=params["host"])


@cli.group()
def metrics() -> None:
    """Shift-measure maintenance commands."""


@metrics.command("self-test")
@click.pass_context
def metrics_self_test(ctx: click.Context) -> None:
    """Run the analytic shift-measure checks and print pass/fail."""
    from .selftest import run_self_test

    failures = run_self_test(echo=lambda line: click.echo(line))
    if failures:
        raise DataError(f"{failures} self-test check(s) failed")


def dispatch(argv: list[str] | None = None) -> int:
    """Run the CLI and map errors onto documented exit codes."""
    try:
        cli.main(args=argv, prog_name="scenesift", standalone_mode=False)
    except click.exceptions.Exit as exc:
        return int(exc.exit_code)
    except click.UsageError as exc:
        exc.show()
        return 1
    except click.ClickException as exc:
        exc.show()
        return 1
    except click.Abort:
        click.echo("aborted", err=True)
        return 1
    except ConfigError as exc:
        click.echo(f"error: {exc}", err=True)
        return 1
    except ScenesiftError as exc:
        click.echo(f"error: {exc}", err=True)
        return 2
    return 0


def main() -> None:
    sys.exit(dispatch())


if __name__ == "__main__":
    main()
