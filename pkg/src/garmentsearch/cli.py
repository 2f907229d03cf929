"""Command-line surface: ingest, annotate, train, query, eval, serve."""

from __future__ import annotations

import json
import sys
from pathlib import Path

import click

from . import corpus, evaluation, query as querymod, service


class _Ctx:
    def __init__(self, config, seed, data_dir):
        settings = service.EngineSettings.load(config)
        if data_dir:
            settings.data_dir = Path(data_dir)
        if seed is not None:
            settings.seed = seed
        self.engine = service.Engine(settings)


@click.group()
@click.option("--config", type=click.Path(), default=None, help="TOML config file.")
@click.option("--seed", type=int, default=None)
@click.option("--data-dir", type=click.Path(), default=None)
@click.pass_context
def main(ctx, config, seed, data_dir):
    """Text-query person retrieval over one-class color models."""
    ctx.obj = _Ctx(config, seed, data_dir)


@main.command()
@click.argument("dataset")
@click.pass_obj
def ingest(obj, dataset):
    """Segment and cache a dataset under <data-dir>/datasets/DATASET."""
    ds = obj.engine.ingest(dataset)
    click.echo(f"ingested {dataset}: {len(ds.sample_ids)} samples, "
               f"{len(ds.annotations)} annotations")


@main.command()
@click.argument("dataset")
@click.argument("image_id")
@click.argument("garment", type=click.Choice(["upper", "lower"]))
@click.argument("color_label")
@click.option("--author", default="cli")
@click.pass_obj
def annotate(obj, dataset, image_id, garment, color_label, author):
    """Record one garment color annotation."""
    created = obj.engine.annotate(
        dataset, corpus.Annotation(image_id, garment, color_label, author=author)
    )
    click.echo("created" if created else "already present")


@main.command()
@click.argument("dataset")
@click.option("--label", required=True)
@click.option("--garment", type=click.Choice(["upper", "lower"]), required=True)
@click.option("--k", type=int, default=None, help="Positive sample count.")
@click.option("--engine", "engine_name",
              type=click.Choice([service.GENERATIVE, service.DISCRIMINATIVE]),
              default=service.GENERATIVE)
@click.pass_obj
def train(obj, dataset, label, garment, k, engine_name):
    """Train and publish a color model."""
    model_id = obj.engine.train(dataset, label, garment, engine=engine_name, k=k)
    click.echo(model_id)


@main.command(name="query")
@click.argument("dataset")
@click.argument("text")
@click.option("--top", type=int, default=10)
@click.option("--engine", "engine_name",
              type=click.Choice([service.GENERATIVE, service.DISCRIMINATIVE]),
              default=service.GENERATIVE)
@click.pass_obj
def query_cmd(obj, dataset, text, top, engine_name):
    """Parse TEXT and rank the dataset against it."""
    result = obj.engine.retrieve(dataset, text=text, engine=engine_name, top_n=top)
    click.echo(json.dumps(result, indent=1))


@main.group(name="eval")
def eval_group():
    """Evaluation protocols."""


def _parse_queries(raw):
    out = []
    for spec in raw:
        ast = querymod.parse(spec)
        for leaf in querymod.leaves(ast):
            out.append((leaf.garment, leaf.color_label))
    return out


@eval_group.command()
@click.argument("dataset")
@click.option("--query", "queries", multiple=True, required=True,
              help='e.g. "red shirt"; repeatable.')
@click.option("--k", "k_list", multiple=True, type=int, default=(1, 5, 10))
@click.option("--trials", type=int, default=10)
@click.option("--out", type=click.Path(), default="report")
@click.pass_obj
def robustness(obj, dataset, queries, k_list, trials, out):
    """Repeated-split BEP / P@N table."""
    ds = obj.engine.dataset(dataset)
    results = evaluation.run_robustness(
        ds, _parse_queries(queries), list(k_list), trials=trials,
        seed=obj.engine.settings.seed,
    )
    out_dir = obj.engine.reports_dir / out
    evaluation.report_emit(results, out_dir)
    click.echo(str(out_dir / "report.txt"))


@eval_group.command()
@click.argument("train_dataset")
@click.argument("test_datasets", nargs=-1, required=True)
@click.option("--query", "queries", multiple=True, required=True)
@click.option("--k", "k_list", multiple=True, type=int, default=(1, 10))
@click.option("--trials", type=int, default=10)
@click.option("--out", type=click.Path(), default="cross_report")
@click.pass_obj
def cross(obj, train_dataset, test_datasets, queries, k_list, trials, out):
    """Cross-database transfer evaluation."""
    train_ds = obj.engine.dataset(train_dataset)
    test_ds = [obj.engine.dataset(n) for n in test_datasets]
    results = evaluation.run_cross_database(
        train_ds, test_ds, _parse_queries(queries), list(k_list), trials=trials,
        seed=obj.engine.settings.seed,
    )
    out_dir = obj.engine.reports_dir / out
    evaluation.report_emit(results, out_dir)
    click.echo(str(out_dir / "report.txt"))


@eval_group.command()
@click.argument("dataset")
@click.option("--query", "query_spec", required=True)
@click.option("--k", "k_list", multiple=True, type=int, default=(1, 5, 10, 20, 30))
@click.option("--engine", "engine_name",
              type=click.Choice([service.GENERATIVE, service.DISCRIMINATIVE]),
              default=service.GENERATIVE)
@click.pass_obj
def timing(obj, dataset, query_spec, k_list, engine_name):
    """Train/score wall-clock versus training-set size."""
    ds = obj.engine.dataset(dataset)
    (q,) = _parse_queries([query_spec])[:1] or [None]
    result = evaluation.run_timing(ds, q, list(k_list), engine_name,
                                   seed=obj.engine.settings.seed)
    click.echo(json.dumps(result, indent=1))


@main.command()
@click.option("--port", type=int, default=None)
@click.pass_obj
def serve(obj, port):
    """Run the HTTP API."""
    import uvicorn

    app = service.create_app(obj.engine)
    uvicorn.run(app, host="127.0.0.1", port=port or obj.engine.settings.port)


def run() -> int:
    try:
        main(standalone_mode=False)
    except click.UsageError as exc:
        exc.show()
        return 2
    except click.ClickException as exc:
        exc.show()
        return 1
    except click.exceptions.Abort:
        return 1
    except service.EngineError as exc:
        click.echo(f"error: {exc}", err=True)
        return 1
    except (corpus.AnnotationError, corpus.SplitError, querymod.ParseError) as exc:
        click.echo(f"error: {exc}", err=True)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(run())
