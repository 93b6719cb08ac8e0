"""Command-line entry points for the offline harness."""

from __future__ import annotations

import sys
from pathlib import Path

import click

from scribeloop import harness


@click.group()
def main():
    """Offline analysis of the correction loop."""


@main.command()
@click.option("--features", "features_dir", required=True, type=click.Path(exists=True))
@click.option("--labels", "labels_dir", required=True, type=click.Path(exists=True))
@click.option("--init", "init_dir", default="none", show_default=True,
              help="Directory of prelabel documents, or 'none'.")
@click.option("--variant", type=click.Choice([v.value for v in harness.PolicyVariant]),
              default="full", show_default=True)
@click.option("--budget-mult", type=float, default=1.5, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--model", "model_path", default=None, type=click.Path(exists=True),
              help="Pretrained proposal checkpoint; omit to pretrain on the cases.")
@click.option("--out", "out_path", required=True, type=click.Path())
def run(features_dir, labels_dir, init_dir, variant, budget_mult, seed, model_path, out_path):
    """Run one policy variant over a case directory and write a report."""
    init = None if init_dir == "none" else init_dir
    cases = harness.load_cases(features_dir, labels_dir, init)
    if not cases:
        raise click.ClickException("no cases found (need matching *.fts and *.json stems)")
    model = None
    if model_path is not None:
        from scribeloop.proposal import load_checkpoint

        model = load_checkpoint(model_path)
    report = harness.run_policy(
        cases, harness.PolicyVariant(variant), seed=seed, budget_mult=budget_mult, model=model
    )
    Path(out_path).write_text(report.to_json(), encoding="utf-8")
    click.echo(f"{len(cases)} cases, {report.accepted_steps} accepted corrections")
    for k in sorted(report.final):
        click.echo(f"  {k}: {report.final[k]:.4f}")
    if report.failures:
        click.echo(f"  failures: {report.failures}", err=True)


@main.command()
@click.argument("report_path", type=click.Path(exists=True))
@click.option("--metric", default="f1@5", show_default=True)
def curve(report_path, metric):
    """Print the budget curve (step, mean metric) of a report."""
    report = harness.RunReport.from_json(Path(report_path).read_text(encoding="utf-8"))
    for step, value in harness.budget_curve(report, metric):
        click.echo(f"{step}\t{value:.6f}")


@main.command()
@click.argument("report_path", type=click.Path(exists=True))
def latency(report_path):
    """Print per-component latency statistics of a report."""
    report = harness.RunReport.from_json(Path(report_path).read_text(encoding="utf-8"))
    stats = harness.latency_report(report)
    if not stats:
        click.echo("no latency samples recorded", err=True)
        sys.exit(1)
    click.echo("component\tmean_ms\tstd_ms\tp95_ms\tp99_ms\tn")
    for cat in harness.LATENCY_CATEGORIES:
        if cat not in stats:
            continue
        s = stats[cat]
        click.echo(
            f"{cat}\t{s['mean'] * 1e3:.2f}\t{s['std'] * 1e3:.2f}"
            f"\t{s['p95'] * 1e3:.2f}\t{s['p99'] * 1e3:.2f}\t{s['count']}"
        )


if __name__ == "__main__":
    main()
