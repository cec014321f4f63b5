"""The `tad` command line: track, events, evaluate, curate, simulate, serve."""

from __future__ import annotations

import json
import logging
from collections import defaultdict
from pathlib import Path

import click

from ..curation import CurationStore
from ..evaluation import AbsentClassError, GroundTruthFrame, average_precision, categorize
from ..geometry import BoundingBox
from ..incidents import IncidentType
from ..tracking import ObjectClass
from .api import create_app
from .config import PipelineConfig
from .ingest import ingest_path
from .pipeline import run_pipeline
from .rounds import ConsumedVerdicts, RegisterOnlyTrainer, ensure_baseline, run_curation_round
from .store import EventStore

CONFIG_OPTION = click.option(
    "--config",
    "config_path",
    envvar="TAD_CONFIG",
    required=True,
    type=click.Path(exists=True, dir_okay=False, path_type=Path),
    help="Pipeline config JSON (or set TAD_CONFIG).",
)


@click.group()
@click.option("-v", "--verbose", is_flag=True, help="Enable info logging.")
def main(verbose: bool) -> None:
    logging.basicConfig(level=logging.INFO if verbose else logging.WARNING)


@main.command()
@CONFIG_OPTION
@click.option("--input", "input_path", required=True,
              type=click.Path(exists=True, dir_okay=False, path_type=Path),
              help="Detection-record JSONL file to replay.")
@click.option("--summary-out", type=click.Path(dir_okay=False, path_type=Path),
              help="Also write the run summary JSON here.")
def track(config_path: Path, input_path: Path, summary_out: Path | None) -> None:
    """Replay detections through tracking and incident rules."""
    config = PipelineConfig.from_file(config_path)
    summary = run_pipeline(config, input_path)
    doc = json.dumps(summary.to_dict(), indent=2, sort_keys=True)
    if summary_out:
        summary_out.write_text(doc + "\n")
    click.echo(doc)


@main.command()
@CONFIG_OPTION
@click.option("--status", type=click.Choice(["reviewed", "unreviewed"]))
@click.option("--type", "event_type", type=click.Choice([t.value for t in IncidentType]))
@click.option("--channel")
@click.option("--page", default=1, show_default=True)
@click.option("--page-size", default=20, show_default=True)
def events(config_path: Path, status, event_type, channel, page, page_size) -> None:
    """List stored incident events."""
    config = PipelineConfig.from_file(config_path)
    store = EventStore(config.event_log_path)
    matching = store.events(
        status=status,
        event_type=IncidentType(event_type) if event_type else None,
        channel=channel,
    )
    start = (page - 1) * page_size
    doc = {
        "events": [e.to_dict() for e in matching[start : start + page_size]],
        "total": len(matching),
        "page": page,
    }
    click.echo(json.dumps(doc, indent=2, sort_keys=True))


def _load_truth_frames(path: Path) -> list[GroundTruthFrame]:
    frames = []
    for line_no, line in enumerate(path.read_text().splitlines(), start=1):
        if not line.strip():
            continue
        try:
            doc = json.loads(line)
            frames.append(
                GroundTruthFrame(
                    frame_index=doc["frame"],
                    channel_id=doc["channel"],
                    objects=tuple(
                        (BoundingBox.from_list(o["box"]), ObjectClass(o["class"]))
                        for o in doc["objects"]
                    ),
                )
            )
        except (KeyError, ValueError, json.JSONDecodeError) as exc:
            raise click.ClickException(f"{path}:{line_no}: bad truth record: {exc}")
    return frames


@main.command()
@click.option("--detections", "detections_path", required=True,
              type=click.Path(exists=True, dir_okay=False, path_type=Path),
              help="Detection-record JSONL.")
@click.option("--truth", "truth_path", required=True,
              type=click.Path(exists=True, dir_okay=False, path_type=Path),
              help="Ground-truth JSONL: {channel, frame, objects: [{box, class}]}.")
@click.option("--iou", default=0.5, show_default=True, help="IoU match threshold.")
def evaluate(detections_path: Path, truth_path: Path, iou: float) -> None:
    """Score detections against ground truth: per-class AP and outcome counts."""
    ingest = ingest_path(detections_path)
    if ingest.quarantined:
        for q in ingest.quarantined:
            click.echo(f"quarantined line {q.line_no}: {q.reason}", err=True)
    detections = [r.to_detection() for records in ingest.streams.values() for r in records]
    truth_frames = _load_truth_frames(truth_path)

    truth_classes = sorted(
        {cls for frame in truth_frames for _, cls in frame.objects}, key=lambda c: c.value
    )
    ap = {}
    for cls in truth_classes:
        try:
            ap[cls.value] = average_precision(detections, truth_frames, cls, iou)
        except AbsentClassError:
            continue

    by_frame = defaultdict(list)
    for det in detections:
        by_frame[(det.channel_id, det.frame_index)].append(det)
    outcomes: dict[str, dict[str, int]] = defaultdict(lambda: {"tp": 0, "fp": 0, "fn": 0, "tn": 0})
    for frame in truth_frames:
        frame_counts = categorize(by_frame.get((frame.channel_id, frame.frame_index), []), frame, iou)
        for cls, count in frame_counts.items():
            agg = outcomes[cls.value]
            agg["tp"] += count.tp
            agg["fp"] += count.fp
            agg["fn"] += count.fn
            agg["tn"] += count.tn
    click.echo(json.dumps({"ap": ap, "outcomes": outcomes}, indent=2, sort_keys=True))


@main.command()
@CONFIG_OPTION
@click.option("--round-name", help="Name for the new manifest/model (default round-N).")
@click.option("--init-baseline", is_flag=True,
              help="Register an empty labeled manifest and baseline model if the registry is empty.")
def curate(config_path: Path, round_name, init_baseline) -> None:
    """Run one curation round over the store's unconsumed FP verdicts.

    Uses a register-only trainer: the FP manifest and model lineage are
    recorded; training itself is the toy detector's job (tad simulate) or an
    external system's.
    """
    config = PipelineConfig.from_file(config_path)
    event_store = EventStore(config.event_log_path)
    curation_store = CurationStore(config.manifest_dir, config.model_log_path)
    consumed = ConsumedVerdicts(config.consumed_path)
    if init_baseline:
        ensure_baseline(curation_store)
    result = run_curation_round(
        event_store, curation_store, RegisterOnlyTrainer(), consumed, round_name
    )
    click.echo(json.dumps(result.to_dict(), indent=2, sort_keys=True))


@main.command()
@click.option("--rounds", default=2, show_default=True)
@click.option("--seed", default=0, show_default=True, help="Master seed for the whole experiment.")
@click.option("--out", "out_path", type=click.Path(dir_okay=False, path_type=Path),
              help="Write the full JSON report here.")
def simulate(rounds: int, seed: int, out_path: Path | None) -> None:
    """Run the closed-loop FP-reduction experiment on synthetic scenarios."""
    from ..simulation import run_closed_loop

    report = run_closed_loop(master_seed=seed, rounds=rounds)
    for r in report.rounds:
        m = r.metrics
        ap = " ".join(f"{k}={v:.3f}" for k, v in m["ap"].items())
        heldout = " ".join(f"{k}={v:.1f}%" for k, v in m["fp_rate_heldout"].items())
        click.echo(
            f"round {r.round_index}: model={r.model_id} ap[{ap}] "
            f"fp_heldout[{heldout}] fire_alarms={m['heldout_fire_alarm_total']}"
        )
    if out_path:
        report.save(out_path)
        click.echo(f"report written to {out_path}")


@main.command()
@CONFIG_OPTION
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", default=8000, show_default=True)
def serve(config_path: Path, host: str, port: int) -> None:
    """Serve the review API over HTTP."""
    import uvicorn

    config = PipelineConfig.from_file(config_path)
    event_store = EventStore(config.event_log_path)
    curation_store = CurationStore(config.manifest_dir, config.model_log_path)
    consumed = ConsumedVerdicts(config.consumed_path)
    ensure_baseline(curation_store)
    app = create_app(event_store, curation_store, RegisterOnlyTrainer(), consumed)
    uvicorn.run(app, host=host, port=port)


if __name__ == "__main__":
    main()
