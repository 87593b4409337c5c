"""Command-line entry points.

Every error class maps to its own exit code so batch callers can branch
without scraping messages; `--json` additionally emits the structured
error on stderr.
"""

import dataclasses
import functools
import hashlib
import json
import sys
from pathlib import Path

import click

from .errors import (
    BehindCameraError,
    DegenerateGeometryError,
    EmptyRegionError,
    InsufficientKeypointsError,
    InvalidInputError,
    InvalidResponseError,
    ParseError,
    PipelineStageError,
    ScenarioIncompleteError,
    SingularCovarianceError,
    SketchMotionError,
    TrainingDivergedError,
    TransportError,
    ValidationError,
    error_to_dict,
)
from .geometry import load_calibration
from .instruction import SceneBundle, parse_instruction, parse_scene_bundle, validate_scene_bundle
from .lifting import (
    LiftingConfig,
    dump_distribution,
    lift_trajectory_pair,
    parse_pixel_trajectory,
)
from .models import ScriptedBackend, dump_scenario, live_backend_from_env, parse_scenario, record_scenario
from .pipeline import (
    PipelineConfig,
    export_plan,
    import_plan,
    plan_diagnostics,
    run_pipeline,
    trace_to_jsonl,
)

EXIT_CODES = {
    ValidationError: 2,
    ParseError: 3,
    InvalidInputError: 4,
    BehindCameraError: 5,
    DegenerateGeometryError: 6,
    EmptyRegionError: 7,
    SingularCovarianceError: 8,
    TransportError: 9,
    ScenarioIncompleteError: 10,
    InvalidResponseError: 11,
    InsufficientKeypointsError: 12,
    TrainingDivergedError: 13,
}


def exit_code_for(exc: SketchMotionError) -> int:
    # A stage wrapper exits with its cause's code so scripts see the
    # same code whether the error escaped the pipeline or a direct call.
    if isinstance(exc, PipelineStageError) and isinstance(exc.cause, SketchMotionError):
        return exit_code_for(exc.cause)
    for klass in type(exc).__mro__:
        if klass in EXIT_CODES:
            return EXIT_CODES[klass]
    return 1


def _guard(fn):
    @functools.wraps(fn)
    @click.pass_context
    def wrapper(ctx, *args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except SketchMotionError as e:
            if ctx.obj and ctx.obj.get("json"):
                click.echo(json.dumps({"error": error_to_dict(e)}, sort_keys=True), err=True)
            else:
                click.echo(f"error: {type(e).__name__}: {e}", err=True)
            sys.exit(exit_code_for(e))

    return wrapper


@click.group()
@click.option("--json", "json_errors", is_flag=True, help="Emit errors as JSON on stderr.")
@click.version_option(package_name="sketchmotion")
@click.pass_context
def main(ctx, json_errors):
    """Sketch-to-trajectory pipeline tools."""
    ctx.obj = {"json": json_errors}


def _load_bundle(path) -> SceneBundle:
    """Parse a scene bundle file, resolving image paths against its directory."""
    p = Path(path)
    bundle = parse_scene_bundle(p.read_bytes())
    paths = tuple(
        ip if Path(ip).is_absolute() else str(p.parent / ip) for ip in bundle.image_paths
    )
    return SceneBundle(
        views=bundle.views, image_paths=paths, min_baseline_deg=bundle.min_baseline_deg
    )


def _resolve_scenario_backend(ref: str) -> ScriptedBackend:
    for candidate in (Path(ref), Path(f"{ref}.json"), Path("scenarios") / f"{ref}.json"):
        if candidate.is_file():
            return ScriptedBackend(parse_scenario(candidate.read_bytes()))
    raise ValidationError(f"no scenario file found for {ref!r}", field="scenario")


def _pipeline_config(config_path, seed, horizon) -> PipelineConfig:
    doc = json.loads(Path(config_path).read_text()) if config_path else {}
    if seed is not None:
        doc.setdefault("lifting", {})["rng_seed"] = seed
    if horizon is not None:
        doc["horizon"] = horizon
    return PipelineConfig.from_dict(doc)


@main.command()
@click.option("--instruction", "instruction_path", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--scene", "scene_path", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--scenario", "scenario_ref", required=True, help="Scenario name or JSON file for the scripted backend.")
@click.option("--seed", type=int, default=None, help="Lifting RNG seed override.")
@click.option("--horizon", type=int, default=None)
@click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False), default=None)
@click.option("--out", "out_path", type=click.Path(dir_okay=False), required=True)
@click.option("--trace", "trace_path", type=click.Path(dir_okay=False), default=None)
@click.option("--report", "report_dir", type=click.Path(file_okay=False), default=None)
@_guard
def plan(instruction_path, scene_path, scenario_ref, seed, horizon, config_path, out_path, trace_path, report_dir):
    """Run the full pipeline against a recorded scenario."""
    instruction = parse_instruction(Path(instruction_path).read_bytes())
    bundle = _load_bundle(scene_path)
    config = _pipeline_config(config_path, seed, horizon)
    backend = _resolve_scenario_backend(scenario_ref)
    trace = []
    artifacts = {}
    result = run_pipeline(instruction, bundle, config, backend, trace=trace, artifacts=artifacts)
    data = export_plan(result)
    Path(out_path).write_bytes(data)
    if trace_path:
        Path(trace_path).write_bytes(trace_to_jsonl(trace))
    if report_dir:
        from .report import write_plan_report

        report = plan_diagnostics(result, bundle, artifacts["xi"])
        for written in write_plan_report(report, report_dir):
            click.echo(f"wrote {written}")
    digest = hashlib.sha256(data).hexdigest()
    click.echo(f"wrote {out_path} (horizon {result.horizon}, sha256 {digest[:12]})")


@main.command()
@click.option("--xi1", "xi1_path", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--xi2", "xi2_path", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--calib", "calib_path", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False), default=None)
@click.option("--seed", type=int, default=None)
@click.option("--out", "out_path", type=click.Path(dir_okay=False), required=True)
@_guard
def lift(xi1_path, xi2_path, calib_path, config_path, seed, out_path):
    """Lift two per-view pixel trajectories into a 3D distribution."""
    xi1 = parse_pixel_trajectory(Path(xi1_path).read_bytes())
    xi2 = parse_pixel_trajectory(Path(xi2_path).read_bytes())
    views = load_calibration(Path(calib_path).read_bytes())
    if len(views) != 2:
        raise ValidationError(f"calibration must define exactly 2 views, got {len(views)}", field="calib")
    doc = json.loads(Path(config_path).read_text()) if config_path else {}
    if seed is not None:
        doc["rng_seed"] = seed
    config = LiftingConfig.from_dict(doc)
    dist = lift_trajectory_pair(xi1, xi2, (views[0], views[1]), config)
    Path(out_path).write_bytes(dump_distribution(dist))
    click.echo(f"wrote {out_path} (horizon {dist.horizon})")


@main.command()
@click.option("--demo", "demo_path", type=click.Path(exists=True, dir_okay=False), default=None)
@click.option("--from-plan", "plan_path", type=click.Path(exists=True, dir_okay=False), default=None)
@click.option("--rollouts", type=int, default=32, show_default=True)
@click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False), default=None)
@click.option("--seed", type=int, default=None, help="Training seed override.")
@click.option("--scratch", is_flag=True, help="Ignore demonstrations and train from scratch.")
@click.option("--out", "out_dir", type=click.Path(file_okay=False), required=True)
@_guard
def train(demo_path, plan_path, rollouts, config_path, seed, scratch, out_dir):
    """Train a policy and write checkpoints plus the return curve (CSV and PNG)."""
    from .report import write_curve_outputs
    from .rl import (
        TD3BCConfig,
        ToyEnv,
        build_demo_dataset,
        dump_config,
        dump_demo_dataset,
        dump_net,
        parse_config,
        parse_demo_dataset,
        td3bc_train,
    )

    config = parse_config(Path(config_path).read_bytes()) if config_path else TD3BCConfig()
    if seed is not None:
        config = dataclasses.replace(config, seed=seed)
    env = ToyEnv()
    demo = None
    wrote_demo = None
    if not scratch:
        if (demo_path is None) == (plan_path is None):
            raise ValidationError("need exactly one of --demo or --from-plan (or --scratch)", field="demo")
        if demo_path is not None:
            demo = parse_demo_dataset(Path(demo_path).read_bytes())
        else:
            dist = import_plan(Path(plan_path).read_bytes()).distribution
            demo = build_demo_dataset(dist, env, n_rollouts=rollouts, rng=config.seed)
            wrote_demo = True
    result = td3bc_train(env, demo, config)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "policy.bin").write_bytes(dump_net(result.policy))
    (out / "critic.bin").write_bytes(dump_net(result.critic))
    (out / "config.json").write_bytes(dump_config(result.config))
    if wrote_demo:
        (out / "demo.jsonl").write_bytes(dump_demo_dataset(demo))
    for written in write_curve_outputs(result.curve, out):
        click.echo(f"wrote {written}")
    final = result.curve[-1]["success_rate"] if result.curve else float("nan")
    click.echo(f"final success rate {final:.3f} over {int(config.total_steps)} steps")


@main.group()
def scenario():
    """Record or replay scripted model scenarios."""


@scenario.command("record")
@click.option("--instruction", "instruction_path", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--scene", "scene_path", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--name", default="recorded", show_default=True)
@click.option("--seed", type=int, default=None)
@click.option("--horizon", type=int, default=None)
@click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False), default=None)
@click.option("--out", "out_path", type=click.Path(dir_okay=False), required=True)
@click.option("--plan-out", "plan_out", type=click.Path(dir_okay=False), default=None)
@_guard
def scenario_record(instruction_path, scene_path, name, seed, horizon, config_path, out_path, plan_out):
    """Drive the pipeline against the live backend and freeze the exchanges."""
    instruction = parse_instruction(Path(instruction_path).read_bytes())
    bundle = _load_bundle(scene_path)
    config = _pipeline_config(config_path, seed, horizon)
    produced = {}

    def run(backend):
        produced["plan"] = run_pipeline(instruction, bundle, config, backend)

    frozen = record_scenario(live_backend_from_env(), name, run)
    Path(out_path).write_bytes(dump_scenario(frozen))
    if plan_out:
        Path(plan_out).write_bytes(export_plan(produced["plan"]))
    click.echo(f"wrote {out_path} ({len(frozen.entries)} exchanges)")


@scenario.command("replay")
@click.option("--scenario", "scenario_path", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--instruction", "instruction_path", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--scene", "scene_path", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--seed", type=int, default=None)
@click.option("--horizon", type=int, default=None)
@click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False), default=None)
@click.option("--out", "out_path", type=click.Path(dir_okay=False), default=None)
@_guard
def scenario_replay(scenario_path, instruction_path, scene_path, seed, horizon, config_path, out_path):
    """Re-run the pipeline from a frozen scenario and print the plan digest."""
    instruction = parse_instruction(Path(instruction_path).read_bytes())
    bundle = _load_bundle(scene_path)
    config = _pipeline_config(config_path, seed, horizon)
    backend = ScriptedBackend(parse_scenario(Path(scenario_path).read_bytes()))
    result = run_pipeline(instruction, bundle, config, backend)
    data = export_plan(result)
    if out_path:
        Path(out_path).write_bytes(data)
    click.echo(f"plan sha256 {hashlib.sha256(data).hexdigest()}")


@main.command()
@click.option("--scene", "scene_path", type=click.Path(exists=True, dir_okay=False), default=None)
@click.option("--instruction", "instruction_path", type=click.Path(exists=True, dir_okay=False), default=None)
@_guard
def validate(scene_path, instruction_path):
    """Validate a scene bundle or an instruction file."""
    if (scene_path is None) == (instruction_path is None):
        raise ValidationError("need exactly one of --scene or --instruction")
    if scene_path is not None:
        diags = validate_scene_bundle(_load_bundle(scene_path))
        for d in diags:
            click.echo(d)
        if diags:
            sys.exit(1)
        click.echo("scene bundle ok")
    else:
        instr = parse_instruction(Path(instruction_path).read_bytes())
        click.echo(f"instruction ok ({len(instr.strokes)} strokes, {len(instr.labels)} labels)")


@main.group()
def report():
    """Render delimited outputs and figures from saved artifacts."""


@report.command("curve")
@click.option("--csv", "csv_path", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--out", "out_dir", type=click.Path(file_okay=False), required=True)
@click.option("--stem", default="curve", show_default=True)
@_guard
def report_curve(csv_path, out_dir, stem):
    """Re-render a training curve CSV to CSV plus PNG in a directory."""
    from .report import write_curve_outputs
    from .rl import parse_curve_csv

    rows = parse_curve_csv(Path(csv_path).read_bytes())
    for written in write_curve_outputs(rows, out_dir, stem=stem):
        click.echo(f"wrote {written}")


@report.command("plan")
@click.option("--plan", "plan_path", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--scene", "scene_path", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--xi1", "xi1_path", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--xi2", "xi2_path", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--out", "out_dir", type=click.Path(file_okay=False), required=True)
@click.option("--stem", default="plan_report", show_default=True)
@_guard
def report_plan(plan_path, scene_path, xi1_path, xi2_path, out_dir, stem):
    """Reprojection QA for a saved plan: CSV plus PNG."""
    from .report import write_plan_report

    result = import_plan(Path(plan_path).read_bytes())
    bundle = _load_bundle(scene_path)
    xi = (
        parse_pixel_trajectory(Path(xi1_path).read_bytes()),
        parse_pixel_trajectory(Path(xi2_path).read_bytes()),
    )
    diag = plan_diagnostics(result, bundle, xi)
    for written in write_plan_report(diag, out_dir, stem=stem):
        click.echo(f"wrote {written}")
    click.echo(f"max reprojection error {diag['max_reproj_px']:.3f} px")


@main.command()
@click.option("--port", type=int, default=8000, show_default=True)
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--data", "data_dir", type=click.Path(file_okay=False), default=None)
@click.option("--ui", "ui_dir", type=click.Path(file_okay=False), default=None)
@_guard
def serve(port, host, data_dir, ui_dir):
    """Start the HTTP service."""
    import uvicorn

    from .service import create_app

    uvicorn.run(create_app(data_dir=data_dir, ui_dir=ui_dir), host=host, port=port)


if __name__ == "__main__":
    main()
