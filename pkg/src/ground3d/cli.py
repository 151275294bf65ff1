"""`ground` command line: resolve single queries, run benchmarks,
generate synthetic benchmarks, or chat in a small REPL."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .errors import (
    ConfigError,
    GroundingError,
    OutOfGrammarError,
    SceneParseError,
    SceneValidationError,
)
from .evaluation import format_table, run_eval
from .generator import GeneratorConfig, generate_scene
from .navigation import object_to_waypoint
from .parser import parse
from .reasoner import ExternalReasonerConfig, resolve, run_external
from .scene import Scene, attach_captions, load_caption_sidecar, load_scene, save_scene
from .statements import (
    StatementConfig,
    build_statement_suite,
    read_statements,
    write_statements,
)
from .toolbox import ToolboxConfig

EXIT_OK = 0
EXIT_GROUNDING = 1
EXIT_IO = 3
EXIT_CONFIG = 4


def _load_config_file(path: str | None) -> dict:
    if path is None:
        return {}
    p = Path(path)
    if not p.exists():
        raise ConfigError(f"config file not found: {path}")
    text = p.read_text("utf-8")
    if p.suffix == ".toml":
        try:
            import tomllib  # py311+
        except ImportError:
            import tomli as tomllib
        return tomllib.loads(text)
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"bad config file {path}: {exc}") from exc


def _configs(args) -> tuple[ToolboxConfig, dict]:
    raw = _load_config_file(getattr(args, "config", None))
    toolbox_keys = {f for f in ToolboxConfig.__dataclass_fields__}
    toolbox = ToolboxConfig(**{k: v for k, v in raw.get("toolbox", {}).items() if k in toolbox_keys})
    return toolbox, raw


def _external_config(args, raw: dict) -> ExternalReasonerConfig | None:
    if not getattr(args, "external", False):
        return None
    section = raw.get("external", {})
    config = ExternalReasonerConfig.from_dict(section)
    if not config.base_url and not config.replay_path:
        raise ConfigError("--external needs external.base_url (or external.replay_path) in --config")
    return config


def _load_scene_with_captions(args) -> Scene:
    scene = load_scene(args.scene)
    if getattr(args, "captions", None):
        scene = attach_captions(scene, load_caption_sidecar(args.captions))
    if getattr(args, "no_captions", False):
        scene = scene.without_captions()
    return scene


def cmd_resolve(args) -> int:
    toolbox_config, raw = _configs(args)
    external = _external_config(args, raw)
    scene = _load_scene_with_captions(args)
    try:
        program = parse(args.query)
    except OutOfGrammarError as exc:
        if external is None:
            print(f"error: statement is out of grammar at {exc.position} "
                  "(use --external for free-form language)", file=sys.stderr)
            return EXIT_GROUNDING
        result = run_external(external, scene, args.query, toolbox_config=toolbox_config)
        _print_result(result, args)
        return EXIT_OK
    result = resolve(program, scene, toolbox_config)
    _print_result(result, args)
    return EXIT_OK


def _print_result(result, args) -> None:
    payload = result.to_dict()
    if not getattr(args, "trace", False):
        payload.pop("trace")
    print(json.dumps(payload, indent=1, sort_keys=True))


def cmd_eval(args) -> int:
    toolbox_config, raw = _configs(args)
    external = _external_config(args, raw)
    scene_dir = Path(args.scenes)
    scene_files = sorted(scene_dir.glob("*.json")) if scene_dir.is_dir() else [scene_dir]
    scenes = {}
    for path in scene_files:
        scene = load_scene(path)
        scenes[scene.scene_id] = scene
    statements, line_errors = read_statements(args.statements)
    for lineno, message in line_errors:
        print(f"warning: {args.statements}:{lineno}: {message}", file=sys.stderr)
    report = run_eval(
        scenes,
        statements,
        trials=args.trials,
        skip=args.skip,
        use_captions=not args.no_captions,
        toolbox_config=toolbox_config,
        external=external,
        trace_dir=args.trace_out,
        line_errors=line_errors,
    )
    print(format_table(report))
    if args.report:
        Path(args.report).write_text(report.to_json() + "\n", "utf-8")
        print(f"report written to {args.report}")
    return EXIT_OK


def cmd_gen(args) -> int:
    _, raw = _configs(args)
    gen_keys = {f for f in GeneratorConfig.__dataclass_fields__ if f != "classes"}
    gen_section = {k: v for k, v in raw.get("generator", {}).items() if k in gen_keys}
    for key in ("n_objects", "room"):
        if key in gen_section:
            gen_section[key] = tuple(gen_section[key])
    gen_config = GeneratorConfig(**gen_section)
    stmt_keys = {f for f in StatementConfig.__dataclass_fields__ if f != "relations"}
    stmt_config = StatementConfig(
        **{k: v for k, v in raw.get("statements", {}).items() if k in stmt_keys}
    )
    out = Path(args.out)
    scene_dir = out / "scenes"
    scene_dir.mkdir(parents=True, exist_ok=True)
    scenes = []
    for i in range(args.scenes):
        scene, annotations = generate_scene(gen_config, args.seed + i)
        save_scene(scene, scene_dir / f"{scene.scene_id}.json")
        scenes.append((scene, annotations))
    statements = build_statement_suite(scenes, args.statements, args.seed, stmt_config)
    write_statements(statements, out / "statements.jsonl")
    print(f"wrote {len(scenes)} scenes and {len(statements)} statements under {out}")
    return EXIT_OK


def cmd_repl(args) -> int:
    toolbox_config, raw = _configs(args)
    external = _external_config(args, raw)
    scene = _load_scene_with_captions(args)
    print(f"scene {scene.scene_id}: {len(scene.objects)} objects. :quit to exit.")
    while True:
        try:
            line = input("> ").strip()
        except EOFError:
            break
        if not line:
            continue
        if line in (":quit", ":q", ":exit"):
            break
        try:
            try:
                program = parse(line)
                result = resolve(program, scene, toolbox_config)
            except OutOfGrammarError:
                if external is None:
                    print("needs external reasoner (out of grammar); configure --external")
                    continue
                result = run_external(external, scene, line, toolbox_config=toolbox_config)
            obj = scene.object(result.target_id)
            waypoint = object_to_waypoint(scene, result.target_id)
            tools = "->".join(c.tool for c in result.trace) or result.path
            print(
                f"id={result.target_id} label={obj.label} "
                f"waypoint=({waypoint[0]:.2f}, {waypoint[1]:.2f}) via {tools}"
            )
        except GroundingError as exc:
            print(f"error: {exc}")
    return EXIT_OK


def build_arg_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="ground", description=__doc__)
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("resolve", help="ground one referring expression")
    p.add_argument("query")
    p.add_argument("--scene", required=True)
    p.add_argument("--captions", help="caption sidecar JSON to attach")
    p.add_argument("--no-captions", action="store_true")
    p.add_argument("--trace", action="store_true", help="include the tool-call trace")
    p.add_argument("--external", action="store_true")
    p.add_argument("--config")
    p.set_defaults(func=cmd_resolve)

    p = sub.add_parser("eval", help="run a statement benchmark")
    p.add_argument("--scenes", "--scene", dest="scenes", required=True,
                   help="scene file or directory of scene JSONs")
    p.add_argument("--statements", required=True)
    p.add_argument("--trials", type=int, default=1)
    p.add_argument("--skip", action="store_true", help="exclude skip-flagged statements")
    p.add_argument("--no-captions", action="store_true")
    p.add_argument("--external", action="store_true")
    p.add_argument("--config")
    p.add_argument("--trace-out", help="directory for per-statement traces")
    p.add_argument("--report", help="write the JSON report here")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("gen", help="generate a synthetic benchmark")
    p.add_argument("--out", required=True)
    p.add_argument("--scenes", type=int, default=10)
    p.add_argument("--statements", type=int, default=100)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--config")
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("repl", help="interactive grounding loop")
    p.add_argument("--scene", required=True)
    p.add_argument("--captions")
    p.add_argument("--no-captions", action="store_true")
    p.add_argument("--external", action="store_true")
    p.add_argument("--config")
    p.set_defaults(func=cmd_repl)
    return ap


def main(argv=None) -> int:
    args = build_arg_parser().parse_args(argv)
    try:
        return args.func(args)
    except (SceneParseError, SceneValidationError, FileNotFoundError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except GroundingError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_GROUNDING


if __name__ == "__main__":
    sys.exit(main())
