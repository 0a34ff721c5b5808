"""Scenario configuration: human-readable key/value sections.

The format is INI-style. Cells are `x,y` pairs separated by spaces,
boxes are `id:x,y`, and clause text lives in referenced files (paths
relative to the config file). See the bundled scenarios for the schema
in action.

    [run]                      ; harness limits and seed
    ticks = 600
    seed = 1
    messages = 10000
    [grid]                     ; forks only
    width = 7
    height = 5
    boxes = b1:4,1 b2:2,2
    shelves = 0,4 1,4
    walls =
    trucks = 6,0
    known_layout = true
    situations = situations.pl ; clause file reference
    [forklift:f1]
    position = 0,0
    heading = e
    [reaction:graspBox0]       ; applies to every forklift
    situation = boxInFront
    precondition = not(holding(_))
    skill = graspBox
    args = Box
    assert = holding(Box)
    retract = location(box(Box), _, _)
    [queens]                   ; queens only
    n = 8

Conversation classes may also be declared in config: a
`[conversation:NAME]` section lists states/initial/finals, and ordered
`[rule:NAME:RULE]` sections give each transition's guard clause text,
optional belief effects, and an outgoing message template
(`send = RECEIVER PERFORMATIVE CONTENT`, receiver `peers` broadcasts).
"""

from __future__ import annotations

import configparser
import os

from ..conv import ConvRule, ConversationClass, MessageTemplate, register_conversation_class
from ..errors import ConfigInvalid
from ..kernel import KSDescriptor
from ..logic import Clause, parse_term
from ..react import Reaction, assert_effect, retract_effect, send_effect
from .forks import BOX_IN_FRONT, ForkliftSpec, ForksConfig, GRASP_REACTION


def _cell(text: str) -> tuple[int, int]:
    try:
        x, y = text.split(",")
        return int(x), int(y)
    except ValueError as err:
        raise ConfigInvalid(f"bad cell {text!r}; expected x,y") from err


def _cells(text: str) -> list[tuple[int, int]]:
    return [_cell(part) for part in text.split()]


def _boxes(text: str) -> dict[str, tuple[int, int]]:
    out: dict[str, tuple[int, int]] = {}
    for part in text.split():
        try:
            box_id, cell = part.split(":")
        except ValueError as err:
            raise ConfigInvalid(f"bad box {part!r}; expected id:x,y") from err
        if box_id in out:
            raise ConfigInvalid(f"duplicate box id {box_id!r}")
        out[box_id] = _cell(cell)
    return out


def _read(path: str) -> configparser.ConfigParser:
    parser = configparser.ConfigParser()
    loaded = parser.read(path)
    if not loaded:
        raise ConfigInvalid(f"cannot read config file {path!r}")
    return parser


def _reaction_from_section(name: str, section) -> Reaction:
    effects = []
    for key in ("assert", "retract"):
        raw = section.get(key, "")
        for template in filter(None, (part.strip() for part in raw.split(";"))):
            builder = assert_effect if key == "assert" else retract_effect
            effects.append(builder(template))
    if section.get("send"):
        receiver, _, template = section["send"].partition(" ")
        effects.append(send_effect(receiver, template.strip()))
    try:
        return Reaction(
            name=name,
            situation_name=section["situation"],
            precondition=section.get("precondition", "true"),
            selector=section["skill"],
            args=tuple(section.get("args", "").split()),
            effects=tuple(effects),
        )
    except KeyError as missing:
        raise ConfigInvalid(f"reaction {name!r} missing key {missing}") from None


def load_forks_config(path: str) -> ForksConfig:
    parser = _read(path)
    if "grid" not in parser:
        raise ConfigInvalid("forks config needs a [grid] section")
    grid = parser["grid"]
    run = parser["run"] if "run" in parser else {}
    try:
        config = ForksConfig(
            width=int(grid["width"]),
            height=int(grid["height"]),
            boxes=_boxes(grid.get("boxes", "")),
            shelves=_cells(grid.get("shelves", "")),
            walls=_cells(grid.get("walls", "")),
            trucks=_cells(grid.get("trucks", "")),
            ticks=int(run.get("ticks", 600)),
            seed=int(run.get("seed", 1)),
            known_layout=str(grid.get("known_layout", "true")).lower() != "false",
        )
    except KeyError as missing:
        raise ConfigInvalid(f"[grid] missing key {missing}") from None
    if grid.get("situations"):
        clause_path = os.path.join(os.path.dirname(os.path.abspath(path)),
                                   grid["situations"])
        try:
            with open(clause_path, encoding="utf-8") as fh:
                config.situations_text = fh.read()
        except OSError as err:
            raise ConfigInvalid(f"cannot read situations file: {err}") from err
    else:
        config.situations_text = BOX_IN_FRONT
    forklifts = []
    reactions = []
    for section_name in parser.sections():
        if section_name.startswith("forklift:"):
            section = parser[section_name]
            try:
                spec = ForkliftSpec(
                    name=section_name.split(":", 1)[1],
                    position=_cell(section["position"]),
                    heading=section.get("heading", "n"),
                )
            except KeyError as missing:
                raise ConfigInvalid(f"[{section_name}] missing {missing}") from None
            spec.knowledge_sources = _ks_descriptors(section)
            forklifts.append(spec)
        elif section_name.startswith("reaction:"):
            reactions.append(_reaction_from_section(
                section_name.split(":", 1)[1], parser[section_name]))
    if not forklifts:
        raise ConfigInvalid("no [forklift:*] sections")
    load_conversation_classes(parser)
    config.forklifts = forklifts
    config.reactions = tuple(reactions) if reactions else (GRASP_REACTION,)
    _validate_forks(config)
    return config


def _ks_descriptors(section) -> tuple[KSDescriptor, ...]:
    """Parse `knowledge_sources = goto-xy forward-planner` plus budgets."""
    kinds = section.get("knowledge_sources", "goto-xy").split()
    params: dict[str, object] = {}
    if section.get("planner_budget"):
        params["node_budget"] = int(section["planner_budget"])
    return tuple(KSDescriptor(kind, dict(params)) for kind in kinds)


def _validate_forks(config: ForksConfig) -> None:
    config.build_grid()  # placement errors surface as ConfigInvalid
    if config.ticks < 1:
        raise ConfigInvalid("ticks must be positive")


def load_conversation_classes(parser: configparser.ConfigParser) -> list[ConversationClass]:
    """Build and register conversation classes declared in the config.

    Rule order follows section order; guards are clause text evaluated
    against the mental state plus the event's transient facts.
    """
    classes = []
    for section_name in parser.sections():
        if not section_name.startswith("conversation:"):
            continue
        name = section_name.split(":", 1)[1]
        section = parser[section_name]
        try:
            states = frozenset(section["states"].split())
            initial = section["initial"]
        except KeyError as missing:
            raise ConfigInvalid(f"[{section_name}] missing {missing}") from None
        finals = frozenset(section.get("finals", "").split())
        rules = []
        prefix = f"rule:{name}:"
        for rule_section_name in parser.sections():
            if not rule_section_name.startswith(prefix):
                continue
            rule = parser[rule_section_name]
            rule_name = rule_section_name[len(prefix):]
            try:
                rules.append(ConvRule(
                    name=rule_name,
                    from_state=rule["from"],
                    to_state=rule["to"],
                    such_that=rule.get("such_that", "true"),
                    do_before=_belief_effects_hook(rule),
                    send_message=_message_template(rule.get("send")),
                ))
            except KeyError as missing:
                raise ConfigInvalid(
                    f"[{rule_section_name}] missing {missing}") from None
        conv_class = ConversationClass(name=name, states=states, initial=initial,
                                       finals=finals, rules=tuple(rules))
        register_conversation_class(conv_class)
        classes.append(conv_class)
    return classes


def _belief_effects_hook(section):
    asserts = [part.strip() for part in section.get("assert", "").split(";") if part.strip()]
    retracts = [part.strip() for part in section.get("retract", "").split(";") if part.strip()]
    if not asserts and not retracts:
        return None

    def hook(instance, event, bindings):
        state = instance.agent.mental_state
        for text in retracts:
            state.retract_clause("beliefs", bindings.resolve(parse_term(text)))
        for text in asserts:
            state.assert_clause("beliefs", Clause(bindings.resolve(parse_term(text))))

    return hook


def _message_template(raw: str | None) -> MessageTemplate | None:
    if not raw:
        return None
    try:
        receiver, performative, content = raw.split(None, 2)
    except ValueError as err:
        raise ConfigInvalid(
            f"bad send template {raw!r}; expected RECEIVER PERFORMATIVE CONTENT") from err
    return MessageTemplate(performative, receiver, content)


def load_queens_config(path: str) -> dict:
    parser = _read(path)
    queens = parser["queens"] if "queens" in parser else {}
    run = parser["run"] if "run" in parser else {}
    out = {
        "n": int(queens.get("n", 8)),
        "seed": int(run.get("seed", 1)),
        "message_cap": int(run.get("messages", 10_000)),
    }
    if out["n"] < 1:
        raise ConfigInvalid("n must be >= 1")
    return out


def default_forks_path() -> str:
    return os.path.join(os.path.dirname(__file__), "scenarios", "forks_default.ini")
