"""Scenario cards and pose-based trajectory classifiers.

Each machine-classifiable card carries labeling criteria; its detector
turns them into per-step predicates on a resampled episode and emits one
label per maximal window in which they hold. Detectors are deterministic
and depend only on relative geometry, so labels are invariant under rigid
transforms of the episode.

Overlap arbitration: a blind-corner window explains away plain
intersection labels for the same pair, and crowd-flow windows explain
away pairwise overtaking/intersection labels inside them. Without this,
every crowd episode would also be labeled with its constituent pairwise
encounters, which is not how the scenario vocabulary is used.
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass
from typing import Callable, Mapping, Optional, Sequence

import numpy as np

from .core import AgentKind, AgentRecord, Episode, common_timeline, median_sample_interval
from .errors import InvariantError, MalformedDocument, SchemaError, UnknownCard
from .geometry import segment_blocked, wrap_angle
from .ingest import canonical_json_bytes

log = logging.getLogger(__name__)

CLASSIFIABLE_SCENARIOS = (
    "frontal_approach",
    "robot_overtaking",
    "pedestrian_overtaking",
    "intersection",
    "blind_corner",
    "parallel_traffic",
    "perpendicular_traffic",
)


@dataclass(frozen=True)
class ClassifierParams:
    """Thresholds for the labeling criteria.

    Angles are radians. ``crossing_angle_window`` is the half-width of the
    accepted band around perpendicular (90 degrees +- window). The 2 m
    proximity default mirrors the usual intersection labeling convention
    of passing within two meters.
    """

    facing_angle_max: float = math.radians(30.0)
    approach_speed_min: float = 0.1
    min_clearance: float = 0.2
    proximity_max: float = 2.0
    crossing_angle_window: float = math.radians(30.0)
    overtake_speed_ratio_min: float = 1.2
    min_crowd_size: int = 5
    min_window_duration: float = 0.5

    def __post_init__(self):
        for name in ("facing_angle_max", "approach_speed_min", "min_clearance",
                     "proximity_max", "crossing_angle_window",
                     "overtake_speed_ratio_min", "min_window_duration"):
            if getattr(self, name) <= 0:
                raise InvariantError(f"/classifier/{name}", "must be > 0")
        if self.min_crowd_size < 1:
            raise InvariantError("/classifier/min_crowd_size", "must be >= 1")


@dataclass(frozen=True)
class ResearchContext:
    location: str = "generic"
    density: str = "pedestrian"
    task: str = "navigation"


@dataclass(frozen=True)
class ScenarioDefinition:
    geometric_layout: str
    intended_robot_task: str
    intended_human_behavior: str


@dataclass(frozen=True)
class UsageGuide:
    success_metrics: tuple[str, ...]
    quality_metrics: tuple[str, ...]
    ideal_outcome: str
    failure_modes: tuple[str, ...]
    labeling_criteria: Optional[ClassifierParams] = None


@dataclass(frozen=True)
class ScenarioCard:
    name: str
    description: str
    scenario_type: str
    research_context: ResearchContext
    definition: ScenarioDefinition
    usage_guide: UsageGuide

    def __post_init__(self):
        if not self.name:
            raise InvariantError("/name", "must be non-empty")


@dataclass(frozen=True)
class ScenarioLabel:
    scenario: str
    agent_ids: tuple[str, ...]
    t_start: float
    t_end: float
    confidence: float

    def __post_init__(self):
        if not self.t_start < self.t_end:
            raise InvariantError(f"/labels/{self.scenario}", "t_start must be < t_end")
        if not 0.0 <= self.confidence <= 1.0:
            raise InvariantError(f"/labels/{self.scenario}", "confidence must be in [0, 1]")


# --- Built-in cards -----------------------------------------------------------

def _card(name, description, scenario_type, layout, robot_task, human_behavior,
          success_metrics, quality_metrics, ideal, failures,
          location="generic", density="pedestrian") -> ScenarioCard:
    return ScenarioCard(
        name=name, description=description, scenario_type=scenario_type,
        research_context=ResearchContext(location=location, density=density),
        definition=ScenarioDefinition(geometric_layout=layout,
                                      intended_robot_task=robot_task,
                                      intended_human_behavior=human_behavior),
        usage_guide=UsageGuide(success_metrics=tuple(success_metrics),
                               quality_metrics=tuple(quality_metrics),
                               ideal_outcome=ideal,
                               failure_modes=tuple(failures),
                               labeling_criteria=ClassifierParams()),
    )


def builtin_cards() -> dict[str, ScenarioCard]:
    """Registry of the built-in, machine-classifiable scenario cards."""
    cards = [
        _card("frontal_approach",
              "A robot and a human walk straight at each other and must pass.",
              "hallway",
              "A walkway wide enough that both parties fit side by side.",
              "Cross the space to a goal on the far side.",
              "Walk the opposite way, toward the robot.",
              ["S", "C", "HC"], ["SC", "DH_min", "J_avg"],
              "Both pass without contact and continue to their goals.",
              ["Robot contacts the human", "Robot freezes and blocks the lane"]),
        _card("robot_overtaking",
              "A robot catches up with a slower human walking the same way and passes.",
              "hallway",
              "A walkway with room to pass on one side.",
              "Reach a goal further down the walkway, faster than the human.",
              "Walk toward the same end at a slower pace.",
              ["S", "C", "HC"], ["SC", "DH_min", "V_avg"],
              "Robot passes with a comfortable margin and merges back.",
              ["Robot cuts in too close", "Robot tailgates without passing"]),
        _card("pedestrian_overtaking",
              "A human catches up with the slower robot and passes it.",
              "hallway",
              "A walkway with room to pass on one side.",
              "Proceed to a goal at a modest pace.",
              "Approach from behind at higher speed and pass the robot.",
              ["S", "C", "HC"], ["SC", "DH_min"],
              "Robot keeps a steady course and yields room for the pass.",
              ["Robot drifts into the passing human", "Robot stops dead mid-lane"]),
        _card("intersection",
              "A robot and a human cross paths roughly at right angles.",
              "intersection",
              "Two crossing walkways or an open area with crossing routes.",
              "Cross to the far side.",
              "Cross along the perpendicular route at the same time.",
              ["S", "C", "HC"], ["SC", "DH_min", "TTC"],
              "Both clear the crossing without contact or hard braking.",
              ["Robot contacts the human", "Robot stalls inside the crossing"],
              location="indoor"),
        _card("blind_corner",
              "A robot and a human converge on a corner that hides them from "
              "each other until late.",
              "hallway",
              "Two corridor legs joined at a corner that blocks the sightline.",
              "Travel one leg, turn the corner, continue down the other.",
              "Travel the crossing leg toward the same corner.",
              ["S", "C", "HC"], ["SC", "DH_min", "TTC"],
              "Both negotiate the corner without contact.",
              ["Contact at the apex", "Robot blocks the corner"],
              location="indoor"),
        _card("parallel_traffic",
              "The robot travels inside a stream of people all heading the same way.",
              "crowd",
              "A wide walkway carrying directional foot traffic.",
              "Travel with the flow to a goal ahead.",
              "Several people walk the same direction around the robot.",
              ["S", "C", "HC"], ["SC", "DH_min", "V_avg"],
              "Robot keeps pace without weaving or crowding anyone.",
              ["Robot brushes a neighbor", "Robot repeatedly cuts across lanes"],
              density="crowd"),
        _card("perpendicular_traffic",
              "The robot crosses a stream of people moving at right angles to it.",
              "crowd",
              "A crossing area where a directional stream intersects the robot route.",
              "Cross the stream to a goal on the far side.",
              "Several people walk across the robot's route.",
              ["S", "C", "HC"], ["SC", "DH_min", "TTC"],
              "Robot threads a gap without forcing anyone to stop.",
              ["Robot contacts a crosser", "Robot stalls inside the stream"],
              density="crowd"),
    ]
    return {c.name: c for c in cards}


# --- Card serialization -------------------------------------------------------

_CRITERIA_FIELDS = ("facing_angle_max", "approach_speed_min", "min_clearance",
                    "proximity_max", "crossing_angle_window",
                    "overtake_speed_ratio_min", "min_crowd_size",
                    "min_window_duration")


def card_to_jsonable(card: ScenarioCard) -> dict:
    guide: dict = {
        "success_metrics": list(card.usage_guide.success_metrics),
        "quality_metrics": list(card.usage_guide.quality_metrics),
        "ideal_outcome": card.usage_guide.ideal_outcome,
        "failure_modes": list(card.usage_guide.failure_modes),
    }
    if card.usage_guide.labeling_criteria is not None:
        crit = card.usage_guide.labeling_criteria
        guide["labeling_criteria"] = {
            name: getattr(crit, name) for name in _CRITERIA_FIELDS}
    return {
        "name": card.name,
        "description": card.description,
        "scenario_type": card.scenario_type,
        "research_context": {
            "location": card.research_context.location,
            "density": card.research_context.density,
            "task": card.research_context.task,
        },
        "definition": {
            "geometric_layout": card.definition.geometric_layout,
            "intended_robot_task": card.definition.intended_robot_task,
            "intended_human_behavior": card.definition.intended_human_behavior,
        },
        "usage_guide": guide,
    }


def serialize_card(card: ScenarioCard) -> bytes:
    return canonical_json_bytes(card_to_jsonable(card))


def _require(obj: Mapping, key: str, path: str, kind=str):
    if key not in obj:
        raise SchemaError(f"{path}/{key}", "missing required field")
    value = obj[key]
    if kind is float:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise SchemaError(f"{path}/{key}", "expected a number")
        return float(value)
    if not isinstance(value, kind):
        raise SchemaError(f"{path}/{key}", f"expected {kind.__name__}")
    return value


def parse_card(document: bytes | str) -> ScenarioCard:
    """Parse a scenario card; cards without labeling criteria classify nothing."""
    if isinstance(document, bytes):
        try:
            document = document.decode("utf-8")
        except UnicodeDecodeError as e:
            raise MalformedDocument(f"not valid UTF-8: {e}") from e
    try:
        doc = json.loads(document)
    except json.JSONDecodeError as e:
        raise MalformedDocument(f"not valid JSON: {e}") from e
    if not isinstance(doc, dict):
        raise SchemaError("", "card document must be an object")

    ctx = _require(doc, "research_context", "", dict)
    definition = _require(doc, "definition", "", dict)
    guide = _require(doc, "usage_guide", "", dict)

    criteria = None
    if "labeling_criteria" in guide:
        raw = guide["labeling_criteria"]
        if not isinstance(raw, dict):
            raise SchemaError("/usage_guide/labeling_criteria", "expected an object")
        kwargs = {}
        for name in _CRITERIA_FIELDS:
            if name in raw:
                kwargs[name] = (int(raw[name]) if name == "min_crowd_size"
                                else _require(raw, name, "/usage_guide/labeling_criteria", float))
        criteria = ClassifierParams(**kwargs)
    else:
        log.warning("card %r has no labeling_criteria; classification disabled",
                    doc.get("name"))

    return ScenarioCard(
        name=_require(doc, "name", ""),
        description=_require(doc, "description", ""),
        scenario_type=_require(doc, "scenario_type", ""),
        research_context=ResearchContext(
            location=_require(ctx, "location", "/research_context"),
            density=_require(ctx, "density", "/research_context"),
            task=_require(ctx, "task", "/research_context"),
        ),
        definition=ScenarioDefinition(
            geometric_layout=_require(definition, "geometric_layout", "/definition"),
            intended_robot_task=_require(definition, "intended_robot_task", "/definition"),
            intended_human_behavior=_require(definition, "intended_human_behavior", "/definition"),
        ),
        usage_guide=UsageGuide(
            success_metrics=tuple(_require(guide, "success_metrics", "/usage_guide", list)),
            quality_metrics=tuple(_require(guide, "quality_metrics", "/usage_guide", list)),
            ideal_outcome=_require(guide, "ideal_outcome", "/usage_guide"),
            failure_modes=tuple(_require(guide, "failure_modes", "/usage_guide", list)),
            labeling_criteria=criteria,
        ),
    )


# --- Episode resampling -------------------------------------------------------

class _Sampled:
    __slots__ = ("agent", "pos", "vel", "speed", "heading", "active", "en_route")

    def __init__(self, agent: AgentRecord, timeline: np.ndarray):
        t = agent.times
        xy = agent.positions
        self.agent = agent
        self.pos = np.column_stack([np.interp(timeline, t, xy[:, 0]),
                                    np.interp(timeline, t, xy[:, 1])])
        if len(agent.states) >= 2:
            v = agent.velocities
            self.vel = np.column_stack([np.interp(timeline, t, v[:, 0]),
                                        np.interp(timeline, t, v[:, 1])])
        else:
            self.vel = np.zeros_like(self.pos)
        self.speed = np.linalg.norm(self.vel, axis=1)
        raw_heading = np.interp(timeline, t, np.unwrap(agent.headings))
        moving = self.speed > 1e-6
        heading = wrap_angle(raw_heading)
        heading = np.where(moving, np.arctan2(self.vel[:, 1], self.vel[:, 0]), heading)
        self.heading = heading
        self.active = (timeline >= t[0] - 1e-9) & (timeline <= t[-1] + 1e-9)
        # An agent that has reached its goal is done with its errand; the
        # residual braking creep after arrival must not read as an approach.
        if agent.goal is not None:
            inside = (np.linalg.norm(self.pos - agent.goal.position.as_array(), axis=1)
                      <= agent.goal.tolerance)
            self.en_route = self.active & ~(np.cumsum(inside) > 0)
        else:
            self.en_route = self.active

    def smoothed_heading(self, half_window: int) -> np.ndarray:
        """Direction of net displacement over +-half_window steps.

        Irons out transient swerves so crowd-flow comparisons see the
        travel direction, not avoidance wobble.
        """
        n = len(self.pos)
        lo = np.maximum(np.arange(n) - half_window, 0)
        hi = np.minimum(np.arange(n) + half_window, n - 1)
        disp = self.pos[hi] - self.pos[lo]
        length = np.linalg.norm(disp, axis=1)
        smooth = np.where(length > 1e-6, np.arctan2(disp[:, 1], disp[:, 0]), self.heading)
        return smooth


def _runs(mask: np.ndarray):
    if not mask.any():
        return []
    edges = np.diff(np.concatenate([[0], mask.astype(np.int8), [0]]))
    return list(zip(np.flatnonzero(edges == 1).tolist(),
                    np.flatnonzero(edges == -1).tolist()))


def _margin_angle(deviation: np.ndarray, limit: float) -> float:
    """1 at zero deviation, 0 at the limit."""
    return float(np.clip(1.0 - np.median(deviation) / limit, 0.0, 1.0))


# --- Detectors ----------------------------------------------------------------
#
# A detector turns its sustained criteria (headings, motion) into a per-step
# mask, takes each maximal run of at least min_window_duration as a candidate
# window, then applies the aggregate criteria (minimum distance, passing
# clearance, occlusion, the overtake transition) to the window as a whole.

def _pair_windows(timeline, mask, min_duration):
    for s, e in _runs(mask):
        if timeline[e - 1] - timeline[s] >= min_duration:
            yield s, e


def _participating(robot: _Sampled, h: _Sampled, p: ClassifierParams) -> np.ndarray:
    return (robot.en_route & h.en_route
            & (robot.speed >= p.approach_speed_min)
            & (h.speed >= p.approach_speed_min))


_OPEN_SPACE_WIDTH = 20.0


def _lateral_clearance(ep, midpoint: np.ndarray, axis_heading: float,
                       r_sum: float) -> float:
    """Achievable lateral separation between two passing centers.

    Casts a line through the encounter midpoint perpendicular to the
    approach axis; the free width between the nearest obstacles on either
    side, minus one body radius per side, is how far apart the two centers
    can get. Unobstructed sides count as wide open.
    """
    seg_a, seg_b = ep.obstacles.static_arrays
    normal = np.array([-math.sin(axis_heading), math.cos(axis_heading)])
    side = {1: _OPEN_SPACE_WIDTH / 2, -1: _OPEN_SPACE_WIDTH / 2}
    for a, b in zip(seg_a, seg_b):
        d = b - a
        denom = d[0] * normal[1] - d[1] * normal[0]
        if abs(denom) < 1e-12:
            continue
        rel = midpoint - a
        u = (rel[0] * normal[1] - rel[1] * normal[0]) / denom
        if not 0.0 <= u <= 1.0:
            continue
        hit = a + u * d
        s = float((hit - midpoint) @ normal)
        sign = 1 if s >= 0 else -1
        side[sign] = min(side[sign], abs(s))
    return side[1] + side[-1] - r_sum


def _detect_frontal(ep, robot, humans, timeline, p: ClassifierParams):
    labels = []
    r_r = robot.agent.radius
    for h in humans:
        opposed = np.abs(wrap_angle(robot.heading - h.heading - math.pi)) <= p.facing_angle_max
        dp = h.pos - robot.pos
        dv = h.vel - robot.vel
        dist = np.linalg.norm(dp, axis=1)
        closing = -np.einsum("nd,nd->n", dp, dv) / np.maximum(dist, 1e-9)
        r_sum = r_r + h.agent.radius
        clearance_needed = r_sum + p.min_clearance
        mask = (_participating(robot, h, p) & opposed
                & (closing >= p.approach_speed_min))
        for s, e in _pair_windows(timeline, mask, p.min_window_duration):
            sl = slice(s, e)
            # The space must offer room to pass: evaluated at the closest
            # step of the window, perpendicular to the approach.
            k = s + int(np.argmin(dist[sl]))
            midpoint = 0.5 * (robot.pos[k] + h.pos[k])
            clearance = _lateral_clearance(ep, midpoint, float(robot.heading[k]), r_sum)
            if clearance < clearance_needed:
                continue
            confidence = min(
                _margin_angle(np.abs(wrap_angle(robot.heading[sl] - h.heading[sl] - math.pi)),
                              p.facing_angle_max),
                float(np.clip(np.median(closing[sl]) / (4 * p.approach_speed_min), 0, 1)),
                float(np.clip((clearance - clearance_needed) / clearance_needed, 0, 1)),
            )
            labels.append(ScenarioLabel("frontal_approach", (robot.agent.id, h.agent.id),
                                        float(timeline[s]), float(timeline[e - 1]), confidence))
    return labels


def _bridged_windows(timeline, mask, min_duration, bridge):
    """Maximal runs, with gaps up to ``bridge`` seconds merged away.

    The lane-change swerve of a pass breaks heading-based masks for a
    moment; the encounter is still one window.
    """
    merged = []
    for s, e in _runs(mask):
        if merged and timeline[s] - timeline[merged[-1][1] - 1] <= bridge:
            merged[-1] = (merged[-1][0], e)
        else:
            merged.append((s, e))
    return [(s, e) for s, e in merged
            if timeline[e - 1] - timeline[s] >= min_duration]


def _detect_overtaking(ep, robot, humans, timeline, p: ClassifierParams, robot_overtakes: bool):
    labels = []
    name = "robot_overtaking" if robot_overtakes else "pedestrian_overtaking"
    for h in humans:
        rear_s = robot if robot_overtakes else h
        front_s = h if robot_overtakes else robot
        same_dir = np.abs(wrap_angle(robot.heading - h.heading)) <= p.facing_angle_max
        mask = _participating(robot, h, p) & same_dir
        dp = front_s.pos - rear_s.pos
        axis = np.column_stack([np.cos(front_s.heading), np.sin(front_s.heading)])
        longitudinal = np.einsum("nd,nd->n", dp, axis)  # >0 while rear is behind
        dist = np.linalg.norm(dp, axis=1)
        for s, e in _bridged_windows(timeline, mask, p.min_window_duration,
                                     bridge=3.0 * p.min_window_duration):
            sl = slice(s, e)
            front_speed = np.maximum(np.median(front_s.speed[sl]), 1e-9)
            ratio = float(np.median(rear_s.speed[sl]) / front_speed)
            if ratio < p.overtake_speed_ratio_min:
                continue
            behind = longitudinal[sl] > 0
            if not behind[0] or behind[-1]:
                continue  # must start behind and end ahead
            cross = s + int(np.argmin(behind))  # first step at-or-ahead
            if dist[cross] > p.proximity_max:
                continue  # the pass must happen nearby
            # A pass needs a sustained following phase and a sustained
            # leading phase; momentary lead changes during a swerve do not
            # make an overtake.
            if (timeline[cross] - timeline[s] < p.min_window_duration
                    or timeline[e - 1] - timeline[cross] < p.min_window_duration):
                continue
            confidence = min(
                _margin_angle(np.abs(wrap_angle(robot.heading[sl] - h.heading[sl])),
                              p.facing_angle_max),
                float(np.clip((ratio - p.overtake_speed_ratio_min)
                              / p.overtake_speed_ratio_min, 0, 1)),
                float(np.clip(1.0 - dist[cross] / p.proximity_max, 0, 1)),
            )
            labels.append(ScenarioLabel(name, (robot.agent.id, h.agent.id),
                                        float(timeline[s]), float(timeline[e - 1]), confidence))
    return labels


def _detect_intersection(ep, robot, humans, timeline, p: ClassifierParams,
                         require_occlusion: bool):
    labels = []
    seg_a, seg_b = ep.obstacles.static_arrays
    name = "blind_corner" if require_occlusion else "intersection"
    for h in humans:
        crossing = np.abs(np.abs(wrap_angle(robot.heading - h.heading)) - math.pi / 2) \
            <= p.crossing_angle_window
        dist = np.linalg.norm(h.pos - robot.pos, axis=1)
        mask = _participating(robot, h, p) & crossing
        for s, e in _pair_windows(timeline, mask, p.min_window_duration):
            sl = slice(s, e)
            if float(dist[sl].min()) > p.proximity_max:
                continue
            if require_occlusion:
                if len(seg_a) == 0:
                    continue
                blocked = any(
                    segment_blocked(robot.pos[k], h.pos[k], seg_a, seg_b)
                    for k in range(s, e))
                if not blocked:
                    continue
            confidence = min(
                _margin_angle(np.abs(np.abs(wrap_angle(robot.heading[sl] - h.heading[sl]))
                                     - math.pi / 2), p.crossing_angle_window),
                float(np.clip(1.0 - np.min(dist[sl]) / p.proximity_max, 0, 1)),
            )
            labels.append(ScenarioLabel(name, (robot.agent.id, h.agent.id),
                                        float(timeline[s]), float(timeline[e - 1]), confidence))
    return labels


def _detect_crowd_flow(ep, robot, humans, timeline, p: ClassifierParams, parallel: bool):
    name = "parallel_traffic" if parallel else "perpendicular_traffic"
    if len(humans) < p.min_crowd_size:
        return []
    dt = float(timeline[1] - timeline[0]) if len(timeline) > 1 else 1.0
    smooth = robot.smoothed_heading(max(1, round(1.5 / dt)))
    moving = np.stack([h.en_route & (h.speed > p.approach_speed_min) for h in humans])
    count = moving.sum(axis=0)
    vx = np.stack([h.vel[:, 0] for h in humans])
    vy = np.stack([h.vel[:, 1] for h in humans])
    sum_vx = np.where(moving, vx, 0.0).sum(axis=0)
    sum_vy = np.where(moving, vy, 0.0).sum(axis=0)
    flow = np.arctan2(sum_vy, sum_vx)
    dev = np.abs(wrap_angle(flow - smooth))
    if parallel:
        angle_ok = dev <= p.facing_angle_max
    else:
        angle_ok = np.abs(dev - math.pi / 2) <= p.crossing_angle_window
    mask = ((count >= p.min_crowd_size) & angle_ok
            & robot.en_route & (robot.speed >= p.approach_speed_min))
    labels = []
    for s, e in _pair_windows(timeline, mask, p.min_window_duration):
        sl = slice(s, e)
        members = [h.agent.id for i, h in enumerate(humans) if bool(moving[i, sl].any())]
        limit = p.facing_angle_max if parallel else p.crossing_angle_window
        measured = dev[sl] if parallel else np.abs(dev[sl] - math.pi / 2)
        confidence = min(
            _margin_angle(measured, limit),
            float(np.clip(np.median(count[sl]) / p.min_crowd_size - 0.5, 0, 1)),
        )
        labels.append(ScenarioLabel(name, tuple([robot.agent.id] + members),
                                    float(timeline[s]), float(timeline[e - 1]), confidence))
    return labels


_DETECTORS: dict[str, Callable] = {
    "frontal_approach": lambda *a: _detect_frontal(*a),
    "robot_overtaking": lambda *a: _detect_overtaking(*a, robot_overtakes=True),
    "pedestrian_overtaking": lambda *a: _detect_overtaking(*a, robot_overtakes=False),
    "intersection": lambda *a: _detect_intersection(*a, require_occlusion=False),
    "blind_corner": lambda *a: _detect_intersection(*a, require_occlusion=True),
    "parallel_traffic": lambda *a: _detect_crowd_flow(*a, parallel=True),
    "perpendicular_traffic": lambda *a: _detect_crowd_flow(*a, parallel=False),
}


_CROWD = {"parallel_traffic", "perpendicular_traffic"}

# A crowd-flow or occluded-corner finding explains the whole encounter, so
# its pairwise shadows (the same agents also read as plain intersections,
# approaches or passes) are dropped for the episode.
_SUPPRESSED_BY = {
    "intersection": ("blind_corner", "perpendicular_traffic", "parallel_traffic"),
    "frontal_approach": ("blind_corner", "perpendicular_traffic", "parallel_traffic"),
    "robot_overtaking": ("parallel_traffic", "perpendicular_traffic"),
    "pedestrian_overtaking": ("parallel_traffic", "perpendicular_traffic"),
}


def _arbitrate(labels: list[ScenarioLabel]) -> list[ScenarioLabel]:
    kept = []
    for label in labels:
        winners = _SUPPRESSED_BY.get(label.scenario, ())
        shadowed = any(
            other.scenario in winners
            and (other.scenario in _CROWD
                 or set(label.agent_ids) <= set(other.agent_ids))
            for other in labels)
        if not shadowed:
            kept.append(label)
    return kept


def classify(episode: Episode, cards: Optional[Mapping[str, ScenarioCard]] = None,
             params: Optional[ClassifierParams] = None,
             dt: Optional[float] = None) -> tuple[ScenarioLabel, ...]:
    """Run every card's detector and return the arbitrated labels.

    ``params`` overrides each card's own labeling criteria when given.
    Cards without labeling criteria are documentation-only and skipped;
    a card with criteria but no detector raises UnknownCard.
    """
    if cards is None:
        cards = builtin_cards()
    if dt is None:
        dt = median_sample_interval(episode.robot) if len(episode.robot.states) >= 2 else 1.0
    timeline = common_timeline(episode, dt)
    robot = _Sampled(episode.robot, timeline)
    humans = [_Sampled(a, timeline) for a in episode.agents
              if a.kind is AgentKind.HUMAN and a.id != episode.robot_under_test]

    labels: list[ScenarioLabel] = []
    for name, card in cards.items():
        criteria = card.usage_guide.labeling_criteria
        if criteria is None:
            continue
        if name not in _DETECTORS:
            raise UnknownCard(f"no detector for card {name!r}")
        effective = params if params is not None else criteria
        labels.extend(_DETECTORS[name](episode, robot, humans, timeline, effective))

    labels = _arbitrate(labels)
    labels.sort(key=lambda l: (l.t_start, l.scenario, l.agent_ids))
    return tuple(labels)


# --- Corpus coverage ----------------------------------------------------------

@dataclass(frozen=True)
class CoverageReport:
    episode_count: int
    scenario_counts: dict[str, int]
    labeled_fraction: float
    unlabeled_fraction: float


def coverage_report(labels_by_episode: Mapping[str, Sequence[ScenarioLabel]]) -> CoverageReport:
    """Per-scenario episode counts and the labeled/unlabeled split of a corpus."""
    counts: dict[str, int] = {}
    labeled = 0
    for _, labels in labels_by_episode.items():
        seen = {l.scenario for l in labels}
        for scenario in sorted(seen):
            counts[scenario] = counts.get(scenario, 0) + 1
        if seen:
            labeled += 1
    n = len(labels_by_episode)
    labeled_fraction = labeled / n if n else 0.0
    return CoverageReport(episode_count=n, scenario_counts=counts,
                          labeled_fraction=labeled_fraction,
                          unlabeled_fraction=1.0 - labeled_fraction if n else 0.0)
