"""Deterministic 2D kinematic pedestrian simulator for corpus generation.

Pedestrians follow a social-force style model: goal attraction with a
relaxation time plus exponential repulsion from agents and obstacles,
integrated with explicit Euler at a fixed dt (unit mass, so forces are
accelerations). The worst-case baseline policy walks straight toward its
goal and freezes whenever anything sits within stopping distance ahead.

Identical (seed, config) pairs produce byte-identical serialized episodes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .core import (
    AgentKind,
    AgentRecord,
    AgentState,
    Episode,
    Goal,
    ObstacleMap,
    Vec2,
    interpolate_state,
)
from .errors import InvariantError, UnknownScenario
from .geometry import wrap_angle

POLICIES = ("sfm", "straight_line_stop", "replay", "scripted_waypoints")

SCENARIO_NAMES = (
    "frontal_approach",
    "robot_overtaking",
    "pedestrian_overtaking",
    "intersection",
    "blind_corner",
    "parallel_traffic",
    "perpendicular_traffic",
    "random_crossing",
)

_WAYPOINT_TOLERANCE = 0.4
_STOP_LOOKAHEAD = 0.1


@dataclass(frozen=True)
class SfmParams:
    """Unit-mass social-force constants (forces are accelerations).

    The repulsion strength is tuned so that the generated scenarios stay
    collision-free at defaults: with goal drive v/tau ~ 2 m/s^2, a contact
    repulsion of the same order is too weak to resolve head-on encounters.
    """

    relaxation_time: float = 0.5
    repulsion_strength: float = 5.0
    repulsion_range: float = 0.3
    obstacle_strength: float = 3.0
    obstacle_range: float = 0.2
    v_max: float = 2.0

    def __post_init__(self):
        for name in ("relaxation_time", "repulsion_strength", "repulsion_range",
                     "obstacle_strength", "obstacle_range", "v_max"):
            if getattr(self, name) <= 0:
                raise InvariantError(f"/sfm/{name}", "must be > 0")


@dataclass(frozen=True)
class AgentSpec:
    agent_id: str
    kind: AgentKind
    policy: str
    position: Vec2
    goal: Optional[Goal] = None
    desired_speed: float = 1.0
    radius: float = 0.3
    waypoints: tuple[Vec2, ...] = ()
    replay_states: tuple[AgentState, ...] = ()

    def __post_init__(self):
        if self.policy not in POLICIES:
            raise InvariantError(f"/agents/{self.agent_id}/policy",
                                 f"unknown policy {self.policy!r}")
        if self.desired_speed <= 0:
            raise InvariantError(f"/agents/{self.agent_id}/desired_speed", "must be > 0")
        if self.policy == "replay" and len(self.replay_states) < 1:
            raise InvariantError(f"/agents/{self.agent_id}/replay_states", "must be non-empty")


@dataclass(frozen=True)
class SimConfig:
    dt: float = 0.05
    max_duration: float = 30.0
    seed: int = 0
    sfm: SfmParams = SfmParams()
    scene: ObstacleMap = ObstacleMap()
    agents: tuple[AgentSpec, ...] = ()
    episode_id: str = "sim"
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.dt <= 0:
            raise InvariantError("/dt", "must be > 0")
        if self.max_duration <= 0:
            raise InvariantError("/max_duration", "must be > 0")


@dataclass(frozen=True)
class SimState:
    t: float
    pos: np.ndarray       # (n, 2)
    vel: np.ndarray       # (n, 2)
    heading: np.ndarray   # (n,)
    waypoint_idx: np.ndarray  # (n,) int
    reached: np.ndarray   # (n,) bool, sticky goal-reached flags


def init_state(config: SimConfig) -> SimState:
    n = len(config.agents)
    pos = np.array([[a.position.x, a.position.y] for a in config.agents], dtype=float)
    vel = np.zeros((n, 2))
    heading = np.zeros(n)
    for i, spec in enumerate(config.agents):
        target = _current_target(spec, 0)
        if target is not None:
            d = target - pos[i]
            if np.linalg.norm(d) > 1e-9:
                heading[i] = wrap_angle(math.atan2(d[1], d[0]))
    for i, spec in enumerate(config.agents):
        if spec.policy == "replay":
            pos[i] = (spec.replay_states[0].position.x, spec.replay_states[0].position.y)
            if spec.replay_states[0].velocity is not None:
                vel[i] = (spec.replay_states[0].velocity.x, spec.replay_states[0].velocity.y)
            heading[i] = spec.replay_states[0].heading
    return SimState(t=0.0, pos=pos, vel=vel, heading=heading,
                    waypoint_idx=np.zeros(n, dtype=int),
                    reached=np.zeros(n, dtype=bool))


def _current_target(spec: AgentSpec, waypoint_idx: int) -> Optional[np.ndarray]:
    if waypoint_idx < len(spec.waypoints):
        w = spec.waypoints[waypoint_idx]
        return np.array([w.x, w.y])
    if spec.goal is not None:
        return spec.goal.position.as_array()
    return None


def _replay_record(spec: AgentSpec) -> AgentRecord:
    return AgentRecord(id=spec.agent_id, kind=spec.kind, radius=spec.radius,
                       states=spec.replay_states, goal=spec.goal)


def step(state: SimState, config: SimConfig) -> SimState:
    """Advance the simulation by one dt; pure function of (state, config)."""
    n = len(config.agents)
    p = config.sfm
    dt = config.dt
    pos = state.pos
    new_vel = np.zeros_like(state.vel)
    new_heading = state.heading.copy()
    waypoint_idx = state.waypoint_idx.copy()

    seg_a, seg_b = config.scene.active_segments(state.t)
    radii = np.array([a.radius for a in config.agents])

    # Advance waypoints for agents that got close enough to the current one.
    for i, spec in enumerate(config.agents):
        while waypoint_idx[i] < len(spec.waypoints):
            w = spec.waypoints[waypoint_idx[i]]
            if np.linalg.norm(pos[i] - (w.x, w.y)) <= _WAYPOINT_TOLERANCE:
                waypoint_idx[i] += 1
            else:
                break

    # Pairwise geometry, shared by the SFM and the stopping rule.
    diff = pos[:, None, :] - pos[None, :, :]          # (n, n, 2), i - j
    dist = np.linalg.norm(diff, axis=2)
    np.fill_diagonal(dist, np.inf)
    safe = np.maximum(dist, 1e-6)

    for i, spec in enumerate(config.agents):
        if spec.policy == "replay":
            t_next = min(state.t + dt, spec.replay_states[-1].t)
            t_next = max(t_next, spec.replay_states[0].t)
            s = interpolate_state(_replay_record(spec), t_next)
            new_vel[i] = ((s.position.x - pos[i, 0]) / dt, (s.position.y - pos[i, 1]) / dt)
            continue

        target = _current_target(spec, int(waypoint_idx[i]))
        at_goal = False
        if spec.goal is not None:
            at_goal = (np.linalg.norm(pos[i] - spec.goal.position.as_array())
                       <= spec.goal.tolerance)

        if spec.policy == "scripted_waypoints":
            if target is None or (at_goal and waypoint_idx[i] >= len(spec.waypoints)):
                continue
            to_target = target - pos[i]
            d = np.linalg.norm(to_target)
            if d > 1e-9:
                speed = min(spec.desired_speed, d / dt, p.v_max)
                new_vel[i] = to_target / d * speed
            continue

        if spec.policy == "straight_line_stop":
            if target is None or at_goal:
                continue
            to_target = target - pos[i]
            d = np.linalg.norm(to_target)
            if d < 1e-9:
                continue
            e = to_target / d
            new_heading[i] = math.atan2(e[1], e[0])
            forward_agent = np.einsum("jd,d->j", -diff[i], e) > 0.0
            close_agent = dist[i] <= radii[i] + radii + _STOP_LOOKAHEAD
            blocked = bool(np.any(forward_agent & close_agent))
            if not blocked and len(seg_a):
                for a, b in zip(seg_a, seg_b):
                    q = _nearest_on_segment(pos[i], a, b)
                    gap = np.linalg.norm(q - pos[i])
                    if gap <= radii[i] + _STOP_LOOKAHEAD and (q - pos[i]) @ e > 0.0:
                        blocked = True
                        break
            if not blocked:
                speed = min(spec.desired_speed, d / dt, p.v_max)
                new_vel[i] = e * speed
            continue

        # SFM agent: goal attraction toward the current target.
        force = np.zeros(2)
        if target is not None and not (at_goal and waypoint_idx[i] >= len(spec.waypoints)):
            to_target = target - pos[i]
            d = np.linalg.norm(to_target)
            if d > 1e-9:
                force += (spec.desired_speed * to_target / d - state.vel[i]) / p.relaxation_time
            else:
                force += -state.vel[i] / p.relaxation_time
        else:
            force += -state.vel[i] / p.relaxation_time

        # Repulsion from the other agents.
        gaps = dist[i] - (radii[i] + radii)
        weights = p.repulsion_strength * np.exp(-gaps / p.repulsion_range)
        weights[i] = 0.0
        force += np.einsum("j,jd->d", weights, diff[i] / safe[i][:, None])

        # Repulsion from obstacle segments.
        for a, b in zip(seg_a, seg_b):
            q = _nearest_on_segment(pos[i], a, b)
            away = pos[i] - q
            gap = np.linalg.norm(away)
            if gap < 1e-6:
                continue
            force += (p.obstacle_strength * math.exp(-(gap - radii[i]) / p.obstacle_range)
                      * away / gap)

        v = state.vel[i] + force * dt
        speed = np.linalg.norm(v)
        if speed > p.v_max:
            v = v / speed * p.v_max
        new_vel[i] = v

    new_pos = pos + new_vel * dt
    speeds = np.linalg.norm(new_vel, axis=1)
    moving = speeds > 1e-9
    new_heading[moving] = np.arctan2(new_vel[moving, 1], new_vel[moving, 0])
    new_heading = wrap_angle(new_heading)  # arctan2 may return exactly -pi

    reached = state.reached.copy()
    for i, spec in enumerate(config.agents):
        if spec.goal is not None and not reached[i]:
            if np.linalg.norm(new_pos[i] - spec.goal.position.as_array()) <= spec.goal.tolerance:
                reached[i] = True

    if not np.isfinite(new_pos).all() or not np.isfinite(new_vel).all():
        raise InvariantError("/sim", "non-finite state produced")
    return SimState(t=state.t + dt, pos=new_pos, vel=new_vel, heading=new_heading,
                    waypoint_idx=waypoint_idx, reached=reached)


def _nearest_on_segment(point: np.ndarray, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    d = b - a
    len2 = float(d @ d)
    if len2 == 0.0:
        return a
    t = float(np.clip((point - a) @ d / len2, 0.0, 1.0))
    return a + t * d


def run(config: SimConfig) -> Episode:
    """Run to max_duration or until every goal-bearing agent has reached its goal."""
    state = init_state(config)
    history = [state]
    goal_bearing = [a.goal is not None for a in config.agents]
    while state.t < config.max_duration - 1e-9:
        state = step(state, config)
        history.append(state)
        if any(goal_bearing) and all(
                r for r, g in zip(state.reached, goal_bearing) if g):
            break

    agents = []
    for i, spec in enumerate(config.agents):
        states = tuple(
            AgentState(t=float(s.t),
                       position=Vec2(float(s.pos[i, 0]), float(s.pos[i, 1])),
                       heading=float(s.heading[i]),
                       velocity=Vec2(float(s.vel[i, 0]), float(s.vel[i, 1])))
            for s in history)
        agents.append(AgentRecord(id=spec.agent_id, kind=spec.kind, radius=spec.radius,
                                  states=states, goal=spec.goal))
    robot_id = next((a.agent_id for a in config.agents if a.kind is AgentKind.ROBOT),
                    config.agents[0].agent_id if config.agents else "robot")
    metadata = {str(k): str(v) for k, v in config.metadata.items()}
    metadata.setdefault("seed", str(config.seed))
    return Episode(episode_id=config.episode_id, robot_under_test=robot_id,
                   agents=tuple(agents), obstacles=config.scene, metadata=metadata)


# --- Scenario generation ------------------------------------------------------

def _corridor(half_width: float, x0: float = -7.0, x1: float = 7.0) -> ObstacleMap:
    return ObstacleMap(segments=(
        (Vec2(x0, half_width), Vec2(x1, half_width)),
        (Vec2(x0, -half_width), Vec2(x1, -half_width)),
    ))


def _l_corridor(half_width: float = 0.8, reach: float = 6.0) -> ObstacleMap:
    """L-shaped corridor: horizontal leg along -x, vertical leg along -y."""
    w = half_width
    return ObstacleMap(segments=(
        (Vec2(-reach, w), Vec2(w, w)),        # outer top
        (Vec2(w, w), Vec2(w, -reach)),        # outer right
        (Vec2(-reach, -w), Vec2(-w, -w)),     # inner bottom
        (Vec2(-w, -w), Vec2(-w, -reach)),     # inner left
    ))


def _spec(agent_id, kind, policy, start, goal_xy, speed, waypoints=(), tolerance=0.3,
          radius=0.3):
    return AgentSpec(
        agent_id=agent_id, kind=kind, policy=policy,
        position=Vec2(float(start[0]), float(start[1])),
        goal=Goal(position=Vec2(float(goal_xy[0]), float(goal_xy[1])), tolerance=tolerance),
        desired_speed=float(speed), radius=radius,
        waypoints=tuple(Vec2(float(w[0]), float(w[1])) for w in waypoints),
    )


def generate_scenario(name: str, variation_seed: int,
                      robot_policy: str = "sfm") -> SimConfig:
    """Instantiate a named scenario layout with seeded jitter.

    Start positions get up to +-0.5 m longitudinal jitter (less laterally in
    narrow corridors) and desired speeds vary +-20 %. The ground-truth
    scenario name is recorded in the episode metadata.
    """
    if name not in SCENARIO_NAMES:
        raise UnknownScenario(f"unknown scenario {name!r}; choose from {SCENARIO_NAMES}")
    rng = np.random.default_rng(variation_seed)

    def jit(scale=0.5):
        return float(rng.uniform(-scale, scale))

    def speed(base):
        return float(base * (1.0 + rng.uniform(-0.2, 0.2)))

    agents: list[AgentSpec] = []
    scene = ObstacleMap()
    max_duration = 20.0

    if name == "frontal_approach":
        scene = _corridor(1.25)
        agents.append(_spec("robot", AgentKind.ROBOT, robot_policy,
                            (-5.0 + jit(), -0.5 + jit(0.1)), (5.5, -0.5), speed(1.0)))
        agents.append(_spec("h0", AgentKind.HUMAN, "sfm",
                            (5.0 + jit(), 0.5 + jit(0.1)), (-5.5, 0.5), speed(1.0)))
        max_duration = 16.0

    elif name == "robot_overtaking":
        agents.append(_spec("robot", AgentKind.ROBOT, robot_policy,
                            (-4.0 + jit(), -0.4 + jit(0.15)), (8.5, -0.4), speed(1.3)))
        agents.append(_spec("h0", AgentKind.HUMAN, "sfm",
                            (-1.0 + jit(), 0.4 + jit(0.15)), (8.0, 0.4), speed(0.55)))
        max_duration = 18.0

    elif name == "pedestrian_overtaking":
        agents.append(_spec("robot", AgentKind.ROBOT, robot_policy,
                            (-1.0 + jit(), -0.4 + jit(0.15)), (8.0, -0.4), speed(0.55)))
        agents.append(_spec("h0", AgentKind.HUMAN, "sfm",
                            (-4.0 + jit(), 0.4 + jit(0.15)), (8.5, 0.4), speed(1.3)))
        max_duration = 22.0

    elif name == "intersection":
        agents.append(_spec("robot", AgentKind.ROBOT, robot_policy,
                            (-4.0 + jit(), 0.0 + jit(0.2)), (4.5, 0.0), speed(1.0)))
        agents.append(_spec("h0", AgentKind.HUMAN, "sfm",
                            (0.3 + jit(0.2), -4.0 + jit()), (0.3, 4.5), speed(1.0)))
        max_duration = 16.0

    elif name == "blind_corner":
        scene = _l_corridor(0.8)
        # A shared pace factor carries the +-20% speed variation; the junction
        # arrival gap stays small so the encounter happens at the corner.
        pace = float(1.0 + rng.uniform(-0.2, 0.2))
        agents.append(_spec("robot", AgentKind.ROBOT, robot_policy,
                            (-5.0 + jit(0.3), -0.35 + jit(0.1)), (0.35, -5.0),
                            pace * (1.0 + jit(0.05)),
                            waypoints=((0.35, -0.35),)))
        agents.append(_spec("h0", AgentKind.HUMAN, "sfm",
                            (-0.35 + jit(0.1), -4.3 + jit(0.3)), (-5.0, 0.35),
                            pace * (1.0 + jit(0.05)),
                            waypoints=((-0.35, 0.35),)))
        max_duration = 18.0

    elif name == "parallel_traffic":
        agents.append(_spec("robot", AgentKind.ROBOT, robot_policy,
                            (-5.0 + jit(), 0.0 + jit(0.1)), (5.5, 0.0), speed(1.0)))
        lanes = (-2.2, -1.6, -1.0, 1.0, 1.6, 2.2)
        for k, lane in enumerate(lanes):
            x0 = -5.5 + jit(1.5)
            y0 = lane + jit(0.15)
            agents.append(_spec(f"h{k}", AgentKind.HUMAN, "sfm",
                                (x0, y0), (x0 + 11.0, lane), speed(1.0)))
        max_duration = 16.0

    elif name == "perpendicular_traffic":
        agents.append(_spec("robot", AgentKind.ROBOT, robot_policy,
                            (-5.0 + jit(), 0.0 + jit(0.1)), (5.5, 0.0), speed(1.0)))
        xs = (-2.5, -1.5, -0.5, 0.5, 1.5, 2.5)
        for k, x in enumerate(xs):
            x0 = x + jit(0.3)
            y0 = -3.0 - 1.1 * k + jit(0.4)  # staggered column, sequential crossings
            agents.append(_spec(f"h{k}", AgentKind.HUMAN, "sfm",
                                (x0, y0), (x0, 7.0), speed(1.0)))
        max_duration = 24.0

    elif name == "random_crossing":
        agents.append(_spec("robot", AgentKind.ROBOT, robot_policy,
                            (-4.0 + jit(), jit()), (4.0, 0.0), speed(1.0)))
        for k in range(3):
            angle = float((2 * k + 1) * math.pi / 3 + rng.uniform(-0.5, 0.5))
            r0 = 5.0 + float(rng.uniform(0.0, 1.8))  # staggered arrivals at the center
            start = (r0 * math.cos(angle), r0 * math.sin(angle))
            end_angle = angle + math.pi + float(rng.uniform(-0.6, 0.6))
            end = (5.0 * math.cos(end_angle), 5.0 * math.sin(end_angle))
            agents.append(_spec(f"h{k}", AgentKind.HUMAN, "sfm",
                                (start[0] + jit(), start[1] + jit()), end, speed(1.0)))
        max_duration = 26.0

    return SimConfig(
        dt=0.05,
        max_duration=max_duration,
        seed=variation_seed,
        scene=scene,
        agents=tuple(agents),
        episode_id=f"{name}_{variation_seed}",
        metadata={"scenario": name, "robot_policy": robot_policy},
    )
