"""Shared builders for hand-constructed and fuzzed test episodes."""

from __future__ import annotations

import numpy as np

from socnav.core import (
    AgentKind,
    AgentRecord,
    AgentState,
    Episode,
    Goal,
    ObstacleMap,
    Vec2,
    synthesize_headings,
)


def make_agent(agent_id, points, dt=0.1, t0=0.0, kind=AgentKind.HUMAN, radius=0.3,
               goal=None, velocities=None, headings=None, times=None):
    """Build an agent from a list of (x, y) points sampled at dt."""
    states = []
    for i, (x, y) in enumerate(points):
        t = times[i] if times is not None else t0 + i * dt
        vel = None
        if velocities is not None:
            vx, vy = velocities[i]
            vel = Vec2(float(vx), float(vy))
        heading = float(headings[i]) if headings is not None else 0.0
        states.append(AgentState(t=float(t), position=Vec2(float(x), float(y)),
                                 heading=heading, velocity=vel))
    record = AgentRecord(id=agent_id, kind=kind, radius=radius,
                         states=tuple(states), goal=goal)
    if headings is None and len(states) >= 2:
        record = synthesize_headings(record)
    return record


def line_points(start, end, n):
    xs = np.linspace(start[0], end[0], n)
    ys = np.linspace(start[1], end[1], n)
    return list(zip(xs, ys))


def make_episode(agents, robot_id="robot", obstacles=None, episode_id="ep", labels=(),
                 metadata=None):
    return Episode(
        episode_id=episode_id,
        robot_under_test=robot_id,
        agents=tuple(agents),
        obstacles=obstacles if obstacles is not None else ObstacleMap(),
        labels=tuple(labels),
        metadata=metadata or {},
    )


def straight_robot(n=11, dt=0.1, speed=1.0, goal_xy=None, tolerance=0.2, radius=0.3):
    """Robot moving along +x at constant speed, optionally with a goal."""
    points = [(i * dt * speed, 0.0) for i in range(n)]
    goal = None
    if goal_xy is not None:
        goal = Goal(position=Vec2(*goal_xy), tolerance=tolerance)
    return make_agent("robot", points, dt=dt, kind=AgentKind.ROBOT,
                      radius=radius, goal=goal)


def random_walk_agent(rng, agent_id, n=50, dt=0.1, kind=AgentKind.HUMAN,
                      radius=0.3, box=5.0, speed_scale=1.0, goal=None, t0=0.0):
    """Seeded random-walk agent with bounded step sizes."""
    start = rng.uniform(-box, box, size=2)
    steps = rng.normal(0.0, speed_scale * dt, size=(n - 1, 2))
    points = np.vstack([start, start + np.cumsum(steps, axis=0)])
    return make_agent(agent_id, [tuple(p) for p in points], dt=dt, t0=t0,
                      kind=kind, radius=radius, goal=goal)


def rigid_transform(episode: Episode, angle: float, tx: float, ty: float) -> Episode:
    """Rotate by angle about the origin, then translate by (tx, ty)."""
    import math

    c, s = math.cos(angle), math.sin(angle)

    def rot_point(p: Vec2) -> Vec2:
        return Vec2(c * p.x - s * p.y + tx, s * p.x + c * p.y + ty)

    def rot_vector(p: Vec2) -> Vec2:
        return Vec2(c * p.x - s * p.y, s * p.x + c * p.y)

    def rot_agent(a: AgentRecord) -> AgentRecord:
        states = tuple(
            AgentState(t=st.t, position=rot_point(st.position),
                       heading=float(np.arctan2(np.sin(st.heading + angle),
                                                np.cos(st.heading + angle))),
                       velocity=rot_vector(st.velocity) if st.velocity else None)
            for st in a.states)
        goal = None
        if a.goal is not None:
            goal = Goal(position=rot_point(a.goal.position), tolerance=a.goal.tolerance)
        return AgentRecord(id=a.id, kind=a.kind, radius=a.radius, states=states, goal=goal)

    obstacles = ObstacleMap(
        segments=tuple((rot_point(a), rot_point(b)) for a, b in episode.obstacles.segments),
        dynamic=tuple((t, tuple((rot_point(a), rot_point(b)) for a, b in segs))
                      for t, segs in episode.obstacles.dynamic))
    return Episode(episode_id=episode.episode_id, robot_under_test=episode.robot_under_test,
                   agents=tuple(rot_agent(a) for a in episode.agents),
                   obstacles=obstacles, labels=episode.labels, metadata=episode.metadata)


def scale_time(episode: Episode, k: float) -> Episode:
    """Stretch all timestamps by k; velocities shrink by 1/k accordingly."""

    def scale_agent(a: AgentRecord) -> AgentRecord:
        states = tuple(
            AgentState(t=st.t * k, position=st.position, heading=st.heading,
                       velocity=Vec2(st.velocity.x / k, st.velocity.y / k)
                       if st.velocity else None)
            for st in a.states)
        return AgentRecord(id=a.id, kind=a.kind, radius=a.radius, states=states, goal=a.goal)

    obstacles = ObstacleMap(
        segments=episode.obstacles.segments,
        dynamic=tuple((t * k, segs) for t, segs in episode.obstacles.dynamic))
    return Episode(episode_id=episode.episode_id, robot_under_test=episode.robot_under_test,
                   agents=tuple(scale_agent(a) for a in episode.agents),
                   obstacles=obstacles, labels=episode.labels, metadata=episode.metadata)


def fuzz_episode(seed, n_humans=3, n_steps=40, dt=0.1, with_obstacles=True,
                 with_goal=True, box=4.0):
    """Seeded random but always-valid episode for property and oracle tests."""
    rng = np.random.default_rng(seed)
    goal = None
    if with_goal:
        goal = Goal(position=Vec2(float(rng.uniform(-box, box)), float(rng.uniform(-box, box))),
                    tolerance=float(rng.uniform(0.1, 0.5)))
    robot = random_walk_agent(rng, "robot", n=n_steps, dt=dt, kind=AgentKind.ROBOT,
                              radius=float(rng.uniform(0.2, 0.4)), box=box,
                              speed_scale=rng.uniform(0.5, 2.0), goal=goal)
    agents = [robot]
    for i in range(n_humans):
        t0 = float(rng.uniform(0.0, 0.3 * n_steps * dt))
        agents.append(random_walk_agent(
            rng, f"h{i}", n=int(rng.integers(5, n_steps)), dt=dt,
            radius=float(rng.uniform(0.2, 0.4)), box=box,
            speed_scale=rng.uniform(0.5, 2.0), t0=t0))
    obstacles = ObstacleMap()
    if with_obstacles:
        segs = []
        for _ in range(int(rng.integers(1, 4))):
            a = rng.uniform(-box, box, size=2)
            b = a + rng.uniform(-2.0, 2.0, size=2)
            if np.allclose(a, b):
                b = a + np.array([0.5, 0.0])
            segs.append((Vec2(*map(float, a)), Vec2(*map(float, b))))
        obstacles = ObstacleMap(segments=tuple(segs))
    return make_episode(agents, obstacles=obstacles, episode_id=f"fuzz-{seed}")
