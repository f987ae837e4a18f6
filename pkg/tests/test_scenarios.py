import json

import numpy as np
import pytest

from socnav.core import AgentKind
from socnav.errors import SchemaError, UnknownCard
from socnav.scenarios import (
    CLASSIFIABLE_SCENARIOS,
    ClassifierParams,
    ScenarioCard,
    builtin_cards,
    classify,
    coverage_report,
    parse_card,
    serialize_card,
)
from socnav.simulator import generate_scenario, run

from conftest import fuzz_episode, line_points, make_agent, make_episode, rigid_transform


class TestCards:
    def test_builtin_registry_complete(self):
        cards = builtin_cards()
        assert set(cards) == set(CLASSIFIABLE_SCENARIOS)
        for name, card in cards.items():
            assert card.name == name
            assert card.usage_guide.labeling_criteria is not None

    def test_frontal_card_parses(self):
        raw = serialize_card(builtin_cards()["frontal_approach"])
        card = parse_card(raw)
        assert card.name == "frontal_approach"
        assert card.usage_guide.labeling_criteria.proximity_max == 2.0

    def test_round_trip_all_cards(self):
        for card in builtin_cards().values():
            assert parse_card(serialize_card(card)) == card
            assert serialize_card(parse_card(serialize_card(card))) == serialize_card(card)

    def test_card_without_criteria(self, caplog):
        doc = json.loads(serialize_card(builtin_cards()["intersection"]))
        del doc["usage_guide"]["labeling_criteria"]
        card = parse_card(json.dumps(doc))
        assert card.usage_guide.labeling_criteria is None
        # documentation-only cards are skipped by classify
        ep = run(generate_scenario("intersection", 0))
        labels = classify(ep, cards={"intersection": card})
        assert labels == ()

    def test_card_schema_error_has_path(self):
        doc = json.loads(serialize_card(builtin_cards()["intersection"]))
        del doc["definition"]["geometric_layout"]
        with pytest.raises(SchemaError) as err:
            parse_card(json.dumps(doc))
        assert "geometric_layout" in err.value.path

    def test_unknown_card_with_criteria(self):
        card = builtin_cards()["intersection"]
        weird = ScenarioCard(name="conga_line", description=card.description,
                             scenario_type=card.scenario_type,
                             research_context=card.research_context,
                             definition=card.definition, usage_guide=card.usage_guide)
        ep = run(generate_scenario("intersection", 0))
        with pytest.raises(UnknownCard):
            classify(ep, cards={"conga_line": weird})


class TestClassify:
    def test_generated_frontal_approach(self):
        ep = run(generate_scenario("frontal_approach", 5))
        labels = classify(ep)
        fronts = [l for l in labels if l.scenario == "frontal_approach"]
        assert len(fronts) >= 1
        label = fronts[0]
        assert set(label.agent_ids) == {"robot", "h0"}
        # the window covers (part of) the mutual approach, which ends by the
        # time the pair is closest
        d = np.linalg.norm(ep.robot.positions - ep.humans[0].positions, axis=1)
        t_closest = ep.robot.times[int(np.argmin(d))]
        assert label.t_start < t_closest + 0.5

    def test_stationary_pair_unlabeled(self):
        robot = make_agent("robot", [(0.0, 0.0)] * 30, dt=0.1, kind=AgentKind.ROBOT)
        human = make_agent("h", [(3.0, 0.0)] * 30, dt=0.1)
        assert classify(make_episode([robot, human])) == ()

    def test_constructed_intersection(self):
        # robot goes east through the origin, human goes north through
        # (0.3, 0); they arrive together and pass within a meter
        n = 80
        robot = make_agent("robot", line_points((-4.0, 0.0), (4.0, 0.0), n),
                           dt=0.1, kind=AgentKind.ROBOT)
        human = make_agent("h", line_points((0.3, -4.0), (0.3, 4.0), n), dt=0.1)
        ep = make_episode([robot, human])
        labels = classify(ep)
        kinds = {l.scenario for l in labels}
        assert "intersection" in kinds
        # hand-checked criteria: perpendicular headings, closest pass <= 1 m
        label = next(l for l in labels if l.scenario == "intersection")
        d = np.linalg.norm(robot.positions - human.positions, axis=1)
        assert d.min() <= 1.0
        assert label.confidence > 0.0

    def test_deterministic(self):
        ep = run(generate_scenario("intersection", 3))
        assert classify(ep) == classify(ep)

    def test_rigid_transform_invariance(self):
        for name in ("frontal_approach", "intersection", "robot_overtaking"):
            ep = run(generate_scenario(name, 2))
            moved = rigid_transform(ep, angle=0.83, tx=11.0, ty=-3.0)
            a = classify(ep)
            b = classify(moved)
            assert [(l.scenario, l.agent_ids) for l in a] == \
                   [(l.scenario, l.agent_ids) for l in b]
            for la, lb in zip(a, b):
                assert la.t_start == pytest.approx(lb.t_start, abs=0.2)
                assert la.t_end == pytest.approx(lb.t_end, abs=0.2)

    def test_labels_disjoint_per_scenario_pair(self):
        for name in CLASSIFIABLE_SCENARIOS:
            for seed in (0, 1):
                labels = classify(run(generate_scenario(name, seed)))
                by_key = {}
                for l in labels:
                    by_key.setdefault((l.scenario, l.agent_ids), []).append(l)
                for group in by_key.values():
                    group.sort(key=lambda l: l.t_start)
                    for a, b in zip(group, group[1:]):
                        assert a.t_end < b.t_start

    def test_params_override(self):
        ep = run(generate_scenario("intersection", 1))
        strict = ClassifierParams(proximity_max=0.01)
        assert all(l.scenario != "intersection" for l in classify(ep, params=strict))

    @pytest.mark.parametrize("name", CLASSIFIABLE_SCENARIOS)
    def test_smoke_recall(self, name):
        # full-scale recall/precision lives in the acceptance suite
        hits = 0
        for seed in (0, 1, 2, 3, 4):
            labels = classify(run(generate_scenario(name, seed)))
            hits += any(l.scenario == name for l in labels)
        assert hits >= 4


class TestCoverage:
    def test_counts(self):
        corpus = {}
        for seed in range(10):
            ep = run(generate_scenario("frontal_approach", seed))
            corpus[ep.episode_id] = classify(ep)
        for seed in range(10):
            ep = run(generate_scenario("intersection", seed))
            corpus[ep.episode_id] = classify(ep)
        report = coverage_report(corpus)
        assert report.scenario_counts["frontal_approach"] == 10
        assert report.scenario_counts["intersection"] == 10
        assert report.unlabeled_fraction == 0.0
        assert report.episode_count == 20

    def test_empty_corpus(self):
        report = coverage_report({})
        assert report.scenario_counts == {}
        assert report.episode_count == 0

    def test_random_walk_corpus(self):
        corpus = {}
        for seed in range(5):
            ep = fuzz_episode(seed, with_obstacles=False)
            corpus[ep.episode_id] = classify(ep, dt=0.1)
        report = coverage_report(corpus)
        assert 0.0 <= report.unlabeled_fraction <= 1.0
        assert report.episode_count == 5
