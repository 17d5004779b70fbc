import pytest

from raclab.core import Fluent, State
from raclab.domain import ground_action
from raclab.errors import MissingTemplate, ValidationError
from raclab.nl import load_annotations, render_action_nl, render_state_nl


def test_object_grouped_rendering(bw):
    ann = bw.annotations
    s = State([Fluent("ontable", ("a",)), Fluent("clear", ("a",))])
    assert render_state_nl(s, ann, ["a"]) == "A: clear, on the table."
    assert render_state_nl(State(), ann, ["a"]) == "A: (no properties)."
    assert render_state_nl(State([Fluent("handempty", ())]), ann, []) == "World: the hand is empty."


def test_action_rendering(bw):
    ann = bw.annotations
    assert render_action_nl(ground_action(bw.domain, "stack", ["a", "b"]), ann) == "stack a on top of b"
    assert render_action_nl(ground_action(bw.domain, "pickup", ["a"]), ann) == "pick up a from the table"


def test_missing_template_is_rejected(bw):
    import json

    doc = json.loads((_bundled_text("blocksworld")))
    del doc["action_templates"]["stack"]
    with pytest.raises((MissingTemplate, ValidationError)):
        load_annotations(json.dumps(doc), bw.domain)


def test_unbound_annotations_cannot_render(bw):
    import json

    doc = json.loads(_bundled_text("blocksworld"))
    ann = load_annotations(json.dumps(doc))
    with pytest.raises(Exception):
        render_action_nl(ground_action(bw.domain, "pickup", ["a"]), ann)


def _bundled_text(name):
    from importlib import resources

    return (resources.files("raclab") / "data" / "domains" / name / "annotations.json").read_text()


def test_every_bundled_state_reads_back(registry):
    for name in registry.names():
        entry = registry.get(name)
        for p in entry.problems.values():
            text = render_state_nl(p.init, entry.annotations, p.objects)
            s, objects = entry.annotations.grammar.parse_state(text)
            assert s == p.init
            assert set(p.objects) <= objects


def test_clause_list_form(mislabeled, depots):
    s, _ = depots.annotations.grammar.parse_state(mislabeled.initial_state_nl)
    assert s == depots.problems["depots-p02"].init
    assert len(s) == 39


def test_action_variants_parse(depots):
    g = depots.annotations.grammar
    assert g.parse_action("at depot1, hoist1 drops crate2 on pallet1") == ("drop", ("hoist1", "crate2", "pallet1", "depot1"))
    assert g.parse_action("crate1 is lifted from crate0 at distributor2 by hoist5") == (
        "lift", ("hoist5", "crate1", "crate0", "distributor2"))
    assert g.parse_action("Truck0 is driven to distributor0 from distributor2.") == (
        "drive", ("truck0", "distributor2", "distributor0"))
