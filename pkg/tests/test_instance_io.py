import json

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from batches import hand_instance, hand_solution, tiny_instance
from refuelplan.domain import baseline_schedule, validate
from refuelplan.instance_io import (
    FormatError,
    GeneratorConfig,
    GeneratorError,
    derive_ext,
    derive_truncate,
    generate,
    parse_instance,
    parse_solution,
    write_instance,
    write_solution,
)
from refuelplan.oracle import candidate_count
from refuelplan.preprocessing import earliest_starts


def test_instance_round_trip():
    inst = tiny_instance(3, stretch_profiles=True)
    assert parse_instance(write_instance(inst)) == inst


def test_solution_round_trip():
    inst = hand_instance()
    sol = hand_solution(inst)
    back = parse_solution(write_solution(sol, inst), inst)
    assert back.schedule == sol.schedule
    assert back.cost.financial == pytest.approx(sol.cost.financial)
    assert validate(back, inst) == []


def test_syntax_error_has_position():
    with pytest.raises(FormatError) as err:
        parse_instance('{"weeks": 3,\n  "demand": [1, 2,, 3]}')
    assert err.value.line == 2 and err.value.column is not None


def test_missing_field_has_path():
    doc = json.loads(write_instance(hand_instance()))
    del doc["t2_units"][0]["cycles"][0]["loss_factor"]
    with pytest.raises(FormatError) as err:
        parse_instance(json.dumps(doc))
    assert err.value.path == "t2_units[0].cycles[0].loss_factor"


def test_restricted_flag_survives():
    from dataclasses import replace

    inst = replace(hand_instance(), restricted=True)
    assert parse_instance(write_instance(inst)).restricted


def test_generator_is_deterministic():
    cfg = GeneratorConfig(seed=7, n_t2=3, n_cycles=2, weeks=30, tw_width=3, n_resource_constraints=2)
    assert write_instance(generate(cfg)) == write_instance(generate(cfg))
    other = GeneratorConfig(**{**cfg.__dict__, "seed": 8})
    assert write_instance(generate(other)) != write_instance(generate(cfg))


def test_generator_rejects_crowded_horizon():
    with pytest.raises(GeneratorError):
        generate(GeneratorConfig(n_cycles=8, weeks=10))
    with pytest.raises(GeneratorError):
        GeneratorConfig(weeks=0)


def test_zero_width_windows_leave_one_candidate():
    inst = generate(GeneratorConfig(seed=2, n_t2=3, n_cycles=2, weeks=24, tw_width=0))
    assert candidate_count(inst) == 1


@settings(max_examples=15, deadline=None)
@given(st.integers(0, 10_000), st.integers(1, 3), st.integers(1, 3), st.integers(0, 4))
def test_generated_baselines_respect_windows(seed, n_t2, cycles, tw):
    inst = generate(GeneratorConfig(seed=seed, n_t2=n_t2, n_cycles=cycles, weeks=40, tw_width=tw))
    base = baseline_schedule(inst)
    for i, k in inst.outages():
        lo, hi = inst.window(i, k)
        assert lo <= base.virtual(i, k, inst.weeks) <= hi


def test_derive_ext_opens_later_windows():
    inst = tiny_instance(0)
    ext = derive_ext(inst, 1)
    W = inst.weeks
    early = earliest_starts(inst, open_from=2)
    for i, u in enumerate(ext.t2_units):
        assert u.cycle(1) == inst.t2_units[i].cycle(1)
        if u.n_cycles >= 2:
            assert u.cycle(2).latest == W + 1
            assert u.cycle(2).earliest == early[i, 2]
    assert derive_ext(inst, 5) is inst


def test_derive_truncate_shrinks():
    inst = tiny_instance(1)
    small = derive_truncate(inst, 1, inst.weeks - 4)
    assert small.weeks == inst.weeks - 4
    assert small.max_cycles == 1
    with pytest.raises(ValueError):
        derive_truncate(inst, 0, 5)
