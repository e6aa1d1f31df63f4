import json
import math
import re
import xml.etree.ElementTree as ET

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from curveflow import (ConfigError, RadiusProfile, TangentAngleGrid, WindingMismatchError,
                       curve_from_support, eval_trig_support, load_config, mfold_cover,
                       parse_config, radius_from_support, serialize_config, winding_number)
from curveflow.config import (SampledCurve, TrigCurve, build_problem, config_to_dict, override,
                              resolve_support)
from curveflow.geometry import elastic_energy
from curveflow.io import (METRICS_HEADER, SNAPSHOT_HEADER, read_metrics_csv, read_snapshot_csv,
                          render_svg, report_to_text, time_tag, write_metrics_csv, write_report,
                          write_snapshot_csv)


def base_doc():
    return config_to_dict(load_config("threefold_example"))


def parse(doc):
    return parse_config(json.dumps(doc))


# parsing and validation

def test_shipped_example(example_config):
    c = example_config
    assert c.m == 3 and c.n == 512 and c.mode == "table"
    assert isinstance(c.initial, TrigCurve)
    assert c.initial.spec.constant == 11.672
    assert [(h.k, h.a, h.b) for h in c.initial.spec.harmonics] == [(4, 9.0, 9.0)]
    assert c.target.spec.constant == 10.0
    assert [(h.k, h.a, h.b) for h in c.target.spec.harmonics] == [(2, 10.0, 10.0)]
    assert c.solver.dt == 1e-4 and c.solver.t_end == 4.0 and c.solver.scheme == "etd2"
    assert len(c.table.reference) == 11 and math.isinf(c.table.reference[-1][0])


def test_winding_mismatch():
    doc = base_doc()
    doc["initial"] = {"kind": "trig", "m": 2, "constant": 5}
    with pytest.raises(WindingMismatchError, match="same winding number"):
        parse(doc)


def test_nonconvex_spec_rejected():
    doc = base_doc()
    doc["initial"] = {"kind": "trig", "m": 1, "constant": 1, "harmonics": [{"k": 2, "a": 5}]}
    doc["target"] = {"kind": "trig", "m": 1, "constant": 1}
    with pytest.raises(ConfigError, match="locally convex"):
        parse(doc)


@pytest.mark.parametrize("mutate,where", [
    (lambda d: d["initial"].pop("constant"), "initial.constant"),
    (lambda d: d["solver"].update(dt="fast"), "solver.dt"),
    (lambda d: d["solver"].update(dt=0), "solver"),
    (lambda d: d["solver"].update(scheme="euler"), "solver"),
    (lambda d: d["grid"].update(n=16), "initial"),
    (lambda d: d["grid"].update(n=2.5), "grid.n"),
    (lambda d: d["table"]["reference"].append([1, 2, 3]), "table.reference[11]"),
    (lambda d: d["table"].update(times=[0, "soon"]), "table.times[1]"),
    (lambda d: d["table"].update(tolerance=-1), "table.tolerance"),
    (lambda d: d.update(mode="draw"), "mode"),
    (lambda d: d["initial"].update(kind="spline"), "initial.kind"),
    (lambda d: d["initial"]["harmonics"][0].update(k=0), "initial.harmonics[0].k"),
    (lambda d: d["outputs"].update(svg="yes"), "outputs.svg"),
    (lambda d: d.update(mode="simulate") or d["solver"].update(snapshot_times=[]),
     "solver.snapshot_times"),
])
def test_schema_errors_name_the_field(mutate, where):
    doc = base_doc()
    mutate(doc)
    with pytest.raises(ConfigError) as info:
        parse(doc)
    assert str(info.value).startswith(where)


def test_resolution_rule_message():
    doc = base_doc()
    doc["grid"]["n"] = 16
    with pytest.raises(ConfigError, match="16"):
        parse(doc)


def test_invalid_json():
    with pytest.raises(ConfigError, match="invalid JSON"):
        parse_config("{mode: table")


def test_missing_file():
    with pytest.raises(ConfigError):
        load_config("/nonexistent/config.json")


def test_round_trip_of_shipped_config(example_config):
    assert parse_config(serialize_config(example_config)) == example_config


@given(dt=st.floats(1e-5, 1e-2), n=st.sampled_from([64, 128, 256, 512]),
       t_end=st.floats(0.5, 30), svg=st.booleans(), size=st.integers(16, 2000),
       scheme=st.sampled_from(["etd2", "imex_cn", "rk4_explicit"]))
@settings(max_examples=30, deadline=None)
def test_config_round_trip(dt, n, t_end, svg, size, scheme):
    doc = base_doc()
    doc["grid"]["n"] = n
    doc["solver"].update(dt=dt, t_end=t_end, scheme=scheme,
                         snapshot_times=[t for t in doc["solver"]["snapshot_times"] if t <= t_end])
    doc["outputs"].update(svg=svg, svg_size=size)
    config = parse(doc)
    assert parse_config(serialize_config(config)) == config


def test_overrides(example_config):
    c = override(example_config, dt=1e-3, n=256, t_end=1.0, tolerance=0.01, out="elsewhere")
    assert (c.solver.dt, c.n, c.solver.t_end, c.table.tolerance, c.outputs.directory) == (
        1e-3, 256, 1.0, 0.01, "elsewhere")
    assert max(c.solver.snapshot_times) <= 1.0
    with pytest.raises(ConfigError):
        override(example_config, dt=0.0)


def test_flip_sign_flag():
    doc = base_doc()
    doc["solver"]["flip_f_sign"] = True
    assert parse(doc).solver.f_sign == -1.0


def test_cover_of_one_fold_curve():
    doc = base_doc()
    doc["initial"] = {"kind": "trig", "m": 1, "cover": 3, "constant": 4,
                      "harmonics": [{"k": 2, "a": 0.5, "b": 0.0}]}
    doc["target"] = {"kind": "trig", "m": 3, "constant": 1}
    doc["grid"]["n"] = 384
    config = parse(doc)
    assert config.m == 3
    rho3 = radius_from_support(resolve_support(config.initial, config.grid))
    grid1 = TangentAngleGrid(1, config.n // 3)
    spec1 = config.initial.spec
    rho1 = radius_from_support(eval_trig_support(spec1, grid1))
    assert np.allclose(rho3.values, mfold_cover(rho1, 3).values, atol=1e-12)


def test_cover_requires_one_fold_base():
    doc = base_doc()
    doc["initial"]["cover"] = 2
    with pytest.raises(ConfigError, match="cover"):
        parse(doc)


def test_sampled_curve(tmp_path, example_problem):
    grid = example_problem.grid
    path = tmp_path / "initial.csv"
    p = example_problem.support_at_start()
    write_snapshot_csv(path, grid.theta, example_problem.initial.values, p.values,
                       curve_from_support(p).points)
    doc = base_doc()
    doc["initial"] = {"kind": "samples", "m": 3, "path": str(path)}
    config = parse(doc)
    assert isinstance(config.initial, SampledCurve)
    problem, _ = build_problem(config)
    # samples pass through a support reconstruction, same floor as the geometry round trip
    assert np.abs(problem.initial.values - example_problem.initial.values).max() <= 1e-10


def test_sampled_curve_wrong_length(tmp_path):
    path = tmp_path / "short.csv"
    path.write_text("rho\n1\n1\n1\n")
    doc = base_doc()
    doc["initial"] = {"kind": "samples", "m": 3, "path": str(path)}
    with pytest.raises(ConfigError, match="512"):
        parse(doc)


def test_homotopy_rescale(example_config):
    doc = config_to_dict(example_config)
    doc["target"] = {"kind": "trig", "m": 3, "constant": 1}
    problem, scale = build_problem(parse(doc), rescale_target=True)
    e0 = elastic_energy(problem.initial)
    assert scale == pytest.approx(6 * math.pi / e0, rel=1e-12)
    assert elastic_energy(problem.target) == pytest.approx(e0, rel=1e-12)


# CSV and time tags

def test_snapshot_csv_round_trip(tmp_path, example_problem):
    grid = example_problem.grid
    p = example_problem.support_at_start()
    pts = curve_from_support(p).points
    path = tmp_path / "snap.csv"
    write_snapshot_csv(path, grid.theta, example_problem.initial.values, p.values, pts)
    assert path.read_text().splitlines()[0] == ",".join(SNAPSHOT_HEADER)
    cols = read_snapshot_csv(path)
    assert np.abs(cols["rho"] - example_problem.initial.values).max() <= 1e-12
    assert np.array_equal(cols["x"], pts[:, 0])


def test_metrics_csv(tmp_path, golden_run):
    path = tmp_path / "m.csv"
    write_metrics_csv(path, golden_run[1][:10])
    assert path.read_text().splitlines()[0] == ",".join(METRICS_HEADER)
    cols = read_metrics_csv(path)
    assert np.array_equal(cols["energy"], [d.energy for d in golden_run[1][:10]])


@pytest.mark.parametrize("t,t_end,tag", [
    (0.01, 4, "0.0100"), (0.0, 4, "0.0000"), (4, 4, "4.0000"),
    (0.01, 20, "00.0100"), (12.5, 20, "12.5000"), (0.5, None, "0.5000"),
])
def test_time_tags(t, t_end, tag):
    assert time_tag(t, t_end) == tag


def test_time_tags_sort_in_time_order():
    times = [0.0, 0.01, 0.05, 0.1, 1.0, 2.0, 10.0, 20.0]
    tags = [time_tag(t, 20) for t in times]
    assert sorted(tags) == tags


# SVG

def _polygon_points(svg):
    root = ET.fromstring(svg)
    poly = root.find("{http://www.w3.org/2000/svg}polygon")
    return np.array([[float(v) for v in pair.split(",")] for pair in poly.get("points").split()])


def test_svg_unit_circle():
    t = 2 * math.pi * np.arange(512) / 512
    svg = render_svg(np.column_stack([np.cos(t), np.sin(t)]), size=400)
    pts = _polygon_points(svg)
    center = pts.mean(axis=0)
    assert center == pytest.approx([200, 200], abs=1e-3)
    assert np.hypot(*(pts - [200, 200]).T) == pytest.approx(np.full(512, 190.0), abs=2e-3)


def test_svg_deterministic_and_well_formed(example_problem):
    pts = curve_from_support(example_problem.support_at_start()).points
    a = render_svg(pts, title="t = 0")
    b = render_svg(pts, title="t = 0")
    assert a == b
    root = ET.fromstring(a)
    assert root.get("width") == "400"


def test_svg_of_initial_curve_winds_three_times(example_problem):
    pts = curve_from_support(example_problem.support_at_start()).points
    drawn = _polygon_points(render_svg(pts))
    # the y axis is flipped on screen, reversing orientation
    assert winding_number(drawn) == -3


def test_svg_rejects_empty():
    with pytest.raises(ValueError):
        render_svg(np.zeros((0, 2)))


def test_svg_title_escaped():
    svg = render_svg(np.eye(2) + [[0, 0], [0, 1]], title="a < b & c")
    ET.fromstring(svg)
    assert "a &lt; b &amp; c" in svg


# reports

def test_report_writers(tmp_path):
    values = {"c0_predicted": 0.5, "energy_drift": 1e-9, "bounds_violations": 1, "slope": float("nan")}
    text = report_to_text(values)
    assert re.search(r"^c0_predicted\s+= 0.5$", text, re.M)
    assert "nan" in text
    write_report(tmp_path, values, [(0.1, "harnack", -1.0)])
    assert (tmp_path / "report.txt").read_text() == text
    assert (tmp_path / "report.csv").read_text().splitlines()[0] == ",".join(values)
    assert "harnack" in (tmp_path / "violations.csv").read_text()


def test_radius_profile_from_csv_rejects_non_numeric(tmp_path):
    from curveflow.io import read_profile_csv
    path = tmp_path / "bad.csv"
    path.write_text("rho\nabc\n")
    with pytest.raises(ConfigError):
        read_profile_csv(path)
    assert RadiusProfile  # imported for type reference in sampled-curve tests
