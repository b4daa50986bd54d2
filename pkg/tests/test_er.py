"""Efficiency ratio: computation, filtering, analytic components."""

import numpy as np
import pytest

from topareto.er import (AnalyticComponent, ErSeries, analytic_er,
                         analytic_front, analytic_stiffness, compute_er,
                         filter_er)
from topareto.errors import InvalidArgumentError, ParseError
from topareto.pareto import FrontPoint, ParetoFront


def power_law_front(n, vfs, a=2.0):
    return ParetoFront(tuple(FrontPoint(float(v), a * float(v) ** (-n))
                             for v in vfs), "powerlaw")


class TestComputeEr:
    @pytest.mark.parametrize("n", [0.5, 1.0, 2.0, 3.0])
    def test_exact_on_power_laws(self, n):
        vfs = np.linspace(0.05, 1.0, 37)
        series = compute_er(power_law_front(n, vfs))
        assert np.max(np.abs(series.values() - n)) <= 1e-6

    @pytest.mark.parametrize("n", [0.5, 2.0])
    def test_exact_on_nonuniform_grids(self, n):
        vfs = np.geomspace(0.02, 1.0, 23)
        series = compute_er(power_law_front(n, vfs))
        assert np.max(np.abs(series.values() - n)) <= 1e-6

    def test_inverse_law_gives_one(self):
        vfs = np.linspace(0.1, 1.0, 12)
        series = compute_er(power_law_front(1.0, vfs))
        assert series.values() == pytest.approx(np.ones(12), abs=1e-9)

    def test_needs_three_points(self):
        front = ParetoFront((FrontPoint(0.2, 5.0), FrontPoint(0.9, 1.0)))
        with pytest.raises(InvalidArgumentError):
            compute_er(front)

    def test_source_raw(self):
        vfs = np.linspace(0.1, 1.0, 5)
        assert compute_er(power_law_front(1, vfs)).source == "raw"


class TestFilterEr:
    def test_meta_model_front_matches_closed_form(self):
        # front a*(1/x + b*x^(1/b)) with b = 0.5
        a, b = 2.0, 0.5
        vfs = np.linspace(0.02, 1.0, 120)
        front = ParetoFront(tuple(
            FrontPoint(float(v), a * (1 / v + b * v ** (1 / b))) for v in vfs))
        filt = filter_er(front)
        expected = (1 - vfs ** (1 / b + 1)) / (1 + b * vfs ** (1 / b + 1))
        sel = (vfs >= 0.1) & (vfs <= 0.9)
        assert np.max(np.abs(filt.values()[sel] - expected[sel])) <= 0.03

    def test_monotone_front_envelope_is_identity(self):
        vfs = np.linspace(0.05, 1.0, 60)
        front = power_law_front(1.5, vfs)
        filt = filter_er(front)
        raw = compute_er(front)
        from topareto.pareto import smooth
        direct = smooth(raw.vfs(), raw.values(), 0.04)
        assert filt.values() == pytest.approx(direct, abs=1e-12)
        assert filt.source == "filtered"

    def test_bounds_violations_index(self):
        s = ErSeries(((0.1, 0.5), (0.2, 1.5), (0.3, -0.5)), "filtered")
        assert s.bounds_violations() == [1, 2]


class TestAnalytic:
    def test_rod_stiffness_value(self):
        comp = AnalyticComponent("rod")
        assert analytic_stiffness(comp, 0.5) == pytest.approx(0.5)

    def test_beam_stiffness_value(self):
        comp = AnalyticComponent("beam")
        assert analytic_stiffness(comp, 0.5) == pytest.approx(0.0625)

    def test_plate_stiffness_value(self):
        comp = AnalyticComponent("plate")
        assert analytic_stiffness(comp, 0.5) == pytest.approx(0.03125)

    @pytest.mark.parametrize("kind,expected", [("rod", 1.0), ("beam", 2.0),
                                               ("plate", 3.0)])
    def test_constant_ratio(self, kind, expected):
        comp = AnalyticComponent(kind)
        assert analytic_er(comp) == expected
        vfs = np.linspace(0.05, 1.0, 25)
        series = compute_er(analytic_front(comp, vfs))
        assert np.max(np.abs(series.values() - expected)) <= 1e-6

    def test_parameter_scaling(self):
        comp = AnalyticComponent("rod", e=70e9, length=2.0, section=1e-4)
        assert analytic_stiffness(comp, 0.3) == pytest.approx(
            70e9 * 0.3 * 1e-4 / 2.0)

    def test_invalid_kind_and_params(self):
        with pytest.raises(InvalidArgumentError):
            AnalyticComponent("shell")
        with pytest.raises(InvalidArgumentError):
            AnalyticComponent("rod", e=-1.0)
        with pytest.raises(InvalidArgumentError):
            analytic_stiffness(AnalyticComponent("rod"), 0.0)


class TestErSeries:
    def test_csv_round_trip(self):
        s = ErSeries(((0.1, 0.9), (0.5, 0.4), (1.0, 0.02)), "filtered")
        back = ErSeries.from_csv(s.to_csv(), "filtered")
        assert back == s

    def test_csv_errors(self):
        with pytest.raises(ParseError):
            ErSeries.from_csv("wrong,header\n")

    def test_ordering_enforced(self):
        with pytest.raises(InvalidArgumentError):
            ErSeries(((0.5, 1.0), (0.5, 0.9)))
