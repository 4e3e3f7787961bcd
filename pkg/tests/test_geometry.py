"""Arc solving, profile containment and voxel CSG tests."""

import math
import random

import numpy as np
import pytest

from ccstools import model
from ccstools.errors import DegenerateArc, GeometryError
from ccstools.geometry import (
    SketchFrame,
    VoxelSolid,
    build_profile,
    evaluate_solid,
    euler_rotation,
    extrusion_steps,
    solid_cut,
    solid_intersect,
    solid_union,
    solve_arc,
)
from ccstools.model import CadSequence, EOS, SOL, dequantize, parse_ccs

EXTRUDE_IDENTITY = ("<Extrude>: θ=0, φ=128, γ=128, px=128, py=128, pz=128, "
                    "s=128, e1=192, e2=128, b=7, u=1")

SQUARE_PRISM = f"""<SOL>
<Line>: x=160, y=96
<Line>: x=160, y=160
<Line>: x=96, y=160
<Line>: x=96, y=96
{EXTRUDE_IDENTITY}
<EOS>"""

ANNULUS = f"""<SOL>
<Circle>: x=176, y=129, r=47
<SOL>
<Circle>: x=176, y=129, r=40
{EXTRUDE_IDENTITY}
<EOS>"""


def prism_sequence():
    return dequantize(parse_ccs(SQUARE_PRISM))


class TestSolveArc:
    def test_semicircle(self):
        arc = solve_arc((1, 0), (-1, 0), math.pi, 1)
        assert arc.center == pytest.approx((0, 0), abs=1e-12)
        assert arc.radius == pytest.approx(1.0)
        # upper semicircle: midpoint of the sweep is (0, 1)
        mid = arc.point_at((arc.start_angle + arc.end_angle) / 2)
        assert mid == pytest.approx((0, 1), abs=1e-12)

    def test_coincident_endpoints(self):
        with pytest.raises(DegenerateArc):
            solve_arc((0, 0), (0, 0), math.pi / 2, 1)

    def test_zero_sweep(self):
        with pytest.raises(DegenerateArc):
            solve_arc((0, 0), (1, 0), 0.0, 1)

    def test_full_turn_rejected(self):
        with pytest.raises(DegenerateArc):
            solve_arc((0, 0), (1, 0), 2 * math.pi, 1)

    def test_random_arcs_endpoints_on_circle(self):
        rng = random.Random(7)
        worst = 0.0
        for _ in range(10_000):
            start = (rng.uniform(-1, 1), rng.uniform(-1, 1))
            end = (rng.uniform(-1, 1), rng.uniform(-1, 1))
            if math.hypot(end[0] - start[0], end[1] - start[1]) < 1e-6:
                continue
            alpha = rng.uniform(1e-3, 2 * math.pi - 1e-3)
            ccw = rng.random() < 0.5
            arc = solve_arc(start, end, alpha, ccw)
            for p in (start, end):
                residual = abs(math.hypot(p[0] - arc.center[0], p[1] - arc.center[1])
                               - arc.radius)
                worst = max(worst, residual / max(arc.radius, 1.0))
            assert arc.sweep == pytest.approx(alpha, abs=1e-9)
            assert arc.start_point == pytest.approx(start, abs=1e-6)
            assert arc.end_point == pytest.approx(end, abs=1e-6)
        assert worst < 1e-9


class TestBuildProfile:
    def test_square_single_loop(self):
        steps = extrusion_steps(prism_sequence())
        profile = build_profile(steps[0][0])
        assert len(profile.loops) == 1
        assert len(profile.loops[0].segments) == 4
        assert len(profile.loops[0].arcs) == 0

    def test_concentric_circles(self):
        steps = extrusion_steps(dequantize(parse_ccs(ANNULUS)))
        profile = build_profile(steps[0][0])
        assert len(profile.loops) == 2
        radii = sorted(loop.radius for loop in profile.loops)
        assert radii == pytest.approx([40 / 128, 47 / 128])

    def test_rounded_rectangle_loop(self, plate_gt):
        steps = extrusion_steps(dequantize(plate_gt))
        profile = build_profile(steps[0][0])
        outer = profile.loops[0]
        assert len(outer.arcs) == 4
        assert len(outer.segments) == 4
        for arc in outer.arcs:
            assert arc.sweep == pytest.approx(math.pi / 2)


class TestPointInProfile:
    def annulus_profile(self):
        # concentric circles centered on the sketch origin
        text = ("<SOL>\n<Circle>: x=128, y=128, r=47\n"
                "<SOL>\n<Circle>: x=128, y=128, r=40\n"
                f"{EXTRUDE_IDENTITY}\n<EOS>")
        steps = extrusion_steps(dequantize(parse_ccs(text)))
        return build_profile(steps[0][0])

    def test_annulus_membership(self):
        profile = self.annulus_profile()
        # midpoint radius between 40/128=0.3125 and 47/128=0.3671875
        assert profile.contains_point(0.34, 0.0)
        assert profile.contains_point(0.0, -0.34)
        assert not profile.contains_point(0.0, 0.0)
        assert not profile.contains_point(0.31, 0.0)
        assert not profile.contains_point(0.37, 0.0)

    def test_outside_bounding_box(self):
        profile = self.annulus_profile()
        assert not profile.contains_point(5.0, 5.0)
        assert not profile.contains_point(-5.0, 0.0)

    def test_square_membership(self):
        steps = extrusion_steps(prism_sequence())
        profile = build_profile(steps[0][0])
        assert profile.contains_point(0.0, 0.0)
        assert not profile.contains_point(0.25 + 1e-6, 0.25 + 1e-6)
        assert not profile.contains_point(-0.25 - 1e-6, 0.0)

    def test_arc_ray_against_dense_sampling(self, plate_gt):
        """Even-odd crossing counts agree with a fine polygonal approximation."""
        steps = extrusion_steps(dequantize(plate_gt))
        profile = build_profile(steps[0][0])
        poly_loops = []
        for loop in profile.loops:
            pts = []
            for (a, b) in loop.segments:
                pts.append(("seg", a, b))
            for arc in loop.arcs:
                angles = np.linspace(arc.start_angle, arc.end_angle, 64)
                chain = [arc.point_at(t) for t in angles]
                for p, q in zip(chain[:-1], chain[1:]):
                    pts.append(("seg", p, q))
            poly_loops.append(pts)

        def poly_contains(x, y):
            crossings = 0
            for loop_pieces in poly_loops:
                for _, (ax, ay), (bx, by) in loop_pieces:
                    if (ay > y) != (by > y):
                        xi = ax + (y - ay) * (bx - ax) / (by - ay)
                        if xi > x:
                            crossings += 1
            return crossings % 2 == 1

        rng = random.Random(3)
        mismatches = 0
        for _ in range(400):
            x, y = rng.uniform(-0.1, 0.85), rng.uniform(-0.3, 0.85)
            if poly_contains(x, y) != profile.contains_point(x, y):
                mismatches += 1
        # polygonal approximation softens arc boundaries; near-boundary
        # points may disagree, interior consensus must dominate
        assert mismatches <= 4


class TestFrames:
    def test_rotation_orthonormal(self):
        rng = random.Random(11)
        for _ in range(200):
            r = euler_rotation(rng.uniform(0, math.pi),
                               rng.uniform(-math.pi, math.pi),
                               rng.uniform(-math.pi, math.pi))
            assert np.allclose(r.T @ r, np.eye(3), atol=1e-9)
            assert np.linalg.det(r) == pytest.approx(1.0)

    def test_identity_frame(self):
        frame = SketchFrame(np.eye(3), np.zeros(3), 1.0)
        pts = np.array([[0.25, -0.5, 0.75]])
        assert np.allclose(frame.to_local(pts), pts)

    def test_translation(self):
        frame = SketchFrame(np.eye(3), np.array([1.0, 2.0, 3.0]), 1.0)
        assert np.allclose(frame.to_local(np.array([[1.0, 2.0, 3.0]])), 0.0)

    def test_non_orthonormal_rejected(self):
        with pytest.raises(GeometryError):
            SketchFrame(np.eye(3) * 2.0, np.zeros(3), 1.0)

    def test_zero_scale_rejected(self):
        with pytest.raises(GeometryError):
            SketchFrame(np.eye(3), np.zeros(3), 0.0)


def cut_sequence(side_quantized: int = 16):
    lo, hi = 128 - side_quantized, 128 + side_quantized
    return parse_ccs(f"""<SOL>
<Line>: x=160, y=96
<Line>: x=160, y=160
<Line>: x=96, y=160
<Line>: x=96, y=96
{EXTRUDE_IDENTITY}
<SOL>
<Line>: x={hi}, y={lo}
<Line>: x={hi}, y={hi}
<Line>: x={lo}, y={hi}
<Line>: x={lo}, y={lo}
<Extrude>: θ=0, φ=128, γ=128, px=128, py=128, pz=128, s=128, e1=192, e2=128, b=9, u=1
<EOS>""")


class TestEvaluateSolid:
    def test_prism_volume_fraction(self):
        solid = evaluate_solid(prism_sequence(), resolution=128)
        box_volume = 8.0
        assert solid.volume() / box_volume == pytest.approx(0.125 / 8, rel=0.02)

    def test_cut_reduces_by_analytic_amount(self):
        solid = evaluate_solid(dequantize(cut_sequence()), resolution=128)
        # 0.5^2*0.5 prism minus a 0.25^2*0.5 through-cut
        assert solid.volume() == pytest.approx(0.125 - 0.03125, rel=0.01)

    def test_intersect_with_self_is_identity(self):
        base = parse_ccs(SQUARE_PRISM).commands[:-1]
        twice = CadSequence(list(base)
                            + list(parse_ccs(
                                f"<SOL>\n<Line>: x=160, y=96\n<Line>: x=160, y=160\n"
                                f"<Line>: x=96, y=160\n<Line>: x=96, y=96\n"
                                f"<Extrude>: θ=0, φ=128, γ=128, px=128, py=128, "
                                f"pz=128, s=128, e1=192, e2=128, b=10, u=1").commands)
                            + [EOS])
        once = evaluate_solid(prism_sequence(), resolution=32)
        both = evaluate_solid(dequantize(twice), resolution=32)
        assert np.array_equal(once.occupancy, both.occupancy)

    def test_join_monotone_nondecreasing(self):
        base = evaluate_solid(prism_sequence(), resolution=32)
        joined_seq = parse_ccs(f"""<SOL>
<Line>: x=160, y=96
<Line>: x=160, y=160
<Line>: x=96, y=160
<Line>: x=96, y=96
{EXTRUDE_IDENTITY}
<SOL>
<Circle>: x=64, y=64, r=20
<Extrude>: θ=0, φ=128, γ=128, px=128, py=128, pz=128, s=128, e1=160, e2=128, b=8, u=1
<EOS>""")
        joined = evaluate_solid(dequantize(joined_seq), resolution=32)
        assert np.count_nonzero(joined.occupancy) >= np.count_nonzero(base.occupancy)
        assert np.all(joined.occupancy[base.occupancy])

    def test_cut_monotone_nonincreasing(self):
        base = evaluate_solid(prism_sequence(), resolution=64)
        cut = evaluate_solid(dequantize(cut_sequence()), resolution=64)
        assert np.count_nonzero(cut.occupancy) <= np.count_nonzero(base.occupancy)
        assert not np.any(cut.occupancy & ~base.occupancy)

    def test_resolution_convergence_bound(self):
        # doubling resolution moves the estimate by less than area * pitch
        seq = dequantize(cut_sequence())
        v64 = evaluate_solid(seq, resolution=64).volume()
        v128 = evaluate_solid(seq, resolution=128).volume()
        surface_area = 4 * 0.5 * 0.5 + 2 * (0.25 - 0.0625) + 4 * 0.25 * 0.5
        assert abs(v128 - v64) < surface_area * (2 / 64)

    def test_extent_types(self):
        # e1=192 -> +0.5; e2=160 -> +0.25.  OneSide spans [0, 0.5],
        # Symmetric [-0.25, 0.25] (same thickness, centered), TwoSides
        # [-0.25, 0.5].
        for u, expected in ((1, 0.125), (2, 0.125), (3, 0.1875)):
            text = SQUARE_PRISM.replace("u=1", f"u={u}").replace("e2=128", "e2=160")
            solid = evaluate_solid(dequantize(parse_ccs(text)), resolution=64)
            assert solid.volume() == pytest.approx(expected, rel=0.05), u
            if u == 2:
                occ = solid.occupancy
                assert np.array_equal(occ, occ[:, :, ::-1])   # centered on z=0

    def test_negative_extent_flips_interval(self):
        text = SQUARE_PRISM.replace("e1=192", "e1=64")   # e1 -> -0.5
        solid = evaluate_solid(dequantize(parse_ccs(text)), resolution=64)
        assert solid.volume() == pytest.approx(0.125, rel=0.05)
        # occupancy must sit below the sketch plane
        occ = solid.occupancy
        assert occ[:, :, :32].any() and not occ[:, :, 32:].any()

    def test_empty_solid_is_signal_not_error(self):
        text = SQUARE_PRISM.replace("e1=192", "e1=128")   # zero height
        solid = evaluate_solid(dequantize(parse_ccs(text)), resolution=16)
        assert solid.is_empty

    def test_zero_scale_step_contributes_nothing(self):
        text = SQUARE_PRISM.replace("s=128", "s=0")
        solid = evaluate_solid(dequantize(parse_ccs(text)), resolution=16)
        assert solid.is_empty

    def test_minimum_resolution(self):
        with pytest.raises(GeometryError):
            evaluate_solid(prism_sequence(), resolution=4)

    def test_valid_corpus_evaluates(self, small_corpus):
        for seq in small_corpus[:40]:
            solid = evaluate_solid(dequantize(seq), resolution=16)
            assert solid.occupancy.shape == (16, 16, 16)

    def test_occupancy_shape_invariant(self):
        with pytest.raises(GeometryError):
            VoxelSolid(8, ((-1, -1, -1), (1, 1, 1)), np.zeros((4, 4, 4), dtype=bool))


class TestSolidBooleans:
    def solids(self):
        a = evaluate_solid(prism_sequence(), resolution=16)
        text = SQUARE_PRISM.replace("x=160", "x=192").replace("x=96", "x=128")
        b = evaluate_solid(dequantize(parse_ccs(text)), resolution=16)
        return a, b

    def test_union_intersect_commutative(self):
        a, b = self.solids()
        assert np.array_equal(solid_union(a, b).occupancy,
                              solid_union(b, a).occupancy)
        assert np.array_equal(solid_intersect(a, b).occupancy,
                              solid_intersect(b, a).occupancy)

    def test_union_intersect_idempotent(self):
        a, _ = self.solids()
        assert np.array_equal(solid_union(a, a).occupancy, a.occupancy)
        assert np.array_equal(solid_intersect(a, a).occupancy, a.occupancy)

    def test_cut_of_self_is_empty(self):
        a, _ = self.solids()
        assert solid_cut(a, a).is_empty

    def test_grid_mismatch_rejected(self):
        a, _ = self.solids()
        other = evaluate_solid(prism_sequence(), resolution=32)
        with pytest.raises(GeometryError):
            solid_union(a, other)
