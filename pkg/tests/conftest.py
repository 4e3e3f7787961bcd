"""Shared fixtures: corpus files, replay transcripts and a sequence fuzzer."""

from __future__ import annotations

import random
from pathlib import Path

import pytest

from ccstools import clients, model, pipeline

FIXTURE_DIR = Path(__file__).parent / "fixtures"

# Short stand-in descriptions keying the rounded-plate replay transcript.
PLATE_DESCRIPTION_0 = ("A thin plate with rounded corners: an outer contour of four "
                       "lines and four quarter arcs, a matching inner contour, "
                       "extruded one-sided as a new body.")
PLATE_DESCRIPTION_1 = ("Rounded-corner plate, revision 1: corrected corner arcs and "
                       "line endpoints for both contours, one-sided extrusion.")
PLATE_DESCRIPTION_2 = ("Rounded-corner plate, revision 2: explicit counterclockwise "
                       "arcs, full endpoint listing for both contours, one-sided "
                       "new-body extrusion with both distances stated.")


def fixture_text(name: str) -> str:
    return (FIXTURE_DIR / name).read_text(encoding="utf-8")


@pytest.fixture(scope="session")
def plate_gt() -> model.CadSequence:
    return model.parse_ccs(fixture_text("rounded_plate_gt.ccs"))


@pytest.fixture(scope="session")
def plate_transcript(plate_gt):
    """Recorded three-round session: ratios 0.675 -> 0.7375 -> 1.0."""
    gt_text = model.serialize_ccs(plate_gt)
    round0 = fixture_text("rounded_plate_round0.ccs").strip()
    round1 = fixture_text("rounded_plate_round1.ccs").strip()
    issues0 = pipeline.describe_differences(plate_gt, round0)
    issues1 = pipeline.describe_differences(plate_gt, round1)
    entries = [
        clients.transcript_entry(clients.TASK_DESCRIBE,
                                 {"description": PLATE_DESCRIPTION_0}, round0),
        clients.transcript_entry(clients.TASK_REFLECT,
                                 {"description": PLATE_DESCRIPTION_0,
                                  "gt_ccs": gt_text, "issues": issues0},
                                 PLATE_DESCRIPTION_1),
        clients.transcript_entry(clients.TASK_DESCRIBE,
                                 {"description": PLATE_DESCRIPTION_1}, round1),
        clients.transcript_entry(clients.TASK_REFLECT,
                                 {"description": PLATE_DESCRIPTION_1,
                                  "gt_ccs": gt_text, "issues": issues1},
                                 PLATE_DESCRIPTION_2),
        clients.transcript_entry(clients.TASK_DESCRIBE,
                                 {"description": PLATE_DESCRIPTION_2}, gt_text),
    ]
    return {"entries": entries}


@pytest.fixture(scope="session")
def plate_replay_client(plate_transcript):
    return clients.ReplayClient(plate_transcript)


# --- random valid sequence generation ------------------------------------------

def random_loop(rng: random.Random) -> list:
    """One loop: a lone circle or a chain of 2..6 lines/arcs.

    Consecutive endpoints are kept distinct (cyclically) so arcs always
    have a chord.
    """
    if rng.random() < 0.3:
        return [model.Circle(rng.randrange(256), rng.randrange(256),
                             rng.randrange(256))]
    count = rng.randint(2, 6)
    points: list = []
    for i in range(count):
        while True:
            point = (rng.randrange(256), rng.randrange(256))
            if not points or (point != points[-1]
                              and (i < count - 1 or point != points[0])):
                break
        points.append(point)
    curves = []
    for point in points:
        if rng.random() < 0.5:
            curves.append(model.Line(*point))
        else:
            curves.append(model.Arc(*point, rng.randint(1, 255), rng.randint(0, 1)))
    return curves


def random_sequence(rng: random.Random) -> model.CadSequence:
    """Random structurally valid sequence: 1..3 sketch groups, each of 1..3
    loops followed by 1..2 extrusions."""
    cmds: list = []
    for _ in range(rng.randint(1, 3)):
        for _ in range(rng.randint(1, 3)):
            cmds.append(model.SOL)
            cmds.extend(random_loop(rng))
        for _ in range(rng.randint(1, 2)):
            cmds.append(model.Extrude(
                rng.randrange(256), rng.randrange(256), rng.randrange(256),
                rng.randrange(256), rng.randrange(256), rng.randrange(256),
                rng.randint(1, 255), rng.randrange(256), rng.randrange(256),
                rng.choice((7, 8, 9, 10)), rng.choice((1, 2, 3))))
    cmds.append(model.EOS)
    return model.CadSequence(cmds)


def sequence_corpus(seed: int, count: int) -> list:
    rng = random.Random(seed)
    return [random_sequence(rng) for _ in range(count)]


@pytest.fixture(scope="session")
def small_corpus():
    return sequence_corpus(seed=101, count=200)
