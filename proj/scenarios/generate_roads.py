#!/usr/bin/env python3
"""Regenerates the road files in scenarios/roads/ from their parameters.

Every road is sampled at 1 m spacing. Curvature and bank changes use
smoothstep ramps; a ramp of length r centred on a segment edge keeps the
total turning of a segment equal to kappa times its nominal length.
"""

import math
from pathlib import Path

import numpy as np
import yaml

OUT = Path(__file__).resolve().parent / "roads"


def smoothstep(u):
    u = np.clip(u, 0.0, 1.0)
    return u * u * (3.0 - 2.0 * u)


def plateau(s, start, length, ramp):
    """1 on [start + ramp/2, start + length - ramp/2], smooth 0 -> 1 -> 0 around it."""
    return smoothstep((s - start + ramp / 2) / ramp) - smoothstep((s - start - length + ramp / 2) / ramp)


def stations(length):
    return np.linspace(0.0, length, int(round(length)) + 1)


def numbers(a):
    return [float(f"{v:.12g}") for v in a]


def write(name, doc):
    OUT.mkdir(exist_ok=True)
    header = f"# Generated by generate_roads.py; edit the script, not this file.\n"
    text = yaml.safe_dump(doc, sort_keys=False, default_flow_style=None, width=100000)
    (OUT / f"{name}.yaml").write_text(header + text)


def flat_oval():
    # Two 50 m straights joined by r = 25 m half circles, plus a closing straight.
    r, straight, ramp = 25.0, 50.0, 10.0
    half = math.pi * r
    s = stations(2 * straight + 2 * half + 40.0)
    kappa = plateau(s, straight, half, ramp) + plateau(s, 2 * straight + half, half, ramp)
    write("flat_oval", {"name": "flat oval", "chart": "frenet", "half_width": 4.0,
                        "s": numbers(s), "kappa": numbers(kappa / r)})


def hill_climb():
    # Flat run-in, ramp up to a 20 % grade, 130 m of grade, ramp back to flat.
    grade = math.atan(0.2)
    s = stations(300.0)
    b = grade * (smoothstep((s - 40.0) / 30.0) - smoothstep((s - 200.0) / 30.0))
    write("hill_climb", {"name": "20% hill climb", "chart": "tait-bryan", "half_width": 4.0,
                         "s": numbers(s), "kappa": numbers(np.zeros_like(s)), "b": numbers(b),
                         "c": numbers(np.zeros_like(s))})


def vertical_loop():
    # Flat approach, full r = 20 m loop entered and left over 8 m ramps, run-out.
    r, approach, ramp, runout = 20.0, 40.0, 8.0, 60.0
    loop = 2.0 * math.pi * r
    s = stations(approach + loop + ramp + runout)
    u = s - approach
    ky = -(smoothstep(u / ramp) - smoothstep((u - loop) / ramp)) / r
    zero = numbers(np.zeros_like(s))
    write("vertical_loop", {"name": "vertical loop r=20", "chart": "darboux", "half_width": 4.0,
                            "s": numbers(s), "ks": zero, "ky": numbers(ky), "kn": zero})


def turn(name, title, radius, bank_deg, length=90.0):
    # Straight, 20 m transition into a constant-radius left turn with bank, back out.
    approach, ramp = 50.0, 20.0
    s = stations(approach + length + 60.0)
    w = plateau(s, approach, length, ramp)
    write(name, {"name": title, "chart": "tait-bryan", "half_width": 4.0, "s": numbers(s),
                 "kappa": numbers(w / radius), "b": numbers(np.zeros_like(s)),
                 "c": numbers(w * math.radians(bank_deg))})


def main():
    flat_oval()
    hill_climb()
    vertical_loop()
    # A left turn banks correctly when its inside (+y) edge is lower, i.e. c < 0.
    turn("banked_turn", "30 deg banked turn r=40", 40.0, -30.0)
    turn("off_camber_turn", "off-camber turn r=50", 50.0, 8.0)


if __name__ == "__main__":
    main()
