"""Randomised arithmetic trials paired with decimal reference values."""

from __future__ import annotations

import random
from decimal import Decimal

import oracle
from spiderweb import xnum
from spiderweb.xnum import Enclosure, ExtReal

OPS = (
    "add",
    "sub",
    "mul",
    "div",
    "pow_int",
    "pow_real",
    "ln",
    "exp",
    "softplus",
    "logabs_one_minus_exp",
)


def random_ext(rng: random.Random, lo_exp: int = -60, hi_exp: int = 60, signed: bool = True) -> ExtReal:
    man = rng.getrandbits(53) | (1 << 52)
    e = rng.randint(lo_exp, hi_exp) - 52
    x = ExtReal.from_raw((0, man, e, 53))
    if signed and rng.random() < 0.5:
        x = -x
    return x


def _operand(rng: random.Random, signed: bool = True) -> ExtReal:
    r = rng.random()
    if r < 0.1:
        return random_ext(rng, -3000, 3000, signed)
    if r < 0.15:
        return ExtReal(rng.randint(-1000, 1000) if signed else rng.randint(1, 1000))
    return random_ext(rng, -60, 60, signed)


def trial(rng: random.Random, op: str):
    """Return (description, computed enclosure, reference value)."""
    D = oracle.dec
    if op in ("add", "sub", "mul", "div"):
        a, b = _operand(rng), _operand(rng)
        ea, eb = Enclosure(a), Enclosure(b)
        c = oracle._ctx(40)
        if op == "add":
            return f"{a}+{b}", ea + eb, c.add(D(a), D(b))
        if op == "sub":
            return f"{a}-{b}", ea - eb, c.subtract(D(a), D(b))
        if op == "mul":
            return f"{a}*{b}", ea * eb, c.multiply(D(a), D(b))
        return f"{a}/{b}", ea / eb, c.divide(D(a), D(b))
    if op == "pow_int":
        a = random_ext(rng, -40, 40)
        n = rng.randint(-12, 40)
        return f"{a}**{n}", Enclosure(a).pow_int(n), oracle._ctx(40).power(D(a), n)
    if op == "pow_real":
        a = random_ext(rng, -30, 30, signed=False)
        y = random_ext(rng, -8, 3)
        ref = oracle.exp(oracle._ctx(40).multiply(D(y), oracle.ln(D(a))))
        return f"{a}**{y}", Enclosure(a).pow_real(y), ref
    if op == "ln":
        a = _operand(rng, signed=False)
        return f"ln {a}", Enclosure(a).ln(), oracle.ln(D(a))
    if op == "exp":
        a = random_ext(rng, -30, 12)
        return f"exp {a}", Enclosure(a).exp(), oracle.exp(D(a))
    if op == "softplus":
        a = random_ext(rng, -40, 11)
        return f"softplus {a}", xnum.softplus(a), oracle.softplus(D(a))
    if op == "logabs_one_minus_exp":
        a = random_ext(rng, -60, 11)
        return f"lome {a}", xnum.logabs_one_minus_exp(a), oracle.logabs_one_minus_exp(D(a))
    raise ValueError(op)


def run_trials(count: int, seed: int = 20240601):
    """Run ``count`` trials cycling through every operation; return failures."""
    rng = random.Random(seed)
    failures = []
    for i in range(count):
        op = OPS[i % len(OPS)]
        desc, got, ref = trial(rng, op)
        if not oracle.inside(got, ref):
            failures.append((desc, str(got), str(ref)))
    return failures
