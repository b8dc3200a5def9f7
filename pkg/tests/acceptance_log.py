"""Collects one PASS/FAIL line per acceptance criterion for the terminal summary."""

LINES = {}


def record(number, title, passed, detail):
    line = f"[{'PASS' if passed else 'FAIL'}] criterion {number:2d}  {title}: {detail}"
    LINES[(number, title)] = line
    print(line)
    return passed
