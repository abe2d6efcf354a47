"""Collects one PASS/FAIL line per acceptance criterion."""
import sys

_results: dict[int, str] = {}


def record(number: int, title: str, ok: bool, detail: str) -> bool:
    line = f"[{'PASS' if ok else 'FAIL'}] criterion {number:>2}: {title} -- {detail}"
    _results[number] = line
    print(line, file=sys.__stdout__, flush=True)
    return ok


def lines() -> list[str]:
    return [_results[k] for k in sorted(_results)]
