"""Shared helpers for the demo scripts."""

from __future__ import annotations

import argparse

from superatom import DEConfig, LocalConfig

TWO_PI = 6.283185307179586


def parser(doc: str) -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(description=doc.strip().splitlines()[0])
    ap.add_argument("--quick", action="store_true", help="small search budgets for a fast look")
    ap.add_argument("--seed", type=int, default=0)
    return ap


def budgets(quick: bool) -> tuple[DEConfig, LocalConfig]:
    if quick:
        return DEConfig(popsize=6, maxiter=15), LocalConfig(maxiter=50)
    return DEConfig(), LocalConfig()


def show(pops: dict, keys=("G", "R0", "R1", "S3", "S4", "Mth", "M")) -> str:
    return "  ".join(f"{k}={100 * pops[k]:6.2f}%" for k in keys)
