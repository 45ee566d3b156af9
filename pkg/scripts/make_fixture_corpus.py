#!/usr/bin/env python3
"""Regenerate the fixture corpus' original chart images.

Run once at fixture-creation time; the PNGs are checked in, so tests and
mock fixtures depend on the committed bytes, not on the local matplotlib.
"""

from __future__ import annotations

import csv
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

ROOT = Path(__file__).resolve().parent.parent
CORPUS = ROOT / "fixtures" / "corpus"


def read_csv(name: str) -> tuple[list[str], list[list[str]]]:
    with open(CORPUS / "csv" / name, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    return rows[0], rows[1:]


def save(fig, name: str) -> None:
    out = CORPUS / "images" / name
    fig.savefig(out, bbox_inches="tight", dpi=60)
    fig.clf()
    plt.close(fig)
    print(f"wrote {out}")


def s1() -> None:
    headers, rows = read_csv("s1.csv")
    fig, ax = plt.subplots(figsize=(3, 2.2))
    labels = [r[0] for r in rows]
    values = [float(r[1]) for r in rows]
    bars = ax.bar(labels, values, color=["#4878a8", "#e49444"])
    ax.bar_label(bars)
    ax.set_title("State Populations")
    ax.set_xlabel(headers[0])
    ax.set_ylabel(headers[1])
    save(fig, "s1.png")


def s2() -> None:
    headers, rows = read_csv("s2.csv")
    fig, ax = plt.subplots(figsize=(3, 2.2))
    years = [r[0] for r in rows]
    scores = [float(r[1]) for r in rows]
    ax.plot(years, scores, marker="o")
    for x, y in zip(years, scores):
        ax.annotate(str(y), (x, y))
    ax.set_title("Polish Gender Equality Index")
    ax.set_xlabel(headers[0])
    ax.set_ylabel(headers[1])
    save(fig, "s2.png")


def s3() -> None:
    _, rows = read_csv("s3.csv")
    fig, ax = plt.subplots(figsize=(3, 2.4))
    labels = [r[0] for r in rows]
    shares = [float(r[1]) for r in rows]
    ax.pie(shares, labels=labels, autopct="%1.0f%%")
    ax.set_title("Browser Market Share")
    save(fig, "s3.png")


def s4() -> None:
    headers, rows = read_csv("s4.csv")
    fig, ax = plt.subplots(figsize=(3.2, 2.4))
    cities = [r[0] for r in rows]
    width = 0.35
    xs = range(len(cities))
    for i, year in enumerate(headers[1:]):
        values = [float(r[1 + i]) for r in rows]
        bars = ax.bar([x + i * width for x in xs], values, width, label=year)
        ax.bar_label(bars)
    ax.set_xticks([x + width / 2 for x in xs], cities)
    ax.set_title("Annual Rainfall by City")
    ax.legend(loc="center left", bbox_to_anchor=(1, 0.5))
    save(fig, "s4.png")


def s5() -> None:
    headers, rows = read_csv("s5.csv")
    fig, ax = plt.subplots(figsize=(3, 2.2))
    years = [r[0] for r in rows]
    users = [float(r[1]) for r in rows]
    ax.plot(years, users, marker="s", color="#5a9e6f")
    for x, y in zip(years, users):
        ax.annotate(str(y), (x, y))
    ax.set_title("Internet Users per 100 People")
    ax.set_xlabel(headers[0])
    ax.set_ylabel(headers[1])
    save(fig, "s5.png")


if __name__ == "__main__":
    for make in (s1, s2, s3, s4, s5):
        make()
