#!/usr/bin/env python3
"""Regenerates tests/data/nfc_cases.tsv.

Each line: <input codepoints> TAB <NFC codepoints>, space-separated hex.
Python's unicodedata is the reference implementation.
"""
import random
import unicodedata
from pathlib import Path

OUT = Path(__file__).parent / "data" / "nfc_cases.tsv"

CASES = [
    "",
    "hello world",
    "é",                      # composes to e-acute
    "é",                       # already composed
    "é́",
    "क़",                 # composes to qa... excluded, stays
    "ো",                 # Bangla e + aa -> o
    "ৌ",                 # Bangla e + au length mark -> au
    "ড়",                 # rra stays decomposed (exclusion)
    "ড়",                       # precomposed rra decomposes under NFC
    "ঢ়",
    "য়",
    "আমি ভাত খাই",
    "ḍ̇",                 # d-dot-above + dot-below reorders
    "ḍ̇",
    "가",                       # Hangul syllable
    "가",                 # Hangul jamo compose
    "각",
    "q̣̇s",
    "á̧",           # a + acute + cedilla (ccc ordering)
]

rng = random.Random(20240811)
pool = (
    [ord(c) for c in "abcdefgh "] +
    list(range(0x0985, 0x098c)) +       # Bangla vowels
    list(range(0x0995, 0x09a0)) +       # Bangla consonants
    [0x09be, 0x09bf, 0x09c7, 0x09d7, 0x09bc, 0x0301, 0x0323, 0x0307,
     0x00e9, 0x1e0b, 0xac00, 0x1100, 0x1161]
)
for _ in range(300):
    n = rng.randint(1, 12)
    CASES.append("".join(chr(rng.choice(pool)) for _ in range(n)))

lines = []
for s in CASES:
    nfc = unicodedata.normalize("NFC", s)
    lines.append(
        " ".join(f"{ord(c):04X}" for c in s)
        + "\t"
        + " ".join(f"{ord(c):04X}" for c in nfc)
    )

OUT.parent.mkdir(parents=True, exist_ok=True)
OUT.write_text("\n".join(lines) + "\n", encoding="utf-8")
print(f"wrote {len(lines)} cases to {OUT}")
