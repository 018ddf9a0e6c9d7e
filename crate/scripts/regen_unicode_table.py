#!/usr/bin/env python3
"""Regenerate crates/mathcorpus/data/unicode_math.tsv from the W3C unicode.xml.

The committed TSV is a curated subset of the W3C character database
(https://www.w3.org/TR/xml-entity-names/, distributed as unicode.xml), keeping
characters that carry a `mathlatex` or `latex` annotation and fall in blocks
that occur in crawled math HTML. The table ships with the crate so builds are
hermetic; run this only when refreshing against a newer unicode.xml.

Usage:
    python3 scripts/regen_unicode_table.py /path/to/unicode.xml > \
        crates/mathcorpus/data/unicode_math.tsv

The output keeps the two-column format the loader expects:
    U+XXXX<TAB><latex command>
Lines starting with '#' are comments. The loader rejects duplicate
codepoints, so this script deduplicates (mathlatex wins over latex).
"""

import sys
import xml.etree.ElementTree as ET

# Blocks worth shipping; everything else (dingbats, musical symbols, ...)
# is noise for this corpus.
RANGES = [
    (0x00A0, 0x00FF),  # Latin-1 supplement (±, ×, ÷, superscripts)
    (0x0370, 0x03FF),  # Greek
    (0x2000, 0x206F),  # general punctuation (primes, fraction slash)
    (0x2100, 0x214F),  # letterlike
    (0x2150, 0x218F),  # number forms (vulgar fractions)
    (0x2190, 0x21FF),  # arrows
    (0x2200, 0x22FF),  # mathematical operators
    (0x2300, 0x23FF),  # misc technical (ceilings, floors)
    (0x25A0, 0x25FF),  # geometric shapes
    (0x27C0, 0x27EF),  # misc math symbols A (angle brackets)
    (0x27F0, 0x27FF),  # supplemental arrows A
    (0x2A00, 0x2AFF),  # supplemental operators
]


def wanted(cp: int) -> bool:
    return any(lo <= cp <= hi for lo, hi in RANGES)


def main() -> int:
    if len(sys.argv) != 2:
        print(__doc__, file=sys.stderr)
        return 2
    tree = ET.parse(sys.argv[1])
    rows = {}
    for char in tree.getroot().iter("character"):
        ident = char.get("id", "")
        if not ident.startswith("U") or "-" in ident:
            continue  # skip multi-char sequences
        try:
            cp = int(ident[1:], 16)
        except ValueError:
            continue
        if not wanted(cp):
            continue
        latex = None
        for tag in ("mathlatex", "latex"):
            node = char.find(tag)
            if node is not None and node.text and node.text.strip():
                latex = node.text.strip()
                break
        if latex and latex != chr(cp):
            rows[cp] = latex
    print("# Math Unicode → LaTeX mapping table.")
    print("# Columns: codepoint (U+XXXX) <TAB> LaTeX command.")
    print("# Generated by scripts/regen_unicode_table.py — edit there, not here.")
    for cp in sorted(rows):
        print(f"U+{cp:04X}\t{rows[cp]}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
