#!/usr/bin/env python3
"""Regenerates core/src/translit_table.inc.

Latin letters are reduced with NFKD + combining-mark removal; everything else
comes from the explicit MANUAL map below. Code points absent from the table are
dropped by the normalizer.
"""
import unicodedata
import pathlib

MANUAL = {
    0x00A0: " ", 0x00A1: "!", 0x00A2: "c", 0x00A3: "GBP", 0x00A5: "JPY", 0x00A6: "|",
    0x00A7: "S", 0x00A9: "(c)", 0x00AA: "a", 0x00AB: '"', 0x00AC: "!", 0x00AD: "",
    0x00AE: "(r)", 0x00B1: "+/-", 0x00B2: "2", 0x00B3: "3", 0x00B4: "'", 0x00B5: "u",
    0x00B7: ".", 0x00B9: "1", 0x00BA: "o", 0x00BB: '"', 0x00BC: "1/4", 0x00BD: "1/2",
    0x00BE: "3/4", 0x00BF: "?", 0x00C6: "AE", 0x00D0: "D", 0x00D7: "x", 0x00D8: "O",
    0x00DE: "Th", 0x00DF: "ss", 0x00E6: "ae", 0x00F0: "d", 0x00F7: "/", 0x00F8: "o",
    0x00FE: "th", 0x0110: "D", 0x0111: "d", 0x0126: "H", 0x0127: "h", 0x0131: "i",
    0x0132: "IJ", 0x0133: "ij", 0x0138: "k", 0x0141: "L", 0x0142: "l", 0x0149: "'n",
    0x014A: "NG", 0x014B: "ng", 0x0152: "OE", 0x0153: "oe", 0x0166: "T", 0x0167: "t",
    0x017F: "s", 0x0180: "b", 0x0181: "B", 0x0187: "C", 0x0188: "c", 0x0189: "D",
    0x018A: "D", 0x0191: "F", 0x0192: "f", 0x0193: "G", 0x0197: "I", 0x0198: "K",
    0x0199: "k", 0x019A: "l", 0x019D: "N", 0x019E: "n", 0x01A4: "P", 0x01A5: "p",
    0x01AB: "t", 0x01AC: "T", 0x01AD: "t", 0x01AE: "T", 0x01B2: "V", 0x01B3: "Y",
    0x01B4: "y", 0x01B5: "Z", 0x01B6: "z", 0x01E4: "G", 0x01E5: "g", 0x0221: "d",
    0x0234: "l", 0x0235: "n", 0x0236: "t", 0x0237: "j", 0x023A: "A", 0x023B: "C",
    0x023C: "c", 0x023D: "L", 0x023E: "T", 0x0243: "B", 0x0246: "E", 0x0247: "e",
    0x0248: "J", 0x0249: "j", 0x024C: "R", 0x024D: "r", 0x024E: "Y", 0x024F: "y",
    0x02B9: "'", 0x02BA: '"', 0x02BB: "'", 0x02BC: "'", 0x02C6: "^", 0x02C8: "'",
    0x02CB: "`", 0x02CD: "_", 0x02DC: "~",
    0x2000: " ", 0x2001: " ", 0x2002: " ", 0x2003: " ", 0x2004: " ", 0x2005: " ",
    0x2006: " ", 0x2007: " ", 0x2008: " ", 0x2009: " ", 0x200A: " ", 0x200B: "",
    0x200C: "", 0x200E: "", 0x200F: "", 0x2010: "-", 0x2011: "-", 0x2012: "-",
    0x2013: "-", 0x2014: "-", 0x2015: "-", 0x2016: "||", 0x2018: "'", 0x2019: "'",
    0x201A: "'", 0x201B: "'", 0x201C: '"', 0x201D: '"', 0x201E: '"', 0x201F: '"',
    0x2020: "+", 0x2021: "++", 0x2022: "*", 0x2024: ".", 0x2025: "..", 0x2026: "...",
    0x2028: "\n", 0x2029: "\n\n", 0x202F: " ", 0x2030: "%", 0x2032: "'", 0x2033: '"',
    0x2035: "`", 0x2039: "'", 0x203A: "'", 0x203C: "!!", 0x2044: "/", 0x2047: "??",
    0x2048: "?!", 0x2049: "!?", 0x205F: " ", 0x2060: "", 0x20AC: "EUR", 0x20B9: "INR",
    0x2116: "No", 0x2122: "(tm)", 0x2190: "<-", 0x2192: "->", 0x2194: "<->",
    0x21D0: "<=", 0x21D2: "=>", 0x2212: "-", 0x2215: "/", 0x2217: "*", 0x2248: "~",
    0x2260: "!=", 0x2264: "<=", 0x2265: ">=", 0x2500: "-", 0x2502: "|", 0x3000: " ",
    0x3001: ",", 0x3002: ".", 0xFEFF: "",
}


def latin_entries():
    ranges = list(range(0x00C0, 0x0250)) + list(range(0x1E00, 0x1F00))
    out = {}
    for cp in ranges:
        decomposed = unicodedata.normalize("NFKD", chr(cp))
        base = "".join(ch for ch in decomposed if not unicodedata.combining(ch))
        if base and all(ord(ch) < 0x80 for ch in base):
            out[cp] = base
    return out


def main():
    table = latin_entries()
    table.update(MANUAL)
    for cp in range(0xFF01, 0xFF5F):  # fullwidth ASCII forms
        table[cp] = chr(cp - 0xFEE0)
    lines = ["// Generated by scripts/gen_translit_table.py. Do not edit by hand."]
    for cp in sorted(table):
        lit = table[cp].replace("\\", "\\\\").replace('"', '\\"').replace("\n", "\\n")
        lines.append(f'{{0x{cp:04X}, "{lit}"}},')
    dest = pathlib.Path(__file__).resolve().parent.parent / "core" / "src" / "translit_table.inc"
    dest.write_text("\n".join(lines) + "\n")
    print(f"{len(table)} entries -> {dest}")


if __name__ == "__main__":
    main()
