"""Generate parser_corpus.json: 200 recognizer-response cases.

Every expectation is fixed by construction (how the case was assembled),
never by running the parser, so the corpus stays an independent oracle.

Run from the repository root to regenerate:

    python tests/fixtures/make_parser_corpus.py
"""

from __future__ import annotations

import json
from pathlib import Path

OUT = Path(__file__).parent / "parser_corpus.json"


def item(place="Lobby", kind="text", direction="left", **extra) -> dict:
    record = {"place": place, "kind": kind, "direction": direction}
    record.update(extra)
    return record


GOOD_SETS = [
    ("empty", []),
    ("single-text", [item()]),
    ("text-and-symbol", [item("Ward 63"), item("Lift", "symbol", "straight")]),
    ("hyphenated-direction", [item("Tower B", "text", "straight-right")]),
    ("locational-symbol", [item("Taxi Stand", "symbol", "no-direction")]),
    (
        "three-cues",
        [item("Exit", "text", "right"), item("Cafe", "text", "back-left"), item("Gate 5")],
    ),
    ("synonym-up", [item("Platform 2", "text", "up")]),
    ("synonym-none", [item("Restroom", "symbol", "none")]),
]

WRAPPERS = [
    ("plain", "{json}"),
    ("fenced-json", "```json\n{json}\n```"),
    ("fenced-bare", "```\n{json}\n```"),
    ("prose-before", "Here are the navigational cues I extracted:\n{json}"),
    ("prose-after", "{json}\nLet me know if you need anything else."),
    ("prose-and-fence", "Sure! The parsed cues are below.\n```json\n{json}\n```\nDone."),
    ("indented-fence", "   ```json\n{json}\n   ```"),
    ("fence-prose-after", "```json\n{json}\n```\nThose are all the cues I found."),
]

BAD_ITEMS = {
    "UnmappedDirection": item("Taxi", "symbol", "slight left"),
    "EmptyPlace": item("   ", "text", "left"),
    "BadKind": item("X", "arrow", "left"),
    "NotAnObject": "just a string",
}

MISSING_KEY_ITEMS = [
    # the parser checks kind, then place, then direction
    ("no-place", {"kind": "text", "direction": "left"}, "EmptyPlace"),
    ("no-kind", {"place": "A", "direction": "left"}, "BadKind"),
    ("no-direction", {"place": "A", "kind": "text"}, "UnmappedDirection"),
    ("empty-object", {}, "BadKind"),
]

TOLERATED = [
    ("kind-capitalized", [item("A", "Text", "left")]),
    ("kind-upper", [item("A", "SYMBOL", "left")]),
    ("direction-upper-synonym", [item("A", "text", "FORWARD")]),
    ("direction-mixed-synonym", [item("A", "text", "Upper-Right")]),
    ("direction-spaced", [item("A", "text", "no direction")]),
    ("place-whitespace-runs", [item("  A   B  ", "text", "left")]),
    ("direction-underscore", [item("A", "text", "straight_left")]),
    ("kind-padded", [item("A", " text ", "left")]),
    ("direction-padded", [item("A", "text", " left ")]),
    ("place-unicode", [item("Café", "text", "left")]),
    ("direction-ahead", [item("A", "text", "ahead")]),
    ("direction-behind", [item("A", "text", "behind")]),
]

TRUNCATED = [
    '[{"place": "Lobby", "kind": "text", "direction": "left"}',
    '[{"place": "Lobby", "kind": "te',
    '```json\n[{"place": "A"',
    'Sure! [ {"place": ',
    "[",
    '[[{"place":"x"',
    'The cues are: [{"place": "Ward',
    '[{"place":"A","kind":"text","direction":"left"},',
    "[{",
    '["abc',
    '[{"place": null',
    '[ {"kind"',
    '[{"place": "A", "kind": "text", "direction": "left"}\n',
    "[\n  {\n",
    '[{"place": "Gate',
    "[,]",
    '[{"place": "A" "kind": "text"}]',
    '[{"place": "A",}]',
]

GARBAGE = [
    "",
    "   ",
    "\n\n\n",
    "no signage here",
    "{}",
    "null",
    "true",
    "123",
    '{"place": "A", "kind": "text", "direction": "left"}',
    "]",
    "}{",
    "><><",
    "¯\\_(ツ)_/¯",
    "()",
    "<html><body>error</body></html>",
    "The image shows a corridor with no visible signs.",
    "**bold** _markdown_ text",
    "error: request timed out",
    "I could not parse the sign, sorry.",
    "plain text with ] only",
    "ERROR 503",
    "lorem ipsum dolor sit amet",
    "....",
    "- bullet one\n- bullet two",
    "\t\t",
    "NaN",
    "undefined",
    "'single quoted'",
    '"a bare json string"',
    "# heading\nbody",
]


def build() -> list[dict]:
    cases: list[dict] = []

    def add(name, raw, cues, dropped, span, synonyms=None):
        case = {
            "name": name,
            "raw": raw,
            "expect_cues": cues,
            "expect_dropped": sorted(dropped),
            "expect_span": span,
        }
        if synonyms is not None:
            case["expect_synonyms"] = synonyms
        cases.append(case)

    # valid payloads under every wrapper (8 x 8 = 64)
    for set_name, items in GOOD_SETS:
        rendered = json.dumps(items, ensure_ascii=False)
        synonyms = sum(
            1 for it in items if it["direction"] in ("up", "none", "forward")
        )
        for wrap_name, template in WRAPPERS:
            add(
                f"valid/{set_name}/{wrap_name}",
                template.format(json=rendered),
                len(items),
                [],
                True,
                synonyms,
            )

    # one bad item among 0..2 good ones, three wrappers (4 x 3 x 3 = 36)
    for reason, bad in BAD_ITEMS.items():
        for n_good in (0, 1, 2):
            payload = [item(f"Good {i}") for i in range(n_good)] + [bad]
            rendered = json.dumps(payload, ensure_ascii=False)
            for wrap_name, template in WRAPPERS[:3]:
                add(
                    f"dropped/{reason}/{n_good}-good/{wrap_name}",
                    template.format(json=rendered),
                    n_good,
                    [reason],
                    True,
                )

    # several bad items together (6 pairs + 1 all-four + 4 doubles = 11)
    reasons = list(BAD_ITEMS)
    for i in range(len(reasons)):
        for j in range(i + 1, len(reasons)):
            payload = [item("Kept"), BAD_ITEMS[reasons[i]], BAD_ITEMS[reasons[j]]]
            add(
                f"dropped/pair/{reasons[i]}+{reasons[j]}",
                json.dumps(payload, ensure_ascii=False),
                1,
                [reasons[i], reasons[j]],
                True,
            )
    add(
        "dropped/all-four",
        json.dumps([BAD_ITEMS[r] for r in reasons], ensure_ascii=False),
        0,
        reasons,
        True,
    )
    for reason in reasons:
        add(
            f"dropped/double/{reason}",
            json.dumps([BAD_ITEMS[reason], BAD_ITEMS[reason]], ensure_ascii=False),
            0,
            [reason, reason],
            True,
        )

    # items missing keys, plain and fenced (4 x 2 = 8)
    for name, bad, reason in MISSING_KEY_ITEMS:
        rendered = json.dumps([bad], ensure_ascii=False)
        add(f"missing/{name}/plain", rendered, 0, [reason], True)
        add(f"missing/{name}/fenced", f"```json\n{rendered}\n```", 0, [reason], True)

    # tolerated variations (12)
    for name, items in TOLERATED:
        add(f"tolerated/{name}", json.dumps(items, ensure_ascii=False), len(items), [], True)

    # truncated responses: a bracket but no complete array (18)
    for i, raw in enumerate(TRUNCATED):
        add(f"truncated/{i:02d}", raw, 0, [], False)

    # garbage with no JSON array at all (30)
    for i, raw in enumerate(GARBAGE):
        add(f"garbage/{i:02d}", raw, 0, [], False)

    # first-array and structural edge cases (12)
    add("edge/citation-array", "see [1] for details", 0, ["NotAnObject"], True)
    add(
        "edge/first-array-wins",
        '[] and later [{"place": "A", "kind": "text", "direction": "left"}]',
        0,
        [],
        True,
    )
    add("edge/nested-arrays", "[[1, 2], [3, 4]]", 0, ["NotAnObject", "NotAnObject"], True)
    add(
        "edge/array-inside-object",
        '{"cues": [{"place": "A", "kind": "text", "direction": "left"}]}',
        1,
        [],
        True,
    )
    add(
        "edge/extra-keys-ignored",
        '[{"place": "A", "kind": "text", "direction": "left", "extra": 42}]',
        1,
        [],
        True,
    )
    add("edge/place-not-string", '[{"place": 5, "kind": "text", "direction": "left"}]', 0, ["EmptyPlace"], True)
    add("edge/kind-not-string", '[{"place": "A", "kind": 5, "direction": "left"}]', 0, ["BadKind"], True)
    add("edge/direction-not-string", '[{"place": "A", "kind": "text", "direction": 5}]', 0, ["UnmappedDirection"], True)
    add(
        "edge/null-then-valid",
        '[null, {"place": "A", "kind": "text", "direction": "left"}]',
        1,
        ["NotAnObject"],
        True,
    )
    add(
        "edge/fence-prose-synonym",
        'Answer:\n```json\n[{"place": "Gate 1", "kind": "text", "direction": "forward"}]\n```\nDone.',
        1,
        [],
        True,
        synonyms=1,
    )
    add("edge/spaced-empty-array", "[ ]", 0, [], True)
    add(
        "edge/reordered-keys",
        '[{"direction": "left", "kind": "text", "place": "Reordered"}]',
        1,
        [],
        True,
    )

    # whitespace / formatting variations of valid arrays (9)
    pretty = json.dumps([item("Ward 63"), item("Lift", "symbol", "straight")], indent=2)
    add("format/pretty-printed", pretty, 2, [], True)
    add("format/pretty-in-fence", f"```json\n{pretty}\n```", 2, [], True)
    add("format/tabs", '[\t{"place":\t"A",\t"kind":\t"text",\t"direction":\t"left"}\t]', 1, [], True)
    add("format/compact", '[{"place":"A","kind":"text","direction":"left"}]', 1, [], True)
    add(
        "format/newlines-between-items",
        '[\n{"place":"A","kind":"text","direction":"left"},\n{"place":"B","kind":"text","direction":"right"}\n]',
        2,
        [],
        True,
    )
    add("format/leading-newlines", '\n\n\n[{"place":"A","kind":"text","direction":"left"}]', 1, [], True),
    add("format/trailing-whitespace", '[{"place":"A","kind":"text","direction":"left"}]   \n ', 1, [], True)
    add("format/crlf", '[\r\n{"place":"A","kind":"text","direction":"left"}\r\n]', 1, [], True)
    add("format/unicode-escapes", '[{"place": "Caf\\u00e9", "kind": "text", "direction": "left"}]', 1, [], True)

    return cases


def main():
    cases = build()
    names = [case["name"] for case in cases]
    assert len(names) == len(set(names)), "duplicate case names"
    assert len(cases) == 200, f"expected exactly 200 cases, built {len(cases)}"
    OUT.write_text(json.dumps(cases, ensure_ascii=False, indent=2) + "\n", encoding="utf-8")
    print(f"wrote {len(cases)} cases to {OUT}")


if __name__ == "__main__":
    main()
