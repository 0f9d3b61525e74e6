"""Template grammar for placement instructions, and its exact inverse parser.

Forms produced:
    "add a red square in the center"                       (absolute, first step)
    "add a blue circle left of the red square"             (single-axis relation)
    "add a blue circle above and right of the red square"  (two-axis relation)
    "add a green triangle below it"                        (pronoun anchor)
"""

from dataclasses import dataclass

CUE_PHRASES = {
    "center": ("in", "the", "center"),
    "left": ("at", "the", "left", "side"),
    "right": ("at", "the", "right", "side"),
    "top": ("at", "the", "top"),
    "bottom": ("at", "the", "bottom"),
}

VERTICAL = ("above", "below")
HORIZONTAL = ("left", "right")


class GrammarError(ValueError):
    pass


@dataclass(frozen=True)
class ParsedInstruction:
    shape: str
    color: str
    relations: frozenset[str]  # subset of {left, right, above, below}; empty if absolute
    anchor: tuple[str, str] | str | None  # (shape, color), "it", or None for absolute
    cue: str | None  # absolute cue name, None for relative

    @property
    def is_absolute(self) -> bool:
        return self.cue is not None


def _relation_phrase(relations: frozenset[str]) -> str:
    vert = [r for r in VERTICAL if r in relations]
    horiz = [r for r in HORIZONTAL if r in relations]
    if len(vert) > 1 or len(horiz) > 1 or not (vert or horiz):
        raise GrammarError(f"unrealizable relation set {set(relations)}")
    parts = []
    if vert:
        parts.append(vert[0])
    if horiz:
        parts.append(f"{horiz[0]} of")
    return " and ".join(parts)


def realize_instruction(
    shape: str,
    color: str,
    *,
    cue: str | None = None,
    relations=(),
    anchor: tuple[str, str] | str | None = None,
) -> str:
    """Emit one instruction sentence. Absolute form needs `cue`; relative needs
    `relations` plus an anchor, either a (shape, color) pair or the pronoun "it"."""
    head = f"add a {color} {shape}"
    if cue is not None:
        if cue not in CUE_PHRASES:
            raise GrammarError(f"unknown cue {cue!r}")
        return f"{head} {' '.join(CUE_PHRASES[cue])}"
    if anchor is None:
        raise GrammarError("relative instruction requires an anchor")
    phrase = _relation_phrase(frozenset(relations))
    if anchor == "it":
        return f"{head} {phrase} it"
    a_shape, a_color = anchor
    return f"{head} {phrase} the {a_color} {a_shape}"


def oracle_parse_instruction(text: str) -> ParsedInstruction:
    """Exact inverse of realize_instruction on its output grammar."""
    tokens = text.lower().split()
    if len(tokens) < 5 or tokens[0] != "add" or tokens[1] != "a":
        raise GrammarError(f"cannot parse: {text!r}")
    color, shape = tokens[2], tokens[3]
    rest = tuple(tokens[4:])

    for cue, phrase in CUE_PHRASES.items():
        if rest == phrase:
            return ParsedInstruction(shape, color, frozenset(), None, cue)

    relations: set[str] = set()
    i = 0
    if i < len(rest) and rest[i] in VERTICAL:
        relations.add(rest[i])
        i += 1
        if i < len(rest) and rest[i] == "and":
            i += 1
            if i + 1 >= len(rest) or rest[i] not in HORIZONTAL or rest[i + 1] != "of":
                raise GrammarError(f"cannot parse relation in: {text!r}")
            relations.add(rest[i])
            i += 2
    elif i + 1 < len(rest) and rest[i] in HORIZONTAL and rest[i + 1] == "of":
        relations.add(rest[i])
        i += 2
    if not relations:
        raise GrammarError(f"cannot parse: {text!r}")

    anchor_tokens = rest[i:]
    if anchor_tokens == ("it",):
        return ParsedInstruction(shape, color, frozenset(relations), "it", None)
    if len(anchor_tokens) == 3 and anchor_tokens[0] == "the":
        return ParsedInstruction(
            shape, color, frozenset(relations), (anchor_tokens[2], anchor_tokens[1]), None
        )
    raise GrammarError(f"cannot parse anchor in: {text!r}")


def grammar_tokens(shapes, colors) -> list[str]:
    """Every surface token the grammar can emit for the given catalogs."""
    fixed = {"add", "a", "the", "it", "and", "of"}
    for phrase in CUE_PHRASES.values():
        fixed.update(phrase)
    fixed.update(VERTICAL)
    fixed.update(HORIZONTAL)
    return sorted(fixed | set(shapes) | set(colors))
