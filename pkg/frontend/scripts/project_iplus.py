"""Backend reference for the scribble-fidelity test: read stroke sets
from stdin as JSON {"num_frames": T, "stroke_sets": [strokes wire, ...]}
and print the uncertain interval the encoder derives for each set."""

import json
import sys

from scribeloop.scribble import Stroke, encode_use


def main() -> None:
    doc = json.load(sys.stdin)
    T = doc["num_frames"]
    out = []
    for strokes_wire in doc["stroke_sets"]:
        strokes = [
            Stroke(points=tuple((p["x"], p["y"], p["t"]) for p in stroke))
            for stroke in strokes_wire
        ]
        enc = encode_use(strokes, T)
        out.append([enc.uncertain_interval.start, enc.uncertain_interval.end])
    json.dump({"iplus": out}, sys.stdout)


if __name__ == "__main__":
    main()
