#!/usr/bin/env python3
"""Render the synthetic benchmark scenes to image/ground-truth/ROI triplets.

Each scene becomes ``<name>.png``, ``<name>_gt.png`` and ``<name>_roi.json``
in the output directory — the layout that ``nccut eval --dataset`` and the
HTTP demo expect.
"""

import argparse
import pathlib

from nccut.synthetic import all_scenes, save_scene


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out", default="artifacts/fixtures",
                        help="output directory (created if missing)")
    args = parser.parse_args()
    out = pathlib.Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for scene in all_scenes():
        paths = save_scene(scene, out)
        print(f"{scene.name}: " + ", ".join(str(p) for p in paths))
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
