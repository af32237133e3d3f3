#!/usr/bin/env python3
"""Regenerates tests/data/corpus from the sample images bundled with scikit-image.

Each crop is converted to 8-bit luma (ITU-R 601-2, PIL mode "L") and written
as binary PGM. The output is committed; this script only documents where the
pixels came from.
"""
import json
import os
import sys

from PIL import Image
import skimage

SRC = os.path.join(os.path.dirname(skimage.__file__), "data")

# (file, x, y, size, role)
CROPS = [
    ("astronaut.png", 0, 0, 330, "train"),
    ("camera.png", 0, 0, 330, "train"),
    ("coffee.png", 0, 0, 330, "train"),
    ("coffee.png", 270, 70, 330, "train"),
    ("hubble_deep_field.jpg", 0, 0, 330, "train"),
    ("hubble_deep_field.jpg", 500, 400, 330, "train"),
    ("hubble_deep_field.jpg", 0, 540, 330, "train"),
    ("retina.jpg", 300, 300, 330, "train"),
    ("retina.jpg", 900, 900, 330, "train"),
    ("retina.jpg", 500, 1000, 330, "train"),
    ("rocket.jpg", 0, 0, 330, "train"),
    ("rocket.jpg", 310, 97, 330, "train"),
    ("moon.png", 0, 0, 330, "train"),
    ("brick.png", 0, 0, 330, "train"),
    ("grass.png", 0, 0, 330, "train"),
    ("gravel.png", 0, 0, 330, "train"),
    ("cell.png", 0, 0, 330, "train"),
    ("ihc.png", 0, 0, 330, "train"),
    ("motorcycle_left.png", 0, 0, 330, "train"),
    ("motorcycle_left.png", 411, 170, 330, "train"),
    ("chelsea.png", 125, 50, 200, "test"),
    ("coins.png", 92, 51, 200, "test"),
    ("clock_motion.png", 100, 50, 200, "test"),
    ("camera.png", 340, 340, 172, "test"),
    ("astronaut.png", 340, 340, 172, "test"),
]


def main(out_dir):
    os.makedirs(out_dir, exist_ok=True)
    entries = []
    for i, (name, x, y, size, role) in enumerate(CROPS):
        im = Image.open(os.path.join(SRC, name)).convert("L")
        crop = im.crop((x, y, x + size, y + size))
        assert crop.size == (size, size), (name, crop.size)
        stem = "%s_%02d_%s.pgm" % (role, i, os.path.splitext(name)[0])
        crop.save(os.path.join(out_dir, stem))
        entries.append({"path": stem, "role": role})
    manifest = {"scale": 2, "patch": {"lr_size": 33, "stride": 33, "hr_size": 17}, "images": entries}
    with open(os.path.join(out_dir, "manifest.json"), "w") as f:
        json.dump(manifest, f, indent=2)
        f.write("\n")


if __name__ == "__main__":
    main(sys.argv[1] if len(sys.argv) > 1 else "tests/data/corpus")
