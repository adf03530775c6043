#!/usr/bin/env python3
"""Writes the binary COLMAP and depth fixtures from COLMAP's documented byte
layouts, independently of the Rust writer. Rerun from this directory."""

import json
import math
import os
import struct

HERE = os.path.dirname(os.path.abspath(__file__))

CAMERAS = [
    # id, model id, width, height, params
    (1, 1, 640, 480, [500.0, 510.5, 320.25, 239.75]),  # PINHOLE
    (3, 0, 320, 240, [250.125, 160.0, 120.0]),  # SIMPLE_PINHOLE
    (7, 2, 1024, 768, [800.0, 512.0, 384.0, -0.0125]),  # SIMPLE_RADIAL
]

IMAGES = [
    # id, qvec, tvec, camera id, name, points2d (x, y, point3d id)
    (1, [1.0, 0.0, 0.0, 0.0], [0.0, 0.0, 0.0], 1, "frame_a.png", [(10.5, 20.25, 1), (33.0, 44.0, -1)]),
    (2, [0.5, 0.5, -0.5, 0.5], [1.5, -2.25, 3.125], 3, "frame_b.png", []),
    (5, [0.9238795325112867, 0.0, 0.3826834323650898, 0.0], [-0.1, 0.2, 4.0], 7, "sub_dir/frame_c.png",
     [(1.0, 2.0, 2)]),
]

POINTS = [
    # id, xyz, rgb, error, track (image id, point2d index)
    (1, [0.1, -0.2, 3.5], [255, 0, 128], 0.75, [(1, 0)]),
    (2, [1e-3, 2.5e2, -7.0], [12, 34, 56], 1.5, [(5, 0), (1, 1)]),
    (9, [-1.0, 0.0, 1.0], [0, 0, 0], 0.0, []),
]


def write_cameras(path):
    with open(path, "wb") as f:
        f.write(struct.pack("<Q", len(CAMERAS)))
        for cid, model, w, h, params in CAMERAS:
            f.write(struct.pack("<iiQQ", cid, model, w, h))
            f.write(struct.pack("<%dd" % len(params), *params))


def write_images(path):
    with open(path, "wb") as f:
        f.write(struct.pack("<Q", len(IMAGES)))
        for iid, q, t, cid, name, pts in IMAGES:
            f.write(struct.pack("<I4d3dI", iid, *q, *t, cid))
            f.write(name.encode("utf-8") + b"\0")
            f.write(struct.pack("<Q", len(pts)))
            for x, y, pid in pts:
                f.write(struct.pack("<ddq", x, y, pid))


def write_points(path):
    with open(path, "wb") as f:
        f.write(struct.pack("<Q", len(POINTS)))
        for pid, xyz, rgb, err, track in POINTS:
            f.write(struct.pack("<Q3d3Bd", pid, *xyz, *rgb, err))
            f.write(struct.pack("<Q", len(track)))
            for img, idx in track:
                f.write(struct.pack("<II", img, idx))


def expected():
    return {
        "cameras": [{"id": c[0], "model": c[1], "width": c[2], "height": c[3], "params": c[4]} for c in CAMERAS],
        "images": [
            {"id": i[0], "qvec": i[1], "tvec": i[2], "camera_id": i[3], "name": i[4],
             "points2d": [list(p) for p in i[5]]}
            for i in IMAGES
        ],
        "points": [
            {"id": p[0], "xyz": p[1], "rgb": p[2], "error": p[3], "track": [list(t) for t in p[4]]}
            for p in POINTS
        ],
    }


def write_pfm(path, width, height, rows, little_endian=True):
    """`rows` top to bottom; PFM stores bottom to top."""
    with open(path, "wb") as f:
        f.write(b"Pf\n%d %d\n%s\n" % (width, height, b"-1.0" if little_endian else b"1.0"))
        fmt = ("<" if little_endian else ">") + "%df" % width
        for row in reversed(rows):
            f.write(struct.pack(fmt, *row))


def f32_bits(v):
    return struct.unpack("<I", struct.pack("<f", v))[0]


def main():
    binary = os.path.join(HERE, "colmap", "binary")
    os.makedirs(binary, exist_ok=True)
    write_cameras(os.path.join(binary, "cameras.bin"))
    write_images(os.path.join(binary, "images.bin"))
    write_points(os.path.join(binary, "points3D.bin"))
    with open(os.path.join(HERE, "colmap", "binary_expected.json"), "w") as f:
        json.dump(expected(), f, indent=1)

    truncated = os.path.join(HERE, "colmap", "binary_truncated")
    os.makedirs(truncated, exist_ok=True)
    write_cameras(os.path.join(truncated, "cameras.bin"))
    write_points(os.path.join(truncated, "points3D.bin"))
    write_images(os.path.join(truncated, "images.bin"))
    with open(os.path.join(truncated, "images.bin"), "rb+") as f:
        data = f.read()
        f.seek(0)
        f.truncate()
        f.write(data[: len(data) - 13])

    depth = os.path.join(HERE, "depth")
    os.makedirs(depth, exist_ok=True)
    rows = [
        [1.0, 2.5, 1.0e-3, 7.25],
        [math.pi, -1.0, 0.0, 123456.789],
        [float("nan"), 0.5, 1.0 / 3.0, 42.0],
    ]
    write_pfm(os.path.join(depth, "little.pfm"), 4, 3, rows, True)
    write_pfm(os.path.join(depth, "big.pfm"), 4, 3, rows, False)
    with open(os.path.join(depth, "raw.dpth"), "wb") as f:
        f.write(b"DPTH" + struct.pack("<II", 4, 3))
        for row in rows:
            f.write(struct.pack("<4f", *row))
    with open(os.path.join(depth, "expected_bits.json"), "w") as f:
        json.dump({"width": 4, "height": 3, "bits": [f32_bits(v) for row in rows for v in row]}, f)


if __name__ == "__main__":
    main()
