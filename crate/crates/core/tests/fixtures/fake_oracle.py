#!/usr/bin/env python3
"""Stand-in render oracle for protocol tests.

Rect boxes come from attributes; text boxes use 0.5 em per character.
Flags: --sleep S, --wrong-id, --wide, --die-after N, --flaky-text.
"""
import json
import os
import sys
import time
import xml.etree.ElementTree as ET

args = sys.argv[1:]
sleep = float(args[args.index("--sleep") + 1]) if "--sleep" in args else 0.0
die_after = int(args[args.index("--die-after") + 1]) if "--die-after" in args else None
wrong_id = "--wrong-id" in args
wide = "--wide" in args
flaky = "--flaky-text" in args


def num(el, name, default=0.0):
    try:
        return float(el.get(name, default))
    except ValueError:
        return default


def measure(svg, calls):
    root = ET.fromstring(svg)
    out = []
    for index, el in enumerate(list(root.iter())[1:]):
        kind = el.tag.split("}")[-1]
        if kind == "rect":
            box = [num(el, "x"), num(el, "y"), num(el, "width"), num(el, "height")]
            out.append({"index": index, "kind": kind, "bbox": dict(zip("xywh", box))})
        elif kind == "text":
            fs = num(el, "font-size", 16.0)
            w = 0.5 * fs * len("".join(el.itertext()))
            if wide:
                w *= 10
            if flaky:
                w += calls
            x = num(el, "x")
            anchor = el.get("text-anchor", "start")
            if anchor == "middle":
                x -= w / 2
            elif anchor == "end":
                x -= w
            box = {"x": x, "y": num(el, "y") - 0.8 * fs, "w": w, "h": fs}
            out.append({"index": index, "kind": kind, "bbox": box, "text_bbox": box})
    return out


calls = 0
for line in sys.stdin:
    if die_after is not None and calls >= die_after:
        break
    req = json.loads(line)
    calls += 1
    time.sleep(sleep)
    resp = {"version": "v1", "id": req["id"] + ("x" if wrong_id else ""), "font_family": "FakeSans"}
    try:
        resp["elements"] = measure(req["svg"], calls)
        resp["ok"] = True
    except ET.ParseError as e:
        resp.update(ok=False, elements=[], error=f"parse: {e}")
    try:
        print(json.dumps(resp), flush=True)
    except BrokenPipeError:
        os._exit(0)
