"""Noise calibration metadata: domain types, XML/JSON parsing and emission.

The XML dialect is a small subset of the Sentinel-1 noise annotation layout,
documented in ``docs/calibration-schema.md``. The JSON form mirrors the same
fields and is what the test fixtures are written in.
"""

from __future__ import annotations

import json
import math
import xml.etree.ElementTree as ET
from collections import Counter
from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage

from .errors import InvariantViolation, MalformedDocument, SchemaViolation

SUBSWATHS = ("EW1", "EW2", "EW3", "EW4", "EW5")


@dataclass(frozen=True)
class RangeNoiseVector:
    azimuth_line: int
    range_pixels: tuple
    noise_values: tuple


@dataclass(frozen=True)
class AzimuthNoiseVector:
    subswath_id: str
    first_azimuth_line: int
    last_azimuth_line: int
    first_range_sample: int
    last_range_sample: int
    azimuth_lines: tuple
    noise_values: tuple


@dataclass(frozen=True)
class SubswathRectangle:
    subswath_id: str
    first_azimuth_line: int
    last_azimuth_line: int
    first_range_sample: int
    last_range_sample: int

    @property
    def n_rows(self):
        return self.last_azimuth_line - self.first_azimuth_line + 1

    @property
    def rows(self):
        return slice(self.first_azimuth_line, self.last_azimuth_line + 1)

    @property
    def cols(self):
        return slice(self.first_range_sample, self.last_range_sample + 1)


@dataclass(frozen=True)
class CalibrationSet:
    range_vectors: tuple
    azimuth_vectors: tuple
    rectangles: tuple
    burst_counts: dict = field(hash=False)
    scene_rows: int
    scene_cols: int

    @property
    def subswaths(self):
        """Subswath ids present in the rectangles, in range order."""
        present = {r.subswath_id for r in self.rectangles}
        return tuple(a for a in SUBSWATHS if a in present)

    def rectangles_of(self, subswath_id):
        rects = [r for r in self.rectangles if r.subswath_id == subswath_id]
        return sorted(rects, key=lambda r: r.first_azimuth_line)

    def azimuth_extent(self, subswath_id):
        """Number of azimuth lines covered by the subswath, N_az(a)."""
        return sum(r.n_rows for r in self.rectangles_of(subswath_id))

    def antenna_pattern_counts(self):
        return {a: n - 1 for a, n in self.burst_counts.items()}


@dataclass(frozen=True)
class CoverageGap:
    kind: str  # "gap" or "overlap"
    rows: tuple
    cols: tuple
    subswaths: tuple = ()


# --------------------------------------------------------------------------
# validation shared by both formats


def _check_subswath(value, path):
    if value not in SUBSWATHS:
        raise InvariantViolation(f"unknown subswath id {value!r}", path)
    return value


def _check_values(values, path):
    for v in values:
        if not math.isfinite(v):
            raise InvariantViolation("non-finite noise value", path)
        if v < 0:
            raise InvariantViolation(f"negative noise value {v}", path)


def _check_increasing(values, path):
    for a, b in zip(values, values[1:]):
        if b <= a:
            raise InvariantViolation(f"indices not strictly increasing ({a}, {b})", path)


def _make_range_vector(line, pixels, values, path):
    if len(pixels) != len(values):
        raise InvariantViolation(
            f"line {line}: {len(pixels)} pixels but {len(values)} values", path)
    if not pixels:
        raise InvariantViolation(f"line {line}: empty vector", path)
    _check_increasing(pixels, f"{path} (line {line})")
    _check_values(values, f"{path} (line {line})")
    return RangeNoiseVector(line, tuple(pixels), tuple(values))


def _check_span(first, last, what, path):
    if first > last:
        raise InvariantViolation(f"first {what} {first} after last {last}", path)
    if first < 0:
        raise InvariantViolation(f"negative {what} {first}", path)


def _make_azimuth_vector(swath, fl, ll, fs, ls, lines, values, path):
    _check_subswath(swath, path)
    _check_span(fl, ll, "azimuth line", path)
    _check_span(fs, ls, "range sample", path)
    if len(lines) != len(values):
        raise InvariantViolation(f"{len(lines)} lines but {len(values)} values", path)
    if not lines:
        raise InvariantViolation("empty vector", path)
    _check_increasing(lines, path)
    if lines[0] < fl or lines[-1] > ll:
        raise InvariantViolation("azimuth lines outside the vector's block", path)
    _check_values(values, path)
    return AzimuthNoiseVector(swath, fl, ll, fs, ls, tuple(lines), tuple(values))


def _make_rectangle(swath, fl, ll, fs, ls, path):
    _check_subswath(swath, path)
    _check_span(fl, ll, "azimuth line", path)
    _check_span(fs, ls, "range sample", path)
    return SubswathRectangle(swath, fl, ll, fs, ls)


def _finish(range_vectors, azimuth_vectors, rectangles, ap_counts, rows, cols, paths):
    if rows < 1 or cols < 1:
        raise InvariantViolation(f"scene size {rows}x{cols} is empty", paths["scene"])
    lines = Counter(rv.azimuth_line for rv in range_vectors)
    dup = sorted(line for line, n in lines.items() if n > 1)
    if dup:
        raise SchemaViolation(f"duplicate range vector line {dup[0]}", paths["range"])
    if len(range_vectors) < 2:
        raise InvariantViolation("at least two range vectors are required", paths["range"])
    range_vectors = tuple(sorted(range_vectors, key=lambda rv: rv.azimuth_line))
    if not rectangles:
        raise InvariantViolation("no subswath rectangles", paths["bounds"])
    for a in SUBSWATHS:
        rects = sorted((r for r in rectangles if r.subswath_id == a),
                       key=lambda r: r.first_azimuth_line)
        for r0, r1 in zip(rects, rects[1:]):
            if r1.first_azimuth_line <= r0.last_azimuth_line:
                raise InvariantViolation(
                    f"{a} rectangles overlap in azimuth at line {r1.first_azimuth_line}",
                    paths["bounds"])
    for a, n in ap_counts.items():
        _check_subswath(a, paths["ap"])
        if n < 0:
            raise InvariantViolation(f"negative antenna pattern count for {a}", paths["ap"])
    referenced = {r.subswath_id for r in rectangles}
    # N_burst = N_ap + 1; a subswath with no antennaPattern items has one burst
    bursts = {a: ap_counts.get(a, 0) + 1 for a in SUBSWATHS
              if a in referenced or a in ap_counts}
    return CalibrationSet(range_vectors, tuple(azimuth_vectors), tuple(rectangles),
                          bursts, rows, cols)


# --------------------------------------------------------------------------
# XML


def _child(elem, tag, path):
    found = elem.find(tag)
    if found is None:
        raise SchemaViolation(f"missing required element <{tag}>", path)
    return found


def _text(elem, path):
    return (elem.text or "").strip()


def _int(elem, tag, path):
    p = f"{path}/{tag}"
    text = _text(_child(elem, tag, path), p)
    try:
        return int(text)
    except ValueError:
        raise SchemaViolation(f"expected an integer, got {text[:40]!r}", p) from None


def _list(elem, tag, path, conv):
    p = f"{path}/{tag}"
    words = _text(_child(elem, tag, path), p).split()
    try:
        return [conv(w) for w in words]
    except ValueError:
        raise SchemaViolation(f"non-numeric entry in <{tag}>", p) from None


def _items(root, list_tag, item_tag):
    container = _child(root, list_tag, root.tag)
    return [(f"{root.tag}/{list_tag}/{item_tag}[{n}]", item)
            for n, item in enumerate(container.findall(item_tag))]


def _bounds_fields(item, path):
    swath = _text(_child(item, "swath", path), path)
    return (swath,
            _int(item, "firstAzimuthLine", path), _int(item, "lastAzimuthLine", path),
            _int(item, "firstRangeSample", path), _int(item, "lastRangeSample", path))


def parse_xml(document):
    try:
        root = ET.fromstring(document)
    except Exception as exc:  # expat raises ParseError, but also ValueError on odd input
        raise MalformedDocument(f"not well-formed XML: {exc}") from None
    info = _child(root, "imageInformation", root.tag)
    info_path = f"{root.tag}/imageInformation"
    rows = _int(info, "numberOfLines", info_path)
    cols = _int(info, "numberOfSamples", info_path)

    range_vectors = []
    for path, item in _items(root, "noiseRangeVectorList", "noiseRangeVector"):
        range_vectors.append(_make_range_vector(
            _int(item, "line", path), _list(item, "pixel", path, int),
            _list(item, "noiseRangeLut", path, float), f"{path}/pixel"))

    azimuth_vectors = []
    for path, item in _items(root, "noiseAzimuthVectorList", "noiseAzimuthVector"):
        azimuth_vectors.append(_make_azimuth_vector(
            *_bounds_fields(item, path), _list(item, "line", path, int),
            _list(item, "noiseAzimuthLut", path, float), path))

    rectangles = [_make_rectangle(*_bounds_fields(item, path), path)
                  for path, item in _items(root, "swathBoundList", "swathBound")]

    ap_counts = Counter()
    for path, item in _items(root, "antennaPatternList", "antennaPattern"):
        ap_counts[_check_subswath(_text(_child(item, "swath", path), path), path)] += 1

    r = root.tag
    paths = {"scene": info_path, "range": f"{r}/noiseRangeVectorList",
             "bounds": f"{r}/swathBoundList", "ap": f"{r}/antennaPatternList"}
    return _finish(range_vectors, azimuth_vectors, rectangles, dict(ap_counts),
                   rows, cols, paths)


def _fmt(values):
    return " ".join(repr(float(v)) if isinstance(v, float) else str(v) for v in values)


def to_xml(cal):
    """Serialise a CalibrationSet to the XML subset (bytes)."""
    root = ET.Element("noise")
    info = ET.SubElement(root, "imageInformation")
    ET.SubElement(info, "numberOfLines").text = str(cal.scene_rows)
    ET.SubElement(info, "numberOfSamples").text = str(cal.scene_cols)

    rl = ET.SubElement(root, "noiseRangeVectorList", count=str(len(cal.range_vectors)))
    for rv in cal.range_vectors:
        item = ET.SubElement(rl, "noiseRangeVector")
        ET.SubElement(item, "line").text = str(rv.azimuth_line)
        ET.SubElement(item, "pixel", count=str(len(rv.range_pixels))).text = _fmt(rv.range_pixels)
        ET.SubElement(item, "noiseRangeLut", count=str(len(rv.noise_values))).text = \
            _fmt(rv.noise_values)

    def bounds(item, obj):
        ET.SubElement(item, "swath").text = obj.subswath_id
        ET.SubElement(item, "firstAzimuthLine").text = str(obj.first_azimuth_line)
        ET.SubElement(item, "firstRangeSample").text = str(obj.first_range_sample)
        ET.SubElement(item, "lastAzimuthLine").text = str(obj.last_azimuth_line)
        ET.SubElement(item, "lastRangeSample").text = str(obj.last_range_sample)

    al = ET.SubElement(root, "noiseAzimuthVectorList", count=str(len(cal.azimuth_vectors)))
    for av in cal.azimuth_vectors:
        item = ET.SubElement(al, "noiseAzimuthVector")
        bounds(item, av)
        ET.SubElement(item, "line", count=str(len(av.azimuth_lines))).text = \
            _fmt(av.azimuth_lines)
        ET.SubElement(item, "noiseAzimuthLut", count=str(len(av.noise_values))).text = \
            _fmt(av.noise_values)

    bl = ET.SubElement(root, "swathBoundList", count=str(len(cal.rectangles)))
    for rect in cal.rectangles:
        bounds(ET.SubElement(bl, "swathBound"), rect)

    ap = ET.SubElement(root, "antennaPatternList")
    for a in SUBSWATHS:
        for _ in range(cal.burst_counts.get(a, 1) - 1):
            ET.SubElement(ET.SubElement(ap, "antennaPattern"), "swath").text = a
    ET.indent(root)
    return ET.tostring(root, encoding="utf-8", xml_declaration=True)


# --------------------------------------------------------------------------
# JSON


def _scalar(value, kind, p):
    if kind is int:
        if isinstance(value, bool) or not isinstance(value, int):
            raise SchemaViolation("expected an integer", p)
    elif kind is float:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise SchemaViolation("expected a number", p)
        value = float(value)
    elif kind is str:
        if not isinstance(value, str):
            raise SchemaViolation("expected a string", p)
    return value


def _jget(obj, key, path, kind):
    if not isinstance(obj, dict):
        raise SchemaViolation("expected an object", path)
    if key not in obj:
        raise SchemaViolation(f"missing required key {key!r}", path)
    value = obj[key]
    p = f"{path}.{key}" if path else key
    if kind in ("ints", "floats"):
        if not isinstance(value, list):
            raise SchemaViolation("expected a list", p)
        scalar = int if kind == "ints" else float
        return [_scalar(v, scalar, f"{p}[{n}]") for n, v in enumerate(value)]
    if kind is list:
        if not isinstance(value, list):
            raise SchemaViolation("expected a list", p)
    elif kind is dict:
        if not isinstance(value, dict):
            raise SchemaViolation("expected an object", p)
    return _scalar(value, kind, p)


def _jbounds(obj, path):
    return (_jget(obj, "swath", path, str),
            _jget(obj, "firstAzimuthLine", path, int), _jget(obj, "lastAzimuthLine", path, int),
            _jget(obj, "firstRangeSample", path, int), _jget(obj, "lastRangeSample", path, int))


def parse_json(document):
    try:
        if isinstance(document, (bytes, bytearray)):
            document = document.decode("utf-8")
        obj = json.loads(document)
    except (UnicodeDecodeError, ValueError, RecursionError) as exc:
        raise MalformedDocument(f"not valid JSON: {exc}") from None
    rows = _jget(obj, "sceneRows", "", int)
    cols = _jget(obj, "sceneCols", "", int)

    range_vectors = []
    for n, item in enumerate(_jget(obj, "rangeVectors", "", list)):
        p = f"rangeVectors[{n}]"
        range_vectors.append(_make_range_vector(
            _jget(item, "line", p, int), _jget(item, "pixels", p, "ints"),
            _jget(item, "values", p, "floats"), f"{p}.pixels"))

    azimuth_vectors = []
    for n, item in enumerate(_jget(obj, "azimuthVectors", "", list)):
        p = f"azimuthVectors[{n}]"
        azimuth_vectors.append(_make_azimuth_vector(
            *_jbounds(item, p), _jget(item, "lines", p, "ints"),
            _jget(item, "values", p, "floats"), p))

    rectangles = [_make_rectangle(*_jbounds(item, f"swathBounds[{n}]"), f"swathBounds[{n}]")
                  for n, item in enumerate(_jget(obj, "swathBounds", "", list))]

    ap_counts = {}
    for key, value in _jget(obj, "antennaPatternCounts", "", dict).items():
        ap_counts[key] = _scalar(value, int, f"antennaPatternCounts.{key}")

    paths = {"scene": "sceneRows", "range": "rangeVectors", "bounds": "swathBounds",
             "ap": "antennaPatternCounts"}
    return _finish(range_vectors, azimuth_vectors, rectangles, ap_counts, rows, cols, paths)


def to_json(cal):
    def bounds(obj):
        return {"swath": obj.subswath_id,
                "firstAzimuthLine": obj.first_azimuth_line,
                "lastAzimuthLine": obj.last_azimuth_line,
                "firstRangeSample": obj.first_range_sample,
                "lastRangeSample": obj.last_range_sample}

    obj = {
        "sceneRows": cal.scene_rows,
        "sceneCols": cal.scene_cols,
        "rangeVectors": [{"line": rv.azimuth_line, "pixels": list(rv.range_pixels),
                          "values": list(rv.noise_values)} for rv in cal.range_vectors],
        "azimuthVectors": [dict(bounds(av), lines=list(av.azimuth_lines),
                                values=list(av.noise_values))
                           for av in cal.azimuth_vectors],
        "swathBounds": [bounds(r) for r in cal.rectangles],
        "antennaPatternCounts": cal.antenna_pattern_counts(),
    }
    return json.dumps(obj, indent=1)


def parse_calibration(document, format="xml"):
    """Parse a calibration document into a :class:`CalibrationSet`.

    Parameters
    ----------
    document : bytes or str
        Document contents.
    format : {'xml', 'json'}

    Raises
    ------
    MalformedDocument, SchemaViolation, InvariantViolation
    """
    if format == "xml":
        return parse_xml(document)
    if format == "json":
        return parse_json(document)
    raise ValueError(f"unknown calibration format {format!r}")


def load_calibration(path):
    """Read a calibration file, picking the format from its extension."""
    path = str(path)
    with open(path, "rb") as fh:
        data = fh.read()
    return parse_calibration(data, "json" if path.lower().endswith(".json") else "xml")


def validate_coverage(cal):
    """List cells not covered by exactly one subswath rectangle.

    Each connected region of uncovered cells is reported as a ``gap`` and each
    region covered more than once as an ``overlap`` carrying the ids of the
    subswaths involved. Spans are inclusive ``(first, last)`` pairs.
    """
    rows, cols = cal.scene_rows, cal.scene_cols
    count = np.zeros((rows, cols), dtype=np.int16)
    owners = np.zeros((rows, cols), dtype=np.uint8)  # bitmask over SUBSWATHS
    for rect in cal.rectangles:
        if rect.first_azimuth_line >= rows or rect.first_range_sample >= cols:
            continue
        count[rect.rows, rect.cols] += 1
        owners[rect.rows, rect.cols] |= 1 << SUBSWATHS.index(rect.subswath_id)

    gaps = []
    for kind, mask in (("gap", count == 0), ("overlap", count > 1)):
        labels, n = ndimage.label(mask)
        for idx, sl in enumerate(ndimage.find_objects(labels), start=1):
            ids = ()
            if kind == "overlap":
                bits = np.bitwise_or.reduce(owners[sl][labels[sl] == idx])
                ids = tuple(a for i, a in enumerate(SUBSWATHS) if bits & (1 << i))
            gaps.append(CoverageGap(kind, (sl[0].start, sl[0].stop - 1),
                                    (sl[1].start, sl[1].stop - 1), ids))
    return gaps
