"""Regenerate the bundled mini-corpus, its gold file, mock responses and external datasets.

The corpus and the gold records are written from the literal tables below;
gold values are computed here with plain arithmetic, not with the package's
converters.  Mock responses are produced by a scripted backend that answers
each prompt from the answer key, run through the real pipeline so that every
prompt digest the pipeline will ask for is captured.

    python3 tools/build_fixtures.py
"""

from __future__ import annotations

import csv
import json
import re
import shutil
import sys
import tempfile
from pathlib import Path

from compass.classify import PaperCategory, TableCategory
from compass.evaluate import GoldSet, labelled_set_from_dict
from compass.llm import Gateway, MockFixtureTable, prompt_digest
from compass.pipeline import PipelineConfig, run_pipeline
from compass.records import MeasurementType as MT
from compass.records import PbRecord, Phase, Provenance

DATA = Path(__file__).resolve().parents[1] / "src" / "compass" / "data"
CORPUS = DATA / "minicorpus"
PAPERS = CORPUS / "papers"
EXTERNALS = DATA / "externals"


def dm(deg, minutes=0.0, hemi="N"):
    v = deg + minutes / 60
    return -v if hemi in "SW" else v


# -- target papers ----------------------------------------------------------

S1 = (dm(31, 40), dm(64, 10, "W"))
S2 = (25.0, -40.0)
K1 = (dm(36, 30), dm(123, 15.6, "E"))
ST_A = (dm(49, 30), dm(127, 0, "W"))
ST_B = (dm(50, 12.6), dm(145, 30, "W"))
ST_C = (dm(38, 30), dm(63, 15, "W"))

P1_T2_ROWS = [
    ("S1", "10", "36.6", "32.4"), ("S1", "200", "36.7", "28.1"), ("S1", "1000", "35.1", "14.9"),
    ("S1", "3000", "34.9", "9.7"), ("S2", "15", "37.2", "25.6"), ("S2", "250", "36.9", "22.3"),
    ("S2", "1500", "35.0", "n.d."), ("S2", "3500", "34.9", "8.8"), ("S2", "4500", "34.9", "7.9"),
]
P1_T3_ROWS = [
    ("K1-01", "2011-03-02", "5.21"), ("K1-02", "2011-04-05", "6.03"), ("K1-03", "2011-05-03", "4.87"),
    ("K1-04", "2011-06-07", "7.42"), ("K1-05", "2011-07-05", "8.15"), ("K1-06", "2011-08-02", "6.66"),
]
P2_T1_ROWS = [
    ("10", "30°30'N", "140°15'W", "10", "18.2", "7.9"),
    ("100", "30°30'N", "140°15'W", "101", "15.6", "8.0"),
    ("500", "30°30'N", "140°15'W", "503", "12.4", "9.1"),
    ("50", "32°12.5'N", "145°00'W", "50", "17.1", "7.7"),
    ("800", "32°12.5'N", "145°00'W", "806", "11.9", "10.2"),
    ("2000", "32°12.5'N", "145°00'W", "2020", "14.3", "12.5"),
]
P2_COORDS = [(dm(30, 30), dm(140, 15, "W"))] * 3 + [(dm(32, 12.5), dm(145, 0, "W"))] * 3
P3_T1_ROWS = [
    ("A", "100", "1.1812", "2.0731"), ("A", "1000", "1.1898", "2.0655"),
    ("B", "150", "1.1834", "2.0712"), ("B", "2500", "1.1921", "2.0601"),
]
P3_T2_ROWS = [
    ("C-1", "18.612", "15.623", "38.512", "2.4651", "0.002"),
    ("C-2", "18.655", "15.627", "38.548", "2.4668", "0.002"),
    ("C-3", "18.701", "15.631", "38.596", "2.4692", "0.003"),
]

TARGETS = [
    {
        "paper_id": "pb_conc_profiles",
        "doi": "10.5555/compass.fixture.001",
        "title": "Dissolved and total dissolvable lead in the subtropical North Atlantic and a Yellow Sea time series",
        "abstract": ("We report dissolved Pb concentrations in seawater profiles from the subtropical "
                     "North Atlantic and a monthly series of total dissolvable Pb from a shelf station. "
                     "Surface enrichment reflects the legacy of leaded gasoline emissions."),
        "sections": [
            {"heading": "Introduction", "text": "Lead (Pb) in the ocean is dominated by anthropogenic inputs."},
            {"heading": "Methods", "text": ("Seawater was collected with trace-metal clean samplers, acidified "
                                            "and analysed by isotope dilution ICP-MS.")},
        ],
        "tables": [
            {"table_id": "T1", "caption": "Table 1. Sampling locations.",
             "headers": [["Station", "Latitude", "Longitude", "Bottom depth (m)", "Date"]],
             "rows": [["S1", "31°40'N", "64°10'W", "4680", "2008-06-12"],
                      ["S2", "25°00'N", "40°00'W", "5200", "2008-06-20"]],
             "footnotes": [], "context": []},
            {"table_id": "T2", "caption": "Table 2. Dissolved Pb profiles in the subtropical North Atlantic.",
             "headers": [["Station", "Depth (m)", "Salinity", "dPb (pmol/kg sw)"]],
             "rows": [list(r) for r in P1_T2_ROWS],
             "footnotes": ["n.d.: not determined."], "context": []},
            {"table_id": "T3",
             "caption": "Table 3. Time series of total dissolvable Pb at station K1, sampled at 20 m depth.",
             "headers": [["Sample", "Sample date", "Pb (ng/kg)"]],
             "rows": [list(r) for r in P1_T3_ROWS],
             "footnotes": ["Station K1: 36°30'N, 123°15.6'E (Yellow Sea)."], "context": []},
        ],
    },
    {
        "paper_id": "pb210_pacific",
        "doi": "10.5555/compass.fixture.002",
        "title": "Lead-210 and radium-226 in the water column of the eastern North Pacific",
        "abstract": ("Activities of 210Pb and 226Ra were measured in unfiltered seawater to constrain "
                     "particle scavenging of lead in the eastern North Pacific."),
        "sections": [
            {"heading": "Methods", "text": ("210Pb was determined via its granddaughter 210Po by alpha "
                                            "spectrometry after spiking with 209Po.")},
        ],
        "tables": [
            {"table_id": "T1", "caption": "Table 1. 210Pb and 226Ra activities in unfiltered seawater.",
             "headers": [["Depth (m)", "Latitude", "Longitude", "Pressure (dbar)",
                          "210Pb (dpm/100 kg)", "226Ra (dpm/100 kg)"]],
             "rows": [list(r) for r in P2_T1_ROWS], "footnotes": [], "context": []},
            {"table_id": "T2", "caption": "Table 2. Radium isotopes in the same samples.",
             "headers": [["Depth (m)", "226Ra (dpm/100 kg)", "228Ra (dpm/100 kg)"]],
             "rows": [["10", "7.9", "1.2"], ["100", "8.0", "0.9"], ["500", "9.1", "0.2"]],
             "footnotes": [], "context": []},
        ],
    },
    {
        "paper_id": "pb_isotopes_nepac",
        "doi": "10.5555/compass.fixture.003",
        "title": "Lead isotope composition of seawater in the northeast Pacific and western North Atlantic",
        "abstract": ("Dissolved Pb isotope ratios trace the sources of anthropogenic lead to the ocean "
                     "interior. We present ratios from two Pacific profiles and one Atlantic deep sample."),
        "sections": [
            {"heading": "Methods", "text": ("Isotope ratios were measured by MC-ICP-MS with thallium "
                                            "normalization and standard bracketing.")},
        ],
        "tables": [
            {"table_id": "T1", "caption": "Table 1. Dissolved Pb isotope ratios in the northeast Pacific.",
             "headers": [["Station", "Depth (m)", "206Pb/207Pb", "208Pb/206Pb"]],
             "rows": [list(r) for r in P3_T1_ROWS],
             "footnotes": ["a Station A: 49°30'N, 127°00'W.", "b Station B: 50°12.6'N, 145°30'W."],
             "context": []},
            {"table_id": "T2",
             "caption": "Table 2. Pb isotope composition of deep water at station C at 2000 m depth.",
             "headers": [["Sample", "206Pb/204Pb", "207Pb/204Pb", "208Pb/204Pb", "208Pb/207Pb", "2σ"]],
             "rows": [list(r) for r in P3_T2_ROWS],
             "footnotes": ["Station C: 38°30'N, 63°15'W."], "context": []},
        ],
    },
]

# -- distractors (each mentions a retrieval keyword) ------------------------

DISTRACTORS = [
    ("coral_pb_archive", "Marine Pb (non-target)",
     "Lead in Caribbean corals records a century of gasoline emissions",
     "Annual coral bands preserve the history of Pb delivered to surface waters."),
    ("aerosol_pb_atlantic", "Atmospheric Pb",
     "Aerosol lead over the tropical Atlantic",
     "Pb in mineral dust and combustion aerosols was sampled on a ship-based high-volume collector."),
    ("rain_pb_urban", "Atmospheric Pb",
     "Wet deposition of lead in three European cities",
     "Rainwater Pb fluxes declined after the phase-out of leaded fuel."),
    ("soil_pb_mining", "Terrestrial Pb",
     "Lead contamination of soils around a historic mining district",
     "Topsoil Pb reaches several thousand mg/kg near abandoned smelters."),
    ("marsh_pb_cores", "Marine Pb (non-target)",
     "Pb accumulation in salt marsh sediment cores",
     "Sediment cores were dated with excess 210Pb to reconstruct lead inputs to a coastal marsh."),
    ("icpms_pb_method", "Analytical Pb",
     "A low-blank method for Pb isotope analysis by MC-ICP-MS",
     "We describe column chemistry and mass bias correction for lead isotope measurements."),
    ("petabyte_storage", 'Irrelevant "Pb"',
     "Scaling object storage to 40 PB",
     "A distributed file system serving 40 PB of research data with erasure coding."),
    ("fe_zn_geotraces", "Other marine elements",
     "Dissolved iron and zinc in the Southern Ocean",
     "Fe and Zn distributions reflect biological uptake; Pb was not measured in this study."),
    ("team_leadership", "Unrelated topics",
     "How project teams lead change",
     "Interviews with engineers show how informal leaders lead process change in large firms."),
]

TABLE_LABELS = {
    ("pb_conc_profiles", "T1"): "NonTarget",
    ("pb_conc_profiles", "T2"): "TargetPbConc",
    ("pb_conc_profiles", "T3"): "TargetPbConc",
    ("pb210_pacific", "T1"): "Target210Pb",
    ("pb210_pacific", "T2"): "NonTarget",
    ("pb_isotopes_nepac", "T1"): "TargetIsotopeRatios",
    ("pb_isotopes_nepac", "T2"): "TargetIsotopeRatios",
}
PAPER_LABELS = {"pb_conc_profiles": "Marine Pb conc.", "pb210_pacific": "Marine 210Pb",
                "pb_isotopes_nepac": "Marine Pb isotopes ratios",
                **{pid: label for pid, label, _, _ in DISTRACTORS}}

PLANS = {
    ("pb_conc_profiles", "T2"): {"columns": [
        {"column": 3, "header": "dPb (pmol/kg sw)", "measurement_type": "PbConc", "unit": "pmol/kg sw"}],
        "phase": "dissolved"},
    ("pb_conc_profiles", "T3"): {"columns": [
        {"column": 2, "header": "Pb (ng/kg)", "measurement_type": "PbConc", "unit": "ng/kg"}],
        "phase": "total"},
    ("pb210_pacific", "T1"): {"columns": [
        {"column": 4, "header": "210Pb (dpm/100 kg)", "measurement_type": "Pb210Conc", "unit": "dpm/100 kg"}],
        "phase": "total"},
    ("pb_isotopes_nepac", "T1"): {"columns": [
        {"column": 2, "header": "206Pb/207Pb", "measurement_type": "R206_207", "unit": ""},
        {"column": 3, "header": "208Pb/206Pb", "measurement_type": "R208_206", "unit": ""}],
        "phase": "dissolved"},
    ("pb_isotopes_nepac", "T2"): {"columns": [
        {"column": 1, "header": "206Pb/204Pb", "measurement_type": "R206_204", "unit": ""},
        {"column": 2, "header": "207Pb/204Pb", "measurement_type": "R207_204", "unit": ""},
        {"column": 3, "header": "208Pb/204Pb", "measurement_type": "R208_204", "unit": ""},
        {"column": 4, "header": "208Pb/207Pb", "measurement_type": "R208_207", "unit": ""}],
        "phase": "dissolved"},
}
HEADER_ANSWERS = {"Pressure (dbar)": {"field": "ignore"}}
UNIT_ANSWERS = {"pmol/kg sw": {"from_unit": "pmol/kg sw", "to_unit": "pmol/kg",
                               "from_dimension": "amount_per_mass", "factor": 1, "offset": 0}}


# -- gold records -----------------------------------------------------------


def _gold(pid, tid, row, col, header, mtype, value, unit, coord, depth, *, phase, date=None, station=None,
          source_value="", source_unit=""):
    doi = next(p["doi"] for p in TARGETS if p["paper_id"] == pid)
    prov = Provenance(pid, tid, row, header, f"{pid}.json", doi)
    return PbRecord(f"{pid}:{tid}:r{row}:c{col}", mtype, value, unit, (prov,), coord[0], coord[1], depth,
                    Phase(phase), date, station, source_value, source_unit)


def gold_records() -> list[PbRecord]:
    out = []
    dates = {"S1": "2008-06-12", "S2": "2008-06-20"}
    for i, (st, depth, _, v) in enumerate(P1_T2_ROWS):
        if v == "n.d.":
            continue
        out.append(_gold("pb_conc_profiles", "T2", i, 3, "dPb (pmol/kg sw)", MT.PbConc, float(v), "pmol/kg",
                         S1 if st == "S1" else S2, float(depth), phase="dissolved", date=dates[st],
                         station=st, source_value=v, source_unit="pmol/kg sw"))
    for i, (_, date, v) in enumerate(P1_T3_ROWS):
        # ng/kg -> pmol/kg: divide by the molar mass in g/mol, times 1000 (ng/pmol scale)
        out.append(_gold("pb_conc_profiles", "T3", i, 2, "Pb (ng/kg)", MT.PbConc, float(v) * 1000 / 207.2,
                         "pmol/kg", K1, 20.0, phase="total", date=date, station="K1",
                         source_value=v, source_unit="ng/kg"))
    for i, row in enumerate(P2_T1_ROWS):
        # dpm/100 kg -> mBq/m3: /60 s, /100 kg, x1025 kg/m3, x1000 mBq/Bq
        v = row[4]
        out.append(_gold("pb210_pacific", "T1", i, 4, "210Pb (dpm/100 kg)", MT.Pb210Conc,
                         float(v) * 1025000 / 6000, "mBq/m3", P2_COORDS[i], float(row[0]), phase="total",
                         source_value=v, source_unit="dpm/100 kg"))
    for i, (st, depth, r67, r86) in enumerate(P3_T1_ROWS):
        for col, header, mtype, v in ((2, "206Pb/207Pb", MT.R206_207, r67), (3, "208Pb/206Pb", MT.R208_206, r86)):
            out.append(_gold("pb_isotopes_nepac", "T1", i, col, header, mtype, float(v), "dimensionless",
                             ST_A if st == "A" else ST_B, float(depth), phase="dissolved", station=st,
                             source_value=v))
    kinds = ((1, "206Pb/204Pb", MT.R206_204), (2, "207Pb/204Pb", MT.R207_204),
             (3, "208Pb/204Pb", MT.R208_204), (4, "208Pb/207Pb", MT.R208_207))
    for i, row in enumerate(P3_T2_ROWS):
        for col, header, mtype in kinds:
            out.append(_gold("pb_isotopes_nepac", "T2", i, col, header, mtype, float(row[col]),
                             "dimensionless", ST_C, 2000.0, phase="dissolved", station="C",
                             source_value=row[col]))
    return out


# -- external datasets ------------------------------------------------------

STRUCTURED_ROWS = [
    # first five repeat pb_conc_profiles T2 at slightly shifted positions
    ("S1", S1[0] + 0.004, S1[1], "10", "2008-06-12", "32.4"),
    ("S1", S1[0] + 0.004, S1[1], "200", "2008-06-12", "28.1"),
    ("S1", S1[0] + 0.004, S1[1], "1000", "2008-06-12", "14.9"),
    ("S1", S1[0] + 0.004, S1[1], "3000", "2008-06-12", "9.7"),
    ("S2", S2[0], S2[1] - 0.003, "15", "2008-06-20", "25.6"),
    ("GA03-12", 20.0, -30.0, "25", "2010-11-04", "21.3"),
    ("GA03-12", 20.0, -30.0, "800", "2010-11-04", "16.0"),
    ("GA03-12", 20.0, -30.0, "2500", "2010-11-04", "10.4"),
    ("GP16-18", -12.0, -100.0, "50", "2013-11-20", "9.2"),
    ("GP16-18", -12.0, -100.0, "1500", "2013-11-20", "6.1"),
]
SCATTERED_ROWS = [
    (-20.5, 57.5, "5", "3.1"),
    (-20.5, 57.5, "300", "2.4"),
    (10.25, 90.75, "1000", "5.8"),
]


def _fmt(x: float) -> str:
    return f"{x:.6f}".rstrip("0").rstrip(".")


def write_externals() -> None:
    EXTERNALS.mkdir(parents=True, exist_ok=True)
    with (EXTERNALS / "structured_pb.csv").open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["Station", "Latitude", "Longitude", "Depth [m]", "Date", "Pb_D_CONC_BOTTLE [pmol/kg]"])
        for st, lat, lon, depth, date, v in STRUCTURED_ROWS:
            w.writerow([st, _fmt(lat), _fmt(lon), depth, date, v])
    (EXTERNALS / "structured_pb.map.json").write_text(json.dumps({
        "dataset_id": "structured_pb", "kind": "structured",
        "citation": "Synthetic stand-in for an intermediate data product; fixture only.",
        "doi": None,
        "columns": {"Station": "station_label", "Latitude": "latitude", "Longitude": "longitude",
                    "Depth [m]": "depth_m", "Date": "sample_date"},
        "values": [{"column": "Pb_D_CONC_BOTTLE [pmol/kg]", "measurement_type": "PbConc",
                    "unit": "pmol/kg", "phase": "dissolved"}],
    }, indent=1) + "\n", encoding="utf-8")
    with (EXTERNALS / "scattered_pb210.csv").open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["lat", "lon", "depth_m", "Pb210_mBq_m3"])
        for row in SCATTERED_ROWS:
            w.writerow([_fmt(row[0]), _fmt(row[1]), row[2], row[3]])
    (EXTERNALS / "scattered_pb210.map.json").write_text(json.dumps({
        "dataset_id": "scattered_pb210", "kind": "scattered",
        "citation": "Synthetic stand-in for a compiled literature dataset; fixture only.",
        "doi": None,
        "columns": {"lat": "latitude", "lon": "longitude", "depth_m": "depth_m"},
        "values": [{"column": "Pb210_mBq_m3", "measurement_type": "Pb210Conc", "unit": "mBq/m3",
                    "phase": "total"}],
    }, indent=1) + "\n", encoding="utf-8")


# -- scripted backend -------------------------------------------------------

_TASK = re.compile(r"^TASK (\S+):")


class ScriptedBackend:
    """Answers from the answer key above and remembers every reply by prompt digest."""

    backend_id = "scripted"

    def __init__(self):
        self.replies: dict[str, str] = {}

    def send(self, request) -> str:
        bundle = request.bundle
        node = _TASK.match(bundle.user_text).group(1)
        payload = json.loads(bundle.user_text.split("### Task Input\n", 1)[1])
        reply = json.dumps(self.answer(node, payload), sort_keys=True, ensure_ascii=False)
        self.replies[prompt_digest(bundle)] = reply
        return reply

    @staticmethod
    def answer(node: str, payload: dict) -> dict:
        if node == "paper_classification":
            return {"label": PAPER_LABELS[payload["paper_id"]], "rationale": "per answer key"}
        if node == "table_classification":
            key = (payload["paper_id"], payload["table_id"])
            return {"label": TABLE_LABELS[key], "rationale": "per answer key"}
        if node == "header_normalization":
            return {"mappings": [{"header": h, **HEADER_ANSWERS.get(h, {"field": "ignore"})}
                                 for h in payload["headers"]]}
        if node == "unit_standardization":
            return UNIT_ANSWERS[payload["from_unit"]]
        if node in ("pb_conc_extraction", "pb210_extraction", "isotope_ratio_extraction"):
            return PLANS[(payload["paper_id"], payload["table_id"])]
        raise KeyError(f"no scripted answer for node {node}")


# -- build ------------------------------------------------------------------


def write_corpus() -> None:
    if PAPERS.exists():
        shutil.rmtree(PAPERS)
    PAPERS.mkdir(parents=True)
    for p in TARGETS:
        (PAPERS / f"{p['paper_id']}.json").write_text(json.dumps(p, indent=1, ensure_ascii=False) + "\n",
                                                       encoding="utf-8")
    for pid, _, title, abstract in DISTRACTORS:
        doc = {"paper_id": pid, "doi": None, "title": title, "abstract": abstract,
               "sections": [{"heading": "Summary", "text": abstract}], "tables": []}
        (PAPERS / f"{pid}.json").write_text(json.dumps(doc, indent=1, ensure_ascii=False) + "\n",
                                            encoding="utf-8")
    gold = GoldSet(
        paper_labels={k: PaperCategory(v) for k, v in PAPER_LABELS.items()},
        table_labels={k: TableCategory(v) for k, v in TABLE_LABELS.items()},
        gold_records=gold_records(),
    )
    doc = gold.to_dict()
    labelled_set_from_dict(doc)  # parses and enforces the gold invariant
    (CORPUS / "gold.json").write_text(json.dumps(doc, indent=1, ensure_ascii=False) + "\n", encoding="utf-8")
    manifest = {
        "description": "Synthetic mini-corpus: three target papers, nine keyword-hit distractors.",
        "papers": sorted(PAPER_LABELS),
        "target_papers": [p["paper_id"] for p in TARGETS],
        "gold_records": len(doc["records"]),
        "mock_responses": "mock_responses.json",
        "externals": ["../externals/structured_pb.csv", "../externals/scattered_pb210.csv"],
    }
    (CORPUS / "manifest.json").write_text(json.dumps(manifest, indent=1) + "\n", encoding="utf-8")


def record_responses() -> dict:
    backend = ScriptedBackend()
    with tempfile.TemporaryDirectory() as tmp:
        config = PipelineConfig(corpus_path=str(PAPERS), output_dir=tmp, backend="mock",
                                fixtures_path=None)
        manifest = run_pipeline(config, gateway=Gateway(backend, max_attempts=1, max_parallel=1))
    MockFixtureTable(backend.replies).dump(CORPUS / "mock_responses.json")
    return manifest.to_dict()


def main() -> int:
    write_corpus()
    write_externals()
    counts = record_responses()["counts"]
    print(json.dumps(counts, indent=1))
    return 0


if __name__ == "__main__":
    sys.exit(main())
