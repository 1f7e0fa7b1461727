"""Regenerate src/compass/data/trees/marine_pb.json from the definitions below."""

import json
from pathlib import Path

OUT = Path(__file__).resolve().parents[1] / "src/compass/data/trees/marine_pb.json"

PAPER_LABELS = [
    "Marine Pb conc.", "Marine 210Pb", "Marine Pb isotopes ratios", "Marine Pb (non-target)",
    "Atmospheric Pb", "Terrestrial Pb", "Analytical Pb", 'Irrelevant "Pb"',
    "Other marine elements", "Unrelated topics",
]
TABLE_LABELS = ["TargetPbConc", "Target210Pb", "TargetIsotopeRatios", "NonTarget"]

PLAN_FORMAT = ('{"columns": [{"column": <0-based index>, "header": "<header text>", '
               '"measurement_type": "<type>", "unit": "<unit as printed>"}], '
               '"phase": "dissolved|particulate|total|unknown"}')

RATIO_WINDOWS = {
    "R206_204": (14.0, 22.0, "206Pb/204Pb", "206", "204"),
    "R207_204": (14.0, 17.0, "207Pb/204Pb", "207", "204"),
    "R208_204": (33.0, 42.0, "208Pb/204Pb", "208", "204"),
    "R206_207": (1.0, 1.4, "206Pb/207Pb", "206", "207"),
    "R208_206": (1.8, 2.3, "208Pb/206Pb", "208", "206"),
    "R208_207": (2.2, 2.6, "208Pb/207Pb", "208", "207"),
}


def node(id, label, task, parent, children=(), bk=(), lc=(), og=(), vc=(), categories=None):
    d = {"id": id, "label": label, "task": task, "parent": parent, "children": list(children),
         "bk": list(bk), "lc": list(lc), "og": list(og), "vc": list(vc)}
    if categories is not None:
        d["categories"] = list(categories)
    return d


def check(kind, id, severity="fatal", **params):
    return {"kind": kind, "id": id, "severity": severity, "params": params}


nodes = [
    node("pb_integration", "Marine Pb data integration",
         "Build a unified, provenance-complete dataset of marine Pb measurements from papers and external datasets.",
         None, ["collection", "marine_pb_species", "isotope_ratio_extraction", "aggregation"],
         bk=["Lead (Pb) is a trace metal whose marine distribution records anthropogenic emissions.",
             "Measurements of interest: Pb concentration, 210Pb activity concentration and six Pb isotope ratios."],
         lc=["Every record must trace back to a paper table row or an external dataset row.",
             "Only seawater and marine particle measurements belong to the dataset."],
         og=["Work top-down: collect papers, extract target tables, then harmonize and fuse."],
         vc=[{"text": "Coordinates must be finite and inside geographic bounds.",
              "check": check("coordinate_sanity", "root.coordinate_sanity")},
             {"text": "Sampling positions must fall on ocean cells of the 1 degree mask.",
              "check": check("geo_bounds", "root.ocean", mask_ref="ocean_1deg")},
             {"text": "Records need an id, value, unit and a position.",
              "check": check("required_fields", "root.required",
                             fields=["record_id", "value", "unit", "latitude", "longitude"])}]),
    node("collection", "Collection", "Find papers that report target marine Pb data.",
         "pb_integration", ["keyword_retrieval", "paper_classification"],
         bk=["Candidate papers come from scholarly repositories and local parsed collections."],
         lc=["A paper advances to extraction only with a target label."]),
    node("keyword_retrieval", "Keyword retrieval",
         "Recall candidate papers by Pb-related keywords in title, abstract and body.",
         "collection",
         bk=["'Pb' also appears in chemical formulas and abbreviations unrelated to lead."],
         lc=["Match whole tokens only, case-insensitively."],
         og=["Search title, abstract and section text for any configured keyword."],
         vc=["Recall matters more than precision here; classification filters later."]),
    node("paper_classification", "Paper classification",
         "Assign the paper exactly one category from the allowed labels.",
         "collection",
         bk=["Target categories report marine measurements: Pb concentration (dissolved or particulate), 210Pb activity, or Pb isotope ratios.",
             "Atmospheric papers deal with aerosols, rain and deposition; terrestrial papers with soils, sediments on land and freshwater.",
             "Analytical papers describe methods, blanks and detection limits rather than environmental data."],
         lc=["Rainwater collected on a cruise is atmospheric, not seawater.",
             "A review without new measurements is Marine Pb (non-target).",
             "If Pb appears only as a formula fragment or abbreviation, the paper is Irrelevant \"Pb\"."],
         og=["Read the title and abstract.",
             "Decide the environmental compartment, then whether new target data are reported.",
             {"step": "Answer with one JSON object.",
              "format": '{"label": "<one allowed label>", "rationale": "<one sentence>"}'}],
         vc=["The label must be one of the allowed labels."],
         categories=PAPER_LABELS),
    node("marine_pb_species", "Marine Pb species",
         "Identify and extract Pb concentration and 210Pb tables from target papers.",
         "pb_integration", ["table_classification", "pb_conc_extraction", "pb210_extraction"],
         bk=["Dissolved Pb passes a 0.2 or 0.45 micron filter; particulate Pb is retained on it."],
         lc=["Sediment, biota and rain data are not seawater measurements."]),
    node("table_classification", "Table classification",
         "Decide whether a table holds target marine Pb data and of which kind.",
         "marine_pb_species",
         bk=["Captions, footnotes and in-text references describe what a table holds."],
         lc=["Blank, detection-limit and reference-material tables are NonTarget.",
             "Station lists without Pb values are NonTarget."],
         og=["Read caption, footnotes and context sentences, then the header.",
             {"step": "Answer with one JSON object.",
              "format": '{"label": "TargetPbConc|Target210Pb|TargetIsotopeRatios|NonTarget", "rationale": "<one sentence>"}'}],
         vc=["The label must be one of the allowed labels."],
         categories=TABLE_LABELS),
    node("pb_conc_extraction", "Pb concentration extraction",
         "List the table columns that hold Pb concentrations, with their units.",
         "marine_pb_species",
         bk=["Concentrations appear in pmol/kg, nmol/kg, ng/kg, ng/L or similar units."],
         lc=["Uncertainty and blank columns are not measurements.",
             "Below-detection entries are not values."],
         og=["Find each column carrying Pb concentrations.",
             "Take the unit from the header, caption or footnote as printed.",
             {"step": "Answer with one JSON object.", "format": PLAN_FORMAT}],
         vc=[{"text": "Pb concentrations lie between 0 and 10000 pmol/kg.",
              "check": check("range", "pb_conc.range", mtype="PbConc", min=0, max=10000, unit="pmol/kg")},
             {"text": "Stored concentrations use pmol/kg.",
              "check": check("unit_whitelist", "pb_conc.unit", mtype="PbConc", allowed_units=["pmol/kg"])}]),
    node("pb210_extraction", "210Pb activity extraction",
         "List the table columns that hold 210Pb activity concentrations, with their units.",
         "marine_pb_species",
         bk=["210Pb activity is reported in dpm/100kg, dpm/100L, mBq/L or Bq/m3."],
         lc=["226Ra and excess-210Pb columns are not 210Pb activity."],
         og=["Find each column carrying total, dissolved or particulate 210Pb activity.",
             {"step": "Answer with one JSON object.", "format": PLAN_FORMAT}],
         vc=[{"text": "210Pb activities lie between 0 and 100000 mBq/m3.",
              "check": check("range", "pb210.range", mtype="Pb210Conc", min=0, max=100000, unit="mBq/m3")},
             {"text": "Stored activities use mBq/m3.",
              "check": check("unit_whitelist", "pb210.unit", mtype="Pb210Conc", allowed_units=["mBq/m3"])}]),
    node("isotope_ratio_extraction", "Pb isotope geochemistry",
         "List the table columns that hold Pb isotope ratios.",
         "pb_integration", [f"pb_isotope_{k[1:]}" for k in RATIO_WINDOWS],
         bk=["Isotope ratios fingerprint Pb sources; 204Pb is the only non-radiogenic stable isotope."],
         lc=["Ratios are dimensionless; report phase only if the paper states it.",
             "Reciprocal ratios (for example 207Pb/206Pb) are not among the six target ratios."],
         og=["Find each column carrying one of the six target ratios.",
             {"step": "Answer with one JSON object.", "format": PLAN_FORMAT}],
         vc=["Each ratio column maps to exactly one of the six ratio types."]),
]

for mtype, (lo, hi, notation, num, den) in RATIO_WINDOWS.items():
    nid = f"pb_isotope_{mtype[1:]}"
    nodes.append(node(
        nid, f"{notation} ratio", f"Validate and standardize {notation} values.",
        "isotope_ratio_extraction",
        bk=[f"{notation} is the abundance ratio of {num}Pb to {den}Pb."],
        lc=["The value is dimensionless."],
        vc=[{"text": f"{notation} lies between {lo} and {hi}.",
             "check": check("range", f"{nid}.range", mtype=mtype, min=lo, max=hi, unit="dimensionless")}]))

nodes += [
    node("aggregation", "Aggregation", "Associate metadata, normalize headers and units, and fuse sources.",
         "pb_integration", ["data_association", "header_normalization", "unit_standardization"],
         bk=["External sources include curated databases and individual published datasets."],
         lc=["Curated database records take precedence over extracted duplicates."]),
    node("data_association", "Data association",
         "Attach coordinates, depths and dates to each measurement.",
         "aggregation",
         bk=["Positions may sit in row cells, footnotes, captions, station tables or the body text."],
         lc=["Prefer the nearest scope: row, then footnote, caption, sibling table, body.",
             "Two different positions at the same scope leave the record unlocated."],
         og=["Match station labels between measurement rows and station lists."],
         vc=["Every record ends up located or flagged unlocated."]),
    node("header_normalization", "Header normalization",
         "Map table headers onto the unified record schema.",
         "aggregation",
         bk=["Unified fields: measurement_type, value, unit, latitude, longitude, depth_m, phase, sample_date, station_label, ignore."],
         lc=["Map each header to exactly one field; unrelated analytes map to ignore."],
         og=[{"step": "Answer with one JSON object.",
              "format": '{"mappings": [{"header": "<header>", "field": "<field>", "measurement_type": "<type or null>"}]}'}],
         vc=["Every input header appears exactly once in the answer."]),
    node("unit_standardization", "Unit standardization",
         "Propose a conversion from an unrecognized unit to the canonical unit.",
         "aggregation",
         bk=["Pb molar mass is 207.2 g/mol; 1 dpm = 1/60 Bq; reference seawater density 1025 kg/m3."],
         lc=["A conversion must keep the physical dimension: concentrations stay concentrations, activities stay activities."],
         og=[{"step": "Answer with one JSON object.",
              "format": '{"from_unit": "<unit>", "to_unit": "<canonical unit>", "from_dimension": "<amount_per_mass|mass_per_mass|amount_per_volume|mass_per_volume|activity_per_mass|activity_per_volume|dimensionless>", "factor": <number>, "offset": 0}'}],
         vc=["Converting forward then back must reproduce the input value."]),
]

doc = {"version": "1.0", "domain": "marine-pb", "root": "pb_integration", "nodes": nodes}
OUT.write_text(json.dumps(doc, indent=2, ensure_ascii=False) + "\n", encoding="utf-8")
print(f"wrote {OUT} ({len(nodes)} nodes)")
