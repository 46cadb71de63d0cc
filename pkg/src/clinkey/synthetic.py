"""Deterministic generator of radiology-style demo reports.

The real clinical corpora this workbench targets are access-gated, so
the demo pipeline ships with a synthetic stand-in: a few thousand
short chest-imaging pseudo-reports written from a weighted template
grammar.  The output mimics the statistics that matter to the models,
not medical truth: canonical section order, heavily reused phrase
families with slot variation, a long Zipf tail of descriptor terms,
raw digits and punctuation (removed by preprocessing), and the
literal "XXXX" de-identification marker.
"""

from __future__ import annotations

import random

from .corpus import RawCorpus

# part kinds understood by _render: plain string, weighted choice,
# optional part, a named slot filled from the term pools, or a variable
# that is sampled once and can be repeated later in the same sentence
# (used for laterality agreement)
_CHOICE = "choice"
_OPT = "opt"
_SLOT = "slot"
_SET = "set"
_GET = "get"


def c(*pairs):
    return (_CHOICE, pairs)


def opt(p, part):
    return (_OPT, p, part)


def slot(name):
    return (_SLOT, name)


def set_var(name, part):
    return (_SET, name, part)


def get_var(name):
    return (_GET, name)


_PREFIXES = [
    "peri", "para", "retro", "infra", "supra", "inter", "sub", "trans",
    "pre", "post", "juxta", "endo", "epi", "hemi", "medio", "dorso",
    "ventro", "latero",
]
_STEMS = [
    "bronchial", "hilar", "cardiac", "pleural", "aortic", "diaphragmatic",
    "mediastinal", "tracheal", "esophageal", "vascular", "costal",
    "scapular", "clavicular", "vertebral", "apical", "basilar", "lobar",
    "septal", "alveolar", "parenchymal", "sternal", "thoracic", "pulmonic",
    "bronchiolar", "pericardial", "azygos",
]

_NOUN_TERMS = [
    "opacity", "atelectasis", "consolidation", "nodule", "granuloma",
    "scarring", "calcification", "infiltrate", "edema", "congestion",
    "emphysema", "fibrosis", "thickening", "blunting", "haziness",
    "prominence", "density", "lucency", "streaking", "distention",
    "tortuosity", "elongation", "ectasia", "plaque", "fracture",
    "spondylosis", "osteopenia", "kyphosis", "scoliosis", "arthropathy",
    "pneumonia", "bronchiectasis", "hyperinflation", "hyperexpansion",
    "cardiomegaly", "effusion", "pneumothorax", "adenopathy", "mass",
    "lesion", "cyst", "bulla", "bleb", "crowding", "engorgement",
    "deformity", "irregularity", "angulation", "sclerosis", "spurring",
    "demineralization", "consolidative", "reticulation", "honeycombing",
    "cavitation", "retraction", "herniation", "eventration", "widening",
    "narrowing", "fullness", "shift", "deviation", "silhouetting",
]

_LOCATIONS = [
    "right base", "left base", "right upper lobe", "left upper lobe",
    "right lower lobe", "left lower lobe", "right middle lobe", "lingula",
    "right apex", "left apex", "right costophrenic angle",
    "left costophrenic angle", "retrocardiac region", "right perihilar region",
    "left perihilar region", "right lung base", "left lung base",
    "upper lung zones", "lower lung zones", "right hemithorax",
    "left hemithorax", "cardiophrenic angle", "right midlung", "left midlung",
    "aortopulmonary window", "subcarinal region", "paratracheal region",
    "costovertebral junction", "thoracic inlet", "lung periphery",
]

_COMPLAINTS = [
    "chest pain", "shortness of breath", "cough", "fever", "dyspnea",
    "hypoxia", "chest tightness", "wheezing", "hemoptysis", "weakness",
    "syncope", "palpitations", "abdominal pain", "back pain", "trauma",
    "fall", "altered mental status", "sepsis", "pneumonia", "chills",
    "tachycardia", "dizziness", "nausea", "fatigue", "malaise",
    "respiratory distress", "productive cough", "pleuritic pain",
]

_SIZE = c(("small", 4), ("mild", 4), ("moderate", 2), ("large", 1),
          ("subtle", 1), ("chronic", 2), ("minimal", 2), ("trace", 1))

# size classes keyed to sentence frames: the size word lands inside the
# prediction window and cues which continuation family follows
_SIZE_ACUTE = c(("small", 4), ("mild", 3), ("trace", 2), ("minimal", 2),
                ("subtle", 1))
_SIZE_CHRONIC = c(("moderate", 3), ("chronic", 3), ("extensive", 1),
                  ("longstanding", 1))

_HEDGE = c(("grossly", 2), ("essentially", 2), ("otherwise", 2), ("again", 2),
           ("now", 1), ("persistently", 1), ("relatively", 1), ("interval", 1),
           ("somewhat", 1), ("apparently", 1))


def _zipf_weights(n: int, exponent: float) -> list[float]:
    return [1.0 / (i + 2.0) ** exponent for i in range(n)]


def _term_pools(rng: random.Random) -> dict[str, tuple[list[str], list[float]]]:
    adjectives = [p + s for p in _PREFIXES for s in _STEMS]
    rng.shuffle(adjectives)
    nouns = list(_NOUN_TERMS)
    rng.shuffle(nouns)
    return {
        "adj_term": (adjectives, _zipf_weights(len(adjectives), 0.8)),
        "noun_term": (nouns, _zipf_weights(len(nouns), 0.8)),
        "location": (list(_LOCATIONS), _zipf_weights(len(_LOCATIONS), 0.7)),
        "complaint": (list(_COMPLAINTS), _zipf_weights(len(_COMPLAINTS), 0.8)),
    }


# A finding clause: descriptor terms drawn from long-tail pools embedded
# in a handful of frequent frames. The frames keep the continuations
# after the terms highly regular even when the exact word pair is rare.
_FINDING = c(
    ([
        c(("There is a", 4), ("There is", 2), ("Again seen is a", 1),
          ("Again noted is", 1)),
        opt(0.6, _SIZE_ACUTE),
        slot("adj_term"),
        slot("noun_term"),
        "in the",
        slot("location"),
        ".",
    ], 3),
    ([
        _SIZE_ACUTE,
        slot("adj_term"),
        slot("noun_term"),
        c(("is noted in the", 3), ("is seen in the", 2), ("persists in the", 1),
          ("is present in the", 1)),
        slot("location"),
        ".",
    ], 3),
    ([
        _SIZE_CHRONIC,
        slot("adj_term"),
        slot("noun_term"),
        c(("appears unchanged compared to the prior study.", 4),
          ("appears unchanged compared to the prior examination.", 2),
          ("appears slightly improved from the previous study.", 1)),
    ], 4),
    ([
        c(("Redemonstrated", 2), ("Unresolved", 1)),
        slot("adj_term"),
        slot("noun_term"),
        c(("without associated effusion or consolidation.", 3),
          ("without significant interval change.", 2),
          ("without superimposed consolidation or effusion.", 1),
          ("with surrounding architectural distortion.", 1)),
    ], 2),
    ([
        c(("Stable", 3), ("Persistent", 1)),
        slot("adj_term"),
        slot("noun_term"),
        c(("in the", 4), ("involving the", 1)),
        slot("location"),
        opt(0.4, c((", unchanged from prior", 2), (", similar to XXXX", 1),
                   (", better assessed on CT", 1))),
        ".",
    ], 1),
    # laterality agreement: the side named at the start is repeated a few
    # words later, a dependency that spans most of a prediction window
    ([
        set_var("side", c(("Right", 1), ("Left", 1))),
        slot("adj_term"),
        slot("noun_term"),
        c(("with associated", 3), ("with adjacent", 2), ("with overlying", 1)),
        get_var("side"),
        c(("basilar atelectasis.", 3), ("pleural thickening.", 2),
          ("volume loss.", 2), ("costophrenic blunting.", 1)),
    ], 4),
)

# Sentence templates per section, emitted in canonical order with
# per-section inclusion probabilities.
_SECTIONS = [
    ("indication", 0.7, c(
        ([
            c(("Indication:", 3), ("Clinical history:", 2), ("History:", 2),
              ("Clinical indication:", 1)),
            c(("62", 1), ("45", 1), ("71", 1), ("58", 1), ("83", 1), ("34", 1),
              ("XXXX", 4)),
            "year old",
            c(("male", 2), ("female", 2), ("XXXX", 4)),
            "with",
            slot("complaint"),
            opt(0.25, ["and", slot("complaint")]),
            ".",
        ], 3),
        ([
            c(("Indication:", 2), ("History:", 1)),
            slot("complaint"),
            opt(0.3, ["rule out", slot("noun_term")]),
            ".",
        ], 1),
    )),
    ("comparison", 0.45, c(
        (["Comparison: XXXX."], 3),
        (["Comparison is made to the prior study dated XXXX."], 1),
        (["Compared to radiograph from XXXX", opt(0.4, "at XXXX"), "."], 1),
        (["No prior studies available for comparison."], 1),
    )),
    ("heart", 0.9, c(
        ([
            c(("The heart", 3), ("Heart size", 3), ("The cardiac silhouette", 2),
              ("The cardiomediastinal silhouette", 2)),
            c(("is", 8), ("remains", 2), ("appears", 1)),
            opt(0.25, _HEDGE),
            c(("normal in size.", 3), ("within normal limits.", 3),
              ("mildly enlarged.", 2), ("stable in appearance.", 2),
              ("at the upper limits of normal.", 1), ("top normal.", 1),
              ("unremarkable.", 1)),
        ], 5),
        ([
            c(("Heart size and", 2), ("Cardiac and", 1)),
            c(("mediastinal contours are", 3), ("pulmonary vascularity are", 2),
              ("hilar contours are", 1)),
            opt(0.25, _HEDGE),
            c(("normal.", 3), ("within normal limits.", 3), ("stable.", 2),
              ("unchanged.", 2)),
        ], 2),
    )),
    ("mediastinum", 0.3, c(
        ([
            c(("The mediastinum is", 3), ("Mediastinal contours are", 2),
              ("The trachea is", 1)),
            opt(0.2, _HEDGE),
            c(("unremarkable.", 3), ("within normal limits.", 2), ("midline.", 2),
              ("stable.", 1), ("not widened.", 1)),
        ], 3),
        ([
            "There is",
            _SIZE,
            slot("adj_term"),
            c(("prominence.", 2), ("fullness.", 2), ("widening.", 1)),
        ], 1),
    )),
    ("lungs", 0.95, c(
        ([
            c(("The lungs are", 6), ("Lungs are", 3), ("The lung fields are", 1),
              ("Both lungs are", 1)),
            opt(0.35, _HEDGE),
            c(("clear.", 5), ("clear without evidence of focal consolidation.", 2),
              ("hyperexpanded.", 1), ("well expanded and clear.", 2),
              ("free of focal airspace disease.", 2),
              ("clear of focal infiltrate.", 1), ("hyperinflated.", 1),
              ("low in volume.", 1)),
        ], 5),
        ([
            c(("There is no focal", 3), ("No focal", 2), ("Without focal", 1)),
            c(("consolidation.", 3), ("airspace disease.", 2), ("infiltrate.", 2),
              ("opacity.", 1)),
        ], 2),
        ([
            "There is",
            _SIZE_ACUTE,
            slot("adj_term"),
            c(("airspace disease in the", 3), ("interstitial prominence in the", 1)),
            slot("location"),
            ".",
        ], 1),
    )),
    ("pleura", 0.8, c(
        ([
            c(("There is no", 4), ("No", 5), ("There is no evidence of", 2),
              ("Without evidence of", 1)),
            c(("pneumothorax or pleural effusion.", 4),
              ("pleural effusion or pneumothorax.", 3),
              ("focal consolidation pneumothorax or large effusion.", 2),
              ("acute cardiopulmonary abnormality.", 2),
              ("large pleural effusion.", 1)),
        ], 4),
        ([
            c(("Trace", 2), ("A small", 2), ("Blunting suggests a small", 1)),
            c(("right", 2), ("left", 2), ("bilateral", 1)),
            c(("pleural effusion is", 3), ("effusion is", 1)),
            c(("noted.", 2), ("possible.", 1), ("unchanged.", 1)),
        ], 1),
    )),
    ("finding", 0.75, _FINDING),
    ("finding2", 0.55, _FINDING),
    ("change", 0.45, c(
        ([
            c(("Compared with the prior study the", 3),
              ("In the interval the", 1)),
            slot("adj_term"),
            slot("noun_term"),
            c(("has not significantly changed.", 4), ("has improved.", 2),
              ("has resolved.", 2), ("is slightly more conspicuous.", 1)),
        ], 2),
        ([
            "Interval resolution of the",
            slot("adj_term"),
            slot("noun_term"),
            c(("previously seen in the", 3), ("in the", 1)),
            slot("location"),
            ".",
        ], 1),
    )),
    ("devices", 0.25, c(
        ([
            c(("A right", 2), ("A left", 2), ("The", 1)),
            c(("central venous catheter", 2), ("PICC line", 2),
              ("endotracheal tube", 1), ("nasogastric tube", 1),
              ("chest tube", 1), ("pacemaker lead", 1)),
            c(("tip is at the", 3), ("terminates at the", 2),
              ("remains at the", 1), ("tip projects over the", 1)),
            c(("cavoatrial junction.", 3), ("mid SVC.", 2), ("carina.", 1),
              ("right atrium.", 1), ("low SVC.", 1)),
        ], 3),
        ([
            c(("Median sternotomy XXXX are", 2), ("Surgical clips are", 1),
              ("Sternotomy XXXX are", 1)),
            c(("intact.", 2), ("again noted.", 2), ("unchanged.", 1)),
        ], 1),
    )),
    ("bones", 0.55, c(
        ([
            c(("The visualized bony structures", 3), ("The osseous structures", 2),
              ("Bony structures", 2), ("The thoracic spine", 1),
              ("Visualized osseous structures", 1)),
            c(("reveal no acute abnormalities.", 3), ("are intact.", 2),
              ("are unremarkable.", 2), ("show degenerative changes.", 2),
              ("are stable.", 1), ("demonstrate no acute fracture.", 1)),
        ], 4),
        ([
            c(("Mild", 2), ("Moderate", 1), ("Multilevel", 1)),
            slot("adj_term"),
            c(("degenerative changes are", 3), ("spurring is", 1)),
            c(("noted.", 2), ("seen in the spine.", 2), ("unchanged.", 1)),
        ], 2),
    )),
    ("impression", 0.85, c(
        ([
            c(("Impression:", 5), ("IMPRESSION:", 2), ("Conclusion:", 1)),
            c(("no acute cardiopulmonary", 4), ("no acute intrathoracic", 2),
              ("no radiographic evidence of acute cardiopulmonary", 1),
              ("no active cardiopulmonary", 1)),
            c(("abnormality.", 5), ("process.", 3), ("disease.", 2),
              ("findings.", 1)),
        ], 5),
        ([
            c(("Impression:", 3), ("IMPRESSION:", 1)),
            c(("stable", 3), ("unchanged", 2), ("persistent", 1), ("interval", 1)),
            slot("adj_term"),
            c(("changes", 3), ("findings", 2), ("appearance", 1)),
            c(("as described above.", 2), ("without acute disease.", 1),
              (["in the", slot("location"), "."], 3)),
        ], 2),
    )),
    ("recommendation", 0.2, c(
        ([
            c(("Recommend", 2), ("Suggest", 1)),
            c(("clinical correlation.", 3),
              ("followup radiograph in 3 months.", 1),
              ("comparison with prior imaging when available.", 1),
              ("dedicated CT for further evaluation.", 1),
              ("correlation with XXXX examination.", 1)),
        ], 1),
    )),
]


def _render(part, rng: random.Random, pools, out: list[str], env: dict) -> None:
    if isinstance(part, str):
        out.append(part)
    elif isinstance(part, list):
        for sub in part:
            _render(sub, rng, pools, out, env)
    elif part[0] == _CHOICE:
        items = part[1]
        choice = rng.choices([i for i, _ in items], [w for _, w in items])[0]
        _render(choice, rng, pools, out, env)
    elif part[0] == _OPT:
        if rng.random() < part[1]:
            _render(part[2], rng, pools, out, env)
    elif part[0] == _SLOT:
        terms, weights = pools[part[1]]
        out.append(rng.choices(terms, weights)[0])
    elif part[0] == _SET:
        before = len(out)
        _render(part[2], rng, pools, out, env)
        env[part[1]] = " ".join(out[before:])
    elif part[0] == _GET:
        out.append(env[part[1]])
    else:
        raise ValueError(f"unknown template part {part!r}")


def generate_report(rng: random.Random, pools) -> str:
    pieces: list[str] = []
    for _, prob, template in _SECTIONS:
        if rng.random() < prob:
            _render(template, rng, pools, pieces, {})
    text = " ".join(pieces).replace(" ,", ",").replace(" .", ".")
    # occasional free-text measurement; digits vanish in preprocessing
    if rng.random() < 0.15:
        text += f" Measuring {rng.randint(1, 9)}.{rng.randint(0, 9)} cm."
    return text


def generate_demo_corpus(n_reports: int = 3500, seed: int = 0) -> RawCorpus:
    """Deterministic pseudo-radiology corpus of ``n_reports`` reports."""
    rng = random.Random(seed)
    pools = _term_pools(rng)
    reports = [generate_report(rng, pools) for _ in range(n_reports)]
    return RawCorpus(reports=reports, source_id=f"demo-{n_reports}-{seed}")


def write_demo_corpus(path: str, n_reports: int = 3500, seed: int = 0) -> RawCorpus:
    corpus = generate_demo_corpus(n_reports, seed)
    with open(path, "w", encoding="utf-8") as fh:
        for report in corpus.reports:
            fh.write(report + "\n")
    return corpus
