"""File formats and run manifests.

All outputs are canonical JSON (sorted keys, two-space indent, trailing
newline) so reruns with identical inputs produce byte-identical files.
Wall-clock timings are volatile by nature and therefore live only in the
manifest sidecar, never in primary outputs.
"""

import hashlib
import json
from pathlib import Path

from . import __version__
from .catalog import AttributeVocab, Capsule, Outfit, make_garment
from .errors import ValidationError
from .evaluate import LabeledOutfitSet, tag_outfit


def write_json(path, obj):
    Path(path).write_text(json.dumps(obj, sort_keys=True, indent=2) + "\n")


def read_json(path):
    try:
        return json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ValidationError(f"cannot read JSON file {path}: {exc}") from exc


def sha256_file(path):
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(65536), b""):
            h.update(block)
    return h.hexdigest()


class RunManifest:
    """Everything needed to reproduce a run, plus volatile timings.

    The deterministic core is embedded in primary outputs; the sidecar file
    (``<out>.manifest.json``) additionally carries timings.
    """

    def __init__(self, command, config, seed, inputs=None):
        self.command = command
        self.config = dict(config)
        self.seed = seed
        self.inputs = {
            name: {"path": str(p), "sha256": sha256_file(p)}
            for name, p in (inputs or {}).items()
        }
        self.timings = {}

    def core(self):
        return {
            "command": self.command,
            "config": self.config,
            "seed": self.seed,
            "inputs": self.inputs,
            "version": __version__,
        }

    def write_sidecar(self, out_path):
        record = self.core()
        record["timings"] = self.timings
        write_json(str(out_path) + ".manifest.json", record)


# -- corpus files -------------------------------------------------------


def save_corpus(path, documents, vocab_names):
    vocab = AttributeVocab(vocab_names)
    write_json(
        path,
        {
            "vocab": list(vocab.entries),
            "documents": [[vocab.name(t) for t in doc] for doc in documents],
        },
    )


def load_corpus(path):
    """Returns (documents as index tuples, AttributeVocab)."""
    raw = read_json(path)
    for key in ("vocab", "documents"):
        if key not in raw:
            raise ValidationError(f"corpus file missing field {key!r}")
    vocab = AttributeVocab(raw["vocab"])
    docs = [
        tuple(sorted(vocab.index(name) for name in doc)) for doc in raw["documents"]
    ]
    if not docs:
        raise ValidationError("corpus file has no documents")
    return docs, vocab


def documents_with_vocab(raw_documents, vocab):
    return [tuple(sorted(vocab.index(n) for n in doc)) for doc in raw_documents]


# -- labeled outfit files ------------------------------------------------


def _outfit_from_entry(entry, vocab):
    pieces = []
    for p in entry["pieces"]:
        attrs = [vocab.index(a) for a in p["attributes"]]
        pieces.append(make_garment(p["id"], p["layer"], attrs, p.get("meta")))
    return tag_outfit(Outfit(pieces), entry.get("meta", {}))


def load_labeled(path, vocab=None):
    """Load positives (and negatives, when present) from a labeled-outfit
    file.  Attribute names resolve against ``vocab`` when given, else the
    file's own vocabulary."""
    raw = read_json(path)
    if "outfits" not in raw:
        raise ValidationError("labeled file missing field 'outfits'")
    if vocab is None:
        if "vocab" not in raw:
            raise ValidationError("labeled file has no vocab and none was provided")
        vocab = AttributeVocab(raw["vocab"])
    positives = [_outfit_from_entry(e, vocab) for e in raw["outfits"]]
    negatives = [_outfit_from_entry(e, vocab) for e in raw.get("negatives", [])]
    return LabeledOutfitSet(positives=positives, negatives=negatives), vocab


def save_labeled(path, positives_entries, vocab_names, negatives_entries=None):
    payload = {"vocab": list(vocab_names), "outfits": positives_entries}
    if negatives_entries is not None:
        payload["negatives"] = negatives_entries
    write_json(path, payload)


# -- capsules and weights -------------------------------------------------


def capsule_payload(capsule, extras=None):
    out = {"selections": [list(ids) for ids in capsule.selections]}
    out.update(extras or {})
    return out


def load_capsule(path):
    raw = read_json(path)
    if "selections" not in raw:
        raise ValidationError("capsule file missing field 'selections'")
    return Capsule(tuple(tuple(ids) for ids in raw["selections"]))


def load_weights(path):
    raw = read_json(path)
    if "weights" not in raw:
        raise ValidationError("weights file missing field 'weights'")
    return raw["weights"]
