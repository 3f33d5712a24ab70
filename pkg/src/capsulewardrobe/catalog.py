"""Item catalog data model: vocabularies, garments, layers, outfits, capsules.

A catalog holds candidate garments organised into layers (outer=0, upper=1,
lower=2, one-piece=3 when present).  An outfit takes at most one garment per
layer; its *document* is the multiset union of the member garments' attribute
bags.  A capsule is a per-layer selection of garments whose outfit set is the
Cartesian product across the non-empty layers.

All values here are immutable after construction and safe to share between
threads.
"""

import itertools
import json
from dataclasses import dataclass, field
from pathlib import Path

from .errors import CatalogError, ValidationError

#: Conventional layer names, index == layer id.
LAYER_NAMES = ("outer", "upper", "lower", "one-piece")


class AttributeVocab:
    """Ordered, unique attribute names; the index of a name is stable."""

    def __init__(self, entries):
        entries = tuple(str(e) for e in entries)
        if len(set(entries)) != len(entries):
            dupes = sorted({e for e in entries if entries.count(e) > 1})
            raise CatalogError(f"duplicate attribute names in vocab: {dupes}")
        self.entries = entries
        self._index = {name: i for i, name in enumerate(entries)}

    def __len__(self):
        return len(self.entries)

    def __eq__(self, other):
        return isinstance(other, AttributeVocab) and self.entries == other.entries

    def index(self, name):
        try:
            return self._index[name]
        except KeyError:
            raise CatalogError(f"unknown attribute: {name!r}") from None

    def name(self, idx):
        return self.entries[idx]


@dataclass(frozen=True)
class Garment:
    """One catalog item: a layer slot plus a bag (multiset) of attribute indices."""

    id: str
    layer: int
    attributes: tuple
    meta: tuple = ()  # sorted (key, value) pairs

    @property
    def meta_dict(self):
        return dict(self.meta)

    def __post_init__(self):
        if not self.attributes:
            raise CatalogError(f"garment {self.id!r} has an empty attribute bag")


def make_garment(gid, layer, attribute_indices, meta=None):
    """Normalise raw fields into a Garment (sorted bag, sorted meta pairs)."""
    meta_items = tuple(sorted((str(k), str(v)) for k, v in (meta or {}).items()))
    return Garment(
        id=str(gid),
        layer=int(layer),
        attributes=tuple(sorted(int(a) for a in attribute_indices)),
        meta=meta_items,
    )


class Outfit:
    """One garment per participating layer, plus the union attribute document.

    Identity is the set of (layer, garment id) pairs, so outfits are usable as
    dict keys and set members regardless of construction order.
    """

    __slots__ = ("members", "document", "key")

    def __init__(self, members):
        members = tuple(sorted(members, key=lambda g: g.layer))
        layers = [g.layer for g in members]
        if len(set(layers)) != len(layers):
            raise ValidationError(f"two garments share a layer: {sorted(layers)}")
        if not members:
            raise ValidationError("an outfit needs at least one garment")
        doc = []
        for g in members:
            doc.extend(g.attributes)
        object.__setattr__(self, "members", members)
        object.__setattr__(self, "document", tuple(sorted(doc)))
        object.__setattr__(self, "key", tuple((g.layer, g.id) for g in members))

    def __setattr__(self, name, value):
        raise AttributeError("Outfit is immutable")

    def __eq__(self, other):
        return isinstance(other, Outfit) and self.key == other.key

    def __hash__(self):
        return hash(self.key)

    def __repr__(self):
        ids = ":".join(gid for _, gid in self.key)
        return f"Outfit({ids})"

    @property
    def member_ids(self):
        return tuple(gid for _, gid in self.key)


def build_outfit(garments):
    """Combine garments from pairwise-distinct layers into an outfit."""
    return Outfit(garments)


class Catalog:
    """Layered candidate lists over a shared attribute vocabulary."""

    def __init__(self, vocab, n_layers, garments):
        self.vocab = vocab
        self.n_layers = int(n_layers)
        if self.n_layers < 1:
            raise CatalogError("a catalog needs at least one layer")
        per_layer = [[] for _ in range(self.n_layers)]
        by_id = {}
        for g in garments:
            if g.layer < 0 or g.layer >= self.n_layers:
                raise CatalogError(
                    f"garment {g.id!r} references layer {g.layer} outside 0..{self.n_layers - 1}"
                )
            if g.id in by_id:
                raise CatalogError(f"duplicate garment id: {g.id!r}")
            for a in g.attributes:
                if a < 0 or a >= len(vocab):
                    raise CatalogError(
                        f"garment {g.id!r} references attribute index {a} outside vocab"
                    )
            by_id[g.id] = g
            per_layer[g.layer].append(g)
        self.layers = tuple(tuple(layer) for layer in per_layer)
        self._by_id = by_id

    @property
    def counts(self):
        """Number of candidates per layer."""
        return tuple(len(layer) for layer in self.layers)

    def garment(self, gid):
        try:
            return self._by_id[gid]
        except KeyError:
            raise CatalogError(f"unknown garment id: {gid!r}") from None

    def __contains__(self, gid):
        return gid in self._by_id

    def all_garments(self):
        return tuple(self._by_id.values())


def load_catalog(path):
    """Load and validate a catalog JSON file.

    Expected shape::

        {"vocab": [str], "layers": int,
         "garments": [{"id": str, "layer": int,
                       "attributes": [str], "meta": {str: str}}]}
    """
    path = Path(path)
    try:
        raw = json.loads(path.read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise CatalogError(f"cannot parse catalog file {path}: {exc}") from exc
    return catalog_from_dict(raw)


def catalog_from_dict(raw):
    for key in ("vocab", "layers", "garments"):
        if key not in raw:
            raise CatalogError(f"catalog file missing field {key!r}")
    vocab = AttributeVocab(raw["vocab"])
    garments = []
    for entry in raw["garments"]:
        try:
            attrs = [vocab.index(a) for a in entry["attributes"]]
            garments.append(
                make_garment(entry["id"], entry["layer"], attrs, entry.get("meta"))
            )
        except KeyError as exc:
            raise CatalogError(f"garment entry missing field {exc}") from exc
    return Catalog(vocab, raw["layers"], garments)


def catalog_to_dict(catalog):
    return {
        "vocab": list(catalog.vocab.entries),
        "layers": catalog.n_layers,
        "garments": [
            {
                "id": g.id,
                "layer": g.layer,
                "attributes": [catalog.vocab.name(a) for a in g.attributes],
                "meta": g.meta_dict,
            }
            for layer in catalog.layers
            for g in layer
        ],
    }


@dataclass(frozen=True)
class Capsule:
    """Per-layer garment-id selections, in insertion order."""

    selections: tuple = field(default=())

    def __post_init__(self):
        norm = tuple(tuple(str(g) for g in layer) for layer in self.selections)
        object.__setattr__(self, "selections", norm)
        for layer_ids in norm:
            if len(set(layer_ids)) != len(layer_ids):
                raise ValidationError(f"repeated selection within a layer: {layer_ids}")

    @property
    def sizes(self):
        return tuple(len(layer) for layer in self.selections)

    def total_pieces(self):
        return sum(self.sizes)

    def with_garment(self, layer, gid):
        """A new capsule with `gid` appended to `layer`."""
        sel = [list(l) for l in self.selections]
        while len(sel) <= layer:
            sel.append([])
        sel[layer].append(gid)
        return Capsule(tuple(tuple(l) for l in sel))

    @classmethod
    def empty(cls, n_layers):
        return cls(tuple(() for _ in range(n_layers)))


def validate_capsule(capsule, catalog):
    if len(capsule.selections) > catalog.n_layers:
        raise ValidationError(
            f"capsule has {len(capsule.selections)} layers, catalog only {catalog.n_layers}"
        )
    for layer, ids in enumerate(capsule.selections):
        for gid in ids:
            g = catalog.garment(gid)
            if g.layer != layer:
                raise ValidationError(
                    f"garment {gid!r} selected in layer {layer} but belongs to layer {g.layer}"
                )


def capsule_outfits(capsule, catalog):
    """All outfits induced by the capsule: the Cartesian product across layers
    with non-empty selections, in lexicographic per-layer selection order."""
    validate_capsule(capsule, catalog)
    pools = [
        [catalog.garment(gid) for gid in ids]
        for ids in capsule.selections
        if ids
    ]
    if not pools:
        return ()
    return tuple(Outfit(combo) for combo in itertools.product(*pools))


def incremental_outfits(capsule, garment, catalog):
    """The new outfits introduced by adding `garment` to its layer:
    {garment} x product of the other layers' non-empty selections."""
    validate_capsule(capsule, catalog)
    i = garment.layer
    if i < 0 or i >= catalog.n_layers:
        raise ValidationError(f"garment layer {i} outside catalog layers")
    if i < len(capsule.selections) and garment.id in capsule.selections[i]:
        raise ValidationError(f"garment {garment.id!r} already selected in layer {i}")
    pools = [
        [catalog.garment(gid) for gid in ids]
        for layer, ids in enumerate(capsule.selections)
        if ids and layer != i
    ]
    if not pools:
        return (Outfit([garment]),)
    return tuple(Outfit((garment,) + combo) for combo in itertools.product(*pools))
