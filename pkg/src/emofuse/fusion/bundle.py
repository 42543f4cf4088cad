"""Aligned collections of expert predictions."""

from dataclasses import dataclass

import numpy as np

from ..labels import PredictionSet


class MissingClipError(KeyError):
    def __init__(self, clip_id, model):
        super().__init__(f"clip {clip_id!r} has no prediction from model {model!r}")
        self.clip_id = clip_id
        self.model = model

    def __str__(self):
        return self.args[0]


@dataclass(frozen=True)
class ExpertBundle:
    """Expert predictions on one shared, ordered clip list.

    ``P`` has shape ``(models, clips, 7)``. Gold labels and split tags are
    merged from the members.
    """

    models: tuple
    clip_ids: tuple
    P: np.ndarray
    gold: np.ndarray
    splits: tuple

    @classmethod
    def align(cls, experts: dict, order=None):
        """Align ``{model: PredictionSet}`` on the first model's clip order
        (or ``order``)."""
        if not experts:
            raise ValueError("bundle needs at least one expert")
        models = tuple(experts)
        ref = experts[models[0]]
        ids = tuple(order) if order is not None else ref.clip_ids
        idset = set(ids)
        P = np.empty((len(models), len(ids), ref.probs.shape[1]))
        gold = np.full(len(ids), -1, dtype=np.int64)
        splits = [None] * len(ids)
        for m, name in enumerate(models):
            ps = experts[name]
            extra = [c for c in ps.clip_ids if c not in idset]
            if extra:
                raise MissingClipError(extra[0], models[0])
            for i, c in enumerate(ids):
                if c not in ps:
                    raise MissingClipError(c, name)
                j = ps.index_of(c)
                P[m, i] = ps.probs[j]
                g = int(ps.gold[j])
                if g >= 0:
                    if gold[i] >= 0 and gold[i] != g:
                        raise ValueError(f"clip {c!r}: gold label differs between experts")
                    gold[i] = g
                s = ps.splits[j]
                if splits[i] is None or splits[i] == "other":
                    splits[i] = s
                elif s != "other" and s != splits[i]:
                    raise ValueError(f"clip {c!r}: split tag differs between experts")
        return cls(models, ids, P, gold, tuple(splits))

    @property
    def M(self):
        return len(self.models)

    def __len__(self):
        return len(self.clip_ids)

    @property
    def has_gold(self):
        return len(self) > 0 and bool(np.all(self.gold >= 0))

    def expert(self, model) -> PredictionSet:
        m = self.models.index(model)
        return PredictionSet(self.clip_ids, self.P[m], self.gold, self.splits)

    def take(self, idx):
        idx = np.asarray(idx, dtype=np.int64)
        return ExpertBundle(self.models, tuple(self.clip_ids[i] for i in idx), self.P[:, idx],
                            self.gold[idx], tuple(self.splits[i] for i in idx))

    def select(self, split):
        return self.take([i for i, s in enumerate(self.splits) if s == split])

    def subset(self, models):
        idx = [self.models.index(m) for m in models]
        return ExpertBundle(tuple(models), self.clip_ids, self.P[idx], self.gold, self.splits)

    def with_splits(self, split):
        return ExpertBundle(self.models, self.clip_ids, self.P, self.gold, (split,) * len(self))

    def with_gold(self, labels: dict):
        gold = np.array([labels.get(c, -1) for c in self.clip_ids], dtype=np.int64)
        return ExpertBundle(self.models, self.clip_ids, self.P, gold, self.splits)

    def objective(self, split):
        """The clips of ``split`` (all clips when ``split`` is None), which
        must carry gold labels."""
        b = self if split is None else self.select(split)
        if not len(b):
            raise ValueError(f"no clips in objective split {split!r}")
        if not b.has_gold:
            missing = b.clip_ids[int(np.flatnonzero(b.gold < 0)[0])]
            raise ValueError(f"objective split {split!r} lacks a gold label for clip {missing!r}")
        return b

    @classmethod
    def concat(cls, bundles):
        bundles = list(bundles)
        models = bundles[0].models
        if any(b.models != models for b in bundles):
            raise ValueError("bundles have different model lists")
        return cls(models, sum((b.clip_ids for b in bundles), ()),
                   np.concatenate([b.P for b in bundles], axis=1),
                   np.concatenate([b.gold for b in bundles]),
                   sum((b.splits for b in bundles), ()))
