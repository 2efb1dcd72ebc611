"""High-level pipeline wiring: bundles in, layouts and reports out.

These functions are what the CLI subcommands call; tests and benchmarks use
them directly to run the pipeline in memory.
"""

from dataclasses import dataclass

from .config import RunConfig
from .heads import select_cross_head, select_self_head
from .io import AttentionBundle
from .layout import Layout, build_focus_mask, construct_layout, segment_regions
from .prompt import CountSpec


@dataclass
class CategoryResult:
    name: str
    target: int
    token_index: int
    counts: list          # estimated instances per frame
    cross_heads: list     # selected cross head per frame

    @property
    def mismatch(self) -> bool:
        return any(c != self.target for c in self.counts)


@dataclass
class IdentifyResult:
    layout: Layout
    categories: list
    self_heads: list      # selected self head per frame

    @property
    def aligned(self) -> bool:
        return not any(c.mismatch for c in self.categories)

    def report_obj(self) -> dict:
        return {
            "aligned": self.aligned,
            "self_heads": self.self_heads,
            "categories": [
                {
                    "name": c.name,
                    "target": c.target,
                    "token_index": c.token_index,
                    "counts": c.counts,
                    "deficits": [c.target - m for m in c.counts],
                    "mismatch": c.mismatch,
                    "cross_heads": c.cross_heads,
                }
                for c in self.categories
            ],
        }


def identify(self_bundle: AttentionBundle, cross_bundle: AttentionBundle,
             spec: CountSpec, config: RunConfig = None) -> IdentifyResult:
    """Phase one: derive the countable layout and compare counts to targets.

    Per frame: pick the most instance-separable self head, segment its
    grayscale map into regions, then per category pick the most concentrated
    cross head, build its focus mask, and retain regions overlapping it.
    """
    cfg = (config or RunConfig()).validate()
    gh, gw = self_bundle.grid_h, self_bundle.grid_w
    if (cross_bundle.grid_h, cross_bundle.grid_w) != (gh, gw):
        raise ValueError("self and cross bundles disagree on grid dims")
    if cross_bundle.frames != self_bundle.frames:
        raise ValueError("self and cross bundles disagree on frame count")
    layout = Layout.empty(self_bundle.frames, gh, gw)
    for entry in spec.entries:
        layout.register(entry.noun)
    results = {
        entry.noun: CategoryResult(name=entry.noun, target=entry.count,
                                   token_index=entry.token_index, counts=[],
                                   cross_heads=[])
        for entry in spec.entries
    }
    self_heads = []
    for f in range(self_bundle.frames):
        h_s, a_s = select_self_head(self_bundle, f, gamma=cfg.gamma, block=cfg.block)
        self_heads.append(h_s)
        regions = segment_regions(a_s, bandwidth=cfg.bandwidth)
        for entry in spec.entries:
            h_c, a_ct, _peak = select_cross_head(cross_bundle, f, entry.token_index)
            mask = build_focus_mask(a_ct, peak_ratio=cfg.peak_ratio,
                                    eps=cfg.eps, min_pts=cfg.min_pts)
            label = layout.label_of(entry.noun)
            layout = construct_layout(regions, mask, cfg.tau, label, layout, f)
            res = results[entry.noun]
            res.counts.append(layout.count(label, f))
            res.cross_heads.append(h_c)
    return IdentifyResult(layout=layout,
                          categories=[results[e.noun] for e in spec.entries],
                          self_heads=self_heads)
