"""Frozen experiment configurations.

Schedules from the worked examples grow like ``n^p`` with ``p`` in
{14, 32, 57}; these overflow the coefficient cap after a handful of steps,
so the presets clamp them at ``1e8`` and test monotone trends instead of
the asymptotic statements.
"""
from __future__ import annotations

import copy
from dataclasses import dataclass

from .runner import ExperimentConfig

CAP = 1e8
TAIL_SCHEDULE = {"kind": "polynomial", "p": 6, "L0": 1e3}


@dataclass(frozen=True)
class Preset:
    name: str
    config: dict
    provenance: str
    expected_runtime: str

    def build(self, **overrides) -> ExperimentConfig:
        d = copy.deepcopy(self.config)
        d.update({k: v for k, v in overrides.items() if v is not None})
        return ExperimentConfig.from_dict(d)


def _p(name, provenance, runtime, **cfg):
    return Preset(name, cfg, provenance, runtime)


PRESETS = {p.name: p for p in [
    _p("linear-oracle",
       "linear circle map x -> 10x: exact ten-piece crossing split, no excision, zero distortion",
       "1 s",
       experiment="crossing-split", family={"kind": "linear-test", "q": 10},
       schedule={"kind": "constant", "L": 10.0}, eta=0.75,
       params={"height": 0.3, "stages": [1]}),
    _p("hypotheses-trig",
       "standard family: grid estimates of the derivative, critical-count and root-margin constants",
       "1 s",
       experiment="hypotheses", params={"L_list": [100.0, 1e4]}),
    _p("lyapunov-trig",
       "cocycle growth: running exponent at n = 10 exceeds 0.9 log L for typical points at L = 1e4",
       "2 s",
       experiment="lyapunov", schedule={"kind": "constant", "L": 1e4},
       params={"N": 10, "samples": 10_000}),
    _p("distortion-scaling",
       "tangent distortion along fully crossing pieces scales like L^(1 - 2 eta)",
       "10 s",
       experiment="crossing-split", eta=0.75, params={"L_list": [1e3, 1e4, 1e5], "height": 0.3}),
    _p("curve-equidistribution",
       "pushed curve integrals of cos 2pi(x+y) over four stages against the length times the mean",
       "40 s",
       experiment="curve-equidistribution", observables=["cos2pi(x+y)"],
       params={"L_list": [1e3, 1e5], "m": 1, "n": 4, "nodes": 4_000_000, "heights": [0.3]}),
    _p("stopping-times-schedule",
       "tails of the first-good-time and its widened variant for L_n = max(1e3, n^6), eta = 0.7",
       "10 s",
       experiment="stopping-times", schedule=TAIL_SCHEDULE, eta=0.7,
       params={"samples": 100_000, "N_max": 100, "sigma_horizon": 90}),
    _p("sigma-tail-square",
       "curve growth time for points of the square of side 0.1: tail against sum of "
       "L_i^((eta-1)/2) from n/4, with post-growth persistence",
       "10 s",
       experiment="sigma-tail", schedule=TAIL_SCHEDULE, eta=0.7,
       params={"samples": 100_000, "N_max": 100, "sigma_horizon": 90, "side": 0.1,
               "corner": [0.3, 0.3]}),
    _p("proliferation-square",
       "fraction of a square of side 0.1 carried by long curves off the critical strips grows in n",
       "10 s",
       experiment="proliferation", schedule=TAIL_SCHEDULE, eta=0.7,
       params={"samples": 20_000, "n_list": [20, 40], "side": 0.1, "corner": [0.3, 0.3]}),
    _p("singular-limit",
       "one-stage correlations against the Markov-chain limit: pass-through identity and the "
       "L^(-min(2 eta - 1, alpha(1-eta)/(2+alpha))) envelope",
       "15 s",
       experiment="singular-limit", eta=0.75, params={"L_list": [1e3, 1e4, 1e5], "budget": 4_000_000}),
    _p("thmD-finite-mixing",
       "fixed-coefficient finite-time mixing: |corr(n, L)| against n L^(-1/7) for alpha = 1",
       "3 min",
       experiment="finite-time-doc", observables=["cos2piy", "cos2piy"], alpha=1.0,
       params={"L_list": [1e3, 1e4, 1e5], "n_list": [2, 3, 4, 5, 6], "budget": 10_000_000}),
    _p("birkhoff-constant-L",
       "strong law at constant L = 1e6: mean square of N^-1 S_N against sigma^2 / N",
       "15 s",
       experiment="birkhoff", schedule={"kind": "constant", "L": 1e6}, observables=["cos2pix"],
       ensemble={"samples": 10_000}, params={"N_list": [100, 1000, 10000]}),
    _p("birkhoff-capped-p14",
       "strong law in mean square, growth exponent 14 (the L^2 example), capped at 1e8: "
       "monotone decay over N = 100, 1000, 10000",
       "15 s",
       experiment="birkhoff", schedule={"kind": "polynomial", "p": 14, "L0": 1e3, "cap": CAP},
       observables=["cos2pix"], ensemble={"samples": 10_000}, params={"N_list": [100, 1000, 10000]}),
    _p("birkhoff-capped-p32",
       "almost-everywhere strong law example, growth exponent 32, capped at 1e8: monotone decay",
       "15 s",
       experiment="birkhoff", schedule={"kind": "polynomial", "p": 32, "L0": 1e3, "cap": CAP},
       observables=["cos2pix"], ensemble={"samples": 10_000}, params={"N_list": [100, 1000, 10000]}),
    _p("clt-constant-L",
       "Gaussian limit of S_N / sqrt(N) for cos 2pi x at L = 1e6, N = 2000: variance 1/2 and KS",
       "20 s",
       experiment="clt", schedule={"kind": "constant", "L": 1e6}, observables=["cos2pix"],
       ensemble={"samples": 100_000, "time": 2000}),
    _p("clt-capped-p57",
       "Gaussian limit example with growth exponent above 56, capped at 1e8",
       "20 s",
       experiment="clt", schedule={"kind": "polynomial", "p": 57, "L0": 1e3, "cap": CAP},
       observables=["cos2pix"], ensemble={"samples": 100_000, "time": 2000}),
    _p("coboundary-degenerate",
       "zero asymptotic variance exactly for the coboundary cos 2pi x - cos 2pi y: "
       "Birkhoff sums telescope",
       "20 s",
       experiment="clt", schedule={"kind": "constant", "L": 1e6}, observables=["cos2pix-cos2piy"],
       ensemble={"samples": 100_000, "time": 2000}, params={"coboundary": True}),
    _p("square-mixing",
       "mixing of the uniform measure on a square of side 0.1 for L_n = max(1e3, n^6), eta = 0.7",
       "20 s",
       experiment="square-mixing", schedule=TAIL_SCHEDULE, eta=0.7, observables=["cos2pi(x+y)"],
       params={"n_list": [8, 16, 32], "side": 0.1, "corner": [0.3, 0.3], "samples": 10_000_000}),
    _p("square-mixing-capped-p18",
       "summable correlation example, growth exponent above 17, capped at 1e8",
       "20 s",
       experiment="square-mixing", schedule={"kind": "polynomial", "p": 18, "L0": 1e3, "cap": CAP},
       eta=0.7, observables=["cos2pi(x+y)"],
       params={"n_list": [8, 16, 32], "side": 0.1, "corner": [0.3, 0.3], "samples": 1_000_000}),
]}


def get_preset(name: str) -> Preset:
    try:
        return PRESETS[name]
    except KeyError:
        raise KeyError(f"unknown preset {name!r}; known: {', '.join(sorted(PRESETS))}") from None


def list_presets() -> str:
    w = max(len(n) for n in PRESETS)
    lines = [f"{'name':<{w}}  {'runtime':>8}  provenance"]
    for p in PRESETS.values():
        lines.append(f"{p.name:<{w}}  {p.expected_runtime:>8}  {p.provenance}")
    return "\n".join(lines)
