"""rulemem: deterministic key-indexed rule memory with test-time adaptation.

Subsystems: canonical condition keys (`keys`), the learned-rule store with
threshold invalidation (`rules`), failure-constraint memory (`constraints`),
hybrid and dual-mode retrieval (`retrieval`), atomic constraint stacking
(`stacking`), static-vs-dynamic conflict resolution (`conflict`), the
dual-frequency outer loop (`outer_loop`), hidden-CSP benchmark environments
(`envs`), the agent execution loop with simulated reasoners (`agent`),
closed-form bounds with Monte Carlo validators (`theory`), seed statistics
(`stats`), and experiment drivers (`harness`, `cli`).
"""

from .keys import ConditionKey, canonicalize, decompose, tier_of

__all__ = ["ConditionKey", "canonicalize", "decompose", "tier_of"]
__version__ = "0.1.0"
