"""Objective (true) game environment and the distribution it induces over outcomes.

A game couples a finite state space with a joint state/signal law, per-player
action and consequence sets, deterministic feedback maps from (state, action
profile) to each player's observed consequence, and per-player payoff tables
over (own action, own consequence).  Strategies are per-player maps from
signals to distributions over actions.  The central object is the conditional
outcome distribution Q_sigma(y | s, x): the probability player i observes
consequence y after seeing signal s and playing x, when everyone else follows
the profile sigma.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

__all__ = [
    "ObjectiveGame",
    "StrategyProfile",
    "OutcomeDistribution",
    "ValidationReport",
    "objective_distribution",
    "true_expected_payoff",
    "validate_game",
]

_LAW_TOL = 1e-12


@dataclass(frozen=True)
class ObjectiveGame:
    """Finite environment: states, signals, actions, feedback, payoffs.

    Attributes:
        players: Player identifiers, order fixes all per-player containers.
        states: State labels (payoff-irrelevant randomness lives here too).
        signals: Per-player signal labels.
        law: Joint distribution over (state, signal profile); axis 0 is the
            state, axis 1+k is player k's signal. Entries sum to 1.
        actions: Per-player action labels.
        consequences: Per-player consequence labels.
        feedback: Per-player integer array, shape (n_states, |X^1|, ..., |X^N|),
            mapping state and full action profile to the player's consequence
            index. Deterministic and total.
        payoff: Per-player array, shape (|X^i|, |Y^i|): material payoff from
            own action and own observed consequence.
        action_values: Optional numeric value per action label (e.g. a price);
            used by learning recursions and reports.
        consequence_values: Optional numeric value per consequence label.
    """

    players: tuple[str, ...]
    states: tuple[str, ...]
    signals: dict[str, tuple[str, ...]]
    law: np.ndarray
    actions: dict[str, tuple[str, ...]]
    consequences: dict[str, tuple[str, ...]]
    feedback: dict[str, np.ndarray]
    payoff: dict[str, np.ndarray]
    action_values: dict[str, np.ndarray] = field(default_factory=dict)
    consequence_values: dict[str, np.ndarray] = field(default_factory=dict)
    name: str = ""

    def player_index(self, player: str) -> int:
        try:
            return self.players.index(player)
        except ValueError:
            raise KeyError(f"unknown player {player!r}") from None

    def n_signals(self, player: str) -> int:
        return len(self.signals[player])

    def n_actions(self, player: str) -> int:
        return len(self.actions[player])

    def n_consequences(self, player: str) -> int:
        return len(self.consequences[player])

    def signal_marginal(self, player: str) -> np.ndarray:
        """Marginal distribution of player's signal."""
        i = self.player_index(player)
        axes = tuple(k for k in range(self.law.ndim) if k != i + 1)
        return self.law.sum(axis=axes)

    def signal_of_state(self, player: str) -> np.ndarray:
        """Deterministic signal index per state, when the law supports one.

        Raises:
            ValueError: if some state is consistent with several signals.
        """
        i = self.player_index(player)
        axes = tuple(k for k in range(1, self.law.ndim) if k != i + 1)
        joint = self.law.sum(axis=axes) if axes else self.law
        out = np.full(len(self.states), -1, dtype=int)
        for w in range(len(self.states)):
            nz = np.nonzero(joint[w] > 0.0)[0]
            if len(nz) != 1:
                raise ValueError(
                    f"signal of {player!r} is not a deterministic function of the "
                    f"state (state {self.states[w]!r} allows {len(nz)} signals)"
                )
            out[w] = nz[0]
        return out


@dataclass(frozen=True)
class StrategyProfile:
    """Per-player behavioral strategies: table[player][signal, action]."""

    table: dict[str, np.ndarray]

    @staticmethod
    def uniform(game: ObjectiveGame) -> "StrategyProfile":
        return StrategyProfile(
            {
                p: np.full((game.n_signals(p), game.n_actions(p)), 1.0 / game.n_actions(p))
                for p in game.players
            }
        )

    @staticmethod
    def pure(game: ObjectiveGame, choice: dict[str, int | dict[str, str]]) -> "StrategyProfile":
        """Pure profile; ``choice[p]`` is an action index (constant across
        signals) or a {signal label: action label} map."""
        table = {}
        for p in game.players:
            t = np.zeros((game.n_signals(p), game.n_actions(p)))
            c = choice[p]
            if isinstance(c, dict):
                for s_lab, x_lab in c.items():
                    t[game.signals[p].index(s_lab), game.actions[p].index(x_lab)] = 1.0
            else:
                t[:, int(c)] = 1.0
            table[p] = t
        return StrategyProfile(table)

    def with_player(self, player: str, sigma_i: np.ndarray) -> "StrategyProfile":
        new = dict(self.table)
        new[player] = np.asarray(sigma_i, dtype=float)
        return StrategyProfile(new)

    def distance(self, other: "StrategyProfile") -> float:
        """Sup-norm distance across all players, signals and actions."""
        return max(
            float(np.max(np.abs(self.table[p] - other.table[p]))) for p in self.table
        )

    def validate(self, game: ObjectiveGame, tol: float = 1e-9) -> None:
        for p in game.players:
            t = self.table[p]
            if t.shape != (game.n_signals(p), game.n_actions(p)):
                raise ValueError(f"strategy for {p!r} has shape {t.shape}")
            if np.any(t < -tol) or np.any(np.abs(t.sum(axis=1) - 1.0) > tol):
                raise ValueError(f"strategy for {p!r} is not a conditional distribution")


@dataclass(frozen=True)
class OutcomeDistribution:
    """Conditional outcome distribution for one player.

    ``table[s, x, y]`` is the probability of consequence y given own signal s
    and own action x, under the objective law and opponents' strategies.
    """

    player: str
    table: np.ndarray
    signal_marginal: np.ndarray

    def max_distance(self, other_table: np.ndarray, mask: np.ndarray | None = None) -> float:
        diff = np.abs(self.table - other_table)
        if mask is not None:
            diff = diff * mask[..., None]
        return float(np.max(diff))


def objective_distribution(
    game: ObjectiveGame, profile: StrategyProfile, player: str
) -> OutcomeDistribution:
    """Distribution over player's consequences given own signal and action.

    Marginalizes the joint state/signal law against the other players'
    strategies; own action is treated as a free conditioning variable.
    """
    i = game.player_index(player)
    others = [p for p in game.players if p != player]
    n_s = game.n_signals(player)
    n_x = game.n_actions(player)
    n_y = game.n_consequences(player)
    q = np.zeros((n_s, n_x, n_y))
    p_s = np.zeros(n_s)
    fb = game.feedback[player]
    law = game.law

    nz = np.argwhere(law > 0.0)
    opp_ranges = [range(game.n_actions(p)) for p in others]
    opp_idx = [game.player_index(p) for p in others]
    for entry in nz:
        w = entry[0]
        sig = entry[1:]
        weight = law[tuple(entry)]
        s_i = sig[i]
        p_s[s_i] += weight
        for opp_profile in np.ndindex(*[len(r) for r in opp_ranges]) if others else [()]:
            opp_w = 1.0
            for k, p_other in enumerate(others):
                opp_w *= profile.table[p_other][sig[opp_idx[k]], opp_profile[k]]
            if opp_w == 0.0:
                continue
            full = [0] * len(game.players)
            for k, j in enumerate(opp_idx):
                full[j] = opp_profile[k]
            for x_i in range(n_x):
                full[i] = x_i
                y = fb[(w, *full)]
                q[s_i, x_i, y] += weight * opp_w
    good = p_s > 0.0
    q[good] /= p_s[good, None, None]
    return OutcomeDistribution(player=player, table=q, signal_marginal=p_s)


def true_expected_payoff(
    game: ObjectiveGame, profile: StrategyProfile, player: str
) -> float:
    """Ex-ante expected material payoff under the objective law."""
    dist = objective_distribution(game, profile, player)
    sig = profile.table[player]
    per_sx = np.einsum("sxy,xy->sx", dist.table, game.payoff[player])
    return float(np.sum(dist.signal_marginal[:, None] * sig * per_sx))


@dataclass(frozen=True)
class ValidationReport:
    """Outcome of validate_game: empty problems means the game is well formed."""

    problems: tuple[str, ...]

    @property
    def ok(self) -> bool:
        return not self.problems


def validate_game(game: ObjectiveGame) -> ValidationReport:
    """Checks the structural invariants of a game document.

    Verifies: the law is a probability distribution with full-support
    marginals, feedback maps are total with in-range consequence indices,
    payoff tables are finite with matching shapes, and optional numeric
    annotations line up with their label sets.
    """
    problems: list[str] = []
    law = game.law
    expected_shape = (len(game.states), *[game.n_signals(p) for p in game.players])
    if law.shape != expected_shape:
        problems.append(f"law shape {law.shape} != {expected_shape}")
        return ValidationReport(tuple(problems))
    if np.any(law < 0):
        problems.append("law has negative entries")
    total = float(law.sum())
    if abs(total - 1.0) > _LAW_TOL:
        problems.append(f"law sums to {total!r}, not 1")
    state_marg = law.sum(axis=tuple(range(1, law.ndim)))
    if np.any(state_marg <= 0):
        lab = game.states[int(np.argmin(state_marg))]
        problems.append(f"state {lab!r} has zero probability")
    for p in game.players:
        marg = game.signal_marginal(p)
        if np.any(marg <= 0):
            lab = game.signals[p][int(np.argmin(marg))]
            problems.append(f"signal {lab!r} of player {p!r} has zero probability")
        fb = game.feedback[p]
        fb_shape = (len(game.states), *[game.n_actions(q) for q in game.players])
        if fb.shape != fb_shape:
            problems.append(f"feedback shape for {p!r}: {fb.shape} != {fb_shape}")
            continue
        if not np.issubdtype(fb.dtype, np.integer):
            problems.append(f"feedback for {p!r} is not integer-valued")
        if fb.min() < 0 or fb.max() >= game.n_consequences(p):
            problems.append(f"feedback for {p!r} has out-of-range consequence indices")
        pay = game.payoff[p]
        if pay.shape != (game.n_actions(p), game.n_consequences(p)):
            problems.append(f"payoff shape for {p!r}: {pay.shape}")
        elif not np.all(np.isfinite(pay)):
            problems.append(f"payoff for {p!r} has non-finite entries")
        if p in game.action_values and len(game.action_values[p]) != game.n_actions(p):
            problems.append(f"action_values length mismatch for {p!r}")
        if p in game.consequence_values and len(game.consequence_values[p]) != game.n_consequences(p):
            problems.append(f"consequence_values length mismatch for {p!r}")
    return ValidationReport(tuple(problems))


def restrict_actions(game: ObjectiveGame, player: str, keep: list[int]) -> ObjectiveGame:
    """Sub-game with player's action set restricted to ``keep`` (index order kept)."""
    i = game.player_index(player)
    keep_arr = np.asarray(keep, dtype=int)
    actions = dict(game.actions)
    actions[player] = tuple(game.actions[player][k] for k in keep_arr)
    feedback = {
        p: np.take(fb, keep_arr, axis=1 + i) for p, fb in game.feedback.items()
    }
    payoff = dict(game.payoff)
    payoff[player] = game.payoff[player][keep_arr]
    action_values = dict(game.action_values)
    if player in action_values:
        action_values[player] = action_values[player][keep_arr]
    return replace(
        game, actions=actions, feedback=feedback, payoff=payoff, action_values=action_values
    )
