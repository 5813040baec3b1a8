"""Idealized anonymity system: a batch, bidirectional, secret permutation.

One round collects every user's messages, delivers them in uniformly
permuted order under fresh slot ids, and routes each reply back to the
originating user via the hidden inverse permutation. The delivered view
carries no user identities; only the batch size is observable metadata.
"""

from __future__ import annotations

from typing import Any, Sequence

from .core import ParameterError, RngStream


class RoutingError(RuntimeError):
    """A reply references a slot the batch never delivered."""


class AnonBatch:
    """Messages for one mixing round.

    A batch is assembled by a single writer, mixed once, and then queried for
    reply routing; payloads are treated as opaque (a bundled mechanism submits
    its whole per-server bundle as one element).
    """

    def __init__(self):
        self._inbound: list[tuple[int, Any]] = []
        self._slot_to_user: dict[int, int] | None = None

    def __len__(self) -> int:
        return len(self._inbound)

    def submit(self, user_id: int, payload: Any) -> None:
        if self._slot_to_user is not None:
            raise ParameterError("batch already mixed")
        self._inbound.append((user_id, payload))

    def mix_and_deliver(self, rng: RngStream) -> list[tuple[int, Any]]:
        """Deliver payloads under a fresh uniform permutation.

        Returns (exit_slot_id, payload) pairs; slot ids are positions in the
        delivery order and carry no information about senders.
        """
        if not self._inbound:
            raise ParameterError("cannot mix an empty batch")
        if self._slot_to_user is not None:
            raise ParameterError("batch already mixed")
        perm = rng.permutation(len(self._inbound))
        deliveries = []
        slot_to_user = {}
        for slot, src in enumerate(perm):
            user_id, payload = self._inbound[src]
            slot_to_user[slot] = user_id
            deliveries.append((slot, payload))
        self._slot_to_user = slot_to_user
        return deliveries

    def route_replies(self, replies: Sequence[tuple[int, Any]]) -> list[tuple[int, Any]]:
        """Route one reply per delivered slot back to its originating user."""
        if self._slot_to_user is None:
            raise RoutingError("batch has not been mixed yet")
        if len(replies) != len(self._inbound):
            raise RoutingError(
                f"expected {len(self._inbound)} replies, got {len(replies)}"
            )
        routed = []
        for slot, payload in replies:
            if slot not in self._slot_to_user:
                raise RoutingError(f"unknown delivery slot {slot}")
            routed.append((self._slot_to_user[slot], payload))
        return routed
