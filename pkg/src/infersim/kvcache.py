"""Paged KV-cache block pool, one per DP replica."""

from __future__ import annotations

from dataclasses import dataclass, field


def blocks_for(tokens: int, block_size: int) -> int:
    return -(-tokens // block_size)


@dataclass
class SeqAllocation:
    request_id: int
    tokens_held: int
    blocks_held: int


@dataclass
class BlockPool:
    """Block accounting for one replica.

    Blocks are interchangeable, so any request fits as long as enough blocks
    are free; there is no contiguity requirement.
    """

    block_size: int
    total_blocks: int
    free_blocks: int = -1
    allocations: dict[int, SeqAllocation] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.block_size < 1:
            raise ValueError("block_size must be >= 1")
        if self.total_blocks < 0:
            raise ValueError("total_blocks must be >= 0")
        if self.free_blocks < 0:
            self.free_blocks = self.total_blocks

    @property
    def used_blocks(self) -> int:
        return self.total_blocks - self.free_blocks

    def can_fit(self, request_id: int, new_total_tokens: int) -> bool:
        held = self.allocations.get(request_id)
        have = held.blocks_held if held is not None else 0
        return blocks_for(new_total_tokens, self.block_size) - have <= self.free_blocks

    def try_allocate(self, request_id: int, tokens: int) -> bool:
        if request_id in self.allocations:
            raise ValueError(f"request {request_id} already holds an allocation")
        need = blocks_for(tokens, self.block_size)
        if need > self.free_blocks:
            return False
        self.free_blocks -= need
        self.allocations[request_id] = SeqAllocation(request_id, tokens, need)
        return True

    def extend(self, request_id: int, new_total_tokens: int) -> bool:
        alloc = self._get(request_id)
        if new_total_tokens < alloc.tokens_held:
            raise ValueError(
                f"request {request_id}: cannot shrink from {alloc.tokens_held} to {new_total_tokens} tokens"
            )
        extra = blocks_for(new_total_tokens, self.block_size) - alloc.blocks_held
        if extra > self.free_blocks:
            return False
        self.free_blocks -= extra
        alloc.blocks_held += extra
        alloc.tokens_held = new_total_tokens
        return True

    def free(self, request_id: int) -> int:
        alloc = self._get(request_id)
        del self.allocations[request_id]
        self.free_blocks += alloc.blocks_held
        return alloc.blocks_held

    def tokens_held(self, request_id: int) -> int:
        alloc = self.allocations.get(request_id)
        return alloc.tokens_held if alloc is not None else 0

    def utilization(self) -> float:
        if self.total_blocks == 0:
            return 0.0
        return (self.total_blocks - self.free_blocks) / self.total_blocks

    def check(self) -> None:
        """Assert conservation and per-allocation block coverage."""
        held = 0
        for alloc in self.allocations.values():
            assert alloc.blocks_held == blocks_for(alloc.tokens_held, self.block_size), alloc
            held += alloc.blocks_held
        assert self.free_blocks + held == self.total_blocks, (self.free_blocks, held, self.total_blocks)

    def _get(self, request_id: int) -> SeqAllocation:
        try:
            return self.allocations[request_id]
        except KeyError:
            raise KeyError(f"request {request_id} holds no allocation") from None


def new_pool(headroom: float, kv_bytes_per_token: float, block_size: int) -> BlockPool:
    """Pool holding as many whole blocks as ``headroom`` bytes allow."""
    if kv_bytes_per_token <= 0 or block_size < 1:
        raise ValueError("kv_bytes_per_token and block_size must be positive")
    total = int(max(0.0, headroom) // (kv_bytes_per_token * block_size))
    return BlockPool(block_size=block_size, total_blocks=total)


def pool_from_tokens(pool_tokens: int, block_size: int) -> BlockPool:
    return BlockPool(block_size=block_size, total_blocks=pool_tokens // block_size)
