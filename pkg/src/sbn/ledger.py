"""Service-transaction ledger: validation, hash-linked shard chains, Global Chain.

Hashes and mock signatures are FNV-1a 64 over a fixed-width big-endian
serialization, so every implementation hashing the same fields in the same
order gets the same bits.
"""
from __future__ import annotations

import enum
import struct
from dataclasses import dataclass, field

FNV_OFFSET = 0xCBF29CE484222325
FNV_PRIME = 0x100000001B3
MASK64 = (1 << 64) - 1

GLOBAL_CHAIN = -1

_TX_FIELDS = struct.Struct(">QBIIQqBI")  # everything the signature covers
_TX_SIG = struct.Struct(">Q")
_BLOCK_HEAD = struct.Struct(">iQQ")
_ANCHOR = struct.Struct(">iQ")
_FRAME = struct.Struct(">iQQII")


def fnv1a64(data: bytes) -> int:
    h = FNV_OFFSET
    for byte in data:
        h ^= byte
        h = (h * FNV_PRIME) & MASK64
    return h


class ServiceKind(enum.IntEnum):
    RELAY = 0
    TRANSFER = 1
    COMPUTE = 2
    CHARGE = 3


class Symbiosis(enum.IntEnum):
    OBLIGATE = 0
    FACULTATIVE = 1


class Verdict(enum.Enum):
    VALID = "valid"
    INSUFFICIENT_BALANCE = "insufficient_balance"
    BAD_AMOUNT = "bad_amount"
    BAD_TIMING = "bad_timing"
    BAD_SIGNATURE = "bad_signature"


class LedgerError(Exception):
    pass


class StaleParent(LedgerError):
    pass


class LinkBroken(LedgerError):
    pass


class RevalidationFailed(LedgerError):
    pass


class UnknownShardTip(LedgerError):
    pass


def _timestamp_us(ts: float) -> int:
    return int(round(ts * 1e6))


@dataclass(frozen=True)
class ServiceTransaction:
    tx_id: int
    kind: ServiceKind
    demander: int
    provider: int
    amount: int
    timestamp: float
    symbiosis: Symbiosis
    shard_hint: int
    signature: int = 0

    def __post_init__(self):
        if self.demander == self.provider:
            raise ValueError("demander and provider must differ")
        if self.amount <= 0:
            raise ValueError("amount must be positive")

    def signed_fields(self) -> bytes:
        return _TX_FIELDS.pack(
            self.tx_id,
            int(self.kind),
            self.demander,
            self.provider,
            self.amount,
            _timestamp_us(self.timestamp),
            int(self.symbiosis),
            self.shard_hint,
        )

    def to_bytes(self) -> bytes:
        return self.signed_fields() + _TX_SIG.pack(self.signature)

    @classmethod
    def from_bytes(cls, raw: bytes) -> "ServiceTransaction":
        tx_id, kind, dem, prov, amount, ts_us, sym, shard = _TX_FIELDS.unpack(raw[: _TX_FIELDS.size])
        (sig,) = _TX_SIG.unpack(raw[_TX_FIELDS.size :])
        return cls(tx_id, ServiceKind(kind), dem, prov, amount, ts_us / 1e6, Symbiosis(sym), shard, sig)


TX_SIZE = _TX_FIELDS.size + _TX_SIG.size


def node_secret(node_id: int, salt: int = 0) -> int:
    return fnv1a64(b"sbn-node-secret" + struct.pack(">QQ", node_id, salt & MASK64))


def mock_sign(tx: ServiceTransaction, secret: int) -> int:
    return fnv1a64(tx.signed_fields() + struct.pack(">Q", secret & MASK64))


def sign(tx: ServiceTransaction, secret: int) -> ServiceTransaction:
    return ServiceTransaction(
        tx.tx_id, tx.kind, tx.demander, tx.provider, tx.amount,
        tx.timestamp, tx.symbiosis, tx.shard_hint, mock_sign(tx, secret),
    )


@dataclass(frozen=True)
class Block:
    chain_id: int
    height: int
    prev_hash: int
    txs: tuple[ServiceTransaction, ...]
    block_hash: int
    anchors: tuple[tuple[int, int], ...] = ()

    @staticmethod
    def content_bytes(chain_id, height, prev_hash, txs, anchors=()) -> bytes:
        parts = [_BLOCK_HEAD.pack(chain_id, height, prev_hash)]
        parts.extend(tx.to_bytes() for tx in txs)
        parts.extend(_ANCHOR.pack(s, h) for s, h in anchors)
        return b"".join(parts)

    def compute_hash(self) -> int:
        return fnv1a64(self.content_bytes(self.chain_id, self.height, self.prev_hash, self.txs, self.anchors))

    def to_bytes(self) -> bytes:
        """Framed wire form (header with counts, txs, anchors, stored hash)."""
        head = _FRAME.pack(self.chain_id, self.height, self.prev_hash, len(self.txs), len(self.anchors))
        body = b"".join(tx.to_bytes() for tx in self.txs)
        anchors = b"".join(_ANCHOR.pack(s, h) for s, h in self.anchors)
        return head + body + anchors + struct.pack(">Q", self.block_hash)

    @classmethod
    def from_bytes(cls, raw: bytes) -> "Block":
        chain_id, height, prev, ntx, nanc = _FRAME.unpack_from(raw, 0)
        off = _FRAME.size
        expected = off + ntx * TX_SIZE + nanc * _ANCHOR.size + 8
        if len(raw) != expected:
            raise ValueError("malformed block bytes")
        txs = []
        for _ in range(ntx):
            txs.append(ServiceTransaction.from_bytes(raw[off : off + TX_SIZE]))
            off += TX_SIZE
        anchors = []
        for _ in range(nanc):
            anchors.append(_ANCHOR.unpack_from(raw, off))
            off += _ANCHOR.size
        (h,) = struct.unpack_from(">Q", raw, off)
        return cls(chain_id, height, prev, tuple(txs), h, tuple(anchors))


def make_block(chain_id: int, height: int, prev_hash: int, txs, anchors=()) -> Block:
    txs = tuple(sorted(txs, key=lambda t: t.tx_id))
    anchors = tuple(sorted(anchors))
    h = fnv1a64(Block.content_bytes(chain_id, height, prev_hash, txs, anchors))
    return Block(chain_id, height, prev_hash, txs, h, anchors)


@dataclass
class LedgerState:
    balances: dict[int, int] = field(default_factory=dict)
    chains: dict[int, list[Block]] = field(default_factory=dict)
    clock_skew_window: float = 0.2
    max_amount: int = 50
    secrets: dict[int, int] = field(default_factory=dict)

    def tip(self, chain_id: int) -> tuple[int, int]:
        """(next height, prev hash) for a chain; genesis links to 0."""
        chain = self.chains.get(chain_id, [])
        if not chain:
            return 0, 0
        return chain[-1].height + 1, chain[-1].block_hash

    def secret_of(self, node_id: int) -> int:
        if node_id not in self.secrets:
            self.secrets[node_id] = node_secret(node_id)
        return self.secrets[node_id]

    def total_credits(self) -> int:
        return sum(self.balances.values())


def signature_ok(tx: ServiceTransaction, state: LedgerState) -> bool:
    return tx.signature == mock_sign(tx, state.secret_of(tx.demander))


def validate_transaction(tx: ServiceTransaction, state: LedgerState, now: float, balances=None) -> Verdict:
    """Check balance, amount, timing and signature, in that order.

    ``balances`` lets a caller validate against a running (uncommitted) view.
    """
    bal = state.balances if balances is None else balances
    if bal.get(tx.demander, 0) < tx.amount:
        return Verdict.INSUFFICIENT_BALANCE
    if not 0 < tx.amount <= state.max_amount:
        return Verdict.BAD_AMOUNT
    if abs(tx.timestamp - now) > state.clock_skew_window + 1e-12:
        return Verdict.BAD_TIMING
    if not signature_ok(tx, state):
        return Verdict.BAD_SIGNATURE
    return Verdict.VALID


def select_valid(txs, state: LedgerState, now: float) -> list[ServiceTransaction]:
    """Greedy in tx_id order: keep each tx that is valid given the ones kept before it."""
    running = dict(state.balances)
    kept = []
    for tx in sorted(txs, key=lambda t: t.tx_id):
        if validate_transaction(tx, state, now, running) is Verdict.VALID:
            running[tx.demander] -= tx.amount
            running[tx.provider] = running.get(tx.provider, 0) + tx.amount
            kept.append(tx)
    return kept


def block_is_valid(block: Block, state: LedgerState, now: float) -> bool:
    """What an honest replica checks before accepting a proposal."""
    running = dict(state.balances)
    for tx in block.txs:
        if validate_transaction(tx, state, now, running) is not Verdict.VALID:
            return False
        running[tx.demander] -= tx.amount
        running[tx.provider] = running.get(tx.provider, 0) + tx.amount
    return True


def build_block(chain_id: int, txs, state: LedgerState, height: int | None = None,
                prev_hash: int | None = None, anchors=()) -> Block:
    next_h, tip_hash = state.tip(chain_id)
    if height is not None and height != next_h:
        raise StaleParent(f"height {height} != expected {next_h}")
    if prev_hash is not None and prev_hash != tip_hash:
        raise StaleParent("prev_hash does not match chain tip")
    return make_block(chain_id, next_h, tip_hash, txs, anchors)


def append_block(block: Block, state: LedgerState) -> LedgerState:
    """Extend ``block.chain_id`` and settle its transactions; all-or-nothing."""
    next_h, tip_hash = state.tip(block.chain_id)
    if block.height != next_h or block.prev_hash != tip_hash:
        raise LinkBroken(f"block does not extend chain {block.chain_id} at height {next_h}")
    if block.compute_hash() != block.block_hash:
        raise LinkBroken("block hash does not match its contents")

    running = dict(state.balances)
    for tx in block.txs:
        if not 0 < tx.amount <= state.max_amount:
            raise RevalidationFailed(f"tx {tx.tx_id}: bad amount")
        if not signature_ok(tx, state):
            raise RevalidationFailed(f"tx {tx.tx_id}: bad signature")
        if running.get(tx.demander, 0) < tx.amount:
            raise RevalidationFailed(f"tx {tx.tx_id}: insufficient balance")
        running[tx.demander] -= tx.amount
        running[tx.provider] = running.get(tx.provider, 0) + tx.amount

    state.balances = running
    state.chains.setdefault(block.chain_id, []).append(block)
    return state


def verify_chain(blocks) -> int | None:
    """Index of the first block whose hash or link is wrong, else None."""
    prev = 0
    for i, b in enumerate(blocks):
        if b.height != i or b.prev_hash != prev or b.compute_hash() != b.block_hash:
            return i
        prev = b.block_hash
    return None


def build_anchor_block(shard_tips: dict[int, int], cross_shard_txs, state: LedgerState,
                       assignments: dict[int, int] | None = None) -> Block:
    """Global Chain proposal holding shard tip hashes and cross-shard transactions."""
    for shard, h in shard_tips.items():
        chain = state.chains.get(shard)
        if not chain or chain[-1].block_hash != h:
            raise UnknownShardTip(f"shard {shard}: hash {h:#018x} is not the chain tip")
    if assignments is not None:
        for tx in cross_shard_txs:
            if assignments[tx.demander] == assignments[tx.provider]:
                raise ValueError(f"tx {tx.tx_id} is not cross-shard")
    return build_block(GLOBAL_CHAIN, cross_shard_txs, state, anchors=tuple(shard_tips.items()))


def anchor_to_global_chain(shard_tips: dict[int, int], cross_shard_txs, state: LedgerState,
                           assignments: dict[int, int] | None = None) -> Block:
    """Build the anchor block and append it, settling the cross-shard payments."""
    block = build_anchor_block(shard_tips, cross_shard_txs, state, assignments)
    append_block(block, state)
    return block
