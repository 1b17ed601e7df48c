"""Identifier-space arithmetic shared by the ring and XOR overlays.

All identifiers are unsigned integers below 2**bits.  The ring metric is
directional (clockwise); the XOR metric is a true metric.  A Ring holds
the sorted ids of live nodes and answers ownership queries, which keeps
routing tables implicitly consistent under churn.
"""

from bisect import bisect_left, bisect_right, insort

DEFAULT_BITS = 32


def ring_distance(a, b, bits=DEFAULT_BITS):
    """Clockwise distance from a to b: (b - a) mod 2**bits."""
    return (b - a) % (1 << bits)


def xor_distance(a, b):
    """XOR of the two ids taken as an integer."""
    return a ^ b


def shared_prefix_bits(a, b, bits=DEFAULT_BITS):
    """Length of the common most-significant-bit prefix of a and b."""
    x = a ^ b
    if x == 0:
        return bits
    return bits - x.bit_length()


def clockwise_closest(target, candidates, bits=DEFAULT_BITS):
    """The candidate reached first when walking clockwise from target."""
    if not candidates:
        raise ValueError("empty candidate set")
    return min(candidates, key=lambda c: ring_distance(target, c, bits))


def sample_ids(n, rng, bits=DEFAULT_BITS):
    """n distinct ids drawn uniformly from the space, sorted ascending."""
    space = 1 << bits
    if n > space:
        raise ValueError("space too small")
    seen = set()
    while len(seen) < n:
        seen.add(rng.randrange(space))
    return sorted(seen)


class Ring:
    """Sorted set of live node ids with Chord-style ownership queries."""

    def __init__(self, ids, bits=DEFAULT_BITS):
        self.bits = bits
        self.space = 1 << bits
        self.ids = sorted(ids)

    def __len__(self):
        return len(self.ids)

    def __contains__(self, nid):
        i = bisect_left(self.ids, nid)
        return i < len(self.ids) and self.ids[i] == nid

    def add(self, nid):
        insort(self.ids, nid)

    def remove(self, nid):
        i = bisect_left(self.ids, nid)
        if i >= len(self.ids) or self.ids[i] != nid:
            raise KeyError(nid)
        del self.ids[i]

    def owner(self, key):
        """First node at or after key, wrapping past zero."""
        if not self.ids:
            raise ValueError("empty ring")
        i = bisect_left(self.ids, key % self.space)
        return self.ids[i % len(self.ids)]

    def predecessor(self, key):
        """Last node strictly before key, wrapping."""
        if not self.ids:
            raise ValueError("empty ring")
        i = bisect_left(self.ids, key % self.space)
        return self.ids[i - 1]

    def successors(self, nid, count):
        """The count nodes clockwise after nid, excluding nid itself."""
        m = len(self.ids)
        out = []
        i = bisect_right(self.ids, nid % self.space)
        k = 0
        while len(out) < count and k < m:
            cand = self.ids[(i + k) % m]
            k += 1
            if cand != nid:
                out.append(cand)
        return out

    def finger(self, nid, i):
        """Owner of nid + 2**i, the canonical finger at offset i."""
        return self.owner((nid + (1 << i)) % self.space)


def xor_closest(ids, key, count=1, bits=DEFAULT_BITS):
    """The count ids nearest key by XOR distance; ids must be sorted.

    Walks the implicit binary trie of the sorted array, descending into
    the half matching key's bit first, so ids come out in exact XOR
    order without scoring the whole array.
    """
    out = []
    _xor_walk(ids, 0, len(ids), bits - 1, key, 0, count, out)
    return out


def _xor_walk(ids, lo, hi, bit, key, prefix, count, out):
    if lo >= hi or len(out) >= count:
        return
    if bit < 0:
        out.extend(ids[lo:hi][: count - len(out)])
        return
    split = prefix | (1 << bit)
    mid = bisect_left(ids, split, lo, hi)
    if key & (1 << bit):
        _xor_walk(ids, mid, hi, bit - 1, key, split, count, out)
        _xor_walk(ids, lo, mid, bit - 1, key, prefix, count, out)
    else:
        _xor_walk(ids, lo, mid, bit - 1, key, prefix, count, out)
        _xor_walk(ids, mid, hi, bit - 1, key, split, count, out)
