"""Ring overlay with redundant finger-offset subsearches.

A lookup for a target key runs one subsearch per high finger offset i:
it routes to the predecessor w of target - 2**i, asks w and w's
successor z for their offset-i fingers, and keeps whichever answer sits
closest clockwise to the target.  The redundant answers are then
consolidated the same way, so one honest subsearch that found the true
owner beats any number of colluder answers, which necessarily sit
further clockwise.

Routing tables are derived from the live ring on demand, which keeps
fingers and successor lists exact under churn.
"""

import random
from bisect import bisect_left, insort

from .idspace import Ring, clockwise_closest, ring_distance, sample_ids
from .reputation import ReputationStore

DEFAULT_BITS = 32
REDUNDANCY = 10
BUCKET_SIZE = 2
SUCCESSOR_COUNT = 8
# initial score pinned on fresh joiners, low enough that leaving and
# rejoining never beats an established track record
JOIN_SCORE = 0.3

MODES = ("regular", "aboost", "collaborative", "shared")
REPUTED_MODES = ("aboost", "collaborative", "shared")

START_COLLUDER = "start_colluder"
BAD_NODE_IN_PATH = "bad_node_in_path"
KNUCKLE_COLLUDER = "knuckle_colluder"
KNUCKLE_NONEXISTENT = "knuckle_nonexistent"
WRONG_SUCCESSOR = "wrong_successor"

FAILURE_REASONS = (
    START_COLLUDER,
    BAD_NODE_IN_PATH,
    KNUCKLE_COLLUDER,
    KNUCKLE_NONEXISTENT,
    WRONG_SUCCESSOR,
)


class Subsearch:
    """Outcome of one finger-offset probe of a redundant lookup."""

    __slots__ = ("offset", "path", "neighbor", "candidate", "contacts",
                 "hijack", "knuckle_exists", "agreed")

    def __init__(self, offset, path, neighbor, candidate, contacts,
                 hijack, knuckle_exists):
        self.offset = offset
        self.path = path              # contacted nodes in routing order
        self.neighbor = neighbor      # z, the node owning target - 2**offset
        self.candidate = candidate
        self.contacts = contacts
        self.hijack = hijack          # None | "start" | "path" | "knuckle"
        self.knuckle_exists = knuckle_exists
        self.agreed = None            # set after consolidation


class LookupOutcome:
    """Consolidated result of one redundant lookup."""

    __slots__ = ("origin", "target", "owner", "answer", "attacked",
                 "mode", "subsearches")

    def __init__(self, origin, target, owner, answer, attacked, mode,
                 subsearches):
        self.origin = origin
        self.target = target
        self.owner = owner
        self.answer = answer
        self.attacked = attacked
        self.mode = mode
        self.subsearches = subsearches

    @property
    def correct(self):
        return self.answer == self.owner

    @property
    def contacts(self):
        return sum(s.contacts for s in self.subsearches)


class HaloNetwork:
    """Live ring state: node ids, colluder set, per-node reputation."""

    def __init__(self, n, colluding=0.0, seed=0, bits=DEFAULT_BITS,
                 bucket_size=BUCKET_SIZE, successor_count=SUCCESSOR_COUNT,
                 redundancy=REDUNDANCY, join_score=JOIN_SCORE,
                 route_window=None):
        if n < successor_count + 2:
            raise ValueError("need more nodes than the successor list")
        if not 0.0 <= colluding < 1.0:
            raise ValueError("colluding fraction outside [0, 1)")
        self.bits = bits
        self.space = 1 << bits
        self.bucket_size = bucket_size
        self.successor_count = successor_count
        # how much of the successor list routing may short-circuit over
        self.route_window = successor_count if route_window is None \
            else route_window
        self.redundancy = redundancy
        self.join_score = join_score
        self.rng = random.Random(seed)
        ids = sample_ids(n, self.rng, bits)
        self.ring = Ring(ids, bits)
        bad = self.rng.sample(ids, int(colluding * n))
        self.malicious = set(bad)
        self.colluders = sorted(bad)
        self.stores = {
            v: ReputationStore(join_score=join_score,
                               seed=self.rng.randrange(1 << 30))
            for v in ids if v not in self.malicious
        }
        self.score_overrides = {}   # node -> {contact -> shared score}
        self._used_ids = set(ids)
        self.serial = 0

    def is_malicious(self, nid):
        return nid in self.malicious

    def honest_nodes(self):
        return list(self.stores)

    def closest_colluder(self, target):
        """First colluder at or after target, wrapping."""
        if not self.colluders:
            return None
        i = bisect_left(self.colluders, target % self.space)
        return self.colluders[i % len(self.colluders)]

    def finger_bucket(self, nid, offset):
        """Contacts for offset: the canonical finger and the nodes just
        before it, bucket_size in all."""
        canon = self.ring.finger(nid, offset)
        out = [canon]
        cur = canon
        while len(out) < self.bucket_size:
            cur = self.ring.predecessor(cur)
            if cur == canon or cur == nid:
                break
            out.append(cur)
        return out

    def contact_score(self, nid, contact):
        """Score nid assigns contact: shared override first, then own."""
        shared = self.score_overrides.get(nid)
        if shared is not None and contact in shared:
            return shared[contact]
        return self.stores[nid].score((contact,))

    def select_contact(self, nid, candidates):
        store = self.stores[nid]
        return store.select_max(candidates,
                                score_fn=lambda c: self.contact_score(nid, c))

    def leave(self, nid):
        self.ring.remove(nid)
        if nid in self.malicious:
            self.malicious.discard(nid)
            i = bisect_left(self.colluders, nid)
            del self.colluders[i]
        else:
            self.stores.pop(nid, None)
            self.score_overrides.pop(nid, None)

    def join(self, malicious=False):
        """Add one node under a fresh uniform id, never reusing an id.

        Every honest node pins the low join score on the newcomer, so a
        white-washing rejoin starts below any established track record.
        """
        while True:
            nid = self.rng.randrange(self.space)
            if nid not in self._used_ids:
                break
        self._used_ids.add(nid)
        self.ring.add(nid)
        if malicious:
            self.malicious.add(nid)
            insort(self.colluders, nid)
        else:
            self.stores[nid] = ReputationStore(
                join_score=self.join_score,
                seed=self.rng.randrange(1 << 30))
        if self.join_score is not None:
            mark = (nid,)
            for store in self.stores.values():
                store.priors[mark] = self.join_score
        return nid


def build_halo(n, colluding=0.0, seed=0, **kwargs):
    return HaloNetwork(n, colluding, seed, **kwargs)


def knuckle_interval(net, target, offset):
    """Clockwise-open id interval (lo, hi] whose nodes hold owner(target)
    as their offset-i finger."""
    v = net.ring.owner(target)
    off = 1 << offset
    lo = (net.ring.predecessor(v) - off) % net.space
    hi = (v - off) % net.space
    return lo, hi


def _interval_nodes(ring, lo, hi):
    """Live nodes in the clockwise-open interval (lo, hi]."""
    if lo == hi:
        return []
    ids = ring.ids
    i = bisect_left(ids, (lo + 1) % ring.space)
    j = bisect_left(ids, (hi + 1) % ring.space)
    if (lo + 1) % ring.space <= hi:
        return ids[i:j]
    return ids[i:] + ids[:j]


def knuckle_exists(net, target, offset):
    lo, hi = knuckle_interval(net, target, offset)
    return len(_interval_nodes(net.ring, lo, hi)) > 0


def knuckles(net, target):
    """All nodes holding owner(target) in their finger table."""
    v = net.ring.owner(target)
    out = set()
    for offset in range(net.bits):
        lo, hi = knuckle_interval(net, target, offset)
        out.update(_interval_nodes(net.ring, lo, hi))
    out.discard(v)
    return out


def chord_next_hop(net, v, target, successors_window=0, avoid=()):
    """v's finger landing closest to target without reaching it.

    Returns v itself when no finger makes progress, meaning v is
    target's predecessor.  With successors_window > 0, v checks that
    many entries of its successor list first and hands back target's
    predecessor directly when target falls inside.  Contacts in avoid
    are sidestepped via bucket alternates when possible, which keeps
    redundant subsearches on disjoint paths.
    """
    d = ring_distance(v, target, net.bits)
    if d == 0:
        return v
    if successors_window:
        succ = net.ring.successors(v, min(successors_window,
                                          net.successor_count))
        if succ and d <= ring_distance(v, succ[-1], net.bits):
            return net.ring.predecessor(target)
    fallback = None
    i = d.bit_length() - 1
    while i >= 0:
        usable = _bucket_progress(net, v, i, d)
        if usable:
            if fallback is None:
                fallback = usable[0]
            for f in usable:
                if f not in avoid:
                    return f
        i -= 1
    return v if fallback is None else fallback


def _bucket_progress(net, v, offset, d):
    """Bucket members at offset that advance toward the target, best
    progress first."""
    out = [c for c in net.finger_bucket(v, offset)
           if c != v and ring_distance(v, c, net.bits) < d]
    out.sort(key=lambda c: ring_distance(v, c, net.bits), reverse=True)
    return out


def reds_next_hop(net, v, target, store=None, avoid=()):
    """Reputation-guided next hop: v picks the best-scored member of the
    finger bucket nearest the remaining distance.

    Selection is deterministic maximum score; equal scores fall back to
    path diversity, then to the selector's sticky seeded tie-break.  A
    bucket whose members all score below the newcomer baseline (they
    have been observed doing worse than a node with no history at all)
    is skipped for the next farther bucket, trading a little progress
    for a contact not known to be bad.  v must be honest (it needs a
    reputation store).
    """
    d = ring_distance(v, target, net.bits)
    if d == 0:
        return v
    if net.route_window:
        succ = net.ring.successors(v, min(net.route_window,
                                          net.successor_count))
        if succ and d <= ring_distance(v, succ[-1], net.bits):
            return net.ring.predecessor(target)
    if store is None:
        if v not in net.stores:
            return chord_next_hop(net, v, target, avoid=avoid)
        owner_store = net.stores[v]
        score = lambda c: net.contact_score(v, c)
    else:
        owner_store = store
        score = lambda c: store.score((c,))

    def pick_from(members):
        best = max(score(c) for c in members)
        top = [c for c in members if score(c) == best]
        fresh = [c for c in top if c not in avoid] or top
        return owner_store.select_max(fresh, score_fn=score), best

    floor = net.join_score if net.join_score is not None \
        else owner_store.prior
    nearest = None
    for i in range(d.bit_length() - 1, -1, -1):
        usable = _bucket_progress(net, v, i, d)
        if not usable:
            continue
        cand, best = pick_from(usable)
        if nearest is None:
            nearest = cand
        if best >= floor:
            return cand
    # every bucket looks bad; stick with the nearest bucket's best
    return v if nearest is None else nearest


def _window_covers(net, u, y):
    """Whether u holds y's region in its successor list, so u can name
    both pred(y) and owner(y) itself."""
    if not net.route_window:
        return False
    succ = net.ring.successors(u, min(net.route_window, net.successor_count))
    return bool(succ) and ring_distance(u, y, net.bits) <= \
        ring_distance(u, succ[-1], net.bits)


def _route_to_predecessor(net, origin, y, mode, attacked, avoid):
    """Iteratively route from origin toward pred(y).

    Returns (w, path, hijack_kind, covered).  Each hop is a network
    contact; a colluder contacted during an attacked lookup hijacks the
    subsearch.  covered is set when the hijacker is pred(y) itself but
    the hop that named it was short-circuiting over its successor list,
    so the origin learned owner(y) from that honest node as well and a
    lying predecessor cannot conceal it.  Nodes in avoid were contacted
    by earlier subsearches of the same lookup and are detoured around
    when an alternate contact exists.
    """
    path = []
    cur = origin
    guard = 2 * net.bits
    while guard:
        guard -= 1
        if cur == origin:
            if mode in REPUTED_MODES:
                nxt = reds_next_hop(net, cur, y, avoid=avoid)
            else:
                nxt = chord_next_hop(net, cur, y,
                                     successors_window=net.route_window,
                                     avoid=avoid)
        elif mode in ("collaborative", "shared") and cur not in net.malicious:
            nxt = reds_next_hop(net, cur, y, avoid=avoid)
        else:
            nxt = chord_next_hop(net, cur, y,
                                 successors_window=net.route_window,
                                 avoid=avoid)
        if nxt == cur:
            return cur, path, None, False
        path.append(nxt)
        if attacked and nxt in net.malicious:
            kind = "start" if len(path) == 1 else (
                "knuckle" if nxt == net.ring.predecessor(y) else "path")
            covered = nxt == net.ring.predecessor(y) and \
                _window_covers(net, cur, y)
            return None, path, kind, covered
        cur = nxt
    return cur, path, None, False


def _subsearch(net, origin, target, offset, mode, attacked, avoid):
    y = (target - (1 << offset)) % net.space
    exists = knuckle_exists(net, target, offset)
    w, path, hijack, covered = _route_to_predecessor(net, origin, y, mode,
                                                     attacked, avoid)
    if hijack is not None and not covered:
        return Subsearch(offset, tuple(path), None,
                         net.closest_colluder(target), len(path),
                         hijack, exists)
    z = net.ring.owner(y)
    if hijack is not None:
        # pred(y) hijacked, but the short-circuiting hop already named
        # owner(y), so the probe of z goes ahead regardless
        candidates = [net.closest_colluder(target)]
        if not (attacked and z in net.malicious):
            candidates.append(net.ring.finger(z, offset))
        best = clockwise_closest(target, candidates, net.bits)
        return Subsearch(offset, tuple(path), z, best, len(path) + 1,
                         hijack, exists)
    candidates = [net.ring.finger(w, offset)]
    contacts = len(path)
    if z != w:
        contacts += 1
        if attacked and z in net.malicious:
            candidates.append(net.closest_colluder(target))
            hijack = "knuckle"
        else:
            candidates.append(net.ring.finger(z, offset))
    best = clockwise_closest(target, candidates, net.bits)
    return Subsearch(offset, tuple(path), z, best, contacts, hijack, exists)


def halo_lookup(net, origin, target, redundancy=None, mode="regular",
                policy=None, serial=None, record=False, record_depth=2):
    """Run one redundant lookup and consolidate the subsearch answers.

    With record, the origin counts each subsearch path as a success or
    failure by whether it agreed with the consolidated answer; those
    counters drive contact selection in the reputation-guided modes.
    """
    if mode not in MODES:
        raise ValueError("unknown mode %r" % mode)
    if origin in net.malicious:
        raise ValueError("lookup origin must be honest")
    r = net.redundancy if redundancy is None else redundancy
    if r < 1:
        raise ValueError("redundancy must be positive")
    if serial is None:
        serial = net.serial
        net.serial += 1
    attacked = bool(policy.should_attack(serial)) if policy is not None else False
    subs = []
    contacted = set()
    for k in range(r):
        sub = _subsearch(net, origin, target, net.bits - 1 - k, mode,
                         attacked, contacted)
        contacted.update(sub.path)
        if sub.neighbor is not None:
            contacted.add(sub.neighbor)
        subs.append(sub)
    answer = clockwise_closest(
        target, [s.candidate for s in subs], net.bits)
    store = net.stores[origin]
    for s in subs:
        s.agreed = s.candidate == answer
        if record and mode in REPUTED_MODES and s.path:
            store.record_path(s.path, s.agreed, max_depth=record_depth)
    return LookupOutcome(origin, target, net.ring.owner(target), answer,
                         attacked, mode, subs)


def classify_failure(sub):
    """Reason a failed subsearch missed the owner, most specific first."""
    if sub.hijack == "start":
        return START_COLLUDER
    if sub.hijack == "path":
        return BAD_NODE_IN_PATH
    if sub.hijack == "knuckle":
        return KNUCKLE_COLLUDER
    if not sub.knuckle_exists:
        return KNUCKLE_NONEXISTENT
    return WRONG_SUCCESSOR
