"""Kademlia-style overlay with iterative parallel lookups.

Nodes keep one k-bucket per shared-prefix length and learn contacts
opportunistically from lookup traffic, which is exactly what a
colluding adversary exploits: attacked queries answer with the
colluders nearest the key, and even unattacked ones pad their answers
with colluders to pollute routing tables.  The reputation variants
fight back at three points: the querier picks contacts by score, every
honest responder picks within its bucket by score, and bucket eviction
ejects the worst-scoring entry instead of the least recent one.

Lookup accounting follows a per-lookup graph of who returned whom.
When a lookup ends at the true closest replica root, a depth-first
walk from that root credits every node on a returning path; everything
else seen in the lookup records a miss.
"""

import random
from bisect import bisect_left, insort

from .idspace import sample_ids, shared_prefix_bits, xor_closest, xor_distance
from .reputation import ReputationStore

DEFAULT_BITS = 32
DEFAULT_K = 10
DEFAULT_ALPHA = 7
DEFAULT_BETA = 3
DEFAULT_REPLICAS = 10
DEFAULT_TOLERANCE_BITS = 8

MODES = ("regular", "aboost", "collaborative")
REPUTED_MODES = ("aboost", "collaborative")

# Colluders answering a query sample their substitutes from this many
# of the closest qualifying colluders, trading spread (more routing
# table exposure) against precision (faster capture of the frontier).
POOL_CAP = 10


class KadNode:
    """One participant: id, bucket state, and contact bookkeeping."""

    def __init__(self, nid, malicious=False, bits=DEFAULT_BITS):
        self.id = nid
        self.malicious = malicious
        self.bits = bits
        self.buckets = {}     # shared-prefix length -> list of contact ids
        self.last_seen = {}   # contact id -> monotonic activity serial
        self.sorted_contacts = []

    def contacts(self):
        return self.sorted_contacts

    def knows(self, nid):
        i = bisect_left(self.sorted_contacts, nid)
        return (i < len(self.sorted_contacts)
                and self.sorted_contacts[i] == nid)

    def drop(self, nid):
        """Remove a contact observed to be gone."""
        j = shared_prefix_bits(self.id, nid, self.bits)
        bucket = self.buckets.get(j)
        if bucket and nid in bucket:
            bucket.remove(nid)
        self.last_seen.pop(nid, None)
        i = bisect_left(self.sorted_contacts, nid)
        if (i < len(self.sorted_contacts)
                and self.sorted_contacts[i] == nid):
            del self.sorted_contacts[i]


class LookupGraph:
    """Directed multigraph of one lookup: an edge u -> v records that v
    returned u.  The querying node is a vertex; parallel edges and
    cycles are kept as reported."""

    def __init__(self, q):
        self.q = q
        self.vertices = {q}
        self.edges = []   # (child, parent) in arrival order
        self.out = {}     # child -> list of parents

    def add_edge(self, u, v):
        self.vertices.add(u)
        self.vertices.add(v)
        self.edges.append((u, v))
        self.out.setdefault(u, []).append(v)


class KadLookupOutcome:
    """Result of one iterative lookup, with the evidence to score it."""

    def __init__(self, key, shortlist, found_roots, closest_root, success,
                 graph, steps, queried):
        self.key = key
        self.shortlist = shortlist
        self.found_roots = found_roots
        self.closest_root = closest_root
        self.success = success
        self.graph = graph
        self.steps = steps
        self.queried = queried


class KadNetwork:
    """Live overlay state: nodes, colluder set, per-node reputation."""

    def __init__(self, n, colluding=0.0, seed=0, bits=DEFAULT_BITS,
                 k=DEFAULT_K, alpha=DEFAULT_ALPHA, beta=DEFAULT_BETA,
                 replica_count=DEFAULT_REPLICAS,
                 tolerance_bits=DEFAULT_TOLERANCE_BITS, bootstrap=None):
        if n < 2:
            raise ValueError("need at least two nodes")
        if not 0.0 <= colluding < 1.0:
            raise ValueError("colluding fraction outside [0, 1)")
        if replica_count < 1:
            raise ValueError("need at least one replica root")
        self.bits = bits
        self.space = 1 << bits
        self.k = k
        self.alpha = alpha
        self.beta = beta
        self.replica_count = replica_count
        self.tolerance_bits = tolerance_bits
        self.rng = random.Random(seed)
        ids = sample_ids(n, self.rng, bits)
        self.ids = sorted(ids)
        bad = self.rng.sample(ids, int(colluding * n))
        self.malicious = set(bad)
        self.colluders = sorted(bad)
        self.nodes = {v: KadNode(v, v in self.malicious, bits)
                      for v in ids}
        self.stores = {
            v: ReputationStore(seed=self.rng.randrange(1 << 30))
            for v in ids if v not in self.malicious
        }
        self.bootstrap = (max(1, (n - 1).bit_length())
                          if bootstrap is None else bootstrap)
        self._used_ids = set(ids)
        self.serial = 0
        self.clock = 0
        for v in ids:
            self._seed_contacts(v)

    def _seed_contacts(self, v):
        """Bootstrap a node with a handful of random live peers.  All
        further knowledge, including who knows the newcomer, spreads
        through lookup traffic."""
        others = [u for u in self.ids if u != v]
        if not others:
            return
        node = self.nodes[v]
        for u in self.rng.sample(others, min(self.bootstrap, len(others))):
            bucket_insert(self, node, u)

    def is_malicious(self, nid):
        return nid in self.malicious

    def honest_nodes(self):
        return [v for v in self.ids if v not in self.malicious]

    def tick(self):
        self.clock += 1
        return self.clock

    def replica_roots(self, key):
        """The closest replica_count nodes agreeing with key in the
        first tolerance_bits bits, nearest first."""
        near = xor_closest(self.ids, key, self.replica_count, self.bits)
        return [u for u in near
                if shared_prefix_bits(u, key, self.bits)
                >= self.tolerance_bits]

    def truth_root(self, key):
        roots = self.replica_roots(key)
        return roots[0] if roots else None

    def random_key(self, rng):
        """A lookup key guaranteed to have at least one replica root in
        search tolerance."""
        while True:
            key = rng.randrange(self.space)
            if self.truth_root(key) is not None:
                return key

    def closest_colluders(self, key, count):
        if not self.colluders:
            return []
        return xor_closest(self.colluders, key, count, self.bits)

    def colluders_within(self, key, floor_bits):
        """All colluders agreeing with key in at least floor_bits
        leading bits, as a sorted id list."""
        if floor_bits <= 0:
            return list(self.colluders)
        if floor_bits > self.bits:
            return []
        width = 1 << (self.bits - floor_bits)
        lo = key & ~(width - 1)
        i = bisect_left(self.colluders, lo)
        j = bisect_left(self.colluders, lo + width)
        return self.colluders[i:j]

    def leave(self, nid):
        if nid not in self.nodes:
            raise KeyError(nid)
        del self.nodes[nid]
        i = bisect_left(self.ids, nid)
        del self.ids[i]
        if nid in self.malicious:
            self.malicious.discard(nid)
            i = bisect_left(self.colluders, nid)
            del self.colluders[i]
        else:
            self.stores.pop(nid, None)

    def join(self, malicious=False):
        """Add a node under a fresh uniform id and bootstrap it."""
        while True:
            nid = self.rng.randrange(self.space)
            if nid not in self._used_ids:
                break
        self._used_ids.add(nid)
        insort(self.ids, nid)
        node = KadNode(nid, malicious, self.bits)
        self.nodes[nid] = node
        if malicious:
            self.malicious.add(nid)
            insort(self.colluders, nid)
        else:
            self.stores[nid] = ReputationStore(
                seed=self.rng.randrange(1 << 30))
        self._seed_contacts(nid)
        return nid


def build_kad(n, colluding=0.0, seed=0, **kwargs):
    return KadNetwork(n, colluding, seed, **kwargs)


def bucket_insert(net, node, candidate, reds=False, active=True):
    """File candidate into node's bucket for their shared prefix.

    A full bucket evicts the least-recently-seen entry, or under the
    reputation policy the lowest-scored entry with least-recently-seen
    breaking ties.  Re-encounters only refresh the activity clock.
    Passive sightings (active=False) fill spare bucket space but never
    displace or refresh anything: only contacts a node chose to talk
    to earn that.
    """
    if candidate == node.id:
        raise ValueError("node cannot bucket itself")
    if not active:
        if node.knows(candidate):
            return
        j = shared_prefix_bits(node.id, candidate, net.bits)
        bucket = node.buckets.setdefault(j, [])
        if len(bucket) >= net.k:
            return
        bucket.append(candidate)
        node.last_seen[candidate] = net.tick()
        insort(node.sorted_contacts, candidate)
        return
    now = net.tick()
    if node.knows(candidate):
        node.last_seen[candidate] = now
        return
    j = shared_prefix_bits(node.id, candidate, net.bits)
    bucket = node.buckets.setdefault(j, [])
    if len(bucket) >= net.k:
        if reds and not node.malicious:
            counts = net.stores[node.id].counts
            worst = min(bucket,
                        key=lambda u: (counts.get((u,), (0, 0))[0],
                                       node.last_seen[u]))
        else:
            worst = min(bucket, key=lambda u: node.last_seen[u])
        bucket.remove(worst)
        node.last_seen.pop(worst, None)
        i = bisect_left(node.sorted_contacts, worst)
        del node.sorted_contacts[i]
    bucket.append(candidate)
    node.last_seen[candidate] = now
    insort(node.sorted_contacts, candidate)


def graph_step(graph, q, step, queried, returned):
    """Fold one query's results into the lookup graph.

    First-step queries point at the querying node itself; every
    returned contact points at whoever returned it, adding vertices
    only when new so duplicate answers become parallel paths.
    """
    if step == 0:
        graph.add_edge(queried, q)
    else:
        graph.vertices.add(queried)
    for b in returned:
        graph.add_edge(b, queried)
    return graph


def credit_reputation(q, graph, closest_root):
    """Vertices on returning paths from the found root, by depth-first
    walk.  Each vertex is visited once, the walk never crosses the
    querying node, and the root itself earns credit."""
    if closest_root not in graph.vertices:
        raise KeyError(closest_root)
    credited = set()
    stack = [closest_root]
    while stack:
        u = stack.pop()
        if u in credited or u == q:
            continue
        credited.add(u)
        stack.extend(graph.out.get(u, ()))
    return credited


def _respond(net, v, key, attacked, mode, beta):
    """Contacts v returns for key.

    Honest nodes normally answer with the closest contacts they know;
    under collaborative boosting they answer with the contacts they
    trust most among those sitting closer to the key than themselves,
    so the reply still makes progress but favors proven contacts over
    merely near ones.
    Colluders pollute: whether or not the
    lookup is under attack they answer with the fellow colluders
    closest to the key, drawn from those at least one bit closer to it
    than themselves (anything farther would be ignored).  Only when no
    colluder can make progress does a non-attacking colluder hand over
    the true closest replica root, protecting its reputation.
    """
    node = net.nodes[v]
    if node.malicious:
        floor = shared_prefix_bits(v, key, net.bits) + 1
        closer = [m for m in net.colluders_within(key, floor) if m != v]
        if closer:
            closer.sort(key=lambda m: xor_distance(m, key))
            pool = closer[:POOL_CAP]
            if len(pool) <= beta:
                return pool
            return net.rng.sample(pool, beta)
        if attacked:
            return net.closest_colluders(key, beta)
        out = []
        truth = net.truth_root(key)
        if truth is not None and node.knows(truth):
            out.append(truth)
        for u in xor_closest(node.sorted_contacts, key, beta, net.bits):
            if u not in out:
                out.append(u)
        return out[:beta]
    if mode == "collaborative":
        own = xor_distance(v, key)
        closer = [u for u in node.sorted_contacts
                  if xor_distance(u, key) < own]
        store = net.stores[v]
        closer.sort(key=lambda u: (-store.score((u,)),
                                   xor_distance(u, key)))
        return closer[:beta]
    return xor_closest(node.sorted_contacts, key, beta, net.bits)


def _nominate(net, v, key, attacked, roots):
    """The id v offers the querier as final answer, or None.

    Replica roots identify themselves when queried.  An attacked
    colluder instead names the colluder closest to the key.  A
    colluder not attacking this lookup names the true root if it has
    run out of closer colluders to pollute with, provided it actually
    knows that root.
    """
    if net.is_malicious(v):
        if attacked:
            return net.closest_colluders(key, 1)[0]
        floor = shared_prefix_bits(v, key, net.bits) + 1
        if any(m != v for m in net.colluders_within(key, floor)):
            return v if v in roots else None
        truth = net.truth_root(key)
        if truth is not None and net.nodes[v].knows(truth):
            return truth
    return v if v in roots else None


def _iterate(net, q, key, mode, attacked, store, k, alpha, beta):
    """Core of the iterative search: returns graph, nominations,
    queried, dead, shortlist, and step count.

    Keeps a shortlist of the k closest contacts heard of, querying the
    alpha best unqueried entries each step: closest-first normally, or
    by q's own scores in the reputation modes.  The search ends when
    the k closest live entries have all been queried.  Contacts
    observed dead are purged from the shortlist, q's buckets, and q's
    score table.
    """
    node_q = net.nodes[q]
    roots = set(net.replica_roots(key))
    reds = mode in REPUTED_MODES and store is not None
    graph = LookupGraph(q)
    dist = {}
    shortlist = []    # (xor distance to key, id), insort-maintained
    def consider(u):
        if u != q and u not in dist:
            dist[u] = xor_distance(u, key)
            insort(shortlist, (dist[u], u))
    for u in node_q.contacts():
        consider(u)
    queried = set()
    dead = set()
    nominated = set()
    step = 0
    while True:
        top = []
        for d, u in shortlist:
            if u not in dead:
                top.append(u)
                if len(top) == k:
                    break
        batch = [u for u in top if u not in queried]
        if not batch:
            break
        if reds:
            batch.sort(key=lambda u: (-store.score((u,)), dist[u]))
        for v in batch[:alpha]:
            queried.add(v)
            if v not in net.nodes:
                # observed departure: forget the contact everywhere
                dead.add(v)
                node_q.drop(v)
                if store is not None:
                    store.on_leave((v,))
                continue
            returned = [u for u in _respond(net, v, key, attacked,
                                            mode, beta) if u != q]
            answer = _nominate(net, v, key, attacked, roots)
            if answer is not None:
                nominated.add(answer)
                if answer not in returned and answer not in (v, q):
                    returned.append(answer)
            graph_step(graph, q, 0 if v not in graph.vertices else step,
                       v, returned)
            bucket_insert(net, node_q, v, reds=reds)
            if not net.nodes[v].malicious:
                bucket_insert(net, net.nodes[v], q, active=False)
            for b in returned:
                if b not in dead:
                    consider(b)
        step += 1
    return graph, nominated, queried, dead, shortlist, step


def kad_lookup(net, q, key, mode="regular", policy=None, record=True,
               alpha=None, beta=None, k=None):
    """Iterative lookup from q for key; returns the outcome with its
    lookup graph.

    The lookup succeeds when the closest root claimed to q is the true
    closest replica root; on success every node on a returning path is
    credited.  Only contacts q actually selected for querying are
    charged a use, so a contact's score is the fraction of times
    selecting it led to the right root.
    """
    if mode not in MODES:
        raise ValueError("unknown mode %r" % (mode,))
    if net.is_malicious(q):
        raise ValueError("querying node is malicious")
    alpha = net.alpha if alpha is None else alpha
    beta = net.beta if beta is None else beta
    k = net.k if k is None else k
    attacked = policy.should_attack(net.serial) if policy is not None \
        else False
    net.serial += 1
    store = net.stores[q]
    truth = net.truth_root(key)
    graph, nominated, queried, dead, shortlist, step = _iterate(
        net, q, key, mode, attacked, store, k, alpha, beta)
    closest_root = min(nominated, key=lambda u: xor_distance(u, key),
                       default=None)
    success = closest_root is not None and closest_root == truth
    if record:
        if success:
            credited = credit_reputation(q, graph, closest_root)
        else:
            credited = set()
        for u in queried:
            if u not in dead:
                store.record((u,), u in credited)
        for u in credited:
            if u != q and u not in queried and u not in dead:
                store.record((u,), True)
    roots = set(net.replica_roots(key))
    return KadLookupOutcome(key, [u for _, u in shortlist[:k]],
                            frozenset(u for u in nominated if u in roots),
                            closest_root, success, graph, step, queried)


def warmup(net, lookups_per_node, mode="regular", policy=None, seed=0,
           record=True):
    """Populate buckets with lookups_per_node lookups from every honest
    node, in a fresh random permutation each round."""
    rng = random.Random(seed)
    for _ in range(lookups_per_node):
        order = net.honest_nodes()
        rng.shuffle(order)
        for q in order:
            if q in net.stores:
                kad_lookup(net, q, net.random_key(rng), mode=mode,
                           policy=policy, record=record)


def pollution_fraction(net):
    """Malicious share of all honest nodes' bucket entries."""
    total = bad = 0
    for v, node in net.nodes.items():
        if node.malicious:
            continue
        for bucket in node.buckets.values():
            total += len(bucket)
            bad += sum(1 for u in bucket if u in net.malicious)
    return bad / total if total else 0.0
