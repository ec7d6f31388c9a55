class UnionFind:
    """Disjoint sets with union by rank and path compression.

    Elements are any hashables; `n_clusters` tracks the number of sets.
    """

    def __init__(self, elements):
        self._leader = {s: s for s in elements}
        self._size = {s: 1 for s in self._leader}
        self._rank = {s: 0 for s in self._leader}
        self.n_clusters = len(self._leader)

    def __repr__(self):
        return f"UnionFind: contains {self.n_clusters} clusters."

    def __contains__(self, s):
        return s in self._leader

    def find(self, s):
        path = [s]
        leader = self._leader[s]
        while leader != self._leader[leader]:
            path.append(leader)
            leader = self._leader[leader]
        for a in path:
            self._leader[a] = leader
        return leader

    def union(self, a, b):
        s1, s2 = self.find(a), self.find(b)
        if s1 == s2:
            return
        if self._rank[s2] > self._rank[s1]:
            s1, s2 = s2, s1
        if self._rank[s1] == self._rank[s2]:
            self._rank[s1] += 1
        self._leader[s2] = s1
        self._size[s1] += self._size[s2]
        self.n_clusters -= 1

    def size(self, s):
        return self._size[self.find(s)]

    def components(self):
        """Sets as sorted lists, ordered by their smallest element."""
        groups = {}
        for s in self._leader:
            groups.setdefault(self.find(s), []).append(s)
        return sorted((sorted(g) for g in groups.values()), key=lambda g: g[0])
