"""
This module implements a general purpose directed graph data structure.
Vertices and edges are kept in insertion order, so all iterations are deterministic.
"""

from typing import *

class Graph[V, T]:
    """
    A directed graph with vertices of type V. This type must be hashable, it is usually
    a str. T is the data associated with V. It can be of arbitrary type.

    Multiple edges between the same pair of vertices are collapsed into one; callers
    that need parallel edges keep the edge payloads themselves.
    """
    def __init__(self):
        self.__vertexData: dict[V, T] = {}
        self.__succs: dict[V, list[V]] = {}
        self.__preds: dict[V, list[V]] = {}
    def __repr__(self):
        return f'Graph(vertices={list(self.__vertexData.keys())}, edges={self.edges})'
    def addVertex(self, v: V, x: T):
        """
        Adds a new vertex v, with associated data x.
        """
        if v in self.__vertexData:
            raise ValueError(f'Vertex {v} already added to graph')
        self.__vertexData[v] = x
        self.__succs[v] = []
        self.__preds[v] = []
    def hasVertex(self, v: V):
        return v in self.__vertexData
    def __assertVertex(self, v: V):
        if v not in self.__vertexData:
            raise ValueError(f'Unknown vertex: {v}')
    def addEdge(self, src: V, tgt: V):
        """
        Adds an edge from vertex src to vertex tgt. Adding an existing edge again
        has no effect.
        """
        self.__assertVertex(src)
        self.__assertVertex(tgt)
        if tgt not in self.__succs[src]:
            self.__succs[src].append(tgt)
            self.__preds[tgt].append(src)
    def hasEdge(self, src: V, tgt: V) -> bool:
        return src in self.__succs and tgt in self.__succs[src]
    def getData(self, v: V) -> T:
        """
        Returns the data associated with vertex v.
        """
        return self.__vertexData[v]
    def setData(self, v: V, x: T):
        self.__assertVertex(v)
        self.__vertexData[v] = x
    @property
    def values(self) -> Iterable[T]:
        """
        Returns an iterable with all data associated with any vertex.
        """
        return self.__vertexData.values()
    @property
    def vertices(self) -> Iterable[V]:
        """
        Returns an iterable with vertices, in insertion order.
        """
        return self.__vertexData.keys()
    def succs(self, v: V) -> list[V]:
        """
        Given a vertex v, returns all vertices w such that there exists an edge
        from v to w.
        """
        return list(self.__succs.get(v, []))
    def preds(self, v: V) -> list[V]:
        """
        Given a vertex v, returns all vertices w such that there exists an edge
        from w to v.
        """
        return list(self.__preds.get(v, []))
    @property
    def edges(self) -> list[tuple[V, V]]:
        """
        Returns all edges of the graph.
        """
        res: list[tuple[V, V]] = []
        for src, tgts in self.__succs.items():
            for tgt in tgts:
                res.append((src, tgt))
        return res
    def reachable(self, src: V) -> set[V]:
        """
        Returns all vertices reachable from src, including src itself.
        """
        self.__assertVertex(src)
        seen: set[V] = {src}
        todo = [src]
        while todo:
            v = todo.pop()
            for w in self.__succs[v]:
                if w not in seen:
                    seen.add(w)
                    todo.append(w)
        return seen
    def hasPath(self, src: V, tgt: V) -> bool:
        return tgt in self.reachable(src)
